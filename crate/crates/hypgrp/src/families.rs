//! Builders for the named example groups: the Baker-Riley presentation
//! family with its distortion witness words, the ascending-HNN demo, the
//! genus-2 surface group, and the endomorphism composition pipeline.

use crate::error::{Error, Result};
use crate::gog::{compose_amalgam, AscendingHnnSpec, FreeProdSpec, MultiHnnSpec};
use crate::smallcanc::Presentation;
use crate::substitution::{log10_biguint, Endomorphism, TransitionMatrix};
use crate::word::{Alphabet, Word};
use num_bigint::BigUint;
use num_traits::Zero;
use std::sync::Arc;

/// Bit budget for exact big-integer witness lengths. Level 2 needs about
/// 3.7 million bits; level 3 would need billions and is refused.
const EXACT_LENGTH_BIT_BUDGET: f64 = 8.0e6;

/// The two-parameter presentation family: a free group on d₁, d₂ conjugated
/// into itself by c₁, c₂, those conjugated by b, and b conjugated by a.
pub struct BakerRileyFamily {
    r: usize,
    l: usize,
    c_alpha: Arc<Alphabet>,
    d_alpha: Arc<Alphabet>,
    g_cd: Presentation,
    g_bcd: Presentation,
    g: Presentation,
    /// σᵢ: d_j ↦ D_{ij} on F(d₁,d₂).
    sigma: [Endomorphism; 2],
    /// ψ: cᵢ ↦ Cᵢ on F(c₁,c₂).
    psi: Endomorphism,
}

/// Π_{k=start}^{start+count-1} x·y^k over a two-generator alphabet.
fn block_run(alphabet: &Arc<Alphabet>, x: usize, y: usize, start: usize, count: usize) -> Word {
    let lx = Word::letter(alphabet, x, true);
    let ly = Word::letter(alphabet, y, true);
    let mut out = Word::empty(alphabet);
    for k in start..start + count {
        out = out.cat(&lx).cat(&ly.pow(k as i64));
    }
    out
}

pub fn baker_riley(r: usize, l: usize) -> Result<BakerRileyFamily> {
    if r < 2 || l < 2 {
        return Err(Error::InvalidParameter(format!(
            "family parameters need r >= 2 and l >= 2, got r={r}, l={l}"
        )));
    }
    let c_alpha = Alphabet::new(&["c1", "c2"])?;
    let d_alpha = Alphabet::new(&["d1", "d2"])?;
    let cd = Alphabet::new(&["c1", "c2", "d1", "d2"])?;
    let bcd = Alphabet::new(&["b", "c1", "c2", "d1", "d2"])?;
    let g_alpha = Alphabet::new(&["a", "b", "c1", "c2", "d1", "d2"])?;

    let d_ij = |i: usize, j: usize| block_run(&d_alpha, 0, 1, r * (i * l + j) + 1, r);
    let c_i = |i: usize| block_run(&c_alpha, 0, 1, r * i + 1, r);
    let d_j = |j: usize| block_run(&d_alpha, 0, 1, r * j + 1, r);
    let c_full = block_run(&c_alpha, 0, 1, 1, r);

    let mut cd_relators = Vec::new();
    for i in 1..=2 {
        let ci = Word::parse(&cd, &format!("c{i}"))?;
        for j in 1..=2 {
            let dj = Word::parse(&cd, &format!("d{j}"))?;
            let target = d_ij(i, j).embed_into(&cd)?;
            cd_relators.push(ci.cat(&dj).cat(&ci.invert()).cat(&target.invert()));
        }
    }
    let g_cd = Presentation::new(&cd, &cd_relators, "baker_riley_cd")?;

    let mut bcd_relators: Vec<Word> =
        cd_relators.iter().map(|w| w.embed_into(&bcd)).collect::<Result<_>>()?;
    let b = Word::parse(&bcd, "b")?;
    for i in 1..=2 {
        let ci = Word::parse(&bcd, &format!("c{i}"))?;
        let target = c_i(i).embed_into(&bcd)?;
        bcd_relators.push(b.cat(&ci).cat(&b.invert()).cat(&target.invert()));
    }
    let g_bcd = Presentation::new(&bcd, &bcd_relators, "baker_riley_bcd")?;

    let mut g_relators: Vec<Word> =
        bcd_relators.iter().map(|w| w.embed_into(&g_alpha)).collect::<Result<_>>()?;
    let a = Word::parse(&g_alpha, "a")?;
    let bg = Word::parse(&g_alpha, "b")?;
    // a b a⁻¹ = b C⁻¹
    let target = bg.cat(&c_full.embed_into(&g_alpha)?.invert());
    g_relators.push(a.cat(&bg).cat(&a.invert()).cat(&target.invert()));
    for j in 1..=2 {
        let dj = Word::parse(&g_alpha, &format!("d{j}"))?;
        // a d_j a⁻¹ = b D_j b⁻¹
        let target = bg.cat(&d_j(j).embed_into(&g_alpha)?).cat(&bg.invert());
        g_relators.push(a.cat(&dj).cat(&a.invert()).cat(&target.invert()));
    }
    let g = Presentation::new(&g_alpha, &g_relators, "baker_riley_g")?;

    let sigma = [
        Endomorphism::new(&d_alpha, vec![d_ij(1, 1), d_ij(1, 2)])?,
        Endomorphism::new(&d_alpha, vec![d_ij(2, 1), d_ij(2, 2)])?,
    ];
    let psi = Endomorphism::new(&c_alpha, vec![c_i(1), c_i(2)])?;

    Ok(BakerRileyFamily { r, l, c_alpha, d_alpha, g_cd, g_bcd, g, sigma, psi })
}

impl BakerRileyFamily {
    pub fn r(&self) -> usize {
        self.r
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn g_cd(&self) -> &Presentation {
        &self.g_cd
    }

    pub fn g_bcd(&self) -> &Presentation {
        &self.g_bcd
    }

    pub fn g(&self) -> &Presentation {
        &self.g
    }

    pub fn sigma(&self, i: usize) -> Result<&Endomorphism> {
        self.sigma.get(i.wrapping_sub(1)).ok_or_else(|| {
            Error::InvalidParameter(format!("sigma index must be 1 or 2, got {i}"))
        })
    }

    pub fn psi(&self) -> &Endomorphism {
        &self.psi
    }

    pub fn c_alphabet(&self) -> &Arc<Alphabet> {
        &self.c_alpha
    }

    pub fn d_alphabet(&self) -> &Arc<Alphabet> {
        &self.d_alpha
    }

    /// C = c₁c₂ c₁c₂² … c₁c₂^r over F(c₁,c₂).
    pub fn c_word(&self) -> Word {
        block_run(&self.c_alpha, 0, 1, 1, self.r)
    }

    pub fn c_i(&self, i: usize) -> Result<Word> {
        self.check_index(i)?;
        Ok(block_run(&self.c_alpha, 0, 1, self.r * i + 1, self.r))
    }

    pub fn d_j(&self, j: usize) -> Result<Word> {
        self.check_index(j)?;
        Ok(block_run(&self.d_alpha, 0, 1, self.r * j + 1, self.r))
    }

    pub fn d_ij(&self, i: usize, j: usize) -> Result<Word> {
        self.check_index(i)?;
        self.check_index(j)?;
        Ok(block_run(&self.d_alpha, 0, 1, self.r * (i * self.l + j) + 1, self.r))
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if (1..=2).contains(&i) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("block index must be 1 or 2, got {i}")))
        }
    }

    /// u_n spelled through the top two layers: bⁿ c₁ b⁻ⁿ.
    pub fn u_outer(&self, n: usize) -> Word {
        let alpha = self.g.alphabet();
        let b = Word::letter(alpha, 1, true);
        let c1 = Word::letter(alpha, 2, true);
        b.pow(n as i64).cat(&c1).cat(&b.pow(-(n as i64)))
    }

    /// u_n as an element of F(c₁,c₂): ψⁿ(c₁). None when the expansion
    /// exceeds `cap` letters.
    pub fn u_inner(&self, n: usize, cap: usize) -> Result<Option<Word>> {
        expand_capped(&self.psi, n, &Word::letter(&self.c_alpha, 0, true), cap)
    }

    /// |ψⁿ(c₁)|, exact: ψ is positive, so the matrix count is the reduced
    /// length.
    pub fn u_exact_length(&self, n: usize) -> BigUint {
        let m = self.psi.letter_count_matrix().pow(n as u64);
        m.entry(0, 0) + m.entry(1, 0)
    }

    /// w_n spelled through the top two layers: u_n d₁ u_n⁻¹, length 4n+3.
    pub fn w_outer(&self, n: usize) -> Word {
        let alpha = self.g.alphabet();
        let d1 = Word::letter(alpha, 4, true);
        let u = self.u_outer(n);
        u.cat(&d1).cat(&u.invert())
    }

    /// w_n as an element of F(d₁,d₂): σ applied along the letters of ψⁿ(c₁)
    /// to d₁. None when any stage exceeds `cap` letters.
    pub fn w_word(&self, n: usize, cap: usize) -> Result<Option<Word>> {
        let u = match self.u_inner(n, cap)? {
            Some(u) => u,
            None => return Ok(None),
        };
        let mut v = Word::letter(&self.d_alpha, 0, true);
        for &l in u.letters().iter().rev() {
            v = match self.sigma[l.generator()].apply_capped(&v, cap) {
                Some(w) => w,
                None => return Ok(None),
            };
        }
        Ok(Some(v))
    }

    /// The level recurrence for the substitution composed along ψⁿ(c₁):
    /// A_i⁽⁰⁾ is σᵢ's count matrix and A_i⁽ᵏ⁺¹⁾ multiplies A⁽ᵏ⁾-matrices
    /// along the letters of Cᵢ. Runs `levels` steps and returns [A₁, A₂].
    fn level_matrices(&self, levels: usize) -> [TransitionMatrix; 2] {
        let mut a = [
            self.sigma[0].letter_count_matrix(),
            self.sigma[1].letter_count_matrix(),
        ];
        for _ in 0..levels {
            let mut next = Vec::with_capacity(2);
            for i in 1..=2 {
                let mut acc = TransitionMatrix::identity(2);
                let mut pow = a[1].pow((self.r * i) as u64);
                for _ in 0..self.r {
                    pow = pow.mul(&a[1]);
                    acc = acc.mul(&a[0]).mul(&pow);
                }
                next.push(acc);
            }
            a = [next.remove(0), next.remove(0)];
        }
        a
    }

    /// |w_n| as an exact big integer. Refused above the bit budget; use
    /// `w_log10_length` there.
    pub fn w_exact_length(&self, n: usize) -> Result<BigUint> {
        let projected = self.w_log10_length(n)? * std::f64::consts::LOG2_10;
        if projected > EXACT_LENGTH_BIT_BUDGET {
            return Err(Error::ResourceCap(format!(
                "exact length of the level-{n} witness needs about {projected:.0} bits"
            )));
        }
        let a1 = &self.level_matrices(n)[0];
        Ok(a1.entry(0, 0) + a1.entry(1, 0))
    }

    /// log₁₀ |w_n| through the same recurrence run in log space.
    pub fn w_log10_length(&self, n: usize) -> Result<f64> {
        if n > 64 {
            return Err(Error::InvalidParameter("witness level too deep".into()));
        }
        let mut a = [
            LogMat::from(&self.sigma[0].letter_count_matrix()),
            LogMat::from(&self.sigma[1].letter_count_matrix()),
        ];
        for _ in 0..n {
            let mut next = Vec::with_capacity(2);
            for i in 1..=2 {
                let mut acc = LogMat::identity();
                let mut pow = a[1].pow(self.r * i);
                for _ in 0..self.r {
                    pow = pow.mul(&a[1]);
                    acc = acc.mul(&a[0]).mul(&pow);
                }
                next.push(acc);
            }
            a = [next[0], next[1]];
        }
        Ok(log10_sum(a[0].0[0][0], a[0].0[1][0]))
    }
}

/// A 2×2 matrix of log₁₀ magnitudes; products use log-sum-exp, so only
/// relative rounding accumulates.
#[derive(Copy, Clone)]
struct LogMat([[f64; 2]; 2]);

fn log10_sum(x: f64, y: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return y;
    }
    if y == f64::NEG_INFINITY {
        return x;
    }
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    hi + (1.0 + 10f64.powf(lo - hi)).log10()
}

impl LogMat {
    fn identity() -> LogMat {
        LogMat([[0.0, f64::NEG_INFINITY], [f64::NEG_INFINITY, 0.0]])
    }

    fn from(m: &TransitionMatrix) -> LogMat {
        let mut out = [[0.0; 2]; 2];
        for (p, row) in out.iter_mut().enumerate() {
            for (q, cell) in row.iter_mut().enumerate() {
                let e = m.entry(p, q);
                *cell = if e.is_zero() { f64::NEG_INFINITY } else { log10_biguint(e) };
            }
        }
        LogMat(out)
    }

    fn mul(&self, other: &LogMat) -> LogMat {
        let mut out = [[f64::NEG_INFINITY; 2]; 2];
        for p in 0..2 {
            for q in 0..2 {
                for (k, row) in other.0.iter().enumerate() {
                    out[p][q] = log10_sum(out[p][q], self.0[p][k] + row[q]);
                }
            }
        }
        LogMat(out)
    }

    fn pow(&self, mut e: usize) -> LogMat {
        let mut base = *self;
        let mut acc = LogMat::identity();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }
}

/// φⁿ(w) materialized, None once the reduced image provably exceeds `cap`.
fn expand_capped(endo: &Endomorphism, n: usize, w: &Word, cap: usize) -> Result<Option<Word>> {
    let mut cur = w.clone();
    if cur.len() > cap {
        return Ok(None);
    }
    for _ in 0..n {
        cur = match endo.apply_capped(&cur, cap) {
            Some(next) => next,
            None => return Ok(None),
        };
    }
    Ok(Some(cur))
}

/// K = F(a,b) with φ: a ↦ ab, b ↦ ba and stable letter t.
pub fn ascending_demo() -> AscendingHnnSpec {
    let k = Alphabet::new(&["a", "b"]).expect("fixed names");
    let phi = Endomorphism::parse(&k, "a -> ab, b -> ba").expect("fixed images");
    AscendingHnnSpec::new(phi, "t").expect("injective by construction")
}

/// The free product K*⟨t⟩ paired with the demo endomorphism for base rays.
pub fn ascending_demo_g1() -> FreeProdSpec {
    let k = Alphabet::new(&["a", "b"]).expect("fixed names");
    let phi = Endomorphism::parse(&k, "a -> ab, b -> ba").expect("fixed images");
    FreeProdSpec::new(&k, "t", Some(phi)).expect("fresh stable letter")
}

/// ⟨a,b,c,d | [a,b][c,d]⟩.
pub fn genus2() -> Presentation {
    let alpha = Alphabet::new(&["a", "b", "c", "d"]).expect("fixed names");
    let r = Word::parse(&alpha, "abABcdCD").expect("fixed relator");
    Presentation::new(&alpha, &[r], "genus2").expect("nontrivial relator")
}

/// Output of the endomorphism composition pipeline: the multiple ascending
/// extension H, the composed group G with one more stable letter on top, the
/// free product G₁ used for boundary rays, and the hypothesis bookkeeping.
pub struct PipelineOutput {
    pub h: Presentation,
    pub g: Presentation,
    pub g1: FreeProdSpec,
    /// Facts checked here.
    pub verified: Vec<String>,
    /// Theorem hypotheses this pipeline cannot check; consumers decide
    /// whether to grant them.
    pub assumed: Vec<String>,
}

/// Builds H = multiple ascending extension of F(base_rank) by `endos`, then
/// G = ⟨H, top | top·t_j·top⁻¹ = φ_top(t_j)⟩ where φ_top acts on the stable
/// letters of H, plus the free product of those letters with `top`.
pub fn thm_endo_pipeline(
    base_rank: usize,
    endos: Vec<(String, Endomorphism)>,
    top_name: &str,
    phi_top: Endomorphism,
) -> Result<PipelineOutput> {
    if endos.is_empty() || endos[0].1.alphabet().len() != base_rank {
        return Err(Error::InvalidParameter(
            "base rank must match the supplied endomorphisms".into(),
        ));
    }
    for (_, e) in &endos {
        if !e.is_positive() {
            return Err(Error::InvalidParameter(
                "pipeline endomorphisms must be positive".into(),
            ));
        }
    }
    if !phi_top.is_positive() {
        return Err(Error::InvalidParameter(
            "the top substitution must be positive".into(),
        ));
    }
    if phi_top.alphabet().len() != endos.len() {
        return Err(Error::InvalidParameter(
            "the top substitution must act on one letter per stable generator".into(),
        ));
    }
    let stable_names: Vec<String> = endos.iter().map(|(s, _)| s.clone()).collect();
    let multi = MultiHnnSpec::new(endos)?;
    let h = multi.presentation("pipeline_h")?;
    let q_gens: Vec<Word> = stable_names
        .iter()
        .map(|s| Word::parse(h.alphabet(), s))
        .collect::<Result<_>>()?;
    let g = compose_amalgam(&h, &q_gens, &phi_top, top_name, "pipeline_g")?;
    let stable_alpha = Alphabet::new(&stable_names)?;
    let phi_for_rays = Endomorphism::new(
        &stable_alpha,
        phi_top
            .images()
            .iter()
            .map(|im| im.embed_into(&stable_alpha))
            .collect::<Result<_>>()?,
    )?;
    let g1 = FreeProdSpec::new(&stable_alpha, top_name, Some(phi_for_rays))?;
    let verified = vec![
        "base endomorphisms injective (image graphs have full rank)".to_string(),
        "top substitution positive".to_string(),
        "conjugation relators spelled through the stable letters".to_string(),
    ];
    let assumed = vec![
        "hyperbolic".to_string(),
        "malnormal quasiconvex Q".to_string(),
    ];
    Ok(PipelineOutput { h, g, g1, verified, assumed })
}

/// One registry entry for the CLI: a label, a summary, and a presentation
/// builder taking the family parameters (ignored by the fixed examples).
pub struct NamedExample {
    pub label: &'static str,
    pub summary: &'static str,
    pub build: fn(usize, usize) -> Result<Presentation>,
}

pub fn registry() -> Vec<NamedExample> {
    vec![
        NamedExample {
            label: "genus2",
            summary: "surface group <a,b,c,d | [a,b][c,d]>",
            build: |_, _| Ok(genus2()),
        },
        NamedExample {
            label: "free2",
            summary: "free group of rank 2, no relators",
            build: |_, _| Presentation::new(&Alphabet::new(&["a", "b"])?, &[], "free2"),
        },
        NamedExample {
            label: "ascending-demo",
            summary: "ascending extension of F(a,b) by a -> ab, b -> ba",
            build: |_, _| ascending_demo().presentation("ascending_demo"),
        },
        NamedExample {
            label: "baker-riley-cd",
            summary: "free F(d1,d2) conjugated into itself by c1, c2",
            build: |r, l| Ok(baker_riley(r, l)?.g_cd().clone()),
        },
        NamedExample {
            label: "baker-riley-bcd",
            summary: "adds b conjugating the c-layer",
            build: |r, l| Ok(baker_riley(r, l)?.g_bcd().clone()),
        },
        NamedExample {
            label: "baker-riley-g",
            summary: "adds a on top of the b-layer",
            build: |r, l| Ok(baker_riley(r, l)?.g().clone()),
        },
    ]
}

pub fn find_example(label: &str) -> Option<NamedExample> {
    registry().into_iter().find(|e| e.label == label)
}
