//! Subgroup distortion: exact small-scale tables computed against a
//! membership oracle inside a metric ball, and certified witness families
//! whose inner lengths, derived from positive-substitution matrices, grow
//! far faster than their linear outer spellings.

use std::fmt;

use num_bigint::BigUint;

use crate::cayley::Ball;
use crate::error::{Error, Result};
use crate::families::{baker_riley, BakerRileyFamily};
use crate::gog::AscendingHnnSpec;
use crate::substitution::{log10_biguint, IterateOutcome};
use crate::word::{same_alphabet, Word};

/// Largest word materialized during expansion checks and trace replay.
pub const EXPANSION_BUDGET: usize = 100_000;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Method {
    Exhaustive,
    WitnessLowerBound,
}

/// An inner length: exact while it fits the big-integer budget, and a
/// log10 magnitude from the same recurrence beyond it.
#[derive(Clone, Debug, PartialEq)]
pub enum InnerLength {
    Exact(BigUint),
    Log10(f64),
}

impl InnerLength {
    pub fn exact(&self) -> Option<&BigUint> {
        match self {
            InnerLength::Exact(v) => Some(v),
            InnerLength::Log10(_) => None,
        }
    }

    pub fn log10(&self) -> f64 {
        match self {
            InnerLength::Exact(v) => log10_biguint(v),
            InnerLength::Log10(x) => *x,
        }
    }

    fn le(&self, other: &InnerLength) -> bool {
        match (self, other) {
            (InnerLength::Exact(a), InnerLength::Exact(b)) => a <= b,
            _ => self.log10() <= other.log10() + 1e-9,
        }
    }
}

impl fmt::Display for InnerLength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InnerLength::Exact(v) => write!(f, "{v}"),
            InnerLength::Log10(x) => write!(f, "~10^{x:.2}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DistortionRow {
    pub outer: usize,
    pub inner: InnerLength,
    /// An element realizing the row, spelled over the outer generators.
    pub witness: Option<Word>,
}

#[derive(Clone, Debug)]
pub struct DistortionTable {
    pub method: Method,
    pub rows: Vec<DistortionRow>,
}

impl DistortionTable {
    pub fn is_monotone(&self) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[0].outer <= w[1].outer && w[0].inner.le(&w[1].inner))
    }
}

/// Exact distortion profile: for every n up to `n_max`, the largest inner
/// length among subgroup members of the outer n-ball. The membership oracle
/// returns the inner length for members and None otherwise.
pub fn distortion_table_exhaustive<F>(
    ball: &Ball,
    membership: F,
    n_max: usize,
) -> Result<DistortionTable>
where
    F: Fn(&Word) -> Result<Option<usize>>,
{
    if n_max > ball.achieved_radius() {
        return Err(Error::InvalidParameter(format!(
            "table depth {n_max} exceeds the ball radius {}",
            ball.achieved_radius()
        )));
    }
    let mut per_dist: Vec<Option<(usize, Word)>> = vec![None; n_max + 1];
    for i in 0..ball.len() {
        let d = ball.dist_of(i);
        if d > n_max {
            break;
        }
        let repr = ball.repr_of(i);
        if let Some(k) = membership(repr)? {
            let better = match &per_dist[d] {
                Some((best, _)) => k > *best,
                None => true,
            };
            if better {
                per_dist[d] = Some((k, repr.clone()));
            }
        }
    }
    let mut rows = Vec::with_capacity(n_max + 1);
    let mut best = 0usize;
    let mut witness = Word::empty(ball.oracle().alphabet());
    for (n, entry) in per_dist.into_iter().enumerate() {
        if let Some((k, w)) = entry {
            if k > best || n == 0 {
                best = k;
                witness = w;
            }
        }
        rows.push(DistortionRow {
            outer: n,
            inner: InnerLength::Exact(BigUint::from(best)),
            witness: Some(witness.clone()),
        });
    }
    Ok(DistortionTable { method: Method::Exhaustive, rows })
}

/// One rewriting move in a witness trace. Replaying the trace applies the
/// defining relations to turn the outer spelling into the inner word.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum TraceStep {
    /// Strip one stable conjugation, pushing the level substitution through
    /// the conjugated word: s X s⁻¹ becomes the image of X.
    StripStable,
    /// Collapse the positive conductor onto the core: U v U⁻¹ becomes the
    /// composition of the indexed substitutions along U, applied to v.
    Collapse,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Derivation {
    /// Inner length from letter-count matrix products (positive data, so
    /// the count is the reduced length).
    Matrix,
    /// Inner word materialized in full; length read off directly.
    Expansion,
}

/// A distortion witness: an outer spelling, the trace proving what inner
/// element it equals, and that element's exact inner length.
#[derive(Clone, Debug)]
pub struct WitnessCertificate {
    pub index: usize,
    pub outer: Word,
    pub outer_len: usize,
    pub trace: Vec<TraceStep>,
    pub inner: InnerLength,
    pub derivation: Derivation,
}

/// Witnesses w_n = u_n d₁ u_n⁻¹ with u_n = bⁿ c₁ b⁻ⁿ: outer length 4n+3,
/// inner length in F(d₁,d₂) from the composed substitution recurrence.
/// Beyond the expansion budget the derivation degrades to matrix-only, and
/// beyond the big-integer budget the length degrades to a log10 magnitude.
pub fn baker_riley_witnesses(r: usize, l: usize, n_max: usize) -> Result<Vec<WitnessCertificate>> {
    let fam = baker_riley(r, l)?;
    let mut out = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let outer = fam.w_outer(n);
        let expanded = fam.w_word(n, EXPANSION_BUDGET)?;
        let (inner, derivation) = match expanded {
            Some(word) => {
                let exact = fam.w_exact_length(n)?;
                if BigUint::from(word.len()) != exact {
                    return Err(Error::Rejected(format!(
                        "matrix and expansion lengths disagree at level {n}"
                    )));
                }
                (InnerLength::Exact(exact), Derivation::Expansion)
            }
            None => match fam.w_exact_length(n) {
                Ok(exact) => (InnerLength::Exact(exact), Derivation::Matrix),
                Err(Error::ResourceCap(_)) => {
                    (InnerLength::Log10(fam.w_log10_length(n)?), Derivation::Matrix)
                }
                Err(e) => return Err(e),
            },
        };
        let mut trace = vec![TraceStep::StripStable; n];
        trace.push(TraceStep::Collapse);
        out.push(WitnessCertificate {
            index: n,
            outer_len: outer.len(),
            outer,
            trace,
            inner,
            derivation,
        });
    }
    Ok(out)
}

/// Replays a witness trace under the family's defining relations, starting
/// from the outer spelling. Returns the inner word, or None when a stage
/// exceeds `budget` letters. Rejects traces that do not parse against the
/// spelling.
pub fn replay_baker_riley(
    cert: &WitnessCertificate,
    fam: &BakerRileyFamily,
    budget: usize,
) -> Result<Option<Word>> {
    let n = cert.index;
    if cert.outer != fam.w_outer(n) {
        return Err(Error::Rejected(
            "outer spelling does not match the declared witness index".into(),
        ));
    }
    let mut pending = n;
    let mut conductor = Word::letter(fam.c_alphabet(), 0, true);
    let mut core = Word::letter(fam.d_alphabet(), 0, true);
    let mut collapsed = false;
    for step in &cert.trace {
        match step {
            TraceStep::StripStable => {
                if pending == 0 || collapsed {
                    return Err(Error::Rejected("stable strip with nothing left to strip".into()));
                }
                pending -= 1;
                conductor = match fam.psi().apply_capped(&conductor, budget) {
                    Some(w) => w,
                    None => return Ok(None),
                };
            }
            TraceStep::Collapse => {
                if pending > 0 || collapsed {
                    return Err(Error::Rejected(
                        "collapse before all stable conjugations are stripped".into(),
                    ));
                }
                for &l in conductor.letters().iter().rev() {
                    if !l.is_positive() {
                        return Err(Error::Rejected("conductor is not positive".into()));
                    }
                    let sigma = fam.sigma(l.generator() + 1)?;
                    core = match sigma.apply_capped(&core, budget) {
                        Some(w) => w,
                        None => return Ok(None),
                    };
                }
                collapsed = true;
            }
        }
    }
    if !collapsed {
        return Err(Error::Rejected("trace ends before the conductor collapses".into()));
    }
    Ok(Some(core))
}

/// Witnesses sⁿ g s⁻ⁿ in an ascending extension: outer length 2n + |g|,
/// inner element φⁿ(g). Inner lengths are exact for positive data; for
/// mixed-sign data beyond the expansion budget no certificate is issued.
pub fn ascending_witnesses(
    spec: &AscendingHnnSpec,
    seed: &Word,
    n_max: usize,
) -> Result<Vec<WitnessCertificate>> {
    if seed.is_empty() {
        return Err(Error::InvalidParameter("witness seed must be nontrivial".into()));
    }
    if !same_alphabet(seed.alphabet(), spec.base_alphabet()) {
        return Err(Error::AlphabetMismatch);
    }
    let full = spec.full_alphabet();
    let t = Word::letter(full, spec.stable_gen(), true);
    let seed_full = seed.embed_into(full)?;
    let mut out = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let outer = t.pow(n as i64).cat(&seed_full).cat(&t.pow(-(n as i64)));
        let (inner, derivation) = match spec.endo().iterate(n as u64, seed, EXPANSION_BUDGET)? {
            IterateOutcome::Word(w) => (InnerLength::Exact(BigUint::from(w.len())), Derivation::Expansion),
            IterateOutcome::Overflow(est) => {
                if !est.exact {
                    return Err(Error::Rejected(format!(
                        "level {n} image exceeds the expansion budget and the matrix \
                         length is only an upper bound for mixed-sign data"
                    )));
                }
                (InnerLength::Exact(est.value), Derivation::Matrix)
            }
        };
        out.push(WitnessCertificate {
            index: n,
            outer_len: outer.len(),
            outer,
            trace: vec![TraceStep::StripStable; n],
            inner,
            derivation,
        });
    }
    Ok(out)
}

/// Replays an ascending witness trace: strips sⁿ … s⁻ⁿ one level at a time,
/// applying φ to the core. Returns the inner word, or None over budget.
pub fn replay_ascending(
    cert: &WitnessCertificate,
    spec: &AscendingHnnSpec,
    budget: usize,
) -> Result<Option<Word>> {
    let n = cert.index;
    let letters = cert.outer.letters();
    if letters.len() < 2 * n + 1 {
        return Err(Error::Rejected("outer spelling too short for the declared index".into()));
    }
    let s = spec.stable_gen();
    let head = &letters[..n];
    let tail = &letters[letters.len() - n..];
    let mid = &letters[n..letters.len() - n];
    if !head.iter().all(|l| l.generator() == s && l.is_positive())
        || !tail.iter().all(|l| l.generator() == s && !l.is_positive())
        || mid.iter().any(|l| l.generator() == s)
    {
        return Err(Error::Rejected("outer spelling is not a stable conjugate of a base word".into()));
    }
    let mut core = Word::from_letters(spec.base_alphabet(), mid.iter().copied());
    let mut pending = n;
    for step in &cert.trace {
        match step {
            TraceStep::StripStable => {
                if pending == 0 {
                    return Err(Error::Rejected("stable strip with nothing left to strip".into()));
                }
                pending -= 1;
                core = match spec.endo().apply_capped(&core, budget) {
                    Some(w) => w,
                    None => return Ok(None),
                };
            }
            TraceStep::Collapse => {
                return Err(Error::Rejected("ascending witnesses have no conductor to collapse".into()))
            }
        }
    }
    if pending > 0 {
        return Err(Error::Rejected("trace ends with stable conjugations unstripped".into()));
    }
    Ok(Some(core))
}

/// Assembles certified lower-bound rows (outer length, inner length),
/// sorted by outer length.
pub fn witness_lower_bound_table(certs: &[WitnessCertificate]) -> DistortionTable {
    let mut rows: Vec<DistortionRow> = certs
        .iter()
        .map(|c| DistortionRow {
            outer: c.outer_len,
            inner: c.inner.clone(),
            witness: Some(c.outer.clone()),
        })
        .collect();
    rows.sort_by_key(|r| r.outer);
    DistortionTable { method: Method::WitnessLowerBound, rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cayley::{build_ball, WordOracle};
    use crate::families::ascending_demo;
    use crate::stallings::ExpressedSubgroup;
    use crate::word::Alphabet;
    use std::sync::Arc;

    fn f2() -> Arc<Alphabet> {
        Alphabet::new(&["a", "b"]).unwrap()
    }

    fn standard_gens(alpha: &Arc<Alphabet>) -> Vec<Word> {
        (0..alpha.len()).map(|g| Word::letter(alpha, g, true)).collect()
    }

    #[test]
    fn exhaustive_squares_subgroup_is_linear() {
        let alpha = f2();
        let gens = vec![
            Word::parse(&alpha, "aa").unwrap(),
            Word::parse(&alpha, "bb").unwrap(),
        ];
        let target = Alphabet::new(&["x", "y"]).unwrap();
        let sub = ExpressedSubgroup::new(&alpha, &gens, &target).unwrap();
        let ball = build_ball(&WordOracle::Free(alpha.clone()), &standard_gens(&alpha), 8).unwrap();
        let table = distortion_table_exhaustive(
            &ball,
            |w| Ok(sub.express(w)?.map(|e| e.len())),
            8,
        )
        .unwrap();
        assert_eq!(table.method, Method::Exhaustive);
        assert_eq!(table.rows.len(), 9);
        for (n, row) in table.rows.iter().enumerate() {
            assert_eq!(row.outer, n);
            assert_eq!(row.inner, InnerLength::Exact(BigUint::from(n / 2)));
        }
        assert!(table.is_monotone());
        // Dist(2k)/k stays bounded by 2.
        for k in 1..=4usize {
            let inner = table.rows[2 * k].inner.exact().unwrap();
            assert!(inner <= &BigUint::from(2 * k));
        }
        // The recorded witness attains the row value.
        let witness = table.rows[8].witness.as_ref().unwrap();
        assert_eq!(sub.express(witness).unwrap().unwrap().len(), 4);
    }

    #[test]
    fn exhaustive_whole_group_is_identity() {
        let alpha = f2();
        let ball = build_ball(&WordOracle::Free(alpha.clone()), &standard_gens(&alpha), 5).unwrap();
        let table = distortion_table_exhaustive(&ball, |w| Ok(Some(w.len())), 5).unwrap();
        for (n, row) in table.rows.iter().enumerate() {
            assert_eq!(row.inner, InnerLength::Exact(BigUint::from(n)));
        }
    }

    #[test]
    fn exhaustive_depth_zero_and_radius_guard() {
        let alpha = f2();
        let ball = build_ball(&WordOracle::Free(alpha.clone()), &standard_gens(&alpha), 2).unwrap();
        let table = distortion_table_exhaustive(&ball, |w| Ok(Some(w.len())), 0).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert_eq!(table.rows[0].outer, 0);
        assert_eq!(table.rows[0].inner, InnerLength::Exact(BigUint::from(0u32)));

        let err = distortion_table_exhaustive(&ball, |w| Ok(Some(w.len())), 3).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }

    #[test]
    fn witness_certificates_small_family() {
        let certs = baker_riley_witnesses(3, 2, 1).unwrap();
        assert_eq!(certs.len(), 2);

        let c0 = &certs[0];
        assert_eq!(c0.outer_len, 3);
        assert_eq!(c0.derivation, Derivation::Expansion);
        assert_eq!(c0.inner, InnerLength::Exact(BigUint::from(36u32)));
        assert_eq!(c0.trace, vec![TraceStep::Collapse]);
        // r + r^2(l+1) + r(r+1)/2 with r=3, l=2.
        assert_eq!(3 + 9 * 3 + 6, 36);

        let c1 = &certs[1];
        assert_eq!(c1.outer_len, 7);
        assert_eq!(c1.derivation, Derivation::Matrix);
        assert_eq!(c1.trace, vec![TraceStep::StripStable, TraceStep::Collapse]);
        // Independent length bookkeeping: count vectors through the
        // letter-count matrices of the sigmas, along psi(c1) reversed.
        let fam = baker_riley(3, 2).unwrap();
        let conductor = fam.c_i(1).unwrap();
        let mats = [
            fam.sigma(1).unwrap().letter_count_matrix(),
            fam.sigma(2).unwrap().letter_count_matrix(),
        ];
        let mut counts = vec![BigUint::from(1u32), BigUint::from(0u32)];
        for &l in conductor.letters().iter().rev() {
            counts = mats[l.generator()].apply_to_counts(&counts);
        }
        let expected = &counts[0] + &counts[1];
        assert_eq!(c1.inner, InnerLength::Exact(expected));
        assert!(c1.inner.log10() > 25.0);
    }

    #[test]
    fn witness_at_paper_scale() {
        let certs = baker_riley_witnesses(17, 2, 0).unwrap();
        let c0 = &certs[0];
        assert_eq!(c0.outer_len, 3);
        assert_eq!(c0.derivation, Derivation::Expansion);
        let r = 17u32;
        let l = 2u32;
        let formula = r + r * r * (l + 1) + r * (r + 1) / 2;
        assert_eq!(formula, 1037);
        assert_eq!(c0.inner, InnerLength::Exact(BigUint::from(1037u32)));
    }

    #[test]
    fn witness_lengths_degrade_past_the_bit_budget() {
        let fam = baker_riley(17, 2).unwrap();
        let certs = baker_riley_witnesses(17, 2, 3).unwrap();
        assert!(matches!(certs[1].inner, InnerLength::Exact(_)));
        assert!(matches!(certs[2].inner, InnerLength::Exact(_)));
        assert!(matches!(certs[3].inner, InnerLength::Log10(_)));
        for n in 1..=3usize {
            let lg = fam.w_log10_length(n).unwrap();
            let got = certs[n].inner.log10();
            assert!((got - lg).abs() <= 1e-6 * lg.abs(), "level {n}: {got} vs {lg}");
        }
        // Doubly exponential growth: the log of the inner length itself
        // grows by a solid factor per level.
        assert!(certs[2].inner.log10() / certs[1].inner.log10() > 10.0);
        assert!(certs[3].inner.log10() / certs[2].inner.log10() > 10.0);
    }

    #[test]
    fn replay_reproduces_the_inner_word() {
        let fam = baker_riley(3, 2).unwrap();
        let certs = baker_riley_witnesses(3, 2, 1).unwrap();
        let inner0 = replay_baker_riley(&certs[0], &fam, EXPANSION_BUDGET).unwrap().unwrap();
        assert_eq!(inner0, fam.w_word(0, EXPANSION_BUDGET).unwrap().unwrap());
        assert_eq!(inner0.len(), 36);
        assert_eq!(
            Some(&BigUint::from(inner0.len())),
            certs[0].inner.exact()
        );
        // Level 1 blows through the replay budget.
        assert_eq!(replay_baker_riley(&certs[1], &fam, EXPANSION_BUDGET).unwrap(), None);
    }

    #[test]
    fn replay_rejects_tampered_certificates() {
        let fam = baker_riley(3, 2).unwrap();
        let certs = baker_riley_witnesses(3, 2, 1).unwrap();

        let mut wrong_outer = certs[1].clone();
        wrong_outer.outer = fam.w_outer(2);
        assert!(matches!(
            replay_baker_riley(&wrong_outer, &fam, EXPANSION_BUDGET),
            Err(Error::Rejected(_))
        ));

        let mut reordered = certs[1].clone();
        reordered.trace = vec![TraceStep::Collapse, TraceStep::StripStable];
        assert!(matches!(
            replay_baker_riley(&reordered, &fam, EXPANSION_BUDGET),
            Err(Error::Rejected(_))
        ));

        let mut truncated = certs[1].clone();
        truncated.trace = vec![TraceStep::StripStable];
        assert!(matches!(
            replay_baker_riley(&truncated, &fam, EXPANSION_BUDGET),
            Err(Error::Rejected(_))
        ));
    }

    #[test]
    fn ascending_demo_witnesses() {
        let spec = ascending_demo();
        let seed = Word::parse(spec.base_alphabet(), "a").unwrap();
        let certs = ascending_witnesses(&spec, &seed, 18).unwrap();
        for (n, c) in certs.iter().enumerate() {
            assert_eq!(c.outer_len, 2 * n + 1);
            assert_eq!(c.inner, InnerLength::Exact(BigUint::from(1u32) << n));
            let expected = if n <= 16 { Derivation::Expansion } else { Derivation::Matrix };
            assert_eq!(c.derivation, expected, "level {n}");
        }

        let inner3 = replay_ascending(&certs[3], &spec, EXPANSION_BUDGET).unwrap().unwrap();
        assert_eq!(inner3, Word::parse(spec.base_alphabet(), "abbabaab").unwrap());
        assert_eq!(replay_ascending(&certs[18], &spec, EXPANSION_BUDGET).unwrap(), None);

        let mut bad = certs[2].clone();
        bad.trace.push(TraceStep::Collapse);
        assert!(matches!(
            replay_ascending(&bad, &spec, EXPANSION_BUDGET),
            Err(Error::Rejected(_))
        ));
    }

    #[test]
    fn lower_bound_tables() {
        let certs = baker_riley_witnesses(3, 2, 1).unwrap();
        let table = witness_lower_bound_table(&certs);
        assert_eq!(table.method, Method::WitnessLowerBound);
        assert_eq!(table.rows[0].outer, 3);
        assert_eq!(table.rows[1].outer, 7);
        assert!(table.is_monotone());

        let spec = ascending_demo();
        let seed = Word::parse(spec.base_alphabet(), "a").unwrap();
        let certs = ascending_witnesses(&spec, &seed, 5).unwrap();
        let table = witness_lower_bound_table(&certs);
        for (n, row) in table.rows.iter().enumerate() {
            assert_eq!(row.outer, 2 * n + 1);
            assert_eq!(row.inner, InnerLength::Exact(BigUint::from(1u32) << n));
        }

        assert!(witness_lower_bound_table(&[]).rows.is_empty());
    }

    #[test]
    fn witness_rows_never_exceed_exhaustive_rows() {
        let spec = Arc::new(ascending_demo());
        let seed = Word::parse(spec.base_alphabet(), "a").unwrap();
        let certs = ascending_witnesses(&spec, &seed, 2).unwrap();
        let witness_table = witness_lower_bound_table(&certs);

        let oracle = WordOracle::Britton(spec.clone());
        let gens = standard_gens(spec.full_alphabet());
        let ball = build_ball(&oracle, &gens, 5).unwrap();
        let stable = spec.stable_gen();
        let exhaustive = distortion_table_exhaustive(
            &ball,
            |w| {
                let nf = spec.element(w)?.to_word(&spec);
                if nf.letters().iter().any(|l| l.generator() == stable) {
                    Ok(None)
                } else {
                    Ok(Some(nf.len()))
                }
            },
            5,
        )
        .unwrap();
        assert!(exhaustive.is_monotone());
        for row in &witness_table.rows {
            let bound = &exhaustive.rows[row.outer];
            assert!(row.inner.le(&bound.inner), "outer {}", row.outer);
        }
    }

    #[test]
    fn inner_length_display_and_order() {
        assert_eq!(format!("{}", InnerLength::Exact(BigUint::from(1037u32))), "1037");
        assert_eq!(format!("{}", InnerLength::Log10(575312.25)), "~10^575312.25");
        assert!(InnerLength::Exact(BigUint::from(100u32))
            .le(&InnerLength::Log10(2.1)));
        assert!(!InnerLength::Log10(3.0).le(&InnerLength::Exact(BigUint::from(10u32))));
    }
}
