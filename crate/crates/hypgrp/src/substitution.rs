//! Endomorphisms of free groups as generator substitutions, with exact
//! big-integer length bookkeeping through letter-count matrices.

use crate::error::{Error, Result};
use crate::stallings::SubgroupGraph;
use crate::word::{same_alphabet, Alphabet, Letter, Word};
use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};
use std::fmt;
use std::sync::Arc;

/// A substitution sending each generator to a fixed word over the same
/// alphabet, extended to a homomorphism.
#[derive(Clone)]
pub struct Endomorphism {
    alphabet: Arc<Alphabet>,
    images: Vec<Word>,
}

impl Endomorphism {
    pub fn new(alphabet: &Arc<Alphabet>, images: Vec<Word>) -> Result<Endomorphism> {
        if images.len() != alphabet.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} images, got {}",
                alphabet.len(),
                images.len()
            )));
        }
        for im in &images {
            if !same_alphabet(alphabet, im.alphabet()) {
                return Err(Error::AlphabetMismatch);
            }
        }
        if !images.is_empty() && images.iter().all(|im| im.is_empty()) {
            return Err(Error::InvalidParameter(
                "all images are trivial; the substitution collapses everything".into(),
            ));
        }
        Ok(Endomorphism { alphabet: alphabet.clone(), images })
    }

    pub fn identity(alphabet: &Arc<Alphabet>) -> Endomorphism {
        let images = (0..alphabet.len()).map(|g| Word::letter(alphabet, g, true)).collect();
        Endomorphism { alphabet: alphabet.clone(), images }
    }

    /// Parses `a -> ab, b -> ba` (also accepts `=` and `;` separators).
    pub fn parse(alphabet: &Arc<Alphabet>, text: &str) -> Result<Endomorphism> {
        let mut images: Vec<Option<Word>> = vec![None; alphabet.len()];
        for rule in text.split([',', ';']) {
            let rule = rule.trim();
            if rule.is_empty() {
                continue;
            }
            let (lhs, rhs) = rule
                .split_once("->")
                .or_else(|| rule.split_once('='))
                .ok_or_else(|| Error::Parse(format!("rule `{rule}` has no -> or =")))?;
            let gen = alphabet
                .index_of(lhs.trim())
                .ok_or_else(|| Error::UnknownGenerator(lhs.trim().to_string()))?;
            if images[gen].is_some() {
                return Err(Error::Parse(format!("generator `{}` mapped twice", lhs.trim())));
            }
            images[gen] = Some(Word::parse(alphabet, rhs.trim())?);
        }
        let images: Vec<Word> = images
            .into_iter()
            .enumerate()
            .map(|(g, im)| {
                im.ok_or_else(|| Error::Parse(format!("no image for `{}`", alphabet.name(g))))
            })
            .collect::<Result<_>>()?;
        Endomorphism::new(alphabet, images)
    }

    pub fn alphabet(&self) -> &Arc<Alphabet> {
        &self.alphabet
    }

    pub fn images(&self) -> &[Word] {
        &self.images
    }

    pub fn image(&self, gen: usize) -> &Word {
        &self.images[gen]
    }

    fn substituted<'a>(&'a self, w: &'a Word) -> impl Iterator<Item = Letter> + 'a {
        w.letters().iter().flat_map(move |&l| {
            let im = &self.images[l.generator()];
            let n = im.len();
            (0..n).map(move |i| {
                if l.is_positive() {
                    im.letters()[i]
                } else {
                    im.letters()[n - 1 - i].inverse()
                }
            })
        })
    }

    /// The freely reduced image of `w`.
    pub fn apply(&self, w: &Word) -> Result<Word> {
        if !same_alphabet(&self.alphabet, w.alphabet()) {
            return Err(Error::AlphabetMismatch);
        }
        Ok(Word::from_letters(&self.alphabet, self.substituted(w)))
    }

    /// Like `apply`, but abandons the expansion as soon as the reduced image
    /// provably exceeds `cap` letters: the reduced prefix minus everything
    /// still unread lower-bounds the final length.
    pub(crate) fn apply_capped(&self, w: &Word, cap: usize) -> Option<Word> {
        let mut remaining: usize =
            w.letters().iter().map(|l| self.images[l.generator()].len()).sum();
        let mut out: Vec<Letter> = Vec::new();
        for l in self.substituted(w) {
            remaining -= 1;
            if out.last() == Some(&l.inverse()) {
                out.pop();
            } else {
                out.push(l);
            }
            if out.len() > cap + remaining {
                return None;
            }
        }
        if out.len() > cap {
            return None;
        }
        Some(Word::from_letters(&self.alphabet, out))
    }

    /// `self ∘ other`: first `other`, then `self`.
    pub fn compose(&self, other: &Endomorphism) -> Result<Endomorphism> {
        if !same_alphabet(&self.alphabet, &other.alphabet) {
            return Err(Error::AlphabetMismatch);
        }
        let images = other
            .images
            .iter()
            .map(|im| self.apply(im))
            .collect::<Result<Vec<_>>>()?;
        Endomorphism::new(&self.alphabet, images)
    }

    /// True iff every image uses only positive letters.
    pub fn is_positive(&self) -> bool {
        self.images.iter().all(|im| im.letters().iter().all(|l| l.is_positive()))
    }

    /// φⁿ(w) if its reduced length stays within `size_cap`; otherwise a
    /// definite overflow carrying the matrix length bound (exact when the
    /// substitution and the word are positive).
    pub fn iterate(&self, n: u64, w: &Word, size_cap: usize) -> Result<IterateOutcome> {
        if !same_alphabet(&self.alphabet, w.alphabet()) {
            return Err(Error::AlphabetMismatch);
        }
        let mut cur = w.clone();
        if cur.len() > size_cap {
            return Ok(IterateOutcome::Overflow(self.length_of_iterate(w, n)));
        }
        for _ in 0..n {
            match self.apply_capped(&cur, size_cap) {
                Some(next) => cur = next,
                None => return Ok(IterateOutcome::Overflow(self.length_of_iterate(w, n))),
            }
        }
        Ok(IterateOutcome::Word(cur))
    }

    /// Letter occurrences (counting inverses) of each generator per image.
    pub fn letter_count_matrix(&self) -> TransitionMatrix {
        let n = self.alphabet.len();
        let mut entries = vec![vec![BigUint::zero(); n]; n];
        for (q, im) in self.images.iter().enumerate() {
            for &l in im.letters() {
                entries[l.generator()][q] += 1u32;
            }
        }
        TransitionMatrix { entries }
    }

    /// Signed exponent sums per image, for abelianization queries.
    pub fn abelianization_matrix(&self) -> Vec<Vec<BigInt>> {
        let n = self.alphabet.len();
        let mut entries = vec![vec![BigInt::zero(); n]; n];
        for (q, im) in self.images.iter().enumerate() {
            for &l in im.letters() {
                if l.is_positive() {
                    entries[l.generator()][q] += 1;
                } else {
                    entries[l.generator()][q] -= 1;
                }
            }
        }
        entries
    }

    /// 1ᵀ·Mⁿ·count(w): the length of φⁿ(w), exact for positive φ and w
    /// (no cancellation can occur), an upper bound otherwise.
    pub fn length_of_iterate(&self, w: &Word, n: u64) -> LengthEstimate {
        let m = self.letter_count_matrix().pow(n);
        let counts = count_vector(w);
        let mut total = BigUint::zero();
        for row in &m.entries {
            for (c, e) in counts.iter().zip(row) {
                total += c * e;
            }
        }
        let exact = self.is_positive() && w.letters().iter().all(|l| l.is_positive());
        LengthEstimate { value: total, exact }
    }

    /// True iff the generator images freely generate a rank-n subgroup.
    pub fn injectivity_check(&self) -> bool {
        match SubgroupGraph::build(&self.alphabet, &self.images) {
            Ok(g) => g.rank() == self.alphabet.len(),
            Err(_) => false,
        }
    }

    /// Cyclically reduced lengths of φᵏ(w) for k ≤ n_max. Growth evidence
    /// only; the report never claims hyperbolicity.
    pub fn conjugate_growth_report(
        &self,
        w: &Word,
        n_max: u64,
        size_cap: usize,
    ) -> Result<GrowthReport> {
        if !same_alphabet(&self.alphabet, w.alphabet()) {
            return Err(Error::AlphabetMismatch);
        }
        let mut rows = Vec::new();
        let mut cur = Some(w.clone());
        for k in 0..=n_max {
            let length = match &cur {
                Some(word) => {
                    let (cyc, _) = word.cyclic_reduce();
                    LengthEstimate {
                        value: BigUint::from(cyc.as_word().len()),
                        exact: true,
                    }
                }
                None => {
                    // Beyond the expansion budget: matrix arithmetic. The
                    // cyclic length of a positive image equals its length.
                    let est = self.length_of_iterate(w, k);
                    LengthEstimate { value: est.value, exact: est.exact }
                }
            };
            let log10 = log10_biguint(&length.value);
            rows.push(GrowthRow { k, cyclic_length: length, log10 });
            if k < n_max {
                cur = match cur {
                    Some(word) => self.apply_capped(&word, size_cap),
                    None => None,
                };
            }
        }
        let monotone = rows.windows(2).all(|p| p[0].cyclic_length.value <= p[1].cyclic_length.value);
        let ratio = geometric_ratio(&rows);
        Ok(GrowthReport { rows, monotone_nondecreasing: monotone, geometric_ratio: ratio })
    }
}

impl fmt::Display for Endomorphism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rules: Vec<String> = self
            .images
            .iter()
            .enumerate()
            .map(|(g, im)| format!("{} -> {}", self.alphabet.name(g), im.format()))
            .collect();
        write!(f, "{}", rules.join(", "))
    }
}

/// Outcome of a capped iteration.
#[derive(Clone)]
pub enum IterateOutcome {
    Word(Word),
    /// The reduced image exceeds the cap; the estimate is the matrix length.
    Overflow(LengthEstimate),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LengthEstimate {
    pub value: BigUint,
    /// True when no cancellation was possible, so `value` is the reduced
    /// length; false means `value` is only an upper bound.
    pub exact: bool,
}

#[derive(Clone, Debug)]
pub struct GrowthRow {
    pub k: u64,
    pub cyclic_length: LengthEstimate,
    pub log10: f64,
}

/// Growth evidence for iterated substitutions. A proxy: it never certifies
/// hyperbolicity of the extension.
#[derive(Clone, Debug)]
pub struct GrowthReport {
    pub rows: Vec<GrowthRow>,
    pub monotone_nondecreasing: bool,
    /// Least-squares slope of log-length over the exact rows, if at least
    /// three rows are nonzero.
    pub geometric_ratio: Option<f64>,
}

impl GrowthReport {
    /// The report is growth evidence only.
    pub const PROXY_ONLY: bool = true;
}

fn geometric_ratio(rows: &[GrowthRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| !r.cyclic_length.value.is_zero())
        .map(|r| (r.k as f64, log10_biguint(&r.cyclic_length.value)))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return None;
    }
    Some(10f64.powf((n * sxy - sx * sy) / denom))
}

pub fn log10_biguint(v: &BigUint) -> f64 {
    if v.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = v.bits();
    if bits <= 64 {
        return (v.to_u64().unwrap() as f64).log10();
    }
    // Take the top 64 bits for the mantissa.
    let shift = bits - 64;
    let top = (v >> shift).to_u64().unwrap() as f64;
    top.log10() + shift as f64 * std::f64::consts::LN_2 / std::f64::consts::LN_10
}

/// Occurrences of each generator (counting inverses) in `w`.
pub fn count_vector(w: &Word) -> Vec<BigUint> {
    let mut counts = vec![BigUint::zero(); w.alphabet().len()];
    for &l in w.letters() {
        counts[l.generator()] += 1u32;
    }
    counts
}

/// A square nonnegative big-integer matrix of letter counts. Entry (i, j)
/// counts occurrences of generator i in the image of generator j, so
/// count(φ(w)) = M · count(w) for positive data.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionMatrix {
    entries: Vec<Vec<BigUint>>,
}

impl TransitionMatrix {
    pub fn from_entries(entries: Vec<Vec<BigUint>>) -> Result<TransitionMatrix> {
        let n = entries.len();
        if entries.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidParameter("matrix must be square".into()));
        }
        Ok(TransitionMatrix { entries })
    }

    pub fn identity(n: usize) -> TransitionMatrix {
        let mut entries = vec![vec![BigUint::zero(); n]; n];
        for (i, row) in entries.iter_mut().enumerate() {
            row[i] = BigUint::one();
        }
        TransitionMatrix { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> &BigUint {
        &self.entries[i][j]
    }

    pub fn rows(&self) -> &[Vec<BigUint>] {
        &self.entries
    }

    pub fn mul(&self, other: &TransitionMatrix) -> TransitionMatrix {
        let n = self.dim();
        assert_eq!(n, other.dim());
        let compute_row = |i: usize| -> Vec<BigUint> {
            (0..n)
                .map(|j| {
                    let mut acc = BigUint::zero();
                    for k in 0..n {
                        acc += &self.entries[i][k] * &other.entries[k][j];
                    }
                    acc
                })
                .collect()
        };
        #[cfg(feature = "parallel")]
        let entries = {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(compute_row).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let entries = (0..n).map(compute_row).collect();
        TransitionMatrix { entries }
    }

    pub fn pow(&self, mut e: u64) -> TransitionMatrix {
        let mut result = TransitionMatrix::identity(self.dim());
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    pub fn apply_to_counts(&self, counts: &[BigUint]) -> Vec<BigUint> {
        self.entries
            .iter()
            .map(|row| {
                let mut acc = BigUint::zero();
                for (e, c) in row.iter().zip(counts) {
                    acc += e * c;
                }
                acc
            })
            .collect()
    }

    pub fn column_sum(&self, j: usize) -> BigUint {
        let mut acc = BigUint::zero();
        for row in &self.entries {
            acc += &row[j];
        }
        acc
    }
}
