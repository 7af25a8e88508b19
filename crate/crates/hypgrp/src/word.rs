//! Freely reduced words over a ranked alphabet with formal inverses.

use crate::error::{Error, Result};
use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

/// A finite ranked alphabet. Generator names must match `[a-z][a-z0-9_]*`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    names: Vec<String>,
    index: HashMap<String, usize>,
    fingerprint: u64,
    all_single_char: bool,
}

impl Alphabet {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Arc<Alphabet>> {
        let mut owned = Vec::with_capacity(names.len());
        let mut index = HashMap::new();
        for n in names {
            let n = n.as_ref();
            validate_name(n)?;
            if index.insert(n.to_string(), owned.len()).is_some() {
                return Err(Error::DuplicateGeneratorName(n.to_string()));
            }
            owned.push(n.to_string());
        }
        let mut fingerprint: u64 = 0xcbf29ce484222325;
        for n in &owned {
            for b in n.bytes() {
                fingerprint ^= b as u64;
                fingerprint = fingerprint.wrapping_mul(0x100000001b3);
            }
            fingerprint ^= 0xff;
            fingerprint = fingerprint.wrapping_mul(0x100000001b3);
        }
        let all_single_char = owned.iter().all(|n| n.len() == 1);
        Ok(Arc::new(Alphabet { names: owned, index, fingerprint, all_single_char }))
    }

    /// Extends this alphabet with an extra generator, preserving indices.
    pub fn extend<S: AsRef<str>>(self: &Arc<Self>, extra: &[S]) -> Result<Arc<Alphabet>> {
        let mut names: Vec<String> = self.names.clone();
        for e in extra {
            if self.index.contains_key(e.as_ref()) {
                return Err(Error::NameCollision(e.as_ref().to_string()));
            }
            names.push(e.as_ref().to_string());
        }
        Alphabet::new(&names)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, gen: usize) -> &str {
        &self.names[gen]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }
}

fn validate_name(n: &str) -> Result<()> {
    let mut chars = n.chars();
    let ok = match chars.next() {
        Some(c) if c.is_ascii_lowercase() => {
            chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
        }
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidGeneratorName(n.to_string()))
    }
}

pub fn same_alphabet(a: &Arc<Alphabet>, b: &Arc<Alphabet>) -> bool {
    Arc::ptr_eq(a, b) || (a.fingerprint == b.fingerprint && a.names == b.names)
}

/// One letter: a generator or its formal inverse. Packed as a nonzero i32:
/// generator `g` is `g+1`, its inverse `-(g+1)`.
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter(i32);

impl Letter {
    pub fn new(generator_index: usize, positive: bool) -> Letter {
        let v = (generator_index as i32) + 1;
        Letter(if positive { v } else { -v })
    }

    pub fn generator(self) -> usize {
        (self.0.unsigned_abs() as usize) - 1
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    pub fn inverse(self) -> Letter {
        Letter(-self.0)
    }

    pub fn code(self) -> i32 {
        self.0
    }

    /// ShortLex rank: generator `g` ranks below its inverse, generators in
    /// alphabet order.
    pub fn rank(self) -> u32 {
        let g = self.generator() as u32;
        2 * g + if self.is_positive() { 0 } else { 1 }
    }
}

impl fmt::Debug for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L({})", self.0)
    }
}

/// A freely reduced word. The reduction invariant is maintained by every
/// constructor and operation.
#[derive(Clone)]
pub struct Word {
    alphabet: Arc<Alphabet>,
    letters: Vec<Letter>,
}

impl PartialEq for Word {
    fn eq(&self, other: &Word) -> bool {
        same_alphabet(&self.alphabet, &other.alphabet) && self.letters == other.letters
    }
}

impl Eq for Word {}

impl std::hash::Hash for Word {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.alphabet.fingerprint.hash(state);
        self.letters.hash(state);
    }
}

impl Word {
    pub fn empty(alphabet: &Arc<Alphabet>) -> Word {
        Word { alphabet: alphabet.clone(), letters: Vec::new() }
    }

    pub fn letter(alphabet: &Arc<Alphabet>, generator_index: usize, positive: bool) -> Word {
        assert!(generator_index < alphabet.len());
        Word { alphabet: alphabet.clone(), letters: vec![Letter::new(generator_index, positive)] }
    }

    /// Builds a word from raw letters, applying free reduction eagerly.
    pub fn from_letters<I>(alphabet: &Arc<Alphabet>, letters: I) -> Word
    where
        I: IntoIterator<Item = Letter>,
    {
        let mut out: Vec<Letter> = Vec::new();
        for l in letters {
            debug_assert!(l.generator() < alphabet.len());
            if out.last() == Some(&l.inverse()) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Word { alphabet: alphabet.clone(), letters: out }
    }

    pub fn alphabet(&self) -> &Arc<Alphabet> {
        &self.alphabet
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// True iff every letter is a positive generator.
    pub fn is_positive(&self) -> bool {
        self.letters.iter().all(|l| l.is_positive())
    }

    pub fn concat(&self, other: &Word) -> Result<Word> {
        if !same_alphabet(&self.alphabet, &other.alphabet) {
            return Err(Error::AlphabetMismatch);
        }
        Ok(self.cat(other))
    }

    /// Unchecked-alphabet concatenation for internal hot paths. Alphabet
    /// agreement is the caller's invariant.
    pub(crate) fn cat(&self, other: &Word) -> Word {
        let mut out = self.letters.clone();
        for &l in &other.letters {
            if out.last() == Some(&l.inverse()) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Word { alphabet: self.alphabet.clone(), letters: out }
    }

    pub fn invert(&self) -> Word {
        Word {
            alphabet: self.alphabet.clone(),
            letters: self.letters.iter().rev().map(|l| l.inverse()).collect(),
        }
    }

    pub fn pow(&self, k: i64) -> Word {
        if k == 0 || self.is_empty() {
            return Word::empty(&self.alphabet);
        }
        let base = if k > 0 { self.clone() } else { self.invert() };
        let mut out = base.clone();
        for _ in 1..k.unsigned_abs() {
            out = out.cat(&base);
        }
        out
    }

    /// Exponent sum of one generator (abelianized image coordinate).
    pub fn exponent_sum(&self, generator_index: usize) -> i64 {
        self.letters
            .iter()
            .filter(|l| l.generator() == generator_index)
            .map(|l| if l.is_positive() { 1 } else { -1 })
            .sum()
    }

    /// Occurrences of one generator counting both signs.
    pub fn letter_count(&self, generator_index: usize) -> u64 {
        self.letters.iter().filter(|l| l.generator() == generator_index).count() as u64
    }

    /// Splits into `(cyclic core, conjugator c)` with `self = c · core · c⁻¹`.
    pub fn cyclic_reduce(&self) -> (CyclicWord, Word) {
        let n = self.letters.len();
        let mut k = 0;
        while n >= 2 * (k + 1) && self.letters[k] == self.letters[n - 1 - k].inverse() {
            k += 1;
        }
        let conj = Word { alphabet: self.alphabet.clone(), letters: self.letters[..k].to_vec() };
        let core = Word { alphabet: self.alphabet.clone(), letters: self.letters[k..n - k].to_vec() };
        (CyclicWord { word: core }, conj)
    }

    /// ShortLex comparison: by length first, then letter ranks.
    pub fn shortlex_cmp(&self, other: &Word) -> Ordering {
        self.letters
            .len()
            .cmp(&other.letters.len())
            .then_with(|| {
                for (a, b) in self.letters.iter().zip(&other.letters) {
                    match a.rank().cmp(&b.rank()) {
                        Ordering::Equal => {}
                        o => return o,
                    }
                }
                Ordering::Equal
            })
    }

    /// Remaps this word into a (super-)alphabet by generator name.
    pub fn embed_into(&self, target: &Arc<Alphabet>) -> Result<Word> {
        if same_alphabet(&self.alphabet, target) {
            return Ok(self.clone());
        }
        let mut map = Vec::with_capacity(self.alphabet.len());
        for name in self.alphabet.names() {
            match target.index_of(name) {
                Some(i) => map.push(i),
                None => return Err(Error::UnknownGenerator(name.clone())),
            }
        }
        Ok(Word {
            alphabet: target.clone(),
            letters: self
                .letters
                .iter()
                .map(|l| Letter::new(map[l.generator()], l.is_positive()))
                .collect(),
        })
    }

    /// Parses the text form: lowercase = generator, uppercase = inverse,
    /// whitespace-separated tokens, `^k` repeats. Within a token that is not
    /// itself a generator name, characters parse letterwise and a trailing
    /// `^k` applies to the last letter.
    pub fn parse(alphabet: &Arc<Alphabet>, text: &str) -> Result<Word> {
        let mut raw: Vec<Letter> = Vec::new();
        for token in text.split_whitespace() {
            let (body, exp) = match token.split_once('^') {
                Some((b, e)) => {
                    let exp: i64 = e
                        .parse()
                        .map_err(|_| Error::MalformedExponent(token.to_string()))?;
                    (b, exp)
                }
                None => (token, 1),
            };
            if body.is_empty() {
                return Err(Error::MalformedToken(token.to_string()));
            }
            if body == "1" {
                // the identity, as emitted by `format`
                continue;
            }
            let unit = parse_body(alphabet, body)?;
            match unit {
                Parsed::Whole(letter) => push_pow(&mut raw, letter, exp),
                Parsed::Letterwise(mut letters) => {
                    let last = letters.pop().expect("nonempty");
                    raw.extend(letters);
                    push_pow(&mut raw, last, exp);
                }
            }
        }
        Ok(Word::from_letters(alphabet, raw))
    }

    /// Canonical text form (inverse of `parse`): compact for single-character
    /// alphabets, space-separated tokens otherwise. Never emits exponents.
    pub fn format(&self) -> String {
        if self.letters.is_empty() {
            return "1".to_string();
        }
        if self.alphabet.all_single_char {
            self.letters
                .iter()
                .map(|l| {
                    let name = self.alphabet.name(l.generator());
                    if l.is_positive() { name.to_string() } else { name.to_uppercase() }
                })
                .collect()
        } else {
            self.letters
                .iter()
                .map(|l| {
                    let name = self.alphabet.name(l.generator());
                    if l.is_positive() { name.to_string() } else { name.to_uppercase() }
                })
                .collect::<Vec<_>>()
                .join(" ")
        }
    }

    /// Text form with `^k` run compression; re-parses to the same word.
    pub fn format_runs(&self) -> String {
        if self.letters.is_empty() {
            return "1".to_string();
        }
        let mut parts: Vec<String> = Vec::new();
        let mut i = 0;
        while i < self.letters.len() {
            let l = self.letters[i];
            let mut j = i;
            while j < self.letters.len() && self.letters[j] == l {
                j += 1;
            }
            let name = self.alphabet.name(l.generator());
            let tok = if l.is_positive() { name.to_string() } else { name.to_uppercase() };
            if j - i >= 2 {
                parts.push(format!("{}^{}", tok, j - i));
            } else {
                parts.push(tok);
            }
            i = j;
        }
        parts.join(" ")
    }
}

enum Parsed {
    Whole(Letter),
    Letterwise(Vec<Letter>),
}

fn parse_body(alphabet: &Arc<Alphabet>, body: &str) -> Result<Parsed> {
    if let Some(g) = alphabet.index_of(body) {
        return Ok(Parsed::Whole(Letter::new(g, true)));
    }
    let has_lower = body.chars().any(|c| c.is_ascii_lowercase());
    if !has_lower {
        let lowered = body.to_lowercase();
        if let Some(g) = alphabet.index_of(&lowered) {
            return Ok(Parsed::Whole(Letter::new(g, false)));
        }
    }
    let mut letters = Vec::with_capacity(body.len());
    for c in body.chars() {
        let (name, positive) = if c.is_ascii_lowercase() {
            (c.to_string(), true)
        } else if c.is_ascii_uppercase() {
            (c.to_ascii_lowercase().to_string(), false)
        } else {
            return Err(Error::MalformedToken(body.to_string()));
        };
        match alphabet.index_of(&name) {
            Some(g) => letters.push(Letter::new(g, positive)),
            None => return Err(Error::UnknownGenerator(name)),
        }
    }
    if letters.is_empty() {
        return Err(Error::MalformedToken(body.to_string()));
    }
    Ok(Parsed::Letterwise(letters))
}

fn push_pow(raw: &mut Vec<Letter>, letter: Letter, exp: i64) {
    let l = if exp >= 0 { letter } else { letter.inverse() };
    for _ in 0..exp.unsigned_abs() {
        raw.push(l);
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.format())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word({})", self.format())
    }
}

/// Length of the longest common prefix of two words.
pub fn common_prefix_len(u: &Word, v: &Word) -> usize {
    u.letters
        .iter()
        .zip(&v.letters)
        .take_while(|(a, b)| a == b)
        .count()
}

/// A cyclically reduced word considered up to nothing: it remembers its
/// spelling, but offers rotation and conjugacy-class helpers.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CyclicWord {
    word: Word,
}

impl CyclicWord {
    /// Cyclically reduces `w` and keeps the core.
    pub fn from_word(w: &Word) -> CyclicWord {
        w.cyclic_reduce().0
    }

    pub fn as_word(&self) -> &Word {
        &self.word
    }

    pub fn len(&self) -> usize {
        self.word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word.is_empty()
    }

    pub fn alphabet(&self) -> &Arc<Alphabet> {
        self.word.alphabet()
    }

    pub fn rotation(&self, offset: usize) -> Word {
        let n = self.word.letters.len();
        if n == 0 {
            return self.word.clone();
        }
        let off = offset % n;
        let mut letters = Vec::with_capacity(n);
        letters.extend_from_slice(&self.word.letters[off..]);
        letters.extend_from_slice(&self.word.letters[..off]);
        Word { alphabet: self.word.alphabet.clone(), letters }
    }

    pub fn inverse(&self) -> CyclicWord {
        CyclicWord { word: self.word.invert() }
    }

    /// A canonical key for the cyclic class of `{self, self⁻¹}`: the
    /// rank-minimal rotation among both orientations.
    pub fn class_key(&self) -> Vec<u32> {
        let n = self.word.letters.len();
        if n == 0 {
            return Vec::new();
        }
        let mut best: Option<Vec<u32>> = None;
        for w in [self.word.clone(), self.word.invert()] {
            for off in 0..n {
                let key: Vec<u32> = (0..n)
                    .map(|i| w.letters[(off + i) % n].rank())
                    .collect();
                if best.as_ref().map_or(true, |b| key < *b) {
                    best = Some(key);
                }
            }
        }
        best.unwrap()
    }
}

impl fmt::Debug for CyclicWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CyclicWord({})", self.word.format())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab() -> Arc<Alphabet> {
        Alphabet::new(&["a", "b"]).unwrap()
    }

    #[test]
    fn parse_compact_and_inverse() {
        let al = ab();
        let w = Word::parse(&al, "abA").unwrap();
        assert_eq!(w.len(), 3);
        assert_eq!(w.format(), "abA");
        let e = Word::parse(&al, "aA").unwrap();
        assert!(e.is_empty());
        assert_eq!(e.format(), "1");
    }

    #[test]
    fn parse_multichar_names_and_exponents() {
        let al = Alphabet::new(&["c1", "c2"]).unwrap();
        let w = Word::parse(&al, "c1 c2^3").unwrap();
        assert_eq!(w.len(), 4);
        assert_eq!(w.format(), "c1 c2 c2 c2");
        let v = Word::parse(&al, "C1 c2^-2").unwrap();
        assert_eq!(v.format(), "C1 C2 C2");
        let z = Word::parse(&al, "c1^0").unwrap();
        assert!(z.is_empty());
    }

    #[test]
    fn parse_exponent_on_last_letter_of_compact_token() {
        let al = ab();
        let w = Word::parse(&al, "ab^2").unwrap();
        assert_eq!(w.format(), "abb");
        let v = Word::parse(&al, "b^-2").unwrap();
        assert_eq!(v.format(), "BB");
    }

    #[test]
    fn baker_riley_c_word_r3_is_reduced_of_length_9() {
        let al = Alphabet::new(&["c1", "c2"]).unwrap();
        let w = Word::parse(&al, "c1 c2 c1 c2^2 c1 c2^3").unwrap();
        assert_eq!(w.len(), 9);
        assert!(w.is_positive());
    }

    #[test]
    fn concat_reduces_across_boundary() {
        let al = ab();
        let u = Word::parse(&al, "abB").unwrap();
        assert_eq!(u.format(), "a");
        let v = Word::parse(&al, "ab").unwrap();
        let w = Word::parse(&al, "BA").unwrap();
        assert!(v.concat(&w).unwrap().is_empty());
    }

    #[test]
    fn alphabet_mismatch_is_an_error() {
        let a1 = ab();
        let a2 = Alphabet::new(&["x", "y"]).unwrap();
        let u = Word::parse(&a1, "a").unwrap();
        let v = Word::parse(&a2, "x").unwrap();
        assert!(matches!(u.concat(&v), Err(Error::AlphabetMismatch)));
    }

    #[test]
    fn cyclic_reduce_peels_conjugator() {
        let al = ab();
        let w = Word::parse(&al, "abA").unwrap();
        let (core, conj) = w.cyclic_reduce();
        assert_eq!(core.as_word().format(), "b");
        assert_eq!(conj.format(), "a");
        let recomposed = conj.cat(core.as_word()).cat(&conj.invert());
        assert_eq!(recomposed, w);
    }

    #[test]
    fn shortlex_orders_generator_below_inverse() {
        let al = ab();
        let u = Word::parse(&al, "ab").unwrap();
        let v = Word::parse(&al, "aB").unwrap();
        assert_eq!(u.shortlex_cmp(&v), Ordering::Less);
        let shorter = Word::parse(&al, "B").unwrap();
        assert_eq!(shorter.shortlex_cmp(&u), Ordering::Less);
    }

    #[test]
    fn format_parse_roundtrip_multichar() {
        let al = Alphabet::new(&["a", "c1"]).unwrap();
        let w = Word::parse(&al, "a C1 c1^3 A").unwrap();
        let back = Word::parse(&al, &w.format()).unwrap();
        assert_eq!(w, back);
        let runs = Word::parse(&al, &w.format_runs()).unwrap();
        assert_eq!(w, runs);
    }

    #[test]
    fn class_key_identifies_rotations_and_inverses() {
        let al = ab();
        let r = CyclicWord::from_word(&Word::parse(&al, "abab").unwrap());
        let rot = CyclicWord::from_word(&Word::parse(&al, "baba").unwrap());
        let inv = CyclicWord::from_word(&Word::parse(&al, "BABA").unwrap());
        assert_eq!(r.class_key(), rot.class_key());
        assert_eq!(r.class_key(), inv.class_key());
        let other = CyclicWord::from_word(&Word::parse(&al, "abaB").unwrap());
        assert_ne!(r.class_key(), other.class_key());
    }

    #[test]
    fn exponent_sums() {
        let al = ab();
        let w = Word::parse(&al, "abAAb").unwrap();
        assert_eq!(w.exponent_sum(0), -1);
        assert_eq!(w.exponent_sum(1), 2);
        assert_eq!(w.letter_count(0), 3);
    }
}
