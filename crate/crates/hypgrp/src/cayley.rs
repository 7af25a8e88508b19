//! Metric computations in Cayley graphs, backed by word-problem oracles:
//! ball construction with exact small-radius distances, Gromov products,
//! certified prefix lower bounds, empirical proximity tables along rays,
//! and a finite-evidence probe for boundary separation of word families.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::{Arc, Mutex};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gog::{restrict_to, AscendingHnnSpec, FreeProdSpec, HnnElement, RayDescriptor, RayTail};
use crate::smallcanc::Presentation;
use crate::word::{common_prefix_len, same_alphabet, Alphabet, Word};

/// Default element cap for ball construction.
pub const DEFAULT_BALL_CAP: usize = 2_000_000;

const CANDIDATE_CHUNK: usize = 32_768;
const DELTA_SAMPLE: usize = 40;
const SPOT_RADIUS: usize = 2;

/// Quasigeodesic acceptance threshold for sampled stable-letter powers:
/// d(1, t^m) / m must stay at or above 1/2 within the sampled reach.
pub const QUASI_RATIO: (u64, u64) = (1, 2);

/// Element cap, overridable through the HYPGRP_CAP environment variable.
pub fn default_cap() -> usize {
    std::env::var("HYPGRP_CAP")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(DEFAULT_BALL_CAP)
}

/// An exact half-integer, the natural value domain for Gromov products.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Half {
    twice: i64,
}

impl Half {
    pub fn from_twice(twice: i64) -> Half {
        Half { twice }
    }

    pub fn whole(n: i64) -> Half {
        Half { twice: 2 * n }
    }

    pub fn zero() -> Half {
        Half { twice: 0 }
    }

    pub fn twice(self) -> i64 {
        self.twice
    }

    pub fn is_integer(self) -> bool {
        self.twice % 2 == 0
    }

    pub fn as_f64(self) -> f64 {
        self.twice as f64 / 2.0
    }
}

impl fmt::Display for Half {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.twice % 2 == 0 {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

impl std::ops::Add for Half {
    type Output = Half;
    fn add(self, rhs: Half) -> Half {
        Half { twice: self.twice + rhs.twice }
    }
}

impl std::ops::Sub for Half {
    type Output = Half;
    fn sub(self, rhs: Half) -> Half {
        Half { twice: self.twice - rhs.twice }
    }
}

/// A word-problem oracle: an equality/triviality procedure for words over a
/// fixed alphabet, together with canonical forms where the group provides
/// them. Equality is a congruence; `congruence_sample` spot-checks this.
#[derive(Clone)]
pub enum WordOracle {
    /// Free group on the alphabet; reduced words are canonical.
    Free(Arc<Alphabet>),
    /// Small-cancellation quotient; triviality via Dehn's algorithm. The
    /// presentation must satisfy the verified 1/6 metric (checked at use
    /// sites). Reduced forms are not canonical.
    Dehn(Arc<Presentation>),
    /// Ascending HNN extension; pinched triples are canonical.
    Britton(Arc<AscendingHnnSpec>),
    /// Free product of a free base with an infinite cyclic stable factor;
    /// the group is free, so reduced spellings are canonical.
    FreeProd(Arc<FreeProdSpec>),
}

#[derive(Clone, PartialEq, Eq, Hash)]
enum BallKey {
    W(Word),
    H(HnnElement),
}

impl WordOracle {
    pub fn alphabet(&self) -> &Arc<Alphabet> {
        match self {
            WordOracle::Free(a) => a,
            WordOracle::Dehn(p) => p.alphabet(),
            WordOracle::Britton(s) => s.full_alphabet(),
            WordOracle::FreeProd(s) => s.full_alphabet(),
        }
    }

    pub fn is_trivial(&self, w: &Word) -> Result<bool> {
        if !same_alphabet(w.alphabet(), self.alphabet()) {
            return Err(Error::AlphabetMismatch);
        }
        match self {
            WordOracle::Free(_) | WordOracle::FreeProd(_) => Ok(w.is_empty()),
            WordOracle::Dehn(p) => p.is_trivial(w),
            WordOracle::Britton(s) => s.is_trivial(w),
        }
    }

    pub fn eq(&self, u: &Word, v: &Word) -> Result<bool> {
        match self {
            WordOracle::Free(_) | WordOracle::FreeProd(_) => {
                if !same_alphabet(u.alphabet(), self.alphabet())
                    || !same_alphabet(v.alphabet(), self.alphabet())
                {
                    return Err(Error::AlphabetMismatch);
                }
                Ok(u == v)
            }
            _ => self.is_trivial(&u.concat(&v.invert())?),
        }
    }

    /// Whether reduced word length is already the exact distance (the group
    /// is free on the alphabet).
    pub fn has_exact_lengths(&self) -> bool {
        matches!(self, WordOracle::Free(_) | WordOracle::FreeProd(_))
    }

    fn canonical_key(&self, w: &Word) -> Result<Option<BallKey>> {
        match self {
            WordOracle::Free(_) | WordOracle::FreeProd(_) => Ok(Some(BallKey::W(w.clone()))),
            WordOracle::Britton(s) => Ok(Some(BallKey::H(s.element(w)?))),
            WordOracle::Dehn(_) => Ok(None),
        }
    }

    /// Truncations of a ray, interpreted in this oracle's group. Oracles
    /// without a stable letter only accept periodic tails.
    pub fn ray_points(&self, rd: &RayDescriptor, count: usize) -> Result<Vec<Word>> {
        match self {
            WordOracle::Britton(s) => s.ray_points(rd, count),
            WordOracle::FreeProd(s) => s.ray_points(rd, count),
            WordOracle::Free(_) | WordOracle::Dehn(_) => {
                if !same_alphabet(rd.prefix.alphabet(), self.alphabet()) {
                    return Err(Error::AlphabetMismatch);
                }
                match &rd.tail {
                    RayTail::Periodic { pattern } => {
                        let mut acc = rd.prefix.clone();
                        let mut out = Vec::with_capacity(count);
                        for _ in 0..count {
                            acc = acc.concat(pattern)?;
                            out.push(acc.clone());
                        }
                        Ok(out)
                    }
                    _ => Err(Error::InvalidParameter(
                        "ray tail requires a stable-letter context".into(),
                    )),
                }
            }
        }
    }
}

/// Spot check that oracle equality behaves as a congruence: reflexive,
/// symmetric, and stable under right and left multiplication, on seeded
/// random words padded with known trivial insertions.
pub fn congruence_sample(oracle: &WordOracle, seed: u64, trials: usize, max_len: usize) -> Result<bool> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let alpha = oracle.alphabet().clone();
    let rand_word = |rng: &mut rand_chacha::ChaCha8Rng, len: usize| {
        let mut out = Word::empty(&alpha);
        for _ in 0..len {
            let g = rng.gen_range(0..alpha.len());
            let pos = rng.gen_bool(0.5);
            out = out.cat(&Word::letter(&alpha, g, pos));
        }
        out
    };
    for _ in 0..trials {
        let lu = rng.gen_range(0..=max_len);
        let lw = rng.gen_range(0..=max_len);
        let u = rand_word(&mut rng, lu);
        let w = rand_word(&mut rng, lw);
        let v = u.cat(&trivial_padding(oracle, &mut rng)?);
        if !oracle.eq(&u, &u)? {
            return Ok(false);
        }
        if !oracle.eq(&u, &v)? || !oracle.eq(&v, &u)? {
            return Ok(false);
        }
        if !oracle.eq(&u.cat(&w), &v.cat(&w))? || !oracle.eq(&w.cat(&u), &w.cat(&v))? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn trivial_padding(oracle: &WordOracle, rng: &mut rand_chacha::ChaCha8Rng) -> Result<Word> {
    use rand::Rng;
    let alpha = oracle.alphabet().clone();
    match oracle {
        WordOracle::Free(_) | WordOracle::FreeProd(_) => Ok(Word::empty(&alpha)),
        WordOracle::Dehn(p) => {
            if p.relators().is_empty() {
                return Ok(Word::empty(&alpha));
            }
            let r = &p.relators()[rng.gen_range(0..p.relators().len())];
            Ok(r.rotation(rng.gen_range(0..r.len().max(1))))
        }
        WordOracle::Britton(s) => {
            let t = Word::letter(&alpha, s.stable_gen(), true);
            let g = rng.gen_range(0..s.base_alphabet().len());
            let x = Word::letter(&alpha, g, true);
            let img = s.endo_on_full().apply(&x)?;
            Ok(t.cat(&x).cat(&t.invert()).cat(&img.invert()))
        }
    }
}

/// Exact distance if within reach, otherwise a certified lower bound.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum DistanceVerdict {
    Exact(usize),
    Beyond(usize),
}

impl fmt::Display for DistanceVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistanceVerdict::Exact(d) => write!(f, "{d}"),
            DistanceVerdict::Beyond(r) => write!(f, "> {r}"),
        }
    }
}

struct BallElem {
    repr: Word,
    dist: usize,
    parent: Option<(usize, usize)>,
}

enum Index {
    Canon(HashMap<BallKey, usize>),
    Pairwise {
        by_reduced: HashMap<Word, usize>,
        memo: Mutex<HashMap<Word, bool>>,
    },
}

/// A metric ball around the identity: BFS layers with exact distances up to
/// the achieved radius, one geodesic spelling per element via parent links.
pub struct Ball {
    oracle: WordOracle,
    gens: Vec<Word>,
    requested: usize,
    achieved: usize,
    complete: bool,
    cap: usize,
    elems: Vec<BallElem>,
    starts: Vec<usize>,
    index: Index,
}

struct Candidate {
    parent: usize,
    gen: usize,
    word: Word,
    key: Option<BallKey>,
}

fn prepare_candidate(
    oracle: &WordOracle,
    parent_repr: &Word,
    gen: &Word,
    p: usize,
    g: usize,
) -> Result<Candidate> {
    let raw = parent_repr.cat(gen);
    match oracle {
        WordOracle::Dehn(pres) => {
            let (red, _) = pres.dehn_reduce(&raw)?;
            Ok(Candidate { parent: p, gen: g, word: red, key: None })
        }
        _ => {
            let key = oracle.canonical_key(&raw)?;
            Ok(Candidate { parent: p, gen: g, word: raw, key })
        }
    }
}

#[cfg(feature = "parallel")]
fn run_chunk(
    oracle: &WordOracle,
    elems: &[BallElem],
    gens: &[Word],
    work: &[(usize, usize)],
) -> Result<Vec<Candidate>> {
    work.par_iter()
        .map(|&(p, g)| prepare_candidate(oracle, &elems[p].repr, &gens[g], p, g))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn run_chunk(
    oracle: &WordOracle,
    elems: &[BallElem],
    gens: &[Word],
    work: &[(usize, usize)],
) -> Result<Vec<Candidate>> {
    work.iter()
        .map(|&(p, g)| prepare_candidate(oracle, &elems[p].repr, &gens[g], p, g))
        .collect()
}

/// Triviality with memoization, keyed by the shortlex-smaller of the reduced
/// product and its inverse.
fn memo_trivial(
    pres: &Presentation,
    memo: &Mutex<HashMap<Word, bool>>,
    u: &Word,
    v: &Word,
) -> Result<bool> {
    let prod = u.cat(&v.invert());
    let inv = prod.invert();
    let key = if prod.shortlex_cmp(&inv) == std::cmp::Ordering::Greater { inv } else { prod.clone() };
    if let Some(&b) = memo.lock().unwrap().get(&key) {
        return Ok(b);
    }
    let b = pres.is_trivial(&prod)?;
    memo.lock().unwrap().insert(key, b);
    Ok(b)
}

/// BFS ball of the given radius with the default element cap.
pub fn build_ball(oracle: &WordOracle, gens: &[Word], radius: usize) -> Result<Ball> {
    build_ball_capped(oracle, gens, radius, default_cap())
}

/// BFS ball with an explicit element cap. When the cap is hit mid-layer the
/// partial layer is discarded and the ball reports the last completed radius.
pub fn build_ball_capped(
    oracle: &WordOracle,
    gens: &[Word],
    radius: usize,
    cap: usize,
) -> Result<Ball> {
    if cap == 0 {
        return Err(Error::InvalidParameter("element cap must be positive".into()));
    }
    let alpha = oracle.alphabet().clone();
    if let WordOracle::Dehn(p) = oracle {
        p.require_sixth()?;
    }
    let girth = match oracle {
        WordOracle::Dehn(p) => p.girth(),
        _ => None,
    };
    let mut sym: Vec<Word> = Vec::new();
    let mut seen: HashSet<Word> = HashSet::new();
    for g in gens {
        if !same_alphabet(g.alphabet(), &alpha) {
            return Err(Error::AlphabetMismatch);
        }
        if g.is_empty() {
            continue;
        }
        for h in [g.clone(), g.invert()] {
            if seen.insert(h.clone()) {
                sym.push(h);
            }
        }
    }

    let root = Word::empty(&alpha);
    let mut index = match oracle {
        WordOracle::Dehn(_) => {
            let mut by_reduced = HashMap::new();
            by_reduced.insert(root.clone(), 0usize);
            Index::Pairwise { by_reduced, memo: Mutex::new(HashMap::new()) }
        }
        _ => {
            let mut map = HashMap::new();
            let key = oracle.canonical_key(&root)?.expect("canonical oracle");
            map.insert(key, 0usize);
            Index::Canon(map)
        }
    };
    let mut elems = vec![BallElem { repr: root, dist: 0, parent: None }];
    let mut starts = vec![0usize, 1];
    let mut achieved = 0usize;
    let mut complete = true;

    'layers: for d in 1..=radius {
        let lo = starts[d - 1];
        let hi = starts[d];
        if lo == hi {
            achieved = radius;
            break;
        }
        let layer_begin = elems.len();
        let mut layer_keys: Vec<BallKey> = Vec::new();
        let mut layer_words: Vec<Word> = Vec::new();
        let mut truncated = false;

        let rows = (CANDIDATE_CHUNK / sym.len().max(1)).max(1);
        let mut p0 = lo;
        while p0 < hi {
            let p1 = (p0 + rows).min(hi);
            let work: Vec<(usize, usize)> = (p0..p1)
                .flat_map(|p| (0..sym.len()).map(move |g| (p, g)))
                .collect();
            let prepared = run_chunk(oracle, &elems, &sym, &work)?;
            for cand in prepared {
                let dup = match (&mut index, &cand.key) {
                    (Index::Canon(map), Some(k)) => map.contains_key(k),
                    (Index::Pairwise { by_reduced, memo }, None) => {
                        if by_reduced.contains_key(&cand.word) {
                            true
                        } else {
                            let pres = match oracle {
                                WordOracle::Dehn(p) => p,
                                _ => unreachable!(),
                            };
                            let g = girth.unwrap_or(usize::MAX);
                            let scan_from = starts[d.saturating_sub(2)];
                            let mut hit = false;
                            for e in &elems[scan_from..] {
                                if cand.word.len() + e.dist < g {
                                    continue;
                                }
                                if memo_trivial(pres, memo, &cand.word, &e.repr)? {
                                    hit = true;
                                    break;
                                }
                            }
                            hit
                        }
                    }
                    _ => unreachable!(),
                };
                if dup {
                    continue;
                }
                if elems.len() >= cap {
                    truncated = true;
                    break;
                }
                let idx = elems.len();
                match (&mut index, cand.key) {
                    (Index::Canon(map), Some(k)) => {
                        map.insert(k.clone(), idx);
                        layer_keys.push(k);
                    }
                    (Index::Pairwise { by_reduced, .. }, None) => {
                        by_reduced.insert(cand.word.clone(), idx);
                        layer_words.push(cand.word.clone());
                    }
                    _ => unreachable!(),
                }
                elems.push(BallElem {
                    repr: cand.word,
                    dist: d,
                    parent: Some((cand.parent, cand.gen)),
                });
            }
            if truncated {
                break;
            }
            p0 = p1;
        }

        if truncated {
            match &mut index {
                Index::Canon(map) => {
                    for k in layer_keys {
                        map.remove(&k);
                    }
                }
                Index::Pairwise { by_reduced, .. } => {
                    for w in layer_words {
                        by_reduced.remove(&w);
                    }
                }
            }
            elems.truncate(layer_begin);
            achieved = d - 1;
            complete = false;
            break 'layers;
        }
        starts.push(elems.len());
        achieved = d;
        if elems.len() == layer_begin {
            achieved = radius;
            break;
        }
    }

    Ok(Ball {
        oracle: oracle.clone(),
        gens: sym,
        requested: radius,
        achieved,
        complete,
        cap,
        elems,
        starts,
        index,
    })
}

impl Ball {
    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn requested_radius(&self) -> usize {
        self.requested
    }

    pub fn achieved_radius(&self) -> usize {
        self.achieved
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn oracle(&self) -> &WordOracle {
        &self.oracle
    }

    pub fn generators(&self) -> &[Word] {
        &self.gens
    }

    pub fn repr_of(&self, i: usize) -> &Word {
        &self.elems[i].repr
    }

    pub fn dist_of(&self, i: usize) -> usize {
        self.elems[i].dist
    }

    pub fn parent_of(&self, i: usize) -> Option<(usize, usize)> {
        self.elems[i].parent
    }

    /// The geodesic spelling recorded by the parent links: a product of
    /// exactly `dist_of(i)` generators.
    pub fn spelling(&self, i: usize) -> Word {
        let mut steps = Vec::new();
        let mut cur = i;
        while let Some((p, g)) = self.elems[cur].parent {
            steps.push(g);
            cur = p;
        }
        steps.reverse();
        let mut out = Word::empty(self.oracle.alphabet());
        for g in steps {
            out = out.cat(&self.gens[g]);
        }
        out
    }

    pub fn sphere_sizes(&self) -> Vec<usize> {
        self.starts.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Index of the element represented by `w`, if it lies in the ball.
    pub fn locate(&self, w: &Word) -> Result<Option<usize>> {
        if !same_alphabet(w.alphabet(), self.oracle.alphabet()) {
            return Err(Error::AlphabetMismatch);
        }
        match (&self.index, &self.oracle) {
            (Index::Canon(map), _) => {
                let key = self.oracle.canonical_key(w)?.expect("canonical oracle");
                Ok(map.get(&key).copied())
            }
            (Index::Pairwise { by_reduced, memo }, WordOracle::Dehn(pres)) => {
                let (red, _) = pres.dehn_reduce(w)?;
                if let Some(&i) = by_reduced.get(&red) {
                    return Ok(Some(i));
                }
                let g = pres.girth().unwrap_or(usize::MAX);
                for (j, e) in self.elems.iter().enumerate() {
                    if red.len() + e.dist < g {
                        continue;
                    }
                    if memo_trivial(pres, memo, &red, &e.repr)? {
                        return Ok(Some(j));
                    }
                }
                Ok(None)
            }
            _ => unreachable!(),
        }
    }

    /// Exact d(1, w) when it is at most the achieved radius, else a verdict
    /// that the distance exceeds it.
    pub fn distance(&self, w: &Word) -> Result<DistanceVerdict> {
        Ok(match self.locate(w)? {
            Some(i) => DistanceVerdict::Exact(self.elems[i].dist),
            None => DistanceVerdict::Beyond(self.achieved),
        })
    }
}

/// A Gromov product value, exact when every distance it needs is in reach.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProductVerdict {
    Exact(Half),
    /// The separation d(x, y) exceeded the stated reach.
    Unknown(usize),
}

/// (d(1,x) + d(1,y) - d(x,y)) / 2, with d(x,y) resolved inside the ball or,
/// failing that, in a fresh ball of twice the radius under the same cap.
pub fn gromov_product(ball: &Ball, x: &Word, y: &Word) -> Result<ProductVerdict> {
    let ix = ball
        .locate(x)?
        .ok_or_else(|| Error::InvalidParameter("first point lies outside the ball".into()))?;
    let iy = ball
        .locate(y)?
        .ok_or_else(|| Error::InvalidParameter("second point lies outside the ball".into()))?;
    let dx = ball.dist_of(ix);
    let dy = ball.dist_of(iy);
    let diff = x.invert().concat(y)?;
    let dxy = match ball.distance(&diff)? {
        DistanceVerdict::Exact(d) => d,
        DistanceVerdict::Beyond(_) => {
            let ext = build_ball_capped(
                &ball.oracle,
                &ball.gens,
                2 * ball.achieved,
                ball.cap,
            )?;
            match ext.distance(&diff)? {
                DistanceVerdict::Exact(d) => d,
                DistanceVerdict::Beyond(r) => return Ok(ProductVerdict::Unknown(r)),
            }
        }
    };
    Ok(ProductVerdict::Exact(Half::from_twice(dx as i64 + dy as i64 - dxy as i64)))
}

fn product_in_ball(ball: &Ball, x: &Word, y: &Word) -> Result<Option<Half>> {
    let dx = match ball.distance(x)? {
        DistanceVerdict::Exact(d) => d,
        _ => return Ok(None),
    };
    let dy = match ball.distance(y)? {
        DistanceVerdict::Exact(d) => d,
        _ => return Ok(None),
    };
    let diff = x.invert().concat(y)?;
    let dxy = match ball.distance(&diff)? {
        DistanceVerdict::Exact(d) => d,
        _ => return Ok(None),
    };
    Ok(Some(Half::from_twice(dx as i64 + dy as i64 - dxy as i64)))
}

/// Sampled lower bound for a hyperbolicity constant: the largest four-point
/// defect min(<x,z>, <z,y>) - <x,y> over sampled triples whose pairwise
/// separations resolve inside the ball. Never an upper bound for the true
/// constant. Balls of radius below 2 report 0 by convention.
pub fn estimate_delta(ball: &Ball) -> Result<Half> {
    if ball.achieved_radius() < 2 {
        return Ok(Half::zero());
    }
    let n = ball.len();
    let stride = (n / DELTA_SAMPLE).max(1);
    let sample: Vec<usize> = (0..n).step_by(stride).collect();
    let k = sample.len();
    let mut prod = vec![vec![None; k]; k];
    for a in 0..k {
        for b in a..k {
            let p = product_in_ball(ball, ball.repr_of(sample[a]), ball.repr_of(sample[b]))?;
            prod[a][b] = p;
            prod[b][a] = p;
        }
    }
    let mut best = Half::zero();
    for x in 0..k {
        for y in 0..k {
            for z in 0..k {
                if let (Some(pxz), Some(pzy), Some(pxy)) = (prod[x][z], prod[z][y], prod[x][y]) {
                    let defect = std::cmp::min(pxz, pzy) - pxy;
                    if defect > best {
                        best = defect;
                    }
                }
            }
        }
    }
    Ok(best)
}

/// The context in which a word is certified geodesic.
#[derive(Clone)]
pub enum GeodesicCertifier {
    /// Reduced words in a free group are geodesic outright.
    FreeReduced,
    /// Dehn-reduced words under a verified 1/6 presentation, with prefix
    /// geodesity spot-checked by BFS at a small radius.
    DehnReduced(Arc<Presentation>),
}

/// A word together with the certificate that justified treating it as
/// geodesic. Only certified words enter prefix lower bounds.
#[derive(Clone)]
pub struct CertifiedGeodesic {
    word: Word,
    how: GeodesicCertifier,
}

impl CertifiedGeodesic {
    pub fn certify(word: Word, how: GeodesicCertifier) -> Result<CertifiedGeodesic> {
        match &how {
            GeodesicCertifier::FreeReduced => {}
            GeodesicCertifier::DehnReduced(p) => {
                if !same_alphabet(word.alphabet(), p.alphabet()) {
                    return Err(Error::AlphabetMismatch);
                }
                p.require_sixth()?;
                if !p.is_dehn_reduced(&word)? {
                    return Err(Error::Rejected("word is not Dehn-reduced".into()));
                }
                let r = SPOT_RADIUS.min(word.len());
                if r > 0 {
                    let oracle = WordOracle::Dehn(p.clone());
                    let ball = build_ball_capped(&oracle, &standard_gens(p.alphabet()), r, default_cap())?;
                    let prefix = Word::from_letters(word.alphabet(), word.letters()[..r].iter().copied());
                    if ball.distance(&prefix)? != DistanceVerdict::Exact(r) {
                        return Err(Error::Rejected("prefix fails the geodesity spot check".into()));
                    }
                }
            }
        }
        Ok(CertifiedGeodesic { word, how })
    }

    pub fn word(&self) -> &Word {
        &self.word
    }
}

fn standard_gens(alpha: &Arc<Alphabet>) -> Vec<Word> {
    (0..alpha.len()).map(|g| Word::letter(alpha, g, true)).collect()
}

fn same_presentation(p: &Arc<Presentation>, q: &Arc<Presentation>) -> bool {
    if Arc::ptr_eq(p, q) {
        return true;
    }
    if !same_alphabet(p.alphabet(), q.alphabet()) {
        return false;
    }
    let mut a: Vec<Vec<u32>> = p.relators().iter().map(|r| r.class_key()).collect();
    let mut b: Vec<Vec<u32>> = q.relators().iter().map(|r| r.class_key()).collect();
    a.sort();
    b.sort();
    a == b
}

/// Length of the common prefix of two geodesic-certified words: a lower
/// bound for their Gromov product up to the hyperbolicity constant. Refuses
/// mismatched certificates.
pub fn prefix_gromov_lower_bound(u: &CertifiedGeodesic, v: &CertifiedGeodesic) -> Result<usize> {
    if !same_alphabet(u.word.alphabet(), v.word.alphabet()) {
        return Err(Error::AlphabetMismatch);
    }
    match (&u.how, &v.how) {
        (GeodesicCertifier::FreeReduced, GeodesicCertifier::FreeReduced) => {}
        (GeodesicCertifier::DehnReduced(p), GeodesicCertifier::DehnReduced(q)) => {
            if !same_presentation(p, q) {
                return Err(Error::Rejected(
                    "geodesic certificates come from different presentations".into(),
                ));
            }
        }
        _ => {
            return Err(Error::Rejected(
                "geodesic certificates come from different contexts".into(),
            ))
        }
    }
    Ok(common_prefix_len(&u.word, &v.word))
}

/// One row of a proximity table: among sampled ray point pairs whose
/// inner-group product is at least `n`, the least observed outer-group
/// product, with counts of contributing and out-of-reach pairs.
#[derive(Clone, Debug)]
pub struct MitraRow {
    pub n: usize,
    pub eta: Option<Half>,
    pub pairs: usize,
    pub capped: usize,
}

/// Empirical proximity profile along a ray: how far from the basepoint the
/// outer group sees pairs that the inner group separates by at least n.
#[derive(Clone, Debug)]
pub struct MitraTable {
    pub rows: Vec<MitraRow>,
    pub points: usize,
    pub inner_capped: usize,
}

impl MitraTable {
    pub fn is_monotone(&self) -> bool {
        let etas: Vec<Half> = self.rows.iter().filter_map(|r| r.eta).collect();
        etas.windows(2).all(|w| w[0] <= w[1])
    }
}

struct Metric {
    exact: bool,
    ball: Option<Ball>,
}

impl Metric {
    fn new(oracle: &WordOracle, radius: usize, cap: usize) -> Result<Metric> {
        if oracle.has_exact_lengths() {
            Ok(Metric { exact: true, ball: None })
        } else {
            let ball = build_ball_capped(oracle, &standard_gens(oracle.alphabet()), radius, cap)?;
            Ok(Metric { exact: false, ball: Some(ball) })
        }
    }

    fn product(&self, u: &Word, v: &Word) -> Result<Option<Half>> {
        if self.exact {
            let diff = u.invert().concat(v)?;
            Ok(Some(Half::from_twice(
                u.len() as i64 + v.len() as i64 - diff.len() as i64,
            )))
        } else {
            product_in_ball(self.ball.as_ref().expect("metric ball"), u, v)
        }
    }
}

/// Build the proximity table for a ray seen in an inner and an outer group.
/// `depth` ray truncations are compared pairwise; metric balls (where a
/// group is not free) reach to `radius` under the element cap, and pairs
/// beyond reach are reported per row rather than silently dropped.
pub fn mitra_table(
    inner: &WordOracle,
    outer: &WordOracle,
    ray: &RayDescriptor,
    depth: usize,
    radius: usize,
    cap: usize,
) -> Result<MitraTable> {
    if depth == 0 {
        return Ok(MitraTable { rows: Vec::new(), points: 0, inner_capped: 0 });
    }
    let outer_pts = outer.ray_points(ray, depth)?;
    let inner_pts: Vec<Word> = outer_pts
        .iter()
        .map(|w| restrict_to(w, inner.alphabet()))
        .collect::<Result<_>>()?;
    let inner_metric = Metric::new(inner, radius, cap)?;
    let outer_metric = Metric::new(outer, radius, cap)?;

    let mut observed: Vec<(Half, Option<Half>)> = Vec::new();
    let mut inner_capped = 0usize;
    for i in 0..depth {
        for j in (i + 1)..depth {
            match inner_metric.product(&inner_pts[i], &inner_pts[j])? {
                Some(pi) => {
                    let po = outer_metric.product(&outer_pts[i], &outer_pts[j])?;
                    observed.push((pi, po));
                }
                None => inner_capped += 1,
            }
        }
    }

    let max_n = observed
        .iter()
        .map(|(pi, _)| (pi.twice() / 2).max(0) as usize)
        .max()
        .unwrap_or(0);
    let mut rows = Vec::new();
    for n in 1..=max_n {
        let threshold = Half::whole(n as i64);
        let mut eta: Option<Half> = None;
        let mut pairs = 0usize;
        let mut capped = 0usize;
        for (pi, po) in &observed {
            if *pi >= threshold {
                match po {
                    Some(p) => {
                        pairs += 1;
                        eta = Some(match eta {
                            Some(e) => e.min(*p),
                            None => *p,
                        });
                    }
                    None => capped += 1,
                }
            }
        }
        if pairs + capped > 0 {
            rows.push(MitraRow { n, eta, pairs, capped });
        }
    }
    Ok(MitraTable { rows, points: depth, inner_capped })
}

/// An indexed word family with certified inner lengths carried as log10
/// values (admitting members far too long to materialize).
#[derive(Clone, Debug)]
pub struct WordFamily {
    pub label: String,
    pub words: Vec<Word>,
    pub inner_log10: Vec<f64>,
}

impl WordFamily {
    pub fn new(label: &str, words: Vec<Word>, inner_log10: Vec<f64>) -> Result<WordFamily> {
        if words.len() != inner_log10.len() {
            return Err(Error::InvalidParameter(
                "family words and inner lengths disagree in count".into(),
            ));
        }
        Ok(WordFamily { label: label.to_string(), words, inner_log10 })
    }

    /// Inner lengths taken to be the spelled lengths (free inner group).
    pub fn from_words(label: &str, words: Vec<Word>) -> WordFamily {
        let inner_log10 = words.iter().map(|w| (w.len() as f64).log10()).collect();
        WordFamily { label: label.to_string(), words, inner_log10 }
    }
}

#[derive(Clone, Debug)]
pub struct JkloRow {
    pub n: usize,
    pub m: usize,
    pub bound: usize,
}

/// Outcome of the boundary-separation probe: finite evidence only, with the
/// unprovable remainder recorded as explicit assumptions.
#[derive(Clone, Debug)]
pub struct JkloReport {
    pub rows: Vec<JkloRow>,
    pub diagonal: Vec<usize>,
    pub diagonal_unbounded: bool,
    pub inner_divergent: bool,
    pub quasi_samples: Vec<(usize, usize)>,
    pub quasi_ok: bool,
    pub separation: String,
    pub assumptions: Vec<String>,
    pub evidence: bool,
}

impl fmt::Display for JkloReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "inner lengths diverge: {}", self.inner_divergent)?;
        writeln!(
            f,
            "stable powers quasigeodesic on samples (ratio >= {}/{}): {}",
            QUASI_RATIO.0, QUASI_RATIO.1, self.quasi_ok
        )?;
        writeln!(f, "separation: {}", self.separation)?;
        for a in &self.assumptions {
            writeln!(f, "assumed: {a}")?;
        }
        writeln!(f, "diagonal prefix bounds: {:?}", self.diagonal)?;
        writeln!(
            f,
            "strong-separation evidence: {} (finite evidence only, no theorem claimed)",
            self.evidence
        )
    }
}

/// Probe two word families for boundary-separation evidence in the outer
/// group: the first must diverge in the inner group (certified lengths),
/// the second must be a stable-letter power family, quasigeodesic on every
/// sampled power. Tabulates certified prefix lower bounds for the Gromov
/// products of all cross pairs; the evidence flag reports whether the
/// diagonal bounds grow strictly. Rejects uncertified or degenerate input.
pub fn jklo_probe(
    g1: &FreeProdSpec,
    outer: &Arc<Presentation>,
    seq_a: &WordFamily,
    seq_b: &WordFamily,
    radius: usize,
    cap: usize,
    declared: &[String],
) -> Result<JkloReport> {
    if seq_a.words.len() < 2 || seq_b.words.len() < 2 {
        return Err(Error::Rejected("families need at least two members".into()));
    }
    outer.require_sixth()?;
    for w in seq_a.words.iter().chain(seq_b.words.iter()) {
        if !same_alphabet(w.alphabet(), outer.alphabet()) {
            return Err(Error::AlphabetMismatch);
        }
    }

    let inner_divergent = seq_a.inner_log10.windows(2).all(|w| w[0] < w[1]);
    if !inner_divergent {
        return Err(Error::Rejected(format!(
            "family {} does not diverge in the inner group",
            seq_a.label
        )));
    }

    // The second family must march along the stable letter.
    let mut prev_mag: Option<i64> = None;
    let mut sign: Option<bool> = None;
    for w in seq_b.words.iter().skip(1) {
        let nf = g1.normal_form(&restrict_to(w, g1.full_alphabet())?)?;
        let syl = nf.syllables();
        let e = match syl {
            [crate::gog::Syllable::Stable(e)] => *e,
            _ => {
                return Err(Error::Rejected(format!(
                    "family {} is not a stable-letter power family",
                    seq_b.label
                )))
            }
        };
        if let Some(s) = sign {
            if s != (e > 0) {
                return Err(Error::Rejected("stable powers change direction".into()));
            }
        }
        sign = Some(e > 0);
        if let Some(m) = prev_mag {
            if e.abs() <= m {
                return Err(Error::Rejected("stable powers do not diverge".into()));
            }
        }
        prev_mag = Some(e.abs());
    }

    // The first family must not collapse onto the same stable circle.
    let mut base_syllables = 0usize;
    for w in seq_a.words.iter().skip(1) {
        let nf = g1.normal_form(&restrict_to(w, g1.full_alphabet())?)?;
        base_syllables = base_syllables.max(
            nf.syllables()
                .iter()
                .filter(|s| matches!(s, crate::gog::Syllable::Base(_)))
                .count(),
        );
    }
    if base_syllables == 0 {
        return Err(Error::Rejected(
            "families share the stable-letter limit; no separation to probe".into(),
        ));
    }
    let separation = format!(
        "{} carries up to {} base syllables with diverging certified inner lengths; {} is a pure stable-letter ray",
        seq_a.label, base_syllables, seq_b.label
    );

    // Quasigeodesic sampling for the stable powers, within ball reach.
    let oracle = WordOracle::Dehn(outer.clone());
    let ball = build_ball_capped(&oracle, &standard_gens(outer.alphabet()), radius, cap)?;
    let mut quasi_samples = Vec::new();
    let mut quasi_ok = true;
    for (m, w) in seq_b.words.iter().enumerate().skip(1) {
        match ball.distance(w)? {
            DistanceVerdict::Exact(d) => {
                quasi_samples.push((m, d));
                if (d as u64) * QUASI_RATIO.1 < (m as u64) * QUASI_RATIO.0 {
                    quasi_ok = false;
                }
            }
            DistanceVerdict::Beyond(_) => break,
        }
    }
    if quasi_samples.is_empty() {
        return Err(Error::Rejected(
            "no stable power is within sampling reach; raise the radius".into(),
        ));
    }

    let cert_a: Vec<CertifiedGeodesic> = seq_a
        .words
        .iter()
        .map(|w| CertifiedGeodesic::certify(w.clone(), GeodesicCertifier::DehnReduced(outer.clone())))
        .collect::<Result<_>>()?;
    let cert_b: Vec<CertifiedGeodesic> = seq_b
        .words
        .iter()
        .map(|w| CertifiedGeodesic::certify(w.clone(), GeodesicCertifier::DehnReduced(outer.clone())))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (n, ca) in cert_a.iter().enumerate() {
        for (m, cb) in cert_b.iter().enumerate() {
            rows.push(JkloRow { n, m, bound: prefix_gromov_lower_bound(ca, cb)? });
        }
    }
    let diag_len = cert_a.len().min(cert_b.len());
    let diagonal: Vec<usize> = (0..diag_len)
        .map(|k| rows[k * cert_b.len() + k].bound)
        .collect();
    let diagonal_unbounded = diagonal.windows(2).all(|w| w[0] < w[1]);

    let mut assumptions = vec![
        "stable-letter powers quasigeodesic beyond the sampled radius (retraction length argument)"
            .to_string(),
    ];
    assumptions.extend(declared.iter().cloned());

    let evidence = inner_divergent && quasi_ok && diagonal_unbounded;
    Ok(JkloReport {
        rows,
        diagonal,
        diagonal_unbounded,
        inner_divergent,
        quasi_samples,
        quasi_ok,
        separation,
        assumptions,
        evidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{ascending_demo, ascending_demo_g1, baker_riley, genus2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn f2() -> Arc<Alphabet> {
        Alphabet::new(&["a", "b"]).unwrap()
    }

    fn w(alpha: &Arc<Alphabet>, text: &str) -> Word {
        Word::parse(alpha, text).unwrap()
    }

    fn random_word(rng: &mut ChaCha8Rng, alphabet: &Arc<Alphabet>, len: usize) -> Word {
        let mut out = Word::empty(alphabet);
        for _ in 0..len {
            let g = rng.gen_range(0..alphabet.len());
            let pos = rng.gen_bool(0.5);
            out = out.cat(&Word::letter(alphabet, g, pos));
        }
        out
    }

    fn check_parent_links(ball: &Ball) {
        for i in 0..ball.len() {
            match ball.parent_of(i) {
                None => assert_eq!(ball.dist_of(i), 0),
                Some((p, _)) => assert_eq!(ball.dist_of(p) + 1, ball.dist_of(i)),
            }
            assert_eq!(ball.repr_of(i).len(), ball.dist_of(i));
            let spelled = ball.spelling(i);
            assert!(ball.oracle().eq(&spelled, ball.repr_of(i)).unwrap());
        }
    }

    #[test]
    fn free_rank2_ball_radius5() {
        let alpha = f2();
        let oracle = WordOracle::Free(alpha.clone());
        let ball = build_ball(&oracle, &standard_gens(&alpha), 5).unwrap();
        assert_eq!(ball.sphere_sizes(), vec![1, 4, 12, 36, 108, 324]);
        assert_eq!(ball.len(), 485);
        assert!(ball.is_complete());
        check_parent_links(&ball);
    }

    #[test]
    fn genus2_ball_radius3_matches_free_rank4() {
        let p = Arc::new(genus2());
        let oracle = WordOracle::Dehn(p.clone());
        let ball = build_ball(&oracle, &standard_gens(p.alphabet()), 3).unwrap();
        assert_eq!(ball.len(), 457);
        assert_eq!(ball.sphere_sizes(), vec![1, 8, 56, 392]);

        let free = WordOracle::Free(p.alphabet().clone());
        let free_ball = build_ball(&free, &standard_gens(p.alphabet()), 3).unwrap();
        assert_eq!(free_ball.sphere_sizes(), ball.sphere_sizes());
        check_parent_links(&ball);
    }

    #[test]
    fn radius_zero_is_identity_only() {
        let alpha = f2();
        let oracle = WordOracle::Free(alpha.clone());
        let ball = build_ball(&oracle, &standard_gens(&alpha), 0).unwrap();
        assert_eq!(ball.len(), 1);
        assert_eq!(ball.distance(&Word::empty(&alpha)).unwrap(), DistanceVerdict::Exact(0));
    }

    #[test]
    fn cap_truncates_to_last_full_layer() {
        let alpha = f2();
        let oracle = WordOracle::Free(alpha.clone());
        let ball = build_ball_capped(&oracle, &standard_gens(&alpha), 5, 10).unwrap();
        assert_eq!(ball.achieved_radius(), 1);
        assert_eq!(ball.len(), 5);
        assert!(!ball.is_complete());
        // A word of length 2 is now only known to be beyond radius 1.
        assert_eq!(ball.distance(&w(&alpha, "ab")).unwrap(), DistanceVerdict::Beyond(1));

        let exact = build_ball_capped(&oracle, &standard_gens(&alpha), 2, 17).unwrap();
        assert_eq!(exact.achieved_radius(), 2);
        assert!(exact.is_complete());
    }

    #[test]
    fn distance_verdicts() {
        let alpha = f2();
        let oracle = WordOracle::Free(alpha.clone());
        let ball = build_ball(&oracle, &standard_gens(&alpha), 4).unwrap();
        assert_eq!(ball.distance(&w(&alpha, "abAB")).unwrap(), DistanceVerdict::Exact(4));
        assert_eq!(ball.distance(&w(&alpha, "aa")).unwrap(), DistanceVerdict::Exact(2));

        let p = Arc::new(genus2());
        let oracle = WordOracle::Dehn(p.clone());
        let ball = build_ball(&oracle, &standard_gens(p.alphabet()), 3).unwrap();
        let relator = p.relators()[0].as_word().clone();
        assert_eq!(ball.distance(&relator).unwrap(), DistanceVerdict::Exact(0));
        // Dehn-reduced of length 4 i.e. beyond the radius, free below half girth.
        assert_eq!(
            ball.distance(&w(p.alphabet(), "abab")).unwrap(),
            DistanceVerdict::Beyond(3)
        );
        assert_eq!(format!("{}", DistanceVerdict::Beyond(3)), "> 3");
    }

    #[test]
    fn britton_ball_finds_compressions() {
        let spec = Arc::new(ascending_demo());
        let alpha = spec.full_alphabet().clone();
        let oracle = WordOracle::Britton(spec.clone());
        let ball = build_ball(&oracle, &standard_gens(&alpha), 4).unwrap();
        let sizes = ball.sphere_sizes();
        assert_eq!(sizes[0], 1);
        assert_eq!(sizes[1], 6);
        assert_eq!(sizes[2], 30);
        // Strictly below free-F3 sphere counts from radius 3 on: the
        // conjugation relation identifies spellings.
        assert!(sizes[3] < 150);
        assert!(sizes[4] < 5 * sizes[3]);
        check_parent_links(&ball);

        // t a t^-1 is the length-2 element ab.
        assert_eq!(ball.distance(&w(&alpha, "taT")).unwrap(), DistanceVerdict::Exact(2));
        // d(1, w) = d(1, w^-1) on a sample.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let len = rng.gen_range(0..=4);
            let u = random_word(&mut rng, &alpha, len);
            assert_eq!(ball.distance(&u).unwrap(), ball.distance(&u.invert()).unwrap());
        }
    }

    #[test]
    fn freeprod_ball_matches_free_group() {
        let spec = Arc::new(ascending_demo_g1());
        let alpha = spec.full_alphabet().clone();
        let oracle = WordOracle::FreeProd(spec);
        let ball = build_ball(&oracle, &standard_gens(&alpha), 3).unwrap();
        let free = build_ball(&WordOracle::Free(alpha.clone()), &standard_gens(&alpha), 3).unwrap();
        assert_eq!(ball.sphere_sizes(), free.sphere_sizes());
        assert_eq!(ball.len(), 1 + 6 + 30 + 150);
    }

    #[test]
    fn congruence_holds_on_samples() {
        let alpha = f2();
        assert!(congruence_sample(&WordOracle::Free(alpha.clone()), 1, 60, 6).unwrap());
        let p = Arc::new(genus2());
        assert!(congruence_sample(&WordOracle::Dehn(p), 2, 25, 5).unwrap());
        let spec = Arc::new(ascending_demo());
        assert!(congruence_sample(&WordOracle::Britton(spec), 3, 40, 5).unwrap());
        let g1 = Arc::new(ascending_demo_g1());
        assert!(congruence_sample(&WordOracle::FreeProd(g1), 4, 60, 6).unwrap());
    }

    #[test]
    fn gromov_products_free() {
        let alpha = f2();
        let oracle = WordOracle::Free(alpha.clone());
        let ball = build_ball(&oracle, &standard_gens(&alpha), 3).unwrap();
        let c = Alphabet::new(&["a", "b", "c"]).unwrap();
        let oc = WordOracle::Free(c.clone());
        let bc = build_ball(&oc, &standard_gens(&c), 2).unwrap();
        assert_eq!(
            gromov_product(&bc, &w(&c, "ab"), &w(&c, "ac")).unwrap(),
            ProductVerdict::Exact(Half::whole(1))
        );
        assert_eq!(
            gromov_product(&ball, &w(&alpha, "a"), &w(&alpha, "A")).unwrap(),
            ProductVerdict::Exact(Half::zero())
        );
        let v = w(&alpha, "abA");
        assert_eq!(
            gromov_product(&ball, &v, &v).unwrap(),
            ProductVerdict::Exact(Half::whole(3))
        );
        // Separation 6 forces the doubled-radius extension ball.
        assert_eq!(
            gromov_product(&ball, &w(&alpha, "aba"), &w(&alpha, "bab")).unwrap(),
            ProductVerdict::Exact(Half::zero())
        );
    }

    #[test]
    fn gromov_product_unknown_when_capped() {
        let p = Arc::new(genus2());
        let oracle = WordOracle::Dehn(p.clone());
        let ball = build_ball_capped(&oracle, &standard_gens(p.alphabet()), 1, 9).unwrap();
        assert_eq!(ball.achieved_radius(), 1);
        let verdict = gromov_product(&ball, &w(p.alphabet(), "a"), &w(p.alphabet(), "b")).unwrap();
        assert_eq!(verdict, ProductVerdict::Unknown(1));
    }

    #[test]
    fn gromov_product_half_integer_in_hnn() {
        let spec = Arc::new(ascending_demo());
        let alpha = spec.full_alphabet().clone();
        let oracle = WordOracle::Britton(spec);
        let ball = build_ball(&oracle, &standard_gens(&alpha), 6).unwrap();
        // phi^3(a) = abbabaab sits at distance 6 (t t ab T T), and the
        // difference A abbabaab = bbabaab at 6 as well (b t bba T), giving
        // the half-integer product 1/2.
        assert_eq!(
            ball.distance(&w(&alpha, "abbabaab")).unwrap(),
            DistanceVerdict::Exact(6)
        );
        let verdict = gromov_product(&ball, &w(&alpha, "a"), &w(&alpha, "abbabaab")).unwrap();
        assert_eq!(verdict, ProductVerdict::Exact(Half::from_twice(1)));
        assert_eq!(format!("{}", Half::from_twice(1)), "1/2");
        assert_eq!(format!("{}", Half::whole(3)), "3");
    }

    #[test]
    fn estimate_delta_zero_on_trees_and_small_genus2() {
        let alpha = f2();
        let oracle = WordOracle::Free(alpha.clone());
        let ball = build_ball(&oracle, &standard_gens(&alpha), 4).unwrap();
        assert_eq!(estimate_delta(&ball).unwrap(), Half::zero());

        let tiny = build_ball(&oracle, &standard_gens(&alpha), 1).unwrap();
        assert_eq!(estimate_delta(&tiny).unwrap(), Half::zero());

        let p = Arc::new(genus2());
        let oracle = WordOracle::Dehn(p.clone());
        let ball = build_ball(&oracle, &standard_gens(p.alphabet()), 3).unwrap();
        assert_eq!(estimate_delta(&ball).unwrap(), Half::zero());
    }

    #[test]
    fn certificates_and_prefix_bounds() {
        let alpha = f2();
        let u = CertifiedGeodesic::certify(w(&alpha, "abab"), GeodesicCertifier::FreeReduced).unwrap();
        let v = CertifiedGeodesic::certify(w(&alpha, "abba"), GeodesicCertifier::FreeReduced).unwrap();
        assert_eq!(prefix_gromov_lower_bound(&u, &v).unwrap(), 2);
        assert_eq!(prefix_gromov_lower_bound(&u, &u).unwrap(), 4);
        let d = CertifiedGeodesic::certify(w(&alpha, "ba"), GeodesicCertifier::FreeReduced).unwrap();
        assert_eq!(prefix_gromov_lower_bound(&u, &d).unwrap(), 0);

        let p = Arc::new(genus2());
        // More than half a relator is not Dehn-reduced.
        let bad = CertifiedGeodesic::certify(
            w(p.alphabet(), "abABcd"),
            GeodesicCertifier::DehnReduced(p.clone()),
        );
        assert!(matches!(bad, Err(Error::Rejected(_))));

        let x = CertifiedGeodesic::certify(
            w(p.alphabet(), "abc"),
            GeodesicCertifier::DehnReduced(p.clone()),
        )
        .unwrap();
        let y = CertifiedGeodesic::certify(
            w(p.alphabet(), "abd"),
            GeodesicCertifier::DehnReduced(p.clone()),
        )
        .unwrap();
        assert_eq!(prefix_gromov_lower_bound(&x, &y).unwrap(), 2);

        // Mixed certificate contexts are refused.
        let free_over_same = CertifiedGeodesic::certify(
            w(p.alphabet(), "abc"),
            GeodesicCertifier::FreeReduced,
        )
        .unwrap();
        assert!(matches!(
            prefix_gromov_lower_bound(&x, &free_over_same),
            Err(Error::Rejected(_))
        ));
    }

    #[test]
    fn product_dominates_certified_prefix_bound() {
        let alpha = f2();
        let oracle = WordOracle::Free(alpha.clone());
        let ball = build_ball(&oracle, &standard_gens(&alpha), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..50 {
            let lu = rng.gen_range(0..=3);
            let lv = rng.gen_range(0..=3);
            let u = random_word(&mut rng, &alpha, lu);
            let v = random_word(&mut rng, &alpha, lv);
            let cu = CertifiedGeodesic::certify(u.clone(), GeodesicCertifier::FreeReduced).unwrap();
            let cv = CertifiedGeodesic::certify(v.clone(), GeodesicCertifier::FreeReduced).unwrap();
            let bound = prefix_gromov_lower_bound(&cu, &cv).unwrap();
            match gromov_product(&ball, &u, &v).unwrap() {
                ProductVerdict::Exact(p) => assert!(p >= Half::whole(bound as i64)),
                ProductVerdict::Unknown(_) => panic!("free products always resolve"),
            }
        }
    }

    #[test]
    fn prefix_bounds_on_witness_family() {
        let fam = baker_riley(17, 2).unwrap();
        let outer = Arc::new(fam.g_bcd().clone());
        let alpha = outer.alphabet().clone();
        let b = Word::letter(&alpha, alpha.index_of("b").unwrap(), true);
        let powers: Vec<CertifiedGeodesic> = (0..=6usize)
            .map(|m| {
                CertifiedGeodesic::certify(
                    b.pow(m as i64),
                    GeodesicCertifier::DehnReduced(outer.clone()),
                )
                .unwrap()
            })
            .collect();
        for n in 0..=6usize {
            let wn = restrict_to(&fam.w_outer(n), &alpha).unwrap();
            let cw = CertifiedGeodesic::certify(wn, GeodesicCertifier::DehnReduced(outer.clone()))
                .unwrap();
            for (m, cb) in powers.iter().enumerate() {
                assert_eq!(prefix_gromov_lower_bound(&cw, cb).unwrap(), n.min(m));
            }
        }
    }

    #[test]
    fn mitra_table_free_ray_is_undistorted() {
        let alpha = f2();
        let oracle = WordOracle::Free(alpha.clone());
        let ray = RayDescriptor {
            prefix: Word::empty(&alpha),
            tail: RayTail::Periodic { pattern: w(&alpha, "a") },
        };
        let table = mitra_table(&oracle, &oracle, &ray, 6, 6, 100_000).unwrap();
        assert_eq!(table.rows.len(), 5);
        for (i, row) in table.rows.iter().enumerate() {
            assert_eq!(row.n, i + 1);
            assert_eq!(row.eta, Some(Half::whole((i + 1) as i64)));
            assert_eq!(row.capped, 0);
        }
        assert!(table.is_monotone());
    }

    #[test]
    fn mitra_table_depth_zero_empty() {
        let alpha = f2();
        let oracle = WordOracle::Free(alpha.clone());
        let ray = RayDescriptor {
            prefix: Word::empty(&alpha),
            tail: RayTail::Periodic { pattern: w(&alpha, "a") },
        };
        let table = mitra_table(&oracle, &oracle, &ray, 0, 4, 1000).unwrap();
        assert!(table.rows.is_empty());
    }

    #[test]
    fn mitra_table_base_power_ray_stays_linear() {
        // Every letter image under phi has length exactly 2, so no spelling
        // of a^k through the stable letter beats the direct one: the a-ray
        // is undistorted and the profile stays the identity.
        let spec = Arc::new(ascending_demo());
        let full = spec.full_alphabet().clone();
        let inner = WordOracle::Free(spec.base_alphabet().clone());
        let outer = WordOracle::Britton(spec.clone());
        let ray = RayDescriptor {
            prefix: Word::empty(&full),
            tail: RayTail::Periodic { pattern: w(&full, "a") },
        };
        let table = mitra_table(&inner, &outer, &ray, 6, 6, 500_000).unwrap();
        assert!(!table.rows.is_empty());
        for row in &table.rows {
            assert_eq!(row.eta, Some(Half::whole(row.n as i64)), "row {}", row.n);
        }
    }

    #[test]
    fn mitra_table_positive_ray_shows_distortion() {
        let spec = Arc::new(ascending_demo());
        let full = spec.full_alphabet().clone();
        let inner = WordOracle::Free(spec.base_alphabet().clone());
        let outer = WordOracle::Britton(spec.clone());
        let seed = w(spec.base_alphabet(), "a");
        let ray = RayDescriptor {
            prefix: Word::empty(&full),
            tail: RayTail::BaseEndo { seed },
        };
        let table = mitra_table(&inner, &outer, &ray, 4, 6, 500_000).unwrap();
        assert!(table.is_monotone());
        let last = table.rows.last().unwrap();
        // Outer proximity lags the inner separation: distortion visible.
        assert!(last.eta.unwrap() < Half::whole(last.n as i64));
        let first = table.rows.first().unwrap();
        assert!(first.eta.unwrap() <= Half::whole(1));
    }

    #[test]
    fn jklo_probe_witness_family_small() {
        let fam = baker_riley(17, 2).unwrap();
        let outer = Arc::new(fam.g_bcd().clone());
        let alpha = outer.alphabet().clone();
        let g1 = FreeProdSpec::new(fam.g_cd().alphabet(), "b", None).unwrap();

        let n_max = 6usize;
        let words_a: Vec<Word> = (0..=n_max)
            .map(|n| restrict_to(&fam.w_outer(n), &alpha).unwrap())
            .collect();
        let logs_a: Vec<f64> = (0..=n_max).map(|n| fam.w_log10_length(n).unwrap()).collect();
        let seq_a = WordFamily::new("w", words_a, logs_a).unwrap();

        let b = Word::letter(&alpha, alpha.index_of("b").unwrap(), true);
        let words_b: Vec<Word> = (0..=n_max).map(|m| b.pow(m as i64)).collect();
        let logs_b: Vec<f64> = (0..=n_max).map(|m| (m as f64).log10()).collect();
        let seq_b = WordFamily::new("b-powers", words_b, logs_b).unwrap();

        let report = jklo_probe(&g1, &outer, &seq_a, &seq_b, 3, 100_000, &[]).unwrap();
        assert!(report.inner_divergent);
        assert!(report.quasi_ok);
        assert!(report.diagonal_unbounded);
        assert!(report.evidence);
        for row in &report.rows {
            assert_eq!(row.bound, row.n.min(row.m));
        }
        for (m, d) in &report.quasi_samples {
            assert_eq!(m, d);
        }
    }

    #[test]
    fn jklo_probe_rejects_degenerate_families() {
        let fam = baker_riley(17, 2).unwrap();
        let outer = Arc::new(fam.g_bcd().clone());
        let alpha = outer.alphabet().clone();
        let g1 = FreeProdSpec::new(fam.g_cd().alphabet(), "b", None).unwrap();
        let b = Word::letter(&alpha, alpha.index_of("b").unwrap(), true);
        let words: Vec<Word> = (0..=4usize).map(|m| b.pow(m as i64)).collect();
        let logs: Vec<f64> = (0..=4usize).map(|m| (m as f64).log10()).collect();
        let powers = WordFamily::new("b-powers", words, logs).unwrap();

        // Identical stable families: no separation.
        let err = jklo_probe(&g1, &outer, &powers, &powers, 3, 100_000, &[]).unwrap_err();
        assert!(matches!(err, Error::Rejected(_)));

        // A constant family does not diverge.
        let c1 = Word::letter(&alpha, alpha.index_of("c1").unwrap(), true);
        let constant = WordFamily::new(
            "constant",
            vec![c1.clone(), c1.clone(), c1.clone()],
            vec![0.0, 0.0, 0.0],
        )
        .unwrap();
        let err = jklo_probe(&g1, &outer, &constant, &powers, 3, 100_000, &[]).unwrap_err();
        assert!(matches!(err, Error::Rejected(_)));
    }

    #[test]
    fn half_ordering_and_display() {
        assert!(Half::from_twice(3) > Half::whole(1));
        assert!(Half::from_twice(-1) < Half::zero());
        assert_eq!(format!("{}", Half::from_twice(-3)), "-3/2");
        assert_eq!(format!("{}", Half::from_twice(4)), "2");
        assert_eq!((Half::whole(2) - Half::from_twice(1)).twice(), 3);
        assert!(!Half::from_twice(5).is_integer());
        assert_eq!(Half::from_twice(5).as_f64(), 2.5);
    }

    #[test]
    fn oracle_eq_and_alphabet_guards() {
        let alpha = f2();
        let oracle = WordOracle::Free(alpha.clone());
        let other = Alphabet::new(&["x", "y"]).unwrap();
        assert!(matches!(
            oracle.is_trivial(&Word::empty(&other)),
            Err(Error::AlphabetMismatch)
        ));
        assert!(oracle.eq(&w(&alpha, "abA"), &w(&alpha, "abA")).unwrap());
        assert!(!oracle.eq(&w(&alpha, "ab"), &w(&alpha, "ba")).unwrap());
    }
}
