//! Presentations with metric small-cancellation analysis: symmetrized
//! relators, exact piece tables, the C'(λ) condition, and Dehn's algorithm.

use crate::error::{Error, Result};
use crate::word::{same_alphabet, Alphabet, CyclicWord, Letter, Word};
use std::cmp::Ordering;
use std::collections::HashSet;
use std::sync::{Arc, OnceLock};

/// A finite presentation. Relators are cyclically reduced and deduplicated
/// up to rotation and inversion.
#[derive(Clone)]
pub struct Presentation {
    alphabet: Arc<Alphabet>,
    relators: Vec<CyclicWord>,
    name: String,
    sym: OnceLock<Arc<Sym>>,
    pieces: OnceLock<PieceTable>,
    metric_16: OnceLock<std::result::Result<(), Error>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Occurrence {
    pub relator: usize,
    pub inverted: bool,
    pub offset: usize,
}

#[derive(Clone, Debug)]
pub struct PieceWitness {
    pub piece: Word,
    pub first: Occurrence,
    pub second: Occurrence,
}

/// Longest-piece data per relator plus the global worst ratio.
#[derive(Clone, Debug)]
pub struct PieceTable {
    pub per_relator: Vec<RelatorPieces>,
    /// (piece length, relator length) of the worst ratio, if any piece exists.
    pub max_ratio: Option<(usize, usize)>,
    pub witness: Option<PieceWitness>,
}

#[derive(Clone, Debug)]
pub struct RelatorPieces {
    pub relator_len: usize,
    pub max_piece_len: usize,
    pub witness: Option<PieceWitness>,
}

#[derive(Clone, Debug)]
pub struct MetricReport {
    pub holds: bool,
    pub lambda: (u64, u64),
    pub max_ratio: Option<(usize, usize)>,
    pub violation: Option<(usize, PieceWitness)>,
}

/// One replacement step of Dehn's algorithm.
#[derive(Clone, Debug)]
pub struct DehnStep {
    pub position: usize,
    pub matched_len: usize,
    pub occurrence: Occurrence,
    pub inserted: Word,
}

impl Presentation {
    pub fn new<S: AsRef<str>>(
        alphabet: &Arc<Alphabet>,
        relators: &[Word],
        name: S,
    ) -> Result<Presentation> {
        let mut seen: HashSet<Vec<u32>> = HashSet::new();
        let mut cyclic = Vec::new();
        for r in relators {
            if !same_alphabet(alphabet, r.alphabet()) {
                return Err(Error::AlphabetMismatch);
            }
            let (core, _) = r.cyclic_reduce();
            if core.as_word().is_empty() {
                return Err(Error::InvalidParameter(
                    "relator is trivial after cyclic reduction".into(),
                ));
            }
            if seen.insert(core.class_key()) {
                cyclic.push(core);
            }
        }
        Ok(Presentation {
            alphabet: alphabet.clone(),
            relators: cyclic,
            name: name.as_ref().to_string(),
            sym: OnceLock::new(),
            pieces: OnceLock::new(),
            metric_16: OnceLock::new(),
        })
    }

    /// Parses the presentation text format: a `gens:` line, `rel:` lines,
    /// `#` comments.
    pub fn parse_text(text: &str, name: &str) -> Result<Presentation> {
        let mut gens: Option<Arc<Alphabet>> = None;
        let mut relator_sources: Vec<String> = Vec::new();
        for raw in text.lines() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("gens:") {
                if gens.is_some() {
                    return Err(Error::Parse("repeated gens: line".into()));
                }
                let names: Vec<&str> = rest.split_whitespace().collect();
                gens = Some(Alphabet::new(&names)?);
            } else if let Some(rest) = line.strip_prefix("rel:") {
                relator_sources.push(rest.trim().to_string());
            } else {
                return Err(Error::Parse(format!("unrecognized line `{line}`")));
            }
        }
        let alphabet = gens.ok_or_else(|| Error::Parse("missing gens: line".into()))?;
        let relators = relator_sources
            .iter()
            .map(|s| Word::parse(&alphabet, s))
            .collect::<Result<Vec<_>>>()?;
        Presentation::new(&alphabet, &relators, name)
    }

    /// Writes the text format back out; `parse_text` round-trips it.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("gens:");
        for n in self.alphabet.names() {
            out.push(' ');
            out.push_str(n);
        }
        out.push('\n');
        for r in &self.relators {
            out.push_str("rel: ");
            out.push_str(&r.as_word().format_runs());
            out.push('\n');
        }
        out
    }

    pub fn alphabet(&self) -> &Arc<Alphabet> {
        &self.alphabet
    }

    pub fn relators(&self) -> &[CyclicWord] {
        &self.relators
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Length of the shortest relator.
    pub fn girth(&self) -> Option<usize> {
        self.relators.iter().map(|r| r.as_word().len()).min()
    }

    /// All cyclic rotations of all relators and their inverses, deduplicated
    /// as plain words.
    pub fn symmetrize(&self) -> Vec<Word> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for r in &self.relators {
            for oriented in [r.clone(), r.inverse()] {
                let n = oriented.as_word().len();
                for off in 0..n {
                    let w = oriented.rotation(off);
                    if seen.insert(w.letters().to_vec()) {
                        out.push(w);
                    }
                }
            }
        }
        out
    }

    fn sym(&self) -> &Arc<Sym> {
        self.sym.get_or_init(|| Arc::new(Sym::build(self)))
    }

    /// Exact longest-piece table over the symmetrized relator set.
    pub fn piece_table(&self) -> &PieceTable {
        self.pieces
            .get_or_init(|| self.sym().piece_table(cfg!(feature = "parallel")))
    }

    /// Piece scan with an explicit parallelism switch (tuning hook; the
    /// cached `piece_table` uses the crate feature default).
    pub fn piece_table_mode(&self, parallel: bool) -> PieceTable {
        self.sym().piece_table(parallel && cfg!(feature = "parallel"))
    }

    /// The metric condition: every piece of every relator r is strictly
    /// shorter than λ·|r|, with λ = num/den in exact arithmetic.
    pub fn check_metric(&self, num: u64, den: u64) -> Result<MetricReport> {
        if num == 0 || den == 0 || num > den {
            return Err(Error::InvalidParameter(format!(
                "lambda must satisfy 0 < num/den <= 1, got {num}/{den}"
            )));
        }
        let table = self.piece_table();
        let mut violation: Option<(usize, PieceWitness)> = None;
        for (idx, rp) in table.per_relator.iter().enumerate() {
            // piece < λ·|r|  ⟺  piece·den < num·|r|
            if (rp.max_piece_len as u128) * (den as u128)
                >= (num as u128) * (rp.relator_len as u128)
                && rp.max_piece_len > 0
            {
                if violation.is_none() {
                    violation = Some((idx, rp.witness.clone().expect("piece has witness")));
                }
            }
        }
        Ok(MetricReport {
            holds: violation.is_none(),
            lambda: (num, den),
            max_ratio: table.max_ratio,
            violation,
        })
    }

    pub fn require_sixth(&self) -> Result<()> {
        self.metric_16
            .get_or_init(|| {
                let report = self.check_metric(1, 6)?;
                match report.violation {
                    None => Ok(()),
                    Some((idx, w)) => Err(Error::NotSmallCancellation(
                        "1/6".into(),
                        w.piece.format(),
                        w.piece.len(),
                        self.relators[idx].as_word().len(),
                    )),
                }
            })
            .clone()
    }

    /// Dehn's algorithm: repeatedly replace any subword that is more than
    /// half of a symmetrized relator by the inverse of the complement.
    /// Requires the C'(1/6) certificate; the trace lists each replacement.
    pub fn dehn_reduce(&self, w: &Word) -> Result<(Word, Vec<DehnStep>)> {
        if !same_alphabet(&self.alphabet, w.alphabet()) {
            return Err(Error::AlphabetMismatch);
        }
        self.require_sixth()?;
        let sym = self.sym().clone();
        let mut cur = w.clone();
        let mut trace = Vec::new();
        loop {
            match sym.best_over_half(&cur) {
                None => return Ok((cur, trace)),
                Some((pos, m, entry)) => {
                    let seq = &sym.seqs[entry.seq as usize];
                    let complement: Vec<Letter> = (m..seq.len)
                        .rev()
                        .map(|i| code_letter(seq.codes[entry.offset as usize + i]).inverse())
                        .collect();
                    let inserted = Word::from_letters(&self.alphabet, complement.clone());
                    let mut letters: Vec<Letter> = cur.letters()[..pos].to_vec();
                    letters.extend(complement);
                    letters.extend_from_slice(&cur.letters()[pos + m..]);
                    let next = Word::from_letters(&self.alphabet, letters);
                    debug_assert!(next.len() < cur.len());
                    trace.push(DehnStep {
                        position: pos,
                        matched_len: m,
                        occurrence: Occurrence {
                            relator: seq.relator,
                            inverted: seq.inverted,
                            offset: entry.offset as usize,
                        },
                        inserted,
                    });
                    cur = next;
                }
            }
        }
    }

    /// True iff `w` contains no subword longer than half of any symmetrized
    /// relator.
    pub fn is_dehn_reduced(&self, w: &Word) -> Result<bool> {
        if !same_alphabet(&self.alphabet, w.alphabet()) {
            return Err(Error::AlphabetMismatch);
        }
        self.require_sixth()?;
        Ok(self.sym().best_over_half(w).is_none())
    }

    /// Word-problem verdict; sound on C'(1/6) input by Greendlinger's lemma.
    pub fn is_trivial(&self, w: &Word) -> Result<bool> {
        Ok(self.dehn_reduce(w)?.0.is_empty())
    }
}

fn code_letter(code: i32) -> Letter {
    Letter::new((code.unsigned_abs() as usize) - 1, code > 0)
}

fn code_rank(code: i32) -> u32 {
    let g = code.unsigned_abs() - 1;
    2 * g + u32::from(code < 0)
}

/// One oriented relator, doubled so every rotation is a contiguous slice.
struct SeqData {
    codes: Vec<i32>,
    len: usize,
    relator: usize,
    inverted: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
struct SymEntry {
    seq: u32,
    offset: u32,
}

/// The symmetrized occurrence index: every rotation of every oriented
/// relator, sorted lexicographically by letter rank.
struct Sym {
    alphabet: Arc<Alphabet>,
    seqs: Vec<SeqData>,
    sorted: Vec<SymEntry>,
    /// lcp of sorted[i] and sorted[i+1]
    adj_lcp: Vec<usize>,
}

impl Sym {
    fn build(p: &Presentation) -> Sym {
        let mut seqs = Vec::new();
        for (idx, r) in p.relators.iter().enumerate() {
            for (inverted, cw) in [(false, r.clone()), (true, r.inverse())] {
                let letters = cw.as_word().letters();
                let mut codes: Vec<i32> = letters.iter().map(|l| l.code()).collect();
                codes.extend(letters.iter().map(|l| l.code()).collect::<Vec<_>>());
                seqs.push(SeqData { codes, len: letters.len(), relator: idx, inverted });
            }
        }
        let mut sorted: Vec<SymEntry> = seqs
            .iter()
            .enumerate()
            .flat_map(|(s, d)| {
                (0..d.len as u32).map(move |offset| SymEntry { seq: s as u32, offset })
            })
            .collect();
        let cmp = |a: &SymEntry, b: &SymEntry| Sym::cmp_entries(&seqs, *a, *b);
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            sorted.par_sort_unstable_by(cmp);
        }
        #[cfg(not(feature = "parallel"))]
        sorted.sort_unstable_by(cmp);

        let lcp_at = |i: usize| -> usize { Sym::lcp_static(&seqs, sorted[i], sorted[i + 1]) };
        #[cfg(feature = "parallel")]
        let adj_lcp: Vec<usize> = {
            use rayon::prelude::*;
            (0..sorted.len().saturating_sub(1)).into_par_iter().map(lcp_at).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let adj_lcp: Vec<usize> =
            (0..sorted.len().saturating_sub(1)).map(lcp_at).collect();

        Sym { alphabet: p.alphabet.clone(), seqs, sorted, adj_lcp }
    }

    fn entry_letters(seqs: &[SeqData], e: SymEntry) -> &[i32] {
        let d = &seqs[e.seq as usize];
        &d.codes[e.offset as usize..e.offset as usize + d.len]
    }

    fn lcp_static(seqs: &[SeqData], a: SymEntry, b: SymEntry) -> usize {
        let xa = Sym::entry_letters(seqs, a);
        let xb = Sym::entry_letters(seqs, b);
        let n = xa.len().min(xb.len());
        (0..n).take_while(|&i| xa[i] == xb[i]).count()
    }

    fn cmp_entries(seqs: &[SeqData], a: SymEntry, b: SymEntry) -> Ordering {
        let xa = Sym::entry_letters(seqs, a);
        let xb = Sym::entry_letters(seqs, b);
        let n = xa.len().min(xb.len());
        for i in 0..n {
            match code_rank(xa[i]).cmp(&code_rank(xb[i])) {
                Ordering::Equal => {}
                o => return o,
            }
        }
        xa.len()
            .cmp(&xb.len())
            .then_with(|| (a.seq, a.offset).cmp(&(b.seq, b.offset)))
    }

    /// Longest piece anchored at sorted position `k`, with its partner.
    fn best_piece_at(&self, k: usize) -> Option<(usize, SymEntry)> {
        let e = self.sorted[k];
        let e_len = self.seqs[e.seq as usize].len;
        let mut best = 0usize;
        let mut partner = None;
        // scan downward
        let mut run = usize::MAX;
        let mut j = k;
        while j > 0 {
            j -= 1;
            run = run.min(self.adj_lcp[j]);
            if run <= best {
                break;
            }
            let f = self.sorted[j];
            let f_len = self.seqs[f.seq as usize].len;
            let capped = run.min(e_len.min(f_len) - 1);
            if capped > best {
                best = capped;
                partner = Some(f);
            }
        }
        // scan upward
        run = usize::MAX;
        let mut j = k;
        while j + 1 < self.sorted.len() {
            run = run.min(self.adj_lcp[j]);
            j += 1;
            if run <= best {
                break;
            }
            let f = self.sorted[j];
            let f_len = self.seqs[f.seq as usize].len;
            let capped = run.min(e_len.min(f_len) - 1);
            if capped > best {
                best = capped;
                partner = Some(f);
            }
        }
        partner.map(|p| (best, p))
    }

    fn piece_table(self: &Arc<Self>, parallel: bool) -> PieceTable {
        let n_rel = self
            .seqs
            .iter()
            .map(|s| s.relator + 1)
            .max()
            .unwrap_or(0);
        let rel_len = |idx: usize| -> usize {
            self.seqs.iter().find(|s| s.relator == idx).map(|s| s.len).unwrap_or(0)
        };
        let compute = |k: usize| -> Option<(usize, usize, SymEntry, SymEntry)> {
            self.best_piece_at(k)
                .map(|(len, partner)| (len, self.sorted[k].seq as usize, self.sorted[k], partner))
        };
        let found: Vec<Option<(usize, usize, SymEntry, SymEntry)>> = if parallel {
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                (0..self.sorted.len()).into_par_iter().map(compute).collect()
            }
            #[cfg(not(feature = "parallel"))]
            (0..self.sorted.len()).map(compute).collect()
        } else {
            (0..self.sorted.len()).map(compute).collect()
        };

        let mut per: Vec<RelatorPieces> = (0..n_rel)
            .map(|idx| RelatorPieces {
                relator_len: rel_len(idx),
                max_piece_len: 0,
                witness: None,
            })
            .collect();
        for item in found.into_iter().flatten() {
            let (len, seq_idx, e, f) = item;
            let relator = self.seqs[seq_idx].relator;
            let slot = &mut per[relator];
            let better = len > slot.max_piece_len
                || (len == slot.max_piece_len
                    && len > 0
                    && slot.witness.as_ref().map_or(false, |w| {
                        let cand = self.piece_codes(e, len);
                        let cur: Vec<i32> =
                            w.piece.letters().iter().map(|l| l.code()).collect();
                        rank_lex_less(&cand, &cur)
                    }));
            if better {
                slot.max_piece_len = len;
                slot.witness = Some(self.witness(e, f, len));
            }
        }
        let mut max_ratio: Option<(usize, usize)> = None;
        let mut witness = None;
        for rp in &per {
            if rp.max_piece_len == 0 {
                continue;
            }
            let better = match max_ratio {
                None => true,
                Some((pl, rl)) => {
                    (rp.max_piece_len as u128) * (rl as u128) > (pl as u128) * (rp.relator_len as u128)
                }
            };
            if better {
                max_ratio = Some((rp.max_piece_len, rp.relator_len));
                witness = rp.witness.clone();
            }
        }
        PieceTable { per_relator: per, max_ratio, witness }
    }

    fn piece_codes(&self, e: SymEntry, len: usize) -> Vec<i32> {
        Sym::entry_letters(&self.seqs, e)[..len].to_vec()
    }

    fn witness(&self, e: SymEntry, f: SymEntry, len: usize) -> PieceWitness {
        let codes = self.piece_codes(e, len);
        let piece = Word::from_letters(&self.alphabet, codes.into_iter().map(code_letter));
        PieceWitness {
            piece,
            first: self.occurrence(e),
            second: self.occurrence(f),
        }
    }

    fn occurrence(&self, e: SymEntry) -> Occurrence {
        let s = &self.seqs[e.seq as usize];
        Occurrence { relator: s.relator, inverted: s.inverted, offset: e.offset as usize }
    }

    /// The longest over-half match in `w`: returns (position, match length,
    /// entry). C'(1/6) makes the over-half occurrence at each position
    /// unique and adjacent to the binary-search insertion point.
    fn best_over_half(&self, w: &Word) -> Option<(usize, usize, SymEntry)> {
        let codes: Vec<i32> = w.letters().iter().map(|l| l.code()).collect();
        let mut best: Option<(usize, usize, SymEntry)> = None;
        for pos in 0..codes.len() {
            let query = &codes[pos..];
            let ins = self.sorted.partition_point(|&e| self.entry_below(e, query));
            for cand in [ins.checked_sub(1), Some(ins)].into_iter().flatten() {
                if cand >= self.sorted.len() {
                    continue;
                }
                let e = self.sorted[cand];
                let letters = Sym::entry_letters(&self.seqs, e);
                let m = letters
                    .iter()
                    .zip(query)
                    .take_while(|(a, b)| a == b)
                    .count();
                let full = self.seqs[e.seq as usize].len;
                if 2 * m > full {
                    let better = match &best {
                        None => true,
                        Some((_, bm, _)) => m > *bm,
                    };
                    if better {
                        best = Some((pos, m, e));
                    }
                }
            }
        }
        best
    }

    /// Strictly-less comparison of an entry against a query suffix.
    fn entry_below(&self, e: SymEntry, query: &[i32]) -> bool {
        let letters = Sym::entry_letters(&self.seqs, e);
        let n = letters.len().min(query.len());
        for i in 0..n {
            match code_rank(letters[i]).cmp(&code_rank(query[i])) {
                Ordering::Less => return true,
                Ordering::Greater => return false,
                Ordering::Equal => {}
            }
        }
        letters.len() < query.len()
    }
}

fn rank_lex_less(a: &[i32], b: &[i32]) -> bool {
    for (x, y) in a.iter().zip(b) {
        match code_rank(*x).cmp(&code_rank(*y)) {
            Ordering::Less => return true,
            Ordering::Greater => return false,
            Ordering::Equal => {}
        }
    }
    a.len() < b.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pres(gens: &[&str], rels: &[&str], name: &str) -> Presentation {
        let al = Alphabet::new(gens).unwrap();
        let rs: Vec<Word> = rels.iter().map(|r| Word::parse(&al, r).unwrap()).collect();
        Presentation::new(&al, &rs, name).unwrap()
    }

    fn genus2() -> Presentation {
        pres(&["a", "b", "c", "d"], &["abABcdCD"], "genus2")
    }

    #[test]
    fn abab_has_piece_aba() {
        let p = pres(&["a", "b"], &["abab"], "sq");
        let t = p.piece_table();
        assert_eq!(t.per_relator[0].max_piece_len, 3);
        assert_eq!(t.max_ratio, Some((3, 4)));
        let w = t.witness.as_ref().unwrap();
        assert_eq!(w.piece.format(), "aba");
        assert_ne!(w.first, w.second);
        let report = p.check_metric(1, 6).unwrap();
        assert!(!report.holds);
        assert_eq!(report.violation.as_ref().unwrap().1.piece.format(), "aba");
    }

    #[test]
    fn genus2_is_sixth() {
        let p = genus2();
        let t = p.piece_table();
        assert_eq!(t.per_relator[0].max_piece_len, 1);
        assert_eq!(t.max_ratio, Some((1, 8)));
        assert!(p.check_metric(1, 6).unwrap().holds);
        assert!(p.check_metric(1, 8).unwrap().holds == false); // strict: 1 < 1/8·8 fails
    }

    #[test]
    fn proper_power_piece() {
        let p = pres(&["a", "b"], &["aa", "bbb"], "powers");
        let t = p.piece_table();
        assert_eq!(t.per_relator[0].max_piece_len, 1);
        assert_eq!(t.per_relator[1].max_piece_len, 2);
    }

    #[test]
    fn symmetrize_counts() {
        let p = pres(&["a", "b"], &["ab"], "one");
        let s = p.symmetrize();
        assert_eq!(s.len(), 4);
        assert_eq!(genus2().symmetrize().len(), 16);
        let sq = pres(&["a", "b"], &["abab"], "sq");
        assert_eq!(sq.symmetrize().len(), 4);
    }

    #[test]
    fn relators_deduplicate_up_to_rotation_and_inverse() {
        let al = Alphabet::new(&["a", "b"]).unwrap();
        let rels: Vec<Word> = ["abab", "baba", "BABA"]
            .iter()
            .map(|r| Word::parse(&al, r).unwrap())
            .collect();
        let p = Presentation::new(&al, &rels, "dups").unwrap();
        assert_eq!(p.relators().len(), 1);
    }

    #[test]
    fn dehn_kills_relator_and_traces_partial_match() {
        let p = genus2();
        let al = p.alphabet().clone();
        let r = Word::parse(&al, "abABcdCD").unwrap();
        let (out, trace) = p.dehn_reduce(&r).unwrap();
        assert!(out.is_empty());
        assert_eq!(trace.len(), 1);

        let w = Word::parse(&al, "abABcdC").unwrap();
        let (out, trace) = p.dehn_reduce(&w).unwrap();
        assert_eq!(out.format(), "d");
        assert_eq!(trace.len(), 1);
        assert_eq!(trace[0].position, 0);
        assert_eq!(trace[0].matched_len, 7);
        assert_eq!(
            trace[0].occurrence,
            Occurrence { relator: 0, inverted: false, offset: 0 }
        );
    }

    #[test]
    fn short_words_pass_through() {
        let p = genus2();
        let al = p.alphabet().clone();
        let w = Word::parse(&al, "abc").unwrap();
        let (out, trace) = p.dehn_reduce(&w).unwrap();
        assert_eq!(out, w);
        assert!(trace.is_empty());
        assert!(!p.is_trivial(&w).unwrap());
        assert!(p.is_dehn_reduced(&w).unwrap());
        assert!(!p.is_dehn_reduced(&Word::parse(&al, "abABcdCD").unwrap()).unwrap());
        assert!(p.is_dehn_reduced(&Word::empty(&al)).unwrap());
    }

    #[test]
    fn conjugated_relator_products_are_trivial() {
        let p = genus2();
        let al = p.alphabet().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let random_word = |rng: &mut ChaCha8Rng, len: usize| -> Word {
            let letters: Vec<Letter> = (0..len)
                .map(|_| Letter::new(rng.gen_range(0..al.len()), rng.gen_bool(0.5)))
                .collect();
            Word::from_letters(&al, letters)
        };
        for _ in 0..200 {
            let mut prod = Word::empty(&al);
            let k = rng.gen_range(1..=5);
            for _ in 0..k {
                let conj_len = rng.gen_range(0..=6);
                let g = random_word(&mut rng, conj_len);
                let r = p.relators()[0].as_word();
                let r = if rng.gen_bool(0.5) { r.clone() } else { r.invert() };
                let conj = g.cat(&r).cat(&g.invert());
                prod = prod.cat(&conj);
            }
            assert!(p.is_trivial(&prod).unwrap());
        }
    }

    #[test]
    fn dehn_rejects_non_sixth_presentations() {
        let p = pres(&["a", "b"], &["abab"], "sq");
        let al = p.alphabet().clone();
        let w = Word::parse(&al, "ab").unwrap();
        match p.dehn_reduce(&w) {
            Err(Error::NotSmallCancellation(lambda, piece, plen, rlen)) => {
                assert_eq!(lambda, "1/6");
                assert_eq!(piece, "aba");
                assert_eq!(plen, 3);
                assert_eq!(rlen, 4);
            }
            other => panic!("expected small-cancellation rejection, got {other:?}"),
        }
    }

    /// Brute force: all occurrence pairs, lcp capped one below the shorter
    /// relator.
    fn brute_pieces(p: &Presentation) -> Vec<usize> {
        let mut entries: Vec<(usize, Vec<i32>)> = Vec::new();
        for (idx, r) in p.relators().iter().enumerate() {
            for cw in [r.clone(), r.inverse()] {
                let n = cw.as_word().len();
                for off in 0..n {
                    let rot = cw.rotation(off);
                    entries.push((idx, rot.letters().iter().map(|l| l.code()).collect()));
                }
            }
        }
        let mut per = vec![0usize; p.relators().len()];
        for i in 0..entries.len() {
            for j in 0..entries.len() {
                if i == j {
                    continue;
                }
                let (ri, a) = &entries[i];
                let (_, b) = &entries[j];
                let lcp = a.iter().zip(b.iter()).take_while(|(x, y)| x == y).count();
                let capped = lcp.min(a.len().min(b.len()) - 1);
                per[*ri] = per[*ri].max(capped);
            }
        }
        per
    }

    #[test]
    fn piece_table_matches_brute_force() {
        let cases = [
            pres(&["a", "b"], &["abab"], "sq"),
            genus2(),
            pres(&["a", "b"], &["aa", "bbb"], "powers"),
            pres(&["a", "b"], &["abAB", "bbb"], "mixed"),
        ];
        for p in &cases {
            let fast: Vec<usize> =
                p.piece_table().per_relator.iter().map(|r| r.max_piece_len).collect();
            assert_eq!(fast, brute_pieces(p), "{}", p.name());
        }
        // randomized cross-check
        let al = Alphabet::new(&["a", "b", "c"]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..40 {
            let mut rels = Vec::new();
            for _ in 0..rng.gen_range(1..=3) {
                loop {
                    let letters: Vec<Letter> = (0..rng.gen_range(2..=10))
                        .map(|_| Letter::new(rng.gen_range(0..3), rng.gen_bool(0.5)))
                        .collect();
                    let w = Word::from_letters(&al, letters);
                    let (core, _) = w.cyclic_reduce();
                    if !core.as_word().is_empty() {
                        rels.push(core.as_word().clone());
                        break;
                    }
                }
            }
            let p = Presentation::new(&al, &rels, "rand").unwrap();
            let fast: Vec<usize> =
                p.piece_table().per_relator.iter().map(|r| r.max_piece_len).collect();
            assert_eq!(fast, brute_pieces(&p), "trial {trial}");
        }
    }

    #[test]
    fn parallel_and_sequential_scans_agree() {
        let p = genus2();
        let a = p.piece_table_mode(true);
        let b = p.piece_table_mode(false);
        assert_eq!(a.max_ratio, b.max_ratio);
        let la: Vec<usize> = a.per_relator.iter().map(|r| r.max_piece_len).collect();
        let lb: Vec<usize> = b.per_relator.iter().map(|r| r.max_piece_len).collect();
        assert_eq!(la, lb);
    }

    #[test]
    fn text_format_round_trip() {
        let p = pres(&["a", "b", "c1"], &["a b c1 c1", "a^3"], "rt");
        let text = p.to_text();
        let q = Presentation::parse_text(&text, "rt").unwrap();
        assert_eq!(p.relators().len(), q.relators().len());
        for (r, s) in p.relators().iter().zip(q.relators()) {
            assert_eq!(r.as_word(), s.as_word());
        }
        assert!(Presentation::parse_text("rel: ab", "x").is_err());
        assert!(Presentation::parse_text("gens: a b\nbogus", "x").is_err());
        let commented = "# header\ngens: a b # inline\nrel: ab # tail\n";
        let c = Presentation::parse_text(commented, "x").unwrap();
        assert_eq!(c.relators().len(), 1);
    }

    #[test]
    fn metric_lambda_validation() {
        let p = genus2();
        assert!(p.check_metric(0, 6).is_err());
        assert!(p.check_metric(7, 6).is_err());
        assert!(p.check_metric(1, 1).unwrap().holds);
    }
}
