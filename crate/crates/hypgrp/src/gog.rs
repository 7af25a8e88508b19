//! Graph-of-groups combinatorics over free base groups: ascending HNN
//! extensions with Britton normal forms, free products, Bass-Serre
//! projections, boundary-ray descriptors, and amalgam composition.

use crate::error::{Error, Result};
use crate::smallcanc::Presentation;
use crate::stallings::{ExpressedSubgroup, SubgroupGraph};
use crate::substitution::Endomorphism;
use crate::word::{same_alphabet, Alphabet, Letter, Word};
use std::fmt;
use std::sync::Arc;

/// One syllable of an alternating normal form. Base words are spelled over
/// the full alphabet but use only base letters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Syllable {
    Base(Word),
    Stable(i64),
}

impl Syllable {
    fn size(&self) -> usize {
        match self {
            Syllable::Base(w) => w.len(),
            Syllable::Stable(e) => e.unsigned_abs() as usize,
        }
    }
}

/// An alternating syllable decomposition, Britton- or free-product-reduced
/// depending on which spec produced it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalForm {
    syllables: Vec<Syllable>,
    full: Arc<Alphabet>,
    stable_gen: usize,
}

impl NormalForm {
    pub fn syllables(&self) -> &[Syllable] {
        &self.syllables
    }

    pub fn is_trivial(&self) -> bool {
        self.syllables.is_empty()
    }

    pub fn syllable_count(&self) -> usize {
        self.syllables.len()
    }

    pub fn stable_syllable_count(&self) -> usize {
        self.syllables.iter().filter(|s| matches!(s, Syllable::Stable(_))).count()
    }

    /// Concatenates the syllables back into a plain word.
    pub fn flatten(&self) -> Word {
        let mut out = Word::empty(&self.full);
        let t = Word::letter(&self.full, self.stable_gen, true);
        for s in &self.syllables {
            out = match s {
                Syllable::Base(w) => out.cat(w),
                Syllable::Stable(e) => out.cat(&t.pow(*e)),
            };
        }
        out
    }

    /// The alternating coset path in the Bass-Serre tree: one edge into and
    /// one out of a stable-letter coset per stable syllable.
    pub fn bass_serre_projection(&self) -> TreeProjection {
        let t = Word::letter(&self.full, self.stable_gen, true);
        let mut prefix = Word::empty(&self.full);
        let mut vertices = vec![TreeVertex { kind: CosetKind::Base, rep: prefix.clone() }];
        for s in &self.syllables {
            match s {
                Syllable::Base(w) => prefix = prefix.cat(w),
                Syllable::Stable(e) => {
                    vertices.push(TreeVertex { kind: CosetKind::Stable, rep: prefix.clone() });
                    prefix = prefix.cat(&t.pow(*e));
                    vertices.push(TreeVertex { kind: CosetKind::Base, rep: prefix.clone() });
                }
            }
        }
        TreeProjection { vertices }
    }
}

impl fmt::Display for NormalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.syllables.is_empty() {
            return write!(f, "1");
        }
        let t_name = self.full.name(self.stable_gen);
        for s in &self.syllables {
            match s {
                Syllable::Base(w) => write!(f, "[{}]", w.format())?,
                Syllable::Stable(1) => write!(f, "[{t_name}]")?,
                Syllable::Stable(e) => write!(f, "[{t_name}^{e}]")?,
            }
        }
        Ok(())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum CosetKind {
    Base,
    Stable,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeVertex {
    pub kind: CosetKind,
    /// A coset representative: the normal-form prefix read so far.
    pub rep: Word,
}

/// A no-backtracking path in the Bass-Serre tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeProjection {
    pub vertices: Vec<TreeVertex>,
}

impl TreeProjection {
    pub fn edge_count(&self) -> usize {
        self.vertices.len().saturating_sub(1)
    }
}

/// The ascending HNN extension K*_φ = ⟨K, t | t k t⁻¹ = φ(k)⟩ for an
/// injective endomorphism φ of the free group K.
pub struct AscendingHnnSpec {
    base: Arc<Alphabet>,
    full: Arc<Alphabet>,
    stable_name: String,
    stable_gen: usize,
    endo: Endomorphism,
    endo_full: Endomorphism,
    /// Expresses elements of im φ over the images; powers the t⁻¹·k·t pinch.
    image_expr: ExpressedSubgroup,
}

impl AscendingHnnSpec {
    pub fn new(endo: Endomorphism, stable_name: &str) -> Result<AscendingHnnSpec> {
        let base = endo.alphabet().clone();
        let full = base.extend(&[stable_name])?;
        let stable_gen = base.len();
        let mut images_full: Vec<Word> = endo
            .images()
            .iter()
            .map(|im| im.embed_into(&full))
            .collect::<Result<_>>()?;
        let graph = SubgroupGraph::build(&full, &images_full)?;
        if graph.rank() != base.len() {
            return Err(Error::NotInjective { rank: graph.rank(), expected: base.len() });
        }
        let image_expr = ExpressedSubgroup::new(&full, &images_full, &base)?;
        images_full.push(Word::letter(&full, stable_gen, true));
        let endo_full = Endomorphism::new(&full, images_full)?;
        Ok(AscendingHnnSpec {
            base,
            full,
            stable_name: stable_name.to_string(),
            stable_gen,
            endo,
            endo_full,
            image_expr,
        })
    }

    pub fn base_alphabet(&self) -> &Arc<Alphabet> {
        &self.base
    }

    pub fn full_alphabet(&self) -> &Arc<Alphabet> {
        &self.full
    }

    pub fn stable_name(&self) -> &str {
        &self.stable_name
    }

    pub fn stable_gen(&self) -> usize {
        self.stable_gen
    }

    pub fn endo(&self) -> &Endomorphism {
        &self.endo
    }

    /// φ extended to the full alphabet by t ↦ t.
    pub fn endo_on_full(&self) -> &Endomorphism {
        &self.endo_full
    }

    /// φ⁻¹(w) for w in the image subgroup, None otherwise. `w` is spelled
    /// over the full alphabet but must use only base letters.
    pub fn phi_inverse(&self, w: &Word) -> Result<Option<Word>> {
        match self.image_expr.express(w)? {
            Some(over_base) => Ok(Some(over_base.embed_into(&self.full)?)),
            None => Ok(None),
        }
    }

    fn is_stable(&self, l: Letter) -> bool {
        l.generator() == self.stable_gen
    }

    /// Britton normal form of a raw word over base ∪ {t}. Pinches t·k·t⁻¹
    /// to φ(k) unconditionally and t⁻¹·k·t to φ⁻¹(k) exactly when the
    /// membership oracle certifies k ∈ φ(K).
    pub fn britton_normal_form(&self, raw: &Word) -> Result<NormalForm> {
        if !same_alphabet(&self.full, raw.alphabet()) {
            return Err(Error::AlphabetMismatch);
        }
        let mut syl: Vec<Syllable> = Vec::new();
        for &l in raw.letters() {
            if self.is_stable(l) {
                self.push_stable(&mut syl, if l.is_positive() { 1 } else { -1 })?;
            } else {
                push_base_letter(&mut syl, &self.full, l);
            }
        }
        Ok(NormalForm { syllables: syl, full: self.full.clone(), stable_gen: self.stable_gen })
    }

    fn push_stable(&self, syl: &mut Vec<Syllable>, sign: i64) -> Result<()> {
        if let Some(Syllable::Stable(e)) = syl.last_mut() {
            *e += sign;
            if *e == 0 {
                syl.pop();
                merge_top_bases(syl);
            }
            return Ok(());
        }
        let n = syl.len();
        if n >= 2 {
            if let (Syllable::Stable(e), Syllable::Base(k)) = (&syl[n - 2], &syl[n - 1]) {
                let e = *e;
                if sign < 0 && e > 0 {
                    // t k t⁻¹ -> φ(k)
                    let img = self.endo_full.apply(k)?;
                    syl.pop();
                    decrement_stable(syl, 1);
                    append_base_word(syl, &img);
                    return Ok(());
                }
                if sign > 0 && e < 0 {
                    if let Some(pre) = self.phi_inverse(k)? {
                        // t⁻¹ k t -> φ⁻¹(k)
                        syl.pop();
                        decrement_stable(syl, -1);
                        append_base_word(syl, &pre);
                        return Ok(());
                    }
                }
            }
        }
        syl.push(Syllable::Stable(sign));
        Ok(())
    }

    /// The canonical triple form of a group element.
    pub fn element(&self, raw: &Word) -> Result<HnnElement> {
        HnnElement::identity(self).mul_word(self, raw)
    }

    pub fn is_trivial(&self, raw: &Word) -> Result<bool> {
        Ok(self.element(raw)?.is_identity())
    }

    /// The defining presentation ⟨base, t | t x t⁻¹ φ(x)⁻¹⟩.
    pub fn presentation(&self, name: &str) -> Result<Presentation> {
        let t = Word::letter(&self.full, self.stable_gen, true);
        let relators: Vec<Word> = (0..self.base.len())
            .map(|g| {
                let x = Word::letter(&self.full, g, true);
                let img = self.endo.image(g).embed_into(&self.full)?;
                Ok(t.cat(&x).cat(&t.invert()).cat(&img.invert()))
            })
            .collect::<Result<_>>()?;
        Presentation::new(&self.full, &relators, name)
    }

    pub fn classify_ray(&self, rd: &RayDescriptor) -> Result<RayClass> {
        classify_with(rd, &self.full, self.stable_gen, Some(&self.endo), |w| {
            Ok(self.britton_normal_form(w)?)
        })
    }

    pub fn ray_points(&self, rd: &RayDescriptor, count: usize) -> Result<Vec<Word>> {
        ray_points_impl(rd, &self.full, self.stable_gen, Some(&self.endo), count)
    }
}

/// An element of K*_φ in the pinched form t^{-p}·w·t^{q} with p, q ≥ 0 and
/// w ∈ K: unique, hence usable as a dedup key.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HnnElement {
    p: u64,
    w: Word,
    q: u64,
}

impl HnnElement {
    pub fn identity(spec: &AscendingHnnSpec) -> HnnElement {
        HnnElement { p: 0, w: Word::empty(&spec.full), q: 0 }
    }

    pub fn is_identity(&self) -> bool {
        self.p == 0 && self.q == 0 && self.w.is_empty()
    }

    fn normalized(spec: &AscendingHnnSpec, mut p: u64, mut w: Word, mut q: u64) -> Result<HnnElement> {
        while p > 0 && q > 0 {
            match spec.phi_inverse(&w)? {
                Some(pre) => {
                    p -= 1;
                    q -= 1;
                    w = pre;
                }
                None => break,
            }
        }
        Ok(HnnElement { p, w, q })
    }

    pub fn mul_letter(&self, spec: &AscendingHnnSpec, l: Letter) -> Result<HnnElement> {
        if spec.is_stable(l) {
            if l.is_positive() {
                HnnElement::normalized(spec, self.p, self.w.clone(), self.q + 1)
            } else if self.q > 0 {
                Ok(HnnElement { p: self.p, w: self.w.clone(), q: self.q - 1 })
            } else {
                Ok(HnnElement {
                    p: self.p + 1,
                    w: spec.endo_full.apply(&self.w)?,
                    q: 0,
                })
            }
        } else {
            // w · φ^q(x)
            let mut x = Word::letter(&spec.full, l.generator(), l.is_positive());
            for _ in 0..self.q {
                x = spec.endo_full.apply(&x)?;
            }
            Ok(HnnElement { p: self.p, w: self.w.cat(&x), q: self.q })
        }
    }

    pub fn mul_word(&self, spec: &AscendingHnnSpec, raw: &Word) -> Result<HnnElement> {
        if !same_alphabet(&spec.full, raw.alphabet()) {
            return Err(Error::AlphabetMismatch);
        }
        let mut cur = self.clone();
        for &l in raw.letters() {
            cur = cur.mul_letter(spec, l)?;
        }
        Ok(cur)
    }

    pub fn invert(&self, spec: &AscendingHnnSpec) -> Result<HnnElement> {
        HnnElement::normalized(spec, self.q, self.w.invert(), self.p)
    }

    /// The spelled word t^{-p} w t^{q}.
    pub fn to_word(&self, spec: &AscendingHnnSpec) -> Word {
        let t = Word::letter(&spec.full, spec.stable_gen, true);
        t.pow(-(self.p as i64)).cat(&self.w).cat(&t.pow(self.q as i64))
    }
}

fn push_base_letter(syl: &mut Vec<Syllable>, full: &Arc<Alphabet>, l: Letter) {
    let unit = Word::letter(full, l.generator(), l.is_positive());
    match syl.last_mut() {
        Some(Syllable::Base(w)) => {
            let nw = w.cat(&unit);
            if nw.is_empty() {
                syl.pop();
            } else {
                *w = nw;
            }
        }
        _ => syl.push(Syllable::Base(unit)),
    }
}

/// After a pinch consumed the top base syllable, adjust the exposed stable
/// exponent by one in the pinch direction, dropping it at zero.
fn decrement_stable(syl: &mut Vec<Syllable>, dir: i64) {
    if let Some(Syllable::Stable(e)) = syl.last_mut() {
        *e -= dir;
        if *e == 0 {
            syl.pop();
        }
    }
}

fn append_base_word(syl: &mut Vec<Syllable>, w: &Word) {
    if w.is_empty() {
        return;
    }
    match syl.last_mut() {
        Some(Syllable::Base(u)) => {
            let nu = u.cat(w);
            if nu.is_empty() {
                syl.pop();
                merge_top_bases(syl);
            } else {
                *u = nu;
            }
        }
        _ => syl.push(Syllable::Base(w.clone())),
    }
}

/// After removing a zero stable power, the two neighboring base syllables
/// become adjacent and must merge (possibly cancelling away entirely).
fn merge_top_bases(syl: &mut Vec<Syllable>) {
    let n = syl.len();
    if n >= 2 {
        if let (Syllable::Base(_), Syllable::Base(_)) = (&syl[n - 2], &syl[n - 1]) {
            let Some(Syllable::Base(top)) = syl.pop() else { unreachable!() };
            append_base_word(syl, &top);
        }
    }
}

/// The free product K*⟨t⟩ (a free group, since K is free). Normal forms are
/// syllable groupings of reduced words; an optional base endomorphism powers
/// base-ray descriptors.
pub struct FreeProdSpec {
    base: Arc<Alphabet>,
    full: Arc<Alphabet>,
    stable_name: String,
    stable_gen: usize,
    base_endo: Option<Endomorphism>,
}

impl FreeProdSpec {
    pub fn new(
        base: &Arc<Alphabet>,
        stable_name: &str,
        base_endo: Option<Endomorphism>,
    ) -> Result<FreeProdSpec> {
        let full = base.extend(&[stable_name])?;
        if let Some(e) = &base_endo {
            if !same_alphabet(e.alphabet(), base) {
                return Err(Error::AlphabetMismatch);
            }
        }
        Ok(FreeProdSpec {
            base: base.clone(),
            stable_gen: base.len(),
            full,
            stable_name: stable_name.to_string(),
            base_endo,
        })
    }

    pub fn base_alphabet(&self) -> &Arc<Alphabet> {
        &self.base
    }

    pub fn full_alphabet(&self) -> &Arc<Alphabet> {
        &self.full
    }

    pub fn stable_name(&self) -> &str {
        &self.stable_name
    }

    pub fn stable_gen(&self) -> usize {
        self.stable_gen
    }

    /// Groups the (already freely reduced) word into alternating syllables.
    pub fn normal_form(&self, raw: &Word) -> Result<NormalForm> {
        if !same_alphabet(&self.full, raw.alphabet()) {
            return Err(Error::AlphabetMismatch);
        }
        let mut syl: Vec<Syllable> = Vec::new();
        for &l in raw.letters() {
            if l.generator() == self.stable_gen {
                match syl.last_mut() {
                    Some(Syllable::Stable(e)) => *e += if l.is_positive() { 1 } else { -1 },
                    _ => syl.push(Syllable::Stable(if l.is_positive() { 1 } else { -1 })),
                }
            } else {
                push_base_letter(&mut syl, &self.full, l);
            }
        }
        debug_assert!(!syl.iter().any(|s| s.size() == 0));
        Ok(NormalForm { syllables: syl, full: self.full.clone(), stable_gen: self.stable_gen })
    }

    pub fn classify_ray(&self, rd: &RayDescriptor) -> Result<RayClass> {
        classify_with(rd, &self.full, self.stable_gen, self.base_endo.as_ref(), |w| {
            Ok(self.normal_form(w)?)
        })
    }

    /// Membership in Ω = {h·t^{±∞}}: true exactly when the tail is a stable
    /// power after a finite prefix.
    pub fn omega_membership(&self, rd: &RayDescriptor) -> Result<bool> {
        Ok(matches!(self.classify_ray(rd)?, RayClass::TFiniteStable { .. }))
    }

    pub fn ray_points(&self, rd: &RayDescriptor, count: usize) -> Result<Vec<Word>> {
        ray_points_impl(rd, &self.full, self.stable_gen, self.base_endo.as_ref(), count)
    }
}

/// A finitely described boundary ray: a normal-form prefix plus a tail tag.
#[derive(Clone, Debug)]
pub struct RayDescriptor {
    pub prefix: Word,
    pub tail: RayTail,
}

#[derive(Clone, Debug)]
pub enum RayTail {
    /// t^{+∞}
    StablePlus,
    /// t^{-∞}
    StableMinus,
    /// seed · φ(seed) ⊂ φ²(seed) ⊂ …, valid when φ(seed) extends seed.
    BaseEndo { seed: Word },
    /// pattern · pattern · …
    Periodic { pattern: Word },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum RayClass {
    TFiniteBase,
    TFiniteStable { positive: bool },
    TInfinite,
}

#[derive(Copy, Clone, Debug, Default)]
pub struct ComponentFlags {
    pub base_pair_has_ray_ct: bool,
    pub stable_pair_has_ray_ct: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Landing {
    Lands,
    LandsByHypothesis,
    Unknown,
}

/// T-infinite rays land unconditionally; T-finite rays land exactly when the
/// matching component hypothesis has been recorded.
pub fn landing_verdict(class: RayClass, flags: ComponentFlags) -> Landing {
    match class {
        RayClass::TInfinite => Landing::Lands,
        RayClass::TFiniteBase => {
            if flags.base_pair_has_ray_ct {
                Landing::LandsByHypothesis
            } else {
                Landing::Unknown
            }
        }
        RayClass::TFiniteStable { .. } => {
            if flags.stable_pair_has_ray_ct {
                Landing::LandsByHypothesis
            } else {
                Landing::Unknown
            }
        }
    }
}

fn classify_with<F>(
    rd: &RayDescriptor,
    full: &Arc<Alphabet>,
    stable_gen: usize,
    base_endo: Option<&Endomorphism>,
    nf: F,
) -> Result<RayClass>
where
    F: Fn(&Word) -> Result<NormalForm>,
{
    if !same_alphabet(full, rd.prefix.alphabet()) {
        return Err(Error::AlphabetMismatch);
    }
    match &rd.tail {
        RayTail::StablePlus => Ok(RayClass::TFiniteStable { positive: true }),
        RayTail::StableMinus => Ok(RayClass::TFiniteStable { positive: false }),
        RayTail::BaseEndo { seed } => {
            validate_base_endo(seed, full, stable_gen, base_endo)?;
            Ok(RayClass::TFiniteBase)
        }
        RayTail::Periodic { pattern } => {
            if !same_alphabet(full, pattern.alphabet()) {
                return Err(Error::AlphabetMismatch);
            }
            if pattern.is_empty() {
                return Err(Error::Rejected("periodic tail has an empty pattern".into()));
            }
            let n4 = nf(&pattern.pow(4))?;
            let n8 = nf(&pattern.pow(8))?;
            classify_periodic(&n4, &n8)
        }
    }
}

/// Letterwise re-spelling into a (possibly smaller) alphabet sharing names.
pub fn restrict_to(w: &Word, target: &Arc<Alphabet>) -> Result<Word> {
    let mut out = Word::empty(target);
    for &l in w.letters() {
        let name = w.alphabet().name(l.generator());
        let g = target
            .index_of(name)
            .ok_or_else(|| Error::UnknownGenerator(name.to_string()))?;
        out = out.cat(&Word::letter(target, g, l.is_positive()));
    }
    Ok(out)
}

fn validate_base_endo(
    seed: &Word,
    full: &Arc<Alphabet>,
    stable_gen: usize,
    base_endo: Option<&Endomorphism>,
) -> Result<()> {
    let endo = base_endo.ok_or_else(|| {
        Error::Rejected("base-endo tail requires an endomorphism on the base".into())
    })?;
    if seed.is_empty() {
        return Err(Error::Rejected("base-endo tail has an empty seed".into()));
    }
    let seed_base = if same_alphabet(seed.alphabet(), endo.alphabet()) {
        seed.clone()
    } else if same_alphabet(seed.alphabet(), full) {
        if seed.letters().iter().any(|l| l.generator() == stable_gen) {
            return Err(Error::Rejected("base-endo seed uses the stable letter".into()));
        }
        restrict_to(seed, endo.alphabet())?
    } else {
        return Err(Error::AlphabetMismatch);
    };
    let image = endo.apply(&seed_base)?;
    let extends = image.len() > seed_base.len()
        && image.letters()[..seed_base.len()] == *seed_base.letters();
    if !extends {
        return Err(Error::Rejected(
            "base-endo tail needs φ(seed) to properly extend seed".into(),
        ));
    }
    Ok(())
}

/// Compares the normal forms of pattern⁴ and pattern⁸: growing alternation
/// means a T-infinite ray; otherwise the unique growing syllable names the
/// eventual coset type.
fn classify_periodic(n4: &NormalForm, n8: &NormalForm) -> Result<RayClass> {
    if n8.syllable_count() > n4.syllable_count() {
        return Ok(RayClass::TInfinite);
    }
    let total4: usize = n4.syllables.iter().map(|s| s.size()).sum();
    let total8: usize = n8.syllables.iter().map(|s| s.size()).sum();
    if total8 <= total4 || n8.syllable_count() < n4.syllable_count() {
        return Err(Error::Rejected(
            "periodic pattern does not generate an infinite ray".into(),
        ));
    }
    let growing: Vec<usize> = (0..n8.syllable_count())
        .filter(|&i| n8.syllables[i].size() > n4.syllables[i].size())
        .collect();
    match growing.as_slice() {
        [i] => match &n8.syllables[*i] {
            Syllable::Base(_) => Ok(RayClass::TFiniteBase),
            Syllable::Stable(e) => Ok(RayClass::TFiniteStable { positive: *e > 0 }),
        },
        _ => Err(Error::Rejected(
            "periodic pattern has an ambiguous growth profile".into(),
        )),
    }
}

fn ray_points_impl(
    rd: &RayDescriptor,
    full: &Arc<Alphabet>,
    stable_gen: usize,
    base_endo: Option<&Endomorphism>,
    count: usize,
) -> Result<Vec<Word>> {
    if !same_alphabet(full, rd.prefix.alphabet()) {
        return Err(Error::AlphabetMismatch);
    }
    let t = Word::letter(full, stable_gen, true);
    let mut out = Vec::with_capacity(count);
    match &rd.tail {
        RayTail::StablePlus => {
            for i in 1..=count {
                out.push(rd.prefix.cat(&t.pow(i as i64)));
            }
        }
        RayTail::StableMinus => {
            for i in 1..=count {
                out.push(rd.prefix.cat(&t.pow(-(i as i64))));
            }
        }
        RayTail::BaseEndo { seed } => {
            validate_base_endo(seed, full, stable_gen, base_endo)?;
            let endo = base_endo.expect("validated");
            let mut cur = if same_alphabet(seed.alphabet(), endo.alphabet()) {
                seed.clone()
            } else {
                restrict_to(seed, endo.alphabet())?
            };
            for _ in 0..count {
                out.push(rd.prefix.cat(&cur.embed_into(full)?));
                cur = endo.apply(&cur)?;
            }
        }
        RayTail::Periodic { pattern } => {
            let mut acc = rd.prefix.clone();
            for _ in 0..count {
                acc = acc.concat(pattern)?;
                out.push(acc.clone());
            }
        }
    }
    Ok(out)
}

/// A multiple ascending HNN extension: one free base, several stable letters
/// t_j, each conjugating the base into itself by an injective φ_j.
pub struct MultiHnnSpec {
    base: Arc<Alphabet>,
    full: Arc<Alphabet>,
    stables: Vec<String>,
    endos: Vec<Endomorphism>,
}

impl MultiHnnSpec {
    pub fn new(pairs: Vec<(String, Endomorphism)>) -> Result<MultiHnnSpec> {
        if pairs.len() < 2 {
            return Err(Error::InvalidParameter(
                "a multiple ascending extension needs at least two stable letters".into(),
            ));
        }
        let base = pairs[0].1.alphabet().clone();
        for (_, e) in &pairs {
            if !same_alphabet(e.alphabet(), &base) {
                return Err(Error::AlphabetMismatch);
            }
            if !e.injectivity_check() {
                return Err(Error::NotInjective {
                    rank: SubgroupGraph::build(&base, e.images())?.rank(),
                    expected: base.len(),
                });
            }
        }
        let stables: Vec<String> = pairs.iter().map(|(s, _)| s.clone()).collect();
        let full = base.extend(&stables)?;
        let endos = pairs.into_iter().map(|(_, e)| e).collect();
        Ok(MultiHnnSpec { base, full, stables, endos })
    }

    pub fn base_alphabet(&self) -> &Arc<Alphabet> {
        &self.base
    }

    pub fn full_alphabet(&self) -> &Arc<Alphabet> {
        &self.full
    }

    pub fn stables(&self) -> &[String] {
        &self.stables
    }

    pub fn endos(&self) -> &[Endomorphism] {
        &self.endos
    }

    /// ⟨base, t_1..t_m | t_j x t_j⁻¹ φ_j(x)⁻¹ for every base generator x⟩.
    pub fn presentation(&self, name: &str) -> Result<Presentation> {
        let mut relators = Vec::new();
        for (j, endo) in self.endos.iter().enumerate() {
            let t = Word::letter(&self.full, self.base.len() + j, true);
            for g in 0..self.base.len() {
                let x = Word::letter(&self.full, g, true);
                let img = endo.image(g).embed_into(&self.full)?;
                relators.push(t.cat(&x).cat(&t.invert()).cat(&img.invert()));
            }
        }
        Presentation::new(&self.full, &relators, name)
    }
}

/// Substitutes `args` for the generators of `template`.
fn substitute(template: &Word, args: &[Word], target: &Arc<Alphabet>) -> Word {
    let mut out = Word::empty(target);
    for &l in template.letters() {
        let a = &args[l.generator()];
        out = if l.is_positive() { out.cat(a) } else { out.cat(&a.invert()) };
    }
    out
}

/// Presents H*_{Q,φ} = ⟨H, t | t q_i t⁻¹ = φ(q_i)⟩: `phi` acts on an abstract
/// alphabet of the same arity as `q_gens` and is spelled through them.
pub fn compose_amalgam(
    h: &Presentation,
    q_gens: &[Word],
    phi: &Endomorphism,
    stable_name: &str,
    name: &str,
) -> Result<Presentation> {
    if phi.alphabet().len() != q_gens.len() {
        return Err(Error::InvalidParameter(format!(
            "endomorphism arity {} does not match {} subgroup generators",
            phi.alphabet().len(),
            q_gens.len()
        )));
    }
    let images: Vec<Word> = phi
        .images()
        .iter()
        .map(|im| substitute(im, q_gens, h.alphabet()))
        .collect();
    compose_amalgam_images(h, q_gens, &images, stable_name, name)
}

/// Like `compose_amalgam` with the conjugation targets given directly as
/// words over H's generators.
pub fn compose_amalgam_images(
    h: &Presentation,
    q_gens: &[Word],
    images: &[Word],
    stable_name: &str,
    name: &str,
) -> Result<Presentation> {
    if q_gens.len() != images.len() {
        return Err(Error::InvalidParameter(
            "one image per subgroup generator required".into(),
        ));
    }
    for w in q_gens.iter().chain(images) {
        if !same_alphabet(w.alphabet(), h.alphabet()) {
            return Err(Error::AlphabetMismatch);
        }
    }
    let full = h.alphabet().extend(&[stable_name])?;
    let t = Word::letter(&full, h.alphabet().len(), true);
    let mut relators: Vec<Word> = h
        .relators()
        .iter()
        .map(|r| r.as_word().embed_into(&full))
        .collect::<Result<_>>()?;
    for (q, img) in q_gens.iter().zip(images) {
        let q = q.embed_into(&full)?;
        let img = img.embed_into(&full)?;
        relators.push(t.cat(&q).cat(&t.invert()).cat(&img.invert()));
    }
    Presentation::new(&full, &relators, name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn demo() -> AscendingHnnSpec {
        let k = Alphabet::new(&["a", "b"]).unwrap();
        let phi = Endomorphism::parse(&k, "a -> ab, b -> ba").unwrap();
        AscendingHnnSpec::new(phi, "t").unwrap()
    }

    fn w(alphabet: &Arc<Alphabet>, s: &str) -> Word {
        Word::parse(alphabet, s).unwrap()
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

    #[test]
    fn britton_pinches_positive_conjugate() {
        let spec = demo();
        let full = spec.full_alphabet().clone();
        let nf = spec.britton_normal_form(&w(&full, "taT")).unwrap();
        assert_eq!(nf.syllables(), &[Syllable::Base(w(&full, "ab"))]);
        assert_eq!(nf.to_string(), "[ab]");
    }

    #[test]
    fn britton_pinches_image_conjugate() {
        let spec = demo();
        let full = spec.full_alphabet().clone();
        let nf = spec.britton_normal_form(&w(&full, "T abba t")).unwrap();
        assert_eq!(nf.syllables(), &[Syllable::Base(w(&full, "ab"))]);
    }

    #[test]
    fn britton_leaves_nonimage_conjugate_alone() {
        let spec = demo();
        let full = spec.full_alphabet().clone();
        let nf = spec.britton_normal_form(&w(&full, "TaT")).unwrap();
        assert_eq!(nf.syllable_count(), 3);
        let nf = spec.britton_normal_form(&w(&full, "Tat")).unwrap();
        assert_eq!(nf.syllable_count(), 3);
        assert_eq!(nf.to_string(), "[t^-1][a][t]");
    }

    #[test]
    fn britton_round_trips_random_conjugates() {
        let spec = demo();
        let base = spec.base_alphabet().clone();
        let full = spec.full_alphabet().clone();
        let t = Word::letter(&full, spec.stable_gen(), true);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..25 {
            let len = rng.gen_range(1..=8);
            let k = random_word(&mut rng, &base, len);
            if k.is_empty() {
                continue;
            }
            let k_full = k.embed_into(&full).unwrap();
            let img = spec.endo().apply(&k).unwrap().embed_into(&full).unwrap();
            let up = t.cat(&k_full).cat(&t.invert());
            let nf = spec.britton_normal_form(&up).unwrap();
            assert_eq!(nf.flatten(), img);
            let down = t.invert().cat(&img).cat(&t);
            let nf = spec.britton_normal_form(&down).unwrap();
            assert_eq!(nf.flatten(), k_full);
        }
    }

    #[test]
    fn britton_is_idempotent_on_random_words() {
        let spec = demo();
        let full = spec.full_alphabet().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..60 {
            let len = rng.gen_range(0..=14);
            let raw = random_word(&mut rng, &full, len);
            let nf = spec.britton_normal_form(&raw).unwrap();
            let again = spec.britton_normal_form(&nf.flatten()).unwrap();
            assert_eq!(nf, again);
            assert_eq!(spec.is_trivial(&raw).unwrap(), nf.is_trivial());
        }
    }

    #[test]
    fn defining_relators_are_trivial() {
        let spec = demo();
        let full = spec.full_alphabet().clone();
        for s in ["t a T (ab)^-1", "t b T (ba)^-1"] {
            let r = w(&full, &s.replace("(ab)^-1", "BA").replace("(ba)^-1", "AB"));
            assert!(spec.is_trivial(&r).unwrap());
            assert!(spec.britton_normal_form(&r).unwrap().is_trivial());
        }
    }

    #[test]
    fn triple_form_matches_britton_on_products() {
        let spec = demo();
        let full = spec.full_alphabet().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..40 {
            let len = rng.gen_range(0..=10);
            let x = random_word(&mut rng, &full, len);
            let e = spec.element(&x).unwrap();
            let back = spec.element(&e.to_word(&spec)).unwrap();
            assert_eq!(e, back);
            let inv = e.invert(&spec).unwrap();
            let prod = e.mul_word(&spec, &inv.to_word(&spec)).unwrap();
            assert!(prod.is_identity());
            let nf = spec.britton_normal_form(&x).unwrap();
            assert_eq!(spec.element(&nf.flatten()).unwrap(), e);
        }
    }

    #[test]
    fn triple_form_separates_short_elements() {
        let spec = demo();
        let full = spec.full_alphabet().clone();
        let words = ["1", "a", "b", "t", "T", "at", "ta", "Tat", "tat"];
        let elems: Vec<HnnElement> =
            words.iter().map(|s| spec.element(&w(&full, s)).unwrap()).collect();
        for i in 0..elems.len() {
            for j in 0..elems.len() {
                assert_eq!(i == j, elems[i] == elems[j], "{} vs {}", words[i], words[j]);
            }
        }
    }

    #[test]
    fn injectivity_is_enforced() {
        let k = Alphabet::new(&["a", "b"]).unwrap();
        let phi = Endomorphism::parse(&k, "a -> ab, b -> ab").unwrap();
        let err = AscendingHnnSpec::new(phi, "t").err().expect("should fail");
        match err {
            Error::NotInjective { rank: 1, expected: 2 } => {}
            other => panic!("expected injectivity failure, got {other:?}"),
        }
    }

    #[test]
    fn freeprod_normal_form_groups_syllables() {
        let k = Alphabet::new(&["a", "b"]).unwrap();
        let g1 = FreeProdSpec::new(&k, "t", None).unwrap();
        let full = g1.full_alphabet().clone();
        let nf = g1.normal_form(&w(&full, "attA")).unwrap();
        assert_eq!(nf.to_string(), "[a][t^2][A]");
        assert_eq!(nf.syllable_count(), 3);
        assert!(g1.normal_form(&w(&full, "tT")).unwrap().is_trivial());
        let merged = g1.normal_form(&w(&full, "a t t")).unwrap();
        assert_eq!(merged.to_string(), "[a][t^2]");
        assert_eq!(merged.flatten(), w(&full, "att"));
    }

    #[test]
    fn bass_serre_projection_counts_edges() {
        let k = Alphabet::new(&["a", "b"]).unwrap();
        let g1 = FreeProdSpec::new(&k, "t", None).unwrap();
        let full = g1.full_alphabet().clone();

        let pure = g1.normal_form(&w(&full, "abAB")).unwrap().bass_serre_projection();
        assert_eq!(pure.vertices.len(), 1);
        assert_eq!(pure.edge_count(), 0);

        let power = g1.normal_form(&w(&full, "t^5")).unwrap().bass_serre_projection();
        assert_eq!(power.edge_count(), 2);

        let path = g1.normal_form(&w(&full, "attb")).unwrap().bass_serre_projection();
        assert_eq!(path.edge_count(), 2);
        assert_eq!(path.vertices[0].kind, CosetKind::Base);
        assert_eq!(path.vertices[1].kind, CosetKind::Stable);
        assert_eq!(path.vertices[1].rep, w(&full, "a"));
        assert_eq!(path.vertices[2].rep, w(&full, "att"));

        let spec = demo();
        let zig = spec.britton_normal_form(&w(&full, "Tat")).unwrap().bass_serre_projection();
        assert_eq!(zig.edge_count(), 4);
        for pair in zig.vertices.windows(2) {
            assert_ne!(pair[0].kind, pair[1].kind);
        }
    }

    fn demo_g1() -> FreeProdSpec {
        let k = Alphabet::new(&["a", "b"]).unwrap();
        let phi = Endomorphism::parse(&k, "a -> ab, b -> ba").unwrap();
        FreeProdSpec::new(&k, "t", Some(phi)).unwrap()
    }

    #[test]
    fn ray_classification_table() {
        let g1 = demo_g1();
        let full = g1.full_alphabet().clone();
        let cases: Vec<(RayTail, RayClass)> = vec![
            (RayTail::StablePlus, RayClass::TFiniteStable { positive: true }),
            (RayTail::StableMinus, RayClass::TFiniteStable { positive: false }),
            (RayTail::BaseEndo { seed: w(&full, "a") }, RayClass::TFiniteBase),
            (RayTail::Periodic { pattern: w(&full, "at") }, RayClass::TInfinite),
            (RayTail::Periodic { pattern: w(&full, "ab") }, RayClass::TFiniteBase),
            (RayTail::Periodic { pattern: w(&full, "t") }, RayClass::TFiniteStable { positive: true }),
            (RayTail::Periodic { pattern: w(&full, "T") }, RayClass::TFiniteStable { positive: false }),
            (RayTail::Periodic { pattern: w(&full, "atA") }, RayClass::TFiniteStable { positive: true }),
            (RayTail::Periodic { pattern: w(&full, "taT") }, RayClass::TFiniteBase),
        ];
        for prefix in ["1", "a", "ta"] {
            for (tail, expected) in &cases {
                let rd = RayDescriptor { prefix: w(&full, prefix), tail: tail.clone() };
                assert_eq!(g1.classify_ray(&rd).unwrap(), *expected, "{prefix} {tail:?}");
                let in_omega = matches!(expected, RayClass::TFiniteStable { .. });
                assert_eq!(g1.omega_membership(&rd).unwrap(), in_omega);
            }
        }
    }

    #[test]
    fn ray_classification_under_britton() {
        let spec = demo();
        let full = spec.full_alphabet().clone();
        let rd = RayDescriptor {
            prefix: Word::empty(&full),
            tail: RayTail::Periodic { pattern: w(&full, "taT") },
        };
        // t a t⁻¹ collapses to φ(a), so the tail is a base ray here.
        assert_eq!(spec.classify_ray(&rd).unwrap(), RayClass::TFiniteBase);
        // (t⁻¹ a t)^k freely cancels to t⁻¹ a^k t: still a base ray.
        let rd = RayDescriptor {
            prefix: Word::empty(&full),
            tail: RayTail::Periodic { pattern: w(&full, "Tat") },
        };
        assert_eq!(spec.classify_ray(&rd).unwrap(), RayClass::TFiniteBase);
        // (t⁻¹ a)^k never pinches and alternates forever.
        let rd = RayDescriptor {
            prefix: Word::empty(&full),
            tail: RayTail::Periodic { pattern: w(&full, "Ta") },
        };
        assert_eq!(spec.classify_ray(&rd).unwrap(), RayClass::TInfinite);
    }

    #[test]
    fn degenerate_ray_descriptors_are_rejected() {
        let g1 = demo_g1();
        let full = g1.full_alphabet().clone();
        let bad_seed = RayDescriptor {
            prefix: Word::empty(&full),
            tail: RayTail::BaseEndo { seed: w(&full, "B") },
        };
        assert!(matches!(g1.classify_ray(&bad_seed), Err(Error::Rejected(_))));
        let no_endo = FreeProdSpec::new(g1.base_alphabet(), "t", None).unwrap();
        let rd = RayDescriptor {
            prefix: Word::empty(&full),
            tail: RayTail::BaseEndo { seed: w(&full, "a") },
        };
        assert!(matches!(no_endo.classify_ray(&rd), Err(Error::Rejected(_))));
        let empty = RayDescriptor {
            prefix: Word::empty(&full),
            tail: RayTail::Periodic { pattern: Word::empty(&full) },
        };
        assert!(matches!(g1.classify_ray(&empty), Err(Error::Rejected(_))));
    }

    #[test]
    fn landing_matrix() {
        use Landing::*;
        let combos = [
            (false, false, Unknown, Unknown),
            (true, false, LandsByHypothesis, Unknown),
            (false, true, Unknown, LandsByHypothesis),
            (true, true, LandsByHypothesis, LandsByHypothesis),
        ];
        for (b, s, base_expect, stable_expect) in combos {
            let flags = ComponentFlags { base_pair_has_ray_ct: b, stable_pair_has_ray_ct: s };
            assert_eq!(landing_verdict(RayClass::TInfinite, flags), Lands);
            assert_eq!(landing_verdict(RayClass::TFiniteBase, flags), base_expect);
            assert_eq!(
                landing_verdict(RayClass::TFiniteStable { positive: true }, flags),
                stable_expect
            );
        }
    }

    #[test]
    fn ray_points_walk_outward() {
        let g1 = demo_g1();
        let full = g1.full_alphabet().clone();
        let rd = RayDescriptor { prefix: w(&full, "a"), tail: RayTail::StablePlus };
        let pts = g1.ray_points(&rd, 3).unwrap();
        assert_eq!(pts, vec![w(&full, "at"), w(&full, "att"), w(&full, "attt")]);

        let rd = RayDescriptor {
            prefix: Word::empty(&full),
            tail: RayTail::BaseEndo { seed: w(&full, "a") },
        };
        let pts = g1.ray_points(&rd, 3).unwrap();
        assert_eq!(pts, vec![w(&full, "a"), w(&full, "ab"), w(&full, "abba")]);
        for pair in pts.windows(2) {
            assert_eq!(pair[1].letters()[..pair[0].len()], *pair[0].letters());
        }

        let rd = RayDescriptor {
            prefix: w(&full, "t"),
            tail: RayTail::Periodic { pattern: w(&full, "ab") },
        };
        let pts = g1.ray_points(&rd, 2).unwrap();
        assert_eq!(pts, vec![w(&full, "tab"), w(&full, "tabab")]);
    }

    #[test]
    fn multi_spec_presents_conjugation_relators() {
        let k = Alphabet::new(&["a", "b"]).unwrap();
        let phi = Endomorphism::parse(&k, "a -> ab, b -> ba").unwrap();
        let multi = MultiHnnSpec::new(vec![
            ("t1".to_string(), phi.clone()),
            ("t2".to_string(), phi.clone()),
        ])
        .unwrap();
        let p = multi.presentation("demo").unwrap();
        assert_eq!(p.relators().len(), 4);
        assert_eq!(p.alphabet().len(), 4);
        let full = p.alphabet().clone();
        assert_eq!(p.relators()[0].as_word(), &w(&full, "t1 a t1^-1 B A"));
        assert!(matches!(
            MultiHnnSpec::new(vec![("t1".to_string(), phi)]),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn compose_amalgam_spells_conjugation_through_subgroup_generators() {
        let ab = Alphabet::new(&["a", "b"]).unwrap();
        let h = Presentation::new(&ab, &[], "free2").unwrap();
        let q = Alphabet::new(&["q1", "q2"]).unwrap();
        let phi = Endomorphism::parse(&q, "q1 -> q1 q2, q2 -> q2").unwrap();
        let q_gens = vec![w(&ab, "a"), w(&ab, "bb")];
        let g = compose_amalgam(&h, &q_gens, &phi, "t", "composed").unwrap();
        let full = g.alphabet().clone();
        assert_eq!(g.relators().len(), 2);
        assert_eq!(g.relators()[0].as_word(), &w(&full, "t a T BBA"));
        assert_eq!(g.relators()[1].as_word(), &w(&full, "t bb T BB"));

        let direct =
            compose_amalgam_images(&h, &q_gens, &[w(&ab, "abb"), w(&ab, "bb")], "t", "direct")
                .unwrap();
        assert_eq!(direct.relators()[0].as_word(), g.relators()[0].as_word());

        assert!(compose_amalgam_images(&h, &q_gens, &[w(&ab, "a")], "t", "bad").is_err());
        assert!(compose_amalgam_images(&h, &q_gens, &[w(&ab, "a"), w(&ab, "b")], "a", "bad").is_err());
    }

    #[test]
    fn hnn_presentation_round_trips_through_dehn_machinery() {
        let spec = demo();
        let p = spec.presentation("asc").unwrap();
        assert_eq!(p.relators().len(), 2);
        let full = p.alphabet().clone();
        for r in p.relators() {
            assert!(spec.is_trivial(&r.as_word().embed_into(&full).unwrap()).unwrap());
        }
    }
}
