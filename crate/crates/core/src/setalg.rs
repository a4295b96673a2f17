//! Countable sets over the code universe.
//!
//! Every element is a natural number `code = pair(atom, rank)` under the Cantor
//! pairing, with `atom >= 1`. A set is stored in canonical form: a set of
//! atoms that are included wholesale (finite, or cofinite when the atom family
//! is unbounded), a finite set of removed elements inside included atoms, and a
//! finite set of added elements outside them. Canonical forms are unique, so
//! structural equality is extensional equality.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type AtomId = u64;

/// Default exclusive code bound for brute-force spot checks.
pub const DEFAULT_SCAN_BOUND: u64 = 10_000;

/// Code bound for brute-force spot checks, overridable with `GENLAB_SCAN_BOUND`.
pub fn scan_bound() -> u64 {
    std::env::var("GENLAB_SCAN_BOUND").ok().and_then(|v| v.trim().parse().ok()).unwrap_or(DEFAULT_SCAN_BOUND)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SetError {
    #[error("sets belong to different universes")]
    MismatchedUniverse,
    #[error("atom {0} is not declared in the universe")]
    UnknownAtom(AtomId),
    #[error("element {0} lies outside the universe")]
    OutsideUniverse(u64),
    #[error("duplicate atom id {0}")]
    DuplicateAtom(AtomId),
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Element(u64);

impl Element {
    pub const fn from_code(code: u64) -> Self {
        Element(code)
    }

    /// Element with the given atom and rank.
    pub fn new(atom: AtomId, rank: u64) -> Self {
        let s = atom + rank;
        Element(s * (s + 1) / 2 + rank)
    }

    pub fn code(self) -> u64 {
        self.0
    }

    /// Inverse pairing: `(atom, rank)`. Atom 0 means the code is in no atom.
    pub fn decode(self) -> (AtomId, u64) {
        let c = self.0 as u128;
        let s = ((8 * c + 1).isqrt() - 1) / 2;
        let rank = c - s * (s + 1) / 2;
        ((s - rank) as u64, rank as u64)
    }

    pub fn atom(self) -> AtomId {
        self.decode().0
    }

    pub fn rank(self) -> u64 {
        self.decode().1
    }
}

impl fmt::Debug for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (a, j) = self.decode();
        write!(f, "{}<{}.{}>", self.0, a, j)
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub id: AtomId,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AtomFamily {
    Finite(BTreeSet<AtomId>),
    /// Every atom id `>= 1`.
    Unbounded,
}

/// The ambient universe: the union of a declared atom family.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Universe {
    family: AtomFamily,
    labels: BTreeMap<AtomId, String>,
    /// Labels for atoms missing from `labels`: `prefix` followed by `id - offset`.
    tail_label: Option<(String, AtomId)>,
}

impl Universe {
    pub fn finite(atoms: impl IntoIterator<Item = Atom>) -> Result<Arc<Self>, SetError> {
        let mut labels = BTreeMap::new();
        for atom in atoms {
            if atom.id == 0 {
                return Err(SetError::UnknownAtom(0));
            }
            if labels.insert(atom.id, atom.label).is_some() {
                return Err(SetError::DuplicateAtom(atom.id));
            }
        }
        Ok(Arc::new(Universe {
            family: AtomFamily::Finite(labels.keys().copied().collect()),
            labels,
            tail_label: None,
        }))
    }

    pub fn unbounded(labels: BTreeMap<AtomId, String>, tail_label: Option<(String, AtomId)>) -> Arc<Self> {
        Arc::new(Universe { family: AtomFamily::Unbounded, labels, tail_label })
    }

    pub fn family(&self) -> &AtomFamily {
        &self.family
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self.family, AtomFamily::Finite(_))
    }

    pub fn contains_atom(&self, atom: AtomId) -> bool {
        match &self.family {
            AtomFamily::Finite(ids) => ids.contains(&atom),
            AtomFamily::Unbounded => atom >= 1,
        }
    }

    pub fn contains(&self, x: Element) -> bool {
        self.contains_atom(x.atom())
    }

    /// Declared atoms with labels. Empty for unbounded families beyond the labelled ones.
    pub fn declared_atoms(&self) -> Vec<Atom> {
        self.labels.iter().map(|(&id, label)| Atom { id, label: label.clone() }).collect()
    }

    pub fn label(&self, atom: AtomId) -> String {
        if let Some(l) = self.labels.get(&atom) {
            return l.clone();
        }
        match &self.tail_label {
            Some((prefix, offset)) if atom > *offset => format!("{prefix}{}", atom - offset),
            _ => format!("#{atom}"),
        }
    }

    /// Human-readable name such as `E.3`.
    pub fn describe(&self, x: Element) -> String {
        let (a, j) = x.decode();
        if self.contains_atom(a) {
            format!("{}.{}", self.label(a), j)
        } else {
            format!("?{}", x.code())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum AtomSet {
    Finite(BTreeSet<AtomId>),
    CofiniteExcluding(BTreeSet<AtomId>),
}

impl AtomSet {
    pub fn empty() -> Self {
        AtomSet::Finite(BTreeSet::new())
    }

    pub fn contains(&self, atom: AtomId) -> bool {
        match self {
            AtomSet::Finite(s) => s.contains(&atom),
            AtomSet::CofiniteExcluding(e) => atom >= 1 && !e.contains(&atom),
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, AtomSet::Finite(s) if s.is_empty())
    }

    pub fn intersect(&self, other: &AtomSet) -> AtomSet {
        use AtomSet::*;
        match (self, other) {
            (Finite(a), Finite(b)) => Finite(a.intersection(b).copied().collect()),
            (Finite(f), CofiniteExcluding(e)) | (CofiniteExcluding(e), Finite(f)) => {
                Finite(f.difference(e).copied().collect())
            }
            (CofiniteExcluding(a), CofiniteExcluding(b)) => CofiniteExcluding(a.union(b).copied().collect()),
        }
    }

    pub fn union(&self, other: &AtomSet) -> AtomSet {
        use AtomSet::*;
        match (self, other) {
            (Finite(a), Finite(b)) => Finite(a.union(b).copied().collect()),
            (Finite(f), CofiniteExcluding(e)) | (CofiniteExcluding(e), Finite(f)) => {
                CofiniteExcluding(e.difference(f).copied().collect())
            }
            (CofiniteExcluding(a), CofiniteExcluding(b)) => CofiniteExcluding(a.intersection(b).copied().collect()),
        }
    }

    pub fn difference(&self, other: &AtomSet) -> AtomSet {
        use AtomSet::*;
        match (self, other) {
            (Finite(a), Finite(b)) => Finite(a.difference(b).copied().collect()),
            (Finite(f), CofiniteExcluding(e)) => Finite(f.intersection(e).copied().collect()),
            (CofiniteExcluding(e), Finite(f)) => CofiniteExcluding(e.union(f).copied().collect()),
            (CofiniteExcluding(a), CofiniteExcluding(b)) => Finite(b.difference(a).copied().collect()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cardinality {
    Finite(usize),
    Infinite,
}

impl Cardinality {
    pub fn is_finite(self) -> bool {
        matches!(self, Cardinality::Finite(_))
    }
}

impl fmt::Display for Cardinality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cardinality::Finite(k) => write!(f, "{k}"),
            Cardinality::Infinite => write!(f, "infinite"),
        }
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct CountableSet {
    universe: Arc<Universe>,
    atoms: AtomSet,
    minus: BTreeSet<Element>,
    plus: BTreeSet<Element>,
}

impl CountableSet {
    /// Builds a set from arbitrary parts and brings it to canonical form.
    ///
    /// Membership of the result: `x ∈ plus`, or `atom(x)` is included and `x ∉ minus`.
    pub fn new(
        universe: Arc<Universe>,
        atoms: AtomSet,
        minus: impl IntoIterator<Item = Element>,
        plus: impl IntoIterator<Item = Element>,
    ) -> Result<Self, SetError> {
        let atoms = normalize_atoms(&universe, atoms)?;
        let plus: BTreeSet<Element> = plus.into_iter().collect();
        for &x in &plus {
            if !universe.contains(x) {
                return Err(SetError::OutsideUniverse(x.code()));
            }
        }
        let mut minus_set = BTreeSet::new();
        for x in minus {
            if !universe.contains(x) {
                return Err(SetError::OutsideUniverse(x.code()));
            }
            if atoms.contains(x.atom()) && !plus.contains(&x) {
                minus_set.insert(x);
            }
        }
        let plus = plus.into_iter().filter(|x| !atoms.contains(x.atom())).collect();
        Ok(CountableSet { universe, atoms, minus: minus_set, plus })
    }

    pub fn empty(universe: &Arc<Universe>) -> Self {
        CountableSet {
            universe: universe.clone(),
            atoms: AtomSet::empty(),
            minus: BTreeSet::new(),
            plus: BTreeSet::new(),
        }
    }

    /// The whole universe.
    pub fn full(universe: &Arc<Universe>) -> Self {
        let atoms = match universe.family() {
            AtomFamily::Finite(ids) => AtomSet::Finite(ids.clone()),
            AtomFamily::Unbounded => AtomSet::CofiniteExcluding(BTreeSet::new()),
        };
        CountableSet { universe: universe.clone(), atoms, minus: BTreeSet::new(), plus: BTreeSet::new() }
    }

    pub fn from_atoms(universe: &Arc<Universe>, atoms: impl IntoIterator<Item = AtomId>) -> Result<Self, SetError> {
        Self::new(universe.clone(), AtomSet::Finite(atoms.into_iter().collect()), [], [])
    }

    pub fn from_elements(
        universe: &Arc<Universe>,
        elements: impl IntoIterator<Item = Element>,
    ) -> Result<Self, SetError> {
        Self::new(universe.clone(), AtomSet::empty(), [], elements)
    }

    pub fn universe(&self) -> &Arc<Universe> {
        &self.universe
    }

    pub fn atoms(&self) -> &AtomSet {
        &self.atoms
    }

    pub fn minus(&self) -> &BTreeSet<Element> {
        &self.minus
    }

    pub fn plus(&self) -> &BTreeSet<Element> {
        &self.plus
    }

    pub fn contains(&self, x: Element) -> bool {
        if self.plus.contains(&x) {
            return true;
        }
        let atom = x.atom();
        atom >= 1 && self.atoms.contains(atom) && !self.minus.contains(&x)
    }

    pub fn cardinality(&self) -> Cardinality {
        if self.atoms.is_empty() {
            Cardinality::Finite(self.plus.len())
        } else {
            Cardinality::Infinite
        }
    }

    pub fn is_finite(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty() && self.plus.is_empty()
    }

    fn same_universe(&self, other: &CountableSet) -> Result<(), SetError> {
        if Arc::ptr_eq(&self.universe, &other.universe) || self.universe == other.universe {
            Ok(())
        } else {
            Err(SetError::MismatchedUniverse)
        }
    }

    pub fn intersect(&self, other: &CountableSet) -> Result<CountableSet, SetError> {
        Ok(Self::intersect_all([self, other])?.expect("two operands"))
    }

    /// Intersection of all given sets, or `None` when there are none.
    pub fn intersect_all<'a>(
        sets: impl IntoIterator<Item = &'a CountableSet>,
    ) -> Result<Option<CountableSet>, SetError> {
        let sets: Vec<&CountableSet> = sets.into_iter().collect();
        let Some(first) = sets.first() else {
            return Ok(None);
        };
        for s in &sets[1..] {
            first.same_universe(s)?;
        }
        if sets.len() == 1 {
            return Ok(Some((*first).clone()));
        }
        let finite_parts: Vec<&BTreeSet<AtomId>> = sets
            .iter()
            .filter_map(|s| match &s.atoms {
                AtomSet::Finite(f) => Some(f),
                AtomSet::CofiniteExcluding(_) => None,
            })
            .collect();
        let atoms = match finite_parts.iter().min_by_key(|f| f.len()) {
            Some(smallest) => AtomSet::Finite(
                smallest.iter().copied().filter(|&a| sets.iter().all(|s| s.atoms.contains(a))).collect(),
            ),
            None => {
                let mut excluded = BTreeSet::new();
                for s in &sets {
                    if let AtomSet::CofiniteExcluding(e) = &s.atoms {
                        excluded.extend(e.iter().copied());
                    }
                }
                AtomSet::CofiniteExcluding(excluded)
            }
        };
        let mut minus = BTreeSet::new();
        let mut plus = BTreeSet::new();
        for s in &sets {
            minus.extend(s.minus.iter().copied().filter(|x| atoms.contains(x.atom())));
            plus.extend(
                s.plus.iter().copied().filter(|&x| !atoms.contains(x.atom()) && sets.iter().all(|t| t.contains(x))),
            );
        }
        let atoms = normalize_atoms(&first.universe, atoms)?;
        Ok(Some(CountableSet { universe: first.universe.clone(), atoms, minus, plus }))
    }

    pub fn union(&self, other: &CountableSet) -> Result<CountableSet, SetError> {
        self.same_universe(other)?;
        let atoms = normalize_atoms(&self.universe, self.atoms.union(&other.atoms))?;
        let minus = self
            .minus
            .iter()
            .chain(other.minus.iter())
            .copied()
            .filter(|&x| atoms.contains(x.atom()) && !self.contains(x) && !other.contains(x))
            .collect();
        let plus = self.plus.iter().chain(other.plus.iter()).copied().filter(|x| !atoms.contains(x.atom())).collect();
        Ok(CountableSet { universe: self.universe.clone(), atoms, minus, plus })
    }

    pub fn difference(&self, other: &CountableSet) -> Result<CountableSet, SetError> {
        self.same_universe(other)?;
        let atoms = normalize_atoms(&self.universe, self.atoms.difference(&other.atoms))?;
        let minus = self.minus.iter().chain(other.plus.iter()).copied().filter(|x| atoms.contains(x.atom())).collect();
        let plus = self
            .plus
            .iter()
            .chain(other.minus.iter())
            .copied()
            .filter(|&x| !atoms.contains(x.atom()) && self.contains(x) && !other.contains(x))
            .collect();
        Ok(CountableSet { universe: self.universe.clone(), atoms, minus, plus })
    }

    /// Complement inside the universe.
    pub fn complement(&self) -> CountableSet {
        CountableSet::full(&self.universe).difference(self).expect("same universe")
    }

    /// Adds finitely many elements.
    pub fn with_elements(&self, extra: impl IntoIterator<Item = Element>) -> Result<CountableSet, SetError> {
        self.union(&CountableSet::from_elements(&self.universe, extra)?)
    }

    /// Removes finitely many elements.
    pub fn without_elements(&self, removed: impl IntoIterator<Item = Element>) -> Result<CountableSet, SetError> {
        self.difference(&CountableSet::from_elements(&self.universe, removed)?)
    }

    /// Elements in increasing code order.
    pub fn iter(&self) -> Elements<'_> {
        let inner = match &self.atoms {
            AtomSet::CofiniteExcluding(excluded) => Inner::Diagonal {
                s: 1,
                a: 1,
                runs: runs(excluded),
                pending: None,
                plus: self.plus.iter().copied().collect::<Vec<_>>().into_iter().peekable(),
            },
            AtomSet::Finite(ids) => Inner::Merge {
                heap: ids.iter().map(|&a| Reverse((Element::new(a, 0).code(), a, 0))).collect(),
                plus: self.plus.iter().copied().collect::<Vec<_>>().into_iter().peekable(),
            },
        };
        Elements { set: self, inner }
    }

    /// The first `k` elements in canonical order (fewer if the set is smaller).
    pub fn enumerate(&self, k: usize) -> Vec<Element> {
        self.iter().take(k).collect()
    }

    /// Smallest element not in `seen`, if any.
    pub fn first_outside(&self, seen: &BTreeSet<Element>) -> Option<Element> {
        self.iter().find(|x| !seen.contains(x))
    }

    /// All members below `bound`, found by scanning codes.
    pub fn members_below(&self, bound: u64) -> Vec<Element> {
        (0..bound).map(Element::from_code).filter(|&x| self.contains(x)).collect()
    }
}

fn normalize_atoms(universe: &Universe, atoms: AtomSet) -> Result<AtomSet, SetError> {
    match (&universe.family, atoms) {
        (AtomFamily::Finite(ids), AtomSet::Finite(f)) => {
            if let Some(&a) = f.iter().find(|a| !ids.contains(a)) {
                return Err(SetError::UnknownAtom(a));
            }
            Ok(AtomSet::Finite(f))
        }
        (AtomFamily::Finite(ids), AtomSet::CofiniteExcluding(e)) => {
            if let Some(&a) = e.iter().find(|a| !ids.contains(a)) {
                return Err(SetError::UnknownAtom(a));
            }
            Ok(AtomSet::Finite(ids.difference(&e).copied().collect()))
        }
        (AtomFamily::Unbounded, atoms) => {
            let ids = match &atoms {
                AtomSet::Finite(s) | AtomSet::CofiniteExcluding(s) => s,
            };
            if ids.contains(&0) {
                return Err(SetError::UnknownAtom(0));
            }
            Ok(atoms)
        }
    }
}

impl fmt::Debug for CountableSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for CountableSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let u = &self.universe;
        let labels = |ids: &BTreeSet<AtomId>| ids.iter().map(|&a| u.label(a)).collect::<Vec<_>>().join(",");
        match &self.atoms {
            AtomSet::Finite(ids) => write!(f, "atoms{{{}}}", labels(ids))?,
            AtomSet::CofiniteExcluding(ids) => write!(f, "atoms{{all but {}}}", labels(ids))?,
        }
        let elems = |xs: &BTreeSet<Element>| xs.iter().map(|&x| u.describe(x)).collect::<Vec<_>>().join(",");
        if !self.minus.is_empty() {
            write!(f, " - {{{}}}", elems(&self.minus))?;
        }
        if !self.plus.is_empty() {
            write!(f, " + {{{}}}", elems(&self.plus))?;
        }
        Ok(())
    }
}

pub struct Elements<'a> {
    set: &'a CountableSet,
    inner: Inner,
}

enum Inner {
    /// Walks codes diagonal by diagonal (`atom + rank = s`), skipping runs of excluded atoms.
    Diagonal {
        s: u64,
        /// Next atom to visit on diagonal `s`, counting down; 0 ends the diagonal.
        a: u64,
        runs: Vec<(AtomId, AtomId)>,
        pending: Option<Element>,
        plus: std::iter::Peekable<std::vec::IntoIter<Element>>,
    },
    Merge {
        heap: BinaryHeap<Reverse<(u64, AtomId, u64)>>,
        plus: std::iter::Peekable<std::vec::IntoIter<Element>>,
    },
}

impl Iterator for Elements<'_> {
    type Item = Element;

    fn next(&mut self) -> Option<Element> {
        match &mut self.inner {
            Inner::Diagonal { s, a, runs, pending, plus } => {
                if pending.is_none() {
                    *pending = Some(loop {
                        if *a == 0 {
                            *s += 1;
                            *a = *s;
                            continue;
                        }
                        let i = runs.partition_point(|&(lo, _)| lo <= *a);
                        if i > 0 && runs[i - 1].1 >= *a {
                            *a = runs[i - 1].0 - 1;
                            continue;
                        }
                        let x = Element::new(*a, *s - *a);
                        *a -= 1;
                        if !self.set.minus.contains(&x) {
                            break x;
                        }
                    });
                }
                let next = pending.expect("filled above");
                match plus.peek() {
                    Some(&p) if p < next => plus.next(),
                    _ => pending.take(),
                }
            }
            Inner::Merge { heap, plus } => {
                let from_atoms = loop {
                    match heap.peek() {
                        Some(&Reverse((code, _, _))) if self.set.minus.contains(&Element::from_code(code)) => {
                            advance(heap);
                        }
                        Some(&Reverse((code, _, _))) => break Some(code),
                        None => break None,
                    }
                };
                let from_plus = plus.peek().map(|x| x.code());
                match (from_atoms, from_plus) {
                    (None, None) => None,
                    (Some(a), Some(p)) if p < a => plus.next(),
                    (Some(a), _) => {
                        advance(heap);
                        Some(Element::from_code(a))
                    }
                    (None, Some(_)) => plus.next(),
                }
            }
        }
    }
}

/// Maximal runs of consecutive ids.
fn runs(ids: &BTreeSet<AtomId>) -> Vec<(AtomId, AtomId)> {
    let mut out: Vec<(AtomId, AtomId)> = Vec::new();
    for &id in ids {
        match out.last_mut() {
            Some((_, hi)) if *hi + 1 == id => *hi = id,
            _ => out.push((id, id)),
        }
    }
    out
}

fn advance(heap: &mut BinaryHeap<Reverse<(u64, AtomId, u64)>>) {
    if let Some(Reverse((_, atom, rank))) = heap.pop() {
        heap.push(Reverse((Element::new(atom, rank + 1).code(), atom, rank + 1)));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abcd() -> Arc<Universe> {
        Universe::finite(
            ["E", "O", "A", "B"].iter().enumerate().map(|(i, l)| Atom { id: i as u64 + 1, label: l.to_string() }),
        )
        .unwrap()
    }

    #[test]
    fn pairing_matches_table() {
        let atom1: Vec<u64> = (0..5).map(|j| Element::new(1, j).code()).collect();
        assert_eq!(atom1, vec![1, 4, 8, 13, 19]);
        let atom2: Vec<u64> = (0..5).map(|j| Element::new(2, j).code()).collect();
        assert_eq!(atom2, vec![3, 7, 12, 18, 25]);
        for c in 0..5000u64 {
            let (a, j) = Element::from_code(c).decode();
            assert_eq!(Element::new(a, j).code(), c);
        }
        assert_eq!(Element::from_code(0).atom(), 0);
        assert_eq!(Element::from_code(2).atom(), 0);
    }

    #[test]
    fn parity_complement_is_empty() {
        let u = Universe::finite([Atom { id: 1, label: "E".into() }, Atom { id: 2, label: "O".into() }]).unwrap();
        let e = CountableSet::from_atoms(&u, [1]).unwrap();
        let o = CountableSet::from_atoms(&u, [2]).unwrap();
        assert!(e.intersect(&o).unwrap().is_empty());
        assert_eq!(e.union(&o).unwrap(), CountableSet::full(&u));
        assert_eq!(e.complement(), o);
    }

    #[test]
    fn finite_remainder_after_removal() {
        let u = abcd();
        let e = CountableSet::from_atoms(&u, [1]).unwrap();
        let e_minus = e.without_elements([Element::new(1, 0)]).unwrap();
        assert_eq!(e.difference(&e_minus).unwrap().enumerate(10), vec![Element::new(1, 0)]);
        assert_eq!(e.difference(&e_minus).unwrap().cardinality(), Cardinality::Finite(1));
    }

    #[test]
    fn mismatched_universe() {
        let a = CountableSet::full(&abcd());
        let b = CountableSet::full(&Universe::finite([Atom { id: 1, label: "E".into() }]).unwrap());
        assert_eq!(a.intersect(&b), Err(SetError::MismatchedUniverse));
        assert_eq!(a.union(&b), Err(SetError::MismatchedUniverse));
    }

    #[test]
    fn cofinite_over_finite_family_normalizes() {
        let u = abcd();
        let s = CountableSet::new(u.clone(), AtomSet::CofiniteExcluding([2].into()), [], []).unwrap();
        assert_eq!(s.atoms(), &AtomSet::Finite([1, 3, 4].into()));
    }

    #[test]
    fn unbounded_enumeration_in_code_order() {
        let u = Universe::unbounded(BTreeMap::new(), None);
        let s = CountableSet::new(u.clone(), AtomSet::CofiniteExcluding([2].into()), [Element::new(1, 0)], []).unwrap();
        let got = s.enumerate(30);
        let want: Vec<Element> = (0..200)
            .map(Element::from_code)
            .filter(|x| x.atom() >= 1 && x.atom() != 2 && *x != Element::new(1, 0))
            .take(30)
            .collect();
        assert_eq!(got, want);
        let excluded: BTreeSet<AtomId> = [1, 2, 3, 4, 7, 8, 20].into();
        let s = CountableSet::new(
            u,
            AtomSet::CofiniteExcluding(excluded),
            [Element::new(5, 0), Element::new(6, 2)],
            [Element::new(2, 1), Element::new(8, 0), Element::new(1, 9)],
        )
        .unwrap();
        let want: Vec<Element> = (0..3000).map(Element::from_code).filter(|&x| s.contains(x)).take(200).collect();
        assert_eq!(s.enumerate(200), want);
        assert_eq!(s.cardinality(), Cardinality::Infinite);
    }

    #[test]
    fn merge_enumeration_with_plus_and_minus() {
        let u = abcd();
        let s = CountableSet::new(
            u.clone(),
            AtomSet::Finite([1, 3].into()),
            [Element::new(3, 1), Element::new(1, 2)],
            [Element::new(2, 0), Element::new(4, 5)],
        )
        .unwrap();
        let want: Vec<Element> = (0..400).map(Element::from_code).filter(|&x| s.contains(x)).take(40).collect();
        assert_eq!(s.enumerate(40), want);
        let fin = CountableSet::from_elements(&u, [Element::new(2, 3), Element::new(1, 0)]).unwrap();
        assert_eq!(fin.enumerate(10), vec![Element::new(1, 0), Element::new(2, 3)]);
    }

    #[test]
    fn outside_universe_rejected() {
        let u = abcd();
        assert_eq!(CountableSet::from_elements(&u, [Element::from_code(0)]), Err(SetError::OutsideUniverse(0)));
        assert_eq!(CountableSet::from_atoms(&u, [9]), Err(SetError::UnknownAtom(9)));
    }
}
