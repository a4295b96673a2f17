//! Hypothesis classes: finite classes, indexed infinite families, built-ins and
//! the JSON class-spec format.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::closure::DimValue;
use crate::setalg::{Atom, AtomId, AtomSet, CountableSet, Element, SetError, Universe};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClassError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("hypothesis {0} has a finite support")]
    UusViolation(String),
    #[error("duplicate hypothesis id {0}")]
    DuplicateId(String),
    #[error("unknown built-in class {0}")]
    UnknownBuiltin(String),
    #[error("unknown hypothesis {0}")]
    UnknownHypothesis(String),
    #[error("the class is empty")]
    EmptyClass,
    #[error("class spec needs a finite atom table")]
    NotSerializable,
    #[error(transparent)]
    Set(#[from] SetError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hypothesis {
    pub id: String,
    pub support: CountableSet,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteClass {
    name: String,
    universe: Arc<Universe>,
    hypotheses: Vec<Hypothesis>,
    groups: BTreeMap<String, Vec<String>>,
}

impl FiniteClass {
    /// Checks that every support is infinite, ids are distinct and all
    /// supports share `universe`.
    pub fn new(
        name: impl Into<String>,
        universe: Arc<Universe>,
        hypotheses: Vec<Hypothesis>,
    ) -> Result<Self, ClassError> {
        let mut ids = BTreeSet::new();
        for h in &hypotheses {
            if !ids.insert(h.id.clone()) {
                return Err(ClassError::DuplicateId(h.id.clone()));
            }
            if h.support.universe() != &universe {
                return Err(SetError::MismatchedUniverse.into());
            }
            if h.support.is_finite() {
                return Err(ClassError::UusViolation(h.id.clone()));
            }
        }
        Ok(FiniteClass { name: name.into(), universe, hypotheses, groups: BTreeMap::new() })
    }

    pub fn with_groups(mut self, groups: BTreeMap<String, Vec<String>>) -> Result<Self, ClassError> {
        for members in groups.values() {
            if members.is_empty() {
                return Err(ClassError::EmptyClass);
            }
            for id in members {
                if self.index_of(id).is_none() {
                    return Err(ClassError::UnknownHypothesis(id.clone()));
                }
            }
        }
        self.groups = groups;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn universe(&self) -> &Arc<Universe> {
        &self.universe
    }

    pub fn hypotheses(&self) -> &[Hypothesis] {
        &self.hypotheses
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn groups(&self) -> &BTreeMap<String, Vec<String>> {
        &self.groups
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.hypotheses.iter().position(|h| h.id == id)
    }

    pub fn get(&self, id: &str) -> Option<&Hypothesis> {
        self.hypotheses.iter().find(|h| h.id == id)
    }

    /// Sub-class keeping the listed hypotheses in the given order.
    pub fn subclass(&self, ids: &[&str]) -> Result<FiniteClass, ClassError> {
        let hyps = ids
            .iter()
            .map(|id| self.get(id).cloned().ok_or_else(|| ClassError::UnknownHypothesis(id.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        let name = format!("{}[{}]", self.name, ids.join(","));
        FiniteClass::new(name, self.universe.clone(), hyps)
    }

    /// The first `min(n, q)` hypotheses.
    pub fn truncate(&self, n: usize) -> FiniteClass {
        let k = n.min(self.len());
        FiniteClass {
            name: format!("{}[..{k}]", self.name),
            universe: self.universe.clone(),
            hypotheses: self.hypotheses[..k].to_vec(),
            groups: BTreeMap::new(),
        }
    }

    /// Declared groups as sub-classes, in group-name order.
    pub fn group_classes(&self) -> Result<Vec<(String, FiniteClass)>, ClassError> {
        self.groups
            .iter()
            .map(|(name, ids)| {
                let ids: Vec<&str> = ids.iter().map(String::as_str).collect();
                Ok((name.clone(), self.subclass(&ids)?))
            })
            .collect()
    }

    /// Intersection of all supports.
    pub fn common_intersection(&self) -> Result<CountableSet, ClassError> {
        CountableSet::intersect_all(self.hypotheses.iter().map(|h| &h.support))?.ok_or(ClassError::EmptyClass)
    }
}

/// A countably infinite class described by hooks instead of an explicit list.
///
/// Hypotheses are indexed from 1.
pub trait IndexedFamily: fmt::Debug + Send + Sync {
    fn name(&self) -> &str;
    fn universe(&self) -> &Arc<Universe>;
    fn support(&self, index: usize) -> CountableSet;

    /// For each index that misses at least one element of `distinct`, the number missed.
    fn misfits(&self, distinct: &BTreeSet<Element>) -> BTreeMap<usize, usize>;

    /// Intersection of the supports of every hypothesis whose index is not in `excluded`.
    fn cofinite_intersection(&self, excluded: &BTreeSet<usize>) -> CountableSet;

    /// Intersection of the supports at `indices`, or `None` when empty.
    fn intersection_of(&self, indices: &BTreeSet<usize>) -> Option<CountableSet> {
        let supports: Vec<CountableSet> = indices.iter().map(|&i| self.support(i)).collect();
        CountableSet::intersect_all(&supports).expect("shared universe")
    }

    /// The first `n` hypotheses as a finite class.
    fn prefix(&self, n: usize) -> FiniteClass {
        let hyps = (1..=n).map(|i| Hypothesis { id: self.hypothesis_id(i), support: self.support(i) }).collect();
        FiniteClass::new(format!("{}[..{n}]", self.name()), self.universe().clone(), hyps)
            .expect("indexed families produce valid prefixes")
    }

    fn hypothesis_id(&self, index: usize) -> String {
        format!("h{index}")
    }

    fn index_of(&self, id: &str) -> Option<usize> {
        id.strip_prefix('h')?.parse().ok().filter(|&i| i >= 1)
    }

    /// Known noisy closure dimension at noise level `n`, if the family provides one.
    fn dimension_hint(&self, _n: usize) -> Option<DimValue> {
        None
    }

    /// Candidate prefixes of `d` distinct elements for budgeted witness search.
    fn witness_prefixes(&self, _d: usize) -> Vec<Vec<Element>> {
        Vec::new()
    }
}

/// Hypothesis `i` is everything except one atom `S_i` and one element `p_i` of
/// the shared atom `P`.
#[derive(Debug)]
pub struct PrimePowers {
    universe: Arc<Universe>,
}

pub const P_ATOM: AtomId = 1;

impl PrimePowers {
    pub fn new() -> Self {
        let labels = BTreeMap::from([(P_ATOM, "P".to_string())]);
        PrimePowers { universe: Universe::unbounded(labels, Some(("S".to_string(), 1))) }
    }

    /// The `i`-th element of `P` (1-based).
    pub fn p(i: usize) -> Element {
        Element::new(P_ATOM, i as u64 - 1)
    }

    /// Atom of `S_i`.
    pub fn s_atom(i: usize) -> AtomId {
        1 + i as AtomId
    }
}

impl Default for PrimePowers {
    fn default() -> Self {
        Self::new()
    }
}

impl IndexedFamily for PrimePowers {
    fn name(&self) -> &str {
        "prime_powers"
    }

    fn universe(&self) -> &Arc<Universe> {
        &self.universe
    }

    fn support(&self, index: usize) -> CountableSet {
        CountableSet::new(
            self.universe.clone(),
            AtomSet::CofiniteExcluding([Self::s_atom(index)].into()),
            [Self::p(index)],
            [],
        )
        .expect("valid support")
    }

    fn misfits(&self, distinct: &BTreeSet<Element>) -> BTreeMap<usize, usize> {
        let mut out = BTreeMap::new();
        for x in distinct {
            let (atom, rank) = x.decode();
            let index = match atom {
                0 => continue,
                P_ATOM => rank as usize + 1,
                a => (a - 1) as usize,
            };
            *out.entry(index).or_insert(0) += 1;
        }
        out
    }

    fn cofinite_intersection(&self, excluded: &BTreeSet<usize>) -> CountableSet {
        CountableSet::new(
            self.universe.clone(),
            AtomSet::Finite(excluded.iter().map(|&j| Self::s_atom(j)).collect()),
            [],
            excluded.iter().map(|&k| Self::p(k)),
        )
        .expect("valid intersection")
    }

    fn intersection_of(&self, indices: &BTreeSet<usize>) -> Option<CountableSet> {
        if indices.is_empty() {
            return None;
        }
        let set = CountableSet::new(
            self.universe.clone(),
            AtomSet::CofiniteExcluding(indices.iter().map(|&i| Self::s_atom(i)).collect()),
            indices.iter().map(|&i| Self::p(i)),
            [],
        )
        .expect("valid intersection");
        Some(set)
    }

    fn dimension_hint(&self, n: usize) -> Option<DimValue> {
        Some(if n == 0 { DimValue::Finite(0) } else { DimValue::Infinite })
    }

    fn witness_prefixes(&self, d: usize) -> Vec<Vec<Element>> {
        vec![
            (1..=d).map(Self::p).collect(),
            (0..d as u64).map(|j| Element::new(Self::s_atom(1), j)).collect(),
            (1..=d).map(|i| Element::new(Self::s_atom(i), 0)).collect(),
        ]
    }
}

#[derive(Clone, Debug)]
pub enum HypothesisClass {
    Finite(FiniteClass),
    Indexed(Arc<dyn IndexedFamily>),
}

impl HypothesisClass {
    pub fn name(&self) -> &str {
        match self {
            HypothesisClass::Finite(c) => c.name(),
            HypothesisClass::Indexed(f) => f.name(),
        }
    }

    pub fn universe(&self) -> &Arc<Universe> {
        match self {
            HypothesisClass::Finite(c) => c.universe(),
            HypothesisClass::Indexed(f) => f.universe(),
        }
    }

    pub fn as_finite(&self) -> Option<&FiniteClass> {
        match self {
            HypothesisClass::Finite(c) => Some(c),
            HypothesisClass::Indexed(_) => None,
        }
    }

    pub fn hypothesis(&self, id: &str) -> Option<Hypothesis> {
        match self {
            HypothesisClass::Finite(c) => c.get(id).cloned(),
            HypothesisClass::Indexed(f) => {
                let i = f.index_of(id)?;
                Some(Hypothesis { id: f.hypothesis_id(i), support: f.support(i) })
            }
        }
    }

    /// The `i`-th prefix class (first `min(i, q)` hypotheses for finite classes).
    pub fn prefix(&self, i: usize) -> FiniteClass {
        match self {
            HypothesisClass::Finite(c) => c.truncate(i),
            HypothesisClass::Indexed(f) => f.prefix(i),
        }
    }

    /// 1-based position of a hypothesis in the class order.
    pub fn position(&self, id: &str) -> Option<usize> {
        match self {
            HypothesisClass::Finite(c) => c.index_of(id).map(|i| i + 1),
            HypothesisClass::Indexed(f) => f.index_of(id),
        }
    }

    pub fn default_hypothesis_id(&self) -> String {
        match self {
            HypothesisClass::Finite(c) => c.hypotheses()[0].id.clone(),
            HypothesisClass::Indexed(f) => f.hypothesis_id(1),
        }
    }
}

pub const BUILTINS: [&str; 3] = ["parity", "prime_powers", "union_demo"];

pub fn builtin(name: &str) -> Result<HypothesisClass, ClassError> {
    match name {
        "parity" => Ok(HypothesisClass::Finite(parity())),
        "prime_powers" => Ok(HypothesisClass::Indexed(Arc::new(PrimePowers::new()))),
        "union_demo" => Ok(HypothesisClass::Finite(union_demo())),
        other => Err(ClassError::UnknownBuiltin(other.to_string())),
    }
}

fn atoms(labels: &[&str]) -> Arc<Universe> {
    Universe::finite(labels.iter().enumerate().map(|(i, l)| Atom { id: i as AtomId + 1, label: l.to_string() }))
        .expect("distinct atoms")
}

fn hyp(u: &Arc<Universe>, id: &str, atoms: &[AtomId], minus: &[Element], plus: &[Element]) -> Hypothesis {
    Hypothesis {
        id: id.to_string(),
        support: CountableSet::new(
            u.clone(),
            AtomSet::Finite(atoms.iter().copied().collect()),
            minus.iter().copied(),
            plus.iter().copied(),
        )
        .expect("valid support"),
    }
}

/// Two hypotheses: the even atom `E` and the odd atom `O`.
pub fn parity() -> FiniteClass {
    let u = atoms(&["E", "O"]);
    let hs = vec![hyp(&u, "h_e", &[1], &[], &[]), hyp(&u, "h_o", &[2], &[], &[])];
    FiniteClass::new("parity", u, hs).expect("valid class")
}

/// Four hypotheses in two groups. Group `H1` shares atom `E`, group `H2` shares
/// atom `O`; `g1` and `g4` meet in exactly two elements.
pub fn union_demo() -> FiniteClass {
    let u = atoms(&["E", "O", "A", "B"]);
    let (e, o, a, b) = (1, 2, 3, 4);
    let hs = vec![
        hyp(&u, "g1", &[e, a], &[], &[Element::new(b, 0)]),
        hyp(&u, "g2", &[e, b], &[Element::new(b, 0)], &[]),
        hyp(&u, "g3", &[o, a], &[Element::new(a, 1)], &[]),
        hyp(&u, "g4", &[o, b], &[], &[Element::new(a, 1)]),
    ];
    let groups = BTreeMap::from([
        ("H1".to_string(), vec!["g1".to_string(), "g2".to_string()]),
        ("H2".to_string(), vec!["g3".to_string(), "g4".to_string()]),
    ]);
    FiniteClass::new("union_demo", u, hs).and_then(|c| c.with_groups(groups)).expect("valid class")
}

/// A seeded random finite class with `q` hypotheses over atoms `1..=num_atoms`.
///
/// Each support includes a random nonempty set of atoms, removes up to two
/// low-rank elements of them, and adds up to two low-rank elements elsewhere.
pub fn random_finite_class(seed: u64, q: usize, num_atoms: usize) -> FiniteClass {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<String> = (1..=num_atoms).map(|i| format!("A{i}")).collect();
    let u = atoms(&labels.iter().map(String::as_str).collect::<Vec<_>>());
    let all: Vec<AtomId> = (1..=num_atoms as AtomId).collect();
    let mut hs = Vec::new();
    for k in 1..=q {
        let mut inc: Vec<AtomId> = all.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
        if inc.is_empty() {
            inc.push(*all.choose(&mut rng).expect("at least one atom"));
        }
        let out: Vec<AtomId> = all.iter().copied().filter(|a| !inc.contains(a)).collect();
        let minus: Vec<Element> = (0..rng.gen_range(0..=2))
            .map(|_| Element::new(*inc.choose(&mut rng).expect("nonempty"), rng.gen_range(0..4)))
            .collect();
        let plus: Vec<Element> = if out.is_empty() {
            Vec::new()
        } else {
            (0..rng.gen_range(0..=2))
                .map(|_| Element::new(*out.choose(&mut rng).expect("nonempty"), rng.gen_range(0..4)))
                .collect()
        };
        hs.push(hyp(&u, &format!("h{k}"), &inc, &minus, &plus));
    }
    FiniteClass::new(format!("random-{seed}"), u, hs).expect("valid class")
}

// ----- class-spec format -----

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassSpecDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default)]
    atoms: Vec<Atom>,
    kind: String,
    #[serde(default)]
    hypotheses: Vec<HypothesisDoc>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    groups: BTreeMap<String, Vec<String>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HypothesisDoc {
    id: String,
    support: SupportDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SupportDoc {
    include_atoms: IncludeAtoms,
    #[serde(default)]
    minus: Vec<u64>,
    #[serde(default)]
    plus: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum IncludeAtoms {
    Finite(Vec<AtomId>),
    CofiniteExcluding(Vec<AtomId>),
}

/// Parses a JSON class spec.
///
/// `kind` is `"finite"` for an explicit class, or the name of a built-in
/// (`"parity"`, `"union_demo"`, `"prime_powers"`, `"indexed:prime_powers"`).
pub fn parse_class_spec(text: &str) -> Result<HypothesisClass, ClassError> {
    let doc: ClassSpecDoc = serde_json::from_str(text).map_err(|e| ClassError::Parse(e.to_string()))?;
    if doc.kind != "finite" {
        let name = doc.kind.strip_prefix("indexed:").unwrap_or(&doc.kind);
        return builtin(name);
    }
    let universe = Universe::finite(doc.atoms)?;
    let mut hyps = Vec::with_capacity(doc.hypotheses.len());
    for h in doc.hypotheses {
        let atoms = match h.support.include_atoms {
            IncludeAtoms::Finite(v) => AtomSet::Finite(v.into_iter().collect()),
            IncludeAtoms::CofiniteExcluding(v) => AtomSet::CofiniteExcluding(v.into_iter().collect()),
        };
        let support = CountableSet::new(
            universe.clone(),
            atoms,
            h.support.minus.into_iter().map(Element::from_code),
            h.support.plus.into_iter().map(Element::from_code),
        )?;
        hyps.push(Hypothesis { id: h.id, support });
    }
    if hyps.is_empty() {
        return Err(ClassError::EmptyClass);
    }
    let class = FiniteClass::new(doc.name.unwrap_or_else(|| "spec".to_string()), universe, hyps)?;
    Ok(HypothesisClass::Finite(class.with_groups(doc.groups)?))
}

/// Serializes a finite class in canonical form. Parsing the output yields an equal class.
pub fn serialize_class_spec(class: &FiniteClass) -> Result<String, ClassError> {
    if !class.universe().is_bounded() {
        return Err(ClassError::NotSerializable);
    }
    let doc = ClassSpecDoc {
        name: Some(class.name().to_string()),
        atoms: class.universe().declared_atoms(),
        kind: "finite".to_string(),
        hypotheses: class
            .hypotheses()
            .iter()
            .map(|h| HypothesisDoc {
                id: h.id.clone(),
                support: SupportDoc {
                    include_atoms: match h.support.atoms() {
                        AtomSet::Finite(s) => IncludeAtoms::Finite(s.iter().copied().collect()),
                        AtomSet::CofiniteExcluding(s) => IncludeAtoms::CofiniteExcluding(s.iter().copied().collect()),
                    },
                    minus: h.support.minus().iter().map(|x| x.code()).collect(),
                    plus: h.support.plus().iter().map(|x| x.code()).collect(),
                },
            })
            .collect(),
        groups: class.groups().clone(),
    };
    serde_json::to_string_pretty(&doc).map_err(|e| ClassError::Parse(e.to_string()))
}

/// Resolves `builtin:<name>` or reads a class-spec file.
pub fn load_class(arg: &str) -> Result<HypothesisClass, ClassError> {
    if let Some(name) = arg.strip_prefix("builtin:") {
        return builtin(name);
    }
    let text = std::fs::read_to_string(arg).map_err(|e| ClassError::Parse(format!("{arg}: {e}")))?;
    parse_class_spec(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setalg::Cardinality;

    #[test]
    fn parity_basics() {
        let c = parity();
        let inter = c.common_intersection().unwrap();
        assert!(inter.is_empty());
        assert_eq!(
            c.hypotheses()[0].support.enumerate(3),
            vec![Element::new(1, 0), Element::new(1, 1), Element::new(1, 2)]
        );
    }

    #[test]
    fn union_demo_groups_share_an_atom() {
        let c = union_demo();
        let groups = c.group_classes().unwrap();
        assert_eq!(groups.len(), 2);
        let h1 = groups[0].1.common_intersection().unwrap();
        assert_eq!(h1, CountableSet::from_atoms(c.universe(), [1]).unwrap());
        let h2 = groups[1].1.common_intersection().unwrap();
        assert_eq!(h2, CountableSet::from_atoms(c.universe(), [2]).unwrap());
        let f = c.subclass(&["g1", "g4"]).unwrap().common_intersection().unwrap();
        assert_eq!(f.cardinality(), Cardinality::Finite(2));
    }

    #[test]
    fn prime_powers_hooks_agree_with_supports() {
        let pp = PrimePowers::new();
        let xs: BTreeSet<Element> =
            [PrimePowers::p(1), PrimePowers::p(3), Element::new(3, 5), Element::new(1, 2)].into_iter().collect();
        let mis = pp.misfits(&xs);
        for i in 1..=6 {
            let direct = xs.iter().filter(|&&x| !pp.support(i).contains(x)).count();
            assert_eq!(mis.get(&i).copied().unwrap_or(0), direct, "index {i}");
        }
        let excluded: BTreeSet<usize> = [2, 5].into();
        let got = pp.cofinite_intersection(&excluded);
        // Hypotheses beyond index 60 only remove codes above the scan window.
        let brute: Vec<Element> = (0..800)
            .map(Element::from_code)
            .filter(|&x| x.atom() >= 1 && (1..=60).filter(|i| !excluded.contains(i)).all(|i| pp.support(i).contains(x)))
            .collect();
        assert_eq!(got.members_below(800), brute);
    }

    #[test]
    fn spec_round_trip_builtins() {
        for c in [parity(), union_demo(), random_finite_class(7, 3, 4)] {
            let text = serialize_class_spec(&c).unwrap();
            let back = parse_class_spec(&text).unwrap();
            assert_eq!(back.as_finite().unwrap(), &c);
        }
    }

    #[test]
    fn spec_errors() {
        let finite_support = r#"{"atoms":[{"id":1,"label":"E"}],"kind":"finite",
            "hypotheses":[{"id":"h","support":{"include_atoms":{"finite":[]},"plus":[1]}}]}"#;
        assert_eq!(parse_class_spec(finite_support).unwrap_err(), ClassError::UusViolation("h".into()));
        let dup = r#"{"atoms":[{"id":1,"label":"E"}],"kind":"finite","hypotheses":[
            {"id":"h","support":{"include_atoms":{"finite":[1]}}},
            {"id":"h","support":{"include_atoms":{"finite":[1]}}}]}"#;
        assert_eq!(parse_class_spec(dup).unwrap_err(), ClassError::DuplicateId("h".into()));
        let undeclared = r#"{"atoms":[{"id":1,"label":"E"}],"kind":"finite","hypotheses":[
            {"id":"h","support":{"include_atoms":{"finite":[2]}}}]}"#;
        assert_eq!(parse_class_spec(undeclared).unwrap_err(), ClassError::Set(SetError::UnknownAtom(2)));
        assert!(matches!(parse_class_spec("{"), Err(ClassError::Parse(_))));
        assert_eq!(parse_class_spec(r#"{"kind":"nope"}"#).unwrap_err(), ClassError::UnknownBuiltin("nope".into()));
        assert!(matches!(parse_class_spec(r#"{"kind":"indexed:prime_powers"}"#), Ok(HypothesisClass::Indexed(_))));
    }
}
