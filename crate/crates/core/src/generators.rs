//! Generators: deterministic maps from a finite history to a guess.
//!
//! Generators keep no per-game state. Some memoize dimension values, which
//! depend only on the class, so one instance can be reused across games.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classes::{ClassError, FiniteClass, HypothesisClass};
use crate::closure::{self, distinct, finite_closure, nc_dim_exact, DimError, DimValue, DEFAULT_BUDGET};
use crate::setalg::{CountableSet, Element, Universe};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("common intersection of {0} is finite")]
    FiniteIntersection(String),
    #[error("unknown generator {0}")]
    UnknownGenerator(String),
    #[error("generator {0} needs a finite class")]
    NeedsFiniteClass(String),
    #[error(transparent)]
    Dim(#[from] DimError),
    #[error(transparent)]
    Class(#[from] ClassError),
}

/// Why a generator left its main rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    /// No level qualifies yet; the rule itself says to play any unseen element.
    NoLevel,
    /// Fewer rounds than the configured offset.
    BeforeStart,
    ClosureBot,
    EmptyPlaySet,
    DegenerateWindow,
}

impl Fallback {
    /// Fallbacks that the theory rules out inside its validity regime.
    pub fn is_flagged(self) -> bool {
        matches!(self, Fallback::ClosureBot | Fallback::EmptyPlaySet | Fallback::DegenerateWindow)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Rationale {
    Intersection,
    NoisyClosure {
        n_t: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fallback: Option<Fallback>,
    },
    PrefixClosure {
        j_t: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fallback: Option<Fallback>,
    },
    Window {
        r_t: usize,
        iterations: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fallback: Option<Fallback>,
    },
    Group {
        i_t: usize,
        group: String,
        prefix_lengths: Vec<usize>,
    },
    AltClosure {
        noise: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fallback: Option<Fallback>,
    },
}

impl Rationale {
    pub fn fallback(&self) -> Option<Fallback> {
        match self {
            Rationale::NoisyClosure { fallback, .. }
            | Rationale::PrefixClosure { fallback, .. }
            | Rationale::Window { fallback, .. }
            | Rationale::AltClosure { fallback, .. } => *fallback,
            Rationale::Intersection | Rationale::Group { .. } => None,
        }
    }

    pub fn flagged(&self) -> bool {
        self.fallback().is_some_and(Fallback::is_flagged)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Guess {
    pub element: Element,
    pub rationale: Rationale,
}

pub trait Generator: Send + Sync {
    fn name(&self) -> String;
    fn universe(&self) -> &Arc<Universe>;
    fn guess(&self, history: &[Element]) -> Guess;
}

/// Smallest element of the universe outside `seen`.
pub fn smallest_unseen(universe: &Arc<Universe>, seen: &BTreeSet<Element>) -> Element {
    CountableSet::full(universe).first_outside(seen).expect("universes are infinite")
}

/// Plays from `set` when it has an unseen element, otherwise the smallest unseen element of `universe`.
fn play_from(
    set: Option<CountableSet>,
    universe: &Arc<Universe>,
    seen: &BTreeSet<Element>,
) -> (Element, Option<Fallback>) {
    match set {
        None => (smallest_unseen(universe, seen), Some(Fallback::ClosureBot)),
        Some(s) => match s.first_outside(seen) {
            Some(x) => (x, None),
            None => (smallest_unseen(universe, seen), Some(Fallback::EmptyPlaySet)),
        },
    }
}

/// Always plays the smallest unseen element of the common intersection.
pub struct Trivial {
    name: String,
    intersection: CountableSet,
}

impl Trivial {
    pub fn new(class: &FiniteClass) -> Result<Self, GenError> {
        let intersection = class.common_intersection()?;
        if intersection.is_finite() {
            return Err(GenError::FiniteIntersection(class.name().to_string()));
        }
        Ok(Trivial { name: format!("trivial({})", class.name()), intersection })
    }
}

impl Generator for Trivial {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn universe(&self) -> &Arc<Universe> {
        self.intersection.universe()
    }

    fn guess(&self, history: &[Element]) -> Guess {
        let element = self.intersection.first_outside(&distinct(history)).expect("infinite intersection");
        Guess { element, rationale: Rationale::Intersection }
    }
}

/// Memoized `NC_n` of a class.
struct DimCache {
    class: HypothesisClass,
    values: Mutex<BTreeMap<usize, DimValue>>,
}

impl DimCache {
    fn new(class: HypothesisClass) -> Result<Self, GenError> {
        let cache = DimCache { class, values: Mutex::new(BTreeMap::new()) };
        cache.compute(0)?;
        Ok(cache)
    }

    fn compute(&self, n: usize) -> Result<DimValue, GenError> {
        if let Some(&v) = self.values.lock().expect("cache lock").get(&n) {
            return Ok(v);
        }
        let v = match &self.class {
            HypothesisClass::Finite(c) => nc_dim_exact(c, n)?,
            HypothesisClass::Indexed(f) => match f.dimension_hint(n) {
                Some(v) => v,
                None => closure::nc_dim_budgeted(&self.class, n, DEFAULT_BUDGET)?,
            },
        };
        self.values.lock().expect("cache lock").insert(n, v);
        Ok(v)
    }

    fn get(&self, n: usize) -> DimValue {
        // Every level uses the same cells as level 0, which was computed at construction.
        self.compute(n).expect("dimension computable once level 0 is")
    }
}

/// Plays from the closure at the largest noise level `n_t <= t` whose
/// dimension is below the distinct count `d_t`.
///
/// Level 0 is a legitimate level; the rule only falls back to an arbitrary
/// unseen element when even `NC_0 >= d_t`.
pub struct Und {
    dims: DimCache,
}

impl Und {
    pub fn new(class: HypothesisClass) -> Result<Self, GenError> {
        Ok(Und { dims: DimCache::new(class)? })
    }

    pub fn nc(&self, n: usize) -> DimValue {
        self.dims.get(n)
    }

    /// `n_t` for a history of `t` rounds with `d` distinct elements.
    ///
    /// `NC_n` is nondecreasing in `n`, so the qualifying levels form an
    /// initial segment and an upward scan finds the largest.
    pub fn level(&self, t: usize, d: usize) -> Option<usize> {
        if !self.nc(0).below(d) {
            return None;
        }
        let mut n = 0;
        while n < t && self.nc(n + 1).below(d) {
            n += 1;
        }
        Some(n)
    }
}

impl Generator for Und {
    fn name(&self) -> String {
        "und".to_string()
    }

    fn universe(&self) -> &Arc<Universe> {
        self.dims.class.universe()
    }

    fn guess(&self, history: &[Element]) -> Guess {
        let seen = distinct(history);
        let universe = self.universe();
        match self.level(history.len(), seen.len()) {
            None => Guess {
                element: smallest_unseen(universe, &seen),
                rationale: Rationale::NoisyClosure { n_t: None, fallback: Some(Fallback::NoLevel) },
            },
            Some(n) => {
                let (element, fallback) = play_from(closure::closure(&self.dims.class, &seen, n), universe, &seen);
                Guess { element, rationale: Rationale::NoisyClosure { n_t: Some(n), fallback } }
            }
        }
    }
}

/// Plays from the closure of the prefix class `H_j` at noise `j`, where `j_t`
/// is the largest `i <= t` with `NC_i(H_i) < d_t`.
pub struct NonUniform {
    class: HypothesisClass,
    dims: Mutex<BTreeMap<usize, DimValue>>,
}

impl NonUniform {
    pub fn new(class: HypothesisClass) -> Self {
        NonUniform { class, dims: Mutex::new(BTreeMap::new()) }
    }

    /// `NC_i(H_i)`.
    pub fn prefix_dim(&self, i: usize) -> DimValue {
        if let Some(&v) = self.dims.lock().expect("cache lock").get(&i) {
            return v;
        }
        // Past the cell limit the value is unknown; treating it as infinite
        // only makes the index scan skip that prefix.
        let v = nc_dim_exact(&self.class.prefix(i), i).unwrap_or(DimValue::Infinite);
        self.dims.lock().expect("cache lock").insert(i, v);
        v
    }

    pub fn level(&self, t: usize, d: usize) -> Option<usize> {
        (1..=t).rev().find(|&i| self.prefix_dim(i).below(d))
    }
}

impl Generator for NonUniform {
    fn name(&self) -> String {
        "nonuniform".to_string()
    }

    fn universe(&self) -> &Arc<Universe> {
        self.class.universe()
    }

    fn guess(&self, history: &[Element]) -> Guess {
        let seen = distinct(history);
        let universe = self.universe();
        match self.level(history.len(), seen.len()) {
            None => Guess {
                element: smallest_unseen(universe, &seen),
                rationale: Rationale::PrefixClosure { j_t: 0, fallback: Some(Fallback::NoLevel) },
            },
            Some(j) => {
                let (element, fallback) = play_from(closure::prefix_closure(&self.class, j, &seen, j), universe, &seen);
                Guess { element, rationale: Rationale::PrefixClosure { j_t: j, fallback } }
            }
        }
    }
}

/// Wraps a generator that succeeds on clean inputs so that it tolerates a
/// finite amount of noise anywhere in the stream.
///
/// The inner generator is fed a recent window holding half of the distinct
/// elements seen so far, extended by its own earlier outputs until it names
/// something new.
pub struct Limit {
    inner: Arc<dyn Generator>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LimitTrace {
    /// 1-based start of the window; `t + 1` means the window is empty.
    pub r_t: usize,
    pub window: Vec<Element>,
    /// Inner outputs `z_1, z_2, ...` in the order they were produced.
    pub candidates: Vec<Element>,
    pub guess: Guess,
}

impl Limit {
    pub fn new(inner: Arc<dyn Generator>) -> Self {
        Limit { inner }
    }

    /// Largest `r` such that `x_r..x_t` holds exactly `m` distinct elements.
    pub fn window_start(history: &[Element], m: usize) -> usize {
        let t = history.len();
        if m == 0 {
            return t + 1;
        }
        let mut seen = BTreeSet::new();
        for r in (1..=t).rev() {
            seen.insert(history[r - 1]);
            if seen.len() == m {
                return r;
            }
        }
        1
    }

    pub fn trace(&self, history: &[Element]) -> LimitTrace {
        let t = history.len();
        let seen = distinct(history);
        if seen.is_empty() {
            let element = smallest_unseen(self.universe(), &seen);
            return LimitTrace {
                r_t: t + 1,
                window: Vec::new(),
                candidates: Vec::new(),
                guess: Guess {
                    element,
                    rationale: Rationale::Window {
                        r_t: t + 1,
                        iterations: 0,
                        fallback: Some(Fallback::DegenerateWindow),
                    },
                },
            };
        }
        let r_t = Self::window_start(history, seen.len() / 2);
        let window = history[r_t - 1..].to_vec();
        let mut input = window.clone();
        let mut z = self.inner.guess(&input).element;
        let mut candidates = vec![z];
        let mut iterations = r_t;
        for i in 1..r_t {
            if !seen.contains(&z) {
                iterations = i;
                break;
            }
            input.push(z);
            z = self.inner.guess(&input).element;
            candidates.push(z);
        }
        LimitTrace {
            r_t,
            window,
            candidates,
            guess: Guess { element: z, rationale: Rationale::Window { r_t, iterations, fallback: None } },
        }
    }
}

impl Generator for Limit {
    fn name(&self) -> String {
        format!("limit({})", self.inner.name())
    }

    fn universe(&self) -> &Arc<Universe> {
        self.inner.universe()
    }

    fn guess(&self, history: &[Element]) -> Guess {
        self.trace(history).guess
    }
}

/// Picks the group whose common intersection has the longest fully seen
/// prefix (ties to the first group) and plays its smallest unseen element.
pub struct UnionLimit {
    groups: Vec<(String, CountableSet)>,
}

impl UnionLimit {
    pub fn new(groups: Vec<(String, FiniteClass)>) -> Result<Self, GenError> {
        let mut out = Vec::with_capacity(groups.len());
        for (name, class) in groups {
            let inter = class.common_intersection()?;
            if inter.is_finite() {
                return Err(GenError::FiniteIntersection(name));
            }
            out.push((name, inter));
        }
        if out.is_empty() {
            return Err(ClassError::EmptyClass.into());
        }
        Ok(UnionLimit { groups: out })
    }

    /// Declared groups of the class, or one group per hypothesis when none are declared.
    pub fn for_class(class: &FiniteClass) -> Result<Self, GenError> {
        if class.groups().is_empty() {
            Self::singletons(class)
        } else {
            Self::new(class.group_classes()?)
        }
    }

    pub fn singletons(class: &FiniteClass) -> Result<Self, GenError> {
        let groups = class
            .hypotheses()
            .iter()
            .map(|h| Ok((h.id.clone(), class.subclass(&[h.id.as_str()])?)))
            .collect::<Result<Vec<_>, ClassError>>()?;
        Self::new(groups)
    }

    pub fn group_names(&self) -> Vec<String> {
        self.groups.iter().map(|(n, _)| n.clone()).collect()
    }
}

impl Generator for UnionLimit {
    fn name(&self) -> String {
        "union-limit".to_string()
    }

    fn universe(&self) -> &Arc<Universe> {
        self.groups[0].1.universe()
    }

    fn guess(&self, history: &[Element]) -> Guess {
        let seen = distinct(history);
        let prefix_lengths: Vec<usize> =
            self.groups.iter().map(|(_, s)| s.iter().take_while(|x| seen.contains(x)).count()).collect();
        let mut i_t = 0;
        for (i, &p) in prefix_lengths.iter().enumerate() {
            if p > prefix_lengths[i_t] {
                i_t = i;
            }
        }
        let (name, set) = &self.groups[i_t];
        Guess {
            element: set.first_outside(&seen).expect("infinite intersection"),
            rationale: Rationale::Group { i_t: i_t + 1, group: name.clone(), prefix_lengths },
        }
    }
}

/// Plays from the closure at noise `t - d` once `t >= d`.
pub struct AltUng {
    class: FiniteClass,
    d: usize,
}

impl AltUng {
    pub fn new(class: FiniteClass, d: usize) -> Self {
        AltUng { class, d }
    }
}

impl Generator for AltUng {
    fn name(&self) -> String {
        format!("alt-ung({})", self.d)
    }

    fn universe(&self) -> &Arc<Universe> {
        self.class.universe()
    }

    fn guess(&self, history: &[Element]) -> Guess {
        let seen = distinct(history);
        let t = history.len();
        if t < self.d {
            return Guess {
                element: smallest_unseen(self.universe(), &seen),
                rationale: Rationale::AltClosure { noise: None, fallback: Some(Fallback::BeforeStart) },
            };
        }
        let noise = t - self.d;
        let (element, fallback) = play_from(finite_closure(&self.class, &seen, noise), self.universe(), &seen);
        Guess { element, rationale: Rationale::AltClosure { noise: Some(noise), fallback } }
    }
}

/// Builds a generator from a name:
/// `und`, `nonuniform`, `limit` (same as `limit:nonuniform` or
/// `limit(inner=nonuniform)`), `union-limit`, `trivial-union`, `trivial`,
/// `trivial:<hypothesis>`, `alt-ung:<d>`.
pub fn build_generator(spec: &str, class: &HypothesisClass) -> Result<Arc<dyn Generator>, GenError> {
    let unknown = || GenError::UnknownGenerator(spec.to_string());
    let (head, arg) = match spec.split_once(':') {
        Some((h, a)) => (h, Some(a)),
        None => match spec.strip_suffix(')').and_then(|s| s.split_once('(')) {
            Some((h, a)) => (h, Some(a.strip_prefix("inner=").unwrap_or(a))),
            None => (spec, None),
        },
    };
    let finite = || class.as_finite().ok_or_else(|| GenError::NeedsFiniteClass(spec.to_string()));
    Ok(match (head, arg) {
        ("und", None) => Arc::new(Und::new(class.clone())?),
        ("nonuniform", None) => Arc::new(NonUniform::new(class.clone())),
        ("limit", inner) => Arc::new(Limit::new(build_generator(inner.unwrap_or("nonuniform"), class)?)),
        ("union-limit", None) => match class {
            HypothesisClass::Finite(c) => Arc::new(UnionLimit::for_class(c)?),
            HypothesisClass::Indexed(_) => Arc::new(UnionLimit::singletons(&class.prefix(4))?),
        },
        ("trivial-union", None) => Arc::new(UnionLimit::singletons(&match class {
            HypothesisClass::Finite(c) => c.clone(),
            HypothesisClass::Indexed(_) => class.prefix(4),
        })?),
        ("trivial", None) => Arc::new(Trivial::new(finite()?)?),
        ("trivial", Some(id)) => {
            let h = class.hypothesis(id).ok_or_else(|| ClassError::UnknownHypothesis(id.to_string()))?;
            let single = FiniteClass::new(format!("{}[{id}]", class.name()), class.universe().clone(), vec![h])?;
            Arc::new(Trivial::new(&single)?)
        }
        ("alt-ung", Some(d)) => Arc::new(AltUng::new(finite()?.clone(), d.parse().map_err(|_| unknown())?)),
        _ => return Err(unknown()),
    })
}

/// Generator names exercised against adversaries for a class.
pub fn roster_names(class: &HypothesisClass) -> Vec<String> {
    let first = class.default_hypothesis_id();
    let mut names: Vec<String> = ["und", "nonuniform", "limit", "union-limit"].iter().map(|s| s.to_string()).collect();
    names.push(format!("trivial:{first}"));
    if let HypothesisClass::Finite(c) = class {
        names.push("alt-ung:1".to_string());
        if c.common_intersection().is_ok_and(|s| !s.is_finite()) {
            names.push("trivial".to_string());
        }
    }
    names
}

pub fn roster(class: &HypothesisClass) -> Result<Vec<Arc<dyn Generator>>, GenError> {
    roster_names(class).iter().map(|n| build_generator(n, class)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::{builtin, parity, union_demo};

    fn e(j: u64) -> Element {
        Element::new(1, j)
    }
    fn o(j: u64) -> Element {
        Element::new(2, j)
    }

    #[test]
    fn trivial_skips_seen() {
        let c = union_demo().subclass(&["g1", "g2"]).unwrap();
        let g = Trivial::new(&c).unwrap();
        assert_eq!(g.guess(&[e(0), o(0)]).element, e(1));
        assert!(matches!(Trivial::new(&parity()), Err(GenError::FiniteIntersection(_))));
    }

    #[test]
    fn und_levels_on_parity() {
        let g = Und::new(HypothesisClass::Finite(parity())).unwrap();
        assert_eq!(g.level(0, 0), None);
        // NC_0 = 0 < 1 and NC_1 = 2 >= 1.
        let guess = g.guess(&[e(0)]);
        assert_eq!(guess.rationale, Rationale::NoisyClosure { n_t: Some(0), fallback: None });
        assert_eq!(guess.element, e(1));
        // d = 3 > NC_1 = 2, so level 1 qualifies at t = 3.
        assert_eq!(g.level(3, 3), Some(1));
        // Only h_e stays within one miss.
        let guess = g.guess(&[e(0), e(1), o(0)]);
        assert_eq!(guess.rationale, Rationale::NoisyClosure { n_t: Some(1), fallback: None });
        assert_eq!(guess.element, e(2));
    }

    #[test]
    fn limit_window() {
        let h = [e(0), e(1), e(0), o(0), e(2)];
        // d = 4, m = 2: x_4..x_5 = {O.0, E.2}.
        assert_eq!(Limit::window_start(&h, 2), 4);
        assert_eq!(Limit::window_start(&h, 0), 6);
        let g = Limit::new(Arc::new(NonUniform::new(HypothesisClass::Finite(parity()))));
        let tr = g.trace(&h);
        assert_eq!(tr.window, vec![o(0), e(2)]);
        assert!(!distinct(&h).contains(&tr.guess.element));
        assert!(g.trace(&[]).guess.rationale.flagged());
    }

    #[test]
    fn union_limit_picks_longest_prefix() {
        let c = union_demo();
        let g = UnionLimit::for_class(&c).unwrap();
        let guess = g.guess(&[o(0), o(1), e(0)]);
        assert_eq!(guess.element, o(2));
        assert_eq!(guess.rationale, Rationale::Group { i_t: 2, group: "H2".into(), prefix_lengths: vec![1, 2] });
        assert_eq!(g.guess(&[]).element, e(0));
    }

    #[test]
    fn alt_ung_waits() {
        let g = AltUng::new(parity(), 2);
        assert_eq!(
            g.guess(&[e(0)]).rationale,
            Rationale::AltClosure { noise: None, fallback: Some(Fallback::BeforeStart) }
        );
        assert_eq!(g.guess(&[e(0), e(1)]).element, e(2));
    }

    #[test]
    fn builder_names() {
        let pp = builtin("prime_powers").unwrap();
        for name in roster_names(&pp) {
            build_generator(&name, &pp).unwrap();
        }
        let par = builtin("parity").unwrap();
        for name in roster_names(&par).into_iter().chain(["limit(inner=und)".to_string(), "trivial-union".to_string()])
        {
            build_generator(&name, &par).unwrap();
        }
        assert!(matches!(build_generator("nope", &par), Err(GenError::UnknownGenerator(_))));
    }
}
