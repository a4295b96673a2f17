//! Noisy closure operator and noisy closure dimensions.
//!
//! `closure(prefix, n)` is the intersection of the supports of every hypothesis
//! that misses at most `n` distinct prefix elements, or `None` (bottom) when no
//! hypothesis qualifies. `NC_n` is the largest number of distinct examples whose
//! closure is a finite set, or 0 when no such prefix exists.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classes::{ClassError, FiniteClass, HypothesisClass};
use crate::setalg::{Cardinality, CountableSet, Element, SetError};

/// Largest class size for which cells are materialized.
pub const CELL_LIMIT: usize = 16;

/// Default witness budget for indexed families.
pub const DEFAULT_BUDGET: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimValue {
    Finite(usize),
    Infinite,
    /// A witness of this size exists; larger ones were not searched.
    AtLeast(usize),
}

impl DimValue {
    /// True when the value is known to be strictly below `d`.
    pub fn below(self, d: usize) -> bool {
        matches!(self, DimValue::Finite(v) if v < d)
    }
}

impl fmt::Display for DimValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DimValue::Finite(v) => write!(f, "{v}"),
            DimValue::Infinite => write!(f, "infinite"),
            DimValue::AtLeast(v) => write!(f, ">={v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DimError {
    #[error("class has {q} hypotheses, more than the cell limit {limit}")]
    TooManyHypotheses { q: usize, limit: usize },
    #[error(transparent)]
    Class(#[from] ClassError),
    #[error(transparent)]
    Set(#[from] SetError),
}

pub fn distinct(items: &[Element]) -> BTreeSet<Element> {
    items.iter().copied().collect()
}

/// For each hypothesis, how many of `distinct` lie outside its support.
pub fn miss_counts(class: &FiniteClass, distinct: &BTreeSet<Element>) -> Vec<usize> {
    class.hypotheses().iter().map(|h| distinct.iter().filter(|&&x| !h.support.contains(x)).count()).collect()
}

/// Indices of hypotheses missing at most `n` elements of `distinct`.
pub fn consistent_members(class: &FiniteClass, distinct: &BTreeSet<Element>, n: usize) -> Vec<usize> {
    miss_counts(class, distinct).into_iter().enumerate().filter(|&(_, m)| m <= n).map(|(i, _)| i).collect()
}

pub fn finite_closure(class: &FiniteClass, distinct: &BTreeSet<Element>, n: usize) -> Option<CountableSet> {
    let members = consistent_members(class, distinct, n);
    CountableSet::intersect_all(members.iter().map(|&i| &class.hypotheses()[i].support)).expect("shared universe")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConsistentFamily {
    /// 0-based positions in a finite class.
    Members(Vec<usize>),
    /// Every index of an indexed family except these (1-based).
    AllExcept(BTreeSet<usize>),
}

impl ConsistentFamily {
    pub fn is_empty(&self) -> bool {
        matches!(self, ConsistentFamily::Members(m) if m.is_empty())
    }

    pub fn contains_position(&self, position: usize) -> bool {
        match self {
            ConsistentFamily::Members(m) => m.contains(&(position - 1)),
            ConsistentFamily::AllExcept(e) => !e.contains(&position),
        }
    }
}

pub fn consistent_family(class: &HypothesisClass, distinct: &BTreeSet<Element>, n: usize) -> ConsistentFamily {
    match class {
        HypothesisClass::Finite(c) => ConsistentFamily::Members(consistent_members(c, distinct, n)),
        HypothesisClass::Indexed(f) => ConsistentFamily::AllExcept(
            f.misfits(distinct).into_iter().filter(|&(_, m)| m > n).map(|(i, _)| i).collect(),
        ),
    }
}

pub fn closure(class: &HypothesisClass, distinct: &BTreeSet<Element>, n: usize) -> Option<CountableSet> {
    match class {
        HypothesisClass::Finite(c) => finite_closure(c, distinct, n),
        HypothesisClass::Indexed(f) => match consistent_family(class, distinct, n) {
            ConsistentFamily::AllExcept(excluded) => Some(f.cofinite_intersection(&excluded)),
            ConsistentFamily::Members(_) => unreachable!("indexed families yield cofinite families"),
        },
    }
}

/// Closure with respect to the prefix class of the first `i` hypotheses.
pub fn prefix_closure(
    class: &HypothesisClass,
    i: usize,
    distinct: &BTreeSet<Element>,
    n: usize,
) -> Option<CountableSet> {
    match class {
        HypothesisClass::Finite(c) => finite_closure(&c.truncate(i), distinct, n),
        HypothesisClass::Indexed(f) => {
            let misses = f.misfits(distinct);
            let members = (1..=i).filter(|k| misses.get(k).copied().unwrap_or(0) <= n).collect();
            f.intersection_of(&members)
        }
    }
}

#[derive(Clone, Debug)]
pub struct Cell {
    /// Bit `i` set iff hypothesis `i` contains the region.
    pub pattern: u32,
    pub region: CountableSet,
    pub size: Cardinality,
}

/// The `2^q` regions cut out by the supports, indexed by pattern.
pub fn cell_decomposition(class: &FiniteClass) -> Result<Vec<Cell>, DimError> {
    cell_decomposition_with_limit(class, CELL_LIMIT)
}

pub fn cell_decomposition_with_limit(class: &FiniteClass, limit: usize) -> Result<Vec<Cell>, DimError> {
    let q = class.len();
    if q > limit || q > 31 {
        return Err(DimError::TooManyHypotheses { q, limit });
    }
    let hs = class.hypotheses();
    let full = CountableSet::full(class.universe());
    let mut cells = Vec::with_capacity(1 << q);
    for pattern in 0..(1u32 << q) {
        let inside = (0..q).filter(|&i| pattern >> i & 1 == 1).map(|i| &hs[i].support);
        let mut region = CountableSet::intersect_all(inside)?.unwrap_or_else(|| full.clone());
        for (i, h) in hs.iter().enumerate() {
            if pattern >> i & 1 == 0 {
                region = region.difference(&h.support)?;
            }
        }
        let size = region.cardinality();
        cells.push(Cell { pattern, region, size });
    }
    Ok(cells)
}

/// Largest finite `|⋂ V|` over nonempty sub-families `V`, or 0 if none is finite.
pub fn d_max(class: &FiniteClass) -> Result<usize, DimError> {
    let q = class.len();
    if q > CELL_LIMIT {
        return Err(DimError::TooManyHypotheses { q, limit: CELL_LIMIT });
    }
    let hs = class.hypotheses();
    let mut best = 0;
    for mask in 1u32..(1 << q) {
        let inter = CountableSet::intersect_all((0..q).filter(|&i| mask >> i & 1 == 1).map(|i| &hs[i].support))?
            .expect("nonempty sub-family");
        if let Cardinality::Finite(k) = inter.cardinality() {
            best = best.max(k);
        }
    }
    Ok(best)
}

/// Exclusive upper bound `n·q + d_max + 1` on `NC_n` of a finite class.
pub fn finite_class_bound(class: &FiniteClass, n: usize) -> Result<usize, DimError> {
    Ok(n * class.len() + d_max(class)? + 1)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NcReport {
    pub n: usize,
    pub value: DimValue,
    /// Consistent family of the witness (0-based positions).
    pub family: Vec<usize>,
    /// Witness elements, sorted by code. Empty when the value is 0.
    pub witness: Vec<Element>,
}

pub fn nc_dim_exact(class: &FiniteClass, n: usize) -> Result<DimValue, DimError> {
    Ok(nc_dim_report(class, n)?.value)
}

/// Exact `NC_n` with a maximal witness.
///
/// A prefix is summarized by how many of its elements fall in each cell. For a
/// target consistent family `T` with finite intersection, every cell inside
/// `⋂ T` may be filled completely; the remaining counts must keep each member
/// of `T` within `n` misses and push every other hypothesis past `n`. The best
/// count vector for each `T` is found by branch and bound. Among optimal
/// vectors the lexicographically smallest (by pattern) is reported.
pub fn nc_dim_report(class: &FiniteClass, n: usize) -> Result<NcReport, DimError> {
    let zero = NcReport { n, value: DimValue::Finite(0), family: Vec::new(), witness: Vec::new() };
    if class.is_empty() {
        return Ok(zero);
    }
    // Every nonempty sub-family then has an infinite intersection.
    if !class.common_intersection()?.is_finite() {
        return Ok(zero);
    }
    let cells = cell_decomposition(class)?;
    let q = class.len();
    let full = (1u32 << q) - 1;
    let sizes: Vec<Option<usize>> = cells
        .iter()
        .map(|c| match c.size {
            Cardinality::Finite(k) => Some(k),
            Cardinality::Infinite => None,
        })
        .collect();

    let mut best: Option<(usize, Vec<usize>, u32)> = None;
    for t in 1..=full {
        let Some(counts) = solve_family(&sizes, q, t, n) else {
            continue;
        };
        let d: usize = counts.iter().sum();
        if d == 0 {
            continue;
        }
        let better = match &best {
            None => true,
            Some((bd, bc, _)) => d > *bd || (d == *bd && counts < *bc),
        };
        if better {
            best = Some((d, counts, t));
        }
    }
    let Some((d, counts, t)) = best else {
        return Ok(zero);
    };
    let mut witness: Vec<Element> = cells.iter().zip(&counts).flat_map(|(cell, &c)| cell.region.enumerate(c)).collect();
    witness.sort();
    Ok(NcReport { n, value: DimValue::Finite(d), family: (0..q).filter(|&i| t >> i & 1 == 1).collect(), witness })
}

struct Var {
    cell: usize,
    ub: usize,
    /// Members of `T` missing this cell (indices into the budget vector).
    t_hits: Vec<usize>,
    /// Non-members missing this cell (indices into the need vector).
    g_hits: Vec<usize>,
}

struct Search<'a> {
    vars: &'a [Var],
    budget: Vec<usize>,
    need: Vec<i64>,
    /// Minimum `t_hits` length over vars `idx..`.
    kmin_suffix: Vec<usize>,
    values: Vec<usize>,
    best: Option<usize>,
}

impl Search<'_> {
    fn cap(&self, v: &Var) -> usize {
        v.t_hits.iter().map(|&h| self.budget[h]).min().unwrap_or(usize::MAX).min(v.ub)
    }

    fn bound(&self, idx: usize) -> usize {
        if idx == self.vars.len() {
            return 0;
        }
        let caps: usize = self.vars[idx..].iter().map(|v| self.cap(v)).sum();
        let pool: usize = self.budget.iter().sum();
        caps.min(pool / self.kmin_suffix[idx])
    }

    fn feasible(&self, idx: usize) -> bool {
        self.need.iter().enumerate().all(|(g, &need)| {
            need <= 0
                || self.vars[idx..].iter().filter(|v| v.g_hits.contains(&g)).map(|v| self.cap(v) as i64).sum::<i64>()
                    >= need
        })
    }

    fn apply(&mut self, idx: usize, c: usize, sign: i64) {
        let v = &self.vars[idx];
        for &h in &v.t_hits {
            if sign > 0 {
                self.budget[h] -= c;
            } else {
                self.budget[h] += c;
            }
        }
        for &g in &v.g_hits {
            self.need[g] -= sign * c as i64;
        }
    }

    fn maximize(&mut self, idx: usize, acc: usize) {
        if !self.feasible(idx) {
            return;
        }
        if idx == self.vars.len() {
            self.best = Some(self.best.map_or(acc, |b| b.max(acc)));
            return;
        }
        if let Some(b) = self.best {
            if acc + self.bound(idx) <= b {
                return;
            }
        }
        for c in (0..=self.cap(&self.vars[idx])).rev() {
            self.apply(idx, c, 1);
            self.maximize(idx + 1, acc + c);
            self.apply(idx, c, -1);
        }
    }

    fn smallest(&mut self, idx: usize, acc: usize, target: usize) -> bool {
        if !self.feasible(idx) {
            return false;
        }
        if idx == self.vars.len() {
            return acc == target;
        }
        if acc + self.bound(idx) < target {
            return false;
        }
        for c in 0..=self.cap(&self.vars[idx]) {
            self.apply(idx, c, 1);
            let found = self.smallest(idx + 1, acc + c, target);
            self.apply(idx, c, -1);
            if found {
                self.values[idx] = c;
                return true;
            }
        }
        false
    }
}

/// Best count vector (indexed by pattern) whose consistent family is exactly `t`.
fn solve_family(sizes: &[Option<usize>], q: usize, t: u32, n: usize) -> Option<Vec<usize>> {
    let full = (1u32 << q) - 1;
    let mut counts = vec![0usize; sizes.len()];
    let t_members: Vec<usize> = (0..q).filter(|&i| t >> i & 1 == 1).collect();
    let g_members: Vec<usize> = (0..q).filter(|&i| t >> i & 1 == 0).collect();
    let mut need: Vec<i64> = vec![n as i64 + 1; g_members.len()];
    let mut vars = Vec::new();
    for s in 0..=full {
        if s & t == t {
            // Inside ⋂ T: finite because ⋂ T is.
            let size = sizes[s as usize]?;
            counts[s as usize] = size;
            for (gi, &g) in g_members.iter().enumerate() {
                if s >> g & 1 == 0 {
                    need[gi] -= size as i64;
                }
            }
            continue;
        }
        let ub = match sizes[s as usize] {
            Some(0) => continue,
            Some(k) => k.min(n),
            None => n,
        };
        vars.push(Var {
            cell: s as usize,
            ub,
            t_hits: t_members.iter().enumerate().filter(|&(_, &h)| s >> h & 1 == 0).map(|(i, _)| i).collect(),
            g_hits: g_members.iter().enumerate().filter(|&(_, &g)| s >> g & 1 == 0).map(|(i, _)| i).collect(),
        });
    }
    let mut kmin_suffix = vec![usize::MAX; vars.len() + 1];
    for i in (0..vars.len()).rev() {
        kmin_suffix[i] = kmin_suffix[i + 1].min(vars[i].t_hits.len());
    }
    let mut search = Search {
        vars: &vars,
        budget: vec![n; t_members.len()],
        need,
        kmin_suffix,
        values: vec![0; vars.len()],
        best: None,
    };
    search.maximize(0, 0);
    let target = search.best?;
    let found = search.smallest(0, 0, target);
    debug_assert!(found);
    for (v, &c) in vars.iter().zip(&search.values) {
        counts[v.cell] = c;
    }
    Some(counts)
}

/// Reference computation of `NC_n` straight from the definition.
///
/// Enumerates every count vector over the cells with total at most `bound`,
/// realizes it with the smallest elements of each cell and evaluates the
/// closure directly. Returns `AtLeast(bound)` when a witness of size `bound`
/// exists, so callers should pass a bound above the expected value.
pub fn nc_dim_oracle(class: &FiniteClass, n: usize, bound: usize) -> Result<DimValue, DimError> {
    let cells = cell_decomposition(class)?;
    let pools: Vec<Vec<Element>> = cells.iter().map(|c| c.region.enumerate(bound)).filter(|p| !p.is_empty()).collect();
    let mut memo: BTreeMap<Vec<usize>, bool> = BTreeMap::new();
    let mut best = 0;
    let mut counts = vec![0usize; pools.len()];
    oracle_walk(class, n, &pools, 0, bound, &mut counts, &mut memo, &mut best);
    Ok(if best >= bound && bound > 0 { DimValue::AtLeast(bound) } else { DimValue::Finite(best) })
}

#[allow(clippy::too_many_arguments)]
fn oracle_walk(
    class: &FiniteClass,
    n: usize,
    pools: &[Vec<Element>],
    idx: usize,
    left: usize,
    counts: &mut Vec<usize>,
    memo: &mut BTreeMap<Vec<usize>, bool>,
    best: &mut usize,
) {
    if idx == pools.len() {
        let d: usize = counts.iter().sum();
        if d <= *best {
            return;
        }
        let prefix: BTreeSet<Element> =
            pools.iter().zip(counts.iter()).flat_map(|(p, &c)| p[..c].iter().copied()).collect();
        let family = consistent_members(class, &prefix, n);
        let finite =
            *memo.entry(family).or_insert_with(|| finite_closure(class, &prefix, n).is_some_and(|c| c.is_finite()));
        if finite {
            *best = d;
        }
        return;
    }
    for c in 0..=left.min(pools[idx].len()) {
        counts[idx] = c;
        oracle_walk(class, n, pools, idx + 1, left - c, counts, memo, best);
    }
    counts[idx] = 0;
}

/// `NC_n` for any class: exact for finite classes, a budgeted witness search
/// for indexed families. The search returns `AtLeast(d)` for the largest
/// witnessed `d <= budget`, or `Finite(0)` when no candidate prefix is a witness.
pub fn nc_dim_budgeted(class: &HypothesisClass, n: usize, budget: usize) -> Result<DimValue, DimError> {
    match class {
        HypothesisClass::Finite(c) => nc_dim_exact(c, n),
        HypothesisClass::Indexed(f) => {
            let mut witnessed = 0;
            for d in 1..=budget {
                let hit = f.witness_prefixes(d).iter().any(|p| {
                    let set = distinct(p);
                    set.len() == d && closure(class, &set, n).is_some_and(|c| c.is_finite())
                });
                if hit {
                    witnessed = d;
                }
            }
            Ok(if witnessed == 0 { DimValue::Finite(0) } else { DimValue::AtLeast(witnessed) })
        }
    }
}

/// Noiseless closure dimension `NC_0`.
pub fn closure_dim(class: &HypothesisClass, budget: usize) -> Result<DimValue, DimError> {
    nc_dim_budgeted(class, 0, budget)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapValue {
    Finite(i64),
    /// Largest gap observed; the supremum is unbounded.
    AtLeast(i64),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GapReport {
    /// `NC_n - n` for `n = 0..=n_max`.
    pub gaps: Vec<i64>,
    pub value: GapValue,
}

/// `sup_n (NC_n - n)`. The supremum is finite exactly when the common
/// intersection of the class is infinite (then every `NC_n` is 0); otherwise
/// `NC_n >= n + |⋂ H|` grows and the report carries the largest gap seen.
pub fn sup_gap_check(class: &FiniteClass, n_max: usize) -> Result<GapReport, DimError> {
    let mut gaps = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let DimValue::Finite(v) = nc_dim_exact(class, n)? else {
            unreachable!("finite classes have finite dimensions")
        };
        gaps.push(v as i64 - n as i64);
    }
    let max = gaps.iter().copied().max().unwrap_or(0);
    let value = if class.common_intersection()?.is_finite() { GapValue::AtLeast(max) } else { GapValue::Finite(max) };
    Ok(GapReport { gaps, value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::{parity, random_finite_class, union_demo, PrimePowers};
    use std::sync::Arc;

    #[test]
    fn parity_dimensions() {
        let c = parity();
        for n in 0..5 {
            assert_eq!(nc_dim_exact(&c, n).unwrap(), DimValue::Finite(2 * n), "n={n}");
        }
        let r = nc_dim_report(&c, 1).unwrap();
        assert_eq!(r.witness, vec![Element::new(1, 0), Element::new(2, 0)]);
    }

    #[test]
    fn parity_closure_cases() {
        let c = HypothesisClass::Finite(parity());
        let e0 = distinct(&[Element::new(1, 0)]);
        let e = CountableSet::from_atoms(c.universe(), [1]).unwrap();
        assert_eq!(closure(&c, &e0, 0), Some(e));
        let both = distinct(&[Element::new(1, 0), Element::new(2, 0)]);
        assert_eq!(closure(&c, &both, 0), None);
        assert_eq!(closure(&c, &both, 1), Some(CountableSet::empty(c.universe())));
    }

    #[test]
    fn prime_powers_first_primes_close_to_nothing() {
        let c = HypothesisClass::Indexed(Arc::new(PrimePowers::new()));
        for d in 1..=16 {
            let xs = distinct(&(1..=d).map(PrimePowers::p).collect::<Vec<_>>());
            let cl = closure(&c, &xs, 1).unwrap();
            assert!(cl.is_empty(), "d={d}");
        }
        assert_eq!(closure_dim(&c, 16).unwrap(), DimValue::Finite(0));
        assert_eq!(nc_dim_budgeted(&c, 1, 16).unwrap(), DimValue::AtLeast(16));
    }

    #[test]
    fn prefix_closure_fast_path_agrees() {
        let c = HypothesisClass::Indexed(Arc::new(PrimePowers::new()));
        let xs = distinct(&[
            PrimePowers::p(2),
            PrimePowers::p(5),
            Element::new(4, 1),
            Element::new(4, 7),
            Element::new(9, 0),
        ]);
        for i in 1..10 {
            for n in 0..3 {
                assert_eq!(prefix_closure(&c, i, &xs, n), finite_closure(&c.prefix(i), &xs, n), "i={i} n={n}");
            }
        }
    }

    #[test]
    fn shortcut_for_infinite_common_intersection() {
        let c = union_demo().subclass(&["g1", "g2"]).unwrap();
        assert_eq!(nc_dim_exact(&c, 3).unwrap(), DimValue::Finite(0));
        assert_eq!(sup_gap_check(&c, 3).unwrap().value, GapValue::Finite(0));
    }

    #[test]
    fn exact_matches_oracle_on_small_classes() {
        for seed in 0..12 {
            let c = random_finite_class(seed, 1 + (seed as usize % 3), 1 + (seed as usize / 3) % 4);
            for n in 0..3 {
                let bound = n * c.len() + d_max(&c).unwrap() + 2;
                assert_eq!(nc_dim_exact(&c, n).unwrap(), nc_dim_oracle(&c, n, bound).unwrap(), "seed {seed} n {n}");
            }
        }
    }

    #[test]
    fn witness_realizes_the_value() {
        let c = union_demo();
        for n in 0..3 {
            let r = nc_dim_report(&c, n).unwrap();
            let DimValue::Finite(v) = r.value else { panic!() };
            assert_eq!(r.witness.len(), v);
            if v > 0 {
                let cl = finite_closure(&c, &distinct(&r.witness), n).unwrap();
                assert!(cl.is_finite());
                assert_eq!(consistent_members(&c, &distinct(&r.witness), n), r.family);
            }
        }
    }
}
