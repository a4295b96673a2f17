//! Property tests against brute-force models evaluated code by code.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use proptest::prelude::*;

use genlab_core::classes::{parse_class_spec, random_finite_class, serialize_class_spec, HypothesisClass};
use genlab_core::closure::{finite_class_bound, nc_dim_exact, nc_dim_oracle, DimValue};
use genlab_core::setalg::{AtomSet, Cardinality, CountableSet, Element, Universe};

/// Codes checked by the models. Every explicit element below has a smaller code.
const WINDOW: u64 = 600;

#[derive(Clone, Debug)]
struct Leaf {
    cofinite: bool,
    atoms: BTreeSet<u64>,
    minus: Vec<(u64, u64)>,
    plus: Vec<(u64, u64)>,
}

#[derive(Clone, Debug)]
enum Expr {
    Leaf(Leaf),
    Inter(Box<Expr>, Box<Expr>),
    Union(Box<Expr>, Box<Expr>),
    Diff(Box<Expr>, Box<Expr>),
    Compl(Box<Expr>),
}

fn universe() -> Arc<Universe> {
    Universe::unbounded(BTreeMap::new(), None)
}

fn leaf() -> impl Strategy<Value = Leaf> {
    let elem = (1u64..=6, 0u64..=6);
    (
        any::<bool>(),
        prop::collection::btree_set(1u64..=5, 0..4),
        prop::collection::vec(elem.clone(), 0..5),
        prop::collection::vec(elem, 0..5),
    )
        .prop_map(|(cofinite, atoms, minus, plus)| Leaf { cofinite, atoms, minus, plus })
}

fn expr() -> impl Strategy<Value = Expr> {
    leaf().prop_map(Expr::Leaf).prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Inter(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Union(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Diff(Box::new(a), Box::new(b))),
            inner.prop_map(|a| Expr::Compl(Box::new(a))),
        ]
    })
}

fn element(&(a, j): &(u64, u64)) -> Element {
    Element::new(a, j)
}

fn build(e: &Expr, u: &Arc<Universe>) -> CountableSet {
    match e {
        Expr::Leaf(l) => {
            let atoms =
                if l.cofinite { AtomSet::CofiniteExcluding(l.atoms.clone()) } else { AtomSet::Finite(l.atoms.clone()) };
            CountableSet::new(u.clone(), atoms, l.minus.iter().map(element), l.plus.iter().map(element)).unwrap()
        }
        Expr::Inter(a, b) => build(a, u).intersect(&build(b, u)).unwrap(),
        Expr::Union(a, b) => build(a, u).union(&build(b, u)).unwrap(),
        Expr::Diff(a, b) => build(a, u).difference(&build(b, u)).unwrap(),
        Expr::Compl(a) => build(a, u).complement(),
    }
}

/// Membership of every code below the window, decoding codes by hand.
fn model(e: &Expr) -> Vec<bool> {
    fn decode(code: u64) -> (u64, u64) {
        let mut s = 0;
        while (s + 1) * (s + 2) / 2 <= code {
            s += 1;
        }
        let j = code - s * (s + 1) / 2;
        (s - j, j)
    }
    match e {
        Expr::Leaf(l) => (0..WINDOW)
            .map(|c| {
                let (a, j) = decode(c);
                if a == 0 {
                    return false;
                }
                let included = l.cofinite != l.atoms.contains(&a);
                l.plus.contains(&(a, j)) || (included && !l.minus.contains(&(a, j)))
            })
            .collect(),
        Expr::Inter(a, b) => model(a).iter().zip(model(b)).map(|(x, y)| *x && y).collect(),
        Expr::Union(a, b) => model(a).iter().zip(model(b)).map(|(x, y)| *x || y).collect(),
        Expr::Diff(a, b) => model(a).iter().zip(model(b)).map(|(x, y)| *x && !y).collect(),
        Expr::Compl(a) => model(a).iter().enumerate().map(|(c, x)| decode(c as u64).0 != 0 && !x).collect(),
    }
}

fn members(m: &[bool]) -> Vec<Element> {
    m.iter().enumerate().filter(|(_, &b)| b).map(|(c, _)| Element::from_code(c as u64)).collect()
}

proptest! {
    #[test]
    fn algebra_matches_model(e in expr()) {
        let u = universe();
        let s = build(&e, &u);
        let m = model(&e);
        for (c, &want) in m.iter().enumerate() {
            prop_assert_eq!(s.contains(Element::from_code(c as u64)), want, "code {}", c);
        }
    }

    #[test]
    fn cardinality_and_enumeration_match_model(e in expr()) {
        let s = build(&e, &universe());
        let listed = members(&model(&e));
        match s.cardinality() {
            Cardinality::Finite(k) => {
                prop_assert_eq!(k, listed.len());
                prop_assert_eq!(s.enumerate(usize::MAX), listed.clone());
            }
            Cardinality::Infinite => {
                prop_assert!(!s.atoms().is_empty());
                let k = listed.len().min(20);
                prop_assert_eq!(s.enumerate(k), listed[..k].to_vec());
            }
        }
        let head: Vec<Element> = s.iter().take(20).collect();
        prop_assert_eq!(&head, &s.enumerate(20));
        if head.len() > 5 {
            let seen: BTreeSet<Element> = head[..5].iter().copied().collect();
            prop_assert_eq!(s.first_outside(&seen), Some(head[5]));
        }
    }

    #[test]
    fn canonical_forms_are_unique(a in expr(), b in expr()) {
        let u = universe();
        let (x, y) = (build(&a, &u), build(&b, &u));
        // De Morgan and double complement give structurally equal results.
        prop_assert_eq!(x.union(&y).unwrap().complement(), x.complement().intersect(&y.complement()).unwrap());
        prop_assert_eq!(x.complement().complement(), x.clone());
        prop_assert_eq!(x.difference(&y).unwrap(), x.intersect(&y.complement()).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn class_spec_round_trips(seed in any::<u64>(), q in 1usize..=4, atoms in 1usize..=4) {
        let c = random_finite_class(seed, q, atoms);
        let text = serialize_class_spec(&c).unwrap();
        let HypothesisClass::Finite(back) = parse_class_spec(&text).unwrap() else {
            panic!("finite spec parsed as indexed");
        };
        prop_assert_eq!(back.hypotheses(), c.hypotheses());
        prop_assert_eq!(serialize_class_spec(&back).unwrap(), text);
    }

    #[test]
    fn nc_is_monotone_and_bounded(seed in any::<u64>(), q in 1usize..=3, atoms in 1usize..=4) {
        let c = random_finite_class(seed, q, atoms);
        let mut last = 0;
        for n in 0..=3 {
            let DimValue::Finite(v) = nc_dim_exact(&c, n).unwrap() else { panic!("finite class") };
            prop_assert!(v >= last, "NC_{} = {} < NC_{} = {}", n, v, n - 1, last);
            prop_assert!(v < finite_class_bound(&c, n).unwrap());
            last = v;
        }
    }

    #[test]
    fn exact_matches_oracle(seed in any::<u64>(), q in 1usize..=3, atoms in 1usize..=3, n in 0usize..=2) {
        let c = random_finite_class(seed, q, atoms);
        let bound = finite_class_bound(&c, n).unwrap();
        prop_assert_eq!(nc_dim_exact(&c, n).unwrap(), nc_dim_oracle(&c, n, bound).unwrap());
    }
}
