//! Example streams and adversarial constructions.
//!
//! A stream is an explicit head followed by a lazily generated tail of
//! positive examples, so any finite horizon can be materialized
//! deterministically.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::{IteratorRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::classes::{parity, ClassError, FiniteClass, Hypothesis, HypothesisClass};
use crate::closure::{self, distinct, nc_dim_report, ConsistentFamily, DimError, DimValue, DEFAULT_BUDGET};
use crate::generators::Generator;
use crate::setalg::{CountableSet, Element};

/// Shuffle window for noisy-bounded streams.
pub const BOUNDED_WINDOW: usize = 8;
/// Shuffle window for noisy enumerations; keeps the `k`-th element by round `2k + m`.
pub const ENUMERATION_WINDOW: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdversaryError {
    #[error("no witness: NC_{n} = {dim} is below {d}")]
    NoWitness { n: usize, d: usize, dim: DimValue },
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("inconclusive: {0}")]
    Inconclusive(String),
    #[error("noise element {0} lies in the support")]
    InvalidNoise(u64),
    #[error(transparent)]
    Class(#[from] ClassError),
    #[error(transparent)]
    Dim(#[from] DimError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StreamKind {
    Plain,
    NoisyBounded { n: usize },
    NoisyEnumeration { noise: usize },
    Adversarial { construction: String },
}

#[derive(Clone, Debug)]
struct Positives {
    set: CountableSet,
    skip: BTreeSet<Element>,
    window: usize,
    seed: u64,
}

#[derive(Clone, Debug)]
pub struct Stream {
    pub hypothesis: String,
    pub kind: StreamKind,
    pub seed: Option<u64>,
    pub flags: Vec<String>,
    support: CountableSet,
    head: Vec<Element>,
    /// Noise placed after the head, by 1-based round.
    inserts: BTreeMap<usize, Element>,
    positives: Positives,
}

impl Stream {
    /// The target's support in canonical order, shuffled in windows of `window`.
    pub fn plain(h: &Hypothesis, window: usize, seed: u64) -> Self {
        Stream {
            hypothesis: h.id.clone(),
            kind: StreamKind::Plain,
            seed: Some(seed),
            flags: Vec::new(),
            support: h.support.clone(),
            head: Vec::new(),
            inserts: BTreeMap::new(),
            positives: Positives { set: h.support.clone(), skip: BTreeSet::new(), window: window.max(1), seed },
        }
    }

    /// `head` followed by unused support elements in canonical order.
    pub fn with_head(h: &Hypothesis, head: Vec<Element>, construction: &str) -> Self {
        let skip = head.iter().copied().collect();
        Stream {
            hypothesis: h.id.clone(),
            kind: StreamKind::Adversarial { construction: construction.to_string() },
            seed: None,
            flags: Vec::new(),
            support: h.support.clone(),
            head,
            inserts: BTreeMap::new(),
            positives: Positives { set: h.support.clone(), skip, window: 1, seed: 0 },
        }
    }

    pub fn support(&self) -> &CountableSet {
        &self.support
    }

    pub fn head(&self) -> &[Element] {
        &self.head
    }

    /// The first `horizon` items.
    pub fn items(&self, horizon: usize) -> Vec<Element> {
        let p = &self.positives;
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
        let mut source = p.set.iter().filter(|x| !p.skip.contains(x));
        let mut buffer: VecDeque<Element> = VecDeque::new();
        let mut out = Vec::with_capacity(horizon);
        for t in 1..=horizon {
            if t <= self.head.len() {
                out.push(self.head[t - 1]);
            } else if let Some(&x) = self.inserts.get(&t) {
                out.push(x);
            } else {
                if buffer.is_empty() {
                    let mut chunk: Vec<Element> = source.by_ref().take(p.window).collect();
                    chunk.shuffle(&mut rng);
                    buffer.extend(chunk);
                }
                out.push(buffer.pop_front().expect("supports are infinite"));
            }
        }
        out
    }

    /// Rounds up to `horizon` whose item lies outside the target's support.
    pub fn noise_positions(&self, horizon: usize) -> Vec<usize> {
        self.items(horizon)
            .iter()
            .enumerate()
            .filter(|(_, x)| !self.support.contains(**x))
            .map(|(i, _)| i + 1)
            .collect()
    }
}

/// Up to `k` distinct elements outside the support, drawn from its first `2k + 4` non-members.
pub fn pick_noise(h: &Hypothesis, k: usize, seed: u64) -> Vec<Element> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool = h.support.complement().enumerate(2 * k + 4);
    pool.shuffle(&mut rng);
    pool.truncate(k);
    pool
}

/// A stream for `h` with exactly `n` negatives (fewer only when the
/// complement of the support is that small), all within the first `4n + 8` rounds.
pub fn make_noisy_stream(h: &Hypothesis, n: usize, seed: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut negatives = h.support.complement().enumerate(2 * n + 4);
    negatives.shuffle(&mut rng);
    negatives.truncate(n);
    let mut flags = Vec::new();
    if negatives.len() < n {
        flags.push(
            if negatives.is_empty() { "no-negatives-available" } else { "fewer-negatives-available" }.to_string(),
        );
    }
    let mut positions = (1..=4 * n + 8).choose_multiple(&mut rng, negatives.len());
    positions.sort_unstable();
    let mut stream = Stream::plain(h, BOUNDED_WINDOW, rng.gen());
    stream.kind = StreamKind::NoisyBounded { n };
    stream.seed = Some(seed);
    stream.flags = flags;
    stream.inserts = positions.into_iter().zip(negatives).collect();
    stream
}

/// Enumerates the support with shuffle window 2 and places `noise` at seeded
/// positions within the first `2m` rounds, `m = noise.len()`.
pub fn make_noisy_enumeration(h: &Hypothesis, noise: &[Element], seed: u64) -> Result<Stream, AdversaryError> {
    if let Some(&x) = noise.iter().find(|&&x| h.support.contains(x)) {
        return Err(AdversaryError::InvalidNoise(x.code()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = noise.len();
    let mut positions = (1..=2 * m).choose_multiple(&mut rng, m);
    positions.sort_unstable();
    let mut stream = Stream::plain(h, ENUMERATION_WINDOW, rng.gen());
    stream.kind = StreamKind::NoisyEnumeration { noise: m };
    stream.seed = Some(seed);
    stream.inserts = positions.into_iter().zip(noise.iter().copied()).collect();
    Ok(stream)
}

#[derive(Clone, Debug)]
pub struct AdversaryPlan {
    pub stream: Stream,
    pub target: String,
    pub predicted_mistake_round: usize,
    /// Steps of the construction in order, for transcripts and diagnostics.
    pub log: Vec<String>,
}

fn describe(xs: &[Element], h: &CountableSet) -> String {
    let u = h.universe();
    xs.iter().map(|&x| u.describe(x)).collect::<Vec<_>>().join(" ")
}

/// Forces a mistake at round `max(d, k)` against a class whose common
/// intersection has `k < ∞` elements: show the intersection, pad with fresh
/// elements, then target a hypothesis that excludes the generator's guess.
pub fn ung_necessity_adversary(
    class: &FiniteClass,
    g: &dyn Generator,
    d: usize,
) -> Result<AdversaryPlan, AdversaryError> {
    let inter = class.common_intersection()?;
    if !inter.is_finite() {
        return Err(AdversaryError::PreconditionViolated("common intersection is infinite".into()));
    }
    let mut log = Vec::new();
    let mut head = inter.enumerate(usize::MAX);
    let k = head.len();
    if d < k {
        log.push(format!("d-too-small: d = {d} < |common intersection| = {k}; forcing at round {k}"));
    }
    let full = CountableSet::full(class.universe());
    let mut used: BTreeSet<Element> = head.iter().copied().collect();
    while head.len() < d {
        let x = full.first_outside(&used).expect("infinite universe");
        used.insert(x);
        head.push(x);
    }
    log.push(format!("prefix: {}", describe(&head, &inter)));
    let guess = g.guess(&head).element;
    let seen = distinct(&head);
    let target = if seen.contains(&guess) {
        log.push(format!("guess {} repeats a shown element", guess.code()));
        &class.hypotheses()[0]
    } else {
        class
            .hypotheses()
            .iter()
            .find(|h| !h.support.contains(guess))
            .expect("an unseen guess lies outside the common intersection")
    };
    log.push(format!("guess {} excluded by {}", guess.code(), target.id));
    let round = head.len();
    Ok(AdversaryPlan {
        stream: Stream::with_head(target, head, "ung-necessity"),
        target: target.id.clone(),
        predicted_mistake_round: round,
        log,
    })
}

/// Forces a mistake at round `d* + q` against a class with `NC_n >= d`:
/// show a witness of `d*` distinct elements, then the `q` remaining elements
/// of its finite closure, then follow a consistent hypothesis that excludes the guess.
pub fn nc_necessity_adversary(
    class: &HypothesisClass,
    n: usize,
    d: usize,
    g: &dyn Generator,
) -> Result<AdversaryPlan, AdversaryError> {
    let mut log = Vec::new();
    let witness: Vec<Element> = match class {
        HypothesisClass::Finite(c) => {
            let report = nc_dim_report(c, n)?;
            match report.value {
                DimValue::Finite(v) if v >= d && v > 0 => report.witness,
                dim => return Err(AdversaryError::NoWitness { n, d, dim }),
            }
        }
        HypothesisClass::Indexed(f) => (d..=d + DEFAULT_BUDGET)
            .flat_map(|size| f.witness_prefixes(size))
            .find(|p| {
                let set = distinct(p);
                set.len() == p.len() && closure::closure(class, &set, n).is_some_and(|c| c.is_finite())
            })
            .ok_or(AdversaryError::NoWitness { n, d, dim: DimValue::Finite(0) })?,
    };
    let witness_set = distinct(&witness);
    let cl = closure::closure(class, &witness_set, n).expect("witness closure is not bottom");
    let remainder: Vec<Element> = cl.iter().filter(|x| !witness_set.contains(x)).collect();
    log.push(format!("witness ({}): {}", witness.len(), describe(&witness, &cl)));
    log.push(format!("closure remainder ({}): {}", remainder.len(), describe(&remainder, &cl)));
    let mut head = witness.clone();
    head.extend(remainder);
    let guess = g.guess(&head).element;
    let family = closure::consistent_family(class, &witness_set, n);
    let target: Hypothesis = if distinct(&head).contains(&guess) {
        log.push(format!("guess {} repeats a shown element", guess.code()));
        first_member(class, &family)
    } else {
        match (&family, class) {
            (ConsistentFamily::Members(m), HypothesisClass::Finite(c)) => m
                .iter()
                .map(|&i| c.hypotheses()[i].clone())
                .find(|h| !h.support.contains(guess))
                .expect("an unseen guess outside the closure is excluded by a consistent hypothesis"),
            (ConsistentFamily::AllExcept(excluded), HypothesisClass::Indexed(f)) => {
                let i = f
                    .misfits(&BTreeSet::from([guess]))
                    .into_keys()
                    .find(|i| !excluded.contains(i))
                    .expect("an unseen guess outside the closure is excluded by a consistent hypothesis");
                class.hypothesis(&f.hypothesis_id(i)).expect("valid index")
            }
            _ => unreachable!("family kind follows class kind"),
        }
    };
    log.push(format!("guess {} excluded by {}", guess.code(), target.id));
    let round = head.len();
    Ok(AdversaryPlan {
        stream: Stream::with_head(&target, head, "nc-necessity"),
        target: target.id,
        predicted_mistake_round: round,
        log,
    })
}

fn first_member(class: &HypothesisClass, family: &ConsistentFamily) -> Hypothesis {
    match (family, class) {
        (ConsistentFamily::Members(m), HypothesisClass::Finite(c)) => c.hypotheses()[m[0]].clone(),
        (ConsistentFamily::AllExcept(e), HypothesisClass::Indexed(f)) => {
            let i = (1..).find(|i| !e.contains(i)).expect("cofinite family");
            class.hypothesis(&f.hypothesis_id(i)).expect("valid index")
        }
        _ => unreachable!("family kind follows class kind"),
    }
}

/// Forces a mistake at round `2d + q` for a family `F` with `|⋂ F| = q` and
/// infinite `⋂ (F \ {f})`: `d` elements only `f` lacks, `d` elements of `f`
/// outside `⋂ F`, then all of `⋂ F`.
pub fn altung_adversary(
    family: &FiniteClass,
    f: &str,
    d: usize,
    g: &dyn Generator,
) -> Result<AdversaryPlan, AdversaryError> {
    let f_h = family.get(f).ok_or_else(|| ClassError::UnknownHypothesis(f.to_string()))?;
    let inter = family.common_intersection()?;
    if !inter.is_finite() {
        return Err(AdversaryError::PreconditionViolated("intersection of the family is infinite".into()));
    }
    let rest = CountableSet::intersect_all(family.hypotheses().iter().filter(|h| h.id != f).map(|h| &h.support))
        .map_err(ClassError::from)?
        .unwrap_or_else(|| CountableSet::full(family.universe()));
    if rest.is_finite() {
        return Err(AdversaryError::PreconditionViolated(format!("intersection without {f} is finite")));
    }
    let only_rest = rest.difference(&f_h.support).map_err(ClassError::from)?;
    let only_f = f_h.support.difference(&inter).map_err(ClassError::from)?;
    let mut head = only_rest.enumerate(d);
    head.extend(only_f.enumerate(d));
    head.extend(inter.iter());
    let mut log = vec![format!("prefix: {}", describe(&head, &inter))];
    let guess = g.guess(&head).element;
    let target = if distinct(&head).contains(&guess) {
        log.push(format!("guess {} repeats a shown element", guess.code()));
        f_h
    } else {
        family
            .hypotheses()
            .iter()
            .find(|h| !h.support.contains(guess))
            .expect("an unseen guess lies outside the family intersection")
    };
    log.push(format!("guess {} excluded by {}", guess.code(), target.id));
    let round = head.len();
    Ok(AdversaryPlan {
        stream: Stream::with_head(target, head, "altung"),
        target: target.id.clone(),
        predicted_mistake_round: round,
        log,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParityCase {
    FinitelyManyEven,
    FinitelyManyOdd,
    BothInfinite,
}

/// Probes `g` on the universe in code order (`E.0, O.0, E.1, ...`) and picks
/// a parity on which it errs after at least `d` examples of that parity.
///
/// If one parity is missing from the second half of the probe window, the
/// target is that parity and the mistake comes at the start of the final run
/// without it (no earlier than round `2d`). Otherwise, if both parities are
/// guessed at least `2d` times, the target is the first parity the generator
/// leaves at some round `>= 2d`.
pub fn parity_adversary(
    g: &dyn Generator,
    d: usize,
    probe_budget: usize,
) -> Result<(AdversaryPlan, ParityCase), AdversaryError> {
    if probe_budget < 2 * d || probe_budget == 0 {
        return Err(AdversaryError::PreconditionViolated(format!(
            "probe budget {probe_budget} is below 2d = {}",
            2 * d
        )));
    }
    let class = parity();
    let (h_e, h_o) = (&class.hypotheses()[0], &class.hypotheses()[1]);
    let ground = CountableSet::full(class.universe()).enumerate(probe_budget);
    // guesses[i - 1] is the guess at round i.
    let guesses: Vec<Element> = (1..=probe_budget).map(|i| g.guess(&ground[..i]).element).collect();
    let in_e = |i: usize| h_e.support.contains(guesses[i - 1]);
    let in_o = |i: usize| h_o.support.contains(guesses[i - 1]);
    let half = probe_budget / 2;
    let mut log = vec![format!("probed {probe_budget} rounds")];
    let last_round_with = |pred: &dyn Fn(usize) -> bool| (1..=probe_budget).rev().find(|&i| pred(i));
    let late_e = (half + 1..=probe_budget).any(in_e);
    let late_o = (half + 1..=probe_budget).any(in_o);
    let (target, case, round) = if !late_e || !late_o {
        let (target, case, pred): (&Hypothesis, ParityCase, &dyn Fn(usize) -> bool) = if !late_e {
            (h_e, ParityCase::FinitelyManyEven, &in_e)
        } else {
            (h_o, ParityCase::FinitelyManyOdd, &in_o)
        };
        let p = last_round_with(pred).map_or(1, |i| i + 1);
        (target, case, p.max(2 * d))
    } else {
        let count_e = (1..=probe_budget).filter(|&i| in_e(i)).count();
        let count_o = (1..=probe_budget).filter(|&i| in_o(i)).count();
        if count_e < 2 * d || count_o < 2 * d {
            return Err(AdversaryError::Inconclusive(format!(
                "both parities appear late but only {count_e} even and {count_o} odd guesses"
            )));
        }
        let leave = |pred: &dyn Fn(usize) -> bool| ((2 * d).max(1)..=probe_budget).find(|&i| !pred(i));
        match (leave(&in_e), leave(&in_o)) {
            (Some(p), _) => (h_e, ParityCase::BothInfinite, p),
            (None, Some(p)) => (h_o, ParityCase::BothInfinite, p),
            (None, None) => {
                return Err(AdversaryError::Inconclusive("no round leaves either parity".into()));
            }
        }
    };
    log.push(format!("case {case:?}: target {} mistake at round {round}", target.id));
    let head = ground[..round].to_vec();
    Ok((
        AdversaryPlan {
            stream: Stream::with_head(target, head, "parity"),
            target: target.id.clone(),
            predicted_mistake_round: round,
            log,
        },
        case,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::{builtin, union_demo};
    use crate::generators::{build_generator, Trivial};

    #[test]
    fn noisy_stream_has_exact_noise() {
        let c = parity();
        for seed in 0..20 {
            for n in 0..4 {
                let s = make_noisy_stream(&c.hypotheses()[1], n, seed);
                let noise = s.noise_positions(100);
                assert_eq!(noise.len(), n);
                assert!(noise.iter().all(|&p| p <= 4 * n + 8));
                assert_eq!(s.items(100), s.items(100));
            }
        }
    }

    #[test]
    fn noisy_enumeration_rejects_support_noise() {
        let c = parity();
        let h = &c.hypotheses()[0];
        assert_eq!(
            make_noisy_enumeration(h, &[Element::new(1, 3)], 0).unwrap_err(),
            AdversaryError::InvalidNoise(Element::new(1, 3).code())
        );
    }

    #[test]
    fn noisy_enumeration_keeps_order_bound() {
        let c = union_demo();
        for seed in 0..10 {
            let h = &c.hypotheses()[seed as usize % 4];
            let noise = pick_noise(h, 3, seed);
            let s = make_noisy_enumeration(h, &noise, seed).unwrap();
            let items = s.items(120);
            let canonical = h.support.enumerate(40);
            for (k, x) in canonical.iter().enumerate() {
                let pos = items.iter().position(|y| y == x).unwrap() + 1;
                assert!(pos <= 2 * (k + 1) + noise.len());
            }
            assert_eq!(s.noise_positions(120).len(), noise.len());
        }
    }

    #[test]
    fn ung_forces_mistake_on_parity() {
        let c = parity();
        let g = Trivial::new(&c.subclass(&["h_e"]).unwrap()).unwrap();
        let plan = ung_necessity_adversary(&c, &g, 2).unwrap();
        assert_eq!(plan.predicted_mistake_round, 2);
        assert_eq!(plan.target, "h_o");
    }

    #[test]
    fn altung_requires_finite_family_intersection() {
        let c = union_demo();
        let g = build_generator("und", &HypothesisClass::Finite(c.clone())).unwrap();
        let f = c.subclass(&["g1", "g2"]).unwrap();
        assert!(matches!(altung_adversary(&f, "g2", 1, g.as_ref()), Err(AdversaryError::PreconditionViolated(_))));
        let f = c.subclass(&["g1", "g4"]).unwrap();
        let plan = altung_adversary(&f, "g4", 2, g.as_ref()).unwrap();
        assert_eq!(plan.predicted_mistake_round, 6);
    }

    #[test]
    fn nc_necessity_without_witness() {
        let c = builtin("union_demo").unwrap();
        let c = HypothesisClass::Finite(c.as_finite().unwrap().subclass(&["g1", "g2"]).unwrap());
        let g = build_generator("und", &c).unwrap();
        assert!(matches!(nc_necessity_adversary(&c, 1, 2, g.as_ref()), Err(AdversaryError::NoWitness { .. })));
    }
}
