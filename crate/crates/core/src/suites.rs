//! Seeded verification suites. Each returns a report with a pass flag, the
//! failed checks, and deterministic artifacts (transcripts or value tables)
//! used by the determinism suite.

use std::collections::BTreeSet;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::adversaries::{
    altung_adversary, make_noisy_enumeration, make_noisy_stream, nc_necessity_adversary, parity_adversary, pick_noise,
    ung_necessity_adversary, AdversaryError, AdversaryPlan,
};
use crate::classes::{
    builtin, parity, random_finite_class, union_demo, FiniteClass, Hypothesis, HypothesisClass, PrimePowers,
};
use crate::closure::{self, closure_dim, d_max, distinct, nc_dim_budgeted, nc_dim_exact, nc_dim_oracle, DimValue};
use crate::game::{find_t_star, run_game, Transcript};
use crate::generators::{
    build_generator, roster, AltUng, Generator, Guess, Limit, LimitTrace, NonUniform, Rationale, Trivial, Und,
    UnionLimit,
};
use crate::setalg::{scan_bound, Element, Universe};

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub id: usize,
    pub suite: &'static str,
    pub passed: bool,
    pub checks: usize,
    pub failures: Vec<String>,
    pub elapsed_ms: u128,
    #[serde(skip)]
    pub artifacts: Vec<String>,
}

pub type SuiteFn = fn() -> SuiteReport;

pub const SUITES: [(usize, &str, SuiteFn); 12] = [
    (1, "dim-oracle", dim_oracle),
    (2, "finite-bound", finite_bound),
    (3, "separation", separation),
    (4, "uniform-sufficiency", uniform_sufficiency),
    (5, "uniform-necessity", uniform_necessity),
    (6, "noise-independent", noise_independent),
    (7, "nonuniform", nonuniform),
    (8, "limit", limit),
    (9, "union-limit", union_limit),
    (10, "alt-noise-independent", alt_noise_independent),
    (11, "parity-adversary", parity_adversary_suite),
    (12, "determinism", determinism),
];

pub fn suite_names() -> Vec<&'static str> {
    SUITES.iter().map(|s| s.1).collect()
}

pub fn run_suite(name: &str) -> Option<SuiteReport> {
    SUITES.iter().find(|s| s.1 == name).map(|s| (s.2)())
}

struct Checker {
    id: usize,
    suite: &'static str,
    start: Instant,
    checks: usize,
    failures: Vec<String>,
    artifacts: Vec<String>,
}

impl Checker {
    fn new(id: usize) -> Self {
        Checker {
            id,
            suite: SUITES[id - 1].1,
            start: Instant::now(),
            checks: 0,
            failures: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) -> bool {
        self.checks += 1;
        if !ok {
            self.failures.push(msg());
        }
        ok
    }

    fn fail(&mut self, msg: String) {
        self.checks += 1;
        self.failures.push(msg);
    }

    fn artifact(&mut self, a: String) {
        self.artifacts.push(a);
    }

    fn finish(self) -> SuiteReport {
        SuiteReport {
            id: self.id,
            suite: self.suite,
            passed: self.failures.is_empty() && self.checks > 0,
            checks: self.checks,
            failures: self.failures,
            elapsed_ms: self.start.elapsed().as_millis(),
            artifacts: self.artifacts,
        }
    }
}

/// The 50 seeded random classes (at most 3 hypotheses over at most 4 atoms).
pub fn suite_classes() -> Vec<FiniteClass> {
    (0..50u64).map(|i| random_finite_class(i, 1 + (i % 3) as usize, 1 + ((i / 3) % 4) as usize)).collect()
}

fn prime_powers() -> HypothesisClass {
    builtin("prime_powers").expect("built-in")
}

pub fn dim_oracle() -> SuiteReport {
    let mut c = Checker::new(1);
    for class in suite_classes() {
        let dm = d_max(&class).expect("small class");
        for n in 0..=2 {
            let bound = n * class.len() + dm + 2;
            let exact = nc_dim_exact(&class, n).expect("small class");
            let oracle = nc_dim_oracle(&class, n, bound).expect("small class");
            c.check(exact == oracle, || format!("{} n={n}: exact {exact} oracle {oracle}", class.name()));
            c.artifact(format!("{} n={n} exact={exact} oracle={oracle}", class.name()));
        }
    }
    c.finish()
}

pub fn finite_bound() -> SuiteReport {
    let mut c = Checker::new(2);
    for class in suite_classes() {
        let dm = d_max(&class).expect("small class");
        let mut prev = 0;
        for n in 0..=2 {
            let DimValue::Finite(v) = nc_dim_exact(&class, n).expect("small class") else {
                c.fail(format!("{} n={n}: non-finite value", class.name()));
                continue;
            };
            let bound = n * class.len() + dm + 1;
            c.check(v < bound, || format!("{} n={n}: NC {v} >= bound {bound}", class.name()));
            c.check(v >= prev, || format!("{} n={n}: NC decreased from {prev} to {v}", class.name()));
            prev = v;
            c.artifact(format!("{} n={n} nc={v} bound={bound}", class.name()));
        }
    }
    let par = parity();
    for n in 0..=4 {
        let exact = nc_dim_exact(&par, n).expect("parity");
        let oracle = nc_dim_oracle(&par, n, 2 * n + 2).expect("parity");
        let want = DimValue::Finite(2 * n);
        c.check(exact == want && oracle == want, || format!("parity n={n}: exact {exact} oracle {oracle} want {want}"));
        c.artifact(format!("parity n={n} nc={exact}"));
    }
    c.finish()
}

pub fn separation() -> SuiteReport {
    let mut c = Checker::new(3);
    let pp = prime_powers();
    let cd = closure_dim(&pp, 16).expect("budgeted");
    c.check(cd == DimValue::Finite(0), || format!("closure dimension {cd}"));
    let nc1 = nc_dim_budgeted(&pp, 1, 16).expect("budgeted");
    c.check(nc1 == DimValue::AtLeast(16), || format!("NC_1 {nc1}"));
    c.artifact(format!("closure_dim={cd} nc1={nc1}"));

    let HypothesisClass::Indexed(family) = &pp else { unreachable!("prime_powers is indexed") };
    let bound = scan_bound();
    // Every code below the bound has atom + rank below this, so some
    // hypothesis with a smaller index excludes it.
    let max_index = (1..).find(|&k: &u64| k * (k + 1) / 2 > bound).expect("finite") as usize + 2;
    let supports: Vec<_> = (1..=max_index).map(|i| family.support(i)).collect();
    for d in 1..=16usize {
        let prefix: Vec<Element> = (1..=d).map(PrimePowers::p).collect();
        let set = distinct(&prefix);
        let cl = closure::closure(&pp, &set, 1);
        c.check(cl.as_ref().is_some_and(|s| s.is_empty()), || format!("d={d}: closure {cl:?}"));
        // Independent check from supports alone: each code is excluded by a hypothesis missing at most one prefix element.
        let consistent: Vec<bool> =
            supports.iter().map(|s| prefix.iter().filter(|&&x| !s.contains(x)).count() <= 1).collect();
        let survivors = (0..bound)
            .map(Element::from_code)
            .filter(|&x| x.atom() >= 1)
            .filter(|&x| !supports.iter().zip(&consistent).any(|(s, &ok)| ok && !s.contains(x)))
            .count();
        c.check(survivors == 0, || format!("d={d}: {survivors} codes below {bound} survive"));
        c.artifact(format!("d={d} closure_empty={}", cl.is_some_and(|s| s.is_empty())));
    }
    c.finish()
}

fn hypothesis_of(class: &FiniteClass, rng: &mut ChaCha8Rng) -> Hypothesis {
    class.hypotheses()[rng.gen_range(0..class.len())].clone()
}

pub fn uniform_sufficiency() -> SuiteReport {
    let mut c = Checker::new(4);
    let mut classes = vec![parity()];
    classes.extend(suite_classes());
    let gens: Vec<Und> =
        classes.iter().map(|k| Und::new(HypothesisClass::Finite(k.clone())).expect("small class")).collect();
    let horizon = 100;
    for trial in 0..200u64 {
        let idx = (trial % classes.len() as u64) as usize;
        let n = ((trial / classes.len() as u64 + trial) % 3) as usize;
        let class = &classes[idx];
        let mut rng = ChaCha8Rng::seed_from_u64(trial);
        let h = hypothesis_of(class, &mut rng);
        let stream = make_noisy_stream(&h, n, trial);
        let g = &gens[idx];
        let DimValue::Finite(nc) = g.nc(n) else {
            c.fail(format!("trial {trial}: NC_{n} not finite"));
            continue;
        };
        let threshold = (nc + 1).max(n);
        let tr = run_game(g, &h, &stream, horizon).expect("valid game").with_class(class.name());
        let fired = tr.rounds.iter().any(|r| r.d_t >= threshold);
        c.check(fired, || format!("trial {trial}: threshold {threshold} not reached"));
        for r in tr.rounds.iter().filter(|r| r.d_t >= threshold) {
            c.check(!r.verdict.is_mistake() && !r.rationale.flagged(), || {
                format!(
                    "trial {trial} {} n={n} {}: round {} {:?} {:?}",
                    class.name(),
                    h.id,
                    r.t,
                    r.verdict,
                    r.rationale
                )
            });
        }
        c.artifact(tr.to_jsonl());
    }
    c.finish()
}

/// Plays the plan and checks the generator errs at the predicted round.
fn confirm_plan(
    c: &mut Checker,
    label: &str,
    class: &HypothesisClass,
    plan: &AdversaryPlan,
    g: &dyn Generator,
) -> Option<Transcript> {
    let h = class.hypothesis(&plan.target).expect("target in class");
    let t = plan.predicted_mistake_round;
    let tr = run_game(g, &h, &plan.stream, t + 5).expect("valid game").with_class(class.name()).with_prediction(t);
    let ok = tr.round(t).is_some_and(|r| r.verdict.is_mistake());
    c.check(ok, || format!("{label}: no mistake at predicted round {t} ({:?})", tr.round(t).map(|r| r.verdict)));
    c.artifact(tr.to_jsonl());
    Some(tr)
}

pub fn uniform_necessity() -> SuiteReport {
    let mut c = Checker::new(5);
    let cases: Vec<(HypothesisClass, usize, Vec<usize>)> =
        vec![(HypothesisClass::Finite(parity()), 1, vec![2]), (prime_powers(), 1, vec![3, 5, 8])];
    for (class, n, ds) in cases {
        let gens = roster(&class).expect("roster");
        for d in ds {
            for g in &gens {
                let label = format!("{} n={n} d={d} {}", class.name(), g.name());
                match nc_necessity_adversary(&class, n, d, g.as_ref()) {
                    Ok(plan) => {
                        let h = class.hypothesis(&plan.target).expect("target");
                        let head = plan.stream.head();
                        let noise = head.iter().filter(|&&x| !h.support.contains(x)).count();
                        c.check(noise <= n, || format!("{label}: {noise} noisy examples"));
                        c.check(distinct(head).len() >= d, || format!("{label}: fewer than {d} distinct examples"));
                        confirm_plan(&mut c, &label, &class, &plan, g.as_ref());
                    }
                    Err(e) => c.fail(format!("{label}: {e}")),
                }
            }
        }
    }
    c.finish()
}

/// Seeded random classes whose common intersection is infinite.
fn infinite_intersection_classes(count: usize) -> Vec<FiniteClass> {
    (1000u64..)
        .map(|s| random_finite_class(s, 1 + (s % 3) as usize, 1 + ((s / 3) % 4) as usize))
        .filter(|k| k.common_intersection().is_ok_and(|i| !i.is_finite()))
        .take(count)
        .collect()
}

pub fn noise_independent() -> SuiteReport {
    let mut c = Checker::new(6);
    for (i, class) in infinite_intersection_classes(10).into_iter().enumerate() {
        let g = Trivial::new(&class).expect("infinite intersection");
        let h = &class.hypotheses()[i % class.len()];
        let stream = make_noisy_stream(h, i % 4, i as u64);
        let tr = run_game(&g, h, &stream, 100).expect("valid game").with_class(class.name());
        c.check(tr.mistakes().is_empty(), || format!("{}: mistakes at {:?}", class.name(), tr.mistakes()));
        c.artifact(tr.to_jsonl());
    }
    let par = HypothesisClass::Finite(parity());
    let gens = roster(&par).expect("roster");
    for d in [1, 2, 4] {
        for g in &gens {
            let label = format!("parity d={d} {}", g.name());
            match ung_necessity_adversary(par.as_finite().expect("finite"), g.as_ref(), d) {
                Ok(plan) => {
                    c.check(plan.predicted_mistake_round == d, || {
                        format!("{label}: predicted {}", plan.predicted_mistake_round)
                    });
                    confirm_plan(&mut c, &label, &par, &plan, g.as_ref());
                }
                Err(e) => c.fail(format!("{label}: {e}")),
            }
        }
    }
    c.finish()
}

pub fn nonuniform() -> SuiteReport {
    let mut c = Checker::new(7);
    let pp = prime_powers();
    let g = NonUniform::new(pp.clone());
    let horizon = 200;
    for trial in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(trial);
        let k = rng.gen_range(1..=12usize);
        let n = (trial % 3) as usize;
        let h = pp.hypothesis(&format!("h{k}")).expect("index");
        let stream = make_noisy_stream(&h, n, trial);
        let j_star = k.max(n);
        let DimValue::Finite(nc) = nc_dim_exact(&pp.prefix(j_star), j_star).expect("prefix") else {
            c.fail(format!("trial {trial}: prefix dimension not finite"));
            continue;
        };
        let threshold = (nc + 1).max(j_star);
        let tr = run_game(&g, &h, &stream, horizon).expect("valid game").with_class(pp.name());
        c.check(tr.rounds.iter().any(|r| r.d_t >= threshold), || {
            format!("trial {trial}: threshold {threshold} not reached")
        });
        for r in tr.rounds.iter().filter(|r| r.d_t >= threshold) {
            c.check(!r.verdict.is_mistake(), || format!("trial {trial} h{k} n={n}: mistake at round {}", r.t));
        }
        c.artifact(tr.to_jsonl());
    }
    c.finish()
}

/// Records the full trace of every guess.
struct Traced {
    inner: Limit,
    traces: Mutex<Vec<LimitTrace>>,
}

impl Generator for Traced {
    fn name(&self) -> String {
        self.inner.name()
    }

    fn universe(&self) -> &Arc<Universe> {
        self.inner.universe()
    }

    fn guess(&self, history: &[Element]) -> Guess {
        let trace = self.inner.trace(history);
        let guess = trace.guess.clone();
        self.traces.lock().expect("trace lock").push(trace);
        guess
    }
}

/// Clean distinct examples the prefix-class generator needs for the
/// hypothesis at `position`: `max(NC_i(H_i) + 1, i)` with `i = position`.
fn clean_requirement(class: &HypothesisClass, position: usize) -> usize {
    match nc_dim_exact(&class.prefix(position), position).expect("prefix") {
        DimValue::Finite(v) => (v + 1).max(position),
        other => unreachable!("finite prefix class has dimension {other}"),
    }
}

pub fn limit() -> SuiteReport {
    let mut c = Checker::new(8);
    let horizon = 300;
    let classes = [prime_powers(), HypothesisClass::Finite(parity())];
    let inners: Vec<Arc<dyn Generator>> =
        classes.iter().map(|k| Arc::new(NonUniform::new(k.clone())) as Arc<dyn Generator>).collect();
    for run in 0..50u64 {
        let which = (run % 2) as usize;
        let class = &classes[which];
        let h = match class {
            HypothesisClass::Indexed(_) => class.hypothesis(&format!("h{}", 1 + (run / 2) % 8)).expect("index"),
            HypothesisClass::Finite(k) => k.hypotheses()[((run / 2) % 2) as usize].clone(),
        };
        let m = (run % 4) as usize;
        let noise = pick_noise(&h, m, run);
        let stream = make_noisy_enumeration(&h, &noise, run).expect("noise off support");
        let g = Traced { inner: Limit::new(inners[which].clone()), traces: Mutex::new(Vec::new()) };
        let tr = run_game(&g, &h, &stream, horizon).expect("valid game").with_class(class.name());
        let traces = g.traces.into_inner().expect("trace lock");
        let last_noise = tr.header.noise_positions.last().copied().unwrap_or(0);
        let need = clean_requirement(class, class.position(&h.id).expect("member"));
        let label = format!("run {run} {} {} m={m}", class.name(), h.id);
        let mut settled_from = 1;
        for (r, trace) in tr.rounds.iter().zip(&traces) {
            let clean = trace.r_t > last_noise && r.d_t / 2 >= need;
            if !clean {
                settled_from = r.t + 1;
                continue;
            }
            c.check(trace.candidates.iter().all(|&z| h.support.contains(z)), || {
                format!("{label}: round {} candidate outside support", r.t)
            });
            c.check(!r.verdict.is_mistake(), || format!("{label}: mistake at clean round {}", r.t));
        }
        let t_star = find_t_star(&tr);
        c.check(settled_from <= horizon, || format!("{label}: conditions never settle"));
        c.check(t_star <= settled_from, || format!("{label}: t_star {t_star} after settling round {settled_from}"));
        c.artifact(tr.to_jsonl());
    }
    c.finish()
}

pub fn union_limit() -> SuiteReport {
    let mut c = Checker::new(9);
    let class = union_demo();
    let g = UnionLimit::for_class(&class).expect("groups");
    let groups = class.group_classes().expect("groups");
    let horizon = 200;
    for seed in 0..20u64 {
        let h = &class.hypotheses()[(seed % 4) as usize];
        let noise = pick_noise(h, (seed % 4) as usize, seed);
        let stream = make_noisy_enumeration(h, &noise, seed).expect("noise off support");
        let covered = h.support.with_elements(noise.iter().copied()).expect("same universe");
        // Groups whose whole intersection eventually appears in the stream.
        let s_star: BTreeSet<usize> = groups
            .iter()
            .enumerate()
            .filter(|(_, (_, k))| {
                k.common_intersection().expect("group").difference(&covered).expect("same universe").is_empty()
            })
            .map(|(i, _)| i + 1)
            .collect();
        let label = format!("seed {seed} {}", h.id);
        c.check(!s_star.is_empty(), || format!("{label}: no group is fully enumerated"));
        let tr = run_game(&g, h, &stream, horizon).expect("valid game").with_class(class.name());
        let t_star = find_t_star(&tr);
        c.check(t_star < horizon, || format!("{label}: still erring at the horizon"));
        for r in &tr.rounds[t_star - 1..] {
            let Rationale::Group { i_t, .. } = &r.rationale else { unreachable!("union-limit rationale") };
            c.check(s_star.contains(i_t), || format!("{label}: round {} selects group {i_t}", r.t));
        }
        c.artifact(tr.to_jsonl());
    }
    c.finish()
}

pub fn alt_noise_independent() -> SuiteReport {
    let mut c = Checker::new(10);
    let par = parity();
    let demo = union_demo();
    let cases: Vec<(FiniteClass, Vec<&str>, &str)> =
        vec![(par.clone(), vec!["h_e", "h_o"], "h_o"), (demo.clone(), vec!["g1", "g4"], "g4")];
    for (class, family_ids, f) in cases {
        let whole = HypothesisClass::Finite(class.clone());
        let family = class.subclass(&family_ids).expect("members");
        let q = family.common_intersection().expect("nonempty").enumerate(usize::MAX).len();
        let gens = roster(&whole).expect("roster");
        for d in 1..=3 {
            for g in &gens {
                let label = format!("{} d={d} {}", class.name(), g.name());
                match altung_adversary(&family, f, d, g.as_ref()) {
                    Ok(plan) => {
                        c.check(plan.predicted_mistake_round == 2 * d + q, || {
                            format!("{label}: predicted {}", plan.predicted_mistake_round)
                        });
                        if let Some(tr) = confirm_plan(&mut c, &label, &whole, &plan, g.as_ref()) {
                            let r = tr.round(plan.predicted_mistake_round).expect("in horizon");
                            c.check(r.d_pos >= d, || format!("{label}: only {} positives at the mistake", r.d_pos));
                        }
                    }
                    Err(e) => c.fail(format!("{label}: {e}")),
                }
            }
        }
    }
    let infinite_family = demo.subclass(&["g1", "g2"]).expect("members");
    let g = build_generator("und", &HypothesisClass::Finite(demo.clone())).expect("und");
    c.check(
        matches!(altung_adversary(&infinite_family, "g2", 1, g.as_ref()), Err(AdversaryError::PreconditionViolated(_))),
        || "infinite family intersection accepted".into(),
    );

    let singles = [
        par.subclass(&["h_e"]).expect("member"),
        demo.subclass(&["g3"]).expect("member"),
        random_finite_class(5, 1, 3),
        random_finite_class(8, 1, 4),
    ];
    for (i, single) in singles.iter().enumerate() {
        let g = AltUng::new(single.clone(), 0);
        let h = &single.hypotheses()[0];
        let stream = make_noisy_stream(h, i, i as u64);
        let tr = run_game(&g, h, &stream, 100).expect("valid game").with_class(single.name());
        c.check(tr.mistakes().is_empty(), || format!("{}: mistakes at {:?}", single.name(), tr.mistakes()));
        c.artifact(tr.to_jsonl());
    }
    c.finish()
}

pub fn parity_adversary_suite() -> SuiteReport {
    let mut c = Checker::new(11);
    let par = HypothesisClass::Finite(parity());
    let must_certify = ["und", "trivial:h_e"];
    for name in crate::generators::roster_names(&par) {
        let g = build_generator(&name, &par).expect("roster");
        let label = format!("parity-adversary {name}");
        match parity_adversary(g.as_ref(), 3, 60) {
            Ok((plan, case)) => {
                c.artifact(format!("{name}: {case:?} round {}", plan.predicted_mistake_round));
                if let Some(tr) = confirm_plan(&mut c, &label, &par, &plan, g.as_ref()) {
                    let r = tr.round(plan.predicted_mistake_round).expect("in horizon");
                    c.check(r.d_pos >= 3, || format!("{label}: only {} positives at the mistake", r.d_pos));
                }
            }
            Err(AdversaryError::Inconclusive(why)) => {
                c.check(!must_certify.contains(&name.as_str()), || format!("{label}: inconclusive ({why})"));
                c.artifact(format!("{name}: inconclusive"));
            }
            Err(e) => c.fail(format!("{label}: {e}")),
        }
    }
    c.finish()
}

/// Runs suites 1 to 11 twice and compares their artifacts byte for byte.
pub fn determinism() -> SuiteReport {
    let first: Vec<SuiteReport> = SUITES[..11].iter().map(|s| (s.2)()).collect();
    determinism_against(&first)
}

/// Re-runs the suites in `first` and compares artifacts with it.
pub fn determinism_against(first: &[SuiteReport]) -> SuiteReport {
    let mut c = Checker::new(12);
    for report in first {
        let again = run_suite(report.suite).expect("known suite");
        c.check(again.artifacts == report.artifacts, || format!("{}: artifacts differ on rerun", report.suite));
    }
    c.finish()
}
