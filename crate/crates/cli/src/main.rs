//! `genlab`: run dimension reports, games, adversaries and verification suites.
//!
//! Every command prints one JSON object per line (or a table with `--pretty`)
//! and is deterministic given its flags.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use genlab_core::adversaries::{
    altung_adversary, make_noisy_enumeration, make_noisy_stream, nc_necessity_adversary, parity_adversary, pick_noise,
    ung_necessity_adversary, AdversaryError, AdversaryPlan, Stream, BOUNDED_WINDOW,
};
use genlab_core::classes::{load_class, parity, serialize_class_spec, HypothesisClass, BUILTINS};
use genlab_core::closure::{
    closure_dim, d_max, finite_class_bound, nc_dim_budgeted, nc_dim_report, sup_gap_check, DimValue, DEFAULT_BUDGET,
};
use genlab_core::game::{check_definition, run_game, GameError, Mode, Transcript};
use genlab_core::generators::build_generator;
use genlab_core::suites::{determinism_against, run_suite, suite_names, SuiteReport, SUITES};

const EXIT_ERROR: u8 = 1;
const EXIT_NO_WITNESS: u8 = 3;
const EXIT_PRECONDITION: u8 = 4;
const EXIT_INCONCLUSIVE: u8 = 5;
/// The command ran but its contract was not met: a failed verdict, an
/// unconfirmed mistake or a failing suite.
const EXIT_CONTRACT: u8 = 6;

#[derive(Parser, Debug)]
#[command(name = "genlab", version, about = "Language generation in the limit under noise: experiments and checks")]
struct Cli {
    /// Render human-readable tables instead of JSON lines.
    #[arg(long, global = true)]
    pretty: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Noisy closure dimensions of a class.
    Dim(DimArgs),
    /// Play a generator against a stream and write the transcript.
    Play(PlayArgs),
    /// Build an adversarial stream against a generator and confirm the forced mistake.
    Adversary(AdversaryArgs),
    /// Run a verification suite, or `all`.
    Verify { suite: String },
    /// Built-in classes and class-spec files.
    Classes {
        #[command(subcommand)]
        action: ClassesAction,
    },
}

#[derive(Args, Debug)]
struct DimArgs {
    /// `builtin:<name>` or a class-spec path.
    #[arg(long)]
    class: String,
    /// Noise levels, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    n: Vec<usize>,
    /// Witness budget for indexed families.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: usize,
}

#[derive(Args, Debug)]
struct PlayArgs {
    #[arg(long)]
    class: String,
    #[arg(long, default_value = "und")]
    generator: String,
    /// Target hypothesis id; defaults to the first of the class.
    #[arg(long)]
    hypothesis: Option<String>,
    /// `plain`, `noisy:<n>` or `noisy-enum[:<k>]`.
    #[arg(long, default_value = "plain")]
    stream: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    horizon: usize,
    /// Write the transcript here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Success criterion to check; inferred from the generator when omitted.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Distinct-count trigger for the criterion.
    #[arg(long)]
    d_star: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Und,
    NonUniform,
    Ung,
    AltUng,
    Limit,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Und => Mode::Und,
            ModeArg::NonUniform => Mode::NonUniform,
            ModeArg::Ung => Mode::Ung,
            ModeArg::AltUng => Mode::AltUng,
            ModeArg::Limit => Mode::Limit,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AdversaryKind {
    UngNecessity,
    NcNecessity,
    Altung,
    Parity,
}

#[derive(Args, Debug)]
struct AdversaryArgs {
    #[arg(value_enum)]
    kind: AdversaryKind,
    /// Ignored by `parity`, which always uses the parity class.
    #[arg(long, default_value = "builtin:parity")]
    class: String,
    /// Generator under attack.
    #[arg(long, default_value = "und")]
    target: String,
    #[arg(long, default_value_t = 0)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// Probe budget for `parity`.
    #[arg(long, default_value_t = 40)]
    probe: usize,
    /// Hypothesis ids of the family for `altung`; the whole class by default.
    #[arg(long, value_delimiter = ',')]
    family: Vec<String>,
    /// The distinguished member for `altung`; the first of the family by default.
    #[arg(long)]
    f: Option<String>,
    /// Rounds to play; the predicted mistake round by default.
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum ClassesAction {
    /// List built-in classes.
    List,
    /// Print a class; finite classes are printed in class-spec format.
    Show { class: String },
    /// Parse class-spec files and report each.
    Validate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
}

/// What a command produced besides its output lines.
enum Outcome {
    Ok,
    ContractFailed,
}

struct Output {
    pretty: bool,
}

impl Output {
    fn record(&self, value: Value) {
        if self.pretty {
            println!("{}", pretty_line(&value));
        } else {
            println!("{value}");
        }
    }
}

fn pretty_line(value: &Value) -> String {
    let Value::Object(map) = value else { return value.to_string() };
    map.iter()
        .map(|(k, v)| match v {
            Value::String(s) => format!("{k}={s}"),
            other => format!("{k}={other}"),
        })
        .collect::<Vec<_>>()
        .join("  ")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = Output { pretty: cli.pretty };
    let result = match cli.command {
        Command::Dim(a) => cmd_dim(&out, &a),
        Command::Play(a) => cmd_play(&out, &a),
        Command::Adversary(a) => cmd_adversary(&out, &a),
        Command::Verify { suite } => cmd_verify(&out, &suite),
        Command::Classes { action } => cmd_classes(&out, &action),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::ContractFailed) => ExitCode::from(EXIT_CONTRACT),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<AdversaryError>() {
        Some(AdversaryError::NoWitness { .. }) => EXIT_NO_WITNESS,
        Some(AdversaryError::PreconditionViolated(_)) => EXIT_PRECONDITION,
        Some(AdversaryError::Inconclusive(_)) => EXIT_INCONCLUSIVE,
        _ => EXIT_ERROR,
    }
}

fn dim_json(v: DimValue) -> Value {
    json!(v.to_string())
}

fn cmd_dim(out: &Output, a: &DimArgs) -> Result<Outcome> {
    let class = load_class(&a.class)?;
    let u = class.universe().clone();
    match &class {
        HypothesisClass::Finite(c) => {
            let dm = d_max(c)?;
            for &n in &a.n {
                let r = nc_dim_report(c, n)?;
                out.record(json!({
                    "record": "nc",
                    "n": n,
                    "value": dim_json(r.value),
                    "bound": finite_class_bound(c, n)?,
                    "witness": r.witness.iter().map(|&x| u.describe(x)).collect::<Vec<_>>(),
                    "family": r.family.iter().map(|&i| c.hypotheses()[i].id.clone()).collect::<Vec<_>>(),
                }));
            }
            let n_max = a.n.iter().copied().max().unwrap_or(0);
            let gap = sup_gap_check(c, n_max)?;
            out.record(json!({
                "record": "summary",
                "class": c.name(),
                "q": c.len(),
                "d_max": dm,
                "closure_dim": dim_json(closure_dim(&class, a.budget)?),
                "gaps": gap.gaps,
                "sup_gap": gap.value,
            }));
        }
        HypothesisClass::Indexed(f) => {
            for &n in &a.n {
                out.record(json!({
                    "record": "nc",
                    "n": n,
                    "value": dim_json(nc_dim_budgeted(&class, n, a.budget)?),
                    "budget": a.budget,
                }));
            }
            out.record(json!({
                "record": "summary",
                "class": f.name(),
                "closure_dim": dim_json(closure_dim(&class, a.budget)?),
            }));
        }
    }
    Ok(Outcome::Ok)
}

fn build_stream(class: &HypothesisClass, hypothesis: &str, spec: &str, seed: u64) -> Result<Stream> {
    let h = class.hypothesis(hypothesis).ok_or_else(|| anyhow!("unknown hypothesis `{hypothesis}`"))?;
    let (kind, arg) = match spec.split_once(':') {
        Some((k, a)) => (k, Some(a.parse::<usize>().with_context(|| format!("bad stream parameter in `{spec}`"))?)),
        None => (spec, None),
    };
    Ok(match (kind, arg) {
        ("plain", None) => Stream::plain(&h, BOUNDED_WINDOW, seed),
        ("noisy", Some(n)) => make_noisy_stream(&h, n, seed),
        ("noisy-enum", k) => {
            let noise = pick_noise(&h, k.unwrap_or(2), seed);
            make_noisy_enumeration(&h, &noise, seed)?
        }
        _ => bail!("unknown stream `{spec}`; expected plain, noisy:<n> or noisy-enum[:<k>]"),
    })
}

/// The noise bound a stream promises, if any.
fn stream_noise(spec: &str) -> Option<usize> {
    match spec.split_once(':') {
        Some(("noisy", n)) => n.parse().ok(),
        None if spec == "plain" => Some(0),
        _ => None,
    }
}

fn default_mode(generator: &str) -> Mode {
    match generator.split([':', '(']).next().unwrap_or("") {
        "und" => Mode::Und,
        "alt-ung" => Mode::AltUng,
        "trivial" => Mode::Ung,
        _ => Mode::Limit,
    }
}

fn write_transcript(out: &Output, path: Option<&PathBuf>, tr: &Transcript) -> Result<()> {
    let text = tr.to_jsonl();
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None if !out.pretty => print!("{text}"),
        None => {
            for r in &tr.rounds {
                println!(
                    "t={:<4} x={:<10} d_t={:<4} guess={:<10} {:?}",
                    r.t,
                    format!("{:?}", r.x),
                    r.d_t,
                    format!("{:?}", r.guess),
                    r.verdict
                );
            }
        }
    }
    Ok(())
}

fn cmd_play(out: &Output, a: &PlayArgs) -> Result<Outcome> {
    let class = load_class(&a.class)?;
    let hypothesis = a.hypothesis.clone().unwrap_or_else(|| class.default_hypothesis_id());
    let h = class.hypothesis(&hypothesis).ok_or_else(|| anyhow!("unknown hypothesis `{hypothesis}`"))?;
    let g = build_generator(&a.generator, &class)?;
    let stream = build_stream(&class, &hypothesis, &a.stream, a.seed)?;
    if a.horizon == 0 {
        return Err(GameError::HorizonZero.into());
    }
    let tr = run_game(g.as_ref(), &h, &stream, a.horizon)?.with_class(class.name());
    write_transcript(out, a.out.as_ref(), &tr)?;

    let mode = a.mode.map(Mode::from).unwrap_or_else(|| default_mode(&a.generator));
    let d_star = match (mode, a.d_star) {
        (_, Some(d)) => d,
        (Mode::Limit, None) => 0,
        (Mode::AltUng, None) => a.generator.split_once(':').and_then(|(_, d)| d.parse().ok()).unwrap_or(1),
        (_, None) => {
            let n = stream_noise(&a.stream)
                .ok_or_else(|| anyhow!("--d-star is required for stream `{}` in this mode", a.stream))?;
            match nc_dim_budgeted(&class, n, DEFAULT_BUDGET)? {
                DimValue::Finite(v) => v + 1,
                v => bail!("NC_{n} = {v}; pass --d-star explicitly"),
            }
        }
    };
    let verdict = match check_definition(&tr, mode, d_star) {
        Ok(v) => v,
        Err(GameError::TriggerNeverFires { d_star }) => {
            out.record(json!({
                "record": "verdict",
                "passed": false,
                "reason": format!("distinct count never reached {d_star} within the horizon"),
            }));
            return Ok(Outcome::ContractFailed);
        }
        Err(e) => return Err(e.into()),
    };
    out.record(json!({
        "record": "verdict",
        "generator": tr.header.generator,
        "hypothesis": tr.header.hypothesis,
        "mode": verdict.mode,
        "d_star": d_star,
        "passed": verdict.passed,
        "trigger_round": verdict.trigger_round,
        "last_mistake": verdict.last_mistake,
        "t_star": verdict.t_star,
        "mistakes": tr.mistakes().len(),
        "mistakes_after_trigger": verdict.mistakes_after_trigger,
    }));
    Ok(if verdict.passed { Outcome::Ok } else { Outcome::ContractFailed })
}

fn cmd_adversary(out: &Output, a: &AdversaryArgs) -> Result<Outcome> {
    let class = match a.kind {
        AdversaryKind::Parity => HypothesisClass::Finite(parity()),
        _ => load_class(&a.class)?,
    };
    let g = build_generator(&a.target, &class)?;
    let needs_finite = || class.as_finite().ok_or_else(|| anyhow!("this adversary needs a finite class"));
    let mut case = None;
    let plan: AdversaryPlan = match a.kind {
        AdversaryKind::UngNecessity => ung_necessity_adversary(needs_finite()?, g.as_ref(), a.d)?,
        AdversaryKind::NcNecessity => nc_necessity_adversary(&class, a.n, a.d, g.as_ref())?,
        AdversaryKind::Altung => {
            let c = needs_finite()?;
            let family = if a.family.is_empty() {
                c.clone()
            } else {
                c.subclass(&a.family.iter().map(String::as_str).collect::<Vec<_>>())?
            };
            let f = a.f.clone().unwrap_or_else(|| family.hypotheses()[0].id.clone());
            altung_adversary(&family, &f, a.d, g.as_ref())?
        }
        AdversaryKind::Parity => {
            let (plan, c) = parity_adversary(g.as_ref(), a.d, a.probe)?;
            case = Some(c);
            plan
        }
    };
    let h = class.hypothesis(&plan.target).ok_or_else(|| anyhow!("plan targets unknown `{}`", plan.target))?;
    let horizon = a.horizon.unwrap_or(plan.predicted_mistake_round).max(1);
    let tr = run_game(g.as_ref(), &h, &plan.stream, horizon)?
        .with_class(class.name())
        .with_prediction(plan.predicted_mistake_round);
    write_transcript(out, a.out.as_ref(), &tr)?;
    let first = tr.mistakes().first().copied();
    let confirmed = first.is_some_and(|t| t <= plan.predicted_mistake_round);
    out.record(json!({
        "record": "adversary",
        "generator": g.name(),
        "hypothesis": plan.target,
        "predicted_mistake_round": plan.predicted_mistake_round,
        "first_mistake": first,
        "confirmed": confirmed,
        "case": case,
        "log": plan.log,
    }));
    Ok(if confirmed { Outcome::Ok } else { Outcome::ContractFailed })
}

fn suite_record(r: &SuiteReport) -> Value {
    json!({
        "record": "suite",
        "id": r.id,
        "suite": r.suite,
        "passed": r.passed,
        "checks": r.checks,
        "elapsed_ms": r.elapsed_ms as u64,
        "failures": r.failures,
    })
}

fn cmd_verify(out: &Output, suite: &str) -> Result<Outcome> {
    let reports = if suite == "all" {
        let mut first: Vec<SuiteReport> = SUITES[..SUITES.len() - 1].iter().map(|s| (s.2)()).collect();
        let again = determinism_against(&first);
        first.push(again);
        first
    } else {
        vec![run_suite(suite)
            .ok_or_else(|| anyhow!("unknown suite `{suite}`; known: all, {}", suite_names().join(", ")))?]
    };
    for r in &reports {
        out.record(suite_record(r));
    }
    Ok(if reports.iter().all(|r| r.passed) { Outcome::Ok } else { Outcome::ContractFailed })
}

fn cmd_classes(out: &Output, action: &ClassesAction) -> Result<Outcome> {
    match action {
        ClassesAction::List => {
            for name in BUILTINS {
                let c = load_class(&format!("builtin:{name}"))?;
                let kind = match &c {
                    HypothesisClass::Finite(f) => format!("finite ({} hypotheses)", f.len()),
                    HypothesisClass::Indexed(_) => "indexed".to_string(),
                };
                out.record(json!({ "record": "class", "name": name, "kind": kind }));
            }
            Ok(Outcome::Ok)
        }
        ClassesAction::Show { class } => {
            match load_class(class)? {
                HypothesisClass::Finite(c) => print!("{}", serialize_class_spec(&c)?),
                HypothesisClass::Indexed(f) => {
                    let u = f.universe();
                    let first: Vec<Value> = (1..=3)
                        .map(|i| json!({ "id": f.hypothesis_id(i), "support": f.support(i).to_string() }))
                        .collect();
                    out.record(json!({
                        "record": "class",
                        "name": f.name(),
                        "kind": "indexed",
                        "atoms": u.declared_atoms().iter().map(|a| a.label.clone()).collect::<Vec<_>>(),
                        "first": first,
                    }));
                }
            }
            Ok(Outcome::Ok)
        }
        ClassesAction::Validate { paths } => {
            let mut all_ok = true;
            for p in paths {
                let arg = p.display().to_string();
                match load_class(&arg) {
                    Ok(c) => out.record(json!({ "record": "valid", "path": arg, "name": c.name() })),
                    Err(e) => {
                        all_ok = false;
                        out.record(json!({ "record": "invalid", "path": arg, "error": e.to_string() }));
                    }
                }
            }
            if all_ok {
                Ok(Outcome::Ok)
            } else {
                Err(anyhow!("some class specs are invalid"))
            }
        }
    }
}
