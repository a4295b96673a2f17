//! The generation game: run a generator against a stream and score each round.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::adversaries::{Stream, StreamKind};
use crate::classes::Hypothesis;
use crate::generators::{Generator, Rationale};
use crate::setalg::Element;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GameError {
    #[error("horizon must be positive")]
    HorizonZero,
    #[error("stream targets {stream} but the game targets {game}")]
    HypothesisMismatch { stream: String, game: String },
    #[error("distinct count never reached {d_star}")]
    TriggerNeverFires { d_star: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundVerdict {
    Correct,
    /// The guess was already shown.
    MistakeSeen,
    /// The guess lies outside the target's support.
    MistakeOutside,
}

impl RoundVerdict {
    pub fn is_mistake(self) -> bool {
        self != RoundVerdict::Correct
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Round {
    pub t: usize,
    pub x: Element,
    /// Distinct elements among `x_1..x_t`.
    pub d_t: usize,
    /// Distinct elements of the target's support among `x_1..x_t`.
    pub d_pos: usize,
    pub guess: Element,
    pub rationale: Rationale,
    pub verdict: RoundVerdict,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Header {
    pub class: String,
    pub hypothesis: String,
    pub generator: String,
    pub stream: StreamKind,
    pub seed: Option<u64>,
    pub horizon: usize,
    pub noise_positions: Vec<usize>,
    pub predicted_mistake_round: Option<usize>,
    pub flags: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transcript {
    pub header: Header,
    pub rounds: Vec<Round>,
}

#[derive(Serialize)]
struct Record<'a, T: Serialize> {
    record: &'static str,
    #[serde(flatten)]
    body: &'a T,
}

impl Transcript {
    pub fn with_class(mut self, class: &str) -> Self {
        self.header.class = class.to_string();
        self
    }

    pub fn with_prediction(mut self, round: usize) -> Self {
        self.header.predicted_mistake_round = Some(round);
        self
    }

    /// JSON Lines: a header record followed by one record per round.
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&Record { record: "header", body: &self.header }).expect("serializable");
        out.push('\n');
        for r in &self.rounds {
            out.push_str(&serde_json::to_string(&Record { record: "round", body: r }).expect("serializable"));
            out.push('\n');
        }
        out
    }

    pub fn mistakes(&self) -> Vec<usize> {
        self.rounds.iter().filter(|r| r.verdict.is_mistake()).map(|r| r.t).collect()
    }

    pub fn round(&self, t: usize) -> Option<&Round> {
        self.rounds.get(t.checked_sub(1)?)
    }
}

pub fn run_game(g: &dyn Generator, h: &Hypothesis, s: &Stream, horizon: usize) -> Result<Transcript, GameError> {
    if horizon == 0 {
        return Err(GameError::HorizonZero);
    }
    if s.hypothesis != h.id {
        return Err(GameError::HypothesisMismatch { stream: s.hypothesis.clone(), game: h.id.clone() });
    }
    let items = s.items(horizon);
    let mut seen = BTreeSet::new();
    let mut positives = 0;
    let mut rounds = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let x = items[t - 1];
        if seen.insert(x) && h.support.contains(x) {
            positives += 1;
        }
        let guess = g.guess(&items[..t]);
        let verdict = if seen.contains(&guess.element) {
            RoundVerdict::MistakeSeen
        } else if !h.support.contains(guess.element) {
            RoundVerdict::MistakeOutside
        } else {
            RoundVerdict::Correct
        };
        rounds.push(Round {
            t,
            x,
            d_t: seen.len(),
            d_pos: positives,
            guess: guess.element,
            rationale: guess.rationale,
            verdict,
        });
    }
    let noise_positions =
        items.iter().enumerate().filter(|(_, x)| !h.support.contains(**x)).map(|(i, _)| i + 1).collect();
    Ok(Transcript {
        header: Header {
            class: String::new(),
            hypothesis: h.id.clone(),
            generator: g.name(),
            stream: s.kind.clone(),
            seed: s.seed,
            horizon,
            noise_positions,
            predicted_mistake_round: None,
            flags: s.flags.clone(),
        },
        rounds,
    })
}

/// Success criteria a transcript can be checked against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// No mistakes once the distinct count reaches `d_star`.
    Und,
    NonUniform,
    Ung,
    /// No mistakes once the count of distinct positives reaches `d_star`.
    AltUng,
    /// Eventually mistake-free within the horizon.
    Limit,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub mode: Mode,
    pub passed: bool,
    pub trigger_round: Option<usize>,
    pub last_mistake: Option<usize>,
    pub t_star: usize,
    pub mistakes_after_trigger: Vec<usize>,
}

/// One past the last mistake, or 1 when there are none.
pub fn find_t_star(tr: &Transcript) -> usize {
    tr.mistakes().last().map_or(1, |&t| t + 1)
}

pub fn check_definition(tr: &Transcript, mode: Mode, d_star: usize) -> Result<Verdict, GameError> {
    let t_star = find_t_star(tr);
    let last_mistake = tr.mistakes().last().copied();
    let trigger = match mode {
        Mode::Limit => (t_star <= tr.rounds.len()).then_some(t_star),
        Mode::AltUng => tr.rounds.iter().find(|r| r.d_pos >= d_star).map(|r| r.t),
        Mode::Und | Mode::NonUniform | Mode::Ung => tr.rounds.iter().find(|r| r.d_t >= d_star).map(|r| r.t),
    };
    let trigger_round = match (mode, trigger) {
        (Mode::Limit, t) => t,
        (_, Some(t)) => Some(t),
        (_, None) => return Err(GameError::TriggerNeverFires { d_star }),
    };
    let mistakes_after_trigger: Vec<usize> = match trigger_round {
        Some(t0) => tr.mistakes().into_iter().filter(|&t| t >= t0).collect(),
        None => Vec::new(),
    };
    Ok(Verdict {
        mode,
        passed: trigger_round.is_some() && mistakes_after_trigger.is_empty(),
        trigger_round,
        last_mistake,
        t_star,
        mistakes_after_trigger,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversaries::make_noisy_stream;
    use crate::classes::{parity, HypothesisClass};
    use crate::generators::{build_generator, Guess};
    use crate::setalg::Universe;
    use std::sync::Arc;

    struct Echo(Arc<Universe>);

    impl Generator for Echo {
        fn name(&self) -> String {
            "echo".into()
        }
        fn universe(&self) -> &Arc<Universe> {
            &self.0
        }
        fn guess(&self, history: &[Element]) -> Guess {
            Guess { element: *history.last().unwrap(), rationale: Rationale::Intersection }
        }
    }

    #[test]
    fn echo_always_repeats() {
        let c = parity();
        let h = &c.hypotheses()[0];
        let s = make_noisy_stream(h, 0, 1);
        let tr = run_game(&Echo(c.universe().clone()), h, &s, 10).unwrap();
        assert!(tr.rounds.iter().all(|r| r.verdict == RoundVerdict::MistakeSeen));
        assert_eq!(find_t_star(&tr), 11);
    }

    #[test]
    fn und_on_parity_passes() {
        let c = parity();
        let g = build_generator("und", &HypothesisClass::Finite(c.clone())).unwrap();
        for (seed, n) in [(3u64, 1usize), (4, 2), (5, 0)] {
            let h = &c.hypotheses()[seed as usize % 2];
            let s = make_noisy_stream(h, n, seed);
            let tr = run_game(g.as_ref(), h, &s, 50).unwrap();
            let v = check_definition(&tr, Mode::Und, 2 * n + 1).unwrap();
            assert!(v.passed, "{v:?}");
            assert_eq!(tr.to_jsonl(), run_game(g.as_ref(), h, &s, 50).unwrap().to_jsonl());
        }
    }

    #[test]
    fn errors() {
        let c = parity();
        let h = &c.hypotheses()[0];
        let s = make_noisy_stream(h, 0, 1);
        let g = Echo(c.universe().clone());
        assert_eq!(run_game(&g, h, &s, 0).unwrap_err(), GameError::HorizonZero);
        let tr = run_game(&g, h, &s, 5).unwrap();
        assert_eq!(check_definition(&tr, Mode::Und, 50).unwrap_err(), GameError::TriggerNeverFires { d_star: 50 });
    }
}
