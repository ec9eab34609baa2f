//! Question-selection policies.
//!
//! Five policies decide which visible question the next worker answers:
//! uniform random, round-robin over creation order, a binomial-test filter,
//! and two Thompson samplers over the link-bias posterior. The Thompson
//! samplers pick the question with the *smallest* sampled score, since low
//! link bias means an evenly split, uncertain question.

mod bias;
mod binom;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net::{QuestionKey, QuestionNet};

pub use bias::{link_bias, phi_density, sample_link_bias, DomainError, LinkBias};
pub use binom::binom_test_two_sided;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("cannot select from a net with no questions")]
    EmptyNet,
    #[error("invalid policy '{input}': {reason}")]
    Parse { input: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PolicySpec {
    Random,
    Looping,
    /// Uniform over questions whose two-sided p-value exceeds `p_min` and
    /// that have fewer than `max_answers` answers; random when none qualify.
    Binomial {
        p_min: f64,
        max_answers: u64,
    },
    ThompsonPhi,
    /// Thompson draw of link bias, scored by `N * d`.
    ThompsonPhiN,
}

impl PolicySpec {
    pub fn binomial(p_min: f64, max_answers: u64) -> Result<Self, PolicyError> {
        let spec = PolicySpec::Binomial { p_min, max_answers };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if let PolicySpec::Binomial { p_min, max_answers } = *self {
            let fail = |reason: &str| PolicyError::Parse {
                input: self.to_string(),
                reason: reason.into(),
            };
            if !(p_min > 0.0 && p_min < 1.0) {
                return Err(fail("p_min must lie in (0, 1)"));
            }
            if max_answers < 1 {
                return Err(fail("max_answers must be at least 1"));
            }
        }
        Ok(())
    }

    /// Short name used in file names and reports.
    pub fn label(&self) -> &'static str {
        match self {
            PolicySpec::Random => "random",
            PolicySpec::Looping => "looping",
            PolicySpec::Binomial { .. } => "binomial",
            PolicySpec::ThompsonPhi => "thompson-phi",
            PolicySpec::ThompsonPhiN => "thompson-phi-n",
        }
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicySpec::Binomial { p_min, max_answers } => {
                write!(f, "binomial:p_min={p_min},max_answers={max_answers}")
            }
            other => f.write_str(other.label()),
        }
    }
}

impl FromStr for PolicySpec {
    type Err = PolicyError;

    /// Accepts `random`, `looping`, `thompson-phi`, `thompson-phi-n` and
    /// `binomial[:p_min=<x>,max_answers=<n>]` (defaults 0.2 and 10).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let fail = |reason: String| PolicyError::Parse {
            input: s.to_string(),
            reason,
        };
        let s_trim = s.trim();
        let (name, args) = match s_trim.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a)),
            None => (s_trim, None),
        };
        let spec = match name {
            "random" => PolicySpec::Random,
            "looping" => PolicySpec::Looping,
            "thompson-phi" => PolicySpec::ThompsonPhi,
            "thompson-phi-n" => PolicySpec::ThompsonPhiN,
            "binomial" => {
                let mut p_min = 0.2;
                let mut max_answers = 10;
                for kv in args.unwrap_or("").split(',').map(str::trim).filter(|kv| !kv.is_empty()) {
                    let (k, v) = kv
                        .split_once('=')
                        .ok_or_else(|| fail(format!("expected key=value, got '{kv}'")))?;
                    match k.trim() {
                        "p_min" => p_min = v.trim().parse().map_err(|_| fail(format!("bad p_min '{v}'")))?,
                        "max_answers" => {
                            max_answers = v.trim().parse().map_err(|_| fail(format!("bad max_answers '{v}'")))?
                        }
                        other => return Err(fail(format!("unknown binomial option '{other}'"))),
                    }
                }
                return PolicySpec::binomial(p_min, max_answers).map_err(|e| match e {
                    PolicyError::Parse { reason, .. } => fail(reason),
                    e => e,
                });
            }
            other => return Err(fail(format!("unknown policy '{other}'"))),
        };
        if args.is_some() {
            return Err(fail(format!("policy '{name}' takes no options")));
        }
        Ok(spec)
    }
}

/// Mutable state of a policy: its random stream and the looping cursor.
#[derive(Debug, Clone)]
pub struct SamplerState {
    pub rng: ChaCha8Rng,
    pub loop_cursor: usize,
}

impl SamplerState {
    pub fn new(seed: u64) -> Self {
        Self::from_rng(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn from_rng(rng: ChaCha8Rng) -> Self {
        Self { rng, loop_cursor: 0 }
    }
}

// Uniform choice among a stream of candidates, one pass, no allocation.
struct Reservoir {
    chosen: Option<QuestionKey>,
    seen: u64,
}

impl Reservoir {
    fn new() -> Self {
        Self { chosen: None, seen: 0 }
    }

    fn offer<R: Rng>(&mut self, key: QuestionKey, rng: &mut R) {
        self.seen += 1;
        if self.seen == 1 || rng.random_range(0..self.seen) == 0 {
            self.chosen = Some(key);
        }
    }
}

// Argmin with uniform tie-breaking.
struct MinTracker {
    best: f64,
    res: Reservoir,
}

impl MinTracker {
    fn new() -> Self {
        Self {
            best: f64::INFINITY,
            res: Reservoir::new(),
        }
    }

    fn offer<R: Rng>(&mut self, key: QuestionKey, score: f64, rng: &mut R) {
        if score < self.best {
            self.best = score;
            self.res = Reservoir::new();
            self.res.offer(key, rng);
        } else if score == self.best {
            self.res.offer(key, rng);
        }
    }
}

fn uniform(net: &QuestionNet, rng: &mut ChaCha8Rng) -> QuestionKey {
    QuestionKey(rng.random_range(0..net.question_count() as u32))
}

/// Chooses the next question to assign.
pub fn select(net: &QuestionNet, spec: &PolicySpec, state: &mut SamplerState) -> Result<QuestionKey, PolicyError> {
    let m = net.question_count();
    if m == 0 {
        return Err(PolicyError::EmptyNet);
    }
    let rng = &mut state.rng;
    let key = match *spec {
        PolicySpec::Random => uniform(net, rng),
        PolicySpec::Looping => {
            if state.loop_cursor >= m {
                state.loop_cursor = 0;
            }
            let key = QuestionKey(state.loop_cursor as u32);
            state.loop_cursor = (state.loop_cursor + 1) % m;
            key
        }
        PolicySpec::Binomial { p_min, max_answers } => {
            let mut pick = Reservoir::new();
            for (key, q) in net.keys().zip(net.questions()) {
                let n = q.tally.total();
                if n < max_answers && binom_test_two_sided::<f64>(q.tally.n_yes, n) > p_min {
                    pick.offer(key, rng);
                }
            }
            match pick.chosen {
                Some(key) => key,
                None => uniform(net, rng),
            }
        }
        PolicySpec::ThompsonPhi => {
            let mut min = MinTracker::new();
            for (key, q) in net.keys().zip(net.questions()) {
                let d = draw(&q.tally, rng);
                min.offer(key, d, rng);
            }
            min.res.chosen.expect("non-empty net yields a minimum")
        }
        PolicySpec::ThompsonPhiN => {
            // Unanswered questions score exactly 0 and win outright; their
            // draws would not change the outcome, so skip them.
            let mut fresh = Reservoir::new();
            for (key, q) in net.keys().zip(net.questions()) {
                if q.tally.total() == 0 {
                    fresh.offer(key, rng);
                }
            }
            match fresh.chosen {
                Some(key) => key,
                None => {
                    let mut min = MinTracker::new();
                    for (key, q) in net.keys().zip(net.questions()) {
                        let score = q.tally.total() as f64 * draw(&q.tally, rng);
                        min.offer(key, score, rng);
                    }
                    min.res.chosen.expect("non-empty net yields a minimum")
                }
            }
        }
    };
    Ok(key)
}

fn draw(tally: &crate::net::AnswerTally, rng: &mut ChaCha8Rng) -> f64 {
    sample_link_bias(tally.alpha() as f64, tally.beta() as f64, rng)
        .expect("tally shapes are >= 1")
        .value()
}
