//! Null growth model for an uncontrolled question network, and its
//! closed-form mean-field predictions.
//!
//! Each step a question is chosen (uniformly at random under the null
//! model), answered once, and with probability `rho` the worker proposes a
//! brand-new item `w`. With probability `gamma` the item joins one endpoint
//! of the answered question (fair coin), otherwise both.

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::metrics::uncertainty;
use crate::net::{Answer, ItemId, QuestionKey, QuestionNet};
use crate::policy::{select, PolicyError, PolicySpec, SamplerState};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NullModelError {
    #[error("{name} must lie in [0, 1], got {value}")]
    BadProbability { name: &'static str, value: f64 },
    #[error("run length must be at least 1 step")]
    NoSteps,
    #[error("snapshot interval must be at least 1")]
    BadSnapshotInterval,
    #[error("exploration rate is zero; the degree distribution is undefined")]
    ZeroExploration,
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

fn probability(name: &'static str, value: f64) -> Result<f64, NullModelError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(NullModelError::BadProbability { name, value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NullParams {
    /// Innovation rate.
    pub rho: f64,
    /// Probability that a new item links to only one endpoint.
    pub gamma: f64,
    /// Probability of a 'yes' answer.
    pub answer_p: f64,
}

impl NullParams {
    pub fn new(rho: f64, gamma: f64) -> Result<Self, NullModelError> {
        Self::with_answer_p(rho, gamma, 0.5)
    }

    pub fn with_answer_p(rho: f64, gamma: f64, answer_p: f64) -> Result<Self, NullModelError> {
        Ok(Self {
            rho: probability("rho", rho)?,
            gamma: probability("gamma", gamma)?,
            answer_p: probability("answer_p", answer_p)?,
        })
    }

    /// Exploration rate `eta = rho (2 - gamma)`, the mean number of questions added per step.
    pub fn eta(&self) -> f64 {
        self.rho * (2.0 - self.gamma)
    }
}

/// Per-question innovation and branching rates.
///
/// The null model uses one global pair; other suppliers can vary them by question.
pub trait InnovationRates {
    fn rates(&self, net: &QuestionNet, question: QuestionKey) -> (f64, f64);
}

impl InnovationRates for NullParams {
    fn rates(&self, _net: &QuestionNet, _question: QuestionKey) -> (f64, f64) {
        (self.rho, self.gamma)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepEvent {
    pub question: QuestionKey,
    pub answer: Answer,
    pub new_item: Option<ItemId>,
    pub new_questions: Vec<QuestionKey>,
}

pub fn step_null(
    net: &mut QuestionNet,
    params: &NullParams,
    policy: &PolicySpec,
    state: &mut SamplerState,
) -> Result<StepEvent, NullModelError> {
    step_null_with(net, params, params.answer_p, policy, state)
}

pub fn step_null_with<R: InnovationRates>(
    net: &mut QuestionNet,
    rates: &R,
    answer_p: f64,
    policy: &PolicySpec,
    state: &mut SamplerState,
) -> Result<StepEvent, NullModelError> {
    let question = select(net, policy, state)?;
    let answer = Answer::from_bool(state.rng.random_bool(answer_p));
    net.record_answer(question, answer).expect("selected question exists");

    let (rho, gamma) = rates.rates(net, question);
    let mut event = StepEvent {
        question,
        answer,
        new_item: None,
        new_questions: Vec::new(),
    };
    if state.rng.random_bool(rho) {
        let (u, v) = net.question(question).expect("selected question exists").endpoints;
        let w = net.add_item();
        let targets: &[ItemId] = if state.rng.random_bool(gamma) {
            if state.rng.random_bool(0.5) {
                &[u]
            } else {
                &[v]
            }
        } else {
            &[u, v]
        };
        for &x in targets {
            let key = net.add_question(x, w).expect("a new item has no questions yet");
            event.new_questions.push(key);
        }
        event.new_item = Some(w);
    }
    Ok(event)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthSample {
    pub t: u64,
    /// Questions.
    pub m: usize,
    /// Items.
    pub v: usize,
    pub a_mean: f64,
    pub s_mean: f64,
    pub d_mean: f64,
}

impl GrowthSample {
    fn of(net: &QuestionNet) -> Self {
        let (s_mean, d_mean) = uncertainty::<f64>(net);
        Self {
            t: net.clock(),
            m: net.question_count(),
            v: net.item_count(),
            a_mean: net.clock() as f64 / net.question_count() as f64,
            s_mean,
            d_mean,
        }
    }
}

/// Samples at `t = 0`, every `snapshot_every` steps, and at the final step.
/// Item entry times are available from the final net.
#[derive(Debug, Clone)]
pub struct GrowthTrajectory {
    pub samples: Vec<GrowthSample>,
    pub net: QuestionNet,
}

impl GrowthTrajectory {
    pub fn final_sample(&self) -> &GrowthSample {
        self.samples.last().expect("a trajectory has at least the t = 0 sample")
    }
}

/// Grows a net from the two-item seed for `steps` steps. Deterministic in `seed`.
pub fn run_null(
    params: &NullParams,
    steps: u64,
    policy: &PolicySpec,
    seed: u64,
    snapshot_every: u64,
) -> Result<GrowthTrajectory, NullModelError> {
    if steps == 0 {
        return Err(NullModelError::NoSteps);
    }
    if snapshot_every == 0 {
        return Err(NullModelError::BadSnapshotInterval);
    }
    policy.validate()?;
    let mut net = QuestionNet::seeded();
    let mut state = SamplerState::new(seed);
    let mut samples = vec![GrowthSample::of(&net)];
    for t in 1..=steps {
        step_null(&mut net, params, policy, &mut state)?;
        if t % snapshot_every == 0 || t == steps {
            samples.push(GrowthSample::of(&net));
        }
    }
    Ok(GrowthTrajectory { samples, net })
}

/// Mean-field predictions for the null model with Random selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryCurves<T> {
    pub rho: T,
    pub eta: T,
}

pub fn theory_curves<T: Scalar>(params: &NullParams) -> TheoryCurves<T> {
    TheoryCurves {
        rho: T::of(params.rho),
        eta: T::of(params.eta()),
    }
}

impl<T: Scalar> TheoryCurves<T> {
    /// Expected question count, `eta t + 1`.
    pub fn predicted_m(&self, t: T) -> T {
        self.eta * t + T::one()
    }

    /// Expected answers per question, `t / (eta t + 1)`.
    pub fn predicted_a(&self, t: T) -> T {
        t / self.predicted_m(t)
    }

    /// Expected degree at time `t` of an item that entered at `t_i`:
    /// `(eta / rho) sqrt((1 + eta t) / (1 + eta t_i))`, and 0 before entry.
    pub fn predicted_degree(&self, t: T, t_i: T) -> T {
        if t < t_i {
            return T::zero();
        }
        (self.eta / self.rho) * ((T::one() + self.eta * t) / (T::one() + self.eta * t_i)).sqrt()
    }

    /// Asymptotic degree distribution `2 (eta / rho)^2 k^-3`.
    pub fn predicted_pk(&self, k: T) -> Result<T, NullModelError> {
        if self.eta <= T::zero() {
            return Err(NullModelError::ZeroExploration);
        }
        let ratio = self.eta / self.rho;
        Ok(T::of(2.0) * ratio * ratio / (k * k * k))
    }
}
