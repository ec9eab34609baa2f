//! Replay of crowdsourcing over a hidden underlying graph.
//!
//! The visible net starts from one underlying edge. Each step the policy
//! picks a visible question, a simulated worker answers 'yes' with the
//! question's dataset proportion, and with probability `rho` an unseen
//! underlying neighbor of one of the question's items is revealed together
//! with its edges to those items. When innovation fires but the question
//! has no unseen neighbors, the whole attempt is rolled back and retried.

use std::collections::BTreeMap;
use std::io::BufRead;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graphgen::UnderlyingGraph;
use crate::metrics::{answers_histogram, snapshot, Denominators, MetricsSnapshot};
use crate::net::{Answer, ItemId, QuestionKey, QuestionNet};
use crate::policy::{select, PolicyError, PolicySpec, SamplerState};

/// Rollback retries before a step is kept as answer-only.
pub const DEFAULT_MAX_RETRIES: u32 = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReplayError {
    #[error("dataset has {questions} questions but the graph has {edges} edges")]
    SizeMismatch { questions: usize, edges: usize },
    #[error("dataset line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o: {0}")]
    Io(String),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

impl From<std::io::Error> for ReplayError {
    fn from(e: std::io::Error) -> Self {
        ReplayError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetQuestion {
    pub id: String,
    pub n_yes: u64,
    pub n_total: u64,
}

impl DatasetQuestion {
    pub fn proportion_yes(&self) -> f64 {
        self.n_yes as f64 / self.n_total as f64
    }
}

/// Aggregate answers per question: `question_id<TAB>n_yes<TAB>n_total`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dataset {
    pub questions: Vec<DatasetQuestion>,
}

impl Dataset {
    pub fn read_from<R: BufRead>(r: R) -> Result<Self, ReplayError> {
        let mut questions = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let t = line.trim_end_matches(['\r', '\n']);
            if t.trim().is_empty() || t.trim_start().starts_with('#') {
                continue;
            }
            let err = |msg: String| ReplayError::Parse { line: line_no, msg };
            let fields: Vec<&str> = t.split('\t').collect();
            if fields.len() != 3 {
                return Err(err(format!(
                    "expected 3 tab-separated fields 'question_id n_yes n_total', got {}",
                    fields.len()
                )));
            }
            let n_yes: u64 = fields[1]
                .trim()
                .parse()
                .map_err(|_| err(format!("bad n_yes '{}'", fields[1])))?;
            let n_total: u64 = fields[2]
                .trim()
                .parse()
                .map_err(|_| err(format!("bad n_total '{}'", fields[2])))?;
            if n_total == 0 || n_yes > n_total {
                return Err(err(format!(
                    "need 0 <= n_yes <= n_total and n_total > 0, got {n_yes}/{n_total}"
                )));
            }
            questions.push(DatasetQuestion {
                id: fields[0].trim().to_string(),
                n_yes,
                n_total,
            });
        }
        Ok(Self { questions })
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("# question_id\tn_yes\tn_total\n");
        for q in &self.questions {
            s.push_str(&format!("{}\t{}\t{}\n", q.id, q.n_yes, q.n_total));
        }
        s
    }

    /// Stand-in for a real benchmark: `questions` items with `answers_each`
    /// answers. Each question has a hidden label and a worker accuracy drawn
    /// uniformly from [0.5, 1]; answers are Binomial draws from that rate.
    pub fn synthetic<R: Rng + ?Sized>(questions: usize, answers_each: u64, rng: &mut R) -> Self {
        let questions = (0..questions)
            .map(|i| {
                let accuracy = rng.random_range(0.5..=1.0);
                let p_yes = if rng.random_bool(0.5) { accuracy } else { 1.0 - accuracy };
                let n_yes = (0..answers_each).filter(|_| rng.random_bool(p_yes)).count() as u64;
                DatasetQuestion {
                    id: format!("s{i}"),
                    n_yes,
                    n_total: answers_each,
                }
            })
            .collect();
        Self { questions }
    }
}

/// Probability of a 'yes' answer for every underlying edge.
#[derive(Debug, Clone, PartialEq)]
pub struct AnswerOracle {
    // Indexed like `UnderlyingGraph::edges`.
    p_yes: Vec<f64>,
    edge_index: std::collections::HashMap<(u32, u32), usize>,
}

impl AnswerOracle {
    pub fn from_probabilities(graph: &UnderlyingGraph, p_yes: Vec<f64>) -> Result<Self, ReplayError> {
        if p_yes.len() != graph.edge_count() {
            return Err(ReplayError::SizeMismatch {
                questions: p_yes.len(),
                edges: graph.edge_count(),
            });
        }
        if let Some(bad) = p_yes.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(ReplayError::Config(format!("answer probability {bad} outside [0, 1]")));
        }
        let edge_index = graph.edges().iter().enumerate().map(|(i, &e)| (e, i)).collect();
        Ok(Self { p_yes, edge_index })
    }

    pub fn p_yes(&self, u: u32, v: u32) -> Option<f64> {
        let key = if u <= v { (u, v) } else { (v, u) };
        self.edge_index.get(&key).map(|&i| self.p_yes[i])
    }

    pub fn len(&self) -> usize {
        self.p_yes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_yes.is_empty()
    }
}

/// Assigns dataset questions to graph edges by a seeded uniform bijection.
pub fn load_oracle<R: Rng + ?Sized>(
    dataset: &Dataset,
    graph: &UnderlyingGraph,
    rng: &mut R,
) -> Result<AnswerOracle, ReplayError> {
    if dataset.questions.len() != graph.edge_count() {
        return Err(ReplayError::SizeMismatch {
            questions: dataset.questions.len(),
            edges: graph.edge_count(),
        });
    }
    let mut order: Vec<usize> = (0..dataset.questions.len()).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), rng);
    let p_yes = order.iter().map(|&q| dataset.questions[q].proportion_yes()).collect();
    AnswerOracle::from_probabilities(graph, p_yes)
}

/// How the revealed item is drawn from the unseen neighbors of `i` and `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NeighborChoice {
    /// Uniform over the union of both neighbor sets.
    #[default]
    Pooled,
    /// Fair coin between the endpoints that have unseen neighbors, then uniform.
    TwoStage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplayConfig {
    pub rho: f64,
    pub steps: u64,
    pub policy: PolicySpec,
    pub seed: u64,
    pub snapshot_every: u64,
    pub max_retries: u32,
    pub neighbor_choice: NeighborChoice,
}

impl ReplayConfig {
    pub fn new(rho: f64, steps: u64, policy: PolicySpec, seed: u64) -> Self {
        Self {
            rho,
            steps,
            policy,
            seed,
            snapshot_every: 100,
            max_retries: DEFAULT_MAX_RETRIES,
            neighbor_choice: NeighborChoice::Pooled,
        }
    }

    pub fn validate(&self) -> Result<(), ReplayError> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(ReplayError::Config(format!("rho must lie in [0, 1], got {}", self.rho)));
        }
        if self.steps == 0 {
            return Err(ReplayError::Config("steps must be at least 1".into()));
        }
        if self.snapshot_every == 0 {
            return Err(ReplayError::Config("snapshot interval must be at least 1".into()));
        }
        self.policy.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayEvent {
    pub question: QuestionKey,
    pub answer: Answer,
    pub revealed: Option<ItemId>,
    pub new_questions: Vec<QuestionKey>,
    /// Attempts rolled back before this step completed.
    pub rollbacks: u32,
    /// Retries ran out; the step was kept as answer-only.
    pub degraded: bool,
}

/// One replay run in progress.
#[derive(Debug, Clone)]
pub struct Replay<'a> {
    graph: &'a UnderlyingGraph,
    oracle: &'a AnswerOracle,
    config: ReplayConfig,
    net: QuestionNet,
    state: SamplerState,
    node_of_item: Vec<u32>,
    item_of_node: Vec<Option<ItemId>>,
    degraded_steps: u64,
}

impl<'a> Replay<'a> {
    /// Starts from the single visible question `seed_edge`.
    pub fn new(
        graph: &'a UnderlyingGraph,
        oracle: &'a AnswerOracle,
        config: ReplayConfig,
        seed_edge: (u32, u32),
    ) -> Result<Self, ReplayError> {
        config.validate()?;
        if oracle.len() != graph.edge_count() {
            return Err(ReplayError::SizeMismatch {
                questions: oracle.len(),
                edges: graph.edge_count(),
            });
        }
        if !graph.has_edge(seed_edge.0, seed_edge.1) {
            return Err(ReplayError::Config(format!(
                "seed edge ({}, {}) is not in the underlying graph",
                seed_edge.0, seed_edge.1
            )));
        }
        let mut replay = Self {
            graph,
            oracle,
            config,
            net: QuestionNet::new(),
            state: SamplerState::new(config.seed),
            node_of_item: Vec::new(),
            item_of_node: vec![None; graph.node_count()],
            degraded_steps: 0,
        };
        let a = replay.reveal(seed_edge.0);
        let b = replay.reveal(seed_edge.1);
        replay.net.add_question(a, b).expect("seed items are fresh");
        Ok(replay)
    }

    fn reveal(&mut self, node: u32) -> ItemId {
        let item = self.net.add_item();
        self.node_of_item.push(node);
        self.item_of_node[node as usize] = Some(item);
        item
    }

    pub fn net(&self) -> &QuestionNet {
        &self.net
    }

    pub fn degraded_steps(&self) -> u64 {
        self.degraded_steps
    }

    /// Underlying node behind a visible item.
    pub fn node_of(&self, item: ItemId) -> u32 {
        self.node_of_item[item.index()]
    }

    pub fn denominators(&self) -> Denominators {
        Denominators {
            items: self.graph.node_count(),
            questions: self.graph.edge_count(),
        }
    }

    fn unseen_neighbors(&self, node: u32) -> impl Iterator<Item = u32> + '_ {
        self.graph
            .neighbors(node)
            .iter()
            .copied()
            .filter(|&w| self.item_of_node[w as usize].is_none())
    }

    fn pick_new_node(&mut self, a: u32, b: u32) -> Option<u32> {
        match self.config.neighbor_choice {
            NeighborChoice::Pooled => {
                let mut pool: Vec<u32> = self.unseen_neighbors(a).chain(self.unseen_neighbors(b)).collect();
                pool.sort_unstable();
                pool.dedup();
                pool.choose(&mut self.state.rng).copied()
            }
            NeighborChoice::TwoStage => {
                let from_a: Vec<u32> = self.unseen_neighbors(a).collect();
                let from_b: Vec<u32> = self.unseen_neighbors(b).collect();
                let side = match (from_a.is_empty(), from_b.is_empty()) {
                    (true, true) => return None,
                    (false, true) => &from_a,
                    (true, false) => &from_b,
                    (false, false) => {
                        if self.state.rng.random_bool(0.5) {
                            &from_a
                        } else {
                            &from_b
                        }
                    }
                };
                side.choose(&mut self.state.rng).copied()
            }
        }
    }

    /// Advances the clock by exactly one answer.
    pub fn step(&mut self) -> Result<ReplayEvent, ReplayError> {
        let mut rollbacks = 0;
        loop {
            let question = select(&self.net, &self.config.policy, &mut self.state)?;
            let (i, j) = self.net.question(question).expect("selected question exists").endpoints;
            let (a, b) = (self.node_of(i), self.node_of(j));
            let p = self.oracle.p_yes(a, b).expect("visible questions are underlying edges");
            let answer = Answer::from_bool(self.state.rng.random_bool(p));
            self.net
                .record_answer(question, answer)
                .expect("selected question exists");

            let mut event = ReplayEvent {
                question,
                answer,
                revealed: None,
                new_questions: Vec::new(),
                rollbacks,
                degraded: false,
            };
            if !self.state.rng.random_bool(self.config.rho) {
                return Ok(event);
            }
            match self.pick_new_node(a, b) {
                Some(w) => {
                    let item = self.reveal(w);
                    for (visible, node) in [(i, a), (j, b)] {
                        if self.graph.has_edge(w, node) {
                            let key = self.net.add_question(visible, item).expect("new item has no questions");
                            event.new_questions.push(key);
                        }
                    }
                    event.revealed = Some(item);
                    return Ok(event);
                }
                None if rollbacks < self.config.max_retries => {
                    self.net
                        .retract_answer(question, answer)
                        .expect("answer was just recorded");
                    rollbacks += 1;
                }
                None => {
                    self.degraded_steps += 1;
                    event.degraded = true;
                    return Ok(event);
                }
            }
        }
    }

    /// Runs all configured steps, snapshotting at every multiple of
    /// `snapshot_every` and at the final step.
    pub fn run(mut self) -> Result<ReplayOutcome, ReplayError> {
        let denom = self.denominators();
        let mut snapshots = Vec::new();
        for t in 1..=self.config.steps {
            self.step()?;
            if t % self.config.snapshot_every == 0 || t == self.config.steps {
                snapshots.push(snapshot(&self.net, denom).expect("visible net is non-empty and within totals"));
            }
        }
        Ok(ReplayOutcome {
            policy: self.config.policy,
            snapshots,
            histogram: answers_histogram(&self.net),
            degraded_steps: self.degraded_steps,
            net: self.net,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ReplayOutcome {
    pub policy: PolicySpec,
    pub snapshots: Vec<MetricsSnapshot<f64>>,
    pub histogram: BTreeMap<u64, u64>,
    pub degraded_steps: u64,
    pub net: QuestionNet,
}

/// Runs each arm from the same seed question, with arm `k` seeded by `arm_seeds[k]`.
pub fn run_arms(
    graph: &UnderlyingGraph,
    oracle: &AnswerOracle,
    base: &ReplayConfig,
    arms: &[PolicySpec],
    arm_seeds: &[u64],
    seed_edge: (u32, u32),
) -> Result<Vec<ReplayOutcome>, ReplayError> {
    assert_eq!(arms.len(), arm_seeds.len(), "one seed per arm");
    arms.iter()
        .zip(arm_seeds)
        .map(|(&policy, &seed)| {
            let config = ReplayConfig { policy, seed, ..*base };
            Replay::new(graph, oracle, config, seed_edge)?.run()
        })
        .collect()
}

/// Uniformly random underlying edge, used as the first visible question.
pub fn random_seed_edge<R: Rng + ?Sized>(graph: &UnderlyingGraph, rng: &mut R) -> (u32, u32) {
    *graph.edges().choose(rng).expect("underlying graphs have edges")
}

/// Convenience for tests and examples: a seeded generator.
pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
