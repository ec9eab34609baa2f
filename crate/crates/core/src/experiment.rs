//! Seeded, replicated experiment workflows.
//!
//! Replicates run as a parallel map over derived seeds; results are
//! collected in replicate order and reduced sequentially, so the thread
//! count never changes any output value.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::graphgen::{ba_graph, er_gnm_connected_with_retries, GraphError, UnderlyingGraph};
use crate::metrics::{mean_series, DegreeCounts, MetricsSnapshot};
use crate::nullmodel::{run_null, theory_curves, GrowthSample, NullModelError, NullParams, TheoryCurves};
use crate::policy::PolicySpec;
use crate::replay::{load_oracle, random_seed_edge, run_arms, Dataset, ReplayConfig, ReplayError};
use crate::seed::replicate_seed;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    NullModel(#[from] NullModelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error("{0}")]
    Config(String),
    #[error("thread pool: {0}")]
    Pool(String),
}

/// Maps `f` over `0..n` on `jobs` threads (0 = all cores), preserving order.
pub fn parallel_map<T, F>(jobs: usize, n: u64, f: F) -> Result<Vec<T>, ExperimentError>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| ExperimentError::Pool(e.to_string()))?;
    Ok(pool.install(|| (0..n).into_par_iter().map(&f).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NullSimConfig {
    pub params: NullParams,
    pub steps: u64,
    pub policy: PolicySpec,
    pub replicates: u64,
    pub seed: u64,
    pub snapshot_every: u64,
    pub jobs: usize,
}

impl NullSimConfig {
    pub fn new(params: NullParams, steps: u64, replicates: u64, seed: u64) -> Self {
        Self {
            params,
            steps,
            policy: PolicySpec::Random,
            replicates,
            seed,
            snapshot_every: 100,
            jobs: 0,
        }
    }
}

/// Final state of one null-model replicate.
#[derive(Debug, Clone)]
pub struct NullReplicate {
    pub samples: Vec<GrowthSample>,
    pub degrees: DegreeCounts,
    /// `(entry time, final degree)` for every item.
    pub items: Vec<(u64, u32)>,
}

#[derive(Debug, Clone)]
pub struct NullSimResult {
    pub replicates: Vec<NullReplicate>,
}

impl NullSimResult {
    /// Replicate-mean trajectory with fractional counts.
    pub fn mean_trajectory(&self) -> Vec<MeanGrowthSample> {
        let n = self.replicates.len() as f64;
        let first = &self.replicates[0].samples;
        (0..first.len())
            .map(|i| {
                let mut acc = MeanGrowthSample {
                    t: first[i].t,
                    ..Default::default()
                };
                for r in &self.replicates {
                    let x = &r.samples[i];
                    acc.m += x.m as f64;
                    acc.v += x.v as f64;
                    acc.a_mean += x.a_mean;
                    acc.s_mean += x.s_mean;
                    acc.d_mean += x.d_mean;
                }
                acc.m /= n;
                acc.v /= n;
                acc.a_mean /= n;
                acc.s_mean /= n;
                acc.d_mean /= n;
                acc
            })
            .collect()
    }

    pub fn pooled_degrees(&self) -> DegreeCounts {
        let mut all = DegreeCounts::default();
        for r in &self.replicates {
            all.merge(&r.degrees);
        }
        all
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct MeanGrowthSample {
    pub t: u64,
    pub m: f64,
    pub v: f64,
    pub a_mean: f64,
    pub s_mean: f64,
    pub d_mean: f64,
}

pub fn null_sim(config: &NullSimConfig) -> Result<NullSimResult, ExperimentError> {
    if config.replicates == 0 {
        return Err(ExperimentError::Config("replicates must be at least 1".into()));
    }
    let runs = parallel_map(config.jobs, config.replicates, |i| {
        let seed = replicate_seed(config.seed, i);
        run_null(
            &config.params,
            config.steps,
            &config.policy,
            seed,
            config.snapshot_every,
        )
        .map(|traj| {
            let net = &traj.net;
            NullReplicate {
                degrees: DegreeCounts::of(net),
                items: net
                    .items()
                    .map(|i| (net.item_created_at(i).unwrap(), net.degree(i).unwrap()))
                    .collect(),
                samples: traj.samples,
            }
        })
    })?;
    Ok(NullSimResult {
        replicates: runs.into_iter().collect::<Result<_, _>>()?,
    })
}

/// Acceptance bands for the theory comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Relative error of mean `M(T)` against `eta T + 1`.
    pub growth: f64,
    /// Relative error of mean answer density against `T / (eta T + 1)`.
    pub density: f64,
    /// Allowed `|ratio - 1|` for cohort degree over predicted degree.
    pub collapse: f64,
    /// Allowed `|slope + 2|` for the log-log degree CCDF.
    pub slope: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            growth: 0.03,
            density: 0.05,
            collapse: 0.2,
            slope: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryCheckConfig {
    pub sim: NullSimConfig,
    /// Entry times of the item cohorts compared against the degree law.
    pub cohorts: Vec<u64>,
    /// A cohort holds items entering in `[t_i, t_i + max(1, width * t_i)]`.
    pub cohort_width: f64,
    pub k_min: u32,
    pub k_max: u32,
    pub tolerances: Tolerances,
}

impl TheoryCheckConfig {
    pub fn new(sim: NullSimConfig) -> Self {
        Self {
            sim,
            cohorts: vec![10, 100, 1000],
            cohort_width: 0.1,
            k_min: 4,
            k_max: 40,
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub expected: Option<f64>,
    pub observed: Option<f64>,
    /// Deviation measured against `tolerance`.
    pub delta: Option<f64>,
    pub tolerance: f64,
    pub verdict: Verdict,
    pub detail: String,
}

impl CheckResult {
    fn judged(name: &'static str, expected: f64, observed: f64, delta: f64, tolerance: f64, detail: String) -> Self {
        Self {
            name,
            expected: Some(expected),
            observed: Some(observed),
            delta: Some(delta),
            tolerance,
            verdict: if delta <= tolerance {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
            detail,
        }
    }

    fn skipped(name: &'static str, tolerance: f64, reason: impl Into<String>) -> Self {
        Self {
            name,
            expected: None,
            observed: None,
            delta: None,
            tolerance,
            verdict: Verdict::Skipped,
            detail: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryReport {
    pub rho: f64,
    pub gamma: f64,
    pub eta: f64,
    pub steps: u64,
    pub replicates: u64,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    /// No check failed.
    pub passed: bool,
}

/// Simulates the null model and compares it with the mean-field predictions.
pub fn theory_check(config: &TheoryCheckConfig) -> Result<TheoryReport, ExperimentError> {
    let sim = &config.sim;
    let result = null_sim(sim)?;
    let th: TheoryCurves<f64> = theory_curves(&sim.params);
    let tol = config.tolerances;
    let t_end = sim.steps as f64;
    let last = *result.mean_trajectory().last().expect("trajectory is non-empty");
    let mut checks = Vec::new();

    let expected_m = th.predicted_m(t_end);
    checks.push(CheckResult::judged(
        "growth",
        expected_m,
        last.m,
        ((last.m - expected_m) / expected_m).abs(),
        tol.growth,
        format!("mean question count at t={} vs eta*t+1", sim.steps),
    ));

    let expected_a = th.predicted_a(t_end);
    checks.push(CheckResult::judged(
        "answer_density",
        expected_a,
        last.a_mean,
        ((last.a_mean - expected_a) / expected_a).abs(),
        tol.density,
        format!("mean answers per question at t={} vs t/(eta*t+1)", sim.steps),
    ));

    checks.push(if th.eta <= 0.0 {
        CheckResult::skipped(
            "degree_collapse",
            tol.collapse,
            "eta = 0: no items enter after the seed",
        )
    } else {
        cohort_check(&result, &th, config)
    });

    checks.push(if th.eta <= 0.0 {
        CheckResult::skipped("degree_tail_slope", tol.slope, "eta = 0: degree distribution undefined")
    } else {
        let rows = result.pooled_degrees().rows::<f64>();
        match crate::metrics::fit_tail_slope(&rows, config.k_min, config.k_max) {
            Ok(slope) => CheckResult::judged(
                "degree_tail_slope",
                -2.0,
                slope,
                (slope + 2.0).abs(),
                tol.slope,
                format!(
                    "least-squares log-log CCDF slope over k in [{}, {}]",
                    config.k_min, config.k_max
                ),
            ),
            Err(e) => CheckResult::skipped("degree_tail_slope", tol.slope, e.to_string()),
        }
    });

    let passed = checks.iter().all(|c| c.verdict != Verdict::Fail);
    Ok(TheoryReport {
        rho: sim.params.rho,
        gamma: sim.params.gamma,
        eta: th.eta,
        steps: sim.steps,
        replicates: sim.replicates,
        seed: sim.seed,
        checks,
        passed,
    })
}

/// Mean of `k_i(T) / predicted_degree(T, t_i)` over items entering in the cohort window.
pub fn cohort_ratio(
    result: &NullSimResult,
    th: &TheoryCurves<f64>,
    steps: u64,
    t_i: u64,
    width: f64,
) -> Option<(f64, usize)> {
    let hi = t_i + ((width * t_i as f64).floor() as u64).max(1);
    let mut sum = 0.0;
    let mut n = 0;
    for r in &result.replicates {
        for &(entered, k) in &r.items {
            if entered >= t_i && entered <= hi && entered <= steps {
                sum += f64::from(k) / th.predicted_degree(steps as f64, entered as f64);
                n += 1;
            }
        }
    }
    (n > 0).then(|| (sum / n as f64, n))
}

fn cohort_check(result: &NullSimResult, th: &TheoryCurves<f64>, config: &TheoryCheckConfig) -> CheckResult {
    let tol = config.tolerances.collapse;
    let mut worst: Option<(f64, u64)> = None;
    let mut parts = Vec::new();
    for &t_i in &config.cohorts {
        match cohort_ratio(result, th, config.sim.steps, t_i, config.cohort_width) {
            Some((ratio, n)) => {
                parts.push(format!("t_i={t_i}: ratio {ratio:.4} over {n} items"));
                if worst.is_none_or(|(w, _)| (ratio - 1.0).abs() > (w - 1.0).abs()) {
                    worst = Some((ratio, t_i));
                }
            }
            None => parts.push(format!("t_i={t_i}: no items")),
        }
    }
    match worst {
        Some((ratio, t_i)) => CheckResult::judged(
            "degree_collapse",
            1.0,
            ratio,
            (ratio - 1.0).abs(),
            tol,
            format!("worst cohort t_i={t_i}; {}", parts.join("; ")),
        ),
        None => CheckResult::skipped("degree_collapse", tol, parts.join("; ")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphFamily {
    Er,
    Ba,
}

impl std::str::FromStr for GraphFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "er" => Ok(GraphFamily::Er),
            "ba" => Ok(GraphFamily::Ba),
            other => Err(format!("unknown graph family '{other}' (expected 'er' or 'ba')")),
        }
    }
}

impl GraphFamily {
    pub fn generate(
        &self,
        n: usize,
        m: usize,
        er_max_retries: u32,
        rng: &mut ChaCha8Rng,
    ) -> Result<UnderlyingGraph, GraphError> {
        match self {
            GraphFamily::Er => er_gnm_connected_with_retries(n, m, rng, er_max_retries),
            GraphFamily::Ba => ba_graph(n, m, rng),
        }
    }
}

/// The five arms: random, looping, binomial, Thompson on phi, Thompson on phi_N.
pub fn default_arms(binomial_p_min: f64, binomial_max_answers: u64) -> Vec<PolicySpec> {
    vec![
        PolicySpec::Random,
        PolicySpec::Looping,
        PolicySpec::Binomial {
            p_min: binomial_p_min,
            max_answers: binomial_max_answers,
        },
        PolicySpec::ThompsonPhi,
        PolicySpec::ThompsonPhiN,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exp1Config {
    pub family: GraphFamily,
    pub nodes: usize,
    pub edges: usize,
    pub replay: ReplayConfig,
    pub arms: Vec<PolicySpec>,
    pub replicates: u64,
    pub seed: u64,
    pub jobs: usize,
    pub er_max_retries: u32,
}

impl Exp1Config {
    pub fn new(
        family: GraphFamily,
        nodes: usize,
        edges: usize,
        rho: f64,
        steps: u64,
        replicates: u64,
        seed: u64,
    ) -> Self {
        Self {
            family,
            nodes,
            edges,
            replay: ReplayConfig::new(rho, steps, PolicySpec::Random, seed),
            arms: default_arms(0.2, 30),
            replicates,
            seed,
            jobs: 0,
            er_max_retries: crate::graphgen::DEFAULT_MAX_RETRIES,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ArmSummary {
    pub policy: PolicySpec,
    /// Replicate-mean metrics at each snapshot time.
    pub mean: Vec<MetricsSnapshot<f64>>,
    /// Final snapshot of every replicate, in replicate order.
    pub finals: Vec<MetricsSnapshot<f64>>,
    /// Answer-count histogram pooled over replicates at the final step.
    pub histogram: std::collections::BTreeMap<u64, u64>,
    pub degraded_steps: u64,
}

impl ArmSummary {
    pub fn final_mean(&self) -> &MetricsSnapshot<f64> {
        self.mean.last().expect("runs have at least one snapshot")
    }

    /// Fraction of pooled questions with at least `n` answers.
    pub fn fraction_at_least(&self, n: u64) -> f64 {
        let total: u64 = self.histogram.values().sum();
        let above: u64 = self.histogram.range(n..).map(|(_, c)| c).sum();
        above as f64 / total as f64
    }
}

#[derive(Debug, Clone)]
pub struct Exp1Result {
    pub arms: Vec<ArmSummary>,
}

impl Exp1Result {
    pub fn arm(&self, label: &str) -> Option<&ArmSummary> {
        self.arms.iter().find(|a| a.policy.label() == label)
    }
}

/// Runs every arm on each replicate's graph, oracle and seed question.
///
/// Replicate `i` draws its graph, question-to-edge assignment and seed edge
/// from `replicate_seed(seed, i)`; arm `k` of that replicate runs with
/// `replicate_seed(replicate_seed(seed, i), k)`.
pub fn exp1(config: &Exp1Config, dataset: &Dataset) -> Result<Exp1Result, ExperimentError> {
    if config.replicates == 0 {
        return Err(ExperimentError::Config("replicates must be at least 1".into()));
    }
    if config.arms.is_empty() {
        return Err(ExperimentError::Config("at least one arm is required".into()));
    }
    if dataset.questions.len() != config.edges {
        return Err(ReplayError::SizeMismatch {
            questions: dataset.questions.len(),
            edges: config.edges,
        }
        .into());
    }
    config.replay.validate()?;

    let runs = parallel_map(config.jobs, config.replicates, |i| -> Result<_, ExperimentError> {
        let rep_seed = replicate_seed(config.seed, i);
        let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
        let graph = config
            .family
            .generate(config.nodes, config.edges, config.er_max_retries, &mut rng)?;
        let oracle = load_oracle(dataset, &graph, &mut rng)?;
        let seed_edge = random_seed_edge(&graph, &mut rng);
        let arm_seeds: Vec<u64> = (0..config.arms.len() as u64)
            .map(|k| replicate_seed(rep_seed, k))
            .collect();
        let outcomes = run_arms(&graph, &oracle, &config.replay, &config.arms, &arm_seeds, seed_edge)?;
        Ok(outcomes
            .into_iter()
            .map(|o| (o.snapshots, o.histogram, o.degraded_steps))
            .collect::<Vec<_>>())
    })?;
    let runs: Vec<_> = runs.into_iter().collect::<Result<_, _>>()?;

    let arms = config
        .arms
        .iter()
        .enumerate()
        .map(|(k, &policy)| {
            let series: Vec<Vec<MetricsSnapshot<f64>>> = runs.iter().map(|r| r[k].0.clone()).collect();
            let mut histogram = std::collections::BTreeMap::new();
            for r in &runs {
                for (&n, &c) in &r[k].1 {
                    *histogram.entry(n).or_insert(0) += c;
                }
            }
            ArmSummary {
                policy,
                mean: mean_series(&series),
                finals: series.iter().map(|s| *s.last().expect("non-empty series")).collect(),
                histogram,
                degraded_steps: runs.iter().map(|r| r[k].2).sum(),
            }
        })
        .collect();
    Ok(Exp1Result { arms })
}
