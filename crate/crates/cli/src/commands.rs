//! The three workflows and their file outputs.
//!
//! Every file is written from replicate-ordered, sequentially reduced
//! results, so the bytes depend on the configuration alone.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::json;

use qnet_core::experiment::{
    default_arms, exp1 as run_exp1, null_sim as run_null_sim, theory_check as run_theory_check, Exp1Config,
    GraphFamily, MeanGrowthSample, NullSimConfig, TheoryCheckConfig, Tolerances, Verdict,
};
use qnet_core::metrics::{write_degree_csv, write_histogram_csv, write_snapshots_csv, DegreeRow};
use qnet_core::nullmodel::{theory_curves, GrowthSample, NullParams, TheoryCurves};
use qnet_core::replay::{rng_from, Dataset, NeighborChoice};
use qnet_core::PolicySpec;

use crate::config::Resolver;
use crate::{CliError, Exp1Args, NullArgs, NullSimArgs, Outcome, SharedArgs, TheoryCheckArgs};

/// Answers per question in the generated stand-in dataset.
pub const SYNTHETIC_ANSWERS_PER_QUESTION: u64 = 10;

const TRAJECTORY_HEADER: &str = "t,M,V,A_mean,S_mean,d_mean";

struct Defaults {
    steps: u64,
    replicates: u64,
    snapshot_every: u64,
    out: &'static str,
}

fn resolve_null(
    r: &mut Resolver,
    shared: &SharedArgs,
    model: &NullArgs,
    d: Defaults,
) -> Result<(NullSimConfig, PathBuf), CliError> {
    let rho = r.get("rho", model.rho, 0.2)?;
    let gamma = r.get("gamma", model.gamma, 0.5)?;
    let answer_p = r.get("answer-p", model.answer_p, 0.5)?;
    let steps = r.get("steps", model.steps, d.steps)?;
    let policy: PolicySpec = r.get(
        "policy",
        parse_opt(model.policy.as_deref(), "policy")?,
        PolicySpec::Random,
    )?;
    let params = NullParams::with_answer_p(rho, gamma, answer_p).map_err(|e| CliError::Config(e.to_string()))?;
    let mut sim = NullSimConfig::new(params, steps, 0, 0);
    sim.policy = policy;
    sim.seed = r.get("seed", shared.seed, 0)?;
    sim.replicates = r.get("replicates", shared.replicates, d.replicates)?;
    sim.snapshot_every = r.get("snapshot-every", shared.snapshot_every, d.snapshot_every)?;
    sim.jobs = r.get("jobs", shared.jobs, 0)?;
    let out = r.get("out", shared.out.clone(), PathBuf::from(d.out))?;
    if sim.steps == 0 {
        return Err(CliError::Config("field 'steps': must be at least 1".into()));
    }
    if sim.replicates == 0 {
        return Err(CliError::Config("field 'replicates': must be at least 1".into()));
    }
    if sim.snapshot_every == 0 {
        return Err(CliError::Config("field 'snapshot-every': must be at least 1".into()));
    }
    sim.policy
        .validate()
        .map_err(|e| CliError::Config(format!("field 'policy': {e}")))?;
    Ok((sim, out))
}

fn parse_opt<T>(raw: Option<&str>, field: &str) -> Result<Option<T>, CliError>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    raw.map(|s| {
        s.parse()
            .map_err(|e| CliError::Config(format!("flag '--{field}': {e}")))
    })
    .transpose()
}

pub fn null_sim(a: &NullSimArgs) -> Result<Outcome, CliError> {
    let mut r = Resolver::new(a.shared.config.as_deref())?;
    let defaults = Defaults {
        steps: 5000,
        replicates: 100,
        snapshot_every: 100,
        out: "out/null-sim",
    };
    let (sim, out) = resolve_null(&mut r, &a.shared, &a.model, defaults)?;
    r.finish()?;

    let result = run_null_sim(&sim)?;
    let th: TheoryCurves<f64> = theory_curves(&sim.params);
    let rep_dir = out.join("replicates");
    create_dir(&rep_dir)?;
    let width = (sim.replicates - 1).to_string().len().max(4);
    for (i, rep) in result.replicates.iter().enumerate() {
        write_file(&rep_dir.join(format!("rep_{i:0width$}.csv")), |w| {
            write_trajectory(&rep.samples, w)
        })?;
    }
    let mean = result.mean_trajectory();
    write_file(&out.join("mean.csv"), |w| write_mean_trajectory(&mean, w))?;
    write_file(&out.join("theory.csv"), |w| {
        writeln!(w, "t,M,A_mean")?;
        for s in &mean {
            let t = s.t as f64;
            writeln!(w, "{},{},{}", s.t, th.predicted_m(t), th.predicted_a(t))?;
        }
        Ok(())
    })?;
    let degrees: Vec<DegreeRow<f64>> = result.pooled_degrees().rows();
    write_file(&out.join("degrees.csv"), |w| write_degree_csv(&degrees, w))?;

    let last = mean.last().expect("trajectory is non-empty");
    let t_end = sim.steps as f64;
    let summary = json!({
        "command": "null-sim",
        "config": sim_json(&sim),
        "final_mean": last,
        "theory": { "eta": th.eta, "M": th.predicted_m(t_end), "A_mean": th.predicted_a(t_end) },
    });
    write_json(&out.join("summary.json"), &summary)?;
    println!(
        "null-sim: {} replicates, T={}: mean M={:.3} (theory {:.3}), mean A={:.4} (theory {:.4}); wrote {}",
        sim.replicates,
        sim.steps,
        last.m,
        th.predicted_m(t_end),
        last.a_mean,
        th.predicted_a(t_end),
        out.display()
    );
    Ok(Outcome::Done)
}

fn sim_json(sim: &NullSimConfig) -> serde_json::Value {
    json!({
        "rho": sim.params.rho,
        "gamma": sim.params.gamma,
        "answer_p": sim.params.answer_p,
        "steps": sim.steps,
        "policy": sim.policy.to_string(),
        "replicates": sim.replicates,
        "seed": sim.seed,
        "snapshot_every": sim.snapshot_every,
    })
}

fn write_trajectory(samples: &[GrowthSample], w: &mut dyn Write) -> std::io::Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for s in samples {
        writeln!(w, "{},{},{},{},{},{}", s.t, s.m, s.v, s.a_mean, s.s_mean, s.d_mean)?;
    }
    Ok(())
}

fn write_mean_trajectory(samples: &[MeanGrowthSample], w: &mut dyn Write) -> std::io::Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for s in samples {
        writeln!(w, "{},{},{},{},{},{}", s.t, s.m, s.v, s.a_mean, s.s_mean, s.d_mean)?;
    }
    Ok(())
}

/// Applies `name=value` overrides; `all` sets every tolerance.
pub fn apply_tolerance(tol: &mut Tolerances, spec: &str) -> Result<(), CliError> {
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = |why: &str| CliError::Config(format!("tolerance '{part}': {why}"));
        let (name, value) = part.split_once('=').ok_or_else(|| bad("expected NAME=VALUE"))?;
        let value: f64 = value.trim().parse().map_err(|_| bad("value is not a number"))?;
        if value.is_nan() || value < 0.0 {
            return Err(bad("value must be non-negative"));
        }
        match name.trim() {
            "growth" => tol.growth = value,
            "density" => tol.density = value,
            "collapse" => tol.collapse = value,
            "slope" => tol.slope = value,
            "all" => {
                *tol = Tolerances {
                    growth: value,
                    density: value,
                    collapse: value,
                    slope: value,
                }
            }
            _ => return Err(bad("name must be growth, density, collapse, slope or all")),
        }
    }
    Ok(())
}

pub fn theory_check(a: &TheoryCheckArgs) -> Result<Outcome, CliError> {
    let mut r = Resolver::new(a.shared.config.as_deref())?;
    let defaults = Defaults {
        steps: 10_000,
        replicates: 200,
        snapshot_every: 1000,
        out: "out/theory-check",
    };
    let (sim, out) = resolve_null(&mut r, &a.shared, &a.model, defaults)?;
    let mut config = TheoryCheckConfig::new(sim);
    // File overrides apply first so flag overrides of the same name win.
    if let Some(spec) = r.get_opt::<String>("tolerance", None)? {
        apply_tolerance(&mut config.tolerances, &spec)?;
    }
    for spec in &a.tolerances {
        apply_tolerance(&mut config.tolerances, spec)?;
    }
    r.finish()?;

    let report = run_theory_check(&config)?;
    create_dir(&out)?;
    write_json(&out.join("report.json"), &report)?;
    for c in &report.checks {
        let verdict = match c.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Skipped => "SKIP",
        };
        match (c.observed, c.expected, c.delta) {
            (Some(obs), Some(exp), Some(delta)) => println!(
                "{verdict} {}: observed {obs:.6}, expected {exp:.6}, delta {delta:.6} (tolerance {})",
                c.name, c.tolerance
            ),
            _ => println!("{verdict} {}: {}", c.name, c.detail),
        }
    }
    Ok(if report.passed {
        Outcome::Done
    } else {
        Outcome::ChecksFailed
    })
}

fn parse_neighbor_choice(s: &str) -> Result<NeighborChoice, String> {
    match s {
        "pooled" => Ok(NeighborChoice::Pooled),
        "two-stage" => Ok(NeighborChoice::TwoStage),
        other => Err(format!(
            "unknown neighbor choice '{other}' (expected 'pooled' or 'two-stage')"
        )),
    }
}

#[derive(Debug, Clone, Copy)]
struct Choice(NeighborChoice);

impl std::str::FromStr for Choice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_neighbor_choice(s).map(Choice)
    }
}

pub fn exp1(a: &Exp1Args) -> Result<Outcome, CliError> {
    let mut r = Resolver::new(a.shared.config.as_deref())?;
    let family: GraphFamily = r.get("graph", parse_opt(a.graph.as_deref(), "graph")?, GraphFamily::Er)?;
    let nodes = r.get("nodes", a.nodes, 400)?;
    let edges = r.get("edges", a.edges, 800)?;
    let rho = r.get("rho", a.rho, 0.2)?;
    let steps = r.get("steps", a.steps, 6000)?;
    let replicates = r.get("replicates", a.shared.replicates, 100)?;
    let seed = r.get("seed", a.shared.seed, 0)?;
    let mut config = Exp1Config::new(family, nodes, edges, rho, steps, replicates, seed);
    config.replay.snapshot_every = r.get("snapshot-every", a.shared.snapshot_every, 100)?;
    config.replay.max_retries = r.get("max-retries", a.max_retries, config.replay.max_retries)?;
    config.replay.neighbor_choice = r
        .get(
            "neighbor-choice",
            parse_opt(a.neighbor_choice.as_deref(), "neighbor-choice")?,
            Choice(NeighborChoice::Pooled),
        )?
        .0;
    config.er_max_retries = r.get("er-max-retries", a.er_max_retries, config.er_max_retries)?;
    config.jobs = r.get("jobs", a.shared.jobs, 0)?;
    let p_min = r.get("binomial-p-min", a.binomial_p_min, 0.2)?;
    let max_answers = r.get("binomial-max-answers", a.binomial_max_answers, 30)?;
    let data = r.get_opt("data", a.data.clone())?;
    let out = r.get("out", a.shared.out.clone(), PathBuf::from("out/exp1"))?;
    r.finish()?;

    PolicySpec::binomial(p_min, max_answers).map_err(|e| CliError::Config(format!("binomial arm: {e}")))?;
    config.arms = default_arms(p_min, max_answers);
    config.replay.validate().map_err(|e| CliError::Config(e.to_string()))?;
    if replicates == 0 {
        return Err(CliError::Config("field 'replicates': must be at least 1".into()));
    }

    let dataset = match &data {
        Some(path) => {
            let file = File::open(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            Dataset::read_from(BufReader::new(file)).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        }
        None => Dataset::synthetic(edges, SYNTHETIC_ANSWERS_PER_QUESTION, &mut rng_from(seed)),
    };

    let result = run_exp1(&config, &dataset)?;
    create_dir(&out)?;
    if data.is_none() {
        write_file(&out.join("dataset.tsv"), |w| w.write_all(dataset.to_tsv().as_bytes()))?;
    }
    let mut arms = Vec::new();
    for arm in &result.arms {
        let label = arm.policy.label();
        write_file(&out.join(format!("{label}.csv")), |w| write_snapshots_csv(&arm.mean, w))?;
        write_file(&out.join(format!("{label}_hist.csv")), |w| {
            write_histogram_csv(&arm.histogram, w)
        })?;
        arms.push(json!({
            "policy": arm.policy.to_string(),
            "final_mean": arm.final_mean(),
            "degraded_steps": arm.degraded_steps,
        }));
        let f = arm.final_mean();
        println!(
            "{label:>15}: f_nodes={:.4} f_edges={:.4} S={:.4} d={:.4} A={:.3}",
            f.f_nodes, f.f_edges, f.avg_entropy, f.avg_link_bias, f.avg_answer_density
        );
    }
    let summary = json!({
        "command": "exp1",
        "graph": family,
        "nodes": nodes,
        "edges": edges,
        "rho": rho,
        "steps": steps,
        "replicates": replicates,
        "seed": seed,
        "snapshot_every": config.replay.snapshot_every,
        "neighbor_choice": config.replay.neighbor_choice,
        "max_retries": config.replay.max_retries,
        "dataset": data.as_ref().map_or_else(|| "synthetic".to_string(), |p| p.display().to_string()),
        "arms": arms,
    });
    write_json(&out.join("summary.json"), &summary)?;
    println!("exp1: wrote {}", out.display());
    Ok(Outcome::Done)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn write_file<F>(path: &Path, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    body(&mut w).map_err(io)?;
    w.flush().map_err(io)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_file(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(std::io::Error::other)?;
        writeln!(w)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_overrides() {
        let mut t = Tolerances::default();
        apply_tolerance(&mut t, "growth=0.1, slope=0.5").unwrap();
        assert_eq!((t.growth, t.density, t.slope), (0.1, 0.05, 0.5));
        apply_tolerance(&mut t, "all=0").unwrap();
        assert_eq!(
            t,
            Tolerances {
                growth: 0.0,
                density: 0.0,
                collapse: 0.0,
                slope: 0.0
            }
        );
        assert!(apply_tolerance(&mut t, "speed=1").is_err());
        assert!(apply_tolerance(&mut t, "growth=-1").is_err());
        assert!(apply_tolerance(&mut t, "growth").is_err());
    }

    #[test]
    fn neighbor_choice_names() {
        assert_eq!(parse_neighbor_choice("pooled"), Ok(NeighborChoice::Pooled));
        assert_eq!(parse_neighbor_choice("two-stage"), Ok(NeighborChoice::TwoStage));
        assert!(parse_neighbor_choice("both").is_err());
    }
}
