//! Subcommands of the `mppcausal` binary, as library functions.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::compensator::check_regularity;
use crate::error::{Error, Result};
use crate::estimate::{gformula_mc, ipw_estimate, joint_potential_mean, EstimateReport, Weights};
use crate::intervention::predictability_check;
use crate::oracle::{cross_check_continuous, oracle_report, CrossCheckReport};
use crate::scenario::Scenario;
use crate::simulate::{simulate_joint, simulate_many, simulate_observed};
use crate::weights::{weight_path_product, write_weight_dump, WeightPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Ipw,
    Gformula,
    Joint,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub t: Option<f64>,
    pub method: Method,
    pub out: Option<PathBuf>,
    pub dump_weights: bool,
}

impl RunOptions {
    pub fn new(config: impl Into<PathBuf>) -> Self {
        RunOptions {
            config: config.into(),
            seed: None,
            n: None,
            t: None,
            method: Method::Ipw,
            out: None,
            dump_weights: false,
        }
    }
}

struct Run {
    scenario: Scenario,
    seed: u64,
    n: usize,
    out: PathBuf,
}

fn prepare(opts: &RunOptions) -> Result<Run> {
    let mut scenario = Scenario::load(&opts.config)?;
    if let Some(t) = opts.t {
        if !(0.0..=scenario.horizon()).contains(&t) {
            return Err(Error::Config(format!(
                "--t {t} is outside [0, {}]",
                scenario.horizon()
            )));
        }
        scenario.outcome.t = t;
    }
    let run = scenario
        .config
        .as_ref()
        .map(|c| c.run.clone())
        .unwrap_or_default();
    Ok(Run {
        seed: opts.seed.or(run.seed).unwrap_or(0),
        n: opts.n.or(run.n).unwrap_or(1000),
        out: opts.out.clone().unwrap_or_else(|| PathBuf::from("out")),
        scenario,
    })
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    config: String,
    scenario_hash: Option<String>,
    seed: u64,
    n: usize,
    outputs: Vec<String>,
    started_unix: f64,
    finished_unix: f64,
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn write_manifest(
    command: &str,
    opts: &RunOptions,
    run: &Run,
    outputs: &[&Path],
    started: f64,
) -> Result<()> {
    let manifest = RunManifest {
        command,
        config: opts.config.display().to_string(),
        scenario_hash: run.scenario.hash(),
        seed: run.seed,
        n: run.n,
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        started_unix: started,
        finished_unix: now(),
    };
    let f = File::create(run.out.join("manifest.json"))?;
    serde_json::to_writer_pretty(f, &manifest)?;
    Ok(())
}

fn fmt_f64(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else {
        x.to_string()
    }
}

/// Joint draws: `events.csv` (`subject_id,arm,t,mark`), `summary.csv`
/// (`subject_id,tau_J,Y_T,W_T`) and, with `dump_weights`, `weights.csv`.
pub fn cmd_simulate(opts: &RunOptions) -> Result<()> {
    let started = now();
    let run = prepare(opts)?;
    fs::create_dir_all(&run.out)?;
    let sc = &run.scenario;
    let draws = simulate_many(run.n, |i| simulate_joint(sc, run.seed, i))?;
    let paths: Vec<Option<WeightPath>> = draws
        .iter()
        .map(
            |d| match weight_path_product(sc, &d.baseline, &d.observed) {
                Ok(p) => Ok(Some(p)),
                Err(Error::Positivity { .. }) => Ok(None),
                Err(e) => Err(e),
            },
        )
        .collect::<Result<_>>()?;

    let events_path = run.out.join("events.csv");
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&events_path)?));
    w.write_record(["subject_id", "arm", "t", "mark"])?;
    for (i, d) in draws.iter().enumerate() {
        for (arm, traj) in [("observed", &d.observed), ("potential", &d.potential)] {
            for e in traj.events() {
                w.write_record([
                    i.to_string(),
                    arm.into(),
                    e.t.to_string(),
                    sc.space.mark_label(e.mark).into(),
                ])?;
            }
        }
    }
    w.flush()?;

    let summary_path = run.out.join("summary.csv");
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&summary_path)?));
    w.write_record(["subject_id", "tau_J", "Y_T", "W_T"])?;
    for (i, (d, p)) in draws.iter().zip(&paths).enumerate() {
        let wt = p
            .as_ref()
            .map_or("NA".into(), |p| p.at(sc.outcome.t).to_string());
        w.write_record([
            i.to_string(),
            fmt_f64(d.deviation.overall),
            sc.outcome.value(&d.observed).to_string(),
            wt,
        ])?;
    }
    w.flush()?;

    let mut outputs = vec![events_path.as_path(), summary_path.as_path()];
    let weights_path = run.out.join("weights.csv");
    if opts.dump_weights {
        let rows: Vec<(u64, &WeightPath)> = paths
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.as_ref().map(|p| (i as u64, p)))
            .collect();
        write_weight_dump(BufWriter::new(File::create(&weights_path)?), &rows)?;
        outputs.push(weights_path.as_path());
    }
    write_manifest("simulate", opts, &run, &outputs, started)
}

/// Estimate by the chosen method; also written to `estimate.json` and `estimate.csv`.
pub fn cmd_estimate(opts: &RunOptions) -> Result<EstimateReport> {
    let started = now();
    let run = prepare(opts)?;
    let sc = &run.scenario;
    let mut report = match opts.method {
        Method::Ipw => {
            if run.n == 0 {
                return Err(Error::Domain("estimate undefined for n = 0".into()));
            }
            let sample = simulate_many(run.n, |i| simulate_observed(sc, run.seed, i))?;
            ipw_estimate(sc, &sample, Weights::True)?
        }
        Method::Gformula => gformula_mc(sc, run.n, run.seed)?,
        Method::Joint => joint_potential_mean(sc, run.n, run.seed)?,
    };
    report.seed = Some(run.seed);
    fs::create_dir_all(&run.out)?;
    let json_path = run.out.join("estimate.json");
    serde_json::to_writer_pretty(File::create(&json_path)?, &report)?;
    let csv_path = run.out.join("estimate.csv");
    fs::write(
        &csv_path,
        format!("{}\n{}\n", EstimateReport::csv_header(), report.csv_row()),
    )?;
    write_manifest("estimate", opts, &run, &[&json_path, &csv_path], started)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleOutput {
    pub g_formula: f64,
    pub ipw: f64,
    pub max_weight: f64,
    pub worlds: usize,
    pub positivity: String,
    pub cross_check: CrossCheckReport,
}

/// Exact values of a discrete scenario plus the continuous-time cross-check.
pub fn cmd_oracle(opts: &RunOptions) -> Result<OracleOutput> {
    let run = prepare(opts)?;
    let sc = &run.scenario;
    check_regularity(&sc.model, &sc.interventions).map_err(Error::Regularity)?;
    let ds = sc
        .discrete
        .as_ref()
        .ok_or_else(|| Error::Unsupported("oracle requires a discrete scenario".into()))?;
    let r = oracle_report(ds, &sc.outcome)?;
    let cross_check = cross_check_continuous(ds, &sc.outcome)?;
    Ok(OracleOutput {
        g_formula: r.g_formula,
        ipw: r.ipw,
        max_weight: r.max_weight,
        worlds: r.worlds,
        positivity: r.positivity,
        cross_check,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightSummary {
    pub n: usize,
    pub mean_w_t: f64,
    pub se_w_t: f64,
    pub max_w_t: f64,
    pub deviated: usize,
}

/// Weight paths of observed draws written to `weights.csv`.
pub fn cmd_weights(opts: &RunOptions) -> Result<WeightSummary> {
    let started = now();
    let run = prepare(opts)?;
    let sc = &run.scenario;
    let draws = simulate_many(run.n, |i| simulate_observed(sc, run.seed, i))?;
    let paths: Vec<WeightPath> = draws
        .iter()
        .enumerate()
        .map(|(i, d)| {
            weight_path_product(sc, &d.baseline, &d.trajectory).map_err(|e| match e {
                Error::Positivity { violation, .. } => Error::Positivity {
                    subject: Some(i),
                    violation,
                },
                other => other,
            })
        })
        .collect::<Result<_>>()?;
    fs::create_dir_all(&run.out)?;
    let path = run.out.join("weights.csv");
    let rows: Vec<(u64, &WeightPath)> = paths
        .iter()
        .enumerate()
        .map(|(i, p)| (i as u64, p))
        .collect();
    write_weight_dump(BufWriter::new(File::create(&path)?), &rows)?;
    write_manifest("weights", opts, &run, &[&path], started)?;
    let finals: Vec<f64> = paths.iter().map(|p| p.at(sc.outcome.t)).collect();
    let (mean, se) = if finals.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        crate::estimate::mean_se(&finals)
    };
    Ok(WeightSummary {
        n: finals.len(),
        mean_w_t: mean,
        se_w_t: se,
        max_w_t: finals.iter().cloned().fold(0.0, f64::max),
        deviated: paths.iter().filter(|p| p.tau() <= sc.outcome.t).count(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub regularity: String,
    pub predictability: String,
    pub positivity: String,
    pub ok: bool,
}

/// Regularity of the model, and predictability and positivity on `n` observed draws.
pub fn cmd_check(opts: &RunOptions) -> Result<CheckReport> {
    let run = prepare(opts)?;
    let sc = &run.scenario;
    let regularity = match check_regularity(&sc.model, &sc.interventions) {
        Ok(()) => "ok".to_string(),
        Err(r) => r.to_string(),
    };
    let horizon = sc.horizon();
    let grid: Vec<f64> = sc
        .config
        .as_ref()
        .and_then(|c| c.run.grid.clone())
        .unwrap_or_else(|| (0..=20).map(|k| horizon * k as f64 / 20.0).collect());
    let draws = simulate_many(run.n, |i| simulate_observed(sc, run.seed, i))?;
    let mut predictability = "ok".to_string();
    'outer: for d in &draws {
        for iv in &sc.interventions {
            if let Err(e) = predictability_check(iv, &d.baseline, &d.trajectory, &grid) {
                predictability = e.to_string();
                break 'outer;
            }
        }
    }
    let mut positivity = "ok".to_string();
    for (i, d) in draws.iter().enumerate() {
        match weight_path_product(sc, &d.baseline, &d.trajectory) {
            Ok(_) => {}
            Err(Error::Positivity { violation, .. }) => {
                positivity = format!("subject {i}: {violation}");
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let ok = regularity == "ok" && predictability == "ok" && positivity == "ok";
    Ok(CheckReport {
        regularity,
        predictability,
        positivity,
        ok,
    })
}
