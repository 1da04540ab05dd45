//! Command implementations behind the `wavetails` binary.
//!
//! Every command returns an [`Outcome`]: a JSON document for stdout and an
//! exit status (0 pass or degenerate, 1 verification failure, 2 configuration
//! error).

pub mod config;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::duhamel::{first_order_iterate, identity_sweep, write_identity_csv, DuhamelError, IdentitySweep};
use crate::evolver::{evolve, evolve_free, order_isolate, EvolveError, ObserverSeries, Parity};
use crate::predictions::{predict_config, PredictionError, TailPrediction};
use crate::tailfit::{compare, FitError, FitOptions, FitResult, Verdict};
pub use config::{ConfigError, RunConfig};

/// Version of every JSON report.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "WAVETAILS_OUT";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Prediction(#[from] PredictionError),
    #[error(transparent)]
    Duhamel(#[from] DuhamelError),
    #[error(transparent)]
    Evolve(#[from] EvolveError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) | CliError::Prediction(PredictionError::Term(_)) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub report: Value,
    pub exit_code: i32,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_owned(),
        source,
    }
}

fn run_dir(out: &Path, cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = out.join(&cfg.label);
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    Ok(dir)
}

fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    std::fs::write(path, text + "\n").map_err(io_err(path))
}

fn header(kind: &str, cfg: Option<&RunConfig>) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("schema_version".into(), json!(REPORT_SCHEMA_VERSION));
    m.insert("kind".into(), json!(kind));
    if let Some(c) = cfg {
        m.insert("config_hash".into(), json!(c.simulation.hash()));
        m.insert("l".into(), json!(c.simulation.dimension.l()));
        m.insert("terms".into(), json!(c.simulation.terms));
        m.insert("warnings".into(), json!(c.warnings));
    }
    m
}

fn prediction_of(cfg: &RunConfig) -> Result<TailPrediction, CliError> {
    let s = &cfg.simulation;
    Ok(predict_config(s.dimension, &s.terms, &s.generating)?)
}

/// Closed-form tail prediction for the configured right-hand side.
pub fn cmd_predict(config: &Path) -> Result<Outcome, CliError> {
    let cfg = RunConfig::load(config)?;
    let pred = prediction_of(&cfg)?;
    let mut m = header("prediction", Some(&cfg));
    m.insert("prediction".into(), json!(pred));
    Ok(Outcome {
        report: Value::Object(m),
        exit_code: 0,
    })
}

#[derive(Debug, Clone)]
pub struct IdentityArgs {
    pub sweep: IdentitySweep,
    pub threshold: f64,
}

/// Master-identity sweep; writes `identity.csv` under `out`.
pub fn cmd_identity(args: &IdentityArgs, out: &Path) -> Result<Outcome, CliError> {
    let rows = identity_sweep(&args.sweep)?;
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let path = out.join("identity.csv");
    let file = std::fs::File::create(&path).map_err(io_err(&path))?;
    write_identity_csv(&rows, std::io::BufWriter::new(file))?;
    let max_rel = rows.iter().map(|r| r.rel_err).fold(0.0, f64::max);
    let max_expansion = rows.iter().map(|r| r.rel_err_expansion).fold(0.0, f64::max);
    let pass = max_rel <= args.threshold;
    let mut m = header("identity", None);
    m.insert("rows".into(), json!(rows.len()));
    m.insert("max_rel_err".into(), json!(max_rel));
    m.insert("max_rel_err_expansion".into(), json!(max_expansion));
    m.insert("threshold".into(), json!(args.threshold));
    m.insert("csv".into(), json!(path));
    m.insert("pass".into(), json!(pass));
    Ok(Outcome {
        report: Value::Object(m),
        exit_code: if pass { 0 } else { 1 },
    })
}

/// Parses `t:r` pairs separated by commas.
pub fn parse_points(s: &str) -> Result<Vec<(f64, f64)>, CliError> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (t, r) = p
                .split_once(':')
                .ok_or_else(|| CliError::Usage(format!("point {p:?} is not of the form t:r")))?;
            let parse = |x: &str| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Usage(format!("bad number {x:?} in point {p:?}")))
            };
            Ok((parse(t)?, parse(r)?))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct DuhamelRow {
    pub t: f64,
    pub r: f64,
    pub value: Option<f64>,
    pub predicted: Option<f64>,
    pub ratio: Option<f64>,
    /// Integral of the absolute integrand; sets the rounding floor.
    pub scale: Option<f64>,
    pub error: Option<String>,
}

/// First iterate by Duhamel quadrature at the given points, next to the
/// first-order tail prediction. Writes `duhamel.csv`.
pub fn cmd_duhamel(config: &Path, points: &[(f64, f64)], out: &Path) -> Result<Outcome, CliError> {
    let cfg = RunConfig::load(config)?;
    let s = &cfg.simulation;
    let pred = prediction_of(&cfg)?;
    // Only the lowest-degree monomials contribute to the first iterate.
    let degree = s.terms.iter().map(|t| t.degree()).min().unwrap_or(0);
    let terms: Vec<_> = s.terms.iter().filter(|t| t.degree() == degree).collect();
    let first_order: Vec<_> = pred
        .terms
        .iter()
        .filter(|t| !t.case_label.is_second_order() && t.eps_order == degree)
        .collect();
    let rows: Vec<DuhamelRow> = points
        .par_iter()
        .map(|&(t, r)| {
            let mut value = 0.0;
            let mut scale = 0.0;
            for term in &terms {
                match first_order_iterate(&s.generating, s.dimension, term, t, r) {
                    Ok(it) => {
                        value += it.value;
                        scale += it.scale;
                    }
                    Err(e) => {
                        return DuhamelRow {
                            t,
                            r,
                            value: None,
                            predicted: None,
                            ratio: None,
                            scale: None,
                            error: Some(e.to_string()),
                        }
                    }
                }
            }
            let predicted: f64 = first_order.iter().map(|p| p.evaluate(1.0, t)).sum();
            DuhamelRow {
                t,
                r,
                value: Some(value),
                predicted: Some(predicted),
                ratio: (predicted != 0.0).then(|| value / predicted),
                scale: Some(scale),
                error: None,
            }
        })
        .collect();
    let dir = run_dir(out, &cfg)?;
    let path = dir.join("duhamel.csv");
    write_duhamel_csv(&rows, &path)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    let mut m = header("duhamel", Some(&cfg));
    m.insert("points".into(), json!(rows));
    m.insert("errors".into(), json!(failed));
    m.insert("csv".into(), json!(path));
    Ok(Outcome {
        report: Value::Object(m),
        exit_code: 0,
    })
}

fn write_duhamel_csv(rows: &[DuhamelRow], path: &Path) -> Result<(), CliError> {
    use std::io::Write;
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut f = std::io::BufWriter::new(file);
    writeln!(f, "# schema_version={REPORT_SCHEMA_VERSION} kind=duhamel").map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(f);
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    let csv_err = |e: csv::Error| CliError::Io {
        path: path.to_owned(),
        source: std::io::Error::other(e),
    };
    w.write_record(["t", "r", "value", "predicted", "ratio", "scale", "error"])
        .map_err(csv_err)?;
    for row in rows {
        w.write_record([
            row.t.to_string(),
            row.r.to_string(),
            opt(row.value),
            opt(row.predicted),
            opt(row.ratio),
            opt(row.scale),
            row.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

/// All runs a verification needs: `+-eps` for each amplitude and one free run.
#[derive(Debug, Clone)]
pub struct RunSet {
    pub amplitudes: Vec<f64>,
    /// `(eps, series per observer)`; the free run is stored under `eps = 1`
    /// in `free`.
    pub runs: Vec<(f64, Vec<ObserverSeries>)>,
    pub free: Vec<ObserverSeries>,
}

impl RunSet {
    fn find(&self, eps: f64) -> Option<&[ObserverSeries]> {
        self.runs.iter().find(|(e, _)| *e == eps).map(|(_, s)| s.as_slice())
    }
}

fn eps_dir(dir: &Path, eps: Option<f64>) -> PathBuf {
    match eps {
        Some(e) => dir.join(format!("eps_{e:+}")),
        None => dir.join("free"),
    }
}

fn series_file(dir: &Path, r_obs: f64) -> PathBuf {
    dir.join(format!("r_{r_obs}.csv"))
}

/// Evolves every run of the verification set concurrently.
pub fn evolve_set(cfg: &RunConfig, amplitudes: &[f64]) -> Result<RunSet, CliError> {
    let mut jobs: Vec<Option<f64>> = vec![None];
    for &e in amplitudes {
        jobs.push(Some(e));
        jobs.push(Some(-e));
    }
    let results: Vec<Result<(Option<f64>, Vec<ObserverSeries>), EvolveError>> = jobs
        .par_iter()
        .map(|&job| {
            let series = match job {
                Some(e) => evolve(&cfg.simulation, e)?,
                None => evolve_free(&cfg.simulation)?,
            };
            Ok((job, series))
        })
        .collect();
    let mut set = RunSet {
        amplitudes: amplitudes.to_vec(),
        runs: Vec::new(),
        free: Vec::new(),
    };
    for r in results {
        match r? {
            (Some(e), s) => set.runs.push((e, s)),
            (None, s) => set.free = s,
        }
    }
    Ok(set)
}

fn save_set(set: &RunSet, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    let all = set
        .runs
        .iter()
        .map(|(e, s)| (Some(*e), s))
        .chain(std::iter::once((None, &set.free)));
    for (eps, series) in all {
        let d = eps_dir(dir, eps);
        std::fs::create_dir_all(&d).map_err(io_err(&d))?;
        for s in series {
            let p = series_file(&d, s.r_obs);
            s.save(&p)?;
            written.push(p);
        }
    }
    Ok(written)
}

fn load_set(cfg: &RunConfig, amplitudes: &[f64], dir: &Path) -> Result<RunSet, CliError> {
    let load = |eps: Option<f64>| -> Result<Vec<ObserverSeries>, CliError> {
        let d = eps_dir(dir, eps);
        cfg.simulation
            .observers
            .iter()
            .map(|&r| Ok(ObserverSeries::load(&series_file(&d, r))?))
            .collect()
    };
    let mut runs = Vec::new();
    for &e in amplitudes {
        runs.push((e, load(Some(e))?));
        runs.push((-e, load(Some(-e))?));
    }
    let hash = cfg.simulation.hash();
    if let Some(bad) = runs.iter().flat_map(|(_, s)| s).find(|s| s.config_hash != hash) {
        return Err(EvolveError::Mismatch(format!(
            "series at eps = {} was produced by config {}, not {hash}",
            bad.eps, bad.config_hash
        ))
        .into());
    }
    Ok(RunSet {
        amplitudes: amplitudes.to_vec(),
        runs,
        free: load(None)?,
    })
}

/// Evolves `+-eps` (and the free reference) and writes observer CSVs.
pub fn cmd_evolve(config: &Path, eps: Option<&[f64]>, out: &Path) -> Result<Outcome, CliError> {
    let cfg = RunConfig::load(config)?;
    let amplitudes = eps.map(<[f64]>::to_vec).unwrap_or_else(|| vec![cfg.eps(), cfg.eps_half()]);
    let set = evolve_set(&cfg, &amplitudes)?;
    let dir = run_dir(out, &cfg)?;
    let files = save_set(&set, &dir)?;
    let mut m = header("evolve", Some(&cfg));
    m.insert("amplitudes".into(), json!(amplitudes));
    m.insert("files".into(), json!(files));
    Ok(Outcome {
        report: Value::Object(m),
        exit_code: 0,
    })
}

/// One observer's isolated tail and its fit.
#[derive(Debug, Clone, Serialize)]
pub struct Measurement {
    pub r_obs: f64,
    pub eps: f64,
    pub parity: Parity,
    #[serde(flatten)]
    pub fit: FitResult,
}

/// Isolates the tail at each observer and compares it with the prediction.
pub fn measure(
    cfg: &RunConfig,
    prediction: &TailPrediction,
    set: &RunSet,
    fit: &FitOptions,
) -> Result<Vec<Measurement>, CliError> {
    let eps = set.amplitudes[0];
    let probe_t = cfg.simulation.grid.t_max * 0.5;
    // Odd orders carry the linear part, which is removed exactly by
    // subtracting the scaled free run.
    // With no surviving term, look at the lowest order where a tail would sit.
    let order = prediction
        .dominant_at(eps, probe_t)
        .map(|t| t.eps_order)
        .or_else(|| prediction.terms.iter().map(|t| t.eps_order).min());
    let parity = match order {
        Some(k) if k % 2 == 0 => Parity::Even,
        _ => Parity::Odd,
    };
    let isolate = |e: f64, i: usize| -> Result<ObserverSeries, CliError> {
        let plus = &set.find(e).ok_or_else(|| CliError::Usage(format!("no run at eps = {e}")))?[i];
        let minus = &set.find(-e).ok_or_else(|| CliError::Usage(format!("no run at eps = {}", -e)))?[i];
        let iso = order_isolate(plus, minus, parity)?;
        Ok(match parity {
            Parity::Odd => iso.subtract_scaled(&set.free[i], e)?,
            Parity::Even => iso,
        })
    };
    let radius = cfg.simulation.generating.radius();
    let mut out = Vec::new();
    for (i, &r_obs) in cfg.simulation.observers.iter().enumerate() {
        let main = isolate(eps, i)?;
        let half = match set.amplitudes.get(1) {
            Some(&e) => Some(isolate(e, i)?),
            None => None,
        };
        let fit = compare(prediction, &main, half.as_ref(), radius, fit)?;
        out.push(Measurement {
            r_obs,
            eps,
            parity,
            fit,
        });
    }
    Ok(out)
}

fn overall(ms: &[Measurement]) -> Verdict {
    if ms.iter().any(|m| m.fit.verdict == Verdict::Fail) {
        Verdict::Fail
    } else if ms.iter().any(|m| m.fit.verdict == Verdict::Degenerate) {
        Verdict::Degenerate
    } else if ms.iter().all(|m| m.fit.verdict == Verdict::FastDecay) && !ms.is_empty() {
        Verdict::FastDecay
    } else {
        Verdict::Pass
    }
}

#[derive(Debug, Clone, Default)]
pub struct FitOverrides {
    pub tol_gamma: Option<f64>,
    pub tol_amp: Option<f64>,
}

impl FitOverrides {
    fn apply(&self, mut f: FitOptions) -> FitOptions {
        if let Some(t) = self.tol_gamma {
            f.tol_gamma = t;
        }
        if let Some(t) = self.tol_amp {
            f.tol_amp = t;
        }
        f
    }
}

fn fit_report(
    kind: &str,
    cfg: &RunConfig,
    prediction: &TailPrediction,
    ms: Vec<Measurement>,
) -> Outcome {
    let verdict = overall(&ms);
    let mut m = header(kind, Some(cfg));
    m.insert("prediction".into(), json!(prediction));
    m.insert("measurement".into(), json!(ms));
    m.insert("verdict".into(), json!(verdict));
    Outcome {
        report: Value::Object(m),
        exit_code: if verdict.is_failure() { 1 } else { 0 },
    }
}

/// Fits the series written by `evolve` in the config's output directory.
pub fn cmd_fit(
    config: &Path,
    eps: Option<&[f64]>,
    out: &Path,
    overrides: &FitOverrides,
) -> Result<Outcome, CliError> {
    let cfg = RunConfig::load(config)?;
    let amplitudes = eps.map(<[f64]>::to_vec).unwrap_or_else(|| vec![cfg.eps(), cfg.eps_half()]);
    let dir = out.join(&cfg.label);
    let set = load_set(&cfg, &amplitudes, &dir)?;
    let prediction = prediction_of(&cfg)?;
    let ms = measure(&cfg, &prediction, &set, &overrides.apply(cfg.fit))?;
    let outcome = fit_report("fit", &cfg, &prediction, ms);
    write_json(&dir.join("fit.json"), &outcome.report)?;
    Ok(outcome)
}

/// Predict, evolve, isolate, fit and compare in one go.
pub fn cmd_verify(
    config: &Path,
    eps: Option<&[f64]>,
    out: &Path,
    overrides: &FitOverrides,
) -> Result<Outcome, CliError> {
    let cfg = RunConfig::load(config)?;
    let amplitudes = eps.map(<[f64]>::to_vec).unwrap_or_else(|| vec![cfg.eps(), cfg.eps_half()]);
    if amplitudes.is_empty() {
        return Err(CliError::Usage("at least one amplitude is needed".into()));
    }
    let prediction = prediction_of(&cfg)?;
    let set = evolve_set(&cfg, &amplitudes)?;
    let dir = run_dir(out, &cfg)?;
    save_set(&set, &dir)?;
    let ms = measure(&cfg, &prediction, &set, &overrides.apply(cfg.fit))?;
    let outcome = fit_report("verify", &cfg, &prediction, ms);
    write_json(&dir.join("report.json"), &outcome.report)?;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_parse() {
        assert_eq!(parse_points("10:2, 20:3").unwrap(), vec![(10.0, 2.0), (20.0, 3.0)]);
        assert!(parse_points("").unwrap().is_empty());
        assert!(parse_points("10").is_err());
        assert!(parse_points("a:1").is_err());
    }

    #[test]
    fn overall_verdict_priorities() {
        let mk = |v: Verdict| Measurement {
            r_obs: 1.0,
            eps: 0.1,
            parity: Parity::Odd,
            fit: FitResult {
                gamma_hat: 0.0,
                amplitude_hat: None,
                eps_order_hat: None,
                window: (1.0, 10.0),
                residual: 0.0,
                min_local_gamma: 0.0,
                verdict: v,
                tol_gamma: 0.02,
                tol_amp: 0.1,
                expected_gamma: None,
                expected_amplitude: None,
                expected_eps_order: None,
                diagnostics: Vec::new(),
            },
        };
        assert_eq!(overall(&[mk(Verdict::Pass), mk(Verdict::Fail)]), Verdict::Fail);
        assert_eq!(overall(&[mk(Verdict::Pass), mk(Verdict::Degenerate)]), Verdict::Degenerate);
        assert_eq!(overall(&[mk(Verdict::FastDecay)]), Verdict::FastDecay);
        assert_eq!(overall(&[mk(Verdict::Pass)]), Verdict::Pass);
    }
}
