//! Power-law fits of observer series and their comparison with predictions.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolver::ObserverSeries;
use crate::predictions::TailPrediction;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("window [{0}, {1}] holds fewer than 8 samples")]
    TooFewSamples(f64, f64),
    #[error("window [{lo}, {hi}] spans less than half a decade")]
    NarrowWindow { lo: f64, hi: f64 },
    #[error("|phi| = {value:e} at t = {t} is within 10x of the noise floor {floor:e}")]
    BelowNoise { t: f64, value: f64, floor: f64 },
    #[error("phi changes sign {count} times inside the window (first near t = {t})")]
    SignChange { count: usize, t: f64 },
    #[error("amplitude extrapolations of the window halves disagree: {first} vs {second}")]
    HalvesDisagree { first: f64, second: f64 },
    #[error("amplitude ratio between the two runs varies by {spread:.3} across the window")]
    RatioNotConstant { spread: f64 },
    #[error("series are not sampled at the same times")]
    Mismatch,
}

fn default_tol_gamma() -> f64 {
    0.02
}
fn default_tol_amp() -> f64 {
    0.10
}
fn default_tol_eps_order() -> f64 {
    0.1
}
fn default_noise_floor() -> f64 {
    1e-22
}
fn default_slope_span() -> f64 {
    0.2
}

/// Fit settings. The window defaults to
/// `[max(2 (r_obs + R), 20), 0.8 t_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOptions {
    #[serde(default)]
    pub window: Option<(f64, f64)>,
    /// Relative tolerance on the decay exponent.
    #[serde(default = "default_tol_gamma")]
    pub tol_gamma: f64,
    /// Relative tolerance on the amplitude.
    #[serde(default = "default_tol_amp")]
    pub tol_amp: f64,
    /// Absolute tolerance on the measured epsilon order.
    #[serde(default = "default_tol_eps_order")]
    pub tol_eps_order: f64,
    /// Absolute noise level of the field values.
    #[serde(default = "default_noise_floor")]
    pub noise_floor: f64,
    /// Width in `ln t` of the moving least-squares stencil.
    #[serde(default = "default_slope_span")]
    pub slope_span: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            window: None,
            tol_gamma: default_tol_gamma(),
            tol_amp: default_tol_amp(),
            tol_eps_order: default_tol_eps_order(),
            noise_floor: default_noise_floor(),
            slope_span: default_slope_span(),
        }
    }
}

impl FitOptions {
    pub fn window_for(&self, series: &ObserverSeries, support_radius: f64) -> (f64, f64) {
        self.window.unwrap_or_else(|| {
            let t_end = series.t.last().copied().unwrap_or(0.0);
            ((2.0 * (series.r_obs + support_radius)).max(20.0), 0.8 * t_end)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Degenerate,
    FastDecay,
}

impl Verdict {
    /// Whether the verdict counts against the run.
    pub fn is_failure(self) -> bool {
        self == Verdict::Fail
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Degenerate => "degenerate",
            Verdict::FastDecay => "fast-decay",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeSample {
    pub t: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeProfile {
    pub samples: Vec<SlopeSample>,
    /// Sign changes of `phi` inside the window; nonzero means transients.
    pub sign_changes: usize,
}

impl SlopeProfile {
    pub fn min_gamma(&self) -> f64 {
        self.samples.iter().map(|s| s.gamma).fold(f64::INFINITY, f64::min)
    }
}

/// Slope and intercept of the least-squares line through `(x, y)`, plus the
/// rms residual.
fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let ss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - icpt - slope * a).powi(2))
        .sum();
    (slope, icpt, (ss / n).sqrt())
}

fn checked_window(series: &ObserverSeries, window: (f64, f64)) -> Result<std::ops::Range<usize>, FitError> {
    let (lo, hi) = window;
    let idx = series.window_indices(lo, hi);
    if idx.len() < 8 {
        return Err(FitError::TooFewSamples(lo, hi));
    }
    Ok(idx)
}

fn check_noise(series: &ObserverSeries, idx: &std::ops::Range<usize>, floor: f64) -> Result<(), FitError> {
    for i in idx.clone() {
        let v = series.phi[i];
        if !(v.abs() > 10.0 * floor) {
            return Err(FitError::BelowNoise {
                t: series.t[i],
                value: v,
                floor,
            });
        }
    }
    Ok(())
}

fn sign_changes(series: &ObserverSeries, idx: &std::ops::Range<usize>) -> (usize, f64) {
    let mut count = 0;
    let mut first = f64::NAN;
    for i in idx.start + 1..idx.end {
        if series.phi[i].signum() != series.phi[i - 1].signum() {
            if count == 0 {
                first = series.t[i];
            }
            count += 1;
        }
    }
    (count, first)
}

/// `gamma(t) = -d ln|phi| / d ln t` by moving least squares. Only points
/// whose stencil fits inside the window are reported.
pub fn local_slope(
    series: &ObserverSeries,
    window: (f64, f64),
    opts: &FitOptions,
) -> Result<SlopeProfile, FitError> {
    let idx = checked_window(series, window)?;
    check_noise(series, &idx, opts.noise_floor)?;
    let (count, _) = sign_changes(series, &idx);
    let lt: Vec<f64> = idx.clone().map(|i| series.t[i].ln()).collect();
    let lp: Vec<f64> = idx.clone().map(|i| series.phi[i].abs().ln()).collect();
    let half = 0.5 * opts.slope_span;
    let mut samples = Vec::with_capacity(lt.len());
    let mut lo = 0;
    let mut hi = 0;
    let (first, last) = (lt[0], lt[lt.len() - 1]);
    for (k, &x) in lt.iter().enumerate() {
        if x - half < first || x + half > last {
            continue;
        }
        while lt[lo] < x - half {
            lo += 1;
        }
        while hi < lt.len() && lt[hi] <= x + half {
            hi += 1;
        }
        if hi - lo < 3 {
            continue;
        }
        let (slope, _, _) = line_fit(&lt[lo..hi], &lp[lo..hi]);
        samples.push(SlopeSample {
            t: series.t[idx.start + k],
            gamma: -slope,
        });
    }
    Ok(SlopeProfile {
        samples,
        sign_changes: count,
    })
}

/// `-t phi_t / phi`, averaged over the window.
pub fn derivative_slope(series: &ObserverSeries, window: (f64, f64)) -> Result<f64, FitError> {
    let idx = checked_window(series, window)?;
    let n = idx.len() as f64;
    Ok(idx.map(|i| -series.t[i] * series.dphi_dt[i] / series.phi[i]).sum::<f64>() / n)
}

/// Exponent and rms residual of a single log-log line over the window.
pub fn fit_gamma(series: &ObserverSeries, window: (f64, f64), opts: &FitOptions) -> Result<(f64, f64), FitError> {
    let idx = checked_window(series, window)?;
    check_noise(series, &idx, opts.noise_floor)?;
    let lt: Vec<f64> = idx.clone().map(|i| series.t[i].ln()).collect();
    let lp: Vec<f64> = idx.map(|i| series.phi[i].abs().ln()).collect();
    let (slope, _, rms) = line_fit(&lt, &lp);
    Ok((-slope, rms))
}

/// `lim t^gamma phi` from a fit of `t^gamma phi = A + B / t`.
fn extrapolate(t: &[f64], phi: &[f64], gamma: f64) -> f64 {
    let x: Vec<f64> = t.iter().map(|t| 1.0 / t).collect();
    let y: Vec<f64> = t.iter().zip(phi).map(|(t, p)| t.powf(gamma) * p).collect();
    line_fit(&x, &y).1
}

pub fn fit_amplitude(
    series: &ObserverSeries,
    gamma: f64,
    window: (f64, f64),
    opts: &FitOptions,
) -> Result<f64, FitError> {
    let idx = checked_window(series, window)?;
    check_noise(series, &idx, opts.noise_floor)?;
    let (count, t) = sign_changes(series, &idx);
    if count > 0 {
        return Err(FitError::SignChange { count, t });
    }
    let t = &series.t[idx.clone()];
    let phi = &series.phi[idx];
    let whole = extrapolate(t, phi, gamma);
    let mid = t.len() / 2;
    let first = extrapolate(&t[..mid], &phi[..mid], gamma);
    let second = extrapolate(&t[mid..], &phi[mid..], gamma);
    if (first - second).abs() > 0.2 * first.abs().max(second.abs()) {
        return Err(FitError::HalvesDisagree { first, second });
    }
    Ok(whole)
}

/// Power `k` in `phi ~ eps^k` from two runs at different amplitudes.
pub fn eps_order(
    series: &ObserverSeries,
    other: &ObserverSeries,
    window: (f64, f64),
    opts: &FitOptions,
) -> Result<f64, FitError> {
    if series.t != other.t {
        return Err(FitError::Mismatch);
    }
    let idx = checked_window(series, window)?;
    check_noise(series, &idx, opts.noise_floor)?;
    check_noise(other, &idx, opts.noise_floor)?;
    let ratios: Vec<f64> = idx.map(|i| series.phi[i] / other.phi[i]).collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let (lo, hi) = ratios
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &r| (a.min(r), b.max(r)));
    let spread = (hi - lo) / mean.abs();
    if !(mean > 0.0) || spread > 0.1 {
        return Err(FitError::RatioNotConstant { spread });
    }
    Ok(mean.ln() / (series.eps / other.eps).abs().ln())
}

/// Measured tail parameters plus the verdict against a prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub gamma_hat: f64,
    /// `lim t^gamma phi` at the predicted exponent; includes `eps^k`.
    pub amplitude_hat: Option<f64>,
    pub eps_order_hat: Option<f64>,
    pub window: (f64, f64),
    pub residual: f64,
    /// Smallest local slope seen in the window.
    pub min_local_gamma: f64,
    pub verdict: Verdict,
    pub tol_gamma: f64,
    pub tol_amp: f64,
    pub expected_gamma: Option<f64>,
    pub expected_amplitude: Option<f64>,
    pub expected_eps_order: Option<u32>,
    pub diagnostics: Vec<String>,
}

/// Fits `series` (already order-isolated) and judges it against `prediction`.
///
/// `half` is the matching series at a different amplitude, used for the
/// epsilon order. The amplitude is extrapolated at the predicted exponent of
/// the dominant term, selected at the window midpoint.
/// No tail was predicted and the field fell to rounding level inside the window.
fn vanished(
    series: &ObserverSeries,
    prediction: &TailPrediction,
    window: (f64, f64),
    opts: &FitOptions,
    t: f64,
    value: f64,
    floor: f64,
) -> FitResult {
    FitResult {
        gamma_hat: f64::INFINITY,
        amplitude_hat: None,
        eps_order_hat: None,
        window,
        residual: 0.0,
        min_local_gamma: f64::INFINITY,
        verdict: Verdict::FastDecay,
        tol_gamma: opts.tol_gamma,
        tol_amp: opts.tol_amp,
        expected_gamma: Some(prediction.max_gamma().map(f64::from).unwrap_or(0.0)),
        expected_amplitude: None,
        expected_eps_order: None,
        diagnostics: vec![format!(
            "|phi| = {value:.3e} at t = {t} (r_obs = {}) reached the noise floor {floor:e}",
            series.r_obs
        )],
    }
}

pub fn compare(
    prediction: &TailPrediction,
    series: &ObserverSeries,
    half: Option<&ObserverSeries>,
    support_radius: f64,
    opts: &FitOptions,
) -> Result<FitResult, FitError> {
    let window = opts.window_for(series, support_radius);
    if window.1 < window.0 * 10f64.sqrt() {
        return Err(FitError::NarrowWindow {
            lo: window.0,
            hi: window.1,
        });
    }
    let eps = series.eps;
    let t_mid = (window.0 * window.1).sqrt();
    let no_tail = prediction.dominant_at(eps, t_mid).is_none() && !prediction.has_degenerate_integral();
    let profile = match local_slope(series, window, opts) {
        Err(FitError::BelowNoise { t, value, floor }) if no_tail => {
            return Ok(vanished(series, prediction, window, opts, t, value, floor));
        }
        r => r?,
    };
    let (gamma_hat, residual) = fit_gamma(series, window, opts)?;
    let mut out = FitResult {
        gamma_hat,
        amplitude_hat: None,
        eps_order_hat: None,
        window,
        residual,
        min_local_gamma: profile.min_gamma(),
        verdict: Verdict::Fail,
        tol_gamma: opts.tol_gamma,
        tol_amp: opts.tol_amp,
        expected_gamma: None,
        expected_amplitude: None,
        expected_eps_order: None,
        diagnostics: Vec::new(),
    };
    if profile.sign_changes > 0 {
        out.diagnostics
            .push(format!("phi changes sign {} times in the window", profile.sign_changes));
    }
    if let Some(h) = half {
        match eps_order(series, h, window, opts) {
            Ok(k) => out.eps_order_hat = Some(k),
            Err(e) => out.diagnostics.push(format!("epsilon order: {e}")),
        }
    }
    let Some(dominant) = prediction.dominant_at(eps, t_mid) else {
        if prediction.has_degenerate_integral() {
            out.verdict = Verdict::Degenerate;
            out.diagnostics
                .push("every predicted amplitude cancels; the tail is set by the next order".into());
            return Ok(out);
        }
        let bound = prediction.max_gamma().map(f64::from).unwrap_or(0.0);
        out.expected_gamma = Some(bound);
        out.verdict = if out.min_local_gamma > bound * (1.0 + opts.tol_gamma) {
            Verdict::FastDecay
        } else {
            out.diagnostics.push(format!(
                "no tail predicted, yet the local slope drops to {:.3} (bound {bound})",
                out.min_local_gamma
            ));
            Verdict::Fail
        };
        return Ok(out);
    };
    let gamma = f64::from(dominant.gamma);
    let expected = eps.powi(dominant.eps_order as i32) * dominant.amplitude;
    out.expected_gamma = Some(gamma);
    out.expected_amplitude = Some(expected);
    out.expected_eps_order = Some(dominant.eps_order);
    let gamma_ok = (gamma_hat - gamma).abs() <= opts.tol_gamma * gamma;
    if !gamma_ok {
        out.diagnostics
            .push(format!("gamma_hat = {gamma_hat:.4}, predicted {gamma}"));
    }
    let amp_ok = match fit_amplitude(series, gamma, window, opts) {
        Ok(a) => {
            out.amplitude_hat = Some(a);
            let rel = a / expected - 1.0;
            if rel.abs() > opts.tol_amp {
                out.diagnostics.push(format!(
                    "amplitude_hat = {a:+.6e}, predicted {expected:+.6e} (ratio {:+.4})",
                    a / expected
                ));
                false
            } else {
                true
            }
        }
        Err(e) => {
            out.diagnostics.push(format!("amplitude: {e}"));
            false
        }
    };
    let order_ok = match out.eps_order_hat {
        Some(k) => {
            let ok = (k - f64::from(dominant.eps_order)).abs() <= opts.tol_eps_order;
            if !ok {
                out.diagnostics
                    .push(format!("eps_order_hat = {k:.3}, predicted {}", dominant.eps_order));
            }
            ok
        }
        None => half.is_none(),
    };
    out.verdict = if gamma_ok && amp_ok && order_ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(out)
}
