//! Radial method-of-lines solver for
//! `phi_tt = phi_rr + (2l+2)/r phi_r + sum_k c_k phi^p (alpha phi_t + beta phi_r)^q`.
//!
//! Fourth-order centered differences on a uniform grid `r_i = i dr`, classic
//! RK4 in time. The origin is handled by even parity: ghost values
//! `phi(-r) = phi(r)` feed the stencils of the first two points, and at `r = 0`
//! the Laplacian is replaced by its limit `(2l+3) phi_rr`. The two outermost
//! points stay frozen at zero, which is harmless as long as the grid is
//! causally clean for every observer.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::freewave::FreeWave;
use crate::wavedata::{NonlinearityTerm, SimulationConfig, WaveDataError};

/// Observer CSV layout version.
pub const SERIES_SCHEMA_VERSION: u32 = 1;

const CHUNK: usize = 2048;

/// Grid points kept beyond the causal diamond; the semi-discrete precursor
/// has decayed far below rounding there.
const CAUSAL_MARGIN: usize = 64;

#[derive(Debug, Error)]
pub enum EvolveError {
    #[error("grid parameter {name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("cfl = {0} outside (0, 1]")]
    Cfl(f64),
    #[error("only fourth-order differences are implemented, got fd_order = {0}")]
    FdOrder(u32),
    #[error("grid has {points} points; at least 8 are needed")]
    GridTooSmall { points: usize },
    #[error(transparent)]
    Config(#[from] WaveDataError),
    #[error("non-finite field at t = {t} (eps = {eps}); the amplitude is too large for this nonlinearity")]
    BlowUp { t: f64, eps: f64 },
    #[error("series mismatch: {0}")]
    Mismatch(String),
    #[error("observer csv: {0}")]
    Format(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn default_cfl() -> f64 {
    0.25
}

fn default_fd_order() -> u32 {
    4
}

fn default_sample_dt() -> f64 {
    0.25
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dr: f64,
    pub r_out: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    pub t_max: f64,
    #[serde(default = "default_fd_order")]
    pub fd_order: u32,
    /// Observer sampling interval.
    #[serde(default = "default_sample_dt")]
    pub sample_dt: f64,
}

impl GridConfig {
    pub fn new(dr: f64, r_out: f64, t_max: f64) -> Self {
        Self {
            dr,
            r_out,
            cfl: default_cfl(),
            t_max,
            fd_order: default_fd_order(),
            sample_dt: default_sample_dt(),
        }
    }

    pub fn validate(&self) -> Result<(), EvolveError> {
        for (name, value) in [
            ("dr", self.dr),
            ("r_out", self.r_out),
            ("t_max", self.t_max),
            ("sample_dt", self.sample_dt),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(EvolveError::NonPositive { name, value });
            }
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(EvolveError::Cfl(self.cfl));
        }
        if self.fd_order != 4 {
            return Err(EvolveError::FdOrder(self.fd_order));
        }
        let points = self.points();
        if points < 8 {
            return Err(EvolveError::GridTooSmall { points });
        }
        Ok(())
    }

    /// Number of grid points including `r = 0`.
    pub fn points(&self) -> usize {
        (self.r_out / self.dr).ceil() as usize + 1
    }

    /// Steps per sample and the step size. The step is the largest one not
    /// exceeding `cfl dr` that divides the sampling interval.
    pub fn time_step(&self) -> (usize, f64) {
        let per = (self.sample_dt / (self.cfl * self.dr) - 1e-9).ceil().max(1.0) as usize;
        (per, self.sample_dt / per as f64)
    }

    pub fn sample_count(&self) -> usize {
        (self.t_max / self.sample_dt + 1e-9).floor() as usize + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Odd,
    Even,
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Parity::Odd => "odd",
            Parity::Even => "even",
        })
    }
}

impl FromStr for Parity {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "odd" => Ok(Parity::Odd),
            "even" => Ok(Parity::Even),
            other => Err(format!("unknown parity {other:?}")),
        }
    }
}

/// Time series `(t, phi, phi_t)` recorded at a fixed radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverSeries {
    pub r_obs: f64,
    pub eps: f64,
    pub config_hash: String,
    pub l: u32,
    pub terms: Vec<NonlinearityTerm>,
    pub t: Vec<f64>,
    pub phi: Vec<f64>,
    pub dphi_dt: Vec<f64>,
}

impl ObserverSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Index range of samples with `t_lo <= t <= t_hi`.
    pub fn window_indices(&self, t_lo: f64, t_hi: f64) -> std::ops::Range<usize> {
        let lo = self.t.partition_point(|&t| t < t_lo);
        let hi = self.t.partition_point(|&t| t <= t_hi);
        lo..hi.max(lo)
    }

    /// Every `k`-th sample.
    pub fn subsample(&self, k: usize) -> Self {
        let k = k.max(1);
        let pick = |v: &[f64]| v.iter().step_by(k).copied().collect::<Vec<_>>();
        Self {
            t: pick(&self.t),
            phi: pick(&self.phi),
            dphi_dt: pick(&self.dphi_dt),
            ..self.clone()
        }
    }

    /// The partner an isolated series would have at `-eps`.
    pub fn parity_partner(&self, parity: Parity) -> Self {
        let sign = match parity {
            Parity::Odd => -1.0,
            Parity::Even => 1.0,
        };
        Self {
            eps: -self.eps,
            phi: self.phi.iter().map(|v| sign * v).collect(),
            dphi_dt: self.dphi_dt.iter().map(|v| sign * v).collect(),
            ..self.clone()
        }
    }

    /// `self - scale * other`, sample by sample. Used to remove the discrete
    /// linear response `eps phi_free` from a nonlinear run.
    pub fn subtract_scaled(&self, other: &ObserverSeries, scale: f64) -> Result<Self, EvolveError> {
        check_same_samples(self, other)?;
        Ok(Self {
            phi: self.phi.iter().zip(&other.phi).map(|(a, b)| a - scale * b).collect(),
            dphi_dt: self
                .dphi_dt
                .iter()
                .zip(&other.dphi_dt)
                .map(|(a, b)| a - scale * b)
                .collect(),
            ..self.clone()
        })
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), EvolveError> {
        writeln!(out, "# schema_version={SERIES_SCHEMA_VERSION} kind=observer")?;
        writeln!(out, "# config_hash={}", self.config_hash)?;
        writeln!(out, "# eps={}", self.eps)?;
        writeln!(out, "# l={}", self.l)?;
        writeln!(out, "# r_obs={}", self.r_obs)?;
        let terms = serde_json::to_string(&self.terms).map_err(|e| EvolveError::Format(e.to_string()))?;
        writeln!(out, "# terms={terms}")?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "phi", "dphi_dt"])?;
        for i in 0..self.len() {
            w.write_record([
                self.t[i].to_string(),
                self.phi[i].to_string(),
                self.dphi_dt[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), EvolveError> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(f)
    }

    pub fn read_csv(text: &str) -> Result<Self, EvolveError> {
        let mut meta = std::collections::HashMap::new();
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            for part in line.trim_start_matches('#').split_whitespace() {
                if let Some((k, v)) = part.split_once('=') {
                    meta.insert(k.to_string(), v.to_string());
                }
            }
        }
        let get = |k: &str| {
            meta.get(k)
                .cloned()
                .ok_or_else(|| EvolveError::Format(format!("missing header field {k}")))
        };
        let num = |k: &str| -> Result<f64, EvolveError> {
            get(k)?
                .parse()
                .map_err(|_| EvolveError::Format(format!("header field {k} is not a number")))
        };
        let version: u32 = get("schema_version")?
            .parse()
            .map_err(|_| EvolveError::Format("bad schema_version".into()))?;
        if version != SERIES_SCHEMA_VERSION {
            return Err(EvolveError::Format(format!("unsupported schema_version {version}")));
        }
        let terms: Vec<NonlinearityTerm> =
            serde_json::from_str(&get("terms")?).map_err(|e| EvolveError::Format(e.to_string()))?;
        let mut series = Self {
            r_obs: num("r_obs")?,
            eps: num("eps")?,
            config_hash: get("config_hash")?,
            l: num("l")? as u32,
            terms,
            t: Vec::new(),
            phi: Vec::new(),
            dphi_dt: Vec::new(),
        };
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        for rec in rdr.records() {
            let rec = rec?;
            let field = |i: usize| -> Result<f64, EvolveError> {
                rec.get(i)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| EvolveError::Format(format!("bad value in column {i} of {:?}", rec)))
            };
            series.t.push(field(0)?);
            series.phi.push(field(1)?);
            series.dphi_dt.push(field(2)?);
        }
        if series.t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(EvolveError::Format("times are not strictly increasing".into()));
        }
        Ok(series)
    }

    pub fn load(path: &Path) -> Result<Self, EvolveError> {
        Self::read_csv(&std::fs::read_to_string(path)?)
    }
}

fn check_same_samples(a: &ObserverSeries, b: &ObserverSeries) -> Result<(), EvolveError> {
    if a.r_obs != b.r_obs {
        return Err(EvolveError::Mismatch(format!("observer radius {} vs {}", a.r_obs, b.r_obs)));
    }
    if a.t != b.t {
        return Err(EvolveError::Mismatch("sample times differ".into()));
    }
    Ok(())
}

/// Combines runs at `+eps` and `-eps` to keep only odd or only even orders
/// in epsilon.
pub fn order_isolate(
    plus: &ObserverSeries,
    minus: &ObserverSeries,
    parity: Parity,
) -> Result<ObserverSeries, EvolveError> {
    check_same_samples(plus, minus)?;
    if plus.config_hash != minus.config_hash {
        return Err(EvolveError::Mismatch("config hashes differ".into()));
    }
    if plus.eps != -minus.eps {
        return Err(EvolveError::Mismatch(format!(
            "amplitudes {} and {} are not opposite",
            plus.eps, minus.eps
        )));
    }
    let sign = match parity {
        Parity::Odd => -1.0,
        Parity::Even => 1.0,
    };
    let mix = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| 0.5 * (x + sign * y)).collect();
    Ok(ObserverSeries {
        phi: mix(&plus.phi, &minus.phi),
        dphi_dt: mix(&plus.dphi_dt, &minus.dphi_dt),
        ..plus.clone()
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergySample {
    pub t: f64,
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub series: Vec<ObserverSeries>,
    /// Filled only when requested; one entry per observer sample.
    pub energy: Vec<EnergySample>,
    pub dt: f64,
    pub steps: usize,
}

/// Spatial operator; everything the right-hand side needs besides the state.
struct Operator<'a> {
    n: usize,
    inv_12dr: f64,
    inv_12dr2: f64,
    origin_factor: f64,
    /// `(2l+2)/r_i`, zero at the origin.
    advect: Vec<f64>,
    terms: &'a [NonlinearityTerm],
}

impl<'a> Operator<'a> {
    fn new(n: usize, dr: f64, l: u32, terms: &'a [NonlinearityTerm]) -> Self {
        let k = (2 * l + 2) as f64;
        let advect = (0..n)
            .map(|i| if i == 0 { 0.0 } else { k / (i as f64 * dr) })
            .collect();
        Self {
            n,
            inv_12dr: 1.0 / (12.0 * dr),
            inv_12dr2: 1.0 / (12.0 * dr * dr),
            origin_factor: (2 * l + 3) as f64,
            advect,
            terms,
        }
    }

    /// `(phi_r, phi_rr)` at point `i < n - 2`, with even ghosts below the origin.
    #[inline(always)]
    fn derivatives(&self, f: &[f64], i: usize) -> (f64, f64) {
        let (m2, m1) = match i {
            0 => (f[2], f[1]),
            1 => (f[1], f[0]),
            _ => (f[i - 2], f[i - 1]),
        };
        let (c, p1, p2) = (f[i], f[i + 1], f[i + 2]);
        let d1 = (m2 - 8.0 * m1 + 8.0 * p1 - p2) * self.inv_12dr;
        let d2 = (-m2 + 16.0 * m1 - 30.0 * c + 16.0 * p1 - p2) * self.inv_12dr2;
        (d1, d2)
    }

    /// Right-hand side on points `0..active`; `active <= n - 2`.
    fn apply(&self, phi: &[f64], pi: &[f64], dphi: &mut [f64], dpi: &mut [f64], active: usize) {
        dphi[..active]
            .par_chunks_mut(CHUNK)
            .zip(dpi[..active].par_chunks_mut(CHUNK))
            .enumerate()
            .for_each(|(c, (out_phi, out_pi))| {
                let start = c * CHUNK;
                for (j, (o_phi, o_pi)) in out_phi.iter_mut().zip(out_pi.iter_mut()).enumerate() {
                    let i = start + j;
                    let (d1, d2) = self.derivatives(phi, i);
                    let lap = if i == 0 {
                        self.origin_factor * d2
                    } else {
                        d2 + self.advect[i] * d1
                    };
                    let mut src = 0.0;
                    for t in self.terms {
                        src += t.eval(phi[i], pi[i], d1);
                    }
                    *o_phi = pi[i];
                    *o_pi = lap + src;
                }
            });
    }

    /// `int (pi^2 + phi_r^2) r^(2l+2) dr` by the trapezoidal rule, summed in
    /// index order.
    fn energy(&self, phi: &[f64], pi: &[f64], dr: f64, l: u32) -> f64 {
        let mut sum = 0.0;
        for i in 1..self.n - 2 {
            let (d1, _) = self.derivatives(phi, i);
            let r = i as f64 * dr;
            sum += (pi[i] * pi[i] + d1 * d1) * r.powi(2 * l as i32 + 2);
        }
        sum * dr
    }
}

/// Four-point Lagrange interpolation of grid data at radius `r`, reflecting
/// evenly through the origin. Exact at grid points.
fn interpolate(f: &[f64], dr: f64, r: f64) -> f64 {
    let x = r / dr;
    let i0 = x.floor() as isize;
    let s = x - i0 as f64;
    if s == 0.0 {
        return f[i0 as usize];
    }
    let at = |k: isize| f[(i0 + k).unsigned_abs()];
    let w_m1 = -s * (s - 1.0) * (s - 2.0) / 6.0;
    let w_0 = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0;
    let w_1 = -(s + 1.0) * s * (s - 2.0) / 2.0;
    let w_2 = (s + 1.0) * s * (s - 1.0) / 6.0;
    w_m1 * at(-1) + w_0 * at(0) + w_1 * at(1) + w_2 * at(2)
}

/// Evolves the data `eps * (phi0, d_t phi0)` to `t_max` and records the observers.
pub fn evolve(config: &SimulationConfig, eps: f64) -> Result<Vec<ObserverSeries>, EvolveError> {
    Ok(evolve_detailed(config, eps, false)?.series)
}

/// Free evolution (all terms removed) at unit amplitude, sharing the grid
/// and sampling of `config`.
pub fn evolve_free(config: &SimulationConfig) -> Result<Vec<ObserverSeries>, EvolveError> {
    let free = SimulationConfig {
        terms: Vec::new(),
        ..config.clone()
    };
    evolve(&free, 1.0)
}

/// Like [`evolve`], optionally recording the energy at every sample. Energy
/// needs the whole grid, so it disables the inward causal cut.
pub fn evolve_detailed(
    config: &SimulationConfig,
    eps: f64,
    record_energy: bool,
) -> Result<Evolution, EvolveError> {
    run(config, eps, record_energy, record_energy)
}

fn run(config: &SimulationConfig, eps: f64, record_energy: bool, full_grid: bool) -> Result<Evolution, EvolveError> {
    let grid = config.grid;
    grid.validate()?;
    config.validate()?;
    let l = config.dimension.l();
    let n = grid.points();
    let dr = grid.dr;
    let hash = config.hash();

    let fw = FreeWave::new(&config.generating, config.dimension);
    let mut phi = vec![0.0; n];
    let mut pi = vec![0.0; n];
    if eps != 0.0 {
        for i in 0..n - 2 {
            let r = i as f64 * dr;
            let (f, (g, _)) = (
                fw.value(0.0, r, crate::freewave::Part::Both),
                fw.gradient(0.0, r, crate::freewave::Part::Both),
            );
            phi[i] = eps * f;
            pi[i] = eps * g;
        }
    }

    let op = Operator::new(n, dr, l, &config.terms);
    let (per_sample, dt) = grid.time_step();
    let samples = grid.sample_count();

    let mut series: Vec<ObserverSeries> = config
        .observers
        .iter()
        .map(|&r_obs| ObserverSeries {
            r_obs,
            eps,
            config_hash: hash.clone(),
            l,
            terms: config.terms.clone(),
            t: Vec::with_capacity(samples),
            phi: Vec::with_capacity(samples),
            dphi_dt: Vec::with_capacity(samples),
        })
        .collect();
    let mut energy = Vec::new();

    let mut comp_phi = vec![0.0; n];
    let mut comp_pi = vec![0.0; n];
    let mut k_phi = vec![0.0; n];
    let mut k_pi = vec![0.0; n];
    let mut acc_phi = vec![0.0; n];
    let mut acc_pi = vec![0.0; n];
    let mut s_phi = vec![0.0; n];
    let mut s_pi = vec![0.0; n];

    let mut record = |k: usize, phi: &[f64], pi: &[f64]| -> Result<(), EvolveError> {
        let t = k as f64 * grid.sample_dt;
        if phi.iter().chain(pi).any(|v| !v.is_finite()) {
            return Err(EvolveError::BlowUp { t, eps });
        }
        for s in series.iter_mut() {
            s.t.push(t);
            s.phi.push(interpolate(phi, dr, s.r_obs));
            s.dphi_dt.push(interpolate(pi, dr, s.r_obs));
        }
        if record_energy {
            energy.push(EnergySample {
                t,
                energy: op.energy(phi, pi, dr, l),
            });
        }
        Ok(())
    };

    record(0, &phi, &pi)?;
    // Only the causal diamond is updated: nothing lives beyond the light cone
    // of the support, and (numerical group velocity never exceeds 1) nothing
    // beyond `r_obs + t_max - t` can reach an observer before `t_max`.
    let radius = config.generating.radius();
    let horizon = config.observers.iter().copied().fold(0.0, f64::max) + grid.t_max;
    let active_at = |t: f64| -> usize {
        let cone = ((t + dt + radius) / dr).ceil() as usize + CAUSAL_MARGIN;
        let inward = if full_grid {
            usize::MAX
        } else {
            ((horizon - t) / dr).ceil() as usize + CAUSAL_MARGIN
        };
        cone.min(inward).min(n - 2)
    };
    let mut steps = 0;
    for k in 1..samples {
        for _ in 0..per_sample {
            let t = steps as f64 * dt;
            let m = active_at(t);
            // k1
            op.apply(&phi, &pi, &mut k_phi, &mut k_pi, m);
            stage(&mut acc_phi[..m], &k_phi[..m], 1.0, true);
            stage(&mut acc_pi[..m], &k_pi[..m], 1.0, true);
            axpy(&mut s_phi[..m], &phi[..m], 0.5 * dt, &k_phi[..m]);
            axpy(&mut s_pi[..m], &pi[..m], 0.5 * dt, &k_pi[..m]);
            // k2
            op.apply(&s_phi, &s_pi, &mut k_phi, &mut k_pi, m);
            stage(&mut acc_phi[..m], &k_phi[..m], 2.0, false);
            stage(&mut acc_pi[..m], &k_pi[..m], 2.0, false);
            axpy(&mut s_phi[..m], &phi[..m], 0.5 * dt, &k_phi[..m]);
            axpy(&mut s_pi[..m], &pi[..m], 0.5 * dt, &k_pi[..m]);
            // k3
            op.apply(&s_phi, &s_pi, &mut k_phi, &mut k_pi, m);
            stage(&mut acc_phi[..m], &k_phi[..m], 2.0, false);
            stage(&mut acc_pi[..m], &k_pi[..m], 2.0, false);
            axpy(&mut s_phi[..m], &phi[..m], dt, &k_phi[..m]);
            axpy(&mut s_pi[..m], &pi[..m], dt, &k_pi[..m]);
            // k4
            op.apply(&s_phi, &s_pi, &mut k_phi, &mut k_pi, m);
            stage(&mut acc_phi[..m], &k_phi[..m], 1.0, false);
            stage(&mut acc_pi[..m], &k_pi[..m], 1.0, false);
            kahan_update(&mut phi[..m], &mut comp_phi[..m], &acc_phi[..m], dt / 6.0);
            kahan_update(&mut pi[..m], &mut comp_pi[..m], &acc_pi[..m], dt / 6.0);
            steps += 1;
        }
        record(k, &phi, &pi)?;
    }
    Ok(Evolution {
        series,
        energy,
        dt,
        steps,
    })
}

fn stage(acc: &mut [f64], k: &[f64], w: f64, reset: bool) {
    if reset {
        acc.copy_from_slice(k);
    } else {
        acc.iter_mut().zip(k).for_each(|(a, &b)| *a += w * b);
    }
}

fn axpy(out: &mut [f64], y: &[f64], h: f64, k: &[f64]) {
    out.iter_mut()
        .zip(y.iter().zip(k))
        .for_each(|(o, (&a, &b))| *o = a + h * b);
}

/// `y += h * inc` with a running compensation term per point.
fn kahan_update(y: &mut [f64], comp: &mut [f64], inc: &[f64], h: f64) {
    for ((yi, ci), &d) in y.iter_mut().zip(comp.iter_mut()).zip(inc) {
        let add = h * d - *ci;
        let next = *yi + add;
        *ci = (next - *yi) - add;
        *yi = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freewave::{eval_phi0, Part};
    use crate::wavedata::{DimensionIndex, GeneratingFunction};

    fn config(l: u32, terms: Vec<NonlinearityTerm>, dr: f64, t_max: f64, r_obs: f64) -> SimulationConfig {
        let generating = GeneratingFunction::reference_asymmetric(l, 1.0);
        let r_out = r_obs + t_max + generating.radius() + 1.0;
        SimulationConfig {
            dimension: DimensionIndex::new(l).unwrap(),
            terms,
            generating,
            epsilons: vec![0.05],
            grid: GridConfig::new(dr, r_out, t_max),
            observers: vec![r_obs],
        }
    }

    fn max_error_vs_exact(cfg: &SimulationConfig) -> f64 {
        let s = &evolve(cfg, 1.0).unwrap()[0];
        s.t.iter()
            .zip(&s.phi)
            .map(|(&t, &v)| (v - eval_phi0(&cfg.generating, cfg.dimension, t, s.r_obs, Part::Both)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn grid_validation() {
        let mut g = GridConfig::new(0.1, 10.0, 5.0);
        assert!(g.validate().is_ok());
        g.cfl = 1.5;
        assert!(matches!(g.validate(), Err(EvolveError::Cfl(_))));
        g.cfl = 0.25;
        g.fd_order = 2;
        assert!(matches!(g.validate(), Err(EvolveError::FdOrder(2))));
        g.fd_order = 4;
        g.dr = -1.0;
        assert!(g.validate().is_err());
    }

    #[test]
    fn time_step_divides_sampling_interval() {
        let g = GridConfig::new(1.0 / 32.0, 10.0, 5.0);
        let (per, dt) = g.time_step();
        assert_eq!(per, 32);
        assert_eq!(dt, 0.25 / 32.0);
        let g = GridConfig { sample_dt: 0.3, ..g };
        let (per, dt) = g.time_step();
        assert!(dt <= g.cfl * g.dr && (dt * per as f64 - 0.3).abs() < 1e-15);
    }

    #[test]
    fn interpolation_is_exact_for_cubics_and_even_reflection() {
        let dr = 0.1;
        let f: Vec<f64> = (0..20).map(|i| 1.0 + (i as f64 * dr).powi(2)).collect();
        for r in [0.03, 0.17, 0.55, 1.234] {
            assert!((interpolate(&f, dr, r) - (1.0 + r * r)).abs() < 1e-14);
        }
        let g: Vec<f64> = (0..20).map(|i| (i as f64 * dr).powi(3) - 2.0 * i as f64 * dr).collect();
        let r = 0.77;
        assert!((interpolate(&g, dr, r) - (r.powi(3) - 2.0 * r)).abs() < 1e-13);
        assert_eq!(interpolate(&g, dr, 0.5), g[5]);
    }

    #[test]
    fn zero_amplitude_gives_zero_series() {
        let cfg = config(1, vec![NonlinearityTerm::power(2)], 0.125, 4.0, 2.0);
        let s = &evolve(&cfg, 0.0).unwrap()[0];
        assert!(s.phi.iter().chain(&s.dphi_dt).all(|&v| v == 0.0));
        assert_eq!(s.t.len(), 17);
        assert!(s.t.windows(2).all(|w| (w[1] - w[0] - 0.25).abs() < 1e-15));
    }

    #[test]
    fn free_field_converges_at_fourth_order() {
        let errs: Vec<f64> = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0]
            .iter()
            .map(|&dr| max_error_vs_exact(&config(1, Vec::new(), dr, 6.0, 1.5)))
            .collect();
        let o1 = (errs[0] / errs[1]).log2();
        let o2 = (errs[1] / errs[2]).log2();
        assert!(o1 > 3.7 && o2 > 3.7, "errors {errs:?}, orders {o1} {o2}");
    }

    #[test]
    fn causal_cut_does_not_change_observers() {
        let cfg = config(1, vec![NonlinearityTerm::power(2)], 1.0 / 16.0, 30.0, 2.0);
        let cut = &run(&cfg, 0.05, false, false).unwrap().series[0];
        let full = &run(&cfg, 0.05, false, true).unwrap().series[0];
        let scale = full.phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let diff = cut.phi.iter().zip(&full.phi).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff == 0.0, "diff {diff:e} scale {scale:e}");
    }

    #[test]
    fn blow_up_is_reported() {
        let cfg = config(1, vec![NonlinearityTerm::power(3)], 0.125, 20.0, 1.0);
        match evolve(&cfg, 200.0) {
            Err(EvolveError::BlowUp { .. }) => {}
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn isolation_removes_opposite_parity() {
        let cfg = config(1, Vec::new(), 0.125, 4.0, 1.0);
        let p = &evolve(&cfg, 0.1).unwrap()[0];
        let m = &evolve(&cfg, -0.1).unwrap()[0];
        let odd = order_isolate(p, m, Parity::Odd).unwrap();
        let even = order_isolate(p, m, Parity::Even).unwrap();
        assert_eq!(odd.phi, p.phi);
        assert!(even.phi.iter().all(|&v| v == 0.0));
        let again = order_isolate(&odd, &odd.parity_partner(Parity::Odd), Parity::Odd).unwrap();
        assert_eq!(again.phi, odd.phi);
        let other = config(2, Vec::new(), 0.125, 4.0, 1.0);
        let q = &evolve(&other, -0.1).unwrap()[0];
        assert!(matches!(order_isolate(p, q, Parity::Odd), Err(EvolveError::Mismatch(_))));
    }

    #[test]
    fn csv_round_trip_keeps_metadata() {
        let cfg = config(1, vec![NonlinearityTerm::power(2)], 0.125, 3.0, 1.0);
        let s = &evolve(&cfg, 0.05).unwrap()[0];
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = ObserverSeries::read_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(&back, s);
    }
}
