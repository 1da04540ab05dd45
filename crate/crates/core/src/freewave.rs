//! Exact evaluation of the free spherical wave generated by `a(x)`.
//!
//! In `d = 2l + 3` dimensions
//!
//! ```text
//! phi0_ret(t, r) = r^-(l+1) sum_k (2l-k)!/(k!(l-k)!) a^(k)(u) / (v-u)^(l-k)
//! phi0_adv(t, r) = r^-(l+1) sum_k (-1)^(k+1) (2l-k)!/(k!(l-k)!) a^(k)(v) / (v-u)^(l-k)
//! ```
//!
//! with `u = t - r`, `v = t + r`. Each part is singular at the origin; their
//! sum is regular. Near `r = 0` the sum is evaluated from its even Taylor
//! series in `r`, which is a finite exact sum because each bump is a
//! polynomial on its support.

use thiserror::Error;

use crate::specialfn::factorial;
use crate::wavedata::{Bump, DimensionIndex, GeneratingFunction, WaveDataError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FreeWaveError {
    #[error(transparent)]
    Profile(#[from] WaveDataError),
    #[error("tail integral quadrature did not settle (profile not smooth enough?)")]
    NonConvergent,
}

/// Which half of the free wave to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Retarded,
    Advanced,
    Both,
}

/// Retarded/advanced time pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullPoint {
    pub u: f64,
    pub v: f64,
}

impl NullPoint {
    /// `None` when `v < u` (negative radius).
    pub fn new(u: f64, v: f64) -> Option<Self> {
        (v >= u).then_some(Self { u, v })
    }

    pub fn from_tr(t: f64, r: f64) -> Self {
        Self { u: t - r, v: t + r }
    }

    pub fn t(&self) -> f64 {
        0.5 * (self.u + self.v)
    }

    pub fn r(&self) -> f64 {
        0.5 * (self.v - self.u)
    }
}

/// Bump fraction below which the regular series replaces the split formula.
const SERIES_RADIUS_FRACTION: f64 = 0.25;

/// Precomputed radial weights for one `(a, l)` pair.
#[derive(Debug, Clone)]
pub struct FreeWave<'a> {
    a: &'a GeneratingFunction,
    l: u32,
    /// `W_k = (2l-k)!/(k!(l-k)!) 2^(k-l)` so `phi0_ret = sum_k W_k a^(k)(u) r^(k-2l-1)`.
    weights: Vec<f64>,
    /// `T_s` for even `s`: `phi0 = sum_s T_s a^(2l+1+s)(t) r^s` near the origin.
    series: Vec<f64>,
}

impl<'a> FreeWave<'a> {
    pub fn new(a: &'a GeneratingFunction, dim: DimensionIndex) -> Self {
        let l = dim.l();
        let weights: Vec<f64> = (0..=l)
            .map(|k| factorial(2 * l - k) / (factorial(k) * factorial(l - k)) * 2f64.powi(k as i32 - l as i32))
            .collect();
        let max_m = a.bumps().iter().map(|b| b.smoothness).max().unwrap_or(0);
        let max_s = (2 * max_m + 2).saturating_sub(2 * l + 1);
        let series = (0..=max_s)
            .map(|s| {
                if s % 2 == 1 {
                    return 0.0;
                }
                -2.0 * weights
                    .iter()
                    .enumerate()
                    .map(|(k, w)| {
                        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                        sign * w / factorial(s + 2 * l + 1 - k as u32)
                    })
                    .sum::<f64>()
            })
            .collect();
        Self {
            a,
            l,
            weights,
            series,
        }
    }

    pub fn profile(&self) -> &GeneratingFunction {
        self.a
    }

    /// Radii at which each bump switches between the series and the split
    /// formula; quadratures crossing them should break there.
    pub(crate) fn switch_radii(&self) -> impl Iterator<Item = f64> + '_ {
        self.a.bumps().iter().map(|b| SERIES_RADIUS_FRACTION * b.half_width)
    }

    /// `W_k`, `k = 0..=l`.
    pub(crate) fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn use_series(b: &Bump, t: f64, r: f64) -> bool {
        r <= SERIES_RADIUS_FRACTION * b.half_width && t - r > b.lo() && t + r < b.hi()
    }

    /// `(phi, d_t phi, d_r phi)` of one bump's contribution by the regular series.
    fn bump_series(&self, b: &Bump, t: f64, r: f64) -> (f64, f64, f64) {
        let base = 2 * self.l + 1;
        let (mut phi, mut dt, mut dr) = (0.0, 0.0, 0.0);
        let mut rs = 1.0; // r^s
        for (s, &ts) in self.series.iter().enumerate() {
            if s % 2 == 0 && ts != 0.0 {
                let n = base + s as u32;
                phi += ts * b.derivative(n, t) * rs;
                dt += ts * b.derivative(n + 1, t) * rs;
                if s > 0 {
                    dr += ts * s as f64 * b.derivative(n, t) * rs / r;
                }
            }
            rs *= r;
        }
        (phi, dt, dr)
    }

    /// Split formula for one bump; `r > 0`.
    fn bump_direct(&self, b: &Bump, t: f64, r: f64, part: Part, grad: bool) -> (f64, f64, f64) {
        let l = self.l as i32;
        let u = t - r;
        let v = t + r;
        let ret = matches!(part, Part::Retarded | Part::Both) && u >= b.lo() && u <= b.hi();
        let adv = matches!(part, Part::Advanced | Part::Both) && v >= b.lo() && v <= b.hi();
        if !ret && !adv {
            return (0.0, 0.0, 0.0);
        }
        let (mut phi, mut dt, mut dr) = (0.0, 0.0, 0.0);
        let mut du_prev = if ret { b.derivative(0, u) } else { 0.0 };
        let mut dv_prev = if adv { b.derivative(0, v) } else { 0.0 };
        for (k, &w) in self.weights.iter().enumerate() {
            let pow = k as i32 - 2 * l - 1;
            let rp = r.powi(pow);
            let sign_adv = if k % 2 == 0 { -1.0 } else { 1.0 };
            let du_next = if ret && grad { b.derivative(k as u32 + 1, u) } else { 0.0 };
            let dv_next = if adv && grad { b.derivative(k as u32 + 1, v) } else { 0.0 };
            phi += w * (du_prev + sign_adv * dv_prev) * rp;
            if grad {
                dt += w * (du_next + sign_adv * dv_next) * rp;
                dr += w
                    * ((-du_next + sign_adv * dv_next) * rp
                        + pow as f64 * (du_prev + sign_adv * dv_prev) * rp / r);
            }
            if k + 1 < self.weights.len() {
                du_prev = if ret {
                    if grad { du_next } else { b.derivative(k as u32 + 1, u) }
                } else {
                    0.0
                };
                dv_prev = if adv {
                    if grad { dv_next } else { b.derivative(k as u32 + 1, v) }
                } else {
                    0.0
                };
            }
        }
        (phi, dt, dr)
    }

    fn accumulate(&self, t: f64, r: f64, part: Part, grad: bool) -> (f64, f64, f64) {
        let (mut phi, mut dt, mut dr) = (0.0, 0.0, 0.0);
        for b in self.a.bumps() {
            let (p, d1, d2) = if part == Part::Both && Self::use_series(b, t, r) {
                self.bump_series(b, t, r)
            } else if r > 0.0 {
                self.bump_direct(b, t, r, part, grad)
            } else {
                // r = 0 with t outside the open support: the limit vanishes
                (0.0, 0.0, 0.0)
            };
            phi += p;
            dt += d1;
            dr += d2;
        }
        (phi, dt, dr)
    }

    /// `phi0` (or one of its halves) at `(t, r)`. Single halves need `r > 0`.
    pub fn value(&self, t: f64, r: f64, part: Part) -> f64 {
        self.accumulate(t, r, part, false).0
    }

    /// `(d_t phi0, d_r phi0)` of the selected part.
    pub fn gradient(&self, t: f64, r: f64, part: Part) -> (f64, f64) {
        let (_, dt, dr) = self.accumulate(t, r, part, true);
        (dt, dr)
    }

    /// Value and gradient in one pass.
    pub fn value_and_gradient(&self, t: f64, r: f64, part: Part) -> (f64, f64, f64) {
        self.accumulate(t, r, part, true)
    }
}

/// `phi0(t, r)` from the generating function.
pub fn eval_phi0(a: &GeneratingFunction, dim: DimensionIndex, t: f64, r: f64, part: Part) -> f64 {
    FreeWave::new(a, dim).value(t, r, part)
}

/// Analytic `(d_t phi0, d_r phi0)` of the full free wave.
pub fn eval_phi0_gradient(a: &GeneratingFunction, dim: DimensionIndex, t: f64, r: f64) -> (f64, f64) {
    FreeWave::new(a, dim).gradient(t, r, Part::Both)
}

/// `int (a^(l))^p (a^(l+1))^q` together with `int |...|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailIntegral {
    pub value: f64,
    pub abs_value: f64,
}

impl TailIntegral {
    /// True when cancellation leaves nothing above rounding.
    pub fn is_degenerate(&self) -> bool {
        self.value.abs() <= 1e-12 * self.abs_value.max(f64::MIN_POSITIVE)
    }
}

fn composite_gauss<F: Fn(f64) -> f64>(panels: &[(f64, f64)], nodes: usize, f: &F) -> (f64, f64) {
    let rule = crate::specialfn::gauss_rule(nodes);
    let mut s = 0.0;
    let mut a = 0.0;
    for &(lo, hi) in panels {
        s += rule.integrate(lo, hi, f);
        a += rule.integrate(lo, hi, |x| f(x).abs());
    }
    (s, a)
}

/// Gauss panels aligned with every bump endpoint; the integrand is polynomial
/// on each panel, so the node count is raised until successive refinements
/// agree to 1e-12 relative to the absolute integral.
fn piecewise_polynomial_integral<F: Fn(f64) -> f64>(
    panels: &[(f64, f64)],
    degree_hint: u32,
    f: F,
) -> Result<TailIntegral, FreeWaveError> {
    let mut n = (degree_hint as usize / 2 + 1).max(4);
    let (mut prev, _) = composite_gauss(panels, n, &f);
    while n <= 1024 {
        n *= 2;
        let (next, abs) = composite_gauss(panels, n, &f);
        if (next - prev).abs() <= 1e-12 * abs.max(f64::MIN_POSITIVE) {
            return Ok(TailIntegral {
                value: next,
                abs_value: abs,
            });
        }
        prev = next;
    }
    Err(FreeWaveError::NonConvergent)
}

fn support_panels(a: &GeneratingFunction, upper: f64) -> Vec<(f64, f64)> {
    let mut pts: Vec<f64> = a.breakpoints().into_iter().filter(|&x| x < upper).collect();
    if pts.is_empty() {
        return Vec::new();
    }
    let (_, hi) = a.support();
    pts.push(upper.min(hi));
    pts.windows(2).filter(|w| w[1] > w[0]).map(|w| (w[0], w[1])).collect()
}

/// `I_n(p, q) = int (a^(n))^p (a^(n+1))^q dx` with value and absolute scale.
pub fn tail_integral_detail(
    a: &GeneratingFunction,
    n: u32,
    p: u32,
    q: u32,
) -> Result<TailIntegral, FreeWaveError> {
    let top = if q > 0 { n + 1 } else { n };
    a.derivative(top, 0.0)?;
    let max_m = a.bumps().iter().map(|b| b.smoothness).max().unwrap_or(0);
    let panels = support_panels(a, f64::INFINITY);
    let degree = (p + q) * 2 * max_m;
    piecewise_polynomial_integral(&panels, degree, |x| {
        let mut v = 1.0;
        if p > 0 {
            v *= a.derivative_unchecked(n, x).powi(p as i32);
        }
        if q > 0 {
            v *= a.derivative_unchecked(n + 1, x).powi(q as i32);
        }
        v
    })
}

/// `I_n(p, q) = int (a^(n))^p (a^(n+1))^q dx`, the only trace of the data in
/// the leading tail amplitudes.
pub fn tail_integral(a: &GeneratingFunction, n: u32, p: u32, q: u32) -> Result<f64, FreeWaveError> {
    tail_integral_detail(a, n, p, q).map(|t| t.value)
}

/// `h(u) = -(2^(2l)/l) int_{-inf}^u (a^(l)(x))^2 dx`, the `(v-u)^-(2l+1)`
/// coefficient of the first quadratic iterate near null infinity.
pub fn null_tail_coefficient(a: &GeneratingFunction, dim: DimensionIndex, u: f64) -> f64 {
    let l = dim.l();
    let panels = support_panels(a, u);
    if panels.is_empty() {
        return 0.0;
    }
    let max_m = a.bumps().iter().map(|b| b.smoothness).max().unwrap_or(0);
    let integral = piecewise_polynomial_integral(&panels, 4 * max_m, |x| {
        a.derivative_unchecked(l, x).powi(2)
    })
    .map(|t| t.value)
    .unwrap_or(f64::NAN);
    -(4f64.powi(l as i32) / l as f64) * integral
}
