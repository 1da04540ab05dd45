//! Direct quadrature of the first Duhamel iterate, and the kernel moment
//! identity behind its large-`t` expansion.
//!
//! With null coordinates `eta = tau - rho`, `xi = tau + rho` the first iterate
//! of `box phi = S(phi0)` is
//!
//! ```text
//! phi(t, r) = 1/(2^(l+3) r^(l+1)) int dxi int deta (xi - eta)^(l+1) P_l(mu) S(eta, xi)
//! mu = (r^2 + (xi - t)(t - eta)) / (r (xi - eta))
//! ```
//!
//! over `|t-r| <= xi <= t+r`, `-xi <= eta <= t-r`. Once `t > r + R` only the
//! retarded part of `phi0` reaches the observer and the order can be swapped
//! so that `eta` runs over the support of `a` and `xi` over `[t-r, t+r]`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::freewave::{null_tail_coefficient, FreeWave, Part};
use crate::specialfn::{
    double_factorial, factorial, falling_factorial, gauss_rule, hyp2f1_terminating, legendre,
    try_integrate, AdaptiveOptions, QuadratureError, SpecialFnError,
};
use crate::wavedata::{DimensionIndex, GeneratingFunction, NonlinearityTerm, WaveDataError};

#[derive(Debug, Error)]
pub enum DuhamelError {
    #[error("radius must be positive, got r = {0}")]
    NonPositiveRadius(f64),
    #[error("the swapped form needs t > r + R (t = {t}, r = {r}, R = {radius})")]
    BeforeTail { t: f64, r: f64, radius: f64 },
    #[error("identity needs t - eta > r > 0 (t = {t}, r = {r}, eta = {eta})")]
    IdentityDomain { t: f64, r: f64, eta: f64 },
    #[error("identity needs n >= l + 2 (l = {l}, n = {n})")]
    IdentityOrder { l: u32, n: u32 },
    #[error("null expansion needs at least {needed} increasing v samples above u, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("v samples span only a factor {span:.2}; at least 4 is needed for a stable fit")]
    IllConditioned { span: f64 },
    #[error(transparent)]
    Term(#[from] WaveDataError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Special(#[from] SpecialFnError),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// An iterate value with the magnitude it was assembled from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Iterate {
    pub value: f64,
    /// Same prefactor times the double integral of the absolute integrand;
    /// cancellation below `1e-12 * scale` is rounding.
    pub scale: f64,
}

fn prefactor(l: u32, r: f64) -> f64 {
    1.0 / (2f64.powi(l as i32 + 3) * r.powi(l as i32 + 1))
}

/// `mu` measured from the observer's retarded time; the textbook form
/// `r^2 + (xi - t)(t - eta)` cancels two `O(r^2)` terms near null infinity.
fn cosine(t: f64, r: f64, eta: f64, xi: f64) -> f64 {
    let u = t - r;
    let (x, y) = (xi - u, eta - u);
    ((x + y) - x * y / r) / (x - y)
}

fn kernel(l: u32, t: f64, r: f64, eta: f64, xi: f64) -> Result<f64, SpecialFnError> {
    let d = xi - eta;
    Ok(d.powi(l as i32 + 1) * legendre(l as usize, cosine(t, r, eta, xi))?)
}

const INNER: AdaptiveOptions = AdaptiveOptions {
    rel_tol: 1e-13,
    abs_tol: 0.0,
    nodes: 16,
    max_depth: 40,
};

const OUTER: AdaptiveOptions = AdaptiveOptions {
    rel_tol: 1e-11,
    abs_tol: 0.0,
    nodes: 16,
    max_depth: 40,
};

/// Outer adaptive quadrature of an inner integral. The reported scale is the
/// double integral of the absolute integrand, so cancellation inside the
/// inner integral counts against it too.
fn nested<F>(mut inner: F, breaks: &[f64]) -> Result<crate::specialfn::Integral, DuhamelError>
where
    F: FnMut(f64) -> Result<crate::specialfn::Integral, DuhamelError>,
{
    let outer = try_integrate(|x| inner(x).map(|i| i.value), breaks, OUTER)?;
    let rule = crate::specialfn::gauss_rule(OUTER.nodes);
    let mut abs_value = 0.0;
    for w in breaks.windows(2).filter(|w| w[1] > w[0]) {
        let (half, mid) = (0.5 * (w[1] - w[0]), 0.5 * (w[1] + w[0]));
        for (&x, &wt) in rule.nodes.iter().zip(&rule.weights) {
            abs_value += wt * half * inner(mid + half * x)?.abs_value;
        }
    }
    Ok(crate::specialfn::Integral { abs_value, ..outer })
}

/// `(phi0_ret, d_t, d_r)` at fixed retarded time `eta`, as a function of `rho`.
struct RetardedSlice<'a> {
    weights: &'a [f64],
    /// `a^(k)(eta)` for `k = 0..=l+1`.
    ders: Vec<f64>,
}

impl RetardedSlice<'_> {
    fn at(&self, rho: f64) -> (f64, f64, f64) {
        let l = self.weights.len() as i32 - 1;
        let mut rp = rho.powi(-(2 * l + 1));
        let (mut phi, mut dt, mut dr) = (0.0, 0.0, 0.0);
        for (k, &w) in self.weights.iter().enumerate() {
            let (dk, dk1) = (self.ders[k], self.ders[k + 1]);
            phi += w * dk * rp;
            dt += w * dk1 * rp;
            dr += w * (-dk1 * rp + (k as i32 - 2 * l - 1) as f64 * dk * rp / rho);
            rp *= rho;
        }
        (phi, dt, dr)
    }
}

/// `int deta int dxi kernel * term(phi0_ret)` over the rectangle
/// `eta in [eta_lo, eta_hi]`, `xi in [xi_lo, xi_hi]`, `eta` outer.
#[allow(clippy::too_many_arguments)]
fn retarded_rectangle(
    fw: &FreeWave<'_>,
    l: u32,
    term: &NonlinearityTerm,
    t: f64,
    r: f64,
    (eta_lo, eta_hi): (f64, f64),
    (xi_lo, xi_hi): (f64, f64),
) -> Result<crate::specialfn::Integral, DuhamelError> {
    let a = fw.profile();
    let breaks = sorted_inside(a.breakpoints(), eta_lo, eta_hi);
    let zero = crate::specialfn::Integral {
        value: 0.0,
        abs_value: 0.0,
        evaluations: 0,
    };
    nested(
        |eta: f64| {
            let ders: Vec<f64> = (0..=l + 1).map(|k| a.derivative_unchecked(k, eta)).collect();
            if ders.iter().all(|&d| d == 0.0) {
                return Ok(zero);
            }
            let slice = RetardedSlice {
                weights: fw.weights(),
                ders,
            };
            try_integrate(
                |xi: f64| -> Result<f64, DuhamelError> {
                    let (phi, phi_t, phi_r) = slice.at(0.5 * (xi - eta));
                    Ok(kernel(l, t, r, eta, xi)? * term.eval(phi, phi_t, phi_r))
                },
                &[xi_lo, xi_hi],
                INNER,
            )
        },
        &breaks,
    )
}

/// First iterate `phi_{p+q-1}(t, r)` sourced by `term(phi0)`, by the swapped
/// (`eta` outer) quadrature. Valid for `t > r + R`.
pub fn first_order_iterate(
    a: &GeneratingFunction,
    dim: DimensionIndex,
    term: &NonlinearityTerm,
    t: f64,
    r: f64,
) -> Result<Iterate, DuhamelError> {
    term.validate(0)?;
    a.derivative(dim.l() + 1, 0.0)?;
    if !(r > 0.0) {
        return Err(DuhamelError::NonPositiveRadius(r));
    }
    let radius = a.radius();
    if !(t > r + radius) {
        return Err(DuhamelError::BeforeTail { t, r, radius });
    }
    let l = dim.l();
    let fw = FreeWave::new(a, dim);
    let (lo, hi) = a.support();
    let outer = retarded_rectangle(&fw, l, term, t, r, (lo, hi), (t - r, t + r))?;
    let pre = prefactor(l, r);
    Ok(Iterate {
        value: pre * outer.value,
        scale: pre * outer.abs_value,
    })
}

fn sorted_inside(mut pts: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    pts.retain(|&x| x > lo && x < hi);
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// First iterate by the unswapped (`xi` outer) quadrature with the full
/// `phi0 = ret + adv` source. Valid everywhere with `r > 0`.
pub fn first_iterate_full(
    a: &GeneratingFunction,
    dim: DimensionIndex,
    term: &NonlinearityTerm,
    t: f64,
    r: f64,
) -> Result<Iterate, DuhamelError> {
    term.validate(0)?;
    a.derivative(dim.l() + 1, 0.0)?;
    if !(r > 0.0) {
        return Err(DuhamelError::NonPositiveRadius(r));
    }
    let l = dim.l();
    let fw = FreeWave::new(a, dim);
    let outer = full_strip(&fw, l, term, t, r, ((t - r).abs(), t + r))?;
    let pre = prefactor(l, r);
    Ok(Iterate {
        value: pre * outer.value,
        scale: pre * outer.abs_value,
    })
}

/// `xi`-outer quadrature with the full source over `xi in [xi_lo, xi_hi]`,
/// `eta in [-xi, t-r]`.
fn full_strip(
    fw: &FreeWave<'_>,
    l: u32,
    term: &NonlinearityTerm,
    t: f64,
    r: f64,
    (xi_lo, xi_hi): (f64, f64),
) -> Result<crate::specialfn::Integral, DuhamelError> {
    let a = fw.profile();
    let bps = a.breakpoints();
    let mirrored: Vec<f64> = bps.iter().flat_map(|&x| [x, -x]).collect();
    let zero = crate::specialfn::Integral {
        value: 0.0,
        abs_value: 0.0,
        evaluations: 0,
    };
    nested(
        |xi: f64| {
            let eta_lo = -xi;
            let eta_hi = t - r;
            if eta_hi <= eta_lo {
                return Ok(zero);
            }
            try_integrate(
                |eta: f64| -> Result<f64, DuhamelError> {
                    let rho = 0.5 * (xi - eta);
                    if rho <= 0.0 {
                        return Ok(0.0);
                    }
                    let (phi, phi_t, phi_r) = fw.value_and_gradient(0.5 * (xi + eta), rho, Part::Both);
                    let s = term.eval(phi, phi_t, phi_r);
                    if s == 0.0 {
                        return Ok(0.0);
                    }
                    Ok(kernel(l, t, r, eta, xi)? * s)
                },
                &sorted_inside(
                    bps.iter()
                        .copied()
                        .chain(fw.switch_radii().map(|rho| xi - 2.0 * rho))
                        .collect(),
                    eta_lo,
                    eta_hi,
                ),
                INNER,
            )
        },
        &sorted_inside(mirrored, xi_lo, xi_hi),
    )
}

/// Same integral as [`first_iterate_full`], split at `xi = max(|t-r|, R)`.
/// Beyond that line the advanced part has died out and the domain is a
/// rectangle in `(eta, xi)`, integrated `eta` outer; only the strip below it
/// needs the full source.
pub fn first_iterate_split(
    a: &GeneratingFunction,
    dim: DimensionIndex,
    term: &NonlinearityTerm,
    t: f64,
    r: f64,
) -> Result<Iterate, DuhamelError> {
    term.validate(0)?;
    a.derivative(dim.l() + 1, 0.0)?;
    if !(r > 0.0) {
        return Err(DuhamelError::NonPositiveRadius(r));
    }
    let l = dim.l();
    let fw = FreeWave::new(a, dim);
    let (lo, hi) = a.support();
    let xi_lo = (t - r).abs();
    let xi_hi = t + r;
    let xi_cut = xi_lo.max(a.radius()).min(xi_hi);
    let strip = full_strip(&fw, l, term, t, r, (xi_lo, xi_cut))?;
    let eta_hi = hi.min(t - r);
    let rect = if eta_hi > lo && xi_hi > xi_cut {
        retarded_rectangle(&fw, l, term, t, r, (lo, eta_hi), (xi_cut, xi_hi))?
    } else {
        crate::specialfn::Integral {
            value: 0.0,
            abs_value: 0.0,
            evaluations: 0,
        }
    };
    let pre = prefactor(l, r);
    Ok(Iterate {
        value: pre * (strip.value + rect.value),
        scale: pre * (strip.abs_value + rect.abs_value),
    })
}

/// Both sides of `int_{t-r}^{t+r} P_l(mu) / (xi - eta)^n dxi` identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub l: u32,
    pub n: u32,
    pub t: f64,
    pub r: f64,
    pub eta: f64,
    /// Direct adaptive quadrature.
    pub lhs: f64,
    /// Terminating hypergeometric form.
    pub rhs_closed: f64,
    /// Finite power series in `(r / (t - eta))^2`.
    pub rhs_series: f64,
    /// Two-term large-`t` form.
    pub rhs_expansion: f64,
    pub rel_err: f64,
    pub rel_err_series: f64,
    pub rel_err_expansion: f64,
}

fn rel_diff(x: f64, reference: f64) -> f64 {
    if x == reference {
        0.0
    } else {
        ((x - reference) / reference).abs()
    }
}

/// Evaluates the kernel moment three ways and compares with quadrature.
pub fn verify_master_identity(l: u32, n: u32, t: f64, r: f64, eta: f64) -> Result<IdentityCheck, DuhamelError> {
    if n < l + 2 {
        return Err(DuhamelError::IdentityOrder { l, n });
    }
    if !(r > 0.0 && t - eta > r) {
        return Err(DuhamelError::IdentityDomain { t, r, eta });
    }
    let lhs = try_integrate(
        |xi: f64| -> Result<f64, DuhamelError> {
            Ok(legendre(l as usize, cosine(t, r, eta, xi))? / (xi - eta).powi(n as i32))
        },
        &[t - r, t + r],
        AdaptiveOptions {
            rel_tol: 1e-14,
            ..INNER
        },
    )?
    .value;

    let s = t - eta;
    let z = (r / s).powi(2);
    let lead = 2.0 * falling_factorial((n - 2) as f64, l) / double_factorial(2 * l + 1);
    let sign = if l.is_multiple_of(2) { 1.0 } else { -1.0 };
    let envelope = sign * r.powi(l as i32 + 1) * s.powi(n as i32 - l as i32 - 2)
        / (s * s - r * r).powi(n as i32 - 1);
    let hyp = hyp2f1_terminating(
        (l as f64 + 2.0 - n as f64) / 2.0,
        (l as f64 + 3.0 - n as f64) / 2.0,
        l as f64 + 1.5,
        z,
    )?;
    let rhs_closed = lead * envelope * hyp;

    let mut series = 0.0;
    let mut m = 0u32;
    while l + 2 * m <= n - 2 {
        let j = l + 2 * m;
        series += 2f64.powi(1 - m as i32) * factorial(n - 2) / factorial(n - 2 - j)
            / (factorial(m) * double_factorial(2 * l + 2 * m + 1))
            * z.powi(m as i32);
        m += 1;
    }
    let rhs_series = envelope * series;

    let rhs_expansion = sign * lead * r.powi(l as i32 + 1) / t.powi((l + n) as i32)
        * (1.0 + (l + n) as f64 * eta / t);

    Ok(IdentityCheck {
        l,
        n,
        t,
        r,
        eta,
        lhs,
        rhs_closed,
        rhs_series,
        rhs_expansion,
        rel_err: rel_diff(lhs, rhs_closed),
        rel_err_series: rel_diff(rhs_series, rhs_closed),
        rel_err_expansion: rel_diff(lhs, rhs_expansion),
    })
}

/// Sweep parameters for [`identity_sweep`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentitySweep {
    pub l_values: Vec<u32>,
    /// `n` runs over `l + 2 ..= l + 2 + n_span`.
    pub n_span: u32,
    pub samples: usize,
    pub seed: u64,
}

impl Default for IdentitySweep {
    fn default() -> Self {
        Self {
            l_values: vec![1, 2, 3],
            n_span: 6,
            samples: 20,
            seed: 0x5eed,
        }
    }
}

/// Random `(t, r, eta)` with `t - eta > r + 1`, identical for every `(l, n)`.
pub fn identity_sample_points(samples: usize, seed: u64) -> Vec<(f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|_| {
            let r = rng.random_range(0.5..5.0);
            let eta = rng.random_range(-5.0..5.0);
            let gap = rng.random_range(1.0..20.0);
            (eta + r + gap, r, eta)
        })
        .collect()
}

/// Every `(l, n, sample)` combination, in a fixed order.
pub fn identity_sweep(sweep: &IdentitySweep) -> Result<Vec<IdentityCheck>, DuhamelError> {
    let points = identity_sample_points(sweep.samples, sweep.seed);
    let mut rows = Vec::new();
    for &l in &sweep.l_values {
        for n in l + 2..=l + 2 + sweep.n_span {
            for &(t, r, eta) in &points {
                rows.push(verify_master_identity(l, n, t, r, eta)?);
            }
        }
    }
    Ok(rows)
}

pub const CSV_SCHEMA_VERSION: u32 = 1;

/// `l,n,t,r,eta,lhs,rhs,rel_err` with a `#` schema line.
pub fn write_identity_csv<W: Write>(rows: &[IdentityCheck], mut out: W) -> Result<(), DuhamelError> {
    writeln!(out, "# schema_version={CSV_SCHEMA_VERSION} kind=identity")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["l", "n", "t", "r", "eta", "lhs", "rhs", "rel_err"])?;
    for row in rows {
        w.write_record(&[
            row.l.to_string(),
            row.n.to_string(),
            format!("{:e}", row.t),
            format!("{:e}", row.r),
            format!("{:e}", row.eta),
            format!("{:e}", row.lhs),
            format!("{:e}", row.rhs_closed),
            format!("{:e}", row.rel_err),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Outcome of reading `h(u)` off the first quadratic iterate along `u = const`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullExpansionCheck {
    pub u: f64,
    pub extracted: f64,
    pub h: f64,
    pub rel_err: f64,
    /// Fitted `c_j(u)`, `j = l+1 ..= 2l+2`, in `phi1 ~ sum_j c_j (v-u)^-j`.
    pub coefficients: Vec<f64>,
}

/// Least-squares `c_j` in `phi1(u, v) = sum_{j=l+1}^{2l+2} c_j (v-u)^-j`.
fn null_coefficients(
    a: &GeneratingFunction,
    dim: DimensionIndex,
    u: f64,
    v_samples: &[f64],
) -> Result<Vec<f64>, DuhamelError> {
    let l = dim.l();
    let quad = NonlinearityTerm::power(2);
    let powers: Vec<i32> = (l + 1..=2 * l + 2).map(|j| j as i32).collect();
    // columns scaled by the first sample to keep the system well balanced
    let s0 = v_samples[0] - u;
    let mut m = DMatrix::zeros(v_samples.len(), powers.len());
    let mut rhs = DVector::zeros(v_samples.len());
    for (i, &v) in v_samples.iter().enumerate() {
        let x = s0 / (v - u);
        for (j, &pw) in powers.iter().enumerate() {
            m[(i, j)] = x.powi(pw);
        }
        let phi = first_iterate_split(a, dim, &quad, 0.5 * (u + v), 0.5 * (v - u))?;
        rhs[i] = phi.value;
    }
    let sol = m
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .expect("SVD was computed with both factors");
    Ok(powers
        .iter()
        .zip(sol.iter())
        .map(|(&pw, &c)| c * s0.powi(pw))
        .collect())
}

/// Recovers `h(u)` from the first quadratic iterate near null infinity and
/// compares it with [`null_tail_coefficient`].
///
/// The free part of the iterate also carries a `(v-u)^-(2l+1)` term, so the
/// raw coefficient is not `h` itself. Inserting the expansion into the wave
/// equation gives `c_{2l+1}' = 2 c_{2l} - (2^(2l)/l) (a^(l))^2`, hence
/// `h(u) = c_{2l+1}(u) - 2 int_{-inf}^u c_{2l}`.
pub fn phi1_null_expansion_check(
    a: &GeneratingFunction,
    dim: DimensionIndex,
    u: f64,
    v_samples: &[f64],
) -> Result<NullExpansionCheck, DuhamelError> {
    let l = dim.l();
    let needed = (l + 2) as usize;
    let valid = v_samples.windows(2).all(|w| w[1] > w[0]) && v_samples.first().is_some_and(|&v| v > u);
    if v_samples.len() < needed || !valid {
        return Err(DuhamelError::TooFewSamples {
            needed,
            got: v_samples.len(),
        });
    }
    let (lo, hi) = a.support();
    // the iterate vanishes identically for u below this
    let lower = lo.min(-hi);
    let span = v_samples[v_samples.len() - 1] / v_samples[0];
    if span < 4.0 {
        return Err(DuhamelError::IllConditioned { span });
    }
    let coefficients = null_coefficients(a, dim, u, v_samples)?;
    let odd = coefficients[l as usize];

    let mut integral = 0.0;
    if u > lower {
        let mut kinks: Vec<f64> = a.breakpoints().iter().flat_map(|&x| [x, -x]).collect();
        kinks.push(0.0);
        let breaks = sorted_inside(kinks, lower, u);
        let rule = gauss_rule(10);
        for w in breaks.windows(2) {
            let (p_lo, p_hi) = (w[0], w[1]);
            let half = 0.5 * (p_hi - p_lo);
            let mid = 0.5 * (p_hi + p_lo);
            for (&x, &wt) in rule.nodes.iter().zip(&rule.weights) {
                let up = mid + half * x;
                let c = null_coefficients(a, dim, up, v_samples)?;
                integral += wt * half * c[l as usize - 1];
            }
        }
    }
    let extracted = odd - 2.0 * integral;
    let h = null_tail_coefficient(a, dim, u);
    let rel_err = if h == 0.0 { extracted.abs() } else { ((extracted - h) / h).abs() };
    Ok(NullExpansionCheck {
        u,
        extracted,
        h,
        rel_err,
        coefficients,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictions::coeff_c;

    fn dim(l: u32) -> DimensionIndex {
        DimensionIndex::new(l).unwrap()
    }

    #[test]
    fn identity_simple_parameters() {
        let c = verify_master_identity(1, 3, 7.0, 2.0, 0.5).unwrap();
        let s: f64 = 6.5;
        let expect = -(2.0 / 3.0) * 4.0 / (s * s - 4.0).powi(2);
        assert!(rel_diff(c.rhs_closed, expect) < 1e-14);
        assert!(c.rel_err < 1e-10, "{c:?}");
        let c = verify_master_identity(1, 4, 10.0, 3.0, -2.0).unwrap();
        assert!(c.rel_err < 1e-10 && c.rel_err_series < 1e-13, "{c:?}");
    }

    #[test]
    fn identity_rejects_bad_domain() {
        assert!(matches!(verify_master_identity(2, 3, 10.0, 1.0, 0.0), Err(DuhamelError::IdentityOrder { .. })));
        assert!(matches!(verify_master_identity(1, 4, 1.0, 2.0, 0.0), Err(DuhamelError::IdentityDomain { .. })));
    }

    #[test]
    fn expansion_residual_falls_like_inverse_square() {
        let errs: Vec<f64> = [50.0, 100.0, 200.0]
            .iter()
            .map(|&t| verify_master_identity(2, 6, t, 2.0, 1.0).unwrap().rel_err_expansion)
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 2.0).abs() < 0.15, "{errs:?}");
        }
    }

    #[test]
    fn sweep_is_deterministic_and_tight() {
        let sweep = IdentitySweep {
            l_values: vec![1, 2],
            n_span: 2,
            samples: 5,
            seed: 7,
        };
        let a = identity_sweep(&sweep).unwrap();
        let b = identity_sweep(&sweep).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2 * 3 * 5);
        assert!(a.iter().all(|c| c.rel_err < 1e-10));
        let mut buf = Vec::new();
        write_identity_csv(&a, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# schema_version=1"));
        assert_eq!(text.lines().count(), 2 + a.len());
    }

    #[test]
    fn quadratic_iterate_is_huygensian() {
        let a = GeneratingFunction::reference_asymmetric(1, 1.0);
        let big_r = a.radius();
        for &(t, r) in &[(big_r + 3.0, 2.0), (30.0, 5.0)] {
            let it = first_order_iterate(&a, dim(1), &NonlinearityTerm::power(2), t, r).unwrap();
            assert!(it.value.abs() < 1e-12 * it.scale, "{it:?}");
        }
    }

    #[test]
    fn cubic_iterate_approaches_prediction() {
        let a = GeneratingFunction::reference_asymmetric(1, 1.0);
        let i = crate::freewave::tail_integral(&a, 1, 3, 0).unwrap();
        let target = coeff_c(1, 3) * i;
        let t = 200.0;
        let it = first_order_iterate(&a, dim(1), &NonlinearityTerm::power(3), t, 2.0).unwrap();
        let ratio = it.value * t.powi(5) / target;
        assert!((ratio - 1.0).abs() < 0.01, "{ratio}");
    }

    #[test]
    fn swapped_and_unswapped_orders_agree() {
        let a = GeneratingFunction::reference_asymmetric(1, 1.0);
        let term = NonlinearityTerm::power(3);
        let (t, r) = (a.radius() + 4.0, 1.5);
        let x = first_order_iterate(&a, dim(1), &term, t, r).unwrap();
        let y = first_iterate_full(&a, dim(1), &term, t, r).unwrap();
        assert!(rel_diff(y.value, x.value) < 1e-9, "{x:?} {y:?}");
    }

    #[test]
    fn split_evaluation_matches_unswapped() {
        let a = GeneratingFunction::reference_asymmetric(1, 1.0);
        for (term, t, r) in [
            (NonlinearityTerm::power(2), 0.6, 0.9),
            (NonlinearityTerm::power(2), 3.0, 2.5),
            (NonlinearityTerm::derivative(1, 1, 1.0, -0.5), 2.0, 1.2),
            (NonlinearityTerm::power(3), 5.0, 1.0),
        ] {
            let x = first_iterate_full(&a, dim(1), &term, t, r).unwrap();
            let y = first_iterate_split(&a, dim(1), &term, t, r).unwrap();
            assert!((x.value - y.value).abs() < 1e-10 * x.scale, "{x:?} {y:?}");
        }
    }

    #[test]
    fn iterate_precondition() {
        let a = GeneratingFunction::reference_asymmetric(1, 1.0);
        let term = NonlinearityTerm::power(3);
        assert!(matches!(
            first_order_iterate(&a, dim(1), &term, 1.0, 0.5),
            Err(DuhamelError::BeforeTail { .. })
        ));
        assert!(first_order_iterate(&a, dim(1), &term, 10.0, 0.0).is_err());
    }

    #[test]
    fn null_check_rejects_narrow_span() {
        let a = GeneratingFunction::reference_asymmetric(1, 1.0);
        let r = phi1_null_expansion_check(&a, dim(1), 0.0, &[200.0, 220.0, 240.0]);
        assert!(matches!(r, Err(DuhamelError::IllConditioned { .. })));
        let r = phi1_null_expansion_check(&a, dim(1), 0.0, &[200.0, 400.0]);
        assert!(matches!(r, Err(DuhamelError::TooFewSamples { .. })));
    }

    #[test]
    fn null_coefficient_recovered_mid_support() {
        let a = GeneratingFunction::reference_asymmetric(1, 1.0);
        let c = phi1_null_expansion_check(&a, dim(1), -0.4, &[200.0, 400.0, 800.0]).unwrap();
        assert!(c.rel_err < 1e-4, "{c:?}");
    }

    #[test]
    fn null_check_below_support_is_zero() {
        let a = GeneratingFunction::reference_asymmetric(1, 1.0);
        let c = phi1_null_expansion_check(&a, dim(1), -2.0, &[200.0, 400.0, 800.0]).unwrap();
        assert_eq!(c.h, 0.0);
        assert!(c.extracted.abs() < 1e-12);
    }
}
