//! Exact combinatorial and special-function primitives.
//!
//! Everything here is pure and allocation-light; the Legendre and
//! hypergeometric evaluations are the building blocks of the Duhamel kernel
//! identity, and the Gauss rules back every integral in the crate.

mod quadrature;

pub use quadrature::{
    gauss_rule, integrate, try_integrate, AdaptiveOptions, Integral, QuadratureError,
    QuadratureRule,
};

use thiserror::Error;

/// Overshoot of |μ| beyond 1 that is attributed to rounding and clamped.
pub const MU_CLAMP_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecialFnError {
    #[error("Legendre argument {0} lies outside [-1, 1] beyond rounding tolerance")]
    MuOutOfRange(f64),
    #[error("hypergeometric series with a = {a}, b = {b} does not terminate")]
    NonTerminating { a: f64, b: f64 },
    #[error("lower parameter c = {c} hits a pole before the series terminates")]
    LowerParameterPole { c: f64 },
}

/// Falling factorial `x (x-1) ... (x-k+1)`, equal to 1 for `k = 0`.
pub fn falling_factorial(x: f64, k: u32) -> f64 {
    (0..k).map(|i| x - i as f64).product()
}

/// `(2l+1)!! = 1 * 3 * ... * (2l+1)`.
pub fn double_factorial_odd(l: u32) -> u128 {
    (0..=l).map(|i| 2 * i as u128 + 1).product()
}

/// Double factorial of an arbitrary nonnegative integer, as a float.
pub(crate) fn double_factorial(n: u32) -> f64 {
    let mut acc = 1.0;
    let mut k = n;
    while k > 1 {
        acc *= k as f64;
        k -= 2;
    }
    acc
}

pub(crate) fn factorial(n: u32) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Legendre polynomial `P_l(mu)` by the three-term recurrence.
///
/// Arguments that overshoot `[-1, 1]` by at most [`MU_CLAMP_TOL`] are
/// clamped; anything further out is a bug in the caller's `mu` formula.
pub fn legendre(l: usize, mu: f64) -> Result<f64, SpecialFnError> {
    if !(mu.abs() <= 1.0 + MU_CLAMP_TOL) {
        return Err(SpecialFnError::MuOutOfRange(mu));
    }
    Ok(legendre_unchecked(l, mu.clamp(-1.0, 1.0)))
}

/// Recurrence without the domain check, for kernels that guarantee the range.
pub(crate) fn legendre_unchecked(l: usize, x: f64) -> f64 {
    match l {
        0 => 1.0,
        1 => x,
        _ => {
            let mut p_prev = 1.0;
            let mut p_curr = x;
            for k in 1..l {
                let p_next =
                    ((2 * k + 1) as f64 * x * p_curr - k as f64 * p_prev) / (k + 1) as f64;
                p_prev = p_curr;
                p_curr = p_next;
            }
            p_curr
        }
    }
}

/// `P_n(x)` and `P_n'(x)` together, used by the Newton iteration for Gauss nodes.
pub(crate) fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p_prev = 1.0;
    let mut p_curr = x;
    for k in 1..n {
        let p_next = ((2 * k + 1) as f64 * x * p_curr - k as f64 * p_prev) / (k + 1) as f64;
        p_prev = p_curr;
        p_curr = p_next;
    }
    let dp = n as f64 * (x * p_curr - p_prev) / (x * x - 1.0);
    (p_curr, dp)
}

/// Coefficients `c_l` of `mu^k = sum_l c_l P_l(mu)`, for `l = k, k-2, ...`.
///
/// Uses `(2l+1) k! / (2^((k-l)/2) ((k-l)/2)! (k+l+1)!!)`. The denominator is a
/// *double* factorial; the single-factorial variant does not reproduce `mu^k`.
pub fn legendre_power_expansion(k: u32) -> Vec<(u32, f64)> {
    let mut out = Vec::with_capacity(k as usize / 2 + 1);
    let mut l = k as i64;
    while l >= 0 {
        let lu = l as u32;
        let half = (k - lu) / 2;
        let c = (2 * lu + 1) as f64 * factorial(k)
            / (2f64.powi(half as i32) * factorial(half) * double_factorial(k + lu + 1));
        out.push((lu, c));
        l -= 2;
    }
    out
}

fn nonpositive_integer(x: f64) -> Option<u64> {
    if x <= 0.0 && (x - x.round()).abs() < 1e-12 {
        Some((-x.round()) as u64)
    } else {
        None
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Terminating Gauss hypergeometric series `2F1(a, b; c; z)`.
///
/// One of `a`, `b` must be a nonpositive integer; the finite sum is then
/// evaluated term by term with compensated accumulation.
pub fn hyp2f1_terminating(a: f64, b: f64, c: f64, z: f64) -> Result<f64, SpecialFnError> {
    let n_terms = match (nonpositive_integer(a), nonpositive_integer(b)) {
        (Some(na), Some(nb)) => na.min(nb),
        (Some(na), None) => na,
        (None, Some(nb)) => nb,
        (None, None) => return Err(SpecialFnError::NonTerminating { a, b }),
    };
    let mut acc = CompensatedSum::default();
    let mut term = 1.0;
    acc.add(term);
    for k in 0..n_terms {
        let kf = k as f64;
        if (c + kf) == 0.0 {
            return Err(SpecialFnError::LowerParameterPole { c });
        }
        term *= (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * z;
        acc.add(term);
    }
    Ok(acc.value())
}
