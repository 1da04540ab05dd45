//! Gauss–Legendre rules and a panel-adaptive integrator built on them.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

use super::legendre_with_derivative;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("adaptive quadrature did not converge on [{lo}, {hi}] within the depth limit")]
    NonConvergence { lo: f64, hi: f64 },
    #[error("integrand returned a non-finite value at x = {x}")]
    NonFinite { x: f64 },
}

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Nodes by Newton iteration on `P_n` from Chebyshev-like initial guesses.
    pub fn gauss_legendre(n: usize) -> Self {
        assert!(n > 0, "a quadrature rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let half = n.div_ceil(2);
        for i in 0..half {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d.is_finite() {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Applies the rule on `[lo, hi]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, lo: f64, hi: f64, mut f: F) -> f64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let mut s = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(mid + half * x);
        }
        s * half
    }
}

/// Shared, lazily built rule with `n` nodes.
pub fn gauss_rule(n: usize) -> Arc<QuadratureRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<QuadratureRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| Arc::new(QuadratureRule::gauss_legendre(n)))
        .clone()
}

#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    /// Target error relative to the integral of `|f|`.
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Gauss nodes per panel.
    pub nodes: usize,
    pub max_depth: u32,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-11,
            abs_tol: 0.0,
            nodes: 16,
            max_depth: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    /// Integral of `|f|`, the natural scale for cancellation checks.
    pub abs_value: f64,
    pub evaluations: usize,
}

struct PanelSum {
    value: f64,
    abs_value: f64,
}

struct Adaptive<'a, F> {
    f: F,
    rule: &'a QuadratureRule,
    evaluations: usize,
}

impl<F, E> Adaptive<'_, F>
where
    F: FnMut(f64) -> Result<f64, E>,
    E: From<QuadratureError>,
{
    fn panel(&mut self, lo: f64, hi: f64) -> Result<PanelSum, E> {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let mut s = 0.0;
        let mut a = 0.0;
        for (&x, &w) in self.rule.nodes.iter().zip(&self.rule.weights) {
            let at = mid + half * x;
            let v = (self.f)(at)?;
            if !v.is_finite() {
                return Err(QuadratureError::NonFinite { x: at }.into());
            }
            s += w * v;
            a += w * v.abs();
        }
        self.evaluations += self.rule.nodes.len();
        Ok(PanelSum {
            value: s * half,
            abs_value: a * half.abs(),
        })
    }

    fn refine(
        &mut self,
        lo: f64,
        hi: f64,
        whole: PanelSum,
        tol_density: f64,
        abs_floor: f64,
        depth: u32,
        max_depth: u32,
    ) -> Result<PanelSum, E> {
        let mid = 0.5 * (lo + hi);
        let left = self.panel(lo, mid)?;
        let right = self.panel(mid, hi)?;
        let split = PanelSum {
            value: left.value + right.value,
            abs_value: left.abs_value + right.abs_value,
        };
        let tol = (tol_density * (hi - lo)).max(abs_floor);
        if (split.value - whole.value).abs() <= tol {
            return Ok(split);
        }
        if depth >= max_depth {
            return Err(QuadratureError::NonConvergence { lo, hi }.into());
        }
        let l = self.refine(lo, mid, left, tol_density, abs_floor, depth + 1, max_depth)?;
        let r = self.refine(mid, hi, right, tol_density, abs_floor, depth + 1, max_depth)?;
        Ok(PanelSum {
            value: l.value + r.value,
            abs_value: l.abs_value + r.abs_value,
        })
    }
}

/// Adaptive integration of a fallible integrand over consecutive panels
/// delimited by `breakpoints` (sorted ascending, at least two entries).
///
/// Each panel is bisected until the Gauss estimate and the sum over its two
/// halves agree to a tolerance proportional to the panel length, scaled by a
/// first-pass estimate of the integral of `|f|`. Subdivision order is fixed,
/// so results are bitwise reproducible.
pub fn try_integrate<F, E>(f: F, breakpoints: &[f64], opts: AdaptiveOptions) -> Result<Integral, E>
where
    F: FnMut(f64) -> Result<f64, E>,
    E: From<QuadratureError>,
{
    let rule = gauss_rule(opts.nodes);
    let mut ad = Adaptive {
        f,
        rule: &rule,
        evaluations: 0,
    };
    let panels: Vec<(f64, f64)> = breakpoints
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| (w[0], w[1]))
        .collect();
    if panels.is_empty() {
        return Ok(Integral {
            value: 0.0,
            abs_value: 0.0,
            evaluations: 0,
        });
    }
    let mut first = Vec::with_capacity(panels.len());
    let mut scale = 0.0;
    for &(lo, hi) in &panels {
        let p = ad.panel(lo, hi)?;
        scale += p.abs_value;
        first.push(p);
    }
    let length: f64 = panels.iter().map(|(lo, hi)| hi - lo).sum();
    let tol_density = opts.rel_tol * scale / length;
    // Below this the integrand is rounding noise relative to its own scale.
    let abs_floor = opts.abs_tol.max(1e-15 * scale / panels.len() as f64);
    let mut value = 0.0;
    let mut abs_value = 0.0;
    for ((lo, hi), whole) in panels.into_iter().zip(first) {
        let s = ad.refine(lo, hi, whole, tol_density, abs_floor, 0, opts.max_depth)?;
        value += s.value;
        abs_value += s.abs_value;
    }
    Ok(Integral {
        value,
        abs_value,
        evaluations: ad.evaluations,
    })
}

/// Infallible-integrand convenience wrapper around [`try_integrate`].
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    breakpoints: &[f64],
    opts: AdaptiveOptions,
) -> Result<Integral, QuadratureError> {
    try_integrate(|x| Ok::<f64, QuadratureError>(f(x)), breakpoints, opts)
}
