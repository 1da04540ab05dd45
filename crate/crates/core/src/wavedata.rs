//! Generating functions, dimension and nonlinearity descriptors, and the
//! initial data they induce.
//!
//! A generating function is a finite sum of polynomial bumps
//! `A (1 - ((x - x0)/w)^2)^m`, so every derivative is available in closed form.
//! The free wave built from it (see [`crate::freewave`]) fixes the initial
//! data `(f, g)` of the nonlinear problem.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolver::GridConfig;
use crate::freewave::{eval_phi0, eval_phi0_gradient, Part};
use crate::specialfn::falling_factorial;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaveDataError {
    #[error("dimension index l = {0} is not supported (need l >= 1, i.e. d = 2l + 3 >= 5)")]
    UnsupportedDimension(u32),
    #[error("generating function needs at least one bump")]
    EmptyProfile,
    #[error("bump {index}: half-width must be positive and finite, got {half_width}")]
    BadHalfWidth { index: usize, half_width: f64 },
    #[error("bump {index}: amplitude and center must be finite")]
    NonFiniteBump { index: usize },
    #[error("derivative order {k} exceeds what smoothness m = {m} provides (k <= m - 1)")]
    DerivativeTooHigh { k: u32, m: u32 },
    #[error("smoothness m = {m} is too low for l = {l}; need m >= l + 3")]
    InsufficientSmoothness { m: u32, l: u32 },
    #[error("nonlinearity term {index}: p + q = {sum} but p + q >= 2 is required")]
    TermOrderTooLow { index: usize, sum: u32 },
    #[error("nonlinearity term {index}: coefficients must be finite")]
    NonFiniteTerm { index: usize },
    #[error("no amplitudes (epsilons) given")]
    NoEpsilons,
    #[error("observer radius {0} must be positive and finite")]
    BadObserver(f64),
    #[error(
        "outer boundary r_out = {r_out} is not causally clean; need at least {required} \
         (max observer + t_max + support radius)"
    )]
    NotCausallyClean { r_out: f64, required: f64 },
}

/// Index `l >= 1` of the odd spatial dimension `d = 2l + 3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct DimensionIndex(u32);

impl DimensionIndex {
    pub fn new(l: u32) -> Result<Self, WaveDataError> {
        if l >= 1 {
            Ok(Self(l))
        } else {
            Err(WaveDataError::UnsupportedDimension(l))
        }
    }

    #[inline]
    pub fn l(self) -> u32 {
        self.0
    }

    pub fn spatial_dimension(self) -> u32 {
        2 * self.0 + 3
    }
}

impl TryFrom<u32> for DimensionIndex {
    type Error = WaveDataError;
    fn try_from(l: u32) -> Result<Self, Self::Error> {
        Self::new(l)
    }
}

impl From<DimensionIndex> for u32 {
    fn from(d: DimensionIndex) -> u32 {
        d.0
    }
}

/// One polynomial bump `A (1 - ((x - x0)/w)^2)^m` on `[x0 - w, x0 + w]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub amplitude: f64,
    pub center: f64,
    pub half_width: f64,
    pub smoothness: u32,
}

impl Bump {
    pub fn lo(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn hi(&self) -> f64 {
        self.center + self.half_width
    }

    /// `k`-th derivative of the polynomial piece, zero outside the support.
    ///
    /// Leibniz on `(1 - s)^m (1 + s)^m` keeps full relative accuracy near the
    /// support endpoints, where the expanded monomial form cancels badly.
    pub(crate) fn derivative(&self, k: u32, x: f64) -> f64 {
        let w = self.half_width;
        let s = (x - self.center) / w;
        if !(-1.0..=1.0).contains(&s) {
            return 0.0;
        }
        let m = self.smoothness;
        if k > 2 * m {
            return 0.0;
        }
        let one_minus = 1.0 - s;
        let one_plus = 1.0 + s;
        let mut binom = 1.0;
        let mut acc = 0.0;
        for i in 0..=k {
            let j = k - i;
            if i <= m && j <= m {
                let left = if i % 2 == 0 { 1.0 } else { -1.0 }
                    * falling_factorial(m as f64, i)
                    * one_minus.powi((m - i) as i32);
                let right = falling_factorial(m as f64, j) * one_plus.powi((m - j) as i32);
                acc += binom * left * right;
            }
            binom = binom * (k - i) as f64 / (i + 1) as f64;
        }
        self.amplitude * acc / w.powi(k as i32)
    }
}

/// Compactly supported profile `a(x)`, a sum of [`Bump`]s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Bump>", into = "Vec<Bump>")]
pub struct GeneratingFunction {
    bumps: Vec<Bump>,
}

impl TryFrom<Vec<Bump>> for GeneratingFunction {
    type Error = WaveDataError;
    fn try_from(bumps: Vec<Bump>) -> Result<Self, Self::Error> {
        Self::new(bumps)
    }
}

impl From<GeneratingFunction> for Vec<Bump> {
    fn from(g: GeneratingFunction) -> Self {
        g.bumps
    }
}

impl GeneratingFunction {
    pub fn new(bumps: Vec<Bump>) -> Result<Self, WaveDataError> {
        if bumps.is_empty() {
            return Err(WaveDataError::EmptyProfile);
        }
        for (index, b) in bumps.iter().enumerate() {
            if !(b.half_width > 0.0 && b.half_width.is_finite()) {
                return Err(WaveDataError::BadHalfWidth {
                    index,
                    half_width: b.half_width,
                });
            }
            if !(b.amplitude.is_finite() && b.center.is_finite()) {
                return Err(WaveDataError::NonFiniteBump { index });
            }
        }
        Ok(Self { bumps })
    }

    /// Single bump `A (1 - ((x - x0)/w)^2)^m`.
    pub fn single(amplitude: f64, center: f64, half_width: f64, smoothness: u32) -> Result<Self, WaveDataError> {
        Self::new(vec![Bump {
            amplitude,
            center,
            half_width,
            smoothness,
        }])
    }

    /// A wide bump with a narrow dip on its rising flank.
    ///
    /// Symmetric profiles make several tail integrals vanish by parity
    /// (e.g. `int (a^(l))^3`), which silently kills the leading tail. Placing
    /// the dip where the wide bump is steep makes the odd integrals large
    /// rather than leftovers of a small overlap, so the `O(1/t)` corrections
    /// stay small at moderate `t`. Smoothness `2l + 6` keeps the free wave
    /// several derivatives smooth at the origin.
    pub fn reference_asymmetric(l: u32, amplitude: f64) -> Self {
        let m = 2 * l + 6;
        Self {
            bumps: vec![
                Bump {
                    amplitude,
                    center: 0.0,
                    half_width: 1.0,
                    smoothness: m,
                },
                Bump {
                    amplitude: -0.6 * amplitude,
                    center: -0.3,
                    half_width: 0.35,
                    smoothness: m,
                },
            ],
        }
    }

    pub fn bumps(&self) -> &[Bump] {
        &self.bumps
    }

    pub fn min_smoothness(&self) -> u32 {
        self.bumps.iter().map(|b| b.smoothness).min().unwrap_or(0)
    }

    /// Convex hull `[lo, hi]` of the support.
    pub fn support(&self) -> (f64, f64) {
        let lo = self.bumps.iter().map(Bump::lo).fold(f64::INFINITY, f64::min);
        let hi = self.bumps.iter().map(Bump::hi).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// `R = sup |x|` over the support.
    pub fn radius(&self) -> f64 {
        let (lo, hi) = self.support();
        lo.abs().max(hi.abs())
    }

    /// Sorted, deduplicated support endpoints of all bumps.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self.bumps.iter().flat_map(|b| [b.lo(), b.hi()]).collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// `a^(k)(x)`; errors when `k` exceeds `min(m) - 1`.
    pub fn derivative(&self, k: u32, x: f64) -> Result<f64, WaveDataError> {
        let m = self.min_smoothness();
        if k + 1 > m {
            return Err(WaveDataError::DerivativeTooHigh { k, m });
        }
        Ok(self.derivative_unchecked(k, x))
    }

    /// Piecewise derivative with no smoothness check (exact inside each piece).
    pub(crate) fn derivative_unchecked(&self, k: u32, x: f64) -> f64 {
        self.bumps.iter().map(|b| b.derivative(k, x)).sum()
    }

    pub fn value(&self, x: f64) -> f64 {
        self.derivative_unchecked(0, x)
    }

    /// Profile multiplied by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            bumps: self
                .bumps
                .iter()
                .map(|b| Bump {
                    amplitude: b.amplitude * lambda,
                    ..*b
                })
                .collect(),
        }
    }

    /// Enforces `m >= l + 3` for evolution in dimension `d = 2l + 3`.
    pub fn check_dimension(&self, dim: DimensionIndex) -> Result<(), WaveDataError> {
        let m = self.min_smoothness();
        if m < dim.l() + 3 {
            return Err(WaveDataError::InsufficientSmoothness { m, l: dim.l() });
        }
        Ok(())
    }
}

/// Exact `a^(k)(x)`, see [`GeneratingFunction::derivative`].
pub fn bump_derivative(a: &GeneratingFunction, k: u32, x: f64) -> Result<f64, WaveDataError> {
    a.derivative(k, x)
}

/// One monomial `c phi^p (alpha phi_t + beta phi_r)^q` of the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearityTerm {
    #[serde(default = "one")]
    pub c: f64,
    pub p: u32,
    #[serde(default)]
    pub q: u32,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
}

fn one() -> f64 {
    1.0
}

impl NonlinearityTerm {
    /// Pure power `phi^p`.
    pub fn power(p: u32) -> Self {
        Self {
            c: 1.0,
            p,
            q: 0,
            alpha: 0.0,
            beta: 0.0,
        }
    }

    pub fn derivative(p: u32, q: u32, alpha: f64, beta: f64) -> Self {
        Self {
            c: 1.0,
            p,
            q,
            alpha,
            beta,
        }
    }

    pub fn with_coefficient(self, c: f64) -> Self {
        Self { c, ..self }
    }

    /// Total degree `p + q`; the first iterate appears at this power of epsilon.
    pub fn degree(&self) -> u32 {
        self.p + self.q
    }

    pub fn validate(&self, index: usize) -> Result<(), WaveDataError> {
        if self.p + self.q < 2 {
            return Err(WaveDataError::TermOrderTooLow {
                index,
                sum: self.p + self.q,
            });
        }
        if !(self.c.is_finite() && self.alpha.is_finite() && self.beta.is_finite()) {
            return Err(WaveDataError::NonFiniteTerm { index });
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, phi: f64, phi_t: f64, phi_r: f64) -> f64 {
        let mut v = self.c * phi.powi(self.p as i32);
        if self.q > 0 {
            v *= (self.alpha * phi_t + self.beta * phi_r).powi(self.q as i32);
        }
        v
    }
}

/// Everything needed to evolve and fit one problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub dimension: DimensionIndex,
    pub terms: Vec<NonlinearityTerm>,
    pub generating: GeneratingFunction,
    pub epsilons: Vec<f64>,
    pub grid: GridConfig,
    pub observers: Vec<f64>,
}

/// Amplitudes above this are flagged as outside the perturbative regime.
pub const LARGE_EPSILON: f64 = 0.3;

impl SimulationConfig {
    /// Checks all invariants; returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>, WaveDataError> {
        self.generating.check_dimension(self.dimension)?;
        for (i, t) in self.terms.iter().enumerate() {
            t.validate(i)?;
        }
        if self.epsilons.is_empty() {
            return Err(WaveDataError::NoEpsilons);
        }
        for &r in &self.observers {
            if !(r > 0.0 && r.is_finite()) {
                return Err(WaveDataError::BadObserver(r));
            }
        }
        let required = self.required_r_out();
        if self.grid.r_out < required {
            return Err(WaveDataError::NotCausallyClean {
                r_out: self.grid.r_out,
                required,
            });
        }
        let mut warnings = Vec::new();
        for &e in &self.epsilons {
            if e.abs() > LARGE_EPSILON {
                warnings.push(format!(
                    "epsilon = {e} exceeds {LARGE_EPSILON}; the small-amplitude expansion may not apply"
                ));
            }
        }
        Ok(warnings)
    }

    /// Hex SHA-256 of the canonical JSON encoding. Independent of how the
    /// config was written on disk.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Smallest outer radius that keeps the boundary out of every observer's past.
    pub fn required_r_out(&self) -> f64 {
        let max_obs = self.observers.iter().copied().fold(0.0, f64::max);
        max_obs + self.grid.t_max + self.generating.radius()
    }
}

/// Initial data `(f, g) = (phi0(0, r), d_t phi0(0, r))` of the free wave
/// generated by `a`. Regular at `r = 0`, where the value is the exact limit.
pub fn initial_data(a: &GeneratingFunction, dim: DimensionIndex, r: f64) -> (f64, f64) {
    let f = eval_phi0(a, dim, 0.0, r, Part::Both);
    let (g, _) = eval_phi0_gradient(a, dim, 0.0, r);
    (f, g)
}
