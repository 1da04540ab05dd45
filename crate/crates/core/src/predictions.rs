//! Closed-form leading tails `phi(t, r) ~ eps^k A t^-gamma` at fixed `r`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::freewave::{tail_integral_detail, FreeWaveError, TailIntegral};
use crate::specialfn::{double_factorial, factorial, falling_factorial};
use crate::wavedata::{DimensionIndex, GeneratingFunction, NonlinearityTerm, WaveDataError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictionError {
    #[error(transparent)]
    Term(#[from] WaveDataError),
    #[error(transparent)]
    Integral(#[from] FreeWaveError),
}

/// Which closed form produced a term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseLabel {
    Generic,
    P2SecondOrder,
    Q1,
    Q1P1Beta0SecondOrder,
    Q2p0First,
    Q2p0Second,
    AlphaEqBeta,
}

impl CaseLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseLabel::Generic => "generic",
            CaseLabel::P2SecondOrder => "p2-second-order",
            CaseLabel::Q1 => "q1",
            CaseLabel::Q1P1Beta0SecondOrder => "q1-p1-beta0-second-order",
            CaseLabel::Q2p0First => "q2p0-first",
            CaseLabel::Q2p0Second => "q2p0-second",
            CaseLabel::AlphaEqBeta => "alpha-eq-beta",
        }
    }

    /// Second-order terms come from the iterate sourced by the first one.
    pub fn is_second_order(self) -> bool {
        matches!(
            self,
            CaseLabel::P2SecondOrder | CaseLabel::Q1P1Beta0SecondOrder | CaseLabel::Q2p0Second
        )
    }
}

impl std::fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One predicted contribution `eps^eps_order * amplitude * t^-gamma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailTerm {
    pub case_label: CaseLabel,
    pub eps_order: u32,
    pub gamma: u32,
    /// Coefficient times data integral (times `c` or `c^2`).
    pub amplitude: f64,
    /// Data-independent prefactor.
    pub coefficient: f64,
    #[serde(rename = "I_value")]
    pub i_value: f64,
    /// Which integral `I_n(p, q)` was used, as `(n, p, q)`.
    pub integral: (u32, u32, u32),
    /// The integral cancels to rounding level.
    pub degenerate: bool,
}

impl TailTerm {
    /// `eps^k A t^-gamma`.
    pub fn evaluate(&self, eps: f64, t: f64) -> f64 {
        eps.powi(self.eps_order as i32) * self.amplitude * t.powi(-(self.gamma as i32))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TailPrediction {
    pub terms: Vec<TailTerm>,
    pub warnings: Vec<String>,
}

impl TailPrediction {
    /// The term with the largest `eps^k |A| t^-gamma` at `(eps, t)`.
    pub fn dominant_at(&self, eps: f64, t: f64) -> Option<&TailTerm> {
        self.terms
            .iter()
            .filter(|term| !term.degenerate && term.amplitude != 0.0)
            .max_by(|x, y| {
                x.evaluate(eps, t)
                    .abs()
                    .total_cmp(&y.evaluate(eps, t).abs())
            })
    }

    /// Sum of all terms.
    pub fn evaluate(&self, eps: f64, t: f64) -> f64 {
        self.terms.iter().map(|term| term.evaluate(eps, t)).sum()
    }

    pub fn is_degenerate(&self) -> bool {
        !self.terms.is_empty() && self.terms.iter().all(|t| t.degenerate || t.amplitude == 0.0)
    }

    /// No usable term, and at least one because its integral cancels.
    pub fn has_degenerate_integral(&self) -> bool {
        self.dominant_at(1.0, 1.0).is_none() && self.terms.iter().any(|t| t.degenerate)
    }

    /// Largest predicted decay exponent, if any term exists.
    pub fn max_gamma(&self) -> Option<u32> {
        self.terms.iter().map(|t| t.gamma).max()
    }
}

/// Prediction for a sum of monomials.
///
/// First-order tails are linear in the source and add. Second-order tails of
/// different monomials interact through cross terms that no closed form here
/// covers, so they are kept only when a single monomial produces one.
pub fn predict_config(
    dim: DimensionIndex,
    terms: &[NonlinearityTerm],
    a: &GeneratingFunction,
) -> Result<TailPrediction, PredictionError> {
    let mut per_term = Vec::with_capacity(terms.len());
    for (i, t) in terms.iter().enumerate() {
        t.validate(i)?;
        per_term.push(predict_tail(dim, t, a)?);
    }
    if per_term.len() == 1 {
        return Ok(per_term.pop().expect("one prediction"));
    }
    let second_order_sources = per_term
        .iter()
        .filter(|p| p.terms.iter().any(|t| t.case_label.is_second_order()))
        .count();
    let mut out = TailPrediction::default();
    for p in per_term {
        out.warnings.extend(p.warnings);
        for t in p.terms {
            if t.case_label.is_second_order() && second_order_sources > 1 {
                continue;
            }
            match out
                .terms
                .iter_mut()
                .find(|u| u.eps_order == t.eps_order && u.gamma == t.gamma && !t.case_label.is_second_order())
            {
                Some(u) => {
                    u.amplitude += t.amplitude;
                    u.degenerate &= t.degenerate;
                }
                None => out.terms.push(t),
            }
        }
    }
    if second_order_sources > 1 {
        out.warnings.push(
            "several monomials have second-order tails; their cross terms are not predicted".into(),
        );
    }
    out.terms.sort_by_key(|t| t.eps_order);
    Ok(out)
}

fn sign(n: u32) -> f64 {
    if n.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `C(l, p) = (-1)^l 2^((l+1)(p-1)-1) / (2l+1)!! * [(l+1)(p-1)-2]^(falling l)`.
pub fn coeff_c(l: u32, p: u32) -> f64 {
    let k = (l + 1) as i32 * (p as i32 - 1);
    sign(l) * 2f64.powi(k - 1) / double_factorial(2 * l + 1) * falling_factorial((k - 2) as f64, l)
}

/// First-order coefficient for `q = 1`.
pub fn coeff_d(l: u32, p: u32, alpha: f64, beta: f64) -> f64 {
    let lp = (l + 1) as f64;
    let p_f = p as f64;
    let base = (l + 1) * p;
    let bracket = (beta - alpha) * (p_f - 1.0) / (p_f + 1.0) * (lp * (p_f + 1.0) - 1.0)
        / (lp * p_f - 1.0)
        - 2.0 * beta;
    sign(l) * 2f64.powi(base as i32 - 1) / double_factorial(2 * l + 1)
        * lp
        * falling_factorial(base as f64 - 1.0, l)
        * bracket
}

/// First-order coefficient for `alpha = beta`.
pub fn coeff_e(l: u32, p: u32, q: u32, alpha: f64) -> f64 {
    let n = (l + 1) * (p + q - 1);
    sign(l + q) * alpha.powi(q as i32) * 2f64.powi((n + q) as i32 - 1)
        / double_factorial(2 * l + 1)
        * ((l + 1) as f64).powi(q as i32)
        * falling_factorial((n + q) as f64 - 2.0, l)
}

/// Second-order coefficient for `phi^2`.
pub fn coeff_p2_second_order(l: u32) -> f64 {
    let l_f = l as f64;
    sign(l) * 2f64.powi(3 * l as i32) / (2.0 * l_f * (2.0 * l_f + 1.0))
}

/// Second-order coefficient for `phi phi_t` (`q = 1`, `p = 1`, `beta = 0`).
pub fn coeff_q1p1_second_order(l: u32, alpha: f64) -> f64 {
    let l_f = l as f64;
    sign(l) * alpha * alpha * 2f64.powi(3 * l as i32 - 2) * (3.0 * l_f + 1.0)
        / (2.0 * l_f * (2.0 * l_f + 1.0))
}

/// First-order coefficient for `(alpha phi_t + beta phi_r)^2`.
pub fn coeff_q2p0_first(l: u32, alpha: f64, beta: f64) -> f64 {
    sign(l) * alpha * beta * 2f64.powi(l as i32 + 2) * factorial(l) / double_factorial(2 * l + 1)
        * ((l + 1) as f64).powi(3)
}

/// Second-order coefficient for `(alpha phi_t + beta phi_r)^2`.
pub fn coeff_q2p0_second(l: u32, alpha: f64, beta: f64) -> f64 {
    sign(l + 1) * (alpha - beta).powi(4) * coeff_p2_second_order(l).abs()
}

struct Builder<'a> {
    a: &'a GeneratingFunction,
    c: f64,
    out: TailPrediction,
}

impl Builder<'_> {
    fn push(
        &mut self,
        case_label: CaseLabel,
        eps_order: u32,
        gamma: u32,
        coefficient: f64,
        integral: (u32, u32, u32),
    ) -> Result<(), PredictionError> {
        let (n, p, q) = integral;
        let TailIntegral { value, abs_value } = tail_integral_detail(self.a, n, p, q)?;
        let degenerate = TailIntegral { value, abs_value }.is_degenerate();
        if degenerate {
            self.out.warnings.push(format!(
                "{case_label}: I_{n}({p},{q}) = {value:e} vanishes to rounding (profile parity?); \
                 the tail is below this order"
            ));
        }
        let c_factor = if case_label.is_second_order() {
            self.c * self.c
        } else {
            self.c
        };
        self.out.terms.push(TailTerm {
            case_label,
            eps_order,
            gamma,
            amplitude: c_factor * coefficient * value,
            coefficient,
            i_value: value,
            integral,
            degenerate,
        });
        Ok(())
    }
}

/// All implemented tail terms for a single monomial right-hand side.
pub fn predict_tail(
    dim: DimensionIndex,
    term: &NonlinearityTerm,
    a: &GeneratingFunction,
) -> Result<TailPrediction, PredictionError> {
    // Only the derivatives entering the integrals are required here; the
    // stricter smoothness bound is a solver concern.
    term.validate(0)?;
    let l = dim.l();
    let NonlinearityTerm {
        c,
        p,
        q,
        alpha,
        beta,
    } = *term;
    let mut b = Builder {
        a,
        c,
        out: TailPrediction::default(),
    };
    let k = p + q;
    let lp = l + 1;
    if q >= 1 && alpha == 0.0 && beta == 0.0 {
        b.out
            .warnings
            .push("alpha = beta = 0: the nonlinearity vanishes identically".into());
        return Ok(b.out);
    }
    if c == 0.0 {
        b.out.warnings.push("c = 0: the nonlinearity vanishes identically".into());
        return Ok(b.out);
    }
    match (p, q) {
        (2, 0) => b.push(CaseLabel::P2SecondOrder, 3, 3 * l + 1, coeff_p2_second_order(l), (l - 1, 1, 2))?,
        (1, 1) if beta == 0.0 => b.push(
            CaseLabel::Q1P1Beta0SecondOrder,
            3,
            3 * l + 2,
            coeff_q1p1_second_order(l, alpha),
            (l, 3, 0),
        )?,
        (_, 1) => b.push(CaseLabel::Q1, p + 1, lp * (p + 1), coeff_d(l, p, alpha, beta), (l, p + 1, 0))?,
        (0, 2) => {
            if alpha * beta == 0.0 {
                b.out
                    .warnings
                    .push("alpha * beta = 0: no first-order tail".into());
            }
            b.push(CaseLabel::Q2p0First, 2, 2 * l + 3, coeff_q2p0_first(l, alpha, beta), (l, 2, 0))?;
            b.push(
                CaseLabel::Q2p0Second,
                3,
                3 * l + 1,
                coeff_q2p0_second(l, alpha, beta),
                (l, 0, 3),
            )?;
        }
        (_, q) if q >= 1 && alpha == beta => {
            b.push(CaseLabel::AlphaEqBeta, k, lp * k + q - 1, coeff_e(l, p, q, alpha), (l, k, 0))?
        }
        _ => b.push(
            CaseLabel::Generic,
            k,
            lp * k - 1,
            (alpha - beta).powi(q as i32) * coeff_c(l, k),
            (l, p, q),
        )?,
    }
    b.out.terms.sort_by_key(|t| t.eps_order);
    Ok(b.out)
}
