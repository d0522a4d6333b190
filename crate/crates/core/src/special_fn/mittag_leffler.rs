use std::f64::consts::PI;

use serde::Serialize;

use super::{gamma_fn, ln_gamma, sin_pi, CompensatedSum, MLParams};
use crate::adaptive::{integrate, Tolerance};
use crate::error::{Error, Result};

/// Supported real arguments. Beyond the lower end `E_{α,β}` is dominated by
/// its algebraic tail and the propagators never need it.
pub const ML_Z_MIN: f64 = -1.0e6;
pub const ML_Z_MAX: f64 = 50.0;

const TAYLOR_RADIUS: f64 = 1.0;
const MAX_TERMS: usize = 20_000;
const EXP_LIMIT: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MlStrategy {
    Exponential,
    Taylor,
    IntegralRepresentation,
    BetaIntegral,
}

#[derive(Debug, Clone, Serialize)]
pub struct MlEvaluation {
    pub value: f64,
    pub strategy: MlStrategy,
    /// Series terms, or quadrature intervals for the integral routes.
    pub terms: usize,
    /// Number of applications of the β-recurrence.
    pub reductions: usize,
    pub error_estimate: f64,
}

pub fn mittag_leffler(params: MLParams, z: f64) -> Result<f64> {
    mittag_leffler_eval(params, z).map(|e| e.value)
}

/// Evaluates `E_{α,β}(z)` on the real line and reports how it was done.
pub fn mittag_leffler_eval(params: MLParams, z: f64) -> Result<MlEvaluation> {
    let MLParams { alpha, beta } = MLParams::new(params.alpha, params.beta)?;
    if !(ML_Z_MIN..=ML_Z_MAX).contains(&z) {
        return Err(Error::Domain(format!(
            "Mittag-Leffler argument {z} outside [{ML_Z_MIN}, {ML_Z_MAX}]"
        )));
    }
    if alpha == 1.0 && beta == 1.0 {
        return Ok(MlEvaluation {
            value: z.exp(),
            strategy: MlStrategy::Exponential,
            terms: 1,
            reductions: 0,
            error_estimate: 0.0,
        });
    }
    if z >= -TAYLOR_RADIUS {
        return taylor(alpha, beta, z);
    }
    if alpha < 1.0 {
        negative_fractional(alpha, beta, z)
    } else if alpha == 1.0 {
        negative_alpha_one(beta, z)
    } else {
        taylor(alpha, beta, z)
    }
}

fn taylor(alpha: f64, beta: f64, z: f64) -> Result<MlEvaluation> {
    if z > 0.0 && z.powf(1.0 / alpha) > EXP_LIMIT {
        return Err(Error::Overflow {
            what: "Mittag-Leffler",
            at: z,
        });
    }
    if z == 0.0 {
        return Ok(MlEvaluation {
            value: 1.0 / gamma_fn(beta)?,
            strategy: MlStrategy::Taylor,
            terms: 1,
            reductions: 0,
            error_estimate: 0.0,
        });
    }
    let ln_z = z.abs().ln();
    let mut sum = CompensatedSum::default();
    let mut prev = f64::INFINITY;
    let mut max_term: f64 = 0.0;
    for k in 0..MAX_TERMS {
        let arg = alpha * k as f64 + beta;
        let kf = k as f64;
        let magnitude = if arg < 170.0 && kf * ln_z < EXP_LIMIT {
            z.abs().powi(k as i32) / gamma_fn(arg)?
        } else {
            (kf * ln_z - ln_gamma(arg)?).exp()
        };
        let term = if z < 0.0 && k % 2 == 1 {
            -magnitude
        } else {
            magnitude
        };
        sum.add(term);
        max_term = max_term.max(magnitude);
        let total = sum.value().abs();
        if magnitude < prev && magnitude <= 1e-17 * total.max(1e-300) {
            let error_estimate = 4.0 * f64::EPSILON * max_term * (k as f64 + 1.0).sqrt();
            if z < 0.0 && error_estimate > 1e-11 && error_estimate > 1e-9 * total {
                return Err(Error::NonConvergence {
                    what: "Mittag-Leffler series",
                    detail: format!(
                        "cancellation: largest term {max_term:e}, sum {:e} at z = {z}",
                        sum.value()
                    ),
                });
            }
            return Ok(MlEvaluation {
                value: sum.value(),
                strategy: MlStrategy::Taylor,
                terms: k + 1,
                reductions: 0,
                error_estimate,
            });
        }
        prev = magnitude;
    }
    Err(Error::NonConvergence {
        what: "Mittag-Leffler series",
        detail: format!("no convergence in {MAX_TERMS} terms at z = {z}"),
    })
}

/// `0 < α < 1`, `z < -1`: real integral representation after reducing β
/// below `1 + α`.
fn negative_fractional(alpha: f64, beta: f64, z: f64) -> Result<MlEvaluation> {
    // E_{α,β}(z) = (E_{α,β-α}(z) - 1/Γ(β-α)) / z, applied until β < 1+α
    let mut reductions = 0;
    let mut b = beta;
    while b >= 1.0 + alpha {
        b -= alpha;
        reductions += 1;
    }
    let mut eval = integral_representation(alpha, b, z)?;
    for _ in 0..reductions {
        eval.value = (eval.value - 1.0 / gamma_fn(b)?) / z;
        eval.error_estimate /= z.abs();
        b += alpha;
    }
    eval.reductions = reductions;
    Ok(eval)
}

fn integral_representation(alpha: f64, beta: f64, z: f64) -> Result<MlEvaluation> {
    // E = ∫_0^∞ K(χ) dχ with
    // K = χ^{(1-β)/α} e^{-χ^{1/α}} (χ sin πβ - z sin π(β-α)) / (απ (χ² - 2χz cos απ + z²)).
    // The substitution χ = w^k, k = α/(1+α-β), absorbs the χ^{(1-β)/α} factor.
    let k = alpha / (1.0 + alpha - beta);
    let s_beta = sin_pi(beta);
    let s_beta_alpha = sin_pi(beta - alpha);
    let c_alpha = (PI * alpha).cos();
    let prefactor = k / (alpha * PI);
    let chi_max = 60f64.powf(alpha);
    let w_of = |chi: f64| chi.powf(1.0 / k);
    let integrand = |w: f64| {
        let chi = w.powf(k);
        let decay = (-chi.powf(1.0 / alpha)).exp();
        let num = chi * s_beta - z * s_beta_alpha;
        let den = chi * chi - 2.0 * chi * z * c_alpha + z * z;
        prefactor * decay * num / den
    };

    let mut breaks: Vec<f64> = [1.0f64, 5.0, 15.0, 30.0]
        .iter()
        .map(|c| c.powf(alpha))
        .collect();
    breaks.push(1.0);
    if c_alpha < 0.0 {
        // near-resonance of the denominator at χ0 = |z||cos απ|
        let chi0 = z.abs() * c_alpha.abs();
        let width = z.abs() * (PI * alpha).sin();
        for m in [0.0, 1.0, 10.0, 100.0] {
            breaks.push(chi0 - m * width);
            breaks.push(chi0 + m * width);
        }
    }
    let breaks: Vec<f64> = breaks
        .into_iter()
        .filter(|&c| c > 0.0 && c < chi_max)
        .map(w_of)
        .collect();

    let est = integrate(
        integrand,
        0.0,
        w_of(chi_max),
        &breaks,
        Tolerance::new(1e-16, 1e-13),
    )?;
    Ok(MlEvaluation {
        value: est.value,
        strategy: MlStrategy::IntegralRepresentation,
        terms: est.intervals,
        reductions: 0,
        error_estimate: est.error,
    })
}

/// `α = 1`, `z < -1`.
fn negative_alpha_one(beta: f64, z: f64) -> Result<MlEvaluation> {
    if beta == 1.0 {
        return Ok(MlEvaluation {
            value: z.exp(),
            strategy: MlStrategy::Exponential,
            terms: 1,
            reductions: 0,
            error_estimate: 0.0,
        });
    }
    if beta < 1.0 {
        // E_{1,β}(z) = z E_{1,β+1}(z) + 1/Γ(β)
        let mut up = negative_alpha_one(beta + 1.0, z)?;
        up.value = z * up.value + 1.0 / gamma_fn(beta)?;
        up.error_estimate *= z.abs();
        up.reductions += 1;
        return Ok(up);
    }
    // E_{1,β}(-x) = (1/Γ(β-1)) ∫_0^1 (1-s)^{β-2} e^{-xs} ds; with v = (1-s)^{β-1}
    // this becomes (1/Γ(β)) ∫_0^1 exp(-x (1 - v^{1/(β-1)})) dv.
    let x = -z;
    let p = 1.0 / (beta - 1.0);
    let integrand = |v: f64| {
        let one_minus = -(p * v.ln()).exp_m1();
        (-x * one_minus).exp()
    };
    let breaks: Vec<f64> = [1.0, 5.0, 20.0, 50.0]
        .iter()
        .filter(|&&c| c < x)
        .map(|&c| (1.0 - c / x).powf(beta - 1.0))
        .collect();
    let est = integrate(integrand, 0.0, 1.0, &breaks, Tolerance::new(1e-17, 1e-13))?;
    let g = gamma_fn(beta)?;
    Ok(MlEvaluation {
        value: est.value / g,
        strategy: MlStrategy::BetaIntegral,
        terms: est.intervals,
        reductions: 0,
        error_estimate: est.error / g,
    })
}
