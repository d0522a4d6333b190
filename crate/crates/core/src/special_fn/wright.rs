use std::cell::RefCell;
use std::f64::consts::PI;

use serde::Serialize;

use super::{gamma_fn, ln_gamma, sin_pi, CompensatedSum, FractionalOrder};
use crate::adaptive::{integrate, Tolerance};
use crate::error::{Error, Result};

/// Upper limit used when integrating against the density. For α ≤ 0.9 the
/// mass beyond θ = 40 is far below 1e-15.
pub const DEFAULT_TAIL_CUTOFF: f64 = 40.0;

const SERIES_MAX_TERMS: usize = 5_000;
const SERIES_REL_ERROR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityStrategy {
    Series,
    StableIntegral,
}

pub fn wright_density(order: FractionalOrder, theta: f64) -> Result<f64> {
    wright_density_eval(order, theta).map(|(v, _)| v)
}

/// Density `ζ_α(θ)` on `θ ≥ 0` of the one-sided law whose Laplace transform
/// is `E_α(-z)`.
pub fn wright_density_eval(order: FractionalOrder, theta: f64) -> Result<(f64, DensityStrategy)> {
    let alpha = order.alpha();
    if alpha == 1.0 {
        return Err(Error::Domain(
            "density degenerates to a point mass at θ = 1 for α = 1".into(),
        ));
    }
    if !(theta >= 0.0) || !theta.is_finite() {
        return Err(Error::Domain(format!("density argument must be ≥ 0, got {theta}")));
    }
    if theta == 0.0 {
        return Ok((1.0 / gamma_fn(1.0 - alpha)?, DensityStrategy::Series));
    }
    if let Some(v) = series(alpha, theta)? {
        return Ok((v, DensityStrategy::Series));
    }
    Ok((stable_integral(alpha, theta)?, DensityStrategy::StableIntegral))
}

/// Σ_{n≥1} (-1)^{n-1} θ^{n-1} Γ(nα+1) sin(nπα) / (απ n!), or `None` when
/// cancellation makes it untrustworthy.
fn series(alpha: f64, theta: f64) -> Result<Option<f64>> {
    let ln_theta = theta.ln();
    let ln_scale = (alpha * PI).ln();
    let mut sum = CompensatedSum::default();
    let mut prev_envelope = f64::INFINITY;
    for n in 1..=SERIES_MAX_TERMS {
        let nf = n as f64;
        let ln_env = (nf - 1.0) * ln_theta + ln_gamma(nf * alpha + 1.0)? - ln_gamma(nf + 1.0)?
            - ln_scale;
        let envelope = ln_env.exp();
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        sum.add(sign * envelope * sin_pi(nf * alpha));
        let total = sum.value().abs();
        if envelope < prev_envelope && envelope <= 1e-17 * total.max(1e-300) {
            let rounding = 8.0 * f64::EPSILON * sum.abs_total();
            if total == 0.0 || rounding > SERIES_REL_ERROR * total {
                return Ok(None);
            }
            return Ok(Some(sum.value()));
        }
        prev_envelope = envelope;
    }
    Ok(None)
}

/// Positive integral representation of the one-sided stable density:
/// ζ(θ) = θ^{α/(1-α)} / ((1-α)π) ∫_0^π A(φ) exp(-θ^{1/(1-α)} A(φ)) dφ.
fn stable_integral(alpha: f64, theta: f64) -> Result<f64> {
    let one_m = 1.0 - alpha;
    let ln_theta = theta.ln();
    let ln_c = ln_theta / one_m;
    let ln_pre = alpha / one_m * ln_theta;
    let ln_a = move |phi: f64| {
        let s = phi.sin();
        (alpha * ((alpha * phi).sin() / s).ln() + one_m * ((one_m * phi).sin() / s).ln()) / one_m
    };
    let integrand = |phi: f64| {
        let la = ln_a(phi);
        (ln_pre + la - (ln_c + la).exp()).exp()
    };
    // For large θ the mass concentrates near φ = 0 with width ~ θ^{-1/(2(1-α))}.
    let levels = (0.5 * ln_c.max(0.0) / std::f64::consts::LN_2 + 4.0).ceil() as i32;
    let breaks: Vec<f64> = (1..=levels.clamp(1, 60)).map(|j| PI * 0.5f64.powi(j)).collect();
    let est = integrate(integrand, 0.0, PI, &breaks, Tolerance::new(1e-300, 1e-13))?;
    Ok(est.value / (one_m * PI))
}

pub fn density_laplace(order: FractionalOrder, z: f64) -> Result<f64> {
    density_laplace_with(order, z, DEFAULT_TAIL_CUTOFF)
}

/// `∫_0^cutoff ζ_α(θ) e^{-zθ} dθ`, which approximates `E_α(-z)` for `z ≥ 0`.
pub fn density_laplace_with(order: FractionalOrder, z: f64, cutoff: f64) -> Result<f64> {
    if order.is_integer() {
        return Ok(if cutoff >= 1.0 { (-z).exp() } else { 0.0 });
    }
    density_integral(order, |t| (-z * t).exp(), cutoff)
}

/// `∫_0^cutoff ζ_α(θ) w(θ) dθ` for a smooth weight `w`.
pub fn density_integral<W: Fn(f64) -> f64>(order: FractionalOrder, weight: W, cutoff: f64) -> Result<f64> {
    if !(cutoff > 0.0) || !cutoff.is_finite() {
        return Err(Error::invalid(format!("density cutoff must be positive, got {cutoff}")));
    }
    if order.is_integer() {
        return Ok(if cutoff >= 1.0 { weight(1.0) } else { 0.0 });
    }
    let alpha = order.alpha();
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let integrand = |t: f64| match wright_density(order, t) {
        Ok(d) => d * weight(t),
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    let mean = 1.0 / gamma_fn(1.0 + alpha)?;
    let mut breaks: Vec<f64> = (1..32).map(|j| 0.125 * j as f64).collect();
    breaks.extend([5.0, 6.0, 8.0, 10.0, 12.0, 16.0, 20.0, 25.0, 30.0, 35.0]);
    breaks.extend((-4..=4).map(|j| mean * (1.0 + 0.1 * j as f64)));
    let est = integrate(integrand, 0.0, cutoff, &breaks, Tolerance::new(1e-15, 1e-13));
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(est?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special_fn::{mittag_leffler, MLParams};
    use proptest::prelude::*;

    fn order(a: f64) -> FractionalOrder {
        FractionalOrder::new(a).unwrap()
    }

    #[test]
    fn half_order_is_gaussian() {
        // ζ_{1/2}(θ) = π^{-1/2} e^{-θ²/4}
        for &t in &[0.0, 0.3, 1.0, 2.7, 6.0, 15.0] {
            let want = (-t * t / 4.0f64).exp() / PI.sqrt();
            let got = wright_density(order(0.5), t).unwrap();
            assert!((got - want).abs() < 1e-13 * want.max(1e-300) + 1e-300, "θ = {t}: {got:e} vs {want:e}");
        }
    }

    #[test]
    fn reference_values() {
        let cases = [
            (0.7, 2.0, 0.249_128_858_065_195_96),
            (0.9, 1.5, 0.455_752_510_570_638_2),
            (0.3, 3.0, 0.063_511_233_653_723_87),
        ];
        for (a, t, want) in cases {
            let got = wright_density(order(a), t).unwrap();
            assert!(((got - want) / want).abs() < 1e-11, "M({a},{t}) = {got}");
        }
    }

    #[test]
    fn series_and_integral_agree() {
        let mut compared = 0;
        for &a in &[0.2, 0.5, 0.75, 0.9] {
            for &t in &[0.2, 0.8, 1.5] {
                if let Some(s) = series(a, t).unwrap() {
                    let i = stable_integral(a, t).unwrap();
                    assert!(((s - i) / s).abs() < 1e-11, "α={a} θ={t}: {s} vs {i}");
                    compared += 1;
                }
            }
        }
        assert!(compared >= 9);
    }

    #[test]
    fn fallback_engages_for_large_theta() {
        let (_, strategy) = wright_density_eval(order(0.9), 3.0).unwrap();
        assert_eq!(strategy, DensityStrategy::StableIntegral);
    }

    #[test]
    fn alpha_one_rejected() {
        assert!(matches!(wright_density(order(1.0), 1.0), Err(Error::Domain(_))));
        assert!(wright_density(order(0.5), -1.0).is_err());
        assert_eq!(density_laplace(order(1.0), 2.0).unwrap(), (-2.0f64).exp());
    }

    #[test]
    fn normalisation_and_mean() {
        for &a in &[0.1, 0.3, 0.5, 0.7, 0.9] {
            let mass = density_integral(order(a), |_| 1.0, DEFAULT_TAIL_CUTOFF).unwrap();
            assert!((mass - 1.0).abs() < 1e-10, "α={a}: {mass}");
            let mean = density_integral(order(a), |t| t, DEFAULT_TAIL_CUTOFF).unwrap();
            let want = 1.0 / gamma_fn(1.0 + a).unwrap();
            assert!((mean - want).abs() < 1e-10, "α={a}: {mean} vs {want}");
        }
    }

    #[test]
    fn laplace_transform_is_mittag_leffler() {
        for &a in &[0.3, 0.6, 0.85] {
            let p = MLParams::new(a, 1.0).unwrap();
            for &z in &[0.5, 3.0, 20.0] {
                let lhs = density_laplace(order(a), z).unwrap();
                let rhs = mittag_leffler(p, -z).unwrap();
                assert!((lhs - rhs).abs() < 1e-10, "α={a} z={z}: {lhs} vs {rhs}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn nonnegative(alpha in 0.05f64..0.95, theta in 0.0f64..30.0) {
            let d = wright_density(order(alpha), theta).unwrap();
            prop_assert!(d >= -1e-15, "ζ = {}", d);
        }
    }
}
