use std::f64::consts::PI;

use super::sin_pi;
use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Largest argument with a finite `Γ(x)` in f64.
const GAMMA_MAX_ARG: f64 = 171.624_376_956_302_7;

fn lanczos_sum(x: f64) -> f64 {
    LANCZOS[1..]
        .iter()
        .enumerate()
        .fold(LANCZOS[0], |acc, (i, &c)| acc + c / (x + (i + 1) as f64))
}

/// `Γ(x)` for `x ≥ 0.5` without range checks.
fn gamma_lanczos(x: f64) -> f64 {
    let x = x - 1.0;
    let t = x + LANCZOS_G + 0.5;
    // t^(x+1/2) split in two halves so Γ(170) does not overflow the power
    let half_power = t.powf(0.5 * (x + 0.5));
    (2.0 * PI).sqrt() * half_power * (half_power * (-t).exp()) * lanczos_sum(x)
}

/// Gamma function via the Lanczos approximation (g = 7, 9 terms), with the
/// reflection formula below 1/2.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::Domain("gamma of NaN".into()));
    }
    if x <= 0.0 && x == x.floor() {
        return Err(Error::Pole(x));
    }
    if x > GAMMA_MAX_ARG {
        return Err(Error::Overflow { what: "gamma", at: x });
    }
    if x == x.floor() && x <= 30.0 {
        // exact factorials while they fit the mantissa, rounded once beyond
        return Ok((2..x as u32).fold(1.0, |acc, k| acc * k as f64));
    }
    if x < 0.5 {
        let reflected = 1.0 - x;
        let s = sin_pi(x);
        if reflected > GAMMA_MAX_ARG {
            // |Γ(x)| underflows below the smallest subnormal here
            return Ok(0.0 * s.signum());
        }
        return Ok(PI / (s * gamma_lanczos(reflected)));
    }
    Ok(gamma_lanczos(x))
}

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("ln_gamma requires x > 0, got {x}")));
    }
    if x < 0.5 {
        return Ok(ln_gamma(x + 1.0)? - x.ln());
    }
    let y = x - 1.0;
    let t = y + LANCZOS_G + 0.5;
    Ok(0.5 * (2.0 * PI).ln() + (y + 0.5) * t.ln() - t + lanczos_sum(y).ln())
}
