//! Gamma function, two-parameter Mittag-Leffler function and the Wright-type
//! (Mainardi) probability density that defines the fractional propagators.

mod gamma;
mod mittag_leffler;
mod wright;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use gamma::{gamma_fn, ln_gamma};
pub use mittag_leffler::{
    mittag_leffler, mittag_leffler_eval, MlEvaluation, MlStrategy, ML_Z_MAX, ML_Z_MIN,
};
pub use wright::{
    density_integral, density_laplace, density_laplace_with, wright_density,
    wright_density_eval, DensityStrategy, DEFAULT_TAIL_CUTOFF,
};

/// Fractional order α of the Caputo derivative, `0 < α ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FractionalOrder(f64);

impl FractionalOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha <= 1.0 {
            Ok(Self(alpha))
        } else {
            Err(Error::invalid(format!("fractional order must lie in (0, 1], got {alpha}")))
        }
    }

    pub fn alpha(self) -> f64 {
        self.0
    }

    pub fn is_integer(self) -> bool {
        self.0 == 1.0
    }

    /// Parameters of `E_α = E_{α,1}`, the symbol of `S_α(t)`.
    pub fn ml_s(self) -> MLParams {
        MLParams {
            alpha: self.0,
            beta: 1.0,
        }
    }

    /// Parameters of `E_{α,α}`, the symbol of `T_α(t)`.
    pub fn ml_t(self) -> MLParams {
        MLParams {
            alpha: self.0,
            beta: self.0,
        }
    }
}

impl TryFrom<f64> for FractionalOrder {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<FractionalOrder> for f64 {
    fn from(value: FractionalOrder) -> Self {
        value.0
    }
}

/// Index pair `(α, β)` of `E_{α,β}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MLParams {
    pub alpha: f64,
    pub beta: f64,
}

impl MLParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!("Mittag-Leffler alpha must be > 0, got {alpha}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::invalid(format!("Mittag-Leffler beta must be > 0, got {beta}")));
        }
        Ok(Self { alpha, beta })
    }
}

/// `sin(πx)` with argument reduction, exact zeros at the integers.
pub(crate) fn sin_pi(x: f64) -> f64 {
    let r = x - 2.0 * (0.5 * x).round();
    if r == 0.0 || r.abs() == 1.0 {
        return 0.0;
    }
    (std::f64::consts::PI * r).sin()
}

/// Neumaier (improved Kahan) running sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
    abs: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
        self.abs += x.abs();
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    /// Sum of absolute values of everything added so far.
    pub fn abs_total(&self) -> f64 {
        self.abs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_bounds() {
        assert!(FractionalOrder::new(0.0).is_err());
        assert!(FractionalOrder::new(1.0001).is_err());
        assert!(FractionalOrder::new(f64::NAN).is_err());
        assert_eq!(FractionalOrder::new(1.0).unwrap().alpha(), 1.0);
        let o: FractionalOrder = serde_json::from_str("0.5").unwrap();
        assert_eq!(o.alpha(), 0.5);
        assert!(serde_json::from_str::<FractionalOrder>("1.5").is_err());
    }

    #[test]
    fn ml_params_positive() {
        assert!(MLParams::new(0.5, 0.0).is_err());
        assert!(MLParams::new(-0.5, 1.0).is_err());
        assert!(MLParams::new(2.0, 0.3).is_ok());
    }

    #[test]
    fn sin_pi_exact_zeros() {
        assert_eq!(sin_pi(3.0), 0.0);
        assert_eq!(sin_pi(-2.0), 0.0);
        assert!((sin_pi(0.5) - 1.0).abs() < 1e-16);
        assert!((sin_pi(2.25) - (0.25 * std::f64::consts::PI).sin()).abs() < 1e-15);
    }
}
