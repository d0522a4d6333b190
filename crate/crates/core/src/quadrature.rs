//! Product-trapezoid weights for `∫_0^{t_k} (t_k - s)^{α-1} φ(s) ds` on a
//! uniform grid: exact whenever `φ` is piecewise linear on the grid.
//!
//! With `s = h^α / (α(α+1))` and `m = k - j` the weights are
//!
//! ```text
//! W[k][k] = s
//! W[k][j] = s · ((m+1)^{α+1} - 2 m^{α+1} + (m-1)^{α+1}),   1 ≤ j < k
//! W[k][0] = s · ((k-1)^{α+1} - (k-α-1) k^α)
//! ```
//!
//! Interior weights depend on `m` only, so storage is `O(n)`.

use crate::error::{Error, Result};
use crate::grid::{SampledSignal, TimeGrid, VectorSpace};
use crate::special_fn::FractionalOrder;

/// Switch to the binomial expansions beyond this index; the direct second
/// difference loses about `m²` ulps.
const SERIES_FROM: usize = 8;

#[derive(Debug, Clone)]
pub struct ConvolutionWeights {
    alpha: f64,
    grid: TimeGrid,
    scale: f64,
    /// interior[m] for m = 1..=n_steps (index 0 unused)
    interior: Vec<f64>,
    /// first[k] = W[k][0] / scale for k ≥ 1
    first: Vec<f64>,
}

/// `C(p, j)` for real `p`, `j = 0..len`.
fn binomials(p: f64, len: usize) -> Vec<f64> {
    let mut c = Vec::with_capacity(len);
    let mut v = 1.0;
    for j in 0..len {
        c.push(v);
        v *= (p - j as f64) / (j + 1) as f64;
    }
    c
}

/// `(m+1)^p - 2m^p + (m-1)^p` for `m ≥ 1`.
fn second_difference(m: usize, p: f64, binom: &[f64]) -> f64 {
    let mf = m as f64;
    if m < SERIES_FROM {
        return (mf + 1.0).powf(p) - 2.0 * mf.powf(p) + (mf - 1.0).powf(p);
    }
    // 2 m^p Σ_{k≥1} C(p, 2k) m^{-2k}
    let inv2 = 1.0 / (mf * mf);
    let mut sum = 0.0;
    let mut pow = inv2;
    for k in 1..binom.len() / 2 {
        let term = binom[2 * k] * pow;
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
        pow *= inv2;
    }
    2.0 * mf.powf(p) * sum
}

/// `(k-1)^p - (k-p) k^{p-1}` for `k ≥ 1`.
fn first_weight(k: usize, p: f64, binom: &[f64]) -> f64 {
    let kf = k as f64;
    if k < SERIES_FROM {
        return (kf - 1.0).powf(p) - (kf - p) * kf.powf(p - 1.0);
    }
    // k^p Σ_{j≥2} C(p, j) (-1/k)^j
    let x = -1.0 / kf;
    let mut sum = 0.0;
    let mut pow = x * x;
    for &c in &binom[2..] {
        let term = c * pow;
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
        pow *= x;
    }
    kf.powf(p) * sum
}

impl ConvolutionWeights {
    pub fn build(order: FractionalOrder, grid: TimeGrid) -> Self {
        let alpha = order.alpha();
        let p = alpha + 1.0;
        let n = grid.n_steps();
        let binom = binomials(p, 120);
        let interior = (0..=n)
            .map(|m| if m == 0 { 0.0 } else { second_difference(m, p, &binom) })
            .collect();
        let first = (0..=n)
            .map(|k| if k == 0 { 0.0 } else { first_weight(k, p, &binom) })
            .collect();
        Self {
            alpha,
            grid,
            scale: grid.step().powf(alpha) / (alpha * p),
            interior,
            first,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// `W[k][j]`; zero above the diagonal.
    pub fn weight(&self, k: usize, j: usize) -> f64 {
        if j > k || k == 0 {
            0.0
        } else if j == k {
            self.scale
        } else if j == 0 {
            self.scale * self.first[k]
        } else {
            self.scale * self.interior[k - j]
        }
    }

    /// Row `k` of the weight matrix, `j = 0..=k`.
    pub fn row(&self, k: usize) -> Vec<f64> {
        (0..=k).map(|j| self.weight(k, j)).collect()
    }

    /// `Σ_j W[k][j] f(j)` for samples produced on the fly, as needed when a
    /// propagator depending on `t_k - t_j` is folded into the integrand.
    pub fn convolve_fn<T: VectorSpace>(&self, k: usize, zero: T, f: impl Fn(usize) -> T) -> Result<T> {
        if k > self.grid.n_steps() {
            return Err(Error::Index {
                index: k,
                len: self.grid.len(),
            });
        }
        let mut acc = zero;
        for j in 0..=k {
            let w = self.weight(k, j);
            if w != 0.0 {
                acc.axpy(w, &f(j));
            }
        }
        Ok(acc)
    }
}

/// `Σ_{j ≤ k} W[k][j] φ(t_j)`.
pub fn convolve<T: VectorSpace>(w: &ConvolutionWeights, phi: &SampledSignal<T>, k: usize) -> Result<T> {
    if phi.grid() != w.grid() {
        return Err(Error::Dimension("signal and weights live on different grids".into()));
    }
    let values = phi.values();
    w.convolve_fn(k, values[0].zero_like(), |j| values[j].clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special_fn::gamma_fn;
    use proptest::prelude::*;

    fn weights(alpha: f64, a: f64, n: usize) -> ConvolutionWeights {
        ConvolutionWeights::build(FractionalOrder::new(alpha).unwrap(), TimeGrid::new(a, n).unwrap())
    }

    #[test]
    fn alpha_one_is_trapezoid() {
        let w = weights(1.0, 1.0, 10);
        let g = TimeGrid::new(1.0, 10).unwrap();
        for k in 0..=10 {
            let trap = g.trapezoid_weights(k);
            for (j, t) in trap.iter().enumerate() {
                assert!((w.weight(k, j) - t).abs() < 1e-15, "k={k} j={j}");
            }
        }
    }

    #[test]
    fn row_sums_exact() {
        for &alpha in &[0.1, 0.5, 0.73, 1.0] {
            let w = weights(alpha, 1.3, 2000);
            for k in [1usize, 2, 7, 8, 9, 100, 1999, 2000] {
                let sum: f64 = w.row(k).iter().sum();
                let t = w.grid().node(k);
                let want = t.powf(alpha) / alpha;
                assert!((sum - want).abs() < 1e-12 * want.max(1.0), "α={alpha} k={k}");
            }
        }
    }

    #[test]
    fn linear_integrand_beta_form() {
        // ∫_0^1 (1-s)^{-1/2} s ds = B(2, 1/2) = 4/3
        let w = weights(0.5, 1.0, 64);
        let g = *w.grid();
        let phi = SampledSignal::from_fn(g, |s| s);
        assert!((convolve(&w, &phi, 64).unwrap() - 4.0 / 3.0).abs() < 1e-12);
        let zero = SampledSignal::from_fn(g, |_| 0.0);
        assert_eq!(convolve(&w, &zero, 64).unwrap(), 0.0);
        assert!(convolve(&w, &phi, 65).is_err());
    }

    #[test]
    fn positive_weights() {
        for &alpha in &[0.05, 0.5, 0.95] {
            let w = weights(alpha, 1.0, 300);
            for k in 0..=300 {
                assert!(w.row(k).iter().all(|&v| v >= 0.0), "α={alpha} k={k}");
            }
        }
    }

    #[test]
    fn series_matches_direct_at_switch() {
        let p = 1.37;
        let b = binomials(p, 120);
        let m = SERIES_FROM as f64;
        let direct = (m + 1.0).powf(p) - 2.0 * m.powf(p) + (m - 1.0).powf(p);
        assert!((second_difference(SERIES_FROM, p, &b) - direct).abs() < 1e-13);
        let direct = (m - 1.0).powf(p) - (m - p) * m.powf(p - 1.0);
        assert!((first_weight(SERIES_FROM, p, &b) - direct).abs() < 1e-13);
    }

    #[test]
    fn second_order_refinement() {
        // φ(s) = sin s, observed order ≥ 1.8
        let alpha: f64 = 0.6;
        let exact = {
            let w = weights(alpha, 1.0, 8192);
            let phi = SampledSignal::from_fn(*w.grid(), f64::sin);
            convolve(&w, &phi, 8192).unwrap()
        };
        let err = |n: usize| {
            let w = weights(alpha, 1.0, n);
            let phi = SampledSignal::from_fn(*w.grid(), f64::sin);
            (convolve(&w, &phi, n).unwrap() - exact).abs()
        };
        let order = (err(64) / err(128)).log2();
        assert!(order >= 1.8, "observed order {order}");
    }

    proptest! {
        #[test]
        fn exact_on_lines(c0 in -3.0f64..3.0, c1 in -3.0f64..3.0, alpha in 0.05f64..1.0,
                          a in 0.1f64..5.0, n in 1usize..400) {
            let w = weights(alpha, a, n);
            let phi = SampledSignal::from_fn(*w.grid(), |s| c0 + c1 * s);
            let k = n;
            let t = a;
            // ∫_0^t (t-s)^{α-1}(c0 + c1 s) ds = c0 t^α/α + c1 t^{α+1} Γ(α)/Γ(α+2)
            let want = c0 * t.powf(alpha) / alpha
                + c1 * t.powf(alpha + 1.0) * gamma_fn(alpha).unwrap() / gamma_fn(alpha + 2.0).unwrap();
            let got = convolve(&w, &phi, k).unwrap();
            prop_assert!((got - want).abs() < 1e-12 * want.abs().max(1.0), "{} vs {}", got, want);
        }

        #[test]
        fn linear_in_phi(vals in proptest::collection::vec(-1.0f64..1.0, 33)) {
            let w = weights(0.4, 1.0, 32);
            let phi = SampledSignal::new(*w.grid(), vals.clone()).unwrap();
            let phi2 = SampledSignal::new(*w.grid(), vals.iter().map(|v| 2.0 * v).collect()).unwrap();
            for k in 0..=32 {
                prop_assert_eq!(convolve(&w, &phi2, k).unwrap(), 2.0 * convolve(&w, &phi, k).unwrap());
            }
        }
    }
}
