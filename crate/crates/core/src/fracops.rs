//! Fractional integral, Caputo derivative (L1 scheme) and the diagonal
//! propagators `S_α(t) ↔ E_α(-n² t^α)`, `T_α(t) ↔ E_{α,α}(-n² t^α)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::grid::{SampledSignal, TimeGrid};
use crate::quadrature::{convolve, ConvolutionWeights};
use crate::special_fn::{gamma_fn, mittag_leffler, FractionalOrder};
use crate::spectral::{SobolevIndex, SpectralOperator, SpectralState};

/// `(I^α f)(t_k)` by product integration; exact for piecewise-linear `f`.
pub fn frac_integral(f: &SampledSignal<f64>, order: FractionalOrder) -> Result<SampledSignal<f64>> {
    let w = ConvolutionWeights::build(order, *f.grid());
    let g = gamma_fn(order.alpha())?;
    let values = (0..f.len())
        .map(|k| convolve(&w, f, k).map(|v| v / g))
        .collect::<Result<Vec<_>>>()?;
    SampledSignal::new(*f.grid(), values)
}

/// L1 coefficients `b_m = (m+1)^{1-α} - m^{1-α}`.
fn l1_coefficients(alpha: f64, len: usize) -> Vec<f64> {
    let beta = 1.0 - alpha;
    (0..len)
        .map(|m| {
            if m == 0 {
                1.0
            } else {
                let mf = m as f64;
                mf.powf(beta) * (beta * (1.0 / mf).ln_1p()).exp_m1()
            }
        })
        .collect()
}

/// L1 discretisation on raw samples; at `α = 1` a backward difference.
pub(crate) fn caputo_values(values: &[f64], h: f64, alpha: f64) -> Result<Vec<f64>> {
    let n = values.len();
    let mut out = vec![0.0; n];
    if alpha == 1.0 {
        for k in 1..n {
            out[k] = (values[k] - values[k - 1]) / h;
        }
        return Ok(out);
    }
    let b = l1_coefficients(alpha, n);
    let diffs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let scale = h.powf(-alpha) / gamma_fn(2.0 - alpha)?;
    for k in 1..n {
        // Σ_{m=0}^{k-1} b_m (f_{k-m} - f_{k-m-1})
        let s: f64 = (0..k).map(|m| b[m] * diffs[k - m - 1]).sum();
        out[k] = scale * s;
    }
    Ok(out)
}

/// `(^C D^α f)(t_k)`; the value at `t_0` is reported as 0.
pub fn caputo_derivative(f: &SampledSignal<f64>, order: FractionalOrder) -> Result<SampledSignal<f64>> {
    let values = caputo_values(f.values(), f.grid().step(), order.alpha())?;
    SampledSignal::new(*f.grid(), values)
}

/// Diagonal of `S_α(t)`: `E_α(-n² t^α)`, `n = 1..N`.
pub fn s_alpha_diag(order: FractionalOrder, t: f64, n_modes: usize) -> Result<Vec<f64>> {
    let tp = t.powf(order.alpha());
    (1..=n_modes)
        .map(|n| mittag_leffler(order.ml_s(), -((n * n) as f64) * tp))
        .collect()
}

/// Diagonal of `T_α(t)`: `E_{α,α}(-n² t^α)`; at `t = 0` this is `1/Γ(α)`.
pub fn t_alpha_diag(order: FractionalOrder, t: f64, n_modes: usize) -> Result<Vec<f64>> {
    let tp = t.powf(order.alpha());
    (1..=n_modes)
        .map(|n| mittag_leffler(order.ml_t(), -((n * n) as f64) * tp))
        .collect()
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(crate::error::Error::Domain(format!("propagator time must be ≥ 0, got {t}")))
    }
}

pub fn s_alpha_apply(t: f64, s: &SpectralState, order: FractionalOrder) -> Result<SpectralState> {
    check_time(t)?;
    Ok(s.hadamard(&s_alpha_diag(order, t, s.len())?))
}

pub fn t_alpha_apply(t: f64, s: &SpectralState, order: FractionalOrder) -> Result<SpectralState> {
    check_time(t)?;
    Ok(s.hadamard(&t_alpha_diag(order, t, s.len())?))
}

/// `A T_α(t)`: mode `n` scaled by `-n² E_{α,α}(-n² t^α)`.
pub fn a_t_alpha_apply(t: f64, s: &SpectralState, order: FractionalOrder) -> Result<SpectralState> {
    check_time(t)?;
    let d = t_alpha_diag(order, t, s.len())?;
    let at: Vec<f64> = d
        .iter()
        .enumerate()
        .map(|(i, v)| -(((i + 1) * (i + 1)) as f64) * v)
        .collect();
    Ok(s.hadamard(&at))
}

/// Propagator symbols tabulated on a grid: `s[k]` at `t_k`, `t[m]` at lag
/// `m h`. Because the grid is uniform, `T_α(t_k - t_j)` is `t[k - j]`.
#[derive(Debug, Clone)]
pub struct PropagatorTables {
    pub s: Vec<Vec<f64>>,
    pub t: Vec<Vec<f64>>,
}

impl PropagatorTables {
    pub fn build(order: FractionalOrder, grid: &TimeGrid, n_modes: usize) -> Result<Self> {
        let nodes = grid.nodes();
        let s = nodes
            .par_iter()
            .map(|&t| s_alpha_diag(order, t, n_modes))
            .collect::<Result<Vec<_>>>()?;
        let t = nodes
            .par_iter()
            .map(|&t| t_alpha_diag(order, t, n_modes))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { s, t })
    }

    /// Diagonal of `A T_α(m h)`.
    pub fn at(&self, m: usize) -> Vec<f64> {
        self.t[m]
            .iter()
            .enumerate()
            .map(|(i, v)| -(((i + 1) * (i + 1)) as f64) * v)
            .collect()
    }
}

/// Largest `|E_α(-n² t^α)|` and `|E_{α,α}(-n² t^α)|` over grid nodes and modes.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PropagatorBounds {
    pub sup_s: f64,
    pub sup_t: f64,
    /// `1/Γ(α)`, the bound for `sup_t` with `M = 1`
    pub t_bound: f64,
}

pub fn propagator_bounds(order: FractionalOrder, grid: &TimeGrid, op: &SpectralOperator) -> Result<PropagatorBounds> {
    let tables = PropagatorTables::build(order, grid, op.n_modes())?;
    let sup = |rows: &[Vec<f64>]| rows.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(PropagatorBounds {
        sup_s: sup(&tables.s),
        sup_t: sup(&tables.t),
        t_bound: 1.0 / gamma_fn(order.alpha())?,
    })
}

/// Empirical version of `‖(-A)^q T_α(t)‖ ≤ C t^{-qα}`.
#[derive(Debug, Clone, Serialize)]
pub struct SmoothingReport {
    pub alpha: f64,
    pub q: f64,
    /// `sup_t sup_n n^{2q} |E_{α,α}(-n² t^α)| t^{qα}` over positive grid nodes
    pub empirical_constant: f64,
    /// per-node values of the scaled supremum (nodes `t_1..t_K`)
    pub per_node: Vec<f64>,
    pub min_over_t: f64,
    pub max_over_t: f64,
    /// `αΓ(2-q)/Γ(1+α(1-q))`, the analytic factor multiplying `M_q`
    pub gamma_factor: f64,
    /// `empirical_constant / gamma_factor`, a lower estimate of `M_q`
    pub implied_m_q: f64,
    pub bounded: bool,
}

pub fn bound_check_smoothing(
    order: FractionalOrder,
    grid: &TimeGrid,
    q: SobolevIndex,
    op: &SpectralOperator,
) -> Result<SmoothingReport> {
    let alpha = order.alpha();
    let qv = q.value();
    let per_node = grid.nodes()[1..]
        .par_iter()
        .map(|&t| {
            let d = t_alpha_diag(order, t, op.n_modes())?;
            let scale = t.powf(qv * alpha);
            Ok(d.iter()
                .enumerate()
                .map(|(i, v)| ((i + 1) as f64).powf(2.0 * qv) * v.abs() * scale)
                .fold(0.0f64, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_over_t = per_node.iter().copied().fold(0.0f64, f64::max);
    let min_over_t = per_node.iter().copied().fold(f64::INFINITY, f64::min);
    let gamma_factor = alpha * gamma_fn(2.0 - qv)? / gamma_fn(1.0 + alpha * (1.0 - qv))?;
    Ok(SmoothingReport {
        alpha,
        q: qv,
        empirical_constant: max_over_t,
        bounded: per_node.iter().all(|v| v.is_finite()),
        per_node,
        min_over_t,
        max_over_t,
        gamma_factor,
        implied_m_q: max_over_t / gamma_factor,
    })
}
