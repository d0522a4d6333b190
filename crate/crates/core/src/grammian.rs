//! Controllability Gramians in spectral coordinates, their resolvents and
//! the regularised control law.

use log::warn;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{FrozenTerms, SolverContext, Trajectory};
use crate::error::{Error, Result};
use crate::fracops::PropagatorTables;
use crate::grid::{SampledSignal, TimeGrid};
use crate::quadrature::ConvolutionWeights;
use crate::special_fn::FractionalOrder;
#[cfg(test)]
use crate::special_fn::MLParams;
use crate::spectral::{SpectralOperator, SpectralState};

pub type ControlVector = DVector<f64>;

const CONDITION_WARN: f64 = 1e12;
const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

/// Bounded operator from control coordinates into the `N` spectral modes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlOperator {
    #[serde(serialize_with = "serialize_rows")]
    matrix: DMatrix<f64>,
}

fn serialize_rows<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.serialize(s)
}

impl ControlOperator {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::Dimension("empty control matrix".into()));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("control matrix has non-finite entries"));
        }
        Ok(Self { matrix })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged control matrix".into()));
        }
        Self::new(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
    }

    /// The operator of the worked example: controls `μ_2..μ_N`, with
    /// `(Bμ)_1 = 2μ_2` and `(Bμ)_n = μ_n` for `n ≥ 2`.
    pub fn paired(n_modes: usize) -> Self {
        let mut m = DMatrix::zeros(n_modes, n_modes - 1);
        m[(0, 0)] = 2.0;
        for n in 2..=n_modes {
            m[(n - 1, n - 2)] = 1.0;
        }
        Self { matrix: m }
    }

    pub fn identity(n_modes: usize) -> Self {
        Self {
            matrix: DMatrix::identity(n_modes, n_modes),
        }
    }

    pub fn zero(n_modes: usize, n_controls: usize) -> Self {
        Self {
            matrix: DMatrix::zeros(n_modes, n_controls),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn n_modes(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_controls(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn apply(&self, mu: &ControlVector) -> SpectralState {
        SpectralState::new((&self.matrix * mu).iter().copied().collect())
    }

    pub fn adjoint_apply(&self, s: &SpectralState) -> ControlVector {
        self.matrix.tr_mul(&DVector::from_column_slice(s.coeffs()))
    }

    /// `B B*`
    pub fn outer(&self) -> DMatrix<f64> {
        &self.matrix * self.matrix.transpose()
    }

    pub fn rank(&self) -> usize {
        let sv = self.matrix.clone().svd(false, false).singular_values;
        let max = sv.iter().copied().fold(0.0, f64::max);
        sv.iter().filter(|&&s| s > 1e-12 * max.max(1e-300)).count()
    }

    /// Least-squares preimage `B⁺ s`.
    pub fn pseudo_inverse_apply(&self, s: &SpectralState) -> Result<ControlVector> {
        let svd = self.matrix.clone().svd(true, true);
        svd.solve(&DVector::from_column_slice(s.coeffs()), 1e-12)
            .map_err(|e| Error::Solve(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GramianKind {
    Gamma1,
    Gamma2,
    /// `Γ₁ + Γ₂`
    Combined,
}

/// Symmetric positive semidefinite `N × N` Gramian.
#[derive(Debug, Clone, Serialize)]
pub struct Gramian {
    kind: GramianKind,
    horizon: f64,
    alpha: f64,
    #[serde(serialize_with = "serialize_rows")]
    matrix: DMatrix<f64>,
    /// ascending
    eigenvalues: Vec<f64>,
}

impl Gramian {
    /// Validates symmetry and positive semidefiniteness.
    pub fn new(matrix: DMatrix<f64>, kind: GramianKind, horizon: f64, alpha: f64) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension("Gramian must be square".into()));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Gramian("non-finite entry".into()));
        }
        let scale = matrix.amax().max(f64::MIN_POSITIVE);
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > SYMMETRY_TOL * scale.max(1.0) {
            return Err(Error::Gramian(format!("asymmetry {asym:e}")));
        }
        let mut eigenvalues: Vec<f64> = SymmetricEigen::new(matrix.clone()).eigenvalues.iter().copied().collect();
        eigenvalues.sort_by(f64::total_cmp);
        let (min, max) = (eigenvalues[0], *eigenvalues.last().unwrap());
        if min < -PSD_TOL * max.max(0.0) {
            return Err(Error::Gramian(format!(
                "smallest eigenvalue {min:e} below -1e-10 × largest {max:e}"
            )));
        }
        Ok(Self {
            kind,
            horizon,
            alpha,
            matrix,
            eigenvalues,
        })
    }

    pub fn kind(&self) -> GramianKind {
        self.kind
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigen(&self) -> SymmetricEigen<f64, Dyn> {
        SymmetricEigen::new(self.matrix.clone())
    }

    pub fn combined(&self, other: &Gramian) -> Result<Gramian> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension("Gramians of different size".into()));
        }
        Gramian::new(&self.matrix + &other.matrix, GramianKind::Combined, self.horizon, self.alpha)
    }

    pub fn apply(&self, v: &SpectralState) -> SpectralState {
        SpectralState::new((&self.matrix * DVector::from_column_slice(v.coeffs())).iter().copied().collect())
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// `Γ₁ = Σ_j W[K][j] T(a - t_j) B B* T(a - t_j)`: the `(a-s)^{α-1}` kernel is
/// in the product weights, the propagator symbols in the samples.
pub fn build_gamma1_from_tables(
    b1: &ControlOperator,
    order: FractionalOrder,
    grid: &TimeGrid,
    weights: &ConvolutionWeights,
    tables: &PropagatorTables,
) -> Result<Gramian> {
    let k = grid.n_steps();
    let bb = b1.outer();
    let n = bb.nrows();
    // time-integrated products Σ_j W_j T_m(a - t_j) T_n(a - t_j)
    let mut m = DMatrix::zeros(n, n);
    for j in 0..=k {
        let w = weights.weight(k, j);
        let d = &tables.t[k - j];
        for r in 0..n {
            for c in 0..=r {
                m[(r, c)] += w * d[r] * d[c];
            }
        }
    }
    for r in 0..n {
        for c in 0..=r {
            let v = m[(r, c)] * bb[(r, c)];
            m[(r, c)] = v;
            m[(c, r)] = v;
        }
    }
    symmetrize(&mut m);
    Gramian::new(m, GramianKind::Gamma1, grid.horizon(), order.alpha())
}

pub fn build_gamma1(
    op: &SpectralOperator,
    b1: &ControlOperator,
    order: FractionalOrder,
    grid: &TimeGrid,
) -> Result<Gramian> {
    if b1.n_modes() != op.n_modes() {
        return Err(Error::Dimension("B₁ rows differ from the number of modes".into()));
    }
    let weights = ConvolutionWeights::build(order, *grid);
    let tables = PropagatorTables::build(order, grid, op.n_modes())?;
    build_gamma1_from_tables(b1, order, grid, &weights, &tables)
}

/// `Γ₂ = S(a) B B* S(a)` from the diagonal of `S(a)`.
pub fn build_gamma2_from_diag(b2: &ControlOperator, order: FractionalOrder, a: f64, s_diag: &[f64]) -> Result<Gramian> {
    let bb = b2.outer();
    let n = bb.nrows();
    let mut m = DMatrix::from_fn(n, n, |r, c| s_diag[r] * bb[(r, c)] * s_diag[c]);
    symmetrize(&mut m);
    Gramian::new(m, GramianKind::Gamma2, a, order.alpha())
}

pub fn build_gamma2(op: &SpectralOperator, b2: &ControlOperator, order: FractionalOrder, a: f64) -> Result<Gramian> {
    if b2.n_modes() != op.n_modes() {
        return Err(Error::Dimension("B₂ rows differ from the number of modes".into()));
    }
    if !(a > 0.0) {
        return Err(Error::invalid(format!("horizon must be positive, got {a}")));
    }
    let s = crate::fracops::s_alpha_diag(order, a, op.n_modes())?;
    build_gamma2_from_diag(b2, order, a, &s)
}

/// Factorised `(λI + Γ)^{-1}`.
#[derive(Debug, Clone)]
pub struct Resolvent {
    lambda: f64,
    shifted: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    condition: f64,
}

impl Resolvent {
    pub fn new(lambda: f64, g: &Gramian) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
        }
        let n = g.dim();
        let shifted = g.matrix() + DMatrix::identity(n, n) * lambda;
        let ev = g.eigenvalues();
        let condition = (lambda + ev[n - 1].max(0.0)) / (lambda + ev[0].max(0.0));
        if condition > CONDITION_WARN {
            warn!("resolvent at λ = {lambda:e} has condition estimate {condition:e}");
        }
        let chol = Cholesky::new(shifted.clone())
            .ok_or_else(|| Error::Solve(format!("λI + Γ not positive definite at λ = {lambda:e}")))?;
        Ok(Self {
            lambda,
            shifted,
            chol,
            condition,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Cholesky solve plus one step of iterative refinement.
    pub fn apply(&self, v: &SpectralState) -> SpectralState {
        let rhs = DVector::from_column_slice(v.coeffs());
        let mut x = self.chol.solve(&rhs);
        let r = &rhs - &self.shifted * &x;
        x += self.chol.solve(&r);
        SpectralState::new(x.iter().copied().collect())
    }

    /// `‖(λI + Γ)x - v‖`
    pub fn residual(&self, x: &SpectralState, v: &SpectralState) -> f64 {
        let r = DVector::from_column_slice(v.coeffs()) - &self.shifted * DVector::from_column_slice(x.coeffs());
        r.norm()
    }
}

pub fn resolvent_apply(lambda: f64, g: &Gramian, v: &SpectralState) -> Result<SpectralState> {
    Ok(Resolvent::new(lambda, g)?.apply(v))
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayTrace {
    /// `‖λ R(λ, Γ) x‖` for each λ
    pub norms: Vec<f64>,
    /// last / first
    pub ratio: f64,
    pub decaying: bool,
    /// non-increasing along the λ list
    pub monotone: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub kind: GramianKind,
    pub lambdas: Vec<f64>,
    pub traces: Vec<DecayTrace>,
}

impl DecayReport {
    pub fn all_decaying(&self) -> bool {
        self.traces.iter().all(|t| t.decaying)
    }

    pub fn none_decaying(&self) -> bool {
        self.traces.iter().all(|t| !t.decaying)
    }
}

/// Evaluates `‖λ(λI + Γ)^{-1} x‖` along a decreasing λ list; a trace decays
/// when its final value is at most a tenth of its first.
pub fn resolvent_decay(g: &Gramian, test_vectors: &[SpectralState], lambdas: &[f64]) -> Result<DecayReport> {
    if lambdas.is_empty() || lambdas.iter().any(|l| !(*l > 0.0)) || lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("lambdas must be positive and strictly decreasing"));
    }
    let resolvents = lambdas
        .iter()
        .map(|&l| Resolvent::new(l, g))
        .collect::<Result<Vec<_>>>()?;
    let traces = test_vectors
        .iter()
        .map(|x| {
            let norms: Vec<f64> = resolvents.iter().map(|r| r.lambda() * r.apply(x).norm()).collect();
            let first = norms[0];
            let last = *norms.last().unwrap();
            let ratio = if first > 0.0 { last / first } else { 1.0 };
            DecayTrace {
                monotone: norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)),
                decaying: first > 0.0 && last <= 0.1 * first,
                ratio,
                norms,
            }
        })
        .collect();
    Ok(DecayReport {
        kind: g.kind(),
        lambdas: lambdas.to_vec(),
        traces,
    })
}

/// How the two controls share the regularised inverse.
///
/// `Joint` uses `R(λ, Γ₁ + Γ₂)` for both, so the terminal error is exactly
/// `λ R(λ, Γ₁ + Γ₂) P`. `Separate` gives each control its own resolvent
/// `R(λ, Γᵢ)`; then `u_a - u(a) = (λR₁ + λR₂ - I) P`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlLaw {
    #[default]
    Joint,
    Separate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlPair {
    pub mu1: SampledSignal<ControlVector>,
    pub mu2: ControlVector,
}

impl ControlPair {
    pub fn zero(grid: TimeGrid, m1: usize, m2: usize) -> Self {
        Self {
            mu1: SampledSignal::from_fn(grid, |_| DVector::zeros(m1)),
            mu2: DVector::zeros(m2),
        }
    }

    /// `‖μ₁‖_{L²(0,a)}` by the trapezoid rule.
    pub fn mu1_energy(&self) -> f64 {
        let g = self.mu1.grid();
        let w = g.trapezoid_weights(g.n_steps());
        w.iter()
            .zip(self.mu1.values())
            .map(|(w, m)| w * m.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    pub fn mu2_norm(&self) -> f64 {
        self.mu2.norm()
    }
}

/// Terminal functional
/// `P = u_a - S(a)[u₀ - h - g(0)] - g(a) - Σ_j W[K][j] T(a - t_j)(A g_j + v_j)`.
pub(crate) fn terminal_functional(
    ctx: &SolverContext,
    frozen: &FrozenTerms,
    v: &SampledSignal<SpectralState>,
) -> Result<SpectralState> {
    let scen = &ctx.scenario;
    let k = scen.grid.n_steps();
    let n = scen.op.n_modes();
    let base = &(&scen.u0 - &frozen.h) - &frozen.g[0];
    let mut p = &(&scen.u_target - &base.hadamard(&ctx.tables.s[k])) - &frozen.g[k];
    let conv = ctx.weights.convolve_fn(k, SpectralState::zeros(n), |j| {
        forcing_integrand(ctx, &frozen.g[j], &v.values()[j], k - j)
    })?;
    for (pi, ci) in p.coeffs_mut().iter_mut().zip(conv.coeffs()) {
        *pi -= ci;
    }
    Ok(p)
}

/// `T(m h)(A g + f)` as one diagonal product.
pub(crate) fn forcing_integrand(ctx: &SolverContext, g: &SpectralState, f: &SpectralState, lag: usize) -> SpectralState {
    let t = &ctx.tables.t[lag];
    SpectralState::new(
        g.coeffs()
            .iter()
            .zip(f.coeffs())
            .enumerate()
            .map(|(i, (gi, fi))| t[i] * (-(((i + 1) * (i + 1)) as f64) * gi + fi))
            .collect(),
    )
}

/// Resolvents for one λ, reused across Picard iterations.
#[derive(Debug, Clone)]
pub struct ControlSynthesizer {
    law: ControlLaw,
    joint: Option<Resolvent>,
    r1: Option<Resolvent>,
    r2: Option<Resolvent>,
}

impl ControlSynthesizer {
    pub fn new(ctx: &SolverContext, lambda: f64) -> Result<Self> {
        let law = ctx.scenario.control_law;
        Ok(match law {
            ControlLaw::Joint => Self {
                law,
                joint: Some(Resolvent::new(lambda, &ctx.gamma_joint)?),
                r1: None,
                r2: None,
            },
            ControlLaw::Separate => Self {
                law,
                joint: None,
                r1: Some(Resolvent::new(lambda, &ctx.gamma1)?),
                r2: Some(Resolvent::new(lambda, &ctx.gamma2)?),
            },
        })
    }

    pub fn law(&self) -> ControlLaw {
        self.law
    }

    /// The vectors `R P` that feed `μ₁` and `μ₂`.
    pub fn dual_vectors(&self, p: &SpectralState) -> (SpectralState, SpectralState) {
        match self.law {
            ControlLaw::Joint => {
                let y = self.joint.as_ref().expect("joint resolvent").apply(p);
                (y.clone(), y)
            }
            ControlLaw::Separate => (
                self.r1.as_ref().expect("R1").apply(p),
                self.r2.as_ref().expect("R2").apply(p),
            ),
        }
    }

    pub(crate) fn synthesize_from_p(&self, ctx: &SolverContext, p: &SpectralState) -> ControlPair {
        let scen = &ctx.scenario;
        let k = scen.grid.n_steps();
        let (y1, y2) = self.dual_vectors(p);
        let mu1: Vec<ControlVector> = (0..=k)
            .into_par_iter()
            .map(|j| scen.b1.adjoint_apply(&y1.hadamard(&ctx.tables.t[k - j])))
            .collect();
        let mu2 = scen.b2.adjoint_apply(&y2.hadamard(&ctx.tables.s[k]));
        ControlPair {
            mu1: SampledSignal::new(scen.grid, mu1).expect("grid-sized control"),
            mu2,
        }
    }

    pub fn synthesize(
        &self,
        ctx: &SolverContext,
        u_traj: &Trajectory,
        v_traj: &SampledSignal<SpectralState>,
    ) -> Result<ControlPair> {
        let frozen = ctx.frozen_terms(u_traj)?;
        let p = terminal_functional(ctx, &frozen, v_traj)?;
        Ok(self.synthesize_from_p(ctx, &p))
    }
}

/// `μ₁(t) = B₁* T(a - t) R P`, `μ₂ = B₂* S(a) R P` with `R` chosen by the
/// scenario's [`ControlLaw`].
pub fn synthesize_controls(
    ctx: &SolverContext,
    u_traj: &Trajectory,
    v_traj: &SampledSignal<SpectralState>,
    lambda: f64,
) -> Result<ControlPair> {
    ControlSynthesizer::new(ctx, lambda)?.synthesize(ctx, u_traj, v_traj)
}

/// `P` for a given trajectory.
pub fn p_operator(ctx: &SolverContext, u_traj: &Trajectory, v_traj: &SampledSignal<SpectralState>) -> Result<SpectralState> {
    let frozen = ctx.frozen_terms(u_traj)?;
    terminal_functional(ctx, &frozen, v_traj)
}
