use rayon::prelude::*;
use serde::Serialize;

use super::descriptors::Delay;
use super::scenario::Scenario;
use crate::error::{Error, Result};
use crate::fracops::{bound_check_smoothing, caputo_values, PropagatorTables};
use crate::grammian::{
    build_gamma1_from_tables, build_gamma2_from_diag, forcing_integrand, terminal_functional, ControlPair,
    ControlSynthesizer, Gramian,
};
use crate::grid::{SampledSignal, VectorSpace};
use crate::quadrature::ConvolutionWeights;
use crate::spectral::{norm_q, Projector, SobolevIndex, SpectralState};

pub type Trajectory = SampledSignal<SpectralState>;

/// `g` along the grid and `h`, evaluated at a frozen iterate.
#[derive(Debug, Clone)]
pub struct FrozenTerms {
    /// `g(t_k, u(σ(t_k)))`
    pub g: Vec<SpectralState>,
    pub h: SpectralState,
}

/// Everything that depends on the scenario but not on λ or the iterate.
#[derive(Debug)]
pub struct SolverContext {
    pub scenario: Scenario,
    pub projector: Projector,
    pub weights: ConvolutionWeights,
    pub tables: PropagatorTables,
    pub gamma1: Gramian,
    pub gamma2: Gramian,
    pub gamma_joint: Gramian,
    /// `∫_0^{t_k} b(t_k, s) exp ξ(·, δ(s)) ds`, projected
    pub forcing_integral: Vec<SpectralState>,
    /// forced selection `v(δ(t_k))`
    pub v: SampledSignal<SpectralState>,
    /// `sup_k ‖forcing_integral[k]‖`
    pub omega_bound: f64,
    pub contraction: ContractionEstimate,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ContractionEstimate {
    pub k: f64,
    /// Lipschitz constant of `g`
    pub l1: f64,
    /// empirical `αM_{1-p}Γ(1+p)/Γ(1+αp)`
    pub c_one_minus_p: f64,
    pub below_one: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FixedPointDiagnostics {
    pub lambda: f64,
    pub iterations: usize,
    /// `sup_k ‖u^{i+1}(t_k) - u^i(t_k)‖_q`
    pub sup_changes: Vec<f64>,
    pub contraction_estimate_k: f64,
    pub converged: bool,
    /// largest late-stage ratio of successive changes
    pub empirical_ratio: Option<f64>,
    pub relaxation: f64,
    pub terminal_error: f64,
    pub omega_bound: f64,
    pub resolvent_condition: f64,
}

#[derive(Debug, Clone)]
pub struct FixedPointSolution {
    /// last mild-solution output
    pub trajectory: Trajectory,
    /// iterate it was computed from
    pub frozen: Trajectory,
    pub controls: ControlPair,
    pub v: SampledSignal<SpectralState>,
    /// terminal functional at the frozen iterate
    pub p: SpectralState,
    pub diagnostics: FixedPointDiagnostics,
}

impl FixedPointSolution {
    pub fn terminal_error(&self) -> f64 {
        self.diagnostics.terminal_error
    }
}

/// Linear interpolation of `traj` at `delay(t)`.
pub fn delayed_sample(traj: &Trajectory, delay: &Delay, t: f64) -> Result<SpectralState> {
    let d = delay.eval(t);
    let slack = 1e-12 * traj.grid().horizon();
    if !(d >= -slack && d <= t + slack) {
        return Err(Error::FutureAccess { t, delayed: d });
    }
    traj.interpolate(d.clamp(0.0, t.min(traj.grid().horizon())))
}

/// Pointwise `scale · x · arctan u(x)`.
pub fn g_pointwise(scale: f64, x: f64, u: f64) -> f64 {
    scale * x * u.atan()
}

fn g_projected(projector: &Projector, scale: f64, u: &SpectralState) -> SpectralState {
    if scale == 0.0 {
        return SpectralState::zeros(u.len());
    }
    let samples = projector.reconstruct_samples(u);
    let values: Vec<f64> = projector
        .nodes()
        .iter()
        .zip(&samples)
        .map(|(&x, &v)| g_pointwise(scale, x, v))
        .collect();
    projector.project_samples(&values)
}

/// `g(t, u)` for an already delayed state: reconstruct on the collocation
/// grid, apply `scale · x · arctan`, project back.
pub fn eval_g(_t: f64, u_delayed: &SpectralState, scen: &Scenario) -> SpectralState {
    g_projected(&Projector::new(&scen.op), scen.g_scale, u_delayed)
}

/// `h(u) = Σ c_k u(t_k)`.
pub fn eval_h(traj: &Trajectory, scen: &Scenario) -> Result<SpectralState> {
    let mut h = SpectralState::zeros(scen.op.n_modes());
    for term in &scen.h {
        h.axpy(term.c, &traj.interpolate(term.t)?);
    }
    Ok(h)
}

fn node_index(scen: &Scenario, t: f64) -> Result<usize> {
    let s = t / scen.grid.step();
    let k = s.round();
    if (s - k).abs() > 1e-9 || k < 0.0 || k as usize > scen.grid.n_steps() {
        return Err(Error::Domain(format!("t = {t} is not a grid node")));
    }
    Ok(k as usize)
}

/// Projections of `exp ξ(·, δ(t_j))` at every node.
fn exp_xi_projections(scen: &Scenario, projector: &Projector) -> Vec<SpectralState> {
    scen.grid
        .nodes()
        .par_iter()
        .map(|&t| {
            let tau = scen.delta.eval(t);
            projector.project(|x| scen.xi.eval(x, tau).exp())
        })
        .collect()
}

fn forcing_at(scen: &Scenario, exp_xi: &[SpectralState], k: usize) -> SpectralState {
    let nodes = scen.grid.nodes();
    let weights = scen.grid.trapezoid_weights(k);
    let mut out = SpectralState::zeros(scen.op.n_modes());
    for (j, w) in weights.iter().enumerate() {
        let b = scen.selected_kernel(nodes[k], nodes[j]);
        if b != 0.0 && *w != 0.0 {
            out.axpy(w * b, &exp_xi[j]);
        }
    }
    out
}

/// Selection `v(δ(t)) = ∫_0^t b(t, s) exp ξ(·, δ(s)) ds - B₁ μ₁(t)` at a grid
/// node `t`, with the memory integral by the trapezoid rule.
pub fn eval_forcing_selection(t: f64, mu1_at_t: &nalgebra::DVector<f64>, scen: &Scenario) -> Result<SpectralState> {
    let k = node_index(scen, t)?;
    if mu1_at_t.len() != scen.b1.n_controls() {
        return Err(Error::Dimension("control vector does not match B₁".into()));
    }
    let projector = Projector::new(&scen.op);
    let exp_xi = exp_xi_projections(scen, &projector);
    Ok(&forcing_at(scen, &exp_xi, k) - &scen.b1.apply(mu1_at_t))
}

impl SolverContext {
    pub fn new(scenario: Scenario) -> Result<Self> {
        let scen = &scenario;
        let n = scen.op.n_modes();
        let k = scen.grid.n_steps();
        let projector = Projector::new(&scen.op);
        let weights = ConvolutionWeights::build(scen.order, scen.grid);
        let tables = PropagatorTables::build(scen.order, &scen.grid, n)?;
        let gamma1 = build_gamma1_from_tables(&scen.b1, scen.order, &scen.grid, &weights, &tables)?;
        let gamma2 = build_gamma2_from_diag(&scen.b2, scen.order, scen.grid.horizon(), &tables.s[k])?;
        let gamma_joint = gamma1.combined(&gamma2)?;

        let exp_xi = exp_xi_projections(scen, &projector);
        let forcing_integral: Vec<SpectralState> =
            (0..=k).into_par_iter().map(|i| forcing_at(scen, &exp_xi, i)).collect();
        let omega_bound = forcing_integral.iter().map(SpectralState::norm).fold(0.0, f64::max);
        // control-space image of the configured shape: B₁ B₁⁺ proj ξ(·, t)
        let v_values = if scen.xi.is_zero() {
            forcing_integral.clone()
        } else {
            scen.grid
                .nodes()
                .par_iter()
                .zip(&forcing_integral)
                .map(|(&t, f)| {
                    let shape = projector.project(|x| scen.xi.eval(x, t));
                    let mu_ref = scen.b1.pseudo_inverse_apply(&shape)?;
                    Ok(f - &scen.b1.apply(&mu_ref))
                })
                .collect::<Result<Vec<_>>>()?
        };
        let v = SampledSignal::new(scen.grid, v_values)?;
        let contraction = contraction_estimate(scen)?;
        Ok(Self {
            projector,
            weights,
            tables,
            gamma1,
            gamma2,
            gamma_joint,
            forcing_integral,
            v,
            omega_bound,
            contraction,
            scenario,
        })
    }

    pub fn eval_g(&self, u_delayed: &SpectralState) -> SpectralState {
        g_projected(&self.projector, self.scenario.g_scale, u_delayed)
    }

    pub fn frozen_terms(&self, traj: &Trajectory) -> Result<FrozenTerms> {
        let scen = &self.scenario;
        let n = scen.op.n_modes();
        let g = if scen.g_scale == 0.0 {
            vec![SpectralState::zeros(n); traj.len()]
        } else {
            scen.grid
                .nodes()
                .par_iter()
                .map(|&t| Ok(self.eval_g(&delayed_sample(traj, &scen.sigma, t)?)))
                .collect::<Result<Vec<_>>>()?
        };
        Ok(FrozenTerms {
            g,
            h: eval_h(traj, scen)?,
        })
    }

    /// `S_α(t) u₀` on the grid.
    pub fn free_evolution(&self) -> Trajectory {
        let u0 = &self.scenario.u0;
        SampledSignal::new(
            self.scenario.grid,
            self.tables.s.iter().map(|d| u0.hadamard(d)).collect(),
        )
        .expect("grid-sized table")
    }

    pub(crate) fn mild_from_terms(
        &self,
        controls: &ControlPair,
        v: &SampledSignal<SpectralState>,
        frozen: &FrozenTerms,
    ) -> Result<Trajectory> {
        let scen = &self.scenario;
        let n = scen.op.n_modes();
        if controls.mu1.len() != scen.grid.len() || v.len() != scen.grid.len() {
            return Err(Error::Dimension("controls or forcing not on the scenario grid".into()));
        }
        let base = &(&(&scen.b2.apply(&controls.mu2) + &scen.u0) - &frozen.h) - &frozen.g[0];
        let inputs: Vec<SpectralState> = v
            .values()
            .iter()
            .zip(controls.mu1.values())
            .map(|(vj, mj)| vj + &scen.b1.apply(mj))
            .collect();
        let states = (0..scen.grid.len())
            .into_par_iter()
            .map(|k| {
                let conv = self.weights.convolve_fn(k, SpectralState::zeros(n), |j| {
                    forcing_integrand(self, &frozen.g[j], &inputs[j], k - j)
                })?;
                let mut u = base.hadamard(&self.tables.s[k]);
                u.axpy(1.0, &frozen.g[k]);
                u.axpy(1.0, &conv);
                Ok(u)
            })
            .collect::<Result<Vec<_>>>()?;
        SampledSignal::new(scen.grid, states)
    }

    /// One application of the mild-solution map at a frozen iterate.
    pub fn mild_solution(
        &self,
        controls: &ControlPair,
        v: &SampledSignal<SpectralState>,
        frozen: &Trajectory,
    ) -> Result<Trajectory> {
        let terms = self.frozen_terms(frozen)?;
        self.mild_from_terms(controls, v, &terms)
    }

    fn sup_change(&self, a: &Trajectory, b: &Trajectory) -> f64 {
        let q = self.scenario.q;
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| norm_q(&(x - y), q))
            .fold(0.0, f64::max)
    }

    /// Picard iteration of the control-feedback map at the given λ.
    pub fn solve(&self, lambda: f64) -> Result<FixedPointSolution> {
        let scen = &self.scenario;
        let synth = ControlSynthesizer::new(self, lambda)?;
        let condition = match scen.control_law {
            crate::grammian::ControlLaw::Joint => crate::grammian::Resolvent::new(lambda, &self.gamma_joint)?.condition(),
            crate::grammian::ControlLaw::Separate => crate::grammian::Resolvent::new(lambda, &self.gamma1)?.condition(),
        };
        let mut u = self.free_evolution();
        let mut theta = scen.relaxation;
        let mut damped = false;
        let mut changes = Vec::new();
        for _ in 0..scen.max_iter {
            let frozen = self.frozen_terms(&u)?;
            let p = terminal_functional(self, &frozen, &self.v)?;
            let controls = synth.synthesize_from_p(self, &p);
            let mapped = self.mild_from_terms(&controls, &self.v, &frozen)?;
            let next = if theta < 1.0 { relax(&mapped, &u, theta) } else { mapped.clone() };
            let change = self.sup_change(&next, &u);
            changes.push(change);
            if !change.is_finite() {
                break;
            }
            if change <= scen.tol {
                let terminal_error = (&scen.u_target - mapped.last()).norm();
                let diagnostics = self.diagnostics(lambda, changes, true, theta, terminal_error, condition);
                return Ok(FixedPointSolution {
                    trajectory: mapped,
                    frozen: u,
                    controls,
                    v: self.v.clone(),
                    p,
                    diagnostics,
                });
            }
            if !damped && diverging(&changes) {
                theta *= 0.5;
                damped = true;
                log::info!("λ = {lambda:e}: Picard changes growing, relaxation halved to {theta}");
            }
            u = next;
        }
        let terminal_error = (&scen.u_target - u.last()).norm();
        Err(Error::PicardDivergence(Box::new(self.diagnostics(
            lambda,
            changes,
            false,
            theta,
            terminal_error,
            condition,
        ))))
    }

    /// Direct solution when `g = h = 0`: the control does not depend on the
    /// iterate, so one application of the map is exact.
    pub fn solve_linear_direct(&self, lambda: f64) -> Result<(Trajectory, ControlPair)> {
        if !self.scenario.is_linear() {
            return Err(Error::invalid("direct solve needs g = 0 and h = 0"));
        }
        let u = self.free_evolution();
        let frozen = self.frozen_terms(&u)?;
        let p = terminal_functional(self, &frozen, &self.v)?;
        let controls = ControlSynthesizer::new(self, lambda)?.synthesize_from_p(self, &p);
        Ok((self.mild_from_terms(&controls, &self.v, &frozen)?, controls))
    }

    fn diagnostics(
        &self,
        lambda: f64,
        sup_changes: Vec<f64>,
        converged: bool,
        relaxation: f64,
        terminal_error: f64,
        resolvent_condition: f64,
    ) -> FixedPointDiagnostics {
        FixedPointDiagnostics {
            lambda,
            iterations: sup_changes.len(),
            empirical_ratio: empirical_ratio(&sup_changes),
            sup_changes,
            contraction_estimate_k: self.contraction.k,
            converged,
            relaxation,
            terminal_error,
            omega_bound: self.omega_bound,
            resolvent_condition,
        }
    }
}

fn relax(mapped: &Trajectory, prev: &Trajectory, theta: f64) -> Trajectory {
    let values = mapped
        .values()
        .iter()
        .zip(prev.values())
        .map(|(m, p)| {
            let mut out = m.scaled(theta);
            out.axpy(1.0 - theta, p);
            out
        })
        .collect();
    SampledSignal::new(*prev.grid(), values).expect("same grid")
}

/// Three growing changes in a row, or one far above the first.
fn diverging(changes: &[f64]) -> bool {
    let n = changes.len();
    (n >= 3 && changes[n - 1] > changes[n - 2] && changes[n - 2] > changes[n - 3])
        || (n >= 2 && changes[n - 1] > 1e3 * changes[0])
}

/// Largest of the last three ratios of successive changes: the eventual
/// rate, after the transient while corrections travel along the time axis.
fn empirical_ratio(changes: &[f64]) -> Option<f64> {
    let ratios: Vec<f64> = changes.windows(2).map(|w| w[1] / w[0]).filter(|r| r.is_finite()).collect();
    if ratios.is_empty() {
        return None;
    }
    ratios[ratios.len().saturating_sub(3)..].iter().copied().reduce(f64::max)
}

/// `K = L₁[M‖A^{-p}‖ + ‖A^{-p}‖ + a^{pα}/(pα) · αM_{1-p}Γ(1+p)/Γ(1+αp)]` with
/// `M = 1` and the last factor measured on the scenario grid and modes.
pub fn contraction_estimate(scen: &Scenario) -> Result<ContractionEstimate> {
    let l1 = scen.g_scale.abs() * std::f64::consts::PI;
    let p = scen.p.value();
    let alpha = scen.order.alpha();
    let a = scen.grid.horizon();
    let c = bound_check_smoothing(scen.order, &scen.grid, SobolevIndex::new(1.0 - p)?, &scen.op)?.empirical_constant;
    let inv_norm = scen.op.inverse_power_norm(scen.p);
    let k = l1 * (inv_norm + inv_norm + a.powf(p * alpha) / (p * alpha) * c);
    Ok(ContractionEstimate {
        k,
        l1,
        c_one_minus_p: c,
        below_one: k < 1.0,
    })
}

/// Entry point with the scenario's own λ.
pub fn fixed_point_solve(scen: &Scenario) -> Result<FixedPointSolution> {
    SolverContext::new(scen.clone())?.solve(scen.lambda)
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub n_steps: usize,
    /// sup over `skip · a ≤ t ≤ (1 - skip) · a` (`t ≤ a` when `α = 1`) of the
    /// mode-`n` residual, `n = 1..`
    pub per_mode: Vec<f64>,
    pub max: f64,
    pub skip: f64,
}

/// Discrete Caputo derivative of `u - g(·, u(σ(·)))` against `A u + v + B₁μ₁`,
/// mode by mode for the low modes `n ≤ max(1, N/4)`.
pub fn residual_check(
    ctx: &SolverContext,
    traj: &Trajectory,
    controls: &ControlPair,
    v: &SampledSignal<SpectralState>,
) -> Result<ResidualReport> {
    let scen = &ctx.scenario;
    let n_max = (scen.op.n_modes() / 4).max(1);
    let frozen = ctx.frozen_terms(traj)?;
    let h = scen.grid.step();
    let n_steps = scen.grid.n_steps();
    let start = ((scen.residual_skip * n_steps as f64).ceil() as usize).max(1);
    // μ₁ inherits the (a - t)^α layer of T_α(a - t); skip it like the one at t = 0
    let stop = if scen.order.alpha() < 1.0 {
        n_steps - ((scen.residual_skip * n_steps as f64).ceil() as usize).min(n_steps - start)
    } else {
        n_steps
    };
    let forcing: Vec<SpectralState> = v
        .values()
        .iter()
        .zip(controls.mu1.values())
        .map(|(vj, mj)| vj + &scen.b1.apply(mj))
        .collect();
    let per_mode = (1..=n_max)
        .map(|n| {
            let w: Vec<f64> = traj
                .values()
                .iter()
                .zip(&frozen.g)
                .map(|(u, g)| u.mode(n) - g.mode(n))
                .collect();
            let d = caputo_values(&w, h, scen.order.alpha())?;
            let lam = -((n * n) as f64);
            Ok((start..=stop)
                .map(|k| (d[k] - (lam * traj.values()[k].mode(n) + forcing[k].mode(n))).abs())
                .fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ResidualReport {
        n_steps: scen.grid.n_steps(),
        max: per_mode.iter().copied().fold(0.0, f64::max),
        per_mode,
        skip: scen.residual_skip,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ScenarioConfig;
    use crate::grid::TimeGrid;
    use nalgebra::DVector;

    fn reference_json(scale: f64, n_steps: usize) -> String {
        format!(
            r#"{{"alpha": 0.5, "horizon": 1.0, "n_modes": 16, "n_steps": {n_steps},
              "g": {{"scale": {scale}}}, "h": [{{"c": 0.1, "t": 0.3}}, {{"c": 0.05, "t": 0.6}}],
              "forcing": {{"kernel": "expkernel:1,1", "xi": "sinx:0.5"}},
              "u0": [1.0, 0.5, 0.25], "u_target": [0.5, -0.3, 0.2, 0.1]}}"#
        )
    }

    fn scalar(alpha: f64) -> ScenarioConfig {
        let mut c = ScenarioConfig::new(alpha, 1.0);
        c.n_modes = 2;
        c.b1 = crate::dynamics::ControlSpec::Named(crate::dynamics::NamedControl::Identity);
        c.b2 = c.b1.clone();
        c.u0 = vec![1.0, 0.0];
        c
    }

    #[test]
    fn nonlocal_condition_at_origin() {
        let scen = Scenario::from_json(&reference_json(0.05, 128)).unwrap();
        let ctx = SolverContext::new(scen.clone()).unwrap();
        let sol = ctx.solve(1e-2).unwrap();
        let h = eval_h(&sol.frozen, &scen).unwrap();
        let expect = &(&scen.b2.apply(&sol.controls.mu2) + &scen.u0) - &h;
        let got = &sol.trajectory.values()[0];
        assert!((got - &expect).norm() < 1e-13 * (1.0 + expect.norm()));
    }

    #[test]
    fn free_evolution_without_inputs() {
        let mut c = scalar(0.6);
        c.b1 = crate::dynamics::ControlSpec::Named(crate::dynamics::NamedControl::Zero);
        c.b2 = c.b1.clone();
        c.u0 = vec![1.0, -2.0];
        let ctx = SolverContext::new(Scenario::new(c).unwrap()).unwrap();
        let zero = ControlPair::zero(ctx.scenario.grid, 2, 2);
        let u = ctx.mild_solution(&zero, &ctx.v, &ctx.free_evolution()).unwrap();
        for (k, t) in ctx.scenario.grid.nodes().into_iter().enumerate() {
            for n in 1..=2 {
                let e = crate::special_fn::mittag_leffler(crate::special_fn::MLParams { alpha: 0.6, beta: 1.0 }, -((n * n) as f64) * t.powf(0.6)).unwrap();
                assert!((u.values()[k].mode(n) - e * ctx.scenario.u0.mode(n)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn variation_of_constants_at_alpha_one() {
        let mut c = scalar(1.0);
        c.n_steps = 512;
        let ctx = SolverContext::new(Scenario::new(c).unwrap()).unwrap();
        let grid = ctx.scenario.grid;
        let mut controls = ControlPair::zero(grid, 2, 2);
        controls.mu1 = SampledSignal::from_fn(grid, |_| DVector::from_vec(vec![0.7, 0.0]));
        let u = ctx.mild_solution(&controls, &ctx.v, &ctx.free_evolution()).unwrap();
        for (k, t) in grid.nodes().into_iter().enumerate() {
            let exact = (-t).exp() + 0.7 * (1.0 - (-t).exp());
            assert!((u.values()[k].mode(1) - exact).abs() < 1e-6, "t = {t}");
        }
    }

    #[test]
    fn linear_scenario_converges_fast() {
        let text = reference_json(0.0, 128).replace(r#""h": [{"c": 0.1, "t": 0.3}, {"c": 0.05, "t": 0.6}],"#, "");
        let scen = Scenario::from_json(&text).unwrap();
        assert!(scen.is_linear());
        let ctx = SolverContext::new(scen).unwrap();
        let sol = ctx.solve(1e-3).unwrap();
        assert!(sol.diagnostics.iterations <= 3, "{:?}", sol.diagnostics.sup_changes);
        let (direct, _) = ctx.solve_linear_direct(1e-3).unwrap();
        for (a, b) in direct.values().iter().zip(sol.trajectory.values()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_scale_is_the_linear_problem() {
        let text = reference_json(0.0, 64).replace(r#""h": [{"c": 0.1, "t": 0.3}, {"c": 0.05, "t": 0.6}],"#, "");
        let a = SolverContext::new(Scenario::from_json(&text).unwrap()).unwrap();
        let sol = a.solve(1e-2).unwrap();
        let (direct, controls) = a.solve_linear_direct(1e-2).unwrap();
        assert_eq!(sol.trajectory.last(), direct.last());
        assert_eq!(sol.controls.mu2, controls.mu2);
    }

    #[test]
    fn picard_rate_within_estimate() {
        let scen = Scenario::from_json(&reference_json(0.002, 128)).unwrap();
        let ctx = SolverContext::new(scen).unwrap();
        assert!(ctx.contraction.k < 0.05);
        for lambda in [1.0, 1e-3] {
            let d = ctx.solve(lambda).unwrap().diagnostics;
            let r = d.empirical_ratio.unwrap();
            assert!(r <= d.contraction_estimate_k + 0.1, "λ = {lambda}: ratio {r}, K {}", d.contraction_estimate_k);
        }
    }

    #[test]
    fn contraction_estimate_is_linear_in_scale() {
        let k = |s: f64| contraction_estimate(&Scenario::from_json(&reference_json(s, 64)).unwrap()).unwrap();
        assert_eq!(k(0.0).k, 0.0);
        let (k1, k2) = (k(0.05), k(0.1));
        assert!(k1.below_one && k1.k > 0.0);
        assert!((k2.k - 2.0 * k1.k).abs() < 1e-12 * k2.k);
    }

    #[test]
    fn g_linearises_for_small_states() {
        let scen = Scenario::from_json(&reference_json(1.0, 16)).unwrap();
        let projector = Projector::new(&scen.op);
        let tiny = projector.project(|_| 1e-6);
        let g = eval_g(0.0, &tiny, &scen);
        let lin = projector.project(|x| 1e-6 * x);
        // the truncated series of a constant overshoots near the ends
        let rel = (&g - &lin).norm() / lin.norm();
        assert!(rel < 0.05, "{rel}");
        assert_eq!(g_pointwise(2.0, 0.5, 1.0), 2.0 * 0.5 * std::f64::consts::FRAC_PI_4);
    }

    #[test]
    fn eval_h_sums_interpolated_states() {
        let scen = Scenario::from_json(&reference_json(0.0, 10)).unwrap();
        let traj = SampledSignal::from_fn(scen.grid, |t| SpectralState::unit(16, 1).unwrap().scaled(t));
        let h = eval_h(&traj, &scen).unwrap();
        assert!((h.mode(1) - (0.1 * 0.3 + 0.05 * 0.6)).abs() < 1e-15);
        assert!(h.coeffs().iter().skip(1).all(|&c| c == 0.0));
    }

    #[test]
    fn forcing_selection_constant_kernel() {
        let mut c = ScenarioConfig::new(0.5, 1.0);
        c.n_modes = 4;
        c.n_steps = 8;
        c.forcing.kernel = "const:1".into();
        let scen = Scenario::new(c).unwrap();
        let mu = DVector::zeros(scen.b1.n_controls());
        let v = eval_forcing_selection(0.5, &mu, &scen).unwrap();
        let one = Projector::new(&scen.op).project(|_| 1.0);
        assert!((&v - &one.scaled(0.5)).norm() < 1e-12);
        assert!(eval_forcing_selection(0.3, &mu, &scen).is_err());
    }

    #[test]
    fn future_access_is_rejected() {
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let traj = SampledSignal::from_fn(grid, |_| SpectralState::zeros(2));
        assert!(matches!(
            delayed_sample(&traj, &"poly:0,2".parse().unwrap(), 0.5),
            Err(Error::FutureAccess { .. })
        ));
        assert!(delayed_sample(&traj, &Delay::Identity, 0.5).is_ok());
    }

    #[test]
    fn residual_decreases_under_refinement() {
        let text = |n: usize| reference_json(0.0, n).replace(r#""h": [{"c": 0.1, "t": 0.3}, {"c": 0.05, "t": 0.6}],"#, "");
        let report = |n: usize| {
            let ctx = SolverContext::new(Scenario::from_json(&text(n)).unwrap()).unwrap();
            let sol = ctx.solve(1e-2).unwrap();
            residual_check(&ctx, &sol.trajectory, &sol.controls, &sol.v).unwrap()
        };
        let (coarse, fine) = (report(128), report(256));
        assert_eq!(coarse.per_mode.len(), 4);
        for (c, f) in coarse.per_mode.iter().zip(&fine.per_mode) {
            assert!(f < c, "{f} vs {c}");
        }
    }

    #[test]
    fn heat_residual_is_small() {
        let mut c = scalar(1.0);
        c.n_steps = 1024;
        c.b1 = crate::dynamics::ControlSpec::Named(crate::dynamics::NamedControl::Zero);
        c.b2 = c.b1.clone();
        c.residual_skip = 0.0;
        let ctx = SolverContext::new(Scenario::new(c).unwrap()).unwrap();
        let sol = ctx.solve(1.0).unwrap();
        let r = residual_check(&ctx, &sol.trajectory, &sol.controls, &sol.v).unwrap();
        assert!(r.max < 1e-3, "{}", r.max);
    }
}
