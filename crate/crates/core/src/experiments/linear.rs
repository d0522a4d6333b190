use std::path::Path;

use nalgebra::DVector;
use serde::Serialize;

use crate::dynamics::{Scenario, SolverContext};
use crate::error::Result;
use crate::fracops::s_alpha_diag;
use crate::grammian::{resolvent_decay, ControlLaw, Gramian, DecayReport, Resolvent};
use crate::spectral::SpectralState;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SteeringRow {
    pub lambda: f64,
    pub measured: f64,
    pub predicted: f64,
    pub rel_error: f64,
    pub resolvent_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LinearCheckReport {
    pub n_modes: usize,
    pub b1_rank: usize,
    pub b2_rank: usize,
    /// ascending
    pub gamma1_eigenvalues: Vec<f64>,
    pub gamma2_eigenvalues: Vec<f64>,
    pub gamma1: DecayReport,
    pub gamma2: DecayReport,
    pub steering: Vec<SteeringRow>,
    pub checks: Vec<Check>,
}

impl LinearCheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn basis(n: usize) -> Vec<SpectralState> {
    (1..=n).map(|k| SpectralState::unit(n, k).expect("in range")).collect()
}

/// `‖λ R(λ, Γ) P‖` from the eigendecomposition of `Γ`:
/// `(Σ_k (λ/(λ+γ_k))² ⟨e_k, P⟩²)^{1/2}`.
pub fn predicted_terminal_error(gamma: &Gramian, lambda: f64, p: &SpectralState) -> f64 {
    let eig = gamma.eigen();
    let p = DVector::from_column_slice(p.coeffs());
    eig.eigenvalues
        .iter()
        .zip(eig.eigenvectors.column_iter())
        .map(|(&g, e)| (lambda / (lambda + g.max(0.0)) * e.dot(&p)).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// `‖(λR₁ + λR₂ - I) P‖` for the separate-resolvent law.
fn predicted_separate(g1: &Gramian, g2: &Gramian, lambda: f64, p: &SpectralState) -> Result<f64> {
    let r1 = Resolvent::new(lambda, g1)?.apply(p).scaled(lambda);
    let r2 = Resolvent::new(lambda, g2)?.apply(p).scaled(lambda);
    Ok((&(&r1 + &r2) - p).norm())
}

fn decay_check(name: &str, report: &DecayReport, rank: usize) -> Check {
    let decaying = report.traces.iter().filter(|t| t.decaying).count();
    let total = report.traces.len();
    if rank == 0 {
        let constant = report
            .traces
            .iter()
            .all(|t| t.norms.iter().all(|&v| (v - t.norms[0]).abs() <= 1e-12 * t.norms[0].max(1.0)));
        Check {
            name: format!("{name}: B = 0 leaves λR(λ,Γ)x constant"),
            passed: constant && decaying == 0,
            detail: format!("{decaying}/{total} decaying"),
        }
    } else {
        let worst = report.traces.iter().map(|t| t.ratio).fold(0.0, f64::max);
        Check {
            name: format!("{name}: λR(λ,Γ)x decays for every basis vector"),
            passed: decaying == total,
            detail: format!("{decaying}/{total} decaying, worst final/initial ratio {worst:.3e}"),
        }
    }
}

/// Resolvent decay for both Gramians and the linear steering
/// problem (`g = h = 0`, no forcing) against its eigenmode prediction.
pub fn linear_check(scen: &Scenario) -> Result<LinearCheckReport> {
    let lin = scen.linearized()?;
    let ctx = SolverContext::new(lin.clone())?;
    let n = lin.op.n_modes();
    let lambdas = &lin.lambdas;

    let gamma1 = resolvent_decay(&ctx.gamma1, &basis(n), lambdas)?;
    let gamma2 = resolvent_decay(&ctx.gamma2, &basis(n), lambdas)?;
    let b1_rank = lin.b1.rank();
    let b2_rank = lin.b2.rank();

    // P = u_a - S_α(a) u₀, computed without the solver's tables
    let s_a = s_alpha_diag(lin.order, lin.grid.horizon(), n)?;
    let p = &lin.u_target - &lin.u0.hadamard(&s_a);

    let mut steering = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let (traj, _) = ctx.solve_linear_direct(lambda)?;
        let measured = (&lin.u_target - traj.last()).norm();
        let predicted = match lin.control_law {
            ControlLaw::Joint => predicted_terminal_error(&ctx.gamma_joint, lambda, &p),
            ControlLaw::Separate => predicted_separate(&ctx.gamma1, &ctx.gamma2, lambda, &p)?,
        };
        let rel_error = (measured - predicted).abs() / predicted.max(f64::MIN_POSITIVE);
        let resolvent = Resolvent::new(lambda, &ctx.gamma_joint)?;
        let x = resolvent.apply(&p);
        let resolvent_residual = resolvent.residual(&x, &p) / p.norm().max(f64::MIN_POSITIVE);
        steering.push(SteeringRow {
            lambda,
            measured,
            predicted,
            rel_error,
            resolvent_residual,
        });
    }

    let worst_rel = steering.iter().map(|r| r.rel_error).fold(0.0, f64::max);
    let worst_res = steering.iter().map(|r| r.resolvent_residual).fold(0.0, f64::max);
    let monotone = steering.windows(2).all(|w| w[1].measured <= w[0].measured);
    let checks = vec![
        decay_check("Γ₁", &gamma1, b1_rank),
        decay_check("Γ₂", &gamma2, b2_rank),
        Check {
            name: "terminal error matches the eigenmode prediction within 1e-6".into(),
            passed: steering.iter().all(|r| r.rel_error <= 1e-6 || (r.measured - r.predicted).abs() <= 1e-14),
            detail: format!("worst relative deviation {worst_rel:.3e}"),
        },
        Check {
            name: "resolvent residual below 1e-10".into(),
            passed: worst_res <= 1e-10,
            detail: format!("worst relative residual {worst_res:.3e}"),
        },
        Check {
            name: "terminal error non-increasing as λ decreases".into(),
            passed: monotone,
            detail: String::new(),
        },
    ];

    Ok(LinearCheckReport {
        n_modes: n,
        b1_rank,
        b2_rank,
        gamma1_eigenvalues: ctx.gamma1.eigenvalues().to_vec(),
        gamma2_eigenvalues: ctx.gamma2.eigenvalues().to_vec(),
        gamma1,
        gamma2,
        steering,
        checks,
    })
}

pub fn run_linear_check(config: &Path) -> Result<LinearCheckReport> {
    linear_check(&Scenario::load(config)?)
}
