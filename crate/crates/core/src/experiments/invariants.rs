use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::dynamics::{contraction_estimate, ControlSpec, NamedControl, Scenario, ScenarioConfig, SolverContext};
use crate::error::{Error, Result};
use crate::fracops::{bound_check_smoothing, frac_integral, propagator_bounds, s_alpha_apply};
use crate::grammian::{build_gamma1, build_gamma2, resolvent_decay, ControlOperator, Resolvent};
use crate::grid::{SampledSignal, TimeGrid};
use crate::quadrature::{convolve, ConvolutionWeights};
use crate::special_fn::{density_integral, density_laplace, gamma_fn, mittag_leffler, FractionalOrder, MLParams};
use crate::spectral::{norm_q, Projector, SobolevIndex, SpectralOperator, SpectralState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    SpecialFn,
    Spectral,
    Fracops,
    Quadrature,
    Grammian,
    Dynamics,
    Experiments,
    All,
}

const MODULES: [Suite; 7] = [
    Suite::SpecialFn,
    Suite::Spectral,
    Suite::Fracops,
    Suite::Quadrature,
    Suite::Grammian,
    Suite::Dynamics,
    Suite::Experiments,
];

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "special_fn" => Suite::SpecialFn,
            "spectral" => Suite::Spectral,
            "fracops" => Suite::Fracops,
            "quadrature" => Suite::Quadrature,
            "grammian" => Suite::Grammian,
            "dynamics" => Suite::Dynamics,
            "experiments" => Suite::Experiments,
            "all" => Suite::All,
            other => {
                return Err(Error::invalid(format!(
                    "unknown suite '{other}' (expected special_fn, spectral, fracops, quadrature, grammian, dynamics, experiments or all)"
                )))
            }
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Suite::SpecialFn => "special_fn",
            Suite::Spectral => "spectral",
            Suite::Fracops => "fracops",
            Suite::Quadrature => "quadrature",
            Suite::Grammian => "grammian",
            Suite::Dynamics => "dynamics",
            Suite::Experiments => "experiments",
            Suite::All => "all",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantResult {
    pub module: Suite,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantSummary {
    pub suite: Suite,
    pub passed: usize,
    pub failed: usize,
    pub results: Vec<InvariantResult>,
}

impl InvariantSummary {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }
}

type Outcome = Result<(bool, String)>;
type CheckFn = fn() -> Outcome;

fn ord(a: f64) -> FractionalOrder {
    FractionalOrder::new(a).expect("valid order")
}

fn ml(alpha: f64, beta: f64, z: f64) -> Result<f64> {
    mittag_leffler(MLParams::new(alpha, beta)?, z)
}

fn max_dev(pairs: impl Iterator<Item = Result<(f64, f64)>>) -> Result<f64> {
    let mut worst = 0.0f64;
    for p in pairs {
        let (a, b) = p?;
        worst = worst.max((a - b).abs());
    }
    Ok(worst)
}

fn verdict(worst: f64, tol: f64) -> Outcome {
    Ok((worst <= tol, format!("max deviation {worst:.3e} (tolerance {tol:.0e})")))
}

fn ml_exponential() -> Outcome {
    let w = max_dev((0..=40).map(|i| {
        let x = -10.0 + 15.0 * i as f64 / 40.0;
        Ok((ml(1.0, 1.0, x)?, x.exp()))
    }))?;
    verdict(w, 1e-10)
}

fn ml_cosine() -> Outcome {
    let w = max_dev((0..=60).map(|i| {
        let x = 0.1 * i as f64;
        Ok((ml(2.0, 1.0, -x * x)?, x.cos()))
    }))?;
    verdict(w, 1e-8)
}

fn density_moments() -> Outcome {
    let mut worst = 0.0f64;
    for a in [0.3, 0.5, 0.7, 0.9] {
        let o = ord(a);
        worst = worst.max((density_integral(o, |_| 1.0, 40.0)? - 1.0).abs());
        for z in [0.1, 1.0, 5.0, 10.0] {
            worst = worst.max((density_laplace(o, z)? - ml(a, 1.0, -z)?).abs());
        }
    }
    verdict(worst, 1e-6)
}

fn complete_monotonicity() -> Outcome {
    // E_α(-x) for α ≤ 1 is positive and decreasing
    let mut ok = true;
    for a in [0.2, 0.5, 0.8, 1.0] {
        let mut prev = f64::INFINITY;
        for i in 0..=200 {
            let v = ml(a, 1.0, -0.25 * i as f64)?;
            ok &= v > 0.0 && v <= prev * (1.0 + 1e-14);
            prev = v;
        }
    }
    Ok((ok, "E_α(-x) positive and non-increasing on [0, 50]".into()))
}

fn spectral_round_trip() -> Outcome {
    let op = SpectralOperator::new(16)?;
    let proj = Projector::new(&op);
    let mut worst = 0.0f64;
    for n in 1..=16 {
        let unit = SpectralState::unit(16, n)?;
        let back = proj.project_samples(&proj.reconstruct_samples(&unit));
        worst = worst.max((&back - &unit).norm());
    }
    verdict(worst, 1e-10)
}

fn spectral_norms() -> Outcome {
    let op = SpectralOperator::new(16)?;
    let s = SpectralState::new((1..=16).map(|n| 1.0 / n as f64).collect());
    let norms: Vec<f64> = [0.0, 0.25, 0.5, 0.75]
        .iter()
        .map(|&q| SobolevIndex::new(q).map(|q| norm_q(&s, q)))
        .collect::<Result<_>>()?;
    let monotone = norms.windows(2).all(|w| w[1] >= w[0]);
    let eig = op.eigenvalues().iter().enumerate().all(|(i, &l)| l == -(((i + 1) * (i + 1)) as f64));
    let inv = op.inverse_power_norm(SobolevIndex::new(0.5)?) <= 1.0;
    Ok((monotone && eig && inv, format!("‖s‖_q for q = 0, 0.25, 0.5, 0.75: {norms:.4?}")))
}

fn propagator_bound() -> Outcome {
    let op = SpectralOperator::new(32)?;
    let grid = TimeGrid::new(1.0, 256)?;
    let mut ok = true;
    let mut detail = String::new();
    for a in [0.3, 0.5, 0.9] {
        let b = propagator_bounds(ord(a), &grid, &op)?;
        ok &= b.sup_s <= 1.0 + 1e-9 && b.sup_t <= b.t_bound + 1e-9;
        detail += &format!("α={a}: sup S {:.6}, sup T {:.6} ≤ {:.6}; ", b.sup_s, b.sup_t, b.t_bound);
    }
    Ok((ok, detail))
}

fn identity_at_zero() -> Outcome {
    let s = SpectralState::new(vec![1.0, -2.0, 0.5, 3.0]);
    let w = (&s_alpha_apply(0.0, &s, ord(0.5))? - &s).norm();
    verdict(w, 0.0)
}

fn fractional_integral_of_one() -> Outcome {
    let grid = TimeGrid::new(1.0, 64)?;
    let f = SampledSignal::from_fn(grid, |_| 1.0);
    let i = frac_integral(&f, ord(0.5))?;
    verdict((i.last() - 1.0 / gamma_fn(1.5)?).abs(), 1e-10)
}

fn strong_continuity() -> Outcome {
    let s = SpectralState::new(vec![1.0, 0.5, 0.25, 0.125]);
    let jump = |n: usize| -> Result<f64> {
        let grid = TimeGrid::new(1.0, n)?;
        let states = grid
            .nodes()
            .iter()
            .map(|&t| s_alpha_apply(t, &s, ord(0.9)))
            .collect::<Result<Vec<_>>>()?;
        Ok(states.windows(2).map(|w| (&w[1] - &w[0]).norm()).fold(0.0, f64::max))
    };
    let (a, b) = (jump(128)?, jump(256)?);
    Ok((b <= 0.6 * a, format!("max jump {a:.3e} → {b:.3e} (α = 0.9)")))
}

fn smoothing_bounded() -> Outcome {
    let r = bound_check_smoothing(ord(0.5), &TimeGrid::new(1.0, 256)?, SobolevIndex::new(0.5)?, &SpectralOperator::new(16)?)?;
    Ok((r.bounded, format!("empirical constant {:.4}", r.empirical_constant)))
}

fn quadrature_exactness() -> Outcome {
    let mut worst = 0.0f64;
    for (i, &a) in [0.1, 0.3, 0.5, 0.7, 0.9, 1.0].iter().enumerate() {
        for (j, &t) in [0.3, 1.0, 2.5].iter().enumerate() {
            let (c0, c1) = (1.0 - 0.4 * i as f64, 0.7 + 0.9 * j as f64);
            let grid = TimeGrid::new(t, 40)?;
            let w = ConvolutionWeights::build(ord(a), grid);
            let phi = SampledSignal::from_fn(grid, |s| c0 + c1 * s);
            let got = convolve(&w, &phi, 40)?;
            // ∫_0^t (t-s)^{α-1}(c₀ + c₁ s) ds
            let exact = c0 * t.powf(a) / a + c1 * t.powf(a + 1.0) / (a * (a + 1.0));
            worst = worst.max((got - exact).abs() / exact.abs().max(1.0));
        }
    }
    verdict(worst, 1e-12)
}

fn gramian_structure() -> Outcome {
    let op = SpectralOperator::new(8)?;
    let b = ControlOperator::paired(8);
    let grid = TimeGrid::new(1.0, 256)?;
    let g1 = build_gamma1(&op, &b, ord(0.5), &grid)?;
    let g2 = build_gamma2(&op, &b, ord(0.5), 1.0)?;
    let mut worst = 0.0f64;
    for g in [&g1, &g2, &g1.combined(&g2)?] {
        for lambda in [1.0, 1e-3, 1e-6] {
            let r = Resolvent::new(lambda, g)?;
            let v = SpectralState::new((1..=8).map(|n| (n as f64).sin()).collect());
            worst = worst.max(r.residual(&r.apply(&v), &v) / v.norm());
        }
    }
    Ok((
        worst <= 1e-10,
        format!("Γ₁, Γ₂, Γ₁+Γ₂ symmetric PSD; worst resolvent residual {worst:.3e}"),
    ))
}

fn scalar_heat_gramians() -> Outcome {
    let op = SpectralOperator::new(2)?;
    let b = ControlOperator::identity(2);
    let g1 = build_gamma1(&op, &b, ord(1.0), &TimeGrid::new(1.0, 1024)?)?;
    let g2 = build_gamma2(&op, &b, ord(1.0), 1.0)?;
    let e1 = (g1.matrix()[(0, 0)] - (1.0 - (-2.0f64).exp()) / 2.0).abs();
    let e2 = (g2.matrix()[(0, 0)] - (-2.0f64).exp()).abs();
    Ok((e1 <= 1e-6 && e2 <= 1e-10, format!("Γ₁ error {e1:.3e}, Γ₂ error {e2:.3e}")))
}

fn zero_control_constant() -> Outcome {
    let op = SpectralOperator::new(4)?;
    let g = build_gamma1(&op, &ControlOperator::zero(4, 4), ord(0.5), &TimeGrid::new(1.0, 64)?)?;
    let basis: Vec<_> = (1..=4).map(|n| SpectralState::unit(4, n)).collect::<Result<_>>()?;
    let r = resolvent_decay(&g, &basis, &[1.0, 1e-3, 1e-6])?;
    let constant = r.traces.iter().all(|t| t.norms.iter().all(|&v| (v - 1.0).abs() < 1e-14));
    Ok((constant, "B = 0: ‖λR(λ,Γ)x‖ = ‖x‖ for all λ".into()))
}

fn reference_config(scale: f64, n_steps: usize) -> ScenarioConfig {
    let mut c = ScenarioConfig::new(0.5, 1.0);
    c.n_steps = n_steps;
    c.g.scale = scale;
    c.h = vec![
        crate::dynamics::NonlocalTerm { c: 0.1, t: 0.3 },
        crate::dynamics::NonlocalTerm { c: 0.05, t: 0.6 },
    ];
    c.forcing.kernel = "expkernel:1,1".into();
    c.forcing.xi = "sinx:0.5".into();
    c.u0 = vec![1.0, 0.5, 0.25];
    c.u_target = vec![0.5, -0.3, 0.2, 0.1];
    c
}

fn nonlocal_condition() -> Outcome {
    let scen = Scenario::new(reference_config(0.05, 256))?;
    let ctx = SolverContext::new(scen.clone())?;
    let sol = ctx.solve(1e-2)?;
    let h = crate::dynamics::eval_h(&sol.frozen, &scen)?;
    let lhs = &(&sol.trajectory.values()[0] + &h) - &(&scen.b2.apply(&sol.controls.mu2) + &scen.u0);
    verdict(lhs.norm(), 1e-12)
}

fn linear_fast_convergence() -> Outcome {
    let mut c = reference_config(0.0, 256);
    c.h.clear();
    let ctx = SolverContext::new(Scenario::new(c)?)?;
    let d = ctx.solve(1e-3)?.diagnostics;
    Ok((d.iterations <= 3, format!("{} iterations", d.iterations)))
}

fn contraction_linear_in_scale() -> Outcome {
    let k1 = contraction_estimate(&Scenario::new(reference_config(0.05, 256))?)?.k;
    let k2 = contraction_estimate(&Scenario::new(reference_config(0.1, 256))?)?.k;
    let k0 = contraction_estimate(&Scenario::new(reference_config(0.0, 256))?)?.k;
    Ok((
        k0 == 0.0 && (k2 - 2.0 * k1).abs() <= 1e-12 * k2,
        format!("K(0) = {k0}, K(0.05) = {k1:.4}, K(0.1) = {k2:.4}"),
    ))
}

fn small_scale_contraction() -> Outcome {
    let ctx = SolverContext::new(Scenario::new(reference_config(0.002, 256))?)?;
    let d = ctx.solve(1e-2)?.diagnostics;
    let r = d.empirical_ratio.unwrap_or(f64::NAN);
    Ok((
        r <= d.contraction_estimate_k + 0.1,
        format!("observed ratio {r:.4}, K = {:.4}", d.contraction_estimate_k),
    ))
}

fn small_linear_config() -> ScenarioConfig {
    let mut c = ScenarioConfig::new(0.5, 1.0);
    c.n_modes = 8;
    c.n_steps = 128;
    c.b1 = ControlSpec::Named(NamedControl::Identity);
    c.b2 = ControlSpec::Named(NamedControl::Identity);
    c.u0 = vec![1.0, 0.5];
    c.u_target = vec![0.3, -0.2, 0.1];
    c
}

fn csv_determinism() -> Outcome {
    let scen = Scenario::new(small_linear_config())?;
    let a = super::sweep(&scen)?.to_csv()?;
    let b = super::sweep(&scen)?.to_csv()?;
    Ok((a == b, format!("{} bytes", a.len())))
}

fn sweep_monotone() -> Outcome {
    let r = super::sweep(&Scenario::new(small_linear_config())?)?;
    let e = r.terminal_errors();
    let ok = r.all_converged() && e.windows(2).all(|w| w[1] < w[0]);
    Ok((ok, format!("terminal errors {:.3e} → {:.3e}", e[0], e[e.len() - 1])))
}

fn checks(module: Suite) -> Vec<(&'static str, CheckFn)> {
    match module {
        Suite::SpecialFn => vec![
            ("E_{1,1}(x) = e^x on [-10, 5]", ml_exponential as CheckFn),
            ("E_{2,1}(-x²) = cos x on [0, 6]", ml_cosine),
            ("density normalisation and Laplace transform", density_moments),
            ("complete monotonicity of E_α(-x)", complete_monotonicity),
        ],
        Suite::Spectral => vec![
            ("project ∘ reconstruct is the identity", spectral_round_trip as CheckFn),
            ("H_q norms increase with q", spectral_norms),
        ],
        Suite::Fracops => vec![
            ("propagator bounds with M = 1", propagator_bound as CheckFn),
            ("S_α(0) = I", identity_at_zero),
            ("I^α 1 = t^α/Γ(1+α)", fractional_integral_of_one),
            ("strong continuity of S_α", strong_continuity),
            ("‖(-A)^q T_α(t)‖ t^{qα} bounded", smoothing_bounded),
        ],
        Suite::Quadrature => vec![("product weights exact on linear functions", quadrature_exactness as CheckFn)],
        Suite::Grammian => vec![
            ("Gramian structure and resolvent residual", gramian_structure as CheckFn),
            ("α = 1 scalar Gramians", scalar_heat_gramians),
            ("B = 0 gives constant resolvent traces", zero_control_constant),
        ],
        Suite::Dynamics => vec![
            ("nonlocal condition at t = 0", nonlocal_condition as CheckFn),
            ("linear scenario converges in ≤ 3 iterations", linear_fast_convergence),
            ("contraction estimate linear in the arctan scale", contraction_linear_in_scale),
            ("Picard rate within K + 0.1 at small scale", small_scale_contraction),
        ],
        Suite::Experiments => vec![
            ("CSV byte-identical across runs", csv_determinism as CheckFn),
            ("linear sweep strictly decreasing", sweep_monotone),
        ],
        Suite::All => Vec::new(),
    }
}

/// Runs the selected batch of invariants; a check that errors counts as failed.
pub fn run_invariant_suite(suite: Suite) -> InvariantSummary {
    let modules: Vec<Suite> = if suite == Suite::All { MODULES.to_vec() } else { vec![suite] };
    let mut results = Vec::new();
    for module in modules {
        for (name, check) in checks(module) {
            let clock = Instant::now();
            let (passed, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
            results.push(InvariantResult {
                module,
                name,
                passed,
                detail,
                seconds: clock.elapsed().as_secs_f64(),
            });
        }
    }
    let passed = results.iter().filter(|r| r.passed).count();
    InvariantSummary {
        suite,
        failed: results.len() - passed,
        passed,
        results,
    }
}
