//! Scenario files: the complete problem datum, validated once on load.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::descriptors::{ControlShape, Delay, Kernel};
use crate::error::{Error, Result};
use crate::grammian::{ControlLaw, ControlOperator};
use crate::grid::TimeGrid;
use crate::special_fn::FractionalOrder;
use crate::spectral::{SobolevIndex, SpectralOperator, SpectralState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedControl {
    /// `(Bμ)_1 = 2μ_2`, `(Bμ)_n = μ_n` for `n ≥ 2`, controls indexed `2..N`
    Paired,
    Identity,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ControlSpec {
    Named(NamedControl),
    Matrix { matrix: Vec<Vec<f64>> },
}

impl Default for ControlSpec {
    fn default() -> Self {
        ControlSpec::Named(NamedControl::Paired)
    }
}

impl ControlSpec {
    pub fn resolve(&self, n_modes: usize) -> Result<ControlOperator> {
        match self {
            ControlSpec::Named(NamedControl::Paired) => Ok(ControlOperator::paired(n_modes)),
            ControlSpec::Named(NamedControl::Identity) => Ok(ControlOperator::identity(n_modes)),
            ControlSpec::Named(NamedControl::Zero) => Ok(ControlOperator::zero(n_modes, n_modes)),
            ControlSpec::Matrix { matrix } => {
                let op = ControlOperator::from_rows(matrix)?;
                if op.n_modes() != n_modes {
                    return Err(Error::Scenario(format!(
                        "control matrix has {} rows for {n_modes} modes",
                        op.n_modes()
                    )));
                }
                Ok(op)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GSpec {
    /// `g(t, u) = scale · x · arctan u(x)`
    #[serde(default = "one")]
    pub scale: f64,
}

impl Default for GSpec {
    fn default() -> Self {
        Self { scale: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlocalTerm {
    pub c: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    #[default]
    Midpoint,
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingSpec {
    /// kernel `b(t, s)`
    #[serde(default = "zero_descriptor")]
    pub kernel: String,
    /// control shape `ξ(x, τ)`
    #[serde(default = "zero_descriptor")]
    pub xi: String,
    /// optional band `[b + lo, b + hi]` making the forcing set-valued
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<[f64; 2]>,
    #[serde(default)]
    pub selection: Selection,
}

impl Default for ForcingSpec {
    fn default() -> Self {
        Self {
            kernel: zero_descriptor(),
            xi: zero_descriptor(),
            band: None,
            selection: Selection::Midpoint,
        }
    }
}

fn one() -> f64 {
    1.0
}
fn zero_descriptor() -> String {
    "zero".into()
}
fn sin_descriptor() -> String {
    "sin".into()
}
fn default_modes() -> usize {
    16
}
fn default_steps() -> usize {
    256
}
fn default_lambda() -> f64 {
    1e-2
}
fn default_lambdas() -> Vec<f64> {
    (0..=6).map(|k| 10f64.powi(-k)).collect()
}
fn default_p() -> f64 {
    0.5
}
fn default_q() -> f64 {
    0.1
}
fn default_tol() -> f64 {
    1e-8
}
fn default_max_iter() -> usize {
    200
}
fn default_skip() -> f64 {
    0.25
}

/// Raw JSON form of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub alpha: f64,
    pub horizon: f64,
    #[serde(default = "default_modes")]
    pub n_modes: usize,
    #[serde(default = "default_steps")]
    pub n_steps: usize,
    #[serde(default)]
    pub g: GSpec,
    #[serde(default)]
    pub h: Vec<NonlocalTerm>,
    #[serde(default)]
    pub forcing: ForcingSpec,
    #[serde(default = "sin_descriptor")]
    pub sigma: String,
    #[serde(default = "sin_descriptor")]
    pub delta: String,
    #[serde(default)]
    pub b1: ControlSpec,
    #[serde(default)]
    pub b2: ControlSpec,
    #[serde(default)]
    pub u0: Vec<f64>,
    #[serde(default)]
    pub u_target: Vec<f64>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub control_law: ControlLaw,
    /// initial Picard relaxation factor θ ∈ (0, 1]
    #[serde(default = "one")]
    pub relaxation: f64,
    /// fraction of `[0, a]` excluded from the residual supremum
    #[serde(default = "default_skip")]
    pub residual_skip: f64,
}

impl ScenarioConfig {
    /// Linear scenario on `[0, a]` with all optional data at its defaults and
    /// `g = 0`.
    pub fn new(alpha: f64, horizon: f64) -> Self {
        Self {
            alpha,
            horizon,
            n_modes: default_modes(),
            n_steps: default_steps(),
            g: GSpec { scale: 0.0 },
            h: Vec::new(),
            forcing: ForcingSpec::default(),
            sigma: sin_descriptor(),
            delta: sin_descriptor(),
            b1: ControlSpec::default(),
            b2: ControlSpec::default(),
            u0: Vec::new(),
            u_target: Vec::new(),
            lambda: default_lambda(),
            lambdas: default_lambdas(),
            p: default_p(),
            q: default_q(),
            tol: default_tol(),
            max_iter: default_max_iter(),
            control_law: ControlLaw::default(),
            relaxation: 1.0,
            residual_skip: default_skip(),
        }
    }
}

/// A validated scenario with all descriptors resolved.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub order: FractionalOrder,
    pub op: SpectralOperator,
    pub grid: TimeGrid,
    pub g_scale: f64,
    pub h: Vec<NonlocalTerm>,
    pub kernel: Kernel,
    pub xi: ControlShape,
    pub band: Option<[f64; 2]>,
    pub selection: Selection,
    pub sigma: Delay,
    pub delta: Delay,
    pub b1: ControlOperator,
    pub b2: ControlOperator,
    pub u0: SpectralState,
    pub u_target: SpectralState,
    pub lambda: f64,
    pub lambdas: Vec<f64>,
    pub p: SobolevIndex,
    pub q: SobolevIndex,
    pub tol: f64,
    pub max_iter: usize,
    pub control_law: ControlLaw,
    pub relaxation: f64,
    pub residual_skip: f64,
}

fn scenario_err(e: Error) -> Error {
    match e {
        Error::Scenario(_) => e,
        other => Error::Scenario(other.to_string()),
    }
}

fn check_delay(name: &str, d: &Delay, grid: &TimeGrid) -> Result<()> {
    let slack = 1e-12 * grid.horizon();
    for t in grid.nodes() {
        let v = d.eval(t);
        if !(v.is_finite() && v >= -slack && v <= t + slack) {
            return Err(Error::Scenario(format!(
                "{name}({t}) = {v} violates 0 ≤ {name}(t) ≤ t"
            )));
        }
    }
    Ok(())
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        let order = FractionalOrder::new(config.alpha).map_err(scenario_err)?;
        let op = SpectralOperator::new(config.n_modes).map_err(scenario_err)?;
        if config.n_steps > 1 << 16 {
            return Err(Error::Scenario(format!("n_steps = {} is too large", config.n_steps)));
        }
        let grid = TimeGrid::new(config.horizon, config.n_steps).map_err(scenario_err)?;
        let a = config.horizon;
        let n = config.n_modes;

        if !config.g.scale.is_finite() {
            return Err(Error::Scenario("g.scale must be finite".into()));
        }
        let mut prev = 0.0;
        for term in &config.h {
            if !(term.t > prev && term.t < a) || !term.c.is_finite() {
                return Err(Error::Scenario(format!(
                    "nonlocal times must satisfy 0 < t_1 < … < t_m < a; got t = {} (c = {})",
                    term.t, term.c
                )));
            }
            prev = term.t;
        }

        let kernel: Kernel = config.forcing.kernel.parse()?;
        let xi: ControlShape = config.forcing.xi.parse()?;
        if let Some([lo, hi]) = config.forcing.band {
            if !(lo <= hi && lo.is_finite() && hi.is_finite()) {
                return Err(Error::Scenario(format!("forcing band [{lo}, {hi}] is empty")));
            }
        }
        let sigma: Delay = config.sigma.parse()?;
        let delta: Delay = config.delta.parse()?;
        check_delay("sigma", &sigma, &grid)?;
        check_delay("delta", &delta, &grid)?;

        let b1 = config.b1.resolve(n).map_err(scenario_err)?;
        let b2 = config.b2.resolve(n).map_err(scenario_err)?;
        let u0 = SpectralState::padded(&config.u0, n).map_err(scenario_err)?;
        let u_target = SpectralState::padded(&config.u_target, n).map_err(scenario_err)?;
        if u0.coeffs().iter().chain(u_target.coeffs()).any(|c| !c.is_finite()) {
            return Err(Error::Scenario("non-finite state coefficient".into()));
        }

        if !(config.lambda > 0.0 && config.lambda.is_finite()) {
            return Err(Error::Scenario(format!("lambda must be positive, got {}", config.lambda)));
        }
        if config.lambdas.is_empty()
            || config.lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite()))
            || config.lambdas.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(Error::Scenario("lambdas must be positive and strictly decreasing".into()));
        }
        if !(config.p > 0.0 && config.p < 1.0) {
            return Err(Error::Scenario(format!("p must lie in (0, 1), got {}", config.p)));
        }
        let p = SobolevIndex::new(config.p).map_err(scenario_err)?;
        let q = SobolevIndex::new(config.q).map_err(scenario_err)?;
        if !(config.tol > 0.0) || config.max_iter == 0 {
            return Err(Error::Scenario("tol must be positive and max_iter at least 1".into()));
        }
        if !(config.relaxation > 0.0 && config.relaxation <= 1.0) {
            return Err(Error::Scenario(format!(
                "relaxation must lie in (0, 1], got {}",
                config.relaxation
            )));
        }
        if !(0.0..1.0).contains(&config.residual_skip) {
            return Err(Error::Scenario("residual_skip must lie in [0, 1)".into()));
        }

        Ok(Self {
            order,
            op,
            grid,
            g_scale: config.g.scale,
            h: config.h.clone(),
            kernel,
            xi,
            band: config.forcing.band,
            selection: config.forcing.selection,
            sigma,
            delta,
            b1,
            b2,
            u0,
            u_target,
            lambda: config.lambda,
            lambdas: config.lambdas.clone(),
            p,
            q,
            tol: config.tol,
            max_iter: config.max_iter,
            control_law: config.control_law,
            relaxation: config.relaxation,
            residual_skip: config.residual_skip,
            config,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        Self::new(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        let mut config = self.config.clone();
        config.lambda = lambda;
        Self::new(config)
    }

    /// Same data with `g = 0`, `h = 0` and no forcing.
    pub fn linearized(&self) -> Result<Self> {
        let mut config = self.config.clone();
        config.g.scale = 0.0;
        config.h.clear();
        config.forcing = ForcingSpec::default();
        Self::new(config)
    }

    pub fn is_linear(&self) -> bool {
        self.g_scale == 0.0 && self.h.iter().all(|t| t.c == 0.0)
    }

    /// Band-adjusted kernel value used by the forced selection.
    pub fn selected_kernel(&self, t: f64, s: f64) -> f64 {
        let b = self.kernel.eval(t, s);
        match self.band {
            None => b,
            Some([lo, hi]) => match self.selection {
                Selection::Midpoint => b + 0.5 * (lo + hi),
                Selection::Lower => b + lo,
                Selection::Upper => b + hi,
            },
        }
    }
}
