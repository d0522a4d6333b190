//! Closed-form descriptors referenced by name from scenario files:
//! `"sin"`, `"poly:0,1.5"`, `"expkernel:1,2"`, `"clamp:poly:0,1.1"`, ...

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

fn split(spec: &str) -> (&str, Option<&str>) {
    match spec.split_once(':') {
        Some((name, rest)) => (name.trim(), Some(rest.trim())),
        None => (spec.trim(), None),
    }
}

fn numbers(spec: &str, params: Option<&str>, min: usize, max: usize) -> Result<Vec<f64>> {
    let values: Vec<f64> = match params {
        None | Some("") => Vec::new(),
        Some(p) => p
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Scenario(format!("bad number {v:?} in descriptor {spec:?}")))
            })
            .collect::<Result<_>>()?,
    };
    if values.len() < min || values.len() > max {
        return Err(Error::Scenario(format!(
            "descriptor {spec:?} takes between {min} and {max} parameters"
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Scenario(format!("non-finite parameter in {spec:?}")));
    }
    Ok(values)
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// Time delay `t ↦ σ(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Delay {
    Identity,
    Sin,
    Zero,
    /// polynomial in `t`, lowest degree first
    Poly(Vec<f64>),
    /// `min(max(inner(t), 0), t)`
    Clamp(Box<Delay>),
}

impl Delay {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Delay::Identity => t,
            Delay::Sin => t.sin(),
            Delay::Zero => 0.0,
            Delay::Poly(c) => horner(c, t),
            Delay::Clamp(inner) => inner.eval(t).max(0.0).min(t),
        }
    }
}

impl FromStr for Delay {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, params) = split(s);
        match name {
            "identity" => numbers(s, params, 0, 0).map(|_| Delay::Identity),
            "sin" => numbers(s, params, 0, 0).map(|_| Delay::Sin),
            "zero" => numbers(s, params, 0, 0).map(|_| Delay::Zero),
            "poly" => numbers(s, params, 1, 16).map(Delay::Poly),
            "clamp" => {
                let inner = params.ok_or_else(|| Error::Scenario("clamp needs an inner delay".into()))?;
                Ok(Delay::Clamp(Box::new(inner.parse()?)))
            }
            _ => Err(Error::Scenario(format!("unknown delay descriptor {s:?}"))),
        }
    }
}

impl fmt::Display for Delay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Delay::Identity => write!(f, "identity"),
            Delay::Sin => write!(f, "sin"),
            Delay::Zero => write!(f, "zero"),
            Delay::Poly(c) => write!(f, "poly:{}", join(c)),
            Delay::Clamp(inner) => write!(f, "clamp:{inner}"),
        }
    }
}

/// Memory kernel `b(t, s)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    Zero,
    Const(f64),
    /// `c · exp(-k (t - s))`
    Exp { c: f64, k: f64 },
    /// polynomial in `t - s`
    Poly(Vec<f64>),
}

impl Kernel {
    pub fn eval(&self, t: f64, s: f64) -> f64 {
        match self {
            Kernel::Zero => 0.0,
            Kernel::Const(c) => *c,
            Kernel::Exp { c, k } => c * (-k * (t - s)).exp(),
            Kernel::Poly(c) => horner(c, t - s),
        }
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, params) = split(s);
        match name {
            "zero" => numbers(s, params, 0, 0).map(|_| Kernel::Zero),
            "const" => numbers(s, params, 1, 1).map(|v| Kernel::Const(v[0])),
            "expkernel" => numbers(s, params, 2, 2).map(|v| Kernel::Exp { c: v[0], k: v[1] }),
            "poly" => numbers(s, params, 1, 16).map(Kernel::Poly),
            _ => Err(Error::Scenario(format!("unknown kernel descriptor {s:?}"))),
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Zero => write!(f, "zero"),
            Kernel::Const(c) => write!(f, "const:{c}"),
            Kernel::Exp { c, k } => write!(f, "expkernel:{c},{k}"),
            Kernel::Poly(c) => write!(f, "poly:{}", join(c)),
        }
    }
}

/// Control shape `ξ(x, τ)` on `[0, π] × J`.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlShape {
    Zero,
    Const(f64),
    /// `c · sin x`
    SinX(f64),
    /// `c · τ · sin x`
    SinXT(f64),
    /// polynomial in `x`
    Poly(Vec<f64>),
}

impl ControlShape {
    pub fn eval(&self, x: f64, tau: f64) -> f64 {
        match self {
            ControlShape::Zero => 0.0,
            ControlShape::Const(c) => *c,
            ControlShape::SinX(c) => c * x.sin(),
            ControlShape::SinXT(c) => c * tau * x.sin(),
            ControlShape::Poly(c) => horner(c, x),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ControlShape::Zero)
    }
}

impl FromStr for ControlShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, params) = split(s);
        match name {
            "zero" => numbers(s, params, 0, 0).map(|_| ControlShape::Zero),
            "const" => numbers(s, params, 1, 1).map(|v| ControlShape::Const(v[0])),
            "sinx" => numbers(s, params, 1, 1).map(|v| ControlShape::SinX(v[0])),
            "sinxt" => numbers(s, params, 1, 1).map(|v| ControlShape::SinXT(v[0])),
            "poly" => numbers(s, params, 1, 16).map(ControlShape::Poly),
            _ => Err(Error::Scenario(format!("unknown control-shape descriptor {s:?}"))),
        }
    }
}

impl fmt::Display for ControlShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlShape::Zero => write!(f, "zero"),
            ControlShape::Const(c) => write!(f, "const:{c}"),
            ControlShape::SinX(c) => write!(f, "sinx:{c}"),
            ControlShape::SinXT(c) => write!(f, "sinxt:{c}"),
            ControlShape::Poly(c) => write!(f, "poly:{}", join(c)),
        }
    }
}
