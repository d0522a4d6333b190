//! Dirichlet sine basis on `[0, π]`: `w_n(x) = √(2/π) sin(nx)`, `A w_n = -n² w_n`.

use std::f64::consts::PI;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn basis_scale() -> f64 {
    (2.0 / PI).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectralOperator {
    n_modes: usize,
}

impl SpectralOperator {
    pub fn new(n_modes: usize) -> Result<Self> {
        if n_modes < 2 {
            return Err(Error::invalid(format!("need at least 2 modes, got {n_modes}")));
        }
        Ok(Self { n_modes })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// Eigenvalue of mode `n` (1-based): `-n²`.
    pub fn eigenvalue(&self, n: usize) -> f64 {
        -((n * n) as f64)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        (1..=self.n_modes).map(|n| self.eigenvalue(n)).collect()
    }

    /// `‖(-A)^{-q}‖` on the truncated space.
    pub fn inverse_power_norm(&self, q: SobolevIndex) -> f64 {
        (1..=self.n_modes)
            .map(|n| (n as f64).powf(-2.0 * q.value()))
            .fold(0.0, f64::max)
    }
}

/// Sine coefficients `c_n`, `n = 1..N`, stored 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpectralState(Vec<f64>);

impl SpectralState {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self(coeffs)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    /// Unit vector on mode `n` (1-based).
    pub fn unit(n_modes: usize, n: usize) -> Result<Self> {
        if n == 0 || n > n_modes {
            return Err(Error::Index {
                index: n,
                len: n_modes,
            });
        }
        let mut c = vec![0.0; n_modes];
        c[n - 1] = 1.0;
        Ok(Self(c))
    }

    /// Zero-pads (or rejects) a coefficient list to exactly `n` modes.
    pub fn padded(coeffs: &[f64], n: usize) -> Result<Self> {
        if coeffs.len() > n {
            return Err(Error::Dimension(format!(
                "{} coefficients for {n} modes",
                coeffs.len()
            )));
        }
        let mut c = coeffs.to_vec();
        c.resize(n, 0.0);
        Ok(Self(c))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.0
    }

    /// Coefficient of mode `n` (1-based).
    pub fn mode(&self, n: usize) -> f64 {
        self.0[n - 1]
    }

    /// L² norm, by Parseval.
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self(self.0.iter().map(|c| a * c).collect())
    }

    /// Coefficient-wise product with a diagonal symbol.
    pub fn hadamard(&self, diag: &[f64]) -> Self {
        Self(self.0.iter().zip(diag).map(|(c, d)| c * d).collect())
    }

    /// Value of the represented function at `x ∈ [0, π]`.
    pub fn reconstruct(&self, x: f64) -> Result<f64> {
        if !(0.0..=PI).contains(&x) {
            return Err(Error::Domain(format!("x = {x} outside [0, π]")));
        }
        let s = basis_scale();
        Ok(self
            .0
            .iter()
            .enumerate()
            .map(|(i, c)| c * s * ((i + 1) as f64 * x).sin())
            .sum())
    }
}

impl Add for &SpectralState {
    type Output = SpectralState;

    fn add(self, rhs: Self) -> SpectralState {
        SpectralState(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &SpectralState {
    type Output = SpectralState;

    fn sub(self, rhs: Self) -> SpectralState {
        SpectralState(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &SpectralState {
    type Output = SpectralState;

    fn neg(self) -> SpectralState {
        self.scaled(-1.0)
    }
}

/// Index `q ∈ [0, 1)` of the graph-norm space `D((-A)^q)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SobolevIndex(f64);

impl SobolevIndex {
    pub fn new(q: f64) -> Result<Self> {
        if (0.0..1.0).contains(&q) {
            Ok(Self(q))
        } else {
            Err(Error::invalid(format!("Sobolev index must lie in [0, 1), got {q}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for SobolevIndex {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<SobolevIndex> for f64 {
    fn from(value: SobolevIndex) -> Self {
        value.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerSign {
    Plus,
    Minus,
}

/// `(-A)^{±q}`: mode `n` is scaled by `n^{±2q}`.
pub fn frac_power_apply(s: &SpectralState, q: SobolevIndex, sign: PowerSign) -> SpectralState {
    let e = match sign {
        PowerSign::Plus => 2.0 * q.value(),
        PowerSign::Minus => -2.0 * q.value(),
    };
    if e == 0.0 {
        return s.clone();
    }
    SpectralState(
        s.0.iter()
            .enumerate()
            .map(|(i, c)| c * ((i + 1) as f64).powf(e))
            .collect(),
    )
}

/// `‖u‖_q = ‖(-A)^q u‖ = sqrt(Σ n^{4q} c_n²)`.
pub fn norm_q(s: &SpectralState, q: SobolevIndex) -> f64 {
    let e = 4.0 * q.value();
    s.0.iter()
        .enumerate()
        .map(|(i, c)| ((i + 1) as f64).powf(e) * c * c)
        .sum::<f64>()
        .sqrt()
}

/// Size of the last quartile of coefficients, absolute and relative to the
/// full norm. Large values mean the truncation is cutting off real content.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TruncationTail {
    pub tail_norm: f64,
    pub relative: f64,
}

pub fn truncation_tail(s: &SpectralState) -> TruncationTail {
    let n = s.len();
    let start = n - (n / 4).max(1);
    let tail_norm = s.0[start..].iter().map(|c| c * c).sum::<f64>().sqrt();
    let total = s.norm();
    TruncationTail {
        tail_norm,
        relative: if total > 0.0 { tail_norm / total } else { 0.0 },
    }
}

/// Composite Simpson projection onto the first `N` modes, with the basis
/// tabulated once on the collocation nodes.
#[derive(Debug, Clone)]
pub struct Projector {
    n_modes: usize,
    nodes: Vec<f64>,
    /// basis[n][i] = w_{n+1}(x_i)
    basis: Vec<Vec<f64>>,
    /// Simpson weight times basis value
    weighted: Vec<Vec<f64>>,
}

impl Projector {
    pub fn new(op: &SpectralOperator) -> Self {
        let n_modes = op.n_modes();
        let panels = (8 * n_modes).max(1024);
        let panels = panels + panels % 2;
        let h = PI / panels as f64;
        let nodes: Vec<f64> = (0..=panels).map(|i| i as f64 * h).collect();
        let simpson: Vec<f64> = (0..=panels)
            .map(|i| {
                let c = if i == 0 || i == panels {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                c * h / 3.0
            })
            .collect();
        let s = basis_scale();
        let basis: Vec<Vec<f64>> = (1..=n_modes)
            .map(|n| nodes.iter().map(|&x| s * (n as f64 * x).sin()).collect())
            .collect();
        let weighted = basis
            .iter()
            .map(|row| row.iter().zip(&simpson).map(|(b, w)| b * w).collect())
            .collect();
        Self {
            n_modes,
            nodes,
            basis,
            weighted,
        }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// Collocation nodes on `[0, π]`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn project(&self, f: impl Fn(f64) -> f64) -> SpectralState {
        let samples: Vec<f64> = self.nodes.iter().map(|&x| f(x)).collect();
        self.project_samples(&samples)
    }

    /// Projects values given on [`Projector::nodes`].
    pub fn project_samples(&self, samples: &[f64]) -> SpectralState {
        debug_assert_eq!(samples.len(), self.nodes.len());
        SpectralState(
            self.weighted
                .iter()
                .map(|row| row.iter().zip(samples).map(|(w, f)| w * f).sum())
                .collect(),
        )
    }

    /// Values of `s` on [`Projector::nodes`].
    pub fn reconstruct_samples(&self, s: &SpectralState) -> Vec<f64> {
        let mut out = vec![0.0; self.nodes.len()];
        for (row, &c) in self.basis.iter().zip(s.coeffs()) {
            if c != 0.0 {
                for (o, b) in out.iter_mut().zip(row) {
                    *o += c * b;
                }
            }
        }
        out
    }
}

/// Sine coefficients of a pointwise function on `[0, π]`.
pub fn project(f: impl Fn(f64) -> f64, op: &SpectralOperator) -> SpectralState {
    Projector::new(op).project(f)
}
