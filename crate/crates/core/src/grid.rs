//! Uniform time grids on `[0, a]` and signals sampled on them.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::SpectralState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    a: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(a: f64, n_steps: usize) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::invalid(format!("horizon must be positive, got {a}")));
        }
        if n_steps == 0 {
            return Err(Error::invalid("time grid needs at least one step"));
        }
        Ok(Self { a, n_steps })
    }

    pub fn horizon(&self) -> f64 {
        self.a
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of nodes, `n_steps + 1`.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.a / self.n_steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.a
        } else {
            self.a * k as f64 / self.n_steps as f64
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.node(k)).collect()
    }

    /// Cell index and barycentric weight for linear interpolation at `t`.
    pub fn locate(&self, t: f64) -> Result<(usize, f64)> {
        if !(0.0..=self.a * (1.0 + 1e-14)).contains(&t) {
            return Err(Error::Domain(format!("time {t} outside [0, {}]", self.a)));
        }
        let s = (t / self.step()).min(self.n_steps as f64);
        let k = (s.floor() as usize).min(self.n_steps - 1);
        Ok((k, (s - k as f64).clamp(0.0, 1.0)))
    }

    /// Composite trapezoid weights over `[0, t_k]`.
    pub fn trapezoid_weights(&self, k: usize) -> Vec<f64> {
        let h = self.step();
        let mut w = vec![h; k + 1];
        if k == 0 {
            w[0] = 0.0;
        } else {
            w[0] = 0.5 * h;
            w[k] = 0.5 * h;
        }
        w
    }
}

/// Minimal linear structure needed by the convolution and interpolation code.
pub trait VectorSpace: Clone {
    fn zero_like(&self) -> Self;
    /// `self += a * x`
    fn axpy(&mut self, a: f64, x: &Self);
}

impl VectorSpace for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }

    fn axpy(&mut self, a: f64, x: &Self) {
        *self += a * x;
    }
}

impl VectorSpace for DVector<f64> {
    fn zero_like(&self) -> Self {
        DVector::zeros(self.len())
    }

    fn axpy(&mut self, a: f64, x: &Self) {
        nalgebra::Matrix::axpy(self, a, x, 1.0);
    }
}

impl VectorSpace for SpectralState {
    fn zero_like(&self) -> Self {
        SpectralState::zeros(self.len())
    }

    fn axpy(&mut self, a: f64, x: &Self) {
        for (s, v) in self.coeffs_mut().iter_mut().zip(x.coeffs()) {
            *s += a * v;
        }
    }
}

/// One value per grid node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSignal<T> {
    grid: TimeGrid,
    values: Vec<T>,
}

impl<T> SampledSignal<T> {
    pub fn new(grid: TimeGrid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "signal has {} samples for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: TimeGrid, f: impl FnMut(f64) -> T) -> Self {
        let values = grid.nodes().into_iter().map(f).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, k: usize) -> Result<&T> {
        self.values.get(k).ok_or(Error::Index {
            index: k,
            len: self.values.len(),
        })
    }

    pub fn last(&self) -> &T {
        self.values.last().expect("signals have at least two samples")
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> SampledSignal<U> {
        SampledSignal {
            grid: self.grid,
            values: self.values.iter().map(f).collect(),
        }
    }
}

impl<T: VectorSpace> SampledSignal<T> {
    /// Piecewise-linear interpolation at `t ∈ [0, a]`.
    pub fn interpolate(&self, t: f64) -> Result<T> {
        let (k, w) = self.grid.locate(t)?;
        let mut out = self.values[k].zero_like();
        if w < 1.0 {
            out.axpy(1.0 - w, &self.values[k]);
        }
        if w > 0.0 {
            out.axpy(w, &self.values[k + 1]);
        }
        Ok(out)
    }
}
