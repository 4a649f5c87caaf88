//! Distributions over states sampled on a time grid.

use crate::error::{Error, Result};
use crate::game::TimeGrid;

/// Size of the simplex corrections applied while integrating.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ProjectionLog {
    /// Largest `|sum(m) - 1|` seen before renormalizing.
    pub max_mass_drift: f64,
    /// Largest total negative mass clamped to zero in one step.
    pub max_negative_mass: f64,
    /// Number of steps where any correction was applied.
    pub corrected_steps: usize,
}

impl ProjectionLog {
    pub(crate) fn merge_step(&mut self, drift: f64, negative: f64) {
        self.max_mass_drift = self.max_mass_drift.max(drift);
        self.max_negative_mass = self.max_negative_mass.max(negative);
        if drift > 0.0 || negative > 0.0 {
            self.corrected_steps += 1;
        }
    }
}

/// Clamps negative entries to zero and rescales to unit mass. Returns the
/// pre-projection mass drift and the clamped negative mass.
pub fn project_to_simplex(m: &mut [f64]) -> (f64, f64) {
    let mass: f64 = m.iter().sum();
    let drift = (mass - 1.0).abs();
    let mut negative = 0.0;
    for v in m.iter_mut() {
        if *v < 0.0 {
            negative -= *v;
            *v = 0.0;
        }
    }
    let total: f64 = m.iter().sum();
    if total > 0.0 && total != 1.0 {
        m.iter_mut().for_each(|v| *v /= total);
    }
    (drift, negative)
}

/// `m[k]` at each grid point `t_k`, linearly interpolated in between.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationPath {
    grid: TimeGrid,
    n_states: usize,
    data: Vec<f64>,
    pub projection: ProjectionLog,
}

impl PopulationPath {
    pub fn new(grid: TimeGrid, n_states: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.n_points() * n_states {
            return Err(Error::GridMismatch(format!(
                "path has {} values, grid needs {}",
                data.len(),
                grid.n_points() * n_states
            )));
        }
        Ok(Self {
            grid,
            n_states,
            data,
            projection: ProjectionLog::default(),
        })
    }

    /// The path that stays at `m` for the whole grid.
    pub fn constant(grid: TimeGrid, m: &[f64]) -> Self {
        let data = m.iter().copied().cycle().take(m.len() * grid.n_points()).collect();
        Self {
            grid,
            n_states: m.len(),
            data,
            projection: ProjectionLog::default(),
        }
    }

    pub(crate) fn zeros(grid: TimeGrid, n_states: usize) -> Self {
        Self {
            grid,
            n_states,
            data: vec![0.0; grid.n_points() * n_states],
            projection: ProjectionLog::default(),
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    #[inline]
    pub fn at(&self, k: usize) -> &[f64] {
        &self.data[k * self.n_states..(k + 1) * self.n_states]
    }

    #[inline]
    pub(crate) fn at_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.n_states..(k + 1) * self.n_states]
    }

    pub fn last(&self) -> &[f64] {
        self.at(self.grid.n_steps())
    }

    /// Linear interpolation; `t` outside the grid is clamped.
    pub fn value_at(&self, t: f64, out: &mut [f64]) {
        let k = self.grid.interval_at(t);
        let (t0, t1) = (self.grid.time(k), self.grid.time(k + 1));
        let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let (a, b) = (self.at(k), self.at(k + 1));
        for j in 0..self.n_states {
            out[j] = (1.0 - w) * a[j] + w * b[j];
        }
    }

    /// `sup_k |self[k] - other[k]|_inf` on a shared grid.
    pub fn sup_distance(&self, other: &PopulationPath) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs())))
    }

    /// `(1 - lambda) self + lambda other`, renormalized at every point.
    pub fn blend(&self, other: &PopulationPath, lambda: f64) -> Result<PopulationPath> {
        self.check_same_grid(other)?;
        let mut out = self.clone();
        out.projection = ProjectionLog::default();
        for (o, b) in out.data.iter_mut().zip(&other.data) {
            *o = (1.0 - lambda) * *o + lambda * b;
        }
        for k in 0..out.grid.n_points() {
            let (drift, neg) = project_to_simplex(out.at_mut(k));
            out.projection.merge_step(drift, neg);
        }
        Ok(out)
    }

    /// Largest distance of any point from the simplex.
    pub fn simplex_defect(&self) -> f64 {
        (0..self.grid.n_points())
            .map(|k| {
                let m = self.at(k);
                let mass: f64 = m.iter().sum();
                let neg: f64 = m.iter().filter(|v| **v < 0.0).map(|v| -v).sum();
                (mass - 1.0).abs().max(neg)
            })
            .fold(0.0, f64::max)
    }

    fn check_same_grid(&self, other: &PopulationPath) -> Result<()> {
        if self.grid != other.grid || self.n_states != other.n_states {
            return Err(Error::GridMismatch("paths live on different grids".into()));
        }
        Ok(())
    }
}
