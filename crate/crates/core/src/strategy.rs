//! Player strategies.
//!
//! A [`LocalStrategy`] depends only on the player's own state and time and
//! is piecewise constant on a uniform grid. A [`MarkovStrategy`] may also
//! read the current population distribution.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::game::{TimeGrid, SIMPLEX_TOL};

/// Time-dependent per-state action distribution, constant on each interval
/// `[t_k, t_{k+1})` of its grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalStrategy {
    grid: TimeGrid,
    n_states: usize,
    n_actions: usize,
    // [k][i][a]
    probs: Vec<f64>,
}

impl LocalStrategy {
    pub fn new(grid: TimeGrid, n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != grid.n_steps() * n_states * n_actions {
            return Err(Error::InvalidStrategy(format!(
                "expected {} probabilities, got {}",
                grid.n_steps() * n_states * n_actions,
                probs.len()
            )));
        }
        let s = Self {
            grid,
            n_states,
            n_actions,
            probs,
        };
        for k in 0..grid.n_steps() {
            for i in 0..n_states {
                check_distribution(s.probs(k, i))
                    .map_err(|msg| Error::InvalidStrategy(format!("interval {k}, state {}: {msg}", i + 1)))?;
            }
        }
        Ok(s)
    }

    /// Pure strategy given by `choose(k, i)`.
    pub fn pure_from_fn(
        grid: TimeGrid,
        n_states: usize,
        n_actions: usize,
        mut choose: impl FnMut(usize, usize) -> usize,
    ) -> Self {
        let mut probs = vec![0.0; grid.n_steps() * n_states * n_actions];
        for k in 0..grid.n_steps() {
            for i in 0..n_states {
                let a = choose(k, i);
                assert!(a < n_actions, "action index {a} out of range");
                probs[(k * n_states + i) * n_actions + a] = 1.0;
            }
        }
        Self {
            grid,
            n_states,
            n_actions,
            probs,
        }
    }

    /// Every state plays `action` at all times.
    pub fn always(grid: TimeGrid, n_states: usize, n_actions: usize, action: usize) -> Self {
        Self::pure_from_fn(grid, n_states, n_actions, |_, _| action)
    }

    pub fn uniform(grid: TimeGrid, n_states: usize, n_actions: usize) -> Self {
        Self {
            grid,
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; grid.n_steps() * n_states * n_actions],
        }
    }

    /// Plays `before` on intervals starting before `t_switch`, `after` from then on.
    pub fn switch_at(
        grid: TimeGrid,
        n_states: usize,
        n_actions: usize,
        before: usize,
        after: usize,
        t_switch: f64,
    ) -> Self {
        Self::pure_from_fn(grid, n_states, n_actions, |k, _| {
            if grid.time(k) < t_switch - 1e-12 {
                before
            } else {
                after
            }
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn probs(&self, k: usize, i: usize) -> &[f64] {
        let start = (k * self.n_states + i) * self.n_actions;
        &self.probs[start..start + self.n_actions]
    }

    pub fn set_probs(&mut self, k: usize, i: usize, p: &[f64]) -> Result<()> {
        check_distribution(p).map_err(Error::InvalidStrategy)?;
        let start = (k * self.n_states + i) * self.n_actions;
        self.probs[start..start + self.n_actions].copy_from_slice(p);
        Ok(())
    }

    /// The action played with probability one, if any.
    pub fn pure_action(&self, k: usize, i: usize) -> Option<usize> {
        self.probs(k, i).iter().position(|&p| p == 1.0)
    }

    pub fn is_pure(&self) -> bool {
        (0..self.grid.n_steps()).all(|k| (0..self.n_states).all(|i| self.pure_action(k, i).is_some()))
    }

    /// Whether every interval and state plays `action` with probability one.
    pub fn is_always(&self, action: usize) -> bool {
        (0..self.grid.n_steps()).all(|k| (0..self.n_states).all(|i| self.pure_action(k, i) == Some(action)))
    }

    pub fn raw(&self) -> &[f64] {
        &self.probs
    }
}

pub(crate) fn check_distribution(p: &[f64]) -> std::result::Result<(), String> {
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(format!("negative or non-finite probability in {p:?}"));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > SIMPLEX_TOL {
        return Err(format!("probabilities sum to {s}, expected 1"));
    }
    Ok(())
}

pub type MarkovFn = dyn Fn(f64, usize, &[f64], &mut [f64]) + Send + Sync;

/// Action distribution as a function of `(t, state, m)`.
#[derive(Clone)]
pub struct MarkovStrategy {
    n_states: usize,
    n_actions: usize,
    label: String,
    eval: Arc<MarkovFn>,
}

impl fmt::Debug for MarkovStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MarkovStrategy")
            .field("label", &self.label)
            .field("n_states", &self.n_states)
            .field("n_actions", &self.n_actions)
            .finish()
    }
}

impl MarkovStrategy {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        label: impl Into<String>,
        eval: impl Fn(f64, usize, &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            n_states,
            n_actions,
            label: label.into(),
            eval: Arc::new(eval),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Writes the action distribution at `(t, i, m)` into `out`.
    pub fn eval_into(&self, t: f64, i: usize, m: &[f64], out: &mut [f64]) {
        (self.eval)(t, i, m, out)
    }
}

#[derive(Debug, Clone)]
pub enum Strategy {
    Local(LocalStrategy),
    Markov(MarkovStrategy),
}

impl From<LocalStrategy> for Strategy {
    fn from(s: LocalStrategy) -> Self {
        Strategy::Local(s)
    }
}

impl From<MarkovStrategy> for Strategy {
    fn from(s: MarkovStrategy) -> Self {
        Strategy::Markov(s)
    }
}

impl Strategy {
    pub fn n_states(&self) -> usize {
        match self {
            Strategy::Local(s) => s.n_states(),
            Strategy::Markov(s) => s.n_states(),
        }
    }

    pub fn n_actions(&self) -> usize {
        match self {
            Strategy::Local(s) => s.n_actions(),
            Strategy::Markov(s) => s.n_actions(),
        }
    }

    pub fn as_local(&self) -> Option<&LocalStrategy> {
        match self {
            Strategy::Local(s) => Some(s),
            Strategy::Markov(_) => None,
        }
    }

    /// Resolves the strategy against a time grid used for integration or
    /// simulation. A local strategy's grid must be refined by `grid`.
    pub fn bind(&self, grid: &TimeGrid) -> Result<BoundStrategy<'_>> {
        let ratio = match self {
            Strategy::Local(s) => grid.refinement_of(s.grid())?,
            Strategy::Markov(_) => 1,
        };
        Ok(BoundStrategy { strategy: self, ratio })
    }
}

/// A strategy whose interval indices are expressed on a particular grid.
#[derive(Debug, Clone, Copy)]
pub struct BoundStrategy<'a> {
    strategy: &'a Strategy,
    ratio: usize,
}

impl BoundStrategy<'_> {
    /// Action distribution on interval `k` of the bound grid, at time `t`
    /// with population `m`, for a player in state `i`.
    #[inline]
    pub fn probs_into(&self, k: usize, t: f64, i: usize, m: &[f64], out: &mut [f64]) {
        match self.strategy {
            Strategy::Local(s) => out.copy_from_slice(s.probs(k / self.ratio, i)),
            Strategy::Markov(s) => s.eval_into(t, i, m, out),
        }
    }

    pub fn is_markov(&self) -> bool {
        matches!(self.strategy, Strategy::Markov(_))
    }
}
