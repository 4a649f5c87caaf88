//! Game description: state/action sets, population-dependent transition
//! models, costs, horizon and the initial population distribution.
//!
//! Internally every index is 0-based. Transition tensors are laid out as
//! `[action][from][to]` so that the row of a (state, action) pair is a
//! contiguous slice.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Tolerance for simplex membership of user-supplied distributions.
pub const SIMPLEX_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeMode {
    /// Asynchronous players, transition rates.
    Continuous,
    /// Synchronous players, transition probabilities.
    Discrete,
}

/// Discounted (rate `beta` in continuous time, factor `delta` in discrete
/// time) or finite horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Discounted(f64),
    Finite(f64),
}

impl Horizon {
    pub fn is_discounted(&self) -> bool {
        matches!(self, Horizon::Discounted(_))
    }
}

/// A dense `[action][from][to]` tensor holding either rates `Q_ija` or
/// probabilities `P_ija` evaluated at one population distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Transitions {
    n_states: usize,
    n_actions: usize,
    data: Vec<f64>,
}

impl Transitions {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            data: vec![0.0; n_states * n_states * n_actions],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, a: usize) -> usize {
        (a * self.n_states + i) * self.n_states + j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, a: usize) -> f64 {
        self.data[self.idx(i, j, a)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, a: usize, v: f64) {
        let idx = self.idx(i, j, a);
        self.data[idx] = v;
    }

    /// Row `i` under action `a`.
    #[inline]
    pub fn row(&self, i: usize, a: usize) -> &[f64] {
        let start = self.idx(i, 0, a);
        &self.data[start..start + self.n_states]
    }

    /// Total rate of leaving `i` under action `a` (sum of off-diagonal entries).
    pub fn exit_rate(&self, i: usize, a: usize) -> f64 {
        self.row(i, a)
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, q)| *q)
            .sum()
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }
}

/// Affine-in-`m` transition model:
/// `T_ija(m) = base[i][j][a] + sum_k slope[i][j][a][k] * m_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineTransitions {
    n_states: usize,
    n_actions: usize,
    base: Transitions,
    // [action][from][to][k]
    slope: Vec<f64>,
}

impl AffineTransitions {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            base: Transitions::zeros(n_states, n_actions),
            slope: vec![0.0; n_states * n_states * n_actions * n_states],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn slope_idx(&self, i: usize, j: usize, a: usize, k: usize) -> usize {
        ((a * self.n_states + i) * self.n_states + j) * self.n_states + k
    }

    pub fn base(&self, i: usize, j: usize, a: usize) -> f64 {
        self.base.get(i, j, a)
    }

    pub fn set_base(&mut self, i: usize, j: usize, a: usize, v: f64) {
        self.base.set(i, j, a, v);
    }

    pub fn slope(&self, i: usize, j: usize, a: usize, k: usize) -> f64 {
        self.slope[self.slope_idx(i, j, a, k)]
    }

    pub fn set_slope(&mut self, i: usize, j: usize, a: usize, k: usize, v: f64) {
        let idx = self.slope_idx(i, j, a, k);
        self.slope[idx] = v;
    }

    /// Sets every diagonal entry to minus the sum of the off-diagonal entries
    /// of its row, for both the base and the slope coefficients. Turns a list
    /// of off-diagonal rates into a generator.
    pub fn complete_generator_diagonal(&mut self) {
        let e = self.n_states;
        for a in 0..self.n_actions {
            for i in 0..e {
                let off: f64 = (0..e).filter(|&j| j != i).map(|j| self.base(i, j, a)).sum();
                self.set_base(i, i, a, -off);
                for k in 0..e {
                    let off: f64 = (0..e)
                        .filter(|&j| j != i)
                        .map(|j| self.slope(i, j, a, k))
                        .sum();
                    self.set_slope(i, i, a, k, -off);
                }
            }
        }
    }

    pub fn eval_into(&self, m: &[f64], out: &mut Transitions) {
        let e = self.n_states;
        out.data.copy_from_slice(&self.base.data);
        for (cell, value) in out.data.iter_mut().enumerate() {
            let coeffs = &self.slope[cell * e..(cell + 1) * e];
            let mut acc = 0.0;
            for k in 0..e {
                acc += coeffs[k] * m[k];
            }
            *value += acc;
        }
    }
}

pub type TransitionFn = dyn Fn(&[f64], &mut Transitions) + Send + Sync;

/// Transition rates or probabilities as a function of the population.
#[derive(Clone)]
pub enum TransitionModel {
    Affine(AffineTransitions),
    /// Arbitrary evaluator; library use only (not representable in spec files).
    Custom(Arc<TransitionFn>),
}

impl fmt::Debug for TransitionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransitionModel::Affine(a) => f.debug_tuple("Affine").field(a).finish(),
            TransitionModel::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl TransitionModel {
    pub fn eval_into(&self, m: &[f64], out: &mut Transitions) {
        match self {
            TransitionModel::Affine(model) => model.eval_into(m, out),
            TransitionModel::Custom(f) => {
                out.fill(0.0);
                f(m, out)
            }
        }
    }
}

/// Rates (continuous time) or a stochastic kernel (discrete time). The
/// variant fixes the game's time mode.
#[derive(Debug, Clone)]
pub enum Dynamics {
    Rates(TransitionModel),
    Kernel(TransitionModel),
}

impl Dynamics {
    pub fn model(&self) -> &TransitionModel {
        match self {
            Dynamics::Rates(m) | Dynamics::Kernel(m) => m,
        }
    }
}

/// Instantaneous costs `c_ia` at one population distribution, `[state][action]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTable {
    n_states: usize,
    n_actions: usize,
    data: Vec<f64>,
}

impl CostTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            data: vec![0.0; n_states * n_actions],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, a: usize) -> f64 {
        self.data[i * self.n_actions + a]
    }

    #[inline]
    pub fn set(&mut self, i: usize, a: usize, v: f64) {
        self.data[i * self.n_actions + a] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_actions..(i + 1) * self.n_actions]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |acc, c| acc.max(c.abs()))
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }
}

/// `c_ia(m) = base[i][a] + sum_k slope[i][a][k] * m_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineCosts {
    n_states: usize,
    n_actions: usize,
    base: CostTable,
    slope: Vec<f64>,
}

impl AffineCosts {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            base: CostTable::zeros(n_states, n_actions),
            slope: vec![0.0; n_states * n_actions * n_states],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn base(&self, i: usize, a: usize) -> f64 {
        self.base.get(i, a)
    }

    pub fn set_base(&mut self, i: usize, a: usize, v: f64) {
        self.base.set(i, a, v);
    }

    pub fn slope(&self, i: usize, a: usize, k: usize) -> f64 {
        self.slope[(i * self.n_actions + a) * self.n_states + k]
    }

    pub fn set_slope(&mut self, i: usize, a: usize, k: usize, v: f64) {
        let idx = (i * self.n_actions + a) * self.n_states + k;
        self.slope[idx] = v;
    }

    pub fn eval_into(&self, m: &[f64], out: &mut CostTable) {
        let e = self.n_states;
        for (cell, value) in out.data.iter_mut().enumerate() {
            let coeffs = &self.slope[cell * e..(cell + 1) * e];
            let mut acc = self.base.data[cell];
            for k in 0..e {
                acc += coeffs[k] * m[k];
            }
            *value = acc;
        }
    }
}

pub type CostFn = dyn Fn(&[f64], &mut CostTable) + Send + Sync;

/// An arbitrary cost evaluator with a caller-supplied bound on `|c|`.
#[derive(Clone)]
pub struct CustomCost {
    pub eval: Arc<CostFn>,
    /// Upper bound on `|c_ia(m)|` over the simplex.
    pub bound: f64,
    /// `false` when the evaluator is known to be discontinuous in `m`.
    pub continuous: bool,
}

#[derive(Clone)]
pub enum CostModel {
    Affine(AffineCosts),
    Custom(CustomCost),
}

impl fmt::Debug for CostModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostModel::Affine(a) => f.debug_tuple("Affine").field(a).finish(),
            CostModel::Custom(c) => f
                .debug_struct("Custom")
                .field("bound", &c.bound)
                .field("continuous", &c.continuous)
                .finish(),
        }
    }
}

impl CostModel {
    pub fn eval_into(&self, m: &[f64], out: &mut CostTable) {
        match self {
            CostModel::Affine(model) => model.eval_into(m, out),
            CostModel::Custom(c) => (c.eval)(m, out),
        }
    }
}

/// Full description of a discrete mean field game.
#[derive(Debug, Clone)]
pub struct GameSpec {
    pub name: String,
    pub state_names: Vec<String>,
    pub action_names: Vec<String>,
    pub dynamics: Dynamics,
    pub cost: CostModel,
    pub horizon: Horizon,
    pub m0: Vec<f64>,
    /// Multiply discrete discounted costs by `(1 - delta)`.
    pub normalize_discrete_cost: bool,
}

impl GameSpec {
    pub fn n_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn n_actions(&self) -> usize {
        self.action_names.len()
    }

    pub fn time_mode(&self) -> TimeMode {
        match self.dynamics {
            Dynamics::Rates(_) => TimeMode::Continuous,
            Dynamics::Kernel(_) => TimeMode::Discrete,
        }
    }

    pub fn transitions_at(&self, m: &[f64], out: &mut Transitions) {
        self.dynamics.model().eval_into(m, out);
    }

    pub fn costs_at(&self, m: &[f64], out: &mut CostTable) {
        self.cost.eval_into(m, out);
    }

    pub fn new_transitions(&self) -> Transitions {
        Transitions::zeros(self.n_states(), self.n_actions())
    }

    pub fn new_costs(&self) -> CostTable {
        CostTable::zeros(self.n_states(), self.n_actions())
    }

    /// `c_max`: the largest `|c_ia|` over simplex vertices for affine costs
    /// (affine functions attain their extrema there), or the declared bound
    /// of a custom evaluator.
    pub fn cost_bound(&self) -> f64 {
        match &self.cost {
            CostModel::Affine(model) => {
                let e = self.n_states();
                let mut table = self.new_costs();
                let mut best = 0.0_f64;
                for v in 0..e {
                    let vertex = unit_vector(e, v);
                    model.eval_into(&vertex, &mut table);
                    best = best.max(table.max_abs());
                }
                best
            }
            CostModel::Custom(c) => c.bound,
        }
    }

    /// Weight applied to every stage cost in discrete mode.
    pub fn discrete_cost_weight(&self) -> f64 {
        match (self.time_mode(), self.horizon) {
            (TimeMode::Discrete, Horizon::Discounted(delta)) if self.normalize_discrete_cost => {
                1.0 - delta
            }
            _ => 1.0,
        }
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.state_names.iter().position(|s| s == name)
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.action_names
            .iter()
            .position(|s| s == name)
            .or_else(|| name.parse::<usize>().ok().filter(|&a| a >= 1 && a <= self.n_actions()).map(|a| a - 1))
    }

    /// Default solver grid. Continuous discounted: `t_end` chosen so that
    /// `exp(-beta t_end) c_max / beta < tail_tol`, rounded up to a whole
    /// number of `step`. Discrete discounted: the first `T` with
    /// `delta^T c_max / (1 - delta) < 1e-12`. Finite horizons use `T` itself.
    pub fn default_grid(&self, step: f64, tail_tol: f64) -> Result<TimeGrid> {
        let c_max = self.cost_bound();
        match (self.time_mode(), self.horizon) {
            (TimeMode::Continuous, Horizon::Discounted(beta)) => {
                let t = if c_max > 0.0 {
                    ((c_max / (beta * tail_tol)).ln() / beta).max(step)
                } else {
                    step
                };
                let n = (t / step).ceil().max(1.0) as usize;
                TimeGrid::new(n as f64 * step, n)
            }
            (TimeMode::Continuous, Horizon::Finite(t)) => {
                let n = (t / step).round().max(1.0) as usize;
                TimeGrid::new(t, n)
            }
            (TimeMode::Discrete, Horizon::Discounted(delta)) => {
                Ok(TimeGrid::discrete(discrete_truncation(delta, c_max)))
            }
            (TimeMode::Discrete, Horizon::Finite(t)) => Ok(TimeGrid::discrete(t.round() as usize)),
        }
    }
}

/// Number of discrete steps after which `delta^t c_max / (1 - delta) < 1e-12`.
pub fn discrete_truncation(delta: f64, c_max: f64) -> usize {
    if c_max <= 0.0 {
        return 1;
    }
    let mut t = 0usize;
    let mut tail = c_max / (1.0 - delta);
    while tail >= 1e-12 {
        tail *= delta;
        t += 1;
    }
    t.max(1)
}

pub fn unit_vector(n: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[k] = 1.0;
    v
}

/// Uniform time grid `t_k = k h`, `k = 0..=n_steps`, `h = t_end / n_steps`.
/// Discrete-time games use `h = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_end: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::InvalidConfig("time grid needs at least one step".into()));
        }
        if !(t_end > 0.0) || !t_end.is_finite() {
            return Err(Error::InvalidConfig(format!("time grid end must be positive, got {t_end}")));
        }
        Ok(Self { t_end, n_steps })
    }

    /// Integer steps `0..=n_steps`.
    pub fn discrete(n_steps: usize) -> Self {
        let n_steps = n_steps.max(1);
        Self {
            t_end: n_steps as f64,
            n_steps,
        }
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_points(&self) -> usize {
        self.n_steps + 1
    }

    pub fn step(&self) -> f64 {
        self.t_end / self.n_steps as f64
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t_end
        } else {
            self.t_end * k as f64 / self.n_steps as f64
        }
    }

    /// Index of the interval `[t_k, t_{k+1})` containing `t`, clamped to the grid.
    pub fn interval_at(&self, t: f64) -> usize {
        if t <= 0.0 {
            return 0;
        }
        let mut k = ((t * self.n_steps as f64 / self.t_end).floor() as usize).min(self.n_steps - 1);
        // guard against rounding on either side of a grid point
        if k > 0 && self.time(k) > t {
            k -= 1;
        } else if k + 1 < self.n_steps && self.time(k + 1) <= t {
            k += 1;
        }
        k
    }

    /// How many intervals of `self` make up one interval of `coarse`.
    /// Errors unless `self` is an integer refinement of `coarse` with the
    /// same end time.
    pub fn refinement_of(&self, coarse: &TimeGrid) -> Result<usize> {
        let same_end = (self.t_end - coarse.t_end).abs() <= 1e-9 * self.t_end.max(1.0);
        if !same_end || self.n_steps % coarse.n_steps != 0 {
            return Err(Error::GridMismatch(format!(
                "grid ({}, {} steps) does not refine grid ({}, {} steps)",
                self.t_end, self.n_steps, coarse.t_end, coarse.n_steps
            )));
        }
        Ok(self.n_steps / coarse.n_steps)
    }

    pub fn is_integer_stepped(&self) -> bool {
        (self.step() - 1.0).abs() < 1e-12
    }
}
