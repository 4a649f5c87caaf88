//! Best responses to a population path: backward dynamic programming and an
//! exhaustive enumeration oracle for small instances.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::cost::{check_horizon_grid, evaluate_cost};
use crate::dynamics::check_grid_mode;
use crate::error::{Error, Result};
use crate::game::{CostTable, GameSpec, Horizon, TimeGrid, TimeMode, Transitions};
use crate::path::PopulationPath;
use crate::strategy::LocalStrategy;

/// Upper limit on the number of pure strategies the oracle enumerates.
pub const ORACLE_LIMIT: u128 = 1_000_000;

/// Optimal continuation value `v[k][i]` at each grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct ValuePath {
    grid: TimeGrid,
    n_states: usize,
    data: Vec<f64>,
}

impl ValuePath {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn at(&self, k: usize) -> &[f64] {
        &self.data[k * self.n_states..(k + 1) * self.n_states]
    }

    fn at_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.n_states..(k + 1) * self.n_states]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

#[derive(Debug, Clone)]
pub struct BestResponse {
    pub strategy: LocalStrategy,
    pub values: ValuePath,
}

/// Index of the smallest value; the first one wins ties.
fn argmin(values: &[f64]) -> (usize, f64) {
    let mut best = (0, values[0]);
    for (a, &v) in values.iter().enumerate().skip(1) {
        if v < best.1 {
            best = (a, v);
        }
    }
    best
}

/// Value of the stationary problem with the population frozen at `m`, used
/// as the continuation value beyond the end of a discounted grid. Solved by
/// policy iteration.
pub fn stationary_value(spec: &GameSpec, m: &[f64]) -> Result<Vec<f64>> {
    let (e, a_n) = (spec.n_states(), spec.n_actions());
    let mut q = spec.new_transitions();
    let mut c = spec.new_costs();
    spec.transitions_at(m, &mut q);
    spec.costs_at(m, &mut c);
    let (continuous, rate) = match (spec.time_mode(), spec.horizon) {
        (TimeMode::Continuous, Horizon::Discounted(beta)) => (true, beta),
        (TimeMode::Discrete, Horizon::Discounted(delta)) => (false, delta),
        (_, Horizon::Finite(_)) => return Ok(vec![0.0; e]),
    };
    let w = spec.discrete_cost_weight();

    // continuous: beta v = min_a c_a + Q_a v; discrete: v = min_a w c_a + delta P_a v
    let q_values = |v: &[f64], i: usize, out: &mut [f64]| {
        for a in 0..a_n {
            let ev: f64 = q.row(i, a).iter().zip(v).map(|(t, x)| t * x).sum();
            out[a] = if continuous {
                (c.get(i, a) + ev) / rate
            } else {
                w * c.get(i, a) + rate * ev
            };
        }
    };

    let mut policy: Vec<usize> = (0..e).map(|i| argmin(c.row(i)).0).collect();
    let mut v = vec![0.0; e];
    let mut scratch = vec![0.0; a_n];
    for _ in 0..100 {
        let mut lhs = DMatrix::<f64>::zeros(e, e);
        let mut rhs = DVector::<f64>::zeros(e);
        for i in 0..e {
            let a = policy[i];
            for j in 0..e {
                lhs[(i, j)] = if continuous {
                    -q.get(i, j, a)
                } else {
                    -rate * q.get(i, j, a)
                };
            }
            lhs[(i, i)] += if continuous { rate } else { 1.0 };
            rhs[i] = if continuous { c.get(i, a) } else { w * c.get(i, a) };
        }
        let sol = lhs
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::InvalidSpec("singular stationary system".into()))?;
        v.copy_from_slice(sol.as_slice());
        let scale = v.iter().fold(1.0_f64, |acc, x| acc.max(x.abs()));
        let mut changed = false;
        for i in 0..e {
            q_values(&v, i, &mut scratch);
            let (best, val) = argmin(&scratch);
            if val < scratch[policy[i]] - 1e-12 * scale {
                policy[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(v)
}

fn check_scheme(spec: &GameSpec, grid: &TimeGrid) -> Result<()> {
    if let (TimeMode::Continuous, Horizon::Discounted(beta)) = (spec.time_mode(), spec.horizon) {
        if beta * grid.step() >= 1.0 {
            return Err(Error::SchemeUnstable(format!(
                "beta*h = {} must be below 1",
                beta * grid.step()
            )));
        }
    }
    Ok(())
}

fn check_exit_rates(q: &Transitions, h: f64, k: usize) -> Result<()> {
    for a in 0..q.n_actions() {
        for i in 0..q.n_states() {
            let r = q.exit_rate(i, a);
            if h * r > 1.0 {
                return Err(Error::SchemeUnstable(format!(
                    "h * exit rate = {} > 1 in state {} under action {} at step {k}",
                    h * r,
                    i + 1,
                    a + 1
                )));
            }
        }
    }
    Ok(())
}

/// Pure best response to `mpath` by backward induction on its grid.
///
/// Continuous time uses the explicit scheme
/// `v_i(t_k) = min_a h (c_ia(m_k) + c_ia(m_{k+1}))/2 + (1 - beta h)(v_i(t_{k+1}) + h sum_j Q_ija(m_k) v_j(t_{k+1}))`;
/// discrete time is exact. Finite horizons end at 0; discounted games end
/// at the stationary value with the population frozen at its last point.
/// Ties go to the lowest action index.
pub fn best_response(spec: &GameSpec, mpath: &PopulationPath) -> Result<BestResponse> {
    let grid = *mpath.grid();
    check_grid_mode(spec, &grid)?;
    check_horizon_grid(spec, &grid)?;
    check_scheme(spec, &grid)?;
    if mpath.n_states() != spec.n_states() {
        return Err(Error::GridMismatch("population path has the wrong number of states".into()));
    }
    let (e, a_n) = (spec.n_states(), spec.n_actions());
    let n = grid.n_steps();
    let h = grid.step();
    let mut values = ValuePath {
        grid,
        n_states: e,
        data: vec![0.0; grid.n_points() * e],
    };
    let terminal = stationary_value(spec, mpath.last())?;
    values.at_mut(n).copy_from_slice(&terminal);

    let mut q = spec.new_transitions();
    let mut c_k = spec.new_costs();
    let mut c_next: CostTable = spec.new_costs();
    spec.costs_at(mpath.at(n), &mut c_next);
    let mut choice = vec![0usize; n * e];
    let mut scratch = vec![0.0; a_n];
    let mut v_k = vec![0.0; e];

    let (continuous, beta, gamma) = match (spec.time_mode(), spec.horizon) {
        (TimeMode::Continuous, Horizon::Discounted(b)) => (true, b, 0.0),
        (TimeMode::Continuous, Horizon::Finite(_)) => (true, 0.0, 0.0),
        (TimeMode::Discrete, Horizon::Discounted(d)) => (false, 0.0, d),
        (TimeMode::Discrete, Horizon::Finite(_)) => (false, 0.0, 1.0),
    };
    let w = spec.discrete_cost_weight();

    for k in (0..n).rev() {
        let m = mpath.at(k);
        spec.transitions_at(m, &mut q);
        spec.costs_at(m, &mut c_k);
        if continuous {
            check_exit_rates(&q, h, k)?;
        }
        let v_next = values.at(k + 1).to_vec();
        for i in 0..e {
            for a in 0..a_n {
                let ev: f64 = q.row(i, a).iter().zip(&v_next).map(|(t, x)| t * x).sum();
                scratch[a] = if continuous {
                    0.5 * h * (c_k.get(i, a) + c_next.get(i, a)) + (1.0 - beta * h) * (v_next[i] + h * ev)
                } else {
                    w * c_k.get(i, a) + gamma * ev
                };
            }
            let (best, val) = argmin(&scratch);
            choice[k * e + i] = best;
            v_k[i] = val;
        }
        values.at_mut(k).copy_from_slice(&v_k);
        std::mem::swap(&mut c_k, &mut c_next);
    }
    let strategy = LocalStrategy::pure_from_fn(grid, e, a_n, |k, i| choice[k * e + i]);
    Ok(BestResponse { strategy, values })
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub strategy: LocalStrategy,
    pub cost: f64,
    pub candidates: u64,
}

/// Decodes candidate `index` as base-`A` digits, the first (interval 0,
/// state 1) being the most significant, so index order is lexicographic.
pub fn oracle_candidate(coarse: &TimeGrid, n_states: usize, n_actions: usize, index: u64) -> LocalStrategy {
    let slots = coarse.n_steps() * n_states;
    let mut digits = vec![0usize; slots];
    let mut rest = index;
    for pos in (0..slots).rev() {
        digits[pos] = (rest % n_actions as u64) as usize;
        rest /= n_actions as u64;
    }
    LocalStrategy::pure_from_fn(*coarse, n_states, n_actions, |k, i| digits[k * n_states + i])
}

/// Evaluates every pure strategy that is constant on the intervals of
/// `coarse` against `mpath` (starting from `spec.m0`) and returns the
/// cheapest, the lexicographically first among exact ties.
pub fn best_response_oracle(spec: &GameSpec, mpath: &PopulationPath, coarse: &TimeGrid) -> Result<OracleResult> {
    let (e, a_n) = (spec.n_states(), spec.n_actions());
    mpath.grid().refinement_of(coarse)?;
    let count = (a_n as u128)
        .checked_pow((e * coarse.n_steps()) as u32)
        .unwrap_or(u128::MAX);
    if count > ORACLE_LIMIT {
        return Err(Error::TooLarge(count));
    }
    let count = count as u64;
    let best = (0..count)
        .into_par_iter()
        .map(|idx| {
            let s = oracle_candidate(coarse, e, a_n, idx).into();
            evaluate_cost(spec, &s, mpath, &spec.m0).map(|r| (r.value, idx))
        })
        .try_reduce(
            || (f64::INFINITY, u64::MAX),
            |x, y| {
                let pick_x = x.0 < y.0 || (x.0 == y.0 && x.1 <= y.1) || y.0.is_nan();
                Ok(if pick_x { x } else { y })
            },
        )?;
    Ok(OracleResult {
        strategy: oracle_candidate(coarse, e, a_n, best.1),
        cost: best.0,
        candidates: count,
    })
}
