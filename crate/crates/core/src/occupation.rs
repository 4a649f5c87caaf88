//! Occupation-measure view of a tagged player's problem.
//!
//! With `z_ia(t) = x_i(t) pi_ia(t)` the player's cost is linear in `z` and
//! the forward equation becomes the linear constraint
//! `dx_j/dt = sum_ia z_ia Q_ija(m(t))`. This module rebuilds `z` from a
//! strategy and checks those constraints and the linear objective against
//! [`evaluate_cost`](crate::cost::evaluate_cost).

use crate::cost::evaluate_cost;
use crate::dynamics::integrate_tagged;
use crate::error::Result;
use crate::game::{GameSpec, Horizon, TimeGrid, TimeMode};
use crate::path::PopulationPath;
use crate::strategy::{LocalStrategy, Strategy};

pub const SIMPLEX_CHECK_TOL: f64 = 1e-9;
pub const OBJECTIVE_TOL: f64 = 1e-9;

/// `z` on each grid interval, at its left endpoint and as the left limit at
/// its right endpoint (the interval's control applied to `x(t_{k+1})`).
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationPath {
    grid: TimeGrid,
    n_states: usize,
    n_actions: usize,
    x: PopulationPath,
    left: Vec<f64>,
    right: Vec<f64>,
}

impl OccupationPath {
    pub fn build(spec: &GameSpec, pi0: &LocalStrategy, mpath: &PopulationPath, x0: &[f64]) -> Result<Self> {
        let strategy: Strategy = pi0.clone().into();
        let x = integrate_tagged(spec, &strategy, mpath, x0)?;
        let grid = *mpath.grid();
        let bound = strategy.bind(&grid)?;
        let (e, a) = (spec.n_states(), spec.n_actions());
        let mut left = vec![0.0; grid.n_steps() * e * a];
        let mut right = vec![0.0; grid.n_steps() * e * a];
        let mut p = vec![0.0; a];
        for k in 0..grid.n_steps() {
            for i in 0..e {
                bound.probs_into(k, grid.time(k), i, mpath.at(k), &mut p);
                for b in 0..a {
                    let idx = (k * e + i) * a + b;
                    left[idx] = x.at(k)[i] * p[b];
                    right[idx] = x.at(k + 1)[i] * p[b];
                }
            }
        }
        Ok(Self {
            grid,
            n_states: e,
            n_actions: a,
            x,
            left,
            right,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn x(&self) -> &PopulationPath {
        &self.x
    }

    /// `z_ia` at the left endpoint of interval `k`.
    pub fn z(&self, k: usize, i: usize, a: usize) -> f64 {
        self.left[(k * self.n_states + i) * self.n_actions + a]
    }

    /// Mutable access to the left-endpoint entry, for fault injection in tests.
    pub fn z_mut(&mut self, k: usize, i: usize, a: usize) -> &mut f64 {
        &mut self.left[(k * self.n_states + i) * self.n_actions + a]
    }

    fn z_right(&self, k: usize, i: usize, a: usize) -> f64 {
        self.right[(k * self.n_states + i) * self.n_actions + a]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupationReport {
    /// `max |sum_a z_ia - x_i|`.
    pub marginal_residual: f64,
    /// Most negative entry of `z` (0 when all are nonnegative).
    pub min_entry: f64,
    /// `max |finite-difference dx/dt - sum_ia z_ia Q_ija|` (continuous) or
    /// `max |x(t+1) - sum_ia z_ia P_ija|` (discrete).
    pub dynamics_residual: f64,
    pub dynamics_tol: f64,
    /// Linear objective evaluated from `z`.
    pub objective: f64,
    /// Cost from [`evaluate_cost`](crate::cost::evaluate_cost).
    pub cost: f64,
    pub violations: Vec<String>,
}

impl OccupationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Objective `sum_ia z_ia c_ia(m)`, discounted, integrated with the same
/// trapezoid rule as the cost evaluator (or summed in discrete time).
fn objective(spec: &GameSpec, occ: &OccupationPath, mpath: &PopulationPath) -> f64 {
    let grid = occ.grid;
    let (e, a_n) = (occ.n_states, occ.n_actions);
    let mut c0 = spec.new_costs();
    let mut c1 = spec.new_costs();
    let linear = |c: &crate::game::CostTable, k: usize, right: bool| {
        let mut s = 0.0;
        for i in 0..e {
            for a in 0..a_n {
                let z = if right { occ.z_right(k, i, a) } else { occ.z(k, i, a) };
                s += z * c.get(i, a);
            }
        }
        s
    };
    let mut total = 0.0;
    match spec.time_mode() {
        TimeMode::Continuous => {
            let beta = match spec.horizon {
                Horizon::Discounted(b) => b,
                Horizon::Finite(_) => 0.0,
            };
            let h = grid.step();
            for k in 0..grid.n_steps() {
                spec.costs_at(mpath.at(k), &mut c0);
                spec.costs_at(mpath.at(k + 1), &mut c1);
                let l = linear(&c0, k, false) * (-beta * grid.time(k)).exp();
                let r = linear(&c1, k, true) * (-beta * grid.time(k + 1)).exp();
                total += 0.5 * h * (l + r);
            }
        }
        TimeMode::Discrete => {
            let gamma = match spec.horizon {
                Horizon::Discounted(d) => d,
                Horizon::Finite(_) => 1.0,
            };
            let w = spec.discrete_cost_weight();
            for k in 0..grid.n_steps() {
                spec.costs_at(mpath.at(k), &mut c0);
                total += w * gamma.powi(k as i32) * linear(&c0, k, false);
            }
        }
    }
    total
}

/// Checks an occupation path against its defining constraints and compares
/// its objective with the directly evaluated cost of `pi0`.
pub fn check_occupation(
    spec: &GameSpec,
    occ: &OccupationPath,
    pi0: &LocalStrategy,
    mpath: &PopulationPath,
    x0: &[f64],
) -> Result<OccupationReport> {
    let grid = occ.grid;
    let (e, a_n) = (occ.n_states, occ.n_actions);
    let h = grid.step();
    let mut marginal_residual = 0.0_f64;
    let mut min_entry = 0.0_f64;
    let mut dynamics_residual = 0.0_f64;
    let mut q = spec.new_transitions();
    let mut flow = vec![0.0; e];

    for k in 0..grid.n_steps() {
        let x = occ.x.at(k);
        for i in 0..e {
            let s: f64 = (0..a_n).map(|a| occ.z(k, i, a)).sum();
            marginal_residual = marginal_residual.max((s - x[i]).abs());
            for a in 0..a_n {
                min_entry = min_entry.min(occ.z(k, i, a));
            }
        }
        spec.transitions_at(mpath.at(k), &mut q);
        flow.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..e {
            for a in 0..a_n {
                let z = occ.z(k, i, a);
                for (j, t) in q.row(i, a).iter().enumerate() {
                    flow[j] += z * t;
                }
            }
        }
        let x_next = occ.x.at(k + 1);
        for j in 0..e {
            let r = match spec.time_mode() {
                TimeMode::Continuous => (x_next[j] - x[j]) / h - flow[j],
                TimeMode::Discrete => x_next[j] - flow[j],
            };
            dynamics_residual = dynamics_residual.max(r.abs());
        }
    }

    let dynamics_tol = match spec.time_mode() {
        TimeMode::Continuous => 10.0 * h,
        TimeMode::Discrete => SIMPLEX_CHECK_TOL,
    };
    let objective = objective(spec, occ, mpath);
    let cost = evaluate_cost(spec, &pi0.clone().into(), mpath, x0)?.value;

    let mut violations = Vec::new();
    if marginal_residual > SIMPLEX_CHECK_TOL {
        violations.push(format!("sum_a z differs from x by {marginal_residual:.3e}"));
    }
    if min_entry < -SIMPLEX_CHECK_TOL {
        violations.push(format!("negative occupation entry {min_entry:.3e}"));
    }
    if dynamics_residual > dynamics_tol {
        violations.push(format!(
            "forward equation residual {dynamics_residual:.3e} exceeds {dynamics_tol:.3e}"
        ));
    }
    if (objective - cost).abs() > OBJECTIVE_TOL {
        violations.push(format!("objective {objective} differs from cost {cost}"));
    }
    Ok(OccupationReport {
        marginal_residual,
        min_entry,
        dynamics_residual,
        dynamics_tol,
        objective,
        cost,
        violations,
    })
}

/// Builds the occupation path of `pi0` and checks it.
pub fn occupation_check(
    spec: &GameSpec,
    pi0: &LocalStrategy,
    mpath: &PopulationPath,
    x0: &[f64],
) -> Result<OccupationReport> {
    let occ = OccupationPath::build(spec, pi0, mpath, x0)?;
    check_occupation(spec, &occ, pi0, mpath, x0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::best_response::best_response;
    use crate::dynamics::integrate_population;
    use crate::scenario;

    #[test]
    fn prisoner_best_response_is_consistent() {
        let spec = scenario::prisoner_mfg(0.5);
        let grid = TimeGrid::new(20.0, 2000).unwrap();
        let pi = LocalStrategy::uniform(grid, 2, 2);
        let m = integrate_population(&spec, &pi.into(), &grid).unwrap();
        let br = best_response(&spec, &m).unwrap();
        let report = occupation_check(&spec, &br.strategy, &m, &spec.m0).unwrap();
        assert!(report.passed(), "{:?}", report.violations);
        assert!(report.marginal_residual < 1e-15);
    }

    #[test]
    fn injected_fault_is_flagged() {
        let spec = scenario::prisoner_mfg(0.5);
        let grid = TimeGrid::new(20.0, 2000).unwrap();
        let pi = LocalStrategy::always(grid, 2, 2, 1);
        let m = integrate_population(&spec, &pi.clone().into(), &grid).unwrap();
        let mut occ = OccupationPath::build(&spec, &pi, &m, &spec.m0).unwrap();
        *occ.z_mut(10, 0, 1) += 1e-3;
        let report = check_occupation(&spec, &occ, &pi, &m, &spec.m0).unwrap();
        assert!(!report.passed());
        assert!(report.violations[0].contains("sum_a z"));
    }
}
