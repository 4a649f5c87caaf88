//! Expected cost of a tagged player against a population path.

use crate::dynamics::{control_table, integrate_tagged};
use crate::error::{Error, Result};
use crate::game::{GameSpec, Horizon, TimeGrid, TimeMode};
use crate::path::PopulationPath;
use crate::strategy::Strategy;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostReport {
    pub value: f64,
    /// Upper bound on the cost neglected by truncating the horizon at the
    /// end of the grid (0 for finite horizons).
    pub tail_bound: f64,
}

/// Checks that a finite-horizon grid ends at the horizon.
pub(crate) fn check_horizon_grid(spec: &GameSpec, grid: &TimeGrid) -> Result<()> {
    if let Horizon::Finite(t) = spec.horizon {
        if (grid.t_end() - t).abs() > 1e-9 * t.max(1.0) {
            return Err(Error::GridMismatch(format!(
                "finite horizon T={t} but the grid ends at {}",
                grid.t_end()
            )));
        }
    }
    Ok(())
}

/// Bound on the discounted cost beyond `grid.t_end()`.
pub fn tail_bound(spec: &GameSpec, grid: &TimeGrid) -> f64 {
    let c_max = spec.cost_bound();
    match (spec.time_mode(), spec.horizon) {
        (_, Horizon::Finite(_)) => 0.0,
        (TimeMode::Continuous, Horizon::Discounted(beta)) => (-beta * grid.t_end()).exp() * c_max / beta,
        (TimeMode::Discrete, Horizon::Discounted(delta)) => {
            spec.discrete_cost_weight() * delta.powf(grid.t_end()) * c_max / (1.0 - delta)
        }
    }
}

/// Expected cost `V(pi0, pi)` of a player starting from `x0` and using
/// `pi0` while the population follows `mpath`.
///
/// Continuous time: trapezoidal rule on each grid interval, with the
/// interval's control at both endpoints. Discrete time: the exact sum over
/// `t = 0..T-1` (weighted by `1 - delta` when the spec asks for it).
pub fn evaluate_cost(spec: &GameSpec, pi0: &Strategy, mpath: &PopulationPath, x0: &[f64]) -> Result<CostReport> {
    let grid = *mpath.grid();
    check_horizon_grid(spec, &grid)?;
    let xpath = integrate_tagged(spec, pi0, mpath, x0)?;
    let bound = pi0.bind(&grid)?;
    let (e, a) = (spec.n_states(), spec.n_actions());
    let mut pi_k = vec![0.0; e * a];
    let mut c_cur = spec.new_costs();
    let mut c_next = spec.new_costs();
    spec.costs_at(mpath.at(0), &mut c_cur);

    let expected = |x: &[f64], c: &crate::game::CostTable, pi: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..e {
            if x[i] == 0.0 {
                continue;
            }
            let row = c.row(i);
            let mut ci = 0.0;
            for b in 0..a {
                ci += row[b] * pi[i * a + b];
            }
            s += x[i] * ci;
        }
        s
    };

    let mut value = 0.0;
    match spec.time_mode() {
        TimeMode::Continuous => {
            let beta = match spec.horizon {
                Horizon::Discounted(b) => b,
                Horizon::Finite(_) => 0.0,
            };
            let h = grid.step();
            for k in 0..grid.n_steps() {
                control_table(&bound, &grid, k, mpath.at(k), &mut pi_k);
                spec.costs_at(mpath.at(k + 1), &mut c_next);
                let left = expected(xpath.at(k), &c_cur, &pi_k) * (-beta * grid.time(k)).exp();
                let right = expected(xpath.at(k + 1), &c_next, &pi_k) * (-beta * grid.time(k + 1)).exp();
                value += 0.5 * h * (left + right);
                std::mem::swap(&mut c_cur, &mut c_next);
            }
        }
        TimeMode::Discrete => {
            let gamma = match spec.horizon {
                Horizon::Discounted(d) => d,
                Horizon::Finite(_) => 1.0,
            };
            let w = spec.discrete_cost_weight();
            let mut disc = 1.0;
            for k in 0..grid.n_steps() {
                spec.costs_at(mpath.at(k), &mut c_cur);
                control_table(&bound, &grid, k, mpath.at(k), &mut pi_k);
                value += disc * w * expected(xpath.at(k), &c_cur, &pi_k);
                disc *= gamma;
            }
        }
    }
    Ok(CostReport {
        value,
        tail_bound: tail_bound(spec, &grid),
    })
}

/// As [`evaluate_cost`], failing when the truncation tail exceeds `tail_tol`.
pub fn evaluate_cost_within(
    spec: &GameSpec,
    pi0: &Strategy,
    mpath: &PopulationPath,
    x0: &[f64],
    tail_tol: f64,
) -> Result<CostReport> {
    let tail = tail_bound(spec, mpath.grid());
    if tail > tail_tol {
        return Err(Error::TailTooLarge { tail, tol: tail_tol });
    }
    evaluate_cost(spec, pi0, mpath, x0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::integrate_population;
    use crate::scenario;
    use crate::strategy::LocalStrategy;

    #[test]
    fn all_cooperate_costs_one_over_beta() {
        let spec = scenario::prisoner_mfg(0.5);
        let grid = TimeGrid::new(40.0, 40_000).unwrap();
        let pi: Strategy = LocalStrategy::always(grid, 2, 2, 0).into();
        let m = integrate_population(&spec, &pi, &grid).unwrap();
        let r = evaluate_cost(&spec, &pi, &m, &spec.m0).unwrap();
        // trapezoid of exp(-t/2) on [0, 40]
        let exact = 2.0 * (1.0 - (-20.0f64).exp());
        assert!((r.value - exact).abs() < 1e-6, "{}", r.value);
        assert!((r.tail_bound - 6.0 * (-20.0f64).exp()).abs() < 1e-20);
    }

    #[test]
    fn short_grid_tail_is_refused() {
        let spec = scenario::prisoner_mfg(0.5);
        let grid = TimeGrid::new(5.0, 50).unwrap();
        let pi: Strategy = LocalStrategy::always(grid, 2, 2, 1).into();
        let m = integrate_population(&spec, &pi, &grid).unwrap();
        let err = evaluate_cost_within(&spec, &pi, &m, &spec.m0, 1e-8).unwrap_err();
        assert!(matches!(err, Error::TailTooLarge { .. }));
    }

    #[test]
    fn finite_horizon_grid_must_end_at_horizon() {
        let spec = scenario::punish_finite(4);
        let grid = TimeGrid::discrete(5);
        let pi: Strategy = LocalStrategy::always(grid, 3, 3, 1).into();
        let m = integrate_population(&spec, &pi, &grid).unwrap();
        assert!(evaluate_cost(&spec, &pi, &m, &spec.m0).is_err());
    }
}
