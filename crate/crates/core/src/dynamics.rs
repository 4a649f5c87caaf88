//! Forward integration of the population flow and of a tagged player's law.
//!
//! Continuous time uses classical RK4 with the control frozen on each grid
//! interval (a Markov strategy is read at the left endpoint of the interval)
//! followed by a simplex projection. Discrete time applies the one-step
//! recursion exactly.

use crate::error::{Error, Result};
use crate::game::{GameSpec, TimeGrid, TimeMode, Transitions};
use crate::path::{project_to_simplex, PopulationPath};
use crate::strategy::{BoundStrategy, LocalStrategy, Strategy};

pub(crate) fn check_grid_mode(spec: &GameSpec, grid: &TimeGrid) -> Result<()> {
    if spec.time_mode() == TimeMode::Discrete && !grid.is_integer_stepped() {
        return Err(Error::GridMismatch(format!(
            "discrete-time games need a unit-step grid, got step {}",
            grid.step()
        )));
    }
    Ok(())
}

fn check_distribution_len(spec: &GameSpec, v: &[f64], what: &str) -> Result<()> {
    if v.len() != spec.n_states() {
        return Err(Error::InvalidSpec(format!(
            "{what} has {} entries, expected {}",
            v.len(),
            spec.n_states()
        )));
    }
    Ok(())
}

fn check_strategy_dims(spec: &GameSpec, pi: &Strategy) -> Result<()> {
    if pi.n_states() != spec.n_states() || pi.n_actions() != spec.n_actions() {
        return Err(Error::InvalidStrategy(format!(
            "strategy is for {} states and {} actions, game has {} and {}",
            pi.n_states(),
            pi.n_actions(),
            spec.n_states(),
            spec.n_actions()
        )));
    }
    Ok(())
}

/// Fills `out[i * A + a]` with the action distribution of state `i` on
/// interval `k`, given the current population `m`.
pub(crate) fn control_table(bound: &BoundStrategy<'_>, grid: &TimeGrid, k: usize, m: &[f64], out: &mut [f64]) {
    let e = m.len();
    let a = out.len() / e;
    let t = grid.time(k);
    for i in 0..e {
        bound.probs_into(k, t, i, m, &mut out[i * a..(i + 1) * a]);
    }
}

/// `out_j = sum_i sum_a x_i pi_ia T_ija`.
fn push_forward(q: &Transitions, pi: &[f64], x: &[f64], out: &mut [f64]) {
    let e = q.n_states();
    let a_n = q.n_actions();
    out.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..e {
        if x[i] == 0.0 {
            continue;
        }
        for a in 0..a_n {
            let w = x[i] * pi[i * a_n + a];
            if w == 0.0 {
                continue;
            }
            for (o, r) in out.iter_mut().zip(q.row(i, a)) {
                *o += w * r;
            }
        }
    }
}

struct Rk4Scratch {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    stage: Vec<f64>,
    m_stage: Vec<f64>,
}

impl Rk4Scratch {
    fn new(e: usize) -> Self {
        Self {
            k1: vec![0.0; e],
            k2: vec![0.0; e],
            k3: vec![0.0; e],
            k4: vec![0.0; e],
            stage: vec![0.0; e],
            m_stage: vec![0.0; e],
        }
    }
}

/// Population flow `m^pi` from `spec.m0` on `grid`. The grid must refine the
/// strategy's grid when `pi` is local.
pub fn integrate_population(spec: &GameSpec, pi: &Strategy, grid: &TimeGrid) -> Result<PopulationPath> {
    check_grid_mode(spec, grid)?;
    check_strategy_dims(spec, pi)?;
    check_distribution_len(spec, &spec.m0, "m0")?;
    let bound = pi.bind(grid)?;
    let (e, a) = (spec.n_states(), spec.n_actions());
    let h = grid.step();
    let mut path = PopulationPath::zeros(*grid, e);
    path.at_mut(0).copy_from_slice(&spec.m0);
    let mut q = spec.new_transitions();
    let mut pi_k = vec![0.0; e * a];
    let mut s = Rk4Scratch::new(e);
    let mut next = vec![0.0; e];

    for k in 0..grid.n_steps() {
        let m = path.at(k).to_vec();
        control_table(&bound, grid, k, &m, &mut pi_k);
        match spec.time_mode() {
            TimeMode::Continuous => {
                spec.transitions_at(&m, &mut q);
                push_forward(&q, &pi_k, &m, &mut s.k1);
                for (st, (mv, d)) in s.stage.iter_mut().zip(m.iter().zip(&s.k1)) {
                    *st = mv + 0.5 * h * d;
                }
                spec.transitions_at(&s.stage, &mut q);
                push_forward(&q, &pi_k, &s.stage, &mut s.k2);
                for (st, (mv, d)) in s.stage.iter_mut().zip(m.iter().zip(&s.k2)) {
                    *st = mv + 0.5 * h * d;
                }
                spec.transitions_at(&s.stage, &mut q);
                push_forward(&q, &pi_k, &s.stage, &mut s.k3);
                for (st, (mv, d)) in s.stage.iter_mut().zip(m.iter().zip(&s.k3)) {
                    *st = mv + h * d;
                }
                spec.transitions_at(&s.stage, &mut q);
                push_forward(&q, &pi_k, &s.stage, &mut s.k4);
                for j in 0..e {
                    next[j] = m[j] + h / 6.0 * (s.k1[j] + 2.0 * s.k2[j] + 2.0 * s.k3[j] + s.k4[j]);
                }
            }
            TimeMode::Discrete => {
                spec.transitions_at(&m, &mut q);
                push_forward(&q, &pi_k, &m, &mut next);
            }
        }
        let (drift, neg) = project_to_simplex(&mut next);
        path.projection.merge_step(drift, neg);
        path.at_mut(k + 1).copy_from_slice(&next);
    }
    Ok(path)
}

/// Law `x(t)` of a tagged player using `pi0` from `x0` while the population
/// follows `mpath` (linearly interpolated between grid points).
pub fn integrate_tagged(
    spec: &GameSpec,
    pi0: &Strategy,
    mpath: &PopulationPath,
    x0: &[f64],
) -> Result<PopulationPath> {
    let grid = *mpath.grid();
    check_grid_mode(spec, &grid)?;
    check_strategy_dims(spec, pi0)?;
    check_distribution_len(spec, x0, "x0")?;
    if mpath.n_states() != spec.n_states() {
        return Err(Error::GridMismatch("population path has the wrong number of states".into()));
    }
    let bound = pi0.bind(&grid)?;
    let (e, a) = (spec.n_states(), spec.n_actions());
    let h = grid.step();
    let mut path = PopulationPath::zeros(grid, e);
    path.at_mut(0).copy_from_slice(x0);
    let mut q = spec.new_transitions();
    let mut pi_k = vec![0.0; e * a];
    let mut s = Rk4Scratch::new(e);
    let mut next = vec![0.0; e];

    for k in 0..grid.n_steps() {
        let x = path.at(k).to_vec();
        let m_k = mpath.at(k);
        control_table(&bound, &grid, k, m_k, &mut pi_k);
        match spec.time_mode() {
            TimeMode::Continuous => {
                spec.transitions_at(m_k, &mut q);
                push_forward(&q, &pi_k, &x, &mut s.k1);
                for j in 0..e {
                    s.m_stage[j] = 0.5 * (m_k[j] + mpath.at(k + 1)[j]);
                }
                spec.transitions_at(&s.m_stage, &mut q);
                for (st, (xv, d)) in s.stage.iter_mut().zip(x.iter().zip(&s.k1)) {
                    *st = xv + 0.5 * h * d;
                }
                push_forward(&q, &pi_k, &s.stage, &mut s.k2);
                for (st, (xv, d)) in s.stage.iter_mut().zip(x.iter().zip(&s.k2)) {
                    *st = xv + 0.5 * h * d;
                }
                push_forward(&q, &pi_k, &s.stage, &mut s.k3);
                spec.transitions_at(mpath.at(k + 1), &mut q);
                for (st, (xv, d)) in s.stage.iter_mut().zip(x.iter().zip(&s.k3)) {
                    *st = xv + h * d;
                }
                push_forward(&q, &pi_k, &s.stage, &mut s.k4);
                for j in 0..e {
                    next[j] = x[j] + h / 6.0 * (s.k1[j] + 2.0 * s.k2[j] + 2.0 * s.k3[j] + s.k4[j]);
                }
            }
            TimeMode::Discrete => {
                spec.transitions_at(m_k, &mut q);
                push_forward(&q, &pi_k, &x, &mut next);
            }
        }
        let (drift, neg) = project_to_simplex(&mut next);
        path.projection.merge_step(drift, neg);
        path.at_mut(k + 1).copy_from_slice(&next);
    }
    Ok(path)
}

/// The local strategy a population using `pi` actually plays along its own
/// flow on `grid`, together with that flow. Local strategies are resampled
/// onto `grid`; Markov strategies are read at `(t_k, i, m(t_k))`.
pub fn realize_local(spec: &GameSpec, pi: &Strategy, grid: &TimeGrid) -> Result<(LocalStrategy, PopulationPath)> {
    let mpath = integrate_population(spec, pi, grid)?;
    let bound = pi.bind(grid)?;
    let (e, a) = (spec.n_states(), spec.n_actions());
    let mut probs = vec![0.0; grid.n_steps() * e * a];
    for k in 0..grid.n_steps() {
        control_table(&bound, grid, k, mpath.at(k), &mut probs[k * e * a..(k + 1) * e * a]);
    }
    Ok((LocalStrategy::new(*grid, e, a, probs)?, mpath))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario;

    #[test]
    fn zero_generator_keeps_m0() {
        let mut spec = scenario::prisoner_mfg(0.5);
        spec.dynamics = crate::game::Dynamics::Rates(crate::game::TransitionModel::Affine(
            crate::game::AffineTransitions::new(2, 2),
        ));
        spec.m0 = vec![0.3, 0.7];
        let grid = TimeGrid::new(2.0, 20).unwrap();
        let pi = LocalStrategy::uniform(grid, 2, 2).into();
        let path = integrate_population(&spec, &pi, &grid).unwrap();
        for k in 0..=20 {
            assert_eq!(path.at(k), &[0.3, 0.7]);
        }
    }

    #[test]
    fn one_way_exit_matches_exponential() {
        let spec = scenario::prisoner_mfg(0.5);
        let grid = TimeGrid::new(5.0, 500).unwrap();
        let pi: Strategy = LocalStrategy::always(grid, 2, 2, 1).into();
        let path = integrate_population(&spec, &pi, &grid).unwrap();
        let err = (0..=500)
            .map(|k| (path.at(k)[1] - (1.0 - (-grid.time(k)).exp())).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn discrete_recursion_follows_switch() {
        let spec = scenario::folk_repeated(0.9);
        let grid = TimeGrid::discrete(6);
        let pi = scenario::folk_grim(&spec, 2);
        let path = integrate_population(&spec, &pi, &grid).unwrap();
        // states D, D, C, C, ...
        assert_eq!(path.at(1), &[0.0, 1.0]);
        assert_eq!(path.at(2), &[1.0, 0.0]);
        assert_eq!(path.at(6), &[1.0, 0.0]);
    }

    #[test]
    fn discrete_mode_rejects_fractional_grid() {
        let spec = scenario::folk_repeated(0.9);
        let grid = TimeGrid::new(3.0, 6).unwrap();
        let pi: Strategy = LocalStrategy::always(grid, 2, 2, 1).into();
        assert!(integrate_population(&spec, &pi, &grid).is_err());
    }
}
