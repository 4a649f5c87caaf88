//! Synchronous N-player game: every round all players pick an action and
//! then move independently according to the kernel at the current `M`.

use rand::Rng;

use super::{counts_of, draw_index, empirical, initial_states, SimConfig, SimTrace};
use crate::cost::tail_bound;
use crate::error::{Error, Result};
use crate::game::{GameSpec, Horizon, TimeMode};

pub fn simulate_sync(spec: &GameSpec, cfg: &SimConfig, rep: u64) -> Result<SimTrace> {
    if spec.time_mode() != TimeMode::Discrete {
        return Err(Error::InvalidConfig("synchronous simulation needs a discrete-time game".into()));
    }
    cfg.validate(spec)?;
    let grid = cfg.grid;
    let (e, a_n) = (spec.n_states(), spec.n_actions());
    let n = cfg.n_players;
    let gamma = match spec.horizon {
        Horizon::Discounted(d) => d,
        Horizon::Finite(_) => 1.0,
    };
    let w = spec.discrete_cost_weight();
    let pop = cfg.population.bind(&grid)?;
    let dev = cfg.deviation.as_ref().map(|s| s.bind(&grid)).transpose()?;

    let mut rngs = cfg.player_rngs(rep);
    let mut states = initial_states(spec, &mut rngs);
    let mut counts = counts_of(&states, e);
    let mut trace = SimTrace::new(n, e, grid.t_end(), true);
    trace.push(0.0, None, None, &counts);
    trace.player0.push((0.0, states[0]));
    trace.tail_bound = tail_bound(spec, &grid);

    let mut q = spec.new_transitions();
    let mut c = spec.new_costs();
    let mut pop_pi = vec![0.0; e * a_n];
    let mut dev_pi = vec![0.0; e * a_n];
    let mut disc = 1.0;
    let mut cost = 0.0;

    for k in 0..grid.n_steps() {
        let m = empirical(&counts, n);
        let t = grid.time(k);
        spec.transitions_at(&m, &mut q);
        spec.costs_at(&m, &mut c);
        for i in 0..e {
            pop.probs_into(k, t, i, &m, &mut pop_pi[i * a_n..(i + 1) * a_n]);
            if let Some(d) = &dev {
                d.probs_into(k, t, i, &m, &mut dev_pi[i * a_n..(i + 1) * a_n]);
            }
        }
        for (p, rng) in rngs.iter_mut().enumerate() {
            let i = states[p];
            let pi = if p == 0 && dev.is_some() { &dev_pi } else { &pop_pi };
            let action = draw_index(rng, &pi[i * a_n..(i + 1) * a_n]);
            if p == 0 {
                cost += disc * w * c.get(i, action);
            }
            let row = q.row(i, action);
            // a second uniform per player and round keeps streams aligned
            // whether or not the row is deterministic
            let u: f64 = rng.random();
            let total: f64 = row.iter().sum();
            let mut acc = 0.0;
            let mut next = i;
            for (j, &pj) in row.iter().enumerate() {
                if pj <= 0.0 {
                    continue;
                }
                acc += pj;
                next = j;
                if u * total < acc {
                    break;
                }
            }
            states[p] = next;
        }
        disc *= gamma;
        let new_counts = counts_of(&states, e);
        counts = new_counts;
        trace.push(grid.time(k + 1), None, None, &counts);
        if trace.player0.last().map(|x| x.1) != Some(states[0]) {
            trace.player0.push((grid.time(k + 1), states[0]));
        }
    }
    trace.cost = cost;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::TimeGrid;
    use crate::scenario;

    #[test]
    fn grim_population_is_deterministic() {
        let spec = scenario::folk_repeated(0.9);
        let grid = TimeGrid::discrete(400);
        let cfg = SimConfig::new(20, 11, 1, grid, scenario::folk_grim(&spec, 2));
        let trace = simulate_sync(&spec, &cfg, 0).unwrap();
        assert_eq!(trace.counts(1), &[0, 20]);
        assert_eq!(trace.counts(2), &[20, 0]);
        assert_eq!(trace.counts(400), &[20, 0]);
        assert!((trace.cost - (-1.0 - 0.81)).abs() < 1e-9);
    }
}
