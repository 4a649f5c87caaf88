//! Event-driven simulation of the asynchronous N-player game.
//!
//! Between events and strategy-grid boundaries every player's jump rate is
//! constant. Each player carries an Exp(1) amount of residual hazard; the
//! next jump is the player whose hazard runs out first, and at a boundary
//! the residuals carry over (memorylessness), so no time stepping is
//! involved.

use rand_distr::{Distribution, Exp1};

use super::{counts_of, draw_index, empirical, initial_states, SimConfig, SimTrace};
use crate::cost::tail_bound;
use crate::error::{Error, Result};
use crate::game::{GameSpec, Horizon, TimeMode};
use crate::strategy::BoundStrategy;

/// Per-state action distributions and total jump rates for one strategy at
/// the current population.
struct RateTable {
    pi: Vec<f64>,
    rate: Vec<f64>,
}

impl RateTable {
    fn new(e: usize, a: usize) -> Self {
        Self {
            pi: vec![0.0; e * a],
            rate: vec![0.0; e],
        }
    }

    fn refresh(&mut self, bound: &BoundStrategy<'_>, k: usize, t_k: f64, m: &[f64], q: &crate::game::Transitions) {
        let (e, a) = (q.n_states(), q.n_actions());
        for i in 0..e {
            let p = &mut self.pi[i * a..(i + 1) * a];
            bound.probs_into(k, t_k, i, m, p);
            self.rate[i] = (0..a).map(|b| p[b] * q.exit_rate(i, b)).sum();
        }
    }
}

pub fn simulate_ctmc(spec: &GameSpec, cfg: &SimConfig, rep: u64) -> Result<SimTrace> {
    if spec.time_mode() != TimeMode::Continuous {
        return Err(Error::InvalidConfig("event-driven simulation needs a continuous-time game".into()));
    }
    cfg.validate(spec)?;
    let grid = cfg.grid;
    let (e, a_n) = (spec.n_states(), spec.n_actions());
    let n = cfg.n_players;
    let beta = match spec.horizon {
        Horizon::Discounted(b) => b,
        Horizon::Finite(_) => 0.0,
    };
    let pop = cfg.population.bind(&grid)?;
    let dev = cfg.deviation.as_ref().map(|s| s.bind(&grid)).transpose()?;

    let mut rngs = cfg.player_rngs(rep);
    let mut states = initial_states(spec, &mut rngs);
    let mut counts = counts_of(&states, e);
    let mut clocks: Vec<f64> = rngs.iter_mut().map(|r| Exp1.sample(r)).collect();

    let mut trace = SimTrace::new(n, e, grid.t_end(), false);
    trace.push(0.0, None, None, &counts);
    trace.player0.push((0.0, states[0]));
    trace.tail_bound = tail_bound(spec, &grid);

    let mut q = spec.new_transitions();
    let mut c = spec.new_costs();
    let mut pop_table = RateTable::new(e, a_n);
    let mut dev_table = RateTable::new(e, a_n);
    let mut weights = vec![0.0; a_n * e];
    let mut t = 0.0;
    let mut k = 0;
    let mut cost = 0.0;

    // discounted integral of 1 over [t0, t1]
    let weight = |t0: f64, t1: f64| {
        if beta > 0.0 {
            ((-beta * t0).exp() - (-beta * t1).exp()) / beta
        } else {
            t1 - t0
        }
    };

    while k < grid.n_steps() {
        let m = empirical(&counts, n);
        spec.transitions_at(&m, &mut q);
        spec.costs_at(&m, &mut c);
        let t_k = grid.time(k);
        pop_table.refresh(&pop, k, t_k, &m, &q);
        if let Some(d) = &dev {
            dev_table.refresh(d, k, t_k, &m, &q);
        }
        let table_of = |player: usize| {
            if player == 0 && dev.is_some() {
                &dev_table
            } else {
                &pop_table
            }
        };

        let mut next: Option<(usize, f64)> = None;
        for (p, &s) in states.iter().enumerate() {
            let r = table_of(p).rate[s];
            if r > 0.0 {
                let dt = clocks[p] / r;
                if next.is_none_or(|(_, best)| dt < best) {
                    next = Some((p, dt));
                }
            }
        }
        let boundary = grid.time(k + 1);
        let (dt, jumper) = match next {
            Some((p, dt)) if t + dt < boundary => (dt, Some(p)),
            _ => (boundary - t, None),
        };

        let t0_table = table_of(0);
        let s0 = states[0];
        let c0: f64 = (0..a_n).map(|b| t0_table.pi[s0 * a_n + b] * c.get(s0, b)).sum();
        cost += c0 * weight(t, t + dt);

        for (p, &s) in states.iter().enumerate() {
            if Some(p) != jumper {
                clocks[p] = (clocks[p] - table_of(p).rate[s] * dt).max(0.0);
            }
        }
        t += dt;

        match jumper {
            None => {
                k += 1;
                t = grid.time(k);
            }
            Some(p) => {
                let i = states[p];
                let table = table_of(p);
                for b in 0..a_n {
                    for j in 0..e {
                        weights[b * e + j] = if j == i {
                            0.0
                        } else {
                            table.pi[i * a_n + b] * q.get(i, j, b).max(0.0)
                        };
                    }
                }
                let pick = draw_index(&mut rngs[p], &weights);
                let j = pick % e;
                counts[i] -= 1;
                counts[j] += 1;
                states[p] = j;
                clocks[p] = Exp1.sample(&mut rngs[p]);
                trace.push(t, Some(p), Some(j), &counts);
                if p == 0 {
                    trace.player0.push((t, j));
                }
            }
        }
    }
    trace.cost = cost;
    Ok(trace)
}
