//! N-player stochastic games: exact event-driven simulation in continuous
//! time, synchronous simulation in discrete time, Monte Carlo estimates of
//! player 0's cost and deviation tests.
//!
//! Every player owns a ChaCha8 stream seeded with `seed + replication` and
//! selected by the player's index, so a player's draws do not depend on
//! what other players do. This gives common random numbers across runs that
//! differ only in player 0's strategy.

mod ctmc;
mod deviation;
mod estimate;
mod sync;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{GameSpec, TimeGrid, TimeMode};
use crate::path::PopulationPath;
use crate::strategy::Strategy;

pub use ctmc::simulate_ctmc;
pub use deviation::{deviation_test, DeviationEntry, DeviationReport};
pub use estimate::{estimate_vn, replicate_costs, CostEstimate};
pub use sync::simulate_sync;

/// Generator used for every stream; recorded in output metadata.
pub const RNG_NAME: &str = "ChaCha8Rng (rand_chacha 0.9), stream = player index";

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n_players: usize,
    pub seed: u64,
    pub reps: usize,
    /// Horizon of the simulation and the grid on which strategies are
    /// piecewise constant.
    pub grid: TimeGrid,
    pub population: Strategy,
    /// Strategy of player 0 when it deviates from the population.
    pub deviation: Option<Strategy>,
    /// Stream used by each player (identity when absent).
    pub stream_map: Option<Vec<u64>>,
}

impl SimConfig {
    pub fn new(n_players: usize, seed: u64, reps: usize, grid: TimeGrid, population: Strategy) -> Self {
        Self {
            n_players,
            seed,
            reps,
            grid,
            population,
            deviation: None,
            stream_map: None,
        }
    }

    pub fn validate(&self, spec: &GameSpec) -> Result<()> {
        if self.n_players == 0 {
            return Err(Error::InvalidConfig("need at least one player".into()));
        }
        if self.reps == 0 {
            return Err(Error::InvalidConfig("need at least one replication".into()));
        }
        if let Some(map) = &self.stream_map {
            if map.len() != self.n_players {
                return Err(Error::InvalidConfig(format!(
                    "stream map has {} entries for {} players",
                    map.len(),
                    self.n_players
                )));
            }
        }
        if spec.time_mode() == TimeMode::Discrete && !self.grid.is_integer_stepped() {
            return Err(Error::GridMismatch("synchronous games need a unit-step grid".into()));
        }
        for s in std::iter::once(&self.population).chain(self.deviation.as_ref()) {
            if s.n_states() != spec.n_states() || s.n_actions() != spec.n_actions() {
                return Err(Error::InvalidStrategy("strategy dimensions do not match the game".into()));
            }
            s.bind(&self.grid)?;
        }
        Ok(())
    }

    fn stream(&self, player: usize) -> u64 {
        self.stream_map.as_ref().map_or(player as u64, |m| m[player])
    }

    pub(crate) fn player_rngs(&self, rep: u64) -> Vec<ChaCha8Rng> {
        (0..self.n_players)
            .map(|n| {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(rep));
                rng.set_stream(self.stream(n));
                rng
            })
            .collect()
    }
}

/// Runs one replication with the simulator matching the game's time mode.
pub fn simulate(spec: &GameSpec, cfg: &SimConfig, rep: u64) -> Result<SimTrace> {
    match spec.time_mode() {
        TimeMode::Continuous => simulate_ctmc(spec, cfg, rep),
        TimeMode::Discrete => simulate_sync(spec, cfg, rep),
    }
}

/// One sample path. Row `r` holds the state counts from `times[r]` until
/// the next row; the first row is the initial configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimTrace {
    pub n_players: usize,
    pub n_states: usize,
    pub t_end: f64,
    /// Rows are rounds of a synchronous game rather than jump times.
    pub synchronous: bool,
    pub times: Vec<f64>,
    /// Player whose jump produced the row (continuous time only).
    pub event_player: Vec<Option<usize>>,
    pub new_state: Vec<Option<usize>>,
    counts: Vec<u32>,
    /// `(time, state)` each time player 0 changes state, starting at 0.
    pub player0: Vec<(f64, usize)>,
    /// Realized cost of player 0.
    pub cost: f64,
    pub tail_bound: f64,
}

impl SimTrace {
    pub(crate) fn new(n_players: usize, n_states: usize, t_end: f64, synchronous: bool) -> Self {
        Self {
            n_players,
            n_states,
            t_end,
            synchronous,
            times: Vec::new(),
            event_player: Vec::new(),
            new_state: Vec::new(),
            counts: Vec::new(),
            player0: Vec::new(),
            cost: 0.0,
            tail_bound: 0.0,
        }
    }

    pub(crate) fn push(&mut self, t: f64, player: Option<usize>, state: Option<usize>, counts: &[u32]) {
        self.times.push(t);
        self.event_player.push(player);
        self.new_state.push(state);
        self.counts.extend_from_slice(counts);
    }

    pub fn n_rows(&self) -> usize {
        self.times.len()
    }

    pub fn counts(&self, row: usize) -> &[u32] {
        &self.counts[row * self.n_states..(row + 1) * self.n_states]
    }

    /// Empirical distribution `M` of row `row`.
    pub fn empirical(&self, row: usize) -> Vec<f64> {
        let n = self.n_players as f64;
        self.counts(row).iter().map(|&c| c as f64 / n).collect()
    }

    /// `sup_t |M(t) - m(t)|_inf` over `[0, t_end]`, with `m` linearly
    /// interpolated. `M` is constant between rows and `m` is linear between
    /// grid points, so checking segment ends and interior grid points is exact.
    /// Synchronous traces are compared round by round.
    pub fn sup_deviation(&self, mpath: &PopulationPath) -> f64 {
        let grid = mpath.grid();
        let h = grid.step();
        let mut m = vec![0.0; self.n_states];
        let mut worst = 0.0_f64;
        if self.synchronous {
            for row in 0..self.n_rows() {
                mpath.value_at(self.times[row], &mut m);
                for (a, b) in self.empirical(row).iter().zip(&m) {
                    worst = worst.max((a - b).abs());
                }
            }
            return worst;
        }
        let mut check = |t: f64, emp: &[f64], worst: &mut f64| {
            mpath.value_at(t, &mut m);
            for (a, b) in emp.iter().zip(&m) {
                *worst = worst.max((a - b).abs());
            }
        };
        for row in 0..self.n_rows() {
            let emp = self.empirical(row);
            let start = self.times[row];
            let end = if row + 1 < self.n_rows() {
                self.times[row + 1]
            } else {
                self.t_end
            };
            check(start, &emp, &mut worst);
            check(end.min(grid.t_end()), &emp, &mut worst);
            let first = (start / h).ceil() as usize;
            let last = ((end / h).floor() as usize).min(grid.n_steps());
            for k in first..=last {
                let t = grid.time(k);
                if t > start && t < end {
                    check(t, &emp, &mut worst);
                }
            }
        }
        worst
    }
}

/// Categorical draw from unnormalized weights.
pub(crate) fn draw_index(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Initial states drawn iid from `m0`, one draw from each player's stream.
pub(crate) fn initial_states(spec: &GameSpec, rngs: &mut [ChaCha8Rng]) -> Vec<usize> {
    rngs.iter_mut().map(|rng| draw_index(rng, &spec.m0)).collect()
}

pub(crate) fn counts_of(states: &[usize], n_states: usize) -> Vec<u32> {
    let mut c = vec![0u32; n_states];
    for &s in states {
        c[s] += 1;
    }
    c
}

pub(crate) fn empirical(counts: &[u32], n: usize) -> Vec<f64> {
    counts.iter().map(|&c| c as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draw_index_skips_zero_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(draw_index(&mut rng, &[0.0, 1.0, 0.0]), 1);
        }
        let hits = (0..10_000).filter(|_| draw_index(&mut rng, &[1.0, 3.0]) == 1).count();
        assert!((hits as f64 / 10_000.0 - 0.75).abs() < 0.02);
    }
}
