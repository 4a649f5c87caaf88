//! Mean field equilibrium search by damped best-response iteration on the
//! population path.

use serde::Serialize;

use crate::best_response::best_response;
use crate::dynamics::integrate_population;
use crate::error::{Error, Result};
use crate::exploit::exploitability_on;
use crate::game::{GameSpec, TimeGrid};
use crate::path::PopulationPath;
use crate::strategy::{LocalStrategy, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "lambda", rename_all = "kebab-case")]
pub enum Damping {
    /// `m <- (1 - lambda) m + lambda m_hat` with a constant `lambda`.
    Fixed(f64),
    /// Running average of every computed flow, the initial one included.
    FictitiousPlay,
}

impl Damping {
    /// Weight given to the new flow at (0-based) iteration `k`.
    pub fn weight(&self, k: usize) -> f64 {
        match self {
            Damping::Fixed(l) => *l,
            Damping::FictitiousPlay => 1.0 / (k as f64 + 2.0),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub damping: Damping,
    pub eps_tol: f64,
    pub path_tol: f64,
    pub grid: TimeGrid,
}

impl SolverConfig {
    pub fn new(grid: TimeGrid) -> Self {
        Self {
            max_iters: 200,
            damping: Damping::FictitiousPlay,
            eps_tol: 1e-6,
            path_tol: 1e-6,
            grid,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Damping::Fixed(l) = self.damping {
            if !(l > 0.0 && l <= 1.0) {
                return Err(Error::InvalidConfig(format!("damping lambda={l} must lie in (0, 1]")));
            }
        }
        if !(self.eps_tol > 0.0) || !(self.path_tol > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Sup-norm change of the population path produced by the previous
    /// update (`None` before the first update).
    pub path_change: Option<f64>,
    /// Exploitability of this iteration's best response.
    pub exploitability: f64,
}

#[derive(Debug, Clone)]
pub struct MfeResult {
    pub strategy: LocalStrategy,
    /// Flow induced by `strategy`.
    pub mpath: PopulationPath,
    pub exploitability: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<IterationRecord>,
}

/// Iterates `pi_k = BR(m_k)`, `m_{k+1} = (1 - lambda_k) m_k + lambda_k m^{pi_k}`
/// from the flow of the uniform strategy. Stops once the exploitability of
/// `pi_k` and the last path change are both within tolerance; otherwise
/// reports `BR(m_final)` with `converged = false` after `max_iters`.
pub fn solve_mfe(spec: &GameSpec, cfg: &SolverConfig) -> Result<MfeResult> {
    cfg.validate()?;
    let grid = cfg.grid;
    let (e, a) = (spec.n_states(), spec.n_actions());
    let uniform: Strategy = LocalStrategy::uniform(grid, e, a).into();
    let mut m = integrate_population(spec, &uniform, &grid)?;
    let mut last_change: Option<f64> = None;
    let mut history = Vec::with_capacity(cfg.max_iters);

    for k in 0..cfg.max_iters {
        let pi = best_response(spec, &m)?.strategy;
        let strategy: Strategy = pi.clone().into();
        let m_hat = integrate_population(spec, &strategy, &grid)?;
        let ex = exploitability_on(spec, &strategy, m_hat.clone())?;
        history.push(IterationRecord {
            iteration: k,
            path_change: last_change,
            exploitability: ex.value,
        });
        let small_change = last_change.is_some_and(|c| c <= cfg.path_tol);
        if ex.value <= cfg.eps_tol && small_change {
            return Ok(MfeResult {
                strategy: pi,
                mpath: m_hat,
                exploitability: ex.value,
                iterations: k + 1,
                converged: true,
                history,
            });
        }
        let next = m.blend(&m_hat, cfg.damping.weight(k))?;
        last_change = Some(next.sup_distance(&m)?);
        m = next;
    }

    let pi = best_response(spec, &m)?.strategy;
    let strategy: Strategy = pi.clone().into();
    let ex = exploitability_on(spec, &strategy, integrate_population(spec, &strategy, &grid)?)?;
    Ok(MfeResult {
        strategy: pi,
        mpath: ex.mpath,
        exploitability: ex.value,
        iterations: cfg.max_iters,
        converged: false,
        history,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MfeVerification {
    pub is_equilibrium: bool,
    pub exploitability: f64,
    /// Largest simplex defect of the induced flow.
    pub flow_defect: f64,
    /// Largest pre-projection mass drift while integrating the flow.
    pub flow_drift: f64,
    /// Sup distance between the flow of `pi` and the flow of `BR(pi)`;
    /// informational, since a best response need not be unique.
    pub response_gap: f64,
}

/// Flow tolerance for [`verify_mfe`].
pub const FLOW_TOL: f64 = 1e-8;

/// `pi` passes when its exploitability is at most `eps` and its flow is a
/// well-formed path on the simplex.
pub fn verify_mfe(spec: &GameSpec, pi: &Strategy, eps: f64, grid: &TimeGrid) -> Result<MfeVerification> {
    let mpath = integrate_population(spec, pi, grid)?;
    let flow_defect = mpath.simplex_defect();
    let flow_drift = mpath.projection.max_mass_drift;
    let ex = exploitability_on(spec, pi, mpath)?;
    let br_flow = integrate_population(spec, &ex.best_response.clone().into(), grid)?;
    let response_gap = br_flow.sup_distance(&ex.mpath)?;
    let is_equilibrium = ex.value <= eps && flow_defect <= FLOW_TOL && flow_drift <= FLOW_TOL;
    Ok(MfeVerification {
        is_equilibrium,
        exploitability: ex.value,
        flow_defect,
        flow_drift,
        response_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario;

    #[test]
    fn prisoner_converges_undamped() {
        let spec = scenario::prisoner_mfg(0.5);
        let mut cfg = SolverConfig::new(spec.default_grid(0.01, 1e-8).unwrap());
        cfg.damping = Damping::Fixed(1.0);
        let r = solve_mfe(&spec, &cfg).unwrap();
        assert!(r.converged);
        assert!(r.iterations <= 5);
        assert!(r.strategy.is_always(1));
    }

    #[test]
    fn fictitious_play_step_bound() {
        let spec = scenario::prisoner_mfg(0.5);
        let mut cfg = SolverConfig::new(TimeGrid::new(10.0, 500).unwrap());
        cfg.max_iters = 6;
        let r = solve_mfe(&spec, &cfg).unwrap();
        for rec in &r.history[1..] {
            let k = rec.iteration - 1;
            assert!(rec.path_change.unwrap() <= 2.0 * Damping::FictitiousPlay.weight(k) + 1e-12);
        }
    }

    #[test]
    fn bad_damping_rejected() {
        let spec = scenario::prisoner_mfg(0.5);
        let mut cfg = SolverConfig::new(TimeGrid::new(10.0, 500).unwrap());
        cfg.damping = Damping::Fixed(1.5);
        assert!(solve_mfe(&spec, &cfg).is_err());
    }
}
