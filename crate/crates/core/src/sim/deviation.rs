use serde::Serialize;

use super::{replicate_costs, CostEstimate, SimConfig};
use crate::error::{Error, Result};
use crate::game::GameSpec;
use crate::strategy::Strategy;

#[derive(Debug, Clone, Serialize)]
pub struct DeviationEntry {
    pub label: String,
    /// `V^N(pi', pi)`.
    pub estimate: CostEstimate,
    /// Paired per-replication differences `V^N(pi, pi) - V^N(pi', pi)`.
    pub gain: CostEstimate,
}

#[derive(Debug, Clone, Serialize)]
pub struct DeviationReport {
    /// `V^N(pi, pi)`.
    pub baseline: CostEstimate,
    pub deviations: Vec<DeviationEntry>,
    /// Largest estimated gain over the deviation set.
    pub max_gain: f64,
    /// Largest upper end of the gains' 95% intervals.
    pub max_gain_upper95: f64,
}

/// Compares player 0 following `pi` with player 0 switching to each
/// deviation while everybody else keeps `pi`. Replication `r` uses the same
/// seed in every run, and each player draws from its own stream, so the
/// other players see common random numbers.
pub fn deviation_test(
    spec: &GameSpec,
    cfg: &SimConfig,
    pi: &Strategy,
    deviations: &[(String, Strategy)],
) -> Result<DeviationReport> {
    if deviations.is_empty() {
        return Err(Error::InvalidConfig("deviation test needs at least one deviation".into()));
    }
    let mut base_cfg = cfg.clone();
    base_cfg.population = pi.clone();
    base_cfg.deviation = None;
    let base = replicate_costs(spec, &base_cfg)?;
    let baseline = CostEstimate::from_samples(&base, cfg.n_players, cfg.seed);

    let mut entries = Vec::with_capacity(deviations.len());
    for (label, dev) in deviations {
        let mut dev_cfg = base_cfg.clone();
        dev_cfg.deviation = Some(dev.clone());
        let costs = replicate_costs(spec, &dev_cfg)?;
        let diffs: Vec<f64> = base.iter().zip(&costs).map(|(b, d)| b - d).collect();
        entries.push(DeviationEntry {
            label: label.clone(),
            estimate: CostEstimate::from_samples(&costs, cfg.n_players, cfg.seed),
            gain: CostEstimate::from_samples(&diffs, cfg.n_players, cfg.seed),
        });
    }
    let max_gain = entries.iter().map(|e| e.gain.mean).fold(f64::NEG_INFINITY, f64::max);
    let max_gain_upper95 = entries
        .iter()
        .map(|e| e.gain.upper95())
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(DeviationReport {
        baseline,
        deviations: entries,
        max_gain,
        max_gain_upper95,
    })
}
