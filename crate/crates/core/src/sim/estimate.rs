use rayon::prelude::*;
use serde::Serialize;

use super::{simulate, SimConfig};
use crate::error::Result;
use crate::game::GameSpec;

/// Monte Carlo estimate of player 0's cost. The standard error and the
/// 95% half-width are absent with a single replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostEstimate {
    pub mean: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci95: Option<f64>,
    #[serde(rename = "R")]
    pub reps: usize,
    #[serde(rename = "N")]
    pub n_players: usize,
    pub seed: u64,
}

impl CostEstimate {
    /// Samples are summed in index order so the result does not depend on
    /// how replications were scheduled.
    pub fn from_samples(samples: &[f64], n_players: usize, seed: u64) -> Self {
        let r = samples.len();
        let mean = samples.iter().sum::<f64>() / r as f64;
        let (stderr, ci95) = if r >= 2 {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1) as f64;
            let se = (var / r as f64).sqrt();
            (Some(se), Some(1.96 * se))
        } else {
            (None, None)
        };
        Self {
            mean,
            stderr,
            ci95,
            reps: r,
            n_players,
            seed,
        }
    }

    /// Upper end of the 95% interval (the mean itself without one).
    pub fn upper95(&self) -> f64 {
        self.mean + self.ci95.unwrap_or(0.0)
    }
}

/// Player 0's realized cost in each replication `0..cfg.reps`, in order.
pub fn replicate_costs(spec: &GameSpec, cfg: &SimConfig) -> Result<Vec<f64>> {
    cfg.validate(spec)?;
    (0..cfg.reps as u64)
        .into_par_iter()
        .map(|rep| simulate(spec, cfg, rep).map(|t| t.cost))
        .collect()
}

pub fn estimate_vn(spec: &GameSpec, cfg: &SimConfig) -> Result<CostEstimate> {
    let costs = replicate_costs(spec, cfg)?;
    Ok(CostEstimate::from_samples(&costs, cfg.n_players, cfg.seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_samples_have_zero_error() {
        let e = CostEstimate::from_samples(&[1.5; 10], 4, 0);
        assert_eq!(e.mean, 1.5);
        assert_eq!(e.stderr, Some(0.0));
        assert_eq!(e.upper95(), 1.5);
    }

    #[test]
    fn stderr_definition() {
        let e = CostEstimate::from_samples(&[1.0, 2.0, 3.0, 4.0], 1, 0);
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((e.stderr.unwrap() - sd / 2.0).abs() < 1e-15);
        assert!((e.ci95.unwrap() - 1.96 * sd / 2.0).abs() < 1e-15);
        assert!(CostEstimate::from_samples(&[1.0], 1, 0).ci95.is_none());
    }
}
