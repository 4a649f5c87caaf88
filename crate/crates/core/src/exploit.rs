//! Exploitability: how much a single player gains by best-responding to the
//! flow a strategy induces.

use crate::best_response::best_response;
use crate::cost::evaluate_cost;
use crate::dynamics::integrate_population;
use crate::error::Result;
use crate::game::{GameSpec, TimeGrid};
use crate::path::PopulationPath;
use crate::strategy::{LocalStrategy, Strategy};

/// Differences below this are treated as numerical noise.
pub const EXPLOIT_NOISE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Exploitability {
    /// `V(pi, pi) - min(V(pi, pi), V(BR(pi), pi))`, clamped at 0 below noise.
    pub value: f64,
    pub v_pi: f64,
    pub v_br: f64,
    pub best_response: LocalStrategy,
    pub mpath: PopulationPath,
}

/// Exploitability of `pi` with every quantity computed on `grid`.
pub fn exploitability(spec: &GameSpec, pi: &Strategy, grid: &TimeGrid) -> Result<Exploitability> {
    let mpath = integrate_population(spec, pi, grid)?;
    exploitability_on(spec, pi, mpath)
}

/// As [`exploitability`], reusing an already integrated flow of `pi`.
pub fn exploitability_on(spec: &GameSpec, pi: &Strategy, mpath: PopulationPath) -> Result<Exploitability> {
    let v_pi = evaluate_cost(spec, pi, &mpath, &spec.m0)?.value;
    let br = best_response(spec, &mpath)?.strategy;
    let v_br = evaluate_cost(spec, &br.clone().into(), &mpath, &spec.m0)?.value;
    let mut value = v_pi - v_pi.min(v_br);
    if value < EXPLOIT_NOISE {
        value = 0.0;
    }
    Ok(Exploitability {
        value,
        v_pi,
        v_br,
        best_response: br,
        mpath,
    })
}
