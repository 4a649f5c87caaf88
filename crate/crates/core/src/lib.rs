//! Discrete mean field games: population flows, best responses, equilibrium
//! search and N-player simulation for finite state and action spaces with
//! population-dependent transition rates.

pub mod best_response;
pub mod cost;
pub mod dynamics;
pub mod error;
pub mod exploit;
pub mod export;
pub mod format;
pub mod game;
pub mod occupation;
pub mod path;
pub mod scenario;
pub mod sim;
pub mod solver;
pub mod strategy;
pub mod validate;

pub use best_response::{best_response, best_response_oracle, BestResponse, OracleResult, ValuePath};
pub use cost::{evaluate_cost, evaluate_cost_within, CostReport};
pub use dynamics::{integrate_population, integrate_tagged, realize_local};
pub use error::{Error, Result};
pub use exploit::{exploitability, Exploitability};
pub use game::{GameSpec, Horizon, TimeGrid, TimeMode};
pub use occupation::{occupation_check, OccupationPath, OccupationReport};
pub use path::PopulationPath;
pub use solver::{solve_mfe, verify_mfe, Damping, MfeResult, SolverConfig};
pub use strategy::{LocalStrategy, MarkovStrategy, Strategy};
pub use validate::{validate_spec, ValidationReport};
