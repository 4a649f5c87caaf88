//! Built-in games and their reference strategies.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::game::{
    AffineCosts, AffineTransitions, CostModel, CustomCost, Dynamics, GameSpec, Horizon, TimeGrid,
    TransitionModel,
};
use crate::strategy::{LocalStrategy, MarkovStrategy, Strategy};

pub const SCENARIOS: [&str; 5] = ["prisoner-mfg", "punish-finite", "folk-repeated", "nonexistence", "sir-demo"];

/// Tolerance used by strategies that test whether a distribution is a vertex.
const VERTEX_TOL: f64 = 1e-12;

pub fn scenario(name: &str) -> Result<GameSpec> {
    match name {
        "prisoner-mfg" => Ok(prisoner_mfg(0.5)),
        "punish-finite" => Ok(punish_finite(10)),
        "folk-repeated" => Ok(folk_repeated(0.9)),
        "nonexistence" => Ok(nonexistence(1.0)),
        "sir-demo" => Ok(sir_demo()),
        other => Err(Error::UnknownScenario(other.to_string())),
    }
}

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// "Choosing action `a` moves the player to state `a`": off-diagonal rate
/// (or probability) one towards the state of the same index.
fn move_to_action(n: usize, continuous: bool) -> AffineTransitions {
    let mut q = AffineTransitions::new(n, n);
    for a in 0..n {
        for i in 0..n {
            if continuous {
                if i != a {
                    q.set_base(i, a, a, 1.0);
                }
            } else {
                q.set_base(i, a, a, 1.0);
            }
        }
    }
    if continuous {
        q.complete_generator_diagonal();
    }
    q
}

/// State costs `c_i(m) = sum_j table[i][j] m_j`, independent of the action.
fn matrix_game_costs(table: &[&[f64]]) -> AffineCosts {
    let n = table.len();
    let mut c = AffineCosts::new(n, n);
    for (i, row) in table.iter().enumerate() {
        for a in 0..n {
            for (k, v) in row.iter().enumerate() {
                c.set_slope(i, a, k, *v);
            }
        }
    }
    c
}

/// Mean field prisoner's dilemma in continuous time with discount rate `beta`.
pub fn prisoner_mfg(beta: f64) -> GameSpec {
    GameSpec {
        name: "prisoner-mfg".into(),
        state_names: names(&["C", "D"]),
        action_names: names(&["C", "D"]),
        dynamics: Dynamics::Rates(TransitionModel::Affine(move_to_action(2, true))),
        cost: CostModel::Affine(matrix_game_costs(&[&[1.0, 3.0], &[0.0, 2.0]])),
        horizon: Horizon::Discounted(beta),
        m0: vec![1.0, 0.0],
        normalize_discrete_cost: true,
    }
}

/// Three-action game with a punishment state, synchronous, horizon `t_max` steps.
pub fn punish_finite(t_max: usize) -> GameSpec {
    GameSpec {
        name: "punish-finite".into(),
        state_names: names(&["C", "D", "P"]),
        action_names: names(&["C", "D", "P"]),
        dynamics: Dynamics::Kernel(TransitionModel::Affine(move_to_action(3, false))),
        cost: CostModel::Affine(matrix_game_costs(&[
            &[1.0, 3.0, 4.0],
            &[0.0, 2.0, 4.0],
            &[0.0, 3.0, 3.0],
        ])),
        horizon: Horizon::Finite(t_max as f64),
        m0: vec![1.0, 0.0, 0.0],
        normalize_discrete_cost: true,
    }
}

/// Repeated matching game: the state is the action played this round, the
/// action chosen now is next round's play. C-players pay `-2 m_C`, D-players
/// `-3 m_C - m_D`. Everybody starts on D.
pub fn folk_repeated(delta: f64) -> GameSpec {
    GameSpec {
        name: "folk-repeated".into(),
        state_names: names(&["C", "D"]),
        action_names: names(&["C", "D"]),
        dynamics: Dynamics::Kernel(TransitionModel::Affine(move_to_action(2, false))),
        cost: CostModel::Affine(matrix_game_costs(&[&[-2.0, 0.0], &[-3.0, -1.0]])),
        horizon: Horizon::Discounted(delta),
        m0: vec![0.0, 1.0],
        normalize_discrete_cost: true,
    }
}

/// Two-state game with a cost that jumps when half the population has left
/// state 1. It has no mean field equilibrium.
pub fn nonexistence(beta: f64) -> GameSpec {
    let mut q = AffineTransitions::new(2, 2);
    q.set_base(0, 1, 1, 1.0);
    q.complete_generator_diagonal();
    let cost = CustomCost {
        eval: Arc::new(|m: &[f64], out: &mut crate::game::CostTable| {
            let cb = if m[1] <= 0.5 { -1.0 } else { 1.0 };
            for i in 0..2 {
                out.set(i, 0, 0.0);
                out.set(i, 1, cb);
            }
        }),
        bound: 1.0,
        continuous: false,
    };
    GameSpec {
        name: "nonexistence".into(),
        state_names: names(&["1", "2"]),
        action_names: names(&["a", "b"]),
        dynamics: Dynamics::Rates(TransitionModel::Affine(q)),
        cost: CostModel::Custom(cost),
        horizon: Horizon::Discounted(beta),
        m0: vec![1.0, 0.0],
        normalize_discrete_cost: true,
    }
}

/// Susceptible/infected/recovered population where staying home lowers the
/// infection rate at a running cost. Infection rate is proportional to `m_I`.
pub fn sir_demo() -> GameSpec {
    let (s, i, r) = (0, 1, 2);
    let (out, home) = (0, 1);
    let mut q = AffineTransitions::new(3, 2);
    q.set_slope(s, i, out, i, 3.0);
    q.set_slope(s, i, home, i, 0.6);
    for a in [out, home] {
        q.set_base(i, r, a, 1.0);
        q.set_base(r, s, a, 0.1);
    }
    q.complete_generator_diagonal();
    let mut c = AffineCosts::new(3, 2);
    for a in [out, home] {
        c.set_base(i, a, 2.0);
    }
    c.set_base(s, home, 0.5);
    c.set_base(r, home, 0.5);
    GameSpec {
        name: "sir-demo".into(),
        state_names: names(&["S", "I", "R"]),
        action_names: names(&["out", "home"]),
        dynamics: Dynamics::Rates(TransitionModel::Affine(q)),
        cost: CostModel::Affine(c),
        horizon: Horizon::Discounted(0.5),
        m0: vec![0.95, 0.05, 0.0],
        normalize_discrete_cost: true,
    }
}

fn pure(out: &mut [f64], a: usize) {
    out.iter_mut().for_each(|v| *v = 0.0);
    out[a] = 1.0;
}

/// Cooperate while the whole population is in C, defect otherwise.
pub fn prisoner_grim() -> Strategy {
    MarkovStrategy::new(2, 2, "grim", |_t, _i, m, out| {
        pure(out, if m[0] >= 1.0 - VERTEX_TOL { 0 } else { 1 })
    })
    .into()
}

/// Play D for `k` rounds, then C as long as everybody followed the same
/// pattern, otherwise D forever. Requires the folk-repeated layout.
pub fn folk_grim(spec: &GameSpec, k: usize) -> Strategy {
    let (c, d) = (
        spec.action_index("C").unwrap_or(0),
        spec.action_index("D").unwrap_or(1),
    );
    MarkovStrategy::new(2, 2, format!("grim:{k}"), move |t, _i, m, out| {
        // the action picks next round's play
        let round = t.round() as usize;
        let a = if round + 1 < k {
            d
        } else {
            let followed = if round < k {
                m[d] >= 1.0 - VERTEX_TOL
            } else {
                m[c] >= 1.0 - VERTEX_TOL
            };
            if followed {
                c
            } else {
                d
            }
        };
        pure(out, a)
    })
    .into()
}

/// C before time 1 while everybody is in C, then D while nobody punishes,
/// P otherwise.
pub fn punish_strategy() -> Strategy {
    MarkovStrategy::new(3, 3, "punish", |t, _i, m, out| {
        let a = if t < 1.0 && m[0] >= 1.0 - VERTEX_TOL {
            0
        } else if t >= 1.0 && m[2] <= VERTEX_TOL {
            1
        } else {
            2
        };
        pure(out, a)
    })
    .into()
}

fn parse_action(spec: &GameSpec, s: &str) -> Result<usize> {
    spec.action_index(s)
        .ok_or_else(|| Error::UnknownStrategy(format!("no action `{s}` in {}", spec.name)))
}

/// Strategy by name: `uniform`, `always:<a>`, `switch:<a>:<b>:<t>`,
/// `grim` (prisoner-mfg), `grim:<k>` (folk-repeated), `punish`
/// (punish-finite). Actions are names or 1-based indices; local strategies
/// are built on `grid`.
pub fn named_strategy(spec: &GameSpec, name: &str, grid: &TimeGrid) -> Result<Strategy> {
    let (e, a) = (spec.n_states(), spec.n_actions());
    let parts: Vec<&str> = name.split(':').collect();
    let unknown = || Error::UnknownStrategy(name.to_string());
    match parts.as_slice() {
        ["uniform"] => Ok(LocalStrategy::uniform(*grid, e, a).into()),
        ["always", act] => Ok(LocalStrategy::always(*grid, e, a, parse_action(spec, act)?).into()),
        ["switch", before, after, t] => {
            let t: f64 = t.parse().map_err(|_| unknown())?;
            Ok(LocalStrategy::switch_at(*grid, e, a, parse_action(spec, before)?, parse_action(spec, after)?, t).into())
        }
        ["grim"] if spec.name == "prisoner-mfg" => Ok(prisoner_grim()),
        ["grim", k] if spec.name == "folk-repeated" => {
            let k: usize = k.parse().map_err(|_| unknown())?;
            Ok(folk_grim(spec, k))
        }
        ["punish"] if spec.name == "punish-finite" => Ok(punish_strategy()),
        _ => Err(unknown()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::unit_vector;

    #[test]
    fn prisoner_costs() {
        let spec = prisoner_mfg(0.5);
        let mut c = spec.new_costs();
        spec.costs_at(&[0.25, 0.75], &mut c);
        assert!((c.get(0, 0) - (0.25 + 3.0 * 0.75)).abs() < 1e-15);
        assert!((c.get(1, 1) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn punish_table_entry() {
        let spec = punish_finite(10);
        let mut c = spec.new_costs();
        spec.costs_at(&unit_vector(3, 2), &mut c);
        assert_eq!(c.get(2, 2), 3.0);
        spec.costs_at(&unit_vector(3, 0), &mut c);
        assert_eq!(c.get(2, 0), 0.0);
    }

    #[test]
    fn nonexistence_cost_jumps_at_half() {
        let spec = nonexistence(1.0);
        let mut c = spec.new_costs();
        spec.costs_at(&[0.5, 0.5], &mut c);
        assert_eq!(c.get(0, 1), -1.0);
        spec.costs_at(&[0.49, 0.51], &mut c);
        assert_eq!(c.get(0, 1), 1.0);
        assert_eq!(c.get(1, 0), 0.0);
    }

    #[test]
    fn unknown_names_rejected() {
        assert!(matches!(scenario("nope"), Err(Error::UnknownScenario(_))));
        let spec = prisoner_mfg(0.5);
        let grid = TimeGrid::new(1.0, 10).unwrap();
        assert!(named_strategy(&spec, "grim:3", &grid).is_err());
        assert!(named_strategy(&spec, "always:X", &grid).is_err());
        assert!(named_strategy(&spec, "always:D", &grid).is_ok());
        assert!(named_strategy(&spec, "always:2", &grid).is_ok());
    }
}
