use dmfg::best_response::best_response_oracle;
use dmfg::format::{parse_spec, spec_to_toml};
use dmfg::game::{AffineCosts, AffineTransitions, CostModel, Dynamics, GameSpec, Horizon, TransitionModel};
use dmfg::validate::IssueKind;
use dmfg::{
    best_response, exploitability, integrate_population, scenario, solve_mfe, validate_spec, verify_mfe, Damping, Error,
    LocalStrategy, SolverConfig, Strategy, TimeGrid,
};

fn zero_cost_game() -> GameSpec {
    let mut q = AffineTransitions::new(2, 2);
    q.set_base(0, 1, 0, 0.7);
    q.set_base(1, 0, 1, 1.3);
    q.complete_generator_diagonal();
    GameSpec {
        name: "zero-cost".into(),
        state_names: vec!["u".into(), "v".into()],
        action_names: vec!["p".into(), "q".into()],
        dynamics: Dynamics::Rates(TransitionModel::Affine(q)),
        cost: CostModel::Affine(AffineCosts::new(2, 2)),
        horizon: Horizon::Discounted(1.0),
        m0: vec![0.5, 0.5],
        normalize_discrete_cost: true,
    }
}

#[test]
fn folk_game_solves_to_all_defect() {
    let spec = scenario::folk_repeated(0.9);
    let mut cfg = SolverConfig::new(spec.default_grid(1.0, 1e-8).unwrap());
    let fp = solve_mfe(&spec, &cfg).unwrap();
    assert!(fp.strategy.is_always(1));
    assert!(fp.exploitability < 1e-9);
    cfg.damping = Damping::Fixed(1.0);
    let r = solve_mfe(&spec, &cfg).unwrap();
    assert!(r.converged);
    assert!(r.strategy.is_always(1));
    assert!(r.exploitability < 1e-9);
}

#[test]
fn verify_mfe_examples() {
    let spec = scenario::prisoner_mfg(0.5);
    let grid = spec.default_grid(0.01, 1e-8).unwrap();
    let d: Strategy = LocalStrategy::always(grid, 2, 2, 1).into();
    let c: Strategy = LocalStrategy::always(grid, 2, 2, 0).into();
    assert!(verify_mfe(&spec, &d, 1e-4, &grid).unwrap().is_equilibrium);
    let v = verify_mfe(&spec, &c, 1e-4, &grid).unwrap();
    assert!(!v.is_equilibrium && v.exploitability > 1.0);

    let zero = zero_cost_game();
    let grid = zero.default_grid(0.05, 1e-8).unwrap();
    let any: Strategy = LocalStrategy::switch_at(grid, 2, 2, 1, 0, 2.0).into();
    assert!(verify_mfe(&zero, &any, 0.0, &grid).unwrap().is_equilibrium);
    assert_eq!(exploitability(&zero, &any, &grid).unwrap().value, 0.0);
}

#[test]
fn undamped_iteration_on_nonexistence_alternates() {
    let spec = scenario::nonexistence(1.0);
    let grid = spec.default_grid(0.01, 1e-8).unwrap();
    let mut cfg = SolverConfig::new(grid);
    cfg.damping = Damping::Fixed(1.0);
    cfg.max_iters = 200;
    let r = solve_mfe(&spec, &cfg).unwrap();
    assert!(!r.converged);
    assert!(r.exploitability > 0.01);
    // late iterates bounce between two flows
    let tail: Vec<f64> = r.history[190..].iter().map(|h| h.exploitability).collect();
    assert!(tail.iter().all(|&e| e > 0.01), "{tail:?}");
    // the reported strategy either never switches or switches near ln 2
    let switch = (0..grid.n_steps()).find(|&k| r.strategy.pure_action(k, 0) == Some(0));
    if let Some(k) = switch {
        assert!((grid.time(k) - 2f64.ln()).abs() < 0.02, "switch at {}", grid.time(k));
    }
}

#[test]
fn best_response_breaks_ties_towards_first_action() {
    let zero = zero_cost_game();
    let grid = TimeGrid::new(3.0, 30).unwrap();
    let m = integrate_population(&zero, &LocalStrategy::uniform(grid, 2, 2).into(), &grid).unwrap();
    assert!(best_response(&zero, &m).unwrap().strategy.is_always(0));
}

#[test]
fn oracle_refuses_huge_enumerations() {
    let spec = scenario::prisoner_mfg(0.5);
    let grid = TimeGrid::new(20.0, 20).unwrap();
    let m = integrate_population(&spec, &LocalStrategy::uniform(grid, 2, 2).into(), &grid).unwrap();
    let err = best_response_oracle(&spec, &m, &grid).unwrap_err();
    assert!(matches!(err, Error::TooLarge(_)));
}

#[test]
fn catalog_validation() {
    for name in scenario::SCENARIOS {
        let report = validate_spec(&scenario::scenario(name).unwrap());
        if name == "nonexistence" {
            assert!(report.has(IssueKind::DiscontinuousCost));
            assert_eq!(report.issues.len(), 1);
        } else {
            assert!(report.is_valid(), "{name}: {report}");
        }
    }
}

#[test]
fn affine_scenarios_round_trip_through_files() {
    for name in ["prisoner-mfg", "punish-finite", "folk-repeated", "sir-demo"] {
        let spec = scenario::scenario(name).unwrap();
        let text = spec_to_toml(&spec).unwrap();
        let back = parse_spec(&text).unwrap();
        assert_eq!(spec_to_toml(&back).unwrap(), text, "{name}");
        let grid = spec.default_grid(0.05, 1e-6).unwrap();
        let pi: Strategy = LocalStrategy::uniform(grid, spec.n_states(), spec.n_actions()).into();
        let a = integrate_population(&spec, &pi, &grid).unwrap();
        let b = integrate_population(&back, &pi, &grid).unwrap();
        assert_eq!(a.sup_distance(&b).unwrap(), 0.0);
    }
    assert!(spec_to_toml(&scenario::nonexistence(1.0)).is_err());
}

#[test]
fn punish_strategy_cooperates_then_defects() {
    let spec = scenario::punish_finite(10);
    let grid = TimeGrid::discrete(10);
    let m = integrate_population(&spec, &scenario::punish_strategy(), &grid).unwrap();
    assert_eq!(m.at(0), &[1.0, 0.0, 0.0][..]);
    assert_eq!(m.at(1), &[1.0, 0.0, 0.0][..]);
    for k in 2..grid.n_points() {
        assert_eq!(m.at(k), &[0.0, 1.0, 0.0][..]);
    }
}
