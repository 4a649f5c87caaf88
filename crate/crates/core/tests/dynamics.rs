use dmfg::game::{AffineCosts, AffineTransitions, CostModel, Dynamics, GameSpec, Horizon, TimeGrid, TransitionModel};
use dmfg::{integrate_population, integrate_tagged, scenario, LocalStrategy, PopulationPath, Strategy};

fn always(grid: TimeGrid, e: usize, a: usize, act: usize) -> Strategy {
    LocalStrategy::always(grid, e, a, act).into()
}

/// Explicit Euler for the prisoner flow under all-D: m_D' = m_C.
fn euler_defect_share(t_end: f64, steps: usize) -> Vec<f64> {
    let h = t_end / steps as f64;
    let mut m = [1.0, 0.0];
    let mut out = vec![m[1]];
    for _ in 0..steps {
        let flow = m[0];
        m = [m[0] - h * flow, m[1] + h * flow];
        out.push(m[1]);
    }
    out
}

#[test]
fn prisoner_defection_matches_extrapolated_euler() {
    let spec = scenario::prisoner_mfg(0.5);
    let grid = TimeGrid::new(5.0, 500).unwrap();
    let path = integrate_population(&spec, &always(grid, 2, 2, 1), &grid).unwrap();
    // Richardson extrapolation of Euler at h/100 and h/200 cancels its
    // first-order error.
    let coarse = euler_defect_share(5.0, 50_000);
    let fine = euler_defect_share(5.0, 100_000);
    for k in 0..grid.n_points() {
        let oracle = 2.0 * fine[200 * k] - coarse[100 * k];
        assert!((path.at(k)[1] - oracle).abs() < 1e-6, "t={} {} vs {oracle}", grid.time(k), path.at(k)[1]);
        let exact = 1.0 - (-grid.time(k)).exp();
        assert!((path.at(k)[1] - exact).abs() < 1e-9);
    }
}

#[test]
fn rk4_error_is_fourth_order() {
    let spec = scenario::prisoner_mfg(0.5);
    let err = |n: usize| {
        let grid = TimeGrid::new(4.0, n).unwrap();
        let path = integrate_population(&spec, &always(grid, 2, 2, 1), &grid).unwrap();
        (path.last()[1] - (1.0 - (-4.0f64).exp())).abs()
    };
    let ratio = err(20) / err(40);
    assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn zero_generator_keeps_m0() {
    let mut q = AffineTransitions::new(3, 2);
    q.complete_generator_diagonal();
    let spec = GameSpec {
        name: "frozen".into(),
        state_names: vec!["x".into(), "y".into(), "z".into()],
        action_names: vec!["p".into(), "q".into()],
        dynamics: Dynamics::Rates(TransitionModel::Affine(q)),
        cost: CostModel::Affine(AffineCosts::new(3, 2)),
        horizon: Horizon::Discounted(1.0),
        m0: vec![0.2, 0.3, 0.5],
        normalize_discrete_cost: true,
    };
    let grid = TimeGrid::new(3.0, 30).unwrap();
    let path = integrate_population(&spec, &LocalStrategy::uniform(grid, 3, 2).into(), &grid).unwrap();
    for k in 0..grid.n_points() {
        assert_eq!(path.at(k), &[0.2, 0.3, 0.5][..]);
    }
}

#[test]
fn tagged_player_replicates_population() {
    let cases: Vec<(GameSpec, TimeGrid, Strategy)> = {
        let prisoner = scenario::prisoner_mfg(0.5);
        let g1 = TimeGrid::new(8.0, 800).unwrap();
        let mixed = LocalStrategy::switch_at(g1, 2, 2, 0, 1, 1.5).into();
        let nonex = scenario::nonexistence(1.0);
        let g2 = TimeGrid::new(5.0, 500).unwrap();
        let b = always(g2, 2, 2, 1);
        let folk = scenario::folk_repeated(0.9);
        let g3 = folk.default_grid(1.0, 1e-8).unwrap();
        let grim = scenario::folk_grim(&folk, 2);
        let punish = scenario::punish_finite(10);
        let g4 = TimeGrid::discrete(10);
        vec![
            (prisoner, g1, mixed),
            (nonex, g2, b),
            (folk, g3, grim),
            (punish, g4, scenario::punish_strategy()),
        ]
    };
    for (spec, grid, pi) in cases {
        let m = integrate_population(&spec, &pi, &grid).unwrap();
        let x = integrate_tagged(&spec, &pi, &m, &spec.m0).unwrap();
        assert!(x.sup_distance(&m).unwrap() < 1e-9, "{}", spec.name);
    }
}

#[test]
fn tagged_defector_leaves_cooperation_exponentially() {
    let spec = scenario::prisoner_mfg(0.5);
    let grid = TimeGrid::new(6.0, 600).unwrap();
    let m = integrate_population(&spec, &always(grid, 2, 2, 0), &grid).unwrap();
    let x = integrate_tagged(&spec, &always(grid, 2, 2, 1), &m, &[1.0, 0.0]).unwrap();
    for k in 0..grid.n_points() {
        assert!((x.at(k)[0] - (-grid.time(k)).exp()).abs() < 1e-6);
    }
}

#[test]
fn folk_grim_tagged_path_switches_after_k_rounds() {
    let spec = scenario::folk_repeated(0.9);
    let grid = spec.default_grid(1.0, 1e-8).unwrap();
    let grim = scenario::folk_grim(&spec, 2);
    let m = integrate_population(&spec, &grim, &grid).unwrap();
    let x = integrate_tagged(&spec, &grim, &m, &spec.m0).unwrap();
    assert_eq!(x.at(0), &[0.0, 1.0][..]);
    assert_eq!(x.at(1), &[0.0, 1.0][..]);
    for k in 2..grid.n_points() {
        assert_eq!(x.at(k), &[1.0, 0.0][..], "round {k}");
    }
}

#[test]
fn strategy_grid_must_be_refined_by_integration_grid() {
    let spec = scenario::prisoner_mfg(0.5);
    let fine = TimeGrid::new(2.0, 200).unwrap();
    let coarse = TimeGrid::new(2.0, 20).unwrap();
    let pi = always(fine, 2, 2, 1);
    assert!(integrate_population(&spec, &pi, &coarse).is_err());
    let pi = always(coarse, 2, 2, 1);
    let on_fine = integrate_population(&spec, &pi, &fine).unwrap();
    assert!((on_fine.last()[1] - (1.0 - (-2.0f64).exp())).abs() < 1e-9);
}

#[test]
fn closed_form_path_round_trips_through_interpolation() {
    let grid = TimeGrid::new(1.0, 10).unwrap();
    let data: Vec<f64> = (0..grid.n_points()).flat_map(|k| [1.0 - grid.time(k), grid.time(k)]).collect();
    let path = PopulationPath::new(grid, 2, data).unwrap();
    let mut m = [0.0; 2];
    path.value_at(0.35, &mut m);
    assert!((m[1] - 0.35).abs() < 1e-12);
}
