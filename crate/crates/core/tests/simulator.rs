use dmfg::game::TimeGrid;
use dmfg::sim::{estimate_vn, simulate, SimConfig};
use dmfg::{scenario, LocalStrategy, Strategy};

fn always(grid: TimeGrid, act: usize) -> Strategy {
    LocalStrategy::always(grid, 2, 2, act).into()
}

#[test]
fn counts_are_whole_players() {
    let spec = scenario::prisoner_mfg(0.5);
    let grid = TimeGrid::new(5.0, 50).unwrap();
    let cfg = SimConfig::new(37, 3, 1, grid, LocalStrategy::uniform(grid, 2, 2).into());
    let trace = simulate(&spec, &cfg, 0).unwrap();
    assert!(trace.n_rows() > 1);
    for row in 0..trace.n_rows() {
        assert_eq!(trace.counts(row).iter().sum::<u32>(), 37);
        for m in trace.empirical(row) {
            let scaled = m * 37.0;
            assert!((scaled - scaled.round()).abs() < 1e-9);
        }
    }
    assert!(trace.times.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn same_seed_same_trace() {
    let spec = scenario::sir_demo();
    let grid = spec.default_grid(0.1, 1e-3).unwrap();
    let cfg = SimConfig::new(50, 42, 1, grid, LocalStrategy::uniform(grid, 3, 2).into());
    let a = simulate(&spec, &cfg, 0).unwrap();
    let b = simulate(&spec, &cfg, 0).unwrap();
    assert_eq!(a.times, b.times);
    assert_eq!(a.event_player, b.event_player);
    assert_eq!(a.cost, b.cost);
    let c = simulate(&spec, &cfg, 1).unwrap();
    assert_ne!(a.times, c.times);
}

#[test]
fn permuting_streams_leaves_the_population_process_unchanged() {
    for spec in [scenario::prisoner_mfg(0.5), scenario::punish_finite(10)] {
        let grid = spec.default_grid(0.1, 1e-8).unwrap();
        let (e, a) = (spec.n_states(), spec.n_actions());
        let n = 40;
        let mut cfg = SimConfig::new(n, 9, 1, grid, LocalStrategy::uniform(grid, e, a).into());
        let base = simulate(&spec, &cfg, 0).unwrap();
        cfg.stream_map = Some((0..n as u64).rev().collect());
        let permuted = simulate(&spec, &cfg, 0).unwrap();
        assert_eq!(base.times, permuted.times, "{}", spec.name);
        for row in 0..base.n_rows() {
            assert_eq!(base.counts(row), permuted.counts(row));
        }
    }
}

#[test]
fn folk_grim_against_grim_is_deterministic() {
    let delta: f64 = 0.9;
    let spec = scenario::folk_repeated(delta);
    let grid = spec.default_grid(1.0, 1e-10).unwrap();
    for k in 1..=3 {
        let cfg = SimConfig::new(20, 5, 8, grid, scenario::folk_grim(&spec, k));
        let est = estimate_vn(&spec, &cfg).unwrap();
        assert!((est.mean - (-1.0 - delta.powi(k as i32))).abs() < 1e-9, "k={k}: {}", est.mean);
        assert!(est.stderr.unwrap() < 1e-12);
    }
}

#[test]
fn defector_is_punished_by_finite_grim_population() {
    let (delta, k, n) = (0.9_f64, 3, 50);
    let spec = scenario::folk_repeated(delta);
    let grid = spec.default_grid(1.0, 1e-10).unwrap();
    let mut cfg = SimConfig::new(n, 1, 1, grid, scenario::folk_grim(&spec, k));
    cfg.deviation = Some(always(grid, 1));
    let trace = simulate(&spec, &cfg, 0).unwrap();
    let nf = n as f64;
    let expected = -1.0 + (1.0 - delta) * delta.powi(k as i32) * (-2.0 + 2.0 / nf);
    assert!((trace.cost - expected).abs() < 1e-9, "{} vs {expected}", trace.cost);
}

#[test]
fn single_replication_has_no_interval() {
    let spec = scenario::prisoner_mfg(0.5);
    let grid = TimeGrid::new(10.0, 100).unwrap();
    let cfg = SimConfig::new(10, 0, 1, grid, always(grid, 1));
    let est = estimate_vn(&spec, &cfg).unwrap();
    assert!(est.stderr.is_none() && est.ci95.is_none());
    let json = serde_json::to_value(est).unwrap();
    assert!(json.get("stderr").is_none());
    assert_eq!(json["R"], 1);
}

#[test]
fn large_population_cost_matches_mean_field() {
    let spec = scenario::prisoner_mfg(0.5);
    let grid = TimeGrid::new(40.0, 400).unwrap();
    let cfg = SimConfig::new(1000, 17, 40, grid, always(grid, 1));
    let est = estimate_vn(&spec, &cfg).unwrap();
    // defecting against m_D = 1 - e^-t from cooperation: 2/beta - 1/(1+beta)
    let mean_field = 4.0 - 2.0 / 3.0;
    let se = est.stderr.unwrap();
    assert!((est.mean - mean_field).abs() < 4.0 * se + 0.01, "{} +- {se}", est.mean);
}

#[test]
fn mismatched_stream_map_is_rejected() {
    let spec = scenario::prisoner_mfg(0.5);
    let grid = TimeGrid::new(1.0, 10).unwrap();
    let mut cfg = SimConfig::new(5, 0, 1, grid, always(grid, 1));
    cfg.stream_map = Some(vec![0, 1]);
    assert!(cfg.validate(&spec).is_err());
}

#[test]
fn deterministic_synchronous_run_tracks_the_flow_exactly() {
    let spec = scenario::folk_repeated(0.9);
    let grid = spec.default_grid(1.0, 1e-10).unwrap();
    let grim = scenario::folk_grim(&spec, 3);
    let m = dmfg::integrate_population(&spec, &grim, &grid).unwrap();
    let cfg = SimConfig::new(20, 0, 1, grid, grim);
    let trace = simulate(&spec, &cfg, 0).unwrap();
    assert!(trace.synchronous);
    assert_eq!(trace.sup_deviation(&m), 0.0);
}
