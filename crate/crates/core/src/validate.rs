//! Structural checks of a [`GameSpec`].
//!
//! Affine models are checked at every simplex vertex: an affine function
//! attains its extrema on the vertices, so sign and row-sum conditions that
//! hold there hold on the whole simplex. Custom evaluators can only be
//! sampled; they are checked at the vertices and the barycenter.

use std::fmt;

use crate::game::{
    unit_vector, CostModel, Dynamics, GameSpec, Horizon, TimeMode, TransitionModel, Transitions,
    SIMPLEX_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IssueKind {
    Dimensions,
    InitialDistribution,
    Horizon,
    GeneratorRow,
    StochasticRow,
    NonFinite,
    DiscontinuousCost,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Issue {
    pub kind: IssueKind,
    pub message: String,
    /// Simplex vertex (0-based state index) where the violation was found.
    pub vertex: Option<usize>,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.vertex {
            Some(v) => write!(f, "{:?}: {} (at vertex e_{})", self.kind, self.message, v + 1),
            None => write!(f, "{:?}: {}", self.kind, self.message),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn has(&self, kind: IssueKind) -> bool {
        self.issues.iter().any(|i| i.kind == kind)
    }

    fn push(&mut self, kind: IssueKind, message: String, vertex: Option<usize>) {
        self.issues.push(Issue { kind, message, vertex });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return writeln!(f, "ok");
        }
        for issue in &self.issues {
            writeln!(f, "{issue}")?;
        }
        Ok(())
    }
}

/// Lists every violated invariant; an empty report means the spec is valid.
pub fn validate_spec(spec: &GameSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    let e = spec.n_states();
    let a = spec.n_actions();
    if e == 0 || a == 0 {
        report.push(
            IssueKind::Dimensions,
            format!("need at least one state and one action (E={e}, A={a})"),
            None,
        );
        return report;
    }

    check_model_dimensions(spec, &mut report);
    check_initial(spec, &mut report);
    check_horizon(spec, &mut report);
    if report.has(IssueKind::Dimensions) {
        return report;
    }

    let mut points: Vec<(Option<usize>, Vec<f64>)> =
        (0..e).map(|v| (Some(v), unit_vector(e, v))).collect();
    let custom = matches!(spec.dynamics.model(), TransitionModel::Custom(_))
        || matches!(spec.cost, CostModel::Custom(_));
    if custom {
        points.push((None, vec![1.0 / e as f64; e]));
    }

    let mut q = Transitions::zeros(e, a);
    let mut c = spec.new_costs();
    for (vertex, m) in &points {
        spec.transitions_at(m, &mut q);
        match spec.dynamics {
            Dynamics::Rates(_) => check_generator(&q, *vertex, &mut report),
            Dynamics::Kernel(_) => check_stochastic(&q, *vertex, &mut report),
        }
        spec.costs_at(m, &mut c);
        if (0..e).any(|i| c.row(i).iter().any(|x| !x.is_finite())) {
            report.push(IssueKind::NonFinite, "cost is not finite".into(), *vertex);
        }
    }

    if let CostModel::Custom(custom) = &spec.cost {
        if !custom.continuous {
            report.push(
                IssueKind::DiscontinuousCost,
                "cost evaluator is declared discontinuous in m; equilibrium existence is not guaranteed"
                    .into(),
                None,
            );
        }
    }
    report
}

fn check_model_dimensions(spec: &GameSpec, report: &mut ValidationReport) {
    let (e, a) = (spec.n_states(), spec.n_actions());
    if let TransitionModel::Affine(model) = spec.dynamics.model() {
        if model.n_states() != e || model.n_actions() != a {
            report.push(
                IssueKind::Dimensions,
                format!(
                    "transition model is {}x{} but the game has {e} states and {a} actions",
                    model.n_states(),
                    model.n_actions()
                ),
                None,
            );
        }
    }
    if let CostModel::Affine(model) = &spec.cost {
        if model.n_states() != e || model.n_actions() != a {
            report.push(
                IssueKind::Dimensions,
                format!(
                    "cost model is {}x{} but the game has {e} states and {a} actions",
                    model.n_states(),
                    model.n_actions()
                ),
                None,
            );
        }
    }
    if spec.m0.len() != e {
        report.push(
            IssueKind::Dimensions,
            format!("m0 has {} entries, expected {e}", spec.m0.len()),
            None,
        );
    }
}

fn check_initial(spec: &GameSpec, report: &mut ValidationReport) {
    if spec.m0.iter().any(|x| !x.is_finite() || *x < 0.0) {
        report.push(
            IssueKind::InitialDistribution,
            format!("m0 has negative or non-finite entries: {:?}", spec.m0),
            None,
        );
    }
    let mass: f64 = spec.m0.iter().sum();
    if (mass - 1.0).abs() > SIMPLEX_TOL {
        report.push(
            IssueKind::InitialDistribution,
            format!("m0 has total mass {mass}, expected 1"),
            None,
        );
    }
}

fn check_horizon(spec: &GameSpec, report: &mut ValidationReport) {
    let mode = spec.time_mode();
    let bad = match (mode, spec.horizon) {
        (TimeMode::Continuous, Horizon::Discounted(beta)) => {
            (!(beta > 0.0) || !beta.is_finite()).then(|| format!("discount rate beta={beta} must be > 0"))
        }
        (TimeMode::Continuous, Horizon::Finite(t)) => {
            (!(t > 0.0) || !t.is_finite()).then(|| format!("horizon T={t} must be > 0"))
        }
        (TimeMode::Discrete, Horizon::Discounted(delta)) => (!(delta > 0.0 && delta < 1.0))
            .then(|| format!("discount factor delta={delta} must lie in (0, 1)")),
        (TimeMode::Discrete, Horizon::Finite(t)) => (!(t >= 1.0) || t.fract() != 0.0)
            .then(|| format!("discrete horizon T={t} must be a positive integer")),
    };
    if let Some(message) = bad {
        report.push(IssueKind::Horizon, message, None);
    }
}

fn check_generator(q: &Transitions, vertex: Option<usize>, report: &mut ValidationReport) {
    let (e, a) = (q.n_states(), q.n_actions());
    for act in 0..a {
        for i in 0..e {
            let row = q.row(i, act);
            if row.iter().any(|x| !x.is_finite()) {
                report.push(IssueKind::NonFinite, format!("rate row {} action {} not finite", i + 1, act + 1), vertex);
                continue;
            }
            for (j, &r) in row.iter().enumerate() {
                if j != i && r < 0.0 {
                    report.push(
                        IssueKind::GeneratorRow,
                        format!("negative rate Q[{}][{}][{}] = {r}", i + 1, j + 1, act + 1),
                        vertex,
                    );
                }
            }
            let sum: f64 = row.iter().sum();
            if sum.abs() > SIMPLEX_TOL {
                report.push(
                    IssueKind::GeneratorRow,
                    format!("rate row {} action {} sums to {sum}, expected 0", i + 1, act + 1),
                    vertex,
                );
            }
        }
    }
}

fn check_stochastic(p: &Transitions, vertex: Option<usize>, report: &mut ValidationReport) {
    let (e, a) = (p.n_states(), p.n_actions());
    for act in 0..a {
        for i in 0..e {
            let row = p.row(i, act);
            if row.iter().any(|x| !x.is_finite()) {
                report.push(IssueKind::NonFinite, format!("kernel row {} action {} not finite", i + 1, act + 1), vertex);
                continue;
            }
            for (j, &x) in row.iter().enumerate() {
                if x < 0.0 {
                    report.push(
                        IssueKind::StochasticRow,
                        format!("negative probability P[{}][{}][{}] = {x}", i + 1, j + 1, act + 1),
                        vertex,
                    );
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_TOL {
                report.push(
                    IssueKind::StochasticRow,
                    format!("kernel row {} action {} sums to {sum}, expected 1", i + 1, act + 1),
                    vertex,
                );
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{AffineCosts, AffineTransitions};

    fn two_state(q: AffineTransitions, m0: Vec<f64>) -> GameSpec {
        GameSpec {
            name: "t".into(),
            state_names: vec!["1".into(), "2".into()],
            action_names: vec!["a".into(), "b".into()],
            dynamics: Dynamics::Rates(TransitionModel::Affine(q)),
            cost: CostModel::Affine(AffineCosts::new(2, 2)),
            horizon: Horizon::Discounted(1.0),
            m0,
            normalize_discrete_cost: true,
        }
    }

    #[test]
    fn one_way_generator_is_valid() {
        // Q_a = 0, Q_b = [[-1, 1], [0, 0]]
        let mut q = AffineTransitions::new(2, 2);
        q.set_base(0, 0, 1, -1.0);
        q.set_base(0, 1, 1, 1.0);
        let report = validate_spec(&two_state(q, vec![1.0, 0.0]));
        assert!(report.is_valid(), "{report}");
    }

    #[test]
    fn excess_mass_is_reported() {
        let report = validate_spec(&two_state(AffineTransitions::new(2, 2), vec![0.5, 0.6]));
        assert!(report.has(IssueKind::InitialDistribution));
        assert!(report.issues[0].message.contains("1.1"));
    }

    #[test]
    fn negative_rate_reports_vertex() {
        // off-diagonal base -0.1 with a slope that only compensates away from e_1
        let mut q = AffineTransitions::new(2, 2);
        q.set_base(0, 1, 0, -0.1);
        q.set_slope(0, 1, 0, 1, 0.5);
        q.complete_generator_diagonal();
        let report = validate_spec(&two_state(q, vec![1.0, 0.0]));
        let neg: Vec<_> = report
            .issues
            .iter()
            .filter(|i| i.kind == IssueKind::GeneratorRow)
            .collect();
        assert_eq!(neg.len(), 1);
        assert_eq!(neg[0].vertex, Some(0));
    }

    #[test]
    fn horizon_kind_checked() {
        let mut spec = two_state(AffineTransitions::new(2, 2), vec![1.0, 0.0]);
        spec.horizon = Horizon::Discounted(0.0);
        assert!(validate_spec(&spec).has(IssueKind::Horizon));
    }
}
