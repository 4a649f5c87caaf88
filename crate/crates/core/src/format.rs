//! TOML game files. See `docs/spec-format.md` for the grammar.
//!
//! States and actions are referred to by name or by 1-based index. Only
//! affine models can be written to or read from a file.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{
    AffineCosts, AffineTransitions, CostModel, Dynamics, GameSpec, Horizon, TransitionModel,
};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Ref {
    Index(i64),
    Name(String),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HorizonFile {
    kind: String,
    value: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionEntry {
    from: Ref,
    to: Ref,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    action: Option<Ref>,
    #[serde(default)]
    base: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slope: Option<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    state: Option<Ref>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    action: Option<Ref>,
    #[serde(default)]
    base: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slope: Option<Vec<f64>>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    format_version: u32,
    #[serde(default)]
    name: String,
    states: Vec<String>,
    actions: Vec<String>,
    time_mode: String,
    m0: Vec<f64>,
    #[serde(default = "default_true")]
    normalize_discrete_cost: bool,
    horizon: HorizonFile,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    rates: Vec<TransitionEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    kernel: Vec<TransitionEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    costs: Vec<CostEntry>,
}

fn resolve(r: &Ref, names: &[String], what: &str, ctx: &str) -> Result<usize> {
    match r {
        Ref::Index(i) if *i >= 1 && (*i as usize) <= names.len() => Ok(*i as usize - 1),
        Ref::Index(i) => Err(Error::Format(format!(
            "{ctx}: {what} index {i} out of range 1..={}",
            names.len()
        ))),
        Ref::Name(n) => names
            .iter()
            .position(|s| s == n)
            .ok_or_else(|| Error::Format(format!("{ctx}: unknown {what} `{n}`"))),
    }
}

fn resolve_all(r: &Option<Ref>, names: &[String], what: &str, ctx: &str) -> Result<Vec<usize>> {
    match r {
        Some(r) => Ok(vec![resolve(r, names, what, ctx)?]),
        None => Ok((0..names.len()).collect()),
    }
}

fn check_slope(slope: &Option<Vec<f64>>, e: usize, ctx: &str) -> Result<()> {
    if let Some(s) = slope {
        if s.len() != e {
            return Err(Error::Format(format!(
                "{ctx}: slope has {} coefficients, expected one per state ({e})",
                s.len()
            )));
        }
    }
    Ok(())
}

/// Parses a game from TOML text. Syntax errors carry line and column.
pub fn parse_spec(text: &str) -> Result<GameSpec> {
    let file: SpecFile = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    if file.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format_version {} (expected {FORMAT_VERSION})",
            file.format_version
        )));
    }
    let (e, a) = (file.states.len(), file.actions.len());
    let continuous = match file.time_mode.as_str() {
        "continuous" => true,
        "discrete" => false,
        other => return Err(Error::Format(format!("time_mode must be continuous or discrete, got `{other}`"))),
    };
    let horizon = match file.horizon.kind.as_str() {
        "discounted" => Horizon::Discounted(file.horizon.value),
        "finite" => Horizon::Finite(file.horizon.value),
        other => return Err(Error::Format(format!("horizon kind must be discounted or finite, got `{other}`"))),
    };

    let (entries, table) = match (continuous, file.rates.is_empty(), file.kernel.is_empty()) {
        (true, _, true) => (&file.rates, "rates"),
        (false, true, _) => (&file.kernel, "kernel"),
        (true, _, false) => return Err(Error::Format("continuous games take [[rates]], not [[kernel]]".into())),
        (false, false, _) => return Err(Error::Format("discrete games take [[kernel]], not [[rates]]".into())),
    };

    let mut model = AffineTransitions::new(e, a);
    let mut seen = HashSet::new();
    for (n, entry) in entries.iter().enumerate() {
        let ctx = format!("{table} entry {}", n + 1);
        let i = resolve(&entry.from, &file.states, "state", &ctx)?;
        let j = resolve(&entry.to, &file.states, "state", &ctx)?;
        if continuous && i == j {
            return Err(Error::Format(format!(
                "{ctx}: diagonal rates are implied by the off-diagonal ones and must not be given"
            )));
        }
        check_slope(&entry.slope, e, &ctx)?;
        for act in resolve_all(&entry.action, &file.actions, "action", &ctx)? {
            if !seen.insert((i, j, act)) {
                return Err(Error::Format(format!("{ctx}: duplicate entry for ({}, {}, {})", i + 1, j + 1, act + 1)));
            }
            model.set_base(i, j, act, entry.base);
            if let Some(s) = &entry.slope {
                for (k, v) in s.iter().enumerate() {
                    model.set_slope(i, j, act, k, *v);
                }
            }
        }
    }
    if continuous {
        model.complete_generator_diagonal();
    }

    let mut costs = AffineCosts::new(e, a);
    let mut seen = HashSet::new();
    for (n, entry) in file.costs.iter().enumerate() {
        let ctx = format!("costs entry {}", n + 1);
        check_slope(&entry.slope, e, &ctx)?;
        for i in resolve_all(&entry.state, &file.states, "state", &ctx)? {
            for act in resolve_all(&entry.action, &file.actions, "action", &ctx)? {
                if !seen.insert((i, act)) {
                    return Err(Error::Format(format!("{ctx}: duplicate cost for ({}, {})", i + 1, act + 1)));
                }
                costs.set_base(i, act, entry.base);
                if let Some(s) = &entry.slope {
                    for (k, v) in s.iter().enumerate() {
                        costs.set_slope(i, act, k, *v);
                    }
                }
            }
        }
    }

    let model = TransitionModel::Affine(model);
    Ok(GameSpec {
        name: if file.name.is_empty() { "game".into() } else { file.name },
        state_names: file.states,
        action_names: file.actions,
        dynamics: if continuous {
            Dynamics::Rates(model)
        } else {
            Dynamics::Kernel(model)
        },
        cost: CostModel::Affine(costs),
        horizon,
        m0: file.m0,
        normalize_discrete_cost: file.normalize_discrete_cost,
    })
}

pub fn load_spec(path: &Path) -> Result<GameSpec> {
    let text = std::fs::read_to_string(path)?;
    parse_spec(&text).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn slope_or_none(s: Vec<f64>) -> Option<Vec<f64>> {
    s.iter().any(|v| *v != 0.0).then_some(s)
}

/// Serializes an affine game. Custom evaluators cannot be written.
pub fn spec_to_toml(spec: &GameSpec) -> Result<String> {
    let (e, a) = (spec.n_states(), spec.n_actions());
    let TransitionModel::Affine(model) = spec.dynamics.model() else {
        return Err(Error::Format("custom transition models cannot be written to a file".into()));
    };
    let CostModel::Affine(costs) = &spec.cost else {
        return Err(Error::Format("custom cost models cannot be written to a file".into()));
    };
    let continuous = matches!(spec.dynamics, Dynamics::Rates(_));
    let mut entries = Vec::new();
    for i in 0..e {
        for j in 0..e {
            if continuous && i == j {
                continue;
            }
            for act in 0..a {
                let slope: Vec<f64> = (0..e).map(|k| model.slope(i, j, act, k)).collect();
                let base = model.base(i, j, act);
                if base == 0.0 && slope.iter().all(|v| *v == 0.0) {
                    continue;
                }
                entries.push(TransitionEntry {
                    from: Ref::Name(spec.state_names[i].clone()),
                    to: Ref::Name(spec.state_names[j].clone()),
                    action: Some(Ref::Name(spec.action_names[act].clone())),
                    base,
                    slope: slope_or_none(slope),
                });
            }
        }
    }
    let mut cost_entries = Vec::new();
    for i in 0..e {
        for act in 0..a {
            let slope: Vec<f64> = (0..e).map(|k| costs.slope(i, act, k)).collect();
            let base = costs.base(i, act);
            if base == 0.0 && slope.iter().all(|v| *v == 0.0) {
                continue;
            }
            cost_entries.push(CostEntry {
                state: Some(Ref::Name(spec.state_names[i].clone())),
                action: Some(Ref::Name(spec.action_names[act].clone())),
                base,
                slope: slope_or_none(slope),
            });
        }
    }
    let (kind, value) = match spec.horizon {
        Horizon::Discounted(v) => ("discounted", v),
        Horizon::Finite(v) => ("finite", v),
    };
    let (rates, kernel) = if continuous {
        (entries, Vec::new())
    } else {
        (Vec::new(), entries)
    };
    let file = SpecFile {
        format_version: FORMAT_VERSION,
        name: spec.name.clone(),
        states: spec.state_names.clone(),
        actions: spec.action_names.clone(),
        time_mode: if continuous { "continuous" } else { "discrete" }.into(),
        m0: spec.m0.clone(),
        normalize_discrete_cost: spec.normalize_discrete_cost,
        horizon: HorizonFile {
            kind: kind.into(),
            value,
        },
        rates,
        kernel,
        costs: cost_entries,
    };
    toml::to_string(&file).map_err(|e| Error::Format(e.to_string()))
}
