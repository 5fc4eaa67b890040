//! Scenario configuration files.
//!
//! Configs are JSON. A minimal file carries a `scenario` block; optional
//! blocks add a decision-dependent `generation` model, constraint and
//! initial-state selections, a sweep grid, and reproducibility settings.
//! Distribution literals look like `{"kind":"gaussian","mean":-5,"stddev":5}`,
//! `{"kind":"beta","a":2,"b":5}` or
//! `{"kind":"tabulated","grid":[...],"density":[...]}`.

use std::path::Path;

use qualdyn::gendyn::GenModel;
use qualdyn::{FairnessConstraint, GroupId, QualState, Scenario};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Free-form description; carried through round trips.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    /// Single-group decision-dependent generation model; when present,
    /// `simulate` and `equilibrium` run the extended dynamics.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation: Option<GenModel>,
    /// Constraints to evaluate; when empty, all three policies run.
    #[serde(default)]
    pub constraints: Vec<FairnessConstraint>,
    /// Explicit initial states (pairs of rates).
    #[serde(default)]
    pub initial_states: Vec<(f64, f64)>,
    /// Additional seeded-random initial states.
    #[serde(default)]
    pub random_initial_states: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

fn default_seed() -> u64 {
    0
}
fn default_max_steps() -> usize {
    10_000
}
fn default_tol() -> f64 {
    1e-8
}

/// Cartesian product of axes; within an axis the values are walked in
/// order (`values_b` zips against `values` for group-b-specific sweeps).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axes: Vec<SweepAxis>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub parameter: SweepParameter,
    /// Which group the transition entry applies to (ignored for the
    /// utility ratio). Default: both.
    #[serde(default)]
    pub group: SweepGroup,
    pub values: Vec<f64>,
    /// Optional separate value list for group b (same length as `values`),
    /// used with `group = "both"` to move the groups along different
    /// grids.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values_b: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    T00,
    T01,
    T10,
    T11,
    /// u₊/u₋ with u₋ held at 1.
    URatio,
}

impl SweepParameter {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParameter::T00 => "t00",
            SweepParameter::T01 => "t01",
            SweepParameter::T10 => "t10",
            SweepParameter::T11 => "t11",
            SweepParameter::URatio => "u_ratio",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SweepGroup {
    A,
    B,
    #[default]
    Both,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let config: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            CliError::Config(format!(
                "{} at `{}`: {}",
                path.display(),
                e.path(),
                e.inner()
            ))
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.scenario.is_none() && self.generation.is_none() {
            return Err(CliError::Config(
                "config needs a `scenario` or a `generation` block".into(),
            ));
        }
        if !(self.tol > 0.0) {
            return Err(CliError::Config(format!(
                "`tol` must be positive, got {}",
                self.tol
            )));
        }
        if self.max_steps == 0 {
            return Err(CliError::Config("`max_steps` must be at least 1".into()));
        }
        for (i, (a, b)) in self.initial_states.iter().enumerate() {
            if !(0.0..=1.0).contains(a) || !(0.0..=1.0).contains(b) {
                return Err(CliError::Config(format!(
                    "`initial_states[{i}]` must lie in the unit square, got ({a}, {b})"
                )));
            }
        }
        if let Some(sweep) = &self.sweep {
            if self.scenario.is_none() {
                return Err(CliError::Config(
                    "`sweep` requires a `scenario` block".into(),
                ));
            }
            if sweep.axes.is_empty() {
                return Err(CliError::Config("`sweep.axes` must be nonempty".into()));
            }
            for (i, axis) in sweep.axes.iter().enumerate() {
                if axis.values.is_empty() {
                    return Err(CliError::Config(format!(
                        "`sweep.axes[{i}].values` must be nonempty"
                    )));
                }
                let probability = axis.parameter != SweepParameter::URatio;
                for (j, v) in axis.values.iter().enumerate() {
                    if probability && !(*v > 0.0 && *v < 1.0) {
                        return Err(CliError::Config(format!(
                            "`sweep.axes[{i}].values[{j}]` must lie in (0, 1), got {v}"
                        )));
                    }
                    if !probability && !(*v > 0.0) {
                        return Err(CliError::Config(format!(
                            "`sweep.axes[{i}].values[{j}]` must be positive, got {v}"
                        )));
                    }
                }
                if let Some(vb) = &axis.values_b {
                    if vb.len() != axis.values.len() {
                        return Err(CliError::Config(format!(
                            "`sweep.axes[{i}].values_b` must match `values` in length"
                        )));
                    }
                    if axis.group != SweepGroup::Both {
                        return Err(CliError::Config(format!(
                            "`sweep.axes[{i}].values_b` requires `group = \"both\"`"
                        )));
                    }
                    for (j, v) in vb.iter().enumerate() {
                        if !(*v > 0.0 && *v < 1.0) {
                            return Err(CliError::Config(format!(
                                "`sweep.axes[{i}].values_b[{j}]` must lie in (0, 1), got {v}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// The constraints to run: the configured list, or all three.
    pub fn constraints(&self) -> Vec<FairnessConstraint> {
        if self.constraints.is_empty() {
            FairnessConstraint::ALL.to_vec()
        } else {
            self.constraints.clone()
        }
    }

    /// Explicit plus seeded-random initial states.
    pub fn initial_states(&self, seed: u64) -> Vec<QualState> {
        let mut states: Vec<QualState> = self
            .initial_states
            .iter()
            .map(|(a, b)| QualState::new(*a, *b).expect("validated"))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..self.random_initial_states {
            let a = 0.05 + 0.9 * rng.random::<f64>();
            let b = 0.05 + 0.9 * rng.random::<f64>();
            states.push(QualState::new(a, b).expect("in range"));
        }
        if states.is_empty() {
            states.push(QualState::new(0.5, 0.5).expect("in range"));
        }
        states
    }

    /// All sweep grid points (cartesian product over axes, deterministic
    /// order), as (axis assignments, modified scenario).
    pub fn sweep_points(&self) -> Result<Vec<SweepPoint>, CliError> {
        let scenario = self
            .scenario
            .as_ref()
            .ok_or_else(|| CliError::Config("sweep requires a scenario".into()))?;
        let sweep = match &self.sweep {
            Some(s) => s,
            None => {
                return Ok(vec![SweepPoint {
                    assignment: Vec::new(),
                    scenario: scenario.clone(),
                }])
            }
        };
        let mut points = vec![SweepPoint {
            assignment: Vec::new(),
            scenario: scenario.clone(),
        }];
        for axis in &sweep.axes {
            let mut next = Vec::with_capacity(points.len() * axis.values.len());
            for point in &points {
                for (j, &value) in axis.values.iter().enumerate() {
                    let value_b = axis.values_b.as_ref().map(|vb| vb[j]).unwrap_or(value);
                    let scenario = apply_axis(&point.scenario, axis, value, value_b)
                        .map_err(|e| CliError::Config(e.to_string()))?;
                    let mut assignment = point.assignment.clone();
                    assignment.push(AxisValue {
                        parameter: axis.parameter,
                        group: axis.group,
                        value,
                        value_b,
                    });
                    next.push(SweepPoint {
                        assignment,
                        scenario,
                    });
                }
            }
            points = next;
        }
        Ok(points)
    }
}

#[derive(Debug, Clone)]
pub struct AxisValue {
    pub parameter: SweepParameter,
    pub group: SweepGroup,
    pub value: f64,
    pub value_b: f64,
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub assignment: Vec<AxisValue>,
    pub scenario: Scenario,
}

fn apply_axis(
    scenario: &Scenario,
    axis: &SweepAxis,
    value: f64,
    value_b: f64,
) -> qualdyn::Result<Scenario> {
    let set_entry = |s: &Scenario, id: GroupId, v: f64| -> qualdyn::Result<Scenario> {
        let t = s.group(id).transitions();
        let (y, d) = match axis.parameter {
            SweepParameter::T00 => (0, 0),
            SweepParameter::T01 => (0, 1),
            SweepParameter::T10 => (1, 0),
            SweepParameter::T11 => (1, 1),
            SweepParameter::URatio => unreachable!(),
        };
        Ok(s.with_transitions(id, t.with_entry(y, d, v)?))
    };
    match axis.parameter {
        SweepParameter::URatio => Scenario::new(
            scenario.group_a().clone(),
            scenario.group_b().clone(),
            value,
            1.0,
        ),
        _ => match axis.group {
            SweepGroup::A => set_entry(scenario, GroupId::A, value),
            SweepGroup::B => set_entry(scenario, GroupId::B, value),
            SweepGroup::Both => {
                let s = set_entry(scenario, GroupId::A, value)?;
                set_entry(&s, GroupId::B, value_b)
            }
        },
    }
}
