//! Scenario file format: a single versioned JSON document.
//!
//! ```json
//! {
//!   "version": 1,
//!   "space": {"size": 2, "labels": null},
//!   "horizon": 1,
//!   "initial": [1.0, 0.0],
//!   "target": [[[0.5, 0.5], [0.5, 0.5]]],
//!   "reward": [[0.0, 1.0]],
//!   "sources": [{"kernels": [[[0.5, 0.5], [0.5, 0.5]]]}]
//! }
//! ```
//!
//! Kernel sequences (`target`, `kernels`, `own_target`) are either one matrix
//! per stage, or `{"stationary": true, "kernel": [[...]]}` which is expanded
//! to the horizon on load. Saving always writes the expanded per-stage form
//! with shortest-round-trip decimals, so probabilities and rewards survive a
//! save/load cycle bit-exactly and saved files are byte-stable.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    validate_scenario, BehaviorSequence, Pmf, RewardSchedule, Scenario, SourceSpec, StateSpace,
    TransitionKernel,
};

/// The only schema version this build reads and writes.
pub const SCHEMA_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
struct SpaceFile {
    size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum KernelsFile {
    PerStage(Vec<Vec<Vec<f64>>>),
    Stationary {
        stationary: bool,
        kernel: Vec<Vec<f64>>,
    },
}

impl KernelsFile {
    fn into_behavior(self, horizon: usize) -> BehaviorSequence {
        match self {
            KernelsFile::PerStage(stages) => {
                BehaviorSequence::new(stages.into_iter().map(TransitionKernel::new).collect())
            }
            KernelsFile::Stationary { kernel, .. } => {
                BehaviorSequence::stationary(TransitionKernel::new(kernel), horizon)
            }
        }
    }

    fn from_behavior(behavior: &BehaviorSequence) -> Self {
        KernelsFile::PerStage(behavior.kernels.iter().map(|k| k.rows.clone()).collect())
    }
}

#[derive(Serialize, Deserialize)]
struct SourceFile {
    kernels: KernelsFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    own_target: Option<KernelsFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    own_reward: Option<Vec<Vec<f64>>>,
}

#[derive(Serialize, Deserialize)]
struct ScenarioFile {
    version: u64,
    space: SpaceFile,
    horizon: usize,
    initial: Vec<f64>,
    target: KernelsFile,
    reward: Vec<Vec<f64>>,
    sources: Vec<SourceFile>,
}

fn parse_err(location: &str, message: impl ToString) -> Error {
    Error::Parse {
        location: location.to_string(),
        message: message.to_string(),
    }
}

/// Parses a scenario from JSON text. Structural defects (bad JSON, missing
/// fields, dimension mismatches, non-normalized rows, negative mass) are
/// parse errors naming the offending coordinates; an unknown `version` is a
/// schema error. Absolute-continuity between sources and target is *not*
/// checked here — that is [`validate_scenario`]'s job.
pub fn scenario_from_json(text: &str) -> Result<Scenario> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| parse_err("document", e))?;
    let version = value
        .get("version")
        .ok_or_else(|| parse_err("version", "missing field `version`"))?
        .as_u64()
        .ok_or_else(|| parse_err("version", "expected an unsigned integer"))?;
    if version != SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            found: version,
            supported: SCHEMA_VERSION,
        });
    }
    let file: ScenarioFile = serde_json::from_value(value).map_err(|e| parse_err("document", e))?;

    let horizon = file.horizon;
    let scenario = Scenario {
        space: StateSpace {
            size: file.space.size,
            labels: file.space.labels,
        },
        horizon,
        initial: Pmf::new(file.initial),
        target: file.target.into_behavior(horizon),
        reward: RewardSchedule::new(file.reward),
        sources: file
            .sources
            .into_iter()
            .map(|s| SourceSpec {
                kernels: s.kernels.into_behavior(horizon),
                own_target: s.own_target.map(|t| t.into_behavior(horizon)),
                own_reward: s.own_reward.map(RewardSchedule::new),
            })
            .collect(),
    };

    // Reject structurally broken or non-stochastic data at the door, with
    // coordinates. Semantic cross-checks stay in validate_scenario.
    let report = validate_scenario(&scenario);
    if let Some(v) = report
        .violations
        .iter()
        .find(|v| !v.message.starts_with("absolute continuity"))
    {
        let mut location = v.component.clone();
        if let Some(k) = v.stage {
            location.push_str(&format!(" stage {k}"));
        }
        if let Some(x) = v.from_state {
            location.push_str(&format!(" row {x}"));
        }
        if let Some(y) = v.to_state {
            location.push_str(&format!(" entry {y}"));
        }
        return Err(parse_err(&location, &v.message));
    }

    Ok(scenario)
}

/// Renders a scenario in the normalized (expanded, pretty-printed) form.
pub fn scenario_to_json(s: &Scenario) -> String {
    let file = ScenarioFile {
        version: SCHEMA_VERSION,
        space: SpaceFile {
            size: s.space.size,
            labels: s.space.labels.clone(),
        },
        horizon: s.horizon,
        initial: s.initial.mass.clone(),
        target: KernelsFile::from_behavior(&s.target),
        reward: s.reward.values.clone(),
        sources: s
            .sources
            .iter()
            .map(|src| SourceFile {
                kernels: KernelsFile::from_behavior(&src.kernels),
                own_target: src.own_target.as_ref().map(KernelsFile::from_behavior),
                own_reward: src.own_reward.as_ref().map(|r| r.values.clone()),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("scenario serialization");
    text.push('\n');
    text
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let text = fs::read_to_string(path)?;
    scenario_from_json(&text)
}

pub fn save_scenario(s: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, scenario_to_json(s))?;
    Ok(())
}
