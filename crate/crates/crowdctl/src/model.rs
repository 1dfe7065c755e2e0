//! Finite probability model: state space, pmfs, per-stage transition kernels,
//! reward schedules, behavior sources, and the scenario container.
//!
//! Stages are numbered `k = 1..=N` as in the problem statement; vectors indexed
//! by stage store stage `k` at position `k - 1` unless noted otherwise. All
//! types are immutable plain data; [`validate_scenario`] reports every defect
//! instead of failing fast, so a malformed scenario can always be inspected.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Acceptance tolerance for total probability mass (sums within `1e-9` of 1).
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Below this drift, propagated marginals are left untouched; between this and
/// [`MASS_TOLERANCE`] they are silently renormalized.
pub const RENORM_THRESHOLD: f64 = 1e-12;

/// Finite state space; states are the indices `0..size`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpace {
    pub size: usize,
    /// Cosmetic display names, one per state when present.
    pub labels: Option<Vec<String>>,
}

impl StateSpace {
    pub fn new(size: usize) -> Self {
        StateSpace { size, labels: None }
    }
}

/// Probability mass function over a [`StateSpace`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pmf {
    pub mass: Vec<f64>,
}

impl Pmf {
    pub fn new(mass: Vec<f64>) -> Self {
        Pmf { mass }
    }

    /// Point mass on a single state.
    pub fn point(size: usize, state: usize) -> Self {
        let mut mass = vec![0.0; size];
        mass[state] = 1.0;
        Pmf { mass }
    }

    pub fn uniform(size: usize) -> Self {
        Pmf {
            mass: vec![1.0 / size as f64; size],
        }
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }
}

/// Row-stochastic transition matrix for one stage: `rows[from][to]` is the
/// conditional probability of moving to `to` given `from`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionKernel {
    pub rows: Vec<Vec<f64>>,
}

impl TransitionKernel {
    pub fn new(rows: Vec<Vec<f64>>) -> Self {
        TransitionKernel { rows }
    }

    pub fn identity(size: usize) -> Self {
        let rows = (0..size)
            .map(|i| {
                let mut row = vec![0.0; size];
                row[i] = 1.0;
                row
            })
            .collect();
        TransitionKernel { rows }
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.rows[from]
    }
}

/// A behavior: one transition kernel per stage `k = 1..=N` (entry `k - 1`).
/// The joint distribution it induces is never materialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorSequence {
    pub kernels: Vec<TransitionKernel>,
}

impl BehaviorSequence {
    pub fn new(kernels: Vec<TransitionKernel>) -> Self {
        BehaviorSequence { kernels }
    }

    /// The same kernel repeated for every stage.
    pub fn stationary(kernel: TransitionKernel, horizon: usize) -> Self {
        BehaviorSequence {
            kernels: vec![kernel; horizon],
        }
    }

    pub fn horizon(&self) -> usize {
        self.kernels.len()
    }

    /// Kernel for stage `k` (1-based).
    pub fn stage(&self, k: usize) -> &TransitionKernel {
        &self.kernels[k - 1]
    }
}

/// Per-stage, per-state rewards: `values[k - 1][state]` is `r_k(state)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardSchedule {
    pub values: Vec<Vec<f64>>,
}

impl RewardSchedule {
    pub fn new(values: Vec<Vec<f64>>) -> Self {
        RewardSchedule { values }
    }

    pub fn zero(horizon: usize, size: usize) -> Self {
        RewardSchedule {
            values: vec![vec![0.0; size]; horizon],
        }
    }

    pub fn horizon(&self) -> usize {
        self.values.len()
    }

    /// Rewards for stage `k` (1-based).
    pub fn stage(&self, k: usize) -> &[f64] {
        &self.values[k - 1]
    }
}

/// One behavior source. `own_target`/`own_reward` describe the problem the
/// source itself solves; when absent the source is treated as solving its own
/// problem with its kernels as target and zero reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub kernels: BehaviorSequence,
    pub own_target: Option<BehaviorSequence>,
    pub own_reward: Option<RewardSchedule>,
}

impl SourceSpec {
    pub fn from_kernels(kernels: BehaviorSequence) -> Self {
        SourceSpec {
            kernels,
            own_target: None,
            own_reward: None,
        }
    }
}

/// Full problem instance: target behavior, agent reward, and candidate sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub space: StateSpace,
    pub horizon: usize,
    pub initial: Pmf,
    pub target: BehaviorSequence,
    pub reward: RewardSchedule,
    pub sources: Vec<SourceSpec>,
}

impl Scenario {
    pub fn num_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn num_states(&self) -> usize {
        self.space.size
    }
}

/// A single defect found by [`validate_scenario`]. Coordinates are filled in
/// where they apply: `stage` is 1-based, states are indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Which part of the scenario: "space", "initial", "target", "reward",
    /// "source 2", "source 2 own_target", ...
    pub component: String,
    pub stage: Option<usize>,
    pub from_state: Option<usize>,
    pub to_state: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.component)?;
        if let Some(k) = self.stage {
            write!(f, " stage {k}")?;
        }
        if let Some(x) = self.from_state {
            write!(f, " from {x}")?;
        }
        if let Some(y) = self.to_state {
            write!(f, " to {y}")?;
        }
        write!(f, ": {}", self.message)
    }
}

/// Everything wrong with a scenario; empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for v in &self.violations {
            writeln!(f, "- {v}")?;
        }
        Ok(())
    }
}

struct Check<'a> {
    size: usize,
    horizon: usize,
    out: &'a mut Vec<Violation>,
}

impl Check<'_> {
    fn push(
        &mut self,
        component: &str,
        stage: Option<usize>,
        from_state: Option<usize>,
        to_state: Option<usize>,
        message: String,
    ) {
        self.out.push(Violation {
            component: component.to_string(),
            stage,
            from_state,
            to_state,
            message,
        });
    }

    fn pmf_row(&mut self, component: &str, stage: Option<usize>, from: Option<usize>, row: &[f64]) {
        if row.len() != self.size {
            self.push(
                component,
                stage,
                from,
                None,
                format!("expected {} entries, found {}", self.size, row.len()),
            );
            return;
        }
        for (to, &m) in row.iter().enumerate() {
            if m < 0.0 || !m.is_finite() {
                self.push(
                    component,
                    stage,
                    from,
                    Some(to),
                    format!("negative or non-finite mass {m}"),
                );
            }
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > MASS_TOLERANCE {
            self.push(
                component,
                stage,
                from,
                None,
                format!("mass sums to {sum}, expected 1"),
            );
        }
    }

    fn behavior(&mut self, component: &str, behavior: &BehaviorSequence) {
        if behavior.horizon() != self.horizon {
            self.push(
                component,
                None,
                None,
                None,
                format!(
                    "expected {} stage kernels, found {}",
                    self.horizon,
                    behavior.horizon()
                ),
            );
        }
        for (i, kernel) in behavior.kernels.iter().enumerate() {
            let k = i + 1;
            if kernel.rows.len() != self.size {
                self.push(
                    component,
                    Some(k),
                    None,
                    None,
                    format!("expected {} rows, found {}", self.size, kernel.rows.len()),
                );
                continue;
            }
            for (from, row) in kernel.rows.iter().enumerate() {
                self.pmf_row(component, Some(k), Some(from), row);
            }
        }
    }

    fn reward(&mut self, component: &str, reward: &RewardSchedule) {
        if reward.horizon() != self.horizon {
            self.push(
                component,
                None,
                None,
                None,
                format!(
                    "expected {} stage rows, found {}",
                    self.horizon,
                    reward.horizon()
                ),
            );
        }
        for (i, row) in reward.values.iter().enumerate() {
            let k = i + 1;
            if row.len() != self.size {
                self.push(
                    component,
                    Some(k),
                    None,
                    None,
                    format!("expected {} entries, found {}", self.size, row.len()),
                );
                continue;
            }
            for (x, &r) in row.iter().enumerate() {
                if !r.is_finite() {
                    self.push(
                        component,
                        Some(k),
                        Some(x),
                        None,
                        format!("non-finite reward {r}"),
                    );
                }
            }
        }
    }
}

/// Checks every structural and numerical requirement on a scenario and lists
/// each violation with its coordinates: normalization (row sums within
/// `1e-9`), negative mass, dimension mismatches, and source-to-target absolute
/// continuity. Nothing is thrown; an empty report means the scenario is valid.
pub fn validate_scenario(s: &Scenario) -> ValidationReport {
    let mut violations = Vec::new();
    let mut check = Check {
        size: s.space.size,
        horizon: s.horizon,
        out: &mut violations,
    };

    if s.space.size == 0 {
        check.push(
            "space",
            None,
            None,
            None,
            "size must be at least 1".to_string(),
        );
    }
    if s.horizon == 0 {
        check.push(
            "space",
            None,
            None,
            None,
            "horizon must be at least 1".to_string(),
        );
    }
    if let Some(labels) = &s.space.labels {
        if labels.len() != s.space.size {
            check.push(
                "space",
                None,
                None,
                None,
                format!("expected {} labels, found {}", s.space.size, labels.len()),
            );
        }
        let mut seen = std::collections::HashSet::new();
        for l in labels {
            if !seen.insert(l) {
                check.push("space", None, None, None, format!("duplicate label {l:?}"));
            }
        }
    }

    check.pmf_row("initial", None, None, &s.initial.mass);
    check.behavior("target", &s.target);
    check.reward("reward", &s.reward);

    if s.sources.is_empty() {
        check.push(
            "sources",
            None,
            None,
            None,
            "at least one source is required".to_string(),
        );
    }
    for (i, source) in s.sources.iter().enumerate() {
        let name = format!("source {}", i + 1);
        check.behavior(&name, &source.kernels);

        // Absolute continuity: source mass only where the target has mass.
        let stages = source.kernels.horizon().min(s.target.horizon());
        for k in 1..=stages {
            let src = source.kernels.stage(k);
            let tgt = s.target.stage(k);
            let rows = src.rows.len().min(tgt.rows.len());
            for from in 0..rows {
                let n = src.rows[from].len().min(tgt.rows[from].len());
                for to in 0..n {
                    if src.rows[from][to] > 0.0 && tgt.rows[from][to] == 0.0 {
                        check.push(
                            &name,
                            Some(k),
                            Some(from),
                            Some(to),
                            format!(
                                "absolute continuity violated: source mass {} where target mass is 0",
                                src.rows[from][to]
                            ),
                        );
                    }
                }
            }
        }

        match (&source.own_target, &source.own_reward) {
            (Some(t), Some(r)) => {
                check.behavior(&format!("{name} own_target"), t);
                check.reward(&format!("{name} own_reward"), r);
            }
            (None, None) => {}
            _ => {
                check.push(
                    &name,
                    None,
                    None,
                    None,
                    "own_target and own_reward must be both present or both absent".to_string(),
                );
            }
        }
    }

    ValidationReport { violations }
}
