//! Procedural memory: heuristic productions with utility learning.
//!
//! Two families of heuristics live here. *Binding* heuristics choose
//! which concrete realizer gets a selected abstract service — a
//! weighted QoS score, with a deadline guard that doubles the latency
//! weight when time pressure is on. *Tuning* heuristics swap the
//! attention network's global parameters for a configuration that
//! satisfies a mode's ordering constraint (goal-oriented, reactive,
//! adaptive, conflict-sensitive).
//!
//! Every heuristic carries a utility that tracks the rewards its
//! episodes earned:
//!
//! ```text
//! U' = U + α(R − U) + ε        ε = e^(−n/k)
//! ```
//!
//! where `n` counts prior updates, so the novelty bonus ε starts at 1
//! and fades fast (k = 0.35). All heuristics fired during one
//! composition episode share that episode's reward.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::GlobalParams;
use crate::domain::{
    AbstractService, Catalog, ConcreteId, ConcreteService, DeviceId, QosDirection,
};

/// Default learning rate α.
pub const DEFAULT_ALPHA: f64 = 0.2;
/// Default novelty decay constant k.
pub const DEFAULT_NOVELTY_K: f64 = 0.35;

/// Per-dimension weights for the binding score. Missing dimensions
/// weigh 1.0.
pub type QosWeights = BTreeMap<String, f64>;

/// A bound a candidate must satisfy before scoring. Hard requirements
/// exclude violators outright; soft ones only shape the score via
/// weights.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QosRequirement {
    pub dimension: String,
    pub bound: f64,
    pub hard: bool,
}

impl QosRequirement {
    pub fn hard(dimension: &str, bound: f64) -> Self {
        Self { dimension: dimension.to_owned(), bound, hard: true }
    }

    /// A candidate satisfies a bound in the dimension's own direction:
    /// at most `bound` for lower-better, at least `bound` for
    /// higher-better. Candidates missing the dimension fail.
    fn satisfied_by(&self, candidate: &ConcreteService) -> bool {
        match candidate.qos.get(&self.dimension) {
            Some(v) => match v.direction {
                QosDirection::LowerBetter => v.value <= self.bound,
                QosDirection::HigherBetter => v.value >= self.bound,
            },
            None => false,
        }
    }
}

/// Situation the binding decision runs in.
#[derive(Clone, Debug, Default)]
pub struct BindContext {
    /// Hosts currently reachable; a realizer on any other device is
    /// invisible to binding.
    pub reachable: BTreeSet<DeviceId>,
    /// Composition deadline pressure — trips the latency-boost guard.
    pub time_pressure: bool,
    /// Hard/soft QoS requirements from the request.
    pub requirements: Vec<QosRequirement>,
}

/// What a heuristic does when it fires.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeuristicKind {
    QosWeighting,
    ParamAdjustment,
}

/// Condition under which a heuristic applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Guard {
    Always,
    TimePressure,
}

impl Guard {
    fn holds(&self, ctx: &BindContext) -> bool {
        match self {
            Guard::Always => true,
            Guard::TimePressure => ctx.time_pressure,
        }
    }
}

/// One production with its learning state.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Heuristic {
    pub id: String,
    pub kind: HeuristicKind,
    pub guard: Guard,
    /// Prior updates; drives the fading novelty bonus.
    pub usage_count: u64,
    pub utility: f64,
    pub reward_history: Vec<f64>,
}

impl Heuristic {
    pub fn new(id: &str, kind: HeuristicKind, guard: Guard) -> Self {
        Self {
            id: id.to_owned(),
            kind,
            guard,
            usage_count: 0,
            utility: 0.0,
            reward_history: Vec::new(),
        }
    }
}

/// Ordering constraint a tuning request must satisfy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TuningMode {
    /// γ > φ: goals outweigh the current situation.
    GoalOriented,
    /// φ > γ and φ > θ: the situation dominates and acts fast.
    Reactive,
    /// φ > π > γ: situation-heavy but centered, quick to re-aim.
    Adaptive,
    /// δ > γ: protecting achieved goals beats chasing new ones.
    ConflictSensitive,
    /// No ordering constraint beyond basic validity.
    Neutral,
}

impl TuningMode {
    pub fn constraint_holds(&self, p: &GlobalParams) -> bool {
        let (theta, pi, phi, gamma, delta) = (
            p.activation_threshold,
            p.mean_activation,
            p.wm_energy,
            p.goal_energy,
            p.protected_goal_energy,
        );
        match self {
            TuningMode::GoalOriented => gamma > phi,
            TuningMode::Reactive => phi > gamma && phi > theta,
            TuningMode::Adaptive => phi > pi && pi > gamma,
            TuningMode::ConflictSensitive => delta > gamma,
            TuningMode::Neutral => true,
        }
    }

    fn constraint_text(&self) -> &'static str {
        match self {
            TuningMode::GoalOriented => "γ > φ",
            TuningMode::Reactive => "φ > γ and φ > θ",
            TuningMode::Adaptive => "φ > π > γ",
            TuningMode::ConflictSensitive => "δ > γ",
            TuningMode::Neutral => "none",
        }
    }
}

impl fmt::Display for TuningMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TuningMode::GoalOriented => "goal-oriented",
            TuningMode::Reactive => "reactive",
            TuningMode::Adaptive => "adaptive",
            TuningMode::ConflictSensitive => "conflict-sensitive",
            TuningMode::Neutral => "neutral",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum BindError {
    /// No realizer is reachable and admissible; composition must
    /// replan around this service.
    #[error("no reachable realizer for abstract service {service}")]
    NoReachableRealizer { service: String },
}

#[derive(Debug, Error, PartialEq)]
pub enum TuningError {
    #[error("configuration violates {mode} constraint ({constraint})")]
    ConstraintViolation { mode: TuningMode, constraint: &'static str },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// Apply one utility update in place. The novelty bonus uses the count
/// of *prior* updates, so a fresh heuristic gets the full +1.
pub fn update_utility(h: &mut Heuristic, reward: f64, alpha: f64, k: f64) {
    let epsilon = (-(h.usage_count as f64) / k).exp();
    h.utility += alpha * (reward - h.utility) + epsilon;
    h.usage_count += 1;
    h.reward_history.push(reward);
    if h.reward_history.len() > 64 {
        h.reward_history.remove(0);
    }
}

/// Validate a tuning request: the learned configuration must be valid
/// and satisfy the mode's ordering constraint. Returns the accepted
/// configuration.
pub fn tune_parameters(
    mode: TuningMode,
    learned: GlobalParams,
) -> Result<GlobalParams, TuningError> {
    learned.validate().map_err(TuningError::InvalidParams)?;
    if !mode.constraint_holds(&learned) {
        return Err(TuningError::ConstraintViolation {
            mode,
            constraint: mode.constraint_text(),
        });
    }
    Ok(learned)
}

/// The heuristic registry plus episode-scoped reward attribution.
pub struct ProceduralMemory {
    heuristics: BTreeMap<String, Heuristic>,
    alpha: f64,
    novelty_k: f64,
    /// Heuristics fired since the episode started; they all share the
    /// episode's reward.
    fired: BTreeSet<String>,
}

impl Default for ProceduralMemory {
    fn default() -> Self {
        Self::new()
    }
}

impl ProceduralMemory {
    /// Registry with the standard productions: uniform QoS weighting,
    /// the deadline latency boost, and one tuner per mode.
    pub fn new() -> Self {
        let mut heuristics = BTreeMap::new();
        for h in [
            Heuristic::new("bind-weighted-qos", HeuristicKind::QosWeighting, Guard::Always),
            Heuristic::new("bind-deadline-latency", HeuristicKind::QosWeighting, Guard::TimePressure),
            Heuristic::new("tune-goal-oriented", HeuristicKind::ParamAdjustment, Guard::Always),
            Heuristic::new("tune-reactive", HeuristicKind::ParamAdjustment, Guard::Always),
            Heuristic::new("tune-adaptive", HeuristicKind::ParamAdjustment, Guard::Always),
            Heuristic::new("tune-conflict-sensitive", HeuristicKind::ParamAdjustment, Guard::Always),
        ] {
            heuristics.insert(h.id.clone(), h);
        }
        Self { heuristics, alpha: DEFAULT_ALPHA, novelty_k: DEFAULT_NOVELTY_K, fired: BTreeSet::new() }
    }

    pub fn heuristic(&self, id: &str) -> Option<&Heuristic> {
        self.heuristics.get(id)
    }

    pub fn heuristics(&self) -> impl Iterator<Item = &Heuristic> {
        self.heuristics.values()
    }

    /// Deterministic choice among competing productions of one kind
    /// whose guards hold: argmax utility, ties toward the smaller id.
    pub fn choose(&self, kind: HeuristicKind, ctx: &BindContext) -> Option<&Heuristic> {
        self.heuristics
            .values()
            .filter(|h| h.kind == kind && h.guard.holds(ctx))
            .max_by(|a, b| {
                a.utility
                    .partial_cmp(&b.utility)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then_with(|| b.id.cmp(&a.id))
            })
    }

    /// Bind a selected abstract service to its best reachable
    /// realizer.
    ///
    /// Candidates on unreachable hosts or violating any hard
    /// requirement are excluded. Survivors are scored by the weighted
    /// sum of their QoS values (lower-better dimensions negated); the
    /// deadline guard doubles the latency weight. Ties break toward
    /// lower latency, then the smaller id.
    pub fn bind_concrete(
        &mut self,
        selected: &AbstractService,
        catalog: &Catalog,
        weights: &QosWeights,
        ctx: &BindContext,
    ) -> Result<ConcreteId, BindError> {
        let no_realizer = || BindError::NoReachableRealizer { service: selected.id.0.clone() };
        let deadline_boost = ctx.time_pressure;
        self.fired.insert("bind-weighted-qos".to_owned());
        if deadline_boost {
            self.fired.insert("bind-deadline-latency".to_owned());
        }

        let mut best: Option<(f64, f64, &ConcreteService)> = None;
        for cid in &selected.realizers {
            let Some(candidate) = catalog.concrete_service(cid) else { continue };
            if !ctx.reachable.contains(&candidate.host) {
                continue;
            }
            if ctx.requirements.iter().any(|r| r.hard && !r.satisfied_by(candidate)) {
                continue;
            }
            let score = weighted_score(candidate, weights, deadline_boost);
            let latency = candidate
                .qos
                .get("latency")
                .map(|v| v.value)
                .unwrap_or(f64::INFINITY);
            let better = match &best {
                None => true,
                Some((b_score, b_latency, b_svc)) => {
                    score > *b_score
                        || (score == *b_score
                            && (latency < *b_latency
                                || (latency == *b_latency && candidate.id < b_svc.id)))
                }
            };
            if better {
                best = Some((score, latency, candidate));
            }
        }
        best.map(|(_, _, svc)| svc.id.clone()).ok_or_else(no_realizer)
    }

    /// Record that a tuning production fired, then validate and return
    /// the configuration via [`tune_parameters`].
    pub fn tune(
        &mut self,
        mode: TuningMode,
        learned: GlobalParams,
    ) -> Result<GlobalParams, TuningError> {
        let accepted = tune_parameters(mode, learned)?;
        let id = match mode {
            TuningMode::GoalOriented => Some("tune-goal-oriented"),
            TuningMode::Reactive => Some("tune-reactive"),
            TuningMode::Adaptive => Some("tune-adaptive"),
            TuningMode::ConflictSensitive => Some("tune-conflict-sensitive"),
            // The default stance is not a production firing.
            TuningMode::Neutral => None,
        };
        if let Some(id) = id {
            self.fired.insert(id.to_owned());
        }
        Ok(accepted)
    }

    /// Close the current episode: every heuristic that fired shares
    /// `reward`, then the attribution window clears.
    pub fn settle_episode(&mut self, reward: f64) {
        let fired = std::mem::take(&mut self.fired);
        for id in fired {
            if let Some(h) = self.heuristics.get_mut(&id) {
                update_utility(h, reward, self.alpha, self.novelty_k);
            }
        }
    }

    pub fn fired_this_episode(&self) -> impl Iterator<Item = &str> {
        self.fired.iter().map(String::as_str)
    }
}

/// Weighted QoS score: higher-better dimensions add, lower-better
/// subtract; unspecified weights default to 1; the deadline guard
/// doubles the latency weight.
fn weighted_score(candidate: &ConcreteService, weights: &QosWeights, deadline_boost: bool) -> f64 {
    let mut score = 0.0;
    for dim in candidate.qos.dimensions() {
        let v = candidate.qos.get(dim).expect("dimension just listed");
        let mut w = weights.get(dim).copied().unwrap_or(1.0);
        if deadline_boost && dim == "latency" {
            w *= 2.0;
        }
        score += match v.direction {
            QosDirection::HigherBetter => w * v.value,
            QosDirection::LowerBetter => -(w * v.value),
        };
    }
    score
}

/// Persist a learned configuration for reuse as a tuning input.
pub fn save_learned_config(path: &Path, params: &GlobalParams) -> std::io::Result<()> {
    let body = toml::to_string_pretty(params)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
    std::fs::write(path, body)
}

/// Load a configuration previously saved by [`save_learned_config`].
pub fn load_learned_config(path: &Path) -> std::io::Result<GlobalParams> {
    let body = std::fs::read_to_string(path)?;
    toml::from_str(&body).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}
