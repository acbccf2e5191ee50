//! The cognitive agent: one device's perception→action loop.
//!
//! Each cycle (50 ms of model time) runs the same pipeline:
//!
//! 1. perceive this cycle's stimuli,
//! 2. write the perceived premises into working memory,
//! 3. cue declarative memory with the active premises,
//! 4. write the recalled associations into working memory,
//! 5. decay and filter percepts, working memory, and the slipnet,
//! 6. spread activation and try to select an abstract service,
//! 7. bind the selection to a concrete realizer by QoS,
//! 8. schedule the resulting action, and
//! 9. pop at most one due action from the queue and execute it.
//!
//! Goal-driven steps (3–8) only run while the agent has open goals;
//! a device with nothing to compose still perceives and decays, which
//! is what keeps its resting memory footprint honest.
//!
//! Activations in the attention network persist across cycles,
//! replans, and goal switches — the agent never reinitializes them.
//! Selection reads the raw spread totals; the persisted vector is
//! then rescaled to mean π so long-running agents stay bounded.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::{ActivationBreakdown, BehaviorNetwork, GlobalParams, Selection};
use crate::declarative::{DeclarativeConfig, DeclarativeMemory, MemoryKind};
use crate::domain::{
    AbstractId, Catalog, ConcreteId, DeviceId, Goal, Premise, PremiseSet,
};
use crate::perception::{Perception, Stimulus};
use crate::procedural::{BindContext, ProceduralMemory, QosWeights, TuningError, TuningMode};
use crate::working_memory::{VolatilityClass, WmConfig, WorkingMemory};

/// Model-time length of one cognitive cycle.
pub const CYCLE_SECONDS: f64 = 0.05;
/// Model-time cost of one matchmaking (binding) attempt.
pub const MATCHMAKING_SECONDS: f64 = 0.2;

/// What an action does when executed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionKind {
    ServiceExecution,
    GoalSetting,
    Effector,
    Discovery,
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ActionKind::ServiceExecution => "service-execution",
            ActionKind::GoalSetting => "goal-setting",
            ActionKind::Effector => "effector",
            ActionKind::Discovery => "discovery",
        };
        f.write_str(s)
    }
}

/// Action payloads; a service execution always carries its binding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ActionPayload {
    Execute { service: AbstractId, binding: ConcreteId, host: DeviceId },
    SetGoal(Goal),
    Effector(Premise),
    Discover(AbstractId),
}

impl ActionPayload {
    pub fn kind(&self) -> ActionKind {
        match self {
            ActionPayload::Execute { .. } => ActionKind::ServiceExecution,
            ActionPayload::SetGoal(_) => ActionKind::GoalSetting,
            ActionPayload::Effector(_) => ActionKind::Effector,
            ActionPayload::Discover(_) => ActionKind::Discovery,
        }
    }
}

/// A schedulable unit of behavior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentAction {
    pub payload: ActionPayload,
    pub priority: i32,
    /// Earliest cycle the action may run.
    pub scheduled_cycle: u64,
}

/// Priority queue with stable FIFO order inside each priority level
/// and support for deferred actions.
#[derive(Debug, Default)]
pub struct ActionQueue {
    entries: Vec<(u64, AgentAction)>,
    next_seq: u64,
}

impl ActionQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn schedule(&mut self, action: AgentAction) {
        self.entries.push((self.next_seq, action));
        self.next_seq += 1;
    }

    /// Remove and return the best due action: highest priority first,
    /// FIFO among equals; actions scheduled in the future stay put.
    pub fn next(&mut self, cycle: u64) -> Option<AgentAction> {
        let mut best: Option<usize> = None;
        for (idx, (seq, action)) in self.entries.iter().enumerate() {
            if action.scheduled_cycle > cycle {
                continue;
            }
            let better = match best {
                None => true,
                Some(b) => {
                    let (b_seq, b_action) = &self.entries[b];
                    action.priority > b_action.priority
                        || (action.priority == b_action.priority && seq < b_seq)
                }
            };
            if better {
                best = Some(idx);
            }
        }
        best.map(|idx| self.entries.remove(idx).1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum AgentError {
    #[error("goal {goal} lacks premise evidence in working memory")]
    GoalNotSatisfied { goal: String },
    #[error("unknown goal {goal}")]
    UnknownGoal { goal: String },
}

/// Assertion counters for the memory-discipline checks. Violations
/// stay at zero in a correct build; the counters prove the checks ran.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AgentAudit {
    /// Cycle-end working-memory size checks performed / failed.
    pub wm_checks: u64,
    pub wm_violations: u64,
    /// Premises offered to the attention network checked / found
    /// below the activation threshold.
    pub feed_checks: u64,
    pub feed_violations: u64,
}

/// Activation bookkeeping around one goal switch: the stored map at
/// the moment of the switch, and the map the next spreading step
/// actually read as its input.
#[derive(Clone, Debug)]
pub struct GoalSwitchRecord {
    pub at_cycle: u64,
    pub pre_switch: BTreeMap<AbstractId, f64>,
    pub switch_read: Option<BTreeMap<AbstractId, f64>>,
}

/// Rolling statistics for the current composition episode.
#[derive(Clone, Debug, Default)]
pub struct EpisodeStats {
    pub started_cycle: u64,
    pub executed: Vec<(AbstractId, ConcreteId)>,
    pub replans: u64,
    pub matchmaking_s: f64,
    pub execution_s: f64,
}

/// What one `run_cycle` call did.
#[derive(Clone, Debug, Default)]
pub struct CycleReport {
    pub cycle: u64,
    /// False when the agent had nothing at all to do.
    pub ran: bool,
    pub selected: Option<AbstractId>,
    /// Binding failed for this service; composition must replan.
    pub replanned: Option<AbstractId>,
    pub action: Option<AgentAction>,
    /// Declarative pages touched this cycle (transient memory).
    pub sdm_pages: usize,
}

/// Tunables for one agent.
#[derive(Clone, Debug)]
pub struct AgentConfig {
    pub wm: WmConfig,
    pub declarative: DeclarativeConfig,
    pub params: GlobalParams,
    pub qos_weights: QosWeights,
    pub matchmaking_delay_s: f64,
    pub log_events: bool,
    pub trace_activations: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            wm: WmConfig::default(),
            declarative: DeclarativeConfig::default(),
            params: GlobalParams::c1(),
            qos_weights: QosWeights::new(),
            matchmaking_delay_s: MATCHMAKING_SECONDS,
            log_events: false,
            trace_activations: false,
        }
    }
}

const EVENT_LOG_CAP: usize = 20_000;

/// One device's cognitive loop over the shared service ontology.
pub struct CognitiveAgent {
    device: DeviceId,
    catalog: Arc<Catalog>,
    config: AgentConfig,
    perception: Perception,
    wm: WorkingMemory,
    declarative: DeclarativeMemory,
    network: BehaviorNetwork,
    procedural: ProceduralMemory,
    queue: ActionQueue,
    goals: BTreeMap<String, Goal>,
    protected: BTreeMap<String, Goal>,
    /// Goal ids belonging to the request currently being served;
    /// protected goals outside this set are orphans and drop (rather
    /// than re-open) when violated.
    current_request: BTreeSet<String>,
    cycle: u64,
    episode: EpisodeStats,
    audit: AgentAudit,
    switches: Vec<GoalSwitchRecord>,
    switch_pending: bool,
    /// Services whose execution is currently in flight with an
    /// effector; they sit out selection until the result arrives.
    dispatched: BTreeSet<AbstractId>,
    events: Vec<String>,
    trace: Vec<(u64, ActivationBreakdown)>,
}

impl CognitiveAgent {
    pub fn new(device: DeviceId, catalog: Arc<Catalog>, config: AgentConfig, seed: u64) -> Self {
        let instance_seed = seed ^ (u64::from(device.0) << 32 | 0x00c0_97e5);
        let declarative = DeclarativeMemory::new(&config.declarative, seed, instance_seed);
        let network = BehaviorNetwork::new(&catalog, config.params);
        let wm = WorkingMemory::new(config.wm.clone());
        Self {
            device,
            catalog,
            config,
            perception: Perception::new(),
            wm,
            declarative,
            network,
            procedural: ProceduralMemory::new(),
            queue: ActionQueue::new(),
            goals: BTreeMap::new(),
            protected: BTreeMap::new(),
            current_request: BTreeSet::new(),
            cycle: 0,
            episode: EpisodeStats::default(),
            audit: AgentAudit::default(),
            switches: Vec::new(),
            switch_pending: false,
            dispatched: BTreeSet::new(),
            events: Vec::new(),
            trace: Vec::new(),
        }
    }

    pub fn device(&self) -> DeviceId {
        self.device
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn wm(&self) -> &WorkingMemory {
        &self.wm
    }

    pub fn perception(&self) -> &Perception {
        &self.perception
    }

    pub fn network(&self) -> &BehaviorNetwork {
        &self.network
    }

    pub fn network_mut(&mut self) -> &mut BehaviorNetwork {
        &mut self.network
    }

    pub fn declarative_mut(&mut self) -> &mut DeclarativeMemory {
        &mut self.declarative
    }

    pub fn procedural(&self) -> &ProceduralMemory {
        &self.procedural
    }

    pub fn audit(&self) -> &AgentAudit {
        &self.audit
    }

    pub fn episode(&self) -> &EpisodeStats {
        &self.episode
    }

    pub fn switches(&self) -> &[GoalSwitchRecord] {
        &self.switches
    }

    pub fn events(&self) -> &[String] {
        &self.events
    }

    pub fn trace(&self) -> &[(u64, ActivationBreakdown)] {
        &self.trace
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn active_goals(&self) -> impl Iterator<Item = &Goal> {
        self.goals.values()
    }

    pub fn protected_goals(&self) -> impl Iterator<Item = &Goal> {
        self.protected.values()
    }

    /// All of the current request's goals are satisfied and nothing is
    /// left in the queue.
    pub fn composition_complete(&self) -> bool {
        self.goals.is_empty() && self.queue.is_empty()
    }

    /// Model time spent on the current episode so far.
    pub fn composition_time_s(&self) -> f64 {
        let cycles = self.cycle.saturating_sub(self.episode.started_cycle);
        cycles as f64 * CYCLE_SECONDS + self.episode.matchmaking_s + self.episode.execution_s
    }

    /// Start a fresh composition episode for `goal`. Working memory,
    /// percepts, and the action queue reset; attention-network
    /// activations, declarative memories, and heuristic utilities
    /// deliberately persist.
    pub fn submit_request(&mut self, goal: Goal) {
        self.wm = WorkingMemory::new(self.config.wm.clone());
        self.perception = Perception::new();
        self.queue.clear();
        self.goals.clear();
        self.dispatched.clear();
        self.current_request = BTreeSet::from([goal.id.clone()]);
        self.episode = EpisodeStats { started_cycle: self.cycle, ..Default::default() };
        self.queue.schedule(AgentAction {
            priority: goal.priority,
            scheduled_cycle: self.cycle,
            payload: ActionPayload::SetGoal(goal),
        });
    }

    /// Replace the current request's goals mid-episode (the user
    /// changed their mind). Unsatisfied goals drop; achieved ones stay
    /// protected but become orphans. Activations are left exactly as
    /// they are — the record captures them for the persistence check.
    pub fn switch_request(&mut self, goal: Goal) {
        self.switches.push(GoalSwitchRecord {
            at_cycle: self.cycle,
            pre_switch: self.network.activations(),
            switch_read: None,
        });
        self.switch_pending = true;
        self.goals.clear();
        self.current_request = BTreeSet::from([goal.id.clone()]);
        self.queue.schedule(AgentAction {
            priority: goal.priority,
            scheduled_cycle: self.cycle,
            payload: ActionPayload::SetGoal(goal),
        });
    }

    /// Mark a goal achieved. Requires its target premises to be active
    /// in working memory; idempotent for already-protected goals.
    pub fn satisfy_goal(&mut self, goal_id: &str) -> Result<(), AgentError> {
        if self.protected.contains_key(goal_id) {
            return Ok(());
        }
        let Some(goal) = self.goals.get(goal_id) else {
            return Err(AgentError::UnknownGoal { goal: goal_id.to_owned() });
        };
        let active = self.wm.active(self.cycle);
        if !goal.targets.is_subset(&active) {
            return Err(AgentError::GoalNotSatisfied { goal: goal_id.to_owned() });
        }
        let mut goal = self.goals.remove(goal_id).expect("checked above");
        goal.protected = true;
        self.protected.insert(goal.id.clone(), goal);
        Ok(())
    }

    /// Validate and adopt a new attention-parameter configuration.
    pub fn tune(&mut self, mode: TuningMode, params: GlobalParams) -> Result<(), TuningError> {
        let accepted = self.procedural.tune(mode, params)?;
        self.network.set_params(accepted);
        Ok(())
    }

    /// Close the episode's utility-attribution window with its reward.
    pub fn settle_episode(&mut self, reward: f64) {
        self.procedural.settle_episode(reward);
    }

    /// Hold a service out of selection while its execution is pending
    /// with an external effector.
    pub fn mark_dispatched(&mut self, service: AbstractId) {
        self.dispatched.insert(service);
    }

    /// The pending execution finished (either way); the service may
    /// compete for selection again.
    pub fn clear_dispatched(&mut self, service: &AbstractId) {
        self.dispatched.remove(service);
    }

    /// One cognitive cycle. `stimuli` are this cycle's observations;
    /// `bind` carries reachability and deadline pressure for binding.
    pub fn run_cycle(&mut self, stimuli: &[Stimulus], bind: &BindContext) -> CycleReport {
        let mut report = CycleReport::default();
        if self.goals.is_empty() && self.queue.is_empty() && stimuli.is_empty() {
            report.cycle = self.cycle;
            return report;
        }
        self.cycle += 1;
        let now = self.cycle;
        report.cycle = now;
        report.ran = true;

        // 1–2: perceive and write working memory.
        let perceived = self.perception.perceive(stimuli, now).unwrap_or_default();
        for p in perceived {
            self.wm.write(p.premise, VolatilityClass::for_stimulus(p.class), now);
        }

        // 3–4: cue declarative memory (only worth the scan when the
        // agent is actually composing) and lay recalls into spare slots.
        if !self.goals.is_empty() {
            let active = self.wm.active(now);
            let cue = self.declarative.cue(&active);
            report.sdm_pages = cue.pages_touched;
            for premise in cue.associations {
                self.wm.recall(premise, VolatilityClass::Preference, now);
            }
        }

        // 5: decay and filter.
        self.perception.tick(now);
        self.wm.tick(now);
        self.declarative.tick();

        // Perceived facts alone may satisfy goals.
        self.sweep_satisfied();

        // 6–8: attention and binding, while goals remain.
        if !self.goals.is_empty() {
            let wm_active = self.wm.active(now);
            self.audit.feed_checks += wm_active.len() as u64;
            for premise in &wm_active {
                let visible = self
                    .wm
                    .base_level(premise, now)
                    .map(|b| b > self.config.wm.activation_threshold)
                    .unwrap_or(false);
                if !visible {
                    self.audit.feed_violations += 1;
                }
            }

            // Only *outstanding* goal premises pull energy; a premise
            // that already holds stops rewarding its providers, which
            // is what moves the chain forward instead of looping.
            let mut goal_premises = PremiseSet::new();
            for goal in self.goals.values() {
                goal_premises.extend(goal.targets.iter().cloned());
                goal_premises.extend(goal.subgoals.iter().cloned());
            }
            goal_premises.retain(|p| !wm_active.contains(p));
            let mut protected_premises = PremiseSet::new();
            for goal in self.protected.values() {
                protected_premises.extend(goal.targets.iter().cloned());
            }

            if self.switch_pending {
                if let Some(record) = self.switches.last_mut() {
                    record.switch_read = Some(self.network.activations());
                }
                self.switch_pending = false;
            }

            let rows = self.network.spread(&wm_active, &goal_premises, &protected_premises);
            if self.config.trace_activations {
                self.trace.extend(rows.iter().map(|r| (now, r.clone())));
            }

            // Executable services that would assert nothing new are
            // no-ops for the situation; they don't compete for the
            // cycle's one action (and so never re-execute while their
            // effects still hold).
            let mut executable = self.network.executable_set(&wm_active);
            executable.retain(|id| {
                !self.dispatched.contains(id)
                    && self
                        .catalog
                        .abstract_service(id)
                        .map(|svc| svc.add_list.is_empty() || !svc.add_list.is_subset(&wm_active))
                        .unwrap_or(false)
            });
            let selection = self.network.select(&executable);
            // Keep the persisted energy bounded; selection already saw
            // the raw totals.
            self.network.normalize();

            if let Selection::Selected { id, .. } = selection {
                report.selected = Some(id.clone());
                let svc = self.catalog.abstract_service(&id).cloned().expect("selected from catalog");
                self.episode.matchmaking_s += self.config.matchmaking_delay_s;
                match self.procedural.bind_concrete(&svc, &self.catalog, &self.config.qos_weights, bind)
                {
                    Ok(binding) => {
                        let host =
                            self.catalog.concrete_service(&binding).expect("bound from catalog").host;
                        let priority =
                            self.goals.values().map(|g| g.priority).max().unwrap_or(0);
                        self.queue.schedule(AgentAction {
                            payload: ActionPayload::Execute { service: id, binding, host },
                            priority,
                            scheduled_cycle: now,
                        });
                    }
                    Err(_) => {
                        self.episode.replans += 1;
                        report.replanned = Some(id);
                    }
                }
            }
        }

        // 9: execute at most one due action.
        if let Some(action) = self.queue.next(now) {
            if let ActionPayload::SetGoal(goal) = &action.payload {
                self.goals.insert(goal.id.clone(), goal.clone());
            }
            report.action = Some(action);
        }

        // Cycle-end working-memory discipline.
        self.audit.wm_checks += 1;
        if self.wm.len() > self.config.wm.capacity {
            self.audit.wm_violations += 1;
        }

        if self.config.log_events && self.events.len() < EVENT_LOG_CAP {
            let entry = serde_json::json!({
                "cycle": now,
                "device": self.device.0,
                "wm": self.wm.len(),
                "goals": self.goals.len(),
                "selected": report.selected.as_ref().map(|s| s.0.clone()),
                "replanned": report.replanned.as_ref().map(|s| s.0.clone()),
                "action": report.action.as_ref().map(|a| a.payload.kind()),
            });
            self.events.push(entry.to_string());
        }

        report
    }

    /// Apply a completed execution: postconditions enter working
    /// memory, deleted premises leave it (re-opening or orphaning
    /// protected goals), the episode log grows, and the outcome is
    /// stored as a declarative episode.
    pub fn apply_execution_success(
        &mut self,
        service: &AbstractId,
        binding: &ConcreteId,
        execution_delay_s: f64,
    ) {
        let Some(svc) = self.catalog.abstract_service(service).cloned() else { return };
        let now = self.cycle;
        for premise in &svc.add_list {
            self.wm.write(premise.clone(), VolatilityClass::Preference, now);
        }
        for premise in &svc.del_list {
            self.wm.remove(premise);
            self.handle_violation(premise);
        }
        self.episode.executed.push((service.clone(), binding.clone()));
        self.episode.execution_s += execution_delay_s;

        // Remember the outcome under each situation premise that led
        // here, so the same situation later recalls it.
        let outcome = Premise::new(service.0.clone(), "ok");
        for premise in &svc.preconditions {
            self.declarative.store_episode(MemoryKind::Provider, premise, &outcome);
        }

        self.sweep_satisfied();
    }

    /// Record a failed execution attempt as a declarative episode.
    pub fn note_execution_failure(&mut self, service: &AbstractId, host: DeviceId) {
        let Some(svc) = self.catalog.abstract_service(service).cloned() else { return };
        let outcome = Premise::new(service.0.clone(), format!("failed@d{}", host.0));
        for premise in &svc.preconditions {
            self.declarative.store_episode(MemoryKind::Provider, premise, &outcome);
        }
    }

    /// A premise was retracted: protected goals that depended on it
    /// re-open if they belong to the current request, and are dropped
    /// as orphans otherwise.
    fn handle_violation(&mut self, premise: &Premise) {
        let violated: Vec<String> = self
            .protected
            .values()
            .filter(|g| g.targets.contains(premise))
            .map(|g| g.id.clone())
            .collect();
        for id in violated {
            let mut goal = self.protected.remove(&id).expect("listed above");
            if self.current_request.contains(&id) {
                goal.protected = false;
                self.goals.insert(id, goal);
            }
            // Orphans (goals of abandoned requests) simply drop.
        }
    }

    /// Promote every active goal whose targets all hold to protected.
    fn sweep_satisfied(&mut self) {
        let active = self.wm.active(self.cycle);
        let satisfied: Vec<String> = self
            .goals
            .values()
            .filter(|g| !g.targets.is_empty() && g.targets.is_subset(&active))
            .map(|g| g.id.clone())
            .collect();
        for id in satisfied {
            let mut goal = self.goals.remove(&id).expect("listed above");
            goal.protected = true;
            self.protected.insert(id, goal);
        }
    }
}
