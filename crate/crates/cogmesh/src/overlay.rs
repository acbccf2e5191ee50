//! Cooperation overlay: proximity groups, composition-manager (CM)
//! election, primary/backup failover, and partial-plan merging.
//!
//! Devices carry a capability level 0–3; level-0 devices never
//! coordinate. Each group (a connected component of the proximity
//! graph) elects its two best coordinators by the rank R = Pri · Per,
//! where Pri is the level and Per blends completion rate with
//! composition-time history. The active CM holds the group's plan
//! ledger and replicates every update to the passive CM; when the
//! active goes silent for three ticks the passive promotes itself,
//! resumes from its replica, and requests a new passive. Steps marked
//! done in the ledger are never handed out for execution again, which
//! is what makes failover safe mid-composition.
//!
//! A level-3 device may merge plan fragments from several groups into
//! one composite plan, stitching fragments whose postconditions feed
//! other fragments' open preconditions and re-emitting whatever stays
//! open as sub-goal requests.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{AbstractId, ConcreteId, DeviceId, Premise, PremiseSet};

/// Owner of devices and requests.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UserId(pub u32);

/// Group identifier: the smallest member device id, which keeps it
/// stable while that member stays in the component.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupId(pub u32);

/// Session identifier for one user's composition context.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SessionId(pub u32);

/// Processing variant a device runs, by its capability class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentVariant {
    Minimal,
    Lightweight,
    Full,
}

impl AgentVariant {
    pub fn for_level(level: u8) -> Self {
        match level {
            0 | 1 => AgentVariant::Minimal,
            2 => AgentVariant::Lightweight,
            _ => AgentVariant::Full,
        }
    }
}

/// One mesh participant.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Device {
    pub did: DeviceId,
    /// Capability class 0–3; only levels ≥ 1 may coordinate.
    pub level: u8,
    pub hosted: Vec<ConcreteId>,
    pub position: (f64, f64),
    pub owner: UserId,
    pub variant: AgentVariant,
}

impl Device {
    pub fn new(did: DeviceId, level: u8, owner: UserId, position: (f64, f64)) -> Self {
        let level = level.min(3);
        Self { did, level, hosted: Vec::new(), position, owner, variant: AgentVariant::for_level(level) }
    }

    pub fn cm_capable(&self) -> bool {
        self.level >= 1
    }
}

/// Election rank: R = Pri · Per. Level-0 devices rank zero always.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CmRank {
    pub pri: u8,
    pub per: f64,
    pub r: f64,
}

impl CmRank {
    pub fn new(level: u8, per: f64) -> Self {
        let pri = level.min(3);
        Self { pri, per, r: f64::from(pri) * per }
    }
}

/// Success/latency history feeding the Per component of the rank.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct PerfRecord {
    pub attempts: u64,
    pub completions: u64,
    pub total_ct_s: f64,
}

/// Composition times are squashed against this scale when they enter
/// the rank, so Per stays in [0, 1] without cross-device coupling.
const CT_NORM_SCALE_S: f64 = 10.0;

impl PerfRecord {
    /// 0.5·completion-rate + 0.5·(1 − normalized mean composition
    /// time); exactly 0.5 with no history.
    pub fn per(&self) -> f64 {
        if self.attempts == 0 {
            return 0.5;
        }
        let rate = self.completions as f64 / self.attempts as f64;
        let avg_ct = self.total_ct_s / self.attempts as f64;
        let norm_ct = avg_ct / (avg_ct + CT_NORM_SCALE_S);
        0.5 * rate + 0.5 * (1.0 - norm_ct)
    }
}

/// A proximity group and its coordinator pair.
#[derive(Clone, Debug)]
pub struct Group {
    pub gid: GroupId,
    pub members: BTreeSet<DeviceId>,
    pub active_cm: Option<DeviceId>,
    pub passive_cm: Option<DeviceId>,
}

/// One user's composition context across groups.
#[derive(Clone, Debug)]
pub struct Session {
    pub sid: SessionId,
    pub owner: UserId,
    pub groups: BTreeSet<GroupId>,
}

/// One bound step of a composition plan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub service: AbstractId,
    pub binding: ConcreteId,
    pub host: DeviceId,
    pub done: bool,
}

/// The CM's record of a composition in progress. Replicated active →
/// passive on every update and on every heartbeat.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanLedger {
    pub version: u64,
    pub steps: Vec<PlanStep>,
}

impl PlanLedger {
    pub fn step(&self, service: &AbstractId) -> Option<&PlanStep> {
        self.steps.iter().find(|s| &s.service == service)
    }

    pub fn is_done(&self, service: &AbstractId) -> bool {
        self.step(service).map(|s| s.done).unwrap_or(false)
    }

    /// Estimated resident size of the replicated fragments.
    pub fn ledger_bytes(&self, bytes_per_step: usize) -> usize {
        self.steps.len() * bytes_per_step
    }
}

/// Coordination traffic, as delivered by the simulator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum MessageBody {
    Heartbeat { plan_version: u64 },
    PlanUpdate { version: u64 },
    Promote,
    JoinPassive,
    SubgoalRequest { open: PremiseSet },
    PartialPlan { steps: usize },
}

impl MessageBody {
    pub fn kind(&self) -> &'static str {
        match self {
            MessageBody::Heartbeat { .. } => "HEARTBEAT",
            MessageBody::PlanUpdate { .. } => "PLAN_UPDATE",
            MessageBody::Promote => "PROMOTE",
            MessageBody::JoinPassive => "JOIN_PASSIVE",
            MessageBody::SubgoalRequest { .. } => "SUBGOAL_REQUEST",
            MessageBody::PartialPlan { .. } => "PARTIAL_PLAN",
        }
    }
}

/// A coordination message with its provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlayMessage {
    pub sender: DeviceId,
    pub gid: GroupId,
    /// Monotonic per-sender sequence number.
    pub seq: u64,
    pub body: MessageBody,
}

/// A group's contribution to a cross-group composition.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanFragment {
    pub origin: GroupId,
    pub steps: Vec<AbstractId>,
    /// Premises the fragment needs but does not establish itself.
    pub open_preconditions: PremiseSet,
    /// Premises the fragment establishes.
    pub postconditions: PremiseSet,
}

/// Result of merging fragments at a global CM.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositePlan {
    pub steps: Vec<AbstractId>,
    /// Open preconditions nobody satisfied, re-emitted per group.
    pub subgoal_requests: Vec<(GroupId, PremiseSet)>,
}

#[derive(Debug, Error, PartialEq)]
pub enum OverlayError {
    #[error("group {0:?} has no coordination-capable device")]
    NoCmCapableDevice(GroupId),
    #[error("group {0:?} lost all coordination-capable devices")]
    GroupOrphaned(GroupId),
    #[error("device {0:?} cannot merge cross-session plans")]
    CrossSessionDenied(DeviceId),
}

/// Heartbeat silence counters for one group's CM pair.
#[derive(Clone, Copy, Debug, Default)]
struct CmHealth {
    active_missed: u32,
    passive_missed: u32,
}

/// Missed beats before the survivor declares its partner gone.
pub const HEARTBEAT_TIMEOUT_TICKS: u32 = 3;

const MESSAGE_LOG_CAP: usize = 8192;

/// The whole mesh's coordination state, mutated tick by tick.
pub struct Overlay {
    range: f64,
    devices: BTreeMap<DeviceId, Device>,
    alive: BTreeSet<DeviceId>,
    perf: BTreeMap<DeviceId, PerfRecord>,
    groups: BTreeMap<GroupId, Group>,
    health: BTreeMap<GroupId, CmHealth>,
    plans: BTreeMap<GroupId, PlanLedger>,
    /// Passive CMs' plan replicas, keyed by holder.
    replicas: BTreeMap<DeviceId, PlanLedger>,
    sessions: BTreeMap<SessionId, Session>,
    seq: BTreeMap<DeviceId, u64>,
    messages: Vec<OverlayMessage>,
    message_counts: BTreeMap<&'static str, u64>,
    orphaned: Vec<GroupId>,
}

impl Overlay {
    pub fn new(range: f64) -> Self {
        Self {
            range,
            devices: BTreeMap::new(),
            alive: BTreeSet::new(),
            perf: BTreeMap::new(),
            groups: BTreeMap::new(),
            health: BTreeMap::new(),
            plans: BTreeMap::new(),
            replicas: BTreeMap::new(),
            sessions: BTreeMap::new(),
            seq: BTreeMap::new(),
            messages: Vec::new(),
            message_counts: BTreeMap::new(),
            orphaned: Vec::new(),
        }
    }

    pub fn add_device(&mut self, device: Device) {
        self.alive.insert(device.did);
        self.perf.entry(device.did).or_default();
        self.devices.insert(device.did, device);
    }

    pub fn device(&self, did: DeviceId) -> Option<&Device> {
        self.devices.get(&did)
    }

    pub fn devices(&self) -> impl Iterator<Item = &Device> {
        self.devices.values()
    }

    pub fn set_position(&mut self, did: DeviceId, position: (f64, f64)) {
        if let Some(d) = self.devices.get_mut(&did) {
            d.position = position;
        }
    }

    pub fn host_services(&mut self, did: DeviceId, services: Vec<ConcreteId>) {
        if let Some(d) = self.devices.get_mut(&did) {
            d.hosted = services;
        }
    }

    pub fn kill(&mut self, did: DeviceId) {
        self.alive.remove(&did);
    }

    pub fn is_alive(&self, did: DeviceId) -> bool {
        self.alive.contains(&did)
    }

    pub fn record_composition(&mut self, cm: DeviceId, success: bool, ct_s: f64) {
        let rec = self.perf.entry(cm).or_default();
        rec.attempts += 1;
        if success {
            rec.completions += 1;
        }
        rec.total_ct_s += ct_s;
    }

    pub fn rank_of(&self, did: DeviceId) -> Option<CmRank> {
        let device = self.devices.get(&did)?;
        let per = self.perf.get(&did).copied().unwrap_or_default().per();
        Some(CmRank::new(device.level, per))
    }

    pub fn groups(&self) -> impl Iterator<Item = &Group> {
        self.groups.values()
    }

    pub fn group(&self, gid: GroupId) -> Option<&Group> {
        self.groups.get(&gid)
    }

    pub fn group_of(&self, did: DeviceId) -> Option<&Group> {
        self.groups.values().find(|g| g.members.contains(&did))
    }

    pub fn plan(&self, gid: GroupId) -> Option<&PlanLedger> {
        self.plans.get(&gid)
    }

    pub fn replica_of(&self, did: DeviceId) -> Option<&PlanLedger> {
        self.replicas.get(&did)
    }

    pub fn messages(&self) -> &[OverlayMessage] {
        &self.messages
    }

    pub fn message_count(&self, kind: &str) -> u64 {
        self.message_counts.get(kind).copied().unwrap_or(0)
    }

    pub fn orphaned_groups(&self) -> &[GroupId] {
        &self.orphaned
    }

    pub fn open_session(&mut self, sid: SessionId, owner: UserId) {
        self.sessions.insert(sid, Session { sid, owner, groups: BTreeSet::new() });
    }

    pub fn attach_group(&mut self, sid: SessionId, gid: GroupId) {
        if let Some(s) = self.sessions.get_mut(&sid) {
            s.groups.insert(gid);
        }
    }

    pub fn session(&self, sid: SessionId) -> Option<&Session> {
        self.sessions.get(&sid)
    }

    fn send(&mut self, sender: DeviceId, gid: GroupId, body: MessageBody) {
        let seq = self.seq.entry(sender).or_insert(0);
        *seq += 1;
        *self.message_counts.entry(body.kind()).or_insert(0) += 1;
        if self.messages.len() < MESSAGE_LOG_CAP {
            self.messages.push(OverlayMessage { sender, gid, seq: *seq, body });
        }
    }

    /// Alive devices within communication range of each other.
    fn linked(&self, a: DeviceId, b: DeviceId) -> bool {
        let (Some(da), Some(db)) = (self.devices.get(&a), self.devices.get(&b)) else {
            return false;
        };
        let dx = da.position.0 - db.position.0;
        let dy = da.position.1 - db.position.1;
        (dx * dx + dy * dy).sqrt() <= self.range
    }

    /// Recompute groups as connected components of the proximity graph
    /// over alive devices. Existing CM roles persist wherever the
    /// incumbent is still present and capable; everything else gets a
    /// fresh election.
    pub fn form_groups(&mut self) {
        let alive: Vec<DeviceId> = self.alive.iter().copied().collect();
        let mut assigned: BTreeSet<DeviceId> = BTreeSet::new();
        let mut components: Vec<BTreeSet<DeviceId>> = Vec::new();
        for &start in &alive {
            if assigned.contains(&start) {
                continue;
            }
            let mut component = BTreeSet::from([start]);
            let mut frontier = vec![start];
            while let Some(current) = frontier.pop() {
                for &other in &alive {
                    if !component.contains(&other) && self.linked(current, other) {
                        component.insert(other);
                        frontier.push(other);
                    }
                }
            }
            assigned.extend(component.iter().copied());
            components.push(component);
        }

        // Remember previous roles so incumbents keep coordinating.
        let previous_active: BTreeSet<DeviceId> =
            self.groups.values().filter_map(|g| g.active_cm).collect();
        let previous_passive: BTreeSet<DeviceId> =
            self.groups.values().filter_map(|g| g.passive_cm).collect();

        let mut new_groups = BTreeMap::new();
        let mut new_plans = BTreeMap::new();
        let mut new_health = BTreeMap::new();
        for component in components {
            let gid = GroupId(component.iter().next().expect("non-empty component").0);
            let incumbent_active = component
                .iter()
                .copied()
                .find(|d| previous_active.contains(d) && self.capable(*d));
            let incumbent_passive = component
                .iter()
                .copied()
                .find(|d| previous_passive.contains(d) && self.capable(*d) && Some(*d) != incumbent_active);

            let (active, passive) = match incumbent_active {
                Some(a) => {
                    let p = incumbent_passive.or_else(|| self.best_candidate(&component, &[a]));
                    (Some(a), p)
                }
                None => match self.elect(&component) {
                    Ok((a, p)) => (Some(a), p),
                    Err(_) => (None, None),
                },
            };

            // Carry plan state along with the active CM; a freshly
            // elected ex-passive resumes from its replica instead.
            if let Some(a) = active {
                if let Some((_, ledger)) = self
                    .groups
                    .values()
                    .filter(|g| g.active_cm == Some(a))
                    .filter_map(|g| self.plans.get(&g.gid).map(|l| (g.gid, l.clone())))
                    .next()
                {
                    new_plans.insert(gid, ledger);
                } else if let Some(replica) = self.replicas.get(&a) {
                    if !replica.steps.is_empty() {
                        new_plans.insert(gid, replica.clone());
                    }
                }
            }
            let health = self
                .groups
                .values()
                .find(|g| g.active_cm == active && active.is_some())
                .and_then(|g| self.health.get(&g.gid).copied())
                .unwrap_or_default();
            new_health.insert(gid, health);
            new_groups.insert(gid, Group { gid, members: component, active_cm: active, passive_cm: passive });
        }
        self.groups = new_groups;
        self.plans = new_plans;
        self.health = new_health;
    }

    fn capable(&self, did: DeviceId) -> bool {
        self.alive.contains(&did)
            && self.devices.get(&did).map(|d| d.cm_capable()).unwrap_or(false)
    }

    /// Highest-rank capable member not in `exclude`; ties to smaller id.
    fn best_candidate(&self, members: &BTreeSet<DeviceId>, exclude: &[DeviceId]) -> Option<DeviceId> {
        members
            .iter()
            .copied()
            .filter(|d| self.capable(*d) && !exclude.contains(d))
            .max_by(|a, b| {
                let ra = self.rank_of(*a).map(|r| r.r).unwrap_or(0.0);
                let rb = self.rank_of(*b).map(|r| r.r).unwrap_or(0.0);
                ra.partial_cmp(&rb).unwrap_or(std::cmp::Ordering::Equal).then_with(|| b.cmp(a))
            })
    }

    /// Pick the top two coordinators for a member set.
    pub fn elect(
        &self,
        members: &BTreeSet<DeviceId>,
    ) -> Result<(DeviceId, Option<DeviceId>), OverlayError> {
        let gid = GroupId(members.iter().next().map(|d| d.0).unwrap_or(0));
        let active = self.best_candidate(members, &[]).ok_or(OverlayError::NoCmCapableDevice(gid))?;
        let passive = self.best_candidate(members, &[active]);
        Ok((active, passive))
    }

    /// One heartbeat round: exchange beats, replicate plans, detect
    /// silence, promote, and repair. Call once per simulation tick.
    pub fn tick(&mut self) {
        let gids: Vec<GroupId> = self.groups.keys().copied().collect();
        for gid in gids {
            let (active, passive, members) = {
                let g = &self.groups[&gid];
                (g.active_cm, g.passive_cm, g.members.clone())
            };
            let mut health = self.health.get(&gid).copied().unwrap_or_default();

            match active {
                Some(a) if self.alive.contains(&a) => {
                    health.active_missed = 0;
                    let version = self.plans.get(&gid).map(|p| p.version).unwrap_or(0);
                    self.send(a, gid, MessageBody::Heartbeat { plan_version: version });
                    // Replication piggybacks the beat.
                    if let Some(p) = passive {
                        if self.alive.contains(&p) {
                            if let Some(ledger) = self.plans.get(&gid).cloned() {
                                self.replicas.insert(p, ledger);
                            }
                        }
                    }
                }
                _ => health.active_missed += 1,
            }
            match passive {
                Some(p) if self.alive.contains(&p) => {
                    health.passive_missed = 0;
                    let version = self.replicas.get(&p).map(|l| l.version).unwrap_or(0);
                    self.send(p, gid, MessageBody::Heartbeat { plan_version: version });
                }
                _ => health.passive_missed += 1,
            }

            if health.active_missed >= HEARTBEAT_TIMEOUT_TICKS {
                match passive.filter(|p| self.capable(*p)) {
                    Some(p) => {
                        // Binary-star takeover: resume from the replica.
                        self.send(p, gid, MessageBody::Promote);
                        if let Some(replica) = self.replicas.get(&p).cloned() {
                            self.plans.insert(gid, replica);
                        }
                        let group = self.groups.get_mut(&gid).expect("group listed");
                        group.active_cm = Some(p);
                        group.passive_cm = None;
                        health = CmHealth::default();
                        self.send(p, gid, MessageBody::JoinPassive);
                        let replacement = self.best_candidate(&members, &[p]);
                        self.groups.get_mut(&gid).expect("group listed").passive_cm = replacement;
                    }
                    None => {
                        // Both coordinators gone: fresh election.
                        match self.elect(&members) {
                            Ok((a, p)) => {
                                let group = self.groups.get_mut(&gid).expect("group listed");
                                group.active_cm = Some(a);
                                group.passive_cm = p;
                                health = CmHealth::default();
                                self.send(a, gid, MessageBody::JoinPassive);
                            }
                            Err(_) => {
                                let group = self.groups.get_mut(&gid).expect("group listed");
                                group.active_cm = None;
                                group.passive_cm = None;
                                if !self.orphaned.contains(&gid) {
                                    self.orphaned.push(gid);
                                }
                            }
                        }
                    }
                }
            } else if health.passive_missed >= HEARTBEAT_TIMEOUT_TICKS {
                let incumbent = self.groups[&gid].active_cm;
                self.groups.get_mut(&gid).expect("group listed").passive_cm = None;
                if let Some(a) = incumbent.filter(|a| self.alive.contains(a)) {
                    self.send(a, gid, MessageBody::JoinPassive);
                    let replacement =
                        self.best_candidate(&members, &[a]);
                    self.groups.get_mut(&gid).expect("group listed").passive_cm = replacement;
                }
                health.passive_missed = 0;
            }

            self.health.insert(gid, health);
        }
    }

    /// Record a freshly bound plan step on the group's active CM and
    /// replicate it immediately.
    pub fn record_step_bound(
        &mut self,
        gid: GroupId,
        service: AbstractId,
        binding: ConcreteId,
        host: DeviceId,
    ) {
        let ledger = self.plans.entry(gid).or_default();
        if ledger.is_done(&service) {
            return;
        }
        match ledger.steps.iter_mut().find(|s| s.service == service) {
            Some(step) => {
                step.binding = binding;
                step.host = host;
            }
            None => ledger.steps.push(PlanStep { service, binding, host, done: false }),
        }
        ledger.version += 1;
        self.replicate(gid);
    }

    /// Mark a plan step completed. Returns false when the ledger
    /// already had it done (the caller must not execute it again).
    pub fn record_step_done(&mut self, gid: GroupId, service: &AbstractId) -> bool {
        let ledger = self.plans.entry(gid).or_default();
        match ledger.steps.iter_mut().find(|s| &s.service == service) {
            Some(step) if step.done => false,
            Some(step) => {
                step.done = true;
                ledger.version += 1;
                self.replicate(gid);
                true
            }
            None => {
                ledger.steps.push(PlanStep {
                    service: service.clone(),
                    binding: ConcreteId::from(""),
                    host: DeviceId(u32::MAX),
                    done: true,
                });
                ledger.version += 1;
                self.replicate(gid);
                true
            }
        }
    }

    pub fn is_step_done(&self, gid: GroupId, service: &AbstractId) -> bool {
        self.plans.get(&gid).map(|l| l.is_done(service)).unwrap_or(false)
    }

    /// Drop a group's plan ledger together with its coordinators'
    /// replicas, so the next composition starts from a clean slate.
    pub fn clear_plan(&mut self, gid: GroupId) {
        self.plans.remove(&gid);
        if let Some(group) = self.groups.get(&gid) {
            if let Some(active) = group.active_cm {
                self.replicas.remove(&active);
            }
            if let Some(passive) = group.passive_cm {
                self.replicas.remove(&passive);
            }
        }
    }

    fn replicate(&mut self, gid: GroupId) {
        let Some(group) = self.groups.get(&gid) else { return };
        let (Some(active), Some(passive)) = (group.active_cm, group.passive_cm) else { return };
        if !self.alive.contains(&passive) {
            return;
        }
        if let Some(ledger) = self.plans.get(&gid).cloned() {
            let version = ledger.version;
            self.replicas.insert(passive, ledger);
            self.send(active, gid, MessageBody::PlanUpdate { version });
        }
    }

    /// Stitch per-group fragments into one composite plan on a global
    /// (level-3) coordinator. Fragments whose open preconditions are
    /// covered by already-included postconditions are appended in the
    /// first feasible deterministic order; whatever remains open is
    /// re-emitted as sub-goal requests to the originating groups.
    pub fn merge_partial_plans(
        &mut self,
        global_cm: DeviceId,
        partials: &[PlanFragment],
    ) -> Result<CompositePlan, OverlayError> {
        let level = self.devices.get(&global_cm).map(|d| d.level).unwrap_or(0);
        if level < 3 {
            return Err(OverlayError::CrossSessionDenied(global_cm));
        }
        for fragment in partials {
            self.send(
                global_cm,
                fragment.origin,
                MessageBody::PartialPlan { steps: fragment.steps.len() },
            );
        }

        let mut remaining: Vec<&PlanFragment> = partials.iter().collect();
        let mut steps: Vec<AbstractId> = Vec::new();
        let mut established = PremiseSet::new();
        let mut open = PremiseSet::new();

        // Seed with the first fragment, then greedily take the first
        // fragment whose needs are already covered; fall back to the
        // first remaining one so merging always terminates.
        while !remaining.is_empty() {
            let idx = remaining
                .iter()
                .position(|f| f.open_preconditions.is_subset(&established))
                .unwrap_or(0);
            let fragment = remaining.remove(idx);
            for premise in &fragment.open_preconditions {
                if !established.contains(premise) {
                    open.insert(premise.clone());
                }
            }
            for step in &fragment.steps {
                if !steps.contains(step) {
                    steps.push(step.clone());
                }
            }
            established.extend(fragment.postconditions.iter().cloned());
        }

        let mut subgoal_requests = Vec::new();
        let still_open: Vec<Premise> =
            open.iter().filter(|p| !established.contains(*p)).cloned().collect();
        if !still_open.is_empty() {
            for fragment in partials {
                let for_group: PremiseSet = still_open.iter().cloned().collect();
                subgoal_requests.push((fragment.origin, for_group.clone()));
                self.send(global_cm, fragment.origin, MessageBody::SubgoalRequest { open: for_group });
            }
        }
        Ok(CompositePlan { steps, subgoal_requests })
    }

    /// Structural health check: every group with two or more capable
    /// members carries a distinct, capable active/passive pair.
    /// Returns human-readable violations (empty when sound).
    pub fn audit_invariants(&self) -> Vec<String> {
        let mut violations = Vec::new();
        for group in self.groups.values() {
            let capable: Vec<DeviceId> =
                group.members.iter().copied().filter(|d| self.capable(*d)).collect();
            if capable.len() >= 2 {
                match (group.active_cm, group.passive_cm) {
                    (Some(a), Some(p)) => {
                        if a == p {
                            violations.push(format!("group {:?}: active == passive", group.gid));
                        }
                        if !self.capable(a) || !self.capable(p) {
                            violations.push(format!("group {:?}: incapable coordinator", group.gid));
                        }
                    }
                    _ => violations.push(format!(
                        "group {:?}: {} capable members but incomplete CM pair",
                        group.gid,
                        capable.len()
                    )),
                }
            }
            if let (Some(a), Some(p)) = (group.active_cm, group.passive_cm) {
                if a == p {
                    violations.push(format!("group {:?}: duplicate CM role holder", group.gid));
                }
            }
        }
        violations
    }
}
