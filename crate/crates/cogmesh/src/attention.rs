//! Selective attention: the behavior network over abstract services.
//!
//! Every abstract service is a competence node. Each cycle the node
//! collects energy from the situation and the motivation state:
//!
//! ```text
//! AW — from active working-memory premises matching preconditions (φ)
//! AG — from goal premises matching the add-list (γ)
//! TG — drained by protected goals the service would undo (δ, negative)
//! BW — prior activation of services whose preconditions this service
//!      can provide, flowing backward along successor links
//! FW — prior activation of services that provide this service's
//!      preconditions, flowing forward (scaled by φ/γ)
//! ```
//!
//! Every premise contribution is normalized by the premise's fan-in
//! and by the size of the condition list it sits in, so popular
//! premises and long condition lists don't dominate. Totals are
//! floored at zero, and the whole vector is periodically rescaled so
//! its mean sits at π — keeping total energy constant while θ decides
//! how bold a winner has to be. Selection takes the highest-activation
//! *executable* service above θ, resets it, and (classically) lowers θ
//! by 10% whenever nobody qualifies, so a stalemated network
//! eventually acts.
//!
//! Activations persist across cycles, replans, and goal switches; the
//! network's history is its memory of where the action gradient was
//! heading.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{matches_preconditions, AbstractId, AbstractService, Catalog, Premise, PremiseSet};

/// The five tunables ⟨θ, π, φ, γ, δ⟩.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalParams {
    /// θ: activation a service must reach to be selectable.
    pub activation_threshold: f64,
    /// π: mean activation the network is rescaled to.
    pub mean_activation: f64,
    /// φ: energy injected per active working-memory premise.
    pub wm_energy: f64,
    /// γ: energy injected per goal premise.
    pub goal_energy: f64,
    /// δ: energy drained per protected-goal premise a service deletes.
    pub protected_goal_energy: f64,
}

impl GlobalParams {
    /// Neutral default configuration ⟨30, 20, 20, 20, 20⟩.
    pub fn c1() -> Self {
        Self::from_tuple([30.0, 20.0, 20.0, 20.0, 20.0])
    }

    /// Adaptive configuration ⟨22, 27, 42, 23, 18⟩ (situation-heavy:
    /// φ > π > γ, with γ:δ ≈ 4:3).
    pub fn c2() -> Self {
        Self::from_tuple([22.0, 27.0, 42.0, 23.0, 18.0])
    }

    /// Build from the conventional ⟨θ, π, φ, γ, δ⟩ ordering.
    pub fn from_tuple(t: [f64; 5]) -> Self {
        Self {
            activation_threshold: t[0],
            mean_activation: t[1],
            wm_energy: t[2],
            goal_energy: t[3],
            protected_goal_energy: t[4],
        }
    }

    pub fn as_tuple(&self) -> [f64; 5] {
        [
            self.activation_threshold,
            self.mean_activation,
            self.wm_energy,
            self.goal_energy,
            self.protected_goal_energy,
        ]
    }

    /// θ must be positive; energies must be non-negative.
    pub fn validate(&self) -> Result<(), String> {
        if !(self.activation_threshold > 0.0) {
            return Err("activation threshold must be positive".into());
        }
        let t = self.as_tuple();
        if t.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err("parameters must be finite and non-negative".into());
        }
        Ok(())
    }
}

/// Per-premise fan-in counts over the catalog: how many services
/// require (`m`), assert (`x`), or retract (`u`) each premise.
#[derive(Clone, Debug, Default)]
pub struct FanInCounts {
    pub m: BTreeMap<Premise, usize>,
    pub x: BTreeMap<Premise, usize>,
    pub u: BTreeMap<Premise, usize>,
}

impl FanInCounts {
    pub fn derive(catalog: &Catalog) -> Self {
        let mut counts = Self::default();
        for svc in catalog.abstracts() {
            for p in &svc.preconditions {
                *counts.m.entry(p.clone()).or_insert(0) += 1;
            }
            for p in &svc.add_list {
                *counts.x.entry(p.clone()).or_insert(0) += 1;
            }
            for p in &svc.del_list {
                *counts.u.entry(p.clone()).or_insert(0) += 1;
            }
        }
        counts
    }
}

/// Successor and conflicter relations between services, derived from
/// their condition lists. `successor(a → b)` holds when `a` adds a
/// premise `b` requires; `predecessor` is its mirror; `conflicter(a →
/// b)` holds when `b` deletes a premise `a` requires.
#[derive(Clone, Debug, Default)]
pub struct NetworkLinks {
    successor: Vec<(AbstractId, AbstractId)>,
    conflicter: Vec<(AbstractId, AbstractId)>,
}

impl NetworkLinks {
    pub fn derive(catalog: &Catalog) -> Self {
        let mut successor = Vec::new();
        let mut conflicter = Vec::new();
        for a in catalog.abstracts() {
            for b in catalog.abstracts() {
                if a.id != b.id && a.add_list.intersection(&b.preconditions).next().is_some() {
                    successor.push((a.id.clone(), b.id.clone()));
                }
                if b.del_list.intersection(&a.preconditions).next().is_some() {
                    conflicter.push((a.id.clone(), b.id.clone()));
                }
            }
        }
        Self { successor, conflicter }
    }

    pub fn successors_of<'a>(&'a self, id: &'a AbstractId) -> impl Iterator<Item = &'a AbstractId> {
        self.successor.iter().filter(move |(a, _)| a == id).map(|(_, b)| b)
    }

    pub fn predecessors_of<'a>(
        &'a self,
        id: &'a AbstractId,
    ) -> impl Iterator<Item = &'a AbstractId> {
        self.successor.iter().filter(move |(_, b)| b == id).map(|(a, _)| a)
    }

    pub fn conflicters_of<'a>(&'a self, id: &'a AbstractId) -> impl Iterator<Item = &'a AbstractId> {
        self.conflicter.iter().filter(move |(a, _)| a == id).map(|(_, b)| b)
    }

    pub fn successor_count(&self) -> usize {
        self.successor.len()
    }
}

/// Per-service term decomposition of one spreading step, kept for
/// trace export.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationBreakdown {
    pub service: AbstractId,
    pub aw: f64,
    pub ag: f64,
    pub tg: f64,
    pub bw: f64,
    pub fw: f64,
    /// Post-floor total this cycle (before any normalization).
    pub total: f64,
}

/// Outcome of one selection attempt.
#[derive(Clone, Debug, PartialEq)]
pub enum Selection {
    Selected { id: AbstractId, activation: f64 },
    /// Nobody qualified; θ was lowered for the next cycle.
    None { threshold: f64 },
}

impl Selection {
    pub fn selected(&self) -> Option<&AbstractId> {
        match self {
            Selection::Selected { id, .. } => Some(id),
            Selection::None { .. } => None,
        }
    }
}

/// The network over one catalog.
pub struct BehaviorNetwork {
    services: Vec<AbstractService>,
    index: BTreeMap<AbstractId, usize>,
    fan_in: FanInCounts,
    /// premise → services requiring it (successor sources for BW).
    requirers: BTreeMap<Premise, Vec<usize>>,
    /// premise → services asserting it (predecessor sources for FW).
    adders: BTreeMap<Premise, Vec<usize>>,
    activations: Vec<f64>,
    params: GlobalParams,
    /// Current θ; decays on stalemate, restored on selection.
    threshold: f64,
}

impl BehaviorNetwork {
    pub fn new(catalog: &Catalog, params: GlobalParams) -> Self {
        let services: Vec<AbstractService> = catalog.abstracts().cloned().collect();
        let index =
            services.iter().enumerate().map(|(i, s)| (s.id.clone(), i)).collect::<BTreeMap<_, _>>();
        let fan_in = FanInCounts::derive(catalog);
        let mut requirers: BTreeMap<Premise, Vec<usize>> = BTreeMap::new();
        let mut adders: BTreeMap<Premise, Vec<usize>> = BTreeMap::new();
        for (i, svc) in services.iter().enumerate() {
            for p in &svc.preconditions {
                requirers.entry(p.clone()).or_default().push(i);
            }
            for p in &svc.add_list {
                adders.entry(p.clone()).or_default().push(i);
            }
        }
        let activations = vec![0.0; services.len()];
        let threshold = params.activation_threshold;
        Self { services, index, fan_in, requirers, adders, activations, params, threshold }
    }

    pub fn params(&self) -> &GlobalParams {
        &self.params
    }

    /// Swap in a new parameter set (the tuning op). θ restarts at the
    /// new initial value; activations are untouched.
    pub fn set_params(&mut self, params: GlobalParams) {
        self.threshold = params.activation_threshold;
        self.params = params;
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn service_count(&self) -> usize {
        self.services.len()
    }

    pub fn service_ids(&self) -> impl Iterator<Item = &AbstractId> {
        self.services.iter().map(|s| &s.id)
    }

    pub fn activation_of(&self, id: &AbstractId) -> Option<f64> {
        self.index.get(id).map(|&i| self.activations[i])
    }

    /// The stored activation map (persisted between cycles).
    pub fn activations(&self) -> BTreeMap<AbstractId, f64> {
        self.services
            .iter()
            .zip(&self.activations)
            .map(|(s, &a)| (s.id.clone(), a))
            .collect()
    }

    /// Force one service's stored activation (tests only).
    pub fn set_activation(&mut self, id: &AbstractId, value: f64) {
        if let Some(&i) = self.index.get(id) {
            self.activations[i] = value;
        }
    }

    /// One spreading step. Reads the stored (prior) activations,
    /// computes each service's five terms, floors totals at zero, and
    /// stores the result. Returns the per-service decomposition.
    pub fn spread(
        &mut self,
        wm_active: &PremiseSet,
        goals: &PremiseSet,
        protected: &PremiseSet,
    ) -> Vec<ActivationBreakdown> {
        let prev = self.activations.clone();
        let p = &self.params;
        let mut out = Vec::with_capacity(self.services.len());
        for svc in &self.services {
            let pre_n = svc.preconditions.len();
            let add_n = svc.add_list.len();
            let del_n = svc.del_list.len();

            let mut aw = 0.0;
            if pre_n > 0 {
                for j in svc.preconditions.intersection(wm_active) {
                    if let Some(&m) = self.fan_in.m.get(j) {
                        if m > 0 {
                            aw += p.wm_energy / m as f64 / pre_n as f64;
                        }
                    }
                }
            }

            let mut ag = 0.0;
            if add_n > 0 {
                for j in svc.add_list.intersection(goals) {
                    if let Some(&x) = self.fan_in.x.get(j) {
                        if x > 0 {
                            ag += p.goal_energy / x as f64 / add_n as f64;
                        }
                    }
                }
            }

            let mut tg = 0.0;
            if del_n > 0 {
                for j in svc.del_list.intersection(protected) {
                    if let Some(&u) = self.fan_in.u.get(j) {
                        if u > 0 {
                            tg += p.protected_goal_energy / u as f64 / del_n as f64;
                        }
                    }
                }
            }

            // Backward spread: services that *require* a premise this
            // one adds push their prior activation back to it.
            let mut bw = 0.0;
            if add_n > 0 {
                for j in &svc.add_list {
                    let x = self.fan_in.x.get(j).copied().unwrap_or(0);
                    if x == 0 {
                        continue;
                    }
                    if let Some(succ) = self.requirers.get(j) {
                        let energy: f64 = succ.iter().map(|&s| prev[s]).sum();
                        bw += energy / x as f64 / add_n as f64;
                    }
                }
            }

            // Forward spread: services that *provide* a premise this
            // one requires push their prior activation forward, scaled
            // by φ/γ. Weights mirror the backward term.
            let mut fw = 0.0;
            if add_n > 0 && p.goal_energy > 0.0 {
                let scale = p.wm_energy / p.goal_energy;
                for j in &svc.preconditions {
                    let x = self.fan_in.x.get(j).copied().unwrap_or(0);
                    if x == 0 {
                        continue;
                    }
                    if let Some(pred) = self.adders.get(j) {
                        let energy: f64 = pred.iter().map(|&s| prev[s]).sum();
                        fw += scale * energy / x as f64 / add_n as f64;
                    }
                }
            }

            let total = (aw + ag - tg + bw + fw).max(0.0);
            out.push(ActivationBreakdown { service: svc.id.clone(), aw, ag, tg, bw, fw, total });
        }
        for (i, row) in out.iter().enumerate() {
            self.activations[i] = row.total;
        }
        out
    }

    /// Rescale the stored activations so their mean equals π. All-zero
    /// vectors stay put.
    pub fn normalize(&mut self) {
        normalize_activations(&mut self.activations, self.params.mean_activation);
    }

    /// Services whose preconditions are satisfied by the active
    /// working-memory premises.
    pub fn executable_set(&self, wm_active: &PremiseSet) -> Vec<AbstractId> {
        self.services
            .iter()
            .filter(|svc| matches_preconditions(wm_active, svc))
            .map(|svc| svc.id.clone())
            .collect()
    }

    /// Pick the highest-activation executable service at or above θ.
    /// Selection resets the winner's activation to zero and restores θ
    /// to its initial value; a stalemate lowers θ by 10% instead.
    /// Activation ties break toward the smaller service id.
    pub fn select(&mut self, executable: &[AbstractId]) -> Selection {
        let mut best: Option<(f64, usize)> = None;
        for id in executable {
            let Some(&i) = self.index.get(id) else { continue };
            let act = self.activations[i];
            if act < self.threshold {
                continue;
            }
            let better = match best {
                None => true,
                Some((b_act, b_i)) => {
                    act > b_act || (act == b_act && self.services[i].id < self.services[b_i].id)
                }
            };
            if better {
                best = Some((act, i));
            }
        }
        match best {
            Some((activation, i)) => {
                self.activations[i] = 0.0;
                self.threshold = self.params.activation_threshold;
                Selection::Selected { id: self.services[i].id.clone(), activation }
            }
            None => {
                self.threshold *= 0.9;
                Selection::None { threshold: self.threshold }
            }
        }
    }
}

/// Rescale so the mean equals `mean`; a no-op for all-zero input.
pub fn normalize_activations(activations: &mut [f64], mean: f64) {
    if activations.is_empty() {
        return;
    }
    let current: f64 = activations.iter().sum::<f64>() / activations.len() as f64;
    if current <= 0.0 {
        return;
    }
    let scale = mean / current;
    for a in activations.iter_mut() {
        *a *= scale;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{premises, ConcreteService, DeviceId, QosDirection, QosVector};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Catalog builder: each entry is (id, preconds, adds, dels).
    fn catalog(entries: &[(&str, Vec<(&str, &str)>, Vec<(&str, &str)>, Vec<(&str, &str)>)]) -> Catalog {
        let mut c = Catalog::new();
        for (id, pre, add, del) in entries {
            let cid = format!("{id}-1");
            c.register_concrete(ConcreteService {
                id: cid.as_str().into(),
                realizes: (*id).into(),
                inputs: vec![],
                outputs: vec![],
                preconditions: premises(pre.clone()),
                postconditions: premises(add.clone()),
                qos: QosVector::new().with("latency", 0.2, QosDirection::LowerBetter),
                context: PremiseSet::new(),
                host: DeviceId(0),
            })
            .unwrap();
            c.register_abstract(AbstractService {
                id: (*id).into(),
                preconditions: premises(pre.clone()),
                add_list: premises(add.clone()),
                del_list: premises(del.clone()),
                realizers: vec![cid.as_str().into()],
            })
            .unwrap();
        }
        c
    }

    #[test]
    fn wm_term_single_premise_full_energy() {
        let cat = catalog(&[("s", vec![("p", "1")], vec![("q", "1")], vec![])]);
        let mut net = BehaviorNetwork::new(&cat, GlobalParams::c1());
        let rows = net.spread(&premises([("p", "1")]), &PremiseSet::new(), &PremiseSet::new());
        // φ=20, M_p=1, one precondition → AW = 20.
        assert_relative_eq!(rows[0].aw, 20.0);
        assert_relative_eq!(rows[0].total, 20.0);
    }

    #[test]
    fn wm_term_splits_across_preconditions() {
        let cat = catalog(&[("s", vec![("p", "1"), ("r", "1")], vec![("q", "1")], vec![])]);
        let mut net = BehaviorNetwork::new(&cat, GlobalParams::c1());
        let rows = net.spread(&premises([("p", "1")]), &PremiseSet::new(), &PremiseSet::new());
        // Two preconditions, one satisfied: AW = 20 · 1 · (1/2) = 10.
        assert_relative_eq!(rows[0].aw, 10.0);
    }

    #[test]
    fn goal_term_rewards_providers() {
        let cat = catalog(&[
            ("s1", vec![], vec![("g", "1")], vec![]),
            ("s2", vec![], vec![("g", "1"), ("other", "1")], vec![]),
        ]);
        let mut net = BehaviorNetwork::new(&cat, GlobalParams::c1());
        let rows = net.spread(&PremiseSet::new(), &premises([("g", "1")]), &PremiseSet::new());
        // X_g = 2. s1: γ·(1/2)·(1/1) = 10. s2: γ·(1/2)·(1/2) = 5.
        assert_relative_eq!(rows[0].ag, 10.0);
        assert_relative_eq!(rows[1].ag, 5.0);
    }

    #[test]
    fn protected_goals_drain_conflicting_services() {
        let cat = catalog(&[("s", vec![], vec![("q", "1")], vec![("safe", "1")])]);
        let mut net = BehaviorNetwork::new(&cat, GlobalParams::c1());
        let rows = net.spread(&PremiseSet::new(), &PremiseSet::new(), &premises([("safe", "1")]));
        // δ=20, U=1, one del entry → TG = 20, total floored at 0.
        assert_relative_eq!(rows[0].tg, 20.0);
        assert_relative_eq!(rows[0].total, 0.0);
    }

    #[test]
    fn quiet_network_stays_at_zero() {
        let cat = catalog(&[
            ("a", vec![("p", "1")], vec![("q", "1")], vec![]),
            ("b", vec![("q", "1")], vec![("r", "1")], vec![]),
        ]);
        let mut net = BehaviorNetwork::new(&cat, GlobalParams::c1());
        let rows = net.spread(&PremiseSet::new(), &PremiseSet::new(), &PremiseSet::new());
        assert!(rows.iter().all(|r| r.total == 0.0));
    }

    #[test]
    fn backward_spread_pulls_energy_from_requirers() {
        // provider adds p; consumer requires p.
        let cat = catalog(&[
            ("consumer", vec![("p", "1")], vec![("done", "1")], vec![]),
            ("provider", vec![], vec![("p", "1")], vec![]),
        ]);
        let mut net = BehaviorNetwork::new(&cat, GlobalParams::c1());
        net.set_activation(&"consumer".into(), 12.0);
        let rows = net.spread(&PremiseSet::new(), &PremiseSet::new(), &PremiseSet::new());
        let provider = rows.iter().find(|r| r.service == "provider".into()).unwrap();
        // X_p = 1, provider has one add entry → BW = 12.
        assert_relative_eq!(provider.bw, 12.0);
    }

    #[test]
    fn forward_spread_pushes_energy_to_enabled_services() {
        let cat = catalog(&[
            ("consumer", vec![("p", "1")], vec![("done", "1")], vec![]),
            ("provider", vec![], vec![("p", "1")], vec![]),
        ]);
        let mut net = BehaviorNetwork::new(&cat, GlobalParams::c1());
        net.set_activation(&"provider".into(), 10.0);
        let rows = net.spread(&PremiseSet::new(), &PremiseSet::new(), &PremiseSet::new());
        let consumer = rows.iter().find(|r| r.service == "consumer".into()).unwrap();
        // φ/γ = 1, X_p = 1, consumer's add list has one entry → FW = 10.
        assert_relative_eq!(consumer.fw, 10.0);
    }

    #[test]
    fn normalization_examples() {
        let mut v = vec![10.0, 30.0];
        normalize_activations(&mut v, 20.0);
        assert_eq!(v, vec![10.0, 30.0]); // mean already 20

        let mut v = vec![10.0, 10.0];
        normalize_activations(&mut v, 20.0);
        assert_eq!(v, vec![20.0, 20.0]);

        let mut v = vec![0.0, 0.0];
        normalize_activations(&mut v, 20.0);
        assert_eq!(v, vec![0.0, 0.0]);
    }

    #[test]
    fn selection_requires_threshold() {
        let cat = catalog(&[("s", vec![("p", "1")], vec![("q", "1")], vec![])]);
        let mut net = BehaviorNetwork::new(&cat, GlobalParams::c1());
        net.set_activation(&"s".into(), 35.0);
        let sel = net.select(&["s".into()]);
        assert_eq!(sel, Selection::Selected { id: "s".into(), activation: 35.0 });
        // Selection resets the winner's stored activation.
        assert_relative_eq!(net.activation_of(&"s".into()).unwrap(), 0.0);
    }

    #[test]
    fn stalemate_decays_threshold_until_someone_qualifies() {
        let cat = catalog(&[("s", vec![("p", "1")], vec![("q", "1")], vec![])]);
        let mut net = BehaviorNetwork::new(&cat, GlobalParams::c1());
        net.set_activation(&"s".into(), 25.0); // below θ=30
        let sel = net.select(&["s".into()]);
        assert_eq!(sel, Selection::None { threshold: 27.0 });
        let sel = net.select(&["s".into()]);
        assert_eq!(sel, Selection::None { threshold: 24.3 });
        // 24.3 ≤ 25 → next attempt selects, and θ snaps back to 30.
        let sel = net.select(&["s".into()]);
        assert!(sel.selected().is_some());
        assert_relative_eq!(net.threshold(), 30.0);
    }

    #[test]
    fn ties_break_toward_the_smaller_id() {
        let cat = catalog(&[
            ("alpha", vec![], vec![("q", "1")], vec![]),
            ("beta", vec![], vec![("q2", "1")], vec![]),
        ]);
        let mut net = BehaviorNetwork::new(&cat, GlobalParams::c1());
        net.set_activation(&"alpha".into(), 40.0);
        net.set_activation(&"beta".into(), 40.0);
        let sel = net.select(&["beta".into(), "alpha".into()]);
        assert_eq!(sel.selected(), Some(&"alpha".into()));
    }

    #[test]
    fn unexecutable_services_are_never_selected() {
        let cat = catalog(&[("s", vec![("missing", "1")], vec![("q", "1")], vec![])]);
        let mut net = BehaviorNetwork::new(&cat, GlobalParams::c1());
        net.set_activation(&"s".into(), 99.0);
        let executable = net.executable_set(&PremiseSet::new());
        assert!(executable.is_empty());
        assert!(net.select(&executable).selected().is_none());
    }

    #[test]
    fn links_mirror_condition_structure() {
        let cat = catalog(&[
            ("a", vec![], vec![("p", "1")], vec![]),
            ("b", vec![("p", "1")], vec![("q", "1")], vec![("r", "1")]),
            ("c", vec![("r", "1")], vec![("s", "1")], vec![]),
        ]);
        let links = NetworkLinks::derive(&cat);
        let a: AbstractId = "a".into();
        let b: AbstractId = "b".into();
        let c: AbstractId = "c".into();
        assert_eq!(links.successors_of(&a).collect::<Vec<_>>(), vec![&b]);
        assert_eq!(links.predecessors_of(&b).collect::<Vec<_>>(), vec![&a]);
        // b deletes r, which c requires → conflicter(c → b).
        assert_eq!(links.conflicters_of(&c).collect::<Vec<_>>(), vec![&b]);
    }

    #[test]
    fn goal_links_never_reduce_activation() {
        let cat = catalog(&[
            ("s1", vec![("w", "1")], vec![("g", "1")], vec![]),
            ("s2", vec![], vec![("h", "1")], vec![]),
        ]);
        let wm = premises([("w", "1")]);
        let without = {
            let mut net = BehaviorNetwork::new(&cat, GlobalParams::c1());
            net.spread(&wm, &PremiseSet::new(), &PremiseSet::new())[0].total
        };
        let with = {
            let mut net = BehaviorNetwork::new(&cat, GlobalParams::c1());
            net.spread(&wm, &premises([("g", "1")]), &PremiseSet::new())[0].total
        };
        assert!(with >= without);
    }

    /// Three-service chain with only the final postcondition as goal:
    /// repeated cycles must fire the services in dependency order.
    #[test]
    fn chains_emerge_in_dependency_order() {
        let cat = catalog(&[
            ("t1-start", vec![("c0", "1")], vec![("c1", "1")], vec![]),
            ("t2-middle", vec![("c1", "1")], vec![("c2", "1")], vec![]),
            ("t3-finish", vec![("c2", "1")], vec![("c3", "1")], vec![]),
        ]);
        let mut net = BehaviorNetwork::new(&cat, GlobalParams::c1());
        let goals = premises([("c3", "1")]);
        let mut wm = premises([("c0", "1")]);
        let mut fired = Vec::new();
        for _ in 0..100 {
            net.spread(&wm, &goals, &PremiseSet::new());
            net.normalize();
            let executable = net.executable_set(&wm);
            if let Selection::Selected { id, .. } = net.select(&executable) {
                // Simulate execution: postconditions enter WM.
                let svc = cat.abstract_service(&id).unwrap();
                for p in &svc.add_list {
                    wm.insert(p.clone());
                }
                fired.push(id.0.clone());
                if fired.len() == 3 {
                    break;
                }
            }
        }
        assert_eq!(fired, ["t1-start", "t2-middle", "t3-finish"]);
    }

    proptest! {
        /// Scaling φ, γ, δ, θ and the prior activations by the same
        /// positive factor never changes which service gets selected.
        #[test]
        fn selection_is_scale_invariant(
            scale in 0.25f64..8.0,
            acts in proptest::collection::vec(0.0f64..50.0, 3),
            wm_bits in 0u8..8,
        ) {
            let cat = catalog(&[
                ("a", vec![("p", "1")], vec![("q", "1")], vec![]),
                ("b", vec![("q0", "1")], vec![("r", "1")], vec![("p", "1")]),
                ("c", vec![], vec![("p", "1")], vec![]),
            ]);
            let mut wm = PremiseSet::new();
            if wm_bits & 1 != 0 { wm.insert(Premise::new("p", "1")); }
            if wm_bits & 2 != 0 { wm.insert(Premise::new("q0", "1")); }
            let goals = premises([("r", "1")]);
            let protected = premises([("p", "1")]);

            let run = |factor: f64, acts: &[f64]| {
                let base = GlobalParams::c1();
                let params = GlobalParams {
                    activation_threshold: base.activation_threshold * factor,
                    mean_activation: base.mean_activation,
                    wm_energy: base.wm_energy * factor,
                    goal_energy: base.goal_energy * factor,
                    protected_goal_energy: base.protected_goal_energy * factor,
                };
                let mut net = BehaviorNetwork::new(&cat, params);
                for (id, act) in ["a", "b", "c"].iter().zip(acts) {
                    net.set_activation(&(*id).into(), act * factor);
                }
                net.spread(&wm, &goals, &protected);
                let executable = net.executable_set(&wm);
                net.select(&executable).selected().cloned()
            };

            prop_assert_eq!(run(1.0, &acts), run(scale, &acts));
        }

        /// Spread totals are never negative, whatever the inputs.
        #[test]
        fn totals_are_floored_at_zero(
            acts in proptest::collection::vec(0.0f64..100.0, 2),
            delta in 0.0f64..200.0,
        ) {
            let cat = catalog(&[
                ("x", vec![("a", "1")], vec![("b", "1")], vec![("safe", "1")]),
                ("y", vec![("b", "1")], vec![("c", "1")], vec![("safe", "1")]),
            ]);
            let params = GlobalParams {
                protected_goal_energy: delta,
                ..GlobalParams::c1()
            };
            let mut net = BehaviorNetwork::new(&cat, params);
            net.set_activation(&"x".into(), acts[0]);
            net.set_activation(&"y".into(), acts[1]);
            let rows = net.spread(
                &premises([("a", "1")]),
                &premises([("c", "1")]),
                &premises([("safe", "1")]),
            );
            for row in rows {
                prop_assert!(row.total >= 0.0);
            }
        }
    }
}
