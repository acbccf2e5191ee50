//! Bounded working memory with base-level activation decay.
//!
//! Working memory holds at most a handful of premise-shaped units (the
//! classic seven). Each unit remembers the cycles at which it was
//! (re-)presented and derives a base-level activation from them:
//!
//! ```text
//! B = iB + Σ_l  t_l ^ (−d)
//! ```
//!
//! where `t_l` is the age of the l-th presentation (floored at one
//! cycle) and `d` is a decay rate chosen by how volatile the premise's
//! source is: fast-changing user context decays quickly, preferences
//! and standing requests slowly. Only units whose activation clears a
//! threshold are *active* — visible to attention and action selection;
//! the rest linger until they decay away or are evicted by fresher
//! content.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{Premise, PremiseSet};
use crate::perception::StimulusClass;

/// How quickly a unit's provenance suggests it goes stale.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VolatilityClass {
    /// Momentary facts about the user; decays fast.
    UserContext,
    /// Environmental facts; medium decay.
    PhysicalContext,
    /// Preferences, standing requests, plan milestones; decays slowly.
    Preference,
}

impl VolatilityClass {
    /// Which volatility class a stimulus class feeds into.
    pub fn for_stimulus(class: StimulusClass) -> Self {
        match class {
            StimulusClass::UserContext => VolatilityClass::UserContext,
            StimulusClass::PhysicalContext | StimulusClass::ServiceQos => {
                VolatilityClass::PhysicalContext
            }
            StimulusClass::ExternalRequest | StimulusClass::InternalSignal => {
                VolatilityClass::Preference
            }
        }
    }
}

/// Tunables for the store. Defaults mirror the architecture's standard
/// settings: capacity 7, activation threshold 0.3, decay rates 0.8 /
/// 0.5 / 0.2 for user context / physical context / preferences.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WmConfig {
    pub capacity: usize,
    /// `t_w`: units at or below this base level are invisible to
    /// attention.
    pub activation_threshold: f64,
    /// Decay exponent per volatility class.
    pub decay: BTreeMap<VolatilityClass, f64>,
    /// Base level every unit starts from (`iB`).
    pub initial_base: f64,
    /// Units whose activation sinks below this are dropped entirely.
    pub cull_floor: f64,
    /// Presentations tracked per unit; older ones contribute next to
    /// nothing and are forgotten.
    pub max_presentations: usize,
}

impl Default for WmConfig {
    fn default() -> Self {
        let mut decay = BTreeMap::new();
        decay.insert(VolatilityClass::UserContext, 0.8);
        decay.insert(VolatilityClass::PhysicalContext, 0.5);
        decay.insert(VolatilityClass::Preference, 0.2);
        Self {
            capacity: 7,
            activation_threshold: 0.3,
            decay,
            initial_base: 0.0,
            cull_floor: 0.05,
            max_presentations: 16,
        }
    }
}

/// One premise held in working memory together with its presentation
/// history.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WmUnit {
    pub premise: Premise,
    pub class: VolatilityClass,
    /// Cycles at which the premise was presented, oldest first.
    pub presentations: Vec<u64>,
    /// Cycle the unit first entered the store.
    pub born: u64,
    pub initial_base: f64,
}

impl WmUnit {
    /// Base-level activation at `cycle` for decay exponent `d`.
    pub fn base_level(&self, cycle: u64, d: f64) -> f64 {
        let sum: f64 = self
            .presentations
            .iter()
            .map(|&at| {
                let age = cycle.saturating_sub(at).max(1) as f64;
                age.powf(-d)
            })
            .sum();
        self.initial_base + sum
    }
}

/// The bounded store itself.
pub struct WorkingMemory {
    config: WmConfig,
    units: BTreeMap<Premise, WmUnit>,
    /// Count of capacity evictions, for instrumentation.
    evictions: u64,
}

impl WorkingMemory {
    pub fn new(config: WmConfig) -> Self {
        Self { config, units: BTreeMap::new(), evictions: 0 }
    }

    pub fn config(&self) -> &WmConfig {
        &self.config
    }

    fn decay_for(&self, class: VolatilityClass) -> f64 {
        self.config.decay.get(&class).copied().unwrap_or(0.5)
    }

    /// Present a premise to the store at `cycle`. A premise already held
    /// gains a presentation (compressing history beyond the tracked
    /// window); a new one claims a slot, evicting the weakest unit if
    /// the store is full.
    pub fn write(&mut self, premise: Premise, class: VolatilityClass, cycle: u64) {
        if let Some(unit) = self.units.get_mut(&premise) {
            unit.presentations.push(cycle);
            let extra = unit.presentations.len().saturating_sub(self.config.max_presentations);
            if extra > 0 {
                unit.presentations.drain(..extra);
            }
            return;
        }
        if self.units.len() >= self.config.capacity {
            self.evict_weakest(cycle);
        }
        self.units.insert(
            premise.clone(),
            WmUnit {
                premise,
                class,
                presentations: vec![cycle],
                born: cycle,
                initial_base: self.config.initial_base,
            },
        );
    }

    /// Lay a retrieved association into spare capacity. Unlike [`write`],
    /// recall never boosts a unit that is already held and never evicts:
    /// retrieval makes stored knowledge available, it does not re-observe
    /// the fact, so it must not out-compete what the agent is actually
    /// perceiving and doing right now.
    ///
    /// [`write`]: WorkingMemory::write
    pub fn recall(&mut self, premise: Premise, class: VolatilityClass, cycle: u64) {
        if self.units.contains_key(&premise) || self.units.len() >= self.config.capacity {
            return;
        }
        self.units.insert(
            premise.clone(),
            WmUnit {
                premise,
                class,
                presentations: vec![cycle],
                born: cycle,
                initial_base: self.config.initial_base,
            },
        );
    }

    /// Drop the unit with the lowest base level. Ties fall to the oldest
    /// unit, then to the lexicographically smallest premise, so eviction
    /// is reproducible.
    fn evict_weakest(&mut self, cycle: u64) {
        let victim = self
            .units
            .values()
            .map(|u| {
                let b = u.base_level(cycle, self.decay_for(u.class));
                (u.premise.clone(), b, u.born)
            })
            .min_by(|(pa, ba, born_a), (pb, bb, born_b)| {
                ba.partial_cmp(bb)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(born_a.cmp(born_b))
                    .then(pa.cmp(pb))
            })
            .map(|(p, _, _)| p);
        if let Some(p) = victim {
            self.units.remove(&p);
            self.evictions += 1;
        }
    }

    /// Base level of a held premise at `cycle`, if present.
    pub fn base_level(&self, premise: &Premise, cycle: u64) -> Option<f64> {
        self.units.get(premise).map(|u| u.base_level(cycle, self.decay_for(u.class)))
    }

    /// Premises whose base level clears the activation threshold — the
    /// only working-memory content the rest of the cycle sees.
    pub fn active(&self, cycle: u64) -> PremiseSet {
        self.units
            .values()
            .filter(|u| u.base_level(cycle, self.decay_for(u.class)) > self.config.activation_threshold)
            .map(|u| u.premise.clone())
            .collect()
    }

    /// Drop units that have decayed below the cull floor ("faded away").
    pub fn tick(&mut self, cycle: u64) {
        let floor = self.config.cull_floor;
        let decay: Vec<(Premise, f64)> = self
            .units
            .values()
            .map(|u| (u.premise.clone(), u.base_level(cycle, self.decay_for(u.class))))
            .collect();
        for (premise, b) in decay {
            if b < floor {
                self.units.remove(&premise);
            }
        }
    }

    /// Retract a premise (a service's del-list effect or an episode
    /// reset). Returns whether it was present.
    pub fn remove(&mut self, premise: &Premise) -> bool {
        self.units.remove(premise).is_some()
    }

    pub fn contains(&self, premise: &Premise) -> bool {
        self.units.contains_key(premise)
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn units(&self) -> impl Iterator<Item = &WmUnit> {
        self.units.values()
    }

    pub fn evictions(&self) -> u64 {
        self.evictions
    }

    pub fn clear(&mut self) {
        self.units.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn wm() -> WorkingMemory {
        WorkingMemory::new(WmConfig::default())
    }

    fn p(k: &str) -> Premise {
        Premise::new(k, "1")
    }

    #[test]
    fn single_presentation_base_level() {
        // One presentation four cycles ago at d = 0.5: B = 4^-0.5 = 0.5.
        let mut m = wm();
        m.write(p("loc"), VolatilityClass::PhysicalContext, 0);
        assert_relative_eq!(m.base_level(&p("loc"), 4).unwrap(), 0.5);
    }

    #[test]
    fn presentations_accumulate() {
        // Presentations at cycles 1 and 4, read at cycle 5, d = 0.5:
        // B = 4^-0.5 + 1^-0.5 = 0.5 + 1.0.
        let mut m = wm();
        m.write(p("loc"), VolatilityClass::PhysicalContext, 1);
        m.write(p("loc"), VolatilityClass::PhysicalContext, 4);
        assert_relative_eq!(m.base_level(&p("loc"), 5).unwrap(), 1.5);
    }

    #[test]
    fn age_is_floored_at_one_cycle() {
        let mut m = wm();
        m.write(p("x"), VolatilityClass::UserContext, 10);
        // Read in the same cycle: age clamps to 1, so B = 1^-d = 1.
        assert_relative_eq!(m.base_level(&p("x"), 10).unwrap(), 1.0);
    }

    #[test]
    fn activation_threshold_gates_visibility() {
        let mut m = wm();
        m.write(p("fresh"), VolatilityClass::UserContext, 90);
        m.write(p("stale"), VolatilityClass::UserContext, 0);
        // At cycle 94 and d = 0.8: fresh is 4 cycles old (4^-0.8 ≈ 0.33,
        // above the 0.3 threshold), stale is 94 old (≈ 0.026, below).
        let active = m.active(94);
        assert!(active.contains(&p("fresh")));
        assert!(!active.contains(&p("stale")));
    }

    #[test]
    fn capacity_evicts_the_weakest_unit() {
        let mut m = wm();
        // Seven old low-activation units…
        for i in 0..7 {
            m.write(p(&format!("old-{i}")), VolatilityClass::UserContext, i);
        }
        assert_eq!(m.len(), 7);
        // …then a fresh one forces out the weakest (oldest presentation).
        m.write(p("new"), VolatilityClass::UserContext, 50);
        assert_eq!(m.len(), 7);
        assert!(m.contains(&p("new")));
        assert!(!m.contains(&p("old-0")));
        assert_eq!(m.evictions(), 1);
    }

    #[test]
    fn recall_fills_spare_slots_without_evicting() {
        let mut m = wm();
        for i in 0..6 {
            m.write(p(&format!("seen-{i}")), VolatilityClass::UserContext, i);
        }
        m.recall(p("remembered"), VolatilityClass::Preference, 10);
        assert!(m.contains(&p("remembered")));
        // The store is now full; further recalls bounce instead of evicting.
        m.recall(p("crowded-out"), VolatilityClass::Preference, 11);
        assert!(!m.contains(&p("crowded-out")));
        assert_eq!(m.len(), 7);
        assert_eq!(m.evictions(), 0);
    }

    #[test]
    fn recall_never_boosts_a_held_unit() {
        let mut m = wm();
        m.write(p("fact"), VolatilityClass::Preference, 0);
        let single = m.base_level(&p("fact"), 20).unwrap();
        m.recall(p("fact"), VolatilityClass::Preference, 19);
        assert_eq!(m.base_level(&p("fact"), 20).unwrap(), single);
    }

    #[test]
    fn eviction_ties_break_by_age_then_premise() {
        let mut cfg = WmConfig::default();
        cfg.capacity = 2;
        let mut m = WorkingMemory::new(cfg);
        // Same class, same presentation cycle → identical B. `a` and `b`
        // also share a birth cycle, so the lexicographic rule decides.
        m.write(p("b"), VolatilityClass::Preference, 0);
        m.write(p("a"), VolatilityClass::Preference, 0);
        m.write(p("c"), VolatilityClass::Preference, 5);
        assert!(m.contains(&p("b")));
        assert!(m.contains(&p("c")));
        assert!(!m.contains(&p("a")));
    }

    #[test]
    fn restimulation_rescues_a_unit_from_eviction() {
        let mut cfg = WmConfig::default();
        cfg.capacity = 2;
        let mut m = WorkingMemory::new(cfg);
        m.write(p("keep"), VolatilityClass::UserContext, 0);
        m.write(p("drop"), VolatilityClass::UserContext, 1);
        m.write(p("keep"), VolatilityClass::UserContext, 9);
        m.write(p("new"), VolatilityClass::UserContext, 10);
        assert!(m.contains(&p("keep")));
        assert!(m.contains(&p("new")));
        assert!(!m.contains(&p("drop")));
    }

    #[test]
    fn retraction_removes_the_premise() {
        let mut m = wm();
        m.write(p("door"), VolatilityClass::PhysicalContext, 0);
        assert!(m.remove(&p("door")));
        assert!(!m.remove(&p("door")));
        assert!(!m.contains(&p("door")));
    }

    #[test]
    fn long_dead_units_are_culled() {
        let mut m = wm();
        m.write(p("x"), VolatilityClass::UserContext, 0);
        // 0.05 floor at d = 0.8: age^-0.8 < 0.05 needs age > ~42.
        m.tick(40);
        assert!(m.contains(&p("x")));
        m.tick(60);
        assert!(!m.contains(&p("x")));
    }

    proptest! {
        /// The store never exceeds its capacity, whatever the write
        /// pattern.
        #[test]
        fn capacity_is_never_exceeded(
            writes in proptest::collection::vec((0u8..20, 0u64..200), 1..100)
        ) {
            let mut m = wm();
            let mut cycle = 0;
            for (key, advance) in writes {
                cycle += advance;
                m.write(p(&format!("k{key}")), VolatilityClass::PhysicalContext, cycle);
                prop_assert!(m.len() <= 7);
            }
        }

        /// Between presentations the base level strictly decreases.
        #[test]
        fn base_level_decreases_between_presentations(
            gap in 1u64..400,
            d_class in prop_oneof![
                Just(VolatilityClass::UserContext),
                Just(VolatilityClass::PhysicalContext),
                Just(VolatilityClass::Preference),
            ]
        ) {
            let mut m = wm();
            m.write(p("x"), d_class, 0);
            let early = m.base_level(&p("x"), 1 + gap / 2).unwrap();
            let late = m.base_level(&p("x"), 2 + gap).unwrap();
            prop_assert!(late < early);
        }
    }
}
