//! Stimulus intake and the percept buffer.
//!
//! Raw stimuli (user requests, sensed context, QoS reports, internal
//! signals) are classified by per-class feature detectors into
//! *percepts*: premises annotated with a designer-assigned salience in
//! 1..=10. A percept's activation starts at its salience and decays
//! logarithmically with age,
//!
//! ```text
//! activation = salience / log2(age)      (age > 2 cycles)
//! activation = salience                  (age ≤ 2 cycles)
//! ```
//!
//! so fresh stimuli dominate and stale ones fade. Percepts are dropped
//! from the buffer once activation falls below a tenth of their
//! salience.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Premise;

/// Fraction of salience below which a percept is culled from the buffer.
pub const CULL_FRACTION: f64 = 0.1;

/// Categories of incoming stimuli. The class decides which feature
/// detector fires and, downstream, how volatile the resulting
/// working-memory entry is.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StimulusClass {
    /// A user asked for something; long-lived by design.
    ExternalRequest,
    /// Facts about the user that change often (activity, mood).
    UserContext,
    /// Facts about the environment (location, connectivity).
    PhysicalContext,
    /// Quality reports about services and providers.
    ServiceQos,
    /// Signals the agent raises for itself (service postconditions,
    /// replanning notes).
    InternalSignal,
}

impl fmt::Display for StimulusClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StimulusClass::ExternalRequest => "external-request",
            StimulusClass::UserContext => "user-context",
            StimulusClass::PhysicalContext => "physical-context",
            StimulusClass::ServiceQos => "service-qos",
            StimulusClass::InternalSignal => "internal-signal",
        };
        f.write_str(s)
    }
}

/// An unprocessed observation handed to the perception stage.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Stimulus {
    pub class: StimulusClass,
    pub key: String,
    pub value: String,
    /// Designer-assigned importance, clamped into 1..=10.
    pub salience: u8,
}

impl Stimulus {
    pub fn new(
        class: StimulusClass,
        key: impl Into<String>,
        value: impl Into<String>,
        salience: u8,
    ) -> Self {
        Self { class, key: key.into(), value: value.into(), salience: salience.clamp(1, 10) }
    }
}

/// A classified stimulus: the premise it asserts plus bookkeeping for
/// decay.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Percept {
    pub premise: Premise,
    pub class: StimulusClass,
    pub salience: u8,
    /// Cycle of the most recent stimulation.
    pub appeared: u64,
    pub activation: f64,
}

/// Premise + class + salience of a stimulus perceived this cycle; what
/// the cognitive cycle forwards into working memory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Perceived {
    pub premise: Premise,
    pub class: StimulusClass,
    pub salience: u8,
}

/// Maps a raw stimulus onto the premise it asserts and its effective
/// salience. The default detector passes key/value through unchanged.
pub trait FeatureDetector {
    fn detect(&self, stimulus: &Stimulus) -> (Premise, u8);
}

/// Pass-through detector: premise = ⟨key, value⟩, salience untouched.
pub struct IdentityDetector;

impl FeatureDetector for IdentityDetector {
    fn detect(&self, stimulus: &Stimulus) -> (Premise, u8) {
        (Premise::new(stimulus.key.clone(), stimulus.value.clone()), stimulus.salience)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PerceptionError {
    #[error("no feature detector registered for stimulus class `{0}`")]
    UnknownStimulusClass(String),
}

/// Percept activation after `age` cycles. Ages of two cycles or fewer
/// hold the activation at full salience (log2 of 0 or 1 would blow up or
/// flip the sign).
pub fn decayed_activation(salience: u8, age: u64) -> f64 {
    let sal = f64::from(salience);
    if age <= 2 {
        sal
    } else {
        sal / (age as f64).log2()
    }
}

/// The percept buffer plus its detector registry.
pub struct Perception {
    detectors: BTreeMap<StimulusClass, Box<dyn FeatureDetector + Send>>,
    percepts: BTreeMap<Premise, Percept>,
}

impl Perception {
    /// A perception stage with the identity detector registered for
    /// every standard stimulus class.
    pub fn new() -> Self {
        let mut p = Self { detectors: BTreeMap::new(), percepts: BTreeMap::new() };
        for class in [
            StimulusClass::ExternalRequest,
            StimulusClass::UserContext,
            StimulusClass::PhysicalContext,
            StimulusClass::ServiceQos,
            StimulusClass::InternalSignal,
        ] {
            p.detectors.insert(class, Box::new(IdentityDetector));
        }
        p
    }

    /// Replace the detector for one stimulus class.
    pub fn register_detector(
        &mut self,
        class: StimulusClass,
        detector: Box<dyn FeatureDetector + Send>,
    ) {
        self.detectors.insert(class, detector);
    }

    /// Remove the detector for a class (used to model an agent that
    /// cannot sense that kind of stimulus).
    pub fn unregister_detector(&mut self, class: StimulusClass) {
        self.detectors.remove(&class);
    }

    /// Classify this cycle's stimuli into percepts. A stimulus mapping
    /// onto an already-buffered premise re-stimulates it: the percept's
    /// clock restarts and its activation returns to full salience.
    pub fn perceive(
        &mut self,
        stimuli: &[Stimulus],
        cycle: u64,
    ) -> Result<Vec<Perceived>, PerceptionError> {
        let mut perceived = Vec::with_capacity(stimuli.len());
        for stim in stimuli {
            let detector = self
                .detectors
                .get(&stim.class)
                .ok_or_else(|| PerceptionError::UnknownStimulusClass(stim.class.to_string()))?;
            let (premise, salience) = detector.detect(stim);
            let salience = salience.clamp(1, 10);
            self.percepts.insert(
                premise.clone(),
                Percept {
                    premise: premise.clone(),
                    class: stim.class,
                    salience,
                    appeared: cycle,
                    activation: f64::from(salience),
                },
            );
            perceived.push(Perceived { premise, class: stim.class, salience });
        }
        Ok(perceived)
    }

    /// Apply one cycle of decay and cull percepts whose activation
    /// dropped under a tenth of their salience.
    pub fn tick(&mut self, cycle: u64) {
        self.percepts.retain(|_, p| {
            let age = cycle.saturating_sub(p.appeared);
            p.activation = decayed_activation(p.salience, age);
            p.activation >= CULL_FRACTION * f64::from(p.salience)
        });
    }

    pub fn percepts(&self) -> impl Iterator<Item = &Percept> {
        self.percepts.values()
    }

    pub fn len(&self) -> usize {
        self.percepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.percepts.is_empty()
    }

    pub fn clear(&mut self) {
        self.percepts.clear();
    }
}

impl Default for Perception {
    fn default() -> Self {
        Self::new()
    }
}
