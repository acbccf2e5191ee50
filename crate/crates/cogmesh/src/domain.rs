//! Core vocabulary shared by every other module: premises, services,
//! goals, and the service catalog.
//!
//! A *premise* is a symbolic key/value fact ("user-location" = "known").
//! Services are described in two layers: *abstract* services name a
//! capability through pre-/postconditions over premises, while *concrete*
//! services are the deployable realizers of one abstract service, each
//! carrying a QoS vector and living on a host device. An abstract
//! service's conditions must equal the intersection of its realizers'
//! conditions, so that anything the abstract layer promises is honoured
//! by every realizer.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Symbolic key/value fact. Ordering is lexicographic on (key, value),
/// which keeps every premise-keyed structure deterministic.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Premise {
    pub key: String,
    pub value: String,
}

impl Premise {
    /// Build a premise. Keys must be non-empty; values may be empty
    /// (a bare flag).
    pub fn new(key: impl Into<String>, value: impl Into<String>) -> Self {
        let key = key.into();
        assert!(!key.is_empty(), "premise key must be non-empty");
        Self { key, value: value.into() }
    }
}

impl fmt::Debug for Premise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "⟨{},{}⟩", self.key, self.value)
    }
}

impl fmt::Display for Premise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.key, self.value)
    }
}

/// Deterministically ordered set of premises.
pub type PremiseSet = BTreeSet<Premise>;

/// Convenience constructor for premise sets in tests and scenarios.
pub fn premises<I, K, V>(pairs: I) -> PremiseSet
where
    I: IntoIterator<Item = (K, V)>,
    K: Into<String>,
    V: Into<String>,
{
    pairs.into_iter().map(|(k, v)| Premise::new(k, v)).collect()
}

/// Identifier of an abstract service.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AbstractId(pub String);

/// Identifier of a concrete service (a realizer).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConcreteId(pub String);

/// Identifier of a device participating in the network.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Debug)]
pub struct DeviceId(pub u32);

impl fmt::Debug for AbstractId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "as:{}", self.0)
    }
}

impl fmt::Debug for ConcreteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cs:{}", self.0)
    }
}

impl fmt::Display for AbstractId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Display for ConcreteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d{}", self.0)
    }
}

impl From<&str> for AbstractId {
    fn from(s: &str) -> Self {
        AbstractId(s.to_owned())
    }
}

impl From<&str> for ConcreteId {
    fn from(s: &str) -> Self {
        ConcreteId(s.to_owned())
    }
}

/// Whether larger or smaller values of a QoS dimension are preferable.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QosDirection {
    HigherBetter,
    LowerBetter,
}

/// One measured QoS dimension of a concrete service.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct QosValue {
    pub value: f64,
    pub direction: QosDirection,
}

/// Named QoS dimensions (accuracy, latency, ...) of a concrete service.
/// All realizers of one abstract service must expose the same dimension
/// set so their scores are comparable.
#[derive(Clone, PartialEq, Debug, Default, Serialize, Deserialize)]
pub struct QosVector(pub BTreeMap<String, QosValue>);

impl QosVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, dim: &str, value: f64, direction: QosDirection) -> Self {
        self.0.insert(dim.to_owned(), QosValue { value, direction });
        self
    }

    pub fn get(&self, dim: &str) -> Option<&QosValue> {
        self.0.get(dim)
    }

    pub fn dimensions(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    fn same_dimensions(&self, other: &QosVector) -> bool {
        self.0.len() == other.0.len()
            && self.0.keys().zip(other.0.keys()).all(|(a, b)| a == b)
    }
}

/// Deployable service instance offered by one device.
///
/// Inputs and outputs are carried as data for completeness, but every
/// matching decision in the system is made on conditions only.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConcreteService {
    pub id: ConcreteId,
    /// Abstract service this instance realizes.
    pub realizes: AbstractId,
    #[serde(default)]
    pub inputs: Vec<String>,
    #[serde(default)]
    pub outputs: Vec<String>,
    pub preconditions: PremiseSet,
    pub postconditions: PremiseSet,
    pub qos: QosVector,
    /// Free-form execution context facts (battery state, locality, ...).
    #[serde(default)]
    pub context: PremiseSet,
    pub host: DeviceId,
}

/// Capability description used by planning. `add_list` and `del_list`
/// split the postconditions into premises the service asserts and
/// premises it retracts.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AbstractService {
    pub id: AbstractId,
    pub preconditions: PremiseSet,
    pub add_list: PremiseSet,
    #[serde(default)]
    pub del_list: PremiseSet,
    /// Concrete services registered as realizers, in registration order.
    pub realizers: Vec<ConcreteId>,
}

/// A user-level objective: a set of premises that must all hold in
/// working memory, plus the milestones (sub-goals) the scenario spells
/// out on the way there. Achieved goals flip `protected` and from then
/// on resist services that would undo them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Goal {
    pub id: String,
    pub targets: PremiseSet,
    #[serde(default)]
    pub subgoals: Vec<Premise>,
    #[serde(default)]
    pub protected: bool,
    #[serde(default)]
    pub priority: i32,
}

impl Goal {
    pub fn new(id: impl Into<String>, targets: PremiseSet) -> Self {
        Self { id: id.into(), targets, subgoals: Vec::new(), protected: false, priority: 0 }
    }
}

/// Errors raised while assembling a catalog.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum DomainError {
    #[error("duplicate service id `{0}`")]
    DuplicateId(String),
    #[error("abstract service `{0}` references unknown realizer `{1}`")]
    UnknownRealizer(String, String),
    #[error("abstract service `{0}` has no realizers")]
    MissingRealizers(String),
    #[error("conditions of `{id}` are not the intersection of its realizers' ({side})")]
    IntersectionViolation { id: String, side: &'static str },
    #[error("realizers of `{0}` expose mismatched QoS dimension sets")]
    QosDimensionMismatch(String),
}

/// Registry of every abstract and concrete service known to a scenario.
/// The catalog is immutable once a run starts; agents share it read-only.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Catalog {
    abstracts: BTreeMap<AbstractId, AbstractService>,
    concretes: BTreeMap<ConcreteId, ConcreteService>,
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register one concrete service. Ids are unique across the catalog.
    pub fn register_concrete(&mut self, cs: ConcreteService) -> Result<(), DomainError> {
        if self.concretes.contains_key(&cs.id) {
            return Err(DomainError::DuplicateId(cs.id.0.clone()));
        }
        self.concretes.insert(cs.id.clone(), cs);
        Ok(())
    }

    /// Register an abstract service once all of its realizers are known.
    ///
    /// Enforces the abstraction contract: the abstract preconditions must
    /// equal the intersection of the realizers' preconditions, and the
    /// add-list must equal the intersection of their postconditions.
    pub fn register_abstract(&mut self, svc: AbstractService) -> Result<(), DomainError> {
        if self.abstracts.contains_key(&svc.id) {
            return Err(DomainError::DuplicateId(svc.id.0.clone()));
        }
        if svc.realizers.is_empty() {
            return Err(DomainError::MissingRealizers(svc.id.0.clone()));
        }
        let mut realized: Vec<&ConcreteService> = Vec::with_capacity(svc.realizers.len());
        for rid in &svc.realizers {
            match self.concretes.get(rid) {
                Some(cs) => realized.push(cs),
                None => {
                    return Err(DomainError::UnknownRealizer(svc.id.0.clone(), rid.0.clone()))
                }
            }
        }
        let pre = intersection(realized.iter().map(|cs| &cs.preconditions));
        if pre != svc.preconditions {
            return Err(DomainError::IntersectionViolation { id: svc.id.0.clone(), side: "pre" });
        }
        let post = intersection(realized.iter().map(|cs| &cs.postconditions));
        if post != svc.add_list {
            return Err(DomainError::IntersectionViolation { id: svc.id.0.clone(), side: "post" });
        }
        let first_qos = &realized[0].qos;
        if !realized.iter().all(|cs| cs.qos.same_dimensions(first_qos)) {
            return Err(DomainError::QosDimensionMismatch(svc.id.0.clone()));
        }
        self.abstracts.insert(svc.id.clone(), svc);
        Ok(())
    }

    pub fn abstract_service(&self, id: &AbstractId) -> Option<&AbstractService> {
        self.abstracts.get(id)
    }

    pub fn concrete_service(&self, id: &ConcreteId) -> Option<&ConcreteService> {
        self.concretes.get(id)
    }

    /// Abstract services in id order (deterministic).
    pub fn abstracts(&self) -> impl Iterator<Item = &AbstractService> {
        self.abstracts.values()
    }

    /// Concrete services in id order (deterministic).
    pub fn concretes(&self) -> impl Iterator<Item = &ConcreteService> {
        self.concretes.values()
    }

    pub fn abstract_count(&self) -> usize {
        self.abstracts.len()
    }

    pub fn concrete_count(&self) -> usize {
        self.concretes.len()
    }

    /// Realizers of `id`, in registration order.
    pub fn realizers_of(&self, id: &AbstractId) -> impl Iterator<Item = &ConcreteService> {
        self.abstracts
            .get(id)
            .into_iter()
            .flat_map(move |svc| svc.realizers.iter())
            .filter_map(move |rid| self.concretes.get(rid))
    }
}

fn intersection<'a, I>(mut sets: I) -> PremiseSet
where
    I: Iterator<Item = &'a PremiseSet>,
{
    let mut acc = match sets.next() {
        Some(first) => first.clone(),
        None => return PremiseSet::new(),
    };
    for s in sets {
        acc = acc.intersection(s).cloned().collect();
    }
    acc
}

/// Does the active working-memory content satisfy every precondition of
/// the service? (Set inclusion; the empty precondition set is trivially
/// satisfied.)
pub fn matches_preconditions(active: &PremiseSet, svc: &AbstractService) -> bool {
    svc.preconditions.is_subset(active)
}
