//! Cognitive agents composing services over ad-hoc device meshes.
//!
//! Each device runs an agent built from interchangeable memory
//! systems: percepts decay into [`working_memory`], working memory
//! cues [`declarative`] recall, the combined situation drives a
//! spreading-activation [`attention`] network that picks the next
//! abstract service, and [`procedural`] heuristics bind it to a
//! concrete realizer on some reachable device. Agents cooperate
//! through a coordinator-based overlay, and a deterministic
//! discrete-event simulator exercises whole meshes of them under
//! mobility.
//!
//! The crate is deterministic end to end: given the same scenario and
//! seed, every run produces byte-identical metrics.

pub mod agent;
pub mod attention;
pub mod declarative;
pub mod domain;
pub mod overlay;
pub mod perception;
pub mod procedural;
pub mod sim;
pub mod working_memory;

pub use agent::{ActionPayload, AgentAction, AgentConfig, CognitiveAgent, CycleReport};
pub use attention::{BehaviorNetwork, GlobalParams, Selection};
pub use declarative::DeclarativeMemory;
pub use domain::{
    AbstractId, AbstractService, Catalog, ConcreteId, ConcreteService, DeviceId, Goal, Premise,
    PremiseSet,
};
pub use overlay::{Device, Group, GroupId, Overlay, OverlayError, SessionId, UserId};
pub use perception::{Perception, Stimulus, StimulusClass};
pub use procedural::{BindContext, ProceduralMemory, TuningMode};
pub use sim::{simulate_run, MobilityClass, RunMode, RunOutcome, ScenarioKind, SimConfig};
pub use working_memory::{WmConfig, WorkingMemory};
