//! Deterministic discrete-event simulation of agent meshes: random-walk
//! mobility, range-based connectivity, coordinator overlays, seeded
//! scenario generation, failure injection, and the run metrics
//! (planning/execution failure rates, composition time, memory usage).
//!
//! `simulate_run(&config, seed)` is a pure function: the same config
//! and seed always produce byte-identical metrics rows.

mod engine;
mod ledger;
mod metrics;
mod mobility;
mod scenario;

pub use engine::{simulate_run, RequestTrace, RunOutcome};
pub use ledger::{
    MemoryLedger, BN_ENTRY_BYTES, EXEC_BUFFER_BYTES, PERCEPT_BYTES, PLAN_STEP_BYTES,
    PROVIDER_RESTING_BYTES, SDM_PAGE_BYTES, WM_UNIT_BYTES,
};
pub use metrics::{aggregate, csv_header, CellKey, CellSummary, MetricsError, RunRecord};
pub use mobility::{MobilityClass, Walker, EPOCH_SECONDS};
pub use scenario::{shopping_errand, Scenario, CTX_POOL};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::GlobalParams;

/// Experiment style: one user composing repeatedly, or two users who
/// switch goals mid-composition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    Flexibility,
    Adaptability,
}

impl RunMode {
    pub fn label(self) -> &'static str {
        match self {
            RunMode::Flexibility => "flexibility",
            RunMode::Adaptability => "adaptability",
        }
    }
}

/// Which world the run builds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// Seeded random catalog and placement at the configured scale.
    Generated,
    /// The six-service shopping errand on a single static device.
    ShoppingErrand,
}

/// Simulation tick length; two cognitive cycles fit in one tick.
pub const TICK_SECONDS: f64 = 0.1;

/// Everything one run needs. Defaults mirror the standard experiment
/// table; any field may be overridden for desk-scale studies.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub user_count: u32,
    /// Number of provider devices.
    pub service_density: u32,
    /// Services every composition must chain.
    pub composition_length: u32,
    pub mobility: MobilityClass,
    pub abstract_services: u32,
    pub concrete_per_abstract: u32,
    pub range_m: f64,
    pub matchmaking_delay_s: f64,
    /// Preconditions per service are drawn uniformly from this range.
    pub conds_min: u32,
    pub conds_max: u32,
    pub arena: (f64, f64),
    pub mode: RunMode,
    pub params: GlobalParams,
    /// Label for the attention configuration, echoed into the CSV.
    pub config_id: String,
    /// Sequential composition requests each user issues.
    pub requests_per_user: u32,
    /// Hard per-request bound on cognitive cycles.
    pub cycle_budget: u64,
    /// Abort a request after this many cycles without a successful
    /// bind or execution (no executable composite in sight).
    pub stall_cycle_limit: u64,
    /// Consecutive ticks a requester may sit in a group without an
    /// alive coordinator before its request fails.
    pub session_grace_ticks: u32,
    /// Kill the requester's active coordinator mid-composition.
    pub kill_active_cm: bool,
    pub scenario_kind: ScenarioKind,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            user_count: 1,
            service_density: 20,
            composition_length: 5,
            mobility: MobilityClass::Slow,
            abstract_services: 10,
            concrete_per_abstract: 4,
            range_m: 250.0,
            matchmaking_delay_s: 0.2,
            conds_min: 1,
            conds_max: 4,
            arena: (1000.0, 1000.0),
            mode: RunMode::Flexibility,
            params: GlobalParams::c1(),
            config_id: "C1".to_owned(),
            requests_per_user: 6,
            cycle_budget: 2000,
            stall_cycle_limit: 400,
            session_grace_ticks: 30,
            kill_active_cm: false,
            scenario_kind: ScenarioKind::Generated,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("invalid simulation config: {0}")]
    Invalid(String),
}

impl SimConfig {
    /// Adaptability compositions branch to an alternative tail after
    /// the switch point; the catalog must have room for one entry hook
    /// per post-switch leg plus the relays between them.
    pub fn branch_tail_len(&self) -> u32 {
        2 * (self.composition_length - self.composition_length.div_ceil(2))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        if !(1..=2).contains(&self.user_count) {
            return fail(format!("user_count must be 1 or 2, got {}", self.user_count));
        }
        if self.composition_length < 2 {
            return fail("composition_length must be at least 2".into());
        }
        if self.scenario_kind == ScenarioKind::Generated {
            if self.service_density == 0 {
                return fail("service_density must be positive".into());
            }
            if self.abstract_services < self.composition_length {
                return fail(format!(
                    "{} abstract services cannot host a {}-service chain",
                    self.abstract_services, self.composition_length
                ));
            }
            if self.mode == RunMode::Adaptability
                && self.abstract_services < self.composition_length + self.branch_tail_len()
            {
                return fail(format!(
                    "goal switching needs {} abstract services, got {}",
                    self.composition_length + self.branch_tail_len(),
                    self.abstract_services
                ));
            }
            if self.concrete_per_abstract == 0 {
                return fail("concrete_per_abstract must be positive".into());
            }
        }
        if self.mode == RunMode::Adaptability && self.user_count != 2 {
            return fail("adaptability runs model two users".into());
        }
        if !(self.range_m > 0.0) || !(self.arena.0 > 0.0) || !(self.arena.1 > 0.0) {
            return fail("range and arena dimensions must be positive".into());
        }
        if self.matchmaking_delay_s < 0.0 {
            return fail("matchmaking_delay_s must be non-negative".into());
        }
        if self.conds_min < 1 || self.conds_min > self.conds_max {
            return fail(format!(
                "precondition range {}..={} is not within 1..=4",
                self.conds_min, self.conds_max
            ));
        }
        if self.conds_max as usize > 1 + CTX_POOL {
            return fail(format!(
                "conds_max {} exceeds 1 chain premise + {} context premises",
                self.conds_max, CTX_POOL
            ));
        }
        if self.cycle_budget == 0 || self.stall_cycle_limit == 0 {
            return fail("cycle budgets must be positive".into());
        }
        self.params.validate().map_err(ConfigError::Invalid)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        assert_eq!(SimConfig::default().validate(), Ok(()));
    }

    #[test]
    fn adaptability_needs_two_users_and_branch_room() {
        let mut c = SimConfig { mode: RunMode::Adaptability, ..SimConfig::default() };
        assert!(c.validate().is_err());
        c.user_count = 2;
        assert_eq!(c.validate(), Ok(()));
        // A ten-service chain plus its alternative tail does not fit
        // into ten abstract services.
        c.composition_length = 10;
        assert!(c.validate().is_err());
    }

    #[test]
    fn degenerate_scales_are_rejected() {
        let bad = |f: fn(&mut SimConfig)| {
            let mut c = SimConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.user_count = 3));
        assert!(bad(|c| c.service_density = 0));
        assert!(bad(|c| c.composition_length = 1));
        assert!(bad(|c| c.composition_length = 11));
        assert!(bad(|c| c.conds_min = 0));
        assert!(bad(|c| c.conds_max = 9));
        assert!(bad(|c| c.range_m = 0.0));
        assert!(bad(|c| c.cycle_budget = 0));
    }
}
