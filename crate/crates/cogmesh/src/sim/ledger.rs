//! Model-level memory accounting. Every agent data structure registers
//! its footprint here in fixed byte units, which makes memory-usage
//! comparisons deterministic and implementation-independent. The MU
//! metric is the average over *participating* providers of each
//! provider's peak ledger value.

use std::collections::{BTreeMap, BTreeSet};

use crate::domain::DeviceId;

/// Charge units, in bytes of model memory.
pub const WM_UNIT_BYTES: i64 = 64;
pub const PERCEPT_BYTES: i64 = 48;
pub const BN_ENTRY_BYTES: i64 = 16;
pub const PLAN_STEP_BYTES: i64 = 48;
pub const SDM_PAGE_BYTES: i64 = 256;
pub const EXEC_BUFFER_BYTES: i64 = 128;

/// Resting footprint of a provider that merely perceives its own
/// context: two percepts plus two working-memory units.
pub const PROVIDER_RESTING_BYTES: i64 = 2 * PERCEPT_BYTES + 2 * WM_UNIT_BYTES;

/// Per-device byte accounting with peak tracking.
#[derive(Clone, Debug, Default)]
pub struct MemoryLedger {
    components: BTreeMap<DeviceId, BTreeMap<&'static str, i64>>,
    current: BTreeMap<DeviceId, i64>,
    peak: BTreeMap<DeviceId, i64>,
    participants: BTreeSet<DeviceId>,
}

impl MemoryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add raw bytes to a device's account.
    pub fn charge(&mut self, device: DeviceId, bytes: i64) {
        let cur = self.current.entry(device).or_insert(0);
        *cur += bytes;
        let peak = self.peak.entry(device).or_insert(0);
        if *cur > *peak {
            *peak = *cur;
        }
    }

    /// Release raw bytes from a device's account.
    pub fn release(&mut self, device: DeviceId, bytes: i64) {
        self.charge(device, -bytes);
    }

    /// Set one named component of a device's footprint to an absolute
    /// size (working-memory units, plan replicas, ...). Idempotent;
    /// only the delta moves the account.
    pub fn set_component(&mut self, device: DeviceId, key: &'static str, bytes: i64) {
        let slot = self.components.entry(device).or_default().entry(key).or_insert(0);
        let delta = bytes - *slot;
        *slot = bytes;
        self.charge(device, delta);
    }

    /// Providers that took part in the composition; only they count
    /// toward the MU average.
    pub fn mark_participant(&mut self, device: DeviceId) {
        self.participants.insert(device);
    }

    pub fn is_participant(&self, device: DeviceId) -> bool {
        self.participants.contains(&device)
    }

    pub fn participant_count(&self) -> usize {
        self.participants.len()
    }

    pub fn current_of(&self, device: DeviceId) -> i64 {
        self.current.get(&device).copied().unwrap_or(0)
    }

    pub fn peak_of(&self, device: DeviceId) -> i64 {
        self.peak.get(&device).copied().unwrap_or(0)
    }

    /// Average peak bytes over participating providers; 0 when nobody
    /// participated.
    pub fn peak_mu(&self) -> f64 {
        if self.participants.is_empty() {
            return 0.0;
        }
        let sum: i64 = self.participants.iter().map(|d| self.peak_of(*d)).sum();
        sum as f64 / self.participants.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn empty_ledger_reports_zero() {
        assert_relative_eq!(MemoryLedger::new().peak_mu(), 0.0);
    }

    #[test]
    fn peak_survives_releases() {
        let mut l = MemoryLedger::new();
        let d = DeviceId(1);
        l.mark_participant(d);
        l.charge(d, 10);
        l.release(d, 10);
        l.charge(d, 5);
        assert_eq!(l.peak_of(d), 10);
        assert_eq!(l.current_of(d), 5);
        assert_relative_eq!(l.peak_mu(), 10.0);
    }

    #[test]
    fn mu_averages_participant_peaks() {
        let mut l = MemoryLedger::new();
        l.mark_participant(DeviceId(1));
        l.mark_participant(DeviceId(2));
        l.charge(DeviceId(1), 10);
        l.charge(DeviceId(2), 30);
        // A bystander's bytes must not shift the average.
        l.charge(DeviceId(9), 1000);
        assert_relative_eq!(l.peak_mu(), 20.0);
    }

    #[test]
    fn components_move_by_delta() {
        let mut l = MemoryLedger::new();
        let d = DeviceId(4);
        l.set_component(d, "wm", 3 * WM_UNIT_BYTES);
        l.set_component(d, "wm", WM_UNIT_BYTES);
        l.set_component(d, "plan", 2 * PLAN_STEP_BYTES);
        assert_eq!(l.current_of(d), WM_UNIT_BYTES + 2 * PLAN_STEP_BYTES);
        assert_eq!(l.peak_of(d), 3 * WM_UNIT_BYTES);
    }
}
