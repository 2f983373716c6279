//! Adaptive fault correction: the per-slot patcher table, risk scores,
//! threshold-driven measure choice and the measures themselves.

use std::fmt;
use std::sync::{Arc, Mutex, MutexGuard};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::injector::TrojanProfile;
use crate::pipeline::{PipelineState, RollbackInfo};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    Cfi,
    Ccc,
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FaultKind::Cfi => "cfi",
            FaultKind::Ccc => "ccc",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thresholds {
    pub cfi_th_reld: u64,
    pub cfi_th_relc: u64,
    pub ccc_th_reld: u64,
    pub ccc_th_relc: u64,
}

impl Thresholds {
    pub fn fidelity() -> Self {
        Thresholds {
            cfi_th_reld: 256,
            cfi_th_relc: 512,
            ccc_th_reld: 256,
            ccc_th_relc: 512,
        }
    }

    /// Small enough that a desk-scale campaign reaches every measure.
    pub fn scaled() -> Self {
        Thresholds {
            cfi_th_reld: 8,
            cfi_th_relc: 16,
            ccc_th_reld: 8,
            ccc_th_relc: 16,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cfi_th_reld >= self.cfi_th_relc {
            return Err(Error::config(
                "thresholds",
                "cfi reload threshold must be below relocate",
            ));
        }
        if self.ccc_th_reld >= self.ccc_th_relc {
            return Err(Error::config(
                "thresholds",
                "ccc reload threshold must be below relocate",
            ));
        }
        Ok(())
    }

    pub fn for_kind(&self, kind: FaultKind) -> (u64, u64) {
        match kind {
            FaultKind::Cfi => (self.cfi_th_reld, self.cfi_th_relc),
            FaultKind::Ccc => (self.ccc_th_reld, self.ccc_th_relc),
        }
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds::fidelity()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub w_cfi: f64,
    pub w_ccc: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            w_cfi: 0.5,
            w_ccc: 0.5,
        }
    }
}

impl Weights {
    pub fn validate(&self) -> Result<()> {
        let ok = |w: f64| w.is_finite() && w >= 0.0;
        if !ok(self.w_cfi) || !ok(self.w_ccc) {
            return Err(Error::config(
                "weights",
                "weights must be finite and non-negative",
            ));
        }
        if (self.w_cfi + self.w_ccc - 1.0).abs() > 1e-9 {
            return Err(Error::config("weights", "weights must sum to 1"));
        }
        Ok(())
    }
}

/// Simulated time costs, in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Latencies {
    pub cycle_ns: u64,
    pub reload_ns: u64,
    pub relocate_ns: u64,
}

impl Default for Latencies {
    fn default() -> Self {
        Latencies {
            cycle_ns: 10,
            reload_ns: 150_000,
            relocate_ns: 256_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    RepeatLoop,
    ReloadAndRepeat,
    RelocateAndRepeat,
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MeasureKind::RepeatLoop => "repeat",
            MeasureKind::ReloadAndRepeat => "reload",
            MeasureKind::RelocateAndRepeat => "relocate",
        })
    }
}

impl MeasureKind {
    /// Latency of the reconfiguration part alone: one clock for a repeat.
    pub fn cost_ns(self, lat: &Latencies) -> u64 {
        match self {
            MeasureKind::RepeatLoop => lat.cycle_ns,
            MeasureKind::ReloadAndRepeat => lat.reload_ns,
            MeasureKind::RelocateAndRepeat => lat.relocate_ns,
        }
    }
}

/// Strict comparisons against both thresholds; a count sitting exactly on
/// the relocate threshold reloads.
pub fn choose_measure(count: u64, th: &Thresholds, kind: FaultKind) -> MeasureKind {
    let (reld, relc) = th.for_kind(kind);
    if count > relc {
        MeasureKind::RelocateAndRepeat
    } else if count > reld {
        MeasureKind::ReloadAndRepeat
    } else {
        MeasureKind::RepeatLoop
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot_id: usize,
    pub nr: u64,
    pub ncfi: u64,
    pub nccc: u64,
    pub risk: f64,
    pub configured: bool,
    #[serde(default)]
    pub trojan_profile: Option<TrojanProfile>,
}

impl SlotRecord {
    pub fn new(slot_id: usize) -> Self {
        SlotRecord {
            slot_id,
            nr: 0,
            ncfi: 0,
            nccc: 0,
            risk: 0.0,
            configured: false,
            trojan_profile: None,
        }
    }

    pub fn count(&self, kind: FaultKind) -> u64 {
        match kind {
            FaultKind::Cfi => self.ncfi,
            FaultKind::Ccc => self.nccc,
        }
    }

    fn rate(&self, kind: FaultKind) -> Option<f64> {
        (self.nr > 0).then(|| self.count(kind) as f64 / self.nr as f64)
    }
}

/// General weighted risk over any number of fault kinds.
///
/// `rates[k][s]` is slot `s`'s per-run rate of kind `k` (`None` for a slot
/// that never ran). Each term is normalised by the largest rate of its kind;
/// a zero maximum contributes 0.
pub fn composite_risk(rates: &[Vec<Option<f64>>], weights: &[f64], slot: usize) -> Option<f64> {
    assert_eq!(rates.len(), weights.len());
    let mut r = 0.0;
    for (kind_rates, &w) in rates.iter().zip(weights) {
        let own = kind_rates[slot]?;
        let max = kind_rates.iter().flatten().copied().fold(0.0, f64::max);
        if max > 0.0 {
            r += w * own / max;
        }
    }
    Some(r)
}

/// The bit-patcher table: one record per reconfiguration slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatcherTable {
    pub slots: Vec<SlotRecord>,
    pub weights: Weights,
}

pub type SharedPatcher = Arc<Mutex<PatcherTable>>;

impl PatcherTable {
    pub fn new(m: usize, weights: Weights) -> Self {
        PatcherTable {
            slots: (0..m).map(SlotRecord::new).collect(),
            weights,
        }
    }

    pub fn shared(self) -> SharedPatcher {
        Arc::new(Mutex::new(self))
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slot(&self, i: usize) -> Result<&SlotRecord> {
        self.slots.get(i).ok_or(Error::UnknownSlot(i))
    }

    fn slot_mut(&mut self, i: usize) -> Result<&mut SlotRecord> {
        self.slots.get_mut(i).ok_or(Error::UnknownSlot(i))
    }

    pub fn record_fault(&mut self, slot: usize, kind: FaultKind) -> Result<()> {
        let s = self.slot_mut(slot)?;
        match kind {
            FaultKind::Cfi => s.ncfi += 1,
            FaultKind::Ccc => s.nccc += 1,
        }
        self.recompute_risks();
        Ok(())
    }

    pub fn record_run(&mut self, slot: usize) -> Result<()> {
        self.slot_mut(slot)?.nr += 1;
        self.recompute_risks();
        Ok(())
    }

    /// Risk of slot `i`; `None` if it never ran.
    pub fn risk(&self, i: usize, w_cfi: f64, w_ccc: f64) -> Result<Option<f64>> {
        self.slot(i)?;
        let rates = [FaultKind::Cfi, FaultKind::Ccc]
            .map(|k| self.slots.iter().map(|s| s.rate(k)).collect::<Vec<_>>());
        Ok(composite_risk(&rates, &[w_cfi, w_ccc], i))
    }

    /// Every slot's stored risk depends on the table maxima, so all are refreshed.
    pub fn recompute_risks(&mut self) {
        let Weights { w_cfi, w_ccc } = self.weights;
        for i in 0..self.slots.len() {
            let r = self
                .risk(i, w_cfi, w_ccc)
                .expect("index in range")
                .unwrap_or(0.0);
            self.slots[i].risk = r;
        }
    }

    fn rank_key(&self, s: &SlotRecord) -> (bool, f64, std::cmp::Reverse<u64>, usize) {
        let Weights { w_cfi, w_ccc } = self.weights;
        let r = self.risk(s.slot_id, w_cfi, w_ccc).expect("index in range");
        (
            r.is_none(),
            r.unwrap_or(0.0),
            std::cmp::Reverse(s.nr),
            s.slot_id,
        )
    }

    fn select_among(&self, exclude: Option<usize>) -> Result<usize> {
        self.slots
            .iter()
            .filter(|s| Some(s.slot_id) != exclude)
            .map(|s| (self.rank_key(s), s.slot_id))
            .min_by(|a, b| a.0.partial_cmp(&b.0).expect("risks are finite"))
            .map(|(_, id)| id)
            .ok_or(Error::NoSelectableSlot)
    }

    /// Minimum risk; ties go to more runs, then the lower id. Slots that
    /// never ran rank last.
    pub fn select_slot(&self) -> Result<usize> {
        self.select_among(None)
    }

    pub fn select_slot_excluding(&self, current: usize) -> Result<usize> {
        self.select_among(Some(current))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub thresholds: Thresholds,
    pub latencies: Latencies,
    /// Corrections allowed per transform before it is given up as uncorrected.
    pub max_corrections: usize,
}

impl Default for Policy {
    fn default() -> Self {
        Policy {
            thresholds: Thresholds::default(),
            latencies: Latencies::default(),
            max_corrections: 1024,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppliedMeasure {
    pub trigger: FaultKind,
    pub kind: MeasureKind,
    pub cycle: u64,
    pub cost_ns: u64,
    pub from_slot: usize,
    pub to_slot: usize,
    /// A relocate with no other slot available, carried out as a reload.
    pub degraded: bool,
    /// Present for control-flow rollbacks; a counter fault re-runs everything.
    pub rollback: Option<RollbackInfo>,
}

/// The policy agent bound to one pipeline, holding the shared table.
#[derive(Debug, Clone)]
pub struct Corrector {
    table: SharedPatcher,
    policy: Policy,
    active_slot: usize,
}

impl Corrector {
    pub fn new(table: SharedPatcher, policy: Policy, slot: usize) -> Result<Self> {
        policy.thresholds.validate()?;
        {
            let mut t = table.lock().expect("patcher lock");
            t.slot_mut(slot)?.configured = true;
        }
        Ok(Corrector {
            table,
            policy,
            active_slot: slot,
        })
    }

    pub fn table(&self) -> MutexGuard<'_, PatcherTable> {
        self.table.lock().expect("patcher lock")
    }

    pub fn shared_table(&self) -> SharedPatcher {
        Arc::clone(&self.table)
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn active_slot(&self) -> usize {
        self.active_slot
    }

    pub fn trojan(&self) -> Option<TrojanProfile> {
        self.table().slots[self.active_slot].trojan_profile
    }

    /// Count a new transform on the bound slot.
    pub fn begin_run(&mut self) -> Result<()> {
        self.table().record_run(self.active_slot)
    }

    /// Record a detected fault, pick a measure and apply it to `state`.
    pub fn handle(
        &mut self,
        kind: FaultKind,
        cycle: u64,
        state: &mut PipelineState,
    ) -> Result<AppliedMeasure> {
        let count = {
            let mut t = self.table();
            t.record_fault(self.active_slot, kind)?;
            t.slot(self.active_slot)?.count(kind)
        };
        let m = choose_measure(count, &self.policy.thresholds, kind);
        state.flag_fault(cycle);
        self.apply_measure(m, kind, state)
    }

    pub fn apply_measure(
        &mut self,
        m: MeasureKind,
        trigger: FaultKind,
        state: &mut PipelineState,
    ) -> Result<AppliedMeasure> {
        let cycle = state.pending_fault().ok_or(Error::RollbackWithoutFault)?;
        let from = self.active_slot;
        let mut applied = m;
        let mut degraded = false;
        if m == MeasureKind::RelocateAndRepeat {
            let target = {
                let mut t = self.table();
                let to = t.select_slot_excluding(from).ok();
                if let Some(to) = to {
                    t.slots[from].configured = false;
                    t.slots[to].configured = true;
                    t.slots[to].nr += 1;
                    t.recompute_risks();
                }
                to
            };
            match target {
                Some(to) => self.active_slot = to,
                None => {
                    applied = MeasureKind::ReloadAndRepeat;
                    degraded = true;
                }
            }
        }
        let lat = &self.policy.latencies;
        let mut cost_ns = applied.cost_ns(lat);
        let rollback = match trigger {
            FaultKind::Cfi => Some(state.rollback()?),
            FaultKind::Ccc => {
                // the repeated loop is the whole transform
                state.restart()?;
                let rerun = (state.total_butterflies() as u64 + 4) * lat.cycle_ns;
                cost_ns = match applied {
                    MeasureKind::RepeatLoop => rerun,
                    _ => cost_ns + rerun,
                };
                None
            }
        };
        Ok(AppliedMeasure {
            trigger,
            kind: applied,
            cycle,
            cost_ns,
            from_slot: from,
            to_slot: self.active_slot,
            degraded,
            rollback,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[(u64, u64, u64)]) -> PatcherTable {
        let mut t = PatcherTable::new(rows.len(), Weights::default());
        for (s, &(nr, ncfi, nccc)) in t.slots.iter_mut().zip(rows) {
            s.nr = nr;
            s.ncfi = ncfi;
            s.nccc = nccc;
        }
        t.recompute_risks();
        t
    }

    #[test]
    fn record_fault_counts() {
        let mut t = PatcherTable::new(2, Weights::default());
        t.record_run(0).unwrap();
        t.record_fault(0, FaultKind::Cfi).unwrap();
        assert_eq!((t.slots[0].ncfi, t.slots[0].nccc), (1, 0));
        t.record_fault(0, FaultKind::Cfi).unwrap();
        t.record_fault(0, FaultKind::Ccc).unwrap();
        t.record_fault(0, FaultKind::Ccc).unwrap();
        assert_eq!((t.slots[0].ncfi, t.slots[0].nccc), (2, 2));
        assert_eq!(t.slots[0].risk, 1.0);
        assert_eq!(
            t.record_fault(2, FaultKind::Cfi),
            Err(Error::UnknownSlot(2))
        );
    }

    #[test]
    fn risk_examples() {
        let t = table(&[(10, 2, 0), (5, 2, 1)]);
        assert!((t.slots[0].risk - 0.25).abs() <= 1e-12 * 0.25);
        assert!((t.slots[1].risk - 1.0).abs() <= 1e-12);
        let t = table(&[(3, 0, 0)]);
        assert_eq!(t.slots[0].risk, 0.0);
        let t = table(&[(3, 4, 1)]);
        assert_eq!(t.slots[0].risk, 1.0);
        let t = table(&[(0, 0, 0), (1, 1, 0)]);
        assert_eq!(t.risk(0, 0.5, 0.5).unwrap(), None);
    }

    #[test]
    fn choose_measure_branches() {
        let th = Thresholds::fidelity();
        for kind in [FaultKind::Cfi, FaultKind::Ccc] {
            assert_eq!(choose_measure(10, &th, kind), MeasureKind::RepeatLoop);
            assert_eq!(choose_measure(300, &th, kind), MeasureKind::ReloadAndRepeat);
            assert_eq!(
                choose_measure(600, &th, kind),
                MeasureKind::RelocateAndRepeat
            );
            assert_eq!(choose_measure(256, &th, kind), MeasureKind::RepeatLoop);
            assert_eq!(choose_measure(512, &th, kind), MeasureKind::ReloadAndRepeat);
        }
    }

    #[test]
    fn select_slot_examples() {
        assert_eq!(table(&[(10, 2, 0), (5, 2, 1)]).select_slot().unwrap(), 0);
        assert_eq!(table(&[(5, 0, 0), (10, 0, 0)]).select_slot().unwrap(), 1);
        assert_eq!(table(&[(10, 0, 0), (10, 0, 0)]).select_slot().unwrap(), 0);
        assert_eq!(table(&[(1, 1, 1)]).select_slot().unwrap(), 0);
        assert_eq!(table(&[(0, 0, 0), (4, 4, 4)]).select_slot().unwrap(), 1);
        assert_eq!(
            table(&[(1, 1, 1)]).select_slot_excluding(0),
            Err(Error::NoSelectableSlot)
        );
    }

    #[test]
    fn thresholds_validate() {
        assert!(Thresholds::fidelity().validate().is_ok());
        let mut th = Thresholds::scaled();
        th.ccc_th_reld = 16;
        assert!(th.validate().is_err());
        assert!(Weights {
            w_cfi: 0.7,
            w_ccc: 0.7
        }
        .validate()
        .is_err());
        assert!(Weights {
            w_cfi: -0.5,
            w_ccc: 1.5
        }
        .validate()
        .is_err());
    }

    #[test]
    fn general_form_reduces_to_two_kinds() {
        let t = table(&[(10, 2, 0), (5, 2, 1), (8, 1, 3)]);
        let rates: Vec<Vec<Option<f64>>> = [FaultKind::Cfi, FaultKind::Ccc]
            .iter()
            .map(|&k| t.slots.iter().map(|s| s.rate(k)).collect())
            .collect();
        for i in 0..3 {
            let r = composite_risk(&rates, &[0.5, 0.5], i).unwrap();
            assert_eq!(r, t.slots[i].risk);
        }
        let one = vec![rates[0].clone()];
        assert_eq!(composite_risk(&one, &[1.0], 1), Some(1.0));
    }
}
