//! Fault detectors that watch the observed control signals: the shadow shift
//! register (RSR), the three control-flow predicates, and the clock-cycle
//! counter (CCC).
//!
//! Everything here is a function of the observed signals, the CSR value and
//! the butterfly count of the current segment. Nothing reads the datapath.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::signals::{golden_schedule, ControlSignalVector, Csr, Signal};

/// The shadow register. Its msb follows the observed `rd_en` of the current cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RsrState {
    bits: u8,
}

impl RsrState {
    pub fn from_bits(bits: u8) -> Self {
        RsrState {
            bits: bits & 0b1111,
        }
    }

    pub fn bits(self) -> u8 {
        self.bits
    }

    pub fn bit(self, i: u32) -> bool {
        self.bits >> i & 1 == 1
    }

    pub fn matches(self, csr: Csr) -> bool {
        self.bits == csr.bits()
    }
}

impl fmt::Display for RsrState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04b}", self.bits)
    }
}

pub fn rsr_step(rsr: RsrState, rd_en_observed: bool) -> RsrState {
    RsrState {
        bits: (rsr.bits >> 1) | ((rd_en_observed as u8) << 3),
    }
}

/// Returns `true` on a fault.
pub fn barrett_cfi_check(sig: &ControlSignalVector, csr: Csr, rsr: RsrState) -> bool {
    let ok = sig.barrett_strt == !sig.barrett_rst
        && (csr.bit(1) || csr.bit(2)) == sig.barrett_strt
        && (rsr.bit(1) || rsr.bit(2)) == sig.barrett_strt
        && sig.barrett_done == sig.wr_en;
    !ok
}

pub fn polymem_cfi_check(sig: &ControlSignalVector, rsr: RsrState) -> bool {
    let ok = sig.rd_en == rsr.bit(3)
        && sig.wr_en == rsr.bit(0)
        && sig.polymem_ce == (rsr.bit(0) || rsr.bit(3));
    !ok
}

pub fn uv_cfi_check(sig: &ControlSignalVector, csr: Csr, rsr: RsrState) -> bool {
    let ok = csr.bit(3) == rsr.bit(3) && csr.bit(0) == rsr.bit(0) && sig.uv_strt == !sig.uv_rst;
    !ok
}

/// Any predicate firing raises the combined flag.
pub fn combine_cfi(b: bool, p: bool, u: bool) -> bool {
    b || p || u
}

/// Per-signal tallies in roster order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SignalCounts([u64; Signal::COUNT]);

impl SignalCounts {
    pub fn get(&self, s: Signal) -> u64 {
        self.0[s.index()]
    }

    pub fn add(&mut self, sig: &ControlSignalVector) {
        for s in Signal::ALL {
            self.0[s.index()] += sig.get(s) as u64;
        }
    }

    pub fn as_array(&self) -> &[u64; Signal::COUNT] {
        &self.0
    }

    /// Signals whose counts differ, with (observed, expected) values.
    pub fn mismatches(&self, expected: &SignalCounts) -> Vec<(Signal, u64, u64)> {
        Signal::ALL
            .into_iter()
            .filter(|&s| self.get(s) != expected.get(s))
            .map(|s| (s, self.get(s), expected.get(s)))
            .collect()
    }
}

/// Golden assertion counts for a full transform of length `n`.
pub fn expected_counts(n: usize) -> SignalCounts {
    let log_n = n.trailing_zeros() as usize;
    expected_counts_for(n / 2 * log_n)
}

/// Golden assertion counts for a segment issuing `butterflies` butterflies,
/// tallied over the schedule's `butterflies + 4` cycles.
pub fn expected_counts_for(butterflies: usize) -> SignalCounts {
    let mut c = SignalCounts::default();
    for s in golden_schedule(butterflies) {
        c.add(&s);
    }
    c
}

fn assertion_runs(trace: &[ControlSignalVector]) -> SignalCounts {
    let mut runs = SignalCounts::default();
    let mut prev = ControlSignalVector::default();
    for s in trace {
        for sig in Signal::ALL {
            if s.get(sig) && !prev.get(sig) {
                runs.0[sig.index()] += 1;
            }
        }
        prev = *s;
    }
    runs
}

/// Clock-cycle counter state for one segment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CccState {
    pub observed: SignalCounts,
    pub expected: SignalCounts,
    /// Number of separate high windows per signal.
    pub observed_runs: SignalCounts,
    pub expected_runs: SignalCounts,
    /// Segment cycles `[start, end)` tallied so far.
    pub window: (u64, u64),
    pub strict: bool,
    #[serde(skip)]
    prev: ControlSignalVector,
}

impl CccState {
    pub fn new(butterflies: usize, strict: bool) -> Self {
        let golden = golden_schedule(butterflies);
        let mut expected = SignalCounts::default();
        for s in &golden {
            expected.add(s);
        }
        CccState {
            observed: SignalCounts::default(),
            expected,
            observed_runs: SignalCounts::default(),
            expected_runs: assertion_runs(&golden),
            window: (0, 0),
            strict,
            prev: ControlSignalVector::default(),
        }
    }

    pub fn tally(&mut self, sig: &ControlSignalVector) {
        self.observed.add(sig);
        for s in Signal::ALL {
            if sig.get(s) && !self.prev.get(s) {
                self.observed_runs.0[s.index()] += 1;
            }
        }
        self.prev = *sig;
        self.window.1 += 1;
    }
}

/// `true` iff any tally differs from its golden value (or, when strict, any
/// signal's high windows are split or merged).
pub fn ccc_check(ccc: &CccState) -> bool {
    ccc.observed != ccc.expected || (ccc.strict && ccc.observed_runs != ccc.expected_runs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FlagCycles {
    pub barrett_cfi: Option<u64>,
    pub polymem_cfi: Option<u64>,
    pub uv_cfi: Option<u64>,
    pub cfi_fault: Option<u64>,
    pub ccc_fault: Option<u64>,
}

/// Fault flags, sticky over a run. Cycles are global cycle indices of the
/// first raise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FaultFlags {
    pub barrett_cfi: bool,
    pub polymem_cfi: bool,
    pub uv_cfi: bool,
    pub cfi_fault: bool,
    pub ccc_fault: bool,
    pub cycle_raised: FlagCycles,
}

impl FaultFlags {
    pub fn any(&self) -> bool {
        self.cfi_fault || self.ccc_fault
    }

    pub fn raise_cfi(&mut self, v: &CfiVerdict, cycle: u64) {
        let mark = |flag: &mut bool, at: &mut Option<u64>, hit: bool| {
            if hit {
                *flag = true;
                at.get_or_insert(cycle);
            }
        };
        let c = &mut self.cycle_raised;
        mark(&mut self.barrett_cfi, &mut c.barrett_cfi, v.barrett);
        mark(&mut self.polymem_cfi, &mut c.polymem_cfi, v.polymem);
        mark(&mut self.uv_cfi, &mut c.uv_cfi, v.uv);
        mark(&mut self.cfi_fault, &mut c.cfi_fault, v.fault());
    }

    pub fn raise_ccc(&mut self, cycle: u64) {
        self.ccc_fault = true;
        self.cycle_raised.ccc_fault.get_or_insert(cycle);
    }
}

/// Predicate outcomes at one cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CfiVerdict {
    pub barrett: bool,
    pub polymem: bool,
    pub uv: bool,
}

impl CfiVerdict {
    pub fn fault(&self) -> bool {
        combine_cfi(self.barrett, self.polymem, self.uv)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonitorConfig {
    pub cfi: bool,
    pub ccc: bool,
    pub strict_ccc: bool,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig {
            cfi: true,
            ccc: true,
            strict_ccc: false,
        }
    }
}

impl MonitorConfig {
    pub fn disabled() -> Self {
        MonitorConfig {
            cfi: false,
            ccc: false,
            strict_ccc: false,
        }
    }
}

/// RSR, CFI and CCC for one pipeline instance, armed per segment.
///
/// The predicates are evaluated only on segment cycles `4..=B`, where the
/// golden CSR is `1111`; fill and drain are covered by the counter.
#[derive(Debug, Clone)]
pub struct MonitorSet {
    config: MonitorConfig,
    butterflies: usize,
    seg_cycle: u64,
    rsr: RsrState,
    ccc: CccState,
}

impl MonitorSet {
    pub fn new(config: MonitorConfig, butterflies: usize) -> Self {
        MonitorSet {
            config,
            butterflies,
            seg_cycle: 0,
            rsr: RsrState::default(),
            ccc: CccState::new(butterflies, config.strict_ccc),
        }
    }

    /// Start a new segment; tallies of the previous one are discarded.
    pub fn rearm(&mut self, butterflies: usize) {
        *self = MonitorSet::new(self.config, butterflies);
    }

    pub fn config(&self) -> MonitorConfig {
        self.config
    }

    pub fn rsr(&self) -> RsrState {
        self.rsr
    }

    pub fn ccc(&self) -> &CccState {
        &self.ccc
    }

    pub fn seg_cycle(&self) -> u64 {
        self.seg_cycle
    }

    pub fn in_cfi_window(&self) -> bool {
        self.seg_cycle >= 4 && self.seg_cycle <= self.butterflies as u64
    }

    /// Observe one cycle. Returns the predicate verdicts if the window is open.
    pub fn observe(&mut self, sig: &ControlSignalVector, csr: Csr) -> Option<CfiVerdict> {
        self.rsr = rsr_step(self.rsr, sig.rd_en);
        self.ccc.tally(sig);
        let verdict = (self.config.cfi && self.in_cfi_window()).then(|| CfiVerdict {
            barrett: barrett_cfi_check(sig, csr, self.rsr),
            polymem: polymem_cfi_check(sig, self.rsr),
            uv: uv_cfi_check(sig, csr, self.rsr),
        });
        self.seg_cycle += 1;
        verdict
    }

    /// End-of-segment counter check.
    pub fn finish(&self) -> bool {
        self.config.ccc && ccc_check(&self.ccc)
    }
}
