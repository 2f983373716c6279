//! Stuck-at fault emulation on the ten control signals.
//!
//! A 10-bit pattern `R_s` becomes the gate word `F_r` (msb first, bit `b`
//! drives roster signal `b`). A `0` bit marks an attacked signal in both
//! polarities: stuck-at-0 ANDs the bit in, stuck-at-1 ORs its complement in.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signals::{ControlSignalVector, Signal};

pub const PATTERN_BITS: u32 = 10;
pub const PATTERN_MAX: u32 = (1 << PATTERN_BITS) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StuckMode {
    #[serde(rename = "stuck-at-0")]
    StuckAt0,
    #[serde(rename = "stuck-at-1")]
    StuckAt1,
}

impl StuckMode {
    pub const BOTH: [StuckMode; 2] = [StuckMode::StuckAt0, StuckMode::StuckAt1];

    pub fn forced_value(self) -> bool {
        self == StuckMode::StuckAt1
    }
}

impl fmt::Display for StuckMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StuckMode::StuckAt0 => "stuck-at-0",
            StuckMode::StuckAt1 => "stuck-at-1",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Persistence {
    #[default]
    SingleCycle,
    /// Held from the trigger cycle until the slot is reconfigured.
    Permanent,
}

/// The gate word `F_r`, stored as its 10-bit integer value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GateWord(u16);

impl GateWord {
    pub const PASS: GateWord = GateWord(PATTERN_MAX as u16);

    pub fn bits(self) -> u16 {
        self.0
    }

    /// Bit for roster position `b`, counted from the msb.
    pub fn bit(self, b: usize) -> bool {
        self.0 >> (PATTERN_BITS as usize - 1 - b) & 1 == 1
    }

    pub fn attacks(self, s: Signal) -> bool {
        !self.bit(s.index())
    }

    pub fn attacked(self) -> Vec<Signal> {
        Signal::ALL
            .into_iter()
            .filter(|&s| self.attacks(s))
            .collect()
    }

    /// Word attacking exactly the given signals.
    pub fn attacking(signals: &[Signal]) -> Self {
        let mut w = PATTERN_MAX as u16;
        for s in signals {
            w &= !(1 << (PATTERN_BITS as usize - 1 - s.index()));
        }
        GateWord(w)
    }
}

impl fmt::Display for GateWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:010b}", self.0)
    }
}

pub fn encode_pattern(r_s: u32) -> Result<GateWord> {
    if r_s > PATTERN_MAX {
        return Err(Error::OutOfRange {
            value: r_s as u64,
            bits: PATTERN_BITS,
        });
    }
    Ok(GateWord(r_s as u16))
}

pub fn gate(
    sig: &ControlSignalVector,
    f_r: GateWord,
    mode: StuckMode,
    active: bool,
) -> ControlSignalVector {
    if !active {
        return *sig;
    }
    let mut out = *sig;
    for s in Signal::ALL {
        let f = f_r.bit(s.index());
        let v = sig.get(s);
        out.set(
            s,
            match mode {
                StuckMode::StuckAt0 => f && v,
                StuckMode::StuckAt1 => !f || v,
            },
        );
    }
    out
}

/// One injected attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FaultPlan {
    pub r_t: u32,
    pub r_s: u32,
    pub mode: StuckMode,
    #[serde(default)]
    pub persistence: Persistence,
    /// Slot the attack lives in; `None` means whichever slot is bound.
    #[serde(default)]
    pub slot_scope: Option<usize>,
}

impl FaultPlan {
    pub fn new(r_t: u32, r_s: u32, mode: StuckMode) -> Result<Self> {
        let plan = FaultPlan {
            r_t,
            r_s,
            mode,
            persistence: Persistence::SingleCycle,
            slot_scope: None,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Single-cycle plan attacking exactly one signal.
    pub fn single(r_t: u32, signal: Signal, mode: StuckMode) -> Self {
        FaultPlan {
            r_t,
            r_s: GateWord::attacking(&[signal]).bits() as u32,
            mode,
            persistence: Persistence::SingleCycle,
            slot_scope: None,
        }
    }

    pub fn permanent(mut self) -> Self {
        self.persistence = Persistence::Permanent;
        self
    }

    pub fn in_slot(mut self, slot: usize) -> Self {
        self.slot_scope = Some(slot);
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("r_t", self.r_t), ("r_s", self.r_s)] {
            if v > PATTERN_MAX {
                return Err(Error::config(
                    name,
                    format!("{v} does not fit in {PATTERN_BITS} bits"),
                ));
            }
        }
        Ok(())
    }

    pub fn gate_word(&self) -> GateWord {
        GateWord((self.r_s & PATTERN_MAX) as u16)
    }

    /// Whether the plan's trigger condition holds at global cycle `cycle`.
    pub fn fires_at(&self, cycle: u64) -> bool {
        match self.persistence {
            Persistence::SingleCycle => cycle == self.r_t as u64,
            Persistence::Permanent => cycle >= self.r_t as u64,
        }
    }

    pub fn apply(&self, sig: &ControlSignalVector, cycle: u64) -> ControlSignalVector {
        gate(sig, self.gate_word(), self.mode, self.fires_at(cycle))
    }
}

/// Whether the plan changes at least one signal of the fault-free `trace`
/// (indexed by cycle) at a cycle where it fires.
pub fn is_effective(plan: &FaultPlan, trace: &[ControlSignalVector]) -> Result<bool> {
    let r_t = plan.r_t as usize;
    if r_t >= trace.len() {
        return Err(Error::IndexOutOfRange(format!(
            "trigger cycle {r_t} outside a {}-cycle trace",
            trace.len()
        )));
    }
    let cycles = match plan.persistence {
        Persistence::SingleCycle => r_t..r_t + 1,
        Persistence::Permanent => r_t..trace.len(),
    };
    Ok(trace[cycles]
        .iter()
        .any(|s| gate(s, plan.gate_word(), plan.mode, true) != *s))
}

/// A fault carried by a reconfiguration slot's bitstream: survives reload,
/// escaped only by relocating to another slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrojanProfile {
    pub f_r: GateWord,
    pub mode: StuckMode,
    /// Fire only at this cycle of every transform; `None` fires every cycle.
    #[serde(default)]
    pub at_cycle: Option<u64>,
}

impl TrojanProfile {
    pub fn apply(&self, sig: &ControlSignalVector, cycle: u64) -> ControlSignalVector {
        let active = self.at_cycle.is_none_or(|c| c == cycle);
        gate(sig, self.f_r, self.mode, active)
    }
}
