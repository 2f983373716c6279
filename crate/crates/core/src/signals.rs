//! The ten monitored control/status signals and the 4-bit control shift register.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the ten gated control/status signals, in injector roster order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signal {
    RdEn,
    WrEn,
    PolymemCe,
    CtrlRst,
    UbuffRst,
    BarrettRst,
    BarrettStrt,
    BarrettDone,
    UvRst,
    UvStrt,
}

impl Signal {
    pub const COUNT: usize = 10;

    pub const ALL: [Signal; Signal::COUNT] = [
        Signal::RdEn,
        Signal::WrEn,
        Signal::PolymemCe,
        Signal::CtrlRst,
        Signal::UbuffRst,
        Signal::BarrettRst,
        Signal::BarrettStrt,
        Signal::BarrettDone,
        Signal::UvRst,
        Signal::UvStrt,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Signal::RdEn => "rd_en",
            Signal::WrEn => "wr_en",
            Signal::PolymemCe => "polymem_ce",
            Signal::CtrlRst => "ctrl_rst",
            Signal::UbuffRst => "ubuff_rst",
            Signal::BarrettRst => "barrett_rst",
            Signal::BarrettStrt => "barrett_strt",
            Signal::BarrettDone => "barrett_done",
            Signal::UvRst => "uv_rst",
            Signal::UvStrt => "uv_strt",
        }
    }

    /// Reset-type signals are active-high resets; the rest are enables or status.
    pub fn is_reset(self) -> bool {
        matches!(
            self,
            Signal::CtrlRst | Signal::UbuffRst | Signal::BarrettRst | Signal::UvRst
        )
    }
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Signal {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Signal::ALL
            .into_iter()
            .find(|sig| sig.name() == s)
            .ok_or_else(|| Error::config("signal", format!("unknown signal `{s}`")))
    }
}

/// Values of the ten signals at one cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ControlSignalVector {
    pub rd_en: bool,
    pub wr_en: bool,
    pub polymem_ce: bool,
    pub ctrl_rst: bool,
    pub ubuff_rst: bool,
    pub barrett_rst: bool,
    pub barrett_strt: bool,
    pub barrett_done: bool,
    pub uv_rst: bool,
    pub uv_strt: bool,
}

impl ControlSignalVector {
    pub fn get(&self, s: Signal) -> bool {
        match s {
            Signal::RdEn => self.rd_en,
            Signal::WrEn => self.wr_en,
            Signal::PolymemCe => self.polymem_ce,
            Signal::CtrlRst => self.ctrl_rst,
            Signal::UbuffRst => self.ubuff_rst,
            Signal::BarrettRst => self.barrett_rst,
            Signal::BarrettStrt => self.barrett_strt,
            Signal::BarrettDone => self.barrett_done,
            Signal::UvRst => self.uv_rst,
            Signal::UvStrt => self.uv_strt,
        }
    }

    pub fn set(&mut self, s: Signal, v: bool) {
        let slot = match s {
            Signal::RdEn => &mut self.rd_en,
            Signal::WrEn => &mut self.wr_en,
            Signal::PolymemCe => &mut self.polymem_ce,
            Signal::CtrlRst => &mut self.ctrl_rst,
            Signal::UbuffRst => &mut self.ubuff_rst,
            Signal::BarrettRst => &mut self.barrett_rst,
            Signal::BarrettStrt => &mut self.barrett_strt,
            Signal::BarrettDone => &mut self.barrett_done,
            Signal::UvRst => &mut self.uv_rst,
            Signal::UvStrt => &mut self.uv_strt,
        };
        *slot = v;
    }

    /// Pack into 10 bits, roster order, first signal in the most significant bit.
    pub fn to_bits(&self) -> u16 {
        Signal::ALL
            .iter()
            .fold(0u16, |acc, &s| (acc << 1) | self.get(s) as u16)
    }

    pub fn from_bits(bits: u16) -> Self {
        let mut v = ControlSignalVector::default();
        for (b, &s) in Signal::ALL.iter().enumerate() {
            v.set(s, bits >> (Signal::COUNT - 1 - b) & 1 == 1);
        }
        v
    }

    /// Signals whose value differs between `self` and `other`.
    pub fn diff(&self, other: &ControlSignalVector) -> Vec<Signal> {
        Signal::ALL
            .into_iter()
            .filter(|&s| self.get(s) != other.get(s))
            .collect()
    }
}

impl fmt::Display for ControlSignalVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:010b}", self.to_bits())
    }
}

/// The 4-bit control shift register. Bit 3 is the msb and the fill input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Csr {
    bits: u8,
}

impl Csr {
    pub const FULL: Csr = Csr { bits: 0b1111 };
    pub const EMPTY: Csr = Csr { bits: 0 };

    pub fn from_bits(bits: u8) -> Self {
        Csr {
            bits: bits & 0b1111,
        }
    }

    pub fn bits(self) -> u8 {
        self.bits
    }

    pub fn bit(self, i: u32) -> bool {
        debug_assert!(i < 4);
        self.bits >> i & 1 == 1
    }

    /// Right shift with `fill` entering at bit 3.
    #[must_use]
    pub fn shift_in(self, fill: bool) -> Self {
        Csr {
            bits: (self.bits >> 1) | ((fill as u8) << 3),
        }
    }
}

impl fmt::Display for Csr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04b}", self.bits)
    }
}

impl FromStr for Csr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.len() != 4 || !s.bytes().all(|b| b == b'0' || b == b'1') {
            return Err(Error::config("csr", format!("`{s}` is not a 4-bit word")));
        }
        Ok(Csr::from_bits(
            u8::from_str_radix(s, 2).expect("binary digits"),
        ))
    }
}

/// Fault-free control vector for a CSR value.
///
/// `barrett_done` is filled with its scheduled value `CSR[0]`; the pipeline
/// replaces it with the Barrett unit's own status line.
pub fn derive_controls(csr: Csr, rst: bool) -> ControlSignalVector {
    let (c3, c2, c1, c0) = (csr.bit(3), csr.bit(2), csr.bit(1), csr.bit(0));
    ControlSignalVector {
        rd_en: c3,
        wr_en: c0,
        polymem_ce: c0 || c3,
        ctrl_rst: rst,
        ubuff_rst: rst,
        barrett_rst: !(c1 || c2),
        barrett_strt: c1 || c2,
        barrett_done: c0,
        uv_rst: !c3,
        uv_strt: c0,
    }
}

/// CSR values of a fault-free segment issuing `butterflies` butterflies:
/// `butterflies + 4` entries, starting from the all-zero activation cycle.
pub fn golden_csr(butterflies: usize) -> Vec<Csr> {
    let mut csr = Csr::EMPTY;
    let mut out = Vec::with_capacity(butterflies + 4);
    out.push(csr);
    for c in 1..butterflies + 4 {
        csr = csr.shift_in(c <= butterflies);
        out.push(csr);
    }
    out
}

/// Fault-free signal trace of a segment, one vector per cycle.
pub fn golden_schedule(butterflies: usize) -> Vec<ControlSignalVector> {
    golden_csr(butterflies)
        .into_iter()
        .map(|csr| derive_controls(csr, false))
        .collect()
}
