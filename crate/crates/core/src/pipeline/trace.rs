use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::monitors::RsrState;
use crate::signals::{ControlSignalVector, Csr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceMode {
    Off,
    /// Keep only the most recent cycles.
    Ring(usize),
    Full,
}

impl Default for TraceMode {
    fn default() -> Self {
        TraceMode::Ring(16)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub cycle: u64,
    pub seg_cycle: u64,
    pub csr: Csr,
    pub rsr: RsrState,
    pub derived: ControlSignalVector,
    pub observed: ControlSignalVector,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    mode: TraceMode,
    entries: VecDeque<TraceEntry>,
}

impl Trace {
    pub fn new(mode: TraceMode) -> Self {
        Trace {
            mode,
            entries: VecDeque::new(),
        }
    }

    pub fn push(&mut self, e: TraceEntry) {
        match self.mode {
            TraceMode::Off => {}
            TraceMode::Ring(cap) => {
                if cap == 0 {
                    return;
                }
                if self.entries.len() == cap {
                    self.entries.pop_front();
                }
                self.entries.push_back(e);
            }
            TraceMode::Full => self.entries.push_back(e),
        }
    }

    pub fn into_vec(self) -> Vec<TraceEntry> {
        self.entries.into()
    }
}
