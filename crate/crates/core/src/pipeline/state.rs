use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::injector::{gate, GateWord, StuckMode};
use crate::masking::{mask_coeff, MaskContext, MaskMode, MaskUnit, Word};
use crate::ntt::arith::{add_mod, sub_mod};
use crate::ntt::transform::addr_of;
use crate::ntt::{NttParams, Polynomial, TwiddleTable, COEFF_BITS};
use crate::signals::{derive_controls, ControlSignalVector, Csr};

/// Journal entries newer than this many cycles before a detection are undone.
pub const ROLLBACK_DEPTH: u64 = 4;

/// One butterfly issued by the controller; travels with the data for three cycles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub bf: usize,
    pub k0: usize,
    pub k1: usize,
    pub widx: usize,
    pub mask: Option<MaskContext>,
}

/// `R0`: operands fetched from memory. `tag` names the butterfly they were
/// fetched for, if the read was an issued one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadReg {
    pub tag: Option<usize>,
    pub u: u32,
    pub a1: u32,
    pub w: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tagged<T> {
    pub tag: Option<usize>,
    pub val: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub cycle: u64,
    pub bf: Option<usize>,
    pub addr: usize,
    pub old: Word,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WriteRecord {
    pub cycle: u64,
    pub bf: Option<usize>,
    pub addr: usize,
    /// Adder/subtractor output before the mask unit.
    pub plain: u32,
    pub word: Word,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PipelineStats {
    /// Coefficient reads served from memory or the forwarding path.
    pub reads: u64,
    /// Reads that observed a value never touched by the mask unit.
    pub unmasked_reads: u64,
    pub forwarded_reads: u64,
    pub writes: u64,
    pub stall_cycles: u64,
}

/// Gating applied to the derived signals during one cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActiveGate {
    pub f_r: GateWord,
    pub mode: StuckMode,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CycleFaults<'a> {
    pub gates: &'a [ActiveGate],
    /// Freeze the CSR and datapath for this cycle.
    pub stall: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum StepEvent {
    Issued {
        bf: usize,
    },
    Read {
        k0: usize,
        k1: usize,
        forwarded: u8,
    },
    Write {
        bf: Option<usize>,
        k0: usize,
        k1: usize,
    },
    CtrlReset,
    Stalled,
    Finished,
    NoOp,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepOutput {
    pub cycle: u64,
    pub seg_cycle: u64,
    pub csr: Csr,
    pub derived: ControlSignalVector,
    pub observed: ControlSignalVector,
    pub events: Vec<StepEvent>,
}

/// Full machine state of the five-stage pipeline.
///
/// Stage 1 is the controller (issue), stage 2 the memory read into `R0`,
/// stages 3 and 4 the two Barrett registers alongside the U-buffer, stage 5
/// the adder/subtractor and write-back. A butterfly read at cycle `c` is
/// written at `c + 3`.
#[derive(Debug, Clone)]
pub struct PipelineState {
    params: NttParams,
    twiddles: Arc<TwiddleTable>,
    input: Vec<u32>,
    mem: Vec<Word>,
    csr: Csr,
    rst: bool,
    cycle: u64,
    seg_cycle: u64,
    seg_start: usize,
    loop_ptr: usize,
    total: usize,
    addr_pipe: [Option<Issue>; 3],
    read_reg: Option<ReadReg>,
    u_buffer: [Option<Tagged<u32>>; 2],
    /// `[0]` holds the raw product, `[1]` the reduced `V`.
    barrett_regs: [Option<Tagged<u64>>; 2],
    done_line: [bool; 2],
    uv_out: (u32, u32),
    wr_addr: (usize, usize),
    journal: Vec<JournalEntry>,
    mask_unit: MaskUnit,
    pending_fault: Option<u64>,
    finished: bool,
    stats: PipelineStats,
    write_log: Option<Vec<WriteRecord>>,
}

impl PipelineState {
    pub fn new(
        input: &Polynomial,
        params: &NttParams,
        mask_mode: MaskMode,
        mask_seed: u64,
    ) -> Result<Self> {
        Self::with_twiddles(
            input,
            params,
            Arc::new(TwiddleTable::new(params)),
            mask_mode,
            mask_seed,
        )
    }

    pub fn with_twiddles(
        input: &Polynomial,
        params: &NttParams,
        twiddles: Arc<TwiddleTable>,
        mask_mode: MaskMode,
        mask_seed: u64,
    ) -> Result<Self> {
        input.validate(params)?;
        if twiddles.len() != params.n() {
            return Err(Error::LengthMismatch {
                expected: params.n(),
                got: twiddles.len(),
            });
        }
        let mut mask_unit = MaskUnit::new(mask_mode, mask_seed);
        mask_unit.begin_run(&twiddles);
        Ok(PipelineState {
            params: params.clone(),
            twiddles,
            input: input.coeffs().to_vec(),
            mem: input.coeffs().iter().map(|&c| Word::plain(c)).collect(),
            csr: Csr::EMPTY,
            rst: false,
            cycle: 0,
            seg_cycle: 0,
            seg_start: 0,
            loop_ptr: 0,
            total: params.butterflies(),
            addr_pipe: [None; 3],
            read_reg: None,
            u_buffer: [None; 2],
            barrett_regs: [None; 2],
            done_line: [false; 2],
            uv_out: (0, 0),
            wr_addr: (0, 0),
            journal: Vec::with_capacity(2 * params.butterflies()),
            mask_unit,
            pending_fault: None,
            finished: false,
            stats: PipelineStats::default(),
            write_log: None,
        })
    }

    pub fn record_writes(&mut self, on: bool) {
        self.write_log = on.then(Vec::new);
    }

    pub fn params(&self) -> &NttParams {
        &self.params
    }
    pub fn twiddles(&self) -> &TwiddleTable {
        &self.twiddles
    }
    pub fn csr(&self) -> Csr {
        self.csr
    }
    pub fn cycle(&self) -> u64 {
        self.cycle
    }
    pub fn seg_cycle(&self) -> u64 {
        self.seg_cycle
    }
    pub fn seg_start(&self) -> usize {
        self.seg_start
    }
    pub fn loop_ptr(&self) -> usize {
        self.loop_ptr
    }
    pub fn total_butterflies(&self) -> usize {
        self.total
    }
    /// Butterflies the current segment issues when fault-free.
    pub fn segment_butterflies(&self) -> usize {
        self.total - self.seg_start
    }
    pub fn is_finished(&self) -> bool {
        self.finished
    }
    pub fn memory(&self) -> &[Word] {
        &self.mem
    }
    pub fn stats(&self) -> &PipelineStats {
        &self.stats
    }
    pub fn journal(&self) -> &[JournalEntry] {
        &self.journal
    }
    pub fn write_log(&self) -> Option<&[WriteRecord]> {
        self.write_log.as_deref()
    }
    pub fn u_buffer(&self) -> &[Option<Tagged<u32>>; 2] {
        &self.u_buffer
    }
    pub fn pending_fault(&self) -> Option<u64> {
        self.pending_fault
    }

    pub fn set_rst(&mut self, rst: bool) {
        self.rst = rst;
    }

    /// Memory image with every mask removed.
    pub fn unmasked_memory(&self) -> Polynomial {
        let coeffs = self.mem.iter().map(|w| w.unmasked(&self.params)).collect();
        Polynomial::new(coeffs, &self.params).expect("memory words stay reduced")
    }

    /// Mark a detected fault at `cycle`; required before [`rollback`](Self::rollback).
    pub fn flag_fault(&mut self, cycle: u64) {
        self.pending_fault = Some(cycle);
    }

    /// Advance one clock.
    pub fn step(&mut self, faults: &CycleFaults<'_>) -> StepOutput {
        let mut events = Vec::new();
        if self.finished {
            events.push(StepEvent::NoOp);
            let derived = derive_controls(self.csr, self.rst);
            return StepOutput {
                cycle: self.cycle,
                seg_cycle: self.seg_cycle,
                csr: self.csr,
                derived,
                observed: derived,
                events,
            };
        }

        if self.seg_cycle > 0 && !faults.stall {
            self.csr = self.csr.shift_in(self.loop_ptr < self.total && !self.rst);
        }
        let mut derived = derive_controls(self.csr, self.rst);
        derived.barrett_done = self.done_line[1];
        let observed = faults
            .gates
            .iter()
            .fold(derived, |s, g| gate(&s, g.f_r, g.mode, true));

        let out_cycle = self.cycle;
        let out_seg = self.seg_cycle;
        let out_csr = self.csr;

        if faults.stall {
            self.stats.stall_cycles += 1;
            events.push(StepEvent::Stalled);
        } else {
            self.datapath(&observed, &mut events);
        }

        self.cycle += 1;
        self.seg_cycle += 1;
        if self.loop_ptr == self.total && self.csr.bits() & 0b1110 == 0 && out_seg > 0 {
            self.finished = true;
            events.push(StepEvent::Finished);
        }
        StepOutput {
            cycle: out_cycle,
            seg_cycle: out_seg,
            csr: out_csr,
            derived,
            observed,
            events,
        }
    }

    fn datapath(&mut self, s: &ControlSignalVector, events: &mut Vec<StepEvent>) {
        let q = self.params.q();
        let n = self.params.n();
        let b = *self.params.barrett();

        // stage 5: adder/subtractor, mask unit, write port
        if s.uv_strt {
            let u = self.u_buffer[1].map_or(0, |e| e.val);
            let v = self.barrett_regs[1].map_or(0, |e| e.val as u32);
            self.uv_out = (add_mod(u, v, q), sub_mod(u, v, q));
        } else if s.uv_rst {
            self.uv_out = (0, 0);
        }
        if s.wr_en && s.polymem_ce {
            let entry = self.addr_pipe[2];
            if let Some(e) = entry {
                self.wr_addr = (e.k0, e.k1);
            }
            let (k0, k1) = self.wr_addr;
            let mask = entry.and_then(|e| e.mask);
            let bf = entry.map(|e| e.bf);
            let (sum, diff) = self.uv_out;
            self.write_word(k0, sum, mask, bf);
            self.write_word(k1, diff, mask, bf);
            events.push(StepEvent::Write { bf, k0, k1 });
        }

        // stage 1: controller issue (sees the CSR, not the gated signals)
        let issue = if self.csr.bit(3) && self.loop_ptr < self.total {
            let a = addr_of(self.loop_ptr, n);
            let mask = self.mask_unit.next(&self.twiddles);
            let is = Issue {
                bf: self.loop_ptr,
                k0: a.k0,
                k1: a.k1,
                widx: a.widx,
                mask,
            };
            self.loop_ptr += 1;
            events.push(StepEvent::Issued { bf: is.bf });
            Some(is)
        } else {
            None
        };

        // stage 2: read port
        let next_read = if s.rd_en && s.polymem_ce {
            let (k0, k1, widx) = match issue {
                Some(is) => (is.k0, is.k1, is.widx),
                None => {
                    let a = addr_of(self.loop_ptr.min(self.total - 1), n);
                    (a.k0, a.k1, a.widx)
                }
            };
            let (w0, f0) = self.read_word(k0);
            let (w1, f1) = self.read_word(k1);
            events.push(StepEvent::Read {
                k0,
                k1,
                forwarded: f0 as u8 + f1 as u8,
            });
            Some(ReadReg {
                tag: issue.map(|i| i.bf),
                u: w0.unmasked(&self.params),
                a1: w1.unmasked(&self.params),
                w: self.twiddles.get(widx),
            })
        } else {
            self.read_reg
        };

        // clock edge
        if s.barrett_rst {
            self.barrett_regs = [None; 2];
            self.done_line = [false; 2];
        } else {
            self.done_line = [s.barrett_strt, self.done_line[0]];
            if s.barrett_strt {
                self.barrett_regs = [
                    self.read_reg.map(|r| Tagged {
                        tag: r.tag,
                        val: r.a1 as u64 * r.w as u64,
                    }),
                    self.barrett_regs[0].map(|e| Tagged {
                        tag: e.tag,
                        val: b.reduce(e.val) as u64,
                    }),
                ];
            }
        }
        self.u_buffer = if s.ubuff_rst {
            [None; 2]
        } else {
            [
                self.read_reg.map(|r| Tagged {
                    tag: r.tag,
                    val: r.u,
                }),
                self.u_buffer[0],
            ]
        };
        self.read_reg = next_read;
        self.addr_pipe = [issue, self.addr_pipe[0], self.addr_pipe[1]];
        if s.ctrl_rst {
            self.csr = Csr::EMPTY;
            self.loop_ptr = self.seg_start;
            self.addr_pipe = [None; 3];
            events.push(StepEvent::CtrlReset);
        }
    }

    fn write_word(
        &mut self,
        addr: usize,
        plain: u32,
        mask: Option<MaskContext>,
        bf: Option<usize>,
    ) {
        let value = match &mask {
            Some(ctx) => mask_coeff(plain, ctx, &self.params),
            None => plain,
        };
        debug_assert!(
            value < 1 << COEFF_BITS,
            "write of {value} exceeds the word width"
        );
        let word = Word { value, mask };
        self.journal.push(JournalEntry {
            cycle: self.cycle,
            bf,
            addr,
            old: self.mem[addr],
        });
        if let Some(log) = &mut self.write_log {
            log.push(WriteRecord {
                cycle: self.cycle,
                bf,
                addr,
                plain,
                word,
            });
        }
        self.mem[addr] = word;
        self.stats.writes += 1;
    }

    /// Memory read with forwarding from butterflies whose write is still
    /// pending. Returns the word and whether it was forwarded.
    fn read_word(&mut self, addr: usize) -> (Word, bool) {
        let fwd = self.forward(addr);
        let forwarded = fwd.is_some();
        let word = fwd.unwrap_or(self.mem[addr]);
        self.stats.reads += 1;
        self.stats.forwarded_reads += forwarded as u64;
        self.stats.unmasked_reads += word.mask.is_none() as u64;
        (word, forwarded)
    }

    fn forward(&self, addr: usize) -> Option<Word> {
        let p = &self.params;
        let b = p.barrett();
        // issued one cycle ago: operands sit in R0
        if let (Some(is), Some(r)) = (self.addr_pipe[0], self.read_reg) {
            if (is.k0 == addr || is.k1 == addr) && r.tag == Some(is.bf) {
                let v = b.mul(r.a1, r.w);
                return Some(self.pending_result(&is, addr, r.u, v));
            }
        }
        // issued two cycles ago: U in the buffer head, product in the first Barrett stage
        if let (Some(is), Some(u), Some(prod)) =
            (self.addr_pipe[1], self.u_buffer[0], self.barrett_regs[0])
        {
            if (is.k0 == addr || is.k1 == addr) && u.tag == Some(is.bf) && prod.tag == Some(is.bf) {
                let v = b.reduce(prod.val);
                return Some(self.pending_result(&is, addr, u.val, v));
            }
        }
        None
    }

    fn pending_result(&self, is: &Issue, addr: usize, u: u32, v: u32) -> Word {
        let q = self.params.q();
        let plain = if addr == is.k1 {
            sub_mod(u, v, q)
        } else {
            add_mod(u, v, q)
        };
        let value = match &is.mask {
            Some(ctx) => mask_coeff(plain, ctx, &self.params),
            None => plain,
        };
        Word {
            value,
            mask: is.mask,
        }
    }

    fn clear_pipeline(&mut self) {
        self.csr = Csr::EMPTY;
        self.addr_pipe = [None; 3];
        self.read_reg = None;
        self.u_buffer = [None; 2];
        self.barrett_regs = [None; 2];
        self.done_line = [false; 2];
        self.uv_out = (0, 0);
        self.seg_cycle = 0;
        self.finished = false;
        self.pending_fault = None;
    }

    /// Repeat-previous-loop recovery.
    ///
    /// Undoes every write journaled at or after `t - ROLLBACK_DEPTH` (newest
    /// first), then restarts the controller at the first butterfly whose
    /// write was not retained, with an empty pipeline. Returns that butterfly.
    pub fn rollback(&mut self) -> Result<RollbackInfo> {
        let t = self.pending_fault.ok_or(Error::RollbackWithoutFault)?;
        let cutoff = t.saturating_sub(ROLLBACK_DEPTH);
        let keep = self.journal.partition_point(|e| e.cycle < cutoff);
        let undone = self.journal.len() - keep;
        for e in self.journal.drain(keep..).rev() {
            self.mem[e.addr] = e.old;
        }
        let restart = self
            .journal
            .iter()
            .filter_map(|e| e.bf)
            .max()
            .map_or(0, |b| b + 1);
        self.seg_start = restart;
        self.loop_ptr = restart;
        self.clear_pipeline();
        Ok(RollbackInfo {
            fault_cycle: t,
            restart_bf: restart,
            undone_writes: undone,
        })
    }

    /// Re-run the whole transform from the buffered input.
    pub fn restart(&mut self) -> Result<()> {
        if self.pending_fault.is_none() {
            return Err(Error::RollbackWithoutFault);
        }
        self.mem = self.input.iter().map(|&c| Word::plain(c)).collect();
        self.journal.clear();
        self.seg_start = 0;
        self.loop_ptr = 0;
        self.mask_unit.begin_run(&self.twiddles);
        self.clear_pipeline();
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RollbackInfo {
    pub fault_cycle: u64,
    pub restart_bf: usize,
    pub undone_writes: usize,
}
