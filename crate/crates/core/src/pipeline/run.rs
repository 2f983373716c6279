use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::state::{ActiveGate, CycleFaults, PipelineState, PipelineStats, WriteRecord};
use super::trace::{Trace, TraceEntry, TraceMode};
use crate::correction::{AppliedMeasure, Corrector, FaultKind, MeasureKind};
use crate::error::Result;
use crate::injector::{FaultPlan, Persistence};
use crate::masking::{MaskMode, Word};
use crate::monitors::{CfiVerdict, FaultFlags, MonitorConfig, MonitorSet};
use crate::ntt::{NttParams, Polynomial, TwiddleTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub plans: Vec<FaultPlan>,
    /// Global cycles at which the pipeline is held for one extra clock.
    pub stall_cycles: Vec<u64>,
    pub monitors: MonitorConfig,
    pub mask_mode: MaskMode,
    pub mask_seed: u64,
    pub trace: TraceMode,
    pub record_writes: bool,
    pub cycle_ns: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            plans: Vec::new(),
            stall_cycles: Vec::new(),
            monitors: MonitorConfig::default(),
            mask_mode: MaskMode::PerWrite,
            mask_seed: 0,
            trace: TraceMode::default(),
            record_writes: false,
            cycle_ns: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum RunEvent {
    Cfi { cycle: u64, verdict: CfiVerdict },
    Ccc { cycle: u64 },
    Timeout { cycle: u64 },
    Measure(AppliedMeasure),
    GaveUp { cycle: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    /// Unmasked memory image, in the transform's raw output order.
    pub output: Polynomial,
    pub memory: Vec<Word>,
    /// Clocks actually stepped, re-executions included.
    pub cycles: u64,
    /// Clocks of one fault-free transform.
    pub nominal_cycles: u64,
    pub flags: FaultFlags,
    pub events: Vec<RunEvent>,
    pub measures: Vec<AppliedMeasure>,
    /// Nominal time plus the cost of every applied measure.
    pub elapsed_ns: u64,
    pub trace: Vec<TraceEntry>,
    pub stats: PipelineStats,
    pub writes: Option<Vec<WriteRecord>>,
    /// Faults were flagged but the correction budget ran out.
    pub uncorrected: bool,
    pub final_slot: Option<usize>,
}

impl RunOutcome {
    pub fn measure_count(&self, kind: MeasureKind) -> usize {
        self.measures.iter().filter(|m| m.kind == kind).count()
    }
}

fn segment_limit(butterflies: usize) -> u64 {
    2 * (butterflies as u64 + 4) + 64
}

/// Run one monitored transform, optionally under attack and with correction.
pub fn run(
    input: &Polynomial,
    params: &NttParams,
    opts: &RunOptions,
    corrector: Option<&mut Corrector>,
) -> Result<RunOutcome> {
    run_with_twiddles(
        input,
        params,
        Arc::new(TwiddleTable::new(params)),
        opts,
        corrector,
    )
}

pub fn run_with_twiddles(
    input: &Polynomial,
    params: &NttParams,
    twiddles: Arc<TwiddleTable>,
    opts: &RunOptions,
    mut corrector: Option<&mut Corrector>,
) -> Result<RunOutcome> {
    for plan in &opts.plans {
        plan.validate()?;
    }
    let mut state =
        PipelineState::with_twiddles(input, params, twiddles, opts.mask_mode, opts.mask_seed)?;
    state.record_writes(opts.record_writes);
    let total = state.total_butterflies();
    let mut monitors = MonitorSet::new(opts.monitors, total);
    let mut trace = Trace::new(opts.trace);
    let mut flags = FaultFlags::default();
    let mut events = Vec::new();
    let mut measures: Vec<AppliedMeasure> = Vec::new();
    // permanent plans that fired and were not yet cleared by reconfiguration
    let mut cleared = vec![false; opts.plans.len()];
    let mut fired = vec![false; opts.plans.len()];
    let mut uncorrected = false;
    let mut seg_flagged = false;

    if let Some(c) = corrector.as_deref_mut() {
        c.begin_run()?;
    }

    let mut gates = Vec::with_capacity(opts.plans.len() + 1);
    loop {
        let cycle = state.cycle();
        let slot = corrector.as_deref().map_or(0, |c| c.active_slot());
        gates.clear();
        for (i, plan) in opts.plans.iter().enumerate() {
            let in_scope = plan.slot_scope.is_none_or(|s| s == slot);
            if in_scope && !cleared[i] && plan.fires_at(cycle) {
                fired[i] = true;
                gates.push(ActiveGate {
                    f_r: plan.gate_word(),
                    mode: plan.mode,
                });
            }
        }
        if let Some(t) = corrector.as_deref().and_then(|c| c.trojan()) {
            if t.at_cycle.is_none_or(|c| c == cycle) {
                gates.push(ActiveGate {
                    f_r: t.f_r,
                    mode: t.mode,
                });
            }
        }
        let stall = opts.stall_cycles.contains(&cycle);
        let out = state.step(&CycleFaults {
            gates: &gates,
            stall,
        });
        let verdict = monitors.observe(&out.observed, out.csr);
        trace.push(TraceEntry {
            cycle: out.cycle,
            seg_cycle: out.seg_cycle,
            csr: out.csr,
            rsr: monitors.rsr(),
            derived: out.derived,
            observed: out.observed,
        });

        if let Some(v) = verdict.filter(|v| v.fault()) {
            flags.raise_cfi(&v, out.cycle);
            if !seg_flagged {
                events.push(RunEvent::Cfi {
                    cycle: out.cycle,
                    verdict: v,
                });
            }
            seg_flagged = true;
            if let Some(c) = corrector.as_deref_mut() {
                if measures.len() < c.policy().max_corrections {
                    let m = c.handle(FaultKind::Cfi, out.cycle, &mut state)?;
                    if m.kind != MeasureKind::RepeatLoop {
                        clear_fired(&opts.plans, &fired, &mut cleared);
                    }
                    events.push(RunEvent::Measure(m));
                    measures.push(m);
                    monitors.rearm(state.segment_butterflies());
                    seg_flagged = false;
                    continue;
                } else if !uncorrected {
                    uncorrected = true;
                    events.push(RunEvent::GaveUp { cycle: out.cycle });
                }
            }
        }

        let timed_out = !state.is_finished()
            && monitors.seg_cycle() > segment_limit(state.segment_butterflies());
        if state.is_finished() || timed_out {
            if timed_out {
                events.push(RunEvent::Timeout { cycle: out.cycle });
            }
            if !(monitors.finish() || timed_out) {
                break;
            }
            flags.raise_ccc(out.cycle);
            events.push(RunEvent::Ccc { cycle: out.cycle });
            match corrector.as_deref_mut() {
                Some(c) if measures.len() < c.policy().max_corrections => {
                    let m = c.handle(FaultKind::Ccc, out.cycle, &mut state)?;
                    if m.kind != MeasureKind::RepeatLoop {
                        clear_fired(&opts.plans, &fired, &mut cleared);
                    }
                    events.push(RunEvent::Measure(m));
                    measures.push(m);
                    monitors.rearm(state.segment_butterflies());
                    seg_flagged = false;
                }
                Some(_) => {
                    if !uncorrected {
                        events.push(RunEvent::GaveUp { cycle: out.cycle });
                    }
                    uncorrected = true;
                    break;
                }
                None => break,
            }
        }
    }

    let nominal_cycles = total as u64 + 4;
    let elapsed_ns =
        nominal_cycles * opts.cycle_ns + measures.iter().map(|m| m.cost_ns).sum::<u64>();
    Ok(RunOutcome {
        output: state.unmasked_memory(),
        memory: state.memory().to_vec(),
        cycles: state.cycle(),
        nominal_cycles,
        flags,
        events,
        measures,
        elapsed_ns,
        trace: trace.into_vec(),
        stats: *state.stats(),
        writes: state.write_log().map(<[_]>::to_vec),
        uncorrected,
        final_slot: corrector.map(|c| c.active_slot()),
    })
}

fn clear_fired(plans: &[FaultPlan], fired: &[bool], cleared: &mut [bool]) {
    for (i, p) in plans.iter().enumerate() {
        if fired[i] && p.persistence == Persistence::Permanent {
            cleared[i] = true;
        }
    }
}
