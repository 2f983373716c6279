//! The cycle-accurate pipelined transform.

mod run;
mod state;
mod trace;

pub use run::{run, run_with_twiddles, RunEvent, RunOptions, RunOutcome};
pub use state::{
    ActiveGate, CycleFaults, Issue, JournalEntry, PipelineState, PipelineStats, ReadReg,
    RollbackInfo, StepEvent, StepOutput, Tagged, WriteRecord, ROLLBACK_DEPTH,
};
pub use trace::{Trace, TraceEntry, TraceMode};
