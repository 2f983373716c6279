//! Cycle-accurate simulator of a Trojan-resilient pipelined NTT.
//!
//! The crate models a five-stage NTT datapath driven by a 4-bit control shift
//! register, an independent shadow register and clock-cycle counter that flag
//! control-flow and timing faults, a local mask unit that blinds every memory
//! write with a random twiddle, a stuck-at fault injector on the ten control
//! signals, and the adaptive recovery policy (repeat / reload / relocate)
//! that picks partial-reconfiguration slots by risk score.
//!
//! Module map:
//!
//! * [`ntt`] golden arithmetic and transform
//! * [`signals`] control-signal roster and the CSR
//! * [`pipeline`] the cycle-by-cycle machine and [`pipeline::run`]
//! * [`monitors`] RSR, CFI predicates, CCC
//! * [`masking`] local mask unit
//! * [`injector`] fault plans and stuck-at gating
//! * [`correction`] patcher table, risk, measures
//! * [`campaign`] Kyber workloads, campaigns and reports

pub mod campaign;
pub mod correction;
pub mod error;
pub mod injector;
pub mod masking;
pub mod monitors;
pub mod ntt;
pub mod pipeline;
pub mod signals;

pub use error::{Error, Result};
