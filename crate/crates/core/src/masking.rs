//! Local mask unit: blinds every memory write with a random twiddle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ntt::arith::{add_mod, sub_mod};
use crate::ntt::{NttParams, TwiddleTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskMode {
    #[default]
    PerWrite,
    PerRun,
    Off,
}

impl std::str::FromStr for MaskMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-write" => Ok(MaskMode::PerWrite),
            "per-run" => Ok(MaskMode::PerRun),
            "off" => Ok(MaskMode::Off),
            _ => Err(Error::config(
                "mask",
                format!("expected per-write, per-run or off, got `{s}`"),
            )),
        }
    }
}

/// A drawn mask: the `w_mem` address and the twiddle pair found there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MaskContext {
    pub r_index: usize,
    pub omega_r: u32,
    pub omega_r_inv: u32,
}

impl MaskContext {
    pub fn identity() -> Self {
        MaskContext {
            r_index: 0,
            omega_r: 1,
            omega_r_inv: 1,
        }
    }
}

/// Uniform draw over the `w_mem` addresses. Every entry is a power of omega,
/// hence nonzero; the entry 1 at address 0 is allowed.
pub fn draw_mask<R: Rng + ?Sized>(rng: &mut R, w: &TwiddleTable) -> MaskContext {
    let r_index = rng.gen_range(0..w.len());
    MaskContext {
        r_index,
        omega_r: w.get(r_index),
        omega_r_inv: w.inverse(r_index),
    }
}

/// `((u + v)·ω_r, (u − v)·ω_r) mod q`.
pub fn mask_pair(u: u32, v: u32, ctx: &MaskContext, p: &NttParams) -> (u32, u32) {
    let b = p.barrett();
    (
        b.mul(add_mod(u, v, p.q()), ctx.omega_r),
        b.mul(sub_mod(u, v, p.q()), ctx.omega_r),
    )
}

pub fn mask_coeff(x: u32, ctx: &MaskContext, p: &NttParams) -> u32 {
    p.barrett().mul(x, ctx.omega_r)
}

pub fn unmask_coeff(x: u32, ctx: &MaskContext, p: &NttParams) -> u32 {
    p.barrett().mul(x, ctx.omega_r_inv)
}

/// One `poly_mem` word together with the mask it was written under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Word {
    pub value: u32,
    pub mask: Option<MaskContext>,
}

impl Word {
    pub fn plain(value: u32) -> Self {
        Word { value, mask: None }
    }

    pub fn unmasked(&self, p: &NttParams) -> u32 {
        match &self.mask {
            Some(ctx) => unmask_coeff(self.value, ctx, p),
            None => self.value,
        }
    }
}

/// Seeded mask source owned by one pipeline instance.
#[derive(Debug, Clone)]
pub struct MaskUnit {
    mode: MaskMode,
    seed: u64,
    rng: ChaCha8Rng,
    run_ctx: Option<MaskContext>,
}

impl MaskUnit {
    pub fn new(mode: MaskMode, seed: u64) -> Self {
        MaskUnit {
            mode,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            run_ctx: None,
        }
    }

    pub fn mode(&self) -> MaskMode {
        self.mode
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Start of a transform: per-run mode draws its single context here.
    pub fn begin_run(&mut self, w: &TwiddleTable) {
        self.run_ctx = match self.mode {
            MaskMode::PerRun => Some(draw_mask(&mut self.rng, w)),
            _ => None,
        };
    }

    /// Context for the butterfly being issued.
    pub fn next(&mut self, w: &TwiddleTable) -> Option<MaskContext> {
        match self.mode {
            MaskMode::PerWrite => Some(draw_mask(&mut self.rng, w)),
            MaskMode::PerRun => {
                if self.run_ctx.is_none() {
                    self.run_ctx = Some(draw_mask(&mut self.rng, w));
                }
                self.run_ctx
            }
            MaskMode::Off => None,
        }
    }
}
