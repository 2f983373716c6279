//! Golden (non-pipelined) NTT and INTT.
//!
//! The forward transform is the iterative Cooley-Tukey loop nest with the
//! half-length starting at n/2: natural-order input, bit-reversed output.
//! Block `j` of every stage uses twiddle `w_mem[bit_reverse(j, log2(n) - 1)]`
//! where `w_mem[x] = omega^x`, so the twiddle address depends on `j` alone.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::arith::{add_mod, sub_mod};
use super::params::NttParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial {
    coeffs: Vec<u32>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<u32>, p: &NttParams) -> Result<Self> {
        let poly = Polynomial { coeffs };
        poly.validate(p)?;
        Ok(poly)
    }

    pub fn zero(p: &NttParams) -> Self {
        Polynomial {
            coeffs: vec![0; p.n()],
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, p: &NttParams) -> Self {
        Polynomial {
            coeffs: (0..p.n()).map(|_| rng.gen_range(0..p.q())).collect(),
        }
    }

    pub fn validate(&self, p: &NttParams) -> Result<()> {
        if self.coeffs.len() != p.n() {
            return Err(Error::LengthMismatch {
                expected: p.n(),
                got: self.coeffs.len(),
            });
        }
        if let Some((index, &value)) = self.coeffs.iter().enumerate().find(|(_, &c)| c >= p.q()) {
            return Err(Error::Unreduced {
                index,
                value,
                q: p.q(),
            });
        }
        Ok(())
    }

    pub fn coeffs(&self) -> &[u32] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<u32> {
        self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Coefficient-wise product mod q.
    pub fn pointwise(&self, other: &Polynomial, p: &NttParams) -> Polynomial {
        let b = p.barrett();
        Polynomial {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&x, &y)| b.mul(x, y))
                .collect(),
        }
    }

    pub fn add(&self, other: &Polynomial, p: &NttParams) -> Polynomial {
        Polynomial {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&x, &y)| add_mod(x, y, p.q()))
                .collect(),
        }
    }
}

/// Reverse the low `bits` bits of `v`.
pub fn bit_reverse(v: usize, bits: u32) -> Result<usize> {
    if bits < usize::BITS && v >> bits != 0 {
        return Err(Error::OutOfRange {
            value: v as u64,
            bits,
        });
    }
    if bits == 0 {
        return Ok(0);
    }
    Ok(v.reverse_bits() >> (usize::BITS - bits))
}

/// `w_mem`: natural-order powers of omega and their inverses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwiddleTable {
    entries: Vec<u32>,
    inverse_entries: Vec<u32>,
}

impl TwiddleTable {
    pub fn new(p: &NttParams) -> Self {
        let powers = |base: u32| {
            let mut acc = 1u32;
            (0..p.n())
                .map(|_| {
                    let cur = acc;
                    acc = p.barrett().mul(acc, base);
                    cur
                })
                .collect::<Vec<_>>()
        };
        TwiddleTable {
            entries: powers(p.omega()),
            inverse_entries: powers(p.omega_inv()),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, idx: usize) -> u32 {
        self.entries[idx]
    }

    pub fn inverse(&self, idx: usize) -> u32 {
        self.inverse_entries[idx]
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries
    }
}

/// Memory addresses of one butterfly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ButterflyAddr {
    pub k0: usize,
    pub k1: usize,
    pub widx: usize,
}

/// Loop indices of one butterfly of the forward transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LoopIndex {
    pub stage: usize,
    pub block: usize,
    pub k: usize,
    pub hl: usize,
}

impl LoopIndex {
    /// Decompose the linear butterfly ordinal (issue order) into loop indices.
    pub fn from_ordinal(ordinal: usize, n: usize) -> Self {
        let per_stage = n / 2;
        let stage = ordinal / per_stage;
        let r = ordinal % per_stage;
        let hl = n >> (stage + 1);
        LoopIndex {
            stage,
            block: r / hl,
            k: r % hl,
            hl,
        }
    }
}

/// Read/write and twiddle addresses for butterfly `(i, j, k)` with half-length `hl`.
///
/// `k0 = j·2·hl + k`, `k1 = k0 + hl`, twiddle address `bit_reverse(j, log2(n) - 1)`.
pub fn addr_gen(i: usize, j: usize, k: usize, hl: usize, n: usize) -> Result<ButterflyAddr> {
    let log_n = n.trailing_zeros() as usize;
    if !n.is_power_of_two() || i >= log_n {
        return Err(Error::IndexOutOfRange(format!("stage {i} for n = {n}")));
    }
    if hl != n >> (i + 1) {
        return Err(Error::IndexOutOfRange(format!(
            "half-length {hl} at stage {i} (expected {})",
            n >> (i + 1)
        )));
    }
    if j >= 1 << i || k >= hl {
        return Err(Error::IndexOutOfRange(format!(
            "block {j}, butterfly {k} at stage {i}"
        )));
    }
    let k0 = j * 2 * hl + k;
    Ok(ButterflyAddr {
        k0,
        k1: k0 + hl,
        widx: bit_reverse(j, log_n as u32 - 1)?,
    })
}

pub(crate) fn addr_of(ordinal: usize, n: usize) -> ButterflyAddr {
    let li = LoopIndex::from_ordinal(ordinal, n);
    addr_gen(li.stage, li.block, li.k, li.hl, n).expect("ordinal within transform")
}

/// One Cooley-Tukey butterfly: `v = a_k1·w`, returns `(u + v, u - v)` mod q.
pub fn butterfly(u: u32, a_k1: u32, w: u32, p: &NttParams) -> (u32, u32) {
    let v = p.barrett().mul(a_k1, w);
    (add_mod(u, v, p.q()), sub_mod(u, v, p.q()))
}

/// Forward transform. Output is in the loop's natural (bit-reversed) order:
/// `out[t] = a(omega^bit_reverse(t))`.
pub fn ntt_behavioral(a: &Polynomial, p: &NttParams) -> Result<Polynomial> {
    a.validate(p)?;
    let tw = TwiddleTable::new(p);
    let n = p.n();
    let mut coeffs = a.coeffs.clone();
    let mut hl = n / 2;
    for i in 0..p.log_n() as usize {
        for j in 0..1usize << i {
            for k in 0..hl {
                let addr = addr_gen(i, j, k, hl, n)?;
                let (s, d) = butterfly(coeffs[addr.k0], coeffs[addr.k1], tw.get(addr.widx), p);
                coeffs[addr.k0] = s;
                coeffs[addr.k1] = d;
            }
        }
        hl /= 2;
    }
    Ok(Polynomial { coeffs })
}

/// Inverse of [`ntt_behavioral`]: Gentleman-Sande butterflies with the
/// inverse twiddles, stages in reverse, then scaling by n^-1.
pub fn intt_behavioral(abar: &Polynomial, p: &NttParams) -> Result<Polynomial> {
    abar.validate(p)?;
    let tw = TwiddleTable::new(p);
    let b = p.barrett();
    let n = p.n();
    let q = p.q();
    let mut coeffs = abar.coeffs.clone();
    for i in (0..p.log_n() as usize).rev() {
        let hl = n >> (i + 1);
        for j in 0..1usize << i {
            for k in 0..hl {
                let addr = addr_gen(i, j, k, hl, n)?;
                let (x, y) = (coeffs[addr.k0], coeffs[addr.k1]);
                coeffs[addr.k0] = add_mod(x, y, q);
                coeffs[addr.k1] = b.mul(sub_mod(x, y, q), tw.inverse(addr.widx));
            }
        }
    }
    for c in &mut coeffs {
        *c = b.mul(*c, p.n_inv());
    }
    Ok(Polynomial { coeffs })
}

/// Reorder a transform output so that index `t` holds `a(omega^t)`.
pub fn to_natural_order(raw: &Polynomial, p: &NttParams) -> Polynomial {
    let bits = p.log_n();
    let mut coeffs = vec![0; raw.len()];
    for (t, &c) in raw.coeffs.iter().enumerate() {
        coeffs[bit_reverse(t, bits).expect("index < n")] = c;
    }
    Polynomial { coeffs }
}
