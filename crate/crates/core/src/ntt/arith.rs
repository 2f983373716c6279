//! Modular arithmetic over Z_q for small NTT-friendly primes.

use crate::error::{Error, Result};

/// Coefficient width of `poly_mem` and `w_mem` words.
pub const COEFF_BITS: u32 = 12;

pub fn pow_mod(base: u32, mut exp: u64, q: u32) -> u32 {
    let q = q as u64;
    let mut acc = 1 % q;
    let mut b = base as u64 % q;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * b % q;
        }
        b = b * b % q;
        exp >>= 1;
    }
    acc as u32
}

/// Inverse modulo a prime via Fermat. Returns `None` for zero.
pub fn inv_mod(a: u32, q: u32) -> Option<u32> {
    if a.is_multiple_of(q) {
        return None;
    }
    Some(pow_mod(a, q as u64 - 2, q))
}

pub fn is_prime(q: u32) -> bool {
    if q < 2 {
        return false;
    }
    let mut d = 2u32;
    while (d as u64) * (d as u64) <= q as u64 {
        if q.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

#[inline]
pub fn add_mod(a: u32, b: u32, q: u32) -> u32 {
    let s = a + b;
    if s >= q {
        s - q
    } else {
        s
    }
}

#[inline]
pub fn sub_mod(a: u32, b: u32, q: u32) -> u32 {
    // add q first so the result stays in [0, q)
    let d = a + q - b;
    if d >= q {
        d - q
    } else {
        d
    }
}

/// Division-free reduction of products below q^2.
///
/// The reciprocal is `floor(2^(2w) / q)` with `w = max(12, bits(q))`, so
/// `q^2 < 2^(2w)` and the estimated quotient is off by at most one: a single
/// conditional subtraction finishes the job.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Barrett {
    q: u64,
    m: u64,
    shift: u32,
}

impl Barrett {
    pub fn new(q: u32) -> Self {
        let bits = 32 - q.leading_zeros();
        let w = bits.max(COEFF_BITS);
        let shift = 2 * w;
        Barrett {
            q: q as u64,
            m: (1u64 << shift) / q as u64,
            shift,
        }
    }

    pub fn modulus(&self) -> u32 {
        self.q as u32
    }

    pub fn constant(&self) -> u64 {
        self.m
    }

    /// Reduce `x`, rejecting inputs at or above q^2.
    pub fn try_reduce(&self, x: u64) -> Result<u32> {
        let bound = self.q * self.q;
        if x >= bound {
            return Err(Error::InputTooWide { x, bound });
        }
        Ok(self.reduce(x))
    }

    /// Reduce `x < q^2`. The bound is only checked in debug builds.
    #[inline]
    pub fn reduce(&self, x: u64) -> u32 {
        debug_assert!(x < self.q * self.q, "barrett input {x} too wide");
        let t = ((x as u128 * self.m as u128) >> self.shift) as u64;
        let mut r = x - t * self.q;
        if r >= self.q {
            r -= self.q;
        }
        r as u32
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        self.reduce(a as u64 * b as u64)
    }
}
