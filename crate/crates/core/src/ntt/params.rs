use serde::{Deserialize, Serialize};

use super::arith::{inv_mod, is_prime, pow_mod, Barrett};
use crate::error::{Error, Result};

/// Smallest `g` with `g^n = 1` and `g^(n/2) = -1 (mod q)`.
///
/// For a power-of-two `n` the second condition is what makes `g` a
/// *primitive* n-th root.
pub fn find_primitive_root(n: usize, q: u32) -> Result<u32> {
    if n == 0 || q < 3 || !(q as u64 - 1).is_multiple_of(n as u64) {
        return Err(Error::NoRoot { n, q });
    }
    let half = (n / 2) as u64;
    (2..q)
        .find(|&g| pow_mod(g, n as u64, q) == 1 && (n == 1 || pow_mod(g, half, q) == q - 1))
        .ok_or(Error::NoRoot { n, q })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct NttParams {
    n: usize,
    q: u32,
    omega: u32,
    omega_inv: u32,
    n_inv: u32,
    log_n: u32,
    barrett: Barrett,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    n: usize,
    q: u32,
    omega: u32,
}

impl TryFrom<RawParams> for NttParams {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        NttParams::with_root(r.n, r.q, r.omega)
    }
}

impl From<NttParams> for RawParams {
    fn from(p: NttParams) -> Self {
        RawParams {
            n: p.n,
            q: p.q,
            omega: p.omega,
        }
    }
}

impl NttParams {
    /// Parameters with the smallest primitive root.
    pub fn new(n: usize, q: u32) -> Result<Self> {
        Self::check_shape(n, q)?;
        let omega = find_primitive_root(n, q)?;
        Self::with_root(n, q, omega)
    }

    /// Parameters with a caller-chosen root, validated.
    pub fn with_root(n: usize, q: u32, omega: u32) -> Result<Self> {
        Self::check_shape(n, q)?;
        if omega >= q
            || pow_mod(omega, n as u64, q) != 1
            || pow_mod(omega, (n / 2) as u64, q) != q - 1
        {
            return Err(Error::InvalidParams(format!(
                "{omega} is not a primitive {n}-th root of unity mod {q}"
            )));
        }
        let omega_inv = inv_mod(omega, q).expect("root is nonzero");
        let n_inv = inv_mod((n as u64 % q as u64) as u32, q).expect("n < q");
        Ok(NttParams {
            n,
            q,
            omega,
            omega_inv,
            n_inv,
            log_n: n.trailing_zeros(),
            barrett: Barrett::new(q),
        })
    }

    /// n = 256, q = 3329, omega = 17.
    pub fn kyber() -> Self {
        Self::with_root(256, 3329, 17).expect("kyber parameters are valid")
    }

    fn check_shape(n: usize, q: u32) -> Result<()> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidParams(format!(
                "n = {n} is not a power of two >= 2"
            )));
        }
        if q < 3 || q.is_multiple_of(2) || !is_prime(q) {
            return Err(Error::InvalidParams(format!("q = {q} is not an odd prime")));
        }
        if q >= 1 << super::arith::COEFF_BITS {
            return Err(Error::InvalidParams(format!(
                "q = {q} does not fit a {}-bit coefficient word",
                super::arith::COEFF_BITS
            )));
        }
        if !(q as u64 - 1).is_multiple_of(n as u64) {
            return Err(Error::NoRoot { n, q });
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn q(&self) -> u32 {
        self.q
    }
    pub fn omega(&self) -> u32 {
        self.omega
    }
    pub fn omega_inv(&self) -> u32 {
        self.omega_inv
    }
    pub fn n_inv(&self) -> u32 {
        self.n_inv
    }
    pub fn log_n(&self) -> u32 {
        self.log_n
    }
    pub fn barrett(&self) -> &Barrett {
        &self.barrett
    }

    /// Butterflies in one full transform: (n/2)·log2(n).
    pub fn butterflies(&self) -> usize {
        self.n / 2 * self.log_n as usize
    }
}
