//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use secure_ntt::correction::{Corrector, PatcherTable, Policy, Weights};

pub fn pow(b: u64, mut e: u64, q: u64) -> u64 {
    let mut acc = 1 % q;
    let mut b = b % q;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % q;
        }
        b = b * b % q;
        e >>= 1;
    }
    acc
}

pub fn rev(mut v: usize, bits: u32) -> usize {
    let mut r = 0;
    for _ in 0..bits {
        r = (r << 1) | (v & 1);
        v >>= 1;
    }
    r
}

/// Evaluations of `a` at the powers of `omega`, listed in bit-reversed order.
pub fn eval_bitrev(a: &[u32], omega: u32, q: u32) -> Vec<u32> {
    let n = a.len();
    let bits = n.trailing_zeros();
    (0..n)
        .map(|i| {
            let x = pow(omega as u64, rev(i, bits) as u64, q as u64);
            let mut acc = 0u64;
            for &c in a.iter().rev() {
                acc = (acc * x + c as u64) % q as u64;
            }
            acc as u32
        })
        .collect()
}

/// Schoolbook cyclic convolution modulo x^n - 1.
pub fn cyclic_convolution(a: &[u32], b: &[u32], q: u32) -> Vec<u32> {
    let n = a.len();
    let mut c = vec![0u64; n];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            let k = (i + j) % n;
            c[k] = (c[k] + x as u64 * y as u64) % q as u64;
        }
    }
    c.into_iter().map(|x| x as u32).collect()
}

pub fn corrector(m: usize, policy: Policy) -> Corrector {
    Corrector::new(PatcherTable::new(m, Weights::default()).shared(), policy, 0).unwrap()
}
