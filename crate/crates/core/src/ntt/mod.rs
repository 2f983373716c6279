//! Modular arithmetic and the golden behavioral transform.

pub mod arith;
pub mod params;
pub mod transform;

pub use arith::{Barrett, COEFF_BITS};
pub use params::{find_primitive_root, NttParams};
pub use transform::{
    addr_gen, bit_reverse, butterfly, intt_behavioral, ntt_behavioral, to_natural_order,
    ButterflyAddr, LoopIndex, Polynomial, TwiddleTable,
};
