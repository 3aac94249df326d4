//! Minimal fixed-point arithmetic on `BigUint` mantissas.
//!
//! Values are unsigned reals stored as `m / 2^prec`. Only what the
//! inverse-CDF sampler needs is provided: multiplication, `ln 3`, `exp`
//! on [0, ~1.1] and `3^u` for u in (0, 1).

use num_bigint::BigUint;
use num_traits::{One, Zero};

/// Fixed-point product: floor(a * b / 2^prec).
pub fn mul_fp(a: &BigUint, b: &BigUint, prec: u32) -> BigUint {
    (a * b) >> prec as usize
}

/// `ln 3` to `prec` fractional bits, from ln 3 = 2 atanh(1/2)
/// = sum_{k>=0} 4^{-k} / (2k+1).
pub fn ln3_fp(prec: u32) -> BigUint {
    let mut acc = BigUint::zero();
    let mut k = 0u64;
    loop {
        let shift = 2 * k as usize;
        if shift >= prec as usize + 2 {
            break;
        }
        let term = (BigUint::one() << prec as usize >> shift) / BigUint::from(2 * k + 1);
        if term.is_zero() {
            break;
        }
        acc += term;
        k += 1;
    }
    acc
}

/// `exp(x)` for fixed-point x (intended range [0, ~1.2]), by the Taylor
/// series with fixed-point terms. Error is a few ulps at `prec`.
pub fn exp_fp(x: &BigUint, prec: u32) -> BigUint {
    let one = BigUint::one() << prec as usize;
    let mut term = one.clone();
    let mut acc = one;
    let mut n = 1u64;
    while !term.is_zero() {
        term = mul_fp(&term, x, prec) / BigUint::from(n);
        acc += &term;
        n += 1;
        assert!(n < 10_000, "exp series failed to converge");
    }
    acc
}

/// `3^u` for `u = u_mantissa / 2^prec` in (0, 1).
pub fn pow3_fp(u: &BigUint, prec: u32) -> BigUint {
    let x = mul_fp(u, &ln3_fp(prec), prec);
    exp_fp(&x, prec)
}
