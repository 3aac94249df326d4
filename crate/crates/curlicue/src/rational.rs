//! Exact rational arithmetic helpers.
//!
//! `Rational` is the sole representation of the dynamical variable alpha:
//! every orbit, digit and convergent is derived from it exactly.

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Arbitrary-precision reduced fraction. `BigRational` keeps the value
/// reduced with a positive denominator, which is exactly the invariant
/// the dynamics needs.
pub type Rational = BigRational;

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_to_f64(x: &Rational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Exact dyadic value of a finite double. Every non-NaN, finite `f64`
/// is a rational with a power-of-two denominator.
pub fn dyadic_from_f64(x: f64) -> Result<Rational> {
    if !x.is_finite() {
        return Err(Error::Argument(format!("not a finite number: {x}")));
    }
    Ok(BigRational::from_float(x).expect("finite f64 is rational"))
}

/// Dyadic rational `mantissa / 2^bits`.
pub fn dyadic(mantissa: BigUint, bits: u32) -> Rational {
    Rational::new(
        BigInt::from_biguint(Sign::Plus, mantissa),
        BigInt::one() << bits as usize,
    )
}

/// Parses "p/q", an integer, or a decimal string into an exact rational.
/// Decimal inputs convert to their exact value (a dyadic-free base-10
/// fraction), so "0.1" means exactly 1/10.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Argument("empty rational literal".into()));
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num
            .trim()
            .parse()
            .map_err(|_| Error::Argument(format!("bad numerator in {s:?}")))?;
        let d: BigInt = den
            .trim()
            .parse()
            .map_err(|_| Error::Argument(format!("bad denominator in {s:?}")))?;
        if d.is_zero() {
            return Err(Error::Argument("zero denominator".into()));
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        let digits = format!(
            "{}{}",
            if int_part.is_empty() || int_part == "-" { "0" } else { int_part },
            frac_part
        );
        let neg = int_part.starts_with('-');
        let mantissa: BigInt = digits
            .parse()
            .map_err(|_| Error::Argument(format!("bad decimal literal {s:?}")))?;
        let scale = BigInt::from(10u32).pow(frac_part.len() as u32);
        let v = Rational::new(mantissa, scale);
        return Ok(if neg && !v.is_negative() { -v } else { v });
    }
    let n: BigInt = s
        .parse()
        .map_err(|_| Error::Argument(format!("bad rational literal {s:?}")))?;
    Ok(Rational::from(n))
}

/// Floor of a nonnegative rational as u64, with an explicit cap.
pub fn floor_u64_capped(x: &Rational, cap: u64) -> Result<u64> {
    if x.is_negative() {
        return Err(Error::Domain("negative length".into()));
    }
    let fl = x.floor().to_integer();
    match fl.to_u64() {
        Some(v) if v <= cap => Ok(v),
        _ => Err(Error::Budget(format!(
            "floor {fl} exceeds term budget {cap}"
        ))),
    }
}

pub fn is_in_unit_interval(x: &Rational) -> bool {
    x.is_positive() && *x <= Rational::one()
}

/// Natural log of a positive `BigInt`, accurate to f64 precision even when
/// the integer itself overflows f64.
pub fn ln_bigint(x: &BigInt) -> f64 {
    assert!(x.is_positive(), "ln of non-positive integer");
    let bits = x.bits();
    if bits <= 53 {
        return x.to_f64().unwrap().ln();
    }
    // keep the top 53 bits, account for the discarded shift
    let shift = bits - 53;
    let top = (x >> shift).to_f64().unwrap();
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Natural log of a positive rational, safe against f64 overflow/underflow
/// of the numerator or denominator.
pub fn ln_rational(x: &Rational) -> f64 {
    assert!(x.is_positive(), "ln of non-positive rational");
    ln_bigint(x.numer()) - ln_bigint(x.denom())
}
