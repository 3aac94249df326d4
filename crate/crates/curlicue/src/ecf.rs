//! Even-continued-fraction dynamics: the shift map `T`, digits,
//! convergents, orbit products and cylinder intervals.
//!
//! `T` acts on (0,1] by `T(alpha) = xi * (1/alpha - 2k)` on the branch
//! `B(k, xi)`, where `B(k,-1) = (1/2k, 1/(2k-1)]` and
//! `B(k,+1) = (1/(2k+1), 1/2k]`. Everything here is exact: a rational
//! input produces a finite expansion terminating when the orbit hits 0.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{is_in_unit_interval, ln_rational, rat_to_f64, Rational};

/// One ECF digit `(k, xi)`. A terminal digit marks the end of a rational's
/// finite expansion (the orbit hits 0 right after it); its sign is unused
/// and normalized to 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EcfDigit {
    pub k: u64,
    pub xi: i8,
    pub terminal: bool,
}

impl EcfDigit {
    pub fn new(k: u64, xi: i8) -> Self {
        EcfDigit { k, xi, terminal: false }
    }

    pub fn terminal(k: u64) -> Self {
        EcfDigit { k, xi: 0, terminal: true }
    }
}

/// A finite chunk of the ECF expansion of `alpha`. `exhausted` is true
/// iff the full finite expansion of a rational was reached (the last
/// stored digit is then terminal).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcfExpansion {
    pub alpha: Rational,
    pub digits: Vec<EcfDigit>,
    pub exhausted: bool,
}

/// Convergent numerators/denominators `p_n`, `q_n` with the sign sequence
/// `xi` (`xi[0] = +1` by convention). Index `i` holds `p_i`, `q_i`; the
/// seeds `q_{-1} = p_0 = 0`, `p_{-1} = q_0 = 1` are implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergentSequence {
    pub p: Vec<BigInt>,
    pub q: Vec<BigInt>,
    pub xi: Vec<i8>,
}

impl ConvergentSequence {
    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// `p_{n+1} q_n - p_n q_{n+1}`, defined for `0 <= n < len - 1`.
    pub fn determinant(&self, n: usize) -> BigInt {
        &self.p[n + 1] * &self.q[n] - &self.p[n] * &self.q[n + 1]
    }
}

fn check_unit_domain(alpha: &Rational) -> Result<()> {
    if !is_in_unit_interval(alpha) {
        return Err(Error::Domain(format!(
            "alpha = {alpha} outside (0, 1]"
        )));
    }
    Ok(())
}

/// Branch label of `alpha` in the partition `{B(k, xi)}` of (0,1].
/// The returned digit carries `terminal = true` when `alpha = 1/(2k)`
/// exactly (the next `T` step gives 0); its `xi` is still the branch sign.
pub fn classify_branch(alpha: &Rational) -> Result<EcfDigit> {
    check_unit_domain(alpha)?;
    let p = alpha.numer();
    let q = alpha.denom();
    // n such that alpha is in (1/(n+1), 1/n]
    let (quot, rem) = q.div_rem(p);
    let n = if rem.is_zero() { quot } else { q.div_floor(p) };
    let n = n
        .to_u64()
        .ok_or_else(|| Error::Argument("ECF digit overflows u64".into()))?;
    let (k, xi) = if n % 2 == 0 { (n / 2, 1i8) } else { ((n + 1) / 2, -1i8) };
    let terminal = p.is_one() && n % 2 == 0;
    Ok(EcfDigit { k, xi, terminal })
}

/// One step of the ECF shift: `xi * (1/alpha - 2k)`, exactly.
pub fn apply_t(alpha: &Rational) -> Result<Rational> {
    let digit = classify_branch(alpha)?;
    let two_k = BigInt::from(2u64) * BigInt::from(digit.k);
    let inv = alpha.recip();
    let t = inv - Rational::from(two_k);
    Ok(if digit.xi < 0 { -t } else { t })
}

/// ECF digits along the `T`-orbit, stopping at the terminal digit or at
/// `max_digits`. Reconstructing the nested fraction recovers `alpha`
/// exactly (see [`reconstruct`]).
pub fn ecf_expand(alpha: &Rational, max_digits: usize) -> Result<EcfExpansion> {
    if max_digits == 0 {
        return Err(Error::Argument("max_digits must be positive".into()));
    }
    check_unit_domain(alpha)?;
    // Work on the raw coprime pair (p, q): with n = floor(q/p) and
    // r = q mod p, the digit is (n/2, +1) or ((n+1)/2, -1) by parity, and
    // T(p/q) is r/p (n even) or (p-r)/p (n odd). Both keep gcd = 1, so
    // the whole orbit runs on single divisions with no normalization.
    let mut p = alpha.numer().clone();
    let mut q = alpha.denom().clone();
    let mut digits = Vec::new();
    let mut exhausted = false;
    while digits.len() < max_digits {
        let (quot, rem) = q.div_rem(&p);
        let n = quot
            .to_u64()
            .ok_or_else(|| Error::Argument("ECF digit overflows u64".into()))?;
        if n % 2 == 0 {
            if rem.is_zero() {
                // alpha = 1/n exactly (coprimality forces p = 1)
                digits.push(EcfDigit::terminal(n / 2));
                exhausted = true;
                break;
            }
            digits.push(EcfDigit::new(n / 2, 1));
            q = std::mem::replace(&mut p, rem);
        } else {
            digits.push(EcfDigit::new((n + 1) / 2, -1));
            let next = &p - rem;
            q = std::mem::replace(&mut p, next);
        }
    }
    Ok(EcfExpansion { alpha: alpha.clone(), digits, exhausted })
}

/// Value of the nested fraction `[[digits..., tail]]`.
pub fn reconstruct_with_tail(digits: &[EcfDigit], tail: &Rational) -> Rational {
    let mut v = tail.clone();
    for d in digits.iter().rev() {
        let two_k = Rational::from(BigInt::from(2u64) * BigInt::from(d.k));
        let inner = if d.terminal {
            two_k
        } else {
            two_k + Rational::from(BigInt::from(d.xi)) * v
        };
        v = inner.recip();
    }
    v
}

/// Value of a fully terminal expansion (tail = 0).
pub fn reconstruct(digits: &[EcfDigit]) -> Rational {
    reconstruct_with_tail(digits, &Rational::zero())
}

/// Convergents `p_0..p_n`, `q_0..q_n` from the first `n` digits via
/// `p_j = 2 k_j p_{j-1} + xi_{j-1} p_{j-2}` (and likewise for `q`).
pub fn convergents_of_digits(digits: &[EcfDigit], n: usize) -> Result<ConvergentSequence> {
    if n > digits.len() {
        return Err(Error::Range(format!(
            "requested {n} convergents, only {} digits available",
            digits.len()
        )));
    }
    let mut p = vec![BigInt::zero()];
    let mut q = vec![BigInt::one()];
    let mut xi = vec![1i8];
    let (mut p_prev, mut q_prev) = (BigInt::one(), BigInt::zero()); // p_{-1}, q_{-1}
    for j in 1..=n {
        let d = &digits[j - 1];
        let two_k = BigInt::from(2u64) * BigInt::from(d.k);
        let s = BigInt::from(xi[j - 1]);
        let p_new = &two_k * &p[j - 1] + &s * &p_prev;
        let q_new = &two_k * &q[j - 1] + &s * &q_prev;
        p_prev = p[j - 1].clone();
        q_prev = q[j - 1].clone();
        p.push(p_new);
        q.push(q_new);
        xi.push(d.xi);
    }
    Ok(ConvergentSequence { p, q, xi })
}

/// Convergents of an expansion, checked against the expansion's value when
/// the full finite expansion is consumed.
pub fn convergents(exp: &EcfExpansion, n: usize) -> Result<ConvergentSequence> {
    let seq = convergents_of_digits(&exp.digits, n)?;
    if exp.exhausted && n == exp.digits.len() && n > 0 {
        let value = Rational::new(seq.p[n].clone(), seq.q[n].clone());
        if value != exp.alpha {
            return Err(Error::InvariantViolation(format!(
                "full convergent {value} != alpha {}",
                exp.alpha
            )));
        }
    }
    Ok(seq)
}

/// `alpha_0 * alpha_1 * ... * alpha_{n-1}` along the `T`-orbit, exactly.
/// Cross-checked against `(q_n (1 + xi_n alpha_n q_{n-1}/q_n))^{-1}`.
pub fn orbit_product(exp: &EcfExpansion, n: usize) -> Result<Rational> {
    if n > exp.digits.len() {
        return Err(Error::Range(format!(
            "orbit product through step {n} needs {n} digits, have {}",
            exp.digits.len()
        )));
    }
    let mut product = Rational::one();
    let mut x = exp.alpha.clone();
    for j in 0..n {
        product *= &x;
        let terminal = exp.digits[j].terminal;
        x = if terminal { Rational::zero() } else { apply_t(&x)? };
    }
    // Cross-check via the denominator formula whenever alpha_n and xi_n
    // exist (alpha_n = 0 at a terminal step still satisfies it).
    if n > 0 {
        let seq = convergents_of_digits(&exp.digits, n)?;
        let xi_n = BigInt::from(if exp.digits[n - 1].terminal { 0 } else { seq.xi[n] });
        let rhs = Rational::from(seq.q[n].clone())
            + Rational::from(xi_n * &seq.q[n - 1]) * &x;
        if rhs.recip() != product {
            return Err(Error::InvariantViolation(
                "orbit product disagrees with denominator formula".into(),
            ));
        }
    }
    Ok(product)
}

/// `mu_T((a,b))` from the closed-form antiderivative of
/// `1/(alpha+1) - 1/(alpha-1)`.
pub fn mu_t_interval(a: &Rational, b: &Rational) -> Result<f64> {
    if a >= b {
        return Err(Error::Argument(format!("need a < b, got {a} >= {b}")));
    }
    if !a.is_positive() {
        return Err(Error::Domain("a must be positive".into()));
    }
    if *b >= Rational::one() {
        return Err(Error::Domain(
            "mu_T((a,b)) with b >= 1 is infinite".into(),
        ));
    }
    let one = Rational::one();
    let first = (&one + b) / (&one + a);
    let second = (&one - a) / (&one - b);
    Ok(rat_to_f64(&first).ln() + rat_to_f64(&second).ln())
}

/// `-log(alpha_0 ... alpha_{n-1}) * log(n) / n`, the Birkhoff statistic
/// whose in-probability limit is `pi^2 / 4`.
pub fn birkhoff_log_statistic(exp: &EcfExpansion, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Argument("need n >= 2".into()));
    }
    let product = orbit_product(exp, n)?;
    if product.is_zero() {
        return Err(Error::Exhausted("orbit hit 0 before step n".into()));
    }
    Ok(-ln_rational(&product) * (n as f64).ln() / n as f64)
}

/// Exact endpoints of the cylinder `{alpha : first digits = prefix}`,
/// sorted. The cylinder is the image of the tail range [0,1) under the
/// Moebius map of the prefix, so its endpoints are `p_L/q_L` and
/// `(p_L + xi_L p_{L-1}) / (q_L + xi_L q_{L-1})`.
pub fn cylinder_interval(prefix: &[EcfDigit]) -> Result<(Rational, Rational)> {
    if prefix.is_empty() {
        return Err(Error::Argument("empty cylinder prefix".into()));
    }
    if prefix.iter().any(|d| d.terminal || d.xi == 0 || d.k == 0) {
        return Err(Error::Argument(
            "cylinder prefix must consist of non-terminal digits".into(),
        ));
    }
    let n = prefix.len();
    let seq = convergents_of_digits(prefix, n)?;
    let xi_n = BigInt::from(seq.xi[n]);
    let a = Rational::new(seq.p[n].clone(), seq.q[n].clone());
    let b = Rational::new(
        &seq.p[n] + &xi_n * &seq.p[n - 1],
        &seq.q[n] + &xi_n * &seq.q[n - 1],
    );
    Ok(if a < b { (a, b) } else { (b, a) })
}

/// Exact length of a cylinder interval: `1 / (q_L (q_L + xi_L q_{L-1}))`.
pub fn cylinder_length(prefix: &[EcfDigit]) -> Result<Rational> {
    let (a, b) = cylinder_interval(prefix)?;
    Ok(b - a)
}
