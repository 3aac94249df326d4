//! The jump transformation `R = T^{tau+1}`, its symbolic coding, renewal
//! times, the invariant probability measure `mu_R`, inverse branches, the
//! Perron-Frobenius density and the phase chain.
//!
//! An ECF digit string is regrouped into entries `h . m^zeta`: a maximal
//! run of `h` copies of (1,-1) closed by a letter (m, zeta) != (1,-1).
//! One application of `R` shifts exactly one entry. The convergent
//! denominators sampled at the entry boundaries (`qhat`) grow at least
//! like 3^(n/3), which is what makes the renewal time against a target N
//! logarithmic in N.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use crate::ecf::{apply_t, convergents_of_digits, ecf_expand, EcfDigit, EcfExpansion};
use crate::error::{Error, Result};
use crate::hp::pow3_fp;
use crate::rational::{rat, Rational};
use crate::special::trigamma;

/// One entry `h . m^zeta` of the jump coding: `h` copies of (1,-1)
/// followed by the letter (m, zeta) != (1,-1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SigmaEntry {
    pub h: u64,
    pub m: u64,
    pub zeta: i8,
}

impl SigmaEntry {
    pub fn new(h: u64, m: u64, zeta: i8) -> Self {
        SigmaEntry { h, m, zeta }
    }

    pub fn is_admissible(&self) -> bool {
        self.m >= 1 && (self.zeta == 1 || self.zeta == -1) && !(self.m == 1 && self.zeta == -1)
    }

    /// The entry flattened back to its h+1 ECF digits.
    pub fn ecf_digits(&self) -> Vec<EcfDigit> {
        let mut d = vec![EcfDigit::new(1, -1); self.h as usize];
        d.push(EcfDigit::new(self.m, self.zeta));
        d
    }
}

// serialized as the triple [h, m, zeta]
impl Serialize for SigmaEntry {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(3))?;
        seq.serialize_element(&self.h)?;
        seq.serialize_element(&self.m)?;
        seq.serialize_element(&self.zeta)?;
        seq.end()
    }
}

impl<'de> Deserialize<'de> for SigmaEntry {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = SigmaEntry;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a [h, m, zeta] triple")
            }
            fn visit_seq<A: SeqAccess<'de>>(
                self,
                mut seq: A,
            ) -> std::result::Result<SigmaEntry, A::Error> {
                let h = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(0, &self))?;
                let m = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(1, &self))?;
                let zeta =
                    seq.next_element()?.ok_or_else(|| de::Error::invalid_length(2, &self))?;
                Ok(SigmaEntry { h, m, zeta })
            }
        }
        d.deserialize_seq(V)
    }
}

/// Jump coding of one alpha: entries, the ECF indices `nu` of entry
/// boundaries (nu[0] = 1) and the R-denominators `qhat[n] = q_{nu[n]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaCoding {
    pub entries: Vec<SigmaEntry>,
    pub nu: Vec<usize>,
    pub qhat: Vec<BigInt>,
    pub exhausted: bool,
}

impl SigmaCoding {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Accumulated conjugation sign and eighth-root phase index (x_n, y_n).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseState {
    pub x: i8,
    pub y: u8,
}

impl PhaseState {
    pub const START: PhaseState = PhaseState { x: 1, y: 0 };

    /// Advance by one entry: z = h - zeta mod 8, x *= -zeta,
    /// y += z * x_old mod 8.
    pub fn step(self, entry: &SigmaEntry) -> PhaseState {
        let z = (entry.h as i64 - entry.zeta as i64).rem_euclid(8) as u8;
        let y = (self.y as i64 + z as i64 * self.x as i64).rem_euclid(8) as u8;
        PhaseState { x: self.x * -entry.zeta, y }
    }
}

/// Everything observed at the renewal time n_hat: the denominator ratios
/// straddling N, an entry window and the phase state entering it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewalSnapshot {
    pub n_hat: usize,
    pub ratio_prev: f64,
    pub ratio_next: f64,
    pub window: Vec<SigmaEntry>,
    pub x: i8,
    pub y: u8,
    pub theta: Option<f64>,
}

/// tau(alpha) = min{j >= 0 : T^j(alpha) in (0, 1/2]}.
pub fn passage_time(alpha: &Rational) -> Result<u64> {
    let half = rat(1, 2);
    let mut x = alpha.clone();
    let mut j = 0u64;
    loop {
        if x <= half {
            if x.is_zero() {
                return Err(Error::Exhausted("orbit terminated before entering (0,1/2]".into()));
            }
            return Ok(j);
        }
        if x.is_one() {
            // indifferent fixed point: tau(1) is undefined
            return Err(Error::Domain("passage time diverges at alpha = 1".into()));
        }
        x = apply_t(&x)?;
        j += 1;
    }
}

/// The jump map R(alpha) = T^{tau(alpha)+1}(alpha), exactly.
pub fn apply_r(alpha: &Rational) -> Result<Rational> {
    let tau = passage_time(alpha)?;
    let mut x = alpha.clone();
    for _ in 0..=tau {
        x = apply_t(&x)?;
    }
    Ok(x)
}

/// Regroups an ECF expansion into jump-coding entries. A trailing
/// (1,-1)-run without a closing letter (including the terminal digit of a
/// rational) is dropped.
pub fn sigma_encode(exp: &EcfExpansion) -> Result<SigmaCoding> {
    let mut entries = Vec::new();
    let mut used = 0usize; // digits consumed by complete entries
    let mut h = 0u64;
    for (i, d) in exp.digits.iter().enumerate() {
        if d.terminal {
            break;
        }
        if d.k == 1 && d.xi == -1 {
            h += 1;
            continue;
        }
        entries.push(SigmaEntry { h, m: d.k, zeta: d.xi });
        h = 0;
        used = i + 1;
    }
    let mut nu = vec![1usize];
    for e in &entries {
        nu.push(nu.last().unwrap() + e.h as usize + 1);
    }
    debug_assert_eq!(*nu.last().unwrap(), used + 1);
    // qhat[n] = q_{nu[n]}; needs convergents one past the used digits
    let max_index = *nu.last().unwrap();
    let qhat = if max_index <= exp.digits.len() {
        let seq = convergents_of_digits(&exp.digits, max_index)?;
        nu.iter().map(|&v| seq.q[v].clone()).collect()
    } else {
        Vec::new() // not even q_1 available (no digits)
    };
    Ok(SigmaCoding { entries, nu, qhat, exhausted: exp.exhausted })
}

/// Expands alpha adaptively until `pred(coding)` holds or the expansion
/// is exhausted, returning the final coding either way.
pub fn encode_until<F>(alpha: &Rational, pred: F) -> Result<SigmaCoding>
where
    F: Fn(&SigmaCoding) -> bool,
{
    let mut max_digits = 64usize;
    loop {
        let exp = ecf_expand(alpha, max_digits)?;
        let coding = sigma_encode(&exp)?;
        if pred(&coding) || exp.exhausted {
            return Ok(coding);
        }
        if exp.digits.len() < max_digits {
            // hit the alpha = 1 tail or similar non-growing situation
            return Ok(coding);
        }
        max_digits = max_digits
            .checked_mul(2)
            .ok_or_else(|| Error::Budget("digit budget overflow".into()))?;
        if max_digits > 1 << 26 {
            return Err(Error::Budget("expansion exceeds 2^26 digits".into()));
        }
    }
}

/// First n >= 1 with qhat_n > N, within an already-computed coding.
pub fn renewal_index(coding: &SigmaCoding, n_target: &BigInt) -> Option<usize> {
    (1..coding.qhat.len()).find(|&n| coding.qhat[n] > *n_target)
}

/// Computes the renewal snapshot of alpha against N, with `n1` entries of
/// window before n_hat (inclusive bound) and `n2` after.
pub fn renewal_snapshot(
    alpha: &Rational,
    n_target: u64,
    n1: usize,
    n2: usize,
) -> Result<RenewalSnapshot> {
    let target = BigInt::from(n_target);
    let coding = encode_until(alpha, |c| {
        match renewal_index(c, &target) {
            Some(n_hat) => c.entries.len() >= n_hat + n2,
            None => false,
        }
    })?;
    let n_hat = renewal_index(&coding, &target).ok_or_else(|| {
        Error::DenominatorBudget(format!(
            "expansion exhausted before qhat exceeded {n_target}"
        ))
    })?;
    if coding.entries.len() < n_hat + n2 {
        return Err(Error::DenominatorBudget(format!(
            "expansion exhausted before {n2} post-renewal entries were available"
        )));
    }
    if n_hat < n1 {
        return Err(Error::Range(format!(
            "window wants {n1} entries before n_hat = {n_hat}"
        )));
    }
    let n_f64 = n_target.max(1) as f64;
    let ratio_prev = coding.qhat[n_hat - 1].to_f64().unwrap_or(f64::INFINITY) / n_f64;
    let ratio_next = coding.qhat[n_hat].to_f64().unwrap_or(f64::INFINITY) / n_f64;
    let mut phase = PhaseState::START;
    for e in &coding.entries[..n_hat - n1] {
        phase = phase.step(e);
    }
    Ok(RenewalSnapshot {
        n_hat,
        ratio_prev,
        ratio_next,
        window: coding.entries[n_hat - n1..n_hat + n2].to_vec(),
        x: phase.x,
        y: phase.y,
        theta: None,
    })
}

/// CDF of mu_R: (1/log 3) log(3(1+x)/(3-x)) on [0, 1].
pub fn mu_r_cdf(x: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&x));
    (3.0 * (1.0 + x) / (3.0 - x)).ln() / 3f64.ln()
}

/// Density of mu_R: (1/log 3)(1/(3-x) + 1/(1+x)).
pub fn mu_r_density(x: f64) -> f64 {
    (1.0 / (3.0 - x) + 1.0 / (1.0 + x)) / 3f64.ln()
}

/// Inverse-CDF sample of mu_R: x = 3(3^u - 1)/(3^u + 3), computed in
/// fixed point with 64 guard bits and rounded to a dyadic rational with
/// denominator 2^precision_bits.
pub fn sample_mu_r(u: &Rational, precision_bits: u32) -> Result<Rational> {
    if precision_bits < 32 {
        return Err(Error::Argument("precision_bits must be at least 32".into()));
    }
    if !u.is_positive() || *u >= Rational::one() {
        return Err(Error::Domain(format!("u = {u} outside (0,1)")));
    }
    let prec = precision_bits + 64;
    // u as a floor-rounded fixed-point mantissa
    let scaled = u * Rational::from(BigInt::one() << prec as usize);
    let u_fp = scaled
        .floor()
        .to_integer()
        .to_biguint()
        .expect("positive by construction");
    let t = pow3_fp(&u_fp, prec); // 3^u, fixed point
    let one_fp = BigInt::from(BigUint::one() << prec as usize);
    let t = BigInt::from(t);
    // x = 3(t - 1)/(t + 3) with t dyadic: exact rational arithmetic
    let x = Rational::new(3 * (&t - &one_fp), &t + 3 * &one_fp);
    // round to precision_bits bits, clamped inside (0, 1)
    let scale = BigInt::one() << precision_bits as usize;
    let mut mantissa = (x * Rational::from(scale.clone())).round().to_integer();
    if mantissa < BigInt::one() {
        mantissa = BigInt::one();
    }
    if mantissa >= scale {
        mantissa = &scale - 1;
    }
    Ok(Rational::new(mantissa, scale))
}

/// Exact endpoints of the rank-one cylinder J_1(h . m^zeta), sorted.
pub fn rank_one_cylinder(entry: &SigmaEntry) -> Result<(Rational, Rational)> {
    if !entry.is_admissible() {
        return Err(Error::Argument(format!("inadmissible entry {entry:?}")));
    }
    let (h, m) = (BigInt::from(entry.h), BigInt::from(entry.m));
    let (a, b) = if entry.zeta > 0 {
        // ((1+2mh)/(1+2m(h+1)), 1 + (1-2m)/(2m(h+1)-h)]
        let left = Rational::new(1 + 2 * &m * &h, 1 + 2 * &m * (&h + 1));
        let right =
            Rational::one() + Rational::new(1 - 2 * &m, 2 * &m * (&h + 1) - &h);
        (left, right)
    } else {
        // (1 + (1-2m)/(2m(h+1)-h), (1+2h(m-1))/(2m(h+1)-2h-1)]
        let left =
            Rational::one() + Rational::new(1 - 2 * &m, 2 * &m * (&h + 1) - &h);
        let right = Rational::new(
            1 + 2 * &h * (&m - 1),
            2 * &m * (&h + 1) - 2 * &h - 1,
        );
        (left, right)
    };
    Ok(if a < b { (a, b) } else { (b, a) })
}

/// The inverse branch (R|_{J_1(h.m^zeta)})^{-1}(x)
/// = (2hm - h + 1 +- hx) / (2hm + 2m - h +- (h+1)x).
pub fn inverse_branch(entry: &SigmaEntry, x: &Rational) -> Result<Rational> {
    if !entry.is_admissible() {
        return Err(Error::Argument(format!("inadmissible entry {entry:?}")));
    }
    let (h, m) = (BigInt::from(entry.h), BigInt::from(entry.m));
    let s = BigInt::from(entry.zeta);
    let num = Rational::from(2 * &h * &m - &h + 1) + Rational::from(&s * &h) * x;
    let den =
        Rational::from(2 * &h * &m + 2 * &m - &h) + Rational::from(&s * (&h + 1)) * x;
    Ok(num / den)
}

/// `|R'(y)|^{-1}` at y = inverse_branch(entry, x), as a function of x:
/// 1 / (2hm + 2m - h +- (h+1)x)^2.
pub fn inverse_branch_jacobian(entry: &SigmaEntry, x: f64) -> f64 {
    let (h, m) = (entry.h as f64, entry.m as f64);
    let den = 2.0 * h * m + 2.0 * m - h + entry.zeta as f64 * (h + 1.0) * x;
    1.0 / (den * den)
}

/// Partial sum and tail bound of the Perron-Frobenius density
/// `P(1)(x) = sum_h (1/(4(h+1)^2)) [psi'((h+2+(h+1)x)/(2h+2))
///                                  + psi'((3h+4-(h+1)x)/(2h+2))]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferDensity {
    pub value: f64,
    pub tail_bound: f64,
}

pub fn transfer_density(x: f64, h_max: usize) -> Result<TransferDensity> {
    if h_max < 1 {
        return Err(Error::Argument("h_max must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("x = {x} outside [0,1]")));
    }
    let mut value = 0.0;
    for h in 0..=h_max {
        let hf = h as f64;
        let d = 2.0 * hf + 2.0;
        let a = (hf + 2.0 + (hf + 1.0) * x) / d;
        let b = (3.0 * hf + 4.0 - (hf + 1.0) * x) / d;
        value += (trigamma(a) + trigamma(b)) / (4.0 * (hf + 1.0) * (hf + 1.0));
    }
    // both trigamma arguments stay >= 1/2, so each term is at most
    // 2 psi'(1/2) / (4(h+1)^2) and the tail telescopes against 1/(h+1)^2
    let psi_half = std::f64::consts::PI * std::f64::consts::PI / 2.0;
    let tail_bound = 2.0 * psi_half / 4.0 / (h_max as f64 + 1.0);
    Ok(TransferDensity { value, tail_bound })
}

/// Residual |(L phi_R)(x) - phi_R(x)| of the jump-map transfer operator
/// acting on the invariant density, with the branch sum over entries
/// (h, m, zeta) truncated at h <= block, m <= block and the two tails plus
/// the corner completed in closed form via trigamma (the branch images
/// converge to h/(h+1) as m grows and to 1 as h grows, so the density is
/// frozen at those limits in the tails; the resulting error is O(1/block^2)).
pub fn transfer_invariance_residual(x: f64, block: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("x = {x} outside [0,1]")));
    }
    if block < 8 {
        return Err(Error::Argument("block must be at least 8".into()));
    }
    let phi = mu_r_density;
    let phi_one = 1.0 / 3f64.ln();
    let mut lhs = 0.0;
    for zeta in [1.0f64, -1.0] {
        for h in 0..=block {
            let hf = h as f64;
            // finite block, admissibility excludes (m, zeta) = (1, -1)
            let m_start = if zeta < 0.0 { 2 } else { 1 };
            for m in m_start..=block {
                let mf = m as f64;
                let den = 2.0 * hf * mf + 2.0 * mf - hf + zeta * (hf + 1.0) * x;
                let y = (2.0 * hf * mf - hf + 1.0 + zeta * hf * x) / den;
                lhs += phi(y) / (den * den);
            }
            // m-tail: D = 2(h+1)m + c, image -> h/(h+1)
            let c = -hf + zeta * (hf + 1.0) * x;
            let scale = 2.0 * (hf + 1.0);
            lhs += phi(hf / (hf + 1.0)) / (scale * scale)
                * trigamma(block as f64 + 1.0 + c / scale);
        }
        for m in 1..=block {
            if zeta < 0.0 && m == 1 {
                continue;
            }
            let mf = m as f64;
            // h-tail: D = a h + b, image -> 1
            let a = 2.0 * mf - 1.0 + zeta * x;
            let b = 2.0 * mf + zeta * x;
            lhs += phi_one / (a * a) * trigamma(block as f64 + 1.0 + b / a);
        }
        // corner h > block, m > block: D ~ 2m(h+1)
        lhs += phi_one / 4.0
            * trigamma(block as f64 + 2.0)
            * trigamma(block as f64 + 1.0);
    }
    Ok((lhs - phi(x)).abs())
}

/// Phase state after the first n entries of a coding.
pub fn phase_state(coding: &SigmaCoding, n: usize) -> Result<PhaseState> {
    if n > coding.entries.len() {
        return Err(Error::Range(format!(
            "phase state at {n} with only {} entries",
            coding.entries.len()
        )));
    }
    let mut st = PhaseState::START;
    for e in &coding.entries[..n] {
        st = st.step(e);
    }
    Ok(st)
}

/// tau via the coding instead of the orbit: tau = h_1 only when alpha
/// starts above 1/2; otherwise 0. Used as a cross-check.
#[cfg(test)]
fn passage_time_via_coding(alpha: &Rational) -> Result<u64> {
    let half = rat(1, 2);
    if *alpha <= half {
        return Ok(0);
    }
    let exp = ecf_expand(alpha, 1 << 16)?;
    let coding = sigma_encode(&exp)?;
    coding
        .entries
        .first()
        .map(|e| e.h)
        .ok_or_else(|| Error::Exhausted("no complete entry".into()))
}
