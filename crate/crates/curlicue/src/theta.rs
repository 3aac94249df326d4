//! Direct theta-sum evaluation with exact phase reduction, the polygonal
//! curve and its level-zero curl geometry, and the renormalization
//! remainders Lambda and Gamma.
//!
//! The sum is S(alpha, L) = sum_{n < floor(L)} e^{i pi n^2 alpha}
//! + {L} e^{i pi floor(L)^2 alpha}. All phases n^2 p/q are reduced mod 2q
//! in integer arithmetic before any float conversion, so the per-term
//! phase error stays at the ulp level no matter how large n gets. The
//! quadratic phase increments are maintained incrementally
//! (r += d, d += 2p), which keeps the fast path to two modular adds and
//! one sincos per term.

use num_bigint::{BigInt, BigUint};
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::f64::consts::{FRAC_PI_4, PI};

use crate::ecf::{apply_t, classify_branch};
use crate::error::{Error, Result};
use crate::rational::{floor_u64_capped, rat_to_f64, Rational};

/// Default cap on the number of directly summed terms.
pub const DEFAULT_TERM_BUDGET: u64 = 1_000_000_000;

/// `z` or its conjugate, depending on the sign `eta`.
pub fn conj_pow(z: Complex64, eta: i8) -> Complex64 {
    if eta >= 0 {
        z
    } else {
        z.conj()
    }
}

/// e^{i pi/4}.
pub fn e_pi_i_4() -> Complex64 {
    Complex64::from_polar(1.0, FRAC_PI_4)
}

enum PhaseWalker {
    // all quantities < 2q fit in u128 words
    Small { r: u128, d: u128, step: u128, modulus: u128, q: f64 },
    Big { r: BigUint, d: BigUint, step: BigUint, modulus: BigUint, q: f64 },
}

impl PhaseWalker {
    /// Prepares the walk of n^2 p mod 2q for n = 0, 1, 2, ...
    fn new(alpha: &Rational) -> PhaseWalker {
        let q = alpha.denom().to_biguint().expect("positive denominator");
        let two_q = &q << 1usize;
        let p = alpha
            .numer()
            .mod_floor(&BigInt::from(two_q.clone()))
            .to_biguint()
            .expect("mod_floor is nonnegative");
        let q_f = q.to_f64().expect("finite");
        if let (Some(p64), Some(m)) = (p.to_u64(), two_q.to_u64()) {
            let modulus = m as u128;
            PhaseWalker::Small {
                r: 0,
                d: p64 as u128,
                step: (2 * p64 as u128) % modulus,
                modulus,
                q: q_f,
            }
        } else {
            let step = (&p << 1usize) % &two_q;
            PhaseWalker::Big { r: BigUint::zero(), d: p, step, modulus: two_q, q: q_f }
        }
    }

    /// Phase pi * n^2 p / q for the current n, then advances to n+1.
    fn next_phase(&mut self) -> f64 {
        match self {
            PhaseWalker::Small { r, d, step, modulus, q } => {
                let phase = PI * (*r as f64) / *q;
                *r += *d;
                if *r >= *modulus {
                    *r -= *modulus;
                }
                *d += *step;
                if *d >= *modulus {
                    *d -= *modulus;
                }
                phase
            }
            PhaseWalker::Big { r, d, step, modulus, q } => {
                let phase = PI * r.to_f64().unwrap_or(0.0) / *q;
                *r += &*d;
                if *r >= *modulus {
                    *r -= &*modulus;
                }
                *d += &*step;
                if *d >= *modulus {
                    *d -= &*modulus;
                }
                phase
            }
        }
    }
}

/// S(alpha, L) with the default term budget.
pub fn theta_sum(alpha: &Rational, l: &Rational) -> Result<Complex64> {
    theta_sum_with_budget(alpha, l, DEFAULT_TERM_BUDGET)
}

/// S(alpha, L) summing at most `budget` terms.
pub fn theta_sum_with_budget(alpha: &Rational, l: &Rational, budget: u64) -> Result<Complex64> {
    if l.is_negative() {
        return Err(Error::Domain(format!("negative length L = {l}")));
    }
    let floor_l = floor_u64_capped(l, budget)?;
    let frac = l - Rational::from(BigInt::from(floor_l));
    let mut walker = PhaseWalker::new(alpha);
    let mut acc = Complex64::new(0.0, 0.0);
    for _ in 0..floor_l {
        let (s, c) = walker.next_phase().sin_cos();
        acc += Complex64::new(c, s);
    }
    if !frac.is_zero() {
        let (s, c) = walker.next_phase().sin_cos();
        acc += rat_to_f64(&frac) * Complex64::new(c, s);
    }
    Ok(acc)
}

/// S^{(eta)}(alpha, L): the sum or its conjugate.
pub fn theta_sum_conj(alpha: &Rational, l: &Rational, eta: i8) -> Result<Complex64> {
    Ok(conj_pow(theta_sum(alpha, l)?, eta))
}

/// Baseline that multiplies n^2 * alpha in double precision. Drifts for
/// large n; kept for benchmarks and for documenting the drift.
pub fn theta_sum_naive(alpha: &Rational, l: &Rational, budget: u64) -> Result<Complex64> {
    if l.is_negative() {
        return Err(Error::Domain(format!("negative length L = {l}")));
    }
    let floor_l = floor_u64_capped(l, budget)?;
    let frac = rat_to_f64(&(l - Rational::from(BigInt::from(floor_l))));
    let a = rat_to_f64(alpha);
    let mut acc = Complex64::new(0.0, 0.0);
    for n in 0..floor_l {
        let phase = PI * (n as f64) * (n as f64) * a;
        let (s, c) = phase.sin_cos();
        acc += Complex64::new(c, s);
    }
    if frac != 0.0 {
        let phase = PI * (floor_l as f64) * (floor_l as f64) * a;
        let (s, c) = phase.sin_cos();
        acc += frac * Complex64::new(c, s);
    }
    Ok(acc)
}

/// The normalized polygonal curve t -> N^{-1/2} S(alpha, tN) sampled at
/// the given times.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePath {
    pub alpha: Rational,
    pub n: u64,
    pub samples: Vec<(f64, Complex64)>,
}

/// Samples the curve at `ts` (subset of [0,1]) in one pass over n:
/// prefix sums are shared, so the cost is O(N + |ts|) regardless of how
/// many sample times there are.
pub fn curve_points(alpha: &Rational, n: u64, ts: &[f64]) -> Result<CurvePath> {
    if ts.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::Domain("sample times must lie in [0,1]".into()));
    }
    let mut order: Vec<usize> = (0..ts.len()).collect();
    order.sort_by(|&i, &j| ts[i].total_cmp(&ts[j]));
    if order.windows(2).any(|w| ts[w[0]] >= ts[w[1]]) {
        return Err(Error::Argument("sample times must be distinct".into()));
    }

    let scale = 1.0 / (n as f64).sqrt();
    let n_rat = Rational::from(BigInt::from(n));
    let mut walker = PhaseWalker::new(alpha);
    let mut prefix = Complex64::new(0.0, 0.0); // S(alpha, m) for current m
    let mut m = 0u64;
    let mut term = {
        let (s, c) = walker.next_phase().sin_cos();
        Complex64::new(c, s) // e^{i pi m^2 alpha} at m = 0
    };
    let mut samples = vec![(0.0, Complex64::new(0.0, 0.0)); ts.len()];
    for &i in &order {
        // exact L = t*N via the dyadic value of t
        let l = crate::rational::dyadic_from_f64(ts[i])? * &n_rat;
        let target = floor_u64_capped(&l, n)?;
        while m < target {
            prefix += term;
            m += 1;
            let (s, c) = walker.next_phase().sin_cos();
            term = Complex64::new(c, s);
        }
        let frac = rat_to_f64(&(&l - Rational::from(BigInt::from(m))));
        samples[i] = (ts[i], scale * (prefix + frac * term));
    }
    Ok(CurvePath { alpha: alpha.clone(), n, samples })
}

/// Discrete curvature radius rho(t) = (1/(2 sqrt N)) |csc(pi alpha (2tN-1)/2)|.
/// Returns +infinity at the flat times.
pub fn curvature_radius(alpha: &Rational, n: u64, t: f64) -> f64 {
    let a = rat_to_f64(alpha);
    let s = (PI * a * (2.0 * t * n as f64 - 1.0) / 2.0).sin();
    if s == 0.0 {
        f64::INFINITY
    } else {
        1.0 / (2.0 * (n as f64).sqrt() * s.abs())
    }
}

/// The level-zero partition of [0,1] into curl intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct CurlicueGeometry {
    pub k_star: i64,
    pub curl_times: Vec<f64>,
    pub flat_times: Vec<f64>,
    /// number of points m/N (0 <= m <= N) in I_0, ..., I_{k*+1}
    pub interval_counts: Vec<u64>,
}

fn ceil_to_i64(x: &Rational) -> i64 {
    x.ceil().to_integer().to_i64().expect("partition index fits i64")
}

/// Computes k*, the curl/flat times and the exact per-interval counts of
/// curve vertices. Counts come from the closed-form ceiling expressions
/// and are cross-checked against brute-force membership for N <= 10^4.
pub fn curl_partition(alpha: &Rational, n: u64) -> Result<CurlicueGeometry> {
    if n < 2 {
        return Err(Error::Argument("need N >= 2".into()));
    }
    if !crate::rational::is_in_unit_interval(alpha) {
        return Err(Error::Domain(format!("alpha = {alpha} outside (0,1]")));
    }
    let n_rat = Rational::from(BigInt::from(n));
    let half = Rational::new(BigInt::one(), BigInt::from(2));
    let k_star_rat = (alpha * &n_rat - (alpha + Rational::one()) * &half).floor();
    let k_star = k_star_rat.to_integer().to_i64().expect("k* fits i64");

    if k_star < 0 {
        // degenerate: a single interval holds all N+1 vertices
        return Ok(CurlicueGeometry {
            k_star,
            curl_times: vec![],
            flat_times: vec![],
            interval_counts: vec![n + 1],
        });
    }

    let a_n = alpha * &n_rat;
    let curl_times: Vec<f64> = (0..=k_star)
        .map(|k| rat_to_f64(&(Rational::new(BigInt::from(2 * k + 1), BigInt::from(2)) / &a_n + &half / &n_rat)))
        .collect();
    let flat_times: Vec<f64> = (0..=k_star)
        .map(|k| rat_to_f64(&(Rational::from(BigInt::from(k)) / &a_n + &half / &n_rat)))
        .collect();

    // counts per the ceiling formulas; the k-th cut is ceil((2k+1)/(2a) + 1/2)
    let cut = |k: i64| -> i64 {
        ceil_to_i64(&(Rational::new(BigInt::from(2 * k + 1), BigInt::from(2)) / alpha + &half))
    };
    let mut counts: Vec<i64> = Vec::with_capacity(k_star as usize + 2);
    counts.push(cut(0));
    for k in 1..=k_star {
        counts.push(cut(k) - cut(k - 1));
    }
    counts.push(n as i64 + 1 - cut(k_star));
    if counts.iter().any(|&c| c < 0) || counts.iter().sum::<i64>() != n as i64 + 1 {
        return Err(Error::InvariantViolation("curl counts do not partition".into()));
    }
    let counts: Vec<u64> = counts.into_iter().map(|c| c as u64).collect();

    if n <= 10_000 {
        // brute-force cross-check: membership of every vertex time m/N
        let taus: Vec<Rational> = (0..=k_star)
            .map(|k| {
                Rational::new(BigInt::from(2 * k + 1), BigInt::from(2)) / &a_n + &half / &n_rat
            })
            .collect();
        let mut brute = vec![0u64; k_star as usize + 2];
        let mut idx = 0usize; // first curl time strictly greater than t
        for m in 0..=n {
            let t = Rational::new(BigInt::from(m), BigInt::from(n));
            while idx < taus.len() && taus[idx] <= t {
                idx += 1;
            }
            brute[idx] += 1;
        }
        if brute != counts {
            return Err(Error::InvariantViolation(
                "curl counts disagree with brute-force membership".into(),
            ));
        }
    }

    Ok(CurlicueGeometry { k_star, curl_times, flat_times, interval_counts: counts })
}

/// The branch data needed by the remainders: alpha_1 = T(alpha) and
/// eta_1 = sgn U(alpha) = -xi_1. Errors out on a terminal step.
fn renorm_step(alpha: &Rational) -> Result<(Rational, i8)> {
    let digit = classify_branch(alpha)?;
    if digit.terminal {
        return Err(Error::Exhausted(format!("orbit of {alpha} terminates in one step")));
    }
    Ok((apply_t(alpha)?, -digit.xi))
}

/// Lambda(alpha, N) = S(alpha,N) - e^{i pi/4} alpha^{-1/2} S^{(eta)}(alpha_1, floor(alpha N)).
pub fn remainder_lambda(alpha: &Rational, n: u64) -> Result<Complex64> {
    let (alpha1, eta1) = renorm_step(alpha)?;
    let n_rat = Rational::from(BigInt::from(n));
    let direct = theta_sum(alpha, &n_rat)?;
    let n1_floor = (alpha * &n_rat).floor();
    let inner = theta_sum_conj(&alpha1, &n1_floor, eta1)?;
    Ok(direct - e_pi_i_4() * rat_to_f64(alpha).powf(-0.5) * inner)
}

/// Gamma(alpha, L) = S(alpha,L) - e^{i pi/4} alpha^{-1/2} S^{(eta)}(alpha_1, alpha L).
pub fn remainder_gamma(alpha: &Rational, l: &Rational) -> Result<Complex64> {
    let (alpha1, eta1) = renorm_step(alpha)?;
    let direct = theta_sum(alpha, l)?;
    let inner = theta_sum_conj(&alpha1, &(alpha * l), eta1)?;
    Ok(direct - e_pi_i_4() * rat_to_f64(alpha).powf(-0.5) * inner)
}

/// The pieces of the decomposition Gamma = Lambda + G1 +- e^{i pi/4} alpha^{-1/2} G2.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaDecomposition {
    pub gamma: Complex64,
    pub lambda: Complex64,
    pub g1: Complex64,
    pub g2: Complex64,
    pub h: f64,
    /// sign in front of the G2 term that makes the identity hold
    pub sign: i8,
    /// whether G2 had to be eta_1-conjugated for the identity to hold
    pub conjugated: bool,
}

/// Splits Gamma(alpha, L) into Lambda(alpha, floor L), the partial-term
/// correction G1 = {L} e^{i pi floor(L)^2 alpha}, and the two-case inner
/// correction G2. The sign (and eta-conjugation) of the G2 term is
/// resolved against the directly computed Gamma rather than taken from a
/// fixed convention.
pub fn gamma_decomposition(alpha: &Rational, l: &Rational) -> Result<GammaDecomposition> {
    let (alpha1, eta1) = renorm_step(alpha)?;
    let l_floor = l.floor();
    let floor_u = floor_u64_capped(&l_floor, DEFAULT_TERM_BUDGET)?;
    let gamma = remainder_gamma(alpha, l)?;
    let lambda = remainder_lambda(alpha, floor_u)?;

    let frac_l = l - &l_floor;
    // H = alpha {L} + {alpha floor L}, exactly
    let afl = alpha * &l_floor;
    let h_exact = alpha * &frac_l + (&afl - afl.floor());
    let h = rat_to_f64(&h_exact);

    let phase_of = |m: &Rational, a: &Rational| -> Complex64 {
        // e^{i pi m^2 a} with the phase reduced exactly
        let m_int = m.to_integer();
        let num = &m_int * &m_int * a.numer();
        let two_q = BigInt::from(2) * a.denom();
        let r = num.mod_floor(&two_q);
        let phase = PI * Rational::new(r, a.denom().clone()).to_f64().unwrap();
        Complex64::from_polar(1.0, phase)
    };

    let g1 = rat_to_f64(&frac_l) * phase_of(&l_floor, alpha);

    let al = alpha * l;
    let al_floor = al.floor();
    let g2 = if h_exact < Rational::one() {
        h * phase_of(&al_floor, &alpha1)
    } else {
        phase_of(&(&al_floor - Rational::one()), &alpha1)
            + (h - 1.0) * phase_of(&al_floor, &alpha1)
    };

    let coeff = e_pi_i_4() * rat_to_f64(alpha).powf(-0.5);
    let tol = 1e-9 * (1.0 + gamma.norm());
    for conjugated in [false, true] {
        let g2_used = if conjugated { conj_pow(g2, eta1) } else { g2 };
        for sign in [-1i8, 1] {
            let candidate = lambda + g1 + sign as f64 * coeff * g2_used;
            if (candidate - gamma).norm() <= tol {
                return Ok(GammaDecomposition { gamma, lambda, g1, g2, h, sign, conjugated });
            }
        }
    }
    Err(Error::InvariantViolation(
        "no sign/conjugation choice reproduces Gamma".into(),
    ))
}

/// CSV export of a curve: `t,re,im` rows.
pub fn curve_to_csv(path: &CurvePath) -> String {
    let mut out = String::from("t,re,im\n");
    for (t, z) in &path.samples {
        out.push_str(&format!("{t:.12},{:.12},{:.12}\n", z.re, z.im));
    }
    out
}

/// Deterministic SVG polyline of a curve, viewBox fitted to the path.
pub fn curve_to_svg(path: &CurvePath, size: u32) -> String {
    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, z) in &path.samples {
        min_x = min_x.min(z.re);
        max_x = max_x.max(z.re);
        min_y = min_y.min(z.im);
        max_y = max_y.max(z.im);
    }
    if !min_x.is_finite() {
        (min_x, max_x, min_y, max_y) = (0.0, 1.0, 0.0, 1.0);
    }
    let pad = 0.05 * ((max_x - min_x).max(max_y - min_y)).max(1e-9);
    let (w, h) = (max_x - min_x + 2.0 * pad, max_y - min_y + 2.0 * pad);
    let scale = size as f64 / w.max(h);
    let stroke = (1.0 / (path.n as f64).sqrt() * scale).max(0.25);
    let mut points = String::new();
    for (_, z) in &path.samples {
        // SVG y grows downward
        let x = (z.re - min_x + pad) * scale;
        let y = (max_y - z.im + pad) * scale;
        points.push_str(&format!("{x:.3},{y:.3} "));
    }
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {:.3} {:.3}\">\n\
         <polyline fill=\"none\" stroke=\"black\" stroke-width=\"{stroke:.3}\" points=\"{}\"/>\n\
         </svg>\n",
        w * scale,
        h * scale,
        points.trim_end()
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{parse_rational, rat};
    use crate::stream::{substream, uniform_mantissa};

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn theta_sum_examples() {
        let one = rat(1, 1);
        assert!(close(theta_sum(&rat(1, 3), &one).unwrap(), Complex64::new(1.0, 0.0), 1e-14));
        assert!(close(theta_sum(&rat(1, 1), &rat(4, 1)).unwrap(), Complex64::new(0.0, 0.0), 1e-14));
        assert!(close(theta_sum(&rat(1, 2), &rat(4, 1)).unwrap(), Complex64::new(2.0, 2.0), 1e-14));
        assert!(close(theta_sum(&rat(1, 2), &rat(0, 1)).unwrap(), Complex64::new(0.0, 0.0), 0.0));
        assert!(theta_sum(&rat(1, 2), &rat(-1, 1)).is_err());
    }

    #[test]
    fn fractional_term_interpolates() {
        // S(alpha, 3/2) = 1 + (1/2) e^{i pi alpha}
        let a = rat(1, 3);
        let want = Complex64::new(1.0, 0.0)
            + 0.5 * Complex64::from_polar(1.0, PI / 3.0);
        assert!(close(theta_sum(&a, &rat(3, 2)).unwrap(), want, 1e-14));
    }

    #[test]
    fn symmetries_period_two_and_conjugation() {
        let l = rat(37, 2);
        for (p, q) in [(5i64, 12i64), (3, 7), (13, 64)] {
            let a = rat(p, q);
            let s0 = theta_sum(&a, &l).unwrap();
            let s2 = theta_sum(&(a.clone() + rat(2, 1)), &l).unwrap();
            assert!(close(s0, s2, 1e-12));
            let sm = theta_sum(&(-a), &l).unwrap();
            assert!(close(sm, s0.conj(), 1e-12));
        }
    }

    #[test]
    fn budget_guard() {
        match theta_sum_with_budget(&rat(1, 3), &rat(1_000_000, 1), 1000) {
            Err(Error::Budget(_)) => {}
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn big_denominator_path_matches_small() {
        // same value computed through the u128 path and the big path:
        // alpha + 2 has the same sum and, with a denominator > 2^64 that
        // reduces to the same phase sequence, exercises both branches
        let a_small = rat(7, 16);
        let huge = Rational::new(
            BigInt::from(7) * (BigInt::one() << 80) + BigInt::from(7 * 2) * (BigInt::one() << 76),
            BigInt::from(16) * (BigInt::one() << 80) + BigInt::from(32) * (BigInt::one() << 76),
        );
        // huge == 7/16 exactly after reduction; force the big path instead
        // with a genuinely large denominator close to it
        assert_eq!(huge, a_small);
        let big = Rational::new(
            (BigInt::one() << 70) + BigInt::one(),
            (BigInt::one() << 71) + BigInt::from(3),
        );
        let l = rat(500, 1);
        let via_big = theta_sum(&big, &l).unwrap();
        // oracle: naive summation is still usable for n <= 500, but its
        // rounded alpha costs ~1e-11 of phase per term, so compare loosely
        let naive = theta_sum_naive(&big, &l, DEFAULT_TERM_BUDGET).unwrap();
        assert!(close(via_big, naive, 1e-6));
    }

    #[test]
    fn exact_reduction_differs_from_naive_at_scale() {
        // documented drift: for n ~ 1e6 and a ~2^80 denominator, the
        // naive phase loses the low bits entirely
        let a = Rational::new((BigInt::one() << 79) + BigInt::from(123_456_789), BigInt::one() << 80);
        let l = rat(1_000_000, 1);
        let exact = theta_sum(&a, &l).unwrap();
        let naive = theta_sum_naive(&a, &l, DEFAULT_TERM_BUDGET).unwrap();
        assert!((exact - naive).norm() > 1e-3);
    }

    #[test]
    fn curve_points_share_prefixes() {
        let a = rat(5, 12);
        let n = 240;
        let ts: Vec<f64> = (0..=n).map(|m| m as f64 / n as f64).collect();
        let path = curve_points(&a, n as u64, &ts).unwrap();
        assert_eq!(path.samples[0].1, Complex64::new(0.0, 0.0));
        // vertex spacing N^{-1/2}
        let spacing = 1.0 / (n as f64).sqrt();
        for w in path.samples.windows(2) {
            let d = (w[1].1 - w[0].1).norm();
            assert!((d - spacing).abs() < 1e-12);
        }
        // matches independent theta_sum calls
        for &(t, z) in &path.samples[..20] {
            let l = crate::rational::dyadic_from_f64(t).unwrap() * rat(n, 1);
            let direct = theta_sum(&a, &l).unwrap() * spacing;
            assert!(close(z, direct, 1e-12));
        }
    }

    #[test]
    fn scaling_property() {
        // N^{-1/2} S(alpha, lambda t N) = lambda^{1/2} (lambda N)^{-1/2} S(alpha, t lambda N)
        let a = rat(3, 7);
        let n = 600u64;
        let lam = rat(1, 3); // lambda N = 200 integer
        let t = 0.4375f64; // dyadic
        let l = crate::rational::dyadic_from_f64(t).unwrap() * rat(200, 1);
        let lhs = theta_sum(&a, &l).unwrap() / (n as f64).sqrt();
        let rhs = rat_to_f64(&lam).sqrt() * theta_sum(&a, &l).unwrap() / 200f64.sqrt();
        assert!(close(lhs, rhs, 1e-13));
    }

    #[test]
    fn curvature_examples() {
        // at curl times the radius is 1/(2 sqrt N)
        let a = rat(1, 3);
        let n = 100u64;
        let geom = curl_partition(&a, n).unwrap();
        for &t in &geom.curl_times {
            let r = curvature_radius(&a, n, t);
            assert!((r - 0.05).abs() < 1e-9, "t = {t}, r = {r}");
        }
        let r = curvature_radius(&rat(1, 2), 4, 0.25);
        assert!((r - 2f64.sqrt() / 4.0).abs() < 1e-12);
        assert!(curvature_radius(&rat(1, 2), 4, 0.125).is_infinite());
    }

    #[test]
    fn curvature_matches_circumradius() {
        let a = rat(3, 11);
        let n = 50u64;
        // circumradius of three consecutive vertices around an interior n0;
        // equal chords 1/sqrt(N) with turning angle pi alpha (2 n0 - 1)
        // between them lie on a circle of radius rho(n0/N)
        for n0 in [3u64, 11, 23] {
            let t = n0 as f64 / n as f64;
            let ts: Vec<f64> = (n0 - 1..=n0 + 1).map(|m| m as f64 / n as f64).collect();
            let path = curve_points(&a, n, &ts).unwrap();
            let (p1, p2, p3) =
                (path.samples[0].1, path.samples[1].1, path.samples[2].1);
            let (la, lb, lc) = ((p2 - p3).norm(), (p1 - p3).norm(), (p1 - p2).norm());
            let s = (la + lb + lc) / 2.0;
            let area = (s * (s - la) * (s - lb) * (s - lc)).max(0.0).sqrt();
            let circum = la * lb * lc / (4.0 * area);
            let rho = curvature_radius(&a, n, t);
            assert!(
                (circum - rho).abs() <= 1e-10 * (1.0 + rho),
                "n0 = {n0}: circumradius {circum} vs rho {rho}"
            );
        }
    }

    #[test]
    fn curl_partition_examples() {
        let g = curl_partition(&rat(1, 2), 10).unwrap();
        assert_eq!(g.k_star, 4);
        assert_eq!(g.interval_counts.iter().sum::<u64>(), 11);

        // brute-force check built in for small N fires on many inputs
        let mut rng = substream(9, 0);
        for _ in 0..50 {
            let m = uniform_mantissa(&mut rng, 20);
            let a = Rational::new(BigInt::from(m), BigInt::one() << 20);
            if a.is_zero() || a > Rational::one() {
                continue;
            }
            let n = 2 + (uniform_mantissa(&mut rng, 10).to_u64().unwrap_or(0) % 500);
            let g = curl_partition(&a, n).unwrap();
            assert_eq!(g.interval_counts.iter().sum::<u64>(), n + 1);
        }
    }

    #[test]
    fn middle_counts_near_inverse_alpha() {
        let mut rng = substream(10, 0);
        for _ in 0..200 {
            let m = uniform_mantissa(&mut rng, 16);
            let a = Rational::new(BigInt::from(m), BigInt::one() << 16);
            if a.is_zero() || a > Rational::one() {
                continue;
            }
            let n = 2 + (uniform_mantissa(&mut rng, 12).to_u64().unwrap_or(0) % 2000);
            let g = curl_partition(&a, n).unwrap();
            if g.k_star < 2 {
                continue;
            }
            let inv = rat_to_f64(&a).recip().ceil() as i64;
            for k in 1..g.k_star as usize {
                let c = g.interval_counts[k] as i64;
                assert!(
                    (c - inv).abs() <= 1,
                    "alpha = {a}, count {c} vs ceil(1/alpha) = {inv}"
                );
            }
        }
    }

    #[test]
    fn lambda_examples() {
        // N = 0: both sums empty
        let l0 = remainder_lambda(&rat(5, 12), 0).unwrap();
        assert!(close(l0, Complex64::new(0.0, 0.0), 1e-15));
        // definitional oracle
        let a = rat(5, 12);
        let lam = remainder_lambda(&a, 12).unwrap();
        let direct = theta_sum(&a, &rat(12, 1)).unwrap();
        let inner = theta_sum_conj(&rat(2, 5), &rat(5, 1), -1).unwrap();
        let want = direct - e_pi_i_4() * rat_to_f64(&a).powf(-0.5) * inner;
        assert!(close(lam, want, 1e-14));
        // terminal orbit refuses
        assert!(remainder_lambda(&rat(1, 2), 5).is_err());
    }

    #[test]
    fn one_step_renormalization_identity() {
        // S(alpha, tN) = e^{i pi/4} alpha^{-1/2} S^{(eta)}(alpha_1, t alpha N) + Gamma
        let mut rng = substream(21, 0);
        for _ in 0..200 {
            let m = uniform_mantissa(&mut rng, 24);
            let a = Rational::new(BigInt::from(m), BigInt::one() << 24);
            if a.is_zero() || a >= Rational::one() {
                continue;
            }
            let digit = classify_branch(&a).unwrap();
            if digit.terminal {
                continue;
            }
            let l = Rational::new(
                BigInt::from(uniform_mantissa(&mut rng, 16)),
                BigInt::from(64),
            );
            let (a1, eta1) = (apply_t(&a).unwrap(), -digit.xi);
            let lhs = theta_sum(&a, &l).unwrap();
            let rhs = e_pi_i_4()
                * rat_to_f64(&a).powf(-0.5)
                * theta_sum_conj(&a1, &(&a * &l), eta1).unwrap()
                + remainder_gamma(&a, &l).unwrap();
            assert!(close(lhs, rhs, 1e-9 * (1.0 + lhs.norm())), "alpha = {a}");
        }
    }

    #[test]
    fn gamma_decomposition_resolves() {
        let mut rng = substream(22, 0);
        let mut signs = std::collections::HashSet::new();
        for _ in 0..500 {
            let m = uniform_mantissa(&mut rng, 24);
            let a = Rational::new(BigInt::from(m), BigInt::one() << 24);
            if a.is_zero() || a >= Rational::one() {
                continue;
            }
            if classify_branch(&a).unwrap().terminal {
                continue;
            }
            let l = Rational::new(BigInt::from(uniform_mantissa(&mut rng, 18)), BigInt::from(96));
            let d = gamma_decomposition(&a, &l).unwrap();
            assert!((0.0..2.0).contains(&d.h), "H out of range: {}", d.h);
            signs.insert(d.sign);
        }
        // the resolved sign is stable across the whole sample
        assert_eq!(signs.len(), 1, "ambiguous sign resolution: {signs:?}");
    }

    #[test]
    fn gamma_decomposition_integer_l() {
        let d = gamma_decomposition(&rat(5, 12), &rat(7, 1)).unwrap();
        assert!(close(d.g1, Complex64::new(0.0, 0.0), 1e-15));
        assert!(d.h < 1.0);
    }

    #[test]
    fn csv_and_svg_exports() {
        let a = parse_rational("5/12").unwrap();
        let ts: Vec<f64> = (0..=24).map(|m| m as f64 / 24.0).collect();
        let path = curve_points(&a, 24, &ts).unwrap();
        let csv = curve_to_csv(&path);
        assert_eq!(csv.lines().count(), 26);
        let svg = curve_to_svg(&path, 800);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg, curve_to_svg(&path, 800)); // deterministic
    }
}
