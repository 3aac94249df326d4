//! Iterated renormalization of the theta-sum curve.
//!
//! One level of the ladder maps (alpha_l, N_l) to
//! (T(alpha_l), alpha_l N_l), accumulating a conjugation sign eta, a
//! phase counter kappa and the exact rational lengths N_l. Choosing the
//! depth r at the renewal time of the jump coding makes the innermost
//! length Theta = N_r order one, and the telescoped identity expresses
//! the full curve through r remainder terms. Truncating to the J coarsest
//! jump scales gives the fast evaluator `gamma_j`, whose cost depends on
//! the renewal window but not on N.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::One;
use std::f64::consts::FRAC_PI_4;

use crate::ecf::{apply_t, ecf_expand, EcfExpansion};
use crate::error::{Error, Result};
use crate::jump::{renewal_index, sigma_encode, SigmaCoding};
use crate::rational::{dyadic_from_f64, floor_u64_capped, rat_to_f64, Rational};
use crate::theta::{conj_pow, e_pi_i_4, theta_sum, DEFAULT_TERM_BUDGET};

/// Ceiling on the total number of directly-summed terms inside one
/// truncated evaluation.
pub const DEFAULT_GAMMA_J_BUDGET: u64 = 10_000_000;

/// One rung of the renormalization ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelData {
    pub l: usize,
    pub alpha_l: Rational,
    /// eta_l = eta(alpha_{l-1}) = -xi_l; eta_0 = +1 by convention
    pub eta_l: i8,
    /// kappa_l = 1 + eta_1 + eta_1 eta_2 + ... (kappa_0 = 0)
    pub kappa_l: i64,
    /// exact N_l = alpha_0 ... alpha_{l-1} N
    pub n_l: Rational,
    /// running conjugation sign e_l = eta_1 ... eta_l
    pub e_l: i8,
}

/// The ladder down to the renewal depth, plus the jump-coding context.
#[derive(Debug, Clone, PartialEq)]
pub struct RenormTrace {
    pub levels: Vec<LevelData>,
    pub coding: SigmaCoding,
    pub n_hat: usize,
    pub theta_exact: Rational,
    pub theta: f64,
    pub n: u64,
}

impl RenormTrace {
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    /// JSON dump for debugging / provenance (`--trace-json`).
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "n": self.n,
            "n_hat": self.n_hat,
            "r": self.depth(),
            "theta": self.theta,
            "theta_exact": self.theta_exact.to_string(),
            "entries": self.coding.entries,
            "qhat": self.coding.qhat.iter().map(|q| q.to_string()).collect::<Vec<_>>(),
            "levels": self.levels.iter().map(|lv| serde_json::json!({
                "l": lv.l,
                "alpha": lv.alpha_l.to_string(),
                "eta": lv.eta_l,
                "kappa": lv.kappa_l,
                "N_l": rat_to_f64(&lv.n_l),
            })).collect::<Vec<_>>(),
        })
    }
}

/// Result of a truncated evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaJResult {
    pub value: Complex64,
    pub j: usize,
    /// total number of directly summed theta terms
    pub terms_cost: u64,
    /// structural bound on the dropped scales (C12 taken as 1)
    pub truncation_bound: f64,
    /// true when J >= n_hat forced the exact, untruncated evaluation
    pub exact_fallback: bool,
}

/// Exact ladder data for levels 0..=r. Fails if the orbit terminates
/// before r digits are available.
pub fn level_sequence(alpha: &Rational, n: u64, r: usize) -> Result<Vec<LevelData>> {
    let exp = ecf_expand(alpha, r.max(1))?;
    levels_from_expansion(alpha, &exp, n, r)
}

fn levels_from_expansion(
    alpha: &Rational,
    exp: &EcfExpansion,
    n: u64,
    r: usize,
) -> Result<Vec<LevelData>> {
    if r > 0 && (exp.digits.len() < r || exp.digits[..r].iter().any(|d| d.terminal)) {
        return Err(Error::Exhausted(format!(
            "orbit of {alpha} does not support {r} renormalization steps"
        )));
    }
    let mut levels = Vec::with_capacity(r + 1);
    let mut x = alpha.clone();
    let mut n_l = Rational::from(BigInt::from(n));
    let mut e: i8 = 1;
    let mut kappa: i64 = 0;
    levels.push(LevelData {
        l: 0,
        alpha_l: x.clone(),
        eta_l: 1,
        kappa_l: 0,
        n_l: n_l.clone(),
        e_l: 1,
    });
    for l in 1..=r {
        let eta = -exp.digits[l - 1].xi;
        kappa += e as i64; // kappa_l = kappa_{l-1} + eta_1...eta_{l-1}
        e *= eta;
        n_l *= &x;
        x = apply_t(&x)?;
        levels.push(LevelData {
            l,
            alpha_l: x.clone(),
            eta_l: eta,
            kappa_l: kappa,
            n_l: n_l.clone(),
            e_l: e,
        });
    }
    Ok(levels)
}

/// Builds the full renewal-depth trace for (alpha, N).
pub fn renorm_trace(alpha: &Rational, n: u64) -> Result<RenormTrace> {
    let target = BigInt::from(n);
    let mut max_digits = 64usize;
    let (exp, coding, n_hat) = loop {
        let exp = ecf_expand(alpha, max_digits)?;
        let coding = sigma_encode(&exp)?;
        if let Some(n_hat) = renewal_index(&coding, &target) {
            break (exp, coding, n_hat);
        }
        if exp.exhausted || exp.digits.len() < max_digits {
            return Err(Error::DenominatorBudget(format!(
                "expansion exhausted before the R-denominators exceeded {n}"
            )));
        }
        max_digits = max_digits
            .checked_mul(2)
            .ok_or_else(|| Error::Budget("digit budget overflow".into()))?;
    };
    let r = coding.nu[n_hat] - 1;
    let levels = levels_from_expansion(alpha, &exp, n, r)?;
    let theta_exact = levels[r].n_l.clone();

    // cross-check Theta against the denominator route:
    // Theta = N / (q_{nu-1} + xi_{nu-1} alpha_{nu-1} q_{nu-2})
    let nu = coding.nu[n_hat];
    let conv = crate::ecf::convergents_of_digits(&exp.digits, nu)?;
    let denom = Rational::from(conv.q[nu - 1].clone())
        + Rational::from(BigInt::from(conv.xi[nu - 1]) * &conv.q[nu - 2])
            * &levels[r].alpha_l;
    let via_q = Rational::from(BigInt::from(n)) / denom;
    if via_q != theta_exact {
        return Err(Error::InvariantViolation(
            "Theta disagrees between the product and denominator routes".into(),
        ));
    }

    let theta = rat_to_f64(&theta_exact);
    Ok(RenormTrace { levels, coding, n_hat, theta_exact, theta, n })
}

/// r(alpha, N) = nu_{n_hat} - 1.
pub fn renewal_depth(alpha: &Rational, n: u64) -> Result<usize> {
    Ok(renorm_trace(alpha, n)?.depth())
}

/// Theta_alpha(N) = alpha_0 ... alpha_{r-1} N, with the internal
/// dual-route assertion of `renorm_trace`.
pub fn theta_alpha(alpha: &Rational, n: u64) -> Result<f64> {
    Ok(renorm_trace(alpha, n)?.theta)
}

/// Core evaluator of the telescoped identity: the bracket
/// e^{i pi kappa_r/4} S^{(e_r)}(alpha_r, t Theta)
///   + sum_{l >= lmin} e^{i pi kappa_l/4} ((alpha)_l^{r-1})^{1/2} Gamma^{(e_l)}(alpha_l, t N_l)
/// divided by sqrt(Theta). `lmin = 0` is the exact reconstruction;
/// `lmin = nu_{n_hat - J} - 1` keeps the J coarsest jump scales.
fn evaluate(trace: &RenormTrace, t: f64, lmin: usize, cost_ceiling: u64) -> Result<(Complex64, u64)> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("t = {t} outside [0,1]")));
    }
    let levels = &trace.levels;
    let r = trace.depth();
    let t_exact = dyadic_from_f64(t)?;

    // direct sums S(alpha_l, t N_l) for the retained levels
    let mut cost = 0u64;
    let mut sums = Vec::with_capacity(r - lmin + 1);
    for lv in &levels[lmin..=r] {
        let l_len = &t_exact * &lv.n_l;
        cost += floor_u64_capped(&l_len, cost_ceiling)? + 1;
        if cost > cost_ceiling {
            return Err(Error::Budget(format!(
                "evaluation cost {cost} exceeds ceiling {cost_ceiling}"
            )));
        }
        sums.push(theta_sum(&lv.alpha_l, &l_len)?);
    }

    let octant = |kappa: i64| Complex64::from_polar(1.0, kappa.rem_euclid(8) as f64 * FRAC_PI_4);

    // suffix products (alpha)_l^{r-1} in floating point
    let mut suffix = vec![1.0f64; r - lmin + 2];
    for l in (lmin..r).rev() {
        suffix[l - lmin] = suffix[l - lmin + 1] * rat_to_f64(&levels[l].alpha_l);
    }

    let mut bracket = octant(levels[r].kappa_l) * conj_pow(sums[r - lmin], levels[r].e_l);
    for l in lmin..r {
        let s_l = sums[l - lmin];
        let s_next = sums[l - lmin + 1];
        let a_l = rat_to_f64(&levels[l].alpha_l);
        let gamma_l = s_l
            - e_pi_i_4() * a_l.powf(-0.5) * conj_pow(s_next, levels[l + 1].eta_l);
        bracket += octant(levels[l].kappa_l)
            * suffix[l - lmin].sqrt()
            * conj_pow(gamma_l, levels[l].e_l);
    }
    Ok((bracket / trace.theta.sqrt(), cost))
}

/// Full-depth evaluation of gamma(t) = N^{-1/2} S(alpha, tN) through the
/// renormalization identity; agrees with the direct sum to float accuracy.
pub fn reconstruct(alpha: &Rational, n: u64, t: f64) -> Result<Complex64> {
    let trace = renorm_trace(alpha, n)?;
    Ok(evaluate(&trace, t, 0, DEFAULT_TERM_BUDGET)?.0)
}

/// Structural bound on the dropped scales of a J-truncation (with the
/// absolute constant set to 1).
fn truncation_bound(trace: &RenormTrace, j_keep: usize) -> f64 {
    if j_keep >= trace.n_hat {
        return 0.0;
    }
    let mut bound = 0.0;
    for j in j_keep..trace.n_hat {
        let h = trace.coding.entries[trace.n_hat - 1 - j].h as f64;
        bound += 2f64.powf(-(j as f64) / 2.0) * (h + 1.0);
    }
    bound / trace.theta.sqrt()
}

/// The truncated curve gamma^J(t) evaluated on a prebuilt trace.
pub fn gamma_j_on_trace(trace: &RenormTrace, t: f64, j: usize, cost_ceiling: u64) -> Result<GammaJResult> {
    if j == 0 {
        return Err(Error::Argument("J must be at least 1".into()));
    }
    let exact_fallback = j >= trace.n_hat;
    let (lmin, ceiling) = if exact_fallback {
        (0, cost_ceiling.max(DEFAULT_TERM_BUDGET))
    } else {
        (trace.coding.nu[trace.n_hat - j] - 1, cost_ceiling)
    };
    let (value, terms_cost) = evaluate(trace, t, lmin, ceiling)?;
    Ok(GammaJResult {
        value,
        j,
        terms_cost,
        truncation_bound: truncation_bound(trace, j),
        exact_fallback,
    })
}

/// gamma^J(t), truncated to the J coarsest jump scales. Falls back to the
/// exact evaluation (flagged) when J exceeds the renewal time.
pub fn gamma_j(alpha: &Rational, n: u64, t: f64, j: usize) -> Result<GammaJResult> {
    let trace = renorm_trace(alpha, n)?;
    gamma_j_on_trace(&trace, t, j, DEFAULT_GAMMA_J_BUDGET)
}

/// (gamma^J(t_1), ..., gamma^J(t_k)) sharing a single trace.
pub fn fdd_point(alpha: &Rational, n: u64, ts: &[f64], j: usize) -> Result<Vec<Complex64>> {
    if ts.windows(2).any(|w| w[0] >= w[1]) || ts.is_empty() {
        return Err(Error::Argument("need strictly increasing, nonempty times".into()));
    }
    let trace = renorm_trace(alpha, n)?;
    ts.iter()
        .map(|&t| Ok(gamma_j_on_trace(&trace, t, j, DEFAULT_GAMMA_J_BUDGET)?.value))
        .collect()
}

/// Exact closed forms for the partial products along the ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialProducts {
    pub beta_j: Rational,
    pub b_sj: Rational,
    pub d_j: Rational,
}

/// beta_j = alpha_{nu_{n_hat-j}-2};
/// B_{s,j} = beta/((s-1)-(s-2)beta) = (alpha)_{nu-s}^{nu-2};
/// D_j = prod_u beta_u/(1+h(1-beta_u)) = (alpha)_{nu-1}^{nu_{n_hat}-2}.
/// Each closed form is asserted against the direct exact product.
pub fn partial_products(trace: &RenormTrace, j: usize, s: usize) -> Result<PartialProducts> {
    let n_hat = trace.n_hat;
    if j >= n_hat {
        return Err(Error::Range(format!("j = {j} >= n_hat = {n_hat}")));
    }
    let h_nj = trace.coding.entries[n_hat - 1 - j].h as usize;
    if !(2..=h_nj + 2).contains(&s) {
        return Err(Error::Range(format!("s = {s} outside 2..={}", h_nj + 2)));
    }
    let nu_nj = trace.coding.nu[n_hat - j];
    let beta = |u: usize| trace.levels[trace.coding.nu[n_hat - u] - 2].alpha_l.clone();
    let beta_j = beta(j);

    let direct = |lo: usize, hi_incl: usize| -> Rational {
        // (alpha)_{lo}^{hi} with the empty-product convention
        let mut p = Rational::one();
        if lo <= hi_incl {
            for lv in &trace.levels[lo..=hi_incl] {
                p *= &lv.alpha_l;
            }
        }
        p
    };

    let s_big = BigInt::from(s as i64);
    let b_sj = &beta_j
        / (Rational::from(&s_big - 1) - Rational::from(&s_big - 2) * &beta_j);
    if b_sj != direct(nu_nj - s, nu_nj.wrapping_sub(2)) {
        return Err(Error::InvariantViolation("B_{s,j} closed form mismatch".into()));
    }

    let mut d_j = Rational::one();
    for u in 0..j {
        let b_u = beta(u);
        let h_u = BigInt::from(trace.coding.entries[n_hat - 1 - u].h);
        d_j *= &b_u / (Rational::one() + Rational::from(h_u) * (Rational::one() - &b_u));
    }
    if d_j != direct(nu_nj - 1, trace.coding.nu[n_hat] - 2) {
        return Err(Error::InvariantViolation("D_j closed form mismatch".into()));
    }

    Ok(PartialProducts { beta_j, b_sj, d_j })
}

/// The renewal-window phase bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseBookkeeping {
    pub psi: i64,
    /// upsilon[j] holds Upsilon_{s,J} for s = 2..=h_{n_hat-j}+2
    pub upsilon: Vec<Vec<i64>>,
    pub e_window: i8,
    /// e_window_j[j] = E_J^j (independent of s)
    pub e_window_j: Vec<i8>,
    pub e_alpha: i8,
    pub k8: u8,
}

/// Computes Psi_J, the Upsilon_{s,J} table, the window conjugation signs
/// and (E_alpha, K^8) from Sigma-entries alone, then asserts every one of
/// them against the direct kappa/eta ladder.
pub fn phase_bookkeeping(trace: &RenormTrace, j_window: usize) -> Result<PhaseBookkeeping> {
    let n_hat = trace.n_hat;
    if j_window > n_hat {
        return Err(Error::Range(format!("J = {j_window} > n_hat = {n_hat}")));
    }
    let entries = &trace.coding.entries;
    let hz = |u: usize| -> i64 {
        // h_u - zeta_u for 1-based entry index u
        entries[u - 1].h as i64 - entries[u - 1].zeta as i64
    };
    let zprod = |from: usize, to_incl: usize| -> i64 {
        // prod_{v=from}^{to} (-zeta_v), empty product = 1
        let mut p = 1i64;
        for v in from..=to_incl.min(entries.len()) {
            if v >= from {
                p *= -entries[v - 1].zeta as i64;
            }
        }
        p
    };

    let lo = n_hat - j_window + 1;
    let e_window = zprod(lo, n_hat) as i8;
    let mut e_window_j = Vec::with_capacity(j_window);
    let mut upsilon = Vec::with_capacity(j_window);
    for j in 0..j_window {
        let e_jj = zprod(lo, n_hat - j - 1) as i8;
        e_window_j.push(e_jj);
        let h_nj = entries[n_hat - 1 - j].h as i64;
        let base: i64 = (lo..=n_hat - j - 1).map(|u| hz(u) * zprod(lo, u - 1)).sum();
        let mut row = Vec::new();
        for s in 2..=(h_nj + 2) {
            row.push(base + (h_nj - s + 1) * e_jj as i64 + 1);
        }
        upsilon.push(row);
    }
    let psi: i64 =
        (lo..=n_hat).map(|u| hz(u) * zprod(lo, u - 1)).sum::<i64>() - e_window as i64 + 1;

    let e_alpha = zprod(1, n_hat) as i8;
    let k_alpha: i64 = 1 + (1..=n_hat).map(|u| hz(u) * zprod(1, u - 1)).sum::<i64>();
    let k8 = k_alpha.rem_euclid(8) as u8;

    // --- dual-formula assertions against the ladder ---
    let kappa = |l: usize| trace.levels[l].kappa_l;
    let e_l = |l: usize| trace.levels[l].e_l as i64;
    let nu = &trace.coding.nu;
    let anchor = nu[n_hat - j_window] - 1;
    let e_anchor = e_l(anchor);
    if psi != (kappa(nu[n_hat] - 1) - kappa(anchor)) * e_anchor {
        return Err(Error::InvariantViolation("Psi_J mismatch".into()));
    }
    for (j, row) in upsilon.iter().enumerate() {
        for (idx, &ups) in row.iter().enumerate() {
            let s = idx + 2;
            let l = nu[n_hat - j] - s;
            if ups != (kappa(l) - kappa(anchor)) * e_anchor {
                return Err(Error::InvariantViolation("Upsilon_{s,J} mismatch".into()));
            }
            if e_window_j[j] as i64 != e_l(l) * e_anchor {
                return Err(Error::InvariantViolation("E_J^j mismatch".into()));
            }
        }
    }
    if e_alpha != trace.levels[nu[n_hat] - 1].e_l {
        return Err(Error::InvariantViolation("E_alpha mismatch".into()));
    }
    if k8 as i64 != (kappa(nu[n_hat] - 1) + e_l(nu[n_hat] - 1)).rem_euclid(8) {
        return Err(Error::InvariantViolation("K^8 mismatch".into()));
    }
    // kappa_{nu_{n_hat-J}} = K8 - E_alpha sum_{u>n_hat-J} (h_u-zeta_u) E_{n_hat-u+1}  (mod 8),
    // using E_alpha E_{n_hat-u+1} = x_{u-1}
    let tail: i64 = (lo..=n_hat).map(|u| hz(u) * zprod(u, n_hat)).sum();
    let kappa_entry = kappa(anchor) + e_l(anchor); // kappa_{nu} = kappa_{nu-1} + e_{nu-1}
    if kappa_entry.rem_euclid(8) != (k8 as i64 - e_alpha as i64 * tail).rem_euclid(8) {
        return Err(Error::InvariantViolation("kappa anchor congruence mismatch".into()));
    }
    if e_alpha as i64 != e_anchor * e_window as i64 {
        return Err(Error::InvariantViolation("E factorization mismatch".into()));
    }

    Ok(PhaseBookkeeping { psi, upsilon, e_window, e_window_j, e_alpha, k8 })
}
