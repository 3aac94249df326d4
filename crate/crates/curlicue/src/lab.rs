//! Monte Carlo experiments: finite-dimensional curve distributions,
//! renewal joint distributions, the Theta distribution, the phase Markov
//! chain, the weak law for the expansion, the L^2 moment identity and
//! gamma-vs-gamma^J error profiles.
//!
//! Every experiment is reproducible bit-for-bit from (seed, config):
//! sample `i` always draws from `substream(seed, i)`, so sharding across
//! rayon workers cannot change any value. Samples whose expansions run
//! out before the experiment's needs are counted as skips; a skip rate
//! above 0.1% aborts the run, since it signals insufficient
//! `precision_bits` rather than bad luck.

use num_bigint::BigInt;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ecf::{birkhoff_log_statistic, ecf_expand};
use crate::error::{Error, Result};
use crate::jump::{
    encode_until, mu_r_cdf, renewal_snapshot, sample_mu_r, PhaseState, RenewalSnapshot,
};
use crate::rational::{dyadic, Rational};
use crate::renorm::{
    gamma_j_on_trace, renorm_trace, DEFAULT_GAMMA_J_BUDGET,
};
use crate::stats::{
    chi_square_gof, ks_statistic, linear_fit, ChiSquareResult, EmpiricalDistribution,
    MarkovEstimate,
};
use crate::stream::{substream, uniform_mantissa};
use crate::theta::{curve_points, theta_sum, DEFAULT_TERM_BUDGET};

/// Default dyadic resolution of sampled alphas.
pub const DEFAULT_PRECISION_BITS: u32 = 256;

/// Experiments abort once more than this fraction of samples is skipped.
pub const SKIP_ABORT_FRACTION: f64 = 0.001;

/// Reproducibility record attached to every experiment result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub precision_bits: u32,
    pub requested: usize,
    pub skipped: usize,
}

fn guard_skips(requested: usize, skipped: usize) -> Result<()> {
    if skipped as f64 > SKIP_ABORT_FRACTION * requested as f64 {
        return Err(Error::StatisticalAbort(format!(
            "{skipped} of {requested} samples skipped (> {:.2}%); raise precision_bits",
            100.0 * SKIP_ABORT_FRACTION
        )));
    }
    Ok(())
}

/// The mu_R-distributed alpha for sample index `i` of a stream.
pub fn draw_alpha(seed: u64, index: u64, precision_bits: u32) -> Result<Rational> {
    let mut rng = substream(seed, index);
    let u = dyadic(uniform_mantissa(&mut rng, precision_bits), precision_bits);
    sample_mu_r(&u, precision_bits)
}

/// A uniformly distributed dyadic alpha for sample index `i`.
pub fn draw_uniform_alpha(seed: u64, index: u64, precision_bits: u32) -> Rational {
    let mut rng = substream(seed, index);
    dyadic(uniform_mantissa(&mut rng, precision_bits), precision_bits)
}

/// Deterministic stream of mu_R samples.
pub fn sample_stream(seed: u64, count: usize, precision_bits: u32) -> Result<Vec<Rational>> {
    if count == 0 {
        return Err(Error::Argument("count must be at least 1".into()));
    }
    (0..count as u64)
        .into_par_iter()
        .map(|i| draw_alpha(seed, i, precision_bits))
        .collect()
}

/// Chi-square test of the sampler against equal-mass mu_R bins, plus the
/// KS distance of the sample to the exact CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerCheck {
    pub chi_square: ChiSquareResult,
    pub ks_to_cdf: f64,
    pub provenance: Provenance,
}

pub fn sampler_check(seed: u64, count: usize, bins: usize, precision_bits: u32) -> Result<SamplerCheck> {
    if bins < 2 {
        return Err(Error::Argument("need at least two bins".into()));
    }
    let alphas = sample_stream(seed, count, precision_bits)?;
    let values: Vec<f64> = alphas.iter().map(crate::rational::rat_to_f64).collect();
    // equal-mass bins via the exact CDF: count samples with CDF in [i/b, (i+1)/b)
    let mut observed = vec![0u64; bins];
    for &v in &values {
        let idx = ((mu_r_cdf(v) * bins as f64) as usize).min(bins - 1);
        observed[idx] += 1;
    }
    let expected = vec![count as f64 / bins as f64; bins];
    let chi_square = chi_square_gof(&observed, &expected)?;
    let ks_to_cdf =
        crate::stats::ks_against_cdf(&EmpiricalDistribution::new(values)?, mu_r_cdf);
    Ok(SamplerCheck {
        chi_square,
        ks_to_cdf,
        provenance: Provenance { seed, precision_bits, requested: count, skipped: 0 },
    })
}

/// One curve cloud: per-sample values of (gamma(t_1), ..., gamma(t_k)).
#[derive(Debug, Clone, PartialEq)]
pub struct FddCloud {
    pub n: u64,
    /// values[sample][time]
    pub values: Vec<Vec<Complex64>>,
}

/// Clouds across a ladder of N values, with KS stability between
/// consecutive clouds (max over the Re/Im/abs one-dimensional marginals).
#[derive(Debug, Clone, PartialEq)]
pub struct FddReport {
    pub ts: Vec<f64>,
    pub clouds: Vec<FddCloud>,
    pub ks_chain: Vec<f64>,
    pub provenance: Provenance,
}

impl FddReport {
    /// Marginal samples of cloud `c` at time index `k`:
    /// (Re, Im, modulus).
    pub fn marginals(&self, c: usize, k: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let vals = &self.clouds[c].values;
        (
            vals.iter().map(|v| v[k].re).collect(),
            vals.iter().map(|v| v[k].im).collect(),
            vals.iter().map(|v| v[k].norm()).collect(),
        )
    }
}

fn curve_values(
    alpha: &Rational,
    n: u64,
    ts: &[f64],
    j: Option<usize>,
) -> Result<Vec<Complex64>> {
    let trace = renorm_trace(alpha, n)?;
    match j {
        Some(j) if j < trace.n_hat => ts
            .iter()
            .map(|&t| Ok(gamma_j_on_trace(&trace, t, j, DEFAULT_GAMMA_J_BUDGET)?.value))
            .collect(),
        // J at or past the renewal depth: the truncation is exact, so use
        // the direct sum, which costs one pass instead of the full ladder
        _ => Ok(curve_points(alpha, n, ts)?.samples.iter().map(|&(_, v)| v).collect()),
    }
}

/// Curve clouds over mu_R samples for each N in `ns`.
pub fn estimate_fdd(
    seed: u64,
    ts: &[f64],
    ns: &[u64],
    samples: usize,
    j: Option<usize>,
    precision_bits: u32,
) -> Result<FddReport> {
    if ts.is_empty() || ns.is_empty() || samples == 0 {
        return Err(Error::Argument("need times, sizes and samples".into()));
    }
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Argument("ns must be strictly increasing".into()));
    }
    let rows: Vec<Option<Vec<Vec<Complex64>>>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let alpha = draw_alpha(seed, i, precision_bits).ok()?;
            // the same alpha is evaluated at every N, keeping clouds paired
            ns.iter().map(|&n| curve_values(&alpha, n, ts, j).ok()).collect()
        })
        .collect();
    let skipped = rows.iter().filter(|r| r.is_none()).count();
    guard_skips(samples, skipped)?;
    let kept: Vec<&Vec<Vec<Complex64>>> = rows.iter().flatten().collect();
    let clouds: Vec<FddCloud> = ns
        .iter()
        .enumerate()
        .map(|(c, &n)| FddCloud { n, values: kept.iter().map(|r| r[c].clone()).collect() })
        .collect();
    let report = FddReport {
        ts: ts.to_vec(),
        clouds,
        ks_chain: Vec::new(),
        provenance: Provenance { seed, precision_bits, requested: samples, skipped },
    };
    let mut ks_chain = Vec::new();
    for c in 0..ns.len() - 1 {
        let mut d: f64 = 0.0;
        for k in 0..ts.len() {
            let (re_a, im_a, abs_a) = report.marginals(c, k);
            let (re_b, im_b, abs_b) = report.marginals(c + 1, k);
            for (a, b) in [(re_a, re_b), (im_a, im_b), (abs_a, abs_b)] {
                d = d.max(ks_statistic(
                    &EmpiricalDistribution::new(a)?,
                    &EmpiricalDistribution::new(b)?,
                ));
            }
        }
        ks_chain.push(d);
    }
    Ok(FddReport { ks_chain, ..report })
}

/// Excess kurtosis of a sample (m4/m2^2 - 3).
pub fn excess_kurtosis(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    m4 / (m2 * m2) - 3.0
}

/// Joint renewal cloud at one N.
#[derive(Debug, Clone, PartialEq)]
pub struct RenewalReport {
    pub n: u64,
    pub snapshots: Vec<RenewalSnapshot>,
    pub provenance: Provenance,
}

pub fn renewal_distribution(
    seed: u64,
    n: u64,
    samples: usize,
    n1: usize,
    n2: usize,
    precision_bits: u32,
) -> Result<RenewalReport> {
    if n1 == 0 || n1 + n2 > 4 {
        return Err(Error::Argument("window must satisfy 1 <= n1, n1+n2 <= 4".into()));
    }
    let rows: Vec<Option<RenewalSnapshot>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let alpha = draw_alpha(seed, i, precision_bits).ok()?;
            let mut snap = renewal_snapshot(&alpha, n, n1, n2).ok()?;
            snap.theta = Some(renorm_trace(&alpha, n).ok()?.theta);
            Some(snap)
        })
        .collect();
    let skipped = rows.iter().filter(|r| r.is_none()).count();
    guard_skips(samples, skipped)?;
    Ok(RenewalReport {
        n,
        snapshots: rows.into_iter().flatten().collect(),
        provenance: Provenance { seed, precision_bits, requested: samples, skipped },
    })
}

/// Cloud of Theta_alpha(N) over mu_R samples.
pub fn theta_distribution(
    seed: u64,
    n: u64,
    samples: usize,
    precision_bits: u32,
) -> Result<(EmpiricalDistribution, Provenance)> {
    let rows: Vec<Option<f64>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let alpha = draw_alpha(seed, i, precision_bits).ok()?;
            Some(renorm_trace(&alpha, n).ok()?.theta)
        })
        .collect();
    let skipped = rows.iter().filter(|r| r.is_none()).count();
    guard_skips(samples, skipped)?;
    Ok((
        EmpiricalDistribution::new(rows.into_iter().flatten().collect())?,
        Provenance { seed, precision_bits, requested: samples, skipped },
    ))
}

fn state_index(st: PhaseState) -> usize {
    ((st.x + 1) / 2) as usize * 8 + st.y as usize
}

/// Estimated phase chain: transition tallies over the 16 states
/// (x, y) in {+-1} x Z/8, plus state occupation frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovReport {
    pub estimate: MarkovEstimate,
    pub occupation: Vec<f64>,
    pub provenance: Provenance,
}

/// Suggested alpha resolution for walking `entries` coding entries
/// before the expansion runs out.
pub fn bits_for_entries(entries: usize) -> u32 {
    (4 * entries as u32 + 256).next_multiple_of(64)
}

pub fn markov_estimate(
    seed: u64,
    samples: usize,
    orbit_len: usize,
    precision_bits: u32,
) -> Result<MarkovReport> {
    if orbit_len < 2 {
        return Err(Error::Argument("orbit_len must be at least 2".into()));
    }
    let per_sample: Vec<Option<(MarkovEstimate, Vec<u64>)>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let alpha = draw_alpha(seed, i, precision_bits).ok()?;
            let coding =
                encode_until(&alpha, |c| c.entries.len() >= orbit_len).ok()?;
            let take = coding.entries.len().min(orbit_len);
            if take < orbit_len / 2 {
                return None; // expansion too short to trust
            }
            let mut est = MarkovEstimate::new(16);
            let mut occ = vec![0u64; 16];
            let mut st = PhaseState::START;
            for e in &coding.entries[..take] {
                let from = state_index(st);
                st = st.step(e);
                let to = state_index(st);
                est.record(from, to);
                occ[to] += 1;
            }
            Some((est, occ))
        })
        .collect();
    let skipped = per_sample.iter().filter(|r| r.is_none()).count();
    guard_skips(samples, skipped)?;
    let mut estimate = MarkovEstimate::new(16);
    let mut counts = vec![0u64; 16];
    for (est, occ) in per_sample.into_iter().flatten() {
        estimate.merge(&est);
        for (c, o) in counts.iter_mut().zip(&occ) {
            *c += o;
        }
    }
    let total: u64 = counts.iter().sum();
    let occupation = counts.iter().map(|&c| c as f64 / total as f64).collect();
    Ok(MarkovReport {
        estimate,
        occupation,
        provenance: Provenance { seed, precision_bits, requested: samples, skipped },
    })
}

/// Concentration summary of the Birkhoff log-statistic at one orbit length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WllnSummary {
    pub n: usize,
    pub median: f64,
    pub iqr: f64,
    pub skipped: usize,
}

/// Alpha resolution needed for `n` ECF digits: the typical log-denominator
/// is (pi^2/4) n / ln n, padded by a factor ~2.3.
fn bits_for_digits(n: usize) -> u32 {
    let nf = n as f64;
    ((9.0 * nf / nf.ln()) as u32 + 512).next_multiple_of(64)
}

pub fn wlln_experiment(seed: u64, ns: &[usize], samples: usize) -> Result<Vec<WllnSummary>> {
    if ns.windows(2).any(|w| w[0] >= w[1]) || ns.is_empty() {
        return Err(Error::Argument("ns must be strictly increasing, nonempty".into()));
    }
    if ns[0] < 2 {
        return Err(Error::Argument("orbit lengths must be at least 2".into()));
    }
    let mut out = Vec::new();
    for &n in ns {
        let bits = bits_for_digits(n);
        let rows: Vec<Option<f64>> = (0..samples as u64)
            .into_par_iter()
            .map(|i| {
                let alpha = draw_uniform_alpha(seed ^ n as u64, i, bits);
                let exp = ecf_expand(&alpha, n).ok()?;
                if exp.digits.len() < n || exp.digits[..n].iter().any(|d| d.terminal) {
                    return None; // orbit exhausted before n steps
                }
                birkhoff_log_statistic(&exp, n).ok()
            })
            .collect();
        let skipped = rows.iter().filter(|r| r.is_none()).count();
        // exhaustion is expected occasionally here even at generous
        // precision (the log-denominator fluctuates); tolerate 5% rather
        // than the usual 0.1%, but still log every skip
        if skipped as f64 > 0.05 * samples as f64 {
            return Err(Error::StatisticalAbort(format!(
                "{skipped} of {samples} orbits too short at n = {n}; raise the bit padding"
            )));
        }
        let dist = EmpiricalDistribution::new(rows.into_iter().flatten().collect())?;
        out.push(WllnSummary { n, median: dist.median(), iqr: dist.iqr(), skipped });
    }
    Ok(out)
}

/// Monte Carlo estimate of the mean of |S(alpha, N)|^2 / N over uniform
/// alpha. Expanding |S|^2 and integrating kills every off-diagonal
/// frequency over a full period, so the exact mean over (0, 1) is 1 for
/// every N (equivalently, the integral of |S|^2 over (-1, 1) is 2N).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondMomentReport {
    pub n: u64,
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
    pub samples: usize,
}

pub fn second_moment_check(seed: u64, n: u64, samples: usize) -> Result<SecondMomentReport> {
    if n == 0 || samples < 2 {
        return Err(Error::Argument("need N >= 1 and at least two samples".into()));
    }
    let len = Rational::from(BigInt::from(n));
    let values: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let alpha = draw_uniform_alpha(seed, i, 53);
            let s = theta_sum(&alpha, &len)?;
            Ok(s.norm_sqr() / n as f64)
        })
        .collect::<Result<_>>()?;
    let dist = EmpiricalDistribution::new(values)?;
    Ok(SecondMomentReport {
        n,
        mean: dist.mean(),
        variance: dist.variance(),
        std_error: (dist.variance() / samples as f64).sqrt(),
        samples,
    })
}

/// Quantiles of |gamma(1) - gamma^J(1)| at one truncation depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileRow {
    pub j: usize,
    pub q50: f64,
    pub q90: f64,
    pub q99: f64,
}

/// Truncation-error profile over the J ladder, restricted to samples
/// whose renewal time exceeds every requested J (otherwise the error is
/// identically zero and says nothing about the decay rate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxErrorReport {
    pub n: u64,
    pub rows: Vec<QuantileRow>,
    /// fitted decay rate c in q90 ~ exp(-c J)
    pub decay_rate: f64,
    pub r_squared: f64,
    pub kept: usize,
    pub raw_drawn: usize,
}

pub fn approx_error_experiment(
    seed: u64,
    js: &[usize],
    n: u64,
    wanted: usize,
    precision_bits: u32,
) -> Result<ApproxErrorReport> {
    if js.windows(2).any(|w| w[0] >= w[1]) || js.is_empty() || js[0] == 0 {
        return Err(Error::Argument("js must be strictly increasing, positive".into()));
    }
    if wanted < 10 {
        return Err(Error::Argument("need at least 10 conditioned samples".into()));
    }
    let j_max = *js.last().unwrap();
    let mut errors: Vec<Vec<f64>> = vec![Vec::new(); js.len()]; // per J
    let mut raw = 0u64;
    let cap = 2000 * wanted as u64;
    let batch = 1024u64;
    while errors[0].len() < wanted && raw < cap {
        let chunk: Vec<Option<Vec<f64>>> = (raw..raw + batch)
            .into_par_iter()
            .map(|i| {
                let alpha = draw_alpha(seed, i, precision_bits).ok()?;
                let trace = renorm_trace(&alpha, n).ok()?;
                if trace.n_hat <= j_max {
                    return None; // truncation would be exact; not informative
                }
                let exact = {
                    let len = Rational::from(BigInt::from(n));
                    theta_sum(&alpha, &len).ok()? / (n as f64).sqrt()
                };
                js.iter()
                    .map(|&j| {
                        let g = gamma_j_on_trace(&trace, 1.0, j, DEFAULT_TERM_BUDGET).ok()?;
                        Some((g.value - exact).norm())
                    })
                    .collect()
            })
            .collect();
        raw += batch;
        for row in chunk.into_iter().flatten() {
            for (store, e) in errors.iter_mut().zip(row) {
                store.push(e);
            }
        }
    }
    let kept = errors[0].len();
    if kept < wanted / 2 {
        return Err(Error::StatisticalAbort(format!(
            "only {kept} of {wanted} samples had renewal time past J = {j_max} \
             after {raw} draws"
        )));
    }
    let mut rows = Vec::new();
    for (j, errs) in js.iter().zip(&errors) {
        let d = EmpiricalDistribution::new(errs.clone())?;
        rows.push(QuantileRow {
            j: *j,
            q50: d.quantile(0.5)?,
            q90: d.quantile(0.9)?,
            q99: d.quantile(0.99)?,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.j as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.q90.max(1e-300).ln()).collect();
    let (_, slope, r_squared) = linear_fit(&xs, &ys)?;
    Ok(ApproxErrorReport {
        n,
        rows,
        decay_rate: -slope,
        r_squared,
        kept,
        raw_drawn: raw as usize,
    })
}

/// One experiment request, as read from a JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub n: Option<u64>,
    #[serde(default)]
    pub ns: Option<Vec<u64>>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub j: Option<usize>,
    #[serde(default)]
    pub js: Option<Vec<usize>>,
    #[serde(default)]
    pub bins: Option<usize>,
    #[serde(default = "default_precision")]
    pub precision_bits: u32,
    #[serde(default)]
    pub t: Option<f64>,
    #[serde(default)]
    pub ts: Option<Vec<f64>>,
    #[serde(default)]
    pub window: Option<(usize, usize)>,
    #[serde(default)]
    pub orbit_len: Option<usize>,
}

fn default_seed() -> u64 {
    1
}
fn default_samples() -> usize {
    1000
}
fn default_precision() -> u32 {
    DEFAULT_PRECISION_BITS
}

/// Result of a dispatched experiment: a machine-readable summary and an
/// overall pass flag. All stability thresholds (0.02, 0.03, ...) are
/// implementation choices, not values from the underlying theory; the
/// summary labels them as such.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub pass: bool,
    pub summary: serde_json::Value,
}

/// Runs the experiment named in the config and applies its pass criteria.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let bits = cfg.precision_bits;
    match cfg.experiment.as_str() {
        "sampler" => {
            let r = sampler_check(cfg.seed, cfg.samples, cfg.bins.unwrap_or(64), bits)?;
            let pass = r.chi_square.p_value > 0.01;
            Ok(ExperimentOutcome {
                pass,
                summary: serde_json::json!({
                    "experiment": "sampler",
                    "chi_square": r.chi_square.statistic,
                    "dof": r.chi_square.dof,
                    "p_value": r.chi_square.p_value,
                    "ks_to_cdf": r.ks_to_cdf,
                    "provenance": r.provenance,
                    "pass": pass,
                    "threshold_note": "p > 0.01 is an implementation choice",
                }),
            })
        }
        "second_moment" => {
            let n = cfg.n.unwrap_or(1000);
            let r = second_moment_check(cfg.seed, n, cfg.samples)?;
            let pass = (r.mean - 1.0).abs() <= 3.0 * r.std_error;
            Ok(ExperimentOutcome {
                pass,
                summary: serde_json::json!({
                    "experiment": "second_moment", "report": r, "pass": pass,
                    "target": 1.0, "band": "3 Monte Carlo standard errors",
                }),
            })
        }
        "theta" => {
            let ns = cfg.ns.clone().unwrap_or_else(|| vec![10_000, 1_000_000]);
            let mut distances = Vec::new();
            for &n in &ns {
                let (a, _) = theta_distribution(cfg.seed, n, cfg.samples, bits)?;
                let (b, _) = theta_distribution(cfg.seed + 1, 2 * n, cfg.samples, bits)?;
                distances.push(ks_statistic(&a, &b));
            }
            let pass = distances.windows(2).all(|w| w[1] < w[0])
                && *distances.last().unwrap() < 0.02;
            Ok(ExperimentOutcome {
                pass,
                summary: serde_json::json!({
                    "experiment": "theta", "ns": ns,
                    "ks_doubling_distances": distances, "pass": pass,
                    "threshold_note": "0.02 is an implementation choice",
                }),
            })
        }
        "fdd" => {
            let ns = cfg
                .ns
                .clone()
                .unwrap_or_else(|| vec![100_000, 200_000, 400_000]);
            let ts = cfg.ts.clone().unwrap_or_else(|| vec![cfg.t.unwrap_or(1.0)]);
            let r = estimate_fdd(cfg.seed, &ts, &ns, cfg.samples, cfg.j, bits)?;
            let pass = r.ks_chain.windows(2).all(|w| w[1] < w[0])
                && r.ks_chain.last().map_or(false, |&d| d < 0.03);
            Ok(ExperimentOutcome {
                pass,
                summary: serde_json::json!({
                    "experiment": "fdd", "ns": ns, "ts": ts, "j": cfg.j,
                    "ks_chain": r.ks_chain, "provenance": r.provenance, "pass": pass,
                    "threshold_note": "decreasing chain, final < 0.03 (implementation choice)",
                }),
            })
        }
        "renewal" => {
            let n = cfg.n.unwrap_or(1_000_000);
            let (n1, n2) = cfg.window.unwrap_or((1, 1));
            let r = renewal_distribution(cfg.seed, n, cfg.samples, n1, n2, bits)?;
            let support_ok = r.snapshots.iter().all(|s| {
                s.ratio_prev > 0.0 && s.ratio_prev <= 1.0 && s.ratio_next > 1.0
            });
            Ok(ExperimentOutcome {
                pass: support_ok,
                summary: serde_json::json!({
                    "experiment": "renewal", "n": n, "window": [n1, n2],
                    "samples_kept": r.snapshots.len(),
                    "support_ok": support_ok,
                    "provenance": r.provenance, "pass": support_ok,
                }),
            })
        }
        "markov" => {
            let orbit_len = cfg.orbit_len.unwrap_or(1000);
            let bits = bits.max(bits_for_entries(orbit_len));
            let r = markov_estimate(cfg.seed, cfg.samples, orbit_len, bits)?;
            let matrix = r.estimate.matrix()?;
            let rows_ok = matrix
                .iter()
                .all(|row| (row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let positive = r.estimate.min_entry()? > 0.0;
            let pass = rows_ok && positive;
            Ok(ExperimentOutcome {
                pass,
                summary: serde_json::json!({
                    "experiment": "markov", "orbit_len": orbit_len,
                    "transitions": r.estimate.transitions,
                    "min_entry": r.estimate.min_entry()?,
                    "rows_stochastic": rows_ok, "all_positive": positive,
                    "occupation": r.occupation,
                    "provenance": r.provenance, "pass": pass,
                }),
            })
        }
        "wlln" => {
            let ns: Vec<usize> = cfg
                .ns
                .clone()
                .map(|v| v.iter().map(|&x| x as usize).collect())
                .unwrap_or_else(|| vec![1000, 10_000]);
            let r = wlln_experiment(cfg.seed, &ns, cfg.samples)?;
            let iqr_shrinks = r.windows(2).all(|w| w[1].iqr < w[0].iqr);
            let band = r.last().map_or(false, |s| s.median > 1.8 && s.median < 3.2);
            let pass = iqr_shrinks && band;
            Ok(ExperimentOutcome {
                pass,
                summary: serde_json::json!({
                    "experiment": "wlln", "summaries": r,
                    "limit": std::f64::consts::PI * std::f64::consts::PI / 4.0,
                    "iqr_shrinks": iqr_shrinks, "median_in_band": band, "pass": pass,
                    "threshold_note": "band [1.8, 3.2] is an implementation choice",
                }),
            })
        }
        "approx_error" => {
            let js = cfg.js.clone().unwrap_or_else(|| vec![4, 8, 12]);
            let n = cfg.n.unwrap_or(100_000);
            let r = approx_error_experiment(cfg.seed, &js, n, cfg.samples, bits)?;
            let decreasing = r.rows.windows(2).all(|w| w[1].q90 < w[0].q90);
            let pass = decreasing && r.r_squared > 0.9;
            Ok(ExperimentOutcome {
                pass,
                summary: serde_json::json!({
                    "experiment": "approx_error", "report": r,
                    "q90_decreasing": decreasing, "pass": pass,
                }),
            })
        }
        other => Err(Error::Argument(format!("unknown experiment '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat_to_f64;
    use num_traits::One;

    #[test]
    fn stream_is_deterministic_and_mu_r_distributed() {
        let a = sample_stream(5, 200, 64).unwrap();
        let b = sample_stream(5, 200, 64).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|x| x > &Rational::from(BigInt::from(0)) && x <= &Rational::one()));
        // coarse location check: mu_R median is cdf^{-1}(1/2) ~ 0.4641
        let mut vals: Vec<f64> = a.iter().map(rat_to_f64).collect();
        vals.sort_by(|p, q| p.partial_cmp(q).unwrap());
        let median = vals[100];
        assert!((median - 0.4641).abs() < 0.1, "median {median}");
    }

    #[test]
    fn sampler_check_passes_chi_square_and_ks_band() {
        let r = sampler_check(11, 20_000, 64, 64).unwrap();
        assert!(r.chi_square.p_value > 0.01, "p = {}", r.chi_square.p_value);
        // 95% KS band 1.36/sqrt(n)
        assert!(r.ks_to_cdf < 1.36 / (20_000f64).sqrt(), "ks = {}", r.ks_to_cdf);
    }

    #[test]
    fn second_moment_single_term_is_exactly_one() {
        let r = second_moment_check(3, 1, 500).unwrap();
        assert_eq!(r.mean, 1.0); // |S(alpha, 1)|^2 = 1 pointwise
        assert_eq!(r.variance, 0.0);
    }

    #[test]
    fn second_moment_near_one() {
        let r = second_moment_check(3, 1000, 10_000).unwrap();
        // heavy tails make the plug-in standard error a mild underestimate,
        // hence the 4-sigma band
        assert!(
            (r.mean - 1.0).abs() <= 4.0 * r.std_error,
            "mean {} +- {}",
            r.mean,
            r.std_error
        );
    }

    #[test]
    fn theta_cloud_positive_and_stable() {
        let (d, prov) = theta_distribution(7, 50_000, 4000, 64).unwrap();
        assert!(d.samples().iter().all(|&x| x > 0.0));
        assert_eq!(prov.skipped, 0);
        let (d2, _) = theta_distribution(8, 100_000, 4000, 64).unwrap();
        // same law in the limit: distance between N and 2N stays moderate
        assert!(ks_statistic(&d, &d2) < 0.1);
    }

    #[test]
    fn fdd_direct_and_truncated_paths_agree_at_small_n() {
        // J never below n_hat at tiny N, so the J = Some path must take the
        // direct branch and match the J = None path exactly
        let a = estimate_fdd(2, &[1.0], &[500], 50, Some(40), 64).unwrap();
        let b = estimate_fdd(2, &[1.0], &[500], 50, None, 64).unwrap();
        assert_eq!(a.clouds[0].values, b.clouds[0].values);
    }

    #[test]
    fn fdd_scaling_property_is_exact_per_sample() {
        // gamma_{alpha,2N}(1/2) = 2^{-1/2} gamma_{alpha,N}(1) sample by sample
        let half = estimate_fdd(9, &[0.5], &[2000], 60, None, 64).unwrap();
        let full = estimate_fdd(9, &[1.0], &[1000], 60, None, 64).unwrap();
        for (a, b) in half.clouds[0].values.iter().zip(&full.clouds[0].values) {
            let scaled = b[0] / 2f64.sqrt();
            assert!((a[0] - scaled).norm() < 1e-9);
        }
    }

    #[test]
    fn fdd_modulus_cloud_is_heavy_tailed() {
        let r = estimate_fdd(13, &[1.0], &[20_000], 3000, None, 64).unwrap();
        let sq: Vec<f64> =
            r.clouds[0].values.iter().map(|v| v[0].norm_sqr()).collect();
        // |Z|^2 of a complex Gaussian is exponential: excess kurtosis 6.
        // The curve modulus is heavier-tailed; block standard errors keep
        // the comparison honest.
        let blocks: Vec<f64> = sq.chunks(300).map(excess_kurtosis).collect();
        let mean = blocks.iter().sum::<f64>() / blocks.len() as f64;
        let se = (blocks.iter().map(|b| (b - mean).powi(2)).sum::<f64>()
            / (blocks.len() as f64 - 1.0)
            / blocks.len() as f64)
            .sqrt();
        assert!(mean - 3.0 * se > 6.0 || mean + 3.0 * se < 6.0,
            "kurtosis {mean} +- {se} not separated from 6");
    }

    #[test]
    fn renewal_supports() {
        let r = renewal_distribution(21, 100_000, 500, 1, 1, 64).unwrap();
        for s in &r.snapshots {
            assert!(s.ratio_prev > 0.0 && s.ratio_prev <= 1.0);
            assert!(s.ratio_next > 1.0);
            assert!(s.theta.unwrap() > 0.0);
            assert_eq!(s.window.len(), 2);
        }
    }

    #[test]
    fn renewal_conditional_ratio_support() {
        let r = renewal_distribution(22, 100_000, 20_000, 1, 0, 64).unwrap();
        // most common (window, x, y) key
        use std::collections::HashMap;
        let mut groups: HashMap<_, Vec<f64>> = HashMap::new();
        for s in &r.snapshots {
            groups
                .entry((s.window.clone(), s.x, s.y))
                .or_default()
                .push(s.ratio_prev);
        }
        let best = groups.values().max_by_key(|v| v.len()).unwrap();
        assert!(best.len() >= 150, "largest cell only {}", best.len());
        // ratio_prev should spread over (0, 1]: check quarters at this
        // coarse resolution
        let lo = best.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = best.iter().cloned().fold(0.0f64, f64::max);
        assert!(hi - lo > 0.25, "conditioned cloud too concentrated: [{lo}, {hi}]");
    }

    #[test]
    fn markov_chain_positive_on_modest_run() {
        let bits = bits_for_entries(200);
        let r = markov_estimate(17, 300, 200, bits).unwrap();
        assert!(r.estimate.transitions > 50_000);
        let m = r.estimate.matrix().unwrap();
        for row in &m {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        // occupation frequencies close to the stationary vector
        let (pi, _) = crate::stats::stationary_distribution(&m, 200);
        let l1: f64 =
            pi.iter().zip(&r.occupation).map(|(a, b)| (a - b).abs()).sum();
        assert!(l1 < 0.05, "occupation vs stationary l1 = {l1}");
    }

    #[test]
    fn wlln_concentrates() {
        let r = wlln_experiment(19, &[300, 3000], 48).unwrap();
        assert!(r[1].iqr < r[0].iqr, "IQR {} -> {}", r[0].iqr, r[1].iqr);
        assert!(r[1].median > 1.5 && r[1].median < 3.5, "median {}", r[1].median);
        for s in &r {
            assert!(s.median > 0.0);
        }
    }

    #[test]
    fn approx_error_decays() {
        let r = approx_error_experiment(23, &[2, 4, 6], 50_000, 60, 64).unwrap();
        assert!(r.rows[0].q90 > r.rows[1].q90);
        assert!(r.rows[1].q90 > r.rows[2].q90);
        assert!(r.rows.iter().all(|row| row.q50 <= row.q90 && row.q90 <= row.q99));
    }

    #[test]
    fn config_round_trip_and_dispatch() {
        let json = r#"{"experiment":"second_moment","seed":4,"n":200,"samples":4000}"#;
        let cfg: ExperimentConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.precision_bits, DEFAULT_PRECISION_BITS);
        let back: ExperimentConfig =
            serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, back);
        let out = run_experiment(&cfg).unwrap();
        assert!(out.pass);
        assert_eq!(out.summary["experiment"], "second_moment");
        let bad = ExperimentConfig { experiment: "nope".into(), ..cfg };
        assert!(run_experiment(&bad).is_err());
    }
}
