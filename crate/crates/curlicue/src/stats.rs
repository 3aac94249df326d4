//! Statistical primitives for the experiment layer: empirical
//! distributions, two-sample Kolmogorov-Smirnov distances, chi-square
//! goodness of fit and finite-state Markov chain estimation.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// A sorted sample, viewed as its empirical distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    sorted: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Argument("empty sample".into()));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::Argument("non-finite sample value".into()));
        }
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Self { sorted: samples })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    /// Right-continuous ECDF: F(x) = #{i : x_i <= x} / n.
    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.sorted.partition_point(|&v| v <= x);
        k as f64 / self.sorted.len() as f64
    }

    /// Empirical quantile at level p in [0, 1] (nearest-rank).
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("quantile level {p} outside [0,1]")));
        }
        let n = self.sorted.len();
        let rank = ((p * n as f64).ceil() as usize).clamp(1, n);
        Ok(self.sorted[rank - 1])
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.sorted.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.sorted.iter().map(|x| (x - m) * (x - m)).sum::<f64>()
            / (self.sorted.len() as f64 - 1.0).max(1.0)
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5).unwrap()
    }

    /// Interquartile range.
    pub fn iqr(&self) -> f64 {
        self.quantile(0.75).unwrap() - self.quantile(0.25).unwrap()
    }
}

/// Two-sample Kolmogorov-Smirnov statistic, exact via a sorted merge.
pub fn ks_statistic(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> f64 {
    let (xa, xb) = (a.samples(), b.samples());
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    // once one sample is exhausted the remaining gap is monotone toward 0,
    // so the merge loop has already seen the maximum
    d
}

/// One-sample KS distance against a supplied CDF, evaluated at the
/// sample points (both one-sided gaps).
pub fn ks_against_cdf(a: &EmpiricalDistribution, cdf: impl Fn(f64) -> f64) -> f64 {
    let n = a.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in a.samples().iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - f).abs());
    }
    d
}

/// Result of a chi-square goodness-of-fit test.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Chi-square test of observed counts against expected counts. Bins with
/// expected count below 5 are pooled into their left neighbor.
pub fn chi_square_gof(observed: &[u64], expected: &[f64]) -> Result<ChiSquareResult> {
    if observed.len() != expected.len() || observed.len() < 2 {
        return Err(Error::Argument("need matching bins, at least two".into()));
    }
    if expected.iter().any(|&e| !e.is_finite() || e < 0.0) {
        return Err(Error::Argument("invalid expected counts".into()));
    }
    let mut pooled: Vec<(f64, f64)> = Vec::new(); // (observed, expected)
    for (&o, &e) in observed.iter().zip(expected) {
        match pooled.last_mut() {
            Some(last) if last.1 < 5.0 => {
                last.0 += o as f64;
                last.1 += e;
            }
            _ => pooled.push((o as f64, e)),
        }
    }
    // a trailing underfilled bin gets pooled backwards
    while pooled.len() > 1 && pooled.last().unwrap().1 < 5.0 {
        let (o, e) = pooled.pop().unwrap();
        let last = pooled.last_mut().unwrap();
        last.0 += o;
        last.1 += e;
    }
    if pooled.len() < 2 {
        return Err(Error::Argument("all mass pooled into one bin".into()));
    }
    let statistic: f64 = pooled.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let dof = pooled.len() - 1;
    let dist = ChiSquared::new(dof as f64)
        .map_err(|e| Error::Argument(format!("chi-square setup: {e}")))?;
    Ok(ChiSquareResult { statistic, dof, p_value: 1.0 - dist.cdf(statistic) })
}

/// Row-stochastic transition-matrix estimate on a finite state space.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovEstimate {
    pub states: usize,
    pub counts: Vec<Vec<u64>>,
    pub transitions: u64,
}

impl MarkovEstimate {
    pub fn new(states: usize) -> Self {
        Self { states, counts: vec![vec![0; states]; states], transitions: 0 }
    }

    pub fn record(&mut self, from: usize, to: usize) {
        self.counts[from][to] += 1;
        self.transitions += 1;
    }

    /// Merge another estimate (for sharded accumulation).
    pub fn merge(&mut self, other: &MarkovEstimate) {
        assert_eq!(self.states, other.states);
        for (row, orow) in self.counts.iter_mut().zip(&other.counts) {
            for (c, oc) in row.iter_mut().zip(orow) {
                *c += oc;
            }
        }
        self.transitions += other.transitions;
    }

    /// Row-normalized transition matrix. Errors if some visited row is
    /// empty; unvisited rows are an error too since the chain is supposed
    /// to be irreducible.
    pub fn matrix(&self) -> Result<Vec<Vec<f64>>> {
        let mut m = Vec::with_capacity(self.states);
        for (i, row) in self.counts.iter().enumerate() {
            let total: u64 = row.iter().sum();
            if total == 0 {
                return Err(Error::InvariantViolation(format!(
                    "state {i} never visited; cannot normalize its row"
                )));
            }
            m.push(row.iter().map(|&c| c as f64 / total as f64).collect());
        }
        Ok(m)
    }

    pub fn min_entry(&self) -> Result<f64> {
        let m = self.matrix()?;
        Ok(m.iter().flatten().cloned().fold(f64::INFINITY, f64::min))
    }
}

/// Stationary distribution of a row-stochastic matrix by power iteration,
/// together with the sequence of l1 distances between successive iterates
/// (geometric decay certifies a spectral gap).
pub fn stationary_distribution(matrix: &[Vec<f64>], iters: usize) -> (Vec<f64>, Vec<f64>) {
    let n = matrix.len();
    let mut pi = vec![1.0 / n as f64; n];
    let mut gaps = Vec::with_capacity(iters);
    for _ in 0..iters {
        let mut next = vec![0.0; n];
        for (i, row) in matrix.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                next[j] += pi[i] * p;
            }
        }
        let norm: f64 = next.iter().sum();
        for x in &mut next {
            *x /= norm;
        }
        gaps.push(pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum());
        pi = next;
    }
    (pi, gaps)
}

/// Ordinary least squares y = a + b x; returns (intercept, slope, r_squared).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Argument("need at least two matched points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Argument("degenerate x values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok((intercept, slope, r2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ecdf_is_right_continuous_with_mass_one() {
        let d = EmpiricalDistribution::new(vec![2.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(d.cdf(0.9), 0.0);
        assert_eq!(d.cdf(1.0), 0.25); // jump attained at the point
        assert_eq!(d.cdf(2.0), 0.75);
        assert_eq!(d.cdf(3.0), 1.0);
        assert_eq!(d.cdf(100.0), 1.0);
    }

    #[test]
    fn quantiles_and_moments() {
        let d = EmpiricalDistribution::new((1..=100).map(|i| i as f64).collect()).unwrap();
        assert_eq!(d.quantile(0.5).unwrap(), 50.0);
        assert_eq!(d.quantile(0.9).unwrap(), 90.0);
        assert_eq!(d.quantile(0.0).unwrap(), 1.0);
        assert_eq!(d.quantile(1.0).unwrap(), 100.0);
        assert!((d.mean() - 50.5).abs() < 1e-12);
        assert_eq!(d.iqr(), 50.0);
    }

    #[test]
    fn ks_self_is_zero_and_disjoint_is_one() {
        let a = EmpiricalDistribution::new(vec![1.0, 2.0, 3.0]).unwrap();
        let b = EmpiricalDistribution::new(vec![10.0, 11.0]).unwrap();
        assert_eq!(ks_statistic(&a, &a), 0.0);
        assert_eq!(ks_statistic(&a, &b), 1.0);
        assert_eq!(ks_statistic(&b, &a), 1.0);
    }

    #[test]
    fn ks_known_value() {
        // F_a jumps 1/2 at 1 and 3; F_b jumps 1/2 at 2 and 4.
        // Max gap 1/2 on [1,2).
        let a = EmpiricalDistribution::new(vec![1.0, 3.0]).unwrap();
        let b = EmpiricalDistribution::new(vec![2.0, 4.0]).unwrap();
        assert_eq!(ks_statistic(&a, &b), 0.5);
    }

    #[test]
    fn ks_against_uniform_cdf() {
        let n = 10_000;
        let samples: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = EmpiricalDistribution::new(samples).unwrap();
        assert!(ks_against_cdf(&d, |x| x.clamp(0.0, 1.0)) < 1e-3);
    }

    #[test]
    fn chi_square_uniform_counts() {
        let observed = vec![100u64; 10];
        let expected = vec![100.0; 10];
        let r = chi_square_gof(&observed, &expected).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.dof, 9);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi_square_detects_bias() {
        let observed = vec![200u64, 50, 100, 50];
        let expected = vec![100.0; 4];
        let r = chi_square_gof(&observed, &expected).unwrap();
        assert!(r.p_value < 1e-6);
    }

    #[test]
    fn chi_square_pools_small_bins() {
        let observed = vec![3u64, 4, 500, 493];
        let expected = vec![2.0, 4.0, 497.0, 497.0];
        let r = chi_square_gof(&observed, &expected).unwrap();
        assert_eq!(r.dof, 2); // first two bins pooled
        assert!(r.p_value > 0.5);
    }

    #[test]
    fn markov_two_state() {
        let mut m = MarkovEstimate::new(2);
        for _ in 0..30 {
            m.record(0, 1);
            m.record(1, 0);
            m.record(1, 1);
        }
        let mat = m.matrix().unwrap();
        assert_eq!(mat[0], vec![0.0, 1.0]);
        assert!((mat[1][0] - 0.5).abs() < 1e-12);
        let (pi, gaps) = stationary_distribution(&mat, 60);
        // stationary: pi = (1/3, 2/3)
        assert!((pi[0] - 1.0 / 3.0).abs() < 1e-9);
        assert!((pi[1] - 2.0 / 3.0).abs() < 1e-9);
        assert!(gaps.last().unwrap() < &1e-12);
    }

    #[test]
    fn markov_merge_matches_single_pass() {
        let mut a = MarkovEstimate::new(3);
        let mut b = MarkovEstimate::new(3);
        let mut whole = MarkovEstimate::new(3);
        let path = [0usize, 1, 2, 0, 2, 1, 1, 0];
        for w in path.windows(2) {
            whole.record(w[0], w[1]);
        }
        for w in path[..4].windows(2) {
            a.record(w[0], w[1]);
        }
        for w in path[3..].windows(2) {
            b.record(w[0], w[1]);
        }
        a.merge(&b);
        assert_eq!(a, whole);
    }

    #[test]
    fn linear_fit_exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [3.0, 5.0, 7.0, 9.0];
        let (a, b, r2) = linear_fit(&xs, &ys).unwrap();
        assert!((a - 1.0).abs() < 1e-12);
        assert!((b - 2.0).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }
}
