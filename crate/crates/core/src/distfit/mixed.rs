//! Two-piece log-normal fits joined at a threshold `k_H`.
//!
//! Below the threshold the sample is modelled by a right-truncated
//! log-normal, above it by a left-truncated one. Each piece is fitted by
//! truncated maximum likelihood; the threshold minimizes the root-mean-square
//! relative deviation `(K_fit - K_emp) / (K_fit + K_emp)` between fitted and
//! empirical cdfs over both pieces.
//!
//! The empirical cdf uses Hazen plotting positions `(i - 1/2) / n` within
//! each piece.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::optimize::nelder_mead;
use crate::special::{normal_ln_cdf, normal_ln_sf, LN_SQRT_2PI};

/// Minimum number of observations on each side of a candidate threshold.
pub const MIN_SIDE: usize = 10;
/// Default size of the logarithmic threshold grid for large samples.
pub const DEFAULT_GRID: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruncationSide {
    /// Support `x <= bound` (right-truncated).
    Below,
    /// Support `x > bound` (left-truncated).
    Above,
}

/// Log-normal restricted to one side of `bound`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedLogNormal {
    pub mu: f64,
    pub sigma: f64,
    pub bound: f64,
    pub side: TruncationSide,
}

impl TruncatedLogNormal {
    fn z(&self, x: f64) -> f64 {
        (libm::log(x) - self.mu) / self.sigma
    }

    /// Log of the probability mass the untruncated law puts on the support.
    pub fn ln_mass(&self) -> f64 {
        let zb = self.z(self.bound);
        match self.side {
            TruncationSide::Below => normal_ln_cdf(zb),
            TruncationSide::Above => normal_ln_sf(zb),
        }
    }

    pub fn in_support(&self, x: f64) -> bool {
        x > 0.0
            && match self.side {
                TruncationSide::Below => x <= self.bound,
                TruncationSide::Above => x > self.bound,
            }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if !self.in_support(x) {
            return 0.0;
        }
        let z = self.z(x);
        libm::exp(-0.5 * z * z - LN_SQRT_2PI - libm::log(self.sigma * x) - self.ln_mass())
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let zb = self.z(self.bound);
        match self.side {
            TruncationSide::Below => {
                if x <= 0.0 {
                    0.0
                } else if x >= self.bound {
                    1.0
                } else {
                    libm::exp(normal_ln_cdf(self.z(x)) - normal_ln_cdf(zb))
                }
            }
            TruncationSide::Above => {
                if x <= self.bound {
                    0.0
                } else {
                    let ratio = libm::exp(normal_ln_sf(self.z(x)) - normal_ln_sf(zb));
                    (1.0 - ratio).clamp(0.0, 1.0)
                }
            }
        }
    }

    /// Truncated-likelihood MLE from sufficient statistics of `ln x`.
    fn fit(stats: LogStats, bound: f64, side: TruncationSide) -> TruncatedLogNormal {
        let n = stats.n as f64;
        let mean = stats.sum / n;
        let var = (stats.sum_sq / n - mean * mean).max(1e-12);
        let ln_bound = libm::log(bound);
        let nll = |p: &[f64]| -> f64 {
            let (mu, ln_sigma) = (p[0], p[1]);
            if !(-12.0..=6.0).contains(&ln_sigma) || (mu - ln_bound).abs() > 60.0 {
                return f64::INFINITY;
            }
            let sigma = libm::exp(ln_sigma);
            let quad = (stats.sum_sq - 2.0 * mu * stats.sum + n * mu * mu) / (2.0 * sigma * sigma);
            let zb = (ln_bound - mu) / sigma;
            let ln_mass = match side {
                TruncationSide::Below => normal_ln_cdf(zb),
                TruncationSide::Above => normal_ln_sf(zb),
            };
            stats.sum + n * ln_sigma + n * LN_SQRT_2PI + quad + n * ln_mass
        };
        let start = [mean, 0.5 * libm::log(var)];
        let (best, _) = nelder_mead(nll, &start, 0.3, 1e-12, 4000);
        // Restart from the first optimum to shake off a collapsed simplex.
        let (best, _) = nelder_mead(nll, &best, 0.1, 1e-13, 4000);
        TruncatedLogNormal {
            mu: best[0],
            sigma: libm::exp(best[1]),
            bound,
            side,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct LogStats {
    n: usize,
    sum: f64,
    sum_sq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualPoint {
    pub threshold: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedLogNormalFit {
    pub threshold: f64,
    /// Piece fitted to `x <= threshold`.
    pub below: TruncatedLogNormal,
    /// Piece fitted to `x > threshold`.
    pub above: TruncatedLogNormal,
    pub residual: f64,
    pub n_below: usize,
    pub n_above: usize,
    /// Residual at every admissible grid threshold, in grid order.
    pub curve: Vec<ResidualPoint>,
    /// Minimum residual within 5% of the median residual (no clear break).
    pub flat: bool,
}

/// Candidate thresholds leaving at least [`MIN_SIDE`] points on each side:
/// the distinct sample values when there are at most `max_points` of them,
/// otherwise `max_points` log-spaced values from the lowest candidate
/// upward, stopping short of the highest.
pub fn threshold_grid(sample: &[f64], max_points: usize) -> Vec<f64> {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n < 2 * MIN_SIDE || max_points == 0 {
        return Vec::new();
    }
    let (lo, hi) = (s[MIN_SIDE - 1], s[n - MIN_SIDE]);
    let mut distinct: Vec<f64> = s.iter().copied().filter(|&x| x >= lo && x < hi).collect();
    distinct.dedup();
    if distinct.len() <= max_points {
        return distinct;
    }
    let (llo, lhi) = (libm::log(lo), libm::log(hi));
    (0..max_points)
        .map(|i| libm::exp(llo + (lhi - llo) * i as f64 / max_points as f64))
        .filter(|&k| k < hi)
        .collect()
}

/// Fits the two-piece model on the default threshold grid.
pub fn fit_mixed_lognormal(sample: &[f64]) -> Result<MixedLogNormalFit> {
    check_sample(sample)?;
    fit_mixed_lognormal_on_grid(sample, &threshold_grid(sample, DEFAULT_GRID))
}

fn check_sample(sample: &[f64]) -> Result<()> {
    if sample.len() < 2 * MIN_SIDE {
        return Err(Error::Inapplicable(alloc::format!(
            "mixed log-normal fit needs at least {} observations",
            2 * MIN_SIDE
        )));
    }
    if let Some(&value) = sample.iter().find(|&&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::Domain {
            family: "log_normal",
            value,
        });
    }
    Ok(())
}

/// Fits the two-piece model scanning exactly the given thresholds.
/// Thresholds leaving fewer than [`MIN_SIDE`] points on a side are skipped;
/// ties in the residual go to the smaller threshold.
pub fn fit_mixed_lognormal_on_grid(sample: &[f64], grid: &[f64]) -> Result<MixedLogNormalFit> {
    check_sample(sample)?;
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let logs: Vec<f64> = s.iter().map(|&x| libm::log(x)).collect();
    let mut prefix = Vec::with_capacity(logs.len() + 1);
    prefix.push((0.0, 0.0));
    for &l in &logs {
        let (a, b) = *prefix.last().unwrap();
        prefix.push((a + l, b + l * l));
    }
    let stats = |from: usize, to: usize| LogStats {
        n: to - from,
        sum: prefix[to].0 - prefix[from].0,
        sum_sq: prefix[to].1 - prefix[from].1,
    };

    let mut thresholds: Vec<f64> = grid.to_vec();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    let mut best: Option<(f64, TruncatedLogNormal, TruncatedLogNormal, f64, usize)> = None;
    let mut curve = Vec::new();
    for &k in &thresholds {
        let split = s.partition_point(|&x| x <= k);
        if split < MIN_SIDE || s.len() - split < MIN_SIDE {
            continue;
        }
        let below = TruncatedLogNormal::fit(stats(0, split), k, TruncationSide::Below);
        let above = TruncatedLogNormal::fit(stats(split, s.len()), k, TruncationSide::Above);
        let r = residual(&s[..split], &below, &s[split..], &above);
        curve.push(ResidualPoint { threshold: k, residual: r });
        if best.as_ref().map_or(true, |b| r < b.3) {
            best = Some((k, below, above, r, split));
        }
    }
    let Some((threshold, below, above, residual, split)) = best else {
        return Err(Error::Inapplicable(
            "no candidate threshold leaves enough points on both sides".into(),
        ));
    };
    let mut rs: Vec<f64> = curve.iter().map(|p| p.residual).collect();
    rs.sort_by(f64::total_cmp);
    let median = if rs.len() % 2 == 1 {
        rs[rs.len() / 2]
    } else {
        0.5 * (rs[rs.len() / 2 - 1] + rs[rs.len() / 2])
    };
    Ok(MixedLogNormalFit {
        threshold,
        below,
        above,
        residual,
        n_below: split,
        n_above: s.len() - split,
        curve,
        flat: median - residual <= 0.05 * median,
    })
}

fn relative_sq_dev(piece: &[f64], fit: &TruncatedLogNormal) -> f64 {
    let n = piece.len() as f64;
    piece
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let emp = (i as f64 + 0.5) / n;
            let fitted = fit.cdf(x);
            let d = (fitted - emp) / (fitted + emp);
            d * d
        })
        .sum()
}

fn residual(below: &[f64], fb: &TruncatedLogNormal, above: &[f64], fa: &TruncatedLogNormal) -> f64 {
    let total = relative_sq_dev(below, fb) + relative_sq_dev(above, fa);
    libm::sqrt(total) / libm::sqrt((below.len() + above.len()) as f64)
}
