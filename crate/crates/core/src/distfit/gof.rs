//! Kolmogorov–Smirnov, Pearson χ² and Anderson–Darling tests against a
//! fully specified cdf, plus a parametric bootstrap for fitted families.

use alloc::vec::Vec;

use rand::Rng;

use super::{mle_params, Family, Params};
use crate::error::{Error, Result};
use crate::special::{anderson_darling_cdf, chi2_sf, kolmogorov_sf};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GofOutcome {
    pub statistic: f64,
    pub pvalue: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chi2Outcome {
    pub statistic: f64,
    pub pvalue: f64,
    pub dof: usize,
    /// Bins left after merging those with expected count below 5.
    pub bins: usize,
}

fn sorted(sample: &[f64]) -> Vec<f64> {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Two-sided one-sample KS distance `sup |F_n - F|`.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let s = sorted(sample);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    d
}

/// KS test with the limiting Kolmogorov distribution of `√n D`.
pub fn ks_test<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> GofOutcome {
    if sample.is_empty() {
        return GofOutcome { statistic: 0.0, pvalue: 1.0 };
    }
    let d = ks_statistic(sample, cdf);
    GofOutcome {
        statistic: d,
        pvalue: kolmogorov_sf(libm::sqrt(sample.len() as f64) * d),
    }
}

/// Pearson χ² from observed counts and cell probabilities. Adjacent cells
/// are merged left to right until each expected count is at least 5 (a
/// short remainder joins the last merged cell). `estimated` parameters are
/// subtracted from the degrees of freedom.
pub fn chi2_from_counts(observed: &[u64], probs: &[f64], estimated: usize) -> Result<Chi2Outcome> {
    if observed.len() != probs.len() {
        return Err(Error::InvalidArgument("observed/probability length mismatch".into()));
    }
    let n: u64 = observed.iter().sum();
    let nf = n as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs) {
        o_acc += o as f64;
        e_acc += p * nf;
        if e_acc >= 5.0 {
            cells.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if e_acc > 0.0 || o_acc > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += o_acc;
                last.1 += e_acc;
            }
            None => cells.push((o_acc, e_acc)),
        }
    }
    if cells.len() < 2 || cells.len() <= 1 + estimated {
        return Err(Error::Inapplicable(alloc::format!(
            "only {} valid bins for {} estimated parameters",
            cells.len(),
            estimated
        )));
    }
    let statistic: f64 = cells.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let dof = cells.len() - 1 - estimated;
    Ok(Chi2Outcome {
        statistic,
        pvalue: chi2_sf(statistic, dof as f64),
        dof,
        bins: cells.len(),
    })
}

/// χ² test on `bins` equal-probability cells of the hypothesised cdf.
pub fn chi2_gof<F: Fn(f64) -> f64>(sample: &[f64], cdf: F, bins: usize, estimated: usize) -> Result<Chi2Outcome> {
    if bins < 2 {
        return Err(Error::Inapplicable("need at least 2 bins".into()));
    }
    let mut observed = alloc::vec![0u64; bins];
    for &x in sample {
        let u = cdf(x).clamp(0.0, 1.0);
        let b = ((u * bins as f64) as usize).min(bins - 1);
        observed[b] += 1;
    }
    let probs = alloc::vec![1.0 / bins as f64; bins];
    chi2_from_counts(&observed, &probs, estimated)
}

/// Anderson–Darling `A²` with the limiting-distribution p-value.
pub fn ad_test<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<GofOutcome> {
    if sample.len() < 8 {
        return Err(Error::Inapplicable(alloc::format!(
            "Anderson-Darling needs at least 8 observations, got {}",
            sample.len()
        )));
    }
    let a2 = ad_statistic(sample, cdf);
    Ok(GofOutcome {
        statistic: a2,
        pvalue: (1.0 - anderson_darling_cdf(a2)).clamp(0.0, 1.0),
    })
}

fn ad_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let s = sorted(sample);
    let n = s.len();
    let u: Vec<f64> = s.iter().map(|&x| cdf(x).clamp(1e-300, 1.0)).collect();
    let mut acc = 0.0;
    for i in 0..n {
        let lo = libm::log(u[i]);
        let hi = libm::log1p(-u[n - 1 - i]).max(-690.0);
        acc += (2 * i + 1) as f64 * (lo + hi);
    }
    (-(n as f64) - acc / n as f64).max(0.0)
}

/// Parametric-bootstrap p-values for KS and AD with re-estimated parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapPvalues {
    pub ks: f64,
    pub ad: f64,
    pub resamples: usize,
}

/// Draws `resamples` samples from `fitted`, refits `fitted.family()` on
/// each and compares the refitted statistics with the observed ones.
pub fn bootstrap_pvalues<R: Rng + ?Sized>(
    sample: &[f64],
    fitted: Params,
    resamples: usize,
    rng: &mut R,
) -> Result<BootstrapPvalues> {
    let family: Family = fitted.family();
    let d_obs = ks_statistic(sample, |x| fitted.cdf(x));
    let a_obs = ad_statistic(sample, |x| fitted.cdf(x));
    let (mut ks_hits, mut ad_hits) = (0usize, 0usize);
    for _ in 0..resamples {
        let draw = fitted.sample(rng, sample.len());
        let refit = mle_params(&draw, family)?;
        if ks_statistic(&draw, |x| refit.cdf(x)) >= d_obs {
            ks_hits += 1;
        }
        if ad_statistic(&draw, |x| refit.cdf(x)) >= a_obs {
            ad_hits += 1;
        }
    }
    let denom = (resamples + 1) as f64;
    Ok(BootstrapPvalues {
        ks: (ks_hits + 1) as f64 / denom,
        ad: (ad_hits + 1) as f64 / denom,
        resamples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::normal_cdf;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn std_normal() -> Params {
        Params::Normal { mu: 0.0, sigma: 1.0 }
    }

    /// Inverse of the standard normal cdf by bisection (test-only).
    fn probit(p: f64) -> f64 {
        let (mut lo, mut hi) = (-40.0, 40.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if normal_cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn quantile_sample_fits_well() {
        let n = 200;
        let sample: Vec<f64> = (1..=n).map(|i| probit(i as f64 / (n + 1) as f64)).collect();
        let ks = ks_test(&sample, normal_cdf);
        assert!(ks.statistic < 1.0 / n as f64 + 1e-9);
        assert!(ks.pvalue > 0.99);
        let ad = ad_test(&sample, normal_cdf).unwrap();
        assert!(ad.pvalue > 0.5, "{ad:?}");
    }

    #[test]
    fn shifted_sample_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sample = std_normal().sample(&mut rng, 1000);
        let shifted = Params::Normal { mu: 5.0, sigma: 1.0 };
        assert!(ks_test(&sample, |x| shifted.cdf(x)).pvalue < 1e-3);
        assert!(ad_test(&sample, |x| shifted.cdf(x)).unwrap().pvalue < 1e-3);
    }

    #[test]
    fn ks_invariant_under_monotone_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sample = std_normal().sample(&mut rng, 300);
        let d = ks_statistic(&sample, normal_cdf);
        let transformed: Vec<f64> = sample.iter().map(|&x| libm::exp(x)).collect();
        let d2 = ks_statistic(&transformed, |y| normal_cdf(libm::log(y)));
        assert!((d - d2).abs() < 1e-14);
    }

    #[test]
    fn chi2_exact_expectation_is_zero() {
        let out = chi2_from_counts(&[25, 25, 25, 25], &[0.25; 4], 0).unwrap();
        assert_eq!(out.statistic, 0.0);
        assert_eq!(out.pvalue, 1.0);
        assert_eq!(out.dof, 3);
    }

    #[test]
    fn chi2_merges_small_cells() {
        // n = 100: expected 50, 30, 10, 4, 3, 3 → last three merge into one cell of 10.
        let probs = [0.5, 0.3, 0.1, 0.04, 0.03, 0.03];
        let out = chi2_from_counts(&[50, 30, 10, 4, 3, 3], &probs, 0).unwrap();
        assert_eq!(out.bins, 4);
        assert_eq!(out.dof, 3);
        // Trailing short remainder folds into the previous cell.
        let probs = [0.48, 0.48, 0.04];
        let out = chi2_from_counts(&[48, 48, 4], &probs, 0).unwrap();
        assert_eq!(out.bins, 2);
        assert!(chi2_from_counts(&[3, 3], &[0.5, 0.5], 0).is_err());
    }

    #[test]
    fn ad_needs_eight_points_and_is_nonnegative() {
        assert!(ad_test(&[0.1; 7], normal_cdf).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let s = std_normal().sample(&mut rng, 20);
            assert!(ad_test(&s, normal_cdf).unwrap().statistic >= 0.0);
        }
    }

    #[test]
    fn bootstrap_accepts_correct_family() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let truth = Params::LogNormal { mu: 1.0, sigma: 0.5 };
        let sample = truth.sample(&mut rng, 300);
        let fitted = mle_params(&sample, Family::LogNormal).unwrap();
        let boot = bootstrap_pvalues(&sample, fitted, 99, &mut rng).unwrap();
        assert!(boot.ks > 0.01 && boot.ad > 0.01, "{boot:?}");
        let wrong = mle_params(&sample, Family::Normal).unwrap();
        let boot = bootstrap_pvalues(&sample, wrong, 99, &mut rng).unwrap();
        assert!(boot.ad <= 0.02, "{boot:?}");
    }
}
