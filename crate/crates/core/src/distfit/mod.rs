//! Maximum-likelihood fits of heavy-tailed candidate families, goodness of
//! fit, AIC model choice and two-piece (mixed) log-normal fitting.

mod gof;
mod mixed;

pub use gof::{
    ad_test, bootstrap_pvalues, chi2_from_counts, chi2_gof, ks_statistic, ks_test, BootstrapPvalues,
    Chi2Outcome, GofOutcome,
};
pub use mixed::{
    fit_mixed_lognormal, fit_mixed_lognormal_on_grid, threshold_grid, MixedLogNormalFit, ResidualPoint,
    TruncatedLogNormal, TruncationSide,
};

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp, LogNormal, Normal};

use crate::error::{Error, Result};
use crate::special::{normal_cdf, LN_SQRT_2PI};

/// Candidate families, in tie-breaking order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    PowerLaw,
    Normal,
    Exponential,
    LogNormal,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::PowerLaw, Family::Normal, Family::Exponential, Family::LogNormal];

    pub fn name(self) -> &'static str {
        match self {
            Family::PowerLaw => "power_law",
            Family::Normal => "normal",
            Family::Exponential => "exponential",
            Family::LogNormal => "log_normal",
        }
    }

    pub fn param_count(self) -> usize {
        match self {
            Family::Exponential => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Fitted parameters of one family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Params {
    /// `f(x) = (α-1)/x_min (x/x_min)^-α`, `x >= x_min`.
    PowerLaw { alpha: f64, x_min: f64 },
    Normal { mu: f64, sigma: f64 },
    /// `f(x) = λ e^{-λx}`.
    Exponential { lambda: f64 },
    /// `ln x ~ N(mu, sigma²)`.
    LogNormal { mu: f64, sigma: f64 },
}

impl Params {
    pub fn family(&self) -> Family {
        match self {
            Params::PowerLaw { .. } => Family::PowerLaw,
            Params::Normal { .. } => Family::Normal,
            Params::Exponential { .. } => Family::Exponential,
            Params::LogNormal { .. } => Family::LogNormal,
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        match *self {
            Params::PowerLaw { alpha, x_min } => {
                if x < x_min {
                    f64::NEG_INFINITY
                } else {
                    libm::log(alpha - 1.0) - libm::log(x_min) - alpha * libm::log(x / x_min)
                }
            }
            Params::Normal { mu, sigma } => {
                let z = (x - mu) / sigma;
                -0.5 * z * z - libm::log(sigma) - LN_SQRT_2PI
            }
            Params::Exponential { lambda } => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    libm::log(lambda) - lambda * x
                }
            }
            Params::LogNormal { mu, sigma } => {
                if x <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    let lx = libm::log(x);
                    let z = (lx - mu) / sigma;
                    -0.5 * z * z - libm::log(sigma) - LN_SQRT_2PI - lx
                }
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        libm::exp(self.ln_pdf(x))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Params::PowerLaw { alpha, x_min } => {
                if x <= x_min {
                    0.0
                } else {
                    1.0 - libm::pow(x / x_min, 1.0 - alpha)
                }
            }
            Params::Normal { mu, sigma } => normal_cdf((x - mu) / sigma),
            Params::Exponential { lambda } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -libm::expm1(-lambda * x)
                }
            }
            Params::LogNormal { mu, sigma } => {
                if x <= 0.0 {
                    0.0
                } else {
                    normal_cdf((libm::log(x) - mu) / sigma)
                }
            }
        }
    }

    pub fn log_likelihood(&self, sample: &[f64]) -> f64 {
        sample.iter().map(|&x| self.ln_pdf(x)).sum()
    }

    /// Parameter values in a fixed order (used for reports and perturbation).
    pub fn values(&self) -> Vec<f64> {
        match *self {
            Params::PowerLaw { alpha, x_min } => alloc::vec![alpha, x_min],
            Params::Normal { mu, sigma } | Params::LogNormal { mu, sigma } => alloc::vec![mu, sigma],
            Params::Exponential { lambda } => alloc::vec![lambda],
        }
    }

    pub fn with_values(&self, v: &[f64]) -> Params {
        match self {
            Params::PowerLaw { .. } => Params::PowerLaw { alpha: v[0], x_min: v[1] },
            Params::Normal { .. } => Params::Normal { mu: v[0], sigma: v[1] },
            Params::Exponential { .. } => Params::Exponential { lambda: v[0] },
            Params::LogNormal { .. } => Params::LogNormal { mu: v[0], sigma: v[1] },
        }
    }

    /// Mean `1/λ` of an exponential fit.
    pub fn exponential_scale(&self) -> Option<f64> {
        match *self {
            Params::Exponential { lambda } => Some(1.0 / lambda),
            _ => None,
        }
    }

    /// `n` independent draws.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        match *self {
            Params::PowerLaw { alpha, x_min } => (0..n)
                .map(|_| {
                    let u: f64 = rng.random();
                    x_min * libm::pow(1.0 - u, -1.0 / (alpha - 1.0))
                })
                .collect(),
            Params::Normal { mu, sigma } => {
                let d = Normal::new(mu, sigma).expect("finite normal parameters");
                (0..n).map(|_| d.sample(rng)).collect()
            }
            Params::Exponential { lambda } => {
                let d = Exp::new(lambda).expect("positive rate");
                (0..n).map(|_| d.sample(rng)).collect()
            }
            Params::LogNormal { mu, sigma } => {
                let d = LogNormal::new(mu, sigma).expect("finite log-normal parameters");
                (0..n).map(|_| d.sample(rng)).collect()
            }
        }
    }
}

/// One family fitted to one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub params: Params,
    pub n: usize,
    pub log_likelihood: f64,
    pub aic: f64,
    pub ks_stat: f64,
    pub ks_pvalue: f64,
}

impl FitResult {
    pub fn family(&self) -> Family {
        self.params.family()
    }
}

/// Mean and 1/n standard deviation.
pub(crate) fn mean_sd(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (mut n, mut sum) = (0usize, 0.0);
    for v in values.clone() {
        n += 1;
        sum += v;
    }
    let mean = sum / n as f64;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (mean, libm::sqrt(ss / n as f64))
}

fn require_positive(sample: &[f64], family: Family) -> Result<()> {
    match sample.iter().find(|&&x| !(x > 0.0)) {
        Some(&value) => Err(Error::Domain {
            family: family.name(),
            value,
        }),
        None => Ok(()),
    }
}

/// Closed-form maximum-likelihood parameters.
pub fn mle_params(sample: &[f64], family: Family) -> Result<Params> {
    if sample.len() < 3 {
        return Err(Error::InvalidArgument(alloc::format!(
            "need at least 3 observations, got {}",
            sample.len()
        )));
    }
    if let Some(&value) = sample.iter().find(|x| !x.is_finite()) {
        return Err(Error::Domain {
            family: family.name(),
            value,
        });
    }
    let n = sample.len() as f64;
    match family {
        Family::Normal => {
            let (mu, sigma) = mean_sd(sample.iter().copied());
            if sigma == 0.0 {
                return Err(Error::Degenerate("zero variance".into()));
            }
            Ok(Params::Normal { mu, sigma })
        }
        Family::LogNormal => {
            require_positive(sample, family)?;
            let (mu, sigma) = mean_sd(sample.iter().map(|&x| libm::log(x)));
            if sigma == 0.0 {
                return Err(Error::Degenerate("zero variance of ln x".into()));
            }
            Ok(Params::LogNormal { mu, sigma })
        }
        Family::Exponential => {
            if let Some(&value) = sample.iter().find(|&&x| x < 0.0) {
                return Err(Error::Domain {
                    family: family.name(),
                    value,
                });
            }
            let mean = sample.iter().sum::<f64>() / n;
            if mean == 0.0 {
                return Err(Error::Degenerate("zero mean".into()));
            }
            Ok(Params::Exponential { lambda: 1.0 / mean })
        }
        Family::PowerLaw => {
            require_positive(sample, family)?;
            let x_min = sample.iter().copied().fold(f64::INFINITY, f64::min);
            let s: f64 = sample.iter().map(|&x| libm::log(x / x_min)).sum();
            if s == 0.0 {
                return Err(Error::Degenerate("all values equal x_min".into()));
            }
            Ok(Params::PowerLaw {
                alpha: 1.0 + n / s,
                x_min,
            })
        }
    }
}

/// Fits `family` by maximum likelihood and scores it (logL, AIC, KS).
pub fn fit_family(sample: &[f64], family: Family) -> Result<FitResult> {
    let params = mle_params(sample, family)?;
    Ok(score(sample, params))
}

/// Scores given parameters on a sample.
pub fn score(sample: &[f64], params: Params) -> FitResult {
    let log_likelihood = params.log_likelihood(sample);
    let k = params.family().param_count() as f64;
    let ks = ks_test(sample, |x| params.cdf(x));
    FitResult {
        params,
        n: sample.len(),
        log_likelihood,
        aic: 2.0 * k - 2.0 * log_likelihood,
        ks_stat: ks.statistic,
        ks_pvalue: ks.pvalue,
    }
}

/// Fits every family that admits the sample (families whose support
/// excludes a value are skipped).
pub fn fit_all(sample: &[f64]) -> Result<Vec<FitResult>> {
    let mut out = Vec::new();
    for family in Family::ALL {
        match fit_family(sample, family) {
            Ok(fit) => out.push(fit),
            Err(Error::Domain { .. }) | Err(Error::Degenerate(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Family with the smallest AIC; ties go to fewer parameters, then to the
/// fixed family order.
pub fn select_by_aic(results: &[FitResult]) -> Result<Family> {
    results
        .iter()
        .min_by(|a, b| {
            a.aic
                .total_cmp(&b.aic)
                .then(a.family().param_count().cmp(&b.family().param_count()))
                .then(a.family().cmp(&b.family()))
        })
        .map(FitResult::family)
        .ok_or_else(|| Error::InvalidArgument("no fit results to compare".into()))
}

/// Histogram density on logarithmic bins: `(bin centre, density)` for
/// non-empty bins. Values must be positive.
pub fn log_binned_density(sample: &[f64], bins: usize) -> Vec<(f64, f64)> {
    let positive: Vec<f64> = sample.iter().copied().filter(|&x| x > 0.0).collect();
    if positive.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = libm::log(positive.iter().copied().fold(f64::INFINITY, f64::min));
    let hi = libm::log(positive.iter().copied().fold(0.0, f64::max));
    if hi <= lo {
        return alloc::vec![(libm::exp(lo), 1.0)];
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = alloc::vec![0usize; bins];
    for &x in &positive {
        let b = (((libm::log(x) - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let n = positive.len() as f64;
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(b, &c)| {
            let left = libm::exp(lo + b as f64 * width);
            let right = libm::exp(lo + (b + 1) as f64 * width);
            (libm::sqrt(left * right), c as f64 / (n * (right - left)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::E;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lognormal_closed_form() {
        let fit = fit_family(&[1.0, E, E * E], Family::LogNormal).unwrap();
        let Params::LogNormal { mu, sigma } = fit.params else { panic!() };
        assert!((mu - 1.0).abs() < 1e-15);
        assert!((sigma - libm::sqrt(2.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn exponential_reports_scale() {
        let sample = [10.0, 16.71, 23.42];
        let fit = fit_family(&sample, Family::Exponential).unwrap();
        assert!((fit.params.exponential_scale().unwrap() - 16.71).abs() < 1e-12);
        let Params::Exponential { lambda } = fit.params else { panic!() };
        assert!((lambda - 1.0 / 16.71).abs() < 1e-15);
    }

    #[test]
    fn power_law_alpha_identity() {
        // Σ ln(x/x_min) = n  ⇒  α = 2
        let n = 4.0;
        let x_min = 2.0;
        let sample = [x_min, x_min * libm::exp(1.0), x_min * libm::exp(1.5), x_min * libm::exp(1.5)];
        let fit = fit_family(&sample, Family::PowerLaw).unwrap();
        let Params::PowerLaw { alpha, x_min: xm } = fit.params else { panic!() };
        assert_eq!(xm, x_min);
        assert!((alpha - (1.0 + n / 4.0)).abs() < 1e-14);
        assert!((alpha - 2.0).abs() < 1e-14);
    }

    #[test]
    fn domain_and_degenerate_errors() {
        assert!(matches!(fit_family(&[1.0, -2.0, 3.0], Family::LogNormal), Err(Error::Domain { .. })));
        assert!(matches!(fit_family(&[1.0, 0.0, 3.0], Family::PowerLaw), Err(Error::Domain { .. })));
        assert!(matches!(fit_family(&[2.0, 2.0, 2.0], Family::Normal), Err(Error::Degenerate(_))));
        assert!(matches!(fit_family(&[2.0, 2.0, 2.0], Family::LogNormal), Err(Error::Degenerate(_))));
        assert!(fit_family(&[1.0, 2.0], Family::Normal).is_err());
        // Normal admits negatives.
        assert!(fit_family(&[1.0, -2.0, 3.0], Family::Normal).is_ok());
    }

    #[test]
    fn aic_identity_and_mle_optimality() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sample = Params::LogNormal { mu: 1.0, sigma: 0.7 }.sample(&mut rng, 500);
        for family in Family::ALL {
            let fit = fit_family(&sample, family).unwrap();
            let k = family.param_count() as f64;
            assert!((fit.aic + 2.0 * fit.log_likelihood - 2.0 * k).abs() < 1e-9);
            let base = fit.params.values();
            // x_min is pinned to the sample minimum; only α is free.
            let free = if family == Family::PowerLaw { 1 } else { base.len() };
            for p in 0..free {
                for f in [0.99, 1.01] {
                    let mut v = base.clone();
                    v[p] *= f;
                    let ll = fit.params.with_values(&v).log_likelihood(&sample);
                    assert!(ll <= fit.log_likelihood, "{family} param {p} factor {f}");
                }
            }
        }
    }

    #[test]
    fn lognormal_matches_normal_on_logs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sample = Params::LogNormal { mu: 0.3, sigma: 1.2 }.sample(&mut rng, 1000);
        let logs: Vec<f64> = sample.iter().map(|&x| libm::log(x)).collect();
        let a = mle_params(&sample, Family::LogNormal).unwrap().values();
        let b = mle_params(&logs, Family::Normal).unwrap().values();
        assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
    }

    fn fake(family: Family, aic: f64) -> FitResult {
        let params = match family {
            Family::PowerLaw => Params::PowerLaw { alpha: 2.0, x_min: 1.0 },
            Family::Normal => Params::Normal { mu: 0.0, sigma: 1.0 },
            Family::Exponential => Params::Exponential { lambda: 1.0 },
            Family::LogNormal => Params::LogNormal { mu: 0.0, sigma: 1.0 },
        };
        FitResult { params, n: 10, log_likelihood: 0.0, aic, ks_stat: 0.0, ks_pvalue: 1.0 }
    }

    #[test]
    fn aic_selection_rules() {
        assert!(select_by_aic(&[]).is_err());
        assert_eq!(select_by_aic(&[fake(Family::Normal, 3.0)]).unwrap(), Family::Normal);
        assert_eq!(
            select_by_aic(&[fake(Family::LogNormal, 5.0), fake(Family::Exponential, 5.0)]).unwrap(),
            Family::Exponential
        );
        assert_eq!(
            select_by_aic(&[fake(Family::LogNormal, 5.0), fake(Family::Normal, 5.0)]).unwrap(),
            Family::Normal
        );
        assert_eq!(
            select_by_aic(&[fake(Family::LogNormal, 4.0), fake(Family::Exponential, 5.0)]).unwrap(),
            Family::LogNormal
        );
    }

    #[test]
    fn log_binned_density_integrates_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sample = Params::LogNormal { mu: 2.0, sigma: 1.0 }.sample(&mut rng, 5000);
        let dens = log_binned_density(&sample, 30);
        // Rebuild bin widths from centres: equal log widths.
        let lo = sample.iter().copied().fold(f64::INFINITY, f64::min).ln();
        let hi = sample.iter().copied().fold(0.0, f64::max).ln();
        let w = (hi - lo) / 30.0;
        let mass: f64 = dens
            .iter()
            .map(|&(c, d)| d * c * (libm::exp(w / 2.0) - libm::exp(-w / 2.0)))
            .sum();
        assert!((mass - 1.0).abs() < 1e-9);
    }
}
