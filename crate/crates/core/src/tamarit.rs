//! Single-parameter layer-composition model.
//!
//! An ego with `L` alters spread over `r` layers (innermost first) has
//! composition probability
//!
//! ```text
//! P(ℓ | L, μ, N) = B(L, L/(N-1), N-1) · ((e^μ - 1)/(e^{μr} - 1))^L · multinom(L; ℓ) · e^{μ Σ k ℓ_{k+1}}
//! ```
//!
//! so layer `k` (0-based) carries weight `e^{μk}` and `e^μ` approximates the
//! scale ratio between successive cumulative layers.

use alloc::vec::Vec;

use crate::distfit::{
    ad_test, chi2_gof, fit_family, ks_test, Chi2Outcome, Family, FitResult, GofOutcome, Params,
};
use crate::error::{invalid, Error, Result};
use crate::optimize::bisect_decreasing;
use crate::special::ln_gamma;

/// Search bracket for μ.
pub const MU_BRACKET: (f64, f64) = (-10.0, 10.0);
const MU_TOLERANCE: f64 = 1e-10;
/// Minimum number of finite estimates for the population fit.
pub const MIN_POPULATION: usize = 30;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TamaritInput {
    layers: Vec<u64>,
    total: u64,
    population: u64,
}

impl TamaritInput {
    /// `layers` holds ℓ_1..ℓ_r innermost first; `population` is N.
    pub fn new(layers: Vec<u64>, population: u64) -> Result<Self> {
        if layers.len() < 2 {
            return Err(invalid("the model needs at least two layers"));
        }
        let total: u64 = layers.iter().sum();
        if total == 0 {
            return Err(invalid("ego has no alters"));
        }
        if population <= total {
            return Err(invalid(alloc::format!(
                "population {population} must exceed the alter count {total}"
            )));
        }
        Ok(TamaritInput {
            layers,
            total,
            population,
        })
    }

    pub fn layers(&self) -> &[u64] {
        &self.layers
    }

    /// L, the number of alters.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn population(&self) -> u64 {
        self.population
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    /// Σ_k k·ℓ_{k+1}.
    fn depth_sum(&self) -> f64 {
        self.layers
            .iter()
            .enumerate()
            .map(|(k, &l)| k as f64 * l as f64)
            .sum()
    }
}

/// `ln((e^μ - 1)/(e^{μr} - 1))`, with the limit `-ln r` at μ = 0.
pub fn ln_normalizer(mu: f64, r: usize) -> f64 {
    let rf = r as f64;
    if mu == 0.0 {
        -libm::log(rf)
    } else if mu > 0.0 && rf * mu > 30.0 {
        libm::log(libm::expm1(mu)) - rf * mu - libm::log1p(-libm::exp(-rf * mu))
    } else if mu > 0.0 {
        libm::log(libm::expm1(mu)) - libm::log(libm::expm1(rf * mu))
    } else {
        libm::log(-libm::expm1(mu)) - libm::log(-libm::expm1(rf * mu))
    }
}

/// Log of the binomial factor `B(L, L/(N-1), N-1)`.
pub fn ln_binomial_factor(total: u64, population: u64) -> f64 {
    let trials = (population - 1) as f64;
    let l = total as f64;
    let p = l / trials;
    let rest = trials - l;
    let tail = if rest == 0.0 { 0.0 } else { rest * libm::log1p(-p) };
    ln_gamma(trials + 1.0) - ln_gamma(l + 1.0) - ln_gamma(rest + 1.0) + l * libm::log(p) + tail
}

/// Log of the multinomial coefficient `L! / Π ℓ_k!`.
pub fn ln_multinomial(layers: &[u64]) -> f64 {
    let total: u64 = layers.iter().sum();
    ln_gamma(total as f64 + 1.0) - layers.iter().map(|&l| ln_gamma(l as f64 + 1.0)).sum::<f64>()
}

/// The μ-dependent part of the model: the multinomial probability of `ℓ`
/// with layer probabilities proportional to `e^{μk}`.
pub fn ln_composition_probability(layers: &[u64], mu: f64) -> f64 {
    let total: u64 = layers.iter().sum();
    let depth: f64 = layers.iter().enumerate().map(|(k, &l)| k as f64 * l as f64).sum();
    total as f64 * ln_normalizer(mu, layers.len()) + ln_multinomial(layers) + mu * depth
}

/// Full log-likelihood of the composition at μ.
pub fn tamarit_log_likelihood(input: &TamaritInput, mu: f64) -> Result<f64> {
    if !mu.is_finite() {
        return Err(invalid("μ must be finite"));
    }
    Ok(ln_binomial_factor(input.total, input.population) + ln_composition_probability(&input.layers, mu))
}

/// Expected layer index `E_μ[k]` under weights `e^{μk}`, `k = 0..r-1`.
fn mean_depth(mu: f64, r: usize) -> f64 {
    let top = if mu > 0.0 { mu * (r - 1) as f64 } else { 0.0 };
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..r {
        let w = libm::exp(mu * k as f64 - top);
        num += k as f64 * w;
        den += w;
    }
    num / den
}

/// Where the maximum-likelihood μ landed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Divergence {
    #[default]
    None,
    /// Maximum at μ → -∞ (or below the bracket): all alters in the innermost layer.
    Lower,
    /// Maximum at μ → +∞ (or above the bracket): all alters in the outermost layer.
    Upper,
}

impl Divergence {
    pub fn name(self) -> &'static str {
        match self {
            Divergence::None => "none",
            Divergence::Lower => "lower",
            Divergence::Upper => "upper",
        }
    }

    pub fn is_divergent(self) -> bool {
        self != Divergence::None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TamaritEstimate {
    pub mu_hat: f64,
    /// `exp(mu_hat)`.
    pub ratio_hat: f64,
    pub log_likelihood: f64,
    pub divergence: Divergence,
}

/// Maximum-likelihood μ. The score `Σ kℓ_{k+1} - L·E_μ[k]` is strictly
/// decreasing, so its root is found by bisection on the bracket; when the
/// root lies outside, the bracket end is returned with a divergence flag.
pub fn estimate_mu(input: &TamaritInput) -> Result<TamaritEstimate> {
    let r = input.layer_count();
    let depth = input.depth_sum();
    let l = input.total as f64;
    let score = |mu: f64| depth - l * mean_depth(mu, r);
    let (lo, hi) = MU_BRACKET;
    let (mu_hat, divergence) = if score(lo) <= 0.0 {
        (lo, Divergence::Lower)
    } else if score(hi) >= 0.0 {
        (hi, Divergence::Upper)
    } else {
        (bisect_decreasing(score, lo, hi, MU_TOLERANCE), Divergence::None)
    };
    Ok(TamaritEstimate {
        mu_hat,
        ratio_hat: libm::exp(mu_hat),
        log_likelihood: tamarit_log_likelihood(input, mu_hat)?,
        divergence,
    })
}

/// Log-normal analysis of a population of scale ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioPopulationFit {
    pub fit: FitResult,
    pub chi2: Chi2Outcome,
    pub ks: GofOutcome,
    pub ad: GofOutcome,
    /// Sample median of the finite ratios.
    pub median_ratio: f64,
    /// Median of the fitted log-normal, `exp(μ̂)`.
    pub fitted_median: f64,
    pub used: usize,
    pub divergent: usize,
}

impl RatioPopulationFit {
    /// True when none of the three tests rejects at `level`.
    pub fn accepted_at(&self, level: f64) -> bool {
        self.chi2.pvalue > level && self.ks.pvalue > level && self.ad.pvalue > level
    }
}

/// Number of equal-probability χ² bins for `n` observations.
pub fn chi2_bin_count(n: usize) -> usize {
    let b = libm::ceil(2.0 * libm::pow(n as f64, 0.4)) as usize;
    b.clamp(4, 50)
}

/// Fits a log-normal to the non-divergent ratios and runs χ², KS and AD.
pub fn ratio_population_fit(estimates: &[TamaritEstimate]) -> Result<RatioPopulationFit> {
    let mut ratios: Vec<f64> = estimates
        .iter()
        .filter(|e| !e.divergence.is_divergent() && e.ratio_hat.is_finite())
        .map(|e| e.ratio_hat)
        .collect();
    let divergent = estimates.len() - ratios.len();
    if ratios.len() < MIN_POPULATION {
        return Err(Error::Inapplicable(alloc::format!(
            "{} finite ratio estimates, need at least {MIN_POPULATION}",
            ratios.len()
        )));
    }
    ratios.sort_by(f64::total_cmp);
    let fit = fit_family(&ratios, Family::LogNormal)?;
    let params = fit.params;
    let cdf = |x: f64| params.cdf(x);
    let chi2 = chi2_gof(&ratios, cdf, chi2_bin_count(ratios.len()), 2)?;
    let ks = ks_test(&ratios, cdf);
    let ad = ad_test(&ratios, cdf)?;
    let n = ratios.len();
    let median_ratio = if n % 2 == 1 {
        ratios[n / 2]
    } else {
        0.5 * (ratios[n / 2 - 1] + ratios[n / 2])
    };
    let fitted_median = match params {
        Params::LogNormal { mu, .. } => libm::exp(mu),
        _ => unreachable!("log-normal fit returns log-normal parameters"),
    };
    Ok(RatioPopulationFit {
        fit,
        chi2,
        ks,
        ad,
        median_ratio,
        fitted_median,
        used: n,
        divergent,
    })
}
