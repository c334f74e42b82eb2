//! Hypergeometric over-expression tests of directed links with Bonferroni
//! control.
//!
//! For a directed pair `i → j` with `X` co-occurrences, `N` total directed
//! events, `N_ic` events initiated by `i` and `N_jr` events received by `j`,
//! the null model draws `N_jr` of the `N` events at random; the p-value is
//! the probability of seeing at least `X` of `i`'s events among them.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::network::{NodeId, WeightedNetwork};
use crate::special::ln_hypergeom_pmf;

fn check_marginals(total: u64, initiated: u64, received: u64) -> Result<()> {
    if initiated > total || received > total {
        return Err(invalid(alloc::format!(
            "inconsistent marginals: N_ic={initiated}, N_jr={received}, N={total}"
        )));
    }
    Ok(())
}

fn support(total: u64, initiated: u64, received: u64) -> (u64, u64) {
    let lo = (initiated + received).saturating_sub(total);
    (lo, initiated.min(received))
}

/// `H(x | N, N_ic, N_jr)`; zero outside the support.
pub fn hypergeom_pmf(x: u64, total: u64, initiated: u64, received: u64) -> Result<f64> {
    check_marginals(total, initiated, received)?;
    Ok(libm::exp(ln_hypergeom_pmf(x, total, initiated, received)))
}

/// `P(X >= x_obs)` by summing each pmf term of the upper tail, smallest first.
pub fn upper_tail(x_obs: u64, total: u64, initiated: u64, received: u64) -> Result<f64> {
    check_marginals(total, initiated, received)?;
    let (lo, hi) = support(total, initiated, received);
    let from = x_obs.max(lo);
    if from > hi {
        return Ok(0.0);
    }
    Ok((from..=hi)
        .rev()
        .map(|x| libm::exp(ln_hypergeom_pmf(x, total, initiated, received)))
        .sum())
}

/// `P(X <= x)` by summing each pmf term of the lower tail, smallest first.
pub fn lower_tail(x: u64, total: u64, initiated: u64, received: u64) -> Result<f64> {
    check_marginals(total, initiated, received)?;
    let (lo, hi) = support(total, initiated, received);
    if x < lo {
        return Ok(0.0);
    }
    let to = x.min(hi);
    Ok((lo..=to)
        .map(|x| libm::exp(ln_hypergeom_pmf(x, total, initiated, received)))
        .sum())
}

/// Over-expression p-value `P(X >= x_obs)`.
///
/// Above the mode the tail is summed directly from `x_obs` upward with the
/// pmf ratio recurrence, so tiny p-values keep full relative precision. At
/// or below the mode the complement of the (decreasing) lower tail is used.
pub fn overexpression_pvalue(x_obs: u64, total: u64, initiated: u64, received: u64) -> Result<f64> {
    check_marginals(total, initiated, received)?;
    let (lo, hi) = support(total, initiated, received);
    if x_obs <= lo {
        return Ok(1.0);
    }
    if x_obs > hi {
        return Ok(0.0);
    }
    let (n, a, b) = (total as f64, initiated as f64, received as f64);
    let mode = libm::floor((b + 1.0) * (a + 1.0) / (n + 2.0)) as u64;
    if x_obs > mode {
        // H(x+1)/H(x) = (a-x)(b-x) / ((x+1)(n-a-b+x+1))
        let mut term = 1.0;
        let mut sum = 1.0;
        for x in x_obs..hi {
            let xf = x as f64;
            term *= (a - xf) * (b - xf) / ((xf + 1.0) * (n - a - b + xf + 1.0));
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
        }
        let ln_p = ln_hypergeom_pmf(x_obs, total, initiated, received) + libm::log(sum);
        Ok(libm::exp(ln_p).clamp(0.0, 1.0))
    } else {
        // Lower tail P(X <= x_obs - 1), walking down from the anchor.
        let anchor = x_obs - 1;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut x = anchor;
        while x > lo {
            let xf = x as f64;
            // H(x-1)/H(x) = x(n-a-b+x) / ((a-x+1)(b-x+1))
            term *= xf * (n - a - b + xf) / ((a - xf + 1.0) * (b - xf + 1.0));
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
            x -= 1;
        }
        let lower = libm::exp(ln_hypergeom_pmf(anchor, total, initiated, received) + libm::log(sum));
        Ok((1.0 - lower).clamp(0.0, 1.0))
    }
}

/// `alpha / (n (n - 1) / 2)`.
pub fn bonferroni_threshold(node_count: u64, alpha: f64) -> Result<f64> {
    if node_count < 2 {
        return Err(invalid("Bonferroni threshold needs at least two nodes"));
    }
    check_alpha(alpha)?;
    let pairs = node_count as f64 * (node_count - 1) as f64 / 2.0;
    Ok(alpha / pairs)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(alloc::format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// How the two directional tests of an edge combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RetentionRule {
    #[default]
    BothDirections,
    EitherDirection,
}

/// Number of hypotheses the significance budget is divided by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdBase {
    /// All possible node pairs, `n (n - 1) / 2`.
    #[default]
    MaximalPairs,
    /// Edges actually tested.
    TestedEdges,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationConfig {
    pub alpha: f64,
    pub rule: RetentionRule,
    pub threshold_base: ThresholdBase,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            alpha: 0.01,
            rule: RetentionRule::BothDirections,
            threshold_base: ThresholdBase::MaximalPairs,
        }
    }
}

/// Test outcome for one undirected edge `{i, j}`, `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeValidation {
    pub i: NodeId,
    pub j: NodeId,
    pub count_ij: u64,
    pub count_ji: u64,
    pub p_ij: f64,
    pub p_ji: f64,
    pub significant: bool,
}

impl RetentionRule {
    pub fn holds(self, p_ij: f64, p_ji: f64, threshold: f64) -> bool {
        match self {
            RetentionRule::BothDirections => p_ij < threshold && p_ji < threshold,
            RetentionRule::EitherDirection => p_ij < threshold || p_ji < threshold,
        }
    }
}

/// Per-network test state; `test` is independent per edge.
#[derive(Debug, Clone)]
pub struct Validator<'a> {
    network: &'a WeightedNetwork,
    rule: RetentionRule,
    threshold: f64,
}

impl<'a> Validator<'a> {
    pub fn new(network: &'a WeightedNetwork, cfg: &ValidationConfig) -> Result<Self> {
        check_alpha(cfg.alpha)?;
        let threshold = match cfg.threshold_base {
            ThresholdBase::MaximalPairs => bonferroni_threshold(network.node_count() as u64, cfg.alpha)
                .unwrap_or(cfg.alpha),
            ThresholdBase::TestedEdges => cfg.alpha / network.edge_count().max(1) as f64,
        };
        Ok(Validator {
            network,
            rule: cfg.rule,
            threshold,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    fn directed_pvalue(&self, s: NodeId, t: NodeId) -> Result<f64> {
        let x = self.network.count(s, t);
        if x == 0 {
            return Ok(1.0);
        }
        overexpression_pvalue(
            x,
            self.network.grand_total(),
            self.network.out_total(s),
            self.network.in_total(t),
        )
    }

    pub fn test(&self, i: NodeId, j: NodeId) -> Result<EdgeValidation> {
        let p_ij = self.directed_pvalue(i, j)?;
        let p_ji = self.directed_pvalue(j, i)?;
        Ok(EdgeValidation {
            i,
            j,
            count_ij: self.network.count(i, j),
            count_ji: self.network.count(j, i),
            p_ij,
            p_ji,
            significant: self.rule.holds(p_ij, p_ji, self.threshold),
        })
    }

    /// Assembles the validated network from a complete, ordered report.
    pub fn finish(&self, report: Vec<EdgeValidation>) -> Validation {
        let kept: BTreeSet<(NodeId, NodeId)> = report
            .iter()
            .filter(|e| e.significant)
            .map(|e| (e.i, e.j))
            .collect();
        Validation {
            network: self.network.with_edges(kept),
            report,
            threshold: self.threshold,
        }
    }
}

/// A validated network and the per-edge evidence behind it.
#[derive(Debug, Clone)]
pub struct Validation {
    pub network: WeightedNetwork,
    pub report: Vec<EdgeValidation>,
    pub threshold: f64,
}

/// Tests both directions of every edge and keeps the edges satisfying the
/// retention rule. Directed statistics and marginals are left untouched.
///
/// A network with fewer than two nodes has no edges; its threshold falls
/// back to `alpha`.
pub fn validate_network(network: &WeightedNetwork, cfg: &ValidationConfig) -> Result<Validation> {
    let validator = Validator::new(network, cfg)?;
    let report = network
        .edge_set()
        .iter()
        .map(|&(i, j)| validator.test(i, j))
        .collect::<Result<Vec<_>>>()?;
    Ok(validator.finish(report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::EdgeRule;

    #[test]
    fn pmf_examples() {
        let h = hypergeom_pmf(4, 10, 5, 4).unwrap();
        assert!((h - 5.0 / 210.0).abs() < 1e-15);
        assert_eq!(hypergeom_pmf(0, 17, 0, 6).unwrap(), 1.0);
        let total: f64 = (0..=9).map(|x| hypergeom_pmf(x, 20, 7, 9).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-13);
        assert_eq!(hypergeom_pmf(8, 20, 7, 9).unwrap(), 0.0);
        assert!(hypergeom_pmf(1, 10, 11, 3).is_err());
    }

    #[test]
    fn pvalue_examples() {
        assert_eq!(overexpression_pvalue(0, 10, 5, 4).unwrap(), 1.0);
        let p = overexpression_pvalue(4, 10, 5, 4).unwrap();
        assert!((p - 5.0 / 210.0).abs() < 1e-15);
        let p = overexpression_pvalue(1, 4, 2, 2).unwrap();
        assert!((p - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn upper_and_lower_tails_complement() {
        for total in 0..=60u64 {
            for a in (0..=total).step_by(3) {
                for b in (0..=total).step_by(4) {
                    let (lo, hi) = support(total, a, b);
                    for x in lo..=hi {
                        let up = upper_tail(x, total, a, b).unwrap();
                        let low = if x == 0 { 0.0 } else { lower_tail(x - 1, total, a, b).unwrap() };
                        assert!((up - (1.0 - low)).abs() < 1e-10, "{total} {a} {b} {x}");
                    }
                }
            }
        }
    }

    #[test]
    fn pvalue_monotone_in_observation() {
        let (total, a, b) = (500u64, 120u64, 90u64);
        let mut prev = 1.0;
        for x in 0..=90 {
            let p = overexpression_pvalue(x, total, a, b).unwrap();
            assert!(p <= prev + 1e-15, "x={x}");
            prev = p;
        }
    }

    #[test]
    fn far_tail_keeps_relative_precision() {
        // P(X >= 40) when 40 of 40 draws hit a 100-of-10^6 subset:
        // exactly C(100,40)/C(10^6,40).
        let p = overexpression_pvalue(40, 1_000_000, 100, 40).unwrap();
        let exact_ln = crate::special::ln_choose(100, 40) - crate::special::ln_choose(1_000_000, 40);
        assert!(p > 0.0);
        assert!((libm::log(p) - exact_ln).abs() < 1e-8);
    }

    #[test]
    fn bonferroni_examples() {
        let p = bonferroni_threshold(100, 0.01).unwrap();
        assert!((p - 0.01 / 4950.0).abs() < 1e-20);
        assert_eq!(bonferroni_threshold(2, 0.01).unwrap(), 0.01);
        assert!((bonferroni_threshold(5, 0.05).unwrap() - 5e-3).abs() < 1e-18);
        assert!(bonferroni_threshold(1, 0.01).is_err());
        assert!(bonferroni_threshold(10, 0.0).is_err());
    }

    #[test]
    fn retention_rules() {
        let t = 1e-6;
        assert!(RetentionRule::BothDirections.holds(t / 2.0, t / 2.0, t));
        assert!(!RetentionRule::BothDirections.holds(t / 2.0, 2.0 * t, t));
        assert!(RetentionRule::EitherDirection.holds(t / 2.0, 2.0 * t, t));
        assert!(!RetentionRule::EitherDirection.holds(2.0 * t, 2.0 * t, t));
    }

    #[test]
    fn strong_pair_survives_background() {
        // Ring of weak links plus one pair that talks far more than its
        // marginals warrant.
        let mut counts = alloc::vec::Vec::new();
        let names: alloc::vec::Vec<alloc::string::String> =
            (0..40).map(|k| alloc::format!("n{k:02}")).collect();
        for k in 0..40 {
            let (a, b) = (names[k].clone(), names[(k + 1) % 40].clone());
            counts.push((a.clone(), b.clone(), 3u64));
            counts.push((b, a, 3u64));
        }
        counts.push((names[0].clone(), names[20].clone(), 60));
        counts.push((names[20].clone(), names[0].clone(), 60));
        let net = WeightedNetwork::from_directed_counts(counts, EdgeRule::MinWeight(3));
        let out = validate_network(&net, &ValidationConfig::default()).unwrap();
        assert_eq!(out.report.len(), net.edge_count());
        let (a, b) = (net.id_of("n00").unwrap(), net.id_of("n20").unwrap());
        assert!(out.network.has_edge(a, b));
        assert!(out.network.edge_count() < net.edge_count());
        assert_eq!(out.network.grand_total(), net.grand_total());
        for e in &out.report {
            assert!(net.has_edge(e.i, e.j));
            assert!((0.0..=1.0).contains(&e.p_ij) && (0.0..=1.0).contains(&e.p_ji));
        }
        let again = validate_network(&net, &ValidationConfig::default()).unwrap();
        assert_eq!(again.report, out.report);
    }
}
