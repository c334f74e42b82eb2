//! Per-ego layer detection.
//!
//! Alter weights are min-max normalized, clustered either by exact 1-D
//! k-means (number of clusters chosen by BIC) or by head/tail breaks, and
//! the clusters are summarized as layers ordered from the strongest ties
//! (innermost) outward, with cumulative sizes and successive scale ratios.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{invalid, Error, Result};
use crate::network::{NodeId, WeightedNetwork};

/// Reference cumulative layer sizes of the Dunbar circles.
pub const DUNBAR_CUMULATIVE: [f64; 4] = [5.0, 15.0, 50.0, 150.0];
/// Reference scale ratio reported alongside [`DUNBAR_CUMULATIVE`].
pub const DUNBAR_RATIO: f64 = 3.0;
/// Default upper bound on the number of k-means clusters.
pub const DEFAULT_K_MAX: usize = 8;
/// Default degree floor: only egos with degree strictly above it are analysed.
pub const DEFAULT_DEGREE_FLOOR: u64 = 100;
/// Head fraction below which the head is still considered heavy-tailed.
pub const HT_HEAD_FRACTION: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    KMeans,
    HtBreak,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::KMeans => "kmeans",
            Algorithm::HtBreak => "ht_break",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Min-max normalization onto `[0, 1]`.
pub fn normalize_weights(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.len() < 2 {
        return Err(invalid("normalization needs at least two weights"));
    }
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return Err(Error::Degenerate("all weights equal".into()));
    }
    Ok(raw.iter().map(|&w| (w - lo) / (hi - lo)).collect())
}

/// A clustering of 1-D values into contiguous groups.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub k: usize,
    /// Cluster of each input value; clusters numbered by ascending value.
    pub assignment: Vec<usize>,
    pub centers: Vec<f64>,
    pub sse: f64,
    /// `(k, BIC)` for every k evaluated.
    pub bic: Vec<(usize, f64)>,
}

struct SortedValues {
    order: Vec<usize>,
    values: Vec<f64>,
    prefix: Vec<f64>,
    prefix_sq: Vec<f64>,
}

impl SortedValues {
    fn new(values: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        // Centre before accumulating to limit cancellation in the SSE.
        let shift = sorted[sorted.len() / 2];
        let mut prefix = alloc::vec![0.0; sorted.len() + 1];
        let mut prefix_sq = alloc::vec![0.0; sorted.len() + 1];
        for (i, &v) in sorted.iter().enumerate() {
            let c = v - shift;
            prefix[i + 1] = prefix[i] + c;
            prefix_sq[i + 1] = prefix_sq[i] + c * c;
        }
        SortedValues {
            order,
            values: sorted,
            prefix,
            prefix_sq,
        }
    }

    /// Within-cluster sum of squares of `values[from..to]`.
    fn cost(&self, from: usize, to: usize) -> f64 {
        let m = (to - from) as f64;
        let s = self.prefix[to] - self.prefix[from];
        let sq = self.prefix_sq[to] - self.prefix_sq[from];
        (sq - s * s / m).max(0.0)
    }
}

/// Optimal split points for every cluster count up to `k_max`:
/// `splits[k-1]` holds the `k + 1` boundaries of the best k-partition.
fn dp_partitions(sv: &SortedValues, k_max: usize) -> Vec<Vec<usize>> {
    let n = sv.values.len();
    // best[k][i]: min SSE of values[..i] in k+1 clusters; arg[k][i]: start of the last one.
    let mut best = alloc::vec![alloc::vec![f64::INFINITY; n + 1]; k_max];
    let mut arg = alloc::vec![alloc::vec![0usize; n + 1]; k_max];
    for i in 1..=n {
        best[0][i] = sv.cost(0, i);
    }
    for k in 1..k_max {
        for i in (k + 1)..=n {
            let mut b = f64::INFINITY;
            let mut a = k;
            // Leftmost optimal start wins ties.
            for j in k..i {
                let c = best[k - 1][j] + sv.cost(j, i);
                if c < b {
                    b = c;
                    a = j;
                }
            }
            best[k][i] = b;
            arg[k][i] = a;
        }
    }
    (1..=k_max)
        .map(|k| {
            let mut bounds = alloc::vec![n];
            let mut i = n;
            for level in (1..k).rev() {
                i = arg[level][i];
                bounds.push(i);
            }
            bounds.push(0);
            bounds.reverse();
            bounds
        })
        .collect()
}

fn result_from_bounds(sv: &SortedValues, bounds: &[usize], bic: Vec<(usize, f64)>) -> KMeansResult {
    let k = bounds.len() - 1;
    let mut assignment = alloc::vec![0usize; sv.values.len()];
    let mut centers = Vec::with_capacity(k);
    let mut sse = 0.0;
    for c in 0..k {
        let (from, to) = (bounds[c], bounds[c + 1]);
        for pos in from..to {
            assignment[sv.order[pos]] = c;
        }
        let members = &sv.values[from..to];
        let center = members.iter().sum::<f64>() / members.len() as f64;
        centers.push(center);
        sse += members.iter().map(|v| (v - center) * (v - center)).sum::<f64>();
    }
    KMeansResult {
        k,
        assignment,
        centers,
        sse,
        bic,
    }
}

/// Hard-assignment Gaussian BIC of a contiguous partition.
fn partition_bic(sv: &SortedValues, bounds: &[usize], var_floor: f64) -> f64 {
    let n = sv.values.len() as f64;
    let k = bounds.len() - 1;
    let mut log_l = 0.0;
    for c in 0..k {
        let (from, to) = (bounds[c], bounds[c + 1]);
        let m = (to - from) as f64;
        let ss = sv.cost(from, to);
        let var = (ss / m).max(var_floor);
        log_l += m * libm::log(m / n)
            - 0.5 * m * libm::log(2.0 * core::f64::consts::PI * var)
            - ss / (2.0 * var);
    }
    (3 * k - 1) as f64 * libm::log(n) - 2.0 * log_l
}

/// Exact k-means for a fixed number of clusters.
pub fn kmeans_1d_fixed(values: &[f64], k: usize) -> Result<KMeansResult> {
    if k < 1 || k > values.len() {
        return Err(invalid(alloc::format!(
            "cluster count {k} outside 1..={}",
            values.len()
        )));
    }
    let sv = SortedValues::new(values);
    let parts = dp_partitions(&sv, k);
    Ok(result_from_bounds(&sv, &parts[k - 1], Vec::new()))
}

/// Exact k-means for every `k <= k_max`; returns the partition with the
/// smallest BIC (ties to the smaller k). The per-cluster variance floor is
/// `1e-6 · range²`.
pub fn kmeans_1d(values: &[f64], k_max: usize) -> Result<KMeansResult> {
    if k_max < 1 {
        return Err(invalid("k_max must be at least 1"));
    }
    if values.is_empty() {
        return Err(invalid("no values to cluster"));
    }
    let sv = SortedValues::new(values);
    let n = values.len();
    let range = sv.values[n - 1] - sv.values[0];
    if range == 0.0 {
        return Ok(result_from_bounds(&sv, &[0, n], alloc::vec![(1, f64::NAN)]));
    }
    let k_max = k_max.min(n);
    let var_floor = 1e-6 * range * range;
    let parts = dp_partitions(&sv, k_max);
    let bic: Vec<(usize, f64)> = parts
        .iter()
        .enumerate()
        .map(|(i, b)| (i + 1, partition_bic(&sv, b, var_floor)))
        .collect();
    let (best_k, _) = bic
        .iter()
        .copied()
        .fold((0usize, f64::INFINITY), |acc, (k, b)| if b < acc.1 { (k, b) } else { acc });
    Ok(result_from_bounds(&sv, &parts[best_k - 1], bic))
}

/// Head/tail breaks of a set of values.
#[derive(Debug, Clone, PartialEq)]
pub struct HtBreaks {
    /// Strictly increasing split means.
    pub breaks: Vec<f64>,
    /// Fraction of the split set that fell in the head, per break.
    pub head_fractions: Vec<f64>,
    /// Band of each value: 0 for values `<= breaks[0]`, increasing inward.
    pub assignment: Vec<usize>,
}

/// Repeatedly splits the current head at its mean. A split is recorded
/// whenever the head is non-empty; iteration continues while the head holds
/// fewer than 40% of the current values and at least two of them.
pub fn ht_break(values: &[f64]) -> HtBreaks {
    let mut breaks = Vec::new();
    let mut head_fractions = Vec::new();
    let mut current: Vec<f64> = values.to_vec();
    while current.len() >= 2 {
        let mean = current.iter().sum::<f64>() / current.len() as f64;
        let head: Vec<f64> = current.iter().copied().filter(|&v| v > mean).collect();
        if head.is_empty() {
            break;
        }
        let fraction = head.len() as f64 / current.len() as f64;
        breaks.push(mean);
        head_fractions.push(fraction);
        if !(fraction < HT_HEAD_FRACTION && head.len() >= 2) {
            break;
        }
        current = head;
    }
    let assignment = values
        .iter()
        .map(|&v| breaks.partition_point(|&b| b < v))
        .collect();
    HtBreaks {
        breaks,
        head_fractions,
        assignment,
    }
}

/// Layers of one ego, innermost (strongest ties) first.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerPartition {
    /// ℓ_k, alters per layer.
    pub sizes: Vec<usize>,
    /// n_k = Σ_{j<=k} ℓ_j.
    pub cumulative: Vec<usize>,
    /// n_{k+1} / n_k.
    pub ratios: Vec<f64>,
    /// Arithmetic mean of `ratios`; absent for a single layer.
    pub mean_ratio: Option<f64>,
    /// Mean weight of each layer.
    pub layer_means: Vec<f64>,
    /// Layer (0 = innermost) of each alter, in input order.
    pub layer_of: Vec<usize>,
}

impl LayerPartition {
    pub fn layer_count(&self) -> usize {
        self.sizes.len()
    }
}

/// Orders clusters by descending mean weight and derives cumulative counts
/// and scale ratios. Cluster labels need not be contiguous.
pub fn summarize_layers(weights: &[f64], assignment: &[usize]) -> Result<LayerPartition> {
    if weights.len() != assignment.len() {
        return Err(invalid("assignment does not cover every alter"));
    }
    let mut groups: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
    for (&w, &c) in weights.iter().zip(assignment) {
        let g = groups.entry(c).or_insert((0, 0.0));
        g.0 += 1;
        g.1 += w;
    }
    let mut clusters: Vec<(usize, usize, f64)> = groups
        .into_iter()
        .map(|(label, (count, sum))| (label, count, sum / count as f64))
        .collect();
    clusters.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
    let rank: BTreeMap<usize, usize> = clusters.iter().enumerate().map(|(r, c)| (c.0, r)).collect();
    let sizes: Vec<usize> = clusters.iter().map(|c| c.1).collect();
    let layer_means = clusters.iter().map(|c| c.2).collect();
    let cumulative: Vec<usize> = sizes
        .iter()
        .scan(0, |acc, &s| {
            *acc += s;
            Some(*acc)
        })
        .collect();
    let ratios: Vec<f64> = cumulative
        .windows(2)
        .map(|w| w[1] as f64 / w[0] as f64)
        .collect();
    let mean_ratio = if ratios.is_empty() {
        None
    } else {
        Some(ratios.iter().sum::<f64>() / ratios.len() as f64)
    };
    Ok(LayerPartition {
        sizes,
        cumulative,
        ratios,
        mean_ratio,
        layer_means,
        layer_of: assignment.iter().map(|c| rank[c]).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JaccardVariant {
    /// Pairs co-clustered in both over pairs co-clustered in either.
    #[default]
    CoMembership,
    /// Size-weighted best-match Jaccard between clusters, symmetrized.
    LayerMatching,
}

fn pairs(m: u64) -> u64 {
    m * m.saturating_sub(1) / 2
}

/// Similarity of two clusterings of the same alters.
pub fn jaccard_compare(a: &[usize], b: &[usize], variant: JaccardVariant) -> Result<f64> {
    if a.len() != b.len() {
        return Err(invalid("clusterings cover different alter sets"));
    }
    let mut joint: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut size_a: BTreeMap<usize, u64> = BTreeMap::new();
    let mut size_b: BTreeMap<usize, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_insert(0) += 1;
        *size_a.entry(x).or_insert(0) += 1;
        *size_b.entry(y).or_insert(0) += 1;
    }
    match variant {
        JaccardVariant::CoMembership => {
            let both: u64 = joint.values().map(|&m| pairs(m)).sum();
            let in_a: u64 = size_a.values().map(|&m| pairs(m)).sum();
            let in_b: u64 = size_b.values().map(|&m| pairs(m)).sum();
            let either = in_a + in_b - both;
            Ok(if either == 0 { 1.0 } else { both as f64 / either as f64 })
        }
        JaccardVariant::LayerMatching => {
            if a.is_empty() {
                return Ok(1.0);
            }
            let n = a.len() as f64;
            let directed = |sa: &BTreeMap<usize, u64>, sb: &BTreeMap<usize, u64>, swap: bool| -> f64 {
                sa.iter()
                    .map(|(&ca, &na)| {
                        let best = sb
                            .iter()
                            .map(|(&cb, &nb)| {
                                let key = if swap { (cb, ca) } else { (ca, cb) };
                                let inter = joint.get(&key).copied().unwrap_or(0);
                                inter as f64 / (na + nb - inter) as f64
                            })
                            .fold(0.0, f64::max);
                        na as f64 * best
                    })
                    .sum::<f64>()
                    / n
            };
            Ok(0.5 * (directed(&size_a, &size_b, false) + directed(&size_b, &size_a, true)))
        }
    }
}

/// Layer analysis of one ego.
#[derive(Debug, Clone, PartialEq)]
pub enum EgoOutcome {
    Layered(LayerPartition),
    /// All alter weights equal: a single layer, kept out of layer statistics.
    Degenerate,
}

/// Normalizes, clusters and summarizes one ego's alter weights.
pub fn analyze_ego(weights: &[u64], algorithm: Algorithm, k_max: usize) -> Result<EgoOutcome> {
    let raw: Vec<f64> = weights.iter().map(|&w| w as f64).collect();
    let normalized = match normalize_weights(&raw) {
        Ok(v) => v,
        Err(Error::Degenerate(_)) => return Ok(EgoOutcome::Degenerate),
        Err(e) => return Err(e),
    };
    let assignment = match algorithm {
        Algorithm::KMeans => kmeans_1d(&normalized, k_max)?.assignment,
        Algorithm::HtBreak => ht_break(&normalized).assignment,
    };
    Ok(EgoOutcome::Layered(summarize_layers(&normalized, &assignment)?))
}

/// One analysed ego.
#[derive(Debug, Clone, PartialEq)]
pub struct EgoLayers {
    pub ego: NodeId,
    /// Alters in ascending id order, aligned with `weights`.
    pub alters: Vec<NodeId>,
    pub weights: Vec<u64>,
    pub outcome: EgoOutcome,
}

impl EgoLayers {
    pub fn partition(&self) -> Option<&LayerPartition> {
        match &self.outcome {
            EgoOutcome::Layered(p) => Some(p),
            EgoOutcome::Degenerate => None,
        }
    }
}

/// Egos with degree strictly above `degree_floor`, ascending id, with their
/// alter lists.
pub fn eligible_egos(network: &WeightedNetwork, degree_floor: u64) -> Vec<(NodeId, Vec<(NodeId, u64)>)> {
    network
        .adjacency()
        .into_iter()
        .enumerate()
        .filter(|(_, alters)| alters.len() as u64 > degree_floor)
        .map(|(ego, alters)| (ego as NodeId, alters))
        .collect()
}

pub fn analyze_alters(
    ego: NodeId,
    alters: Vec<(NodeId, u64)>,
    algorithm: Algorithm,
    k_max: usize,
) -> Result<EgoLayers> {
    let (ids, weights): (Vec<NodeId>, Vec<u64>) = alters.into_iter().unzip();
    let outcome = analyze_ego(&weights, algorithm, k_max)?;
    Ok(EgoLayers {
        ego,
        alters: ids,
        weights,
        outcome,
    })
}

/// Egos sharing one layer count.
#[derive(Debug, Clone, PartialEq)]
pub struct CensusRow {
    pub layers: usize,
    pub count: usize,
    /// Share of the non-degenerate egos.
    pub fraction: f64,
    pub mean_sizes: Vec<f64>,
    pub mean_cumulative: Vec<f64>,
    /// Mean over egos of their mean scale ratio (absent for one layer).
    pub mean_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Census {
    pub algorithm: Algorithm,
    pub egos: usize,
    pub degenerate: usize,
    pub rows: Vec<CensusRow>,
}

/// Aggregates per-ego outcomes by layer count.
pub fn census_from<'a, I>(algorithm: Algorithm, outcomes: I) -> Census
where
    I: IntoIterator<Item = &'a EgoOutcome>,
{
    let mut groups: BTreeMap<usize, Vec<&LayerPartition>> = BTreeMap::new();
    let mut degenerate = 0;
    let mut total = 0;
    for outcome in outcomes {
        total += 1;
        match outcome {
            EgoOutcome::Layered(p) => groups.entry(p.layer_count()).or_default().push(p),
            EgoOutcome::Degenerate => degenerate += 1,
        }
    }
    let layered = total - degenerate;
    let rows = groups
        .into_iter()
        .map(|(c, parts)| {
            let m = parts.len() as f64;
            let mean_of = |f: &dyn Fn(&LayerPartition, usize) -> f64| -> Vec<f64> {
                (0..c).map(|k| parts.iter().map(|p| f(p, k)).sum::<f64>() / m).collect()
            };
            let ratios: Vec<f64> = parts.iter().filter_map(|p| p.mean_ratio).collect();
            CensusRow {
                layers: c,
                count: parts.len(),
                fraction: parts.len() as f64 / layered as f64,
                mean_sizes: mean_of(&|p, k| p.sizes[k] as f64),
                mean_cumulative: mean_of(&|p, k| p.cumulative[k] as f64),
                mean_ratio: if ratios.is_empty() {
                    None
                } else {
                    Some(ratios.iter().sum::<f64>() / ratios.len() as f64)
                },
            }
        })
        .collect();
    Census {
        algorithm,
        egos: total,
        degenerate,
        rows,
    }
}

/// Runs the layer analysis on every ego above the degree floor.
pub fn layer_census(
    network: &WeightedNetwork,
    degree_floor: u64,
    algorithm: Algorithm,
    k_max: usize,
) -> Result<(Vec<EgoLayers>, Census)> {
    let egos = eligible_egos(network, degree_floor)
        .into_iter()
        .map(|(ego, alters)| analyze_alters(ego, alters, algorithm, k_max))
        .collect::<Result<Vec<_>>>()?;
    let census = census_from(algorithm, egos.iter().map(|e| &e.outcome));
    Ok((egos, census))
}
