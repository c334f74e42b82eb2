//! Seeded synthetic data: null order logs, planted-layer ego populations
//! and samplers for the layer-composition model.
//!
//! Every entity (investor, group, ego) draws from its own ChaCha stream
//! keyed by `(seed, entity)`, so output never depends on generation order
//! or thread count.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal, Poisson};

use crate::error::{invalid, Result};
use crate::events::{OrderEvent, Side};
use crate::network::{WeightedNetwork, SECONDS_PER_DAY};

/// Independent generator for one entity of one seeded run.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn investor_label(i: usize) -> String {
    format!("inv{i:06}")
}

pub fn stock_label(s: usize) -> String {
    format!("stk{s:04}")
}

/// Followers that copy a leader's orders after a short lag.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinatedGroups {
    /// Number of groups; group `g` is investors `g·size .. (g+1)·size`, the
    /// first of them being the leader.
    pub groups: usize,
    pub size: usize,
    /// Probability that a follower copies a given leader order.
    pub follow_probability: f64,
    /// Copies land uniformly in `1..=max_lag_seconds` after the leader.
    pub max_lag_seconds: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderLogConfig {
    pub seed: u64,
    pub investors: usize,
    pub stocks: usize,
    pub days: usize,
    /// Mean orders per investor per day (Poisson).
    pub orders_per_day: f64,
    /// Seconds after midnight when trading opens.
    pub open_seconds: u64,
    /// Length of the trading session.
    pub session_seconds: u64,
    /// Timestamp of midnight of the first day.
    pub start: u64,
    pub coordination: Option<CoordinatedGroups>,
}

impl Default for OrderLogConfig {
    fn default() -> Self {
        OrderLogConfig {
            seed: 1,
            investors: 200,
            stocks: 10,
            days: 20,
            orders_per_day: 40.0,
            open_seconds: 9 * 3600 + 30 * 60,
            session_seconds: 4 * 3600,
            start: 1_577_836_800,
            coordination: None,
        }
    }
}

impl OrderLogConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.orders_per_day >= 0.0 && self.orders_per_day.is_finite()) {
            return Err(invalid("orders_per_day must be finite and non-negative"));
        }
        if self.investors > 0 && self.stocks == 0 {
            return Err(invalid("need at least one stock"));
        }
        if self.session_seconds == 0 || self.open_seconds + self.session_seconds > SECONDS_PER_DAY as u64 {
            return Err(invalid("trading session must fit inside one day"));
        }
        if let Some(c) = &self.coordination {
            if c.size < 2 || c.groups * c.size > self.investors {
                return Err(invalid("coordinated groups must have ≥ 2 members and fit the population"));
            }
            if !(0.0..=1.0).contains(&c.follow_probability) || c.max_lag_seconds == 0 {
                return Err(invalid("invalid follow probability or lag"));
            }
        }
        Ok(())
    }

    /// Expected number of raw co-occurring order pairs per investor pair
    /// over the whole log, ignoring session edges.
    pub fn expected_pair_cooccurrence(&self, window_seconds: u64) -> f64 {
        let m = self.orders_per_day;
        let window = (2 * window_seconds) as f64 / self.session_seconds as f64;
        self.days as f64 * m * m * window / (2 * self.stocks) as f64
    }
}

/// Orders of one investor, independent of every other investor: Poisson
/// counts per day, uniform stock, side and time within the session.
pub fn investor_orders(cfg: &OrderLogConfig, investor: usize) -> Vec<OrderEvent> {
    let mut rng = stream_rng(cfg.seed, investor as u64);
    let label = investor_label(investor);
    let mut out = Vec::new();
    if cfg.orders_per_day <= 0.0 {
        return out;
    }
    let counts = Poisson::new(cfg.orders_per_day).expect("positive finite rate");
    for day in 0..cfg.days {
        let n = counts.sample(&mut rng) as usize;
        let open = cfg.start + day as u64 * SECONDS_PER_DAY as u64 + cfg.open_seconds;
        for _ in 0..n {
            out.push(OrderEvent {
                investor_id: label.clone(),
                stock_id: stock_label(rng.random_range(0..cfg.stocks)),
                side: if rng.random_bool(0.5) { Side::Buy } else { Side::Sell },
                timestamp: open + rng.random_range(0..cfg.session_seconds),
            });
        }
    }
    out
}

/// Lagged copies of the leader's orders placed by the followers of group `g`.
pub fn group_copies(cfg: &OrderLogConfig, group: usize) -> Vec<OrderEvent> {
    let Some(c) = &cfg.coordination else {
        return Vec::new();
    };
    let leader = group * c.size;
    let leader_orders = investor_orders(cfg, leader);
    let mut rng = stream_rng(cfg.seed, (1u64 << 40) + group as u64);
    let mut out = Vec::new();
    for o in &leader_orders {
        for follower in (leader + 1)..(leader + c.size) {
            if rng.random_bool(c.follow_probability) {
                out.push(OrderEvent {
                    investor_id: investor_label(follower),
                    stock_id: o.stock_id.clone(),
                    side: o.side,
                    timestamp: o.timestamp + rng.random_range(1..=c.max_lag_seconds),
                });
            }
        }
    }
    out
}

/// Canonical event order of generated logs.
pub fn sort_orders(orders: &mut [OrderEvent]) {
    orders.sort_by(|a, b| {
        (a.timestamp, &a.investor_id, &a.stock_id, a.side).cmp(&(b.timestamp, &b.investor_id, &b.stock_id, b.side))
    });
}

/// Full order log: independent investors plus any coordinated copies.
pub fn gen_null_order_log(cfg: &OrderLogConfig) -> Result<Vec<OrderEvent>> {
    cfg.check()?;
    let mut orders: Vec<OrderEvent> = (0..cfg.investors).flat_map(|i| investor_orders(cfg, i)).collect();
    if let Some(c) = &cfg.coordination {
        orders.extend((0..c.groups).flat_map(|g| group_copies(cfg, g)));
    }
    sort_orders(&mut orders);
    Ok(orders)
}

/// One weight band of a planted ego network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub size: usize,
    /// Mean alter weight.
    pub mean: f64,
    /// Standard deviation of alter weights (0 for constant weights).
    pub dispersion: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayeredConfig {
    pub seed: u64,
    pub egos: usize,
    /// Bands innermost first, with strictly decreasing means.
    pub bands: Vec<Band>,
}

impl LayeredConfig {
    /// Bands of sizes 5, 10, 35 and 100 with means 400, 300, 200, 100.
    pub fn dunbar(seed: u64, egos: usize, dispersion: f64) -> Self {
        let bands = [(5, 400.0), (10, 300.0), (35, 200.0), (100, 100.0)]
            .into_iter()
            .map(|(size, mean)| Band { size, mean, dispersion })
            .collect();
        LayeredConfig { seed, egos, bands }
    }

    pub fn degree(&self) -> usize {
        self.bands.iter().map(|b| b.size).sum()
    }

    /// Requires strictly decreasing means, gaps of at least four
    /// dispersions, and weights that stay positive.
    pub fn check(&self) -> Result<()> {
        if self.bands.is_empty() {
            return Err(invalid("at least one band is required"));
        }
        for b in &self.bands {
            if b.size == 0 || !(b.dispersion >= 0.0) || !(b.mean >= 1.0) {
                return Err(invalid("bands need a positive size, mean ≥ 1 and dispersion ≥ 0"));
            }
        }
        for w in self.bands.windows(2) {
            let gap = w[0].mean - w[1].mean;
            if gap <= 0.0 || gap < 4.0 * w[0].dispersion.max(w[1].dispersion) {
                return Err(invalid("band means must decrease by at least 4 dispersions"));
            }
        }
        Ok(())
    }
}

pub fn ego_label(ego: usize) -> String {
    format!("ego{ego:06}")
}

pub fn alter_label(ego: usize, alter: usize) -> String {
    format!("ego{ego:06}_a{alter:04}")
}

/// Planted structure of one ego.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedEgo {
    pub ego: String,
    /// Alter labels in ascending order.
    pub alters: Vec<String>,
    pub weights: Vec<u64>,
    /// True band of each alter, 0 = innermost.
    pub bands: Vec<usize>,
}

/// Draws one ego: band weights are normal around the band mean, rounded to
/// integers and kept at least 1.
pub fn planted_ego(cfg: &LayeredConfig, ego: usize) -> PlantedEgo {
    let mut rng = stream_rng(cfg.seed, ego as u64);
    let degree = cfg.degree();
    let mut alters = Vec::with_capacity(degree);
    let mut weights = Vec::with_capacity(degree);
    let mut bands = Vec::with_capacity(degree);
    for (b, band) in cfg.bands.iter().enumerate() {
        let dist = Normal::new(band.mean, band.dispersion).expect("finite band parameters");
        for _ in 0..band.size {
            let w = if band.dispersion == 0.0 { band.mean } else { dist.sample(&mut rng) };
            alters.push(alter_label(ego, alters.len()));
            weights.push(libm::round(w).max(1.0) as u64);
            bands.push(b);
        }
    }
    PlantedEgo {
        ego: ego_label(ego),
        alters,
        weights,
        bands,
    }
}

/// Undirected network holding every planted ego network (alters are not
/// shared between egos), plus ground truth in ascending ego order. Each
/// weight is split as evenly as possible between the two directions.
pub fn gen_layered_ego_population(cfg: &LayeredConfig) -> Result<(WeightedNetwork, Vec<PlantedEgo>)> {
    cfg.check()?;
    let egos: Vec<PlantedEgo> = (0..cfg.egos).map(|e| planted_ego(cfg, e)).collect();
    Ok((planted_network(&egos)?, egos))
}

pub fn planted_network(egos: &[PlantedEgo]) -> Result<WeightedNetwork> {
    let mut counts = Vec::new();
    let mut edges = Vec::new();
    for e in egos {
        for (a, &w) in e.alters.iter().zip(&e.weights) {
            counts.push((e.ego.clone(), a.clone(), w - w / 2));
            if w / 2 > 0 {
                counts.push((a.clone(), e.ego.clone(), w / 2));
            }
            edges.push((e.ego.clone(), a.clone()));
        }
    }
    WeightedNetwork::from_counts_and_edges(&counts, &edges)
}

/// Layer probabilities `∝ e^{μk}`, `k = 0..r-1`.
pub fn tamarit_layer_probabilities(mu: f64, r: usize) -> Vec<f64> {
    let top = if mu > 0.0 { mu * (r as f64 - 1.0) } else { 0.0 };
    let w: Vec<f64> = (0..r).map(|k| libm::exp(mu * k as f64 - top)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Draws a layer composition of `total` alters from the model's
/// multinomial part; `population` only has to exceed `total`.
pub fn sample_tamarit<R: Rng + ?Sized>(mu: f64, total: u64, r: usize, population: u64, rng: &mut R) -> Result<Vec<u64>> {
    if r < 2 || total < 1 || population <= total || !mu.is_finite() {
        return Err(invalid("sampling needs r ≥ 2, L ≥ 1, N > L and finite μ"));
    }
    let probs = tamarit_layer_probabilities(mu, r);
    let mut counts = alloc::vec![0u64; r];
    for _ in 0..total {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut k = r - 1;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                k = i;
                break;
            }
        }
        counts[k] += 1;
    }
    Ok(counts)
}

/// Sample from a log-normal split at `threshold`: with probability
/// `weight_below` from `LN(mu1, s1)` truncated to `(0, threshold]`, else
/// from `LN(mu2, s2)` truncated to `(threshold, ∞)`.
pub fn two_piece_lognormal(
    n: usize,
    threshold: f64,
    below: (f64, f64),
    above: (f64, f64),
    weight_below: f64,
    seed: u64,
) -> Vec<f64> {
    let mut rng = stream_rng(seed, 0);
    let lo = LogNormal::new(below.0, below.1).expect("finite parameters");
    let hi = LogNormal::new(above.0, above.1).expect("finite parameters");
    (0..n)
        .map(|_| {
            if rng.random_bool(weight_below) {
                loop {
                    let x = lo.sample(&mut rng);
                    if x <= threshold {
                        break x;
                    }
                }
            } else {
                loop {
                    let x = hi.sample(&mut rng);
                    if x > threshold {
                        break x;
                    }
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_population_gives_empty_log() {
        let cfg = OrderLogConfig { investors: 0, ..Default::default() };
        assert!(gen_null_order_log(&cfg).unwrap().is_empty());
    }

    #[test]
    fn order_log_is_deterministic_and_in_session() {
        let cfg = OrderLogConfig { investors: 20, days: 3, ..Default::default() };
        let a = gen_null_order_log(&cfg).unwrap();
        let b = gen_null_order_log(&cfg).unwrap();
        assert_eq!(a, b);
        assert!(!a.is_empty());
        for o in &a {
            let tod = (o.timestamp - cfg.start) % SECONDS_PER_DAY as u64;
            assert!(tod >= cfg.open_seconds && tod < cfg.open_seconds + cfg.session_seconds);
        }
        let other = gen_null_order_log(&OrderLogConfig { seed: 2, ..cfg.clone() }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn per_investor_streams_are_independent_of_population() {
        let small = OrderLogConfig { investors: 3, days: 2, ..Default::default() };
        let large = OrderLogConfig { investors: 50, ..small.clone() };
        assert_eq!(investor_orders(&small, 2), investor_orders(&large, 2));
    }

    #[test]
    fn followers_copy_the_leader() {
        let cfg = OrderLogConfig {
            investors: 6,
            days: 2,
            coordination: Some(CoordinatedGroups {
                groups: 2,
                size: 3,
                follow_probability: 1.0,
                max_lag_seconds: 5,
            }),
            ..Default::default()
        };
        let copies = group_copies(&cfg, 1);
        assert_eq!(copies.len(), 2 * investor_orders(&cfg, 3).len());
        assert!(copies.iter().all(|o| o.investor_id == investor_label(4) || o.investor_id == investor_label(5)));
        let bad = OrderLogConfig { investors: 5, ..cfg };
        assert!(gen_null_order_log(&bad).is_err());
    }

    #[test]
    fn dunbar_template_degree() {
        let cfg = LayeredConfig::dunbar(3, 4, 20.0);
        let (net, truth) = gen_layered_ego_population(&cfg).unwrap();
        assert_eq!(truth.len(), 4);
        for t in &truth {
            let id = net.id_of(&t.ego).unwrap();
            assert_eq!(net.adjacency()[id as usize].len(), 150);
        }
        let zero = LayeredConfig::dunbar(3, 1, 0.0);
        let e = planted_ego(&zero, 0);
        assert_eq!(&e.weights[..6], &[400, 400, 400, 400, 400, 300]);
    }

    #[test]
    fn band_separation_enforced() {
        assert!(LayeredConfig::dunbar(1, 1, 30.0).check().is_err());
        assert!(LayeredConfig::dunbar(1, 1, 25.0).check().is_ok());
    }

    #[test]
    fn tamarit_probabilities() {
        assert_eq!(tamarit_layer_probabilities(0.0, 4), alloc::vec![0.25; 4]);
        let p = tamarit_layer_probabilities(libm::log(3.0), 2);
        assert!((p[1] / p[0] - 3.0).abs() < 1e-12);
        let mut rng = stream_rng(5, 0);
        let l = sample_tamarit(libm::log(3.0), 40_000, 2, 100_000, &mut rng).unwrap();
        assert!((l[1] as f64 / l[0] as f64 - 3.0).abs() < 0.1);
        assert!(sample_tamarit(0.0, 10, 1, 100, &mut rng).is_err());
        assert!(sample_tamarit(0.0, 10, 2, 10, &mut rng).is_err());
    }

    #[test]
    fn two_piece_respects_threshold_and_weight() {
        let s = two_piece_lognormal(10_000, 100.0, (4.0, 1.0), (5.0, 0.5), 0.3, 7);
        let below = s.iter().filter(|&&x| x <= 100.0).count() as f64 / s.len() as f64;
        assert!((below - 0.3).abs() < 0.02);
        assert_eq!(s, two_piece_lognormal(10_000, 100.0, (4.0, 1.0), (5.0, 0.5), 0.3, 7));
    }
}
