//! Weighted interaction networks built from order co-occurrences and calls.
//!
//! A [`WeightedNetwork`] keeps two views of the same data: the directed pair
//! counts (with per-node initiating/receiving marginals, used by link
//! validation) and the undirected edge set whose weight is the sum of both
//! directions.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::events::{CallEvent, OrderEvent, Side};
use crate::error::{invalid, Result};

/// Dense node index. Indices follow the lexicographic order of node labels.
pub type NodeId = u32;

pub const SECONDS_PER_DAY: i64 = 86_400;

/// One directed pair count (`source` initiated, `target` matched/received).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct DirectedEdgeStats {
    pub source: NodeId,
    pub target: NodeId,
    pub count: u64,
}

/// Rule deciding which unordered pairs become edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeRule {
    /// `count(i→j) + count(j→i) >= min`.
    MinWeight(u64),
    /// Both directions observed at least once.
    Reciprocal,
}

impl EdgeRule {
    fn admits(self, ij: u64, ji: u64) -> bool {
        match self {
            EdgeRule::MinWeight(min) => ij + ji >= min && ij + ji > 0,
            EdgeRule::Reciprocal => ij >= 1 && ji >= 1,
        }
    }
}

/// How co-occurring orders are turned into directed counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoOccurrence {
    /// Every qualifying order pair counts once.
    #[default]
    Pairs,
    /// Each initiating order counts at most once per matching investor.
    InitiatingOrders,
}

/// Parameters of daily investor-network construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EinConfig {
    pub window_seconds: u64,
    pub min_cooccurrence: u64,
    pub counting: CoOccurrence,
    /// Fixed offset (seconds) added to timestamps before cutting days at midnight.
    pub day_offset_seconds: i64,
}

impl Default for EinConfig {
    fn default() -> Self {
        EinConfig {
            window_seconds: 30,
            min_cooccurrence: 3,
            counting: CoOccurrence::Pairs,
            day_offset_seconds: 0,
        }
    }
}

impl EinConfig {
    pub fn check(&self) -> Result<()> {
        if self.window_seconds == 0 {
            return Err(invalid("window_seconds must be positive"));
        }
        if self.min_cooccurrence == 0 {
            return Err(invalid("min_cooccurrence must be at least 1"));
        }
        Ok(())
    }
}

/// Which directed call counts feed the marginals of a call network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CnMarginals {
    /// Only pairs with calls in both directions.
    #[default]
    ReciprocalOnly,
    /// Every observed call, including one-way pairs (which still form no edge).
    AllCalls,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WeightedNetwork {
    labels: Vec<String>,
    directed: BTreeMap<(NodeId, NodeId), u64>,
    edges: BTreeSet<(NodeId, NodeId)>,
    out_totals: Vec<u64>,
    in_totals: Vec<u64>,
    grand_total: u64,
}

impl WeightedNetwork {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a network from labelled directed counts. Zero counts and
    /// self-pairs are ignored; repeated pairs are summed. Edges follow `rule`.
    pub fn from_directed_counts<I, S>(counts: I, rule: EdgeRule) -> Self
    where
        I: IntoIterator<Item = (S, S, u64)>,
        S: Into<String>,
    {
        let mut by_label: BTreeMap<(String, String), u64> = BTreeMap::new();
        for (s, t, c) in counts {
            let (s, t) = (s.into(), t.into());
            if c == 0 || s == t {
                continue;
            }
            *by_label.entry((s, t)).or_insert(0) += c;
        }
        let labels: BTreeSet<&String> = by_label.keys().flat_map(|(s, t)| [s, t]).collect();
        let labels: Vec<String> = labels.into_iter().cloned().collect();
        let directed: BTreeMap<(NodeId, NodeId), u64> = by_label
            .iter()
            .map(|((s, t), &c)| ((index_of(&labels, s), index_of(&labels, t)), c))
            .collect();
        let edges = edges_by_rule(&directed, rule);
        Self::assemble(labels, directed, edges)
    }

    /// Builds a network from labelled directed counts with an explicit edge
    /// set. Edges whose endpoints carry no directed count are rejected.
    pub fn from_counts_and_edges<S: Into<String> + Clone>(
        counts: &[(S, S, u64)],
        edges: &[(S, S)],
    ) -> Result<Self> {
        let base = Self::from_directed_counts(counts.iter().cloned(), EdgeRule::MinWeight(u64::MAX));
        let mut edge_set = BTreeSet::new();
        for (a, b) in edges {
            let (a, b): (String, String) = (a.clone().into(), b.clone().into());
            let (Some(i), Some(j)) = (base.id_of(&a), base.id_of(&b)) else {
                return Err(invalid(alloc::format!("edge {a}-{b} has no directed counts")));
            };
            if i == j {
                return Err(invalid(alloc::format!("self-edge on {a}")));
            }
            let key = (i.min(j), i.max(j));
            if base.count(key.0, key.1) + base.count(key.1, key.0) == 0 {
                return Err(invalid(alloc::format!("edge {a}-{b} has zero weight")));
            }
            edge_set.insert(key);
        }
        Ok(base.with_edges(edge_set))
    }

    fn assemble(
        labels: Vec<String>,
        directed: BTreeMap<(NodeId, NodeId), u64>,
        edges: BTreeSet<(NodeId, NodeId)>,
    ) -> Self {
        let n = labels.len();
        let mut out_totals = alloc::vec![0u64; n];
        let mut in_totals = alloc::vec![0u64; n];
        let mut grand_total = 0u64;
        for (&(s, t), &c) in &directed {
            out_totals[s as usize] += c;
            in_totals[t as usize] += c;
            grand_total += c;
        }
        WeightedNetwork {
            labels,
            directed,
            edges,
            out_totals,
            in_totals,
            grand_total,
        }
    }

    /// Same directed statistics and marginals, different edge set.
    pub fn with_edges(&self, edges: BTreeSet<(NodeId, NodeId)>) -> Self {
        debug_assert!(edges.iter().all(|&(i, j)| i < j));
        WeightedNetwork {
            edges,
            ..self.clone()
        }
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, id: NodeId) -> &str {
        &self.labels[id as usize]
    }

    pub fn id_of(&self, label: &str) -> Option<NodeId> {
        self.labels
            .binary_search_by(|l| l.as_str().cmp(label))
            .ok()
            .map(|i| i as NodeId)
    }

    /// Directed count `source → target` (0 when absent).
    pub fn count(&self, source: NodeId, target: NodeId) -> u64 {
        self.directed.get(&(source, target)).copied().unwrap_or(0)
    }

    /// Undirected weight of `{i, j}` whether or not it is an edge.
    pub fn pair_weight(&self, i: NodeId, j: NodeId) -> u64 {
        self.count(i, j) + self.count(j, i)
    }

    pub fn has_edge(&self, i: NodeId, j: NodeId) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn edge_set(&self) -> &BTreeSet<(NodeId, NodeId)> {
        &self.edges
    }

    /// Edges as `(i, j, W)` with `i < j`, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, u64)> + '_ {
        self.edges.iter().map(|&(i, j)| (i, j, self.pair_weight(i, j)))
    }

    pub fn directed_stats(&self) -> impl Iterator<Item = DirectedEdgeStats> + '_ {
        self.directed.iter().map(|(&(source, target), &count)| DirectedEdgeStats {
            source,
            target,
            count,
        })
    }

    /// Unordered pairs carrying any directed count, as `(i, j, count_ij, count_ji)`.
    pub fn pairs(&self) -> Vec<(NodeId, NodeId, u64, u64)> {
        let keys: BTreeSet<(NodeId, NodeId)> = self
            .directed
            .keys()
            .map(|&(s, t)| (s.min(t), s.max(t)))
            .collect();
        keys.into_iter()
            .map(|(i, j)| (i, j, self.count(i, j), self.count(j, i)))
            .collect()
    }

    /// Total initiated by `node` (N_ic).
    pub fn out_total(&self, node: NodeId) -> u64 {
        self.out_totals[node as usize]
    }

    /// Total received/matched by `node` (N_jr).
    pub fn in_total(&self, node: NodeId) -> u64 {
        self.in_totals[node as usize]
    }

    /// N, the sum of all directed counts.
    pub fn grand_total(&self) -> u64 {
        self.grand_total
    }

    /// Per-node neighbour lists `(alter, W)` over the edge set, alters sorted.
    pub fn adjacency(&self) -> Vec<Vec<(NodeId, u64)>> {
        let mut adj = alloc::vec![Vec::new(); self.labels.len()];
        for (i, j, w) in self.edges() {
            adj[i as usize].push((j, w));
            adj[j as usize].push((i, w));
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// `(degree, weighted degree)` of every node.
    pub fn degrees(&self) -> Vec<(u64, u64)> {
        let mut deg = alloc::vec![(0u64, 0u64); self.labels.len()];
        for (i, j, w) in self.edges() {
            for n in [i, j] {
                deg[n as usize].0 += 1;
                deg[n as usize].1 += w;
            }
        }
        deg
    }
}

fn index_of(labels: &[String], label: &str) -> NodeId {
    labels
        .binary_search_by(|l| l.as_str().cmp(label))
        .expect("label present") as NodeId
}

fn edges_by_rule(
    directed: &BTreeMap<(NodeId, NodeId), u64>,
    rule: EdgeRule,
) -> BTreeSet<(NodeId, NodeId)> {
    let mut edges = BTreeSet::new();
    for &(s, t) in directed.keys() {
        let key = (s.min(t), s.max(t));
        if edges.contains(&key) {
            continue;
        }
        let ij = directed.get(&key).copied().unwrap_or(0);
        let ji = directed.get(&(key.1, key.0)).copied().unwrap_or(0);
        if rule.admits(ij, ji) {
            edges.insert(key);
        }
    }
    edges
}

/// Drops labels that carry no directed count and renumbers the rest.
fn compact(labels: Vec<String>, counts: Vec<((NodeId, NodeId), u64)>, rule: EdgeRule) -> WeightedNetwork {
    let mut used = alloc::vec![false; labels.len()];
    for &((s, t), _) in &counts {
        used[s as usize] = true;
        used[t as usize] = true;
    }
    let mut remap = alloc::vec![NodeId::MAX; labels.len()];
    let mut kept = Vec::new();
    for (old, label) in labels.into_iter().enumerate() {
        if used[old] {
            remap[old] = kept.len() as NodeId;
            kept.push(label);
        }
    }
    let directed: BTreeMap<(NodeId, NodeId), u64> = counts
        .into_iter()
        .map(|((s, t), c)| ((remap[s as usize], remap[t as usize]), c))
        .collect();
    let edges = edges_by_rule(&directed, rule);
    WeightedNetwork::assemble(kept, directed, edges)
}

/// Sorted, deduplicated label table and the index of each input label.
fn intern<'a>(ids: impl Iterator<Item = &'a str>) -> (Vec<String>, impl Fn(&str) -> NodeId) {
    let mut labels: Vec<&str> = ids.collect();
    labels.sort_unstable();
    labels.dedup();
    let labels: Vec<String> = labels.into_iter().map(String::from).collect();
    let lookup = labels.clone();
    (labels, move |s: &str| index_of(&lookup, s))
}

/// Day index of a timestamp under a fixed UTC offset.
pub fn day_index(timestamp: u64, offset_seconds: i64) -> i64 {
    (timestamp as i64 + offset_seconds).div_euclid(SECONDS_PER_DAY)
}

/// Groups orders by trading day, preserving input order within each day.
pub fn split_by_day(orders: &[OrderEvent], offset_seconds: i64) -> BTreeMap<i64, Vec<OrderEvent>> {
    let mut days: BTreeMap<i64, Vec<OrderEvent>> = BTreeMap::new();
    for o in orders {
        days.entry(day_index(o.timestamp, offset_seconds))
            .or_default()
            .push(o.clone());
    }
    days
}

/// Directed co-occurrence counts for one day of orders, keyed by interned
/// investor index, plus the label table.
pub fn cooccurrence_counts(
    orders: &[OrderEvent],
    cfg: &EinConfig,
) -> Result<(Vec<String>, Vec<((NodeId, NodeId), u64)>)> {
    cfg.check()?;
    let (labels, lookup) = intern(orders.iter().map(|o| o.investor_id.as_str()));
    let stocks: BTreeMap<&str, u32> = {
        let mut s: Vec<&str> = orders.iter().map(|o| o.stock_id.as_str()).collect();
        s.sort_unstable();
        s.dedup();
        s.into_iter().enumerate().map(|(i, s)| (s, i as u32)).collect()
    };
    // (stock, side, time, investor)
    let mut keyed: Vec<(u32, Side, u64, NodeId)> = orders
        .iter()
        .map(|o| (stocks[o.stock_id.as_str()], o.side, o.timestamp, lookup(&o.investor_id)))
        .collect();
    keyed.sort_unstable();

    let mut pairs: Vec<u64> = Vec::new();
    let mut seen: Vec<NodeId> = Vec::new();
    let mut start = 0;
    while start < keyed.len() {
        let (stock, side) = (keyed[start].0, keyed[start].1);
        let mut end = start;
        while end < keyed.len() && keyed[end].0 == stock && keyed[end].1 == side {
            end += 1;
        }
        let group = &keyed[start..end];
        for (p, a) in group.iter().enumerate() {
            seen.clear();
            for b in &group[p + 1..] {
                if b.2 - a.2 > cfg.window_seconds {
                    break;
                }
                // Sorted by (time, id): the earlier order, or the smaller id on
                // a tie, initiates.
                if a.3 == b.3 {
                    continue;
                }
                match cfg.counting {
                    CoOccurrence::Pairs => pairs.push(pack(a.3, b.3)),
                    CoOccurrence::InitiatingOrders => {
                        if !seen.contains(&b.3) {
                            seen.push(b.3);
                            pairs.push(pack(a.3, b.3));
                        }
                    }
                }
            }
        }
        start = end;
    }
    pairs.sort_unstable();
    let mut counts = Vec::new();
    let mut i = 0;
    while i < pairs.len() {
        let mut j = i;
        while j < pairs.len() && pairs[j] == pairs[i] {
            j += 1;
        }
        counts.push((unpack(pairs[i]), (j - i) as u64));
        i = j;
    }
    Ok((labels, counts))
}

fn pack(s: NodeId, t: NodeId) -> u64 {
    ((s as u64) << 32) | t as u64
}

fn unpack(k: u64) -> (NodeId, NodeId) {
    ((k >> 32) as NodeId, k as NodeId)
}

/// Investor network for a single day of orders.
///
/// Orders of different investors on the same stock and side whose
/// timestamps differ by at most `window_seconds` co-occur; the earlier order
/// (smaller id on ties) initiates. An edge exists when the pair's two
/// directed counts sum to at least `min_cooccurrence`. Directed counts of
/// sub-threshold pairs are kept for validation marginals.
pub fn build_ein_daily(orders: &[OrderEvent], cfg: &EinConfig) -> Result<WeightedNetwork> {
    let (labels, counts) = cooccurrence_counts(orders, cfg)?;
    Ok(compact(labels, counts, EdgeRule::MinWeight(cfg.min_cooccurrence)))
}

/// Sums directed counts over networks. The edge set is the union of the
/// inputs' edge sets; weights and marginals come from the summed counts.
pub fn aggregate_networks(networks: &[WeightedNetwork]) -> WeightedNetwork {
    match networks {
        [] => return WeightedNetwork::empty(),
        [one] => return one.clone(),
        _ => {}
    }
    let labels: BTreeSet<&String> = networks.iter().flat_map(|n| n.labels.iter()).collect();
    let labels: Vec<String> = labels.into_iter().cloned().collect();
    let mut directed: BTreeMap<(NodeId, NodeId), u64> = BTreeMap::new();
    let mut edges = BTreeSet::new();
    for net in networks {
        let remap: Vec<NodeId> = net.labels.iter().map(|l| index_of(&labels, l)).collect();
        for (&(s, t), &c) in &net.directed {
            *directed
                .entry((remap[s as usize], remap[t as usize]))
                .or_insert(0) += c;
        }
        for &(i, j) in &net.edges {
            let (a, b) = (remap[i as usize], remap[j as usize]);
            edges.insert((a.min(b), a.max(b)));
        }
    }
    WeightedNetwork::assemble(labels, directed, edges)
}

/// Builds the daily networks of an order log and aggregates them.
pub fn build_ein(orders: &[OrderEvent], cfg: &EinConfig) -> Result<WeightedNetwork> {
    cfg.check()?;
    let daily = split_by_day(orders, cfg.day_offset_seconds)
        .values()
        .map(|day| build_ein_daily(day, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate_networks(&daily))
}

/// Call network: an edge joins two users who called each other at least once
/// in each direction.
pub fn build_cn(calls: &[CallEvent], marginals: CnMarginals) -> WeightedNetwork {
    let (labels, lookup) = intern(
        calls
            .iter()
            .flat_map(|c| [c.caller_id.as_str(), c.callee_id.as_str()]),
    );
    let mut keys: Vec<u64> = calls
        .iter()
        .filter(|c| c.caller_id != c.callee_id)
        .map(|c| pack(lookup(&c.caller_id), lookup(&c.callee_id)))
        .collect();
    keys.sort_unstable();
    let mut directed: BTreeMap<(NodeId, NodeId), u64> = BTreeMap::new();
    for k in keys {
        *directed.entry(unpack(k)).or_insert(0) += 1;
    }
    let counts: Vec<((NodeId, NodeId), u64)> = match marginals {
        CnMarginals::AllCalls => directed.into_iter().collect(),
        CnMarginals::ReciprocalOnly => directed
            .iter()
            .filter(|(&(s, t), _)| directed.contains_key(&(t, s)))
            .map(|(&k, &c)| (k, c))
            .collect(),
    };
    compact(labels, counts, EdgeRule::Reciprocal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    fn order(inv: &str, stock: &str, side: Side, t: u64) -> OrderEvent {
        OrderEvent {
            investor_id: inv.into(),
            stock_id: stock.into(),
            side,
            timestamp: t,
        }
    }

    fn call(a: &str, b: &str) -> CallEvent {
        CallEvent {
            caller_id: a.into(),
            callee_id: b.into(),
            timestamp: 0,
        }
    }

    /// Exhaustive pair enumeration straight from the co-occurrence rule.
    fn brute_counts(orders: &[OrderEvent], window: u64) -> BTreeMap<(String, String), u64> {
        let mut out = BTreeMap::new();
        for (x, a) in orders.iter().enumerate() {
            for b in &orders[x + 1..] {
                if a.stock_id != b.stock_id || a.side != b.side || a.investor_id == b.investor_id {
                    continue;
                }
                if a.timestamp.abs_diff(b.timestamp) > window {
                    continue;
                }
                let (first, second) = match a.timestamp.cmp(&b.timestamp) {
                    core::cmp::Ordering::Less => (a, b),
                    core::cmp::Ordering::Greater => (b, a),
                    core::cmp::Ordering::Equal if a.investor_id < b.investor_id => (a, b),
                    core::cmp::Ordering::Equal => (b, a),
                };
                *out.entry((first.investor_id.clone(), second.investor_id.clone()))
                    .or_insert(0) += 1;
            }
        }
        out
    }

    fn three_by_three() -> Vec<OrderEvent> {
        let mut v = Vec::new();
        for t in [0, 10, 20] {
            v.push(order("A", "S", Side::Buy, t));
        }
        for t in [5, 15, 25] {
            v.push(order("B", "S", Side::Buy, t));
        }
        v
    }

    #[test]
    fn interleaved_buys_give_six_and_three() {
        let orders = three_by_three();
        let brute = brute_counts(&orders, 30);
        assert_eq!(brute[&("A".into(), "B".into())], 6);
        assert_eq!(brute[&("B".into(), "A".into())], 3);

        let net = build_ein_daily(&orders, &EinConfig::default()).unwrap();
        let (a, b) = (net.id_of("A").unwrap(), net.id_of("B").unwrap());
        assert_eq!(net.count(a, b), 6);
        assert_eq!(net.count(b, a), 3);
        assert_eq!(net.edges().collect::<Vec<_>>(), vec![(a, b, 9)]);
        assert_eq!(net.grand_total(), 9);
    }

    #[test]
    fn opposite_sides_do_not_cooccur() {
        let orders = vec![order("A", "S", Side::Buy, 0), order("B", "S", Side::Sell, 0)];
        let net = build_ein_daily(&orders, &EinConfig::default()).unwrap();
        assert_eq!(net.edge_count(), 0);
        assert_eq!(net.grand_total(), 0);
    }

    #[test]
    fn threshold_controls_edge() {
        let orders = vec![
            order("A", "S1", Side::Buy, 0),
            order("A", "S1", Side::Buy, 1),
            order("B", "S1", Side::Buy, 2),
            order("B", "S1", Side::Buy, 3),
        ];
        let net = build_ein_daily(&orders, &EinConfig::default()).unwrap();
        assert_eq!(net.edges().map(|e| e.2).collect::<Vec<_>>(), vec![4]);
        let cfg = EinConfig {
            min_cooccurrence: 5,
            ..EinConfig::default()
        };
        let net = build_ein_daily(&orders, &cfg).unwrap();
        assert_eq!(net.edge_count(), 0);
        assert_eq!(net.grand_total(), 4);
    }

    #[test]
    fn simultaneous_orders_initiated_by_smaller_id() {
        let orders = vec![order("Z", "S", Side::Buy, 7), order("M", "S", Side::Buy, 7)];
        let net = build_ein_daily(&orders, &EinConfig::default()).unwrap();
        let (m, z) = (net.id_of("M").unwrap(), net.id_of("Z").unwrap());
        assert_eq!(net.count(m, z), 1);
        assert_eq!(net.count(z, m), 0);
    }

    #[test]
    fn initiating_orders_strategy_counts_once_per_partner() {
        let orders = vec![
            order("A", "S", Side::Buy, 0),
            order("B", "S", Side::Buy, 1),
            order("B", "S", Side::Buy, 2),
        ];
        let cfg = EinConfig {
            counting: CoOccurrence::InitiatingOrders,
            min_cooccurrence: 1,
            ..EinConfig::default()
        };
        let net = build_ein_daily(&orders, &cfg).unwrap();
        let (a, b) = (net.id_of("A").unwrap(), net.id_of("B").unwrap());
        assert_eq!(net.count(a, b), 1);
        let net = build_ein_daily(&orders, &EinConfig { min_cooccurrence: 1, ..EinConfig::default() }).unwrap();
        assert_eq!(net.count(a, b), 2);
    }

    #[test]
    fn empty_day_is_empty_network() {
        let net = build_ein_daily(&[], &EinConfig::default()).unwrap();
        assert_eq!(net, WeightedNetwork::empty());
    }

    #[test]
    fn zero_window_rejected() {
        let cfg = EinConfig {
            window_seconds: 0,
            ..EinConfig::default()
        };
        assert!(build_ein_daily(&[], &cfg).is_err());
    }

    #[test]
    fn aggregation_sums_counts() {
        let day = WeightedNetwork::from_directed_counts([("A", "B", 2u64)], EdgeRule::MinWeight(3));
        let agg = aggregate_networks(&[day.clone(), day.clone()]);
        let (a, b) = (agg.id_of("A").unwrap(), agg.id_of("B").unwrap());
        assert_eq!(agg.count(a, b), 4);
        assert_eq!(aggregate_networks(&[day.clone()]), day);

        let other = WeightedNetwork::from_directed_counts([("C", "D", 5u64)], EdgeRule::MinWeight(3));
        let agg = aggregate_networks(&[day, other]);
        assert_eq!(agg.node_count(), 4);
        assert_eq!(agg.edge_count(), 1);
    }

    #[test]
    fn aggregation_commutes() {
        let x = WeightedNetwork::from_directed_counts([("A", "B", 4u64), ("B", "C", 1)], EdgeRule::MinWeight(3));
        let y = WeightedNetwork::from_directed_counts([("B", "A", 1u64), ("C", "D", 3)], EdgeRule::MinWeight(3));
        let z = WeightedNetwork::from_directed_counts([("D", "A", 7u64)], EdgeRule::MinWeight(3));
        let xyz = aggregate_networks(&[x.clone(), y.clone(), z.clone()]);
        assert_eq!(xyz, aggregate_networks(&[z.clone(), x.clone(), y.clone()]));
        let xy = aggregate_networks(&[x, y]);
        assert_eq!(xyz, aggregate_networks(&[xy, z]));
    }

    #[test]
    fn call_network_needs_reciprocity() {
        let one_way = vec![call("A", "B"), call("A", "B"), call("A", "B")];
        let net = build_cn(&one_way, CnMarginals::ReciprocalOnly);
        assert_eq!(net.edge_count(), 0);
        assert_eq!(net.grand_total(), 0);

        let mutual = vec![call("A", "B"), call("A", "B"), call("B", "A")];
        let net = build_cn(&mutual, CnMarginals::ReciprocalOnly);
        assert_eq!(net.edges().map(|e| e.2).collect::<Vec<_>>(), vec![3]);

        assert_eq!(build_cn(&[], CnMarginals::ReciprocalOnly), WeightedNetwork::empty());
    }

    #[test]
    fn call_marginal_universes() {
        let calls = vec![call("A", "B"), call("B", "A"), call("A", "C"), call("A", "C")];
        let recip = build_cn(&calls, CnMarginals::ReciprocalOnly);
        assert_eq!(recip.grand_total(), 2);
        assert_eq!(recip.node_count(), 2);
        let all = build_cn(&calls, CnMarginals::AllCalls);
        assert_eq!(all.grand_total(), 4);
        assert_eq!(all.edge_count(), 1);
        let a = all.id_of("A").unwrap();
        assert_eq!(all.out_total(a), 3);
    }

    #[test]
    fn marginals_balance_and_brute_force_agree() {
        let mut orders = Vec::new();
        let ids = ["a", "b", "c", "d"];
        let mut t = 0u64;
        for k in 0..60u64 {
            t += (k * 7919) % 23;
            let inv = ids[(k * 31 % 4) as usize];
            let side = if k % 5 == 0 { Side::Sell } else { Side::Buy };
            let stock = if k % 3 == 0 { "X" } else { "Y" };
            orders.push(order(inv, stock, side, t));
        }
        let net = build_ein_daily(&orders, &EinConfig { min_cooccurrence: 1, ..EinConfig::default() }).unwrap();
        let brute = brute_counts(&orders, 30);
        for ((s, t), c) in &brute {
            let (s, t) = (net.id_of(s).unwrap(), net.id_of(t).unwrap());
            assert_eq!(net.count(s, t), *c);
        }
        assert_eq!(net.directed_stats().count(), brute.len());
        let n = net.node_count() as u32;
        let out: u64 = (0..n).map(|i| net.out_total(i)).sum();
        let inn: u64 = (0..n).map(|i| net.in_total(i)).sum();
        assert_eq!(out, net.grand_total());
        assert_eq!(inn, net.grand_total());
        let wsum: u64 = net.edges().map(|e| e.2).sum();
        assert_eq!(wsum, net.grand_total());
        for (d, _) in net.degrees() {
            assert!(d < n as u64);
        }
    }

    #[test]
    fn day_split_uses_offset() {
        assert_eq!(day_index(86_399, 0), 0);
        assert_eq!(day_index(86_400, 0), 1);
        assert_eq!(day_index(86_399, 1), 1);
        assert_eq!(day_index(0, -1), -1);
    }

    #[test]
    fn explicit_edges_validated() {
        let counts = [("A", "B", 1u64), ("B", "C", 2)];
        let net = WeightedNetwork::from_counts_and_edges(&counts, &[("B", "A")]).unwrap();
        assert_eq!(net.edge_count(), 1);
        assert!(WeightedNetwork::from_counts_and_edges(&counts, &[("A", "C")]).is_err());
    }
}
