//! Text formats for events, networks and reports.
//!
//! Tables are comma-separated with a header row; per-ego and per-family
//! records are JSON lines. Floats are written in shortest round-trip form so
//! equal values always produce equal bytes.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};

use anyhow::{bail, Context, Result};
use egolayers_core::layers::{Census, EgoLayers, EgoOutcome, LayerPartition, DUNBAR_CUMULATIVE, DUNBAR_RATIO};
use egolayers_core::synth::PlantedEgo;
use egolayers_core::validate::EdgeValidation;
use egolayers_core::{CallEvent, OrderEvent, WeightedNetwork};
use serde::{Deserialize, Serialize};

use crate::ingest::RowError;

/// Shortest round-trip text of a float; exponent form for very small or very
/// large magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-5..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

pub fn write_order_log<W: Write>(w: W, orders: &[OrderEvent]) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["investor_id", "stock_id", "side", "timestamp"])?;
    for o in orders {
        out.write_record([&o.investor_id, &o.stock_id, o.side.code(), &o.timestamp.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_call_log<W: Write>(w: W, calls: &[CallEvent]) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["caller_id", "callee_id", "timestamp"])?;
    for c in calls {
        out.write_record([&c.caller_id, &c.callee_id, &c.timestamp.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Every pair with a directed count: `i,j,count_ij,count_ji,edge`. Together
/// with the node labels this is the complete network state.
pub fn write_network<W: Write>(w: W, net: &WeightedNetwork) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["i", "j", "count_ij", "count_ji", "edge"])?;
    for (i, j, cij, cji) in net.pairs() {
        out.write_record([
            net.label(i),
            net.label(j),
            &cij.to_string(),
            &cji.to_string(),
            if net.has_edge(i, j) { "1" } else { "0" },
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a file written by [`write_network`].
pub fn read_network<R: Read>(r: R) -> Result<WeightedNetwork> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut counts = Vec::new();
    let mut edges = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        if rec.len() != 5 {
            bail!("network line {line}: expected 5 columns");
        }
        let (i, j) = (rec[0].to_string(), rec[1].to_string());
        let cij: u64 = rec[2].parse().with_context(|| format!("network line {line}: count_ij"))?;
        let cji: u64 = rec[3].parse().with_context(|| format!("network line {line}: count_ji"))?;
        counts.push((i.clone(), j.clone(), cij));
        counts.push((j.clone(), i.clone(), cji));
        match &rec[4] {
            "1" => edges.push((i, j)),
            "0" => {}
            other => bail!("network line {line}: edge flag {other:?}"),
        }
    }
    Ok(WeightedNetwork::from_counts_and_edges(&counts, &edges)?)
}

/// `i,j,W,count_ij,count_ji` per edge, sorted by `(i, j)`.
pub fn write_edge_list<W: Write>(w: W, net: &WeightedNetwork) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["i", "j", "W", "count_ij", "count_ji"])?;
    for (i, j, weight) in net.edges() {
        out.write_record([
            net.label(i),
            net.label(j),
            &weight.to_string(),
            &net.count(i, j).to_string(),
            &net.count(j, i).to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_validation_report<W: Write>(w: W, net: &WeightedNetwork, report: &[EdgeValidation]) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["i", "j", "count_ij", "count_ji", "p_ij", "p_ji", "significant"])?;
    for e in report {
        out.write_record([
            net.label(e.i),
            net.label(e.j),
            &e.count_ij.to_string(),
            &e.count_ji.to_string(),
            &num(e.p_ij),
            &num(e.p_ji),
            if e.significant { "1" } else { "0" },
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// One row of the degree census.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeBucket {
    pub bucket: &'static str,
    pub nodes: usize,
    pub degree: Moments,
    pub weighted_degree: Moments,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub sd: f64,
    /// sd / mean.
    pub cv: f64,
}

impl Moments {
    fn of(values: &[f64]) -> Option<Moments> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        Some(Moments { mean, sd, cv: sd / mean })
    }
}

/// Nodes with at least one edge, split into `k > 100`, `50 < k ≤ 100`,
/// `k ≤ 50` and all; empty buckets are omitted.
pub fn degree_census(net: &WeightedNetwork) -> Vec<DegreeBucket> {
    let degrees: Vec<(u64, u64)> = net.degrees().into_iter().filter(|&(k, _)| k > 0).collect();
    let buckets: [(&'static str, fn(u64) -> bool); 4] = [
        ("k>100", |k| k > 100),
        ("50<k<=100", |k| k > 50 && k <= 100),
        ("k<=50", |k| k <= 50),
        ("all", |_| true),
    ];
    buckets
        .iter()
        .filter_map(|(name, keep)| {
            let sel: Vec<&(u64, u64)> = degrees.iter().filter(|(k, _)| keep(*k)).collect();
            let k: Vec<f64> = sel.iter().map(|d| d.0 as f64).collect();
            let s: Vec<f64> = sel.iter().map(|d| d.1 as f64).collect();
            Some(DegreeBucket {
                bucket: name,
                nodes: sel.len(),
                degree: Moments::of(&k)?,
                weighted_degree: Moments::of(&s)?,
            })
        })
        .collect()
}

pub fn write_degree_census<W: Write>(w: W, rows: &[DegreeBucket]) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record([
        "bucket", "nodes", "k_mean", "k_sd", "k_cv", "s_mean", "s_sd", "s_cv",
    ])?;
    for r in rows {
        out.write_record([
            r.bucket.to_string(),
            r.nodes.to_string(),
            num(r.degree.mean),
            num(r.degree.sd),
            num(r.degree.cv),
            num(r.weighted_degree.mean),
            num(r.weighted_degree.sd),
            num(r.weighted_degree.cv),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Tab-separated numeric plot data with a header row.
pub fn write_columns<W: Write>(mut w: W, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    writeln!(w, "{}", header.join("\t"))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&x| num(x)).collect();
        writeln!(w, "{}", cells.join("\t"))?;
    }
    Ok(())
}

pub fn write_json_lines<W: Write, T: Serialize>(mut w: W, records: &[T]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_json_lines<R: Read, T: for<'de> Deserialize<'de>>(r: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (n, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("record on line {}", n + 1))?);
    }
    Ok(out)
}

/// One line of the per-ego layer report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub ego: String,
    pub algorithm: String,
    pub degree: usize,
    pub degenerate: bool,
    pub c: usize,
    pub sizes: Vec<usize>,
    pub cumulative: Vec<usize>,
    pub ratios: Vec<f64>,
    pub mean_ratio: Option<f64>,
    /// Mean normalized weight per layer.
    pub layer_means: Vec<f64>,
    /// Alters in ascending id order.
    pub alters: Vec<String>,
    pub weights: Vec<u64>,
    /// Layer of each alter, 0 = innermost.
    pub layer_of: Vec<usize>,
}

impl LayerRecord {
    pub fn new(net: &WeightedNetwork, algorithm: &str, ego: &EgoLayers) -> Self {
        let alters = ego.alters.iter().map(|&a| net.label(a).to_string()).collect();
        let base = LayerRecord {
            ego: net.label(ego.ego).to_string(),
            algorithm: algorithm.to_string(),
            degree: ego.alters.len(),
            degenerate: false,
            c: 0,
            sizes: Vec::new(),
            cumulative: Vec::new(),
            ratios: Vec::new(),
            mean_ratio: None,
            layer_means: Vec::new(),
            alters,
            weights: ego.weights.clone(),
            layer_of: Vec::new(),
        };
        match &ego.outcome {
            EgoOutcome::Degenerate => LayerRecord {
                degenerate: true,
                c: 1,
                sizes: vec![ego.alters.len()],
                cumulative: vec![ego.alters.len()],
                layer_of: vec![0; ego.alters.len()],
                ..base
            },
            EgoOutcome::Layered(p) => LayerRecord {
                c: p.layer_count(),
                sizes: p.sizes.clone(),
                cumulative: p.cumulative.clone(),
                ratios: p.ratios.clone(),
                mean_ratio: p.mean_ratio,
                layer_means: p.layer_means.clone(),
                layer_of: p.layer_of.clone(),
                ..base
            },
        }
    }
}

impl LayerRecord {
    /// The analysis outcome this record was written from.
    pub fn outcome(&self) -> EgoOutcome {
        if self.degenerate {
            return EgoOutcome::Degenerate;
        }
        EgoOutcome::Layered(LayerPartition {
            sizes: self.sizes.clone(),
            cumulative: self.cumulative.clone(),
            ratios: self.ratios.clone(),
            mean_ratio: self.mean_ratio,
            layer_means: self.layer_means.clone(),
            layer_of: self.layer_of.clone(),
        })
    }
}

/// Ground-truth sidecar line for one planted ego.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub ego: String,
    pub alters: Vec<String>,
    pub bands: Vec<usize>,
}

impl From<&PlantedEgo> for TruthRecord {
    fn from(e: &PlantedEgo) -> Self {
        TruthRecord {
            ego: e.ego.clone(),
            alters: e.alters.clone(),
            bands: e.bands.clone(),
        }
    }
}

/// Census table: one row per (algorithm, c) plus the Dunbar reference row.
/// `tamarit` optionally maps (algorithm, c) to the mean model-based ratio.
pub fn write_census<W: Write>(
    w: W,
    censuses: &[Census],
    tamarit: &BTreeMap<(String, usize), f64>,
) -> Result<()> {
    let width = censuses
        .iter()
        .flat_map(|c| c.rows.iter().map(|r| r.layers))
        .max()
        .unwrap_or(0)
        .max(6);
    let mut out = csv_writer(w);
    let mut header: Vec<String> = ["algorithm", "c", "count", "fraction"].map(String::from).to_vec();
    header.extend((1..=width).map(|k| format!("n{k}")));
    header.extend(["mean_r".to_string(), "tamarit_r".to_string()]);
    out.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    for census in censuses {
        for row in &census.rows {
            let mut rec = vec![
                census.algorithm.name().to_string(),
                row.layers.to_string(),
                row.count.to_string(),
                num(row.fraction),
            ];
            rec.extend((0..width).map(|k| row.mean_cumulative.get(k).map(|&v| num(v)).unwrap_or_default()));
            rec.push(opt(row.mean_ratio));
            rec.push(opt(tamarit.get(&(census.algorithm.name().to_string(), row.layers)).copied()));
            out.write_record(&rec)?;
        }
    }
    let mut dunbar = vec!["dunbar".to_string(), "4".into(), String::new(), String::new()];
    dunbar.extend((0..width).map(|k| DUNBAR_CUMULATIVE.get(k).map(|v| v.to_string()).unwrap_or_default()));
    dunbar.push(format!("{DUNBAR_RATIO:.2}"));
    dunbar.push(String::new());
    out.write_record(&dunbar)?;
    out.flush()?;
    Ok(())
}

/// Per-ego model estimate row.
#[derive(Debug, Clone, PartialEq)]
pub struct TamaritRow {
    pub ego: String,
    pub algorithm: String,
    pub c: usize,
    pub mu_hat: f64,
    pub ratio_hat: f64,
    pub log_likelihood: f64,
    pub divergence: String,
}

pub fn write_tamarit<W: Write>(w: W, rows: &[TamaritRow]) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["ego", "algorithm", "c", "mu_hat", "ratio_hat", "log_likelihood", "divergence"])?;
    for r in rows {
        out.write_record([
            r.ego.clone(),
            r.algorithm.clone(),
            r.c.to_string(),
            num(r.mu_hat),
            num(r.ratio_hat),
            num(r.log_likelihood),
            r.divergence.clone(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_tamarit<R: Read>(r: R) -> Result<Vec<TamaritRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 7 {
            bail!("tamarit row with {} fields", rec.len());
        }
        rows.push(TamaritRow {
            ego: rec[0].to_string(),
            algorithm: rec[1].to_string(),
            c: rec[2].parse()?,
            mu_hat: rec[3].parse()?,
            ratio_hat: rec[4].parse()?,
            log_likelihood: rec[5].parse()?,
            divergence: rec[6].to_string(),
        });
    }
    Ok(rows)
}

/// Rows skipped during parsing, with their line numbers.
pub fn write_row_errors<W: Write>(w: W, errors: &[RowError]) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["line", "message"])?;
    for e in errors {
        out.write_record([e.line.to_string(), e.message.clone()])?;
    }
    out.flush()?;
    Ok(())
}
