//! Stage chain behind the command-line tool.
//!
//! Each stage writes its files under temporary names and renames them only
//! once the whole stage has succeeded, so a failing stage leaves no partial
//! output. A stage whose previous outputs still match the manifest digests
//! is reused instead of recomputed, provided the command, configuration and
//! input digests are unchanged and every earlier stage was reused too.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context, Result};
use egolayers_core::distfit::{
    bootstrap_pvalues, fit_all, fit_family, fit_mixed_lognormal, log_binned_density, select_by_aic, Family, FitResult,
    MixedLogNormalFit, Params,
};
use egolayers_core::layers::{census_from, jaccard_compare, Algorithm, Census};
use egolayers_core::network::build_cn;
use egolayers_core::synth::{stream_rng, LayeredConfig, OrderLogConfig};
use egolayers_core::tamarit::{ratio_population_fit, TamaritInput};
use egolayers_core::validate::ThresholdBase;
use egolayers_core::{apply_blocklist, Blocklist, WeightedNetwork};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::formats::{
    degree_census, num, read_json_lines, read_network, read_tamarit, write_census, write_columns, write_degree_census,
    write_edge_list, write_json_lines, write_network, write_order_log, write_row_errors, write_tamarit,
    write_validation_report, LayerRecord, TamaritRow, TruthRecord,
};
use crate::ingest::{parse_call_log, parse_order_log, read_blocklist};
use crate::manifest::{digest_file, FileDigest, Manifest, Runtime, StageRecord, StageStatus, MANIFEST_FILE};
use crate::parallel;

/// Invalid configuration or unreadable inputs; nothing was computed.
#[derive(Debug, thiserror::Error)]
#[error("{0:#}")]
pub struct ConfigError(pub anyhow::Error);

/// A stage that started and did not complete.
#[derive(Debug, thiserror::Error)]
#[error("stage `{stage}` failed: {cause:#}")]
pub struct StageFailure {
    pub stage: String,
    pub cause: anyhow::Error,
}

/// Files and counts produced by one stage.
pub struct Outputs {
    dir: PathBuf,
    pending: Vec<(String, PathBuf)>,
    counts: BTreeMap<String, Value>,
}

impl Outputs {
    /// Writes `name` (relative to the output directory) through `body`.
    pub fn write(&mut self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        if self.pending.iter().any(|(n, _)| n == name) {
            bail!("output {name} written twice");
        }
        let target = self.dir.join(name);
        if let Some(parent) = target.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        let mut tmp = target.into_os_string();
        tmp.push(".partial");
        let tmp = PathBuf::from(tmp);
        let file = File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        self.pending.push((name.to_string(), tmp));
        let mut w = BufWriter::new(file);
        body(&mut w).with_context(|| format!("writing {name}"))?;
        w.flush().with_context(|| format!("writing {name}"))?;
        Ok(())
    }

    pub fn count(&mut self, key: &str, value: impl Into<Value>) {
        self.counts.insert(key.to_string(), value.into());
    }

    fn discard(&self) {
        for (_, tmp) in &self.pending {
            let _ = fs::remove_file(tmp);
        }
    }

    fn commit(&self) -> Result<Vec<FileDigest>> {
        let mut digests = Vec::with_capacity(self.pending.len());
        for (name, tmp) in &self.pending {
            let target = self.dir.join(name);
            fs::rename(tmp, &target).with_context(|| format!("renaming {}", tmp.display()))?;
            digests.push(digest_file(&target, name)?);
        }
        digests.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(digests)
    }
}

pub struct Runner {
    dir: PathBuf,
    manifest: Manifest,
    previous: Option<Manifest>,
    reusing: bool,
    started: Instant,
}

impl Runner {
    /// Starts a run of `command` writing into `dir`. Inputs are digested
    /// up front; an unreadable input is a configuration error.
    pub fn new(dir: &Path, command: &str, config: &RunConfig, inputs: &[&Path]) -> Result<Self> {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(ConfigError)?;
        let inputs = inputs
            .iter()
            .map(|p| digest_file(p, &p.display().to_string()))
            .collect::<Result<Vec<_>>>()
            .map_err(ConfigError)?;
        let config = serde_json::to_value(config)?;
        let previous = Manifest::read(&dir.join(MANIFEST_FILE))
            .ok()
            .filter(|m| m.command == command && m.config == config && m.inputs == inputs);
        let created_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        Ok(Runner {
            dir: dir.to_path_buf(),
            manifest: Manifest {
                tool: env!("CARGO_PKG_NAME").to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                command: command.to_string(),
                config,
                inputs,
                stages: Vec::new(),
                runtime: Runtime {
                    threads: rayon::current_num_threads(),
                    created_unix,
                    seconds: 0.0,
                },
                ok: false,
            },
            reusing: previous.is_some(),
            previous,
            started: Instant::now(),
        })
    }

    fn reusable(&self, name: &str) -> Option<StageRecord> {
        if !self.reusing {
            return None;
        }
        let prev = self.previous.as_ref()?.stage(name)?;
        if prev.status == StageStatus::Failed {
            return None;
        }
        let intact = prev
            .outputs
            .iter()
            .all(|o| digest_file(&self.dir.join(&o.path), &o.path).is_ok_and(|d| d == *o));
        intact.then(|| prev.clone())
    }

    /// Runs one stage, or reloads its previous outputs through `reload`
    /// when they can be reused.
    pub fn stage<T>(
        &mut self,
        name: &str,
        run: impl FnOnce(&mut Outputs) -> Result<T>,
        reload: impl FnOnce(&Path) -> Result<T>,
    ) -> Result<T> {
        let t0 = Instant::now();
        if let Some(prev) = self.reusable(name) {
            if let Ok(value) = reload(&self.dir) {
                self.manifest.stages.push(StageRecord {
                    status: StageStatus::Reused,
                    seconds: t0.elapsed().as_secs_f64(),
                    error: None,
                    ..prev
                });
                return Ok(value);
            }
        }
        self.reusing = false;
        let mut out = Outputs {
            dir: self.dir.clone(),
            pending: Vec::new(),
            counts: BTreeMap::new(),
        };
        let result = run(&mut out).and_then(|v| out.commit().map(|d| (v, d)));
        match result {
            Ok((value, outputs)) => {
                self.manifest.stages.push(StageRecord {
                    name: name.to_string(),
                    status: StageStatus::Ok,
                    counts: out.counts,
                    outputs,
                    seconds: t0.elapsed().as_secs_f64(),
                    error: None,
                });
                Ok(value)
            }
            Err(cause) => {
                out.discard();
                self.manifest.stages.push(StageRecord {
                    name: name.to_string(),
                    status: StageStatus::Failed,
                    counts: out.counts,
                    outputs: Vec::new(),
                    seconds: t0.elapsed().as_secs_f64(),
                    error: Some(format!("{cause:#}")),
                });
                self.manifest.runtime.seconds = self.started.elapsed().as_secs_f64();
                self.manifest.write(&self.dir.join(MANIFEST_FILE))?;
                Err(StageFailure {
                    stage: name.to_string(),
                    cause,
                }
                .into())
            }
        }
    }

    pub fn finish(mut self) -> Result<Manifest> {
        self.manifest.ok = true;
        self.manifest.runtime.seconds = self.started.elapsed().as_secs_f64();
        self.manifest.write(&self.dir.join(MANIFEST_FILE))?;
        Ok(self.manifest)
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

pub fn load_network(path: &Path) -> Result<WeightedNetwork> {
    read_network(open(path)?).with_context(|| format!("reading {}", path.display()))
}

// ---------------------------------------------------------------- build

#[derive(Debug, Clone)]
pub enum EventSource {
    Orders(PathBuf),
    Calls(PathBuf),
}

impl EventSource {
    pub fn path(&self) -> &Path {
        match self {
            EventSource::Orders(p) | EventSource::Calls(p) => p,
        }
    }
}

pub fn build_stage(out: &mut Outputs, source: &EventSource, blocklist: Option<&Path>, cfg: &RunConfig) -> Result<WeightedNetwork> {
    let block = match blocklist {
        Some(p) => read_blocklist(open(p)?)?,
        None => Blocklist::new(),
    };
    let (net, errors) = match source {
        EventSource::Orders(p) => {
            let parsed = parse_order_log(open(p)?, &cfg.order_schema)?;
            let parsed_events = parsed.events.len();
            let events = apply_blocklist(parsed.events, &block);
            out.count("rows", parsed.rows);
            out.count("events", events.len());
            out.count("blocked_events", parsed_events - events.len());
            (parallel::build_ein(&events, &cfg.ein())?, parsed.errors)
        }
        EventSource::Calls(p) => {
            let parsed = parse_call_log(open(p)?, &cfg.call_schema)?;
            let parsed_events = parsed.events.len();
            let events = apply_blocklist(parsed.events, &block);
            out.count("rows", parsed.rows);
            out.count("events", events.len());
            out.count("blocked_events", parsed_events - events.len());
            out.count("self_calls", parsed.self_calls);
            (build_cn(&events, cfg.cn_marginals()), parsed.errors)
        }
    };
    out.count("row_errors", errors.len());
    out.count("blocklist", block.len());
    out.count("nodes", net.node_count());
    out.count("edges", net.edge_count());
    out.count("grand_total", net.grand_total());
    out.write("ingest_errors.csv", |w| write_row_errors(w, &errors))?;
    out.write("network.csv", |w| write_network(w, &net))?;
    out.write("edges.csv", |w| write_edge_list(w, &net))?;
    Ok(net)
}

// ------------------------------------------------------------- validate

fn base_name(base: ThresholdBase) -> &'static str {
    match base {
        ThresholdBase::MaximalPairs => "maximal_pairs",
        ThresholdBase::TestedEdges => "tested_edges",
    }
}

pub fn validate_stage(out: &mut Outputs, net: &WeightedNetwork, cfg: &RunConfig) -> Result<WeightedNetwork> {
    let vcfg = cfg.validation();
    let v = parallel::validate(net, &vcfg)?;
    out.count("nodes", net.node_count());
    out.count("tested_edges", net.edge_count());
    out.count("directed_tests", 2 * net.edge_count());
    out.count("threshold_base", base_name(vcfg.threshold_base));
    out.count("p_b", v.threshold);
    out.count("retained_edges", v.network.edge_count());
    out.write("validation.csv", |w| write_validation_report(w, net, &v.report))?;
    out.write("validated_network.csv", |w| write_network(w, &v.network))?;
    out.write("validated_edges.csv", |w| write_edge_list(w, &v.network))?;
    if cfg.both_bases {
        let mut alt = vcfg;
        alt.threshold_base = match vcfg.threshold_base {
            ThresholdBase::MaximalPairs => ThresholdBase::TestedEdges,
            ThresholdBase::TestedEdges => ThresholdBase::MaximalPairs,
        };
        let name = base_name(alt.threshold_base);
        let v2 = parallel::validate(net, &alt)?;
        out.count(&format!("p_b_{name}"), v2.threshold);
        out.count(&format!("retained_edges_{name}"), v2.network.edge_count());
        out.write(&format!("validation_{name}.csv"), |w| write_validation_report(w, net, &v2.report))?;
    }
    Ok(v.network)
}

// ---------------------------------------------------------- fit-degrees

#[derive(Debug, Serialize)]
struct FitLine {
    sample: &'static str,
    family: &'static str,
    n: usize,
    params: BTreeMap<&'static str, f64>,
    log_likelihood: f64,
    aic: f64,
    ks_stat: f64,
    ks_pvalue: f64,
    selected: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    bootstrap: Option<Value>,
}

fn param_map(p: &Params) -> BTreeMap<&'static str, f64> {
    let mut m = BTreeMap::new();
    match *p {
        Params::PowerLaw { alpha, x_min } => {
            m.insert("alpha", alpha);
            m.insert("x_min", x_min);
        }
        Params::Normal { mu, sigma } | Params::LogNormal { mu, sigma } => {
            m.insert("mu", mu);
            m.insert("sigma", sigma);
        }
        Params::Exponential { lambda } => {
            m.insert("lambda", lambda);
            m.insert("scale", 1.0 / lambda);
        }
    }
    m
}

fn mixed_json(sample: &str, fit: &MixedLogNormalFit) -> Value {
    json!({
        "sample": sample,
        "status": "ok",
        "threshold": fit.threshold,
        "below": {"mu": fit.below.mu, "sigma": fit.below.sigma},
        "above": {"mu": fit.above.mu, "sigma": fit.above.sigma},
        "residual": fit.residual,
        "n_below": fit.n_below,
        "n_above": fit.n_above,
        "flat": fit.flat,
    })
}

const PLOT_BINS: usize = 30;

pub fn fit_stage(out: &mut Outputs, net: &WeightedNetwork, cfg: &RunConfig) -> Result<()> {
    let census = degree_census(net);
    out.write("degree_census.csv", |w| write_degree_census(w, &census))?;
    let degrees: Vec<(u64, u64)> = net.degrees().into_iter().filter(|&(k, _)| k > 0).collect();
    out.count("nodes_with_edges", degrees.len());
    let samples: [(&'static str, Vec<f64>); 2] = [
        ("degree", degrees.iter().map(|d| d.0 as f64).collect()),
        ("weighted_degree", degrees.iter().map(|d| d.1 as f64).collect()),
    ];
    let mut lines = Vec::new();
    let mut mixed = Vec::new();
    for (si, (name, sample)) in samples.iter().enumerate() {
        let fits: Vec<FitResult> = if sample.len() >= 3 { fit_all(sample)? } else { Vec::new() };
        let best = select_by_aic(&fits).ok();
        if let Some(b) = best {
            out.count(&format!("{name}_selected"), b.name());
        }
        for fit in &fits {
            let bootstrap = if cfg.bootstrap > 0 {
                let mut rng = stream_rng(cfg.seed, (si * Family::ALL.len() + fit.family() as usize) as u64);
                let b = bootstrap_pvalues(sample, fit.params, cfg.bootstrap, &mut rng)?;
                Some(json!({"resamples": b.resamples, "ks_pvalue": b.ks, "ad_pvalue": b.ad}))
            } else {
                None
            };
            lines.push(FitLine {
                sample: name,
                family: fit.family().name(),
                n: fit.n,
                params: param_map(&fit.params),
                log_likelihood: fit.log_likelihood,
                aic: fit.aic,
                ks_stat: fit.ks_stat,
                ks_pvalue: fit.ks_pvalue,
                selected: Some(fit.family()) == best,
                bootstrap,
            });
        }
        let density = log_binned_density(sample, PLOT_BINS);
        let rows: Vec<Vec<f64>> = density.iter().map(|&(x, d)| vec![x, d]).collect();
        out.write(&format!("plot/{name}_empirical.tsv"), |w| write_columns(w, &["value", "density"], &rows))?;
        for fit in &fits {
            let rows: Vec<Vec<f64>> = density.iter().map(|&(x, _)| vec![x, fit.params.pdf(x)]).collect();
            out.write(&format!("plot/{name}_{}.tsv", fit.family().name()), |w| {
                write_columns(w, &["value", "density"], &rows)
            })?;
        }
        match fit_mixed_lognormal(sample) {
            Ok(fit) => {
                out.count(&format!("{name}_threshold"), fit.threshold);
                let n = sample.len() as f64;
                let rows: Vec<Vec<f64>> = density
                    .iter()
                    .map(|&(x, _)| {
                        let d = if fit.below.in_support(x) {
                            fit.below.pdf(x) * fit.n_below as f64 / n
                        } else {
                            fit.above.pdf(x) * fit.n_above as f64 / n
                        };
                        vec![x, d]
                    })
                    .collect();
                out.write(&format!("plot/{name}_mixed_log_normal.tsv"), |w| {
                    write_columns(w, &["value", "density"], &rows)
                })?;
                let curve: Vec<Vec<f64>> = fit.curve.iter().map(|p| vec![p.threshold, p.residual]).collect();
                out.write(&format!("plot/{name}_mixed_residual.tsv"), |w| {
                    write_columns(w, &["threshold", "residual"], &curve)
                })?;
                mixed.push(mixed_json(name, &fit));
            }
            Err(e) => mixed.push(json!({"sample": name, "status": "inapplicable", "message": e.to_string()})),
        }
    }
    out.write("fit_report.jsonl", |w| write_json_lines(w, &lines))?;
    out.write("fit_mixed.jsonl", |w| write_json_lines(w, &mixed))?;
    Ok(())
}

// --------------------------------------------------------------- layers

pub type LayerSet = Vec<(Algorithm, Vec<LayerRecord>)>;

fn layer_file(alg: Algorithm) -> String {
    format!("layers_{}.jsonl", alg.name())
}

#[derive(Debug, Serialize)]
struct LayerSizeLine {
    algorithm: &'static str,
    c: usize,
    layer: usize,
    egos: usize,
    /// `(alter count, egos)` pairs in ascending count order.
    histogram: Vec<(usize, usize)>,
    log_normal: Option<BTreeMap<&'static str, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
}

fn layer_size_lines(alg: Algorithm, records: &[LayerRecord]) -> Vec<LayerSizeLine> {
    let mut groups: BTreeMap<usize, Vec<&LayerRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| !r.degenerate) {
        groups.entry(r.c).or_default().push(r);
    }
    let mut lines = Vec::new();
    for (c, recs) in groups {
        for k in 0..c {
            let sizes: Vec<usize> = recs.iter().map(|r| r.sizes[k]).collect();
            let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
            for &s in &sizes {
                *hist.entry(s).or_default() += 1;
            }
            let values: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
            let (log_normal, note) = if values.len() < 3 {
                (None, Some(format!("{} egos, need at least 3", values.len())))
            } else {
                match fit_family(&values, Family::LogNormal) {
                    Ok(f) => {
                        let mut m = param_map(&f.params);
                        m.insert("ks_stat", f.ks_stat);
                        m.insert("ks_pvalue", f.ks_pvalue);
                        (Some(m), None)
                    }
                    Err(e) => (None, Some(e.to_string())),
                }
            };
            lines.push(LayerSizeLine {
                algorithm: alg.name(),
                c,
                layer: k + 1,
                egos: sizes.len(),
                histogram: hist.into_iter().collect(),
                log_normal,
                note,
            });
        }
    }
    lines
}

pub fn layers_stage(out: &mut Outputs, net: &WeightedNetwork, cfg: &RunConfig) -> Result<LayerSet> {
    let mut set = Vec::new();
    for alg in cfg.layer_algorithms() {
        let egos = parallel::layer_census(net, cfg.degree_floor, alg, cfg.k_max)?;
        let mut records: Vec<LayerRecord> = egos.iter().map(|e| LayerRecord::new(net, alg.name(), e)).collect();
        records.sort_by(|a, b| a.ego.cmp(&b.ego));
        out.count(&format!("{}_egos", alg.name()), records.len());
        out.count(&format!("{}_degenerate", alg.name()), records.iter().filter(|r| r.degenerate).count());
        out.write(&layer_file(alg), |w| write_json_lines(w, &records))?;
        let sizes = layer_size_lines(alg, &records);
        out.write(&format!("layer_sizes_{}.jsonl", alg.name()), |w| write_json_lines(w, &sizes))?;
        set.push((alg, records));
    }
    Ok(set)
}

pub fn load_layers(dir: &Path, algorithms: &[Algorithm]) -> Result<LayerSet> {
    algorithms
        .iter()
        .map(|&alg| {
            let path = dir.join(layer_file(alg));
            Ok((alg, read_layer_file(&path)?))
        })
        .collect()
}

pub fn read_layer_file(path: &Path) -> Result<Vec<LayerRecord>> {
    read_json_lines(open(path)?).with_context(|| format!("reading {}", path.display()))
}

/// Algorithm named in a set of layer records (all records must agree).
pub fn algorithm_of(records: &[LayerRecord], path: &Path) -> Result<Algorithm> {
    let mut names = records.iter().map(|r| r.algorithm.as_str());
    let first = names.next().ok_or_else(|| anyhow!("{} holds no egos", path.display()))?;
    if names.any(|n| n != first) {
        bail!("{} mixes layer algorithms", path.display());
    }
    match first {
        "kmeans" => Ok(Algorithm::KMeans),
        "ht_break" => Ok(Algorithm::HtBreak),
        other => bail!("unknown layer algorithm {other:?} in {}", path.display()),
    }
}

// -------------------------------------------------------------- tamarit

pub fn tamarit_stage(out: &mut Outputs, layers: &LayerSet, population: u64) -> Result<Vec<TamaritRow>> {
    out.count("population", population);
    let mut rows = Vec::new();
    let mut groups = Vec::new();
    for (alg, records) in layers {
        let eligible: Vec<&LayerRecord> = records.iter().filter(|r| !r.degenerate && r.c >= 2).collect();
        let inputs = eligible
            .iter()
            .map(|r| {
                TamaritInput::new(r.sizes.iter().map(|&s| s as u64).collect(), population)
                    .with_context(|| format!("ego {}", r.ego))
            })
            .collect::<Result<Vec<_>>>()?;
        let estimates = parallel::estimate_all(&inputs)?;
        let mut by_c: BTreeMap<usize, Vec<_>> = BTreeMap::new();
        for (r, e) in eligible.iter().zip(&estimates) {
            rows.push(TamaritRow {
                ego: r.ego.clone(),
                algorithm: alg.name().to_string(),
                c: r.c,
                mu_hat: e.mu_hat,
                ratio_hat: e.ratio_hat,
                log_likelihood: e.log_likelihood,
                divergence: e.divergence.name().to_string(),
            });
            by_c.entry(r.c).or_default().push(*e);
        }
        out.count(&format!("{}_estimates", alg.name()), estimates.len());
        out.count(
            &format!("{}_divergent", alg.name()),
            estimates.iter().filter(|e| e.divergence.is_divergent()).count(),
        );
        for (c, ests) in by_c {
            let base = json!({"algorithm": alg.name(), "c": c, "egos": ests.len()});
            let finite: Vec<f64> = ests
                .iter()
                .filter(|e| !e.divergence.is_divergent())
                .map(|e| e.ratio_hat)
                .collect();
            let density = log_binned_density(&finite, PLOT_BINS);
            let hist: Vec<Vec<f64>> = density.iter().map(|&(x, d)| vec![x, d]).collect();
            let stem = format!("plot/ratio_{}_c{c}", alg.name());
            out.write(&format!("{stem}.tsv"), |w| write_columns(w, &["ratio", "density"], &hist))?;
            let mut line = base;
            match ratio_population_fit(&ests) {
                Ok(fit) => {
                    let curve: Vec<Vec<f64>> = density.iter().map(|&(x, _)| vec![x, fit.fit.params.pdf(x)]).collect();
                    out.write(&format!("{stem}_log_normal.tsv"), |w| write_columns(w, &["ratio", "density"], &curve))?;
                    let extra = json!({
                        "status": "ok",
                        "used": fit.used,
                        "divergent": fit.divergent,
                        "params": param_map(&fit.fit.params),
                        "median_ratio": fit.median_ratio,
                        "fitted_median": fit.fitted_median,
                        "chi2": {"statistic": fit.chi2.statistic, "pvalue": fit.chi2.pvalue, "dof": fit.chi2.dof},
                        "ks": {"statistic": fit.ks.statistic, "pvalue": fit.ks.pvalue},
                        "ad": {"statistic": fit.ad.statistic, "pvalue": fit.ad.pvalue},
                        "accepted_5pct": fit.accepted_at(0.05),
                    });
                    merge(&mut line, extra);
                }
                Err(e) => merge(&mut line, json!({"status": "inapplicable", "message": e.to_string()})),
            }
            groups.push(line);
        }
    }
    rows.sort_by(|a, b| (&a.algorithm, &a.ego).cmp(&(&b.algorithm, &b.ego)));
    out.write("tamarit.csv", |w| write_tamarit(w, &rows))?;
    out.write("tamarit_population.jsonl", |w| write_json_lines(w, &groups))?;
    Ok(rows)
}

fn merge(into: &mut Value, from: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, from) {
        a.extend(b);
    }
}

pub fn load_tamarit(path: &Path) -> Result<Vec<TamaritRow>> {
    read_tamarit(open(path)?).with_context(|| format!("reading {}", path.display()))
}

/// Distinct egos and alters named in the layer records; the population
/// used when no network node count is available.
pub fn population_of(layers: &LayerSet) -> u64 {
    let mut ids = std::collections::BTreeSet::new();
    for (_, records) in layers {
        for r in records {
            ids.insert(r.ego.as_str());
            ids.extend(r.alters.iter().map(String::as_str));
        }
    }
    ids.len() as u64
}

// --------------------------------------------------------------- census

pub fn census_stage(out: &mut Outputs, layers: &LayerSet, tamarit: &[TamaritRow], cfg: &RunConfig) -> Result<()> {
    let censuses: Vec<Census> = layers
        .iter()
        .map(|(alg, records)| {
            let outcomes: Vec<_> = records.iter().map(LayerRecord::outcome).collect();
            census_from(*alg, &outcomes)
        })
        .collect();
    let mut sums: BTreeMap<(String, usize), (f64, usize)> = BTreeMap::new();
    for r in tamarit.iter().filter(|r| r.divergence == "none") {
        let e = sums.entry((r.algorithm.clone(), r.c)).or_default();
        e.0 += r.ratio_hat;
        e.1 += 1;
    }
    let means: BTreeMap<(String, usize), f64> = sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect();
    for c in &censuses {
        out.count(&format!("{}_egos", c.algorithm.name()), c.egos);
        out.count(&format!("{}_groups", c.algorithm.name()), c.rows.len());
    }
    out.write("census.csv", |w| write_census(w, &censuses, &means))?;

    let km = layers.iter().find(|(a, _)| *a == Algorithm::KMeans);
    let ht = layers.iter().find(|(a, _)| *a == Algorithm::HtBreak);
    if let (Some((_, km)), Some((_, ht))) = (km, ht) {
        let by_ego: BTreeMap<&str, &LayerRecord> = ht.iter().map(|r| (r.ego.as_str(), r)).collect();
        let mut rows = Vec::new();
        for a in km {
            let Some(b) = by_ego.get(a.ego.as_str()) else { continue };
            if a.alters != b.alters {
                bail!("layer files disagree on the alters of ego {}", a.ego);
            }
            let j = jaccard_compare(&a.layer_of, &b.layer_of, cfg.jaccard_variant())?;
            rows.push((a.ego.clone(), a.c, b.c, j));
        }
        if !rows.is_empty() {
            out.count("jaccard_mean", rows.iter().map(|r| r.3).sum::<f64>() / rows.len() as f64);
        }
        out.count("jaccard_egos", rows.len());
        out.write("jaccard.csv", |w| {
            writeln!(w, "ego,c_kmeans,c_ht_break,jaccard")?;
            for (ego, ca, cb, j) in &rows {
                writeln!(w, "{ego},{ca},{cb},{}", num(*j))?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

// -------------------------------------------------------------- run-all

/// Where the chain starts: a raw event log or an existing network file.
#[derive(Debug, Clone)]
pub enum Start {
    Events(EventSource),
    Network(PathBuf),
}

pub fn run_all(start: &Start, blocklist: Option<&Path>, out_dir: &Path, cfg: &RunConfig) -> Result<Manifest> {
    let pool = parallel::pool(cfg.threads)?;
    pool.install(|| {
        let mut inputs: Vec<&Path> = vec![match start {
            Start::Events(s) => s.path(),
            Start::Network(p) => p,
        }];
        inputs.extend(blocklist);
        let mut runner = Runner::new(out_dir, "run-all", cfg, &inputs)?;
        let net = match start {
            Start::Events(source) => runner.stage(
                "build",
                |o| build_stage(o, source, blocklist, cfg),
                |d| load_network(&d.join("network.csv")),
            )?,
            Start::Network(p) => load_network(p).map_err(ConfigError)?,
        };
        let validated = runner.stage(
            "validate",
            |o| validate_stage(o, &net, cfg),
            |d| load_network(&d.join("validated_network.csv")),
        )?;
        drop(net);
        runner.stage("fit-degrees", |o| fit_stage(o, &validated, cfg), |_| Ok(()))?;
        let algorithms = cfg.layer_algorithms();
        let layers = runner.stage("layers", |o| layers_stage(o, &validated, cfg), |d| load_layers(d, &algorithms))?;
        let population = cfg.population.unwrap_or(validated.node_count() as u64);
        let tamarit = runner.stage(
            "tamarit",
            |o| tamarit_stage(o, &layers, population),
            |d| load_tamarit(&d.join("tamarit.csv")),
        )?;
        runner.stage("census", |o| census_stage(o, &layers, &tamarit, cfg), |_| Ok(()))?;
        runner.finish()
    })
}

// ---------------------------------------------------------------- synth

pub fn synth_orders_stage(out: &mut Outputs, cfg: &OrderLogConfig) -> Result<()> {
    let orders = parallel::gen_order_log(cfg)?;
    out.count("events", orders.len());
    out.write("orders.csv", |w| write_order_log(w, &orders))
}

pub fn synth_layered_stage(out: &mut Outputs, cfg: &LayeredConfig) -> Result<()> {
    let egos = parallel::gen_planted_egos(cfg)?;
    let net = egolayers_core::synth::planted_network(&egos)?;
    out.count("egos", egos.len());
    out.count("nodes", net.node_count());
    out.count("edges", net.edge_count());
    let truth: Vec<TruthRecord> = egos.iter().map(TruthRecord::from).collect();
    out.write("network.csv", |w| write_network(w, &net))?;
    out.write("truth.jsonl", |w| write_json_lines(w, &truth))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TamaritSampling {
    pub seed: u64,
    pub egos: usize,
    pub mu: f64,
    pub total: u64,
    pub layers: usize,
    pub population: u64,
}

pub fn synth_tamarit_stage(out: &mut Outputs, cfg: &TamaritSampling) -> Result<()> {
    use rayon::prelude::*;
    let samples = (0..cfg.egos)
        .into_par_iter()
        .map(|e| {
            let mut rng = stream_rng(cfg.seed, e as u64);
            egolayers_core::synth::sample_tamarit(cfg.mu, cfg.total, cfg.layers, cfg.population, &mut rng)
        })
        .collect::<egolayers_core::Result<Vec<_>>>()?;
    out.count("egos", samples.len());
    out.write("tamarit_samples.csv", |w| {
        let header: Vec<String> = (1..=cfg.layers).map(|k| format!("l{k}")).collect();
        writeln!(w, "sample,{}", header.join(","))?;
        for (i, s) in samples.iter().enumerate() {
            let cells: Vec<String> = s.iter().map(u64::to_string).collect();
            writeln!(w, "{i},{}", cells.join(","))?;
        }
        Ok(())
    })
}
