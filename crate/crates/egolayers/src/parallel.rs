//! Data-parallel drivers over the core algorithms.
//!
//! Work is split over independent units (days, edges, egos, entities), the
//! results are collected in their natural order and every reduction runs
//! sequentially afterwards, so outputs do not depend on the thread count.
//! Run inside a [`rayon::ThreadPool::install`] to bound the parallelism.

use egolayers_core::layers::{analyze_alters, eligible_egos, Algorithm, EgoLayers};
use egolayers_core::network::{aggregate_networks, build_ein_daily, split_by_day, EinConfig};
use egolayers_core::synth::{group_copies, investor_orders, planted_ego, sort_orders, LayeredConfig, OrderLogConfig, PlantedEgo};
use egolayers_core::tamarit::{estimate_mu, TamaritEstimate, TamaritInput};
use egolayers_core::validate::{Validation, ValidationConfig, Validator};
use egolayers_core::{OrderEvent, Result, WeightedNetwork};
use rayon::prelude::*;

/// Thread pool with `threads` workers (0 = rayon's default).
pub fn pool(threads: usize) -> anyhow::Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(threads).build()?)
}

pub fn build_ein(orders: &[OrderEvent], cfg: &EinConfig) -> Result<WeightedNetwork> {
    cfg.check()?;
    let days: Vec<Vec<OrderEvent>> = split_by_day(orders, cfg.day_offset_seconds).into_values().collect();
    let daily = days
        .par_iter()
        .map(|d| build_ein_daily(d, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate_networks(&daily))
}

pub fn validate(network: &WeightedNetwork, cfg: &ValidationConfig) -> Result<Validation> {
    let validator = Validator::new(network, cfg)?;
    let edges: Vec<_> = network.edge_set().iter().copied().collect();
    let report = edges
        .par_iter()
        .map(|&(i, j)| validator.test(i, j))
        .collect::<Result<Vec<_>>>()?;
    Ok(validator.finish(report))
}

pub fn layer_census(network: &WeightedNetwork, degree_floor: u64, algorithm: Algorithm, k_max: usize) -> Result<Vec<EgoLayers>> {
    eligible_egos(network, degree_floor)
        .into_par_iter()
        .map(|(ego, alters)| analyze_alters(ego, alters, algorithm, k_max))
        .collect()
}

pub fn estimate_all(inputs: &[TamaritInput]) -> Result<Vec<TamaritEstimate>> {
    inputs.par_iter().map(estimate_mu).collect()
}

pub fn gen_order_log(cfg: &OrderLogConfig) -> Result<Vec<OrderEvent>> {
    cfg.check()?;
    let mut orders: Vec<OrderEvent> = (0..cfg.investors)
        .into_par_iter()
        .flat_map_iter(|i| investor_orders(cfg, i))
        .collect();
    if let Some(c) = &cfg.coordination {
        let copies: Vec<OrderEvent> = (0..c.groups).into_par_iter().flat_map_iter(|g| group_copies(cfg, g)).collect();
        orders.extend(copies);
    }
    sort_orders(&mut orders);
    Ok(orders)
}

pub fn gen_planted_egos(cfg: &LayeredConfig) -> Result<Vec<PlantedEgo>> {
    cfg.check()?;
    Ok((0..cfg.egos).into_par_iter().map(|e| planted_ego(cfg, e)).collect())
}
