//! Honest-gallery sweeps over `(η, noise)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::RunConfig;
use crate::error::{Error, Result};
use crate::master::{soundness_probe_mc, Gallery, SourceTable};
use crate::rng::SimRng;
use crate::seeded_pre::RateEstimate;

pub const DEFAULT_GRID_CAP: usize = 64;
/// Worker-count override for sweeps.
pub const WORKERS_ENV: &str = "PHYSRAND_WORKERS";
/// Simulated sources are flat over `2^min(claimed_k, 16)` values.
const MAX_SIM_K: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub eta: Vec<f64>,
    pub noise: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub eta: f64,
    pub noise: f64,
    pub trials: usize,
    pub accept_rate: f64,
    pub accept_low: f64,
    pub accept_high: f64,
    pub probe_distance: f64,
    pub probe_noise_floor: f64,
    pub completeness_bound: f64,
    pub soundness_bound: f64,
}

fn pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| crate::error::config_err(WORKERS_ENV, format!("`{v}` is not a worker count")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::ResourceLimit(e.to_string()))
}

/// One row per `(η, noise)` pair, `η`-major. Every row reuses the config's
/// seeds, so rows differ only in the swept parameters.
pub fn experiment_sweep(cfg: &RunConfig, grid: &SweepGrid) -> Result<(Vec<SweepRow>, String)> {
    let cap = cfg.grid_cap.unwrap_or(DEFAULT_GRID_CAP);
    let points = grid.eta.len() * grid.noise.len();
    if points > cap {
        return Err(Error::ResourceLimit(format!("{points} grid points exceed the cap of {cap}")));
    }
    let src = cfg.load_source()?;
    let k = src.meta().claimed_k.min(MAX_SIM_K);
    let source = SourceTable::random_flat(cfg.master.ext.n(), k, &mut SimRng::new(cfg.seeds.source))?;
    let pairs: Vec<(f64, f64)> = grid
        .eta
        .iter()
        .flat_map(|&e| grid.noise.iter().map(move |&n| (e, n)))
        .collect();
    let rows = pool()?.install(|| {
        pairs
            .par_iter()
            .map(|&(eta, noise)| -> Result<SweepRow> {
                let mut spec = cfg.master.clone();
                spec.eta = eta;
                spec.validate()?;
                let probe = soundness_probe_mc(&spec, &Gallery::Honest { noise }, &source, cfg.trials, cfg.seeds.devices)?;
                let accepted = (probe.accept_probability * cfg.trials as f64).round() as usize;
                let rate = RateEstimate::from_counts(accepted, cfg.trials);
                let mut c = cfg.clone();
                c.master = spec;
                let ledger = c.ledger(noise)?;
                Ok(SweepRow {
                    eta,
                    noise,
                    trials: cfg.trials,
                    accept_rate: rate.rate,
                    accept_low: rate.low,
                    accept_high: rate.high,
                    probe_distance: probe.weighted_distance,
                    probe_noise_floor: probe.noise_floor,
                    completeness_bound: ledger.completeness_bound,
                    soundness_bound: ledger.soundness_bound,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok((rows, String::from_utf8(bytes).expect("csv output is UTF-8")))
}
