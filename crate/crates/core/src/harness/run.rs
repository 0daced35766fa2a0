use std::collections::BTreeMap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::combine::{
    combine_average, combine_consensus, combine_dpe, default_dpe_iterations, dpe_bandwidth, shard_weights, CombinedSamples, Method,
};
use crate::draws::{Draws, SubposteriorSamples};
use crate::error::{Error, Result, Stage};
use crate::estimate::{range_of, EstimatorSpec};
use crate::metrics::{relative_l2, smooth_samples, transfer_density, L2Report};
use crate::models::{fractionate_prior, partition, sample_full_posterior, sample_subposterior, simulate_data};
use crate::numeric::Grid;
use crate::product::{direct_density_product, MarginalEstimate};

/// How every random stream in a run is derived from the master seed.
pub const SEED_RULE: &str = "shard m chain seed = master_seed + m (m = 1..M); full-data chain seed = master_seed; \
simulation, partition and DPE use ChaCha8 seeded with master_seed on streams 1, 2 and 3; \
direct-method sampling uses ChaCha8 seeded with master_seed + 2^32 on stream j for parameter j";

const STREAM_SIMULATE: u64 = 1;
const STREAM_PARTITION: u64 = 2;
const STREAM_DPE: u64 = 3;

fn stage_rng(master: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}

pub fn chain_seed(master: u64, shard_id: usize) -> u64 {
    master.wrapping_add(shard_id as u64)
}

fn direct_seed(master: u64) -> u64 {
    master.wrapping_add(1 << 32)
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub simulate: f64,
    pub sampling: f64,
    pub combining: f64,
    pub metrics: f64,
    pub total: f64,
    /// Time spent inside each combiner; combiners run concurrently, so these
    /// can add up to more than `combining`.
    pub methods: BTreeMap<Method, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub master: u64,
    pub rule: String,
    pub full_chain: u64,
    pub shards: Vec<u64>,
}

/// Everything persisted to `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub config: ExperimentConfig,
    /// 1-based parameters that were combined and scored.
    pub parameters: Vec<usize>,
    pub reports: Vec<L2Report>,
    pub timings: Timings,
    pub seeds: SeedRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dpe_bandwidth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dpe_iterations: Option<usize>,
    pub densities_kept: bool,
}

impl ExperimentReport {
    pub fn method(&self, method: Method) -> Option<&L2Report> {
        self.reports.iter().find(|r| r.method == method)
    }
}

/// Densities of one parameter on its shared metric grid.
#[derive(Debug, Clone)]
pub struct DensityTable {
    /// 1-based.
    pub parameter: usize,
    pub grid: Grid,
    /// Column name and values, in output order.
    pub columns: Vec<(String, Vec<f64>)>,
}

/// A finished run: the report plus any retained intermediates.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: ExperimentReport,
    pub densities: Option<Vec<DensityTable>>,
    pub shards: Vec<SubposteriorSamples>,
    pub full: SubposteriorSamples,
    pub combined: Vec<CombinedSamples>,
    pub direct: Option<Vec<MarginalEstimate>>,
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

/// Simulate, partition, sample, combine, and score one experiment.
///
/// Deterministic given the config: every parallel stage works on independent
/// items with their own seeds and collects results in a fixed order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate().map_err(|e| e.at(Stage::Config))?;
    let start = Instant::now();
    let spec = &config.model;
    let master = config.seed;
    let estimator = config.effective_estimator();
    let params: Vec<usize> = spec.reported_parameters();

    let data = simulate_data(spec, &mut stage_rng(master, STREAM_SIMULATE)).map_err(|e| e.at(Stage::Simulate))?;
    let shards = partition(&data, config.shards, &mut stage_rng(master, STREAM_PARTITION)).map_err(|e| e.at(Stage::Partition))?;
    let prior = fractionate_prior(spec, config.shards).map_err(|e| e.at(Stage::Partition))?;
    let t_simulate = start.elapsed().as_secs_f64();

    let ((subs, full), t_sampling) = timed(|| {
        rayon::join(
            || {
                shards
                    .par_iter()
                    .map(|s| sample_subposterior(spec, s, &prior, config.draws, config.burnin, chain_seed(master, s.shard_id)))
                    .collect::<Result<Vec<_>>>()
            },
            || sample_full_posterior(spec, &data, config.draws, config.burnin, chain_seed(master, 0)),
        )
    });
    drop(data);
    let subs = subs.map_err(|e| e.at(Stage::Sampling))?;
    let full = full.map_err(|e| e.at(Stage::Sampling))?;

    let combining_start = Instant::now();
    // Sample-space combiners see only the reported coordinates.
    let reduced: Vec<SubposteriorSamples> = if params.len() == spec.dim() {
        subs.clone()
    } else {
        subs.iter()
            .map(|s| SubposteriorSamples {
                draws: s.draws.select_columns(&params),
                ..s.clone()
            })
            .collect()
    };
    let dpe_h = if config.methods.contains(&Method::Dpe) {
        Some(match config.dpe.bandwidth {
            Some(h) => h,
            None => dpe_bandwidth(&reduced).map_err(|e| e.at(Stage::Combining))?,
        })
    } else {
        None
    };
    let dpe_iterations = dpe_h.map(|_| config.dpe.iterations.unwrap_or_else(|| default_dpe_iterations(config.draws)));

    let results = {
        config
            .methods
            .par_iter()
            .map(|&method| {
                let (out, secs) = timed(|| -> Result<MethodOutput> {
                    Ok(match method {
                        Method::Direct => MethodOutput::Direct(direct_density_product(
                            &subs,
                            &params,
                            &estimator,
                            &config.grid,
                            config.want_samples.then_some(config.draws),
                            direct_seed(master),
                        )?),
                        Method::Average => MethodOutput::Samples(combine_average(&reduced)?),
                        Method::Consensus => {
                            let w = shard_weights(&reduced)?;
                            MethodOutput::Samples(combine_consensus(&reduced, &w)?)
                        }
                        Method::Dpe => {
                            let mut rng = stage_rng(master, STREAM_DPE);
                            MethodOutput::Samples(combine_dpe(
                                &reduced,
                                dpe_h.unwrap_or(1.0),
                                dpe_iterations.unwrap_or(0),
                                &mut rng,
                            )?)
                        }
                    })
                });
                out.map(|o| (method, o, secs)).map_err(|e| e.at(Stage::Combining))
            })
            .collect::<Result<Vec<_>>>()
    };
    let results = results?;
    let t_combining = combining_start.elapsed().as_secs_f64();

    let mut method_times = BTreeMap::new();
    let mut direct = None;
    let mut combined = Vec::new();
    for (method, out, secs) in results {
        method_times.insert(method, secs);
        match out {
            MethodOutput::Direct(d) => direct = Some(d),
            MethodOutput::Samples(s) => combined.push(s),
        }
    }

    let (scored, t_metrics) = timed(|| {
        params
            .par_iter()
            .enumerate()
            .map(|(pos, &j)| {
                score_parameter(
                    config,
                    &estimator,
                    pos,
                    j,
                    &subs,
                    &full,
                    &combined,
                    direct.as_deref(),
                )
            })
            .collect::<Result<Vec<_>>>()
    });
    let scored = scored.map_err(|e| e.at(Stage::Metrics))?;

    let labels: Vec<usize> = params.iter().map(|j| j + 1).collect();
    let reports = config
        .methods
        .iter()
        .map(|&method| {
            let values = scored.iter().map(|s| s.distances[&method]).collect();
            L2Report::new(spec.name(), spec.dim(), config.shards, method, labels.clone(), values)
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.at(Stage::Metrics))?;
    let densities = config.keep_densities.then(|| scored.into_iter().filter_map(|s| s.table).collect());

    let total = start.elapsed().as_secs_f64();
    let report = ExperimentReport {
        name: config.label(),
        config: config.clone(),
        parameters: labels,
        reports,
        timings: Timings {
            simulate: t_simulate,
            sampling: t_sampling,
            combining: t_combining,
            metrics: t_metrics,
            total,
            methods: method_times,
        },
        seeds: SeedRecord {
            master,
            rule: SEED_RULE.to_string(),
            full_chain: chain_seed(master, 0),
            shards: subs.iter().map(|s| s.seed).collect(),
        },
        dpe_bandwidth: dpe_h,
        dpe_iterations,
        densities_kept: config.keep_densities,
    };
    Ok(RunOutput {
        report,
        densities,
        shards: subs,
        full,
        combined,
        direct,
    })
}

enum MethodOutput {
    Direct(Vec<MarginalEstimate>),
    Samples(CombinedSamples),
}

struct Scored {
    distances: BTreeMap<Method, f64>,
    table: Option<DensityTable>,
}

/// Smooth everything for parameter `j` onto one shared grid and compare
/// each method against the full-data chain.
#[allow(clippy::too_many_arguments)]
fn score_parameter(
    config: &ExperimentConfig,
    estimator: &EstimatorSpec,
    pos: usize,
    j: usize,
    subs: &[SubposteriorSamples],
    full: &SubposteriorSamples,
    combined: &[CombinedSamples],
    direct: Option<&[MarginalEstimate]>,
) -> Result<Scored> {
    // `combined` holds only the reported coordinates, in order.
    let shard_cols: Vec<Vec<f64>> = subs.iter().map(|s| s.draws.column(j)).collect();
    let full_col = full.draws.column(j);
    let method_cols: Vec<(Method, Vec<f64>)> = combined.iter().map(|c| (c.method, c.draws.column(pos))).collect();
    let (a, b) = range_of(
        shard_cols
            .iter()
            .chain(std::iter::once(&full_col))
            .chain(method_cols.iter().map(|(_, c)| c))
            .map(Vec::as_slice),
        config.grid.padding,
        estimator.support.as_ref(),
    )?;
    let grid = config.grid.grid(a, b)?;
    let full_density = smooth_samples(&full_col, estimator, &grid)?;

    let mut distances = BTreeMap::new();
    let mut columns: BTreeMap<Method, Vec<f64>> = BTreeMap::new();
    for (method, col) in &method_cols {
        let q = smooth_samples(col, estimator, &grid)?;
        distances.insert(*method, relative_l2(&full_density, &q)?);
        columns.insert(*method, q.into_values());
    }
    if let Some(direct) = direct {
        let estimate = direct
            .iter()
            .find(|m| m.parameter_index == j)
            .ok_or_else(|| Error::ShapeMismatch(format!("direct method has no parameter {}", j + 1)))?;
        let q = transfer_density(&estimate.interpolant, &grid)?;
        distances.insert(Method::Direct, relative_l2(&full_density, &q)?);
        columns.insert(Method::Direct, q.into_values());
    }

    let table = if config.keep_densities {
        let mut cols = Vec::with_capacity(subs.len() + 1 + columns.len());
        for (s, col) in subs.iter().zip(&shard_cols) {
            cols.push((format!("shard_{}", s.shard_id), smooth_samples(col, estimator, &grid)?.into_values()));
        }
        cols.push(("full".to_string(), full_density.into_values()));
        for method in &config.methods {
            if let Some(v) = columns.remove(method) {
                cols.push((method.to_string(), v));
            }
        }
        Some(DensityTable {
            parameter: j + 1,
            grid,
            columns: cols,
        })
    } else {
        None
    };
    Ok(Scored { distances, table })
}

/// Draws of the direct method's inverse-CDF samples, one column per parameter.
pub(super) fn direct_samples_table(direct: &[MarginalEstimate]) -> Option<Draws> {
    let cols: Vec<&Vec<f64>> = direct.iter().map(|m| m.samples.as_ref()).collect::<Option<Vec<_>>>()?;
    let t = cols.first()?.len();
    let mut out = Draws::zeros(t, cols.len());
    for (j, c) in cols.iter().enumerate() {
        for (i, v) in c.iter().enumerate() {
            out.row_mut(i)[j] = *v;
        }
    }
    Some(out)
}
