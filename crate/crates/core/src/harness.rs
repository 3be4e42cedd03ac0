//! Experiment orchestration: parameter sweeps, replications, and the
//! comparison of simulated indicators against the three analytic variants.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::analytic::{compute_indicators, IndicatorSet, Variant};
use crate::config::{CapacitySource, ScenarioConfig};
use crate::error::{Error, Result};
use crate::grid::{Grid, NUM_CELLS};
use crate::radio::{
    estimate_capacity_stats, CapacityAccumulator, CapacityModel, CapacityStats, ShannonCapacity,
};
use crate::sim::{self, SimResult};

/// `|simulated − analytic| / simulated`.
pub fn relative_error(simulated: f64, analytic: f64) -> Result<f64> {
    if simulated == 0.0 || !simulated.is_finite() {
        return Err(Error::Domain(format!(
            "relative error needs a nonzero reference, got {simulated}"
        )));
    }
    Ok(((simulated - analytic) / simulated).abs())
}

/// Student-t interval on the mean of `values`: `(mean, half-width)`.
pub fn confidence_interval(values: &[f64], level: f64) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: values.len(),
        });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let t = StudentsT::new(0.0, 1.0, n - 1.0)
        .map_err(|e| Error::Domain(e.to_string()))?
        .inverse_cdf(0.5 + level / 2.0);
    Ok((mean, t * (var / n).sqrt()))
}

/// Seed of replication `rep` (splitmix64 of the master seed and index).
pub fn replication_seed(master: u64, rep: u32) -> u64 {
    let mut z = master ^ (u64::from(rep) + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    A,
    B,
    C,
    D,
    E,
}

impl Case {
    pub const ALL: [Case; 5] = [Case::A, Case::B, Case::C, Case::D, Case::E];

    /// Name of the swept parameter.
    pub fn parameter(self) -> &'static str {
        match self {
            Case::A => "users_per_cell",
            Case::B => "nsts",
            Case::C => "r0_kbps",
            Case::D => "lambda",
            Case::E => "lambda_ts_s",
        }
    }

    /// Default sweep values.
    pub fn grid(self) -> Vec<f64> {
        match self {
            Case::A => vec![100.0, 150.0, 200.0, 250.0, 300.0, 350.0],
            Case::B => vec![2.0, 3.0, 4.0, 5.0, 6.0, 7.0],
            Case::C => vec![200.0, 300.0, 400.0, 500.0, 600.0, 700.0],
            Case::D => vec![0.1, 0.15, 0.2, 0.25, 0.3, 0.35],
            Case::E => vec![12.0, 24.0, 36.0, 48.0, 56.0, 72.0],
        }
    }

    /// `base` with the swept parameter set to `value`. The warm-up grows to
    /// at least ten subscription periods and the measured window keeps its
    /// length.
    pub fn apply(self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut c = base.clone();
        let bad = || Error::InvalidConfig(format!("case {self}: unusable value {value}"));
        match self {
            Case::A => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(bad());
                }
                c.network.users_per_cell = value as u32;
            }
            Case::B => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(bad());
                }
                c.subscription.shares = ScenarioConfig::triangular_shares(value as usize);
                c.subscription.weights = None;
            }
            Case::C => c.subscription.r0_bps = value * 1e3,
            Case::D => {
                c.subscription.ema_lambda = value;
                let product =
                    base.subscription.ema_lambda * base.subscription.subscription_period_s;
                c.subscription.subscription_period_s = product / value;
            }
            Case::E => c.subscription.subscription_period_s = value / c.subscription.ema_lambda,
        }
        let window = base.run.duration_s - base.run.warmup_s;
        c.run.warmup_s = base
            .run
            .warmup_s
            .max(10.0 * c.subscription.subscription_period_s);
        c.run.duration_s = c.run.warmup_s + window;
        c.validate()?;
        Ok(c)
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Case::A => "a",
            Case::B => "b",
            Case::C => "c",
            Case::D => "d",
            Case::E => "e",
        };
        f.write_str(s)
    }
}

impl FromStr for Case {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(Case::A),
            "b" => Ok(Case::B),
            "c" => Ok(Case::C),
            "d" => Ok(Case::D),
            "e" => Ok(Case::E),
            _ => Err(Error::UnknownCase(s.to_string())),
        }
    }
}

/// Simulated and analytic indicators of one replication, aggregated over
/// the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub seed: u64,
    pub sigma_hat: f64,
    pub rho_hat: Vec<f64>,
    pub n_hat: f64,
    pub capacity: CapacityStats,
    pub sigma_mean_capacity: f64,
    pub sigma_median_capacity: f64,
    pub sigma_modified: f64,
    pub rho: Vec<f64>,
    pub rho_modified: Vec<f64>,
    pub beta_modified: f64,
}

/// Capacity statistics over all cells from uniformly placed measurements.
pub fn random_location_stats(
    grid: &Grid,
    model: &impl CapacityModel,
    samples_per_cell: usize,
    seed: u64,
) -> Result<CapacityStats> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = CapacityAccumulator::default();
    for cell in grid.cells() {
        for _ in 0..samples_per_cell {
            let p = grid.sample_in_cell(cell.id, &mut rng);
            acc.push(model.measure(grid, cell.id, p, &mut rng));
        }
    }
    acc.stats()
}

/// Per-cell statistics from `samples` uniformly placed measurements each,
/// one seeded stream for the whole grid.
pub fn per_cell_capacity_stats(
    cfg: &ScenarioConfig,
    samples: usize,
    seed: u64,
) -> Result<Vec<CapacityStats>> {
    let grid = Grid::new(cfg.network.isd_m)?;
    let model = ShannonCapacity::new(cfg.radio)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    grid.cells()
        .iter()
        .map(|c| estimate_capacity_stats(c.id, &grid, &model, samples, &mut rng))
        .collect()
}

/// Every cell carries the same analytic indicators.
pub fn check_homogeneous(set: &IndicatorSet) -> Result<()> {
    let first = &set.cells[0];
    for c in &set.cells[1..] {
        if c.sigma != first.sigma || c.rho != first.rho {
            return Err(Error::Domain(format!(
                "{} indicators differ between cells {} and {}",
                set.variant, first.cell, c.cell
            )));
        }
    }
    Ok(())
}

/// Analytic indicators of all three variants for a homogeneous scenario,
/// fed with grid-level statistics: the pooled capacity statistics and the
/// mean number of users per cell.
pub fn analytic_sets(
    cfg: &ScenarioConfig,
    stats: CapacityStats,
    n_hat: f64,
) -> Result<Vec<IndicatorSet>> {
    let weights = vec![cfg.weights()?; NUM_CELLS];
    let params = cfg.choice_params()?;
    let stats = vec![Some(stats); NUM_CELLS];
    let n = vec![n_hat; NUM_CELLS];
    Variant::ANALYTIC
        .iter()
        .map(|&v| {
            let set =
                compute_indicators(&stats, &n, &weights, &params, v, cfg.analytic.variance_log)?;
            check_homogeneous(&set)?;
            Ok(set)
        })
        .collect()
}

/// Reduces one simulation run to grid-level simulated and analytic values.
pub fn summarize(
    cfg: &ScenarioConfig,
    result: &SimResult,
    stats: CapacityStats,
) -> Result<ReplicationSummary> {
    let n_hat = result.mean_n_hat();
    let sets = analytic_sets(cfg, stats, n_hat)?;
    let (mean, median, modified) = (&sets[0], &sets[1], &sets[2]);
    Ok(ReplicationSummary {
        seed: result.seed,
        sigma_hat: result.mean_sigma_hat(),
        rho_hat: result.mean_rho_hat(),
        n_hat,
        capacity: stats,
        sigma_mean_capacity: mean.mean_sigma(),
        sigma_median_capacity: median.mean_sigma(),
        sigma_modified: modified.mean_sigma(),
        rho: mean.mean_rho(),
        rho_modified: modified.mean_rho(),
        beta_modified: modified.cells[0].beta_used,
    })
}

/// One simulated replication followed by its analytic comparison.
pub fn run_replication(cfg: &ScenarioConfig, grid: &Grid, seed: u64) -> Result<ReplicationSummary> {
    let model = ShannonCapacity::new(cfg.radio)?;
    let result = sim::run_with(cfg, grid, &model, seed)?;
    let stats = match cfg.run.capacity_source {
        CapacitySource::SubscriptionTimes => result.pooled_capacity.ok_or_else(|| {
            Error::Domain("run recorded fewer than two subscription decisions".into())
        })?,
        CapacitySource::RandomLocations => random_location_stats(
            grid,
            &model,
            cfg.run.capacity_samples,
            replication_seed(seed, u32::MAX),
        )?,
    };
    summarize(cfg, &result, stats)
}

/// Mean over slices of `|ρ̂_i − ρ_i| / ρ̂_i`.
pub fn mean_rho_error(rho_hat: &[f64], rho: &[f64]) -> Result<f64> {
    let errs = rho_hat
        .iter()
        .zip(rho)
        .map(|(&s, &a)| relative_error(s, a))
        .collect::<Result<Vec<_>>>()?;
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}

/// One sweep point. Column order is the CSV layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub case: String,
    pub parameter: String,
    pub value: f64,
    pub replications: u32,
    pub sigma_hat: f64,
    /// Half-width of the 99% interval of `sigma_hat`.
    pub sigma_hat_ci99: f64,
    pub sigma_mean_capacity: f64,
    pub sigma_median_capacity: f64,
    pub sigma_modified: f64,
    pub err_mean_capacity: f64,
    pub err_median_capacity: f64,
    pub err_modified: f64,
    pub rho_error: f64,
    pub rho_error_modified: f64,
    pub mean_capacity_bps: f64,
    pub median_capacity_bps: f64,
    pub var_log_c: f64,
    pub beta_modified: f64,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

fn mean_vec(rows: &[Vec<f64>]) -> Vec<f64> {
    (0..rows[0].len())
        .map(|i| mean(rows.iter().map(|r| r[i])))
        .collect()
}

/// Aggregates replications of one sweep point.
pub fn compare(
    case: &str,
    parameter: &str,
    value: f64,
    reps: &[ReplicationSummary],
) -> Result<ComparisonRow> {
    let sigmas: Vec<f64> = reps.iter().map(|r| r.sigma_hat).collect();
    let (sigma_hat, ci) = if reps.len() >= 2 {
        confidence_interval(&sigmas, 0.99)?
    } else {
        (sigmas[0], f64::NAN)
    };
    let sm = mean(reps.iter().map(|r| r.sigma_mean_capacity));
    let sd = mean(reps.iter().map(|r| r.sigma_median_capacity));
    let sb = mean(reps.iter().map(|r| r.sigma_modified));
    let rho_hat = mean_vec(&reps.iter().map(|r| r.rho_hat.clone()).collect::<Vec<_>>());
    let rho = mean_vec(&reps.iter().map(|r| r.rho.clone()).collect::<Vec<_>>());
    let rho_mod = mean_vec(
        &reps
            .iter()
            .map(|r| r.rho_modified.clone())
            .collect::<Vec<_>>(),
    );
    Ok(ComparisonRow {
        case: case.to_string(),
        parameter: parameter.to_string(),
        value,
        replications: reps.len() as u32,
        sigma_hat,
        sigma_hat_ci99: ci,
        sigma_mean_capacity: sm,
        sigma_median_capacity: sd,
        sigma_modified: sb,
        err_mean_capacity: relative_error(sigma_hat, sm)?,
        err_median_capacity: relative_error(sigma_hat, sd)?,
        err_modified: relative_error(sigma_hat, sb)?,
        rho_error: mean_rho_error(&rho_hat, &rho)?,
        rho_error_modified: mean_rho_error(&rho_hat, &rho_mod)?,
        mean_capacity_bps: mean(reps.iter().map(|r| r.capacity.mean_bps)),
        median_capacity_bps: mean(reps.iter().map(|r| r.capacity.median_bps)),
        var_log_c: mean(reps.iter().map(|r| r.capacity.var_log_c)),
        beta_modified: mean(reps.iter().map(|r| r.beta_modified)),
    })
}

/// Runs `cfg.run.replications` seeded replications in parallel; results come
/// back in replication order.
pub fn run_replications(cfg: &ScenarioConfig) -> Result<Vec<ReplicationSummary>> {
    cfg.validate()?;
    let grid = Grid::new(cfg.network.isd_m)?;
    (0..cfg.run.replications)
        .into_par_iter()
        .map(|r| run_replication(cfg, &grid, replication_seed(cfg.run.seed, r)))
        .collect()
}

/// Sweeps `case` over `values` (its default grid when `None`).
pub fn run_sweep(
    case: Case,
    base: &ScenarioConfig,
    values: Option<&[f64]>,
) -> Result<Vec<ComparisonRow>> {
    let values = values.map_or_else(|| case.grid(), <[f64]>::to_vec);
    let configs = values
        .iter()
        .map(|&v| case.apply(base, v))
        .collect::<Result<Vec<_>>>()?;
    let grid = Grid::new(base.network.isd_m)?;
    let jobs: Vec<(usize, u32)> = (0..values.len())
        .flat_map(|p| (0..base.run.replications).map(move |r| (p, r)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(p, r)| run_replication(&configs[p], &grid, replication_seed(base.run.seed, r)))
        .collect::<Result<Vec<_>>>()?;
    let per_point = base.run.replications as usize;
    values
        .iter()
        .enumerate()
        .map(|(p, &v)| {
            compare(
                &case.to_string(),
                case.parameter(),
                v,
                &results[p * per_point..(p + 1) * per_point],
            )
        })
        .collect()
}

/// Default sweep for `case`.
pub fn run_case(case: Case, base: &ScenarioConfig) -> Result<Vec<ComparisonRow>> {
    run_sweep(case, base, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::UnknownFormat(s.to_string())),
        }
    }
}

const ROW_HEADER: [&str; 18] = [
    "case",
    "parameter",
    "value",
    "replications",
    "sigma_hat",
    "sigma_hat_ci99",
    "sigma_mean_capacity",
    "sigma_median_capacity",
    "sigma_modified",
    "err_mean_capacity",
    "err_median_capacity",
    "err_modified",
    "rho_error",
    "rho_error_modified",
    "mean_capacity_bps",
    "median_capacity_bps",
    "var_log_c",
    "beta_modified",
];

/// Writes comparison rows; CSV always carries the header.
pub fn emit<W: Write>(rows: &[ComparisonRow], format: Format, mut sink: W) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(sink);
            w.write_record(ROW_HEADER)?;
            for r in rows {
                w.serialize(r)?;
            }
            w.flush().map_err(|e| Error::io("<csv sink>", e))?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut sink, rows)?;
            sink.write_all(b"\n")
                .map_err(|e| Error::io("<json sink>", e))?;
        }
    }
    Ok(())
}

pub fn read_rows<R: Read>(format: Format, source: R) -> Result<Vec<ComparisonRow>> {
    match format {
        Format::Csv => {
            let mut r = csv::Reader::from_reader(source);
            let header = r.headers()?.clone();
            if !header.iter().eq(ROW_HEADER) {
                return Err(Error::Domain(format!(
                    "unexpected comparison header {header:?}"
                )));
            }
            Ok(r.deserialize()
                .collect::<std::result::Result<Vec<_>, _>>()?)
        }
        Format::Json => Ok(serde_json::from_reader(source)?),
    }
}
