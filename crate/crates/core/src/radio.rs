//! Downlink physical layer: sector antenna pattern, log-distance path loss,
//! log-normal shadowing, SINR against the six co-channel sectors and the
//! resulting Shannon capacity.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellId, Grid};
use crate::vec2::Vec2;

/// Coefficients of `PL = distance_coeff·log10(d/m) + intercept_db + frequency_coeff·log10(fc/GHz)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLossModel {
    pub distance_coeff: f64,
    pub intercept_db: f64,
    pub frequency_coeff: f64,
}

impl Default for PathLossModel {
    /// Urban micro-cell, line of sight.
    fn default() -> Self {
        PathLossModel {
            distance_coeff: 22.0,
            intercept_db: 28.0,
            frequency_coeff: 20.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioParams {
    pub tx_power_dbm: f64,
    pub max_gain_db: f64,
    pub beamwidth_3db_rad: f64,
    pub max_attenuation_db: f64,
    pub bandwidth_hz: f64,
    pub carrier_hz: f64,
    pub noise_density_dbm_hz: f64,
    pub shadow_sigma_db: f64,
    pub min_distance_m: f64,
    pub path_loss: PathLossModel,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            tx_power_dbm: 41.0,
            max_gain_db: 17.0,
            beamwidth_3db_rad: 70.0 * PI / 180.0,
            max_attenuation_db: 20.0,
            bandwidth_hz: 10e6,
            carrier_hz: 2.5e9,
            noise_density_dbm_hz: -174.0,
            shadow_sigma_db: 4.0,
            min_distance_m: 10.0,
            path_loss: PathLossModel::default(),
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tx_power_dbm", self.tx_power_dbm),
            ("max_gain_db", self.max_gain_db),
            ("beamwidth_3db_rad", self.beamwidth_3db_rad),
            ("max_attenuation_db", self.max_attenuation_db),
            ("bandwidth_hz", self.bandwidth_hz),
            ("carrier_hz", self.carrier_hz),
            ("min_distance_m", self.min_distance_m),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "radio.{name} must be positive, got {v}"
                )));
            }
        }
        if !self.noise_density_dbm_hz.is_finite() {
            return Err(Error::InvalidConfig(
                "radio.noise_density_dbm_hz must be finite".into(),
            ));
        }
        if !(self.shadow_sigma_db.is_finite() && self.shadow_sigma_db >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "radio.shadow_sigma_db must be >= 0, got {}",
                self.shadow_sigma_db
            )));
        }
        Ok(())
    }

    /// Thermal noise power over the whole band (dBm).
    pub fn noise_dbm(&self) -> f64 {
        self.noise_density_dbm_hz + 10.0 * self.bandwidth_hz.log10()
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Sector gain (dB) at `theta` radians off boresight.
pub fn antenna_gain(theta: f64, params: &RadioParams) -> f64 {
    let off = theta.rem_euclid(2.0 * PI);
    let off = if off > PI { 2.0 * PI - off } else { off };
    let ratio = off / params.beamwidth_3db_rad;
    params.max_gain_db - (12.0 * ratio * ratio).min(params.max_attenuation_db)
}

/// Path loss (dB) at distance `d` meters, clamped below at the minimum distance.
pub fn path_loss(d: f64, params: &RadioParams) -> f64 {
    let d = d.max(params.min_distance_m);
    let m = &params.path_loss;
    m.distance_coeff * d.log10()
        + m.intercept_db
        + m.frequency_coeff * (params.carrier_hz / 1e9).log10()
}

/// `bw · log2(1 + sinr)` in bps, `sinr` linear.
pub fn shannon_capacity(bandwidth_hz: f64, sinr: f64) -> f64 {
    bandwidth_hz * sinr.ln_1p() / std::f64::consts::LN_2
}

/// Shadowing samples (dB) for the serving link followed by the six interferers.
pub type LinkShadowing = [f64; 7];

/// Received power (dBm) at `p` from the sector serving `cell`.
fn received_dbm(p: Vec2, cell: CellId, grid: &Grid, params: &RadioParams, shadow_db: f64) -> f64 {
    let geom = grid.cell(cell);
    let v = grid.wrapped_displacement(geom.bs_position, p);
    let theta = v.angle() - geom.sector_boresight;
    params.tx_power_dbm + antenna_gain(theta, params) - path_loss(v.norm(), params) - shadow_db
}

/// Linear SINR at `p` inside `cell` for given per-link shadowing.
pub fn sinr(
    p: Vec2,
    cell: CellId,
    grid: &Grid,
    params: &RadioParams,
    shadowing: &LinkShadowing,
) -> f64 {
    let signal = db_to_linear(received_dbm(p, cell, grid, params, shadowing[0]));
    let interference: f64 = grid
        .cell(cell)
        .cochannel_neighbors
        .iter()
        .zip(&shadowing[1..])
        .map(|(&k, &s)| db_to_linear(received_dbm(p, k, grid, params, s)))
        .sum();
    signal / (db_to_linear(params.noise_dbm()) + interference)
}

fn draw_shadowing<R: Rng + ?Sized>(params: &RadioParams, rng: &mut R) -> LinkShadowing {
    if params.shadow_sigma_db == 0.0 {
        return [0.0; 7];
    }
    let normal = Normal::new(0.0, params.shadow_sigma_db).expect("sigma validated");
    std::array::from_fn(|_| normal.sample(rng))
}

/// One capacity measurement (bps) at `p`, with fresh shadowing on every link.
pub fn capacity_at<R: Rng + ?Sized>(
    p: Vec2,
    cell: CellId,
    grid: &Grid,
    params: &RadioParams,
    rng: &mut R,
) -> f64 {
    let shadowing = draw_shadowing(params, rng);
    shannon_capacity(params.bandwidth_hz, sinr(p, cell, grid, params, &shadowing))
}

/// Source of capacity measurements for the simulator.
pub trait CapacityModel: Send + Sync {
    fn measure<R: Rng + ?Sized>(&self, grid: &Grid, cell: CellId, p: Vec2, rng: &mut R) -> f64;
}

/// Shannon capacity under the full radio model.
#[derive(Debug, Clone)]
pub struct ShannonCapacity {
    pub params: RadioParams,
}

impl ShannonCapacity {
    pub fn new(params: RadioParams) -> Result<Self> {
        params.validate()?;
        Ok(ShannonCapacity { params })
    }
}

impl CapacityModel for ShannonCapacity {
    fn measure<R: Rng + ?Sized>(&self, grid: &Grid, cell: CellId, p: Vec2, rng: &mut R) -> f64 {
        capacity_at(p, cell, grid, &self.params, rng)
    }
}

/// Position-independent capacity; used for degenerate and oracle runs.
#[derive(Debug, Clone, Copy)]
pub struct ConstantCapacity(pub f64);

impl CapacityModel for ConstantCapacity {
    fn measure<R: Rng + ?Sized>(&self, _: &Grid, _: CellId, _: Vec2, _: &mut R) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityStats {
    pub mean_bps: f64,
    pub median_bps: f64,
    /// Sample variance of the natural log of capacity.
    pub var_log_c: f64,
    pub sample_count: u64,
}

impl CapacityStats {
    /// Exact statistics of a sample set (reorders `samples`).
    pub fn from_samples(samples: &mut [f64]) -> Result<Self> {
        let n = samples.len();
        if n < 2 {
            return Err(Error::InsufficientData { needed: 2, got: n });
        }
        if let Some(bad) = samples.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(Error::Domain(format!(
                "capacity sample must be positive, got {bad}"
            )));
        }
        let nf = n as f64;
        let mean = samples.iter().sum::<f64>() / nf;
        // logs shifted by the first sample so identical samples give exactly 0
        let pivot = samples[0].ln();
        let shifted_mean = samples.iter().map(|c| c.ln() - pivot).sum::<f64>() / nf;
        let var_log = samples
            .iter()
            .map(|c| (c.ln() - pivot - shifted_mean).powi(2))
            .sum::<f64>()
            / (nf - 1.0);
        samples.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            samples[n / 2]
        } else {
            0.5 * (samples[n / 2 - 1] + samples[n / 2])
        };
        Ok(CapacityStats {
            mean_bps: mean,
            median_bps: median,
            var_log_c: var_log,
            sample_count: n as u64,
        })
    }
}

/// Monte-Carlo capacity statistics of `cell` from `n_samples` measurements at
/// uniformly distributed positions.
pub fn estimate_capacity_stats<R: Rng + ?Sized>(
    cell: CellId,
    grid: &Grid,
    model: &impl CapacityModel,
    n_samples: usize,
    rng: &mut R,
) -> Result<CapacityStats> {
    if n_samples < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: n_samples,
        });
    }
    let mut samples: Vec<f64> = (0..n_samples)
        .map(|_| {
            let p = grid.sample_in_cell(cell, rng);
            model.measure(grid, cell, p, rng)
        })
        .collect();
    CapacityStats::from_samples(&mut samples)
}

const LOG_BIN_WIDTH: f64 = 1e-3;
const LOG_MIN: f64 = 0.0;
const LOG_MAX: f64 = 32.0;
const LOG_BINS: usize = ((LOG_MAX - LOG_MIN) / LOG_BIN_WIDTH) as usize;

/// Streaming capacity statistics: exact mean and log-variance (Welford),
/// median from a histogram of `ln c` with 1e-3 bins, clamped to the observed
/// range.
#[derive(Debug, Clone)]
pub struct CapacityAccumulator {
    count: u64,
    mean: f64,
    mean_log: f64,
    m2_log: f64,
    min: f64,
    max: f64,
    bins: Vec<u32>,
}

impl Default for CapacityAccumulator {
    fn default() -> Self {
        CapacityAccumulator {
            count: 0,
            mean: 0.0,
            mean_log: 0.0,
            m2_log: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            bins: Vec::new(),
        }
    }
}

impl CapacityAccumulator {
    pub fn push(&mut self, c: f64) {
        debug_assert!(c > 0.0);
        if self.bins.is_empty() {
            self.bins = vec![0; LOG_BINS];
        }
        self.count += 1;
        let n = self.count as f64;
        self.mean += (c - self.mean) / n;
        let l = c.ln();
        let delta = l - self.mean_log;
        self.mean_log += delta / n;
        self.m2_log += delta * (l - self.mean_log);
        self.min = self.min.min(c);
        self.max = self.max.max(c);
        let b = (((l - LOG_MIN) / LOG_BIN_WIDTH).floor().max(0.0) as usize).min(LOG_BINS - 1);
        self.bins[b] += 1;
    }

    pub fn merge(&mut self, other: &CapacityAccumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta = other.mean_log - self.mean_log;
        self.m2_log += other.m2_log + delta * delta * na * nb / n;
        self.mean_log += delta * nb / n;
        self.mean += (other.mean - self.mean) * nb / n;
        self.count += other.count;
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
        for (a, b) in self.bins.iter_mut().zip(&other.bins) {
            *a += *b;
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn stats(&self) -> Result<CapacityStats> {
        if self.count < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: self.count as usize,
            });
        }
        let half = self.count as f64 / 2.0;
        let mut cum = 0.0;
        let mut median_log = self.mean_log;
        for (i, &b) in self.bins.iter().enumerate() {
            let next = cum + b as f64;
            if next >= half && b > 0 {
                let frac = (half - cum) / b as f64;
                median_log = LOG_MIN + (i as f64 + frac) * LOG_BIN_WIDTH;
                break;
            }
            cum = next;
        }
        Ok(CapacityStats {
            mean_bps: self.mean,
            median_bps: median_log.exp().clamp(self.min, self.max),
            var_log_c: (self.m2_log / (self.count as f64 - 1.0)).max(0.0),
            sample_count: self.count,
        })
    }
}
