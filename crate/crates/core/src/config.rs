//! Scenario description shared by the simulator and the experiment harness.
//!
//! Defaults reproduce the reference configuration: 57 cells at 200 m ISD,
//! 250 users per cell, four NSTs with shares 0.1..0.4, r0 = 500 kbps,
//! EMA weight 0.1 and a 240 s subscription period.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analytic::VarianceLog;
use crate::error::{Error, Result};
use crate::grid::NUM_CELLS;
use crate::logit::{ChoiceParams, SliceWeights};
use crate::radio::RadioParams;

/// 3 km/h.
pub const WALKING_SPEED_MPS: f64 = 3.0 / 3.6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub isd_m: f64,
    /// Users placed in each cell at start; the long-run mean per cell.
    pub users_per_cell: u32,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            isd_m: 200.0,
            users_per_cell: 250,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MobilityConfig {
    /// Walking speed; 0 freezes every user in place.
    pub speed_mps: f64,
    pub max_pause_s: f64,
    pub max_walk_s: f64,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        MobilityConfig {
            speed_mps: WALKING_SPEED_MPS,
            max_pause_s: 120.0,
            max_walk_s: 120.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubscriptionConfig {
    pub mu: f64,
    pub nu: f64,
    pub price: f64,
    pub r0_bps: f64,
    /// NST shares of the total resources; must sum to 1.
    pub shares: Vec<f64>,
    /// Per-cell NST weights, identical in every cell. Defaults to
    /// `share / number of cells`.
    pub weights: Option<Vec<f64>>,
    pub ema_lambda: f64,
    pub subscription_period_s: f64,
    pub update_period_s: f64,
    pub update_distance_m: f64,
}

impl Default for SubscriptionConfig {
    fn default() -> Self {
        SubscriptionConfig {
            mu: 2.0,
            nu: 1.0,
            price: 1.0,
            r0_bps: 500e3,
            shares: vec![0.1, 0.2, 0.3, 0.4],
            weights: None,
            ema_lambda: 0.1,
            subscription_period_s: 240.0,
            update_period_s: 24.0,
            update_distance_m: 20.0,
        }
    }
}

/// Where the capacity statistics feeding the analytic indicators come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CapacitySource {
    /// Estimates `ĉ_u` used by the users at their subscription decisions.
    SubscriptionTimes,
    /// Fresh measurements at uniformly random positions of each cell.
    RandomLocations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Simulated time including the warm-up.
    pub duration_s: f64,
    /// Estimators ignore everything before this instant; 0 starts them with
    /// the run.
    pub warmup_s: f64,
    pub replications: u32,
    pub seed: u64,
    pub capacity_source: CapacitySource,
    /// Samples per cell when `capacity_source = "random-locations"`.
    pub capacity_samples: usize,
    /// Full count audit every this many events; 0 disables.
    pub audit_interval: u64,
    pub event_log: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            duration_s: 100_000.0,
            warmup_s: 0.0,
            replications: 5,
            seed: 1,
            capacity_source: CapacitySource::SubscriptionTimes,
            capacity_samples: 100_000,
            audit_interval: 0,
            event_log: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticConfig {
    pub variance_log: VarianceLog,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub network: NetworkConfig,
    pub radio: RadioParams,
    pub mobility: MobilityConfig,
    pub subscription: SubscriptionConfig,
    pub run: RunConfig,
    pub analytic: AnalyticConfig,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive, got {v}")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be >= 0, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        positive("network.isd_m", self.network.isd_m)?;
        if self.network.users_per_cell == 0 {
            return Err(invalid("network.users_per_cell must be at least 1"));
        }
        self.radio.validate()?;

        let m = &self.mobility;
        non_negative("mobility.speed_mps", m.speed_mps)?;
        non_negative("mobility.max_pause_s", m.max_pause_s)?;
        positive("mobility.max_walk_s", m.max_walk_s)?;

        let s = &self.subscription;
        self.choice_params()?;
        if s.shares.is_empty() {
            return Err(invalid("subscription.shares needs at least one NST"));
        }
        for &x in &s.shares {
            positive("subscription.shares entry", x)?;
        }
        let total: f64 = s.shares.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!(
                "subscription.shares must sum to 1, got {total}"
            )));
        }
        if let Some(w) = &s.weights {
            if w.len() != s.shares.len() {
                return Err(invalid(format!(
                    "subscription.weights has {} entries for {} NSTs",
                    w.len(),
                    s.shares.len()
                )));
            }
            for (i, (&wi, &si)) in w.iter().zip(&s.shares).enumerate() {
                positive("subscription.weights entry", wi)?;
                // the same weight in every cell must add up to the share
                let spent = wi * NUM_CELLS as f64;
                if (spent - si).abs() > 1e-9 * si.max(1.0) {
                    return Err(invalid(format!(
                        "NST {} spends {spent} over all cells but holds share {si}",
                        i + 1
                    )));
                }
            }
        }
        if !(s.ema_lambda > 0.0 && s.ema_lambda < 1.0) {
            return Err(invalid(format!(
                "subscription.ema_lambda must lie in (0, 1), got {}",
                s.ema_lambda
            )));
        }
        positive(
            "subscription.subscription_period_s",
            s.subscription_period_s,
        )?;
        positive("subscription.update_period_s", s.update_period_s)?;
        positive("subscription.update_distance_m", s.update_distance_m)?;

        let r = &self.run;
        positive("run.duration_s", r.duration_s)?;
        non_negative("run.warmup_s", r.warmup_s)?;
        if r.duration_s <= r.warmup_s {
            return Err(invalid(format!(
                "run.duration_s ({}) must exceed run.warmup_s ({})",
                r.duration_s, r.warmup_s
            )));
        }
        if r.replications == 0 {
            return Err(invalid("run.replications must be at least 1"));
        }
        if r.capacity_source == CapacitySource::RandomLocations && r.capacity_samples < 2 {
            return Err(invalid("run.capacity_samples must be at least 2"));
        }
        Ok(())
    }

    pub fn num_nsts(&self) -> usize {
        self.subscription.shares.len()
    }

    pub fn total_users(&self) -> usize {
        self.network.users_per_cell as usize * NUM_CELLS
    }

    pub fn choice_params(&self) -> Result<ChoiceParams> {
        let s = &self.subscription;
        ChoiceParams::new(s.mu, s.nu, s.price, s.r0_bps)
    }

    /// Per-cell NST weights (identical in all cells).
    pub fn weights(&self) -> Result<SliceWeights> {
        let s = &self.subscription;
        match &s.weights {
            Some(w) => SliceWeights::new(w.clone()),
            None => SliceWeights::new(s.shares.iter().map(|x| x / NUM_CELLS as f64).collect()),
        }
    }

    /// Shares `{1/k, .., n/k}` with `k = n(n+1)/2`.
    pub fn triangular_shares(n: usize) -> Vec<f64> {
        let k = (n * (n + 1) / 2) as f64;
        (1..=n).map(|i| i as f64 / k).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_reference_scenario() {
        let c = ScenarioConfig::default();
        c.validate().unwrap();
        assert_eq!(c.total_users(), 57 * 250);
        let w = c.weights().unwrap();
        assert!((w.as_slice()[3] - 0.4 / 57.0).abs() < 1e-15);
        assert!((c.mobility.speed_mps * 120.0 - 100.0).abs() < 1e-9);
        assert_eq!(
            c.subscription.ema_lambda * c.subscription.subscription_period_s,
            24.0
        );
    }

    #[test]
    fn toml_round_trip() {
        let mut c = ScenarioConfig::default();
        c.subscription.r0_bps = 0.0;
        c.run.capacity_source = CapacitySource::RandomLocations;
        let back = ScenarioConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_documents_fill_defaults() {
        let c = ScenarioConfig::from_toml_str("[network]\nusers_per_cell = 100\n").unwrap();
        assert_eq!(c.network.users_per_cell, 100);
        assert_eq!(c.subscription, SubscriptionConfig::default());
    }

    #[test]
    fn rejects_bad_documents() {
        for doc in [
            "[network]\nuser_per_cell = 3\n",
            "[subscription]\nshares = [0.5, 0.6]\n",
            "[subscription]\nema_lambda = 1.0\n",
            "[subscription]\nshares = [0.5, 0.5]\nweights = [0.1, 0.1]\n",
            "[run]\nduration_s = 10.0\nwarmup_s = 10.0\n",
            "[radio]\nbandwidth_hz = -1.0\n",
            "bogus = 1\n",
        ] {
            assert!(ScenarioConfig::from_toml_str(doc).is_err(), "{doc}");
        }
    }

    #[test]
    fn triangular_shares_sum_to_one() {
        assert_eq!(
            ScenarioConfig::triangular_shares(3),
            vec![1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0]
        );
        for n in 2..=7 {
            let s: f64 = ScenarioConfig::triangular_shares(n).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
