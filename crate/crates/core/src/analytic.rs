//! Equilibrium subscription indicators of the logit model.
//!
//! The subscription ratio `σ` solves
//! `σ = γ^β · Σω^β / (Σω)^β · (1 − σ)^(1−β)` and the per-NST fractions
//! `ρ_i = ω_i^β / Σω^β` depend on the weights alone.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::CellId;
use crate::logit::{ChoiceParams, SliceWeights};
use crate::radio::CapacityStats;

/// `μ / (μ + ν)`.
pub fn beta(mu: f64, nu: f64) -> f64 {
    mu / (mu + nu)
}

/// Gumbel scale once capacity fluctuations are folded into the unobserved
/// utility.
pub fn modified_nu(mu: f64, nu: f64, var_log_c: f64) -> f64 {
    let k = mu * nu / std::f64::consts::PI;
    nu / (1.0 + 6.0 * k * k * var_log_c).sqrt()
}

/// Sensitivity with the capacity variance folded into the unobserved utility.
pub fn modified_beta(mu: f64, nu: f64, var_log_c: f64) -> f64 {
    beta(mu, modified_nu(mu, nu, var_log_c))
}

/// Logarithm in which the capacity variance is expressed when it enters the
/// modified model. `CapacityStats::var_log_c` is always natural-log; the
/// reference modified-model values are reproduced with base 10.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceLog {
    Natural,
    #[default]
    Decimal,
}

impl VarianceLog {
    /// Converts a variance of `ln c` into this base.
    pub fn convert(self, var_ln: f64) -> f64 {
        match self {
            VarianceLog::Natural => var_ln,
            VarianceLog::Decimal => var_ln / (std::f64::consts::LN_10 * std::f64::consts::LN_10),
        }
    }
}

/// Normalized capacity `c / (n·p·r0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NormalizedCapacity {
    Finite(f64),
    /// `r0 = 0`: every user subscribes.
    Unbounded,
}

impl NormalizedCapacity {
    pub fn value(self) -> Option<f64> {
        match self {
            NormalizedCapacity::Finite(g) => Some(g),
            NormalizedCapacity::Unbounded => None,
        }
    }
}

pub fn normalized_capacity(
    c_bps: f64,
    n_users: f64,
    price: f64,
    r0_bps: f64,
) -> Result<NormalizedCapacity> {
    for (name, v) in [
        ("capacity", c_bps),
        ("user count", n_users),
        ("price", price),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Domain(format!("{name} must be positive, got {v}")));
        }
    }
    if r0_bps == 0.0 {
        return Ok(NormalizedCapacity::Unbounded);
    }
    if !(r0_bps.is_finite() && r0_bps > 0.0) {
        return Err(Error::Domain(format!("r0 must be >= 0, got {r0_bps}")));
    }
    Ok(NormalizedCapacity::Finite(
        c_bps / (n_users * price * r0_bps),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticInputs {
    pub weights: SliceWeights,
    pub beta: f64,
    pub gamma: NormalizedCapacity,
}

/// Root of the subscription-ratio equation. `complement` is `1 − σ` carried
/// separately: for large `γ` it underflows the spacing of doubles near 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaSolution {
    pub sigma: f64,
    pub complement: f64,
}

impl SigmaSolution {
    /// Equation residual `σ − K (1−σ)^(1−β)`.
    pub fn residual(&self, inputs: &AnalyticInputs) -> f64 {
        match inputs.gamma {
            NormalizedCapacity::Unbounded => 0.0,
            NormalizedCapacity::Finite(g) => {
                self.sigma
                    - sigma_coefficient(g, &inputs.weights, inputs.beta)
                        * self.complement.powf(1.0 - inputs.beta)
            }
        }
    }
}

/// `γ^β · Σω^β / (Σω)^β`.
pub fn sigma_coefficient(gamma: f64, weights: &SliceWeights, beta: f64) -> f64 {
    let w = weights.as_slice();
    let num: f64 = w.iter().map(|x| x.powf(beta)).sum();
    gamma.powf(beta) * num / weights.total().powf(beta)
}

fn check_inputs(inputs: &AnalyticInputs) -> Result<()> {
    if !(inputs.beta > 0.0 && inputs.beta < 1.0) {
        return Err(Error::Domain(format!(
            "beta must lie in (0, 1), got {}",
            inputs.beta
        )));
    }
    if let NormalizedCapacity::Finite(g) = inputs.gamma {
        if !(g.is_finite() && g > 0.0) {
            return Err(Error::Domain(format!(
                "normalized capacity must be positive, got {g}"
            )));
        }
    }
    Ok(())
}

/// Solves for `σ` by bisection on `y = ln(1 − σ)`, where the equation reads
/// `1 − e^y = K e^{(1−β) y}`: the left side falls from 1 to 0 and the right
/// side rises from 0 to `K` over `y ∈ (−∞, 0]`, so the bracket always holds.
pub fn solve_sigma_detailed(inputs: &AnalyticInputs) -> Result<SigmaSolution> {
    check_inputs(inputs)?;
    let gamma = match inputs.gamma {
        NormalizedCapacity::Unbounded => {
            return Ok(SigmaSolution {
                sigma: 1.0,
                complement: 0.0,
            })
        }
        NormalizedCapacity::Finite(g) => g,
    };
    let k = sigma_coefficient(gamma, &inputs.weights, inputs.beta);
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::Domain(format!(
            "non-finite equation coefficient {k}"
        )));
    }
    let a = 1.0 - inputs.beta;
    let g = |y: f64| -y.exp_m1() - k * (a * y).exp();
    // g(lo) > 0 down to the smallest normal exponent; g(0) = -k < 0
    let (mut lo, mut hi) = (-700.0f64, 0.0f64);
    debug_assert!(g(lo) > 0.0);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let y = if g(lo).abs() <= g(hi).abs() { lo } else { hi };
    Ok(SigmaSolution {
        // the root is below 1 even when 1 − σ is under half an ulp of 1
        sigma: (-y.exp_m1()).min(1.0 - f64::EPSILON / 2.0),
        complement: y.exp(),
    })
}

pub fn solve_sigma(inputs: &AnalyticInputs) -> Result<f64> {
    solve_sigma_detailed(inputs).map(|s| s.sigma)
}

/// Fractions of subscribers per NST, `ω_i^β / Σ ω_t^β`.
pub fn rho(weights: &SliceWeights, beta: f64) -> Vec<f64> {
    let pw: Vec<f64> = weights.as_slice().iter().map(|w| w.powf(beta)).collect();
    let total: f64 = pw.iter().sum();
    pw.into_iter().map(|x| x / total).collect()
}

/// Proportional-share allocation of `capacity_bps` among NSTs.
pub fn allocate(weights: &SliceWeights, capacity_bps: f64) -> Vec<f64> {
    let total = weights.total();
    weights
        .as_slice()
        .iter()
        .map(|w| w / total * capacity_bps)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    MeanCapacity,
    MedianCapacity,
    ModifiedBeta,
    Simulated,
}

impl Variant {
    pub const ANALYTIC: [Variant; 3] = [
        Variant::MeanCapacity,
        Variant::MedianCapacity,
        Variant::ModifiedBeta,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::MeanCapacity => "mean-capacity",
            Variant::MedianCapacity => "median-capacity",
            Variant::ModifiedBeta => "modified-beta",
            Variant::Simulated => "simulated",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean-capacity" => Ok(Variant::MeanCapacity),
            "median-capacity" => Ok(Variant::MedianCapacity),
            "modified-beta" => Ok(Variant::ModifiedBeta),
            "simulated" => Ok(Variant::Simulated),
            other => Err(Error::Domain(format!(
                "unknown indicator variant {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellIndicators {
    pub cell: CellId,
    pub sigma: f64,
    pub rho: Vec<f64>,
    pub beta_used: f64,
    /// `None` on the `r0 = 0` branch and for simulated sets.
    pub gamma_used: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorSet {
    pub variant: Variant,
    pub cells: Vec<CellIndicators>,
}

impl IndicatorSet {
    pub fn mean_sigma(&self) -> f64 {
        self.cells.iter().map(|c| c.sigma).sum::<f64>() / self.cells.len() as f64
    }

    pub fn mean_rho(&self) -> Vec<f64> {
        let s = self.cells.first().map_or(0, |c| c.rho.len());
        let mut out = vec![0.0; s];
        for c in &self.cells {
            for (o, r) in out.iter_mut().zip(&c.rho) {
                *o += r;
            }
        }
        let n = self.cells.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
        out
    }
}

/// Analytic indicators for every cell. `stats`, `n_hat` and `weights` are
/// indexed by cell index; `None` statistics are rejected.
pub fn compute_indicators(
    stats: &[Option<CapacityStats>],
    n_hat: &[f64],
    weights: &[SliceWeights],
    params: &ChoiceParams,
    variant: Variant,
    variance_log: VarianceLog,
) -> Result<IndicatorSet> {
    if variant == Variant::Simulated {
        return Err(Error::Domain(
            "simulated indicators are produced by the simulator".into(),
        ));
    }
    if stats.len() != n_hat.len() || stats.len() != weights.len() {
        return Err(Error::Domain(format!(
            "per-cell inputs disagree in length: {} stats, {} counts, {} weight sets",
            stats.len(),
            n_hat.len(),
            weights.len()
        )));
    }
    let base_beta = beta(params.mu, params.nu);
    let cells = stats
        .iter()
        .enumerate()
        .map(|(idx, s)| {
            let cell = CellId::from_index(idx);
            let s = s.ok_or(Error::MissingCellStats(cell))?;
            let (c, b) = match variant {
                Variant::MeanCapacity => (s.mean_bps, base_beta),
                Variant::MedianCapacity => (s.median_bps, base_beta),
                Variant::ModifiedBeta => (
                    s.mean_bps,
                    modified_beta(params.mu, params.nu, variance_log.convert(s.var_log_c)),
                ),
                Variant::Simulated => unreachable!(),
            };
            let gamma = normalized_capacity(c, n_hat[idx], params.price, params.r0_bps)?;
            let inputs = AnalyticInputs {
                weights: weights[idx].clone(),
                beta: b,
                gamma,
            };
            Ok(CellIndicators {
                cell,
                sigma: solve_sigma(&inputs)?,
                rho: rho(&weights[idx], b),
                beta_used: b,
                gamma_used: gamma.value(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IndicatorSet { variant, cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(v: &[f64]) -> SliceWeights {
        SliceWeights::new(v.to_vec()).unwrap()
    }

    fn inputs(weights: &[f64], beta: f64, gamma: f64) -> AnalyticInputs {
        AnalyticInputs {
            weights: w(weights),
            beta,
            gamma: NormalizedCapacity::Finite(gamma),
        }
    }

    /// Independent oracle: plain bisection on σ itself.
    fn bisect_sigma(k: f64, beta: f64) -> f64 {
        let f = |s: f64| s - k * (1.0 - s).powf(1.0 - beta);
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn beta_examples() {
        assert!((beta(2.0, 1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(beta(1.5, 1.5), 0.5);
        assert!(beta(1e6, 1e-6) < 1.0);
    }

    #[test]
    fn modified_beta_examples() {
        assert_eq!(modified_beta(2.0, 1.0, 0.0), beta(2.0, 1.0));
        let nu_t = modified_nu(2.0, 1.0, 0.5);
        // 1/sqrt(1 + 6·(2/π)²·0.5)
        assert!((nu_t - 0.671_784).abs() < 1e-6, "{nu_t}");
        assert!((modified_beta(2.0, 1.0, 0.5) - 0.748_564).abs() < 1e-6);
    }

    #[test]
    fn normalized_capacity_examples() {
        assert_eq!(
            normalized_capacity(25e6, 250.0, 1.0, 5e5).unwrap(),
            NormalizedCapacity::Finite(0.2)
        );
        assert_eq!(
            normalized_capacity(5e6, 10.0, 1.0, 5e5).unwrap(),
            NormalizedCapacity::Finite(1.0)
        );
        assert_eq!(
            normalized_capacity(1e7, 10.0, 1.0, 0.0).unwrap(),
            NormalizedCapacity::Unbounded
        );
        assert!(normalized_capacity(0.0, 10.0, 1.0, 1.0).is_err());
        let a = normalized_capacity(1e7, 10.0, 1.0, 5e5)
            .unwrap()
            .value()
            .unwrap();
        let b = normalized_capacity(2e7, 10.0, 1.0, 5e5)
            .unwrap()
            .value()
            .unwrap();
        assert!((b - 2.0 * a).abs() < 1e-12);
    }

    #[test]
    fn sigma_four_equal_weights() {
        // oracle: σ = 4^(1/3)·(1−σ)^(1/3)
        let expected = bisect_sigma(4f64.powf(1.0 / 3.0), 2.0 / 3.0);
        assert!((expected - 0.848).abs() < 5e-4, "{expected}");
        let got = solve_sigma(&inputs(&[1.0; 4], 2.0 / 3.0, 1.0)).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn sigma_limits() {
        let s = solve_sigma(&inputs(&[0.1, 0.9], 2.0 / 3.0, 1e-9)).unwrap();
        assert!(s > 0.0 && s < 1e-5);
        let unbounded = AnalyticInputs {
            weights: w(&[0.1, 0.2]),
            beta: 2.0 / 3.0,
            gamma: NormalizedCapacity::Unbounded,
        };
        assert_eq!(solve_sigma(&unbounded).unwrap(), 1.0);
    }

    #[test]
    fn sigma_rejects_bad_inputs() {
        assert!(solve_sigma(&inputs(&[1.0], 1.0, 1.0)).is_err());
        assert!(solve_sigma(&inputs(&[1.0], 0.5, f64::NAN)).is_err());
        assert!(solve_sigma(&inputs(&[1.0], 0.5, f64::INFINITY)).is_err());
    }

    #[test]
    fn saturated_sigma_keeps_complement() {
        let inp = inputs(&[1.0; 8], 0.95, 1e3);
        let s = solve_sigma_detailed(&inp).unwrap();
        assert!(s.complement > 0.0 && s.complement < 1e-50);
        assert!(s.residual(&inp).abs() < 1e-12);
    }

    #[test]
    fn rho_matches_reference_fractions() {
        // direct evaluation: (1/3)^(2/3) / ((1/3)^(2/3) + (2/3)^(2/3))
        let r = rho(&w(&[1.0 / 3.0, 2.0 / 3.0]), 2.0 / 3.0);
        for (g, e) in r.iter().zip([0.386_49, 0.613_51]) {
            assert!((g - e).abs() < 1e-5);
        }
        let r = rho(&w(&[1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0]), 2.0 / 3.0);
        for (g, e) in r.iter().zip([0.214, 0.340, 0.446]) {
            assert!((g - e).abs() < 5e-4);
        }
        let r = rho(&w(&[0.1, 0.2, 0.3, 0.4]), 2.0 / 3.0);
        for (g, e) in r.iter().zip([0.139, 0.221, 0.289, 0.351]) {
            assert!((g - e).abs() < 5e-4);
        }
        let r = rho(&w(&[0.3; 5]), 0.4);
        assert!(r.iter().all(|x| (x - 0.2).abs() < 1e-15));
    }

    #[test]
    fn allocate_examples() {
        let a = allocate(&w(&[0.1, 0.2, 0.3, 0.4].map(|s| s / 57.0)), 1e7);
        for (g, e) in a.iter().zip([1e6, 2e6, 3e6, 4e6]) {
            assert!((g - e).abs() < 1e-6);
        }
        assert_eq!(allocate(&w(&[0.7]), 3e7), vec![3e7]);
    }

    fn homogeneous(
        stats: CapacityStats,
    ) -> (Vec<Option<CapacityStats>>, Vec<f64>, Vec<SliceWeights>) {
        (
            vec![Some(stats); 57],
            vec![250.0; 57],
            vec![w(&[0.1, 0.2, 0.3, 0.4].map(|s| s / 57.0)); 57],
        )
    }

    #[test]
    fn indicator_variants() {
        let params = ChoiceParams::new(2.0, 1.0, 1.0, 5e5).unwrap();
        let stats = CapacityStats {
            mean_bps: 4e7,
            median_bps: 3.5e7,
            var_log_c: 0.2,
            sample_count: 1000,
        };
        let (s, n, wts) = homogeneous(stats);
        let mean = compute_indicators(
            &s,
            &n,
            &wts,
            &params,
            Variant::MeanCapacity,
            VarianceLog::Natural,
        )
        .unwrap();
        let median = compute_indicators(
            &s,
            &n,
            &wts,
            &params,
            Variant::MedianCapacity,
            VarianceLog::Natural,
        )
        .unwrap();
        let modified = compute_indicators(
            &s,
            &n,
            &wts,
            &params,
            Variant::ModifiedBeta,
            VarianceLog::Natural,
        )
        .unwrap();
        assert_eq!(mean.cells[0].rho, median.cells[0].rho);
        assert!(median.cells[0].sigma < mean.cells[0].sigma);
        assert!(modified.cells[0].beta_used > mean.cells[0].beta_used);
        assert!((mean.cells[0].gamma_used.unwrap() - 0.32).abs() < 1e-12);

        let (s, n, wts) = homogeneous(CapacityStats {
            var_log_c: 0.0,
            ..stats
        });
        let mean = compute_indicators(
            &s,
            &n,
            &wts,
            &params,
            Variant::MeanCapacity,
            VarianceLog::Natural,
        )
        .unwrap();
        let modified = compute_indicators(
            &s,
            &n,
            &wts,
            &params,
            Variant::ModifiedBeta,
            VarianceLog::Natural,
        )
        .unwrap();
        assert_eq!(mean.cells, modified.cells);
    }

    #[test]
    fn missing_stats_name_the_cell() {
        let params = ChoiceParams::new(2.0, 1.0, 1.0, 5e5).unwrap();
        let (mut s, n, wts) = homogeneous(CapacityStats {
            mean_bps: 4e7,
            median_bps: 3.5e7,
            var_log_c: 0.2,
            sample_count: 10,
        });
        s[12] = None;
        let err = compute_indicators(
            &s,
            &n,
            &wts,
            &params,
            Variant::MedianCapacity,
            VarianceLog::Natural,
        )
        .unwrap_err();
        assert!(matches!(err, Error::MissingCellStats(CellId(13))));
        assert!(err.to_string().contains("13"));
    }

    proptest! {
        #[test]
        fn sigma_matches_direct_bisection(
            weights in prop::collection::vec(0.01f64..1.0, 1..8),
            beta in 0.05f64..0.95,
            log_gamma in -3.0f64..1.0,
        ) {
            let inp = inputs(&weights, beta, 10f64.powf(log_gamma));
            let got = solve_sigma(&inp).unwrap();
            let k = sigma_coefficient(10f64.powf(log_gamma), &inp.weights, beta);
            let oracle = bisect_sigma(k, beta);
            prop_assert!((got - oracle).abs() < 1e-9);
            prop_assert!(got > 0.0 && got < 1.0);
        }

        #[test]
        fn rho_scale_invariant_and_ordered(
            weights in prop::collection::vec(0.01f64..1.0, 1..8),
            k in 0.01f64..100.0, beta in 0.05f64..0.95,
        ) {
            let a = rho(&w(&weights), beta);
            let scaled: Vec<f64> = weights.iter().map(|x| x * k).collect();
            let b = rho(&w(&scaled), beta);
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for i in 0..a.len() {
                prop_assert!((a[i] - b[i]).abs() < 1e-12);
                for j in 0..a.len() {
                    if weights[i] < weights[j] {
                        prop_assert!(a[i] < a[j]);
                    }
                }
            }
        }

        #[test]
        fn modified_beta_monotone(v1 in 0.0f64..5.0, dv in 0.0f64..5.0) {
            let b0 = beta(2.0, 1.0);
            let b1 = modified_beta(2.0, 1.0, v1);
            let b2 = modified_beta(2.0, 1.0, v1 + dv);
            prop_assert!(b1 >= b0 - 1e-15);
            prop_assert!(b2 >= b1 - 1e-15);
        }

        #[test]
        fn allocation_conserves_capacity(
            weights in prop::collection::vec(1e-4f64..1.0, 1..10), c in 1e3f64..1e9,
        ) {
            let total: f64 = allocate(&w(&weights), c).iter().sum();
            prop_assert!((total - c).abs() <= 1e-12 * c);
        }
    }
}
