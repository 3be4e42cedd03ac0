//! Multinomial-logit subscription choice.
//!
//! Options are laid out as `[no subscription, NST 1, .., NST |S|]`; index 0 is
//! always the outside option.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChoiceParams {
    /// Utility sensitivity to `log(rate / price)`.
    pub mu: f64,
    /// Gumbel scale of the unobserved utility.
    pub nu: f64,
    pub price: f64,
    /// Virtual rate of the no-subscription option (bps); its price is 1.
    pub r0_bps: f64,
}

impl ChoiceParams {
    pub fn new(mu: f64, nu: f64, price: f64, r0_bps: f64) -> Result<Self> {
        let p = ChoiceParams {
            mu,
            nu,
            price,
            r0_bps,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("mu", self.mu), ("nu", self.nu), ("price", self.price)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.r0_bps.is_finite() && self.r0_bps >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "r0 must be >= 0, got {}",
                self.r0_bps
            )));
        }
        Ok(())
    }

    /// Exponent `mu / nu` of the closed-form choice law.
    pub fn elasticity(&self) -> f64 {
        self.mu / self.nu
    }
}

/// Per-NST weights `ω_i` at one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SliceWeights(Vec<f64>);

impl SliceWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one NST weight is required".into(),
            ));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "NST weights must be positive, got {w}"
            )));
        }
        Ok(SliceWeights(weights))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// `ω_i / Σ_t ω_t`.
    pub fn fraction(&self, nst: usize) -> f64 {
        self.0[nst] / self.total()
    }
}

impl TryFrom<Vec<f64>> for SliceWeights {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        SliceWeights::new(v)
    }
}

impl From<SliceWeights> for Vec<f64> {
    fn from(w: SliceWeights) -> Self {
        w.0
    }
}

/// `μ·ln(rate / price)`.
pub fn observed_utility(rate_bps: f64, params: &ChoiceParams) -> Result<f64> {
    if rate_bps.is_nan() || rate_bps <= 0.0 {
        return Err(Error::Domain(format!(
            "rate must be positive, got {rate_bps}"
        )));
    }
    Ok(params.mu * (rate_bps / params.price).ln())
}

/// Utility of not subscribing, `μ·ln(r0)`; `-inf` when `r0 = 0`.
pub fn outside_utility(params: &ChoiceParams) -> f64 {
    if params.r0_bps == 0.0 {
        f64::NEG_INFINITY
    } else {
        params.mu * params.r0_bps.ln()
    }
}

/// Rate seen by each of `n_subscribers` users of `nst` when the cell offers
/// `capacity_bps`.
pub fn per_user_rate(
    weights: &SliceWeights,
    nst: usize,
    capacity_bps: f64,
    n_subscribers: u32,
) -> f64 {
    assert!(
        n_subscribers >= 1,
        "per-user rate needs at least one subscriber"
    );
    weights.fraction(nst) * capacity_bps / n_subscribers as f64
}

/// Zero-mean Gumbel sample with scale `nu`.
pub fn draw_gumbel<R: Rng + ?Sized>(nu: f64, rng: &mut R) -> f64 {
    // open interval keeps both logs finite
    let u: f64 = loop {
        let u = rng.random::<f64>();
        if u > 0.0 {
            break u;
        }
    };
    -nu * (-u.ln()).ln() - EULER_GAMMA * nu
}

/// Index of the option with the largest total utility; lowest index wins ties.
pub fn choose(observed: &[f64], kappa: &[f64]) -> usize {
    debug_assert_eq!(observed.len(), kappa.len());
    let mut best = 0;
    let mut best_u = f64::NEG_INFINITY;
    for (i, (v, k)) in observed.iter().zip(kappa).enumerate() {
        let u = v + k;
        if u > best_u {
            best_u = u;
            best = i;
        }
    }
    best
}

/// Exponential moving average step with weight `lambda` on the new value.
pub fn ema_update(c_hat: f64, c_last: f64, lambda: f64) -> f64 {
    (1.0 - lambda) * c_hat + lambda * c_last
}

/// Closed-form logit choice probabilities `[P(none), P(NST 1), ..]` for fixed
/// per-NST rates.
pub fn static_choice_probabilities(rates: &[f64], params: &ChoiceParams) -> Result<Vec<f64>> {
    if let Some(r) = rates.iter().find(|r| r.is_nan() || **r <= 0.0) {
        return Err(Error::Domain(format!("rates must be positive, got {r}")));
    }
    let e = params.elasticity();
    // log-domain weights; outside option uses p·r0 against the NST rates
    let mut logs = Vec::with_capacity(rates.len() + 1);
    logs.push(if params.r0_bps == 0.0 {
        f64::NEG_INFINITY
    } else {
        e * (params.price * params.r0_bps).ln()
    });
    logs.extend(rates.iter().map(|r| e * r.ln()));
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn params(mu: f64, nu: f64, r0: f64) -> ChoiceParams {
        ChoiceParams::new(mu, nu, 1.0, r0).unwrap()
    }

    #[test]
    fn utility_examples() {
        let p = params(2.0, 1.0, 1.0);
        assert_eq!(observed_utility(1.0, &p).unwrap(), 0.0);
        assert!((observed_utility(std::f64::consts::E, &p).unwrap() - 2.0).abs() < 1e-12);
        assert!(observed_utility(0.0, &p).is_err());
        assert!(observed_utility(-1.0, &p).is_err());
        let p = params(2.0, 1.0, 5e5);
        assert!((outside_utility(&p) - 2.0 * 5e5f64.ln()).abs() < 1e-12);
        assert_eq!(outside_utility(&params(2.0, 1.0, 0.0)), f64::NEG_INFINITY);
    }

    #[test]
    fn rate_examples() {
        let w = SliceWeights::new([0.1, 0.2, 0.3, 0.4].map(|s| s / 57.0).to_vec()).unwrap();
        assert!((per_user_rate(&w, 3, 1e7, 100) - 4e4).abs() < 1e-6);
        let single = SliceWeights::new(vec![0.3]).unwrap();
        assert_eq!(per_user_rate(&single, 0, 1e7, 1), 1e7);
        let doubled = SliceWeights::new(w.as_slice().iter().map(|x| 2.0 * x).collect()).unwrap();
        for i in 0..4 {
            assert!(
                (per_user_rate(&w, i, 1e7, 7) - per_user_rate(&doubled, i, 1e7, 7)).abs() < 1e-6
            );
        }
    }

    #[test]
    #[should_panic]
    fn rate_with_zero_subscribers_is_a_bug() {
        let w = SliceWeights::new(vec![1.0]).unwrap();
        per_user_rate(&w, 0, 1e7, 0);
    }

    #[test]
    fn weights_must_be_positive() {
        assert!(SliceWeights::new(vec![]).is_err());
        assert!(SliceWeights::new(vec![0.1, 0.0]).is_err());
        assert!(SliceWeights::new(vec![0.1, -0.2]).is_err());
    }

    #[test]
    fn gumbel_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n).map(|_| draw_gumbel(1.0, &mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let sd = PI / 6f64.sqrt();
        assert!(mean.abs() < 3.0 * sd / 1e3, "mean {mean}");
        // standard error of the variance ≈ σ²·sqrt((κ-1)/n), excess kurtosis 2.4
        let var_se = sd * sd * (4.4f64 / n as f64).sqrt();
        assert!((var - PI * PI / 6.0).abs() < 4.0 * var_se, "var {var}");
    }

    #[test]
    fn gumbel_is_reproducible() {
        let a = draw_gumbel(1.0, &mut ChaCha8Rng::seed_from_u64(9));
        let b = draw_gumbel(1.0, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn choose_examples() {
        assert_eq!(choose(&[1.0, 2.0, 0.5], &[0.0; 3]), 1);
        assert_eq!(choose(&[1.0, 1.0, 0.5], &[0.0; 3]), 0);
        assert_eq!(choose(&[f64::NEG_INFINITY, 0.5], &[3.0, 0.0]), 1);
    }

    #[test]
    fn ema_examples() {
        assert!((ema_update(100.0, 200.0, 0.1) - 110.0).abs() < 1e-12);
        assert_eq!(ema_update(123.0, 123.0, 0.3), 123.0);
        let mut c = 0.0;
        for k in 1..=50 {
            c = ema_update(c, 1.0, 0.1);
            assert!(((1.0 - c) - 0.9f64.powi(k)).abs() < 1e-12);
        }
    }

    #[test]
    fn static_probability_examples() {
        let p = static_choice_probabilities(&[3.0], &params(2.0, 1.0, 0.0)).unwrap();
        assert_eq!(p, vec![0.0, 1.0]);
        let p = static_choice_probabilities(&[5.0, 5.0], &params(2.0, 1.0, 0.0)).unwrap();
        assert!((p[1] - 0.5).abs() < 1e-15 && (p[2] - 0.5).abs() < 1e-15);
        let p = static_choice_probabilities(&[1.0, 2.0], &params(2.0, 1.0, 0.0)).unwrap();
        assert!((p[1] - 0.2).abs() < 1e-12 && (p[2] - 0.8).abs() < 1e-12);
        assert!(static_choice_probabilities(&[1.0, 0.0], &params(2.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn monte_carlo_choices_follow_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let p = params(2.0, 1.0, 4e5);
        let rates = [2e5, 5e5, 7e5];
        let mut observed = vec![outside_utility(&p)];
        observed.extend(rates.iter().map(|&r| observed_utility(r, &p).unwrap()));
        let expected = static_choice_probabilities(&rates, &p).unwrap();
        let n = 100_000;
        let mut hits = [0u32; 4];
        for _ in 0..n {
            let kappa: Vec<f64> = (0..4).map(|_| draw_gumbel(p.nu, &mut rng)).collect();
            hits[choose(&observed, &kappa)] += 1;
        }
        for (h, q) in hits.iter().zip(&expected) {
            let se = (q * (1.0 - q) / n as f64).sqrt();
            assert!(
                (*h as f64 / n as f64 - q).abs() < 3.0 * se,
                "{hits:?} vs {expected:?}"
            );
        }
    }

    proptest! {
        #[test]
        fn probabilities_form_a_simplex(
            rates in prop::collection::vec(1e3f64..1e8, 1..8),
            mu in 0.1f64..5.0, nu in 0.1f64..5.0, r0 in 0.0f64..1e7,
        ) {
            let p = static_choice_probabilities(&rates, &params(mu, nu, r0)).unwrap();
            prop_assert!(p.iter().all(|x| *x >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn common_rate_scaling_keeps_nst_shares(
            rates in prop::collection::vec(1e3f64..1e8, 1..8), k in 0.01f64..100.0,
        ) {
            let p = params(2.0, 1.0, 0.0);
            let a = static_choice_probabilities(&rates, &p).unwrap();
            let scaled: Vec<f64> = rates.iter().map(|r| r * k).collect();
            let b = static_choice_probabilities(&scaled, &p).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn choose_ignores_common_shift(
            v in prop::collection::vec(-10.0f64..10.0, 1..8), shift in -100.0f64..100.0,
        ) {
            let kappa = vec![0.0; v.len()];
            let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
            prop_assert_eq!(choose(&v, &kappa), choose(&shifted, &kappa));
        }
    }
}
