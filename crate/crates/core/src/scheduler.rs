//! Latency-driven feature budgets and progressive channel dropping.

#[allow(unused_imports)] // float methods without std
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::feature::FeatureBlock;
use crate::signal::OfdmConfig;

/// End-to-end latency constraint for one transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LatencyBudget {
    /// Total latency allowed, seconds.
    pub t_max: f64,
    /// Time taken by the preamble, seconds.
    pub t_preamble: f64,
}

impl LatencyBudget {
    pub fn new(t_max: f64, t_preamble: f64) -> Self {
        LatencyBudget { t_max, t_preamble }
    }

    /// Budget whose preamble time comes from the modem's actual preamble.
    pub fn for_config(config: &OfdmConfig, t_max: f64) -> Self {
        LatencyBudget::new(t_max, config.preamble_duration())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_preamble >= 0.0 && self.t_max > self.t_preamble && self.t_max.is_finite()) {
            return Err(Error::InfeasibleBudget {
                t_max: self.t_max,
                t_preamble: self.t_preamble,
            });
        }
        Ok(())
    }

    /// Real feature elements that fit in the payload time, before flooring.
    fn raw_capacity(&self, config: &OfdmConfig) -> f64 {
        2.0 * config.n_data() as f64 * config.bandwidth_hz * (self.t_max - self.t_preamble)
            / config.symbol_len() as f64
    }
}

/// Floor that tolerates the few ulps of error in a product that is
/// mathematically an integer.
fn robust_floor(x: f64) -> f64 {
    let nearest = x.round();
    if (x - nearest).abs() <= 16.0 * f64::EPSILON * x.abs().max(1.0) {
        nearest
    } else {
        x.floor()
    }
}

/// Maximum number of real feature elements transmittable within the budget,
/// `N = floor(2 K_d B (T_max - T_p) / (K + L))`.
pub fn max_feature_length(config: &OfdmConfig, budget: &LatencyBudget) -> Result<usize> {
    config.validate()?;
    budget.validate()?;
    Ok(robust_floor(budget.raw_capacity(config)) as usize)
}

/// Number of leading feature channels of an `H x W x C` tensor that fit in
/// the budget, capped at `C`. Zero means nothing can be sent.
pub fn retained_channels(
    config: &OfdmConfig,
    budget: &LatencyBudget,
    height: usize,
    width: usize,
    channels: usize,
) -> Result<usize> {
    config.validate()?;
    budget.validate()?;
    if height == 0 || width == 0 || channels == 0 {
        return Err(invalid("H, W and C must be at least 1"));
    }
    let fit = robust_floor(budget.raw_capacity(config) / (height * width) as f64) as usize;
    if fit == 0 {
        log::warn!(
            "latency budget of {} s cannot carry a single {height}x{width} channel",
            budget.t_max
        );
    }
    Ok(fit.min(channels))
}

/// Keeps the first `keep` channels.
pub fn drop_channels(block: &FeatureBlock, keep: usize) -> Result<FeatureBlock> {
    if keep > block.channels() {
        return Err(invalid(alloc::format!(
            "cannot keep {keep} of {} channels",
            block.channels()
        )));
    }
    let n = keep * block.plane_len();
    FeatureBlock::from_channel_major(block.height(), block.width(), keep, block.as_slice()[..n].to_vec())
}

/// Pads a block with all-zero trailing channels up to `channels`.
pub fn zero_fill(block: &FeatureBlock, channels: usize) -> Result<FeatureBlock> {
    if block.channels() > channels {
        return Err(invalid(alloc::format!(
            "block already has {} channels, more than {channels}",
            block.channels()
        )));
    }
    let mut data = block.as_slice().to_vec();
    data.resize(channels * block.plane_len(), 0.0);
    FeatureBlock::from_channel_major(block.height(), block.width(), channels, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feature::{generate_features, FeatureSpec};

    fn reference_config() -> OfdmConfig {
        OfdmConfig::wlan_20()
    }

    #[test]
    fn reference_budget() {
        let cfg = reference_config();
        let budget = LatencyBudget::new(3e-3, 0.0);
        assert_eq!(max_feature_length(&cfg, &budget).unwrap(), 36000);
        assert_eq!(retained_channels(&cfg, &budget, 64, 64, 12).unwrap(), 8);
    }

    #[test]
    fn infeasible_budget() {
        let cfg = reference_config();
        let budget = LatencyBudget::new(1e-3, 1e-3);
        assert!(matches!(
            max_feature_length(&cfg, &budget),
            Err(Error::InfeasibleBudget { .. })
        ));
        assert!(retained_channels(&cfg, &budget, 4, 4, 4).is_err());
    }

    #[test]
    fn bandwidth_scales_capacity() {
        let mut cfg = reference_config();
        let budget = LatencyBudget::new(1.234e-3, 0.1e-3);
        let n1 = budget.raw_capacity(&cfg);
        cfg.bandwidth_hz *= 2.0;
        assert!((budget.raw_capacity(&cfg) - 2.0 * n1).abs() < 1e-9 * n1);
    }

    #[test]
    fn cap_and_zero() {
        let cfg = reference_config();
        assert_eq!(retained_channels(&cfg, &LatencyBudget::new(1.0, 0.0), 8, 8, 16).unwrap(), 16);
        assert_eq!(retained_channels(&cfg, &LatencyBudget::new(1e-5, 0.0), 64, 64, 16).unwrap(), 0);
    }

    #[test]
    fn preamble_budget_uses_config() {
        let cfg = reference_config();
        let budget = LatencyBudget::for_config(&cfg, 3e-3);
        // two preamble symbols of 8 us each
        assert_eq!(max_feature_length(&cfg, &budget).unwrap(), 36000 - 2 * 96);
    }

    #[test]
    fn drop_and_fill() {
        let spec = FeatureSpec { height: 4, width: 3, channels: 12, rho: 0.5, sigma: 0.5 };
        let b = generate_features(&spec, 1).unwrap();
        assert_eq!(drop_channels(&b, 12).unwrap(), b);
        assert_eq!(zero_fill(&drop_channels(&b, 12).unwrap(), 12).unwrap(), b);
        let empty = drop_channels(&b, 0).unwrap();
        assert_eq!(empty.channels(), 0);
        assert!(empty.is_empty());

        let kept = drop_channels(&b, 8).unwrap();
        for c in 0..8 {
            assert_eq!(kept.channel(c), b.channel(c));
        }
        let filled = zero_fill(&kept, 12).unwrap();
        for c in 8..12 {
            assert!(filled.channel(c).iter().all(|&v| v == 0.0));
        }
        assert_eq!(filled.energy(), kept.energy());

        assert!(drop_channels(&b, 13).is_err());
        assert!(zero_fill(&b, 11).is_err());
    }
}
