use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::profile::KyberVariant;
use crate::correction::{Latencies, Policy, Thresholds, Weights};
use crate::error::{Error, Result};
use crate::injector::{encode_pattern, Persistence, StuckMode, TrojanProfile, PATTERN_MAX};
use crate::masking::MaskMode;
use crate::monitors::MonitorConfig;

/// Which polarities a campaign draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum StuckSelection {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
    #[default]
    #[serde(rename = "both")]
    Both,
}

impl StuckSelection {
    pub fn modes(self) -> &'static [StuckMode] {
        match self {
            StuckSelection::Zero => &[StuckMode::StuckAt0],
            StuckSelection::One => &[StuckMode::StuckAt1],
            StuckSelection::Both => &StuckMode::BOTH,
        }
    }
}

impl FromStr for StuckSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "0" => Ok(StuckSelection::Zero),
            "1" => Ok(StuckSelection::One),
            "both" => Ok(StuckSelection::Both),
            other => Err(Error::config(
                "injection.stuck",
                format!("`{other}` is not 0, 1 or both"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Thresholds 256/512.
    Fidelity,
    /// Thresholds 8/16.
    Scaled,
}

impl Preset {
    pub fn thresholds(self) -> Thresholds {
        match self {
            Preset::Fidelity => Thresholds::fidelity(),
            Preset::Scaled => Thresholds::scaled(),
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fidelity" => Ok(Preset::Fidelity),
            "scaled" => Ok(Preset::Scaled),
            other => Err(Error::config(
                "preset",
                format!("`{other}` is not fidelity or scaled"),
            )),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Fidelity => "fidelity",
            Preset::Scaled => "scaled",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Injection {
    pub stuck: StuckSelection,
    pub persistence: Persistence,
    /// Probability that a run is attacked.
    pub rate: f64,
    /// Externally supplied `(R_t, R_s)` pairs, used in order and cycled.
    /// Empty means draw from the campaign generator.
    pub pairs: Vec<(u32, u32)>,
}

impl Default for Injection {
    fn default() -> Self {
        Injection {
            stuck: StuckSelection::Both,
            persistence: Persistence::SingleCycle,
            rate: 1.0,
            pairs: Vec::new(),
        }
    }
}

/// A Trojan bound to one slot's bitstream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotTrojan {
    pub slot: usize,
    pub r_s: u32,
    pub mode: StuckMode,
    #[serde(default)]
    pub at_cycle: Option<u64>,
}

impl SlotTrojan {
    pub fn profile(&self) -> Result<TrojanProfile> {
        Ok(TrojanProfile {
            f_r: encode_pattern(self.r_s)?,
            mode: self.mode,
            at_cycle: self.at_cycle,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub variants: Vec<KyberVariant>,
    pub samples: u64,
    pub seed: u64,
    /// Number of reconfiguration slots.
    pub m: usize,
    pub thresholds: Thresholds,
    pub weights: Weights,
    pub latencies: Latencies,
    pub injection: Injection,
    pub masking: MaskMode,
    pub strict_ccc: bool,
    pub max_corrections: usize,
    pub trojan_profiles: Vec<SlotTrojan>,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            variants: vec![KyberVariant::Kyber512],
            samples: 64,
            seed: 0,
            m: 4,
            thresholds: Thresholds::fidelity(),
            weights: Weights::default(),
            latencies: Latencies::default(),
            injection: Injection::default(),
            masking: MaskMode::PerWrite,
            strict_ccc: false,
            max_corrections: Policy::default().max_corrections,
            trojan_profiles: Vec::new(),
        }
    }
}

impl CampaignConfig {
    pub fn with_preset(preset: Preset) -> Self {
        CampaignConfig {
            thresholds: preset.thresholds(),
            ..CampaignConfig::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: CampaignConfig =
            serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.variants.is_empty() {
            return Err(Error::config(
                "variants",
                "at least one variant is required",
            ));
        }
        if self.samples == 0 {
            return Err(Error::config("samples", "must be at least 1"));
        }
        if self.m == 0 {
            return Err(Error::config("m", "must be at least 1"));
        }
        if self.max_corrections == 0 {
            return Err(Error::config("max_corrections", "must be at least 1"));
        }
        if self.latencies.cycle_ns == 0 {
            return Err(Error::config("latencies.cycle_ns", "must be positive"));
        }
        self.thresholds.validate()?;
        self.weights.validate()?;
        let rate = self.injection.rate;
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::config(
                "injection.rate",
                format!("{rate} is not in [0, 1]"),
            ));
        }
        for (i, &(r_t, r_s)) in self.injection.pairs.iter().enumerate() {
            if r_t > PATTERN_MAX || r_s > PATTERN_MAX {
                return Err(Error::config(
                    format!("injection.pairs[{i}]"),
                    format!("({r_t}, {r_s}) does not fit in 10 bits"),
                ));
            }
        }
        for (i, t) in self.trojan_profiles.iter().enumerate() {
            if t.slot >= self.m {
                return Err(Error::config(
                    format!("trojan_profiles[{i}].slot"),
                    format!("slot {} does not exist with m = {}", t.slot, self.m),
                ));
            }
            if t.r_s > PATTERN_MAX {
                return Err(Error::config(
                    format!("trojan_profiles[{i}].r_s"),
                    "does not fit in 10 bits",
                ));
            }
        }
        Ok(())
    }

    pub fn policy(&self) -> Policy {
        Policy {
            thresholds: self.thresholds,
            latencies: self.latencies,
            max_corrections: self.max_corrections,
        }
    }

    pub fn monitors(&self) -> MonitorConfig {
        MonitorConfig {
            strict_ccc: self.strict_ccc,
            ..MonitorConfig::default()
        }
    }
}
