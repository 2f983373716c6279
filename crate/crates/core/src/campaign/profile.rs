use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum KyberVariant {
    Kyber512,
    Kyber768,
    Kyber1024,
}

impl KyberVariant {
    pub const ALL: [KyberVariant; 3] = [
        KyberVariant::Kyber512,
        KyberVariant::Kyber768,
        KyberVariant::Kyber1024,
    ];

    /// Module rank k.
    pub fn rank(self) -> u32 {
        match self {
            KyberVariant::Kyber512 => 2,
            KyberVariant::Kyber768 => 3,
            KyberVariant::Kyber1024 => 4,
        }
    }

    pub fn number(self) -> u32 {
        match self {
            KyberVariant::Kyber512 => 512,
            KyberVariant::Kyber768 => 768,
            KyberVariant::Kyber1024 => 1024,
        }
    }
}

impl TryFrom<u32> for KyberVariant {
    type Error = Error;

    fn try_from(v: u32) -> Result<Self> {
        match v {
            512 => Ok(KyberVariant::Kyber512),
            768 => Ok(KyberVariant::Kyber768),
            1024 => Ok(KyberVariant::Kyber1024),
            other => Err(Error::UnknownVariant(other)),
        }
    }
}

impl From<KyberVariant> for u32 {
    fn from(v: KyberVariant) -> u32 {
        v.number()
    }
}

impl FromStr for KyberVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let t = t
            .strip_prefix("Kyber-")
            .or_else(|| t.strip_prefix("kyber-"))
            .unwrap_or(t);
        let v: u32 = t
            .parse()
            .map_err(|_| Error::config("variant", format!("`{s}` is not 512, 768 or 1024")))?;
        KyberVariant::try_from(v)
    }
}

impl fmt::Display for KyberVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Kyber-{}", self.number())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    KeyGen,
    Encap,
    Decap,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::KeyGen, Phase::Encap, Phase::Decap];
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::KeyGen => "KeyGen",
            Phase::Encap => "Encap",
            Phase::Decap => "Decap",
        })
    }
}

/// One row of a phase: how many NTT invocations it makes per sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub phase: Phase,
    pub ntt_runs: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KyberProfile {
    pub variant: KyberVariant,
    pub blocks: Vec<Block>,
}

// Kyber-512 rows; entries of 2 scale with the module rank.
const BASE_ROWS: [(Phase, u32); 11] = [
    (Phase::KeyGen, 2),
    (Phase::KeyGen, 2),
    (Phase::KeyGen, 0),
    (Phase::Encap, 2),
    (Phase::Encap, 2),
    (Phase::Encap, 1),
    (Phase::Decap, 2),
    (Phase::Decap, 2),
    (Phase::Decap, 2),
    (Phase::Decap, 1),
    (Phase::Decap, 1),
];

impl KyberProfile {
    pub fn new(variant: KyberVariant) -> Self {
        let k = variant.rank();
        let blocks = BASE_ROWS
            .iter()
            .map(|&(phase, runs)| Block {
                phase,
                ntt_runs: if runs == 2 { k } else { runs },
            })
            .collect();
        KyberProfile { variant, blocks }
    }

    /// NTT runs per sample.
    pub fn total(&self) -> u64 {
        self.blocks.iter().map(|b| u64::from(b.ntt_runs)).sum()
    }

    pub fn phase_total(&self, phase: Phase) -> u64 {
        self.blocks
            .iter()
            .filter(|b| b.phase == phase)
            .map(|b| u64::from(b.ntt_runs))
            .sum()
    }
}

pub fn kyber_profile(variant: u32) -> Result<KyberProfile> {
    Ok(KyberProfile::new(KyberVariant::try_from(variant)?))
}
