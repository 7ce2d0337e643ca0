//! Program configuration spaces per platform and the mapping of
//! configurations onto a shared canonical loop nest.

mod loops;
mod mapping;
mod space;

pub use loops::{CanonicalLoopNest, CpuLoop, GpuLoop, LoopSlot};
pub use mapping::{
    encode_homogeneous_vector, map_phi, map_pi_cpu, map_pi_gpu, TileOrientation,
    HOMOGENEOUS_WIDTH, PADDED_HOMOGENEOUS_WIDTH,
};
pub use space::{
    ColumnPanel, ConfigSpace, CpuSpace, GpuSpace, HeterogeneousParams, MatrixColsTag, SpadeSpace,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("expected a {expected} configuration, got {got}")]
    PlatformMismatch { expected: PlatformId, got: PlatformId },
    #[error("invalid loop order: {0}")]
    InvalidOrder(String),
    #[error("value {value} outside the {param} domain")]
    OutOfDomain { param: &'static str, value: u64 },
    #[error("unknown {what} '{name}'")]
    Unknown { what: &'static str, name: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlatformId {
    Cpu,
    Spade,
    Gpu,
}

impl PlatformId {
    pub const ALL: [PlatformId; 3] = [Self::Cpu, Self::Spade, Self::Gpu];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Cpu => "cpu",
            Self::Spade => "spade",
            Self::Gpu => "gpu",
        }
    }
}

impl fmt::Display for PlatformId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlatformId {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| ConfigError::Unknown {
                what: "platform",
                name: s.into(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Spmm,
    Sddmm,
}

impl Kernel {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Spmm => "spmm",
            Self::Sddmm => "sddmm",
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Kernel {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "spmm" => Ok(Self::Spmm),
            "sddmm" => Ok(Self::Sddmm),
            _ => Err(ConfigError::Unknown {
                what: "kernel",
                name: s.into(),
            }),
        }
    }
}

/// Tiling, barrier and flag settings of the sparse accelerator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpadeConfig {
    pub p_row: u64,
    pub p_col: u64,
    pub s_split: u64,
    pub barrier: bool,
    pub bypass: bool,
    pub reorder: bool,
}

/// Strip-mining splits, loop order and format reordering for the CPU backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CpuConfig {
    pub i_split: u64,
    pub j_split: u64,
    pub k_split: u64,
    pub order: [CpuLoop; 6],
    pub format_reorder: bool,
}

/// Splits, loop order, thread binding and unrolling for the GPU backend.
/// `binding` and `unroll` are category indices into the space's domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GpuConfig {
    pub i_split: u64,
    pub j_split: u64,
    pub k_split: u64,
    pub order: [GpuLoop; 6],
    pub binding: u8,
    pub unroll: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "platform", rename_all = "lowercase")]
pub enum ProgramConfig {
    Cpu(CpuConfig),
    Spade(SpadeConfig),
    Gpu(GpuConfig),
}

impl ProgramConfig {
    pub fn platform(&self) -> PlatformId {
        match self {
            Self::Cpu(_) => PlatformId::Cpu,
            Self::Spade(_) => PlatformId::Spade,
            Self::Gpu(_) => PlatformId::Gpu,
        }
    }

    pub fn as_spade(&self) -> Result<&SpadeConfig, ConfigError> {
        match self {
            Self::Spade(c) => Ok(c),
            other => Err(ConfigError::PlatformMismatch {
                expected: PlatformId::Spade,
                got: other.platform(),
            }),
        }
    }

    pub fn as_cpu(&self) -> Result<&CpuConfig, ConfigError> {
        match self {
            Self::Cpu(c) => Ok(c),
            other => Err(ConfigError::PlatformMismatch {
                expected: PlatformId::Cpu,
                got: other.platform(),
            }),
        }
    }

    pub fn as_gpu(&self) -> Result<&GpuConfig, ConfigError> {
        match self {
            Self::Gpu(c) => Ok(c),
            other => Err(ConfigError::PlatformMismatch {
                expected: PlatformId::Gpu,
                got: other.platform(),
            }),
        }
    }

    /// Compact single-line rendering used in reports and the `tune` listing.
    pub fn label(&self) -> String {
        fn order<T: fmt::Display>(o: &[T]) -> String {
            o.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
        }
        match self {
            Self::Spade(c) => format!(
                "p_row={} p_col={} s_split={} barrier={} bypass={} reorder={}",
                c.p_row, c.p_col, c.s_split, c.barrier as u8, c.bypass as u8, c.reorder as u8
            ),
            Self::Cpu(c) => format!(
                "I={} J={} K={} order=[{}] format_reorder={}",
                c.i_split,
                c.j_split,
                c.k_split,
                order(&c.order),
                c.format_reorder as u8
            ),
            Self::Gpu(c) => format!(
                "I={} J={} K={} order=[{}] binding={} unroll={}",
                c.i_split,
                c.j_split,
                c.k_split,
                order(&c.order),
                c.binding,
                c.unroll
            ),
        }
    }
}
