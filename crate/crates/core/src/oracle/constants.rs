use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpadeConstants {
    /// On-chip buffer size in elements.
    pub buffer_size: f64,
    pub sync_cost: f64,
    pub tile_overhead: f64,
    pub preprocess_rate: f64,
}

impl Default for SpadeConstants {
    fn default() -> Self {
        Self {
            buffer_size: (1u64 << 20) as f64,
            sync_cost: 50.0,
            tile_overhead: 200.0,
            preprocess_rate: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CpuConstants {
    pub cache_size: f64,
    pub order_penalty: f64,
    pub loop_overhead: f64,
}

impl Default for CpuConstants {
    fn default() -> Self {
        Self {
            cache_size: (1u64 << 18) as f64,
            order_penalty: 0.3,
            loop_overhead: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpuConstants {
    pub shared_memory: f64,
    pub order_penalty: f64,
    pub loop_overhead: f64,
    /// Cost multiplier per binding / unroll category index.
    pub category_multipliers: Vec<f64>,
}

impl Default for GpuConstants {
    fn default() -> Self {
        Self {
            shared_memory: (1u64 << 17) as f64,
            order_penalty: 0.3,
            loop_overhead: 20.0,
            category_multipliers: vec![1.0, 1.15, 1.3],
        }
    }
}

/// Optional seeded multiplicative noise, uniform in `±amplitude`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Jitter {
    pub seed: u64,
    pub amplitude: f64,
}

/// The pinned constant set behind every surrogate. Changing any value must
/// come with a new `version`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateConstants {
    pub version: String,
    /// Width of the dense operand.
    pub dense_width: f64,
    pub spade: SpadeConstants,
    pub cpu: CpuConstants,
    pub gpu: GpuConstants,
    pub jitter: Option<Jitter>,
}

pub const SURROGATE_VERSION: &str = "surrogate-v1";

impl Default for SurrogateConstants {
    fn default() -> Self {
        Self {
            version: SURROGATE_VERSION.to_string(),
            dense_width: 128.0,
            spade: SpadeConstants::default(),
            cpu: CpuConstants::default(),
            gpu: GpuConstants::default(),
            jitter: None,
        }
    }
}

impl SurrogateConstants {
    /// Version string including the jitter setting, so noisy and clean
    /// datasets never mix.
    pub fn tagged_version(&self) -> String {
        match &self.jitter {
            None => self.version.clone(),
            Some(j) => format!("{}+jitter{}s{}", self.version, j.amplitude, j.seed),
        }
    }
}
