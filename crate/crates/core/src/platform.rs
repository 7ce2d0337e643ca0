//! Name-keyed registry pairing each platform's configuration space with its
//! runtime surrogate.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, ConfigSpace, CpuSpace, GpuSpace, PlatformId, SpadeSpace};
use crate::oracle::{CpuSurrogate, GpuSurrogate, SpadeSurrogate, Surrogate, SurrogateConstants};

#[derive(Debug, Clone)]
pub struct Platform {
    pub space: Arc<dyn ConfigSpace>,
    pub oracle: Arc<dyn Surrogate>,
}

impl Platform {
    pub fn id(&self) -> PlatformId {
        self.space.platform()
    }
}

/// Declarative platform settings: domain overrides and surrogate constants.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlatformSettings {
    pub cpu: CpuSpace,
    pub spade: SpadeSpace,
    pub gpu: GpuSpace,
    pub oracle: SurrogateConstants,
}

#[derive(Debug, Clone, Default)]
pub struct PlatformRegistry {
    entries: BTreeMap<String, Platform>,
    oracle_version: String,
}

impl PlatformRegistry {
    pub fn new(oracle_version: impl Into<String>) -> Self {
        Self {
            entries: BTreeMap::new(),
            oracle_version: oracle_version.into(),
        }
    }

    pub fn from_settings(settings: &PlatformSettings) -> Self {
        let c = &settings.oracle;
        let mut reg = Self::new(c.tagged_version());
        reg.register(
            "cpu",
            Platform {
                space: Arc::new(settings.cpu.clone()),
                oracle: Arc::new(CpuSurrogate::new(c.clone())),
            },
        );
        reg.register(
            "spade",
            Platform {
                space: Arc::new(settings.spade.clone()),
                oracle: Arc::new(SpadeSurrogate::new(c.clone())),
            },
        );
        reg.register(
            "gpu",
            Platform {
                space: Arc::new(settings.gpu.clone()),
                oracle: Arc::new(GpuSurrogate::new(c.clone())),
            },
        );
        reg
    }

    pub fn with_defaults() -> Self {
        Self::from_settings(&PlatformSettings::default())
    }

    pub fn register(&mut self, name: &str, platform: Platform) {
        self.entries.insert(name.to_string(), platform);
    }

    pub fn get(&self, name: &str) -> Result<&Platform, ConfigError> {
        self.entries.get(name).ok_or_else(|| ConfigError::Unknown {
            what: "platform",
            name: name.to_string(),
        })
    }

    pub fn platform(&self, id: PlatformId) -> Result<&Platform, ConfigError> {
        self.get(id.as_str())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Oracle version tag shared by every registered surrogate.
    pub fn oracle_version(&self) -> &str {
        &self.oracle_version
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_registered() {
        let reg = PlatformRegistry::with_defaults();
        assert_eq!(reg.names().collect::<Vec<_>>(), vec!["cpu", "gpu", "spade"]);
        for id in PlatformId::ALL {
            let p = reg.platform(id).unwrap();
            assert_eq!(p.id(), id);
            assert_eq!(p.oracle.platform(), id);
        }
        assert!(reg.get("tpu").is_err());
        assert_eq!(reg.oracle_version(), "surrogate-v1");
    }

    #[test]
    fn settings_deserialize_with_defaults() {
        let s: PlatformSettings = serde_json::from_str(r#"{"spade": {"s_split": [32]}}"#).unwrap();
        assert_eq!(s.spade.s_split, vec![32]);
        assert_eq!(s.spade.p_row, vec![4, 32, 256, 2048]);
        let reg = PlatformRegistry::from_settings(&s);
        assert_eq!(reg.platform(PlatformId::Spade).unwrap().space.enumerate(100).len(), 128);
    }
}
