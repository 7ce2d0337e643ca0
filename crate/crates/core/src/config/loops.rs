use std::fmt;

use serde::{Deserialize, Serialize};

use super::ConfigError;

/// The seven slots of the canonical strip-mined loop nest. The numeric id
/// (1-based, in declaration order) is the value written in mapped records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoopSlot {
    I1,
    I2,
    J1,
    J2,
    K1,
    K2,
    K3,
}

impl LoopSlot {
    pub const ALL: [LoopSlot; 7] = [
        Self::I1,
        Self::I2,
        Self::J1,
        Self::J2,
        Self::K1,
        Self::K2,
        Self::K3,
    ];

    /// 1-based slot id.
    pub fn id(self) -> usize {
        self as usize + 1
    }

    pub fn from_id(id: usize) -> Option<Self> {
        id.checked_sub(1).and_then(|i| Self::ALL.get(i).copied())
    }
}

impl fmt::Display for LoopSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::I1 => "i1",
            Self::I2 => "i2",
            Self::J1 => "j1",
            Self::J2 => "j2",
            Self::K1 => "k1",
            Self::K2 => "k2",
            Self::K3 => "k3",
        };
        f.write_str(s)
    }
}

/// Loop segments of the CPU strip-mined nest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CpuLoop {
    I1,
    I2,
    J1,
    J2,
    K1,
    K2,
}

impl CpuLoop {
    pub const ALL: [CpuLoop; 6] = [Self::I1, Self::I2, Self::J1, Self::J2, Self::K1, Self::K2];

    pub fn canonical(self) -> LoopSlot {
        match self {
            Self::I1 => LoopSlot::I1,
            Self::I2 => LoopSlot::I2,
            Self::J1 => LoopSlot::J1,
            Self::J2 => LoopSlot::J2,
            Self::K1 => LoopSlot::K1,
            Self::K2 => LoopSlot::K2,
        }
    }
}

impl fmt::Display for CpuLoop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.canonical().fmt(f)
    }
}

/// Loop segments of the GPU nest, where `j` is not strip-mined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GpuLoop {
    I1,
    I2,
    J,
    K1,
    K2,
    K3,
}

impl GpuLoop {
    pub const ALL: [GpuLoop; 6] = [Self::I1, Self::I2, Self::J, Self::K1, Self::K2, Self::K3];

    /// `j` takes the outer j slot; the inserted unit loop `j′` takes `j2`.
    pub fn canonical(self) -> LoopSlot {
        match self {
            Self::I1 => LoopSlot::I1,
            Self::I2 => LoopSlot::I2,
            Self::J => LoopSlot::J1,
            Self::K1 => LoopSlot::K1,
            Self::K2 => LoopSlot::K2,
            Self::K3 => LoopSlot::K3,
        }
    }
}

impl fmt::Display for GpuLoop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::I1 => "i1",
            Self::I2 => "i2",
            Self::J => "j",
            Self::K1 => "k1",
            Self::K2 => "k2",
            Self::K3 => "k3",
        };
        f.write_str(s)
    }
}

pub(crate) fn check_permutation<T: Copy + Eq + fmt::Display>(
    order: &[T],
    universe: &[T],
) -> Result<(), ConfigError> {
    if order.len() != universe.len() {
        return Err(ConfigError::InvalidOrder(format!(
            "expected {} slots, got {}",
            universe.len(),
            order.len()
        )));
    }
    for slot in universe {
        let count = order.iter().filter(|s| *s == slot).count();
        if count != 1 {
            return Err(ConfigError::InvalidOrder(format!(
                "slot {slot} appears {count} times"
            )));
        }
    }
    Ok(())
}

/// Splits and execution order of the canonical seven-slot loop nest.
/// `order[p]` is the slot executed at nesting depth `p` (outermost first).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CanonicalLoopNest {
    i_split: u64,
    j_split: u64,
    k_split: u64,
    order: [LoopSlot; 7],
}

impl CanonicalLoopNest {
    pub fn new(
        i_split: u64,
        j_split: u64,
        k_split: u64,
        order: [LoopSlot; 7],
    ) -> Result<Self, ConfigError> {
        if i_split == 0 || j_split == 0 || k_split == 0 {
            return Err(ConfigError::InvalidOrder("splits must be at least 1".into()));
        }
        check_permutation(&order, &LoopSlot::ALL)?;
        Ok(Self {
            i_split,
            j_split,
            k_split,
            order,
        })
    }

    pub fn i_split(&self) -> u64 {
        self.i_split
    }

    pub fn j_split(&self) -> u64 {
        self.j_split
    }

    pub fn k_split(&self) -> u64 {
        self.k_split
    }

    pub fn order(&self) -> &[LoopSlot; 7] {
        &self.order
    }

    /// Slot ids in execution order, as written in mapped records.
    pub fn order_ids(&self) -> [usize; 7] {
        self.order.map(LoopSlot::id)
    }

    /// 0-based depth of `slot` in the order.
    pub fn position(&self, slot: LoopSlot) -> usize {
        self.order
            .iter()
            .position(|&s| s == slot)
            .expect("order is a permutation")
    }

    pub fn innermost(&self) -> LoopSlot {
        self.order[6]
    }
}
