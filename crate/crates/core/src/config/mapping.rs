use serde::{Deserialize, Serialize};

use super::loops::check_permutation;
use super::{CanonicalLoopNest, ConfigError, CpuLoop, GpuLoop, LoopSlot, SpadeConfig};

/// Length of the lossless homogeneous encoding: three scaled splits plus a
/// 7×7 one-hot position matrix.
pub const HOMOGENEOUS_WIDTH: usize = 3 + 7 * 7;
/// Width consumed by the configuration mapper (one zero pad slot).
pub const PADDED_HOMOGENEOUS_WIDTH: usize = HOMOGENEOUS_WIDTH + 1;

/// Splits are log2-scaled and divided by this bound (2^24).
const SPLIT_LOG_SCALE: f64 = 24.0;

/// Which tiling parameter feeds the canonical `i` split.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TileOrientation {
    /// `i ← row panels`, `j ← column panels` (matches the worked mapping record).
    #[default]
    RowPanelsAsI,
    /// `i ← column panels`, `j ← row panels`.
    ColumnPanelsAsI,
}

const BARRIER_ORDER: [CpuLoop; 6] = [
    CpuLoop::K2,
    CpuLoop::J2,
    CpuLoop::I2,
    CpuLoop::I1,
    CpuLoop::J1,
    CpuLoop::K1,
];
const NO_BARRIER_ORDER: [CpuLoop; 6] = [
    CpuLoop::K2,
    CpuLoop::I2,
    CpuLoop::J2,
    CpuLoop::I1,
    CpuLoop::J1,
    CpuLoop::K1,
];

/// Inserts `new` immediately after `anchor`, shifting later slots inward.
fn insert_after(order: &[LoopSlot], anchor: LoopSlot, new: LoopSlot) -> [LoopSlot; 7] {
    let mut out = Vec::with_capacity(7);
    for &s in order {
        out.push(s);
        if s == anchor {
            out.push(new);
        }
    }
    out.try_into().expect("six slots plus one insertion")
}

/// Maps accelerator tiling and barrier onto the canonical nest.
///
/// The barrier bit selects between two six-slot orders that differ by the
/// swap of `i2` and `j2`; the unit `k3` loop is then placed right after `k2`
/// exactly as for the CPU nest.
pub fn map_phi(c: &SpadeConfig, orientation: TileOrientation) -> CanonicalLoopNest {
    let core = if c.barrier {
        BARRIER_ORDER
    } else {
        NO_BARRIER_ORDER
    };
    let (i, j) = match orientation {
        TileOrientation::RowPanelsAsI => (c.p_row, c.p_col),
        TileOrientation::ColumnPanelsAsI => (c.p_col, c.p_row),
    };
    let slots: Vec<LoopSlot> = core.iter().map(|l| l.canonical()).collect();
    let order = insert_after(&slots, LoopSlot::K2, LoopSlot::K3);
    CanonicalLoopNest::new(i, j, c.s_split, order).expect("fixed orders are permutations")
}

/// Extends a CPU order with a unit `k3` loop placed right after `k2`.
pub fn map_pi_cpu(
    i_split: u64,
    j_split: u64,
    k_split: u64,
    order: &[CpuLoop],
) -> Result<CanonicalLoopNest, ConfigError> {
    check_permutation(order, &CpuLoop::ALL)?;
    let slots: Vec<LoopSlot> = order.iter().map(|l| l.canonical()).collect();
    CanonicalLoopNest::new(
        i_split,
        j_split,
        k_split,
        insert_after(&slots, LoopSlot::K2, LoopSlot::K3),
    )
}

/// Extends a GPU order with a unit `j′` loop placed right after `j`.
pub fn map_pi_gpu(
    i_split: u64,
    j_split: u64,
    k_split: u64,
    order: &[GpuLoop],
) -> Result<CanonicalLoopNest, ConfigError> {
    check_permutation(order, &GpuLoop::ALL)?;
    let slots: Vec<LoopSlot> = order.iter().map(|l| l.canonical()).collect();
    CanonicalLoopNest::new(
        i_split,
        j_split,
        k_split,
        insert_after(&slots, LoopSlot::J1, LoopSlot::J2),
    )
}

/// Encodes a canonical nest as `[log2 splits / 24 ; one-hot(position, slot)]`,
/// 52 values, followed by one zero pad slot (53 total).
pub fn encode_homogeneous_vector(nest: &CanonicalLoopNest) -> Vec<f64> {
    let mut v = Vec::with_capacity(PADDED_HOMOGENEOUS_WIDTH);
    for split in [nest.i_split(), nest.j_split(), nest.k_split()] {
        v.push((split as f64).log2() / SPLIT_LOG_SCALE);
    }
    let mut onehot = [0.0; 49];
    for (pos, slot) in nest.order().iter().enumerate() {
        onehot[pos * 7 + (slot.id() - 1)] = 1.0;
    }
    v.extend_from_slice(&onehot);
    v.push(0.0);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use LoopSlot::*;

    fn spade(p_row: u64, p_col: u64, s_split: u64, barrier: bool) -> SpadeConfig {
        SpadeConfig {
            p_row,
            p_col,
            s_split,
            barrier,
            bypass: false,
            reorder: false,
        }
    }

    #[test]
    fn worked_record() {
        let nest = map_phi(&spade(4, 1024, 32, false), TileOrientation::default());
        assert_eq!((nest.i_split(), nest.j_split(), nest.k_split()), (4, 1024, 32));
        assert_eq!(nest.order_ids(), [6, 7, 2, 4, 1, 3, 5]);
    }

    #[test]
    fn barrier_orders() {
        let on = map_phi(&spade(32, 16384, 256, true), TileOrientation::default());
        assert_eq!(on.order(), &[K2, K3, J2, I2, I1, J1, K1]);
        let off = map_phi(&spade(32, 16384, 256, false), TileOrientation::default());
        assert_eq!(off.order(), &[K2, K3, I2, J2, I1, J1, K1]);
        let diff: Vec<usize> = (0..7).filter(|&p| on.order()[p] != off.order()[p]).collect();
        assert_eq!(diff, vec![2, 3]);
    }

    #[test]
    fn column_orientation_swaps_splits() {
        let nest = map_phi(&spade(4, 1024, 32, false), TileOrientation::ColumnPanelsAsI);
        assert_eq!((nest.i_split(), nest.j_split()), (1024, 4));
    }

    #[test]
    fn pi_cpu_examples() {
        use CpuLoop as C;
        let a = map_pi_cpu(1, 1, 1, &[C::I1, C::J1, C::K1, C::I2, C::J2, C::K2]).unwrap();
        assert_eq!(a.order(), &[I1, J1, K1, I2, J2, K2, K3]);
        let b = map_pi_cpu(1, 1, 1, &[C::K2, C::I2, C::J2, C::I1, C::J1, C::K1]).unwrap();
        assert_eq!(b.order(), &[K2, K3, I2, J2, I1, J1, K1]);
        assert!(map_pi_cpu(1, 1, 1, &[C::K2, C::K2, C::J2, C::I1, C::J1, C::K1]).is_err());
    }

    #[test]
    fn pi_gpu_example() {
        use GpuLoop as G;
        let n = map_pi_gpu(8, 1, 1, &[G::I1, G::I2, G::J, G::K1, G::K2, G::K3]).unwrap();
        assert_eq!(n.order(), &[I1, I2, J1, J2, K1, K2, K3]);
        assert!(map_pi_gpu(8, 1, 1, &[G::I1, G::I2, G::J]).is_err());
    }

    #[test]
    fn encoding_layout() {
        let nest = CanonicalLoopNest::new(1, 1, 1, LoopSlot::ALL).unwrap();
        let v = encode_homogeneous_vector(&nest);
        assert_eq!(v.len(), PADDED_HOMOGENEOUS_WIDTH);
        assert_eq!(&v[..3], &[0.0, 0.0, 0.0]);
        for r in 0..7 {
            for c in 0..7 {
                assert_eq!(v[3 + r * 7 + c], if r == c { 1.0 } else { 0.0 });
            }
        }
        assert_eq!(v[52], 0.0);
    }

    #[test]
    fn encoding_has_one_per_row_and_column() {
        let nest = map_phi(&spade(2048, 65536, 256, true), TileOrientation::default());
        let v = encode_homogeneous_vector(&nest);
        let block = &v[3..52];
        assert_eq!(block.iter().filter(|&&x| x == 1.0).count(), 7);
        for r in 0..7 {
            assert_eq!(block[r * 7..r * 7 + 7].iter().sum::<f64>(), 1.0);
            assert_eq!((0..7).map(|k| block[k * 7 + r]).sum::<f64>(), 1.0);
        }
        assert!((v[0] - 11.0 / 24.0).abs() < 1e-15);
    }
}
