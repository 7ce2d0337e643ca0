use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use super::mapping::{map_phi, map_pi_cpu, map_pi_gpu, TileOrientation};
use super::{
    CanonicalLoopNest, ConfigError, CpuConfig, CpuLoop, GpuConfig, GpuLoop, PlatformId,
    ProgramConfig, SpadeConfig,
};

/// Dense vector of the parameters that have no cross-platform analogue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeterogeneousParams {
    pub platform: PlatformId,
    pub values: Vec<f64>,
}

/// A platform's enumerable configuration space and its homogeneous /
/// heterogeneous split.
pub trait ConfigSpace: Send + Sync + Debug {
    fn platform(&self) -> PlatformId;

    /// Average cost of collecting one sample on this platform.
    fn beta(&self) -> f64;

    /// All configurations, deduplicated, in lexicographic domain order.
    /// `matrix_cols` resolves matrix-dependent domain values.
    fn enumerate(&self, matrix_cols: usize) -> Vec<ProgramConfig>;

    /// The untuned baseline configuration.
    fn default_config(&self, matrix_cols: usize) -> ProgramConfig;

    fn canonical(&self, c: &ProgramConfig) -> Result<CanonicalLoopNest, ConfigError>;

    fn heterogeneous(&self, c: &ProgramConfig) -> Result<HeterogeneousParams, ConfigError>;

    fn heterogeneous_width(&self) -> usize;

    /// Every heterogeneous vector the space can produce, in a fixed order.
    fn heterogeneous_space(&self) -> Vec<Vec<f64>>;

    /// Raw parameter vector without any mapping, used by feature augmentation.
    fn raw_features(&self, c: &ProgramConfig) -> Result<Vec<f64>, ConfigError>;

    fn raw_width(&self) -> usize;

    fn split(
        &self,
        c: &ProgramConfig,
    ) -> Result<(CanonicalLoopNest, HeterogeneousParams), ConfigError> {
        Ok((self.canonical(c)?, self.heterogeneous(c)?))
    }
}

fn log_feature(x: u64) -> f64 {
    (x as f64).log2() / 24.0
}

fn bit(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn order_onehot<T: PartialEq + Copy>(order: &[T], universe: &[T], out: &mut Vec<f64>) {
    for &slot in universe {
        for &o in order {
            out.push(bit(o == slot));
        }
    }
}

/// A column-panel domain entry: a fixed count or the matrix's own width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnPanel {
    Fixed(u64),
    MatrixCols(MatrixColsTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatrixColsTag {
    #[serde(rename = "NUM_MATRIX_COLS")]
    NumMatrixCols,
}

impl ColumnPanel {
    pub const MATRIX_COLS: ColumnPanel = ColumnPanel::MatrixCols(MatrixColsTag::NumMatrixCols);

    pub fn resolve(self, matrix_cols: usize) -> u64 {
        match self {
            Self::Fixed(v) => v,
            Self::MatrixCols(_) => matrix_cols as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpadeSpace {
    pub p_row: Vec<u64>,
    pub p_col: Vec<ColumnPanel>,
    pub s_split: Vec<u64>,
    pub beta: f64,
    pub orientation: TileOrientation,
}

impl Default for SpadeSpace {
    fn default() -> Self {
        Self {
            p_row: vec![4, 32, 256, 2048],
            p_col: vec![
                ColumnPanel::Fixed(1024),
                ColumnPanel::Fixed(16384),
                ColumnPanel::Fixed(65536),
                ColumnPanel::MATRIX_COLS,
            ],
            s_split: vec![32, 256],
            beta: 1000.0,
            orientation: TileOrientation::default(),
        }
    }
}

impl SpadeSpace {
    fn resolved_p_col(&self, matrix_cols: usize) -> Vec<u64> {
        let mut out: Vec<u64> = Vec::new();
        for p in &self.p_col {
            let v = p.resolve(matrix_cols);
            if !out.contains(&v) {
                out.push(v);
            }
        }
        out
    }
}

impl ConfigSpace for SpadeSpace {
    fn platform(&self) -> PlatformId {
        PlatformId::Spade
    }

    fn beta(&self) -> f64 {
        self.beta
    }

    fn enumerate(&self, matrix_cols: usize) -> Vec<ProgramConfig> {
        let p_cols = self.resolved_p_col(matrix_cols);
        let mut out = Vec::new();
        for &p_row in &self.p_row {
            for &p_col in &p_cols {
                for &s_split in &self.s_split {
                    for barrier in [false, true] {
                        for bypass in [false, true] {
                            for reorder in [false, true] {
                                out.push(ProgramConfig::Spade(SpadeConfig {
                                    p_row,
                                    p_col,
                                    s_split,
                                    barrier,
                                    bypass,
                                    reorder,
                                }));
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn default_config(&self, _matrix_cols: usize) -> ProgramConfig {
        ProgramConfig::Spade(SpadeConfig {
            p_row: 32,
            p_col: 1024,
            s_split: 32,
            barrier: false,
            bypass: false,
            reorder: false,
        })
    }

    fn canonical(&self, c: &ProgramConfig) -> Result<CanonicalLoopNest, ConfigError> {
        Ok(map_phi(c.as_spade()?, self.orientation))
    }

    fn heterogeneous(&self, c: &ProgramConfig) -> Result<HeterogeneousParams, ConfigError> {
        let s = c.as_spade()?;
        Ok(HeterogeneousParams {
            platform: PlatformId::Spade,
            values: vec![bit(s.bypass), bit(s.reorder)],
        })
    }

    fn heterogeneous_width(&self) -> usize {
        2
    }

    fn heterogeneous_space(&self) -> Vec<Vec<f64>> {
        vec![
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
        ]
    }

    fn raw_features(&self, c: &ProgramConfig) -> Result<Vec<f64>, ConfigError> {
        let s = c.as_spade()?;
        Ok(vec![
            log_feature(s.p_row),
            log_feature(s.p_col),
            log_feature(s.s_split),
            bit(s.barrier),
            bit(s.bypass),
            bit(s.reorder),
        ])
    }

    fn raw_width(&self) -> usize {
        6
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CpuSpace {
    pub i_split: Vec<u64>,
    pub j_split: Vec<u64>,
    pub k_split: Vec<u64>,
    pub orders: Vec<[CpuLoop; 6]>,
    pub beta: f64,
}

impl Default for CpuSpace {
    fn default() -> Self {
        use CpuLoop::*;
        Self {
            i_split: vec![4, 32, 256, 2048],
            j_split: vec![256, 1024, 16384],
            k_split: vec![32, 256],
            orders: vec![
                [I1, J1, K1, I2, J2, K2],
                [K2, I2, J2, I1, J1, K1],
                [K2, J2, I2, I1, J1, K1],
                [I1, K1, J1, I2, K2, J2],
                [J1, I1, K1, J2, I2, K2],
                [I1, I2, J1, J2, K2, K1],
            ],
            beta: 1.0,
        }
    }
}

impl ConfigSpace for CpuSpace {
    fn platform(&self) -> PlatformId {
        PlatformId::Cpu
    }

    fn beta(&self) -> f64 {
        self.beta
    }

    fn enumerate(&self, _matrix_cols: usize) -> Vec<ProgramConfig> {
        let mut out = Vec::new();
        for &i_split in &self.i_split {
            for &j_split in &self.j_split {
                for &k_split in &self.k_split {
                    for order in &self.orders {
                        for format_reorder in [false, true] {
                            out.push(ProgramConfig::Cpu(CpuConfig {
                                i_split,
                                j_split,
                                k_split,
                                order: *order,
                                format_reorder,
                            }));
                        }
                    }
                }
            }
        }
        out
    }

    fn default_config(&self, _matrix_cols: usize) -> ProgramConfig {
        use CpuLoop::*;
        ProgramConfig::Cpu(CpuConfig {
            i_split: 32,
            j_split: 1024,
            k_split: 32,
            order: [I1, J1, K1, I2, J2, K2],
            format_reorder: false,
        })
    }

    fn canonical(&self, c: &ProgramConfig) -> Result<CanonicalLoopNest, ConfigError> {
        let c = c.as_cpu()?;
        map_pi_cpu(c.i_split, c.j_split, c.k_split, &c.order)
    }

    fn heterogeneous(&self, c: &ProgramConfig) -> Result<HeterogeneousParams, ConfigError> {
        Ok(HeterogeneousParams {
            platform: PlatformId::Cpu,
            values: vec![bit(c.as_cpu()?.format_reorder)],
        })
    }

    fn heterogeneous_width(&self) -> usize {
        1
    }

    fn heterogeneous_space(&self) -> Vec<Vec<f64>> {
        vec![vec![0.0], vec![1.0]]
    }

    fn raw_features(&self, c: &ProgramConfig) -> Result<Vec<f64>, ConfigError> {
        let c = c.as_cpu()?;
        let mut v = vec![
            log_feature(c.i_split),
            log_feature(c.j_split),
            log_feature(c.k_split),
        ];
        order_onehot(&c.order, &CpuLoop::ALL, &mut v);
        v.push(bit(c.format_reorder));
        Ok(v)
    }

    fn raw_width(&self) -> usize {
        3 + 36 + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpuSpace {
    pub i_split: Vec<u64>,
    pub j_split: Vec<u64>,
    pub k_split: Vec<u64>,
    pub orders: Vec<[GpuLoop; 6]>,
    /// Number of loop-binding categories.
    pub bindings: u8,
    /// Number of unrolling categories.
    pub unrolls: u8,
    pub beta: f64,
}

impl Default for GpuSpace {
    fn default() -> Self {
        use GpuLoop::*;
        Self {
            i_split: vec![8, 64, 512, 4096, 32768],
            j_split: vec![1024, 16384],
            k_split: vec![32],
            orders: vec![
                [I1, I2, J, K1, K2, K3],
                [I1, J, I2, K1, K2, K3],
                [J, I1, I2, K1, K2, K3],
                [I1, K1, I2, K2, J, K3],
                [K1, I1, K2, I2, K3, J],
            ],
            bindings: 3,
            unrolls: 2,
            beta: 10.0,
        }
    }
}

impl ConfigSpace for GpuSpace {
    fn platform(&self) -> PlatformId {
        PlatformId::Gpu
    }

    fn beta(&self) -> f64 {
        self.beta
    }

    fn enumerate(&self, _matrix_cols: usize) -> Vec<ProgramConfig> {
        let mut out = Vec::new();
        for &i_split in &self.i_split {
            for &j_split in &self.j_split {
                for &k_split in &self.k_split {
                    for order in &self.orders {
                        for binding in 0..self.bindings {
                            for unroll in 0..self.unrolls {
                                out.push(ProgramConfig::Gpu(GpuConfig {
                                    i_split,
                                    j_split,
                                    k_split,
                                    order: *order,
                                    binding,
                                    unroll,
                                }));
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn default_config(&self, _matrix_cols: usize) -> ProgramConfig {
        ProgramConfig::Gpu(GpuConfig {
            i_split: self.i_split[self.i_split.len() / 2],
            j_split: self.j_split[0],
            k_split: self.k_split[0],
            order: self.orders[0],
            binding: 0,
            unroll: 0,
        })
    }

    fn canonical(&self, c: &ProgramConfig) -> Result<CanonicalLoopNest, ConfigError> {
        let c = c.as_gpu()?;
        map_pi_gpu(c.i_split, c.j_split, c.k_split, &c.order)
    }

    fn heterogeneous(&self, c: &ProgramConfig) -> Result<HeterogeneousParams, ConfigError> {
        let c = c.as_gpu()?;
        if c.binding >= self.bindings {
            return Err(ConfigError::OutOfDomain {
                param: "binding",
                value: c.binding as u64,
            });
        }
        if c.unroll >= self.unrolls {
            return Err(ConfigError::OutOfDomain {
                param: "unroll",
                value: c.unroll as u64,
            });
        }
        let mut values = vec![0.0; self.heterogeneous_width()];
        values[c.binding as usize] = 1.0;
        values[self.bindings as usize + c.unroll as usize] = 1.0;
        Ok(HeterogeneousParams {
            platform: PlatformId::Gpu,
            values,
        })
    }

    fn heterogeneous_width(&self) -> usize {
        self.bindings as usize + self.unrolls as usize
    }

    fn heterogeneous_space(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for b in 0..self.bindings {
            for u in 0..self.unrolls {
                let mut v = vec![0.0; self.heterogeneous_width()];
                v[b as usize] = 1.0;
                v[self.bindings as usize + u as usize] = 1.0;
                out.push(v);
            }
        }
        out
    }

    fn raw_features(&self, c: &ProgramConfig) -> Result<Vec<f64>, ConfigError> {
        let g = c.as_gpu()?;
        let mut v = vec![
            log_feature(g.i_split),
            log_feature(g.j_split),
            log_feature(g.k_split),
        ];
        order_onehot(&g.order, &GpuLoop::ALL, &mut v);
        v.extend(self.heterogeneous(c)?.values);
        Ok(v)
    }

    fn raw_width(&self) -> usize {
        3 + 36 + self.heterogeneous_width()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    use crate::config::encode_homogeneous_vector;

    #[test]
    fn spade_has_256() {
        let s = SpadeSpace::default();
        for cols in [1, 100, 5000, 1_000_000] {
            assert_eq!(s.enumerate(cols).len(), 256);
        }
    }

    #[test]
    fn spade_dedups_colliding_columns() {
        assert_eq!(SpadeSpace::default().enumerate(65536).len(), 192);
    }

    #[test]
    fn enumeration_is_deterministic_and_unique() {
        let spaces: Vec<Box<dyn ConfigSpace>> = vec![
            Box::new(CpuSpace::default()),
            Box::new(SpadeSpace::default()),
            Box::new(GpuSpace::default()),
        ];
        for s in &spaces {
            let a = s.enumerate(777);
            assert_eq!(a, s.enumerate(777));
            let unique: HashSet<_> = a.iter().collect();
            assert_eq!(unique.len(), a.len());
        }
        assert_eq!(spaces[0].enumerate(1).len(), 288);
        assert_eq!(spaces[2].enumerate(1).len(), 300);
    }

    #[test]
    fn spade_enumeration_order() {
        let all = SpadeSpace::default().enumerate(3000);
        let first = all[0].as_spade().unwrap();
        assert_eq!((first.p_row, first.p_col, first.s_split), (4, 1024, 32));
        assert!(!first.barrier && !first.bypass && !first.reorder);
        let second = all[1].as_spade().unwrap();
        assert!(second.reorder && !second.bypass);
        assert_eq!(all[255].as_spade().unwrap().p_col, 3000);
    }

    #[test]
    fn heterogeneous_vectors() {
        let spade = SpadeSpace::default();
        let c = ProgramConfig::Spade(SpadeConfig {
            p_row: 4,
            p_col: 1024,
            s_split: 32,
            barrier: true,
            bypass: true,
            reorder: false,
        });
        assert_eq!(spade.heterogeneous(&c).unwrap().values, vec![1.0, 0.0]);

        let cpu = CpuSpace::default();
        let mut cc = *cpu.default_config(1).as_cpu().unwrap();
        cc.format_reorder = true;
        assert_eq!(
            cpu.heterogeneous(&ProgramConfig::Cpu(cc)).unwrap().values,
            vec![1.0]
        );
        assert!(cpu.heterogeneous(&c).is_err());
    }

    #[test]
    fn barrier_only_changes_the_order() {
        let spade = SpadeSpace::default();
        for c in spade.enumerate(5000) {
            let s = *c.as_spade().unwrap();
            if s.barrier {
                continue;
            }
            let flipped = ProgramConfig::Spade(SpadeConfig { barrier: true, ..s });
            let (na, ha) = spade.split(&c).unwrap();
            let (nb, hb) = spade.split(&flipped).unwrap();
            assert_eq!(ha, hb);
            assert_ne!(na.order(), nb.order());
            assert_eq!(
                (na.i_split(), na.j_split(), na.k_split()),
                (nb.i_split(), nb.j_split(), nb.k_split())
            );
        }
    }

    #[test]
    fn split_is_lossless_and_encoding_injective() {
        let spaces: Vec<Box<dyn ConfigSpace>> = vec![
            Box::new(CpuSpace::default()),
            Box::new(SpadeSpace::default()),
            Box::new(GpuSpace::default()),
        ];
        for s in &spaces {
            let configs = s.enumerate(4321);
            let mut pairs = HashSet::new();
            let mut nests = HashSet::new();
            let mut encodings = HashSet::new();
            for c in &configs {
                let (nest, het) = s.split(c).unwrap();
                let enc: Vec<u64> = encode_homogeneous_vector(&nest)
                    .iter()
                    .map(|x| x.to_bits())
                    .collect();
                let het_bits: Vec<u64> = het.values.iter().map(|x| x.to_bits()).collect();
                pairs.insert((enc.clone(), het_bits));
                nests.insert(nest);
                encodings.insert(enc);
            }
            assert_eq!(pairs.len(), configs.len(), "{:?}", s.platform());
            assert_eq!(nests.len(), encodings.len());
        }
    }

    #[test]
    fn defaults_are_enumerated() {
        let spaces: Vec<Box<dyn ConfigSpace>> = vec![
            Box::new(CpuSpace::default()),
            Box::new(SpadeSpace::default()),
            Box::new(GpuSpace::default()),
        ];
        for s in &spaces {
            assert!(s.enumerate(999).contains(&s.default_config(999)));
        }
    }

    #[test]
    fn raw_widths_match() {
        let spaces: Vec<Box<dyn ConfigSpace>> = vec![
            Box::new(CpuSpace::default()),
            Box::new(SpadeSpace::default()),
            Box::new(GpuSpace::default()),
        ];
        for s in &spaces {
            for c in s.enumerate(10).iter().take(20) {
                assert_eq!(s.raw_features(c).unwrap().len(), s.raw_width());
            }
            assert_eq!(s.heterogeneous_space().len(), {
                let set: HashSet<Vec<u64>> = s
                    .enumerate(10)
                    .iter()
                    .map(|c| s.heterogeneous(c).unwrap().values.iter().map(|x| x.to_bits()).collect())
                    .collect();
                set.len()
            });
        }
    }

    #[test]
    fn column_panel_serde() {
        let s = SpadeSpace::default();
        let json = serde_json::to_string(&s.p_col).unwrap();
        assert_eq!(json, r#"[1024,16384,65536,"NUM_MATRIX_COLS"]"#);
        let back: Vec<ColumnPanel> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s.p_col);
    }
}
