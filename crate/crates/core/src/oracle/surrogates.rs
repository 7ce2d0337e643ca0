use crate::config::{map_pi_cpu, map_pi_gpu, Kernel, LoopSlot, PlatformId, ProgramConfig};

use super::{MatrixProfile, OracleError, Surrogate, SurrogateConstants};

fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

fn ceil_div(a: usize, b: u64) -> f64 {
    (a as u64).div_ceil(b.max(1)) as f64
}

fn kernel_factor(kernel: Kernel) -> f64 {
    match kernel {
        Kernel::Spmm => 1.0,
        Kernel::Sddmm => 2.0,
    }
}

/// FNV-1a over length-delimited byte strings.
pub(crate) fn fnv1a(parts: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for &b in *part {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        h ^= 0xff;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn jitter_factor(
    constants: &SurrogateConstants,
    kernel: Kernel,
    m: &MatrixProfile,
    c: &ProgramConfig,
) -> f64 {
    match &constants.jitter {
        None => 1.0,
        Some(j) => {
            let label = c.label();
            let h = fnv1a(&[
                &j.seed.to_le_bytes(),
                kernel.as_str().as_bytes(),
                m.name.as_bytes(),
                label.as_bytes(),
            ]);
            let unit = (h >> 11) as f64 / (1u64 << 53) as f64;
            1.0 + j.amplitude * (2.0 * unit - 1.0)
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpadeSurrogate {
    constants: SurrogateConstants,
}

impl SpadeSurrogate {
    pub fn new(constants: SurrogateConstants) -> Self {
        Self { constants }
    }
}

impl Surrogate for SpadeSurrogate {
    fn platform(&self) -> PlatformId {
        PlatformId::Spade
    }

    fn version(&self) -> &str {
        &self.constants.version
    }

    fn runtime(
        &self,
        kernel: Kernel,
        m: &MatrixProfile,
        c: &ProgramConfig,
    ) -> Result<f64, OracleError> {
        let s = c.as_spade()?;
        let k = &self.constants.spade;
        let nnz = m.nnz as f64;
        let (g, w) = (m.stats.gini, m.stats.bandwidth);

        let tiles = ceil_div(m.rows, s.p_row) * ceil_div(m.cols, s.p_col);
        let reuse = clamp01(k.buffer_size / (s.p_col as f64 * self.constants.dense_width));
        let t_comp =
            kernel_factor(kernel) * nnz * (1.0 + 0.05 * ((s.s_split as f64).log2() - 6.0).abs());
        let mut t_mem = nnz * (2.0 - reuse);
        let mut t_pre = 0.0;
        if s.bypass {
            t_mem *= 0.65 + 0.5 * reuse;
        }
        if s.barrier {
            t_mem *= 1.0 - 0.2 * g;
        }
        if s.reorder {
            t_mem *= 1.0 - 0.35 * w;
            t_pre = k.preprocess_rate * nnz;
        }
        let t_sync = if s.barrier { k.sync_cost * tiles } else { 0.0 };
        let t = t_comp + t_mem + t_sync + t_pre + k.tile_overhead * tiles;
        Ok(t * jitter_factor(&self.constants, kernel, m, c))
    }
}

#[derive(Debug, Clone)]
pub struct CpuSurrogate {
    constants: SurrogateConstants,
}

impl CpuSurrogate {
    pub fn new(constants: SurrogateConstants) -> Self {
        Self { constants }
    }
}

impl Surrogate for CpuSurrogate {
    fn platform(&self) -> PlatformId {
        PlatformId::Cpu
    }

    fn version(&self) -> &str {
        &self.constants.version
    }

    fn runtime(
        &self,
        kernel: Kernel,
        m: &MatrixProfile,
        c: &ProgramConfig,
    ) -> Result<f64, OracleError> {
        let cfg = c.as_cpu()?;
        let k = &self.constants.cpu;
        let nest = map_pi_cpu(cfg.i_split, cfg.j_split, cfg.k_split, &cfg.order)?;
        let ord = match nest.innermost() {
            LoopSlot::K1 | LoopSlot::K3 => 1.0,
            _ => 1.0 + k.order_penalty,
        };
        let overflow = clamp01(cfg.j_split as f64 * self.constants.dense_width / k.cache_size);
        let reorder = if cfg.format_reorder {
            1.1 - 0.4 * m.stats.gini
        } else {
            1.0
        };
        let t_comp =
            kernel_factor(kernel) * m.nnz as f64 * ord * (1.0 + 0.8 * overflow) * reorder;
        let t_loop = k.loop_overhead
            * (m.rows as f64 / cfg.i_split as f64 + m.cols as f64 / cfg.j_split as f64);
        Ok((t_comp + t_loop) * jitter_factor(&self.constants, kernel, m, c))
    }
}

#[derive(Debug, Clone)]
pub struct GpuSurrogate {
    constants: SurrogateConstants,
}

impl GpuSurrogate {
    pub fn new(constants: SurrogateConstants) -> Self {
        Self { constants }
    }
}

impl Surrogate for GpuSurrogate {
    fn platform(&self) -> PlatformId {
        PlatformId::Gpu
    }

    fn version(&self) -> &str {
        &self.constants.version
    }

    fn runtime(
        &self,
        kernel: Kernel,
        m: &MatrixProfile,
        c: &ProgramConfig,
    ) -> Result<f64, OracleError> {
        let cfg = c.as_gpu()?;
        let k = &self.constants.gpu;
        let nest = map_pi_gpu(cfg.i_split, cfg.j_split, cfg.k_split, &cfg.order)?;
        let ord = match nest.innermost() {
            LoopSlot::K1 | LoopSlot::K3 => 1.0,
            _ => 1.0 + k.order_penalty,
        };
        let multiplier = |idx: u8| {
            let table = &k.category_multipliers;
            table[(idx as usize).min(table.len() - 1)]
        };
        let overflow =
            clamp01(cfg.j_split as f64 * self.constants.dense_width / k.shared_memory);
        let t_comp = kernel_factor(kernel)
            * m.nnz as f64
            * ord
            * (1.0 + 0.8 * overflow)
            * multiplier(cfg.binding)
            * multiplier(cfg.unroll);
        let t_loop = k.loop_overhead
            * (m.rows as f64 / cfg.i_split as f64 + m.cols as f64 / cfg.j_split as f64);
        Ok((t_comp + t_loop) * jitter_factor(&self.constants, kernel, m, c))
    }
}
