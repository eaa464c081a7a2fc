//! Core domain types: SM resource configuration, kernel grid descriptions,
//! and the residency (occupancy) computation that every other module builds on.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Abstract time unit used throughout the simulator.
pub type Cycle = u64;

/// Per-SM resource limits of the simulated GPU.
///
/// Resources are allocated at thread-block granularity: a block claims its
/// threads, warps, registers, shared memory and one block slot for its whole
/// lifetime.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmConfig {
    pub num_sms: u32,
    pub threads_per_sm: u32,
    pub registers_per_sm: u32,
    pub shmem_per_sm: u32,
    pub max_blocks_per_sm: u32,
    pub max_warps_per_sm: u32,
    pub warp_size: u32,
}

impl SmConfig {
    /// The GTX 480 (Fermi) configuration: 15 SMs, 1536 threads, 32768
    /// registers, 48KB shared memory, 8 block slots and 48 warps per SM.
    pub fn gtx480() -> Self {
        Self {
            num_sms: 15,
            threads_per_sm: 1536,
            registers_per_sm: 32768,
            shmem_per_sm: 48 * 1024,
            max_blocks_per_sm: 8,
            max_warps_per_sm: 48,
            warp_size: 32,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("num_sms", self.num_sms),
            ("threads_per_sm", self.threads_per_sm),
            ("registers_per_sm", self.registers_per_sm),
            ("shmem_per_sm", self.shmem_per_sm),
            ("max_blocks_per_sm", self.max_blocks_per_sm),
            ("max_warps_per_sm", self.max_warps_per_sm),
            ("warp_size", self.warp_size),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(ModelError::NonPositive { field: name });
            }
        }
        if self.max_blocks_per_sm > self.max_warps_per_sm {
            return Err(ModelError::BlocksExceedWarps {
                blocks: self.max_blocks_per_sm,
                warps: self.max_warps_per_sm,
            });
        }
        Ok(())
    }
}

/// Static description of one kernel grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    /// Workload-level identifier (e.g. the benchmark name).
    pub id: String,
    /// Kernel function name, informational.
    #[serde(default)]
    pub name: String,
    pub total_blocks: u64,
    pub threads_per_block: u32,
    #[serde(default)]
    pub regs_per_thread: u32,
    #[serde(default)]
    pub shmem_per_block: u32,
    /// Pins the maximum residency when the limiting resource (typically
    /// register pressure) is not captured by the other fields.
    #[serde(default)]
    pub residency_override: Option<u32>,
    /// Nominal duration of one thread block in cycles.
    pub base_block_cycles: Cycle,
    /// Name of the duration model this kernel runs under.
    #[serde(default = "default_model_ref")]
    pub duration_model_ref: String,
    #[serde(default)]
    pub arrival_cycle: Cycle,
    #[serde(default)]
    pub alone_runtime_hint: Option<Cycle>,
}

fn default_model_ref() -> String {
    "constant".to_owned()
}

impl KernelSpec {
    /// Minimal spec for synthetic single-kernel experiments.
    pub fn synthetic(id: &str, total_blocks: u64, residency: u32, block_cycles: Cycle) -> Self {
        Self {
            id: id.to_owned(),
            name: id.to_owned(),
            total_blocks,
            threads_per_block: 32,
            regs_per_thread: 0,
            shmem_per_block: 0,
            residency_override: Some(residency),
            base_block_cycles: block_cycles,
            duration_model_ref: default_model_ref(),
            arrival_cycle: 0,
            alone_runtime_hint: None,
        }
    }

    /// Warps claimed by one block of this kernel.
    pub fn warps_per_block(&self, sm: &SmConfig) -> u32 {
        self.threads_per_block.div_ceil(sm.warp_size)
    }

    pub fn validate(&self, sm: &SmConfig) -> Result<(), ModelError> {
        if self.total_blocks == 0 {
            return Err(ModelError::NonPositive { field: "total_blocks" });
        }
        if self.base_block_cycles == 0 {
            return Err(ModelError::NonPositive { field: "base_block_cycles" });
        }
        if self.threads_per_block == 0 || self.threads_per_block > sm.threads_per_sm {
            return Err(ModelError::ThreadsPerBlock {
                kernel: self.id.clone(),
                tpb: self.threads_per_block,
                limit: sm.threads_per_sm,
            });
        }
        if let Some(r) = self.residency_override {
            if r == 0 || r > sm.max_blocks_per_sm {
                return Err(ModelError::BadOverride { kernel: self.id.clone(), value: r });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("{field} must be strictly positive")]
    NonPositive { field: &'static str },
    #[error("max_blocks_per_sm ({blocks}) exceeds max_warps_per_sm ({warps})")]
    BlocksExceedWarps { blocks: u32, warps: u32 },
    #[error("kernel {kernel}: threads_per_block {tpb} outside 1..={limit}")]
    ThreadsPerBlock { kernel: String, tpb: u32, limit: u32 },
    #[error("kernel {kernel}: residency_override {value} outside 1..=max_blocks_per_sm")]
    BadOverride { kernel: String, value: u32 },
    #[error("kernel {kernel}: residency limit {limit} evaluates to zero blocks per SM")]
    ZeroResidency { kernel: String, limit: &'static str },
}

/// Maximum number of blocks of `spec` that fit on one SM at a time.
///
/// Takes the minimum over the block-slot, warp, thread, register and
/// shared-memory limits, or `residency_override` when present. Mirrors the
/// occupancy-calculator arithmetic without hardware allocation granularity.
pub fn max_residency(spec: &KernelSpec, sm: &SmConfig) -> Result<u32, ModelError> {
    spec.validate(sm)?;
    if let Some(r) = spec.residency_override {
        return Ok(r);
    }
    let mut limit = sm.max_blocks_per_sm;

    let warp_limit = sm.max_warps_per_sm / spec.warps_per_block(sm);
    if warp_limit == 0 {
        return Err(ModelError::ZeroResidency { kernel: spec.id.clone(), limit: "warps" });
    }
    limit = limit.min(warp_limit);

    let thread_limit = sm.threads_per_sm / spec.threads_per_block;
    limit = limit.min(thread_limit);

    if spec.regs_per_thread > 0 {
        let per_block = spec.regs_per_thread as u64 * spec.threads_per_block as u64;
        let reg_limit = (sm.registers_per_sm as u64 / per_block) as u32;
        if reg_limit == 0 {
            return Err(ModelError::ZeroResidency { kernel: spec.id.clone(), limit: "registers" });
        }
        limit = limit.min(reg_limit);
    }
    if spec.shmem_per_block > 0 {
        let shmem_limit = sm.shmem_per_sm / spec.shmem_per_block;
        if shmem_limit == 0 {
            return Err(ModelError::ZeroResidency {
                kernel: spec.id.clone(),
                limit: "shared memory",
            });
        }
        limit = limit.min(shmem_limit);
    }
    debug_assert!(limit >= 1);
    Ok(limit)
}
