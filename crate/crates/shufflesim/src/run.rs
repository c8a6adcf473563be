//! Execution results shared by the in-order and shuffling cores: per-cycle
//! event logs, stall accounting, and terminal architectural state.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::isa::MemWidth;
use crate::mem::SparseMem;

/// Why a cycle made no forward progress.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StallCause {
    /// Refill while waiting for (or after resolving) a branch or plain jump.
    Branch,
    /// Checkpoint creation blocked by dependent loads/stores in the buffer.
    Mem,
    /// Refill while waiting for (or after resolving) an indirect jump.
    Jalr,
    /// Rollback after an exception raised by a speculated instruction.
    HwFault,
    /// Refill after discarding mispredicted prefetch entries or a checkpoint.
    Discard,
}

impl StallCause {
    pub const ALL: [StallCause; 5] = [
        StallCause::Branch,
        StallCause::Mem,
        StallCause::Jalr,
        StallCause::HwFault,
        StallCause::Discard,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StallCause::Branch => "branch",
            StallCause::Mem => "mem",
            StallCause::Jalr => "jalr",
            StallCause::HwFault => "hw_fault",
            StallCause::Discard => "discard",
        }
    }
}

/// Architecturally visible value movement of one executed instruction,
/// recorded for leakage modeling.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WriteEvent {
    /// Value written to a destination register, if any.
    pub reg_value: Option<u32>,
    /// Store address, value, and width, if the instruction was a store.
    pub mem_write: Option<(u32, u32, MemWidth)>,
}

impl WriteEvent {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn reg(value: u32) -> Self {
        WriteEvent {
            reg_value: Some(value),
            mem_write: None,
        }
    }

    /// Hamming weight of everything written this cycle; the leakage proxy.
    pub fn hamming_weight(&self) -> u32 {
        self.reg_value.map_or(0, u32::count_ones)
            + self.mem_write.map_or(0, |(_, v, w)| (v & width_mask(w)).count_ones())
    }
}

fn width_mask(w: MemWidth) -> u32 {
    match w {
        MemWidth::Byte => 0xFF,
        MemWidth::Half => 0xFFFF,
        MemWidth::Word => u32::MAX,
    }
}

/// What happened in one simulated cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    /// A program instruction executed.
    Exec {
        pc: u32,
        /// Fetch-order index of the dynamic instruction.
        dyn_index: u64,
        /// Buffer slot it was selected from (0 for the in-order core).
        slot: u8,
        /// Number of ready instructions this cycle; absent on in-order runs.
        ready_count: Option<u8>,
        write: WriteEvent,
    },
    /// A dummy instruction executed in place of a real selection.
    DummyExec { write: WriteEvent },
    /// No instruction executed.
    Stall { cause: StallCause },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleEvent {
    pub cycle: u64,
    pub action: Action,
}

impl CycleEvent {
    pub fn is_real_exec(&self) -> bool {
        matches!(self.action, Action::Exec { .. })
    }

    pub fn write(&self) -> WriteEvent {
        match self.action {
            Action::Exec { write, .. } | Action::DummyExec { write } => write,
            Action::Stall { .. } => WriteEvent::none(),
        }
    }
}

/// Per-cause stall cycle totals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StallBreakdown {
    pub branch: u64,
    pub mem: u64,
    pub jalr: u64,
    pub hw_fault: u64,
    pub discard: u64,
}

impl StallBreakdown {
    pub fn add(&mut self, cause: StallCause) {
        *self.slot(cause) += 1;
    }

    pub fn get(&self, cause: StallCause) -> u64 {
        match cause {
            StallCause::Branch => self.branch,
            StallCause::Mem => self.mem,
            StallCause::Jalr => self.jalr,
            StallCause::HwFault => self.hw_fault,
            StallCause::Discard => self.discard,
        }
    }

    fn slot(&mut self, cause: StallCause) -> &mut u64 {
        match cause {
            StallCause::Branch => &mut self.branch,
            StallCause::Mem => &mut self.mem,
            StallCause::Jalr => &mut self.jalr,
            StallCause::HwFault => &mut self.hw_fault,
            StallCause::Discard => &mut self.discard,
        }
    }

    pub fn total(&self) -> u64 {
        self.branch + self.mem + self.jalr + self.hw_fault + self.discard
    }

    pub fn accumulate(&mut self, other: &StallBreakdown) {
        self.branch += other.branch;
        self.mem += other.mem;
        self.jalr += other.jalr;
        self.hw_fault += other.hw_fault;
        self.discard += other.discard;
    }
}

/// Complete record of one run: per-cycle events, final architectural state,
/// and the cycle positions of trigger and critical markers.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub events: Vec<CycleEvent>,
    pub cycles: u64,
    /// Committed (non-dummy) instruction executions, including any
    /// rollback-forced re-executions.
    pub exec_cycles: u64,
    pub dummy_cycles: u64,
    pub stalls: StallBreakdown,
    /// Final logical register file (x0..x31).
    pub final_regs: [u32; 32],
    pub final_mem: SparseMem,
    /// Cycle of the first execution of the trigger-start instruction and the
    /// last execution of the trigger-end instruction.
    pub trigger_window: Option<(u64, u64)>,
    /// Execution cycle of each dynamic instance of a critical-marker
    /// instruction, ordered by dynamic program order.
    pub critical_cycles: Vec<u64>,
}

impl RunResult {
    /// Architectural digest used by equivalence checks: registers plus all
    /// nonzero memory bytes.
    pub fn arch_digest(&self) -> ([u32; 32], Vec<(u32, u8)>) {
        (self.final_regs, self.final_mem.nonzero_bytes())
    }
}

/// Knobs shared by both cores' run loops.
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    /// Non-termination guard.
    pub max_cycles: u64,
    /// Halt once the trigger-end instruction has committed; trace campaigns
    /// that only analyze the trigger window use this to skip the tail.
    pub stop_after_trigger: bool,
    /// Enable the instrumented memory-ordering and buffer-fullness checks in
    /// the shuffling core.
    pub strict_checks: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            max_cycles: 20_000_000,
            stop_after_trigger: false,
            strict_checks: true,
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum RunError {
    #[error("illegal instruction 0x{word:08x} at pc 0x{pc:08x}")]
    IllegalInstruction { word: u32, pc: u32 },
    #[error("misaligned {width:?} access to 0x{addr:08x} at pc 0x{pc:08x}")]
    MisalignedAccess { pc: u32, addr: u32, width: MemWidth },
    #[error("fetch left program image at pc 0x{pc:08x}")]
    FetchOutOfRange { pc: u32 },
    #[error("exceeded max cycles ({limit})")]
    MaxCyclesExceeded { limit: u64 },
    #[error("no instruction ready and no refill possible at cycle {cycle}")]
    Deadlock { cycle: u64 },
    #[error("rename stalled: free physical register set empty at pc 0x{pc:08x}")]
    RenameStall { pc: u32 },
    #[error("memory-mapped I/O access to 0x{addr:08x} at pc 0x{pc:08x} with optimized memory dependencies enabled")]
    MmioUnderOptimizedMem { pc: u32, addr: u32 },
    #[error("load at pc 0x{pc:08x} (dyn {load_dyn}) observed a byte written by a later store (dyn {store_dyn}) at 0x{addr:08x}")]
    MemoryOrderViolation {
        pc: u32,
        addr: u32,
        load_dyn: u64,
        store_dyn: u64,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
