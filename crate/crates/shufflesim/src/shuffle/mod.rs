//! The shuffling core: fetch into an N-entry buffer, rename onto a larger
//! physical register file, track dependencies, select ready instructions at
//! random, optionally speculate across control flow under checkpoints, and
//! insert dummy instructions.

mod buffer;
mod core;
mod predict;
mod select;

pub use buffer::{compute_deps, mem_alias, BufferEntry, DepInputs};
pub use core::{run_shuffled, ShuffleCore};
pub use predict::{predict, BranchPredictor, PredictorKind, ReturnAddressStack};
pub use select::{select_index, DTable};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Design option flags.
///
/// - `m`: optimized load/store dependencies (base register + offset ranges)
///   instead of serializing all memory operations.
/// - `j`: compute JAL targets at fetch, so plain jumps never stall.
/// - `b`: branch prediction with checkpointed speculative execution (one
///   checkpoint).
/// - `r`: return address stack for JALR returns.
/// - `c`: multiple simultaneous checkpoints; requires `b`.
/// - `f`: select a ready control-flow instruction as soon as possible.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptionFlags {
    pub m: bool,
    pub j: bool,
    pub b: bool,
    pub r: bool,
    pub c: bool,
    pub f: bool,
}

impl OptionFlags {
    /// Parses a compact flag string such as "MJB" or "f" (case-insensitive).
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        let mut o = OptionFlags::default();
        for ch in s.chars() {
            match ch.to_ascii_uppercase() {
                'M' => o.m = true,
                'J' => o.j = true,
                'B' => o.b = true,
                'R' => o.r = true,
                'C' => o.c = true,
                'F' => o.f = true,
                other => return Err(ConfigError::UnknownOption(other)),
            }
        }
        Ok(o)
    }

    pub fn to_compact_string(self) -> String {
        let mut s = String::new();
        for (on, ch) in [
            (self.m, 'M'),
            (self.j, 'J'),
            (self.b, 'B'),
            (self.r, 'R'),
            (self.c, 'C'),
            (self.f, 'F'),
        ] {
            if on {
                s.push(ch);
            }
        }
        s
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("buffer size must be 2, 4, or 8 (got {0})")]
    InvalidBufferSize(u8),
    #[error("dummy interval must be 0, 4, 8, or 16 (got {0})")]
    InvalidDummyInterval(u8),
    #[error("option C requires option B")]
    MultipleCheckpointsRequireB,
    #[error("physical register count {p} too small for buffer size {n} (need >= 32 + N)")]
    TooFewPhysRegs { p: u16, n: u8 },
    #[error("physical register count {0} exceeds the supported maximum of 64")]
    TooManyPhysRegs(u16),
    #[error("unknown option flag '{0}'")]
    UnknownOption(char),
    #[error("ras depth must be nonzero when option R is enabled")]
    ZeroRasDepth,
}

/// Full configuration of one shuffling-core instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreConfig {
    /// Shuffle buffer size N; 2, 4, or 8.
    pub buffer_size: u8,
    pub options: OptionFlags,
    pub predictor: PredictorKind,
    pub ras_depth: u8,
    /// Dummy instruction interval: a dummy executes every 0..=DII real
    /// instructions. 0 disables dummies.
    pub dummy_interval: u8,
    /// Physical register count P (>= 32 + N).
    pub phys_regs: u16,
    pub seed: u64,
    /// Optional [lo, hi) address interval treated as memory-mapped I/O.
    pub mmio_range: Option<(u32, u32)>,
    /// Initial value of the protection-enable CSR bit.
    pub protect_enable: bool,
}

impl CoreConfig {
    /// A validated configuration with defaults: no options, two-bit
    /// predictor, no dummies, P = 32 + 2N, protection on.
    pub fn new(buffer_size: u8) -> Self {
        CoreConfig {
            buffer_size,
            options: OptionFlags::default(),
            predictor: PredictorKind::TwoBit,
            ras_depth: 8,
            dummy_interval: 0,
            phys_regs: 32 + 2 * buffer_size as u16,
            seed: 0,
            mmio_range: None,
            protect_enable: true,
        }
    }

    pub fn with_options(mut self, options: OptionFlags) -> Self {
        self.options = options;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_dummy_interval(mut self, dii: u8) -> Self {
        self.dummy_interval = dii;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !matches!(self.buffer_size, 2 | 4 | 8) {
            return Err(ConfigError::InvalidBufferSize(self.buffer_size));
        }
        if !matches!(self.dummy_interval, 0 | 4 | 8 | 16) {
            return Err(ConfigError::InvalidDummyInterval(self.dummy_interval));
        }
        if self.options.c && !self.options.b {
            return Err(ConfigError::MultipleCheckpointsRequireB);
        }
        if self.phys_regs < 32 + self.buffer_size as u16 {
            return Err(ConfigError::TooFewPhysRegs {
                p: self.phys_regs,
                n: self.buffer_size,
            });
        }
        if self.phys_regs > 64 {
            return Err(ConfigError::TooManyPhysRegs(self.phys_regs));
        }
        if self.options.r && self.ras_depth == 0 {
            return Err(ConfigError::ZeroRasDepth);
        }
        Ok(())
    }

    /// Simultaneous checkpoint capacity: 2 with option C, 1 with B, else 0.
    pub fn checkpoint_capacity(&self) -> usize {
        if self.options.c {
            2
        } else if self.options.b {
            1
        } else {
            0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn option_parsing() {
        let o = OptionFlags::parse("MJb").unwrap();
        assert!(o.m && o.j && o.b && !o.r && !o.c && !o.f);
        assert_eq!(o.to_compact_string(), "MJB");
        assert!(OptionFlags::parse("X").is_err());
    }

    #[test]
    fn c_requires_b() {
        let mut c = CoreConfig::new(4);
        c.options = OptionFlags::parse("C").unwrap();
        assert_eq!(c.validate(), Err(ConfigError::MultipleCheckpointsRequireB));
        c.options = OptionFlags::parse("BC").unwrap();
        assert!(c.validate().is_ok());
    }

    #[test]
    fn buffer_and_register_bounds() {
        assert!(CoreConfig::new(4).validate().is_ok());
        assert!(CoreConfig::new(3).validate().is_err());
        let mut c = CoreConfig::new(8);
        c.phys_regs = 39;
        assert!(c.validate().is_err());
        c.phys_regs = 40;
        assert!(c.validate().is_ok());
    }
}
