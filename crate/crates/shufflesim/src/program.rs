//! Program construction and loading: a label-aware instruction builder, flat
//! binary and hex-text loaders, and the immutable [`Program`] image the cores
//! execute.

use std::collections::HashMap;

use thiserror::Error;

use crate::isa::{self, EncodeError, Mnemonic};

/// An executable image plus the markers the measurement harness needs.
///
/// `trigger_start`/`trigger_end` are *instruction indices* bounding the
/// attacked window, modeling an attacker who can place a trigger signal
/// precisely. `critical_markers` flag the indices of secret-processing
/// instructions inside that window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub base_address: u32,
    pub words: Vec<u32>,
    pub data_segments: Vec<(u32, Vec<u8>)>,
    pub trigger_start: usize,
    pub trigger_end: usize,
    pub critical_markers: Vec<usize>,
    /// Where per-run input bytes are overlaid before execution, if any.
    pub input_region: Option<(u32, u32)>,
}

impl Program {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Serializes the instruction words as little-endian flat binary.
    pub fn to_flat_bytes(&self) -> Vec<u8> {
        self.words.iter().flat_map(|w| w.to_le_bytes()).collect()
    }

    pub fn to_hex_text(&self) -> String {
        let mut s = String::new();
        for w in &self.words {
            s.push_str(&format!("{w:08x}\n"));
        }
        s
    }

    fn validate(self) -> Result<Self, BuildError> {
        if self.words.is_empty() {
            return Err(BuildError::EmptyProgram);
        }
        if self.trigger_start > self.trigger_end || self.trigger_end >= self.words.len() {
            return Err(BuildError::BadTriggerWindow {
                start: self.trigger_start,
                end: self.trigger_end,
                len: self.words.len(),
            });
        }
        for &m in &self.critical_markers {
            if m < self.trigger_start || m > self.trigger_end {
                return Err(BuildError::MarkerOutsideTrigger { index: m });
            }
        }
        Ok(self)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BuildError {
    #[error("unresolved label `{0}`")]
    UnresolvedLabel(String),
    #[error("branch target `{label}` out of range ({offset} bytes)")]
    BranchOutOfRange { label: String, offset: i64 },
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error("program has no instructions")]
    EmptyProgram,
    #[error("image length must be a multiple of 4")]
    MisalignedImage,
    #[error("bad hex word on line {line}: {text}")]
    BadHexWord { line: usize, text: String },
    #[error("trigger window [{start}, {end}] invalid for {len} instructions")]
    BadTriggerWindow { start: usize, end: usize, len: usize },
    #[error("critical marker {index} outside the trigger window")]
    MarkerOutsideTrigger { index: usize },
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
}

#[derive(Debug, Clone)]
enum Target {
    Imm(i32),
    Label(String),
}

#[derive(Debug, Clone)]
struct PendingInstr {
    kind: Mnemonic,
    rd: u8,
    rs1: u8,
    rs2: u8,
    target: Target,
}

/// Instruction sequence builder with label resolution and marker placement.
///
/// Marker methods apply to the *next* emitted instruction, so markers can be
/// declared in reading order:
///
/// ```
/// use shufflesim::program::Asm;
/// let mut a = Asm::new(0);
/// a.addi(1, 0, 5);
/// a.label("halt");
/// a.jal(0, "halt"); // self-loop
/// let p = a.build().unwrap();
/// assert_eq!(p.words.len(), 2);
/// ```
#[derive(Debug, Default)]
pub struct Asm {
    base: u32,
    instrs: Vec<PendingInstr>,
    labels: HashMap<String, usize>,
    data: Vec<(u32, Vec<u8>)>,
    trigger_start: Option<usize>,
    trigger_end: Option<usize>,
    critical: Vec<usize>,
    input_region: Option<(u32, u32)>,
    duplicate_label: Option<String>,
}

impl Asm {
    pub fn new(base: u32) -> Self {
        Asm {
            base,
            ..Default::default()
        }
    }

    pub fn here(&self) -> usize {
        self.instrs.len()
    }

    pub fn label(&mut self, name: &str) -> &mut Self {
        let idx = self.instrs.len();
        if self.labels.insert(name.to_string(), idx).is_some() && self.duplicate_label.is_none() {
            // surfaced at build time to keep emit methods infallible
            self.duplicate_label = Some(name.to_string());
        }
        self
    }

    /// Marks the next emitted instruction as the trigger-window start.
    pub fn trigger_start(&mut self) -> &mut Self {
        self.trigger_start = Some(self.instrs.len());
        self
    }

    /// Marks the next emitted instruction as the trigger-window end.
    pub fn trigger_end(&mut self) -> &mut Self {
        self.trigger_end = Some(self.instrs.len());
        self
    }

    /// Flags the next emitted instruction as a critical operation.
    pub fn critical(&mut self) -> &mut Self {
        self.critical.push(self.instrs.len());
        self
    }

    pub fn data(&mut self, addr: u32, bytes: &[u8]) -> &mut Self {
        self.data.push((addr, bytes.to_vec()));
        self
    }

    pub fn input_region(&mut self, addr: u32, len: u32) -> &mut Self {
        self.input_region = Some((addr, len));
        self
    }

    /// Emits one instruction with explicit operands and immediate.
    pub fn instr(&mut self, kind: Mnemonic, rd: u8, rs1: u8, rs2: u8, imm: i32) -> &mut Self {
        self.instrs.push(PendingInstr {
            kind,
            rd,
            rs1,
            rs2,
            target: Target::Imm(imm),
        });
        self
    }

    fn ctrl(&mut self, kind: Mnemonic, rd: u8, rs1: u8, rs2: u8, label: &str) -> &mut Self {
        self.instrs.push(PendingInstr {
            kind,
            rd,
            rs1,
            rs2,
            target: Target::Label(label.to_string()),
        });
        self
    }

    // Convenience emitters for the handful of shapes the workloads use.

    pub fn addi(&mut self, rd: u8, rs1: u8, imm: i32) -> &mut Self {
        self.instr(Mnemonic::Addi, rd, rs1, 0, imm)
    }

    pub fn op(&mut self, kind: Mnemonic, rd: u8, rs1: u8, rs2: u8) -> &mut Self {
        self.instr(kind, rd, rs1, rs2, 0)
    }

    pub fn load(&mut self, kind: Mnemonic, rd: u8, offset: i32, base: u8) -> &mut Self {
        self.instr(kind, rd, base, 0, offset)
    }

    pub fn store(&mut self, kind: Mnemonic, src: u8, offset: i32, base: u8) -> &mut Self {
        self.instr(kind, 0, base, src, offset)
    }

    pub fn lui(&mut self, rd: u8, imm: i32) -> &mut Self {
        self.instr(Mnemonic::Lui, rd, 0, 0, imm)
    }

    /// Loads a 32-bit constant, emitting one or two instructions.
    pub fn li(&mut self, rd: u8, value: i32) -> &mut Self {
        if (-2048..=2047).contains(&value) {
            return self.addi(rd, 0, value);
        }
        let upper = (value.wrapping_add(0x800) as u32) & 0xFFFF_F000;
        let lower = value.wrapping_sub(upper as i32);
        self.lui(rd, upper as i32);
        if lower != 0 {
            self.addi(rd, rd, lower);
        }
        self
    }

    pub fn branch(&mut self, kind: Mnemonic, rs1: u8, rs2: u8, label: &str) -> &mut Self {
        self.ctrl(kind, 0, rs1, rs2, label)
    }

    pub fn jal(&mut self, rd: u8, label: &str) -> &mut Self {
        self.ctrl(Mnemonic::Jal, rd, 0, 0, label)
    }

    pub fn jalr(&mut self, rd: u8, rs1: u8, imm: i32) -> &mut Self {
        self.instr(Mnemonic::Jalr, rd, rs1, 0, imm)
    }

    pub fn ecall(&mut self) -> &mut Self {
        self.instr(Mnemonic::Ecall, 0, 0, 0, 0)
    }

    pub fn csrrw(&mut self, rd: u8, csr: i32, rs1: u8) -> &mut Self {
        self.instr(Mnemonic::Csrrw, rd, rs1, 0, csr)
    }

    pub fn build(self) -> Result<Program, BuildError> {
        if let Some(name) = self.duplicate_label {
            return Err(BuildError::DuplicateLabel(name));
        }
        let mut words = Vec::with_capacity(self.instrs.len());
        for (idx, pi) in self.instrs.iter().enumerate() {
            let imm = match &pi.target {
                Target::Imm(v) => *v,
                Target::Label(name) => {
                    let target = *self
                        .labels
                        .get(name)
                        .ok_or_else(|| BuildError::UnresolvedLabel(name.clone()))?;
                    let offset = (target as i64 - idx as i64) * 4;
                    let in_range = match pi.kind {
                        Mnemonic::Jal => (-(1 << 20)..(1 << 20)).contains(&offset),
                        _ => (-4096..4096).contains(&offset),
                    };
                    if !in_range {
                        return Err(BuildError::BranchOutOfRange {
                            label: name.clone(),
                            offset,
                        });
                    }
                    offset as i32
                }
            };
            words.push(isa::encode(pi.kind, pi.rd, pi.rs1, pi.rs2, imm)?);
        }
        let end_default = words.len().saturating_sub(1);
        Program {
            base_address: self.base,
            words,
            data_segments: self.data,
            trigger_start: self.trigger_start.unwrap_or(0),
            trigger_end: self.trigger_end.unwrap_or(end_default),
            critical_markers: self.critical,
            input_region: self.input_region,
        }
        .validate()
    }
}

/// Assembles a flat little-endian binary image. The trigger window defaults
/// to the whole program.
pub fn load_flat(bytes: &[u8], base_address: u32) -> Result<Program, BuildError> {
    if bytes.is_empty() {
        return Err(BuildError::EmptyProgram);
    }
    if bytes.len() % 4 != 0 {
        return Err(BuildError::MisalignedImage);
    }
    let words: Vec<u32> = bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let end = words.len() - 1;
    Program {
        base_address,
        words,
        data_segments: Vec::new(),
        trigger_start: 0,
        trigger_end: end,
        critical_markers: Vec::new(),
        input_region: None,
    }
    .validate()
}

/// Parses the hex text format: one 8-hex-digit word per line, `#` comments,
/// blank lines ignored.
pub fn load_hex(text: &str, base_address: u32) -> Result<Program, BuildError> {
    let mut words = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let item = line.split('#').next().unwrap_or("").trim();
        if item.is_empty() {
            continue;
        }
        if item.len() != 8 {
            return Err(BuildError::BadHexWord {
                line: lineno + 1,
                text: item.to_string(),
            });
        }
        let w = u32::from_str_radix(item, 16).map_err(|_| BuildError::BadHexWord {
            line: lineno + 1,
            text: item.to_string(),
        })?;
        words.push(w);
    }
    if words.is_empty() {
        return Err(BuildError::EmptyProgram);
    }
    let end = words.len() - 1;
    Program {
        base_address,
        words,
        data_segments: Vec::new(),
        trigger_start: 0,
        trigger_end: end,
        critical_markers: Vec::new(),
        input_region: None,
    }
    .validate()
}
