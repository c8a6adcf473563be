//! In-order, one-instruction-per-cycle functional RV32IM model.
//!
//! This is the golden model: the correctness oracle for shuffled execution
//! and the unprotected baseline for overhead and attack comparisons. There is
//! no randomness anywhere in this module.

use std::collections::HashMap;

use crate::isa::{self, DecodedInstr, Mnemonic, OpClass};
use crate::mem::SparseMem;
use crate::program::Program;
use crate::run::{Action, CycleEvent, RunError, RunOptions, RunResult, StallBreakdown, WriteEvent};
use crate::semantics::{alu_op, branch_taken, extend_load};

/// CSR address of the protection enable bit (bit 0), in the custom
/// read/write range.
pub const PROTECT_CSR: u32 = 0x7C0;

/// Minimal CSR file: the protection bit plus scratch storage so CSR
/// instructions have consistent read/write semantics in both cores.
#[derive(Debug, Clone, Default)]
pub struct CsrFile {
    values: HashMap<u32, u32>,
}

impl CsrFile {
    pub fn with_protect(enable: bool) -> Self {
        let mut f = CsrFile::default();
        f.values.insert(PROTECT_CSR, enable as u32);
        f
    }

    pub fn read(&self, addr: u32) -> u32 {
        self.values.get(&addr).copied().unwrap_or(0)
    }

    pub fn write(&mut self, addr: u32, value: u32) {
        self.values.insert(addr, value);
    }

    pub fn protect_enabled(&self) -> bool {
        self.read(PROTECT_CSR) & 1 != 0
    }
}

/// Architectural state of the in-order model.
#[derive(Debug, Clone)]
pub struct ArchState {
    pub regs: [u32; 32],
    pub pc: u32,
    pub mem: SparseMem,
    pub halted: bool,
    pub csrs: CsrFile,
}

impl ArchState {
    pub fn new(pc: u32) -> Self {
        ArchState {
            regs: [0; 32],
            pc,
            mem: SparseMem::new(),
            halted: false,
            csrs: CsrFile::default(),
        }
    }

    fn read_reg(&self, r: Option<u8>) -> u32 {
        match r {
            Some(0) | None => 0,
            Some(r) => self.regs[r as usize],
        }
    }

    fn write_reg(&mut self, r: Option<u8>, value: u32) -> Option<u32> {
        match r {
            Some(r) if r != 0 => {
                self.regs[r as usize] = value;
                Some(value)
            }
            _ => None,
        }
    }
}

pub fn check_alignment(instr: &DecodedInstr, addr: u32) -> Result<(), RunError> {
    let width = instr.mem_width.expect("memory instruction");
    if addr % width.bytes() != 0 {
        return Err(RunError::MisalignedAccess {
            pc: instr.pc,
            addr,
            width,
        });
    }
    Ok(())
}

/// Shared CSR read/modify/write semantics; returns (old value for rd, new
/// value to write if any).
pub fn csr_semantics(instr: &DecodedInstr, old: u32, rs1_value: u32) -> (u32, Option<u32>) {
    use Mnemonic::*;
    let uimm = instr.csr_uimm();
    match instr.kind {
        Csrrw => (old, Some(rs1_value)),
        Csrrs => {
            let write = matches!(instr.rs1, Some(r) if r != 0);
            (old, write.then_some(old | rs1_value))
        }
        Csrrc => {
            let write = matches!(instr.rs1, Some(r) if r != 0);
            (old, write.then_some(old & !rs1_value))
        }
        Csrrwi => (old, Some(uimm)),
        Csrrsi => (old, (uimm != 0).then_some(old | uimm)),
        Csrrci => (old, (uimm != 0).then_some(old & !uimm)),
        other => unreachable!("csr_semantics called with {other:?}"),
    }
}

/// Applies one decoded instruction to the state. Branches and jumps update
/// `pc`; everything else advances it by 4. The returned [`WriteEvent`]
/// records the written register value and/or store value for leakage
/// modeling.
pub fn step_inorder(state: &mut ArchState, instr: &DecodedInstr) -> Result<WriteEvent, RunError> {
    debug_assert!(!state.halted);
    let mut event = WriteEvent::none();
    let mut next_pc = instr.pc.wrapping_add(4);
    let a = state.read_reg(instr.rs1);
    let b = state.read_reg(instr.rs2);

    match instr.opclass {
        OpClass::Alu | OpClass::MulDiv => {
            event.reg_value = state.write_reg(instr.rd, alu_op(instr.kind, a, b));
        }
        OpClass::AluImm => {
            event.reg_value = state.write_reg(instr.rd, alu_op(instr.kind, a, instr.imm as u32));
        }
        OpClass::UpperImm => {
            let v = match instr.kind {
                Mnemonic::Lui => instr.imm as u32,
                _ => instr.pc.wrapping_add(instr.imm as u32),
            };
            event.reg_value = state.write_reg(instr.rd, v);
        }
        OpClass::Load => {
            let addr = a.wrapping_add(instr.imm as u32);
            check_alignment(instr, addr)?;
            let raw = state.mem.read(addr, instr.mem_width.unwrap());
            event.reg_value = state.write_reg(instr.rd, extend_load(instr.kind, raw));
        }
        OpClass::Store => {
            let addr = a.wrapping_add(instr.imm as u32);
            check_alignment(instr, addr)?;
            let width = instr.mem_width.unwrap();
            state.mem.write(addr, b, width);
            event.mem_write = Some((addr, b, width));
        }
        OpClass::Branch => {
            if branch_taken(instr.kind, a, b) {
                next_pc = instr.pc.wrapping_add(instr.imm as u32);
            }
        }
        OpClass::Jal => {
            event.reg_value = state.write_reg(instr.rd, instr.pc.wrapping_add(4));
            next_pc = instr.pc.wrapping_add(instr.imm as u32);
        }
        OpClass::Jalr => {
            event.reg_value = state.write_reg(instr.rd, instr.pc.wrapping_add(4));
            next_pc = a.wrapping_add(instr.imm as u32) & !1;
        }
        OpClass::Fence => {}
        OpClass::Env => {
            state.halted = true;
        }
        OpClass::Csr => {
            let addr = instr.imm as u32;
            let (old, new) = csr_semantics(instr, state.csrs.read(addr), a);
            if let Some(v) = new {
                state.csrs.write(addr, v);
            }
            event.reg_value = state.write_reg(instr.rd, old);
        }
    }

    state.pc = next_pc;
    Ok(event)
}

/// Loads program data segments and overlays run inputs at the input region.
pub fn init_memory(program: &Program, inputs: &[u8]) -> SparseMem {
    let mut mem = SparseMem::new();
    for (addr, bytes) in &program.data_segments {
        mem.write_bytes(*addr, bytes);
    }
    if let Some((addr, len)) = program.input_region {
        let n = inputs.len().min(len as usize);
        mem.write_bytes(addr, &inputs[..n]);
    }
    mem
}

/// Decodes every word of the program once. Entries that fail to decode stay
/// as errors and only surface if executed (or fetched) at run time.
pub fn predecode(program: &Program) -> Vec<Result<DecodedInstr, RunError>> {
    program
        .words
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let pc = program.base_address.wrapping_add(i as u32 * 4);
            isa::decode(w, pc).map_err(|_| RunError::IllegalInstruction { word: w, pc })
        })
        .collect()
}

pub fn instr_index(program: &Program, pc: u32) -> Option<usize> {
    let off = pc.wrapping_sub(program.base_address);
    if off % 4 != 0 {
        return None;
    }
    let idx = (off / 4) as usize;
    (idx < program.words.len()).then_some(idx)
}

/// Runs the program to completion in order, one instruction per cycle.
/// The cycle count equals the dynamic instruction count.
pub fn run_inorder(
    program: &Program,
    inputs: &[u8],
    options: &RunOptions,
) -> Result<RunResult, RunError> {
    let decoded = predecode(program);
    let mut state = ArchState::new(program.base_address);
    state.mem = init_memory(program, inputs);

    let mut is_critical = vec![false; program.words.len()];
    for &m in &program.critical_markers {
        is_critical[m] = true;
    }

    let mut events = Vec::new();
    let mut critical_cycles = Vec::new();
    let mut trigger_start_cycle: Option<u64> = None;
    let mut trigger_end_cycle: Option<u64> = None;
    let mut dyn_index = 0u64;

    while !state.halted {
        let cycle = events.len() as u64;
        if cycle >= options.max_cycles {
            return Err(RunError::MaxCyclesExceeded {
                limit: options.max_cycles,
            });
        }
        let idx =
            instr_index(program, state.pc).ok_or(RunError::FetchOutOfRange { pc: state.pc })?;
        let instr = decoded[idx].clone()?;
        let write = step_inorder(&mut state, &instr)?;
        events.push(CycleEvent {
            cycle,
            action: Action::Exec {
                pc: instr.pc,
                dyn_index,
                slot: 0,
                ready_count: None,
                write,
            },
        });
        if idx == program.trigger_start && trigger_start_cycle.is_none() {
            trigger_start_cycle = Some(cycle);
        }
        if idx == program.trigger_end {
            trigger_end_cycle = Some(cycle);
        }
        if is_critical[idx] {
            critical_cycles.push(cycle);
        }
        dyn_index += 1;

        if options.stop_after_trigger && trigger_end_cycle.is_some() {
            break;
        }
    }

    let cycles = events.len() as u64;
    Ok(RunResult {
        exec_cycles: cycles,
        dummy_cycles: 0,
        stalls: StallBreakdown::default(),
        final_regs: state.regs,
        final_mem: state.mem,
        trigger_window: match (trigger_start_cycle, trigger_end_cycle) {
            (Some(s), Some(e)) if s <= e => Some((s, e)),
            _ => None,
        },
        critical_cycles,
        events,
        cycles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::Asm;

    fn run(asm: &mut Asm) -> RunResult {
        let p = std::mem::take(asm).build().unwrap();
        run_inorder(&p, &[], &RunOptions::default()).unwrap()
    }

    #[test]
    fn add_computes() {
        let mut a = Asm::new(0);
        a.addi(2, 0, 2).addi(3, 0, 3).op(Mnemonic::Add, 1, 2, 3).ecall();
        let r = run(&mut a);
        assert_eq!(r.final_regs[1], 5);
        assert_eq!(r.cycles, 4);
    }

    #[test]
    fn load_store_ordering_listing() {
        // lw r1, 4(r2); sw r3, 0(r4); lw r5, 4(r4) with r2+4 == r4: the
        // in-order result is the correct one the shuffled core must preserve.
        let mut a = Asm::new(0);
        a.addi(2, 0, 0x100);
        a.addi(4, 0, 0x104);
        a.addi(6, 0, 11);
        a.store(Mnemonic::Sw, 6, 0, 4); // mem[0x104] = 11 (pre-store value)
        a.addi(3, 0, 77);
        a.load(Mnemonic::Lw, 1, 4, 2); // r1 = mem[r2+4] = mem[0x104] = 11
        a.store(Mnemonic::Sw, 3, 0, 4); // mem[r4] = 77 (overwrites 0x104)
        a.load(Mnemonic::Lw, 5, 4, 4); // r5 = mem[0x108] = 0
        a.ecall();
        let r = run(&mut a);
        assert_eq!(r.final_regs[1], 11, "load must see the pre-store value");
        assert_eq!(r.final_regs[5], 0);
        assert_eq!(r.final_mem.read(0x104, isa::MemWidth::Word), 77);
    }

    #[test]
    fn determinism() {
        let build = || {
            let mut a = Asm::new(0);
            a.addi(1, 0, 10);
            a.label("loop");
            a.addi(1, 1, -1);
            a.branch(Mnemonic::Bne, 1, 0, "loop");
            a.ecall();
            a.build().unwrap()
        };
        let p = build();
        let r1 = run_inorder(&p, &[], &RunOptions::default()).unwrap();
        let r2 = run_inorder(&p, &[], &RunOptions::default()).unwrap();
        assert_eq!(r1.events, r2.events);
        assert_eq!(r1.arch_digest(), r2.arch_digest());
        // 1 + 10 * 2 + 1 = 22 dynamic instructions = 22 cycles
        assert_eq!(r1.cycles, 22);
    }

    #[test]
    fn csr_read_write() {
        let mut a = Asm::new(0);
        a.addi(5, 0, 1);
        a.csrrw(6, PROTECT_CSR as i32, 5); // old (0) -> x6, write 1
        a.csrrw(7, PROTECT_CSR as i32, 0); // old (1) -> x7, write 0
        a.ecall();
        let r = run(&mut a);
        assert_eq!(r.final_regs[6], 0);
        assert_eq!(r.final_regs[7], 1);
    }

    #[test]
    fn misaligned_access_detected() {
        let mut a = Asm::new(0);
        a.addi(1, 0, 0x101);
        a.load(Mnemonic::Lw, 2, 0, 1);
        a.ecall();
        let p = a.build().unwrap();
        assert!(matches!(
            run_inorder(&p, &[], &RunOptions::default()),
            Err(RunError::MisalignedAccess { addr: 0x101, .. })
        ));
    }

    #[test]
    fn nontermination_guard() {
        let mut a = Asm::new(0);
        a.label("spin");
        a.jal(0, "spin");
        let p = a.build().unwrap();
        let opts = RunOptions {
            max_cycles: 1000,
            ..Default::default()
        };
        assert!(matches!(
            run_inorder(&p, &[], &opts),
            Err(RunError::MaxCyclesExceeded { .. })
        ));
    }

    #[test]
    fn inputs_overlay_region() {
        let mut a = Asm::new(0);
        a.input_region(0x200, 4);
        a.addi(1, 0, 0x200);
        a.load(Mnemonic::Lbu, 2, 0, 1);
        a.load(Mnemonic::Lbu, 3, 3, 1);
        a.ecall();
        let p = a.build().unwrap();
        let r = run_inorder(&p, &[9, 8, 7, 6], &RunOptions::default()).unwrap();
        assert_eq!(r.final_regs[2], 9);
        assert_eq!(r.final_regs[3], 6);
    }
}
