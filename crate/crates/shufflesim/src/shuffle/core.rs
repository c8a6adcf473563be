//! The shuffling core's cycle loop.
//!
//! Each cycle: (1) refill — fetch at most one instruction into a free slot,
//! renaming its operands and computing dependency bits; fetch pauses at
//! control flow it cannot speculate past, and checkpoint creation waits for
//! dependent load/store pairs to drain; (2) select — a ready control-flow
//! entry under option F, else a due dummy, else a random ready entry via the
//! nearest-ready rule; the buffer must be full on selection cycles unless
//! fetch is blocked; (3) execute and resolve — apply semantics on physical
//! registers, confirm or roll back speculation; (4) bookkeeping — clear
//! dependency bits, recycle dead physical registers, advance the dummy
//! countdown.
//!
//! With the protection bit clear the core degenerates to a strict in-order
//! machine: fetch one, execute the oldest, one instruction per cycle,
//! cycle-for-cycle identical to the reference core.
//!
//! The buffer is pre-filled before cycle 0, so a straight-line program of
//! independent instructions runs with zero overhead relative to the
//! in-order baseline.

use std::collections::{BTreeMap, HashMap};

use crate::isa::{DecodedInstr, Mnemonic, OpClass};
use crate::mem::SparseMem;
use crate::program::Program;
use crate::refcore::{csr_semantics, init_memory, instr_index, predecode, CsrFile};
use crate::rng::{derive_seed, ShuffleRng};
use crate::run::{
    Action, CycleEvent, RunError, RunOptions, RunResult, StallBreakdown, StallCause, WriteEvent,
};
use crate::semantics::{alu_op, branch_taken, extend_load};

use super::buffer::{compute_deps, BufferEntry, DepInputs};
use super::predict::{is_call, is_return, BranchPredictor, ReturnAddressStack};
use super::select::{select_index, DTable};
use super::CoreConfig;

#[derive(Debug, Clone, Copy)]
struct Pause {
    cause: StallCause,
    dyn_index: u64,
}

#[derive(Debug, Clone, Copy)]
struct PendingSpec {
    dyn_index: u64,
    predicted_target: u32,
}

#[derive(Debug, Clone)]
struct Checkpoint {
    buffer: Vec<Option<BufferEntry>>,
    map: [Option<u8>; 32],
    phys: Vec<u32>,
    ras: Vec<u32>,
    dyn_counter: u64,
}

#[derive(Debug, Clone)]
struct Speculation {
    dyn_index: u64,
    predicted_target: u32,
    checkpoint: Option<Checkpoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BlockReason {
    /// Fetch waits for an unexecuted control-flow instruction.
    Pause(StallCause),
    /// Checkpoint creation blocked by dependent loads/stores.
    MemGate,
    /// Fetch left the program image or hit an undecodable word; cleared when
    /// control flow redirects it.
    Ended,
    /// No free physical register for the next instruction's destination.
    RenameWait,
}

/// One shuffling-core instance. Prefer [`run_shuffled`]; the stepping API is
/// public for instrumented tests and trace tooling.
pub struct ShuffleCore<'p> {
    config: CoreConfig,
    options: RunOptions,
    program: &'p Program,
    decoded: Vec<Result<DecodedInstr, RunError>>,

    phys: Vec<u32>,
    map: [Option<u8>; 32],
    mem: SparseMem,
    csrs: CsrFile,
    halted: bool,

    buffer: Vec<Option<BufferEntry>>,
    fetch_pc: u32,
    fetch_pause: Option<Pause>,
    fetch_ended: bool,
    pending_fetch_error: Option<RunError>,
    pending_spec: Option<PendingSpec>,
    specs: Vec<Speculation>,
    refill_debt: Option<StallCause>,
    enable_refill: bool,
    rename_refill: bool,
    current_block: Option<BlockReason>,

    predictor: BranchPredictor,
    ras: ReturnAddressStack,
    dtable: DTable,
    rng_select: ShuffleRng,
    rng_dummy: ShuffleRng,
    dummy_countdown: u32,

    dyn_counter: u64,
    protect_prev: bool,

    events: Vec<CycleEvent>,
    stalls: StallBreakdown,
    exec_cycles: u64,
    dummy_cycles: u64,
    is_critical: Vec<bool>,
    crit_hits: BTreeMap<u64, u64>,
    trig_start_hits: BTreeMap<u64, u64>,
    trig_end_hits: BTreeMap<u64, u64>,
    mem_writers: HashMap<u32, u64>,
}

impl<'p> ShuffleCore<'p> {
    pub fn new(
        program: &'p Program,
        inputs: &[u8],
        config: &CoreConfig,
        options: &RunOptions,
    ) -> Result<Self, RunError> {
        config
            .validate()
            .map_err(|e| RunError::InvalidConfig(e.to_string()))?;
        let n = config.buffer_size as usize;
        let mut is_critical = vec![false; program.words.len()];
        for &m in &program.critical_markers {
            is_critical[m] = true;
        }
        let mut rng_dummy = ShuffleRng::from_seed(derive_seed(config.seed, "dummy", 0));
        let dummy_countdown = if config.dummy_interval > 0 {
            rng_dummy.next_uniform(config.dummy_interval as u32 + 1)
        } else {
            0
        };
        // Identity initial mapping; x0 permanently owns physical 0, which is
        // never written, so reads of x0 stay 0.
        let mut map = [None; 32];
        for (r, slot) in map.iter_mut().enumerate() {
            *slot = Some(r as u8);
        }
        Ok(ShuffleCore {
            options: *options,
            program,
            decoded: predecode(program),
            phys: vec![0; config.phys_regs as usize],
            map,
            mem: init_memory(program, inputs),
            csrs: CsrFile::with_protect(config.protect_enable),
            halted: false,
            buffer: vec![None; n],
            fetch_pc: program.base_address,
            fetch_pause: None,
            fetch_ended: false,
            pending_fetch_error: None,
            pending_spec: None,
            specs: Vec::new(),
            refill_debt: None,
            enable_refill: false,
            rename_refill: false,
            current_block: None,
            predictor: BranchPredictor::new(config.predictor),
            ras: ReturnAddressStack::new(config.ras_depth as usize),
            dtable: DTable::new(n),
            rng_select: ShuffleRng::from_seed(derive_seed(config.seed, "select", 0)),
            rng_dummy,
            dummy_countdown,
            dyn_counter: 0,
            protect_prev: config.protect_enable,
            events: Vec::new(),
            stalls: StallBreakdown::default(),
            exec_cycles: 0,
            dummy_cycles: 0,
            is_critical,
            crit_hits: BTreeMap::new(),
            trig_start_hits: BTreeMap::new(),
            trig_end_hits: BTreeMap::new(),
            mem_writers: HashMap::new(),
            config: config.clone(),
        })
    }

    pub fn occupied(&self) -> usize {
        self.buffer.iter().filter(|s| s.is_some()).count()
    }

    pub fn halted(&self) -> bool {
        self.halted
    }

    pub fn fetch_blocked(&self) -> bool {
        self.current_block.is_some()
    }

    pub(crate) fn buffer_slots(&self) -> &[Option<BufferEntry>] {
        &self.buffer
    }

    fn free_slot(&self) -> Option<usize> {
        self.buffer.iter().position(|s| s.is_none())
    }

    fn free_phys(&self) -> Option<u8> {
        let mut used = 0u64;
        for m in self.map.iter().flatten() {
            used |= 1 << m;
        }
        for e in self.buffer.iter().flatten() {
            for p in [e.phys_rs1, e.phys_rs2, e.phys_rd].iter().flatten() {
                used |= 1 << p;
            }
        }
        (0..self.config.phys_regs as u8).find(|p| used & (1u64 << p) == 0)
    }

    /// Physical registers currently free; exposed for rename tests.
    pub(crate) fn free_phys_set(&self) -> Vec<u8> {
        let mut used = 0u64;
        for m in self.map.iter().flatten() {
            used |= 1 << m;
        }
        for e in self.buffer.iter().flatten() {
            for p in [e.phys_rs1, e.phys_rs2, e.phys_rd].iter().flatten() {
                used |= 1 << p;
            }
        }
        (0..self.config.phys_regs as u8)
            .filter(|p| used & (1u64 << p) == 0)
            .collect()
    }

    fn mem_gate_blocked(&self) -> bool {
        self.buffer.iter().flatten().any(|e| e.mem_dep_bits != 0)
    }

    fn checkpoints_live(&self) -> usize {
        self.specs.iter().filter(|s| s.checkpoint.is_some()).count()
    }

    fn snapshot(&self) -> Checkpoint {
        Checkpoint {
            buffer: self.buffer.clone(),
            map: self.map,
            phys: self.phys.clone(),
            ras: self.ras.snapshot(),
            dyn_counter: self.dyn_counter,
        }
    }

    fn read_phys(&self, p: Option<u8>) -> u32 {
        p.map_or(0, |p| self.phys[p as usize])
    }

    // ---- refill ------------------------------------------------------------

    fn refill_step(&mut self, protect: bool) {
        self.current_block = None;

        if self.pending_spec.is_some() {
            if self.mem_gate_blocked() {
                self.current_block = Some(BlockReason::MemGate);
                return;
            }
            let ps = self.pending_spec.take().unwrap();
            self.specs.push(Speculation {
                dyn_index: ps.dyn_index,
                predicted_target: ps.predicted_target,
                checkpoint: Some(self.snapshot()),
            });
            self.fetch_pc = ps.predicted_target;
            // The deficit accumulated while gated refills under Mem.
            self.refill_debt = Some(StallCause::Mem);
        }

        if let Some(p) = self.fetch_pause {
            self.current_block = Some(BlockReason::Pause(p.cause));
            return;
        }
        if self.fetch_ended {
            self.current_block = Some(BlockReason::Ended);
            return;
        }
        let Some(slot) = self.free_slot() else {
            return; // buffer full
        };

        let Some(idx) = instr_index(self.program, self.fetch_pc) else {
            self.fetch_ended = true;
            self.pending_fetch_error = Some(RunError::FetchOutOfRange { pc: self.fetch_pc });
            self.current_block = Some(BlockReason::Ended);
            return;
        };
        let instr = match &self.decoded[idx] {
            Ok(i) => *i,
            Err(e) => {
                // The illegal word never enters the buffer; it only matters
                // if execution actually reaches it (buffer drains unhalted).
                self.fetch_ended = true;
                self.pending_fetch_error = Some(e.clone());
                self.current_block = Some(BlockReason::Ended);
                return;
            }
        };

        // Rename: sources through the current map, then a fresh physical
        // register for the destination.
        let phys_rs1 = instr.rs1.and_then(|r| self.map[r as usize]);
        let phys_rs2 = instr.rs2.and_then(|r| self.map[r as usize]);
        let phys_rd = if instr.writes_reg() {
            match self.free_phys() {
                Some(p) => Some(p),
                None => {
                    self.current_block = Some(BlockReason::RenameWait);
                    self.rename_refill = true;
                    return;
                }
            }
        } else {
            None
        };

        let (dep_bits, mem_dep_bits) = compute_deps(
            &DepInputs {
                instr: &instr,
                phys_rs1,
                phys_rs2,
                mem_optimized: self.config.options.m,
                store_guard: true,
                jal_exact: self.config.options.j,
            },
            &self.buffer,
        );

        if let Some(rd) = instr.rd {
            if rd != 0 {
                self.map[rd as usize] = phys_rd;
            }
        }
        let dyn_index = self.dyn_counter;
        self.dyn_counter += 1;
        self.buffer[slot] = Some(BufferEntry {
            pc: instr.pc,
            instr,
            dep_bits,
            mem_dep_bits,
            phys_rs1,
            phys_rs2,
            phys_rd,
            spec_depth: self.specs.len() as u8,
            dyn_index,
        });

        if instr.is_ctrl_flow() {
            self.after_ctrl_fetch(&instr, dyn_index, protect);
        } else {
            self.fetch_pc = instr.pc.wrapping_add(4);
        }
    }

    /// Fetch policy after inserting a control-flow instruction: continue at
    /// an exact JAL target, speculate when the options allow, otherwise
    /// pause until it executes.
    fn after_ctrl_fetch(&mut self, instr: &DecodedInstr, dyn_index: u64, protect: bool) {
        let opts = self.config.options;
        if opts.r && is_call(instr) {
            self.ras.push(instr.pc.wrapping_add(4));
        }

        match instr.opclass {
            OpClass::Jal if opts.j => {
                // Exact target; entries past it are not speculative.
                self.fetch_pc = instr.pc.wrapping_add(instr.imm as u32);
            }
            OpClass::Jal => {
                self.fetch_pause = Some(Pause {
                    cause: StallCause::Branch,
                    dyn_index,
                });
            }
            OpClass::Branch => {
                if protect && opts.b && self.checkpoints_live() < self.config.checkpoint_capacity()
                {
                    let taken = self.predictor.predict_taken(instr.pc, instr.imm);
                    let target = if taken {
                        instr.pc.wrapping_add(instr.imm as u32)
                    } else {
                        instr.pc.wrapping_add(4)
                    };
                    self.start_speculation(dyn_index, target);
                } else {
                    self.fetch_pause = Some(Pause {
                        cause: StallCause::Branch,
                        dyn_index,
                    });
                }
            }
            OpClass::Jalr => {
                let can_spec = protect
                    && opts.r
                    && is_return(instr)
                    && if opts.b {
                        self.checkpoints_live() < self.config.checkpoint_capacity()
                    } else {
                        self.specs.is_empty()
                    };
                if can_spec {
                    let target = self
                        .ras
                        .pop()
                        .unwrap_or(instr.pc.wrapping_add(4));
                    if opts.b {
                        self.start_speculation(dyn_index, target);
                    } else {
                        // Speculative fetch only: prefetched entries cannot
                        // execute, so no checkpoint (and no memory gate).
                        self.specs.push(Speculation {
                            dyn_index,
                            predicted_target: target,
                            checkpoint: None,
                        });
                        self.fetch_pc = target;
                    }
                } else {
                    self.fetch_pause = Some(Pause {
                        cause: StallCause::Jalr,
                        dyn_index,
                    });
                }
            }
            _ => unreachable!(),
        }
    }

    /// Checkpointed speculation begins once no dependent load/store pairs
    /// remain buffered; until then fetch blocks with Mem attribution.
    fn start_speculation(&mut self, dyn_index: u64, target: u32) {
        if self.mem_gate_blocked() {
            self.pending_spec = Some(PendingSpec {
                dyn_index,
                predicted_target: target,
            });
        } else {
            self.specs.push(Speculation {
                dyn_index,
                predicted_target: target,
                checkpoint: Some(self.snapshot()),
            });
            self.fetch_pc = target;
        }
    }

    // ---- select ------------------------------------------------------------

    fn ready_mask(&self) -> u8 {
        let spec_exec = self.config.options.b;
        let mut mask = 0u8;
        for (i, e) in self.buffer.iter().enumerate() {
            if let Some(e) = e {
                if e.dep_bits == 0 && (e.spec_depth == 0 || spec_exec) {
                    mask |= 1 << i;
                }
            }
        }
        mask
    }

    fn oldest_slot(&self) -> Option<usize> {
        self.buffer
            .iter()
            .enumerate()
            .filter_map(|(i, e)| e.as_ref().map(|e| (e.dyn_index, i)))
            .min()
            .map(|(_, i)| i)
    }

    /// Oldest ready control-flow entry, for option F.
    fn shortcut_ctrl_slot(&self, ready: u8) -> Option<usize> {
        self.buffer
            .iter()
            .enumerate()
            .filter_map(|(i, e)| e.as_ref().map(|e| (i, e)))
            .filter(|(i, e)| ready & (1 << i) != 0 && e.instr.is_ctrl_flow())
            .min_by_key(|(_, e)| e.dyn_index)
            .map(|(i, _)| i)
    }

    // ---- execute -----------------------------------------------------------

    /// Executes the entry in `slot`. Returns the cycle action (an exec, or a
    /// stall when a speculated instruction faults and rolls back).
    fn execute_slot(
        &mut self,
        slot: usize,
        ready_count: Option<u8>,
    ) -> Result<Action, RunError> {
        let entry = self.buffer[slot].take().expect("selected slot occupied");
        for e in self.buffer.iter_mut().flatten() {
            e.dep_bits &= !(1 << slot);
            e.mem_dep_bits &= !(1 << slot);
        }

        let instr = entry.instr;
        let a = self.read_phys(entry.phys_rs1);
        let b = self.read_phys(entry.phys_rs2);
        let mut event = WriteEvent::none();

        match instr.opclass {
            OpClass::Alu | OpClass::AluImm | OpClass::MulDiv | OpClass::UpperImm => {
                let value = match instr.opclass {
                    OpClass::AluImm => alu_op(instr.kind, a, instr.imm as u32),
                    OpClass::UpperImm => match instr.kind {
                        Mnemonic::Lui => instr.imm as u32,
                        _ => instr.pc.wrapping_add(instr.imm as u32),
                    },
                    _ => alu_op(instr.kind, a, b),
                };
                if let Some(p) = entry.phys_rd {
                    self.phys[p as usize] = value;
                    event.reg_value = Some(value);
                }
            }
            OpClass::Load => {
                let addr = a.wrapping_add(instr.imm as u32);
                if let Err(e) = self.check_access(&instr, addr) {
                    return self.handle_exec_fault(entry, e);
                }
                let raw = self.mem.read(addr, instr.mem_width.unwrap());
                let value = extend_load(instr.kind, raw);
                if self.options.strict_checks {
                    self.check_load_order(&entry, addr)?;
                }
                if let Some(p) = entry.phys_rd {
                    self.phys[p as usize] = value;
                    event.reg_value = Some(value);
                }
            }
            OpClass::Store => {
                let addr = a.wrapping_add(instr.imm as u32);
                if let Err(e) = self.check_access(&instr, addr) {
                    return self.handle_exec_fault(entry, e);
                }
                let width = instr.mem_width.unwrap();
                self.mem.write(addr, b, width);
                if self.options.strict_checks {
                    for i in 0..width.bytes() {
                        self.mem_writers
                            .insert(addr.wrapping_add(i), entry.dyn_index);
                    }
                }
                event.mem_write = Some((addr, b, width));
            }
            OpClass::Branch => {
                let taken = branch_taken(instr.kind, a, b);
                let target = if taken {
                    instr.pc.wrapping_add(instr.imm as u32)
                } else {
                    instr.pc.wrapping_add(4)
                };
                if self.config.options.b {
                    self.predictor.update(instr.pc, taken);
                }
                self.resolve_ctrl(&entry, target, None);
            }
            OpClass::Jal | OpClass::Jalr => {
                let link = instr.pc.wrapping_add(4);
                let target = if instr.opclass == OpClass::Jal {
                    instr.pc.wrapping_add(instr.imm as u32)
                } else {
                    a.wrapping_add(instr.imm as u32) & !1
                };
                if let Some(p) = entry.phys_rd {
                    self.phys[p as usize] = link;
                    event.reg_value = Some(link);
                }
                self.resolve_ctrl(&entry, target, entry.phys_rd.map(|_| link));
            }
            OpClass::Fence => {}
            OpClass::Env => {
                debug_assert_eq!(entry.spec_depth, 0);
                self.halted = true;
            }
            OpClass::Csr => {
                debug_assert_eq!(entry.spec_depth, 0);
                let addr = instr.imm as u32;
                let (old, new) = csr_semantics(&instr, self.csrs.read(addr), a);
                if let Some(v) = new {
                    self.csrs.write(addr, v);
                }
                if let Some(p) = entry.phys_rd {
                    self.phys[p as usize] = old;
                    event.reg_value = Some(old);
                }
            }
        }

        // Committed execution bookkeeping.
        self.exec_cycles += 1;
        self.dummy_countdown = self.dummy_countdown.saturating_sub(1);
        if let Some(idx) = instr_index(self.program, instr.pc) {
            let cycle = self.events.len() as u64;
            if self.is_critical[idx] {
                self.crit_hits.insert(entry.dyn_index, cycle);
            }
            if idx == self.program.trigger_start {
                self.trig_start_hits.insert(entry.dyn_index, cycle);
            }
            if idx == self.program.trigger_end {
                self.trig_end_hits.insert(entry.dyn_index, cycle);
            }
        }

        Ok(Action::Exec {
            pc: instr.pc,
            dyn_index: entry.dyn_index,
            slot: slot as u8,
            ready_count,
            write: event,
        })
    }

    fn check_access(&self, instr: &DecodedInstr, addr: u32) -> Result<(), RunError> {
        let width = instr.mem_width.unwrap();
        if addr % width.bytes() != 0 {
            return Err(RunError::MisalignedAccess {
                pc: instr.pc,
                addr,
                width,
            });
        }
        if self.config.options.m {
            if let Some((lo, hi)) = self.config.mmio_range {
                if addr >= lo && addr < hi {
                    return Err(RunError::MmioUnderOptimizedMem { pc: instr.pc, addr });
                }
            }
        }
        Ok(())
    }

    /// The instrumented ordering assertion: a load must never observe a byte
    /// written by a program-order-later store.
    fn check_load_order(&self, entry: &BufferEntry, addr: u32) -> Result<(), RunError> {
        let width = entry.instr.mem_width.unwrap();
        for i in 0..width.bytes() {
            if let Some(&writer) = self.mem_writers.get(&addr.wrapping_add(i)) {
                if writer > entry.dyn_index {
                    return Err(RunError::MemoryOrderViolation {
                        pc: entry.instr.pc,
                        addr: addr.wrapping_add(i),
                        load_dyn: entry.dyn_index,
                        store_dyn: writer,
                    });
                }
            }
        }
        Ok(())
    }

    /// An exception from a speculated instruction reverts to its covering
    /// checkpoint and pauses fetch at that branch (no re-speculation); a
    /// non-speculated exception is an architectural error.
    fn handle_exec_fault(&mut self, entry: BufferEntry, err: RunError) -> Result<Action, RunError> {
        if entry.spec_depth == 0 {
            return Err(err);
        }
        let spec_idx = entry.spec_depth as usize - 1;
        debug_assert!(self.specs[spec_idx].checkpoint.is_some());
        let dyn_index = self.specs[spec_idx].dyn_index;
        self.restore_checkpoint(spec_idx);
        self.fetch_pause = Some(Pause {
            cause: StallCause::HwFault,
            dyn_index,
        });
        Ok(Action::Stall {
            cause: StallCause::HwFault,
        })
    }

    /// Restores the checkpoint of `specs[idx]` (buffer, rename map, physical
    /// registers, RAS, dynamic counter) and drops it and everything younger.
    /// The speculation's branch entry stays in the restored buffer.
    fn restore_checkpoint(&mut self, idx: usize) {
        let cp = self.specs[idx].checkpoint.take().expect("checkpointed speculation");
        self.buffer = cp.buffer;
        self.map = cp.map;
        self.phys = cp.phys;
        self.ras.restore(&cp.ras);
        self.dyn_counter = cp.dyn_counter;
        self.specs.truncate(idx);
        self.pending_spec = None;
        self.fetch_ended = false;
        self.pending_fetch_error = None;
        self.fetch_pause = None;
        // Discard wrong-path marker records; re-executed entries overwrite
        // their own slots in the maps.
        self.crit_hits.retain(|&d, _| d < cp.dyn_counter);
        self.trig_start_hits.retain(|&d, _| d < cp.dyn_counter);
        self.trig_end_hits.retain(|&d, _| d < cp.dyn_counter);
    }

    /// Applies the fetch-side consequences of a resolved control-flow
    /// instruction.
    fn resolve_ctrl(&mut self, entry: &BufferEntry, actual_target: u32, link: Option<u32>) {
        // Case 1: this instruction owns an active speculation.
        if let Some(i) = self
            .specs
            .iter()
            .position(|s| s.dyn_index == entry.dyn_index)
        {
            let correct = self.specs[i].predicted_target == actual_target;
            if correct {
                self.specs.remove(i);
                for e in self.buffer.iter_mut().flatten() {
                    if e.spec_depth as usize > i {
                        e.spec_depth -= 1;
                    }
                }
            } else if self.specs[i].checkpoint.is_some() {
                self.restore_checkpoint(i);
                // The branch executed: remove it from the restored buffer
                // (clearing its dependency column) and replay its register
                // effect, then fetch the correct path.
                let mut replay_rd = None;
                for s in 0..self.buffer.len() {
                    if let Some(e) = &self.buffer[s] {
                        if e.dyn_index == entry.dyn_index {
                            replay_rd = e.phys_rd;
                            self.buffer[s] = None;
                            for e in self.buffer.iter_mut().flatten() {
                                e.dep_bits &= !(1 << s);
                                e.mem_dep_bits &= !(1 << s);
                            }
                            break;
                        }
                    }
                }
                if let (Some(p), Some(v)) = (replay_rd, link) {
                    self.phys[p as usize] = v;
                }
                self.fetch_pc = actual_target;
                self.refill_debt = Some(StallCause::Discard);
            } else {
                // Fetch-only speculation: drop the prefetched entries (none
                // executed) and refetch from the actual target.
                for s in 0..self.buffer.len() {
                    if self.buffer[s].as_ref().is_some_and(|e| e.spec_depth > 0) {
                        self.buffer[s] = None;
                        for e in self.buffer.iter_mut().flatten() {
                            e.dep_bits &= !(1 << s);
                            e.mem_dep_bits &= !(1 << s);
                        }
                    }
                }
                self.specs.truncate(i);
                self.fetch_pc = actual_target;
                self.fetch_ended = false;
                self.pending_fetch_error = None;
                self.refill_debt = Some(StallCause::Discard);
            }
            return;
        }

        // Case 2: resolved while its checkpoint was still gated.
        if self
            .pending_spec
            .is_some_and(|ps| ps.dyn_index == entry.dyn_index)
        {
            self.pending_spec = None;
            self.fetch_pc = actual_target;
            self.fetch_ended = false;
            self.pending_fetch_error = None;
            self.refill_debt = Some(match entry.instr.opclass {
                OpClass::Jalr => StallCause::Jalr,
                _ => StallCause::Branch,
            });
            return;
        }

        // Case 3: fetch was paused waiting on this instruction.
        if self
            .fetch_pause
            .is_some_and(|p| p.dyn_index == entry.dyn_index)
        {
            let cause = self.fetch_pause.take().unwrap().cause;
            self.fetch_pc = actual_target;
            self.fetch_ended = false;
            self.pending_fetch_error = None;
            self.refill_debt = Some(cause);
            return;
        }

        // Case 4: no fetch effect (exact-target JAL with option J).
    }

    fn execute_dummy(&mut self) -> Action {
        const KINDS: [Mnemonic; 4] = [Mnemonic::Add, Mnemonic::And, Mnemonic::Mul, Mnemonic::Mulh];
        let kind = KINDS[self.rng_dummy.next_uniform(4) as usize];
        let a = self.phys[self.rng_dummy.next_uniform(self.config.phys_regs as u32) as usize];
        let b = self.phys[self.rng_dummy.next_uniform(self.config.phys_regs as u32) as usize];
        let value = alu_op(kind, a, b);
        self.dummy_countdown = self
            .rng_dummy
            .next_uniform(self.config.dummy_interval as u32 + 1);
        self.dummy_cycles += 1;
        Action::DummyExec {
            write: WriteEvent::reg(value),
        }
    }

    fn stall_cause(&mut self) -> Result<StallCause, RunError> {
        match self.current_block {
            Some(BlockReason::Pause(cause)) => Ok(cause),
            Some(BlockReason::MemGate) => Ok(StallCause::Mem),
            Some(BlockReason::Ended) => {
                if self.occupied() == 0 {
                    Err(self
                        .pending_fetch_error
                        .clone()
                        .unwrap_or(RunError::FetchOutOfRange { pc: self.fetch_pc }))
                } else {
                    // Entries exist but none ready with fetch ended: the
                    // oldest entry is always ready, so this cannot happen.
                    Err(RunError::Deadlock {
                        cycle: self.events.len() as u64,
                    })
                }
            }
            Some(BlockReason::RenameWait) | None => match self.refill_debt {
                Some(cause) => Ok(cause),
                None => Err(RunError::Deadlock {
                    cycle: self.events.len() as u64,
                }),
            },
        }
    }

    /// Fills the buffer before cycle 0 (or until fetch pauses at control
    /// flow), free of charge, mirroring an initial fill that completes
    /// before the measured window.
    pub fn prefill(&mut self) {
        let protect = self.csrs.protect_enabled();
        loop {
            let before = self.occupied();
            if before == self.buffer.len() {
                break;
            }
            self.refill_step(protect);
            if self.occupied() == before {
                break; // blocked
            }
        }
    }

    /// Runs one cycle, appending exactly one event.
    pub fn cycle(&mut self) -> Result<(), RunError> {
        let protect = self.csrs.protect_enabled();
        if protect != self.protect_prev {
            if protect {
                // Re-enabled mid-run: selection stays ungated while the
                // buffer fills back up.
                self.enable_refill = true;
            }
            self.protect_prev = protect;
        }

        // (1) refill
        self.refill_step(protect);
        let full = self.occupied() == self.buffer.len();
        if full || self.current_block.is_some() {
            if full {
                self.refill_debt = None;
                self.rename_refill = false;
            }
            self.enable_refill = false;
        }

        // (2) select
        let ready = self.ready_mask();
        let can_select = if protect {
            full || self.current_block.is_some() || self.enable_refill || self.rename_refill
        } else {
            self.occupied() > 0
        };

        let action = if !protect {
            match self.oldest_slot() {
                Some(slot) => {
                    debug_assert_eq!(self.buffer[slot].as_ref().unwrap().dep_bits, 0);
                    self.execute_slot(slot, None)?
                }
                None => {
                    let cause = self.stall_cause()?;
                    self.stalls.add(cause);
                    Action::Stall { cause }
                }
            }
        } else if !can_select {
            let cause = self.stall_cause()?;
            self.stalls.add(cause);
            Action::Stall { cause }
        } else if let Some(slot) = self
            .config
            .options
            .f
            .then(|| self.shortcut_ctrl_slot(ready))
            .flatten()
        {
            let count = ready.count_ones() as u8;
            self.execute_slot(slot, Some(count))?
        } else if self.config.dummy_interval > 0 && self.dummy_countdown == 0 {
            self.execute_dummy()
        } else if ready != 0 {
            let r = self.rng_select.next_uniform(self.buffer.len() as u32) as usize;
            let slot = select_index(r, ready, &self.dtable);
            let count = ready.count_ones() as u8;
            self.execute_slot(slot, Some(count))?
        } else {
            let cause = self.stall_cause()?;
            self.stalls.add(cause);
            Action::Stall { cause }
        };

        self.events.push(CycleEvent {
            cycle: self.events.len() as u64,
            action,
        });
        Ok(())
    }

    fn trigger_done(&self) -> bool {
        !self.trig_end_hits.is_empty() && self.specs.is_empty() && self.pending_spec.is_none()
    }

    pub fn finish(mut self) -> RunResult {
        let mut final_regs = [0u32; 32];
        for r in 1..32 {
            final_regs[r] = self.read_phys(self.map[r]);
        }
        let trigger_window = match (
            self.trig_start_hits.values().next().copied(),
            self.trig_end_hits.values().last().copied(),
        ) {
            (Some(s), Some(e)) if s <= e => Some((s, e)),
            _ => None,
        };
        let cycles = self.events.len() as u64;
        RunResult {
            events: std::mem::take(&mut self.events),
            cycles,
            exec_cycles: self.exec_cycles,
            dummy_cycles: self.dummy_cycles,
            stalls: self.stalls,
            final_regs,
            final_mem: std::mem::take(&mut self.mem),
            trigger_window,
            critical_cycles: self.crit_hits.values().copied().collect(),
        }
    }
}

/// Runs a program on the shuffling core to completion.
pub fn run_shuffled(
    program: &Program,
    inputs: &[u8],
    config: &CoreConfig,
    options: &RunOptions,
) -> Result<RunResult, RunError> {
    let mut core = ShuffleCore::new(program, inputs, config, options)?;
    core.prefill();
    while !core.halted() {
        if core.events.len() as u64 >= options.max_cycles {
            return Err(RunError::MaxCyclesExceeded {
                limit: options.max_cycles,
            });
        }
        core.cycle()?;
        if options.stop_after_trigger && core.trigger_done() {
            break;
        }
    }
    Ok(core.finish())
}
