//! Shuffle buffer entries and dependency computation.

use crate::isa::{DecodedInstr, OpClass};

/// One occupied shuffle-buffer slot: the decoded instruction, its renamed
/// operands, its dependency bits over the other slots, and speculation
/// bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BufferEntry {
    pub pc: u32,
    pub instr: DecodedInstr,
    /// Dependency bits over buffer slots; bit i set means this entry waits
    /// for the instruction in slot i.
    pub dep_bits: u8,
    /// Subset of `dep_bits` that came from load/store aliasing; these gate
    /// checkpoint creation.
    pub mem_dep_bits: u8,
    pub phys_rs1: Option<u8>,
    pub phys_rs2: Option<u8>,
    pub phys_rd: Option<u8>,
    /// Number of live speculations this entry was fetched under; 0 means
    /// architecturally certain, > 0 means prefetch.
    pub spec_depth: u8,
    /// Fetch-order identity of the dynamic instruction.
    pub dyn_index: u64,
}

impl BufferEntry {
    pub fn prefetch(&self) -> bool {
        self.spec_depth > 0
    }
}

fn ranges_overlap(imm_a: i32, bytes_a: u32, imm_b: i32, bytes_b: u32) -> bool {
    let (a0, a1) = (imm_a as i64, imm_a as i64 + bytes_a as i64);
    let (b0, b1) = (imm_b as i64, imm_b as i64 + bytes_b as i64);
    a0 < b1 && b0 < a1
}

/// Whether two memory instructions must execute in program order (`a` is the
/// earlier one).
///
/// Unoptimized (option M off): every load/store depends on every prior
/// load/store, except that loads never depend on each other. Optimized: two
/// loads are always independent; accesses with different base registers are
/// conservatively dependent (the base values are unknown at fetch); accesses
/// off the same base are dependent iff their byte ranges overlap.
pub fn mem_alias(a: &DecodedInstr, b: &DecodedInstr, optimized: bool) -> bool {
    debug_assert!(a.is_mem() && b.is_mem());
    let both_loads = a.opclass == OpClass::Load && b.opclass == OpClass::Load;
    if both_loads {
        return false;
    }
    if !optimized {
        return true;
    }
    if a.rs1 != b.rs1 {
        return true;
    }
    ranges_overlap(
        a.imm,
        a.mem_width.unwrap().bytes(),
        b.imm,
        b.mem_width.unwrap().bytes(),
    )
}

/// Same aliasing decision keyed on *physical* base registers, used inside
/// the core. A physical register is written at most once while referenced,
/// so equal physical bases guarantee equal base values.
fn mem_alias_phys(
    earlier: &BufferEntry,
    new_instr: &DecodedInstr,
    new_phys_rs1: Option<u8>,
    optimized: bool,
) -> bool {
    let a = &earlier.instr;
    let both_loads = a.opclass == OpClass::Load && new_instr.opclass == OpClass::Load;
    if both_loads {
        return false;
    }
    if !optimized {
        return true;
    }
    if earlier.phys_rs1 != new_phys_rs1 {
        return true;
    }
    ranges_overlap(
        a.imm,
        a.mem_width.unwrap().bytes(),
        new_instr.imm,
        new_instr.mem_width.unwrap().bytes(),
    )
}

/// Inputs for dependency computation of a newly fetched instruction.
pub struct DepInputs<'a> {
    pub instr: &'a DecodedInstr,
    pub phys_rs1: Option<u8>,
    pub phys_rs2: Option<u8>,
    /// Optimized memory dependencies (option M).
    pub mem_optimized: bool,
    /// Serialize stores behind unresolved, mispredictable control flow
    /// (anything executed under an active prediction may roll back).
    pub store_guard: bool,
    /// JAL targets are computed at fetch (option J), so plain jumps cannot
    /// mispredict and need not hold stores back.
    pub jal_exact: bool,
}

/// Computes the dependency bits of a new instruction against the occupied
/// slots, returning (dep_bits, mem_dep_bits).
///
/// Rules: true read-after-write dependencies via renamed sources (renaming
/// removes WAW/WAR); load/store aliasing via [`mem_alias`]; FENCE, ECALL,
/// EBREAK, and CSR instructions order against everything in both directions;
/// stores additionally wait for any unresolved control flow that could be
/// rolled back, so memory is never clobbered by a squashed path.
pub fn compute_deps(inputs: &DepInputs, slots: &[Option<BufferEntry>]) -> (u8, u8) {
    let new = inputs.instr;
    let mut deps = 0u8;
    let mut mem_deps = 0u8;

    for (i, slot) in slots.iter().enumerate() {
        let Some(entry) = slot else { continue };
        let bit = 1u8 << i;
        let mut dep = false;

        // RAW through renamed sources. x0 has no physical name and never
        // creates dependencies.
        if entry.phys_rd.is_some()
            && (entry.phys_rd == inputs.phys_rs1 || entry.phys_rd == inputs.phys_rs2)
        {
            dep = true;
        }

        // Serializers order against all pending instructions, and all
        // later instructions order against them.
        if new.is_serializer() || entry.instr.is_serializer() {
            dep = true;
        }

        if new.is_mem() && entry.instr.is_mem() {
            if mem_alias_phys(entry, new, inputs.phys_rs1, inputs.mem_optimized) {
                dep = true;
                mem_deps |= bit;
            }
        }

        // A store committing to memory cannot be undone by a checkpoint
        // restore; keep stores behind any control flow that might squash or
        // replay them (exact-target jumps are not mispredictable).
        if inputs.store_guard
            && new.opclass == OpClass::Store
            && entry.instr.is_ctrl_flow()
            && !(entry.instr.opclass == OpClass::Jal && inputs.jal_exact)
        {
            dep = true;
        }

        if dep {
            deps |= bit;
        }
    }
    (deps, mem_deps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::{decode, encode, Mnemonic};

    fn mem_instr(kind: Mnemonic, reg: u8, base: u8, imm: i32) -> DecodedInstr {
        let word = match kind.opclass() {
            OpClass::Load => encode(kind, reg, base, 0, imm).unwrap(),
            _ => encode(kind, 0, base, reg, imm).unwrap(),
        };
        decode(word, 0).unwrap()
    }

    #[test]
    fn unoptimized_serializes_all_but_load_pairs() {
        let lw = mem_instr(Mnemonic::Lw, 1, 2, 4);
        let lw2 = mem_instr(Mnemonic::Lw, 3, 4, 8);
        let sw = mem_instr(Mnemonic::Sw, 3, 4, 0);
        assert!(!mem_alias(&lw, &lw2, false), "loads commute");
        assert!(mem_alias(&lw, &sw, false));
        assert!(mem_alias(&sw, &lw2, false));
        assert!(mem_alias(&sw, &sw, false));
    }

    #[test]
    fn optimized_different_base_is_dependent() {
        // lw r1, 4(r2) then sw r3, 0(r4): dependent because the base values
        // are unknown (r2+4 may equal r4).
        let lw = mem_instr(Mnemonic::Lw, 1, 2, 4);
        let sw = mem_instr(Mnemonic::Sw, 3, 4, 0);
        assert!(mem_alias(&lw, &sw, true));
    }

    #[test]
    fn optimized_same_base_disjoint_offsets_commute() {
        // sw r3, 0(r4) then lw r5, 4(r4): r4 != r4+4, so the load can move.
        let sw = mem_instr(Mnemonic::Sw, 3, 4, 0);
        let lw = mem_instr(Mnemonic::Lw, 5, 4, 4);
        assert!(!mem_alias(&sw, &lw, true));
    }

    #[test]
    fn byte_granular_overlap() {
        let sb0 = mem_instr(Mnemonic::Sb, 1, 2, 0);
        let sb1 = mem_instr(Mnemonic::Sb, 3, 2, 1);
        assert!(!mem_alias(&sb0, &sb1, true), "disjoint bytes");
        let sh0 = mem_instr(Mnemonic::Sh, 3, 2, 0);
        assert!(mem_alias(&sb0, &sh0, true), "halfword covers the byte");
    }

    #[test]
    fn exhaustive_against_interval_oracle() {
        // All (width, offset 0..=8, same/different base, load/store)
        // combinations against a brute-force byte-interval oracle.
        let kinds_load = [Mnemonic::Lb, Mnemonic::Lh, Mnemonic::Lw];
        let kinds_store = [Mnemonic::Sb, Mnemonic::Sh, Mnemonic::Sw];
        let all = kinds_load.iter().chain(kinds_store.iter());
        for &ka in all.clone() {
            for &kb in kinds_load.iter().chain(kinds_store.iter()) {
                for imm_a in 0..=8 {
                    for imm_b in 0..=8 {
                        for same_base in [true, false] {
                            let a = mem_instr(ka, 1, 2, imm_a);
                            let b = mem_instr(kb, 3, if same_base { 2 } else { 4 }, imm_b);
                            let got = mem_alias(&a, &b, true);
                            // Oracle: loads commute; different bases are
                            // unknown hence dependent; same base compares
                            // the byte sets {imm..imm+w}.
                            let both_loads = ka.opclass() == OpClass::Load
                                && kb.opclass() == OpClass::Load;
                            let expect = if both_loads {
                                false
                            } else if !same_base {
                                true
                            } else {
                                let wa = ka.mem_width().unwrap().bytes() as i32;
                                let wb = kb.mem_width().unwrap().bytes() as i32;
                                let set_a: Vec<i32> = (imm_a..imm_a + wa).collect();
                                (imm_b..imm_b + wb).any(|x| set_a.contains(&x))
                            };
                            assert_eq!(got, expect, "{ka:?}@{imm_a} vs {kb:?}@{imm_b} same_base={same_base}");
                        }
                    }
                }
            }
        }
    }

    fn entry(instr: DecodedInstr, phys: (Option<u8>, Option<u8>, Option<u8>)) -> BufferEntry {
        BufferEntry {
            pc: instr.pc,
            instr,
            dep_bits: 0,
            mem_dep_bits: 0,
            phys_rs1: phys.0,
            phys_rs2: phys.1,
            phys_rd: phys.2,
            spec_depth: 0,
            dyn_index: 0,
        }
    }

    #[test]
    fn serializer_depends_on_all_and_blocks_followers() {
        let fence = decode(encode(Mnemonic::Fence, 0, 0, 0, 0).unwrap(), 0).unwrap();
        let alu = decode(encode(Mnemonic::Add, 1, 2, 3, 0).unwrap(), 0).unwrap();
        let slots = vec![
            Some(entry(alu, (Some(2), Some(3), Some(33)))),
            None,
            Some(entry(alu, (Some(2), Some(3), Some(34)))),
            Some(entry(alu, (Some(2), Some(3), Some(35)))),
        ];
        let (deps, _) = compute_deps(
            &DepInputs {
                instr: &fence,
                phys_rs1: None,
                phys_rs2: None,
                mem_optimized: true,
                store_guard: false,
                jal_exact: true,
            },
            &slots,
        );
        assert_eq!(deps, 0b1101, "fence depends on every valid entry");

        // And anything after the fence depends on it.
        let mut slots2 = slots;
        slots2[1] = Some(entry(fence, (None, None, None)));
        let (deps2, _) = compute_deps(
            &DepInputs {
                instr: &alu,
                phys_rs1: Some(40),
                phys_rs2: Some(41),
                mem_optimized: true,
                store_guard: false,
                jal_exact: true,
            },
            &slots2,
        );
        assert_eq!(deps2 & 0b0010, 0b0010);
    }

    #[test]
    fn x0_sources_create_no_register_deps() {
        // Entry writes x0 (no physical destination); a reader of x0 sees no
        // dependency.
        let alu_x0 = decode(encode(Mnemonic::Add, 0, 1, 2, 0).unwrap(), 0).unwrap();
        let reader = decode(encode(Mnemonic::Add, 3, 0, 0, 0).unwrap(), 4).unwrap();
        let slots = vec![Some(entry(alu_x0, (Some(1), Some(2), None)))];
        let (deps, _) = compute_deps(
            &DepInputs {
                instr: &reader,
                phys_rs1: None,
                phys_rs2: None,
                mem_optimized: true,
                store_guard: false,
                jal_exact: true,
            },
            &slots,
        );
        assert_eq!(deps, 0);
    }
}
