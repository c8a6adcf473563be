//! Random terminating RV32IM programs and configurations for equivalence
//! sweeps: ALU/load/store/branch/call/CSR mixes with bounded loops, always
//! ending in ECALL.

use crate::isa::Mnemonic::{self, *};
use crate::program::{Asm, Program};
use crate::refcore::PROTECT_CSR;
use crate::rng::{derive_seed, ShuffleRng};
use crate::shuffle::{CoreConfig, OptionFlags, PredictorKind};

const REGION_A: i32 = 0x400;
const REGION_B: i32 = 0x500;
const BASE_A: u8 = 13;
const BASE_B: u8 = 14;
const CTR: u8 = 15;
const LINK: u8 = 1;

fn pick<T: Copy>(rng: &mut ShuffleRng, items: &[T]) -> T {
    items[rng.next_uniform(items.len() as u32) as usize]
}

/// General-purpose destination registers; base pointers, the loop counter,
/// and the link register stay stable.
fn dest_reg(rng: &mut ShuffleRng) -> u8 {
    2 + rng.next_uniform(11) as u8 // x2..x12
}

fn src_reg(rng: &mut ShuffleRng) -> u8 {
    rng.next_uniform(15) as u8 // x0..x14
}

fn emit_alu(rng: &mut ShuffleRng, a: &mut Asm) {
    const OPS: [Mnemonic; 14] = [
        Add, Sub, Sll, Slt, Sltu, Xor, Srl, Sra, Or, And, Mul, Mulh, Div, Remu,
    ];
    const IMM_OPS: [Mnemonic; 6] = [Addi, Slti, Xori, Ori, Andi, Sltiu];
    match rng.next_uniform(4) {
        0 => {
            let op = pick(rng, &IMM_OPS);
            let imm = rng.next_uniform(4096) as i32 - 2048;
            let (rd, rs) = (dest_reg(rng), src_reg(rng));
            a.instr(op, rd, rs, 0, imm);
        }
        1 => {
            let sh = pick(rng, &[Slli, Srli, Srai]);
            let (rd, rs, sh_amt) = (dest_reg(rng), src_reg(rng), rng.next_uniform(32) as i32);
            a.instr(sh, rd, rs, 0, sh_amt);
        }
        2 => {
            if rng.next_bits(1) == 0 {
                let (rd, imm) = (dest_reg(rng), (rng.next_uniform(1 << 20) << 12) as i32);
                a.lui(rd, imm);
            } else {
                let (rd, imm) = (dest_reg(rng), (rng.next_uniform(256) << 12) as i32);
                a.instr(Auipc, rd, 0, 0, imm);
            }
        }
        _ => {
            let op = pick(rng, &OPS);
            let (rd, rs1, rs2) = (dest_reg(rng), src_reg(rng), src_reg(rng));
            a.op(op, rd, rs1, rs2);
        }
    }
}

fn emit_mem(rng: &mut ShuffleRng, a: &mut Asm) {
    let base = if rng.next_bits(1) == 0 { BASE_A } else { BASE_B };
    if rng.next_bits(1) == 0 {
        let op = pick(rng, &[Lb, Lh, Lw, Lbu, Lhu]);
        let width = op.mem_width().unwrap().bytes() as i32;
        let (rd, off) = (dest_reg(rng), rng.next_uniform(16) as i32 * width);
        a.load(op, rd, off, base);
    } else {
        let op = pick(rng, &[Sb, Sh, Sw]);
        let width = op.mem_width().unwrap().bytes() as i32;
        let (src, off) = (src_reg(rng), rng.next_uniform(16) as i32 * width);
        a.store(op, src, off, base);
    }
}

/// Builds a random terminating program. Identical seeds yield identical
/// programs.
pub fn random_program(seed: u64) -> Program {
    let mut rng = ShuffleRng::from_seed(derive_seed(seed, "randprog", 0));
    let mut a = Asm::new(0);
    let mut label_counter = 0usize;
    let fn_count = 1 + rng.next_uniform(3);

    a.addi(BASE_A, 0, REGION_A);
    a.addi(BASE_B, 0, REGION_B);
    for r in 2..=12u8 {
        let v = rng.next_uniform(4096) as i32 - 2048;
        a.addi(r, 0, v);
    }

    let blocks = 4 + rng.next_uniform(6);
    for _ in 0..blocks {
        match rng.next_uniform(10) {
            0..=2 => {
                for _ in 0..2 + rng.next_uniform(6) {
                    emit_alu(&mut rng, &mut a);
                }
            }
            3..=4 => {
                for _ in 0..2 + rng.next_uniform(5) {
                    emit_mem(&mut rng, &mut a);
                }
            }
            5..=6 => {
                // Bounded down-counting loop.
                let label = format!("loop{label_counter}");
                label_counter += 1;
                let k = 2 + rng.next_uniform(3) as i32;
                a.addi(CTR, 0, k);
                a.label(&label);
                for _ in 0..1 + rng.next_uniform(4) {
                    if rng.next_bits(1) == 0 {
                        emit_alu(&mut rng, &mut a);
                    } else {
                        emit_mem(&mut rng, &mut a);
                    }
                }
                a.addi(CTR, CTR, -1);
                a.branch(Bne, CTR, 0, &label);
            }
            7 => {
                // Forward skip over a few instructions.
                let label = format!("skip{label_counter}");
                label_counter += 1;
                let cond = pick(&mut rng, &[Beq, Bne, Blt, Bge, Bltu, Bgeu]);
                let (rs1, rs2) = (src_reg(&mut rng), src_reg(&mut rng));
                a.branch(cond, rs1, rs2, &label);
                for _ in 0..1 + rng.next_uniform(3) {
                    emit_alu(&mut rng, &mut a);
                }
                a.label(&label);
            }
            8 => {
                let f = rng.next_uniform(fn_count);
                a.jal(LINK, &format!("fn{f}"));
            }
            _ => match rng.next_uniform(4) {
                0 => {
                    a.instr(Fence, 0, 0, 0, 0);
                }
                1 => {
                    let (rd, rs) = (dest_reg(&mut rng), src_reg(&mut rng));
                    a.csrrw(rd, 0x7C1, rs);
                }
                2 => {
                    let r = dest_reg(&mut rng);
                    let on = rng.next_bits(1) as i32;
                    a.addi(r, 0, on);
                    a.csrrw(0, PROTECT_CSR as i32, r);
                }
                _ => {
                    let rd = dest_reg(&mut rng);
                    a.instr(Csrrs, rd, 0, 0, PROTECT_CSR as i32);
                }
            },
        }
    }
    a.ecall();

    // Leaf functions after the exit point.
    for f in 0..fn_count {
        a.label(&format!("fn{f}"));
        for _ in 0..1 + rng.next_uniform(3) {
            emit_alu(&mut rng, &mut a);
        }
        a.jalr(0, LINK, 0);
    }

    a.build().expect("generated program must assemble")
}

/// A random valid core configuration (option C only alongside B).
pub fn random_config(seed: u64) -> CoreConfig {
    let mut rng = ShuffleRng::from_seed(derive_seed(seed, "randcfg", 0));
    let mut config = CoreConfig::new(pick(&mut rng, &[2u8, 4, 8]));
    let b = rng.next_bits(1) == 1;
    config.options = OptionFlags {
        m: rng.next_bits(1) == 1,
        j: rng.next_bits(1) == 1,
        b,
        r: rng.next_bits(1) == 1,
        c: b && rng.next_bits(1) == 1,
        f: rng.next_bits(1) == 1,
    };
    config.predictor = pick(
        &mut rng,
        &[
            PredictorKind::AlwaysTaken,
            PredictorKind::AlwaysNotTaken,
            PredictorKind::StaticOffset,
            PredictorKind::TwoBit,
        ],
    );
    config.dummy_interval = pick(&mut rng, &[0u8, 0, 4, 8, 16]);
    config.ras_depth = 4 + rng.next_bits(3) as u8;
    // Roughly one run in eight starts with protection off.
    config.protect_enable = rng.next_uniform(8) != 0;
    config.seed = rng.next_bits(32) as u64 | ((rng.next_bits(32) as u64) << 32);
    config
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refcore::run_inorder;
    use crate::run::RunOptions;

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(random_program(42), random_program(42));
        assert_eq!(random_config(7), random_config(7));
    }

    #[test]
    fn programs_terminate_on_the_reference_core() {
        let opts = RunOptions {
            max_cycles: 100_000,
            ..Default::default()
        };
        for seed in 0..200 {
            let p = random_program(seed);
            let r = run_inorder(&p, &[], &opts).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
            assert!(r.cycles > 10);
        }
    }

    #[test]
    fn configs_validate() {
        for seed in 0..200 {
            random_config(seed).validate().unwrap();
        }
    }
}
