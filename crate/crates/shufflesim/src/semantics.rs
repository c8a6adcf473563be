//! Per-instruction arithmetic and comparison semantics shared by the
//! in-order core and the shuffling core.

use crate::isa::Mnemonic;

/// Result of a register-register or register-immediate computation.
/// `b` is rs2's value for R-type forms and the immediate for I-type forms.
pub fn alu_op(kind: Mnemonic, a: u32, b: u32) -> u32 {
    use Mnemonic::*;
    match kind {
        Add | Addi => a.wrapping_add(b),
        Sub => a.wrapping_sub(b),
        Sll | Slli => a.wrapping_shl(b & 31),
        Slt | Slti => ((a as i32) < (b as i32)) as u32,
        Sltu | Sltiu => (a < b) as u32,
        Xor | Xori => a ^ b,
        Srl | Srli => a.wrapping_shr(b & 31),
        Sra | Srai => ((a as i32).wrapping_shr(b & 31)) as u32,
        Or | Ori => a | b,
        And | Andi => a & b,
        Mul => a.wrapping_mul(b),
        Mulh => (((a as i32 as i64).wrapping_mul(b as i32 as i64)) >> 32) as u32,
        Mulhsu => (((a as i32 as i64).wrapping_mul(b as i64)) >> 32) as u32,
        Mulhu => (((a as u64) * (b as u64)) >> 32) as u32,
        Div => {
            if b == 0 {
                u32::MAX
            } else if a == 0x8000_0000 && b == u32::MAX {
                a
            } else {
                ((a as i32) / (b as i32)) as u32
            }
        }
        Divu => {
            if b == 0 {
                u32::MAX
            } else {
                a / b
            }
        }
        Rem => {
            if b == 0 {
                a
            } else if a == 0x8000_0000 && b == u32::MAX {
                0
            } else {
                ((a as i32) % (b as i32)) as u32
            }
        }
        Remu => {
            if b == 0 {
                a
            } else {
                a % b
            }
        }
        other => unreachable!("alu_op called with non-computational {other:?}"),
    }
}

/// Branch condition over the two source values.
pub fn branch_taken(kind: Mnemonic, a: u32, b: u32) -> bool {
    use Mnemonic::*;
    match kind {
        Beq => a == b,
        Bne => a != b,
        Blt => (a as i32) < (b as i32),
        Bge => (a as i32) >= (b as i32),
        Bltu => a < b,
        Bgeu => a >= b,
        other => unreachable!("branch_taken called with {other:?}"),
    }
}

/// Sign/zero extension applied to a loaded value.
pub fn extend_load(kind: Mnemonic, raw: u32) -> u32 {
    use Mnemonic::*;
    match kind {
        Lb => raw as u8 as i8 as i32 as u32,
        Lbu => raw as u8 as u32,
        Lh => raw as u16 as i16 as i32 as u32,
        Lhu => raw as u16 as u32,
        Lw => raw,
        other => unreachable!("extend_load called with {other:?}"),
    }
}
