//! RV32IM instruction decode, classification, and encode.
//!
//! Only uncompressed 32-bit encodings are handled; the shuffle logic operates
//! on instructions in uncompressed form. Floating point, atomics, and
//! privileged instructions beyond ECALL/EBREAK are not recognized.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IsaError {
    #[error("illegal instruction 0x{word:08x} at pc 0x{pc:08x}")]
    IllegalInstruction { word: u32, pc: u32 },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EncodeError {
    #[error("{what} out of range for {mnemonic:?}: {value}")]
    OperandOutOfRange {
        mnemonic: Mnemonic,
        what: &'static str,
        value: i64,
    },
}

/// Coarse instruction class used by the dependency and stall logic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpClass {
    Alu,
    AluImm,
    Load,
    Store,
    Branch,
    Jal,
    Jalr,
    UpperImm,
    Fence,
    Env,
    Csr,
    MulDiv,
}

/// Memory access width of a load or store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MemWidth {
    Byte,
    Half,
    Word,
}

impl MemWidth {
    pub fn bytes(self) -> u32 {
        match self {
            MemWidth::Byte => 1,
            MemWidth::Half => 2,
            MemWidth::Word => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[allow(missing_docs)]
pub enum Mnemonic {
    Lui,
    Auipc,
    Jal,
    Jalr,
    Beq,
    Bne,
    Blt,
    Bge,
    Bltu,
    Bgeu,
    Lb,
    Lh,
    Lw,
    Lbu,
    Lhu,
    Sb,
    Sh,
    Sw,
    Addi,
    Slti,
    Sltiu,
    Xori,
    Ori,
    Andi,
    Slli,
    Srli,
    Srai,
    Add,
    Sub,
    Sll,
    Slt,
    Sltu,
    Xor,
    Srl,
    Sra,
    Or,
    And,
    Fence,
    FenceI,
    Ecall,
    Ebreak,
    Csrrw,
    Csrrs,
    Csrrc,
    Csrrwi,
    Csrrsi,
    Csrrci,
    Mul,
    Mulh,
    Mulhsu,
    Mulhu,
    Div,
    Divu,
    Rem,
    Remu,
}

impl Mnemonic {
    pub fn opclass(self) -> OpClass {
        use Mnemonic::*;
        match self {
            Lui | Auipc => OpClass::UpperImm,
            Jal => OpClass::Jal,
            Jalr => OpClass::Jalr,
            Beq | Bne | Blt | Bge | Bltu | Bgeu => OpClass::Branch,
            Lb | Lh | Lw | Lbu | Lhu => OpClass::Load,
            Sb | Sh | Sw => OpClass::Store,
            Addi | Slti | Sltiu | Xori | Ori | Andi | Slli | Srli | Srai => OpClass::AluImm,
            Add | Sub | Sll | Slt | Sltu | Xor | Srl | Sra | Or | And => OpClass::Alu,
            Fence | FenceI => OpClass::Fence,
            Ecall | Ebreak => OpClass::Env,
            Csrrw | Csrrs | Csrrc | Csrrwi | Csrrsi | Csrrci => OpClass::Csr,
            Mul | Mulh | Mulhsu | Mulhu | Div | Divu | Rem | Remu => OpClass::MulDiv,
        }
    }

    pub fn mem_width(self) -> Option<MemWidth> {
        use Mnemonic::*;
        match self {
            Lb | Lbu | Sb => Some(MemWidth::Byte),
            Lh | Lhu | Sh => Some(MemWidth::Half),
            Lw | Sw => Some(MemWidth::Word),
            _ => None,
        }
    }
}

/// One decoded RV32IM instruction.
///
/// `rd` is `Some(0)` for encodings whose destination field names `x0`; x0 as
/// a destination means "no architectural destination" for dependency
/// purposes, which [`DecodedInstr::writes_reg`] reflects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodedInstr {
    pub raw: u32,
    pub pc: u32,
    pub kind: Mnemonic,
    pub opclass: OpClass,
    pub rd: Option<u8>,
    pub rs1: Option<u8>,
    pub rs2: Option<u8>,
    pub imm: i32,
    pub mem_width: Option<MemWidth>,
}

impl DecodedInstr {
    /// True if the instruction architecturally writes a register (rd present
    /// and not x0).
    pub fn writes_reg(&self) -> bool {
        matches!(self.rd, Some(r) if r != 0)
    }

    pub fn is_mem(&self) -> bool {
        matches!(self.opclass, OpClass::Load | OpClass::Store)
    }

    pub fn is_ctrl_flow(&self) -> bool {
        matches!(self.opclass, OpClass::Branch | OpClass::Jal | OpClass::Jalr)
    }

    /// FENCE, ECALL/EBREAK, and CSR instructions execute in strict program
    /// order relative to everything else.
    pub fn is_serializer(&self) -> bool {
        matches!(self.opclass, OpClass::Fence | OpClass::Env | OpClass::Csr)
    }

    /// For CSR immediate forms the rs1 field carries a 5-bit literal.
    pub fn csr_uimm(&self) -> u32 {
        (self.raw >> 15) & 0x1F
    }
}

fn bits(word: u32, hi: u32, lo: u32) -> u32 {
    (word >> lo) & ((1 << (hi - lo + 1)) - 1)
}

fn imm_i(word: u32) -> i32 {
    (word as i32) >> 20
}

fn imm_s(word: u32) -> i32 {
    (((word as i32) >> 25) << 5) | bits(word, 11, 7) as i32
}

fn imm_b(word: u32) -> i32 {
    let sign = (word as i32) >> 31; // bit 12
    ((sign << 12)
        | ((bits(word, 7, 7) as i32) << 11)
        | ((bits(word, 30, 25) as i32) << 5)
        | ((bits(word, 11, 8) as i32) << 1)) as i32
}

fn imm_u(word: u32) -> i32 {
    (word & 0xFFFF_F000) as i32
}

fn imm_j(word: u32) -> i32 {
    let sign = (word as i32) >> 31; // bit 20
    (sign << 20)
        | ((bits(word, 19, 12) as i32) << 12)
        | ((bits(word, 20, 20) as i32) << 11)
        | ((bits(word, 30, 21) as i32) << 1)
}

/// Decodes one 32-bit word. Unrecognized encodings yield
/// [`IsaError::IllegalInstruction`].
pub fn decode(word: u32, pc: u32) -> Result<DecodedInstr, IsaError> {
    use Mnemonic::*;
    let illegal = || IsaError::IllegalInstruction { word, pc };
    let opcode = word & 0x7F;
    let rd = bits(word, 11, 7) as u8;
    let rs1 = bits(word, 19, 15) as u8;
    let rs2 = bits(word, 24, 20) as u8;
    let funct3 = bits(word, 14, 12);
    let funct7 = bits(word, 31, 25);

    let (kind, rd, rs1, rs2, imm) = match opcode {
        0x37 => (Lui, Some(rd), None, None, imm_u(word)),
        0x17 => (Auipc, Some(rd), None, None, imm_u(word)),
        0x6F => (Jal, Some(rd), None, None, imm_j(word)),
        0x67 => {
            if funct3 != 0 {
                return Err(illegal());
            }
            (Jalr, Some(rd), Some(rs1), None, imm_i(word))
        }
        0x63 => {
            let kind = match funct3 {
                0b000 => Beq,
                0b001 => Bne,
                0b100 => Blt,
                0b101 => Bge,
                0b110 => Bltu,
                0b111 => Bgeu,
                _ => return Err(illegal()),
            };
            (kind, None, Some(rs1), Some(rs2), imm_b(word))
        }
        0x03 => {
            let kind = match funct3 {
                0b000 => Lb,
                0b001 => Lh,
                0b010 => Lw,
                0b100 => Lbu,
                0b101 => Lhu,
                _ => return Err(illegal()),
            };
            (kind, Some(rd), Some(rs1), None, imm_i(word))
        }
        0x23 => {
            let kind = match funct3 {
                0b000 => Sb,
                0b001 => Sh,
                0b010 => Sw,
                _ => return Err(illegal()),
            };
            (kind, None, Some(rs1), Some(rs2), imm_s(word))
        }
        0x13 => {
            let kind = match funct3 {
                0b000 => Addi,
                0b010 => Slti,
                0b011 => Sltiu,
                0b100 => Xori,
                0b110 => Ori,
                0b111 => Andi,
                0b001 => {
                    if funct7 != 0 {
                        return Err(illegal());
                    }
                    Slli
                }
                0b101 => match funct7 {
                    0b0000000 => Srli,
                    0b0100000 => Srai,
                    _ => return Err(illegal()),
                },
                _ => unreachable!(),
            };
            let imm = match kind {
                Slli | Srli | Srai => rs2 as i32, // shamt
                _ => imm_i(word),
            };
            (kind, Some(rd), Some(rs1), None, imm)
        }
        0x33 => {
            let kind = match (funct7, funct3) {
                (0b0000000, 0b000) => Add,
                (0b0100000, 0b000) => Sub,
                (0b0000000, 0b001) => Sll,
                (0b0000000, 0b010) => Slt,
                (0b0000000, 0b011) => Sltu,
                (0b0000000, 0b100) => Xor,
                (0b0000000, 0b101) => Srl,
                (0b0100000, 0b101) => Sra,
                (0b0000000, 0b110) => Or,
                (0b0000000, 0b111) => And,
                (0b0000001, 0b000) => Mul,
                (0b0000001, 0b001) => Mulh,
                (0b0000001, 0b010) => Mulhsu,
                (0b0000001, 0b011) => Mulhu,
                (0b0000001, 0b100) => Div,
                (0b0000001, 0b101) => Divu,
                (0b0000001, 0b110) => Rem,
                (0b0000001, 0b111) => Remu,
                _ => return Err(illegal()),
            };
            (kind, Some(rd), Some(rs1), Some(rs2), 0)
        }
        0x0F => {
            let kind = match funct3 {
                0b000 => Fence,
                0b001 => FenceI,
                _ => return Err(illegal()),
            };
            (kind, None, None, None, imm_i(word))
        }
        0x73 => match funct3 {
            0b000 => {
                let kind = match imm_i(word) {
                    0 => Ecall,
                    1 => Ebreak,
                    _ => return Err(illegal()),
                };
                if rd != 0 || rs1 != 0 {
                    return Err(illegal());
                }
                (kind, None, None, None, imm_i(word))
            }
            0b001 => (Csrrw, Some(rd), Some(rs1), None, imm_i(word) & 0xFFF),
            0b010 => (Csrrs, Some(rd), Some(rs1), None, imm_i(word) & 0xFFF),
            0b011 => (Csrrc, Some(rd), Some(rs1), None, imm_i(word) & 0xFFF),
            0b101 => (Csrrwi, Some(rd), None, None, imm_i(word) & 0xFFF),
            0b110 => (Csrrsi, Some(rd), None, None, imm_i(word) & 0xFFF),
            0b111 => (Csrrci, Some(rd), None, None, imm_i(word) & 0xFFF),
            _ => return Err(illegal()),
        },
        _ => return Err(illegal()),
    };

    Ok(DecodedInstr {
        raw: word,
        pc,
        kind,
        opclass: kind.opclass(),
        rd,
        rs1,
        rs2,
        imm,
        mem_width: kind.mem_width(),
    })
}

fn check_reg(m: Mnemonic, what: &'static str, r: u8) -> Result<u32, EncodeError> {
    if r < 32 {
        Ok(r as u32)
    } else {
        Err(EncodeError::OperandOutOfRange {
            mnemonic: m,
            what,
            value: r as i64,
        })
    }
}

fn check_range(m: Mnemonic, what: &'static str, v: i64, lo: i64, hi: i64) -> Result<(), EncodeError> {
    if v < lo || v > hi {
        return Err(EncodeError::OperandOutOfRange {
            mnemonic: m,
            what,
            value: v,
        });
    }
    Ok(())
}

/// Encodes a mnemonic with operands into a 32-bit word. Unused operand slots
/// are ignored per format; for CSR immediate forms `rs1` carries the 5-bit
/// literal and `imm` the CSR address.
pub fn encode(kind: Mnemonic, rd: u8, rs1: u8, rs2: u8, imm: i32) -> Result<u32, EncodeError> {
    use Mnemonic::*;
    let rdf = |m| check_reg(m, "rd", rd);
    let rs1f = |m| check_reg(m, "rs1", rs1);
    let rs2f = |m| check_reg(m, "rs2", rs2);
    let i = imm as i64;

    let word = match kind {
        Lui | Auipc => {
            check_range(kind, "imm", i, i32::MIN as i64, i32::MAX as i64)?;
            if imm & 0xFFF != 0 {
                return Err(EncodeError::OperandOutOfRange {
                    mnemonic: kind,
                    what: "imm (low 12 bits must be zero)",
                    value: i,
                });
            }
            let opc = if kind == Lui { 0x37 } else { 0x17 };
            (imm as u32) | (rdf(kind)? << 7) | opc
        }
        Jal => {
            check_range(kind, "imm", i, -(1 << 20), (1 << 20) - 2)?;
            if imm & 1 != 0 {
                return Err(EncodeError::OperandOutOfRange {
                    mnemonic: kind,
                    what: "imm (must be even)",
                    value: i,
                });
            }
            let v = imm as u32;
            (bits(v, 20, 20) << 31)
                | (bits(v, 10, 1) << 21)
                | (bits(v, 11, 11) << 20)
                | (bits(v, 19, 12) << 12)
                | (rdf(kind)? << 7)
                | 0x6F
        }
        Jalr => {
            check_range(kind, "imm", i, -2048, 2047)?;
            ((imm as u32) << 20) | (rs1f(kind)? << 15) | (rdf(kind)? << 7) | 0x67
        }
        Beq | Bne | Blt | Bge | Bltu | Bgeu => {
            check_range(kind, "imm", i, -4096, 4094)?;
            if imm & 1 != 0 {
                return Err(EncodeError::OperandOutOfRange {
                    mnemonic: kind,
                    what: "imm (must be even)",
                    value: i,
                });
            }
            let funct3 = match kind {
                Beq => 0b000,
                Bne => 0b001,
                Blt => 0b100,
                Bge => 0b101,
                Bltu => 0b110,
                _ => 0b111,
            };
            let v = imm as u32;
            (bits(v, 12, 12) << 31)
                | (bits(v, 10, 5) << 25)
                | (rs2f(kind)? << 20)
                | (rs1f(kind)? << 15)
                | (funct3 << 12)
                | (bits(v, 4, 1) << 8)
                | (bits(v, 11, 11) << 7)
                | 0x63
        }
        Lb | Lh | Lw | Lbu | Lhu => {
            check_range(kind, "imm", i, -2048, 2047)?;
            let funct3 = match kind {
                Lb => 0b000,
                Lh => 0b001,
                Lw => 0b010,
                Lbu => 0b100,
                _ => 0b101,
            };
            ((imm as u32) << 20) | (rs1f(kind)? << 15) | (funct3 << 12) | (rdf(kind)? << 7) | 0x03
        }
        Sb | Sh | Sw => {
            check_range(kind, "imm", i, -2048, 2047)?;
            let funct3 = match kind {
                Sb => 0b000,
                Sh => 0b001,
                _ => 0b010,
            };
            let v = imm as u32;
            (bits(v, 11, 5) << 25)
                | (rs2f(kind)? << 20)
                | (rs1f(kind)? << 15)
                | (funct3 << 12)
                | (bits(v, 4, 0) << 7)
                | 0x23
        }
        Addi | Slti | Sltiu | Xori | Ori | Andi => {
            check_range(kind, "imm", i, -2048, 2047)?;
            let funct3 = match kind {
                Addi => 0b000,
                Slti => 0b010,
                Sltiu => 0b011,
                Xori => 0b100,
                Ori => 0b110,
                _ => 0b111,
            };
            ((imm as u32 & 0xFFF) << 20) | (rs1f(kind)? << 15) | (funct3 << 12) | (rdf(kind)? << 7) | 0x13
        }
        Slli | Srli | Srai => {
            check_range(kind, "shamt", i, 0, 31)?;
            let (funct7, funct3) = match kind {
                Slli => (0b0000000, 0b001),
                Srli => (0b0000000, 0b101),
                _ => (0b0100000, 0b101),
            };
            (funct7 << 25)
                | ((imm as u32) << 20)
                | (rs1f(kind)? << 15)
                | (funct3 << 12)
                | (rdf(kind)? << 7)
                | 0x13
        }
        Add | Sub | Sll | Slt | Sltu | Xor | Srl | Sra | Or | And | Mul | Mulh | Mulhsu | Mulhu
        | Div | Divu | Rem | Remu => {
            let (funct7, funct3) = match kind {
                Add => (0b0000000, 0b000),
                Sub => (0b0100000, 0b000),
                Sll => (0b0000000, 0b001),
                Slt => (0b0000000, 0b010),
                Sltu => (0b0000000, 0b011),
                Xor => (0b0000000, 0b100),
                Srl => (0b0000000, 0b101),
                Sra => (0b0100000, 0b101),
                Or => (0b0000000, 0b110),
                And => (0b0000000, 0b111),
                Mul => (0b0000001, 0b000),
                Mulh => (0b0000001, 0b001),
                Mulhsu => (0b0000001, 0b010),
                Mulhu => (0b0000001, 0b011),
                Div => (0b0000001, 0b100),
                Divu => (0b0000001, 0b101),
                Rem => (0b0000001, 0b110),
                _ => (0b0000001, 0b111),
            };
            (funct7 << 25)
                | (rs2f(kind)? << 20)
                | (rs1f(kind)? << 15)
                | (funct3 << 12)
                | (rdf(kind)? << 7)
                | 0x33
        }
        Fence => {
            // fence iorw,iorw
            (0x0FFu32 << 20) | 0x0F
        }
        FenceI => (0b001 << 12) | 0x0F,
        Ecall => 0x00000073,
        Ebreak => 0x00100073,
        Csrrw | Csrrs | Csrrc | Csrrwi | Csrrsi | Csrrci => {
            check_range(kind, "csr", i, 0, 4095)?;
            let funct3 = match kind {
                Csrrw => 0b001,
                Csrrs => 0b010,
                Csrrc => 0b011,
                Csrrwi => 0b101,
                Csrrsi => 0b110,
                _ => 0b111,
            };
            ((imm as u32) << 20) | (rs1f(kind)? << 15) | (funct3 << 12) | (rdf(kind)? << 7) | 0x73
        }
    };
    Ok(word)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn canonical_nop() {
        let d = decode(0x00000013, 0).unwrap();
        assert_eq!(d.opclass, OpClass::AluImm);
        assert_eq!(d.kind, Mnemonic::Addi);
        assert_eq!(d.rd, Some(0));
        assert_eq!(d.rs1, Some(0));
        assert_eq!(d.imm, 0);
        assert!(!d.writes_reg());
    }

    #[test]
    fn add_x1_x2_x3() {
        let d = decode(0x003100B3, 0).unwrap();
        assert_eq!(d.opclass, OpClass::Alu);
        assert_eq!(d.kind, Mnemonic::Add);
        assert_eq!((d.rd, d.rs1, d.rs2), (Some(1), Some(2), Some(3)));
        assert_eq!(encode(Mnemonic::Add, 1, 2, 3, 0).unwrap(), 0x003100B3);
    }

    #[test]
    fn lw_x2_4_x1() {
        let d = decode(0x0040A103, 0x100).unwrap();
        assert_eq!(d.opclass, OpClass::Load);
        assert_eq!(d.kind, Mnemonic::Lw);
        assert_eq!((d.rd, d.rs1), (Some(2), Some(1)));
        assert_eq!(d.imm, 4);
        assert_eq!(d.mem_width, Some(MemWidth::Word));
        assert_eq!(d.pc, 0x100);
    }

    #[test]
    fn sw_x3_0_x4() {
        let w = encode(Mnemonic::Sw, 0, 4, 3, 0).unwrap();
        let d = decode(w, 0).unwrap();
        assert_eq!(d.opclass, OpClass::Store);
        assert_eq!((d.rs1, d.rs2), (Some(4), Some(3)));
        assert_eq!(d.imm, 0);
        assert_eq!(d.rd, None);
    }

    #[test]
    fn golden_words() {
        // Hand-assembled reference encodings.
        assert_eq!(encode(Mnemonic::Beq, 0, 1, 2, 8).unwrap(), 0x00208463);
        assert_eq!(encode(Mnemonic::Jal, 1, 0, 0, 16).unwrap(), 0x010000EF);
        assert_eq!(encode(Mnemonic::Lui, 5, 0, 0, 0x10000).unwrap(), 0x000102B7);
        assert_eq!(encode(Mnemonic::Csrrw, 0, 6, 0, 0x7C0).unwrap(), 0x7C031073);
        assert_eq!(encode(Mnemonic::Mul, 11, 9, 10, 0).unwrap(), 0x02A485B3);
        assert_eq!(encode(Mnemonic::Ecall, 0, 0, 0, 0).unwrap(), 0x00000073);
        assert_eq!(encode(Mnemonic::Ebreak, 0, 0, 0, 0).unwrap(), 0x00100073);
        assert_eq!(encode(Mnemonic::Fence, 0, 0, 0, 0).unwrap(), 0x0FF0000F);
    }

    #[test]
    fn mem_width_present_iff_mem_class() {
        for word in [0x003100B3u32, 0x00000013, 0x0040A103, 0x00322023] {
            let d = decode(word, 0).unwrap();
            assert_eq!(d.mem_width.is_some(), d.is_mem());
        }
    }

    #[test]
    fn illegal_instruction_rejected() {
        assert!(decode(0x00000000, 0).is_err());
        assert!(decode(0xFFFFFFFF, 0).is_err());
        // Unsupported extension opcode (FLW, opcode 0x07).
        assert!(decode(0x00002007, 0).is_err());
    }

    #[test]
    fn immediate_range_errors() {
        assert!(matches!(
            encode(Mnemonic::Addi, 1, 0, 0, 4000),
            Err(EncodeError::OperandOutOfRange { .. })
        ));
        assert!(encode(Mnemonic::Beq, 0, 1, 2, 7).is_err()); // odd offset
        assert!(encode(Mnemonic::Slli, 1, 1, 0, 32).is_err());
    }

    fn all_mnemonics() -> Vec<Mnemonic> {
        use Mnemonic::*;
        vec![
            Lui, Auipc, Jal, Jalr, Beq, Bne, Blt, Bge, Bltu, Bgeu, Lb, Lh, Lw, Lbu, Lhu, Sb, Sh,
            Sw, Addi, Slti, Sltiu, Xori, Ori, Andi, Slli, Srli, Srai, Add, Sub, Sll, Slt, Sltu,
            Xor, Srl, Sra, Or, And, Fence, FenceI, Ecall, Ebreak, Csrrw, Csrrs, Csrrc, Csrrwi,
            Csrrsi, Csrrci, Mul, Mulh, Mulhsu, Mulhu, Div, Divu, Rem, Remu,
        ]
    }

    proptest! {
        /// decode(encode(..)) reproduces kind and operand fields for every
        /// mnemonic with randomized legal operands.
        #[test]
        fn encode_decode_round_trip(
            idx in 0usize..55,
            rd in 0u8..32,
            rs1 in 0u8..32,
            rs2 in 0u8..32,
            raw_imm in proptest::num::i32::ANY,
        ) {
            use Mnemonic::*;
            let m = all_mnemonics()[idx % all_mnemonics().len()];
            let imm = match m {
                Lui | Auipc => raw_imm & !0xFFF,
                Jal => (raw_imm % (1 << 20)) & !1,
                Beq | Bne | Blt | Bge | Bltu | Bgeu => (raw_imm % 4096) & !1,
                Slli | Srli | Srai => raw_imm.rem_euclid(32),
                Csrrw | Csrrs | Csrrc | Csrrwi | Csrrsi | Csrrci => raw_imm.rem_euclid(4096),
                Fence | FenceI | Ecall | Ebreak => 0,
                Add | Sub | Sll | Slt | Sltu | Xor | Srl | Sra | Or | And
                | Mul | Mulh | Mulhsu | Mulhu | Div | Divu | Rem | Remu => 0,
                _ => raw_imm.rem_euclid(4096) - 2048,
            };
            let word = encode(m, rd, rs1, rs2, imm).unwrap();
            let d = decode(word, 0).unwrap();
            prop_assert_eq!(d.kind, m);
            prop_assert_eq!(d.opclass, m.opclass());
            if let Some(got) = d.rd { prop_assert_eq!(got, rd); }
            if let Some(got) = d.rs1 { prop_assert_eq!(got, rs1); }
            if let Some(got) = d.rs2 { prop_assert_eq!(got, rs2); }
            match m {
                Fence => {},
                Ecall => prop_assert_eq!(d.imm, 0),
                Ebreak => prop_assert_eq!(d.imm, 1),
                _ => prop_assert_eq!(d.imm, imm),
            }
            prop_assert_eq!(d.mem_width, m.mem_width());
        }

        /// Every 32-bit word either decodes to exactly one class or raises
        /// IllegalInstruction; decoding is a total function that never panics.
        #[test]
        fn classification_totality(word in proptest::num::u32::ANY) {
            let _ = decode(word, 0);
        }
    }
}
