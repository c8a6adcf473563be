//! Branch predictors and the return address stack.

use serde::{Deserialize, Serialize};

use crate::isa::{DecodedInstr, OpClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorKind {
    AlwaysTaken,
    AlwaysNotTaken,
    /// Predict taken for backward offsets (loops), not taken for forward.
    StaticOffset,
    /// 64-entry direct-mapped two-bit saturating counters, indexed by
    /// pc[7:2], initialized weakly-not-taken.
    TwoBit,
}

impl PredictorKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "always-taken" => Some(Self::AlwaysTaken),
            "always-not-taken" => Some(Self::AlwaysNotTaken),
            "static-offset" => Some(Self::StaticOffset),
            "two-bit" => Some(Self::TwoBit),
            _ => None,
        }
    }
}

const TWO_BIT_ENTRIES: usize = 64;

#[derive(Debug, Clone)]
pub struct BranchPredictor {
    kind: PredictorKind,
    /// Saturating counters 0..=3; >= 2 predicts taken.
    counters: [u8; TWO_BIT_ENTRIES],
}

impl BranchPredictor {
    pub fn new(kind: PredictorKind) -> Self {
        BranchPredictor {
            kind,
            counters: [1; TWO_BIT_ENTRIES], // weakly not-taken
        }
    }

    fn index(pc: u32) -> usize {
        ((pc >> 2) & (TWO_BIT_ENTRIES as u32 - 1)) as usize
    }

    pub fn predict_taken(&self, pc: u32, offset: i32) -> bool {
        match self.kind {
            PredictorKind::AlwaysTaken => true,
            PredictorKind::AlwaysNotTaken => false,
            PredictorKind::StaticOffset => offset < 0,
            PredictorKind::TwoBit => self.counters[Self::index(pc)] >= 2,
        }
    }

    /// Feedback at branch resolution.
    pub fn update(&mut self, pc: u32, taken: bool) {
        if self.kind == PredictorKind::TwoBit {
            let c = &mut self.counters[Self::index(pc)];
            if taken {
                *c = (*c + 1).min(3);
            } else {
                *c = c.saturating_sub(1);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReturnAddressStack {
    stack: Vec<u32>,
    depth: usize,
}

impl ReturnAddressStack {
    pub fn new(depth: usize) -> Self {
        ReturnAddressStack {
            stack: Vec::with_capacity(depth),
            depth,
        }
    }

    /// Push a predicted return address; a full stack drops its oldest entry.
    pub fn push(&mut self, addr: u32) {
        if self.stack.len() == self.depth {
            self.stack.remove(0);
        }
        self.stack.push(addr);
    }

    pub fn pop(&mut self) -> Option<u32> {
        self.stack.pop()
    }

    pub fn snapshot(&self) -> Vec<u32> {
        self.stack.clone()
    }

    pub fn restore(&mut self, snapshot: &[u32]) {
        self.stack.clear();
        self.stack.extend_from_slice(snapshot);
    }
}

/// Link-register convention: JAL/JALR with rd in {x1, x5} is a call.
pub fn is_call(instr: &DecodedInstr) -> bool {
    matches!(instr.opclass, OpClass::Jal | OpClass::Jalr)
        && matches!(instr.rd, Some(1) | Some(5))
}

/// JALR with rs1 in {x1, x5} and rd = x0 is a return.
pub fn is_return(instr: &DecodedInstr) -> bool {
    instr.opclass == OpClass::Jalr
        && matches!(instr.rs1, Some(1) | Some(5))
        && matches!(instr.rd, Some(0) | None)
}

/// Predicted (taken, target) for a control-flow instruction.
///
/// JAL targets are exact (option J computes them at fetch). JALR returns pop
/// the RAS; underflow predicts the fall-through. Branches consult the
/// predictor.
pub fn predict(
    instr: &DecodedInstr,
    predictor: &BranchPredictor,
    ras: &mut ReturnAddressStack,
) -> (bool, u32) {
    match instr.opclass {
        OpClass::Jal => (true, instr.pc.wrapping_add(instr.imm as u32)),
        OpClass::Jalr => match ras.pop() {
            Some(target) => (true, target),
            None => (false, instr.pc.wrapping_add(4)),
        },
        OpClass::Branch => {
            let taken = predictor.predict_taken(instr.pc, instr.imm);
            let target = if taken {
                instr.pc.wrapping_add(instr.imm as u32)
            } else {
                instr.pc.wrapping_add(4)
            };
            (taken, target)
        }
        other => unreachable!("predict called for {other:?}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::{decode, encode, Mnemonic};

    fn branch_at(pc: u32, offset: i32) -> DecodedInstr {
        decode(encode(Mnemonic::Bne, 0, 1, 0, offset).unwrap(), pc).unwrap()
    }

    #[test]
    fn static_offset_predicts_backward_taken() {
        let p = BranchPredictor::new(PredictorKind::StaticOffset);
        assert!(p.predict_taken(0x100, -16));
        assert!(!p.predict_taken(0x100, 16));
    }

    #[test]
    fn two_bit_saturating_transitions() {
        let mut p = BranchPredictor::new(PredictorKind::TwoBit);
        let pc = 0x40;
        // Force strongly-not-taken first.
        p.update(pc, false);
        assert!(!p.predict_taken(pc, 4));
        // Two takens: predictions stay not-taken while weakly transitioning.
        p.update(pc, true);
        assert!(!p.predict_taken(pc, 4));
        p.update(pc, true);
        assert!(p.predict_taken(pc, 4));
        p.update(pc, true);
        p.update(pc, true);
        // Fourth consecutive taken: firmly predicts taken.
        assert!(p.predict_taken(pc, 4));
    }

    #[test]
    fn predict_shapes() {
        let predictor = BranchPredictor::new(PredictorKind::StaticOffset);
        let mut ras = ReturnAddressStack::new(4);

        // JAL x1, +16 at 0x100: exact target 0x110.
        let jal = decode(encode(Mnemonic::Jal, 1, 0, 0, 16).unwrap(), 0x100).unwrap();
        assert_eq!(predict(&jal, &predictor, &mut ras), (true, 0x110));

        // JALR return pops the stack; underflow falls through.
        let ret = decode(encode(Mnemonic::Jalr, 0, 1, 0, 0).unwrap(), 0x200).unwrap();
        assert!(is_return(&ret));
        ras.push(0x5678);
        assert_eq!(predict(&ret, &predictor, &mut ras), (true, 0x5678));
        assert_eq!(predict(&ret, &predictor, &mut ras), (false, 0x204));

        let b = branch_at(0x300, -8);
        assert_eq!(predict(&b, &predictor, &mut ras), (true, 0x2F8));
    }

    #[test]
    fn ras_overflow_drops_oldest() {
        let mut ras = ReturnAddressStack::new(2);
        ras.push(1);
        ras.push(2);
        ras.push(3);
        assert_eq!(ras.pop(), Some(3));
        assert_eq!(ras.pop(), Some(2));
        assert_eq!(ras.pop(), None);
    }

    #[test]
    fn call_return_hints() {
        let call = decode(encode(Mnemonic::Jal, 1, 0, 0, 64).unwrap(), 0).unwrap();
        assert!(is_call(&call));
        let plain_jump = decode(encode(Mnemonic::Jal, 0, 0, 0, 64).unwrap(), 0).unwrap();
        assert!(!is_call(&plain_jump));
        let indirect = decode(encode(Mnemonic::Jalr, 0, 7, 0, 0).unwrap(), 0).unwrap();
        assert!(!is_return(&indirect));
    }
}
