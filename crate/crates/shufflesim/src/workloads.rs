//! Embedded victim workloads: table-based AES-128 encryption, the 5i5w
//! multiply-accumulate kernel, and a counted-loop micro-kernel.
//!
//! All workloads are constructed through the builder (no external toolchain)
//! and carry trigger markers bounding the attacked window plus critical
//! markers on the secret-processing instructions.

use crate::isa::Mnemonic::*;
use crate::program::{Asm, Program};

/// Data segment base shared by the workloads.
pub const DATA_BASE: u32 = 0x0001_0000;

const SBOX_OFF: i32 = 0x000;
const XTIME_OFF: i32 = 0x100;
const RKEYS_OFF: i32 = 0x200;
const INPUT_OFF: i32 = 0x300;
const STATE_OFF: i32 = 0x310;
const OUTPUT_OFF: i32 = 0x320;

/// Address the AES ciphertext is stored to.
pub const AES_OUTPUT_ADDR: u32 = DATA_BASE + OUTPUT_OFF as u32;
/// Address AES plaintext inputs are overlaid at.
pub const AES_INPUT_ADDR: u32 = DATA_BASE + INPUT_OFF as u32;

/// Key used by [`workload_aes128`] (the FIPS-197 appendix example key).
pub const AES_DEFAULT_KEY: [u8; 16] = [
    0x2B, 0x7E, 0x15, 0x16, 0x28, 0xAE, 0xD2, 0xA6, 0xAB, 0xF7, 0x15, 0x88, 0x09, 0xCF, 0x4F,
    0x3C,
];

/// Plaintext preloaded in the AES input region when a run supplies no input.
pub const AES_DEFAULT_PLAINTEXT: [u8; 16] = [
    0x32, 0x43, 0xF6, 0xA8, 0x88, 0x5A, 0x30, 0x8D, 0x31, 0x31, 0x98, 0xA2, 0xE0, 0x37, 0x07,
    0x34,
];

/// The AES S-box.
pub const SBOX: [u8; 256] = [
    0x63, 0x7C, 0x77, 0x7B, 0xF2, 0x6B, 0x6F, 0xC5, 0x30, 0x01, 0x67, 0x2B, 0xFE, 0xD7, 0xAB,
    0x76, 0xCA, 0x82, 0xC9, 0x7D, 0xFA, 0x59, 0x47, 0xF0, 0xAD, 0xD4, 0xA2, 0xAF, 0x9C, 0xA4,
    0x72, 0xC0, 0xB7, 0xFD, 0x93, 0x26, 0x36, 0x3F, 0xF7, 0xCC, 0x34, 0xA5, 0xE5, 0xF1, 0x71,
    0xD8, 0x31, 0x15, 0x04, 0xC7, 0x23, 0xC3, 0x18, 0x96, 0x05, 0x9A, 0x07, 0x12, 0x80, 0xE2,
    0xEB, 0x27, 0xB2, 0x75, 0x09, 0x83, 0x2C, 0x1A, 0x1B, 0x6E, 0x5A, 0xA0, 0x52, 0x3B, 0xD6,
    0xB3, 0x29, 0xE3, 0x2F, 0x84, 0x53, 0xD1, 0x00, 0xED, 0x20, 0xFC, 0xB1, 0x5B, 0x6A, 0xCB,
    0xBE, 0x39, 0x4A, 0x4C, 0x58, 0xCF, 0xD0, 0xEF, 0xAA, 0xFB, 0x43, 0x4D, 0x33, 0x85, 0x45,
    0xF9, 0x02, 0x7F, 0x50, 0x3C, 0x9F, 0xA8, 0x51, 0xA3, 0x40, 0x8F, 0x92, 0x9D, 0x38, 0xF5,
    0xBC, 0xB6, 0xDA, 0x21, 0x10, 0xFF, 0xF3, 0xD2, 0xCD, 0x0C, 0x13, 0xEC, 0x5F, 0x97, 0x44,
    0x17, 0xC4, 0xA7, 0x7E, 0x3D, 0x64, 0x5D, 0x19, 0x73, 0x60, 0x81, 0x4F, 0xDC, 0x22, 0x2A,
    0x90, 0x88, 0x46, 0xEE, 0xB8, 0x14, 0xDE, 0x5E, 0x0B, 0xDB, 0xE0, 0x32, 0x3A, 0x0A, 0x49,
    0x06, 0x24, 0x5C, 0xC2, 0xD3, 0xAC, 0x62, 0x91, 0x95, 0xE4, 0x79, 0xE7, 0xC8, 0x37, 0x6D,
    0x8D, 0xD5, 0x4E, 0xA9, 0x6C, 0x56, 0xF4, 0xEA, 0x65, 0x7A, 0xAE, 0x08, 0xBA, 0x78, 0x25,
    0x2E, 0x1C, 0xA6, 0xB4, 0xC6, 0xE8, 0xDD, 0x74, 0x1F, 0x4B, 0xBD, 0x8B, 0x8A, 0x70, 0x3E,
    0xB5, 0x66, 0x48, 0x03, 0xF6, 0x0E, 0x61, 0x35, 0x57, 0xB9, 0x86, 0xC1, 0x1D, 0x9E, 0xE1,
    0xF8, 0x98, 0x11, 0x69, 0xD9, 0x8E, 0x94, 0x9B, 0x1E, 0x87, 0xE9, 0xCE, 0x55, 0x28, 0xDF,
    0x8C, 0xA1, 0x89, 0x0D, 0xBF, 0xE6, 0x42, 0x68, 0x41, 0x99, 0x2D, 0x0F, 0xB0, 0x54, 0xBB,
    0x16,
];

fn xtime(a: u8) -> u8 {
    let x = (a as u32) << 1;
    (if a & 0x80 != 0 { x ^ 0x11B } else { x }) as u8
}

/// AES-128 key schedule: 176 bytes of round keys, flat byte order.
pub fn aes128_expand_key(key: &[u8; 16]) -> [u8; 176] {
    const RCON: [u8; 10] = [0x01, 0x02, 0x04, 0x08, 0x10, 0x20, 0x40, 0x80, 0x1B, 0x36];
    let mut ek = [0u8; 176];
    ek[..16].copy_from_slice(key);
    for i in (16..176).step_by(4) {
        let mut t = [ek[i - 4], ek[i - 3], ek[i - 2], ek[i - 1]];
        if i % 16 == 0 {
            t = [
                SBOX[t[1] as usize] ^ RCON[i / 16 - 1],
                SBOX[t[2] as usize],
                SBOX[t[3] as usize],
                SBOX[t[0] as usize],
            ];
        }
        for j in 0..4 {
            ek[i + j] = ek[i - 16 + j] ^ t[j];
        }
    }
    ek
}

// Register allocation for the AES kernel.
const BASE: u8 = 5; // x5 = DATA_BASE
const T0: u8 = 6;
const T1: u8 = 7;
const V0: u8 = 8; // x8..x23 hold the 16 state bytes
const T2: u8 = 24;
const T3: u8 = 25;
const RCTR: u8 = 29;
const RKPTR: u8 = 30;

/// ShiftRows source index: output state byte (4c + r) comes from input state
/// byte 4*((c + r) % 4) + r.
fn shift_idx(c: usize, r: usize) -> u8 {
    (4 * ((c + r) % 4) + r) as u8
}

/// Emits ShiftRows+MixColumns+AddRoundKey over the sboxed state held in
/// registers V0..V0+15, reading 16 round-key bytes at offsets 0..16 off
/// `rk_base_reg`, and storing the new state back to STATE.
fn emit_mix_ark(a: &mut Asm, rk_base_reg: u8) {
    for c in 0..4 {
        let s: [u8; 4] = [
            V0 + shift_idx(c, 0),
            V0 + shift_idx(c, 1),
            V0 + shift_idx(c, 2),
            V0 + shift_idx(c, 3),
        ];
        // t = s0 ^ s1 ^ s2 ^ s3
        a.op(Xor, T2, s[0], s[1]);
        a.op(Xor, T3, s[2], s[3]);
        a.op(Xor, T3, T2, T3);
        for r in 0..4 {
            // n_r = s_r ^ t ^ xtime(s_r ^ s_{r+1})
            a.op(Xor, T2, s[r], s[(r + 1) % 4]);
            a.op(Add, T0, BASE, T2);
            a.load(Lbu, T0, XTIME_OFF, T0);
            a.op(Xor, T0, T0, T3);
            a.op(Xor, T0, T0, s[r]);
            a.load(Lbu, T1, (4 * c + r) as i32, rk_base_reg);
            a.op(Xor, T0, T0, T1);
            a.store(Sb, T0, STATE_OFF + (4 * c + r) as i32, BASE);
        }
    }
}

/// Loads the 16 state bytes into registers and applies the S-box in
/// registers (no store back).
fn emit_subbytes_in_regs(a: &mut Asm) {
    for i in 0..16 {
        a.load(Lbu, V0 + i, STATE_OFF + i as i32, BASE);
    }
    for i in 0..16 {
        a.op(Add, T0, BASE, V0 + i);
        a.load(Lbu, V0 + i, SBOX_OFF, T0);
    }
}

/// Builds the AES-128 encryption program for an arbitrary key. The program
/// encrypts the 16 plaintext bytes at the input region and stores the
/// ciphertext at [`AES_OUTPUT_ADDR`].
///
/// The trigger window covers the first-round SubBytes sequence, the round-1
/// S-box loads and state stores carry critical markers, and the input region
/// defaults to the FIPS-197 example plaintext.
pub fn aes128_program(key: &[u8; 16]) -> Program {
    let mut xt = [0u8; 256];
    for (i, slot) in xt.iter_mut().enumerate() {
        *slot = xtime(i as u8);
    }
    let rkeys = aes128_expand_key(key);

    let mut a = Asm::new(0);
    a.data(DATA_BASE + SBOX_OFF as u32, &SBOX);
    a.data(DATA_BASE + XTIME_OFF as u32, &xt);
    a.data(DATA_BASE + RKEYS_OFF as u32, &rkeys);
    a.data(AES_INPUT_ADDR, &AES_DEFAULT_PLAINTEXT);
    a.input_region(AES_INPUT_ADDR, 16);

    a.lui(BASE, DATA_BASE as i32);

    // Initial AddRoundKey: state = input ^ rk0.
    for i in 0..16 {
        a.load(Lbu, T0, INPUT_OFF + i, BASE);
        a.load(Lbu, T1, RKEYS_OFF + i, BASE);
        a.op(Xor, T0, T0, T1);
        a.store(Sb, T0, STATE_OFF + i, BASE);
    }

    // Round 1 SubBytes through memory as a byte loop, instrumented as the
    // attacked window. The loop branch makes the timing of later iterations
    // jitter under shuffling, like compiled table-based code.
    a.addi(PTR, BASE, STATE_OFF);
    a.addi(CTR16, 0, 16);
    a.trigger_start().label("sub1");
    a.load(Lbu, T0, 0, PTR);
    a.op(Add, T1, BASE, T0);
    a.critical().load(Lbu, T0, SBOX_OFF, T1);
    a.trigger_end().critical().store(Sb, T0, 0, PTR);
    a.addi(PTR, PTR, 1);
    a.addi(CTR16, CTR16, -1);
    a.branch(Bne, CTR16, 0, "sub1");

    // Round 1 ShiftRows+MixColumns+AddRoundKey (rk1).
    a.addi(RKPTR, BASE, RKEYS_OFF + 16);
    for i in 0..16 {
        a.load(Lbu, V0 + i as u8, STATE_OFF + i, BASE);
    }
    emit_mix_ark(&mut a, RKPTR);

    // Rounds 2..9 share one loop body; the round-key pointer advances by 16.
    a.addi(RKPTR, RKPTR, 16);
    a.addi(RCTR, 0, 8);
    a.label("round");
    emit_subbytes_in_regs(&mut a);
    emit_mix_ark(&mut a, RKPTR);
    a.addi(RKPTR, RKPTR, 16);
    a.addi(RCTR, RCTR, -1);
    a.branch(Bne, RCTR, 0, "round");

    // Final round: SubBytes + ShiftRows + AddRoundKey(rk10) into OUTPUT.
    emit_subbytes_in_regs(&mut a);
    for c in 0..4 {
        for r in 0..4 {
            let i = (4 * c + r) as i32;
            a.load(Lbu, T1, RKEYS_OFF + 160 + i, BASE);
            a.op(Xor, T0, V0 + shift_idx(c, r), T1);
            a.store(Sb, T0, OUTPUT_OFF + i, BASE);
        }
    }
    a.ecall();
    a.build().expect("AES workload must assemble")
}

/// AES-128 with the built-in key.
pub fn workload_aes128() -> Program {
    aes128_program(&AES_DEFAULT_KEY)
}

const MAC_INPUT_OFF: i32 = 0x300;
const MAC_WEIGHTS_OFF: i32 = 0x308;
const MAC_ACC_OFF: i32 = 0x310;

/// Address MAC inputs are overlaid at.
pub const MAC_INPUT_ADDR: u32 = DATA_BASE + MAC_INPUT_OFF as u32;
/// Address the MAC accumulator is stored to.
pub const MAC_ACC_ADDR: u32 = DATA_BASE + MAC_ACC_OFF as u32;

/// Weights embedded by [`workload_mac5`]. Chosen odd with |2w| > 127 so no
/// other 8-bit guess produces a bit-shifted (Hamming-weight-identical)
/// product for every input byte.
pub const MAC_DEFAULT_WEIGHTS: [i8; 5] = [103, -71, 89, -113, 67];

/// Builds the 5i5w multiply-accumulate kernel: acc = sum(in_i * w_i) over
/// five unsigned input bytes and five signed 8-bit weights. The multiply and
/// accumulate instructions carry critical markers; the trigger window covers
/// the loop through the accumulator store.
pub fn mac5_program(weights: &[i8; 5]) -> Program {
    let wbytes: Vec<u8> = weights.iter().map(|w| *w as u8).collect();
    let mut a = Asm::new(0);
    a.data(DATA_BASE + MAC_WEIGHTS_OFF as u32, &wbytes);
    a.input_region(MAC_INPUT_ADDR, 5);

    a.lui(BASE, DATA_BASE as i32);
    a.addi(2, BASE, MAC_INPUT_OFF); // input pointer
    a.addi(3, BASE, MAC_WEIGHTS_OFF); // weight pointer
    a.addi(4, 0, 0); // accumulator
    a.addi(6, 0, 5); // counter
    a.trigger_start().label("mac");
    a.load(Lbu, 7, 0, 2);
    a.load(Lb, 8, 0, 3);
    a.critical().op(Mul, 9, 7, 8);
    a.critical().op(Add, 4, 4, 9);
    a.addi(2, 2, 1);
    a.addi(3, 3, 1);
    a.addi(6, 6, -1);
    a.branch(Bne, 6, 0, "mac");
    a.trigger_end().store(Sw, 4, MAC_ACC_OFF, BASE);
    a.ecall();
    a.build().expect("MAC workload must assemble")
}

/// MAC kernel with the built-in weights.
pub fn workload_mac5() -> Program {
    mac5_program(&MAC_DEFAULT_WEIGHTS)
}

/// Counted loop with a small body of independent ALU operations; exercises
/// branch handling without touching memory until the final store.
pub fn workload_loop(n: u32) -> Program {
    let mut a = Asm::new(0);
    a.li(1, n as i32);
    a.addi(2, 0, 0);
    a.addi(3, 0, 0x55);
    a.trigger_start().label("top");
    a.addi(2, 2, 1);
    a.op(Xor, 3, 3, 2);
    a.op(Add, 4, 2, 3);
    a.op(And, 6, 4, 2);
    a.op(Or, 7, 4, 3);
    a.addi(1, 1, -1);
    a.branch(Bne, 1, 0, "top");
    a.trigger_end().store(Sw, 3, 0x400, 0);
    a.ecall();
    a.build().expect("loop workload must assemble")
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::refcore::run_inorder;
    use crate::run::RunOptions;

    /// Independent AES-128 oracle: its own state layout (4x4 row/column
    /// array), its own MixColumns over general GF(2^8) multiplication, and
    /// its own key-schedule application. Shares only the S-box constant.
    pub(crate) fn aes_oracle(key: &[u8; 16], pt: &[u8; 16]) -> [u8; 16] {
        fn gmul(mut a: u8, mut b: u8) -> u8 {
            let mut p = 0u8;
            for _ in 0..8 {
                if b & 1 != 0 {
                    p ^= a;
                }
                let hi = a & 0x80;
                a <<= 1;
                if hi != 0 {
                    a ^= 0x1B;
                }
                b >>= 1;
            }
            p
        }
        let mut s = [[0u8; 4]; 4];
        for (i, &b) in pt.iter().enumerate() {
            s[i % 4][i / 4] = b;
        }
        let ek = aes128_expand_key(key);
        let add_rk = |s: &mut [[u8; 4]; 4], round: usize| {
            for c in 0..4 {
                for r in 0..4 {
                    s[r][c] ^= ek[16 * round + 4 * c + r];
                }
            }
        };
        add_rk(&mut s, 0);
        for round in 1..=10 {
            for row in s.iter_mut() {
                for b in row.iter_mut() {
                    *b = SBOX[*b as usize];
                }
            }
            for r in 1..4 {
                s[r].rotate_left(r);
            }
            if round != 10 {
                for c in 0..4 {
                    let col = [s[0][c], s[1][c], s[2][c], s[3][c]];
                    s[0][c] = gmul(col[0], 2) ^ gmul(col[1], 3) ^ col[2] ^ col[3];
                    s[1][c] = col[0] ^ gmul(col[1], 2) ^ gmul(col[2], 3) ^ col[3];
                    s[2][c] = col[0] ^ col[1] ^ gmul(col[2], 2) ^ gmul(col[3], 3);
                    s[3][c] = gmul(col[0], 3) ^ col[1] ^ col[2] ^ gmul(col[3], 2);
                }
            }
            add_rk(&mut s, round);
        }
        let mut out = [0u8; 16];
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = s[i % 4][i / 4];
        }
        out
    }

    fn aes_run(key: &[u8; 16], pt: &[u8; 16]) -> [u8; 16] {
        let p = aes128_program(key);
        let r = run_inorder(&p, pt, &RunOptions::default()).unwrap();
        r.final_mem.read_bytes(AES_OUTPUT_ADDR, 16).try_into().unwrap()
    }

    #[test]
    fn fips_appendix_example_vector() {
        let ct = aes_run(&AES_DEFAULT_KEY, &AES_DEFAULT_PLAINTEXT);
        let expect = [
            0x39, 0x25, 0x84, 0x1D, 0x02, 0xDC, 0x09, 0xFB, 0xDC, 0x11, 0x85, 0x97, 0x19, 0x6A,
            0x0B, 0x32,
        ];
        assert_eq!(ct, expect);
    }

    #[test]
    fn fips_sequential_key_vector() {
        let key: [u8; 16] = core::array::from_fn(|i| i as u8);
        let pt: [u8; 16] = core::array::from_fn(|i| (i * 0x11) as u8);
        let expect = [
            0x69, 0xC4, 0xE0, 0xD8, 0x6A, 0x7B, 0x04, 0x30, 0xD8, 0xCD, 0xB7, 0x80, 0x70, 0xB4,
            0xC5, 0x5A,
        ];
        assert_eq!(aes_run(&key, &pt), expect);
        assert_eq!(aes_oracle(&key, &pt), expect);
    }

    #[test]
    fn aes_matches_independent_oracle_on_random_inputs() {
        let mut rng = crate::rng::ShuffleRng::from_seed(2024);
        for _ in 0..8 {
            let mut key = [0u8; 16];
            let mut pt = [0u8; 16];
            for b in key.iter_mut().chain(pt.iter_mut()) {
                *b = rng.next_bits(8) as u8;
            }
            assert_eq!(aes_run(&key, &pt), aes_oracle(&key, &pt));
        }
    }

    #[test]
    fn aes_markers_are_sbox_ops() {
        let p = workload_aes128();
        assert_eq!(p.critical_markers.len(), 32);
        assert!(p.trigger_start <= p.trigger_end);
        for &m in &p.critical_markers {
            assert!(m >= p.trigger_start && m <= p.trigger_end);
        }
    }

    #[test]
    fn mac_weighted_sum() {
        let p = mac5_program(&[1, 2, 3, 4, 5]);
        let r = run_inorder(&p, &[1, 1, 1, 1, 1], &RunOptions::default()).unwrap();
        assert_eq!(r.final_mem.read(MAC_ACC_ADDR, crate::isa::MemWidth::Word), 15);

        let r0 = run_inorder(&p, &[0, 0, 0, 0, 0], &RunOptions::default()).unwrap();
        assert_eq!(r0.final_mem.read(MAC_ACC_ADDR, crate::isa::MemWidth::Word), 0);
    }

    #[test]
    fn mac_matches_dot_product_oracle() {
        let weights = MAC_DEFAULT_WEIGHTS;
        let p = mac5_program(&weights);
        let mut rng = crate::rng::ShuffleRng::from_seed(7);
        for _ in 0..16 {
            let inputs: [u8; 5] = core::array::from_fn(|_| rng.next_bits(8) as u8);
            let r = run_inorder(&p, &inputs, &RunOptions::default()).unwrap();
            let expect: i32 = inputs
                .iter()
                .zip(weights.iter())
                .map(|(&i, &w)| (i as i32).wrapping_mul(w as i32))
                .fold(0i32, |a, x| a.wrapping_add(x));
            assert_eq!(
                r.final_mem.read(MAC_ACC_ADDR, crate::isa::MemWidth::Word),
                expect as u32
            );
        }
    }

    #[test]
    fn loop_kernel_cycle_count_is_dynamic_length() {
        let p = workload_loop(10);
        let r = run_inorder(&p, &[], &RunOptions::default()).unwrap();
        // 3 setup + 10 iterations of 7 + store + ecall
        assert_eq!(r.cycles, 3 + 70 + 2);
        assert_eq!(r.cycles, r.exec_cycles);
    }
}
