//! Seedable pseudo-random bit source combining a 43-bit LFSR with a 37-bit
//! cellular-automaton shift register (CASR).
//!
//! Each step advances both registers one position; an output bit is the XOR
//! of their low bits. The LFSR uses the primitive polynomial
//! `x^43 + x^42 + x^38 + x^37 + 1`; the CASR is a rule 90/150 hybrid with
//! null boundaries and rule 150 applied to cell 28 only. Both update maps
//! have maximal order (2^43-1 and 2^37-1), which the tests verify by
//! computing the order of the linear map over GF(2).

use rand::RngCore;

const LFSR_BITS: u32 = 43;
const CASR_BITS: u32 = 37;
const LFSR_MASK: u64 = (1 << LFSR_BITS) - 1;
const CASR_MASK: u64 = (1 << CASR_BITS) - 1;

/// Low coefficients of the LFSR feedback polynomial (the x^43 term is implied).
const LFSR_POLY_LOW: u64 = (1 << 42) | (1 << 38) | (1 << 37) | 1;

/// Cell index of the single rule-150 site in the CASR.
const CASR_RULE150_CELL: u32 = 28;

/// Deterministic pseudo-random bit generator.
///
/// Cloning a generator clones its position in the stream; two clones produce
/// identical outputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShuffleRng {
    lfsr: u64,
    casr: u64,
}

/// splitmix64 step, used for seed expansion and stream derivation.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Derives an independent stream seed from a master seed, a fixed label, and
/// an index. Distinct labels yield unrelated streams, so consuming one stream
/// (e.g. dummy scheduling) never perturbs another (e.g. selection).
pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    // FNV-1a over the label, folded into a splitmix chain with the index.
    let mut h: u64 = 0xCBF29CE484222325;
    for b in label.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001B3);
    }
    let mut s = master ^ h.rotate_left(17);
    let a = splitmix64(&mut s);
    let mut s2 = a ^ index.wrapping_mul(0xA24BAED4963EE407);
    splitmix64(&mut s2)
}

impl ShuffleRng {
    /// Creates a generator from a 64-bit seed. A seed of 0 (or any seed whose
    /// expansion would zero a register) is remapped to a fixed nonzero state.
    pub fn from_seed(seed: u64) -> Self {
        let mut s = seed;
        let mut lfsr = splitmix64(&mut s) & LFSR_MASK;
        let mut casr = splitmix64(&mut s) & CASR_MASK;
        if lfsr == 0 {
            lfsr = 1;
        }
        if casr == 0 {
            casr = 1;
        }
        ShuffleRng { lfsr, casr }
    }

    fn step(&mut self) {
        // LFSR: multiply the state (a polynomial of degree < 43) by x mod p(x).
        let mut l = self.lfsr << 1;
        if l & (1 << LFSR_BITS) != 0 {
            l ^= LFSR_POLY_LOW | (1 << LFSR_BITS);
        }
        self.lfsr = l & LFSR_MASK;

        // CASR: cell i <- left ^ right (^ self at the rule-150 cell), null
        // boundary outside [0, 36].
        let c = self.casr;
        let left = (c << 1) & CASR_MASK;
        let right = c >> 1;
        self.casr = left ^ right ^ (c & (1 << CASR_RULE150_CELL));
        debug_assert!(self.lfsr != 0 && self.casr != 0);
    }

    /// Returns `k` bits (1..=32) XOR-combined from the two registers' low
    /// windows, then advances both registers `k` steps.
    pub fn next_bits(&mut self, k: u32) -> u32 {
        assert!((1..=32).contains(&k), "bit count must be in 1..=32");
        let mask = if k == 32 { u32::MAX } else { (1u32 << k) - 1 };
        let out = ((self.lfsr ^ self.casr) as u32) & mask;
        for _ in 0..k {
            self.step();
        }
        out
    }

    /// Uniform value in `0..n`, unbiased via rejection sampling over the
    /// smallest covering power of two. The state advances even for n = 1.
    pub fn next_uniform(&mut self, n: u32) -> u32 {
        assert!(n >= 1);
        if n == 1 {
            self.next_bits(1);
            return 0;
        }
        let bits = 32 - (n - 1).leading_zeros();
        loop {
            let v = self.next_bits(bits);
            if v < n {
                return v;
            }
        }
    }

    /// Uniform f64 in [0, 1) with 32 bits of resolution.
    pub fn next_f64(&mut self) -> f64 {
        self.next_bits(32) as f64 / (u32::MAX as f64 + 1.0)
    }
}

impl RngCore for ShuffleRng {
    fn next_u32(&mut self) -> u32 {
        self.next_bits(32)
    }

    fn next_u64(&mut self) -> u64 {
        let lo = self.next_bits(32) as u64;
        let hi = self.next_bits(32) as u64;
        lo | (hi << 32)
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(4) {
            let v = self.next_bits(32).to_le_bytes();
            chunk.copy_from_slice(&v[..chunk.len()]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_streams() {
        let mut a = ShuffleRng::from_seed(0xDEADBEEF);
        let mut b = ShuffleRng::from_seed(0xDEADBEEF);
        for _ in 0..1000 {
            assert_eq!(a.next_bits(7), b.next_bits(7));
        }
    }

    #[test]
    fn zero_seed_is_remapped_nonzero() {
        let mut r = ShuffleRng::from_seed(0);
        assert!(r.lfsr != 0 && r.casr != 0);
        for _ in 0..10_000 {
            r.next_bits(32);
            assert!(r.lfsr != 0 && r.casr != 0);
        }
    }

    #[test]
    fn two_bit_draws_are_uniform() {
        let mut r = ShuffleRng::from_seed(42);
        let mut counts = [0u64; 4];
        let n = 1_000_000;
        for _ in 0..n {
            counts[r.next_bits(2) as usize] += 1;
        }
        for &c in &counts {
            let frac = c as f64 / n as f64;
            assert!((frac - 0.25).abs() < 0.005, "frequency {frac} outside 25% +/- 0.5%");
        }
    }

    #[test]
    fn uniform_range_reduction() {
        let mut r = ShuffleRng::from_seed(7);
        // n = 1: always 0 but the state still advances.
        let before = r.clone();
        assert_eq!(r.next_uniform(1), 0);
        assert_ne!(r, before);

        // n = 4 and n = 17 (dummy gap draw at DII = 16): uniform within 0.5%.
        for &n in &[4u32, 17] {
            let mut counts = vec![0u64; n as usize];
            let draws = 1_000_000;
            for _ in 0..draws {
                counts[r.next_uniform(n) as usize] += 1;
            }
            let expect = 1.0 / n as f64;
            for &c in &counts {
                let frac = c as f64 / draws as f64;
                assert!((frac - expect).abs() < 0.005, "n={n}: frequency {frac} vs {expect}");
            }
        }
    }

    #[test]
    fn label_derivation_separates_streams() {
        let a = derive_seed(1234, "select", 0);
        let b = derive_seed(1234, "dummy", 0);
        let c = derive_seed(1234, "select", 1);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_seed(1234, "select", 0));
    }

    // ---- maximality verification -------------------------------------------
    //
    // The two update maps are linear over GF(2); each has maximal order iff
    // M^(2^n - 1) = I and M^((2^n - 1)/q) != I for every prime factor q.

    fn trial_division_prime(n: u64) -> bool {
        if n < 2 {
            return false;
        }
        let mut d = 2u64;
        while d * d <= n {
            if n % d == 0 {
                return false;
            }
            d += 1;
        }
        true
    }

    fn polymulmod(mut a: u64, mut b: u64, p_low: u64, n: u32) -> u64 {
        let mut r = 0u64;
        let top = 1u64 << n;
        while b != 0 {
            if b & 1 != 0 {
                r ^= a;
            }
            b >>= 1;
            a <<= 1;
            if a & top != 0 {
                a = (a ^ (p_low | top)) & (top - 1);
            }
        }
        r
    }

    fn polypowmod(mut base: u64, mut e: u128, p_low: u64, n: u32) -> u64 {
        let mut r = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                r = polymulmod(r, base, p_low, n);
            }
            base = polymulmod(base, base, p_low, n);
            e >>= 1;
        }
        r
    }

    #[test]
    fn lfsr_polynomial_is_primitive() {
        let factors = [431u64, 9719, 2099863];
        assert_eq!(factors.iter().product::<u64>(), (1u64 << 43) - 1);
        assert!(factors.iter().all(|&f| trial_division_prime(f)));

        let order: u128 = (1u128 << 43) - 1;
        assert_eq!(polypowmod(2, order, LFSR_POLY_LOW, 43), 1);
        for &q in &factors {
            assert_ne!(polypowmod(2, order / q as u128, LFSR_POLY_LOW, 43), 1);
        }
    }

    const NC: usize = CASR_BITS as usize;
    type Mat = [u64; NC];

    fn mat_mul(a: &Mat, b: &Mat) -> Mat {
        let mut r = [0u64; NC];
        for i in 0..NC {
            let mut acc = 0u64;
            let mut row = a[i];
            while row != 0 {
                let j = row.trailing_zeros() as usize;
                acc ^= b[j];
                row &= row - 1;
            }
            r[i] = acc;
        }
        r
    }

    fn mat_identity() -> Mat {
        let mut m = [0u64; NC];
        for (i, row) in m.iter_mut().enumerate() {
            *row = 1 << i;
        }
        m
    }

    fn mat_pow(m: &Mat, mut e: u128) -> Mat {
        let mut base = *m;
        let mut r = mat_identity();
        while e > 0 {
            if e & 1 == 1 {
                r = mat_mul(&r, &base);
            }
            base = mat_mul(&base, &base);
            e >>= 1;
        }
        r
    }

    #[test]
    fn casr_rule_is_maximal_length() {
        let factors = [223u64, 616318177];
        assert_eq!(factors.iter().product::<u64>(), (1u64 << 37) - 1);
        assert!(factors.iter().all(|&f| trial_division_prime(f)));

        // Build the update matrix exactly as step() computes it.
        let mut m = [0u64; NC];
        for (i, row) in m.iter_mut().enumerate() {
            let mut v = 0u64;
            if i > 0 {
                v |= 1 << (i - 1);
            }
            if i + 1 < NC {
                v |= 1 << (i + 1);
            }
            if i as u32 == CASR_RULE150_CELL {
                v |= 1 << i;
            }
            *row = v;
        }
        let order: u128 = (1u128 << 37) - 1;
        let id = mat_identity();
        assert_eq!(mat_pow(&m, order), id);
        for &q in &factors {
            assert_ne!(mat_pow(&m, order / q as u128), id);
        }
    }

    #[test]
    fn matrix_model_matches_step() {
        // One step of the CASR must agree with the matrix used in the
        // maximality proof.
        let mut r = ShuffleRng::from_seed(99);
        for _ in 0..100 {
            let before = r.casr;
            r.step();
            let mut expect = 0u64;
            for i in 0..NC {
                let mut bit = 0u64;
                if i > 0 {
                    bit ^= (before >> (i - 1)) & 1;
                }
                if i + 1 < NC {
                    bit ^= (before >> (i + 1)) & 1;
                }
                if i as u32 == CASR_RULE150_CELL {
                    bit ^= (before >> i) & 1;
                }
                expect |= bit << i;
            }
            assert_eq!(r.casr, expect);
        }
    }
}
