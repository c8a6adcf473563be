//! Sparse byte-addressable memory. Reads of never-written addresses return 0.

use std::collections::HashMap;

use crate::isa::MemWidth;

const PAGE_SHIFT: u32 = 10;
const PAGE_SIZE: usize = 1 << PAGE_SHIFT;

#[derive(Debug, Clone, Default)]
pub struct SparseMem {
    pages: HashMap<u32, Box<[u8; PAGE_SIZE]>>,
}

impl SparseMem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn read_byte(&self, addr: u32) -> u8 {
        match self.pages.get(&(addr >> PAGE_SHIFT)) {
            Some(p) => p[(addr as usize) & (PAGE_SIZE - 1)],
            None => 0,
        }
    }

    pub fn write_byte(&mut self, addr: u32, value: u8) {
        let page = self
            .pages
            .entry(addr >> PAGE_SHIFT)
            .or_insert_with(|| Box::new([0; PAGE_SIZE]));
        page[(addr as usize) & (PAGE_SIZE - 1)] = value;
    }

    /// Little-endian read of `width` bytes. Alignment is checked by callers.
    pub fn read(&self, addr: u32, width: MemWidth) -> u32 {
        let mut v = 0u32;
        for i in 0..width.bytes() {
            v |= (self.read_byte(addr.wrapping_add(i)) as u32) << (8 * i);
        }
        v
    }

    /// Little-endian write of the low `width` bytes of `value`.
    pub fn write(&mut self, addr: u32, value: u32, width: MemWidth) {
        for i in 0..width.bytes() {
            self.write_byte(addr.wrapping_add(i), (value >> (8 * i)) as u8);
        }
    }

    pub fn write_bytes(&mut self, addr: u32, bytes: &[u8]) {
        for (i, b) in bytes.iter().enumerate() {
            self.write_byte(addr.wrapping_add(i as u32), *b);
        }
    }

    pub fn read_bytes(&self, addr: u32, len: usize) -> Vec<u8> {
        (0..len).map(|i| self.read_byte(addr.wrapping_add(i as u32))).collect()
    }

    /// Canonical view for equivalence checks: all nonzero bytes, sorted by
    /// address. A byte explicitly written as 0 compares equal to one never
    /// written, since both read back as 0.
    pub fn nonzero_bytes(&self) -> Vec<(u32, u8)> {
        let mut out = Vec::new();
        let mut pages: Vec<_> = self.pages.iter().collect();
        pages.sort_by_key(|(base, _)| **base);
        for (base, page) in pages {
            for (off, &b) in page.iter().enumerate() {
                if b != 0 {
                    out.push(((base << PAGE_SHIFT) | off as u32, b));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unwritten_reads_zero() {
        let m = SparseMem::new();
        assert_eq!(m.read_byte(0xDEAD_BEEF), 0);
        assert_eq!(m.read(0x1000, MemWidth::Word), 0);
    }

    #[test]
    fn little_endian_round_trip() {
        let mut m = SparseMem::new();
        m.write(0x100, 0x1122_3344, MemWidth::Word);
        assert_eq!(m.read_byte(0x100), 0x44);
        assert_eq!(m.read_byte(0x103), 0x11);
        assert_eq!(m.read(0x100, MemWidth::Word), 0x1122_3344);
        assert_eq!(m.read(0x102, MemWidth::Half), 0x1122);
    }

    #[test]
    fn cross_page_access() {
        let mut m = SparseMem::new();
        m.write(0x3FE, 0xAABB_CCDD, MemWidth::Word);
        assert_eq!(m.read(0x3FE, MemWidth::Word), 0xAABB_CCDD);
    }

    #[test]
    fn zero_writes_equal_untouched() {
        let mut a = SparseMem::new();
        let b = SparseMem::new();
        a.write(0x200, 0, MemWidth::Word);
        assert_eq!(a.nonzero_bytes(), b.nonzero_bytes());
    }
}
