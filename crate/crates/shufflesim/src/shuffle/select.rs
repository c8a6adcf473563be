//! Nearest-ready instruction selection.
//!
//! The selector picks the ready instruction closest to a random index,
//! probing r, r+1, r-1, r+2, r-2, ... with out-of-range probes skipped. The
//! probe orders are precomputed per random value (the D-Table); selection is
//! a row-first scan of the column for the drawn value.

/// Precomputed probe orders, one column per random value 0..N-1.
#[derive(Debug, Clone)]
pub struct DTable {
    n: usize,
    columns: Vec<Vec<u8>>,
}

impl DTable {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1 && n <= 8);
        let columns = (0..n)
            .map(|r| {
                let mut order = Vec::with_capacity(n);
                order.push(r as u8);
                for d in 1..n {
                    if r + d < n {
                        order.push((r + d) as u8);
                    }
                    if r >= d {
                        order.push((r - d) as u8);
                    }
                }
                order
            })
            .collect();
        DTable { n, columns }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Probe order for random value `r`.
    pub fn column(&self, r: usize) -> &[u8] {
        &self.columns[r]
    }
}

/// First ready slot in the distance order for random value `r`.
/// `ready_mask` must be nonzero and is guaranteed to produce a hit.
pub fn select_index(r: usize, ready_mask: u8, table: &DTable) -> usize {
    debug_assert!(ready_mask != 0);
    debug_assert!(r < table.n);
    for &slot in table.column(r) {
        if ready_mask & (1 << slot) != 0 {
            return slot as usize;
        }
    }
    unreachable!("nonzero ready mask always yields a selection");
}
