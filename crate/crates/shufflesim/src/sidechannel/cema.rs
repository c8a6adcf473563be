//! Correlation analysis over leakage traces.
//!
//! Every candidate secret value is scored by the Pearson correlation between
//! its predicted Hamming weights and each sample column; the candidate whose
//! best column correlates highest wins. Accumulators hold per-class partial
//! sums (count, per-sample sums) keyed by the relevant input byte, so the
//! per-guess correlations come out of a single pass over the traces and the
//! accumulators merge associatively for parallel or resumed campaigns.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par;
use crate::workloads::SBOX;

use super::LeakTrace;

const GUESSES: usize = 256;

/// Predicted Hamming weight of the first-round S-box output for a plaintext
/// byte under a key-byte guess.
pub fn hypothesis_aes(plaintext_byte: u8, key_guess: u8) -> u32 {
    SBOX[(plaintext_byte ^ key_guess) as usize].count_ones()
}

/// Predicted Hamming weight of the low 32 bits of the product of an unsigned
/// input byte and a signed 8-bit weight guess (the value the multiply
/// writes).
pub fn hypothesis_mac(input_value: u8, weight_guess: u8) -> u32 {
    let product = (input_value as u32).wrapping_mul(weight_guess as i8 as i32 as u32);
    product.count_ones()
}

/// Leakage model relating one input byte and one guess byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisKind {
    AesSbox,
    MacWeight,
}

impl HypothesisKind {
    pub fn predict(self, class: u8, guess: u8) -> u32 {
        match self {
            HypothesisKind::AesSbox => hypothesis_aes(class, guess),
            HypothesisKind::MacWeight => hypothesis_mac(class, guess),
        }
    }

    /// Full class-by-guess prediction table.
    fn table(self) -> Vec<f64> {
        let mut t = vec![0.0; GUESSES * GUESSES];
        for class in 0..GUESSES {
            for guess in 0..GUESSES {
                t[class * GUESSES + guess] = self.predict(class as u8, guess as u8) as f64;
            }
        }
        t
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CemaError {
    #[error("correlation needs at least 2 traces (got {0})")]
    TooFewTraces(usize),
    #[error("no secret units to attack")]
    NoUnits,
    #[error("trace input has {got} bytes but unit {unit} was requested")]
    InputTooShort { unit: usize, got: usize },
}

/// Mergeable per-class statistics over a set of traces, for `units` secret
/// positions and a fixed analysis length (shorter traces are zero-padded).
#[derive(Debug, Clone)]
pub struct CemaAccumulator {
    units: usize,
    n_samples: usize,
    count: u64,
    t_sum: Vec<f64>,
    t_sq: Vec<f64>,
    class_count: Vec<u64>,
    class_sum: Vec<f64>,
}

impl CemaAccumulator {
    pub fn new(units: usize, n_samples: usize) -> Self {
        CemaAccumulator {
            units,
            n_samples,
            count: 0,
            t_sum: vec![0.0; n_samples],
            t_sq: vec![0.0; n_samples],
            class_count: vec![0; units * GUESSES],
            class_sum: vec![0.0; units * GUESSES * n_samples],
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn add(&mut self, trace: &LeakTrace) -> Result<(), CemaError> {
        if trace.input.len() < self.units {
            return Err(CemaError::InputTooShort {
                unit: self.units,
                got: trace.input.len(),
            });
        }
        self.count += 1;
        let n = trace.samples.len().min(self.n_samples);
        for s in 0..n {
            let v = trace.samples[s] as f64;
            self.t_sum[s] += v;
            self.t_sq[s] += v * v;
        }
        for u in 0..self.units {
            let class = trace.input[u] as usize;
            self.class_count[u * GUESSES + class] += 1;
            let base = (u * GUESSES + class) * self.n_samples;
            for s in 0..n {
                self.class_sum[base + s] += trace.samples[s] as f64;
            }
        }
        Ok(())
    }

    pub fn merge(mut self, other: CemaAccumulator) -> CemaAccumulator {
        debug_assert_eq!(self.n_samples, other.n_samples);
        debug_assert_eq!(self.units, other.units);
        self.count += other.count;
        for (a, b) in self.t_sum.iter_mut().zip(&other.t_sum) {
            *a += b;
        }
        for (a, b) in self.t_sq.iter_mut().zip(&other.t_sq) {
            *a += b;
        }
        for (a, b) in self.class_count.iter_mut().zip(&other.class_count) {
            *a += b;
        }
        for (a, b) in self.class_sum.iter_mut().zip(&other.class_sum) {
            *a += b;
        }
        self
    }

    /// Pearson correlation of each guess against each sample column for one
    /// unit. Degenerate columns (constant hypothesis or constant samples)
    /// correlate as 0.
    pub fn correlation_matrix(&self, table: &[f64], unit: usize) -> Vec<Vec<f64>> {
        let t = self.count as f64;
        let n = self.n_samples;
        let denom_t: Vec<f64> = (0..n)
            .map(|s| t * self.t_sq[s] - self.t_sum[s] * self.t_sum[s])
            .collect();
        (0..GUESSES)
            .map(|g| {
                let mut h_sum = 0.0;
                let mut h_sq = 0.0;
                let mut ht = vec![0.0; n];
                for class in 0..GUESSES {
                    let cnt = self.class_count[unit * GUESSES + class];
                    if cnt == 0 {
                        continue;
                    }
                    let h = table[class * GUESSES + g];
                    h_sum += cnt as f64 * h;
                    h_sq += cnt as f64 * h * h;
                    let base = (unit * GUESSES + class) * n;
                    for (s, acc) in ht.iter_mut().enumerate() {
                        *acc += h * self.class_sum[base + s];
                    }
                }
                let denom_h = t * h_sq - h_sum * h_sum;
                (0..n)
                    .map(|s| {
                        let d = denom_h * denom_t[s];
                        if d <= 0.0 {
                            0.0
                        } else {
                            (t * ht[s] - h_sum * self.t_sum[s]) / d.sqrt()
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Per-guess score for one unit: the highest (signed) correlation over
    /// all sample columns.
    fn guess_stats(&self, table: &[f64], unit: usize) -> Vec<f64> {
        self.correlation_matrix(table, unit)
            .into_iter()
            .map(|row| row.into_iter().fold(f64::MIN, f64::max))
            .collect()
    }
}

/// Result for one secret unit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnitReport {
    pub unit: usize,
    pub true_value: u8,
    pub best_guess: u8,
    /// Competition rank of the true value (1 = recovered); ties count only
    /// strictly greater scores.
    pub rank: u32,
    pub stat_true: f64,
    pub stat_best: f64,
    /// Earliest checkpoint from which the true value held rank 1 through the
    /// end of the budget.
    pub min_traces_to_rank1: Option<u64>,
    /// All guesses scored zero (constant hypothesis or constant samples).
    pub degenerate: bool,
}

impl UnitReport {
    pub fn recovered(&self) -> bool {
        self.rank == 1 && !self.degenerate
    }
}

/// Ranks of every unit's true value at one trace-count checkpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointRanks {
    pub traces: u64,
    pub ranks: Vec<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CemaReport {
    pub hypothesis: HypothesisKind,
    pub n_traces: u64,
    pub n_samples: usize,
    pub units: Vec<UnitReport>,
    pub checkpoints: Vec<CheckpointRanks>,
}

impl CemaReport {
    pub fn recovered_count(&self) -> usize {
        self.units.iter().filter(|u| u.recovered()).count()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CemaOptions {
    /// Rank-curve checkpoint stride in traces; 0 evaluates only at the full
    /// budget.
    pub checkpoint_stride: u64,
}

impl Default for CemaOptions {
    fn default() -> Self {
        CemaOptions {
            checkpoint_stride: 50,
        }
    }
}

fn rank_of(stats: &[f64], truth: u8) -> u32 {
    let st = stats[truth as usize];
    1 + stats.iter().filter(|&&s| s > st).count() as u32
}

/// Runs the correlation attack over the traces for every secret unit,
/// evaluating rank checkpoints along the way.
pub fn cema(
    traces: &[LeakTrace],
    kind: HypothesisKind,
    truth: &[u8],
    options: &CemaOptions,
) -> Result<CemaReport, CemaError> {
    if traces.len() < 2 {
        return Err(CemaError::TooFewTraces(traces.len()));
    }
    if truth.is_empty() {
        return Err(CemaError::NoUnits);
    }
    let units = truth.len();
    let n_samples = traces.iter().map(|t| t.len()).max().unwrap();
    let table = kind.table();

    let stride = if options.checkpoint_stride == 0 {
        traces.len()
    } else {
        options.checkpoint_stride as usize
    };

    let mut master = CemaAccumulator::new(units, n_samples);
    let mut checkpoints = Vec::new();
    let mut chunk_start = 0usize;
    while chunk_start < traces.len() {
        let chunk = &traces[chunk_start..(chunk_start + stride).min(traces.len())];
        // Validate inputs up front so parallel folding cannot hide errors.
        for t in chunk {
            if t.input.len() < units {
                return Err(CemaError::InputTooShort {
                    unit: units,
                    got: t.input.len(),
                });
            }
        }
        let partial = par::fold_indexed(
            chunk.len(),
            || CemaAccumulator::new(units, n_samples),
            |mut acc, i| {
                acc.add(&chunk[i]).expect("validated above");
                acc
            },
            CemaAccumulator::merge,
        );
        master = master.merge(partial);
        chunk_start += chunk.len();

        let ranks: Vec<u32> = par::map_indexed(units, |u| {
            rank_of(&master.guess_stats(&table, u), truth[u])
        });
        checkpoints.push(CheckpointRanks {
            traces: master.count(),
            ranks,
        });
    }

    let unit_reports: Vec<UnitReport> = par::map_indexed(units, |u| {
        let stats = master.guess_stats(&table, u);
        let degenerate = stats.iter().all(|&s| s == 0.0);
        let best = stats
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(g, _)| g as u8)
            .unwrap_or(0);
        let rank = if degenerate {
            GUESSES as u32
        } else {
            rank_of(&stats, truth[u])
        };
        let mut min_traces = None;
        for cp in checkpoints.iter().rev() {
            if cp.ranks[u] == 1 {
                min_traces = Some(cp.traces);
            } else {
                break;
            }
        }
        UnitReport {
            unit: u,
            true_value: truth[u],
            best_guess: best,
            rank,
            stat_true: stats[truth[u] as usize],
            stat_best: stats[best as usize],
            min_traces_to_rank1: if degenerate { None } else { min_traces },
            degenerate,
        }
    });

    Ok(CemaReport {
        hypothesis: kind,
        n_traces: master.count(),
        n_samples,
        units: unit_reports,
        checkpoints,
    })
}
