//! Shuffle randomness and overhead metrics computed from run results:
//! ready-instruction distributions, consecutive-1-ready run lengths,
//! critical-instruction shift, stall breakdowns, and overhead percentages.
//!
//! All metrics are pure functions of [`RunResult`]s and can be replayed from
//! saved traces. Ready-count statistics are computed over executed (non-stall,
//! non-dummy) cycles only; run-length fractions share that denominator, so
//! the run-length histogram sums exactly to the 1-ready bin.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::run::{Action, RunResult, StallBreakdown};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("run contains no executed cycles with ready counts")]
    EmptyRun,
    #[error("critical markers missing or mismatched between runs ({run} vs {baseline})")]
    MarkerMissing { run: usize, baseline: usize },
    #[error("trigger window missing from a run")]
    TriggerMissing,
}

/// Count of executed cycles per ready-instruction count k (1..=N).
pub fn ready_counts(run: &RunResult, n: u8) -> Vec<u64> {
    let mut counts = vec![0u64; n as usize + 1];
    for e in &run.events {
        if let Action::Exec {
            ready_count: Some(k),
            ..
        } = e.action
        {
            counts[(k as usize).min(n as usize)] += 1;
        }
    }
    counts
}

/// Fraction of executed cycles that had exactly k ready instructions, for
/// k in 1..=N. The fractions sum to 1.
pub fn ready_distribution(run: &RunResult, n: u8) -> Result<Vec<f64>, MetricsError> {
    let counts = ready_counts(run, n);
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(MetricsError::EmptyRun);
    }
    Ok((1..=n as usize)
        .map(|k| counts[k] as f64 / total as f64)
        .collect())
}

/// Executed cycles spent in maximal runs of exactly L consecutive 1-ready
/// executions, as counts keyed by L. Stalls, dummies, and cycles with more
/// than one ready instruction break a run.
pub fn one_ready_run_cycle_counts(run: &RunResult) -> BTreeMap<u64, u64> {
    let mut hist = BTreeMap::new();
    let mut current = 0u64;
    let mut flush = |len: &mut u64, hist: &mut BTreeMap<u64, u64>| {
        if *len > 0 {
            *hist.entry(*len).or_insert(0) += *len;
            *len = 0;
        }
    };
    for e in &run.events {
        match e.action {
            Action::Exec {
                ready_count: Some(1),
                ..
            } => current += 1,
            _ => flush(&mut current, &mut hist),
        }
    }
    flush(&mut current, &mut hist);
    hist
}

/// Fraction of executed cycles spent in runs of exactly L consecutive
/// 1-ready executions. Summing over all L gives the 1-ready fraction of
/// [`ready_distribution`].
pub fn one_ready_run_lengths(run: &RunResult, n: u8) -> Result<BTreeMap<u64, f64>, MetricsError> {
    let total: u64 = ready_counts(run, n).iter().sum();
    if total == 0 {
        return Err(MetricsError::EmptyRun);
    }
    Ok(one_ready_run_cycle_counts(run)
        .into_iter()
        .map(|(l, cycles)| (l, cycles as f64 / total as f64))
        .collect())
}

/// Trigger-aligned displacement of each critical dynamic instruction against
/// a baseline run of the same program and inputs: for critical instance k,
/// delta = (cycle_k - trigger_start) - (baseline_cycle_k - baseline_start).
/// Returns a histogram over delta.
pub fn critical_shift(
    run: &RunResult,
    baseline: &RunResult,
) -> Result<BTreeMap<i64, u64>, MetricsError> {
    if run.critical_cycles.is_empty()
        || run.critical_cycles.len() != baseline.critical_cycles.len()
    {
        return Err(MetricsError::MarkerMissing {
            run: run.critical_cycles.len(),
            baseline: baseline.critical_cycles.len(),
        });
    }
    let (rs, _) = run.trigger_window.ok_or(MetricsError::TriggerMissing)?;
    let (bs, _) = baseline.trigger_window.ok_or(MetricsError::TriggerMissing)?;
    let mut hist = BTreeMap::new();
    for (c, b) in run.critical_cycles.iter().zip(&baseline.critical_cycles) {
        let delta = (*c as i64 - rs as i64) - (*b as i64 - bs as i64);
        *hist.entry(delta).or_insert(0) += 1;
    }
    Ok(hist)
}

/// Extra cycles relative to the baseline, in percent.
pub fn overhead_pct(run: &RunResult, baseline: &RunResult) -> f64 {
    (run.cycles as f64 - baseline.cycles as f64) / baseline.cycles as f64 * 100.0
}

/// Bundled per-run metrics, serializable for reports.
#[derive(Debug, Clone, Serialize)]
pub struct ShuffleStats {
    pub cycles: u64,
    pub exec_cycles: u64,
    pub dummy_cycles: u64,
    /// Fraction of executed cycles with k ready instructions, k = 1..=N.
    pub ready_hist: Vec<f64>,
    /// Fraction of executed cycles in maximal 1-ready runs of each length.
    pub run_length_hist: BTreeMap<u64, f64>,
    /// Stall cycles per cause.
    pub stall_breakdown: StallBreakdown,
    /// Percent extra cycles over the baseline run.
    pub overhead_pct: f64,
    /// Histogram of trigger-aligned critical-instruction displacement.
    pub critical_shift_hist: Option<BTreeMap<i64, u64>>,
}

impl ShuffleStats {
    pub fn compute(
        run: &RunResult,
        baseline: &RunResult,
        n: u8,
    ) -> Result<ShuffleStats, MetricsError> {
        Ok(ShuffleStats {
            cycles: run.cycles,
            exec_cycles: run.exec_cycles,
            dummy_cycles: run.dummy_cycles,
            ready_hist: ready_distribution(run, n)?,
            run_length_hist: one_ready_run_lengths(run, n)?,
            stall_breakdown: run.stalls,
            overhead_pct: overhead_pct(run, baseline),
            critical_shift_hist: critical_shift(run, baseline).ok(),
        })
    }
}

/// Mergeable accumulator for seed sweeps; additions are associative, so
/// partitioned sweeps aggregate identically to sequential ones.
#[derive(Debug, Clone, Default)]
pub struct SweepAggregate {
    pub runs: u64,
    pub ready_counts: Vec<u64>,
    pub run_length_cycles: BTreeMap<u64, u64>,
    pub stalls: StallBreakdown,
    pub total_cycles: u64,
    pub total_exec_cycles: u64,
    pub total_dummy_cycles: u64,
    pub baseline_cycles: u64,
    pub critical_shift: BTreeMap<i64, u64>,
    /// Per-run cycle counts for execution-time variation statistics.
    pub cycle_samples: Vec<u64>,
}

impl SweepAggregate {
    pub fn add(&mut self, run: &RunResult, baseline: Option<&RunResult>, n: u8) {
        self.runs += 1;
        let counts = ready_counts(run, n);
        if self.ready_counts.len() < counts.len() {
            self.ready_counts.resize(counts.len(), 0);
        }
        for (a, c) in self.ready_counts.iter_mut().zip(&counts) {
            *a += c;
        }
        for (l, c) in one_ready_run_cycle_counts(run) {
            *self.run_length_cycles.entry(l).or_insert(0) += c;
        }
        self.stalls.accumulate(&run.stalls);
        self.total_cycles += run.cycles;
        self.total_exec_cycles += run.exec_cycles;
        self.total_dummy_cycles += run.dummy_cycles;
        self.cycle_samples.push(run.cycles);
        if let Some(b) = baseline {
            self.baseline_cycles += b.cycles;
            if let Ok(hist) = critical_shift(run, b) {
                for (d, c) in hist {
                    *self.critical_shift.entry(d).or_insert(0) += c;
                }
            }
        }
    }

    pub fn merge(mut self, other: SweepAggregate) -> SweepAggregate {
        self.runs += other.runs;
        if self.ready_counts.len() < other.ready_counts.len() {
            self.ready_counts.resize(other.ready_counts.len(), 0);
        }
        for (i, c) in other.ready_counts.iter().enumerate() {
            self.ready_counts[i] += c;
        }
        for (l, c) in other.run_length_cycles {
            *self.run_length_cycles.entry(l).or_insert(0) += c;
        }
        self.stalls.accumulate(&other.stalls);
        self.total_cycles += other.total_cycles;
        self.total_exec_cycles += other.total_exec_cycles;
        self.total_dummy_cycles += other.total_dummy_cycles;
        self.baseline_cycles += other.baseline_cycles;
        for (d, c) in other.critical_shift {
            *self.critical_shift.entry(d).or_insert(0) += c;
        }
        self.cycle_samples.extend(other.cycle_samples);
        self
    }

    /// Aggregate ready fraction for count k over all runs.
    pub fn ready_fraction(&self, k: usize) -> f64 {
        let total: u64 = self.ready_counts.iter().sum();
        if total == 0 {
            return 0.0;
        }
        self.ready_counts.get(k).copied().unwrap_or(0) as f64 / total as f64
    }

    pub fn mean_overhead_pct(&self) -> f64 {
        (self.total_cycles as f64 - self.baseline_cycles as f64) / self.baseline_cycles as f64
            * 100.0
    }

    pub fn cycle_mean(&self) -> f64 {
        self.total_cycles as f64 / self.runs as f64
    }

    pub fn cycle_std(&self) -> f64 {
        let mean = self.cycle_mean();
        let var = self
            .cycle_samples
            .iter()
            .map(|&c| (c as f64 - mean).powi(2))
            .sum::<f64>()
            / self.runs as f64;
        var.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::run::{CycleEvent, RunOptions, StallCause, WriteEvent};
    use crate::shuffle::{run_shuffled, CoreConfig};
    use crate::workloads;

    fn exec_event(cycle: u64, ready: u8) -> CycleEvent {
        CycleEvent {
            cycle,
            action: Action::Exec {
                pc: 0,
                dyn_index: cycle,
                slot: 0,
                ready_count: Some(ready),
                write: WriteEvent::none(),
            },
        }
    }

    fn synthetic_run(readies: &[Option<u8>]) -> RunResult {
        let events: Vec<CycleEvent> = readies
            .iter()
            .enumerate()
            .map(|(i, r)| match r {
                Some(k) => exec_event(i as u64, *k),
                None => CycleEvent {
                    cycle: i as u64,
                    action: Action::Stall {
                        cause: StallCause::Branch,
                    },
                },
            })
            .collect();
        let cycles = events.len() as u64;
        let exec = readies.iter().filter(|r| r.is_some()).count() as u64;
        RunResult {
            events,
            cycles,
            exec_cycles: exec,
            dummy_cycles: 0,
            stalls: StallBreakdown::default(),
            final_regs: [0; 32],
            final_mem: crate::mem::SparseMem::new(),
            trigger_window: None,
            critical_cycles: vec![],
        }
    }

    #[test]
    fn serial_chain_is_always_one_ready() {
        // Each instruction reads the previous destination: a pure RAW chain.
        let mut a = crate::program::Asm::new(0);
        a.addi(1, 0, 1);
        for _ in 0..20 {
            a.addi(1, 1, 1);
        }
        a.ecall();
        let p = a.build().unwrap();
        let r = run_shuffled(&p, &[], &CoreConfig::new(4), &RunOptions::default()).unwrap();
        let hist = ready_distribution(&r, 4).unwrap();
        assert_eq!(hist[0], 1.0, "RAW chain forces one ready instruction");

        // Single maximal run covering every executed cycle.
        let runs = one_ready_run_cycle_counts(&r);
        assert_eq!(runs.len(), 1);
        assert_eq!(*runs.values().next().unwrap(), r.exec_cycles);
    }

    #[test]
    fn independent_instructions_reach_full_readiness() {
        let mut a = crate::program::Asm::new(0);
        for rep in 0..6 {
            for r in 1..=4u8 {
                a.addi(r, 0, rep + r as i32);
            }
        }
        a.ecall();
        let p = a.build().unwrap();
        let r = run_shuffled(&p, &[], &CoreConfig::new(4), &RunOptions::default()).unwrap();
        let hist = ready_distribution(&r, 4).unwrap();
        assert!(hist[3] > 0.0, "four independent instructions can all be ready");
    }

    #[test]
    fn alternating_readiness_gives_unit_runs() {
        let r = synthetic_run(&[
            Some(1),
            Some(4),
            Some(1),
            Some(4),
            Some(1),
            Some(4),
        ]);
        let hist = one_ready_run_lengths(&r, 4).unwrap();
        assert_eq!(hist.len(), 1);
        assert!((hist[&1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn run_length_mass_equals_one_ready_fraction() {
        let p = workloads::workload_mac5();
        let r = run_shuffled(
            &p,
            &[1, 2, 3, 4, 5],
            &CoreConfig::new(4).with_seed(3),
            &RunOptions::default(),
        )
        .unwrap();
        let hist = ready_distribution(&r, 4).unwrap();
        let runs = one_ready_run_lengths(&r, 4).unwrap();
        let mass: f64 = runs.values().sum();
        assert!((mass - hist[0]).abs() < 1e-9);
    }

    #[test]
    fn stall_interrupts_a_run() {
        let r = synthetic_run(&[Some(1), Some(1), None, Some(1)]);
        let runs = one_ready_run_cycle_counts(&r);
        assert_eq!(runs[&2], 2);
        assert_eq!(runs[&1], 1);
    }

    #[test]
    fn empty_run_rejected() {
        let r = synthetic_run(&[None, None]);
        assert_eq!(ready_distribution(&r, 4).unwrap_err(), MetricsError::EmptyRun);
    }

    #[test]
    fn protect_off_shift_and_overhead_are_zero() {
        let p = workloads::workload_mac5();
        let inputs = [1u8, 2, 3, 4, 5];
        let base = crate::refcore::run_inorder(&p, &inputs, &RunOptions::default()).unwrap();
        let mut config = CoreConfig::new(4).with_seed(5);
        config.protect_enable = false;
        let off = run_shuffled(&p, &inputs, &config, &RunOptions::default()).unwrap();

        assert_eq!(overhead_pct(&off, &base), 0.0);
        let shift = critical_shift(&off, &base).unwrap();
        assert_eq!(shift.len(), 1);
        assert_eq!(shift[&0], base.critical_cycles.len() as u64);
    }

    #[test]
    fn marker_mismatch_detected() {
        let p = workloads::workload_mac5();
        let q = workloads::workload_loop(3);
        let a = crate::refcore::run_inorder(&p, &[1, 1, 1, 1, 1], &RunOptions::default()).unwrap();
        let b = crate::refcore::run_inorder(&q, &[], &RunOptions::default()).unwrap();
        assert!(matches!(
            critical_shift(&b, &a),
            Err(MetricsError::MarkerMissing { .. })
        ));
    }

    #[test]
    fn aggregate_merge_matches_sequential() {
        let p = workloads::workload_mac5();
        let inputs = [7u8, 7, 7, 7, 7];
        let base = crate::refcore::run_inorder(&p, &inputs, &RunOptions::default()).unwrap();
        let runs: Vec<RunResult> = (0..8)
            .map(|s| {
                run_shuffled(
                    &p,
                    &inputs,
                    &CoreConfig::new(4).with_seed(s),
                    &RunOptions::default(),
                )
                .unwrap()
            })
            .collect();
        let mut seq = SweepAggregate::default();
        for r in &runs {
            seq.add(r, Some(&base), 4);
        }
        let mut left = SweepAggregate::default();
        let mut right = SweepAggregate::default();
        for r in &runs[..3] {
            left.add(r, Some(&base), 4);
        }
        for r in &runs[3..] {
            right.add(r, Some(&base), 4);
        }
        let merged = left.merge(right);
        assert_eq!(merged.ready_counts, seq.ready_counts);
        assert_eq!(merged.total_cycles, seq.total_cycles);
        assert_eq!(merged.critical_shift, seq.critical_shift);
        assert_eq!(merged.cycle_samples, seq.cycle_samples);
    }
}
