//! Synthetic EM side-channel harness: Hamming-weight leakage traces from run
//! results, trace campaigns over the attack targets (in-order, shuffled, and
//! a dummy-insertion-only core in the style of a hardened in-order design),
//! trace-length filtering, and correlation analysis.

mod cema;
mod container;

pub use cema::{
    cema, hypothesis_aes, hypothesis_mac, CemaAccumulator, CemaError, CemaOptions, CemaReport,
    HypothesisKind, UnitReport,
};
pub use container::{append_traces, read_container, write_container, CampaignHeader, ContainerError};

use serde::{Deserialize, Serialize};

use crate::isa::Mnemonic;
use crate::program::Program;
use crate::refcore::{self, instr_index, run_inorder};
use crate::rng::{derive_seed, ShuffleRng};
use crate::run::{Action, CycleEvent, RunError, RunOptions, RunResult, StallBreakdown, WriteEvent};
use crate::semantics::alu_op;
use crate::shuffle::{run_shuffled, CoreConfig};
use crate::{par, workloads};

use rand::Rng;
use rand_distr::{Distribution, Normal};

/// One synthesized leakage trace: per-cycle samples within the trigger
/// window, tagged with the run's input bytes and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct LeakTrace {
    pub samples: Vec<f32>,
    pub input: Vec<u8>,
    pub seed: u64,
}

impl LeakTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Which core a campaign attacks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TargetMode {
    /// Unprotected in-order baseline.
    InOrder,
    /// The shuffling core; the per-trace run seed overrides `config.seed`.
    Shuffled(CoreConfig),
    /// In-order core with dummy insertion only: opcodes ADD/AND/MUL/DIV
    /// costing 1/1/2/37 cycles, the long DIV dominating run-length spread.
    DummyOnly { dii: u8 },
}

impl TargetMode {
    pub fn name(&self) -> &'static str {
        match self {
            TargetMode::InOrder => "inorder",
            TargetMode::Shuffled(_) => "shuffle",
            TargetMode::DummyOnly { .. } => "dummy-only",
        }
    }
}

/// Per-cycle Hamming weight of written values plus Gaussian noise, clipped
/// to the trigger window.
pub fn synth_trace(run: &RunResult, sigma: f64, noise_seed: u64, input: &[u8]) -> LeakTrace {
    let (start, end) = run
        .trigger_window
        .unwrap_or((0, run.cycles.saturating_sub(1)));
    let mut rng = ShuffleRng::from_seed(noise_seed);
    let normal = (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("valid sigma"));
    let samples = run.events[start as usize..=(end as usize)]
        .iter()
        .map(|e| {
            let hw = e.write().hamming_weight() as f64;
            let noise = normal.map_or(0.0, |n| n.sample(&mut rng));
            (hw + noise) as f32
        })
        .collect();
    LeakTrace {
        samples,
        input: input.to_vec(),
        seed: noise_seed,
    }
}

/// In-order execution with random dummy instructions inserted every
/// 0..=DII real instructions. Dummies leak like real instructions but have
/// no architectural effect; their uneven cycle costs stretch the run.
pub fn run_dummy_inorder(
    program: &Program,
    inputs: &[u8],
    dii: u8,
    seed: u64,
    options: &RunOptions,
) -> Result<RunResult, RunError> {
    assert!(dii > 0, "dummy-only mode needs a nonzero interval");
    const KINDS: [(Mnemonic, u32); 4] = [
        (Mnemonic::Add, 1),
        (Mnemonic::And, 1),
        (Mnemonic::Mul, 2),
        (Mnemonic::Div, 37),
    ];
    let decoded = refcore::predecode(program);
    let mut state = refcore::ArchState::new(program.base_address);
    state.mem = refcore::init_memory(program, inputs);

    let mut is_critical = vec![false; program.words.len()];
    for &m in &program.critical_markers {
        is_critical[m] = true;
    }

    let mut rng = ShuffleRng::from_seed(derive_seed(seed, "dummy", 0));
    let mut countdown = rng.next_uniform(dii as u32 + 1);

    let mut events = Vec::new();
    let mut dummy_cycles = 0u64;
    let mut exec_cycles = 0u64;
    let mut critical_cycles = Vec::new();
    let mut trigger_start_cycle = None;
    let mut trigger_end_cycle = None;
    let mut dyn_index = 0u64;

    while !state.halted {
        if events.len() as u64 >= options.max_cycles {
            return Err(RunError::MaxCyclesExceeded {
                limit: options.max_cycles,
            });
        }
        if countdown == 0 {
            // One dummy, costing its full latency; the result leaks on the
            // final cycle.
            let (kind, cost) = KINDS[rng.next_uniform(4) as usize];
            let a = state.regs[rng.next_uniform(32) as usize];
            let b = state.regs[rng.next_uniform(32) as usize];
            let value = alu_op(kind, a, b);
            for c in 0..cost {
                let write = if c == cost - 1 {
                    WriteEvent::reg(value)
                } else {
                    WriteEvent::none()
                };
                events.push(CycleEvent {
                    cycle: events.len() as u64,
                    action: Action::DummyExec { write },
                });
            }
            dummy_cycles += cost as u64;
            countdown = rng.next_uniform(dii as u32 + 1);
            continue;
        }

        let cycle = events.len() as u64;
        let idx =
            instr_index(program, state.pc).ok_or(RunError::FetchOutOfRange { pc: state.pc })?;
        let instr = decoded[idx].clone()?;
        let write = refcore::step_inorder(&mut state, &instr)?;
        events.push(CycleEvent {
            cycle,
            action: Action::Exec {
                pc: instr.pc,
                dyn_index,
                slot: 0,
                ready_count: None,
                write,
            },
        });
        exec_cycles += 1;
        dyn_index += 1;
        countdown -= 1;
        if idx == program.trigger_start && trigger_start_cycle.is_none() {
            trigger_start_cycle = Some(cycle);
        }
        if idx == program.trigger_end {
            trigger_end_cycle = Some(cycle);
        }
        if is_critical[idx] {
            critical_cycles.push(cycle);
        }
        if options.stop_after_trigger && trigger_end_cycle.is_some() {
            break;
        }
    }

    let cycles = events.len() as u64;
    Ok(RunResult {
        events,
        cycles,
        exec_cycles,
        dummy_cycles,
        stalls: StallBreakdown::default(),
        final_regs: state.regs,
        final_mem: state.mem,
        trigger_window: match (trigger_start_cycle, trigger_end_cycle) {
            (Some(s), Some(e)) if s <= e => Some((s, e)),
            _ => None,
        },
        critical_cycles,
    })
}

/// Runs the program once on the selected target.
pub fn run_target(
    program: &Program,
    inputs: &[u8],
    mode: &TargetMode,
    run_seed: u64,
    options: &RunOptions,
) -> Result<RunResult, RunError> {
    match mode {
        TargetMode::InOrder => run_inorder(program, inputs, options),
        TargetMode::Shuffled(config) => {
            let mut config = config.clone();
            config.seed = run_seed;
            run_shuffled(program, inputs, &config, options)
        }
        TargetMode::DummyOnly { dii } => run_dummy_inorder(program, inputs, *dii, run_seed, options),
    }
}

/// Pre-generates `count` random input vectors of `len` bytes each,
/// deterministically from the campaign seed.
pub fn generate_inputs(campaign_seed: u64, count: usize, len: usize) -> Vec<Vec<u8>> {
    (0..count)
        .map(|i| {
            let mut rng = ShuffleRng::from_seed(derive_seed(campaign_seed, "input", i as u64));
            (0..len).map(|_| rng.random::<u8>()).collect()
        })
        .collect()
}

/// Collects one leakage trace per input, each with a fresh run seed and
/// noise seed derived from the campaign seed by trace index. Deterministic
/// and embarrassingly parallel across inputs; `base_index` offsets the seed
/// derivation so interrupted campaigns resume identically.
pub fn collect(
    program: &Program,
    mode: &TargetMode,
    inputs: &[Vec<u8>],
    sigma: f64,
    campaign_seed: u64,
    base_index: u64,
    options: &RunOptions,
) -> Result<Vec<LeakTrace>, RunError> {
    let results = par::map_indexed(inputs.len(), |i| {
        let idx = base_index + i as u64;
        let run_seed = derive_seed(campaign_seed, "run", idx);
        let noise_seed = derive_seed(campaign_seed, "noise", idx);
        let run = run_target(program, &inputs[i], mode, run_seed, options)?;
        Ok(synth_trace(&run, sigma, noise_seed, &inputs[i]))
    });
    results.into_iter().collect()
}

/// Keeps only traces whose length falls within `[min_len, max_len]` — the
/// alignment step that defeats dummy-insertion-only defenses by selecting
/// traces of comparable length. May return an empty subset.
pub fn length_filter(traces: &[LeakTrace], window: (usize, usize)) -> Vec<LeakTrace> {
    let (lo, hi) = window;
    traces
        .iter()
        .filter(|t| t.len() >= lo && t.len() <= hi)
        .cloned()
        .collect()
}

/// Window around the most common trace length (the dominant cluster),
/// +/- `margin` cycles.
pub fn dominant_length_window(traces: &[LeakTrace], margin: usize) -> (usize, usize) {
    let mut counts = std::collections::HashMap::new();
    for t in traces {
        *counts.entry(t.len()).or_insert(0usize) += 1;
    }
    let mode = counts
        .into_iter()
        .max_by_key(|&(len, c)| (c, std::cmp::Reverse(len)))
        .map(|(len, _)| len)
        .unwrap_or(0);
    (mode.saturating_sub(margin), mode + margin)
}

/// Standard workload descriptors used by campaigns and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackWorkload {
    Aes128,
    Mac5,
}

impl AttackWorkload {
    pub fn program(self) -> Program {
        match self {
            AttackWorkload::Aes128 => workloads::workload_aes128(),
            AttackWorkload::Mac5 => workloads::workload_mac5(),
        }
    }

    pub fn input_len(self) -> usize {
        match self {
            AttackWorkload::Aes128 => 16,
            AttackWorkload::Mac5 => 5,
        }
    }

    pub fn hypothesis(self) -> HypothesisKind {
        match self {
            AttackWorkload::Aes128 => HypothesisKind::AesSbox,
            AttackWorkload::Mac5 => HypothesisKind::MacWeight,
        }
    }

    /// Ground-truth secret bytes: the embedded AES key, or the default MAC
    /// weights reinterpreted as bytes.
    pub fn truth(self) -> Vec<u8> {
        match self {
            AttackWorkload::Aes128 => workloads::AES_DEFAULT_KEY.to_vec(),
            AttackWorkload::Mac5 => workloads::MAC_DEFAULT_WEIGHTS
                .iter()
                .map(|w| *w as u8)
                .collect(),
        }
    }
}
