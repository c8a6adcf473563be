//! Scratch calibration harness (not part of the deliverable surface; used to
//! pick acceptance-test campaign parameters).
use shufflesim::run::RunOptions;
use shufflesim::shuffle::{CoreConfig, OptionFlags};
use shufflesim::sidechannel::*;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let what = args.get(1).map(|s| s.as_str()).unwrap_or("inorder");
    let opts = RunOptions { stop_after_trigger: true, ..Default::default() };

    match what {
        "inorder" => {
            // Criterion 8 shape: sigma 0.5, 5000 budget.
            for wl in [AttackWorkload::Mac5, AttackWorkload::Aes128] {
                let t0 = std::time::Instant::now();
                let program = wl.program();
                let inputs = generate_inputs(1001, 5000, wl.input_len());
                let traces = collect(&program, &TargetMode::InOrder, &inputs, 0.5, 1001, 0, &opts).unwrap();
                let report = cema(&traces, wl.hypothesis(), &wl.truth(), &CemaOptions { checkpoint_stride: 50 }).unwrap();
                println!("{:?} inorder sigma=0.5: recovered {}/{} in {:?}", wl, report.recovered_count(), report.units.len(), t0.elapsed());
                for u in &report.units {
                    println!("  unit {}: true {:#04x} best {:#04x} rank {} stat_true {:.3} min_traces {:?}",
                        u.unit, u.true_value, u.best_guess, u.rank, u.stat_true, u.min_traces_to_rank1);
                }
            }
        }
        "shuffle" => {
            // How resistant is shuffle N=4 F at various sigma/budgets?
            let sigma: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(8.0);
            let n: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(20000);
            let wl = AttackWorkload::Aes128;
            let program = wl.program();
            let config = CoreConfig::new(4).with_options(OptionFlags::parse("F").unwrap());
            let t0 = std::time::Instant::now();
            let inputs = generate_inputs(42, n, wl.input_len());
            let traces = collect(&program, &TargetMode::Shuffled(config), &inputs, sigma, 42, 0, &opts).unwrap();
            println!("collect {:?} len[0]={} max={}", t0.elapsed(), traces[0].len(), traces.iter().map(|t|t.len()).max().unwrap());
            let report = cema(&traces, wl.hypothesis(), &wl.truth(), &CemaOptions { checkpoint_stride: 0 }).unwrap();
            println!("aes shuffle(F,4) sigma={} n={}: recovered {}/16 in {:?}", sigma, n, report.recovered_count(), t0.elapsed());
            for u in &report.units {
                println!("  unit {:2}: rank {:3} stat_true {:.4} stat_best {:.4} best={:#04x} true={:#04x}", u.unit, u.rank, u.stat_true, u.stat_best, u.best_guess, u.true_value);
            }
        }
        "dummy" => {
            let sigma: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(8.0);
            let n: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(20000);
            let margin: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(2);
            let wl = AttackWorkload::Aes128;
            let program = wl.program();
            let t0 = std::time::Instant::now();
            let inputs = generate_inputs(43, n, wl.input_len());
            let traces = collect(&program, &TargetMode::DummyOnly { dii: 16 }, &inputs, sigma, 43, 0, &opts).unwrap();
            let lens: Vec<usize> = traces.iter().map(|t| t.len()).collect();
            let (lo, hi) = dominant_length_window(&traces, margin);
            let filtered = length_filter(&traces, (lo, hi));
            println!("dummy-only: {} traces, len range {}..{}, window {}..{} keeps {} ({:.1}%) [{:?}]",
                n, lens.iter().min().unwrap(), lens.iter().max().unwrap(), lo, hi, filtered.len(), 100.0*filtered.len() as f64/n as f64, t0.elapsed());
            let naive = cema(&traces, wl.hypothesis(), &wl.truth(), &CemaOptions { checkpoint_stride: 0 }).unwrap();
            let post = cema(&filtered, wl.hypothesis(), &wl.truth(), &CemaOptions { checkpoint_stride: 0 }).unwrap();
            println!("naive recovered {}/16; filtered recovered {}/16", naive.recovered_count(), post.recovered_count());
            for (a, b) in naive.units.iter().zip(&post.units) {
                println!("  unit {:2}: naive rank {:3} stat {:.4} | filtered rank {:3} stat {:.4}{}",
                    a.unit, a.rank, a.stat_true, b.rank, b.stat_true,
                    if a.rank != 1 && b.rank == 1 { "  <-- FLIP" } else { "" });
            }
        }
        _ => eprintln!("unknown mode"),
    }
}
