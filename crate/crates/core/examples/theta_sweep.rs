//! Trains the threshold predictor at one (d, p), replays fresh shots and
//! prints efficiency against the abort threshold.
//!
//! Usage: `theta_sweep [d] [p] [train_shots] [replay_shots] [epochs] [grid_points] [seed]`

use std::time::Instant;

use anyhow::Result;
use qec_abort::experiment::{sample_labelled, MemoryExperiment};
use qec_abort::layout::CheckKind;
use qec_abort::policy::{count_peaks, efficiency_row, median3, theta_grid, CostModel, ReplaySet, EFFICIENCY_HEADER};
use qec_abort::predictor::{make_prefix_dataset, train, Architecture, Predictor, TrainConfig};

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let d: usize = arg(0, "5").parse()?;
    let p: f64 = arg(1, "0.01").parse()?;
    let n_train: usize = arg(2, "5000").parse()?;
    let n_replay: usize = arg(3, "20000").parse()?;
    let epochs: usize = arg(4, "10").parse()?;
    let grid: usize = arg(5, "20").parse()?;
    let seed: u64 = arg(6, "1").parse()?;

    let start = Instant::now();
    let exp = MemoryExperiment::new(d, d, p, CheckKind::X)?;
    let shots = sample_labelled(&exp, n_train, seed, 1.0);
    let histories: Vec<_> = shots.iter().map(|s| s.history.clone()).collect();
    let labels: Vec<bool> = shots.iter().map(|s| s.success).collect();
    let set = make_prefix_dataset(&histories, &labels)?;
    let mut model = Predictor::new(Architecture::Cnn1d, d, exp.layout.n_checks(), seed + 2);
    let report = train(&mut model, &set, &TrainConfig { max_epochs: epochs, seed: seed + 2, ..TrainConfig::default() })?;
    eprintln!("trained in {:.1?}, head auc {:?}", start.elapsed(), report.head_auc[0]);

    let replay_seed = seed + 1000;
    let replay_shots = sample_labelled(&exp, n_replay, replay_seed, 1.0);
    let histories: Vec<_> = replay_shots.iter().map(|s| s.history.clone()).collect();
    let labels: Vec<bool> = replay_shots.iter().map(|s| s.success).collect();
    let replay = ReplaySet::build(&histories, &labels, Some(&model), None)?;
    eprintln!("replay cached in {:.1?}", start.elapsed());

    let cost = CostModel::default();
    println!("{EFFICIENCY_HEADER}");
    println!("{}", efficiency_row("fd", d, p, None, &replay.fd(&cost), replay_seed));
    let sweep = replay.sweep_theta(&cost, &theta_grid(grid), false)?;
    for (theta, r) in &sweep {
        println!("{}", efficiency_row("adabort", d, p, Some(*theta), r, replay_seed));
    }
    let etas: Vec<f64> = sweep.iter().map(|s| s.1.eta).collect();
    eprintln!("peaks after smoothing: {}", count_peaks(&median3(&etas)));
    Ok(())
}
