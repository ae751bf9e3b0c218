//! Compares fixed-depth, lookahead and threshold policies on identical
//! replayed shots, training both predictors first.
//!
//! Usage: `policy_benchmark [d] [p] [train_shots] [replay_shots] [epochs]`

use anyhow::Result;
use qec_abort::experiment::{sample_labelled, MemoryExperiment};
use qec_abort::layout::CheckKind;
use qec_abort::policy::{efficiency_row, theta_grid, CostModel, ReplaySet, DEFAULT_C_GRID, EFFICIENCY_HEADER};
use qec_abort::predictor::{make_osla_dataset, make_prefix_dataset, train, Architecture, OslaOptions, Predictor, TrainConfig};

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let d: usize = arg(0, "3").parse()?;
    let p: f64 = arg(1, "0.01").parse()?;
    let n_train: usize = arg(2, "4000").parse()?;
    let n_replay: usize = arg(3, "20000").parse()?;
    let epochs: usize = arg(4, "10").parse()?;
    let cfg = TrainConfig {
        max_epochs: epochs,
        ..TrainConfig::default()
    };

    let exp = MemoryExperiment::new(d, d, p, CheckKind::X)?;
    let shots = sample_labelled(&exp, n_train, 1, 1.0);
    let (hs, ys): (Vec<_>, Vec<_>) = shots.into_iter().map(|s| (s.history, s.success)).unzip();
    let mut cnn = Predictor::new(Architecture::Cnn1d, d, exp.layout.n_checks(), 1);
    train(&mut cnn, &make_prefix_dataset(&hs, &ys)?, &cfg)?;
    let osla_set = make_osla_dataset(d, p, CheckKind::X, 4 * n_train, 2, OslaOptions::default())?;
    let mut mlp = Predictor::new(Architecture::TwoHeadMlp, 2, exp.layout.n_checks(), 2);
    train(&mut mlp, &osla_set, &cfg)?;

    let replay_shots = sample_labelled(&exp, n_replay, 3, 1.0);
    let (hs, ys): (Vec<_>, Vec<_>) = replay_shots.into_iter().map(|s| (s.history, s.success)).unzip();
    let replay = ReplaySet::build(&hs, &ys, Some(&cnn), Some(&mlp))?;
    let cost = CostModel::default();
    println!("{EFFICIENCY_HEADER}");
    println!("{}", efficiency_row("fd", d, p, None, &replay.fd(&cost), 3));
    for (c, r) in replay.sweep_c(&cost, &DEFAULT_C_GRID)? {
        println!("{}", efficiency_row("osla", d, p, Some(c), &r, 3));
    }
    for (theta, r) in replay.sweep_theta(&cost, &theta_grid(20), false)? {
        println!("{}", efficiency_row("adabort", d, p, Some(theta), &r, 3));
    }
    Ok(())
}
