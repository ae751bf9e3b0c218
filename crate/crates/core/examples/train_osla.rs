//! Trains the two-head lookahead predictor on mixed one- and two-round
//! shots and reports the AUC of each head.
//!
//! Usage: `train_osla [d] [p] [shots] [keep_success] [epochs]`

use std::time::Instant;

use anyhow::Result;
use qec_abort::layout::CheckKind;
use qec_abort::predictor::{auc_standard_error, make_osla_dataset, train, Architecture, OslaOptions, Predictor, TrainConfig};

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let d: usize = arg(0, "5").parse()?;
    let p: f64 = arg(1, "0.001").parse()?;
    let n: usize = arg(2, "1000000").parse()?;
    let keep: f64 = arg(3, "0.01").parse()?;
    let epochs: usize = arg(4, "20").parse()?;

    let start = Instant::now();
    let opts = OslaOptions {
        keep_success: keep,
        ..OslaOptions::default()
    };
    let set = make_osla_dataset(d, p, CheckKind::X, n, 1, opts)?;
    let failures = set.labels.iter().filter(|&&y| y == 0).count();
    println!("{} examples ({failures} failures) in {:.1?}", set.len(), start.elapsed());

    let mut model = Predictor::new(Architecture::TwoHeadMlp, 2, d * d - 1, 7);
    let cfg = TrainConfig {
        max_epochs: epochs,
        seed: 7,
        ..TrainConfig::default()
    };
    let report = train(&mut model, &set, &cfg)?;
    print!("{}", report.loss_csv());
    for (name, a) in ["stop_now", "one_more"].iter().zip(&report.head_auc) {
        match a {
            Some(a) => {
                let se = auc_standard_error(a.auc, a.positives, a.negatives);
                println!("{name}: auc {:.4} ± {:.4} ({} pos, {} neg)", a.auc, se, a.positives, a.negatives);
            }
            None => println!("{name}: single class"),
        }
    }
    println!("total {:.1?}", start.elapsed());
    Ok(())
}
