//! Trains the CNN failure predictor on prefixes of full-depth shots and
//! reports validation ROC-AUC.
//!
//! Usage: `train_adabort [d] [p] [shots] [keep_success] [epochs]`

use std::time::Instant;

use anyhow::Result;
use qec_abort::experiment::{sample_labelled, MemoryExperiment};
use qec_abort::layout::CheckKind;
use qec_abort::predictor::{auc_standard_error, make_prefix_dataset, train, Architecture, Predictor, TrainConfig};

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let d: usize = arg(0, "5").parse()?;
    let p: f64 = arg(1, "0.001").parse()?;
    let n: usize = arg(2, "1000000").parse()?;
    let keep: f64 = arg(3, "0.01").parse()?;
    let epochs: usize = arg(4, "20").parse()?;

    let start = Instant::now();
    let exp = MemoryExperiment::new(d, d, p, CheckKind::X)?;
    let shots = sample_labelled(&exp, n, 1, keep);
    let failures = shots.iter().filter(|s| !s.success).count();
    println!("sampled {n} shots, kept {} ({failures} failures) in {:.1?}", shots.len(), start.elapsed());

    let histories: Vec<_> = shots.iter().map(|s| s.history.clone()).collect();
    let labels: Vec<bool> = shots.iter().map(|s| s.success).collect();
    let set = make_prefix_dataset(&histories, &labels)?;
    let mut model = Predictor::new(Architecture::Cnn1d, d, exp.layout.n_checks(), 7);
    let cfg = TrainConfig {
        max_epochs: epochs,
        seed: 7,
        ..TrainConfig::default()
    };
    let report = train(&mut model, &set, &cfg)?;
    print!("{}", report.loss_csv());
    if let Some(a) = report.head_auc[0] {
        let se = auc_standard_error(a.auc, a.positives, a.negatives);
        println!("val auc {:.4} ± {:.4} ({} pos, {} neg)", a.auc, se, a.positives, a.negatives);
    }
    println!("total {:.1?}", start.elapsed());
    Ok(())
}
