//! Decodes sampled shots with minimum-weight matching and shows the
//! matched pairs of the first few non-trivial syndromes.
//!
//! Usage: `mwpm_decoding [d] [p] [shots]`

use anyhow::Result;
use qec_abort::decoder::Decoder;
use qec_abort::experiment::{MemoryExperiment, RateEstimate};
use qec_abort::frame::sample_batch;
use qec_abort::layout::CheckKind;

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let d: usize = arg(0, "3").parse()?;
    let p: f64 = arg(1, "0.005").parse()?;
    let n: usize = arg(2, "10000").parse()?;

    let exp = MemoryExperiment::new(d, d, p, CheckKind::X)?;
    println!("{} detectors, {} edges", exp.graph.n_detectors, exp.graph.edges.len());
    let mut dec = Decoder::new(&exp.graph);
    let mut shown = 0;
    let mut failures = 0;
    for h in sample_batch(&exp.circuit, n, 3) {
        let result = dec.decode(&h);
        if result.prediction != h.observable_flip {
            failures += 1;
        }
        if shown < 5 && !result.pairs.is_empty() {
            shown += 1;
            let pairs: Vec<String> = result
                .pairs
                .iter()
                .map(|(a, b)| b.map_or(format!("{a}-B"), |b| format!("{a}-{b}")))
                .collect();
            println!(
                "fired {:?} -> [{}] weight {} predicted flip {} actual {}",
                h.fired().collect::<Vec<_>>(),
                pairs.join(" "),
                result.weight,
                result.prediction,
                h.observable_flip
            );
        }
    }
    let r = RateEstimate::new(failures, n);
    println!("logical error rate {:.5} [{:.5}, {:.5}]", r.rate, r.low, r.high);
    Ok(())
}
