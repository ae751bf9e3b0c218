//! Samples shots with the Pauli-frame simulator, reports per-detector
//! firing rates and writes the batch as a shot file and as CSV.
//!
//! Usage: `frame_sampling [d] [p] [shots] [out_prefix]`

use std::time::Instant;

use anyhow::Result;
use qec_abort::circuit::build_memory_circuit;
use qec_abort::dataset::{ShotFile, ShotFileHeader};
use qec_abort::frame::sample_batch;
use qec_abort::layout::{build_layout, CheckKind};

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let d: usize = arg(0, "3").parse()?;
    let p: f64 = arg(1, "0.001").parse()?;
    let n: usize = arg(2, "100000").parse()?;
    let prefix = arg(3, "");

    let circuit = build_memory_circuit(&build_layout(d)?, d, p, CheckKind::X)?;
    let start = Instant::now();
    let shots = sample_batch(&circuit, n, 1);
    let elapsed = start.elapsed();
    let mut counts = vec![0usize; circuit.n_detectors()];
    for h in &shots {
        for id in h.fired() {
            counts[id] += 1;
        }
    }
    let flips = shots.iter().filter(|h| h.observable_flip).count();
    println!("detector,round,check,rate");
    for (id, c) in counts.iter().enumerate() {
        let det = circuit.detector(id);
        let round = det.round.map_or("terminal".to_string(), |r| r.to_string());
        println!("{id},{round},{},{}", det.check, *c as f64 / n as f64);
    }
    eprintln!("{n} shots in {elapsed:.2?}; raw observable flip rate {}", flips as f64 / n as f64);
    if !prefix.is_empty() {
        let file = ShotFile::new(ShotFileHeader::for_circuit(&circuit), shots)?;
        std::fs::write(format!("{prefix}.qshot"), file.to_bytes()?)?;
        std::fs::write(format!("{prefix}.csv"), file.to_csv())?;
    }
    Ok(())
}
