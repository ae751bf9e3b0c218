//! Logical error rate of the matching decoder versus distance.
//!
//! `cargo run --release --example logical_error_scan -- [p] [shots] [d...]`

use std::time::Instant;

use anyhow::Result;
use qec_abort::circuit::build_memory_circuit;
use qec_abort::decoder::{build_decoding_graph, Decoder};
use qec_abort::frame::FrameSimulator;
use qec_abort::layout::{build_layout, CheckKind};
use qec_abort::rng::shot_seed;
use rayon::prelude::*;

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let p: f64 = args.first().map(|s| s.parse()).transpose()?.unwrap_or(0.01);
    let shots: usize = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(20_000);
    let distances: Vec<usize> = if args.len() > 2 {
        args[2..].iter().map(|s| s.parse()).collect::<Result<_, _>>()?
    } else {
        vec![3, 5, 7]
    };
    println!("d,p,shots,failures,ler,seconds");
    for d in distances {
        let start = Instant::now();
        let circuit = build_memory_circuit(&build_layout(d)?, d, p, CheckKind::X)?;
        let graph = build_decoding_graph(&circuit)?;
        let failures: usize = (0..shots)
            .into_par_iter()
            .map_init(
                || (FrameSimulator::new(), Decoder::new(&graph), circuit.empty_history()),
                |(sim, dec, h), i| {
                    sim.sample_into(&circuit, shot_seed(1, i as u64), h);
                    usize::from(!dec.success(h))
                },
            )
            .sum();
        println!(
            "{d},{p},{shots},{failures},{:.5},{:.1}",
            failures as f64 / shots as f64,
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
