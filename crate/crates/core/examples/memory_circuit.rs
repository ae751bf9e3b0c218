//! Builds a noisy memory circuit and prints it with its detector and
//! observable annotations.
//!
//! Usage: `memory_circuit [d] [rounds] [p] [X|Z]`

use anyhow::{bail, Result};
use qec_abort::circuit::build_memory_circuit;
use qec_abort::layout::{build_layout, CheckKind};

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let d: usize = arg(0, "3").parse()?;
    let rounds: usize = arg(1, &d.to_string()).parse()?;
    let p: f64 = arg(2, "0.001").parse()?;
    let basis = match arg(3, "X").as_str() {
        "X" => CheckKind::X,
        "Z" => CheckKind::Z,
        other => bail!("basis must be X or Z, got {other}"),
    };
    let circuit = build_memory_circuit(&build_layout(d)?, rounds, p, basis)?;
    print!("{}", circuit.to_text());
    eprintln!(
        "{} instructions, {} measurements, {} detectors",
        circuit.instructions.len(),
        circuit.n_measurements,
        circuit.n_detectors()
    );
    Ok(())
}
