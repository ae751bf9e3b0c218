//! Prints the rotated surface-code layout for a distance and checks that
//! every pair of stabilizers and logicals commutes as expected.
//!
//! Usage: `surface_layout [d]`

use anyhow::{ensure, Result};
use qec_abort::layout::{build_layout, check_commutation};

fn main() -> Result<()> {
    let d: usize = std::env::args().nth(1).unwrap_or_else(|| "3".into()).parse()?;
    let layout = build_layout(d)?;
    ensure!(check_commutation(&layout), "commutation check failed");
    print!("{}", layout.to_text());
    println!(
        "# {} data + {} ancilla = {} physical qubits, {} X and {} Z checks",
        layout.n_data(),
        layout.n_checks(),
        layout.n_physical(),
        layout.x_stabilizers().count(),
        layout.z_stabilizers().count()
    );
    Ok(())
}
