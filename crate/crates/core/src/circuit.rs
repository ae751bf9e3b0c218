//! Noisy memory-experiment circuits with detector annotations.
//!
//! A memory experiment prepares a logical eigenstate ideally, runs `rounds`
//! rounds of syndrome extraction and finishes with a transversal readout of
//! every data qubit in the memory basis. Each round applies, in order:
//!
//! 1. `DEPOLARIZE1(p)` on every data qubit,
//! 2. `H` on the X-check ancillas,
//! 3. four CNOT layers, each CNOT followed by `DEPOLARIZE2(p)` on its pair,
//! 4. `H` on the X-check ancillas,
//! 5. `FLIP(p)` then `M` on every ancilla, then a noiseless `R`.
//!
//! The final readout is also preceded by `FLIP(p)` on every data qubit.
//!
//! Measurement outcomes are expressed relative to the noiseless reference
//! record, which is all zeros under the conventions below: checks of the
//! memory basis read `+1` from the start, the other checks are randomised
//! by the first round and that random reference value is taken as 0.
//!
//! Detectors:
//! * round 1, every check: its round-1 outcome alone;
//! * round `t > 1`, every check: outcomes of rounds `t - 1` and `t`;
//! * terminal, memory-basis checks only: last-round outcome XOR the
//!   product of the final data readouts over the check's support.
//!
//! The observable is the product of the final readouts over the logical
//! support of the memory basis.

use std::fmt::{self, Write as _};

use crate::error::{Error, Result};
use crate::layout::{CheckKind, CodeLayout};
use crate::syndrome::SyndromeHistory;

/// Basis of the memory experiment: `X` prepares `|+_L⟩` and reads out
/// `X_L`, `Z` prepares `|0_L⟩` and reads out `Z_L`.
pub type Basis = CheckKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate1 {
    H,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Instruction {
    Reset(u32),
    Clifford1(Gate1, u32),
    Cnot(u32, u32),
    Depolarize1 { p: f64, q: u32 },
    Depolarize2 { p: f64, c: u32, t: u32 },
    /// Classical flip of the next measurement result on `q`.
    FlipBeforeMeasure { p: f64, q: u32 },
    /// Z-basis measurement; appends one bit to the measurement record.
    Measure(u32),
}

impl Instruction {
    pub fn is_noise(&self) -> bool {
        matches!(
            self,
            Instruction::Depolarize1 { .. }
                | Instruction::Depolarize2 { .. }
                | Instruction::FlipBeforeMeasure { .. }
        )
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Instruction::Reset(q) => write!(f, "R {q}"),
            Instruction::Clifford1(Gate1::H, q) => write!(f, "H {q}"),
            Instruction::Cnot(c, t) => write!(f, "CX {c} {t}"),
            Instruction::Depolarize1 { p, q } => write!(f, "DEPOLARIZE1({p}) {q}"),
            Instruction::Depolarize2 { p, c, t } => write!(f, "DEPOLARIZE2({p}) {c} {t}"),
            Instruction::FlipBeforeMeasure { p, q } => write!(f, "FLIP({p}) {q}"),
            Instruction::Measure(q) => write!(f, "M {q}"),
        }
    }
}

/// Parity of a set of measurement-record bits, tagged with where it lives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Detector {
    /// 0-based round; `None` for terminal detectors.
    pub round: Option<usize>,
    pub check: usize,
    pub measurements: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct AnnotatedCircuit {
    pub distance: usize,
    pub rounds: usize,
    pub error_rate: f64,
    pub basis: Basis,
    pub n_qubits: usize,
    pub n_checks: usize,
    /// Pauli type of each check.
    pub check_kinds: Vec<CheckKind>,
    pub instructions: Vec<Instruction>,
    /// Index of the first instruction of each round.
    pub round_starts: Vec<usize>,
    pub n_measurements: usize,
    /// Round detectors, round-major, exactly `rounds * n_checks` of them.
    pub detectors: Vec<Detector>,
    /// Terminal detectors of the memory-basis checks.
    pub terminal: Vec<Detector>,
    pub observable: Vec<u32>,
}

impl AnnotatedCircuit {
    pub fn n_detectors(&self) -> usize {
        self.detectors.len() + self.terminal.len()
    }

    /// Detector by round-major id (terminal detectors follow the rounds).
    pub fn detector(&self, id: usize) -> &Detector {
        if id < self.detectors.len() {
            &self.detectors[id]
        } else {
            &self.terminal[id - self.detectors.len()]
        }
    }

    /// Check type a detector belongs to; terminal detectors share the basis.
    pub fn detector_kind(&self, id: usize) -> CheckKind {
        self.check_kinds[self.detector(id).check]
    }

    pub fn empty_history(&self) -> SyndromeHistory {
        SyndromeHistory::new(self.rounds, self.n_checks, self.terminal.len())
    }

    /// One instruction per line followed by the annotations.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for ins in &self.instructions {
            writeln!(out, "{ins}").unwrap();
        }
        for det in self.detectors.iter().chain(&self.terminal) {
            match det.round {
                Some(r) => write!(out, "DETECTOR round={} check={}", r + 1, det.check).unwrap(),
                None => write!(out, "DETECTOR terminal check={}", det.check).unwrap(),
            }
            for m in &det.measurements {
                write!(out, " rec[{m}]").unwrap();
            }
            out.push('\n');
        }
        out.push_str("OBSERVABLE");
        for m in &self.observable {
            write!(out, " rec[{m}]").unwrap();
        }
        out.push('\n');
        out
    }
}

/// Compiles a memory experiment on `layout`.
pub fn build_memory_circuit(
    layout: &CodeLayout,
    rounds: usize,
    p: f64,
    basis: Basis,
) -> Result<AnnotatedCircuit> {
    if rounds < 1 {
        return Err(Error::InvalidRounds(rounds));
    }
    if !(0.0..0.5).contains(&p) || p.is_nan() {
        return Err(Error::InvalidErrorRate(p));
    }
    let n_data = layout.n_data();
    let n_checks = layout.n_checks();
    let anc = |c: usize| layout.ancilla_qubit(c) as u32;
    let x_ancillas: Vec<u32> = layout.x_stabilizers().map(|s| anc(s.check)).collect();

    let mut ins = Vec::new();
    let mut n_meas = 0u32;

    for q in 0..layout.n_physical() {
        ins.push(Instruction::Reset(q as u32));
    }
    if basis == CheckKind::X {
        for q in 0..n_data {
            ins.push(Instruction::Clifford1(Gate1::H, q as u32));
        }
    }

    // meas[t][c] = record index of check c in round t
    let mut meas = vec![vec![0u32; n_checks]; rounds];
    let mut round_starts = Vec::with_capacity(rounds);
    for round_meas in meas.iter_mut() {
        round_starts.push(ins.len());
        for q in 0..n_data {
            ins.push(Instruction::Depolarize1 { p, q: q as u32 });
        }
        for &a in &x_ancillas {
            ins.push(Instruction::Clifford1(Gate1::H, a));
        }
        for layer in 0..4 {
            for s in &layout.checks {
                let Some(dq) = s.schedule[layer] else { continue };
                let (c, t) = match s.kind {
                    CheckKind::X => (anc(s.check), dq as u32),
                    CheckKind::Z => (dq as u32, anc(s.check)),
                };
                ins.push(Instruction::Cnot(c, t));
                ins.push(Instruction::Depolarize2 { p, c, t });
            }
        }
        for &a in &x_ancillas {
            ins.push(Instruction::Clifford1(Gate1::H, a));
        }
        for c in 0..n_checks {
            ins.push(Instruction::FlipBeforeMeasure { p, q: anc(c) });
        }
        for (c, slot) in round_meas.iter_mut().enumerate() {
            ins.push(Instruction::Measure(anc(c)));
            *slot = n_meas;
            n_meas += 1;
        }
        for c in 0..n_checks {
            ins.push(Instruction::Reset(anc(c)));
        }
    }

    if basis == CheckKind::X {
        for q in 0..n_data {
            ins.push(Instruction::Clifford1(Gate1::H, q as u32));
        }
    }
    for q in 0..n_data {
        ins.push(Instruction::FlipBeforeMeasure { p, q: q as u32 });
    }
    let data_meas: Vec<u32> = (0..n_data as u32).map(|q| n_meas + q).collect();
    for q in 0..n_data {
        ins.push(Instruction::Measure(q as u32));
    }
    n_meas += n_data as u32;

    let mut detectors = Vec::with_capacity(rounds * n_checks);
    for t in 0..rounds {
        for c in 0..n_checks {
            let measurements = if t == 0 {
                vec![meas[0][c]]
            } else {
                vec![meas[t - 1][c], meas[t][c]]
            };
            detectors.push(Detector {
                round: Some(t),
                check: c,
                measurements,
            });
        }
    }
    let terminal = layout
        .checks
        .iter()
        .filter(|s| s.kind == basis)
        .map(|s| {
            let mut measurements = vec![meas[rounds - 1][s.check]];
            measurements.extend(s.support().map(|q| data_meas[q]));
            Detector {
                round: None,
                check: s.check,
                measurements,
            }
        })
        .collect();
    let observable = layout.logical_support(basis).iter().map(|&q| data_meas[q]).collect();

    Ok(AnnotatedCircuit {
        distance: layout.distance,
        rounds,
        error_rate: p,
        basis,
        n_qubits: layout.n_physical(),
        n_checks,
        check_kinds: layout.checks.iter().map(|s| s.kind).collect(),
        instructions: ins,
        round_starts,
        n_measurements: n_meas as usize,
        detectors,
        terminal,
        observable,
    })
}

fn parity(outcomes: &[bool], measurements: &[u32]) -> bool {
    measurements.iter().fold(false, |acc, &m| acc ^ outcomes[m as usize])
}

/// Reconstructs the detection-event history from a measurement record given
/// relative to the noiseless reference.
pub fn detector_round_view(circuit: &AnnotatedCircuit, outcomes: &[bool]) -> Result<SyndromeHistory> {
    let mut h = circuit.empty_history();
    write_detectors(circuit, outcomes, &mut h)?;
    Ok(h)
}

/// Like [`detector_round_view`] but overwrites an existing history.
pub fn write_detectors(circuit: &AnnotatedCircuit, outcomes: &[bool], h: &mut SyndromeHistory) -> Result<()> {
    if outcomes.len() != circuit.n_measurements {
        return Err(Error::LengthMismatch {
            what: "measurement record",
            expected: circuit.n_measurements,
            got: outcomes.len(),
        });
    }
    h.clear();
    for det in &circuit.detectors {
        if parity(outcomes, &det.measurements) {
            h.set(det.round.unwrap(), det.check, true);
        }
    }
    for (k, det) in circuit.terminal.iter().enumerate() {
        if parity(outcomes, &det.measurements) {
            h.set_terminal(k, true);
        }
    }
    h.observable_flip = parity(outcomes, &circuit.observable);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::build_layout;

    fn count(c: &AnnotatedCircuit, f: impl Fn(&Instruction) -> bool) -> usize {
        c.instructions.iter().filter(|i| f(i)).count()
    }

    #[test]
    fn instruction_counts_d3() {
        let l = build_layout(3).unwrap();
        let c = build_memory_circuit(&l, 3, 0.01, CheckKind::X).unwrap();
        assert_eq!(count(&c, |i| matches!(i, Instruction::Depolarize1 { .. })), 3 * 9);
        assert_eq!(count(&c, |i| matches!(i, Instruction::Cnot(..))), 3 * 24);
        assert_eq!(count(&c, |i| matches!(i, Instruction::Depolarize2 { .. })), 3 * 24);
        // 8 ancilla flips per round plus the 9 data-readout flips
        assert_eq!(count(&c, |i| matches!(i, Instruction::FlipBeforeMeasure { .. })), 3 * 8 + 9);
        assert_eq!(count(&c, |i| matches!(i, Instruction::Measure(_))), 3 * 8 + 9);
        assert_eq!(c.n_measurements, 33);
        assert_eq!(c.detectors.len(), 24);
        assert_eq!(c.terminal.len(), 4);
        assert_eq!(c.rounds, 3);
    }

    #[test]
    fn annotations_reference_valid_records() {
        let l = build_layout(5).unwrap();
        for basis in [CheckKind::X, CheckKind::Z] {
            let c = build_memory_circuit(&l, 4, 0.001, basis).unwrap();
            for det in c.detectors.iter().chain(&c.terminal) {
                assert!(det.measurements.iter().all(|&m| (m as usize) < c.n_measurements));
            }
            assert!(c.observable.iter().all(|&m| (m as usize) < c.n_measurements));
            for (i, det) in c.detectors.iter().enumerate() {
                assert_eq!(det.round, Some(i / c.n_checks));
                assert_eq!(det.check, i % c.n_checks);
                assert_eq!(det.measurements.len(), if i < c.n_checks { 1 } else { 2 });
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let l = build_layout(3).unwrap();
        assert!(matches!(build_memory_circuit(&l, 0, 0.01, CheckKind::X), Err(Error::InvalidRounds(0))));
        assert!(build_memory_circuit(&l, 3, 0.5, CheckKind::X).is_err());
        assert!(build_memory_circuit(&l, 3, -0.1, CheckKind::X).is_err());
        assert!(build_memory_circuit(&l, 3, f64::NAN, CheckKind::X).is_err());
    }

    #[test]
    fn round_view_single_flip() {
        let l = build_layout(3).unwrap();
        let c = build_memory_circuit(&l, 3, 0.0, CheckKind::X).unwrap();
        let mut rec = vec![false; c.n_measurements];
        assert_eq!(detector_round_view(&c, &rec).unwrap().weight(), 0);
        // ancilla of check 4 misreports in round 2 only
        rec[8 + 4] = true;
        let h = detector_round_view(&c, &rec).unwrap();
        let fired: Vec<usize> = h.fired().collect();
        assert_eq!(fired, vec![8 + 4, 16 + 4]);
        assert!(!h.observable_flip);
        assert!(detector_round_view(&c, &rec[1..]).is_err());
    }

    #[test]
    fn construction_is_deterministic() {
        let l = build_layout(3).unwrap();
        let a = build_memory_circuit(&l, 2, 0.003, CheckKind::X).unwrap().to_text();
        let b = build_memory_circuit(&l, 2, 0.003, CheckKind::X).unwrap().to_text();
        assert_eq!(a, b);
        assert!(a.contains("CX 9 0\nDEPOLARIZE2(0.003) 9 0\n") || a.contains("CX 0 9\n"));
    }
}
