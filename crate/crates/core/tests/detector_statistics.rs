//! Sampled detector statistics against an analytic model, and linearity of
//! fault propagation.

use proptest::prelude::*;
use qec_abort::circuit::build_memory_circuit;
use qec_abort::frame::{fault_mechanisms, sample_batch, Fault, FrameSimulator, Injection, Pauli};
use qec_abort::layout::{build_layout, CheckKind};

/// Exact per-detector firing probability: components of one channel are
/// mutually exclusive, channels are independent.
fn analytic_rates(circuit: &qec_abort::circuit::AnnotatedCircuit) -> Vec<f64> {
    let n = circuit.n_detectors();
    let mut per_channel: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut last = usize::MAX;
    for m in fault_mechanisms(circuit) {
        if m.instruction != last {
            per_channel.push(Vec::new());
            last = m.instruction;
        }
        let ch = per_channel.last_mut().unwrap();
        for &d in &m.detectors {
            match ch.iter_mut().find(|(k, _)| *k == d) {
                Some(e) => e.1 += m.probability,
                None => ch.push((d, m.probability)),
            }
        }
    }
    let mut keep = vec![1.0f64; n];
    for ch in &per_channel {
        for &(d, q) in ch {
            keep[d] *= 1.0 - 2.0 * q;
        }
    }
    keep.iter().map(|k| (1.0 - k) / 2.0).collect()
}

#[test]
fn detector_rates_match_the_analytic_model() {
    let layout = build_layout(3).unwrap();
    let circuit = build_memory_circuit(&layout, 3, 0.01, CheckKind::X).unwrap();
    let expect = analytic_rates(&circuit);
    let shots = 1_000_000;
    let mut counts = vec![0usize; circuit.n_detectors()];
    for chunk in 0..10u64 {
        for h in sample_batch(&circuit, shots / 10, 1000 + chunk) {
            for d in h.fired() {
                counts[d] += 1;
            }
        }
    }
    for (d, (&c, &p)) in counts.iter().zip(&expect).enumerate() {
        let sigma = (p * (1.0 - p) / shots as f64).sqrt();
        let got = c as f64 / shots as f64;
        assert!((got - p).abs() < 5.0 * sigma, "detector {d}: sampled {got}, expected {p} ± {sigma}");
    }
}

fn injection(circuit: &qec_abort::circuit::AnnotatedCircuit, pos: usize, q: usize, kind: u8) -> Injection {
    let fault = match kind {
        0 => Fault::Pauli(q as u32, Pauli::X),
        1 => Fault::Pauli(q as u32, Pauli::Y),
        2 => Fault::Pauli(q as u32, Pauli::Z),
        _ => Fault::FlipNext(q as u32),
    };
    Injection {
        before: pos % (circuit.instructions.len() + 1),
        fault,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn two_faults_combine_by_xor(a in (0usize..10_000, 0usize..17, 0u8..4), b in (0usize..10_000, 0usize..17, 0u8..4)) {
        let layout = build_layout(3).unwrap();
        let circuit = build_memory_circuit(&layout, 3, 0.01, CheckKind::Z).unwrap();
        let ia = injection(&circuit, a.0, a.1, a.2);
        let ib = injection(&circuit, b.0, b.1, b.2);
        let mut sim = FrameSimulator::new();
        let ha = sim.run_injected(&circuit, &[ia], None).unwrap();
        let hb = sim.run_injected(&circuit, &[ib], None).unwrap();
        let mut both = [ia, ib];
        both.sort_by_key(|i| i.before);
        let hab = sim.run_injected(&circuit, &both, None).unwrap();
        let fa: std::collections::BTreeSet<usize> = ha.fired().collect();
        let fb: std::collections::BTreeSet<usize> = hb.fired().collect();
        let xor: Vec<usize> = fa.symmetric_difference(&fb).copied().collect();
        prop_assert_eq!(hab.fired().collect::<Vec<_>>(), xor);
        prop_assert_eq!(hab.observable_flip, ha.observable_flip ^ hb.observable_flip);
    }
}
