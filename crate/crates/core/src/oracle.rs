//! Slow reference implementations used by the self-test and the test
//! suites.

use rand::seq::index::sample;
use rand::Rng;

use crate::circuit::AnnotatedCircuit;
use crate::decoder::{Decoder, DecodingGraph};
use crate::error::Result;
use crate::experiment::MemoryExperiment;
use crate::frame::{fault_mechanisms, FrameSimulator, Injection};
use crate::layout::CheckKind;
use crate::predictor::train::gradient_check;
use crate::predictor::{Architecture, Predictor};
use crate::rng::{derive, rng_from};

const INF: i64 = i64::MAX / 4;

/// All-pairs shortest integer path lengths over detectors and the boundary.
pub fn floyd_warshall(graph: &DecodingGraph) -> Vec<Vec<i64>> {
    let n = graph.n_nodes();
    let mut d = vec![vec![INF; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for e in &graph.edges {
        let w = e.iweight.min(d[e.a][e.b]);
        d[e.a][e.b] = w;
        d[e.b][e.a] = w;
    }
    for k in 0..n {
        for i in 0..n {
            if d[i][k] == INF {
                continue;
            }
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

/// Minimum total weight of pairing `fired` among themselves or to the
/// boundary, by dynamic programming over subsets.
pub fn brute_force_matching_weight(dist: &[Vec<i64>], boundary: usize, fired: &[usize]) -> i64 {
    let n = fired.len();
    assert!(n <= 20, "subset enumeration is exponential");
    let full = (1usize << n) - 1;
    let mut best = vec![INF; 1 << n];
    best[0] = 0;
    for mask in 0..full {
        if best[mask] == INF {
            continue;
        }
        // lowest unmatched detector pairs with the boundary or a later one
        let i = (!mask).trailing_zeros() as usize;
        let base = best[mask];
        let to_b = mask | (1 << i);
        best[to_b] = best[to_b].min(base + dist[fired[i]][boundary]);
        for j in i + 1..n {
            if mask & (1 << j) == 0 {
                let m = mask | (1 << i) | (1 << j);
                best[m] = best[m].min(base + dist[fired[i]][fired[j]]);
            }
        }
    }
    best[full]
}

/// Outcome of a batch of oracle comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleTally {
    pub checked: usize,
    pub mismatches: usize,
}

/// Compares blossom matching weights with subset enumeration on `n`
/// random fired sets of size `1..=max_fired`, alternating d = 3 and 5.
pub fn check_matching(n: usize, max_fired: usize, seed: u64) -> Result<OracleTally> {
    let mut tally = OracleTally { checked: 0, mismatches: 0 };
    let mut rng = rng_from(derive(seed, "matching-oracle"));
    for d in [3usize, 5] {
        let exp = MemoryExperiment::new(d, d, 0.01, CheckKind::X)?;
        let dist = floyd_warshall(&exp.graph);
        let mut dec = Decoder::new(&exp.graph);
        let nd = exp.graph.n_detectors;
        let count = if d == 3 { n / 2 } else { n - n / 2 };
        for _ in 0..count {
            let k = rng.random_range(1..=max_fired.min(nd));
            let mut fired = sample(&mut rng, nd, k).into_vec();
            fired.sort_unstable();
            let blossom = dec.decode_detectors(&fired).weight;
            let exact = brute_force_matching_weight(&dist, exp.graph.boundary(), &fired);
            tally.checked += 1;
            if blossom != exact {
                tally.mismatches += 1;
            }
        }
    }
    Ok(tally)
}

/// Injects every fault mechanism of `circuit` alone and compares the
/// resulting detectors and observable with the propagated prediction.
pub fn check_single_faults(circuit: &AnnotatedCircuit) -> Result<OracleTally> {
    let mut tally = OracleTally { checked: 0, mismatches: 0 };
    let mut sim = FrameSimulator::new();
    for m in fault_mechanisms(circuit) {
        let injections: Vec<Injection> = m
            .fault
            .iter()
            .flatten()
            .map(|&fault| Injection {
                before: m.instruction + 1,
                fault,
            })
            .collect();
        let h = sim.run_injected(circuit, &injections, None)?;
        let fired: Vec<usize> = h.fired().collect();
        tally.checked += 1;
        if fired != m.detectors || h.observable_flip != m.observable {
            tally.mismatches += 1;
        }
    }
    Ok(tally)
}

/// Worst finite-difference relative error over every layer of both
/// architectures.
pub fn check_gradients(seed: u64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for arch in [Architecture::TwoHeadMlp, Architecture::Cnn1d] {
        let model = Predictor::new(arch, 3, 8, seed);
        worst = worst.max(gradient_check(&model, 6, 10, seed ^ 0x5eed)?);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::build_memory_circuit;
    use crate::layout::build_layout;

    #[test]
    fn dp_on_a_line() {
        // 0 - 1 - 2 - B with unit steps
        let inf = INF;
        let mut d = vec![vec![inf; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                d[i][j] = (i as i64 - j as i64).abs();
            }
        }
        assert_eq!(brute_force_matching_weight(&d, 3, &[0, 1]), 1);
        assert_eq!(brute_force_matching_weight(&d, 3, &[0]), 3);
        assert_eq!(brute_force_matching_weight(&d, 3, &[0, 1, 2]), 2);
    }

    #[test]
    fn oracles_agree() {
        let t = check_matching(60, 12, 1).unwrap();
        assert_eq!((t.checked, t.mismatches), (60, 0));
        let layout = build_layout(3).unwrap();
        let c = build_memory_circuit(&layout, 2, 0.01, CheckKind::X).unwrap();
        let t = check_single_faults(&c).unwrap();
        assert!(t.checked > 100 && t.mismatches == 0);
        assert!(check_gradients(2).unwrap() < 1e-4);
    }
}
