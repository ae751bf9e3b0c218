//! Memory experiments bundled with their decoding graph, and labelled
//! sampling.

use rayon::prelude::*;

use crate::circuit::{build_memory_circuit, AnnotatedCircuit, Basis};
use crate::decoder::{build_decoding_graph, Decoder, DecodingGraph};
use crate::error::Result;
use crate::frame::FrameSimulator;
use crate::layout::{build_layout, CodeLayout};
use crate::rng::{derive, mix64, shot_seed};
use crate::syndrome::SyndromeHistory;

const CHUNK: usize = 4096;

#[derive(Debug, Clone)]
pub struct MemoryExperiment {
    pub layout: CodeLayout,
    pub circuit: AnnotatedCircuit,
    pub graph: DecodingGraph,
}

impl MemoryExperiment {
    pub fn new(distance: usize, rounds: usize, p: f64, basis: Basis) -> Result<Self> {
        let layout = build_layout(distance)?;
        let circuit = build_memory_circuit(&layout, rounds, p, basis)?;
        let graph = build_decoding_graph(&circuit)?;
        Ok(Self { layout, circuit, graph })
    }
}

/// A sampled shot with its decoding outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledShot {
    pub index: u64,
    pub history: SyndromeHistory,
    /// Whether the decoder recovered the observable (label 1).
    pub success: bool,
}

/// Deterministic per-index Bernoulli draw with probability `q`.
fn keep(seed: u64, index: u64, q: f64) -> bool {
    if q >= 1.0 {
        return true;
    }
    let u = (mix64(seed ^ mix64(index)) >> 11) as f64 / (1u64 << 53) as f64;
    u < q
}

/// Samples shots `0..n` under `master_seed`, decodes each and keeps every
/// failure plus each success with probability `keep_success`. Output is
/// ordered by shot index whatever the thread count.
pub fn sample_labelled(exp: &MemoryExperiment, n: usize, master_seed: u64, keep_success: f64) -> Vec<LabelledShot> {
    sample_labelled_where(exp, n, master_seed, keep_success, |_| true)
}

/// As [`sample_labelled`], restricted to the indices accepted by `select`.
/// Skipped indices cost nothing and do not shift the seeds of the others.
pub fn sample_labelled_where(
    exp: &MemoryExperiment,
    n: usize,
    master_seed: u64,
    keep_success: f64,
    select: impl Fn(u64) -> bool + Sync,
) -> Vec<LabelledShot> {
    let keep_seed = derive(master_seed, "keep-success");
    let chunks: Vec<Vec<LabelledShot>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut sim = FrameSimulator::new();
            let mut dec = Decoder::new(&exp.graph);
            let mut h = exp.circuit.empty_history();
            let mut out = Vec::new();
            for i in (c * CHUNK)..((c + 1) * CHUNK).min(n) {
                let i = i as u64;
                if !select(i) {
                    continue;
                }
                sim.sample_into(&exp.circuit, shot_seed(master_seed, i), &mut h);
                let success = dec.success(&h);
                if !success || keep(keep_seed, i, keep_success) {
                    out.push(LabelledShot {
                        index: i,
                        history: h.clone(),
                        success,
                    });
                }
            }
            out
        })
        .collect();
    chunks.into_iter().flatten().collect()
}

/// Number of decoding failures among shots `0..n`.
pub fn count_failures(exp: &MemoryExperiment, n: usize, master_seed: u64) -> usize {
    (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut sim = FrameSimulator::new();
            let mut dec = Decoder::new(&exp.graph);
            let mut h = exp.circuit.empty_history();
            ((c * CHUNK)..((c + 1) * CHUNK).min(n))
                .filter(|&i| {
                    sim.sample_into(&exp.circuit, shot_seed(master_seed, i as u64), &mut h);
                    !dec.success(&h)
                })
                .count()
        })
        .sum()
}

/// Logical error rate with a 95% Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub failures: usize,
    pub shots: usize,
    pub rate: f64,
    pub low: f64,
    pub high: f64,
}

impl RateEstimate {
    pub fn new(failures: usize, shots: usize) -> Self {
        let n = shots as f64;
        let p = failures as f64 / n;
        let z = 1.959_963_984_540_054_f64;
        let denom = 1.0 + z * z / n;
        let centre = (p + z * z / (2.0 * n)) / denom;
        let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
        Self {
            failures,
            shots,
            rate: p,
            low: (centre - half).max(0.0),
            high: (centre + half).min(1.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::CheckKind;

    #[test]
    fn labelled_sampling_keeps_all_failures() {
        let exp = MemoryExperiment::new(3, 3, 0.02, CheckKind::X).unwrap();
        let all = sample_labelled(&exp, 3000, 5, 1.0);
        let some = sample_labelled(&exp, 3000, 5, 0.1);
        let failures = all.iter().filter(|s| !s.success).count();
        assert_eq!(failures, count_failures(&exp, 3000, 5));
        assert_eq!(some.iter().filter(|s| !s.success).count(), failures);
        let kept = some.iter().filter(|s| s.success).count() as f64;
        let expected = 0.1 * (3000 - failures) as f64;
        assert!((kept - expected).abs() < 5.0 * expected.sqrt());
        assert!(some.windows(2).all(|w| w[0].index < w[1].index));
    }

    #[test]
    fn wilson_interval_brackets_rate() {
        let r = RateEstimate::new(50, 1000);
        assert!(r.low < 0.05 && 0.05 < r.high);
        assert!((r.high - r.low) < 0.03);
        let z = RateEstimate::new(0, 100);
        assert!(z.low.abs() < 1e-15 && z.high > 0.03);
    }
}
