//! Matching graph built from the single-fault footprints of a circuit.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::circuit::AnnotatedCircuit;
use crate::error::{Error, Result};
use crate::frame::fault_mechanisms;

/// Fixed-point scale of the integer edge weights used for matching.
pub const WEIGHT_SCALE: f64 = (1u64 << 20) as f64;

/// Probability that exactly one of two independent mechanisms fires.
pub fn merge_probability(p1: f64, p2: f64) -> f64 {
    p1 * (1.0 - p2) + p2 * (1.0 - p1)
}

/// Log-likelihood weight `ln((1 - p) / p)`, clamped at zero.
pub fn edge_weight(p: f64) -> f64 {
    ((1.0 - p) / p).ln().max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub a: usize,
    /// Second endpoint; equal to the boundary node for boundary edges.
    pub b: usize,
    pub probability: f64,
    pub weight: f64,
    pub iweight: i64,
    /// Whether the edge flips the logical observable.
    pub frame: bool,
}

#[derive(Debug, Clone)]
pub struct DecodingGraph {
    pub n_detectors: usize,
    pub edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, usize)>>,
    component: Vec<usize>,
    component_has_frame: Vec<bool>,
}

type Key = (usize, usize);

#[derive(Default, Clone, Copy)]
struct Accum {
    // merged probability per frame bit
    p: [f64; 2],
}

impl Accum {
    fn add(&mut self, frame: bool, p: f64) {
        let slot = &mut self.p[frame as usize];
        *slot = merge_probability(*slot, p);
    }

    fn frame(&self) -> bool {
        self.p[1] > self.p[0]
    }
}

impl DecodingGraph {
    pub fn boundary(&self) -> usize {
        self.n_detectors
    }

    pub fn n_nodes(&self) -> usize {
        self.n_detectors + 1
    }

    /// `(neighbour, edge index)` pairs of `node`.
    pub fn neighbours(&self, node: usize) -> &[(usize, usize)] {
        &self.adjacency[node]
    }

    /// Connected component of a detector, ignoring the boundary node.
    pub fn component(&self, detector: usize) -> usize {
        self.component[detector]
    }

    pub fn n_components(&self) -> usize {
        self.component_has_frame.len()
    }

    pub fn component_has_frame(&self, c: usize) -> bool {
        self.component_has_frame[c]
    }

    pub fn from_edges(n_detectors: usize, edges: Vec<Edge>) -> Self {
        let boundary = n_detectors;
        let mut adjacency = vec![Vec::new(); n_detectors + 1];
        for (k, e) in edges.iter().enumerate() {
            adjacency[e.a].push((e.b, k));
            adjacency[e.b].push((e.a, k));
        }
        let mut parent: Vec<usize> = (0..n_detectors).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in &edges {
            if e.b != boundary {
                let (ra, rb) = (find(&mut parent, e.a), find(&mut parent, e.b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
        let mut ids = BTreeMap::new();
        let component: Vec<usize> = (0..n_detectors)
            .map(|v| {
                let r = find(&mut parent, v);
                let next = ids.len();
                *ids.entry(r).or_insert(next)
            })
            .collect();
        let mut component_has_frame = vec![false; ids.len()];
        for e in &edges {
            if e.frame {
                component_has_frame[component[e.a]] = true;
            }
        }
        Self {
            n_detectors,
            edges,
            adjacency,
            component,
            component_has_frame,
        }
    }

    /// Plain-text dump: a header line then one line per edge,
    /// `edge <a> <b|boundary> <probability> <weight> <iweight> <frame>`.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "graph detectors={} edges={} scale={}\n",
            self.n_detectors,
            self.edges.len(),
            WEIGHT_SCALE
        );
        for e in &self.edges {
            let b = if e.b == self.boundary() { "boundary".to_string() } else { e.b.to_string() };
            writeln!(out, "edge {} {} {:e} {:e} {} {}", e.a, b, e.probability, e.weight, e.iweight, e.frame as u8).unwrap();
        }
        out
    }
}

fn key_of(dets: &[usize], boundary: usize) -> Key {
    match *dets {
        [a] => (a, boundary),
        [a, b] => (a.min(b), a.max(b)),
        _ => unreachable!("graphlike part has one or two detectors"),
    }
}

/// Splits `dets` into existing edges whose frame bits XOR to `observable`,
/// preferring the fewest parts.
fn decompose(dets: &[usize], observable: bool, edges: &BTreeMap<Key, Accum>, boundary: usize) -> Option<Vec<Key>> {
    fn rec(
        rest: &[usize],
        parity: bool,
        target: bool,
        edges: &BTreeMap<Key, Accum>,
        boundary: usize,
        parts: &mut Vec<Key>,
        best: &mut Option<Vec<Key>>,
    ) {
        if best.as_ref().is_some_and(|b| parts.len() >= b.len()) {
            return;
        }
        let Some((&first, tail)) = rest.split_first() else {
            if parity == target {
                *best = Some(parts.clone());
            }
            return;
        };
        for (i, &other) in tail.iter().enumerate() {
            let key = (first, other);
            if let Some(acc) = edges.get(&key) {
                let remaining: Vec<usize> = tail.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &d)| d).collect();
                parts.push(key);
                rec(&remaining, parity ^ acc.frame(), target, edges, boundary, parts, best);
                parts.pop();
            }
        }
        if let Some(acc) = edges.get(&(first, boundary)) {
            parts.push((first, boundary));
            rec(tail, parity ^ acc.frame(), target, edges, boundary, parts, best);
            parts.pop();
        }
    }
    let mut best = None;
    rec(dets, false, observable, edges, boundary, &mut Vec::new(), &mut best);
    best
}

/// Builds the matching graph of `circuit`.
///
/// Every fault component is split by detector type (checks of the memory
/// basis, including terminal detectors, versus the rest); the observable
/// flip stays with the memory-basis part. Parts with one or two detectors
/// become edges directly; larger parts are split into edges that already
/// exist, otherwise construction fails.
pub fn build_decoding_graph(circuit: &AnnotatedCircuit) -> Result<DecodingGraph> {
    if circuit.error_rate == 0.0 {
        return Err(Error::NoiselessGraph);
    }
    let n = circuit.n_detectors();
    let boundary = n;
    let mut accum: BTreeMap<Key, Accum> = BTreeMap::new();
    let mut deferred: Vec<(Vec<usize>, bool, f64)> = Vec::new();
    for m in fault_mechanisms(circuit) {
        let (basis, other): (Vec<usize>, Vec<usize>) =
            m.detectors.iter().partition(|&&d| circuit.detector_kind(d) == circuit.basis);
        if basis.is_empty() && m.observable {
            return Err(Error::Undecomposable {
                detectors: m.detectors,
                observable: m.observable,
            });
        }
        for (part, obs) in [(basis, m.observable), (other, false)] {
            match part.len() {
                0 => {}
                1 | 2 => accum.entry(key_of(&part, boundary)).or_default().add(obs, m.probability),
                _ => deferred.push((part, obs, m.probability)),
            }
        }
    }
    let frames: BTreeMap<Key, Accum> = accum.clone();
    for (dets, obs, p) in deferred {
        let parts = decompose(&dets, obs, &frames, boundary).ok_or(Error::Undecomposable {
            detectors: dets.clone(),
            observable: obs,
        })?;
        for key in parts {
            let f = frames[&key].frame();
            accum.get_mut(&key).unwrap().add(f, p);
        }
    }
    let edges = accum
        .into_iter()
        .map(|((a, b), acc)| {
            let probability = merge_probability(acc.p[0], acc.p[1]);
            let weight = edge_weight(probability);
            Edge {
                a,
                b,
                probability,
                weight,
                iweight: (weight * WEIGHT_SCALE).round() as i64,
                frame: acc.frame(),
            }
        })
        .collect();
    Ok(DecodingGraph::from_edges(n, edges))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::build_memory_circuit;
    use crate::layout::{build_layout, CheckKind};

    #[test]
    fn merge_rule() {
        assert!((merge_probability(0.01, 0.01) - 0.0198).abs() < 1e-15);
        assert_eq!(merge_probability(0.0, 0.3), 0.3);
    }

    #[test]
    fn weights_follow_log_likelihood() {
        assert!((edge_weight(0.01) - (99.0f64).ln()).abs() < 1e-12);
        assert_eq!(edge_weight(0.5), 0.0);
        assert_eq!(edge_weight(0.7), 0.0);
    }

    #[test]
    fn graph_is_split_by_check_type() {
        for d in [3, 5] {
            let c = build_memory_circuit(&build_layout(d).unwrap(), d, 0.001, CheckKind::X).unwrap();
            let g = build_decoding_graph(&c).unwrap();
            for e in &g.edges {
                assert!(e.a < e.b);
                if e.b != g.boundary() {
                    assert_eq!(c.detector_kind(e.a), c.detector_kind(e.b));
                }
                if e.frame {
                    assert_eq!(c.detector_kind(e.a), CheckKind::X);
                }
                assert!(e.probability > 0.0 && e.probability < 0.5);
            }
            assert!(g.edges.iter().any(|e| e.frame));
            let framed: Vec<usize> = (0..g.n_components()).filter(|&k| g.component_has_frame(k)).collect();
            assert_eq!(framed.len(), 1);
        }
    }

    #[test]
    fn noiseless_circuit_is_rejected() {
        let c = build_memory_circuit(&build_layout(3).unwrap(), 3, 0.0, CheckKind::X).unwrap();
        assert!(matches!(build_decoding_graph(&c), Err(Error::NoiselessGraph)));
    }

    #[test]
    fn dump_is_deterministic() {
        let c = build_memory_circuit(&build_layout(3).unwrap(), 2, 0.01, CheckKind::X).unwrap();
        let a = build_decoding_graph(&c).unwrap().to_text();
        let b = build_decoding_graph(&c).unwrap().to_text();
        assert_eq!(a, b);
        assert!(a.starts_with("graph detectors=20 "));
    }

    #[test]
    fn decomposition_prefers_existing_edges() {
        let mut edges = BTreeMap::new();
        let mut acc = Accum::default();
        acc.add(false, 0.01);
        edges.insert((1, 2), acc);
        edges.insert((3, 9), acc);
        let mut fr = Accum::default();
        fr.add(true, 0.01);
        edges.insert((4, 9), fr);
        assert_eq!(decompose(&[1, 2, 3], false, &edges, 9), Some(vec![(1, 2), (3, 9)]));
        assert_eq!(decompose(&[1, 2, 4], true, &edges, 9), Some(vec![(1, 2), (4, 9)]));
        assert_eq!(decompose(&[1, 2, 4], false, &edges, 9), None);
    }
}
