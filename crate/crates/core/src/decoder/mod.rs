//! Minimum-weight perfect matching decoder.

pub mod blossom;
pub mod graph;

use std::cmp::Reverse;
use std::collections::BinaryHeap;

pub use graph::{build_decoding_graph, edge_weight, merge_probability, DecodingGraph, Edge, WEIGHT_SCALE};

use crate::syndrome::SyndromeHistory;

const INF: i64 = i64::MAX / 4;

/// Result of matching one syndrome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoding {
    /// Predicted observable flip.
    pub prediction: bool,
    /// Total integer weight of the matching.
    pub weight: i64,
    /// Matched detector pairs; `None` marks a match to the boundary.
    pub pairs: Vec<(usize, Option<usize>)>,
}

/// Reusable matching decoder over one graph.
#[derive(Debug, Clone)]
pub struct Decoder<'g> {
    graph: &'g DecodingGraph,
    dist: Vec<i64>,
    parity: Vec<bool>,
    done: Vec<bool>,
    touched: Vec<usize>,
    heap: BinaryHeap<Reverse<(i64, usize)>>,
    by_component: Vec<Vec<usize>>,
}

/// Shortest distances from one fired detector.
struct Paths {
    to: Vec<(i64, bool)>,
    boundary: (i64, bool),
}

impl<'g> Decoder<'g> {
    pub fn new(graph: &'g DecodingGraph) -> Self {
        let n = graph.n_nodes();
        Self {
            graph,
            dist: vec![INF; n],
            parity: vec![false; n],
            done: vec![false; n],
            touched: Vec::new(),
            heap: BinaryHeap::new(),
            by_component: vec![Vec::new(); graph.n_components()],
        }
    }

    pub fn graph(&self) -> &DecodingGraph {
        self.graph
    }

    /// Dijkstra from `src`, stopping once every target and the boundary are
    /// settled. The boundary is a sink and is never expanded.
    fn paths(&mut self, src: usize, targets: &[usize]) -> Paths {
        let g = self.graph;
        let boundary = g.boundary();
        for &v in &self.touched {
            self.dist[v] = INF;
            self.parity[v] = false;
            self.done[v] = false;
        }
        self.touched.clear();
        self.heap.clear();
        self.dist[src] = 0;
        self.touched.push(src);
        self.heap.push(Reverse((0, src)));
        let mut remaining = targets.len() + 1;
        while let Some(Reverse((d, u))) = self.heap.pop() {
            if self.done[u] || d > self.dist[u] {
                continue;
            }
            self.done[u] = true;
            if u == boundary || targets.contains(&u) {
                remaining -= 1;
                if remaining == 0 {
                    break;
                }
            }
            if u == boundary {
                continue;
            }
            for &(v, k) in g.neighbours(u) {
                let e = &g.edges[k];
                let nd = d + e.iweight;
                if nd < self.dist[v] {
                    if self.dist[v] == INF {
                        self.touched.push(v);
                    }
                    self.dist[v] = nd;
                    self.parity[v] = self.parity[u] ^ e.frame;
                    self.heap.push(Reverse((nd, v)));
                }
            }
        }
        Paths {
            to: targets.iter().map(|&t| (self.dist[t], self.parity[t])).collect(),
            boundary: (self.dist[boundary], self.parity[boundary]),
        }
    }

    fn match_component(&mut self, fired: &[usize], out: &mut Decoding) {
        let k = fired.len();
        let paths: Vec<Paths> = fired.iter().map(|&s| self.paths(s, fired)).collect();
        // pair cost may route both ends to the boundary
        let cost = |i: usize, j: usize| -> (i64, bool) {
            let (lo, hi) = (i.min(j), i.max(j));
            let direct = paths[lo].to[hi];
            let (bi, pi) = paths[i].boundary;
            let (bj, pj) = paths[j].boundary;
            let via = (bi.saturating_add(bj).min(INF), pi ^ pj);
            if via.0 < direct.0 {
                via
            } else {
                direct
            }
        };
        let n = if k % 2 == 1 { k + 1 } else { k };
        let mut weights: Vec<(usize, usize, i64)> = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..k {
            for j in i + 1..k {
                weights.push((i, j, cost(i, j).0));
            }
            if n > k {
                weights.push((i, k, paths[i].boundary.0));
            }
        }
        let max = weights.iter().map(|w| w.2).max().unwrap_or(0);
        let inverted: Vec<(usize, usize, i64)> = weights.iter().map(|&(i, j, w)| (i, j, max + 1 - w)).collect();
        let mate = blossom::max_weight_matching(n, &inverted, true);
        for i in 0..k {
            let Some(j) = mate[i] else { continue };
            if j == k {
                let (w, p) = paths[i].boundary;
                out.weight += w;
                out.prediction ^= p;
                out.pairs.push((fired[i], None));
            } else if i < j {
                let (w, p) = cost(i, j);
                out.weight += w;
                out.prediction ^= p;
                if w == paths[i.min(j)].to[i.max(j)].0 {
                    out.pairs.push((fired[i], Some(fired[j])));
                } else {
                    out.pairs.push((fired[i], None));
                    out.pairs.push((fired[j], None));
                }
            }
        }
    }

    fn run(&mut self, fired: impl IntoIterator<Item = usize>, skip_frameless: bool) -> Decoding {
        for c in &mut self.by_component {
            c.clear();
        }
        for d in fired {
            let c = self.graph.component(d);
            if !skip_frameless || self.graph.component_has_frame(c) {
                self.by_component[c].push(d);
            }
        }
        let mut out = Decoding {
            prediction: false,
            weight: 0,
            pairs: Vec::new(),
        };
        for c in 0..self.by_component.len() {
            if self.by_component[c].is_empty() {
                continue;
            }
            let fired = std::mem::take(&mut self.by_component[c]);
            self.match_component(&fired, &mut out);
            self.by_component[c] = fired;
        }
        out
    }

    /// Full decode of a list of fired detector ids.
    pub fn decode_detectors(&mut self, fired: &[usize]) -> Decoding {
        self.run(fired.iter().copied(), false)
    }

    pub fn decode(&mut self, history: &SyndromeHistory) -> Decoding {
        self.run(history.fired(), false)
    }

    /// Observable prediction only; components without observable-flipping
    /// edges are skipped since they cannot change it.
    pub fn predict(&mut self, history: &SyndromeHistory) -> bool {
        self.run(history.fired(), true).prediction
    }

    /// Whether the prediction matches the true observable flip.
    pub fn success(&mut self, history: &SyndromeHistory) -> bool {
        self.predict(history) == history.observable_flip
    }
}

pub fn decode(graph: &DecodingGraph, history: &SyndromeHistory) -> Decoding {
    Decoder::new(graph).decode(history)
}

/// 1 when the decoder recovers the true logical flip, else 0.
pub fn decode_success(graph: &DecodingGraph, history: &SyndromeHistory) -> u8 {
    Decoder::new(graph).success(history) as u8
}
