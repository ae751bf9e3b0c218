//! Pauli-frame simulation of annotated circuits.
//!
//! Each qubit carries an X and a Z frame bit. Cliffords conjugate the frame,
//! noise channels XOR random Paulis into it and a Z measurement reports the
//! X frame bit (plus any pending classical flip) as the deviation from the
//! noiseless reference record.

use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::circuit::{write_detectors, AnnotatedCircuit, Gate1, Instruction};
use crate::error::{Error, Result};
use crate::rng::{rng_from, shot_seed};
use crate::syndrome::SyndromeHistory;

const X_BIT: u8 = 1;
const Z_BIT: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    fn bits(self) -> u8 {
        match self {
            Pauli::X => X_BIT,
            Pauli::Y => X_BIT | Z_BIT,
            Pauli::Z => Z_BIT,
        }
    }

    fn from_bits(b: u8) -> Option<Self> {
        match b & 3 {
            1 => Some(Pauli::X),
            3 => Some(Pauli::Y),
            2 => Some(Pauli::Z),
            _ => None,
        }
    }
}

/// A deterministic fault.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    Pauli(u32, Pauli),
    /// Flips the next measurement result on the qubit.
    FlipNext(u32),
}

/// A fault applied immediately before instruction `before`
/// (`before == instructions.len()` is allowed and has no effect on the record).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Injection {
    pub before: usize,
    pub fault: Fault,
}

/// Random fault sites, either by per-site Bernoulli draws or, when every
/// site shares one rate, by geometric skipping between faults.
struct FaultSampler<'r> {
    rng: &'r mut ChaCha8Rng,
    uniform: Option<f64>,
    skip: u64,
}

impl<'r> FaultSampler<'r> {
    fn new(rng: &'r mut ChaCha8Rng, uniform_rate: Option<f64>) -> Self {
        let uniform = uniform_rate.map(|p| (1.0 - p).ln());
        let mut s = Self { rng, uniform, skip: 0 };
        s.skip = s.gap();
        s
    }

    fn gap(&mut self) -> u64 {
        match self.uniform {
            Some(l) if l < 0.0 => {
                let u = 1.0 - self.rng.random::<f64>();
                let g = (u.ln() / l).floor();
                if g >= u64::MAX as f64 {
                    u64::MAX
                } else {
                    g as u64
                }
            }
            _ => u64::MAX,
        }
    }

    #[inline]
    fn fires(&mut self, p: f64) -> bool {
        if self.uniform.is_some() {
            if self.skip == 0 {
                self.skip = self.gap();
                true
            } else {
                self.skip -= 1;
                false
            }
        } else {
            p > 0.0 && self.rng.random::<f64>() < p
        }
    }

    /// Uniform draw in `0..n` by multiply-shift.
    #[inline]
    fn below(&mut self, n: u64) -> u64 {
        ((self.rng.next_u32() as u64) * n) >> 32
    }
}

/// Common error rate of every noise site, if there is one.
pub fn uniform_rate(circuit: &AnnotatedCircuit) -> Option<f64> {
    let mut rate = None;
    for ins in &circuit.instructions {
        let p = match *ins {
            Instruction::Depolarize1 { p, .. }
            | Instruction::Depolarize2 { p, .. }
            | Instruction::FlipBeforeMeasure { p, .. } => p,
            _ => continue,
        };
        match rate {
            None => rate = Some(p),
            Some(r) if r != p => return None,
            _ => {}
        }
    }
    rate
}

/// Reusable single-shot simulator; buffers are kept between shots.
#[derive(Debug, Default, Clone)]
pub struct FrameSimulator {
    frame: Vec<u8>,
    pending: Vec<bool>,
    record: Vec<bool>,
}

impl FrameSimulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Measurement record of the last run, relative to the reference.
    pub fn record(&self) -> &[bool] {
        &self.record
    }

    fn execute(
        &mut self,
        circuit: &AnnotatedCircuit,
        mut noise: Option<FaultSampler<'_>>,
        injections: &[Injection],
    ) {
        self.frame.clear();
        self.frame.resize(circuit.n_qubits, 0);
        self.pending.clear();
        self.pending.resize(circuit.n_qubits, false);
        self.record.clear();
        let mut next_inj = 0;
        for (i, ins) in circuit.instructions.iter().enumerate() {
            while next_inj < injections.len() && injections[next_inj].before == i {
                self.apply(injections[next_inj].fault);
                next_inj += 1;
            }
            match *ins {
                Instruction::Reset(q) => {
                    self.frame[q as usize] = 0;
                    self.pending[q as usize] = false;
                }
                Instruction::Clifford1(Gate1::H, q) => {
                    let f = self.frame[q as usize];
                    self.frame[q as usize] = ((f & X_BIT) << 1) | ((f & Z_BIT) >> 1);
                }
                Instruction::Cnot(c, t) => {
                    let (c, t) = (c as usize, t as usize);
                    self.frame[t] ^= self.frame[c] & X_BIT;
                    self.frame[c] ^= self.frame[t] & Z_BIT;
                }
                Instruction::Depolarize1 { p, q } => {
                    if let Some(n) = noise.as_mut() {
                        if n.fires(p) {
                            self.frame[q as usize] ^= n.below(3) as u8 + 1;
                        }
                    }
                }
                Instruction::Depolarize2 { p, c, t } => {
                    if let Some(n) = noise.as_mut() {
                        if n.fires(p) {
                            let k = n.below(15) as u8 + 1;
                            self.frame[c as usize] ^= k & 3;
                            self.frame[t as usize] ^= k >> 2;
                        }
                    }
                }
                Instruction::FlipBeforeMeasure { p, q } => {
                    if let Some(n) = noise.as_mut() {
                        if n.fires(p) {
                            self.pending[q as usize] ^= true;
                        }
                    }
                }
                Instruction::Measure(q) => {
                    let q = q as usize;
                    self.record.push((self.frame[q] & X_BIT != 0) ^ self.pending[q]);
                    self.pending[q] = false;
                }
            }
        }
    }

    fn apply(&mut self, fault: Fault) {
        match fault {
            Fault::Pauli(q, p) => self.frame[q as usize] ^= p.bits(),
            Fault::FlipNext(q) => self.pending[q as usize] ^= true,
        }
    }

    /// Samples one noisy shot into `out` without allocating.
    pub fn sample_into(&mut self, circuit: &AnnotatedCircuit, seed: u64, out: &mut SyndromeHistory) {
        let mut rng = rng_from(seed);
        let sampler = FaultSampler::new(&mut rng, uniform_rate(circuit));
        self.execute(circuit, Some(sampler), &[]);
        write_detectors(circuit, &self.record, out).expect("record length matches circuit");
    }

    /// Runs the circuit with the given faults injected, optionally on top of
    /// sampled noise (`noise_seed = None` keeps the channels silent).
    pub fn run_injected(
        &mut self,
        circuit: &AnnotatedCircuit,
        injections: &[Injection],
        noise_seed: Option<u64>,
    ) -> Result<SyndromeHistory> {
        let n = circuit.instructions.len();
        for w in injections.windows(2) {
            if w[0].before > w[1].before {
                return Err(Error::Config("injections must be sorted by position".into()));
            }
        }
        for inj in injections {
            let q = match inj.fault {
                Fault::Pauli(q, _) | Fault::FlipNext(q) => q as usize,
            };
            if inj.before > n || q >= circuit.n_qubits {
                return Err(Error::Config(format!("injection {inj:?} out of range")));
            }
        }
        let mut rng = rng_from(noise_seed.unwrap_or(0));
        let sampler = noise_seed.map(|_| FaultSampler::new(&mut rng, uniform_rate(circuit)));
        self.execute(circuit, sampler, injections);
        let mut h = circuit.empty_history();
        write_detectors(circuit, &self.record, &mut h)?;
        Ok(h)
    }
}

/// One noisy shot seeded by `seed`.
pub fn sample_shot(circuit: &AnnotatedCircuit, seed: u64) -> SyndromeHistory {
    let mut h = circuit.empty_history();
    FrameSimulator::new().sample_into(circuit, seed, &mut h);
    h
}

/// `n` shots where shot `i` is seeded by `shot_seed(master_seed, i)`, so the
/// result does not depend on the thread count.
pub fn sample_batch(circuit: &AnnotatedCircuit, n: usize, master_seed: u64) -> Vec<SyndromeHistory> {
    (0..n)
        .into_par_iter()
        .map_init(FrameSimulator::new, |sim, i| {
            let mut h = circuit.empty_history();
            sim.sample_into(circuit, shot_seed(master_seed, i as u64), &mut h);
            h
        })
        .collect()
}

/// Single Pauli component of a noise channel with its detector footprint.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultMechanism {
    pub instruction: usize,
    pub probability: f64,
    /// Detector ids in round-major numbering, sorted.
    pub detectors: Vec<usize>,
    pub observable: bool,
    pub fault: [Option<Fault>; 2],
}

fn components(ins: &Instruction) -> Vec<(f64, [Option<Fault>; 2])> {
    match *ins {
        Instruction::Depolarize1 { p, q } => (1..4u8)
            .map(|b| (p / 3.0, [Some(Fault::Pauli(q, Pauli::from_bits(b).unwrap())), None]))
            .collect(),
        Instruction::Depolarize2 { p, c, t } => (1..16u8)
            .map(|k| {
                let fc = Pauli::from_bits(k & 3).map(|pa| Fault::Pauli(c, pa));
                let ft = Pauli::from_bits(k >> 2).map(|pa| Fault::Pauli(t, pa));
                (p / 15.0, [fc, ft])
            })
            .collect(),
        Instruction::FlipBeforeMeasure { p, q } => vec![(p, [Some(Fault::FlipNext(q)), None])],
        _ => Vec::new(),
    }
}

/// Every single-component fault of the circuit and the detectors it flips,
/// propagated 64 faults at a time in parallel bit lanes.
pub fn fault_mechanisms(circuit: &AnnotatedCircuit) -> Vec<FaultMechanism> {
    let mut all: Vec<FaultMechanism> = Vec::new();
    for (i, ins) in circuit.instructions.iter().enumerate() {
        for (prob, fault) in components(ins) {
            if prob > 0.0 {
                all.push(FaultMechanism {
                    instruction: i,
                    probability: prob,
                    detectors: Vec::new(),
                    observable: false,
                    fault,
                });
            }
        }
    }
    let n_q = circuit.n_qubits;
    let mut x = vec![0u64; n_q];
    let mut z = vec![0u64; n_q];
    let mut pend = vec![0u64; n_q];
    let mut record = Vec::with_capacity(circuit.n_measurements);
    for chunk in all.chunks_mut(64) {
        x.fill(0);
        z.fill(0);
        pend.fill(0);
        record.clear();
        let start = chunk[0].instruction;
        // measurements before the first fault are unaffected
        let prior = circuit.instructions[..start]
            .iter()
            .filter(|i| matches!(i, Instruction::Measure(_)))
            .count();
        record.resize(prior, 0u64);
        let mut next = 0;
        for (i, ins) in circuit.instructions.iter().enumerate().skip(start) {
            match *ins {
                Instruction::Reset(q) => {
                    x[q as usize] = 0;
                    z[q as usize] = 0;
                    pend[q as usize] = 0;
                }
                Instruction::Clifford1(Gate1::H, q) => std::mem::swap(&mut x[q as usize], &mut z[q as usize]),
                Instruction::Cnot(c, t) => {
                    x[t as usize] ^= x[c as usize];
                    z[c as usize] ^= z[t as usize];
                }
                Instruction::Measure(q) => {
                    record.push(x[q as usize] ^ pend[q as usize]);
                    pend[q as usize] = 0;
                }
                _ => {}
            }
            // noise acts after the (trivial) channel instruction itself
            while next < chunk.len() && chunk[next].instruction == i {
                let lane = 1u64 << next;
                for f in chunk[next].fault.iter().flatten() {
                    match *f {
                        Fault::Pauli(q, p) => {
                            let b = p.bits();
                            if b & X_BIT != 0 {
                                x[q as usize] ^= lane;
                            }
                            if b & Z_BIT != 0 {
                                z[q as usize] ^= lane;
                            }
                        }
                        Fault::FlipNext(q) => pend[q as usize] ^= lane,
                    }
                }
                next += 1;
            }
        }
        let parity = |ms: &[u32]| ms.iter().fold(0u64, |a, &m| a ^ record[m as usize]);
        for (id, det) in circuit.detectors.iter().chain(&circuit.terminal).enumerate() {
            let mut w = parity(&det.measurements);
            while w != 0 {
                let lane = w.trailing_zeros() as usize;
                chunk[lane].detectors.push(id);
                w &= w - 1;
            }
        }
        let mut w = parity(&circuit.observable);
        while w != 0 {
            chunk[w.trailing_zeros() as usize].observable = true;
            w &= w - 1;
        }
    }
    all
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::build_memory_circuit;
    use crate::layout::{build_layout, CheckKind};

    fn circuit(d: usize, r: usize, p: f64) -> AnnotatedCircuit {
        build_memory_circuit(&build_layout(d).unwrap(), r, p, CheckKind::X).unwrap()
    }

    #[test]
    fn noiseless_shots_are_silent() {
        let c = circuit(3, 3, 0.0);
        for s in 0..20 {
            let h = sample_shot(&c, s);
            assert_eq!(h.weight(), 0);
            assert!(!h.observable_flip);
        }
    }

    #[test]
    fn batch_matches_single_shots() {
        let c = circuit(3, 3, 0.02);
        let batch = sample_batch(&c, 50, 7);
        for (i, h) in batch.iter().enumerate() {
            assert_eq!(*h, sample_shot(&c, shot_seed(7, i as u64)));
        }
    }

    #[test]
    fn mechanisms_agree_with_injection() {
        let c = circuit(3, 2, 0.01);
        let mechs = fault_mechanisms(&c);
        let mut sim = FrameSimulator::new();
        for m in mechs.iter().step_by(7) {
            let inj: Vec<Injection> = m
                .fault
                .iter()
                .flatten()
                .map(|&f| Injection { before: m.instruction + 1, fault: f })
                .collect();
            let h = sim.run_injected(&c, &inj, None).unwrap();
            assert_eq!(h.fired().collect::<Vec<_>>(), m.detectors, "{m:?}");
            assert_eq!(h.observable_flip, m.observable);
        }
    }

    #[test]
    fn single_faults_have_small_footprint() {
        let c = circuit(5, 3, 0.01);
        for m in fault_mechanisms(&c) {
            assert!(m.detectors.len() <= 4, "{m:?}");
        }
    }

    #[test]
    fn uniform_rate_detection() {
        assert_eq!(uniform_rate(&circuit(3, 2, 0.01)), Some(0.01));
        let mut c = circuit(3, 2, 0.01);
        c.instructions.push(Instruction::Depolarize1 { p: 0.02, q: 0 });
        assert_eq!(uniform_rate(&c), None);
    }
}
