//! Shot orchestration policies, per-shot time accounting and decoder
//! efficiency.
//!
//! Failure probabilities are `1 - (model output)`: the predictors estimate
//! the probability that the decoder succeeds.

use rayon::prelude::*;

use crate::decoder::Decoder;
use crate::error::{Error, Result};
use crate::predictor::{encode_prefix, encode_round, Architecture, Predictor, Workspace};
use crate::syndrome::SyndromeHistory;

/// Per-shot timing in microseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    /// Time per syndrome round.
    pub round_time: f64,
    /// Overhead of aborting and resetting a shot.
    pub reset_time: f64,
    /// Extra time charged when the decoder fails.
    pub decode_fail_time: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            round_time: 0.7,
            reset_time: 0.5,
            decode_fail_time: 1.0,
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        if [self.round_time, self.reset_time, self.decode_fail_time].iter().all(|v| v.is_finite() && *v >= 0.0) {
            Ok(())
        } else {
            Err(Error::Config("cost model entries must be finite and nonnegative".into()))
        }
    }

    pub fn outcome(&self, status: Status, rounds: usize) -> ShotOutcome {
        let time = match status {
            Status::Aborted(t) => t as f64 * self.round_time + self.reset_time,
            Status::Success => rounds as f64 * self.round_time,
            Status::Failure => rounds as f64 * self.round_time + self.decode_fail_time,
        };
        ShotOutcome { status, time }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    /// Aborted after round `t` (1-based).
    Aborted(usize),
    Success,
    Failure,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotOutcome {
    pub status: Status,
    /// Microseconds.
    pub time: f64,
}

/// `p̂_err` after the first `t` rounds of a shot.
pub trait FailureEstimator {
    fn p_fail(&self, history: &SyndromeHistory, t: usize) -> f64;
}

/// `(g_t, m_t)`: failure probability when stopping after round `t`, and
/// the expected failure probability after one more round.
pub trait LookaheadEstimator {
    fn lookahead(&self, history: &SyndromeHistory, t: usize) -> (f64, f64);
}

impl<F: Fn(&SyndromeHistory, usize) -> f64> FailureEstimator for F {
    fn p_fail(&self, history: &SyndromeHistory, t: usize) -> f64 {
        self(history, t)
    }
}

/// Wraps a closure as a [`LookaheadEstimator`].
pub struct LookaheadFn<F>(pub F);

impl<F: Fn(&SyndromeHistory, usize) -> (f64, f64)> LookaheadEstimator for LookaheadFn<F> {
    fn lookahead(&self, history: &SyndromeHistory, t: usize) -> (f64, f64) {
        (self.0)(history, t)
    }
}

impl FailureEstimator for Predictor {
    fn p_fail(&self, history: &SyndromeHistory, t: usize) -> f64 {
        let mut x = vec![0.0; self.n_inputs()];
        encode_prefix(history, t, self.t_max, &mut x);
        1.0 - self.predict(&x, 1).expect("prefix matches model shape")[0]
    }
}

impl LookaheadEstimator for Predictor {
    fn lookahead(&self, history: &SyndromeHistory, t: usize) -> (f64, f64) {
        let mut x = vec![0.0; self.n_inputs()];
        encode_round(history, t - 1, self.t_max, &mut x);
        let out = self.predict(&x, 1).expect("round matches model shape");
        (1.0 - out[0], 1.0 - out[1])
    }
}

/// Round at which the threshold policy aborts: the first `t` with
/// `p_fail(t) >= theta`, checked through `rounds` (or `rounds - 1` when
/// `cap_last` is set).
pub fn adabort_decision(p_fail: impl Fn(usize) -> f64, rounds: usize, theta: f64, cap_last: bool) -> Option<usize> {
    let last = if cap_last { rounds.saturating_sub(1) } else { rounds };
    (1..=last).find(|&t| p_fail(t) >= theta)
}

/// Round at which the lookahead policy aborts: the first `t < rounds` with
/// `c + m_t > g_t`.
pub fn osla_decision(lookahead: impl Fn(usize) -> (f64, f64), rounds: usize, c: f64) -> Option<usize> {
    (1..rounds).find(|&t| {
        let (g, m) = lookahead(t);
        c + m > g
    })
}

fn finish(abort: Option<usize>, success: impl FnOnce() -> bool, rounds: usize, cost: &CostModel) -> ShotOutcome {
    let status = match abort {
        Some(t) => Status::Aborted(t),
        None if success() => Status::Success,
        None => Status::Failure,
    };
    cost.outcome(status, rounds)
}

/// Fixed depth: always measures every round, then decodes.
pub fn run_fd(history: &SyndromeHistory, decoder: &mut Decoder, cost: &CostModel) -> ShotOutcome {
    finish(None, || decoder.success(history), history.rounds(), cost)
}

pub fn run_adabort(
    history: &SyndromeHistory,
    estimator: &impl FailureEstimator,
    decoder: &mut Decoder,
    cost: &CostModel,
    theta: f64,
    cap_last: bool,
) -> ShotOutcome {
    let rounds = history.rounds();
    let abort = adabort_decision(|t| estimator.p_fail(history, t), rounds, theta, cap_last);
    finish(abort, || decoder.success(history), rounds, cost)
}

pub fn run_osla(history: &SyndromeHistory, estimator: &impl LookaheadEstimator, decoder: &mut Decoder, cost: &CostModel, c: f64) -> ShotOutcome {
    let rounds = history.rounds();
    let abort = osla_decision(|t| estimator.lookahead(history, t), rounds, c);
    finish(abort, || decoder.success(history), rounds, cost)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EfficiencyReport {
    pub n: usize,
    pub n_success: usize,
    pub n_failure: usize,
    pub n_aborted: usize,
    /// Microseconds.
    pub total_time: f64,
    /// `N_s / (N_s + N_f)`, zero when every shot was aborted.
    pub success_rate: f64,
    /// `success_rate / (total_time / N)`, per microsecond.
    pub eta: f64,
}

/// Aggregates outcomes in order. Everything-aborted and empty inputs
/// report zero efficiency.
pub fn efficiency<'a>(outcomes: impl IntoIterator<Item = &'a ShotOutcome>) -> EfficiencyReport {
    let mut r = EfficiencyReport::default();
    // Neumaier summation keeps long replays free of drift
    let mut carry = 0.0;
    for o in outcomes {
        r.n += 1;
        let t = r.total_time + o.time;
        carry += if r.total_time.abs() >= o.time.abs() {
            (r.total_time - t) + o.time
        } else {
            (o.time - t) + r.total_time
        };
        r.total_time = t;
        match o.status {
            Status::Aborted(_) => r.n_aborted += 1,
            Status::Success => r.n_success += 1,
            Status::Failure => r.n_failure += 1,
        }
    }
    r.total_time += carry;
    let attempted = r.n_success + r.n_failure;
    if attempted > 0 && r.total_time > 0.0 {
        r.success_rate = r.n_success as f64 / attempted as f64;
        r.eta = r.success_rate / (r.total_time / r.n as f64);
    }
    r
}

/// Model outputs for every round of one shot, cached for replay.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayShot {
    pub success: bool,
    /// `p_fail[t - 1]` for prefixes `t = 1..=rounds`; empty without a model.
    pub p_fail: Vec<f64>,
    /// `(g_t, m_t)` for `t = 1..rounds`; empty without a model.
    pub lookahead: Vec<(f64, f64)>,
}

/// Pre-sampled shots with cached predictions, so that every policy and
/// parameter point sees identical noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplaySet {
    pub rounds: usize,
    pub shots: Vec<ReplayShot>,
}

const REPLAY_CHUNK: usize = 128;

impl ReplaySet {
    /// Evaluates the threshold model on every prefix and the lookahead model
    /// on every round but the last.
    pub fn build(histories: &[SyndromeHistory], successes: &[bool], adabort: Option<&Predictor>, osla: Option<&Predictor>) -> Result<Self> {
        if histories.len() != successes.len() {
            return Err(Error::LengthMismatch {
                what: "replay successes",
                expected: histories.len(),
                got: successes.len(),
            });
        }
        let first = histories.first().ok_or(Error::Empty("replay set"))?;
        let (rounds, n_checks) = (first.rounds(), first.n_checks());
        if let Some(m) = adabort {
            if m.t_max != rounds || m.n_checks != n_checks {
                return Err(Error::Config(format!(
                    "threshold model expects {}x{} prefixes, shots are {rounds}x{n_checks}",
                    m.t_max, m.n_checks
                )));
            }
        }
        if let Some(m) = osla {
            if m.arch != Architecture::TwoHeadMlp || m.t_max != 2 || m.n_checks != n_checks {
                return Err(Error::Config("lookahead model must be a two-round two-head model".into()));
            }
        }
        let chunks: Vec<Result<Vec<ReplayShot>>> = histories
            .par_chunks(REPLAY_CHUNK)
            .zip(successes.par_chunks(REPLAY_CHUNK))
            .map(|(hs, ys)| {
                let mut ws = Workspace::default();
                let mut shots: Vec<ReplayShot> = ys
                    .iter()
                    .map(|&success| ReplayShot {
                        success,
                        p_fail: Vec::new(),
                        lookahead: Vec::new(),
                    })
                    .collect();
                if let Some(m) = adabort {
                    let w = m.n_inputs();
                    let mut x = vec![0.0; hs.len() * rounds * w];
                    for (s, h) in hs.iter().enumerate() {
                        for t in 1..=rounds {
                            let row = s * rounds + t - 1;
                            encode_prefix(h, t, rounds, &mut x[row * w..(row + 1) * w]);
                        }
                    }
                    let probs = m.predict_with(&x, hs.len() * rounds, &mut ws)?;
                    for (s, shot) in shots.iter_mut().enumerate() {
                        shot.p_fail = probs[s * rounds..(s + 1) * rounds].iter().map(|q| 1.0 - q).collect();
                    }
                }
                if let (Some(m), true) = (osla, rounds > 1) {
                    let w = m.n_inputs();
                    let per = rounds - 1;
                    let mut x = vec![0.0; hs.len() * per * w];
                    for (s, h) in hs.iter().enumerate() {
                        for t in 1..rounds {
                            let row = s * per + t - 1;
                            encode_round(h, t - 1, 2, &mut x[row * w..(row + 1) * w]);
                        }
                    }
                    let probs = m.predict_with(&x, hs.len() * per, &mut ws)?;
                    for (s, shot) in shots.iter_mut().enumerate() {
                        shot.lookahead = (0..per)
                            .map(|k| {
                                let row = s * per + k;
                                (1.0 - probs[2 * row], 1.0 - probs[2 * row + 1])
                            })
                            .collect();
                    }
                }
                Ok(shots)
            })
            .collect();
        let mut shots = Vec::with_capacity(histories.len());
        for c in chunks {
            shots.extend(c?);
        }
        Ok(Self { rounds, shots })
    }

    fn require(&self, what: &'static str, ok: impl Fn(&ReplayShot) -> bool) -> Result<()> {
        if self.shots.iter().all(ok) {
            Ok(())
        } else {
            Err(Error::Config(format!("replay set has no cached {what} predictions")))
        }
    }

    pub fn fd(&self, cost: &CostModel) -> EfficiencyReport {
        let outcomes: Vec<_> = self.shots.iter().map(|s| finish(None, || s.success, self.rounds, cost)).collect();
        efficiency(&outcomes)
    }

    pub fn adabort(&self, cost: &CostModel, theta: f64, cap_last: bool) -> Result<EfficiencyReport> {
        self.require("threshold", |s| s.p_fail.len() == self.rounds)?;
        let outcomes: Vec<_> = self
            .shots
            .iter()
            .map(|s| {
                let abort = adabort_decision(|t| s.p_fail[t - 1], self.rounds, theta, cap_last);
                finish(abort, || s.success, self.rounds, cost)
            })
            .collect();
        Ok(efficiency(&outcomes))
    }

    pub fn osla(&self, cost: &CostModel, c: f64) -> Result<EfficiencyReport> {
        self.require("lookahead", |s| s.lookahead.len() + 1 == self.rounds)?;
        let outcomes: Vec<_> = self
            .shots
            .iter()
            .map(|s| {
                let abort = osla_decision(|t| s.lookahead[t - 1], self.rounds, c);
                finish(abort, || s.success, self.rounds, cost)
            })
            .collect();
        Ok(efficiency(&outcomes))
    }

    pub fn sweep_theta(&self, cost: &CostModel, grid: &[f64], cap_last: bool) -> Result<Vec<(f64, EfficiencyReport)>> {
        grid.iter().map(|&th| Ok((th, self.adabort(cost, th, cap_last)?))).collect()
    }

    pub fn sweep_c(&self, cost: &CostModel, grid: &[f64]) -> Result<Vec<(f64, EfficiencyReport)>> {
        grid.iter().map(|&c| Ok((c, self.osla(cost, c)?))).collect()
    }
}

/// `(k + 0.5) / n` for `k = 0..n`.
pub fn theta_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| (k as f64 + 0.5) / n as f64).collect()
}

/// Continuation costs swept by default; `-1` can never trigger an abort.
pub const DEFAULT_C_GRID: [f64; 10] = [-1.0, -0.5, -0.2, -0.1, -0.05, -0.02, -0.01, -0.005, -0.002, -0.001];

/// Index of the largest efficiency, first on ties.
pub fn argmax(values: &[f64]) -> Option<usize> {
    values
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, &v)| match best {
            Some((_, b)) if b >= v => best,
            _ => Some((i, v)),
        })
        .map(|(i, _)| i)
}

/// Three-point running median; the end points are kept.
pub fn median3(values: &[f64]) -> Vec<f64> {
    (0..values.len())
        .map(|i| {
            if i == 0 || i + 1 == values.len() {
                values[i]
            } else {
                let mut w = [values[i - 1], values[i], values[i + 1]];
                w.sort_by(f64::total_cmp);
                w[1]
            }
        })
        .collect()
}

/// Number of plateaus (maximal runs of equal values) that exceed both
/// neighbouring runs. A unimodal curve has exactly one.
pub fn count_peaks(values: &[f64]) -> usize {
    let mut runs: Vec<f64> = Vec::new();
    for &v in values {
        if runs.last() != Some(&v) {
            runs.push(v);
        }
    }
    (0..runs.len())
        .filter(|&i| (i == 0 || runs[i - 1] < runs[i]) && (i + 1 == runs.len() || runs[i + 1] < runs[i]))
        .count()
}

pub const EFFICIENCY_HEADER: &str = "policy,d,p,theta_or_c,N,N_s,N_f,N_a,total_time_us,S_rate,eta_dec,seed";

/// One efficiency CSV row; `param` is empty for fixed depth.
pub fn efficiency_row(policy: &str, d: usize, p: f64, param: Option<f64>, r: &EfficiencyReport, seed: u64) -> String {
    let param = param.map(|v| v.to_string()).unwrap_or_default();
    format!(
        "{policy},{d},{p},{param},{},{},{},{},{},{},{},{seed}",
        r.n, r.n_success, r.n_failure, r.n_aborted, r.total_time, r.success_rate, r.eta
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::MemoryExperiment;
    use crate::frame::sample_batch;
    use crate::layout::CheckKind;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn efficiency_examples() {
        let c = CostModel::default();
        let r = efficiency(&[c.outcome(Status::Success, 3), c.outcome(Status::Aborted(1), 3)]);
        assert_eq!((r.n, r.n_success, r.n_aborted), (2, 1, 1));
        assert!(rel(r.eta, 1.0 / 1.65) < 1e-12);
        let r = efficiency(&vec![c.outcome(Status::Success, 3); 7]);
        assert!(rel(r.eta, 1.0 / 2.1) < 1e-12);
        let mut v = vec![c.outcome(Status::Success, 3); 90];
        v.extend(vec![c.outcome(Status::Failure, 3); 10]);
        let r = efficiency(&v);
        assert!(rel(r.total_time, 220.0) < 1e-12 && rel(r.eta, 0.9 / 2.2) < 1e-12);
        let r = efficiency(&[c.outcome(Status::Aborted(1), 3)]);
        assert_eq!((r.success_rate, r.eta), (0.0, 0.0));
    }

    #[test]
    fn stubbed_policies() {
        let exp = MemoryExperiment::new(3, 3, 0.0, CheckKind::X);
        assert!(exp.is_err());
        let exp = MemoryExperiment::new(3, 3, 0.01, CheckKind::X).unwrap();
        let h = exp.circuit.empty_history();
        let mut dec = Decoder::new(&exp.graph);
        let cost = CostModel::default();
        let seq = [0.2, 0.6, 0.1];
        let o = run_adabort(&h, &|_: &SyndromeHistory, t: usize| seq[t - 1], &mut dec, &cost, 0.5, false);
        assert_eq!(o.status, Status::Aborted(2));
        assert!(rel(o.time, 1.9) < 1e-12);
        let o = run_osla(&h, &LookaheadFn(|_: &SyndromeHistory, _| (0.9, 0.95)), &mut dec, &cost, -0.01);
        assert_eq!(o.status, Status::Aborted(1));
        assert!(rel(o.time, 1.2) < 1e-12);
        let o = run_osla(&h, &LookaheadFn(|_: &SyndromeHistory, _| (0.0, 0.0)), &mut dec, &cost, -0.01);
        assert_eq!(o, run_fd(&h, &mut dec, &cost));
        assert!(rel(o.time, 2.1) < 1e-12);
        // the threshold policy may abort after the final round unless capped
        let late = |_: &SyndromeHistory, t: usize| if t == 3 { 0.9 } else { 0.0 };
        assert_eq!(run_adabort(&h, &late, &mut dec, &cost, 0.5, false).status, Status::Aborted(3));
        assert_eq!(run_adabort(&h, &late, &mut dec, &cost, 0.5, true).status, Status::Success);
    }

    #[test]
    fn replay_matches_streamed_policies() {
        let exp = MemoryExperiment::new(3, 3, 0.03, CheckKind::X).unwrap();
        let hs = sample_batch(&exp.circuit, 200, 5);
        let mut dec = Decoder::new(&exp.graph);
        let ys: Vec<bool> = hs.iter().map(|h| dec.success(h)).collect();
        let cnn = Predictor::new(Architecture::Cnn1d, 3, 8, 1);
        let mlp = Predictor::new(Architecture::TwoHeadMlp, 2, 8, 2);
        let replay = ReplaySet::build(&hs, &ys, Some(&cnn), Some(&mlp)).unwrap();
        let cost = CostModel::default();
        for theta in [0.3, 0.5, 0.7] {
            let streamed: Vec<_> = hs.iter().map(|h| run_adabort(h, &cnn, &mut dec, &cost, theta, false)).collect();
            let a = efficiency(&streamed);
            let b = replay.adabort(&cost, theta, false).unwrap();
            assert_eq!((a.n_success, a.n_failure, a.n_aborted), (b.n_success, b.n_failure, b.n_aborted));
            assert!(rel(a.total_time, b.total_time) < 1e-12);
        }
        for c in [-0.3, -0.01, 0.2] {
            let streamed: Vec<_> = hs.iter().map(|h| run_osla(h, &mlp, &mut dec, &cost, c)).collect();
            let a = efficiency(&streamed);
            let b = replay.osla(&cost, c).unwrap();
            assert_eq!((a.n_success, a.n_failure, a.n_aborted), (b.n_success, b.n_failure, b.n_aborted));
        }
        // unreachable thresholds reduce to fixed depth
        let fd = replay.fd(&cost);
        assert_eq!(replay.adabort(&cost, 1.0 + 1e-9, false).unwrap(), fd);
        assert_eq!(replay.osla(&cost, -1.0).unwrap(), fd);
        assert_eq!(fd.total_time, efficiency(&hs.iter().map(|h| run_fd(h, &mut dec, &cost)).collect::<Vec<_>>()).total_time);
        let sweep = replay.sweep_theta(&cost, &[0.5], false).unwrap();
        assert_eq!(sweep[0].1, replay.adabort(&cost, 0.5, false).unwrap());
    }

    #[test]
    fn shape_helpers() {
        assert_eq!(theta_grid(4), vec![0.125, 0.375, 0.625, 0.875]);
        assert_eq!(argmax(&[0.0, 2.0, 2.0, 1.0]), Some(1));
        assert_eq!(median3(&[0.0, 5.0, 1.0, 2.0, 2.0]), vec![0.0, 1.0, 2.0, 2.0, 2.0]);
        assert_eq!(count_peaks(&[0.0, 0.0, 3.0, 3.0, 2.0, 1.0]), 1);
        assert_eq!(count_peaks(&[0.0, 2.0, 1.0, 2.0, 0.0]), 2);
        assert_eq!(count_peaks(&[1.0, 1.0]), 1);
    }

    #[test]
    fn csv_row_layout() {
        let c = CostModel::default();
        let r = efficiency(&[c.outcome(Status::Success, 3)]);
        assert_eq!(efficiency_row("fd", 3, 0.01, None, &r, 9), "fd,3,0.01,,1,1,0,0,2.0999999999999996,1,0.4761904761904763,9");
    }
}
