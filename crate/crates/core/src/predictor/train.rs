//! Mini-batch Adam training with masked per-head cross-entropy.

use rand::seq::SliceRandom;

use super::auc::roc_auc;
use super::data::ExampleSet;
use super::layers::{bce_with_logit, sigmoid};
use super::model::{Predictor, Workspace};
use crate::error::{Error, Result};
use crate::rng::{derive, mix64, rng_from};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
    /// Cap on the inverse-frequency weight of the minority class.
    pub max_class_weight: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 256,
            max_epochs: 50,
            patience: 5,
            validation_fraction: 0.2,
            seed: 0,
            max_class_weight: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_auc: f64,
}

/// Validation AUC of one head with its class counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadAuc {
    pub auc: f64,
    pub positives: usize,
    pub negatives: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub n_train: usize,
    pub n_val: usize,
    /// Per-head AUC of the restored model; `None` if a class is missing.
    pub head_auc: Vec<Option<HeadAuc>>,
}

impl TrainReport {
    pub fn loss_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,val_auc\n");
        for e in &self.log {
            s += &format!("{},{:.9},{:.9},{:.6}\n", e.epoch, e.train_loss, e.val_loss, e.val_auc);
        }
        s
    }
}

/// Shot-level split: every example of a source shot lands on the same side.
pub fn split(set: &ExampleSet, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let s = derive(seed, "validation-split");
    (0..set.len()).partition(|&i| {
        let u = (mix64(s ^ mix64(set.groups[i])) >> 11) as f64 / (1u64 << 53) as f64;
        u >= fraction
    })
}

/// Per-head `[w_fail, w_success]` from the class counts of `idx`.
pub fn class_weights(set: &ExampleSet, idx: &[usize], n_heads: usize, cap: f64) -> Vec<[f64; 2]> {
    let mut counts = vec![[0usize; 2]; n_heads];
    for &i in idx {
        counts[head_of(set, i, n_heads)][set.labels[i] as usize] += 1;
    }
    counts
        .iter()
        .map(|c| {
            let mut w = [1.0; 2];
            if c[0] > 0 && c[1] > 0 {
                let (minor, major) = if c[0] < c[1] { (0, 1) } else { (1, 0) };
                w[minor] = (c[major] as f64 / c[minor] as f64).min(cap);
            }
            w
        })
        .collect()
}

fn head_of(set: &ExampleSet, i: usize, n_heads: usize) -> usize {
    (set.heads[i] as usize).min(n_heads - 1)
}

/// Weighted mean BCE of a batch; writes `dL/dlogit` into `dlogits`
/// (zero for the heads an example does not train).
pub fn batch_loss(model: &Predictor, logits: &[f64], labels: &[u8], heads: &[usize], weights: &[f64], dlogits: &mut [f64]) -> f64 {
    let h = model.n_heads();
    let total: f64 = weights.iter().sum();
    dlogits[..labels.len() * h].fill(0.0);
    let mut loss = 0.0;
    for r in 0..labels.len() {
        let z = logits[r * h + heads[r]];
        let y = labels[r] as f64;
        loss += weights[r] * bce_with_logit(z, y);
        dlogits[r * h + heads[r]] = weights[r] * (sigmoid(z) - y) / total;
    }
    loss / total
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * grad[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

/// Inference-mode success probabilities of the examples in `idx`, each read
/// from the example's own head.
pub fn predict_examples(model: &Predictor, set: &ExampleSet, idx: &[usize]) -> Result<Vec<f64>> {
    let (w, h) = (set.width(), model.n_heads());
    let mut ws = Workspace::default();
    let mut x = Vec::new();
    let mut out = Vec::with_capacity(idx.len());
    for chunk in idx.chunks(1024) {
        x.resize(chunk.len() * w, 0.0);
        for (r, &i) in chunk.iter().enumerate() {
            set.write_f64(i, &mut x[r * w..(r + 1) * w]);
        }
        let probs = model.predict_with(&x, chunk.len(), &mut ws)?;
        out.extend(chunk.iter().enumerate().map(|(r, &i)| probs[r * h + head_of(set, i, h)]));
    }
    Ok(out)
}

fn evaluate(model: &Predictor, set: &ExampleSet, idx: &[usize], weights: &[[f64; 2]]) -> Result<(f64, Vec<Option<HeadAuc>>)> {
    let h = model.n_heads();
    let probs = predict_examples(model, set, idx)?;
    let (mut loss, mut total) = (0.0, 0.0);
    let mut per_head: Vec<(Vec<f64>, Vec<bool>)> = vec![Default::default(); h];
    for (&i, &q) in idx.iter().zip(&probs) {
        let head = head_of(set, i, h);
        let y = set.labels[i];
        let w = weights[head][y as usize];
        let q = q.clamp(1e-15, 1.0 - 1e-15);
        loss -= w * if y == 1 { q.ln() } else { (1.0 - q).ln() };
        total += w;
        per_head[head].0.push(q);
        per_head[head].1.push(y == 1);
    }
    let aucs = per_head
        .iter()
        .map(|(s, y)| {
            let positives = y.iter().filter(|&&v| v).count();
            roc_auc(s, y).ok().map(|auc| HeadAuc {
                auc,
                positives,
                negatives: y.len() - positives,
            })
        })
        .collect();
    Ok((if total > 0.0 { loss / total } else { f64::NAN }, aucs))
}

fn mean_auc(aucs: &[Option<HeadAuc>]) -> f64 {
    let v: Vec<f64> = aucs.iter().flatten().map(|a| a.auc).collect();
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Trains `model` in place and restores the parameters of the epoch with
/// the lowest validation loss (training loss when there is no validation
/// split).
pub fn train(model: &mut Predictor, set: &ExampleSet, cfg: &TrainConfig) -> Result<TrainReport> {
    if set.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if set.width() != model.n_inputs() {
        return Err(Error::LengthMismatch {
            what: "example width",
            expected: model.n_inputs(),
            got: set.width(),
        });
    }
    if cfg.batch_size == 0 || !(0.0..1.0).contains(&cfg.validation_fraction) {
        return Err(Error::Config("batch_size must be positive and validation_fraction in [0, 1)".into()));
    }
    let h = model.n_heads();
    let (mut train_idx, val_idx) = split(set, cfg.validation_fraction, cfg.seed);
    if train_idx.is_empty() {
        return Err(Error::Empty("training split"));
    }
    let weights = class_weights(set, &train_idx, h, cfg.max_class_weight);
    let w = set.width();
    let mut rng = rng_from(derive(cfg.seed, "shuffle"));
    let mut adam = Adam::new(model.params.len());
    let mut ws = Workspace::default();
    let mut grad = vec![0.0; model.params.len()];
    let mut x = vec![0.0; cfg.batch_size * w];
    let mut dlogits = vec![0.0; cfg.batch_size * h];
    let (mut labels, mut heads, mut bw) = (Vec::new(), Vec::new(), Vec::new());
    let mut best = (f64::INFINITY, 0usize, model.params.clone(), model.state.clone());
    let mut log = Vec::new();
    let mut stale = 0;
    for epoch in 1..=cfg.max_epochs {
        train_idx.shuffle(&mut rng);
        let (mut sum, mut count) = (0.0, 0usize);
        for chunk in train_idx.chunks(cfg.batch_size) {
            // batch norm needs at least two rows
            if chunk.len() < 2 && model.n_heads() == 1 && train_idx.len() > 1 {
                continue;
            }
            let b = chunk.len();
            labels.clear();
            heads.clear();
            bw.clear();
            for (r, &i) in chunk.iter().enumerate() {
                set.write_f64(i, &mut x[r * w..(r + 1) * w]);
                let head = head_of(set, i, h);
                labels.push(set.labels[i]);
                heads.push(head);
                bw.push(weights[head][set.labels[i] as usize]);
            }
            model.forward(&x[..b * w], b, true, &mut ws)?;
            let loss = batch_loss(model, &ws.logits, &labels, &heads, &bw, &mut dlogits);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            grad.fill(0.0);
            model.backward(&x[..b * w], &ws, &dlogits, &mut grad);
            model.update_running_stats(&ws);
            adam.step(&mut model.params, &grad, cfg.learning_rate);
            sum += loss * b as f64;
            count += b;
        }
        let train_loss = sum / count.max(1) as f64;
        let (val_loss, aucs) = if val_idx.is_empty() {
            (train_loss, Vec::new())
        } else {
            evaluate(model, set, &val_idx, &weights)?
        };
        if !val_loss.is_finite() {
            return Err(Error::Diverged { epoch, loss: val_loss });
        }
        log.push(EpochLog {
            epoch,
            train_loss,
            val_loss,
            val_auc: mean_auc(&aucs),
        });
        if val_loss < best.0 {
            best = (val_loss, epoch, model.params.clone(), model.state.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    model.params = best.2;
    model.state = best.3;
    let head_auc = if val_idx.is_empty() {
        vec![None; h]
    } else {
        evaluate(model, set, &val_idx, &weights)?.1
    };
    Ok(TrainReport {
        log,
        best_epoch: best.1,
        n_train: train_idx.len(),
        n_val: val_idx.len(),
        head_auc,
    })
}

/// Largest relative error between the analytic gradient and central
/// differences over `per_segment` parameters of every segment, on a random
/// padded batch.
pub fn gradient_check(model: &Predictor, batch: usize, per_segment: usize, seed: u64) -> Result<f64> {
    use rand::Rng;
    let mut rng = rng_from(seed);
    let (n, h) = (model.n_inputs(), model.n_heads());
    let x: Vec<f64> = (0..batch * n).map(|_| [0.0, 1.0, -1.0][rng.random_range(0..3)]).collect();
    let labels: Vec<u8> = (0..batch).map(|_| rng.random_range(0..2)).collect();
    let heads: Vec<usize> = (0..batch).map(|_| rng.random_range(0..h)).collect();
    let weights: Vec<f64> = (0..batch).map(|_| rng.random_range(0.5..2.0)).collect();
    let mut ws = Workspace::default();
    let mut dl = vec![0.0; batch * h];
    let loss_at = |m: &Predictor, ws: &mut Workspace, dl: &mut [f64]| -> Result<f64> {
        m.forward(&x, batch, true, ws)?;
        Ok(batch_loss(m, &ws.logits, &labels, &heads, &weights, dl))
    };
    loss_at(model, &mut ws, &mut dl)?;
    let mut grad = vec![0.0; model.params.len()];
    model.backward(&x, &ws, &dl, &mut grad);
    let mut probe = model.clone();
    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    for seg in model.segments() {
        for _ in 0..per_segment {
            let i = seg.offset + rng.random_range(0..seg.len);
            let orig = probe.params[i];
            probe.params[i] = orig + eps;
            let up = loss_at(&probe, &mut ws, &mut dl)?;
            probe.params[i] = orig - eps;
            let down = loss_at(&probe, &mut ws, &mut dl)?;
            probe.params[i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let scale = numeric.abs().max(grad[i].abs());
            if scale > 1e-7 {
                worst = worst.max((numeric - grad[i]).abs() / scale);
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::model::Architecture;

    #[test]
    fn gradients_match_finite_differences() {
        for arch in [Architecture::TwoHeadMlp, Architecture::Cnn1d] {
            let m = Predictor::new(arch, 2, 8, 3);
            let err = gradient_check(&m, 6, 10, 11).unwrap();
            assert!(err < 1e-4, "{arch:?}: {err}");
        }
    }

    fn toy(n: usize, shuffle_labels: bool, seed: u64) -> ExampleSet {
        use rand::Rng;
        let mut rng = rng_from(seed);
        let mut set = ExampleSet::new(2, 8);
        for i in 0..n {
            let row: Vec<i8> = (0..8).map(|_| rng.random_range(0..2)).collect();
            // separable: success iff the first half outweighs the second
            let y = row[..4].iter().map(|&v| v as i32).sum::<i32>() >= row[4..].iter().map(|&v| v as i32).sum::<i32>();
            set.inputs.extend(&row);
            set.inputs.extend([-1i8; 8]);
            set.labels.push(if shuffle_labels { rng.random_range(0..2) } else { y as u8 });
            set.heads.push((i % 2) as u8);
            set.true_rounds.push(1);
            set.groups.push(i as u64);
        }
        set
    }

    #[test]
    fn learns_separable_toy_problem() {
        let set = toy(2000, false, 1);
        let mut m = Predictor::new(Architecture::TwoHeadMlp, 2, 8, 1);
        let cfg = TrainConfig {
            validation_fraction: 0.0,
            patience: 50,
            batch_size: 64,
            learning_rate: 3e-3,
            ..TrainConfig::default()
        };
        train(&mut m, &set, &cfg).unwrap();
        let idx: Vec<usize> = (0..set.len()).collect();
        let p = predict_examples(&m, &set, &idx).unwrap();
        let correct = idx.iter().filter(|&&i| (p[i] > 0.5) == (set.labels[i] == 1)).count();
        assert!(correct as f64 / set.len() as f64 >= 0.99, "{correct}");
    }

    #[test]
    fn shuffled_labels_have_no_signal() {
        let set = toy(4000, true, 2);
        let mut m = Predictor::new(Architecture::TwoHeadMlp, 2, 8, 2);
        let report = train(&mut m, &set, &TrainConfig { max_epochs: 10, ..TrainConfig::default() }).unwrap();
        for a in report.head_auc.iter().flatten() {
            assert!((0.45..=0.55).contains(&a.auc), "{}", a.auc);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let set = toy(600, false, 3);
        let cfg = TrainConfig { max_epochs: 3, ..TrainConfig::default() };
        let mut a = Predictor::new(Architecture::Cnn1d, 2, 8, 4);
        let mut b = a.clone();
        let ra = train(&mut a, &set, &cfg).unwrap();
        let rb = train(&mut b, &set, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        assert!(ra.loss_csv().starts_with("epoch,train_loss,val_loss,val_auc\n1,"));
    }

    #[test]
    fn split_keeps_groups_together() {
        let mut set = toy(100, false, 5);
        for g in set.groups.iter_mut() {
            *g /= 4;
        }
        let (tr, va) = split(&set, 0.3, 9);
        assert_eq!(tr.len() + va.len(), 100);
        for &i in &va {
            assert!(tr.iter().all(|&j| set.groups[j] != set.groups[i]));
        }
    }
}
