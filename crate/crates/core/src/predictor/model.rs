//! The two predictor architectures over a flat parameter vector.
//!
//! Inputs are `B × (t_max·n_checks)` row-major: round `t` occupies
//! `n_checks` consecutive cells, padded rounds hold [`PAD`].
//!
//! Two-head MLP parameter layout:
//! `W1[in×128] b1[128] W2[128×64] b2[64] Wg[64] bg Wm[64] bm`, with logit 0
//! the stop-now head and logit 1 the one-more head.
//!
//! CNN parameter layout (sequence axis = checks, channels = rounds):
//! `conv1 W[3×t_max×64] b[64]`, `bn1 γ[64] β[64]`,
//! `conv2 W[3×64×64] b[64]`, `bn2 γ[64] β[64]`, `dense W[64] b`.
//! The running statistics `mean1 var1 mean2 var2` live in `state`.

use rand::Rng;

use super::layers::*;
use crate::error::{Error, Result};
use crate::rng::rng_from;

/// Numeric value of padded rounds.
pub const PAD: f64 = -1.0;
pub const MLP_HIDDEN1: usize = 128;
pub const MLP_HIDDEN2: usize = 64;
pub const CNN_FILTERS: usize = 64;
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Architecture {
    TwoHeadMlp,
    Cnn1d,
}

impl Architecture {
    pub fn n_heads(self) -> usize {
        match self {
            Architecture::TwoHeadMlp => 2,
            Architecture::Cnn1d => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Architecture::TwoHeadMlp => "two_head_mlp",
            Architecture::Cnn1d => "cnn1d",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "two_head_mlp" | "mlp" => Ok(Architecture::TwoHeadMlp),
            "cnn1d" | "cnn" => Ok(Architecture::Cnn1d),
            other => Err(Error::Config(format!("unknown architecture {other:?}"))),
        }
    }
}

/// A named parameter block `[offset, offset + len)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub name: &'static str,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predictor {
    pub arch: Architecture,
    pub t_max: usize,
    pub n_checks: usize,
    pub params: Vec<f64>,
    pub state: Vec<f64>,
}

/// Activations kept between forward and backward passes.
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    batch: usize,
    xt: Vec<f64>,
    h1: Vec<f64>,
    h2: Vec<f64>,
    xhat1: Vec<f64>,
    n1: Vec<f64>,
    xhat2: Vec<f64>,
    n2: Vec<f64>,
    pooled: Vec<f64>,
    bn: [BnStats; 2],
    pub logits: Vec<f64>,
}

#[derive(Debug, Default, Clone)]
struct BnStats {
    mean: Vec<f64>,
    var: Vec<f64>,
    inv_std: Vec<f64>,
}

fn grow(v: &mut Vec<f64>, n: usize) {
    if v.len() < n {
        v.resize(n, 0.0);
    }
}

impl Predictor {
    pub fn segments_for(arch: Architecture, t_max: usize, n_checks: usize) -> Vec<Segment> {
        let sizes: Vec<(&'static str, usize)> = match arch {
            Architecture::TwoHeadMlp => vec![
                ("dense1", t_max * n_checks * MLP_HIDDEN1 + MLP_HIDDEN1),
                ("dense2", MLP_HIDDEN1 * MLP_HIDDEN2 + MLP_HIDDEN2),
                ("head_stop_now", MLP_HIDDEN2 + 1),
                ("head_one_more", MLP_HIDDEN2 + 1),
            ],
            Architecture::Cnn1d => vec![
                ("conv1", KERNEL * t_max * CNN_FILTERS + CNN_FILTERS),
                ("bn1", 2 * CNN_FILTERS),
                ("conv2", KERNEL * CNN_FILTERS * CNN_FILTERS + CNN_FILTERS),
                ("bn2", 2 * CNN_FILTERS),
                ("dense", CNN_FILTERS + 1),
            ],
        };
        let mut offset = 0;
        sizes
            .into_iter()
            .map(|(name, len)| {
                let s = Segment { name, offset, len };
                offset += len;
                s
            })
            .collect()
    }

    pub fn segments(&self) -> Vec<Segment> {
        Self::segments_for(self.arch, self.t_max, self.n_checks)
    }

    pub fn n_params_for(arch: Architecture, t_max: usize, n_checks: usize) -> usize {
        Self::segments_for(arch, t_max, n_checks).iter().map(|s| s.len).sum()
    }

    pub fn n_state_for(arch: Architecture) -> usize {
        match arch {
            Architecture::TwoHeadMlp => 0,
            Architecture::Cnn1d => 4 * CNN_FILTERS,
        }
    }

    /// Glorot-uniform weights, zero biases, unit batch-norm scale.
    pub fn new(arch: Architecture, t_max: usize, n_checks: usize, seed: u64) -> Self {
        let mut rng = rng_from(seed);
        let mut params = vec![0.0; Self::n_params_for(arch, t_max, n_checks)];
        let mut glorot = |block: &mut [f64], fan_in: usize, fan_out: usize| {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in block {
                *w = rng.random_range(-a..a);
            }
        };
        let segs = Self::segments_for(arch, t_max, n_checks);
        match arch {
            Architecture::TwoHeadMlp => {
                let n_in = t_max * n_checks;
                let shapes = [(n_in, MLP_HIDDEN1), (MLP_HIDDEN1, MLP_HIDDEN2), (MLP_HIDDEN2, 1), (MLP_HIDDEN2, 1)];
                for (s, (i, o)) in segs.iter().zip(shapes) {
                    glorot(&mut params[s.offset..s.offset + i * o], i, o);
                }
            }
            Architecture::Cnn1d => {
                let s = segs[0];
                glorot(&mut params[s.offset..s.offset + KERNEL * t_max * CNN_FILTERS], KERNEL * t_max, KERNEL * CNN_FILTERS);
                let s = segs[2];
                glorot(
                    &mut params[s.offset..s.offset + KERNEL * CNN_FILTERS * CNN_FILTERS],
                    KERNEL * CNN_FILTERS,
                    KERNEL * CNN_FILTERS,
                );
                let s = segs[4];
                glorot(&mut params[s.offset..s.offset + CNN_FILTERS], CNN_FILTERS, 1);
                for bn in [segs[1], segs[3]] {
                    params[bn.offset..bn.offset + CNN_FILTERS].fill(1.0);
                }
            }
        }
        let mut state = vec![0.0; Self::n_state_for(arch)];
        if arch == Architecture::Cnn1d {
            // mean1 var1 mean2 var2
            state[CNN_FILTERS..2 * CNN_FILTERS].fill(1.0);
            state[3 * CNN_FILTERS..].fill(1.0);
        }
        Self {
            arch,
            t_max,
            n_checks,
            params,
            state,
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.t_max * self.n_checks
    }

    pub fn n_heads(&self) -> usize {
        self.arch.n_heads()
    }

    fn seg(&self, i: usize) -> std::ops::Range<usize> {
        let s = self.segments()[i];
        s.offset..s.offset + s.len
    }

    /// Forward pass; logits end up in `ws.logits` (`B × heads`).
    pub fn forward(&self, x: &[f64], batch: usize, train: bool, ws: &mut Workspace) -> Result<()> {
        if x.len() != batch * self.n_inputs() {
            return Err(Error::LengthMismatch {
                what: "predictor input",
                expected: batch * self.n_inputs(),
                got: x.len(),
            });
        }
        ws.batch = batch;
        grow(&mut ws.logits, batch * self.n_heads());
        let p = &self.params;
        match self.arch {
            Architecture::TwoHeadMlp => {
                grow(&mut ws.h1, batch * MLP_HIDDEN1);
                grow(&mut ws.h2, batch * MLP_HIDDEN2);
                dense_forward(x, batch, self.n_inputs(), MLP_HIDDEN1, &p[self.seg(0)], &mut ws.h1);
                relu_forward(&mut ws.h1[..batch * MLP_HIDDEN1]);
                dense_forward(&ws.h1, batch, MLP_HIDDEN1, MLP_HIDDEN2, &p[self.seg(1)], &mut ws.h2);
                relu_forward(&mut ws.h2[..batch * MLP_HIDDEN2]);
                let mut head = vec![0.0; batch];
                for h in 0..2 {
                    dense_forward(&ws.h2, batch, MLP_HIDDEN2, 1, &p[self.seg(2 + h)], &mut head);
                    for r in 0..batch {
                        ws.logits[r * 2 + h] = head[r];
                    }
                }
            }
            Architecture::Cnn1d => {
                let (l, t, f) = (self.n_checks, self.t_max, CNN_FILTERS);
                let rows = batch * l;
                grow(&mut ws.xt, rows * t);
                for b in 0..batch {
                    for tt in 0..t {
                        for c in 0..l {
                            ws.xt[(b * l + c) * t + tt] = x[b * t * l + tt * l + c];
                        }
                    }
                }
                for v in [&mut ws.h1, &mut ws.xhat1, &mut ws.n1, &mut ws.h2, &mut ws.xhat2, &mut ws.n2] {
                    grow(v, rows * f);
                }
                grow(&mut ws.pooled, batch * f);
                for (k, bn) in ws.bn.iter_mut().enumerate() {
                    bn.mean.resize(f, 0.0);
                    bn.var.resize(f, 0.0);
                    bn.inv_std.resize(f, 0.0);
                    if !train {
                        let s = &self.state[2 * k * f..2 * (k + 1) * f];
                        bn.mean.copy_from_slice(&s[..f]);
                        for j in 0..f {
                            bn.var[j] = s[f + j];
                            bn.inv_std[j] = 1.0 / (s[f + j] + BN_EPS).sqrt();
                        }
                    }
                }
                conv_forward(&ws.xt, batch, l, t, f, &p[self.seg(0)], &mut ws.h1);
                relu_forward(&mut ws.h1[..rows * f]);
                {
                    let bn = &mut ws.bn[0];
                    batchnorm_forward(&ws.h1, rows, f, &p[self.seg(1)], train, &mut bn.mean, &mut bn.inv_std, &mut bn.var, &mut ws.xhat1, &mut ws.n1);
                }
                conv_forward(&ws.n1, batch, l, f, f, &p[self.seg(2)], &mut ws.h2);
                relu_forward(&mut ws.h2[..rows * f]);
                {
                    let bn = &mut ws.bn[1];
                    batchnorm_forward(&ws.h2, rows, f, &p[self.seg(3)], train, &mut bn.mean, &mut bn.inv_std, &mut bn.var, &mut ws.xhat2, &mut ws.n2);
                }
                gap_forward(&ws.n2, batch, l, f, &mut ws.pooled);
                dense_forward(&ws.pooled, batch, f, 1, &p[self.seg(4)], &mut ws.logits);
            }
        }
        Ok(())
    }

    /// Gradient of `Σ dlogits·logits` w.r.t. the parameters, accumulated into
    /// `grad`. Requires a preceding training-mode forward on the same `x`.
    pub fn backward(&self, x: &[f64], ws: &Workspace, dlogits: &[f64], grad: &mut [f64]) {
        let batch = ws.batch;
        let p = &self.params;
        match self.arch {
            Architecture::TwoHeadMlp => {
                let mut dh2 = vec![0.0; batch * MLP_HIDDEN2];
                let mut part = vec![0.0; batch * MLP_HIDDEN2];
                let mut dz = vec![0.0; batch];
                for h in 0..2 {
                    for r in 0..batch {
                        dz[r] = dlogits[r * 2 + h];
                    }
                    dense_backward(&ws.h2, batch, MLP_HIDDEN2, 1, &p[self.seg(2 + h)], &dz, &mut grad[self.seg(2 + h)], Some(&mut part));
                    for (a, b) in dh2.iter_mut().zip(&part) {
                        *a += b;
                    }
                }
                relu_backward(&ws.h2, &mut dh2);
                let mut dh1 = vec![0.0; batch * MLP_HIDDEN1];
                dense_backward(&ws.h1, batch, MLP_HIDDEN1, MLP_HIDDEN2, &p[self.seg(1)], &dh2, &mut grad[self.seg(1)], Some(&mut dh1));
                relu_backward(&ws.h1, &mut dh1);
                dense_backward(x, batch, self.n_inputs(), MLP_HIDDEN1, &p[self.seg(0)], &dh1, &mut grad[self.seg(0)], None);
            }
            Architecture::Cnn1d => {
                let (l, t, f) = (self.n_checks, self.t_max, CNN_FILTERS);
                let rows = batch * l;
                let mut dpool = vec![0.0; batch * f];
                dense_backward(&ws.pooled, batch, f, 1, &p[self.seg(4)], &dlogits[..batch], &mut grad[self.seg(4)], Some(&mut dpool));
                let mut d2 = vec![0.0; rows * f];
                gap_backward(&dpool, batch, l, f, &mut d2);
                batchnorm_backward(&ws.xhat2, rows, f, &p[self.seg(3)], &ws.bn[1].inv_std, &mut d2, &mut grad[self.seg(3)]);
                relu_backward(&ws.h2, &mut d2);
                let mut d1 = vec![0.0; rows * f];
                conv_backward(&ws.n1, batch, l, f, f, &p[self.seg(2)], &d2, &mut grad[self.seg(2)], Some(&mut d1));
                batchnorm_backward(&ws.xhat1, rows, f, &p[self.seg(1)], &ws.bn[0].inv_std, &mut d1, &mut grad[self.seg(1)]);
                relu_backward(&ws.h1, &mut d1);
                conv_backward(&ws.xt, batch, l, t, f, &p[self.seg(0)], &d1, &mut grad[self.seg(0)], None);
            }
        }
    }

    /// Folds the batch statistics of the last training forward into the
    /// running averages.
    pub fn update_running_stats(&mut self, ws: &Workspace) {
        if self.arch != Architecture::Cnn1d {
            return;
        }
        let f = CNN_FILTERS;
        for k in 0..2 {
            let s = &mut self.state[2 * k * f..2 * (k + 1) * f];
            for j in 0..f {
                s[j] = BN_MOMENTUM * s[j] + (1.0 - BN_MOMENTUM) * ws.bn[k].mean[j];
                s[f + j] = BN_MOMENTUM * s[f + j] + (1.0 - BN_MOMENTUM) * ws.bn[k].var[j];
            }
        }
    }

    /// Inference-mode success probabilities, `B × heads`.
    pub fn predict(&self, x: &[f64], batch: usize) -> Result<Vec<f64>> {
        let mut ws = Workspace::default();
        self.predict_with(x, batch, &mut ws)
    }

    pub fn predict_with(&self, x: &[f64], batch: usize, ws: &mut Workspace) -> Result<Vec<f64>> {
        self.forward(x, batch, false, ws)?;
        Ok(ws.logits[..batch * self.n_heads()].iter().map(|&z| sigmoid(z)).collect())
    }
}
