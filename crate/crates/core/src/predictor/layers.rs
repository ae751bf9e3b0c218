//! Batched f64 layer kernels over flat row-major buffers.
//!
//! Shapes: dense inputs are `B × in`; sequence tensors are channels-last
//! `B × L × C`. Weight layouts are documented per kernel and match the
//! flat parameter vectors of the models.

use rayon::prelude::*;

/// Batch rows per parallel task. Fixed so that gradient reductions happen in
/// the same order whatever the thread count.
pub const ROW_CHUNK: usize = 16;

/// `y = x·W + b` with `W` stored `in × out` row-major followed by `b`.
pub fn dense_forward(x: &[f64], batch: usize, n_in: usize, n_out: usize, params: &[f64], y: &mut [f64]) {
    let (w, b) = params.split_at(n_in * n_out);
    y[..batch * n_out]
        .par_chunks_mut(ROW_CHUNK * n_out)
        .zip(x[..batch * n_in].par_chunks(ROW_CHUNK * n_in))
        .for_each(|(yc, xc)| {
            for (yr, xr) in yc.chunks_mut(n_out).zip(xc.chunks(n_in)) {
                yr.copy_from_slice(&b[..n_out]);
                for (i, &xi) in xr.iter().enumerate() {
                    if xi != 0.0 {
                        axpy(xi, &w[i * n_out..(i + 1) * n_out], yr);
                    }
                }
            }
        });
}

/// Sums per-chunk partial gradients into `grad` in chunk order.
fn reduce_into(grad: &mut [f64], partials: Vec<Vec<f64>>) {
    for part in partials {
        for (g, v) in grad.iter_mut().zip(part) {
            *g += v;
        }
    }
}

/// Accumulates parameter gradients into `grad` and, if given, writes `dx`.
#[allow(clippy::too_many_arguments)]
pub fn dense_backward(
    x: &[f64],
    batch: usize,
    n_in: usize,
    n_out: usize,
    params: &[f64],
    dy: &[f64],
    grad: &mut [f64],
    dx: Option<&mut [f64]>,
) {
    let w = &params[..n_in * n_out];
    let partials: Vec<Vec<f64>> = x[..batch * n_in]
        .par_chunks(ROW_CHUNK * n_in)
        .zip(dy[..batch * n_out].par_chunks(ROW_CHUNK * n_out))
        .map(|(xc, dyc)| {
            let mut g = vec![0.0; n_in * n_out + n_out];
            let (gw, gb) = g.split_at_mut(n_in * n_out);
            for (xr, dyr) in xc.chunks(n_in).zip(dyc.chunks(n_out)) {
                for (g, &d) in gb.iter_mut().zip(dyr) {
                    *g += d;
                }
                for (i, &xi) in xr.iter().enumerate() {
                    if xi != 0.0 {
                        axpy(xi, dyr, &mut gw[i * n_out..(i + 1) * n_out]);
                    }
                }
            }
            g
        })
        .collect();
    reduce_into(&mut grad[..n_in * n_out + n_out], partials);
    if let Some(dx) = dx {
        dx[..batch * n_in]
            .par_chunks_mut(ROW_CHUNK * n_in)
            .zip(dy[..batch * n_out].par_chunks(ROW_CHUNK * n_out))
            .for_each(|(dxc, dyc)| {
                for (dxr, dyr) in dxc.chunks_mut(n_in).zip(dyc.chunks(n_out)) {
                    for (i, d) in dxr.iter_mut().enumerate() {
                        *d = dot(&w[i * n_out..(i + 1) * n_out], dyr);
                    }
                }
            });
    }
}

pub const KERNEL: usize = 3;

/// Same-padded 1-D convolution with kernel 3 along `L`.
/// `W` is stored `[k][c_in][c_out]` followed by `b[c_out]`.
pub fn conv_forward(x: &[f64], batch: usize, len: usize, c_in: usize, c_out: usize, params: &[f64], y: &mut [f64]) {
    let (w, b) = params.split_at(KERNEL * c_in * c_out);
    y[..batch * len * c_out]
        .par_chunks_mut(len * c_out)
        .zip(x[..batch * len * c_in].par_chunks(len * c_in))
        .for_each(|(ys, xs)| {
            for l in 0..len {
                let yr = &mut ys[l * c_out..(l + 1) * c_out];
                yr.copy_from_slice(&b[..c_out]);
                for k in 0..KERNEL {
                    let Some(src) = (l + k).checked_sub(1).filter(|&s| s < len) else { continue };
                    let xr = &xs[src * c_in..(src + 1) * c_in];
                    let wk = &w[k * c_in * c_out..(k + 1) * c_in * c_out];
                    for (ci, &xv) in xr.iter().enumerate() {
                        if xv != 0.0 {
                            axpy(xv, &wk[ci * c_out..(ci + 1) * c_out], yr);
                        }
                    }
                }
            }
        });
}

#[allow(clippy::too_many_arguments)]
pub fn conv_backward(
    x: &[f64],
    batch: usize,
    len: usize,
    c_in: usize,
    c_out: usize,
    params: &[f64],
    dy: &[f64],
    grad: &mut [f64],
    dx: Option<&mut [f64]>,
) {
    let w = &params[..KERNEL * c_in * c_out];
    let n_w = KERNEL * c_in * c_out;
    let sample_in = len * c_in;
    let sample_out = len * c_out;
    let partials: Vec<Vec<f64>> = x[..batch * sample_in]
        .par_chunks(ROW_CHUNK * sample_in)
        .zip(dy[..batch * sample_out].par_chunks(ROW_CHUNK * sample_out))
        .map(|(xc, dyc)| {
            let mut g = vec![0.0; n_w + c_out];
            let (gw, gb) = g.split_at_mut(n_w);
            for (xs, dys) in xc.chunks(sample_in).zip(dyc.chunks(sample_out)) {
                for l in 0..len {
                    let dyr = &dys[l * c_out..(l + 1) * c_out];
                    for (g, &d) in gb.iter_mut().zip(dyr) {
                        *g += d;
                    }
                    for k in 0..KERNEL {
                        let Some(src) = (l + k).checked_sub(1).filter(|&s| s < len) else { continue };
                        let gk = &mut gw[k * c_in * c_out..(k + 1) * c_in * c_out];
                        for ci in 0..c_in {
                            let xv = xs[src * c_in + ci];
                            if xv != 0.0 {
                                axpy(xv, dyr, &mut gk[ci * c_out..(ci + 1) * c_out]);
                            }
                        }
                    }
                }
            }
            g
        })
        .collect();
    reduce_into(&mut grad[..n_w + c_out], partials);
    if let Some(dx) = dx {
        dx[..batch * sample_in]
            .par_chunks_mut(sample_in)
            .zip(dy[..batch * sample_out].par_chunks(sample_out))
            .for_each(|(dxs, dys)| {
                dxs.fill(0.0);
                for l in 0..len {
                    let dyr = &dys[l * c_out..(l + 1) * c_out];
                    for k in 0..KERNEL {
                        let Some(src) = (l + k).checked_sub(1).filter(|&s| s < len) else { continue };
                        let wk = &w[k * c_in * c_out..(k + 1) * c_in * c_out];
                        for ci in 0..c_in {
                            dxs[src * c_in + ci] += dot(&wk[ci * c_out..(ci + 1) * c_out], dyr);
                        }
                    }
                }
            });
    }
}

pub fn relu_forward(x: &mut [f64]) {
    for v in x {
        *v = v.max(0.0);
    }
}

/// Masks `dy` in place by the sign of the ReLU output.
pub fn relu_backward(y: &[f64], dy: &mut [f64]) {
    for (d, &v) in dy.iter_mut().zip(y) {
        if v <= 0.0 {
            *d = 0.0;
        }
    }
}

pub const BN_EPS: f64 = 1e-5;

/// Per-channel normalisation of a `rows × c` buffer. In training mode the
/// batch statistics are used and returned in `mean`/`inv_std`; otherwise
/// `mean`/`inv_std` are inputs derived from the running statistics.
/// Params are `gamma[c]` followed by `beta[c]`. `xhat` receives the
/// normalised values.
#[allow(clippy::too_many_arguments)]
pub fn batchnorm_forward(
    x: &[f64],
    rows: usize,
    c: usize,
    params: &[f64],
    train: bool,
    mean: &mut [f64],
    inv_std: &mut [f64],
    var: &mut [f64],
    xhat: &mut [f64],
    y: &mut [f64],
) {
    let (gamma, beta) = params.split_at(c);
    if train {
        mean.fill(0.0);
        var.fill(0.0);
        for r in 0..rows {
            for (m, &v) in mean.iter_mut().zip(&x[r * c..(r + 1) * c]) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= rows as f64;
        }
        for r in 0..rows {
            for j in 0..c {
                let dv = x[r * c + j] - mean[j];
                var[j] += dv * dv;
            }
        }
        for j in 0..c {
            var[j] /= rows as f64;
            inv_std[j] = 1.0 / (var[j] + BN_EPS).sqrt();
        }
    }
    for r in 0..rows {
        for j in 0..c {
            let i = r * c + j;
            xhat[i] = (x[i] - mean[j]) * inv_std[j];
            y[i] = gamma[j] * xhat[i] + beta[j];
        }
    }
}

/// Backward pass of training-mode batch norm; overwrites `dy` with `dx`.
pub fn batchnorm_backward(xhat: &[f64], rows: usize, c: usize, params: &[f64], inv_std: &[f64], dy: &mut [f64], grad: &mut [f64]) {
    let gamma = &params[..c];
    let (ggamma, gbeta) = grad.split_at_mut(c);
    let mut sum_dy = vec![0.0; c];
    let mut sum_dy_xhat = vec![0.0; c];
    for r in 0..rows {
        for j in 0..c {
            let i = r * c + j;
            sum_dy[j] += dy[i];
            sum_dy_xhat[j] += dy[i] * xhat[i];
        }
    }
    for j in 0..c {
        ggamma[j] += sum_dy_xhat[j];
        gbeta[j] += sum_dy[j];
    }
    let n = rows as f64;
    for r in 0..rows {
        for j in 0..c {
            let i = r * c + j;
            dy[i] = gamma[j] * inv_std[j] / n * (n * dy[i] - sum_dy[j] - xhat[i] * sum_dy_xhat[j]);
        }
    }
}

/// Mean over `L` of a `B × L × C` buffer.
pub fn gap_forward(x: &[f64], batch: usize, len: usize, c: usize, y: &mut [f64]) {
    y[..batch * c].fill(0.0);
    for r in 0..batch {
        let yr = &mut y[r * c..(r + 1) * c];
        for l in 0..len {
            axpy(1.0, &x[(r * len + l) * c..(r * len + l + 1) * c], yr);
        }
        for v in yr {
            *v /= len as f64;
        }
    }
}

pub fn gap_backward(dy: &[f64], batch: usize, len: usize, c: usize, dx: &mut [f64]) {
    for r in 0..batch {
        for l in 0..len {
            for j in 0..c {
                dx[(r * len + l) * c + j] = dy[r * c + j] / len as f64;
            }
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of a logit, computed stably.
pub fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bce_matches_definition() {
        for &(z, y) in &[(0.3, 1.0), (-2.0, 0.0), (5.0, 0.0), (-30.0, 1.0)] {
            let s: f64 = sigmoid(z);
            let direct = -(y * s.ln() + (1.0 - y) * (1.0 - s).ln());
            assert!((bce_with_logit(z, y) - direct).abs() < 1e-9);
        }
        assert!(sigmoid(800.0) == 1.0 && sigmoid(-800.0) == 0.0);
    }

    #[test]
    fn conv_matches_naive() {
        let (b, l, ci, co) = (2, 5, 3, 4);
        let x: Vec<f64> = (0..b * l * ci).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let p: Vec<f64> = (0..KERNEL * ci * co + co).map(|i| ((i * 3) % 11) as f64 * 0.1 - 0.5).collect();
        let mut y = vec![0.0; b * l * co];
        conv_forward(&x, b, l, ci, co, &p, &mut y);
        for r in 0..b {
            for pos in 0..l {
                for o in 0..co {
                    let mut acc = p[KERNEL * ci * co + o];
                    for k in 0..KERNEL {
                        let s = pos as isize + k as isize - 1;
                        if s < 0 || s >= l as isize {
                            continue;
                        }
                        for c in 0..ci {
                            acc += x[(r * l + s as usize) * ci + c] * p[(k * ci + c) * co + o];
                        }
                    }
                    assert!((y[(r * l + pos) * co + o] - acc).abs() < 1e-12);
                }
            }
        }
    }
}
