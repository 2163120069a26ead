//! Plain numeric kernels over row-major slices. The tape ops call these for
//! both forward values and backward rules.

/// Floor used by every division guard.
pub const DIV_EPS: f64 = 1e-12;

/// Epsilon added to the standard deviation in [`layer_norm_rows`].
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// `a[m×k] · b[k×n]`
pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for (p, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `aᵀ · b` where `a` is stored `k×m` and `b` is `k×n`; result `m×n`.
pub fn matmul_tn(a: &[f64], b: &[f64], k: usize, m: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for p in 0..k {
        let arow = &a[p * m..(p + 1) * m];
        let brow = &b[p * n..(p + 1) * n];
        for (i, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `a · bᵀ` where `a` is `m×k` and `b` is stored `n×k`; result `m×n`.
pub fn matmul_nt(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            out[i * n + j] = dot(arow, brow);
        }
    }
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn transpose(a: &[f64], m: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a[i * n + j];
        }
    }
    out
}

/// Decomposes `shape` around `axis` into `(outer, len, inner)` so that
/// element `(o, l, i)` sits at `o * len * inner + l * inner + i`.
pub fn axis_layout(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let len = shape[axis];
    let inner = shape[axis + 1..].iter().product();
    (outer, len, inner)
}

fn for_each_slice(shape: &[usize], axis: usize, mut f: impl FnMut(usize, usize, usize)) {
    let (outer, len, inner) = axis_layout(shape, axis);
    for o in 0..outer {
        for i in 0..inner {
            f(o * len * inner + i, len, inner);
        }
    }
}

pub fn softmax_axis(x: &[f64], shape: &[usize], axis: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for_each_slice(shape, axis, |base, len, stride| {
        let mut max = f64::NEG_INFINITY;
        for l in 0..len {
            max = max.max(x[base + l * stride]);
        }
        let mut sum = 0.0;
        for l in 0..len {
            let e = (x[base + l * stride] - max).exp();
            out[base + l * stride] = e;
            sum += e;
        }
        for l in 0..len {
            out[base + l * stride] /= sum;
        }
    });
    out
}

pub fn log_softmax_axis(x: &[f64], shape: &[usize], axis: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for_each_slice(shape, axis, |base, len, stride| {
        let mut max = f64::NEG_INFINITY;
        for l in 0..len {
            max = max.max(x[base + l * stride]);
        }
        let mut sum = 0.0;
        for l in 0..len {
            sum += (x[base + l * stride] - max).exp();
        }
        let lse = max + sum.ln();
        for l in 0..len {
            out[base + l * stride] = x[base + l * stride] - lse;
        }
    });
    out
}

/// Backward of softmax: `y ⊙ (g − Σ_axis g⊙y)`.
pub fn softmax_backward(y: &[f64], g: &[f64], shape: &[usize], axis: usize) -> Vec<f64> {
    let mut out = vec![0.0; y.len()];
    for_each_slice(shape, axis, |base, len, stride| {
        let mut s = 0.0;
        for l in 0..len {
            let idx = base + l * stride;
            s += g[idx] * y[idx];
        }
        for l in 0..len {
            let idx = base + l * stride;
            out[idx] = y[idx] * (g[idx] - s);
        }
    });
    out
}

/// Backward of log-softmax: `g − softmax ⊙ Σ_axis g`.
pub fn log_softmax_backward(y: &[f64], g: &[f64], shape: &[usize], axis: usize) -> Vec<f64> {
    let mut out = vec![0.0; y.len()];
    for_each_slice(shape, axis, |base, len, stride| {
        let mut s = 0.0;
        for l in 0..len {
            s += g[base + l * stride];
        }
        for l in 0..len {
            let idx = base + l * stride;
            out[idx] = g[idx] - y[idx].exp() * s;
        }
    });
    out
}

/// Per-row `(x − μ) / (σ + eps)` with population standard deviation.
pub fn layer_norm_rows(x: &[f64], cols: usize, eps: f64) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for (row, orow) in x.chunks_exact(cols).zip(out.chunks_exact_mut(cols)) {
        let mean = row.iter().sum::<f64>() / cols as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
        let denom = var.sqrt() + eps;
        for (o, v) in orow.iter_mut().zip(row) {
            *o = (v - mean) / denom;
        }
    }
    out
}

pub fn layer_norm_backward(x: &[f64], g: &[f64], cols: usize, eps: f64) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    let n = cols as f64;
    for ((row, grow), orow) in x
        .chunks_exact(cols)
        .zip(g.chunks_exact(cols))
        .zip(out.chunks_exact_mut(cols))
    {
        let mean = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        let d = std + eps;
        let gmean = grow.iter().sum::<f64>() / n;
        let gc: f64 = grow.iter().zip(row).map(|(gi, xi)| gi * (xi - mean)).sum();
        let coef = if std > 0.0 { gc / (d * d * std * n) } else { 0.0 };
        for ((o, gi), xi) in orow.iter_mut().zip(grow).zip(row) {
            *o = (gi - gmean) / d - coef * (xi - mean);
        }
    }
    out
}

/// Each row divided by `max(‖row‖₂, DIV_EPS)`.
pub fn l2_normalize_rows(x: &[f64], cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for (row, orow) in x.chunks_exact(cols).zip(out.chunks_exact_mut(cols)) {
        let n = norm(row).max(DIV_EPS);
        for (o, v) in orow.iter_mut().zip(row) {
            *o = v / n;
        }
    }
    out
}

pub fn l2_normalize_backward(x: &[f64], g: &[f64], cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for ((row, grow), orow) in x
        .chunks_exact(cols)
        .zip(g.chunks_exact(cols))
        .zip(out.chunks_exact_mut(cols))
    {
        let n = norm(row);
        if n > DIV_EPS {
            let proj = dot(row, grow) / (n * n);
            for ((o, gi), xi) in orow.iter_mut().zip(grow).zip(row) {
                *o = (gi - xi * proj) / n;
            }
        } else {
            for (o, gi) in orow.iter_mut().zip(grow) {
                *o = gi / DIV_EPS;
            }
        }
    }
    out
}

/// L2-normalizes a single vector in place (epsilon-guarded).
pub fn normalize_in_place(v: &mut [f64]) {
    let n = norm(v).max(DIV_EPS);
    v.iter_mut().for_each(|x| *x /= n);
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b) / (norm(a).max(DIV_EPS) * norm(b).max(DIV_EPS))
}
