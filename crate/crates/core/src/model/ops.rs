//! Dense kernels with hand-written gradients. Matrices are row-major `f32`
//! slices; products go through `matrixmultiply`.

use matrixmultiply::sgemm;

/// Read-only strided matrix view.
#[derive(Clone, Copy)]
pub(crate) struct View<'a> {
    data: &'a [f32],
    rows: usize,
    cols: usize,
    rs: usize,
    cs: usize,
}

impl<'a> View<'a> {
    pub fn new(data: &'a [f32], rows: usize, cols: usize) -> Self {
        Self::strided(data, rows, cols, cols, 1)
    }

    pub fn strided(data: &'a [f32], rows: usize, cols: usize, rs: usize, cs: usize) -> Self {
        let v = Self {
            data,
            rows,
            cols,
            rs,
            cs,
        };
        assert!(v.fits(), "view exceeds its buffer");
        v
    }

    fn fits(&self) -> bool {
        self.rows == 0
            || self.cols == 0
            || (self.rows - 1) * self.rs + (self.cols - 1) * self.cs < self.data.len()
    }

    pub fn t(self) -> Self {
        Self {
            data: self.data,
            rows: self.cols,
            cols: self.rows,
            rs: self.cs,
            cs: self.rs,
        }
    }
}

/// Mutable strided matrix view.
pub(crate) struct ViewMut<'a> {
    data: &'a mut [f32],
    rows: usize,
    cols: usize,
    rs: usize,
    cs: usize,
}

impl<'a> ViewMut<'a> {
    pub fn new(data: &'a mut [f32], rows: usize, cols: usize) -> Self {
        Self::strided(data, rows, cols, cols, 1)
    }

    pub fn strided(data: &'a mut [f32], rows: usize, cols: usize, rs: usize, cs: usize) -> Self {
        assert!(
            rows == 0 || cols == 0 || (rows - 1) * rs + (cols - 1) * cs < data.len(),
            "view exceeds its buffer"
        );
        Self {
            data,
            rows,
            cols,
            rs,
            cs,
        }
    }
}

/// `c = alpha * a * b + beta * c`. With `beta == 0` the prior contents of `c`
/// are ignored.
pub(crate) fn gemm(alpha: f32, a: View<'_>, b: View<'_>, beta: f32, c: ViewMut<'_>) {
    assert_eq!(a.cols, b.rows, "inner dimensions differ");
    assert_eq!((a.rows, b.cols), (c.rows, c.cols), "output shape differs");
    let (m, k, n) = (a.rows, a.cols, b.cols);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for i in 0..m {
            for j in 0..n {
                let x = &mut c.data[i * c.rs + j * c.cs];
                *x = if beta == 0.0 { 0.0 } else { beta * *x };
            }
        }
        return;
    }
    // SAFETY: every view was bounds-checked on construction, so all indices
    // sgemm touches lie inside the borrowed slices; `c` is uniquely borrowed.
    unsafe {
        sgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr(),
            b.rs as isize,
            b.cs as isize,
            beta,
            c.data.as_mut_ptr(),
            c.rs as isize,
            c.cs as isize,
        );
    }
}

/// `y[rows, dout] = x[rows, din] * w[din, dout] + bias`.
pub(crate) fn linear_forward(x: &[f32], w: &[f32], bias: &[f32], rows: usize, y: &mut [f32]) {
    let (din, dout) = (w.len() / bias.len(), bias.len());
    debug_assert_eq!(x.len(), rows * din);
    for row in y.chunks_exact_mut(dout) {
        row.copy_from_slice(bias);
    }
    gemm(
        1.0,
        View::new(x, rows, din),
        View::new(w, din, dout),
        1.0,
        ViewMut::new(y, rows, dout),
    );
}

/// Accumulates weight and bias gradients, and adds the input gradient into
/// `dx` when given.
#[allow(clippy::too_many_arguments)]
pub(crate) fn linear_backward(
    x: &[f32],
    w: &[f32],
    rows: usize,
    dy: &[f32],
    dw: &mut [f32],
    db: &mut [f32],
    dx: Option<&mut [f32]>,
) {
    let dout = db.len();
    let din = w.len() / dout;
    gemm(
        1.0,
        View::new(x, rows, din).t(),
        View::new(dy, rows, dout),
        1.0,
        ViewMut::new(dw, din, dout),
    );
    for row in dy.chunks_exact(dout) {
        for (g, &d) in db.iter_mut().zip(row) {
            *g += d;
        }
    }
    if let Some(dx) = dx {
        gemm(
            1.0,
            View::new(dy, rows, dout),
            View::new(w, din, dout).t(),
            1.0,
            ViewMut::new(dx, rows, din),
        );
    }
}

pub(crate) const LN_EPS: f32 = 1e-5;

/// Row-wise layer norm. Writes the normalized input to `xhat` and the inverse
/// standard deviation per row to `rstd` for the backward pass.
pub(crate) fn layer_norm_forward(
    x: &[f32],
    gamma: &[f32],
    beta: &[f32],
    y: &mut [f32],
    xhat: &mut [f32],
    rstd: &mut [f32],
) {
    let d = gamma.len();
    for (r, ((xr, yr), hr)) in x
        .chunks_exact(d)
        .zip(y.chunks_exact_mut(d))
        .zip(xhat.chunks_exact_mut(d))
        .enumerate()
    {
        let mean = xr.iter().sum::<f32>() / d as f32;
        let var = xr.iter().map(|&v| (v - mean) * (v - mean)).sum::<f32>() / d as f32;
        let rs = 1.0 / (var + LN_EPS).sqrt();
        rstd[r] = rs;
        for j in 0..d {
            let h = (xr[j] - mean) * rs;
            hr[j] = h;
            yr[j] = gamma[j] * h + beta[j];
        }
    }
}

/// Adds the input gradient into `dx`, accumulating parameter gradients.
pub(crate) fn layer_norm_backward(
    dy: &[f32],
    gamma: &[f32],
    xhat: &[f32],
    rstd: &[f32],
    dgamma: &mut [f32],
    dbeta: &mut [f32],
    dx: &mut [f32],
) {
    let d = gamma.len();
    let mut g = vec![0f32; d];
    for (r, ((dyr, hr), dxr)) in dy
        .chunks_exact(d)
        .zip(xhat.chunks_exact(d))
        .zip(dx.chunks_exact_mut(d))
        .enumerate()
    {
        let mut mean_g = 0.0;
        let mut mean_gh = 0.0;
        for j in 0..d {
            dgamma[j] += dyr[j] * hr[j];
            dbeta[j] += dyr[j];
            g[j] = dyr[j] * gamma[j];
            mean_g += g[j];
            mean_gh += g[j] * hr[j];
        }
        mean_g /= d as f32;
        mean_gh /= d as f32;
        for j in 0..d {
            dxr[j] += rstd[r] * (g[j] - mean_g - hr[j] * mean_gh);
        }
    }
}

const GELU_C: f32 = 0.797_884_6; // sqrt(2 / pi)
const GELU_A: f32 = 0.044_715;

pub(crate) fn gelu(x: f32) -> f32 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

pub(crate) fn gelu_grad(x: f32) -> f32 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

pub(crate) fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

/// In-place softmax of one row.
pub(crate) fn softmax_row(row: &mut [f32]) {
    let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    let inv = 1.0 / sum;
    for v in row.iter_mut() {
        *v *= inv;
    }
}

/// Ragged batch layout: example `i` occupies rows `start[i]..start[i] + len[i]`.
#[derive(Debug, Clone, Default)]
pub(crate) struct Segments {
    pub start: Vec<usize>,
    pub len: Vec<usize>,
}

impl Segments {
    pub fn from_lengths(lengths: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::default();
        let mut at = 0;
        for l in lengths {
            s.start.push(at);
            s.len.push(l);
            at += l;
        }
        s
    }

    pub fn count(&self) -> usize {
        self.len.len()
    }

    pub fn total(&self) -> usize {
        self.start.last().map_or(0, |s| s + self.len.last().unwrap())
    }

    /// Position of each row inside its example.
    pub fn positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.len.iter().flat_map(|&l| 0..l)
    }
}

/// Multi-head scaled dot-product attention over ragged batches.
///
/// `q` has the query layout, `k` and `v` the key layout; all three have `d`
/// columns split evenly across `heads`. Attention probabilities are stored in
/// `probs`, one `tq x tk` block per example and head, for the backward pass.
#[allow(clippy::too_many_arguments)]
pub(crate) fn attention_forward(
    q: &[f32],
    k: &[f32],
    v: &[f32],
    d: usize,
    heads: usize,
    qs: &Segments,
    ks: &Segments,
    causal: bool,
    probs: &mut Vec<f32>,
    out: &mut [f32],
) {
    let dh = d / heads;
    let scale = 1.0 / (dh as f32).sqrt();
    probs.clear();
    for e in 0..qs.count() {
        let (q0, tq) = (qs.start[e], qs.len[e]);
        let (k0, tk) = (ks.start[e], ks.len[e]);
        for h in 0..heads {
            let at = probs.len();
            probs.resize(at + tq * tk, 0.0);
            let p = &mut probs[at..];
            let qv = View::strided(&q[q0 * d + h * dh..], tq, dh, d, 1);
            let kv = View::strided(&k[k0 * d + h * dh..], tk, dh, d, 1);
            gemm(scale, qv, kv.t(), 0.0, ViewMut::new(p, tq, tk));
            for (i, row) in p.chunks_exact_mut(tk).enumerate() {
                if causal {
                    let (live, masked) = row.split_at_mut((i + 1).min(tk));
                    softmax_row(live);
                    masked.fill(0.0);
                } else {
                    softmax_row(row);
                }
            }
            let vv = View::strided(&v[k0 * d + h * dh..], tk, dh, d, 1);
            let ov = ViewMut::strided(&mut out[q0 * d + h * dh..], tq, dh, d, 1);
            gemm(1.0, View::new(p, tq, tk), vv, 0.0, ov);
        }
    }
}

/// Gradients of [`attention_forward`]; results are added into `dq`, `dk`, `dv`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn attention_backward(
    q: &[f32],
    k: &[f32],
    v: &[f32],
    d: usize,
    heads: usize,
    qs: &Segments,
    ks: &Segments,
    probs: &[f32],
    dout: &[f32],
    dq: &mut [f32],
    dk: &mut [f32],
    dv: &mut [f32],
) {
    let dh = d / heads;
    let scale = 1.0 / (dh as f32).sqrt();
    let mut at = 0;
    let mut ds = Vec::new();
    for e in 0..qs.count() {
        let (q0, tq) = (qs.start[e], qs.len[e]);
        let (k0, tk) = (ks.start[e], ks.len[e]);
        for h in 0..heads {
            let p = &probs[at..at + tq * tk];
            at += tq * tk;
            let off_q = q0 * d + h * dh;
            let off_k = k0 * d + h * dh;
            let dov = View::strided(&dout[off_q..], tq, dh, d, 1);
            // dV += P^T dO
            gemm(
                1.0,
                View::new(p, tq, tk).t(),
                dov,
                1.0,
                ViewMut::strided(&mut dv[off_k..], tk, dh, d, 1),
            );
            // dP = dO V^T, then dS = P * (dP - rowsum(dP * P))
            ds.clear();
            ds.resize(tq * tk, 0.0);
            gemm(
                1.0,
                dov,
                View::strided(&v[off_k..], tk, dh, d, 1).t(),
                0.0,
                ViewMut::new(&mut ds, tq, tk),
            );
            for (dr, pr) in ds.chunks_exact_mut(tk).zip(p.chunks_exact(tk)) {
                let dot: f32 = dr.iter().zip(pr).map(|(a, b)| a * b).sum();
                for (x, &pv) in dr.iter_mut().zip(pr) {
                    *x = pv * (*x - dot);
                }
            }
            gemm(
                scale,
                View::new(&ds, tq, tk),
                View::strided(&k[off_k..], tk, dh, d, 1),
                1.0,
                ViewMut::strided(&mut dq[off_q..], tq, dh, d, 1),
            );
            gemm(
                scale,
                View::new(&ds, tq, tk).t(),
                View::strided(&q[off_q..], tq, dh, d, 1),
                1.0,
                ViewMut::strided(&mut dk[off_k..], tk, dh, d, 1),
            );
        }
    }
}

/// Mean token cross-entropy over rows of `logits`; writes `d loss / d logits`
/// into `dlogits`. Returns the summed (not averaged) loss and the number of
/// rows whose argmax matches the target.
pub(crate) fn cross_entropy(
    logits: &[f32],
    targets: &[u32],
    vocab: usize,
    dlogits: &mut [f32],
) -> (f64, usize) {
    let rows = targets.len();
    let inv = 1.0 / rows as f32;
    let mut total = 0f64;
    let mut correct = 0;
    for ((lr, dr), &t) in logits
        .chunks_exact(vocab)
        .zip(dlogits.chunks_exact_mut(vocab))
        .zip(targets)
    {
        dr.copy_from_slice(lr);
        let arg = argmax(lr);
        if arg == t as usize {
            correct += 1;
        }
        softmax_row(dr);
        total -= (dr[t as usize].max(f32::MIN_POSITIVE) as f64).ln();
        dr[t as usize] -= 1.0;
        for x in dr.iter_mut() {
            *x *= inv;
        }
    }
    (total, correct)
}

pub(crate) fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &[f32], b: &[f32], m: usize, k: usize, n: usize) -> Vec<f32> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for l in 0..k {
                    c[i * n + j] += a[i * k + l] * b[l * n + j];
                }
            }
        }
        c
    }

    #[test]
    fn gemm_matches_naive_product() {
        let a: Vec<f32> = (0..6).map(|x| x as f32).collect();
        let b: Vec<f32> = (0..12).map(|x| (x as f32) * 0.5 - 2.0).collect();
        let mut c = vec![1.0; 8];
        gemm(1.0, View::new(&a, 2, 3), View::new(&b, 3, 4), 0.0, ViewMut::new(&mut c, 2, 4));
        assert_eq!(c, naive(&a, &b, 2, 3, 4));
        // transposed view: (a^T)^T = a
        let at: Vec<f32> = vec![0.0, 3.0, 1.0, 4.0, 2.0, 5.0];
        let mut c2 = vec![0.0; 8];
        gemm(1.0, View::new(&at, 3, 2).t(), View::new(&b, 3, 4), 0.0, ViewMut::new(&mut c2, 2, 4));
        assert_eq!(c, c2);
    }

    #[test]
    #[should_panic(expected = "exceeds")]
    fn oversized_view_panics() {
        let a = [0.0f32; 5];
        View::new(&a, 2, 3);
    }

    #[test]
    fn causal_softmax_masks_future() {
        let segs = Segments::from_lengths([3]);
        let q = vec![0.1f32; 6];
        let k = vec![0.2f32; 6];
        let v: Vec<f32> = (0..6).map(|x| x as f32).collect();
        let mut probs = Vec::new();
        let mut out = vec![0.0; 6];
        attention_forward(&q, &k, &v, 2, 1, &segs, &segs, true, &mut probs, &mut out);
        assert_eq!(&probs[..3], &[1.0, 0.0, 0.0]);
        assert!((probs[3] - 0.5).abs() < 1e-6 && probs[5] == 0.0);
        assert_eq!(&out[..2], &[0.0, 1.0]);
    }

    #[test]
    fn gelu_derivative_matches_difference() {
        for &x in &[-3.0f32, -0.5, 0.0, 0.7, 2.5] {
            let h = 1e-3;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_grad(x)).abs() < 1e-3, "{x}");
        }
    }

    #[test]
    fn segments_layout() {
        let s = Segments::from_lengths([2, 0, 3]);
        assert_eq!(s.start, vec![0, 2, 2]);
        assert_eq!(s.total(), 5);
        assert_eq!(s.positions().collect::<Vec<_>>(), vec![0, 1, 0, 1, 2]);
    }
}
