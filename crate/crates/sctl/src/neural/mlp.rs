//! Dense multilayer perceptron: leaky-ReLU hidden layers, linear output.
//!
//! Batched forward/backward operate on column-major matrices whose columns are
//! samples; the training hot path is entirely gemm-shaped.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Result, SctlError};

/// Hidden-layer activation slope for negative pre-activations.
pub const LEAKY_SLOPE: f64 = 0.01;

/// `c = alpha·op(a)·op(b) + beta·c` on column-major storage, with the
/// transposes expressed through strides (no copies). This is the training hot
/// path; nalgebra's own `gemm_tr` falls back to a naive loop at these sizes.
fn dgemm(
    c: &mut DMatrix<f64>,
    a: &DMatrix<f64>,
    ta: bool,
    b: &DMatrix<f64>,
    tb: bool,
    alpha: f64,
    beta: f64,
) {
    let (m, ka) = if ta { (a.ncols(), a.nrows()) } else { (a.nrows(), a.ncols()) };
    let (kb, n) = if tb { (b.ncols(), b.nrows()) } else { (b.nrows(), b.ncols()) };
    assert_eq!(ka, kb, "dgemm inner dimensions");
    assert_eq!((c.nrows(), c.ncols()), (m, n), "dgemm output shape");
    let (rsa, csa) = if ta { (a.nrows() as isize, 1) } else { (1, a.nrows() as isize) };
    let (rsb, csb) = if tb { (b.nrows() as isize, 1) } else { (1, b.nrows() as isize) };
    let rsc = 1;
    let csc = c.nrows() as isize;
    unsafe {
        dgemm_raw(
            m,
            ka,
            n,
            alpha,
            a.as_slice().as_ptr(),
            rsa,
            csa,
            b.as_slice().as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_slice().as_mut_ptr(),
            rsc,
            csc,
        );
    }
}

/// Stride-level gemm core shared by [`dgemm`] and the column-sliced calls in
/// the split backward pass.
///
/// # Safety
/// Every `(i, k, j)` index reachable from the dims and strides must stay
/// inside the `a`, `b`, `c` allocations, and `c` must not alias `a` or `b`.
unsafe fn dgemm_raw(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    ap: *const f64,
    rsa: isize,
    csa: isize,
    bp: *const f64,
    rsb: isize,
    csb: isize,
    beta: f64,
    cp: *mut f64,
    rsc: isize,
    csc: isize,
) {
    if k <= 8 && rsa == 1 && rsc == 1 {
        // thin inner dimension over contiguous columns: the packed kernel's
        // overhead dominates, so accumulate the rank-k update directly
        for j in 0..n as isize {
            let ccol = std::slice::from_raw_parts_mut(cp.offset(j * csc), m);
            if beta == 0.0 {
                ccol.fill(0.0);
            } else if beta != 1.0 {
                for v in ccol.iter_mut() {
                    *v *= beta;
                }
            }
            for kk in 0..k as isize {
                let bv = alpha * *bp.offset(kk * rsb + j * csb);
                let acol = std::slice::from_raw_parts(ap.offset(kk * csa), m);
                for (cv, av) in ccol.iter_mut().zip(acol) {
                    *cv += bv * av;
                }
            }
        }
        return;
    }
    matrixmultiply::dgemm(m, k, n, alpha, ap, rsa, csa, bp, rsb, csb, beta, cp, rsc, csc);
}

/// Reallocate only when the shape actually changes.
pub(crate) fn ensure_shape(m: &mut DMatrix<f64>, rows: usize, cols: usize) {
    if m.nrows() != rows || m.ncols() != cols {
        *m = DMatrix::zeros(rows, cols);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    /// Per-layer weight matrices, `out × in`.
    pub weights: Vec<DMatrix<f64>>,
    /// Per-layer bias vectors.
    pub biases: Vec<DVector<f64>>,
}

/// Per-layer parameter gradients, shapes mirroring [`Mlp`].
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
}

/// Activations recorded during a batched forward pass, consumed by backward.
pub struct ForwardCache {
    /// `in × batch` input.
    pub input: DMatrix<f64>,
    /// Pre-activations per layer.
    pub pre: Vec<DMatrix<f64>>,
    /// Post-activations per layer; the last entry is the (linear) output.
    pub post: Vec<DMatrix<f64>>,
}

impl ForwardCache {
    /// Shape-less cache; filled (and reused) by [`Mlp::forward_into`].
    pub fn empty() -> Self {
        ForwardCache { input: DMatrix::zeros(0, 0), pre: Vec::new(), post: Vec::new() }
    }

    pub fn output(&self) -> &DMatrix<f64> {
        self.post.last().expect("cache from a network with at least one layer")
    }
}

/// Ping-pong delta buffers reused across backward passes.
pub struct DeltaScratch {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl Default for DeltaScratch {
    fn default() -> Self {
        DeltaScratch { a: DMatrix::zeros(0, 0), b: DMatrix::zeros(0, 0) }
    }
}

impl Mlp {
    /// Seeded uniform(−1/√fan_in, +1/√fan_in) initialization.
    pub fn new(sizes: &[usize], rng: &mut impl Rng) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            weights.push(DMatrix::from_fn(fan_out, fan_in, |_, _| rng.random_range(-bound..bound)));
            biases.push(DVector::from_fn(fan_out, |_, _| rng.random_range(-bound..bound)));
        }
        Mlp { sizes: sizes.to_vec(), weights, biases }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2);
        let weights = sizes.windows(2).map(|w| DMatrix::zeros(w[1], w[0])).collect();
        let biases = sizes.windows(2).map(|w| DVector::zeros(w[1])).collect();
        Mlp { sizes: sizes.to_vec(), weights, biases }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    fn check_input(&self, rows: usize) -> Result<()> {
        if rows != self.input_dim() {
            return Err(SctlError::Shape(format!(
                "mlp expects input dim {}, got {}",
                self.input_dim(),
                rows
            )));
        }
        Ok(())
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_input(input.nrows())?;
        let last = self.n_layers() - 1;
        let mut a = input.clone();
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = w * a + b;
            if i < last {
                z.apply(|v| {
                    if *v < 0.0 {
                        *v *= LEAKY_SLOPE;
                    }
                });
            }
            a = z;
        }
        Ok(a)
    }

    /// Batched forward pass; columns are samples.
    pub fn forward_batch(&self, input: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_input(input.nrows())?;
        let last = self.n_layers() - 1;
        let batch = input.ncols();
        let mut a = input.clone();
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = DMatrix::zeros(w.nrows(), batch);
            dgemm(&mut z, w, false, &a, false, 1.0, 0.0);
            add_bias(&mut z, b);
            if i < last {
                leaky(&mut z);
            }
            a = z;
        }
        Ok(a)
    }

    /// Batched forward pass retaining activations for [`Mlp::backward`].
    pub fn forward_cached(&self, input: &DMatrix<f64>) -> Result<ForwardCache> {
        let mut cache = ForwardCache::empty();
        self.forward_into(input, &mut cache)?;
        Ok(cache)
    }

    /// [`Mlp::forward_cached`] into a reusable cache: no allocations once the
    /// cache has seen the batch shape.
    pub fn forward_into(&self, input: &DMatrix<f64>, cache: &mut ForwardCache) -> Result<()> {
        self.check_input(input.nrows())?;
        let last = self.n_layers() - 1;
        let batch = input.ncols();
        ensure_shape(&mut cache.input, input.nrows(), batch);
        cache.input.copy_from(input);
        cache.pre.resize_with(self.n_layers(), || DMatrix::zeros(0, 0));
        cache.post.resize_with(self.n_layers(), || DMatrix::zeros(0, 0));
        for i in 0..self.n_layers() {
            let w = &self.weights[i];
            let (done, rest) = cache.post.split_at_mut(i);
            let a: &DMatrix<f64> = if i == 0 { &cache.input } else { &done[i - 1] };
            let z = &mut cache.pre[i];
            ensure_shape(z, w.nrows(), batch);
            dgemm(z, w, false, a, false, 1.0, 0.0);
            add_bias(z, &self.biases[i]);
            let p = &mut rest[0];
            ensure_shape(p, w.nrows(), batch);
            if i < last {
                for (pv, zv) in p.as_mut_slice().iter_mut().zip(z.as_slice()) {
                    *pv = if *zv < 0.0 { LEAKY_SLOPE * zv } else { *zv };
                }
            } else {
                p.copy_from(z);
            }
        }
        Ok(())
    }

    /// Reverse-mode gradients of the forward map.
    ///
    /// `upstream` is dLoss/dOutput, `out × batch`. Returns parameter gradients
    /// summed over the batch and the gradient with respect to the input.
    pub fn backward(&self, cache: &ForwardCache, upstream: &DMatrix<f64>) -> (MlpGrads, DMatrix<f64>) {
        let mut grads = MlpGrads::zeros_like(self);
        let input_grad = self.backward_into(cache, upstream, Some(&mut grads));
        (grads, input_grad)
    }

    /// Input gradient only; skips the weight-gradient gemms.
    pub fn backward_input_only(&self, cache: &ForwardCache, upstream: &DMatrix<f64>) -> DMatrix<f64> {
        self.backward_into(cache, upstream, None)
    }

    /// Reverse pass writing parameter gradients into a caller-owned buffer
    /// (overwritten, not accumulated); returns the input gradient.
    pub fn backward_into(
        &self,
        cache: &ForwardCache,
        upstream: &DMatrix<f64>,
        grads: Option<&mut MlpGrads>,
    ) -> DMatrix<f64> {
        let mut scratch = DeltaScratch::default();
        let mut out = DMatrix::zeros(0, 0);
        self.backward_scratch_impl(cache, upstream, grads, Some(&mut out), &mut scratch);
        out
    }

    /// Parameter gradients only: skips the first layer's input-gradient gemm
    /// and reuses `scratch` for the intermediate deltas.
    pub fn backward_params(
        &self,
        cache: &ForwardCache,
        upstream: &DMatrix<f64>,
        grads: &mut MlpGrads,
        scratch: &mut DeltaScratch,
    ) {
        self.backward_scratch_impl(cache, upstream, Some(grads), None, scratch);
    }

    /// Input gradient only, written into `out`; skips the weight-gradient
    /// gemms and reuses `scratch` for the intermediate deltas.
    pub fn backward_input(
        &self,
        cache: &ForwardCache,
        upstream: &DMatrix<f64>,
        out: &mut DMatrix<f64>,
        scratch: &mut DeltaScratch,
    ) {
        self.backward_scratch_impl(cache, upstream, None, Some(out), scratch);
    }

    /// One reverse pass over a cache whose columns concatenate two sub-batches:
    /// parameter gradients accumulate from the first `n_param` columns only,
    /// and the input gradient (written into `input_grad`) covers the remaining
    /// columns only. The backprop chain gemms and activation gates between the
    /// layers are shared by both halves, which is what makes this cheaper than
    /// [`Mlp::backward_params`] plus [`Mlp::backward_input`] on the two
    /// sub-batches separately.
    pub fn backward_split(
        &self,
        cache: &ForwardCache,
        upstream: &DMatrix<f64>,
        n_param: usize,
        grads: &mut MlpGrads,
        input_grad: &mut DMatrix<f64>,
        scratch: &mut DeltaScratch,
    ) {
        let n = self.n_layers();
        assert_eq!(upstream.nrows(), self.output_dim(), "upstream shape");
        assert_eq!(upstream.ncols(), cache.input.ncols(), "upstream batch");
        let batch = upstream.ncols();
        assert!(n_param <= batch, "parameter column count exceeds the batch");
        let n_input = batch - n_param;
        let (mut cur, mut next) = (&mut scratch.a, &mut scratch.b);
        ensure_shape(cur, upstream.nrows(), batch);
        cur.copy_from(upstream);
        for i in (0..n).rev() {
            let a_in = if i == 0 { &cache.input } else { &cache.post[i - 1] };
            let m = cur.nrows();
            // weight/bias grads restricted to the leading columns; those
            // columns are a contiguous prefix in column-major storage
            unsafe {
                dgemm_raw(
                    m,
                    n_param,
                    a_in.nrows(),
                    1.0,
                    cur.as_slice().as_ptr(),
                    1,
                    m as isize,
                    a_in.as_slice().as_ptr(),
                    a_in.nrows() as isize,
                    1,
                    0.0,
                    grads.weights[i].as_mut_slice().as_mut_ptr(),
                    1,
                    m as isize,
                );
            }
            bias_grad_cols(&mut grads.biases[i], cur, n_param);
            if i == 0 {
                // input gradient from the trailing columns only
                ensure_shape(input_grad, self.input_dim(), n_input);
                let w = &self.weights[0];
                unsafe {
                    dgemm_raw(
                        w.ncols(),
                        w.nrows(),
                        n_input,
                        1.0,
                        w.as_slice().as_ptr(),
                        w.nrows() as isize,
                        1,
                        cur.as_slice().as_ptr().add(n_param * m),
                        1,
                        m as isize,
                        0.0,
                        input_grad.as_mut_slice().as_mut_ptr(),
                        1,
                        w.ncols() as isize,
                    );
                }
                break;
            }
            let w = &self.weights[i];
            ensure_shape(next, w.ncols(), batch);
            dgemm(next, w, true, cur, false, 1.0, 0.0);
            let z = &cache.pre[i - 1];
            for (d, zv) in next.as_mut_slice().iter_mut().zip(z.as_slice()) {
                *d *= if *zv < 0.0 { LEAKY_SLOPE } else { 1.0 };
            }
            std::mem::swap(&mut cur, &mut next);
        }
    }

    fn backward_scratch_impl(
        &self,
        cache: &ForwardCache,
        upstream: &DMatrix<f64>,
        mut grads: Option<&mut MlpGrads>,
        input_grad: Option<&mut DMatrix<f64>>,
        scratch: &mut DeltaScratch,
    ) {
        let n = self.n_layers();
        assert_eq!(upstream.nrows(), self.output_dim(), "upstream shape");
        assert_eq!(upstream.ncols(), cache.input.ncols(), "upstream batch");
        let batch = upstream.ncols();
        let want_input = input_grad.is_some();
        let (mut cur, mut next) = (&mut scratch.a, &mut scratch.b);
        ensure_shape(cur, upstream.nrows(), batch);
        cur.copy_from(upstream);
        for i in (0..n).rev() {
            if let Some(g) = grads.as_mut() {
                let a_in = if i == 0 { &cache.input } else { &cache.post[i - 1] };
                dgemm(&mut g.weights[i], cur, false, a_in, true, 1.0, 0.0);
                bias_grad(&mut g.biases[i], cur);
            }
            if i == 0 && !want_input {
                break;
            }
            let w = &self.weights[i];
            ensure_shape(next, w.ncols(), batch);
            dgemm(next, w, true, cur, false, 1.0, 0.0);
            if i > 0 {
                // gate through the hidden activation; select form vectorizes
                let z = &cache.pre[i - 1];
                for (d, zv) in next.as_mut_slice().iter_mut().zip(z.as_slice()) {
                    *d *= if *zv < 0.0 { LEAKY_SLOPE } else { 1.0 };
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        if let Some(out) = input_grad {
            ensure_shape(out, self.input_dim(), batch);
            out.copy_from(cur);
        }
    }
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        MlpGrads {
            weights: net.weights.iter().map(|w| DMatrix::zeros(w.nrows(), w.ncols())).collect(),
            biases: net.biases.iter().map(|b| DVector::zeros(b.nrows())).collect(),
        }
    }

    pub fn add(&mut self, other: &MlpGrads) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            *w *= factor;
        }
        for b in &mut self.biases {
            *b *= factor;
        }
    }

    pub fn max_abs(&self) -> f64 {
        let w = self.weights.iter().map(|w| w.amax()).fold(0.0f64, f64::max);
        let b = self.biases.iter().map(|b| b.amax()).fold(0.0f64, f64::max);
        w.max(b)
    }
}

fn add_bias(z: &mut DMatrix<f64>, b: &DVector<f64>) {
    let m = b.nrows();
    let bs = b.as_slice();
    for col in z.as_mut_slice().chunks_exact_mut(m) {
        for (zi, bi) in col.iter_mut().zip(bs) {
            *zi += bi;
        }
    }
}

/// Row sums of `delta`, walked column-wise so the accesses stay contiguous.
fn bias_grad(bg: &mut DVector<f64>, delta: &DMatrix<f64>) {
    bias_grad_cols(bg, delta, delta.ncols());
}

/// Row sums over the leading `ncols` columns of `delta`.
fn bias_grad_cols(bg: &mut DVector<f64>, delta: &DMatrix<f64>, ncols: usize) {
    bg.fill(0.0);
    let m = bg.nrows();
    let acc = bg.as_mut_slice();
    for col in delta.as_slice().chunks_exact(m).take(ncols) {
        for (s, d) in acc.iter_mut().zip(col) {
            *s += d;
        }
    }
}

fn leaky(z: &mut DMatrix<f64>) {
    for v in z.as_mut_slice().iter_mut() {
        *v *= if *v < 0.0 { LEAKY_SLOPE } else { 1.0 };
    }
}
