//! Discrete fractional differintegration on uniform grids.
//!
//! Everything here is a Grünwald–Letnikov convolution
//!
//! ```text
//! g[j] = h^{-q} * sum_{k=0}^{min(j, N-1)} w_k * (f[j-k] - c)
//! ```
//!
//! with binomial weights `w_k` and a short memory of `N` samples. The
//! Caputo path sets `c = f[0]`, which makes the discrete operator annihilate
//! constants for `0 < q < 1`. The plain path (`c = 0`) with a negative
//! order is the fractional integral.

use std::collections::VecDeque;

use thiserror::Error;

/// Default short-memory length, in samples.
pub const DEFAULT_MEMORY_LEN: usize = 4000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FracError {
    #[error("differintegral order {0} is outside (-2, 2)")]
    OrderOutOfRange(f64),
    #[error("Caputo path needs 0 < q < 1, got {0}")]
    NotCaputoOrder(f64),
    #[error("fractional integral order must be positive, got {0}")]
    NonPositiveIntegralOrder(f64),
    #[error("grid step must be finite and positive, got {0}")]
    BadStep(f64),
    #[error("memory length must be at least one sample")]
    ZeroMemory,
    #[error("signal is empty")]
    EmptySignal,
    #[error("sample time {got} does not follow {last} on a grid of step {h}")]
    NonMonotoneTime { last: f64, got: f64, h: f64 },
}

/// Differintegral order: positive values differentiate, negative integrate.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FracOrder(f64);

impl FracOrder {
    pub fn new(q: f64) -> Result<Self, FracError> {
        if !q.is_finite() || q.abs() >= 2.0 {
            return Err(FracError::OrderOutOfRange(q));
        }
        Ok(Self(q))
    }

    /// An order usable on the Caputo path, i.e. `0 < q < 1`.
    pub fn caputo(q: f64) -> Result<Self, FracError> {
        let order = Self::new(q)?;
        if !(q > 0.0 && q < 1.0) {
            return Err(FracError::NotCaputoOrder(q));
        }
        Ok(order)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_caputo(self) -> bool {
        self.0 > 0.0 && self.0 < 1.0
    }
}

/// Grünwald–Letnikov weights `w_0..w_{n-1}` from the recursion
/// `w_k = w_{k-1} * (1 - (q + 1) / k)`.
pub fn gl_weights(order: FracOrder, n: usize) -> Vec<f64> {
    let q = order.value();
    let mut w = Vec::with_capacity(n);
    if n == 0 {
        return w;
    }
    w.push(1.0);
    for k in 1..n {
        let prev = w[k - 1];
        w.push(prev * (1.0 - (q + 1.0) / k as f64));
    }
    w
}

/// Weights bound to a grid step, shared by the batch and streaming paths.
#[derive(Debug, Clone, PartialEq)]
pub struct GlKernel {
    order: FracOrder,
    h: f64,
    weights: Vec<f64>,
    scale: f64,
}

impl GlKernel {
    pub fn new(order: FracOrder, h: f64, memory_len: usize) -> Result<Self, FracError> {
        if !(h.is_finite() && h > 0.0) {
            return Err(FracError::BadStep(h));
        }
        if memory_len == 0 {
            return Err(FracError::ZeroMemory);
        }
        Ok(Self {
            order,
            h,
            weights: gl_weights(order, memory_len),
            scale: h.powf(-order.value()),
        })
    }

    pub fn order(&self) -> FracOrder {
        self.order
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn memory_len(&self) -> usize {
        self.weights.len()
    }

    /// `h^{-q}`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Convolution at the newest sample; `newest_first[0]` is `f[j]`.
    #[inline]
    fn apply<'a, I>(&self, newest_first: I, offset: f64) -> f64
    where
        I: IntoIterator<Item = &'a f64>,
    {
        let mut acc = 0.0;
        for (w, x) in self.weights.iter().zip(newest_first) {
            acc += w * (x - offset);
        }
        acc * self.scale
    }
}

/// A uniformly sampled signal of `dim`-vectors, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    t0: f64,
    h: f64,
    dim: usize,
    data: Vec<f64>,
}

impl SampledSignal {
    pub fn scalar(t0: f64, h: f64, values: Vec<f64>) -> Result<Self, FracError> {
        Self::from_flat(t0, h, 1, values)
    }

    pub fn from_flat(t0: f64, h: f64, dim: usize, data: Vec<f64>) -> Result<Self, FracError> {
        if !(h.is_finite() && h > 0.0) {
            return Err(FracError::BadStep(h));
        }
        if dim == 0 || data.is_empty() {
            return Err(FracError::EmptySignal);
        }
        assert_eq!(data.len() % dim, 0, "flat data must hold whole rows");
        Ok(Self { t0, h, dim, data })
    }

    pub fn from_rows(t0: f64, h: f64, rows: &[Vec<f64>]) -> Result<Self, FracError> {
        let dim = rows.first().map(Vec::len).ok_or(FracError::EmptySignal)?;
        let mut data = Vec::with_capacity(dim * rows.len());
        for r in rows {
            assert_eq!(r.len(), dim, "ragged rows");
            data.extend_from_slice(r);
        }
        Self::from_flat(t0, h, dim, data)
    }

    /// Scalar signal `f(t0 + j*h)` for `j in 0..n`.
    pub fn from_fn(t0: f64, h: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self, FracError> {
        Self::scalar(t0, h, (0..n).map(|j| f(t0 + j as f64 * h)).collect())
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn start(&self) -> f64 {
        self.t0
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.h
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn component(&self, i: usize) -> Vec<f64> {
        self.data.iter().skip(i).step_by(self.dim).copied().collect()
    }

    /// The single component of a scalar signal.
    pub fn values(&self) -> &[f64] {
        assert_eq!(self.dim, 1, "values() is only defined for scalar signals");
        &self.data
    }

    fn map_components(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let n = self.len();
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.dim {
            let out = f(&self.component(i));
            for (j, v) in out.into_iter().enumerate().take(n) {
                data[j * self.dim + i] = v;
            }
        }
        Self { data, ..*self }
    }
}

fn convolve(kernel: &GlKernel, x: &[f64], subtract_initial: bool) -> Vec<f64> {
    let offset = if subtract_initial { x[0] } else { 0.0 };
    let m = kernel.memory_len();
    (0..x.len())
        .map(|j| {
            let lo = (j + 1).saturating_sub(m);
            kernel.apply(x[lo..=j].iter().rev(), offset)
        })
        .collect()
}

/// Caputo derivative of order `q in (0, 1)` realized as a GL convolution of
/// `f - f[0]`.
pub fn caputo_gl(
    f: &SampledSignal,
    q: FracOrder,
    memory_len: usize,
) -> Result<SampledSignal, FracError> {
    if !q.is_caputo() {
        return Err(FracError::NotCaputoOrder(q.value()));
    }
    if f.is_empty() {
        return Err(FracError::EmptySignal);
    }
    let kernel = GlKernel::new(q, f.h, memory_len)?;
    Ok(f.map_components(|x| convolve(&kernel, x, true)))
}

/// Fractional integral of order `q > 0` (GL with order `-q`, no initial-value
/// subtraction).
pub fn frac_integral(
    f: &SampledSignal,
    q: f64,
    memory_len: usize,
) -> Result<SampledSignal, FracError> {
    if !(q > 0.0) {
        return Err(FracError::NonPositiveIntegralOrder(q));
    }
    let order = FracOrder::new(-q)?;
    if f.is_empty() {
        return Err(FracError::EmptySignal);
    }
    let kernel = GlKernel::new(order, f.h, memory_len)?;
    Ok(f.map_components(|x| convolve(&kernel, x, false)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamMode {
    /// Subtract the first sample (Caputo path, `0 < q < 1`).
    Caputo,
    /// Plain GL convolution; with a negative order this is the integral.
    Plain,
}

/// Online GL evaluator: one grid sample in, one operator value out.
///
/// Produces bit-identical values to [`caputo_gl`] / [`frac_integral`] for the
/// same kernel since both paths accumulate in the same order.
#[derive(Debug, Clone)]
pub struct GlStream {
    kernel: GlKernel,
    mode: StreamMode,
    history: VecDeque<f64>,
    first: Option<f64>,
    last_t: Option<f64>,
}

impl GlStream {
    pub fn new(kernel: GlKernel, mode: StreamMode) -> Result<Self, FracError> {
        if mode == StreamMode::Caputo && !kernel.order().is_caputo() {
            return Err(FracError::NotCaputoOrder(kernel.order().value()));
        }
        let cap = kernel.memory_len();
        Ok(Self {
            kernel,
            mode,
            history: VecDeque::with_capacity(cap),
            first: None,
            last_t: None,
        })
    }

    pub fn caputo(q: f64, h: f64, memory_len: usize) -> Result<Self, FracError> {
        Self::new(GlKernel::new(FracOrder::caputo(q)?, h, memory_len)?, StreamMode::Caputo)
    }

    pub fn integral(q: f64, h: f64, memory_len: usize) -> Result<Self, FracError> {
        if !(q > 0.0) {
            return Err(FracError::NonPositiveIntegralOrder(q));
        }
        Self::new(GlKernel::new(FracOrder::new(-q)?, h, memory_len)?, StreamMode::Plain)
    }

    pub fn kernel(&self) -> &GlKernel {
        &self.kernel
    }

    pub fn samples_seen(&self) -> bool {
        self.first.is_some()
    }

    /// Feed the sample at grid time `t` and return the operator value there.
    ///
    /// Consecutive calls must advance by exactly one grid step (within a
    /// relative tolerance of 1e-6 of the step).
    pub fn push(&mut self, t: f64, x: f64) -> Result<f64, FracError> {
        let h = self.kernel.step();
        if let Some(last) = self.last_t {
            if !t.is_finite() || ((t - last) - h).abs() > 1e-6 * h {
                return Err(FracError::NonMonotoneTime { last, got: t, h });
            }
        }
        self.last_t = Some(t);
        Ok(self.push_unchecked(x))
    }

    /// Feed the next grid sample without a time check.
    #[inline]
    pub fn push_unchecked(&mut self, x: f64) -> f64 {
        let first = *self.first.get_or_insert(x);
        if self.history.len() == self.kernel.memory_len() {
            self.history.pop_back();
        }
        self.history.push_front(x);
        let offset = match self.mode {
            StreamMode::Caputo => first,
            StreamMode::Plain => 0.0,
        };
        let (a, b) = self.history.as_slices();
        self.kernel.apply(a.iter().chain(b.iter()), offset)
    }
}
