//! Two-layer perceptron with a flat parameter vector.

use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Scalar type the network can run in; f32 for training, f64 for gradient checks.
pub trait Real: Float + Default + Send + Sync + std::fmt::Debug + 'static {
    /// `c = alpha * a * b + beta * c` with explicit row/column strides.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        a_strides: (isize, isize),
        b: &[Self],
        b_strides: (isize, isize),
        beta: Self,
        c: &mut [Self],
        c_strides: (isize, isize),
    );

    fn from_f32(x: f32) -> Self;
}

fn check_extent(len: usize, rows: usize, cols: usize, (rs, cs): (isize, isize)) {
    if rows == 0 || cols == 0 {
        return;
    }
    let last = (rows - 1) as isize * rs + (cols - 1) as isize * cs;
    assert!(rs >= 0 && cs >= 0 && (last as usize) < len, "gemm operand out of bounds");
}

macro_rules! impl_real {
    ($t:ty, $gemm:path) => {
        impl Real for $t {
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                a_strides: (isize, isize),
                b: &[Self],
                b_strides: (isize, isize),
                beta: Self,
                c: &mut [Self],
                c_strides: (isize, isize),
            ) {
                check_extent(a.len(), m, k, a_strides);
                check_extent(b.len(), k, n, b_strides);
                check_extent(c.len(), m, n, c_strides);
                // SAFETY: every operand's extent was bounds-checked above and
                // `c` is a unique borrow, so it cannot alias `a` or `b`.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        a_strides.0,
                        a_strides.1,
                        b.as_ptr(),
                        b_strides.0,
                        b_strides.1,
                        beta,
                        c.as_mut_ptr(),
                        c_strides.0,
                        c_strides.1,
                    )
                }
            }

            fn from_f32(x: f32) -> Self {
                x as $t
            }
        }
    };
}

impl_real!(f32, matrixmultiply::sgemm);
impl_real!(f64, matrixmultiply::dgemm);

pub const DEFAULT_HIDDEN: usize = 64;

/// `sigmoid(w2 . relu(w1 x + b1) + b2)`.
///
/// Parameters live in one vector in declaration order: `w1` (hidden x input,
/// row-major), `b1`, `w2`, `b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub input_dim: usize,
    pub hidden: usize,
    pub params: Vec<T>,
}

/// The classifier used throughout the pipeline.
pub type MLPModel = Mlp<f32>;

pub(crate) fn n_params(input_dim: usize, hidden: usize) -> usize {
    hidden * input_dim + 2 * hidden + 1
}

fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

impl<T: Real> Mlp<T> {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self {
            input_dim,
            hidden,
            params: vec![T::zero(); n_params(input_dim, hidden)],
        }
    }

    /// He-normal first layer, scaled normal output layer, zero biases.
    pub fn init<R: Rng>(input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let mut m = Self::zeros(input_dim, hidden);
        let n1 = Normal::new(0.0, (2.0 / input_dim as f64).sqrt()).unwrap();
        let n2 = Normal::new(0.0, (1.0 / hidden as f64).sqrt()).unwrap();
        for w in m.w1_mut() {
            *w = T::from(n1.sample(rng)).unwrap();
        }
        for w in m.w2_mut() {
            *w = T::from(n2.sample(rng)).unwrap();
        }
        m
    }

    fn split(&self) -> (usize, usize, usize) {
        let w1 = self.hidden * self.input_dim;
        (w1, w1 + self.hidden, w1 + 2 * self.hidden)
    }

    pub fn w1(&self) -> &[T] {
        &self.params[..self.split().0]
    }

    pub fn w1_mut(&mut self) -> &mut [T] {
        let (a, _, _) = self.split();
        &mut self.params[..a]
    }

    pub fn b1(&self) -> &[T] {
        let (a, b, _) = self.split();
        &self.params[a..b]
    }

    pub fn b1_mut(&mut self) -> &mut [T] {
        let (a, b, _) = self.split();
        &mut self.params[a..b]
    }

    pub fn w2(&self) -> &[T] {
        let (_, b, c) = self.split();
        &self.params[b..c]
    }

    pub fn w2_mut(&mut self) -> &mut [T] {
        let (_, b, c) = self.split();
        &mut self.params[b..c]
    }

    pub fn b2(&self) -> T {
        self.params[self.params.len() - 1]
    }

    pub fn set_b2(&mut self, v: T) {
        let n = self.params.len();
        self.params[n - 1] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// Probability of class 1 for one flattened input.
    pub fn forward(&self, x: &[T]) -> Result<T> {
        if x.len() != self.input_dim {
            return Err(Error::DimMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        let mut ws = Workspace::default();
        let mut out = [T::zero()];
        self.forward_batch(x, 1, &mut ws, &mut out);
        Ok(out[0])
    }

    /// Probabilities for `n` row-major inputs.
    pub(crate) fn forward_batch(&self, x: &[T], n: usize, ws: &mut Workspace<T>, out: &mut [T]) {
        self.hidden_layer(x, n, ws);
        for (o, row) in out[..n].iter_mut().zip(ws.h.chunks_exact(self.hidden)) {
            *o = sigmoid(self.output_logit(row));
        }
    }

    fn hidden_layer(&self, x: &[T], n: usize, ws: &mut Workspace<T>) {
        let (d, h) = (self.input_dim, self.hidden);
        ws.h.clear();
        for _ in 0..n {
            ws.h.extend_from_slice(self.b1());
        }
        // h = x * w1^T + b1
        T::gemm(
            n,
            d,
            h,
            T::one(),
            &x[..n * d],
            (d as isize, 1),
            self.w1(),
            (1, d as isize),
            T::one(),
            &mut ws.h,
            (h as isize, 1),
        );
        for v in &mut ws.h {
            *v = v.max(T::zero());
        }
    }

    fn output_logit(&self, h_row: &[T]) -> T {
        h_row
            .iter()
            .zip(self.w2())
            .fold(self.b2(), |acc, (&a, &w)| acc + a * w)
    }

    /// Mean binary cross-entropy over the batch; gradient written to `grad`.
    pub(crate) fn loss_and_grad(&self, x: &[T], y: &[T], ws: &mut Workspace<T>, grad: &mut [T]) -> T {
        let n = y.len();
        let (d, h) = (self.input_dim, self.hidden);
        self.hidden_layer(x, n, ws);
        let inv_n = T::one() / T::from(n).unwrap();
        let mut loss = T::zero();
        ws.dz.clear();
        for (row, &yi) in ws.h.chunks_exact(h).zip(y) {
            let z = self.output_logit(row);
            // log(1 + e^-|z|) + max(z, 0) - y z, stable for large |z|
            loss = loss + (T::one() + (-z.abs()).exp()).ln() + z.max(T::zero()) - yi * z;
            ws.dz.push((sigmoid(z) - yi) * inv_n);
        }
        grad.iter_mut().for_each(|g| *g = T::zero());
        let (a, b, c) = self.split();
        let (g_w1, rest) = grad.split_at_mut(a);
        let (g_b1, rest) = rest.split_at_mut(b - a);
        let (g_w2, g_b2) = rest.split_at_mut(c - b);
        ws.dh.clear();
        ws.dh.resize(n * h, T::zero());
        for ((row, dh_row), &dz) in ws.h.chunks_exact(h).zip(ws.dh.chunks_exact_mut(h)).zip(&ws.dz) {
            g_b2[0] = g_b2[0] + dz;
            for j in 0..h {
                g_w2[j] = g_w2[j] + row[j] * dz;
                if row[j] > T::zero() {
                    let v = dz * self.w2()[j];
                    dh_row[j] = v;
                    g_b1[j] = g_b1[j] + v;
                }
            }
        }
        // g_w1 = dh^T * x
        T::gemm(
            h,
            n,
            d,
            T::one(),
            &ws.dh,
            (1, h as isize),
            &x[..n * d],
            (d as isize, 1),
            T::zero(),
            g_w1,
            (d as isize, 1),
        );
        loss * inv_n
    }
}

/// Scratch buffers reused across batches.
#[derive(Debug, Default)]
pub(crate) struct Workspace<T> {
    h: Vec<T>,
    dz: Vec<T>,
    dh: Vec<T>,
}
