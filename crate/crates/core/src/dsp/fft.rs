use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Forward/inverse FFT pair for real signals of one length.
///
/// The forward transform is unnormalized and returns the `n/2 + 1`
/// non-negative-frequency bins; the inverse divides by `n`.
pub struct RealFft {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl RealFft {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "FFT length must be positive");
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            n,
            forward,
            inverse,
            buf: vec![Complex64::new(0.0, 0.0); n],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn n_bins(&self) -> usize {
        self.n / 2 + 1
    }

    /// Transforms `input` (zero-padded to `n`) into `out[..n/2+1]`.
    pub fn forward_into(&mut self, input: &[f64], out: &mut [Complex64]) -> Result<()> {
        if input.len() > self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: input.len(),
            });
        }
        if out.len() != self.n_bins() {
            return Err(Error::LengthMismatch {
                expected: self.n_bins(),
                got: out.len(),
            });
        }
        for (b, &x) in self.buf.iter_mut().zip(input) {
            *b = Complex64::new(x, 0.0);
        }
        for b in &mut self.buf[input.len()..] {
            *b = Complex64::new(0.0, 0.0);
        }
        self.forward
            .process_with_scratch(&mut self.buf, &mut self.scratch);
        out.copy_from_slice(&self.buf[..self.n_bins()]);
        Ok(())
    }

    /// Rebuilds a length-`n` real signal from its one-sided bins.
    pub fn inverse_into(&mut self, bins: &[Complex64], out: &mut [f64]) -> Result<()> {
        let nb = self.n_bins();
        if bins.len() != nb {
            return Err(Error::LengthMismatch {
                expected: nb,
                got: bins.len(),
            });
        }
        if out.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: out.len(),
            });
        }
        self.buf[..nb].copy_from_slice(bins);
        // DC and Nyquist of a real signal carry no imaginary part
        self.buf[0].im = 0.0;
        if self.n.is_multiple_of(2) {
            self.buf[nb - 1].im = 0.0;
        }
        for k in nb..self.n {
            self.buf[k] = self.buf[self.n - k].conj();
        }
        self.inverse
            .process_with_scratch(&mut self.buf, &mut self.scratch);
        let scale = 1.0 / self.n as f64;
        for (o, b) in out.iter_mut().zip(&self.buf) {
            *o = b.re * scale;
        }
        Ok(())
    }
}

/// One-sided spectrum of a real signal (`len/2 + 1` bins, unnormalized).
pub fn real_fft(signal: &[f64]) -> Result<Vec<Complex64>> {
    if signal.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut fft = RealFft::new(signal.len());
    let mut out = vec![Complex64::new(0.0, 0.0); fft.n_bins()];
    fft.forward_into(signal, &mut out)?;
    Ok(out)
}

/// Inverse of [`real_fft`] for a signal of length `n`.
pub fn inverse_real_fft(bins: &[Complex64], n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let mut fft = RealFft::new(n);
    let mut out = vec![0.0; n];
    fft.inverse_into(bins, &mut out)?;
    Ok(out)
}
