//! Windowed periodograms and depth-segmented Welch averaging.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use super::fft::RealFft;
use crate::error::{Error, Result};
use crate::rf::{PatchGridSpec, RfFrame};

/// FFT length shared by every calibration spectrum.
pub const CALIBRATION_FFT_SIZE: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Hann,
    Rect,
}

impl Window {
    /// Symmetric window coefficients of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rect => vec![1.0; n],
            Window::Hann if n == 1 => vec![1.0],
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
                .collect(),
        }
    }
}

/// Reusable periodogram state for a fixed segment length and FFT size.
pub struct Periodogram {
    fft: RealFft,
    window: Vec<f64>,
    scale: f64,
    windowed: Vec<f64>,
    bins: Vec<Complex64>,
}

impl Periodogram {
    pub fn new(segment_len: usize, fft_size: usize, window: Window) -> Result<Self> {
        if segment_len == 0 {
            return Err(Error::EmptyInput);
        }
        if segment_len > fft_size {
            return Err(Error::LengthMismatch {
                expected: fft_size,
                got: segment_len,
            });
        }
        let w = window.coefficients(segment_len);
        let energy: f64 = w.iter().map(|c| c * c).sum();
        let fft = RealFft::new(fft_size);
        let n_bins = fft.n_bins();
        Ok(Self {
            fft,
            // power normalization so that white noise of variance v sums to v * segment_len
            scale: segment_len as f64 / (fft_size as f64 * energy),
            window: w,
            windowed: vec![0.0; segment_len],
            bins: vec![Complex64::new(0.0, 0.0); n_bins],
        })
    }

    pub fn n_bins(&self) -> usize {
        self.bins.len()
    }

    /// Adds the one-sided power spectrum of `segment` into `acc`.
    pub fn accumulate<T: Copy + Into<f64>>(&mut self, segment: &[T], acc: &mut [f64]) -> Result<()> {
        if segment.len() != self.window.len() {
            return Err(Error::LengthMismatch {
                expected: self.window.len(),
                got: segment.len(),
            });
        }
        for ((d, &x), &w) in self.windowed.iter_mut().zip(segment).zip(&self.window) {
            *d = x.into() * w;
        }
        self.fft.forward_into(&self.windowed, &mut self.bins)?;
        let n = self.fft.len();
        let last = self.bins.len() - 1;
        for (k, (a, b)) in acc.iter_mut().zip(&self.bins).enumerate() {
            let edge = k == 0 || (k == last && n.is_multiple_of(2));
            let fold = if edge { 1.0 } else { 2.0 };
            *a += fold * self.scale * b.norm_sqr();
        }
        Ok(())
    }
}

/// One-sided power spectrum of a segment zero-padded to `fft_size`.
///
/// With a rectangular window the bins sum to the segment's energy
/// (mean square times length); other windows are rescaled to keep that
/// relation in expectation for white input.
pub fn periodogram(segment: &[f64], fft_size: usize, window: Window) -> Result<Vec<f64>> {
    let mut p = Periodogram::new(segment.len(), fft_size, window)?;
    let mut out = vec![0.0; p.n_bins()];
    p.accumulate(segment, &mut out)?;
    Ok(out)
}

/// Per-depth-segment averaged power spectra.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthSegmentedPsd {
    /// `[segment][bin]` power.
    pub psd: Vec<Vec<f64>>,
    pub fft_size: usize,
    pub sample_rate_hz: f64,
    pub segment_starts: Vec<usize>,
    /// Periodograms averaged per segment.
    pub n_averaged: usize,
}

impl DepthSegmentedPsd {
    pub fn n_segments(&self) -> usize {
        self.psd.len()
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn bin_frequency(&self, k: usize) -> f64 {
        k as f64 * self.sample_rate_hz / self.fft_size as f64
    }

    /// Same FFT grid, rate and segment layout.
    pub fn same_grid(&self, other: &DepthSegmentedPsd) -> bool {
        self.fft_size == other.fft_size
            && self.sample_rate_hz == other.sample_rate_hz
            && self.segment_starts == other.segment_starts
            && self.psd.len() == other.psd.len()
    }
}

/// Streaming Welch accumulator over frames.
///
/// Sums are compensated (Neumaier) so the result does not depend on the order
/// frames arrive in beyond rounding of the final division.
pub struct WelchAccumulator {
    grid: PatchGridSpec,
    fft_size: usize,
    shape: Option<(usize, usize, f64)>,
    sum: Vec<Vec<f64>>,
    comp: Vec<Vec<f64>>,
    n_frames: usize,
    n_lines: usize,
}

impl WelchAccumulator {
    pub fn new(grid: PatchGridSpec, fft_size: usize) -> Result<Self> {
        if grid.axial_patch > fft_size {
            return Err(Error::LengthMismatch {
                expected: fft_size,
                got: grid.axial_patch,
            });
        }
        let n_bins = fft_size / 2 + 1;
        Ok(Self {
            grid,
            fft_size,
            shape: None,
            sum: vec![vec![0.0; n_bins]; grid.n_axial],
            comp: vec![vec![0.0; n_bins]; grid.n_axial],
            n_frames: 0,
            n_lines: 0,
        })
    }

    fn check_frame(&mut self, frame: &RfFrame) -> Result<()> {
        self.grid.check_fits(frame.axial_len(), frame.lateral_len())?;
        let shape = (frame.axial_len(), frame.lateral_len(), frame.sample_rate_hz);
        match self.shape {
            None => self.shape = Some(shape),
            Some(s) if s != shape => {
                return Err(Error::IncompatibleDatasets(format!(
                    "frame {}x{} at {} Hz does not match {}x{} at {} Hz",
                    shape.0, shape.1, shape.2, s.0, s.1, s.2
                )))
            }
            Some(_) => {}
        }
        Ok(())
    }

    /// Per-segment periodogram sums of one frame (uncompensated, in line order).
    fn frame_sums(&self, frame: &RfFrame) -> Result<Vec<Vec<f64>>> {
        let mut pg = Periodogram::new(self.grid.axial_patch, self.fft_size, Window::Hann)?;
        let mut sums = vec![vec![0.0; pg.n_bins()]; self.grid.n_axial];
        for line in frame.lines() {
            for (i, acc) in sums.iter_mut().enumerate() {
                let a0 = self.grid.segment_start(i);
                pg.accumulate(&line[a0..a0 + self.grid.axial_patch], acc)?;
            }
        }
        Ok(sums)
    }

    fn merge(&mut self, sums: Vec<Vec<f64>>, lines: usize) {
        for ((s, c), add) in self.sum.iter_mut().zip(&mut self.comp).zip(sums) {
            for ((sv, cv), v) in s.iter_mut().zip(c.iter_mut()).zip(add) {
                let t = *sv + v;
                if sv.abs() >= v.abs() {
                    *cv += (*sv - t) + v;
                } else {
                    *cv += (v - t) + *sv;
                }
                *sv = t;
            }
        }
        self.n_frames += 1;
        self.n_lines += lines;
    }

    pub fn add_frame(&mut self, frame: &RfFrame) -> Result<()> {
        self.check_frame(frame)?;
        let sums = self.frame_sums(frame)?;
        self.merge(sums, frame.lateral_len());
        Ok(())
    }

    /// Adds a batch of frames, computing their spectra in parallel.
    pub fn add_frames(&mut self, frames: &[RfFrame]) -> Result<()> {
        for f in frames {
            self.check_frame(f)?;
        }
        let sums: Vec<Vec<Vec<f64>>> = frames
            .par_iter()
            .map(|f| self.frame_sums(f))
            .collect::<Result<_>>()?;
        for (s, f) in sums.into_iter().zip(frames) {
            self.merge(s, f.lateral_len());
        }
        Ok(())
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn finish(self) -> Result<DepthSegmentedPsd> {
        let (_, _, rate) = self.shape.ok_or(Error::EmptyInput)?;
        let n = self.n_lines as f64;
        let psd = self
            .sum
            .iter()
            .zip(&self.comp)
            .map(|(s, c)| s.iter().zip(c).map(|(a, b)| ((a + b) / n).max(0.0)).collect())
            .collect();
        Ok(DepthSegmentedPsd {
            psd,
            fft_size: self.fft_size,
            sample_rate_hz: rate,
            segment_starts: self.grid.segment_starts(),
            n_averaged: self.n_lines,
        })
    }
}

/// Hann-windowed Welch spectra over the patch grid's axial windows, averaged
/// across every lateral line of every frame.
pub fn welch_psd(frames: &[RfFrame], grid: &PatchGridSpec, fft_size: usize) -> Result<DepthSegmentedPsd> {
    if frames.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut acc = WelchAccumulator::new(*grid, fft_size)?;
    acc.add_frames(frames)?;
    acc.finish()
}
