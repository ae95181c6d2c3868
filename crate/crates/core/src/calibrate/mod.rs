//! Machine-to-machine transfer functions.
//!
//! Both scanners image the same calibration phantom, so the ratio of their
//! depth-segmented spectra isolates the ratio of the system responses. The
//! amplitude ratio is then regularized with a Wiener-style gain and applied
//! to patches as a zero-phase filter on FFT bins:
//!
//! * forward: training-machine data is mapped into the test machine's domain,
//! * inverse: test-machine data is mapped back into the training domain.
//!
//! With `w(g) = g / (1 + g^2 / snr)` (equivalently `g^-1 / (g^-2 + snr^-1)`),
//! the forward gain is `w(|G|)` and the inverse gain is `w(1 / |G|)`. Both tend
//! to `|G|` and `1/|G|` as `snr` grows, and are bounded by `sqrt(snr) / 2`
//! where the ratio is unreliable.

mod io;

pub use io::{load_tf, save_tf, TF_MAGIC, TF_VERSION};

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::dsp::{welch_psd, DepthSegmentedPsd, RealFft};
use crate::error::{Error, Result};
use crate::rf::{Patch, PatchGridSpec, RfFrame};

/// Which way a transfer function maps data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Training machine to test machine.
    Forward,
    /// Test machine to training machine.
    Inverse,
}

impl Direction {
    pub fn code(self) -> u8 {
        match self {
            Direction::Forward => 0,
            Direction::Inverse => 1,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Direction::Forward),
            1 => Some(Direction::Inverse),
            _ => None,
        }
    }
}

/// Regularization settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WienerConfig {
    /// Linear power signal-to-noise ratio.
    pub snr: f64,
    /// Denominator floor relative to the segment's strongest training bin.
    pub ratio_floor: f64,
}

impl Default for WienerConfig {
    fn default() -> Self {
        Self {
            snr: 100.0,
            ratio_floor: 1e-12,
        }
    }
}

impl WienerConfig {
    pub fn with_snr(snr: f64) -> Self {
        Self {
            snr,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.snr.is_finite() && self.snr > 0.0) {
            return Err(Error::BadConfig(format!("snr must be positive, got {}", self.snr)));
        }
        if !(self.ratio_floor.is_finite() && self.ratio_floor > 0.0) {
            return Err(Error::BadConfig(format!(
                "ratio_floor must be positive, got {}",
                self.ratio_floor
            )));
        }
        Ok(())
    }
}

/// Per-depth-segment spectral gains.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferFunction {
    /// `[segment][bin]` non-negative amplitude gains.
    pub gains: Vec<Vec<f32>>,
    pub fft_size: usize,
    pub sample_rate_hz: f64,
    pub direction: Direction,
    pub snr: f64,
    pub n_calib_frames: u32,
}

impl TransferFunction {
    pub fn n_segments(&self) -> usize {
        self.gains.len()
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn bin_frequency(&self, k: usize) -> f64 {
        k as f64 * self.sample_rate_hz / self.fft_size as f64
    }

    /// A transfer function with every gain equal to `gain`.
    pub fn uniform(
        n_segments: usize,
        fft_size: usize,
        sample_rate_hz: f64,
        gain: f32,
        direction: Direction,
    ) -> Self {
        Self {
            gains: vec![vec![gain; fft_size / 2 + 1]; n_segments],
            fft_size,
            sample_rate_hz,
            direction,
            snr: f64::INFINITY,
            n_calib_frames: 0,
        }
    }

    /// Ratio, regularization and packaging from already-averaged spectra.
    pub fn from_spectra(
        psd_train: &DepthSegmentedPsd,
        psd_test: &DepthSegmentedPsd,
        cfg: &WienerConfig,
        direction: Direction,
        n_calib_frames: u32,
    ) -> Result<Self> {
        cfg.validate()?;
        let ratio = amplitude_ratio(psd_test, psd_train, cfg.ratio_floor)?;
        let gains = wiener_regularize(&ratio, cfg, direction)?
            .into_iter()
            .map(|row| row.into_iter().map(|g| g as f32).collect())
            .collect();
        Ok(Self {
            gains,
            fft_size: psd_train.fft_size,
            sample_rate_hz: psd_train.sample_rate_hz,
            direction,
            snr: cfg.snr,
            n_calib_frames,
        })
    }

    fn validate(&self) -> Result<()> {
        let nb = self.n_bins();
        if self.gains.is_empty() {
            return Err(Error::MalformedHeader("transfer function has no segments".into()));
        }
        if self.gains.iter().any(|r| r.len() != nb) {
            return Err(Error::LengthMismatch {
                expected: nb,
                got: self.gains.iter().map(Vec::len).find(|&l| l != nb).unwrap_or(0),
            });
        }
        if self.gains.iter().flatten().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(Error::NonFiniteInput);
        }
        Ok(())
    }
}

/// `sqrt(psd_test / max(psd_train, floor * max(psd_train)))` per segment and bin.
///
/// Segments whose training spectrum is identically zero carry no information
/// and get zero gain.
pub fn amplitude_ratio(
    psd_test: &DepthSegmentedPsd,
    psd_train: &DepthSegmentedPsd,
    floor: f64,
) -> Result<Vec<Vec<f64>>> {
    if !psd_test.same_grid(psd_train) {
        return Err(Error::GridMismatch(format!(
            "test spectra {} segments / fft {} at {} Hz vs training {} / {} at {} Hz",
            psd_test.n_segments(),
            psd_test.fft_size,
            psd_test.sample_rate_hz,
            psd_train.n_segments(),
            psd_train.fft_size,
            psd_train.sample_rate_hz
        )));
    }
    Ok(psd_test
        .psd
        .iter()
        .zip(&psd_train.psd)
        .map(|(num, den)| {
            let peak = den.iter().copied().fold(0.0, f64::max);
            if peak <= 0.0 {
                return vec![0.0; den.len()];
            }
            let lo = floor * peak;
            num.iter()
                .zip(den)
                .map(|(&t, &r)| (t.max(0.0) / r.max(lo)).sqrt())
                .collect()
        })
        .collect())
}

/// Wiener-style gain `g / (1 + g^2 / snr)`.
pub fn wiener_gain(g: f64, snr: f64) -> f64 {
    g / (1.0 + g * g / snr)
}

/// Regularized forward (`w(|G|)`) or inverse (`w(1/|G|)`) gains.
pub fn wiener_regularize(
    gamma_mag: &[Vec<f64>],
    cfg: &WienerConfig,
    direction: Direction,
) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    if gamma_mag.iter().flatten().any(|g| !g.is_finite() || *g < 0.0) {
        return Err(Error::NonFiniteInput);
    }
    let snr = cfg.snr;
    Ok(gamma_mag
        .iter()
        .map(|row| {
            row.iter()
                .map(|&g| match direction {
                    Direction::Forward => wiener_gain(g, snr),
                    // w(1/g) rewritten so that g = 0 maps to 0 without a division by zero
                    Direction::Inverse => g / (g * g + 1.0 / snr),
                })
                .collect()
        })
        .collect())
}

/// Welch spectra of both calibration sets, their ratio and its regularization.
pub fn build_transfer_function(
    calib_train: &[RfFrame],
    calib_test: &[RfFrame],
    grid: &PatchGridSpec,
    cfg: &WienerConfig,
    direction: Direction,
) -> Result<TransferFunction> {
    if calib_train.is_empty() || calib_test.is_empty() {
        return Err(Error::EmptyInput);
    }
    let fft_size = crate::dsp::CALIBRATION_FFT_SIZE;
    let psd_train = welch_psd(calib_train, grid, fft_size)?;
    let psd_test = welch_psd(calib_test, grid, fft_size)?;
    let n = calib_train.len().min(calib_test.len()) as u32;
    TransferFunction::from_spectra(&psd_train, &psd_test, cfg, direction, n)
}

/// Reusable zero-phase filtering state for one transfer function.
pub struct TfApplier<'a> {
    tf: &'a TransferFunction,
    fft: RealFft,
    time: Vec<f64>,
    input: Vec<f64>,
    bins: Vec<Complex64>,
}

impl<'a> TfApplier<'a> {
    pub fn new(tf: &'a TransferFunction) -> Self {
        Self {
            tf,
            fft: RealFft::new(tf.fft_size),
            time: vec![0.0; tf.fft_size],
            input: Vec::with_capacity(tf.fft_size),
            bins: vec![Complex64::new(0.0, 0.0); tf.n_bins()],
        }
    }

    fn check(&self, axial: usize, segment: usize) -> Result<()> {
        if segment >= self.tf.n_segments() {
            return Err(Error::SegmentOutOfRange {
                segment,
                n_segments: self.tf.n_segments(),
            });
        }
        if axial > self.tf.fft_size {
            return Err(Error::SizeMismatch {
                axial,
                fft_size: self.tf.fft_size,
            });
        }
        Ok(())
    }

    /// Filters one axial line with the gains of `segment`.
    pub fn apply_line<T: Copy + Into<f64>>(
        &mut self,
        line: &[T],
        segment: usize,
        out: &mut [f64],
    ) -> Result<()> {
        self.check(line.len(), segment)?;
        if out.len() != line.len() {
            return Err(Error::LengthMismatch {
                expected: line.len(),
                got: out.len(),
            });
        }
        self.input.clear();
        self.input.extend(line.iter().map(|&v| v.into()));
        self.fft.forward_into(&self.input, &mut self.bins)?;
        for (b, &g) in self.bins.iter_mut().zip(&self.tf.gains[segment]) {
            *b *= f64::from(g);
        }
        self.fft.inverse_into(&self.bins, &mut self.time)?;
        out.copy_from_slice(&self.time[..line.len()]);
        Ok(())
    }

    pub fn apply(&mut self, patch: &Patch) -> Result<Patch> {
        self.check(patch.axial_len(), patch.depth_segment)?;
        let mut line_out = vec![0.0; patch.axial_len()];
        let mut samples = Vec::with_capacity(patch.samples().len());
        for l in 0..patch.lateral_len() {
            self.apply_line(patch.line(l), patch.depth_segment, &mut line_out)?;
            samples.extend(line_out.iter().map(|&v| v as f32));
        }
        Ok(patch.with_samples(samples))
    }
}

/// Zero-phase filtering of every A-line of a patch with its depth segment's gains.
pub fn apply_transfer_function(patch: &Patch, tf: &TransferFunction) -> Result<Patch> {
    TfApplier::new(tf).apply(patch)
}

impl TransferFunction {
    /// True when every gain is exactly one.
    pub fn is_identity(&self) -> bool {
        self.gains.iter().flatten().all(|&g| g == 1.0)
    }
}

/// [`apply_transfer_function`] over a patch set, in parallel, order preserved.
pub fn apply_to_patches(patches: &[Patch], tf: &TransferFunction) -> Result<Vec<Patch>> {
    tf.validate()?;
    if tf.is_identity() {
        // unit gains leave patches untouched; skip the FFT round-off
        for p in patches {
            TfApplier::new(tf).check(p.axial_len(), p.depth_segment)?;
        }
        return Ok(patches.to_vec());
    }
    patches
        .par_iter()
        .map_init(|| TfApplier::new(tf), |ap, p| ap.apply(p))
        .collect()
}
