//! Synthetic two-scanner RF generator.
//!
//! Each A-line is modelled as tissue reflectivity, attenuated with depth,
//! convolved with the machine's pulse at its native sampling rate, shaped by a
//! focal gain bump, corrupted by white noise and finally resampled to the
//! common 40 MHz grid. Attenuation acts as a depth envelope evaluated at the
//! machine's centre frequency rather than as a frequency-dependent filter.

mod profiles;

pub use profiles::{MachineProfile, PhantomProfile, SimConfig, TILT_REFERENCE_HZ};

use std::f64::consts::{LN_10, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::dsp::{design_multirate_fir, resample_into, ResamplerSpec};
use crate::error::{Error, Result};
use crate::rf::{Acquisition, RfFrame, COMMON_RATE_HZ};

/// Reflectivity field on the 40 MHz axial grid, column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Reflectivity {
    pub axial_len: usize,
    pub lateral_len: usize,
    pub values: Vec<f64>,
}

impl Reflectivity {
    pub fn line(&self, l: usize) -> &[f64] {
        &self.values[l * self.axial_len..(l + 1) * self.axial_len]
    }

    pub fn scaled(&self, c: f64) -> Reflectivity {
        Reflectivity {
            values: self.values.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }
}

const STREAM_REFLECTIVITY: u64 = 0x5245_464c;
const STREAM_NOISE: u64 = 0x4e4f_4953;

/// Independent generator for `(seed, tag, index)`.
///
/// Every frame draws from its own substream, so frames can be produced in any
/// order or in parallel without changing the dataset.
pub fn substream(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    // splitmix64 finalizer to spread nearby seeds/tags
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    let mut rng = ChaCha8Rng::seed_from_u64(z);
    rng.set_stream(index);
    rng
}

/// Gaussian width (seconds) whose amplitude spectrum has the requested -6 dB width.
pub fn pulse_sigma(machine: &MachineProfile) -> f64 {
    let fwhm = machine.fractional_bandwidth * machine.center_freq_hz;
    (2.0 * 2f64.ln()).sqrt() / (PI * fwhm)
}

/// Gaussian-modulated cosine sampled at the machine's native rate.
///
/// Odd length, even-symmetric about the centre sample, truncated at +-4 sigma.
pub fn pulse_waveform(machine: &MachineProfile) -> Vec<f64> {
    let sigma = pulse_sigma(machine);
    let fs = machine.native_rate_hz;
    let half = (4.0 * sigma * fs).ceil() as usize;
    (0..=2 * half)
        .map(|i| {
            let t = (i as f64 - half as f64) / fs;
            machine.gain * (-t * t / (2.0 * sigma * sigma)).exp() * (2.0 * PI * machine.center_freq_hz * t).cos()
        })
        .collect()
}

/// Amplitude of the continuous pulse spectrum at `freq_hz`, scaled to the
/// discrete response a 40 MHz-density reflectivity sees.
pub fn pulse_spectrum_magnitude(machine: &MachineProfile, freq_hz: f64) -> f64 {
    let sigma = pulse_sigma(machine);
    let lobe = |df: f64| (-2.0 * PI * PI * sigma * sigma * df * df).exp();
    let scale = machine.gain * sigma * (2.0 * PI).sqrt() / 2.0 * COMMON_RATE_HZ;
    scale * (lobe(freq_hz - machine.center_freq_hz) + lobe(freq_hz + machine.center_freq_hz))
}

fn tilt_gains(phantom: &PhantomProfile, n: usize, rate: f64) -> Vec<f64> {
    (0..n)
        .map(|k| {
            // bin k and n-k share |f|
            let kk = k.min(n - k);
            let f_mhz = kk as f64 * rate / n as f64 / 1e6;
            let ref_mhz = TILT_REFERENCE_HZ / 1e6;
            10f64.powf(phantom.spectral_tilt_db_per_mhz * (f_mhz - ref_mhz) / 20.0)
        })
        .collect()
}

/// I.i.d. Gaussian scatterer field with a per-column spectral tilt.
pub fn gen_reflectivity(phantom: &PhantomProfile, axial: usize, lateral: usize, seed: u64) -> Reflectivity {
    assert!(axial > 0 && lateral > 0, "reflectivity dimensions must be positive");
    if phantom.echogenicity == 0.0 {
        log::warn!("phantom with zero echogenicity yields an empty reflectivity field");
        return Reflectivity {
            axial_len: axial,
            lateral_len: lateral,
            values: vec![0.0; axial * lateral],
        };
    }
    let mut rng = substream(seed, STREAM_REFLECTIVITY, 0);
    let mut values: Vec<f64> = (0..axial * lateral)
        .map(|_| phantom.echogenicity * rng.sample::<f64, _>(StandardNormal))
        .collect();
    if phantom.spectral_tilt_db_per_mhz != 0.0 {
        let gains = tilt_gains(phantom, axial, COMMON_RATE_HZ);
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(axial);
        let inv = planner.plan_fft_inverse(axial);
        let mut buf = vec![Complex64::new(0.0, 0.0); axial];
        for col in values.chunks_exact_mut(axial) {
            for (b, &v) in buf.iter_mut().zip(col.iter()) {
                *b = Complex64::new(v, 0.0);
            }
            fwd.process(&mut buf);
            for (b, &g) in buf.iter_mut().zip(&gains) {
                *b *= g;
            }
            inv.process(&mut buf);
            for (v, b) in col.iter_mut().zip(&buf) {
                *v = b.re / axial as f64;
            }
        }
    }
    Reflectivity {
        axial_len: axial,
        lateral_len: lateral,
        values,
    }
}

/// Depth in metres of sample `n` on a grid sampled at `rate`.
fn depth_m(n: f64, rate: f64, sound_speed: f64) -> f64 {
    n * sound_speed / (2.0 * rate)
}

/// Two-way attenuation amplitude factor at `depth` for the machine's centre frequency.
pub fn attenuation_envelope(machine: &MachineProfile, phantom: &PhantomProfile, depth_m: f64) -> f64 {
    let db = phantom.attenuation_db_per_cm_per_mhz * (machine.center_freq_hz / 1e6) * 2.0 * depth_m * 100.0;
    (-LN_10 / 20.0 * db).exp()
}

/// Focal gain (amplitude) at `depth`.
pub fn focal_envelope(machine: &MachineProfile, sound_speed: f64, depth_m_: f64) -> f64 {
    let focus = depth_m(machine.focal_depth_samples as f64, COMMON_RATE_HZ, sound_speed);
    let width = depth_m(machine.focal_gain_width_samples, COMMON_RATE_HZ, sound_speed);
    let d = depth_m_ - focus;
    let db = machine.focal_gain_db * (-d * d / (2.0 * width * width)).exp();
    10f64.powf(db / 20.0)
}

fn rational_ratio(from_hz: f64, to_hz: f64) -> Result<(usize, usize)> {
    let a = from_hz.round() as u64;
    let b = to_hz.round() as u64;
    if a == 0 || b == 0 {
        return Err(Error::BadConfig(format!("sampling rates {from_hz} / {to_hz}")));
    }
    let g = {
        let (mut x, mut y) = (a, b);
        while y != 0 {
            (x, y) = (y, x % y);
        }
        x
    };
    Ok(((b / g) as usize, (a / g) as usize))
}

/// Precomputed per-machine/phantom scan pipeline.
struct Scanner<'a> {
    machine: &'a MachineProfile,
    pulse: Vec<f64>,
    attenuation: Vec<f64>,
    focal: Vec<f64>,
    to_native: Option<ResamplerSpec>,
    to_common: Option<ResamplerSpec>,
    native_len: usize,
    axial: usize,
}

impl<'a> Scanner<'a> {
    fn new(machine: &'a MachineProfile, phantom: &PhantomProfile, axial: usize) -> Result<Self> {
        machine.validate()?;
        let c = phantom.sound_speed_m_per_s;
        let attenuation = (0..axial)
            .map(|n| attenuation_envelope(machine, phantom, depth_m(n as f64, COMMON_RATE_HZ, c)))
            .collect();
        let (to_native, to_common, native_len) = if machine.native_rate_hz == COMMON_RATE_HZ {
            (None, None, axial)
        } else {
            let (l, m) = rational_ratio(COMMON_RATE_HZ, machine.native_rate_hz)?;
            let up = design_multirate_fir(l, m)?;
            let down = design_multirate_fir(m, l)?;
            let len = up.output_len(axial);
            (Some(up), Some(down), len)
        };
        let focal = (0..native_len)
            .map(|n| focal_envelope(machine, c, depth_m(n as f64, machine.native_rate_hz, c)))
            .collect();
        // reflectivity is a density per 40 MHz sample; keep the response rate-independent
        let rate_scale = COMMON_RATE_HZ / machine.native_rate_hz;
        let pulse = pulse_waveform(machine).into_iter().map(|p| p * rate_scale).collect();
        Ok(Self {
            machine,
            pulse,
            attenuation,
            focal,
            to_native,
            to_common,
            native_len,
            axial,
        })
    }

    fn scan_line(&self, refl: &[f64], rng: &mut ChaCha8Rng, out: &mut [f32]) {
        let attenuated: Vec<f64> = refl.iter().zip(&self.attenuation).map(|(r, a)| r * a).collect();
        let native = match &self.to_native {
            Some(spec) => {
                let mut v = vec![0.0; self.native_len];
                resample_into(&attenuated, spec, &mut v);
                v
            }
            None => attenuated,
        };
        let half = self.pulse.len() / 2;
        let n = native.len();
        let mut echo = vec![0.0; n];
        for (i, e) in echo.iter_mut().enumerate() {
            // same-size convolution centred on the pulse peak
            let k_lo = (i + half).saturating_sub(n - 1);
            let k_hi = (i + half).min(self.pulse.len() - 1);
            let mut acc = 0.0;
            for k in k_lo..=k_hi {
                acc += self.pulse[k] * native[i + half - k];
            }
            *e = acc * self.focal[i];
        }
        if self.machine.noise_std > 0.0 {
            for e in &mut echo {
                *e += self.machine.noise_std * rng.sample::<f64, _>(StandardNormal);
            }
        }
        match &self.to_common {
            Some(spec) => {
                let mut v = vec![0.0; spec.output_len(n)];
                resample_into(&echo, spec, &mut v);
                for (o, x) in out.iter_mut().zip(v.iter().chain(std::iter::repeat(&0.0))) {
                    *o = *x as f32;
                }
            }
            None => {
                for (o, &x) in out.iter_mut().zip(&echo) {
                    *o = x as f32;
                }
            }
        }
        debug_assert_eq!(out.len(), self.axial);
    }
}

/// Images a reflectivity field with one machine; the result is on the 40 MHz grid.
///
/// `seed` drives the additive noise only. The frame is tagged as a stable
/// acquisition with index 0; callers relabel as needed.
pub fn scan(
    machine: &MachineProfile,
    phantom: &PhantomProfile,
    reflectivity: &Reflectivity,
    seed: u64,
) -> Result<RfFrame> {
    let scanner = Scanner::new(machine, phantom, reflectivity.axial_len)?;
    scan_with(&scanner, phantom, reflectivity, seed, 0, Acquisition::Stable)
}

fn scan_with(
    scanner: &Scanner<'_>,
    phantom: &PhantomProfile,
    reflectivity: &Reflectivity,
    seed: u64,
    frame_index: u32,
    acquisition: Acquisition,
) -> Result<RfFrame> {
    let axial = reflectivity.axial_len;
    let mut rng = substream(seed, STREAM_NOISE, 0);
    let mut samples = vec![0.0f32; axial * reflectivity.lateral_len];
    for (l, out) in samples.chunks_exact_mut(axial).enumerate() {
        scanner.scan_line(reflectivity.line(l), &mut rng, out);
    }
    RfFrame::new(
        axial,
        reflectivity.lateral_len,
        samples,
        COMMON_RATE_HZ,
        scanner.machine.id,
        phantom.id,
        acquisition,
        frame_index,
    )
}

fn frame_seed(seed: u64, tag: u64, index: u64) -> u64 {
    substream(seed, tag, index).random()
}

/// Repeated scans of one fixed view by two machines.
///
/// Both machines see the same reflectivity realization; the frames differ only
/// in their noise draws.
pub fn acquire_stable(
    cfg: &SimConfig,
    machine_a: &MachineProfile,
    machine_b: &MachineProfile,
    phantom: &PhantomProfile,
) -> Result<(Vec<RfFrame>, Vec<RfFrame>)> {
    cfg.validate()?;
    let refl = gen_reflectivity(phantom, cfg.frame_axial, cfg.frame_lateral, frame_seed(cfg.seed, 1, 0));
    let sa = Scanner::new(machine_a, phantom, cfg.frame_axial)?;
    let sb = Scanner::new(machine_b, phantom, cfg.frame_axial)?;
    let pairs: Vec<(RfFrame, RfFrame)> = (0..cfg.n_frames)
        .into_par_iter()
        .map(|i| {
            let a = scan_with(&sa, phantom, &refl, frame_seed(cfg.seed, 2, i as u64), i as u32, Acquisition::Stable)?;
            let b = scan_with(&sb, phantom, &refl, frame_seed(cfg.seed, 3, i as u64), i as u32, Acquisition::Stable)?;
            Ok((a, b))
        })
        .collect::<Result<_>>()?;
    Ok(pairs.into_iter().unzip())
}

/// Independent views: a fresh reflectivity realization for every frame.
pub fn acquire_freehand(cfg: &SimConfig, machine: &MachineProfile, phantom: &PhantomProfile) -> Result<Vec<RfFrame>> {
    cfg.validate()?;
    let scanner = Scanner::new(machine, phantom, cfg.frame_axial)?;
    (0..cfg.n_frames)
        .into_par_iter()
        .map(|i| {
            let refl = gen_reflectivity(phantom, cfg.frame_axial, cfg.frame_lateral, frame_seed(cfg.seed, 4, i as u64));
            scan_with(&scanner, phantom, &refl, frame_seed(cfg.seed, 5, i as u64), i as u32, Acquisition::FreeHand)
        })
        .collect()
}

/// Free-hand frames generated lazily in batches, for datasets too large to hold.
pub fn freehand_batches<'a>(
    cfg: &'a SimConfig,
    machine: &'a MachineProfile,
    phantom: &'a PhantomProfile,
    batch: usize,
) -> impl Iterator<Item = Result<Vec<RfFrame>>> + 'a {
    let batch = batch.max(1);
    (0..cfg.n_frames).step_by(batch).map(move |start| {
        let end = (start + batch).min(cfg.n_frames);
        let scanner = Scanner::new(machine, phantom, cfg.frame_axial)?;
        (start..end)
            .into_par_iter()
            .map(|i| {
                let refl = gen_reflectivity(phantom, cfg.frame_axial, cfg.frame_lateral, frame_seed(cfg.seed, 4, i as u64));
                scan_with(&scanner, phantom, &refl, frame_seed(cfg.seed, 5, i as u64), i as u32, Acquisition::FreeHand)
            })
            .collect()
    })
}

#[cfg(test)]
mod tests;
