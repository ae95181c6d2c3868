//! Rational sample-rate conversion with a Kaiser-windowed-sinc FIR.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Stopband attenuation the multirate lowpass is designed for, in dB.
pub const STOPBAND_ATTENUATION_DB: f64 = 60.0;

/// Transition width as a fraction of the cutoff frequency.
const TRANSITION_FRACTION: f64 = 0.2;

/// An `interp / decim` rate converter.
#[derive(Debug, Clone, PartialEq)]
pub struct ResamplerSpec {
    pub interp: usize,
    pub decim: usize,
    /// Symmetric lowpass taps at the upsampled rate; they sum to `interp`.
    pub taps: Vec<f64>,
}

impl ResamplerSpec {
    pub fn output_len(&self, input_len: usize) -> usize {
        (input_len * self.interp).div_ceil(self.decim)
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

/// Kaiser beta for a given stopband attenuation.
pub fn kaiser_beta(atten_db: f64) -> f64 {
    if atten_db > 50.0 {
        0.1102 * (atten_db - 8.7)
    } else if atten_db >= 21.0 {
        0.5842 * (atten_db - 21.0).powf(0.4) + 0.07886 * (atten_db - 21.0)
    } else {
        0.0
    }
}

/// Designs the anti-imaging/anti-aliasing lowpass for an `interp/decim` converter.
///
/// Cutoff is `pi / max(interp, decim)` at the upsampled rate, the transition
/// band spans 20% of the cutoff centred on it, and the Kaiser window targets
/// [`STOPBAND_ATTENUATION_DB`]. Factors sharing a divisor are reduced first.
pub fn design_multirate_fir(interp: usize, decim: usize) -> Result<ResamplerSpec> {
    if interp == 0 || decim == 0 {
        return Err(Error::InvalidFactors { interp, decim });
    }
    let g = gcd(interp, decim);
    let (interp, decim) = (interp / g, decim / g);
    if interp == 1 && decim == 1 {
        return Ok(ResamplerSpec {
            interp,
            decim,
            taps: vec![1.0],
        });
    }
    let cutoff = PI / interp.max(decim) as f64;
    let transition = TRANSITION_FRACTION * cutoff;
    // a few dB of headroom over the nominal figure so the realized filter clears it
    let design_atten = STOPBAND_ATTENUATION_DB + 5.0;
    let beta = kaiser_beta(design_atten);
    let order = ((design_atten - 7.95) / (2.285 * transition)).ceil() as usize;
    let len = if order.is_multiple_of(2) { order + 1 } else { order + 2 };
    let mid = (len - 1) / 2;
    let i0_beta = bessel_i0(beta);

    let mut taps = vec![0.0; len];
    for i in 0..=mid {
        let m = (i as f64) - mid as f64;
        let sinc = if i == mid {
            cutoff / PI
        } else {
            (cutoff * m).sin() / (PI * m)
        };
        let r = m / mid as f64;
        let w = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
        taps[i] = sinc * w;
        taps[len - 1 - i] = taps[i];
    }
    let sum: f64 = taps.iter().sum();
    let norm = interp as f64 / sum;
    for t in &mut taps {
        *t *= norm;
    }
    // rescaling can break exact symmetry by rounding; re-mirror
    for i in 0..mid {
        taps[len - 1 - i] = taps[i];
    }
    Ok(ResamplerSpec { interp, decim, taps })
}

/// Upsample by `interp`, lowpass, downsample by `decim`, evaluated polyphase.
///
/// The filter's group delay is compensated, so output sample `m` sits at input
/// time `m * decim / interp`. Input outside the signal is treated as zero.
pub fn resample(signal: &[f64], spec: &ResamplerSpec) -> Result<Vec<f64>> {
    if signal.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut out = vec![0.0; spec.output_len(signal.len())];
    resample_into(signal, spec, &mut out);
    Ok(out)
}

/// [`resample`] into a caller buffer; fills `out.len()` samples.
pub fn resample_into<T: Copy + Into<f64>>(signal: &[T], spec: &ResamplerSpec, out: &mut [f64]) {
    let l = spec.interp;
    let delay = (spec.taps.len() - 1) / 2;
    let n = signal.len() as isize;
    for (m, y) in out.iter_mut().enumerate() {
        let p = m * spec.decim + delay;
        let phase = p % l;
        let base = (p / l) as isize;
        let mut acc = 0.0;
        let mut k = phase;
        let mut idx = base;
        while k < spec.taps.len() {
            if idx < 0 {
                break;
            }
            if idx < n {
                acc += spec.taps[k] * signal[idx as usize].into();
            }
            k += l;
            idx -= 1;
        }
        *y = acc;
    }
}

/// Magnitude of the filter's frequency response at `omega` (rad/sample).
pub fn fir_response(taps: &[f64], omega: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (i, &t) in taps.iter().enumerate() {
        re += t * (omega * i as f64).cos();
        im -= t * (omega * i as f64).sin();
    }
    (re * re + im * im).sqrt()
}
