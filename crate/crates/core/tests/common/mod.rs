#![allow(dead_code)]

use m2m_core::calibrate::{wiener_gain, TransferFunction};
use m2m_core::dsp::Window;
use m2m_core::rf::{PatchGridSpec, COMMON_RATE_HZ};
use m2m_core::simulate::{attenuation_envelope, focal_envelope, pulse_spectrum_magnitude, MachineProfile, PhantomProfile};

/// Bins where both pulses are within -6 dB of their own peak.
pub fn passband_bins(a: &MachineProfile, b: &MachineProfile, fft_size: usize) -> Vec<usize> {
    let in_band = |m: &MachineProfile, f: f64| {
        pulse_spectrum_magnitude(m, f) >= 0.5 * pulse_spectrum_magnitude(m, m.center_freq_hz)
    };
    (0..=fft_size / 2)
        .filter(|&k| {
            let f = k as f64 * COMMON_RATE_HZ / fft_size as f64;
            in_band(a, f) && in_band(b, f)
        })
        .collect()
}

fn depth_gain(m: &MachineProfile, p: &PhantomProfile, n: usize) -> f64 {
    let depth = n as f64 * p.sound_speed_m_per_s / (2.0 * COMMON_RATE_HZ);
    attenuation_envelope(m, p, depth) * focal_envelope(m, p.sound_speed_m_per_s, depth)
}

/// Analytic forward gains `w(|P_test G_test| / |P_train G_train|)` per segment and bin.
///
/// The depth envelope is folded in with the Welch window's power weighting
/// over each segment.
pub fn oracle_forward_gains(
    train: &MachineProfile,
    test: &MachineProfile,
    phantom: &PhantomProfile,
    grid: &PatchGridSpec,
    fft_size: usize,
    snr: f64,
) -> Vec<Vec<f64>> {
    let h = Window::Hann.coefficients(grid.axial_patch);
    (0..grid.n_axial)
        .map(|i| {
            let s = grid.segment_start(i);
            let (mut num, mut den) = (0.0, 0.0);
            for (j, w) in h.iter().enumerate() {
                num += w * w * depth_gain(test, phantom, s + j).powi(2);
                den += w * w * depth_gain(train, phantom, s + j).powi(2);
            }
            let depth_ratio = (num / den).sqrt();
            (0..=fft_size / 2)
                .map(|k| {
                    let f = k as f64 * COMMON_RATE_HZ / fft_size as f64;
                    let g = depth_ratio * pulse_spectrum_magnitude(test, f) / pulse_spectrum_magnitude(train, f);
                    wiener_gain(g, snr)
                })
                .collect()
        })
        .collect()
}

/// Largest relative deviation of `tf` from `oracle` over `bins`, all segments.
pub fn max_relative_error(tf: &TransferFunction, oracle: &[Vec<f64>], bins: &[usize]) -> f64 {
    let mut worst = 0.0f64;
    for (row, want) in tf.gains.iter().zip(oracle) {
        for &k in bins {
            worst = worst.max((f64::from(row[k]) - want[k]).abs() / want[k]);
        }
    }
    worst
}

/// Largest relative deviation between two gain tables over `bins`.
pub fn max_relative_gap(a: &TransferFunction, b: &TransferFunction, bins: &[usize]) -> f64 {
    let mut worst = 0.0f64;
    for (ra, rb) in a.gains.iter().zip(&b.gains) {
        for &k in bins {
            let (x, y) = (f64::from(ra[k]), f64::from(rb[k]));
            worst = worst.max((x - y).abs() / y);
        }
    }
    worst
}
