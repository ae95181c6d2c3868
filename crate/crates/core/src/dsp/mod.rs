//! Spectral estimation and rational-rate resampling.

mod fft;
mod resample;
mod spectrum;

pub use fft::{inverse_real_fft, real_fft, RealFft};
pub use resample::{
    design_multirate_fir, fir_response, kaiser_beta, resample, resample_into, ResamplerSpec,
    STOPBAND_ATTENUATION_DB,
};
pub use spectrum::{
    periodogram, welch_psd, DepthSegmentedPsd, Periodogram, WelchAccumulator, Window,
    CALIBRATION_FFT_SIZE,
};
pub use rustfft::num_complex::Complex64;
