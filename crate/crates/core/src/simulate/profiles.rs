use crate::error::{Error, Result};
use crate::rf::{MachineId, PhantomId};

/// Frequency at which the phantom tilt filter has unit gain.
pub const TILT_REFERENCE_HZ: f64 = 7e6;

#[derive(Debug, Clone, PartialEq)]
pub struct MachineProfile {
    pub id: MachineId,
    pub center_freq_hz: f64,
    /// -6 dB amplitude bandwidth over centre frequency.
    pub fractional_bandwidth: f64,
    pub gain: f64,
    pub native_rate_hz: f64,
    /// Focus position, in 40 MHz samples.
    pub focal_depth_samples: usize,
    /// Gaussian sigma of the focal bump, in 40 MHz samples.
    pub focal_gain_width_samples: f64,
    pub focal_gain_db: f64,
    pub noise_std: f64,
}

impl MachineProfile {
    /// 9 MHz probe digitized at 40 MHz.
    pub fn train_machine() -> Self {
        Self {
            id: MachineId::Train,
            center_freq_hz: 9e6,
            fractional_bandwidth: 1.0,
            gain: 1.0,
            native_rate_hz: 40e6,
            focal_depth_samples: 1039,
            focal_gain_width_samples: 260.0,
            focal_gain_db: 6.0,
            noise_std: 1e-3,
        }
    }

    /// 5 MHz probe digitized at 50 MHz with a lower receive gain and a deeper focus.
    pub fn test_machine() -> Self {
        Self {
            id: MachineId::Test,
            center_freq_hz: 5e6,
            fractional_bandwidth: 1.0,
            gain: 0.15,
            native_rate_hz: 50e6,
            focal_depth_samples: 1300,
            focal_gain_width_samples: 300.0,
            focal_gain_db: 4.0,
            noise_std: 2e-4,
        }
    }

    pub fn for_id(id: MachineId) -> Self {
        match id {
            MachineId::Train => Self::train_machine(),
            MachineId::Test => Self::test_machine(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.center_freq_hz > 0.0
            && self.fractional_bandwidth > 0.0
            && self.native_rate_hz > 2.0 * self.center_freq_hz
            && self.focal_gain_width_samples > 0.0
            && self.noise_std >= 0.0
            && self.gain.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::BadConfig(format!("invalid machine profile {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomProfile {
    pub id: PhantomId,
    pub echogenicity: f64,
    pub spectral_tilt_db_per_mhz: f64,
    pub attenuation_db_per_cm_per_mhz: f64,
    pub sound_speed_m_per_s: f64,
}

impl PhantomProfile {
    fn base(id: PhantomId, tilt: f64, attenuation: f64) -> Self {
        Self {
            id,
            echogenicity: 1.0,
            spectral_tilt_db_per_mhz: tilt,
            attenuation_db_per_cm_per_mhz: attenuation,
            sound_speed_m_per_s: 1540.0,
        }
    }

    pub fn class_a() -> Self {
        Self::base(PhantomId::CLASS_A, 0.0, 0.4)
    }

    pub fn class_b() -> Self {
        Self {
            echogenicity: 15.0,
            ..Self::base(PhantomId::CLASS_B, 1.5, 0.1)
        }
    }

    pub fn calib_1() -> Self {
        Self::base(PhantomId::CALIB_1, 0.0, 0.74)
    }

    pub fn calib_2() -> Self {
        Self::base(PhantomId::CALIB_2, 0.75, 0.6)
    }

    pub fn for_id(id: PhantomId) -> Option<Self> {
        match id {
            PhantomId::CLASS_A => Some(Self::class_a()),
            PhantomId::CLASS_B => Some(Self::class_b()),
            PhantomId::CALIB_1 => Some(Self::calib_1()),
            PhantomId::CALIB_2 => Some(Self::calib_2()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub frame_axial: usize,
    pub frame_lateral: usize,
    pub seed: u64,
    pub n_frames: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            frame_axial: 2080,
            frame_lateral: 256,
            seed: 0,
            n_frames: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frame_axial == 0 || self.frame_lateral == 0 {
            return Err(Error::BadConfig(format!(
                "frame size {}x{}",
                self.frame_axial, self.frame_lateral
            )));
        }
        Ok(())
    }
}
