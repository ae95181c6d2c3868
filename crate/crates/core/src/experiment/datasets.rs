//! Dataset file layout and synthetic suite generation.

use std::fs;
use std::path::{Path, PathBuf};

use super::config::Config;
use super::{CalibPhantom, Role};
use crate::error::{Error, Result};
use crate::rf::{Acquisition, DatasetWriter, PhantomId};
use crate::simulate::{acquire_stable, freehand_batches, substream, MachineProfile, PhantomProfile, SimConfig};

const BATCH_FRAMES: usize = 8;

fn machine_tag(role: Role) -> &'static str {
    match role {
        Role::Train => "train",
        Role::Test => "test",
    }
}

/// Classification data for one machine role and class label (0 or 1).
pub fn classification_path(dir: &Path, role: Role, class: u8) -> PathBuf {
    let class = if class == 0 { "a" } else { "b" };
    dir.join(format!("class_{}_{class}.m2mrf", machine_tag(role)))
}

pub fn calibration_path(dir: &Path, phantom: CalibPhantom, acq: Acquisition, role: Role) -> PathBuf {
    let p = match phantom {
        CalibPhantom::Calib1 => "calib1",
        CalibPhantom::Calib2 => "calib2",
    };
    let a = match acq {
        Acquisition::Stable => "stable",
        Acquisition::FreeHand => "freehand",
    };
    dir.join(format!("{p}_{a}_{}.m2mrf", machine_tag(role)))
}

/// Every file [`cmd_simulate`] writes, in generation order.
pub fn all_paths(dir: &Path) -> Vec<PathBuf> {
    let mut v = Vec::new();
    for role in [Role::Train, Role::Test] {
        for class in [0, 1] {
            v.push(classification_path(dir, role, class));
        }
    }
    for phantom in [CalibPhantom::Calib1, CalibPhantom::Calib2] {
        for acq in [Acquisition::Stable, Acquisition::FreeHand] {
            for role in [Role::Train, Role::Test] {
                v.push(calibration_path(dir, phantom, acq, role));
            }
        }
    }
    v
}

fn derived_seed(seed: u64, tag: u64) -> u64 {
    use rand::Rng;
    substream(seed, 0x4441_5441, tag).random()
}

fn machine_for(cfg: &Config, role: Role) -> MachineProfile {
    match role {
        Role::Train => MachineProfile::train_machine(),
        Role::Test => MachineProfile::for_id(cfg.test_machine),
    }
}

fn sim_config(cfg: &Config, n_frames: usize, tag: u64) -> SimConfig {
    SimConfig {
        frame_axial: cfg.frame_axial,
        frame_lateral: cfg.frame_lateral,
        seed: derived_seed(cfg.seed, tag),
        n_frames,
    }
}

fn write_freehand(path: &Path, sim: &SimConfig, machine: &MachineProfile, phantom: &PhantomProfile) -> Result<()> {
    let mut w = DatasetWriter::create(path)?;
    for batch in freehand_batches(sim, machine, phantom, BATCH_FRAMES) {
        for f in batch? {
            w.write_frame(&f)?;
        }
    }
    w.finish()
}

/// Generates the full synthetic suite into `out_dir`.
///
/// Twelve files: classification frames for both classes on both machines, and
/// stable and free-hand calibration frames of both calibration phantoms on
/// both machines. Returns the written paths.
pub fn cmd_simulate(cfg: &Config, out_dir: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;
    let mut written = Vec::new();
    for (ri, role) in [Role::Train, Role::Test].into_iter().enumerate() {
        let machine = machine_for(cfg, role);
        let n = match role {
            Role::Train => cfg.train_frames_per_class,
            Role::Test => cfg.test_frames_per_class,
        };
        for class in [0u8, 1] {
            let phantom = if class == 0 {
                PhantomProfile::class_a()
            } else {
                PhantomProfile::class_b()
            };
            let path = classification_path(out_dir, role, class);
            log::info!("simulating {}", path.display());
            write_freehand(&path, &sim_config(cfg, n, 10 + 2 * ri as u64 + class as u64), &machine, &phantom)?;
            written.push(path);
        }
    }
    let train = machine_for(cfg, Role::Train);
    let test = machine_for(cfg, Role::Test);
    for (pi, phantom_id) in [CalibPhantom::Calib1, CalibPhantom::Calib2].into_iter().enumerate() {
        let phantom = PhantomProfile::for_id(phantom_id.phantom_id()).expect("calibration preset");
        let stable = sim_config(cfg, cfg.stable_frames, 20 + pi as u64);
        let (fa, fb) = acquire_stable(&stable, &train, &test, &phantom)?;
        for (role, frames) in [(Role::Train, fa), (Role::Test, fb)] {
            let path = calibration_path(out_dir, phantom_id, Acquisition::Stable, role);
            log::info!("simulating {}", path.display());
            let mut w = DatasetWriter::create(&path)?;
            for f in &frames {
                w.write_frame(f)?;
            }
            w.finish()?;
            written.push(path);
        }
        for (ri, (role, machine)) in [(Role::Train, &train), (Role::Test, &test)].into_iter().enumerate() {
            let path = calibration_path(out_dir, phantom_id, Acquisition::FreeHand, role);
            log::info!("simulating {}", path.display());
            let sim = sim_config(cfg, cfg.freehand_frames, 30 + 2 * pi as u64 + ri as u64);
            write_freehand(&path, &sim, machine, &phantom)?;
            written.push(path);
        }
    }
    Ok(written)
}

impl CalibPhantom {
    pub fn phantom_id(self) -> PhantomId {
        match self {
            CalibPhantom::Calib1 => PhantomId::CALIB_1,
            CalibPhantom::Calib2 => PhantomId::CALIB_2,
        }
    }
}
