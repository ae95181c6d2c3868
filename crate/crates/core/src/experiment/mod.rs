//! Experiment orchestration: calibration modes, normalization regimes and the
//! result matrix.

mod config;
mod datasets;
mod report;

pub use config::Config;
pub use datasets::{all_paths, calibration_path, classification_path, cmd_simulate};
pub use report::{cmd_report, parse_report, render_report, CSV_HEADER};

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use crate::calibrate::{apply_to_patches, Direction, TransferFunction, WienerConfig};
use crate::dsp::{WelchAccumulator, CALIBRATION_FFT_SIZE};
use crate::error::{Error, Result};
use crate::learn::{evaluate, repeat_experiment, train, MLPModel, RepetitionReport, TrainConfig};
use crate::rf::{compute_norm_stats, extract_patches, Acquisition, DatasetReader, NormStats, Patch, PatchGridSpec, StatsProvenance};

/// Which side of the machine pair a dataset comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CalibrationMode {
    TrainTime,
    TestTime,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StatsRegime {
    TrainStats,
    TestStats,
    CalibratedStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CalibPhantom {
    Calib1,
    Calib2,
}

macro_rules! string_enum {
    ($t:ty { $($v:ident => $s:literal),+ $(,)? }) => {
        impl $t {
            pub fn as_str(self) -> &'static str {
                match self { $(Self::$v => $s),+ }
            }
        }
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
        impl FromStr for $t {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                $(if s.eq_ignore_ascii_case($s) { return Ok(Self::$v); })+
                Err(Error::BadConfig(format!(
                    concat!("unknown ", stringify!($t), " {:?}; expected one of: ", $($s, " "),+), s
                )))
            }
        }
    };
}

string_enum!(CalibrationMode { TrainTime => "TrainTime", TestTime => "TestTime", None => "None" });
string_enum!(StatsRegime { TrainStats => "TrainStats", TestStats => "TestStats", CalibratedStats => "CalibratedStats" });
string_enum!(CalibPhantom { Calib1 => "Calib1", Calib2 => "Calib2" });

pub fn acquisition_str(a: Acquisition) -> &'static str {
    match a {
        Acquisition::Stable => "Stable",
        Acquisition::FreeHand => "FreeHand",
    }
}

pub fn parse_acquisition(s: &str) -> Result<Acquisition> {
    if s.eq_ignore_ascii_case("stable") {
        Ok(Acquisition::Stable)
    } else if s.eq_ignore_ascii_case("freehand") || s.eq_ignore_ascii_case("free-hand") {
        Ok(Acquisition::FreeHand)
    } else {
        Err(Error::BadConfig(format!("unknown acquisition {s:?}; expected Stable or FreeHand")))
    }
}

/// One cell of the experiment matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub mode: CalibrationMode,
    pub stats: StatsRegime,
    pub calib_phantom: CalibPhantom,
    pub acquisition: Acquisition,
    pub snr: f64,
    pub n_repetitions: usize,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn new(mode: CalibrationMode, stats: StatsRegime, cfg: &Config) -> Self {
        Self {
            mode,
            stats,
            calib_phantom: CalibPhantom::Calib1,
            acquisition: Acquisition::Stable,
            snr: cfg.snr,
            n_repetitions: cfg.n_repetitions,
            seed: cfg.seed,
        }
    }

    fn tf_key(&self, direction: Direction) -> TfKey {
        TfKey {
            phantom: self.calib_phantom,
            acquisition: self.acquisition,
            direction,
            snr_bits: self.snr.to_bits(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub spec: ExperimentSpec,
    pub report: RepetitionReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TfKey {
    pub phantom: CalibPhantom,
    pub acquisition: Acquisition,
    pub direction: Direction,
    snr_bits: u64,
}

impl TfKey {
    pub fn new(phantom: CalibPhantom, acquisition: Acquisition, direction: Direction, snr: f64) -> Self {
        Self {
            phantom,
            acquisition,
            direction,
            snr_bits: snr.to_bits(),
        }
    }

    pub fn snr(&self) -> f64 {
        f64::from_bits(self.snr_bits)
    }
}

/// What a model was trained on: raw training patches or their forward calibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrainInput {
    Raw,
    Calibrated(TfKey),
}

/// Loaded data plus caches shared by the cells of a matrix run.
///
/// Models are keyed by training input and repetition seed, so cells that train
/// on identical inputs reuse one model per seed.
pub struct Session {
    pub cfg: Config,
    pub grid: PatchGridSpec,
    train_patches: Vec<Patch>,
    test_patches: Vec<Patch>,
    train_stats: NormStats,
    test_stats: NormStats,
    tfs: Mutex<HashMap<TfKey, Arc<TransferFunction>>>,
    calibrated_train: Mutex<Option<(TfKey, Arc<Vec<Patch>>)>>,
    calibrated_train_stats: Mutex<HashMap<TfKey, Arc<NormStats>>>,
    models: Mutex<HashMap<(TrainInput, u64), Arc<MLPModel>>>,
}

fn load_patches(paths: &[PathBuf], grid: &PatchGridSpec) -> Result<Vec<Patch>> {
    let mut out = Vec::new();
    let mut shape: Option<(u32, u32, f64)> = None;
    for path in paths {
        let mut reader = DatasetReader::open(path)?;
        let h = *reader.header();
        let s = (h.axial_len, h.lateral_len, h.sample_rate_hz);
        if let Some(prev) = shape {
            if prev != s {
                return Err(Error::IncompatibleDatasets(format!(
                    "{} has frames {}x{} at {} Hz, expected {}x{} at {} Hz",
                    path.display(),
                    s.0,
                    s.1,
                    s.2,
                    prev.0,
                    prev.1,
                    prev.2
                )));
            }
        }
        shape = Some(s);
        while let Some(frame) = reader.next_frame()? {
            out.extend(extract_patches(&frame, grid)?);
        }
    }
    Ok(out)
}

impl Session {
    /// Loads classification data from `cfg.data_dir`.
    pub fn open(cfg: Config) -> Result<Self> {
        let grid = PatchGridSpec::default();
        let dir = cfg.data_dir.clone();
        let train_paths: Vec<PathBuf> = [0, 1].iter().map(|&c| classification_path(&dir, Role::Train, c)).collect();
        let test_paths: Vec<PathBuf> = [0, 1].iter().map(|&c| classification_path(&dir, Role::Test, c)).collect();
        let train_patches = load_patches(&train_paths, &grid)?;
        let test_patches = load_patches(&test_paths, &grid)?;
        Self::from_patches(cfg, grid, train_patches, test_patches)
    }

    pub fn from_patches(cfg: Config, grid: PatchGridSpec, train_patches: Vec<Patch>, test_patches: Vec<Patch>) -> Result<Self> {
        cfg.validate()?;
        if let (Some(a), Some(b)) = (train_patches.first(), test_patches.first()) {
            if a.shape() != b.shape() {
                return Err(Error::IncompatibleDatasets(format!(
                    "training patches are {:?}, test patches {:?}",
                    a.shape(),
                    b.shape()
                )));
            }
        }
        let train_stats = compute_norm_stats(&train_patches)?;
        let test_stats = compute_norm_stats(&test_patches)?.with_provenance(StatsProvenance::TestStats);
        Ok(Self {
            cfg,
            grid,
            train_patches,
            test_patches,
            train_stats,
            test_stats,
            tfs: Mutex::new(HashMap::new()),
            calibrated_train: Mutex::new(None),
            calibrated_train_stats: Mutex::new(HashMap::new()),
            models: Mutex::new(HashMap::new()),
        })
    }

    pub fn train_patches(&self) -> &[Patch] {
        &self.train_patches
    }

    pub fn test_patches(&self) -> &[Patch] {
        &self.test_patches
    }

    /// Installs a transfer function, bypassing estimation from calibration files.
    pub fn set_transfer_function(&self, key: TfKey, tf: TransferFunction) {
        self.tfs.lock().unwrap().insert(key, Arc::new(tf));
    }

    fn calibration_psd(&self, path: &Path) -> Result<(crate::dsp::DepthSegmentedPsd, usize)> {
        let mut acc = WelchAccumulator::new(self.grid, CALIBRATION_FFT_SIZE)?;
        let mut reader = DatasetReader::open(path)?;
        let mut batch = Vec::new();
        loop {
            let next = reader.next_frame()?;
            let done = next.is_none();
            batch.extend(next);
            if batch.len() == 8 || (done && !batch.is_empty()) {
                acc.add_frames(&batch)?;
                batch.clear();
            }
            if done {
                break;
            }
        }
        let n = acc.n_frames();
        Ok((acc.finish()?, n))
    }

    /// Transfer function for `key`, estimated from the calibration files on first use.
    pub fn transfer_function(&self, key: TfKey) -> Result<Arc<TransferFunction>> {
        if let Some(tf) = self.tfs.lock().unwrap().get(&key) {
            return Ok(tf.clone());
        }
        let dir = &self.cfg.data_dir;
        let (psd_train, n_train) =
            self.calibration_psd(&calibration_path(dir, key.phantom, key.acquisition, Role::Train))?;
        let (psd_test, n_test) = self.calibration_psd(&calibration_path(dir, key.phantom, key.acquisition, Role::Test))?;
        let tf = TransferFunction::from_spectra(
            &psd_train,
            &psd_test,
            &WienerConfig::with_snr(key.snr()),
            key.direction,
            n_train.min(n_test) as u32,
        )?;
        let tf = Arc::new(tf);
        self.tfs.lock().unwrap().insert(key, tf.clone());
        Ok(tf)
    }

    /// Forward-calibrated training patches; only the most recent key is kept.
    fn calibrated_train(&self, key: TfKey) -> Result<Arc<Vec<Patch>>> {
        let mut slot = self.calibrated_train.lock().unwrap();
        if let Some((k, p)) = slot.as_ref() {
            if *k == key {
                return Ok(p.clone());
            }
        }
        *slot = None;
        let tf = self.transfer_function(key)?;
        let patches = Arc::new(apply_to_patches(&self.train_patches, &tf)?);
        let stats = compute_norm_stats(patches.iter())?.with_provenance(StatsProvenance::CalibratedStats);
        self.calibrated_train_stats.lock().unwrap().insert(key, Arc::new(stats));
        *slot = Some((key, patches.clone()));
        Ok(patches)
    }

    fn calibrated_train_stats(&self, key: TfKey) -> Result<Arc<NormStats>> {
        if let Some(s) = self.calibrated_train_stats.lock().unwrap().get(&key) {
            return Ok(s.clone());
        }
        self.calibrated_train(key)?;
        Ok(self.calibrated_train_stats.lock().unwrap()[&key].clone())
    }

    fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            seed: seed ^ 0x5eed_5eed_5eed_5eed,
            ..self.cfg.train.clone()
        }
    }

    /// Model for `input` and repetition `seed`, trained on first use.
    ///
    /// Training inputs are normalized with their own statistics.
    pub fn model(&self, input: TrainInput, seed: u64) -> Result<Arc<MLPModel>> {
        if let Some(m) = self.models.lock().unwrap().get(&(input, seed)) {
            return Ok(m.clone());
        }
        let model = match input {
            TrainInput::Raw => train(seed, &self.train_patches, &self.train_stats, &self.train_config(seed))?,
            TrainInput::Calibrated(key) => {
                let patches = self.calibrated_train(key)?;
                let stats = self.calibrated_train_stats(key)?;
                train(seed, &patches, &stats, &self.train_config(seed))?
            }
        };
        let model = Arc::new(model);
        self.models.lock().unwrap().insert((input, seed), model.clone());
        Ok(model)
    }

    fn train_input(spec: &ExperimentSpec) -> TrainInput {
        match spec.mode {
            CalibrationMode::TrainTime => TrainInput::Calibrated(spec.tf_key(Direction::Forward)),
            CalibrationMode::TestTime | CalibrationMode::None => TrainInput::Raw,
        }
    }

    /// Inference-time normalization statistics for a cell.
    fn inference_stats(&self, spec: &ExperimentSpec, calibrated_test: Option<&[Patch]>) -> Result<Arc<NormStats>> {
        Ok(match (spec.mode, spec.stats) {
            (_, StatsRegime::TrainStats) => Arc::new(self.train_stats.clone()),
            (_, StatsRegime::TestStats) => Arc::new(self.test_stats.clone()),
            (CalibrationMode::TestTime, StatsRegime::CalibratedStats) => {
                let patches = calibrated_test.expect("test-time cells calibrate the test set");
                Arc::new(compute_norm_stats(patches)?.with_provenance(StatsProvenance::CalibratedStats))
            }
            (_, StatsRegime::CalibratedStats) => self.calibrated_train_stats(spec.tf_key(Direction::Forward))?,
        })
    }

    /// Runs one cell for `spec.n_repetitions` seeds starting at `spec.seed`.
    pub fn run(&self, spec: &ExperimentSpec) -> Result<ResultRow> {
        let calibrated_test = match spec.mode {
            CalibrationMode::TestTime => {
                let tf = self.transfer_function(spec.tf_key(Direction::Inverse))?;
                Some(apply_to_patches(&self.test_patches, &tf)?)
            }
            _ => None,
        };
        let test_inputs: &[Patch] = calibrated_test.as_deref().unwrap_or(&self.test_patches);
        let stats = self.inference_stats(spec, calibrated_test.as_deref())?;
        let input = Self::train_input(spec);
        if let TrainInput::Calibrated(key) = input {
            // build the calibrated set up front: nested parallelism while the
            // cache lock is held could otherwise re-enter it from a stolen job
            let cached = self.models.lock().unwrap();
            let missing = (0..spec.n_repetitions as u64).any(|i| !cached.contains_key(&(input, spec.seed + i)));
            drop(cached);
            if missing {
                self.calibrated_train(key)?;
            }
        }
        let report = repeat_experiment(
            |seed| {
                let model = self.model(input, seed)?;
                evaluate(model.as_ref(), test_inputs, &stats)
            },
            spec.n_repetitions,
            spec.seed,
        )?;
        log::info!(
            "{} {} {} {}: accuracy {:.4} +- {:.4}, AUC {:.4} +- {:.4}",
            spec.mode,
            spec.stats,
            spec.calib_phantom,
            acquisition_str(spec.acquisition),
            report.mean_accuracy,
            report.std_accuracy,
            report.mean_auc,
            report.std_auc
        );
        Ok(ResultRow {
            spec: spec.clone(),
            report,
        })
    }
}

/// Loads the configured data and runs a single cell.
pub fn run_experiment(cfg: &Config, spec: &ExperimentSpec) -> Result<ResultRow> {
    Session::open(cfg.clone())?.run(spec)
}

/// The three tables of the matrix, as cell lists in report order.
pub fn matrix_specs(cfg: &Config) -> [Vec<ExperimentSpec>; 3] {
    use CalibrationMode::*;
    use StatsRegime::*;
    let regimes = [TrainStats, CalibratedStats, TestStats];
    let stats_table = [TrainTime, TestTime, None]
        .into_iter()
        .flat_map(|m| regimes.map(|s| ExperimentSpec::new(m, s, cfg)))
        .collect();
    // the ablations use each mode's best regime
    let best = |m| if m == TrainTime { TestStats } else { CalibratedStats };
    let phantom_table = [TrainTime, TestTime]
        .into_iter()
        .flat_map(|m| {
            [CalibPhantom::Calib1, CalibPhantom::Calib2].map(|p| ExperimentSpec {
                calib_phantom: p,
                ..ExperimentSpec::new(m, best(m), cfg)
            })
        })
        .collect();
    let acquisition_table = [TrainTime, TestTime]
        .into_iter()
        .flat_map(|m| {
            [Acquisition::Stable, Acquisition::FreeHand].map(|a| ExperimentSpec {
                acquisition: a,
                ..ExperimentSpec::new(m, best(m), cfg)
            })
        })
        .collect();
    [stats_table, phantom_table, acquisition_table]
}

pub const MATRIX_FILES: [&str; 3] = ["stats_regimes.csv", "calibration_phantoms.csv", "acquisitions.csv"];

/// Runs all three tables and writes one CSV per table into `out_dir`.
pub fn cmd_matrix(cfg: &Config, out_dir: &Path) -> Result<Vec<Vec<ResultRow>>> {
    let session = Session::open(cfg.clone())?;
    run_matrix(&session, out_dir)
}

pub fn run_matrix(session: &Session, out_dir: &Path) -> Result<Vec<Vec<ResultRow>>> {
    let tables = matrix_specs(&session.cfg);
    // group cells by training input so each calibrated training set is built once
    let mut order: Vec<(usize, usize)> = tables
        .iter()
        .enumerate()
        .flat_map(|(t, cells)| (0..cells.len()).map(move |c| (t, c)))
        .collect();
    let rank = |spec: &ExperimentSpec| match Session::train_input(spec) {
        TrainInput::Calibrated(k) => (0, k.phantom as u8, k.acquisition.code()),
        TrainInput::Raw => (1, 0, 0),
    };
    order.sort_by_key(|&(t, c)| rank(&tables[t][c]));
    let mut results: Vec<Vec<Option<ResultRow>>> = tables.iter().map(|t| vec![None; t.len()]).collect();
    for (t, c) in order {
        results[t][c] = Some(session.run(&tables[t][c])?);
    }
    let results: Vec<Vec<ResultRow>> = results
        .into_iter()
        .map(|t| t.into_iter().map(|r| r.expect("every cell ran")).collect())
        .collect();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;
    for (rows, name) in results.iter().zip(MATRIX_FILES) {
        cmd_report(rows, &out_dir.join(name))?;
    }
    Ok(results)
}
