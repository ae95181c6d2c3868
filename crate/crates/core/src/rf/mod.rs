//! RF frames, patch extraction and z-score normalization.
//!
//! Frames and patches are stored column-major: each lateral line (A-line) is a
//! contiguous run of axial samples. This matches the on-disk dataset layout and
//! keeps per-line spectral work on contiguous slices.

mod io;

pub use io::{
    read_dataset, write_dataset, DatasetHeader, DatasetReader, DatasetWriter, DATASET_MAGIC, DATASET_VERSION,
};

use crate::error::{Error, Result};

/// Common sampling rate every frame is brought to before patch extraction.
pub const COMMON_RATE_HZ: f64 = 40e6;

/// Which scanner acquired a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MachineId {
    Train,
    Test,
}

impl MachineId {
    pub fn code(self) -> u8 {
        match self {
            MachineId::Train => 0,
            MachineId::Test => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(MachineId::Train),
            1 => Some(MachineId::Test),
            _ => None,
        }
    }
}

/// How the probe was held while recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Acquisition {
    FreeHand,
    Stable,
}

impl Acquisition {
    pub fn code(self) -> u8 {
        match self {
            Acquisition::FreeHand => 0,
            Acquisition::Stable => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Acquisition::FreeHand),
            1 => Some(Acquisition::Stable),
            _ => None,
        }
    }
}

/// Phantom identifier as stored in dataset headers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PhantomId(pub u8);

impl PhantomId {
    pub const CLASS_A: PhantomId = PhantomId(0);
    pub const CLASS_B: PhantomId = PhantomId(1);
    pub const CALIB_1: PhantomId = PhantomId(2);
    pub const CALIB_2: PhantomId = PhantomId(3);

    /// Binary class label for the two classification phantoms.
    pub fn class_label(self) -> Option<u8> {
        match self {
            PhantomId::CLASS_A => Some(0),
            PhantomId::CLASS_B => Some(1),
            _ => None,
        }
    }
}

/// A post-beamformed RF image, `axial_len x lateral_len`, column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RfFrame {
    axial_len: usize,
    lateral_len: usize,
    samples: Vec<f32>,
    pub sample_rate_hz: f64,
    pub machine_id: MachineId,
    pub phantom_id: PhantomId,
    pub acquisition: Acquisition,
    pub frame_index: u32,
}

impl RfFrame {
    /// Builds a frame from column-major samples (axial index fastest).
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        axial_len: usize,
        lateral_len: usize,
        samples: Vec<f32>,
        sample_rate_hz: f64,
        machine_id: MachineId,
        phantom_id: PhantomId,
        acquisition: Acquisition,
        frame_index: u32,
    ) -> Result<Self> {
        if axial_len == 0 || lateral_len == 0 {
            return Err(Error::EmptyInput);
        }
        if samples.len() != axial_len * lateral_len {
            return Err(Error::LengthMismatch {
                expected: axial_len * lateral_len,
                got: samples.len(),
            });
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(Self {
            axial_len,
            lateral_len,
            samples,
            sample_rate_hz,
            machine_id,
            phantom_id,
            acquisition,
            frame_index,
        })
    }

    pub fn axial_len(&self) -> usize {
        self.axial_len
    }

    pub fn lateral_len(&self) -> usize {
        self.lateral_len
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    /// One A-line.
    pub fn line(&self, lateral: usize) -> &[f32] {
        &self.samples[lateral * self.axial_len..(lateral + 1) * self.axial_len]
    }

    pub fn lines(&self) -> impl Iterator<Item = &[f32]> {
        self.samples.chunks_exact(self.axial_len)
    }

    pub fn get(&self, axial: usize, lateral: usize) -> f32 {
        self.samples[lateral * self.axial_len + axial]
    }
}

/// Layout of the patch grid cut out of each frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchGridSpec {
    pub axial_offset: usize,
    pub axial_patch: usize,
    pub lateral_patch: usize,
    pub axial_stride: usize,
    pub lateral_stride: usize,
    pub n_axial: usize,
    pub n_lateral: usize,
}

impl Default for PatchGridSpec {
    fn default() -> Self {
        Self {
            axial_offset: 540,
            axial_patch: 200,
            lateral_patch: 26,
            axial_stride: 100,
            lateral_stride: 26,
            n_axial: 9,
            n_lateral: 9,
        }
    }
}

impl PatchGridSpec {
    /// Axial samples the grid reaches into (exclusive end).
    pub fn axial_extent(&self) -> usize {
        self.axial_offset + (self.n_axial.saturating_sub(1)) * self.axial_stride + self.axial_patch
    }

    pub fn lateral_extent(&self) -> usize {
        (self.n_lateral.saturating_sub(1)) * self.lateral_stride + self.lateral_patch
    }

    /// Start sample of depth segment `i`.
    pub fn segment_start(&self, i: usize) -> usize {
        self.axial_offset + i * self.axial_stride
    }

    pub fn segment_starts(&self) -> Vec<usize> {
        (0..self.n_axial).map(|i| self.segment_start(i)).collect()
    }

    pub fn patch_len(&self) -> usize {
        self.axial_patch * self.lateral_patch
    }

    pub fn check_fits(&self, axial_len: usize, lateral_len: usize) -> Result<()> {
        let needed_axial = self.axial_extent();
        let needed_lateral = self.lateral_extent();
        if self.n_axial == 0
            || self.n_lateral == 0
            || self.axial_patch == 0
            || self.lateral_patch == 0
            || needed_axial > axial_len
            || needed_lateral > lateral_len
        {
            return Err(Error::GridOverflow {
                needed_axial,
                needed_lateral,
                axial: axial_len,
                lateral: lateral_len,
            });
        }
        Ok(())
    }
}

/// Where a patch was cut from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchSource {
    pub frame_index: u32,
    pub axial_start: usize,
    pub lateral_start: usize,
}

/// A window cut from a frame; column-major like [`RfFrame`].
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    axial_len: usize,
    lateral_len: usize,
    samples: Vec<f32>,
    pub depth_segment: usize,
    pub label: Option<u8>,
    pub source: PatchSource,
}

impl Patch {
    pub fn new(
        axial_len: usize,
        lateral_len: usize,
        samples: Vec<f32>,
        depth_segment: usize,
        label: Option<u8>,
    ) -> Result<Self> {
        if samples.len() != axial_len * lateral_len {
            return Err(Error::LengthMismatch {
                expected: axial_len * lateral_len,
                got: samples.len(),
            });
        }
        Ok(Self {
            axial_len,
            lateral_len,
            samples,
            depth_segment,
            label,
            source: PatchSource {
                frame_index: 0,
                axial_start: 0,
                lateral_start: 0,
            },
        })
    }

    pub fn axial_len(&self) -> usize {
        self.axial_len
    }

    pub fn lateral_len(&self) -> usize {
        self.lateral_len
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.axial_len, self.lateral_len)
    }

    /// Flattened samples, lateral line by lateral line.
    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f32] {
        &mut self.samples
    }

    pub fn line(&self, lateral: usize) -> &[f32] {
        &self.samples[lateral * self.axial_len..(lateral + 1) * self.axial_len]
    }

    pub fn get(&self, axial: usize, lateral: usize) -> f32 {
        self.samples[lateral * self.axial_len + axial]
    }

    /// Same metadata, new samples.
    pub(crate) fn with_samples(&self, samples: Vec<f32>) -> Patch {
        debug_assert_eq!(samples.len(), self.samples.len());
        Patch {
            axial_len: self.axial_len,
            lateral_len: self.lateral_len,
            samples,
            depth_segment: self.depth_segment,
            label: self.label,
            source: self.source,
        }
    }
}

/// Cuts the `n_axial x n_lateral` patch grid out of a frame.
///
/// Patch `(i, j)` starts at axial `axial_offset + i*axial_stride` and lateral
/// `j*lateral_stride`; its depth segment is `i`. Labels come from the frame's
/// phantom when it is a classification phantom.
pub fn extract_patches(frame: &RfFrame, grid: &PatchGridSpec) -> Result<Vec<Patch>> {
    grid.check_fits(frame.axial_len, frame.lateral_len)?;
    let label = frame.phantom_id.class_label();
    let mut out = Vec::with_capacity(grid.n_axial * grid.n_lateral);
    for i in 0..grid.n_axial {
        let a0 = grid.segment_start(i);
        for j in 0..grid.n_lateral {
            let l0 = j * grid.lateral_stride;
            let mut samples = Vec::with_capacity(grid.patch_len());
            for l in l0..l0 + grid.lateral_patch {
                samples.extend_from_slice(&frame.line(l)[a0..a0 + grid.axial_patch]);
            }
            out.push(Patch {
                axial_len: grid.axial_patch,
                lateral_len: grid.lateral_patch,
                samples,
                depth_segment: i,
                label,
                source: PatchSource {
                    frame_index: frame.frame_index,
                    axial_start: a0,
                    lateral_start: l0,
                },
            });
        }
    }
    Ok(out)
}

/// Lateral mirror image of a patch.
pub fn horizontal_flip(patch: &Patch) -> Patch {
    let mut samples = Vec::with_capacity(patch.samples.len());
    for l in (0..patch.lateral_len).rev() {
        samples.extend_from_slice(patch.line(l));
    }
    patch.with_samples(samples)
}

/// Smallest standard deviation kept in [`NormStats`].
pub const STD_FLOOR: f64 = 1e-8;

/// Which dataset the z-score statistics were computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StatsProvenance {
    TrainStats,
    TestStats,
    CalibratedStats,
}

/// Element-wise mean and standard-deviation patches.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub axial_len: usize,
    pub lateral_len: usize,
    pub mean_patch: Vec<f64>,
    pub std_patch: Vec<f64>,
    pub provenance: StatsProvenance,
}

impl NormStats {
    /// Identity statistics (mean 0, std 1).
    pub fn identity(axial_len: usize, lateral_len: usize) -> Self {
        let n = axial_len * lateral_len;
        Self {
            axial_len,
            lateral_len,
            mean_patch: vec![0.0; n],
            std_patch: vec![1.0; n],
            provenance: StatsProvenance::TrainStats,
        }
    }

    pub fn with_provenance(mut self, provenance: StatsProvenance) -> Self {
        self.provenance = provenance;
        self
    }

    /// Writes the normalized version of `src` into `dst`.
    pub fn normalize_into(&self, src: &[f32], dst: &mut [f32]) {
        self.normalize_into_range(src, 0..self.mean_patch.len(), dst);
    }

    /// Normalizes `src` against the statistics at element positions `range`.
    pub fn normalize_into_range(&self, src: &[f32], range: std::ops::Range<usize>, dst: &mut [f32]) {
        for (((d, &x), &m), &s) in dst
            .iter_mut()
            .zip(src)
            .zip(&self.mean_patch[range.clone()])
            .zip(&self.std_patch[range])
        {
            *d = ((f64::from(x) - m) / s) as f32;
        }
    }
}

/// Element-wise mean and population standard deviation over a patch set.
pub fn compute_norm_stats<'a, I>(patches: I) -> Result<NormStats>
where
    I: IntoIterator<Item = &'a Patch>,
    I::IntoIter: Clone,
{
    let iter = patches.into_iter();
    let mut first = iter.clone();
    let head = first.next().ok_or(Error::EmptyDataset)?;
    let shape = head.shape();
    let n_elems = head.samples.len();

    let mut count = 0usize;
    let mut sum = vec![0.0f64; n_elems];
    for p in iter.clone() {
        if p.shape() != shape {
            return Err(Error::ShapeMismatch {
                expected: shape,
                got: p.shape(),
            });
        }
        for (s, &x) in sum.iter_mut().zip(&p.samples) {
            *s += f64::from(x);
        }
        count += 1;
    }
    let n = count as f64;
    let mean: Vec<f64> = sum.into_iter().map(|s| s / n).collect();

    // second pass keeps the variance free of catastrophic cancellation
    let mut sq = vec![0.0f64; n_elems];
    for p in iter {
        for ((q, &x), &m) in sq.iter_mut().zip(&p.samples).zip(&mean) {
            let d = f64::from(x) - m;
            *q += d * d;
        }
    }
    let std = sq
        .into_iter()
        .map(|q| (q / n).sqrt().max(STD_FLOOR))
        .collect();

    Ok(NormStats {
        axial_len: shape.0,
        lateral_len: shape.1,
        mean_patch: mean,
        std_patch: std,
        provenance: StatsProvenance::TrainStats,
    })
}

/// `(patch - mean_patch) / std_patch`, element-wise.
pub fn normalize(patch: &Patch, stats: &NormStats) -> Result<Patch> {
    let expected = (stats.axial_len, stats.lateral_len);
    if patch.shape() != expected {
        return Err(Error::ShapeMismatch {
            expected,
            got: patch.shape(),
        });
    }
    let mut out = vec![0.0f32; patch.samples.len()];
    stats.normalize_into(&patch.samples, &mut out);
    Ok(patch.with_samples(out))
}
