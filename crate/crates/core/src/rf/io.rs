//! Little-endian RF dataset files.
//!
//! Layout: `"M2MRF1\0\0"`, u32 version, u32 n_frames, u32 axial_len,
//! u32 lateral_len, f64 sample_rate_hz, u8 machine_id, u8 phantom_id,
//! u8 acquisition, 5 pad bytes, then `n_frames` blocks of f32 samples with
//! the axial index fastest. Frame indices are not stored; frames read back
//! are numbered by position.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use super::{Acquisition, MachineId, PhantomId, RfFrame};
use crate::error::{Error, Result};

pub const DATASET_MAGIC: &[u8; 8] = b"M2MRF1\0\0";
pub const DATASET_VERSION: u32 = 1;
const HEADER_LEN: usize = 40;

/// Metadata shared by every frame in a dataset file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetHeader {
    pub n_frames: u32,
    pub axial_len: u32,
    pub lateral_len: u32,
    pub sample_rate_hz: f64,
    pub machine_id: MachineId,
    pub phantom_id: PhantomId,
    pub acquisition: Acquisition,
}

impl DatasetHeader {
    fn encode(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..8].copy_from_slice(DATASET_MAGIC);
        b[8..12].copy_from_slice(&DATASET_VERSION.to_le_bytes());
        b[12..16].copy_from_slice(&self.n_frames.to_le_bytes());
        b[16..20].copy_from_slice(&self.axial_len.to_le_bytes());
        b[20..24].copy_from_slice(&self.lateral_len.to_le_bytes());
        b[24..32].copy_from_slice(&self.sample_rate_hz.to_le_bytes());
        b[32] = self.machine_id.code();
        b[33] = self.phantom_id.0;
        b[34] = self.acquisition.code();
        b
    }

    fn decode(b: &[u8; HEADER_LEN]) -> Result<Self> {
        if &b[0..8] != DATASET_MAGIC {
            return Err(Error::BadMagic { expected: "M2MRF1" });
        }
        let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap());
        let version = u32_at(8);
        if version != DATASET_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: DATASET_VERSION,
            });
        }
        let header = DatasetHeader {
            n_frames: u32_at(12),
            axial_len: u32_at(16),
            lateral_len: u32_at(20),
            sample_rate_hz: f64::from_le_bytes(b[24..32].try_into().unwrap()),
            machine_id: MachineId::from_code(b[32])
                .ok_or_else(|| Error::MalformedHeader(format!("machine id {}", b[32])))?,
            phantom_id: PhantomId(b[33]),
            acquisition: Acquisition::from_code(b[34])
                .ok_or_else(|| Error::MalformedHeader(format!("acquisition {}", b[34])))?,
        };
        if header.axial_len == 0 || header.lateral_len == 0 {
            return Err(Error::MalformedHeader("zero frame dimension".into()));
        }
        if !(header.sample_rate_hz.is_finite() && header.sample_rate_hz > 0.0) {
            return Err(Error::MalformedHeader("sample rate".into()));
        }
        Ok(header)
    }

    fn frame_len(&self) -> usize {
        self.axial_len as usize * self.lateral_len as usize
    }
}

/// Writes frames sharing shape and metadata into one dataset file.
pub fn write_dataset(frames: &[RfFrame], path: impl AsRef<Path>) -> Result<()> {
    if frames.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut w = DatasetWriter::create(path)?;
    for f in frames {
        w.write_frame(f)?;
    }
    w.finish()
}

/// Incremental dataset writer; the frame count is patched in by [`finish`](Self::finish).
pub struct DatasetWriter {
    path: PathBuf,
    writer: BufWriter<File>,
    header: Option<DatasetHeader>,
    first_index: u32,
    buf: Vec<u8>,
}

impl DatasetWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        Ok(Self {
            path,
            writer: BufWriter::new(file),
            header: None,
            first_index: 0,
            buf: Vec::new(),
        })
    }

    fn ctx(&self) -> String {
        format!("writing {}", self.path.display())
    }

    pub fn write_frame(&mut self, f: &RfFrame) -> Result<()> {
        match &mut self.header {
            None => {
                let header = DatasetHeader {
                    n_frames: 0,
                    axial_len: f.axial_len() as u32,
                    lateral_len: f.lateral_len() as u32,
                    sample_rate_hz: f.sample_rate_hz,
                    machine_id: f.machine_id,
                    phantom_id: f.phantom_id,
                    acquisition: f.acquisition,
                };
                self.writer
                    .write_all(&header.encode())
                    .map_err(|e| Error::io(format!("writing {}", self.path.display()), e))?;
                self.header = Some(header);
                self.first_index = f.frame_index;
            }
            Some(h) => {
                if f.axial_len() as u32 != h.axial_len
                    || f.lateral_len() as u32 != h.lateral_len
                    || f.sample_rate_hz != h.sample_rate_hz
                    || f.machine_id != h.machine_id
                    || f.phantom_id != h.phantom_id
                    || f.acquisition != h.acquisition
                {
                    return Err(Error::IncompatibleDatasets(format!(
                        "frame {} differs in shape or metadata from frame {}",
                        f.frame_index, self.first_index
                    )));
                }
            }
        }
        self.buf.clear();
        for v in f.samples() {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
        self.writer.write_all(&self.buf).map_err(|e| Error::io(self.ctx(), e))?;
        if let Some(h) = &mut self.header {
            h.n_frames += 1;
        }
        Ok(())
    }

    /// Flushes and records the frame count. Errors if nothing was written.
    pub fn finish(mut self) -> Result<()> {
        let header = self.header.ok_or(Error::EmptyDataset)?;
        let ctx = self.ctx();
        self.writer.flush().map_err(|e| Error::io(ctx.clone(), e))?;
        let file = self.writer.get_mut();
        file.seek(SeekFrom::Start(0)).map_err(|e| Error::io(ctx.clone(), e))?;
        file.write_all(&header.encode()).map_err(|e| Error::io(ctx.clone(), e))?;
        file.sync_data().map_err(|e| Error::io(ctx, e))?;
        Ok(())
    }
}

/// Streams frames out of a dataset file one at a time.
pub struct DatasetReader {
    header: DatasetHeader,
    reader: BufReader<File>,
    path: PathBuf,
    next_index: u32,
    buf: Vec<u8>,
}

impl DatasetReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path).map_err(|e| {
            if e.kind() == ErrorKind::NotFound {
                Error::MissingFile(path.clone())
            } else {
                Error::io(format!("opening {}", path.display()), e)
            }
        })?;
        let mut reader = BufReader::with_capacity(1 << 20, file);
        let mut hb = [0u8; HEADER_LEN];
        read_exact_or_truncated(&mut reader, &mut hb, &path, "header")?;
        let header = DatasetHeader::decode(&hb)?;
        Ok(Self {
            header,
            reader,
            path,
            next_index: 0,
            buf: Vec::new(),
        })
    }

    pub fn header(&self) -> &DatasetHeader {
        &self.header
    }

    /// Next frame, or `None` once all `n_frames` have been read.
    pub fn next_frame(&mut self) -> Result<Option<RfFrame>> {
        if self.next_index >= self.header.n_frames {
            return Ok(None);
        }
        let n = self.header.frame_len();
        self.buf.resize(n * 4, 0);
        let what = format!("frame {}", self.next_index);
        read_exact_or_truncated(&mut self.reader, &mut self.buf, &self.path, &what)?;
        let samples = self
            .buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let frame = RfFrame::new(
            self.header.axial_len as usize,
            self.header.lateral_len as usize,
            samples,
            self.header.sample_rate_hz,
            self.header.machine_id,
            self.header.phantom_id,
            self.header.acquisition,
            self.next_index,
        )?;
        self.next_index += 1;
        Ok(Some(frame))
    }
}

impl Iterator for DatasetReader {
    type Item = Result<RfFrame>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_frame().transpose()
    }
}

fn read_exact_or_truncated(r: &mut impl Read, buf: &mut [u8], path: &Path, what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == ErrorKind::UnexpectedEof {
            Error::TruncatedFile(format!("{} ends inside {what}", path.display()))
        } else {
            Error::io(format!("reading {}", path.display()), e)
        }
    })
}

/// Reads every frame of a dataset file.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<RfFrame>> {
    DatasetReader::open(path)?.collect()
}
