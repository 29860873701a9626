//! Graymap frames, CSV records, and frame directories.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::GrayFrame;
use crate::net::{read_checkpoint, write_checkpoint, Parameters};

pub const FRAME_PREFIX: &str = "frame_";
pub const FRAME_EXTENSION: &str = "pgm";

pub fn frame_file_name(index: usize) -> String {
    format!("{FRAME_PREFIX}{index:06}.{FRAME_EXTENSION}")
}

fn image_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub fn read_pgm(path: &Path) -> Result<GrayFrame> {
    let reader = image::ImageReader::with_format(std::io::BufReader::new(open(path)?), image::ImageFormat::Pnm);
    let img = reader.decode().map_err(|e| image_error(path, e))?.to_luma8();
    GrayFrame::from_bytes(img.width() as usize, img.height() as usize, img.as_raw())
}

/// Writes an 8-bit binary graymap.
pub fn write_pgm(path: &Path, frame: &GrayFrame) -> Result<()> {
    let mut out = create(path)?;
    PnmEncoder::new(&mut out)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(
            &frame.to_bytes(),
            frame.width() as u32,
            frame.height() as u32,
            ExtendedColorType::L8,
        )
        .map_err(|e| image_error(path, e))?;
    out.flush()?;
    Ok(())
}

/// Writes an 8-bit binary RGB pixmap from interleaved bytes.
pub fn write_ppm(path: &Path, width: usize, height: usize, rgb: &[u8]) -> Result<()> {
    let mut out = create(path)?;
    PnmEncoder::new(&mut out)
        .with_subtype(PnmSubtype::Pixmap(SampleEncoding::Binary))
        .write_image(rgb, width as u32, height as u32, ExtendedColorType::Rgb8)
        .map_err(|e| image_error(path, e))?;
    out.flush()?;
    Ok(())
}

pub fn save_checkpoint(path: &Path, params: &Parameters) -> Result<()> {
    write_checkpoint(params, create(path)?)
}

pub fn load_checkpoint(path: &Path) -> Result<Parameters> {
    read_checkpoint(std::io::BufReader::new(open(path)?))
}

/// Frames of a directory, `frame_000000.pgm` onward, loaded on demand.
#[derive(Clone, Debug)]
pub struct FrameStore {
    entries: Vec<(usize, PathBuf)>,
}

impl FrameStore {
    /// Indexes every `frame_NNNNNN.pgm` in `dir`. Indices must form the
    /// contiguous range `0..n`.
    pub fn open(dir: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        let listing = std::fs::read_dir(dir)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", dir.display()))))?;
        for entry in listing {
            let path = entry?.path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
                continue;
            };
            let Some(stem) = name
                .strip_prefix(FRAME_PREFIX)
                .and_then(|s| s.strip_suffix(&format!(".{FRAME_EXTENSION}")))
            else {
                continue;
            };
            if let Ok(index) = stem.parse::<usize>() {
                entries.push((index, path));
            }
        }
        entries.sort();
        for (expected, (index, path)) in entries.iter().enumerate() {
            if *index != expected {
                return Err(Error::invalid(format!(
                    "frame sequence has a gap: expected index {expected}, found {}",
                    path.display()
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn from_paths(paths: Vec<PathBuf>) -> Self {
        Self {
            entries: paths.into_iter().enumerate().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn path(&self, index: usize) -> Option<&Path> {
        self.entries.get(index).map(|(_, p)| p.as_path())
    }

    pub fn load(&self, index: usize) -> Result<GrayFrame> {
        let path = self
            .path(index)
            .ok_or_else(|| Error::invalid(format!("frame {index} out of range")))?;
        read_pgm(path)
    }

    pub fn iter(&self) -> impl Iterator<Item = Result<GrayFrame>> + '_ {
        (0..self.len()).map(|i| self.load(i))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionRow {
    pub frame: usize,
    pub class: usize,
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
    pub vx: f64,
    pub vy: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackRow {
    pub frame: usize,
    pub id: u64,
    pub class: usize,
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub frame: usize,
    pub track_id: u64,
    pub class: usize,
    pub x: f64,
    pub y: f64,
}

/// Writes rows with a header line and LF endings.
pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::invalid(format!("CSV serialization: {e}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_csv(rows, create(path)?)
}

pub fn read_csv_file<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let mut rows = Vec::new();
    for (i, rec) in reader.deserialize().enumerate() {
        rows.push(rec.map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            line: e.position().map_or(i + 2, |p| p.line() as usize),
            message: e.to_string(),
        })?);
    }
    Ok(rows)
}
