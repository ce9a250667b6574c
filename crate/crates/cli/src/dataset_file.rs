//! Dataset container: one line of JSON metadata, a newline, then every
//! observation as a little-endian `f32`. The payload holds the training
//! split followed by the test split; within a split, samples are stored
//! class by class, sample by sample, one observation after another.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use otpool_core::datagen::{DatasetShape, MixedGammaParams, ToyDataset};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const FORMAT_NAME: &str = "otpool-dataset";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub shape: DatasetShape,
    pub classes: Vec<MixedGammaParams>,
    /// Number of `f32` values in the payload.
    pub values: u64,
}

impl DatasetHeader {
    fn for_dataset(ds: &ToyDataset) -> Self {
        Self {
            format: FORMAT_NAME.to_string(),
            version: FORMAT_VERSION,
            seed: ds.seed,
            shape: ds.shape,
            classes: ds.classes.clone(),
            values: expected_values(&ds.shape),
        }
    }
}

fn expected_values(shape: &DatasetShape) -> u64 {
    let per_class = shape.train_per_class * shape.train_set_size + shape.test_per_class * shape.test_set_size;
    (shape.n_classes as u64) * per_class as u64
}

pub fn encode(ds: &ToyDataset, out: &mut impl Write) -> std::io::Result<()> {
    let header = serde_json::to_string(&DatasetHeader::for_dataset(ds)).map_err(std::io::Error::other)?;
    out.write_all(header.as_bytes())?;
    out.write_all(b"\n")?;
    for buffer in ds.train.iter().chain(&ds.test) {
        for x in buffer {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    out.flush()
}

pub fn decode(bytes: &[u8], source: &str) -> Result<ToyDataset> {
    let split = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| CliError::input(format!("{source}: missing dataset header line")))?;
    let header: DatasetHeader = serde_json::from_slice(&bytes[..split])
        .map_err(|e| CliError::input(format!("{source}: bad dataset header: {e}")))?;
    if header.format != FORMAT_NAME || header.version != FORMAT_VERSION {
        return Err(CliError::input(format!(
            "{source}: unsupported dataset format {:?} version {}",
            header.format, header.version
        )));
    }
    header.shape.validate()?;
    let payload = &bytes[split + 1..];
    let expected = expected_values(&header.shape);
    if header.values != expected || payload.len() as u64 != expected * 4 {
        return Err(CliError::input(format!(
            "{source}: payload holds {} bytes, expected {} values",
            payload.len(),
            expected
        )));
    }
    let mut values = payload.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]));
    let shape = header.shape;
    let mut take = |len: usize| -> Vec<Vec<f32>> {
        (0..shape.n_classes).map(|_| values.by_ref().take(len).collect()).collect()
    };
    let train = take(shape.train_per_class * shape.train_set_size);
    let test = take(shape.test_per_class * shape.test_set_size);
    let ds = ToyDataset { seed: header.seed, shape, classes: header.classes, train, test };
    ds.validate()?;
    Ok(ds)
}

pub fn write_dataset(path: &Path, ds: &ToyDataset) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    encode(ds, &mut BufWriter::new(file)).map_err(|e| CliError::io(path, e))
}

pub fn read_dataset(path: &Path) -> Result<ToyDataset> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode(&bytes, &path.display().to_string())
}
