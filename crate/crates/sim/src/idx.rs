//! IDX reader for MNIST-style image and label files.

use std::fs;
use std::path::Path;

use sfedca_core::data::Dataset;
use sfedca_core::Tensor;

/// Magic number of an unsigned-byte image file with 3 dimensions.
pub const IMAGES_MAGIC: u32 = 0x0000_0803;
/// Magic number of an unsigned-byte label file with 1 dimension.
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, thiserror::Error)]
pub enum IdxError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: bad magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic { path: String, found: u32, expected: u32 },
    #[error("{path}: truncated, need {needed} bytes but file has {actual}")]
    Truncated { path: String, needed: usize, actual: usize },
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error(transparent)]
    Dataset(#[from] sfedca_core::Error),
}

fn read(path: &Path) -> Result<Vec<u8>, IdxError> {
    fs::read(path).map_err(|source| IdxError::Io { path: path.display().to_string(), source })
}

fn header(bytes: &[u8], path: &Path, magic: u32, dims: usize) -> Result<Vec<usize>, IdxError> {
    let name = || path.display().to_string();
    let word = |i: usize| u32::from_be_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap());
    let truncated = |needed| IdxError::Truncated { path: name(), needed, actual: bytes.len() };
    if bytes.len() < 4 {
        return Err(truncated(4));
    }
    if word(0) != magic {
        return Err(IdxError::BadMagic { path: name(), found: word(0), expected: magic });
    }
    if bytes.len() < 4 * (1 + dims) {
        return Err(truncated(4 * (1 + dims)));
    }
    Ok((1..=dims).map(|i| word(i) as usize).collect())
}

/// Parses an image file into `(rows, cols, pixels)` with pixels scaled to
/// `[0, 1]`, one `Vec` per image.
pub fn parse_images(bytes: &[u8], path: &Path) -> Result<(usize, usize, Vec<Vec<f64>>), IdxError> {
    let dims = header(bytes, path, IMAGES_MAGIC, 3)?;
    let (count, rows, cols) = (dims[0], dims[1], dims[2]);
    let size = rows * cols;
    let needed = 16 + count * size;
    if bytes.len() < needed {
        return Err(IdxError::Truncated {
            path: path.display().to_string(),
            needed,
            actual: bytes.len(),
        });
    }
    let images = bytes[16..needed]
        .chunks_exact(size.max(1))
        .take(count)
        .map(|px| px.iter().map(|&b| f64::from(b) / 255.0).collect())
        .collect();
    Ok((rows, cols, images))
}

pub fn parse_labels(bytes: &[u8], path: &Path) -> Result<Vec<usize>, IdxError> {
    let count = header(bytes, path, LABELS_MAGIC, 1)?[0];
    let needed = 8 + count;
    if bytes.len() < needed {
        return Err(IdxError::Truncated {
            path: path.display().to_string(),
            needed,
            actual: bytes.len(),
        });
    }
    Ok(bytes[8..needed].iter().map(|&b| b as usize).collect())
}

/// Reads just the `(count, rows, cols)` header of an image file.
pub fn image_dims(path: &Path) -> Result<(usize, usize, usize), IdxError> {
    use std::io::Read;
    let mut buf = [0u8; 16];
    let mut file =
        fs::File::open(path).map_err(|source| IdxError::Io { path: path.display().to_string(), source })?;
    let n = file
        .read(&mut buf)
        .map_err(|source| IdxError::Io { path: path.display().to_string(), source })?;
    let d = header(&buf[..n], path, IMAGES_MAGIC, 3)?;
    Ok((d[0], d[1], d[2]))
}

/// Loads an image/label file pair. Samples are flat `[rows * cols]`
/// tensors and the class count is one more than the largest label.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset, IdxError> {
    let (_, _, images) = parse_images(&read(images_path)?, images_path)?;
    let labels = parse_labels(&read(labels_path)?, labels_path)?;
    if images.len() != labels.len() {
        return Err(IdxError::CountMismatch { images: images.len(), labels: labels.len() });
    }
    let classes = labels.iter().max().map_or(2, |&m| (m + 1).max(2));
    let samples = images.into_iter().map(Tensor::from_vec).collect();
    let name = images_path.file_name().map_or_else(|| "idx".into(), |n| n.to_string_lossy().into_owned());
    Ok(Dataset::new(samples, labels, classes, name)?)
}

/// Serialises images in IDX format. Values are clamped to `[0, 1]` and
/// rounded to bytes.
pub fn encode_images(rows: usize, cols: usize, images: &[Vec<f64>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    for word in [IMAGES_MAGIC, images.len() as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&word.to_be_bytes());
    }
    for img in images {
        out.extend(img.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    }
    out
}

pub fn encode_labels(labels: &[usize]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend(labels.iter().map(|&l| l as u8));
    out
}
