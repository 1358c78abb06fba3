//! IDX binary tensor files (the MNIST distribution format).
//!
//! Only the two magics the MNIST files use are accepted: 2051 (`0x00000803`,
//! unsigned-byte images with 3 dimensions) and 2049 (`0x00000801`,
//! unsigned-byte labels with 1 dimension). All integers are big-endian.
//! Image payloads are scaled to `[0,1]`; label payloads stay raw bytes.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;

use crate::error::{Result, SzoError};
use crate::objectives::Dataset;
use crate::rng::{RngStream, SHUFFLE_BASE};

/// Magic for unsigned-byte image tensors (3 dimensions).
pub const IDX_MAGIC_IMAGES: u32 = 2051;
/// Magic for unsigned-byte label vectors (1 dimension).
pub const IDX_MAGIC_LABELS: u32 = 2049;

/// Parsed contents of an IDX file.
#[derive(Debug, Clone, PartialEq)]
pub enum IdxData {
    /// Image tensor with its recorded dimensions (count, rows, cols) and
    /// pixels scaled to `[0,1]` in row-major order.
    Images { dims: Vec<usize>, pixels: Vec<f64> },
    /// Label vector, one class id per example.
    Labels(Vec<u8>),
}

fn read_u32_be(bytes: &[u8], offset: usize) -> Result<u32> {
    let end = offset + 4;
    if end > bytes.len() {
        return Err(SzoError::Format("idx file truncated in header".into()));
    }
    Ok(u32::from_be_bytes([bytes[offset], bytes[offset + 1], bytes[offset + 2], bytes[offset + 3]]))
}

/// Parses an IDX file from disk.
pub fn load_idx(path: &Path) -> Result<IdxData> {
    let bytes = fs::read(path)?;
    parse_idx(&bytes)
}

/// Parses IDX bytes. Split out from [`load_idx`] so tests can synthesize
/// files in memory.
pub fn parse_idx(bytes: &[u8]) -> Result<IdxData> {
    let magic = read_u32_be(bytes, 0)?;
    let ndims = match magic {
        IDX_MAGIC_IMAGES => 3,
        IDX_MAGIC_LABELS => 1,
        other => {
            return Err(SzoError::Format(format!(
                "unsupported idx magic {other} (expected {IDX_MAGIC_IMAGES} or {IDX_MAGIC_LABELS})"
            )))
        }
    };
    let mut dims = Vec::with_capacity(ndims);
    for d in 0..ndims {
        dims.push(read_u32_be(bytes, 4 + 4 * d)? as usize);
    }
    let payload_start = 4 + 4 * ndims;
    let expected: usize = dims.iter().product();
    let payload = &bytes[payload_start.min(bytes.len())..];
    if payload.len() < expected {
        return Err(SzoError::Format(format!(
            "idx payload truncated: expected {expected} bytes, found {}",
            payload.len()
        )));
    }
    if payload.len() > expected {
        return Err(SzoError::Format(format!(
            "idx payload has {} trailing bytes",
            payload.len() - expected
        )));
    }
    Ok(match magic {
        IDX_MAGIC_IMAGES => IdxData::Images {
            dims,
            pixels: payload.iter().map(|&b| b as f64 / 255.0).collect(),
        },
        _ => IdxData::Labels(payload.to_vec()),
    })
}

/// Mean-pools each `(rows × cols)` image by `factor` in both axes.
/// `rows` and `cols` must be divisible by `factor` (28×28 pools to 14×14
/// with factor 2 or 7×7 with factor 4).
pub fn mean_pool(pixels: &[f64], rows: usize, cols: usize, factor: usize) -> Result<Vec<f64>> {
    if factor == 0 || rows % factor != 0 || cols % factor != 0 {
        return Err(SzoError::Domain(format!(
            "pool factor {factor} does not divide {rows}×{cols}"
        )));
    }
    SzoError::check_len(rows * cols, pixels.len())?;
    let (pr, pc) = (rows / factor, cols / factor);
    let mut out = vec![0.0; pr * pc];
    for r in 0..rows {
        for c in 0..cols {
            out[(r / factor) * pc + c / factor] += pixels[r * cols + c];
        }
    }
    let area = (factor * factor) as f64;
    for v in &mut out {
        *v /= area;
    }
    Ok(out)
}

/// Loads the standard four MNIST files from `dir`, optionally mean-pooling
/// by `pool_factor` (1 = off). The published training set becomes an 80/20
/// train/dev split (seeded shuffle) and the published test set is the test
/// split.
pub fn mnist_from_dir(dir: &Path, pool_factor: usize, seed: u64) -> Result<Arc<Dataset>> {
    let load_pair = |images: &str, labels: &str| -> Result<(Vec<Vec<f64>>, Vec<u8>)> {
        let imgs = match load_idx(&dir.join(images))? {
            IdxData::Images { dims, pixels } => {
                let (count, rows, cols) = (dims[0], dims[1], dims[2]);
                let mut out = Vec::with_capacity(count);
                for i in 0..count {
                    let img = &pixels[i * rows * cols..(i + 1) * rows * cols];
                    out.push(if pool_factor > 1 {
                        mean_pool(img, rows, cols, pool_factor)?
                    } else {
                        img.to_vec()
                    });
                }
                out
            }
            IdxData::Labels(_) => {
                return Err(SzoError::Format(format!("{images} is a label file")))
            }
        };
        let labels = match load_idx(&dir.join(labels))? {
            IdxData::Labels(l) => l,
            IdxData::Images { .. } => {
                return Err(SzoError::Format(format!("{labels} is an image file")))
            }
        };
        SzoError::check_len(imgs.len(), labels.len())?;
        Ok((imgs, labels))
    };

    let (train_imgs, train_labels) = load_pair("train-images-idx3-ubyte", "train-labels-idx1-ubyte")?;
    let (test_imgs, test_labels) = load_pair("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")?;

    let features = train_imgs.first().map_or(0, Vec::len);
    let total = train_imgs.len() + test_imgs.len();
    let mut inputs = Array2::zeros((total, features));
    let mut labels = Vec::with_capacity(total);
    for (row, (img, &label)) in train_imgs
        .iter()
        .zip(&train_labels)
        .chain(test_imgs.iter().zip(&test_labels))
        .enumerate()
    {
        for (col, &v) in img.iter().enumerate() {
            inputs[[row, col]] = v;
        }
        labels.push(label as usize);
    }

    let mut train_order: Vec<usize> = (0..train_imgs.len()).collect();
    RngStream::new(seed, SHUFFLE_BASE).shuffle(&mut train_order);
    let dev_n = train_order.len() / 5;
    let dev = train_order[..dev_n].to_vec();
    let train = train_order[dev_n..].to_vec();
    let test = (train_imgs.len()..total).collect();
    Ok(Arc::new(Dataset::new(inputs, labels, 10, train, dev, test)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Builds IDX bytes by hand, straight from the published format
    /// description: big-endian magic, big-endian dims, raw payload.
    pub fn synth_idx(magic: u32, dims: &[u32], payload: &[u8]) -> Vec<u8> {
        let mut bytes = magic.to_be_bytes().to_vec();
        for d in dims {
            bytes.extend_from_slice(&d.to_be_bytes());
        }
        bytes.extend_from_slice(payload);
        bytes
    }

    #[test]
    fn parses_two_2x2_images() {
        let bytes = synth_idx(IDX_MAGIC_IMAGES, &[2, 2, 2], &[0, 51, 102, 153, 204, 255, 0, 51]);
        match parse_idx(&bytes).unwrap() {
            IdxData::Images { dims, pixels } => {
                assert_eq!(dims, vec![2, 2, 2]);
                assert_eq!(pixels.len(), 8);
                assert_eq!(pixels[0], 0.0);
                assert_eq!(pixels[5], 1.0);
                assert!((pixels[1] - 51.0 / 255.0).abs() < 1e-15);
            }
            other => panic!("expected images, got {other:?}"),
        }
    }

    #[test]
    fn parses_three_labels() {
        let bytes = synth_idx(IDX_MAGIC_LABELS, &[3], &[7, 0, 9]);
        assert_eq!(parse_idx(&bytes).unwrap(), IdxData::Labels(vec![7, 0, 9]));
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let bytes = synth_idx(0, &[3], &[1, 2, 3]);
        assert!(matches!(parse_idx(&bytes), Err(SzoError::Format(_))));
        let bytes = synth_idx(IDX_MAGIC_LABELS, &[4], &[1, 2, 3]);
        assert!(matches!(parse_idx(&bytes), Err(SzoError::Format(_))));
        let bytes = synth_idx(IDX_MAGIC_LABELS, &[2], &[1, 2, 3]);
        assert!(matches!(parse_idx(&bytes), Err(SzoError::Format(_))));
        assert!(parse_idx(&[0, 0]).is_err());
    }

    #[test]
    fn pooling_averages_blocks() {
        // 4×4 image, factor 2: each output is the mean of a 2×2 block.
        #[rustfmt::skip]
        let img = vec![
            1.0, 1.0, 2.0, 2.0,
            1.0, 1.0, 2.0, 2.0,
            3.0, 3.0, 4.0, 4.0,
            3.0, 3.0, 4.0, 4.0,
        ];
        assert_eq!(mean_pool(&img, 4, 4, 2).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(mean_pool(&img, 4, 4, 4).unwrap(), vec![2.5]);
        assert!(mean_pool(&img, 4, 4, 3).is_err());
    }

    #[test]
    fn mnist_dir_round_trip() {
        // Two 2×2 "mnist" files in a temp dir exercise the directory loader.
        let dir = tempfile::tempdir().unwrap();
        let imgs = synth_idx(IDX_MAGIC_IMAGES, &[10, 2, 2], &[128; 40]);
        let labels = synth_idx(IDX_MAGIC_LABELS, &[10], &[0, 1, 2, 3, 4, 5, 6, 7, 8, 9]);
        std::fs::write(dir.path().join("train-images-idx3-ubyte"), &imgs).unwrap();
        std::fs::write(dir.path().join("train-labels-idx1-ubyte"), &labels).unwrap();
        let test_imgs = synth_idx(IDX_MAGIC_IMAGES, &[4, 2, 2], &[255; 16]);
        let test_labels = synth_idx(IDX_MAGIC_LABELS, &[4], &[1, 2, 3, 4]);
        std::fs::write(dir.path().join("t10k-images-idx3-ubyte"), &test_imgs).unwrap();
        std::fs::write(dir.path().join("t10k-labels-idx1-ubyte"), &test_labels).unwrap();

        let data = mnist_from_dir(dir.path(), 2, 7).unwrap();
        assert_eq!(data.num_examples(), 14);
        assert_eq!(data.num_features(), 1);
        assert_eq!(data.train().len(), 8);
        assert_eq!(data.dev().len(), 2);
        assert_eq!(data.test().len(), 4);
        assert!((data.inputs()[[0, 0]] - 128.0 / 255.0).abs() < 1e-15);
    }
}
