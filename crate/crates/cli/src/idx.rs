//! IDX dataset ingestion (the MNIST container format): big-endian
//! headers, unsigned-byte payloads, bit-exact validation that names the
//! byte offset of whatever is wrong.

use std::path::Path;

use infoplane_core::Matrix;
use infoplane_net::SampleBatch;

use crate::error::{CliError, CliResult};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// A loaded image/label pair: pixels scaled to [0,1], labels in [0,9].
#[derive(Debug, Clone, PartialEq)]
pub struct IdxDataset {
    /// One flattened image per row.
    pub images: Matrix<f32>,
    pub labels: Vec<u8>,
}

impl IdxDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Hands the dataset to the training stack. Lengths agree by
    /// construction, so this cannot fail.
    pub fn into_batch(self) -> SampleBatch<f32> {
        SampleBatch::labeled(self.images, self.labels)
            .expect("images and labels agree by construction")
    }
}

fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

/// Big-endian u32 at `offset`, or a format error naming the offset.
fn be_u32(bytes: &[u8], offset: usize, path: &Path, what: &str) -> CliResult<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(CliError::Format(format!(
            "{}: truncated reading {} at offset {} (file ends at offset {})",
            path.display(),
            what,
            offset,
            bytes.len()
        )));
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}

fn check_magic(bytes: &[u8], expected: u32, path: &Path) -> CliResult<()> {
    let magic = be_u32(bytes, 0, path, "magic number")?;
    if magic != expected {
        return Err(CliError::Format(format!(
            "{}: bad magic 0x{:08x} at offset 0 (expected 0x{:08x})",
            path.display(),
            magic,
            expected
        )));
    }
    Ok(())
}

/// Loads an images/labels IDX pair. `limit` keeps only the first
/// `min(limit, count)` samples; a limit of 0 yields an empty dataset.
pub fn load_idx(
    images_path: &Path,
    labels_path: &Path,
    limit: Option<usize>,
) -> CliResult<IdxDataset> {
    let image_bytes = read_file(images_path)?;
    check_magic(&image_bytes, IMAGES_MAGIC, images_path)?;
    let image_count = be_u32(&image_bytes, 4, images_path, "image count")? as usize;
    let rows = be_u32(&image_bytes, 8, images_path, "row count")? as usize;
    let cols = be_u32(&image_bytes, 12, images_path, "column count")? as usize;
    let pixel_dim = rows * cols;
    let data_start = 16;
    let expected = image_count * pixel_dim;
    if image_bytes.len() < data_start + expected {
        return Err(CliError::Format(format!(
            "{}: truncated pixel data: expected {} bytes at offset {} (file ends at offset {})",
            images_path.display(),
            expected,
            data_start,
            image_bytes.len()
        )));
    }

    let label_bytes = read_file(labels_path)?;
    check_magic(&label_bytes, LABELS_MAGIC, labels_path)?;
    let label_count = be_u32(&label_bytes, 4, labels_path, "label count")? as usize;
    if label_count != image_count {
        return Err(CliError::Format(format!(
            "{}: label count {} at offset 4 does not match image count {} in {}",
            labels_path.display(),
            label_count,
            image_count,
            images_path.display()
        )));
    }
    let labels_start = 8;
    if label_bytes.len() < labels_start + label_count {
        return Err(CliError::Format(format!(
            "{}: truncated label data: expected {} bytes at offset {} (file ends at offset {})",
            labels_path.display(),
            label_count,
            labels_start,
            label_bytes.len()
        )));
    }

    let keep = limit.map_or(image_count, |l| l.min(image_count));
    let mut images = Matrix::zeros(keep, pixel_dim);
    for (value, &byte) in images
        .data_mut()
        .iter_mut()
        .zip(&image_bytes[data_start..data_start + keep * pixel_dim])
    {
        *value = f32::from(byte) / 255.0;
    }
    let labels = label_bytes[labels_start..labels_start + keep].to_vec();
    for (i, &label) in labels.iter().enumerate() {
        if label > 9 {
            return Err(CliError::Format(format!(
                "{}: label {} out of range [0,9] at offset {}",
                labels_path.display(),
                label,
                labels_start + i
            )));
        }
    }

    Ok(IdxDataset { images, labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    /// Serializes a well-formed IDX pair with the given pixel rows.
    pub(crate) fn write_idx_pair(
        dir: &Path,
        stem: &str,
        rows: usize,
        cols: usize,
        pixels: &[Vec<u8>],
        labels: &[u8],
    ) -> (PathBuf, PathBuf) {
        assert_eq!(pixels.len(), labels.len());
        let mut image_bytes = Vec::new();
        image_bytes.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
        image_bytes.extend_from_slice(&(pixels.len() as u32).to_be_bytes());
        image_bytes.extend_from_slice(&(rows as u32).to_be_bytes());
        image_bytes.extend_from_slice(&(cols as u32).to_be_bytes());
        for p in pixels {
            assert_eq!(p.len(), rows * cols);
            image_bytes.extend_from_slice(p);
        }
        let mut label_bytes = Vec::new();
        label_bytes.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
        label_bytes.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        label_bytes.extend_from_slice(labels);

        let images_path = dir.join(format!("{stem}-images-idx3-ubyte"));
        let labels_path = dir.join(format!("{stem}-labels-idx1-ubyte"));
        std::fs::write(&images_path, image_bytes).unwrap();
        std::fs::write(&labels_path, label_bytes).unwrap();
        (images_path, labels_path)
    }

    fn sample_pair(dir: &Path) -> (PathBuf, PathBuf) {
        let pixels = vec![
            vec![0, 51, 102, 153, 204, 255],
            vec![255, 204, 153, 102, 51, 0],
            vec![10, 20, 30, 40, 50, 60],
        ];
        write_idx_pair(dir, "sample", 2, 3, &pixels, &[0, 9, 4])
    }

    #[test]
    fn loads_and_scales_a_well_formed_pair() {
        let dir = tempfile::tempdir().unwrap();
        let (images, labels) = sample_pair(dir.path());
        let data = load_idx(&images, &labels, None).unwrap();
        assert_eq!(data.len(), 3);
        assert_eq!(data.images.rows(), 3);
        assert_eq!(data.images.cols(), 6);
        assert_eq!(data.labels, vec![0, 9, 4]);
        assert_eq!(data.images.get(0, 0), 0.0);
        assert_eq!(data.images.get(0, 5), 1.0);
        assert_eq!(data.images.get(1, 0), 1.0);
        assert!((data.images.get(0, 1) - 51.0 / 255.0).abs() < 1e-7);
        let batch = data.into_batch();
        assert_eq!(batch.len(), 3);
    }

    #[test]
    fn limit_truncates_and_zero_means_empty() {
        let dir = tempfile::tempdir().unwrap();
        let (images, labels) = sample_pair(dir.path());
        let two = load_idx(&images, &labels, Some(2)).unwrap();
        assert_eq!(two.len(), 2);
        assert_eq!(two.labels, vec![0, 9]);

        let empty = load_idx(&images, &labels, Some(0)).unwrap();
        assert!(empty.is_empty());
        assert_eq!(empty.images.rows(), 0);

        // A limit past the end keeps everything.
        let all = load_idx(&images, &labels, Some(100)).unwrap();
        assert_eq!(all.len(), 3);
    }

    #[test]
    fn corrupted_magic_is_a_format_error_naming_offset_zero() {
        let dir = tempfile::tempdir().unwrap();
        let (images, labels) = sample_pair(dir.path());
        let mut bytes = std::fs::read(&images).unwrap();
        bytes[2] = 0xff;
        std::fs::write(&images, bytes).unwrap();
        let err = load_idx(&images, &labels, None).unwrap_err();
        assert_eq!(err.category(), "format");
        let msg = err.to_string();
        assert!(msg.contains("offset 0"), "{msg}");
        assert!(msg.contains("bad magic"), "{msg}");
    }

    #[test]
    fn truncation_and_count_mismatch_name_their_offsets() {
        let dir = tempfile::tempdir().unwrap();
        let (images, labels) = sample_pair(dir.path());

        let bytes = std::fs::read(&images).unwrap();
        std::fs::write(&images, &bytes[..20]).unwrap();
        let err = load_idx(&images, &labels, None).unwrap_err();
        assert_eq!(err.category(), "format");
        assert!(err.to_string().contains("offset 16"), "{err}");

        std::fs::write(&images, &bytes[..10]).unwrap();
        let err = load_idx(&images, &labels, None).unwrap_err();
        assert!(err.to_string().contains("offset 8"), "{err}");

        std::fs::write(&images, bytes).unwrap();
        let mut label_bytes = std::fs::read(&labels).unwrap();
        label_bytes[7] = 9;
        std::fs::write(&labels, label_bytes).unwrap();
        let err = load_idx(&images, &labels, None).unwrap_err();
        assert_eq!(err.category(), "format");
        assert!(err.to_string().contains("offset 4"), "{err}");
    }

    #[test]
    fn out_of_range_labels_are_rejected_with_their_offset() {
        let dir = tempfile::tempdir().unwrap();
        let pixels = vec![vec![1, 2], vec![3, 4]];
        let (images, labels) =
            write_idx_pair(dir.path(), "bad", 1, 2, &pixels, &[3, 10]);
        let err = load_idx(&images, &labels, None).unwrap_err();
        assert_eq!(err.category(), "format");
        let msg = err.to_string();
        assert!(msg.contains("label 10"), "{msg}");
        assert!(msg.contains("offset 9"), "{msg}");
    }

    #[test]
    fn missing_files_are_io_errors() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_idx(
            &dir.path().join("absent-images"),
            &dir.path().join("absent-labels"),
            None,
        )
        .unwrap_err();
        assert_eq!(err.category(), "io");
    }
}
