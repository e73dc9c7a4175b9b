//! MNIST IDX binary format loader.
//!
//! Layout: a 4-byte big-endian magic (0x00000803 for 3-dimensional image
//! tensors, 0x00000801 for 1-dimensional label vectors), one 4-byte
//! big-endian size per dimension, then raw unsigned bytes. Files may be
//! gzip-compressed; the loader sniffs the two-byte gzip signature and
//! decompresses transparently. Pixels are normalized to `[0,1]` by
//! division by 255.

use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use super::Dataset;
use crate::error::{Error, Result};
use crate::qkernel::{Sample, SampleId};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// Reads a file fully, decompressing if it starts with the gzip signature.
fn read_maybe_gzipped(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b {
        let mut decoded = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut decoded)
            .map_err(|e| Error::io(path, e))?;
        Ok(decoded)
    } else {
        Ok(raw)
    }
}

fn format_err(path: &Path, offset: u64, detail: impl Into<String>) -> Error {
    Error::IdxFormat {
        path: path.to_path_buf(),
        offset,
        detail: detail.into(),
    }
}

/// Reads the big-endian u32 at `offset`, erroring on truncation.
fn read_u32(bytes: &[u8], offset: usize, path: &Path, what: &str) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(format_err(
            path,
            bytes.len() as u64,
            format!("file truncated while reading {what}"),
        ));
    }
    Ok(u32::from_be_bytes(bytes[offset..end].try_into().unwrap()))
}

struct Images {
    count: usize,
    pixels_per_image: usize,
    data: Vec<u8>,
}

fn parse_images(path: &Path) -> Result<Images> {
    let bytes = read_maybe_gzipped(path)?;
    let magic = read_u32(&bytes, 0, path, "magic number")?;
    if magic != IMAGES_MAGIC {
        return Err(format_err(
            path,
            0,
            format!("bad magic: expected {IMAGES_MAGIC:#010x} (images), found {magic:#010x}"),
        ));
    }
    let count = read_u32(&bytes, 4, path, "image count")? as usize;
    let rows = read_u32(&bytes, 8, path, "row count")? as usize;
    let cols = read_u32(&bytes, 12, path, "column count")? as usize;
    if rows == 0 || cols == 0 {
        return Err(format_err(path, 8, format!("invalid image shape {rows}x{cols}")));
    }
    let pixels_per_image = rows * cols;
    let expected_len = 16 + count * pixels_per_image;
    if bytes.len() < expected_len {
        return Err(format_err(
            path,
            bytes.len() as u64,
            format!(
                "file truncated: header promises {count} images of {rows}x{cols} \
                 ({expected_len} bytes total), found {} bytes",
                bytes.len()
            ),
        ));
    }
    if bytes.len() > expected_len {
        return Err(format_err(
            path,
            expected_len as u64,
            format!("trailing data: expected {expected_len} bytes, found {}", bytes.len()),
        ));
    }
    Ok(Images {
        count,
        pixels_per_image,
        data: bytes[16..].to_vec(),
    })
}

fn parse_labels(path: &Path) -> Result<(usize, Vec<u8>)> {
    let bytes = read_maybe_gzipped(path)?;
    let magic = read_u32(&bytes, 0, path, "magic number")?;
    if magic != LABELS_MAGIC {
        return Err(format_err(
            path,
            0,
            format!("bad magic: expected {LABELS_MAGIC:#010x} (labels), found {magic:#010x}"),
        ));
    }
    let count = read_u32(&bytes, 4, path, "label count")? as usize;
    let expected_len = 8 + count;
    if bytes.len() < expected_len {
        return Err(format_err(
            path,
            bytes.len() as u64,
            format!(
                "file truncated: header promises {count} labels ({expected_len} bytes total), \
                 found {} bytes",
                bytes.len()
            ),
        ));
    }
    if bytes.len() > expected_len {
        return Err(format_err(
            path,
            expected_len as u64,
            format!("trailing data: expected {expected_len} bytes, found {}", bytes.len()),
        ));
    }
    Ok((count, bytes[8..].to_vec()))
}

/// Loads an IDX image/label file pair into a dataset.
///
/// Sample ids are load-order indices starting at 0; pixel bytes are scaled
/// to `[0,1]` by division by 255.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();

    let images = parse_images(images_path)?;
    let (label_count, labels) = parse_labels(labels_path)?;
    if images.count != label_count {
        return Err(format_err(
            labels_path,
            4,
            format!(
                "label count {label_count} does not match image count {} in {}",
                images.count,
                images_path.display()
            ),
        ));
    }

    let samples: Vec<Sample> = images
        .data
        .chunks_exact(images.pixels_per_image)
        .zip(&labels)
        .enumerate()
        .map(|(i, (pixels, &label))| {
            let features: Vec<f64> = pixels.iter().map(|&b| b as f64 / 255.0).collect();
            Sample::new(SampleId(i as u64), features, Some(label as usize))
                .expect("byte pixels normalize into [0,1]")
        })
        .collect();

    let name = name_from_path(images_path);
    Dataset::new(name, samples)
}

fn name_from_path(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use flate2::write::GzEncoder;
    use flate2::Compression;
    use std::io::Write;

    /// Serializes an IDX image file from raw pixel bytes.
    fn idx_images(count: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
        out.extend_from_slice(&count.to_be_bytes());
        out.extend_from_slice(&rows.to_be_bytes());
        out.extend_from_slice(&cols.to_be_bytes());
        out.extend_from_slice(pixels);
        out
    }

    fn idx_labels(labels: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
        out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        out.extend_from_slice(labels);
        out
    }

    fn write_temp(dir: &tempfile::TempDir, name: &str, bytes: &[u8]) -> std::path::PathBuf {
        let path = dir.path().join(name);
        std::fs::write(&path, bytes).unwrap();
        path
    }

    #[test]
    fn loads_and_normalizes_images() {
        let dir = tempfile::tempdir().unwrap();
        let pixels = [0u8, 51, 102, 153, 204, 255, 0, 128];
        let img = write_temp(&dir, "img", &idx_images(2, 2, 2, &pixels));
        let lbl = write_temp(&dir, "lbl", &idx_labels(&[3, 7]));

        let ds = load_idx(&img, &lbl).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.m(), 4);
        assert_eq!(ds.p(), 8);
        assert_eq!(ds.samples()[0].label(), Some(3));
        assert_eq!(ds.samples()[1].label(), Some(7));
        assert_eq!(ds.samples()[0].features()[1], 51.0 / 255.0);
        assert_eq!(ds.samples()[1].features()[3], 128.0 / 255.0);
        assert_eq!(ds.samples()[0].id().0, 0);
        assert_eq!(ds.samples()[1].id().0, 1);
    }

    #[test]
    fn gzip_round_trip_matches_raw() {
        let dir = tempfile::tempdir().unwrap();
        let pixels: Vec<u8> = (0..=255).collect();
        let raw_img = idx_images(4, 8, 8, &pixels);
        let raw_lbl = idx_labels(&[0, 1, 2, 3]);

        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(&raw_img).unwrap();
        let gz_img = enc.finish().unwrap();
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(&raw_lbl).unwrap();
        let gz_lbl = enc.finish().unwrap();

        let plain = load_idx(
            write_temp(&dir, "img", &raw_img),
            write_temp(&dir, "lbl", &raw_lbl),
        )
        .unwrap();
        let zipped = load_idx(
            write_temp(&dir, "img.gz", &gz_img),
            write_temp(&dir, "lbl.gz", &gz_lbl),
        )
        .unwrap();

        assert_eq!(plain.len(), zipped.len());
        for (a, b) in plain.samples().iter().zip(zipped.samples()) {
            assert_eq!(a.features(), b.features());
            assert_eq!(a.label(), b.label());
        }
    }

    #[test]
    fn wrong_magic_is_reported_with_offset() {
        let dir = tempfile::tempdir().unwrap();
        // A labels file passed where images are expected.
        let lbl_bytes = idx_labels(&[1, 2]);
        let img = write_temp(&dir, "img", &lbl_bytes);
        let lbl = write_temp(&dir, "lbl", &lbl_bytes);
        match load_idx(&img, &lbl).unwrap_err() {
            Error::IdxFormat { offset, detail, .. } => {
                assert_eq!(offset, 0);
                assert!(detail.contains("0x00000801"), "detail: {detail}");
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn truncation_is_reported_with_offset() {
        let dir = tempfile::tempdir().unwrap();
        let mut img_bytes = idx_images(3, 2, 2, &[0u8; 12]);
        img_bytes.truncate(20); // promises 3 images (28 bytes), delivers 20
        let img = write_temp(&dir, "img", &img_bytes);
        let lbl = write_temp(&dir, "lbl", &idx_labels(&[0, 1, 2]));
        match load_idx(&img, &lbl).unwrap_err() {
            Error::IdxFormat { offset, detail, .. } => {
                assert_eq!(offset, 20);
                assert!(detail.contains("truncated"), "detail: {detail}");
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn count_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let img = write_temp(&dir, "img", &idx_images(2, 2, 2, &[0u8; 8]));
        let lbl = write_temp(&dir, "lbl", &idx_labels(&[0, 1, 2]));
        match load_idx(&img, &lbl).unwrap_err() {
            Error::IdxFormat { offset, detail, .. } => {
                assert_eq!(offset, 4);
                assert!(detail.contains("does not match"), "detail: {detail}");
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn committed_fixture_decodes_to_reference_bytes() {
        // Byte-level reference decode of the three-image fixture in
        // tests/fixtures: 2x2 images with hand-written pixel bytes.
        let base = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
        let ds = load_idx(
            base.join("three-images-idx3-ubyte"),
            base.join("three-labels-idx1-ubyte"),
        )
        .unwrap();

        let expected_pixels: [[u8; 4]; 3] =
            [[0, 51, 102, 153], [204, 255, 0, 128], [7, 77, 147, 217]];
        let expected_labels = [0usize, 1, 2];

        assert_eq!(ds.len(), 3);
        assert_eq!(ds.m(), 4);
        for (i, sample) in ds.samples().iter().enumerate() {
            assert_eq!(sample.label(), Some(expected_labels[i]));
            for (j, &b) in expected_pixels[i].iter().enumerate() {
                assert_eq!(sample.features()[j], b as f64 / 255.0);
            }
        }
    }
}
