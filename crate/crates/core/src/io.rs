//! Bit-exact binary carriers for matrices and label vectors.
//!
//! Matrix files (`.w2sm`): magic `W2SM`, version u32 LE = 1, rows u64 LE,
//! cols u64 LE, then rows*cols IEEE-754 `f32` values, little-endian,
//! row-major. File length is exactly `24 + 4 * rows * cols` bytes.
//!
//! Label files (`.w2sl`): magic `W2SL`, version u32 LE = 1, count u64 LE,
//! count u32 LE class indices, a UTF-8 JSON array of class names, and the
//! JSON byte length as a final u32 LE.
//!
//! Payload values are stored as `f32`; writing narrows in-memory `f64`
//! values, so write->read round trips are bit-identical exactly when the
//! source values are `f32`-representable (e.g. anything previously read
//! from a file).

use std::fs;
use std::io::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::matrix::Matrix;

pub const MATRIX_MAGIC: [u8; 4] = *b"W2SM";
pub const LABEL_MAGIC: [u8; 4] = *b"W2SL";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: bad magic {found:?}, expected {expected:?}")]
    BadMagic {
        path: String,
        found: [u8; 4],
        expected: [u8; 4],
    },

    #[error("{path}: unsupported format version {found}, expected {expected}")]
    BadVersion {
        path: String,
        found: u32,
        expected: u32,
    },

    #[error("{path}: truncated or mis-sized file: expected {expected} bytes, found {actual}")]
    Truncated {
        path: String,
        expected: u64,
        actual: u64,
    },

    #[error("{path}: label {label} at position {position} out of range for {classes} class names")]
    LabelOutOfRange {
        path: String,
        label: u32,
        position: usize,
        classes: usize,
    },

    #[error("{path}: malformed class-name footer: {reason}")]
    BadFooter { path: String, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("test pool too small to split: {n} samples, need at least 5")]
    SplitTooSmall { n: usize },

    #[error("split plan incomplete: {reason}")]
    PlanIncomplete { reason: String },

    #[error("invalid split plan JSON: {reason}")]
    BadPlan { reason: String },
}

fn io_err(path: &Path, source: std::io::Error) -> DataError {
    DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes a matrix file; values are narrowed to `f32`.
pub fn write_matrix(path: &Path, m: &Matrix) -> Result<(), DataError> {
    let mut buf =
        Vec::with_capacity(24 + 4 * m.rows() * m.cols());
    buf.extend_from_slice(&MATRIX_MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    buf.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.as_slice() {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    let mut f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(&buf).map_err(|e| io_err(path, e))?;
    Ok(())
}

/// Reads a matrix file, validating magic, version, and exact length.
pub fn read_matrix(path: &Path) -> Result<Matrix, DataError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let p = || path.display().to_string();
    if bytes.len() < 24 {
        return Err(DataError::Truncated {
            path: p(),
            expected: 24,
            actual: bytes.len() as u64,
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().expect("4 bytes");
    if magic != MATRIX_MAGIC {
        return Err(DataError::BadMagic {
            path: p(),
            found: magic,
            expected: MATRIX_MAGIC,
        });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(DataError::BadVersion {
            path: p(),
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let cols = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes"));
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(24));
    if expected != Some(bytes.len() as u64) {
        return Err(DataError::Truncated {
            path: p(),
            expected: expected.unwrap_or(u64::MAX),
            actual: bytes.len() as u64,
        });
    }
    let n = (rows * cols) as usize;
    let mut data = Vec::with_capacity(n);
    for chunk in bytes[24..].chunks_exact(4) {
        data.push(f32::from_le_bytes(chunk.try_into().expect("4 bytes")) as f64);
    }
    Matrix::from_vec(rows as usize, cols as usize, data).map_err(|e| DataError::BadPlan {
        reason: e.to_string(),
    })
}

/// Writes a label file with its class-name footer. Every index must
/// reference a class name.
pub fn write_labels(
    path: &Path,
    labels: &[u32],
    class_names: &[String],
) -> Result<(), DataError> {
    for (position, &label) in labels.iter().enumerate() {
        if label as usize >= class_names.len() {
            return Err(DataError::LabelOutOfRange {
                path: path.display().to_string(),
                label,
                position,
                classes: class_names.len(),
            });
        }
    }
    let footer = serde_json::to_vec(class_names).expect("string list serializes");
    let mut buf = Vec::with_capacity(16 + 4 * labels.len() + footer.len() + 4);
    buf.extend_from_slice(&LABEL_MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(labels.len() as u64).to_le_bytes());
    for l in labels {
        buf.extend_from_slice(&l.to_le_bytes());
    }
    buf.extend_from_slice(&footer);
    buf.extend_from_slice(&(footer.len() as u32).to_le_bytes());
    let mut f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(&buf).map_err(|e| io_err(path, e))?;
    Ok(())
}

/// Reads a label file, returning `(labels, class_names)`.
pub fn read_labels(path: &Path) -> Result<(Vec<u32>, Vec<String>), DataError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let p = || path.display().to_string();
    if bytes.len() < 20 {
        return Err(DataError::Truncated {
            path: p(),
            expected: 20,
            actual: bytes.len() as u64,
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().expect("4 bytes");
    if magic != LABEL_MAGIC {
        return Err(DataError::BadMagic {
            path: p(),
            found: magic,
            expected: LABEL_MAGIC,
        });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(DataError::BadVersion {
            path: p(),
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let count = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let footer_len = u32::from_le_bytes(
        bytes[bytes.len() - 4..].try_into().expect("4 bytes"),
    ) as u64;
    let expected = count
        .checked_mul(4)
        .and_then(|n| n.checked_add(16 + footer_len + 4));
    if expected != Some(bytes.len() as u64) {
        return Err(DataError::Truncated {
            path: p(),
            expected: expected.unwrap_or(u64::MAX),
            actual: bytes.len() as u64,
        });
    }
    let labels_end = 16 + 4 * count as usize;
    let mut labels = Vec::with_capacity(count as usize);
    for chunk in bytes[16..labels_end].chunks_exact(4) {
        labels.push(u32::from_le_bytes(chunk.try_into().expect("4 bytes")));
    }
    let footer = &bytes[labels_end..bytes.len() - 4];
    let class_names: Vec<String> =
        serde_json::from_slice(footer).map_err(|e| DataError::BadFooter {
            path: p(),
            reason: e.to_string(),
        })?;
    for (position, &label) in labels.iter().enumerate() {
        if label as usize >= class_names.len() {
            return Err(DataError::LabelOutOfRange {
                path: p(),
                label,
                position,
                classes: class_names.len(),
            });
        }
    }
    Ok((labels, class_names))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn one_by_one_matrix_is_28_bytes_and_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.w2sm");
        let m = Matrix::from_vec(1, 1, vec![0.0]).unwrap();
        write_matrix(&path, &m).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), 28);
        assert_eq!(read_matrix(&path).unwrap(), m);
    }

    #[test]
    fn payload_bytes_are_ieee754_le_row_major() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.w2sm");
        let vals = [1.5f64, -2.25, 0.125, 3.0, -0.5, 1e10];
        let m = Matrix::from_vec(2, 3, vals.to_vec()).unwrap();
        write_matrix(&path, &m).unwrap();
        let bytes = fs::read(&path).unwrap();
        // Hand-built byte oracle for the payload.
        let mut expect = Vec::new();
        for v in vals {
            expect.extend_from_slice(&(v as f32).to_le_bytes());
        }
        assert_eq!(&bytes[24..], &expect[..]);
        assert_eq!(&bytes[0..4], b"W2SM");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 3);
    }

    #[test]
    fn corruption_yields_distinct_errors() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.w2sm");
        let m = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        write_matrix(&path, &m).unwrap();
        let good = fs::read(&path).unwrap();

        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        fs::write(&path, &bad_magic).unwrap();
        assert!(matches!(read_matrix(&path), Err(DataError::BadMagic { .. })));

        let mut bad_version = good.clone();
        bad_version[4] = 9;
        fs::write(&path, &bad_version).unwrap();
        assert!(matches!(
            read_matrix(&path),
            Err(DataError::BadVersion { found: 9, .. })
        ));

        let truncated = &good[..good.len() - 1];
        fs::write(&path, truncated).unwrap();
        assert!(matches!(
            read_matrix(&path),
            Err(DataError::Truncated { .. })
        ));

        let mut overlong = good.clone();
        overlong.push(0);
        fs::write(&path, &overlong).unwrap();
        assert!(matches!(
            read_matrix(&path),
            Err(DataError::Truncated { .. })
        ));
    }

    #[test]
    fn labels_round_trip_with_names() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("l.w2sl");
        let labels = vec![0u32, 2, 1, 2, 0];
        let names = vec!["cat".to_string(), "dog".to_string(), "bird".to_string()];
        write_labels(&path, &labels, &names).unwrap();
        let (l2, n2) = read_labels(&path).unwrap();
        assert_eq!(l2, labels);
        assert_eq!(n2, names);
    }

    #[test]
    fn labels_reject_out_of_range_and_corruption() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("l.w2sl");
        let names = vec!["a".to_string(), "b".to_string()];
        assert!(matches!(
            write_labels(&path, &[0, 3], &names),
            Err(DataError::LabelOutOfRange { label: 3, .. })
        ));

        write_labels(&path, &[0, 1, 1], &names).unwrap();
        let good = fs::read(&path).unwrap();
        let mut bad_magic = good.clone();
        bad_magic[3] = b'X';
        fs::write(&path, &bad_magic).unwrap();
        assert!(matches!(read_labels(&path), Err(DataError::BadMagic { .. })));

        let truncated = &good[..good.len() - 2];
        fs::write(&path, truncated).unwrap();
        assert!(matches!(
            read_labels(&path),
            Err(DataError::Truncated { .. })
        ));
    }
}
