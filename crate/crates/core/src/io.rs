//! Binary tensor files, sample stacks, masks and label lists.
//!
//! A tensor record is the ASCII magic `TNS1`, then `n1`, `n2`, `n3` as
//! little-endian `u32`, then `n1 * n2 * n3` little-endian `f64` values in the
//! in-memory order of [`Tensor3`]. A sample stack is a plain concatenation of
//! records. A mask is a record whose entries are all `0` or `1`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::loss::Mask;
use crate::tensor::{Dims, Tensor3};

pub const MAGIC: &[u8; 4] = b"TNS1";
const HEADER_LEN: usize = 16;

fn format_err(offset: usize, reason: impl Into<String>) -> Error {
    Error::Format {
        offset: offset as u64,
        reason: reason.into(),
    }
}

/// Appends one encoded record to `out`.
pub fn encode_tensor(x: &Tensor3, out: &mut Vec<u8>) -> Result<()> {
    let d = x.dims();
    let mut header = [0u32; 3];
    for (slot, (name, n)) in header
        .iter_mut()
        .zip([("n1", d.n1), ("n2", d.n2), ("n3", d.n3)])
    {
        *slot = u32::try_from(n)
            .map_err(|_| Error::param(name, format!("{n} does not fit in 32 bits")))?;
    }
    out.reserve(HEADER_LEN + 8 * x.len());
    out.extend_from_slice(MAGIC);
    for n in header {
        out.extend_from_slice(&n.to_le_bytes());
    }
    for v in x.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(())
}

/// Decodes the record starting at `bytes[start..]`. Returns the tensor and the
/// offset just past it. Error offsets are absolute positions in `bytes`.
pub fn decode_tensor(bytes: &[u8], start: usize) -> Result<(Tensor3, usize)> {
    let rest = &bytes[start..];
    if rest.len() < HEADER_LEN {
        return Err(format_err(
            bytes.len(),
            format!("truncated header: {} of {HEADER_LEN} bytes", rest.len()),
        ));
    }
    if &rest[..4] != MAGIC {
        return Err(format_err(start, "bad magic, expected TNS1"));
    }
    let dim = |k: usize| {
        u32::from_le_bytes(rest[4 + 4 * k..8 + 4 * k].try_into().expect("4 bytes")) as usize
    };
    let dims = Dims::new(dim(0), dim(1), dim(2));
    let payload = dims
        .n1
        .checked_mul(dims.n2)
        .and_then(|n| n.checked_mul(dims.n3))
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| format_err(start + 4, format!("dimensions {dims} overflow")))?;
    let body = &rest[HEADER_LEN..];
    if body.len() < payload {
        return Err(format_err(
            bytes.len(),
            format!(
                "truncated payload: {} of {payload} bytes for {dims}",
                body.len()
            ),
        ));
    }
    let mut data = Vec::with_capacity(payload / 8);
    for (k, chunk) in body[..payload].chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        if !v.is_finite() {
            return Err(format_err(
                start + HEADER_LEN + 8 * k,
                format!("non-finite value {v}"),
            ));
        }
        data.push(v);
    }
    Ok((Tensor3::from_vec(dims, data)?, start + HEADER_LEN + payload))
}

pub fn write_tensor(path: impl AsRef<Path>, x: &Tensor3) -> Result<()> {
    let mut out = Vec::new();
    encode_tensor(x, &mut out)?;
    fs::write(path, out)?;
    Ok(())
}

/// Reads a file holding exactly one record.
pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor3> {
    let bytes = fs::read(path)?;
    let (x, end) = decode_tensor(&bytes, 0)?;
    if end != bytes.len() {
        return Err(format_err(
            end,
            format!("{} trailing bytes", bytes.len() - end),
        ));
    }
    Ok(x)
}

pub fn write_tensor_stack(path: impl AsRef<Path>, xs: &[Tensor3]) -> Result<()> {
    let mut out = Vec::new();
    for x in xs {
        encode_tensor(x, &mut out)?;
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a concatenation of records, all of the same shape.
pub fn read_tensor_stack(path: impl AsRef<Path>) -> Result<Vec<Tensor3>> {
    let bytes = fs::read(path)?;
    let mut xs: Vec<Tensor3> = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let (x, next) = decode_tensor(&bytes, pos)?;
        if let Some(first) = xs.first() {
            if first.dims() != x.dims() {
                return Err(format_err(
                    pos,
                    format!(
                        "record {} is {}, expected {}",
                        xs.len(),
                        x.dims(),
                        first.dims()
                    ),
                ));
            }
        }
        xs.push(x);
        pos = next;
    }
    Ok(xs)
}

pub fn write_mask(path: impl AsRef<Path>, mask: &Mask) -> Result<()> {
    write_tensor(path, &mask.to_tensor())
}

/// Reads a record whose entries must all be `0` or `1`.
pub fn read_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let t = read_tensor(path)?;
    if let Some(k) = t.as_slice().iter().position(|&v| v != 0.0 && v != 1.0) {
        return Err(format_err(
            HEADER_LEN + 8 * k,
            format!("mask entry {} is not 0 or 1", t.as_slice()[k]),
        ));
    }
    Ok(Mask::from_tensor(&t))
}

/// One label per line.
pub fn write_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    let text: String = labels.iter().map(|y| format!("{y}\n")).collect();
    fs::write(path, text)?;
    Ok(())
}

/// Reads one `0` or `1` per line; blank lines are skipped.
pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let text = fs::read_to_string(path)?;
    let mut labels = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let token = line.trim();
        if !token.is_empty() {
            match token.parse::<u8>() {
                Ok(y @ (0 | 1)) => labels.push(y),
                _ => return Err(format_err(offset, format!("label `{token}` is not 0 or 1"))),
            }
        }
        offset += line.len();
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_tensor;

    #[test]
    fn record_layout() {
        let x = Tensor3::from_vec((2, 1, 1), vec![1.0, -2.5]).unwrap();
        let mut out = Vec::new();
        encode_tensor(&x, &mut out).unwrap();
        let mut expected = b"TNS1".to_vec();
        for n in [2u32, 1, 1] {
            expected.extend_from_slice(&n.to_le_bytes());
        }
        expected.extend_from_slice(&1.0f64.to_le_bytes());
        expected.extend_from_slice(&(-2.5f64).to_le_bytes());
        assert_eq!(out, expected);
        assert_eq!(decode_tensor(&out, 0).unwrap(), (x, out.len()));
    }

    #[test]
    fn decode_errors_carry_offsets() {
        let x = random_tensor((2, 2, 1), 1);
        let mut good = Vec::new();
        encode_tensor(&x, &mut good).unwrap();

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(
            decode_tensor(&bad, 0),
            Err(Error::Format { offset: 0, .. })
        ));

        let cut = &good[..good.len() - 3];
        assert!(
            matches!(decode_tensor(cut, 0), Err(Error::Format { offset, .. }) if offset == cut.len() as u64)
        );
        assert!(matches!(
            decode_tensor(&good[..10], 0),
            Err(Error::Format { offset: 10, .. })
        ));

        let mut nan = good.clone();
        nan[16 + 8 * 2..16 + 8 * 3].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(
            decode_tensor(&nan, 0),
            Err(Error::Format { offset: 32, .. })
        ));
    }

    #[test]
    fn label_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("labels.txt");
        write_labels(&p, &[1, 0, 0, 1]).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "1\n0\n0\n1\n");
        assert_eq!(read_labels(&p).unwrap(), vec![1, 0, 0, 1]);

        fs::write(&p, "0\n\n1\r\n").unwrap();
        assert_eq!(read_labels(&p).unwrap(), vec![0, 1]);
        fs::write(&p, "0\n1\n2\n").unwrap();
        assert!(matches!(
            read_labels(&p),
            Err(Error::Format { offset: 4, .. })
        ));
    }
}
