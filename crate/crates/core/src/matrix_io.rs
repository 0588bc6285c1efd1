//! Flat binary sidecar for dense square matrices.
//!
//! Layout: 8-byte magic `IPPMAT01`, `n` as little-endian u64, then `n²`
//! little-endian f64 values in row-major order.

use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{IppError, Result};

pub const MAGIC: &[u8; 8] = b"IPPMAT01";

pub fn encode_matrix(n: usize, data: &[f64]) -> Vec<u8> {
    assert_eq!(data.len(), n * n);
    let mut out = Vec::with_capacity(16 + 8 * data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(n as u64).to_le_bytes());
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_matrix(bytes: &[u8]) -> Result<(usize, Vec<f64>)> {
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(IppError::MatrixFile("bad magic".into()));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let expected = n
        .checked_mul(n)
        .and_then(|nn| nn.checked_mul(8))
        .and_then(|b| b.checked_add(16))
        .ok_or_else(|| IppError::MatrixFile("size overflow".into()))?;
    if bytes.len() != expected {
        return Err(IppError::MatrixFile(format!(
            "expected {expected} bytes for n = {n}, found {}",
            bytes.len()
        )));
    }
    let data = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((n, data))
}

pub fn write_matrix(path: &Path, n: usize, data: &[f64]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| IppError::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&encode_matrix(n, data))
        .and_then(|_| w.flush())
        .map_err(|e| IppError::io(path, e))
}

pub fn read_matrix(path: &Path) -> Result<(usize, Vec<f64>)> {
    let bytes = std::fs::read(path).map_err(|e| IppError::io(path, e))?;
    decode_matrix(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let bytes = encode_matrix(2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(&bytes[..8], b"IPPMAT01");
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 2);
        assert_eq!(f64::from_le_bytes(bytes[24..32].try_into().unwrap()), 2.0);
        assert_eq!(bytes.len(), 16 + 32);
    }

    #[test]
    fn rejects_truncated() {
        let mut bytes = encode_matrix(2, &[1.0, 2.0, 3.0, 4.0]);
        bytes.pop();
        assert!(decode_matrix(&bytes).is_err());
        assert!(decode_matrix(b"IPPMAT02\0\0\0\0\0\0\0\0").is_err());
    }

    proptest! {
        #[test]
        fn round_trip(n in 0usize..6, seed in proptest::collection::vec(-1e6f64..1e6, 36)) {
            let data: Vec<f64> = seed.into_iter().take(n * n).collect();
            let (m, back) = decode_matrix(&encode_matrix(n, &data)).unwrap();
            prop_assert_eq!(m, n);
            prop_assert_eq!(back, data);
        }
    }
}
