//! Binary matrix and dictionary files.
//!
//! Matrix file: magic `FLMAT1`, rows and cols as u64 little-endian, then the
//! entries column-major as f64 little-endian.
//!
//! Dictionary file: magic `FLDICT1`, atom dimension `d`, atom count `K` and
//! class count `L` as u64 little-endian, `K` per-atom labels as u64
//! little-endian, then the `d x K` atoms column-major as f64 little-endian.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{FusionError, Result};
use crate::sparsecoding::Dictionary;

pub const MATRIX_MAGIC: &[u8; 6] = b"FLMAT1";
pub const DICT_MAGIC: &[u8; 7] = b"FLDICT1";

pub fn encode_matrix(m: &DMatrix<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(MATRIX_MAGIC.len() + 16 + 8 * m.len());
    out.extend_from_slice(MATRIX_MAGIC);
    out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for v in m.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_matrix(bytes: &[u8]) -> Result<DMatrix<f64>> {
    let mut r = Reader::new(bytes);
    r.magic(MATRIX_MAGIC)?;
    let rows = r.u64()? as usize;
    let cols = r.u64()? as usize;
    let data = r.f64s(rows.checked_mul(cols).ok_or_else(|| format_err("matrix size overflow"))?)?;
    r.finish()?;
    Ok(DMatrix::from_vec(rows, cols, data))
}

pub fn encode_dictionary(dict: &Dictionary) -> Vec<u8> {
    let atoms = dict.atoms();
    let mut out = Vec::with_capacity(DICT_MAGIC.len() + 24 + 8 * (dict.len() + atoms.len()));
    out.extend_from_slice(DICT_MAGIC);
    for v in [dict.dim(), dict.len(), dict.classes()] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for &l in dict.labels() {
        out.extend_from_slice(&(l as u64).to_le_bytes());
    }
    for v in atoms.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_dictionary(bytes: &[u8]) -> Result<Dictionary> {
    let mut r = Reader::new(bytes);
    r.magic(DICT_MAGIC)?;
    let d = r.u64()? as usize;
    let k = r.u64()? as usize;
    let classes = r.u64()? as usize;
    let mut labels = Vec::with_capacity(k.min(1 << 20));
    for _ in 0..k {
        labels.push(r.u64()? as usize);
    }
    let data = r.f64s(d.checked_mul(k).ok_or_else(|| format_err("dictionary size overflow"))?)?;
    r.finish()?;
    Dictionary::new(DMatrix::from_vec(d, k, data), labels, classes).map_err(|e| format_err(&e.to_string()))
}

pub fn write_matrix(m: &DMatrix<f64>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_matrix(m))?;
    Ok(())
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    decode_matrix(&fs::read(path)?)
}

pub fn write_dictionary(dict: &Dictionary, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_dictionary(dict))?;
    Ok(())
}

pub fn read_dictionary(path: impl AsRef<Path>) -> Result<Dictionary> {
    decode_dictionary(&fs::read(path)?)
}

fn format_err(msg: &str) -> FusionError {
    FusionError::Format(msg.to_string())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(format_err("unexpected end of file"));
        };
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn magic(&mut self, magic: &[u8]) -> Result<()> {
        if self.take(magic.len())? != magic {
            return Err(format_err("bad magic"));
        }
        Ok(())
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| format_err("size overflow"))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(format_err("trailing bytes after payload"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matrix_layout_is_column_major_le() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let bytes = encode_matrix(&m);
        assert_eq!(&bytes[..6], b"FLMAT1");
        assert_eq!(&bytes[6..14], &2u64.to_le_bytes());
        assert_eq!(&bytes[14..22], &2u64.to_le_bytes());
        assert_eq!(&bytes[22..30], &1.0f64.to_le_bytes());
        assert_eq!(&bytes[30..38], &3.0f64.to_le_bytes());
        assert_eq!(bytes.len(), 22 + 32);
    }

    #[test]
    fn dictionary_roundtrip() {
        let atoms = DMatrix::from_column_slice(2, 3, &[1.0, 0.0, 0.0, 1.0, 0.6, 0.8]);
        let dict = Dictionary::new(atoms, vec![0, 2, 6], 6).unwrap();
        let bytes = encode_dictionary(&dict);
        assert_eq!(&bytes[..7], b"FLDICT1");
        assert_eq!(decode_dictionary(&bytes).unwrap(), dict);
    }

    #[test]
    fn truncated_and_bad_magic_rejected() {
        let bytes = encode_matrix(&DMatrix::from_element(3, 3, 0.5));
        assert!(decode_matrix(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_matrix(&bad).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(decode_matrix(&long).is_err());
    }

    proptest! {
        #[test]
        fn matrix_roundtrip(rows in 0usize..6, cols in 0usize..6, vals in proptest::collection::vec(-1e6f64..1e6, 36)) {
            let m = DMatrix::from_fn(rows, cols, |r, c| vals[r * 6 + c]);
            prop_assert_eq!(decode_matrix(&encode_matrix(&m)).unwrap(), m);
        }
    }
}
