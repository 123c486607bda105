//! On-disk formats for feature matrices.
//!
//! Binary layout (all integers little-endian):
//!
//! ```text
//! magic      4 bytes   b"RGFM"
//! version    u16       1
//! family     u8        family tag
//! reserved   u8        0
//! S          u64       rows
//! k          u64       columns
//! prov_len   u32       length of the provenance blob
//! provenance prov_len  UTF-8 JSON
//! data       S*k f64   row-major
//! ```
//!
//! The CSV form has a header `f0,f1,...` and one row per state.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::features::{Family, FeatureMatrix, Provenance};
use crate::linalg::Matrix;

const MAGIC: &[u8; 4] = b"RGFM";
const VERSION: u16 = 1;

pub fn write_binary<W: Write>(features: &FeatureMatrix, mut out: W) -> Result<()> {
    let phi = features.phi();
    let (s, k) = phi.shape();
    let prov = serde_json::to_vec(features.provenance())
        .map_err(|e| Error::Format(format!("provenance encoding: {e}")))?;
    let prov_len = u32::try_from(prov.len())
        .map_err(|_| Error::Format("provenance blob too large".into()))?;
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&[features.family().tag(), 0])?;
    out.write_all(&(s as u64).to_le_bytes())?;
    out.write_all(&(k as u64).to_le_bytes())?;
    out.write_all(&prov_len.to_le_bytes())?;
    out.write_all(&prov)?;
    for i in 0..s {
        for j in 0..k {
            out.write_all(&phi[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_array<const N: usize, R: Read>(input: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    input
        .read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated header: {e}")))?;
    Ok(buf)
}

pub fn read_binary<R: Read>(mut input: R) -> Result<FeatureMatrix> {
    if &read_array::<4, _>(&mut input)? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = u16::from_le_bytes(read_array(&mut input)?);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let [tag, _] = read_array::<2, _>(&mut input)?;
    let family = Family::from_tag(tag)?;
    let s = u64::from_le_bytes(read_array(&mut input)?) as usize;
    let k = u64::from_le_bytes(read_array(&mut input)?) as usize;
    let prov_len = u32::from_le_bytes(read_array(&mut input)?) as usize;
    let mut prov = vec![0u8; prov_len];
    input
        .read_exact(&mut prov)
        .map_err(|e| Error::Format(format!("truncated provenance: {e}")))?;
    let provenance: Provenance = serde_json::from_slice(&prov)
        .map_err(|e| Error::Format(format!("provenance: {e}")))?;
    let cells = s
        .checked_mul(k)
        .ok_or_else(|| Error::Format(format!("implausible shape {s}x{k}")))?;
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() != cells * 8 {
        return Err(Error::Format(format!(
            "expected {} payload bytes for {s}x{k}, found {}",
            cells * 8,
            bytes.len()
        )));
    }
    let data: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    FeatureMatrix::new(Matrix::from_row_slice(s, k, &data), family, provenance)
}

/// Scientific notation with 17 significant digits, enough for an exact
/// round trip of any `f64`.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<W: Write>(features: &FeatureMatrix, out: W) -> Result<()> {
    let phi = features.phi();
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<String> = (0..phi.ncols()).map(|j| format!("f{j}")).collect();
    w.write_record(&header).map_err(csv_err)?;
    for row in phi.row_iter() {
        w.write_record(row.iter().map(|x| format_f64(*x))).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an externally produced feature matrix (one row per state). A header
/// row is expected.
pub fn read_csv<R: Read>(input: R, family: Family) -> Result<FeatureMatrix> {
    let mut reader = csv::Reader::from_reader(input);
    let mut data = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(Error::Format(format!(
                    "row {i} has {} fields, expected {c}",
                    record.len()
                )))
            }
            _ => {}
        }
        for field in record.iter() {
            let x: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("row {i}: `{field}` is not a number")))?;
            data.push(x);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::Format("feature CSV has no rows".into()))?;
    FeatureMatrix::new(
        Matrix::from_row_slice(rows, cols, &data),
        family,
        Provenance::default(),
    )
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("csv: {e}"))
}
