//! File formats: fvecs/ivecs (standard ANN benchmark layout) and a
//! plain-text vector format for tests.
//!
//! fvecs layout, bit-exact: repeated records of
//! `[int32 little-endian d][d x float32 little-endian]`. ivecs is identical
//! with an int32 payload and is used for ground-truth id lists.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::store::StoreError;

fn read_record_header(
    reader: &mut impl Read,
    first: bool,
) -> Result<Option<usize>, StoreError> {
    let mut dim_bytes = [0u8; 4];
    match reader.read_exact(&mut dim_bytes) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
            return if first {
                Err(StoreError::EmptyFile)
            } else {
                Ok(None)
            };
        }
        Err(e) => return Err(e.into()),
    }
    let dim = i32::from_le_bytes(dim_bytes);
    if dim <= 0 {
        return Err(StoreError::MalformedFile(format!(
            "record dimension {dim} is not positive"
        )));
    }
    Ok(Some(dim as usize))
}

fn read_vecs<T, P: AsRef<Path>>(
    path: P,
    decode: impl Fn([u8; 4]) -> T,
) -> Result<(Vec<Vec<T>>, usize), StoreError> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut rows: Vec<Vec<T>> = Vec::new();
    let mut dimension = 0usize;

    while let Some(dim) = read_record_header(&mut reader, rows.is_empty())? {
        if dimension == 0 {
            dimension = dim;
        } else if dim != dimension {
            return Err(StoreError::MalformedFile(format!(
                "inconsistent record dimension: expected {dimension}, got {dim}"
            )));
        }
        let mut payload = vec![0u8; dim * 4];
        reader.read_exact(&mut payload).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                StoreError::MalformedFile(format!(
                    "truncated record {} (expected {} payload bytes)",
                    rows.len(),
                    dim * 4
                ))
            } else {
                StoreError::Io(e)
            }
        })?;
        let row = payload
            .chunks_exact(4)
            .map(|c| decode([c[0], c[1], c[2], c[3]]))
            .collect();
        rows.push(row);
    }
    Ok((rows, dimension))
}

/// Reads an fvecs file; returns the rows and the per-record dimension.
pub fn read_fvecs<P: AsRef<Path>>(path: P) -> Result<(Vec<Vec<f32>>, usize), StoreError> {
    read_vecs(path, f32::from_le_bytes)
}

/// Reads an ivecs file (int32 payload, e.g. ground-truth neighbor ids).
pub fn read_ivecs<P: AsRef<Path>>(path: P) -> Result<(Vec<Vec<i32>>, usize), StoreError> {
    read_vecs(path, i32::from_le_bytes)
}

pub fn write_fvecs<P: AsRef<Path>>(path: P, rows: &[Vec<f32>]) -> Result<(), StoreError> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in rows {
        w.write_all(&(row.len() as i32).to_le_bytes())?;
        for &c in row {
            w.write_all(&c.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_ivecs<P: AsRef<Path>>(path: P, rows: &[Vec<i32>]) -> Result<(), StoreError> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in rows {
        w.write_all(&(row.len() as i32).to_le_bytes())?;
        for &c in row {
            w.write_all(&c.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Plain-text vectors: one per line, whitespace-separated decimals.
pub fn read_txt_vectors<P: AsRef<Path>>(path: P) -> Result<Vec<Vec<f32>>, StoreError> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Result<Vec<f32>, _> = line.split_whitespace().map(str::parse).collect();
        match row {
            Ok(row) => rows.push(row),
            Err(e) => {
                return Err(StoreError::MalformedFile(format!(
                    "line {}: {e}",
                    lineno + 1
                )))
            }
        }
    }
    Ok(rows)
}
