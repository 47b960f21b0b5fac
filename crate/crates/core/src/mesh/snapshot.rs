//! Binary field snapshots.
//!
//! Layout: a 64-byte header followed by little-endian `f64` values in row-major
//! order (x fastest). Header fields, all little-endian:
//!
//! | bytes  | content                                   |
//! |--------|-------------------------------------------|
//! | 0..8   | magic `CHNSFLD1`                          |
//! | 8..16  | `nx` (u64)                                |
//! | 16..24 | `ny` (u64)                                |
//! | 24..32 | kind: 0 cell, 1 x-face, 2 y-face (u64)    |
//! | 32..40 | time (f64)                                |
//! | 40..48 | step index (u64)                          |
//! | 48..56 | boundary mode: 0 box, 1 periodic (u64)    |
//! | 56..64 | reserved, zero                            |
//!
//! Face arrays cover every grid line, including box-boundary faces (stored as
//! exact zeros): `(nx + 1) x ny` x-faces and `nx x (ny + 1)` y-faces in box mode,
//! `nx x ny` of each in periodic mode.

use std::fmt::Write as _;
use std::path::Path;

use super::{BoundaryMode, Grid, ScalarField, VectorField};
use crate::error::{ChnsError, Result};

pub const MAGIC: &[u8; 8] = b"CHNSFLD1";
pub const HEADER_LEN: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Cell,
    XFace,
    YFace,
}

impl FieldKind {
    fn code(self) -> u64 {
        match self {
            FieldKind::Cell => 0,
            FieldKind::XFace => 1,
            FieldKind::YFace => 2,
        }
    }

    fn from_code(c: u64) -> Option<Self> {
        match c {
            0 => Some(FieldKind::Cell),
            1 => Some(FieldKind::XFace),
            2 => Some(FieldKind::YFace),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnapshotHeader {
    pub nx: usize,
    pub ny: usize,
    pub kind: FieldKind,
    pub time: f64,
    pub step: u64,
    pub bc: BoundaryMode,
}

impl SnapshotHeader {
    /// Number of stored values (columns, rows) for this header.
    pub fn shape(&self) -> (usize, usize) {
        let boxed = self.bc == BoundaryMode::Box;
        match self.kind {
            FieldKind::Cell => (self.nx, self.ny),
            FieldKind::XFace => (self.nx + usize::from(boxed), self.ny),
            FieldKind::YFace => (self.nx, self.ny + usize::from(boxed)),
        }
    }
}

pub fn encode(header: &SnapshotHeader, values: &[f64]) -> Vec<u8> {
    let (cols, rows) = header.shape();
    assert_eq!(values.len(), cols * rows, "snapshot payload size mismatch");
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * values.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.nx as u64).to_le_bytes());
    out.extend_from_slice(&(header.ny as u64).to_le_bytes());
    out.extend_from_slice(&header.kind.code().to_le_bytes());
    out.extend_from_slice(&header.time.to_le_bytes());
    out.extend_from_slice(&header.step.to_le_bytes());
    let bc: u64 = match header.bc {
        BoundaryMode::Box => 0,
        BoundaryMode::Periodic => 1,
    };
    out.extend_from_slice(&bc.to_le_bytes());
    out.extend_from_slice(&[0u8; 8]);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<(SnapshotHeader, Vec<f64>)> {
    let bad = |m: &str| ChnsError::Snapshot(m.to_string());
    if bytes.len() < HEADER_LEN {
        return Err(bad("file shorter than the 64-byte header"));
    }
    if &bytes[0..8] != MAGIC {
        return Err(bad("bad magic"));
    }
    let u = |r: std::ops::Range<usize>| u64::from_le_bytes(bytes[r].try_into().unwrap());
    let kind = FieldKind::from_code(u(24..32)).ok_or_else(|| bad("unknown field kind"))?;
    let bc = match u(48..56) {
        0 => BoundaryMode::Box,
        1 => BoundaryMode::Periodic,
        _ => return Err(bad("unknown boundary mode")),
    };
    let header = SnapshotHeader {
        nx: u(8..16) as usize,
        ny: u(16..24) as usize,
        kind,
        time: f64::from_le_bytes(bytes[32..40].try_into().unwrap()),
        step: u(40..48),
        bc,
    };
    let (cols, rows) = header.shape();
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != 8 * cols * rows {
        return Err(bad("payload size does not match header"));
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, values))
}

fn header_for(grid: &Grid, kind: FieldKind, time: f64, step: u64) -> SnapshotHeader {
    SnapshotHeader {
        nx: grid.nx(),
        ny: grid.ny(),
        kind,
        time,
        step,
        bc: grid.bc(),
    }
}

/// Expands the stored x-faces of `u` to the full grid-line layout.
pub fn full_xfaces(u: &VectorField) -> Vec<f64> {
    let g = u.grid();
    let h = header_for(g, FieldKind::XFace, 0.0, 0);
    let (cols, rows) = h.shape();
    let mut out = vec![0.0; cols * rows];
    for j in 0..rows {
        for i in 0..cols {
            if let Some(f) = g.xface_at(i as isize, j as isize) {
                out[j * cols + i] = u.x()[f];
            }
        }
    }
    out
}

pub fn full_yfaces(u: &VectorField) -> Vec<f64> {
    let g = u.grid();
    let h = header_for(g, FieldKind::YFace, 0.0, 0);
    let (cols, rows) = h.shape();
    let mut out = vec![0.0; cols * rows];
    for j in 0..rows {
        for i in 0..cols {
            if let Some(f) = g.yface_at(i as isize, j as isize) {
                out[j * cols + i] = u.y()[f];
            }
        }
    }
    out
}

pub fn encode_scalar(c: &ScalarField, time: f64, step: u64) -> Vec<u8> {
    encode(&header_for(c.grid(), FieldKind::Cell, time, step), c.values())
}

/// Encodes the two velocity components as separate x-face and y-face snapshots.
pub fn encode_vector(u: &VectorField, time: f64, step: u64) -> (Vec<u8>, Vec<u8>) {
    let g = u.grid();
    (
        encode(&header_for(g, FieldKind::XFace, time, step), &full_xfaces(u)),
        encode(&header_for(g, FieldKind::YFace, time, step), &full_yfaces(u)),
    )
}

pub fn write_scalar(path: &Path, c: &ScalarField, time: f64, step: u64) -> Result<()> {
    std::fs::write(path, encode_scalar(c, time, step)).map_err(|e| ChnsError::io(path, e))
}

pub fn write_vector(xpath: &Path, ypath: &Path, u: &VectorField, time: f64, step: u64) -> Result<()> {
    let (bx, by) = encode_vector(u, time, step);
    std::fs::write(xpath, bx).map_err(|e| ChnsError::io(xpath, e))?;
    std::fs::write(ypath, by).map_err(|e| ChnsError::io(ypath, e))
}

pub fn read(path: &Path) -> Result<(SnapshotHeader, Vec<f64>)> {
    let bytes = std::fs::read(path).map_err(|e| ChnsError::io(path, e))?;
    decode(&bytes)
}

/// Rebuilds a cell field from a decoded snapshot on a matching grid.
pub fn scalar_from_snapshot(grid: &Grid, header: &SnapshotHeader, values: Vec<f64>) -> Result<ScalarField> {
    if header.kind != FieldKind::Cell || header.nx != grid.nx() || header.ny != grid.ny() {
        return Err(ChnsError::Snapshot("snapshot does not match grid".into()));
    }
    Ok(ScalarField::from_vec(grid, values))
}

/// CSV export (`i,j,value`) for debugging.
pub fn to_csv(header: &SnapshotHeader, values: &[f64]) -> String {
    let (cols, rows) = header.shape();
    let mut out = String::from("i,j,value\n");
    for j in 0..rows {
        for i in 0..cols {
            let _ = writeln!(out, "{i},{j},{}", values[j * cols + i]);
        }
    }
    out
}
