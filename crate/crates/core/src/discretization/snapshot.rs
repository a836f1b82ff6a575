//! Binary field container.
//!
//! Layout, all integers little-endian `u32`:
//!
//! ```text
//! magic "CHFS" | version | m | sizes[2m] | dim | rank | flags[rank] (u8)
//! | time (f64) | components * sites * (re f64, im f64)
//! ```
//!
//! Components follow in flat slot order, each a row-major site array.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::{Index, LatticeChart, TensorField};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CHFS";
const VERSION: u32 = 1;

/// Header fields of a snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotHeader {
    pub m: usize,
    pub sizes: Vec<usize>,
    pub time: f64,
}

pub fn write_snapshot<W: Write>(mut w: W, chart: &LatticeChart, field: &TensorField, time: f64) -> Result<()> {
    if field.sites() != chart.sites() {
        return Err(Error::Snapshot("field does not match chart".into()));
    }
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(chart.m() as u32).to_le_bytes())?;
    for &s in chart.sizes() {
        w.write_all(&(s as u32).to_le_bytes())?;
    }
    w.write_all(&(field.dim() as u32).to_le_bytes())?;
    w.write_all(&(field.rank() as u32).to_le_bytes())?;
    for slot in field.shape() {
        w.write_all(&[slot.code()])?;
    }
    w.write_all(&time.to_le_bytes())?;
    for comp in field.components() {
        for v in comp {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<(SnapshotHeader, TensorField)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Snapshot("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Snapshot(format!("unsupported version {version}")));
    }
    let m = read_u32(&mut r)? as usize;
    if m == 0 || m > 64 {
        return Err(Error::Snapshot(format!("implausible m = {m}")));
    }
    let sizes = (0..2 * m).map(|_| read_u32(&mut r).map(|s| s as usize)).collect::<Result<Vec<_>>>()?;
    let dim = read_u32(&mut r)? as usize;
    let rank = read_u32(&mut r)? as usize;
    let mut flags = vec![0u8; rank];
    r.read_exact(&mut flags)?;
    let shape = flags
        .iter()
        .map(|&c| Index::from_code(c).ok_or_else(|| Error::Snapshot(format!("bad variance flag {c}"))))
        .collect::<Result<Vec<_>>>()?;
    let time = read_f64(&mut r)?;
    let sites: usize = sizes.iter().product();
    let count = dim.pow(rank as u32);
    let mut comps = Vec::with_capacity(count);
    for _ in 0..count {
        let mut comp = Vec::with_capacity(sites);
        for _ in 0..sites {
            let re = read_f64(&mut r)?;
            let im = read_f64(&mut r)?;
            comp.push(Complex64::new(re, im));
        }
        comps.push(comp);
    }
    let field = TensorField::from_components(dim, shape, comps)?;
    Ok((SnapshotHeader { m, sizes, time }, field))
}

pub fn write_snapshot_file(path: &Path, chart: &LatticeChart, field: &TensorField, time: f64) -> Result<()> {
    write_snapshot(BufWriter::new(File::create(path)?), chart, field, time)
}

pub fn read_snapshot_file(path: &Path) -> Result<(SnapshotHeader, TensorField)> {
    read_snapshot(BufReader::new(File::open(path)?))
}

/// Plain-text dump, one `site component re im` line per value.
pub fn text_export(field: &TensorField) -> String {
    let mut out = String::new();
    for (c, comp) in field.components().iter().enumerate() {
        for (s, v) in comp.iter().enumerate() {
            out.push_str(&format!("{s} {c} {:.17e} {:.17e}\n", v.re, v.im));
        }
    }
    out
}
