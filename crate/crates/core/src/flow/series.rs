use std::io::{Read, Write};
use std::path::Path;

use super::DiagnosticsRecord;
use crate::error::{Error, Result};

/// CSV with a header row; floats carry 17 significant digits so a re-read
/// reproduces every value exactly.
pub fn write_series<W: Write>(w: W, series: &[DiagnosticsRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let Some(first) = series.first() else {
        out.write_record(DiagnosticsRecord::BASE_COLUMNS)?;
        out.flush()?;
        return Ok(());
    };
    let columns = first.columns();
    out.write_record(&columns)?;
    for r in series {
        if r.columns() != columns {
            return Err(Error::Series(format!("record at t = {} has different columns", r.t)));
        }
        let row: Vec<String> = r
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| if i == 2 { r.step.to_string() } else { format!("{v:.16e}") })
            .collect();
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_series<R: Read>(r: R) -> Result<Vec<DiagnosticsRecord>> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    let base = DiagnosticsRecord::BASE_COLUMNS.len();
    if let Some(missing) = DiagnosticsRecord::BASE_COLUMNS.iter().zip(&header).find(|(a, b)| *a != b).map(|(a, _)| a) {
        return Err(Error::Series(format!("missing column `{missing}`")));
    }
    if header.len() < base {
        return Err(Error::Series(format!("missing column `{}`", DiagnosticsRecord::BASE_COLUMNS[header.len()])));
    }
    let mut hm = Vec::new();
    let (mut na, mut nm) = (0, 0);
    for h in &header[base..] {
        if let Some(m) = h.strip_prefix("hm_") {
            hm.push(m.parse::<usize>().map_err(|_| Error::Series(format!("bad column `{h}`")))?);
        } else if h.starts_with("a_") {
            na += 1;
        } else if h.starts_with("mean_") {
            nm += 1;
        } else {
            return Err(Error::Series(format!("unknown column `{h}`")));
        }
    }
    let mut series = Vec::new();
    for (line, row) in rd.records().enumerate() {
        let row = row?;
        if row.len() != header.len() {
            return Err(Error::Series(format!("row {} has {} fields, header has {}", line + 2, row.len(), header.len())));
        }
        let v: Vec<f64> = row
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| Error::Series(format!("row {}: bad number `{s}`", line + 2))))
            .collect::<Result<_>>()?;
        let step = row[2].parse::<usize>().map_err(|_| Error::Series(format!("row {}: bad step `{}`", line + 2, &row[2])))?;
        let rest = &v[base..];
        series.push(DiagnosticsRecord {
            t: v[0],
            dt: v[1],
            step,
            max_tr_bg: v[3],
            max_tr_gb: v[4],
            min_eig: v[5],
            max_s: v[6],
            g_max: v[7],
            w_inf: v[8],
            r2_l2: v[9],
            r2_max: v[10],
            offdiag_max: v[11],
            variation: v[12],
            hm: hm.iter().copied().zip(rest[..hm.len()].iter().copied()).collect(),
            a: rest[hm.len()..hm.len() + na].to_vec(),
            means: rest[hm.len() + na..hm.len() + na + nm].to_vec(),
        });
    }
    Ok(series)
}

pub fn write_series_file(path: &Path, series: &[DiagnosticsRecord]) -> Result<()> {
    write_series(std::io::BufWriter::new(std::fs::File::create(path)?), series)
}

pub fn read_series_file(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    read_series(std::io::BufReader::new(std::fs::File::open(path)?))
}
