//! CSV and JSON records of the zeta and E tables.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use smectic_core::director::ETable;
use smectic_core::halfplane::{ZetaTable, ZetaValue};
use smectic_core::halfspace::{EllRun, SurfaceEnergy};

use crate::error::{Error, Result};

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// One node of the zeta table. `truncation_err` is empty when not computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZetaRow {
    pub nu_rad: f64,
    pub zeta: f64,
    pub residual: f64,
    pub truncation_err: Option<f64>,
}

/// Full node record as kept in the cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZetaRecord {
    pub nu: f64,
    pub zeta: f64,
    pub residual: f64,
    pub xi: f64,
    pub truncation_err: Option<f64>,
    pub flagged: bool,
    pub matvecs: usize,
}

impl From<&ZetaValue> for ZetaRecord {
    fn from(v: &ZetaValue) -> Self {
        ZetaRecord {
            nu: v.nu,
            zeta: v.zeta,
            residual: v.residual,
            xi: v.xi,
            truncation_err: finite(v.truncation_err),
            flagged: v.flagged,
            matvecs: v.matvecs,
        }
    }
}

impl From<&ZetaRecord> for ZetaValue {
    fn from(r: &ZetaRecord) -> Self {
        ZetaValue {
            nu: r.nu,
            zeta: r.zeta,
            residual: r.residual,
            xi: r.xi,
            truncation_err: r.truncation_err.unwrap_or(f64::NAN),
            flagged: r.flagged,
            matvecs: r.matvecs,
        }
    }
}

impl From<&ZetaValue> for ZetaRow {
    fn from(v: &ZetaValue) -> Self {
        ZetaRow {
            nu_rad: v.nu,
            zeta: v.zeta,
            residual: v.residual,
            truncation_err: finite(v.truncation_err),
        }
    }
}

pub fn write_zeta_csv<W: Write>(w: W, table: &ZetaTable) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for e in &table.entries {
        out.serialize(ZetaRow::from(e)).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads the CSV columns back; `xi` and solver counters are not stored there.
pub fn read_zeta_csv<R: Read>(r: R) -> Result<ZetaTable> {
    let mut rows = Vec::new();
    for row in csv::Reader::from_reader(r).deserialize::<ZetaRow>() {
        let row = row.map_err(csv_err)?;
        rows.push(ZetaValue {
            nu: row.nu_rad,
            zeta: row.zeta,
            residual: row.residual,
            xi: f64::NAN,
            truncation_err: row.truncation_err.unwrap_or(f64::NAN),
            flagged: false,
            matvecs: 0,
        });
    }
    Ok(ZetaTable::from_entries(rows)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ERunRecord {
    pub ell: f64,
    pub d_value: f64,
    pub normalized: f64,
    pub converged: bool,
    pub lambda1: Option<f64>,
    pub iterations: usize,
}

/// One `(b_frak, nu)` point with all its box runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ERecord {
    pub b_frak: f64,
    pub nu: f64,
    pub estimate: f64,
    pub err_bar: f64,
    pub bracket_c: f64,
    pub converged: bool,
    pub flagged: bool,
    pub weak_decay: bool,
    pub runs: Vec<ERunRecord>,
}

impl From<&SurfaceEnergy> for ERecord {
    fn from(s: &SurfaceEnergy) -> Self {
        ERecord {
            b_frak: s.b_frak,
            nu: s.nu,
            estimate: s.estimate,
            err_bar: s.err_bar,
            bracket_c: s.bracket_c,
            converged: s.converged,
            flagged: s.flagged,
            weak_decay: s.weak_decay,
            runs: s
                .runs
                .iter()
                .map(|r| ERunRecord {
                    ell: r.ell,
                    d_value: r.d_value,
                    normalized: r.normalized,
                    converged: r.converged,
                    lambda1: r.lambda1,
                    iterations: r.iterations,
                })
                .collect(),
        }
    }
}

impl From<&ERecord> for SurfaceEnergy {
    fn from(r: &ERecord) -> Self {
        SurfaceEnergy {
            b_frak: r.b_frak,
            nu: r.nu,
            estimate: r.estimate,
            err_bar: r.err_bar,
            bracket_c: r.bracket_c,
            runs: r
                .runs
                .iter()
                .map(|x| EllRun {
                    ell: x.ell,
                    d_value: x.d_value,
                    normalized: x.normalized,
                    converged: x.converged,
                    lambda1: x.lambda1,
                    iterations: x.iterations,
                })
                .collect(),
            converged: r.converged,
            flagged: r.flagged,
            weak_decay: r.weak_decay,
        }
    }
}

/// One CSV line per box run; the point estimate repeats on each of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ERow {
    pub b_frak: f64,
    pub nu_rad: f64,
    pub ell: f64,
    pub d_value: f64,
    #[serde(rename = "E_estimate")]
    pub e_estimate: f64,
    pub err_bar: f64,
    pub converged: bool,
}

pub fn e_rows(records: &[ERecord]) -> Vec<ERow> {
    records
        .iter()
        .flat_map(|r| {
            r.runs.iter().map(move |x| ERow {
                b_frak: r.b_frak,
                nu_rad: r.nu,
                ell: x.ell,
                d_value: x.d_value,
                e_estimate: r.estimate,
                err_bar: r.err_bar,
                converged: x.converged,
            })
        })
        .collect()
}

pub fn write_e_csv<W: Write>(w: W, records: &[ERecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in e_rows(records) {
        out.serialize(row).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_e_csv<R: Read>(r: R) -> Result<Vec<ERow>> {
    csv::Reader::from_reader(r)
        .deserialize::<ERow>()
        .map(|row| row.map_err(csv_err))
        .collect()
}

/// One [`ETable`] per distinct `b_frak`, keyed by its bit pattern order.
pub fn e_tables(rows: &[ERow]) -> Result<Vec<ETable>> {
    let mut by_b: BTreeMap<u64, BTreeMap<u64, (f64, f64, f64)>> = BTreeMap::new();
    for r in rows {
        by_b.entry(r.b_frak.to_bits())
            .or_default()
            .insert(r.nu_rad.to_bits(), (r.nu_rad, r.e_estimate, r.err_bar));
    }
    let mut out = Vec::new();
    for (b_bits, pts) in by_b {
        let mut pts: Vec<_> = pts.into_values().collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        out.push(ETable::new(
            f64::from_bits(b_bits),
            pts.iter().map(|p| p.0).collect(),
            pts.iter().map(|p| p.1.min(0.0)).collect(),
            pts.iter().map(|p| p.2).collect(),
        )?);
    }
    out.sort_by(|a, b| a.b_frak.total_cmp(&b.b_frak));
    Ok(out)
}
