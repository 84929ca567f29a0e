//! CSV energy logs, singular-value tables and comparison reports.

use std::path::Path;

use crate::diagnostics::EnergyRecord;
use crate::error::{Error, Result};
use crate::io::binary::write_atomic;
use crate::pod::SnapshotSet;

pub const ENERGY_HEADER: [&str; 7] = ["t", "energy", "modified_energy", "dissipation", "xi0", "mass", "eq_drift"];

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

pub fn energy_csv_bytes(log: &[EnergyRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(ENERGY_HEADER).map_err(csv_err)?;
    for r in log {
        w.write_record([
            format!("{:e}", r.t),
            format!("{:e}", r.energy),
            opt(r.modified_energy),
            opt(r.dissipation),
            opt(r.xi0),
            opt(r.mass),
            opt(r.eq_drift),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn write_energy_csv(path: &Path, log: &[EnergyRecord]) -> Result<()> {
    write_atomic(path, &energy_csv_bytes(log)?)
}

pub fn parse_energy_csv(bytes: &[u8]) -> Result<Vec<EnergyRecord>> {
    let mut rd = csv::Reader::from_reader(bytes);
    let header = rd.headers().map_err(csv_err)?.clone();
    if header.iter().ne(ENERGY_HEADER) {
        return Err(Error::Format(format!("unexpected energy-log header {header:?}")));
    }
    let field = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse::<f64>()
                .map(Some)
                .map_err(|e| Error::Format(format!("bad number `{s}`: {e}")))
        }
    };
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let get = |i: usize| field(rec.get(i).unwrap_or(""));
        out.push(EnergyRecord {
            t: get(0)?.ok_or_else(|| Error::Format("missing t".into()))?,
            energy: get(1)?.ok_or_else(|| Error::Format("missing energy".into()))?,
            modified_energy: get(2)?,
            dissipation: get(3)?,
            xi0: get(4)?,
            mass: get(5)?,
            eq_drift: get(6)?,
        });
    }
    Ok(out)
}

pub fn read_energy_csv(path: &Path) -> Result<Vec<EnergyRecord>> {
    parse_energy_csv(&std::fs::read(path)?)
}

/// `index,sigma_phi,sigma_q`, one row per singular value (1-based index).
pub fn write_singular_values(path: &Path, sigma_phi: &[f64], sigma_q: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "sigma_phi", "sigma_q"]).map_err(csv_err)?;
    for (i, (a, b)) in sigma_phi.iter().zip(sigma_q).enumerate() {
        w.write_record([(i + 1).to_string(), format!("{a:e}"), format!("{b:e}")])
            .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}

/// One row of a full-order versus reduced-order comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareRow {
    pub t: f64,
    /// `||phi_rom - phi_fom|| / ||phi_fom||`.
    pub state_error: f64,
    /// `|E_rom - E_fom| / |E_fom(0)|`.
    pub energy_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    pub max_state_error: f64,
    pub mean_state_error: f64,
    pub max_energy_error: f64,
    pub mean_energy_error: f64,
}

fn energy_at(log: &[EnergyRecord], t: f64) -> Option<f64> {
    let dt = if log.len() > 1 { (log[1].t - log[0].t).abs() } else { 1.0 };
    log.iter()
        .find(|r| (r.t - t).abs() <= 1e-6 * dt.max(1e-300))
        .map(|r| r.energy)
}

/// Compares a reduced trajectory against full-order snapshots at the common
/// sample times.
pub fn compare(
    fom_energy: &[EnergyRecord],
    rom_energy: &[EnergyRecord],
    fom: &SnapshotSet,
    rom: &SnapshotSet,
) -> Result<CompareReport> {
    if fom.grid != rom.grid {
        return Err(Error::Dimension("trajectories live on different grids".into()));
    }
    let e0 = fom_energy
        .first()
        .map(|r| r.energy.abs())
        .ok_or_else(|| Error::Format("empty full-order energy log".into()))?;
    let mut rows = Vec::new();
    for (j, &t) in rom.times.iter().enumerate() {
        let Some(i) = fom.times.iter().position(|&s| (s - t).abs() <= 1e-9 * t.abs().max(1.0)) else {
            continue;
        };
        let f = fom.phi.column(i);
        let r = rom.phi.column(j);
        let denom = f.norm();
        let state_error = if denom > 0.0 { (r - f).norm() / denom } else { (r - f).norm() };
        let ef = energy_at(fom_energy, t);
        let er = energy_at(rom_energy, t);
        let energy_error = match (ef, er) {
            (Some(a), Some(b)) => (a - b).abs() / e0.max(f64::MIN_POSITIVE),
            _ => f64::NAN,
        };
        rows.push(CompareRow {
            t,
            state_error,
            energy_error,
        });
    }
    if rows.is_empty() {
        return Err(Error::Format("no common sample times".into()));
    }
    let n = rows.len() as f64;
    let finite_e: Vec<f64> = rows.iter().map(|r| r.energy_error).filter(|v| v.is_finite()).collect();
    Ok(CompareReport {
        max_state_error: rows.iter().map(|r| r.state_error).fold(0.0, f64::max),
        mean_state_error: rows.iter().map(|r| r.state_error).sum::<f64>() / n,
        max_energy_error: finite_e.iter().copied().fold(0.0, f64::max),
        mean_energy_error: if finite_e.is_empty() {
            f64::NAN
        } else {
            finite_e.iter().sum::<f64>() / finite_e.len() as f64
        },
        rows,
    })
}

/// `t,state_error,energy_error` rows followed by `max` and `mean` summary rows.
pub fn write_compare_report(path: &Path, rep: &CompareReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "state_error", "energy_error"]).map_err(csv_err)?;
    for r in &rep.rows {
        w.write_record([format!("{:e}", r.t), format!("{:e}", r.state_error), format!("{:e}", r.energy_error)])
            .map_err(csv_err)?;
    }
    w.write_record(["max".to_string(), format!("{:e}", rep.max_state_error), format!("{:e}", rep.max_energy_error)])
        .map_err(csv_err)?;
    w.write_record(["mean".to_string(), format!("{:e}", rep.mean_state_error), format!("{:e}", rep.mean_energy_error)])
        .map_err(csv_err)?;
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}
