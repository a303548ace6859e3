//! CSV writers. Numbers use the shortest representation that reads back to
//! the same `f64`, so identical runs produce identical files.
//!
//! | file | header |
//! |------|--------|
//! | weights | `n,j,omega_nj,eta_n` |
//! | probe trace | `t,u1_x,u1_y,u2_x,u2_y` |
//! | energy ledger | `term,value`, ending with a `residual_rel` row |
//! | convergence | `k,error,order` (`NaN` where no order is defined) |
//! | mesh vertices | `vertex,x,y` |
//! | mesh triangles | `triangle,v0,v1,v2` |
//! | mesh boundary | `v0,v1,side,tag` |

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::convergence::ConvergenceTable;
use crate::diagnostics::EnergyLedger;
use crate::error::Result;
use crate::fem::{BoundaryTag, Mesh};
use crate::stepper::ProbeTrace;
use crate::weights::{TimeGrid, WeightTable};

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "FRACVISCO_OUTPUT_DIR";

/// The output directory: `$FRACVISCO_OUTPUT_DIR` if set and nonempty,
/// otherwise `configured`.
pub fn resolve_output_dir(configured: &str) -> PathBuf {
    match std::env::var(OUTPUT_DIR_ENV) {
        Ok(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => PathBuf::from(configured),
    }
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(csv::Writer::from_path(path)?)
}

fn num(x: f64) -> String {
    let a = x.abs();
    if x.is_nan() {
        "NaN".into()
    } else if x == 0.0 || (1e-4..1e15).contains(&a) || a.is_infinite() {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

pub fn write_weights(path: &Path, w: &WeightTable) -> Result<()> {
    let mut out = writer(path)?;
    out.write_record(["n", "j", "omega_nj", "eta_n"])?;
    for n in 1..=w.len() {
        let eta = num(w.eta(n));
        for (j, &omega) in w.row(n).iter().enumerate() {
            out.write_record([n.to_string(), (j + 1).to_string(), num(omega), eta.clone()])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_probe_trace(path: &Path, grid: &TimeGrid, probe: &ProbeTrace) -> Result<()> {
    let mut out = writer(path)?;
    out.write_record(["t", "u1_x", "u1_y", "u2_x", "u2_y"])?;
    for (i, (u1, u2)) in probe.u1.iter().zip(&probe.u2).enumerate() {
        out.write_record([
            num(grid.t(i)),
            num(u1[0]),
            num(u1[1]),
            num(u2[0]),
            num(u2[1]),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// File names for several probes: `probe_trace.csv` for the first, then
/// `probe_trace_1.csv`, `probe_trace_2.csv`, and so on.
pub fn probe_file_name(index: usize) -> String {
    if index == 0 {
        "probe_trace.csv".into()
    } else {
        format!("probe_trace_{index}.csv")
    }
}

pub fn write_ledger(path: &Path, ledger: &EnergyLedger) -> Result<()> {
    let mut out = writer(path)?;
    out.write_record(["term", "value"])?;
    for (name, value) in ledger.terms() {
        out.write_record([name.to_string(), num(value)])?;
    }
    out.write_record(["residual_rel".to_string(), num(ledger.residual_rel())])?;
    out.flush()?;
    Ok(())
}

pub fn write_convergence(path: &Path, table: &ConvergenceTable) -> Result<()> {
    let mut out = writer(path)?;
    out.write_record(["k", "error", "order"])?;
    for r in &table.rows {
        out.write_record([num(r.k), num(r.error), num(r.order.unwrap_or(f64::NAN))])?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `vertices.csv`, `triangles.csv` and `boundary.csv` into `dir`.
pub fn write_mesh(dir: &Path, mesh: &Mesh) -> Result<()> {
    let mut v = writer(&dir.join("vertices.csv"))?;
    v.write_record(["vertex", "x", "y"])?;
    for (i, p) in mesh.vertices.iter().enumerate() {
        v.write_record([i.to_string(), num(p[0]), num(p[1])])?;
    }
    v.flush()?;
    let mut t = writer(&dir.join("triangles.csv"))?;
    t.write_record(["triangle", "v0", "v1", "v2"])?;
    for (i, tri) in mesh.triangles.iter().enumerate() {
        t.write_record([
            i.to_string(),
            tri[0].to_string(),
            tri[1].to_string(),
            tri[2].to_string(),
        ])?;
    }
    t.flush()?;
    let mut b = writer(&dir.join("boundary.csv"))?;
    b.write_record(["v0", "v1", "side", "tag"])?;
    for e in &mesh.boundary_edges {
        let tag = match e.tag {
            BoundaryTag::Dirichlet => "dirichlet",
            BoundaryTag::Neumann => "neumann",
        };
        b.write_record([
            e.vertices[0].to_string(),
            e.vertices[1].to_string(),
            e.side.to_string(),
            tag.into(),
        ])?;
    }
    b.flush()?;
    Ok(())
}

/// Writes `text` verbatim, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    File::create(path)?.write_all(text.as_bytes())?;
    Ok(())
}
