//! CSV and JSON output of runs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::dynamics::TrajectoryRecord;
use crate::error::{Error, Result};
use crate::scenario::Outcome;
use crate::spaces::{self, ChartPoint};

pub const TRAJECTORY_HEADER: &str = "t,x1,x2,ax,ay,az,e_native,e_partner";
pub const EVENTS_HEADER: &str = "t,x1,x2,ax,ay,az,wall_index,d_native,d_partner";
pub const INTEGRALS_HEADER: &str = "t,e_native,e_partner,d_native,d_partner";

/// Gnomonic and ambient coordinates of a point; planar points are lifted to
/// their partner surface.
fn coordinates(pos: &ChartPoint, rec: &TrajectoryRecord) -> Result<([f64; 2], [f64; 3])> {
    match pos {
        ChartPoint::Ambient3(q) => {
            let p = spaces::central_project_down(q, &rec.space)?;
            Ok(([p.x, p.y], [q.x, q.y, q.z]))
        }
        ChartPoint::Gnomonic(p) => {
            let q = spaces::central_lift_up(p, &rec.space.partner())?;
            Ok(([p.x, p.y], [q.x, q.y, q.z]))
        }
        ChartPoint::Stereographic(w) => {
            let q = spaces::stereographic_inverse(w, &rec.space)?;
            let p = spaces::central_project_down(&q, &rec.space)?;
            Ok(([p.x, p.y], [q.x, q.y, q.z]))
        }
    }
}

fn row(out: &mut String, values: &[f64]) {
    let cells: Vec<String> = values.iter().map(|v| format!("{v:.16e}")).collect();
    out.push_str(&cells.join(","));
    out.push('\n');
}

/// Samples as rows in the column order of [`TRAJECTORY_HEADER`].
pub fn trajectory_rows(rec: &TrajectoryRecord) -> Result<Vec<[f64; 8]>> {
    rec.samples
        .iter()
        .map(|s| {
            let (p, q) = coordinates(&s.state.pos, rec)?;
            Ok([s.state.t, p[0], p[1], q[0], q[1], q[2], s.energy.e_native, s.energy.e_partner])
        })
        .collect()
}

pub fn trajectory_csv(rec: &TrajectoryRecord) -> Result<String> {
    let mut out = format!("{TRAJECTORY_HEADER}\n");
    for r in trajectory_rows(rec)? {
        row(&mut out, &r);
    }
    Ok(out)
}

pub fn events_csv(rec: &TrajectoryRecord) -> Result<String> {
    let mut out = format!("{EVENTS_HEADER}\n");
    for e in &rec.events {
        let (p, q) = coordinates(&e.pos, rec)?;
        let cells = [e.t, p[0], p[1], q[0], q[1], q[2]].map(|v| format!("{v:.16e}"));
        let _ = writeln!(
            out,
            "{},{},{:.16e},{:.16e}",
            cells.join(","),
            e.wall_index,
            e.native_jump(),
            e.partner_jump()
        );
    }
    Ok(out)
}

pub fn integrals_csv(rec: &TrajectoryRecord) -> String {
    let mut out = format!("{INTEGRALS_HEADER}\n");
    if let Some(first) = rec.samples.first() {
        let e0 = first.energy;
        for s in &rec.samples {
            let e = s.energy;
            row(&mut out, &[s.state.t, e.e_native, e.e_partner, e.e_native - e0.e_native, e.e_partner - e0.e_partner]);
        }
    }
    out
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))
}

/// Write every artifact of an outcome into `dir`.
pub fn write_outcome(outcome: &Outcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    if let Some(rec) = &outcome.record {
        write(dir, "trajectory.csv", &trajectory_csv(rec)?)?;
        write(dir, "events.csv", &events_csv(rec)?)?;
        write(dir, "integrals.csv", &integrals_csv(rec))?;
    }
    if let Some(tw) = &outcome.twin {
        write(dir, "planar_twin.csv", &trajectory_csv(&tw.planar)?)?;
    }
    if !outcome.orbits.is_empty() {
        write(dir, "orbits.json", &serde_json::to_string_pretty(&outcome.orbits).expect("orbits serialize"))?;
    }
    if !outcome.images.is_empty() {
        write(dir, "images.json", &serde_json::to_string_pretty(&outcome.images).expect("images serialize"))?;
    }
    write(dir, "report.json", &outcome.report.to_json())
}
