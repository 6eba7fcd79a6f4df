//! CSV output. Floats use Rust's shortest round-trip formatting, so parsing a
//! written file gives back bit-identical values.

use std::fmt::Write as _;

use delaytrack::oracle::ComparisonReport;
use delaytrack::track::Trajectory;
use delaytrack::init::Eigensolution;

pub const TRAJECTORY_HEADER: &str = "p,s_r,s_i,residual,event";

/// One parsed trajectory row.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub p: f64,
    pub s_r: f64,
    pub s_i: f64,
    pub residual: f64,
    pub events: Vec<String>,
}

/// One row per sample; the event column lists the tags of events attached to
/// that sample, separated by `;`.
pub fn format_trajectory(traj: &Trajectory) -> String {
    let mut tags: Vec<Vec<&str>> = vec![Vec::new(); traj.samples.len()];
    for ev in &traj.events {
        if let Some(t) = tags.get_mut(ev.sample) {
            t.push(ev.kind.tag());
        }
    }
    let mut out = String::with_capacity(64 * traj.samples.len());
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for (st, t) in traj.samples.iter().zip(&tags) {
        let _ = writeln!(out, "{},{},{},{},{}", st.p, st.s_r, st.s_i, st.residual, t.join(";"));
    }
    out
}

pub fn parse_trajectory(text: &str) -> Result<Vec<TrajectoryRow>, String> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == TRAJECTORY_HEADER => {}
        _ => return Err(format!("line 1: expected header '{TRAJECTORY_HEADER}'")),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(format!("line {}: expected 5 fields, got {}", i + 1, f.len()));
        }
        let num = |k: usize| f[k].parse::<f64>().map_err(|_| format!("line {}: bad number '{}'", i + 1, f[k]));
        rows.push(TrajectoryRow {
            p: num(0)?,
            s_r: num(1)?,
            s_i: num(2)?,
            residual: num(3)?,
            events: f[4].split(';').filter(|t| !t.is_empty()).map(str::to_string).collect(),
        });
    }
    Ok(rows)
}

pub fn format_spectrum(sol: &Eigensolution) -> String {
    let mut out = String::from("s_r,s_i,residual\n");
    for e in &sol.entries {
        let _ = writeln!(out, "{},{},{}", e.s.re, e.s.im, e.residual);
    }
    out
}

pub fn format_report(report: &ComparisonReport) -> String {
    let mut out = String::from("p,s_tracked_r,s_tracked_i,s_oracle_r,s_oracle_i,distance,matched\n");
    for c in &report.checkpoints {
        let (or, oi) = c.s_oracle.map_or((String::new(), String::new()), |s| (s.re.to_string(), s.im.to_string()));
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            c.p,
            c.s_tracked.re,
            c.s_tracked.im,
            or,
            oi,
            c.distance,
            c.distance < report.pass_tol
        );
    }
    out
}
