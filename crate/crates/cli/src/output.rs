//! Run artifacts. Floats use Rust's shortest round-trip formatting, which is
//! locale independent.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use mwconsensus::analysis::RunSummary;
use mwconsensus::scenario::OutputFormat;
use mwconsensus::{Scenario, ScenarioFile, TrajectoryRecord};
use serde::Serialize;

#[derive(Serialize)]
struct SummaryFile<'a> {
    scenario_hash: &'a str,
    #[serde(flatten)]
    summary: &'a RunSummary,
}

#[derive(Serialize)]
struct TimingFile {
    wall_clock_seconds: f64,
}

pub fn run_dir(root: &Path, scenario: &Scenario) -> PathBuf {
    root.join(format!("{}-s{}", scenario.hash(), scenario.seed.unwrap_or(0)))
}

fn create(path: &Path) -> io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_trajectory(path: &Path, rec: &TrajectoryRecord) -> io::Result<()> {
    let mut w = create(path)?;
    writeln!(w, "time,agent,dim,x,xhat,qhat")?;
    let d = rec.d;
    for k in 0..rec.len() {
        let t = rec.times[k];
        for i in 0..rec.n {
            for c in 0..d {
                let r = i * d + c;
                writeln!(
                    w,
                    "{t},{},{},{},{},{}",
                    i + 1,
                    c + 1,
                    rec.states[k][r],
                    rec.broadcasts[k][r],
                    rec.controls[k][r]
                )?;
            }
        }
    }
    w.flush()
}

fn write_chi(path: &Path, rec: &TrajectoryRecord) -> io::Result<()> {
    let mut w = create(path)?;
    writeln!(w, "time,agent,chi")?;
    for (t, chi) in rec.times.iter().zip(&rec.chi) {
        for (i, c) in chi.iter().enumerate() {
            writeln!(w, "{t},{},{c}", i + 1)?;
        }
    }
    w.flush()
}

/// Grid order, agents ascending within a grid time.
fn write_events(path: &Path, rec: &TrajectoryRecord) -> io::Result<()> {
    let mut rows: Vec<(usize, usize, f64)> = rec
        .event_steps
        .iter()
        .zip(&rec.events)
        .enumerate()
        .flat_map(|(i, (steps, times))| steps.iter().zip(times).map(move |(&k, &t)| (k, i, t)))
        .collect();
    rows.sort_by_key(|&(k, i, _)| (k, i));
    let mut w = create(path)?;
    writeln!(w, "agent,time")?;
    for (_, i, t) in rows {
        writeln!(w, "{},{t}", i + 1)?;
    }
    w.flush()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    s.push('\n');
    fs::write(path, s)
}

pub struct Artifacts<'a> {
    pub file: &'a ScenarioFile,
    pub scenario: &'a Scenario,
    pub record: &'a TrajectoryRecord,
    pub summary: &'a RunSummary,
    pub elapsed: Duration,
}

/// Writes every artifact into `dir` (created if missing).
pub fn write_all(dir: &Path, a: &Artifacts<'_>) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let formats = &a.file.outputs.formats;
    a.file.save(dir.join("scenario.json")).map_err(|e| match e {
        mwconsensus::Error::Io(io) => io,
        other => io::Error::other(other.to_string()),
    })?;
    if formats.contains(&OutputFormat::Csv) {
        write_trajectory(&dir.join("trajectory.csv"), a.record)?;
        write_chi(&dir.join("chi.csv"), a.record)?;
        write_events(&dir.join("events.csv"), a.record)?;
    }
    if formats.contains(&OutputFormat::Json) {
        let hash = a.scenario.hash();
        write_json(
            &dir.join("summary.json"),
            &SummaryFile {
                scenario_hash: &hash,
                summary: a.summary,
            },
        )?;
        write_json(
            &dir.join("timing.json"),
            &TimingFile {
                wall_clock_seconds: a.elapsed.as_secs_f64(),
            },
        )?;
    }
    Ok(())
}
