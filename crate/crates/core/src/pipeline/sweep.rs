//! Cartesian sweeps over (model, n, |L|, ε) and their table outputs.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{RunConfig, SweepPoint};
use super::{bootstrap_run, low_rank_approx, BootstrapRecord, LowRankRecord, WitnessRecord};
use crate::entropy::{imax_seesaw, mutual_info};
use crate::error::{Error, Result};
use crate::models::{solve, GroundSpaceRecord};

pub const TABLE_CSV: &str = "table.csv";
pub const PLOT_CSV: &str = "plotdata.csv";
pub const RESULTS_JSON: &str = "results.json";

/// One row of `table.csv`. Everything here is a pure function of the
/// configuration, so the table is byte-stable for a fixed seed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub model: String,
    pub n: usize,
    #[serde(rename = "L")]
    pub left: usize,
    pub eps: f64,
    pub r: Option<usize>,
    pub gamma: Option<f64>,
    #[serde(rename = "I_omega")]
    pub i_omega: Option<f64>,
    pub imax_upper: Option<f64>,
    pub smoothed_upper: Option<f64>,
    pub halt_k: Option<usize>,
    pub sr: Option<usize>,
    pub distance: Option<f64>,
    pub lowrank_distance: Option<f64>,
    pub status: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct PointResult {
    pub point: SweepPoint,
    pub row: SweepRow,
    pub ground: Option<GroundSpaceRecord>,
    pub records: Vec<BootstrapRecord>,
    pub witnesses: Vec<WitnessRecord>,
    pub lowrank: Option<LowRankRecord>,
    pub anomaly: bool,
    pub error: Option<String>,
    pub exit_code: i32,
    pub wall_time: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepOutput {
    pub results: Vec<PointResult>,
}

impl SweepOutput {
    /// Worst exit code over the points: 0 when every point succeeded.
    pub fn exit_code(&self) -> i32 {
        self.results.iter().map(|p| p.exit_code).max().unwrap_or(0)
    }
}

/// Runs one point. Failures are captured in the row's status, never raised.
pub fn run_point(cfg: &RunConfig, point: &SweepPoint) -> PointResult {
    let start = Instant::now();
    let mut row = SweepRow {
        model: point.model.clone(),
        n: point.n,
        left: point.left,
        eps: point.epsilon,
        r: None,
        gamma: None,
        i_omega: None,
        imax_upper: None,
        smoothed_upper: None,
        halt_k: None,
        sr: None,
        distance: None,
        lowrank_distance: None,
        status: String::new(),
    };
    let mut res = PointResult {
        point: point.clone(),
        row: row.clone(),
        ground: None,
        records: Vec::new(),
        witnesses: Vec::new(),
        lowrank: None,
        anomaly: false,
        error: None,
        exit_code: 0,
        wall_time: 0.0,
    };
    let outcome = fill_point(cfg, point, &mut row, &mut res);
    match outcome {
        Ok(()) => row.status = if res.anomaly { "anomaly".into() } else { "ok".into() },
        Err(e) => {
            row.status = e.kind().to_string();
            res.exit_code = e.exit_code();
            res.error = Some(e.to_string());
        }
    }
    res.row = row;
    res.wall_time = start.elapsed().as_secs_f64();
    res
}

fn fill_point(cfg: &RunConfig, point: &SweepPoint, row: &mut SweepRow, res: &mut PointResult) -> Result<()> {
    let chain = point.chain()?;
    let bcfg = cfg.bootstrap_config(point)?;
    let (_, gs) = solve(&chain)?;
    row.r = Some(gs.r);
    row.gamma = Some(gs.gamma);
    res.ground = Some(gs.record());
    row.i_omega = Some(mutual_info(gs.omega.as_substate(), &bcfg.cut)?);

    match bootstrap_run(&gs, &bcfg) {
        Ok(run) => {
            row.imax_upper = Some(run.initial.value);
            row.smoothed_upper = Some(run.smoothed.value);
            row.halt_k = run.halted_at;
            row.distance = Some(run.distance());
            res.anomaly = run.anomaly.is_some();
            res.witnesses = run.witnesses.iter().map(|w| w.record()).collect();
            res.records = run.records;
        }
        Err(e) => {
            // still report the unsmoothed bound
            row.imax_upper = imax_seesaw(gs.omega.as_substate(), &bcfg.cut, &bcfg.seesaw).ok().map(|m| m.value);
            return Err(e);
        }
    }
    if cfg.bootstrap.lowrank {
        let lr = low_rank_approx(&gs, &bcfg)?;
        row.sr = Some(lr.schmidt_rank);
        row.lowrank_distance = Some(lr.distance);
        res.lowrank = Some(lr.record());
    }
    Ok(())
}

/// Runs every point of the configuration on a pool of `output.threads`
/// workers. Results come back in configuration order regardless of scheduling.
pub fn run_sweep(cfg: &RunConfig) -> Result<SweepOutput> {
    let points = cfg.points();
    let threads = cfg.output.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Resource(format!("cannot start worker pool: {e}")))?;
    let results = pool.install(|| points.par_iter().map(|p| run_point(cfg, p)).collect());
    Ok(SweepOutput { results })
}

#[derive(Serialize)]
struct PlotRow<'a> {
    series: &'a str,
    n: usize,
    eps: f64,
    x: f64,
    y: f64,
    #[serde(rename = "I_omega")]
    i_omega: Option<f64>,
}

pub fn write_table(out: &SweepOutput, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for p in &out.results {
        w.serialize(&p.row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// x = log₂|L|, y = the smoothed bound in bits; one series per model.
pub fn write_plotdata(out: &SweepOutput, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for p in &out.results {
        let Some(y) = p.row.smoothed_upper else { continue };
        w.serialize(PlotRow {
            series: &p.row.model,
            n: p.row.n,
            eps: p.row.eps,
            x: (p.row.left as f64).log2(),
            y,
            i_omega: p.row.i_omega,
        })
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_outputs(out: &SweepOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_table(out, &dir.join(TABLE_CSV))?;
    write_plotdata(out, &dir.join(PLOT_CSV))?;
    let json = serde_json::to_string_pretty(out).expect("sweep output serializes");
    std::fs::write(dir.join(RESULTS_JSON), json)?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}
