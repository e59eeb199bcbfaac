//! On-disk simulation artifacts consumed by `decode`.
//!
//! A dump directory holds `manifest.toml`, the execution `trace.csv`, the
//! exact product `reference.bin` and, per scheme:
//!
//! * CP: `grid.csv` with columns `col,row,value_file,known`, one line per
//!   occupied grid position; known symbols live in `sym_<col>_<row>.bin`.
//! * RS: `responses.csv` with columns
//!   `worker,task_index,point_index,point,end,value_file`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use cpcode::codegen::CodeParams;
use cpcode::peeling::SymbolGrid;
use cpcode::planner::{build_plan, JobPlan};
use cpcode::rs_baseline::{RsConfig, RsResponse};
use cpcode::runtime::io::{load_vector, save_vector};
use cpcode::runtime::sim::Execution;

use crate::config::Config;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Cp,
    Rs,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Cp => "cp",
            Scheme::Rs => "rs",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub scheme: Scheme,
    pub n: usize,
    /// CP message count; unused for RS.
    pub k: usize,
    pub delta: usize,
    pub jobs_per_worker: usize,
    pub rows: usize,
    pub block_len: usize,
    pub seed: u64,
}

impl Manifest {
    pub fn render(&self) -> String {
        format!(
            "scheme = \"{}\"\nn = {}\nk = {}\ndelta = {}\njobs_per_worker = {}\nrows = {}\nblock_len = {}\nseed = {}\n",
            self.scheme.name(),
            self.n,
            self.k,
            self.delta,
            self.jobs_per_worker,
            self.rows,
            self.block_len,
            self.seed
        )
    }

    pub fn read(dir: &Path) -> Result<Self, CliError> {
        let cfg = Config::load(Some(&dir.join("manifest.toml")))?;
        let need = |key: &str| -> Result<usize, CliError> {
            cfg.usize(key)?.ok_or_else(|| CliError::io(format!("manifest lacks '{key}'")))
        };
        let scheme = match cfg.string("scheme")?.as_deref() {
            Some("cp") => Scheme::Cp,
            Some("rs") => Scheme::Rs,
            other => return Err(CliError::io(format!("manifest scheme {other:?}"))),
        };
        Ok(Self {
            scheme,
            n: need("n")?,
            k: need("k")?,
            delta: need("delta")?,
            jobs_per_worker: need("jobs_per_worker")?,
            rows: need("rows")?,
            block_len: need("block_len")?,
            seed: cfg.u64("seed")?.unwrap_or(0),
        })
    }

    pub fn plan(&self) -> Result<JobPlan, CliError> {
        Ok(build_plan(CodeParams::new(self.n, self.k)?, self.delta)?)
    }

    pub fn rs_config(&self) -> Result<RsConfig<f64>, CliError> {
        Ok(RsConfig::new(self.n, self.delta, self.jobs_per_worker)?)
    }
}

fn write(path: PathBuf, text: &str) -> Result<(), CliError> {
    fs::write(&path, text).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

/// Writes the manifest, trace, reference and the CP symbols of `used` workers.
pub fn write_cp(
    dir: &Path,
    manifest: &Manifest,
    plan: &JobPlan,
    exec: &Execution<f64>,
    used: &[usize],
    reference: &[f64],
) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    write(dir.join("manifest.toml"), &manifest.render())?;
    write(dir.join("trace.csv"), &exec.trace.to_csv())?;
    save_vector(&dir.join("reference.bin"), reference)?;
    let mut grid = String::from("col,row,value_file,known\n");
    for (j, w) in plan.workers().iter().enumerate() {
        let outputs = exec.outputs[j].as_ref().filter(|_| used.contains(&j));
        for t in 0..w.len() {
            let row = w.offset + t as i64;
            match outputs {
                Some(out) => {
                    let file = format!("sym_{j}_{row}.bin");
                    save_vector(&dir.join(&file), &out[t])?;
                    writeln!(grid, "{j},{row},{file},1").unwrap();
                }
                None => writeln!(grid, "{j},{row},,0").unwrap(),
            }
        }
    }
    write(dir.join("grid.csv"), &grid)
}

/// Rebuilds the partially known grid from a dump.
pub fn read_cp(dir: &Path, manifest: &Manifest, plan: &JobPlan) -> Result<SymbolGrid<f64>, CliError> {
    let mut grid = SymbolGrid::for_plan(plan, manifest.block_len);
    let mut rdr = csv::Reader::from_path(dir.join("grid.csv"))?;
    for rec in rdr.records() {
        let rec = rec?;
        let bad = || CliError::io(format!("malformed grid.csv line {:?}", rec.position().map(|p| p.line())));
        let col: usize = rec.get(0).and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        let row: i64 = rec.get(1).and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        if col >= manifest.n {
            return Err(bad());
        }
        if rec.get(3) == Some("1") {
            let value = load_vector(&dir.join(rec.get(2).ok_or_else(bad)?))?;
            grid.set_symbol(row, col, value).map_err(|e| CliError::io(format!("grid.csv: {e}")))?;
        }
    }
    Ok(grid)
}

pub fn write_rs(
    dir: &Path,
    manifest: &Manifest,
    cfg: &RsConfig<f64>,
    exec: &Execution<f64>,
    reference: &[f64],
) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    write(dir.join("manifest.toml"), &manifest.render())?;
    write(dir.join("trace.csv"), &exec.trace.to_csv())?;
    save_vector(&dir.join("reference.bin"), reference)?;
    let mut arrivals: Vec<_> = exec.trace.records.iter().filter(|r| exec.outputs[r.worker].is_some()).collect();
    arrivals.sort_by(|a, b| a.end.total_cmp(&b.end).then((a.worker, a.task_index).cmp(&(b.worker, b.task_index))));
    let mut out = String::from("worker,task_index,point_index,point,end,value_file\n");
    for r in arrivals {
        let p = cfg.worker_points(r.worker)[r.task_index];
        let file = format!("resp_{}_{}.bin", r.worker, r.task_index);
        save_vector(&dir.join(&file), &exec.outputs[r.worker].as_ref().unwrap()[r.task_index])?;
        writeln!(out, "{},{},{p},{:?},{:.9},{file}", r.worker, r.task_index, cfg.points()[p], r.end).unwrap();
    }
    write(dir.join("responses.csv"), &out)
}

/// Responses in arrival order.
pub fn read_rs(dir: &Path) -> Result<Vec<RsResponse<f64>>, CliError> {
    let mut rdr = csv::Reader::from_path(dir.join("responses.csv"))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let point: f64 = rec.get(3).and_then(|v| v.parse().ok()).ok_or_else(|| CliError::io("malformed responses.csv"))?;
        let value = load_vector(&dir.join(rec.get(5).unwrap_or_default()))?;
        out.push(RsResponse { point, value });
    }
    Ok(out)
}

pub fn read_reference(dir: &Path) -> Result<Option<Vec<f64>>, CliError> {
    let p = dir.join("reference.bin");
    if p.exists() {
        Ok(Some(load_vector(&p)?))
    } else {
        Ok(None)
    }
}
