//! Worker-pool simulator.
//!
//! Each worker runs on its own thread, computes its coded products in order
//! and reports back over a channel. Every task is stamped twice: with a
//! deterministic virtual clock derived from the task's nonzero count, and
//! with measured wall-clock time. Straggling and noise are driven by seeded
//! per-worker RNG streams, so a run is reproducible from its seed.

use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use thiserror::Error;

use super::matrix::{Matrix, MatrixError};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("worker {worker} task {task}: {source}")]
    Task { worker: usize, task: usize, source: MatrixError },
    #[error("invalid policy: {0}")]
    Policy(String),
}

/// The ordered coded submatrices one worker multiplies by `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkerLoad<T> {
    pub tasks: Vec<Matrix<T>>,
}

impl<T: Real> WorkerLoad<T> {
    pub fn nnz(&self) -> usize {
        self.tasks.iter().map(Matrix::nnz).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum StragglerPolicy {
    #[default]
    None,
    /// These workers never respond.
    Explicit(Vec<usize>),
    /// Every worker starts after an exponential delay with this mean.
    RandomDelay { mean: f64 },
    /// `count` workers chosen uniformly at random never respond.
    FailStopRandom { count: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum NoiseModel {
    #[default]
    None,
    /// Noise power relative to each task's own mean-square output.
    PerTask { snr_db: f64 },
    /// Noise power relative to the mean-square over all task outputs.
    Global { snr_db: f64 },
}

/// Virtual duration of a task: `per_nnz * nnz + per_row * rows`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    pub per_nnz: f64,
    pub per_row: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self { per_nnz: 1e-6, per_row: 1e-7 }
    }
}

impl CostModel {
    pub fn task_time(&self, nnz: usize, rows: usize) -> f64 {
        self.per_nnz * nnz as f64 + self.per_row * rows as f64
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimConfig {
    pub policy: StragglerPolicy,
    pub noise: NoiseModel,
    pub cost: CostModel,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskRecord {
    pub worker: usize,
    pub task_index: usize,
    pub start: f64,
    pub end: f64,
    pub nnz: usize,
    pub wall: Duration,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExecutionTrace {
    /// Sorted by `(worker, task_index)`.
    pub records: Vec<TaskRecord>,
    pub failed: Vec<usize>,
}

impl ExecutionTrace {
    /// CSV `worker,task_index,start,end,nnz` in virtual seconds.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("worker,task_index,start,end,nnz\n");
        for r in &self.records {
            out.push_str(&format!("{},{},{:.9},{:.9},{}\n", r.worker, r.task_index, r.start, r.end, r.nnz));
        }
        out
    }

    /// Virtual time at which worker `w` delivers its last result.
    pub fn finish_time(&self, w: usize) -> Option<f64> {
        if self.failed.contains(&w) {
            return None;
        }
        self.records.iter().filter(|r| r.worker == w).map(|r| r.end).reduce(f64::max)
    }

    /// Virtual compute time of worker `w`, excluding its start delay.
    pub fn busy_time(&self, w: usize) -> f64 {
        self.records.iter().filter(|r| r.worker == w).map(|r| r.end - r.start).sum()
    }

    pub fn wall_time(&self, w: usize) -> Duration {
        self.records.iter().filter(|r| r.worker == w).map(|r| r.wall).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Execution<T> {
    /// Per worker, its task outputs; `None` for failed workers.
    pub outputs: Vec<Option<Vec<Vec<T>>>>,
    pub trace: ExecutionTrace,
}

fn worker_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn mean_square<T: Real>(v: &[T]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().map(|x| x.to_f64().unwrap().powi(2)).sum::<f64>() / v.len() as f64
}

fn add_noise<T: Real>(v: &mut [T], power: f64, snr_db: f64, rng: &mut ChaCha8Rng) {
    let sigma = (power * 10f64.powf(-snr_db / 10.0)).sqrt();
    if sigma == 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("finite noise level");
    for x in v {
        *x += T::from_f64(normal.sample(rng)).unwrap();
    }
}

fn failed_workers(policy: &StragglerPolicy, n: usize, seed: u64) -> Result<Vec<usize>, SimError> {
    let mut failed = match policy {
        StragglerPolicy::Explicit(set) => {
            if let Some(&w) = set.iter().find(|&&w| w >= n) {
                return Err(SimError::Policy(format!("worker {w} does not exist")));
            }
            set.clone()
        }
        StragglerPolicy::FailStopRandom { count } => {
            if *count > n {
                return Err(SimError::Policy(format!("{count} failures among {n} workers")));
            }
            sample(&mut worker_rng(seed, 0), n, *count).into_vec()
        }
        _ => Vec::new(),
    };
    failed.sort_unstable();
    failed.dedup();
    Ok(failed)
}

struct WorkerReport<T> {
    worker: usize,
    outputs: Vec<Vec<T>>,
    records: Vec<TaskRecord>,
}

/// Runs every worker concurrently and gathers all non-failed results.
pub fn run<T: Real>(loads: &[WorkerLoad<T>], x: &[T], cfg: &SimConfig) -> Result<Execution<T>, SimError> {
    let n = loads.len();
    let failed = failed_workers(&cfg.policy, n, cfg.seed)?;
    if let StragglerPolicy::RandomDelay { mean } = cfg.policy {
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(SimError::Policy(format!("delay mean {mean} must be positive")));
        }
    }

    let (tx, rx) = mpsc::channel::<Result<WorkerReport<T>, SimError>>();
    thread::scope(|scope| {
        for (w, load) in loads.iter().enumerate() {
            if failed.contains(&w) {
                continue;
            }
            let tx = tx.clone();
            let cfg = cfg.clone();
            scope.spawn(move || {
                let _ = tx.send(run_worker(w, load, x, &cfg));
            });
        }
    });
    drop(tx);

    let mut outputs: Vec<Option<Vec<Vec<T>>>> = vec![None; n];
    let mut records = Vec::new();
    for report in rx {
        let report = report?;
        records.extend(report.records);
        outputs[report.worker] = Some(report.outputs);
    }

    if let NoiseModel::Global { snr_db } = cfg.noise {
        let all: Vec<T> = outputs.iter().flatten().flatten().flatten().copied().collect();
        let power = mean_square(&all);
        for (w, out) in outputs.iter_mut().enumerate() {
            if let Some(tasks) = out {
                let mut rng = worker_rng(cfg.seed, 2 * w as u64 + 2);
                for t in tasks {
                    add_noise(t, power, snr_db, &mut rng);
                }
            }
        }
    }

    records.sort_by_key(|r| (r.worker, r.task_index));
    Ok(Execution { outputs, trace: ExecutionTrace { records, failed } })
}

fn run_worker<T: Real>(w: usize, load: &WorkerLoad<T>, x: &[T], cfg: &SimConfig) -> Result<WorkerReport<T>, SimError> {
    let mut rng = worker_rng(cfg.seed, 2 * w as u64 + 1);
    let mut clock = match cfg.policy {
        StragglerPolicy::RandomDelay { mean } => Exp::new(1.0 / mean).expect("positive rate").sample(&mut rng),
        _ => 0.0,
    };
    let mut outputs = Vec::with_capacity(load.tasks.len());
    let mut records = Vec::with_capacity(load.tasks.len());
    for (t, m) in load.tasks.iter().enumerate() {
        let began = Instant::now();
        let mut y = m.matvec(x).map_err(|source| SimError::Task { worker: w, task: t, source })?;
        let wall = began.elapsed();
        if let NoiseModel::PerTask { snr_db } = cfg.noise {
            let power = mean_square(&y);
            add_noise(&mut y, power, snr_db, &mut rng);
        }
        let start = clock;
        clock += cfg.cost.task_time(m.nnz(), m.rows());
        records.push(TaskRecord { worker: w, task_index: t, start, end: clock, nnz: m.nnz(), wall });
        outputs.push(y);
    }
    Ok(WorkerReport { worker: w, outputs, records })
}
