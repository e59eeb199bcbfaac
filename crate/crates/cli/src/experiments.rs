//! The two comparison experiments: output error under additive noise, and
//! worker compute time on banded sparse matrices.

use std::time::{Duration, Instant};

use cpcode::codegen::{build_generator, lambda_of, CodeParams};
use cpcode::peeling::DecodeMode;
use cpcode::planner::{build_plan, choose_delta, sparsity_report, stored_sparsity, JobPlan, StorageBudget};
use cpcode::rs_baseline::RsConfig;
use cpcode::runtime::master::{cp_recover, error_percentage, rs_recover, Collection, CpDeployment, RsDeployment};
use cpcode::runtime::matrix::{band_for_sparsity, gen_banded, gen_dense, gen_vector, Matrix};
use cpcode::runtime::sim::{run, CostModel, NoiseModel, SimConfig, StragglerPolicy, WorkerLoad};
use cpcode::PolyMat;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::CliError;

/// A CSV table plus the settings that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub id: String,
    pub config: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ExperimentReport {
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// The settings as flat `key = "value"` lines, loadable with `--config`.
    pub fn config_echo(&self) -> String {
        let mut out = format!("# {}\n", self.id);
        for (k, v) in &self.config {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}

/// Builds the CP plan for `(n, k)` under storage fraction `gamma`.
pub fn plan_for_budget(params: CodeParams, gamma: StorageBudget) -> Result<JobPlan, CliError> {
    let g: PolyMat = build_generator(params)?;
    let lambda = lambda_of(&g)?;
    let delta = choose_delta(params, gamma, lambda)?;
    Ok(build_plan(params, delta)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseReference {
    /// Each task's noise is scaled to that task's output power.
    #[default]
    Task,
    /// Noise is scaled to the mean output power over all tasks.
    Global,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnrSweep {
    pub rows: usize,
    pub cols: usize,
    pub n: usize,
    pub k: usize,
    pub gamma: StorageBudget,
    pub delta_rs: usize,
    pub jobs_per_worker: usize,
    /// Failed workers per trial, chosen uniformly at random.
    pub stragglers: usize,
    pub trials: usize,
    pub snrs: Vec<f64>,
    pub reference: NoiseReference,
    pub seed: u64,
}

impl SnrSweep {
    pub fn desk() -> Self {
        Self {
            rows: 800,
            cols: 1000,
            n: 7,
            k: 4,
            gamma: StorageBudget::new(3, 10).expect("valid budget"),
            delta_rs: 10,
            jobs_per_worker: 3,
            stragglers: 3,
            trials: 20,
            snrs: (0..10).map(|i| 70.0 + 5.0 * i as f64).collect(),
            reference: NoiseReference::Task,
            seed: 1,
        }
    }

    pub fn full_scale() -> Self {
        Self { rows: 8000, cols: 10000, ..Self::desk() }
    }

    fn echo(&self) -> Vec<(String, String)> {
        let snrs: Vec<String> = self.snrs.iter().map(|v| format!("{v:?}")).collect();
        vec![
            ("rows".into(), self.rows.to_string()),
            ("cols".into(), self.cols.to_string()),
            ("n".into(), self.n.to_string()),
            ("k".into(), self.k.to_string()),
            ("gamma".into(), format!("\"{}\"", self.gamma)),
            ("delta_rs".into(), self.delta_rs.to_string()),
            ("jobs_per_worker".into(), self.jobs_per_worker.to_string()),
            ("stragglers".into(), self.stragglers.to_string()),
            ("trials".into(), self.trials.to_string()),
            ("snr".into(), format!("[{}]", snrs.join(", "))),
            ("noise_reference".into(), format!("\"{}\"", if self.reference == NoiseReference::Task { "task" } else { "global" })),
            ("seed".into(), self.seed.to_string()),
        ]
    }
}

fn noise_model(snr_db: f64, reference: NoiseReference) -> NoiseModel {
    if snr_db.is_infinite() {
        return NoiseModel::None;
    }
    match reference {
        NoiseReference::Task => NoiseModel::PerTask { snr_db },
        NoiseReference::Global => NoiseModel::Global { snr_db },
    }
}

/// Mean output error percentage of both schemes at each SNR.
///
/// Every trial draws a fresh `x`, straggler set and noise seed; the draws
/// depend only on the trial index, so all SNR levels see the same trials.
pub fn snr_sweep(cfg: &SnrSweep) -> Result<ExperimentReport, CliError> {
    let params = CodeParams::new(cfg.n, cfg.k)?;
    if cfg.stragglers > params.s() {
        return Err(CliError::config(format!("{} stragglers exceed s = {}", cfg.stragglers, params.s())));
    }
    if cfg.trials == 0 {
        return Err(CliError::config("trials must be positive"));
    }
    let plan = plan_for_budget(params, cfg.gamma)?;
    let rs_cfg = RsConfig::<f64>::new(cfg.n, cfg.delta_rs, cfg.jobs_per_worker)?;
    rs_cfg.check_resilience(cfg.stragglers)?;

    let a = gen_dense::<f64>(cfg.rows, cfg.cols, cfg.seed);
    let cp = CpDeployment::new(plan, &a)?;
    let rs = RsDeployment::new(rs_cfg, &a)?;

    struct Trial {
        x: Vec<f64>,
        y: Vec<f64>,
        failed: Vec<usize>,
        noise_seed: u64,
    }
    let trials: Vec<Trial> = (0..cfg.trials)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(t as u64 + 1);
            let x = gen_vector::<f64>(cfg.cols, rng.random());
            let mut failed = sample(&mut rng, cfg.n, cfg.stragglers).into_vec();
            failed.sort_unstable();
            let y = a.matvec(&x).expect("shapes agree");
            Trial { x, y, failed, noise_seed: rng.random() }
        })
        .collect();

    let mut rows = Vec::with_capacity(cfg.snrs.len());
    for &snr in &cfg.snrs {
        let (mut err_rs, mut err_cp) = (0.0, 0.0);
        for tr in &trials {
            let sim = SimConfig {
                policy: StragglerPolicy::Explicit(tr.failed.clone()),
                noise: noise_model(snr, cfg.reference),
                cost: CostModel::default(),
                seed: tr.noise_seed,
            };
            let exec = run(cp.loads(), &tr.x, &sim)?;
            let out = cp_recover(&cp, &exec, Collection::Threshold, DecodeMode::SystematicOnly)?;
            err_cp += error_percentage(&tr.y, &out.y)?;

            let exec = run(rs.loads(), &tr.x, &sim)?;
            let out = rs_recover(&rs, &exec)?;
            err_rs += error_percentage(&tr.y, &out.y)?;
        }
        let m = cfg.trials as f64;
        rows.push(vec![snr, err_rs / m, err_cp / m]);
    }
    Ok(ExperimentReport {
        id: "snr-sweep".into(),
        config: cfg.echo(),
        columns: vec!["snr_db".into(), "err_pct_rs".into(), "err_pct_cp".into()],
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Timing {
    /// Deterministic cost model: time proportional to stored nonzeros.
    #[default]
    Virtual,
    /// Measured wall-clock time, best of several repetitions.
    Wall,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsityBench {
    pub size: usize,
    pub levels: Vec<f64>,
    pub n: usize,
    pub k: usize,
    pub gamma: StorageBudget,
    pub delta_rs: usize,
    pub jobs_per_worker: usize,
    pub timing: Timing,
    pub reps: usize,
    pub seed: u64,
}

impl SparsityBench {
    pub fn desk() -> Self {
        Self {
            size: 2400,
            levels: vec![0.7, 0.8, 0.9, 0.95],
            n: 5,
            k: 2,
            gamma: StorageBudget::new(3, 5).expect("valid budget"),
            delta_rs: 5,
            jobs_per_worker: 3,
            timing: Timing::Virtual,
            reps: 5,
            seed: 1,
        }
    }

    pub fn full_scale() -> Self {
        Self { size: 12000, ..Self::desk() }
    }

    fn echo(&self) -> Vec<(String, String)> {
        let levels: Vec<String> = self.levels.iter().map(|v| format!("{v:?}")).collect();
        vec![
            ("size".into(), self.size.to_string()),
            ("levels".into(), format!("[{}]", levels.join(", "))),
            ("n".into(), self.n.to_string()),
            ("k".into(), self.k.to_string()),
            ("gamma".into(), format!("\"{}\"", self.gamma)),
            ("delta_rs".into(), self.delta_rs.to_string()),
            ("jobs_per_worker".into(), self.jobs_per_worker.to_string()),
            ("timing".into(), format!("\"{}\"", if self.timing == Timing::Virtual { "virtual" } else { "wall" })),
            ("reps".into(), self.reps.to_string()),
            ("seed".into(), self.seed.to_string()),
        ]
    }
}

/// Per-worker compute time for several deployments, measured sequentially on
/// the calling thread. Each repetition times every worker of every deployment
/// once, and each worker keeps its minimum over `reps` repetitions.
pub fn measure_worker_times(deployments: &[&[WorkerLoad<f64>]], x: &[f64], reps: usize) -> Vec<Vec<Duration>> {
    let mut best: Vec<Vec<Duration>> = deployments.iter().map(|d| vec![Duration::MAX; d.len()]).collect();
    for _ in 0..reps.max(1) {
        for (loads, best) in deployments.iter().zip(&mut best) {
            for (load, best) in loads.iter().zip(best.iter_mut()) {
                let t = Instant::now();
                for m in &load.tasks {
                    std::hint::black_box(m.matvec(x).expect("shapes agree"));
                }
                *best = (*best).min(t.elapsed());
            }
        }
    }
    best
}

/// Largest per-worker compute time in ms of each deployment.
fn max_worker_times_ms(deployments: &[&[WorkerLoad<f64>]], x: &[f64], timing: Timing, reps: usize) -> Result<Vec<f64>, CliError> {
    match timing {
        Timing::Virtual => deployments
            .iter()
            .map(|loads| {
                let exec = run(loads, x, &SimConfig::default())?;
                Ok((0..loads.len()).map(|w| exec.trace.busy_time(w)).fold(0.0, f64::max) * 1e3)
            })
            .collect(),
        Timing::Wall => Ok(measure_worker_times(deployments, x, reps)
            .into_iter()
            .map(|times| times.into_iter().map(|d| d.as_secs_f64() * 1e3).fold(0.0, f64::max))
            .collect()),
    }
}

/// Storage and timing comparison on one banded matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityPoint {
    pub level: f64,
    pub band: usize,
    pub matrix_sparsity: f64,
    pub cp: CpDeployment<f64>,
    pub rs: RsDeployment<f64>,
    pub x: Vec<f64>,
    pub a_nnz: usize,
}

impl SparsityPoint {
    pub fn build(cfg: &SparsityBench, level: f64) -> Result<Self, CliError> {
        if !(0.0..1.0).contains(&level) {
            return Err(CliError::config(format!("sparsity level {level} outside [0, 1)")));
        }
        let params = CodeParams::new(cfg.n, cfg.k)?;
        let plan = plan_for_budget(params, cfg.gamma)?;
        let band = band_for_sparsity(cfg.size, level);
        let a = gen_banded::<f64>(cfg.size, band, cfg.seed);
        let x = gen_vector::<f64>(cfg.size, cfg.seed.wrapping_add(1));
        let cp = CpDeployment::new(plan, &a)?;
        let rs = RsDeployment::new(RsConfig::new(cfg.n, cfg.delta_rs, cfg.jobs_per_worker)?, &a)?;
        Ok(Self { level, band, matrix_sparsity: a.sparsity(), cp, rs, x, a_nnz: a.nnz() })
    }

    /// Mean stored sparsity over RS workers.
    pub fn rs_worker_sparsity(&self) -> f64 {
        let l = self.rs.loads();
        l.iter().map(|w| stored_sparsity(&w.tasks)).sum::<f64>() / l.len() as f64
    }

    pub fn cp_parity_sparsity(&self) -> (f64, f64) {
        let coded: Vec<Vec<Matrix<f64>>> = self.cp.loads().iter().map(|w| w.tasks.clone()).collect();
        let r = sparsity_report(self.cp.plan(), &coded);
        (r.worst_parity, r.mean_parity)
    }

    fn max_nnz_fraction(loads: &[WorkerLoad<f64>], a_nnz: usize) -> f64 {
        loads.iter().map(WorkerLoad::nnz).max().unwrap_or(0) as f64 / a_nnz.max(1) as f64
    }
}

/// Per sparsity level: max worker time for both schemes, stored sparsity and
/// the largest per-worker share of `A`'s nonzeros.
pub fn sparsity_bench(cfg: &SparsityBench) -> Result<ExperimentReport, CliError> {
    let mut rows = Vec::with_capacity(cfg.levels.len());
    for &level in &cfg.levels {
        let p = SparsityPoint::build(cfg, level)?;
        let times = max_worker_times_ms(&[p.rs.loads(), p.cp.loads()], &p.x, cfg.timing, cfg.reps)?;
        let (t_rs, t_cp) = (times[0], times[1]);
        let (worst, mean) = p.cp_parity_sparsity();
        rows.push(vec![
            level,
            t_rs,
            t_cp,
            p.rs_worker_sparsity(),
            worst,
            mean,
            SparsityPoint::max_nnz_fraction(p.rs.loads(), p.a_nnz),
            SparsityPoint::max_nnz_fraction(p.cp.loads(), p.a_nnz),
        ]);
    }
    Ok(ExperimentReport {
        id: "sparsity-bench".into(),
        config: cfg.echo(),
        columns: [
            "sparsity_level",
            "max_worker_time_rs",
            "max_worker_time_cp",
            "rs_worker_sparsity",
            "cp_worst_parity_sparsity",
            "cp_mean_parity_sparsity",
            "rs_max_nnz_fraction",
            "cp_max_nnz_fraction",
        ]
        .map(String::from)
        .to_vec(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let r = ExperimentReport {
            id: "t".into(),
            config: vec![("a".into(), "1".into())],
            columns: vec!["x".into(), "y".into()],
            rows: vec![vec![1.0, 0.25], vec![2.5, -3.0]],
        };
        assert_eq!(r.to_csv(), "x,y\n1,0.25\n2.5,-3\n");
        assert_eq!(r.column("y"), Some(vec![0.25, -3.0]));
        assert_eq!(r.config_echo(), "# t\na = 1\n");
    }

    #[test]
    fn small_sweep_without_noise_is_exact() {
        let cfg = SnrSweep { rows: 40, cols: 30, trials: 2, snrs: vec![f64::INFINITY], ..SnrSweep::desk() };
        let r = snr_sweep(&cfg).unwrap();
        assert_eq!(r.columns, ["snr_db", "err_pct_rs", "err_pct_cp"]);
        assert!(r.rows[0][2] < 1e-10);
        assert!(r.rows[0][1] < 1e-4);
    }

    #[test]
    fn echo_round_trips_through_config() {
        let cfg = SnrSweep::desk();
        let parsed = crate::config::Config::parse(&cfg.echo().iter().map(|(k, v)| format!("{k} = {v}\n")).collect::<String>()).unwrap();
        assert_eq!(parsed.usize("trials").unwrap(), Some(20));
        assert_eq!(parsed.string("gamma").unwrap().as_deref(), Some("3/10"));
    }
}
