//! Master-side deployment, collection and recovery for both schemes.

use thiserror::Error;

use super::matrix::{BlockMatrix, Matrix, MatrixError};
use super::sim::{Execution, WorkerLoad};
use crate::peeling::{assemble_result, decode, DecodeMode, DecodeTrace, PeelError, StragglerSet, SymbolGrid};
use crate::planner::{materialize_blocks, JobPlan, PlanError};
use crate::rs_baseline::{condition_number, rs_decode, rs_encode, RsConfig, RsError, RsResponse};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum MasterError {
    #[error("only {got} usable responses, need {need}")]
    Unrecoverable { got: usize, need: usize },
    #[error(transparent)]
    Peel(#[from] PeelError),
    #[error(transparent)]
    Rs(#[from] RsError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("zero reference vector")]
    ZeroReference,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// Which finished workers the CP master decodes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Collection {
    /// The fastest `n - s` workers; the rest are treated as stragglers.
    #[default]
    Threshold,
    /// Every worker that finished.
    AllFinishers,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpDeployment<T> {
    plan: JobPlan,
    rows: usize,
    block_rows: usize,
    loads: Vec<WorkerLoad<T>>,
}

impl<T: Real> CpDeployment<T> {
    pub fn new(plan: JobPlan, a: &Matrix<T>) -> Result<Self, MasterError> {
        let blocks = BlockMatrix::partition(a, plan.delta())?;
        let coded = materialize_blocks(&plan, &blocks)?;
        let loads = coded.into_iter().map(|tasks| WorkerLoad { tasks }).collect();
        Ok(Self { plan, rows: a.rows(), block_rows: blocks.block_rows(), loads })
    }

    pub fn plan(&self) -> &JobPlan {
        &self.plan
    }

    pub fn loads(&self) -> &[WorkerLoad<T>] {
        &self.loads
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn block_rows(&self) -> usize {
        self.block_rows
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpOutcome<T> {
    pub y: Vec<T>,
    pub stragglers: Vec<usize>,
    pub trace: DecodeTrace,
    /// Virtual time at which the last used worker finished.
    pub latency: f64,
}

/// Finished workers ordered by virtual finish time, ties by index.
fn finish_order(exec: &Execution<impl Clone>) -> Vec<(usize, f64)> {
    let mut done: Vec<(usize, f64)> = (0..exec.outputs.len())
        .filter(|&w| exec.outputs[w].is_some())
        .map(|w| (w, exec.trace.finish_time(w).unwrap_or(0.0)))
        .collect();
    done.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    done
}

/// Builds the symbol grid from the collected workers and peels the rest.
pub fn cp_recover<T: Real>(
    dep: &CpDeployment<T>,
    exec: &Execution<T>,
    collection: Collection,
    mode: DecodeMode,
) -> Result<CpOutcome<T>, MasterError> {
    let params = dep.plan.params();
    let need = params.k();
    let mut order = finish_order(exec);
    if order.len() < need {
        return Err(MasterError::Unrecoverable { got: order.len(), need });
    }
    if collection == Collection::Threshold {
        order.truncate(need);
    }
    let latency = order.iter().map(|&(_, t)| t).fold(0.0, f64::max);
    let mut grid = SymbolGrid::for_plan(&dep.plan, dep.block_rows);
    for &(w, _) in &order {
        grid.set_column(w, exec.outputs[w].clone().expect("finished worker has outputs"))?;
    }
    let used: Vec<usize> = order.iter().map(|&(w, _)| w).collect();
    let stragglers = (0..params.n()).filter(|w| !used.contains(w)).collect();
    let set = StragglerSet::new(stragglers, params.n())?;
    let trace = decode(&mut grid, &set, mode)?;
    let y = assemble_result(&grid, &dep.plan, dep.rows)?;
    Ok(CpOutcome { y, stragglers: set.indices().to_vec(), trace, latency })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RsDeployment<T> {
    cfg: RsConfig<T>,
    rows: usize,
    loads: Vec<WorkerLoad<T>>,
}

impl<T: Real> RsDeployment<T> {
    pub fn new(cfg: RsConfig<T>, a: &Matrix<T>) -> Result<Self, MasterError> {
        let blocks = BlockMatrix::partition(a, cfg.delta())?;
        let jobs = rs_encode(&blocks, &cfg)?;
        let loads = jobs.into_iter().map(|js| WorkerLoad { tasks: js.into_iter().map(|j| j.matrix).collect() }).collect();
        Ok(Self { cfg, rows: a.rows(), loads })
    }

    pub fn config(&self) -> &RsConfig<T> {
        &self.cfg
    }

    pub fn loads(&self) -> &[WorkerLoad<T>] {
        &self.loads
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RsOutcome<T> {
    pub y: Vec<T>,
    /// Point indices of the responses used, in arrival order.
    pub points_used: Vec<usize>,
    pub condition: T,
    pub latency: f64,
}

/// Decodes from the first `delta` task results by virtual completion time.
pub fn rs_recover<T: Real>(dep: &RsDeployment<T>, exec: &Execution<T>) -> Result<RsOutcome<T>, MasterError> {
    let delta = dep.cfg.delta();
    let mut arrivals: Vec<(f64, usize, usize)> = exec
        .trace
        .records
        .iter()
        .filter(|r| exec.outputs[r.worker].is_some())
        .map(|r| (r.end, r.worker, r.task_index))
        .collect();
    arrivals.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    if arrivals.len() < delta {
        return Err(MasterError::Unrecoverable { got: arrivals.len(), need: delta });
    }
    arrivals.truncate(delta);
    let points_used: Vec<usize> = arrivals.iter().map(|&(_, w, t)| dep.cfg.worker_points(w)[t]).collect();
    let responses: Vec<RsResponse<T>> = arrivals
        .iter()
        .zip(&points_used)
        .map(|(&(_, w, t), &p)| RsResponse {
            point: dep.cfg.points()[p],
            value: exec.outputs[w].as_ref().unwrap()[t].clone(),
        })
        .collect();
    let blocks = rs_decode(&responses, delta)?;
    let mut y: Vec<T> = blocks.into_iter().flatten().collect();
    y.truncate(dep.rows);
    let pts: Vec<T> = responses.iter().map(|r| r.point).collect();
    let latency = arrivals.last().map_or(0.0, |a| a.0);
    Ok(RsOutcome { y, points_used, condition: condition_number(&pts), latency })
}

/// `100 * ||y - y_hat|| / ||y||`.
pub fn error_percentage<T: Real>(y: &[T], y_hat: &[T]) -> Result<f64, MasterError> {
    if y.len() != y_hat.len() {
        return Err(MasterError::LengthMismatch(y.len(), y_hat.len()));
    }
    let f = |v: T| v.to_f64().unwrap();
    let norm: f64 = y.iter().map(|&v| f(v).powi(2)).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(MasterError::ZeroReference);
    }
    let diff: f64 = y.iter().zip(y_hat).map(|(&a, &b)| (f(a) - f(b)).powi(2)).sum::<f64>().sqrt();
    Ok(100.0 * diff / norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codegen::CodeParams;
    use crate::planner::build_plan;
    use crate::runtime::matrix::{gen_dense, gen_vector};
    use crate::runtime::sim::{run, SimConfig, StragglerPolicy};

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        error_percentage(a, b).unwrap() / 100.0
    }

    #[test]
    fn error_percentage_examples() {
        let y = vec![1.0, -2.0, 3.0];
        assert_eq!(error_percentage(&y, &y).unwrap(), 0.0);
        let scaled: Vec<f64> = y.iter().map(|v| 1.01 * v).collect();
        assert!((error_percentage(&y, &scaled).unwrap() - 1.0).abs() < 1e-9);
        assert!(matches!(error_percentage(&[0.0], &[1.0]), Err(MasterError::ZeroReference)));
    }

    #[test]
    fn cp_with_explicit_stragglers() {
        let plan = build_plan(CodeParams::new(4, 2).unwrap(), 8).unwrap();
        let a = gen_dense::<f64>(30, 12, 1);
        let x = gen_vector::<f64>(12, 2);
        let dep = CpDeployment::new(plan, &a).unwrap();
        let cfg = SimConfig { policy: StragglerPolicy::Explicit(vec![2, 3]), ..Default::default() };
        let exec = run(dep.loads(), &x, &cfg).unwrap();
        let out = cp_recover(&dep, &exec, Collection::Threshold, DecodeMode::SystematicOnly).unwrap();
        assert_eq!(out.stragglers, vec![2, 3]);
        assert!(rel_err(&a.matvec(&x).unwrap(), &out.y) < 1e-12);
    }

    #[test]
    fn cp_threshold_drops_slowest() {
        let plan = build_plan(CodeParams::new(5, 3).unwrap(), 6).unwrap();
        let a = gen_dense::<f64>(12, 5, 3);
        let x = gen_vector::<f64>(5, 4);
        let dep = CpDeployment::new(plan, &a).unwrap();
        let cfg = SimConfig { policy: StragglerPolicy::RandomDelay { mean: 1.0 }, seed: 5, ..Default::default() };
        let exec = run(dep.loads(), &x, &cfg).unwrap();
        let out = cp_recover(&dep, &exec, Collection::Threshold, DecodeMode::Full).unwrap();
        assert_eq!(out.stragglers.len(), 2);
        let all = cp_recover(&dep, &exec, Collection::AllFinishers, DecodeMode::Full).unwrap();
        assert!(all.stragglers.is_empty());
        let want = a.matvec(&x).unwrap();
        assert!(rel_err(&want, &out.y) < 1e-12);
        assert!(rel_err(&want, &all.y) < 1e-12);
    }

    #[test]
    fn cp_too_many_failures() {
        let plan = build_plan(CodeParams::new(4, 2).unwrap(), 4).unwrap();
        let a = gen_dense::<f64>(8, 3, 1);
        let dep = CpDeployment::new(plan, &a).unwrap();
        let cfg = SimConfig { policy: StragglerPolicy::Explicit(vec![0, 1, 2]), ..Default::default() };
        let exec = run(dep.loads(), &gen_vector::<f64>(3, 1), &cfg).unwrap();
        assert!(matches!(
            cp_recover(&dep, &exec, Collection::Threshold, DecodeMode::Full),
            Err(MasterError::Unrecoverable { got: 1, need: 2 })
        ));
    }

    #[test]
    fn rs_end_to_end() {
        let a = gen_dense::<f64>(40, 9, 7);
        let x = gen_vector::<f64>(9, 8);
        let dep = RsDeployment::new(RsConfig::new(7, 10, 3).unwrap(), &a).unwrap();
        let cfg = SimConfig { policy: StragglerPolicy::Explicit(vec![0, 3, 6]), ..Default::default() };
        let exec = run(dep.loads(), &x, &cfg).unwrap();
        let out = rs_recover(&dep, &exec).unwrap();
        assert_eq!(out.points_used.len(), 10);
        assert!(out.points_used.iter().all(|p| ![0, 3, 6].contains(&(p % 7))));
        assert!(rel_err(&a.matvec(&x).unwrap(), &out.y) < 1e-9);
        assert!(out.condition > 1.0);
    }
}
