//! Embedding `A x` into a CP(n, k) code.
//!
//! `A` is split into `delta` block-rows with `u_j = A_j x`. Stream `i` is the
//! polynomial `u_{iq} + u_{iq+1} D + ... + u_{(i+1)q-1} D^(q-1)` with
//! `q = delta / k`, and worker `j` is assigned the coefficients of column `j`
//! of `[u~_0 ... u~_{k-1}] G`, lowest exponent first.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

use crate::codegen::{self, CodeError, CodeParams, PolyMatrix};
use crate::runtime::matrix::{BlockMatrix, Matrix, MatrixError};
use crate::scalar::{from_i64, Coefficient, Field, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("storage fraction {gamma} leaves no room: need gamma > 1/k = 1/{k}")]
    InfeasibleBudget { gamma: Ratio<i64>, k: usize },
    #[error("invalid storage fraction {0}: must lie in (0, 1]")]
    InvalidBudget(String),
    #[error("delta = {delta} must be a positive multiple of k = {k}")]
    BadDelta { delta: usize, k: usize },
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Fraction of `A`'s rows one worker may store.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StorageBudget {
    gamma: Ratio<i64>,
}

impl StorageBudget {
    pub fn new(num: i64, den: i64) -> Result<Self, PlanError> {
        if den == 0 {
            return Err(PlanError::InvalidBudget(format!("{num}/{den}")));
        }
        let gamma = Ratio::new(num, den);
        if gamma <= Ratio::zero() || gamma > Ratio::from_integer(1) {
            return Err(PlanError::InvalidBudget(gamma.to_string()));
        }
        Ok(Self { gamma })
    }

    pub fn gamma(&self) -> Ratio<i64> {
        self.gamma
    }
}

/// Accepts `p/q` or a terminating decimal such as `0.3`.
impl FromStr for StorageBudget {
    type Err = PlanError;

    fn from_str(s: &str) -> Result<Self, PlanError> {
        let bad = || PlanError::InvalidBudget(s.to_string());
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            return Self::new(n.trim().parse().map_err(|_| bad())?, d.trim().parse().map_err(|_| bad())?);
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if frac.len() > 12 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let den = 10i64.pow(frac.len() as u32);
        let int: i64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let frac_v: i64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        Self::new(int * den + frac_v, den)
    }
}

impl fmt::Display for StorageBudget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.gamma)
    }
}

/// Smallest multiple of `k` (and at least `k`) with `delta >= lambda / (gamma - 1/k)`.
pub fn choose_delta(params: CodeParams, budget: StorageBudget, lambda: i64) -> Result<usize, PlanError> {
    let k = params.k() as i64;
    let slack = budget.gamma - Ratio::new(1, k);
    if slack <= Ratio::zero() {
        return Err(PlanError::InfeasibleBudget { gamma: budget.gamma, k: params.k() });
    }
    let bound = (Ratio::from_integer(lambda.max(0)) / slack).ceil().to_integer();
    let delta = ((bound + k - 1) / k * k).max(k);
    Ok(delta as usize)
}

/// One coded job: `sum coeff * A_block`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Task {
    terms: Vec<(usize, i64)>,
}

impl Task {
    /// Terms must have strictly increasing block indices and nonzero coefficients.
    pub fn new(terms: Vec<(usize, i64)>) -> Self {
        debug_assert!(terms.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(terms.iter().all(|t| t.1 != 0));
        Self { terms }
    }

    pub fn terms(&self) -> &[(usize, i64)] {
        &self.terms
    }

    /// Applies the task to block results `u`.
    pub fn apply<T: Field>(&self, u: &[Vec<T>]) -> Vec<T> {
        let len = u.first().map_or(0, Vec::len);
        let mut out = vec![T::zero(); len];
        for &(b, c) in &self.terms {
            let c: T = from_i64(c);
            for (o, v) in out.iter_mut().zip(&u[b]) {
                *o = o.clone() + c.clone() * v.clone();
            }
        }
        out
    }
}

/// Renders as `+A0 +A4` or `-2*A3 +A7`.
impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (idx, &(b, c)) in self.terms.iter().enumerate() {
            if idx > 0 {
                f.write_str(" ")?;
            }
            let sign = if c < 0 { '-' } else { '+' };
            match c.abs() {
                1 => write!(f, "{sign}A{b}")?,
                m => write!(f, "{sign}{m}*A{b}")?,
            }
        }
        Ok(())
    }
}

/// Ordered job list of one worker; task `t` is the coefficient of `D^(offset + t)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkerJobs {
    pub offset: i64,
    pub span: i64,
    pub tasks: Vec<Task>,
}

impl WorkerJobs {
    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    /// One past the last occupied grid row.
    pub fn end(&self) -> i64 {
        self.offset + self.tasks.len() as i64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JobPlan {
    params: CodeParams,
    delta: usize,
    lambda: i64,
    workers: Vec<WorkerJobs>,
}

impl JobPlan {
    pub fn params(&self) -> CodeParams {
        self.params
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    /// Blocks per message stream.
    pub fn q(&self) -> usize {
        self.delta / self.params.k()
    }

    pub fn lambda(&self) -> i64 {
        self.lambda
    }

    pub fn workers(&self) -> &[WorkerJobs] {
        &self.workers
    }

    pub fn worker(&self, j: usize) -> &WorkerJobs {
        &self.workers[j]
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.workers.iter().map(WorkerJobs::len).collect()
    }

    pub fn offsets(&self) -> Vec<i64> {
        self.workers.iter().map(|w| w.offset).collect()
    }

    pub fn max_len(&self) -> usize {
        self.workers.iter().map(WorkerJobs::len).max().unwrap_or(0)
    }

    /// Task outputs of every worker given the block results `u_j`.
    pub fn apply_tasks<T: Field>(&self, u: &[Vec<T>]) -> Vec<Vec<Vec<T>>> {
        self.workers.iter().map(|w| w.tasks.iter().map(|t| t.apply(u)).collect()).collect()
    }

    /// Mutable access for fault-injection tests.
    #[doc(hidden)]
    pub fn workers_mut(&mut self) -> &mut [WorkerJobs] {
        &mut self.workers
    }

    /// One line per task: `W<j> slot <t> (D^<e>): <terms>`.
    pub fn render_text(&self) -> String {
        let mut out = format!(
            "# {} delta={} q={} lambda={} lengths={:?}\n",
            self.params,
            self.delta,
            self.q(),
            self.lambda,
            self.lengths()
        );
        for (j, w) in self.workers.iter().enumerate() {
            for (t, task) in w.tasks.iter().enumerate() {
                out.push_str(&format!("W{j} slot {t} (D^{}): {task}\n", w.offset + t as i64));
            }
        }
        out
    }

    /// CSV with header `worker,slot,block,coefficient`.
    pub fn render_csv(&self) -> String {
        let mut out = String::from("worker,slot,block,coefficient\n");
        for (j, w) in self.workers.iter().enumerate() {
            for (t, task) in w.tasks.iter().enumerate() {
                for (b, c) in task.terms() {
                    out.push_str(&format!("{j},{t},{b},{c}\n"));
                }
            }
        }
        out
    }
}

pub fn build_plan(params: CodeParams, delta: usize) -> Result<JobPlan, PlanError> {
    let g = codegen::build_generator::<Rational>(params)?;
    build_plan_with(params, &g, delta)
}

/// Plan from an already constructed generator.
pub fn build_plan_with<C: Coefficient>(params: CodeParams, g: &PolyMatrix<C>, delta: usize) -> Result<JobPlan, PlanError> {
    let k = params.k();
    if delta == 0 || delta % k != 0 {
        return Err(PlanError::BadDelta { delta, k });
    }
    let q = delta / k;
    let offsets = codegen::column_offsets(g)?;
    let spans = codegen::column_spans(g)?;
    let mut workers = Vec::with_capacity(params.n());
    for j in 0..params.n() {
        let column: Vec<Vec<(i64, i64)>> = g
            .column(j)
            .map(|p| {
                let (min, cs) = codegen::integer_coeffs(p).expect("generator entries are integral");
                cs.into_iter().enumerate().filter(|(_, c)| *c != 0).map(|(t, c)| (min + t as i64, c)).collect()
            })
            .collect();
        let len = q as i64 + spans[j];
        let tasks = (0..len)
            .map(|t| {
                let e = offsets[j] + t;
                let mut terms = Vec::new();
                for (i, entry) in column.iter().enumerate() {
                    for &(ge, c) in entry {
                        let shift = e - ge;
                        if (0..q as i64).contains(&shift) {
                            terms.push((i * q + shift as usize, c));
                        }
                    }
                }
                terms.sort_unstable();
                Task::new(terms)
            })
            .collect();
        workers.push(WorkerJobs { offset: offsets[j], span: spans[j], tasks });
    }
    Ok(JobPlan { params, delta, lambda: spans.iter().copied().max().unwrap_or(0), workers })
}

/// Checks every slope-`m` line of the symbolic grid cancels to zero.
pub fn verify_plan(plan: &JobPlan) -> bool {
    let n = plan.params.n();
    let s = plan.params.s();
    let lo = plan.workers.iter().map(|w| w.offset).min().unwrap_or(0);
    let hi = plan.workers.iter().map(WorkerJobs::end).max().unwrap_or(0);
    for m in 0..s as i64 {
        let last_line = hi + m * (n as i64 - 1);
        for i in lo..last_line {
            let mut acc: BTreeMap<usize, i64> = BTreeMap::new();
            for (j, w) in plan.workers.iter().enumerate() {
                let row = i - m * j as i64;
                if row < w.offset || row >= w.end() {
                    continue;
                }
                for &(b, c) in w.tasks[(row - w.offset) as usize].terms() {
                    *acc.entry(b).or_insert(0) += c;
                }
            }
            if acc.values().any(|&c| c != 0) {
                return false;
            }
        }
    }
    true
}

/// True iff every worker stores at most `gamma * delta` block-rows.
pub fn validate_storage(plan: &JobPlan, budget: StorageBudget) -> bool {
    let cap = budget.gamma * Ratio::from_integer(plan.delta as i64);
    Ratio::from_integer(plan.max_len() as i64) <= cap
}

/// Precombines the block-rows of `a` so worker `j` holds its `l_j` coded blocks.
pub fn materialize<T: Field>(plan: &JobPlan, a: &Matrix<T>) -> Result<Vec<Vec<Matrix<T>>>, PlanError> {
    let blocks = BlockMatrix::partition(a, plan.delta)?;
    materialize_blocks(plan, &blocks)
}

pub fn materialize_blocks<T: Field>(plan: &JobPlan, blocks: &BlockMatrix<T>) -> Result<Vec<Vec<Matrix<T>>>, PlanError> {
    if blocks.delta() != plan.delta {
        return Err(MatrixError::ShapeMismatch(format!("{} blocks for delta = {}", blocks.delta(), plan.delta)).into());
    }
    let empty = if blocks.block(0).is_sparse() {
        Matrix::zeros_sparse(blocks.block_rows(), blocks.cols())
    } else {
        Matrix::zeros_dense(blocks.block_rows(), blocks.cols())
    };
    plan.workers
        .iter()
        .map(|w| {
            w.tasks
                .iter()
                .map(|task| {
                    if task.terms().is_empty() {
                        return Ok(empty.clone());
                    }
                    let terms: Vec<(&Matrix<T>, T)> =
                        task.terms().iter().map(|&(b, c)| (blocks.block(b), from_i64(c))).collect();
                    Ok(Matrix::linear_combination(&terms)?)
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsityReport {
    /// Fraction of zero entries over everything worker `j` stores.
    pub per_worker: Vec<f64>,
    /// Minimum over parity workers `0..s`.
    pub worst_parity: f64,
    pub mean_parity: f64,
}

pub fn sparsity_report<T: Field>(plan: &JobPlan, coded: &[Vec<Matrix<T>>]) -> SparsityReport {
    let per_worker: Vec<f64> = coded.iter().map(|w| stored_sparsity(w)).collect();
    let s = plan.params.s();
    let parity = &per_worker[..s.min(per_worker.len())];
    SparsityReport {
        worst_parity: parity.iter().copied().fold(f64::INFINITY, f64::min),
        mean_parity: parity.iter().sum::<f64>() / parity.len().max(1) as f64,
        per_worker,
    }
}

/// Zero fraction over a list of stored submatrices.
pub fn stored_sparsity<T: Field>(mats: &[Matrix<T>]) -> f64 {
    let total: usize = mats.iter().map(|m| m.rows() * m.cols()).sum();
    let nnz: usize = mats.iter().map(Matrix::nnz).sum();
    if total == 0 {
        1.0
    } else {
        1.0 - nnz as f64 / total as f64
    }
}

/// `gamma * delta` as a float, for reports.
pub fn storage_cap(budget: StorageBudget, delta: usize) -> f64 {
    (budget.gamma * Ratio::from_integer(delta as i64)).to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cp(n: usize, k: usize) -> CodeParams {
        CodeParams::new(n, k).unwrap()
    }

    fn t(terms: &[(usize, i64)]) -> Task {
        Task::new(terms.to_vec())
    }

    #[test]
    fn budget_parsing() {
        assert_eq!("3/4".parse::<StorageBudget>().unwrap().gamma(), Ratio::new(3, 4));
        assert_eq!("0.3".parse::<StorageBudget>().unwrap().gamma(), Ratio::new(3, 10));
        assert_eq!("1".parse::<StorageBudget>().unwrap().gamma(), Ratio::new(1, 1));
        assert!("0".parse::<StorageBudget>().is_err());
        assert!("5/4".parse::<StorageBudget>().is_err());
        assert!("abc".parse::<StorageBudget>().is_err());
    }

    #[test]
    fn delta_examples() {
        let b = |s: &str| s.parse::<StorageBudget>().unwrap();
        assert_eq!(choose_delta(cp(4, 2), b("3/4"), 2).unwrap(), 8);
        assert_eq!(choose_delta(cp(7, 4), b("3/10"), 8).unwrap(), 160);
        assert_eq!(choose_delta(cp(5, 2), b("3/5"), 4).unwrap(), 40);
        assert!(matches!(choose_delta(cp(4, 2), b("1/2"), 2), Err(PlanError::InfeasibleBudget { .. })));
        // 3 / (2/3 - 1/2) = 18
        assert_eq!(choose_delta(cp(4, 2), b("2/3"), 3).unwrap(), 18);
        // non-integral bound rounds up then to a multiple of k
        assert_eq!(choose_delta(cp(7, 4), b("3/10"), 7).unwrap(), 140);
        assert_eq!(choose_delta(cp(7, 4), b("0.29"), 9).unwrap(), 228);
        assert_eq!(choose_delta(cp(7, 4), b("7/25"), 8).unwrap(), 268);
        // s = 1 has lambda = 0: smallest valid delta is k
        assert_eq!(choose_delta(cp(4, 3), b("1/2"), 0).unwrap(), 3);
    }

    #[test]
    fn cp42_plan() {
        let plan = build_plan(cp(4, 2), 8).unwrap();
        assert_eq!(plan.lengths(), vec![5, 6, 4, 4]);
        assert_eq!(plan.offsets(), vec![1, 0, 0, 0]);
        assert_eq!(
            plan.worker(0).tasks,
            vec![
                t(&[(0, 1), (4, 1)]),
                t(&[(1, 1), (4, 1), (5, 1)]),
                t(&[(2, 1), (5, 1), (6, 1)]),
                t(&[(3, 1), (6, 1), (7, 1)]),
                t(&[(7, 1)]),
            ]
        );
        assert_eq!(
            plan.worker(1).tasks,
            vec![
                t(&[(0, -1), (4, -1)]),
                t(&[(0, -1), (1, -1), (4, -1), (5, -1)]),
                t(&[(1, -1), (2, -1), (4, -1), (5, -1), (6, -1)]),
                t(&[(2, -1), (3, -1), (5, -1), (6, -1), (7, -1)]),
                t(&[(3, -1), (6, -1), (7, -1)]),
                t(&[(7, -1)]),
            ]
        );
        for (w, base) in [(2usize, 0usize), (3, 4)] {
            let want: Vec<Task> = (0..4).map(|r| t(&[(base + r, 1)])).collect();
            assert_eq!(plan.worker(w).tasks, want);
        }
        assert_eq!(plan.worker(1).tasks[1].to_string(), "-A0 -A1 -A4 -A5");
        assert!(verify_plan(&plan));
    }

    #[test]
    fn small_plan_cp32() {
        let plan = build_plan(cp(3, 2), 2).unwrap();
        assert_eq!(plan.worker(1).tasks, vec![t(&[(0, 1)])]);
        assert_eq!(plan.worker(2).tasks, vec![t(&[(1, 1)])]);
        // Z = [-1; -1]: the parity worker holds -(A0 + A1)
        assert_eq!(plan.worker(0).tasks, vec![t(&[(0, -1), (1, -1)])]);
        assert!(verify_plan(&plan));
    }

    #[test]
    fn corrupted_plan_fails_verification() {
        let mut plan = build_plan(cp(4, 2), 8).unwrap();
        plan.workers_mut()[0].tasks[2] = t(&[(2, 1), (5, 1), (6, 2)]);
        assert!(!verify_plan(&plan));
    }

    #[test]
    fn bad_delta() {
        assert!(matches!(build_plan(cp(4, 2), 7), Err(PlanError::BadDelta { .. })));
        assert!(matches!(build_plan(cp(4, 2), 0), Err(PlanError::BadDelta { .. })));
    }

    #[test]
    fn storage_validation() {
        let plan = build_plan(cp(4, 2), 8).unwrap();
        assert!(validate_storage(&plan, "3/4".parse().unwrap()));
        assert!(!validate_storage(&plan, "5/8".parse().unwrap()));
        let plan74 = build_plan(cp(7, 4), 160).unwrap();
        assert_eq!(plan74.max_len(), 48);
        assert!(validate_storage(&plan74, "3/10".parse().unwrap()));
    }

    #[test]
    fn materialized_blocks() {
        let a = crate::runtime::matrix::gen_banded::<f64>(64, 2, 11);
        let plan = build_plan(cp(4, 2), 8).unwrap();
        let coded = materialize(&plan, &a).unwrap();
        let blocks = BlockMatrix::partition(&a, 8).unwrap();
        for r in 0..4 {
            assert_eq!(coded[2][r], *blocks.block(r));
            assert_eq!(coded[3][r], *blocks.block(4 + r));
        }
        let w0 = Matrix::linear_combination(&[(blocks.block(0), 1.0), (blocks.block(4), 1.0)]).unwrap();
        assert_eq!(coded[0][0], w0);
        for (w, jobs) in plan.workers().iter().zip(&coded) {
            for (task, m) in w.tasks.iter().zip(jobs) {
                let bound: usize = task.terms().iter().map(|&(b, _)| blocks.block(b).nnz()).sum();
                assert!(m.nnz() <= bound);
            }
        }
        let rep = sparsity_report(&plan, &coded);
        assert_eq!(rep.per_worker[2], stored_sparsity(&blocks.blocks()[..4]));
        assert!(rep.worst_parity <= rep.mean_parity);
    }
}
