//! Real-valued polynomial-evaluation (Reed-Solomon style) baseline.
//!
//! `A` is split into `delta` block rows `A_0..A_{delta-1}`; the job at point
//! `z` is `sum_j z^j A_j`. Any `delta` results at distinct points determine
//! every `A_j x` through a Vandermonde solve.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::runtime::matrix::{BlockMatrix, Matrix, MatrixError};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RsError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("evaluation points {0} and {1} coincide")]
    DuplicatePoints(usize, usize),
    #[error("Vandermonde system is singular")]
    SingularSystem,
    #[error("need {need} responses, got {got}")]
    NotEnoughResponses { got: usize, need: usize },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RsConfig<T> {
    n: usize,
    delta: usize,
    jobs_per_worker: usize,
    points: Vec<T>,
}

impl<T: Real> RsConfig<T> {
    /// `n * c` points equally spaced in `[-1, 1]`.
    pub fn new(n: usize, delta: usize, jobs_per_worker: usize) -> Result<Self, RsError> {
        let count = n * jobs_per_worker;
        Self::with_points(n, delta, jobs_per_worker, equally_spaced(count))
    }

    pub fn with_points(n: usize, delta: usize, jobs_per_worker: usize, points: Vec<T>) -> Result<Self, RsError> {
        if n == 0 || delta == 0 || jobs_per_worker == 0 {
            return Err(RsError::InvalidConfig("n, delta and jobs per worker must be positive".into()));
        }
        if points.len() != n * jobs_per_worker {
            return Err(RsError::InvalidConfig(format!(
                "{} points for {n} workers with {jobs_per_worker} jobs each",
                points.len()
            )));
        }
        if n * jobs_per_worker < delta {
            return Err(RsError::InvalidConfig(format!("{} jobs cannot recover {delta} blocks", n * jobs_per_worker)));
        }
        check_distinct(&points)?;
        Ok(Self { n, delta, jobs_per_worker, points })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    pub fn jobs_per_worker(&self) -> usize {
        self.jobs_per_worker
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    /// Point indices held by worker `w`: `w, w + n, w + 2n, ...`.
    pub fn worker_points(&self, w: usize) -> Vec<usize> {
        (0..self.jobs_per_worker).map(|r| w + r * self.n).collect()
    }

    /// Largest `s` with `(n - s) c >= delta`.
    pub fn resilience(&self) -> usize {
        self.n - self.delta.div_ceil(self.jobs_per_worker)
    }

    pub fn check_resilience(&self, s: usize) -> Result<(), RsError> {
        if s > self.resilience() {
            return Err(RsError::InvalidConfig(format!(
                "{} workers x {} jobs cannot tolerate {s} stragglers with delta = {}",
                self.n, self.jobs_per_worker, self.delta
            )));
        }
        Ok(())
    }
}

/// `count` equally spaced reals in `[-1, 1]`; a single point sits at 0.
pub fn equally_spaced<T: Real>(count: usize) -> Vec<T> {
    if count == 1 {
        return vec![T::zero()];
    }
    let step = 2.0 / (count - 1) as f64;
    (0..count).map(|i| T::from_f64(-1.0 + step * i as f64).unwrap()).collect()
}

fn check_distinct<T: Real>(points: &[T]) -> Result<(), RsError> {
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if points[i] == points[j] {
                return Err(RsError::DuplicatePoints(i, j));
            }
        }
    }
    Ok(())
}

/// One coded submatrix `sum_j z^j A_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct RsJob<T> {
    pub point_index: usize,
    pub point: T,
    pub matrix: Matrix<T>,
}

/// Coded jobs per worker, in the order of [`RsConfig::worker_points`].
pub fn rs_encode<T: Real>(a: &BlockMatrix<T>, cfg: &RsConfig<T>) -> Result<Vec<Vec<RsJob<T>>>, RsError> {
    if a.delta() != cfg.delta {
        return Err(RsError::InvalidConfig(format!("{} blocks for delta = {}", a.delta(), cfg.delta)));
    }
    (0..cfg.n)
        .map(|w| cfg.worker_points(w).into_iter().map(|idx| encode_point(a, idx, cfg.points[idx])).collect())
        .collect()
}

fn encode_point<T: Real>(a: &BlockMatrix<T>, point_index: usize, z: T) -> Result<RsJob<T>, RsError> {
    let mut power = T::one();
    let mut weights = Vec::with_capacity(a.delta());
    for _ in 0..a.delta() {
        weights.push(power);
        power *= z;
    }
    let terms: Vec<(&Matrix<T>, T)> = a.blocks().iter().zip(weights).collect();
    let matrix = Matrix::linear_combination(&terms)?;
    Ok(RsJob { point_index, point: z, matrix })
}

/// A worker result `(sum_j z^j A_j) x` tagged with its point.
#[derive(Debug, Clone, PartialEq)]
pub struct RsResponse<T> {
    pub point: T,
    pub value: Vec<T>,
}

fn vandermonde<T: Real>(points: &[T], cols: usize) -> DMatrix<T> {
    DMatrix::from_fn(points.len(), cols, |r, c| num_traits::Float::powi(points[r], c as i32))
}

/// Recovers `A_0 x, ..., A_{delta-1} x` from the first `delta` responses.
pub fn rs_decode<T: Real>(responses: &[RsResponse<T>], delta: usize) -> Result<Vec<Vec<T>>, RsError> {
    if responses.len() < delta {
        return Err(RsError::NotEnoughResponses { got: responses.len(), need: delta });
    }
    let used = &responses[..delta];
    let points: Vec<T> = used.iter().map(|r| r.point).collect();
    check_distinct(&points).map_err(|_| RsError::SingularSystem)?;
    let len = used[0].value.len();
    if used.iter().any(|r| r.value.len() != len) {
        return Err(RsError::InvalidConfig("responses have different lengths".into()));
    }
    let v = vandermonde(&points, delta);
    let rhs = DMatrix::from_fn(delta, len, |r, c| used[r].value[c]);
    let sol = v.lu().solve(&rhs).ok_or(RsError::SingularSystem)?;
    Ok((0..delta).map(|j| sol.row(j).iter().copied().collect()).collect())
}

/// `sigma_max / sigma_min` of the square Vandermonde matrix on `points`.
pub fn condition_number<T: Real>(points: &[T]) -> T {
    let v = vandermonde(points, points.len());
    let sv = v.singular_values();
    let max = sv.iter().copied().fold(T::zero(), num_traits::Float::max);
    let min = sv.iter().copied().fold(T::infinity(), num_traits::Float::min);
    max / min
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::matrix::gen_dense;

    #[test]
    fn equally_spaced_grid() {
        assert_eq!(equally_spaced::<f64>(3), vec![-1.0, 0.0, 1.0]);
        let p = equally_spaced::<f64>(21);
        assert_eq!(p.len(), 21);
        assert!((p[1] + 0.9).abs() < 1e-15);
    }

    #[test]
    fn stride_assignment() {
        let cfg = RsConfig::<f64>::new(7, 10, 3).unwrap();
        assert_eq!(cfg.worker_points(2), vec![2, 9, 16]);
        assert_eq!(cfg.resilience(), 3);
        assert!(cfg.check_resilience(3).is_ok());
        assert!(cfg.check_resilience(4).is_err());
    }

    #[test]
    fn rejects_duplicate_points() {
        let err = RsConfig::with_points(3, 2, 1, vec![0.0, 1.0, 0.0]).unwrap_err();
        assert_eq!(err, RsError::DuplicatePoints(0, 2));
    }

    #[test]
    fn one_straggler_example() {
        let a = gen_dense::<f64>(4, 3, 5);
        let blocks = BlockMatrix::partition(&a, 2).unwrap();
        let cfg = RsConfig::with_points(3, 2, 1, vec![0.0, 1.0, -1.0]).unwrap();
        let jobs = rs_encode(&blocks, &cfg).unwrap();
        let (a0, a1) = (blocks.block(0), blocks.block(1));
        let sum = Matrix::linear_combination(&[(a0, 1.0), (a1, 1.0)]).unwrap();
        let diff = Matrix::linear_combination(&[(a0, 1.0), (a1, -1.0)]).unwrap();
        assert_eq!(jobs[0][0].matrix, *a0);
        assert_eq!(jobs[1][0].matrix, sum);
        assert_eq!(jobs[2][0].matrix, diff);

        let x = [1.0, -2.0, 0.5];
        let want = blocks.block_products(&x).unwrap();
        for pair in [[0, 1], [0, 2], [1, 2]] {
            let resp: Vec<RsResponse<f64>> = pair
                .iter()
                .map(|&w| RsResponse { point: jobs[w][0].point, value: jobs[w][0].matrix.matvec(&x).unwrap() })
                .collect();
            let got = rs_decode(&resp, 2).unwrap();
            for (g, w) in got.iter().flatten().zip(want.iter().flatten()) {
                assert!((g - w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn decode_errors() {
        let r = |p: f64| RsResponse { point: p, value: vec![1.0] };
        assert_eq!(rs_decode(&[r(0.0)], 2), Err(RsError::NotEnoughResponses { got: 1, need: 2 }));
        assert_eq!(rs_decode(&[r(0.5), r(0.5)], 2), Err(RsError::SingularSystem));
    }

    #[test]
    fn condition_numbers() {
        assert_eq!(condition_number(&[0.3]), 1.0);
        let clustered = condition_number(&[0.0, 0.01, 0.02, 1.0]);
        let spread = condition_number(&[-1.0, -1.0 / 3.0, 1.0 / 3.0, 1.0]);
        assert!(clustered > spread);
    }
}
