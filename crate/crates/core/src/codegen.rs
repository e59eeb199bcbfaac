//! Parity-check and systematic generator matrices of the CP(n, k) code.
//!
//! The parity check `H` has entry `(m, j) = D^(m j)` for slopes
//! `m = 0..s` and columns `j = 0..n`. The generator is `G = [Z | I_k]` with
//!
//! ```text
//! Z_ij = - prod_{l != j, 0 <= l < s} (D^(s+i) - D^l) / (D^j - D^l)
//! ```
//!
//! computed here by exact polynomial division. Every entry of `Z` must come
//! out as a finite polynomial with integer coefficients; that is checked on
//! construction instead of assumed.

use std::fmt;

use thiserror::Error;

use crate::polyring::{geometric, LaurentPoly, PolyError};
use crate::scalar::{from_i64, Coefficient};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodeError {
    #[error("invalid code parameters n={n}, k={k}: need 1 <= k < n")]
    InvalidParams { n: usize, k: usize },
    #[error("Z[{i}][{j}] is not a finite polynomial: {source}")]
    NotFeedForward { i: usize, j: usize, source: PolyError },
    #[error("Z[{i}][{j}] has non-integer coefficients")]
    NonIntegral { i: usize, j: usize },
    #[error("closed forms exist only for s = 2 and s = 3 (got s = {s})")]
    Unsupported { s: usize },
    #[error("index ({i}, {j}) out of range for a {k}x{s} Z matrix")]
    OutOfRange { i: usize, j: usize, k: usize, s: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("column {0} of the generator is identically zero")]
    ZeroColumn(usize),
}

/// `n` workers, `k` message streams, straggler resilience `s = n - k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CodeParams {
    n: usize,
    k: usize,
}

impl CodeParams {
    pub fn new(n: usize, k: usize) -> Result<Self, CodeError> {
        if k == 0 || k >= n {
            return Err(CodeError::InvalidParams { n, k });
        }
        Ok(Self { n, k })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn s(&self) -> usize {
        self.n - self.k
    }

    /// Columns `s..n` carry uncoded blocks.
    pub fn is_systematic(&self, col: usize) -> bool {
        col >= self.s() && col < self.n
    }
}

impl fmt::Display for CodeParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CP({},{})", self.n, self.k)
    }
}

/// Dense matrix of Laurent polynomials, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct PolyMatrix<C> {
    rows: usize,
    cols: usize,
    entries: Vec<LaurentPoly<C>>,
}

impl<C: Coefficient> PolyMatrix<C> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: vec![LaurentPoly::zero(); rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> LaurentPoly<C>) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        Self { rows, cols, entries }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &LaurentPoly<C> {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, p: LaurentPoly<C>) {
        self.entries[i * self.cols + j] = p;
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = &LaurentPoly<C>> + '_ {
        (0..self.rows).map(move |i| self.get(i, j))
    }

    /// `self * other^T`.
    pub fn mul_transpose(&self, other: &Self) -> Result<Self, CodeError> {
        if self.cols != other.cols {
            return Err(CodeError::DimensionMismatch(format!(
                "{}x{} times ({}x{})^T",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Self::from_fn(self.rows, other.rows, |i, m| {
            (0..self.cols).fold(LaurentPoly::zero(), |acc, j| &acc + &(self.get(i, j) * other.get(m, j)))
        }))
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(LaurentPoly::is_zero)
    }
}

impl<C: Coefficient> fmt::Display for PolyMatrix<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cells: Vec<String> = self.entries.iter().map(ToString::to_string).collect();
        let width = cells.iter().map(String::len).max().unwrap_or(1);
        for i in 0..self.rows {
            f.write_str("[ ")?;
            for j in 0..self.cols {
                if j > 0 {
                    f.write_str(" | ")?;
                }
                write!(f, "{:>width$}", cells[i * self.cols + j])?;
            }
            f.write_str(" ]\n")?;
        }
        Ok(())
    }
}

impl<C: Coefficient> fmt::Debug for PolyMatrix<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PolyMatrix {}x{}\n{self}", self.rows, self.cols)
    }
}

/// `s x n` parity check, entry `(m, j) = D^(m j)`.
pub fn build_parity_check<C: Coefficient>(params: CodeParams) -> PolyMatrix<C> {
    PolyMatrix::from_fn(params.s(), params.n(), |m, j| LaurentPoly::d_pow((m * j) as i64))
}

/// The `k x s` parity block of the systematic generator.
pub fn compute_z<C: Coefficient>(params: CodeParams) -> Result<PolyMatrix<C>, CodeError> {
    let s = params.s();
    let mut z = PolyMatrix::zeros(params.k(), s);
    for i in 0..params.k() {
        for j in 0..s {
            let mut num = LaurentPoly::one();
            let mut den = LaurentPoly::one();
            for l in (0..s).filter(|&l| l != j) {
                let dl = LaurentPoly::d_pow(l as i64);
                num = &num * &(&LaurentPoly::d_pow((s + i) as i64) - &dl);
                den = &den * &(&LaurentPoly::d_pow(j as i64) - &dl);
            }
            let q = num.exact_div(&den).map_err(|source| CodeError::NotFeedForward { i, j, source })?;
            if !q.is_integral() {
                return Err(CodeError::NonIntegral { i, j });
            }
            z.set(i, j, -q);
        }
    }
    Ok(z)
}

/// Product-of-geometric-series forms of `Z_ij` for `s = 2` and `s = 3`.
pub fn closed_form_z<C: Coefficient>(params: CodeParams, i: usize, j: usize) -> Result<LaurentPoly<C>, CodeError> {
    let (s, k) = (params.s(), params.k());
    if s != 2 && s != 3 {
        return Err(CodeError::Unsupported { s });
    }
    if i >= k || j >= s {
        return Err(CodeError::OutOfRange { i, j, k, s });
    }
    let ii = i as i64;
    let run = |lo: i64, hi: i64| geometric::<C>(lo, 1, (hi - lo + 1) as usize);
    let evens = |top: i64| geometric::<C>(0, 2, (top / 2 + 1) as usize);
    let p = match (s, j) {
        // D + D^2 + ... + D^(i+1)
        (2, 0) => run(1, ii + 1),
        // -(1 + D + ... + D^(i+1))
        (2, _) => -run(0, ii + 1),
        (3, 0) if i % 2 == 0 => -(&LaurentPoly::d_pow(3) * &(&evens(ii) * &run(0, ii))),
        (3, 0) => -(&LaurentPoly::d_pow(3) * &(&run(0, ii + 1) * &evens(ii - 1))),
        (3, 1) => &run(0, ii + 2) * &run(1, ii + 1),
        (3, _) if i % 2 == 0 => -(&run(0, ii + 2) * &evens(ii)),
        (3, _) => -(&evens(ii + 1) * &run(0, ii + 1)),
        _ => unreachable!(),
    };
    Ok(p)
}

/// `G = [Z | I_k]`.
pub fn build_generator<C: Coefficient>(params: CodeParams) -> Result<PolyMatrix<C>, CodeError> {
    let z = compute_z::<C>(params)?;
    Ok(generator_from_z(params, &z))
}

pub fn generator_from_z<C: Coefficient>(params: CodeParams, z: &PolyMatrix<C>) -> PolyMatrix<C> {
    let s = params.s();
    PolyMatrix::from_fn(params.k(), params.n(), |i, j| {
        if j < s {
            z.get(i, j).clone()
        } else if j - s == i {
            LaurentPoly::one()
        } else {
            LaurentPoly::zero()
        }
    })
}

/// True iff `G H^T` is identically zero.
pub fn verify_orthogonality<C: Coefficient>(g: &PolyMatrix<C>, h: &PolyMatrix<C>) -> Result<bool, CodeError> {
    Ok(g.mul_transpose(h)?.is_zero())
}

/// Lowest exponent in each column of `G`.
pub fn column_offsets<C: Coefficient>(g: &PolyMatrix<C>) -> Result<Vec<i64>, CodeError> {
    (0..g.cols())
        .map(|j| g.column(j).filter(|p| !p.is_zero()).map(LaurentPoly::min_exp).min().ok_or(CodeError::ZeroColumn(j)))
        .collect()
}

/// Per-column `d_j`: max exponent minus min exponent over the nonzero entries.
pub fn column_spans<C: Coefficient>(g: &PolyMatrix<C>) -> Result<Vec<i64>, CodeError> {
    (0..g.cols())
        .map(|j| {
            let nz: Vec<_> = g.column(j).filter(|p| !p.is_zero()).collect();
            let lo = nz.iter().map(|p| p.min_exp()).min().ok_or(CodeError::ZeroColumn(j))?;
            let hi = nz.iter().filter_map(|p| p.max_exp()).max().ok_or(CodeError::ZeroColumn(j))?;
            Ok(hi - lo)
        })
        .collect()
}

/// `lambda = max_j d_j`.
pub fn lambda_of<C: Coefficient>(g: &PolyMatrix<C>) -> Result<i64, CodeError> {
    Ok(column_spans(g)?.into_iter().max().unwrap_or(0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntryStat {
    pub i: usize,
    pub j: usize,
    pub max_abs: i64,
    pub integral: bool,
}

/// Coefficient statistics of `Z` checked against the known bounds.
///
/// For `s = 2` every coefficient lies in `{-1, 0, 1}`. For `s = 3` the bound
/// is `k`, and the largest coefficient in row `k - 1` of columns 0, 1, 2 is
/// `floor((k-1)/2) + 1`, `k`, `floor(k/2) + 1`. No bound is known for larger
/// `s`; those reports carry observed maxima only.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientReport {
    pub params: CodeParams,
    pub entries: Vec<EntryStat>,
    /// Largest |coefficient| over each column of `Z`.
    pub column_max: Vec<i64>,
    pub bound: Option<i64>,
    /// Expected maxima of row `k - 1`, per column, where known.
    pub expected_last_row: Option<Vec<i64>>,
    pub all_integral: bool,
    pub passes: bool,
}

pub fn coefficient_report<C: Coefficient>(z: &PolyMatrix<C>, params: CodeParams) -> CoefficientReport {
    let (k, s) = (params.k(), params.s());
    let mut entries = Vec::with_capacity(k * s);
    for i in 0..z.rows() {
        for j in 0..z.cols() {
            let p = z.get(i, j);
            let max_abs = p.max_abs_coeff().to_i64().unwrap_or(i64::MAX);
            entries.push(EntryStat { i, j, max_abs, integral: p.is_integral() });
        }
    }
    let column_max: Vec<i64> =
        (0..z.cols()).map(|j| entries.iter().filter(|e| e.j == j).map(|e| e.max_abs).max().unwrap_or(0)).collect();
    let all_integral = entries.iter().all(|e| e.integral);
    let (bound, expected_last_row) = match s {
        2 => (Some(1), Some(vec![1, 1])),
        3 => {
            let k = k as i64;
            (Some(k), Some(vec![(k - 1) / 2 + 1, k, k / 2 + 1]))
        }
        _ => (None, None),
    };
    let within = bound.is_none_or(|b| entries.iter().all(|e| e.max_abs <= b));
    let last_row_ok = expected_last_row.as_ref().is_none_or(|exp| {
        entries.iter().filter(|e| e.i + 1 == k).all(|e| e.max_abs == exp[e.j])
    });
    CoefficientReport {
        params,
        entries,
        column_max,
        bound,
        expected_last_row,
        all_integral,
        passes: all_integral && within && last_row_ok,
    }
}

impl fmt::Display for CoefficientReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "coefficient report for {}", self.params)?;
        writeln!(f, "  integral: {}", self.all_integral)?;
        writeln!(f, "  column maxima: {:?}", self.column_max)?;
        match self.bound {
            Some(b) => writeln!(f, "  bound: |c| <= {b}")?,
            None => writeln!(f, "  bound: none known (observed only)")?,
        }
        if let Some(exp) = &self.expected_last_row {
            writeln!(f, "  expected row {} maxima: {:?}", self.params.k() - 1, exp)?;
        }
        writeln!(f, "  result: {}", if self.passes { "PASS" } else { "FAIL" })
    }
}

/// Converts an integral polynomial to `(min_exp, integer coefficients)`.
pub fn integer_coeffs<C: Coefficient>(p: &LaurentPoly<C>) -> Option<(i64, Vec<i64>)> {
    if !p.is_integral() {
        return None;
    }
    let cs = p.coeffs().iter().map(|c| c.to_i64()).collect::<Option<Vec<_>>>()?;
    Some((p.min_exp(), cs))
}

/// Builds a polynomial matrix from integer coefficient rows; used by golden tests.
pub fn poly_from_ints<C: Coefficient>(min_exp: i64, coeffs: &[i64]) -> LaurentPoly<C> {
    LaurentPoly::from_coeffs(min_exp, coeffs.iter().map(|&c| from_i64(c)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;
    use num_traits::One;

    type P = LaurentPoly<Rational>;

    fn cp(n: usize, k: usize) -> CodeParams {
        CodeParams::new(n, k).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(CodeParams::new(4, 0).is_err());
        assert!(CodeParams::new(4, 4).is_err());
        assert_eq!(cp(7, 4).s(), 3);
    }

    #[test]
    fn parity_check_shapes() {
        let h = build_parity_check::<Rational>(cp(4, 2));
        assert_eq!(h.to_string(), "[   1 |   1 |   1 |   1 ]\n[   1 |   D | D^2 | D^3 ]\n");
        let h21 = build_parity_check::<Rational>(cp(2, 1));
        assert_eq!((h21.rows(), h21.cols()), (1, 2));
        assert!(h21.get(0, 1).is_one());
        let h74 = build_parity_check::<Rational>(cp(7, 4));
        assert_eq!(*h74.get(2, 3), P::d_pow(6));
    }

    #[test]
    fn z_for_cp42() {
        let z = compute_z::<Rational>(cp(4, 2)).unwrap();
        assert_eq!(*z.get(0, 0), poly_from_ints(1, &[1]));
        assert_eq!(*z.get(0, 1), poly_from_ints(0, &[-1, -1]));
        assert_eq!(*z.get(1, 0), poly_from_ints(1, &[1, 1]));
        assert_eq!(*z.get(1, 1), poly_from_ints(0, &[-1, -1, -1]));
    }

    #[test]
    fn z_for_cp31() {
        let z = compute_z::<Rational>(cp(3, 1)).unwrap();
        assert_eq!(*z.get(0, 0), P::d_pow(1));
        let x: f64 = 0.37;
        // s = 2, i = 0: the numerator is D^(s+i) - D = D^2 - D
        let direct = -(x.powi(2) - x) / (1.0 - x);
        assert!((z.get(0, 0).eval_at(x).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn closed_forms_spot_values() {
        let c = closed_form_z::<Rational>(cp(4, 2), 0, 1).unwrap();
        assert_eq!(c, poly_from_ints(0, &[-1, -1]));
        let s3 = cp(5, 2);
        let expect = &poly_from_ints::<Rational>(0, &[1, 1, 1, 1]) * &poly_from_ints(1, &[1, 1]);
        assert_eq!(closed_form_z::<Rational>(s3, 1, 1).unwrap(), expect);
        assert_eq!(closed_form_z::<Rational>(s3, 1, 1).unwrap(), *compute_z::<Rational>(s3).unwrap().get(1, 1));
        assert_eq!(closed_form_z::<Rational>(s3, 0, 0).unwrap(), -P::d_pow(3));
        assert!(matches!(closed_form_z::<Rational>(cp(6, 2), 0, 0), Err(CodeError::Unsupported { s: 4 })));
        assert!(matches!(closed_form_z::<Rational>(cp(4, 2), 2, 0), Err(CodeError::OutOfRange { .. })));
    }

    #[test]
    fn generator_identity_block() {
        let p = cp(6, 3);
        let g = build_generator::<Rational>(p).unwrap();
        for i in 0..3 {
            for i2 in 0..3 {
                let e = g.get(i, p.s() + i2);
                assert_eq!(e.is_one(), i == i2);
                assert_eq!(e.is_zero(), i != i2);
            }
        }
    }

    #[test]
    fn orthogonality_and_its_failure() {
        let p = cp(5, 2);
        let g = build_generator::<Rational>(p).unwrap();
        let h = build_parity_check(p);
        assert!(verify_orthogonality(&g, &h).unwrap());
        let bare = generator_from_z(p, &PolyMatrix::zeros(2, 3));
        assert!(!verify_orthogonality(&bare, &h).unwrap());
        let h_wrong = build_parity_check::<Rational>(cp(6, 2));
        assert!(verify_orthogonality(&g, &h_wrong).is_err());
    }

    #[test]
    fn spans_and_lambda() {
        let g = build_generator::<Rational>(cp(4, 2)).unwrap();
        assert_eq!(column_spans(&g).unwrap(), vec![1, 2, 0, 0]);
        assert_eq!(column_offsets(&g).unwrap(), vec![1, 0, 0, 0]);
        assert_eq!(lambda_of(&g).unwrap(), 2);
        let g74 = build_generator::<Rational>(cp(7, 4)).unwrap();
        assert_eq!(lambda_of(&g74).unwrap(), 8);
        let g52 = build_generator::<Rational>(cp(5, 2)).unwrap();
        assert_eq!(lambda_of(&g52).unwrap(), 4);
        let zero_col = PolyMatrix::<Rational>::zeros(2, 2);
        assert_eq!(lambda_of(&zero_col), Err(CodeError::ZeroColumn(0)));
    }

    #[test]
    fn coefficient_report_s3() {
        let p = cp(9, 6);
        let z = compute_z::<Rational>(p).unwrap();
        let rep = coefficient_report(&z, p);
        assert!(rep.passes, "{rep}");
        assert_eq!(rep.column_max[1], 6);
        let p5 = cp(8, 5);
        let rep5 = coefficient_report(&compute_z::<Rational>(p5).unwrap(), p5);
        assert_eq!(rep5.column_max[0], 3);
        assert!(rep5.passes);
    }

    #[test]
    fn coefficient_report_large_s_has_no_bound() {
        let p = cp(7, 2);
        let rep = coefficient_report(&compute_z::<Rational>(p).unwrap(), p);
        assert_eq!(rep.bound, None);
        assert!(rep.passes);
        assert!(rep.column_max.iter().all(|&m| m >= 1));
    }
}
