//! Peeling decoder for the CP(n, k) code.
//!
//! The grid holds one vector symbol `c[i][j]` per (row, column); row `i` of
//! column `j` is the coefficient of `D^i` in worker `j`'s output polynomial.
//! Every line `{(i - m j, j) : 0 <= j < n}` with slope `m < s` sums to zero,
//! and symbols outside a column's occupied rows are structural zeros.
//!
//! Decoding sorts the stragglers `t_0 < ... < t_{s'-1}` and walks a cursor
//! down each straggler column starting at row 0. Straggler `t_q` is always
//! extended with the line of slope `s' - 1 - q`. Phases `p = 0..s'-1` run
//! `(s'-1-p)(t_{p+1} - t_p)` rounds over stragglers `p, p-1, ..., 0`; the
//! final phase cycles `q = s'-1, ..., 0` until every straggler column is
//! exhausted. Each fired line holds exactly one unknown.

use std::fmt;

use thiserror::Error;

use crate::codegen::CodeParams;
use crate::planner::JobPlan;
use crate::scalar::Field;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PeelError {
    #[error("line of slope {slope} through index {line} has {unknowns} unknowns, expected exactly one")]
    NotPeelable { slope: usize, line: i64, unknowns: usize },
    #[error("{count} stragglers exceed the code's resilience s = {s}")]
    TooManyStragglers { count: usize, s: usize },
    #[error("invalid straggler set {0:?}")]
    InvalidStragglers(Vec<usize>),
    #[error("column {0} has unknown symbols but is not listed as a straggler")]
    StragglerMismatch(usize),
    #[error("symbol ({row}, {col}) is still unknown")]
    IncompleteDecode { row: i64, col: usize },
    #[error("symbol ({row}, {col}) is already known")]
    Overwrite { row: i64, col: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// Sorted, distinct indices of failed workers.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StragglerSet(Vec<usize>);

impl StragglerSet {
    pub fn new(mut indices: Vec<usize>, n: usize) -> Result<Self, PeelError> {
        let orig = indices.clone();
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) || indices.iter().any(|&t| t >= n) {
            return Err(PeelError::InvalidStragglers(orig));
        }
        Ok(Self(indices))
    }

    pub fn none() -> Self {
        Self(Vec::new())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }
}

/// State of one grid position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell<'a, T> {
    /// Outside the column's occupied rows; always zero.
    Structural,
    Unknown,
    Known(&'a [T]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinePoint {
    pub row: i64,
    pub col: usize,
    pub structural: bool,
}

/// Index of the slope-`m` line through `(row, col)`.
pub fn line_through(row: i64, col: usize, slope: usize) -> i64 {
    row + (slope * col) as i64
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolGrid<T> {
    params: CodeParams,
    block_len: usize,
    offsets: Vec<i64>,
    cells: Vec<Vec<Option<Vec<T>>>>,
}

impl<T: Field> SymbolGrid<T> {
    /// All symbols start unknown.
    pub fn new(params: CodeParams, offsets: Vec<i64>, lengths: &[usize], block_len: usize) -> Result<Self, PeelError> {
        if offsets.len() != params.n() || lengths.len() != params.n() {
            return Err(PeelError::ShapeMismatch(format!(
                "{} offsets and {} lengths for n = {}",
                offsets.len(),
                lengths.len(),
                params.n()
            )));
        }
        let cells = lengths.iter().map(|&l| vec![None; l]).collect();
        Ok(Self { params, block_len, offsets, cells })
    }

    pub fn for_plan(plan: &JobPlan, block_len: usize) -> Self {
        Self::new(plan.params(), plan.offsets(), &plan.lengths(), block_len).expect("plan shape matches its params")
    }

    /// Fully known grid holding every worker's task outputs.
    pub fn from_outputs(plan: &JobPlan, outputs: Vec<Vec<Vec<T>>>) -> Result<Self, PeelError> {
        let block_len = outputs.iter().flatten().map(Vec::len).next().unwrap_or(0);
        let mut grid = Self::for_plan(plan, block_len);
        for (j, col) in outputs.into_iter().enumerate() {
            grid.set_column(j, col)?;
        }
        Ok(grid)
    }

    pub fn params(&self) -> CodeParams {
        self.params
    }

    pub fn n(&self) -> usize {
        self.params.n()
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn offset(&self, j: usize) -> i64 {
        self.offsets[j]
    }

    pub fn len(&self, j: usize) -> usize {
        self.cells[j].len()
    }

    pub fn end(&self, j: usize) -> i64 {
        self.offsets[j] + self.cells[j].len() as i64
    }

    fn slot(&self, row: i64, col: usize) -> Option<usize> {
        let t = row - self.offsets[col];
        (t >= 0 && t < self.cells[col].len() as i64).then_some(t as usize)
    }

    pub fn cell(&self, row: i64, col: usize) -> Cell<'_, T> {
        match self.slot(row, col) {
            None => Cell::Structural,
            Some(t) => match &self.cells[col][t] {
                Some(v) => Cell::Known(v),
                None => Cell::Unknown,
            },
        }
    }

    pub fn is_known(&self, row: i64, col: usize) -> bool {
        !matches!(self.cell(row, col), Cell::Unknown)
    }

    /// Stores a symbol; known symbols are never overwritten.
    pub fn set_symbol(&mut self, row: i64, col: usize, value: Vec<T>) -> Result<(), PeelError> {
        if value.len() != self.block_len {
            return Err(PeelError::ShapeMismatch(format!("symbol of length {} for blocks of {}", value.len(), self.block_len)));
        }
        let t = self
            .slot(row, col)
            .ok_or_else(|| PeelError::ShapeMismatch(format!("({row}, {col}) is outside column {col}")))?;
        let cell = &mut self.cells[col][t];
        if cell.is_some() {
            return Err(PeelError::Overwrite { row, col });
        }
        *cell = Some(value);
        Ok(())
    }

    /// Marks every symbol of column `j` known.
    pub fn set_column(&mut self, j: usize, values: Vec<Vec<T>>) -> Result<(), PeelError> {
        if values.len() != self.cells[j].len() {
            return Err(PeelError::ShapeMismatch(format!(
                "column {j} expects {} symbols, got {}",
                self.cells[j].len(),
                values.len()
            )));
        }
        let base = self.offsets[j];
        for (t, v) in values.into_iter().enumerate() {
            self.set_symbol(base + t as i64, j, v)?;
        }
        Ok(())
    }

    /// Forgets every symbol of column `j`.
    pub fn erase_column(&mut self, j: usize) {
        self.cells[j].iter_mut().for_each(|c| *c = None);
    }

    pub fn column_values(&self, j: usize) -> Option<Vec<Vec<T>>> {
        self.cells[j].iter().cloned().collect()
    }

    pub fn unknown_columns(&self) -> Vec<usize> {
        (0..self.n()).filter(|&j| self.cells[j].iter().any(Option::is_none)).collect()
    }

    pub fn unknown_count(&self) -> usize {
        self.cells.iter().flatten().filter(|c| c.is_none()).count()
    }

    /// The `n` positions `(i - m j, j)` of the slope-`m` line with index `i`.
    pub fn line_symbols(&self, slope: usize, line: i64) -> Vec<LinePoint> {
        (0..self.n())
            .map(|j| {
                let row = line - (slope * j) as i64;
                LinePoint { row, col: j, structural: self.slot(row, j).is_none() }
            })
            .collect()
    }

    /// Sum of all symbols on a line, `None` while any of them is unknown.
    pub fn line_residual(&self, slope: usize, line: i64) -> Option<Vec<T>> {
        let mut acc = vec![T::zero(); self.block_len];
        for p in self.line_symbols(slope, line) {
            match self.cell(p.row, p.col) {
                Cell::Structural => {}
                Cell::Unknown => return None,
                Cell::Known(v) => add_into(&mut acc, v),
            }
        }
        Some(acc)
    }

    /// Solves the single unknown on a line as the negated sum of the others.
    pub fn peel_step(&mut self, slope: usize, line: i64) -> Result<(i64, usize), PeelError> {
        let points = self.line_symbols(slope, line);
        let unknown: Vec<&LinePoint> =
            points.iter().filter(|p| matches!(self.cell(p.row, p.col), Cell::Unknown)).collect();
        if unknown.len() != 1 {
            return Err(PeelError::NotPeelable { slope, line, unknowns: unknown.len() });
        }
        let target = *unknown[0];
        let mut acc = vec![T::zero(); self.block_len];
        for p in &points {
            if let Cell::Known(v) = self.cell(p.row, p.col) {
                add_into(&mut acc, v);
            }
        }
        let value = acc.into_iter().map(|v| -v).collect();
        self.set_symbol(target.row, target.col, value)?;
        Ok((target.row, target.col))
    }
}

fn add_into<T: Field>(acc: &mut [T], v: &[T]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a = a.clone() + b.clone();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecodeMode {
    /// Stop once every systematic column is known.
    #[default]
    SystematicOnly,
    /// Recover every symbol of every straggler.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Peeled { slope: usize, line: i64 },
    /// The cursor passed a symbol that was already known (a structural zero
    /// above the column's first task, or one delivered earlier).
    Given,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceStep {
    pub row: i64,
    pub col: usize,
    pub kind: StepKind,
    pub phase: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DecodeTrace {
    pub stragglers: Vec<usize>,
    pub steps: Vec<TraceStep>,
    /// `phase_counts[p][y]`: cursor advances on straggler `t_y` during phase `p`.
    pub phase_counts: Vec<Vec<usize>>,
}

impl DecodeTrace {
    /// Symbols of straggler `t_y` resolved by the end of phase `p`.
    pub fn eta_hat(&self, p: usize, y: usize) -> usize {
        self.phase_counts.iter().take(p + 1).map(|c| c[y]).sum()
    }

    pub fn peeled(&self) -> impl Iterator<Item = &TraceStep> {
        self.steps.iter().filter(|s| matches!(s.kind, StepKind::Peeled { .. }))
    }

    /// CSV with header `step,row,col,slope`; `slope` is empty for given symbols.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,row,col,slope\n");
        for (idx, s) in self.steps.iter().enumerate() {
            match s.kind {
                StepKind::Peeled { slope, .. } => out.push_str(&format!("{idx},{},{},{slope}\n", s.row, s.col)),
                StepKind::Given => out.push_str(&format!("{idx},{},{},\n", s.row, s.col)),
            }
        }
        out
    }
}

impl fmt::Display for DecodeTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "stragglers {:?}, {} peeled steps", self.stragglers, self.peeled().count())?;
        for (p, c) in self.phase_counts.iter().enumerate() {
            writeln!(f, "  phase {p}: {c:?}")?;
        }
        Ok(())
    }
}

struct Peeler<'g, T> {
    grid: &'g mut SymbolGrid<T>,
    t: Vec<usize>,
    cursor: Vec<i64>,
    end: Vec<i64>,
    trace: DecodeTrace,
}

impl<T: Field> Peeler<'_, T> {
    fn exhausted(&self, q: usize) -> bool {
        self.cursor[q] >= self.end[q]
    }

    fn systematic_done(&self) -> bool {
        let params = self.grid.params();
        (0..self.t.len()).all(|q| !params.is_systematic(self.t[q]) || self.exhausted(q))
    }

    /// Resolves the next symbol of straggler `t_q`, if any remain.
    fn advance(&mut self, q: usize, phase: usize) -> Result<(), PeelError> {
        if self.exhausted(q) {
            return Ok(());
        }
        let (row, col) = (self.cursor[q], self.t[q]);
        let kind = if self.grid.is_known(row, col) {
            StepKind::Given
        } else {
            let slope = self.t.len() - 1 - q;
            let line = line_through(row, col, slope);
            let got = self.grid.peel_step(slope, line)?;
            debug_assert_eq!(got, (row, col));
            StepKind::Peeled { slope, line }
        };
        self.trace.steps.push(TraceStep { row, col, kind, phase });
        self.trace.phase_counts[phase][q] += 1;
        self.cursor[q] += 1;
        Ok(())
    }

    fn run(mut self, mode: DecodeMode) -> Result<DecodeTrace, PeelError> {
        let sp = self.t.len();
        let stop = |p: &Self| mode == DecodeMode::SystematicOnly && p.systematic_done();
        if sp == 0 || stop(&self) {
            return Ok(self.trace);
        }
        for p in 0..sp - 1 {
            let rounds = (sp - 1 - p) * (self.t[p + 1] - self.t[p]);
            for _ in 0..rounds {
                for q in (0..=p).rev() {
                    self.advance(q, p)?;
                    if stop(&self) {
                        return Ok(self.trace);
                    }
                }
            }
        }
        while (0..sp).any(|q| !self.exhausted(q)) {
            for q in (0..sp).rev() {
                self.advance(q, sp - 1)?;
                if stop(&self) {
                    return Ok(self.trace);
                }
            }
        }
        Ok(self.trace)
    }
}

/// Recovers the straggler columns of `grid` in peeling order.
pub fn decode<T: Field>(grid: &mut SymbolGrid<T>, stragglers: &StragglerSet, mode: DecodeMode) -> Result<DecodeTrace, PeelError> {
    let s = grid.params().s();
    if stragglers.len() > s {
        return Err(PeelError::TooManyStragglers { count: stragglers.len(), s });
    }
    if stragglers.indices().iter().any(|&t| t >= grid.n()) {
        return Err(PeelError::InvalidStragglers(stragglers.indices().to_vec()));
    }
    if let Some(&j) = grid.unknown_columns().iter().find(|&&j| !stragglers.contains(j)) {
        return Err(PeelError::StragglerMismatch(j));
    }
    let t = stragglers.indices().to_vec();
    let sp = t.len();
    let end = t.iter().map(|&c| grid.end(c)).collect();
    let peeler = Peeler {
        grid,
        cursor: vec![0; sp],
        end,
        trace: DecodeTrace { stragglers: t.clone(), steps: Vec::new(), phase_counts: vec![vec![0; sp]; sp.max(1)] },
        t,
    };
    peeler.run(mode)
}

/// Closed-form count of symbols recovered from straggler `t_y` after phase `p`:
/// `sum_{i=y..=p} (s-1-i)(t_{i+1} - t_i)` for `y <= p`, else 0.
pub fn eta(p: usize, y: usize, stragglers: &[usize], s: usize) -> i64 {
    if y > p {
        return 0;
    }
    (y..=p).map(|i| (s as i64 - 1 - i as i64) * (stragglers[i + 1] as i64 - stragglers[i] as i64)).sum()
}

/// Row shift between where the slope `s-1-w` and slope `s-1-u` lines through
/// a common point of straggler `t_u` meet straggler `t_v`.
pub fn intersection_offset(t_u: usize, t_v: usize, u: usize, w: usize) -> i64 {
    -(t_v as i64 - t_u as i64) * (u as i64 - w as i64)
}

/// Concatenates the systematic columns into `A x` and strips padding.
pub fn assemble_result<T: Field>(grid: &SymbolGrid<T>, plan: &JobPlan, rows: usize) -> Result<Vec<T>, PeelError> {
    let params = plan.params();
    let mut out = Vec::with_capacity(plan.delta() * grid.block_len());
    for j in params.s()..params.n() {
        for t in 0..grid.len(j) {
            let row = grid.offset(j) + t as i64;
            match grid.cell(row, j) {
                Cell::Known(v) => out.extend_from_slice(v),
                _ => return Err(PeelError::IncompleteDecode { row, col: j }),
            }
        }
    }
    if out.len() < rows {
        return Err(PeelError::ShapeMismatch(format!("{} decoded rows, expected {rows}", out.len())));
    }
    out.truncate(rows);
    Ok(out)
}
