//! Block orthogonal matching pursuit.
//!
//! Each iteration picks the unselected block `j` maximizing `‖E[j]'r‖₂`
//! (ties go to the lowest index), then re-solves least squares over the
//! union of all selected blocks and recomputes the residual `r`. Exactly
//! `k_blocks` iterations are run. Columns of `E` are used as given.

use nalgebra::{DMatrix, DVector};

use crate::block_model::{BlockSparseVec, EquivalentDictionary};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BompConfig {
    pub k_blocks: usize,
    /// Relative threshold on the diagonal of `R` in the QR of the selected columns.
    pub ls_tol: f64,
}

impl BompConfig {
    pub const DEFAULT_LS_TOL: f64 = 1e-10;

    pub fn new(k_blocks: usize) -> Self {
        Self {
            k_blocks,
            ls_tol: Self::DEFAULT_LS_TOL,
        }
    }
}

/// Decoder output together with the residual norm after every iteration.
#[derive(Debug, Clone)]
pub struct BompTrace {
    pub theta: BlockSparseVec,
    /// `‖y‖` followed by the residual norm after each selection.
    pub residual_norms: Vec<f64>,
}

pub fn bomp_decode(
    e: &EquivalentDictionary,
    y: &DVector<f64>,
    cfg: &BompConfig,
) -> Result<BlockSparseVec> {
    bomp_decode_traced(e, y, cfg).map(|t| t.theta)
}

pub fn bomp_decode_traced(
    e: &EquivalentDictionary,
    y: &DVector<f64>,
    cfg: &BompConfig,
) -> Result<BompTrace> {
    let bs = e.structure();
    let mat = e.matrix();
    if y.len() != mat.nrows() {
        return Err(Error::Dimension(format!(
            "measurement has length {} but dictionary has {} rows",
            y.len(),
            mat.nrows()
        )));
    }
    if cfg.k_blocks == 0 || cfg.k_blocks > bs.num_blocks() {
        return Err(Error::InvalidArgument(format!(
            "k_blocks must lie in 1..={}, got {}",
            bs.num_blocks(),
            cfg.k_blocks
        )));
    }

    let mut selected: Vec<usize> = Vec::with_capacity(cfg.k_blocks);
    let mut residual = y.clone();
    let mut residual_norms = vec![y.norm()];
    let mut coeffs = DVector::zeros(0);
    let mut columns: Vec<usize> = Vec::new();

    for _ in 0..cfg.k_blocks {
        let correlations = mat.tr_mul(&residual);
        let mut best: Option<(usize, f64)> = None;
        for j in (0..bs.num_blocks()).filter(|j| !selected.contains(j)) {
            let score: f64 = correlations.as_slice()[bs.range(j)]
                .iter()
                .map(|c| c * c)
                .sum();
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((j, score));
            }
        }
        let (j, _) = best.expect("k_blocks <= number of blocks");
        selected.push(j);
        columns.extend(bs.range(j));

        let sub = mat.select_columns(&columns);
        coeffs = least_squares(&sub, y, cfg.ls_tol).ok_or_else(|| Error::SingularSupport {
            support: sorted(&selected),
        })?;
        residual = y - &sub * &coeffs;
        residual_norms.push(residual.norm());
    }

    let mut values = DVector::zeros(bs.total());
    for (&col, &c) in columns.iter().zip(coeffs.iter()) {
        values[col] = c;
    }
    Ok(BompTrace {
        theta: BlockSparseVec::new(values, bs.clone(), selected)?,
        residual_norms,
    })
}

/// Decodes every column of `y` (M×L) into a K×L coefficient matrix.
pub fn bomp_decode_columns(
    e: &EquivalentDictionary,
    y: &DMatrix<f64>,
    cfg: &BompConfig,
) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(e.structure().total(), y.ncols());
    for (l, col) in y.column_iter().enumerate() {
        let theta = bomp_decode(e, &col.into_owned(), cfg)?;
        out.set_column(l, theta.values());
    }
    Ok(out)
}

fn sorted(v: &[usize]) -> Vec<usize> {
    let mut v = v.to_vec();
    v.sort_unstable();
    v
}

/// Least-squares coefficients via Householder QR; `None` if the columns are
/// numerically dependent or outnumber the rows.
fn least_squares(a: &DMatrix<f64>, y: &DVector<f64>, tol: f64) -> Option<DVector<f64>> {
    if a.ncols() > a.nrows() {
        return None;
    }
    let qr = a.clone().qr();
    let r = qr.r();
    let diag = r.diagonal().map(f64::abs);
    let largest = diag.max();
    if !(largest > 0.0) || diag.min() <= tol * largest {
        return None;
    }
    let qty = qr.q().tr_mul(y);
    r.solve_upper_triangular(&qty)
}
