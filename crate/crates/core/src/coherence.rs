//! Coherence measures of an equivalent dictionary and the masking operators
//! the weighted objective is built from.
//!
//! Every entry of a K×K Gram matrix falls in exactly one of three classes:
//! the diagonal, an off-diagonal entry inside a diagonal block, or an entry
//! of an off-diagonal block. The totals below are sums of squares over those
//! classes:
//!
//! * `norm_penalty` (η): `Σ_m (G_mm − 1)²`
//! * `total_inter` (μ_B^t): squared entries of the off-diagonal blocks
//! * `total_sub` (ν^t): squared off-diagonal entries of the diagonal blocks
//!
//! and `η + μ_B^t + ν^t = ‖G − I‖²_F`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::block_model::{sym_eig, BlockStructure, EquivalentDictionary, GramParts};
use crate::error::{Error, Result};

/// Trade-off weight between sub-block and inter-block coherence, `0 < α < 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Alpha(f64);

impl Alpha {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(Error::Alpha(value))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Alpha {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<Alpha> for f64 {
    fn from(a: Alpha) -> f64 {
        a.0
    }
}

/// Position class of a Gram-matrix entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryClass {
    Diagonal,
    /// Off-diagonal entry inside a diagonal block.
    WithinBlock,
    /// Entry of an off-diagonal block.
    CrossBlock,
}

#[inline]
pub fn entry_class(structure: &BlockStructure, row: usize, col: usize) -> EntryClass {
    if row == col {
        EntryClass::Diagonal
    } else if structure.block_of(row) == structure.block_of(col) {
        EntryClass::WithinBlock
    } else {
        EntryClass::CrossBlock
    }
}

/// Which term of the objective a mask operator isolates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskKind {
    /// Normalization penalty η.
    Eta,
    /// Total inter-block coherence μ_B^t.
    Mu,
    /// Total sub-block coherence ν^t.
    Nu,
}

/// Per-class sums of squares, accumulated in one pass.
#[derive(Debug, Clone, Copy, Default)]
struct ClassSums {
    eta: f64,
    inter: f64,
    sub: f64,
}

fn class_sums(g: &GramParts) -> ClassSums {
    let m = g.gram();
    let labels = g.structure().labels();
    let k = m.nrows();
    let mut sums = ClassSums::default();
    for c in 0..k {
        for r in 0..k {
            let v = m[(r, c)];
            if r == c {
                sums.eta += (v - 1.0) * (v - 1.0);
            } else if labels[r] == labels[c] {
                sums.sub += v * v;
            } else {
                sums.inter += v * v;
            }
        }
    }
    sums
}

/// Mutual coherence `max_{i≠j} |E_i'E_j| / (‖E_i‖‖E_j‖)`.
pub fn mu(e: &DMatrix<f64>) -> Result<f64> {
    if e.ncols() < 2 {
        return Err(Error::InvalidArgument(
            "coherence needs at least two columns".into(),
        ));
    }
    let norms: Vec<f64> = e.column_iter().map(|c| c.norm()).collect();
    if let Some(j) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::ZeroColumn(j));
    }
    let g = e.tr_mul(e);
    let mut best: f64 = 0.0;
    for j in 0..e.ncols() {
        for i in 0..j {
            best = best.max(g[(i, j)].abs() / (norms[i] * norms[j]));
        }
    }
    Ok(best)
}

/// Mutual coherence read off a Gram matrix.
pub fn mu_from_gram(g: &GramParts) -> Result<f64> {
    let m = g.gram();
    let k = m.nrows();
    if k < 2 {
        return Err(Error::InvalidArgument(
            "coherence needs at least two columns".into(),
        ));
    }
    if let Some(j) = (0..k).find(|&j| m[(j, j)] <= 0.0) {
        return Err(Error::ZeroColumn(j));
    }
    let mut best: f64 = 0.0;
    for j in 0..k {
        for i in 0..j {
            best = best.max(m[(i, j)].abs() / (m[(i, i)] * m[(j, j)]).sqrt());
        }
    }
    Ok(best)
}

/// Inter-block coherence `max_{i≠j} σ_max(G[i,j]) / s`.
///
/// Only defined for equal block sizes and at least two blocks.
pub fn mu_block(g: &GramParts) -> Result<f64> {
    let bs = g.structure();
    let s = bs.uniform_size().ok_or(Error::UnequalBlocks)?;
    let nb = bs.num_blocks();
    if nb < 2 {
        return Err(Error::InvalidArgument(
            "inter-block coherence needs at least two blocks".into(),
        ));
    }
    let mut best: f64 = 0.0;
    for j in 0..nb {
        for i in 0..j {
            let b = g.block(i, j);
            let btb = b.tr_mul(&b);
            let lmax = sym_eig(&btb)?.values[0].max(0.0);
            best = best.max(lmax.sqrt());
        }
    }
    Ok(best / s as f64)
}

/// Sub-block coherence: largest off-diagonal magnitude inside any diagonal block.
pub fn nu_sub(g: &GramParts) -> f64 {
    let bs = g.structure();
    let mut best: f64 = 0.0;
    for j in 0..bs.num_blocks() {
        let b = g.block(j, j);
        for c in 0..b.ncols() {
            for r in 0..b.nrows() {
                if r != c {
                    best = best.max(b[(r, c)].abs());
                }
            }
        }
    }
    best
}

/// μ_B^t: sum of squared Frobenius norms of all off-diagonal blocks.
pub fn total_inter(g: &GramParts) -> f64 {
    class_sums(g).inter
}

/// ν^t: sum of squared off-diagonal entries of the diagonal blocks.
pub fn total_sub(g: &GramParts) -> f64 {
    class_sums(g).sub
}

/// η: `Σ_m (G_mm − 1)²`.
pub fn norm_penalty(g: &GramParts) -> f64 {
    class_sums(g).eta
}

/// Weighted objective `½η + (1−α)μ_B^t + αν^t`.
pub fn objective(g: &GramParts, alpha: Alpha) -> f64 {
    let s = class_sums(g);
    let a = alpha.get();
    0.5 * s.eta + (1.0 - a) * s.inter + a * s.sub
}

/// Returns `(‖E'E − I‖²_F, η + μ_B^t + ν^t)`, computed independently.
pub fn decomposition_check(e: &EquivalentDictionary) -> (f64, f64) {
    let m = e.matrix();
    let k = m.ncols();
    let mut lhs = 0.0;
    for j in 0..k {
        for i in 0..k {
            let dot = m.column(i).dot(&m.column(j));
            let d = if i == j { dot - 1.0 } else { dot };
            lhs += d * d;
        }
    }
    let g = crate::block_model::gram(e);
    let s = class_sums(&g);
    (lhs, s.eta + s.inter + s.sub)
}

/// Right-hand side of the sparse recovery condition `½(1 + 1/μ)`.
pub fn bound_sparse(mu: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "mu must be positive, got {mu}"
        )));
    }
    Ok(0.5 * (1.0 + 1.0 / mu))
}

/// Right-hand side of the block recovery condition
/// `(1/2s)(1/μ_B + s − (s−1)ν/μ_B)`.
///
/// Recovery of a `k`-block-sparse vector is guaranteed when `k` is strictly
/// below the returned value.
pub fn bound_block(mu_block: f64, nu_sub: f64, s: usize) -> Result<f64> {
    if !(mu_block > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "mu_block must be positive, got {mu_block}"
        )));
    }
    if s == 0 {
        return Err(Error::InvalidArgument(
            "block size must be at least 1".into(),
        ));
    }
    let s = s as f64;
    Ok((1.0 / mu_block + s - (s - 1.0) * nu_sub / mu_block) / (2.0 * s))
}

/// The `u` operators: the residual of `G` that a given term penalizes.
///
/// `u_η` holds `G_mm − 1` on the diagonal, `u_μ` the off-diagonal blocks,
/// `u_ν` the off-diagonal entries of the diagonal blocks; zero elsewhere.
pub fn mask_u(g: &GramParts, kind: MaskKind) -> DMatrix<f64> {
    let bs = g.structure();
    let m = g.gram();
    DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| {
        match (kind, entry_class(bs, r, c)) {
            (MaskKind::Eta, EntryClass::Diagonal) => m[(r, c)] - 1.0,
            (MaskKind::Mu, EntryClass::CrossBlock) => m[(r, c)],
            (MaskKind::Nu, EntryClass::WithinBlock) => m[(r, c)],
            _ => 0.0,
        }
    })
}

/// The `h` operators: `G` with the penalized entries replaced by their targets.
///
/// `h_η` sets the diagonal to 1, `h_μ` zeroes the off-diagonal blocks and
/// `h_ν` zeroes the off-diagonal entries of the diagonal blocks.
pub fn mask_h(g: &GramParts, kind: MaskKind) -> DMatrix<f64> {
    let bs = g.structure();
    let m = g.gram();
    DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| {
        match (kind, entry_class(bs, r, c)) {
            (MaskKind::Eta, EntryClass::Diagonal) => 1.0,
            (MaskKind::Mu, EntryClass::CrossBlock) => 0.0,
            (MaskKind::Nu, EntryClass::WithinBlock) => 0.0,
            _ => m[(r, c)],
        }
    })
}

/// Summary of every coherence measure of one Gram matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub mu: f64,
    /// `None` when block sizes differ or there is a single block.
    pub mu_block: Option<f64>,
    pub nu_sub: f64,
    pub total_inter: f64,
    pub total_sub: f64,
    pub norm_penalty: f64,
    #[serde(skip)]
    pub objective_alpha: Option<f64>,
}

impl CoherenceReport {
    pub fn from_gram(g: &GramParts, alpha: Option<Alpha>) -> Result<Self> {
        let sums = class_sums(g);
        let bs = g.structure();
        let mu_block = if bs.uniform_size().is_some() && bs.num_blocks() >= 2 {
            Some(mu_block(g)?)
        } else {
            None
        };
        Ok(Self {
            mu: mu_from_gram(g)?,
            mu_block,
            nu_sub: nu_sub(g),
            total_inter: sums.inter,
            total_sub: sums.sub,
            norm_penalty: sums.eta,
            objective_alpha: alpha.map(|a| objective(g, a)),
        })
    }

    /// ν^t / μ_B^t, the quantity tracked across α sweeps.
    pub fn sub_to_inter_ratio(&self) -> f64 {
        self.total_sub / self.total_inter
    }
}
