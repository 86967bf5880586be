//! Block-structured dictionaries, sensing matrices, equivalent dictionaries
//! and their Gram matrices.
//!
//! A dictionary `D` (N×K) is split into `B` consecutive column blocks of
//! sizes `s_1..s_B`. A sensing matrix `A` (M×N, M < N) maps signals to
//! measurements, and `E = A·D` is the equivalent dictionary whose Gram
//! matrix `G = E'E` carries every coherence quantity in the crate.

use std::ops::Range;

use nalgebra::{DMatrix, DMatrixView, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative eigenvalue threshold below which `DD'` is treated as singular.
pub const RANK_TOL: f64 = 1e-10;

const GRAM_SYMMETRY_TOL: f64 = 1e-12;
const GRAM_PSD_TOL: f64 = 1e-10;

/// Ordered partition of the dictionary columns into blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockStructure {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    labels: Vec<usize>,
}

impl BlockStructure {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::BlockStructure("no blocks".into()));
        }
        if let Some(j) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::BlockStructure(format!("block {j} has size 0")));
        }
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut labels = Vec::with_capacity(sizes.iter().sum());
        let mut offset = 0;
        for (j, &s) in sizes.iter().enumerate() {
            offsets.push(offset);
            labels.extend(std::iter::repeat_n(j, s));
            offset += s;
        }
        Ok(Self {
            sizes,
            offsets,
            labels,
        })
    }

    /// `num_blocks` blocks of identical size.
    pub fn uniform(block_size: usize, num_blocks: usize) -> Result<Self> {
        Self::new(vec![block_size; num_blocks])
    }

    /// Splits `total` columns into blocks of `block_size`; `total` must be a multiple.
    pub fn with_block_size(total: usize, block_size: usize) -> Result<Self> {
        if block_size == 0 || !total.is_multiple_of(block_size) {
            return Err(Error::BlockStructure(format!(
                "{total} columns cannot be split into blocks of {block_size}"
            )));
        }
        Self::uniform(block_size, total / block_size)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    /// Total number of columns `K`.
    pub fn total(&self) -> usize {
        self.labels.len()
    }

    /// Column range of block `j`.
    pub fn range(&self, j: usize) -> Range<usize> {
        self.offsets[j]..self.offsets[j] + self.sizes[j]
    }

    /// Block index owning column `col`.
    pub fn block_of(&self, col: usize) -> usize {
        self.labels[col]
    }

    /// Per-column block labels.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// The common block size, if every block has the same size.
    pub fn uniform_size(&self) -> Option<usize> {
        let first = self.sizes[0];
        self.sizes.iter().all(|&s| s == first).then_some(first)
    }
}

fn ensure_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// N×K dictionary together with its block partition.
#[derive(Debug, Clone)]
pub struct Dict {
    matrix: DMatrix<f64>,
    structure: BlockStructure,
}

impl Dict {
    /// Validates shape (`N ≤ K`, columns match the structure) and full row rank.
    pub fn new(matrix: DMatrix<f64>, structure: BlockStructure) -> Result<Self> {
        ensure_finite(&matrix)?;
        if matrix.ncols() != structure.total() {
            return Err(Error::Dimension(format!(
                "dictionary has {} columns but block structure covers {}",
                matrix.ncols(),
                structure.total()
            )));
        }
        if matrix.nrows() == 0 || matrix.nrows() > matrix.ncols() {
            return Err(Error::Dimension(format!(
                "dictionary must satisfy 0 < N <= K, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let eig = sym_eig(&(&matrix * matrix.transpose()))?;
        let largest = eig.values[0];
        let smallest = eig.values[eig.values.len() - 1];
        if !(largest > 0.0) || smallest <= RANK_TOL * largest {
            return Err(Error::RankDeficient { smallest, largest });
        }
        Ok(Self { matrix, structure })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn structure(&self) -> &BlockStructure {
        &self.structure
    }

    /// Signal dimension `N`.
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    /// Number of atoms `K`.
    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }
}

/// M×N measurement operator with `M < N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix {
    matrix: DMatrix<f64>,
}

impl SensingMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        ensure_finite(&matrix)?;
        if matrix.nrows() == 0 || matrix.nrows() >= matrix.ncols() {
            return Err(Error::Dimension(format!(
                "sensing matrix must satisfy 0 < M < N, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.matrix
    }

    /// Number of measurements `M`.
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    /// Signal dimension `N`.
    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    /// Gram matrix `D'A'AD` of the equivalent dictionary.
    pub fn gram(&self, dict: &Dict) -> Result<GramParts> {
        Ok(gram(&equivalent_dictionary(&self.matrix, dict)?))
    }
}

/// Equivalent dictionary `E = A·D` (M×K) carrying the block partition of `D`.
#[derive(Debug, Clone)]
pub struct EquivalentDictionary {
    matrix: DMatrix<f64>,
    structure: BlockStructure,
}

impl EquivalentDictionary {
    pub fn new(matrix: DMatrix<f64>, structure: BlockStructure) -> Result<Self> {
        ensure_finite(&matrix)?;
        if matrix.ncols() != structure.total() {
            return Err(Error::Dimension(format!(
                "matrix has {} columns but block structure covers {}",
                matrix.ncols(),
                structure.total()
            )));
        }
        Ok(Self { matrix, structure })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn structure(&self) -> &BlockStructure {
        &self.structure
    }

    /// Columns of block `j`.
    pub fn block(&self, j: usize) -> DMatrixView<'_, f64> {
        let r = self.structure.range(j);
        self.matrix.columns(r.start, r.len())
    }
}

/// Forms `E = A·D`.
///
/// Accepts any operator with `N` columns, including square ones, so the
/// product is usable outside the strict `M < N` sensing setting.
pub fn equivalent_dictionary(a: &DMatrix<f64>, dict: &Dict) -> Result<EquivalentDictionary> {
    if a.ncols() != dict.rows() {
        return Err(Error::Dimension(format!(
            "operator has {} columns but dictionary has {} rows",
            a.ncols(),
            dict.rows()
        )));
    }
    Ok(EquivalentDictionary {
        matrix: a * dict.matrix(),
        structure: dict.structure().clone(),
    })
}

/// K×K matrix indexed by block pairs.
///
/// Built by [`gram`] or [`GramParts::new`] it is a symmetric PSD Gram
/// matrix; [`GramParts::from_raw`] admits any square matrix with matching
/// size, which the derivative and surrogate checks need.
#[derive(Debug, Clone)]
pub struct GramParts {
    gram: DMatrix<f64>,
    structure: BlockStructure,
}

impl GramParts {
    /// Validates symmetry (1e-12 relative) and positive semidefiniteness.
    pub fn new(gram: DMatrix<f64>, structure: BlockStructure) -> Result<Self> {
        let parts = Self::from_raw(gram, structure)?;
        let g = &parts.gram;
        let scale = g.norm().max(f64::MIN_POSITIVE);
        let asym = (g - g.transpose()).norm() / scale;
        if asym > GRAM_SYMMETRY_TOL {
            return Err(Error::NotSymmetric(asym));
        }
        let eig = sym_eig(g)?;
        let smallest = eig.values[eig.values.len() - 1];
        if smallest < -GRAM_PSD_TOL * scale {
            return Err(Error::NotPsd(smallest));
        }
        Ok(parts)
    }

    /// Shape check only.
    pub fn from_raw(gram: DMatrix<f64>, structure: BlockStructure) -> Result<Self> {
        ensure_finite(&gram)?;
        let k = structure.total();
        if gram.nrows() != k || gram.ncols() != k {
            return Err(Error::Dimension(format!(
                "expected {k}x{k} matrix, got {}x{}",
                gram.nrows(),
                gram.ncols()
            )));
        }
        Ok(Self { gram, structure })
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn structure(&self) -> &BlockStructure {
        &self.structure
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.gram
    }

    /// The `s_i × s_j` block `G[i,j]`.
    pub fn block(&self, i: usize, j: usize) -> DMatrixView<'_, f64> {
        let r = self.structure.range(i);
        let c = self.structure.range(j);
        self.gram.view((r.start, c.start), (r.len(), c.len()))
    }

    pub(crate) fn ensure_same_layout(&self, other: &GramParts) -> Result<()> {
        if self.structure != other.structure {
            return Err(Error::Dimension(
                "matrices have different block structures".into(),
            ));
        }
        Ok(())
    }
}

/// `G = E'E`.
pub fn gram(e: &EquivalentDictionary) -> GramParts {
    let g = e.matrix.tr_mul(&e.matrix);
    // E'E is symmetric in exact arithmetic; remove the rounding asymmetry.
    let g = (&g + g.transpose()) * 0.5;
    GramParts {
        gram: g,
        structure: e.structure.clone(),
    }
}

/// Length-K coefficient vector whose nonzeros live in the `support` blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSparseVec {
    values: DVector<f64>,
    structure: BlockStructure,
    support: Vec<usize>,
}

impl BlockSparseVec {
    pub fn new(
        values: DVector<f64>,
        structure: BlockStructure,
        mut support: Vec<usize>,
    ) -> Result<Self> {
        if values.len() != structure.total() {
            return Err(Error::Dimension(format!(
                "vector has length {} but block structure covers {}",
                values.len(),
                structure.total()
            )));
        }
        support.sort_unstable();
        support.dedup();
        if let Some(&j) = support.iter().find(|&&j| j >= structure.num_blocks()) {
            return Err(Error::BlockStructure(format!(
                "support block {j} out of range"
            )));
        }
        for (col, &v) in values.iter().enumerate() {
            if v != 0.0 && support.binary_search(&structure.block_of(col)).is_err() {
                return Err(Error::InvalidArgument(format!(
                    "entry {col} is nonzero outside the declared support"
                )));
            }
        }
        Ok(Self {
            values,
            structure,
            support,
        })
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn structure(&self) -> &BlockStructure {
        &self.structure
    }

    /// Declared active blocks, ascending.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Entries of block `j`.
    pub fn block(&self, j: usize) -> &[f64] {
        &self.values.as_slice()[self.structure.range(j)]
    }

    /// Number of blocks with nonzero Euclidean norm.
    pub fn block_l20(&self) -> usize {
        (0..self.structure.num_blocks())
            .filter(|&j| self.block(j).iter().any(|&v| v != 0.0))
            .count()
    }
}

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted descending.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: DVector<f64>,
    /// Orthonormal eigenvectors stored as columns, in the order of `values`.
    pub vectors: DMatrix<f64>,
}

impl SymEig {
    /// `V·diag(λ)·V'`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let scaled = &self.vectors * DMatrix::from_diagonal(&self.values);
        scaled * self.vectors.transpose()
    }
}

/// Symmetric eigendecomposition; the input is symmetrized as `(S + S')/2` first.
pub fn sym_eig(s: &DMatrix<f64>) -> Result<SymEig> {
    if !s.is_square() {
        return Err(Error::Dimension(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    ensure_finite(s)?;
    let n = s.nrows();
    if n == 0 {
        return Ok(SymEig {
            values: DVector::zeros(0),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let sym = (s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SymEig { values, vectors })
}
