//! Closed-form minimizer of `‖D'A'AD − I‖²_F`.
//!
//! With `DD' = UΛU'` and `Γ = A·U·Λ^{1/2}` the objective becomes
//! `‖ΓΓ' − I_M‖²_F + (K − M)`, minimized by any `Γ` with orthonormal rows.
//! Taking `Γ = [I_M 0]` gives `A = [I_M 0]·Λ^{-1/2}·U'`, i.e. the top `M`
//! rows of the whitening operator `Λ^{-1/2}U'`.

use nalgebra::DMatrix;

use crate::block_model::{sym_eig, Dict, SensingMatrix, RANK_TOL};
use crate::error::{Error, Result};

/// The whitening operator `W = Λ^{-1/2}U'` of a dictionary's row space,
/// together with the whitened dictionary `W·D` (whose rows are orthonormal).
#[derive(Debug, Clone)]
pub struct Whitener {
    operator: DMatrix<f64>,
    whitened: DMatrix<f64>,
}

impl Whitener {
    pub fn new(dict: &Dict) -> Result<Self> {
        let d = dict.matrix();
        let eig = sym_eig(&(d * d.transpose()))?;
        let n = eig.values.len();
        let largest = eig.values[0];
        let smallest = eig.values[n - 1];
        if !(largest > 0.0) || smallest <= RANK_TOL * largest {
            return Err(Error::RankDeficient { smallest, largest });
        }
        let mut operator = eig.vectors.transpose();
        for (i, mut row) in operator.row_iter_mut().enumerate() {
            row /= eig.values[i].sqrt();
        }
        let whitened = &operator * d;
        Ok(Self { operator, whitened })
    }

    /// `Λ^{-1/2}U'` (N×N), rows ordered by descending eigenvalue of `DD'`.
    pub fn operator(&self) -> &DMatrix<f64> {
        &self.operator
    }

    /// `Λ^{-1/2}U'D` (N×K).
    pub fn whitened(&self) -> &DMatrix<f64> {
        &self.whitened
    }

    /// Maps `Γ` (M×N) back to the sensing matrix `Γ·Λ^{-1/2}U'`.
    pub fn sensing_from(&self, gamma: &DMatrix<f64>) -> Result<SensingMatrix> {
        SensingMatrix::new(gamma * &self.operator)
    }
}

pub(crate) fn check_measurements(dict: &Dict, m: usize) -> Result<()> {
    if m == 0 || m >= dict.rows() {
        return Err(Error::InvalidArgument(format!(
            "number of measurements must satisfy 1 <= M < N = {}, got {m}",
            dict.rows()
        )));
    }
    Ok(())
}

/// Optimal sensing matrix for `‖D'A'AD − I‖²_F`; the optimum value is `K − M`.
pub fn design_ds(dict: &Dict, m: usize) -> Result<SensingMatrix> {
    check_measurements(dict, m)?;
    let w = Whitener::new(dict)?;
    design_ds_with(&w, m)
}

pub(crate) fn design_ds_with(w: &Whitener, m: usize) -> Result<SensingMatrix> {
    SensingMatrix::new(w.operator().rows(0, m).into_owned())
}

/// `‖D'A'AD − I‖²_F`.
pub fn ds_objective(a: &SensingMatrix, dict: &Dict) -> Result<f64> {
    let g = a.gram(dict)?;
    let k = dict.cols();
    Ok((g.gram() - DMatrix::<f64>::identity(k, k)).norm_squared())
}
