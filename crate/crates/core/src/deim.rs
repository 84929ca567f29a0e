//! Discrete empirical interpolation of the nonlinear coefficient `g(U_phi a_phi)`.
//!
//! With `W` the leading POD modes of the coefficient snapshots and `P` the
//! selected rows, the coefficient field is approximated as
//! `W (P^T W)^{-1} g(P^T U_phi a_phi)`, which only evaluates `g` at `k` points.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::AuxMap;
use crate::pod::pod_modes;

#[derive(Debug, Clone, PartialEq)]
pub struct DeimOperator {
    /// `n x k`, orthonormal in the weighted inner product.
    pub w: DMatrix<f64>,
    pub indices: Vec<usize>,
    /// `W (P^T W)^{-1}`, `n x k`.
    pub lift: DMatrix<f64>,
    /// `P^T U_phi`, `k x r`.
    pub sampler: DMatrix<f64>,
    /// 2-norm condition number of `P^T W`.
    pub condition: f64,
}

impl DeimOperator {
    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    pub fn k(&self) -> usize {
        self.indices.len()
    }

    pub fn r(&self) -> usize {
        self.sampler.ncols()
    }

    /// Approximate coefficient field for reduced state `a_phi`.
    pub fn eval(&self, a_phi: &DVector<f64>, aux: &AuxMap) -> Result<DVector<f64>> {
        if a_phi.len() != self.r() {
            return Err(Error::Dimension("reduced vector does not match the DEIM sampler".into()));
        }
        let sampled = (&self.sampler * a_phi).map(|p| aux.g(p));
        Ok(&self.lift * sampled)
    }

    /// Oblique projection `W (P^T W)^{-1} P^T f` of a full field.
    pub fn interpolate(&self, f: &DVector<f64>) -> DVector<f64> {
        let sampled = DVector::from_iterator(self.k(), self.indices.iter().map(|&i| f[i]));
        &self.lift * sampled
    }
}

/// Greedy interpolation indices: `argmax |w_1|`, then `argmax` of the residual of
/// each new column after interpolation on the indices chosen so far.
pub fn greedy_indices(w: &DMatrix<f64>) -> Result<Vec<usize>> {
    let k = w.ncols();
    let mut idx = Vec::with_capacity(k);
    if k == 0 {
        return Ok(idx);
    }
    idx.push(w.column(0).iamax());
    for j in 1..k {
        let pw = DMatrix::from_fn(j, j, |a, b| w[(idx[a], b)]);
        let rhs = DVector::from_fn(j, |a, _| w[(idx[a], j)]);
        let c = pw
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numeric("singular interpolation matrix during index selection".into()))?;
        let resid = w.column(j) - w.columns(0, j) * c;
        let next = resid.iamax();
        if idx.contains(&next) {
            return Err(Error::Numeric("interpolation index selection repeated an index".into()));
        }
        idx.push(next);
    }
    Ok(idx)
}

/// Interpolation operator from an explicit orthonormal `W`.
pub fn deim_from_modes(w: DMatrix<f64>, u_phi: &DMatrix<f64>) -> Result<DeimOperator> {
    if w.nrows() != u_phi.nrows() {
        return Err(Error::Dimension("DEIM modes and basis differ in length".into()));
    }
    let indices = greedy_indices(&w)?;
    let k = indices.len();
    let ptw = DMatrix::from_fn(k, k, |a, b| w[(indices[a], b)]);
    let sv = ptw.clone().svd(false, false).singular_values;
    let smin = sv.min();
    if !(smin > 0.0) {
        return Err(Error::Numeric("P^T W is singular".into()));
    }
    let condition = sv.max() / smin;
    let inv = ptw
        .try_inverse()
        .ok_or_else(|| Error::Numeric("P^T W is singular".into()))?;
    let lift = &w * inv;
    let sampler = DMatrix::from_fn(k, u_phi.ncols(), |a, b| u_phi[(indices[a], b)]);
    Ok(DeimOperator {
        w,
        indices,
        lift,
        sampler,
        condition,
    })
}

/// DEIM operator of rank `k` from nonlinear snapshots `N = [g(phi_1) ... g(phi_m)]`.
pub fn deim_build(
    n_snapshots: &DMatrix<f64>,
    k: usize,
    u_phi: &DMatrix<f64>,
    weight: f64,
) -> Result<DeimOperator> {
    let modes = pod_modes(n_snapshots, k, weight)?;
    if modes.is_padded() {
        return Err(Error::Argument(format!(
            "DEIM rank {k} exceeds the numerical rank {} of the coefficient snapshots",
            modes.numerical_rank
        )));
    }
    deim_from_modes(modes.basis, u_phi)
}

/// Coefficient snapshots `g(phi_j)` for every column of `phi`.
pub fn coefficient_snapshots(phi: &DMatrix<f64>, aux: &AuxMap) -> DMatrix<f64> {
    phi.map(|p| aux.g(p))
}
