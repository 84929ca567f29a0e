//! Proper orthogonal decomposition by the method of snapshots.
//!
//! Bases are orthonormal in the weighted inner product `(u, v)_w = w * u^T v`
//! where `w = hx*hy` is the grid cell area. Singular values are those of
//! `sqrt(w) * Phi`, so the projection-error identity
//! `sum_j ||Phi_j - U U^T Phi_j||_w^2 = sum_{j>r} sigma_j^2` holds in the same
//! norm.

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::spectral::Grid2D;

/// Columns with `sigma_j < RANK_TOL * sigma_1` are outside the numerical rank.
pub const RANK_TOL: f64 = 1e-12;

/// Snapshot matrices of the state (`phi`) and auxiliary (`q = h(phi)`) variables.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    pub grid: Grid2D,
    /// `n x m`, one column per sample time.
    pub phi: DMatrix<f64>,
    /// `n x m`, `q_k = h(phi_k)`.
    pub q: DMatrix<f64>,
    pub times: Vec<f64>,
    pub sample_interval: f64,
}

impl SnapshotSet {
    pub fn new(
        grid: Grid2D,
        phi: DMatrix<f64>,
        q: DMatrix<f64>,
        times: Vec<f64>,
        sample_interval: f64,
    ) -> Result<Self> {
        if phi.shape() != q.shape() {
            return Err(Error::Dimension(format!(
                "phi snapshots {:?} and q snapshots {:?} differ in shape",
                phi.shape(),
                q.shape()
            )));
        }
        if phi.nrows() != grid.len() {
            return Err(Error::Dimension(format!(
                "snapshot length {} does not match grid size {}",
                phi.nrows(),
                grid.len()
            )));
        }
        if times.len() != phi.ncols() {
            return Err(Error::Dimension("one sample time per snapshot column required".into()));
        }
        if phi.iter().chain(q.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite snapshot entry".into()));
        }
        Ok(Self {
            grid,
            phi,
            q,
            times,
            sample_interval,
        })
    }

    pub fn n(&self) -> usize {
        self.phi.nrows()
    }

    pub fn m(&self) -> usize {
        self.phi.ncols()
    }
}

/// Left singular vectors of one snapshot matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Modes {
    /// `n x r`, orthonormal in the weighted inner product.
    pub basis: DMatrix<f64>,
    /// All `min(n, m)` singular values, non-increasing.
    pub singular_values: Vec<f64>,
    /// Number of singular values above `RANK_TOL * sigma_1`.
    pub numerical_rank: usize,
    /// Number of leading columns that are genuine POD modes; columns past this
    /// were completed with random orthonormal directions.
    pub valid_columns: usize,
}

impl Modes {
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_padded(&self) -> bool {
        self.valid_columns < self.basis.ncols()
    }
}

/// Truncated POD bases for `phi` and `q`, sharing one rank.
#[derive(Debug, Clone, PartialEq)]
pub struct PodBasis {
    pub phi: Modes,
    pub q: Modes,
    /// Inner-product weight the bases are orthonormal in.
    pub weight: f64,
}

impl PodBasis {
    /// Basis from explicit matrices, validated for weighted orthonormality.
    pub fn from_parts(
        u_phi: DMatrix<f64>,
        u_q: DMatrix<f64>,
        sigma_phi: Vec<f64>,
        sigma_q: Vec<f64>,
        weight: f64,
    ) -> Result<Self> {
        if u_phi.shape() != u_q.shape() {
            return Err(Error::Dimension("phi and q bases differ in shape".into()));
        }
        for (name, u) in [("phi", &u_phi), ("q", &u_q)] {
            let err = orthonormality_error(u, weight);
            if err > 1e-10 {
                return Err(Error::Numeric(format!(
                    "{name} basis is not orthonormal (max deviation {err:e})"
                )));
            }
        }
        let r = u_phi.ncols();
        let rank = |s: &[f64]| numerical_rank(s);
        Ok(Self {
            phi: Modes {
                numerical_rank: rank(&sigma_phi),
                singular_values: sigma_phi,
                basis: u_phi,
                valid_columns: r,
            },
            q: Modes {
                numerical_rank: rank(&sigma_q),
                singular_values: sigma_q,
                basis: u_q,
                valid_columns: r,
            },
            weight,
        })
    }

    pub fn rank(&self) -> usize {
        self.phi.basis.ncols()
    }

    pub fn n(&self) -> usize {
        self.phi.basis.nrows()
    }

    pub fn u_phi(&self) -> &DMatrix<f64> {
        &self.phi.basis
    }

    pub fn u_q(&self) -> &DMatrix<f64> {
        &self.q.basis
    }
}

/// POD bases of both snapshot matrices truncated at rank `r`.
pub fn compute_basis(snapshots: &SnapshotSet, r: usize) -> Result<PodBasis> {
    let w = snapshots.grid.cell_area();
    let phi = pod_modes(&snapshots.phi, r, w)?;
    let q = pod_modes(&snapshots.q, r, w)?;
    Ok(PodBasis { phi, q, weight: w })
}

/// Singular values of `sqrt(weight) * x` via the `m x m` Gram matrix.
pub fn singular_values(x: &DMatrix<f64>, weight: f64) -> Result<Vec<f64>> {
    Ok(snapshot_svd(x, weight)?.0)
}

/// Method of snapshots: returns singular values and the matching `m`-vectors
/// `v_j`, sorted by decreasing singular value.
fn snapshot_svd(x: &DMatrix<f64>, weight: f64) -> Result<(Vec<f64>, Vec<DVector<f64>>)> {
    let (n, m) = x.shape();
    if n == 0 || m == 0 {
        return Err(Error::Argument("empty snapshot matrix".into()));
    }
    if !(weight > 0.0 && weight.is_finite()) {
        return Err(Error::Argument(format!("inner-product weight must be positive, got {weight}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite snapshot entry".into()));
    }
    let gram = x.tr_mul(x) * weight;
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    // sqrt of small Gram eigenvalues only resolves sigma to ~1e-8 relative;
    // ||X v_j||_w is accurate to roundoff relative to sigma_1.
    let mut pairs: Vec<(f64, DVector<f64>)> = order
        .into_iter()
        .map(|j| {
            let v = eig.eigenvectors.column(j).into_owned();
            let s = (weight.sqrt()) * (x * &v).norm();
            (s, v)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs.truncate(n.min(m));
    Ok(pairs.into_iter().unzip())
}

pub fn numerical_rank(sigma: &[f64]) -> usize {
    let s1 = sigma.first().copied().unwrap_or(0.0);
    if s1 <= 0.0 {
        return 0;
    }
    sigma.iter().take_while(|&&s| s >= RANK_TOL * s1).count()
}

/// Leading `r` POD modes of `x` (columns are snapshots), orthonormal in the
/// inner product `weight * u^T v`.
///
/// Modes past the numerical rank are completed with seeded random vectors
/// orthonormalized against the earlier columns, and reported through
/// [`Modes::valid_columns`].
pub fn pod_modes(x: &DMatrix<f64>, r: usize, weight: f64) -> Result<Modes> {
    let (n, m) = x.shape();
    if r == 0 || r > n.min(m) {
        return Err(Error::Argument(format!(
            "rank {r} outside 1..={} for a {n}x{m} snapshot matrix",
            n.min(m)
        )));
    }
    let (sigma, vs) = snapshot_svd(x, weight)?;
    let rank = numerical_rank(&sigma);
    let valid = rank.min(r);
    if valid < r {
        warn!("requested rank {r} exceeds numerical rank {rank}; padding {} columns", r - valid);
    }

    let mut basis = DMatrix::zeros(n, r);
    for j in 0..valid {
        let col = (x * &vs[j]) / sigma[j];
        basis.set_column(j, &col);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0f_b4515);
    for j in valid..r {
        let col = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        basis.set_column(j, &col);
    }
    orthonormalize(&mut basis, weight)?;
    fix_signs(&mut basis);

    Ok(Modes {
        basis,
        singular_values: sigma,
        numerical_rank: rank,
        valid_columns: valid,
    })
}

/// Two passes of modified Gram-Schmidt in the weighted inner product.
pub(crate) fn orthonormalize(u: &mut DMatrix<f64>, weight: f64) -> Result<()> {
    let r = u.ncols();
    for j in 0..r {
        for _pass in 0..2 {
            for i in 0..j {
                let proj = weight * u.column(i).dot(&u.column(j));
                let ci = u.column(i).into_owned();
                u.column_mut(j).axpy(-proj, &ci, 1.0);
            }
        }
        let nrm = (weight * u.column(j).norm_squared()).sqrt();
        if !(nrm > 0.0 && nrm.is_finite()) {
            return Err(Error::Numeric(format!("basis column {j} is degenerate")));
        }
        u.column_mut(j).scale_mut(1.0 / nrm);
    }
    Ok(())
}

/// Makes the largest-magnitude entry of every column positive.
pub(crate) fn fix_signs(u: &mut DMatrix<f64>) {
    for mut col in u.column_iter_mut() {
        let imax = col.iamax();
        if col[imax] < 0.0 {
            col.neg_mut();
        }
    }
}

/// `max |U^T W U - I|`.
pub fn orthonormality_error(u: &DMatrix<f64>, weight: f64) -> f64 {
    let gram = u.tr_mul(u) * weight;
    let r = gram.nrows();
    (gram - DMatrix::identity(r, r)).amax()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdMode {
    /// `sqrt(sum_{j>r} sigma_j^2) < threshold * sqrt(sum_j sigma_j^2)`.
    Relative,
    /// `sqrt(sum_{j>r} sigma_j^2) < threshold`.
    Absolute,
}

/// Smallest rank whose discarded singular-value tail is below `threshold`.
pub fn truncation_rank(sigma: &[f64], threshold: f64, mode: ThresholdMode) -> Result<usize> {
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(Error::Argument(format!("threshold must be positive, got {threshold}")));
    }
    if sigma.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::Argument("singular values must be non-increasing".into()));
    }
    let total: f64 = sigma.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return Ok(1);
    }
    let bound = match mode {
        ThresholdMode::Relative => threshold * total.sqrt(),
        ThresholdMode::Absolute => threshold,
    };
    // tail[r] = sum_{j >= r} sigma_j^2, accumulated from the back.
    let mut tails = vec![0.0; sigma.len() + 1];
    for j in (0..sigma.len()).rev() {
        tails[j] = tails[j + 1] + sigma[j] * sigma[j];
    }
    for r in 1..=sigma.len() {
        if tails[r].sqrt() < bound {
            return Ok(r);
        }
    }
    Ok(sigma.len())
}

/// `sum_j ||x_j - U U^T x_j||_w^2`, evaluated directly from the data.
pub fn projection_error_matrix(x: &DMatrix<f64>, u: &DMatrix<f64>, weight: f64) -> Result<f64> {
    if x.nrows() != u.nrows() {
        return Err(Error::Dimension("basis and snapshots differ in length".into()));
    }
    let coeffs = u.tr_mul(x) * weight;
    let resid = x - u * coeffs;
    Ok(weight * resid.norm_squared())
}

/// Direct projection errors of the `phi` and `q` snapshots onto the basis.
pub fn projection_error(snapshots: &SnapshotSet, basis: &PodBasis) -> Result<(f64, f64)> {
    Ok((
        projection_error_matrix(&snapshots.phi, basis.u_phi(), basis.weight)?,
        projection_error_matrix(&snapshots.q, basis.u_q(), basis.weight)?,
    ))
}

/// `sum_{j>r} sigma_j^2`.
pub fn sigma_tail(sigma: &[f64], r: usize) -> f64 {
    sigma.iter().skip(r).map(|s| s * s).sum()
}
