//! Periodic pseudo-spectral discretization on a 2D grid.
//!
//! # Spectral layout
//!
//! Every symbol is stored as a flat array of length `nx*ny` with the bin of
//! the x-wavenumber varying fastest: entry `l_idx*nx + k_idx` holds the value
//! for the pair `(k, l)` where `k = k_idx` if `k_idx <= nx/2` and
//! `k = k_idx - nx` otherwise (likewise `l` from `l_idx` and `ny`). This is
//! the natural output ordering of an unnormalized forward DFT along each axis,
//! covering `k in {-nx/2+1, ..., nx/2}` and `l in {-ny/2+1, ..., ny/2}`.
//! The forward transform is unnormalized and the inverse carries the `1/(nx*ny)`
//! factor.
//!
//! All symbols are built through [`FourierMultiplier::from_wavenumbers`] or
//! [`SkewMultiplier::from_wavenumbers`], which symmetrize the table so that
//! application maps real fields to real fields.

mod grid;

pub use grid::{Field, Grid2D};
pub(crate) use grid::max_abs;

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Relative tolerance on the imaginary part left after an inverse transform.
pub const IMAG_RESIDUE_TOL: f64 = 1e-10;

/// Real, even Fourier symbol. Application is `ifft(symbol * fft(f))`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierMultiplier {
    grid: Grid2D,
    symbol: Vec<f64>,
}

impl FourierMultiplier {
    /// Builds a symbol from `f(kx, ky)` where `kx = 2*pi*k/Lx`, `ky = 2*pi*l/Ly`.
    ///
    /// The table is symmetrized as `(s(k,l) + s(-k,-l))/2`, which only changes
    /// entries on the Nyquist lines when `f` is already even.
    pub fn from_wavenumbers(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let raw = wavenumber_table(&grid, f);
        let symbol = symmetrize(&grid, &raw, 1.0);
        Self { grid, symbol }
    }

    /// Symbol given directly in the documented layout. Rejects tables that are
    /// not even under `(k, l) -> (-k, -l)`.
    pub fn from_symbol(grid: Grid2D, symbol: Vec<f64>) -> Result<Self> {
        if symbol.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "symbol length {} does not match grid size {}",
                symbol.len(),
                grid.len()
            )));
        }
        let scale = max_abs(&symbol).max(1.0);
        let sym = symmetrize(&grid, &symbol, 1.0);
        if sym
            .iter()
            .zip(&symbol)
            .any(|(a, b)| (a - b).abs() > 1e-14 * scale)
        {
            return Err(Error::ModelDefinition(
                "real multiplier symbol must be even in (k, l)".into(),
            ));
        }
        Ok(Self { grid, symbol })
    }

    pub fn constant(grid: Grid2D, c: f64) -> Self {
        Self {
            grid,
            symbol: vec![c; grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    /// Symbol value for signed wavenumbers `(k, l)`.
    pub fn at(&self, k: i64, l: i64) -> f64 {
        let nx = self.grid.nx() as i64;
        let ny = self.grid.ny() as i64;
        let ki = k.rem_euclid(nx) as usize;
        let li = l.rem_euclid(ny) as usize;
        self.symbol[li * self.grid.nx() + ki]
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.symbol)
    }

    pub fn min(&self) -> f64 {
        self.symbol.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Pointwise product of two symbols (operator composition).
    pub fn compose(&self, other: &FourierMultiplier) -> Result<FourierMultiplier> {
        self.grid.check_same(&other.grid, "compose")?;
        Ok(Self {
            grid: self.grid,
            symbol: self
                .symbol
                .iter()
                .zip(&other.symbol)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> FourierMultiplier {
        Self {
            grid: self.grid,
            symbol: self.symbol.iter().map(|&s| f(s)).collect(),
        }
    }

    /// `Some(c)` when every entry equals `c`, i.e. the operator is `c*I`.
    pub fn as_constant(&self) -> Option<f64> {
        let c = self.symbol[0];
        self.symbol.iter().all(|&s| s == c).then_some(c)
    }
}

/// Purely imaginary, odd Fourier symbol `i*s(k,l)`; real-to-real and
/// skew-adjoint in the discrete inner product.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewMultiplier {
    grid: Grid2D,
    symbol: Vec<f64>,
}

impl SkewMultiplier {
    /// Builds `i*f(kx, ky)`, antisymmetrized as `(s(k,l) - s(-k,-l))/2` so that
    /// self-conjugate (Nyquist) bins are zero.
    pub fn from_wavenumbers(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let raw = wavenumber_table(&grid, f);
        let symbol = symmetrize(&grid, &raw, -1.0);
        Self { grid, symbol }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    /// Imaginary part of the symbol in the documented layout.
    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.symbol)
    }
}

fn wavenumber_table(grid: &Grid2D, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.len());
    for li in 0..grid.ny() {
        for ki in 0..grid.nx() {
            let (kx, ky) = grid.angular_wavenumbers(ki, li);
            out.push(f(kx, ky));
        }
    }
    out
}

/// `(s(k) + parity*s(-k))/2` in the flat spectral layout.
fn symmetrize(grid: &Grid2D, s: &[f64], parity: f64) -> Vec<f64> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut out = vec![0.0; s.len()];
    for li in 0..ny {
        let lm = (ny - li) % ny;
        for ki in 0..nx {
            let km = (nx - ki) % nx;
            out[li * nx + ki] = 0.5 * (s[li * nx + ki] + parity * s[lm * nx + km]);
        }
    }
    out
}

/// Discrete Laplacian symbol `-lambda_{k,l} = -[(2*pi*k/Lx)^2 + (2*pi*l/Ly)^2]`.
pub fn laplacian_symbol(grid: &Grid2D) -> FourierMultiplier {
    FourierMultiplier::from_wavenumbers(*grid, |kx, ky| -(kx * kx + ky * ky))
}

/// `lambda_{k,l}`, the symbol of `-Delta_N`.
pub fn neg_laplacian_symbol(grid: &Grid2D) -> FourierMultiplier {
    FourierMultiplier::from_wavenumbers(*grid, |kx, ky| kx * kx + ky * ky)
}

/// First derivative in x, `i*kx` (Nyquist bin zeroed).
pub fn dx_symbol(grid: &Grid2D) -> SkewMultiplier {
    SkewMultiplier::from_wavenumbers(*grid, |kx, _| kx)
}

/// First derivative in y, `i*ky` (Nyquist bin zeroed).
pub fn dy_symbol(grid: &Grid2D) -> SkewMultiplier {
    SkewMultiplier::from_wavenumbers(*grid, |_, ky| ky)
}

/// Discrete inner product `hx*hy*sum(f*g)`.
pub fn inner_product(f: &Field, g: &Field) -> Result<f64> {
    f.grid().check_same(g.grid(), "inner_product")?;
    Ok(weighted_dot(f.grid().cell_area(), f.values(), g.values()))
}

/// `w * sum(a*b)`.
#[inline]
pub fn weighted_dot(w: f64, a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    w * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
}

/// FFT engine for one grid. Plans are shared and immutable; every call
/// allocates its own workspace, so a `Spectral` can be used from many threads.
#[derive(Clone)]
pub struct Spectral {
    grid: Grid2D,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: Grid2D) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            fwd_x: planner.plan_fft_forward(grid.nx()),
            inv_x: planner.plan_fft_inverse(grid.nx()),
            fwd_y: planner.plan_fft_forward(grid.ny()),
            inv_y: planner.plan_fft_inverse(grid.ny()),
        }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn apply(&self, m: &FourierMultiplier, f: &Field) -> Result<Field> {
        m.grid.check_same(f.grid(), "apply_multiplier")?;
        let mut out = vec![0.0; f.values().len()];
        self.apply_into(m, f.values(), &mut out)?;
        Field::new(self.grid, out)
    }

    /// Applies a real symbol to a raw grid vector.
    pub fn apply_into(&self, m: &FourierMultiplier, input: &[f64], out: &mut [f64]) -> Result<()> {
        self.grid.check_same(&m.grid, "apply_multiplier")?;
        let scale = m.max_abs();
        self.transform(input, out, scale, |idx| Complex::new(m.symbol[idx], 0.0))
    }

    pub fn apply_skew(&self, m: &SkewMultiplier, f: &Field) -> Result<Field> {
        m.grid.check_same(f.grid(), "apply_multiplier")?;
        let mut out = vec![0.0; f.values().len()];
        self.apply_skew_into(m, f.values(), &mut out)?;
        Field::new(self.grid, out)
    }

    pub fn apply_skew_into(&self, m: &SkewMultiplier, input: &[f64], out: &mut [f64]) -> Result<()> {
        self.grid.check_same(&m.grid, "apply_multiplier")?;
        let scale = m.max_abs();
        self.transform(input, out, scale, |idx| Complex::new(0.0, m.symbol[idx]))
    }

    /// Forward FFT of a real field; output in the documented flat layout.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<Complex<f64>>> {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        self.check_input(input)?;
        let mut rows: Vec<Complex<f64>> = input.iter().map(|&v| Complex::new(v, 0.0)).collect();
        let mut cols = vec![Complex::new(0.0, 0.0); rows.len()];
        self.forward_t(&mut rows, &mut cols);
        let mut out = vec![Complex::new(0.0, 0.0); rows.len()];
        for ki in 0..nx {
            for li in 0..ny {
                out[li * nx + ki] = cols[ki * ny + li];
            }
        }
        Ok(out)
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.grid.len() {
            return Err(Error::Dimension(format!(
                "input length {} does not match grid size {}",
                input.len(),
                self.grid.len()
            )));
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite value in multiplier input".into()));
        }
        Ok(())
    }

    /// Row FFTs, transpose into `cols` (layout `k_idx*ny + l_idx`), column FFTs.
    fn forward_t(&self, rows: &mut [Complex<f64>], cols: &mut [Complex<f64>]) {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let scratch_len = self
            .fwd_x
            .get_inplace_scratch_len()
            .max(self.fwd_y.get_inplace_scratch_len());
        let mut scratch = vec![Complex::new(0.0, 0.0); scratch_len];
        self.fwd_x.process_with_scratch(rows, &mut scratch);
        transpose(rows, cols, nx, ny);
        self.fwd_y.process_with_scratch(cols, &mut scratch);
    }

    fn transform(
        &self,
        input: &[f64],
        out: &mut [f64],
        symbol_scale: f64,
        factor: impl Fn(usize) -> Complex<f64>,
    ) -> Result<()> {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        self.check_input(input)?;
        if out.len() != input.len() {
            return Err(Error::Dimension("output length mismatch".into()));
        }
        let mut rows: Vec<Complex<f64>> = input.iter().map(|&v| Complex::new(v, 0.0)).collect();
        let mut cols = vec![Complex::new(0.0, 0.0); rows.len()];
        self.forward_t(&mut rows, &mut cols);

        let norm = 1.0 / (nx * ny) as f64;
        for ki in 0..nx {
            let base = ki * ny;
            for li in 0..ny {
                cols[base + li] *= factor(li * nx + ki) * norm;
            }
        }

        let scratch_len = self
            .inv_x
            .get_inplace_scratch_len()
            .max(self.inv_y.get_inplace_scratch_len());
        let mut scratch = vec![Complex::new(0.0, 0.0); scratch_len];
        self.inv_y.process_with_scratch(&mut cols, &mut scratch);
        transpose(&cols, &mut rows, ny, nx);
        self.inv_x.process_with_scratch(&mut rows, &mut scratch);

        let mut imag = 0.0_f64;
        for (o, c) in out.iter_mut().zip(&rows) {
            *o = c.re;
            imag = imag.max(c.im.abs());
        }
        let tol = IMAG_RESIDUE_TOL * max_abs(input) * symbol_scale.max(1.0);
        if imag > tol {
            return Err(Error::Numeric(format!(
                "imaginary residue {imag:e} exceeds {tol:e}; multiplier symbol is not real-to-real"
            )));
        }
        Ok(())
    }
}

/// `src` is `rows x cols` row-major (row length `cols`); writes its transpose.
fn transpose(src: &[Complex<f64>], dst: &mut [Complex<f64>], cols: usize, rows: usize) {
    for r in 0..rows {
        let row = &src[r * cols..(r + 1) * cols];
        for (c, v) in row.iter().enumerate() {
            dst[c * rows + r] = *v;
        }
    }
}
