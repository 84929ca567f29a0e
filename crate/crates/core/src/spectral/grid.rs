use crate::error::{Error, Result};

/// Uniform periodic grid on `[0, Lx) x [0, Ly)`.
///
/// Point `(x_i, y_j) = (i*hx, j*hy)` is stored at flat index `j*nx + i`
/// (x fastest).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx == 0 || ny == 0 || nx % 2 != 0 || ny % 2 != 0 {
            return Err(Error::Argument(format!(
                "grid sizes must be positive and even, got {nx}x{ny}"
            )));
        }
        if !(lx.is_finite() && lx > 0.0 && ly.is_finite() && ly > 0.0) {
            return Err(Error::Argument(format!(
                "domain lengths must be positive, got {lx}x{ly}"
            )));
        }
        Ok(Self { nx, ny, lx, ly })
    }

    /// Square grid on the unit square.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(n, n, 1.0, 1.0)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    /// Number of degrees of freedom `nx*ny`.
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `hx*hy` of the discrete inner product.
    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.hx()
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.hy()
    }

    /// Signed wavenumber for FFT bin `idx` along an axis with `n` points:
    /// bins `0..=n/2` map to `0..=n/2`, bins above map to `idx - n`, so the
    /// range is `{-n/2+1, ..., n/2}`.
    #[inline]
    pub fn wavenumber(idx: usize, n: usize) -> i64 {
        if idx <= n / 2 {
            idx as i64
        } else {
            idx as i64 - n as i64
        }
    }

    /// Angular wavenumbers `(2*pi*k/Lx, 2*pi*l/Ly)` for spectral bin `(kx_idx, ly_idx)`.
    pub fn angular_wavenumbers(&self, kx_idx: usize, ly_idx: usize) -> (f64, f64) {
        let k = Self::wavenumber(kx_idx, self.nx) as f64;
        let l = Self::wavenumber(ly_idx, self.ny) as f64;
        (
            2.0 * std::f64::consts::PI * k / self.lx,
            2.0 * std::f64::consts::PI * l / self.ly,
        )
    }

    pub(crate) fn check_same(&self, other: &Grid2D, what: &str) -> Result<()> {
        if self != other {
            return Err(Error::Dimension(format!(
                "{what}: grid {}x{} [{}x{}] does not match {}x{} [{}x{}]",
                self.nx, self.ny, self.lx, self.ly, other.nx, other.ny, other.lx, other.ly
            )));
        }
        Ok(())
    }
}

/// Real grid function.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid2D,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "field has {} values, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid2D, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f(x, y)` at the grid points.
    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            let y = grid.y(j);
            for i in 0..grid.nx() {
                values.push(f(grid.x(i), y));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.values)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `alpha*self + beta*other`.
    pub fn axpby(&self, alpha: f64, other: &Field, beta: f64) -> Result<Field> {
        self.grid.check_same(&other.grid, "axpby")?;
        Ok(Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
        })
    }
}

pub(crate) fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_odd_or_empty_sizes() {
        assert!(Grid2D::new(7, 8, 1.0, 1.0).is_err());
        assert!(Grid2D::new(0, 8, 1.0, 1.0).is_err());
        assert!(Grid2D::new(8, 8, 0.0, 1.0).is_err());
    }

    #[test]
    fn mesh_sizes_tile_the_domain() {
        let g = Grid2D::new(128, 64, 100.0, 3.0).unwrap();
        assert!((g.hx() * 128.0 - 100.0).abs() < 1e-12);
        assert!((g.hy() * 64.0 - 3.0).abs() < 1e-12);
    }

    #[test]
    fn wavenumber_range() {
        let ks: Vec<i64> = (0..8).map(|i| Grid2D::wavenumber(i, 8)).collect();
        assert_eq!(ks, vec![0, 1, 2, 3, 4, -3, -2, -1]);
    }

    #[test]
    fn flat_index_is_x_fastest() {
        let g = Grid2D::new(4, 6, 1.0, 1.0).unwrap();
        let f = Field::from_fn(g, |x, y| x + 10.0 * y);
        let v = f.values()[g.index(3, 2)];
        assert!((v - (0.75 + 10.0 * 2.0 / 6.0)).abs() < 1e-14);
    }
}
