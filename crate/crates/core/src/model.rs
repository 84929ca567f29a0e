//! Built-in gradient-flow models in energy-quadratized form.
//!
//! Each model is an Onsager triplet `(phi, G, E)` rewritten with an auxiliary
//! variable `q = h(phi)` so that the energy is `1/2 (phi, L0 phi) + 1/2 (q, q)`
//! and the dynamics read `d/dt [phi; q] = -N0^T G N0 L [phi; q]` with
//! `N0 = [I, g(phi)]`, `g = dh/dphi`.

use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::spectral::{
    inner_product, neg_laplacian_symbol, weighted_dot, Field, FourierMultiplier, Grid2D,
    SkewMultiplier, Spectral,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    AllenCahn,
    CahnHilliard,
    PhaseFieldCrystal,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::AllenCahn => "ac",
            ModelKind::CahnHilliard => "ch",
            ModelKind::PhaseFieldCrystal => "pfc",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ac" | "allen-cahn" | "allen_cahn" => Ok(ModelKind::AllenCahn),
            "ch" | "cahn-hilliard" | "cahn_hilliard" => Ok(ModelKind::CahnHilliard),
            "pfc" | "phase-field-crystal" | "phase_field_crystal" => {
                Ok(ModelKind::PhaseFieldCrystal)
            }
            other => Err(Error::ModelDefinition(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Seeding of the crystal initial condition: three patches of a hexagonal
/// one-mode profile centred at `(Lx/4, Ly/4)`, `(3Lx/4, Ly/4)`, `(Lx/2, 3Ly/4)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrystalSeed {
    pub mean: f64,
    pub amplitude: f64,
    pub radius: f64,
}

impl Default for CrystalSeed {
    fn default() -> Self {
        Self {
            mean: 0.06,
            amplitude: 0.2,
            radius: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Mobility constant `M`.
    pub mobility: f64,
    /// Interface width (AC/CH).
    pub epsilon: f64,
    /// PFC constants.
    pub a0: f64,
    pub b0: f64,
    /// Stabilization constant moved into `L0`.
    pub gamma0: f64,
    /// Additive energy constant, used for reporting only.
    pub energy_shift: f64,
    pub seed: CrystalSeed,
}

impl ModelSpec {
    pub fn allen_cahn() -> Self {
        Self {
            kind: ModelKind::AllenCahn,
            mobility: 1.0,
            epsilon: 0.02,
            a0: 1.0,
            b0: 0.325,
            gamma0: 1.0,
            energy_shift: 0.0,
            seed: CrystalSeed::default(),
        }
    }

    pub fn cahn_hilliard() -> Self {
        Self {
            kind: ModelKind::CahnHilliard,
            mobility: 0.01,
            gamma0: 2.0,
            ..Self::allen_cahn()
        }
    }

    pub fn phase_field_crystal() -> Self {
        Self {
            kind: ModelKind::PhaseFieldCrystal,
            mobility: 1.0,
            gamma0: 1.0,
            ..Self::allen_cahn()
        }
    }

    pub fn defaults_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::AllenCahn => Self::allen_cahn(),
            ModelKind::CahnHilliard => Self::cahn_hilliard(),
            ModelKind::PhaseFieldCrystal => Self::phase_field_crystal(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::ModelDefinition(format!("{name} must be positive, got {v}")))
            }
        };
        positive(self.mobility, "mobility")?;
        positive(self.gamma0, "gamma0")?;
        match self.kind {
            ModelKind::AllenCahn | ModelKind::CahnHilliard => positive(self.epsilon, "epsilon")?,
            ModelKind::PhaseFieldCrystal => {
                if !(self.a0.is_finite() && self.b0.is_finite()) {
                    return Err(Error::ModelDefinition("a0 and b0 must be finite".into()));
                }
                positive(self.seed.radius, "seed radius")?;
            }
        }
        if !(self.energy_shift.is_finite() && self.energy_shift >= 0.0) {
            return Err(Error::ModelDefinition("energy shift must be >= 0".into()));
        }
        Ok(())
    }

    /// Constant `c` in `h(phi) = (sqrt(2)/2)(phi^2 - c)`.
    pub fn aux_shift(&self) -> f64 {
        match self.kind {
            ModelKind::AllenCahn | ModelKind::CahnHilliard => 1.0 + self.gamma0,
            ModelKind::PhaseFieldCrystal => self.b0 + self.gamma0,
        }
    }
}

/// Quadratic auxiliary map `h(phi) = (sqrt(2)/2)(phi^2 - shift)` and its
/// derivative `g(phi) = sqrt(2) phi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxMap {
    pub shift: f64,
}

impl AuxMap {
    #[inline]
    pub fn h(&self, phi: f64) -> f64 {
        0.5 * SQRT_2 * (phi * phi - self.shift)
    }

    #[inline]
    pub fn g(&self, phi: f64) -> f64 {
        SQRT_2 * phi
    }

    pub fn h_into(&self, phi: &[f64], out: &mut [f64]) {
        for (o, &p) in out.iter_mut().zip(phi) {
            *o = self.h(p);
        }
    }

    pub fn g_into(&self, phi: &[f64], out: &mut [f64]) {
        for (o, &p) in out.iter_mut().zip(phi) {
            *o = self.g(p);
        }
    }

    pub fn h_field(&self, phi: &Field) -> Field {
        phi.map(|p| self.h(p))
    }

    pub fn g_field(&self, phi: &Field) -> Field {
        phi.map(|p| self.g(p))
    }
}

/// Mobility `G = G_s + G_a` with a real even symbol for the symmetric part and
/// an optional imaginary odd symbol for the skew part.
#[derive(Debug, Clone, PartialEq)]
pub struct Mobility {
    symmetric: FourierMultiplier,
    skew: Option<SkewMultiplier>,
}

impl Mobility {
    pub fn new(symmetric: FourierMultiplier, skew: Option<SkewMultiplier>) -> Result<Self> {
        if symmetric.min() < 0.0 {
            return Err(Error::ModelDefinition(
                "symmetric mobility must be positive semi-definite".into(),
            ));
        }
        if let Some(s) = &skew {
            symmetric.grid().check_same(s.grid(), "mobility")?;
        }
        Ok(Self { symmetric, skew })
    }

    pub fn symmetric(&self) -> &FourierMultiplier {
        &self.symmetric
    }

    pub fn skew(&self) -> Option<&SkewMultiplier> {
        self.skew.as_ref()
    }

    /// `Some(M)` when `G = M*I`.
    pub fn as_scalar(&self) -> Option<f64> {
        if self.skew.is_some() {
            return None;
        }
        self.symmetric.as_constant()
    }

    /// Whether the constant mode is in the kernel of `G` (mass-conserving flow).
    pub fn annihilates_constants(&self) -> bool {
        self.symmetric.symbol()[0] == 0.0 && self.skew.as_ref().is_none_or(|s| s.symbol()[0] == 0.0)
    }

    pub fn apply_into(&self, sp: &Spectral, input: &[f64], out: &mut [f64]) -> Result<()> {
        if let Some(m) = self.as_scalar() {
            for (o, v) in out.iter_mut().zip(input) {
                *o = m * v;
            }
            return Ok(());
        }
        sp.apply_into(&self.symmetric, input, out)?;
        if let Some(skew) = &self.skew {
            let mut tmp = vec![0.0; input.len()];
            sp.apply_skew_into(skew, input, &mut tmp)?;
            for (o, t) in out.iter_mut().zip(&tmp) {
                *o += t;
            }
        }
        Ok(())
    }
}

/// Discretized model in energy-quadratized form.
#[derive(Debug, Clone)]
pub struct EqModel {
    kind: Option<ModelKind>,
    l0: FourierMultiplier,
    l0_inv: FourierMultiplier,
    gamma0: f64,
    mobility: Mobility,
    aux: AuxMap,
    spectral: Spectral,
}

/// Symbol of the stabilized linear operator and its inverse.
///
/// AC/CH: `eps^2 lambda + gamma0`; PFC: `(a0 - lambda)^2 + gamma0`.
pub fn stabilized_l0(
    grid: &Grid2D,
    spec: &ModelSpec,
) -> Result<(FourierMultiplier, FourierMultiplier)> {
    let lambda = neg_laplacian_symbol(grid);
    let forward = match spec.kind {
        ModelKind::AllenCahn | ModelKind::CahnHilliard => {
            let e2 = spec.epsilon * spec.epsilon;
            lambda.map(|l| e2 * l + spec.gamma0)
        }
        ModelKind::PhaseFieldCrystal => lambda.map(|l| (spec.a0 - l).powi(2) + spec.gamma0),
    };
    invert_positive(forward)
}

fn invert_positive(forward: FourierMultiplier) -> Result<(FourierMultiplier, FourierMultiplier)> {
    if forward.symbol().iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::ModelDefinition(
            "stabilized linear operator must have a strictly positive symbol (check gamma0)".into(),
        ));
    }
    let inverse = forward.map(|s| 1.0 / s);
    Ok((forward, inverse))
}

pub fn build_model(spec: &ModelSpec, grid: Grid2D) -> Result<EqModel> {
    spec.validate()?;
    let (l0, l0_inv) = stabilized_l0(&grid, spec)?;
    let symmetric = match spec.kind {
        ModelKind::AllenCahn => FourierMultiplier::constant(grid, spec.mobility),
        ModelKind::CahnHilliard | ModelKind::PhaseFieldCrystal => {
            neg_laplacian_symbol(&grid).map(|l| spec.mobility * l)
        }
    };
    Ok(EqModel {
        kind: Some(spec.kind),
        l0,
        l0_inv,
        gamma0: spec.gamma0,
        mobility: Mobility::new(symmetric, None)?,
        aux: AuxMap {
            shift: spec.aux_shift(),
        },
        spectral: Spectral::new(grid),
    })
}

impl EqModel {
    /// Model assembled from explicit parts, e.g. a synthetic purely dispersive
    /// fixture. `l0` must be strictly positive.
    pub fn custom(l0: FourierMultiplier, gamma0: f64, mobility: Mobility, aux: AuxMap) -> Result<Self> {
        l0.grid().check_same(mobility.symmetric().grid(), "custom model")?;
        let grid = *l0.grid();
        let (l0, l0_inv) = invert_positive(l0)?;
        Ok(Self {
            kind: None,
            l0,
            l0_inv,
            gamma0,
            mobility,
            aux,
            spectral: Spectral::new(grid),
        })
    }

    pub fn kind(&self) -> Option<ModelKind> {
        self.kind
    }

    pub fn grid(&self) -> &Grid2D {
        self.spectral.grid()
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    pub fn l0(&self) -> &FourierMultiplier {
        &self.l0
    }

    pub fn l0_inverse(&self) -> &FourierMultiplier {
        &self.l0_inv
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    pub fn mobility(&self) -> &Mobility {
        &self.mobility
    }

    pub fn aux(&self) -> &AuxMap {
        &self.aux
    }

    pub fn apply_l0_into(&self, input: &[f64], out: &mut [f64]) -> Result<()> {
        self.spectral.apply_into(&self.l0, input, out)
    }

    pub fn apply_mobility_into(&self, input: &[f64], out: &mut [f64]) -> Result<()> {
        self.mobility.apply_into(&self.spectral, input, out)
    }

    /// `1/2 (phi, L0 phi) + 1/2 (q, q)` on raw grid vectors.
    pub fn energy_raw(&self, phi: &[f64], q: &[f64]) -> Result<f64> {
        let w = self.grid().cell_area();
        let mut l0phi = vec![0.0; phi.len()];
        self.apply_l0_into(phi, &mut l0phi)?;
        Ok(0.5 * weighted_dot(w, phi, &l0phi) + 0.5 * weighted_dot(w, q, q))
    }
}

/// Quadratized energy `1/2 (phi, L0 phi) + 1/2 (q, q)`; the additive constant
/// is not included.
pub fn energy(phi: &Field, q: &Field, model: &EqModel) -> Result<f64> {
    phi.grid().check_same(model.grid(), "energy")?;
    q.grid().check_same(model.grid(), "energy")?;
    let l0phi = model.spectral.apply(&model.l0, phi)?;
    Ok(0.5 * inner_product(phi, &l0phi)? + 0.5 * inner_product(q, q)?)
}

/// Disk centres and radii of the seven-disk benchmark profile on the unit square.
pub const DISK_X: [f64; 7] = [0.25, 0.125, 0.25, 0.5, 0.75, 0.5, 0.75];
pub const DISK_Y: [f64; 7] = [0.25, 0.375, 0.625, 0.125, 0.125, 0.5, 0.75];
pub const DISK_R: [f64; 7] = [1.0 / 20.0, 1.0 / 16.0, 1.0 / 12.0, 1.0 / 12.0, 1.0 / 10.0, 1.0 / 8.0, 1.0 / 8.0];

pub fn seven_disks(x: f64, y: f64, epsilon: f64) -> f64 {
    let mut sum = 0.0;
    for i in 0..7 {
        let d = ((x - DISK_X[i]).powi(2) + (y - DISK_Y[i]).powi(2)).sqrt();
        sum += 0.5 * (1.0 - ((d - DISK_R[i]) / epsilon).tanh());
    }
    2.0 * sum - 1.0
}

pub fn crystal_seed(x: f64, y: f64, grid: &Grid2D, a0: f64, seed: &CrystalSeed) -> f64 {
    let centers = [
        (0.25 * grid.lx(), 0.25 * grid.ly()),
        (0.75 * grid.lx(), 0.25 * grid.ly()),
        (0.5 * grid.lx(), 0.75 * grid.ly()),
    ];
    let qt = 0.5 * 3f64.sqrt() * a0.max(0.0).sqrt();
    let s3 = 3f64.sqrt();
    for (cx, cy) in centers {
        let (xp, yp) = (x - cx, y - cy);
        if xp * xp + yp * yp <= seed.radius * seed.radius {
            return seed.mean
                + seed.amplitude
                    * ((qt * xp).cos() * (qt * yp / s3).cos() - 0.5 * (2.0 * qt * yp / s3).cos());
        }
    }
    seed.mean
}

/// Benchmark initial profile: seven tanh disks for AC/CH, three crystal
/// patches for PFC.
pub fn initial_condition(spec: &ModelSpec, grid: Grid2D) -> Field {
    match spec.kind {
        ModelKind::AllenCahn | ModelKind::CahnHilliard => {
            let eps = spec.epsilon;
            Field::from_fn(grid, |x, y| seven_disks(x, y, eps))
        }
        ModelKind::PhaseFieldCrystal => {
            let seed = spec.seed;
            let a0 = spec.a0;
            Field::from_fn(grid, |x, y| crystal_seed(x, y, &grid, a0, &seed))
        }
    }
}
