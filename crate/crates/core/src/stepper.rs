//! Linear, energy-stable time stepping of the reduced systems.
//!
//! Every variant is written as `mass da/dt = -K(abar) a` (see [`crate::rom`]).
//! Crank-Nicolson uses `abar = 3/2 a^n - 1/2 a^{n-1}` and evaluates `K a` at
//! the midpoint; BDF2 uses `abar = 2 a^n - a^{n-1}` and evaluates `K a` at the
//! new level. BDF2 starts with one Crank-Nicolson step.
//!
//! The relaxed schemes replace the auxiliary part of the linear solution by
//! `xi0 a_q + (1 - xi0) U_q^T h(U_phi a_phi)` with the smallest `xi0` in
//! `[0, 1]` that keeps a fraction `1 - eta` of the step's dissipation.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::EnergyRecord;
use crate::error::{Error, Result};
use crate::model::AuxMap;
use crate::pod::PodBasis;
use crate::rom::{ReducedState, RomSystem, Variant};
use crate::spectral::Field;

pub const DEFAULT_ETA: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Cn,
    Bdf2,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Cn => "cn",
            Scheme::Bdf2 => "bdf2",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cn" => Ok(Scheme::Cn),
            "bdf2" => Ok(Scheme::Bdf2),
            other => Err(Error::config("scheme", format!("unknown scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    pub variant: Variant,
    pub relaxed: bool,
    pub eta: f64,
    pub dt: f64,
}

impl SchemeConfig {
    pub fn new(scheme: Scheme, variant: Variant, dt: f64) -> Self {
        Self {
            scheme,
            variant,
            relaxed: false,
            eta: DEFAULT_ETA,
            dt,
        }
    }

    pub fn relaxed(mut self, eta: f64) -> Self {
        self.relaxed = true;
        self.eta = eta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::config("eta", format!("must lie in [0, 1], got {}", self.eta)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("dt", format!("must be positive, got {}", self.dt)));
        }
        if self.relaxed && self.variant == Variant::Vanilla {
            return Err(Error::config(
                "relaxed",
                "relaxation needs an energy-stable variant (i or ii)",
            ));
        }
        Ok(())
    }

    /// Relaxed BDF2 on variant I, built by analogy with the other relaxed schemes.
    pub fn is_extension(&self) -> bool {
        self.relaxed && self.scheme == Scheme::Bdf2 && self.variant == Variant::I
    }

    pub fn label(&self) -> String {
        let mut s = format!("{}-{}", self.scheme.name(), self.variant.name());
        if self.relaxed {
            s.push_str("-relaxed");
        }
        if self.is_extension() {
            s.push_str(" (extension)");
        }
        s
    }
}

/// Projected initial value `a_phi = U_phi^T phi0`, `a_q = U_q^T h(phi0)`.
pub fn init_reduced(basis: &PodBasis, phi0: &Field, aux: &AuxMap) -> Result<ReducedState> {
    if phi0.values().len() != basis.n() {
        return Err(Error::Dimension(format!(
            "initial field has {} values, basis has {} rows",
            phi0.values().len(),
            basis.n()
        )));
    }
    let w = basis.weight;
    let phi = DVector::from_column_slice(phi0.values());
    let h = phi.map(|p| aux.h(p));
    Ok(ReducedState {
        a_phi: basis.u_phi().tr_mul(&phi) * w,
        a_q: basis.u_q().tr_mul(&h) * w,
        t: 0.0,
    })
}

/// Outcome of one step.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub a: DVector<f64>,
    /// Linear-step solution before relaxation (equal to `a` when unrelaxed).
    pub a_hat: DVector<f64>,
    /// Dissipation term of the step, without the `dt` factor.
    pub dissipation: f64,
    pub xi0: Option<f64>,
    /// Symmetric-testable form of the step matrix: positive definite whenever
    /// the step is uniquely solvable by the energy argument.
    pub solvability_form: DMatrix<f64>,
    /// Whether the step was a Crank-Nicolson step (BDF2 startup included).
    pub cn: bool,
}

fn extrapolate(a_n: &DVector<f64>, a_prev: &DVector<f64>, cn: bool) -> DVector<f64> {
    if cn {
        a_n * 1.5 - a_prev * 0.5
    } else {
        a_n * 2.0 - a_prev
    }
}

fn linear_step(
    sys: &RomSystem,
    variant: Variant,
    cn: bool,
    a_n: &DVector<f64>,
    a_prev: &DVector<f64>,
    dt: f64,
) -> Result<StepReport> {
    let r = sys.rank();
    if a_n.len() != 2 * r || a_prev.len() != 2 * r {
        return Err(Error::Dimension("reduced history has the wrong length".into()));
    }
    let abar = extrapolate(a_n, a_prev, cn);
    let dynamic = sys.assemble_dynamic(&abar.rows(0, r).into_owned())?;
    let (mass, k) = sys.operators(variant, &dynamic);
    let (lhs, rhs) = if cn {
        let lhs = &mass / dt + &k * 0.5;
        let rhs = (&mass / dt - &k * 0.5) * a_n;
        (lhs, rhs)
    } else {
        let lhs = &mass * (1.5 / dt) + &k;
        let rhs = &mass * (a_n * 4.0 - a_prev) / (2.0 * dt);
        (lhs, rhs)
    };
    let a_next = lhs
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Solvability("reduced step matrix is singular".into()))?;
    if a_next.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("reduced step produced non-finite values".into()));
    }
    let at = if cn { (&a_next + a_n) * 0.5 } else { a_next.clone() };
    let dissipation = sys.dissipation(variant, &dynamic, &at);
    let solvability_form = match variant {
        Variant::I => sys.mass_matrix() * &lhs,
        _ => lhs,
    };
    Ok(StepReport {
        a: a_next.clone(),
        a_hat: a_next,
        dissipation,
        xi0: None,
        solvability_form,
        cn,
    })
}

pub fn step_cn_ii(sys: &RomSystem, a_n: &DVector<f64>, a_prev: &DVector<f64>, dt: f64) -> Result<DVector<f64>> {
    Ok(linear_step(sys, Variant::II, true, a_n, a_prev, dt)?.a)
}

pub fn step_bdf2_ii(sys: &RomSystem, a_n: &DVector<f64>, a_prev: &DVector<f64>, dt: f64) -> Result<DVector<f64>> {
    Ok(linear_step(sys, Variant::II, false, a_n, a_prev, dt)?.a)
}

pub fn step_cn_i(sys: &RomSystem, a_n: &DVector<f64>, a_prev: &DVector<f64>, dt: f64) -> Result<DVector<f64>> {
    Ok(linear_step(sys, Variant::I, true, a_n, a_prev, dt)?.a)
}

pub fn step_bdf2_i(sys: &RomSystem, a_n: &DVector<f64>, a_prev: &DVector<f64>, dt: f64) -> Result<DVector<f64>> {
    Ok(linear_step(sys, Variant::I, false, a_n, a_prev, dt)?.a)
}

pub fn step_cn_vanilla(sys: &RomSystem, a_n: &DVector<f64>, a_prev: &DVector<f64>, dt: f64) -> Result<DVector<f64>> {
    Ok(linear_step(sys, Variant::Vanilla, true, a_n, a_prev, dt)?.a)
}

pub fn step_bdf2_vanilla(sys: &RomSystem, a_n: &DVector<f64>, a_prev: &DVector<f64>, dt: f64) -> Result<DVector<f64>> {
    Ok(linear_step(sys, Variant::Vanilla, false, a_n, a_prev, dt)?.a)
}

/// Smallest `xi` in `[0, 1]` with `a xi^2 + b xi + c <= 0`.
pub fn xi0_closed_form(a: f64, b: f64, c: f64) -> f64 {
    if !(a > 0.0) {
        // The mismatch vanishes, so the constraint is c <= 0 up to roundoff.
        return if c <= 0.0 { 0.0 } else { 1.0 };
    }
    if c <= 0.0 {
        return 0.0;
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        warn!("relaxation constraint has no real root (discriminant {disc:e}); keeping xi0 = 1");
        return 1.0;
    }
    let sq = disc.sqrt();
    // Stable smaller root: the two roots are q/a and c/q.
    let q = -0.5 * (b + b.signum() * sq);
    let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
    r1.min(r2).clamp(0.0, 1.0)
}

/// Weighted inner-product helper on full grid vectors.
fn wdot(w: f64, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    w * x.dot(y)
}

struct Mismatch {
    h: DVector<f64>,
    uq_hat: DVector<f64>,
    d: DVector<f64>,
}

fn mismatch(sys: &RomSystem, a_hat: &DVector<f64>) -> Mismatch {
    let r = sys.rank();
    let aux = sys.model().aux();
    let phi = sys.lift_phi(&a_hat.rows(0, r).into_owned());
    let h = phi.map(|p| aux.h(p));
    let uq_hat = sys.lift_q(&a_hat.rows(r, r).into_owned());
    let d = &uq_hat - &h;
    Mismatch { h, uq_hat, d }
}

fn cn_coefficients(sys: &RomSystem, m: &Mismatch, dissipation: f64, eta: f64, dt: f64) -> (f64, f64, f64) {
    let w = sys.weight();
    let a = 0.5 * wdot(w, &m.d, &m.d);
    let b = wdot(w, &m.h, &m.d);
    let c = 0.5 * wdot(w, &m.h, &m.h) - 0.5 * wdot(w, &m.uq_hat, &m.uq_hat) - dt * eta * dissipation;
    (a, b, c)
}

fn bdf2_coefficients(
    sys: &RomSystem,
    m: &Mismatch,
    a_n: &DVector<f64>,
    dissipation: f64,
    eta: f64,
    dt: f64,
) -> (f64, f64, f64) {
    let r = sys.rank();
    let w = sys.weight();
    let p = sys.lift_q(&a_n.rows(r, r).into_owned());
    let a = 1.25 * wdot(w, &m.d, &m.d);
    let b = 0.5 * wdot(w, &m.d, &(&m.h * 5.0 - &p * 2.0));
    let eh = &m.h * 2.0 - &p;
    let eu = &m.uq_hat * 2.0 - &p;
    let c = 0.25
        * (wdot(w, &m.h, &m.h) + wdot(w, &eh, &eh) - wdot(w, &m.uq_hat, &m.uq_hat) - wdot(w, &eu, &eu))
        - dt * eta * dissipation;
    (a, b, c)
}

/// Relaxation coefficients after a Crank-Nicolson linear step. `a_bar` is the
/// extrapolated state the step used.
pub fn relax_coefficients_cn(
    sys: &RomSystem,
    variant: Variant,
    a_hat: &DVector<f64>,
    a_n: &DVector<f64>,
    a_bar: &DVector<f64>,
    eta: f64,
    dt: f64,
) -> Result<(f64, f64, f64)> {
    let r = sys.rank();
    let dynamic = sys.assemble_dynamic(&a_bar.rows(0, r).into_owned())?;
    let mid = (a_hat + a_n) * 0.5;
    let diss = sys.dissipation(variant, &dynamic, &mid);
    Ok(cn_coefficients(sys, &mismatch(sys, a_hat), diss, eta, dt))
}

/// Relaxation coefficients after a BDF2 linear step.
pub fn relax_coefficients_bdf2(
    sys: &RomSystem,
    variant: Variant,
    a_hat: &DVector<f64>,
    a_n: &DVector<f64>,
    a_bar: &DVector<f64>,
    eta: f64,
    dt: f64,
) -> Result<(f64, f64, f64)> {
    let r = sys.rank();
    let dynamic = sys.assemble_dynamic(&a_bar.rows(0, r).into_owned())?;
    let diss = sys.dissipation(variant, &dynamic, a_hat);
    Ok(bdf2_coefficients(sys, &mismatch(sys, a_hat), a_n, diss, eta, dt))
}

/// `a_q = xi0 ahat_q + (1 - xi0) U_q^T h(U_phi a_phi)`.
pub fn apply_relaxation(sys: &RomSystem, a_hat: &DVector<f64>, xi0: f64) -> DVector<f64> {
    relax_with(sys, &mismatch(sys, a_hat), a_hat, xi0)
}

fn relax_with(sys: &RomSystem, m: &Mismatch, a_hat: &DVector<f64>, xi0: f64) -> DVector<f64> {
    let r = sys.rank();
    let proj = sys.project_q(&m.h);
    let mut a = a_hat.clone();
    let aq = a_hat.rows(r, r) * xi0 + proj * (1.0 - xi0);
    a.rows_mut(r, r).copy_from(&aq);
    a
}

/// One step of the configured scheme. `first` selects the Crank-Nicolson
/// startup for BDF2; pass `a_prev = a_n` on the very first step.
pub fn step(
    sys: &RomSystem,
    cfg: &SchemeConfig,
    a_n: &DVector<f64>,
    a_prev: &DVector<f64>,
    first: bool,
) -> Result<StepReport> {
    let cn = cfg.scheme == Scheme::Cn || first;
    let mut rep = linear_step(sys, cfg.variant, cn, a_n, a_prev, cfg.dt)?;
    if cfg.relaxed {
        let m = mismatch(sys, &rep.a_hat);
        let (a, b, c) = if cn {
            cn_coefficients(sys, &m, rep.dissipation, cfg.eta, cfg.dt)
        } else {
            bdf2_coefficients(sys, &m, a_n, rep.dissipation, cfg.eta, cfg.dt)
        };
        let xi0 = xi0_closed_form(a, b, c);
        rep.a = relax_with(sys, &m, &rep.a_hat, xi0);
        rep.xi0 = Some(xi0);
    }
    Ok(rep)
}

/// Relaxed step returning the new state and `xi0`.
pub fn relaxed_step(
    sys: &RomSystem,
    a_n: &DVector<f64>,
    a_prev: &DVector<f64>,
    cfg: &SchemeConfig,
    first: bool,
) -> Result<(DVector<f64>, f64)> {
    if !cfg.relaxed {
        return Err(Error::Argument("relaxed_step called with relaxation disabled".into()));
    }
    let rep = step(sys, cfg, a_n, a_prev, first)?;
    Ok((rep.a, rep.xi0.unwrap_or(1.0)))
}

/// Smallest Rayleigh quotient `x^T F x / x^T x` over `samples` random vectors.
pub fn min_rayleigh_quotient(form: &DMatrix<f64>, samples: usize, rng: &mut impl Rng) -> f64 {
    let n = form.nrows();
    let mut min = f64::INFINITY;
    for _ in 0..samples {
        let x = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let q = x.dot(&(form * &x)) / x.norm_squared();
        min = min.min(q);
    }
    min
}

/// Reduced trajectory: states at sample steps and one log row per step.
#[derive(Debug, Clone)]
pub struct RomRun {
    pub samples: Vec<(f64, DVector<f64>)>,
    pub log: Vec<EnergyRecord>,
    pub final_state: DVector<f64>,
}

fn log_row(
    sys: &RomSystem,
    cfg: &SchemeConfig,
    t: f64,
    a: &DVector<f64>,
    a_prev: &DVector<f64>,
    rep: Option<&StepReport>,
) -> EnergyRecord {
    let r = sys.rank();
    EnergyRecord {
        t,
        energy: sys.reduced_energy(a),
        modified_energy: (cfg.scheme == Scheme::Bdf2).then(|| sys.modified_bdf2_energy(a, a_prev)),
        dissipation: rep.map(|s| s.dissipation),
        xi0: rep.and_then(|s| s.xi0),
        mass: Some(sys.mass(&a.rows(0, r).into_owned())),
        eq_drift: Some(sys.eq_drift(a)),
    }
}

/// Integrates `steps` steps from `a0`, sampling every `sample_every` steps
/// (not at step 0, matching the full-order snapshots). `observe` sees every step report with its step index.
pub fn integrate_observed(
    sys: &RomSystem,
    cfg: &SchemeConfig,
    a0: &DVector<f64>,
    steps: usize,
    sample_every: usize,
    mut observe: impl FnMut(usize, &StepReport) -> Result<()>,
) -> Result<RomRun> {
    cfg.validate()?;
    if sample_every == 0 {
        return Err(Error::Argument("sample interval must be at least one step".into()));
    }
    if cfg.is_extension() {
        log::info!("relaxed BDF2 on variant I is an extension of the printed schemes");
    }
    let mut a_prev = a0.clone();
    let mut a = a0.clone();
    let mut samples = Vec::with_capacity(steps / sample_every);
    let mut log = Vec::with_capacity(steps + 1);
    log.push(log_row(sys, cfg, 0.0, &a, &a_prev, None));
    for k in 1..=steps {
        let rep = step(sys, cfg, &a, &a_prev, k == 1)?;
        observe(k, &rep)?;
        a_prev = std::mem::replace(&mut a, rep.a.clone());
        let t = k as f64 * cfg.dt;
        log.push(log_row(sys, cfg, t, &a, &a_prev, Some(&rep)));
        if k % sample_every == 0 {
            samples.push((t, a.clone()));
        }
    }
    Ok(RomRun {
        samples,
        log,
        final_state: a,
    })
}

pub fn integrate(
    sys: &RomSystem,
    cfg: &SchemeConfig,
    a0: &DVector<f64>,
    steps: usize,
    sample_every: usize,
) -> Result<RomRun> {
    integrate_observed(sys, cfg, a0, steps, sample_every, |_, _| Ok(()))
}

/// Steps chosen uniformly at random (without replacement) from `1..=steps`.
pub fn random_steps(steps: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all: Vec<usize> = (1..=steps).collect();
    let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, all.len(), count.min(all.len()))
        .into_iter()
        .map(|i| all[i])
        .collect();
    picked.sort_unstable();
    picked
}
