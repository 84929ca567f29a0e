//! Full-order solver: Crank-Nicolson on the quadratized system with an
//! extrapolated nonlinear coefficient.
//!
//! With `gbar = g(3/2 phi^n - 1/2 phi^{n-1})`, `mu^n = L0 phi^n + gbar q^n` and
//! `A = L0 + diag(gbar^2)`, one step reads
//!
//! ```text
//! dphi = -dt G (mu^n + 1/2 A dphi),     q^{n+1} = q^n + gbar dphi.
//! ```
//!
//! For `G = M*I` this is the SPD system `(I + dt M/2 A) dphi = -dt M mu^n`.
//! Otherwise it is multiplied by `A` to give the SPD system
//! `(A + dt/2 A G A) dphi = -dt A G mu^n`. Both are solved by preconditioned
//! conjugate gradients with a Fourier-diagonal preconditioner.

use log::debug;

use crate::diagnostics::EnergyRecord;
use crate::error::{Error, Result};
use crate::model::{initial_condition, EqModel, ModelSpec};
use crate::pod::SnapshotSet;
use crate::spectral::{weighted_dot, Field, FourierMultiplier, Grid2D};
use nalgebra::DMatrix;

pub const CG_TOL: f64 = 1e-10;
pub const CG_MAX_ITER: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct FomState {
    pub phi: Field,
    pub q: Field,
    pub t: f64,
}

impl FomState {
    /// `(phi, 1)`.
    pub fn mass(&self) -> f64 {
        let w = self.phi.grid().cell_area();
        w * self.phi.values().iter().sum::<f64>()
    }

    pub fn energy(&self, model: &EqModel) -> Result<f64> {
        model.energy_raw(self.phi.values(), self.q.values())
    }

    /// `||q - h(phi)||`.
    pub fn eq_drift(&self, model: &EqModel) -> f64 {
        let w = self.phi.grid().cell_area();
        let aux = model.aux();
        let s: f64 = self
            .phi
            .values()
            .iter()
            .zip(self.q.values())
            .map(|(&p, &q)| (q - aux.h(p)).powi(2))
            .sum();
        (w * s).sqrt()
    }
}

pub fn fom_init(spec: &ModelSpec, grid: Grid2D) -> Result<FomState> {
    spec.validate()?;
    let phi = initial_condition(spec, grid);
    let aux = crate::model::AuxMap {
        shift: spec.aux_shift(),
    };
    Ok(state_from_phi(phi, &aux))
}

/// State with `q = h(phi)` at `t = 0`.
pub fn state_from_phi(phi: Field, aux: &crate::model::AuxMap) -> FomState {
    let q = aux.h_field(&phi);
    FomState { phi, q, t: 0.0 }
}

/// Result of one full-order step.
#[derive(Debug, Clone)]
pub struct FomStep {
    pub state: FomState,
    /// `phi^{n+1} - phi^n`, reusable as the next initial guess.
    pub increment: Vec<f64>,
    /// `(mu, G mu)` at the half step.
    pub dissipation: f64,
    pub iterations: usize,
}

/// One CN step. `prev_phi` is `phi^{n-1}`; pass `phi^n` itself on the first
/// step. `guess` warm-starts the Krylov solve.
pub fn fom_step_cn(
    model: &EqModel,
    state: &FomState,
    prev_phi: &[f64],
    dt: f64,
    guess: Option<&[f64]>,
) -> Result<FomStep> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Argument(format!("time step must be positive, got {dt}")));
    }
    let grid = *model.grid();
    state.phi.grid().check_same(&grid, "fom step")?;
    state.q.grid().check_same(&grid, "fom step")?;
    let n = grid.len();
    if prev_phi.len() != n {
        return Err(Error::Dimension("previous state has the wrong length".into()));
    }
    let mobility = model.mobility();
    if mobility.skew().is_some() {
        return Err(Error::ModelDefinition(
            "full-order solver supports symmetric mobility only".into(),
        ));
    }
    let phi = state.phi.values();
    let q = state.q.values();
    let aux = model.aux();

    let gbar: Vec<f64> = phi
        .iter()
        .zip(prev_phi)
        .map(|(&p, &pm)| aux.g(1.5 * p - 0.5 * pm))
        .collect();
    let g2: Vec<f64> = gbar.iter().map(|g| g * g).collect();
    if g2.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite extrapolated coefficient".into()));
    }

    let mut mu = vec![0.0; n];
    model.apply_l0_into(phi, &mut mu)?;
    for i in 0..n {
        mu[i] += gbar[i] * q[i];
    }

    let apply_a = |x: &[f64], out: &mut [f64]| -> Result<()> {
        model.apply_l0_into(x, out)?;
        for i in 0..x.len() {
            out[i] += g2[i] * x[i];
        }
        Ok(())
    };

    let c = g2.iter().sum::<f64>() / n as f64;
    let sp = model.spectral();
    let mut x = match guess {
        Some(g) if g.len() == n => g.to_vec(),
        _ => vec![0.0; n],
    };

    let iterations = if let Some(m) = mobility.as_scalar() {
        let b: Vec<f64> = mu.iter().map(|v| -dt * m * v).collect();
        let pre = model.l0().map(|s| 1.0 / (1.0 + 0.5 * dt * m * (s + c)));
        let mut tmp = vec![0.0; n];
        pcg(
            |v, out| {
                apply_a(v, &mut tmp)?;
                for i in 0..n {
                    out[i] = v[i] + 0.5 * dt * m * tmp[i];
                }
                Ok(())
            },
            |r, z| sp.apply_into(&pre, r, z),
            &b,
            &mut x,
        )?
    } else {
        let g_sym = mobility.symmetric();
        let mut gmu = vec![0.0; n];
        sp.apply_into(g_sym, &mu, &mut gmu)?;
        let mut b = vec![0.0; n];
        apply_a(&gmu, &mut b)?;
        b.iter_mut().for_each(|v| *v *= -dt);
        let pre = preconditioner(model.l0(), g_sym, c, dt)?;
        let mut t1 = vec![0.0; n];
        let mut t2 = vec![0.0; n];
        pcg(
            |v, out| {
                apply_a(v, &mut t1)?;
                sp.apply_into(g_sym, &t1, &mut t2)?;
                apply_a(&t2, out)?;
                for i in 0..n {
                    out[i] = t1[i] + 0.5 * dt * out[i];
                }
                Ok(())
            },
            |r, z| sp.apply_into(&pre, r, z),
            &b,
            &mut x,
        )?
    };

    if mobility.annihilates_constants() {
        let mean = x.iter().sum::<f64>() / n as f64;
        x.iter_mut().for_each(|v| *v -= mean);
    }

    let mut ax = vec![0.0; n];
    apply_a(&x, &mut ax)?;
    let mu_half: Vec<f64> = mu.iter().zip(&ax).map(|(m, a)| m + 0.5 * a).collect();
    let mut gmu_half = vec![0.0; n];
    model.apply_mobility_into(&mu_half, &mut gmu_half)?;
    let dissipation = weighted_dot(grid.cell_area(), &mu_half, &gmu_half);

    let phi_next: Vec<f64> = phi.iter().zip(&x).map(|(p, d)| p + d).collect();
    let q_next: Vec<f64> = q.iter().zip(&x).zip(&gbar).map(|((q, d), g)| q + g * d).collect();
    if phi_next.iter().chain(&q_next).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("full-order step produced non-finite values".into()));
    }

    Ok(FomStep {
        state: FomState {
            phi: Field::new(grid, phi_next)?,
            q: Field::new(grid, q_next)?,
            t: state.t + dt,
        },
        increment: x,
        dissipation,
        iterations,
    })
}

/// Fourier symbol of the inverse of `(L0 + c) + dt/2 (L0 + c) G (L0 + c)`.
fn preconditioner(
    l0: &FourierMultiplier,
    g: &FourierMultiplier,
    c: f64,
    dt: f64,
) -> Result<FourierMultiplier> {
    let sym: Vec<f64> = l0
        .symbol()
        .iter()
        .zip(g.symbol())
        .map(|(&l, &gs)| {
            let a = l + c;
            1.0 / (a + 0.5 * dt * a * gs * a)
        })
        .collect();
    FourierMultiplier::from_symbol(*l0.grid(), sym)
}

/// Preconditioned conjugate gradients; stops at `||r|| <= CG_TOL ||b||`.
/// Returns the iteration count.
pub(crate) fn pcg(
    mut apply: impl FnMut(&[f64], &mut [f64]) -> Result<()>,
    mut precond: impl FnMut(&[f64], &mut [f64]) -> Result<()>,
    b: &[f64],
    x: &mut [f64],
) -> Result<usize> {
    let n = b.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(0);
    }
    let mut r = vec![0.0; n];
    apply(x, &mut r)?;
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    if dot(&r, &r).sqrt() <= CG_TOL * bnorm {
        return Ok(0);
    }
    let mut z = vec![0.0; n];
    precond(&r, &mut z)?;
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=CG_MAX_ITER {
        apply(&p, &mut ap)?;
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Solver(format!(
                "conjugate gradients lost positive definiteness at iteration {it}"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rnorm = dot(&r, &r).sqrt();
        if !rnorm.is_finite() {
            return Err(Error::Numeric("non-finite residual in conjugate gradients".into()));
        }
        if rnorm <= CG_TOL * bnorm {
            return Ok(it);
        }
        precond(&r, &mut z)?;
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Solver(format!(
        "conjugate gradients did not converge in {CG_MAX_ITER} iterations"
    )))
}

/// Number of whole steps of size `dt` in `span`, or an error if `span` is not
/// a multiple of `dt`.
/// Number of steps of size `dt` in `span`, which must be a whole multiple.
pub fn steps_in(span: f64, dt: f64, what: &str) -> Result<usize> {
    let k = (span / dt).round();
    if !(k >= 0.0) || (k * dt - span).abs() > 1e-9 * span.abs().max(dt) {
        return Err(Error::Argument(format!(
            "{what} {span} is not a whole multiple of the time step {dt}"
        )));
    }
    Ok(k as usize)
}

fn record(model: &EqModel, state: &FomState, dissipation: Option<f64>) -> Result<EnergyRecord> {
    Ok(EnergyRecord {
        t: state.t,
        energy: state.energy(model)?,
        dissipation,
        mass: Some(state.mass()),
        eq_drift: Some(state.eq_drift(model)),
        ..Default::default()
    })
}

/// Integrates from `initial` to `t_end`, sampling `phi` and `h(phi)` at
/// `t = k * sample_interval`, `k = 1, 2, ...` (the initial state is not a
/// snapshot). The log has one row per step plus the initial row.
pub fn run_fom_from(
    model: &EqModel,
    initial: FomState,
    dt: f64,
    t_end: f64,
    sample_interval: f64,
) -> Result<(SnapshotSet, Vec<EnergyRecord>)> {
    if !(dt > 0.0) || !(t_end >= 0.0) || !(sample_interval > 0.0) {
        return Err(Error::Argument(
            "time step, final time and sample interval must be positive".into(),
        ));
    }
    let steps = steps_in(t_end, dt, "final time")?;
    let every = steps_in(sample_interval, dt, "sample interval")?;
    if every == 0 {
        return Err(Error::Argument("sample interval shorter than the time step".into()));
    }
    let grid = *model.grid();
    let aux = *model.aux();
    let m = steps / every;
    if m == 0 {
        return Err(Error::Argument("final time is shorter than the sample interval".into()));
    }

    let mut phi_cols = DMatrix::zeros(grid.len(), m);
    let mut q_cols = DMatrix::zeros(grid.len(), m);
    let mut times = Vec::with_capacity(m);
    let mut col = 0;
    let mut sample = |s: &FomState, col: &mut usize| {
        let h = aux.h_field(&s.phi);
        phi_cols.column_mut(*col).copy_from_slice(s.phi.values());
        q_cols.column_mut(*col).copy_from_slice(h.values());
        times.push(s.t);
        *col += 1;
    };

    let mut state = initial;
    let mut log = Vec::with_capacity(steps + 1);
    log.push(record(model, &state, None)?);

    let mut prev = state.phi.values().to_vec();
    let mut guess: Option<Vec<f64>> = None;
    let mut total_iters = 0;
    for k in 1..=steps {
        let step = fom_step_cn(model, &state, &prev, dt, guess.as_deref())?;
        total_iters += step.iterations;
        prev = state.phi.into_values();
        state = step.state;
        state.t = k as f64 * dt;
        log.push(record(model, &state, Some(step.dissipation))?);
        guess = Some(step.increment);
        if k % every == 0 {
            sample(&state, &mut col);
        }
    }
    debug!("full-order run: {steps} steps, {total_iters} Krylov iterations");
    let snaps = SnapshotSet::new(grid, phi_cols, q_cols, times, sample_interval)?;
    Ok((snaps, log))
}

pub fn run_fom(
    spec: &ModelSpec,
    grid: Grid2D,
    dt: f64,
    t_end: f64,
    sample_interval: f64,
) -> Result<(SnapshotSet, Vec<EnergyRecord>)> {
    let model = crate::model::build_model(spec, grid)?;
    let init = fom_init(spec, grid)?;
    run_fom_from(&model, init, dt, t_end, sample_interval)
}
