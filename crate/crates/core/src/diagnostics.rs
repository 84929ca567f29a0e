/// One row of an energy log. Columns that do not apply to a run are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyRecord {
    pub t: f64,
    pub energy: f64,
    /// Two-level energy of BDF2 runs.
    pub modified_energy: Option<f64>,
    /// Dissipation rate of the step that produced this row.
    pub dissipation: Option<f64>,
    pub xi0: Option<f64>,
    /// `(phi, 1)`, the integral of the state variable.
    pub mass: Option<f64>,
    /// `||q - h(phi)||`, departure of the auxiliary variable from its definition.
    pub eq_drift: Option<f64>,
}
