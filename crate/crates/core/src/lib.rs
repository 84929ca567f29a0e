//! Structure-preserving reduced-order models for energy-quadratized gradient flows.
//!
//! The pipeline is: full-order pseudo-spectral solve ([`fom`]) producing
//! snapshots, POD bases by the method of snapshots ([`pod`]), Galerkin
//! reduced systems ([`rom`]), linear energy-stable time stepping with optional
//! relaxation ([`stepper`]), and optional DEIM for the nonlinear coefficient
//! ([`deim`]). File formats and run configuration live in [`io`].

pub mod deim;
pub mod diagnostics;
pub mod error;
pub mod fom;
pub mod io;
pub mod model;
pub mod pod;
pub mod rom;
pub mod spectral;
pub mod stepper;

pub use error::{Error, Result};
pub use model::{build_model, energy, initial_condition, EqModel, ModelKind, ModelSpec};
pub use spectral::{inner_product, laplacian_symbol, Field, FourierMultiplier, Grid2D, Spectral};

pub use deim::{deim_build, DeimOperator};
pub use diagnostics::EnergyRecord;
pub use fom::{fom_init, fom_step_cn, run_fom, FomState};
pub use pod::{compute_basis, projection_error, truncation_rank, PodBasis, SnapshotSet, ThresholdMode};
pub use rom::{ReducedState, RomSystem, Variant};
pub use stepper::{init_reduced, xi0_closed_form, Scheme, SchemeConfig};
