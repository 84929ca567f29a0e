//! Run configuration, binary snapshot/basis files and CSV outputs.

pub mod binary;
pub mod config;
pub mod csvlog;

pub use binary::{read_basis, read_snapshots, write_basis, write_snapshots, BasisFile};
pub use config::{load_config, parse_config, RunConfig, Truncation};
pub use csvlog::{compare, read_energy_csv, write_compare_report, write_energy_csv, write_singular_values, CompareReport};
