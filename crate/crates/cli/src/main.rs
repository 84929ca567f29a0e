use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eqrom::deim::{coefficient_snapshots, deim_build};
use eqrom::fom::steps_in;
use eqrom::io::{self, BasisFile};
use eqrom::model::AuxMap;
use eqrom::pod::singular_values;
use eqrom::stepper;
use eqrom::{
    build_model, compute_basis, initial_condition, init_reduced, run_fom, truncation_rank, Error, Result,
    RomSystem, Scheme, SnapshotSet, ThresholdMode, Variant,
};
use log::info;
use nalgebra::DMatrix;

#[derive(Parser)]
#[command(name = "eqrom", version, about = "Energy-stable POD reduced-order models for gradient flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full-order model and write snapshots plus an energy log.
    Fom {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        snapshots_out: PathBuf,
        #[arg(long)]
        energy_out: PathBuf,
    },
    /// Write the singular values of the phi and q snapshot matrices.
    Svd {
        #[arg(long)]
        snapshots: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a POD basis, optionally with a DEIM operator.
    Pod(PodArgs),
    /// Integrate a reduced model.
    Rom(RomArgs),
    /// Compare a reduced trajectory against the full-order one.
    Compare {
        #[arg(long)]
        fom_energy: PathBuf,
        #[arg(long)]
        rom_energy: PathBuf,
        #[arg(long)]
        fom_snapshots: PathBuf,
        #[arg(long)]
        rom_traj: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
}

#[derive(Args)]
struct PodArgs {
    #[arg(long)]
    snapshots: PathBuf,
    #[arg(long, conflicts_with = "threshold", required_unless_present = "threshold")]
    rank: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, value_enum, default_value = "relative")]
    threshold_mode: Mode,
    #[arg(long)]
    basis_out: PathBuf,
    /// Number of DEIM interpolation points.
    #[arg(long)]
    deim: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Relative,
    Absolute,
}

#[derive(Args)]
struct RomArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    basis: PathBuf,
    /// Defaults to the config value.
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    /// Defaults to the config value.
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    /// Without `--relaxed` or `--unrelaxed` the config value applies.
    #[arg(long)]
    relaxed: bool,
    #[arg(long, conflicts_with = "relaxed")]
    unrelaxed: bool,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    traj_out: PathBuf,
    #[arg(long)]
    energy_out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Vanilla,
    I,
    Ii,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Cn,
    Bdf2,
}

fn fom(config: &PathBuf, snapshots_out: &PathBuf, energy_out: &PathBuf) -> Result<()> {
    let cfg = io::load_config(config)?;
    let t = &cfg.time;
    info!("full-order {} run on {}x{}", cfg.model.kind.name(), cfg.grid.nx(), cfg.grid.ny());
    let (snaps, log) = run_fom(&cfg.model, cfg.grid, t.dt, t.t_end, t.sample_interval)?;
    io::write_snapshots(snapshots_out, &snaps)?;
    io::write_energy_csv(energy_out, &log)
}

fn svd(snapshots: &PathBuf, out: &PathBuf) -> Result<()> {
    let s = io::read_snapshots(snapshots)?;
    let w = s.grid.cell_area();
    io::write_singular_values(out, &singular_values(&s.phi, w)?, &singular_values(&s.q, w)?)
}

fn pod(args: &PodArgs) -> Result<()> {
    let s = io::read_snapshots(&args.snapshots)?;
    let w = s.grid.cell_area();
    let r = match (args.rank, args.threshold) {
        (Some(r), _) => r,
        (None, Some(th)) => {
            let mode = match args.threshold_mode {
                Mode::Relative => ThresholdMode::Relative,
                Mode::Absolute => ThresholdMode::Absolute,
            };
            let rp = truncation_rank(&singular_values(&s.phi, w)?, th, mode)?;
            let rq = truncation_rank(&singular_values(&s.q, w)?, th, mode)?;
            rp.max(rq)
        }
        (None, None) => return Err(Error::Argument("either --rank or --threshold is required".into())),
    };
    info!("POD rank {r} from {} snapshots", s.m());
    let basis = compute_basis(&s, r)?;
    let deim = match args.deim {
        // g is linear and does not see the shift, so any AuxMap will do.
        Some(k) => Some(deim_build(
            &coefficient_snapshots(&s.phi, &AuxMap { shift: 0.0 }),
            k,
            basis.u_phi(),
            w,
        )?),
        None => None,
    };
    if let Some(d) = &deim {
        info!("DEIM with {} points, condition number {:.3e}", d.k(), d.condition);
    }
    io::write_basis(&args.basis_out, &BasisFile { basis, deim })
}

fn rom(args: &RomArgs) -> Result<()> {
    let cfg = io::load_config(&args.config)?;
    let BasisFile { basis, deim } = io::read_basis(&args.basis)?;
    let mut sc = cfg.scheme_config();
    if let Some(v) = args.variant {
        sc.variant = match v {
            VariantArg::Vanilla => Variant::Vanilla,
            VariantArg::I => Variant::I,
            VariantArg::Ii => Variant::II,
        };
    }
    if let Some(s) = args.scheme {
        sc.scheme = match s {
            SchemeArg::Cn => Scheme::Cn,
            SchemeArg::Bdf2 => Scheme::Bdf2,
        };
    }
    if args.relaxed || args.unrelaxed {
        sc.relaxed = args.relaxed;
    }
    if let Some(eta) = args.eta {
        sc.eta = eta;
    }
    sc.validate()?;

    let model = build_model(&cfg.model, cfg.grid)?;
    let phi0 = initial_condition(&cfg.model, cfg.grid);
    let a0 = init_reduced(&basis, &phi0, model.aux())?.stacked();
    let mut sys = RomSystem::assemble(basis, model)?;
    if let Some(d) = deim {
        sys = sys.with_deim(d)?;
    }
    let t = &cfg.time;
    let steps = steps_in(t.t_end, t.dt, "final time")?;
    let every = steps_in(t.sample_interval, t.dt, "sample interval")?;
    if every == 0 {
        return Err(Error::Argument("sample interval shorter than the time step".into()));
    }
    info!("reduced run {} with r = {}, {steps} steps", sc.label(), sys.rank());
    let run = stepper::integrate(&sys, &sc, &a0, steps, every)?;

    let r = sys.rank();
    let m = run.samples.len();
    let mut ap = DMatrix::zeros(r, m);
    let mut aq = DMatrix::zeros(r, m);
    for (j, (_, a)) in run.samples.iter().enumerate() {
        ap.set_column(j, &a.rows(0, r));
        aq.set_column(j, &a.rows(r, r));
    }
    let traj = SnapshotSet::new(
        cfg.grid,
        sys.basis().u_phi() * ap,
        sys.basis().u_q() * aq,
        run.samples.iter().map(|(t, _)| *t).collect(),
        t.sample_interval,
    )?;
    io::write_snapshots(&args.traj_out, &traj)?;
    io::write_energy_csv(&args.energy_out, &run.log)
}

fn compare(
    fom_energy: &PathBuf,
    rom_energy: &PathBuf,
    fom_snapshots: &PathBuf,
    rom_traj: &PathBuf,
    report: &PathBuf,
) -> Result<()> {
    let rep = io::compare(
        &io::read_energy_csv(fom_energy)?,
        &io::read_energy_csv(rom_energy)?,
        &io::read_snapshots(fom_snapshots)?,
        &io::read_snapshots(rom_traj)?,
    )?;
    info!(
        "max state error {:.3e}, max energy error {:.3e}",
        rep.max_state_error, rep.max_energy_error
    );
    io::write_compare_report(report, &rep)
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Fom {
            config,
            snapshots_out,
            energy_out,
        } => fom(config, snapshots_out, energy_out),
        Command::Svd { snapshots, out } => svd(snapshots, out),
        Command::Pod(args) => pod(args),
        Command::Rom(args) => rom(args),
        Command::Compare {
            fom_energy,
            rom_energy,
            fom_snapshots,
            rom_traj,
            report,
        } => compare(fom_energy, rom_energy, fom_snapshots, rom_traj, report),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
