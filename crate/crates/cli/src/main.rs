use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use panelgmrf::basis::{bspline_basis, center_basis};
use panelgmrf::fit::fit_command;
use panelgmrf::model::DAYS_PER_YEAR;
use panelgmrf::penalty::{joint_weekly_penalty, penalty_matrix, PenaltySpec};
use panelgmrf::plot::plot_command;
use panelgmrf::simulate::{simulate, SimConfig};
use panelgmrf::spde::{build_mesh_with_report, write_mesh};
use panelgmrf::table::{load_table, save_table};
use panelgmrf::{Error, Result};

/// Sparse latent Gaussian smoothing for split-panel monitoring data.
#[derive(Parser)]
#[command(name = "panelgmrf", version)]
struct Cli {
    /// more log output (repeat for debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// only report errors
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the standard model and write an archive.
    ///
    /// Exits with 0 when the hyperparameter search converged and 2 when the
    /// archive holds the best point found before the budget ran out.
    Fit {
        /// observation table (CSV)
        #[arg(long)]
        data: PathBuf,
        /// fit configuration (TOML); defaults apply when omitted
        #[arg(long)]
        config: Option<PathBuf>,
        /// archive directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw a synthetic split-panel data set with known truth.
    Simulate {
        /// simulation configuration (TOML); the built-in design when omitted
        #[arg(long)]
        config: Option<PathBuf>,
        /// overrides the seed in the configuration
        #[arg(long)]
        seed: Option<u64>,
        /// observation table to write (CSV)
        #[arg(long)]
        out: PathBuf,
        /// where to store the ground truth (TOML)
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Draw charts from an archive: hrofweek, dayofweek, annual or spatial.
    Plot {
        #[arg(long)]
        archive: PathBuf,
        #[arg(long)]
        what: String,
        /// output directory; defaults to `<archive>/plots`
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a random-walk penalty matrix as `row,col,value` (1-based, lower triangle).
    Penalty(PenaltyArgs),
    /// Print a B-spline basis evaluated on a grid.
    Basis(BasisArgs),
    /// Build the mesh for the locations of an observation table.
    Mesh {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        max_edge: f64,
        /// mesh file to write
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct PenaltyArgs {
    /// difference order (1 or 2)
    #[arg(long, default_value_t = 1)]
    order: usize,
    /// number of vertices
    #[arg(long, default_value_t = 24)]
    n: usize,
    #[arg(long)]
    cyclic: bool,
    /// the 168×168 hour-of-week precision instead of a single walk
    #[arg(long, conflicts_with_all = ["order", "n", "cyclic"])]
    weekly: bool,
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    /// write to a file instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BasisArgs {
    #[arg(long, default_value_t = 10)]
    knots: usize,
    #[arg(long, default_value_t = 3)]
    degree: usize,
    /// open (non-cyclic) basis
    #[arg(long)]
    open: bool,
    #[arg(long, default_value_t = 1.0)]
    xl: f64,
    #[arg(long, default_value_t = DAYS_PER_YEAR as f64)]
    xr: f64,
    /// grid points between xl and xr (inclusive)
    #[arg(long, default_value_t = DAYS_PER_YEAR as usize)]
    points: usize,
    /// subtract column means over the grid
    #[arg(long)]
    center: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => Ok(fs::write(path, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn penalty(args: &PenaltyArgs) -> Result<()> {
    let q = if args.weekly {
        joint_weekly_penalty(args.jitter)?
    } else {
        penalty_matrix(&PenaltySpec::new(args.order, args.cyclic, args.n).with_jitter(args.jitter))?
    };
    let mut text = String::from("row,col,value\n");
    for (i, j, v) in q.iter() {
        let _ = writeln!(text, "{},{},{v}", i + 1, j + 1);
    }
    emit(&text, args.out.as_deref())
}

fn basis(args: &BasisArgs) -> Result<()> {
    if args.points < 2 {
        return Err(Error::InvalidSpec("--points must be at least 2".into()));
    }
    let step = (args.xr - args.xl) / (args.points - 1) as f64;
    let x: Vec<f64> = (0..args.points).map(|i| args.xl + step * i as f64).collect();
    let mut b = bspline_basis(&x, args.knots, args.degree, !args.open, args.xl, args.xr)?;
    if args.center {
        b = center_basis(&b, &x)?;
    }
    let mut text = String::from("x");
    for j in 0..b.ncols() {
        let _ = write!(text, ",b{}", j + 1);
    }
    text.push('\n');
    for (i, xi) in x.iter().enumerate() {
        let _ = write!(text, "{xi}");
        for v in b.row(i) {
            let _ = write!(text, ",{v}");
        }
        text.push('\n');
    }
    emit(&text, args.out.as_deref())
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Fit { data, config, out } => {
            let output = fit_command(&data, config.as_deref(), &out)?;
            let meta = &output.archive.metadata;
            println!(
                "fit {} observations, latent dimension {}, log marginal likelihood {:.4}",
                meta.n_obs, meta.latent_dim, meta.log_marginal_likelihood
            );
            for (name, value) in output.result.hyper.names.iter().zip(&output.result.hyper.values) {
                println!("  {name} = {value:.6e}");
            }
            if output.converged() {
                println!("archive written to {}", out.display());
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("warning: hyperparameter search did not converge; archive holds the best point found");
                Ok(ExitCode::from(2))
            }
        }
        Command::Simulate { config, seed, out, truth } => {
            let config = match config {
                Some(path) => SimConfig::load(&path)?,
                None => SimConfig::default(),
            };
            let (table, t) = simulate(&config, seed.unwrap_or(config.seed))?;
            save_table(&table, &out)?;
            if let Some(path) = truth {
                fs::write(path, t.to_toml_string()?)?;
            }
            println!("wrote {} rows to {}", table.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Plot { archive, what, out } => {
            let out = out.unwrap_or_else(|| archive.join("plots"));
            for path in plot_command(&archive, &what, &out)? {
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Penalty(args) => penalty(&args).map(|_| ExitCode::SUCCESS),
        Command::Basis(args) => basis(&args).map(|_| ExitCode::SUCCESS),
        Command::Mesh { data, max_edge, out } => {
            let loaded = load_table(&data)?;
            let (mesh, report) = build_mesh_with_report(&loaded.table.unique_locations(), max_edge)?;
            write_mesh(&mesh, &out)?;
            println!(
                "{} vertices, {} triangles, {} edge bisections, {} duplicate locations merged",
                mesh.n_vertices(),
                mesh.triangles().len(),
                report.bisected_lengths.len(),
                report.duplicates_merged
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
