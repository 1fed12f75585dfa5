use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fictop::app::{self, AppError, FieldKind, OptimizeFlags};
use fictop::exec::Threads;
use fictop_core::study::Structure;

/// Level-set topology optimization with shielding and penetrating features.
#[derive(Parser)]
#[command(name = "fictop", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an optimization and write history.csv, VTK snapshots and the final design.
    Optimize {
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        max_iters: Option<usize>,
        /// Snapshot interval in iterations (0 disables).
        #[arg(long)]
        vtk_every: Option<usize>,
        #[arg(long, short)]
        quiet: bool,
    },
    /// Solve one field on a fixed structure without optimizing.
    Evaluate {
        config: PathBuf,
        /// s, p, T-dirichlet or T-neumann.
        #[arg(long)]
        field: String,
        /// File with `chi` or `phi` on its first line and one value per node.
        #[arg(long)]
        structure: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Write a two-wall test structure (shielded or penetrated) for the config's mesh.
    Structure {
        config: PathBuf,
        #[arg(long)]
        kind: String,
        #[arg(long, short)]
        output: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Optimize {
            config,
            output_dir,
            max_iters,
            vtk_every,
            quiet,
        } => {
            let threads = Threads::from_env().map_err(AppError::Usage)?;
            let flags = OptimizeFlags {
                output_dir,
                max_iters,
                vtk_every,
            };
            let summary = app::optimize(&config, &flags, threads, |msg| {
                if !quiet {
                    eprintln!("{msg}");
                }
            })?;
            println!("{summary}");
        }
        Command::Evaluate {
            config,
            field,
            structure,
            output_dir,
        } => {
            let field: FieldKind = field.parse()?;
            println!("{}", app::evaluate(&config, field, &structure, output_dir.as_deref())?);
        }
        Command::Structure { config, kind, output } => {
            let kind: Structure = kind.parse().map_err(|e: fictop_core::Error| AppError::Usage(e.to_string()))?;
            app::write_structure(&config, kind, &output)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
