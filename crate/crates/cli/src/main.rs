use std::path::PathBuf;
use std::process::ExitCode;

use birkhoff_lab::{LabError, BUNDLED, OUT_DIR_ENV};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "birkhoff-lab", version, about = "Closed geodesics and Birkhoff sections on surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a bundled scenario or a scenario file.
    Run {
        scenario: String,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, env = OUT_DIR_ENV)]
        out: Option<PathBuf>,
    },
    /// List bundled scenarios.
    List,
    /// Show what a bundled scenario does.
    Describe { name: String },
    /// Surgery topology of a curve configuration given as JSON.
    Surgery {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res: Result<(), LabError> = match cli.command {
        Command::List => {
            for (name, _) in BUNDLED {
                let s = birkhoff_lab::bundled(name).expect("bundled");
                println!("{name:<26} {}", s.anchor);
            }
            Ok(())
        }
        Command::Describe { name } => birkhoff_lab::describe(&name).map(|d| print!("{d}")),
        Command::Surgery { config } => birkhoff_lab::surgery(&config).map(|j| println!("{j}")),
        Command::Run { scenario, threads, out } => birkhoff_lab::load(&scenario).and_then(|s| {
            let out = out.unwrap_or_else(birkhoff_lab::default_out_dir);
            let report = birkhoff_lab::run(&s, &out, threads)?;
            println!("{}: passed ({} steps), report in {}", report.scenario, report.steps.len(), out.join(&report.scenario).display());
            Ok(())
        }),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
