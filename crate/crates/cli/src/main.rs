use clap::{Parser, Subcommand, ValueEnum};
use donflow::io::{self, checks, CommandError, Level, RunConfig};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "donflow", version, about = "Donaldson flow on the flat 4-torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the flow and write diagnostics, snapshots and a report.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the invariant suites and print a table of defects.
    Check {
        #[arg(long, value_enum, default_value = "fast")]
        level: CheckLevel,
        /// Use a Hodge star with one flipped sign; the suites must fail.
        #[arg(long, hide = true)]
        mutate_star: bool,
    },
    /// Compare the evolution of ρ⁺/u computed along independent routes.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckLevel {
    Fast,
    Full,
}

fn fail(err: &CommandError) -> ExitCode {
    eprintln!("{}", err.to_json());
    ExitCode::from(err.exit_code() as u8)
}

fn load(config: &Path, out: Option<&Path>) -> Result<(RunConfig, PathBuf), CommandError> {
    let cfg = RunConfig::load(config)?;
    let dir = io::resolve_out_dir(&cfg, out);
    Ok((cfg, dir))
}

fn print_json(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("reports serialize"));
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out } => match load(&config, out.as_deref()).and_then(|(cfg, dir)| io::cmd_run(&cfg, &dir)) {
            Ok(report) => {
                print_json(&report);
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::Compare { config, out } => {
            match load(&config, out.as_deref()).and_then(|(cfg, dir)| io::cmd_compare(&cfg, &dir)) {
                Ok(report) => {
                    print_json(&report);
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Check { level, mutate_star } => {
            let level = match level {
                CheckLevel::Fast => Level::Fast,
                CheckLevel::Full => Level::Full,
            };
            let star: checks::Star = if mutate_star { checks::mutated_star } else { donflow::algebra::star };
            match io::cmd_check(level, star) {
                Ok(rows) => {
                    print!("{}", checks::render_table(&rows));
                    ExitCode::SUCCESS
                }
                Err((rows, e)) => {
                    print!("{}", checks::render_table(&rows));
                    fail(&e)
                }
            }
        }
    }
}
