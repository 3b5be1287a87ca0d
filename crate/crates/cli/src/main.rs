//! `besselkit` command-line front-end.

mod commands;
mod config;
mod output;

use besselkit::ErrorCategory;
use clap::Parser;
use commands::RunError;
use config::{Command, Format, RawConfig, RunConfig};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

/// Perturbed Bessel operators on the half-line: solutions, Jost functions,
/// spectra, Green kernels, boundary functionals and scattering lengths.
#[derive(Debug, Parser)]
#[command(name = "besselkit", version)]
struct Cli {
    /// Computation to run.
    #[arg(value_enum)]
    command: Command,
    /// `key=value` overrides; a bare word selects the potential.
    overrides: Vec<String>,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Worker threads for k-grid sweeps.
    #[arg(long, env = "BESSELKIT_THREADS")]
    threads: Option<usize>,
    /// Grid node count.
    #[arg(long)]
    grid_n: Option<usize>,
    /// Smallest grid node.
    #[arg(long)]
    xmin: Option<f64>,
    /// Largest grid node.
    #[arg(long)]
    xmax: Option<f64>,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_CLASS: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

fn report(code: &str, category: &str, message: &str, exit: u8) -> ExitCode {
    let obj = serde_json::json!({ "error": code, "category": category, "message": message });
    eprintln!("{obj}");
    ExitCode::from(exit)
}

fn config_error(message: &str) -> ExitCode {
    report("ConfigError", "input", message, EXIT_CONFIG)
}

fn build_config(cli: &Cli) -> Result<RunConfig, config::ConfigError> {
    let (mut raw, base_dir) = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| config::ConfigError(format!("cannot read `{}`: {e}", path.display())))?;
            (RawConfig::parse(&text)?, path.parent().map(PathBuf::from))
        }
        None => (RawConfig::default(), None),
    };
    for token in &cli.overrides {
        raw.apply_override(token)?;
    }
    if let Some(n) = cli.grid_n {
        raw.set("grid_n", &n.to_string());
    }
    if let Some(x) = cli.xmin {
        raw.set("x_min", &format!("{x:?}"));
    }
    if let Some(x) = cli.xmax {
        raw.set("x_max", &format!("{x:?}"));
    }
    RunConfig::build(cli.command, raw, cli.format, cli.out.clone(), base_dir.as_deref())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return config_error(&e.to_string());
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return config_error("`--threads` must be positive");
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return config_error(&e.to_string());
        }
    }
    let cfg = match build_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => return config_error(&e.0),
    };
    let table = match commands::run(&cfg) {
        Ok(t) => t,
        Err(RunError::Config(e)) => return config_error(&e.0),
        Err(RunError::Lib(e)) => {
            let (category, exit) = match e.category() {
                ErrorCategory::Input => ("input", EXIT_CONFIG),
                ErrorCategory::Class => ("class", EXIT_CLASS),
                ErrorCategory::Numerical => ("numerical", EXIT_NUMERICAL),
            };
            return report(e.code(), category, &e.to_string(), exit);
        }
    };
    let written = match &cfg.out {
        Some(path) => std::fs::File::create(path).and_then(|f| {
            let mut w = std::io::BufWriter::new(f);
            output::write_table(&mut w, cfg.command.name(), &table, cfg.format)?;
            w.flush()
        }),
        None => {
            let stdout = std::io::stdout();
            let mut w = std::io::BufWriter::new(stdout.lock());
            output::write_table(&mut w, cfg.command.name(), &table, cfg.format).and_then(|_| w.flush())
        }
    };
    if let Err(e) = written.or_else(|e| if e.kind() == std::io::ErrorKind::BrokenPipe { Ok(()) } else { Err(e) }) {
        return report("IoError", "numerical", &e.to_string(), EXIT_NUMERICAL);
    }
    if cfg.command == Command::Selftest {
        let failed = commands::selftest_failures(&table);
        if failed > 0 {
            return report("SelftestFailed", "numerical", &format!("{failed} identities failed"), EXIT_NUMERICAL);
        }
    }
    ExitCode::SUCCESS
}
