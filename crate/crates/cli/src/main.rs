use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use consensus_cli::commands::{self, Artifacts, CliError, CliResult, SweepParam};
use consensus_core::ScenarioConfig;

#[derive(Parser)]
#[command(
    name = "consensus",
    version,
    about = "Leader-following consensus with sampled, noisy outputs"
)]
struct Cli {
    /// Scenario file (TOML).
    #[arg(long, global = true, conflicts_with = "scenario")]
    config: Option<PathBuf>,
    /// Bundled scenario: chua_clean, chua_noisy or certified_small.
    #[arg(long, global = true)]
    scenario: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    horizon: Option<f64>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Exit with status 4 when a sufficient condition does not hold.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the gain matrices for a block structure.
    Gains {
        #[arg(long, default_value_t = 2)]
        q: usize,
        #[arg(long, default_value_t = 3)]
        m: usize,
        #[arg(long)]
        csv: bool,
    },
    /// Evaluate the sufficient conditions and the error envelope.
    Bounds {
        /// Also print the smallest certified tuning for this graph and field.
        #[arg(long)]
        synthesize: bool,
    },
    /// Run the scenario and write traces, plots and a summary.
    Simulate,
    /// Steady mean error against one tuning parameter.
    Sweep {
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 3)]
        seeds: u64,
    },
    /// Bounds, simulation and a combined report.
    Report,
}

impl Cli {
    fn load(&self) -> CliResult<ScenarioConfig> {
        let mut cfg = match (&self.config, self.scenario.as_deref()) {
            (Some(path), _) => ScenarioConfig::from_path(path).map_err(|e| match e {
                consensus_core::Error::Io(io) => {
                    CliError::Usage(format!("cannot read {}: {io}", path.display()))
                }
                other => other.into(),
            })?,
            (None, Some("certified_small")) => ScenarioConfig::certified_small()?,
            (None, name) => ScenarioConfig::bundled(name.unwrap_or("chua_clean"))?,
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(h) = self.horizon {
            cfg.horizon = h;
        }
        if let Some(dt) = self.dt {
            cfg.dt = dt;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write(out: &std::path::Path, art: &Artifacts) -> CliResult<()> {
    for p in art.write(out)? {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn execute(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Gains { q, m, csv } => {
            print!("{}", commands::gains(*q, *m, *csv)?);
        }
        Command::Bounds { synthesize } => {
            let cfg = cli.load()?;
            let r = commands::bound_report(&cfg)?;
            print!("{}", commands::render_bounds(&cfg, &r)?);
            if *synthesize {
                print!("{}", commands::render_synthesized(&cfg)?);
            }
            commands::enforce(cli.strict, &r)?;
        }
        Command::Simulate => {
            let cfg = cli.load()?;
            if cli.strict {
                commands::enforce(true, &commands::bound_report(&cfg)?)?;
            }
            let (art, summary) = commands::simulate(&cfg)?;
            write(&cli.out, &art)?;
            print!("{summary}");
        }
        Command::Sweep {
            param,
            values,
            seeds,
        } => {
            let cfg = cli.load()?;
            let csv = commands::sweep(&cfg, *param, values, *seeds)?;
            let mut art = Artifacts::default();
            art.add("sweep.csv", csv.clone());
            write(&cli.out, &art)?;
            print!("{csv}");
        }
        Command::Report => {
            let cfg = cli.load()?;
            let r = commands::bound_report(&cfg)?;
            let bounds = commands::render_bounds(&cfg, &r)?;
            commands::enforce(cli.strict, &r)?;
            let (mut art, summary) = commands::simulate(&cfg)?;
            let report = format!("[bounds]\n{bounds}\n[simulation]\n{summary}");
            art.add("bounds.txt", bounds);
            art.add("report.txt", report.clone());
            write(&cli.out, &art)?;
            print!("{report}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
