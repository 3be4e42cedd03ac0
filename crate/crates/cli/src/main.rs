use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use slicesub::analytic::{compute_indicators, Variant};
use slicesub::config::ScenarioConfig;
use slicesub::grid::{CellId, Grid, NUM_CELLS};
use slicesub::harness::{self, Case, Format};
use slicesub::report::{self, CapStatsRow};
use slicesub::sim;

#[derive(Parser)]
#[command(
    name = "slicesub",
    version,
    about = "Subscription dynamics in a sliced mobile RAN"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario document (TOML); reference scenario when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(p) => ScenarioConfig::load(p)?,
            None => ScenarioConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.run.seed = s;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct SweepOutput {
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides the configured replication count.
    #[arg(long)]
    reps: Option<u32>,
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Subcommand)]
enum Command {
    /// Full sweep of one experiment case against the analytic model.
    Compare {
        #[arg(long)]
        case: String,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        output: SweepOutput,
    },
    /// Like `compare`, over an explicit list of parameter values.
    Sweep {
        #[arg(long)]
        case: String,
        /// Comma-separated parameter values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        output: SweepOutput,
    },
    /// One simulation run; per-cell indicators as CSV.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Result CSV (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write every event to this CSV.
        #[arg(long)]
        event_log: Option<PathBuf>,
        /// Write the capacity statistics seen at subscription times here.
        #[arg(long)]
        capstats: Option<PathBuf>,
    },
    /// Capacity statistics from measurements at random positions.
    Capstats {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analytic indicators from a capacity statistics table.
    Analytic {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        capstats: PathBuf,
        /// Mean users per cell; the configured population when omitted.
        #[arg(long)]
        n_hat: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dumps the frequency plan and the cell polygons.
    Grid {
        #[arg(long, default_value_t = 200.0)]
        isd: f64,
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long)]
        polygons: Option<PathBuf>,
    },
    /// Prints the reference scenario document.
    DefaultConfig,
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn run_sweep(
    case: &str,
    values: Option<&[f64]>,
    scenario: &ScenarioArgs,
    output: &SweepOutput,
) -> Result<()> {
    let case: Case = case.parse()?;
    let format: Format = output.format.parse()?;
    let mut cfg = scenario.load()?;
    if let Some(r) = output.reps {
        cfg.run.replications = r;
    }
    let rows = harness::run_sweep(case, &cfg, values)?;
    fs::create_dir_all(&output.out)
        .with_context(|| format!("cannot create {}", output.out.display()))?;
    let path = output
        .out
        .join(format!("case_{case}.{}", format.extension()));
    harness::emit(&rows, format, sink(Some(&path))?)?;
    eprintln!("wrote {} rows to {}", rows.len(), path.display());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Compare {
            case,
            scenario,
            output,
        } => run_sweep(&case, None, &scenario, &output)?,
        Command::Sweep {
            case,
            values,
            scenario,
            output,
        } => run_sweep(&case, Some(&values), &scenario, &output)?,
        Command::Simulate {
            scenario,
            out,
            event_log,
            capstats,
        } => {
            let mut cfg = scenario.load()?;
            cfg.run.event_log |= event_log.is_some();
            let result = sim::run(&cfg, cfg.run.seed)?;
            report::write_sim_result(&result, sink(out.as_deref())?)?;
            if let (Some(path), Some(log)) = (event_log, &result.event_log) {
                report::write_event_log(log, sink(Some(&path))?)?;
            }
            if let Some(path) = capstats {
                let rows: Vec<_> = result
                    .cells
                    .iter()
                    .filter_map(|c| {
                        c.capacity
                            .map(|s| CapStatsRow::new(c.cell, &s, result.seed))
                    })
                    .collect();
                report::write_capstats(&rows, sink(Some(&path))?)?;
            }
        }
        Command::Capstats {
            scenario,
            samples,
            out,
        } => {
            let cfg = scenario.load()?;
            let rows: Vec<_> = harness::per_cell_capacity_stats(&cfg, samples, cfg.run.seed)?
                .iter()
                .enumerate()
                .map(|(j, s)| CapStatsRow::new(CellId::from_index(j), s, cfg.run.seed))
                .collect();
            report::write_capstats(&rows, sink(out.as_deref())?)?;
        }
        Command::Analytic {
            scenario,
            capstats,
            n_hat,
            out,
        } => {
            let cfg = scenario.load()?;
            let file = File::open(&capstats)
                .with_context(|| format!("cannot open {}", capstats.display()))?;
            let stats = report::read_capstats(file)?;
            let n = n_hat.unwrap_or(f64::from(cfg.network.users_per_cell));
            if n.is_nan() || n <= 0.0 {
                bail!("--n-hat must be positive");
            }
            let weights = vec![cfg.weights()?; NUM_CELLS];
            let params = cfg.choice_params()?;
            let sets = Variant::ANALYTIC
                .iter()
                .map(|&v| {
                    compute_indicators(
                        &stats,
                        &[n; NUM_CELLS],
                        &weights,
                        &params,
                        v,
                        cfg.analytic.variance_log,
                    )
                })
                .collect::<slicesub::Result<Vec<_>>>()?;
            report::write_indicators(&sets, sink(out.as_deref())?)?;
        }
        Command::Grid {
            isd,
            plan,
            polygons,
        } => {
            let grid = Grid::new(isd)?;
            grid.write_plan_csv(sink(plan.as_deref())?)?;
            if let Some(p) = polygons {
                grid.write_polygons_csv(sink(Some(&p))?)?;
            }
        }
        Command::DefaultConfig => print!("{}", ScenarioConfig::default().to_toml_string()),
    }
    Ok(())
}
