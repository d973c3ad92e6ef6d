use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use surfwave::dtn::Depth;
use surfwave::scenario::{
    self, write_atomic, write_outputs, InequalitySettings, Refinement, RunManifest, ScenarioError, SimConfig, INITIAL_CONDITIONS,
};
use surfwave::standing_waves::Quadrature;

/// Water-wave simulations with virial-identity and trace-inequality diagnostics.
#[derive(Debug, Parser)]
#[command(name = "surfwave", version)]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "SURFWAVE_OUT", default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate one configuration and check its identities.
    Simulate(RunArgs),
    /// Rerun a configuration under successive refinements and fit observed orders.
    Converge {
        #[command(flatten)]
        run: RunArgs,
        /// Number of refinement levels (at least 3).
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long, value_enum, default_value_t = RefineArg::All)]
        refine: RefineArg,
    },
    /// Tabulate the standing-wave period integrals.
    StandingWave {
        /// Comma-separated amplitudes in [0, 0.3].
        #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.2")]
        eps: Vec<f64>,
        /// Free coefficients a13,a33,b13,b33.
        #[arg(long, value_delimiter = ',', default_value = "0,0,0,0", allow_negative_numbers = true)]
        coefficients: Vec<f64>,
    },
    /// Check the trace inequalities on seeded random ensembles.
    Inequalities {
        #[arg(long)]
        seed: Option<u64>,
        /// Samples per ensemble.
        #[arg(long)]
        count: Option<usize>,
    },
    /// Growth bounds for non-positive gravity.
    RtBounds {
        #[arg(long, conflicts_with = "g")]
        config: Option<PathBuf>,
        /// Gravity of the built-in growth scenario.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        g: f64,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// JSON configuration file.
    #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Overrides the configuration seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    /// Linear standing wave, h = 1.
    StandingFinite,
    /// Linear standing wave, infinite depth.
    StandingInfinite,
    /// Flat potential with g = 0, infinite depth.
    GrowthG0,
    /// Flat potential with g = -1 and the spectral filter.
    GrowthGNeg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RefineArg {
    All,
    Time,
    Space,
}

impl From<RefineArg> for Refinement {
    fn from(r: RefineArg) -> Self {
        match r {
            RefineArg::All => Refinement::All,
            RefineArg::Time => Refinement::Time,
            RefineArg::Space => Refinement::Space,
        }
    }
}

fn load_config(path: Option<&Path>, preset: Option<Preset>, seed: Option<u64>) -> Result<SimConfig, ScenarioError> {
    let mut config = match (path, preset) {
        (Some(p), _) => {
            let text = std::fs::read_to_string(p).map_err(|source| ScenarioError::Io { path: p.display().to_string(), source })?;
            SimConfig::from_json(&text)?
        }
        (None, Some(Preset::StandingFinite)) => SimConfig::linear_standing_benchmark(Depth::finite(1.0)),
        (None, Some(Preset::StandingInfinite)) => SimConfig::linear_standing_benchmark(Depth::infinite()),
        (None, Some(Preset::GrowthG0)) => SimConfig::rayleigh_taylor(0.0),
        (None, Some(Preset::GrowthGNeg)) => SimConfig::rayleigh_taylor(-1.0),
        (None, None) => return Err(ScenarioError::Config { key: "--config".into(), message: "a configuration is required".into() }),
    };
    if let Some(s) = seed {
        config.seed = s;
    }
    config.validate()?;
    Ok(config)
}

fn report(manifest: &RunManifest, written: &[PathBuf]) {
    for p in written {
        println!("wrote {}", p.display());
    }
    for s in &manifest.identities {
        println!("{:<28} rel {:<12.3e} abs {:.3e}", s.identity_id.key(), s.rel_residual, s.max_abs_residual);
    }
    for (k, v) in &manifest.measured {
        println!("{k:<28} {}", scenario::format_float(*v));
    }
    for f in &manifest.failures {
        eprintln!("FAILED {f}");
    }
}

fn execute(cli: &Cli) -> Result<RunManifest, ScenarioError> {
    let out = &cli.out;
    let (manifest, written) = match &cli.command {
        Command::Simulate(a) => {
            let config = load_config(a.config.as_deref(), a.preset, a.seed)?;
            let outcome = scenario::run(&config)?;
            let written = write_outputs(out, &outcome.manifest, Some(&outcome.csv()))?;
            (outcome.manifest, written)
        }
        Command::Converge { run, levels, refine } => {
            let config = load_config(run.config.as_deref(), run.preset, run.seed)?;
            let (manifest, outcomes) = scenario::convergence_study(&config, *levels, (*refine).into())?;
            let mut written = Vec::new();
            for (l, o) in outcomes.iter().enumerate() {
                let p = out.join(format!("timeseries_level{l}.csv"));
                write_atomic(&p, &o.csv())?;
                written.push(p);
            }
            written.extend(write_outputs(out, &manifest, None)?);
            if let Some(table) = &manifest.convergence {
                for row in &table.rows {
                    println!("{:<28} order {:.3}", row.identity_id.key(), row.fitted_order);
                }
            }
            (manifest, written)
        }
        Command::StandingWave { eps, coefficients } => {
            let c: [f64; 4] = coefficients.as_slice().try_into().map_err(|_| ScenarioError::Config {
                key: "--coefficients".into(),
                message: format!("expected 4 values a13,a33,b13,b33, got {}", coefficients.len()),
            })?;
            let manifest = scenario::report_standing_wave(eps, c, &Quadrature::default())?;
            if let Some(t) = &manifest.standing_wave {
                println!("{:>8} {:>22} {:>22} {:>22}", "eps", "kinetic", "potential", "closed form");
                for r in &t.rows {
                    println!("{:>8} {:>22} {:>22} {:>22}", r.epsilon, r.kinetic, r.potential, r.closed_form);
                }
            }
            let written = write_outputs(out, &manifest, None)?;
            (manifest, written)
        }
        Command::Inequalities { seed, count } => {
            let mut settings = InequalitySettings::default();
            if let Some(s) = seed {
                settings.spec.seed = *s;
            }
            if let Some(c) = count {
                settings.spec.count = *c;
            }
            let manifest = scenario::run_inequalities(&settings)?;
            for b in &manifest.bounds {
                println!("{:<28} violations {}/{}", b.bound_id.key(), b.violations, b.samples);
            }
            let written = write_outputs(out, &manifest, None)?;
            (manifest, written)
        }
        Command::RtBounds { config, g, seed } => {
            let config = match config {
                Some(p) => load_config(Some(p), None, *seed)?,
                None => {
                    let mut c = SimConfig::rayleigh_taylor(*g);
                    if let Some(s) = seed {
                        c.seed = *s;
                    }
                    c.validate()?;
                    c
                }
            };
            let outcome = scenario::run_rt_bounds(&config)?;
            let written = write_outputs(out, &outcome.manifest, Some(&outcome.csv()))?;
            (outcome.manifest, written)
        }
    };
    report(&manifest, &written);
    Ok(manifest)
}

fn help_footer() -> String {
    let mut s = String::from("Initial conditions (config key `initial_condition.kind`):\n");
    for (name, desc) in INITIAL_CONDITIONS {
        s.push_str(&format!("  {name:<24} {desc}\n"));
    }
    s
}

fn main() -> ExitCode {
    let matches = Cli::command().after_help(help_footer()).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match execute(&cli) {
        Ok(m) if m.passed() => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
