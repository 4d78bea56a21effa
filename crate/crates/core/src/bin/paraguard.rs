use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use paraguard::ratfunc::ParamId;
use paraguard::rational::parse_rational;
use paraguard::shell::commands::{self, CheckInput, Outcome, SimulateOptions};
use paraguard::shell::{exit, load_model, RunConfig, ShellError};
use paraguard::simulator::MislabelFault;

#[derive(Parser)]
#[command(name = "paraguard", version, about = "Parametric model checking and runtime assurance")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Model file (TOML).
    #[arg(long)]
    model: PathBuf,
    /// Run configuration (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Closed forms and bounds of the model's queries.
    Check {
        #[command(flatten)]
        common: Common,
        /// Evaluate at a point valuation (TOML `param = "value"`).
        #[arg(long, conflicts_with_all = ["box_file", "truth"])]
        valuation: Option<PathBuf>,
        /// Evaluate at the model's [truth] block.
        #[arg(long, conflicts_with = "box_file")]
        truth: bool,
        /// Bound over a parameter box (TOML `param = ["lo", "hi"]`); the declared ranges by default.
        #[arg(long = "box")]
        box_file: Option<PathBuf>,
        /// Print exact fractions instead of decimals.
        #[arg(long)]
        exact: bool,
    },
    /// Simulate a mission campaign into a JSON-lines trace.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the configured number of missions.
        #[arg(long)]
        missions: Option<u64>,
        /// Write one long mission at the configured policy weight instead.
        #[arg(long)]
        showcase: bool,
        /// Change a ground-truth value, e.g. `--set b1=0.3`.
        #[arg(long = "set", value_name = "PARAM=VALUE")]
        overrides: Vec<String>,
        /// Mislabel the first visit to ACTUAL as BELIEVED for DURATION steps (showcase only).
        #[arg(long, value_name = "ACTUAL:BELIEVED:DURATION", requires = "showcase")]
        mislabel: Option<String>,
    },
    /// Learn posteriors from a trace and bound the pre-mission queries.
    Premission {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trace: PathBuf,
        /// Output directory for cache.json and premission.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay a mission trace through the runtime monitor.
    Monitor {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        cache: PathBuf,
        #[arg(long)]
        premission: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        /// Mission to replay; the last one in the trace by default.
        #[arg(long)]
        mission: Option<u64>,
        /// Output directory for verdicts.jsonl, conflicts.jsonl and series.csv.
        #[arg(long)]
        out: PathBuf,
    },
}

fn config(common: &Common) -> Result<RunConfig, ShellError> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn bad_arg(msg: String) -> ShellError {
    ShellError::Parse { line: None, message: msg }
}

fn run(cli: Cli) -> Result<Outcome, ShellError> {
    match cli.command {
        Command::Check {
            common,
            valuation,
            truth,
            box_file,
            exact,
        } => {
            let model = load_model(&common.model)?;
            let input = if let Some(p) = valuation {
                CheckInput::from_valuation_file(&p)?
            } else if truth {
                let t = model
                    .truth
                    .as_ref()
                    .ok_or_else(|| ShellError::Validation("the model has no [truth] block".into()))?;
                CheckInput::Valuation(t.values.clone())
            } else if let Some(p) = box_file {
                CheckInput::from_box_file(&p)?
            } else {
                CheckInput::Declared
            };
            commands::cmd_check(&model, &input, exact)
        }
        Command::Simulate {
            common,
            out,
            missions,
            showcase,
            overrides,
            mislabel,
        } => {
            let model = load_model(&common.model)?;
            let mut cfg = config(&common)?;
            if let Some(n) = missions {
                cfg.n_missions = n;
            }
            let mut opts = SimulateOptions {
                showcase,
                ..Default::default()
            };
            for o in overrides {
                let (p, v) = o
                    .split_once('=')
                    .ok_or_else(|| bad_arg(format!("--set `{o}`: expected PARAM=VALUE")))?;
                let v = parse_rational(v).map_err(|e| bad_arg(format!("--set `{o}`: {e}")))?;
                opts.overrides.push((ParamId::new(p.trim()), v));
            }
            if let Some(spec) = mislabel {
                let parts: Vec<&str> = spec.split(':').collect();
                let [actual, believed, duration] = parts[..] else {
                    return Err(bad_arg(format!("--mislabel `{spec}`: expected ACTUAL:BELIEVED:DURATION")));
                };
                let state = |n: &str| model.state_named(n).ok_or_else(|| bad_arg(format!("--mislabel: unknown state `{n}`")));
                opts.mislabel = Some(MislabelFault {
                    actual: state(actual)?,
                    believed: state(believed)?,
                    duration: duration
                        .parse()
                        .map_err(|_| bad_arg(format!("--mislabel: `{duration}` is not a step count")))?,
                });
            }
            commands::cmd_simulate(&model, &cfg, &opts, &out)
        }
        Command::Premission { common, trace, out } => {
            let model = load_model(&common.model)?;
            commands::cmd_premission(&model, &trace, &config(&common)?, &out)
        }
        Command::Monitor {
            common,
            cache,
            premission,
            trace,
            mission,
            out,
        } => {
            let model = load_model(&common.model)?;
            commands::cmd_monitor(&model, &cache, &premission, &trace, mission, &config(&common)?, &out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(outcome) => {
            print!("{}", outcome.stdout);
            if outcome.code != exit::OK {
                eprintln!("threshold violated");
            }
            ExitCode::from(outcome.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
