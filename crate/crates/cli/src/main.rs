use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use relay_duality::channel::{load_instance, save_instance};
use relay_duality::experiment::{csv_string, emit_csv, load_sweep_config, run_sweep, RowStatus};
use relay_duality::verify::{verify_duality, Feasibility, Tolerances};
use relay_duality::{
    generate_rayleigh, Case, Error, Execution, Order, RateTargets, StrategyConfig,
};

const OK: u8 = 0;
const INFEASIBLE: u8 = 1;
const CONFIG_ERROR: u8 = 2;
const CHECK_FAILED: u8 = 3;

/// Uplink-downlink duality experiments for relay networks with capacity-limited fronthaul.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Writes a seeded Rayleigh instance as JSON.
    Gen {
        #[arg(long = "M")]
        relays: usize,
        #[arg(long = "K")]
        users: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = relay_duality::channel::DEFAULT_NOISE_POWER)]
        sigma2: f64,
        /// Fronthaul capacity of every relay, bits per symbol.
        #[arg(long, default_value_t = relay_duality::channel::DEFAULT_CAP)]
        cap: f64,
    },
    /// Solves both links at one target and prints the duality report.
    Verify {
        instance: PathBuf,
        /// Comma-separated per-user rates, one rate for every user, or a JSON file holding either.
        targets: String,
        /// I, II, III or IV.
        case: String,
        /// Decoding order, 1-based and comma-separated.
        #[arg(long)]
        tau: Option<String>,
        /// Decompression order, 1-based and comma-separated.
        #[arg(long)]
        rho: Option<String>,
    },
    /// Runs a rate sweep and writes the CSV table.
    Sweep {
        config: PathBuf,
        /// Overrides the output path of the config; without either the table goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        sequential: bool,
    },
}

fn parse_list(text: &str) -> Result<Vec<f64>, Error> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidConfig(format!("bad rate `{s}`: {e}")))
        })
        .collect()
}

fn parse_targets(arg: &str, users: usize) -> Result<RateTargets, Error> {
    let rates = if Path::new(arg).is_file() {
        let text = std::fs::read_to_string(arg).map_err(|source| Error::Io {
            path: arg.into(),
            source,
        })?;
        match serde_json::from_str::<serde_json::Value>(&text) {
            Ok(serde_json::Value::Number(n)) => vec![n.as_f64().unwrap_or(f64::NAN)],
            Ok(v) => serde_json::from_value::<Vec<f64>>(v).map_err(|e| Error::Parse {
                line: None,
                field: None,
                message: e.to_string(),
            })?,
            Err(e) => {
                return Err(Error::Parse {
                    line: Some(e.line()),
                    field: None,
                    message: e.to_string(),
                })
            }
        }
    } else {
        parse_list(arg)?
    };
    match rates.len() {
        1 => RateTargets::symmetric(users, rates[0]),
        _ => RateTargets::new(rates),
    }
}

fn parse_order(text: &str) -> Result<Order, Error> {
    let labels = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| Error::InvalidConfig(format!("bad order entry `{s}`: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Order::from_one_based(&labels)
}

fn verify(
    instance: &Path,
    targets: &str,
    case: &str,
    tau: Option<&str>,
    rho: Option<&str>,
) -> Result<u8, Error> {
    let inst = load_instance(instance)?;
    let case: Case = case.parse()?;
    let targets = parse_targets(targets, inst.num_users())?;
    let natural = StrategyConfig::natural(case, &inst);
    let config = StrategyConfig::new(
        case,
        tau.map(parse_order)
            .transpose()?
            .unwrap_or(natural.decode_order),
        rho.map(parse_order)
            .transpose()?
            .unwrap_or(natural.decompress_order),
    );
    let report = verify_duality(&inst, &targets, &config, &Tolerances::default())?;
    println!("{}", report.to_json());
    Ok(match report.feasibility {
        Feasibility::BothInfeasible if report.pass => INFEASIBLE,
        Feasibility::BothFeasible if report.pass || report.near_boundary => OK,
        _ => CHECK_FAILED,
    })
}

fn sweep(config: &Path, out: Option<PathBuf>, sequential: bool) -> Result<u8, Error> {
    let config = load_sweep_config(config)?;
    let exec = if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let table = run_sweep(&config, exec)?;
    match out.or(config.output) {
        Some(path) => emit_csv(&table, path)?,
        None => print!("{}", csv_string(&table)),
    }
    let failed = table
        .rows
        .iter()
        .any(|r| matches!(r.status, RowStatus::Mismatch | RowStatus::CheckFailed));
    Ok(if failed {
        CHECK_FAILED
    } else if table.all_infeasible() {
        INFEASIBLE
    } else {
        OK
    })
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Gen {
            relays,
            users,
            seed,
            out,
            sigma2,
            cap,
        } => {
            if relays == 0 || users == 0 {
                return Err(Error::InvalidConfig("M and K must be positive".into()));
            }
            let inst = generate_rayleigh(relays, users, seed)
                .with_noise_power(sigma2)?
                .with_uniform_cap(cap)?;
            save_instance(&inst, out)?;
            Ok(OK)
        }
        Command::Verify {
            instance,
            targets,
            case,
            tau,
            rho,
        } => verify(&instance, &targets, &case, tau.as_deref(), rho.as_deref()),
        Command::Sweep {
            config,
            out,
            sequential,
        } => sweep(&config, out, sequential),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_infeasible() {
                INFEASIBLE
            } else {
                CONFIG_ERROR
            })
        }
    }
}
