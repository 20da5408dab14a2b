//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error (bad flags or configuration),
//! 2 domain error (inadmissible noise, invalid attack file, I/O failure),
//! 3 no key material (zero accepted all-measure rounds).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::attacks::{parse_attack_json, Adversary, NoiseParameters, StochasticChannel};
use crate::keyrate::{
    noise_threshold, semi_honest_key_rate, semi_honest_key_rate_from_stats, sweep,
    untrusted_key_rate, untrusted_key_rate_from_stats, Scenario, SweepResult,
};
use crate::metrics::performance_report;
use crate::protocol::{
    exact_statistics_semi_honest, exact_statistics_untrusted, run_simulation, write_trial_csv,
    ProtocolConfig, ProtocolError, SiftedStatistics, Variant,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DOMAIN: i32 = 2;
pub const EXIT_NO_KEY: i32 = 3;

#[derive(Parser)]
#[command(
    name = "msqkd",
    about = "Circular mediated semi-quantum key distribution: simulation, attacks, key-rate bounds",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo protocol run under a stochastic noise channel.
    Simulate(SimulateArgs),
    /// Evaluate a key-rate lower bound from noise or measured statistics.
    Keyrate(KeyrateArgs),
    /// Solve for the noise threshold where the rate bound hits zero.
    Threshold(ThresholdArgs),
    /// Evaluate the rate bound on a grid and write a CSV curve.
    Sweep(SweepArgs),
    /// Exact statistics (and optionally the rate bound) for a unitary attack.
    Exact(ExactArgs),
    /// Qubit efficiency, communication cost, and the comparison table.
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Number of classical users (L >= 2).
    #[arg(long, default_value_t = 2)]
    parties: usize,
    /// Total protocol rounds.
    #[arg(long)]
    rounds: u64,
    /// Noise triple "Q,QM,QR", or a single value meaning Q = QM = QR.
    #[arg(long)]
    noise: String,
    /// Master seed; identical seeds reproduce runs byte for byte.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = VariantArg::Mediated)]
    variant: VariantArg,
    /// Fraction of all-measure rounds sacrificed for estimation.
    #[arg(long, default_value_t = 0.1)]
    test_fraction: f64,
    /// Trial-log CSV destination; statistics JSON goes to stdout.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum VariantArg {
    Mediated,
    Sqkd,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum ScenarioArg {
    #[value(name = "semi-honest")]
    SemiHonest,
    Untrusted,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::SemiHonest => Scenario::SemiHonest,
            ScenarioArg::Untrusted => Scenario::Untrusted,
        }
    }
}

#[derive(Args)]
struct KeyrateArgs {
    #[arg(long, value_enum)]
    scenario: ScenarioArg,
    /// Noise triple "Q,QM,QR" or single value.
    #[arg(long, conflicts_with = "stats")]
    noise: Option<String>,
    /// Statistics JSON produced by `simulate` or `exact`.
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Emit the full intermediate quantities as JSON instead of one number.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ThresholdArgs {
    #[arg(long, value_enum)]
    scenario: ScenarioArg,
    /// Bisection bracket tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    scenario: ScenarioArg,
    #[arg(long)]
    from: f64,
    #[arg(long)]
    to: f64,
    #[arg(long)]
    steps: usize,
    /// CSV destination.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExactArgs {
    /// Attack-specification JSON file.
    #[arg(long)]
    attack: PathBuf,
    /// Also evaluate the matching key-rate bound from the exact tables.
    #[arg(long)]
    keyrate: bool,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long, default_value_t = 2)]
    parties: u32,
    /// Emit the comparison table as CSV instead of aligned text.
    #[arg(long)]
    csv: bool,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: msg.into(),
        }
    }
    fn domain(msg: impl Into<String>) -> Self {
        Self {
            code: EXIT_DOMAIN,
            message: msg.into(),
        }
    }
}

impl From<ProtocolError> for Failure {
    fn from(e: ProtocolError) -> Self {
        let code = match e {
            ProtocolError::BadConfig(_) => EXIT_USAGE,
            ProtocolError::NoKey => EXIT_NO_KEY,
            _ => EXIT_DOMAIN,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<crate::keyrate::KeyrateError> for Failure {
    fn from(e: crate::keyrate::KeyrateError) -> Self {
        Failure::domain(e.to_string())
    }
}

impl From<crate::attacks::AttackError> for Failure {
    fn from(e: crate::attacks::AttackError) -> Self {
        Failure::domain(e.to_string())
    }
}

impl From<crate::metrics::MetricsError> for Failure {
    fn from(e: crate::metrics::MetricsError) -> Self {
        Failure::usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::domain(format!("io: {e}"))
    }
}

fn parse_noise(text: &str) -> Result<NoiseParameters, Failure> {
    let parts: Vec<&str> = text.split(',').collect();
    let nums: Result<Vec<f64>, _> = parts.iter().map(|p| p.trim().parse::<f64>()).collect();
    let nums = nums.map_err(|_| Failure::usage(format!("cannot parse noise triple '{text}'")))?;
    match nums.as_slice() {
        [q] => Ok(NoiseParameters::new(*q, *q, *q)?),
        [q, qm, qr] => Ok(NoiseParameters::new(*q, *qm, *qr)?),
        _ => Err(Failure::usage(format!(
            "--noise takes one value or three comma-joined values, got '{text}'"
        ))),
    }
}

fn load_stats(path: &Path) -> Result<SiftedStatistics, Failure> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::domain(format!("cannot parse statistics file: {e}")))
}

/// Sweep CSV: header plus one row per grid point, six decimal places,
/// trailing newline; byte-identical for identical inputs.
pub fn write_sweep_csv<W: Write>(result: &SweepResult, mut w: W) -> std::io::Result<()> {
    writeln!(w, "q,rate,scenario")?;
    for point in &result.points {
        writeln!(
            w,
            "{:.6},{:.6},{}",
            point.q,
            point.rate,
            result.scenario.label()
        )?;
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let noise = parse_noise(&args.noise)?;
    let channel = StochasticChannel::even_split(noise);
    let config = ProtocolConfig {
        parties: args.parties,
        rounds: args.rounds,
        variant: match args.variant {
            VariantArg::Mediated => Variant::Mediated,
            VariantArg::Sqkd => Variant::Sqkd,
        },
        seed: args.seed,
        test_fraction: args.test_fraction,
    };
    config.validate()?;
    let output = run_simulation(&config, &channel)?;
    for warning in &output.warnings {
        eprintln!("warning: {warning}");
    }
    let file = fs::File::create(&args.out)?;
    write_trial_csv(&output.trials, std::io::BufWriter::new(file))?;
    let key_len = output.keys.first().map(|k| k.len()).unwrap_or(0);
    let agree = output.keys.windows(2).all(|w| w[0] == w[1]);
    eprintln!(
        "raw key: {key_len} bits per party ({} parties agree: {agree}){}",
        config.parties,
        output
            .tp_key
            .as_ref()
            .map(|k| format!("; tp key: {} bits", k.len()))
            .unwrap_or_default()
    );
    println!(
        "{}",
        serde_json::to_string_pretty(&output.stats).expect("stats serialize")
    );
    Ok(())
}

fn cmd_keyrate(args: &KeyrateArgs) -> Result<(), Failure> {
    let scenario: Scenario = args.scenario.into();
    enum Outcome {
        Sh(crate::keyrate::SemiHonestIntermediates),
        Un(crate::keyrate::UntrustedIntermediates),
    }
    let outcome = match (&args.noise, &args.stats) {
        (Some(noise), None) => {
            let noise = parse_noise(noise)?;
            match scenario {
                Scenario::SemiHonest => Outcome::Sh(semi_honest_key_rate(&noise)?),
                Scenario::Untrusted => Outcome::Un(untrusted_key_rate(&noise)?),
            }
        }
        (None, Some(path)) => {
            let stats = load_stats(path)?;
            match scenario {
                Scenario::SemiHonest => Outcome::Sh(semi_honest_key_rate_from_stats(&stats)?),
                Scenario::Untrusted => Outcome::Un(untrusted_key_rate_from_stats(&stats)?),
            }
        }
        _ => {
            return Err(Failure::usage(
                "exactly one of --noise or --stats is required",
            ))
        }
    };
    match outcome {
        Outcome::Sh(i) => {
            if args.json {
                println!("{}", serde_json::to_string_pretty(&i).expect("serialize"));
            } else {
                println!("{:.6}", i.rate);
            }
        }
        Outcome::Un(i) => {
            if args.json {
                println!("{}", serde_json::to_string_pretty(&i).expect("serialize"));
            } else {
                println!("{:.6}", i.rate);
            }
        }
    }
    Ok(())
}

fn cmd_threshold(args: &ThresholdArgs) -> Result<(), Failure> {
    let result = noise_threshold(args.scenario.into(), args.tol)?;
    println!("{:.6}", result.threshold_q);
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), Failure> {
    let result = sweep(args.scenario.into(), args.from, args.to, args.steps)?;
    for warning in &result.warnings {
        eprintln!("warning: {warning}");
    }
    let file = fs::File::create(&args.out)?;
    write_sweep_csv(&result, std::io::BufWriter::new(file))?;
    Ok(())
}

fn cmd_exact(args: &ExactArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&args.attack)?;
    let adversary = parse_attack_json(&text)?;
    let (stats, scenario) = match &adversary {
        Adversary::Collective(attack) => {
            (exact_statistics_semi_honest(attack)?, Scenario::SemiHonest)
        }
        Adversary::Untrusted(attack) => (exact_statistics_untrusted(attack)?, Scenario::Untrusted),
        Adversary::Stochastic(_) => {
            return Err(Failure::domain(
                "exact evolution needs a unitary attack; stochastic channels are for `simulate`",
            ))
        }
    };
    if args.keyrate {
        let bound = match scenario {
            Scenario::SemiHonest => {
                serde_json::to_value(semi_honest_key_rate_from_stats(&stats)?).expect("serialize")
            }
            Scenario::Untrusted => {
                serde_json::to_value(untrusted_key_rate_from_stats(&stats)?).expect("serialize")
            }
        };
        let combined = serde_json::json!({ "statistics": stats, "keyrate": bound });
        println!(
            "{}",
            serde_json::to_string_pretty(&combined).expect("serialize")
        );
    } else {
        println!(
            "{}",
            serde_json::to_string_pretty(&stats).expect("serialize")
        );
    }
    Ok(())
}

fn cmd_metrics(args: &MetricsArgs) -> Result<(), Failure> {
    let report = performance_report(args.parties)?;
    if args.csv {
        println!(
            "protocol,noise_tolerance_pct,qubit_efficiency,communication_cost_qubits,scalable"
        );
        for row in &report.reference_rows {
            println!(
                "{},{},{}/{},{},{}",
                row.label,
                row.noise_tolerance_pct
                    .map(|v| format!("{v}"))
                    .unwrap_or_default(),
                row.qubit_efficiency.numer(),
                row.qubit_efficiency.denom(),
                row.communication_cost_qubits,
                row.scalable
            );
        }
    } else {
        println!(
            "L = {}: qubit efficiency 1/{}, communication cost {} qubits per raw-key bit",
            report.parties,
            report.qubit_efficiency.denom(),
            report.communication_cost_qubits
        );
        println!();
        println!(
            "{:<14} {:>16} {:>12} {:>8} {:>9}",
            "protocol", "tolerance (%)", "efficiency", "cost", "scalable"
        );
        for row in &report.reference_rows {
            println!(
                "{:<14} {:>16} {:>12} {:>8} {:>9}",
                row.label,
                row.noise_tolerance_pct
                    .map(|v| format!("{v:.2}"))
                    .unwrap_or_else(|| "-".into()),
                format!(
                    "{}/{}",
                    row.qubit_efficiency.numer(),
                    row.qubit_efficiency.denom()
                ),
                row.communication_cost_qubits,
                if row.scalable { "yes" } else { "no" }
            );
        }
    }
    Ok(())
}

/// Parses arguments and dispatches; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    EXIT_OK
                }
                _ => {
                    let _ = e.print();
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Keyrate(a) => cmd_keyrate(a),
        Command::Threshold(a) => cmd_threshold(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Exact(a) => cmd_exact(a),
        Command::Metrics(a) => cmd_metrics(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
