//! `nr-eirp`: emit the data behind each EIRP, nulling and BER study.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use nr_eirp::nulling::{HpbwLogic, NullingRequest};
use nr_eirp::statistics::Cut;

use nr_eirp_cli::output::{self, OutputSet, Provenance};
use nr_eirp_cli::{commands, config, AppError};

/// Default output directory when neither `--out` nor `[output] dir` is set.
const OUT_DIR_ENV: &str = "NR_EIRP_OUT_DIR";

#[derive(Parser)]
#[command(name = "nr-eirp", version, about = "EIRP patterns, codebook nulling and link BER for an NR panel")]
struct Cli {
    /// Scenario file (TOML).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Threshold,
    Hpbw,
}

#[derive(Clone, Copy, ValueEnum)]
enum LogicArg {
    AndExclude,
    OrExclude,
}

#[derive(Clone, Copy, ValueEnum)]
enum CutAxis {
    Azimuth,
    Elevation,
}

#[derive(Subcommand)]
enum Command {
    /// Codebook manifest, one codeword per line.
    Codebook,
    /// Pattern of one codeword or one SSB beam.
    Pattern {
        #[arg(long)]
        pm_index: Option<usize>,
        #[arg(long)]
        ssb: Option<usize>,
    },
    /// Linear-average EIRP over the codebook.
    AverageMap {
        /// Average the SSB-masked composites instead.
        #[arg(long)]
        ssb_pm: bool,
    },
    /// CDFs of EIRP at the protected direction.
    Cdf,
    /// Nulled codebook subset and its summary.
    Null {
        #[arg(long, allow_hyphen_values = true)]
        target_el: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        target_az: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        epsilon_db: Option<f64>,
        #[arg(long, value_enum)]
        algorithm: Option<AlgorithmArg>,
        #[arg(long, value_enum)]
        hpbw_logic: Option<LogicArg>,
    },
    /// Median EIRP along a principal cut.
    MedianCut {
        #[arg(long, value_enum, default_value = "azimuth")]
        axis: CutAxis,
        /// Fixed angle of the cut; defaults to the protected direction.
        #[arg(long, allow_hyphen_values = true)]
        at: Option<f64>,
    },
    /// Monte-Carlo bit error rate.
    Ber,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Codebook => "codebook",
            Self::Pattern { .. } => "pattern",
            Self::AverageMap { .. } => "average-map",
            Self::Cdf => "cdf",
            Self::Null { .. } => "null",
            Self::MedianCut { .. } => "median-cut",
            Self::Ber => "ber",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), AppError> {
    let (mut scenario, config_bytes) = match &cli.config {
        Some(path) => config::load(path)?,
        None => (config::RawConfig::default().validate().map_err(AppError::Config)?, Vec::new()),
    };

    if let Command::Null { target_el, target_az, epsilon_db, algorithm, hpbw_logic } = &cli.command {
        apply_null_flags(&mut scenario, *target_el, *target_az, *epsilon_db, *algorithm, *hpbw_logic)?;
    }

    let dir = cli
        .out
        .clone()
        .or_else(|| scenario.output_dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| AppError::Runtime(e.to_string()))?;

    let files = pool.install(|| match &cli.command {
        Command::Codebook => commands::codebook(&scenario),
        Command::Pattern { pm_index, ssb } => commands::pattern(&scenario, *pm_index, *ssb),
        Command::AverageMap { ssb_pm } => commands::average_map(&scenario, *ssb_pm),
        Command::Cdf => commands::cdf(&scenario),
        Command::Null { .. } => commands::null(&scenario),
        Command::MedianCut { axis, at } => {
            let cut = at.map(|a| match axis {
                CutAxis::Azimuth => Cut::Azimuth(a),
                CutAxis::Elevation => Cut::Elevation(a),
            });
            commands::median_cut_cmd(&scenario, cut)
        }
        Command::Ber => commands::ber(&scenario),
    })?;

    let mut out = OutputSet::new(&dir)?;
    let result = (|| {
        for (name, contents) in &files {
            out.write(name, contents)?;
        }
        let mut outputs = out.names();
        outputs.push("provenance.json".into());
        let prov = Provenance {
            tool: "nr-eirp",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: cli.command.name(),
            scenario: &scenario.name,
            config_sha256: output::sha256_hex(&config_bytes),
            seed: scenario.link.as_ref().map(|(l, _)| l.seed),
            outputs,
        };
        out.write("provenance.json", &(serde_json::to_string_pretty(&prov).expect("provenance serializes") + "\n"))?;
        Ok(())
    })();
    if result.is_err() {
        out.discard();
    }
    result
}

fn apply_null_flags(
    scenario: &mut config::Scenario,
    target_el: Option<f64>,
    target_az: Option<f64>,
    epsilon_db: Option<f64>,
    algorithm: Option<AlgorithmArg>,
    hpbw_logic: Option<LogicArg>,
) -> Result<(), AppError> {
    let any = target_el.is_some()
        || target_az.is_some()
        || epsilon_db.is_some()
        || algorithm.is_some()
        || hpbw_logic.is_some();
    if !any {
        return Ok(());
    }
    let base = scenario.nulling.first().copied().unwrap_or(NullingRequest::threshold(6.0, 5.0, -5.0));
    let mut r = base;
    r.theta_i = target_el.unwrap_or(r.theta_i);
    r.phi_i = target_az.unwrap_or(r.phi_i);
    if let Some(e) = epsilon_db {
        r.epsilon_db = e;
    }
    if let Some(a) = algorithm {
        r.algorithm = match a {
            AlgorithmArg::Threshold => nr_eirp::nulling::Algorithm::Threshold,
            AlgorithmArg::Hpbw => nr_eirp::nulling::Algorithm::Hpbw,
        };
    }
    if let Some(l) = hpbw_logic {
        r.hpbw_logic = match l {
            LogicArg::AndExclude => HpbwLogic::AndExclude,
            LogicArg::OrExclude => HpbwLogic::OrExclude,
        };
    }
    if r.algorithm == nr_eirp::nulling::Algorithm::Threshold && !r.epsilon_db.is_finite() {
        return Err(AppError::Config("threshold nulling needs --epsilon-db".into()));
    }
    if !scenario.grid.contains(r.theta_i, r.phi_i) {
        return Err(AppError::Config(format!("target ({}, {}) outside the grid", r.theta_i, r.phi_i)));
    }
    if scenario.nulling.is_empty() {
        scenario.nulling.push(r);
    } else {
        scenario.nulling[0] = r;
    }
    Ok(())
}
