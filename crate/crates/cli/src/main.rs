mod svg;

/// `println!` that ignores a closed stdout, e.g. when piped into `head`.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use cogradar::clutter::{generate, quadrant_power_spread, ClutterConfig, Structure};
use cogradar::montecarlo::{metrics_csv, run_campaign, MetricsReport, RunManifest};
use cogradar::{cfar_threshold, decentralized_threshold, load_clutter, load_scenario, validate_decay, Error, PolicyKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Cognitive MIMO radar-network simulator.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo campaign and write CSV metrics and a manifest.
    Run {
        scenario: PathBuf,
        /// One of optimal, orthogonal, adaptive, scanning, sarsa, or all.
        #[arg(long, default_value = "sarsa")]
        policy: String,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Worker threads; all cores when omitted.
        #[arg(long)]
        workers: Option<usize>,
        /// Also write SVG line plots.
        #[arg(long)]
        svg: bool,
    },
    /// Repeat a run from its manifest.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        svg: bool,
    },
    /// Print the detection threshold for a false-alarm probability.
    Threshold {
        #[arg(long)]
        pfa: f64,
        #[arg(long, default_value_t = 1)]
        radars: usize,
        #[arg(long, value_enum, default_value_t = Mode::Single)]
        mode: Mode,
    },
    /// Generate a clutter field and check stability, decay and stationarity.
    ValidateClutter {
        /// `default`, `white`, or a file holding a [clutter] section.
        #[arg(long, default_value = "default")]
        model: String,
        /// Field is size x size.
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Single,
    Centralized,
    Decentralized,
}

/// Failure with the process exit code it maps to.
struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_config_error() { 2 } else { 3 };
        Failure { code, msg: e.to_string() }
    }
}

fn config(msg: impl Into<String>) -> Failure {
    Failure { code: 2, msg: msg.into() }
}

fn runtime(msg: impl Into<String>) -> Failure {
    Failure { code: 3, msg: msg.into() }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { scenario, policy, trials, seed, out_dir, workers, svg } => {
            cmd_run(&scenario, &policy, trials, seed, &out_dir, workers, svg)
        }
        Command::Rerun { manifest, out_dir, workers, svg } => cmd_rerun(&manifest, &out_dir, workers, svg),
        Command::Threshold { pfa, radars, mode } => cmd_threshold(pfa, radars, mode),
        Command::ValidateClutter { model, size, seed } => cmd_validate_clutter(&model, size, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn parse_policies(spec: &str) -> Result<Vec<PolicyKind>, Failure> {
    if spec == "all" {
        return Ok(PolicyKind::ALL.to_vec());
    }
    spec.split(',').map(|p| p.trim().parse::<PolicyKind>().map_err(Failure::from)).collect()
}

fn cmd_run(
    path: &Path,
    policy: &str,
    trials: usize,
    seed: u64,
    out_dir: &Path,
    workers: Option<usize>,
    svg: bool,
) -> Result<(), Failure> {
    let text = fs::read_to_string(path).map_err(|e| config(format!("cannot read {}: {e}", path.display())))?;
    let policies = parse_policies(policy)?;
    execute(&text, policies, trials, seed, out_dir, workers, svg)
}

fn cmd_rerun(path: &Path, out_dir: &Path, workers: Option<usize>, svg: bool) -> Result<(), Failure> {
    let text = fs::read_to_string(path).map_err(|e| config(format!("cannot read {}: {e}", path.display())))?;
    let m = RunManifest::from_text(&text)?;
    execute(&m.scenario_text, m.policies, m.trials, m.seed, out_dir, workers, svg)
}

fn execute(
    scenario_text: &str,
    policies: Vec<PolicyKind>,
    trials: usize,
    seed: u64,
    out_dir: &Path,
    workers: Option<usize>,
    svg: bool,
) -> Result<(), Failure> {
    if trials == 0 {
        return Err(config("--trials must be at least 1"));
    }
    let scenario = load_scenario(scenario_text)?;
    let start = Instant::now();
    let mut reports: Vec<MetricsReport> = Vec::with_capacity(policies.len());
    for &p in &policies {
        log::info!("running {} trials of {}", trials, p.as_str());
        reports.push(run_campaign(&scenario, p, trials, seed, workers)?);
    }
    let wall = start.elapsed().as_secs_f64();

    fs::create_dir_all(out_dir).map_err(|e| runtime(format!("cannot create {}: {e}", out_dir.display())))?;
    let write = |name: &str, body: &str| -> Result<(), Failure> {
        let p = out_dir.join(name);
        fs::write(&p, body).map_err(|e| runtime(format!("cannot write {}: {e}", p.display())))
    };
    let files = metrics_csv(&reports);
    let mut outputs: Vec<String> = files.keys().cloned().collect();
    for (name, body) in &files {
        write(name, body)?;
        if svg && name != "pfa.csv" {
            let stem = name.trim_end_matches(".csv");
            let title = if let Some(b) = stem.strip_prefix("pd_bin") {
                format!("Detection probability, bin {b}")
            } else {
                format!("Probability of acquisition, bin {}", stem.trim_start_matches("pacq_bin"))
            };
            let svg_name = format!("{stem}.svg");
            write(&svg_name, &svg::line_plot(&title, &svg::parse_csv(body)))?;
            outputs.push(svg_name);
        }
    }
    outputs.push("manifest.txt".into());

    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        scenario_text: scenario.to_text(),
        policies: policies.clone(),
        trials,
        seed,
        workers,
        outputs,
        wall_seconds: wall,
        pfa_measured: reports.iter().map(|r| (r.policy, r.pfa_measured)).collect(),
    };
    write("manifest.txt", &manifest.to_text())?;
    for r in &reports {
        say!(
            "{:<10} pfa_measured={:.4e} ({} / {})",
            r.policy.as_str(),
            r.pfa_measured,
            r.false_alarms,
            r.opportunities
        );
    }
    say!("wrote {} files to {} in {:.1} s", manifest.outputs.len(), out_dir.display(), wall);
    Ok(())
}

fn cmd_threshold(pfa: f64, radars: usize, mode: Mode) -> Result<(), Failure> {
    let t = match mode {
        Mode::Single | Mode::Centralized => cfar_threshold(pfa)?,
        Mode::Decentralized => decentralized_threshold(pfa, radars)?,
    };
    say!("{t:.6}");
    Ok(())
}

fn cmd_validate_clutter(model: &str, size: usize, seed: u64) -> Result<(), Failure> {
    let cfg = match model {
        "default" => ClutterConfig::default(),
        "white" => ClutterConfig { structure: Structure::White, ..ClutterConfig::default() },
        path => {
            let text = fs::read_to_string(path).map_err(|e| config(format!("cannot read {path}: {e}")))?;
            load_clutter(&text)?
        }
    };
    let m = match cfg.model() {
        Ok(m) => m,
        Err(Error::Unstable(msg)) => return Err(runtime(format!("unstable: {msg}"))),
        Err(e) => return Err(e.into()),
    };
    if size < 32 {
        return Err(config("--size must be at least 32"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let field = generate(&m, size, size, cfg.burn_in.max(m.min_burn_in()), &mut rng)?;
    let decay = validate_decay(&field.vectorized)?;
    let spread = quadrant_power_spread(&field)?;
    let stationary = spread < 1.5;
    say!("model        {model} (p={}, q={})", m.p, m.q);
    say!("field        {size} x {size}, mean power {:.4}", field.sigma_c2);
    say!("gamma_fit    {:.4}", decay.gamma_fit);
    say!("decay        {}", if decay.passes { "pass" } else { "fail" });
    say!("stationarity {} (quadrant median spread {spread:.3})", if stationary { "pass" } else { "fail" });
    if decay.passes && stationary {
        say!("pass");
        Ok(())
    } else {
        Err(runtime("clutter validation failed"))
    }
}
