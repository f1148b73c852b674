//! `hgc` command-line entry point.
//!
//! Exit status: 0 on success, 1 when the input (config, scheme file, flags)
//! is invalid or a verification fails, 2 on internal or I/O errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use hgc::coding::{allocate, verify_decodability, CodingScheme, VerifyMode};
use hgc::config::{Config, PRESETS};
use hgc::schemes::Scheme;
use hgc::tradeoff::{
    bounds_coincide, check_feasibility, conventional_min_load, conventional_straggler_count, hgc_min_load,
};
use hgc::traindemo::{run_centralized, run_training};
use hgc::{jncss, sim};

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Internal(_) => 2,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Invalid(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "hgc", version, about = "Hierarchical gradient coding: codes, runtime simulation and node selection")]
struct Cli {
    /// Configuration document (JSON).
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration: example-1, paper-sec6 or paper-sec6-cifar.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for result files.
    #[arg(long, global = true, env = "HGC_OUT_DIR", default_value = "hgc-out")]
    out: PathBuf,
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
    /// Overrides the Monte-Carlo trial count.
    #[arg(long, global = true)]
    trials: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load bounds and feasibility for the configured tolerance.
    Plan,
    /// Construct the two-layer code and write it as JSON.
    BuildScheme,
    /// Check decodability under every (or a sample of) straggler pattern.
    Verify {
        /// Verify this scheme file instead of building one from the config.
        #[arg(long)]
        scheme: Option<PathBuf>,
        /// Check this many random patterns instead of all of them.
        #[arg(long)]
        sampled: Option<usize>,
    },
    /// Monte-Carlo comparison of all configured schemes over the K sweep.
    Simulate,
    /// Joint node and coding scheme selection plus the runtime gap bound.
    Optimize,
    /// Coded gradient descent on synthetic regression data.
    DemoTrain,
    /// Order-statistic gap bound on the moments in the config `bounds` section.
    Bounds,
}

/// Result files, written only once everything has succeeded.
struct Artifacts {
    files: Vec<(String, String)>,
}

impl Artifacts {
    fn new() -> Self {
        Self { files: Vec::new() }
    }

    fn add(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
        self.add(name, text + "\n");
        Ok(())
    }

    /// Each file goes to a temporary name first and is renamed into place.
    fn write(self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        let io = |what: &str, p: &Path, e: std::io::Error| CliError::Internal(format!("{what} {}: {e}", p.display()));
        std::fs::create_dir_all(dir).map_err(|e| io("cannot create", dir, e))?;
        let mut written = Vec::new();
        for (name, contents) in self.files {
            let path = dir.join(&name);
            let tmp = dir.join(format!(".{name}.tmp"));
            std::fs::write(&tmp, contents).map_err(|e| io("cannot write", &tmp, e))?;
            std::fs::rename(&tmp, &path).map_err(|e| io("cannot move into place", &path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}

fn load_config(cli: &Cli) -> Result<Config, CliError> {
    let mut config = match (&cli.config, &cli.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
            let de = &mut serde_json::Deserializer::from_str(&text);
            serde_path_to_error::deserialize(de).map_err(|e| {
                let at = e.path().to_string();
                invalid(format!("{}: at `{at}`: {}", path.display(), e.inner()))
            })?
        }
        (None, Some(name)) => Config::preset(name)
            .ok_or_else(|| invalid(format!("unknown preset `{name}` (available: {})", PRESETS.join(", "))))?,
        (None, None) => return Err(invalid("either --config PATH or --preset NAME is required")),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(trials) = cli.trials {
        config.experiment.trials = trials;
    }
    let origin = cli.config.as_ref().map_or_else(|| "preset".to_string(), |p| p.display().to_string());
    config.validate().map_err(|e| invalid(format!("{origin}: at `{}`: {}", e.path, e.message)))?;
    Ok(config)
}

fn json_only(cli: &Cli, what: &str) -> Result<(), CliError> {
    if cli.format == Format::Csv {
        return Err(invalid(format!("{what} only produces JSON output")));
    }
    Ok(())
}

#[derive(Serialize)]
struct PlanReport {
    workers_per_edge: Vec<usize>,
    k: usize,
    tolerance: hgc::Tolerance,
    hgc_load: String,
    hgc_load_value: f64,
    hgc_load_d: Option<u64>,
    conventional_stragglers: usize,
    conventional_load: String,
    conventional_load_value: f64,
    bounds_coincide: bool,
    feasibility: hgc::tradeoff::Feasibility,
}

fn plan(cli: &Cli, out: &mut Artifacts) -> Result<(), CliError> {
    json_only(cli, "plan")?;
    let c = load_config(cli)?;
    let (t, tol) = (&c.topology, c.tolerance);
    let h = hgc_min_load(t, tol).map_err(invalid)?;
    let conv = conventional_min_load(t, tol).map_err(invalid)?;
    let feas = check_feasibility(t, tol);
    // present both bounds over K so they read as D/K
    let scale = |num: u64, den: u64| -> String {
        let k = c.k as u64;
        if (num * k).is_multiple_of(den) {
            format!("{}/{}", num * k / den, k)
        } else {
            format!("{num}/{den}")
        }
    };
    let report = PlanReport {
        workers_per_edge: t.workers_per_edge().to_vec(),
        k: c.k,
        tolerance: tol,
        hgc_load: scale(h.numerator, h.denominator),
        hgc_load_value: h.as_f64(),
        hgc_load_d: h.load_for(c.k as u64),
        conventional_stragglers: conventional_straggler_count(t, tol),
        conventional_load: scale(conv.numerator, conv.denominator),
        conventional_load_value: conv.as_f64(),
        bounds_coincide: bounds_coincide(t, tol),
        feasibility: feas,
    };
    println!("hierarchical D/K = {} ({:.4})", report.hgc_load, report.hgc_load_value);
    println!("conventional D/K = {} ({:.4})", report.conventional_load, report.conventional_load_value);
    println!("feasibility: {}", report.feasibility.diagnostic);
    out.json("plan.json", &report)
}

fn hgc_code(c: &Config) -> Result<CodingScheme, CliError> {
    let plan = allocate(&c.topology, c.tolerance, c.k).map_err(invalid)?;
    CodingScheme::build(plan, c.seed).map_err(|e| CliError::Internal(e.to_string()))
}

fn build_scheme(cli: &Cli, out: &mut Artifacts) -> Result<(), CliError> {
    json_only(cli, "build-scheme")?;
    let c = load_config(cli)?;
    let code = hgc_code(&c)?;
    println!(
        "built code for {} edges, K = {}, {}: edge load n_i = {:?}, worker load D = {}",
        c.topology.edges(),
        c.k,
        c.tolerance,
        code.plan.edge_loads,
        code.plan.load
    );
    out.add("scheme.json", code.to_json() + "\n");
    Ok(())
}

fn verify(cli: &Cli, scheme: &Option<PathBuf>, sampled: Option<usize>, out: &mut Artifacts) -> Result<(), CliError> {
    json_only(cli, "verify")?;
    let (code, seed) = match scheme {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| invalid(format!("cannot read scheme {}: {e}", path.display())))?;
            let code = CodingScheme::from_json(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
            (code, cli.seed.unwrap_or(0))
        }
        None => {
            let c = load_config(cli)?;
            (hgc_code(&c)?, c.seed)
        }
    };
    let mode = match sampled {
        Some(count) => VerifyMode::Sampled { count, seed },
        None => VerifyMode::Exhaustive,
    };
    let report = verify_decodability(&code, mode);
    println!("{}", report.summary());
    out.json("verify.json", &report)?;
    if !report.all_passed() {
        return Err(invalid(format!("verification failed: {}", report.summary())));
    }
    Ok(())
}

fn simulate(cli: &Cli, out: &mut Artifacts) -> Result<(), CliError> {
    let c = load_config(cli)?;
    let exp = sim::run(&c).map_err(invalid)?;
    let tables = sim::compare_table(&exp.report);
    for row in &exp.report.schemes {
        let cells: Vec<String> = row
            .results
            .iter()
            .map(|r| match &r.stats {
                Some(s) => format!("K={}: {:.1}±{:.1} ms", r.k, s.mean, s.std_error),
                None => format!("K={}: error", r.k),
            })
            .collect();
        println!("{:<12} {}", row.scheme, cells.join("  "));
    }
    out.json("report.json", &exp.report)?;
    match cli.format {
        Format::Json => {
            out.json("comparison.json", &tables)?;
            out.add("samples.jsonl", exp.samples_jsonl());
        }
        Format::Csv => {
            let mut csv = String::new();
            for (i, t) in tables.iter().enumerate() {
                let body = t.to_csv();
                csv.push_str(if i == 0 { &body } else { body.split_once('\n').map_or("", |x| x.1) });
            }
            out.add("comparison.csv", csv);
            out.add("samples.csv", exp.samples_csv());
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct OptimizeReport {
    k: usize,
    jncss: jncss::JncssReport,
    gap_inputs: jncss::GapBoundInputs,
    bound: jncss::GapBound,
    /// Monte-Carlo `E[T]` minus the optimized objective.
    observed_gap: f64,
}

fn optimize(cli: &Cli, out: &mut Artifacts) -> Result<(), CliError> {
    json_only(cli, "optimize")?;
    let c = load_config(cli)?;
    let profiles = c.validate().map_err(invalid)?;
    let report = jncss::solve(&c.topology, &profiles, c.k).map_err(invalid)?;
    let sel = &report.selection;
    let inputs =
        jncss::estimate_gap_inputs(&c.topology, &profiles, sel.tolerance, sel.load, c.experiment.trials, c.seed)
            .map_err(invalid)?;
    let bound = jncss::theorem3_bound(sel, &inputs).map_err(|e| CliError::Internal(e.to_string()))?;
    let observed_gap = inputs.runtime_mean - sel.objective;
    println!("selected tolerance {} with D = {}, objective {:.3} ms", sel.tolerance, sel.load, sel.objective);
    println!(
        "simulated E[T] = {:.3} ± {:.3} ms, |gap| = {:.3} ms, bound = {:.3} ms",
        inputs.runtime_mean,
        inputs.runtime_std_error,
        observed_gap.abs(),
        bound.bound
    );
    out.json(
        "optimize.json",
        &OptimizeReport { k: c.k, jncss: report.clone(), gap_inputs: inputs, bound, observed_gap },
    )
}

#[derive(Serialize)]
struct TrainReport {
    scheme: hgc::schemes::SchemeSpec,
    policy: hgc::traindemo::StragglerPolicy,
    max_residual: f64,
    max_gap_to_centralized: f64,
    final_loss: f64,
    trajectory: hgc::traindemo::Trajectory,
}

fn demo_train(cli: &Cli, out: &mut Artifacts) -> Result<(), CliError> {
    let c = load_config(cli)?;
    let profiles = c.validate().map_err(invalid)?;
    let spec = c.training_scheme();
    let scheme = Scheme::build(&spec, &c.topology, &profiles, c.k, c.seed).map_err(invalid)?;
    let task = c.training_task();
    let central = run_centralized(&task).map_err(invalid)?;
    let tr = run_training(&task, &scheme, &c.training.policy).map_err(invalid)?;
    let report = TrainReport {
        scheme: spec,
        policy: c.training.policy.clone(),
        max_residual: tr.max_residual(),
        max_gap_to_centralized: tr.max_relative_gap(&central),
        final_loss: tr.records.last().map_or(f64::NAN, |r| r.loss),
        trajectory: tr,
    };
    println!(
        "{} over {} iterations: max recovery residual {:.3e}, max parameter gap to centralized {:.3e}",
        report.scheme.kind, task.iterations, report.max_residual, report.max_gap_to_centralized
    );
    match cli.format {
        Format::Json => out.json("trajectory.json", &report)?,
        Format::Csv => out.add("trajectory.csv", report.trajectory.to_csv()),
    }
    Ok(())
}

fn bounds(cli: &Cli, out: &mut Artifacts) -> Result<(), CliError> {
    json_only(cli, "bounds")?;
    let c = load_config(cli)?;
    let section = c.bounds.as_ref().ok_or_else(|| invalid("the config has no `bounds` section"))?;
    let b = section.evaluate(c.tolerance).map_err(|e| invalid(format!("at `bounds`: {e}")))?;
    println!("edge term {:.4}, worker term {:.4}, bound {:.4} ms", b.edge_term, b.worker_term, b.bound);
    out.json("bounds.json", &b)
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Artifacts::new();
    match &cli.command {
        Command::Plan => plan(cli, &mut out)?,
        Command::BuildScheme => build_scheme(cli, &mut out)?,
        Command::Verify { scheme, sampled } => {
            // a failed verification still leaves its report behind
            if let Err(e) = verify(cli, scheme, *sampled, &mut out) {
                if !out.files.is_empty() {
                    out.write(&cli.out)?;
                }
                return Err(e);
            }
        }
        Command::Simulate => simulate(cli, &mut out)?,
        Command::Optimize => optimize(cli, &mut out)?,
        Command::DemoTrain => demo_train(cli, &mut out)?,
        Command::Bounds => bounds(cli, &mut out)?,
    }
    out.write(&cli.out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                eprintln!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
