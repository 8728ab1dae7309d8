//! Command-line harness: single seeded runs, multi-run benchmark
//! campaigns, and suite verification.
//!
//! Exit codes: 0 success (or full coverage), 1 verification shortfall,
//! 2 usage or parse error, 3 internal coverage-oracle failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::fis::FisConfig;
use crate::model::{parse_model, parse_sub, render_config, validate_config, SutModel, VscaConfig};
use crate::pso::{generate_suite, RunResult, SwarmParams, Variant};
use crate::verify::{read_suite, stats_from_sizes, verify_suite, write_suite, CoverageReport, SuiteStats};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SHORTFALL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "vscit", version, about = "Variable-strength combinatorial test suite generator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate one suite with a single seeded run.
    Generate(GenerateArgs),
    /// Run repeated seeded generations and summarize suite sizes.
    Benchmark(BenchmarkArgs),
    /// Check a suite file for full coverage.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct SwarmArgs {
    /// Particles per swarm.
    #[arg(long, default_value_t = 80)]
    pub swarm_size: usize,
    /// Iterations per generated test.
    #[arg(long, default_value_t = 100)]
    pub iterations: usize,
    /// Cognitive learning factor.
    #[arg(long, default_value_t = 2.0)]
    pub c1: f64,
    /// Social learning factor.
    #[arg(long, default_value_t = 2.0)]
    pub c2: f64,
    /// TOML file overriding membership functions and the weight range.
    #[arg(long)]
    pub mf_config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Model in exponent notation, e.g. "3^15" or "4^3 5^3 6^2".
    #[arg(long)]
    pub model: String,
    /// Main interaction strength.
    #[arg(long)]
    pub t: usize,
    /// Sub-configuration "<i,j,...>:<strength>"; repeatable.
    #[arg(long = "sub")]
    pub subs: Vec<String>,
    #[arg(long, default_value = "fpso")]
    pub variant: Variant,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Suite file to write; the iteration log goes next to it with a
    /// `.log` suffix. Without it the suite is printed to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub swarm: SwarmArgs,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Built-in preset (table1, table2, table3) or a preset file path.
    #[arg(long, conflicts_with_all = ["model", "t", "subs"])]
    pub preset: Option<String>,
    #[arg(long, requires = "t")]
    pub model: Option<String>,
    #[arg(long, requires = "model")]
    pub t: Option<usize>,
    #[arg(long = "sub")]
    pub subs: Vec<String>,
    /// Variant to run; repeat to compare several.
    #[arg(long = "variant")]
    pub variants: Vec<Variant>,
    #[arg(long, default_value_t = 30)]
    pub runs: usize,
    /// Run r uses seed `seed + r`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV output path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Only run preset entries whose label matches exactly; repeatable.
    #[arg(long = "only")]
    pub only: Vec<String>,
    #[command(flatten)]
    pub swarm: SwarmArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub suite: PathBuf,
    /// Print the report as CSV instead of text.
    #[arg(long)]
    pub csv: bool,
}

/// One model/config pair to benchmark.
#[derive(Debug, Clone)]
pub struct BenchTarget {
    pub label: String,
    pub model: SutModel,
    pub config: VscaConfig,
    pub published: Option<(usize, f64)>,
}

/// Everything a run or campaign needs, resolved from flags and files.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub targets: Vec<BenchTarget>,
    pub variants: Vec<Variant>,
    pub params: SwarmParams,
    pub runs: usize,
    pub base_seed: u64,
}

impl RunConfig {
    pub fn seed_for(&self, run: usize) -> u64 {
        self.base_seed.wrapping_add(run as u64)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PresetFile {
    name: Option<String>,
    model: String,
    entry: Vec<PresetEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PresetEntry {
    label: String,
    config: String,
    /// Overrides the file-level model.
    model: Option<String>,
    published_best: Option<usize>,
    published_mean: Option<f64>,
}

const BUILTIN_PRESETS: [(&str, &str); 3] = [
    ("table1", include_str!("../presets/table1.toml")),
    ("table2", include_str!("../presets/table2.toml")),
    ("table3", include_str!("../presets/table3.toml")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    BUILTIN_PRESETS.iter().map(|(n, _)| *n)
}

/// Loads a built-in preset by name, or a preset file from disk.
pub fn load_preset(name_or_path: &str) -> Result<Vec<BenchTarget>> {
    let text = match BUILTIN_PRESETS.iter().find(|(n, _)| *n == name_or_path) {
        Some((_, text)) => (*text).to_string(),
        None => fs::read_to_string(name_or_path).map_err(|e| {
            Error::parse(name_or_path, format!("not a built-in preset and unreadable: {e}"))
        })?,
    };
    parse_preset(&text)
}

pub fn parse_preset(text: &str) -> Result<Vec<BenchTarget>> {
    let file: PresetFile =
        toml::from_str(text).map_err(|e| Error::parse("preset", e.to_string()))?;
    log::debug!("preset {}", file.name.as_deref().unwrap_or("<unnamed>"));
    let default_model = parse_model(&file.model)?;
    file.entry
        .into_iter()
        .map(|e| {
            let model = match &e.model {
                Some(m) => parse_model(m)?,
                None => default_model.clone(),
            };
            let config = validate_config(&model, e.config.parse()?)?.config;
            Ok(BenchTarget {
                label: e.label,
                model,
                config,
                published: e.published_best.zip(e.published_mean),
            })
        })
        .collect()
}

fn build_config(model: &SutModel, t: usize, subs: &[String]) -> Result<VscaConfig> {
    let mut config = VscaConfig::uniform(t);
    for s in subs {
        config.subs.push(parse_sub(s)?);
    }
    Ok(validate_config(model, config)?.config)
}

fn swarm_params(args: &SwarmArgs, variant: Variant, seed: u64) -> Result<SwarmParams> {
    let fis = match &args.mf_config {
        Some(path) => FisConfig::from_toml(&fs::read_to_string(path)?)?,
        None => FisConfig::default(),
    };
    let params = SwarmParams {
        swarm_size: args.swarm_size,
        max_iterations: args.iterations,
        c1: args.c1,
        c2: args.c2,
        variant,
        seed,
        fis,
    };
    params.validate()?;
    Ok(params)
}

pub fn default_label(model: &SutModel, config: &VscaConfig) -> String {
    format!("{model} | {}", render_config(config))
}

/// Per-iteration controller log of a run.
pub fn render_log(run: &RunResult) -> String {
    let mut out = String::from("test,iteration,gbest_fitness,ncf,d1,d2,nor_nubf,w_selection,w\n");
    for (test, log) in run.tests.iter().enumerate() {
        for r in &log.iterations {
            let nor = r.nor_nubf.map_or_else(|| "undef".to_string(), |v| format!("{v:.4}"));
            let sel = r.w_selection.map_or_else(|| "none".to_string(), |v| format!("{v:.4}"));
            let _ = writeln!(
                out,
                "{},{},{},{:.4},{:.4},{:.4},{nor},{sel},{:.4}",
                test + 1,
                r.iteration,
                r.gbest_fitness,
                r.ncf,
                r.d1,
                r.d2,
                r.w
            );
        }
    }
    out
}

pub struct GenerateOutput {
    pub run: RunResult,
    pub suite_text: String,
    pub log_text: String,
    pub summary: String,
}

pub fn cmd_generate(model: &SutModel, config: &VscaConfig, params: &SwarmParams) -> Result<GenerateOutput> {
    let run = generate_suite(model, config, params)?;
    Ok(GenerateOutput {
        suite_text: write_suite(&run.suite),
        log_text: render_log(&run),
        summary: format!("size={} seed={} variant={}", run.size(), run.seed, run.variant),
        run,
    })
}

pub struct GroupSummary {
    pub label: String,
    pub variant: Variant,
    pub stats: SuiteStats,
    pub published: Option<(usize, f64)>,
}

pub struct BenchmarkOutput {
    pub csv: String,
    pub groups: Vec<GroupSummary>,
}

/// Runs every target under every variant for `runs` seeds. Runs execute in
/// parallel; rows come out grouped by target then variant, in seed order.
pub fn cmd_benchmark(cfg: &RunConfig) -> Result<BenchmarkOutput> {
    if cfg.runs < 1 {
        return Err(Error::InvalidArgument("at least one run is required".into()));
    }
    let jobs: Vec<(usize, Variant, usize)> = cfg
        .targets
        .iter()
        .enumerate()
        .flat_map(|(ti, _)| {
            cfg.variants
                .iter()
                .flat_map(move |&v| (0..cfg.runs).map(move |r| (ti, v, r)))
        })
        .collect();
    let sizes: Vec<usize> = jobs
        .par_iter()
        .map(|&(ti, variant, run)| {
            let target = &cfg.targets[ti];
            let params = SwarmParams {
                variant,
                seed: cfg.seed_for(run),
                ..cfg.params.clone()
            };
            generate_suite(&target.model, &target.config, &params).map(|r| r.size())
        })
        .collect::<Result<_>>()?;

    let mut writer = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    writer
        .write_record(["config_label", "variant", "seed", "size"])
        .map_err(csv_err)?;
    let mut groups = Vec::new();
    for (group, chunk) in jobs.chunks(cfg.runs).zip(sizes.chunks(cfg.runs)) {
        let (ti, variant, _) = group[0];
        let target = &cfg.targets[ti];
        let variant_text = variant.to_string();
        for (&(_, _, run), size) in group.iter().zip(chunk) {
            writer
                .write_record([
                    target.label.as_str(),
                    &variant_text,
                    &cfg.seed_for(run).to_string(),
                    &size.to_string(),
                ])
                .map_err(csv_err)?;
        }
        let stats = stats_from_sizes(chunk)?;
        writer
            .write_record([target.label.as_str(), &variant_text, "best", &stats.best.to_string()])
            .map_err(csv_err)?;
        writer
            .write_record([target.label.as_str(), &variant_text, "mean", &stats.mean_text()])
            .map_err(csv_err)?;
        groups.push(GroupSummary {
            label: target.label.clone(),
            variant,
            stats,
            published: target.published,
        });
    }
    let bytes = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let csv = String::from_utf8(bytes).expect("csv output is utf-8");
    Ok(BenchmarkOutput { csv, groups })
}

pub fn cmd_verify(text: &str) -> Result<CoverageReport> {
    Ok(verify_suite(&read_suite(text)?))
}

/// Maps a library error to the process exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::CoverageGap { .. } => EXIT_INTERNAL,
        _ => EXIT_USAGE,
    }
}

fn write_output(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(Error::from)
}

fn run_generate(args: GenerateArgs) -> Result<i32> {
    let model = parse_model(&args.model)?;
    let config = build_config(&model, args.t, &args.subs)?;
    let params = swarm_params(&args.swarm, args.variant, args.seed)?;
    let out = cmd_generate(&model, &config, &params)?;
    match &args.out {
        Some(path) => {
            write_output(path, &out.suite_text)?;
            let mut log_path = path.clone().into_os_string();
            log_path.push(".log");
            write_output(Path::new(&log_path), &out.log_text)?;
            println!("{}", out.summary);
        }
        None => {
            print!("{}", out.suite_text);
            eprintln!("{}", out.summary);
        }
    }
    Ok(EXIT_OK)
}

fn run_benchmark(args: BenchmarkArgs) -> Result<i32> {
    let targets = match (&args.preset, &args.model, args.t) {
        (Some(preset), _, _) => {
            let mut targets = load_preset(preset)?;
            if !args.only.is_empty() {
                targets.retain(|t| args.only.contains(&t.label));
                if targets.is_empty() {
                    return Err(Error::InvalidArgument(format!(
                        "no preset entry matches {:?}",
                        args.only
                    )));
                }
            }
            targets
        }
        (None, Some(model), Some(t)) => {
            let model = parse_model(model)?;
            let config = build_config(&model, t, &args.subs)?;
            vec![BenchTarget {
                label: default_label(&model, &config),
                model,
                config,
                published: None,
            }]
        }
        _ => {
            return Err(Error::InvalidArgument(
                "benchmark needs --preset or both --model and --t".into(),
            ))
        }
    };
    let variants = if args.variants.is_empty() {
        vec![Variant::Fpso]
    } else {
        args.variants.clone()
    };
    let cfg = RunConfig {
        targets,
        variants,
        params: swarm_params(&args.swarm, Variant::Fpso, args.seed)?,
        runs: args.runs,
        base_seed: args.seed,
    };
    let out = cmd_benchmark(&cfg)?;
    match &args.out {
        Some(path) => write_output(path, &out.csv)?,
        None => print!("{}", out.csv),
    }
    for g in &out.groups {
        let reference = g
            .published
            .map(|(b, m)| format!("  (reference {b} / {m:.2})"))
            .unwrap_or_default();
        eprintln!(
            "{:<32} {:<5} best {:>4}  mean {:>8}{reference}",
            g.label,
            g.variant,
            g.stats.best,
            g.stats.mean_text()
        );
    }
    Ok(EXIT_OK)
}

fn run_verify(args: VerifyArgs) -> Result<i32> {
    let text = fs::read_to_string(&args.suite)?;
    let report = cmd_verify(&text)?;
    if args.csv {
        print!("{}", report.to_csv());
    } else {
        print!("{}", report.to_text());
    }
    Ok(if report.is_complete() { EXIT_OK } else { EXIT_SHORTFALL })
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Generate(a) => run_generate(a),
        Command::Benchmark(a) => run_benchmark(a),
        Command::Verify(a) => run_verify(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
