//! Command-line front end for self-augmented lexicon induction runs.
//!
//! Exit codes: 0 on success, 2 for configuration and usage problems, 1 for
//! failures while running.

pub mod config;
pub mod pipeline;
pub mod tools;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::error;

use sail_core::backend::replay::{FaultPlan, ReplayProtocol, ReplayServer};
use sail_core::backend::{MockBackend, MockSpec};
use sail_core::eval::format_p_value;
use sail_core::synthetic::SyntheticSpec;
use sail_core::{BackendKind, LanguageNames, LanguagePair, SailConfig, TemplateRegistry};

pub use config::{ExperimentConfig, Overrides, ValidationError};
pub use pipeline::{run_experiment, run_sweep, Command as RunCommand, ExperimentOutcome};

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "sail",
    version,
    about = "Unsupervised bilingual lexicon induction by prompting"
)]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Translate the test sets zero-shot.
    ZeroShot(RunArgs),
    /// Build the self-harvested dictionary and translate few-shot.
    #[command(alias = "run")]
    Sail(RunArgs),
    /// Repeat the pipeline over lists of N_it and N_f values.
    Sweep(SweepArgs),
    /// Print a seeded random sample of dictionary pairs.
    InspectDict {
        path: PathBuf,
        #[arg(short, long, default_value_t = 50)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Chi-square test between two runs.
    Significance {
        /// Two report.tsv files.
        #[arg(num_args = 0..=2)]
        reports: Vec<PathBuf>,
        /// correct_a total_a correct_b total_b
        #[arg(long, num_args = 4, conflicts_with = "reports")]
        counts: Vec<u64>,
    },
    /// Serve a mock spec over HTTP in the wire or chat protocol.
    ServeMock {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8089")]
        addr: String,
        #[arg(long, value_enum, default_value_t = Protocol::Wire)]
        protocol: Protocol,
    },
    /// Write a synthetic bilingual world and a config that runs it.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Protocol {
    Wire,
    Chat,
}

#[derive(Args, Debug, Default)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long = "pair")]
    pub pairs: Vec<LanguagePair>,
    #[arg(long = "direction")]
    pub directions: Vec<LanguagePair>,
    #[arg(long)]
    pub n_it: Option<usize>,
    #[arg(long)]
    pub n_f: Option<usize>,
    #[arg(long)]
    pub beam: Option<usize>,
    #[arg(long)]
    pub shots: Option<usize>,
    #[arg(long)]
    pub template_family: Option<String>,
    #[arg(long)]
    pub backend: Option<BackendKind>,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub mock_spec: Option<PathBuf>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub no_back_translation: bool,
    #[arg(long)]
    pub concurrency: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            pairs: self.pairs.clone(),
            directions: self.directions.clone(),
            n_it: self.n_it,
            n_f: self.n_f,
            beam: self.beam,
            shots: self.shots,
            template_family: self.template_family.clone(),
            backend: self.backend,
            endpoint: self.endpoint.clone(),
            mock_spec: self.mock_spec.clone(),
            cache_dir: self.cache_dir.clone(),
            no_back_translation: self.no_back_translation,
            concurrency: self.concurrency,
            out: self.out.clone(),
        }
    }

    /// The config file with flags applied.
    pub fn load(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        cfg.apply(&self.overrides());
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Replaces `sweep.n_it`.
    #[arg(long, value_delimiter = ',')]
    pub n_it_values: Vec<usize>,
    /// Replaces `sweep.n_f`.
    #[arg(long, value_delimiter = ',')]
    pub n_f_values: Vec<usize>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "de-fr")]
    pub pair: LanguagePair,
    #[arg(long, default_value_t = 1000)]
    pub n_words: usize,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub test_size: usize,
    #[arg(long, default_value_t = 0)]
    pub test_offset: usize,
    #[arg(long)]
    pub zero_shot_top: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub min_shots: usize,
    /// N_f written into the generated config.
    #[arg(long, default_value_t = 100)]
    pub n_f: usize,
}

fn exit_code(err: &anyhow::Error) -> i32 {
    if err
        .chain()
        .any(|e| e.downcast_ref::<ValidationError>().is_some())
    {
        EXIT_VALIDATION
    } else {
        EXIT_RUNTIME
    }
}

/// Runs a parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(err) => {
            let code = exit_code(&err);
            error!("{err:#}");
            eprintln!("error: {err:#}");
            code
        }
    }
}

fn print_summary(outcome: &ExperimentOutcome) {
    print!("{}", outcome.report.to_table());
    println!("artifacts: {}", outcome.out_dir.display());
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::ZeroShot(args) => {
            let outcome = run_experiment(&args.load()?, RunCommand::ZeroShot)?;
            print_summary(&outcome);
        }
        Command::Sail(args) => {
            let outcome = run_experiment(&args.load()?, RunCommand::Sail)?;
            print_summary(&outcome);
        }
        Command::Sweep(args) => {
            let mut cfg = args.run.load()?;
            if !args.n_it_values.is_empty() {
                cfg.sweep.n_it = args.n_it_values;
            }
            if !args.n_f_values.is_empty() {
                cfg.sweep.n_f = args.n_f_values;
            }
            let outcome = run_sweep(&cfg)?;
            let hash = cfg.hash();
            print!("{}", pipeline::curve_tsv("n_it", &hash, &outcome.n_it));
            print!("{}", pipeline::curve_tsv("n_f", &hash, &outcome.n_f));
        }
        Command::InspectDict { path, k, seed } => {
            let dict = tools::read_dictionary(&path)?;
            let (pairs, truncated) = tools::sample_pairs(&dict, k, seed);
            if truncated {
                eprintln!(
                    "note: k = {k} exceeds the {} pairs in the dictionary; printing all",
                    dict.len()
                );
            }
            let mut out = std::io::stdout().lock();
            writeln!(out, "# seed: {seed}")?;
            for (x, y) in pairs {
                writeln!(out, "{x}\t{y}")?;
            }
        }
        Command::Significance { reports, counts } => {
            let chi = if !counts.is_empty() {
                tools::compare_counts(&counts)?
            } else {
                let [a, b] = reports.as_slice() else {
                    return Err(ValidationError(
                        "significance needs two report files or --counts".into(),
                    )
                    .into());
                };
                let (ra, rb, chi) = tools::compare_reports(a, b)?;
                for (name, r) in [("A", &ra), ("B", &rb)] {
                    let (c, t) = r.pooled();
                    println!("{name}: {c}/{t} = {:.4}", c as f64 / t as f64);
                }
                chi
            };
            println!("chi2 = {:.4}", chi.statistic);
            println!("p = {}", format_p_value(chi.p_value));
        }
        Command::ServeMock {
            spec,
            addr,
            protocol,
        } => {
            let spec = MockSpec::load(&spec).map_err(|e| ValidationError(e.to_string()))?;
            let backend = MockBackend::new(
                spec,
                "mock",
                &TemplateRegistry::builtin(),
                &LanguageNames::builtin(),
            )
            .map_err(|e| ValidationError(e.to_string()))?;
            let protocol = match protocol {
                Protocol::Wire => ReplayProtocol::Wire,
                Protocol::Chat => ReplayProtocol::Chat,
            };
            let server =
                ReplayServer::start(&addr, Box::new(backend), protocol, FaultPlan::default())?;
            println!("serving {}", server.url());
            server.wait();
        }
        Command::Synth(a) => {
            let spec = SyntheticSpec {
                pair: a.pair,
                n_words: a.n_words,
                dim: a.dim,
                noise: a.noise,
                seed: a.seed,
                test_size: a.test_size,
                test_offset: a.test_offset,
                zero_shot_top: a.zero_shot_top,
                min_shots: a.min_shots,
            };
            let sail = SailConfig {
                n_frequent: a.n_f,
                ..SailConfig::default()
            };
            let path = tools::write_synthetic(spec, &a.out, sail)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

/// Installs the logger at the level implied by `-v` flags, unless
/// `RUST_LOG` is set.
pub fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}
