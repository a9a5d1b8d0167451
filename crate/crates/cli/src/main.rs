use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qmix::experiments::{self, ChainFamilyName, ExperimentConfig, ExperimentKind, ModeName};
use qmix::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RESOURCE: u8 = 3;
const EXIT_VIOLATION: u8 = 4;

#[derive(Parser)]
#[command(name = "qmix", version, about = "Quantum mixing experiments for reversible Markov chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ladder bounds, lower bounds and the V^-1 lemma.
    Geometry(RunArgs<GeometryExperiment>),
    /// Quantum mixing runs.
    Mix(RunArgs<MixExperiment>),
    /// Classical mixing times and relative mixing.
    Classical(RunArgs<ClassicalExperiment>),
    /// Markdown summary and plot data from JSON-lines records.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GeometryExperiment {
    Theorem1Sweep,
    LowerBoundSweep,
    LemmaVinvCheck,
}

#[derive(Clone, Copy, ValueEnum)]
enum MixExperiment {
    MixingRun,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassicalExperiment {
    ClassicalCompare,
    RelativeMixing,
}

trait Group: ValueEnum + Clone + Send + Sync + 'static {
    fn kind(self) -> ExperimentKind;
    fn default_kind() -> ExperimentKind;
    fn contains(kind: ExperimentKind) -> bool;
}

impl Group for GeometryExperiment {
    fn kind(self) -> ExperimentKind {
        match self {
            Self::Theorem1Sweep => ExperimentKind::Theorem1Sweep,
            Self::LowerBoundSweep => ExperimentKind::LowerBoundSweep,
            Self::LemmaVinvCheck => ExperimentKind::LemmaVinvCheck,
        }
    }
    fn default_kind() -> ExperimentKind {
        ExperimentKind::Theorem1Sweep
    }
    fn contains(kind: ExperimentKind) -> bool {
        matches!(
            kind,
            ExperimentKind::Theorem1Sweep | ExperimentKind::LowerBoundSweep | ExperimentKind::LemmaVinvCheck
        )
    }
}

impl Group for MixExperiment {
    fn kind(self) -> ExperimentKind {
        ExperimentKind::MixingRun
    }
    fn default_kind() -> ExperimentKind {
        ExperimentKind::MixingRun
    }
    fn contains(kind: ExperimentKind) -> bool {
        kind == ExperimentKind::MixingRun
    }
}

impl Group for ClassicalExperiment {
    fn kind(self) -> ExperimentKind {
        match self {
            Self::ClassicalCompare => ExperimentKind::ClassicalCompare,
            Self::RelativeMixing => ExperimentKind::RelativeMixing,
        }
    }
    fn default_kind() -> ExperimentKind {
        ExperimentKind::ClassicalCompare
    }
    fn contains(kind: ExperimentKind) -> bool {
        matches!(kind, ExperimentKind::ClassicalCompare | ExperimentKind::RelativeMixing)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Ideal,
    Emulated,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    MetropolisGeometric,
    MetropolisPowerlaw,
    LazyCycle,
    CustomFile,
}

#[derive(Args)]
struct RunArgs<E: Group> {
    /// Experiment within this group.
    #[arg(long, value_enum)]
    experiment: Option<E>,
    /// JSON configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// JSON-lines output; the CSV summary goes next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    t_bits: Option<u32>,
    #[arg(long)]
    samples: Option<usize>,
    /// Sizes such as `3..8` (inclusive) or `4,8,16`.
    #[arg(long, value_parser = parse_list)]
    n: Option<Sizes>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, value_enum)]
    family: Option<Family>,
    #[arg(long)]
    chain_file: Option<PathBuf>,
    #[arg(long)]
    ratio: Option<f64>,
    #[arg(long)]
    exponent: Option<f64>,
}

#[derive(Args)]
struct ReportArgs {
    /// JSON-lines record files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Output directory for `report.md` and plot data.
    #[arg(long, default_value = "report")]
    out: PathBuf,
}

#[derive(Clone)]
struct Sizes(Vec<usize>);

fn parse_list(s: &str) -> Result<Sizes, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let num = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("`{x}`: {e}"));
        if let Some((a, b)) = part.split_once("..=").or_else(|| part.split_once("..")) {
            let (a, b) = (num(a)?, num(b)?);
            if a > b {
                return Err(format!("empty range `{part}`"));
            }
            out.extend(a..=b);
        } else {
            out.push(num(part)?);
        }
    }
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(Sizes(out))
}

impl<E: Group> RunArgs<E> {
    fn into_config(self) -> Result<ExperimentConfig, Error> {
        let mut config = match &self.config {
            Some(path) => {
                let c = ExperimentConfig::load(path)?;
                if !E::contains(c.experiment) {
                    return Err(Error::Config(format!(
                        "experiment {} does not belong to this subcommand",
                        c.experiment.name()
                    )));
                }
                c
            }
            None => ExperimentConfig::from_json(&format!(
                r#"{{"experiment":"{}","n_range":[],"output_path":""}}"#,
                E::default_kind().name()
            ))?,
        };
        if let Some(e) = self.experiment {
            config.experiment = e.kind();
        }
        if let Some(Sizes(n)) = self.n {
            config.n_range = n;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = self.samples {
            config.samples = v;
        }
        if let Some(v) = self.epsilon {
            config.epsilon = v;
        }
        if self.eta.is_some() {
            config.eta = self.eta;
        }
        if let Some(m) = self.mode {
            config.mode = match m {
                Mode::Ideal => ModeName::Ideal,
                Mode::Emulated => ModeName::Emulated,
            };
        }
        if self.t_bits.is_some() {
            config.t_bits = self.t_bits;
        }
        if let Some(f) = self.family {
            config.chain_family = match f {
                Family::MetropolisGeometric => ChainFamilyName::MetropolisGeometric,
                Family::MetropolisPowerlaw => ChainFamilyName::MetropolisPowerlaw,
                Family::LazyCycle => ChainFamilyName::LazyCycle,
                Family::CustomFile => ChainFamilyName::CustomFile,
            };
        }
        if self.chain_file.is_some() {
            config.chain_file = self.chain_file;
        }
        if self.ratio.is_some() {
            config.ratio = self.ratio;
        }
        if self.exponent.is_some() {
            config.exponent = self.exponent;
        }
        if let Some(out) = self.out {
            config.output_path = out;
        }
        if config.output_path.as_os_str().is_empty() {
            config.output_path = PathBuf::from(format!("results/{}.jsonl", config.experiment.name()));
        }
        Ok(config)
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Json(_) | Error::Argument(_) => EXIT_CONFIG,
        Error::Resource { .. } => EXIT_RESOURCE,
        _ => EXIT_FAILURE,
    }
}

fn run<E: Group>(args: RunArgs<E>) -> Result<u8, Error> {
    let config = args.into_config()?;
    let output = experiments::run(&config)?;
    println!(
        "{}: {} records -> {}, {}",
        config.experiment.name(),
        output.records.len(),
        output.jsonl_path.display(),
        output.csv_path.display()
    );
    if output.violations > 0 {
        eprintln!("{} property violations", output.violations);
        return Ok(EXIT_VIOLATION);
    }
    Ok(0)
}

fn report(args: ReportArgs) -> Result<u8, Error> {
    let mut records = Vec::new();
    for path in &args.inputs {
        records.extend(experiments::read_jsonl(&std::fs::read_to_string(path)?)?);
    }
    let report = experiments::report(&records)?;
    experiments::write_report(&report, &args.out)?;
    println!("report: {} records -> {}", records.len(), args.out.join("report.md").display());
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Geometry(a) => run(a),
        Command::Mix(a) => run(a),
        Command::Classical(a) => run(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
