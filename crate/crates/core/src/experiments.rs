//! Seeded experiment sweeps, result records and reports.
//!
//! A run turns an [`ExperimentConfig`] into a list of JSON records, one per
//! sweep point, written as JSON lines next to a CSV summary. Sweep points
//! run in parallel, each with its own random substream, and are emitted in
//! sweep order, so a fixed seed gives byte-identical output apart from the
//! `timestamp_unix` field.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::ladder;
use crate::markov::generators::ChainFamily;
use crate::markov::{self, ChainDocument, Distribution, MarkovChain};
use crate::mixing::{self, MixOptions, ReflectorMode, DIMENSION_BUDGET};
use crate::rng::{substream2, SampleRng};
use crate::szegedy::WalkOperator;
use crate::{Error, Result};

/// Version of the record layout documented in the guide.
pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Largest residual accepted by the `V^-1` check.
pub const VINV_RESIDUAL_TOL: f64 = 1e-9;
/// Tolerance of `|1/alpha - (H_2N - H_N/2)|`.
pub const ALPHA_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Theorem1Sweep,
    LowerBoundSweep,
    LemmaVinvCheck,
    MixingRun,
    ClassicalCompare,
    RelativeMixing,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Theorem1Sweep => "theorem1_sweep",
            Self::LowerBoundSweep => "lower_bound_sweep",
            Self::LemmaVinvCheck => "lemma_vinv_check",
            Self::MixingRun => "mixing_run",
            Self::ClassicalCompare => "classical_compare",
            Self::RelativeMixing => "relative_mixing",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Ideal,
    Emulated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainFamilyName {
    MetropolisGeometric,
    MetropolisPowerlaw,
    LazyCycle,
    CustomFile,
}

fn default_samples() -> usize {
    1000
}

fn default_epsilon() -> f64 {
    0.01
}

fn default_family() -> ChainFamilyName {
    ChainFamilyName::MetropolisGeometric
}

fn default_mode() -> ModeName {
    ModeName::Ideal
}

/// Experiment description, read from JSON.
///
/// `n_range` holds bit counts `n` (so `N = 2^n`) for `theorem1_sweep` and
/// state counts `N` for every other experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub n_range: Vec<usize>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default = "default_mode")]
    pub mode: ModeName,
    #[serde(default)]
    pub t_bits: Option<u32>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_family")]
    pub chain_family: ChainFamilyName,
    /// Ratio `r` of the geometric family (default 1/2).
    #[serde(default)]
    pub ratio: Option<f64>,
    /// Exponent `s` of the power-law family (default 1).
    #[serde(default)]
    pub exponent: Option<f64>,
    /// Chain JSON for `custom_file`.
    #[serde(default)]
    pub chain_file: Option<PathBuf>,
    pub output_path: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Lists every invalid field.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n_range.is_empty() {
            problems.push("n_range: must not be empty".to_string());
        }
        let min_n = match self.experiment {
            ExperimentKind::Theorem1Sweep => 1,
            _ => 2,
        };
        if self.n_range.iter().any(|&n| n < min_n) {
            problems.push(format!("n_range: entries must be >= {min_n}"));
        }
        if self.experiment == ExperimentKind::Theorem1Sweep && self.n_range.iter().any(|&n| n > 24) {
            problems.push("n_range: theorem1_sweep takes bit counts n <= 24".into());
        }
        if self.samples == 0 {
            problems.push("samples: must be positive".into());
        }
        let eps_max = match self.experiment {
            ExperimentKind::ClassicalCompare => 0.5,
            _ => 1.0,
        };
        if !(self.epsilon > 0.0 && self.epsilon < eps_max) {
            problems.push(format!("epsilon: must lie in (0, {eps_max})"));
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0 && eta <= 1.0) {
                problems.push("eta: must lie in (0, 1]".into());
            }
        }
        if self.experiment == ExperimentKind::RelativeMixing && self.eta.is_none() {
            problems.push("eta: required for relative_mixing".into());
        }
        if self.t_bits == Some(0) {
            problems.push("t_bits: must be positive".into());
        }
        if self.chain_family == ChainFamilyName::CustomFile && self.chain_file.is_none() {
            problems.push("chain_file: required for chain_family custom_file".into());
        }
        if let Some(r) = self.ratio {
            if !(r > 0.0 && r < 1.0) {
                problems.push("ratio: must lie in (0, 1)".into());
            }
        }
        if let Some(s) = self.exponent {
            if !(s > 0.0) {
                problems.push("exponent: must be positive".into());
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// Hex SHA-256 of the canonical JSON form, output location excluded.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        value.as_object_mut().expect("struct").remove("output_path");
        let canonical = value.to_string();
        Sha256::digest(canonical.as_bytes()).iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    fn family(&self) -> Option<ChainFamily> {
        match self.chain_family {
            ChainFamilyName::MetropolisGeometric => {
                Some(ChainFamily::Geometric { ratio: self.ratio.unwrap_or(0.5) })
            }
            ChainFamilyName::MetropolisPowerlaw => {
                Some(ChainFamily::PowerLaw { exponent: self.exponent.unwrap_or(1.0) })
            }
            ChainFamilyName::LazyCycle => Some(ChainFamily::LazyCycle),
            ChainFamilyName::CustomFile => None,
        }
    }

    /// Chain for a sweep point, and a short identifier.
    fn chain(&self, n: usize) -> Result<(MarkovChain, String)> {
        match self.family() {
            Some(f) => Ok((f.build(n)?, format!("{}:N={n}", f.label()))),
            None => {
                let path = self.chain_file.as_ref().expect("validated");
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                let doc: ChainDocument = serde_json::from_str(&text)?;
                let chain = MarkovChain::from_document(doc)?;
                Ok((chain, format!("custom:{}", path.display())))
            }
        }
    }

    fn reflector_mode(&self) -> ReflectorMode {
        match self.mode {
            ModeName::Ideal => ReflectorMode::Ideal,
            ModeName::Emulated => ReflectorMode::Emulated { bits: self.t_bits, repetitions: 1 },
        }
    }
}

/// Records of one run plus the number of property violations they carry.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<Value>,
    pub violations: usize,
    pub jsonl_path: PathBuf,
    pub csv_path: PathBuf,
}

fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn envelope(config: &ExperimentConfig, hash: &str, body: Value) -> Value {
    let mut record = json!({
        "schema_version": SCHEMA_VERSION,
        "experiment": config.experiment.name(),
        "config_hash": hash,
        "tool_version": TOOL_VERSION,
        "timestamp_unix": now_unix(),
        "seed": config.seed,
    });
    if let (Value::Object(r), Value::Object(b)) = (&mut record, body) {
        r.extend(b);
    }
    record
}

/// Runs the experiment and writes `output_path` (JSON lines) and the CSV
/// summary at the same path with extension `csv`.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    check_resources(config)?;
    let hash = config.hash();
    let bodies = match config.experiment {
        ExperimentKind::Theorem1Sweep => theorem1_sweep(config),
        ExperimentKind::LowerBoundSweep => lower_bound_sweep(config),
        ExperimentKind::LemmaVinvCheck => lemma_vinv_check(config),
        ExperimentKind::MixingRun => mixing_run(config),
        ExperimentKind::ClassicalCompare => classical_compare(config),
        ExperimentKind::RelativeMixing => relative_mixing(config),
    }?;
    let violations = bodies.iter().filter_map(|b| b["violations"].as_u64()).sum::<u64>() as usize;
    let records: Vec<Value> = bodies.into_iter().map(|b| envelope(config, &hash, b)).collect();
    let jsonl_path = config.output_path.clone();
    let csv_path = jsonl_path.with_extension("csv");
    write_atomic(&jsonl_path, &to_jsonl(&records))?;
    write_atomic(&csv_path, &summary_csv(config.experiment, &records))?;
    Ok(RunOutput { records, violations, jsonl_path, csv_path })
}

/// Records as JSON lines.
pub fn to_jsonl(records: &[Value]) -> String {
    records.iter().map(|r| r.to_string() + "\n").collect()
}

pub fn read_jsonl(text: &str) -> Result<Vec<Value>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

fn write_atomic(path: &Path, content: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn check_resources(config: &ExperimentConfig) -> Result<()> {
    if config.experiment != ExperimentKind::MixingRun || config.mode != ModeName::Emulated {
        return Ok(());
    }
    if let Some(t) = config.t_bits {
        for &n in &config.n_range {
            let dimension = (n * n).saturating_mul(1usize.checked_shl(t).unwrap_or(usize::MAX));
            if dimension > DIMENSION_BUDGET {
                return Err(Error::Resource { dimension, limit: DIMENSION_BUDGET });
            }
        }
    }
    Ok(())
}

fn theorem1_sweep(config: &ExperimentConfig) -> Result<Vec<Value>> {
    config
        .n_range
        .iter()
        .map(|&bits| {
            let n_states = 1usize << bits;
            let distances = (0..config.samples)
                .into_par_iter()
                .map(|i| {
                    let mut rng: SampleRng = substream2(config.seed, bits as u64, i as u64);
                    let pi = Distribution::sample_decaying(n_states, &mut rng);
                    ladder::best_initial(&pi).map(|b| b.distance)
                })
                .collect::<Result<Vec<f64>>>()?;
            let bound = ladder::theorem1_bound(bits as u32);
            let max = distances.iter().copied().fold(0.0, f64::max);
            let mean = distances.iter().sum::<f64>() / distances.len() as f64;
            let violations = distances.iter().filter(|&&d| d > bound).count();
            Ok(json!({
                "n": bits,
                "N": n_states,
                "samples": config.samples,
                "max_min_distance": max,
                "mean_min_distance": mean,
                "theorem1_bound": bound,
                "margin": bound - max,
                "violations": violations,
            }))
        })
        .collect()
}

fn lower_bound_sweep(config: &ExperimentConfig) -> Result<Vec<Value>> {
    config
        .n_range
        .par_iter()
        .map(|&n| {
            let e = ladder::equalizing_alpha(n)?;
            let lb = ladder::lower_bound_distance(n)?;
            let log_n = (n as f64).ln();
            let identity_gap = (1.0 / e.alpha - 1.0 / e.alpha_harmonic).abs();
            let half_integer_gap = (1.0 / e.alpha - e.inverse_alpha_half_integer).abs();
            let ok = identity_gap < ALPHA_TOL
                && half_integer_gap < ALPHA_TOL
                && e.alpha < 2.0 / log_n
                && 1.0 / e.alpha > 0.5 * log_n;
            Ok(json!({
                "N": n,
                "n": (n as f64).log2(),
                "alpha": e.alpha,
                "inverse_alpha": 1.0 / e.alpha,
                "harmonic_identity_gap": identity_gap,
                "half_integer_gap": half_integer_gap,
                "two_over_log_n": 2.0 / log_n,
                "lower_bound": lb.value,
                "vacuous": lb.vacuous,
                "equalizing_spread": e.spread,
                "violations": usize::from(!ok),
            }))
        })
        .collect()
}

fn lemma_vinv_check(config: &ExperimentConfig) -> Result<Vec<Value>> {
    config
        .n_range
        .par_iter()
        .map(|&n| {
            let vm = ladder::v_matrix(n)?;
            let residual = vm.product_residual();
            let symmetric = vm.inverse_is_symmetric();
            let tridiagonal = vm.inverse_is_tridiagonal();
            let margin = vm.dominance_margin();
            let ok = residual < VINV_RESIDUAL_TOL && symmetric && tridiagonal && margin > 0.0;
            Ok(json!({
                "N": n,
                "residual": residual,
                "symmetric": symmetric,
                "tridiagonal": tridiagonal,
                "dominance_margin": margin,
                "violations": usize::from(!ok),
            }))
        })
        .collect()
}

fn mixing_run(config: &ExperimentConfig) -> Result<Vec<Value>> {
    let mut points = Vec::new();
    for &n in &config.n_range {
        let (chain, chain_id) = config.chain(n)?;
        let walk = WalkOperator::new(&chain)?;
        let delta = chain.gap();
        let phase_gap = walk.phase_gap()?;
        let records = (0..config.samples)
            .into_par_iter()
            .map(|i| {
                let run_seed: u64 = substream2(config.seed, n as u64, i as u64).random();
                let options = MixOptions {
                    mode: config.reflector_mode(),
                    seed: run_seed,
                    ..MixOptions::default()
                };
                let r = mixing::mix_monotone(&walk, config.epsilon, &options)?;
                Ok(json!({
                    "chain_id": chain_id,
                    "n": n,
                    "sample": i,
                    "run_seed": run_seed,
                    "delta": delta,
                    "phase_gap": phase_gap,
                    "mode": config.mode,
                    "t_bits": r.t_bits,
                    "epsilon": config.epsilon,
                    "chosen_k": r.chosen_k,
                    "chosen_cutoff": r.chosen_cutoff,
                    "fidelity": r.fidelity,
                    "amplified_fidelity": r.amplified_fidelity,
                    "reflector_calls": r.reflector_calls,
                    "walk_calls": r.walk_calls,
                    "expected_reflector_calls": r.expected_reflector_calls,
                    "schedule": r.schedule,
                    "violations": usize::from(r.fidelity < 1.0 - config.epsilon),
                }))
            })
            .collect::<Result<Vec<_>>>()?;
        points.extend(records);
    }
    Ok(points)
}

fn classical_compare(config: &ExperimentConfig) -> Result<Vec<Value>> {
    config
        .n_range
        .iter()
        .map(|&n| {
            let (chain, chain_id) = config.chain(n)?;
            let tau = markov::mixing_time(&chain, config.epsilon)?;
            let bounds = markov::mixing_time_bounds(&chain, config.epsilon)?;
            let walk = WalkOperator::new(&chain)?;
            let options = MixOptions { mode: config.reflector_mode(), seed: config.seed, ..MixOptions::default() };
            let quantum = mixing::mix_monotone(&walk, config.epsilon, &options)?;
            let sandwiched = bounds.lower <= tau as f64 && tau as f64 <= bounds.upper;
            Ok(json!({
                "chain_id": chain_id,
                "N": n,
                "delta": chain.gap(),
                "phase_gap": walk.phase_gap()?,
                "epsilon": config.epsilon,
                "tau": tau,
                "tau_lower": bounds.lower,
                "tau_lower_raw": bounds.lower_raw,
                "tau_upper": bounds.upper,
                "quantum_walk_calls": quantum.walk_calls,
                "quantum_reflector_calls": quantum.reflector_calls,
                "quantum_fidelity": quantum.fidelity,
                "violations": usize::from(!sandwiched),
            }))
        })
        .collect()
}

fn relative_mixing(config: &ExperimentConfig) -> Result<Vec<Value>> {
    let eta = config.eta.expect("validated");
    config
        .n_range
        .iter()
        .map(|&n| {
            let (chain, chain_id) = config.chain(n)?;
            let eps = config.epsilon;
            let tau = markov::mixing_time(&chain, eps)?;
            let tau_eta = markov::relative_mixing_time(&chain, eps, eta)?;
            let tau_scaled = if eps / eta < 1.0 { Some(markov::mixing_time(&chain, eps / eta)?) } else { None };
            let ok = tau_scaled.is_none_or(|t| tau_eta >= t);
            Ok(json!({
                "chain_id": chain_id,
                "N": n,
                "epsilon": eps,
                "eta": eta,
                "tau": tau,
                "tau_eta": tau_eta,
                "tau_eps_over_eta": tau_scaled,
                "violations": usize::from(!ok),
            }))
        })
        .collect()
}

fn csv_columns(kind: ExperimentKind) -> &'static [&'static str] {
    match kind {
        ExperimentKind::Theorem1Sweep | ExperimentKind::LowerBoundSweep => &[
            "n", "N", "samples", "max_min_distance", "theorem1_bound", "alpha", "lower_bound", "violations",
        ],
        ExperimentKind::LemmaVinvCheck => {
            &["N", "residual", "symmetric", "tridiagonal", "dominance_margin", "violations"]
        }
        ExperimentKind::MixingRun => &[
            "chain_id", "n", "sample", "mode", "t_bits", "delta", "phase_gap", "chosen_k", "fidelity",
            "reflector_calls", "walk_calls", "violations",
        ],
        ExperimentKind::ClassicalCompare => &[
            "chain_id", "N", "delta", "epsilon", "tau", "tau_lower", "tau_upper", "quantum_walk_calls",
            "violations",
        ],
        ExperimentKind::RelativeMixing => {
            &["chain_id", "N", "epsilon", "eta", "tau", "tau_eta", "tau_eps_over_eta", "violations"]
        }
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) if s.contains(',') || s.contains('"') => format!("\"{}\"", s.replace('"', "\"\"")),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// CSV summary with the fixed column set of `kind`; absent fields are empty.
pub fn summary_csv(kind: ExperimentKind, records: &[Value]) -> String {
    let cols = csv_columns(kind);
    let mut out = cols.join(",") + "\n";
    for r in records {
        let row: Vec<String> = cols.iter().map(|c| csv_cell(&r[*c])).collect();
        out += &row.join(",");
        out.push('\n');
    }
    out
}

/// Markdown summary plus two-column plot-data CSV files.
#[derive(Clone, Debug)]
pub struct Report {
    pub markdown: String,
    /// `(file name, CSV content)`.
    pub plot_data: Vec<(String, String)>,
}

fn f(v: &Value) -> String {
    if v.is_u64() || v.is_i64() {
        return v.to_string();
    }
    match v.as_f64() {
        Some(x) if x != 0.0 && (x.abs() < 1e-3 || x.abs() >= 1e6) => format!("{x:.3e}"),
        Some(x) => format!("{x:.4}"),
        None => csv_cell(v),
    }
}

fn table(out: &mut String, header: &[&str], rows: impl Iterator<Item = Vec<String>>) {
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
    for row in rows {
        let _ = writeln!(out, "| {} |", row.join(" | "));
    }
    out.push('\n');
}

fn plot(name: &str, x: &str, y: &str, rows: &[&Value]) -> (String, String) {
    let mut csv = format!("{x},{y}\n");
    for r in rows {
        let _ = writeln!(csv, "{},{}", csv_cell(&r[x]), csv_cell(&r[y]));
    }
    (name.to_string(), csv)
}

/// Groups records by experiment and renders one section per group.
pub fn report(records: &[Value]) -> Result<Report> {
    if records.is_empty() {
        return Err(Error::EmptyReport);
    }
    let mut groups: BTreeMap<String, Vec<&Value>> = BTreeMap::new();
    for r in records {
        let kind = r["experiment"].as_str().unwrap_or("unknown").to_string();
        groups.entry(kind).or_default().push(r);
    }
    let mut md = String::from("# Experiment report\n\n");
    let mut plot_data = Vec::new();
    for (kind, rs) in &groups {
        let _ = writeln!(md, "## {kind}\n");
        match kind.as_str() {
            "theorem1_sweep" => {
                table(
                    &mut md,
                    &["n", "bound", "observed_max", "margin", "violations"],
                    rs.iter().map(|r| {
                        vec![f(&r["n"]), f(&r["theorem1_bound"]), f(&r["max_min_distance"]), f(&r["margin"]), f(&r["violations"])]
                    }),
                );
                plot_data.push(plot("theorem1_observed.csv", "n", "max_min_distance", rs));
                plot_data.push(plot("theorem1_bound.csv", "n", "theorem1_bound", rs));
            }
            "lower_bound_sweep" => {
                table(
                    &mut md,
                    &["N", "alpha", "2/log N", "lower_bound", "vacuous"],
                    rs.iter().map(|r| {
                        vec![f(&r["N"]), f(&r["alpha"]), f(&r["two_over_log_n"]), f(&r["lower_bound"]), f(&r["vacuous"])]
                    }),
                );
                plot_data.push(plot("alpha.csv", "N", "alpha", rs));
                plot_data.push(plot("two_over_log_n.csv", "N", "two_over_log_n", rs));
            }
            "lemma_vinv_check" => {
                let worst = rs.iter().filter_map(|r| r["residual"].as_f64()).fold(0.0, f64::max);
                let _ = writeln!(md, "Largest residual over {} sizes: {worst:.3e}\n", rs.len());
                table(
                    &mut md,
                    &["N", "residual", "symmetric", "tridiagonal", "dominance_margin"],
                    rs.iter().map(|r| {
                        vec![f(&r["N"]), f(&r["residual"]), f(&r["symmetric"]), f(&r["tridiagonal"]), f(&r["dominance_margin"])]
                    }),
                );
                plot_data.push(plot("vinv_residual.csv", "N", "residual", rs));
            }
            "mixing_run" => {
                let mut by_n: BTreeMap<u64, Vec<&Value>> = BTreeMap::new();
                for r in rs {
                    by_n.entry(r["n"].as_u64().unwrap_or(0)).or_default().push(r);
                }
                table(
                    &mut md,
                    &["N", "runs", "min_fidelity", "mean_reflector_calls", "mean_walk_calls"],
                    by_n.iter().map(|(n, v)| {
                        let mean = |key: &str| v.iter().filter_map(|r| r[key].as_f64()).sum::<f64>() / v.len() as f64;
                        let min_f = v.iter().filter_map(|r| r["fidelity"].as_f64()).fold(1.0, f64::min);
                        vec![n.to_string(), v.len().to_string(), format!("{min_f:.6}"), format!("{:.2}", mean("reflector_calls")), format!("{:.1}", mean("walk_calls"))]
                    }),
                );
                plot_data.push(plot("mixing_walk_calls.csv", "n", "walk_calls", rs));
            }
            "classical_compare" => {
                table(
                    &mut md,
                    &["N", "delta", "tau", "tau_lower", "tau_upper", "quantum_walk_calls"],
                    rs.iter().map(|r| {
                        vec![f(&r["N"]), f(&r["delta"]), f(&r["tau"]), f(&r["tau_lower"]), f(&r["tau_upper"]), f(&r["quantum_walk_calls"])]
                    }),
                );
                plot_data.push(plot("classical_tau.csv", "N", "tau", rs));
                plot_data.push(plot("quantum_walk_calls.csv", "N", "quantum_walk_calls", rs));
            }
            "relative_mixing" => {
                table(
                    &mut md,
                    &["N", "eta", "tau", "tau_eta", "tau(eps/eta)"],
                    rs.iter().map(|r| {
                        vec![f(&r["N"]), f(&r["eta"]), f(&r["tau"]), f(&r["tau_eta"]), f(&r["tau_eps_over_eta"])]
                    }),
                );
                plot_data.push(plot("relative_tau_eta.csv", "N", "tau_eta", rs));
            }
            _ => {
                let _ = writeln!(md, "{} records of unknown type\n", rs.len());
            }
        }
    }
    Ok(Report { markdown: md, plot_data })
}

/// Writes `report.md` and the plot-data files into `dir`.
pub fn write_report(report: &Report, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_atomic(&dir.join("report.md"), &report.markdown)?;
    for (name, content) in &report.plot_data {
        write_atomic(&dir.join(name), content)?;
    }
    Ok(())
}

/// Drops `timestamp_unix` from every record, for determinism checks.
pub fn strip_timestamps(records: &[Value]) -> Vec<Value> {
    records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            if let Value::Object(m) = &mut r {
                m.remove("timestamp_unix");
            }
            r
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(kind: ExperimentKind, n_range: Vec<usize>, out: &Path) -> ExperimentConfig {
        ExperimentConfig {
            experiment: kind,
            n_range,
            samples: 20,
            epsilon: 0.01,
            eta: None,
            mode: ModeName::Ideal,
            t_bits: None,
            seed: 5,
            chain_family: ChainFamilyName::MetropolisGeometric,
            ratio: None,
            exponent: None,
            chain_file: None,
            output_path: out.to_path_buf(),
        }
    }

    #[test]
    fn validation_lists_fields() {
        let mut c = config(ExperimentKind::RelativeMixing, vec![], Path::new("x.jsonl"));
        c.samples = 0;
        let Err(Error::Config(msg)) = c.validate() else { panic!("expected config error") };
        assert!(msg.contains("n_range") && msg.contains("samples") && msg.contains("eta"));
        assert!(ExperimentConfig::from_json(r#"{"experiment":"mixing_run","bogus":1}"#).is_err());
    }

    #[test]
    fn hash_is_stable() {
        let c = config(ExperimentKind::Theorem1Sweep, vec![3], Path::new("x.jsonl"));
        assert_eq!(c.hash(), c.clone().hash());
        assert_eq!(c.hash().len(), 64);
        let mut d = c.clone();
        d.seed = 6;
        assert_ne!(c.hash(), d.hash());
        let mut e = c.clone();
        e.output_path = PathBuf::from("elsewhere.jsonl");
        assert_eq!(c.hash(), e.hash());
    }

    #[test]
    fn theorem1_run_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let c = config(ExperimentKind::Theorem1Sweep, vec![3, 4], &dir.path().join("t1.jsonl"));
        let a = run(&c).unwrap();
        let b = run(&c).unwrap();
        assert_eq!(a.violations, 0);
        assert_eq!(strip_timestamps(&a.records), strip_timestamps(&b.records));
        let csv = std::fs::read_to_string(&a.csv_path).unwrap();
        assert!(csv.starts_with("n,N,samples,max_min_distance,theorem1_bound,alpha,lower_bound,violations\n"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn emulated_budget_checked() {
        let mut c = config(ExperimentKind::MixingRun, vec![64], Path::new("unused.jsonl"));
        c.mode = ModeName::Emulated;
        c.t_bits = Some(12);
        assert!(matches!(run(&c), Err(Error::Resource { .. })));
    }

    #[test]
    fn report_groups_and_rejects_empty() {
        assert!(matches!(report(&[]), Err(Error::EmptyReport)));
        let recs = vec![
            json!({"experiment": "theorem1_sweep", "n": 3, "theorem1_bound": 0.875, "max_min_distance": 0.7, "margin": 0.175, "violations": 0}),
            json!({"experiment": "lemma_vinv_check", "N": 4, "residual": 1e-16, "symmetric": true, "tridiagonal": true, "dominance_margin": 0.1}),
        ];
        let r = report(&recs).unwrap();
        assert!(r.markdown.contains("## theorem1_sweep"));
        assert!(r.markdown.contains("## lemma_vinv_check"));
        assert!(r.markdown.contains("| n | bound | observed_max | margin |"));
        assert!(r.plot_data.iter().any(|(n, c)| n == "theorem1_bound.csv" && c.starts_with("n,theorem1_bound\n")));
    }
}
