//! The `modchaos` command line.
//!
//! ```text
//! modchaos <certify|witness|simulate|example> [--config FILE] [--seed N] [--out DIR] [--svg]
//! ```
//!
//! Exit codes: 0 on success, 1 when a verdict is false or a requested
//! witness is not found, 2 on usage or configuration errors.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::dynamics::{
    check_unpredictability, find_sensitivity_witness, find_transitivity_witness,
    in_km_neighborhood, liyorke_report, periodic_point_in_neighborhood, validate_sensitivity,
    DistanceEvent, DynamicsError, LiYorkeParams, ModularPoint, SensitivityParams,
};
use crate::randproc::{
    equivalence_report, example1_structure, example2_structure, example3_structure,
    path_matches_spec, path_vertices, sample_stream, PathMode, ProcessError, ProcessModel,
    RandomProcessSpec, Realization, ScalarFn, TimeGrid,
};
use crate::render::{parse_path_csv, path_csv, svg_polyline, ReferenceLine};
use crate::structure::{
    modular_certificate, strong_certificate, Budget, Certificate, CertifyParams, ModularStructure,
    ModuleSpace, SetDescriptor, StructureError,
};
use crate::symseq::{
    make_periodic, random_sequence, scrambled_pair, universal_construction_len, universal_sequence,
    Alphabet, BlockSchedule, SeqError, Symbol, SymbolSeq, DEFAULT_TOLERANCE,
};

const EXIT_OK: i32 = 0;
const EXIT_NEGATIVE: i32 = 1;
const EXIT_USAGE: i32 = 2;
const EVENT_SAMPLE: usize = 20;

#[derive(Debug, Parser)]
#[command(
    name = "modchaos",
    version,
    about = "Certify, witness and simulate modular chaotic structures"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Top-level seed; overrides the config's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Also write an SVG plot of the sampled path.
    #[arg(long, global = true)]
    pub svg: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check nesting, diameter and separation over the configured modules.
    Certify,
    /// Certify, then search for chaos witnesses.
    Witness,
    /// Sample realizations and check them against trajectories.
    Simulate,
    /// Reproduce one of the built-in examples.
    Example {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=3))]
        id: u8,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Sequence(#[from] SeqError),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Process(#[from] ProcessError),
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub structure: StructureConfig,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub certify: CertifyConfig,
    /// Absent: run every witness search with defaults.
    #[serde(default)]
    pub witness: Option<WitnessConfig>,
    #[serde(default)]
    pub simulate: SimulateConfig,
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StructureConfig {
    /// `X(t) = slope_a·t + intercept_a` with probability `p_a`.
    FunctionFamily {
        functions: Vec<Affine>,
        probabilities: Vec<f64>,
        #[serde(default)]
        grid: GridConfig,
    },
    /// `X(t) = ±t` on `t = i/100`, `i = 100..=400`.
    PlusMinusT,
    /// `±t` on consecutive intervals `[i/10, (i+1)/10)`.
    IntervalFunctions {
        #[serde(default = "default_i_range")]
        i_range: (usize, usize),
    },
    /// Hand-written cell tables; a prefix without an entry inherits the
    /// cell of its longest listed ancestor.
    Inline {
        alphabet: usize,
        #[serde(default)]
        probabilities: Option<Vec<f64>>,
        modules: Vec<InlineModule>,
    },
}

fn default_i_range() -> (usize, usize) {
    (10, 39)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Affine {
    pub slope: f64,
    pub intercept: f64,
}

/// `t_i = i / denom` for `i` in `start..=end`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub start: usize,
    pub end: usize,
    pub denom: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            start: 100,
            end: 400,
            denom: 100.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineModule {
    #[serde(default)]
    pub time: Option<f64>,
    pub cells: Vec<InlineCell>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineCell {
    pub prefix: Vec<Symbol>,
    pub set: SetDescriptor,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budgets {
    pub max_prefixes: usize,
    pub max_depth: usize,
    pub horizon: usize,
    pub n_samples: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            max_prefixes: Budget::default().max_prefixes,
            max_depth: 64,
            horizon: 10_000,
            n_samples: 1000,
        }
    }
}

impl Budgets {
    fn validate(&self) -> Result<(), CliError> {
        if self.max_prefixes == 0 || self.max_depth == 0 || self.horizon == 0 || self.n_samples == 0
        {
            return Err(config_err("budgets must be positive"));
        }
        Ok(())
    }

    fn budget(&self) -> Budget {
        Budget {
            max_prefixes: self.max_prefixes,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifyConfig {
    /// Defaults to every module the structure describes.
    pub j_range: Option<(usize, usize)>,
    pub depth: usize,
    pub degree: usize,
    pub strong: bool,
    pub strong_depths: Option<Vec<usize>>,
    pub threshold: f64,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig {
            j_range: None,
            depth: 1,
            degree: 1,
            strong: false,
            strong_depths: None,
            threshold: DEFAULT_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessConfig {
    pub sensitivity: Option<SensitivityConfig>,
    pub transitivity: Option<TransitivityConfig>,
    pub periodic: Option<PeriodicConfig>,
    pub unpredictability: Option<UnpredictabilityConfig>,
    pub liyorke: Option<LiYorkeConfig>,
}

impl WitnessConfig {
    fn everything() -> Self {
        WitnessConfig {
            sensitivity: Some(Default::default()),
            transitivity: Some(Default::default()),
            periodic: Some(Default::default()),
            unpredictability: Some(Default::default()),
            liyorke: Some(Default::default()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensitivityConfig {
    pub kappa: f64,
    /// Number of random base points.
    pub points: usize,
    /// Defaults to the first certified module.
    pub module: Option<usize>,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        SensitivityConfig {
            kappa: (2.0f64).powi(-10),
            points: 10,
            module: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransitivityConfig {
    /// Explicit targets; random ones are drawn when absent.
    pub targets: Option<Vec<Vec<Symbol>>>,
    pub random_targets: usize,
    pub max_len: usize,
}

impl Default for TransitivityConfig {
    fn default() -> Self {
        TransitivityConfig {
            targets: None,
            random_targets: 8,
            max_len: 8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeriodicConfig {
    pub l: usize,
    pub offset: usize,
}

impl Default for PeriodicConfig {
    fn default() -> Self {
        PeriodicConfig { l: 4, offset: 2 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelChoice {
    Universal,
    Periodic(Vec<Symbol>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnpredictabilityConfig {
    pub sequence: LabelChoice,
    pub l_max: usize,
    pub horizon: Option<usize>,
}

impl Default for UnpredictabilityConfig {
    fn default() -> Self {
        UnpredictabilityConfig {
            sequence: LabelChoice::Universal,
            l_max: 4,
            horizon: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairChoice {
    Scrambled,
    Constant,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiYorkeConfig {
    pub pair: PairChoice,
    pub kappa: f64,
    /// Defaults to the certified separation constant.
    pub eps: Option<f64>,
    pub horizon: Option<usize>,
}

impl Default for LiYorkeConfig {
    fn default() -> Self {
        LiYorkeConfig {
            pair: PairChoice::Scrambled,
            kappa: (2.0f64).powi(-10),
            eps: None,
            horizon: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    /// Defaults to `budgets.n_samples`.
    pub n_samples: Option<usize>,
    /// Defaults to the longest `l ≤ 6` whose `m^l` fits the budget.
    pub prefix_len: Option<usize>,
    pub path_mode: PathMode,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            if outcome.success {
                EXIT_OK
            } else {
                EXIT_NEGATIVE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

/// What a command produced.
#[derive(Debug)]
pub struct Outcome {
    pub success: bool,
    pub summary: String,
    pub files: Vec<PathBuf>,
}

pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Example { id } => cmd_example(
            *id,
            cli.common.seed.unwrap_or(0),
            &cli.common.out,
            cli.common.svg,
        ),
        command => {
            let path = cli
                .common
                .config
                .as_ref()
                .ok_or_else(|| config_err("--config FILE is required"))?;
            let text = fs::read_to_string(path).map_err(|source| CliError::Read {
                path: path.clone(),
                source,
            })?;
            let config: RunConfig = serde_json::from_str(&text)?;
            let seed = cli.common.seed.or(config.seed).unwrap_or(0);
            match command {
                Command::Certify => cmd_certify(&config, seed, &cli.common.out),
                Command::Witness => cmd_witness(&config, seed, &cli.common.out),
                Command::Simulate => cmd_simulate(&config, seed, &cli.common.out, cli.common.svg),
                Command::Example { .. } => unreachable!("handled above"),
            }
        }
    }
}

/// Builds the process model a config describes.
pub fn build_model(config: &StructureConfig, budgets: &Budgets) -> Result<ProcessModel, CliError> {
    match config {
        StructureConfig::FunctionFamily {
            functions,
            probabilities,
            grid,
        } => {
            if grid.start > grid.end || grid.denom.is_nan() || grid.denom <= 0.0 {
                return Err(config_err("grid needs start <= end and a positive denom"));
            }
            let fs: Vec<ScalarFn> = functions
                .iter()
                .map(|f| {
                    let Affine { slope, intercept } = *f;
                    Arc::new(move |t: f64| slope * t + intercept) as ScalarFn
                })
                .collect();
            let grid = TimeGrid::rational(grid.start..=grid.end, grid.denom)?;
            Ok(example1_structure(fs, probabilities.clone(), grid)?.0)
        }
        StructureConfig::PlusMinusT => Ok(example2_structure()),
        StructureConfig::IntervalFunctions { i_range } => {
            Ok(example3_structure(i_range.0..=i_range.1)?)
        }
        StructureConfig::Inline {
            alphabet,
            probabilities,
            modules,
        } => inline_model(
            *alphabet,
            probabilities.as_deref(),
            modules,
            budgets.max_depth,
        ),
    }
}

fn inline_model(
    m: usize,
    probabilities: Option<&[f64]>,
    modules: &[InlineModule],
    max_depth: usize,
) -> Result<ProcessModel, CliError> {
    let alphabet = Alphabet::new(m)?;
    if modules.is_empty() {
        return Err(config_err("inline structure needs at least one module"));
    }
    let mut tables: Vec<Vec<(Vec<Symbol>, SetDescriptor)>> = Vec::with_capacity(modules.len());
    for (i, module) in modules.iter().enumerate() {
        let mut cells = Vec::with_capacity(module.cells.len());
        for cell in &module.cells {
            alphabet.check_all(&cell.prefix)?;
            if cell.prefix.len() > max_depth {
                return Err(config_err(format!(
                    "module {}: prefix deeper than max_depth {max_depth}",
                    i + 1
                )));
            }
            cell.set.validate()?;
            cells.push((cell.prefix.clone(), cell.set.clone()));
        }
        if !cells.iter().any(|(p, _)| p.is_empty()) {
            return Err(config_err(format!(
                "module {} has no cell for the empty prefix",
                i + 1
            )));
        }
        tables.push(cells);
    }
    let tables = Arc::new(tables);
    let lookup = {
        let tables = Arc::clone(&tables);
        move |j: usize, prefix: &[Symbol]| -> SetDescriptor {
            tables[j - 1]
                .iter()
                .filter(|(p, _)| prefix.starts_with(p))
                .max_by_key(|(p, _)| p.len())
                .map(|(_, s)| s.clone())
                .expect("empty prefix present")
        }
    };
    let lookup = Arc::new(lookup);
    let count = modules.len();
    let structure = {
        let lookup = Arc::clone(&lookup);
        ModularStructure::new("inline", alphabet, 1..=count, move |j| {
            if j == 0 || j > count {
                return None;
            }
            let lookup = Arc::clone(&lookup);
            Some(ModuleSpace::new(
                j,
                alphabet,
                max_depth,
                move |prefix: &[Symbol]| lookup(j, prefix),
            ))
        })
    };
    let probabilities = probabilities
        .map(<[f64]>::to_vec)
        .unwrap_or_else(|| vec![1.0 / m as f64; m]);
    let spec = RandomProcessSpec::new(alphabet, probabilities, move |step, _, a| {
        lookup(step + 1, &[a])
    })?;
    let times = modules
        .iter()
        .enumerate()
        .map(|(i, module)| module.time.unwrap_or((i + 1) as f64))
        .collect();
    let grid = TimeGrid::new(times)?;
    Ok(ProcessModel {
        name: "inline".into(),
        spec,
        structure,
        grid,
    })
}

fn certify_params(config: &RunConfig, structure: &ModularStructure) -> CertifyParams {
    let hint = structure.range_hint();
    let c = &config.certify;
    let mut params = CertifyParams::new(
        c.j_range.unwrap_or((*hint.start(), *hint.end())),
        c.depth,
        c.degree,
    );
    if let Some(depths) = &c.strong_depths {
        params.strong_depths = depths.clone();
    }
    params.threshold = c.threshold;
    params.budget = config.budgets.budget();
    params.tolerance = config.tolerance;
    params
}

struct Certified {
    modular: Certificate,
    strong: Option<Certificate>,
}

impl Certified {
    fn verdict(&self) -> bool {
        self.modular.verdict && self.strong.as_ref().is_none_or(|c| c.verdict)
    }

    fn to_json(&self) -> Value {
        json!({
            "verdict": self.verdict(),
            "eps0": self.modular.eps0,
            "eps0_module": self.modular.eps0_module,
            "modular": self.modular,
            "strong": self.strong,
        })
    }
}

fn certify(config: &RunConfig, model: &ProcessModel) -> Result<Certified, CliError> {
    let params = certify_params(config, &model.structure);
    let modular = modular_certificate(&model.structure, &params)?;
    let strong = if config.certify.strong {
        Some(strong_certificate(&model.structure, &params)?)
    } else {
        None
    };
    Ok(Certified { modular, strong })
}

fn validate_config(config: &RunConfig) -> Result<(), CliError> {
    config.budgets.validate()?;
    if config.tolerance.is_nan() || config.tolerance < 0.0 {
        return Err(config_err("tolerance must be nonnegative"));
    }
    Ok(())
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Write {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Write {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

fn write_report(
    dir: &Path,
    command: &str,
    seed: u64,
    config_echo: Value,
    results: Value,
    budgets: &Budgets,
) -> Result<PathBuf, CliError> {
    let report = json!({
        "command": command,
        "seed": seed,
        "config_echo": config_echo,
        "results": results,
        "budgets_used": budgets,
    });
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    write_file(dir, "report.json", &text)
}

pub fn cmd_certify(config: &RunConfig, seed: u64, out: &Path) -> Result<Outcome, CliError> {
    validate_config(config)?;
    let model = build_model(&config.structure, &config.budgets)?;
    let certified = certify(config, &model)?;
    let report = write_report(
        out,
        "certify",
        seed,
        serde_json::to_value(config)?,
        certified.to_json(),
        &config.budgets,
    )?;
    Ok(Outcome {
        success: certified.verdict(),
        summary: format!(
            "certify {}: verdict {}, eps0 = {} (module {})",
            model.name,
            certified.verdict(),
            certified.modular.eps0,
            certified.modular.eps0_module
        ),
        files: vec![report],
    })
}

fn derived_seed(seed: u64, index: u64) -> u64 {
    seed.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn events_json(events: &[DistanceEvent]) -> Value {
    json!(events.iter().take(EVENT_SAMPLE).collect::<Vec<_>>())
}

pub fn cmd_witness(config: &RunConfig, seed: u64, out: &Path) -> Result<Outcome, CliError> {
    validate_config(config)?;
    let model = build_model(&config.structure, &config.budgets)?;
    let certified = certify(config, &model)?;
    let echo = serde_json::to_value(config)?;
    if !certified.verdict() {
        let results = json!({ "certificate": certified.to_json(), "witnesses": Value::Null });
        let report = write_report(out, "witness", seed, echo, results, &config.budgets)?;
        return Ok(Outcome {
            success: false,
            summary: "witness: structure not certified".into(),
            files: vec![report],
        });
    }
    let wanted = config
        .witness
        .clone()
        .unwrap_or_else(WitnessConfig::everything);
    let structure = &model.structure;
    let alphabet = structure.alphabet();
    let eps0 = certified.modular.eps0;
    let j0 = certified.modular.j_range.0;
    let budgets = &config.budgets;
    let mut witnesses = serde_json::Map::new();
    let mut all_found = true;
    let mut found =
        |name: &str, ok: bool, value: Value, witnesses: &mut serde_json::Map<String, Value>| {
            all_found &= ok;
            witnesses.insert(name.to_string(), json!({ "found": ok, "result": value }));
        };

    if let Some(cfg) = &wanted.sensitivity {
        let module = cfg.module.unwrap_or(j0);
        let mut params = SensitivityParams::new(cfg.kappa, eps0);
        params.budget = budgets.budget();
        params.tolerance = config.tolerance;
        let mut entries = Vec::new();
        let mut ok = cfg.points > 0;
        for i in 0..cfg.points as u64 {
            let base = ModularPoint::new(module, random_sequence(alphabet, derived_seed(seed, i)))?;
            params.seed = derived_seed(seed, i + 1);
            match find_sensitivity_witness(structure, &base, &params) {
                Ok(w) => {
                    let valid =
                        validate_sensitivity(structure, &w, cfg.kappa, eps0, config.tolerance)?;
                    ok &= valid;
                    entries.push(json!({ "witness": w, "revalidated": valid }));
                }
                Err(DynamicsError::NotFound(msg)) => {
                    ok = false;
                    entries.push(json!({ "not_found": msg }));
                }
                Err(e) => return Err(e.into()),
            }
        }
        found("sensitivity", ok, json!(entries), &mut witnesses);
    }

    if let Some(cfg) = &wanted.transitivity {
        let targets = match &cfg.targets {
            Some(t) => t.clone(),
            None => {
                if cfg.max_len == 0 {
                    return Err(config_err("transitivity max_len must be positive"));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(2);
                (0..cfg.random_targets)
                    .map(|_| {
                        let len = rng.random_range(1..=cfg.max_len);
                        (0..len)
                            .map(|_| rng.random_range(1..=alphabet.size() as Symbol))
                            .collect()
                    })
                    .collect::<Vec<Vec<Symbol>>>()
            }
        };
        let longest = targets.iter().map(Vec::len).max().unwrap_or(1);
        let horizon = universal_construction_len(alphabet, longest).max(1);
        let source = ModularPoint::new(j0, universal_sequence(alphabet))?;
        let mut entries = Vec::new();
        let mut ok = true;
        for target in &targets {
            match find_transitivity_witness(&source, target, horizon) {
                Ok(w) => {
                    let landing = w.target_point(&source)?;
                    let valid = in_km_neighborhood(&source, &landing, w.shift, target.len())?;
                    ok &= valid;
                    entries.push(json!({ "witness": w, "revalidated": valid }));
                }
                Err(DynamicsError::NotFound(msg)) => {
                    ok = false;
                    entries.push(json!({ "target": target, "not_found": msg }));
                }
                Err(e) => return Err(e.into()),
            }
        }
        found(
            "transitivity",
            ok,
            json!({ "horizon": horizon, "entries": entries }),
            &mut witnesses,
        );
    }

    if let Some(cfg) = &wanted.periodic {
        if cfg.l == 0 {
            return Err(config_err("periodic l must be positive"));
        }
        let words = budgets.budget().prefixes(alphabet, cfg.l)?;
        let module = j0 + cfg.offset;
        let mut passed = 0;
        let mut sample = Vec::new();
        for word in &words {
            let target = ModularPoint::new(
                module,
                SymbolSeq::eventually_periodic(alphabet, word.clone(), vec![1])?,
            )?;
            let p = periodic_point_in_neighborhood(&target, cfg.l, cfg.offset)?;
            if p.label.is_eventually_periodic()
                && in_km_neighborhood(&p, &target, cfg.offset, cfg.l)?
            {
                passed += 1;
            }
            if sample.len() < EVENT_SAMPLE {
                sample.push(json!({ "target": word, "periodic_point": p }));
            }
        }
        let ok = passed == words.len();
        found(
            "periodic",
            ok,
            json!({ "l": cfg.l, "offset": cfg.offset, "targets": words.len(), "passed": passed, "sample": sample }),
            &mut witnesses,
        );
    }

    if let Some(cfg) = &wanted.unpredictability {
        let label = match &cfg.sequence {
            LabelChoice::Universal => universal_sequence(alphabet),
            LabelChoice::Periodic(block) => make_periodic(alphabet, block.clone())?,
        };
        let p = ModularPoint::new(j0, label)?;
        let schedule: Vec<usize> = (1..=cfg.l_max).collect();
        let horizon = cfg.horizon.unwrap_or(budgets.horizon);
        let report = check_unpredictability(&p, &schedule, horizon, None)?;
        found(
            "unpredictability",
            report.complete() && !schedule.is_empty(),
            json!(report),
            &mut witnesses,
        );
    }

    if let Some(cfg) = &wanted.liyorke {
        let (a, b) = match cfg.pair {
            PairChoice::Scrambled => scrambled_pair(alphabet, BlockSchedule::Doubling),
            PairChoice::Constant => (
                make_periodic(alphabet, vec![1])?,
                make_periodic(alphabet, vec![1])?,
            ),
        };
        let mut params = LiYorkeParams::new(
            cfg.horizon.unwrap_or(budgets.horizon),
            cfg.kappa,
            cfg.eps.unwrap_or(eps0),
        );
        params.tolerance = config.tolerance;
        let report = liyorke_report(
            structure,
            &ModularPoint::new(j0, a)?,
            &ModularPoint::new(j0, b)?,
            &params,
        )?;
        let ok = report.proximal_count > 0 && report.separated_count > 0;
        found(
            "liyorke",
            ok,
            json!({
                "horizon": report.horizon,
                "kappa": report.kappa,
                "eps": report.eps,
                "proximal_count": report.proximal_count,
                "separated_count": report.separated_count,
                "proximal_first": events_json(&report.proximal),
                "separated_first": events_json(&report.separated),
            }),
            &mut witnesses,
        );
    }

    let missing: Vec<String> = witnesses
        .iter()
        .filter(|(_, v)| v["found"] == json!(false))
        .map(|(k, _)| k.clone())
        .collect();
    let results = json!({ "certificate": certified.to_json(), "witnesses": witnesses });
    let report = write_report(out, "witness", seed, echo, results, budgets)?;
    let summary = if all_found {
        "witness: every requested witness found".to_string()
    } else {
        format!("witness: not found: {}", missing.join(", "))
    };
    Ok(Outcome {
        success: all_found,
        summary,
        files: vec![report],
    })
}

fn default_prefix_len(model: &ProcessModel, budget: Budget) -> usize {
    let alphabet = model.spec.alphabet();
    (1..=6usize.min(model.grid.len()))
        .rev()
        .find(|&l| alphabet.word_count(l) <= budget.max_prefixes)
        .unwrap_or(1)
}

/// Writes the path CSV (and SVG) for a full-length realization and checks
/// that the written CSV re-parses to a path of the process.
fn emit_path(
    model: &ProcessModel,
    realization: &Realization,
    mode: PathMode,
    out: &Path,
    stem: &str,
    svg: bool,
) -> Result<(Vec<PathBuf>, bool), CliError> {
    let rows = path_vertices(realization, mode)?;
    let csv = path_csv(&rows);
    let mut files = vec![write_file(out, &format!("{stem}.csv"), &csv)?];
    let parsed = parse_path_csv(&csv).map_err(|e| config_err(e.to_string()))?;
    let revalidated = path_matches_spec(model, realization, &parsed, mode)?;
    if svg {
        let refs = [
            ReferenceLine {
                slope: 1.0,
                color: "#c0392b",
            },
            ReferenceLine {
                slope: -1.0,
                color: "#2c7fb8",
            },
        ];
        let title = format!("{} realization, seed {}", model.name, realization.seed);
        files.push(write_file(
            out,
            &format!("{stem}.svg"),
            &svg_polyline(&rows, &refs, &title),
        )?);
    }
    Ok((files, revalidated))
}

pub fn cmd_simulate(
    config: &RunConfig,
    seed: u64,
    out: &Path,
    svg: bool,
) -> Result<Outcome, CliError> {
    validate_config(config)?;
    let model = build_model(&config.structure, &config.budgets)?;
    let budget = config.budgets.budget();
    let n_samples = config
        .simulate
        .n_samples
        .unwrap_or(config.budgets.n_samples);
    let prefix_len = config
        .simulate
        .prefix_len
        .unwrap_or_else(|| default_prefix_len(&model, budget));
    let equivalence = equivalence_report(&model, n_samples, prefix_len, seed, budget)?;
    let realization = sample_stream(&model.spec, &model.grid, seed, 0, model.grid.len())?;
    let (mut files, revalidated) = emit_path(
        &model,
        &realization,
        config.simulate.path_mode,
        out,
        "paths",
        svg,
    )?;
    let success = equivalence.valid_prefixes == equivalence.samples && revalidated;
    let mut budgets = config.budgets;
    budgets.n_samples = n_samples;
    let results = json!({
        "process": model.name,
        "probabilities": model.spec.probabilities(),
        "equivalence": equivalence,
        "path": { "stream": 0, "symbols": realization.symbols, "csv_revalidated": revalidated },
    });
    files.push(write_report(
        out,
        "simulate",
        seed,
        serde_json::to_value(config)?,
        results,
        &budgets,
    )?);
    Ok(Outcome {
        success,
        summary: format!(
            "simulate {}: {} samples, valid fraction {}, coverage {}/{}",
            model.name,
            equivalence.samples,
            equivalence.valid_prefix_fraction,
            equivalence.coverage,
            equivalence.possible_prefixes
        ),
        files,
    })
}

/// Config used by `example <id>`.
pub fn example_config(id: u8) -> Result<RunConfig, CliError> {
    let structure = match id {
        1 => StructureConfig::FunctionFamily {
            functions: vec![
                Affine {
                    slope: 1.0,
                    intercept: 0.0,
                },
                Affine {
                    slope: 1.0,
                    intercept: 5.0,
                },
                Affine {
                    slope: -1.0,
                    intercept: 0.0,
                },
            ],
            probabilities: vec![0.2, 0.3, 0.5],
            grid: GridConfig::default(),
        },
        2 => StructureConfig::PlusMinusT,
        3 => StructureConfig::IntervalFunctions {
            i_range: default_i_range(),
        },
        _ => {
            return Err(config_err(format!(
                "unknown example {id}; expected 1, 2 or 3"
            )))
        }
    };
    Ok(RunConfig {
        structure,
        seed: None,
        budgets: Budgets::default(),
        tolerance: DEFAULT_TOLERANCE,
        certify: CertifyConfig::default(),
        witness: None,
        simulate: SimulateConfig::default(),
    })
}

pub fn cmd_example(id: u8, seed: u64, out: &Path, svg: bool) -> Result<Outcome, CliError> {
    let config = example_config(id)?;
    let model = build_model(&config.structure, &config.budgets)?;
    let certified = certify(&config, &model)?;
    let budget = config.budgets.budget();
    let realization = sample_stream(&model.spec, &model.grid, seed, 0, model.grid.len())?;
    let (mut files, revalidated) =
        emit_path(&model, &realization, PathMode::Vertices, out, "path", svg)?;
    let prefix_len = default_prefix_len(&model, budget);
    let equivalence =
        equivalence_report(&model, config.budgets.n_samples, prefix_len, seed, budget)?;
    let success =
        certified.verdict() && revalidated && equivalence.valid_prefixes == equivalence.samples;
    let results = json!({
        "example": id,
        "certificate": certified.to_json(),
        "equivalence": equivalence,
        "path": { "stream": 0, "symbols": realization.symbols, "csv_revalidated": revalidated },
    });
    files.push(write_report(
        out,
        "example",
        seed,
        serde_json::to_value(&config)?,
        results,
        &config.budgets,
    )?);
    Ok(Outcome {
        success,
        summary: format!(
            "example {id} ({}): certificate {}, eps0 = {}, {} path rows",
            model.name,
            certified.verdict(),
            certified.modular.eps0,
            path_vertices(&realization, PathMode::Vertices)?.len()
        ),
        files,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_global_flags_after_subcommand() {
        let cli =
            Cli::try_parse_from(["modchaos", "example", "2", "--seed", "7", "--svg"]).unwrap();
        assert!(matches!(cli.command, Command::Example { id: 2 }));
        assert_eq!(cli.common.seed, Some(7));
        assert!(cli.common.svg);
    }

    #[test]
    fn rejects_unknown_example() {
        assert!(Cli::try_parse_from(["modchaos", "example", "7"]).is_err());
        assert!(example_config(7).is_err());
    }

    #[test]
    fn config_defaults() {
        let c: RunConfig =
            serde_json::from_str(r#"{"structure":{"kind":"plus-minus-t"}}"#).unwrap();
        assert_eq!(c.budgets.max_prefixes, 256);
        assert_eq!(c.certify.depth, 1);
        assert!(c.witness.is_none());
        let bad = serde_json::from_str::<RunConfig>(r#"{"structure":{"kind":"nope"}}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn inline_longest_ancestor() {
        let cfg: StructureConfig = serde_json::from_str(
            r#"{"kind":"inline","alphabet":2,"modules":[{"cells":[
                {"prefix":[],"set":{"points":[[0.0],[1.0]]}},
                {"prefix":[1],"set":{"points":[[0.0]]}},
                {"prefix":[2],"set":{"points":[[1.0]]}}]}]}"#,
        )
        .unwrap();
        let model = build_model(&cfg, &Budgets::default()).unwrap();
        let m = model.structure.module(1).unwrap();
        assert_eq!(m.cell(&[1, 2, 2]).unwrap(), SetDescriptor::point(0.0));
        assert_eq!(m.cell(&[]).unwrap().cardinality(), Some(2));
        assert!(model.structure.module(2).is_err());
    }

    #[test]
    fn inline_requires_root_cell() {
        let cfg: StructureConfig =
            serde_json::from_str(r#"{"kind":"inline","alphabet":2,"modules":[{"cells":[{"prefix":[1],"set":{"points":[[0.0]]}}]}]}"#)
                .unwrap();
        assert!(matches!(
            build_model(&cfg, &Budgets::default()),
            Err(CliError::Config(_))
        ));
    }
}
