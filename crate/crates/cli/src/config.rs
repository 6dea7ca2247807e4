//! Experiment configuration: a TOML document with one table per block,
//! optionally patched by `--section.key=value` overrides.

use std::path::{Path, PathBuf};

use permnqs_core::analytic::SystemSize;
use permnqs_core::ansatz::{Activation, AnsatzParams};
use permnqs_core::model::ModelSpec;
use permnqs_core::sampler::{SamplerConfig, SamplingMode};
use permnqs_core::trainer::{initial_params, TrainerConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Environment variable that sets the default output directory.
pub const OUTPUT_DIR_ENV: &str = "PERMNQS_OUTPUT_DIR";

/// Output directory used when neither the config nor the environment names one.
pub const DEFAULT_OUTPUT_DIR: &str = "runs";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelBlock,
    pub ansatz: AnsatzBlock,
    pub trainer: TrainerBlock,
    pub sampler: SamplerConfig,
    pub output: OutputBlock,
    pub ed: EdBlock,
    pub analytic: AnalyticBlock,
    pub scan: ScanBlock,
    pub bench: BenchBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelBlock {
    #[serde(rename = "L")]
    pub sites: usize,
    #[serde(rename = "J")]
    pub coupling: f64,
    #[serde(rename = "g")]
    pub field: f64,
    pub alpha: f64,
}

impl Default for ModelBlock {
    fn default() -> Self {
        Self {
            sites: 12,
            coupling: 1.0,
            field: 1.0,
            alpha: 0.0,
        }
    }
}

impl ModelBlock {
    pub fn build(&self) -> Result<ModelSpec, CliError> {
        Ok(ModelSpec::new(self.sites, self.coupling, self.field, self.alpha)?)
    }

    /// The model at another size or field, validated the same way.
    pub fn build_with(&self, sites: usize, field: f64) -> Result<ModelSpec, CliError> {
        Ok(ModelSpec::new(sites, self.coupling, field, self.alpha)?)
    }

    /// Checks `J` and `g` alone, for subcommands that take sizes elsewhere.
    pub fn check_couplings(&self) -> Result<(), CliError> {
        ModelSpec::new(2, self.coupling, self.field, 0.0)?;
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(CliError::field("model.alpha", "must be finite and non-negative"));
        }
        if self.coupling == 0.0 {
            return Err(CliError::field("model.J", "closed forms need J > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnsatzBlock {
    #[serde(rename = "K")]
    pub hidden: usize,
    pub activation: Activation,
    /// Explicit initial weights; overrides the random initializer.
    pub weights: Option<Vec<f64>>,
    /// Parameter checkpoint to start from; overrides `weights`.
    pub checkpoint: Option<PathBuf>,
}

impl Default for AnsatzBlock {
    fn default() -> Self {
        Self {
            hidden: 1,
            activation: Activation::LogCosh,
            weights: None,
            checkpoint: None,
        }
    }
}

impl AnsatzBlock {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.hidden == 0 {
            return Err(CliError::field("ansatz.K", "must be at least 1, got 0"));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.hidden {
                return Err(CliError::field(
                    "ansatz.weights",
                    format!("has {} entries but K = {}", w.len(), self.hidden),
                ));
            }
            AnsatzParams::new(w.clone(), self.activation)
                .map_err(|e| CliError::field("ansatz.weights", e))?;
        }
        Ok(())
    }

    /// Initial parameters: checkpoint, then explicit weights, then a seeded
    /// random draw.
    pub fn initial_params(&self, seed: u64) -> Result<AnsatzParams, CliError> {
        self.validate()?;
        if let Some(path) = &self.checkpoint {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::io_path("read checkpoint", path, e))?;
            let params = AnsatzParams::from_checkpoint(&text)
                .map_err(|e| CliError::field("ansatz.checkpoint", e))?;
            if params.hidden_units() != self.hidden {
                return Err(CliError::field(
                    "ansatz.checkpoint",
                    format!("holds K = {} but ansatz.K = {}", params.hidden_units(), self.hidden),
                ));
            }
            return Ok(params);
        }
        if let Some(w) = &self.weights {
            return AnsatzParams::new(w.clone(), self.activation)
                .map_err(|e| CliError::field("ansatz.weights", e));
        }
        initial_params(self.hidden, self.activation, seed).map_err(|e| CliError::field("ansatz", e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerBlock {
    pub n_iterations: usize,
    pub learning_rate: f64,
    pub sr_shift: f64,
    pub seed: u64,
    pub checkpoint_every: usize,
    /// Compute an exact reference energy (and hence `eps_rel`) when feasible.
    pub ed_reference: bool,
}

impl Default for TrainerBlock {
    fn default() -> Self {
        let core = TrainerConfig::default();
        Self {
            n_iterations: core.n_iterations,
            learning_rate: core.learning_rate,
            sr_shift: core.sr_shift,
            seed: core.seed,
            checkpoint_every: core.checkpoint_every,
            ed_reference: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    /// Parent directory of run directories. Falls back to the environment.
    pub directory: Option<PathBuf>,
    pub run_id: String,
    /// Write elapsed seconds to `train.csv`; when false the column is 0 and
    /// reruns are byte-identical.
    pub record_wallclock: bool,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            directory: None,
            run_id: "run".to_string(),
            record_wallclock: true,
        }
    }
}

impl OutputBlock {
    pub fn validate(&self) -> Result<(), CliError> {
        let id = self.run_id.as_str();
        if id.is_empty() || id == "." || id == ".." || id.contains(['/', '\\']) {
            return Err(CliError::field(
                "output.run_id",
                format!("`{id}` is not a plain directory name"),
            ));
        }
        Ok(())
    }

    pub fn run_dir(&self) -> PathBuf {
        let base = self
            .directory
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
        base.join(&self.run_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdChoice {
    /// Dicke sector at `α = 0`, full basis otherwise.
    #[default]
    Auto,
    Full,
    Dense,
    Dicke,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdBlock {
    /// Sizes to diagonalize; empty means `model.L`.
    pub sizes: Vec<usize>,
    /// Transverse fields; empty means `model.g`.
    pub fields: Vec<f64>,
    pub method: EdChoice,
}

/// A system size in a config file: an integer or `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SizeEntry {
    Finite(usize),
    Label(String),
}

impl SizeEntry {
    pub fn resolve(&self, field: &str) -> Result<SystemSize, CliError> {
        match self {
            SizeEntry::Finite(l) => Ok(SystemSize::Finite(*l)),
            SizeEntry::Label(s) => s.parse().map_err(|e: String| CliError::field(field, e)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticBlock {
    /// Sizes to evaluate; empty means `model.L` and the thermodynamic limit.
    pub sizes: Vec<SizeEntry>,
    /// Extra weights at which energy and fluctuations are also evaluated.
    pub weights: Vec<f64>,
}

/// An explicit list of values or an inclusive arithmetic range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl Grid {
    pub fn values(&self, field: &str) -> Result<Vec<f64>, CliError> {
        let values = match *self {
            Grid::List(ref v) => v.clone(),
            Grid::Range { start, stop, step } => {
                if !(step > 0.0 && step.is_finite() && start.is_finite() && stop.is_finite()) {
                    return Err(CliError::field(field, "range needs finite bounds and step > 0"));
                }
                if stop < start {
                    Vec::new()
                } else {
                    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
                    // Round to 12 decimals so 0.1 steps print as 0.3.
                    (0..n)
                        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
                        .collect()
                }
            }
        };
        if values.is_empty() {
            return Err(CliError::field(field, "grid is empty"));
        }
        Ok(values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanBlock {
    pub alpha: Grid,
    pub sizes: Vec<usize>,
    /// Append thermodynamic-limit rows (`L = inf`).
    pub include_limit: bool,
}

impl Default for ScanBlock {
    fn default() -> Self {
        Self {
            alpha: Grid::Range {
                start: 0.0,
                stop: 3.0,
                step: 0.1,
            },
            sizes: vec![101, 1001, 10001],
            include_limit: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchBlock {
    /// Timed evaluations per estimator; the median is reported.
    pub repeats: usize,
}

impl Default for BenchBlock {
    fn default() -> Self {
        Self { repeats: 5 }
    }
}

impl ExperimentConfig {
    /// Reads a TOML config (or the `config` member of a `meta.json` run
    /// record) and applies dotted overrides. `None` starts from defaults.
    pub fn load(path: Option<&Path>, overrides: &[Override]) -> Result<Self, CliError> {
        let base = match path {
            None => ExperimentConfig::default(),
            Some(p) => {
                let text =
                    std::fs::read_to_string(p).map_err(|e| CliError::io_path("read config", p, e))?;
                if p.extension().is_some_and(|e| e == "json") {
                    Self::from_run_record(&text, p)?
                } else {
                    toml::from_str(&text)
                        .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
                }
            }
        };
        if overrides.is_empty() {
            return Ok(base);
        }
        let mut table = toml::Table::try_from(&base)
            .map_err(|e| CliError::Config(format!("cannot re-encode config: {e}")))?;
        for o in overrides {
            o.apply(&mut table)?;
        }
        table
            .try_into()
            .map_err(|e| CliError::Config(format!("after overrides: {e}")))
    }

    fn from_run_record(text: &str, path: &Path) -> Result<Self, CliError> {
        let record: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let config = record.get("config").ok_or_else(|| {
            CliError::Config(format!("{}: run record has no `config` member", path.display()))
        })?;
        serde_json::from_value(config.clone())
            .map_err(|e| CliError::Config(format!("{}: config: {e}", path.display())))
    }

    pub fn trainer_config(&self) -> TrainerConfig {
        TrainerConfig {
            n_iterations: self.trainer.n_iterations,
            learning_rate: self.trainer.learning_rate,
            sr_shift: self.trainer.sr_shift,
            sampler: self.sampler.clone(),
            seed: self.trainer.seed,
            checkpoint_every: self.trainer.checkpoint_every,
        }
    }

    /// Sampler settings that can be rejected before any work starts.
    pub fn validate_sampler(&self, model: &ModelSpec) -> Result<(), CliError> {
        self.validate_sampler_for(model, &self.sampler)
    }

    pub fn validate_sampler_for(&self, model: &ModelSpec, s: &SamplerConfig) -> Result<(), CliError> {
        match s.mode {
            SamplingMode::ExactFull => {
                if model.sites() > s.enumeration_cap.min(62) {
                    return Err(CliError::Resource(format!(
                        "sampler.mode: exact-full enumeration of L = {} exceeds \
                         sampler.enumeration_cap = {}",
                        model.sites(),
                        s.enumeration_cap
                    )));
                }
            }
            SamplingMode::ExactSector => {
                if !model.is_fully_connected() {
                    return Err(CliError::field(
                        "sampler.mode",
                        format!("exact-sector requires alpha = 0, got {}", model.alpha()),
                    ));
                }
            }
            SamplingMode::Metropolis => {
                if s.n_chains == 0 {
                    return Err(CliError::field("sampler.n_chains", "must be at least 1"));
                }
                if s.n_sweeps == 0 {
                    return Err(CliError::field("sampler.n_sweeps", "must be at least 1"));
                }
            }
        }
        Ok(())
    }
}

/// One `--section.key=value` command-line override.
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub path: Vec<String>,
    pub value: toml::Value,
}

impl Override {
    /// Parses `section.key=value` (without the leading dashes). The value is
    /// read as a TOML literal, falling back to a bare string.
    pub fn parse(spec: &str) -> Result<Self, CliError> {
        let (key, raw) = spec.split_once('=').ok_or_else(|| {
            CliError::Config(format!("override `--{spec}` must have the form --section.key=value"))
        })?;
        let path: Vec<String> = key.split('.').map(str::to_string).collect();
        if path.len() < 2 || path.iter().any(String::is_empty) {
            return Err(CliError::Config(format!(
                "override `--{spec}` must name a dotted path such as --model.L"
            )));
        }
        let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        Ok(Self { path, value })
    }

    /// Whether a raw argument looks like an override (`--a.b=...`).
    pub fn matches(arg: &str) -> bool {
        arg.strip_prefix("--")
            .and_then(|rest| rest.split_once('='))
            .is_some_and(|(key, _)| key.contains('.'))
    }

    fn apply(&self, table: &mut toml::Table) -> Result<(), CliError> {
        let (last, parents) = self.path.split_last().expect("non-empty path");
        let mut cursor = table;
        for (depth, part) in parents.iter().enumerate() {
            let entry = cursor
                .entry(part.clone())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            cursor = entry.as_table_mut().ok_or_else(|| {
                CliError::Config(format!(
                    "override --{}: `{}` is not a section",
                    self.path.join("."),
                    self.path[..=depth].join(".")
                ))
            })?;
        }
        cursor.insert(last.clone(), self.value.clone());
        Ok(())
    }
}

/// Splits raw arguments into overrides and everything else.
pub fn extract_overrides(args: Vec<String>) -> Result<(Vec<String>, Vec<Override>), CliError> {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    for arg in args {
        if Override::matches(&arg) {
            overrides.push(Override::parse(&arg[2..])?);
        } else {
            rest.push(arg);
        }
    }
    Ok((rest, overrides))
}
