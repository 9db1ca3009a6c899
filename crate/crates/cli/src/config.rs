//! Declarative pipeline configuration: `key = value` lines under
//! `[section]` headers with `#` comments. Unknown keys are errors, missing
//! keys fall back to documented defaults, and every parse failure carries
//! its line number.

use sonogen_core::styletrans::{LossWeights, ModelConfig};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: malformed line '{text}' (expected key = value)")]
    MalformedLine { line: usize, text: String },
    #[error("line {line}: duplicate key '{key}'")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: key '{key}': expected {expected}, got '{value}'")]
    TypeMismatch {
        line: usize,
        key: String,
        expected: &'static str,
        value: String,
    },
    #[error("line {line}: key '{key}': value {value} out of range ({constraint})")]
    OutOfRange {
        line: usize,
        key: String,
        value: String,
        constraint: &'static str,
    },
    #[error("unknown keys: {}", keys.iter().map(|(k, l)| format!("'{k}' (line {l})")).collect::<Vec<_>>().join(", "))]
    UnknownKeys { keys: Vec<(String, usize)> },
    #[error("required path {what} ({path}) does not exist")]
    MissingPath { what: &'static str, path: PathBuf },
    #[error("i/o error reading config: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ConfigError>;

/// Which style frame each content image is paired with during batch
/// transfer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StylePolicy {
    /// Content image `i` takes style frame `i mod n_styles`.
    RoundRobin,
    /// Every content image takes the given style index.
    Fixed(usize),
}

impl fmt::Display for StylePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StylePolicy::RoundRobin => write!(f, "round_robin"),
            StylePolicy::Fixed(k) => write!(f, "fixed:{k}"),
        }
    }
}

/// Full pipeline configuration (see `dump` for the canonical key set).
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    // [paths]
    pub content_dir: PathBuf,
    pub style_dir: PathBuf,
    pub trimap_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub pristine_dir: Option<PathBuf>,
    pub pairs_csv: Option<PathBuf>,
    pub dbcnn_csv: Option<PathBuf>,
    // [preprocess]
    pub sigma: f64,
    /// 0 means "follow the model's image side".
    pub target_size: usize,
    pub noise_intensity: f64,
    // [model]
    pub model: ModelConfig,
    // [train]
    pub lr: f64,
    pub iterations: usize,
    pub seed: u64,
    pub weights: LossWeights,
    pub checkpoint_every: usize,
    // [transfer]
    pub style_policy: StylePolicy,
    // [evaluate]
    pub cosine_side: usize,
    pub niqe_patch: usize,
    pub niqe_quantile: f64,
    pub ridge_lambda: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            content_dir: PathBuf::from("data/content"),
            style_dir: PathBuf::from("data/style"),
            trimap_dir: None,
            output_dir: PathBuf::from("out"),
            pristine_dir: None,
            pairs_csv: None,
            dbcnn_csv: None,
            sigma: 1.0,
            target_size: 0,
            noise_intensity: 0.0,
            model: ModelConfig::default(),
            lr: 1e-3,
            iterations: 300,
            seed: 1,
            weights: LossWeights::default(),
            checkpoint_every: 50,
            style_policy: StylePolicy::RoundRobin,
            cosine_side: 64,
            niqe_patch: 16,
            niqe_quantile: 0.75,
            ridge_lambda: 1.0,
        }
    }
}

struct RawConfig {
    entries: BTreeMap<String, (String, usize)>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (i, raw_line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = match raw_line.find('#') {
                Some(p) => &raw_line[..p],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = line[1..line.len() - 1].trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::MalformedLine {
                    line: line_no,
                    text: line.to_string(),
                });
            };
            let full_key = if section.is_empty() {
                key.trim().to_string()
            } else {
                format!("{section}.{}", key.trim())
            };
            if entries
                .insert(full_key.clone(), (value.trim().to_string(), line_no))
                .is_some()
            {
                return Err(ConfigError::DuplicateKey {
                    line: line_no,
                    key: full_key,
                });
            }
        }
        Ok(Self { entries })
    }

    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.remove(key)
    }
}

fn parse_f64(key: &str, raw: (String, usize)) -> Result<(f64, usize)> {
    raw.0
        .parse::<f64>()
        .map(|v| (v, raw.1))
        .map_err(|_| ConfigError::TypeMismatch {
            line: raw.1,
            key: key.to_string(),
            expected: "a number",
            value: raw.0,
        })
}

fn parse_usize(key: &str, raw: (String, usize)) -> Result<(usize, usize)> {
    raw.0
        .parse::<usize>()
        .map(|v| (v, raw.1))
        .map_err(|_| ConfigError::TypeMismatch {
            line: raw.1,
            key: key.to_string(),
            expected: "a non-negative integer",
            value: raw.0,
        })
}

fn parse_u64(key: &str, raw: (String, usize)) -> Result<(u64, usize)> {
    raw.0
        .parse::<u64>()
        .map(|v| (v, raw.1))
        .map_err(|_| ConfigError::TypeMismatch {
            line: raw.1,
            key: key.to_string(),
            expected: "a non-negative integer",
            value: raw.0,
        })
}

fn range_check(
    key: &str,
    pair: (f64, usize),
    ok: impl Fn(f64) -> bool,
    constraint: &'static str,
) -> Result<f64> {
    if ok(pair.0) {
        Ok(pair.0)
    } else {
        Err(ConfigError::OutOfRange {
            line: pair.1,
            key: key.to_string(),
            value: pair.0.to_string(),
            constraint,
        })
    }
}

fn range_check_usize(
    key: &str,
    pair: (usize, usize),
    ok: impl Fn(usize) -> bool,
    constraint: &'static str,
) -> Result<usize> {
    if ok(pair.0) {
        Ok(pair.0)
    } else {
        Err(ConfigError::OutOfRange {
            line: pair.1,
            key: key.to_string(),
            value: pair.0.to_string(),
            constraint,
        })
    }
}

/// Parse configuration text. Unknown keys are collected into one error;
/// missing keys take the defaults shown by [`PipelineConfig::dump`].
pub fn parse_config_str(text: &str) -> Result<PipelineConfig> {
    let mut raw = RawConfig::parse(text)?;
    let mut cfg = PipelineConfig::default();

    if let Some(v) = raw.take("paths.content_dir") {
        cfg.content_dir = PathBuf::from(v.0);
    }
    if let Some(v) = raw.take("paths.style_dir") {
        cfg.style_dir = PathBuf::from(v.0);
    }
    if let Some(v) = raw.take("paths.trimap_dir") {
        cfg.trimap_dir = (!v.0.is_empty()).then(|| PathBuf::from(v.0));
    }
    if let Some(v) = raw.take("paths.output_dir") {
        cfg.output_dir = PathBuf::from(v.0);
    }
    if let Some(v) = raw.take("paths.pristine_dir") {
        cfg.pristine_dir = (!v.0.is_empty()).then(|| PathBuf::from(v.0));
    }
    if let Some(v) = raw.take("paths.pairs_csv") {
        cfg.pairs_csv = (!v.0.is_empty()).then(|| PathBuf::from(v.0));
    }
    if let Some(v) = raw.take("paths.dbcnn_csv") {
        cfg.dbcnn_csv = (!v.0.is_empty()).then(|| PathBuf::from(v.0));
    }

    if let Some(v) = raw.take("preprocess.sigma") {
        cfg.sigma = range_check("preprocess.sigma", parse_f64("preprocess.sigma", v)?, |x| {
            x >= 0.0 && x.is_finite()
        }, "sigma >= 0")?;
    }
    if let Some(v) = raw.take("preprocess.target_size") {
        cfg.target_size = range_check_usize(
            "preprocess.target_size",
            parse_usize("preprocess.target_size", v)?,
            |x| x == 0 || x >= 8,
            "0 (follow model) or >= 8",
        )?;
    }
    if let Some(v) = raw.take("preprocess.noise_intensity") {
        cfg.noise_intensity = range_check(
            "preprocess.noise_intensity",
            parse_f64("preprocess.noise_intensity", v)?,
            |x| x >= 0.0 && x.is_finite(),
            "intensity >= 0",
        )?;
    }

    if let Some(v) = raw.take("model.image_side") {
        cfg.model.image_side =
            range_check_usize("model.image_side", parse_usize("model.image_side", v)?, |x| x >= 8, "side >= 8")?;
    }
    if let Some(v) = raw.take("model.patch") {
        cfg.model.patch =
            range_check_usize("model.patch", parse_usize("model.patch", v)?, |x| x >= 1, "patch >= 1")?;
    }
    if let Some(v) = raw.take("model.embed_dim") {
        cfg.model.embed_dim = range_check_usize(
            "model.embed_dim",
            parse_usize("model.embed_dim", v)?,
            |x| x >= 2,
            "embed dim >= 2",
        )?;
    }
    if let Some(v) = raw.take("model.heads") {
        cfg.model.heads =
            range_check_usize("model.heads", parse_usize("model.heads", v)?, |x| x >= 1, "heads >= 1")?;
    }
    if let Some(v) = raw.take("model.enc_layers") {
        cfg.model.enc_layers = parse_usize("model.enc_layers", v)?.0;
    }
    if let Some(v) = raw.take("model.dec_layers") {
        cfg.model.dec_layers = parse_usize("model.dec_layers", v)?.0;
    }
    if let Some(v) = raw.take("model.cape_grid") {
        cfg.model.cape_grid = range_check_usize(
            "model.cape_grid",
            parse_usize("model.cape_grid", v)?,
            |x| x >= 1,
            "cape grid >= 1",
        )?;
    }

    if let Some(v) = raw.take("train.lr") {
        cfg.lr = range_check("train.lr", parse_f64("train.lr", v)?, |x| x >= 0.0 && x.is_finite(), "lr >= 0")?;
    }
    if let Some(v) = raw.take("train.iterations") {
        cfg.iterations = range_check_usize(
            "train.iterations",
            parse_usize("train.iterations", v)?,
            |x| x >= 1,
            "iterations >= 1",
        )?;
    }
    if let Some(v) = raw.take("train.seed") {
        cfg.seed = parse_u64("train.seed", v)?.0;
    }
    if let Some(v) = raw.take("train.lambda_content") {
        cfg.weights.content = range_check(
            "train.lambda_content",
            parse_f64("train.lambda_content", v)?,
            |x| x >= 0.0 && x.is_finite(),
            "lambda >= 0",
        )?;
    }
    if let Some(v) = raw.take("train.lambda_style") {
        cfg.weights.style = range_check(
            "train.lambda_style",
            parse_f64("train.lambda_style", v)?,
            |x| x >= 0.0 && x.is_finite(),
            "lambda >= 0",
        )?;
    }
    if let Some(v) = raw.take("train.lambda_id1") {
        cfg.weights.identity_pixel = range_check(
            "train.lambda_id1",
            parse_f64("train.lambda_id1", v)?,
            |x| x >= 0.0 && x.is_finite(),
            "lambda >= 0",
        )?;
    }
    if let Some(v) = raw.take("train.lambda_id2") {
        cfg.weights.identity_feature = range_check(
            "train.lambda_id2",
            parse_f64("train.lambda_id2", v)?,
            |x| x >= 0.0 && x.is_finite(),
            "lambda >= 0",
        )?;
    }
    if let Some(v) = raw.take("train.checkpoint_every") {
        cfg.checkpoint_every = range_check_usize(
            "train.checkpoint_every",
            parse_usize("train.checkpoint_every", v)?,
            |x| x >= 1,
            "checkpoint interval >= 1",
        )?;
    }

    if let Some(v) = raw.take("transfer.style_policy") {
        cfg.style_policy = if v.0 == "round_robin" {
            StylePolicy::RoundRobin
        } else if let Some(idx) = v.0.strip_prefix("fixed:") {
            StylePolicy::Fixed(idx.parse().map_err(|_| ConfigError::TypeMismatch {
                line: v.1,
                key: "transfer.style_policy".to_string(),
                expected: "round_robin or fixed:<index>",
                value: v.0.clone(),
            })?)
        } else {
            return Err(ConfigError::TypeMismatch {
                line: v.1,
                key: "transfer.style_policy".to_string(),
                expected: "round_robin or fixed:<index>",
                value: v.0,
            });
        };
    }

    if let Some(v) = raw.take("evaluate.cosine_side") {
        cfg.cosine_side = range_check_usize(
            "evaluate.cosine_side",
            parse_usize("evaluate.cosine_side", v)?,
            |x| x >= 8,
            "side >= 8",
        )?;
    }
    if let Some(v) = raw.take("evaluate.niqe_patch") {
        cfg.niqe_patch = range_check_usize(
            "evaluate.niqe_patch",
            parse_usize("evaluate.niqe_patch", v)?,
            |x| x >= 16 && x % 2 == 0,
            "even and >= 16",
        )?;
    }
    if let Some(v) = raw.take("evaluate.niqe_quantile") {
        cfg.niqe_quantile = range_check(
            "evaluate.niqe_quantile",
            parse_f64("evaluate.niqe_quantile", v)?,
            |x| (0.0..1.0).contains(&x),
            "quantile in [0,1)",
        )?;
    }
    if let Some(v) = raw.take("evaluate.ridge_lambda") {
        cfg.ridge_lambda = range_check(
            "evaluate.ridge_lambda",
            parse_f64("evaluate.ridge_lambda", v)?,
            |x| x > 0.0 && x.is_finite(),
            "lambda > 0",
        )?;
    }

    if !raw.entries.is_empty() {
        let keys = raw
            .entries
            .into_iter()
            .map(|(k, (_, line))| (k, line))
            .collect();
        return Err(ConfigError::UnknownKeys { keys });
    }

    Ok(cfg)
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<PipelineConfig> {
    parse_config_str(&std::fs::read_to_string(path)?)
}

fn opt_path(p: &Option<PathBuf>) -> String {
    p.as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_default()
}

impl PipelineConfig {
    /// Canonical text form; `parse(dump(cfg)) == cfg`.
    pub fn dump(&self) -> String {
        let m = &self.model;
        let w = &self.weights;
        format!(
            "[paths]\n\
             content_dir = {}\n\
             style_dir = {}\n\
             trimap_dir = {}\n\
             output_dir = {}\n\
             pristine_dir = {}\n\
             pairs_csv = {}\n\
             dbcnn_csv = {}\n\
             \n[preprocess]\n\
             sigma = {}\n\
             target_size = {}\n\
             noise_intensity = {}\n\
             \n[model]\n\
             image_side = {}\n\
             patch = {}\n\
             embed_dim = {}\n\
             heads = {}\n\
             enc_layers = {}\n\
             dec_layers = {}\n\
             cape_grid = {}\n\
             \n[train]\n\
             lr = {}\n\
             iterations = {}\n\
             seed = {}\n\
             lambda_content = {}\n\
             lambda_style = {}\n\
             lambda_id1 = {}\n\
             lambda_id2 = {}\n\
             checkpoint_every = {}\n\
             \n[transfer]\n\
             style_policy = {}\n\
             \n[evaluate]\n\
             cosine_side = {}\n\
             niqe_patch = {}\n\
             niqe_quantile = {}\n\
             ridge_lambda = {}\n",
            self.content_dir.display(),
            self.style_dir.display(),
            opt_path(&self.trimap_dir),
            self.output_dir.display(),
            opt_path(&self.pristine_dir),
            opt_path(&self.pairs_csv),
            opt_path(&self.dbcnn_csv),
            self.sigma,
            self.target_size,
            self.noise_intensity,
            m.image_side,
            m.patch,
            m.embed_dim,
            m.heads,
            m.enc_layers,
            m.dec_layers,
            m.cape_grid,
            self.lr,
            self.iterations,
            self.seed,
            w.content,
            w.style,
            w.identity_pixel,
            w.identity_feature,
            self.checkpoint_every,
            self.style_policy,
            self.cosine_side,
            self.niqe_patch,
            self.niqe_quantile,
            self.ridge_lambda,
        )
    }

    /// Effective preprocessing target side.
    pub fn target_side(&self) -> usize {
        if self.target_size == 0 {
            self.model.image_side
        } else {
            self.target_size
        }
    }

    /// FNV-1a hash of the canonical dump plus seed; names the report
    /// directory so identical (config, seed) runs land in identical trees.
    pub fn run_id(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.dump().bytes().chain(self.seed.to_le_bytes()) {
            h ^= b as u64;
            h = h.wrapping_mul(0x1000_0000_01b3);
        }
        format!("{h:016x}")
    }

    pub fn require_dir(&self, what: &'static str, path: &Path) -> Result<()> {
        if !path.is_dir() {
            return Err(ConfigError::MissingPath {
                what,
                path: path.to_path_buf(),
            });
        }
        Ok(())
    }

    pub fn require_file(&self, what: &'static str, path: &Path) -> Result<()> {
        if !path.is_file() {
            return Err(ConfigError::MissingPath {
                what,
                path: path.to_path_buf(),
            });
        }
        Ok(())
    }
}
