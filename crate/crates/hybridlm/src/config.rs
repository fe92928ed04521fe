//! TOML run configuration. Architecture and training keys reuse the row
//! names of the published hyperparameter table, quoted where they contain
//! spaces or dots:
//!
//! ```toml
//! [architecture]
//! "Layers" = 2
//! "Hidden dim." = 32
//! "Attention heads" = 4
//! "Vocab size" = 259
//! "Sequence length" = 64
//! "Tied emb." = true
//!
//! [training]
//! "Global Batch Size" = 8
//! "Learning rate" = 3e-3
//! "Total tokens" = "60K"
//! "Min. learning rate" = 3e-4
//! "Warmup tokens" = 1200
//! "Decay tokens" = "60K"
//! "Decay style" = "cosine"
//! "Adam (beta1, beta2)" = [0.9, 0.95]
//! "Weight decay" = 0.0
//! "Gradient clipping" = 1.0
//!
//! [run]
//! seed = 1
//! loss_policy = "full"
//!
//! [data]
//! synthetic = { seed = 0 }
//! ```
//!
//! Token counts take an integer or a string with a `K`, `M` or `B` suffix.

use std::fmt;
use std::path::{Path, PathBuf};

use hybridlm_core::corpus::synthetic::SyntheticSpec;
use hybridlm_core::corpus::LossPolicy;
use hybridlm_core::model::ModelConfig;
use hybridlm_core::numerics::{AdamConfig, DecayStyle, Schedule};
use hybridlm_core::train::TrainRunConfig;
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A token count written as `375000000` or `"375M"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenCount(pub u64);

impl TokenCount {
    pub fn parse(s: &str) -> std::result::Result<u64, String> {
        let s = s.trim().replace(['_', ','], "");
        let (digits, mult) = match s.char_indices().last() {
            Some((i, 'K' | 'k')) => (&s[..i], 1_000),
            Some((i, 'M' | 'm')) => (&s[..i], 1_000_000),
            Some((i, 'B' | 'b')) => (&s[..i], 1_000_000_000),
            _ => (s.as_str(), 1),
        };
        let v: f64 = digits
            .trim()
            .parse()
            .map_err(|_| format!("invalid token count {s:?}"))?;
        let total = v * mult as f64;
        if !(total >= 0.0) || total.fract() != 0.0 || total > u64::MAX as f64 {
            return Err(format!("token count {s:?} is not a whole number"));
        }
        Ok(total as u64)
    }
}

impl<'de> Deserialize<'de> for TokenCount {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl de::Visitor<'_> for V {
            type Value = TokenCount;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a token count such as 60000 or \"375M\"")
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<TokenCount, E> {
                u64::try_from(v)
                    .map(TokenCount)
                    .map_err(|_| E::custom("token count must be >= 0"))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<TokenCount, E> {
                Ok(TokenCount(v))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<TokenCount, E> {
                TokenCount::parse(v).map(TokenCount).map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

impl Serialize for TokenCount {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u64(self.0)
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    #[serde(rename = "Layers")]
    pub layers: usize,
    #[serde(rename = "Hidden dim.")]
    pub hidden: usize,
    #[serde(rename = "Attention heads")]
    pub heads: usize,
    #[serde(rename = "Vocab size")]
    pub vocab_size: usize,
    /// Embedding rows including padding; defaults to the vocabulary size.
    #[serde(
        rename = "Embedding rows",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub embedding_rows: Option<usize>,
    #[serde(rename = "Sequence length")]
    pub seq_len: usize,
    #[serde(rename = "Tied emb.", default = "yes")]
    pub tied: bool,
    /// Accepted for completeness; only `GELU` is implemented.
    #[serde(
        rename = "Activation",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub activation: Option<String>,
    /// Accepted for completeness; only `Alibi` is implemented.
    #[serde(
        rename = "Position emb.",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub position: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Training {
    #[serde(rename = "Global Batch Size")]
    pub global_batch: usize,
    #[serde(rename = "Learning rate")]
    pub lr: f64,
    #[serde(rename = "Total tokens")]
    pub total_tokens: TokenCount,
    /// Defaults to the learning rate.
    #[serde(
        rename = "Min. learning rate",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub min_lr: Option<f64>,
    #[serde(rename = "Warmup tokens", default = "zero_tokens")]
    pub warmup_tokens: TokenCount,
    /// Defaults to the total token count.
    #[serde(
        rename = "Decay tokens",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub decay_tokens: Option<TokenCount>,
    #[serde(rename = "Decay style")]
    pub decay_style: DecayStyle,
    #[serde(rename = "Adam (beta1, beta2)", default = "default_betas")]
    pub betas: (f64, f64),
    #[serde(rename = "Weight decay", default)]
    pub weight_decay: f64,
    #[serde(rename = "Gradient clipping", default = "default_clip")]
    pub clip: f64,
}

fn zero_tokens() -> TokenCount {
    TokenCount(0)
}

fn default_betas() -> (f64, f64) {
    (0.9, 0.95)
}

fn default_clip() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Run {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub loss_policy: LossPolicy,
    /// Write a checkpoint every this many steps (0: only at the end).
    #[serde(default)]
    pub checkpoint_every: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Data {
    /// JSON-lines file or directory of `*.jsonl`, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_general: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_financial: Option<PathBuf>,
}

/// Settings of the sequential vs hybrid comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Regimes {
    /// Constant rate of the second sequential stage.
    #[serde(rename = "Finetune learning rate")]
    pub finetune_lr: f64,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub architecture: Architecture,
    pub training: Training,
    #[serde(default)]
    pub run: Run,
    #[serde(default)]
    pub data: Data,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regimes: Option<Regimes>,
}

/// A parsed configuration together with where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub path: PathBuf,
    pub file: RunFile,
    pub run: TrainRunConfig,
}

impl LoadedConfig {
    /// Paths in the `[data]` section are relative to the config file.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        match self.path.parent() {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }
}

pub fn parse(path: &Path, text: &str) -> Result<LoadedConfig> {
    let file: RunFile = toml::from_str(text).map_err(|e| {
        let field = e
            .span()
            .map(|s| locate(text, s.start))
            .unwrap_or_else(|| "config".into());
        Error::config(path, field, e.message())
    })?;
    let run = resolve(path, &file)?;
    Ok(LoadedConfig {
        path: path.to_path_buf(),
        file,
        run,
    })
}

pub fn load(path: &Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::input(path, e))?;
    parse(path, &text)
}

/// The key on the line holding `offset`, with its line number.
fn locate(text: &str, offset: usize) -> String {
    let offset = offset.min(text.len());
    let line_no = text[..offset].matches('\n').count() + 1;
    let line = text.lines().nth(line_no - 1).unwrap_or("");
    match line.split_once('=') {
        Some((key, _)) if !key.trim().is_empty() => format!("{} (line {line_no})", key.trim()),
        _ => format!("line {line_no}"),
    }
}

fn resolve(path: &Path, f: &RunFile) -> Result<TrainRunConfig> {
    let err = |field: &str, msg: String| Error::config(path, field, msg);
    let a = &f.architecture;
    let t = &f.training;
    if let Some(act) = a
        .activation
        .as_deref()
        .filter(|s| !s.eq_ignore_ascii_case("gelu"))
    {
        return Err(err(
            "architecture.\"Activation\"",
            format!("unsupported activation {act:?}; only GELU"),
        ));
    }
    if let Some(pos) = a
        .position
        .as_deref()
        .filter(|s| !s.eq_ignore_ascii_case("alibi"))
    {
        return Err(err(
            "architecture.\"Position emb.\"",
            format!("unsupported position embedding {pos:?}; only Alibi"),
        ));
    }
    let checks: [(&str, bool, String); 7] = [
        (
            "architecture.\"Layers\"",
            a.layers >= 1,
            "must be >= 1".into(),
        ),
        (
            "architecture.\"Attention heads\"",
            a.heads >= 1 && a.hidden.is_multiple_of(a.heads.max(1)),
            format!("must be >= 1 and divide \"Hidden dim.\" ({})", a.hidden),
        ),
        (
            "architecture.\"Vocab size\"",
            a.vocab_size >= hybridlm_core::corpus::VOCAB_SIZE,
            format!(
                "must be >= {} for the byte tokenizer",
                hybridlm_core::corpus::VOCAB_SIZE
            ),
        ),
        (
            "architecture.\"Sequence length\"",
            a.seq_len >= 2,
            "must be >= 2".into(),
        ),
        (
            "training.\"Global Batch Size\"",
            t.global_batch >= 1,
            "must be >= 1".into(),
        ),
        (
            "training.\"Total tokens\"",
            t.total_tokens.0 > 0,
            "must be > 0".into(),
        ),
        (
            "training.\"Gradient clipping\"",
            t.clip > 0.0,
            "must be > 0".into(),
        ),
    ];
    for (field, ok, msg) in checks {
        if !ok {
            return Err(err(field, msg));
        }
    }
    let model = ModelConfig {
        layers: a.layers,
        hidden: a.hidden,
        heads: a.heads,
        vocab_size: a.vocab_size,
        embedding_rows: a.embedding_rows.unwrap_or(a.vocab_size),
        seq_len: a.seq_len,
        tied_embeddings: a.tied,
    };
    model
        .validate()
        .map_err(|e| err("architecture", e.to_string()))?;
    let min_lr = t.min_lr.unwrap_or(t.lr);
    let schedule = Schedule {
        peak_lr: t.lr,
        min_lr,
        warmup_tokens: t.warmup_tokens.0,
        decay_tokens: t.decay_tokens.map_or(t.total_tokens.0, |d| d.0),
        style: t.decay_style,
    };
    schedule
        .validate()
        .map_err(|e| err("training.\"Learning rate\"", e.to_string()))?;
    let (b1, b2) = t.betas;
    if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2)) {
        return Err(err(
            "training.\"Adam (beta1, beta2)\"",
            format!("betas must lie in [0, 1), got ({b1}, {b2})"),
        ));
    }
    if !(t.weight_decay >= 0.0) {
        return Err(err("training.\"Weight decay\"", "must be >= 0".into()));
    }
    match (&f.data.corpus, &f.data.synthetic) {
        (Some(_), Some(_)) => {
            return Err(err(
                "data",
                "set either `corpus` or `synthetic`, not both".into(),
            ))
        }
        (None, None) => {
            return Err(err(
                "data",
                "one of `corpus` or `synthetic` is required".into(),
            ))
        }
        _ => {}
    }
    if let Some(r) = &f.regimes {
        if r.seeds.is_empty() {
            return Err(err("regimes.seeds", "at least one seed is required".into()));
        }
        if !(r.finetune_lr >= 0.0) || !r.finetune_lr.is_finite() {
            return Err(err(
                "regimes.\"Finetune learning rate\"",
                "must be >= 0".into(),
            ));
        }
    }
    Ok(TrainRunConfig {
        model,
        schedule,
        adam: AdamConfig::new(b1, b2, t.weight_decay),
        clip_norm: t.clip,
        global_batch: t.global_batch,
        token_budget: t.total_tokens.0,
        seed: f.run.seed,
        loss_policy: f.run.loss_policy,
    })
}
