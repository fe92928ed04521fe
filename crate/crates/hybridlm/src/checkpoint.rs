//! Binary checkpoint of a [`Trainer`]: configuration, loop counters,
//! parameters, Adam moments and the loss trajectory.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic "HYBLMCKP" | u32 version | u32 0x01020304
//! u64 config byte length | config bytes | u64 config fingerprint
//! u64 step | u64 tokens_seen | u64 cursor | u64 sequences_read | u64 adam step
//! u64 tensor count | per tensor: u32 name len, name, u32 rank, u64 dims.., u64 len, f64 data..
//! u64 loss count | f64 losses..
//! 32-byte SHA-256 of everything above
//! ```
//!
//! Tensors appear as parameters, then `m.<name>`, then `v.<name>`, in the
//! canonical parameter order.

use std::path::Path;

use hybridlm_core::corpus::LossPolicy;
use hybridlm_core::model::{ModelConfig, ModelParams};
use hybridlm_core::numerics::{AdamConfig, DecayStyle, OptimizerState, Schedule};
use hybridlm_core::train::{TrainRunConfig, Trainer, TrainerState};
use hybridlm_core::Tensor;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"HYBLMCKP";
pub const VERSION: u32 = 1;
const ENDIAN_MARK: u32 = 0x0102_0304;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("byte-order marker mismatch")]
    ByteOrder,
    #[error("file is truncated")]
    Truncated,
    #[error("checksum mismatch")]
    Checksum,
    #[error("configuration fingerprint mismatch")]
    Fingerprint,
    #[error("{0}")]
    Invalid(String),
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn tensor(&mut self, name: &str, t: &Tensor) {
        self.u32(name.len() as u32);
        self.0.extend_from_slice(name.as_bytes());
        self.u32(t.shape().len() as u32);
        for &d in t.shape() {
            self.u64(d as u64);
        }
        self.u64(t.len() as u64);
        for &x in t.data() {
            self.f64(x);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

type Res<T> = std::result::Result<T, CheckpointError>;

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Res<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or(CheckpointError::Truncated)?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Res<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Res<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }
    fn u64(&mut self) -> Res<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
    fn usize(&mut self) -> Res<usize> {
        usize::try_from(self.u64()?)
            .map_err(|_| CheckpointError::Invalid("size overflows usize".into()))
    }
    fn f64(&mut self) -> Res<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
    fn count(&mut self, elem_bytes: usize) -> Res<usize> {
        let n = self.usize()?;
        if n.saturating_mul(elem_bytes) > self.buf.len() - self.pos {
            return Err(CheckpointError::Truncated);
        }
        Ok(n)
    }
    fn tensor(&mut self) -> Res<(String, Tensor)> {
        let len = self.u32()? as usize;
        let name = std::str::from_utf8(self.take(len)?)
            .map_err(|_| CheckpointError::Invalid("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = self.u32()? as usize;
        let shape = (0..rank).map(|_| self.usize()).collect::<Res<Vec<_>>>()?;
        let n = self.count(8)?;
        let data = (0..n).map(|_| self.f64()).collect::<Res<Vec<_>>>()?;
        let t = Tensor::from_vec(&shape, data)
            .map_err(|e| CheckpointError::Invalid(format!("{name}: {e}")))?;
        Ok((name, t))
    }
}

fn config_bytes(c: &TrainRunConfig) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    let m = &c.model;
    for v in [
        m.layers,
        m.hidden,
        m.heads,
        m.vocab_size,
        m.embedding_rows,
        m.seq_len,
    ] {
        w.u64(v as u64);
    }
    w.u8(m.tied_embeddings as u8);
    let s = &c.schedule;
    w.f64(s.peak_lr);
    w.f64(s.min_lr);
    w.u64(s.warmup_tokens);
    w.u64(s.decay_tokens);
    w.u8(match s.style {
        DecayStyle::Cosine => 0,
        DecayStyle::Constant => 1,
    });
    for v in [
        c.adam.beta1,
        c.adam.beta2,
        c.adam.eps,
        c.adam.weight_decay,
        c.clip_norm,
    ] {
        w.f64(v);
    }
    w.u64(c.global_batch as u64);
    w.u64(c.token_budget);
    w.u64(c.seed);
    w.u8(match c.loss_policy {
        LossPolicy::Full => 0,
        LossPolicy::ResponseOnly => 1,
    });
    w.0
}

fn read_config(bytes: &[u8]) -> Res<TrainRunConfig> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let mut dims = [0usize; 6];
    for d in &mut dims {
        *d = r.usize()?;
    }
    let bad = |what: &str| CheckpointError::Invalid(format!("bad {what} tag"));
    let tied = match r.u8()? {
        0 => false,
        1 => true,
        _ => return Err(bad("tied-embedding")),
    };
    let model = ModelConfig {
        layers: dims[0],
        hidden: dims[1],
        heads: dims[2],
        vocab_size: dims[3],
        embedding_rows: dims[4],
        seq_len: dims[5],
        tied_embeddings: tied,
    };
    let (peak_lr, min_lr, warmup_tokens, decay_tokens) = (r.f64()?, r.f64()?, r.u64()?, r.u64()?);
    let style = match r.u8()? {
        0 => DecayStyle::Cosine,
        1 => DecayStyle::Constant,
        _ => return Err(bad("decay style")),
    };
    let adam = AdamConfig {
        beta1: r.f64()?,
        beta2: r.f64()?,
        eps: r.f64()?,
        weight_decay: r.f64()?,
    };
    let clip_norm = r.f64()?;
    let (global_batch, token_budget, seed) = (r.usize()?, r.u64()?, r.u64()?);
    let loss_policy = match r.u8()? {
        0 => LossPolicy::Full,
        1 => LossPolicy::ResponseOnly,
        _ => return Err(bad("loss policy")),
    };
    if r.pos != bytes.len() {
        return Err(CheckpointError::Invalid(
            "trailing bytes in config block".into(),
        ));
    }
    Ok(TrainRunConfig {
        model,
        schedule: Schedule {
            peak_lr,
            min_lr,
            warmup_tokens,
            decay_tokens,
            style,
        },
        adam,
        clip_norm,
        global_batch,
        token_budget,
        seed,
        loss_policy,
    })
}

/// First eight bytes of the SHA-256 of the encoded configuration.
pub fn config_fingerprint(c: &TrainRunConfig) -> u64 {
    let digest = Sha256::digest(config_bytes(c));
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

pub fn to_bytes(t: &Trainer) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(VERSION);
    w.u32(ENDIAN_MARK);
    let cfg = config_bytes(&t.config);
    w.u64(cfg.len() as u64);
    w.0.extend_from_slice(&cfg);
    w.u64(config_fingerprint(&t.config));
    let s = &t.state;
    for v in [
        s.step,
        s.tokens_seen,
        s.cursor as u64,
        s.sequences_read,
        t.optimizer.step,
    ] {
        w.u64(v);
    }
    let names = ModelParams::names(&t.config.model);
    let params = t.params.tensors();
    w.u64(3 * names.len() as u64);
    for (n, p) in names.iter().zip(&params) {
        w.tensor(n, p);
    }
    for (prefix, moments) in [("m.", &t.optimizer.m), ("v.", &t.optimizer.v)] {
        for (n, m) in names.iter().zip(moments.iter()) {
            w.tensor(&format!("{prefix}{n}"), m);
        }
    }
    w.u64(s.losses.len() as u64);
    for &l in &s.losses {
        w.f64(l);
    }
    let digest = Sha256::digest(&w.0);
    w.0.extend_from_slice(&digest);
    w.0
}

pub fn from_bytes(bytes: &[u8]) -> Res<Trainer> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    if bytes.len() < MAGIC.len() + 8 + 32 {
        return Err(CheckpointError::Truncated);
    }
    let (body, sum) = bytes.split_at(bytes.len() - 32);
    let mut r = Reader {
        buf: body,
        pos: MAGIC.len(),
    };
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::Version(version));
    }
    if r.u32()? != ENDIAN_MARK {
        return Err(CheckpointError::ByteOrder);
    }
    if Sha256::digest(body).as_slice() != sum {
        return Err(CheckpointError::Checksum);
    }
    let n = r.count(1)?;
    let config = read_config(r.take(n)?)?;
    if r.u64()? != config_fingerprint(&config) {
        return Err(CheckpointError::Fingerprint);
    }
    let (step, tokens_seen, cursor, sequences_read, adam_step) =
        (r.u64()?, r.u64()?, r.usize()?, r.u64()?, r.u64()?);
    let names = ModelParams::names(&config.model);
    let count = r.usize()?;
    if count != 3 * names.len() {
        return Err(CheckpointError::Invalid(format!(
            "expected {} tensors, found {count}",
            3 * names.len()
        )));
    }
    let mut groups: [Vec<Tensor>; 3] = Default::default();
    for (g, prefix) in ["", "m.", "v."].iter().enumerate() {
        for expected in &names {
            let (name, t) = r.tensor()?;
            if name != format!("{prefix}{expected}") {
                return Err(CheckpointError::Invalid(format!(
                    "expected tensor {prefix}{expected}, found {name}"
                )));
            }
            groups[g].push(t);
        }
    }
    let n = r.count(8)?;
    let losses = (0..n).map(|_| r.f64()).collect::<Res<Vec<_>>>()?;
    if r.pos != body.len() {
        return Err(CheckpointError::Invalid("trailing bytes".into()));
    }
    let [p, m, v] = groups;
    let params = ModelParams::from_tensors(&config.model, p)
        .map_err(|e| CheckpointError::Invalid(e.to_string()))?;
    let optimizer = OptimizerState {
        step: adam_step,
        m,
        v,
    };
    let state = TrainerState {
        step,
        tokens_seen,
        cursor,
        sequences_read,
        losses,
    };
    Trainer::from_parts(config, params, optimizer, state)
        .map_err(|e| CheckpointError::Invalid(e.to_string()))
}

pub fn save(t: &Trainer, path: &Path) -> Result<()> {
    crate::jsonl::write_atomic(path, &to_bytes(t))
}

pub fn load(path: &Path) -> Result<Trainer> {
    let bytes = std::fs::read(path).map_err(|e| Error::input(path, e))?;
    from_bytes(&bytes).map_err(|source| Error::Checkpoint {
        path: path.to_path_buf(),
        source,
    })
}
