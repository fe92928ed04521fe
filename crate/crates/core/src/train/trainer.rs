use alloc::{format, vec::Vec};

use serde::{Deserialize, Serialize};

use super::{Result, TrainError};
use crate::corpus::{LossPolicy, PackedSequence};
use crate::model::{loss_and_grad, ModelConfig, ModelParams, ScoredSequence};
use crate::numerics::{adam_step, clip_grad_norm, AdamConfig, OptimizerState, Schedule};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainRunConfig {
    pub model: ModelConfig,
    pub schedule: Schedule,
    pub adam: AdamConfig,
    pub clip_norm: f64,
    /// Sequences per step.
    pub global_batch: usize,
    /// Scored tokens to consume before stopping.
    pub token_budget: u64,
    pub seed: u64,
    pub loss_policy: LossPolicy,
}

impl TrainRunConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.schedule.validate()?;
        if self.token_budget == 0 {
            return Err(TrainError::InvalidConfig("token budget must be > 0".into()));
        }
        if self.global_batch == 0 {
            return Err(TrainError::InvalidConfig(
                "global batch must be >= 1".into(),
            ));
        }
        if !(self.clip_norm > 0.0) {
            return Err(TrainError::InvalidConfig(format!(
                "clip norm must be > 0, got {}",
                self.clip_norm
            )));
        }
        Ok(())
    }
}

/// Loop counters; together with params and optimizer state they determine
/// every later step.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainerState {
    pub step: u64,
    /// Scored tokens consumed so far; drives the schedule.
    pub tokens_seen: u64,
    /// Index of the next sequence to read, modulo the data length.
    pub cursor: usize,
    /// Sequences read so far, including skipped all-masked batches.
    pub sequences_read: u64,
    /// Mean loss of every step taken.
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub step: u64,
    pub loss: f64,
    pub lr: f64,
    pub grad_scale: f64,
    pub scored: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trainer {
    pub config: TrainRunConfig,
    pub params: ModelParams,
    pub optimizer: OptimizerState,
    pub state: TrainerState,
}

impl Trainer {
    /// Fresh run with parameters drawn from `config.seed`.
    pub fn new(config: TrainRunConfig) -> Result<Self> {
        config.validate()?;
        let params = ModelParams::init(&config.model, config.seed);
        Self::with_params(config, params)
    }

    /// Fresh optimizer and counters around existing parameters.
    pub fn with_params(config: TrainRunConfig, params: ModelParams) -> Result<Self> {
        config.validate()?;
        params.check_config(&config.model)?;
        let optimizer = OptimizerState::new(params.tensors());
        Ok(Self {
            config,
            params,
            optimizer,
            state: TrainerState::default(),
        })
    }

    /// Reassembles a trainer from a checkpoint.
    pub fn from_parts(
        config: TrainRunConfig,
        params: ModelParams,
        optimizer: OptimizerState,
        state: TrainerState,
    ) -> Result<Self> {
        config.validate()?;
        params.check_config(&config.model)?;
        let shapes_match = |ts: &[crate::Tensor]| {
            ts.len() == params.tensors().len()
                && ts
                    .iter()
                    .zip(params.tensors())
                    .all(|(a, b)| a.shape() == b.shape())
        };
        if !shapes_match(&optimizer.m) || !shapes_match(&optimizer.v) {
            return Err(TrainError::InvalidConfig(
                "optimizer state does not match parameters".into(),
            ));
        }
        Ok(Self {
            config,
            params,
            optimizer,
            state,
        })
    }

    pub fn is_done(&self) -> bool {
        self.state.tokens_seen >= self.config.token_budget
    }

    /// One optimizer step on the next `global_batch` sequences (wrapping
    /// around the data). Batches without scored tokens are skipped.
    pub fn step(&mut self, data: &[PackedSequence]) -> Result<StepReport> {
        if data.iter().all(|s| s.scored_targets() == 0) {
            return Err(TrainError::NoScoredTokens);
        }
        let batch = loop {
            let rows: Vec<ScoredSequence<'_>> = (0..self.config.global_batch)
                .map(|i| data[(self.state.cursor + i) % data.len()].as_scored())
                .collect();
            self.state.cursor = (self.state.cursor + self.config.global_batch) % data.len();
            self.state.sequences_read += self.config.global_batch as u64;
            if rows.iter().any(|r| r.scored_positions() > 0) {
                break rows;
            }
        };
        let lr = self.config.schedule.lr_at(self.state.tokens_seen);
        let mut out = loss_and_grad(&self.params, &self.config.model, &batch)?;
        let mut grads = out.grads.tensors_mut();
        let grad_scale = clip_grad_norm(&mut grads, self.config.clip_norm)?;
        let grads: Vec<&crate::Tensor> = grads.into_iter().map(|g| &*g).collect();
        adam_step(
            &mut self.params.tensors_mut(),
            &grads,
            &mut self.optimizer,
            lr,
            &self.config.adam,
        )?;
        self.state.step += 1;
        self.state.tokens_seen += out.scored as u64;
        self.state.losses.push(out.loss);
        Ok(StepReport {
            step: self.state.step,
            loss: out.loss,
            lr,
            grad_scale,
            scored: out.scored,
        })
    }

    /// Steps until the budget is met or `max_steps` more steps have run.
    /// Returns the number of steps taken.
    pub fn run_steps(&mut self, data: &[PackedSequence], max_steps: u64) -> Result<u64> {
        let mut taken = 0;
        while !self.is_done() && taken < max_steps {
            self.step(data)?;
            taken += 1;
        }
        Ok(taken)
    }

    pub fn run(&mut self, data: &[PackedSequence]) -> Result<u64> {
        self.run_steps(data, u64::MAX)
    }
}
