use alloc::{collections::BTreeSet, format, string::String, vec::Vec};

use serde::{Deserialize, Serialize};

use super::{perplexity, Result, TrainError, TrainRunConfig, Trainer, TrainerState};
use crate::corpus::synthetic::TwoDomainCorpus;
use crate::corpus::{hybrid_shuffle, pack, Domain, LossPolicy, MixturePlan, Packed, Stream};
use crate::model::{ModelConfig, ModelParams};
use crate::numerics::{DecayStyle, Schedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Sequential,
    Hybrid,
}

/// One training stage: which streams it draws from and how it trains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSpec {
    pub streams: Vec<Stream>,
    pub run: TrainRunConfig,
    /// Start the stage with fresh Adam moments.
    pub reset_optimizer: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub regime: Regime,
    pub stages: Vec<StageSpec>,
}

/// Warmup over the first 2% of `budget`, cosine decay to `min_lr` at `budget`.
fn toy_cosine(peak_lr: f64, min_lr: f64, budget: u64) -> Result<Schedule> {
    Ok(Schedule::new(
        peak_lr,
        min_lr,
        budget / 50,
        budget,
        DecayStyle::Cosine,
    )?)
}

fn general_streams() -> Vec<Stream> {
    Vec::from([Stream::GeneralPretrain, Stream::GeneralInstruction])
}

impl RegimeSpec {
    /// Two stages splitting `base.token_budget`: general streams under a
    /// cosine schedule, then financial streams at constant `finetune_lr`
    /// with no warmup and a fresh optimizer.
    pub fn sequential(base: &TrainRunConfig, finetune_lr: f64) -> Result<Self> {
        let b = base.token_budget;
        let first = TrainRunConfig {
            token_budget: b / 2,
            schedule: toy_cosine(base.schedule.peak_lr, base.schedule.min_lr, b / 2)?,
            ..*base
        };
        let second = TrainRunConfig {
            token_budget: b - b / 2,
            schedule: Schedule::constant(finetune_lr)?,
            ..*base
        };
        let spec = Self {
            regime: Regime::Sequential,
            stages: Vec::from([
                StageSpec {
                    streams: general_streams(),
                    run: first,
                    reset_optimizer: true,
                },
                StageSpec {
                    streams: Vec::from([Stream::FinancialPretrain, Stream::FinancialInstruction]),
                    run: second,
                    reset_optimizer: true,
                },
            ]),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// One stage over all four streams with a cosine schedule over the whole budget.
    pub fn hybrid(base: &TrainRunConfig) -> Result<Self> {
        let run = TrainRunConfig {
            schedule: toy_cosine(
                base.schedule.peak_lr,
                base.schedule.min_lr,
                base.token_budget,
            )?,
            ..*base
        };
        let spec = Self {
            regime: Regime::Hybrid,
            stages: Vec::from([StageSpec {
                streams: Stream::ALL.into(),
                run,
                reset_optimizer: true,
            }]),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match (self.regime, self.stages.len()) {
            (Regime::Sequential, n) if n < 2 => {
                return Err(TrainError::InvalidRegime(format!(
                    "sequential regime needs >= 2 stages, got {n}"
                )))
            }
            (Regime::Hybrid, n) if n != 1 => {
                return Err(TrainError::InvalidRegime(format!(
                    "hybrid regime needs exactly 1 stage, got {n}"
                )))
            }
            _ => {}
        }
        for (i, st) in self.stages.iter().enumerate() {
            st.run.validate()?;
            if st.streams.is_empty() {
                return Err(TrainError::InvalidRegime(format!(
                    "stage {i} has no streams"
                )));
            }
            if st.run.model != self.stages[0].run.model {
                return Err(TrainError::ModelMismatch);
            }
        }
        Ok(())
    }

    pub fn total_budget(&self) -> u64 {
        self.stages.iter().map(|s| s.run.token_budget).sum()
    }

    pub fn model(&self) -> &ModelConfig {
        &self.stages[0].run.model
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainPerplexity {
    pub general: f64,
    pub financial: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeResult {
    pub regime: Regime,
    pub token_budget: u64,
    pub tokens_seen: u64,
    /// Scored tokens that came from general-domain documents.
    pub general_exposure: u64,
    /// Held-out perplexity after each stage.
    pub stages: Vec<DomainPerplexity>,
    /// General-eval perplexity of a general-only run with the same general exposure.
    pub reference_general: f64,
    pub final_loss: f64,
}

impl RegimeResult {
    pub fn final_perplexity(&self) -> DomainPerplexity {
        *self.stages.last().expect("at least one stage")
    }

    /// Final general perplexity minus the general-only reference.
    pub fn forgetting_delta(&self) -> f64 {
        self.final_perplexity().general - self.reference_general
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub sequential: RegimeResult,
    pub hybrid: RegimeResult,
}

impl SeedResult {
    /// General perplexity rose between the end of the first and last sequential stage.
    pub fn sequential_forgets(&self) -> bool {
        let s = &self.sequential.stages;
        s[s.len() - 1].general > s[0].general
    }

    pub fn hybrid_beats_sequential(&self) -> bool {
        self.hybrid.final_perplexity().general < self.sequential.final_perplexity().general
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForgettingReport {
    pub model: ModelConfig,
    pub token_budget: u64,
    pub loss_policy: LossPolicy,
    pub seeds: Vec<SeedResult>,
}

impl ForgettingReport {
    pub fn sequential_forgetting_count(&self) -> usize {
        self.seeds.iter().filter(|s| s.sequential_forgets()).count()
    }

    pub fn hybrid_wins(&self) -> usize {
        self.seeds
            .iter()
            .filter(|s| s.hybrid_beats_sequential())
            .count()
    }
}

struct Prepared {
    packed: Packed,
    /// Scored tokens per row that belong to general-domain documents.
    general_scored: Vec<u64>,
}

fn prepare(
    corpus: &TwoDomainCorpus,
    streams: &[Stream],
    seed: u64,
    run: &TrainRunConfig,
) -> Result<Prepared> {
    let wanted: BTreeSet<usize> = streams.iter().map(|s| s.index()).collect();
    let mut plan = MixturePlan::new(seed, 0);
    for s in Stream::ALL {
        if wanted.contains(&s.index()) {
            plan.streams[s.index()] = corpus.streams[s.index()].clone();
        }
    }
    let order = hybrid_shuffle(&plan)?;
    let packed = pack(order.iter().copied(), run.model.seq_len, run.loss_policy)?;
    let general_ids: BTreeSet<&str> = order
        .iter()
        .filter(|d| d.domain == Domain::General)
        .map(|d| d.id.as_str())
        .collect();
    let mut general_scored = alloc::vec![0u64; packed.sequences.len()];
    for seg in &packed.segments {
        if !general_ids.contains(seg.doc_id.as_str()) {
            continue;
        }
        let row = &packed.sequences[seg.sequence];
        general_scored[seg.sequence] += (seg.start..seg.start + seg.len)
            .filter(|&t| t >= 1 && row.mask[t] != 0)
            .count() as u64;
    }
    Ok(Prepared {
        packed,
        general_scored,
    })
}

fn exposure(prep: &Prepared, state: &TrainerState) -> u64 {
    let n = prep.general_scored.len() as u64;
    let full = state.sequences_read / n;
    let rest = (state.sequences_read % n) as usize;
    full * prep.general_scored.iter().sum::<u64>() + prep.general_scored[..rest].iter().sum::<u64>()
}

fn evaluate(
    params: &ModelParams,
    model: &ModelConfig,
    corpus: &TwoDomainCorpus,
) -> Result<DomainPerplexity> {
    Ok(DomainPerplexity {
        general: perplexity(
            params,
            model,
            corpus.eval(Domain::General),
            LossPolicy::Full,
        )?,
        financial: perplexity(
            params,
            model,
            corpus.eval(Domain::Financial),
            LossPolicy::Full,
        )?,
    })
}

fn run_regime(spec: &RegimeSpec, corpus: &TwoDomainCorpus, seed: u64) -> Result<RegimeResult> {
    let model = *spec.model();
    let mut params: Option<ModelParams> = None;
    let mut optimizer = None;
    let mut stages = Vec::new();
    let (mut tokens_seen, mut general_exposure, mut final_loss) = (0, 0, f64::NAN);
    for stage in &spec.stages {
        let run = TrainRunConfig { seed, ..stage.run };
        let prep = prepare(corpus, &stage.streams, seed, &run)?;
        let p = params
            .take()
            .unwrap_or_else(|| ModelParams::init(&model, seed));
        let mut trainer = match optimizer.take() {
            Some(opt) if !stage.reset_optimizer => {
                Trainer::from_parts(run, p, opt, TrainerState::default())?
            }
            _ => Trainer::with_params(run, p)?,
        };
        trainer.run(&prep.packed.sequences)?;
        tokens_seen += trainer.state.tokens_seen;
        general_exposure += exposure(&prep, &trainer.state);
        final_loss = trainer.state.losses.last().copied().unwrap_or(f64::NAN);
        stages.push(evaluate(&trainer.params, &model, corpus)?);
        params = Some(trainer.params);
        optimizer = Some(trainer.optimizer);
    }

    // The first sequential stage is itself general-only training of the
    // matching exposure; the hybrid regime needs a dedicated reference run.
    let first = &spec.stages[0];
    let general_only = first.streams.iter().all(|s| s.domain() == Domain::General);
    let reference_general = if spec.regime == Regime::Sequential && general_only {
        stages[0].general
    } else {
        let budget = general_exposure.max(1);
        let run = TrainRunConfig {
            seed,
            token_budget: budget,
            schedule: toy_cosine(
                first.run.schedule.peak_lr,
                first.run.schedule.min_lr,
                budget,
            )?,
            ..first.run
        };
        let prep = prepare(corpus, &general_streams(), seed, &run)?;
        let mut trainer = Trainer::new(run)?;
        trainer.run(&prep.packed.sequences)?;
        evaluate(&trainer.params, &model, corpus)?.general
    };

    Ok(RegimeResult {
        regime: spec.regime,
        token_budget: spec.total_budget(),
        tokens_seen,
        general_exposure,
        stages,
        reference_general,
        final_loss,
    })
}

/// Trains both regimes from the same initialization for every seed and
/// reports held-out perplexities per domain.
pub fn run_forgetting_experiment(
    sequential: &RegimeSpec,
    hybrid: &RegimeSpec,
    corpus: &TwoDomainCorpus,
    seeds: &[u64],
) -> Result<ForgettingReport> {
    sequential.validate()?;
    hybrid.validate()?;
    if sequential.regime != Regime::Sequential || hybrid.regime != Regime::Hybrid {
        return Err(TrainError::InvalidRegime(
            "expected one sequential and one hybrid regime".into(),
        ));
    }
    if sequential.total_budget() != hybrid.total_budget() {
        return Err(TrainError::BudgetMismatch {
            sequential: sequential.total_budget(),
            hybrid: hybrid.total_budget(),
        });
    }
    if sequential.model() != hybrid.model() {
        return Err(TrainError::ModelMismatch);
    }
    if seeds.is_empty() {
        return Err(TrainError::InvalidConfig(String::from(
            "at least one seed is required",
        )));
    }
    let mut results = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        results.push(SeedResult {
            seed,
            sequential: run_regime(sequential, corpus, seed)?,
            hybrid: run_regime(hybrid, corpus, seed)?,
        });
    }
    Ok(ForgettingReport {
        model: *sequential.model(),
        token_budget: sequential.total_budget(),
        loss_policy: sequential.stages[0].run.loss_policy,
        seeds: results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synthetic::{two_domain_corpus, SyntheticSpec};
    use crate::corpus::VOCAB_SIZE;
    use crate::numerics::AdamConfig;

    fn base(budget: u64) -> TrainRunConfig {
        TrainRunConfig {
            model: ModelConfig {
                layers: 1,
                hidden: 16,
                heads: 2,
                vocab_size: VOCAB_SIZE,
                embedding_rows: VOCAB_SIZE,
                seq_len: 32,
                tied_embeddings: true,
            },
            schedule: Schedule::new(1e-2, 1e-3, 0, budget, DecayStyle::Cosine).unwrap(),
            adam: AdamConfig::default(),
            clip_norm: 1.0,
            global_batch: 4,
            token_budget: budget,
            seed: 0,
            loss_policy: LossPolicy::Full,
        }
    }

    fn corpus() -> TwoDomainCorpus {
        two_domain_corpus(&SyntheticSpec {
            pretrain_docs: 16,
            instruction_docs: 8,
            eval_docs: 4,
            ..Default::default()
        })
    }

    #[test]
    fn regime_shapes() {
        let b = base(1001);
        let seq = RegimeSpec::sequential(&b, 5e-3).unwrap();
        assert_eq!(seq.stages.len(), 2);
        assert_eq!(seq.total_budget(), 1001);
        assert_eq!(seq.stages[1].run.schedule.style, DecayStyle::Constant);
        assert_eq!(seq.stages[1].run.schedule.warmup_tokens, 0);
        let hyb = RegimeSpec::hybrid(&b).unwrap();
        assert_eq!(hyb.stages[0].streams.len(), 4);

        let mut bad = seq.clone();
        bad.stages.pop();
        assert!(bad.validate().is_err());
    }

    #[test]
    fn budget_mismatch_is_rejected() {
        let seq = RegimeSpec::sequential(&base(1000), 5e-3).unwrap();
        let hyb = RegimeSpec::hybrid(&base(1200)).unwrap();
        assert_eq!(
            run_forgetting_experiment(&seq, &hyb, &corpus(), &[0]),
            Err(TrainError::BudgetMismatch {
                sequential: 1000,
                hybrid: 1200
            })
        );
    }

    #[test]
    fn experiment_runs_and_is_deterministic() {
        let b = base(3000);
        let seq = RegimeSpec::sequential(&b, 5e-3).unwrap();
        let hyb = RegimeSpec::hybrid(&b).unwrap();
        let c = corpus();
        let r = run_forgetting_experiment(&seq, &hyb, &c, &[1]).unwrap();
        let s = &r.seeds[0];
        assert_eq!(s.sequential.stages.len(), 2);
        for regime in [&s.sequential, &s.hybrid] {
            assert!(regime.tokens_seen >= 3000 / 2);
            assert!(regime
                .stages
                .iter()
                .all(|p| p.general >= 1.0 && p.financial >= 1.0));
            assert!(regime.general_exposure > 0 && regime.general_exposure <= regime.tokens_seen);
        }
        assert_eq!(
            s.sequential.forgetting_delta(),
            s.sequential.stages[1].general - s.sequential.stages[0].general
        );
        assert_eq!(r, run_forgetting_experiment(&seq, &hyb, &c, &[1]).unwrap());
    }
}
