use std::io::Write;

use hybridlm_core::corpus::synthetic::{two_domain_corpus, TwoDomainCorpus};
use hybridlm_core::corpus::{
    hybrid_shuffle, pack, Domain, LossPolicy, MixturePlan, PackedSequence,
};
use hybridlm_core::train::{
    perplexity, run_forgetting_experiment, ForgettingReport, RegimeSpec, TrainRunConfig, Trainer,
};
use serde::Serialize;

use super::{stdout_err, to_json, CompareArgs, EvalArgs, TrainArgs};
use crate::checkpoint;
use crate::config::{self, LoadedConfig};
use crate::error::{Error, Result};
use crate::jsonl;
use crate::manifest::RunManifest;
use crate::report::Table;

/// Training streams and held-out sets named by the `[data]` section.
pub(crate) fn load_corpus(cfg: &LoadedConfig) -> Result<TwoDomainCorpus> {
    let data = &cfg.file.data;
    if let Some(spec) = &data.synthetic {
        return Ok(two_domain_corpus(spec));
    }
    let path = cfg.resolve(
        data.corpus
            .as_deref()
            .expect("validated: corpus or synthetic"),
    );
    let mut streams: [Vec<_>; 4] = Default::default();
    for d in jsonl::read_corpus(&path)? {
        streams[d.stream().index()].push(d);
    }
    let eval = |p: &Option<std::path::PathBuf>| -> Result<Vec<_>> {
        p.as_deref()
            .map_or(Ok(Vec::new()), |p| jsonl::read_documents(&cfg.resolve(p)))
    };
    Ok(TwoDomainCorpus {
        streams,
        eval_general: eval(&data.eval_general)?,
        eval_financial: eval(&data.eval_financial)?,
    })
}

/// The hybrid mixture of all four streams, packed at the model length.
pub(crate) fn training_data(
    cfg: &LoadedConfig,
    corpus: &TwoDomainCorpus,
) -> Result<Vec<PackedSequence>> {
    let plan = MixturePlan {
        streams: corpus.streams.clone(),
        seed: cfg.run.seed,
        epoch: 0,
        repetition: [1; 4],
    };
    let order = hybrid_shuffle(&plan).map_err(|e| Error::Invalid(e.to_string()))?;
    let packed = pack(
        order.iter().copied(),
        cfg.run.model.seq_len,
        cfg.run.loss_policy,
    )
    .map_err(|e| Error::Invalid(e.to_string()))?;
    if packed.scored_targets() == 0 {
        return Err(Error::Invalid(
            "training corpus has no scored tokens".into(),
        ));
    }
    Ok(packed.sequences)
}

fn config_snapshot(cfg: &LoadedConfig) -> serde_json::Value {
    serde_json::json!({ "file": cfg.file, "resolved": cfg.run })
}

#[derive(Serialize)]
struct TrainReport {
    steps: u64,
    tokens_seen: u64,
    token_budget: u64,
    complete: bool,
    losses: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    perplexity_general: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    perplexity_financial: Option<f64>,
}

pub fn train(a: &TrainArgs, argv: &[String], out: &mut dyn Write) -> Result<()> {
    let cfg = config::load(&a.config)?;
    let corpus = load_corpus(&cfg)?;
    let data = training_data(&cfg, &corpus)?;
    let mut trainer = match &a.resume {
        Some(path) => {
            let t = checkpoint::load(path)?;
            if checkpoint::config_fingerprint(&t.config) != checkpoint::config_fingerprint(&cfg.run)
            {
                return Err(Error::Invalid(format!(
                    "{}: checkpoint was written for a different configuration than {}",
                    path.display(),
                    a.config.display()
                )));
            }
            t
        }
        None => Trainer::new(cfg.run)?,
    };
    let ckpt_path = a.out.join("checkpoint.bin");
    let every = cfg.file.run.checkpoint_every;
    let mut remaining = a.max_steps.unwrap_or(u64::MAX);
    while !trainer.is_done() && remaining > 0 {
        let chunk = if every > 0 {
            every.min(remaining)
        } else {
            remaining
        };
        remaining -= trainer.run_steps(&data, chunk)?;
        if every > 0 && !trainer.is_done() {
            checkpoint::save(&trainer, &ckpt_path)?;
        }
    }

    let ppl = |d: Domain| -> Result<Option<f64>> {
        let docs = corpus.eval(d);
        if docs.is_empty() {
            return Ok(None);
        }
        Ok(Some(perplexity(
            &trainer.params,
            &trainer.config.model,
            docs,
            hybridlm_core::corpus::LossPolicy::Full,
        )?))
    };
    let report = TrainReport {
        steps: trainer.state.step,
        tokens_seen: trainer.state.tokens_seen,
        token_budget: trainer.config.token_budget,
        complete: trainer.is_done(),
        losses: trainer.state.losses.clone(),
        perplexity_general: ppl(Domain::General)?,
        perplexity_financial: ppl(Domain::Financial)?,
    };

    let mut manifest = RunManifest::new("train", argv, &a.out)
        .with_seeds([cfg.run.seed])
        .with_config(Some(&a.config), &config_snapshot(&cfg));
    manifest.write_artifact(&ckpt_path, &checkpoint::to_bytes(&trainer))?;
    manifest.write_artifact(&a.out.join("train_report.json"), &to_json(&report))?;
    manifest.save(&a.out.join("manifest.json"))?;

    let mut t = Table::new(["item", "value"]);
    t.row(["steps".to_string(), report.steps.to_string()])
        .row([
            "tokens seen".to_string(),
            format!("{} / {}", report.tokens_seen, report.token_budget),
        ])
        .row([
            "first loss".to_string(),
            report
                .losses
                .first()
                .map_or("-".into(), |l| format!("{l:.4}")),
        ])
        .row([
            "last loss".to_string(),
            report
                .losses
                .last()
                .map_or("-".into(), |l| format!("{l:.4}")),
        ]);
    if let Some(p) = report.perplexity_general {
        t.row(["general perplexity".to_string(), format!("{p:.4}")]);
    }
    if let Some(p) = report.perplexity_financial {
        t.row(["financial perplexity".to_string(), format!("{p:.4}")]);
    }
    let status = if report.complete {
        "complete"
    } else {
        "paused"
    };
    write!(out, "training {status} -> {}\n{t}", ckpt_path.display()).map_err(stdout_err)
}

#[derive(Serialize)]
struct EvalReport {
    checkpoint: String,
    eval_set: String,
    documents: usize,
    perplexity: f64,
}

pub fn eval(a: &EvalArgs, argv: &[String], out: &mut dyn Write) -> Result<()> {
    let trainer = checkpoint::load(&a.checkpoint)?;
    let docs = jsonl::read_documents(&a.eval_set)?;
    if docs.is_empty() {
        return Err(Error::Invalid(format!(
            "{}: evaluation set is empty",
            a.eval_set.display()
        )));
    }
    let ppl = perplexity(
        &trainer.params,
        &trainer.config.model,
        &docs,
        a.loss_policy.into(),
    )?;
    writeln!(out, "perplexity {ppl:.6} over {} documents", docs.len()).map_err(stdout_err)?;
    if let Some(dir) = &a.out {
        let report = EvalReport {
            checkpoint: a.checkpoint.display().to_string(),
            eval_set: a.eval_set.display().to_string(),
            documents: docs.len(),
            perplexity: ppl,
        };
        let mut manifest = RunManifest::new("eval", argv, dir)
            .with_seeds([trainer.config.seed])
            .with_config(None, &trainer.config);
        manifest.write_artifact(&dir.join("eval_report.json"), &to_json(&report))?;
        manifest.save(&dir.join("manifest.json"))?;
    }
    Ok(())
}

fn policy_name(p: LossPolicy) -> &'static str {
    match p {
        LossPolicy::Full => "full",
        LossPolicy::ResponseOnly => "response_only",
    }
}

pub(crate) fn forgetting_table(r: &ForgettingReport) -> Table {
    let mut t = Table::new([
        "seed",
        "regime",
        "general@stage1",
        "general",
        "financial",
        "reference",
        "delta",
    ]);
    for s in &r.seeds {
        for res in [&s.sequential, &s.hybrid] {
            let fin = res.final_perplexity();
            t.row([
                s.seed.to_string(),
                format!("{:?}", res.regime).to_lowercase(),
                format!("{:.4}", res.stages[0].general),
                format!("{:.4}", fin.general),
                format!("{:.4}", fin.financial),
                format!("{:.4}", res.reference_general),
                format!("{:+.4}", res.forgetting_delta()),
            ]);
        }
    }
    t
}

pub fn compare(a: &CompareArgs, argv: &[String], out: &mut dyn Write) -> Result<()> {
    let cfg = config::load(&a.config)?;
    let regimes = cfg.file.regimes.clone().ok_or_else(|| {
        Error::config(
            &a.config,
            "regimes",
            "a [regimes] section is required for compare-regimes",
        )
    })?;
    let corpus = load_corpus(&cfg)?;
    for (field, docs) in [
        ("data.eval_general", &corpus.eval_general),
        ("data.eval_financial", &corpus.eval_financial),
    ] {
        if docs.is_empty() {
            return Err(Error::config(
                &a.config,
                field,
                "a non-empty evaluation set is required",
            ));
        }
    }
    let seeds = a.seeds.clone().unwrap_or(regimes.seeds);
    if seeds.is_empty() {
        return Err(Error::Invalid("--seeds must list at least one seed".into()));
    }
    let mut policies = vec![cfg.run.loss_policy];
    if a.both_loss_policies {
        policies.push(match cfg.run.loss_policy {
            LossPolicy::Full => LossPolicy::ResponseOnly,
            LossPolicy::ResponseOnly => LossPolicy::Full,
        });
    }
    let mut manifest = RunManifest::new("compare-regimes", argv, &a.out)
        .with_seeds(seeds.iter().copied())
        .with_config(Some(&a.config), &config_snapshot(&cfg));
    let mut text = String::new();
    for (i, &policy) in policies.iter().enumerate() {
        let run = TrainRunConfig {
            loss_policy: policy,
            ..cfg.run
        };
        let sequential = RegimeSpec::sequential(&run, regimes.finetune_lr)?;
        let hybrid = RegimeSpec::hybrid(&run)?;
        let report = run_forgetting_experiment(&sequential, &hybrid, &corpus, &seeds)?;
        let n = report.seeds.len();
        if policies.len() > 1 {
            text.push_str(&format!("loss policy {}\n", policy_name(policy)));
        }
        text.push_str(&format!(
            "{}\nsequential general perplexity rose in stage 2: {}/{n} seeds\nhybrid final general perplexity below sequential: {}/{n} seeds\n",
            forgetting_table(&report),
            report.sequential_forgetting_count(),
            report.hybrid_wins()
        ));
        if i + 1 < policies.len() {
            text.push('\n');
        }
        let name = match i {
            0 => "forgetting_report.json".to_string(),
            _ => format!("forgetting_report.{}.json", policy_name(policy)),
        };
        manifest.write_artifact(&a.out.join(name), &to_json(&report))?;
    }
    manifest.write_artifact(&a.out.join("forgetting_report.txt"), text.as_bytes())?;
    manifest.save(&a.out.join("manifest.json"))?;
    write!(out, "{text}").map_err(stdout_err)
}
