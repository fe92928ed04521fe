use std::io::Write;

use hybridlm_core::corpus::{hybrid_shuffle, mixture_stats, MixturePlan, Stream};
use hybridlm_core::datagen::{
    self_instruct_expand, self_qa_structured, self_qa_unstructured, ClientSettings,
    CompletionClient, GenerationOutcome, MockClient, SelfInstructConfig, SelfQaConfig,
};
use serde::Serialize;

use super::{sibling, stdout_err, to_json, GenDataArgs, MixArgs, Mode};
use crate::client::HttpClient;
use crate::error::{Error, Result};
use crate::jsonl::{self, QaSource};
use crate::manifest::RunManifest;
use crate::report::Table;

#[derive(Serialize)]
struct GenSummary<'a> {
    mode: &'a str,
    stats: hybridlm_core::datagen::GenerationStats,
    errors: &'a [String],
}

fn client(a: &GenDataArgs) -> Result<Box<dyn CompletionClient>> {
    if !(0.0..=1.0).contains(&a.mock_malformed_rate) {
        return Err(Error::Invalid(format!(
            "--mock-malformed-rate must lie in [0, 1], got {}",
            a.mock_malformed_rate
        )));
    }
    if a.max_in_flight == 0 {
        return Err(Error::Invalid("--max-in-flight must be >= 1".into()));
    }
    if a.mock {
        let mut m = MockClient::new(a.seed).with_malformed_rate(a.mock_malformed_rate);
        m.max_in_flight = a.max_in_flight;
        return Ok(Box::new(m));
    }
    let endpoint = a
        .endpoint
        .clone()
        .ok_or_else(|| Error::Invalid("--endpoint is required unless --mock is given".into()))?;
    let settings = ClientSettings {
        endpoint,
        timeout_ms: a.timeout_ms,
        max_in_flight: a.max_in_flight,
        retries: a.retries,
    };
    Ok(Box::new(HttpClient::from_env(settings, &a.token_env)))
}

pub fn gen_data(a: &GenDataArgs, argv: &[String], out: &mut dyn Write) -> Result<()> {
    let client = client(a)?;
    let (mode, outcome) = match a.mode {
        Mode::SelfInstruct => {
            let seeds = jsonl::read_records(&a.seeds)?;
            if seeds.is_empty() {
                return Err(Error::Invalid(format!(
                    "{}: no seed records",
                    a.seeds.display()
                )));
            }
            let mut cfg = SelfInstructConfig::new(a.target, a.seed);
            cfg.pairs_per_request = a.pairs.max(1);
            cfg.retries = a.retries;
            (
                "self-instruct",
                self_instruct_expand(&seeds, client.as_ref(), &cfg)?,
            )
        }
        Mode::SelfQa => {
            let sources = jsonl::read_qa_sources(&a.seeds)?;
            if sources.is_empty() {
                return Err(Error::Invalid(format!(
                    "{}: no source documents or records",
                    a.seeds.display()
                )));
            }
            let cfg = SelfQaConfig {
                retries: a.retries,
                ..SelfQaConfig::default()
            };
            let mut all = GenerationOutcome::default();
            for src in &sources {
                let o = match src {
                    QaSource::Document(d) => {
                        self_qa_unstructured(d, client.as_ref(), a.pairs, &cfg)?
                    }
                    QaSource::Structured(r) => {
                        self_qa_structured(r, client.as_ref(), a.pairs, &cfg)?
                    }
                };
                all.records.extend(o.records);
                all.stats.merge(&o.stats);
                all.errors.extend(o.errors);
            }
            ("self-qa", all)
        }
    };

    let mut manifest = RunManifest::new("gen-data", argv, &a.out)
        .with_seeds([a.seed])
        .with_config(
            None,
            &serde_json::json!({
                "mode": mode,
                "mock": a.mock,
                "mock_malformed_rate": a.mock_malformed_rate,
                "target": a.target,
                "pairs": a.pairs,
                "retries": a.retries,
                "max_in_flight": a.max_in_flight,
                "endpoint": a.endpoint,
                "template_version": hybridlm_core::datagen::templates::TEMPLATE_VERSION,
            }),
        );
    manifest.write_artifact(
        &a.out,
        jsonl::records_to_string(&outcome.records).as_bytes(),
    )?;
    let summary = GenSummary {
        mode,
        stats: outcome.stats,
        errors: &outcome.errors,
    };
    manifest.write_artifact(&sibling(&a.out, "stats.json"), &to_json(&summary))?;
    manifest.save(&sibling(&a.out, "manifest.json"))?;

    let s = &outcome.stats;
    let mut t = Table::new(["counter", "value"]);
    for (k, v) in [
        ("requests", s.requests),
        ("client calls", s.client_calls),
        ("generated", s.generated),
        ("dropped (parse)", s.dropped_parse),
        ("dropped (dedup)", s.dropped_dedup),
        ("emitted", s.emitted),
        ("surplus ignored", s.surplus),
    ] {
        t.row([k.to_string(), v.to_string()]);
    }
    write!(
        out,
        "{mode}: {} records -> {}\n{t}",
        outcome.records.len(),
        a.out.display()
    )
    .map_err(stdout_err)?;
    if !outcome.errors.is_empty() {
        return Err(Error::Runtime(format!(
            "{} request(s) failed after retries; partial output written: {}",
            outcome.errors.len(),
            outcome.errors.join("; ")
        )));
    }
    Ok(())
}

pub fn mix(a: &MixArgs, argv: &[String], out: &mut dyn Write) -> Result<()> {
    let docs = jsonl::read_corpus(&a.corpus)?;
    let mut plan = MixturePlan::from_documents(docs, a.seed, a.epoch);
    if a.repetition.len() != 4 {
        return Err(Error::Invalid(format!(
            "--repetition takes 4 comma-separated factors, got {}",
            a.repetition.len()
        )));
    }
    plan.repetition.copy_from_slice(&a.repetition);
    let order = hybrid_shuffle(&plan).map_err(|e| Error::Invalid(e.to_string()))?;
    let stats = mixture_stats(order.iter().copied());

    let mut manifest = RunManifest::new("mix", argv, &a.out).with_seeds([a.seed]).with_config(
        None,
        &serde_json::json!({ "corpus": a.corpus, "seed": a.seed, "epoch": a.epoch, "repetition": a.repetition }),
    );
    manifest.write_artifact(&a.out, jsonl::documents_to_string(&order).as_bytes())?;
    manifest.write_artifact(&sibling(&a.out, "stats.json"), &to_json(&stats))?;
    manifest.save(&sibling(&a.out, "manifest.json"))?;

    let mut t = Table::new(["stream", "documents", "tokens", "share"]);
    for s in Stream::ALL {
        let i = s.index();
        t.row([
            s.name().to_string(),
            stats.counts[i].to_string(),
            stats.tokens[i].to_string(),
            format!("{:.4}", stats.shares[i]),
        ]);
    }
    write!(
        out,
        "mixed {} documents (seed {}, epoch {}) -> {}\n{t}",
        order.len(),
        a.seed,
        a.epoch,
        a.out.display()
    )
    .map_err(stdout_err)
}
