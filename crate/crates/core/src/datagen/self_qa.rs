use alloc::{collections::BTreeMap, format, string::String, vec::Vec};
use core::fmt;

use serde::{Deserialize, Serialize};

use super::client::{call_with_retries, CompletionClient, CompletionRequest};
use super::{parse::parse_units, templates, DatagenError, GenerationOutcome, Result};
use crate::corpus::{Content, Document, InstructionRecord, InstructionSource};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldValue {
    Bool(bool),
    Integer(i64),
    Number(f64),
    Text(String),
}

impl fmt::Display for FieldValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldValue::Bool(b) => write!(f, "{b}"),
            FieldValue::Integer(i) => write!(f, "{i}"),
            FieldValue::Number(x) => write!(f, "{x}"),
            FieldValue::Text(s) => f.write_str(s),
        }
    }
}

/// A named entity with typed attributes, e.g. a company profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredRecord {
    pub entity: String,
    pub fields: BTreeMap<String, FieldValue>,
}

impl StructuredRecord {
    pub fn validate(&self) -> Result<()> {
        if self.fields.is_empty() {
            return Err(DatagenError::EmptyFieldMap(self.entity.clone()));
        }
        Ok(())
    }

    /// Two-column text table, rows in key order.
    pub fn to_table(&self) -> String {
        let mut t = format!("Entity: {}\n| field | value |\n", self.entity);
        for (k, v) in &self.fields {
            t.push_str(&format!("| {k} | {v} |\n"));
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelfQaConfig {
    pub retries: u32,
    pub max_tokens: usize,
}

impl Default for SelfQaConfig {
    fn default() -> Self {
        Self {
            retries: 2,
            max_tokens: 512,
        }
    }
}

/// Question/answer pairs grounded in a pretraining document. Records carry
/// the document id as provenance.
pub fn self_qa_unstructured(
    doc: &Document,
    client: &dyn CompletionClient,
    n_pairs: usize,
    cfg: &SelfQaConfig,
) -> Result<GenerationOutcome> {
    let Content::Text(text) = &doc.content else {
        return Err(DatagenError::NotPretrainText(doc.id.clone()));
    };
    generate(
        text,
        &doc.id,
        InstructionSource::SelfQaUnstructured,
        client,
        n_pairs,
        cfg,
    )
}

/// As [`self_qa_unstructured`], over the record's table rendering. Provenance
/// is the entity name.
pub fn self_qa_structured(
    rec: &StructuredRecord,
    client: &dyn CompletionClient,
    n_pairs: usize,
    cfg: &SelfQaConfig,
) -> Result<GenerationOutcome> {
    rec.validate()?;
    generate(
        &rec.to_table(),
        &rec.entity,
        InstructionSource::SelfQaStructured,
        client,
        n_pairs,
        cfg,
    )
}

/// Only the first `n_pairs` units of the completion are considered. Units the
/// client failed to return count as parse failures, so
/// `n_pairs - emitted == dropped_parse` always.
fn generate(
    material: &str,
    provenance: &str,
    source: InstructionSource,
    client: &dyn CompletionClient,
    n_pairs: usize,
    cfg: &SelfQaConfig,
) -> Result<GenerationOutcome> {
    let mut out = GenerationOutcome::default();
    if n_pairs == 0 {
        return Ok(out);
    }
    let request = CompletionRequest {
        prompt: templates::self_qa_prompt(material, n_pairs),
        max_tokens: cfg.max_tokens,
    };
    let (mut results, calls) =
        call_with_retries(client, core::slice::from_ref(&request), cfg.retries);
    out.stats.requests = 1;
    out.stats.client_calls = calls;
    let text = match results.remove(0) {
        Ok(t) => t,
        Err(e) => {
            out.errors.push(format!("request 0: {e}"));
            return Ok(out);
        }
    };
    let mut considered = 0;
    let mut records = Vec::new();
    for unit in parse_units(&text) {
        if considered == n_pairs {
            out.stats.surplus += 1;
            continue;
        }
        considered += 1;
        out.stats.generated += 1;
        match unit {
            Some((q, a)) => {
                let rec = InstructionRecord {
                    instruction: q,
                    input: None,
                    output: a,
                    source,
                    provenance: Some(provenance.into()),
                };
                rec.validate()?;
                records.push(rec);
            }
            None => out.stats.dropped_parse += 1,
        }
    }
    out.stats.dropped_parse += n_pairs - considered;
    out.stats.generated += n_pairs - considered;
    out.stats.emitted = records.len();
    out.records = records;
    Ok(out)
}
