//! JSON-lines formats for documents, instruction records and structured records.
//!
//! Document lines:
//!
//! ```text
//! {"id":"g1","domain":"general","kind":"pretrain","text":"..."}
//! {"id":"f7","domain":"financial","kind":"instruction","instruction":"...","input":"...","output":"...","source":"seed"}
//! ```
//!
//! Blank lines are skipped; every other malformed line is reported with its
//! 1-based line number.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use hybridlm_core::corpus::{
    Content, Document, Domain, InstructionRecord, InstructionSource, Kind,
};
use hybridlm_core::datagen::StructuredRecord;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocumentLine {
    id: String,
    domain: Domain,
    kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    instruction: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    input: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<InstructionSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<String>,
}

impl DocumentLine {
    fn into_document(self) -> std::result::Result<Document, String> {
        let doc = match self.kind {
            Kind::Pretrain => {
                if self.instruction.is_some() || self.output.is_some() || self.input.is_some() {
                    return Err("pretrain lines carry only `text`".into());
                }
                let text = self.text.ok_or("missing field `text`")?;
                Document::pretrain(self.id, self.domain, text)
            }
            Kind::Instruction => {
                if self.text.is_some() {
                    return Err("instruction lines do not carry `text`".into());
                }
                let rec = InstructionRecord {
                    instruction: self.instruction.ok_or("missing field `instruction`")?,
                    input: self.input,
                    output: self.output.ok_or("missing field `output`")?,
                    source: self.source.unwrap_or(InstructionSource::Seed),
                    provenance: self.provenance,
                };
                Document::instruction(self.id, self.domain, rec)
            }
        };
        doc.map_err(|e| e.to_string())
    }

    fn from_document(doc: &Document) -> Self {
        let mut line = DocumentLine {
            id: doc.id.clone(),
            domain: doc.domain,
            kind: doc.kind(),
            text: None,
            instruction: None,
            input: None,
            output: None,
            source: None,
            provenance: None,
        };
        match &doc.content {
            Content::Text(t) => line.text = Some(t.clone()),
            Content::Instruction(r) => {
                line.instruction = Some(r.instruction.clone());
                line.input = r.input.clone();
                line.output = Some(r.output.clone());
                line.source = Some(r.source);
                line.provenance = r.provenance.clone();
            }
        }
        line
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::input(path, e))
}

/// Non-blank lines with their 1-based numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_lines<T: DeserializeOwned>(path: &Path, text: &str) -> Result<Vec<(usize, T)>> {
    lines(text)
        .map(|(n, l)| {
            serde_json::from_str(l)
                .map(|v| (n, v))
                .map_err(|e| Error::parse(path, n, e))
        })
        .collect()
}

pub fn parse_documents(path: &Path, text: &str) -> Result<Vec<Document>> {
    let mut seen = BTreeSet::new();
    let mut docs = Vec::new();
    for (n, line) in parse_lines::<DocumentLine>(path, text)? {
        let doc = line.into_document().map_err(|m| Error::parse(path, n, m))?;
        if !seen.insert(doc.id.clone()) {
            return Err(Error::parse(
                path,
                n,
                format!("duplicate document id {:?}", doc.id),
            ));
        }
        docs.push(doc);
    }
    Ok(docs)
}

pub fn read_documents(path: &Path) -> Result<Vec<Document>> {
    parse_documents(path, &read_text(path)?)
}

/// All `*.jsonl` files of a directory in name order, or a single file.
pub fn read_corpus(path: &Path) -> Result<Vec<Document>> {
    if !path.is_dir() {
        return read_documents(path);
    }
    let mut files: Vec<_> = fs::read_dir(path)
        .map_err(|e| Error::input(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    let mut docs = Vec::new();
    let mut seen = BTreeSet::new();
    for f in files {
        for d in read_documents(&f)? {
            if !seen.insert(d.id.clone()) {
                return Err(Error::Invalid(format!(
                    "{}: duplicate document id {:?}",
                    f.display(),
                    d.id
                )));
            }
            docs.push(d);
        }
    }
    if docs.is_empty() {
        return Err(Error::Invalid(format!(
            "{}: no documents found",
            path.display()
        )));
    }
    Ok(docs)
}

pub fn documents_to_string(docs: &[&Document]) -> String {
    let mut s = String::new();
    for d in docs {
        s.push_str(
            &serde_json::to_string(&DocumentLine::from_document(d)).expect("document serializes"),
        );
        s.push('\n');
    }
    s
}

pub fn parse_records(path: &Path, text: &str) -> Result<Vec<InstructionRecord>> {
    let mut out = Vec::new();
    for (n, rec) in parse_lines::<InstructionRecordLine>(path, text)? {
        let rec = rec.into_record();
        rec.validate().map_err(|e| Error::parse(path, n, e))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_records(path: &Path) -> Result<Vec<InstructionRecord>> {
    parse_records(path, &read_text(path)?)
}

pub fn records_to_string(records: &[InstructionRecord]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("record serializes"));
        s.push('\n');
    }
    s
}

/// Record lines where `source` may be omitted (seed files are hand-written).
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InstructionRecordLine {
    instruction: String,
    #[serde(default)]
    input: Option<String>,
    output: String,
    #[serde(default)]
    source: Option<InstructionSource>,
    #[serde(default)]
    provenance: Option<String>,
}

impl InstructionRecordLine {
    fn into_record(self) -> InstructionRecord {
        InstructionRecord {
            instruction: self.instruction,
            input: self.input,
            output: self.output,
            source: self.source.unwrap_or(InstructionSource::Seed),
            provenance: self.provenance,
        }
    }
}

/// A Self-QA source: either a document or a structured record.
#[derive(Debug, Clone, PartialEq)]
pub enum QaSource {
    Document(Document),
    Structured(StructuredRecord),
}

/// Lines with an `entity` key are structured records, the rest documents.
pub fn parse_qa_sources(path: &Path, text: &str) -> Result<Vec<QaSource>> {
    let mut out = Vec::new();
    for (n, value) in parse_lines::<serde_json::Value>(path, text)? {
        let src = if value.get("entity").is_some() {
            let rec: StructuredRecord =
                serde_json::from_value(value).map_err(|e| Error::parse(path, n, e))?;
            rec.validate().map_err(|e| Error::parse(path, n, e))?;
            QaSource::Structured(rec)
        } else {
            let line: DocumentLine =
                serde_json::from_value(value).map_err(|e| Error::parse(path, n, e))?;
            let doc = line.into_document().map_err(|m| Error::parse(path, n, m))?;
            if doc.kind() != Kind::Pretrain {
                return Err(Error::parse(
                    path,
                    n,
                    "self-qa sources must be pretrain documents",
                ));
            }
            QaSource::Document(doc)
        };
        out.push(src);
    }
    Ok(out)
}

pub fn read_qa_sources(path: &Path) -> Result<Vec<QaSource>> {
    parse_qa_sources(path, &read_text(path)?)
}

/// Writes via a temporary sibling and rename so readers never see half a file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::output(dir, e))?;
    }
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::output(&tmp, e))?;
    f.write_all(bytes)
        .and_then(|_| f.sync_all())
        .map_err(|e| Error::output(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::output(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: &str = "corpus.jsonl";

    #[test]
    fn round_trip() {
        let text = concat!(
            r#"{"id":"g1","domain":"general","kind":"pretrain","text":"hello"}"#,
            "\n\n",
            r#"{"id":"f1","domain":"financial","kind":"instruction","instruction":"q","input":"i","output":"a","source":"self_instruct"}"#,
            "\n"
        );
        let docs = parse_documents(Path::new(P), text).unwrap();
        assert_eq!(docs.len(), 2);
        let again = documents_to_string(&docs.iter().collect::<Vec<_>>());
        assert_eq!(parse_documents(Path::new(P), &again).unwrap(), docs);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("\n{\"id\":\"a\",\"domain\":\"general\",\"kind\":\"pretrain\"}", 2, "text"),
            ("{\"id\":\"a\",\"domain\":\"retail\",\"kind\":\"pretrain\",\"text\":\"x\"}", 1, "retail"),
            ("{\"id\":\"a\",\"domain\":\"general\",\"kind\":\"pretrain\",\"text\":\"x\",\"extra\":1}", 1, "extra"),
            ("{\"id\":\"a\",\"domain\":\"general\",\"kind\":\"instruction\",\"instruction\":\" \",\"output\":\"o\"}", 1, "instruction"),
            ("not json", 1, "expected"),
        ];
        for (text, line, needle) in cases {
            match parse_documents(Path::new(P), text) {
                Err(e @ Error::Parse { .. }) => {
                    let msg = e.to_string();
                    assert!(msg.starts_with(&format!("{P}:{line}:")), "{msg}");
                    assert!(msg.contains(needle), "{msg}");
                    assert_eq!(e.exit_code(), 2);
                }
                other => panic!("{text}: {other:?}"),
            }
        }
        let dup = "{\"id\":\"a\",\"domain\":\"general\",\"kind\":\"pretrain\",\"text\":\"x\"}\n"
            .repeat(2);
        assert!(parse_documents(Path::new(P), &dup)
            .unwrap_err()
            .to_string()
            .contains(":2:"));
    }

    #[test]
    fn seed_records_default_to_seed_source() {
        let recs = parse_records(
            Path::new("s"),
            "{\"instruction\":\"Name a bond.\",\"output\":\"Treasury.\"}",
        )
        .unwrap();
        assert_eq!(recs[0].source, InstructionSource::Seed);
        assert_eq!(
            parse_records(Path::new("s"), &records_to_string(&recs)).unwrap(),
            recs
        );
    }

    #[test]
    fn qa_sources_by_shape() {
        let text = concat!(
            r#"{"entity":"Acme","fields":{"revenue":12.5,"listed":true,"ticker":"ACM"}}"#,
            "\n",
            r#"{"id":"f1","domain":"financial","kind":"pretrain","text":"Rates rose."}"#
        );
        let src = parse_qa_sources(Path::new("q"), text).unwrap();
        assert!(matches!(src[0], QaSource::Structured(_)));
        assert!(matches!(src[1], QaSource::Document(_)));
        assert!(parse_qa_sources(Path::new("q"), r#"{"entity":"Acme","fields":{}}"#).is_err());
    }
}
