use alloc::{format, string::String};
use core::fmt;

use serde::{Deserialize, Serialize};

use super::{CorpusError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    General,
    Financial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Pretrain,
    Instruction,
}

/// One of the four corpus streams, `domain x kind`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stream {
    GeneralPretrain,
    FinancialPretrain,
    GeneralInstruction,
    FinancialInstruction,
}

impl Stream {
    /// Canonical order; also the concatenation order before shuffling.
    pub const ALL: [Stream; 4] = [
        Stream::GeneralPretrain,
        Stream::FinancialPretrain,
        Stream::GeneralInstruction,
        Stream::FinancialInstruction,
    ];

    pub fn new(domain: Domain, kind: Kind) -> Self {
        match (domain, kind) {
            (Domain::General, Kind::Pretrain) => Stream::GeneralPretrain,
            (Domain::Financial, Kind::Pretrain) => Stream::FinancialPretrain,
            (Domain::General, Kind::Instruction) => Stream::GeneralInstruction,
            (Domain::Financial, Kind::Instruction) => Stream::FinancialInstruction,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn domain(self) -> Domain {
        match self {
            Stream::GeneralPretrain | Stream::GeneralInstruction => Domain::General,
            _ => Domain::Financial,
        }
    }

    pub fn kind(self) -> Kind {
        match self {
            Stream::GeneralPretrain | Stream::FinancialPretrain => Kind::Pretrain,
            _ => Kind::Instruction,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stream::GeneralPretrain => "general_pretrain",
            Stream::FinancialPretrain => "financial_pretrain",
            Stream::GeneralInstruction => "general_instruction",
            Stream::FinancialInstruction => "financial_instruction",
        }
    }
}

impl fmt::Display for Stream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstructionSource {
    Seed,
    SelfInstruct,
    SelfQaUnstructured,
    SelfQaStructured,
}

/// Instruction / optional input / output triple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionRecord {
    pub instruction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    pub output: String,
    pub source: InstructionSource,
    /// Id of the document or record this sample was generated from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

impl InstructionRecord {
    pub fn validate(&self) -> Result<()> {
        if self.instruction.trim().is_empty() {
            return Err(CorpusError::InvalidRecord("instruction is empty".into()));
        }
        if self.output.trim().is_empty() {
            return Err(CorpusError::InvalidRecord(format!(
                "output is empty for instruction {:?}",
                self.instruction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Content {
    Text(String),
    Instruction(InstructionRecord),
}

/// One corpus item. The kind follows from the content: free text is
/// pretraining data, an instruction record is instruction data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub domain: Domain,
    pub content: Content,
}

impl Document {
    pub fn pretrain(
        id: impl Into<String>,
        domain: Domain,
        text: impl Into<String>,
    ) -> Result<Self> {
        let doc = Self {
            id: id.into(),
            domain,
            content: Content::Text(text.into()),
        };
        doc.validate()?;
        Ok(doc)
    }

    pub fn instruction(
        id: impl Into<String>,
        domain: Domain,
        record: InstructionRecord,
    ) -> Result<Self> {
        let doc = Self {
            id: id.into(),
            domain,
            content: Content::Instruction(record),
        };
        doc.validate()?;
        Ok(doc)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.content {
            Content::Text(t) if t.is_empty() => Err(CorpusError::EmptyText(self.id.clone())),
            Content::Text(_) => Ok(()),
            Content::Instruction(r) => r.validate(),
        }
    }

    pub fn kind(&self) -> Kind {
        match self.content {
            Content::Text(_) => Kind::Pretrain,
            Content::Instruction(_) => Kind::Instruction,
        }
    }

    pub fn stream(&self) -> Stream {
        Stream::new(self.domain, self.kind())
    }

    /// Token count of the document body, excluding the trailing separator
    /// added by packing.
    pub fn token_len(&self) -> usize {
        match &self.content {
            Content::Text(t) => t.len(),
            Content::Instruction(r) => super::format_instruction(r)
                .map(|f| f.tokens.len())
                .unwrap_or(0),
        }
    }
}
