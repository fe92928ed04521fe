//! Byte-level tokenizer: ids 0..=255 are raw bytes, followed by three specials.

use alloc::{format, string::String, vec::Vec};

use super::{CorpusError, InstructionRecord, Result};

pub const PAD: u32 = 256;
pub const DOC_SEP: u32 = 257;
/// Marks the start of an instruction's response.
pub const RESP: u32 = 258;
pub const VOCAB_SIZE: usize = 259;

pub fn tokenize(text: &str) -> Vec<u32> {
    tokenize_bytes(text.as_bytes())
}

pub fn tokenize_bytes(bytes: &[u8]) -> Vec<u32> {
    bytes.iter().map(|&b| u32::from(b)).collect()
}

/// Inverse of [`tokenize_bytes`]. Specials render as `<pad>`, `<sep>` and
/// `<resp>`.
pub fn detokenize(tokens: &[u32]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(tokens.len());
    for &t in tokens {
        match t {
            0..=255 => out.push(t as u8),
            PAD => out.extend_from_slice(b"<pad>"),
            DOC_SEP => out.extend_from_slice(b"<sep>"),
            RESP => out.extend_from_slice(b"<resp>"),
            _ => return Err(CorpusError::InvalidToken(t)),
        }
    }
    Ok(out)
}

pub fn detokenize_to_string(tokens: &[u32]) -> Result<String> {
    String::from_utf8(detokenize(tokens)?).map_err(|_| CorpusError::InvalidUtf8)
}

/// Token form of an instruction sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormattedInstruction {
    pub tokens: Vec<u32>,
    /// Index of the first response token; `tokens[response_start - 1] == RESP`.
    pub response_start: usize,
}

/// `"Human: {instruction}\n{input}\n" RESP {output}`, where the input line is
/// omitted entirely when there is no input.
pub fn format_instruction(rec: &InstructionRecord) -> Result<FormattedInstruction> {
    rec.validate()?;
    let prompt = match rec.input.as_deref().filter(|s| !s.is_empty()) {
        Some(input) => format!("Human: {}\n{}\n", rec.instruction, input),
        None => format!("Human: {}\n", rec.instruction),
    };
    let mut tokens = tokenize(&prompt);
    tokens.push(RESP);
    let response_start = tokens.len();
    tokens.extend(tokenize(&rec.output));
    Ok(FormattedInstruction {
        tokens,
        response_start,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::InstructionSource;
    use alloc::vec;

    #[test]
    fn byte_identity() {
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("AB"), vec![65, 66]);
        assert_eq!(detokenize(&[65, 66]).unwrap(), b"AB");
        assert_eq!(detokenize(&[259]), Err(CorpusError::InvalidToken(259)));
        assert_eq!(detokenize_to_string(&[65, RESP, 66]).unwrap(), "A<resp>B");
        assert_eq!(detokenize_to_string(&[0xff]), Err(CorpusError::InvalidUtf8));
    }

    fn rec(input: Option<&str>) -> InstructionRecord {
        InstructionRecord {
            instruction: "Summarise".into(),
            input: input.map(Into::into),
            output: "Profits rose.".into(),
            source: InstructionSource::Seed,
            provenance: None,
        }
    }

    #[test]
    fn formatting_layout() {
        let f = format_instruction(&rec(None)).unwrap();
        let prompt_len = "Human: Summarise\n".len();
        assert_eq!(f.response_start, prompt_len + 1);
        assert_eq!(f.tokens[f.response_start - 1], RESP);
        assert_eq!(
            detokenize(&f.tokens[..prompt_len]).unwrap(),
            b"Human: Summarise\n"
        );
        assert_eq!(
            detokenize(&f.tokens[f.response_start..]).unwrap(),
            b"Profits rose."
        );

        let f = format_instruction(&rec(Some("Q3 report"))).unwrap();
        assert_eq!(
            detokenize(&f.tokens[..f.response_start - 1]).unwrap(),
            b"Human: Summarise\nQ3 report\n"
        );
        // empty optional input is the same as none
        assert_eq!(
            format_instruction(&rec(Some(""))).unwrap(),
            format_instruction(&rec(None)).unwrap()
        );

        let mut bad = rec(None);
        bad.output.clear();
        assert!(format_instruction(&bad).is_err());
    }

    proptest::proptest! {
        #[test]
        fn byte_round_trip(bytes in proptest::collection::vec(proptest::prelude::any::<u8>(), 0..200)) {
            let toks = tokenize_bytes(&bytes);
            proptest::prop_assert!(toks.iter().all(|&t| t < 256));
            proptest::prop_assert_eq!(detokenize(&toks).unwrap(), bytes);
        }

        #[test]
        fn response_span_round_trips(ins in "[a-z][^\\x00]{0,29}", out in "[A-Z][^\\x00]{0,29}", inp in proptest::option::of("[a-z ]{0,10}")) {
            let r = InstructionRecord {
                instruction: ins,
                input: inp,
                output: out.clone(),
                source: InstructionSource::SelfInstruct,
                provenance: None,
            };
            let f = format_instruction(&r).unwrap();
            proptest::prop_assert_eq!(f.tokens[f.response_start - 1], RESP);
            proptest::prop_assert_eq!(detokenize_to_string(&f.tokens[f.response_start..]).unwrap(), out);
        }
    }
}
