//! Fixed prompt templates. Changing the wording changes mock output and
//! therefore any recorded fixture, so each template carries a version.

use alloc::{format, string::String};

use crate::corpus::InstructionRecord;

pub const TEMPLATE_VERSION: u32 = 1;

/// Line carrying the requested number of pairs; parsed back by the mock.
pub const COUNT_PREFIX: &str = "Count: ";
pub const SELF_INSTRUCT_TASK: &str = "Task: self-instruct";
pub const SELF_QA_TASK: &str = "Task: self-qa";
pub const MATERIAL_START: &str = "Material:";
pub const MATERIAL_END: &str = "End of material.";

pub fn self_instruct_prompt(examples: &[&InstructionRecord], batch: usize, count: usize) -> String {
    let mut p = format!(
        "{SELF_INSTRUCT_TASK}\nVersion: {TEMPLATE_VERSION}\nBatch: {batch}\n\
         Come up with new, varied task instructions together with a good answer to each.\n\
         Examples:\n"
    );
    for ex in examples {
        p.push_str(&format!(
            "Q: {}\nA: {}\n",
            one_line(&ex.instruction),
            one_line(&ex.output)
        ));
    }
    p.push_str(&format!(
        "Write {count} new pairs. Each pair is one line starting with \"Q:\" followed by one line starting with \"A:\".\n\
         {COUNT_PREFIX}{count}\n"
    ));
    p
}

pub fn self_qa_prompt(material: &str, count: usize) -> String {
    format!(
        "{SELF_QA_TASK}\nVersion: {TEMPLATE_VERSION}\n\
         Read the material and write questions it answers, each with its answer.\n\
         {MATERIAL_START}\n{material}\n{MATERIAL_END}\n\
         Write {count} pairs. Each pair is one line starting with \"Q:\" followed by one line starting with \"A:\".\n\
         {COUNT_PREFIX}{count}\n"
    )
}

fn one_line(s: &str) -> String {
    s.split_whitespace()
        .collect::<alloc::vec::Vec<_>>()
        .join(" ")
}
