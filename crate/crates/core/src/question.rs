//! Question-type tagging by leading interrogative.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionType {
    Factual,
    Inferential,
    Other,
}

impl fmt::Display for QuestionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QuestionType::Factual => "factual",
            QuestionType::Inferential => "inferential",
            QuestionType::Other => "other",
        })
    }
}

/// Classify by the first word, ignoring case and surrounding punctuation.
pub fn question_type(query: &str) -> QuestionType {
    let first = query
        .split_whitespace()
        .next()
        .unwrap_or("")
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase();
    // Contractions like "What's" keep only the interrogative.
    let word = first.split('\'').next().unwrap_or("");
    match word {
        "what" | "who" | "where" | "when" | "which" | "whom" | "whose" => QuestionType::Factual,
        "why" | "how" => QuestionType::Inferential,
        _ => QuestionType::Other,
    }
}
