//! Labeled samples and their token-level linguistic annotations.
//!
//! Samples come from a labeled CSV (`id,question,answer,label`); annotations
//! come from a CoNLL-U Plus file whose blocks are keyed by a
//! `# sample_id = <id>` comment. Question and answer tokens are concatenated
//! into one token stream per sample.

mod conllu;
mod samples;
mod stats;

use serde::{Deserialize, Serialize};

pub use conllu::{attach_annotations, parse_conllu, read_conllu, write_conllu, AnnotationBlock};
pub use samples::{load_samples, parse_samples};
pub use stats::{corpus_stats, CorpusStats, LengthStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    NonHarmful = 0,
    Harmful = 1,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn from_u8(v: u8) -> Option<Label> {
        match v {
            0 => Some(Label::NonHarmful),
            1 => Some(Label::Harmful),
            _ => None,
        }
    }

    /// Parses `0`, `1`, `yes`, `no` (case-insensitive, surrounding whitespace ignored).
    pub fn parse(token: &str) -> Option<Label> {
        let t = token.trim();
        if t == "1" || t.eq_ignore_ascii_case("yes") {
            Some(Label::Harmful)
        } else if t == "0" || t.eq_ignore_ascii_case("no") {
            Some(Label::NonHarmful)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub question: String,
    pub answer: String,
    pub label: Label,
}

/// One annotated token. `head` is a 0-based index into the sample's token
/// list, `None` for a root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedToken {
    pub form: String,
    pub lemma: String,
    pub upos: String,
    pub ner: String,
    pub head: Option<usize>,
    pub deprel: String,
    pub is_punct: bool,
}

impl AnnotatedToken {
    /// Entity type carried by the NER tag, if any (`B-PERSON` -> `PERSON`).
    pub fn entity_type(&self) -> Option<&str> {
        ner_type(&self.ner).map(|(_, ty)| ty)
    }
}

/// Splits a BIO tag into (`'B'|'I'`, type). `O`, `_` and empty tags yield `None`.
pub(crate) fn ner_type(tag: &str) -> Option<(char, &str)> {
    let (prefix, ty) = tag.split_once('-')?;
    match prefix {
        "B" | "I" if !ty.is_empty() => Some((prefix.chars().next().unwrap(), ty)),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedSample {
    pub sample: Sample,
    pub tokens: Vec<AnnotatedToken>,
}

impl AnnotatedSample {
    pub fn id(&self) -> &str {
        &self.sample.id
    }

    pub fn label(&self) -> Label {
        self.sample.label
    }

    pub fn has_ner(&self) -> bool {
        self.tokens.iter().any(|t| !t.ner.is_empty() && t.ner != "_")
    }

    pub fn has_dependencies(&self) -> bool {
        self.tokens.iter().all(|t| !t.deprel.is_empty() && t.deprel != "_")
    }
}

/// Labels of a corpus as 0/1 bytes, in sample order.
pub fn labels(corpus: &[AnnotatedSample]) -> Vec<u8> {
    corpus.iter().map(|s| s.label().as_u8()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_tokens() {
        assert_eq!(Label::parse("YES"), Some(Label::Harmful));
        assert_eq!(Label::parse(" no "), Some(Label::NonHarmful));
        assert_eq!(Label::parse("1"), Some(Label::Harmful));
        assert_eq!(Label::parse("maybe"), None);
    }

    #[test]
    fn bio_split() {
        assert_eq!(ner_type("B-PERSON"), Some(('B', "PERSON")));
        assert_eq!(ner_type("I-ORG"), Some(('I', "ORG")));
        assert_eq!(ner_type("O"), None);
        assert_eq!(ner_type("X-ORG"), None);
    }
}

/// Loads a labeled CSV and its CoNLL-U Plus annotations in one step.
pub fn load_corpus(
    samples: impl AsRef<std::path::Path>,
    annotations: impl AsRef<std::path::Path>,
) -> crate::Result<Vec<AnnotatedSample>> {
    attach_annotations(load_samples(samples)?, read_conllu(annotations)?)
}
