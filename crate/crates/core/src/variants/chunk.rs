//! Deterministic noun/verb phrase chunking over dependency annotations.
//!
//! A noun chunk is a NOUN/PROPN/PRON token plus its contiguous left-side
//! dependents attached by det, amod, compound, nummod or poss. A verb chunk is
//! a VERB/AUX token plus contiguous left-side aux/neg dependents. Candidate
//! heads claim tokens right to left; a head already swallowed by a chunk to
//! its right is not a head of its own. Everything unclaimed is a singleton.

use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotatedSample, AnnotatedToken};

const NOUN_HEADS: [&str; 3] = ["NOUN", "PROPN", "PRON"];
const NOUN_DEPS: [&str; 5] = ["det", "amod", "compound", "nummod", "poss"];
const VERB_HEADS: [&str; 2] = ["VERB", "AUX"];
const VERB_DEPS: [&str; 2] = ["aux", "neg"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChunkKind {
    Noun,
    Verb,
    Other,
}

/// Tokens `start..end` of a sample, headed by token `head`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub start: usize,
    pub end: usize,
    pub head: usize,
    pub kind: ChunkKind,
}

impl Chunk {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    /// Offset of the head within the span.
    pub fn head_offset(&self) -> usize {
        self.head - self.start
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

/// `nmod:poss` matches `poss`, `aux:pass` matches `aux`.
fn relation_matches(deprel: &str, allowed: &[&str]) -> bool {
    if allowed.contains(&deprel) {
        return true;
    }
    match deprel.split_once(':') {
        Some((base, sub)) => allowed.contains(&base) || allowed.contains(&sub),
        None => false,
    }
}

fn head_kind(t: &AnnotatedToken) -> Option<(ChunkKind, &'static [&'static str])> {
    let upos = t.upos.as_str();
    if NOUN_HEADS.contains(&upos) {
        Some((ChunkKind::Noun, &NOUN_DEPS))
    } else if VERB_HEADS.contains(&upos) {
        Some((ChunkKind::Verb, &VERB_DEPS))
    } else {
        None
    }
}

pub fn chunk(sample: &AnnotatedSample) -> Vec<Chunk> {
    chunk_tokens(&sample.tokens)
}

pub fn chunk_tokens(tokens: &[AnnotatedToken]) -> Vec<Chunk> {
    let n = tokens.len();
    let mut claimed = vec![false; n];
    let mut chunks = Vec::with_capacity(n);

    for i in (0..n).rev() {
        if claimed[i] {
            continue;
        }
        let Some((kind, rels)) = head_kind(&tokens[i]) else {
            continue;
        };
        let mut start = i;
        while start > 0
            && !claimed[start - 1]
            && tokens[start - 1].head == Some(i)
            && relation_matches(&tokens[start - 1].deprel, rels)
        {
            start -= 1;
        }
        claimed[start..=i].iter_mut().for_each(|c| *c = true);
        chunks.push(Chunk {
            start,
            end: i + 1,
            head: i,
            kind,
        });
    }
    for (i, _) in claimed.iter().enumerate().filter(|(_, c)| !**c) {
        chunks.push(Chunk {
            start: i,
            end: i + 1,
            head: i,
            kind: ChunkKind::Other,
        });
    }
    chunks.sort_by_key(|c| c.start);
    chunks
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn tok(form: &str, upos: &str, head: Option<usize>, deprel: &str, ner: &str) -> AnnotatedToken {
        AnnotatedToken {
            form: form.into(),
            lemma: form.to_lowercase(),
            upos: upos.into(),
            ner: ner.into(),
            head,
            deprel: deprel.into(),
            is_punct: upos == "PUNCT",
        }
    }

    pub(crate) fn big_dog() -> Vec<AnnotatedToken> {
        vec![
            tok("the", "DET", Some(2), "det", "O"),
            tok("big", "ADJ", Some(2), "amod", "O"),
            tok("dog", "NOUN", Some(3), "nsubj", "O"),
            tok("barked", "VERB", None, "root", "O"),
        ]
    }

    pub(crate) fn john() -> Vec<AnnotatedToken> {
        vec![
            tok("John", "PROPN", Some(2), "nsubj", "B-PERSON"),
            tok("is", "AUX", Some(2), "cop", "O"),
            tok("dumb", "ADJ", None, "root", "O"),
        ]
    }

    fn spans(c: &[Chunk]) -> Vec<(usize, usize)> {
        c.iter().map(|c| (c.start, c.end)).collect()
    }

    #[test]
    fn noun_phrase_with_determiner_and_adjective() {
        let c = chunk_tokens(&big_dog());
        assert_eq!(spans(&c), vec![(0, 3), (3, 4)]);
        assert_eq!(c[0].kind, ChunkKind::Noun);
        assert_eq!(c[0].head, 2);
        assert_eq!(c[0].head_offset(), 2);
        assert_eq!(c[1].kind, ChunkKind::Verb);
    }

    #[test]
    fn john_is_three_singletons() {
        let c = chunk_tokens(&john());
        assert_eq!(spans(&c), vec![(0, 1), (1, 2), (2, 3)]);
        assert_eq!(c.iter().map(|c| c.kind).collect::<Vec<_>>(), vec![ChunkKind::Noun, ChunkKind::Verb, ChunkKind::Other]);
    }

    #[test]
    fn single_token() {
        let c = chunk_tokens(&[tok("hey", "INTJ", None, "root", "O")]);
        assert_eq!(spans(&c), vec![(0, 1)]);
        assert_eq!(c[0].kind, ChunkKind::Other);
    }

    #[test]
    fn verb_group_and_subtyped_relations() {
        // "has not been eaten my sandwich"-ish: aux:pass and nmod:poss subtypes
        let t = vec![
            tok("has", "AUX", Some(3), "aux", "O"),
            tok("not", "PART", Some(3), "neg", "O"),
            tok("been", "AUX", Some(3), "aux:pass", "O"),
            tok("eaten", "VERB", None, "root", "O"),
            tok("my", "PRON", Some(5), "nmod:poss", "O"),
            tok("sandwich", "NOUN", Some(3), "obj", "O"),
        ];
        let c = chunk_tokens(&t);
        assert_eq!(spans(&c), vec![(0, 4), (4, 6)]);
    }

    #[test]
    fn nested_compound_absorbed_by_rightmost_head() {
        let t = vec![
            tok("the", "DET", Some(2), "det", "O"),
            tok("dog", "NOUN", Some(2), "compound", "O"),
            tok("food", "NOUN", None, "root", "O"),
        ];
        assert_eq!(spans(&chunk_tokens(&t)), vec![(0, 3)]);
    }

    #[test]
    fn non_contiguous_dependent_is_not_absorbed() {
        // "the , dog": the comma breaks contiguity
        let t = vec![
            tok("the", "DET", Some(2), "det", "O"),
            tok(",", "PUNCT", Some(2), "punct", "O"),
            tok("dog", "NOUN", None, "root", "O"),
        ];
        assert_eq!(spans(&chunk_tokens(&t)), vec![(0, 1), (1, 2), (2, 3)]);
    }
}
