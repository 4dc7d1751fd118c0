use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{AnnotatedSample, Label};
use crate::error::{Error, Result};

/// Average length of a text field, in words and characters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LengthStats {
    pub words: f64,
    pub chars: f64,
}

/// Descriptive statistics of an annotated corpus.
///
/// Words are whitespace-separated units of the raw text; characters are
/// Unicode scalar values. A post is question plus answer (no separator).
/// Averages are taken over samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_samples: usize,
    pub n_harmful: usize,
    pub n_nonharmful: usize,
    pub n_tokens: usize,
    pub n_unique_tokens: usize,
    pub post: LengthStats,
    pub question: LengthStats,
    pub answer: LengthStats,
    pub harmful_post: LengthStats,
    pub nonharmful_post: LengthStats,
}

impl CorpusStats {
    pub fn harmful_fraction(&self) -> f64 {
        self.n_harmful as f64 / self.n_samples as f64
    }
}

fn words(s: &str) -> usize {
    s.split_whitespace().count()
}

fn chars(s: &str) -> usize {
    s.chars().count()
}

#[derive(Default)]
struct Acc {
    n: usize,
    words: usize,
    chars: usize,
}

impl Acc {
    fn add(&mut self, w: usize, c: usize) {
        self.n += 1;
        self.words += w;
        self.chars += c;
    }

    fn mean(&self) -> LengthStats {
        if self.n == 0 {
            return LengthStats::default();
        }
        LengthStats {
            words: self.words as f64 / self.n as f64,
            chars: self.chars as f64 / self.n as f64,
        }
    }
}

pub fn corpus_stats(corpus: &[AnnotatedSample]) -> Result<CorpusStats> {
    if corpus.is_empty() {
        return Err(Error::Empty("corpus"));
    }
    let mut unique: HashSet<&str> = HashSet::new();
    let mut n_tokens = 0;
    let (mut post, mut question, mut answer) = (Acc::default(), Acc::default(), Acc::default());
    let (mut harmful, mut nonharmful) = (Acc::default(), Acc::default());

    for s in corpus {
        n_tokens += s.tokens.len();
        unique.extend(s.tokens.iter().map(|t| t.form.as_str()));
        let (q, a) = (&s.sample.question, &s.sample.answer);
        let (qw, qc, aw, ac) = (words(q), chars(q), words(a), chars(a));
        question.add(qw, qc);
        answer.add(aw, ac);
        post.add(qw + aw, qc + ac);
        match s.label() {
            Label::Harmful => harmful.add(qw + aw, qc + ac),
            Label::NonHarmful => nonharmful.add(qw + aw, qc + ac),
        }
    }

    Ok(CorpusStats {
        n_samples: corpus.len(),
        n_harmful: harmful.n,
        n_nonharmful: nonharmful.n,
        n_tokens,
        n_unique_tokens: unique.len(),
        post: post.mean(),
        question: question.mean(),
        answer: answer.mean(),
        harmful_post: harmful.mean(),
        nonharmful_post: nonharmful.mean(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AnnotatedToken, Sample};

    fn tok(form: &str) -> AnnotatedToken {
        AnnotatedToken {
            form: form.into(),
            lemma: form.into(),
            upos: "X".into(),
            ner: "O".into(),
            head: None,
            deprel: "root".into(),
            is_punct: false,
        }
    }

    fn annotated(id: &str, q: &str, a: &str, label: Label) -> AnnotatedSample {
        let tokens = q.split_whitespace().chain(a.split_whitespace()).map(tok).collect();
        AnnotatedSample {
            sample: Sample {
                id: id.into(),
                question: q.into(),
                answer: a.into(),
                label,
            },
            tokens,
        }
    }

    #[test]
    fn two_samples() {
        let c = vec![
            annotated("1", "hi there", "you idiot", Label::Harmful),
            annotated("2", "what", "nothing much", Label::NonHarmful),
        ];
        let s = corpus_stats(&c).unwrap();
        assert_eq!((s.n_samples, s.n_harmful, s.n_nonharmful), (2, 1, 1));
        assert_eq!(s.n_tokens, 7);
        assert_eq!(s.post.words, 3.5);
        assert_eq!(s.question.chars, (8.0 + 4.0) / 2.0);
        assert_eq!(s.harmful_post.chars, 17.0);
        assert_eq!(s.nonharmful_post.words, 3.0);
    }

    #[test]
    fn unique_tokens_case_sensitive() {
        let s = corpus_stats(&[annotated("1", "a b a", "", Label::Harmful)]).unwrap();
        assert_eq!((s.n_tokens, s.n_unique_tokens), (3, 2));
        let s = corpus_stats(&[annotated("1", "A a", "", Label::Harmful)]).unwrap();
        assert_eq!(s.n_unique_tokens, 2);
    }

    #[test]
    fn harmful_fraction_of_published_counts() {
        let frac = 913.0 / 12772.0;
        assert_eq!(format!("{:.2}", frac * 100.0), "7.15");
    }

    #[test]
    fn empty_corpus_is_error() {
        assert!(matches!(corpus_stats(&[]), Err(Error::Empty(_))));
    }
}
