//! Feature-sequence variants of an annotated sample.
//!
//! Every form, lemma or entity label that ends up inside a feature is an
//! *atom*; atoms are escaped (`\` `/` `_` and space become `\\` `\/` `\_` `\s`)
//! so that `/` can join an atom with its tag and `_` can join the atoms of a
//! chunk without ambiguity.

mod chunk;

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use chunk::{chunk, chunk_tokens, Chunk, ChunkKind};

use crate::corpus::{ner_type, AnnotatedSample, AnnotatedToken};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VariantId {
    #[serde(rename = "TOK")]
    Tok,
    #[serde(rename = "LEM")]
    Lem,
    #[serde(rename = "POS")]
    Pos,
    #[serde(rename = "TOK_POS")]
    TokPos,
    #[serde(rename = "LEM_POS")]
    LemPos,
    #[serde(rename = "TOK_NER")]
    TokNer,
    #[serde(rename = "LEM_NER")]
    LemNer,
    #[serde(rename = "CHNK")]
    Chnk,
    #[serde(rename = "CHNK_NER")]
    ChnkNer,
    #[serde(rename = "DEP")]
    Dep,
    #[serde(rename = "DEP_NER")]
    DepNer,
}

impl VariantId {
    pub const ALL: [VariantId; 11] = [
        VariantId::Tok,
        VariantId::Lem,
        VariantId::Pos,
        VariantId::TokPos,
        VariantId::LemPos,
        VariantId::TokNer,
        VariantId::LemNer,
        VariantId::Chnk,
        VariantId::ChnkNer,
        VariantId::Dep,
        VariantId::DepNer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VariantId::Tok => "TOK",
            VariantId::Lem => "LEM",
            VariantId::Pos => "POS",
            VariantId::TokPos => "TOK_POS",
            VariantId::LemPos => "LEM_POS",
            VariantId::TokNer => "TOK_NER",
            VariantId::LemNer => "LEM_NER",
            VariantId::Chnk => "CHNK",
            VariantId::ChnkNer => "CHNK_NER",
            VariantId::Dep => "DEP",
            VariantId::DepNer => "DEP_NER",
        }
    }

    /// One feature per token (possibly merged by entity spans), as opposed
    /// to one feature per chunk.
    pub fn is_token_granular(self) -> bool {
        !matches!(
            self,
            VariantId::Chnk | VariantId::ChnkNer | VariantId::Dep | VariantId::DepNer
        )
    }

    pub fn uses_ner(self) -> bool {
        matches!(
            self,
            VariantId::TokNer | VariantId::LemNer | VariantId::ChnkNer | VariantId::DepNer
        )
    }

    pub fn uses_dependencies(self) -> bool {
        !self.is_token_granular()
    }
}

impl fmt::Display for VariantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VariantId {
    type Err = Error;

    /// Accepts `TOK_POS`, `TOK+POS` and lowercase spellings.
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('+', "_");
        VariantId::ALL
            .into_iter()
            .find(|v| v.name() == norm)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown variant {s:?}")))
    }
}

/// A variant, optionally with punctuation removed (`LEM-NOPUNCT`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Variant {
    pub id: VariantId,
    pub no_punct: bool,
}

impl Variant {
    pub const fn new(id: VariantId) -> Self {
        Variant { id, no_punct: false }
    }

    pub fn without_punct(id: VariantId) -> Result<Self> {
        if !id.is_token_granular() {
            return Err(Error::InvalidArgument(format!(
                "punctuation stripping needs a token-granular variant, got {id}"
            )));
        }
        Ok(Variant { id, no_punct: true })
    }

    pub fn all() -> Vec<Variant> {
        VariantId::ALL.into_iter().map(Variant::new).collect()
    }
}

impl From<VariantId> for Variant {
    fn from(id: VariantId) -> Self {
        Variant::new(id)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.no_punct {
            write!(f, "{}-NOPUNCT", self.id)
        } else {
            write!(f, "{}", self.id)
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        match upper.strip_suffix("-NOPUNCT") {
            Some(base) => Variant::without_punct(base.parse()?),
            None => Ok(Variant::new(upper.parse()?)),
        }
    }
}

impl Serialize for Variant {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Variant {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DeriveOptions {
    /// Lowercase forms and lemmas (tags are never folded).
    pub fold_case: bool,
}

/// Ordered features of one sample under one variant. `punct[i]` is true when
/// every token behind feature `i` is punctuation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSequence {
    pub variant: VariantId,
    pub features: Vec<String>,
    pub punct: Vec<bool>,
}

impl FeatureSequence {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Builds a sequence from raw features (no punctuation information).
    pub fn from_features(variant: VariantId, features: Vec<String>) -> Self {
        let punct = vec![false; features.len()];
        FeatureSequence {
            variant,
            features,
            punct,
        }
    }
}

pub fn escape_atom(s: &str) -> Cow<'_, str> {
    if !s.contains(['\\', '/', '_', ' ']) {
        return Cow::Borrowed(s);
    }
    let mut out = String::with_capacity(s.len() + 4);
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '/' => out.push_str("\\/"),
            '_' => out.push_str("\\_"),
            ' ' => out.push_str("\\s"),
            c => out.push(c),
        }
    }
    Cow::Owned(out)
}

fn atom(s: &str, opts: DeriveOptions) -> String {
    if opts.fold_case {
        escape_atom(&s.to_lowercase()).into_owned()
    } else {
        escape_atom(s).into_owned()
    }
}

/// Entity span id of every token (maximal `B-X I-X*` runs); `None` outside entities.
pub fn entity_spans(tokens: &[AnnotatedToken]) -> Vec<Option<usize>> {
    let mut out = Vec::with_capacity(tokens.len());
    let mut next = 0usize;
    let mut open: Option<(&str, usize)> = None;
    for t in tokens {
        open = match ner_type(&t.ner) {
            Some(('I', ty)) if open.is_some_and(|(o, _)| o == ty) => open,
            Some((_, ty)) => {
                next += 1;
                Some((ty, next - 1))
            }
            None => None,
        };
        out.push(open.map(|(_, id)| id));
    }
    out
}

#[derive(Clone, Copy)]
enum Surface {
    Form,
    Lemma,
}

fn surface(t: &AnnotatedToken, which: Surface) -> &str {
    match which {
        Surface::Form => &t.form,
        Surface::Lemma => &t.lemma,
    }
}

/// Pieces of `range` after entity replacement: (atom, all-punct).
fn ner_atoms(
    tokens: &[AnnotatedToken],
    spans: &[Option<usize>],
    range: std::ops::Range<usize>,
    which: Surface,
    opts: DeriveOptions,
) -> Vec<(String, bool)> {
    let mut out: Vec<(String, bool)> = Vec::new();
    let mut prev_span = None;
    for i in range {
        let t = &tokens[i];
        match spans[i] {
            Some(id) if prev_span == Some(id) => {
                if let Some(last) = out.last_mut() {
                    last.1 &= t.is_punct;
                }
            }
            Some(_) => {
                let ty = t.entity_type().unwrap_or_default();
                out.push((escape_atom(ty).into_owned(), t.is_punct));
            }
            None => out.push((atom(surface(t, which), opts), t.is_punct)),
        }
        prev_span = spans[i];
    }
    out
}

fn check_fields(sample: &AnnotatedSample, variant: VariantId) -> Result<()> {
    let tokens = &sample.tokens;
    if variant.uses_ner() && !tokens.iter().all(|t| !t.ner.is_empty() && t.ner != "_") {
        return Err(Error::MissingField {
            variant: variant.name(),
            field: "NER",
        });
    }
    if variant.uses_dependencies() && !sample.has_dependencies() {
        return Err(Error::MissingField {
            variant: variant.name(),
            field: "dependency",
        });
    }
    Ok(())
}

pub fn derive(sample: &AnnotatedSample, variant: VariantId) -> Result<FeatureSequence> {
    derive_with(sample, variant, DeriveOptions::default())
}

pub fn derive_with(
    sample: &AnnotatedSample,
    variant: VariantId,
    opts: DeriveOptions,
) -> Result<FeatureSequence> {
    check_fields(sample, variant)?;
    let tokens = &sample.tokens;
    let per_token = |f: &dyn Fn(&AnnotatedToken) -> String| -> Vec<(String, bool)> {
        tokens.iter().map(|t| (f(t), t.is_punct)).collect()
    };

    let pairs: Vec<(String, bool)> = match variant {
        VariantId::Tok => per_token(&|t| atom(&t.form, opts)),
        VariantId::Lem => per_token(&|t| atom(&t.lemma, opts)),
        VariantId::Pos => per_token(&|t| escape_atom(&t.upos).into_owned()),
        VariantId::TokPos => per_token(&|t| format!("{}/{}", atom(&t.form, opts), escape_atom(&t.upos))),
        VariantId::LemPos => per_token(&|t| format!("{}/{}", atom(&t.lemma, opts), escape_atom(&t.upos))),
        VariantId::TokNer | VariantId::LemNer => {
            let which = if variant == VariantId::TokNer { Surface::Form } else { Surface::Lemma };
            ner_atoms(tokens, &entity_spans(tokens), 0..tokens.len(), which, opts)
        }
        VariantId::Chnk | VariantId::ChnkNer | VariantId::Dep | VariantId::DepNer => {
            let with_ner = variant.uses_ner();
            let with_rel = matches!(variant, VariantId::Dep | VariantId::DepNer);
            let spans = if with_ner { entity_spans(tokens) } else { Vec::new() };
            chunk_tokens(tokens)
                .into_iter()
                .map(|c| {
                    let atoms: Vec<String> = if with_ner {
                        ner_atoms(tokens, &spans, c.range(), Surface::Form, opts)
                            .into_iter()
                            .map(|(a, _)| a)
                            .collect()
                    } else {
                        tokens[c.range()].iter().map(|t| atom(&t.form, opts)).collect()
                    };
                    let mut feature = atoms.join("_");
                    if with_rel {
                        feature.push('/');
                        feature.push_str(&escape_atom(&tokens[c.head].deprel));
                    }
                    (feature, false)
                })
                .collect()
        }
    };

    let (features, punct) = pairs.into_iter().unzip();
    Ok(FeatureSequence {
        variant,
        features,
        punct,
    })
}

/// Removes features whose source tokens are all punctuation.
pub fn strip_punct(seq: &FeatureSequence) -> Result<FeatureSequence> {
    if !seq.variant.is_token_granular() {
        return Err(Error::InvalidArgument(format!(
            "punctuation stripping needs a token-granular variant, got {}",
            seq.variant
        )));
    }
    let (features, punct) = seq
        .features
        .iter()
        .zip(&seq.punct)
        .filter(|(_, p)| !**p)
        .map(|(f, p)| (f.clone(), *p))
        .unzip();
    Ok(FeatureSequence {
        variant: seq.variant,
        features,
        punct,
    })
}

pub fn derive_variant(sample: &AnnotatedSample, variant: Variant, opts: DeriveOptions) -> Result<FeatureSequence> {
    let seq = derive_with(sample, variant.id, opts)?;
    if variant.no_punct {
        strip_punct(&seq)
    } else {
        Ok(seq)
    }
}

/// Derives one variant for a whole corpus, in sample order.
pub fn derive_corpus(
    corpus: &[AnnotatedSample],
    variant: Variant,
    opts: DeriveOptions,
    exec: crate::Execution,
) -> Result<Vec<FeatureSequence>> {
    exec.map(corpus, |s| derive_variant(s, variant, opts))
        .into_iter()
        .collect()
}

/// One line per sequence, features separated by single spaces.
pub fn export_lines(seqs: &[FeatureSequence]) -> String {
    let mut out = String::new();
    for s in seqs {
        out.push_str(&s.features.join(" "));
        out.push('\n');
    }
    out
}

/// Reads sequences written by [`export_lines`]. Punctuation marks are not
/// recoverable from the text form.
pub fn import_lines(variant: VariantId, text: &str) -> Vec<FeatureSequence> {
    text.lines()
        .map(|l| FeatureSequence::from_features(variant, l.split(' ').filter(|f| !f.is_empty()).map(String::from).collect()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::chunk::tests::{big_dog, john, tok};
    use super::*;
    use crate::corpus::{Label, Sample};

    fn sample(tokens: Vec<AnnotatedToken>) -> AnnotatedSample {
        AnnotatedSample {
            sample: Sample {
                id: "x".into(),
                question: "q".into(),
                answer: String::new(),
                label: Label::NonHarmful,
            },
            tokens,
        }
    }

    fn feats(s: &AnnotatedSample, v: VariantId) -> Vec<String> {
        derive(s, v).unwrap().features
    }

    #[test]
    fn tok_pos_concatenation() {
        let s = sample(vec![
            tok("You", "PRON", Some(2), "nsubj", "O"),
            tok("are", "AUX", Some(2), "cop", "O"),
            tok("stupid", "ADJ", None, "root", "O"),
        ]);
        assert_eq!(feats(&s, VariantId::TokPos), ["You/PRON", "are/AUX", "stupid/ADJ"]);
        assert_eq!(feats(&s, VariantId::LemPos), ["you/PRON", "are/AUX", "stupid/ADJ"]);
        assert_eq!(feats(&s, VariantId::Pos), ["PRON", "AUX", "ADJ"]);
    }

    #[test]
    fn ner_replaces_spans() {
        let s = sample(john());
        assert_eq!(feats(&s, VariantId::TokNer), ["PERSON", "is", "dumb"]);
        assert_eq!(feats(&s, VariantId::LemNer), ["PERSON", "is", "dumb"]);
        let multi = sample(vec![
            tok("John", "PROPN", Some(2), "nsubj", "B-PERSON"),
            tok("Smith", "PROPN", Some(0), "flat", "I-PERSON"),
            tok("met", "VERB", None, "root", "O"),
            tok("Ann", "PROPN", Some(2), "obj", "B-PERSON"),
        ]);
        assert_eq!(feats(&multi, VariantId::TokNer), ["PERSON", "met", "PERSON"]);
        assert_eq!(feats(&multi, VariantId::ChnkNer), ["PERSON", "PERSON", "met", "PERSON"]);
    }

    #[test]
    fn dep_and_chunk_features() {
        let s = sample(big_dog());
        assert_eq!(feats(&s, VariantId::Chnk), ["the_big_dog", "barked"]);
        assert_eq!(feats(&s, VariantId::Dep), ["the_big_dog/nsubj", "barked/root"]);
        let j = sample(john());
        assert_eq!(feats(&j, VariantId::DepNer), ["PERSON/nsubj", "is/cop", "dumb/root"]);
        assert_eq!(feats(&j, VariantId::ChnkNer), ["PERSON", "is", "dumb"]);
    }

    #[test]
    fn chunk_with_entity_inside() {
        let s = sample(vec![
            tok("the", "DET", Some(2), "det", "O"),
            tok("New", "PROPN", Some(2), "compound", "B-GPE"),
            tok("York", "PROPN", None, "root", "I-GPE"),
        ]);
        assert_eq!(feats(&s, VariantId::ChnkNer), ["the_GPE"]);
        assert_eq!(feats(&s, VariantId::DepNer), ["the_GPE/root"]);
    }

    #[test]
    fn atoms_are_escaped() {
        let s = sample(vec![
            tok("a/b", "X", Some(1), "compound", "O"),
            tok("c_d", "NOUN", None, "root", "O"),
        ]);
        assert_eq!(feats(&s, VariantId::TokPos), ["a\\/b/X", "c\\_d/NOUN"]);
        assert_eq!(feats(&s, VariantId::Chnk), ["a\\/b_c\\_d"]);
        assert_eq!(escape_atom("a b\\"), "a\\sb\\\\");
    }

    #[test]
    fn fold_case_only_touches_atoms() {
        let s = sample(john());
        let f = derive_with(&s, VariantId::TokPos, DeriveOptions { fold_case: true }).unwrap();
        assert_eq!(f.features, ["john/PROPN", "is/AUX", "dumb/ADJ"]);
    }

    #[test]
    fn strip_punct_removes_marks() {
        let s = sample(vec![
            tok("you", "PRON", Some(2), "nsubj", "O"),
            tok("are", "AUX", Some(2), "cop", "O"),
            tok("stupid", "ADJ", None, "root", "O"),
            tok("!", "PUNCT", Some(2), "punct", "O"),
        ]);
        let seq = derive(&s, VariantId::Tok).unwrap();
        assert_eq!(strip_punct(&seq).unwrap().features, ["you", "are", "stupid"]);
        let clean = strip_punct(&seq).unwrap();
        assert_eq!(strip_punct(&clean).unwrap(), clean);
        let chunks = derive(&s, VariantId::Chnk).unwrap();
        assert!(strip_punct(&chunks).is_err());
    }

    #[test]
    fn strip_punct_can_lower_fd() {
        // [a a a !]: fd 2/4 before, 1/3 after
        let seq = FeatureSequence {
            variant: VariantId::Tok,
            features: vec!["a".into(), "a".into(), "a".into(), "!".into()],
            punct: vec![false, false, false, true],
        };
        let after = strip_punct(&seq).unwrap();
        assert_eq!(after.len(), 3);
    }

    #[test]
    fn missing_annotations_are_errors() {
        let mut t = john();
        t[0].ner = "_".into();
        let s = sample(t);
        assert!(matches!(derive(&s, VariantId::TokNer), Err(Error::MissingField { field: "NER", .. })));
        assert!(derive(&s, VariantId::Tok).is_ok());
        let mut t = john();
        t[1].deprel = "_".into();
        let s = sample(t);
        assert!(matches!(derive(&s, VariantId::Dep), Err(Error::MissingField { .. })));
    }

    #[test]
    fn variant_names_parse() {
        for v in VariantId::ALL {
            assert_eq!(v.name().parse::<VariantId>().unwrap(), v);
        }
        assert_eq!("tok+pos".parse::<VariantId>().unwrap(), VariantId::TokPos);
        let v: Variant = "LEM-NOPUNCT".parse().unwrap();
        assert!(v.no_punct);
        assert_eq!(v.to_string(), "LEM-NOPUNCT");
        assert!("DEP-NOPUNCT".parse::<Variant>().is_err());
        assert!("FOO".parse::<VariantId>().is_err());
    }

    #[test]
    fn export_import() {
        let s = sample(big_dog());
        let seqs = vec![derive(&s, VariantId::Dep).unwrap()];
        let text = export_lines(&seqs);
        assert_eq!(text, "the_big_dog/nsubj barked/root\n");
        assert_eq!(import_lines(VariantId::Dep, &text)[0].features, seqs[0].features);
    }
}
