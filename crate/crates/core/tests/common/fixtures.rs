//! Random annotated corpora and the variant count relations checked on them.

use fdlab::corpus::{AnnotatedSample, AnnotatedToken, Label, Sample};
use fdlab::density::count_features;
use fdlab::seed;
use fdlab::variants::{derive, strip_punct, FeatureSequence, VariantId};
use fdlab::Execution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

const WORDS: &[&str] = &["cat", "Cat", "cats", "run", "ran", "runs", "big", "the", "a", "he", "is", "not", "two", "of"];
const UPOS: &[&str] = &["NOUN", "VERB", "ADJ", "DET", "PRON", "AUX", "PART", "NUM", "ADP", "PROPN"];
const PUNCT: &[&str] = &[".", "!", "?", ","];
const DEPRELS: &[&str] = &[
    "det", "amod", "compound", "nummod", "poss", "nmod:poss", "aux", "aux:pass", "neg", "nsubj", "obj", "advmod",
    "case", "obl", "conj",
];
/// Entity forms by type: disjoint from each other, from `WORDS` and from
/// the type labels.
const ENTITIES: &[(&str, &[&str])] = &[
    ("PERSON", &["Ann", "Bob", "Eve"]),
    ("ORG", &["Acme", "Initech"]),
    ("GPE", &["Oslo", "Lima", "Nome"]),
];

fn lemma(form: &str) -> String {
    let lower = form.to_lowercase();
    match lower.as_str() {
        "ran" | "runs" => "run".into(),
        "cats" => "cat".into(),
        "is" => "be".into(),
        _ => lower,
    }
}

fn token(form: &str, upos: &str, ner: String) -> AnnotatedToken {
    AnnotatedToken {
        form: form.to_string(),
        lemma: if upos == "PROPN" { form.to_string() } else { lemma(form) },
        upos: upos.to_string(),
        ner,
        head: None,
        deprel: "root".to_string(),
        is_punct: upos == "PUNCT",
    }
}

fn tokens(rng: &mut impl Rng) -> Vec<AnnotatedToken> {
    let target = rng.random_range(1..=14);
    let mut out = Vec::new();
    while out.len() < target {
        match rng.random_range(0..10) {
            0 | 1 => out.push(token(PUNCT.choose(rng).unwrap(), "PUNCT", "O".into())),
            2 => {
                let (ty, pool) = ENTITIES.choose(rng).unwrap();
                let len = rng.random_range(1..=3);
                for i in 0..len {
                    let tag = if i == 0 { "B" } else { "I" };
                    out.push(token(pool.choose(rng).unwrap(), "PROPN", format!("{tag}-{ty}")));
                }
            }
            _ => out.push(token(WORDS.choose(rng).unwrap(), UPOS[..9].choose(rng).unwrap(), "O".into())),
        }
    }
    // A random tree: visit tokens in random order, attach each to one
    // visited before it.
    let mut order: Vec<usize> = (0..out.len()).collect();
    order.shuffle(rng);
    for (k, &i) in order.iter().enumerate().skip(1) {
        let h = order[rng.random_range(0..k)];
        out[i].head = Some(h);
        out[i].deprel = if out[i].is_punct {
            "punct".into()
        } else {
            DEPRELS.choose(rng).unwrap().to_string()
        };
    }
    out
}

/// A random corpus of 1-8 samples with 1-14 tokens each.
pub fn annotated_corpus(seed_: u64) -> Vec<AnnotatedSample> {
    let mut rng = seed::rng(seed_, "annotated-fixture");
    let n = rng.random_range(1..=8);
    (0..n)
        .map(|i| {
            let tokens = tokens(&mut rng);
            let forms: Vec<&str> = tokens.iter().map(|t| t.form.as_str()).collect();
            let cut = rng.random_range(0..=forms.len());
            AnnotatedSample {
                sample: Sample {
                    id: format!("s{i}"),
                    question: forms[..cut].join(" "),
                    answer: forms[cut..].join(" "),
                    label: if rng.random_bool(0.3) { Label::Harmful } else { Label::NonHarmful },
                },
                tokens,
            }
        })
        .collect()
}

fn derive_all(corpus: &[AnnotatedSample], v: VariantId) -> Vec<FeatureSequence> {
    corpus.iter().map(|s| derive(s, v).unwrap()).collect()
}

#[derive(Debug, Clone, Copy)]
pub struct Counts {
    pub unique: usize,
    pub total: usize,
}

fn counts(seqs: &[FeatureSequence]) -> Counts {
    let c = count_features(seqs, Execution::Sequential);
    Counts {
        unique: c.unique(),
        total: c.total(),
    }
}

/// Every broken count relation between the variants of `corpus`, as text.
pub fn variant_violations(corpus: &[AnnotatedSample]) -> Vec<String> {
    use VariantId::*;
    let derived: Vec<(VariantId, Vec<FeatureSequence>)> =
        VariantId::ALL.into_iter().map(|v| (v, derive_all(corpus, v))).collect();
    let c = |v: VariantId| counts(&derived.iter().find(|(id, _)| *id == v).unwrap().1);
    let mut bad = Vec::new();
    let mut check = |ok: bool, what: &str| {
        if !ok {
            bad.push(what.to_string());
        }
    };
    check(c(TokPos).total == c(Tok).total, "total(TOK_POS) = total(TOK)");
    check(c(LemPos).total == c(Lem).total, "total(LEM_POS) = total(LEM)");
    check(c(Pos).total == c(Tok).total, "total(POS) = total(TOK)");
    check(c(TokPos).unique >= c(Tok).unique, "unique(TOK_POS) >= unique(TOK)");
    check(c(LemPos).unique >= c(Lem).unique, "unique(LEM_POS) >= unique(LEM)");
    check(c(TokNer).unique <= c(Tok).unique, "unique(TOK_NER) <= unique(TOK)");
    check(c(TokNer).total <= c(Tok).total, "total(TOK_NER) <= total(TOK)");
    check(c(Chnk).total <= c(Tok).total, "total(CHNK) <= total(TOK)");
    check(c(Dep).total == c(Chnk).total, "total(DEP) = total(CHNK)");
    check(c(ChnkNer).total <= c(Chnk).total, "total(CHNK_NER) <= total(CHNK)");
    check(c(Dep).unique >= c(Chnk).unique, "unique(DEP) >= unique(CHNK)");

    for (v, seqs) in derived.iter().filter(|(v, _)| v.is_token_granular()) {
        let before = counts(seqs);
        let stripped: Vec<FeatureSequence> = seqs.iter().map(|s| strip_punct(s).unwrap()).collect();
        let after = counts(&stripped);
        check(after.total <= before.total, &format!("strip_punct does not grow total({v})"));
        if after.total == 0 {
            continue;
        }
        // FD cannot drop when the removed features are, on average, at
        // least as frequent as the corpus average:
        // removed_total / removed_unique >= total / unique.
        let removed_total = before.total - after.total;
        let removed_unique = before.unique - after.unique;
        if removed_total * before.unique >= before.total * removed_unique {
            check(
                after.unique * before.total >= before.unique * after.total,
                &format!("strip_punct does not lower FD({v}) when punctuation is frequent"),
            );
        }
    }
    bad
}
