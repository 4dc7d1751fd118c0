//! Writes the bundled toy corpus: `samples.csv` and `annotations.conllu`.
//!
//! Usage: `cargo run -p fdlab-core --example make_toy_corpus -- [DIR] [N] [SEED]`

use std::path::PathBuf;

use fdlab::corpus::{write_conllu, AnnotatedSample, AnnotatedToken, Label, Sample};
use fdlab::seed;
use rand::seq::IndexedRandom;
use rand::Rng;

struct Word {
    form: &'static str,
    lemma: &'static str,
}

const fn w(form: &'static str, lemma: &'static str) -> Word {
    Word { form, lemma }
}

const NICE_ADJ: &[Word] = &[
    w("nice", "nice"),
    w("funny", "funny"),
    w("great", "great"),
    w("happy", "happy"),
    w("cool", "cool"),
    w("new", "new"),
    w("old", "old"),
    w("good", "good"),
    w("best", "good"),
    w("better", "good"),
];
const MEAN_ADJ: &[Word] = &[
    w("stupid", "stupid"),
    w("ugly", "ugly"),
    w("worthless", "worthless"),
    w("pathetic", "pathetic"),
    w("dumb", "dumb"),
    w("ugliest", "ugly"),
];
const NICE_NOUN: &[Word] = &[
    w("song", "song"),
    w("songs", "song"),
    w("movie", "movie"),
    w("movies", "movie"),
    w("game", "game"),
    w("games", "game"),
    w("school", "school"),
    w("friend", "friend"),
    w("friends", "friend"),
    w("day", "day"),
    w("book", "book"),
    w("books", "book"),
    w("team", "team"),
    w("dog", "dog"),
    w("summer", "summer"),
    w("pizza", "pizza"),
];
const MEAN_NOUN: &[Word] = &[
    w("loser", "loser"),
    w("losers", "loser"),
    w("idiot", "idiot"),
    w("freak", "freak"),
    w("moron", "moron"),
];
const NICE_VERB: &[Word] = &[
    w("like", "like"),
    w("liked", "like"),
    w("love", "love"),
    w("loved", "love"),
    w("watch", "watch"),
    w("watched", "watch"),
    w("play", "play"),
    w("played", "play"),
    w("enjoy", "enjoy"),
    w("enjoyed", "enjoy"),
];
const MEAN_VERB: &[Word] = &[w("hate", "hate"), w("hated", "hate"), w("despise", "despise")];
const INTRANS: &[Word] = &[
    w("laughed", "laugh"),
    w("left", "leave"),
    w("sleep", "sleep"),
    w("smiled", "smile"),
    w("cried", "cry"),
];
const ADV: &[Word] = &[w("today", "today"), w("again", "again"), w("often", "often"), w("too", "too")];
const PRON_SUBJ: &[&str] = &["I", "you", "we", "they", "he", "she"];
const DET: &[&str] = &["the", "a", "this", "that", "my", "your"];
const PREP: &[&str] = &["at", "with", "in", "about"];
const ENTITIES: &[(&[&str], &str)] = &[
    (&["John"], "PERSON"),
    (&["Sarah"], "PERSON"),
    (&["Mike"], "PERSON"),
    (&["Emma"], "PERSON"),
    (&["Justin", "Bieber"], "PERSON"),
    (&["Lady", "Gaga"], "PERSON"),
    (&["Google"], "ORG"),
    (&["Apple"], "ORG"),
    (&["London"], "GPE"),
    (&["New", "York"], "GPE"),
    (&["Paris"], "GPE"),
];

/// Builds one sentence; heads are sentence-local (0-based, `None` = root).
#[derive(Default)]
struct Sentence {
    tokens: Vec<AnnotatedToken>,
}

impl Sentence {
    fn push(&mut self, form: &str, lemma: &str, upos: &str, head: Option<usize>, deprel: &str) -> usize {
        self.tokens.push(AnnotatedToken {
            form: form.to_string(),
            lemma: lemma.to_string(),
            upos: upos.to_string(),
            ner: "O".to_string(),
            head,
            deprel: deprel.to_string(),
            is_punct: upos == "PUNCT",
        });
        self.tokens.len() - 1
    }

    /// Pushes an entity; the last token is the head, earlier ones attach as
    /// `flat` to the first.
    fn entity(&mut self, rng: &mut impl Rng, head: Option<usize>, deprel: &str) -> usize {
        let (words, ty) = ENTITIES.choose(rng).unwrap();
        let first = self.tokens.len();
        for (i, word) in words.iter().enumerate() {
            let (h, rel) = if i == 0 { (head, deprel) } else { (Some(first), "flat") };
            self.push(word, word, "PROPN", h, rel);
            let tag = if i == 0 { "B" } else { "I" };
            self.tokens.last_mut().unwrap().ner = format!("{tag}-{ty}");
        }
        first
    }

    fn patch_head(&mut self, at: usize, head: usize) {
        self.tokens[at].head = Some(head);
    }
}

fn pick<'a>(rng: &mut impl Rng, words: &'a [Word]) -> &'a Word {
    words.choose(rng).unwrap()
}

/// `SUBJ VERB DET ADJ NOUN .`
fn transitive(rng: &mut impl Rng, mean: bool) -> Sentence {
    let mut s = Sentence::default();
    let subj = if rng.random_bool(0.3) {
        s.entity(rng, None, "nsubj")
    } else {
        let p = *PRON_SUBJ.choose(rng).unwrap();
        s.push(p, &p.to_lowercase(), "PRON", None, "nsubj")
    };
    let verb = pick(rng, if mean { MEAN_VERB } else { NICE_VERB });
    let v = s.push(verb.form, verb.lemma, "VERB", None, "root");
    s.patch_head(subj, v);
    let noun_at = v + 3;
    let det = *DET.choose(rng).unwrap();
    s.push(det, det, "DET", Some(noun_at), "det");
    let adjs = if mean && rng.random_bool(0.5) { MEAN_ADJ } else { NICE_ADJ };
    let adj = pick(rng, adjs);
    s.push(adj.form, adj.lemma, "ADJ", Some(noun_at), "amod");
    let noun = pick(rng, NICE_NOUN);
    s.push(noun.form, noun.lemma, "NOUN", Some(v), "obj");
    if rng.random_bool(0.4) {
        let adv = pick(rng, ADV);
        s.push(adv.form, adv.lemma, "ADV", Some(v), "advmod");
    }
    s.push(".", ".", "PUNCT", Some(v), "punct");
    s
}

/// `you are a/such ADJ NOUN !`
fn insult(rng: &mut impl Rng) -> Sentence {
    let mut s = Sentence::default();
    s.push("you", "you", "PRON", Some(4), "nsubj");
    s.push(if rng.random_bool(0.5) { "are" } else { "'re" }, "be", "AUX", Some(4), "cop");
    s.push(if rng.random_bool(0.5) { "a" } else { "such" }, "a", "DET", Some(4), "det");
    let adj = pick(rng, MEAN_ADJ);
    s.push(adj.form, adj.lemma, "ADJ", Some(4), "amod");
    let noun = pick(rng, MEAN_NOUN);
    s.push(noun.form, noun.lemma, "NOUN", None, "root");
    s.push("!", "!", "PUNCT", Some(4), "punct");
    s
}

/// `SUBJ VERB PREP ENTITY ?|.`
fn oblique(rng: &mut impl Rng, question: bool) -> Sentence {
    let mut s = Sentence::default();
    let p = *PRON_SUBJ.choose(rng).unwrap();
    s.push(p, &p.to_lowercase(), "PRON", Some(1), "nsubj");
    let verb = pick(rng, INTRANS);
    s.push(verb.form, verb.lemma, "VERB", None, "root");
    let prep = *PREP.choose(rng).unwrap();
    s.push(prep, prep, "ADP", Some(3), "case");
    s.entity(rng, Some(1), "obl");
    let end = if question { "?" } else { "." };
    s.push(end, end, "PUNCT", Some(1), "punct");
    s
}

/// `do you VERB DET NOUN ?`
fn yes_no(rng: &mut impl Rng) -> Sentence {
    let mut s = Sentence::default();
    s.push("do", "do", "AUX", Some(2), "aux");
    s.push("you", "you", "PRON", Some(2), "nsubj");
    let verb = pick(rng, &NICE_VERB[..]);
    s.push(verb.lemma, verb.lemma, "VERB", None, "root");
    let det = *DET.choose(rng).unwrap();
    s.push(det, det, "DET", Some(4), "det");
    let noun = pick(rng, NICE_NOUN);
    s.push(noun.form, noun.lemma, "NOUN", Some(2), "obj");
    s.push("?", "?", "PUNCT", Some(2), "punct");
    s
}

fn capitalise(s: &mut Sentence) {
    let t = &mut s.tokens[0];
    let mut chars = t.form.chars();
    if let Some(c) = chars.next() {
        t.form = c.to_uppercase().chain(chars).collect();
    }
}

fn text(sentences: &[Sentence]) -> String {
    sentences
        .iter()
        .flat_map(|s| s.tokens.iter().map(|t| t.form.as_str()))
        .collect::<Vec<_>>()
        .join(" ")
}

fn sample(rng: &mut impl Rng, id: usize, harmful: bool) -> AnnotatedSample {
    let mut question = vec![if rng.random_bool(0.5) { yes_no(rng) } else { oblique(rng, true) }];
    let mut answer = Vec::new();
    let n = rng.random_range(1..=3);
    let insult_at = harmful.then(|| rng.random_range(0..n));
    for i in 0..n {
        answer.push(match (insult_at == Some(i), rng.random_range(0..3)) {
            (true, 0) => transitive(rng, true),
            (true, _) => insult(rng),
            (false, 0) => oblique(rng, false),
            (false, _) => transitive(rng, false),
        });
    }
    for s in question.iter_mut().chain(answer.iter_mut()) {
        capitalise(s);
    }
    let mut tokens = Vec::new();
    for s in question.iter().chain(&answer) {
        let offset = tokens.len();
        tokens.extend(s.tokens.iter().cloned().map(|mut t| {
            t.head = t.head.map(|h| h + offset);
            t
        }));
    }
    AnnotatedSample {
        sample: Sample {
            id: format!("t{id:04}"),
            question: text(&question),
            answer: text(&answer),
            label: if harmful { Label::Harmful } else { Label::NonHarmful },
        },
        tokens,
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data/toy".into()));
    let n: usize = args.next().map_or(Ok(200), |s| s.parse())?;
    let seed_value: u64 = args.next().map_or(Ok(7), |s| s.parse())?;
    let mut rng = seed::rng(seed_value, "toy-corpus");
    let n_harmful = (n as f64 * 0.07).round() as usize;
    let mut harmful: Vec<bool> = (0..n).map(|i| i < n_harmful).collect();
    rand::seq::SliceRandom::shuffle(harmful.as_mut_slice(), &mut rng);
    let corpus: Vec<AnnotatedSample> = harmful
        .iter()
        .enumerate()
        .map(|(i, &h)| sample(&mut rng, i, h))
        .collect();

    std::fs::create_dir_all(&dir)?;
    let mut w = csv::Writer::from_path(dir.join("samples.csv"))?;
    w.write_record(["id", "question", "answer", "label"])?;
    for s in &corpus {
        let label = s.label().as_u8().to_string();
        w.write_record([s.id(), &s.sample.question, &s.sample.answer, &label])?;
    }
    w.flush()?;
    std::fs::write(dir.join("annotations.conllu"), write_conllu(&corpus)?)?;
    println!("wrote {n} samples ({n_harmful} harmful) to {}", dir.display());
    Ok(())
}
