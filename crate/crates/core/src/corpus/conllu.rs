//! CoNLL-U Plus reading and writing.
//!
//! The file must declare its columns with `# global.columns = ...`; the
//! columns ID, FORM, LEMMA, UPOS, HEAD, DEPREL and NER are required, others
//! are ignored. A `# sample_id = <id>` comment opens a sample block; blank
//! lines separate sentences inside a block. HEAD is 1-based within its
//! sentence (0 = root) and is converted to a 0-based index into the sample's
//! concatenated token list. Multiword-token ranges (`1-2`) and empty nodes
//! (`1.1`) are skipped.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use super::{ner_type, AnnotatedSample, AnnotatedToken, Sample};
use crate::error::{Error, Result};

const REQUIRED: [&str; 7] = ["ID", "FORM", "LEMMA", "UPOS", "HEAD", "DEPREL", "NER"];
const WRITE_COLUMNS: &str = "ID FORM LEMMA UPOS XPOS FEATS HEAD DEPREL DEPS MISC NER";

/// Tokens of one `# sample_id` block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationBlock {
    pub sample_id: String,
    pub tokens: Vec<AnnotatedToken>,
    /// 1-based line of the `# sample_id` comment.
    pub line: usize,
}

struct Columns {
    id: usize,
    form: usize,
    lemma: usize,
    upos: usize,
    head: usize,
    deprel: usize,
    ner: usize,
    width: usize,
}

impl Columns {
    fn parse(decl: &str, line: usize) -> Result<Columns> {
        let names: Vec<&str> = decl.split_whitespace().collect();
        let find = |name: &str| {
            names.iter().position(|n| *n == name).ok_or_else(|| Error::Annotation {
                line,
                msg: format!("global.columns lacks required column {name}"),
            })
        };
        let idx: Vec<usize> = REQUIRED.iter().map(|n| find(n)).collect::<Result<_>>()?;
        Ok(Columns {
            id: idx[0],
            form: idx[1],
            lemma: idx[2],
            upos: idx[3],
            head: idx[4],
            deprel: idx[5],
            ner: idx[6],
            width: names.len(),
        })
    }
}

struct BlockBuilder {
    block: AnnotationBlock,
    sentence_start: usize,
    /// Raw 1-based heads of the current sentence, resolved when it closes.
    pending: Vec<(usize, Option<usize>)>,
    prev_ner: Option<String>,
}

impl BlockBuilder {
    fn new(sample_id: String, line: usize) -> Self {
        BlockBuilder {
            block: AnnotationBlock {
                sample_id,
                tokens: Vec::new(),
                line,
            },
            sentence_start: 0,
            pending: Vec::new(),
            prev_ner: None,
        }
    }

    fn close_sentence(&mut self) -> Result<()> {
        let len = self.block.tokens.len() - self.sentence_start;
        for (line, head) in self.pending.drain(..) {
            if let Some(h) = head {
                if h > len {
                    return Err(Error::Annotation {
                        line,
                        msg: format!("HEAD {h} outside sentence of {len} tokens"),
                    });
                }
            }
        }
        self.sentence_start = self.block.tokens.len();
        self.prev_ner = None;
        Ok(())
    }

    fn finish(mut self) -> Result<AnnotationBlock> {
        self.close_sentence()?;
        Ok(self.block)
    }
}

pub fn read_conllu(path: impl AsRef<Path>) -> Result<Vec<AnnotationBlock>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_conllu(file)
}

pub fn parse_conllu<R: Read>(reader: R) -> Result<Vec<AnnotationBlock>> {
    let mut columns: Option<Columns> = None;
    let mut blocks = Vec::new();
    let mut current: Option<BlockBuilder> = None;

    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::Annotation {
            line: lineno,
            msg: e.to_string(),
        })?;
        let line = line.trim_end_matches('\r');

        if line.trim().is_empty() {
            if let Some(b) = current.as_mut() {
                b.close_sentence()?;
            }
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(decl) = comment.strip_prefix("global.columns") {
                let decl = decl.trim_start().trim_start_matches('=');
                columns = Some(Columns::parse(decl, lineno)?);
            } else if let Some(id) = comment.strip_prefix("sample_id") {
                let id = id.trim_start().trim_start_matches('=').trim();
                if id.is_empty() {
                    return Err(Error::Annotation {
                        line: lineno,
                        msg: "empty sample_id".into(),
                    });
                }
                if let Some(b) = current.take() {
                    blocks.push(b.finish()?);
                }
                current = Some(BlockBuilder::new(id.to_string(), lineno));
            }
            continue;
        }

        let cols = columns.as_ref().ok_or_else(|| Error::Annotation {
            line: lineno,
            msg: "token line before `# global.columns` declaration".into(),
        })?;
        let block = current.as_mut().ok_or_else(|| Error::Annotation {
            line: lineno,
            msg: "token line outside a `# sample_id` block".into(),
        })?;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != cols.width {
            return Err(Error::Annotation {
                line: lineno,
                msg: format!("expected {} columns, found {}", cols.width, fields.len()),
            });
        }

        let id = fields[cols.id];
        if id.contains('-') || id.contains('.') {
            continue;
        }
        let expected = block.block.tokens.len() - block.sentence_start + 1;
        if id.parse::<usize>().ok() != Some(expected) {
            return Err(Error::Annotation {
                line: lineno,
                msg: format!("token ID {id:?}, expected {expected}"),
            });
        }

        let head = match fields[cols.head] {
            "_" => None,
            h => match h.parse::<usize>() {
                Ok(0) => None,
                Ok(h) => Some(h),
                Err(_) => {
                    return Err(Error::Annotation {
                        line: lineno,
                        msg: format!("bad HEAD {h:?}"),
                    })
                }
            },
        };

        let ner = fields[cols.ner].to_string();
        if let Some(('I', ty)) = ner_type(&ner) {
            let continues = block
                .prev_ner
                .as_deref()
                .and_then(ner_type)
                .is_some_and(|(_, prev)| prev == ty);
            if !continues {
                return Err(Error::BioViolation {
                    sample: block.block.sample_id.clone(),
                    token: block.block.tokens.len(),
                    form: fields[cols.form].to_string(),
                    tag: ner,
                });
            }
        }

        let upos = fields[cols.upos].to_string();
        block.pending.push((lineno, head));
        block.prev_ner = Some(ner.clone());
        let offset = block.sentence_start;
        block.block.tokens.push(AnnotatedToken {
            form: fields[cols.form].to_string(),
            lemma: fields[cols.lemma].to_string(),
            is_punct: upos == "PUNCT",
            upos,
            ner,
            head: head.map(|h| offset + h - 1),
            deprel: fields[cols.deprel].to_string(),
        });
    }
    if let Some(b) = current.take() {
        blocks.push(b.finish()?);
    }
    Ok(blocks)
}

/// Pairs samples with annotation blocks by id, preserving sample order.
pub fn attach_annotations(
    samples: Vec<Sample>,
    blocks: Vec<AnnotationBlock>,
) -> Result<Vec<AnnotatedSample>> {
    let known: HashSet<&str> = samples.iter().map(|s| s.id.as_str()).collect();
    let mut by_id: HashMap<String, Vec<AnnotatedToken>> = HashMap::with_capacity(blocks.len());
    for block in blocks {
        if !known.contains(block.sample_id.as_str()) {
            return Err(Error::UnknownSampleId(block.sample_id));
        }
        if by_id.contains_key(&block.sample_id) {
            return Err(Error::Annotation {
                line: block.line,
                msg: format!("duplicate block for sample {:?}", block.sample_id),
            });
        }
        by_id.insert(block.sample_id, block.tokens);
    }

    let missing: Vec<String> = samples
        .iter()
        .filter(|s| by_id.get(&s.id).is_none_or(|t| t.is_empty()))
        .map(|s| s.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingAnnotations(missing));
    }

    Ok(samples
        .into_iter()
        .map(|sample| {
            let tokens = by_id.remove(&sample.id).unwrap_or_default();
            AnnotatedSample { sample, tokens }
        })
        .collect())
}

fn check_field<'a>(value: &'a str, what: &str, sample: &str) -> Result<&'a str> {
    if value.is_empty() || value.contains(['\t', '\n', '\r']) {
        return Err(Error::InvalidArgument(format!(
            "sample {sample:?}: {what} {value:?} cannot be written as a CoNLL-U field"
        )));
    }
    Ok(value)
}

/// Serializes a corpus as CoNLL-U Plus, one sentence per sample.
pub fn write_conllu(corpus: &[AnnotatedSample]) -> Result<String> {
    let mut out = String::new();
    writeln!(out, "# global.columns = {WRITE_COLUMNS}").unwrap();
    for s in corpus {
        let id = s.id();
        writeln!(out, "# sample_id = {}", check_field(id, "id", id)?).unwrap();
        for (i, t) in s.tokens.iter().enumerate() {
            let head = match t.head {
                None => 0,
                Some(h) if h < s.tokens.len() => h + 1,
                Some(h) => {
                    return Err(Error::InvalidArgument(format!(
                        "sample {id:?}: head {h} out of range"
                    )))
                }
            };
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t_\t_\t{}\t{}\t_\t_\t{}",
                i + 1,
                check_field(&t.form, "form", id)?,
                check_field(&t.lemma, "lemma", id)?,
                check_field(&t.upos, "upos", id)?,
                head,
                check_field(&t.deprel, "deprel", id)?,
                check_field(&t.ner, "ner", id)?,
            )
            .unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;

    const JOHN: &str = "# global.columns = ID FORM LEMMA UPOS XPOS FEATS HEAD DEPREL DEPS MISC NER
# sample_id = s1
# text = John is dumb
1\tJohn\tjohn\tPROPN\t_\t_\t3\tnsubj\t_\t_\tB-PERSON
2\tis\tbe\tAUX\t_\t_\t3\tcop\t_\t_\tO
3\tdumb\tdumb\tADJ\t_\t_\t0\troot\t_\t_\tO

";

    fn sample(id: &str) -> Sample {
        Sample {
            id: id.into(),
            question: "".into(),
            answer: "John is dumb".into(),
            label: Label::Harmful,
        }
    }

    #[test]
    fn attaches_john() {
        let blocks = parse_conllu(JOHN.as_bytes()).unwrap();
        let corpus = attach_annotations(vec![sample("s1")], blocks).unwrap();
        assert_eq!(corpus[0].tokens.len(), 3);
        let t = &corpus[0].tokens;
        assert_eq!(t[0].head, Some(2));
        assert_eq!(t[2].head, None);
        assert_eq!(t[0].entity_type(), Some("PERSON"));
        assert!(!t[2].is_punct);
    }

    #[test]
    fn unknown_id_is_error() {
        let blocks = parse_conllu(JOHN.as_bytes()).unwrap();
        let err = attach_annotations(vec![sample("other")], blocks).unwrap_err();
        assert!(matches!(err, Error::UnknownSampleId(ref id) if id == "s1"));
    }

    #[test]
    fn missing_block_is_reported() {
        let blocks = parse_conllu(JOHN.as_bytes()).unwrap();
        let err = attach_annotations(vec![sample("s1"), sample("s2")], blocks).unwrap_err();
        assert!(matches!(err, Error::MissingAnnotations(ref ids) if ids == &["s2"]));
    }

    #[test]
    fn dangling_inside_tag_is_bio_violation() {
        let text = JOHN.replace("B-PERSON", "I-PERSON");
        let err = parse_conllu(text.as_bytes()).unwrap_err();
        match err {
            Error::BioViolation { token, form, .. } => {
                assert_eq!(token, 0);
                assert_eq!(form, "John");
            }
            other => panic!("{other}"),
        }
        let text = JOHN.replace("\tis\tbe\tAUX\t_\t_\t3\tcop\t_\t_\tO", "\tis\tbe\tAUX\t_\t_\t3\tcop\t_\t_\tI-ORG");
        assert!(matches!(parse_conllu(text.as_bytes()), Err(Error::BioViolation { token: 1, .. })));
    }

    #[test]
    fn multi_sentence_heads_are_offset() {
        let text = "# global.columns = ID FORM LEMMA UPOS HEAD DEPREL NER
# sample_id = a
1\thi\thi\tINTJ\t0\troot\tO
2\t!\t!\tPUNCT\t1\tpunct\tO

1\tbye\tbye\tINTJ\t0\troot\tO
2\tx\tx\tX\t5\tdep\tO
";
        // Heads are checked against the sentence, not the whole block.
        assert!(parse_conllu(text.as_bytes()).is_err());
        let text = "# global.columns = ID FORM LEMMA UPOS HEAD DEPREL NER
# sample_id = a
1\thi\thi\tINTJ\t0\troot\tO
2\t!\t!\tPUNCT\t1\tpunct\tO

1-2\tdon't\t_\t_\t_\t_\t_
1\tdo\tdo\tAUX\t2\taux\tO
2\tn't\tnot\tPART\t0\troot\tO
";
        let blocks = parse_conllu(text.as_bytes()).unwrap();
        let t = &blocks[0].tokens;
        assert_eq!(t.len(), 4);
        assert!(t[1].is_punct);
        assert_eq!(t[1].head, Some(0));
        assert_eq!(t[2].head, Some(3));
        assert_eq!(t[3].head, None);
    }

    #[test]
    fn missing_columns_declaration() {
        let text = "# sample_id = a\n1\thi\thi\tINTJ\t0\troot\tO\n";
        assert!(matches!(parse_conllu(text.as_bytes()), Err(Error::Annotation { line: 2, .. })));
        let text = "# global.columns = ID FORM LEMMA UPOS HEAD DEPREL\n";
        assert!(parse_conllu(text.as_bytes()).is_err());
    }

    #[test]
    fn head_out_of_range() {
        let text = "# global.columns = ID FORM LEMMA UPOS HEAD DEPREL NER
# sample_id = a
1\thi\thi\tINTJ\t5\troot\tO
";
        assert!(matches!(parse_conllu(text.as_bytes()), Err(Error::Annotation { line: 3, .. })));
    }

    #[test]
    fn write_then_read_roundtrip() {
        let blocks = parse_conllu(JOHN.as_bytes()).unwrap();
        let corpus = attach_annotations(vec![sample("s1")], blocks).unwrap();
        let text = write_conllu(&corpus).unwrap();
        let again = attach_annotations(vec![sample("s1")], parse_conllu(text.as_bytes()).unwrap()).unwrap();
        assert_eq!(corpus, again);
    }
}
