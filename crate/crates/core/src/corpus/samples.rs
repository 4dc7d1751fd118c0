use std::io::Read;
use std::path::Path;

use super::{Label, Sample};
use crate::error::{Error, Result};

const HEADER: [&str; 4] = ["id", "question", "answer", "label"];

pub fn load_samples(path: impl AsRef<Path>) -> Result<Vec<Sample>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_samples(file)
}

/// Parses a labeled CSV. Row numbers in errors are 1-based and count the
/// header as row 1.
pub fn parse_samples<R: Read>(reader: R) -> Result<Vec<Sample>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);

    let header = rdr.headers().map_err(|e| Error::MalformedRow {
        row: 1,
        msg: e.to_string(),
    })?;
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names != HEADER {
        return Err(Error::MalformedRow {
            row: 1,
            msg: format!("expected header id,question,answer,label, got {}", names.join(",")),
        });
    }

    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::MalformedRow {
            row,
            msg: e.to_string(),
        })?;
        let field = |k: usize| record.get(k).unwrap_or_default();
        let id = field(0).trim();
        if id.is_empty() {
            return Err(Error::MalformedRow {
                row,
                msg: "empty id".into(),
            });
        }
        let label = Label::parse(field(3)).ok_or_else(|| Error::UnknownLabel {
            row,
            token: field(3).to_string(),
        })?;
        let (question, answer) = (field(1).to_string(), field(2).to_string());
        if question.trim().is_empty() && answer.trim().is_empty() {
            return Err(Error::MalformedRow {
                row,
                msg: "question and answer are both empty".into(),
            });
        }
        out.push(Sample {
            id: id.to_string(),
            question,
            answer,
            label,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_basic_row() {
        let s = parse_samples("id,question,answer,label\n7,hi,you are stupid,1\n".as_bytes()).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].id, "7");
        assert_eq!(s[0].answer, "you are stupid");
        assert_eq!(s[0].label, Label::Harmful);
    }

    #[test]
    fn header_only_is_empty() {
        assert!(parse_samples("id,question,answer,label\n".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn quoted_fields_and_word_labels() {
        let csv = "id,question,answer,label\n1,\"a, b\",\"say \"\"hi\"\"\",No\n2,q,,YES\n";
        let s = parse_samples(csv.as_bytes()).unwrap();
        assert_eq!(s[0].question, "a, b");
        assert_eq!(s[0].answer, "say \"hi\"");
        assert_eq!(s[0].label, Label::NonHarmful);
        assert_eq!(s[1].label, Label::Harmful);
    }

    #[test]
    fn unknown_label_names_row() {
        let err = parse_samples("id,question,answer,label\n1,a,b,0\n2,a,b,maybe\n".as_bytes()).unwrap_err();
        assert_eq!(err.to_string(), "unknown label at row 3: \"maybe\"");
    }

    #[test]
    fn malformed_rows() {
        let err = parse_samples("id,question,answer,label\n1,a,b\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::MalformedRow { row: 2, .. }), "{err}");
        let err = parse_samples("id,question,answer,label\n1,,,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::MalformedRow { row: 2, .. }));
        let err = parse_samples("id,text,label\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::MalformedRow { row: 1, .. }));
    }
}
