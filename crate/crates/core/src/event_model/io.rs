//! JSONL corpus format. The first line is a schema header, every following
//! line one sentence:
//!
//! ```text
//! {"schema": {"event_types": ["Invest"], "role_types": ["subject"]}}
//! {"tokens": ["a", "b"], "events": [{"type": "Invest", "trigger": [1, 1], "args": [{"role": "subject", "span": [0, 0]}]}]}
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{validate, Argument, Corpus, EventRecord, Schema, Sentence, Span};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderRecord {
    schema: Schema,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SentenceRecord {
    tokens: Vec<String>,
    #[serde(default)]
    events: Vec<EventRecordWire>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventRecordWire {
    #[serde(rename = "type")]
    event_type: String,
    trigger: Span,
    #[serde(default)]
    args: Vec<ArgumentWire>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArgumentWire {
    role: String,
    span: Span,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn sentence_from_wire(rec: SentenceRecord, schema: &Schema, line: usize) -> Result<Sentence> {
    let mut events = Vec::with_capacity(rec.events.len());
    for ev in rec.events {
        let event_type = schema.event_type_id(&ev.event_type).ok_or_else(|| {
            parse_err(line, format!("event type not in schema: {}", ev.event_type))
        })?;
        let mut arguments = Vec::with_capacity(ev.args.len());
        for arg in ev.args {
            let role = schema
                .role_id(&arg.role)
                .ok_or_else(|| parse_err(line, format!("role not in schema: {}", arg.role)))?;
            arguments.push(Argument {
                role,
                span: arg.span,
            });
        }
        events.push(EventRecord::new(event_type, ev.trigger, arguments));
    }
    let sentence = Sentence {
        tokens: rec.tokens,
        events,
    };
    let errors = validate(&sentence, schema);
    if !errors.is_empty() {
        return Err(parse_err(line, errors.join("; ")));
    }
    Ok(sentence)
}

fn sentence_to_wire(s: &Sentence, schema: &Schema) -> SentenceRecord {
    SentenceRecord {
        tokens: s.tokens.clone(),
        events: s
            .events
            .iter()
            .map(|ev| EventRecordWire {
                event_type: schema.event_types[ev.event_type].clone(),
                trigger: ev.trigger,
                args: ev
                    .arguments
                    .iter()
                    .map(|a| ArgumentWire {
                        role: schema.role_types[a.role].clone(),
                        span: a.span,
                    })
                    .collect(),
            })
            .collect(),
    }
}

impl Corpus {
    /// Parses a whole JSONL document. Any malformed line fails the whole
    /// parse; no partial corpus is returned.
    pub fn from_jsonl_str(text: &str) -> Result<Corpus> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (line_no, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing schema header"))?;
        let header: HeaderRecord = serde_json::from_str(header)
            .map_err(|e| parse_err(line_no, format!("bad schema header: {e}")))?;
        let schema = header.schema;
        schema
            .check()
            .map_err(|e| parse_err(line_no, e.to_string()))?;
        let mut sentences = Vec::new();
        for (line_no, line) in lines {
            let rec: SentenceRecord =
                serde_json::from_str(line).map_err(|e| parse_err(line_no, e.to_string()))?;
            sentences.push(sentence_from_wire(rec, &schema, line_no)?);
        }
        Ok(Corpus { schema, sentences })
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut out = serde_json::to_string(&HeaderRecord {
            schema: self.schema.clone(),
        })
        .expect("schema serializes");
        out.push('\n');
        for s in &self.sentences {
            out.push_str(
                &serde_json::to_string(&sentence_to_wire(s, &self.schema))
                    .expect("sentence serializes"),
            );
            out.push('\n');
        }
        out
    }
}

pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Corpus::from_jsonl_str(&text)
}

/// Loads a corpus and requires its header to match `expected`.
pub fn load_jsonl_with_schema(path: impl AsRef<Path>, expected: &Schema) -> Result<Corpus> {
    let corpus = load_jsonl(path)?;
    if &corpus.schema != expected {
        return Err(Error::SchemaMismatch(format!(
            "file declares {:?} / {:?}, expected {:?} / {:?}",
            corpus.schema.event_types,
            corpus.schema.role_types,
            expected.event_types,
            expected.role_types
        )));
    }
    Ok(corpus)
}

pub fn save_jsonl(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, corpus.to_jsonl_string()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = r#"{"schema": {"event_types": ["Invest", "Transfer"], "role_types": ["subject", "object"]}}"#;

    fn sample() -> Corpus {
        let text = format!(
            "{HEADER}\n{}\n{}\n{}\n",
            r#"{"tokens": ["x", "bought", "y"], "events": [{"type": "Invest", "trigger": [1, 1], "args": [{"role": "subject", "span": [0, 0]}, {"role": "object", "span": [2, 2]}]}]}"#,
            r#"{"tokens": ["nothing", "here"], "events": []}"#,
            r#"{"tokens": ["a", "sold", "b", "c"], "events": [{"type": "Transfer", "trigger": [1, 1], "args": [{"role": "object", "span": [2, 3]}]}, {"type": "Invest", "trigger": [1, 1], "args": []}]}"#,
        );
        Corpus::from_jsonl_str(&text).unwrap()
    }

    #[test]
    fn round_trip_through_file() {
        let corpus = sample();
        assert_eq!(corpus.len(), 3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        save_jsonl(&corpus, &path).unwrap();
        assert_eq!(load_jsonl(&path).unwrap(), corpus);
    }

    #[test]
    fn empty_token_list_rejected_with_line() {
        let text = format!("{HEADER}\n{}\n", r#"{"tokens": []}"#);
        match Corpus::from_jsonl_str(&text) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("empty token list"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_file_is_an_error() {
        let full = sample().to_jsonl_string();
        let cut = &full[..full.len() - 20];
        match Corpus::from_jsonl_str(cut) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_role_rejected() {
        let text = format!(
            "{HEADER}\n{}\n",
            r#"{"tokens": ["a", "b"], "events": [{"type": "Invest", "trigger": [0, 0], "args": [{"role": "R-X", "span": [1, 1]}]}]}"#
        );
        let err = Corpus::from_jsonl_str(&text).unwrap_err().to_string();
        assert!(err.contains("role not in schema"), "{err}");
    }

    #[test]
    fn schema_mismatch_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        save_jsonl(&sample(), &path).unwrap();
        let other = Schema::from_names(&["Invest"], &["subject", "object"]).unwrap();
        assert!(matches!(
            load_jsonl_with_schema(&path, &other),
            Err(Error::SchemaMismatch(_))
        ));
    }

    #[test]
    fn missing_header_rejected() {
        assert!(Corpus::from_jsonl_str("").is_err());
        assert!(Corpus::from_jsonl_str(r#"{"tokens": ["a"]}"#).is_err());
    }
}
