//! Event domain types: spans, arguments, event records, sentences and the
//! label schema, plus corpus I/O and the synthetic generator.

mod io;
mod synth;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_jsonl, load_jsonl_with_schema, save_jsonl};
pub use synth::{gen_synthetic, DataConfig, GenConfig};

/// Inclusive word span `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn single(i: usize) -> Self {
        Span { start: i, end: i }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn words(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }

    /// `other` lies within `self` (identical spans count).
    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn intersects(&self, other: &Span) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    /// Spans intersect but neither contains the other.
    pub fn partially_overlaps(&self, other: &Span) -> bool {
        self.intersects(other) && !self.contains(other) && !other.contains(self)
    }
}

impl From<[usize; 2]> for Span {
    fn from(v: [usize; 2]) -> Self {
        Span::new(v[0], v[1])
    }
}

impl From<Span> for [usize; 2] {
    fn from(s: Span) -> Self {
        [s.start, s.end]
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.start, self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Argument {
    pub role: usize,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventRecord {
    pub event_type: usize,
    pub trigger: Span,
    pub arguments: Vec<Argument>,
}

impl EventRecord {
    pub fn new(event_type: usize, trigger: Span, arguments: Vec<Argument>) -> Self {
        EventRecord {
            event_type,
            trigger,
            arguments,
        }
    }

    /// Arguments sorted by role then span, duplicates removed.
    pub fn normalized(&self) -> EventRecord {
        let mut arguments = self.arguments.clone();
        arguments.sort_by_key(|a| (a.role, a.span));
        arguments.dedup();
        EventRecord {
            event_type: self.event_type,
            trigger: self.trigger,
            arguments,
        }
    }
}

/// Canonical order for event lists: trigger start, trigger end, type.
pub fn normalize_events(events: &[EventRecord]) -> Vec<EventRecord> {
    let mut out: Vec<EventRecord> = events.iter().map(EventRecord::normalized).collect();
    out.sort_by(|a, b| {
        (a.trigger, a.event_type, &a.arguments).cmp(&(b.trigger, b.event_type, &b.arguments))
    });
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<String>,
    pub events: Vec<EventRecord>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn event_types(&self) -> Vec<usize> {
        let mut types: Vec<usize> = self.events.iter().map(|e| e.event_type).collect();
        types.sort_unstable();
        types.dedup();
        types
    }

    pub fn events_of_type(&self, event_type: usize) -> Vec<EventRecord> {
        self.events
            .iter()
            .filter(|e| e.event_type == event_type)
            .cloned()
            .collect()
    }

    /// Two or more events share a trigger span or an argument span.
    pub fn is_overlapped(&self) -> bool {
        let mut triggers = HashSet::new();
        let mut arg_owner: std::collections::HashMap<Span, usize> = Default::default();
        for (k, ev) in self.events.iter().enumerate() {
            if !triggers.insert(ev.trigger) {
                return true;
            }
            for arg in &ev.arguments {
                match arg_owner.get(&arg.span) {
                    Some(&owner) if owner != k => return true,
                    _ => {
                        arg_owner.insert(arg.span, k);
                    }
                }
            }
        }
        false
    }

    /// Some event's trigger lies inside an argument span of a different event.
    pub fn is_nested(&self) -> bool {
        self.events.iter().enumerate().any(|(a, inner)| {
            self.events.iter().enumerate().any(|(b, outer)| {
                a != b
                    && outer
                        .arguments
                        .iter()
                        .any(|arg| arg.span.contains(&inner.trigger))
            })
        })
    }
}

/// Fixed span labels occupying channels 0 and 1 of every grid.
pub const SPAN_LABELS: [&str; 2] = ["S-T", "S-A"];
pub const CH_TRIGGER: usize = 0;
pub const CH_ARGUMENT: usize = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub event_types: Vec<String>,
    pub role_types: Vec<String>,
}

impl Schema {
    pub fn new(event_types: Vec<String>, role_types: Vec<String>) -> Result<Self> {
        let schema = Schema {
            event_types,
            role_types,
        };
        schema.check()?;
        Ok(schema)
    }

    /// Convenience constructor used in tests and examples.
    pub fn from_names(event_types: &[&str], role_types: &[&str]) -> Result<Self> {
        Schema::new(
            event_types.iter().map(|s| s.to_string()).collect(),
            role_types.iter().map(|s| s.to_string()).collect(),
        )
    }

    /// Schema with placeholder names `type0…`, `role0…`.
    pub fn numbered(event_types: usize, roles: usize) -> Result<Self> {
        Schema::new(
            (0..event_types).map(|t| format!("type{t}")).collect(),
            (0..roles).map(|r| format!("role{r}")).collect(),
        )
    }

    pub fn check(&self) -> Result<()> {
        if self.event_types.is_empty() {
            return Err(Error::Config("schema needs at least one event type".into()));
        }
        let mut seen = HashSet::new();
        for name in self.event_types.iter().chain(&self.role_types) {
            if !seen.insert(name.as_str()) {
                return Err(Error::Config(format!("duplicate schema name {name:?}")));
            }
        }
        Ok(())
    }

    pub fn num_event_types(&self) -> usize {
        self.event_types.len()
    }

    pub fn num_roles(&self) -> usize {
        self.role_types.len()
    }

    /// `2 + |roles|`: S-T, S-A, then one channel per role.
    pub fn num_channels(&self) -> usize {
        SPAN_LABELS.len() + self.role_types.len()
    }

    pub fn role_channel(role: usize) -> usize {
        SPAN_LABELS.len() + role
    }

    pub fn channel_name(&self, channel: usize) -> &str {
        if channel < SPAN_LABELS.len() {
            SPAN_LABELS[channel]
        } else {
            &self.role_types[channel - SPAN_LABELS.len()]
        }
    }

    pub fn event_type_id(&self, name: &str) -> Option<usize> {
        self.event_types.iter().position(|n| n == name)
    }

    pub fn role_id(&self, name: &str) -> Option<usize> {
        self.role_types.iter().position(|n| n == name)
    }
}

/// Returns every violation found; an empty list means the sentence is valid.
pub fn validate(sentence: &Sentence, schema: &Schema) -> Vec<String> {
    let mut errors = Vec::new();
    let n = sentence.tokens.len();
    if n == 0 {
        errors.push("empty token list".to_string());
    }
    let check_span = |what: &str, span: &Span, errors: &mut Vec<String>| {
        if span.start > span.end {
            errors.push(format!(
                "{what} span start {} > end {}",
                span.start, span.end
            ));
        }
        if span.end >= n {
            errors.push(format!("{what} span end {} ≥ len {n}", span.end));
        }
    };
    for (k, ev) in sentence.events.iter().enumerate() {
        if ev.event_type >= schema.num_event_types() {
            errors.push(format!(
                "event {k}: event type {} not in schema",
                ev.event_type
            ));
        }
        check_span(&format!("event {k} trigger"), &ev.trigger, &mut errors);
        let mut seen = HashSet::new();
        for arg in &ev.arguments {
            if arg.role >= schema.num_roles() {
                errors.push(format!("event {k}: role {} not in schema", arg.role));
            }
            check_span(&format!("event {k} argument"), &arg.span, &mut errors);
            if !seen.insert((arg.role, arg.span)) {
                errors.push(format!(
                    "event {k}: duplicate argument (role {}, span {})",
                    arg.role, arg.span
                ));
            }
        }
    }
    errors
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub schema: Schema,
    pub sentences: Vec<Sentence>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let errors: Vec<String> = self
            .sentences
            .iter()
            .enumerate()
            .flat_map(|(i, s)| {
                validate(s, &self.schema)
                    .into_iter()
                    .map(move |e| format!("sentence {i}: {e}"))
            })
            .collect();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(errors))
        }
    }

    pub fn split_at(&self, n: usize) -> (Corpus, Corpus) {
        let n = n.min(self.sentences.len());
        let (a, b) = self.sentences.split_at(n);
        (
            Corpus {
                schema: self.schema.clone(),
                sentences: a.to_vec(),
            },
            Corpus {
                schema: self.schema.clone(),
                sentences: b.to_vec(),
            },
        )
    }

    pub fn filter(&self, keep: impl Fn(&Sentence) -> bool) -> Corpus {
        Corpus {
            schema: self.schema.clone(),
            sentences: self.sentences.iter().filter(|s| keep(s)).cloned().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Schema {
        Schema::from_names(&["Invest", "Transfer"], &["subject", "object"]).unwrap()
    }

    fn sentence(trigger: Span) -> Sentence {
        Sentence {
            tokens: "a b c d e".split(' ').map(String::from).collect(),
            events: vec![EventRecord::new(0, trigger, vec![])],
        }
    }

    #[test]
    fn in_range_trigger_is_valid() {
        assert!(validate(&sentence(Span::new(2, 2)), &schema()).is_empty());
    }

    #[test]
    fn out_of_range_trigger_reports_end() {
        let errs = validate(&sentence(Span::new(3, 7)), &schema());
        assert_eq!(errs.len(), 1);
        assert!(errs[0].contains("span end 7 ≥ len 5"), "{errs:?}");
    }

    #[test]
    fn unknown_role_and_duplicates_reported_together() {
        let mut s = sentence(Span::single(2));
        let arg = Argument {
            role: 0,
            span: Span::new(0, 1),
        };
        s.events[0].arguments = vec![
            arg,
            arg,
            Argument {
                role: 9,
                span: Span::single(4),
            },
        ];
        let errs = validate(&s, &schema());
        assert_eq!(errs.len(), 2, "{errs:?}");
        assert!(errs.iter().any(|e| e.contains("role 9 not in schema")));
        assert!(errs.iter().any(|e| e.contains("duplicate argument")));
    }

    #[test]
    fn empty_tokens_invalid() {
        let s = Sentence {
            tokens: vec![],
            events: vec![],
        };
        assert_eq!(
            validate(&s, &schema()),
            vec!["empty token list".to_string()]
        );
    }

    #[test]
    fn schema_rejects_duplicates_and_empty() {
        assert!(Schema::from_names(&["A", "A"], &[]).is_err());
        assert!(Schema::from_names(&[], &["r"]).is_err());
        assert!(Schema::from_names(&["A"], &[]).is_ok());
    }

    #[test]
    fn span_relations() {
        let a = Span::new(1, 3);
        assert!(a.partially_overlaps(&Span::new(2, 5)));
        assert!(!a.partially_overlaps(&Span::new(2, 3)));
        assert!(!a.partially_overlaps(&Span::new(4, 5)));
        assert!(!a.partially_overlaps(&a));
    }

    #[test]
    fn structure_classification() {
        let mut s = sentence(Span::single(2));
        assert!(!s.is_overlapped() && !s.is_nested());
        s.events.push(EventRecord::new(1, Span::single(2), vec![]));
        assert!(s.is_overlapped());
        s.events[1] = EventRecord::new(
            1,
            Span::single(4),
            vec![Argument {
                role: 0,
                span: Span::new(1, 3),
            }],
        );
        assert!(!s.is_overlapped());
        assert!(s.is_nested());
    }
}
