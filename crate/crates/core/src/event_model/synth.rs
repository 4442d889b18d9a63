//! Synthetic corpus generator covering flat, overlapped and nested events.
//!
//! Every event type owns its own trigger words and, per role, argument
//! boundary words (`b`egin, `i`nside, `e`nd, `s`ingle). Overlapped sentences
//! share one trigger word between two event types; nested sentences place
//! the trigger of an inner event inside an argument span of an outer event.
//! All other words are distractors `w<k>` drawn uniformly.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Argument, Corpus, EventRecord, Schema, Sentence, Span};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub sentence_count: usize,
    pub max_len: usize,
    /// Number of distinct distractor words.
    pub vocab_size: usize,
    pub overlap_rate: f64,
    pub nest_rate: f64,
    pub max_events_per_sentence: usize,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            sentence_count: 1000,
            max_len: 20,
            vocab_size: 200,
            overlap_rate: 0.25,
            nest_rate: 0.2,
            max_events_per_sentence: 3,
            seed: 7,
        }
    }
}

/// Flat data-generation file: schema names plus generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub event_types: Vec<String>,
    pub role_types: Vec<String>,
    #[serde(default = "default_count")]
    pub sentence_count: usize,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
    #[serde(default = "default_vocab")]
    pub vocab_size: usize,
    #[serde(default = "default_overlap")]
    pub overlap_rate: f64,
    #[serde(default = "default_nest")]
    pub nest_rate: f64,
    #[serde(default = "default_events")]
    pub max_events_per_sentence: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_count() -> usize {
    GenConfig::default().sentence_count
}
fn default_max_len() -> usize {
    GenConfig::default().max_len
}
fn default_vocab() -> usize {
    GenConfig::default().vocab_size
}
fn default_overlap() -> f64 {
    GenConfig::default().overlap_rate
}
fn default_nest() -> f64 {
    GenConfig::default().nest_rate
}
fn default_events() -> usize {
    GenConfig::default().max_events_per_sentence
}
fn default_seed() -> u64 {
    GenConfig::default().seed
}

impl DataConfig {
    /// Parses and checks the file; the schema and generator settings must be
    /// consistent.
    pub fn from_toml_str(text: &str) -> Result<(Schema, GenConfig)> {
        let cfg: DataConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let schema = Schema::new(cfg.event_types, cfg.role_types)?;
        let gen = GenConfig {
            sentence_count: cfg.sentence_count,
            max_len: cfg.max_len,
            vocab_size: cfg.vocab_size,
            overlap_rate: cfg.overlap_rate,
            nest_rate: cfg.nest_rate,
            max_events_per_sentence: cfg.max_events_per_sentence,
            seed: cfg.seed,
        };
        gen.check(&schema)?;
        Ok((schema, gen))
    }
}

impl GenConfig {
    pub fn check(&self, schema: &Schema) -> Result<()> {
        for (name, rate) in [
            ("overlap_rate", self.overlap_rate),
            ("nest_rate", self.nest_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::Config(format!("{name} = {rate} outside [0, 1]")));
            }
        }
        if self.overlap_rate + self.nest_rate > 1.0 + 1e-12 {
            return Err(Error::Infeasible(
                "overlap_rate + nest_rate exceeds 1".to_string(),
            ));
        }
        if self.max_len < 4 {
            return Err(Error::Config(format!("max_len {} < 4", self.max_len)));
        }
        if self.vocab_size == 0 {
            return Err(Error::Config("vocab_size must be positive".to_string()));
        }
        if self.max_events_per_sentence == 0 {
            return Err(Error::Config(
                "max_events_per_sentence must be positive".to_string(),
            ));
        }
        let structured = self.overlap_rate > 0.0 || self.nest_rate > 0.0;
        if structured && self.max_events_per_sentence.min(schema.num_event_types()) < 2 {
            return Err(Error::Infeasible(
                "overlapped and nested sentences need two distinct event types per sentence"
                    .to_string(),
            ));
        }
        if self.nest_rate > 0.0 && schema.num_roles() == 0 {
            return Err(Error::Infeasible(
                "nesting needs at least one role to hold the inner event".to_string(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum Mark {
    Trigger(usize),
    Arg(usize, usize),
}

/// A contiguous run of marker words with the spans it carries, relative to
/// the segment start.
struct Segment {
    tokens: Vec<String>,
    marks: Vec<(Mark, usize, usize)>,
}

impl Segment {
    fn len(&self) -> usize {
        self.tokens.len()
    }
}

const TRIGGER_SYNONYMS: usize = 3;
const MAX_ARGS_PER_EVENT: usize = 3;

struct Builder<'a> {
    schema: &'a Schema,
    rng: &'a mut ChaCha8Rng,
    event_types: Vec<usize>,
    segments: Vec<Segment>,
}

impl<'a> Builder<'a> {
    fn type_name(&self, t: usize) -> &str {
        &self.schema.event_types[t]
    }

    fn trigger_tokens(&mut self, t: usize) -> Vec<String> {
        let name = self.type_name(t).to_string();
        if self.rng.gen_bool(0.25) {
            vec![format!("trgh:{name}"), format!("trgt:{name}")]
        } else {
            let k = self.rng.gen_range(0..TRIGGER_SYNONYMS);
            vec![format!("trg:{name}:{k}")]
        }
    }

    fn arg_tokens(&mut self, t: usize, role: usize, inner: Option<&[String]>) -> Vec<String> {
        let stem = format!("arg:{}:{}", self.type_name(t), self.schema.role_types[role]);
        if let Some(inner) = inner {
            let mut toks = vec![format!("{stem}:b")];
            toks.extend_from_slice(inner);
            toks.push(format!("{stem}:e"));
            return toks;
        }
        match self.rng.gen_range(1..=3) {
            1 => vec![format!("{stem}:s")],
            2 => vec![format!("{stem}:b"), format!("{stem}:e")],
            _ => vec![
                format!("{stem}:b"),
                format!("{stem}:i"),
                format!("{stem}:e"),
            ],
        }
    }

    fn pick_roles(&mut self, exclude: Option<usize>) -> Vec<usize> {
        let mut roles: Vec<usize> = (0..self.schema.num_roles())
            .filter(|&r| Some(r) != exclude)
            .collect();
        roles.shuffle(self.rng);
        let cap = roles.len().min(MAX_ARGS_PER_EVENT);
        let k = if cap == 0 || self.rng.gen_bool(0.1) {
            0
        } else {
            self.rng.gen_range(1..=cap)
        };
        roles.truncate(k);
        roles
    }

    fn new_event(&mut self, t: usize) -> usize {
        self.event_types.push(t);
        self.event_types.len() - 1
    }

    fn push_args(&mut self, ev: usize, roles: &[usize]) {
        let t = self.event_types[ev];
        for &role in roles {
            let tokens = self.arg_tokens(t, role, None);
            let end = tokens.len() - 1;
            self.segments.push(Segment {
                tokens,
                marks: vec![(Mark::Arg(ev, role), 0, end)],
            });
        }
    }

    /// A self-contained event: its own trigger segment and argument segments.
    fn flat_event(&mut self, t: usize) {
        let ev = self.new_event(t);
        let tokens = self.trigger_tokens(t);
        let end = tokens.len() - 1;
        self.segments.push(Segment {
            tokens,
            marks: vec![(Mark::Trigger(ev), 0, end)],
        });
        let roles = self.pick_roles(None);
        self.push_args(ev, &roles);
    }

    /// Two events of types `a < b` sharing a single trigger word.
    fn shared_trigger(&mut self, a: usize, b: usize) {
        let (a, b) = (a.min(b), a.max(b));
        let ea = self.new_event(a);
        let eb = self.new_event(b);
        let token = format!("trg:{}+{}", self.type_name(a), self.type_name(b));
        self.segments.push(Segment {
            tokens: vec![token],
            marks: vec![(Mark::Trigger(ea), 0, 0), (Mark::Trigger(eb), 0, 0)],
        });
        let roles = self.pick_roles(None);
        self.push_args(ea, &roles);
        let roles = self.pick_roles(None);
        self.push_args(eb, &roles);
    }

    /// Outer event of type `outer` whose argument span wraps the trigger of an
    /// inner event of type `inner`.
    fn nested_pair(&mut self, outer: usize, inner: usize) {
        let eo = self.new_event(outer);
        let ei = self.new_event(inner);
        let outer_trigger = self.trigger_tokens(outer);
        let end = outer_trigger.len() - 1;
        self.segments.push(Segment {
            tokens: outer_trigger,
            marks: vec![(Mark::Trigger(eo), 0, end)],
        });
        let holder = self.rng.gen_range(0..self.schema.num_roles());
        let inner_trigger = self.trigger_tokens(inner);
        let arg = self.arg_tokens(outer, holder, Some(&inner_trigger));
        let arg_end = arg.len() - 1;
        self.segments.push(Segment {
            tokens: arg,
            marks: vec![
                (Mark::Arg(eo, holder), 0, arg_end),
                (Mark::Trigger(ei), 1, inner_trigger.len()),
            ],
        });
        let mut roles = self.pick_roles(Some(holder));
        roles.truncate(MAX_ARGS_PER_EVENT - 1);
        self.push_args(eo, &roles);
        let roles = self.pick_roles(None);
        self.push_args(ei, &roles);
    }

    fn structure_len(&self) -> usize {
        self.segments.iter().map(Segment::len).sum()
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Flat,
    Overlapped,
    Nested,
}

fn gen_sentence(config: &GenConfig, schema: &Schema, rng: &mut ChaCha8Rng, kind: Kind) -> Sentence {
    let m = schema.num_event_types();
    let max_events = config.max_events_per_sentence.min(m);
    let mut types: Vec<usize> = (0..m).collect();
    types.shuffle(rng);

    // Retry with fewer events until the structure fits in max_len.
    let core = if kind == Kind::Flat { 1 } else { 2 };
    let mut n_events = rng.gen_range(core..=max_events.max(core));
    loop {
        let mut b = Builder {
            schema,
            rng: &mut *rng,
            event_types: Vec::new(),
            segments: Vec::new(),
        };
        match kind {
            Kind::Flat => b.flat_event(types[0]),
            Kind::Overlapped => b.shared_trigger(types[0], types[1]),
            Kind::Nested => b.nested_pair(types[0], types[1]),
        }
        for &t in &types[core..n_events] {
            b.flat_event(t);
        }
        if b.structure_len() <= config.max_len {
            return place(config, b.rng, b.event_types, b.segments);
        }
        if n_events > core {
            n_events -= 1;
        }
        // With only the core left, resampling argument counts and lengths
        // eventually fits: the minimal core needs at most 4 words.
    }
}

fn place(
    config: &GenConfig,
    rng: &mut ChaCha8Rng,
    event_types: Vec<usize>,
    mut segments: Vec<Segment>,
) -> Sentence {
    segments.shuffle(rng);
    let structure: usize = segments.iter().map(Segment::len).sum();
    let lo = structure.max(config.max_len / 2).min(config.max_len);
    let total = rng.gen_range(lo..=config.max_len);
    let distractors = total - structure;

    // gap[k] = distractors placed before segment k (last gap trails).
    let mut gaps = vec![0usize; segments.len() + 1];
    for _ in 0..distractors {
        let g = rng.gen_range(0..gaps.len());
        gaps[g] += 1;
    }

    let mut tokens = Vec::with_capacity(total);
    let mut triggers: Vec<Option<Span>> = vec![None; event_types.len()];
    let mut args: Vec<Vec<Argument>> = vec![Vec::new(); event_types.len()];
    let distractor = |rng: &mut ChaCha8Rng, tokens: &mut Vec<String>| {
        tokens.push(format!("w{}", rng.gen_range(0..config.vocab_size)));
    };
    for (k, seg) in segments.into_iter().enumerate() {
        for _ in 0..gaps[k] {
            distractor(rng, &mut tokens);
        }
        let base = tokens.len();
        for (mark, s, e) in seg.marks {
            let span = Span::new(base + s, base + e);
            match mark {
                Mark::Trigger(ev) => triggers[ev] = Some(span),
                Mark::Arg(ev, role) => args[ev].push(Argument { role, span }),
            }
        }
        tokens.extend(seg.tokens);
    }
    for _ in 0..gaps[gaps.len() - 1] {
        distractor(rng, &mut tokens);
    }

    let mut events: Vec<EventRecord> = event_types
        .into_iter()
        .zip(triggers)
        .zip(args)
        .map(|((t, trigger), arguments)| {
            EventRecord::new(t, trigger.expect("every event has a trigger"), arguments).normalized()
        })
        .collect();
    events.sort_by_key(|e| (e.trigger, e.event_type));
    Sentence { tokens, events }
}

/// Deterministic under `config.seed`.
pub fn gen_synthetic(config: &GenConfig, schema: &Schema) -> Result<Corpus> {
    schema.check()?;
    config.check(schema)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let sentences = (0..config.sentence_count)
        .map(|_| {
            let u: f64 = rng.gen();
            let kind = if u < config.nest_rate {
                Kind::Nested
            } else if u < config.nest_rate + config.overlap_rate {
                Kind::Overlapped
            } else {
                Kind::Flat
            };
            gen_sentence(config, schema, &mut rng, kind)
        })
        .collect();
    Ok(Corpus {
        schema: schema.clone(),
        sentences,
    })
}
