//! Word-pair grid tagging scheme.
//!
//! For one event type a grid has `2 + |roles|` channels over `n × n` word
//! pairs. Channel 0 (S-T) tags `(start, end)` of each trigger, channel 1
//! (S-A) tags `(start, end)` of each argument, and role channel `r` tags
//! directed pairs `(trigger word, argument word)` chosen by the
//! [`RoleStrategy`].
//!
//! Decoding runs in four steps: collect tagged span cells, drop the weaker
//! of any two same-label spans whose boundaries cross, link each
//! trigger/argument pair through the role channels, and stamp the grid's
//! event type on each trigger.

mod grid;
mod oracle;

use crate::error::{Error, Result};
use crate::event_model::{Argument, EventRecord, Schema, Span, CH_ARGUMENT, CH_TRIGGER};

pub use grid::{GridView, LabelGrid, RoleStrategy, ScoreGrid};
pub use oracle::{oracle_decode, ORACLE_MAX_N};

/// Cells prescribed for one (trigger, argument) pair under `strategy`.
pub fn role_cells(
    trigger: Span,
    argument: Span,
    strategy: RoleStrategy,
) -> impl Iterator<Item = (usize, usize)> {
    let trig = if strategy.trigger_words() {
        trigger.words()
    } else {
        trigger.start..=trigger.start
    };
    let arg = if strategy.argument_words() {
        argument.words()
    } else {
        argument.start..=argument.start
    };
    trig.flat_map(move |i| arg.clone().map(move |j| (i, j)))
}

fn check_no_partial_overlap(spans: &[Span], label: &str) -> Result<()> {
    for (k, a) in spans.iter().enumerate() {
        for b in &spans[k + 1..] {
            if a.partially_overlaps(b) {
                return Err(Error::Ambiguous(format!(
                    "{label} spans {a} and {b} partially overlap"
                )));
            }
        }
    }
    Ok(())
}

/// Encodes all events of `event_type` into one label grid.
pub fn encode(
    event_type: usize,
    events: &[EventRecord],
    n: usize,
    strategy: RoleStrategy,
    schema: &Schema,
) -> Result<LabelGrid> {
    if event_type >= schema.num_event_types() {
        return Err(Error::EventTypeOutOfRange(event_type));
    }
    let mut triggers = Vec::new();
    let mut args = Vec::new();
    for ev in events {
        if ev.event_type != event_type {
            return Err(Error::Shape(format!(
                "event of type {} in grid for type {event_type}",
                ev.event_type
            )));
        }
        triggers.push(ev.trigger);
        for a in &ev.arguments {
            if a.role >= schema.num_roles() {
                return Err(Error::Shape(format!("role {} not in schema", a.role)));
            }
            args.push(a.span);
        }
    }
    for span in triggers.iter().chain(&args) {
        if span.start > span.end || span.end >= n {
            return Err(Error::Shape(format!(
                "span {span} outside sentence of length {n}"
            )));
        }
    }
    check_no_partial_overlap(&triggers, "trigger")?;
    check_no_partial_overlap(&args, "argument")?;

    let mut grid = LabelGrid::empty(event_type, n, schema.num_channels());
    for ev in events {
        grid.set(CH_TRIGGER, ev.trigger.start, ev.trigger.end, true);
        for a in &ev.arguments {
            grid.set(CH_ARGUMENT, a.span.start, a.span.end, true);
            let ch = Schema::role_channel(a.role);
            for (i, j) in role_cells(ev.trigger, a.span, strategy) {
                grid.set(ch, i, j, true);
            }
        }
    }
    Ok(grid)
}

/// Among same-label spans whose boundaries cross (intersecting, neither
/// containing the other) only the higher-scoring one survives. Spans are
/// visited by descending score; equal scores prefer the smaller start,
/// then the smaller end. Output is sorted by `(start, end)`.
pub fn resolve_span_clashes(spans: &[(Span, f64)]) -> Vec<Span> {
    let mut order: Vec<(Span, f64)> = spans.to_vec();
    order.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then(a.0.start.cmp(&b.0.start))
            .then(a.0.end.cmp(&b.0.end))
    });
    let mut kept: Vec<Span> = Vec::with_capacity(order.len());
    for (span, _) in order {
        if kept.contains(&span) {
            continue;
        }
        if kept.iter().all(|k| !k.partially_overlaps(&span)) {
            kept.push(span);
        }
    }
    kept.sort();
    kept
}

/// Whether `trigger` and `argument` are linked through role `channel`.
///
/// Head-based strategies need every prescribed cell tagged. TW-AW links on a
/// strict majority of the `|trigger| × |argument|` cells.
pub fn link_roles<G: GridView + ?Sized>(
    grid: &G,
    channel: usize,
    trigger: Span,
    argument: Span,
    strategy: RoleStrategy,
) -> bool {
    let mut total = 0usize;
    let mut hits = 0usize;
    for (i, j) in role_cells(trigger, argument, strategy) {
        total += 1;
        if grid.tagged(channel, i, j) {
            hits += 1;
        }
    }
    match strategy {
        RoleStrategy::TwAw => 2 * hits > total,
        _ => hits == total,
    }
}

fn collect_spans<G: GridView + ?Sized>(grid: &G, channel: usize) -> Vec<(Span, f64)> {
    let n = grid.n();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i..n {
            if grid.tagged(channel, i, j) {
                out.push((Span::new(i, j), grid.score(channel, i, j)));
            }
        }
    }
    out
}

/// Decodes one event type's grid into events sorted by trigger span, with
/// arguments sorted by role then span. Role tags that do not connect a
/// decoded trigger to a decoded argument are dropped.
pub fn decode<G: GridView + ?Sized>(
    grid: &G,
    strategy: RoleStrategy,
    schema: &Schema,
) -> Vec<EventRecord> {
    let triggers = resolve_span_clashes(&collect_spans(grid, CH_TRIGGER));
    let arguments = resolve_span_clashes(&collect_spans(grid, CH_ARGUMENT));
    let roles = schema.num_roles().min(grid.channels().saturating_sub(2));

    triggers
        .into_iter()
        .map(|trigger| {
            let mut args = Vec::new();
            for role in 0..roles {
                let ch = Schema::role_channel(role);
                for &span in &arguments {
                    if link_roles(grid, ch, trigger, span, strategy) {
                        args.push(Argument { role, span });
                    }
                }
            }
            EventRecord::new(grid.event_type(), trigger, args)
        })
        .collect()
}
