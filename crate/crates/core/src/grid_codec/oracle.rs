//! Brute-force reference decoder for small label grids.
//!
//! Span selection enumerates every subset of tagged spans and keeps the
//! consistent subset (no crossing boundaries) that is lexicographically
//! greatest in priority order (smaller start first, then smaller end). Role
//! links scan every cell of the channel and test pattern membership.

use super::{GridView, LabelGrid, RoleStrategy};
use crate::error::{Error, Result};
use crate::event_model::{Argument, EventRecord, Schema, Span, CH_ARGUMENT, CH_TRIGGER};

pub const ORACLE_MAX_N: usize = 8;

fn crosses(a: (usize, usize), b: (usize, usize)) -> bool {
    let inter = a.0.max(b.0) <= a.1.min(b.1);
    let a_in_b = b.0 <= a.0 && a.1 <= b.1;
    let b_in_a = a.0 <= b.0 && b.1 <= a.1;
    inter && !a_in_b && !b_in_a
}

fn select_spans(grid: &LabelGrid, channel: usize) -> Vec<Span> {
    let n = grid.n();
    // Priority order: (start, end) ascending. Bit k of a mask stands for
    // candidate k, with the top bit for the highest-priority candidate.
    let mut candidates = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i <= j && grid.get(channel, i, j) {
                candidates.push((i, j));
            }
        }
    }
    let k = candidates.len();
    if k == 0 {
        return Vec::new();
    }
    let bit = |idx: usize| 1u64 << (k - 1 - idx);
    let conflicts: Vec<u64> = (0..k)
        .map(|a| {
            (0..k)
                .filter(|&b| crosses(candidates[a], candidates[b]))
                .fold(0u64, |m, b| m | bit(b))
        })
        .collect();
    let full = if k == 64 { u64::MAX } else { (1u64 << k) - 1 };
    let mut mask = full;
    loop {
        let consistent = (0..k).all(|a| mask & bit(a) == 0 || conflicts[a] & mask == 0);
        if consistent {
            break;
        }
        mask -= 1;
    }
    (0..k)
        .filter(|&a| mask & bit(a) != 0)
        .map(|a| Span::new(candidates[a].0, candidates[a].1))
        .collect()
}

fn in_pattern(i: usize, j: usize, trigger: Span, argument: Span, strategy: RoleStrategy) -> bool {
    let trig_ok = match strategy {
        RoleStrategy::ThAh | RoleStrategy::ThAw => i == trigger.start,
        RoleStrategy::TwAh | RoleStrategy::TwAw => trigger.start <= i && i <= trigger.end,
    };
    let arg_ok = match strategy {
        RoleStrategy::ThAh | RoleStrategy::TwAh => j == argument.start,
        RoleStrategy::ThAw | RoleStrategy::TwAw => argument.start <= j && j <= argument.end,
    };
    trig_ok && arg_ok
}

/// Exhaustive decoder used to cross-check [`super::decode`]. Only accepts
/// grids with `n <= 8`.
pub fn oracle_decode(
    grid: &LabelGrid,
    strategy: RoleStrategy,
    schema: &Schema,
) -> Result<Vec<EventRecord>> {
    let n = grid.n();
    if n > ORACLE_MAX_N {
        return Err(Error::OracleTooLarge(n));
    }
    let triggers = select_spans(grid, CH_TRIGGER);
    let arguments = select_spans(grid, CH_ARGUMENT);
    let roles = schema.num_roles().min(grid.channels().saturating_sub(2));
    let mut events = Vec::new();
    for &trigger in &triggers {
        let mut args = Vec::new();
        for role in 0..roles {
            let channel = 2 + role;
            for &argument in &arguments {
                let (mut total, mut hits) = (0usize, 0usize);
                for i in 0..n {
                    for j in 0..n {
                        if in_pattern(i, j, trigger, argument, strategy) {
                            total += 1;
                            hits += grid.get(channel, i, j) as usize;
                        }
                    }
                }
                let linked = match strategy {
                    RoleStrategy::TwAw => hits * 2 > total,
                    _ => hits == total,
                };
                if linked {
                    args.push(Argument {
                        role,
                        span: argument,
                    });
                }
            }
        }
        events.push(EventRecord::new(grid.event_type(), trigger, args));
    }
    Ok(events)
}
