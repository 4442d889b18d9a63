//! Corpus-level prediction, the TI/TC/AI/AC evaluation, and throughput
//! measurement.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_model::{EventRecord, Sentence, Span};
use crate::model::Model;

/// Upper bounds of the trigger–argument distance buckets; the last bucket
/// is open.
pub const DISTANCE_BUCKETS: [(usize, &str); 6] = [
    (10, "1-10"),
    (20, "11-20"),
    (30, "21-30"),
    (40, "31-40"),
    (50, "41-50"),
    (usize::MAX, ">50"),
];

pub const BENCH_MIN_SENTENCES: usize = 500;
const BENCH_RUNS: usize = 5;
const BENCH_WARMUP: usize = 32;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub gold: usize,
    pub predicted: usize,
    pub matched: usize,
}

impl Prf {
    pub fn from_counts(gold: usize, predicted: usize, matched: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(matched, predicted);
        let recall = ratio(matched, gold);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf {
            precision,
            recall,
            f1,
            gold,
            predicted,
            matched,
        }
    }

    fn from_sets<T: Ord>(gold: &BTreeSet<T>, predicted: &BTreeSet<T>) -> Self {
        let matched = predicted.intersection(gold).count();
        Prf::from_counts(gold.len(), predicted.len(), matched)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub ti: Prf,
    pub tc: Prf,
    pub ai: Prf,
    pub ac: Prf,
}

/// Argument-classification recall for gold arguments at a given distance
/// from their trigger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceBucket {
    pub bucket: String,
    pub gold: usize,
    pub matched: usize,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventCountGroup {
    pub group: String,
    pub sentences: usize,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(flatten)]
    pub metrics: Metrics,
    pub by_distance: Vec<DistanceBucket>,
    pub by_event_count: Vec<EventCountGroup>,
}

impl std::ops::Deref for EvalReport {
    type Target = Metrics;
    fn deref(&self) -> &Metrics {
        &self.metrics
    }
}

#[derive(Default)]
struct Tuples {
    ti: BTreeSet<(usize, Span)>,
    tc: BTreeSet<(usize, Span, usize)>,
    ai: BTreeSet<(usize, usize, Span)>,
    ac: BTreeSet<(usize, usize, Span, usize)>,
}

impl Tuples {
    fn add(&mut self, sentence: usize, events: &[EventRecord]) {
        for e in events {
            self.ti.insert((sentence, e.trigger));
            self.tc.insert((sentence, e.trigger, e.event_type));
            for a in &e.arguments {
                self.ai.insert((sentence, e.event_type, a.span));
                self.ac.insert((sentence, e.event_type, a.span, a.role));
            }
        }
    }

    fn score(&self, predicted: &Tuples) -> Metrics {
        Metrics {
            ti: Prf::from_sets(&self.ti, &predicted.ti),
            tc: Prf::from_sets(&self.tc, &predicted.tc),
            ai: Prf::from_sets(&self.ai, &predicted.ai),
            ac: Prf::from_sets(&self.ac, &predicted.ac),
        }
    }
}

pub fn distance_bucket(distance: usize) -> usize {
    DISTANCE_BUCKETS
        .iter()
        .position(|&(hi, _)| distance <= hi)
        .expect("last bucket is open")
}

fn event_count_group(count: usize) -> Option<usize> {
    match count {
        0 => None,
        1 => Some(0),
        2 => Some(1),
        _ => Some(2),
    }
}

/// Micro-averaged scores of `predicted[i]` against `gold[i].events`.
/// Tuples are deduplicated before matching.
pub fn evaluate(predicted: &[Vec<EventRecord>], gold: &[Sentence]) -> EvalReport {
    assert_eq!(
        predicted.len(),
        gold.len(),
        "prediction and gold lengths differ"
    );
    let mut all_gold = Tuples::default();
    let mut all_pred = Tuples::default();
    let mut groups: [(Tuples, Tuples, usize); 3] = Default::default();
    for (i, (pred, sent)) in predicted.iter().zip(gold).enumerate() {
        all_gold.add(i, &sent.events);
        all_pred.add(i, pred);
        if let Some(g) = event_count_group(sent.events.len()) {
            groups[g].0.add(i, &sent.events);
            groups[g].1.add(i, pred);
            groups[g].2 += 1;
        }
    }
    let metrics = all_gold.score(&all_pred);

    // Each gold argument tuple takes the smallest distance to any trigger of
    // an event that carries it.
    let mut nearest: BTreeMap<(usize, usize, Span, usize), usize> = BTreeMap::new();
    for (i, sent) in gold.iter().enumerate() {
        for e in &sent.events {
            for a in &e.arguments {
                let d = a.span.start.abs_diff(e.trigger.start);
                nearest
                    .entry((i, e.event_type, a.span, a.role))
                    .and_modify(|x| *x = (*x).min(d))
                    .or_insert(d);
            }
        }
    }
    let mut counts = [(0usize, 0usize); DISTANCE_BUCKETS.len()];
    for (key, d) in &nearest {
        let b = distance_bucket(*d);
        counts[b].0 += 1;
        if all_pred.ac.contains(key) {
            counts[b].1 += 1;
        }
    }
    let by_distance = DISTANCE_BUCKETS
        .iter()
        .zip(counts)
        .map(|(&(_, name), (g, m))| DistanceBucket {
            bucket: name.to_string(),
            gold: g,
            matched: m,
            recall: if g == 0 { 0.0 } else { m as f64 / g as f64 },
        })
        .collect();

    let by_event_count = ["1", "2", ">2"]
        .iter()
        .zip(&groups)
        .map(|(name, (g, p, n))| EventCountGroup {
            group: name.to_string(),
            sentences: *n,
            metrics: g.score(p),
        })
        .collect();

    EvalReport {
        metrics,
        by_distance,
        by_event_count,
    }
}

/// Runs `model.predict` over all sentences. Sentences are processed in
/// batches of `batch_size`; the sentences of one batch are spread over the
/// available cores.
pub fn predict_corpus(
    model: &Model,
    sentences: &[Sentence],
    batch_size: usize,
) -> Result<Vec<Vec<EventRecord>>> {
    let tokens: Vec<&[String]> = sentences.iter().map(|s| s.tokens.as_slice()).collect();
    predict_tokens(model, &tokens, batch_size)
}

pub fn predict_tokens(
    model: &Model,
    sentences: &[&[String]],
    batch_size: usize,
) -> Result<Vec<Vec<EventRecord>>> {
    let batch_size = batch_size.max(1);
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut out = Vec::with_capacity(sentences.len());
    for batch in sentences.chunks(batch_size) {
        out.extend(predict_batch(model, batch, workers)?);
    }
    Ok(out)
}

fn predict_batch(
    model: &Model,
    batch: &[&[String]],
    workers: usize,
) -> Result<Vec<Vec<EventRecord>>> {
    let workers = workers.min(batch.len());
    if workers <= 1 {
        return batch.iter().map(|t| model.predict(t)).collect();
    }
    let per = batch.len().div_ceil(workers);
    let parts: Vec<Result<Vec<Vec<EventRecord>>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = batch
            .chunks(per)
            .map(|chunk| scope.spawn(move || chunk.iter().map(|t| model.predict(t)).collect()))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("prediction worker panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(batch.len());
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchResult {
    pub batch_size: usize,
    pub sentences: usize,
    /// Sentences per second of each timed run.
    pub runs: Vec<f64>,
    pub median: f64,
}

/// Throughput of [`predict_corpus`]. The corpus is cycled up to at least
/// 500 sentences; a short warmup is run first and excluded.
pub fn bench(model: &Model, sentences: &[Sentence], batch_size: usize) -> Result<BenchResult> {
    Ok(bench_many(model, sentences, &[batch_size])?.remove(0))
}

/// Like [`bench`] for several batch sizes at once. Timed runs alternate
/// between the sizes, so slow drift in machine load hits all of them alike.
pub fn bench_many(
    model: &Model,
    sentences: &[Sentence],
    batch_sizes: &[usize],
) -> Result<Vec<BenchResult>> {
    if sentences.is_empty() || batch_sizes.is_empty() {
        return Err(Error::NothingToBenchmark);
    }
    let total = sentences.len().max(BENCH_MIN_SENTENCES);
    let tokens: Vec<&[String]> = sentences
        .iter()
        .cycle()
        .take(total)
        .map(|s| s.tokens.as_slice())
        .collect();
    for &b in batch_sizes {
        predict_tokens(model, &tokens[..BENCH_WARMUP.min(total)], b)?;
    }
    let mut runs = vec![Vec::with_capacity(BENCH_RUNS); batch_sizes.len()];
    for _ in 0..BENCH_RUNS {
        for (&b, runs) in batch_sizes.iter().zip(&mut runs) {
            let start = Instant::now();
            let out = predict_tokens(model, &tokens, b)?;
            let secs = start.elapsed().as_secs_f64().max(1e-9);
            std::hint::black_box(out);
            runs.push(total as f64 / secs);
        }
    }
    Ok(batch_sizes
        .iter()
        .zip(runs)
        .map(|(&batch_size, runs)| {
            let mut sorted = runs.clone();
            sorted.sort_by(f64::total_cmp);
            BenchResult {
                batch_size,
                sentences: total,
                median: sorted[BENCH_RUNS / 2],
                runs,
            }
        })
        .collect())
}
