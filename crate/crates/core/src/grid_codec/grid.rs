use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which trigger/argument words carry role tags: heads only (`H`) or every
/// word (`W`), for the trigger (`T`) and the argument (`A`) side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum RoleStrategy {
    #[serde(rename = "th-ah")]
    ThAh,
    #[serde(rename = "tw-ah")]
    TwAh,
    #[serde(rename = "th-aw")]
    ThAw,
    #[serde(rename = "tw-aw")]
    #[default]
    TwAw,
}

impl RoleStrategy {
    pub const ALL: [RoleStrategy; 4] = [
        RoleStrategy::ThAh,
        RoleStrategy::TwAh,
        RoleStrategy::ThAw,
        RoleStrategy::TwAw,
    ];

    pub fn trigger_words(self) -> bool {
        matches!(self, RoleStrategy::TwAh | RoleStrategy::TwAw)
    }

    pub fn argument_words(self) -> bool {
        matches!(self, RoleStrategy::ThAw | RoleStrategy::TwAw)
    }
}

impl fmt::Display for RoleStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RoleStrategy::ThAh => "th-ah",
            RoleStrategy::TwAh => "tw-ah",
            RoleStrategy::ThAw => "th-aw",
            RoleStrategy::TwAw => "tw-aw",
        })
    }
}

impl FromStr for RoleStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "th-ah" => Ok(RoleStrategy::ThAh),
            "tw-ah" => Ok(RoleStrategy::TwAh),
            "th-aw" => Ok(RoleStrategy::ThAw),
            "tw-aw" => Ok(RoleStrategy::TwAw),
            other => Err(Error::Config(format!("unknown role strategy {other:?}"))),
        }
    }
}

/// Read access shared by label and score grids.
pub trait GridView {
    fn event_type(&self) -> usize;
    fn n(&self) -> usize;
    fn channels(&self) -> usize;
    fn tagged(&self, channel: usize, i: usize, j: usize) -> bool;
    /// Ranking score for clash resolution.
    fn score(&self, channel: usize, i: usize, j: usize) -> f64;
}

/// Binary tags over `[channels, n, n]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelGrid {
    event_type: usize,
    n: usize,
    channels: usize,
    cells: Vec<bool>,
}

impl LabelGrid {
    pub fn empty(event_type: usize, n: usize, channels: usize) -> Self {
        LabelGrid {
            event_type,
            n,
            channels,
            cells: vec![false; channels * n * n],
        }
    }

    fn index(&self, c: usize, i: usize, j: usize) -> usize {
        debug_assert!(c < self.channels && i < self.n && j < self.n);
        (c * self.n + i) * self.n + j
    }

    pub fn set(&mut self, c: usize, i: usize, j: usize, value: bool) {
        let k = self.index(c, i, j);
        self.cells[k] = value;
    }

    pub fn get(&self, c: usize, i: usize, j: usize) -> bool {
        self.cells[self.index(c, i, j)]
    }

    /// Row-major `n × n` slice for one channel.
    pub fn channel(&self, c: usize) -> &[bool] {
        let nn = self.n * self.n;
        &self.cells[c * nn..(c + 1) * nn]
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&b| b).count()
    }

    pub fn tagged_cells(&self, c: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        self.channel(c)
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(k, _)| (k / n, k % n))
    }
}

impl GridView for LabelGrid {
    fn event_type(&self) -> usize {
        self.event_type
    }
    fn n(&self) -> usize {
        self.n
    }
    fn channels(&self) -> usize {
        self.channels
    }
    fn tagged(&self, c: usize, i: usize, j: usize) -> bool {
        self.get(c, i, j)
    }
    fn score(&self, c: usize, i: usize, j: usize) -> f64 {
        if self.get(c, i, j) {
            1.0
        } else {
            0.0
        }
    }
}

/// Real-valued scores over `[channels, n, n]`; a cell is tagged when its
/// score exceeds `threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreGrid {
    pub event_type: usize,
    pub n: usize,
    pub channels: usize,
    pub scores: Vec<f64>,
    pub threshold: f64,
}

impl ScoreGrid {
    pub fn new(
        event_type: usize,
        n: usize,
        channels: usize,
        scores: Vec<f64>,
        threshold: f64,
    ) -> Result<Self> {
        if scores.len() != channels * n * n {
            return Err(Error::Shape(format!(
                "score grid expects {} cells, got {}",
                channels * n * n,
                scores.len()
            )));
        }
        if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
            return Err(Error::Shape(format!("non-finite score {bad}")));
        }
        if !threshold.is_finite() {
            return Err(Error::Shape(format!("non-finite threshold {threshold}")));
        }
        Ok(ScoreGrid {
            event_type,
            n,
            channels,
            scores,
            threshold,
        })
    }

    /// Every cell at `low`, then `high` on the tagged cells of `labels`.
    pub fn from_labels(labels: &LabelGrid, high: f64, low: f64) -> Self {
        ScoreGrid {
            event_type: labels.event_type,
            n: labels.n,
            channels: labels.channels,
            scores: labels
                .cells
                .iter()
                .map(|&b| if b { high } else { low })
                .collect(),
            threshold: 0.0,
        }
    }

    pub fn get(&self, c: usize, i: usize, j: usize) -> f64 {
        self.scores[(c * self.n + i) * self.n + j]
    }

    pub fn set(&mut self, c: usize, i: usize, j: usize, v: f64) {
        self.scores[(c * self.n + i) * self.n + j] = v;
    }

    pub fn to_labels(&self) -> LabelGrid {
        LabelGrid {
            event_type: self.event_type,
            n: self.n,
            channels: self.channels,
            cells: self.scores.iter().map(|&s| s > self.threshold).collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let wire: ScoreGridWire = serde_json::from_str(text)?;
        wire.into_grid()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ScoreGridWire::from(self)).expect("score grid serializes")
    }
}

impl GridView for ScoreGrid {
    fn event_type(&self) -> usize {
        self.event_type
    }
    fn n(&self) -> usize {
        self.n
    }
    fn channels(&self) -> usize {
        self.channels
    }
    fn tagged(&self, c: usize, i: usize, j: usize) -> bool {
        self.get(c, i, j) > self.threshold
    }
    fn score(&self, c: usize, i: usize, j: usize) -> f64 {
        self.get(c, i, j)
    }
}

/// JSON shape: `{"event_type": 0, "threshold": 0.0, "scores": [[[..n..]; n]; channels]}`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct ScoreGridWire {
    pub event_type: usize,
    #[serde(default)]
    pub threshold: f64,
    pub scores: Vec<Vec<Vec<f64>>>,
}

impl ScoreGridWire {
    pub(crate) fn into_grid(self) -> Result<ScoreGrid> {
        let channels = self.scores.len();
        if channels < 2 {
            return Err(Error::Shape(format!(
                "score grid needs at least the two span channels, got {channels}"
            )));
        }
        let n = self.scores[0].len();
        if n == 0 {
            return Err(Error::Shape("score grid has zero rows".into()));
        }
        let mut flat = Vec::with_capacity(channels * n * n);
        for (c, rows) in self.scores.into_iter().enumerate() {
            if rows.len() != n {
                return Err(Error::Shape(format!(
                    "channel {c} has {} rows, expected {n}",
                    rows.len()
                )));
            }
            for (i, row) in rows.into_iter().enumerate() {
                if row.len() != n {
                    return Err(Error::Shape(format!(
                        "channel {c} row {i} has {} columns, expected {n}",
                        row.len()
                    )));
                }
                flat.extend(row);
            }
        }
        ScoreGrid::new(self.event_type, n, channels, flat, self.threshold)
    }
}

impl From<&ScoreGrid> for ScoreGridWire {
    fn from(g: &ScoreGrid) -> Self {
        let scores = (0..g.channels)
            .map(|c| {
                (0..g.n)
                    .map(|i| (0..g.n).map(|j| g.get(c, i, j)).collect())
                    .collect()
            })
            .collect();
        ScoreGridWire {
            event_type: g.event_type,
            threshold: g.threshold,
            scores,
        }
    }
}
