//! Distance-aware word-pair scoring.
//!
//! For every label the event-aware word vectors are projected twice, each
//! projection is rotated by its word position, and the score of `(i, j)` is
//! the dot product of the two rotated vectors. Because the rotations are
//! orthogonal and compose additively, the score depends on positions only
//! through `j − i`.

use rand::Rng;

use crate::error::Result;
use crate::neural::{
    dot, gemm, init_weight, linear, linear_backward, Gradients, ParamGroup, ParamId, ParamRegistry,
};

pub const DEFAULT_ROTARY_BASE: f64 = 10_000.0;

/// Frequencies `θ_k = base^(−2k / d)` for the `d / 2` dimension pairs.
pub fn rotary_frequencies(d: usize, base: f64) -> Vec<f64> {
    (0..d / 2)
        .map(|k| base.powf(-2.0 * k as f64 / d as f64))
        .collect()
}

/// Rotates consecutive pairs `(2k, 2k+1)` of `p` by `m · θ_k`.
pub fn rotate_with(p: &[f64], m: f64, freqs: &[f64]) -> Vec<f64> {
    let mut out = p.to_vec();
    for (k, &theta) in freqs.iter().enumerate() {
        let (s, c) = (m * theta).sin_cos();
        let (x, y) = (p[2 * k], p[2 * k + 1]);
        out[2 * k] = x * c - y * s;
        out[2 * k + 1] = x * s + y * c;
    }
    out
}

pub fn rotate(p: &[f64], m: usize, base: f64) -> Vec<f64> {
    rotate_with(p, m as f64, &rotary_frequencies(p.len(), base))
}

/// `(R_i a) · (R_j b)`, equal to `aᵀ R_{j−i} b`.
pub fn pair_score(a: &[f64], b: &[f64], i: usize, j: usize, base: f64) -> f64 {
    let freqs = rotary_frequencies(a.len(), base);
    dot(
        &rotate_with(a, i as f64, &freqs),
        &rotate_with(b, j as f64, &freqs),
    )
}

/// Cached `cos(m θ_k)`, `sin(m θ_k)` for positions `0..len`.
#[derive(Debug, Clone)]
pub struct RotaryTable {
    half: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl RotaryTable {
    pub fn new(d: usize, len: usize, base: f64) -> Self {
        let freqs = rotary_frequencies(d, base);
        let half = freqs.len();
        let mut cos = Vec::with_capacity(len * half);
        let mut sin = Vec::with_capacity(len * half);
        for m in 0..len {
            for &theta in &freqs {
                let (s, c) = (m as f64 * theta).sin_cos();
                cos.push(c);
                sin.push(s);
            }
        }
        RotaryTable { half, cos, sin }
    }

    pub fn len(&self) -> usize {
        self.cos.len() / self.half.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.cos.is_empty()
    }

    /// Rotates each row `m` of `x: [rows, 2·half]` by position `m`
    /// (or by `−m` when `inverse`).
    pub fn apply_rows(&self, x: &mut [f64], inverse: bool) {
        let d = 2 * self.half;
        for (m, row) in x.chunks_mut(d).enumerate() {
            let base = m * self.half;
            for k in 0..self.half {
                let c = self.cos[base + k];
                let s = if inverse {
                    -self.sin[base + k]
                } else {
                    self.sin[base + k]
                };
                let (a, b) = (row[2 * k], row[2 * k + 1]);
                row[2 * k] = a * c - b * s;
                row[2 * k + 1] = a * s + b * c;
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LabelProjection {
    pub w1: ParamId,
    pub w2: ParamId,
}

/// One projection pair per channel: S-T, S-A, then each role.
#[derive(Debug, Clone)]
pub struct PredictorLayer {
    pub labels: Vec<LabelProjection>,
    pub d_p: usize,
    pub d_h: usize,
    pub base: f64,
}

/// Per-label rotated projections, kept for the backward pass.
pub struct ScoreCache {
    n: usize,
    rotated: Vec<(Vec<f64>, Vec<f64>)>,
}

impl PredictorLayer {
    pub fn register(
        reg: &mut ParamRegistry,
        label_names: &[String],
        d_h: usize,
        d_p: usize,
        base: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let mut labels = Vec::with_capacity(label_names.len());
        for name in label_names {
            let w1 = reg.register(
                &format!("predictor.{name}.w1"),
                ParamGroup::Other,
                init_weight(&[d_p, d_h], rng),
            )?;
            let w2 = reg.register(
                &format!("predictor.{name}.w2"),
                ParamGroup::Other,
                init_weight(&[d_p, d_h], rng),
            )?;
            labels.push(LabelProjection { w1, w2 });
        }
        Ok(PredictorLayer {
            labels,
            d_p,
            d_h,
            base,
        })
    }

    pub fn channels(&self) -> usize {
        self.labels.len()
    }

    /// Scores `[channels, n, n]` for `v: [n, d_h]`.
    pub fn forward(
        &self,
        params: &ParamRegistry,
        v: &[f64],
        n: usize,
        table: &RotaryTable,
    ) -> (Vec<f64>, ScoreCache) {
        let mut scores = vec![0.0; self.labels.len() * n * n];
        let mut rotated = Vec::with_capacity(self.labels.len());
        for (c, lp) in self.labels.iter().enumerate() {
            let mut a = linear(v, n, params.get(lp.w1));
            let mut b = linear(v, n, params.get(lp.w2));
            table.apply_rows(&mut a, false);
            table.apply_rows(&mut b, false);
            gemm(
                n,
                self.d_p,
                n,
                1.0,
                &a,
                false,
                &b,
                true,
                0.0,
                &mut scores[c * n * n..(c + 1) * n * n],
            );
            rotated.push((a, b));
        }
        (scores, ScoreCache { n, rotated })
    }

    /// Backward from `dscores: [channels, n, n]`; returns `dV`.
    pub fn backward(
        &self,
        params: &ParamRegistry,
        v: &[f64],
        cache: &ScoreCache,
        dscores: &[f64],
        table: &RotaryTable,
        grads: &mut Gradients,
    ) -> Vec<f64> {
        let n = cache.n;
        let dp = self.d_p;
        let mut dv = vec![0.0; n * self.d_h];
        for (c, lp) in self.labels.iter().enumerate() {
            let ds = &dscores[c * n * n..(c + 1) * n * n];
            if ds.iter().all(|&x| x == 0.0) {
                continue;
            }
            let (a, b) = &cache.rotated[c];
            let mut da = vec![0.0; n * dp];
            gemm(n, n, dp, 1.0, ds, false, b, false, 0.0, &mut da);
            let mut db = vec![0.0; n * dp];
            gemm(n, n, dp, 1.0, ds, true, a, false, 0.0, &mut db);
            table.apply_rows(&mut da, true);
            table.apply_rows(&mut db, true);
            let dv1 = linear_backward(v, n, params.get(lp.w1), &da, grads.get_mut(lp.w1));
            let dv2 = linear_backward(v, n, params.get(lp.w2), &db, grads.get_mut(lp.w2));
            for k in 0..dv.len() {
                dv[k] += dv1[k] + dv2[k];
            }
        }
        dv
    }
}
