//! Adaptive event fusion.
//!
//! Word representations attend over all event-type embeddings to pick up
//! global event information (`E^g`), a first gate mixes that into the words
//! (`H^g`), and a second gate mixes in the target type's embedding to give
//! the event-aware representations `V^t`. Only the second gate depends on
//! the target type, so the shared part is computed once per sentence.

use crate::error::{Error, Result};
use crate::neural::init_weight;
use crate::neural::{
    dot, gemm, linear, linear_backward, sigmoid, softmax_rows, softmax_rows_backward, Gradients,
    ParamGroup, ParamId, ParamRegistry, Tensor,
};
use rand::Rng;

/// `softmax(Q Kᵀ / √d) V` for `Q: [nq, d]`, `K, V: [nk, d]`. Returns the
/// output and the attention weights `[nq, nk]`.
pub fn attention(
    q: &[f64],
    k: &[f64],
    v: &[f64],
    nq: usize,
    nk: usize,
    d: usize,
) -> (Vec<f64>, Vec<f64>) {
    let scale = 1.0 / (d as f64).sqrt();
    let mut probs = vec![0.0; nq * nk];
    gemm(nq, d, nk, scale, q, false, k, true, 0.0, &mut probs);
    softmax_rows(&mut probs, nk);
    let mut out = vec![0.0; nq * d];
    gemm(nq, nk, d, 1.0, &probs, false, v, false, 0.0, &mut out);
    (out, probs)
}

pub struct AttentionGrads {
    pub dq: Vec<f64>,
    pub dk: Vec<f64>,
    pub dv: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn attention_backward(
    dout: &[f64],
    q: &[f64],
    k: &[f64],
    v: &[f64],
    probs: &[f64],
    nq: usize,
    nk: usize,
    d: usize,
) -> AttentionGrads {
    let scale = 1.0 / (d as f64).sqrt();
    let mut dprobs = vec![0.0; nq * nk];
    gemm(nq, d, nk, 1.0, dout, false, v, true, 0.0, &mut dprobs);
    let mut dv = vec![0.0; nk * d];
    gemm(nk, nq, d, 1.0, probs, true, dout, false, 0.0, &mut dv);
    let dscores = softmax_rows_backward(probs, &dprobs, nk);
    let mut dq = vec![0.0; nq * d];
    gemm(nq, nk, d, scale, &dscores, false, k, false, 0.0, &mut dq);
    let mut dk = vec![0.0; nk * d];
    gemm(nk, nq, d, scale, &dscores, true, q, false, 0.0, &mut dk);
    AttentionGrads { dq, dk, dv }
}

/// `g = σ(W [p; q] + b)`, `out = g ⊙ p + (1 − g) ⊙ q` for a single pair of
/// vectors. `w: [d, 2d]`, `b: [d]`.
pub fn gate(p: &[f64], q: &[f64], w: &Tensor, b: &Tensor) -> Vec<f64> {
    let mut pq = p.to_vec();
    pq.extend_from_slice(q);
    (0..p.len())
        .map(|k| {
            let g = sigmoid(dot(w.row(k), &pq) + b.data()[k]);
            g * p[k] + (1.0 - g) * q[k]
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct GateIds {
    pub w: ParamId,
    pub b: ParamId,
}

impl GateIds {
    fn register(
        reg: &mut ParamRegistry,
        prefix: &str,
        d: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        Ok(GateIds {
            w: reg.register(
                &format!("{prefix}.w"),
                ParamGroup::Other,
                init_weight(&[d, 2 * d], rng),
            )?,
            b: reg.register(
                &format!("{prefix}.b"),
                ParamGroup::Other,
                Tensor::zeros(&[d]),
            )?,
        })
    }
}

/// Row-wise gate over `[rows, d]` inputs; `q` may be a single broadcast row.
struct GateOut {
    input: Vec<f64>,
    g: Vec<f64>,
    out: Vec<f64>,
}

fn gate_rows(
    params: &ParamRegistry,
    ids: GateIds,
    p: &[f64],
    q: &[f64],
    rows: usize,
    d: usize,
) -> GateOut {
    let broadcast = q.len() == d;
    let mut input = Vec::with_capacity(rows * 2 * d);
    for i in 0..rows {
        input.extend_from_slice(&p[i * d..(i + 1) * d]);
        let qi = if broadcast { q } else { &q[i * d..(i + 1) * d] };
        input.extend_from_slice(qi);
    }
    let mut g = linear(&input, rows, params.get(ids.w));
    let b = params.get(ids.b).data();
    let mut out = vec![0.0; rows * d];
    for i in 0..rows {
        for k in 0..d {
            let gv = sigmoid(g[i * d + k] + b[k]);
            g[i * d + k] = gv;
            let pv = input[i * 2 * d + k];
            let qv = input[i * 2 * d + d + k];
            out[i * d + k] = gv * pv + (1.0 - gv) * qv;
        }
    }
    GateOut { input, g, out }
}

/// Returns `(dp, dq)`; `dq` is summed over rows when `q` was broadcast.
#[allow(clippy::too_many_arguments)]
fn gate_rows_backward(
    params: &ParamRegistry,
    ids: GateIds,
    cache: &GateOut,
    dout: &[f64],
    rows: usize,
    d: usize,
    broadcast: bool,
    grads: &mut Gradients,
) -> (Vec<f64>, Vec<f64>) {
    let mut dpre = vec![0.0; rows * d];
    let mut dp = vec![0.0; rows * d];
    let mut dq = vec![0.0; if broadcast { d } else { rows * d }];
    for i in 0..rows {
        for k in 0..d {
            let gv = cache.g[i * d + k];
            let pv = cache.input[i * 2 * d + k];
            let qv = cache.input[i * 2 * d + d + k];
            let o = dout[i * d + k];
            dp[i * d + k] = o * gv;
            let qk = if broadcast { k } else { i * d + k };
            dq[qk] += o * (1.0 - gv);
            dpre[i * d + k] = o * (pv - qv) * gv * (1.0 - gv);
        }
    }
    {
        let db = grads.get_mut(ids.b).data_mut();
        for row in dpre.chunks(d) {
            for (a, b) in db.iter_mut().zip(row) {
                *a += b;
            }
        }
    }
    let dinput = linear_backward(
        &cache.input,
        rows,
        params.get(ids.w),
        &dpre,
        grads.get_mut(ids.w),
    );
    for i in 0..rows {
        for k in 0..d {
            dp[i * d + k] += dinput[i * 2 * d + k];
            let qk = if broadcast { k } else { i * d + k };
            dq[qk] += dinput[i * 2 * d + d + k];
        }
    }
    (dp, dq)
}

/// Parameter handles of the fusion layer.
#[derive(Debug, Clone, Copy)]
pub struct FusionLayer {
    pub event_embeddings: ParamId,
    pub w_q: ParamId,
    pub w_k: ParamId,
    pub w_v: ParamId,
    pub gate_global: GateIds,
    pub gate_target: GateIds,
    d: usize,
    m: usize,
}

/// Type-independent part of the fusion forward pass.
pub struct SharedFusion {
    n: usize,
    h: Vec<f64>,
    q: Vec<f64>,
    ke: Vec<f64>,
    ve: Vec<f64>,
    probs: Vec<f64>,
    global: GateOut,
}

impl SharedFusion {
    /// `H^g`, row-major `[n, d]`.
    pub fn hg(&self) -> &[f64] {
        &self.global.out
    }

    /// Attention weights of words over event types, `[n, m]`.
    pub fn attention_weights(&self) -> &[f64] {
        &self.probs
    }
}

pub struct TargetFusion {
    gate: GateOut,
    pub event_type: usize,
}

impl TargetFusion {
    /// `V^t`, row-major `[n, d]`.
    pub fn vt(&self) -> &[f64] {
        &self.gate.out
    }
}

impl FusionLayer {
    pub fn register(
        reg: &mut ParamRegistry,
        m: usize,
        d: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let event_embeddings = reg.register(
            "fusion.event_embeddings",
            ParamGroup::Other,
            crate::neural::init_uniform(&[m, d], 0.1, rng),
        )?;
        let w_q = reg.register("fusion.w_q", ParamGroup::Other, init_weight(&[d, d], rng))?;
        let w_k = reg.register("fusion.w_k", ParamGroup::Other, init_weight(&[d, d], rng))?;
        let w_v = reg.register("fusion.w_v", ParamGroup::Other, init_weight(&[d, d], rng))?;
        let gate_global = GateIds::register(reg, "fusion.gate_global", d, rng)?;
        let gate_target = GateIds::register(reg, "fusion.gate_target", d, rng)?;
        Ok(FusionLayer {
            event_embeddings,
            w_q,
            w_k,
            w_v,
            gate_global,
            gate_target,
            d,
            m,
        })
    }

    pub fn num_event_types(&self) -> usize {
        self.m
    }

    pub fn shared(&self, params: &ParamRegistry, h: &[f64], n: usize) -> SharedFusion {
        let d = self.d;
        let e = params.get(self.event_embeddings);
        let q = linear(h, n, params.get(self.w_q));
        let ke = linear(e.data(), self.m, params.get(self.w_k));
        let ve = linear(e.data(), self.m, params.get(self.w_v));
        let (eg, probs) = attention(&q, &ke, &ve, n, self.m, d);
        let global = gate_rows(params, self.gate_global, h, &eg, n, d);
        SharedFusion {
            n,
            h: h.to_vec(),
            q,
            ke,
            ve,
            probs,
            global,
        }
    }

    pub fn target(
        &self,
        params: &ParamRegistry,
        shared: &SharedFusion,
        event_type: usize,
    ) -> Result<TargetFusion> {
        if event_type >= self.m {
            return Err(Error::EventTypeOutOfRange(event_type));
        }
        let e_t = params.get(self.event_embeddings).row(event_type);
        let gate = gate_rows(params, self.gate_target, shared.hg(), e_t, shared.n, self.d);
        Ok(TargetFusion { gate, event_type })
    }

    /// `V^t` for one target type, `[n, d]`.
    pub fn fuse(&self, params: &ParamRegistry, h: &Tensor, event_type: usize) -> Result<Tensor> {
        let n = h.rows();
        if h.cols() != self.d {
            return Err(Error::Shape(format!(
                "fuse expects width {}, got {}",
                self.d,
                h.cols()
            )));
        }
        let shared = self.shared(params, h.data(), n);
        let target = self.target(params, &shared, event_type)?;
        Tensor::from_vec(&[n, self.d], target.gate.out)
    }

    /// Backward through the target gate; returns `dH^g` and accumulates the
    /// gate and event-embedding gradients.
    pub fn target_backward(
        &self,
        params: &ParamRegistry,
        shared: &SharedFusion,
        target: &TargetFusion,
        dvt: &[f64],
        grads: &mut Gradients,
    ) -> Vec<f64> {
        let (dhg, de_t) = gate_rows_backward(
            params,
            self.gate_target,
            &target.gate,
            dvt,
            shared.n,
            self.d,
            true,
            grads,
        );
        let de = grads
            .get_mut(self.event_embeddings)
            .row_mut(target.event_type);
        for (a, b) in de.iter_mut().zip(&de_t) {
            *a += b;
        }
        dhg
    }

    /// Backward through the shared part; returns `dH`.
    pub fn shared_backward(
        &self,
        params: &ParamRegistry,
        shared: &SharedFusion,
        dhg: &[f64],
        grads: &mut Gradients,
    ) -> Vec<f64> {
        let (n, d, m) = (shared.n, self.d, self.m);
        let (mut dh, deg) = gate_rows_backward(
            params,
            self.gate_global,
            &shared.global,
            dhg,
            n,
            d,
            false,
            grads,
        );
        let ag = attention_backward(
            &deg,
            &shared.q,
            &shared.ke,
            &shared.ve,
            &shared.probs,
            n,
            m,
            d,
        );
        let dh_q = linear_backward(
            &shared.h,
            n,
            params.get(self.w_q),
            &ag.dq,
            grads.get_mut(self.w_q),
        );
        for (a, b) in dh.iter_mut().zip(&dh_q) {
            *a += b;
        }
        let e = params.get(self.event_embeddings).data();
        let de_k = linear_backward(e, m, params.get(self.w_k), &ag.dk, grads.get_mut(self.w_k));
        let de_v = linear_backward(e, m, params.get(self.w_v), &ag.dv, grads.get_mut(self.w_v));
        let de = grads.get_mut(self.event_embeddings).data_mut();
        for k in 0..de.len() {
            de[k] += de_k[k] + de_v[k];
        }
        dh
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(n: usize, rng: &mut impl Rng) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn single_key_attention_copies_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = rand_vec(5 * 4, &mut rng);
        let k = rand_vec(4, &mut rng);
        let v = rand_vec(4, &mut rng);
        let (out, _) = attention(&q, &k, &v, 5, 1, 4);
        for row in out.chunks(4) {
            for (a, b) in row.iter().zip(&v) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn saturated_query_selects_matching_value() {
        let k = vec![1.0, 0.0, 0.0, 1.0];
        let v = vec![3.0, -1.0, 7.0, 2.0];
        let q = vec![0.0, 200.0];
        let (out, _) = attention(&q, &k, &v, 1, 2, 2);
        assert!((out[0] - 7.0).abs() < 1e-9 && (out[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn zero_query_averages_values() {
        let k = vec![1.0, 2.0, -3.0, 0.5, 0.0, 9.0];
        let v = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let (out, probs) = attention(&[0.0, 0.0], &k, &v, 1, 3, 2);
        assert!((out[0] - 3.0).abs() < 1e-12 && (out[1] - 4.0).abs() < 1e-12);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn attention_rows_are_convex_combinations() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (nq, nk, d) = (6, 5, 4);
        let q = rand_vec(nq * d, &mut rng);
        let k = rand_vec(nk * d, &mut rng);
        let v = rand_vec(nk * d, &mut rng);
        let (out, probs) = attention(&q, &k, &v, nq, nk, d);
        for row in probs.chunks(nk) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
        for c in 0..d {
            let col: Vec<f64> = (0..nk).map(|r| v[r * d + c]).collect();
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for r in 0..nq {
                assert!(out[r * d + c] >= lo - 1e-12 && out[r * d + c] <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn gate_identity_and_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = 4;
        let w = init_weight(&[d, 2 * d], &mut rng);
        let b = Tensor::from_vec(&[d], rand_vec(d, &mut rng)).unwrap();
        let p = rand_vec(d, &mut rng);
        let q = rand_vec(d, &mut rng);
        for (a, x) in gate(&p, &p, &w, &b).iter().zip(&p) {
            assert!((a - x).abs() <= 1e-12);
        }
        let zero_w = Tensor::zeros(&[d, 2 * d]);
        let zero_b = Tensor::zeros(&[d]);
        for (k, v) in gate(&p, &q, &zero_w, &zero_b).iter().enumerate() {
            assert!((v - 0.5 * (p[k] + q[k])).abs() < 1e-15);
        }
        let big_b = Tensor::from_vec(&[d], vec![30.0; d]).unwrap();
        for (a, x) in gate(&p, &q, &zero_w, &big_b).iter().zip(&p) {
            assert!((a - x).abs() <= 1e-9);
        }
    }

    fn layer(m: usize, d: usize, seed: u64) -> (ParamRegistry, FusionLayer) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut reg = ParamRegistry::new();
        let f = FusionLayer::register(&mut reg, m, d, &mut rng).unwrap();
        (reg, f)
    }

    #[test]
    fn distinct_targets_give_distinct_outputs() {
        let (reg, f) = layer(3, 8, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let h = Tensor::from_vec(&[4, 8], rand_vec(32, &mut rng)).unwrap();
        let v0 = f.fuse(&reg, &h, 0).unwrap();
        let v1 = f.fuse(&reg, &h, 1).unwrap();
        let diff = v0
            .data()
            .iter()
            .zip(v1.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff > 1e-9);
        assert!(matches!(
            f.fuse(&reg, &h, 3),
            Err(Error::EventTypeOutOfRange(3))
        ));
    }

    #[test]
    fn single_type_global_rows_equal_projected_embedding() {
        let (reg, f) = layer(1, 8, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = rand_vec(3 * 8, &mut rng);
        let shared = f.shared(&reg, &h, 3);
        let we = linear(reg.get(f.event_embeddings).data(), 1, reg.get(f.w_v));
        // With one key every word's global event vector is W_v e_1, so gate 1
        // sees the same q row everywhere.
        for i in 0..3 {
            assert_eq!(&shared.global.input[i * 16 + 8..i * 16 + 16], &we[..]);
        }
    }

    #[test]
    fn all_zero_weights_hand_evaluation() {
        let (mut reg, f) = layer(2, 8, 4);
        for id in [
            f.w_q,
            f.w_k,
            f.w_v,
            f.gate_global.w,
            f.gate_global.b,
            f.gate_target.w,
            f.gate_target.b,
        ] {
            reg.get_mut(id).fill(0.0);
        }
        let h = Tensor::zeros(&[3, 8]);
        let vt = f.fuse(&reg, &h, 1).unwrap();
        let e_t = reg.get(f.event_embeddings).row(1).to_vec();
        // E^g = 0 (W_v = 0), H^g = 0.5·0 + 0.5·0 = 0, V^t = 0.5·0 + 0.5·e_t.
        for row in vt.data().chunks(8) {
            for (a, e) in row.iter().zip(&e_t) {
                assert_eq!(*a, 0.5 * e);
            }
        }
    }

    #[test]
    fn shared_then_target_equals_fuse_bitwise() {
        let (reg, f) = layer(4, 8, 21);
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let h = Tensor::from_vec(&[5, 8], rand_vec(40, &mut rng)).unwrap();
        let shared = f.shared(&reg, h.data(), 5);
        for t in 0..4 {
            let batched = f.target(&reg, &shared, t).unwrap();
            let single = f.fuse(&reg, &h, t).unwrap();
            assert_eq!(batched.vt(), single.data());
        }
    }
}
