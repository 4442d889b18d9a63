//! Toy word encoder: every word is split into at most two pieces (its
//! vocabulary id and a hashed three-character suffix), piece embeddings are
//! max-pooled into one vector per word, and an optional self-attention block
//! mixes in sentence context.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    init_uniform, init_weight, linear, linear_backward, Gradients, ParamGroup, ParamId,
    ParamRegistry, Tensor,
};
use crate::error::{Error, Result};
use crate::fusion::{attention, attention_backward};

pub const UNK: &str = "<unk>";
pub const DEFAULT_SUFFIX_BUCKETS: usize = 64;
const SUFFIX_CHARS: usize = 3;

/// Word vocabulary plus the suffix hash space; together they index rows of
/// the piece-embedding table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    words: Vec<String>,
    suffix_buckets: usize,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a str>, suffix_buckets: usize) -> Self {
        let mut words: Vec<String> = tokens.into_iter().map(str::to_string).collect();
        words.sort();
        words.dedup();
        words.retain(|w| w != UNK);
        words.insert(0, UNK.to_string());
        Self::from_words(words, suffix_buckets)
    }

    pub fn from_words(words: Vec<String>, suffix_buckets: usize) -> Self {
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Vocab {
            words,
            suffix_buckets,
            index,
        }
    }

    /// Restores the lookup index after deserialization.
    pub fn reindex(mut self) -> Self {
        self.index = self
            .words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        self
    }

    pub fn num_words(&self) -> usize {
        self.words.len()
    }

    /// Rows of the piece-embedding table.
    pub fn piece_count(&self) -> usize {
        self.words.len() + self.suffix_buckets
    }

    pub fn pieces(&self, word: &str) -> Vec<usize> {
        let id = self.index.get(word).copied().unwrap_or(0);
        let chars: Vec<char> = word.chars().collect();
        if chars.len() <= SUFFIX_CHARS || self.suffix_buckets == 0 {
            return vec![id];
        }
        let suffix: String = chars[chars.len() - SUFFIX_CHARS..].iter().collect();
        let bucket = (fnv1a(suffix.as_bytes()) % self.suffix_buckets as u64) as usize;
        vec![id, self.words.len() + bucket]
    }

    pub fn sentence_pieces(&self, tokens: &[String]) -> Vec<Vec<usize>> {
        tokens.iter().map(|t| self.pieces(t)).collect()
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub d_h: usize,
    /// Rows of the piece-embedding table.
    pub vocab_size: usize,
    pub use_context_mixer: bool,
    pub pieces_per_word: usize,
}

impl EncoderConfig {
    pub fn check(&self) -> Result<()> {
        if self.d_h < 8 || !self.d_h.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "d_h = {} must be even and ≥ 8",
                self.d_h
            )));
        }
        if self.vocab_size == 0 || self.pieces_per_word == 0 {
            return Err(Error::Config(
                "vocab_size and pieces_per_word must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct MixerIds {
    w_q: ParamId,
    w_k: ParamId,
    w_v: ParamId,
}

#[derive(Debug, Clone)]
pub struct Encoder {
    pub config: EncoderConfig,
    pub embeddings: ParamId,
    mixer: Option<MixerIds>,
}

pub struct EncoderCache {
    n: usize,
    /// Winning piece id for every `(word, component)`.
    argmax: Vec<usize>,
    pooled: Vec<f64>,
    mixer: Option<MixerCache>,
}

struct MixerCache {
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    probs: Vec<f64>,
}

impl Encoder {
    pub fn register(
        reg: &mut ParamRegistry,
        config: EncoderConfig,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        config.check()?;
        let d = config.d_h;
        let embeddings = reg.register(
            "encoder.embeddings",
            ParamGroup::Encoder,
            init_uniform(&[config.vocab_size, d], 0.1, rng),
        )?;
        let mixer = if config.use_context_mixer {
            Some(MixerIds {
                w_q: reg.register(
                    "encoder.mixer.w_q",
                    ParamGroup::Encoder,
                    init_weight(&[d, d], rng),
                )?,
                w_k: reg.register(
                    "encoder.mixer.w_k",
                    ParamGroup::Encoder,
                    init_weight(&[d, d], rng),
                )?,
                w_v: reg.register(
                    "encoder.mixer.w_v",
                    ParamGroup::Encoder,
                    init_weight(&[d, d], rng),
                )?,
            })
        } else {
            None
        };
        Ok(Encoder {
            config,
            embeddings,
            mixer,
        })
    }

    /// Word representations `[n, d_h]` plus the cache for the backward pass.
    pub fn forward(
        &self,
        params: &ParamRegistry,
        pieces: &[Vec<usize>],
    ) -> Result<(Vec<f64>, EncoderCache)> {
        let d = self.config.d_h;
        let n = pieces.len();
        let table = params.get(self.embeddings);
        let rows = table.rows();
        let mut pooled = vec![f64::NEG_INFINITY; n * d];
        let mut argmax = vec![0usize; n * d];
        for (i, word) in pieces.iter().enumerate() {
            if word.is_empty() || word.len() > self.config.pieces_per_word {
                return Err(Error::Shape(format!(
                    "word {i} has {} pieces, expected 1..={}",
                    word.len(),
                    self.config.pieces_per_word
                )));
            }
            for &id in word {
                if id >= rows {
                    return Err(Error::UnknownPiece { id, rows });
                }
                let emb = table.row(id);
                for k in 0..d {
                    if emb[k] > pooled[i * d + k] {
                        pooled[i * d + k] = emb[k];
                        argmax[i * d + k] = id;
                    }
                }
            }
        }
        let Some(ids) = self.mixer else {
            return Ok((
                pooled.clone(),
                EncoderCache {
                    n,
                    argmax,
                    pooled,
                    mixer: None,
                },
            ));
        };
        let q = linear(&pooled, n, params.get(ids.w_q));
        let k = linear(&pooled, n, params.get(ids.w_k));
        let v = linear(&pooled, n, params.get(ids.w_v));
        let (mixed, probs) = attention(&q, &k, &v, n, n, d);
        let h: Vec<f64> = pooled.iter().zip(&mixed).map(|(a, b)| a + b).collect();
        Ok((
            h,
            EncoderCache {
                n,
                argmax,
                pooled,
                mixer: Some(MixerCache { q, k, v, probs }),
            },
        ))
    }

    pub fn encode_words(&self, params: &ParamRegistry, pieces: &[Vec<usize>]) -> Result<Tensor> {
        let (h, _) = self.forward(params, pieces)?;
        Tensor::from_vec(&[pieces.len(), self.config.d_h], h)
    }

    pub fn backward(
        &self,
        params: &ParamRegistry,
        cache: &EncoderCache,
        dh: &[f64],
        grads: &mut Gradients,
    ) {
        let d = self.config.d_h;
        let n = cache.n;
        let mut dpooled = dh.to_vec();
        if let (Some(ids), Some(mc)) = (self.mixer, &cache.mixer) {
            let ag = attention_backward(dh, &mc.q, &mc.k, &mc.v, &mc.probs, n, n, d);
            for (id, dout) in [(ids.w_q, &ag.dq), (ids.w_k, &ag.dk), (ids.w_v, &ag.dv)] {
                let dx = linear_backward(&cache.pooled, n, params.get(id), dout, grads.get_mut(id));
                for (a, b) in dpooled.iter_mut().zip(&dx) {
                    *a += b;
                }
            }
        }
        let demb = grads.get_mut(self.embeddings);
        for i in 0..n {
            for k in 0..d {
                let id = cache.argmax[i * d + k];
                demb.row_mut(id)[k] += dpooled[i * d + k];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn encoder(mixer: bool) -> (ParamRegistry, Encoder) {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut reg = ParamRegistry::new();
        let cfg = EncoderConfig {
            d_h: 8,
            vocab_size: 10,
            use_context_mixer: mixer,
            pieces_per_word: 2,
        };
        let enc = Encoder::register(&mut reg, cfg, &mut rng).unwrap();
        (reg, enc)
    }

    #[test]
    fn singleton_pool_is_identity() {
        let (reg, enc) = encoder(false);
        let h = enc.encode_words(&reg, &[vec![4]]).unwrap();
        assert_eq!(h.data(), reg.get(enc.embeddings).row(4));
    }

    #[test]
    fn max_pool_dominates() {
        let (mut reg, enc) = encoder(false);
        let v: Vec<f64> = (0..8).map(|k| k as f64 * 0.1 - 0.3).collect();
        let table = reg.get_mut(enc.embeddings);
        table.row_mut(1).copy_from_slice(&v);
        let v1: Vec<f64> = v.iter().map(|x| x + 1.0).collect();
        table.row_mut(2).copy_from_slice(&v1);
        let h = enc.encode_words(&reg, &[vec![1, 2]]).unwrap();
        assert_eq!(h.data(), &v1[..]);
    }

    #[test]
    fn pooled_component_comes_from_some_piece() {
        let (reg, enc) = encoder(false);
        let h = enc.encode_words(&reg, &[vec![3, 7], vec![0, 9]]).unwrap();
        let t = reg.get(enc.embeddings);
        for (i, word) in [[3, 7], [0, 9]].iter().enumerate() {
            for k in 0..8 {
                let v = h.row(i)[k];
                assert!(word.iter().all(|&p| t.row(p)[k] <= v));
                assert!(word.iter().any(|&p| t.row(p)[k] == v));
            }
        }
    }

    #[test]
    fn unknown_piece_and_bad_arity_rejected() {
        let (reg, enc) = encoder(true);
        assert!(matches!(
            enc.encode_words(&reg, &[vec![10]]),
            Err(Error::UnknownPiece { id: 10, rows: 10 })
        ));
        assert!(enc.encode_words(&reg, &[vec![]]).is_err());
        assert!(enc.encode_words(&reg, &[vec![1, 2, 3]]).is_err());
    }

    #[test]
    fn deterministic() {
        let (reg, enc) = encoder(true);
        let s = vec![vec![1, 2], vec![5], vec![9, 0]];
        assert_eq!(
            enc.encode_words(&reg, &s).unwrap(),
            enc.encode_words(&reg, &s).unwrap()
        );
    }

    #[test]
    fn vocab_pieces() {
        let v = Vocab::build(["ab", "hello", "help"], 16);
        assert_eq!(v.num_words(), 4);
        assert_eq!(v.pieces("ab"), vec![1]);
        let hello = v.pieces("hello");
        assert_eq!(hello.len(), 2);
        assert!(hello[1] >= 4 && hello[1] < v.piece_count());
        assert_eq!(v.pieces("unseen")[0], 0);
        let restored: Vocab = serde_json::from_str::<Vocab>(&serde_json::to_string(&v).unwrap())
            .unwrap()
            .reindex();
        assert_eq!(restored.pieces("hello"), hello);
    }
}
