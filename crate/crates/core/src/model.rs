//! The full scorer: encoder → event fusion → rotary pair scores, with the
//! backward pass for the circle loss and per-type grid decoding.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_model::{normalize_events, EventRecord, Schema, Sentence, SPAN_LABELS};
use crate::fusion::{FusionLayer, SharedFusion, TargetFusion};
use crate::grid_codec::{decode, encode, LabelGrid, RoleStrategy, ScoreGrid};
use crate::neural::{
    Checkpoint, Encoder, EncoderCache, EncoderConfig, Gradients, ParamRegistry, Vocab,
    DEFAULT_SUFFIX_BUCKETS,
};
use crate::predictor::{PredictorLayer, RotaryTable, ScoreCache, DEFAULT_ROTARY_BASE};
use crate::trainer::loss::{circle_loss_grid, PairSets};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub d_h: usize,
    /// Projection width of the pair scorer; `None` means `d_h`.
    pub d_p: Option<usize>,
    pub use_context_mixer: bool,
    pub rotary_base: f64,
    pub suffix_buckets: usize,
    pub strategy: RoleStrategy,
    /// Tag threshold δ, shared by the loss and decoding.
    pub threshold: f64,
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_h: 32,
            d_p: None,
            use_context_mixer: true,
            rotary_base: DEFAULT_ROTARY_BASE,
            suffix_buckets: DEFAULT_SUFFIX_BUCKETS,
            strategy: RoleStrategy::TwAw,
            threshold: 0.0,
            init_seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn d_p(&self) -> usize {
        self.d_p.unwrap_or(self.d_h)
    }
}

/// Everything needed to rebuild a model's parameter layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelMeta {
    schema: Schema,
    vocab: Vocab,
    config: ModelConfig,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub schema: Schema,
    pub vocab: Vocab,
    pub config: ModelConfig,
    pub params: ParamRegistry,
    encoder: Encoder,
    fusion: FusionLayer,
    predictor: PredictorLayer,
}

/// A sentence prepared for training: word pieces plus gold grids for the
/// event types it contains.
#[derive(Debug, Clone)]
pub struct Example {
    pub pieces: Vec<Vec<usize>>,
    pub gold_types: Vec<usize>,
    grids: Vec<(usize, LabelGrid)>,
}

impl Example {
    pub fn n(&self) -> usize {
        self.pieces.len()
    }

    pub fn gold_grid(&self, event_type: usize) -> Option<&LabelGrid> {
        self.grids
            .iter()
            .find(|(t, _)| *t == event_type)
            .map(|(_, g)| g)
    }
}

struct TypeForward {
    target: TargetFusion,
    scores: Vec<f64>,
    cache: ScoreCache,
}

struct SentenceForward {
    n: usize,
    enc: EncoderCache,
    shared: SharedFusion,
    table: RotaryTable,
    per_type: Vec<TypeForward>,
}

impl Model {
    pub fn new(schema: Schema, vocab: Vocab, config: ModelConfig) -> Result<Self> {
        schema.check()?;
        if !config.d_p().is_multiple_of(2) || config.d_p() == 0 {
            return Err(Error::Config(format!(
                "d_p = {} must be even",
                config.d_p()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let mut params = ParamRegistry::new();
        let encoder = Encoder::register(
            &mut params,
            EncoderConfig {
                d_h: config.d_h,
                vocab_size: vocab.piece_count(),
                use_context_mixer: config.use_context_mixer,
                pieces_per_word: 2,
            },
            &mut rng,
        )?;
        let fusion =
            FusionLayer::register(&mut params, schema.num_event_types(), config.d_h, &mut rng)?;
        let labels: Vec<String> = SPAN_LABELS
            .iter()
            .map(|s| s.to_string())
            .chain(schema.role_types.iter().map(|r| format!("role.{r}")))
            .collect();
        let predictor = PredictorLayer::register(
            &mut params,
            &labels,
            config.d_h,
            config.d_p(),
            config.rotary_base,
            &mut rng,
        )?;
        Ok(Model {
            schema,
            vocab,
            config,
            params,
            encoder,
            fusion,
            predictor,
        })
    }

    /// Builds the vocabulary from `sentences` and initializes a model.
    pub fn for_corpus(schema: Schema, sentences: &[Sentence], config: ModelConfig) -> Result<Self> {
        let vocab = Vocab::build(
            sentences
                .iter()
                .flat_map(|s| s.tokens.iter().map(String::as_str)),
            config.suffix_buckets,
        );
        Model::new(schema, vocab, config)
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn fusion(&self) -> &FusionLayer {
        &self.fusion
    }

    pub fn predictor(&self) -> &PredictorLayer {
        &self.predictor
    }

    pub fn num_event_types(&self) -> usize {
        self.schema.num_event_types()
    }

    pub fn example(&self, sentence: &Sentence) -> Result<Example> {
        let n = sentence.len();
        let gold_types = sentence.event_types();
        let mut grids = Vec::with_capacity(gold_types.len());
        for &t in &gold_types {
            let events = sentence.events_of_type(t);
            grids.push((
                t,
                encode(t, &events, n, self.config.strategy, &self.schema)?,
            ));
        }
        Ok(Example {
            pieces: self.vocab.sentence_pieces(&sentence.tokens),
            gold_types,
            grids,
        })
    }

    fn forward_with(
        &self,
        params: &ParamRegistry,
        pieces: &[Vec<usize>],
        types: &[usize],
    ) -> Result<SentenceForward> {
        let n = pieces.len();
        if n == 0 {
            return Err(Error::Shape("empty sentence".into()));
        }
        let (h, enc) = self.encoder.forward(params, pieces)?;
        let shared = self.fusion.shared(params, &h, n);
        let table = RotaryTable::new(self.config.d_p(), n, self.config.rotary_base);
        let mut per_type = Vec::with_capacity(types.len());
        for &t in types {
            let target = self.fusion.target(params, &shared, t)?;
            let (scores, cache) = self.predictor.forward(params, target.vt(), n, &table);
            per_type.push(TypeForward {
                target,
                scores,
                cache,
            });
        }
        Ok(SentenceForward {
            n,
            enc,
            shared,
            table,
            per_type,
        })
    }

    /// Score grids for the given event types.
    pub fn score_grids(&self, tokens: &[String], types: &[usize]) -> Result<Vec<ScoreGrid>> {
        let pieces = self.vocab.sentence_pieces(tokens);
        let fwd = self.forward_with(&self.params, &pieces, types)?;
        let channels = self.predictor.channels();
        types
            .iter()
            .zip(fwd.per_type)
            .map(|(&t, tf)| ScoreGrid::new(t, fwd.n, channels, tf.scores, self.config.threshold))
            .collect()
    }

    /// All events of all types, in canonical order.
    pub fn predict(&self, tokens: &[String]) -> Result<Vec<EventRecord>> {
        let types: Vec<usize> = (0..self.num_event_types()).collect();
        let mut events = Vec::new();
        for grid in self.score_grids(tokens, &types)? {
            events.extend(decode(&grid, self.config.strategy, &self.schema));
        }
        Ok(normalize_events(&events))
    }

    /// Mean over `types` of the summed per-channel circle losses. Gradients
    /// are added into `grads` when given.
    pub fn loss(
        &self,
        example: &Example,
        types: &[usize],
        grads: Option<&mut Gradients>,
    ) -> Result<f64> {
        self.loss_with(&self.params, example, types, grads)
    }

    pub fn loss_with(
        &self,
        params: &ParamRegistry,
        example: &Example,
        types: &[usize],
        grads: Option<&mut Gradients>,
    ) -> Result<f64> {
        if types.is_empty() {
            return Ok(0.0);
        }
        let fwd = self.forward_with(params, &example.pieces, types)?;
        let n = fwd.n;
        let nn = n * n;
        let channels = self.predictor.channels();
        let norm = 1.0 / types.len() as f64;
        let want_grad = grads.is_some();
        let mut total = 0.0;
        let mut dscores_all = Vec::with_capacity(if want_grad { types.len() } else { 0 });
        for (&t, tf) in types.iter().zip(&fwd.per_type) {
            let gold = example.gold_grid(t);
            let mut dscores = if want_grad {
                vec![0.0; channels * nn]
            } else {
                Vec::new()
            };
            for c in 0..channels {
                let positive = match gold {
                    Some(g) => g.channel(c).to_vec(),
                    None => vec![false; nn],
                };
                let pairs = PairSets::new(n, c < SPAN_LABELS.len(), positive);
                let ds = if want_grad {
                    Some(&mut dscores[c * nn..(c + 1) * nn])
                } else {
                    None
                };
                total += circle_loss_grid(
                    &tf.scores[c * nn..(c + 1) * nn],
                    &pairs,
                    self.config.threshold,
                    ds,
                );
            }
            if want_grad {
                dscores.iter_mut().for_each(|x| *x *= norm);
                dscores_all.push(dscores);
            }
        }
        let loss = total * norm;
        if let Some(grads) = grads {
            let d = self.config.d_h;
            let mut dhg = vec![0.0; n * d];
            for (tf, ds) in fwd.per_type.iter().zip(&dscores_all) {
                let dvt = self.predictor.backward(
                    params,
                    tf.target.vt(),
                    &tf.cache,
                    ds,
                    &fwd.table,
                    grads,
                );
                let part =
                    self.fusion
                        .target_backward(params, &fwd.shared, &tf.target, &dvt, grads);
                for (a, b) in dhg.iter_mut().zip(&part) {
                    *a += b;
                }
            }
            let dh = self
                .fusion
                .shared_backward(params, &fwd.shared, &dhg, grads);
            self.encoder.backward(params, &fwd.enc, &dh, grads);
        }
        Ok(loss)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let meta = ModelMeta {
            schema: self.schema.clone(),
            vocab: self.vocab.clone(),
            config: self.config.clone(),
        };
        Checkpoint::from_registry(
            &self.params,
            serde_json::to_value(meta).expect("meta serializes"),
        )
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let meta: ModelMeta = serde_json::from_value(ckpt.meta.clone())
            .map_err(|e| Error::Checkpoint(format!("bad model metadata: {e}")))?;
        // Check the sizes the metadata implies against stored tensors before
        // allocating anything from them.
        let vocab = meta.vocab.reindex();
        let (d_h, d_p) = (meta.config.d_h, meta.config.d_p());
        let expect = [
            ("encoder.embeddings", vec![vocab.piece_count(), d_h]),
            (
                "fusion.event_embeddings",
                vec![meta.schema.num_event_types(), d_h],
            ),
            ("predictor.S-T.w1", vec![d_p, d_h]),
        ];
        for (name, shape) in expect {
            match ckpt.params.get(name) {
                Some(rec) if rec.shape == shape => {}
                Some(rec) => {
                    return Err(Error::Checkpoint(format!(
                        "{name} has shape {:?}, metadata implies {shape:?}",
                        rec.shape
                    )))
                }
                None => return Err(Error::Checkpoint(format!("missing parameter {name}"))),
            }
        }
        let meta = ModelMeta { vocab, ..meta };
        let mut model = Model::new(meta.schema, meta.vocab, meta.config)?;
        ckpt.apply_to(&mut model.params)?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_model::{gen_synthetic, GenConfig};

    fn small_model() -> (Model, Vec<Sentence>) {
        let schema = Schema::from_names(&["A", "B", "C"], &["x", "y"]).unwrap();
        let corpus = gen_synthetic(
            &GenConfig {
                sentence_count: 5,
                max_len: 8,
                ..GenConfig::default()
            },
            &schema,
        )
        .unwrap();
        let config = ModelConfig {
            d_h: 8,
            ..ModelConfig::default()
        };
        let model = Model::for_corpus(schema, &corpus.sentences, config).unwrap();
        (model, corpus.sentences)
    }

    #[test]
    fn grids_have_expected_shape() {
        let (model, sentences) = small_model();
        let s = &sentences[0];
        let grids = model.score_grids(&s.tokens, &[0, 2]).unwrap();
        assert_eq!(grids.len(), 2);
        assert_eq!(grids[1].event_type, 2);
        assert_eq!(grids[0].channels, 4);
        assert_eq!(grids[0].n, s.len());
    }

    #[test]
    fn out_of_range_type_rejected() {
        let (model, sentences) = small_model();
        assert!(model.score_grids(&sentences[0].tokens, &[3]).is_err());
    }

    #[test]
    fn checkpoint_round_trip_preserves_predictions() {
        let (model, sentences) = small_model();
        let text = model.to_checkpoint().to_json_string();
        let back = Model::from_checkpoint(&Checkpoint::from_json_str(&text).unwrap()).unwrap();
        for s in &sentences {
            assert_eq!(
                model.score_grids(&s.tokens, &[0, 1, 2]).unwrap(),
                back.score_grids(&s.tokens, &[0, 1, 2]).unwrap()
            );
        }
    }

    #[test]
    fn loss_is_deterministic_and_positive() {
        let (model, sentences) = small_model();
        let ex = model.example(&sentences[1]).unwrap();
        let a = model.loss(&ex, &[0, 1, 2], None).unwrap();
        let b = model.loss(&ex, &[0, 1, 2], None).unwrap();
        assert_eq!(a, b);
        assert!(a > 0.0);
        assert_eq!(model.loss(&ex, &[], None).unwrap(), 0.0);
    }
}
