//! Circle-loss training with per-sentence event-type sampling.

pub mod loss;
pub mod optim;
pub mod sampler;

use std::fmt::Write as _;
use std::ops::ControlFlow;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_model::Corpus;
use crate::grid_codec::RoleStrategy;
use crate::metrics::{evaluate, predict_corpus, EvalReport};
use crate::model::{Example, Model, ModelConfig};
use crate::neural::Gradients;
use crate::predictor::DEFAULT_ROTARY_BASE;

pub use loss::{circle_loss, circle_loss_grid, log_sum_exp_with, PairSets};
pub use optim::{optimizer_step, AdamState, OptimConfig};
pub use sampler::sample_event_types;

/// Flat training configuration; every key is optional in the TOML form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_encoder: f64,
    pub lr_other: f64,
    pub weight_decay: f64,
    pub seed: u64,
    /// Event types sampled per sentence.
    pub k: usize,
    pub delta: f64,
    pub strategy: RoleStrategy,
    pub d_h: usize,
    pub d_p: Option<usize>,
    pub use_context_mixer: bool,
    pub rotary_base: f64,
    /// Global gradient-norm clip; off unless set.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 8,
            lr_encoder: 1e-3,
            lr_other: 1e-3,
            weight_decay: 0.0,
            seed: 0,
            k: 6,
            delta: 0.0,
            strategy: RoleStrategy::TwAw,
            d_h: 32,
            d_p: None,
            use_context_mixer: true,
            rotary_base: DEFAULT_ROTARY_BASE,
            clip_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: TrainConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn check(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.k == 0 {
            bad.push("k must be ≥ 1".to_string());
        }
        if self.batch_size == 0 {
            bad.push("batch_size must be ≥ 1".to_string());
        }
        for (name, lr) in [("lr_encoder", self.lr_encoder), ("lr_other", self.lr_other)] {
            if !(lr.is_finite() && lr >= 0.0) {
                bad.push(format!("{name} must be a finite non-negative number"));
            }
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            bad.push("weight_decay must be finite and non-negative".into());
        }
        if !self.delta.is_finite() {
            bad.push("delta must be finite".into());
        }
        if let Some(c) = self.clip_norm {
            if !(c.is_finite() && c > 0.0) {
                bad.push("clip_norm must be positive".into());
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            d_h: self.d_h,
            d_p: self.d_p,
            use_context_mixer: self.use_context_mixer,
            rotary_base: self.rotary_base,
            strategy: self.strategy,
            threshold: self.delta,
            init_seed: self.seed,
            ..ModelConfig::default()
        }
    }

    pub fn optim(&self) -> OptimConfig {
        OptimConfig {
            lr_encoder: self.lr_encoder,
            lr_other: self.lr_other,
            weight_decay: self.weight_decay,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub dev: Option<DevScores>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DevScores {
    pub ti_f1: f64,
    pub tc_f1: f64,
    pub ai_f1: f64,
    pub ac_f1: f64,
}

impl From<&EvalReport> for DevScores {
    fn from(r: &EvalReport) -> Self {
        DevScores {
            ti_f1: r.ti.f1,
            tc_f1: r.tc.f1,
            ai_f1: r.ai.f1,
            ac_f1: r.ac.f1,
        }
    }
}

pub struct TrainOutcome {
    /// Best model by dev TC F1, or the final one without a dev set.
    pub model: Model,
    pub best_epoch: Option<usize>,
    pub log: Vec<EpochLog>,
}

pub fn train(
    train_set: &Corpus,
    dev: Option<&Corpus>,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with(train_set, dev, config, |_, _| ControlFlow::Continue(()))
}

/// Training loop with a per-epoch hook. The hook sees the epoch log and the
/// current model, and may stop training early.
pub fn train_with<F>(
    train_set: &Corpus,
    dev: Option<&Corpus>,
    config: &TrainConfig,
    mut on_epoch: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&EpochLog, &Model) -> ControlFlow<()>,
{
    config.check()?;
    train_set.validate()?;
    if let Some(d) = dev {
        d.validate()?;
        if d.schema != train_set.schema {
            return Err(Error::SchemaMismatch("dev and train schemas differ".into()));
        }
    }
    let mut model = Model::for_corpus(
        train_set.schema.clone(),
        &train_set.sentences,
        config.model_config(),
    )?;
    let examples: Vec<Example> = train_set
        .sentences
        .iter()
        .map(|s| model.example(s))
        .collect::<Result<_>>()?;
    let m = model.num_event_types();
    let optim = config.optim();
    let mut state = AdamState::new(&model.params);
    let mut grads = Gradients::zeros_like(&model.params);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();

    let mut log = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, Model)> = None;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (step, batch) in order.chunks(config.batch_size).enumerate() {
            for id in model.params.ids() {
                grads.get_mut(id).fill(0.0);
            }
            let mut batch_loss = 0.0;
            for &i in batch {
                let ex = &examples[i];
                let types = sample_event_types(&ex.gold_types, m, config.k, epoch, &mut rng);
                batch_loss += model.loss(ex, &types, Some(&mut grads))?;
            }
            if !batch_loss.is_finite() {
                return Err(Error::Diverged { epoch, step });
            }
            let scale = 1.0 / batch.len() as f64;
            grads.scale(scale);
            if let Some(max) = config.clip_norm {
                let norm = grads.global_norm();
                if norm > max {
                    grads.scale(max / norm);
                }
            }
            optimizer_step(&mut model.params, &grads, &mut state, &optim)?;
            epoch_loss += batch_loss;
        }
        let loss = epoch_loss / examples.len().max(1) as f64;
        let dev_scores = match dev {
            Some(d) => {
                let predicted = predict_corpus(&model, &d.sentences, 1)?;
                Some(DevScores::from(&evaluate(&predicted, &d.sentences)))
            }
            None => None,
        };
        let entry = EpochLog {
            epoch,
            loss,
            dev: dev_scores,
        };
        if let Some(s) = dev_scores {
            if best.as_ref().is_none_or(|(f, _, _)| s.tc_f1 > *f) {
                best = Some((s.tc_f1, epoch, model.clone()));
            }
        }
        let flow = on_epoch(&entry, &model);
        log.push(entry);
        if flow.is_break() {
            break;
        }
    }
    Ok(match best {
        Some((_, epoch, best_model)) => TrainOutcome {
            model: best_model,
            best_epoch: Some(epoch),
            log,
        },
        None => TrainOutcome {
            model,
            best_epoch: None,
            log,
        },
    })
}

pub fn log_to_jsonl(log: &[EpochLog]) -> String {
    let mut out = String::new();
    for e in log {
        out.push_str(&serde_json::to_string(e).expect("log serializes"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KSweepRow {
    pub k: usize,
    pub tc_f1: f64,
    pub ac_f1: f64,
    pub final_loss: f64,
}

/// Trains once per `k` and scores each model on `test`.
pub fn k_sweep(
    train_set: &Corpus,
    test: &Corpus,
    base: &TrainConfig,
    ks: &[usize],
) -> Result<Vec<KSweepRow>> {
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        let config = TrainConfig { k, ..base.clone() };
        let outcome = train(train_set, None, &config)?;
        let predicted = predict_corpus(&outcome.model, &test.sentences, 1)?;
        let report = evaluate(&predicted, &test.sentences);
        rows.push(KSweepRow {
            k,
            tc_f1: report.tc.f1,
            ac_f1: report.ac.f1,
            final_loss: outcome.log.last().map_or(f64::NAN, |e| e.loss),
        });
    }
    Ok(rows)
}

/// Default sweep range: 2 ..= min(8, M + 4).
pub fn default_k_range(num_event_types: usize) -> Vec<usize> {
    (2..=8.min(num_event_types + 4)).collect()
}

pub fn format_k_table(rows: &[KSweepRow]) -> String {
    let mut out = String::from("   K   TC-F1   AC-F1  final-loss\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{:>4}  {:>6.4}  {:>6.4}  {:>10.5}",
            r.k, r.tc_f1, r.ac_f1, r.final_loss
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_model::{gen_synthetic, GenConfig, Schema};

    fn tiny_corpus(count: usize) -> Corpus {
        let schema = Schema::from_names(&["A", "B", "C"], &["x", "y"]).unwrap();
        gen_synthetic(
            &GenConfig {
                sentence_count: count,
                max_len: 8,
                ..GenConfig::default()
            },
            &schema,
        )
        .unwrap()
    }

    fn small_config() -> TrainConfig {
        TrainConfig {
            epochs: 3,
            batch_size: 2,
            d_h: 8,
            k: 2,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn same_seed_same_curve() {
        let corpus = tiny_corpus(6);
        let a = train(&corpus, None, &small_config()).unwrap();
        let b = train(&corpus, None, &small_config()).unwrap();
        let la: Vec<f64> = a.log.iter().map(|e| e.loss).collect();
        let lb: Vec<f64> = b.log.iter().map(|e| e.loss).collect();
        assert_eq!(la, lb);
    }

    #[test]
    fn zero_lr_keeps_loss_constant() {
        let corpus = tiny_corpus(4);
        let config = TrainConfig {
            lr_encoder: 0.0,
            lr_other: 0.0,
            k: 3,
            ..small_config()
        };
        let out = train(&corpus, None, &config).unwrap();
        let first = out.log[0].loss;
        for e in &out.log {
            assert!((e.loss - first).abs() < 1e-12, "{} vs {first}", e.loss);
        }
    }

    #[test]
    fn single_sentence_memorized() {
        let corpus = tiny_corpus(1);
        let config = TrainConfig {
            epochs: 300,
            batch_size: 1,
            d_h: 16,
            k: 3,
            lr_encoder: 1e-2,
            lr_other: 1e-2,
            ..TrainConfig::default()
        };
        let out = train(&corpus, None, &config).unwrap();
        let last = out.log.last().unwrap().loss;
        assert!(last <= 0.01, "final loss {last}");
        let predicted = predict_corpus(&out.model, &corpus.sentences, 1).unwrap();
        assert_eq!(
            predicted[0],
            crate::event_model::normalize_events(&corpus.sentences[0].events)
        );
    }

    #[test]
    fn dev_tracking_keeps_best() {
        let corpus = tiny_corpus(6);
        let out = train(&corpus, Some(&corpus), &small_config()).unwrap();
        let best = out.best_epoch.unwrap();
        let best_f1 = out.log[best].dev.unwrap().tc_f1;
        assert!(out.log.iter().all(|e| e.dev.unwrap().tc_f1 <= best_f1));
        assert_eq!(log_to_jsonl(&out.log).lines().count(), 3);
    }

    #[test]
    fn early_stop_hook() {
        let corpus = tiny_corpus(3);
        let out = train_with(&corpus, None, &small_config(), |e, _| {
            if e.epoch == 1 {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })
        .unwrap();
        assert_eq!(out.log.len(), 2);
    }

    #[test]
    fn config_parsing() {
        let cfg = TrainConfig::from_toml_str("epochs = 5\nk = 3\nstrategy = \"th-ah\"\n").unwrap();
        assert_eq!(cfg.epochs, 5);
        assert_eq!(cfg.k, 3);
        assert_eq!(cfg.strategy, RoleStrategy::ThAh);
        assert_eq!(cfg.batch_size, 8);
        assert!(TrainConfig::from_toml_str("k = 0").is_err());
        assert!(TrainConfig::from_toml_str("lr_other = -1.0").is_err());
        assert!(TrainConfig::from_toml_str("bogus = 1").is_err());
    }

    #[test]
    fn k_table_has_one_row_per_k() {
        assert_eq!(default_k_range(4), vec![2, 3, 4, 5, 6, 7, 8]);
        assert_eq!(default_k_range(2), vec![2, 3, 4, 5, 6]);
        let rows = vec![KSweepRow {
            k: 2,
            tc_f1: 0.5,
            ac_f1: 0.25,
            final_loss: 1.0,
        }];
        let table = format_k_table(&rows);
        assert_eq!(table.lines().count(), 2);
        assert!(table.contains("0.5000"));
    }
}
