//! Mini-batch training and fine-tuning.
//!
//! A step draws `batch_size` nets from a seeded shuffle of the training set
//! (reshuffled every pass), splits them into shards of `shard_size` nets,
//! runs forward/backward on the shards in parallel, sums the shard gradients
//! in shard order and applies one Adam update. The loss is the candidate
//! BCE averaged over all candidates of the batch, so the result does not
//! depend on the sharding or the thread count.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::TrainingSample;
use crate::error::{Error, Result};
use crate::eval::{validate, InferenceOptions, ValidationMetrics, DEFAULT_BATCH_SIZE, DEFAULT_THRESHOLD};
use crate::hanan::build_hanan_graph;
use crate::model::network::{backward_into, bce_terms};
use crate::model::{adam_step, forward, AdamConfig, AdamState, Checkpoint, GraphBatch, ModelConfig, ModelParams};

pub const FINE_TUNE_LR: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub adam: AdamConfig,
    pub steps: usize,
    pub batch_size: usize,
    /// Nets per parallel forward/backward shard.
    pub shard_size: usize,
    /// Weight of positive candidates in the loss.
    pub pos_weight: f32,
    /// Validate every this many steps (and always after the last step).
    pub val_every: usize,
    /// Loss rows average over this many steps.
    pub log_every: usize,
    pub threshold: f32,
    /// Decay the learning rate along a cosine to `lr * final_lr_ratio`.
    pub cosine_decay: bool,
    pub final_lr_ratio: f64,
    /// Seeds the data order.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelConfig::default(),
            adam: AdamConfig::default(),
            steps: 1000,
            batch_size: DEFAULT_BATCH_SIZE,
            shard_size: 4,
            pos_weight: 1.0,
            val_every: 500,
            log_every: 1,
            threshold: DEFAULT_THRESHOLD,
            cosine_decay: false,
            final_lr_ratio: 0.05,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.batch_size == 0 || self.shard_size == 0 || self.log_every == 0 {
            return Err(Error::Config("batch size, shard size and log interval must be positive".into()));
        }
        if !(self.adam.lr >= 0.0 && self.adam.lr.is_finite()) || self.pos_weight <= 0.0 {
            return Err(Error::Config("learning rate must be finite and >= 0, positive weight > 0".into()));
        }
        Ok(())
    }

    fn lr_at(&self, step: usize) -> f64 {
        if !self.cosine_decay || self.steps <= 1 {
            return self.adam.lr;
        }
        let t = step as f64 / (self.steps - 1) as f64;
        let floor = self.adam.lr * self.final_lr_ratio;
        floor + 0.5 * (self.adam.lr - floor) * (1.0 + (std::f64::consts::PI * t).cos())
    }
}

/// One metrics log row. Validation fields are set only on validation steps.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    /// 1-based step the row ends at.
    pub step: usize,
    pub loss: f64,
    pub validation: Option<ValidationMetrics>,
    pub wallclock_ms: f64,
}

pub fn metrics_csv(rows: &[MetricsRow], with_wallclock: bool) -> String {
    let mut s = String::from("step,loss,val_precision,val_recall,val_wl_error_pct");
    s.push_str(if with_wallclock { ",wallclock_ms\n" } else { "\n" });
    for r in rows {
        s.push_str(&format!("{},{:.8}", r.step, r.loss));
        match r.validation {
            Some(v) => s.push_str(&format!(",{:.6},{:.6},{:.6}", v.precision, v.recall, v.wl_error_pct)),
            None => s.push_str(",,,"),
        }
        if with_wallclock {
            s.push_str(&format!(",{:.1}", r.wallclock_ms));
        }
        s.push('\n');
    }
    s
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters with the lowest validation WL error (the final ones
    /// without a validation set).
    pub best: Checkpoint,
    pub best_step: usize,
    pub last: Checkpoint,
    pub metrics: Vec<MetricsRow>,
}

fn shard_pass(
    params: &ModelParams<f32>,
    samples: &[&TrainingSample],
    pos_weight: f32,
    denom: usize,
) -> Result<(f64, ModelParams<f32>)> {
    let mut batch = GraphBatch::default();
    for s in samples {
        let g = build_hanan_graph(&s.net)?;
        if g.n_candidates != s.labels.len() {
            return Err(Error::Invalid(format!("net {}: {} labels for {} candidates", s.net.id, s.labels.len(), g.n_candidates)));
        }
        batch.push(&g, Some(&s.labels));
    }
    let trace = forward(params, &batch);
    let (loss, dlogits) = bce_terms(&trace.logits, &batch.labels, &batch.candidate, pos_weight, denom);
    let mut grads = params.zeros_like();
    backward_into(params, &batch, &trace, &dlogits, &mut grads);
    Ok((loss as f64, grads))
}

fn validation_set(samples: &[TrainingSample]) -> Vec<(&crate::geometry::Net, &[u8], crate::geometry::Length)> {
    samples.iter().map(|s| (&s.net, s.labels.as_slice(), s.wl_opt)).collect()
}

/// Trains freshly initialised parameters.
pub fn train(cfg: &TrainConfig, samples: &[TrainingSample], validation: &[TrainingSample]) -> Result<TrainOutcome> {
    cfg.validate()?;
    let params = ModelParams::<f32>::init(&cfg.model)?;
    train_from(params, cfg, samples, validation)
}

/// Continues training `params`; `cfg.model` is ignored.
pub fn train_from(
    mut params: ModelParams<f32>,
    cfg: &TrainConfig,
    samples: &[TrainingSample],
    validation: &[TrainingSample],
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if samples.is_empty() && cfg.steps > 0 {
        return Err(Error::Config("no training samples".into()));
    }
    let start = Instant::now();
    let val = validation_set(validation);
    let infer_opts = InferenceOptions { threshold: cfg.threshold, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut cursor = order.len();
    let mut adam = AdamState::new(&params);
    let mut metrics = Vec::new();
    let mut best: Option<(f64, usize, ModelParams<f32>)> = None;
    let mut interval_loss = 0.0;
    let mut interval_steps = 0;

    for step in 0..cfg.steps {
        let mut picked = Vec::with_capacity(cfg.batch_size);
        while picked.len() < cfg.batch_size.min(samples.len()) {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            picked.push(&samples[order[cursor]]);
            cursor += 1;
        }
        let denom: usize = picked.iter().map(|s| s.labels.len()).sum();
        let shards: Vec<Result<(f64, ModelParams<f32>)>> =
            picked.par_chunks(cfg.shard_size).map(|c| shard_pass(&params, c, cfg.pos_weight, denom)).collect();
        let mut loss = 0.0;
        let mut grads: Option<ModelParams<f32>> = None;
        for r in shards {
            let (l, g) = r?;
            loss += l;
            match grads.as_mut() {
                None => grads = Some(g),
                Some(acc) => acc.add_assign(&g),
            }
        }
        let grads = grads.expect("at least one shard");
        if !loss.is_finite() || !grads.is_finite() {
            return Err(Error::NonFiniteLoss { batch: step });
        }
        let adam_cfg = AdamConfig { lr: cfg.lr_at(step), ..cfg.adam };
        adam_step(&mut params, &grads, &mut adam, &adam_cfg);
        interval_loss += loss;
        interval_steps += 1;

        let done = step + 1;
        let validate_now = !val.is_empty() && ((cfg.val_every > 0 && done % cfg.val_every == 0) || done == cfg.steps);
        if done % cfg.log_every == 0 || validate_now || done == cfg.steps {
            let validation = if validate_now { Some(validate(&params, &val, &infer_opts)?) } else { None };
            if let Some(v) = validation {
                if best.as_ref().is_none_or(|b| v.wl_error_pct < b.0) {
                    best = Some((v.wl_error_pct, done, params.clone()));
                }
            }
            metrics.push(MetricsRow {
                step: done,
                loss: interval_loss / interval_steps as f64,
                validation,
                wallclock_ms: start.elapsed().as_secs_f64() * 1e3,
            });
            interval_loss = 0.0;
            interval_steps = 0;
        }
    }

    let describe = |c: &mut Checkpoint, at: usize| {
        c.meta.insert("steps".into(), at.to_string());
        c.meta.insert("batch_size".into(), cfg.batch_size.to_string());
        c.meta.insert("lr".into(), cfg.adam.lr.to_string());
        c.meta.insert("weight_decay".into(), cfg.adam.weight_decay.to_string());
        c.meta.insert("pos_weight".into(), cfg.pos_weight.to_string());
        c.meta.insert("data_seed".into(), cfg.seed.to_string());
    };
    let mut last = Checkpoint::new(params.clone());
    describe(&mut last, cfg.steps);
    let (best_step, mut best) = match best {
        Some((err, at, p)) => {
            let mut c = Checkpoint::new(p);
            c.meta.insert("val_wl_error_pct".into(), format!("{err:.6}"));
            (at, c)
        }
        None => (cfg.steps, Checkpoint::new(params)),
    };
    describe(&mut best, best_step);
    Ok(TrainOutcome { best, best_step, last, metrics })
}

/// Continues training a checkpoint. With `expected`, the checkpoint must
/// have that architecture; nothing is trained otherwise. Zero steps return
/// the input unchanged.
pub fn fine_tune(
    base: &Checkpoint,
    expected: Option<&ModelConfig>,
    cfg: &TrainConfig,
    samples: &[TrainingSample],
    validation: &[TrainingSample],
) -> Result<TrainOutcome> {
    if let Some(want) = expected {
        if !base.config().same_architecture(want) {
            return Err(Error::ArchitectureMismatch(format!(
                "checkpoint has layers={} hidden={} mlp_hidden={} layernorm={} neighbor_variant={}, requested layers={} hidden={} mlp_hidden={} layernorm={} neighbor_variant={}",
                base.config().layers,
                base.config().hidden,
                base.config().mlp_hidden,
                base.config().use_layernorm,
                base.config().gine_neighbor_variant,
                want.layers,
                want.hidden,
                want.mlp_hidden,
                want.use_layernorm,
                want.gine_neighbor_variant
            )));
        }
    }
    if cfg.steps == 0 {
        return Ok(TrainOutcome { best: base.clone(), best_step: 0, last: base.clone(), metrics: Vec::new() });
    }
    let mut cfg = cfg.clone();
    cfg.model = base.config().clone();
    let mut out = train_from(base.params.clone(), &cfg, samples, validation)?;
    let digest = base.digest();
    for c in [&mut out.best, &mut out.last] {
        c.meta.insert("base_checkpoint".into(), digest.clone());
        c.meta.insert("fine_tune".into(), "true".into());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{nth_net, SynthConfig};
    use crate::oracle::{label_sample, ExactBudget};

    fn samples(n: usize, seed: u64) -> Vec<TrainingSample> {
        let cfg = SynthConfig::uniform(4..=6);
        (0..n as u64)
            .map(|i| {
                let net = nth_net(seed, i, &cfg).unwrap();
                let l = label_sample(&net, ExactBudget::default()).unwrap();
                TrainingSample { net, labels: l.labels.labels, wl_opt: l.labels.wl_opt, provenance: l.labels.provenance }
            })
            .collect()
    }

    fn tiny(steps: usize) -> TrainConfig {
        TrainConfig {
            model: ModelConfig { layers: 1, hidden: 8, mlp_hidden: 8, seed: 3, ..Default::default() },
            adam: AdamConfig { lr: 1e-3, ..Default::default() },
            steps,
            batch_size: 6,
            val_every: 5,
            ..Default::default()
        }
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_alone() {
        let data = samples(20, 1);
        let mut cfg = tiny(6);
        cfg.adam.lr = 0.0;
        let out = train(&cfg, &data, &data[..5]).unwrap();
        let init = ModelParams::<f32>::init(&cfg.model).unwrap();
        assert_eq!(out.last.params, init);
        assert_eq!(out.best.params, init);
    }

    #[test]
    fn runs_are_reproducible_and_independent_of_sharding() {
        let data = samples(20, 2);
        let a = train(&tiny(8), &data, &data[..5]).unwrap();
        let b = train(&tiny(8), &data, &data[..5]).unwrap();
        assert_eq!(metrics_csv(&a.metrics, false), metrics_csv(&b.metrics, false));
        assert_eq!(a.last.params, b.last.params);

        let mut whole = tiny(8);
        whole.shard_size = 6;
        let c = train(&whole, &data, &data[..5]).unwrap();
        let (pa, pc) = (a.last.params.flat(), c.last.params.flat());
        assert!(pa.iter().zip(&pc).all(|(x, y)| (x - y).abs() < 1e-5));
    }

    #[test]
    fn metrics_rows_carry_validation_on_schedule() {
        let data = samples(12, 3);
        let out = train(&tiny(12), &data, &data[..4]).unwrap();
        assert_eq!(out.metrics.len(), 12);
        let validated: Vec<usize> = out.metrics.iter().filter(|r| r.validation.is_some()).map(|r| r.step).collect();
        assert_eq!(validated, vec![5, 10, 12]);
        let csv = metrics_csv(&out.metrics, true);
        assert!(csv.starts_with("step,loss,val_precision,val_recall,val_wl_error_pct,wallclock_ms\n"));
    }

    #[test]
    fn fine_tune_zero_steps_is_identity() {
        let base = Checkpoint::new(ModelParams::init(&tiny(0).model).unwrap());
        let out = fine_tune(&base, None, &tiny(0), &[], &[]).unwrap();
        assert_eq!(out.best.to_bytes(), base.to_bytes());
    }

    #[test]
    fn fine_tune_rejects_other_architectures() {
        let base = Checkpoint::new(ModelParams::init(&tiny(0).model).unwrap());
        let other = ModelConfig { layers: 2, ..tiny(0).model };
        let data = samples(4, 4);
        match fine_tune(&base, Some(&other), &tiny(3), &data, &[]) {
            Err(Error::ArchitectureMismatch(_)) => {}
            r => panic!("{r:?}"),
        }
    }

    #[test]
    fn fine_tune_records_its_base() {
        let data = samples(8, 5);
        let base = Checkpoint::new(ModelParams::init(&tiny(0).model).unwrap());
        let out = fine_tune(&base, Some(&tiny(0).model), &tiny(2), &data, &[]).unwrap();
        assert_eq!(out.best.meta["base_checkpoint"], base.digest());
        assert_ne!(out.best.params, base.params);
    }

    #[test]
    fn cosine_schedule_ends_at_floor() {
        let cfg = TrainConfig { steps: 11, cosine_decay: true, final_lr_ratio: 0.1, ..Default::default() };
        assert!((cfg.lr_at(0) - cfg.adam.lr).abs() < 1e-15);
        assert!((cfg.lr_at(10) - 0.1 * cfg.adam.lr).abs() < 1e-15);
        assert!(cfg.lr_at(5) < cfg.lr_at(4));
    }
}
