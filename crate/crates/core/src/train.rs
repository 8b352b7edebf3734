//! Training: inverse-frequency class weights, class-weighted cross-entropy,
//! global gradient-norm clipping, Adam, the mini-batch loop with early
//! stopping, and a seeded random hyper-parameter search.

use emopred_tensor::{Gradients, Mode, ParamSet, SeedStream, Tape, Tensor};
use rand::seq::SliceRandom;

use crate::data::ClassDistribution;
use crate::eval::compute_metrics;
use crate::model::{forward_on_tape, predict, ModelParams};
use crate::{CoreError, Result};

/// Per-class loss weights, mean-normalized to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassWeights {
    pub weights: Vec<f64>,
}

/// Inverse-frequency weights: `w_c` proportional to `1 / freq_c`, scaled so
/// the mean weight is 1 (any positive scaling is training-equivalent up to
/// the learning rate, so one normalization is fixed here).
pub fn class_weights(dist: &ClassDistribution) -> Result<ClassWeights> {
    if let Some(c) = dist.counts.iter().position(|&c| c == 0) {
        return Err(CoreError::ZeroCountClass(c));
    }
    let raw: Vec<f64> = dist.freqs.iter().map(|f| 1.0 / f).collect();
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    Ok(ClassWeights {
        weights: raw.into_iter().map(|w| w / mean).collect(),
    })
}

/// `(1/B) * sum_b w_{y_b} * (-ln p_b[y_b])` over plain probability vectors,
/// with the probability clamped at 1e-12.
pub fn weighted_ce_loss(
    probs: &[Vec<f64>],
    labels: &[usize],
    weights: &ClassWeights,
) -> Result<f64> {
    if probs.len() != labels.len() || probs.is_empty() {
        return Err(CoreError::LengthMismatch {
            left: probs.len(),
            right: labels.len(),
        });
    }
    let mut total = 0.0;
    for (p, &y) in probs.iter().zip(labels) {
        if y >= weights.weights.len() || y >= p.len() {
            return Err(CoreError::LabelOutOfRange {
                label: y as i64,
                num_classes: p.len().min(weights.weights.len()),
                line: 0,
            });
        }
        total += weights.weights[y] * -(p[y].max(1e-12).ln());
    }
    Ok(total / probs.len() as f64)
}

/// Scale all gradients by `max_norm / norm` when the global L2 norm exceeds
/// `max_norm`. Zero gradients pass through untouched.
pub fn clip_grad_norm(grads: &mut [Tensor], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .flat_map(|g| g.data())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            for v in g.data_mut() {
                *v *= scale;
            }
        }
    }
    norm
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub clip_max_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            max_epochs: 50,
            patience: 3,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_max_norm: 1.0,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1
            || self.max_epochs < 1
            || self.learning_rate <= 0.0
            || self.clip_max_norm <= 0.0
            || !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || self.epsilon <= 0.0
        {
            return Err(CoreError::InvalidConfig(format!(
                "bad train config {:?}",
                self
            )));
        }
        Ok(())
    }
}

/// Adam moment estimates, one pair per parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: u64,
}

impl AdamState {
    pub fn new(params: &ParamSet) -> Self {
        let zeros: Vec<Tensor> = params
            .tensors()
            .iter()
            .map(|t| Tensor::zeros(t.shape().to_vec()))
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One Adam update:
/// m <- b1 m + (1-b1) g; v <- b2 v + (1-b2) g^2;
/// p <- p - lr * m_hat / (sqrt(v_hat) + eps) with bias-corrected moments.
pub fn adam_step(
    params: &mut ParamSet,
    grads: &[Tensor],
    state: &mut AdamState,
    cfg: &TrainConfig,
) {
    state.t += 1;
    let t = state.t as f64;
    let bias1 = 1.0 - cfg.beta1.powf(t);
    let bias2 = 1.0 - cfg.beta2.powf(t);
    for ((p, g), (m, v)) in params
        .tensors_mut()
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        let moments = m.data_mut().iter_mut().zip(v.data_mut().iter_mut());
        for ((pv, gv), (mv, vv)) in p.data_mut().iter_mut().zip(g.data()).zip(moments) {
            *mv = cfg.beta1 * *mv + (1.0 - cfg.beta1) * gv;
            *vv = cfg.beta2 * *vv + (1.0 - cfg.beta2) * gv * gv;
            let m_hat = *mv / bias1;
            let v_hat = *vv / bias2;
            *pv -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
}

/// Early-stopping bookkeeping: stop after `patience` consecutive epochs
/// without a strict validation-loss improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    since_best: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            since_best: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> StopDecision {
        if val_loss < self.best {
            self.best = val_loss;
            self.best_epoch = epoch;
            self.since_best = 0;
            StopDecision::Improved
        } else {
            self.since_best += 1;
            if self.since_best >= self.patience {
                StopDecision::Stop
            } else {
                StopDecision::Continue
            }
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }
}

/// Per-epoch trace; `best_epoch` indexes these vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub val_macro_f1: Vec<f64>,
    pub best_epoch: usize,
}

impl TrainHistory {
    /// `epoch TAB train_loss TAB val_loss TAB val_macro_f1` lines.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (e, ((tl, vl), f1)) in self
            .train_loss
            .iter()
            .zip(&self.val_loss)
            .zip(&self.val_macro_f1)
            .enumerate()
        {
            out.push_str(&format!("{}\t{}\t{}\t{}\n", e, tl, vl, f1));
        }
        out
    }
}

/// A labeled, id-encoded sequence dataset.
pub type EncodedExample = (Vec<usize>, usize);

fn evaluate(
    params: &ModelParams,
    examples: &[EncodedExample],
    weights: &ClassWeights,
) -> Result<(f64, f64)> {
    let mut probs = Vec::with_capacity(examples.len());
    let mut preds = Vec::with_capacity(examples.len());
    let mut labels = Vec::with_capacity(examples.len());
    for (ids, label) in examples {
        let p = predict(ids, params)?;
        preds.push(p.predicted);
        probs.push(p.probs);
        labels.push(*label);
    }
    let loss = weighted_ce_loss(&probs, &labels, weights)?;
    let metrics = compute_metrics(&preds, &labels, params.config().num_classes)?;
    Ok((loss, metrics.macro_f1))
}

/// Mini-batch training with Adam, gradient clipping, and early stopping.
/// Returns the parameters from the best validation epoch.
pub fn fit(
    mut params: ModelParams,
    train_set: &[EncodedExample],
    val_set: &[EncodedExample],
    weights: &ClassWeights,
    cfg: &TrainConfig,
) -> Result<(ModelParams, TrainHistory)> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(CoreError::EmptyDataset);
    }
    let mut shuffle_rng = SeedStream::new(cfg.seed);
    let mut reg_rng = SeedStream::new(cfg.seed.wrapping_add(0x5eed));
    let mut adam = AdamState::new(params.set());
    let mut stopper = EarlyStopping::new(cfg.patience.max(1));
    let mut history = TrainHistory {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        val_macro_f1: Vec::new(),
        best_epoch: 0,
    };
    let mut best_params = params.clone();

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let loss = train_batch(
                &mut params,
                train_set,
                batch,
                weights,
                cfg,
                &mut adam,
                &mut reg_rng,
            )?;
            if !loss.is_finite() {
                return Err(CoreError::Diverged(epoch));
            }
            epoch_loss += loss * batch.len() as f64;
            seen += batch.len();
        }
        let train_loss = epoch_loss / seen as f64;
        let (val_loss, val_f1) = evaluate(&params, val_set, weights)?;
        if !val_loss.is_finite() {
            return Err(CoreError::Diverged(epoch));
        }
        history.train_loss.push(train_loss);
        history.val_loss.push(val_loss);
        history.val_macro_f1.push(val_f1);

        match stopper.observe(epoch, val_loss) {
            StopDecision::Improved => {
                best_params = params.clone();
            }
            StopDecision::Continue => {}
            StopDecision::Stop => break,
        }
    }
    history.best_epoch = stopper.best_epoch();
    Ok((best_params, history))
}

fn train_batch(
    params: &mut ModelParams,
    train_set: &[EncodedExample],
    batch: &[usize],
    weights: &ClassWeights,
    cfg: &TrainConfig,
    adam: &mut AdamState,
    reg_rng: &mut SeedStream,
) -> Result<f64> {
    let mut tape = Tape::new();
    let binding = params.bind(&mut tape);
    let mut example_losses = Vec::with_capacity(batch.len());
    for &i in batch {
        let (ids, label) = &train_set[i];
        let (probs, _) = forward_on_tape(&mut tape, &binding, params, ids, Mode::Train, reg_rng)?;
        let picked = tape.pick(probs, *label)?;
        let lnp = tape.ln_clamped(picked)?;
        let weighted = tape.scale(lnp, -weights.weights[*label])?;
        example_losses.push(weighted);
    }
    let total = tape.add_n(&example_losses)?;
    let loss = tape.scale(total, 1.0 / batch.len() as f64)?;
    let loss_value = tape.value(loss).data()[0];

    let grads: Gradients = tape.backward(loss)?;
    let mut dense = grads.dense(params.set());
    clip_grad_norm(&mut dense, cfg.clip_max_norm);
    adam_step(params.set_mut(), &dense, adam, cfg);
    Ok(loss_value)
}

/// Hyper-parameter ranges for the random search; learning rate is sampled
/// log-uniformly, everything else uniformly from its choice list.
#[derive(Debug, Clone)]
pub struct SearchSpace {
    pub learning_rate: (f64, f64),
    pub batch_sizes: Vec<usize>,
    pub hidden_sizes: Vec<usize>,
    pub dropout_embed: Vec<f64>,
    pub dropout_rnn: Vec<f64>,
    pub noise_sigma: Vec<f64>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            learning_rate: (1e-4, 1e-2),
            batch_sizes: vec![16, 32, 64],
            hidden_sizes: vec![100, 200, 300],
            dropout_embed: vec![0.0, 0.1, 0.2],
            dropout_rnn: vec![0.1, 0.3, 0.5],
            noise_sigma: vec![0.0, 0.05, 0.1],
        }
    }
}

/// One sampled configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub hidden_size: usize,
    pub dropout_embed: f64,
    pub dropout_rnn: f64,
    pub noise_sigma: f64,
}

#[derive(Debug, Clone)]
pub struct Trial {
    pub candidate: HyperParams,
    pub objective: f64,
}

impl SearchSpace {
    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.learning_rate;
        if !(lo > 0.0 && hi >= lo)
            || self.batch_sizes.is_empty()
            || self.hidden_sizes.is_empty()
            || self.dropout_embed.is_empty()
            || self.dropout_rnn.is_empty()
            || self.noise_sigma.is_empty()
        {
            return Err(CoreError::InvalidConfig(
                "empty hyper-parameter search space".into(),
            ));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut SeedStream) -> HyperParams {
        let (lo, hi) = self.learning_rate;
        let lr = if lo == hi {
            lo
        } else {
            (rng.uniform(lo.ln(), hi.ln())).exp()
        };
        let pick_usize = |rng: &mut SeedStream, v: &[usize]| v[rng.below(v.len())];
        let pick_f64 = |rng: &mut SeedStream, v: &[f64]| v[rng.below(v.len())];
        HyperParams {
            learning_rate: lr,
            batch_size: pick_usize(rng, &self.batch_sizes),
            hidden_size: pick_usize(rng, &self.hidden_sizes),
            dropout_embed: pick_f64(rng, &self.dropout_embed),
            dropout_rnn: pick_f64(rng, &self.dropout_rnn),
            noise_sigma: pick_f64(rng, &self.noise_sigma),
        }
    }
}

/// Draw exactly `budget` candidates and return the argmin of `objective`
/// (validation loss) together with the full trial log.
pub fn random_search<F>(
    space: &SearchSpace,
    budget: usize,
    seed: u64,
    mut objective: F,
) -> Result<(HyperParams, Vec<Trial>)>
where
    F: FnMut(&HyperParams) -> Result<f64>,
{
    space.validate()?;
    if budget < 1 {
        return Err(CoreError::InvalidConfig(
            "search budget must be at least 1".into(),
        ));
    }
    let mut rng = SeedStream::new(seed);
    let mut trials = Vec::with_capacity(budget);
    let mut best: Option<usize> = None;
    for _ in 0..budget {
        let candidate = space.sample(&mut rng);
        let value = objective(&candidate)?;
        trials.push(Trial {
            candidate,
            objective: value,
        });
        let i = trials.len() - 1;
        if best.is_none_or(|b| trials[i].objective < trials[b].objective) {
            best = Some(i);
        }
    }
    let best = best.expect("budget >= 1");
    Ok((trials[best].candidate.clone(), trials))
}
