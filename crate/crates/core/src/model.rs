//! The classifier: embedding layer with Gaussian noise and dropout, a
//! bidirectional LSTM encoder, self-attention (last-state, plain, or
//! context-conditioned), and a softmax output layer.

use std::path::Path;

use emopred_tensor::{Mode, ParamId, ParamSet, SeedStream, Tape, Tensor, TensorRef};
use serde::{Deserialize, Serialize};

use crate::embeddings::{EmbeddingMatrix, Vocabulary};
use crate::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionVariant {
    /// Final hidden state only, no learned attention.
    LastState,
    /// Scores from the hidden state alone.
    Plain,
    /// Scores from the hidden state concatenated with the mean-state
    /// context vector.
    Context,
}

impl std::str::FromStr for AttentionVariant {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "last_state" => Ok(Self::LastState),
            "plain" => Ok(Self::Plain),
            "context" => Ok(Self::Context),
            other => Err(CoreError::InvalidConfig(format!(
                "unknown attention variant {:?}",
                other
            ))),
        }
    }
}

impl std::fmt::Display for AttentionVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Self::LastState => "last_state",
            Self::Plain => "plain",
            Self::Context => "context",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub hidden_size: usize,
    pub num_classes: usize,
    pub attention: AttentionVariant,
    pub noise_sigma: f64,
    pub dropout_embed: f64,
    pub dropout_rnn: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embed_dim: 300,
            hidden_size: 300,
            num_classes: 20,
            attention: AttentionVariant::Context,
            noise_sigma: 0.05,
            dropout_embed: 0.1,
            dropout_rnn: 0.3,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let dropouts_ok =
            (0.0..1.0).contains(&self.dropout_embed) && (0.0..1.0).contains(&self.dropout_rnn);
        if self.embed_dim < 1
            || self.hidden_size < 1
            || self.num_classes < 1
            || !dropouts_ok
            || self.noise_sigma < 0.0
        {
            return Err(CoreError::InvalidConfig(format!(
                "bad model config {:?}",
                self
            )));
        }
        Ok(())
    }

    /// Width of the attention scorer input: 2L, doubled again when the
    /// context vector is concatenated.
    pub fn attention_input_dim(&self) -> usize {
        match self.attention {
            AttentionVariant::Context => 4 * self.hidden_size,
            _ => 2 * self.hidden_size,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct GateIds {
    w_input: ParamId,
    b_input: ParamId,
    w_forget: ParamId,
    b_forget: ParamId,
    w_cell: ParamId,
    b_cell: ParamId,
    w_output: ParamId,
    b_output: ParamId,
}

#[derive(Debug, Clone, Copy)]
struct ParamIds {
    embedding: ParamId,
    forward: GateIds,
    backward: GateIds,
    attn_w: ParamId,
    attn_b: ParamId,
    out_w: ParamId,
    out_b: ParamId,
}

/// All trainable weights plus the configuration that shapes them.
#[derive(Debug, Clone)]
pub struct ModelParams {
    config: ModelConfig,
    set: ParamSet,
    ids: ParamIds,
}

fn glorot(shape: [usize; 2], rng: &mut SeedStream) -> Tensor {
    let bound = (6.0 / (shape[0] + shape[1]) as f64).sqrt();
    Tensor::uniform(vec![shape[0], shape[1]], -bound, bound, rng)
}

const GATE_NAMES: [&str; 4] = ["input", "forget", "cell", "output"];

impl ModelParams {
    /// Fresh parameters: Glorot-uniform gate/attention/output weights, zero
    /// biases except the forget bias at 1, uniform embedding rows.
    pub fn init(config: ModelConfig, vocab_size: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = SeedStream::new(seed);
        let bound = 0.5 / config.embed_dim as f64;
        let embedding =
            Tensor::uniform(vec![vocab_size, config.embed_dim], -bound, bound, &mut rng);
        Self::build(config, embedding, &mut rng)
    }

    /// Initialize the embedding layer from pretrained vectors.
    pub fn init_with_embeddings(
        config: ModelConfig,
        pretrained: &EmbeddingMatrix,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        if pretrained.dimension != config.embed_dim {
            return Err(CoreError::DimensionMismatch {
                expected: config.embed_dim,
                got: pretrained.dimension,
            });
        }
        let mut rng = SeedStream::new(seed);
        let embedding = Tensor::new(
            vec![pretrained.rows(), config.embed_dim],
            pretrained.input_vectors().to_vec(),
        )
        .map_err(CoreError::from)?;
        Self::build(config, embedding, &mut rng)
    }

    fn build(config: ModelConfig, embedding: Tensor, rng: &mut SeedStream) -> Result<Self> {
        let (w, l) = (config.embed_dim, config.hidden_size);
        let mut set = ParamSet::new();
        let embedding = set.add("embedding", embedding);

        let gates = |set: &mut ParamSet, rng: &mut SeedStream, prefix: &str| {
            let mut ids = Vec::with_capacity(8);
            for gate in GATE_NAMES {
                let wt = set.add(format!("{prefix}.w_{gate}"), glorot([l, w + l], rng));
                let bias = if gate == "forget" {
                    Tensor::filled(vec![l], 1.0)
                } else {
                    Tensor::zeros(vec![l])
                };
                let bt = set.add(format!("{prefix}.b_{gate}"), bias);
                ids.push((wt, bt));
            }
            GateIds {
                w_input: ids[0].0,
                b_input: ids[0].1,
                w_forget: ids[1].0,
                b_forget: ids[1].1,
                w_cell: ids[2].0,
                b_cell: ids[2].1,
                w_output: ids[3].0,
                b_output: ids[3].1,
            }
        };
        let forward = gates(&mut set, rng, "lstm_fwd");
        let backward = gates(&mut set, rng, "lstm_bwd");

        let attn_in = config.attention_input_dim();
        let attn_w = set.add("attention.w", glorot([1, attn_in], rng));
        let attn_b = set.add("attention.b", Tensor::zeros(vec![1]));
        let out_w = set.add("output.w", glorot([config.num_classes, 2 * l], rng));
        let out_b = set.add("output.b", Tensor::zeros(vec![config.num_classes]));

        let ids = ParamIds {
            embedding,
            forward,
            backward,
            attn_w,
            attn_b,
            out_w,
            out_b,
        };
        Ok(Self { config, set, ids })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn set(&self) -> &ParamSet {
        &self.set
    }

    pub fn set_mut(&mut self) -> &mut ParamSet {
        &mut self.set
    }

    pub fn vocab_size(&self) -> usize {
        self.set.get(self.ids.embedding).shape()[0]
    }

    /// Register every parameter on a tape once; the returned refs are shared
    /// by all sequences of the batch so gradients accumulate.
    pub fn bind(&self, tape: &mut Tape) -> TapeBinding {
        let p = |tape: &mut Tape, id: ParamId| tape.param(id, self.set.get(id));
        let bind_gates = |tape: &mut Tape, g: &GateIds| GateRefs {
            w_input: p(tape, g.w_input),
            b_input: p(tape, g.b_input),
            w_forget: p(tape, g.w_forget),
            b_forget: p(tape, g.b_forget),
            w_cell: p(tape, g.w_cell),
            b_cell: p(tape, g.b_cell),
            w_output: p(tape, g.w_output),
            b_output: p(tape, g.b_output),
        };
        TapeBinding {
            embedding: p(tape, self.ids.embedding),
            forward: bind_gates(tape, &self.ids.forward),
            backward: bind_gates(tape, &self.ids.backward),
            attn_w: p(tape, self.ids.attn_w),
            attn_b: p(tape, self.ids.attn_b),
            out_w: p(tape, self.ids.out_w),
            out_b: p(tape, self.ids.out_b),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GateRefs {
    w_input: TensorRef,
    b_input: TensorRef,
    w_forget: TensorRef,
    b_forget: TensorRef,
    w_cell: TensorRef,
    b_cell: TensorRef,
    w_output: TensorRef,
    b_output: TensorRef,
}

#[derive(Debug, Clone, Copy)]
pub struct TapeBinding {
    pub embedding: TensorRef,
    pub forward: GateRefs,
    pub backward: GateRefs,
    pub attn_w: TensorRef,
    pub attn_b: TensorRef,
    pub out_w: TensorRef,
    pub out_b: TensorRef,
}

/// One LSTM cell update:
/// i = s(W_i [x;h] + b_i), f = s(W_f [x;h] + b_f), g = tanh(W_g [x;h] + b_g),
/// o = s(W_o [x;h] + b_o), c = f * c_prev + i * g, h = o * tanh(c).
pub fn lstm_step(
    tape: &mut Tape,
    x: TensorRef,
    h_prev: TensorRef,
    c_prev: TensorRef,
    gates: &GateRefs,
) -> Result<(TensorRef, TensorRef)> {
    let xh = tape.concat(&[x, h_prev])?;
    let gate = |tape: &mut Tape, w, b| -> Result<TensorRef> {
        let z = tape.matvec(w, xh)?;
        Ok(tape.add(z, b)?)
    };
    let i_pre = gate(tape, gates.w_input, gates.b_input)?;
    let f_pre = gate(tape, gates.w_forget, gates.b_forget)?;
    let g_pre = gate(tape, gates.w_cell, gates.b_cell)?;
    let o_pre = gate(tape, gates.w_output, gates.b_output)?;
    let i = tape.sigmoid(i_pre)?;
    let f = tape.sigmoid(f_pre)?;
    let g = tape.tanh(g_pre)?;
    let o = tape.sigmoid(o_pre)?;
    let fc = tape.mul(f, c_prev)?;
    let ig = tape.mul(i, g)?;
    let c = tape.add(fc, ig)?;
    let tc = tape.tanh(c)?;
    let h = tape.mul(o, tc)?;
    Ok((h, c))
}

/// Per-position annotations `h_i = forward_h_i || backward_h_i` over the
/// given embedded rows (padding is excluded by slicing before this call).
pub fn bilstm_encode(
    tape: &mut Tape,
    embedded: &[TensorRef],
    binding: &TapeBinding,
    hidden_size: usize,
) -> Result<Vec<TensorRef>> {
    if embedded.is_empty() {
        return Err(CoreError::EmptySequence);
    }
    let zero = Tensor::zeros(vec![hidden_size]);
    let run = |tape: &mut Tape, gates: &GateRefs, order: &[usize]| -> Result<Vec<TensorRef>> {
        let mut h = tape.constant(&zero);
        let mut c = tape.constant(&zero);
        let mut states = vec![h; order.len()];
        for &i in order {
            let (nh, nc) = lstm_step(tape, embedded[i], h, c, gates)?;
            h = nh;
            c = nc;
            states[i] = nh;
        }
        Ok(states)
    };
    let n = embedded.len();
    let fwd_order: Vec<usize> = (0..n).collect();
    let bwd_order: Vec<usize> = (0..n).rev().collect();
    let fwd = run(tape, &binding.forward, &fwd_order)?;
    let bwd = run(tape, &binding.backward, &bwd_order)?;
    fwd.into_iter()
        .zip(bwd)
        .map(|(f, b)| tape.concat(&[f, b]).map_err(CoreError::from))
        .collect()
}

/// Attention internals captured for introspection and reports.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionRecord {
    pub hidden_states: Vec<Vec<f64>>,
    pub context: Option<Vec<f64>>,
    pub scores: Vec<f64>,
    pub weights: Vec<f64>,
    pub representation: Vec<f64>,
}

struct AttendOut {
    representation: TensorRef,
    weights: TensorRef,
    context: Option<TensorRef>,
    scores: Vec<f64>,
}

/// Pool hidden states into a representation. Softmax variants score each
/// position with a scalar `tanh(W u_i + b)`; `last_state` is a one-hot pick
/// of the final position.
fn attend(
    tape: &mut Tape,
    h_refs: &[TensorRef],
    variant: AttentionVariant,
    binding: &TapeBinding,
) -> Result<AttendOut> {
    if h_refs.is_empty() {
        return Err(CoreError::EmptySequence);
    }
    let n = h_refs.len();
    let states = tape.stack_rows(h_refs)?;
    match variant {
        AttentionVariant::LastState => {
            let mut one_hot = vec![0.0; n];
            one_hot[n - 1] = 1.0;
            let weights = tape.constant(&Tensor::from_vec(one_hot));
            let representation = tape.vecmat(weights, states)?;
            Ok(AttendOut {
                representation,
                weights,
                context: None,
                scores: vec![0.0; n],
            })
        }
        AttentionVariant::Plain | AttentionVariant::Context => {
            let context = match variant {
                AttentionVariant::Context => Some(tape.mean_rows(states)?),
                _ => None,
            };
            let mut score_refs = Vec::with_capacity(n);
            for &h in h_refs {
                let u = match context {
                    Some(c) => tape.concat(&[h, c])?,
                    None => h,
                };
                let z = tape.matvec(binding.attn_w, u)?;
                let z = tape.add(z, binding.attn_b)?;
                score_refs.push(tape.tanh(z)?);
            }
            let scores_vec = tape.concat(&score_refs)?;
            let weights = tape.softmax(scores_vec, 0)?;
            let representation = tape.vecmat(weights, states)?;
            Ok(AttendOut {
                representation,
                weights,
                context,
                scores: tape.value(scores_vec).data().to_vec(),
            })
        }
    }
}

/// Class probabilities with the attention trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probs: Vec<f64>,
    pub predicted: usize,
    pub attention: AttentionRecord,
}

/// Full pipeline on an existing tape: embedding lookup -> Gaussian noise ->
/// dropout -> BiLSTM -> dropout -> attention -> linear -> softmax.
/// Returns the probability node so a loss can be attached.
pub fn forward_on_tape(
    tape: &mut Tape,
    binding: &TapeBinding,
    params: &ModelParams,
    token_ids: &[usize],
    mode: Mode,
    rng: &mut SeedStream,
) -> Result<(TensorRef, AttentionRecord)> {
    let cfg = params.config();
    if token_ids.is_empty() {
        return Err(CoreError::EmptySequence);
    }
    let vocab_size = params.vocab_size();
    if let Some(&bad) = token_ids.iter().find(|&&id| id >= vocab_size) {
        return Err(CoreError::TokenIdOutOfRange {
            id: bad,
            size: vocab_size,
        });
    }

    let embedded = tape.embedding_lookup(binding.embedding, token_ids)?;
    let embedded = tape.gaussian_noise(embedded, cfg.noise_sigma, mode, rng)?;
    let embedded = tape.dropout(embedded, cfg.dropout_embed, mode, rng)?;
    let rows: Vec<TensorRef> = (0..token_ids.len())
        .map(|i| tape.row(embedded, i).map_err(CoreError::from))
        .collect::<Result<_>>()?;

    let annotations = bilstm_encode(tape, &rows, binding, cfg.hidden_size)?;
    let annotations: Vec<TensorRef> = annotations
        .into_iter()
        .map(|h| {
            tape.dropout(h, cfg.dropout_rnn, mode, rng)
                .map_err(CoreError::from)
        })
        .collect::<Result<_>>()?;

    let pooled = attend(tape, &annotations, cfg.attention, binding)?;
    let logits = tape.matvec(binding.out_w, pooled.representation)?;
    let logits = tape.add(logits, binding.out_b)?;
    let probs = tape.softmax(logits, 0)?;

    let record = AttentionRecord {
        hidden_states: annotations
            .iter()
            .map(|h| tape.value(*h).data().to_vec())
            .collect(),
        context: pooled.context.map(|c| tape.value(c).data().to_vec()),
        scores: pooled.scores,
        weights: tape.value(pooled.weights).data().to_vec(),
        representation: tape.value(pooled.representation).data().to_vec(),
    };
    Ok((probs, record))
}

fn argmax_lowest(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

/// One-shot classification on a fresh tape.
pub fn classify_forward(
    token_ids: &[usize],
    params: &ModelParams,
    mode: Mode,
    rng: &mut SeedStream,
) -> Result<Prediction> {
    let mut tape = Tape::new();
    let binding = params.bind(&mut tape);
    let (probs_ref, attention) =
        forward_on_tape(&mut tape, &binding, params, token_ids, mode, rng)?;
    let probs = tape.value(probs_ref).data().to_vec();
    Ok(Prediction {
        predicted: argmax_lowest(&probs),
        probs,
        attention,
    })
}

/// Evaluation-mode convenience; regularizers are inert.
pub fn predict(token_ids: &[usize], params: &ModelParams) -> Result<Prediction> {
    let mut rng = SeedStream::new(0);
    classify_forward(token_ids, params, Mode::Eval, &mut rng)
}

/// Classify a padded row, ignoring everything past `valid_len`.
pub fn classify_padded(
    padded_ids: &[usize],
    valid_len: usize,
    params: &ModelParams,
    mode: Mode,
    rng: &mut SeedStream,
) -> Result<Prediction> {
    if valid_len == 0 || valid_len > padded_ids.len() {
        return Err(CoreError::EmptySequence);
    }
    classify_forward(&padded_ids[..valid_len], params, mode, rng)
}

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    config: ModelConfig,
    vocab: Vec<String>,
    tensors: Vec<(String, Tensor)>,
}

/// JSON checkpoint holding config, vocabulary, and all parameters. Floats
/// serialize with shortest round-trip formatting, so save -> load is exact.
pub fn save_checkpoint(
    params: &ModelParams,
    vocab: &Vocabulary,
    path: impl AsRef<Path>,
) -> Result<()> {
    let checkpoint = Checkpoint {
        version: CHECKPOINT_VERSION,
        config: params.config.clone(),
        vocab: vocab.words().to_vec(),
        tensors: params
            .set
            .iter()
            .map(|(_, name, tensor)| (name.to_string(), tensor.clone()))
            .collect(),
    };
    let json = serde_json::to_string(&checkpoint)?;
    std::fs::write(path.as_ref(), json)
        .map_err(|e| CoreError::io(path.as_ref().display().to_string(), e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ModelParams, Vocabulary)> {
    let json = std::fs::read_to_string(path.as_ref())
        .map_err(|e| CoreError::io(path.as_ref().display().to_string(), e))?;
    let checkpoint: Checkpoint = serde_json::from_str(&json)?;
    if checkpoint.version != CHECKPOINT_VERSION {
        return Err(CoreError::InvalidConfig(format!(
            "unsupported checkpoint version {}",
            checkpoint.version
        )));
    }
    let vocab = Vocabulary::from_ordered_words(&checkpoint.vocab);
    let embedding_rows = checkpoint
        .tensors
        .iter()
        .find(|(name, _)| name == "embedding")
        .map(|(_, t)| t.shape()[0])
        .ok_or_else(|| CoreError::InvalidConfig("checkpoint lacks an embedding table".into()))?;
    let mut params = ModelParams::init(checkpoint.config, embedding_rows, 0)?;
    for (name, tensor) in checkpoint.tensors {
        let id = params
            .set
            .find(&name)
            .ok_or_else(|| CoreError::InvalidConfig(format!("unknown parameter {:?}", name)))?;
        if params.set.get(id).shape() != tensor.shape() {
            return Err(CoreError::InvalidConfig(format!(
                "parameter {:?} has shape {:?}, expected {:?}",
                name,
                tensor.shape(),
                params.set.get(id).shape()
            )));
        }
        *params.set.get_mut(id) = tensor.with_grad();
    }
    Ok((params, vocab))
}
