//! Training of the rule predictor: summed binary cross-entropy over both
//! head groups, adaptive moment estimation with per-epoch learning-rate
//! decay, and early stopping on a held-out split.

use ndarray::{s, Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::semantics::embedding::EmbeddingTable;
use crate::semantics::encoder::{
    encode, lstm_backward, lstm_forward, EncoderModel, LstmParams,
};
use crate::semantics::{LabelSpace, LabeledTemplate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Fraction of examples held out for early stopping; 0 disables it.
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: crate::semantics::encoder::DEFAULT_HIDDEN,
            learning_rate: 1e-3,
            lr_decay: 0.9,
            max_epochs: 15,
            patience: 3,
            val_fraction: 0.2,
            seed: 0,
        }
    }
}

/// A training example with frozen literal features. Slot rows are
/// re-assembled from the current slot embedding on every pass, since that
/// embedding is the one trainable piece of the feature layer.
struct Example {
    /// (row, frozen vector) for literal positions.
    frozen_rows: Vec<(usize, Array1<f64>)>,
    slot_positions: Vec<usize>,
    n_elements: usize,
    zero_targets: Vec<f64>,
    /// Per slot, in slot order.
    one_targets: Vec<Vec<f64>>,
}

impl Example {
    fn build(labeled: &LabeledTemplate, space: &LabelSpace, table: &EmbeddingTable) -> Example {
        let template = &labeled.template;
        let mut frozen_rows = Vec::new();
        let mut slot_positions = Vec::new();
        for (row, el) in template.elements.iter().enumerate() {
            match el {
                crate::discovery::template::Element::Literal(tok) => {
                    frozen_rows.push((row, table.lookup(tok)));
                }
                crate::discovery::template::Element::Slot(_) => slot_positions.push(row),
            }
        }
        let one_targets = (1..=template.n_slots)
            .map(|slot| space.one_targets(&labeled.rule, slot))
            .collect();
        Example {
            frozen_rows,
            slot_positions,
            n_elements: template.elements.len(),
            zero_targets: space.zero_targets(&labeled.rule),
            one_targets,
        }
    }

    fn features(&self, dim: usize, slot_embedding: &Array1<f64>) -> Array2<f64> {
        let mut x = Array2::zeros((self.n_elements, dim));
        for (row, v) in &self.frozen_rows {
            x.row_mut(*row).assign(v);
        }
        for &row in &self.slot_positions {
            x.row_mut(row).assign(slot_embedding);
        }
        x
    }
}

/// All parameter gradients, shaped like the model.
pub struct Gradients {
    pub slot_embedding: Array1<f64>,
    pub fwd: LstmParams,
    pub bwd: LstmParams,
    pub w_zero: Array2<f64>,
    pub b_zero: Array1<f64>,
    pub w_one: Array2<f64>,
    pub b_one: Array1<f64>,
}

impl Gradients {
    pub fn zeros_like(model: &EncoderModel) -> Gradients {
        Gradients {
            slot_embedding: Array1::zeros(model.slot_embedding.raw_dim()),
            fwd: zeros_like_params(&model.fwd),
            bwd: zeros_like_params(&model.bwd),
            w_zero: Array2::zeros(model.w_zero.raw_dim()),
            b_zero: Array1::zeros(model.b_zero.raw_dim()),
            w_one: Array2::zeros(model.w_one.raw_dim()),
            b_one: Array1::zeros(model.b_one.raw_dim()),
        }
    }
}

fn zeros_like_params(p: &LstmParams) -> LstmParams {
    LstmParams {
        wx: Array2::zeros(p.wx.raw_dim()),
        wh: Array2::zeros(p.wh.raw_dim()),
        b: Array1::zeros(p.b.raw_dim()),
    }
}

/// Stable binary cross-entropy from a logit.
fn bce_from_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Named flat views over every parameter tensor, fixed order.
pub fn param_slices_mut(model: &mut EncoderModel) -> Vec<(&'static str, &mut [f64])> {
    vec![
        ("slot_embedding", model.slot_embedding.as_slice_mut().unwrap()),
        ("fwd.wx", model.fwd.wx.as_slice_mut().unwrap()),
        ("fwd.wh", model.fwd.wh.as_slice_mut().unwrap()),
        ("fwd.b", model.fwd.b.as_slice_mut().unwrap()),
        ("bwd.wx", model.bwd.wx.as_slice_mut().unwrap()),
        ("bwd.wh", model.bwd.wh.as_slice_mut().unwrap()),
        ("bwd.b", model.bwd.b.as_slice_mut().unwrap()),
        ("w_zero", model.w_zero.as_slice_mut().unwrap()),
        ("b_zero", model.b_zero.as_slice_mut().unwrap()),
        ("w_one", model.w_one.as_slice_mut().unwrap()),
        ("b_one", model.b_one.as_slice_mut().unwrap()),
    ]
}

/// Flat views over gradients, same order as [`param_slices_mut`].
pub fn grad_slices(grads: &Gradients) -> Vec<(&'static str, &[f64])> {
    vec![
        ("slot_embedding", grads.slot_embedding.as_slice().unwrap()),
        ("fwd.wx", grads.fwd.wx.as_slice().unwrap()),
        ("fwd.wh", grads.fwd.wh.as_slice().unwrap()),
        ("fwd.b", grads.fwd.b.as_slice().unwrap()),
        ("bwd.wx", grads.bwd.wx.as_slice().unwrap()),
        ("bwd.wh", grads.bwd.wh.as_slice().unwrap()),
        ("bwd.b", grads.bwd.b.as_slice().unwrap()),
        ("w_zero", grads.w_zero.as_slice().unwrap()),
        ("b_zero", grads.b_zero.as_slice().unwrap()),
        ("w_one", grads.w_one.as_slice().unwrap()),
        ("b_one", grads.b_one.as_slice().unwrap()),
    ]
}

fn reverse_rows(x: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(x.raw_dim());
    let n = x.nrows();
    for r in 0..n {
        out.row_mut(r).assign(&x.row(n - 1 - r));
    }
    out
}

/// Forward and backward pass for one example. Returns the loss; gradients
/// accumulate into `grads`.
fn example_loss_and_grad(model: &EncoderModel, example: &Example, grads: &mut Gradients) -> f64 {
    let steps = example.n_elements;
    let h = model.hidden;
    let x = example.features(model.dim, &model.slot_embedding);
    let x_rev = reverse_rows(&x);
    let fwd = lstm_forward(&model.fwd, &x);
    let bwd = lstm_forward(&model.bwd, &x_rev);

    let mut loss = 0.0;
    let mut dh_fwd = Array2::<f64>::zeros((steps, h));
    let mut dh_bwd = Array2::<f64>::zeros((steps, h));

    // Template head on concat(fwd last, bwd first).
    let mut template_vec = Array1::<f64>::zeros(2 * h);
    template_vec.slice_mut(s![..h]).assign(&fwd.h.row(steps - 1));
    template_vec.slice_mut(s![h..]).assign(&bwd.h.row(steps - 1));
    let z = model.w_zero.dot(&template_vec) + &model.b_zero;
    let mut dz = Array1::<f64>::zeros(z.len());
    for j in 0..z.len() {
        let y = example.zero_targets[j];
        loss += bce_from_logit(z[j], y);
        dz[j] = sigmoid(z[j]) - y;
    }
    let d_template = model.w_zero.t().dot(&dz);
    accumulate_outer(&mut grads.w_zero, &dz, &template_vec);
    grads.b_zero += &dz;
    dh_fwd
        .row_mut(steps - 1)
        .scaled_add(1.0, &d_template.slice(s![..h]));
    dh_bwd
        .row_mut(steps - 1)
        .scaled_add(1.0, &d_template.slice(s![h..]));

    // Parameter head per slot position.
    for (slot_idx, &pos) in example.slot_positions.iter().enumerate() {
        let mut slot_vec = Array1::<f64>::zeros(2 * h);
        slot_vec.slice_mut(s![..h]).assign(&fwd.h.row(pos));
        slot_vec.slice_mut(s![h..]).assign(&bwd.h.row(steps - 1 - pos));
        let z = model.w_one.dot(&slot_vec) + &model.b_one;
        let mut dz = Array1::<f64>::zeros(z.len());
        for j in 0..z.len() {
            let y = example.one_targets[slot_idx][j];
            loss += bce_from_logit(z[j], y);
            dz[j] = sigmoid(z[j]) - y;
        }
        let d_slot = model.w_one.t().dot(&dz);
        accumulate_outer(&mut grads.w_one, &dz, &slot_vec);
        grads.b_one += &dz;
        dh_fwd.row_mut(pos).scaled_add(1.0, &d_slot.slice(s![..h]));
        dh_bwd
            .row_mut(steps - 1 - pos)
            .scaled_add(1.0, &d_slot.slice(s![h..]));
    }

    let dx_fwd = lstm_backward(&model.fwd, &fwd, &dh_fwd, &mut grads.fwd);
    let dx_bwd_rev = lstm_backward(&model.bwd, &bwd, &dh_bwd, &mut grads.bwd);

    // Only slot rows feed a trainable embedding; combine both directions.
    for &pos in &example.slot_positions {
        grads.slot_embedding += &dx_fwd.row(pos);
        grads.slot_embedding += &dx_bwd_rev.row(steps - 1 - pos);
    }

    loss
}

fn accumulate_outer(acc: &mut Array2<f64>, col: &Array1<f64>, row: &Array1<f64>) {
    for (r, &cv) in col.iter().enumerate() {
        let mut acc_row = acc.row_mut(r);
        acc_row.scaled_add(cv, row);
    }
}

fn example_loss(model: &EncoderModel, example: &Example) -> f64 {
    let x = example.features(model.dim, &model.slot_embedding);
    let encoded = encode(model, &x, &example.slot_positions);
    let mut loss = 0.0;
    let z = model.w_zero.dot(&encoded.template_vector) + &model.b_zero;
    for j in 0..z.len() {
        loss += bce_from_logit(z[j], example.zero_targets[j]);
    }
    debug_assert_eq!(encoded.slot_vectors.len(), example.slot_positions.len());
    for (slot_idx, slot_vec) in encoded.slot_vectors.iter().enumerate() {
        let z = model.w_one.dot(slot_vec) + &model.b_one;
        for j in 0..z.len() {
            loss += bce_from_logit(z[j], example.one_targets[slot_idx][j]);
        }
    }
    loss
}

/// Total loss and gradients over a labeled set, without updating the
/// model. This is the function the finite-difference check differentiates.
pub fn loss_and_gradients(
    model: &EncoderModel,
    labeled: &[LabeledTemplate],
) -> (f64, Gradients) {
    let examples: Vec<Example> = labeled
        .iter()
        .map(|l| Example::build(l, &model.label_space, &model.embedding))
        .collect();
    let mut grads = Gradients::zeros_like(model);
    let mut loss = 0.0;
    for ex in &examples {
        loss += example_loss_and_grad(model, ex, &mut grads);
    }
    (loss, grads)
}

/// Total loss over a labeled set.
pub fn total_loss(model: &EncoderModel, labeled: &[LabeledTemplate]) -> f64 {
    labeled
        .iter()
        .map(|l| example_loss(model, &Example::build(l, &model.label_space, &model.embedding)))
        .sum()
}

struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    fn new(lr: f64, shapes: &[usize]) -> Adam {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    fn step(&mut self, params: &mut [(&'static str, &mut [f64])], grads: &[(&'static str, &[f64])]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (idx, ((_, p), (_, g))) in params.iter_mut().zip(grads).enumerate() {
            let m = &mut self.m[idx];
            let v = &mut self.v[idx];
            for k in 0..p.len() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g[k];
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g[k] * g[k];
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                p[k] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

/// Train a model. Deterministic given identical data, config and seed.
pub fn train(
    labeled: &[LabeledTemplate],
    space: &LabelSpace,
    table: EmbeddingTable,
    config: &TrainConfig,
) -> Result<EncoderModel> {
    space.validate()?;
    if labeled.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    for l in labeled {
        if !space.covers(&l.rule) {
            return Err(Error::InvalidInput(format!(
                "rule for template {} uses labels outside the label space",
                l.rule.template_id
            )));
        }
        l.rule.validate_against(&l.template)?;
    }

    let mut model = EncoderModel::init(table, space.clone(), config.hidden, config.seed);
    let examples: Vec<Example> = labeled
        .iter()
        .map(|l| Example::build(l, space, &model.embedding))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_1e55);
    let mut indices: Vec<usize> = (0..examples.len()).collect();
    indices.shuffle(&mut rng);
    let n_val = (config.val_fraction * examples.len() as f64).round() as usize;
    let n_val = if n_val >= examples.len() { 0 } else { n_val };
    let (val_idx, train_idx) = indices.split_at(n_val);
    let val_idx = val_idx.to_vec();
    let mut train_idx = train_idx.to_vec();

    let shapes: Vec<usize> = {
        let mut m = model.clone();
        param_slices_mut(&mut m).iter().map(|(_, s)| s.len()).collect()
    };
    let mut adam = Adam::new(config.learning_rate, &shapes);

    let mut best: Option<(f64, EncoderModel)> = None;
    let mut epochs_since_best = 0usize;

    for _epoch in 0..config.max_epochs {
        train_idx.shuffle(&mut rng);
        for &i in &train_idx {
            let mut grads = Gradients::zeros_like(&model);
            example_loss_and_grad(&model, &examples[i], &mut grads);
            let grad_view = grad_slices(&grads);
            let mut param_view = param_slices_mut(&mut model);
            adam.step(&mut param_view, &grad_view);
        }
        adam.lr *= config.lr_decay;

        if !val_idx.is_empty() {
            let val_loss: f64 = val_idx.iter().map(|&i| example_loss(&model, &examples[i])).sum();
            match &best {
                Some((best_loss, _)) if val_loss >= *best_loss => {
                    epochs_since_best += 1;
                    if epochs_since_best > config.patience {
                        break;
                    }
                }
                _ => {
                    best = Some((val_loss, model.clone()));
                    epochs_since_best = 0;
                }
            }
        }
    }

    if let Some((_, best_model)) = best {
        model = best_model;
    }
    Ok(model)
}
