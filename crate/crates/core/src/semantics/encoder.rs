//! Bidirectional recurrent encoder over template element embeddings.
//!
//! Each template element becomes one feature vector (literals via the
//! embedding table, every slot via one shared trainable vector). A forward
//! and a backward long short-term memory pass produce per-position
//! outputs; the template is represented by concatenating the forward
//! output at the last position with the backward output at the first, and
//! each slot by the two outputs at its position.

use ndarray::{s, Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discovery::template::{Element, Template};
use crate::semantics::embedding::EmbeddingTable;
use crate::semantics::{Ktt, LabelSpace, SemanticRule};

/// One recurrent direction's parameters. Gate rows are packed in i, f, g,
/// o order: `wx` is (4h, d), `wh` is (4h, h), `b` is 4h.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub wx: Array2<f64>,
    pub wh: Array2<f64>,
    pub b: Array1<f64>,
}

impl LstmParams {
    fn init(dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut sample = |rows: usize, cols: usize| {
            Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..bound))
        };
        let wx = sample(4 * hidden, dim);
        let wh = sample(4 * hidden, hidden);
        let mut b = Array1::zeros(4 * hidden);
        // Forget-gate bias starts at 1 so early training does not erase
        // state.
        b.slice_mut(s![hidden..2 * hidden]).fill(1.0);
        LstmParams { wx, wh, b }
    }

}

/// Per-sequence forward activations, in processing-step order. Gate
/// activations are packed (T, 4h) in i, f, g, o blocks.
pub(crate) struct LstmTrace {
    pub x: Array2<f64>,
    pub gates: Array2<f64>,
    pub c: Array2<f64>,
    pub tanh_c: Array2<f64>,
    pub h: Array2<f64>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// y += A x over row-major storage, with a four-way unrolled dot so the
/// recurrent product does not bottleneck training.
fn gemv_add(a: &[f64], rows: usize, cols: usize, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(a.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    debug_assert_eq!(y.len(), rows);
    for (r, yr) in y.iter_mut().enumerate() {
        let row = &a[r * cols..(r + 1) * cols];
        let mut acc = [0.0f64; 4];
        let chunks = cols / 4;
        for k in 0..chunks {
            let base = 4 * k;
            acc[0] += row[base] * x[base];
            acc[1] += row[base + 1] * x[base + 1];
            acc[2] += row[base + 2] * x[base + 2];
            acc[3] += row[base + 3] * x[base + 3];
        }
        let mut tail = 0.0;
        for k in 4 * chunks..cols {
            tail += row[k] * x[k];
        }
        *yr += acc[0] + acc[1] + acc[2] + acc[3] + tail;
    }
}

/// y += Aᵀ x without striding: accumulate scaled rows.
fn gemv_t_add(a: &[f64], rows: usize, cols: usize, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(a.len(), rows * cols);
    debug_assert_eq!(x.len(), rows);
    debug_assert_eq!(y.len(), cols);
    for (r, &scale) in x.iter().enumerate() {
        if scale == 0.0 {
            continue;
        }
        let row = &a[r * cols..(r + 1) * cols];
        for (yk, &ak) in y.iter_mut().zip(row) {
            *yk += scale * ak;
        }
    }
}

/// Run one direction over `x` (steps along rows, already in processing
/// order).
pub(crate) fn lstm_forward(params: &LstmParams, x: &Array2<f64>) -> LstmTrace {
    let steps = x.nrows();
    let hidden = params.wh.ncols();
    // Input projections for all steps in one product: (T, d) x (d, 4h),
    // bias folded in.
    let mut gates = x.dot(&params.wx.t());
    let b = params.b.as_slice().unwrap();
    for mut row in gates.rows_mut() {
        let row = row.as_slice_mut().unwrap();
        for (zk, bk) in row.iter_mut().zip(b) {
            *zk += bk;
        }
    }

    let mut c = Array2::<f64>::zeros((steps, hidden));
    let mut tanh_c = Array2::<f64>::zeros((steps, hidden));
    let mut h = Array2::<f64>::zeros((steps, hidden));
    let wh = params.wh.as_slice().unwrap();
    let mut h_prev = vec![0.0f64; hidden];
    let mut c_prev = vec![0.0f64; hidden];

    for step in 0..steps {
        let z = gates
            .row_mut(step)
            .into_slice()
            .expect("row-major gates");
        if step > 0 {
            gemv_add(wh, 4 * hidden, hidden, &h_prev, z);
        }
        let c_row = c.row_mut(step).into_slice().expect("row-major");
        let tanh_row = tanh_c.row_mut(step).into_slice().expect("row-major");
        let h_row = h.row_mut(step).into_slice().expect("row-major");
        for k in 0..hidden {
            let i = sigmoid(z[k]);
            let f = sigmoid(z[hidden + k]);
            let g = z[2 * hidden + k].tanh();
            let o = sigmoid(z[3 * hidden + k]);
            z[k] = i;
            z[hidden + k] = f;
            z[2 * hidden + k] = g;
            z[3 * hidden + k] = o;
            let cv = f * c_prev[k] + i * g;
            let tv = cv.tanh();
            c_row[k] = cv;
            tanh_row[k] = tv;
            h_row[k] = o * tv;
        }
        h_prev.copy_from_slice(h_row);
        c_prev.copy_from_slice(c_row);
    }
    LstmTrace {
        x: x.clone(),
        gates,
        c,
        tanh_c,
        h,
    }
}

/// Backpropagate through one direction. `dh` carries the upstream
/// gradients on each step's output. Parameter gradients accumulate into
/// `grads`; the return value is the gradient on the inputs, step order.
pub(crate) fn lstm_backward(
    params: &LstmParams,
    trace: &LstmTrace,
    dh: &Array2<f64>,
    grads: &mut LstmParams,
) -> Array2<f64> {
    let steps = trace.h.nrows();
    let hidden = params.wh.ncols();
    let mut dz_all = Array2::<f64>::zeros((steps, 4 * hidden));
    let mut dh_carry = vec![0.0f64; hidden];
    let mut dc_carry = vec![0.0f64; hidden];
    let wh = params.wh.as_slice().unwrap();

    for step in (0..steps).rev() {
        let gates = trace.gates.row(step);
        let gates = gates.as_slice().unwrap();
        let dh_row = dh.row(step);
        let dz = dz_all.row_mut(step).into_slice().expect("row-major");
        for k in 0..hidden {
            let dh_total = dh_row[k] + dh_carry[k];
            let i = gates[k];
            let f = gates[hidden + k];
            let g = gates[2 * hidden + k];
            let o = gates[3 * hidden + k];
            let tanh_c = trace.tanh_c[[step, k]];
            let c_prev = if step == 0 { 0.0 } else { trace.c[[step - 1, k]] };

            let dc = dh_total * o * (1.0 - tanh_c * tanh_c) + dc_carry[k];
            dz[k] = dc * g * i * (1.0 - i);
            dz[hidden + k] = dc * c_prev * f * (1.0 - f);
            dz[2 * hidden + k] = dc * i * (1.0 - g * g);
            dz[3 * hidden + k] = dh_total * tanh_c * o * (1.0 - o);
            dc_carry[k] = dc * f;
        }
        dh_carry.iter_mut().for_each(|v| *v = 0.0);
        gemv_t_add(wh, 4 * hidden, hidden, dz, &mut dh_carry);
    }

    // Batched parameter gradients: dz rows against inputs / previous
    // hidden states.
    grads.wx += &dz_all.t().dot(&trace.x);
    let mut h_prev_all = Array2::<f64>::zeros((steps, hidden));
    if steps > 1 {
        h_prev_all
            .slice_mut(s![1.., ..])
            .assign(&trace.h.slice(s![..steps - 1, ..]));
    }
    grads.wh += &dz_all.t().dot(&h_prev_all);
    grads.b += &dz_all.sum_axis(Axis(0));

    dz_all.dot(&params.wx)
}

/// Outputs of one bidirectional encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    /// Forward output at the last position joined with backward output at
    /// the first: dimension 2h.
    pub template_vector: Array1<f64>,
    /// One 2h vector per slot, in slot order.
    pub slot_vectors: Vec<Array1<f64>>,
}

/// The trained rule predictor: frozen embedding table, trainable slot
/// embedding, two recurrent directions and two sigmoid head groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderModel {
    pub dim: usize,
    pub hidden: usize,
    pub label_space: LabelSpace,
    pub embedding: EmbeddingTable,
    pub slot_embedding: Array1<f64>,
    pub fwd: LstmParams,
    pub bwd: LstmParams,
    /// Template head over zero-parameter labels: (n_zero, 2h).
    pub w_zero: Array2<f64>,
    pub b_zero: Array1<f64>,
    /// Parameter head over one-parameter labels: (n_one, 2h).
    pub w_one: Array2<f64>,
    pub b_one: Array1<f64>,
}

pub const DEFAULT_HIDDEN: usize = 200;

impl EncoderModel {
    pub fn init(embedding: EmbeddingTable, label_space: LabelSpace, hidden: usize, seed: u64) -> Self {
        let dim = embedding.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (hidden as f64).sqrt();
        let fwd = LstmParams::init(dim, hidden, &mut rng);
        let bwd = LstmParams::init(dim, hidden, &mut rng);
        let w_zero = Array2::from_shape_fn((label_space.n_zero(), 2 * hidden), |_| {
            rng.gen_range(-bound..bound)
        });
        let w_one = Array2::from_shape_fn((label_space.n_one(), 2 * hidden), |_| {
            rng.gen_range(-bound..bound)
        });
        let dim_bound = 1.0 / (dim as f64).sqrt();
        let slot_embedding = Array1::from_shape_fn(dim, |_| rng.gen_range(-dim_bound..dim_bound));
        let b_zero = Array1::zeros(label_space.n_zero());
        let b_one = Array1::zeros(label_space.n_one());
        EncoderModel {
            dim,
            hidden,
            label_space,
            embedding,
            slot_embedding,
            fwd,
            bwd,
            w_zero,
            b_zero,
            w_one,
            b_one,
        }
    }

    /// Element positions that are slots, in slot-index order.
    pub fn slot_positions(template: &Template) -> Vec<usize> {
        template
            .elements
            .iter()
            .enumerate()
            .filter_map(|(p, el)| el.is_slot().then_some(p))
            .collect()
    }

    pub fn encode_template(&self, template: &Template) -> Encoded {
        let features = featurize(template, &self.embedding, &self.slot_embedding);
        encode(self, &features, &EncoderModel::slot_positions(template))
    }

    /// Predict a semantic rule for a template: every sigmoid above the
    /// threshold emits its knowledge-triple template.
    pub fn predict_rule(&self, template: &Template, threshold: f64) -> SemanticRule {
        let encoded = self.encode_template(template);
        let mut ktts = Vec::new();
        let z = self.w_zero.dot(&encoded.template_vector) + &self.b_zero;
        for (j, (relation, value)) in self.label_space.zero_param.iter().enumerate() {
            if sigmoid(z[j]) > threshold {
                ktts.push(Ktt::fixed(*relation, value.clone()));
            }
        }
        for (slot_idx, slot_vec) in encoded.slot_vectors.iter().enumerate() {
            let z = self.w_one.dot(slot_vec) + &self.b_one;
            for (j, relation) in self.label_space.one_param.iter().enumerate() {
                if sigmoid(z[j]) > threshold {
                    ktts.push(Ktt::from_slot(*relation, slot_idx as u32 + 1));
                }
            }
        }
        SemanticRule::new(template.template_id, ktts).expect("predicted rules are well-formed")
    }

    pub fn save(&self, path: &std::path::Path) -> crate::error::Result<()> {
        let text = serde_json::to_string(self).expect("model serializes");
        std::fs::write(path, text).map_err(|e| crate::error::Error::io(path, e))
    }

    pub fn load(path: &std::path::Path) -> crate::error::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| crate::error::Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| crate::error::Error::parse(path, 1, e.to_string()))
    }
}

/// One feature vector per template element: literals via the table (with
/// subword fallback), slots via the shared slot embedding.
pub fn featurize(
    template: &Template,
    table: &EmbeddingTable,
    slot_embedding: &Array1<f64>,
) -> Array2<f64> {
    let mut x = Array2::zeros((template.elements.len(), table.dim()));
    for (row, el) in template.elements.iter().enumerate() {
        match el {
            Element::Literal(tok) => x.row_mut(row).assign(&table.lookup(tok)),
            Element::Slot(_) => x.row_mut(row).assign(slot_embedding),
        }
    }
    x
}

fn reverse_rows(x: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(x.raw_dim());
    let n = x.nrows();
    for r in 0..n {
        out.row_mut(r).assign(&x.row(n - 1 - r));
    }
    out
}

/// Run both directions and assemble the template and slot vectors.
pub fn encode(model: &EncoderModel, features: &Array2<f64>, slot_positions: &[usize]) -> Encoded {
    let steps = features.nrows();
    assert!(steps > 0, "cannot encode an empty template");
    let fwd = lstm_forward(&model.fwd, features);
    let bwd = lstm_forward(&model.bwd, &reverse_rows(features));
    let h = model.hidden;

    let concat_at = |pos: usize| -> Array1<f64> {
        let mut v = Array1::zeros(2 * h);
        v.slice_mut(s![..h]).assign(&fwd.h.row(pos));
        // Backward step for original position p is steps-1-p.
        v.slice_mut(s![h..]).assign(&bwd.h.row(steps - 1 - pos));
        v
    };

    let mut template_vector = Array1::zeros(2 * h);
    template_vector.slice_mut(s![..h]).assign(&fwd.h.row(steps - 1));
    template_vector.slice_mut(s![h..]).assign(&bwd.h.row(steps - 1));

    Encoded {
        template_vector,
        slot_vectors: slot_positions.iter().map(|&p| concat_at(p)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discovery::template::template_from_pattern;

    fn model(hidden: usize, dim: usize) -> EncoderModel {
        EncoderModel::init(
            EmbeddingTable::fallback_only(dim),
            LabelSpace::default(),
            hidden,
            7,
        )
    }

    #[test]
    fn output_shapes() {
        let m = model(5, 8);
        for pattern in [
            "Your order {} has been shipped !",
            "Hi {} , your order {} has been shipped !",
            "Plain words only here now",
        ] {
            let t = template_from_pattern("shop", pattern).unwrap();
            let encoded = m.encode_template(&t);
            assert_eq!(encoded.template_vector.len(), 10);
            assert_eq!(encoded.slot_vectors.len(), t.n_slots as usize);
            for v in &encoded.slot_vectors {
                assert_eq!(v.len(), 10);
            }
        }
    }

    #[test]
    fn length_one_template_concatenates_both_directions_of_single_position() {
        let m = model(4, 6);
        let t = template_from_pattern("app", "Hello").unwrap();
        let features = featurize(&t, &m.embedding, &m.slot_embedding);
        let fwd = lstm_forward(&m.fwd, &features);
        let bwd = lstm_forward(&m.bwd, &reverse_rows(&features));
        let encoded = m.encode_template(&t);
        assert_eq!(encoded.template_vector.slice(s![..4]), fwd.h.row(0));
        assert_eq!(encoded.template_vector.slice(s![4..]), bwd.h.row(0));
    }

    #[test]
    fn zeroed_parameters_give_zero_response_at_every_position() {
        // With all weights and biases zero: i = f = o = 1/2, g = 0, so the
        // cell state stays 0 and every output is 0 regardless of input.
        let mut m = model(3, 4);
        for p in [&mut m.fwd, &mut m.bwd] {
            p.wx.fill(0.0);
            p.wh.fill(0.0);
            p.b.fill(0.0);
        }
        let t = template_from_pattern("app", "Your order {} has been shipped").unwrap();
        let features = featurize(&t, &m.embedding, &m.slot_embedding);
        let trace = lstm_forward(&m.fwd, &features);
        let hidden = 3;
        for step in 0..features.nrows() {
            for k in 0..hidden {
                assert_eq!(trace.h[[step, k]], 0.0);
                assert_eq!(trace.c[[step, k]], 0.0);
                let i = trace.gates[[step, k]];
                let f = trace.gates[[step, hidden + k]];
                assert!((i - 0.5).abs() < 1e-15);
                assert!((f - 0.5).abs() < 1e-15);
            }
        }
        let encoded = m.encode_template(&t);
        assert!(encoded.template_vector.iter().all(|v| *v == 0.0));
        assert!(encoded.slot_vectors[0].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn featurize_maps_slots_to_shared_vector_and_repeats_tokens() {
        let m = model(3, 12);
        let t = template_from_pattern("app", "order {} order {}").unwrap();
        let x = featurize(&t, &m.embedding, &m.slot_embedding);
        assert_eq!(x.row(0), x.row(2)); // same token, same vector
        assert_eq!(x.row(1), x.row(3)); // both slots share the embedding
        assert_eq!(x.row(1), m.slot_embedding.view());
        // Near-identical unknown words still get distinct vectors.
        let a = m.embedding.lookup("warehoused");
        let b = m.embedding.lookup("warehousee");
        assert_ne!(a, b);
    }

    #[test]
    fn init_is_seed_deterministic() {
        let a = model(4, 6);
        let b = model(4, 6);
        assert_eq!(a, b);
    }
}
