//! The full classifier: LSTM → dropout → LSTM → dropout → fully connected
//! → softmax, read out at the last time step.

use alloc::vec::Vec;

use crate::error::Error;
use crate::fmath::{exp, ln, sqrt};
use crate::rng::{stream_rng, ChaCha8Rng};
use crate::seqnet::cell::{
    cell_backward, cell_forward_cached, dropout_mask, CellCache, LstmLayerParams,
};
use crate::seqnet::linalg::{add_scaled, expect_len, Mat};

/// Number of time steps every input sequence must have: the source AR and
/// the most likely destination AR.
pub const SEQ_LEN: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub layer1: LstmLayerParams,
    pub layer2: LstmLayerParams,
    /// hidden × numRes; logits are h·fcWeight + fcBias.
    pub fc_weight: Mat,
    pub fc_bias: Vec<f64>,
    pub drop_rate: f64,
    pub num_res: usize,
    pub input_size: usize,
    pub hidden: usize,
}

impl ModelParams {
    /// Fresh model with uniform ±1/√hidden weights and zero biases except
    /// the forget gates.
    pub fn init(
        input_size: usize,
        hidden: usize,
        num_res: usize,
        drop_rate: f64,
        seed: u64,
    ) -> Result<ModelParams, Error> {
        if input_size == 0 || hidden == 0 || num_res == 0 {
            return Err(Error::InvalidParameter("model dimensions must be positive"));
        }
        if !(0.0..1.0).contains(&drop_rate) {
            return Err(Error::InvalidParameter("drop rate must lie in [0, 1)"));
        }
        let mut rng = stream_rng(seed, "model-init", 0);
        let scale = 1.0 / sqrt(hidden as f64);
        Ok(ModelParams {
            layer1: LstmLayerParams::init(input_size, hidden, &mut rng),
            layer2: LstmLayerParams::init(hidden, hidden, &mut rng),
            fc_weight: Mat::uniform(hidden, num_res, scale, &mut rng),
            fc_bias: alloc::vec![0.0; num_res],
            drop_rate,
            num_res,
            input_size,
            hidden,
        })
    }

    /// Same shapes, all values zero. Doubles as the gradient container.
    pub fn zeros_like(&self) -> ModelParams {
        ModelParams {
            layer1: LstmLayerParams::zeros(self.input_size, self.hidden),
            layer2: LstmLayerParams::zeros(self.hidden, self.hidden),
            fc_weight: Mat::zeros(self.hidden, self.num_res),
            fc_bias: alloc::vec![0.0; self.num_res],
            drop_rate: self.drop_rate,
            num_res: self.num_res,
            input_size: self.input_size,
            hidden: self.hidden,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.layer1.validate()?;
        self.layer2.validate()?;
        self.fc_weight.check_shape(self.hidden, self.num_res)?;
        expect_len(&self.fc_bias, self.num_res)?;
        Ok(())
    }

    /// Every parameter tensor in a fixed order, named for serialization.
    /// Vectors report shape [len, 1].
    pub fn named_tensors(&self) -> Vec<(&'static str, [usize; 2], &Vec<f64>)> {
        let mut out: Vec<(&'static str, [usize; 2], &Vec<f64>)> = Vec::with_capacity(26);
        out.extend(layer_tensors(&LAYER1_NAMES, &self.layer1));
        out.extend(layer_tensors(&LAYER2_NAMES, &self.layer2));
        out.push(("fc.weight", [self.hidden, self.num_res], &self.fc_weight.data));
        out.push(("fc.bias", [self.num_res, 1], &self.fc_bias));
        out
    }

    /// Mutable view over the same tensors in the same order.
    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out: Vec<&mut Vec<f64>> = Vec::with_capacity(26);
        for l in [&mut self.layer1, &mut self.layer2] {
            out.push(&mut l.w_i.data);
            out.push(&mut l.w_f.data);
            out.push(&mut l.w_o.data);
            out.push(&mut l.w_g.data);
            out.push(&mut l.u_i.data);
            out.push(&mut l.u_f.data);
            out.push(&mut l.u_o.data);
            out.push(&mut l.u_g.data);
            out.push(&mut l.b_i);
            out.push(&mut l.b_f);
            out.push(&mut l.b_o);
            out.push(&mut l.b_g);
        }
        out.push(&mut self.fc_weight.data);
        out.push(&mut self.fc_bias);
        out
    }
}

const LAYER1_NAMES: [&str; 12] = [
    "layer1.w_i", "layer1.w_f", "layer1.w_o", "layer1.w_g", "layer1.u_i", "layer1.u_f",
    "layer1.u_o", "layer1.u_g", "layer1.b_i", "layer1.b_f", "layer1.b_o", "layer1.b_g",
];
const LAYER2_NAMES: [&str; 12] = [
    "layer2.w_i", "layer2.w_f", "layer2.w_o", "layer2.w_g", "layer2.u_i", "layer2.u_f",
    "layer2.u_o", "layer2.u_g", "layer2.b_i", "layer2.b_f", "layer2.b_o", "layer2.b_g",
];

fn layer_tensors<'a>(
    names: &'static [&'static str; 12],
    l: &'a LstmLayerParams,
) -> [(&'static str, [usize; 2], &'a Vec<f64>); 12] {
    [
        (names[0], [l.hidden, l.input], &l.w_i.data),
        (names[1], [l.hidden, l.input], &l.w_f.data),
        (names[2], [l.hidden, l.input], &l.w_o.data),
        (names[3], [l.hidden, l.input], &l.w_g.data),
        (names[4], [l.hidden, l.hidden], &l.u_i.data),
        (names[5], [l.hidden, l.hidden], &l.u_f.data),
        (names[6], [l.hidden, l.hidden], &l.u_o.data),
        (names[7], [l.hidden, l.hidden], &l.u_g.data),
        (names[8], [l.hidden, 1], &l.b_i),
        (names[9], [l.hidden, 1], &l.b_f),
        (names[10], [l.hidden, 1], &l.b_o),
        (names[11], [l.hidden, 1], &l.b_g),
    ]
}

/// One training example: a 2-step one-hot sequence and its 1-based label.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<Vec<f64>>,
    pub label: u32,
}

/// Dropout behavior during a forward/backward pass.
pub enum Dropout<'a> {
    Off,
    Seeded(&'a mut ChaCha8Rng),
}

fn check_input(model: &ModelParams, x: &[Vec<f64>]) -> Result<(), Error> {
    if x.len() != SEQ_LEN {
        return Err(Error::ShapeMismatch {
            expected: SEQ_LEN,
            got: x.len(),
        });
    }
    for step in x {
        expect_len(step, model.input_size)?;
    }
    Ok(())
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| exp(v - max)).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|v| v / total).collect()
}

struct SeqCache {
    l1: Vec<CellCache>,
    l2: Vec<CellCache>,
    /// Masks over layer1's per-step outputs feeding layer2.
    mask1: Vec<Vec<f64>>,
    /// Mask over the last top hidden state feeding the readout.
    mask2: Vec<f64>,
    h_read: Vec<f64>,
    probs: Vec<f64>,
}

fn forward_cached(model: &ModelParams, x: &[Vec<f64>], dropout: &mut Dropout) -> SeqCache {
    let hidden = model.hidden;
    let ones = alloc::vec![1.0; hidden];
    let mut draw = |p: f64| -> Vec<f64> {
        match dropout {
            Dropout::Off => ones.clone(),
            Dropout::Seeded(rng) => dropout_mask(hidden, p, rng),
        }
    };
    let mask1: Vec<Vec<f64>> = (0..x.len()).map(|_| draw(model.drop_rate)).collect();
    let mask2 = draw(model.drop_rate);

    let mut l1 = Vec::with_capacity(x.len());
    let mut l2 = Vec::with_capacity(x.len());
    let mut h1 = alloc::vec![0.0; hidden];
    let mut c1 = alloc::vec![0.0; hidden];
    let mut h2 = alloc::vec![0.0; hidden];
    let mut c2 = alloc::vec![0.0; hidden];
    for (t, step) in x.iter().enumerate() {
        let cache1 = cell_forward_cached(&model.layer1, step, &h1, &c1);
        h1 = cache1.h.clone();
        c1 = cache1.c.clone();
        let dropped: Vec<f64> = h1.iter().zip(&mask1[t]).map(|(v, m)| v * m).collect();
        let cache2 = cell_forward_cached(&model.layer2, &dropped, &h2, &c2);
        h2 = cache2.h.clone();
        c2 = cache2.c.clone();
        l1.push(cache1);
        l2.push(cache2);
    }
    let h_read: Vec<f64> = h2.iter().zip(&mask2).map(|(v, m)| v * m).collect();
    let mut logits = model.fc_weight.matvec_t(&h_read);
    add_scaled(&mut logits, &model.fc_bias, 1.0);
    let probs = softmax(&logits);
    SeqCache {
        l1,
        l2,
        mask1,
        mask2,
        h_read,
        probs,
    }
}

/// Class probabilities in inference mode (dropout is the identity).
pub fn forward(model: &ModelParams, x: &[Vec<f64>]) -> Result<Vec<f64>, Error> {
    model.validate()?;
    check_input(model, x)?;
    Ok(forward_cached(model, x, &mut Dropout::Off).probs)
}

/// Argmax class in [1, numRes]; exact ties resolve to the lowest index.
pub fn predict(model: &ModelParams, x: &[Vec<f64>]) -> Result<u32, Error> {
    let probs = forward(model, x)?;
    let mut best = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = k;
        }
    }
    Ok(best as u32 + 1)
}

/// Mean cross-entropy over the batch and gradients for every parameter,
/// via backpropagation through both layers and both time steps. Dropout
/// masks are drawn once per sample and shared by the backward pass.
pub fn loss_and_gradients(
    model: &ModelParams,
    batch: &[Sample],
    mut dropout: Dropout,
) -> Result<(f64, ModelParams), Error> {
    model.validate()?;
    if batch.is_empty() {
        return Err(Error::InvalidParameter("batch must not be empty"));
    }
    let mut grads = model.zeros_like();
    let mut total_loss = 0.0;
    let scale = 1.0 / batch.len() as f64;

    for sample in batch {
        check_input(model, &sample.x)?;
        if sample.label == 0 || sample.label as usize > model.num_res {
            return Err(Error::BadLabel {
                label: sample.label,
                num_classes: model.num_res as u32,
            });
        }
        let cache = forward_cached(model, &sample.x, &mut dropout);
        let label = sample.label as usize - 1;
        total_loss -= ln(cache.probs[label]) * scale;

        // Softmax with cross-entropy: dlogits = p − onehot, scaled to the
        // batch mean.
        let mut dlogits = cache.probs.clone();
        dlogits[label] -= 1.0;
        for v in dlogits.iter_mut() {
            *v *= scale;
        }
        grads.fc_weight.add_outer(&cache.h_read, &dlogits);
        add_scaled(&mut grads.fc_bias, &dlogits, 1.0);
        let dh_read = model.fc_weight.matvec(&dlogits);

        let steps = sample.x.len();
        let mut dh2: Vec<f64> = dh_read
            .iter()
            .zip(&cache.mask2)
            .map(|(v, m)| v * m)
            .collect();
        let mut dc2 = alloc::vec![0.0; model.hidden];
        let mut dh1 = alloc::vec![0.0; model.hidden];
        let mut dc1 = alloc::vec![0.0; model.hidden];
        for t in (0..steps).rev() {
            let (dx2, dh2_prev, dc2_prev) =
                cell_backward(&model.layer2, &cache.l2[t], &dh2, &dc2, &mut grads.layer2);
            // Layer1's step output reaches layer2 through its dropout mask.
            for (acc, (v, m)) in dh1.iter_mut().zip(dx2.iter().zip(&cache.mask1[t])) {
                *acc += v * m;
            }
            let (_, dh1_prev, dc1_prev) =
                cell_backward(&model.layer1, &cache.l1[t], &dh1, &dc1, &mut grads.layer1);
            dh2 = dh2_prev;
            dc2 = dc2_prev;
            dh1 = dh1_prev;
            dc1 = dc1_prev;
        }
    }
    Ok((total_loss, grads))
}

/// Compares analytic gradients against central finite differences over every
/// parameter; returns the worst discrepancy. The denominator floors at 0.01
/// so near-zero gradients are compared absolutely at that scale.
pub fn numeric_gradient_check(
    model: &ModelParams,
    batch: &[Sample],
    step: f64,
) -> Result<f64, Error> {
    let (_, grads) = loss_and_gradients(model, batch, Dropout::Off)?;
    let grad_tensors: Vec<Vec<f64>> = grads
        .named_tensors()
        .into_iter()
        .map(|(_, _, v)| v.clone())
        .collect();
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    let tensor_count = grad_tensors.len();
    for ti in 0..tensor_count {
        for ei in 0..grad_tensors[ti].len() {
            let original = probe.tensors_mut()[ti][ei];
            probe.tensors_mut()[ti][ei] = original + step;
            let (plus, _) = loss_and_gradients(&probe, batch, Dropout::Off)?;
            probe.tensors_mut()[ti][ei] = original - step;
            let (minus, _) = loss_and_gradients(&probe, batch, Dropout::Off)?;
            probe.tensors_mut()[ti][ei] = original;
            let numeric = (plus - minus) / (2.0 * step);
            let analytic = grad_tensors[ti][ei];
            let denom = analytic.abs().max(numeric.abs()).max(0.01);
            let rel = (analytic - numeric).abs() / denom;
            if rel > worst {
                worst = rel;
            }
        }
    }
    Ok(worst)
}

/// Seed helper for dropout streams tied to a training seed and epoch.
pub fn dropout_rng(seed: u64, epoch: u32) -> ChaCha8Rng {
    stream_rng(seed, "dropout", u64::from(epoch))
}
