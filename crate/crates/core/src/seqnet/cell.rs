//! One LSTM layer: gate parameters, the cell step, its backward pass, and
//! inverted dropout.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::Error;
use crate::fmath::{sigmoid, sqrt, tanh};
use crate::seqnet::linalg::{add_scaled, expect_len, Mat};

/// Gate parameters of one layer. Weights act as W·x + U·h + b per gate.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayerParams {
    pub w_i: Mat,
    pub w_f: Mat,
    pub w_o: Mat,
    pub w_g: Mat,
    pub u_i: Mat,
    pub u_f: Mat,
    pub u_o: Mat,
    pub u_g: Mat,
    pub b_i: Vec<f64>,
    pub b_f: Vec<f64>,
    pub b_o: Vec<f64>,
    pub b_g: Vec<f64>,
    pub input: usize,
    pub hidden: usize,
}

impl LstmLayerParams {
    /// Weights uniform in ±1/√hidden, zero biases except the forget bias,
    /// which starts at +1 so early training does not flush the cell state.
    pub fn init(input: usize, hidden: usize, rng: &mut impl Rng) -> LstmLayerParams {
        let scale = 1.0 / sqrt(hidden as f64);
        let mut w = || Mat::uniform(hidden, input, scale, rng);
        let (w_i, w_f, w_o, w_g) = (w(), w(), w(), w());
        let mut u = || Mat::uniform(hidden, hidden, scale, rng);
        let (u_i, u_f, u_o, u_g) = (u(), u(), u(), u());
        LstmLayerParams {
            w_i,
            w_f,
            w_o,
            w_g,
            u_i,
            u_f,
            u_o,
            u_g,
            b_i: alloc::vec![0.0; hidden],
            b_f: alloc::vec![1.0; hidden],
            b_o: alloc::vec![0.0; hidden],
            b_g: alloc::vec![0.0; hidden],
            input,
            hidden,
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> LstmLayerParams {
        LstmLayerParams {
            w_i: Mat::zeros(hidden, input),
            w_f: Mat::zeros(hidden, input),
            w_o: Mat::zeros(hidden, input),
            w_g: Mat::zeros(hidden, input),
            u_i: Mat::zeros(hidden, hidden),
            u_f: Mat::zeros(hidden, hidden),
            u_o: Mat::zeros(hidden, hidden),
            u_g: Mat::zeros(hidden, hidden),
            b_i: alloc::vec![0.0; hidden],
            b_f: alloc::vec![0.0; hidden],
            b_o: alloc::vec![0.0; hidden],
            b_g: alloc::vec![0.0; hidden],
            input,
            hidden,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        for w in [&self.w_i, &self.w_f, &self.w_o, &self.w_g] {
            w.check_shape(self.hidden, self.input)?;
        }
        for u in [&self.u_i, &self.u_f, &self.u_o, &self.u_g] {
            u.check_shape(self.hidden, self.hidden)?;
        }
        for b in [&self.b_i, &self.b_f, &self.b_o, &self.b_g] {
            expect_len(b, self.hidden)?;
        }
        Ok(())
    }
}

/// Everything the backward pass needs from one forward step.
#[derive(Debug, Clone)]
pub struct CellCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub o: Vec<f64>,
    pub g: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

fn gate(p: &LstmLayerParams, w: &Mat, u: &Mat, b: &[f64], x: &[f64], h: &[f64]) -> Vec<f64> {
    let mut z = w.matvec(x);
    add_scaled(&mut z, &u.matvec(h), 1.0);
    add_scaled(&mut z, b, 1.0);
    debug_assert_eq!(z.len(), p.hidden);
    z
}

pub(crate) fn cell_forward_cached(
    p: &LstmLayerParams,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> CellCache {
    let mut i = gate(p, &p.w_i, &p.u_i, &p.b_i, x, h_prev);
    let mut f = gate(p, &p.w_f, &p.u_f, &p.b_f, x, h_prev);
    let mut o = gate(p, &p.w_o, &p.u_o, &p.b_o, x, h_prev);
    let mut g = gate(p, &p.w_g, &p.u_g, &p.b_g, x, h_prev);
    for v in i.iter_mut().chain(f.iter_mut()).chain(o.iter_mut()) {
        *v = sigmoid(*v);
    }
    for v in g.iter_mut() {
        *v = tanh(*v);
    }
    let c: Vec<f64> = (0..p.hidden)
        .map(|k| f[k] * c_prev[k] + i[k] * g[k])
        .collect();
    let tanh_c: Vec<f64> = c.iter().map(|&v| tanh(v)).collect();
    let h: Vec<f64> = (0..p.hidden).map(|k| o[k] * tanh_c[k]).collect();
    CellCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        i,
        f,
        o,
        g,
        c,
        tanh_c,
        h,
    }
}

/// One LSTM step: returns (h_t, c_t).
pub fn lstm_cell_forward(
    p: &LstmLayerParams,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), Error> {
    p.validate()?;
    expect_len(x, p.input)?;
    expect_len(h_prev, p.hidden)?;
    expect_len(c_prev, p.hidden)?;
    let cache = cell_forward_cached(p, x, h_prev, c_prev);
    Ok((cache.h, cache.c))
}

/// Backward through one step. `dh`/`dc` are the gradients flowing into h_t
/// and c_t; returns (dx, dh_prev, dc_prev) and accumulates into `grads`.
pub(crate) fn cell_backward(
    p: &LstmLayerParams,
    cache: &CellCache,
    dh: &[f64],
    dc_in: &[f64],
    grads: &mut LstmLayerParams,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = p.hidden;
    let mut dzi = Vec::with_capacity(n);
    let mut dzf = Vec::with_capacity(n);
    let mut dzo = Vec::with_capacity(n);
    let mut dzg = Vec::with_capacity(n);
    let mut dc_prev = Vec::with_capacity(n);
    for k in 0..n {
        let dc = dc_in[k] + dh[k] * cache.o[k] * (1.0 - cache.tanh_c[k] * cache.tanh_c[k]);
        let do_ = dh[k] * cache.tanh_c[k];
        let di = dc * cache.g[k];
        let df = dc * cache.c_prev[k];
        let dg = dc * cache.i[k];
        dzi.push(di * cache.i[k] * (1.0 - cache.i[k]));
        dzf.push(df * cache.f[k] * (1.0 - cache.f[k]));
        dzo.push(do_ * cache.o[k] * (1.0 - cache.o[k]));
        dzg.push(dg * (1.0 - cache.g[k] * cache.g[k]));
        dc_prev.push(dc * cache.f[k]);
    }

    grads.w_i.add_outer(&dzi, &cache.x);
    grads.w_f.add_outer(&dzf, &cache.x);
    grads.w_o.add_outer(&dzo, &cache.x);
    grads.w_g.add_outer(&dzg, &cache.x);
    grads.u_i.add_outer(&dzi, &cache.h_prev);
    grads.u_f.add_outer(&dzf, &cache.h_prev);
    grads.u_o.add_outer(&dzo, &cache.h_prev);
    grads.u_g.add_outer(&dzg, &cache.h_prev);
    add_scaled(&mut grads.b_i, &dzi, 1.0);
    add_scaled(&mut grads.b_f, &dzf, 1.0);
    add_scaled(&mut grads.b_o, &dzo, 1.0);
    add_scaled(&mut grads.b_g, &dzg, 1.0);

    let mut dx = p.w_i.matvec_t(&dzi);
    add_scaled(&mut dx, &p.w_f.matvec_t(&dzf), 1.0);
    add_scaled(&mut dx, &p.w_o.matvec_t(&dzo), 1.0);
    add_scaled(&mut dx, &p.w_g.matvec_t(&dzg), 1.0);
    let mut dh_prev = p.u_i.matvec_t(&dzi);
    add_scaled(&mut dh_prev, &p.u_f.matvec_t(&dzf), 1.0);
    add_scaled(&mut dh_prev, &p.u_o.matvec_t(&dzo), 1.0);
    add_scaled(&mut dh_prev, &p.u_g.matvec_t(&dzg), 1.0);

    (dx, dh_prev, dc_prev)
}

/// Inverted-dropout mask: each entry is 0 with probability `p`, otherwise
/// 1/(1−p), so the expectation of masked activations is unchanged.
pub(crate) fn dropout_mask(len: usize, p: f64, rng: &mut impl Rng) -> Vec<f64> {
    let keep = 1.0 / (1.0 - p);
    (0..len)
        .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
        .collect()
}

/// Dropout as a standalone op: identity outside training mode.
pub fn dropout_forward(
    x: &[f64],
    p: f64,
    rng: &mut impl Rng,
    training: bool,
) -> Result<Vec<f64>, Error> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidParameter("drop rate must lie in [0, 1)"));
    }
    if !training || p == 0.0 {
        return Ok(x.to_vec());
    }
    let mask = dropout_mask(x.len(), p, rng);
    Ok(x.iter().zip(&mask).map(|(v, m)| v * m).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use alloc::vec;

    #[test]
    fn zero_parameters_give_zero_state() {
        let p = LstmLayerParams::zeros(3, 2);
        let (h, c) = lstm_cell_forward(&p, &[1.0, -1.0, 0.5], &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(h, vec![0.0, 0.0]);
        assert_eq!(c, vec![0.0, 0.0]);
    }

    #[test]
    fn saturated_forget_gate_preserves_the_cell() {
        let mut p = LstmLayerParams::zeros(1, 2);
        // Forget gate pinned open, input gate pinned shut.
        p.b_f = vec![50.0, 50.0];
        p.b_i = vec![-50.0, -50.0];
        let c_prev = vec![0.7, -1.3];
        let (_, c) = lstm_cell_forward(&p, &[1.0], &[0.1, 0.2], &c_prev).unwrap();
        for (a, b) in c.iter().zip(&c_prev) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_a_scalar_reimplementation() {
        // Hidden 2, input 2, every weight distinct; the expected values are
        // recomputed below with plain scalar arithmetic.
        let mut rng = seeded_rng(77);
        let p = LstmLayerParams::init(2, 2, &mut rng);
        let x = [0.3, -0.8];
        let h_prev = [0.25, -0.5];
        let c_prev = [0.1, 0.9];
        let (h, c) = lstm_cell_forward(&p, &x, &h_prev, &c_prev).unwrap();

        let dot = |m: &Mat, row: usize, v: &[f64]| -> f64 {
            (0..m.cols).map(|j| m.data[row * m.cols + j] * v[j]).sum()
        };
        for k in 0..2 {
            let i = sigmoid(dot(&p.w_i, k, &x) + dot(&p.u_i, k, &h_prev) + p.b_i[k]);
            let f = sigmoid(dot(&p.w_f, k, &x) + dot(&p.u_f, k, &h_prev) + p.b_f[k]);
            let o = sigmoid(dot(&p.w_o, k, &x) + dot(&p.u_o, k, &h_prev) + p.b_o[k]);
            let g = tanh(dot(&p.w_g, k, &x) + dot(&p.u_g, k, &h_prev) + p.b_g[k]);
            let ck = f * c_prev[k] + i * g;
            assert!((c[k] - ck).abs() < 1e-12);
            assert!((h[k] - o * tanh(ck)).abs() < 1e-12);
        }
    }

    #[test]
    fn hidden_state_stays_inside_the_unit_box() {
        let mut rng = seeded_rng(3);
        let p = LstmLayerParams::init(4, 8, &mut rng);
        let mut h = alloc::vec![0.0; 8];
        let mut c = alloc::vec![0.0; 8];
        for step in 0..20 {
            let x: Vec<f64> = (0..4).map(|j| ((step + j) as f64).sin()).collect();
            let (nh, nc) = lstm_cell_forward(&p, &x, &h, &c).unwrap();
            h = nh;
            c = nc;
            assert!(h.iter().all(|v| v.abs() < 1.0));
        }
    }

    #[test]
    fn shape_errors_are_reported() {
        let p = LstmLayerParams::zeros(3, 2);
        assert!(matches!(
            lstm_cell_forward(&p, &[1.0], &[0.0, 0.0], &[0.0, 0.0]),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn dropout_identity_cases() {
        let mut rng = seeded_rng(1);
        let x = vec![1.0, 2.0, 3.0];
        assert_eq!(dropout_forward(&x, 0.0, &mut rng, true).unwrap(), x);
        assert_eq!(dropout_forward(&x, 0.9, &mut rng, false).unwrap(), x);
        assert!(dropout_forward(&x, 1.0, &mut rng, true).is_err());
    }

    #[test]
    fn dropout_preserves_the_mean() {
        let mut rng = seeded_rng(5);
        for p in [0.05, 0.5] {
            let mut total = 0.0;
            let n = 100_000;
            for _ in 0..n {
                total += dropout_forward(&[1.0], p, &mut rng, true).unwrap()[0];
            }
            let mean = total / n as f64;
            assert!(
                (mean - 1.0).abs() < 0.01,
                "p={p}: mean {mean} drifted past 1%"
            );
        }
    }
}
