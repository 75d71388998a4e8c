//! Stacked LSTM with a linear output layer, stored as one flat parameter
//! vector so the optimizer, gradient checks, and checkpointing all see the
//! same layout.
//!
//! Cell equations per layer and step (gate order `i, f, g, o`):
//!
//! ```text
//! z = W_x x + W_h h_prev + b
//! i = sig(z_i)  f = sig(z_f)  g = tanh(z_g)  o = sig(z_o)
//! c = f c_prev + i g
//! h = o tanh(c)
//! ```
//!
//! followed by the identity-activated output layer `y = W_fc h_top + b_fc`.

use crate::det::Rng64;
use crate::error::{Error, Result};

/// Shape of a network; derives every tensor offset in the flat buffer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Topology {
    pub input_dim: usize,
    pub output_dim: usize,
    pub units: usize,
    pub layers: usize,
}

/// Named tensor inside the flat buffer, in declaration order.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorInfo {
    pub name: String,
    pub rows: usize,
    pub cols: usize, // 1 for vectors
    pub offset: usize,
}

impl Topology {
    pub fn new(input_dim: usize, output_dim: usize, units: usize, layers: usize) -> Self {
        assert!(input_dim > 0 && output_dim > 0 && units > 0 && layers > 0);
        Topology {
            input_dim,
            output_dim,
            units,
            layers,
        }
    }

    pub fn layer_input_dim(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_dim
        } else {
            self.units
        }
    }

    pub fn tensors(&self) -> Vec<TensorInfo> {
        let u = self.units;
        let mut out = Vec::with_capacity(self.layers * 3 + 2);
        let mut offset = 0;
        let mut push = |name: String, rows: usize, cols: usize, offset: &mut usize| {
            out.push(TensorInfo {
                name,
                rows,
                cols,
                offset: *offset,
            });
            *offset += rows * cols;
        };
        for l in 0..self.layers {
            let in_dim = self.layer_input_dim(l);
            push(format!("lstm{l}.w_x"), 4 * u, in_dim, &mut offset);
            push(format!("lstm{l}.w_h"), 4 * u, u, &mut offset);
            push(format!("lstm{l}.b"), 4 * u, 1, &mut offset);
        }
        push("fc.w".into(), self.output_dim, u, &mut offset);
        push("fc.b".into(), self.output_dim, 1, &mut offset);
        out
    }

    pub fn param_count(&self) -> usize {
        let u = self.units;
        let mut n = 0;
        for l in 0..self.layers {
            n += 4 * u * self.layer_input_dim(l) + 4 * u * u + 4 * u;
        }
        n + self.output_dim * u + self.output_dim
    }

    fn layer_offsets(&self, layer: usize) -> (usize, usize, usize) {
        let u = self.units;
        let mut offset = 0;
        for l in 0..layer {
            offset += 4 * u * self.layer_input_dim(l) + 4 * u * u + 4 * u;
        }
        let wx = offset;
        let wh = wx + 4 * u * self.layer_input_dim(layer);
        let b = wh + 4 * u * u;
        (wx, wh, b)
    }

    fn fc_offsets(&self) -> (usize, usize) {
        let mut offset = 0;
        for l in 0..self.layers {
            let u = self.units;
            offset += 4 * u * self.layer_input_dim(l) + 4 * u * u + 4 * u;
        }
        (offset, offset + self.output_dim * self.units)
    }
}

/// All parameters of a model as one flat vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelWeights {
    pub topo: Topology,
    pub data: Vec<f64>,
}

impl ModelWeights {
    /// Seeded uniform init scaled by fan-in; forget-gate biases start at 1.
    pub fn init(topo: Topology, seed: u64) -> Self {
        let mut rng = Rng64::new(seed);
        let mut data = vec![0.0; topo.param_count()];
        let u = topo.units;
        for l in 0..topo.layers {
            let (wx, wh, b) = topo.layer_offsets(l);
            let in_dim = topo.layer_input_dim(l);
            let sx = 1.0 / (in_dim as f64).sqrt();
            for v in &mut data[wx..wx + 4 * u * in_dim] {
                *v = rng.range(-sx, sx);
            }
            let sh = 1.0 / (u as f64).sqrt();
            for v in &mut data[wh..wh + 4 * u * u] {
                *v = rng.range(-sh, sh);
            }
            // Bias block: forget gate rows get 1.0, the rest stay 0.
            for j in 0..u {
                data[b + u + j] = 1.0;
            }
        }
        let (fcw, _fcb) = topo.fc_offsets();
        let s = 1.0 / (u as f64).sqrt();
        for v in &mut data[fcw..fcw + topo.output_dim * u] {
            *v = rng.range(-s, s);
        }
        ModelWeights { topo, data }
    }

    pub fn zeros(topo: Topology) -> Self {
        ModelWeights {
            topo,
            data: vec![0.0; topo.param_count()],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Recurrent state: h and c per layer.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenState {
    pub h: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

impl HiddenState {
    pub fn zeros(topo: &Topology) -> Self {
        HiddenState {
            h: vec![vec![0.0; topo.units]; topo.layers],
            c: vec![vec![0.0; topo.units]; topo.layers],
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `out += m * v` for a row-major `rows x cols` matrix.
fn matvec_acc(m: &[f64], v: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    debug_assert_eq!(m.len(), rows * cols);
    debug_assert_eq!(v.len(), cols);
    for r in 0..rows {
        let row = &m[r * cols..(r + 1) * cols];
        let mut acc = 0.0;
        for (a, b) in row.iter().zip(v) {
            acc += a * b;
        }
        out[r] += acc;
    }
}

/// `out += m^T * v` for a row-major `rows x cols` matrix.
fn matvec_t_acc(m: &[f64], v: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    debug_assert_eq!(v.len(), rows);
    for r in 0..rows {
        let row = &m[r * cols..(r + 1) * cols];
        let vr = v[r];
        for (o, a) in out.iter_mut().zip(row) {
            *o += a * vr;
        }
    }
}

/// `out[r][c] += v[r] * x[c]` outer-product accumulation.
fn outer_acc(out: &mut [f64], v: &[f64], x: &[f64]) {
    let cols = x.len();
    for (r, &vr) in v.iter().enumerate() {
        let row = &mut out[r * cols..(r + 1) * cols];
        for (o, &xc) in row.iter_mut().zip(x) {
            *o += vr * xc;
        }
    }
}

/// Post-activation values of one layer at one step, kept for backprop.
#[derive(Clone, Debug, Default)]
pub struct LayerCache {
    pub gates: Vec<f64>, // i | f | g | o, each `units` long
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

/// Advances one layer; returns the new (h, c) and, when `cache` is set,
/// stores the activations needed by the backward pass.
fn layer_forward(
    weights: &ModelWeights,
    layer: usize,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    cache: Option<&mut LayerCache>,
) -> (Vec<f64>, Vec<f64>) {
    let topo = &weights.topo;
    let u = topo.units;
    let in_dim = topo.layer_input_dim(layer);
    let (wx, wh, b) = topo.layer_offsets(layer);

    let mut z = weights.data[b..b + 4 * u].to_vec();
    matvec_acc(&weights.data[wx..wx + 4 * u * in_dim], x, 4 * u, in_dim, &mut z);
    matvec_acc(&weights.data[wh..wh + 4 * u * u], h_prev, 4 * u, u, &mut z);

    let mut h = vec![0.0; u];
    let mut c = vec![0.0; u];
    let mut gates = vec![0.0; 4 * u];
    let mut tanh_c = vec![0.0; u];
    for j in 0..u {
        let i = sigmoid(z[j]);
        let f = sigmoid(z[u + j]);
        let g = z[2 * u + j].tanh();
        let o = sigmoid(z[3 * u + j]);
        let cj = f * c_prev[j] + i * g;
        let tc = cj.tanh();
        gates[j] = i;
        gates[u + j] = f;
        gates[2 * u + j] = g;
        gates[3 * u + j] = o;
        c[j] = cj;
        tanh_c[j] = tc;
        h[j] = o * tc;
    }
    if let Some(cache) = cache {
        cache.gates = gates;
        cache.c = c.clone();
        cache.tanh_c = tanh_c;
    }
    (h, c)
}

/// One inference step through the whole stack plus the output layer.
///
/// `x` must be a normalized input of the topology's input dimension; the
/// hidden state advances in place.
pub fn model_step(weights: &ModelWeights, x: &[f64], hidden: &mut HiddenState) -> Result<Vec<f64>> {
    let topo = &weights.topo;
    if x.len() != topo.input_dim {
        return Err(Error::DimensionMismatch {
            expected: topo.input_dim,
            got: x.len(),
            context: "model input",
        });
    }
    let mut input = x.to_vec();
    for l in 0..topo.layers {
        let (h, c) = layer_forward(weights, l, &input, &hidden.h[l], &hidden.c[l], None);
        input = h.clone();
        hidden.h[l] = h;
        hidden.c[l] = c;
    }
    Ok(fc_forward(weights, &input))
}

pub fn fc_forward(weights: &ModelWeights, h_top: &[f64]) -> Vec<f64> {
    let topo = &weights.topo;
    let (fcw, fcb) = topo.fc_offsets();
    let mut y = weights.data[fcb..fcb + topo.output_dim].to_vec();
    matvec_acc(
        &weights.data[fcw..fcw + topo.output_dim * topo.units],
        h_top,
        topo.output_dim,
        topo.units,
        &mut y,
    );
    y
}

/// Full forward/backward machinery over a window, used by BPTT.
pub struct WindowCache {
    /// h\[t\]\[layer\], including t = -1 zeros at index 0.
    pub h: Vec<Vec<Vec<f64>>>,
    pub c: Vec<Vec<Vec<f64>>>,
    pub layer_caches: Vec<Vec<LayerCache>>, // [t][layer]
    pub inputs: Vec<Vec<f64>>,              // model input actually fed at t
    pub outputs: Vec<Vec<f64>>,             // y_t
}

impl WindowCache {
    pub fn with_capacity(topo: &Topology, steps: usize) -> Self {
        let zero_layer = vec![vec![0.0; topo.units]; topo.layers];
        WindowCache {
            h: vec![zero_layer.clone()],
            c: vec![zero_layer],
            layer_caches: Vec::with_capacity(steps),
            inputs: Vec::with_capacity(steps),
            outputs: Vec::with_capacity(steps),
        }
    }

    /// Runs one step caching everything; returns the output.
    pub fn step(&mut self, weights: &ModelWeights, x: Vec<f64>) -> Vec<f64> {
        let topo = &weights.topo;
        let t = self.layer_caches.len();
        let mut caches = vec![LayerCache::default(); topo.layers];
        let mut hs = Vec::with_capacity(topo.layers);
        let mut cs = Vec::with_capacity(topo.layers);
        let mut input = x.clone();
        for l in 0..topo.layers {
            let (h, c) = layer_forward(
                weights,
                l,
                &input,
                &self.h[t][l],
                &self.c[t][l],
                Some(&mut caches[l]),
            );
            input = h.clone();
            hs.push(h);
            cs.push(c);
        }
        let y = fc_forward(weights, &input);
        self.h.push(hs);
        self.c.push(cs);
        self.layer_caches.push(caches);
        self.inputs.push(x);
        self.outputs.push(y.clone());
        y
    }
}

/// Backward pass state reused across steps.
pub struct BackwardState {
    pub dh_next: Vec<Vec<f64>>,
    pub dc_next: Vec<Vec<f64>>,
}

impl BackwardState {
    pub fn zeros(topo: &Topology) -> Self {
        BackwardState {
            dh_next: vec![vec![0.0; topo.units]; topo.layers],
            dc_next: vec![vec![0.0; topo.units]; topo.layers],
        }
    }
}

/// Backpropagates one step `t` of a cached window.
///
/// `dy` is the gradient w.r.t. the step's output; returns the gradient w.r.t.
/// the step's model input. `grads` accumulates parameter gradients.
pub fn backward_step(
    weights: &ModelWeights,
    cache: &WindowCache,
    t: usize,
    dy: &[f64],
    state: &mut BackwardState,
    grads: &mut [f64],
) -> Vec<f64> {
    let topo = &weights.topo;
    let u = topo.units;

    // Output layer.
    let (fcw, fcb) = topo.fc_offsets();
    let h_top = &cache.h[t + 1][topo.layers - 1];
    outer_acc(&mut grads[fcw..fcw + topo.output_dim * u], dy, h_top);
    for (g, d) in grads[fcb..fcb + topo.output_dim].iter_mut().zip(dy) {
        *g += d;
    }
    let mut dh_from_above = vec![0.0; u];
    matvec_t_acc(
        &weights.data[fcw..fcw + topo.output_dim * u],
        dy,
        topo.output_dim,
        u,
        &mut dh_from_above,
    );

    let mut dx_out = Vec::new();
    for l in (0..topo.layers).rev() {
        let lc = &cache.layer_caches[t][l];
        let in_dim = topo.layer_input_dim(l);
        let (wx, wh, b) = topo.layer_offsets(l);
        let c_prev = &cache.c[t][l];
        let x = if l == 0 {
            &cache.inputs[t]
        } else {
            &cache.h[t + 1][l - 1]
        };

        let mut dh = state.dh_next[l].clone();
        for (a, b) in dh.iter_mut().zip(&dh_from_above) {
            *a += b;
        }

        let mut dz = vec![0.0; 4 * u];
        let mut dc_prev = vec![0.0; u];
        for j in 0..u {
            let i = lc.gates[j];
            let f = lc.gates[u + j];
            let g = lc.gates[2 * u + j];
            let o = lc.gates[3 * u + j];
            let tc = lc.tanh_c[j];

            let dhj = dh[j];
            let do_ = dhj * tc;
            let dc = dhj * o * (1.0 - tc * tc) + state.dc_next[l][j];
            let di = dc * g;
            let df = dc * c_prev[j];
            let dg = dc * i;

            dz[j] = di * i * (1.0 - i);
            dz[u + j] = df * f * (1.0 - f);
            dz[2 * u + j] = dg * (1.0 - g * g);
            dz[3 * u + j] = do_ * o * (1.0 - o);
            dc_prev[j] = dc * f;
        }

        outer_acc(&mut grads[wx..wx + 4 * u * in_dim], &dz, x);
        let h_prev = &cache.h[t][l];
        outer_acc(&mut grads[wh..wh + 4 * u * u], &dz, h_prev);
        for (g, d) in grads[b..b + 4 * u].iter_mut().zip(&dz) {
            *g += d;
        }

        let mut dx = vec![0.0; in_dim];
        matvec_t_acc(&weights.data[wx..wx + 4 * u * in_dim], &dz, 4 * u, in_dim, &mut dx);
        let mut dh_prev = vec![0.0; u];
        matvec_t_acc(&weights.data[wh..wh + 4 * u * u], &dz, 4 * u, u, &mut dh_prev);

        state.dh_next[l] = dh_prev;
        state.dc_next[l] = dc_prev;
        if l == 0 {
            dx_out = dx;
        } else {
            dh_from_above = dx;
        }
    }
    dx_out
}
