//! Backpropagation through time over a supervision window, with two input
//! regimes:
//!
//! * teacher forcing: every step consumes the recorded row, so gradients see
//!   only one-step errors;
//! * autoregressive (free running): steps consume the model's previous
//!   output, with the recorded row re-injected every `anchor_period` steps,
//!   and gradients flow through the output-to-input feedback path.

use crate::error::{Error, Result};

use super::lstm::{backward_step, BackwardState, ModelWeights, WindowCache};
use super::ModelVariant;
use super::Normalizer;

/// Input regime for training.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainRegime {
    TeacherForced,
    /// Free running with ground truth re-injected every `anchor_period` steps.
    Autoregressive { anchor_period: usize },
}

impl TrainRegime {
    /// Whether step `t` consumes ground truth (as opposed to the previous
    /// prediction). Step 0 always does.
    pub fn anchored(&self, t: usize) -> bool {
        match self {
            TrainRegime::TeacherForced => true,
            TrainRegime::Autoregressive { anchor_period } => t % anchor_period == 0,
        }
    }
}

/// A normalized, variant-mapped supervision window: `inputs[t]` pairs with
/// `targets[t]`, the state one prediction stride later.
#[derive(Clone, Debug)]
pub struct SupervisedWindow {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl SupervisedWindow {
    /// Builds the window from consecutive 18-dim rows.
    pub fn from_rows(
        rows: &[[f64; crate::episode::STATE_DIMS]],
        variant: ModelVariant,
        normalizer: &Normalizer,
    ) -> Result<SupervisedWindow> {
        if rows.len() < 2 {
            return Err(Error::TooShort(rows.len()));
        }
        let in_cols = variant.input_cols();
        let out_cols = variant.output_cols();
        let steps = rows.len() - 1;
        let mut inputs = Vec::with_capacity(steps);
        let mut targets = Vec::with_capacity(steps);
        for t in 0..steps {
            inputs.push(normalizer.normalize_cols(in_cols.clone(), &rows[t]));
            targets.push(normalizer.normalize_cols(out_cols.clone(), &rows[t + 1]));
        }
        Ok(SupervisedWindow { inputs, targets })
    }

    pub fn steps(&self) -> usize {
        self.inputs.len()
    }
}

/// Mean squared error over equally shaped prediction/target sequences.
pub fn loss_mse(predictions: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: targets.len(),
            got: predictions.len(),
            context: "loss step count",
        });
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for (p, t) in predictions.iter().zip(targets) {
        if p.len() != t.len() {
            return Err(Error::DimensionMismatch {
                expected: t.len(),
                got: p.len(),
                context: "loss dimension",
            });
        }
        for (a, b) in p.iter().zip(t) {
            let d = a - b;
            sum += d * d;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(sum / n as f64)
}

fn feed_input(
    window: &SupervisedWindow,
    regime: TrainRegime,
    t: usize,
    prev_output: Option<&Vec<f64>>,
) -> Vec<f64> {
    if t == 0 || regime.anchored(t) {
        window.inputs[t].clone()
    } else {
        prev_output
            .expect("free-running step without previous output")
            .clone()
    }
}

/// Forward pass only; returns the per-step predictions and the window loss.
pub fn window_forward(
    weights: &ModelWeights,
    window: &SupervisedWindow,
    regime: TrainRegime,
) -> Result<(Vec<Vec<f64>>, f64)> {
    let mut cache = WindowCache::with_capacity(&weights.topo, window.steps());
    let mut prev: Option<Vec<f64>> = None;
    for t in 0..window.steps() {
        let x = feed_input(window, regime, t, prev.as_ref());
        if x.len() != weights.topo.input_dim {
            return Err(Error::DimensionMismatch {
                expected: weights.topo.input_dim,
                got: x.len(),
                context: "window input",
            });
        }
        let y = cache.step(weights, x);
        prev = Some(y);
    }
    let loss = loss_mse(&cache.outputs, &window.targets)?;
    Ok((cache.outputs, loss))
}

/// Exact gradients of the window MSE by backpropagation through time.
///
/// In the autoregressive regime the feedback path contributes: the gradient
/// w.r.t. a fed input flows into the step that produced it.
pub fn bptt_gradients(
    weights: &ModelWeights,
    window: &SupervisedWindow,
    regime: TrainRegime,
) -> Result<(Vec<f64>, f64)> {
    let topo = &weights.topo;
    let steps = window.steps();
    if steps == 0 {
        return Err(Error::TooShort(1));
    }

    // Forward with caching, remembering which steps were fed predictions.
    let mut cache = WindowCache::with_capacity(topo, steps);
    let mut fed_from_prev = vec![false; steps];
    for t in 0..steps {
        let x = if t == 0 || regime.anchored(t) {
            window.inputs[t].clone()
        } else {
            fed_from_prev[t] = true;
            cache.outputs[t - 1].clone()
        };
        if x.len() != topo.input_dim {
            return Err(Error::DimensionMismatch {
                expected: topo.input_dim,
                got: x.len(),
                context: "window input",
            });
        }
        cache.step(weights, x);
    }
    let loss = loss_mse(&cache.outputs, &window.targets)?;

    let n = (steps * topo.output_dim) as f64;
    let mut grads = vec![0.0; topo.param_count()];
    let mut state = BackwardState::zeros(topo);
    // Gradient w.r.t. the input of step t+1 when that input was y_t.
    let mut dx_feedback: Option<Vec<f64>> = None;

    for t in (0..steps).rev() {
        let mut dy: Vec<f64> = cache.outputs[t]
            .iter()
            .zip(&window.targets[t])
            .map(|(p, tgt)| 2.0 * (p - tgt) / n)
            .collect();
        if let Some(fb) = dx_feedback.take() {
            for (a, b) in dy.iter_mut().zip(&fb) {
                *a += b;
            }
        }
        let dx = backward_step(weights, &cache, t, &dy, &mut state, &mut grads);
        if fed_from_prev[t] {
            dx_feedback = Some(dx);
        }
    }

    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient);
    }
    Ok((grads, loss))
}
