//! The training loop: seeded window sampling, batch-accumulated BPTT
//! gradients in a fixed order, one Adam step per batch.

use std::time::Instant;

use crate::det::{fnv1a64, Rng64};
use crate::episode::TrainingSequence;
use crate::error::{Error, Result};

use super::adam::{adam_step, AdamState};
use super::bptt::{bptt_gradients, SupervisedWindow};
use super::lstm::ModelWeights;
use super::normalizer::Normalizer;
use super::{ModelConfig, SequenceModel};

/// Per-epoch losses plus run bookkeeping.
#[derive(Clone, Debug)]
pub struct TrainReport {
    /// Mean window loss per epoch, normalized space.
    pub losses: Vec<f64>,
    pub wall_time_s: f64,
    pub weights_hash: u64,
    pub config: ModelConfig,
}

fn hash_weights(w: &ModelWeights) -> u64 {
    let mut bytes = Vec::with_capacity(w.data.len() * 8);
    for v in &w.data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fnv1a64(&bytes)
}

/// Valid `(sequence, start)` pairs for windows of `window` rows.
fn window_starts(dataset: &[TrainingSequence], window: usize) -> Vec<(usize, usize)> {
    let mut starts = Vec::new();
    for (si, seq) in dataset.iter().enumerate() {
        if seq.len() >= window {
            for off in 0..=(seq.len() - window) {
                starts.push((si, off));
            }
        }
    }
    starts
}

/// Trains one model on 20 ms training sequences.
pub fn train(dataset: &[TrainingSequence], config: &ModelConfig) -> Result<(SequenceModel, TrainReport)> {
    config.validate()?;
    if dataset.is_empty() || dataset.iter().all(|s| s.is_empty()) {
        return Err(Error::EmptyDataset);
    }
    let normalizer = Normalizer::fit(dataset)?;
    let starts = window_starts(dataset, config.window);
    if starts.is_empty() {
        let longest = dataset.iter().map(|s| s.len()).max().unwrap_or(0);
        return Err(Error::TooShort(longest));
    }

    let topo = config.topology();
    let mut weights = ModelWeights::init(topo, config.seed);
    let mut adam = AdamState::new(topo.param_count());
    let mut rng = Rng64::new(crate::det::derive_seed(config.seed, "batch-sampling"));
    let regime = config.regime();

    let t0 = Instant::now();
    let mut losses = Vec::with_capacity(config.epochs);
    let mut grad_accum = vec![0.0; topo.param_count()];

    for _epoch in 0..config.epochs {
        grad_accum.iter_mut().for_each(|g| *g = 0.0);
        let mut loss_accum = 0.0;
        for _ in 0..config.batch_size {
            let (si, off) = starts[rng.below(starts.len())];
            let rows = &dataset[si].rows[off..off + config.window];
            let window = SupervisedWindow::from_rows(rows, config.variant, &normalizer)?;
            let (grads, loss) = bptt_gradients(&weights, &window, regime)?;
            for (a, g) in grad_accum.iter_mut().zip(&grads) {
                *a += g;
            }
            loss_accum += loss;
        }
        let scale = 1.0 / config.batch_size as f64;
        grad_accum.iter_mut().for_each(|g| *g *= scale);
        losses.push(loss_accum * scale);

        if let Some(clip) = config.grad_clip {
            let norm = grad_accum.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > clip {
                let k = clip / norm;
                grad_accum.iter_mut().for_each(|g| *g *= k);
            }
        }
        adam_step(&mut weights.data, &grad_accum, &mut adam, &config.adam);
        if !weights.is_finite() {
            return Err(Error::NonFiniteGradient);
        }
    }

    let report = TrainReport {
        losses,
        wall_time_s: t0.elapsed().as_secs_f64(),
        weights_hash: hash_weights(&weights),
        config: config.clone(),
    };
    let model = SequenceModel {
        config: config.clone(),
        normalizer,
        weights,
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episode::STATE_DIMS;
    use crate::seqmodel::ModelVariant;

    /// A smooth synthetic paired trajectory.
    pub(crate) fn synthetic_dataset(rows: usize, seed: u64) -> Vec<TrainingSequence> {
        let phase = seed as f64 * 0.37;
        let mut out = Vec::new();
        let mut data = Vec::with_capacity(rows);
        for k in 0..rows {
            let t = k as f64 * 0.02;
            let mut row = [0.0; STATE_DIMS];
            for d in 0..STATE_DIMS {
                let f = 0.8 + 0.13 * d as f64;
                row[d] = (f * t + phase + d as f64).sin() * 0.4;
            }
            data.push(row);
        }
        out.push(TrainingSequence { rows: data });
        out
    }

    #[test]
    fn overfits_single_short_sequence() {
        let dataset = synthetic_dataset(20, 1);
        let mut cfg = ModelConfig::new(ModelVariant::S2S, false);
        cfg.lstm_layers = 1;
        cfg.units = 12;
        cfg.window = 20;
        cfg.batch_size = 1;
        cfg.epochs = 800;
        cfg.adam.lr = 5e-3;
        cfg.seed = 7;
        let (_, report) = train(&dataset, &cfg).unwrap();
        let final_loss = *report.losses.last().unwrap();
        assert!(
            final_loss < 1e-4,
            "did not overfit: final loss {final_loss}"
        );
    }

    #[test]
    fn same_seed_same_loss_curve() {
        let dataset = synthetic_dataset(40, 2);
        let mut cfg = ModelConfig::new(ModelVariant::Sm2Sm, true);
        cfg.lstm_layers = 1;
        cfg.units = 6;
        cfg.window = 10;
        cfg.batch_size = 3;
        cfg.epochs = 10;
        let (ma, ra) = train(&dataset, &cfg).unwrap();
        let (mb, rb) = train(&dataset, &cfg).unwrap();
        assert_eq!(ra.losses, rb.losses);
        assert_eq!(ra.weights_hash, rb.weights_hash);
        assert_eq!(ma.weights.data, mb.weights.data);
    }

    #[test]
    fn loss_invariant_to_affine_rescaling() {
        // Rescaling raw units refits the normalizer, so the normalized-space
        // loss curve is unchanged.
        let base = synthetic_dataset(40, 3);
        let mut scaled = base.clone();
        for seq in &mut scaled {
            for row in &mut seq.rows {
                for (d, v) in row.iter_mut().enumerate() {
                    *v = *v * (2.0 + d as f64) - 5.0;
                }
            }
        }
        let mut cfg = ModelConfig::new(ModelVariant::Sm2Sm, false);
        cfg.lstm_layers = 1;
        cfg.units = 6;
        cfg.window = 12;
        cfg.batch_size = 4;
        cfg.epochs = 8;
        let (_, ra) = train(&base, &cfg).unwrap();
        let (_, rb) = train(&scaled, &cfg).unwrap();
        for (a, b) in ra.losses.iter().zip(&rb.losses) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn empty_and_short_datasets_error() {
        let cfg = ModelConfig::new(ModelVariant::S2S, false);
        assert!(matches!(train(&[], &cfg), Err(Error::EmptyDataset)));
        let tiny = synthetic_dataset(5, 0);
        // Window 150 never fits in 5 rows.
        assert!(matches!(train(&tiny, &cfg), Err(Error::TooShort(5))));
    }
}
