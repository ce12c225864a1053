use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::audio::{MusicFeatureSequence, FEATURE_DIM};
use crate::nn::{Adam, AdamConfig, NnError, Session, Tape, Var};

use super::loss::{distcon_loss_tape, mse_tape, velocity_loss_tape, DbnLossWeights};
use super::{DbnError, DbnModel, TrajectorySequence};

/// Training configuration for the navigator.
#[derive(Debug, Clone)]
pub struct DbnTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub weights: DbnLossWeights,
}

impl Default for DbnTrainConfig {
    fn default() -> Self {
        DbnTrainConfig {
            epochs: 60,
            lr: 1e-3,
            batch_size: 16,
            seed: 0,
            weights: DbnLossWeights::default(),
        }
    }
}

/// Per-epoch mean loss components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub recon: f64,
    pub velocity: f64,
    pub dist_con: f64,
    pub total: f64,
}

/// Errors raised by the training loops.
#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite loss at epoch {0}; aborting")]
    NonFinite(usize),
    #[error("bad dataset: {0}")]
    Data(String),
    #[error(transparent)]
    Model(#[from] DbnError),
    #[error(transparent)]
    Optimizer(#[from] NnError),
}

/// Teacher-forced training: every sequence contributes one full-sequence
/// forward pass per epoch, gradients are averaged over each minibatch, and
/// the loss curve is recorded per epoch. Deterministic for a fixed seed.
pub fn train_dbn(
    model: &mut DbnModel,
    dataset: &[(MusicFeatureSequence, TrajectorySequence)],
    cfg: &DbnTrainConfig,
) -> Result<Vec<EpochStats>, TrainError> {
    if dataset.is_empty() {
        return Err(TrainError::Data("empty dataset".into()));
    }
    let dancers = dataset[0].1.dancers();
    for (i, (music, traj)) in dataset.iter().enumerate() {
        if music.frames() != traj.frames() {
            return Err(TrainError::Data(format!(
                "sequence {i}: {} music frames vs {} trajectory frames",
                music.frames(),
                traj.frames()
            )));
        }
        if traj.dancers() != dancers {
            return Err(TrainError::Data(format!("sequence {i}: inconsistent dancer count")));
        }
        if traj.frames() < 2 {
            return Err(TrainError::Data(format!("sequence {i}: needs at least two frames")));
        }
    }
    if dancers < 2 {
        eprintln!("train-dbn: single dancer, distance-consistency term is undefined and treated as 0");
    }

    let mut optimizer = Adam::new(
        &model.store,
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
    );
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sums = [0.0f64; 4]; // recon, velocity, distcon, total
        for batch in order.chunks(cfg.batch_size.max(1)) {
            let mut grad_acc: Vec<Option<Vec<f64>>> = (0..model.store.len()).map(|_| None).collect();
            for &idx in batch {
                let (music, traj) = &dataset[idx];
                let l = traj.frames();
                let tape = Tape::new();
                let session = Session::new(&tape, &model.store);
                let music_var = tape.leaf_from(
                    vec![l - 1, FEATURE_DIM],
                    music.data()[..(l - 1) * FEATURE_DIM].to_vec(),
                );
                let mut hist = Vec::with_capacity((l - 1) * dancers * 3);
                for f in 0..l - 1 {
                    for c in 0..dancers {
                        hist.extend_from_slice(&traj.position(c, f));
                    }
                }
                let pos_var = tape.leaf_from(vec![l - 1, dancers * 3], hist);
                let preds = model.predict_teacher_forced(&session, music_var, pos_var, dancers)?;

                // full predicted trajectories: ground-truth frame 0, then the
                // teacher-forced predictions for frames 1..L
                let mut pred_full = Vec::with_capacity(dancers);
                let mut gt_full = Vec::with_capacity(dancers);
                for (c, pred) in preds.iter().enumerate() {
                    let seed_row = tape.leaf_from(vec![1, 3], traj.position(c, 0).to_vec());
                    pred_full.push(tape.concat_rows(&[seed_row, *pred]));
                    let gt: Vec<f64> = traj.dancer(c).iter().flatten().copied().collect();
                    gt_full.push(tape.leaf_from(vec![l, 3], gt));
                }
                let gt_all = tape.concat_cols(&gt_full);
                let pred_all = tape.concat_cols(&pred_full);

                let recon = mse_tape(&tape, gt_all, pred_all);
                let velocity = velocity_loss_tape(&tape, gt_all, pred_all);
                let mut total = tape.add(recon, tape.scale(velocity, cfg.weights.lambda_v));
                let mut dist_val = 0.0;
                if dancers >= 2 {
                    let dist = distcon_loss_tape(&tape, &gt_full, &pred_full);
                    dist_val = tape.scalar(dist);
                    total = tape.add(total, tape.scale(dist, cfg.weights.lambda_distcon));
                }

                let total_val = tape.scalar(total);
                if !total_val.is_finite() {
                    return Err(TrainError::NonFinite(epoch));
                }
                sums[0] += tape.scalar(recon);
                sums[1] += tape.scalar(velocity);
                sums[2] += dist_val;
                sums[3] += total_val;

                accumulate_gradients(&tape, &session, total, &mut grad_acc);
            }
            apply_mean_gradients(model, &mut optimizer, grad_acc, batch.len())?;
        }
        let n = dataset.len() as f64;
        curve.push(EpochStats {
            epoch,
            recon: sums[0] / n,
            velocity: sums[1] / n,
            dist_con: sums[2] / n,
            total: sums[3] / n,
        });
    }
    Ok(curve)
}

/// Run backward and add each bound parameter's gradient into the
/// accumulator (indexed by parameter id).
pub(crate) fn accumulate_gradients(
    tape: &Tape,
    session: &Session,
    loss: Var,
    acc: &mut [Option<Vec<f64>>],
) {
    let grads = tape.backward(loss);
    for (id, var) in session.bound() {
        if let Some(g) = grads.get(var) {
            match &mut acc[id.index()] {
                Some(slot) => {
                    for (a, b) in slot.iter_mut().zip(g.iter()) {
                        *a += b;
                    }
                }
                slot @ None => *slot = Some(g.to_vec()),
            }
        }
    }
}

/// Divide accumulated gradients by the batch size and take one Adam step.
pub(crate) fn apply_mean_gradients(
    model: &mut DbnModel,
    optimizer: &mut Adam,
    grad_acc: Vec<Option<Vec<f64>>>,
    batch: usize,
) -> Result<(), NnError> {
    let scale = 1.0 / batch.max(1) as f64;
    for (i, grads) in grad_acc.into_iter().enumerate() {
        if let Some(mut g) = grads {
            for v in g.iter_mut() {
                *v *= scale;
            }
            let id = crate::nn::ParamId::from_index(i);
            optimizer.step_param(&mut model.store, id, &g)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dbn::DbnConfig;
    use rand::Rng;

    fn toy_dataset(sequences: usize, dancers: usize, frames: usize, seed: u64) -> Vec<(MusicFeatureSequence, TrajectorySequence)> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        (0..sequences)
            .map(|_| {
                let mut data = vec![0.0; frames * FEATURE_DIM];
                for f in 0..frames {
                    data[f * FEATURE_DIM] = rng.gen_range(0.0..1.0);
                    for c in 1..21 {
                        data[f * FEATURE_DIM + c] = rng.gen_range(-1.0..1.0);
                    }
                }
                let music = MusicFeatureSequence::new(frames, 30.0, data).unwrap();
                let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let positions: Vec<Vec<[f64; 3]>> = (0..dancers)
                    .map(|c| {
                        let offset = c as f64 * std::f64::consts::TAU / dancers as f64;
                        (0..frames)
                            .map(|f| {
                                let a = phase + offset + 0.05 * f as f64;
                                [a.cos(), 0.9, a.sin()]
                            })
                            .collect()
                    })
                    .collect();
                (music, TrajectorySequence::new(positions, 30.0).unwrap())
            })
            .collect()
    }

    fn tiny_model() -> DbnModel {
        DbnModel::new(
            DbnConfig {
                hidden: 8,
                attention_blocks: 1,
                heads: 2,
                lstm_layers: 1,
                music_mlp_layers: 2,
                decoder_layers: 2,
                max_dancers: 4,
                max_frames: 16,
            },
            3,
        )
    }

    #[test]
    fn zero_lr_leaves_parameters_unchanged() {
        let mut model = tiny_model();
        let before: Vec<Vec<f64>> = model.store.ids().map(|id| model.store.get(id).data().to_vec()).collect();
        let data = toy_dataset(4, 2, 8, 1);
        let cfg = DbnTrainConfig {
            epochs: 1,
            lr: 0.0,
            batch_size: 2,
            seed: 5,
            weights: DbnLossWeights::default(),
        };
        train_dbn(&mut model, &data, &cfg).unwrap();
        for (id, prev) in model.store.ids().zip(before.iter()) {
            assert_eq!(model.store.get(id).data(), prev.as_slice());
        }
    }

    #[test]
    fn same_seed_gives_bit_identical_curves() {
        let data = toy_dataset(6, 2, 8, 2);
        let cfg = DbnTrainConfig {
            epochs: 3,
            lr: 1e-3,
            batch_size: 3,
            seed: 11,
            weights: DbnLossWeights::default(),
        };
        let mut a = tiny_model();
        let mut b = tiny_model();
        let curve_a = train_dbn(&mut a, &data, &cfg).unwrap();
        let curve_b = train_dbn(&mut b, &data, &cfg).unwrap();
        assert_eq!(curve_a, curve_b);
        for id in a.store.ids() {
            assert_eq!(a.store.get(id).data(), b.store.get(id).data());
        }
    }

    #[test]
    fn loss_decreases_on_toy_data() {
        let mut model = tiny_model();
        let data = toy_dataset(8, 2, 8, 3);
        let cfg = DbnTrainConfig {
            epochs: 40,
            lr: 3e-3,
            batch_size: 4,
            seed: 1,
            weights: DbnLossWeights::default(),
        };
        let curve = train_dbn(&mut model, &data, &cfg).unwrap();
        let first = curve.first().unwrap().total;
        let last = curve.last().unwrap().total;
        assert!(last < first, "loss did not decrease: {first} -> {last}");
    }

    #[test]
    fn mismatched_dataset_rejected() {
        let mut model = tiny_model();
        let mut data = toy_dataset(2, 2, 8, 4);
        let (m, t) = toy_dataset(1, 2, 6, 5).pop().unwrap();
        data.push((m, t));
        // different frame counts across pairs are fine; mismatch within a pair is not
        let bad_music = data[0].0.truncated(4);
        data[0].0 = bad_music;
        let cfg = DbnTrainConfig::default();
        assert!(matches!(
            train_dbn(&mut model, &data, &cfg),
            Err(TrainError::Data(_))
        ));
    }
}
