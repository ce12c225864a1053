use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::audio::MusicFeatureSequence;
use crate::dbn::TrajectorySequence;
use crate::motion::GroupMotionSequence;
use crate::nn::{Adam, AdamConfig, NnError, Session, Tape};

use super::loss::{loss_tcdiff_tape, SequenceTargets, TcdiffLossWeights};
use super::model::{bind_denoiser_inputs, TcdiffModel};
use super::noising::{draw_noise, q_sample_conditional};
use super::schedule::DiffusionSchedule;
use super::TcdiffError;

/// Training configuration for the denoiser.
#[derive(Debug, Clone)]
pub struct TcdiffTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub weights: TcdiffLossWeights,
}

impl Default for TcdiffTrainConfig {
    fn default() -> Self {
        TcdiffTrainConfig {
            epochs: 100,
            lr: 1e-3,
            batch_size: 16,
            seed: 0,
            weights: TcdiffLossWeights::default(),
        }
    }
}

/// Per-epoch mean loss components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TcdiffEpochStats {
    pub epoch: usize,
    pub simple: f64,
    pub rfk: f64,
    pub velocity: f64,
    pub contact: f64,
    pub total: f64,
}

/// Errors from denoiser training.
#[derive(Debug, Error)]
pub enum TcdiffTrainError {
    #[error("non-finite loss at epoch {0}; aborting")]
    NonFinite(usize),
    #[error("bad dataset: {0}")]
    Data(String),
    #[error(transparent)]
    Model(#[from] TcdiffError),
    #[error(transparent)]
    Optimizer(#[from] NnError),
}

/// Denoiser training: each sequence draws a uniform timestep, is noised by
/// the conditional forward process (roots never corrupted), denoised, and
/// scored by the four-term objective. Gradients are averaged per minibatch.
/// Deterministic for a fixed seed.
pub fn train_tcdiff(
    model: &mut TcdiffModel,
    dataset: &[(MusicFeatureSequence, GroupMotionSequence)],
    schedule: &DiffusionSchedule,
    cfg: &TcdiffTrainConfig,
) -> Result<Vec<TcdiffEpochStats>, TcdiffTrainError> {
    if dataset.is_empty() {
        return Err(TcdiffTrainError::Data("empty dataset".into()));
    }
    let dancers = model.config.dancers;
    for (i, (music, motion)) in dataset.iter().enumerate() {
        if motion.dancers() != dancers {
            return Err(TcdiffTrainError::Data(format!(
                "sequence {i} has {} dancers, model expects {dancers}",
                motion.dancers()
            )));
        }
        if music.frames() != motion.frames() {
            return Err(TcdiffTrainError::Data(format!(
                "sequence {i}: {} music frames vs {} motion frames",
                music.frames(),
                motion.frames()
            )));
        }
        if motion.frames() < 2 {
            return Err(TcdiffTrainError::Data(format!("sequence {i}: needs at least two frames")));
        }
    }

    // ground-truth FK targets and conditioning trajectories, computed once
    let skeleton = model.skeleton().clone();
    let mut cache = Vec::with_capacity(dataset.len());
    for (_, motion) in dataset {
        let targets = SequenceTargets::new(motion, &skeleton)?;
        let trajectory = TrajectorySequence::new(motion.root_trajectory(), motion.fps)
            .map_err(|e| TcdiffTrainError::Data(e.to_string()))?;
        cache.push((targets, trajectory));
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
        let mut sums = [0.0f64; 5];
        for batch in order.chunks(cfg.batch_size.max(1)) {
            let mut grad_acc: Vec<Option<Vec<f64>>> = (0..model.store.len()).map(|_| None).collect();
            for &idx in batch {
                let (music, motion) = &dataset[idx];
                let (targets, trajectory) = &cache[idx];
                let t_step = rng.gen_range(1..=schedule.steps());
                let noise = draw_noise(dancers, motion.frames(), &mut rng);
                let x_t = q_sample_conditional(motion, trajectory, t_step, schedule, &noise)?;

                let tape = Tape::new();
                let session = Session::new(&tape, &model.store);
                let (x_vars, music_var, root_vars, offset_vars) =
                    bind_denoiser_inputs(&tape, &x_t, music, trajectory);
                let pred = model.denoise_tape(&session, &x_vars, t_step, music_var, &root_vars, &offset_vars)?;
                let (total, parts) =
                    loss_tcdiff_tape(&tape, &skeleton, motion.fps, targets, &pred, &cfg.weights);
                if !parts.total.is_finite() {
                    return Err(TcdiffTrainError::NonFinite(epoch));
                }
                sums[0] += parts.simple;
                sums[1] += parts.rfk;
                sums[2] += parts.velocity;
                sums[3] += parts.contact;
                sums[4] += parts.total;

                let grads = tape.backward(total);
                for (id, var) in session.bound() {
                    if let Some(g) = grads.get(var) {
                        match &mut grad_acc[id.index()] {
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
            let scale = 1.0 / batch.len().max(1) as f64;
            for (i, grads) in grad_acc.into_iter().enumerate() {
                if let Some(mut g) = grads {
                    for v in g.iter_mut() {
                        *v *= scale;
                    }
                    optimizer.step_param(&mut model.store, crate::nn::ParamId::from_index(i), &g)?;
                }
            }
        }
        let n = dataset.len() as f64;
        curve.push(TcdiffEpochStats {
            epoch,
            simple: sums[0] / n,
            rfk: sums[1] / n,
            velocity: sums[2] / n,
            contact: sums[3] / n,
            total: sums[4] / n,
        });
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::FEATURE_DIM;
    use crate::diffusion::model::TcdiffConfig;
    use crate::diffusion::schedule::ScheduleKind;
    use crate::motion::{MotionFrame, Skeleton};

    fn toy_dataset(
        sequences: usize,
        dancers: usize,
        frames: usize,
        seed: u64,
    ) -> Vec<(MusicFeatureSequence, GroupMotionSequence)> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        (0..sequences)
            .map(|_| {
                let mut mdata: Vec<f64> = vec![0.0; frames * FEATURE_DIM];
                for f in 0..frames {
                    mdata[f * FEATURE_DIM] = rng.gen_range(0.0..1.0);
                    for c in 1..21 {
                        mdata[f * FEATURE_DIM + c] = rng.gen_range(-1.0..1.0);
                    }
                }
                let music = MusicFeatureSequence::new(frames, 30.0, mdata).unwrap();
                let mut motion = GroupMotionSequence::zeros(dancers, frames, 30.0);
                for c in 0..dancers {
                    let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                    for f in 0..frames {
                        let frame = motion.frame_mut(c, f);
                        *frame = MotionFrame::identity_pose();
                        for v in frame.pose.iter_mut() {
                            *v += 0.1 * (phase + f as f64 * 0.3).sin();
                        }
                        frame.root = [c as f64 + 0.2 * (phase + f as f64 * 0.2).cos(), 0.9, 0.1 * f as f64];
                        frame.contact = [1.0, 0.0, 1.0, 0.0];
                    }
                }
                (music, motion)
            })
            .collect()
    }

    fn tiny_model(dancers: usize) -> TcdiffModel {
        let cfg = TcdiffConfig {
            dancers,
            width: 16,
            blocks: 1,
            heads: 2,
            ffn_mult: 2,
            fusion_hidden: 32,
            csl_layers: 2,
            csl_width: 16,
            ctx_width: 16,
            time_dim: 8,
            max_frames: 16,
            footwork_adaptor: true,
        };
        TcdiffModel::new(cfg, Skeleton::canonical(), 5)
    }

    #[test]
    fn zero_lr_leaves_parameters_unchanged() {
        let mut model = tiny_model(2);
        let before: Vec<Vec<f64>> = model.store.ids().map(|id| model.store.get(id).data().to_vec()).collect();
        let data = toy_dataset(3, 2, 6, 1);
        let schedule = DiffusionSchedule::new(ScheduleKind::Cosine, 10).unwrap();
        let cfg = TcdiffTrainConfig {
            epochs: 1,
            lr: 0.0,
            batch_size: 2,
            seed: 2,
            weights: TcdiffLossWeights::default(),
        };
        train_tcdiff(&mut model, &data, &schedule, &cfg).unwrap();
        for (id, prev) in model.store.ids().zip(before.iter()) {
            assert_eq!(model.store.get(id).data(), prev.as_slice());
        }
    }

    #[test]
    fn same_seed_bit_identical() {
        let data = toy_dataset(4, 2, 6, 3);
        let schedule = DiffusionSchedule::new(ScheduleKind::Cosine, 10).unwrap();
        let cfg = TcdiffTrainConfig {
            epochs: 2,
            lr: 1e-3,
            batch_size: 2,
            seed: 4,
            weights: TcdiffLossWeights::default(),
        };
        let mut a = tiny_model(2);
        let mut b = tiny_model(2);
        let ca = train_tcdiff(&mut a, &data, &schedule, &cfg).unwrap();
        let cb = train_tcdiff(&mut b, &data, &schedule, &cfg).unwrap();
        assert_eq!(ca, cb);
        for id in a.store.ids() {
            assert_eq!(a.store.get(id).data(), b.store.get(id).data());
        }
    }

    #[test]
    fn loss_decreases_on_toy_data() {
        let mut model = tiny_model(2);
        let data = toy_dataset(6, 2, 6, 5);
        let schedule = DiffusionSchedule::new(ScheduleKind::Cosine, 10).unwrap();
        let cfg = TcdiffTrainConfig {
            epochs: 30,
            lr: 2e-3,
            batch_size: 3,
            seed: 6,
            weights: TcdiffLossWeights::default(),
        };
        let curve = train_tcdiff(&mut model, &data, &schedule, &cfg).unwrap();
        assert!(curve.last().unwrap().total < curve.first().unwrap().total);
    }

    #[test]
    fn wrong_dancer_count_rejected() {
        let mut model = tiny_model(2);
        let data = toy_dataset(2, 3, 6, 7);
        let schedule = DiffusionSchedule::new(ScheduleKind::Cosine, 10).unwrap();
        assert!(matches!(
            train_tcdiff(&mut model, &data, &schedule, &TcdiffTrainConfig::default()),
            Err(TcdiffTrainError::Data(_))
        ));
    }
}
