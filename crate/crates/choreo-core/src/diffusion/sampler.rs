use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::audio::MusicFeatureSequence;
use crate::dbn::TrajectorySequence;
use crate::motion::{GroupMotionSequence, CONTACT_DIM, POSE_DIM};

use super::model::TcdiffModel;
use super::noising::{standard_normal, NOISED_DIM};
use super::schedule::DiffusionSchedule;
use super::TcdiffError;

/// Sampler options; posterior noise can be disabled for the deterministic
/// limit used by the oracle-denoiser checks.
#[derive(Debug, Clone, Copy)]
pub struct SamplerOptions {
    pub posterior_noise: bool,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        SamplerOptions { posterior_noise: true }
    }
}

/// Ancestral sampling with a caller-supplied clean-sample predictor.
///
/// Starts from Gaussian noise on the contact and pose channels with the
/// root channels pinned to the conditioning trajectory, walks `t = T..1`
/// forming the posterior mean from the predicted clean sample, re-pins the
/// roots after every step, and clamps contact channels into `[0, 1]` at the
/// final step. The PRNG stream is derived from `(seed, stream)` so parallel
/// sequences can sample independently and reproducibly.
pub fn sample_with<F>(
    mut denoise: F,
    schedule: &DiffusionSchedule,
    trajectory: &TrajectorySequence,
    fps: f64,
    seed: u64,
    stream: u64,
    options: SamplerOptions,
) -> Result<GroupMotionSequence, TcdiffError>
where
    F: FnMut(&GroupMotionSequence, usize) -> Result<GroupMotionSequence, TcdiffError>,
{
    let dancers = trajectory.dancers();
    let frames = trajectory.frames();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);

    // x_T: standard normal on noised dims, roots pinned
    let mut x = GroupMotionSequence::zeros(dancers, frames, fps);
    let init = standard_normal(dancers * frames * NOISED_DIM, &mut rng);
    for c in 0..dancers {
        for l in 0..frames {
            let eps = &init[(c * frames + l) * NOISED_DIM..(c * frames + l + 1) * NOISED_DIM];
            let frame = x.frame_mut(c, l);
            frame.contact.copy_from_slice(&eps[..CONTACT_DIM]);
            frame.pose.copy_from_slice(&eps[CONTACT_DIM..]);
            frame.root = trajectory.position(c, l);
        }
    }

    for t in (1..=schedule.steps()).rev() {
        let mut x0 = denoise(&x, t)?;
        pin_roots(&mut x0, trajectory);
        if t == 1 {
            clamp_contacts(&mut x0);
        }
        let c0 = schedule.posterior_coef_x0(t);
        let ct = schedule.posterior_coef_xt(t);
        let sigma = schedule.posterior_variance(t).max(0.0).sqrt();
        let noise = if t > 1 && options.posterior_noise {
            Some(standard_normal(dancers * frames * NOISED_DIM, &mut rng))
        } else {
            None
        };
        for c in 0..dancers {
            for l in 0..frames {
                let base = (c * frames + l) * NOISED_DIM;
                let clean = x0.frame(c, l).clone();
                let frame = x.frame_mut(c, l);
                for k in 0..CONTACT_DIM {
                    let mut v = c0 * clean.contact[k] + ct * frame.contact[k];
                    if let Some(n) = &noise {
                        v += sigma * n[base + k];
                    }
                    frame.contact[k] = v;
                }
                for k in 0..POSE_DIM {
                    let mut v = c0 * clean.pose[k] + ct * frame.pose[k];
                    if let Some(n) = &noise {
                        v += sigma * n[base + CONTACT_DIM + k];
                    }
                    frame.pose[k] = v;
                }
                frame.root = trajectory.position(c, l);
            }
        }
    }
    Ok(x)
}

/// Sample a group motion from a trained model.
pub fn sample(
    model: &TcdiffModel,
    schedule: &DiffusionSchedule,
    music: &MusicFeatureSequence,
    trajectory: &TrajectorySequence,
    seed: u64,
    stream: u64,
) -> Result<GroupMotionSequence, TcdiffError> {
    if music.frames() != trajectory.frames() {
        return Err(TcdiffError::Shape(format!(
            "music has {} frames, trajectory has {}",
            music.frames(),
            trajectory.frames()
        )));
    }
    sample_with(
        |x_t, t| model.denoise(x_t, t, music, trajectory),
        schedule,
        trajectory,
        music.fps,
        seed,
        stream,
        SamplerOptions::default(),
    )
}

fn pin_roots(x: &mut GroupMotionSequence, trajectory: &TrajectorySequence) {
    for c in 0..x.dancers() {
        for l in 0..x.frames() {
            x.frame_mut(c, l).root = trajectory.position(c, l);
        }
    }
}

fn clamp_contacts(x: &mut GroupMotionSequence) {
    for c in 0..x.dancers() {
        for l in 0..x.frames() {
            for v in x.frame_mut(c, l).contact.iter_mut() {
                *v = v.clamp(0.0, 1.0);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::schedule::ScheduleKind;
    use crate::motion::MotionFrame;
    use rand::Rng;

    fn fixture(frames: usize) -> (GroupMotionSequence, TrajectorySequence) {
        let mut rng = ChaCha12Rng::seed_from_u64(40);
        let mut x0 = GroupMotionSequence::zeros(2, frames, 30.0);
        let mut traj = Vec::new();
        for c in 0..2 {
            let mut path = Vec::new();
            for l in 0..frames {
                let frame = x0.frame_mut(c, l);
                *frame = MotionFrame::identity_pose();
                for v in frame.pose.iter_mut() {
                    *v += rng.gen_range(-0.3..0.3);
                }
                frame.contact = [0.3, 0.8, 0.1, 0.9];
                frame.root = [c as f64 - 0.5, 0.9, l as f64 * 0.05];
                path.push(frame.root);
            }
            traj.push(path);
        }
        (x0, TrajectorySequence::new(traj, 30.0).unwrap())
    }

    #[test]
    fn oracle_denoiser_noise_free_recovers_x0_exactly() {
        let (x0, traj) = fixture(4);
        let schedule = DiffusionSchedule::new(ScheduleKind::Cosine, 50).unwrap();
        let target = x0.clone();
        let out = sample_with(
            |_, _| Ok(target.clone()),
            &schedule,
            &traj,
            30.0,
            9,
            0,
            SamplerOptions { posterior_noise: false },
        )
        .unwrap();
        for c in 0..2 {
            for l in 0..4 {
                let want = x0.frame(c, l);
                let got = out.frame(c, l);
                assert_eq!(got.root, want.root);
                for (a, b) in got.pose.iter().zip(want.pose.iter()) {
                    assert!((a - b).abs() < 1e-12, "{a} vs {b}");
                }
                for (a, b) in got.contact.iter().zip(want.contact.iter()) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn oracle_denoiser_with_noise_stays_close() {
        let (x0, traj) = fixture(4);
        let schedule = DiffusionSchedule::new(ScheduleKind::Cosine, 50).unwrap();
        let target = x0.clone();
        let out = sample_with(
            |_, _| Ok(target.clone()),
            &schedule,
            &traj,
            30.0,
            9,
            0,
            SamplerOptions::default(),
        )
        .unwrap();
        for c in 0..2 {
            for l in 0..4 {
                let want = x0.frame(c, l);
                let got = out.frame(c, l);
                for (a, b) in got.pose.iter().zip(want.pose.iter()) {
                    assert!((a - b).abs() < 1e-2, "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn roots_pinned_bitwise_and_contacts_clamped() {
        let (_, traj) = fixture(5);
        let schedule = DiffusionSchedule::new(ScheduleKind::Cosine, 20).unwrap();
        // denoiser returns wild values everywhere, roots included
        let out = sample_with(
            |x_t, _| {
                let mut junk = x_t.clone();
                for c in 0..junk.dancers() {
                    for l in 0..junk.frames() {
                        let f = junk.frame_mut(c, l);
                        f.root = [99.0, 99.0, 99.0];
                        f.contact = [7.0, -3.0, 0.4, 1.2];
                    }
                }
                Ok(junk)
            },
            &schedule,
            &traj,
            30.0,
            3,
            1,
            SamplerOptions::default(),
        )
        .unwrap();
        for c in 0..2 {
            for l in 0..5 {
                assert_eq!(out.frame(c, l).root, traj.position(c, l));
                for v in out.frame(c, l).contact.iter() {
                    assert!((0.0..=1.0).contains(v));
                }
            }
        }
    }

    #[test]
    fn same_seed_same_sample() {
        let (x0, traj) = fixture(3);
        let schedule = DiffusionSchedule::new(ScheduleKind::Cosine, 10).unwrap();
        let run = || {
            sample_with(
                |x_t, t| {
                    // crude denoiser: shrink toward x0
                    let mut out = x0.clone();
                    let blend = t as f64 / 10.0;
                    for c in 0..out.dancers() {
                        for l in 0..out.frames() {
                            for (o, n) in out
                                .frame_mut(c, l)
                                .pose
                                .iter_mut()
                                .zip(x_t.frame(c, l).pose.iter())
                            {
                                *o = *o * (1.0 - blend) + n * blend;
                            }
                        }
                    }
                    Ok(out)
                },
                &schedule,
                &traj,
                30.0,
                77,
                5,
                SamplerOptions::default(),
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }
}
