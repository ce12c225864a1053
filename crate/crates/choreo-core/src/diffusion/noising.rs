use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::dbn::TrajectorySequence;
use crate::motion::{GroupMotionSequence, CONTACT_DIM, POSE_DIM};

use super::schedule::DiffusionSchedule;
use super::TcdiffError;

/// Number of noised channels per frame: contact labels plus pose; the three
/// root channels are never noised.
pub const NOISED_DIM: usize = CONTACT_DIM + POSE_DIM;

/// Frame-to-frame displacement of a trajectory; `v_0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryOffsets {
    offsets: Vec<Vec<[f64; 3]>>,
}

impl TrajectoryOffsets {
    pub fn from_trajectory(traj: &TrajectorySequence) -> Self {
        let offsets = traj
            .positions()
            .iter()
            .map(|d| {
                let mut v = Vec::with_capacity(d.len());
                v.push([0.0; 3]);
                for i in 1..d.len() {
                    v.push([
                        d[i][0] - d[i - 1][0],
                        d[i][1] - d[i - 1][1],
                        d[i][2] - d[i - 1][2],
                    ]);
                }
                v
            })
            .collect();
        TrajectoryOffsets { offsets }
    }

    pub fn dancer(&self, c: usize) -> &[[f64; 3]] {
        &self.offsets[c]
    }
}

/// Draw standard-normal noise for the noised channels of every dancer and
/// frame (`C·L·148` values) using a Box–Muller transform for platform-stable
/// determinism.
pub fn draw_noise(dancers: usize, frames: usize, rng: &mut ChaCha12Rng) -> Vec<f64> {
    standard_normal(dancers * frames * NOISED_DIM, rng)
}

pub(crate) fn standard_normal(count: usize, rng: &mut ChaCha12Rng) -> Vec<f64> {
    let mut out = Vec::with_capacity(count + 1);
    while out.len() < count {
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        out.push(r * c);
        out.push(r * s);
    }
    out.truncate(count);
    out
}

/// Forward noising that leaves the trajectory untouched: contact and pose
/// channels follow the closed form `√ᾱ_t·x_0 + √(1-ᾱ_t)·ε`, while the root
/// channels of every frame are set bitwise to the conditioning trajectory.
pub fn q_sample_conditional(
    x0: &GroupMotionSequence,
    trajectory: &TrajectorySequence,
    t: usize,
    schedule: &DiffusionSchedule,
    noise: &[f64],
) -> Result<GroupMotionSequence, TcdiffError> {
    let dancers = x0.dancers();
    let frames = x0.frames();
    if trajectory.dancers() != dancers || trajectory.frames() != frames {
        return Err(TcdiffError::Shape(format!(
            "trajectory {}x{} does not match motion {}x{}",
            trajectory.dancers(),
            trajectory.frames(),
            dancers,
            frames
        )));
    }
    if noise.len() != dancers * frames * NOISED_DIM {
        return Err(TcdiffError::Shape(format!(
            "noise has {} values, expected {}",
            noise.len(),
            dancers * frames * NOISED_DIM
        )));
    }
    if t < 1 || t > schedule.steps() {
        return Err(TcdiffError::Config(format!(
            "timestep {t} outside schedule 1..={}",
            schedule.steps()
        )));
    }
    let ab = schedule.alpha_bar(t);
    let (scale_x, scale_n) = (ab.sqrt(), (1.0 - ab).sqrt());
    let mut out = x0.clone();
    for c in 0..dancers {
        for l in 0..frames {
            let eps = &noise[(c * frames + l) * NOISED_DIM..(c * frames + l + 1) * NOISED_DIM];
            let frame = out.frame_mut(c, l);
            for k in 0..CONTACT_DIM {
                frame.contact[k] = scale_x * frame.contact[k] + scale_n * eps[k];
            }
            for k in 0..POSE_DIM {
                frame.pose[k] = scale_x * frame.pose[k] + scale_n * eps[CONTACT_DIM + k];
            }
            frame.root = trajectory.position(c, l);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::schedule::ScheduleKind;
    use crate::motion::MotionFrame;
    use rand::SeedableRng;

    fn fixture(dancers: usize, frames: usize) -> (GroupMotionSequence, TrajectorySequence) {
        let mut seq = GroupMotionSequence::zeros(dancers, frames, 30.0);
        for c in 0..dancers {
            for l in 0..frames {
                *seq.frame_mut(c, l) = MotionFrame::identity_pose();
                seq.frame_mut(c, l).root = [c as f64, 0.9, l as f64 * 0.1];
                seq.frame_mut(c, l).contact = [1.0, 0.0, 1.0, 0.0];
            }
        }
        let traj = TrajectorySequence::new(
            (0..dancers)
                .map(|c| (0..frames).map(|l| [c as f64 + 0.5, 0.9, l as f64 * 0.1]).collect())
                .collect(),
            30.0,
        )
        .unwrap();
        (seq, traj)
    }

    #[test]
    fn root_channels_match_trajectory_bitwise_for_all_t() {
        let (x0, traj) = fixture(2, 5);
        let schedule = DiffusionSchedule::new(ScheduleKind::Cosine, 50).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for t in 1..=50 {
            let noise = draw_noise(2, 5, &mut rng);
            let xt = q_sample_conditional(&x0, &traj, t, &schedule, &noise).unwrap();
            for c in 0..2 {
                for l in 0..5 {
                    assert_eq!(xt.frame(c, l).root, traj.position(c, l));
                }
            }
        }
    }

    #[test]
    fn degenerate_schedule_is_identity_on_noised_dims() {
        let (x0, traj) = fixture(1, 3);
        let schedule = DiffusionSchedule::from_betas(vec![0.0; 10]);
        let noise = vec![0.3; NOISED_DIM * 3];
        let xt = q_sample_conditional(&x0, &traj, 5, &schedule, &noise).unwrap();
        for l in 0..3 {
            assert_eq!(xt.frame(0, l).contact, x0.frame(0, l).contact);
            assert_eq!(xt.frame(0, l).pose, x0.frame(0, l).pose);
        }
    }

    #[test]
    fn moments_match_closed_form() {
        // pooled over 10k draws and all noised dims: mean ≈ √ᾱ·x0 (x0 = 1
        // on contacts via fixture? use uniform x0 = 0.7), var ≈ 1-ᾱ
        let frames = 2;
        let mut x0 = GroupMotionSequence::zeros(1, frames, 30.0);
        for l in 0..frames {
            x0.frame_mut(0, l).contact = [0.7; 4];
            x0.frame_mut(0, l).pose = vec![0.7; POSE_DIM];
        }
        let traj = TrajectorySequence::new(vec![vec![[0.0; 3]; frames]], 30.0).unwrap();
        let schedule = DiffusionSchedule::new(ScheduleKind::Cosine, 50).unwrap();
        let t = 25;
        let ab = schedule.alpha_bar(t);
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let draws = 10_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        let mut n = 0usize;
        for _ in 0..draws {
            let noise = draw_noise(1, frames, &mut rng);
            let xt = q_sample_conditional(&x0, &traj, t, &schedule, &noise).unwrap();
            for l in 0..frames {
                for v in xt.frame(0, l).contact.iter().chain(xt.frame(0, l).pose.iter()) {
                    sum += v;
                    sumsq += v * v;
                    n += 1;
                }
            }
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        let expect_mean = ab.sqrt() * 0.7;
        let expect_var = 1.0 - ab;
        assert!(
            (mean - expect_mean).abs() / expect_mean.abs() < 0.02,
            "mean {mean} vs {expect_mean}"
        );
        assert!(
            (var - expect_var).abs() / expect_var < 0.02,
            "var {var} vs {expect_var}"
        );
    }

    #[test]
    fn shape_errors() {
        let (x0, traj) = fixture(2, 4);
        let schedule = DiffusionSchedule::new(ScheduleKind::Cosine, 10).unwrap();
        assert!(q_sample_conditional(&x0, &traj, 1, &schedule, &[0.0; 3]).is_err());
        assert!(q_sample_conditional(&x0, &traj, 11, &schedule, &vec![0.0; 2 * 4 * NOISED_DIM]).is_err());
        let small = TrajectorySequence::new(vec![vec![[0.0; 3]; 4]], 30.0).unwrap();
        assert!(q_sample_conditional(&x0, &small, 1, &schedule, &vec![0.0; 2 * 4 * NOISED_DIM]).is_err());
    }

    #[test]
    fn offsets_start_at_zero() {
        let traj = TrajectorySequence::new(
            vec![vec![[0.0, 0.0, 0.0], [0.5, 0.0, 0.25], [1.5, 0.0, 0.25]]],
            30.0,
        )
        .unwrap();
        let v = TrajectoryOffsets::from_trajectory(&traj);
        assert_eq!(v.dancer(0)[0], [0.0; 3]);
        assert_eq!(v.dancer(0)[1], [0.5, 0.0, 0.25]);
        assert_eq!(v.dancer(0)[2], [1.0, 0.0, 0.0]);
    }
}
