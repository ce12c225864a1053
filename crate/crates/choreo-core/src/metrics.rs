//! Evaluation metrics: group-level GMR, GMC, TIF and single-dancer FID,
//! Div, MMC, PFC, built on a Fréchet-distance kernel over kinetic features.
//!
//! Set-level metrics summarize motions as Gaussians over kinetic features
//! (per-joint mean squared forward-kinematic velocity); per-sequence metrics
//! work on joint velocities directly. Everything is deterministic and uses
//! fixed reduction orders.

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::audio::MusicFeatureSequence;
use crate::dbn::TrajectorySequence;
use crate::motion::{fk_sequence, joint_velocities, GroupMotionSequence, MotionFrame, Skeleton};

/// Default proximity radius for the trajectory intersection frequency:
/// roughly half a human's width, in meters. A frame counts as a violation
/// when two roots come within twice this radius on the ground plane.
pub const TIF_RADIUS: f64 = 0.2;

/// Default beat-alignment bandwidth, in frames.
pub const MMC_SIGMA: f64 = 3.0;

/// Errors from metric evaluation.
#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("feature widths disagree: {0} vs {1}")]
    WidthMismatch(usize, usize),
    #[error("covariance is not symmetric (deviation {0:.3e})")]
    NotSymmetric(f64),
    #[error("{0}")]
    Shape(String),
    #[error("music has no beats")]
    NoBeats,
    #[error(transparent)]
    Motion(#[from] crate::motion::MotionError),
}

/// Gaussian summary of a feature set.
#[derive(Debug, Clone)]
pub struct FeatureDistribution {
    mean: Vec<f64>,
    cov: Vec<f64>, // row-major width × width
    width: usize,
}

impl FeatureDistribution {
    pub fn new(mean: Vec<f64>, cov: Vec<f64>) -> Result<Self, MetricsError> {
        let width = mean.len();
        if cov.len() != width * width {
            return Err(MetricsError::WidthMismatch(cov.len(), width * width));
        }
        let mut dev: f64 = 0.0;
        for i in 0..width {
            for j in 0..width {
                dev = dev.max((cov[i * width + j] - cov[j * width + i]).abs());
            }
        }
        if dev > 1e-10 {
            return Err(MetricsError::NotSymmetric(dev));
        }
        Ok(FeatureDistribution { mean, cov, width })
    }

    /// Fit mean and unbiased covariance from feature rows.
    pub fn fit(samples: &[Vec<f64>]) -> Result<Self, MetricsError> {
        if samples.len() < 2 {
            return Err(MetricsError::TooFewSamples {
                need: 2,
                got: samples.len(),
            });
        }
        let width = samples[0].len();
        for s in samples {
            if s.len() != width {
                return Err(MetricsError::WidthMismatch(s.len(), width));
            }
        }
        let n = samples.len() as f64;
        let mut mean = vec![0.0; width];
        for s in samples {
            for (m, v) in mean.iter_mut().zip(s.iter()) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= n;
        }
        let mut cov = vec![0.0; width * width];
        for s in samples {
            for i in 0..width {
                let di = s[i] - mean[i];
                for j in i..width {
                    cov[i * width + j] += di * (s[j] - mean[j]);
                }
            }
        }
        for i in 0..width {
            for j in i..width {
                let v = cov[i * width + j] / (n - 1.0);
                cov[i * width + j] = v;
                cov[j * width + i] = v;
            }
        }
        FeatureDistribution::new(mean, cov)
    }

    pub fn width(&self) -> usize {
        self.width
    }
}

/// Symmetric PSD square root via eigendecomposition, clamping negative
/// eigenvalues (finite-sample covariances can be marginally indefinite).
fn sqrtm_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// Squared Fréchet distance between Gaussians:
/// `‖μ₁-μ₂‖² + Tr(Σ₁+Σ₂-2(Σ₁Σ₂)^½)`.
pub fn frechet_distance(a: &FeatureDistribution, b: &FeatureDistribution) -> Result<f64, MetricsError> {
    if a.width != b.width {
        return Err(MetricsError::WidthMismatch(a.width, b.width));
    }
    let d = a.width;
    let mean_term: f64 = a
        .mean
        .iter()
        .zip(b.mean.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    let ca = DMatrix::from_row_slice(d, d, &a.cov);
    let cb = DMatrix::from_row_slice(d, d, &b.cov);
    // (Σ₁Σ₂)^½ computed through the symmetric form (Σ₁^½ Σ₂ Σ₁^½)^½
    let sa = sqrtm_psd(&ca);
    let inner = sqrtm_psd(&(&sa * &cb * &sa));
    let trace_term = ca.trace() + cb.trace() - 2.0 * inner.trace();
    Ok((mean_term + trace_term).max(0.0))
}

/// Kinetic features of one dancer: per joint, the mean over frames of the
/// squared velocity magnitude.
pub fn kinetic_features(
    frames: &[MotionFrame],
    skeleton: &Skeleton,
    fps: f64,
) -> Result<Vec<f64>, MetricsError> {
    let positions = fk_sequence(skeleton, frames)?;
    let vel = joint_velocities(&positions, fps)?;
    let n = skeleton.joints();
    let l = frames.len();
    let mut feats = vec![0.0; n];
    for frame in &vel {
        for (j, v) in frame.iter().enumerate() {
            feats[j] += v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        }
    }
    for f in feats.iter_mut() {
        *f /= l as f64;
    }
    Ok(feats)
}

fn per_dancer_features(
    set: &[GroupMotionSequence],
    skeleton: &Skeleton,
    fps: f64,
) -> Result<Vec<Vec<f64>>, MetricsError> {
    let mut out = Vec::new();
    for seq in set {
        for c in 0..seq.dancers() {
            out.push(kinetic_features(seq.dancer(c), skeleton, fps)?);
        }
    }
    Ok(out)
}

/// Fréchet distance between per-dancer kinetic feature distributions.
pub fn metric_fid(
    generated: &[GroupMotionSequence],
    reference: &[GroupMotionSequence],
    skeleton: &Skeleton,
    fps: f64,
) -> Result<f64, MetricsError> {
    let a = FeatureDistribution::fit(&per_dancer_features(generated, skeleton, fps)?)?;
    let b = FeatureDistribution::fit(&per_dancer_features(reference, skeleton, fps)?)?;
    frechet_distance(&a, &b)
}

/// Group feature of one sequence: dancer-averaged kinetic features plus the
/// mean and standard deviation of pairwise root distances over frames.
/// Invariant to dancer relabeling by construction.
fn group_feature(seq: &GroupMotionSequence, skeleton: &Skeleton, fps: f64) -> Result<Vec<f64>, MetricsError> {
    let c = seq.dancers();
    let n = skeleton.joints();
    let mut mean_kin = vec![0.0; n];
    for dancer in 0..c {
        let k = kinetic_features(seq.dancer(dancer), skeleton, fps)?;
        for (m, v) in mean_kin.iter_mut().zip(k.iter()) {
            *m += v / c as f64;
        }
    }
    let mut dists = Vec::new();
    for f in 0..seq.frames() {
        for i in 0..c {
            for j in i + 1..c {
                let a = seq.frame(i, f).root;
                let b = seq.frame(j, f).root;
                let dx = a[0] - b[0];
                let dy = a[1] - b[1];
                let dz = a[2] - b[2];
                dists.push((dx * dx + dy * dy + dz * dz).sqrt());
            }
        }
    }
    let (mut mean_d, mut std_d) = (0.0, 0.0);
    if !dists.is_empty() {
        mean_d = dists.iter().sum::<f64>() / dists.len() as f64;
        let var = dists.iter().map(|d| (d - mean_d) * (d - mean_d)).sum::<f64>() / dists.len() as f64;
        std_d = var.sqrt();
    }
    let mut feat = mean_kin;
    feat.push(mean_d);
    feat.push(std_d);
    Ok(feat)
}

/// Group motion realism: Fréchet distance between group-feature
/// distributions of the two sets.
pub fn metric_gmr(
    generated: &[GroupMotionSequence],
    reference: &[GroupMotionSequence],
    skeleton: &Skeleton,
    fps: f64,
) -> Result<f64, MetricsError> {
    let feats = |set: &[GroupMotionSequence]| -> Result<Vec<Vec<f64>>, MetricsError> {
        set.iter().map(|s| group_feature(s, skeleton, fps)).collect()
    };
    let a = FeatureDistribution::fit(&feats(generated)?)?;
    let b = FeatureDistribution::fit(&feats(reference)?)?;
    frechet_distance(&a, &b)
}

/// Group movement correlation in `[0, 100]`: dancer pairs are scored by the
/// zero-lag normalized cross-correlation of their flattened joint-velocity
/// sequences, mapped through `100·max(ρ, 0)` and averaged. Zero-variance
/// dancers are skipped; if every pair is skipped the group is identically
/// still and scores 100.
pub fn metric_gmc(seq: &GroupMotionSequence, skeleton: &Skeleton, fps: f64) -> Result<f64, MetricsError> {
    let c = seq.dancers();
    if c < 2 || seq.frames() < 2 {
        return Err(MetricsError::Shape("GMC needs C >= 2 and L >= 2".into()));
    }
    let mut flat = Vec::with_capacity(c);
    for dancer in 0..c {
        let pos = fk_sequence(skeleton, seq.dancer(dancer))?;
        let vel = joint_velocities(&pos, fps)?;
        let v: Vec<f64> = vel.iter().flatten().flatten().copied().collect();
        flat.push(v);
    }
    let norms: Vec<f64> = flat
        .iter()
        .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..c {
        for j in i + 1..c {
            if norms[i] == 0.0 || norms[j] == 0.0 {
                continue;
            }
            let dot: f64 = flat[i].iter().zip(flat[j].iter()).map(|(a, b)| a * b).sum();
            let rho = dot / (norms[i] * norms[j]);
            total += 100.0 * rho.max(0.0);
            pairs += 1;
        }
    }
    if pairs == 0 {
        return Ok(100.0); // identical stillness
    }
    Ok(total / pairs as f64)
}

/// Trajectory intersection frequency on root trajectories: the fraction of
/// frames where some dancer pair's ground-plane distance drops below
/// `2·radius`.
pub fn metric_tif_trajectory(traj: &TrajectorySequence, radius: f64) -> Result<f64, MetricsError> {
    let c = traj.dancers();
    if c < 2 {
        return Err(MetricsError::Shape("TIF needs at least two dancers".into()));
    }
    let l = traj.frames();
    let mut violations = 0usize;
    for f in 0..l {
        'frame: for i in 0..c {
            for j in i + 1..c {
                let a = traj.position(i, f);
                let b = traj.position(j, f);
                let dx = a[0] - b[0];
                let dz = a[2] - b[2];
                if (dx * dx + dz * dz).sqrt() < 2.0 * radius {
                    violations += 1;
                    break 'frame;
                }
            }
        }
    }
    Ok(violations as f64 / l as f64)
}

/// TIF of a group motion's root channels.
pub fn metric_tif(seq: &GroupMotionSequence, radius: f64) -> Result<f64, MetricsError> {
    let traj = TrajectorySequence::new(seq.root_trajectory(), seq.fps)
        .map_err(|e| MetricsError::Shape(e.to_string()))?;
    metric_tif_trajectory(&traj, radius)
}

/// Mean pairwise Euclidean distance between kinetic feature vectors.
pub(crate) fn diversity_from_features(features: &[Vec<f64>]) -> Result<f64, MetricsError> {
    let n = features.len();
    if n < 2 {
        return Err(MetricsError::TooFewSamples { need: 2, got: n });
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let d: f64 = features[i]
                .iter()
                .zip(features[j].iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            total += d.sqrt();
        }
    }
    Ok(total * 2.0 / (n * (n - 1)) as f64)
}

/// Generation diversity: mean pairwise distance between the per-dancer
/// kinetic features of the set.
pub fn metric_div(set: &[GroupMotionSequence], skeleton: &Skeleton, fps: f64) -> Result<f64, MetricsError> {
    diversity_from_features(&per_dancer_features(set, skeleton, fps)?)
}

/// Kinematic beats: frames that are strict local minima of the mean joint
/// speed.
fn kinematic_beats(frames: &[MotionFrame], skeleton: &Skeleton, fps: f64) -> Result<Vec<usize>, MetricsError> {
    let pos = fk_sequence(skeleton, frames)?;
    let vel = joint_velocities(&pos, fps)?;
    let speed: Vec<f64> = vel
        .iter()
        .map(|frame| {
            frame
                .iter()
                .map(|v| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt())
                .sum::<f64>()
                / frame.len() as f64
        })
        .collect();
    Ok((1..speed.len().saturating_sub(1))
        .filter(|&i| speed[i] < speed[i - 1] && speed[i] < speed[i + 1])
        .collect())
}

/// Motion-music consistency in `[0, 1]`: every music beat contributes
/// `exp(-d²/2σ²)` where `d` is the distance in frames to the nearest
/// kinematic beat; a dancer with no kinematic beats contributes 0. Averaged
/// over dancers.
pub fn metric_mmc(
    seq: &GroupMotionSequence,
    music: &MusicFeatureSequence,
    skeleton: &Skeleton,
    sigma: f64,
) -> Result<f64, MetricsError> {
    let beats = music.beat_frames();
    if beats.is_empty() {
        return Err(MetricsError::NoBeats);
    }
    let mut total = 0.0;
    for c in 0..seq.dancers() {
        let kin = kinematic_beats(seq.dancer(c), skeleton, seq.fps)?;
        let mut score = 0.0;
        if !kin.is_empty() {
            for &b in &beats {
                let nearest = kin
                    .iter()
                    .map(|&k| (k as f64 - b as f64).abs())
                    .fold(f64::INFINITY, f64::min);
                score += (-(nearest * nearest) / (2.0 * sigma * sigma)).exp();
            }
            score /= beats.len() as f64;
        }
        total += score;
    }
    Ok(total / seq.dancers() as f64)
}

/// Physical foot contact score (×100, lower is better): frames where the
/// center of mass accelerates while both ankles move are penalized by
/// `s_i = ‖a_i^COM,ground‖·‖v_i^L‖·‖v_i^R‖`, normalized by the peak COM
/// acceleration. A clip whose COM never accelerates scores 0; the
/// stationarity test uses a 1e-9 m/s² floor so constant-velocity clips do
/// not amplify rounding noise. Averaged over dancers.
pub fn metric_pfc(seq: &GroupMotionSequence, skeleton: &Skeleton, fps: f64) -> Result<f64, MetricsError> {
    if seq.frames() < 3 {
        return Err(MetricsError::Shape("PFC needs at least three frames".into()));
    }
    let feet = skeleton.foot_joints();
    if feet.len() < 2 {
        return Err(MetricsError::Shape("skeleton has no ankle joints".into()));
    }
    let (l_ankle, r_ankle) = (feet[0], feet[1]);
    let n = skeleton.joints() as f64;
    let mut total = 0.0;
    for c in 0..seq.dancers() {
        let pos = fk_sequence(skeleton, seq.dancer(c))?;
        let vel = joint_velocities(&pos, fps)?;
        let com_vel: Vec<[f64; 3]> = vel
            .iter()
            .map(|frame| {
                let mut acc = [0.0; 3];
                for v in frame {
                    for k in 0..3 {
                        acc[k] += v[k] / n;
                    }
                }
                acc
            })
            .collect();
        let mut score_sum = 0.0;
        let mut max_acc: f64 = 0.0;
        let mut count = 0usize;
        for i in 1..com_vel.len() {
            let a = [
                (com_vel[i][0] - com_vel[i - 1][0]) * fps,
                (com_vel[i][1] - com_vel[i - 1][1]) * fps,
                (com_vel[i][2] - com_vel[i - 1][2]) * fps,
            ];
            let a_norm = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
            let a_ground = (a[0] * a[0] + a[2] * a[2]).sqrt();
            let vl = vel[i][l_ankle];
            let vr = vel[i][r_ankle];
            let nl = (vl[0] * vl[0] + vl[1] * vl[1] + vl[2] * vl[2]).sqrt();
            let nr = (vr[0] * vr[0] + vr[1] * vr[1] + vr[2] * vr[2]).sqrt();
            score_sum += a_ground * nl * nr;
            max_acc = max_acc.max(a_norm);
            count += 1;
        }
        if max_acc > 1e-9 {
            total += score_sum / count as f64 / max_acc * 100.0;
        }
    }
    Ok(total / seq.dancers() as f64)
}

/// One evaluation run over a generated set against a reference set.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MetricsReport {
    pub gmr: f64,
    pub gmc: f64,
    pub tif: f64,
    pub fid: f64,
    pub div: f64,
    pub mmc: f64,
    pub pfc: f64,
}

impl MetricsReport {
    pub fn compute(
        generated: &[GroupMotionSequence],
        reference: &[GroupMotionSequence],
        music: &[MusicFeatureSequence],
        skeleton: &Skeleton,
        fps: f64,
        tif_radius: f64,
    ) -> Result<MetricsReport, MetricsError> {
        if generated.len() != music.len() {
            return Err(MetricsError::Shape(format!(
                "{} generated sequences but {} music sequences",
                generated.len(),
                music.len()
            )));
        }
        let n = generated.len() as f64;
        let mut gmc = 0.0;
        let mut tif = 0.0;
        let mut mmc = 0.0;
        let mut pfc = 0.0;
        for (seq, m) in generated.iter().zip(music.iter()) {
            gmc += metric_gmc(seq, skeleton, fps)?;
            tif += metric_tif(seq, tif_radius)?;
            mmc += metric_mmc(seq, m, skeleton, MMC_SIGMA)?;
            pfc += metric_pfc(seq, skeleton, fps)?;
        }
        let report = MetricsReport {
            gmr: metric_gmr(generated, reference, skeleton, fps)?,
            gmc: gmc / n,
            tif: tif / n,
            fid: metric_fid(generated, reference, skeleton, fps)?,
            div: metric_div(generated, skeleton, fps)?,
            mmc: mmc / n,
            pfc: pfc / n,
        };
        report.validate()?;
        Ok(report)
    }

    fn validate(&self) -> Result<(), MetricsError> {
        let all = [self.gmr, self.gmc, self.tif, self.fid, self.div, self.mmc, self.pfc];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(MetricsError::Shape("non-finite metric value".into()));
        }
        if !(0.0..=1.0).contains(&self.tif) {
            return Err(MetricsError::Shape(format!("TIF {} outside [0,1]", self.tif)));
        }
        if !(0.0..=100.0).contains(&self.gmc) {
            return Err(MetricsError::Shape(format!("GMC {} outside [0,100]", self.gmc)));
        }
        Ok(())
    }
}

impl std::fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "GMR={:.6}", self.gmr)?;
        writeln!(f, "GMC={:.6}", self.gmc)?;
        writeln!(f, "TIF={:.6}", self.tif)?;
        writeln!(f, "FID={:.6}", self.fid)?;
        writeln!(f, "Div={:.6}", self.div)?;
        writeln!(f, "MMC={:.6}", self.mmc)?;
        write!(f, "PFC={:.6}", self.pfc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::FEATURE_DIM;
    use crate::motion::{matrix_to_rot6d, rot_z};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn dist1(mean: f64, var: f64) -> FeatureDistribution {
        FeatureDistribution::new(vec![mean], vec![var]).unwrap()
    }

    #[test]
    fn frechet_identity_and_univariate_cases() {
        let a = dist1(0.0, 1.0);
        assert!(frechet_distance(&a, &a).unwrap() <= 1e-6);
        // N(0,1) vs N(1,1): (0-1)² + (1-1)² = 1
        let d = frechet_distance(&a, &dist1(1.0, 1.0)).unwrap();
        assert!((d - 1.0).abs() < 1e-9, "{d}");
        // N(0,1) vs N(0,4): (σ₁-σ₂)² = (1-2)² = 1
        let d = frechet_distance(&a, &dist1(0.0, 4.0)).unwrap();
        assert!((d - 1.0).abs() < 1e-9, "{d}");
    }

    #[test]
    fn frechet_symmetry_on_random_psd() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        for _ in 0..20 {
            let d = 4;
            let make = |rng: &mut ChaCha12Rng| {
                let samples: Vec<Vec<f64>> = (0..12)
                    .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .collect();
                FeatureDistribution::fit(&samples).unwrap()
            };
            let a = make(&mut rng);
            let b = make(&mut rng);
            let ab = frechet_distance(&a, &b).unwrap();
            let ba = frechet_distance(&b, &a).unwrap();
            assert!((ab - ba).abs() < 1e-8);
            assert!(ab >= 0.0);
            assert!(frechet_distance(&a, &a).unwrap() < 1e-9);
        }
    }

    fn static_motion(c: usize, l: usize) -> GroupMotionSequence {
        let mut seq = GroupMotionSequence::zeros(c, l, 30.0);
        for dancer in 0..c {
            for f in 0..l {
                *seq.frame_mut(dancer, f) = MotionFrame::identity_pose();
                seq.frame_mut(dancer, f).root = [dancer as f64 * 2.0, 0.9, 0.0];
            }
        }
        seq
    }

    #[test]
    fn kinetic_features_static_motion_is_zero() {
        let skel = Skeleton::canonical();
        let seq = static_motion(1, 5);
        let k = kinetic_features(seq.dancer(0), &skel, 30.0).unwrap();
        assert!(k.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn kinetic_features_quadratic_in_velocity() {
        let skel = Skeleton::canonical();
        let make = |step: f64| {
            let mut seq = static_motion(1, 6);
            for f in 0..6 {
                seq.frame_mut(0, f).root = [step * f as f64, 0.9, 0.0];
            }
            kinetic_features(seq.dancer(0), &skel, 30.0).unwrap()
        };
        let k1 = make(0.01);
        let k2 = make(0.02);
        for (a, b) in k1.iter().zip(k2.iter()) {
            assert!((b - 4.0 * a).abs() < 1e-9);
        }
    }

    #[test]
    fn oscillating_arm_moves_only_arm_chain() {
        let skel = Skeleton::canonical();
        let mut seq = static_motion(1, 12);
        for f in 0..12 {
            let angle = 0.6 * (f as f64 * 0.7).sin();
            let six = matrix_to_rot6d(&rot_z(angle)).unwrap();
            // joint 16 = left shoulder; its descendants 18, 20, 22 move
            seq.frame_mut(0, f).pose[6 * 16..6 * 16 + 6].copy_from_slice(&six);
        }
        let k = kinetic_features(seq.dancer(0), &skel, 30.0).unwrap();
        for (j, v) in k.iter().enumerate() {
            if [18, 20, 22].contains(&j) {
                assert!(*v > 1e-6, "arm joint {j} should move");
            } else {
                assert!(*v < 1e-18, "joint {j} should be still, got {v}");
            }
        }
    }

    fn wiggly_motion(c: usize, l: usize, amplitude: f64, seed: u64) -> GroupMotionSequence {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut seq = static_motion(c, l);
        for dancer in 0..c {
            let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            for f in 0..l {
                let angle = amplitude * (phase + f as f64 * 0.8).sin();
                let six = matrix_to_rot6d(&rot_z(angle)).unwrap();
                seq.frame_mut(dancer, f).pose[6 * 16..6 * 16 + 6].copy_from_slice(&six);
                seq.frame_mut(dancer, f).pose[6 * 17..6 * 17 + 6].copy_from_slice(&six);
            }
        }
        seq
    }

    #[test]
    fn fid_and_gmr_identical_sets_are_zero() {
        let skel = Skeleton::canonical();
        let set: Vec<GroupMotionSequence> = (0..4).map(|i| wiggly_motion(2, 8, 0.5, i)).collect();
        assert!(metric_fid(&set, &set, &skel, 30.0).unwrap() <= 1e-6);
        assert!(metric_gmr(&set, &set, &skel, 30.0).unwrap() <= 1e-6);
    }

    #[test]
    fn gmr_invariant_to_dancer_relabeling() {
        let skel = Skeleton::canonical();
        let set: Vec<GroupMotionSequence> = (0..4).map(|i| wiggly_motion(3, 8, 0.5, i)).collect();
        let permuted: Vec<GroupMotionSequence> = set
            .iter()
            .map(|s| {
                let mut frames = Vec::new();
                for c in [2usize, 0, 1] {
                    frames.extend(s.dancer(c).to_vec());
                }
                GroupMotionSequence::new(3, 8, 30.0, frames).unwrap()
            })
            .collect();
        let base = metric_gmr(&set, &set, &skel, 30.0).unwrap();
        let relabeled = metric_gmr(&permuted, &set, &skel, 30.0).unwrap();
        assert!((base - relabeled).abs() < 1e-9, "{base} vs {relabeled}");
    }

    #[test]
    fn fid_separates_different_amplitudes() {
        let skel = Skeleton::canonical();
        let small: Vec<GroupMotionSequence> = (0..4).map(|i| wiggly_motion(2, 8, 0.3, i)).collect();
        let large: Vec<GroupMotionSequence> = (0..4).map(|i| wiggly_motion(2, 8, 0.9, 100 + i)).collect();
        assert!(metric_fid(&small, &large, &skel, 30.0).unwrap() > 1e-3);
    }

    #[test]
    fn gmc_extremes() {
        let skel = Skeleton::canonical();
        // identical motion: rho = 1 -> 100
        let mut seq = static_motion(2, 8);
        for dancer in 0..2 {
            for f in 0..8 {
                seq.frame_mut(dancer, f).root = [dancer as f64 * 2.0 + 0.1 * (f as f64).sin(), 0.9, 0.0];
            }
        }
        let gmc = metric_gmc(&seq, &skel, 30.0).unwrap();
        assert!((gmc - 100.0).abs() < 1e-9);
        // dancer 2 mirrors dancer 1's velocities: rho = -1 -> clamped to 0
        let mut seq = static_motion(2, 8);
        for f in 0..8 {
            let off = 0.1 * (f as f64).sin();
            seq.frame_mut(0, f).root = [off, 0.9, 0.0];
            seq.frame_mut(1, f).root = [2.0 - off, 0.9, 0.0];
        }
        let gmc = metric_gmc(&seq, &skel, 30.0).unwrap();
        assert!(gmc.abs() < 1e-9);
        // all dancers perfectly still: defined as 100
        let gmc = metric_gmc(&static_motion(3, 5), &skel, 30.0).unwrap();
        assert_eq!(gmc, 100.0);
    }

    #[test]
    fn gmc_independent_motion_is_small() {
        let skel = Skeleton::canonical();
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let mut total = 0.0;
        let runs = 10;
        for _ in 0..runs {
            let mut seq = static_motion(2, 30);
            for dancer in 0..2 {
                for f in 0..30 {
                    seq.frame_mut(dancer, f).root = [
                        dancer as f64 * 3.0 + rng.gen_range(-0.05..0.05),
                        0.9,
                        rng.gen_range(-0.05..0.05),
                    ];
                }
            }
            total += metric_gmc(&seq, &skel, 30.0).unwrap();
        }
        let mean = total / runs as f64;
        assert!(mean < 20.0, "independent motion should decorrelate, got {mean}");
    }

    #[test]
    fn gmc_relabeling_invariance() {
        let skel = Skeleton::canonical();
        let seq = wiggly_motion(3, 10, 0.6, 5);
        let mut frames = Vec::new();
        for c in [1usize, 2, 0] {
            frames.extend(seq.dancer(c).to_vec());
        }
        let permuted = GroupMotionSequence::new(3, 10, 30.0, frames).unwrap();
        let a = metric_gmc(&seq, &skel, 30.0).unwrap();
        let b = metric_gmc(&permuted, &skel, 30.0).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn tif_cases() {
        // circle of radius 2, never moving: no violations
        let c = 4;
        let traj = TrajectorySequence::new(
            (0..c)
                .map(|i| {
                    let a = i as f64 * std::f64::consts::TAU / c as f64;
                    vec![[2.0 * a.cos(), 0.9, 2.0 * a.sin()]; 10]
                })
                .collect(),
            30.0,
        )
        .unwrap();
        assert_eq!(metric_tif_trajectory(&traj, TIF_RADIUS).unwrap(), 0.0);

        // two dancers at the same spot throughout: 1
        let traj = TrajectorySequence::new(vec![vec![[0.0, 0.9, 0.0]; 7]; 2], 30.0).unwrap();
        assert_eq!(metric_tif_trajectory(&traj, TIF_RADIUS).unwrap(), 1.0);

        // constructed crossing: overlap during exactly 10 of 100 frames
        let l = 100;
        let mut a = Vec::new();
        let mut b = Vec::new();
        for f in 0..l {
            // relative distance shrinks by 0.08 per frame, offset keeps
            // every frame strictly away from the 0.4 boundary
            let x = 4.0 - 0.08 * f as f64 - 0.036;
            a.push([x / 2.0, 0.9, 0.0]);
            b.push([-x / 2.0, 0.9, 0.0]);
        }
        let traj = TrajectorySequence::new(vec![a, b], 30.0).unwrap();
        let expected: f64 = (0..l)
            .filter(|&f| (4.0 - 0.08 * f as f64 - 0.036).abs() < 0.4)
            .count() as f64
            / l as f64;
        assert_eq!(expected, 0.10); // window calibration
        assert_eq!(metric_tif_trajectory(&traj, TIF_RADIUS).unwrap(), 0.10);
    }

    #[test]
    fn tif_translation_invariance() {
        let traj = TrajectorySequence::new(
            vec![
                vec![[0.0, 0.9, 0.0], [0.3, 0.9, 0.0]],
                vec![[1.0, 0.9, 1.0], [0.5, 0.9, 0.3]],
            ],
            30.0,
        )
        .unwrap();
        let shifted = TrajectorySequence::new(
            traj.positions()
                .iter()
                .map(|d| d.iter().map(|p| [p[0] + 11.0, p[1], p[2] - 4.0]).collect())
                .collect(),
            30.0,
        )
        .unwrap();
        assert_eq!(
            metric_tif_trajectory(&traj, TIF_RADIUS).unwrap(),
            metric_tif_trajectory(&shifted, TIF_RADIUS).unwrap()
        );
    }

    #[test]
    fn diversity_cases() {
        assert!(diversity_from_features(&vec![vec![1.0, 2.0]; 5]).unwrap() < 1e-15);
        let d = diversity_from_features(&[vec![0.0, 0.0], vec![3.0, 0.0]]).unwrap();
        assert!((d - 3.0).abs() < 1e-12);
        let feats = vec![vec![0.5, 1.0], vec![2.0, -1.0], vec![0.0, 0.25]];
        let scaled: Vec<Vec<f64>> = feats.iter().map(|f| f.iter().map(|v| 2.0 * v).collect()).collect();
        let a = diversity_from_features(&feats).unwrap();
        let b = diversity_from_features(&scaled).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-12);
        assert!(diversity_from_features(&[vec![1.0]]).is_err());
    }

    /// Motion whose mean joint speed has strict local minima exactly at
    /// `minima`; the dancer glides along x with a speed profile dipping at
    /// those frames.
    fn motion_with_speed_minima(l: usize, minima: &[usize]) -> GroupMotionSequence {
        // per-frame steps in exact 1/32 m units so plateaus are exactly flat
        let steps: Vec<f64> = (0..l)
            .map(|i| {
                let d = minima
                    .iter()
                    .map(|&m| (m as i64 - i as i64).abs())
                    .min()
                    .unwrap_or(0)
                    .min(6);
                (8 + 4 * d) as f64
            })
            .collect();
        let mut seq = static_motion(1, l);
        let mut units = 0.0;
        for f in 0..l {
            if f > 0 {
                units += steps[f];
            }
            seq.frame_mut(0, f).root = [units / 32.0, 0.9, 0.0];
        }
        seq
    }

    fn music_with_beats(l: usize, beats: &[usize]) -> MusicFeatureSequence {
        let mut data = vec![0.0; l * FEATURE_DIM];
        for &b in beats {
            data[b * FEATURE_DIM + crate::audio::BEAT_COL] = 1.0;
        }
        MusicFeatureSequence::new(l, 30.0, data).unwrap()
    }

    #[test]
    fn mmc_perfect_alignment() {
        let skel = Skeleton::canonical();
        let minima = [10usize, 20, 30];
        let seq = motion_with_speed_minima(40, &minima);
        let music = music_with_beats(40, &minima);
        let mmc = metric_mmc(&seq, &music, &skel, MMC_SIGMA).unwrap();
        assert!((mmc - 1.0).abs() < 1e-12, "{mmc}");
    }

    #[test]
    fn mmc_offset_by_sigma() {
        let skel = Skeleton::canonical();
        let kin = [13usize, 23, 33];
        let beats = [10usize, 20, 30];
        let seq = motion_with_speed_minima(40, &kin);
        let music = music_with_beats(40, &beats);
        let mmc = metric_mmc(&seq, &music, &skel, MMC_SIGMA).unwrap();
        assert!((mmc - (-0.5f64).exp()).abs() < 1e-9, "{mmc}");
    }

    #[test]
    fn mmc_far_beats_decay() {
        let skel = Skeleton::canonical();
        let seq = motion_with_speed_minima(60, &[50]);
        let music = music_with_beats(60, &[10]);
        // nearest kinematic beat is 40 frames away: far beyond 5σ
        let mmc = metric_mmc(&seq, &music, &skel, MMC_SIGMA).unwrap();
        assert!(mmc < 0.001, "{mmc}");
    }

    #[test]
    fn mmc_requires_beats() {
        let skel = Skeleton::canonical();
        let seq = motion_with_speed_minima(10, &[5]);
        let music = music_with_beats(10, &[]);
        assert!(matches!(metric_mmc(&seq, &music, &skel, MMC_SIGMA), Err(MetricsError::NoBeats)));
    }

    #[test]
    fn pfc_constant_glide_is_zero() {
        let skel = Skeleton::canonical();
        let mut seq = static_motion(1, 10);
        for f in 0..10 {
            // dyadic step keeps frame differences exactly constant
            seq.frame_mut(0, f).root = [0.25 * f as f64, 0.9, 0.0];
        }
        // constant velocity: COM never accelerates
        let pfc = metric_pfc(&seq, &skel, 30.0).unwrap();
        assert_eq!(pfc, 0.0);
    }

    #[test]
    fn pfc_slide_during_acceleration_is_positive() {
        let skel = Skeleton::canonical();
        let mut seq = static_motion(1, 12);
        for f in 0..12 {
            // quadratic position: constant acceleration with moving feet
            let x = 0.02 * (f as f64) * (f as f64);
            seq.frame_mut(0, f).root = [x, 0.9, 0.0];
        }
        let pfc = metric_pfc(&seq, &skel, 30.0).unwrap();
        assert!(pfc > 0.0, "{pfc}");
    }

    #[test]
    fn pfc_needs_three_frames() {
        let skel = Skeleton::canonical();
        assert!(metric_pfc(&static_motion(1, 2), &skel, 30.0).is_err());
    }
}
