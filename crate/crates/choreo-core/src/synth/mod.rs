//! Synthetic choreography: click-track audio, formation trajectories with
//! guaranteed clearance, beat-locked stepping with world-planted feet, and
//! oracle annotations (beats, contacts, crossing windows, moving joints)
//! that the rest of the test suite treats as ground truth.
//!
//! Everything is a closed-form function of the spec, so a sample is
//! bit-reproducible from `(spec, seed)` alone.

mod gait;

pub use gait::{lift_profile, smootherstep, solve_leg, LegGeometry, ANKLE_PLANT_HEIGHT};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::audio::{extract_features, AudioClip, MusicFeatureSequence, StftConfig};
use crate::dbn::TrajectorySequence;
use crate::motion::{
    matrix_to_rot6d, rot_z, GroupMotionSequence, MotionFrame, Skeleton, CONTACT_DIM,
    CONTACT_HEIGHT_THRESH, CONTACT_SPEED_THRESH,
};

/// Starting arrangement of the group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formation {
    Line,
    Circle,
    Vee,
}

impl std::str::FromStr for Formation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "line" => Ok(Formation::Line),
            "circle" => Ok(Formation::Circle),
            "vee" => Ok(Formation::Vee),
            other => Err(format!("unknown formation {other:?}")),
        }
    }
}

/// How the formation evolves over the clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Maneuver {
    /// Stay in formation, stepping in place.
    Hold,
    /// Rotate the formation about its centroid at a walkable speed.
    Rotate,
    /// Pairs orbit their midpoints (a half turn completes a position swap).
    Swap,
    /// Two dancers walk through the formation center; their clearance is
    /// deliberately violated inside an annotated window.
    Cross,
}

impl std::str::FromStr for Maneuver {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hold" => Ok(Maneuver::Hold),
            "rotate" => Ok(Maneuver::Rotate),
            "swap" => Ok(Maneuver::Swap),
            "cross" => Ok(Maneuver::Cross),
            other => Err(format!("unknown maneuver {other:?}")),
        }
    }
}

/// Generator parameters.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub dancers: usize,
    pub frames: usize,
    pub fps: f64,
    pub bpm: f64,
    pub formation: Formation,
    pub maneuver: Maneuver,
    /// Arm swing amplitude in radians.
    pub limb_amplitude: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            dancers: 2,
            frames: 30,
            fps: 30.0,
            bpm: 120.0,
            formation: Formation::Circle,
            maneuver: Maneuver::Rotate,
            limb_amplitude: 0.5,
            seed: 0,
        }
    }
}

/// Ground-truth annotations emitted alongside each sample.
#[derive(Debug, Clone)]
pub struct OracleAnnotations {
    /// Frames on which a metronome beat falls.
    pub beat_frames: Vec<usize>,
    /// Frames where some pair's ground distance drops below the TIF
    /// threshold (non-empty only for the cross maneuver).
    pub crossing_frames: Vec<usize>,
    /// Joints whose world positions move during the clip.
    pub moving_joints: Vec<usize>,
    /// Per dancer, per frame contact labels derived from the closed-form
    /// foot paths via the threshold rule.
    pub contacts: Vec<Vec<[f64; CONTACT_DIM]>>,
}

/// One generated sample.
pub struct SyntheticSample {
    pub audio: AudioClip,
    pub features: MusicFeatureSequence,
    pub motion: GroupMotionSequence,
    pub trajectory: TrajectorySequence,
    pub annotations: OracleAnnotations,
}

/// Generator errors.
#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("infeasible formation: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Audio(#[from] crate::audio::AudioError),
    #[error("{0}")]
    Internal(String),
}

const SAMPLE_RATE: u32 = 22050;
const FORMATION_SPACING: f64 = 1.5;
const CLEARANCE: f64 = 0.6;
/// Walkable root speed bound, m/s.
const MAX_ROOT_SPEED: f64 = 0.5;
/// Lateral z offset of the crossing pair; tuned so the default 100-frame
/// cross violates the 0.4 m TIF threshold for 10 frames.
const CROSS_LATERAL: f64 = 0.3636;

/// Metronome click track covering exactly `frames` feature frames.
pub fn click_track(bpm: f64, frames: usize, fps: f64) -> Result<AudioClip, SynthError> {
    let cfg = StftConfig::for_fps(SAMPLE_RATE, fps)?;
    let n = cfg.samples_for_frames(frames);
    let mut samples = vec![0.0; n];
    let step = 60.0 / bpm;
    let burst = (0.02 * SAMPLE_RATE as f64) as usize;
    let mut k = 0usize;
    loop {
        let start = (k as f64 * step * SAMPLE_RATE as f64).round() as usize;
        if start >= n {
            break;
        }
        for j in 0..burst.min(n - start) {
            let t = j as f64 / SAMPLE_RATE as f64;
            samples[start + j] +=
                0.8 * (2.0 * std::f64::consts::PI * 2000.0 * t).sin() * (-t / 0.005).exp();
        }
        k += 1;
    }
    Ok(AudioClip::new(samples, SAMPLE_RATE)?)
}

/// Beat frame indices for a clip of `frames` frames.
pub fn beat_frames(bpm: f64, frames: usize, fps: f64) -> Vec<usize> {
    let period = fps * 60.0 / bpm;
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let f = (k as f64 * period).round() as usize;
        if f >= frames {
            break;
        }
        out.push(f);
        k += 1;
    }
    out
}

fn base_formation(spec: &SyntheticSpec) -> Result<Vec<[f64; 2]>, SynthError> {
    let c = spec.dancers;
    let s = FORMATION_SPACING;
    let positions: Vec<[f64; 2]> = match spec.formation {
        Formation::Line => (0..c)
            .map(|i| [(i as f64 - (c as f64 - 1.0) / 2.0) * s, 0.0])
            .collect(),
        Formation::Circle => {
            if c == 1 {
                vec![[0.0, 0.0]]
            } else {
                let radius = (s / (2.0 * (std::f64::consts::PI / c as f64).sin())).max(1.0);
                (0..c)
                    .map(|i| {
                        let a = std::f64::consts::TAU * i as f64 / c as f64;
                        [radius * a.cos(), radius * a.sin()]
                    })
                    .collect()
            }
        }
        Formation::Vee => (0..c)
            .map(|i| {
                if i == 0 {
                    [0.0, 0.0]
                } else {
                    let k = ((i + 1) / 2) as f64;
                    let side = if i % 2 == 1 { 1.0 } else { -1.0 };
                    [side * k * s * 0.707, -k * s * 0.707]
                }
            })
            .collect(),
    };
    // pairwise clearance of the standing formation
    for i in 0..c {
        for j in i + 1..c {
            let dx = positions[i][0] - positions[j][0];
            let dz = positions[i][1] - positions[j][1];
            if (dx * dx + dz * dz).sqrt() < CLEARANCE {
                return Err(SynthError::Infeasible(format!(
                    "dancers {i} and {j} start closer than the {CLEARANCE} m clearance"
                )));
            }
        }
    }
    Ok(positions)
}

/// Ground-plane root paths `[dancer][frame] -> (x, z)` for the maneuver.
fn ground_paths(spec: &SyntheticSpec, rng: &mut ChaCha12Rng) -> Result<Vec<Vec<[f64; 2]>>, SynthError> {
    let c = spec.dancers;
    let l = spec.frames;
    let base = base_formation(spec)?;
    // random facing of the whole formation varies the dataset
    let theta0: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let rot = |p: [f64; 2], a: f64| {
        [
            p[0] * a.cos() - p[1] * a.sin(),
            p[0] * a.sin() + p[1] * a.cos(),
        ]
    };
    let base: Vec<[f64; 2]> = base.iter().map(|p| rot(*p, theta0)).collect();

    let paths = match spec.maneuver {
        Maneuver::Hold => (0..c).map(|i| vec![base[i]; l]).collect::<Vec<_>>(),
        Maneuver::Rotate => {
            let max_r = base
                .iter()
                .map(|p| (p[0] * p[0] + p[1] * p[1]).sqrt())
                .fold(0.0f64, f64::max)
                .max(1e-6);
            let omega = (MAX_ROOT_SPEED / max_r).min(0.45) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            (0..c)
                .map(|i| {
                    (0..l)
                        .map(|f| rot(base[i], omega * f as f64 / spec.fps))
                        .collect()
                })
                .collect()
        }
        Maneuver::Swap => {
            // pairs orbit their midpoint; speed capped at a walkable rate
            let mut paths: Vec<Vec<[f64; 2]>> = (0..c).map(|i| vec![base[i]; l]).collect();
            let mut pair = 0;
            while 2 * pair + 1 < c {
                let (i, j) = (2 * pair, 2 * pair + 1);
                let mid = [(base[i][0] + base[j][0]) / 2.0, (base[i][1] + base[j][1]) / 2.0];
                let r = {
                    let dx = base[i][0] - mid[0];
                    let dz = base[i][1] - mid[1];
                    (dx * dx + dz * dz).sqrt()
                };
                let omega = (MAX_ROOT_SPEED / r.max(1e-6)).min(0.6);
                for f in 0..l {
                    let phi = omega * f as f64 / spec.fps;
                    let oi = [base[i][0] - mid[0], base[i][1] - mid[1]];
                    let oj = [base[j][0] - mid[0], base[j][1] - mid[1]];
                    paths[i][f] = {
                        let p = rot(oi, phi);
                        [mid[0] + p[0], mid[1] + p[1]]
                    };
                    paths[j][f] = {
                        let p = rot(oj, phi);
                        [mid[0] + p[0], mid[1] + p[1]]
                    };
                }
                pair += 1;
            }
            paths
        }
        Maneuver::Cross => {
            if c != 2 {
                return Err(SynthError::Infeasible(
                    "the cross maneuver is defined for exactly two dancers".into(),
                ));
            }
            // head-on approach along x, offset in z, passing at mid-clip
            let v = MAX_ROOT_SPEED;
            let t_mid = (l as f64 - 1.0) / 2.0 / spec.fps;
            (0..2)
                .map(|i| {
                    let (sign, z) = if i == 0 {
                        (1.0, CROSS_LATERAL / 2.0)
                    } else {
                        (-1.0, -CROSS_LATERAL / 2.0)
                    };
                    (0..l)
                        .map(|f| {
                            let t = f as f64 / spec.fps;
                            [sign * v * (t_mid - t), z]
                        })
                        .collect()
                })
                .collect()
        }
    };
    Ok(paths)
}

struct StepPlan {
    /// Per frame ankle world positions for the left and right feet.
    left: Vec<[f64; 3]>,
    right: Vec<[f64; 3]>,
}

/// Plan world-space foot paths: feet alternate per beat interval, planting
/// at the hip's ground projection sampled mid-stance.
fn plan_steps(
    path: &[[f64; 2]],
    beats: &[usize],
    lateral: f64,
    side: f64, // +1 left, -1 right
    swings_on_even_beats: bool,
) -> Vec<[f64; 3]> {
    let l = path.len();
    let hip_ground = |f: usize| [path[f][0] + side * lateral, path[f][1]];
    // double-support margin inside each beat interval
    let ds = 2usize;

    // swing windows for this foot: interval k (beats[k]..beats[k+1]) when
    // k's parity matches
    let mut anchors: Vec<(usize, usize)> = Vec::new(); // (swing_start, swing_end) exclusive
    for k in 0..beats.len() {
        let start = beats[k];
        let end = if k + 1 < beats.len() { beats[k + 1] } else { l };
        let is_mine = (k % 2 == 0) == swings_on_even_beats;
        if is_mine && end > start + 2 * ds + 4 && end <= l {
            anchors.push((start + ds, end - ds));
        }
    }

    let mut positions = vec![[0.0; 3]; l];
    let mut plant: [f64; 2] = hip_ground(0);
    let mut next_anchor = 0usize;
    let mut f = 0usize;
    while f < l {
        if next_anchor < anchors.len() && f == anchors[next_anchor].0 {
            let (s0, s1) = anchors[next_anchor];
            let swing_frames = s1 - s0;
            // land where the hip will be at the middle of the next stance
            let stance_end = if next_anchor + 1 < anchors.len() {
                anchors[next_anchor + 1].0
            } else {
                l
            };
            let mid = (s1 + stance_end.max(s1)) / 2;
            let target = hip_ground(mid.min(l - 1));
            let lift = lift_profile(swing_frames);
            for (k, lift_k) in lift.iter().enumerate() {
                // horizontal motion finishes one frame before touchdown
                let u = if swing_frames > 1 {
                    k as f64 / (swing_frames - 1) as f64
                } else {
                    1.0
                };
                let h = smootherstep(u);
                positions[s0 + k] = [
                    plant[0] + (target[0] - plant[0]) * h,
                    ANKLE_PLANT_HEIGHT + lift_k,
                    plant[1] + (target[1] - plant[1]) * h,
                ];
            }
            plant = target;
            f = s1;
            next_anchor += 1;
        } else {
            positions[f] = [plant[0], ANKLE_PLANT_HEIGHT, plant[1]];
            f += 1;
        }
    }
    positions
}

/// Contact labels from closed-form foot paths via the threshold rule; the
/// toes follow the ankles rigidly (level feet), so their labels coincide
/// with the ankle labels computed from the same path.
fn labels_from_paths(left: &[[f64; 3]], right: &[[f64; 3]], fps: f64) -> Vec<[f64; CONTACT_DIM]> {
    let l = left.len();
    let label = |path: &[[f64; 3]], f: usize, toe: bool| -> f64 {
        let prev = if f == 0 { 1.max(f) } else { f }; // v0 = v1 convention
        let (cur, before) = (path[prev.min(l - 1)], path[prev - 1]);
        let speed = ((cur[0] - before[0]).powi(2)
            + (cur[1] - before[1]).powi(2)
            + (cur[2] - before[2]).powi(2))
        .sqrt()
            * fps;
        // toe sits 0.06 below the ankle with a fixed offset
        let height = if toe { path[f][1] - 0.06 } else { path[f][1] };
        if height < CONTACT_HEIGHT_THRESH && speed < CONTACT_SPEED_THRESH {
            1.0
        } else {
            0.0
        }
    };
    (0..l)
        .map(|f| {
            [
                label(left, f, false),
                label(right, f, false),
                label(left, f, true),
                label(right, f, true),
            ]
        })
        .collect()
}

/// Generate one fully-annotated sample.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticSample, SynthError> {
    if spec.dancers == 0 {
        return Err(SynthError::InvalidSpec("need at least one dancer".into()));
    }
    if !(60.0..=180.0).contains(&spec.bpm) {
        return Err(SynthError::InvalidSpec(format!("bpm {} outside 60..=180", spec.bpm)));
    }
    if spec.frames < 2 {
        return Err(SynthError::InvalidSpec("need at least two frames".into()));
    }
    if !(spec.fps > 0.0) {
        return Err(SynthError::InvalidSpec("fps must be positive".into()));
    }
    let skeleton = Skeleton::canonical();
    let geometry = LegGeometry::from_skeleton(&skeleton);
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);

    // audio and features
    let audio = click_track(spec.bpm, spec.frames, spec.fps)?;
    let features = extract_features(&audio, spec.fps)?;
    if features.frames() != spec.frames {
        return Err(SynthError::Internal(format!(
            "click track produced {} feature frames, expected {}",
            features.frames(),
            spec.frames
        )));
    }
    let beats = beat_frames(spec.bpm, spec.frames, spec.fps);

    // trajectories
    let paths = ground_paths(spec, &mut rng)?;

    // plan feet and derive each dancer's root height from its stance spread
    let lateral = geometry.hip_offset_left[0];
    let mut feet = Vec::with_capacity(spec.dancers);
    let mut root_heights = Vec::with_capacity(spec.dancers);
    for path in &paths {
        let parity = rng.gen_bool(0.5);
        let left = plan_steps(path, &beats, lateral, 1.0, parity);
        let right = plan_steps(path, &beats, lateral, -1.0, !parity);
        // worst horizontal hip-to-ankle distance while planted
        let mut max_h: f64 = 0.0;
        for f in 0..path.len() {
            for (foot, side) in [(&left, 1.0), (&right, -1.0)] {
                let hip = [path[f][0] + side * lateral, path[f][1]];
                let dx = foot[f][0] - hip[0];
                let dz = foot[f][2] - hip[1];
                max_h = max_h.max((dx * dx + dz * dz).sqrt());
            }
        }
        let root_y = geometry.root_height(max_h + 0.02).ok_or_else(|| {
            SynthError::Infeasible(format!(
                "steps spread {max_h:.2} m from the hip, beyond the leg reach"
            ))
        })?;
        feet.push(StepPlan { left, right });
        root_heights.push(root_y);
    }

    // assemble motion
    let l = spec.frames;
    let mut data: Vec<MotionFrame> = Vec::with_capacity(spec.dancers * l);
    let mut contacts = Vec::with_capacity(spec.dancers);
    let mut trajectory = Vec::with_capacity(spec.dancers);
    for (c, path) in paths.iter().enumerate() {
        let labels = labels_from_paths(&feet[c].left, &feet[c].right, spec.fps);
        let arm_phase_offset: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let mut dancer_traj = Vec::with_capacity(l);
        for f in 0..l {
            let root = [path[f][0], root_heights[c], path[f][1]];
            dancer_traj.push(root);
            let mut frame = MotionFrame::identity_pose();
            frame.root = root;
            frame.contact = labels[f];

            // legs
            for (slot, joints, side) in [(0usize, [1usize, 4, 7], 1.0), (1, [2usize, 5, 8], -1.0)] {
                let foot = if slot == 0 { &feet[c].left } else { &feet[c].right };
                let hip_off = if side > 0.0 {
                    geometry.hip_offset_left
                } else {
                    geometry.hip_offset_right
                };
                let hip_world = [root[0] + hip_off[0], root[1] + hip_off[1], root[2] + hip_off[2]];
                let (hip6, knee6, ankle6) = solve_leg(&geometry, hip_world, foot[f], [0.0, 0.0, 1.0])
                    .ok_or_else(|| {
                        SynthError::Infeasible(format!(
                            "dancer {c} frame {f}: foot target out of reach"
                        ))
                    })?;
                frame.pose[6 * joints[0]..6 * joints[0] + 6].copy_from_slice(&hip6);
                frame.pose[6 * joints[1]..6 * joints[1] + 6].copy_from_slice(&knee6);
                frame.pose[6 * joints[2]..6 * joints[2] + 6].copy_from_slice(&ankle6);
            }

            // arms: beat-locked swing about z (the arm bones run along x)
            let beat_phase = spec.bpm / 60.0 * f as f64 / spec.fps;
            let angle = spec.limb_amplitude * (std::f64::consts::TAU * beat_phase + arm_phase_offset).cos();
            let shoulder = matrix_to_rot6d(&rot_z(angle)).map_err(|e| SynthError::Internal(e.to_string()))?;
            let elbow = matrix_to_rot6d(&rot_z(0.5 * angle)).map_err(|e| SynthError::Internal(e.to_string()))?;
            frame.pose[6 * 16..6 * 16 + 6].copy_from_slice(&shoulder);
            frame.pose[6 * 17..6 * 17 + 6].copy_from_slice(&shoulder);
            frame.pose[6 * 18..6 * 18 + 6].copy_from_slice(&elbow);
            frame.pose[6 * 19..6 * 19 + 6].copy_from_slice(&elbow);
            data.push(frame);
        }
        trajectory.push(dancer_traj);
        contacts.push(labels);
    }

    let motion = GroupMotionSequence::new(spec.dancers, l, spec.fps, data)
        .map_err(|e| SynthError::Internal(e.to_string()))?;
    let trajectory = TrajectorySequence::new(trajectory, spec.fps)
        .map_err(|e| SynthError::Internal(e.to_string()))?;

    // crossing window + clearance guarantee
    let mut crossing = Vec::new();
    if spec.dancers >= 2 {
        for f in 0..l {
            let mut min_d = f64::INFINITY;
            for i in 0..spec.dancers {
                for j in i + 1..spec.dancers {
                    let a = trajectory.position(i, f);
                    let b = trajectory.position(j, f);
                    let dx = a[0] - b[0];
                    let dz = a[2] - b[2];
                    min_d = min_d.min((dx * dx + dz * dz).sqrt());
                }
            }
            if min_d < 2.0 * crate::metrics::TIF_RADIUS {
                crossing.push(f);
            }
            if min_d < CLEARANCE && spec.maneuver != Maneuver::Cross {
                return Err(SynthError::Infeasible(format!(
                    "clearance violated at frame {f} ({min_d:.2} m) outside a cross maneuver"
                )));
            }
        }
    }

    // joints that move: arm descendants always; leg chain and everything
    // else once the root translates or feet step
    let mut moving: Vec<usize> = vec![18, 19, 20, 21, 22, 23];
    let stepping = !beats.is_empty();
    if stepping || spec.maneuver != Maneuver::Hold {
        moving.extend([4, 5, 7, 8, 10, 11]);
    }
    if spec.maneuver != Maneuver::Hold {
        moving = (0..skeleton.joints()).collect();
    }
    moving.sort_unstable();
    moving.dedup();

    Ok(SyntheticSample {
        audio,
        features,
        motion,
        trajectory,
        annotations: OracleAnnotations {
            beat_frames: beats,
            crossing_frames: crossing,
            moving_joints: moving,
            contacts,
        },
    })
}

/// A labelled dataset: `count` samples with seeds `base_seed + index`.
pub fn generate_dataset(
    spec: &SyntheticSpec,
    count: usize,
) -> Result<Vec<SyntheticSample>, SynthError> {
    (0..count)
        .map(|i| {
            let mut s = spec.clone();
            s.seed = spec.seed.wrapping_add(i as u64);
            generate_synthetic(&s)
        })
        .collect()
}
