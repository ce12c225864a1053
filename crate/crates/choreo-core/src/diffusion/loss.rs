use crate::motion::{
    fk_sequence, forward_kinematics, GroupMotionSequence, MotionFrame, Skeleton, CONTACT_DIM,
    FRAME_DIM, ROOT_DIM,
};
use crate::nn::{Tape, Var};

use super::fk::fk_layout_tape;
use super::TcdiffError;

/// Loss weights; the four terms default to 1 each.
#[derive(Debug, Clone, Copy)]
pub struct TcdiffLossWeights {
    pub lambda_simple: f64,
    pub lambda_rfk: f64,
    pub lambda_vel: f64,
    pub lambda_contact: f64,
}

impl Default for TcdiffLossWeights {
    fn default() -> Self {
        TcdiffLossWeights {
            lambda_simple: 1.0,
            lambda_rfk: 1.0,
            lambda_vel: 1.0,
            lambda_contact: 1.0,
        }
    }
}

/// Component values of the denoiser objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TcdiffLossBreakdown {
    pub simple: f64,
    pub rfk: f64,
    pub velocity: f64,
    pub contact: f64,
    pub total: f64,
}

/// Precomputed ground-truth targets for one sequence; FK runs once, not per
/// epoch.
pub(crate) struct SequenceTargets {
    pub channels: Vec<Vec<f64>>, // per dancer, L×151
    pub layout: Vec<f64>,        // C·L × 3n, root at origin
    pub deltas: Vec<f64>,        // C·(L-1) × 3n world-position deltas
    pub dancers: usize,
    pub frames: usize,
}

impl SequenceTargets {
    pub fn new(gt: &GroupMotionSequence, skeleton: &Skeleton) -> Result<Self, TcdiffError> {
        let (c, l) = (gt.dancers(), gt.frames());
        let n = skeleton.joints();
        let mut channels = Vec::with_capacity(c);
        let mut layout = Vec::with_capacity(c * l * 3 * n);
        let mut deltas = Vec::with_capacity(c * (l - 1) * 3 * n);
        for dancer in 0..c {
            let mut chan = Vec::with_capacity(l * FRAME_DIM);
            for f in 0..l {
                chan.extend_from_slice(&gt.frame(dancer, f).pack());
            }
            channels.push(chan);
            let world = fk_sequence(skeleton, gt.dancer(dancer))
                .map_err(|e| TcdiffError::Shape(e.to_string()))?;
            for f in 0..l {
                let origin = forward_kinematics(skeleton, &gt.frame(dancer, f).pose, &[0.0; 3])
                    .map_err(|e| TcdiffError::Shape(e.to_string()))?;
                layout.extend(origin.iter().flatten());
                if f > 0 {
                    for j in 0..n {
                        for k in 0..3 {
                            deltas.push(world[f][j][k] - world[f - 1][j][k]);
                        }
                    }
                }
            }
        }
        Ok(SequenceTargets {
            channels,
            layout,
            deltas,
            dancers: c,
            frames: l,
        })
    }
}

/// All four loss terms on a tape. `pred` holds one `[L, 151]` var per
/// dancer (denoiser output); targets are bound as constant leaves.
pub(crate) fn loss_tcdiff_tape(
    t: &Tape,
    skeleton: &Skeleton,
    fps: f64,
    targets: &SequenceTargets,
    pred: &[Var],
    weights: &TcdiffLossWeights,
) -> (Var, TcdiffLossBreakdown) {
    let (c, l) = (targets.dancers, targets.frames);
    let n = skeleton.joints();

    // simple: mean squared error over every channel
    let gt_vars: Vec<Var> = targets
        .channels
        .iter()
        .map(|chan| t.leaf_from(vec![l, FRAME_DIM], chan.clone()))
        .collect();
    let gt_all = t.concat_rows(&gt_vars);
    let pred_all = t.concat_rows(pred);
    let d = t.sub(pred_all, gt_all);
    let simple = t.mean(t.mul(d, d));

    // stacked pose and root channels
    let pose_all = t.slice_cols(pred_all, CONTACT_DIM + ROOT_DIM, FRAME_DIM);
    let root_all = t.slice_cols(pred_all, CONTACT_DIM, CONTACT_DIM + ROOT_DIM);

    // relative forward-kinematic loss on root-origin layouts
    let layout_pred = fk_layout_tape(t, skeleton, pose_all);
    let layout_gt = t.leaf_from(vec![c * l, 3 * n], targets.layout.clone());
    let ld = t.sub(layout_pred, layout_gt);
    let rfk = t.scale(t.sum(t.mul(ld, ld)), 1.0 / (c * l) as f64);

    // world positions for velocity and contact terms
    let tiled_root = t.concat_cols(&vec![root_all; n]);
    let world = t.add(layout_pred, tiled_root);
    let mut delta_blocks = Vec::with_capacity(c);
    for dancer in 0..c {
        let block = t.slice_rows(world, dancer * l, (dancer + 1) * l);
        let d = t.sub(t.slice_rows(block, 1, l), t.slice_rows(block, 0, l - 1));
        delta_blocks.push(d);
    }
    let deltas_pred = t.concat_rows(&delta_blocks);
    let deltas_gt = t.leaf_from(vec![c * (l - 1), 3 * n], targets.deltas.clone());
    let vd = t.sub(deltas_pred, deltas_gt);
    let velocity = t.mean(t.mul(vd, vd));

    // contact: predicted foot velocities gated by predicted contact labels
    let mut contact_terms = Vec::new();
    for dancer in 0..c {
        let block = t.slice_rows(world, dancer * l, (dancer + 1) * l);
        for (slot, &joint) in skeleton.foot_joints().iter().enumerate() {
            let pos = t.slice_cols(block, 3 * joint, 3 * joint + 3);
            let vel = t.scale(t.sub(t.slice_rows(pos, 1, l), t.slice_rows(pos, 0, l - 1)), fps);
            let label = t.slice_rows(t.slice_cols(pred[dancer], slot, slot + 1), 1, l);
            let gated = t.mul_col_broadcast(vel, label);
            contact_terms.push(t.sum(t.mul(gated, gated)));
        }
    }
    let mut contact_sum = contact_terms[0];
    for term in &contact_terms[1..] {
        contact_sum = t.add(contact_sum, *term);
    }
    let contact = t.scale(contact_sum, 1.0 / (c * (l - 1)) as f64);

    let mut total = t.scale(simple, weights.lambda_simple);
    total = t.add(total, t.scale(rfk, weights.lambda_rfk));
    total = t.add(total, t.scale(velocity, weights.lambda_vel));
    total = t.add(total, t.scale(contact, weights.lambda_contact));

    let breakdown = TcdiffLossBreakdown {
        simple: t.scalar(simple),
        rfk: t.scalar(rfk),
        velocity: t.scalar(velocity),
        contact: t.scalar(contact),
        total: t.scalar(total),
    };
    (total, breakdown)
}

fn check_pair(gt: &GroupMotionSequence, pred: &GroupMotionSequence) -> Result<(), TcdiffError> {
    if gt.dancers() != pred.dancers() || gt.frames() != pred.frames() {
        return Err(TcdiffError::Shape(format!(
            "motion shapes disagree: {}x{} vs {}x{}",
            gt.dancers(),
            gt.frames(),
            pred.dancers(),
            pred.frames()
        )));
    }
    if gt.frames() < 2 {
        return Err(TcdiffError::Shape("losses need at least two frames".into()));
    }
    Ok(())
}

/// Relative forward-kinematic loss: mean over frames (and dancers) of the
/// squared difference between ground-truth and predicted root-relative
/// joint layouts. Exactly invariant to translating a dancer's root and
/// joints together, since the root never enters.
pub fn loss_rfk(
    gt: &GroupMotionSequence,
    pred: &GroupMotionSequence,
    skeleton: &Skeleton,
) -> Result<f64, TcdiffError> {
    check_pair(gt, pred)?;
    let (c, l) = (gt.dancers(), gt.frames());
    let mut total = 0.0;
    for dancer in 0..c {
        for f in 0..l {
            let a = forward_kinematics(skeleton, &gt.frame(dancer, f).pose, &[0.0; 3])
                .map_err(|e| TcdiffError::Shape(e.to_string()))?;
            let b = forward_kinematics(skeleton, &pred.frame(dancer, f).pose, &[0.0; 3])
                .map_err(|e| TcdiffError::Shape(e.to_string()))?;
            for (pa, pb) in a.iter().zip(b.iter()) {
                for k in 0..3 {
                    let d = pa[k] - pb[k];
                    total += d * d;
                }
            }
        }
    }
    Ok(total / (c * l) as f64)
}

/// Full objective on plain data. `contacts` supplies the per-dancer,
/// per-frame labels that gate predicted foot velocities (training gates
/// with the model's own predicted labels).
pub fn loss_tcdiff(
    gt: &GroupMotionSequence,
    pred: &GroupMotionSequence,
    contacts: &[Vec<[f64; CONTACT_DIM]>],
    weights: &TcdiffLossWeights,
    skeleton: &Skeleton,
    fps: f64,
) -> Result<TcdiffLossBreakdown, TcdiffError> {
    check_pair(gt, pred)?;
    let (c, l) = (gt.dancers(), gt.frames());
    if contacts.len() != c || contacts.iter().any(|d| d.len() != l) {
        return Err(TcdiffError::Shape("contact labels must be C×L×4".into()));
    }

    let mut simple = 0.0;
    for dancer in 0..c {
        for f in 0..l {
            let a = gt.frame(dancer, f).pack();
            let b = pred.frame(dancer, f).pack();
            simple += a
                .iter()
                .zip(b.iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>();
        }
    }
    simple /= (c * l * FRAME_DIM) as f64;

    let rfk = loss_rfk(gt, pred, skeleton)?;

    let n = skeleton.joints();
    let mut velocity = 0.0;
    let mut contact = 0.0;
    for dancer in 0..c {
        let gt_pos = fk_sequence(skeleton, gt.dancer(dancer)).map_err(|e| TcdiffError::Shape(e.to_string()))?;
        let pred_pos = fk_sequence(skeleton, pred.dancer(dancer)).map_err(|e| TcdiffError::Shape(e.to_string()))?;
        for f in 1..l {
            let mut frame_contact = 0.0;
            for j in 0..n {
                for k in 0..3 {
                    let dg = gt_pos[f][j][k] - gt_pos[f - 1][j][k];
                    let dp = pred_pos[f][j][k] - pred_pos[f - 1][j][k];
                    velocity += (dg - dp) * (dg - dp);
                }
            }
            for (slot, &joint) in skeleton.foot_joints().iter().enumerate() {
                let label = contacts[dancer][f][slot];
                for k in 0..3 {
                    let v = (pred_pos[f][joint][k] - pred_pos[f - 1][joint][k]) * fps;
                    frame_contact += (v * label) * (v * label);
                }
            }
            contact += frame_contact;
        }
    }
    velocity /= (c * (l - 1) * 3 * n) as f64;
    contact /= (c * (l - 1)) as f64;

    Ok(TcdiffLossBreakdown {
        simple,
        rfk,
        velocity,
        contact,
        total: weights.lambda_simple * simple
            + weights.lambda_rfk * rfk
            + weights.lambda_vel * velocity
            + weights.lambda_contact * contact,
    })
}

/// Contact labels carried inside motion frames, thresholded at 0.5 for
/// metric and labeling consumers.
pub fn thresholded_contacts(seq: &GroupMotionSequence) -> Vec<Vec<[f64; CONTACT_DIM]>> {
    (0..seq.dancers())
        .map(|c| {
            (0..seq.frames())
                .map(|f| {
                    let mut lab = [0.0; CONTACT_DIM];
                    for (k, v) in seq.frame(c, f).contact.iter().enumerate() {
                        lab[k] = if *v > 0.5 { 1.0 } else { 0.0 };
                    }
                    lab
                })
                .collect()
        })
        .collect()
}

/// Raw (unthresholded) contact channels, as the losses consume them.
pub fn raw_contacts(seq: &GroupMotionSequence) -> Vec<Vec<[f64; CONTACT_DIM]>> {
    (0..seq.dancers())
        .map(|c| (0..seq.frames()).map(|f| seq.frame(c, f).contact).collect())
        .collect()
}

#[allow(dead_code)]
pub(crate) fn motion_from_frames(frames: Vec<Vec<MotionFrame>>, fps: f64) -> GroupMotionSequence {
    let c = frames.len();
    let l = frames[0].len();
    let flat: Vec<MotionFrame> = frames.into_iter().flatten().collect();
    GroupMotionSequence::new(c, l, fps, flat).expect("consistent dimensions")
}
