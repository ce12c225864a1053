use crate::nn::{Tape, Var};

use super::{DbnError, TrajectorySequence};

/// Loss weights; both default to 2.
#[derive(Debug, Clone, Copy)]
pub struct DbnLossWeights {
    pub lambda_v: f64,
    pub lambda_distcon: f64,
}

impl Default for DbnLossWeights {
    fn default() -> Self {
        DbnLossWeights {
            lambda_v: 2.0,
            lambda_distcon: 2.0,
        }
    }
}

/// Component values of the navigator objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DbnLossBreakdown {
    pub recon: f64,
    pub velocity: f64,
    pub dist_con: f64,
    pub total: f64,
}

/// Mean squared error between two equally-shaped vars.
pub(crate) fn mse_tape(t: &Tape, gt: Var, pred: Var) -> Var {
    let d = t.sub(pred, gt);
    t.mean(t.mul(d, d))
}

/// Mean squared error of frame-to-frame deltas; inputs are `[L, k]`.
pub(crate) fn velocity_loss_tape(t: &Tape, gt: Var, pred: Var) -> Var {
    let l = t.shape(gt)[0];
    let d_gt = t.sub(t.slice_rows(gt, 1, l), t.slice_rows(gt, 0, l - 1));
    let d_pred = t.sub(t.slice_rows(pred, 1, l), t.slice_rows(pred, 0, l - 1));
    mse_tape(t, d_gt, d_pred)
}

/// Distance-consistency loss over per-dancer position vars (`[L, 3]` each):
/// `(1/(C-1)) Σ_frames Σ_{pairs i<j} ‖(p_i - p_j) - (p̂_i - p̂_j)‖²`.
pub(crate) fn distcon_loss_tape(t: &Tape, gt: &[Var], pred: &[Var]) -> Var {
    let c = gt.len();
    debug_assert!(c >= 2);
    let mut total: Option<Var> = None;
    for i in 0..c {
        for j in i + 1..c {
            let gt_off = t.sub(gt[i], gt[j]);
            let pred_off = t.sub(pred[i], pred[j]);
            let d = t.sub(gt_off, pred_off);
            let sq = t.sum(t.mul(d, d));
            total = Some(match total {
                Some(acc) => t.add(acc, sq),
                None => sq,
            });
        }
    }
    t.scale(total.expect("at least one pair"), 1.0 / (c as f64 - 1.0))
}

fn check_shapes(gt: &TrajectorySequence, pred: &TrajectorySequence) -> Result<(), DbnError> {
    if gt.dancers() != pred.dancers() || gt.frames() != pred.frames() {
        return Err(DbnError::Shape(format!(
            "trajectory shapes disagree: {}x{} vs {}x{}",
            gt.dancers(),
            gt.frames(),
            pred.dancers(),
            pred.frames()
        )));
    }
    Ok(())
}

fn bind_dancers(t: &Tape, seq: &TrajectorySequence) -> Vec<Var> {
    (0..seq.dancers())
        .map(|c| {
            let data: Vec<f64> = seq.dancer(c).iter().flatten().copied().collect();
            t.leaf_from(vec![seq.frames(), 3], data)
        })
        .collect()
}

/// Distance-consistency loss between trajectories. Needs C ≥ 2.
pub fn loss_distcon(gt: &TrajectorySequence, pred: &TrajectorySequence) -> Result<f64, DbnError> {
    check_shapes(gt, pred)?;
    if gt.dancers() < 2 {
        return Err(DbnError::NeedsPair);
    }
    let t = Tape::new();
    let g = bind_dancers(&t, gt);
    let p = bind_dancers(&t, pred);
    Ok(t.scalar(distcon_loss_tape(&t, &g, &p)))
}

/// Full navigator objective `recon + λ_v·velocity + λ_DistCon·dist_con`.
/// With a single dancer the distance term is zero.
pub fn loss_dbn(
    gt: &TrajectorySequence,
    pred: &TrajectorySequence,
    weights: &DbnLossWeights,
) -> Result<DbnLossBreakdown, DbnError> {
    check_shapes(gt, pred)?;
    if gt.frames() < 2 {
        return Err(DbnError::TooShort(2));
    }
    let t = Tape::new();
    let g = bind_dancers(&t, gt);
    let p = bind_dancers(&t, pred);
    let g_all = t.concat_cols(&g);
    let p_all = t.concat_cols(&p);
    let recon = t.scalar(mse_tape(&t, g_all, p_all));
    let velocity = t.scalar(velocity_loss_tape(&t, g_all, p_all));
    let dist_con = if gt.dancers() >= 2 {
        t.scalar(distcon_loss_tape(&t, &g, &p))
    } else {
        0.0
    };
    Ok(DbnLossBreakdown {
        recon,
        velocity,
        dist_con,
        total: recon + weights.lambda_v * velocity + weights.lambda_distcon * dist_con,
    })
}
