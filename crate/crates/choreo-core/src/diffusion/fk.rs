use crate::motion::Skeleton;
use crate::nn::{Tape, Var};

/// Normalization guard inside the differentiable Gram-Schmidt; keeps
/// gradients finite when a predicted 6D block collapses toward zero.
const NORM_EPS: f64 = 1e-12;

/// Orthonormalize a batch of 6D rotation blocks (`[B, 6]`) into the nine
/// rotation matrix entries, row-major, as `[B, 1]` columns.
fn rot6d_columns(t: &Tape, six: Var) -> [Var; 9] {
    let a = t.slice_cols(six, 0, 3);
    let b = t.slice_cols(six, 3, 6);
    let na2 = t.row_sum(t.mul(a, a));
    let inv_a = t.powf(t.add_scalar(na2, NORM_EPS), -0.5);
    let c1 = t.mul_col_broadcast(a, inv_a);
    let proj = t.row_sum(t.mul(c1, b));
    let resid = t.sub(b, t.mul_col_broadcast(c1, proj));
    let nb2 = t.row_sum(t.mul(resid, resid));
    let inv_b = t.powf(t.add_scalar(nb2, NORM_EPS), -0.5);
    let c2 = t.mul_col_broadcast(resid, inv_b);

    let x = |v: Var, k: usize| t.slice_cols(v, k, k + 1);
    let (c1x, c1y, c1z) = (x(c1, 0), x(c1, 1), x(c1, 2));
    let (c2x, c2y, c2z) = (x(c2, 0), x(c2, 1), x(c2, 2));
    let c3x = t.sub(t.mul(c1y, c2z), t.mul(c1z, c2y));
    let c3y = t.sub(t.mul(c1z, c2x), t.mul(c1x, c2z));
    let c3z = t.sub(t.mul(c1x, c2y), t.mul(c1y, c2x));
    // row-major [r00 r01 r02; r10 r11 r12; r20 r21 r22], columns c1 c2 c3
    [c1x, c2x, c3x, c1y, c2y, c3y, c1z, c2z, c3z]
}

fn mat_mul_cols(t: &Tape, a: &[Var; 9], b: &[Var; 9]) -> [Var; 9] {
    std::array::from_fn(|idx| {
        let (i, j) = (idx / 3, idx % 3);
        let mut acc = t.mul(a[3 * i], b[j]);
        acc = t.add(acc, t.mul(a[3 * i + 1], b[3 + j]));
        t.add(acc, t.mul(a[3 * i + 2], b[6 + j]))
    })
}

/// Differentiable forward kinematics with the root at the origin: batched
/// poses `[B, 6·n]` map to joint positions `[B, 3·n]`.
///
/// Mirrors `motion::forward_kinematics` (cross-checked in tests); the only
/// difference is the epsilon-stabilized normalization.
pub(crate) fn fk_layout_tape(t: &Tape, skeleton: &Skeleton, pose: Var) -> Var {
    let joints = skeleton.joints();
    let rows = t.shape(pose)[0];
    debug_assert_eq!(t.shape(pose)[1], 6 * joints);
    let zero_col = t.leaf_from(vec![rows, 1], vec![0.0; rows]);

    let mut acc: Vec<[Var; 9]> = Vec::with_capacity(joints);
    let mut rel: Vec<[Var; 3]> = Vec::with_capacity(joints);
    for j in 0..joints {
        let local = rot6d_columns(t, t.slice_cols(pose, 6 * j, 6 * j + 6));
        match skeleton.parent(j) {
            None => {
                acc.push(local);
                rel.push([zero_col, zero_col, zero_col]);
            }
            Some(p) => {
                let off = skeleton.offset(j);
                let rotated: [Var; 3] = std::array::from_fn(|i| {
                    let r = &acc[p];
                    let mut v = t.scale(r[3 * i], off[0]);
                    v = t.add(v, t.scale(r[3 * i + 1], off[1]));
                    t.add(v, t.scale(r[3 * i + 2], off[2]))
                });
                rel.push([
                    t.add(rel[p][0], rotated[0]),
                    t.add(rel[p][1], rotated[1]),
                    t.add(rel[p][2], rotated[2]),
                ]);
                acc.push(mat_mul_cols(t, &acc[p], &local));
            }
        }
    }
    let cols: Vec<Var> = rel.iter().flat_map(|p| p.iter().copied()).collect();
    t.concat_cols(&cols)
}
