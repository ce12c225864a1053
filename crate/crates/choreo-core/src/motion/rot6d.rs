use super::MotionError;

const DEGENERACY_EPS: f64 = 1e-9;
const ORTHO_TOL: f64 = 1e-6;

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Recover a rotation matrix from its 6D encoding (the first two columns):
/// Gram–Schmidt orthonormalizes the two column vectors and the third column
/// is their cross product. Returns the matrix row-major.
///
/// Fails when the first column is (near) zero or the second is (near)
/// parallel to the first.
pub fn rot6d_to_matrix(r: &[f64]) -> Result<[f64; 9], MotionError> {
    if r.len() != 6 {
        return Err(MotionError::Dimension { expected: 6, got: r.len() });
    }
    let a = [r[0], r[1], r[2]];
    let b = [r[3], r[4], r[5]];
    let na = dot(&a, &a).sqrt();
    if na < DEGENERACY_EPS {
        return Err(MotionError::DegenerateRotation(
            "first column has (near) zero norm".into(),
        ));
    }
    let c1 = [a[0] / na, a[1] / na, a[2] / na];
    let proj = dot(&c1, &b);
    let resid = [b[0] - proj * c1[0], b[1] - proj * c1[1], b[2] - proj * c1[2]];
    let nr = dot(&resid, &resid).sqrt();
    if nr < DEGENERACY_EPS {
        return Err(MotionError::DegenerateRotation(
            "second column is (near) parallel to the first".into(),
        ));
    }
    let c2 = [resid[0] / nr, resid[1] / nr, resid[2] / nr];
    let c3 = cross(&c1, &c2);
    Ok([
        c1[0], c2[0], c3[0], //
        c1[1], c2[1], c3[1], //
        c1[2], c2[2], c3[2],
    ])
}

/// Project a rotation matrix (row-major) to its 6D encoding: the first two
/// columns. Errors when the input is not orthonormal within tolerance.
pub fn matrix_to_rot6d(m: &[f64]) -> Result<[f64; 6], MotionError> {
    if m.len() != 9 {
        return Err(MotionError::Dimension { expected: 9, got: m.len() });
    }
    // deviation of MᵀM from the identity
    let mut dev: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let mut acc = 0.0;
            for k in 0..3 {
                acc += m[k * 3 + i] * m[k * 3 + j];
            }
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((acc - target).abs());
        }
    }
    if dev > ORTHO_TOL {
        return Err(MotionError::NotOrthonormal(dev));
    }
    Ok([m[0], m[3], m[6], m[1], m[4], m[7]])
}

/// Row-major 3×3 product `a · b`.
pub(crate) fn mat3_mul(a: &[f64; 9], b: &[f64; 9]) -> [f64; 9] {
    let mut c = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            c[i * 3 + j] = a[i * 3] * b[j] + a[i * 3 + 1] * b[3 + j] + a[i * 3 + 2] * b[6 + j];
        }
    }
    c
}

/// Apply a row-major 3×3 matrix to a vector.
pub(crate) fn mat3_apply(m: &[f64; 9], v: &[f64; 3]) -> [f64; 3] {
    [
        m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
        m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
        m[6] * v[0] + m[7] * v[1] + m[8] * v[2],
    ]
}

pub(crate) const MAT3_IDENTITY: [f64; 9] = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];

/// Row-major rotation about the x axis.
pub fn rot_x(angle: f64) -> [f64; 9] {
    let (s, c) = angle.sin_cos();
    [1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c]
}

/// Row-major rotation about the y axis.
pub fn rot_y(angle: f64) -> [f64; 9] {
    let (s, c) = angle.sin_cos();
    [c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c]
}

/// Row-major rotation about the z axis.
pub fn rot_z(angle: f64) -> [f64; 9] {
    let (s, c) = angle.sin_cos();
    [c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]
}
