use super::DbnError;

/// Savitzky–Golay smoothing: each point is replaced by the value of the
/// least-squares polynomial fit over its window, evaluated at that point.
/// Interior points use the window center; points near either end reuse the
/// terminal window and evaluate the fit at their offset inside it.
///
/// Polynomials up to `order` pass through unchanged.
pub fn savgol_smooth(series: &[f64], window: usize, order: usize) -> Result<Vec<f64>, DbnError> {
    if window % 2 == 0 || window == 0 {
        return Err(DbnError::InvalidFilter(format!("window must be odd, got {window}")));
    }
    if order >= window {
        return Err(DbnError::InvalidFilter(format!(
            "order {order} must be smaller than window {window}"
        )));
    }
    let l = series.len();
    if l < window {
        return Err(DbnError::InvalidFilter(format!(
            "series length {l} shorter than window {window}"
        )));
    }
    // weight rows of the projection X (XᵀX)⁻¹ Xᵀ, one per evaluation offset
    let weights: Vec<Vec<f64>> = (0..window).map(|e| projection_row(window, order, e)).collect();
    let half = window / 2;
    let mut out = Vec::with_capacity(l);
    for i in 0..l {
        let start = i.saturating_sub(half).min(l - window);
        let offset = i - start;
        let w = &weights[offset];
        let val = w
            .iter()
            .zip(&series[start..start + window])
            .map(|(a, b)| a * b)
            .sum();
        out.push(val);
    }
    Ok(out)
}

/// Row `eval` of the least-squares projection matrix for a polynomial of
/// degree `order` sampled at `0..window`.
fn projection_row(window: usize, order: usize, eval: usize) -> Vec<f64> {
    let m = order + 1;
    // normal matrix A = XᵀX with X[j,k] = j^k
    let mut a = vec![vec![0.0; m]; m];
    for r in 0..m {
        for c in 0..m {
            a[r][c] = (0..window).map(|j| (j as f64).powi((r + c) as i32)).sum();
        }
    }
    // solve A u = X_eval (the monomials at the evaluation offset)
    let rhs: Vec<f64> = (0..m).map(|k| (eval as f64).powi(k as i32)).collect();
    let u = solve(a, rhs);
    // w[j] = X_j · u
    (0..window)
        .map(|j| (0..m).map(|k| (j as f64).powi(k as i32) * u[k]).sum())
        .collect()
}

/// Gaussian elimination with partial pivoting for the tiny normal systems.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let d = a[col][col];
        for row in col + 1..n {
            let f = a[row][col] / d;
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x
}
