//! Small dense solvers for the Newton and least-squares steps.

/// Solve `A x = b` for symmetric positive-definite `A` (row-major, `n x n`)
/// by Cholesky factorisation. Returns `None` when `A` is not numerically
/// positive definite.
pub fn solve_spd(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(sum > 1e-300) || !sum.is_finite() {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * n + k] * y[k];
        }
        y[i] = sum / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in i + 1..n {
            sum -= l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// Weighted least squares with an intercept: minimises
/// `sum_i w_i (y_i - b - x_i . beta)^2`. Returns `(intercept, beta)`.
pub fn weighted_least_squares(rows: &[Vec<f64>], y: &[f64], w: &[f64]) -> Option<(f64, Vec<f64>)> {
    weighted_ridge(rows, y, w, 0.0)
}

/// Weighted least squares with `alpha * |beta|^2` added (intercept free).
pub fn weighted_ridge(rows: &[Vec<f64>], y: &[f64], w: &[f64], alpha: f64) -> Option<(f64, Vec<f64>)> {
    let d = rows.first().map_or(0, |r| r.len());
    let p = d + 1;
    let mut xtx = vec![0.0; p * p];
    let mut xty = vec![0.0; p];
    let mut aug = vec![0.0; p];
    for ((row, &yi), &wi) in rows.iter().zip(y).zip(w) {
        aug[0] = 1.0;
        aug[1..].copy_from_slice(row);
        for a in 0..p {
            let wa = wi * aug[a];
            xty[a] += wa * yi;
            for b in 0..=a {
                xtx[a * p + b] += wa * aug[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            xtx[b * p + a] = xtx[a * p + b];
        }
    }
    for a in 1..p {
        xtx[a * p + a] += alpha;
    }
    let sol = solve_spd(&xtx, &xty)?;
    Some((sol[0], sol[1..].to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = [4.0, 1.0, 1.0, 3.0];
        let x = solve_spd(&a, &[1.0, 2.0]).unwrap();
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-12);
        assert!((x[0] + 3.0 * x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_singular() {
        assert!(solve_spd(&[1.0, 1.0, 1.0, 1.0], &[1.0, 1.0]).is_none());
    }

    #[test]
    fn recovers_exact_linear_fit() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * i % 7) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 1.5 + 2.0 * r[0] - 0.5 * r[1]).collect();
        let w = vec![1.0; 20];
        let (b, beta) = weighted_least_squares(&rows, &y, &w).unwrap();
        assert!((b - 1.5).abs() < 1e-9);
        assert!((beta[0] - 2.0).abs() < 1e-9 && (beta[1] + 0.5).abs() < 1e-9);
    }
}
