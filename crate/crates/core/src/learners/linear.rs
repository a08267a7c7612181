//! Weighted linear least squares via the normal equations.

use crate::error::Result;

use super::{FittedModel, Matrix};

/// Solve A·x = b by Gaussian elimination with partial pivoting. A tiny ridge
/// proportional to the mean diagonal keeps rank-deficient systems (duplicate
/// or constant columns) solvable with a deterministic result.
fn solve_spd(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    let mean_diag = (0..n).map(|i| a[i][i].abs()).sum::<f64>() / n.max(1) as f64;
    let ridge = 1e-10 * mean_diag.max(1e-12);
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += ridge;
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r1, &r2| a[r1][col].abs().total_cmp(&a[r2][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let p = a[col][col];
        if p == 0.0 {
            continue;
        }
        for r in col + 1..n {
            let factor = a[r][col] / p;
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                a[r][c] -= factor * a[col][c];
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut s = b[col];
        for c in col + 1..n {
            s -= a[col][c] * x[c];
        }
        x[col] = if a[col][col] != 0.0 { s / a[col][col] } else { 0.0 };
    }
    x
}

pub fn fit_linear(x: &Matrix, y: &[f64], w: &[f64]) -> Result<FittedModel> {
    let d = x.cols();
    // Normal equations over [1, x]: (X'WX) beta = X'Wy.
    let mut a = vec![vec![0.0; d + 1]; d + 1];
    let mut b = vec![0.0; d + 1];
    for r in 0..x.rows() {
        let wr = w[r];
        if wr == 0.0 {
            continue;
        }
        let row = x.row(r);
        a[0][0] += wr;
        b[0] += wr * y[r];
        for i in 0..d {
            let xi = wr * row[i];
            a[0][i + 1] += xi;
            b[i + 1] += xi * y[r];
            for j in i..d {
                a[i + 1][j + 1] += xi * row[j];
            }
        }
    }
    for i in 0..=d {
        for j in 0..i {
            a[i][j] = a[j][i];
        }
    }
    let beta = solve_spd(a, b);
    Ok(FittedModel::Linear {
        intercept: beta[0],
        coefficients: beta[1..].to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{fit, EstimatorKind, EstimatorSpec, Matrix};

    #[test]
    fn recovers_exact_line() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let y = [1.0, 3.0, 5.0, 7.0]; // y = 1 + 2x
        let m = fit(&EstimatorSpec::new(EstimatorKind::Linear), &x, &y, None, 0).unwrap();
        match &m.model {
            FittedModel::Linear { intercept, coefficients } => {
                assert!((intercept - 1.0).abs() < 1e-8);
                assert!((coefficients[0] - 2.0).abs() < 1e-8);
            }
            _ => panic!(),
        }
        let p = m.predict(&Matrix::from_rows(&[vec![10.0]]).unwrap()).unwrap();
        assert!((p[0] - 21.0).abs() < 1e-7);
    }

    #[test]
    fn two_features_and_weights() {
        // Fit y = 4 - x0 + 0.5*x1 exactly; zero-weight rows carry garbage
        // targets and must not influence the solution.
        let mut rows = Vec::new();
        let mut y = Vec::new();
        let mut w = Vec::new();
        for i in 0..12 {
            let x0 = f64::from(i % 4);
            let x1 = f64::from(i / 4) * 2.0;
            rows.push(vec![x0, x1]);
            y.push(4.0 - x0 + 0.5 * x1);
            w.push(1.0 + f64::from(i % 3));
        }
        rows.push(vec![100.0, -50.0]);
        y.push(1e6);
        w.push(0.0);
        let x = Matrix::from_rows(&rows).unwrap();
        let m = fit(
            &EstimatorSpec::new(EstimatorKind::Linear),
            &x,
            &y,
            Some(&w),
            0,
        )
        .unwrap();
        match &m.model {
            FittedModel::Linear { intercept, coefficients } => {
                assert!((intercept - 4.0).abs() < 1e-7);
                assert!((coefficients[0] + 1.0).abs() < 1e-7);
                assert!((coefficients[1] - 0.5).abs() < 1e-7);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn duplicate_column_stays_finite() {
        let x = Matrix::from_rows(&[
            vec![1.0, 1.0],
            vec![2.0, 2.0],
            vec![3.0, 3.0],
            vec![4.0, 4.0],
        ])
        .unwrap();
        let y = [2.0, 4.0, 6.0, 8.0];
        let m = fit(&EstimatorSpec::new(EstimatorKind::Linear), &x, &y, None, 0).unwrap();
        let p = m.predict(&x).unwrap();
        for (pi, yi) in p.iter().zip(&y) {
            assert!(pi.is_finite());
            assert!((pi - yi).abs() < 1e-5);
        }
    }
}
