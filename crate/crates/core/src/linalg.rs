//! Small dense least-squares helpers.

/// Solves `A x = b` for symmetric positive-definite `A` (row-major, `k × k`)
/// by Cholesky factorisation. `None` if `A` is not positive definite.
pub(crate) fn solve_spd(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let k = b.len();
    debug_assert_eq!(a.len(), k * k);
    let mut l = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..=i {
            let s: f64 = (0..j).map(|m| l[i * k + m] * l[j * k + m]).sum();
            if i == j {
                let d = a[i * k + i] - s;
                if !(d > 0.0) {
                    return None;
                }
                l[i * k + i] = d.sqrt();
            } else {
                l[i * k + j] = (a[i * k + j] - s) / l[j * k + j];
            }
        }
    }
    let mut z = vec![0.0; k];
    for i in 0..k {
        let s: f64 = (0..i).map(|m| l[i * k + m] * z[m]).sum();
        z[i] = (b[i] - s) / l[i * k + i];
    }
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|m| l[m * k + i] * x[m]).sum();
        x[i] = (z[i] - s) / l[i * k + i];
    }
    Some(x)
}

/// Ridge regression coefficients for rows of `x` (each of width `k`) against
/// `y`, penalising every coefficient by `ridge`.
pub(crate) fn ridge_fit(rows: &[Vec<f64>], y: &[f64], ridge: f64) -> Option<Vec<f64>> {
    let k = rows.first()?.len();
    let mut gram = vec![0.0; k * k];
    let mut rhs = vec![0.0; k];
    for (r, &t) in rows.iter().zip(y) {
        for i in 0..k {
            rhs[i] += r[i] * t;
            for j in 0..=i {
                gram[i * k + j] += r[i] * r[j];
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            gram[j * k + i] = gram[i * k + j];
        }
        gram[i * k + i] += ridge;
    }
    solve_spd(&gram, &rhs)
}

/// Sum of squared residuals of `rows · beta` against `y`.
pub(crate) fn sse(rows: &[Vec<f64>], y: &[f64], beta: &[f64]) -> f64 {
    rows.iter()
        .zip(y)
        .map(|(r, &t)| {
            let fit: f64 = r.iter().zip(beta).map(|(a, b)| a * b).sum();
            (t - fit) * (t - fit)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        // [[4,2],[2,3]] x = [2,1] -> x = [0.5, 0]
        let x = solve_spd(&[4.0, 2.0, 2.0, 3.0], &[2.0, 1.0]).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-12 && x[1].abs() < 1e-12);
        assert!(solve_spd(&[1.0, 2.0, 2.0, 1.0], &[1.0, 1.0]).is_none());
    }

    #[test]
    fn recovers_exact_line() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![1.0, i as f64]).collect();
        let y: Vec<f64> = (0..20).map(|i| 3.0 - 0.5 * i as f64).collect();
        let beta = ridge_fit(&rows, &y, 0.0).unwrap();
        assert!((beta[0] - 3.0).abs() < 1e-9 && (beta[1] + 0.5).abs() < 1e-9);
        assert!(sse(&rows, &y, &beta) < 1e-18);
    }
}
