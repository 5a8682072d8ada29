use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative optimality tolerance on the dual vector.
const NNLS_TOL: f64 = 1e-12;

fn solve_passive(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[usize]) -> Result<DVector<f64>> {
    let sub = a.select_columns(passive);
    sub.svd(true, true).solve(b, 1e-15).map_err(|e| Error::Numerical(format!("NNLS subproblem: {e}")))
}

/// `argmin ||A x - b||` subject to `x >= 0`, by the Lawson–Hanson active-set
/// method.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let (m, n) = a.shape();
    if b.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: b.len() });
    }
    let mut x = DVector::zeros(n);
    let mut in_passive = vec![false; n];
    let scale = (a.transpose() * b).amax().max(f64::MIN_POSITIVE);
    let tol = NNLS_TOL * scale;
    let max_outer = 3 * n + 10;

    for _ in 0..max_outer {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n).filter(|&j| !in_passive[j]).max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate.filter(|&j| w[j] > tol) else {
            return Ok(x);
        };
        in_passive[j] = true;
        loop {
            let passive: Vec<usize> = (0..n).filter(|&i| in_passive[i]).collect();
            let s_p = solve_passive(a, b, &passive)?;
            if s_p.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (k, &i) in passive.iter().enumerate() {
                    x[i] = s_p[k];
                }
                break;
            }
            // step back toward the previous feasible point
            let alpha = passive
                .iter()
                .enumerate()
                .filter(|(k, _)| s_p[*k] <= 0.0)
                .map(|(k, &i)| x[i] / (x[i] - s_p[k]))
                .fold(f64::INFINITY, f64::min);
            for (k, &i) in passive.iter().enumerate() {
                x[i] += alpha * (s_p[k] - x[i]);
            }
            let floor = 1e-14 * x.amax();
            for &i in &passive {
                if x[i] <= floor {
                    x[i] = 0.0;
                    in_passive[i] = false;
                }
            }
            if !in_passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    Err(Error::Numerical(format!("NNLS did not converge in {max_outer} iterations")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_solution_is_least_squares() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let want = DVector::from_vec(vec![0.3, 0.7]);
        let x = nnls(&a, &(&a * &want)).unwrap();
        assert!((x - want).amax() < 1e-12);
    }

    #[test]
    fn negative_component_is_clamped() {
        // unconstrained solution is (1, -1); the constrained optimum is (1/2, 0)
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        let a = a + DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = DVector::from_vec(vec![0.0, 1.0]);
        let x = nnls(&a, &b).unwrap();
        assert!(x.iter().all(|v| *v >= 0.0));
        // KKT: gradient nonpositive on zeros, zero on the support
        let g = a.transpose() * (&b - &a * &x);
        for i in 0..2 {
            if x[i] > 0.0 {
                assert!(g[i].abs() < 1e-12);
            } else {
                assert!(g[i] <= 1e-12);
            }
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        assert_eq!(nnls(&a, &DVector::zeros(2)).unwrap(), DVector::zeros(2));
    }
}
