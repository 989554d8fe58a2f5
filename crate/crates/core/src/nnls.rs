//! Lawson–Hanson active-set non-negative least squares.

use crate::linalg::{dot, lstsq, Cholesky, Matrix, SymMatrix};

#[derive(Debug, Clone)]
pub struct NnlsSolution {
    pub x: Vec<f64>,
    /// `‖A x − b‖₂`
    pub residual: f64,
    pub iterations: usize,
}

/// Solves `min ‖A x − b‖₂` subject to `x ≥ 0`.
pub fn nnls(a: &Matrix, b: &[f64]) -> NnlsSolution {
    let (m, n) = (a.rows(), a.cols());
    assert_eq!(b.len(), m);
    let mut x = vec![0.0; n];
    let mut passive = vec![false; n];
    let mut blocked = vec![false; n];
    let scale = a.max_abs() * b.iter().fold(0.0_f64, |s, v| s.max(v.abs())).max(1.0);
    let tol = 1e-13 * scale.max(1e-300) * (m.max(n) as f64);
    let max_outer = 3 * n + 10;
    let mut iterations = 0;

    let residual_vec = |x: &[f64]| -> Vec<f64> {
        let ax = a.mul_vec(x);
        b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
    };

    for _ in 0..max_outer {
        let r = residual_vec(&x);
        let w = a.tr_mul_vec(&r);
        let candidate = (0..n)
            .filter(|&j| !passive[j] && !blocked[j])
            .max_by(|&i, &j| w[i].total_cmp(&w[j]))
            .filter(|&j| w[j] > tol);
        let Some(j) = candidate else {
            break;
        };
        passive[j] = true;
        iterations += 1;

        // inner loop: keep the passive-set solution strictly positive
        loop {
            let cols: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
            let sub = Matrix::from_fn(m, cols.len(), |i, k| a[(i, cols[k])]);
            let z = match lstsq(&sub, b) {
                Ok(z) => z,
                Err(_) => {
                    // dependent column: drop the newest entry and stop growing
                    passive[j] = false;
                    blocked[j] = true;
                    break;
                }
            };
            if z.iter().all(|&v| v > 0.0) {
                for (k, &c) in cols.iter().enumerate() {
                    x[c] = z[k];
                }
                blocked.iter_mut().for_each(|b| *b = false);
                break;
            }
            let mut alpha = f64::INFINITY;
            for (k, &c) in cols.iter().enumerate() {
                if z[k] <= 0.0 {
                    let denom = x[c] - z[k];
                    if denom > 0.0 {
                        alpha = alpha.min(x[c] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (k, &c) in cols.iter().enumerate() {
                x[c] += alpha * (z[k] - x[c]);
            }
            for &c in &cols {
                if x[c] <= 1e-15 * scale.max(1.0) {
                    x[c] = 0.0;
                    passive[c] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    let r = residual_vec(&x);
    NnlsSolution {
        residual: dot(&r, &r).sqrt(),
        x,
        iterations,
    }
}

/// Minimum-norm solution of `A x = b, x ≥ 0` by semismooth Newton on the
/// dual `½‖(Aᵀy)₊‖² − bᵀy`. Unlike the NNLS vertex, it is unique, so it
/// does not depend on how the rows of `A` are expressed. `b` must be
/// feasible; returns `None` if Newton stalls.
pub fn min_norm_nonnegative(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let r = a.rows();
    let bnorm = dot(b, b).sqrt();
    let primal = |y: &[f64]| -> Vec<f64> { a.tr_mul_vec(y).into_iter().map(|v| v.max(0.0)).collect() };
    let dual = |y: &[f64]| -> f64 {
        let x = primal(y);
        0.5 * dot(&x, &x) - dot(b, y)
    };
    let mut y = b.to_vec();
    let mut settled = None;
    for _ in 0..200 {
        let x = primal(&y);
        let ax = a.mul_vec(&x);
        let g: Vec<f64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
        let gnorm = dot(&g, &g).sqrt();
        if gnorm <= 1e-14 * (1.0 + bnorm) {
            return Some(x);
        }
        // past this point a stalled line search is roundoff, not failure
        let close = gnorm <= 1e-10 * (1.0 + bnorm);
        if close {
            settled = Some(x.clone());
        }
        let v = a.tr_mul_vec(&y);
        let mut h = SymMatrix::zeros(r);
        for (j, &vj) in v.iter().enumerate() {
            if vj > 0.0 {
                h.add_rank_one(1.0, &a.column(j));
            }
        }
        let mu = 1e-13 * h.trace().max(1.0);
        for i in 0..r {
            h.set(i, i, h.get(i, i) + mu);
        }
        let step: Vec<f64> = Cholesky::new(&h).ok()?.solve(&g).into_iter().map(|v| -v).collect();
        let slope = dot(&g, &step);
        let f0 = dual(&y);
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = y.iter().zip(&step).map(|(p, q)| p + t * q).collect();
            if dual(&trial) <= f0 + 1e-4 * t * slope {
                y = trial;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return settled;
            }
        }
    }
    settled
}
