//! Deterministic spectral sparsification of a decomposition of the
//! identity by the two-sided barrier method, and the lift of a centered
//! decomposition in ℝⁿ to one in ℝⁿ⁺¹.

use log::debug;

use crate::error::{Error, Result};
use crate::john::{decomposition_residuals, RESIDUAL_TOL};
use crate::linalg::{sandwich_gamma, scaled, SandwichCertificate, SymMatrix};

/// Relative slack that still admits a vector when no index satisfies
/// `L ≥ U` exactly (the potentials are tight in exact arithmetic).
const ADMISSIBLE_SLACK: f64 = 1e-10;
/// Accepted residual of a lifted decomposition.
const LIFT_TOL: f64 = 1e-4;

/// `((√d + 1)/(√d − 1))²`
pub fn gamma_d(d: f64) -> f64 {
    let r = d.sqrt();
    ((r + 1.0) / (r - 1.0)).powi(2)
}

/// Step budget `⌈d n⌉`.
pub fn step_budget(d: f64, n: usize) -> usize {
    (d * n as f64 - 1e-9).ceil() as usize
}

/// `A = Σ_{j∈σ} t_j u_j⊗u_j` with `I ⪯ A ⪯ γ I`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDecomposition {
    /// Selected positions in the input list, ascending.
    pub sigma: Vec<usize>,
    /// Weight on each selected vector, aligned with `sigma`.
    pub weights: Vec<f64>,
    pub a: SymMatrix,
    pub certificate: SandwichCertificate,
    pub d: f64,
}

fn check_d(d: f64) -> Result<()> {
    if !(d.is_finite() && d > 1.0) {
        return Err(Error::Value(format!("d must be a finite number above 1, got {d}")));
    }
    Ok(())
}

fn finish(
    u: &[Vec<f64>],
    coeffs: &[f64],
    scale: f64,
    d: f64,
) -> SparseDecomposition {
    let sigma: Vec<usize> = (0..u.len()).filter(|&j| coeffs[j] > 0.0).collect();
    let mut weights: Vec<f64> = sigma.iter().map(|&j| coeffs[j] / scale).collect();
    let vs: Vec<Vec<f64>> = sigma.iter().map(|&j| u[j].clone()).collect();
    let mut a = SymMatrix::weighted_outer_sum(&vs, &weights);
    let low = sandwich_gamma(&a).lambda_min;
    if low < 1.0 {
        // an inexact input decomposition can leave λ_min just under 1
        for w in &mut weights {
            *w /= low;
        }
        a = SymMatrix::weighted_outer_sum(&vs, &weights);
    }
    let certificate = sandwich_gamma(&a);
    SparseDecomposition {
        sigma,
        weights,
        a,
        certificate,
        d,
    }
}

/// Selects at most `⌈d n⌉` of the vectors, reweighted so that
/// `I ⪯ Σ t_j u_j⊗u_j ⪯ γ_d I`. The input must satisfy
/// `Σ a_j u_j⊗u_j = I` to within `1e−5`.
pub fn bss_select(u: &[Vec<f64>], a: &[f64], d: f64) -> Result<SparseDecomposition> {
    check_d(d)?;
    if u.is_empty() || u.len() != a.len() {
        return Err(Error::Value("vectors and weights must be non-empty and aligned".into()));
    }
    let n = u[0].len();
    let (residual, _) = decomposition_residuals(u, a);
    if !(residual <= RESIDUAL_TOL) || a.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::InvalidDecomposition(residual));
    }
    let q = step_budget(d, n);
    if u.len() <= q {
        return Ok(finish(u, a, 1.0, d));
    }

    let sd = d.sqrt();
    let delta_l = 1.0;
    let delta_u = (sd + 1.0) / (sd - 1.0);
    let mut lower = -(n as f64) * sd;
    let mut upper = n as f64 * (d + sd) / (sd - 1.0);
    let w: Vec<Vec<f64>> = u.iter().zip(a).map(|(v, &c)| scaled(v, c.sqrt())).collect();
    let mut mat = SymMatrix::zeros(n);
    let mut coeffs = vec![0.0; u.len()];

    for step in 0..q {
        let eig = mat.eigen();
        let (up, lp) = (upper + delta_u, lower + delta_l);
        let phi = |f: &dyn Fn(f64) -> f64| eig.values.iter().map(|&x| f(x)).sum::<f64>();
        let phi_u = phi(&|x| 1.0 / (upper - x));
        let phi_up = phi(&|x| 1.0 / (up - x));
        let phi_l = phi(&|x| 1.0 / (x - lower));
        let phi_lp = phi(&|x| 1.0 / (x - lp));
        let quotients: Vec<(f64, f64)> = w
            .iter()
            .map(|wj| {
                let z = eig.project(wj);
                let (mut u1, mut u2, mut l1, mut l2) = (0.0, 0.0, 0.0, 0.0);
                for (zk, &x) in z.iter().zip(&eig.values) {
                    let z2 = zk * zk;
                    u1 += z2 / (up - x);
                    u2 += z2 / ((up - x) * (up - x));
                    l1 += z2 / (x - lp);
                    l2 += z2 / ((x - lp) * (x - lp));
                }
                (u2 / (phi_u - phi_up) + u1, l2 / (phi_lp - phi_l) - l1)
            })
            .collect();

        // smallest non-negative gap L − U first, then lowest index
        let mut pick: Option<(usize, f64)> = None;
        for (j, &(uq, lq)) in quotients.iter().enumerate() {
            let gap = lq - uq;
            if gap >= 0.0 && pick.is_none_or(|(_, g)| gap < g) {
                pick = Some((j, gap));
            }
        }
        if pick.is_none() {
            for (j, &(uq, lq)) in quotients.iter().enumerate() {
                let gap = lq - uq;
                if gap >= -ADMISSIBLE_SLACK * (uq + lq) && pick.is_none_or(|(_, g)| gap > g) {
                    pick = Some((j, gap));
                }
            }
        }
        let Some((j, _)) = pick else {
            return Err(Error::BarrierStall(step));
        };
        let (uq, lq) = quotients[j];
        let t = 2.0 / (uq + lq);
        mat.add_rank_one(t, &w[j]);
        coeffs[j] += t * a[j];
        upper = up;
        lower = lp;
    }
    debug!("bss: {q} steps, barriers l = {lower:.4}, u = {upper:.4}");
    let sparse = finish(u, &coeffs, lower, d);
    if sparse.certificate.gamma_achieved > gamma_d(d) * (1.0 + 1e-7) {
        return Err(Error::InternalCheckFailed(format!(
            "sparsifier ratio {} exceeds {}",
            sparse.certificate.gamma_achieved,
            gamma_d(d)
        )));
    }
    Ok(sparse)
}

/// `v_j = √(n/(n+1)) (−u_j, 1/√n)` and `b_j = (n+1)/n · a_j`, turning a
/// centered decomposition in ℝⁿ into a decomposition of `I_{n+1}`.
pub fn lift_decomposition(u: &[Vec<f64>], a: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if u.is_empty() || u.len() != a.len() {
        return Err(Error::Value("vectors and weights must be non-empty and aligned".into()));
    }
    let (identity, barycenter) = decomposition_residuals(u, a);
    let worst = identity.max(barycenter);
    if !(worst <= RESIDUAL_TOL) {
        return Err(Error::InvalidDecomposition(worst));
    }
    let n = u[0].len() as f64;
    let s = (n / (n + 1.0)).sqrt();
    let tail = s / n.sqrt();
    let v: Vec<Vec<f64>> = u
        .iter()
        .map(|uj| {
            let mut vj: Vec<f64> = uj.iter().map(|x| -s * x).collect();
            vj.push(tail);
            vj
        })
        .collect();
    let b: Vec<f64> = a.iter().map(|x| x * (n + 1.0) / n).collect();
    let (lifted, _) = decomposition_residuals(&v, &b);
    if !(lifted <= LIFT_TOL) {
        return Err(Error::InvalidDecomposition(lifted));
    }
    Ok((v, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dot, norm};
    use crate::model::{random_unit, regular_simplex_normals};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn basis(n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                e
            })
            .collect()
    }

    fn signed_basis(n: usize) -> Vec<Vec<f64>> {
        basis(n)
            .into_iter()
            .flat_map(|e| [e.clone(), scaled(&e, -1.0)])
            .collect()
    }

    /// `m` random unit vectors reweighted to decompose the identity:
    /// `u_j = S^{−1/2} g_j / ‖·‖`, `a_j = ‖S^{−1/2} g_j‖²`.
    pub(crate) fn isotropic(rng: &mut ChaCha8Rng, n: usize, m: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let g: Vec<Vec<f64>> = (0..m).map(|_| random_unit(rng, n)).collect();
        let s = SymMatrix::weighted_outer_sum(&g, &vec![1.0; m]);
        let root = s.eigen().map(|x| 1.0 / x.sqrt());
        let mut u = Vec::new();
        let mut a = Vec::new();
        for gj in &g {
            let h = root.mul_vec(gj);
            let r = norm(&h);
            u.push(scaled(&h, 1.0 / r));
            a.push(r * r);
        }
        (u, a)
    }

    #[test]
    fn gamma_closed_forms() {
        assert_relative_eq!(gamma_d(4.0), 9.0, max_relative = 1e-14);
        assert_relative_eq!(gamma_d(9.0), 4.0, max_relative = 1e-14);
        assert_relative_eq!(gamma_d(2.0), (2f64.sqrt() + 1.0).powi(4), max_relative = 1e-13);
        assert_relative_eq!(gamma_d(2.0), 33.970_562_748_477_14, max_relative = 1e-13);
    }

    #[test]
    fn orthonormal_basis_is_kept() {
        let s = bss_select(&basis(3), &[1.0; 3], 2.0).unwrap();
        assert_eq!(s.sigma, vec![0, 1, 2]);
        assert_eq!(s.weights, vec![1.0; 3]);
        assert_relative_eq!(s.certificate.gamma_achieved, 1.0);
    }

    #[test]
    fn signed_basis_d4() {
        let s = bss_select(&signed_basis(3), &[0.5; 6], 4.0).unwrap();
        assert!(s.sigma.len() <= 12);
        assert!(s.certificate.gamma_achieved <= 9.0);
    }

    #[test]
    fn random_isotropic_d2() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (u, a) = isotropic(&mut rng, 3, 40);
        let s = bss_select(&u, &a, 2.0).unwrap();
        assert!(s.sigma.len() <= 6);
        assert!(s.certificate.lambda_min >= 1.0 - 1e-7);
        assert!(s.certificate.gamma_achieved <= gamma_d(2.0) * (1.0 + 1e-7));
    }

    #[test]
    fn certificate_matches_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (u, a) = isotropic(&mut rng, 4, 30);
        let s = bss_select(&u, &a, 4.0).unwrap();
        let vs: Vec<Vec<f64>> = s.sigma.iter().map(|&j| u[j].clone()).collect();
        let direct = SymMatrix::weighted_outer_sum(&vs, &s.weights);
        assert!(direct.sub(&s.a).frobenius_norm() < 1e-12);
        assert!(s.weights.iter().all(|&w| w > 0.0));
        assert!(s.sigma.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn rejects_non_decomposition() {
        assert!(matches!(
            bss_select(&basis(2), &[1.0, 0.5], 4.0),
            Err(Error::InvalidDecomposition(_))
        ));
        assert!(matches!(bss_select(&basis(2), &[1.0, 1.0], 1.0), Err(Error::Value(_))));
    }

    #[test]
    fn lift_of_single_vector() {
        let (v, b) = lift_decomposition(&signed_basis(2), &[0.5; 4]).unwrap();
        let s = (2.0f64 / 3.0).sqrt();
        assert_relative_eq!(v[0][0], -s, epsilon = 1e-15);
        assert_relative_eq!(v[0][1], 0.0);
        assert_relative_eq!(v[0][2], s / 2f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(norm(&v[0]), 1.0, epsilon = 1e-15);
        assert_relative_eq!(b[0], 0.75);
        let (res, _) = decomposition_residuals(&v, &b);
        assert!(res <= 1e-9);
    }

    #[test]
    fn lift_of_simplex() {
        let u = regular_simplex_normals(2);
        let (v, b) = lift_decomposition(&u, &[2.0 / 3.0; 3]).unwrap();
        let (res, _) = decomposition_residuals(&v, &b);
        assert!(res <= 1e-9);
        for vj in &v {
            assert_relative_eq!(dot(vj, vj), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn lift_needs_centered_input() {
        // orthonormal basis decomposes I but is not centered
        assert!(matches!(
            lift_decomposition(&basis(2), &[1.0, 1.0]),
            Err(Error::InvalidDecomposition(_))
        ));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn sandwich_holds(seed in any::<u64>(), n in 2usize..6, extra in 1usize..30, di in 0usize..3) {
                let d = [2.0, 4.0, 9.0][di];
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let (u, a) = isotropic(&mut rng, n, n + extra);
                let s = bss_select(&u, &a, d).unwrap();
                prop_assert!(s.sigma.len() <= step_budget(d, n));
                prop_assert!(s.certificate.lambda_min >= 1.0 - 1e-7);
                prop_assert!(s.certificate.gamma_achieved <= gamma_d(d) * (1.0 + 1e-7));
            }

            #[test]
            fn permuted_input_keeps_guarantee(seed in any::<u64>(), n in 2usize..5) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let (mut u, mut a) = isotropic(&mut rng, n, 5 * n);
                u.reverse();
                a.reverse();
                let s = bss_select(&u, &a, 2.0).unwrap();
                prop_assert!(s.certificate.gamma_achieved <= gamma_d(2.0) * (1.0 + 1e-7));
            }

            #[test]
            fn larger_d_still_certified(seed in any::<u64>(), n in 2usize..5) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let (u, a) = isotropic(&mut rng, n, 12 * n);
                for d in [2.0, 3.0, 6.0] {
                    let s = bss_select(&u, &a, d).unwrap();
                    prop_assert!(s.certificate.gamma_achieved <= gamma_d(d) * (1.0 + 1e-7));
                }
            }
        }
    }
}
