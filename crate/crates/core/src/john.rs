//! Maximum-volume inscribed ellipsoid, John's position, and the
//! decomposition of the identity carried by the contact points.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, scaled, sub, Cholesky, Lu, Matrix, SymMatrix};
use crate::model::{normalize_polytope, AffineMap, Halfspace, HalfspaceFamily, Polytope};
use crate::nnls::{min_norm_nonnegative, nnls};
use crate::volume::ln_ball_volume;

/// Slack below which a normalized constraint touches the unit ball.
pub const CONTACT_TOL: f64 = 1e-6;
/// Decomposition residuals accepted by [`john_decomposition`].
pub const RESIDUAL_TOL: f64 = 1e-5;
/// Weights below this are dropped from the decomposition.
pub const WEIGHT_FLOOR: f64 = 1e-10;
/// Contact directions closer than this (in angle) are merged.
const MERGE_ANGLE: f64 = 1e-8;

/// Barrier-method stopping gap on `log det B`.
const TARGET_GAP: f64 = 1e-9;
const BARRIER_GROWTH: f64 = 10.0;
const NEWTON_TOL: f64 = 1e-10;
const MAX_NEWTON: usize = 2000;

/// `{B y + center : ‖y‖ ≤ 1}`
#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    pub center: Vec<f64>,
    pub shape: SymMatrix,
}

impl Ellipsoid {
    pub fn log_volume(&self) -> Result<f64> {
        let log_det = Cholesky::new(&self.shape)?.log_det();
        Ok(log_det + ln_ball_volume(self.center.len()))
    }
}

/// A John decomposition `Σ c_j u_j⊗u_j = I` (and `Σ c_j u_j = 0` for
/// halfspace families) read off the image of `P` under `map`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JohnForm {
    /// Sends the original coordinates to John's position.
    pub map: AffineMap,
    /// Member index of each contact (lowest index among merged duplicates).
    pub indices: Vec<usize>,
    pub contacts: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub residual_identity: f64,
    pub residual_barycenter: f64,
}

impl JohnForm {
    pub fn dim(&self) -> usize {
        self.map.translation.len()
    }
}

/// MVEE of a normalized family `{⟨a_i, x⟩ ≤ 1}` as `(B, c)`. With
/// `centered` the center is pinned at the origin (strip families).
struct Barrier<'a> {
    n: usize,
    normals: &'a [Vec<f64>],
    centered: bool,
    pairs: Vec<(usize, usize)>,
}

impl<'a> Barrier<'a> {
    fn new(n: usize, normals: &'a [Vec<f64>], centered: bool) -> Self {
        let pairs = (0..n).flat_map(|l| (0..=l).map(move |k| (k, l))).collect();
        Self {
            n,
            normals,
            centered,
            pairs,
        }
    }

    fn n_vars(&self) -> usize {
        self.pairs.len() + if self.centered { 0 } else { self.n }
    }

    fn unpack(&self, x: &[f64]) -> (SymMatrix, Vec<f64>) {
        let mut b = SymMatrix::zeros(self.n);
        for (q, &(k, l)) in self.pairs.iter().enumerate() {
            b.set(k, l, x[q]);
        }
        let c = if self.centered {
            vec![0.0; self.n]
        } else {
            x[self.pairs.len()..].to_vec()
        };
        (b, c)
    }

    fn pack(&self, b: &SymMatrix, c: &[f64]) -> Vec<f64> {
        let mut x: Vec<f64> = self.pairs.iter().map(|&(k, l)| b.get(k, l)).collect();
        if !self.centered {
            x.extend_from_slice(c);
        }
        x
    }

    /// `(s_i, B a_i, s_i² − ‖B a_i‖²)` per constraint.
    fn terms(&self, b: &SymMatrix, c: &[f64]) -> Vec<(f64, Vec<f64>, f64)> {
        self.normals
            .iter()
            .map(|a| {
                let s = 1.0 - dot(a, c);
                let v = b.mul_vec(a);
                let g = s * s - dot(&v, &v);
                (s, v, g)
            })
            .collect()
    }

    /// `−t log det B − Σ log g_i`, or `None` outside the domain.
    fn value(&self, x: &[f64], t: f64) -> Option<f64> {
        let (b, c) = self.unpack(x);
        let chol = Cholesky::new(&b).ok()?;
        let mut f = -t * chol.log_det();
        for (s, _, g) in self.terms(&b, &c) {
            if s <= 0.0 || g <= 0.0 {
                return None;
            }
            f -= g.ln();
        }
        f.is_finite().then_some(f)
    }

    fn gradient_hessian(&self, x: &[f64], t: f64) -> Result<(Vec<f64>, SymMatrix)> {
        let n = self.n;
        let p = self.pairs.len();
        let nv = self.n_vars();
        let (b, c) = self.unpack(x);
        let w = Lu::new(b.as_matrix())?.inverse();
        let mut grad = vec![0.0; nv];
        let mut hess = Matrix::zeros(nv, nv);

        // −t log det B: gradient −t tr(W E_q), Hessian t tr(W E_q W E_r)
        let entries = |(k, l): (usize, usize)| -> Vec<(usize, usize)> {
            if k == l {
                vec![(k, k)]
            } else {
                vec![(k, l), (l, k)]
            }
        };
        for (q, &pq) in self.pairs.iter().enumerate() {
            let eq = entries(pq);
            grad[q] = -t * eq.iter().map(|&(i, j)| w[(j, i)]).sum::<f64>();
            for (r, &pr) in self.pairs.iter().enumerate().take(q + 1) {
                let er = entries(pr);
                let mut h = 0.0;
                for &(a1, b1) in &eq {
                    for &(c1, d1) in &er {
                        h += w[(d1, a1)] * w[(b1, c1)];
                    }
                }
                hess[(q, r)] = t * h;
                hess[(r, q)] = t * h;
            }
        }

        // −log g_i with g = s² − ‖v‖², v = B a = L a-coefficients · x
        let mut lmat = Matrix::zeros(n, p);
        let mut dg = vec![0.0; nv];
        for (a, (s, v, g)) in self.normals.iter().zip(self.terms(&b, &c)) {
            for (q, &(k, l)) in self.pairs.iter().enumerate() {
                for r in 0..n {
                    lmat[(r, q)] = 0.0;
                }
                if k == l {
                    lmat[(k, q)] = a[k];
                } else {
                    lmat[(k, q)] = a[l];
                    lmat[(l, q)] = a[k];
                }
            }
            let ltv = lmat.tr_mul_vec(&v);
            for q in 0..p {
                dg[q] = -2.0 * ltv[q];
            }
            if !self.centered {
                for i in 0..n {
                    dg[p + i] = -2.0 * s * a[i];
                }
            }
            for i in 0..nv {
                grad[i] -= dg[i] / g;
                for j in 0..=i {
                    let mut h = dg[i] * dg[j] / (g * g);
                    // −∇²g / g
                    if i < p && j < p {
                        let ll: f64 = (0..n).map(|r| lmat[(r, i)] * lmat[(r, j)]).sum();
                        h += 2.0 * ll / g;
                    } else if i >= p && j >= p {
                        h -= 2.0 * a[i - p] * a[j - p] / g;
                    }
                    hess[(i, j)] += h;
                    if i != j {
                        hess[(j, i)] += h;
                    }
                }
            }
        }
        Ok((grad, SymMatrix::from_matrix(&hess)))
    }

    fn solve(&self, x0: Vec<f64>) -> Result<(SymMatrix, Vec<f64>)> {
        let m = self.normals.len() as f64;
        let mut x = x0;
        let mut t = 1.0;
        let mut iterations = 0;
        loop {
            // centering
            loop {
                if iterations >= MAX_NEWTON {
                    return Err(Error::NoConvergence {
                        iterations,
                        residual: 2.0 * m / t,
                    });
                }
                iterations += 1;
                let (grad, hess) = self.gradient_hessian(&x, t)?;
                let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
                let step = damped_solve(&hess, &neg)?;
                let decrement = -dot(&grad, &step);
                if decrement / 2.0 <= NEWTON_TOL {
                    break;
                }
                let f0 = self.value(&x, t).ok_or(Error::EmptyInterior)?;
                let mut alpha = 1.0;
                let mut accepted = false;
                while alpha > 1e-14 {
                    let trial: Vec<f64> = x.iter().zip(&step).map(|(a, d)| a + alpha * d).collect();
                    if let Some(f) = self.value(&trial, t) {
                        if f < f0 && f <= f0 - 0.25 * alpha * decrement {
                            x = trial;
                            accepted = true;
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                if !accepted {
                    // roundoff floor: no representable decrease remains
                    break;
                }
            }
            if 2.0 * m / t <= TARGET_GAP {
                break;
            }
            t *= BARRIER_GROWTH;
        }
        debug!("mvee: {iterations} Newton steps, final t = {t:.1e}");
        Ok(self.unpack(&x))
    }
}

/// Newton step, shifting the Hessian diagonal when it is too badly
/// conditioned to factor (late barrier stages on elongated bodies).
fn damped_solve(hess: &SymMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    if let Ok(ch) = Cholesky::new(hess) {
        return Ok(ch.solve(rhs));
    }
    let scale = (0..hess.order()).map(|i| hess.get(i, i).abs()).fold(0.0, f64::max);
    let mut mu = 1e-14 * scale.max(f64::MIN_POSITIVE);
    while mu <= scale {
        let mut shifted = hess.clone();
        for i in 0..hess.order() {
            shifted.set(i, i, hess.get(i, i) + mu);
        }
        if let Ok(ch) = Cholesky::new(&shifted) {
            return Ok(ch.solve(rhs));
        }
        mu *= 100.0;
    }
    Err(Error::SingularMatrix)
}

/// Normalized family, the translation used to normalize it, and the MVEE
/// `(B, c)` in normalized coordinates.
struct NormalizedMvee {
    family: HalfspaceFamily,
    shift: AffineMap,
    shape: SymMatrix,
    center: Vec<f64>,
}

fn normalized_mvee(p: &Polytope) -> Result<NormalizedMvee> {
    let (family, shift) = normalize_polytope(p)?;
    let n = p.dim();
    let normals: Vec<Vec<f64>> = family.members.iter().map(|h| h.a.clone()).collect();
    let r = normals
        .iter()
        .map(|a| 1.0 / norm(a))
        .fold(f64::INFINITY, f64::min);
    let barrier = Barrier::new(n, &normals, family.symmetric);
    let mut b0 = SymMatrix::identity(n);
    b0.scale(0.5 * r);
    let (shape, center) = barrier.solve(barrier.pack(&b0, &vec![0.0; n]))?;
    Ok(NormalizedMvee {
        family,
        shift,
        shape,
        center,
    })
}

/// Maximum-volume ellipsoid inscribed in `P`, by a damped Newton barrier
/// method on `log det B` subject to `‖B a_i‖ + ⟨a_i, c⟩ ≤ 1`.
pub fn compute_mvee(p: &Polytope) -> Result<Ellipsoid> {
    let sol = normalized_mvee(p)?;
    Ok(Ellipsoid {
        center: sub(&sol.center, &sol.shift.translation),
        shape: sol.shape,
    })
}

/// Image of `P` under `T(x) = B⁻¹(x − center)`, where the MVEE becomes the
/// unit ball, with every offset rewritten to 1. Member order is kept.
pub fn to_john_position(p: &Polytope) -> Result<(Polytope, AffineMap)> {
    let sol = normalized_mvee(p)?;
    let inv = Lu::new(sol.shape.as_matrix())?.inverse();
    let members = sol
        .family
        .members
        .iter()
        .map(|h| {
            let s = 1.0 - dot(&h.a, &sol.center);
            Halfspace::new(scaled(&sol.shape.mul_vec(&h.a), 1.0 / s), 1.0)
        })
        .collect::<Vec<_>>();
    let worst = members.iter().map(|h| norm(&h.a)).fold(0.0, f64::max);
    if worst > 1.0 + 1e-8 {
        return Err(Error::InternalCheckFailed(format!(
            "unit ball leaves the John image (max normal length {worst})"
        )));
    }
    let family = HalfspaceFamily::new(p.dim(), sol.family.symmetric, members)?;
    let translation = scaled(&inv.mul_vec(&sol.center), -1.0);
    let map = AffineMap {
        linear: inv,
        translation,
    }
    .after(&sol.shift);
    Ok((Polytope::new(family)?, map))
}

/// Contacts of a polytope in John's position and weights solving
/// `Σ c_j u_j⊗u_j = I` (plus `Σ c_j u_j = 0` unless `symmetric`) by
/// non-negative least squares. For strip families each strip contributes
/// one direction.
pub fn john_decomposition(p: &Polytope, symmetric: bool) -> Result<JohnForm> {
    let n = p.dim();
    let mut indices: Vec<usize> = Vec::new();
    let mut contacts: Vec<Vec<f64>> = Vec::new();
    for (i, h) in p.family().members.iter().enumerate() {
        let r = norm(&h.a);
        if (h.b - r) / h.b > CONTACT_TOL {
            continue;
        }
        let u = scaled(&h.a, 1.0 / r);
        let duplicate = contacts.iter().any(|v| {
            norm(&sub(v, &u)) < MERGE_ANGLE
                || (symmetric && norm(&crate::linalg::add(v, &u)) < MERGE_ANGLE)
        });
        if !duplicate {
            indices.push(i);
            contacts.push(u);
        }
    }
    let needed = if symmetric { n } else { n + 1 };
    if contacts.len() < needed {
        return Err(Error::ContactDeficit {
            found: contacts.len(),
            needed,
        });
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let sqrt2 = std::f64::consts::SQRT_2;
    for l in 0..n {
        for k in 0..=l {
            let (w, target) = if k == l { (1.0, 1.0) } else { (sqrt2, 0.0) };
            rows.push(contacts.iter().map(|u| w * u[k] * u[l]).collect());
            rhs.push(target);
        }
    }
    if !symmetric {
        for k in 0..n {
            rows.push(contacts.iter().map(|u| u[k]).collect());
            rhs.push(0.0);
        }
    }
    let m = Matrix::from_rows(&rows);
    let sol = nnls(&m, &rhs);
    // the weights are not unique once there are many contacts; prefer the
    // minimum-norm decomposition of the (feasible) NNLS target
    let weights = min_norm_nonnegative(&m, &m.mul_vec(&sol.x)).unwrap_or(sol.x);

    let keep: Vec<usize> = (0..contacts.len())
        .filter(|&j| weights[j] >= WEIGHT_FLOOR)
        .collect();
    let indices: Vec<usize> = keep.iter().map(|&j| indices[j]).collect();
    let contacts: Vec<Vec<f64>> = keep.iter().map(|&j| contacts[j].clone()).collect();
    let weights: Vec<f64> = keep.iter().map(|&j| weights[j]).collect();
    let (residual_identity, residual_barycenter) = decomposition_residuals(&contacts, &weights);
    let residual_barycenter = if symmetric { 0.0 } else { residual_barycenter };
    debug!(
        "john decomposition: {} contacts, residuals {residual_identity:.2e} / {residual_barycenter:.2e}",
        contacts.len()
    );
    let worst = residual_identity.max(residual_barycenter);
    if worst > RESIDUAL_TOL {
        return Err(Error::ResidualTooLarge(worst));
    }
    Ok(JohnForm {
        map: AffineMap::identity(n),
        indices,
        contacts,
        weights,
        residual_identity,
        residual_barycenter,
    })
}

/// `(‖I − Σ c_j u_j⊗u_j‖_F, ‖Σ c_j u_j‖₂)`
pub fn decomposition_residuals(u: &[Vec<f64>], c: &[f64]) -> (f64, f64) {
    let n = u.first().map_or(0, Vec::len);
    let a = SymMatrix::weighted_outer_sum(u, c);
    let mut bary = vec![0.0; n];
    for (v, &w) in u.iter().zip(c) {
        crate::linalg::axpy(w, v, &mut bary);
    }
    (a.identity_residual(), norm(&bary))
}

/// John's position followed by the decomposition; the returned polytope is
/// the John image and `map` in the form is the full normalization.
pub fn john_form(p: &Polytope) -> Result<(Polytope, JohnForm)> {
    let (image, map) = to_john_position(p)?;
    let mut form = john_decomposition(&image, p.family().symmetric)?;
    form.map = map;
    Ok((image, form))
}
