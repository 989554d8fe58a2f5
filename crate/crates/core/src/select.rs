//! Selection pipelines and their geometric primitives.
//!
//! * [`select_symmetric`]: John's position, one contact per strip, barrier
//!   sparsification; at most `⌈dn⌉` strips.
//! * [`select_halfspaces_lifted`]: the same in ℝⁿ⁺¹ after lifting the
//!   centered decomposition, plus a Carathéodory face for the correction
//!   vector; at most `⌈d(n+1)⌉ + n + 1` halfspaces.
//! * [`select_naszodi`]: a Dvoretzky–Rogers basis plus the face where a ray
//!   leaves the contact hull; at most `2n` halfspaces.

use std::fmt;
use std::str::FromStr;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::blieb::{bl_gaussian_search, kappa_weights, DEFAULT_SWEEPS};
use crate::error::{Error, Result};
use crate::john::{decomposition_residuals, john_form, JohnForm, RESIDUAL_TOL};
use crate::linalg::{
    distance_to_span, gram_schmidt_step, lstsq, norm, orthonormal_complement, scaled, sub,
    Lu, Matrix,
};
use crate::lp::{LinearProgram, Relation};
use crate::model::{HalfspaceFamily, Polytope};
use crate::sparsify::{bss_select, gamma_d, lift_decomposition, step_budget};
use crate::volume::ln_gamma_half;

/// Coefficients at or below this are treated as zero in LP solutions.
const SUPPORT_TOL: f64 = 1e-12;
/// Accepted reconstruction error of a convex combination.
const HULL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Symmetric,
    Lifted,
    Naszodi,
}

impl Algorithm {
    pub fn uses_d(self) -> bool {
        !matches!(self, Algorithm::Naszodi)
    }

    /// Largest admissible selection size in dimension `n`.
    pub fn cap(self, n: usize, d: f64) -> usize {
        match self {
            Algorithm::Symmetric => step_budget(d, n),
            Algorithm::Lifted => step_budget(d, n + 1) + n + 1,
            Algorithm::Naszodi => 2 * n,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Symmetric => "symmetric",
            Algorithm::Lifted => "lifted",
            Algorithm::Naszodi => "naszodi",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric" => Ok(Algorithm::Symmetric),
            "lifted" => Ok(Algorithm::Lifted),
            "naszodi" => Ok(Algorithm::Naszodi),
            other => Err(Error::Value(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// Diagnostics carried along with a selection.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub residual_identity: f64,
    pub residual_barycenter: f64,
    pub contacts: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub kappa_sum: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bl_constant_estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub correction_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dr_distances: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ray_exit_norm: Option<f64>,
    /// `n log(2 / (√e √log(1+d)))`, a reference lower bound on `log|P|`
    /// for strip families in John's position, reported for context.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reference_log_lower_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub algorithm: Algorithm,
    pub d: Option<f64>,
    /// Member indices into the input family, ascending.
    pub selected: Vec<usize>,
    pub s: usize,
    pub gamma_achieved: f64,
    /// Natural log of the guaranteed bound on `vol(selected) / vol(P)`.
    pub certified_log_ratio: f64,
    pub kappa: Vec<f64>,
    pub provenance: Provenance,
}

/// Natural log of the certified volume-ratio bound. `d` is ignored for
/// [`Algorithm::Naszodi`].
pub fn certified_bound(algorithm: Algorithm, n: usize, d: f64) -> f64 {
    let nf = n as f64;
    let ln_pi = std::f64::consts::PI.ln();
    let ln_gamma = ln_gamma_half(n as u32 + 2);
    match algorithm {
        Algorithm::Symmetric => {
            let r = d.sqrt();
            nf * (2.0 / std::f64::consts::PI.sqrt() * (r + 1.0) / (r - 1.0)).ln() + ln_gamma
        }
        Algorithm::Lifted => {
            let n1 = nf + 1.0;
            0.5 * n1 * gamma_d(d).ln() + 0.5 * nf * nf.ln() + 1.5 * n1 * n1.ln() + ln_gamma
                - 0.5 * nf * ln_pi
                - ln_gamma_half(2 * n as u32 + 2)
        }
        Algorithm::Naszodi => {
            0.5 * nf * ln_pi
                + nf * 2f64.ln()
                + nf * (nf + 1.0).ln()
                + 0.5 * nf * nf.ln()
                + 0.5 * ln_gamma_half(2 * n as u32 + 2)
                - ln_gamma
        }
    }
}

/// `n log(2 / (√e √log(1 + d)))`
pub fn symmetric_lower_bound(n: usize, d: f64) -> f64 {
    n as f64 * (2.0 / (0.5f64.exp() * (1.0 + d).ln().sqrt())).ln()
}

/// Distance of each vector to the span of the ones before it.
pub fn span_distances(vectors: &[Vec<f64>]) -> Vec<f64> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    vectors
        .iter()
        .map(|v| {
            let dist = distance_to_span(&basis, v);
            if let Some(q) = gram_schmidt_step(&basis, v, 1e-14) {
                basis.push(q);
            }
            dist
        })
        .collect()
}

/// Dvoretzky–Rogers sequence: the heaviest contact first, then greedily
/// the contact farthest from the span of those chosen. Ties go to the
/// lowest index.
pub fn dr_select(contacts: &[Vec<f64>], weights: &[f64]) -> Result<Vec<usize>> {
    if contacts.is_empty() || contacts.len() != weights.len() {
        return Err(Error::Value("contacts and weights must be non-empty and aligned".into()));
    }
    let (residual, _) = decomposition_residuals(contacts, weights);
    if !(residual <= RESIDUAL_TOL) {
        return Err(Error::InvalidDecomposition(residual));
    }
    let n = contacts[0].len();
    let mut first = 0;
    for (j, &w) in weights.iter().enumerate() {
        if w > weights[first] {
            first = j;
        }
    }
    let mut picks = vec![first];
    let mut basis = vec![scaled(&contacts[first], 1.0 / norm(&contacts[first]))];
    while picks.len() < n {
        let mut best = (usize::MAX, -1.0);
        for (j, u) in contacts.iter().enumerate() {
            let dist = distance_to_span(&basis, u);
            if dist > best.1 {
                best = (j, dist);
            }
        }
        let q = gram_schmidt_step(&basis, &contacts[best.0], 0.0)
            .ok_or(Error::InvalidDecomposition(residual))?;
        basis.push(q);
        picks.push(best.0);
    }
    Ok(picks)
}

/// Null vectors of the `(n+1) × k` matrix with columns `(p_j, 1)`.
fn affine_null_space(points: &[&Vec<f64>]) -> Vec<Vec<f64>> {
    let n = points.first().map_or(0, |p| p.len());
    let k = points.len();
    let mut rows: Vec<Vec<f64>> = (0..n).map(|i| points.iter().map(|p| p[i]).collect()).collect();
    rows.push(vec![1.0; k]);
    orthonormal_complement(&rows, k, 1e-10)
}

/// Moves weight along affine dependencies until at most `max` points of
/// the support remain, preserving `Σ ρ_j p_j` and `Σ ρ_j`.
fn reduce_support(points: &[Vec<f64>], support: &mut Vec<usize>, rho: &mut Vec<f64>, max: usize) {
    while support.len() > max {
        let pts: Vec<&Vec<f64>> = support.iter().map(|&j| &points[j]).collect();
        let Some(mut z) = affine_null_space(&pts).into_iter().next() else {
            break;
        };
        if !z.iter().any(|&v| v > 0.0) {
            z.iter_mut().for_each(|v| *v = -*v);
        }
        let (mut alpha, mut leave) = (f64::INFINITY, 0);
        for (i, (&zi, &ri)) in z.iter().zip(rho.iter()).enumerate() {
            if zi > 1e-14 && ri / zi < alpha {
                alpha = ri / zi;
                leave = i;
            }
        }
        for (r, zi) in rho.iter_mut().zip(&z) {
            *r -= alpha * zi;
        }
        rho[leave] = 0.0;
        let keep: Vec<usize> = (0..support.len()).filter(|&i| rho[i] > SUPPORT_TOL).collect();
        *support = keep.iter().map(|&i| support[i]).collect();
        *rho = keep.iter().map(|&i| rho[i]).collect();
    }
}

fn combination(points: &[Vec<f64>], support: &[usize], rho: &[f64]) -> Vec<f64> {
    let mut z = vec![0.0; points[0].len()];
    for (&j, &r) in support.iter().zip(rho) {
        crate::linalg::axpy(r, &points[j], &mut z);
    }
    z
}

/// Writes `target` as a convex combination of at most `n + 1` points.
/// Returns the point indices (ascending) and positive coefficients.
pub fn caratheodory_reduce(target: &[f64], points: &[Vec<f64>]) -> Result<(Vec<usize>, Vec<f64>)> {
    let n = target.len();
    let m = points.len();
    if m == 0 {
        return Err(Error::NotInHull);
    }
    let mut lp = LinearProgram::new(m);
    for k in 0..n {
        lp.add(points.iter().map(|p| p[k]).collect(), Relation::Eq, target[k]);
    }
    lp.add(vec![1.0; m], Relation::Eq, 1.0);
    let sol = lp.solve().optimal().ok_or(Error::NotInHull)?;
    let mut support: Vec<usize> = (0..m).filter(|&j| sol.x[j] > SUPPORT_TOL).collect();
    let mut rho: Vec<f64> = support.iter().map(|&j| sol.x[j]).collect();
    reduce_support(points, &mut support, &mut rho, n + 1);

    // refine on the support
    let sys = Matrix::from_fn(n + 1, support.len(), |i, k| {
        if i < n {
            points[support[k]][i]
        } else {
            1.0
        }
    });
    let mut rhs = target.to_vec();
    rhs.push(1.0);
    if let Ok(refined) = lstsq(&sys, &rhs) {
        if refined.iter().all(|&r| r > 0.0) {
            let before = norm(&sub(&combination(points, &support, &rho), target));
            let after = norm(&sub(&combination(points, &support, &refined), target));
            if after <= before {
                rho = refined;
            }
        }
    }
    let total: f64 = rho.iter().sum();
    rho.iter_mut().for_each(|r| *r /= total);
    let err = norm(&sub(&combination(points, &support, &rho), target));
    if err > HULL_TOL {
        return Err(Error::NotInHull);
    }
    Ok((support, rho))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayExit {
    /// `t* · direction`
    pub z: Vec<f64>,
    pub t: f64,
    pub indices: Vec<usize>,
    pub coefficients: Vec<f64>,
}

/// Point where the ray from the origin along `direction` leaves the convex
/// hull of `points`, with a convex combination of at most `n` points.
pub fn ray_exit(direction: &[f64], points: &[Vec<f64>]) -> Result<RayExit> {
    let n = direction.len();
    let m = points.len();
    if m == 0 {
        return Err(Error::OriginNotInterior);
    }
    let mut obj = vec![0.0; m + 1];
    obj[m] = 1.0;
    let mut lp = LinearProgram::new(m + 1).maximize(obj);
    lp.set_free(m);
    for k in 0..n {
        let mut row: Vec<f64> = points.iter().map(|p| p[k]).collect();
        row.push(-direction[k]);
        lp.add(row, Relation::Eq, 0.0);
    }
    let mut simplex = vec![1.0; m];
    simplex.push(0.0);
    lp.add(simplex, Relation::Eq, 1.0);
    let sol = lp.solve().optimal().ok_or(Error::OriginNotInterior)?;
    let mut t = sol.x[m];
    if !(t > SUPPORT_TOL) {
        return Err(Error::OriginNotInterior);
    }
    let mut support: Vec<usize> = (0..m).filter(|&j| sol.x[j] > SUPPORT_TOL).collect();
    let mut rho: Vec<f64> = support.iter().map(|&j| sol.x[j]).collect();
    if support.len() > n {
        reduce_support(points, &mut support, &mut rho, n);
    }

    // refine: solve [p_S  −dir; 1  0] (ρ, t) = (0, 1)
    let k = support.len();
    let sys = Matrix::from_fn(n + 1, k + 1, |i, j| match (i < n, j < k) {
        (true, true) => points[support[j]][i],
        (true, false) => -direction[i],
        (false, true) => 1.0,
        (false, false) => 0.0,
    });
    let mut rhs = vec![0.0; n];
    rhs.push(1.0);
    let refined = if k == n {
        Lu::new(&sys).map(|lu| lu.solve(&rhs))
    } else {
        lstsq(&sys, &rhs)
    };
    if let Ok(r) = refined {
        let residual = norm(&sub(&sys.mul_vec(&r), &rhs));
        if r[..k].iter().all(|&v| v > 0.0) && r[k] > 0.0 && residual <= 1e-12 {
            rho = r[..k].to_vec();
            t = r[k];
        }
    }
    Ok(RayExit {
        z: scaled(direction, t),
        t,
        indices: support,
        coefficients: rho,
    })
}

/// Halfspace form of `P`: strips are split into their two sides. Returns
/// the polytope and the member index owning each halfspace.
fn halfspace_view(p: &Polytope) -> Result<(Polytope, Vec<usize>)> {
    if !p.family().symmetric {
        return Ok((p.clone(), (0..p.family().len()).collect()));
    }
    let family = HalfspaceFamily::new(p.dim(), false, p.halfspaces().to_vec())?;
    Ok((Polytope::new(family)?, p.owner().to_vec()))
}

fn members(indices: impl IntoIterator<Item = usize>, owner: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = indices.into_iter().map(|i| owner[i]).collect();
    out.sort_unstable();
    out.dedup();
    out
}

fn base_provenance(form: &JohnForm) -> Provenance {
    Provenance {
        residual_identity: form.residual_identity,
        residual_barycenter: form.residual_barycenter,
        contacts: form.contacts.len(),
        ..Provenance::default()
    }
}

fn internal(msg: String) -> Error {
    warn!("{msg}");
    Error::InternalCheckFailed(msg)
}

fn check_cap(algorithm: Algorithm, n: usize, d: f64, s: usize) -> Result<()> {
    let cap = algorithm.cap(n, d);
    if s > cap {
        return Err(internal(format!("{algorithm} selected {s} members, cap is {cap}")));
    }
    Ok(())
}

fn check_d(d: f64) -> Result<()> {
    if !(d.is_finite() && d > 1.0) {
        return Err(Error::Value(format!("d must be a finite number above 1, got {d}")));
    }
    Ok(())
}

/// Strip selection: at most `⌈dn⌉` strips whose intersection has volume
/// at most `(2/√π · (√d+1)/(√d−1))ⁿ Γ(n/2+1)` times `|P|`.
pub fn select_symmetric(p: &Polytope, d: f64) -> Result<SelectionReport> {
    check_d(d)?;
    if !p.family().symmetric {
        return Err(Error::Value("strip selection needs a symmetric family".into()));
    }
    let n = p.dim();
    let (_, form) = john_form(p)?;
    let sparse = bss_select(&form.contacts, &form.weights, d)?;
    if sparse.certificate.gamma_achieved > gamma_d(d) * (1.0 + 1e-7) {
        return Err(internal(format!(
            "sparsifier ratio {} above {}",
            sparse.certificate.gamma_achieved,
            gamma_d(d)
        )));
    }
    let chosen: Vec<Vec<f64>> = sparse.sigma.iter().map(|&j| form.contacts[j].clone()).collect();
    let bl = kappa_weights(&chosen, &sparse.weights)?;
    if (bl.kappa_sum() - n as f64).abs() > 1e-9 {
        return Err(internal(format!("kappa sums to {}, expected {n}", bl.kappa_sum())));
    }
    let search = bl_gaussian_search(&bl, DEFAULT_SWEEPS);
    let mut selected: Vec<usize> = sparse.sigma.iter().map(|&j| form.indices[j]).collect();
    selected.sort_unstable();
    check_cap(Algorithm::Symmetric, n, d, selected.len())?;
    debug!("symmetric selection: {selected:?}");
    Ok(SelectionReport {
        algorithm: Algorithm::Symmetric,
        d: Some(d),
        s: selected.len(),
        selected,
        gamma_achieved: sparse.certificate.gamma_achieved,
        certified_log_ratio: certified_bound(Algorithm::Symmetric, n, d),
        kappa: bl.kappa.clone(),
        provenance: Provenance {
            lambda_min: Some(sparse.certificate.lambda_min),
            lambda_max: Some(sparse.certificate.lambda_max),
            kappa_sum: Some(bl.kappa_sum()),
            bl_constant_estimate: Some(search.d_estimate),
            reference_log_lower_bound: Some(symmetric_lower_bound(n, d)),
            ..base_provenance(&form)
        },
    })
}

/// Halfspace selection through the lift to ℝⁿ⁺¹: at most
/// `⌈d(n+1)⌉ + n + 1` halfspaces.
pub fn select_halfspaces_lifted(p: &Polytope, d: f64) -> Result<SelectionReport> {
    check_d(d)?;
    let n = p.dim();
    let (view, owner) = halfspace_view(p)?;
    let (_, form) = john_form(&view)?;
    let (v, b) = lift_decomposition(&form.contacts, &form.weights)?;
    let sparse = bss_select(&v, &b, d)?;
    let lifted: Vec<Vec<f64>> = sparse.sigma.iter().map(|&j| v[j].clone()).collect();
    let bl = kappa_weights(&lifted, &sparse.weights)?;
    let ksum = bl.kappa_sum();
    if (ksum - (n + 1) as f64).abs() > 1e-9 {
        return Err(internal(format!("lifted kappa sums to {ksum}, expected {}", n + 1)));
    }
    let search = bl_gaussian_search(&bl, DEFAULT_SWEEPS);

    // w = −1/(n(n+1)) Σ κ_j u_j with the original contacts
    let mut w = vec![0.0; n];
    for (&j, &k) in sparse.sigma.iter().zip(&bl.kappa) {
        crate::linalg::axpy(-k / (n * (n + 1)) as f64, &form.contacts[j], &mut w);
    }
    let w_norm = norm(&w);
    if w_norm > 1.0 / n as f64 + 1e-9 {
        return Err(internal(format!("correction vector norm {w_norm} above 1/{n}")));
    }
    let (tau, _) = caratheodory_reduce(&w, &form.contacts)?;
    let selected = members(
        sparse.sigma.iter().chain(&tau).map(|&j| form.indices[j]),
        &owner,
    );
    check_cap(Algorithm::Lifted, n, d, selected.len())?;
    debug!("lifted selection: sigma {:?}, tau {tau:?}", sparse.sigma);
    Ok(SelectionReport {
        algorithm: Algorithm::Lifted,
        d: Some(d),
        s: selected.len(),
        selected,
        gamma_achieved: sparse.certificate.gamma_achieved,
        certified_log_ratio: certified_bound(Algorithm::Lifted, n, d),
        kappa: bl.kappa.clone(),
        provenance: Provenance {
            lambda_min: Some(sparse.certificate.lambda_min),
            lambda_max: Some(sparse.certificate.lambda_max),
            kappa_sum: Some(ksum),
            bl_constant_estimate: Some(search.d_estimate),
            correction_norm: Some(w_norm),
            ..base_provenance(&form)
        },
    })
}

/// Dvoretzky–Rogers basis plus a ray-exit face: at most `2n` halfspaces.
pub fn select_naszodi(p: &Polytope) -> Result<SelectionReport> {
    let n = p.dim();
    let (view, owner) = halfspace_view(p)?;
    let (_, form) = john_form(&view)?;
    let picks = dr_select(&form.contacts, &form.weights)?;
    let chosen: Vec<Vec<f64>> = picks.iter().map(|&j| form.contacts[j].clone()).collect();
    let distances = span_distances(&chosen);
    for (k, &dist) in distances.iter().enumerate() {
        let floor = ((n - k) as f64 / n as f64).sqrt();
        if dist < floor - 1e-9 {
            return Err(internal(format!(
                "greedy distance {dist} at step {} below {floor}",
                k + 1
            )));
        }
    }
    let mut w = vec![0.0; n];
    for v in &chosen {
        crate::linalg::axpy(1.0 / (n + 1) as f64, v, &mut w);
    }
    let w_norm = norm(&w);
    let direction = if w_norm < 1e-12 {
        scaled(&chosen[0], -1.0)
    } else {
        scaled(&w, -1.0 / w_norm)
    };
    let exit = ray_exit(&direction, &form.contacts)?;
    let z_norm = norm(&exit.z);
    if z_norm < 1.0 / n as f64 - 1e-8 {
        return Err(internal(format!("ray exit at distance {z_norm}, below 1/{n}")));
    }
    let selected = members(
        picks.iter().chain(&exit.indices).map(|&j| form.indices[j]),
        &owner,
    );
    check_cap(Algorithm::Naszodi, n, 2.0, selected.len())?;
    debug!("naszodi selection: dr {picks:?}, ray {:?}", exit.indices);
    Ok(SelectionReport {
        algorithm: Algorithm::Naszodi,
        d: None,
        s: selected.len(),
        selected,
        gamma_achieved: 1.0,
        certified_log_ratio: certified_bound(Algorithm::Naszodi, n, 0.0),
        kappa: Vec::new(),
        provenance: Provenance {
            dr_distances: Some(distances),
            ray_exit_norm: Some(z_norm),
            ..base_provenance(&form)
        },
    })
}

/// Dispatches on `algorithm`; `d` must be given exactly when the
/// algorithm uses it.
pub fn select(p: &Polytope, algorithm: Algorithm, d: Option<f64>) -> Result<SelectionReport> {
    match (algorithm, d) {
        (Algorithm::Symmetric, Some(d)) => select_symmetric(p, d),
        (Algorithm::Lifted, Some(d)) => select_halfspaces_lifted(p, d),
        (Algorithm::Naszodi, None) => select_naszodi(p),
        (Algorithm::Naszodi, Some(_)) => Err(Error::Value("naszodi takes no d".into())),
        (_, None) => Err(Error::Value(format!("{algorithm} needs d"))),
    }
}
