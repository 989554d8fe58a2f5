//! Exact and Monte Carlo volumes of bounded H-polytopes, and the volume
//! ratio used to check every selection certificate.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    dot, gram_schmidt_step, norm, orthonormal_complement, scaled, sub, Lu, Matrix,
};
use crate::model::{Halfspace, Polytope};

/// Largest number of `n`-subsets of constraints vertex enumeration will
/// visit; equal to `C(48, 6)`.
pub const VERTEX_BUDGET: u128 = 12_271_512;

/// Two-sided 99% normal quantile.
const Z99: f64 = 2.575_829_303_548_901;

/// Samples per Monte Carlo shard. Shard `k` draws from stream `k` of the
/// seeded generator, so results do not depend on the number of workers.
const SHARD: u64 = 1 << 16;

pub const DEFAULT_SAMPLES: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VolumeMethod {
    Exact,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub value: f64,
    pub ci99_low: f64,
    pub ci99_high: f64,
    pub method: VolumeMethod,
    pub samples: u64,
}

impl VolumeEstimate {
    fn exact(value: f64) -> Self {
        Self {
            value,
            ci99_low: value,
            ci99_high: value,
            method: VolumeMethod::Exact,
            samples: 0,
        }
    }
}

/// `ln Γ(k/2)` for a positive integer `k`, by the recursion
/// `Γ(x + 1) = x Γ(x)` from `Γ(1) = 1` and `Γ(1/2) = √π`.
pub fn ln_gamma_half(k: u32) -> f64 {
    assert!(k > 0, "Γ has a pole at 0");
    let (mut x, mut acc) = if k % 2 == 0 {
        (1.0, 0.0)
    } else {
        (0.5, 0.5 * std::f64::consts::PI.ln())
    };
    let target = k as f64 / 2.0;
    while x < target {
        acc += x.ln();
        x += 1.0;
    }
    acc
}

/// `ln ω_n`, the log-volume of the Euclidean unit ball.
pub fn ln_ball_volume(n: usize) -> f64 {
    0.5 * n as f64 * std::f64::consts::PI.ln() - ln_gamma_half(n as u32 + 2)
}

pub fn ball_volume(n: usize) -> f64 {
    ln_ball_volume(n).exp()
}

fn binomial(m: usize, k: usize) -> u128 {
    if k > m {
        return 0;
    }
    let k = k.min(m - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (m - i) as u128 / (i + 1) as u128;
    }
    c
}

pub fn within_budget(p: &Polytope) -> bool {
    binomial(p.halfspaces().len(), p.dim()) <= VERTEX_BUDGET
}

/// Halfspaces rescaled to unit normals.
fn unit_halfspaces(hs: &[Halfspace]) -> Vec<(Vec<f64>, f64)> {
    hs.iter()
        .map(|h| {
            let r = norm(&h.a);
            (scaled(&h.a, 1.0 / r), h.b / r)
        })
        .collect()
}

fn coordinate_scale(p: &Polytope) -> f64 {
    p.bounding_box()
        .iter()
        .fold(1.0_f64, |m, (lo, hi)| m.max(lo.abs()).max(hi.abs()))
}

/// All vertices: every nonsingular `n`-subset of constraints is solved and
/// kept when feasible within `1e−8`; duplicates within `1e−7` are merged.
pub fn enumerate_vertices(p: &Polytope) -> Result<Vec<Vec<f64>>> {
    let n = p.dim();
    let hs = unit_halfspaces(p.halfspaces());
    let m = hs.len();
    let count = binomial(m, n);
    if count > VERTEX_BUDGET {
        return Err(Error::BudgetExceeded(count));
    }
    let scale = coordinate_scale(p);
    let feas_tol = 1e-8 * scale;
    let dedup_tol = 1e-7 * scale;

    let mut vertices: Vec<Vec<f64>> = Vec::new();
    let mut idx: Vec<usize> = (0..n).collect();
    if n > m {
        return Err(Error::Unbounded);
    }
    loop {
        let a = Matrix::from_fn(n, n, |i, j| hs[idx[i]].0[j]);
        if let Ok(lu) = Lu::new(&a) {
            let rhs: Vec<f64> = idx.iter().map(|&i| hs[i].1).collect();
            let x = lu.solve(&rhs);
            if hs.iter().all(|(a, b)| b - dot(a, &x) >= -feas_tol)
                && !vertices.iter().any(|v| norm(&sub(v, &x)) <= dedup_tol)
            {
                vertices.push(x);
            }
        }
        // next combination in lexicographic order
        let mut i = n;
        loop {
            if i == 0 {
                return Ok(vertices);
            }
            i -= 1;
            if idx[i] < m - n + i {
                idx[i] += 1;
                for j in i + 1..n {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Exact volume by facet-pyramid decomposition from the vertex centroid,
/// recursing into each facet's affine hull.
pub fn volume_exact(p: &Polytope) -> Result<VolumeEstimate> {
    let vertices = enumerate_vertices(p)?;
    let cons = unit_halfspaces(p.halfspaces());
    let tol = 1e-7 * coordinate_scale(p);
    Ok(VolumeEstimate::exact(polytope_volume(
        p.dim(),
        &vertices,
        &cons,
        tol,
    )))
}

fn affine_rank(points: &[&Vec<f64>], tol: f64) -> usize {
    let Some(first) = points.first() else {
        return 0;
    };
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in &points[1..] {
        if let Some(q) = gram_schmidt_step(&basis, &sub(v, first), tol) {
            basis.push(q);
        }
    }
    basis.len()
}

fn polytope_volume(k: usize, vertices: &[Vec<f64>], cons: &[(Vec<f64>, f64)], tol: f64) -> f64 {
    if vertices.len() < k + 1 {
        return 0.0;
    }
    if k == 1 {
        let (lo, hi) = vertices
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v[0]), hi.max(v[0]))
            });
        return hi - lo;
    }
    let mut center = vec![0.0; k];
    for v in vertices {
        for (c, x) in center.iter_mut().zip(v) {
            *c += x / vertices.len() as f64;
        }
    }
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut total = 0.0;
    for (j, (a, b)) in cons.iter().enumerate() {
        let incident: Vec<usize> = (0..vertices.len())
            .filter(|&i| (b - dot(a, &vertices[i])).abs() <= tol)
            .collect();
        if incident.len() < k || !seen.insert(incident.clone()) {
            continue;
        }
        let dist = b - dot(a, &center);
        if dist <= tol {
            continue;
        }
        let pts: Vec<&Vec<f64>> = incident.iter().map(|&i| &vertices[i]).collect();
        if affine_rank(&pts, tol) < k - 1 {
            continue;
        }
        let basis = orthonormal_complement(std::slice::from_ref(a), k, 1e-12);
        let origin = scaled(a, *b);
        let sub_vertices: Vec<Vec<f64>> = pts
            .iter()
            .map(|v| {
                let d = sub(v, &origin);
                basis.iter().map(|q| dot(q, &d)).collect()
            })
            .collect();
        let sub_cons: Vec<(Vec<f64>, f64)> = cons
            .iter()
            .enumerate()
            .filter(|(l, _)| *l != j)
            .filter_map(|(_, (al, bl))| {
                let proj: Vec<f64> = basis.iter().map(|q| dot(q, al)).collect();
                let r = norm(&proj);
                (r > 1e-9).then(|| (scaled(&proj, 1.0 / r), (bl - dot(al, &origin)) / r))
            })
            .collect();
        let facet = polytope_volume(k - 1, &sub_vertices, &sub_cons, tol);
        total += dist * facet / k as f64;
    }
    total
}

/// Hit-or-miss estimate inside the bounding box, with a normal
/// approximation 99% interval for the hit proportion.
pub fn volume_mc(p: &Polytope, samples: u64, seed: u64) -> Result<VolumeEstimate> {
    if samples == 0 {
        return Err(Error::Value("Monte Carlo needs at least one sample".into()));
    }
    let bbox = p.bounding_box().to_vec();
    let box_volume: f64 = bbox.iter().map(|(lo, hi)| hi - lo).product();
    let hs = p.halfspaces();
    let shards = samples.div_ceil(SHARD);
    let hits: u64 = (0..shards)
        .into_par_iter()
        .map(|shard| {
            let count = SHARD.min(samples - shard * SHARD);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shard);
            let mut x = vec![0.0; bbox.len()];
            let mut hits = 0u64;
            for _ in 0..count {
                for (xi, (lo, hi)) in x.iter_mut().zip(&bbox) {
                    *xi = lo + (hi - lo) * rng.random::<f64>();
                }
                if hs.iter().all(|h| dot(&h.a, &x) <= h.b) {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    let n = samples as f64;
    let phat = hits as f64 / n;
    let half = Z99 * (phat * (1.0 - phat) / n).sqrt();
    Ok(VolumeEstimate {
        value: box_volume * phat,
        ci99_low: box_volume * (phat - half).max(0.0),
        ci99_high: box_volume * (phat + half).min(1.0),
        method: VolumeMethod::Mc,
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeOptions {
    pub samples: u64,
    pub seed: u64,
    /// Fail instead of falling back to Monte Carlo.
    pub force_exact: bool,
}

impl Default for VolumeOptions {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
            seed: 0,
            force_exact: false,
        }
    }
}

/// Exact when the vertex budget allows, otherwise Monte Carlo.
pub fn volume(p: &Polytope, opts: &VolumeOptions) -> Result<VolumeEstimate> {
    if opts.force_exact || within_budget(p) {
        volume_exact(p)
    } else {
        volume_mc(p, opts.samples, opts.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioMeasurement {
    pub estimate: f64,
    pub ci99: [f64; 2],
    pub method: VolumeMethod,
    pub samples: u64,
}

/// `vol(outer) / vol(inner)` with an interval built from both volume
/// intervals. Exact only when both volumes are exact.
pub fn measure_ratio(
    outer: &Polytope,
    inner: &Polytope,
    opts: &VolumeOptions,
) -> Result<RatioMeasurement> {
    let exact_ok = within_budget(outer) && within_budget(inner);
    let (vo, vi) = if opts.force_exact || exact_ok {
        (volume_exact(outer)?, volume_exact(inner)?)
    } else {
        (
            volume_mc(outer, opts.samples, opts.seed)?,
            volume_mc(inner, opts.samples, opts.seed.wrapping_add(0x9e37_79b9_7f4a_7c15))?,
        )
    };
    if !(vi.value > 0.0) {
        return Err(Error::InternalCheckFailed(
            "reference polytope has zero measured volume".into(),
        ));
    }
    let hi = if vi.ci99_low > 0.0 {
        vo.ci99_high / vi.ci99_low
    } else {
        f64::INFINITY
    };
    Ok(RatioMeasurement {
        estimate: vo.value / vi.value,
        ci99: [vo.ci99_low / vi.ci99_high, hi],
        method: if vo.method == VolumeMethod::Exact && vi.method == VolumeMethod::Exact {
            VolumeMethod::Exact
        } else {
            VolumeMethod::Mc
        },
        samples: vo.samples.max(vi.samples),
    })
}
