//! Halfspace and strip families, the polytopes they bound, JSON
//! serialization, and a seeded instance generator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, scaled, Lu, Matrix};
use crate::lp::{LinearProgram, LpOutcome, Relation};

/// `{x : ⟨a, x⟩ ≤ b}`; inside a symmetric family the strip `{|⟨a, x⟩| ≤ b}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub a: Vec<f64>,
    pub b: f64,
}

impl Halfspace {
    pub fn new(a: Vec<f64>, b: f64) -> Self {
        Self { a, b }
    }

    pub fn slack(&self, x: &[f64]) -> f64 {
        self.b - dot(&self.a, x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfspaceFamily {
    pub dim: usize,
    pub symmetric: bool,
    #[serde(rename = "halfspaces")]
    pub members: Vec<Halfspace>,
}

impl HalfspaceFamily {
    /// Validates normals and offsets.
    pub fn new(dim: usize, symmetric: bool, members: Vec<Halfspace>) -> Result<Self> {
        let family = Self {
            dim,
            symmetric,
            members,
        };
        family.validate()?;
        Ok(family)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Schema("dim must be positive".into()));
        }
        for (i, h) in self.members.iter().enumerate() {
            if h.a.len() != self.dim {
                return Err(Error::Schema(format!(
                    "halfspace {i}: normal has length {}, expected {}",
                    h.a.len(),
                    self.dim
                )));
            }
            if !h.b.is_finite() || h.a.iter().any(|x| !x.is_finite()) {
                return Err(Error::Value(format!("halfspace {i}: non-finite number")));
            }
            if h.a.iter().all(|&x| x == 0.0) {
                return Err(Error::Value(format!("halfspace {i}: zero normal")));
            }
            if self.symmetric && h.b <= 0.0 {
                return Err(Error::Value(format!(
                    "strip {i}: offset must be positive"
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Halfspaces used for geometry; a strip becomes the antipodal pair
    /// `(a, b)`, `(−a, b)`. The second vector maps each halfspace back to
    /// its member index.
    pub fn expanded(&self) -> (Vec<Halfspace>, Vec<usize>) {
        if !self.symmetric {
            return (self.members.clone(), (0..self.len()).collect());
        }
        let mut hs = Vec::with_capacity(2 * self.len());
        let mut owner = Vec::with_capacity(2 * self.len());
        for (i, h) in self.members.iter().enumerate() {
            hs.push(h.clone());
            hs.push(Halfspace::new(scaled(&h.a, -1.0), h.b));
            owner.push(i);
            owner.push(i);
        }
        (hs, owner)
    }

    /// Sub-family with the given member indices, in the given order.
    pub fn subfamily(&self, indices: &[usize]) -> Result<HalfspaceFamily> {
        let members = indices
            .iter()
            .map(|&i| {
                self.members
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::Value(format!("member index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(HalfspaceFamily {
            dim: self.dim,
            symmetric: self.symmetric,
            members,
        })
    }

    /// Image of the family under `y = M x + t`.
    ///
    /// For a symmetric family the translation must vanish, otherwise the
    /// image strips would not be centered.
    pub fn transformed(&self, map: &AffineMap) -> Result<HalfspaceFamily> {
        let lu = Lu::new(&map.linear)?;
        let inv = lu.inverse();
        if self.symmetric && map.translation.iter().any(|&x| x != 0.0) {
            return Err(Error::Value(
                "symmetric families only admit linear maps".into(),
            ));
        }
        // ⟨a, x⟩ ≤ b with x = M⁻¹(y − t)  ⇔  ⟨M⁻ᵀa, y⟩ ≤ b + ⟨M⁻ᵀa, t⟩
        let members = self
            .members
            .iter()
            .map(|h| {
                let a = inv.tr_mul_vec(&h.a);
                let b = h.b + dot(&a, &map.translation);
                Halfspace::new(a, b)
            })
            .collect();
        HalfspaceFamily::new(self.dim, self.symmetric, members)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("family serializes")
    }

    /// Hex SHA-256 of the canonical compact JSON encoding.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let canonical = serde_json::to_string(self).expect("family serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Parses the instance JSON `{"dim", "symmetric", "halfspaces": [{"a", "b"}]}`.
pub fn parse_family(text: &str) -> Result<HalfspaceFamily> {
    let family: HalfspaceFamily =
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    family.validate()?;
    Ok(family)
}

/// `x ↦ L x + t`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub linear: Matrix,
    pub translation: Vec<f64>,
}

impl AffineMap {
    pub fn identity(n: usize) -> Self {
        Self {
            linear: Matrix::identity(n),
            translation: vec![0.0; n],
        }
    }

    pub fn translation(t: Vec<f64>) -> Self {
        Self {
            linear: Matrix::identity(t.len()),
            translation: t,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.linear.mul_vec(x);
        for (yi, ti) in y.iter_mut().zip(&self.translation) {
            *yi += ti;
        }
        y
    }

    /// `self ∘ first`
    pub fn after(&self, first: &AffineMap) -> AffineMap {
        AffineMap {
            linear: self.linear.matmul(&first.linear),
            translation: self.apply(&first.translation),
        }
    }

    pub fn det(&self) -> f64 {
        crate::linalg::det(&self.linear)
    }
}

impl Serialize for Matrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..self.rows()).map(|i| self.row(i).to_vec()).collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        if rows.iter().any(|r| r.len() != rows[0].len()) {
            return Err(serde::de::Error::custom("ragged matrix"));
        }
        Ok(Matrix::from_rows(&rows))
    }
}

/// A bounded polytope with non-empty interior, with the geometry derived
/// during construction.
#[derive(Debug, Clone)]
pub struct Polytope {
    family: HalfspaceFamily,
    halfspaces: Vec<Halfspace>,
    owner: Vec<usize>,
    interior: Vec<f64>,
    inradius: f64,
    bbox: Vec<(f64, f64)>,
}

impl Polytope {
    /// Checks boundedness with per-coordinate LPs and computes a Chebyshev
    /// center. Symmetric families use the origin.
    pub fn new(family: HalfspaceFamily) -> Result<Self> {
        family.validate()?;
        let (halfspaces, owner) = family.expanded();
        let bbox = bounding_box(family.dim, &halfspaces)?;
        let (interior, inradius) = if family.symmetric {
            let r = halfspaces
                .iter()
                .map(|h| h.b / norm(&h.a))
                .fold(f64::INFINITY, f64::min);
            (vec![0.0; family.dim], r)
        } else {
            chebyshev_center(family.dim, &halfspaces)?
        };
        let extent = bbox.iter().map(|(lo, hi)| hi - lo).fold(0.0, f64::max);
        if !(inradius > 1e-10 * extent.max(1e-300)) {
            return Err(Error::EmptyInterior);
        }
        Ok(Self {
            family,
            halfspaces,
            owner,
            interior,
            inradius,
            bbox,
        })
    }

    pub fn dim(&self) -> usize {
        self.family.dim
    }

    pub fn family(&self) -> &HalfspaceFamily {
        &self.family
    }

    /// Geometric halfspaces (strips expanded).
    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    /// Member index of each geometric halfspace.
    pub fn owner(&self) -> &[usize] {
        &self.owner
    }

    pub fn interior_point(&self) -> &[f64] {
        &self.interior
    }

    pub fn inradius(&self) -> f64 {
        self.inradius
    }

    pub fn bounding_box(&self) -> &[(f64, f64)] {
        &self.bbox
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.halfspaces.iter().all(|h| h.slack(x) >= -tol)
    }
}

fn bounding_box(dim: usize, halfspaces: &[Halfspace]) -> Result<Vec<(f64, f64)>> {
    let mut bbox = Vec::with_capacity(dim);
    for k in 0..dim {
        let mut ends = [0.0; 2];
        for (slot, sign) in [(0usize, -1.0), (1, 1.0)] {
            let mut obj = vec![0.0; dim];
            obj[k] = sign;
            let mut lp = LinearProgram::new(dim).maximize(obj);
            for j in 0..dim {
                lp.set_free(j);
            }
            for h in halfspaces {
                lp.add(h.a.clone(), Relation::Le, h.b);
            }
            match lp.solve() {
                LpOutcome::Optimal(s) => ends[slot] = s.x[k],
                LpOutcome::Unbounded => return Err(Error::Unbounded),
                LpOutcome::Infeasible => return Err(Error::EmptyInterior),
            }
        }
        bbox.push((ends[0], ends[1]));
    }
    Ok(bbox)
}

/// Center and radius of the largest ball inside `{⟨a_i, x⟩ ≤ b_i}`.
pub fn chebyshev_center(dim: usize, halfspaces: &[Halfspace]) -> Result<(Vec<f64>, f64)> {
    let mut obj = vec![0.0; dim + 1];
    obj[dim] = 1.0;
    let mut lp = LinearProgram::new(dim + 1).maximize(obj);
    for j in 0..dim {
        lp.set_free(j);
    }
    for h in halfspaces {
        let mut row = h.a.clone();
        row.push(norm(&h.a));
        lp.add(row, Relation::Le, h.b);
    }
    match lp.solve() {
        LpOutcome::Optimal(s) => {
            let r = s.x[dim];
            if r <= 0.0 {
                return Err(Error::EmptyInterior);
            }
            Ok((s.x[..dim].to_vec(), r))
        }
        LpOutcome::Infeasible => Err(Error::EmptyInterior),
        LpOutcome::Unbounded => Err(Error::Unbounded),
    }
}

/// Rewrites every constraint with offset exactly 1 after moving the
/// Chebyshev center to the origin. The returned map sends the old
/// coordinates to the new ones; member order is unchanged.
pub fn normalize_family(family: &HalfspaceFamily) -> Result<(HalfspaceFamily, AffineMap)> {
    let polytope = Polytope::new(family.clone())?;
    normalize_polytope(&polytope)
}

pub(crate) fn normalize_polytope(p: &Polytope) -> Result<(HalfspaceFamily, AffineMap)> {
    let center = p.interior_point();
    let members = p
        .family()
        .members
        .iter()
        .map(|h| {
            let s = h.slack(center);
            if s <= 0.0 {
                return Err(Error::EmptyInterior);
            }
            Ok(Halfspace::new(scaled(&h.a, 1.0 / s), 1.0))
        })
        .collect::<Result<Vec<_>>>()?;
    let family = HalfspaceFamily::new(p.dim(), p.family().symmetric, members)?;
    Ok((family, AffineMap::translation(scaled(center, -1.0))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceKind {
    Cube,
    Cross,
    Simplex,
    Random,
}

impl std::str::FromStr for InstanceKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cube" => Ok(Self::Cube),
            "cross" => Ok(Self::Cross),
            "simplex" => Ok(Self::Simplex),
            "random" => Ok(Self::Random),
            other => Err(Error::Value(format!("unknown instance kind '{other}'"))),
        }
    }
}

const RANDOM_RETRIES: usize = 256;

/// Deterministic test instances; every family contains the unit ball and
/// is tangent to it.
///
/// In symmetric mode each normal becomes one strip: the cube gives `n`
/// strips, the cross-polytope `2^(n−1)` and the simplex its `n + 1` facet
/// directions (a regular hexagon for `n = 2`). `m` and `seed` are only used
/// by `Random`.
pub fn generate_instance(
    kind: InstanceKind,
    n: usize,
    m: usize,
    seed: u64,
    symmetric: bool,
) -> Result<HalfspaceFamily> {
    if n == 0 {
        return Err(Error::Value("dimension must be at least 1".into()));
    }
    let normals: Vec<Vec<f64>> = match kind {
        InstanceKind::Cube => {
            let mut out = Vec::new();
            for i in 0..n {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                if symmetric {
                    out.push(e);
                } else {
                    out.push(e.clone());
                    e[i] = -1.0;
                    out.push(e);
                }
            }
            out
        }
        InstanceKind::Cross => {
            if n > 16 {
                return Err(Error::Value("cross-polytope limited to n <= 16".into()));
            }
            let s = 1.0 / (n as f64).sqrt();
            let count = if symmetric { 1usize << (n - 1) } else { 1usize << n };
            (0..count)
                .map(|mask| {
                    (0..n)
                        .map(|i| if mask >> i & 1 == 1 { -s } else { s })
                        .collect()
                })
                .collect()
        }
        InstanceKind::Simplex => regular_simplex_normals(n),
        InstanceKind::Random => {
            if !symmetric && m < n + 1 {
                return Err(Error::Value(format!(
                    "random instances need m >= n + 1 (got m = {m}, n = {n})"
                )));
            }
            if symmetric && m < n {
                return Err(Error::Value(format!(
                    "random strip instances need m >= n (got m = {m}, n = {n})"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..RANDOM_RETRIES {
                let normals: Vec<Vec<f64>> = (0..m).map(|_| random_unit(&mut rng, n)).collect();
                let members = normals
                    .into_iter()
                    .map(|a| Halfspace::new(a, 1.0))
                    .collect();
                let family = HalfspaceFamily::new(n, symmetric, members)?;
                match Polytope::new(family.clone()) {
                    Ok(_) => return Ok(family),
                    Err(Error::Unbounded) => continue,
                    Err(e) => return Err(e),
                }
            }
            return Err(Error::Unbounded);
        }
    };
    let members = normals.into_iter().map(|a| Halfspace::new(a, 1.0)).collect();
    HalfspaceFamily::new(n, symmetric, members)
}

pub(crate) fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let r = norm(&v);
        if r > 1e-12 {
            return scaled(&v, 1.0 / r);
        }
    }
}

/// Unit normals `u_0..u_n` of a regular simplex: `Σ u_j = 0` and
/// `⟨u_i, u_j⟩ = −1/n` for `i ≠ j`.
pub fn regular_simplex_normals(n: usize) -> Vec<Vec<f64>> {
    // centered standard basis of ℝ^{n+1}, expressed in an orthonormal basis
    // of the hyperplane Σx = 0
    let basis: Vec<Vec<f64>> = (1..=n)
        .map(|k| {
            let kf = k as f64;
            let c = 1.0 / (kf * (kf + 1.0)).sqrt();
            (0..=n)
                .map(|i| match i.cmp(&k) {
                    std::cmp::Ordering::Less => c,
                    std::cmp::Ordering::Equal => -kf * c,
                    std::cmp::Ordering::Greater => 0.0,
                })
                .collect()
        })
        .collect();
    let scale = ((n as f64 + 1.0) / n as f64).sqrt();
    (0..=n)
        .map(|j| basis.iter().map(|q| q[j] * scale).collect())
        .collect()
}
