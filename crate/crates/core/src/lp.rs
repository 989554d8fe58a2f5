//! Dense two-phase simplex for the small linear programs used throughout:
//! Chebyshev centers, bounding boxes, hull membership, and ray exits.
//!
//! Problems are stated as `maximize cᵀx` subject to rows `aᵀx {≤,≥,=} b`,
//! with every variable non-negative unless marked free. Bland's rule is
//! used for both entering and leaving variables, so the method terminates
//! on degenerate problems; returned solutions are basic.

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-11;
const MAX_PIVOTS: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
struct Row {
    coeffs: Vec<f64>,
    relation: Relation,
    rhs: f64,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    n_vars: usize,
    objective: Vec<f64>,
    free: Vec<bool>,
    rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Original variables that ended in the basis.
    pub basic: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(self) -> Option<LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

impl LinearProgram {
    pub fn new(n_vars: usize) -> Self {
        Self {
            n_vars,
            objective: vec![0.0; n_vars],
            free: vec![false; n_vars],
            rows: Vec::new(),
        }
    }

    pub fn maximize(mut self, objective: Vec<f64>) -> Self {
        assert_eq!(objective.len(), self.n_vars);
        self.objective = objective;
        self
    }

    pub fn set_free(&mut self, var: usize) {
        self.free[var] = true;
    }

    pub fn add(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        assert_eq!(coeffs.len(), self.n_vars);
        self.rows.push(Row {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn solve(&self) -> LpOutcome {
        Tableau::build(self).run(self)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum ColKind {
    Plus(usize),
    Minus(usize),
    Slack,
    Artificial,
}

struct Tableau {
    /// `rows × (cols + 1)`, right-hand side in the last column.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    kinds: Vec<ColKind>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let mut kinds = Vec::new();
        let mut var_cols = Vec::with_capacity(lp.n_vars);
        for j in 0..lp.n_vars {
            var_cols.push(kinds.len());
            kinds.push(ColKind::Plus(j));
            if lp.free[j] {
                kinds.push(ColKind::Minus(j));
            }
        }
        // normalized rows with non-negative right-hand side
        let rows: Vec<(Vec<f64>, Relation, f64)> = lp
            .rows
            .iter()
            .map(|r| {
                if r.rhs < 0.0 {
                    let rel = match r.relation {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (r.coeffs.iter().map(|x| -x).collect(), rel, -r.rhs)
                } else {
                    (r.coeffs.clone(), r.relation, r.rhs)
                }
            })
            .collect();
        let slack_start = kinds.len();
        for (_, rel, _) in &rows {
            if *rel != Relation::Eq {
                kinds.push(ColKind::Slack);
            }
        }
        let art_start = kinds.len();
        for (_, rel, _) in &rows {
            if *rel != Relation::Le {
                kinds.push(ColKind::Artificial);
            }
        }
        let ncols = kinds.len();
        let mut t = vec![vec![0.0; ncols + 1]; rows.len()];
        let mut basis = vec![0; rows.len()];
        let (mut slack, mut art) = (slack_start, art_start);
        for (i, (coeffs, rel, rhs)) in rows.iter().enumerate() {
            for j in 0..lp.n_vars {
                t[i][var_cols[j]] = coeffs[j];
                if lp.free[j] {
                    t[i][var_cols[j] + 1] = -coeffs[j];
                }
            }
            t[i][ncols] = *rhs;
            match rel {
                Relation::Le => {
                    t[i][slack] = 1.0;
                    basis[i] = slack;
                    slack += 1;
                }
                Relation::Ge => {
                    t[i][slack] = -1.0;
                    slack += 1;
                    t[i][art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
                Relation::Eq => {
                    t[i][art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
            }
        }
        Self { t, basis, kinds }
    }

    fn ncols(&self) -> usize {
        self.kinds.len()
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        for x in self.t[r].iter_mut() {
            *x /= p;
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (x, y) in row.iter_mut().zip(&pivot_row) {
                    *x -= f * y;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Bland-rule simplex maximizing `cost · x` over columns allowed by
    /// `allowed`. Returns `false` when unbounded.
    fn optimize(&mut self, cost: &[f64], allowed: &dyn Fn(ColKind) -> bool) -> Option<bool> {
        let ncols = self.ncols();
        for _ in 0..MAX_PIVOTS {
            let mut entering = None;
            for j in 0..ncols {
                if !allowed(self.kinds[j]) || self.basis.contains(&j) {
                    continue;
                }
                let reduced = cost[j]
                    - self
                        .t
                        .iter()
                        .zip(&self.basis)
                        .map(|(row, &b)| cost[b] * row[j])
                        .sum::<f64>();
                if reduced > COST_TOL {
                    entering = Some(j);
                    break;
                }
            }
            let Some(c) = entering else {
                return Some(true);
            };
            let mut leaving: Option<(usize, f64)> = None;
            for (i, row) in self.t.iter().enumerate() {
                if row[c] > PIVOT_TOL {
                    let ratio = row[ncols] / row[c];
                    leaving = match leaving {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-14
                                || (ratio <= br + 1e-14 && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            match leaving {
                None => return Some(false),
                Some((r, _)) => self.pivot(r, c),
            }
        }
        None
    }

    fn run(mut self, lp: &LinearProgram) -> LpOutcome {
        let ncols = self.ncols();
        let has_artificial = self.kinds.contains(&ColKind::Artificial);
        if has_artificial {
            let cost: Vec<f64> = self
                .kinds
                .iter()
                .map(|k| if *k == ColKind::Artificial { -1.0 } else { 0.0 })
                .collect();
            if self.optimize(&cost, &|_| true) != Some(true) {
                return LpOutcome::Infeasible;
            }
            let infeasibility: f64 = self
                .t
                .iter()
                .zip(&self.basis)
                .filter(|(_, &b)| self.kinds[b] == ColKind::Artificial)
                .map(|(row, _)| row[ncols])
                .sum();
            let scale = 1.0 + lp.rows.iter().fold(0.0_f64, |m, r| m.max(r.rhs.abs()));
            if infeasibility > 1e-9 * scale {
                return LpOutcome::Infeasible;
            }
            // drive zero-level artificials out of the basis
            let mut i = 0;
            while i < self.t.len() {
                if self.kinds[self.basis[i]] == ColKind::Artificial {
                    let replacement = (0..ncols)
                        .filter(|&j| self.kinds[j] != ColKind::Artificial)
                        .max_by(|&a, &b| self.t[i][a].abs().total_cmp(&self.t[i][b].abs()))
                        .filter(|&j| self.t[i][j].abs() > 1e-9);
                    match replacement {
                        Some(j) => self.pivot(i, j),
                        None => {
                            // redundant row
                            self.t.remove(i);
                            self.basis.remove(i);
                            continue;
                        }
                    }
                }
                i += 1;
            }
        }

        let cost: Vec<f64> = self
            .kinds
            .iter()
            .map(|k| match *k {
                ColKind::Plus(j) => lp.objective[j],
                ColKind::Minus(j) => -lp.objective[j],
                _ => 0.0,
            })
            .collect();
        match self.optimize(&cost, &|k| k != ColKind::Artificial) {
            Some(true) => {}
            Some(false) => return LpOutcome::Unbounded,
            None => return LpOutcome::Infeasible,
        }

        let mut x = vec![0.0; lp.n_vars];
        let mut basic = Vec::new();
        for (row, &b) in self.t.iter().zip(&self.basis) {
            match self.kinds[b] {
                ColKind::Plus(j) => {
                    x[j] += row[ncols];
                    basic.push(j);
                }
                ColKind::Minus(j) => {
                    x[j] -= row[ncols];
                    basic.push(j);
                }
                _ => {}
            }
        }
        basic.sort_unstable();
        basic.dedup();
        let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        LpOutcome::Optimal(LpSolution {
            x,
            objective,
            basic,
        })
    }
}
