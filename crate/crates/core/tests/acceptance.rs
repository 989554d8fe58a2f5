//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line
//! with its measurements and runtime; the binary exits non-zero if any
//! criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use helly_core::blieb::{bl_gaussian_search, check_det_inequality, kappa_weights, DEFAULT_SWEEPS};
use helly_core::john::{john_form, JohnForm};
use helly_core::linalg::{det, det_rank_one_update, dot, norm, scaled, Matrix, SymMatrix};
use helly_core::model::{
    generate_instance, regular_simplex_normals, AffineMap, HalfspaceFamily, InstanceKind, Polytope,
};
use helly_core::report::{bound_holds, run_selection, RunReport};
use helly_core::select::{certified_bound, dr_select, span_distances, Algorithm};
use helly_core::sparsify::{bss_select, gamma_d, step_budget, SparseDecomposition};
use helly_core::volume::{ln_gamma_half, volume_exact, volume_mc, VolumeOptions};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let r = norm(&v);
        if r > 1e-12 {
            return scaled(&v, 1.0 / r);
        }
    }
}

/// Random unit vectors reweighted into an exact decomposition of `I`.
fn isotropic(rng: &mut ChaCha8Rng, n: usize, m: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let g: Vec<Vec<f64>> = (0..m).map(|_| unit(rng, n)).collect();
    let s = SymMatrix::weighted_outer_sum(&g, &vec![1.0; m]);
    let root = s.eigen().map(|x| 1.0 / x.sqrt());
    g.iter()
        .map(|gj| {
            let h = root.mul_vec(gj);
            let r = norm(&h);
            (scaled(&h, 1.0 / r), r * r)
        })
        .unzip()
}

fn combinations(m: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i);
            rec(i + 1, m, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, m, k, &mut Vec::new(), &mut out);
    out
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn random_map(rng: &mut ChaCha8Rng, n: usize, translate: bool) -> AffineMap {
    loop {
        let linear = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        if det(&linear).abs() > 0.1 {
            let translation = (0..n)
                .map(|_| if translate { rng.random_range(-3.0..3.0) } else { 0.0 })
                .collect();
            return AffineMap {
                linear,
                translation,
            };
        }
    }
}

fn exact_opts() -> VolumeOptions {
    VolumeOptions::default()
}

// 1
fn determinant_lemma() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for trial in 0..1000 {
        let n = 2 + trial % 5;
        let a = Matrix::from_fn(n, n, |i, j| {
            rng.random_range(-1.0..1.0) + if i == j { n as f64 } else { 0.0 }
        });
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lemma = det_rank_one_update(&a, &u, &v).expect("well conditioned");
        let direct = det(&Matrix::from_fn(n, n, |i, j| a[(i, j)] + u[i] * v[j]));
        worst = worst.max((lemma - direct).abs() / direct.abs());
    }
    outcome(worst <= 1e-10, format!("1000 instances, max rel err {worst:.2e} (tol 1e-10)"))
}

// 2
fn cauchy_binet() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    for trial in 0..100 {
        let n = 1 + trial % 4;
        let m = rng.random_range(n..=10);
        let u: Vec<Vec<f64>> = (0..m).map(|_| unit(&mut rng, n)).collect();
        let c: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..2.0)).collect();
        let l: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..5.0)).collect();
        let cl: Vec<f64> = c.iter().zip(&l).map(|(a, b)| a * b).collect();
        let lhs = det(SymMatrix::weighted_outer_sum(&u, &cl).as_matrix());
        let rhs: f64 = combinations(m, n)
            .iter()
            .map(|sub| {
                let vs: Vec<Vec<f64>> = sub.iter().map(|&j| u[j].clone()).collect();
                let cs: Vec<f64> = sub.iter().map(|&j| c[j]).collect();
                let prod: f64 = sub.iter().map(|&j| l[j]).product();
                prod * det(SymMatrix::weighted_outer_sum(&vs, &cs).as_matrix())
            })
            .sum();
        worst = worst.max((lhs - rhs).abs() / rhs.abs());
    }
    outcome(worst <= 1e-9, format!("100 instances, max rel err {worst:.2e} (tol 1e-9)"))
}

// 3
fn john_pipeline(forms: &mut Vec<JohnForm>) -> Outcome {
    let mut corpus: Vec<(String, HalfspaceFamily)> = Vec::new();
    for n in 2..=5 {
        for kind in [InstanceKind::Cube, InstanceKind::Cross, InstanceKind::Simplex] {
            corpus.push((format!("{kind:?} n={n}"), generate_instance(kind, n, 0, 0, false).unwrap()));
        }
    }
    for seed in 0..50u64 {
        let n = 2 + seed as usize % 4;
        let m = n + 2 + (seed as usize * 7) % 25;
        corpus.push((
            format!("random n={n} m={m} seed={seed}"),
            generate_instance(InstanceKind::Random, n, m, 1000 + seed, false).unwrap(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut failures = Vec::new();
    let (mut worst_slack, mut worst_id, mut worst_bar, mut worst_trace, mut worst_quad) =
        (f64::INFINITY, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (name, family) in &corpus {
        let n = family.dim;
        let p = Polytope::new(family.clone()).unwrap();
        let (image, form) = match john_form(&p) {
            Ok(x) => x,
            Err(e) => {
                failures.push(format!("{name}: {e}"));
                continue;
            }
        };
        let slack = image
            .halfspaces()
            .iter()
            .map(|h| h.b - norm(&h.a))
            .fold(f64::INFINITY, f64::min);
        let trace = (form.weights.iter().sum::<f64>() - n as f64).abs();
        let mut quad: f64 = 0.0;
        for _ in 0..100 {
            let z = unit(&mut rng, n);
            let q: f64 = form
                .contacts
                .iter()
                .zip(&form.weights)
                .map(|(u, c)| c * dot(u, &z).powi(2))
                .sum();
            quad = quad.max((q - 1.0).abs());
        }
        worst_slack = worst_slack.min(slack);
        worst_id = worst_id.max(form.residual_identity);
        worst_bar = worst_bar.max(form.residual_barycenter);
        worst_trace = worst_trace.max(trace);
        worst_quad = worst_quad.max(quad);
        if slack < -1e-8 || form.residual_identity > 1e-5 || form.residual_barycenter > 1e-5 || trace > 1e-5 || quad > 1e-5 {
            failures.push(name.clone());
        }
        forms.push(form);
    }
    outcome(
        failures.is_empty(),
        format!(
            "{} bodies; min ball slack {worst_slack:.1e}, residual_identity {worst_id:.1e}, \
             residual_barycenter {worst_bar:.1e}, |Σc−n| {worst_trace:.1e}, \
             |Σc⟨u,z⟩²−1| {worst_quad:.1e}{}",
            corpus.len(),
            if failures.is_empty() { String::new() } else { format!("; failed: {failures:?}") }
        ),
    )
}

struct BssRun {
    n: usize,
    vectors: Vec<Vec<f64>>,
    sparse: SparseDecomposition,
}

// 4
fn bss_runs(runs: &mut Vec<BssRun>) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut failures = Vec::new();
    let mut worst_ratio: f64 = 0.0;
    for trial in 0..100 {
        let d = [2.0, 4.0, 9.0][trial % 3];
        let n = 2 + (trial / 3) % 5;
        let m = step_budget(d, n) + 1 + rng.random_range(0..3 * n);
        let (u, a) = isotropic(&mut rng, n, m);
        match bss_select(&u, &a, d) {
            Ok(sparse) => {
                let ratio = sparse.certificate.gamma_achieved / gamma_d(d);
                worst_ratio = worst_ratio.max(ratio);
                if sparse.sigma.len() > step_budget(d, n) || ratio > 1.0 + 1e-7 {
                    failures.push(format!("trial {trial}"));
                }
                runs.push(BssRun {
                    n,
                    vectors: sparse.sigma.iter().map(|&j| u[j].clone()).collect(),
                    sparse,
                });
            }
            Err(e) => failures.push(format!("trial {trial}: {e}")),
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "100 runs, d in {{2,4,9}}, n in 2..=6; max γ_achieved/γ_d {worst_ratio:.6}{}",
            if failures.is_empty() { String::new() } else { format!("; failed: {failures:?}") }
        ),
    )
}

// 5
fn kappa_and_determinant(runs: &[BssRun]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst_sum: f64 = 0.0;
    let mut violations = 0;
    let mut draws = 0;
    for run in runs {
        let w = kappa_weights(&run.vectors, &run.sparse.weights).unwrap();
        worst_sum = worst_sum.max((w.kappa_sum() - run.n as f64).abs());
        for _ in 0..10_000 / runs.len().max(1) {
            let l: Vec<f64> = w.kappa.iter().map(|_| rng.random_range(0.1..10.0)).collect();
            draws += 1;
            if !check_det_inequality(&w, &l).holds {
                violations += 1;
            }
        }
    }
    outcome(
        worst_sum <= 1e-9 && violations == 0 && draws >= 10_000,
        format!("max |Σκ−n| {worst_sum:.1e} over {} outputs; {violations} violations in {draws} λ draws", runs.len()),
    )
}

// 6
fn bl_certificate(runs: &[BssRun]) -> Outcome {
    let mut worst: f64 = 0.0;
    for run in runs {
        let w = kappa_weights(&run.vectors, &run.sparse.weights).unwrap();
        let search = bl_gaussian_search(&w, DEFAULT_SWEEPS);
        let cap = run.sparse.certificate.gamma_achieved.powf(run.n as f64 / 2.0);
        worst = worst.max(search.d_estimate / cap);
    }
    // exact decompositions: cube, simplex, cross-polytope contacts
    let mut exact_dev: f64 = 0.0;
    for n in 2..=5 {
        let mut cube = Vec::new();
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            cube.push(e.clone());
            e[i] = -1.0;
            cube.push(e);
        }
        let simplex = regular_simplex_normals(n);
        let s = 1.0 / (n as f64).sqrt();
        let cross: Vec<Vec<f64>> = (0..1usize << n)
            .map(|mask| (0..n).map(|i| if mask >> i & 1 == 1 { -s } else { s }).collect())
            .collect();
        for (u, c) in [
            (cube, 0.5),
            (simplex, n as f64 / (n + 1) as f64),
            (cross, n as f64 / (1usize << n) as f64),
        ] {
            let w = kappa_weights(&u, &vec![c; u.len()]).unwrap();
            let search = bl_gaussian_search(&w, DEFAULT_SWEEPS);
            exact_dev = exact_dev.max((search.d_estimate - 1.0).abs());
        }
    }
    outcome(
        worst <= 1.0 + 1e-7 && exact_dev <= 1e-7,
        format!(
            "max D_est / γ^(n/2) {worst:.6} over {} outputs; exact decompositions |D−1| {exact_dev:.1e}",
            runs.len()
        ),
    )
}

// 7
fn dvoretzky_rogers(forms: &[JohnForm], naszodi: &[RunReport]) -> Outcome {
    let mut worst = f64::INFINITY;
    let mut checked = 0;
    let mut check = |n: usize, distances: &[f64]| {
        for (k, &dist) in distances.iter().enumerate() {
            let floor = ((n - k) as f64 / n as f64).sqrt();
            worst = worst.min(dist - floor);
            checked += 1;
        }
    };
    for form in forms {
        let picks = dr_select(&form.contacts, &form.weights).unwrap();
        let chosen: Vec<Vec<f64>> = picks.iter().map(|&j| form.contacts[j].clone()).collect();
        check(form.dim(), &span_distances(&chosen));
    }
    for r in naszodi {
        let distances = r.residuals.dr_distances.as_ref().unwrap();
        check(distances.len(), distances);
    }
    outcome(
        worst >= -1e-9,
        format!("{checked} greedy steps over {} sequences; min margin over √((n−k+1)/n) {worst:.3e}", forms.len() + naszodi.len()),
    )
}

fn ratio_upper(r: &RunReport) -> f64 {
    r.measured_ratio.ci99[1]
}

// 8
fn symmetric_conformance() -> Outcome {
    let opts = exact_opts();
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    let mut mc = 0;
    for seed in 0..50u64 {
        let n = 2 + seed as usize % 3;
        let m = n + 1 + (seed as usize * 11) % (30 - n);
        let f = generate_instance(InstanceKind::Random, n, m, 2000 + seed, true).unwrap();
        match run_selection(&f, Algorithm::Symmetric, Some(4.0), &opts) {
            Ok(r) => {
                let bound = (36.0 / std::f64::consts::PI).powf(n as f64 / 2.0) * ln_gamma_half(n as u32 + 2).exp();
                worst = worst.max(ratio_upper(&r) / bound);
                if r.measured_ratio.method == helly_core::volume::VolumeMethod::Mc {
                    mc += 1;
                }
                if r.s > 4 * n || ratio_upper(&r) > bound * (1.0 + 1e-6) {
                    failures.push(format!("seed {seed}"));
                }
            }
            Err(e) => failures.push(format!("seed {seed}: {e}")),
        }
    }
    let mut cube_ok = true;
    for n in 2..=4 {
        let f = generate_instance(InstanceKind::Cube, n, 0, 0, true).unwrap();
        let r = run_selection(&f, Algorithm::Symmetric, Some(4.0), &opts).unwrap();
        cube_ok &= r.measured_ratio.estimate == 1.0 && r.s == n;
    }
    outcome(
        failures.is_empty() && cube_ok,
        format!(
            "50 strip families ({mc} by Monte Carlo); max ratio/bound {worst:.3e}; cubes ratio 1: {cube_ok}{}",
            if failures.is_empty() { String::new() } else { format!("; failed: {failures:?}") }
        ),
    )
}

fn halfspace_corpus(with_n4: bool) -> Vec<(String, HalfspaceFamily)> {
    let mut out = Vec::new();
    for seed in 0..50u64 {
        let n = 2 + seed as usize % 2;
        let m = n + 2 + (seed as usize * 13) % (29 - n);
        out.push((
            format!("n={n} m={m} seed={seed}"),
            generate_instance(InstanceKind::Random, n, m, 3000 + seed, false).unwrap(),
        ));
    }
    if with_n4 {
        for seed in 0..10u64 {
            let m = 10 + (seed as usize * 3) % 31;
            out.push((
                format!("n=4 m={m} seed={seed}"),
                generate_instance(InstanceKind::Random, 4, m, 4000 + seed, false).unwrap(),
            ));
        }
    }
    out
}

// 9
fn lifted_conformance() -> Outcome {
    let opts = exact_opts();
    let mut failures = Vec::new();
    let (mut worst, mut worst_w): (f64, f64) = (0.0, 0.0);
    for (name, f) in halfspace_corpus(false) {
        let n = f.dim;
        match run_selection(&f, Algorithm::Lifted, Some(4.0), &opts) {
            Ok(r) => {
                let bound = r.certified_log_ratio.exp();
                let w = r.residuals.correction_norm.unwrap();
                worst = worst.max(ratio_upper(&r) / bound);
                worst_w = worst_w.max(w * n as f64);
                if r.s > 5 * (n + 1) || w > 1.0 / n as f64 + 1e-9 || !r.bound_satisfied {
                    failures.push(name);
                }
            }
            Err(e) => failures.push(format!("{name}: {e}")),
        }
    }
    let n2 = certified_bound(Algorithm::Lifted, 2, 4.0).exp();
    outcome(
        failures.is_empty() && (n2 / 1205.77 - 1.0).abs() < 1e-4,
        format!(
            "50 families; max ratio/bound {worst:.3e}; max n‖w‖ {worst_w:.6}; n=2 bound {n2:.2}{}",
            if failures.is_empty() { String::new() } else { format!("; failed: {failures:?}") }
        ),
    )
}

// 10
fn naszodi_conformance(reports: &mut Vec<RunReport>) -> Outcome {
    let opts = exact_opts();
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for (name, f) in halfspace_corpus(true) {
        let n = f.dim;
        match run_selection(&f, Algorithm::Naszodi, None, &opts) {
            Ok(r) => {
                worst = worst.max(ratio_upper(&r) / r.certified_log_ratio.exp());
                if r.s > 2 * n || !r.bound_satisfied {
                    failures.push(name);
                }
                reports.push(r);
            }
            Err(e) => failures.push(format!("{name}: {e}")),
        }
    }
    let mut cube_ok = true;
    for n in 1..=4 {
        let f = generate_instance(InstanceKind::Cube, n, 0, 0, false).unwrap();
        let r = run_selection(&f, Algorithm::Naszodi, None, &opts).unwrap();
        cube_ok &= r.s == 2 * n && r.measured_ratio.estimate == 1.0;
        reports.push(r);
    }
    let b1 = certified_bound(Algorithm::Naszodi, 1, 0.0).exp();
    let b2 = certified_bound(Algorithm::Naszodi, 2, 0.0).exp();
    let consts = (b1 - 8.0).abs() < 1e-12 && (b2 / (72.0 * 2f64.sqrt() * std::f64::consts::PI) - 1.0).abs() < 1e-12;
    outcome(
        failures.is_empty() && cube_ok && consts,
        format!(
            "60 families (n = 2, 3, 4); max ratio/bound {worst:.3e}; cubes keep 2n facets with ratio 1: {cube_ok}; \
             bounds n=1 {b1:.4}, n=2 {b2:.4}{}",
            if failures.is_empty() { String::new() } else { format!("; failed: {failures:?}") }
        ),
    )
}

// 11
fn volume_engine() -> Outcome {
    let mut worst_exact: f64 = 0.0;
    let mut worst_sigma: f64 = 0.0;
    for n in 1..=6 {
        let cube = generate_instance(InstanceKind::Cube, n, 0, 0, false).unwrap();
        let mut members: Vec<_> = (0..n)
            .map(|i| {
                let mut a = vec![0.0; n];
                a[i] = -1.0;
                helly_core::model::Halfspace::new(a, 0.0)
            })
            .collect();
        members.push(helly_core::model::Halfspace::new(vec![1.0; n], 1.0));
        let simplex = HalfspaceFamily::new(n, false, members).unwrap();
        let cross_members = (0..1usize << n)
            .map(|mask| {
                let a = (0..n).map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 }).collect();
                helly_core::model::Halfspace::new(a, 1.0)
            })
            .collect();
        let cross = HalfspaceFamily::new(n, false, cross_members).unwrap();
        let mut bodies = vec![(cube, 2f64.powi(n as i32)), (simplex, 1.0 / factorial(n))];
        // 2^n facets: the n = 6 cross-polytope lies outside the exact budget
        if cross.members.len() <= 48 {
            bodies.push((cross, 2f64.powi(n as i32) / factorial(n)));
        }
        for (k, (family, truth)) in bodies.into_iter().enumerate() {
            let p = Polytope::new(family).unwrap();
            let exact = volume_exact(&p).unwrap().value;
            worst_exact = worst_exact.max((exact - truth).abs() / truth);
            let est = volume_mc(&p, 1_000_000, 1100 + 10 * n as u64 + k as u64).unwrap();
            let box_vol: f64 = p.bounding_box().iter().map(|(lo, hi)| hi - lo).product();
            let q = truth / box_vol;
            let sigma = box_vol * (q * (1.0 - q) / 1e6).sqrt();
            let dev = (est.value - truth).abs();
            worst_sigma = worst_sigma.max(if sigma > 0.0 { dev / sigma } else if dev == 0.0 { 0.0 } else { f64::INFINITY });
        }
    }
    outcome(
        worst_exact <= 1e-8 && worst_sigma <= 3.0,
        format!("cube/simplex n = 1..=6, cross n = 1..=5: max exact rel err {worst_exact:.1e}; max MC deviation {worst_sigma:.2}σ"),
    )
}

// 12
fn affine_invariance() -> Outcome {
    let opts = exact_opts();
    let mut rng = ChaCha8Rng::seed_from_u64(1212);
    let mut failures = Vec::new();
    let mut same_selection = 0;
    let mut worst_rel: f64 = 0.0;
    for k in 0..20u64 {
        let n = 2 + k as usize % 2;
        let algorithm = [Algorithm::Lifted, Algorithm::Naszodi, Algorithm::Symmetric][k as usize % 3];
        let symmetric = algorithm == Algorithm::Symmetric;
        let m = if symmetric { 3 * n } else { 4 * n + 2 };
        let f = generate_instance(InstanceKind::Random, n, m, 5000 + k, symmetric).unwrap();
        let map = random_map(&mut rng, n, !symmetric);
        let g = f.transformed(&map).unwrap();
        let d = algorithm.uses_d().then_some(4.0);
        let (r0, r1) = match (run_selection(&f, algorithm, d, &opts), run_selection(&g, algorithm, d, &opts)) {
            (Ok(a), Ok(b)) => (a, b),
            (a, b) => {
                failures.push(format!("map {k}: {:?} / {:?}", a.err(), b.err()));
                continue;
            }
        };
        let cap_ok = algorithm.cap(n, d.unwrap_or(0.0)) >= r0.s.max(r1.s);
        let bound_ok = r0.certified_log_ratio == r1.certified_log_ratio;
        let rel = (r0.measured_ratio.estimate - r1.measured_ratio.estimate).abs() / r0.measured_ratio.estimate;
        // intervals are degenerate for exact volumes; allow roundoff
        let joint = r0.measured_ratio.ci99[0] <= r1.measured_ratio.ci99[1] * (1.0 + 1e-6)
            && r1.measured_ratio.ci99[0] <= r0.measured_ratio.ci99[1] * (1.0 + 1e-6);
        if r0.selected == r1.selected {
            same_selection += 1;
        }
        worst_rel = worst_rel.max(rel);
        if !(cap_ok && bound_ok && joint && bound_holds(&r1.measured_ratio, r1.certified_log_ratio)) {
            failures.push(format!(
                "map {k} ({algorithm}): selections {:?} vs {:?}, ratios {} vs {}",
                r0.selected, r1.selected, r0.measured_ratio.estimate, r1.measured_ratio.estimate
            ));
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "20 maps; identical selections {same_selection}/20; max ratio rel diff {worst_rel:.1e}{}",
            if failures.is_empty() { String::new() } else { format!("; failed: {failures:?}") }
        ),
    )
}

fn main() -> ExitCode {
    let mut forms = Vec::new();
    let mut runs = Vec::new();
    let mut naszodi = Vec::new();
    let mut results: Vec<(usize, &str, Duration, Option<Duration>, Outcome)> = Vec::new();
    let mut timed = |id: usize, name: &'static str, limit: Option<u64>, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let out = f();
        results.push((id, name, start.elapsed(), limit.map(Duration::from_secs), out));
    };

    timed(1, "determinant lemma", Some(1), &mut determinant_lemma);
    timed(2, "Cauchy-Binet expansion", Some(5), &mut cauchy_binet);
    timed(3, "John pipeline", Some(30), &mut || john_pipeline(&mut forms));
    timed(4, "barrier sparsifier", Some(30), &mut || bss_runs(&mut runs));
    timed(5, "kappa weights and determinant inequality", Some(30), &mut || kappa_and_determinant(&runs));
    timed(6, "Brascamp-Lieb certificate", Some(60), &mut || bl_certificate(&runs));
    timed(8, "strip selection conformance", Some(120), &mut symmetric_conformance);
    timed(9, "lifted selection conformance", Some(120), &mut lifted_conformance);
    timed(10, "Dvoretzky-Rogers selection conformance", Some(120), &mut || naszodi_conformance(&mut naszodi));
    timed(7, "Dvoretzky-Rogers distances", None, &mut || dvoretzky_rogers(&forms, &naszodi));
    timed(11, "volume engine", Some(60), &mut volume_engine);
    timed(12, "affine invariance", Some(120), &mut affine_invariance);

    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (id, name, elapsed, limit, out) in &results {
        let in_time = limit.is_none_or(|l| *elapsed < l);
        let pass = out.pass && in_time;
        if !pass {
            failed += 1;
        }
        let budget = match limit {
            Some(l) => format!("{:.2}s < {}s", elapsed.as_secs_f64(), l.as_secs()),
            None => format!("{:.2}s", elapsed.as_secs_f64()),
        };
        println!(
            "[{}] {id:>2} {name}: {} ({budget})",
            if pass { "PASS" } else { "FAIL" },
            out.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
