//! Selection runs with measured volume ratios, and independent
//! re-verification of a stored report against its instance.

use log::info;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HalfspaceFamily, Polytope};
use crate::select::{certified_bound, select, Algorithm, Provenance};
use crate::volume::{measure_ratio, RatioMeasurement, VolumeOptions};

/// Relative slack on the certified bound when comparing measured ratios.
pub const BOUND_SLACK: f64 = 1e-6;

/// The JSON document written by `select`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub algorithm: Algorithm,
    pub d: Option<f64>,
    pub selected: Vec<usize>,
    pub s: usize,
    pub gamma_achieved: f64,
    pub certified_log_ratio: f64,
    pub measured_ratio: RatioMeasurement,
    pub bound_satisfied: bool,
    pub residuals: Provenance,
    pub kappa: Vec<f64>,
    pub instance_hash: String,
}

impl RunReport {
    /// Residual checks behind a zero exit status.
    pub fn residuals_ok(&self) -> bool {
        self.residuals.residual_identity <= crate::john::RESIDUAL_TOL
            && self.residuals.residual_barycenter <= crate::john::RESIDUAL_TOL
    }

    pub fn passed(&self) -> bool {
        self.bound_satisfied && self.residuals_ok()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Whether the upper end of the ratio interval stays under the bound.
pub fn bound_holds(ratio: &RatioMeasurement, certified_log_ratio: f64) -> bool {
    ratio.ci99[1] <= certified_log_ratio.exp() * (1.0 + BOUND_SLACK)
}

/// Selected members as a polytope.
pub fn selected_polytope(family: &HalfspaceFamily, selected: &[usize]) -> Result<Polytope> {
    Polytope::new(family.subfamily(selected)?)
}

/// Runs a selection pipeline and measures the resulting volume ratio.
/// A measured ratio above the certified bound is an internal failure,
/// since the bound is a theorem.
pub fn run_selection(
    family: &HalfspaceFamily,
    algorithm: Algorithm,
    d: Option<f64>,
    volume: &VolumeOptions,
) -> Result<RunReport> {
    let p = Polytope::new(family.clone())?;
    let sel = select(&p, algorithm, d)?;
    let q = selected_polytope(family, &sel.selected)
        .map_err(|e| Error::InternalCheckFailed(format!("selected family: {e}")))?;
    let ratio = measure_ratio(&q, &p, volume)?;
    let bound_satisfied = bound_holds(&ratio, sel.certified_log_ratio);
    info!(
        "{algorithm}: s = {}, ratio = {:.6} (ci99 {:.6}..{:.6}), bound = {:.6}",
        sel.s,
        ratio.estimate,
        ratio.ci99[0],
        ratio.ci99[1],
        sel.certified_log_ratio.exp()
    );
    Ok(RunReport {
        algorithm: sel.algorithm,
        d: sel.d,
        selected: sel.selected,
        s: sel.s,
        gamma_achieved: sel.gamma_achieved,
        certified_log_ratio: sel.certified_log_ratio,
        measured_ratio: ratio,
        bound_satisfied,
        residuals: sel.provenance,
        kappa: sel.kappa,
        instance_hash: family.content_hash(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub instance_hash: String,
    pub algorithm: Algorithm,
    pub s: usize,
    pub cap: usize,
    pub certified_log_ratio: f64,
    pub certified_matches: bool,
    pub measured_ratio: RatioMeasurement,
    pub bound_satisfied: bool,
    /// Whether the new interval overlaps the one in the report.
    pub agrees_with_report: bool,
    pub pass: bool,
}

/// Recomputes both volumes, the ratio, and the certified bound for a
/// stored report. Fails with [`Error::MismatchedInstance`] when the report
/// was produced for a different family.
pub fn verify_report(
    family: &HalfspaceFamily,
    report: &RunReport,
    volume: &VolumeOptions,
) -> Result<Verification> {
    let hash = family.content_hash();
    if hash != report.instance_hash {
        return Err(Error::MismatchedInstance {
            expected: hash,
            found: report.instance_hash.clone(),
        });
    }
    let mut distinct = report.selected.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() != report.selected.len() || distinct.len() != report.s {
        return Err(Error::Value("selected indices are not distinct or s disagrees".into()));
    }
    let n = family.dim;
    let d = match (report.algorithm.uses_d(), report.d) {
        (true, Some(d)) if d.is_finite() && d > 1.0 => d,
        (false, None) => 0.0,
        _ => return Err(Error::Value("d is inconsistent with the algorithm".into())),
    };
    let p = Polytope::new(family.clone())?;
    let q = selected_polytope(family, &report.selected)?;
    let ratio = measure_ratio(&q, &p, volume)?;
    let certified = certified_bound(report.algorithm, n, d);
    let certified_matches =
        (certified - report.certified_log_ratio).abs() <= 1e-12 * certified.abs().max(1.0);
    let cap = report.algorithm.cap(n, d);
    let bound_satisfied = bound_holds(&ratio, certified);
    let old = report.measured_ratio.ci99;
    let agrees_with_report = ratio.ci99[0] <= old[1] * (1.0 + 1e-9) && old[0] <= ratio.ci99[1] * (1.0 + 1e-9);
    Ok(Verification {
        instance_hash: hash,
        algorithm: report.algorithm,
        s: report.s,
        cap,
        certified_log_ratio: certified,
        certified_matches,
        measured_ratio: ratio,
        bound_satisfied,
        agrees_with_report,
        pass: bound_satisfied && certified_matches && report.s <= cap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_instance, InstanceKind};
    use crate::volume::VolumeMethod;

    fn opts() -> VolumeOptions {
        VolumeOptions {
            samples: 200_000,
            seed: 1,
            force_exact: false,
        }
    }

    #[test]
    fn cube_strips_have_unit_ratio() {
        let f = generate_instance(InstanceKind::Cube, 3, 0, 0, true).unwrap();
        let r = run_selection(&f, Algorithm::Symmetric, Some(4.0), &opts()).unwrap();
        assert_eq!(r.measured_ratio.method, VolumeMethod::Exact);
        assert!((r.measured_ratio.estimate - 1.0).abs() < 1e-9);
        assert!(r.passed());
    }

    #[test]
    fn report_round_trips_and_verifies() {
        let f = generate_instance(InstanceKind::Random, 3, 15, 5, false).unwrap();
        let r = run_selection(&f, Algorithm::Lifted, Some(4.0), &opts()).unwrap();
        let parsed: RunReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(parsed, r);
        let v = verify_report(&f, &parsed, &opts()).unwrap();
        assert!(v.pass && v.certified_matches && v.agrees_with_report);
    }

    #[test]
    fn verification_binds_instance() {
        let f = generate_instance(InstanceKind::Cube, 2, 0, 0, false).unwrap();
        let g = generate_instance(InstanceKind::Cube, 3, 0, 0, false).unwrap();
        let r = run_selection(&f, Algorithm::Naszodi, None, &opts()).unwrap();
        assert!(matches!(
            verify_report(&g, &r, &opts()),
            Err(Error::MismatchedInstance { .. })
        ));
    }

    #[test]
    fn tampered_selection_is_unbounded() {
        let f = generate_instance(InstanceKind::Cube, 2, 0, 0, true).unwrap();
        let mut r = run_selection(&f, Algorithm::Symmetric, Some(4.0), &opts()).unwrap();
        r.selected.pop();
        r.s -= 1;
        assert!(matches!(verify_report(&f, &r, &opts()), Err(Error::Unbounded)));
    }
}
