//! Evaluation of the generating map and its global validation report.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{det, AxisBox};
use crate::ifs::ConstructionInstance;
use crate::rng::CounterRng;

use super::{boundary_samples, GeneratingMap, CONJUGACY_TOL};

/// Evaluator for the generating map phi = script o T, with a per-move
/// last-hit cell cache. The cache is evaluator-local state: clone the
/// evaluator per thread for concurrent use.
pub struct PhiEvaluator<'a> {
    gm: &'a GeneratingMap,
    hints: Vec<usize>,
}

impl<'a> PhiEvaluator<'a> {
    pub fn new(gm: &'a GeneratingMap) -> Self {
        PhiEvaluator {
            gm,
            hints: vec![0; gm.script.len()],
        }
    }

    /// phi(x); the point must lie outside every open hole.
    pub fn eval(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = self.gm.exterior.apply(x);
        for (i, mv) in self.gm.script.iter().enumerate() {
            match mv.apply(&y, &mut self.hints[i]) {
                Ok(Some((y2, _))) => y = y2,
                Ok(None) => {}
                Err(Error::LocationFailure { point, .. }) => {
                    return Err(Error::LocationFailure {
                        move_index: i,
                        point,
                    })
                }
                Err(e) => return Err(e),
            }
        }
        Ok(y)
    }

    /// phi(x) together with the composite jacobian (row-major n x n).
    pub fn eval_with_jacobian(&mut self, x: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let n = self.gm.dim();
        let mut y = self.gm.exterior.apply(x);
        let mut jac: Vec<Vec<f64>> = self.gm.exterior.matrix();
        for (i, mv) in self.gm.script.iter().enumerate() {
            match mv.apply(&y, &mut self.hints[i]) {
                Ok(Some((y2, cell))) => {
                    let prescribed;
                    let linear = match cell {
                        Some(c) => &mv.cells[c].affine().linear,
                        None => {
                            prescribed = mv.prescribed_inner();
                            &prescribed.linear
                        }
                    };
                    let mut next = vec![vec![0.0; n]; n];
                    for r in 0..n {
                        for c in 0..n {
                            next[r][c] = (0..n).map(|k| linear[r][k] * jac[k][c]).sum();
                        }
                    }
                    jac = next;
                    y = y2;
                }
                Ok(None) => {}
                Err(Error::LocationFailure { point, .. }) => {
                    return Err(Error::LocationFailure {
                        move_index: i,
                        point,
                    })
                }
                Err(e) => return Err(e),
            }
        }
        Ok((y, jac))
    }
}

/// One validation check in a generating-map report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GenMapCheck {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Validation report: per-move validation, boundary conjugacy, injectivity
/// and orientation audits, with the observed extremes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GenMapReport {
    pub checks: Vec<GenMapCheck>,
    #[serde(rename = "maxBoundaryError")]
    pub max_boundary_error: f64,
    #[serde(rename = "minJacobianDet")]
    pub min_jacobian_det: f64,
    #[serde(rename = "sampleCounts")]
    pub sample_counts: std::collections::BTreeMap<String, usize>,
}

impl GenMapReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Run the full hard-validation suite on a generating map: per-move
/// validation, exterior agreement on the domain boundary, the boundary
/// conjugacy phi(h_k(y)) = g_k(phi(y)) on >= 10^3 samples per hole, an
/// injectivity spot check and an orientation audit.
pub fn validate_generating_map(
    instance: &ConstructionInstance,
    gm: &GeneratingMap,
) -> GenMapReport {
    let mut checks = Vec::new();
    let mut counts = std::collections::BTreeMap::new();
    let n = instance.n();
    let domain = instance.domain();
    let diam_s = instance.target_box().diameter();
    let tol = CONJUGACY_TOL * diam_s;

    // Per-move validation.
    let mut move_fail = None;
    for (i, mv) in gm.script.iter().enumerate() {
        if let Err(e) = mv.validate() {
            move_fail = Some((i, e));
            break;
        }
    }
    checks.push(match &move_fail {
        None => GenMapCheck {
            name: "per-move validation".into(),
            pass: true,
            detail: format!("{} moves validated", gm.script.len()),
        },
        Some((i, e)) => GenMapCheck {
            name: "per-move validation".into(),
            pass: false,
            detail: format!("move {i}: {e}"),
        },
    });

    let rng = CounterRng::new(crate::rng::SEED, 0x7A11);
    let mut max_boundary_error: f64 = 0.0;

    // Exterior agreement on the domain boundary.
    let per_axis = boundary_budget(n, 1000);
    let dq_samples = boundary_samples(&domain, per_axis, &rng, 11);
    counts.insert("domainBoundary".into(), dq_samples.len());
    let mut evaluator = PhiEvaluator::new(gm);
    let mut worst = 0.0f64;
    let mut ok = true;
    for s in &dq_samples {
        match evaluator.eval(s) {
            Ok(y) => {
                let want = gm.exterior.apply(s);
                let err = y
                    .iter()
                    .zip(&want)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                worst = worst.max(err);
            }
            Err(e) => {
                ok = false;
                checks.push(GenMapCheck {
                    name: "exterior agreement".into(),
                    pass: false,
                    detail: format!("evaluation failed at {s:?}: {e}"),
                });
                break;
            }
        }
    }
    if ok {
        checks.push(GenMapCheck {
            name: "exterior agreement".into(),
            pass: worst <= tol,
            detail: format!("max |phi - T| on dQ = {worst:.3e} (tol {tol:.3e})"),
        });
    }
    max_boundary_error = max_boundary_error.max(worst);

    // Boundary conjugacy per hole.
    let count = instance.product.count() as usize;
    let mut conj_worst = 0.0f64;
    let mut conj_fail: Option<String> = None;
    let mut conj_samples = 0usize;
    'holes: for k in 0..count {
        let (i, j) = instance.product.flat_to_pair(k as u128);
        let h = instance.product.map(i, j);
        let g = instance.target.map(k as u128);
        for y in &dq_samples {
            let x = h.apply(y);
            let left = match evaluator.eval(&x) {
                Ok(v) => v,
                Err(e) => {
                    conj_fail = Some(format!("phi(h_{k}(y)) failed at y = {y:?}: {e}"));
                    break 'holes;
                }
            };
            let right = g.apply(&gm.exterior.apply(y));
            let err = left
                .iter()
                .zip(&right)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            conj_worst = conj_worst.max(err);
            conj_samples += 1;
        }
    }
    counts.insert("conjugacyPerHole".into(), dq_samples.len());
    checks.push(match conj_fail {
        Some(detail) => GenMapCheck {
            name: "boundary conjugacy".into(),
            pass: false,
            detail,
        },
        None => GenMapCheck {
            name: "boundary conjugacy".into(),
            pass: conj_worst <= tol,
            detail: format!(
                "max |phi(h_k(y)) - g_k(phi(y))| = {conj_worst:.3e} over {conj_samples} samples (tol {tol:.3e})"
            ),
        },
    });
    max_boundary_error = max_boundary_error.max(conj_worst);

    // Injectivity spot check on random shell points.
    let shell_points = sample_shell_points(instance, 2_000, &rng, 17);
    counts.insert("shellPoints".into(), shell_points.len());
    let images: Vec<Vec<f64>> = {
        let mut out = Vec::with_capacity(shell_points.len());
        let mut fail = None;
        for p in &shell_points {
            match evaluator.eval(p) {
                Ok(y) => out.push(y),
                Err(e) => {
                    fail = Some((p.clone(), e));
                    break;
                }
            }
        }
        if let Some((p, e)) = fail {
            checks.push(GenMapCheck {
                name: "injectivity".into(),
                pass: false,
                detail: format!("evaluation failed at {p:?}: {e}"),
            });
            Vec::new()
        } else {
            out
        }
    };
    if !images.is_empty() {
        let mut pairs_checked = 0usize;
        let mut inj_ok = true;
        let mut witness = String::new();
        'outer: for a in 0..images.len() {
            for b in a + 1..images.len() {
                pairs_checked += 1;
                let d: f64 = images[a]
                    .iter()
                    .zip(&images[b])
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                if d == 0.0 {
                    inj_ok = false;
                    witness = format!(
                        "points {:?} and {:?} map to the same image",
                        shell_points[a], shell_points[b]
                    );
                    break 'outer;
                }
                if pairs_checked >= 100_000 {
                    break 'outer;
                }
            }
        }
        counts.insert("injectivityPairs".into(), pairs_checked);
        checks.push(GenMapCheck {
            name: "injectivity".into(),
            pass: inj_ok,
            detail: if inj_ok {
                format!("{pairs_checked} random pairs map to distinct points")
            } else {
                witness
            },
        });
    }

    // Orientation audit: jacobian determinants along random evaluations.
    let mut min_det = f64::INFINITY;
    let mut orient_ok = true;
    let mut orient_detail = String::new();
    let audit_points = sample_shell_points(instance, 10_000, &rng, 23);
    counts.insert("orientationAudit".into(), audit_points.len());
    for p in &audit_points {
        match evaluator.eval_with_jacobian(p) {
            Ok((_, jac)) => {
                let d = det(&jac);
                min_det = min_det.min(d);
                if d <= 0.0 {
                    orient_ok = false;
                    orient_detail = format!("non-positive jacobian determinant {d} at {p:?}");
                    break;
                }
            }
            Err(e) => {
                orient_ok = false;
                orient_detail = format!("evaluation failed at {p:?}: {e}");
                break;
            }
        }
    }
    checks.push(GenMapCheck {
        name: "orientation audit".into(),
        pass: orient_ok,
        detail: if orient_ok {
            format!("min jacobian det = {min_det:.6e} > 0")
        } else {
            orient_detail
        },
    });

    GenMapReport {
        checks,
        max_boundary_error,
        min_jacobian_det: if min_det.is_finite() { min_det } else { 0.0 },
        sample_counts: counts,
    }
}

/// Per-axis sample budget so that 2n faces x per_axis^(n-1) is at least
/// `want` samples.
fn boundary_budget(n: usize, want: usize) -> usize {
    let faces = 2 * n;
    let per_face = want.div_ceil(faces);
    match n {
        2 => per_face.max(2),
        _ => (per_face as f64).powf(1.0 / (n as f64 - 1.0)).ceil() as usize + 1,
    }
}

/// Deterministic random points in the closed domain box, excluding the open
/// level-1 holes (the fundamental shell).
pub fn sample_shell_points(
    instance: &ConstructionInstance,
    want: usize,
    rng: &CounterRng,
    stream: u64,
) -> Vec<Vec<f64>> {
    let domain = instance.domain();
    let mut out = Vec::with_capacity(want);
    let mut counter = stream.wrapping_mul(0x51AB);
    let mut guard = 0usize;
    while out.len() < want && guard < want * 50 {
        guard += 1;
        let p = rng.point_at(counter, &domain.lo, &domain.hi);
        counter += 1;
        if !point_in_any_hole(instance, &p) {
            out.push(p);
        }
    }
    out
}

/// Whether the point lies strictly inside some open level-1 product hole.
pub fn point_in_any_hole(instance: &ConstructionInstance, p: &[f64]) -> bool {
    match instance.product.locate_pair(p, 0.0) {
        None => false,
        Some((i, j)) => {
            let b = instance.product.image_box(i as u128 - 1, j as u128 - 1);
            b.contains_point_strict(p, 1e-13 * b.diameter())
        }
    }
}

#[allow(dead_code)]
fn unused_axis_box(_b: &AxisBox) {}
