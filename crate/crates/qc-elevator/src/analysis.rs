//! Dimension estimators, metric dilatation sampling, and Sobolev p-energy
//! estimation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genmap::{eval::point_in_any_hole, GeneratingMap, PhiEvaluator};
use crate::ifs::ConstructionInstance;
use crate::rng::{direction_set, CounterRng, SEED};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum DimensionMethod {
    MoranExact,
    CylinderExact,
    BoxCount,
}

/// A dimension estimate with its per-scale cover profile and, for the
/// regression methods, the slope standard error.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub method: DimensionMethod,
    pub value: f64,
    #[serde(rename = "perScaleCounts")]
    pub per_scale_counts: Vec<(f64, f64)>,
    #[serde(rename = "slopeStderr")]
    pub slope_stderr: f64,
}

/// Least-squares slope of log(count) against log(1/scale).
pub fn fit_log_slope(per_scale: &[(f64, f64)]) -> Result<(f64, f64)> {
    if per_scale.len() < 2 {
        return Err(Error::DegenerateFit("need at least two scales".into()));
    }
    let xs: Vec<f64> = per_scale.iter().map(|(s, _)| (1.0 / s).ln()).collect();
    let ys: Vec<f64> = per_scale.iter().map(|(_, c)| c.ln()).collect();
    let m = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / m;
    let ybar = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - xbar) * (y - ybar))
        .sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all scales equal".into()));
    }
    let slope = sxy / sxx;
    let stderr = if xs.len() > 2 {
        let ss_res: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| {
                let fit = ybar + slope * (x - xbar);
                (y - fit) * (y - fit)
            })
            .sum();
        (ss_res / (m - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok((slope, stderr))
}

/// Box-counting dimension of a point cloud: grid cover counts at each
/// scale (cells anchored at the origin), then the log-log regression.
pub fn box_counting_dimension(cloud: &[Vec<f64>], scales: &[f64]) -> Result<DimensionEstimate> {
    if cloud.is_empty() {
        return Err(Error::DegenerateFit("empty cloud".into()));
    }
    if scales.len() < 2 {
        return Err(Error::DegenerateFit("need at least two scales".into()));
    }
    let mut per_scale = Vec::with_capacity(scales.len());
    for &s in scales {
        let mut cells: Vec<Vec<i64>> = cloud
            .par_iter()
            .map(|p| p.iter().map(|&x| (x / s).floor() as i64).collect())
            .collect();
        cells.sort();
        cells.dedup();
        per_scale.push((s, cells.len() as f64));
    }
    if per_scale.windows(2).all(|w| w[0].1 == w[1].1) {
        return Err(Error::DegenerateFit(format!(
            "cover count is {} at every scale",
            per_scale[0].1
        )));
    }
    let (value, slope_stderr) = fit_log_slope(&per_scale)?;
    Ok(DimensionEstimate {
        method: DimensionMethod::BoxCount,
        value,
        per_scale_counts: per_scale,
        slope_stderr,
    })
}

/// Exact fiber-image dimension log M' / log(1/t), with the exact cylinder
/// cover profile (t^k, M'^k) attached.
pub fn cylinder_dimension_fiber(instance: &ConstructionInstance) -> DimensionEstimate {
    let mprime_ln = instance.params.mprime_ln;
    let t_ln = instance.params.t_ln;
    let value = mprime_ln / (-t_ln);
    let per_scale_counts: Vec<(f64, f64)> = (1..=8)
        .map(|k| {
            (
                (k as f64 * t_ln).exp(),
                (k as f64 * mprime_ln).exp(),
            )
        })
        .collect();
    DimensionEstimate {
        method: DimensionMethod::CylinderExact,
        value,
        per_scale_counts,
        slope_stderr: 0.0,
    }
}

/// One dilatation sample: max and min image displacement over the
/// direction set at radius r.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RatioSample {
    pub x: Vec<f64>,
    pub r: f64,
    #[serde(rename = "Lval")]
    pub l_big: f64,
    #[serde(rename = "lval")]
    pub l_small: f64,
    pub ratio: f64,
}

/// Finite-radius dilatation statistics. The limsup of the metric
/// definition is approximated from below by finitely many (x, r, direction)
/// probes; the certified statement is the per-point jacobian conditioning
/// plus the analytic invariant-set bound.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QCRatioStats {
    pub samples: Vec<RatioSample>,
    #[serde(rename = "maxRatio")]
    pub max_ratio: f64,
    #[serde(rename = "analyticBound")]
    pub analytic_bound: Option<f64>,
}

/// Probe a map at the given points and radii over the fixed direction set.
/// Probes whose points cannot be evaluated (inside a hole, outside the
/// map's domain) are skipped.
pub fn qc_ratio_sample(
    mut map: impl FnMut(&[f64]) -> Option<Vec<f64>>,
    points: &[Vec<f64>],
    radii: &[f64],
    analytic_bound: Option<f64>,
) -> QCRatioStats {
    let n = points.first().map_or(2, |p| p.len());
    let dirs = direction_set(n);
    let mut samples = Vec::new();
    let mut max_ratio = 0.0f64;
    for x in points {
        let Some(fx) = map(x) else { continue };
        for &r in radii {
            let mut l_big = 0.0f64;
            let mut l_small = f64::INFINITY;
            let mut complete = true;
            for u in &dirs {
                let probe: Vec<f64> = x.iter().zip(u).map(|(a, b)| a + r * b).collect();
                let Some(fy) = map(&probe) else {
                    complete = false;
                    break;
                };
                let dist: f64 = fx
                    .iter()
                    .zip(&fy)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                l_big = l_big.max(dist);
                l_small = l_small.min(dist);
            }
            if !complete || !(l_small > 0.0) {
                continue;
            }
            let ratio = l_big / l_small;
            max_ratio = max_ratio.max(ratio);
            samples.push(RatioSample {
                x: x.clone(),
                r,
                l_big,
                l_small,
                ratio,
            });
        }
    }
    QCRatioStats {
        samples,
        max_ratio,
        analytic_bound,
    }
}

/// Singular values of a small matrix via Jacobi iteration on A^T A.
pub fn singular_values(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    // B = A^T A, symmetric positive semidefinite.
    let mut b = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            b[i][j] = (0..n).map(|k| a[k][i] * a[k][j]).sum();
        }
    }
    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += b[p][q] * b[p][q];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if b[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = 0.5 * (b[q][q] - b[p][p]) / b[p][q];
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (bkp, bkq) = (b[k][p], b[k][q]);
                    b[k][p] = c * bkp - s * bkq;
                    b[k][q] = s * bkp + c * bkq;
                }
                for k in 0..n {
                    let (bpk, bqk) = (b[p][k], b[q][k]);
                    b[p][k] = c * bpk - s * bqk;
                    b[q][k] = s * bpk + c * bqk;
                }
            }
        }
    }
    let mut sv: Vec<f64> = (0..n).map(|i| b[i][i].max(0.0).sqrt()).collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Operator norm (largest singular value).
pub fn operator_norm(a: &[Vec<f64>]) -> f64 {
    singular_values(a)[0]
}

/// Conditioning (ratio of extreme singular values).
pub fn conditioning(a: &[Vec<f64>]) -> f64 {
    let sv = singular_values(a);
    sv[0] / sv[sv.len() - 1].max(1e-300)
}

/// Sobolev energy report: the exact series factor q, the Monte Carlo shell
/// energy with its 99% confidence halfwidth, and the geometric series
/// total.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SobolevReport {
    pub q: f64,
    #[serde(rename = "shellEnergyEstimate")]
    pub shell_energy: Option<f64>,
    #[serde(rename = "confidenceHalfwidth")]
    pub halfwidth: Option<f64>,
    #[serde(rename = "totalBound")]
    pub total_bound: Option<f64>,
    #[serde(rename = "sampleCount")]
    pub sample_count: usize,
}

/// Estimate the Sobolev p-energy of the generating map over the
/// fundamental shell by stratified Monte Carlo of the jacobian operator
/// norm to the p-th power. Without a generating map (paper-mode
/// magnitudes), only the exact series factor is reported.
pub fn sobolev_energy(
    instance: &ConstructionInstance,
    gm: Option<&GeneratingMap>,
    sample_count: usize,
) -> Result<SobolevReport> {
    let q = instance.params.q;
    if q >= 1.0 {
        return Err(Error::DivergentSeries { q });
    }
    let Some(gm) = gm else {
        return Ok(SobolevReport {
            q,
            shell_energy: None,
            halfwidth: None,
            total_bound: None,
            sample_count: 0,
        });
    };
    let p = instance.params.p;
    let domain = instance.domain();
    // Counter-keyed draws: sample i is a pure function of i, so runs are
    // deterministic regardless of the parallel schedule and the first N
    // samples of a 2N run coincide with the N run (nested sequences keep
    // the sqrt-N halfwidth comparison stable).
    let rng = CounterRng::new(SEED, 0x50B0);
    let values: Vec<f64> = (0..sample_count)
        .into_par_iter()
        .map_init(
            || PhiEvaluator::new(gm),
            |evaluator, i| {
                let x = rng.point_at(i as u64, &domain.lo, &domain.hi);
                if point_in_any_hole(instance, &x) {
                    return 0.0;
                }
                match evaluator.eval_with_jacobian(&x) {
                    Ok((_, jac)) => operator_norm(&jac).powf(p),
                    Err(_) => 0.0,
                }
            },
        )
        .collect();
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0).max(1.0);
    let vol = domain.volume();
    let shell_energy = mean * vol;
    // 99% normal-approximation halfwidth.
    let halfwidth = 2.5758 * (var / m).sqrt() * vol;
    Ok(SobolevReport {
        q,
        shell_energy: Some(shell_energy),
        halfwidth: Some(halfwidth),
        total_bound: Some(shell_energy / (1.0 - q)),
        sample_count: values.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genmap::build_generating_map;
    use crate::geometry::Similarity;
    use crate::ifs::{build_instance_systems, Address};
    use crate::params::check_direct_params;

    fn w1() -> ConstructionInstance {
        let check = check_direct_params(2, 2.1, 0.1, 3, 4, 0.27).unwrap();
        build_instance_systems(&check.params).unwrap()
    }

    #[test]
    fn segment_has_dimension_one() {
        let rng = CounterRng::new(SEED, 0x11);
        let cloud: Vec<Vec<f64>> = (0..10_000)
            .map(|i| vec![rng.f64_at(i), 0.25])
            .collect();
        let scales: Vec<f64> = (3..=9).map(|k| 0.5f64.powi(k)).collect();
        let est = box_counting_dimension(&cloud, &scales).unwrap();
        assert!(
            est.value > 0.95 && est.value < 1.05,
            "segment dimension {}",
            est.value
        );
    }

    #[test]
    fn middle_thirds_cantor_dimension() {
        // Depth-10 enumeration of the middle-thirds Cantor set (cylinder
        // midpoints, so no sample sits on a counting-grid line); the Moran
        // oracle 2 (1/3)^s = 1 gives s = ln 2 / ln 3 = 0.63093.
        let mut points: Vec<Vec<f64>> = vec![vec![0.5]];
        for _ in 0..10 {
            let mut next = Vec::with_capacity(points.len() * 2);
            for p in &points {
                next.push(vec![p[0] / 3.0]);
                next.push(vec![p[0] / 3.0 + 2.0 / 3.0]);
            }
            points = next;
        }
        let scales: Vec<f64> = (2..=8).map(|k| 3.0f64.powi(-k)).collect();
        let est = box_counting_dimension(&points, &scales).unwrap();
        assert!(
            est.value > 0.60 && est.value < 0.66,
            "cantor dimension {}",
            est.value
        );
    }

    #[test]
    fn degenerate_fit_single_point() {
        let cloud = vec![vec![0.5, 0.5]; 10];
        let scales = [0.1, 0.05, 0.025];
        let err = box_counting_dimension(&cloud, &scales).unwrap_err();
        assert!(matches!(err, Error::DegenerateFit(_)));
    }

    #[test]
    fn cylinder_exact_dimension_w1() {
        let inst = w1();
        let est = cylinder_dimension_fiber(&inst);
        assert!((est.value - 1.0587787998376783).abs() < 1e-12);
        // The box-count regression on the exact cover profile reproduces
        // the exact value.
        let (slope, _) = fit_log_slope(&est.per_scale_counts).unwrap();
        assert!((slope - est.value).abs() < 1e-12);
    }

    #[test]
    fn degenerate_single_branch_dimension() {
        let check = check_direct_params(2, 3.0, 0.1, 1, 1, 0.4).unwrap();
        let inst = build_instance_systems(&check.params).unwrap();
        assert_eq!(cylinder_dimension_fiber(&inst).value, 0.0);
    }

    #[test]
    fn box_count_matches_cylinder_dimension_on_fiber_cloud() {
        let inst = w1();
        let fiber = crate::elevator::FiberSpec::new(Address::periodic(vec![1], 1));
        let cloud = crate::elevator::fiber_image_cloud(&inst, &fiber, 8).unwrap();
        let scales: Vec<f64> = (1..=7).map(|k| 0.27f64.powi(k)).collect();
        let est = box_counting_dimension(&cloud, &scales).unwrap();
        assert!(
            (est.value - 1.0587787998376783).abs() < 0.05,
            "box-count {} vs exact 1.05878",
            est.value
        );
    }

    #[test]
    fn scale_equivariance() {
        let rng = CounterRng::new(SEED, 0x33);
        let cloud: Vec<Vec<f64>> = (0..2000)
            .map(|i| vec![rng.f64_at(2 * i), rng.f64_at(2 * i + 1)])
            .collect();
        let scales: Vec<f64> = (2..=6).map(|k| 0.5f64.powi(k)).collect();
        let est = box_counting_dimension(&cloud, &scales).unwrap();
        let factor = 4.0;
        let scaled_cloud: Vec<Vec<f64>> = cloud
            .iter()
            .map(|p| p.iter().map(|x| x * factor).collect())
            .collect();
        let scaled_scales: Vec<f64> = scales.iter().map(|s| s * factor).collect();
        let est2 = box_counting_dimension(&scaled_cloud, &scaled_scales).unwrap();
        assert!((est.value - est2.value).abs() < 1e-12);
    }

    #[test]
    fn similarity_has_unit_ratios() {
        let s = Similarity {
            scale: 0.37,
            rot: crate::geometry::SignedPermutation::new(vec![1, 0], vec![-1, 1]).unwrap(),
            shift: vec![0.2, -0.7],
        };
        let points: Vec<Vec<f64>> = vec![vec![0.1, 0.4], vec![-1.0, 2.0], vec![3.0, 3.0]];
        let stats = qc_ratio_sample(
            |x| Some(s.apply(x)),
            &points,
            &[1e-2, 1e-3],
            None,
        );
        assert_eq!(stats.samples.len(), 6);
        for sample in &stats.samples {
            assert!((sample.ratio - 1.0).abs() < 1e-9, "ratio {}", sample.ratio);
        }
    }

    #[test]
    fn singular_values_of_diagonal() {
        let a = vec![vec![3.0, 0.0], vec![0.0, 0.5]];
        let sv = singular_values(&a);
        assert!((sv[0] - 3.0).abs() < 1e-12 && (sv[1] - 0.5).abs() < 1e-12);
        assert!((conditioning(&a) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn w1_energy_report() {
        let inst = w1();
        let gm = build_generating_map(&inst).unwrap();
        let report = sobolev_energy(&inst, Some(&gm), 4_000).unwrap();
        assert!((report.q - 0.96615131825714796).abs() < 1e-9);
        let c = report.shell_energy.unwrap();
        assert!(c.is_finite() && c > 0.0);
        let total = report.total_bound.unwrap();
        assert!((total - c / (1.0 - report.q)).abs() < 1e-9 * total);
    }

    #[test]
    fn paper_mode_reports_q_only() {
        use crate::params::{derive_paper_params, TheoremInputs};
        let params = derive_paper_params(&TheoremInputs {
            n: 2,
            p: 3.0,
            alpha: 1.2,
            beta: 0.4,
        })
        .unwrap();
        let inst = build_instance_systems(&params).unwrap();
        let report = sobolev_energy(&inst, None, 1000).unwrap();
        assert!((report.q - 0.13627414249770667).abs() < 1e-9);
        assert!(report.shell_energy.is_none());
    }

    #[test]
    fn perturbed_exponent_diverges() {
        // W1 geometry with p raised to 2.2: q = 0.12 · 2.7^2.2 > 1.
        let check = check_direct_params(2, 2.2, 0.1, 3, 4, 0.27);
        match check {
            Err(Error::InfeasibleParams(msg)) => assert!(msg.contains("q < 1"), "{msg}"),
            other => panic!("expected q >= 1 rejection, got {other:?}"),
        }
        // The energy estimator raises DivergentSeries for a q >= 1 instance
        // assembled directly.
        let mut inst = w1();
        inst.params.p = 2.2;
        inst.params.q = 12.0 * 2.7f64.powf(2.2) * 0.01;
        let err = sobolev_energy(&inst, None, 100).unwrap_err();
        assert!(matches!(err, Error::DivergentSeries { .. }));
    }

    #[test]
    fn monte_carlo_converges_at_sqrt_n() {
        let inst = w1();
        let gm = build_generating_map(&inst).unwrap();
        let r1 = sobolev_energy(&inst, Some(&gm), 40_000).unwrap();
        let r2 = sobolev_energy(&inst, Some(&gm), 80_000).unwrap();
        let ratio = r2.halfwidth.unwrap() / r1.halfwidth.unwrap();
        assert!(
            (0.6..=0.85).contains(&ratio),
            "halfwidth ratio per doubling {ratio}"
        );
    }
}
