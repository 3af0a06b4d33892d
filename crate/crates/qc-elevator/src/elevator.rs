//! The generated mapping: symbolic evaluation on cylinders and invariant
//! sets (any magnitude), geometric evaluation through the generating map,
//! fiber-image sampling, and the analytic dilatation bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genmap::{GeneratingMap, PhiEvaluator};
use crate::geometry::{DiagAffine, Similarity};
use crate::ifs::{Address, ConstructionInstance};

/// Default cylinder descent depth for direct-mode instances: t^12 resolves
/// clouds well below plotting resolution.
pub const DEFAULT_DEPTH_LIMIT: usize = 12;

/// Enumeration budget for fiber clouds.
pub const FIBER_BUDGET: u128 = 10_000_000;

/// A fiber of the vertical foliation, specified by a base address (finite
/// seed, optionally periodic): periodic seeds are dense in the base Cantor
/// set and every base point behaves identically in all computed quantities.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiberSpec {
    #[serde(rename = "baseAddress")]
    pub base_address: Address,
}

impl FiberSpec {
    pub fn new(base_address: Address) -> Self {
        FiberSpec { base_address }
    }

    /// Validate all seed symbols against the base branch count.
    pub fn validate(&self, instance: &ConstructionInstance) -> Result<()> {
        let count = instance.base().count;
        for &s in &self.base_address.symbols {
            if s < 1 || s as u128 > count {
                return Err(Error::BadAddress { symbol: s, count });
            }
        }
        Ok(())
    }
}

/// The proof's analytic dilatation bound on the invariant set:
/// 2 diam S / (t^{1+kappa} rho_tar), with kappa minimal such that
/// d^{kappa-1} < rho_dom / (2 diam Q).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticBound {
    #[serde(rename = "rhoDom")]
    pub rho_dom: f64,
    #[serde(rename = "rhoTar")]
    pub rho_tar: f64,
    pub kappa: u32,
    pub bound: f64,
}

/// Compute the analytic quasiconformality bound from the separation
/// certificates.
pub fn analytic_qc_bound(instance: &ConstructionInstance) -> AnalyticBound {
    let rho_dom = instance.cert_dom.rho;
    let rho_tar = instance.cert_tar.rho;
    let d = instance.product.ratio();
    let t = instance.target.r;
    let diam_q = instance.domain().diameter();
    let diam_s = instance.target_box().diameter();
    let threshold = rho_dom / (2.0 * diam_q);
    let mut kappa = 1u32;
    while !(d.powi(kappa as i32 - 1) < threshold) && kappa < 10_000 {
        kappa += 1;
    }
    let bound = 2.0 * diam_s / (t.powi(1 + kappa as i32) * rho_tar);
    AnalyticBound {
        rho_dom,
        rho_tar,
        kappa,
        bound,
    }
}

/// Evaluate the generated mapping at x.
///
/// Outside the closed domain box the map is the exterior affine exactly.
/// Inside, descend the cylinder tree: if x sits in the fundamental shell of
/// some level-j cylinder, conjugate the generating map into it; if the
/// descent reaches `depth_limit` (x is within d^depth of the invariant
/// set), resolve by address with the explicit nesting error bound
/// t^depth · diam S.
pub fn evaluate_phi_global(
    instance: &ConstructionInstance,
    gm: Option<&GeneratingMap>,
    x: &[f64],
    depth_limit: usize,
) -> Result<(Vec<f64>, f64)> {
    let domain = instance.domain();
    let exterior = DiagAffine::box_map(&domain, instance.target_box());
    if !domain.contains_point(x, 0.0) {
        return Ok((exterior.apply(x), 0.0));
    }
    let n = instance.n();
    let mut cur = x.to_vec();
    let mut g_acc = Similarity::identity(n);
    for _level in 0..depth_limit {
        match locate_strict_hole(instance, &cur) {
            Some((i, j)) => {
                let h = instance.product.map(i, j);
                cur = h.inverse().apply(&cur);
                g_acc = g_acc.compose(&instance.target_map(i, j));
            }
            None => {
                // Fundamental shell at this level: apply the generating map.
                let gm = gm.ok_or(Error::NeedsGeneratingMap)?;
                let mut evaluator = PhiEvaluator::new(gm);
                let y = evaluator.eval(&cur)?;
                return Ok((g_acc.apply(&y), 0.0));
            }
        }
    }
    // Deep inside: address-based resolution at the depth limit.
    let center = instance.target_box().center();
    let point = g_acc.apply(&center);
    let bound = instance.target.r.powi(depth_limit as i32) * instance.target_box().diameter();
    Ok((point, bound))
}

/// Which open product hole strictly contains x (0-based), if any.
fn locate_strict_hole(instance: &ConstructionInstance, x: &[f64]) -> Option<(u128, u128)> {
    let (i, j) = instance.product.locate_pair(x, 0.0)?;
    let (i, j) = (i as u128 - 1, j as u128 - 1);
    let b = instance.product.image_box(i, j);
    let pad = 1e-13 * b.diameter();
    if b.contains_point_strict(x, pad) {
        Some((i, j))
    } else {
        None
    }
}

/// Enumerate the depth-k fiber-image cloud: one point per fiber word tau,
/// namely g_{(sigma|_k, tau)}(center of S). Exactly Mprime^depth points,
/// each within t^depth · diam S of the true fiber-image Cantor set.
pub fn fiber_image_cloud(
    instance: &ConstructionInstance,
    fiber: &FiberSpec,
    depth: usize,
) -> Result<Vec<Vec<f64>>> {
    fiber.validate(instance)?;
    let mprime = instance.fiber().count;
    let total = mprime.checked_pow(depth as u32).ok_or_else(|| {
        Error::BudgetExceeded(format!("Mprime^{depth} overflows the enumeration budget"))
    })?;
    if total > FIBER_BUDGET {
        return Err(Error::BudgetExceeded(format!(
            "fiber cloud needs {total} points, budget is {FIBER_BUDGET}"
        )));
    }
    let sigma = fiber.base_address.prefix(depth)?;
    let center = instance.target_box().center();
    let mut cloud = Vec::with_capacity(total as usize);
    recurse_cloud(
        instance,
        &sigma,
        0,
        depth,
        &Similarity::identity(instance.n()),
        &center,
        &mut cloud,
    );
    Ok(cloud)
}

/// Depth-first enumeration in lexicographic fiber-word order.
fn recurse_cloud(
    instance: &ConstructionInstance,
    sigma: &[u64],
    level: usize,
    depth: usize,
    acc: &Similarity,
    center: &[f64],
    cloud: &mut Vec<Vec<f64>>,
) {
    if level == depth {
        cloud.push(acc.apply(center));
        return;
    }
    let i = sigma[level] as u128 - 1;
    for j in 0..instance.fiber().count {
        let next = acc.compose(&instance.target_map(i, j));
        recurse_cloud(instance, sigma, level + 1, depth, &next, center, cloud);
    }
}

/// Write a point cloud as CSV with header x1,...,xn.
pub fn cloud_to_csv(cloud: &[Vec<f64>]) -> String {
    let n = cloud.first().map_or(0, |p| p.len());
    let header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    let mut out = header.join(",");
    out.push('\n');
    for p in cloud {
        let row: Vec<String> = p.iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
