//! Move planning: turn a construction instance into an ordered script of
//! validated moves realizing the generating map.
//!
//! Every hole pipeline is shrink -> corridor legs -> twist(s) -> grow. The
//! T-images of the domain holes and the target boxes overlap in general, so
//! holes whose resting position obstructs someone else's target are first
//! shrunk and parked in the free strip below both layouts (the strip exists
//! because both layouts keep positive margins to the ambient boundary on
//! every axis). Corridors are found by shortest-path search over the
//! free-space arrangement grid, with lexicographic tie-breaking so the plan
//! is deterministic.

use crate::error::{Error, Result};
use crate::geometry::{AffineMap, AxisBox, DiagAffine, SignedPermutation};
use crate::ifs::{ConstructionInstance, DESK_SCALE_COUNT};

use super::twist::{build_twist, factor_rotation};
use super::{build_frame_remap, GeneratingMap, Move, MoveKind};

/// Epsilon retry floor relative to the minimum free gap.
const EPS_FLOOR_REL: f64 = 1e-4;
/// Cap on arrangement-grid cells per routing query.
const MAX_GRID_CELLS: usize = 2_000_000;

fn cube(center: &[f64], side: f64) -> AxisBox {
    AxisBox {
        lo: center.iter().map(|c| c - 0.5 * side).collect(),
        hi: center.iter().map(|c| c + 0.5 * side).collect(),
    }
}

/// Distance from a box to every other current box and to the complement of
/// the ambient box.
fn clearance(of: &AxisBox, ambient: &AxisBox, others: &[AxisBox], skip: usize) -> f64 {
    let mut c = ambient.margin_to_boundary(of);
    for (j, b) in others.iter().enumerate() {
        if j != skip {
            c = c.min(of.distance(b));
        }
    }
    c
}

/// The instance-wide twist rotation: the signed-permutation part of the
/// boundary prescription g_k . T . h_k^{-1} . T^{-1}, which is the target
/// rotation composed with the inverse product rotation (diagonal conjugation
/// does not change the permutation or signs).
pub fn instance_rotation(instance: &ConstructionInstance) -> SignedPermutation {
    let n = instance.n();
    let base_rot = &instance.product.base.base_map.rot;
    let mut perm = base_rot.perm.clone();
    perm.push(n - 1);
    let mut signs = base_rot.signs.clone();
    signs.push(1);
    let product_rot = SignedPermutation { perm, signs };
    instance
        .target
        .base_map
        .rot
        .compose(&product_rot.inverse())
}

struct PlanContext<'a> {
    instance: &'a ConstructionInstance,
    ambient: AxisBox,
    initial: Vec<AxisBox>,
    targets: Vec<AxisBox>,
    turns: Vec<super::twist::PlanarTurn>,
    min_gap: f64,
}

pub fn plan_moves(instance: &ConstructionInstance) -> Result<GeneratingMap> {
    let n = instance.n();
    let count = instance.product.count();
    if count > DESK_SCALE_COUNT {
        return Err(Error::PlanningFailure(format!(
            "instance has {count} holes; explicit generating maps are only \
             planned below {DESK_SCALE_COUNT} (paper-mode magnitudes stay symbolic)"
        )));
    }
    let count = count as usize;
    let domain = instance.domain();
    let ambient = instance.target_box().clone();
    let exterior = DiagAffine::box_map(&domain, &ambient);

    let mut initial = Vec::with_capacity(count);
    let mut targets = Vec::with_capacity(count);
    let mut prescribed = Vec::with_capacity(count);
    let ext_affine = AffineMap::from_diag(&exterior);
    for k in 0..count {
        let (i, j) = instance.product.flat_to_pair(k as u128);
        let h = instance.product.map(i, j);
        let g = instance.target.map(k as u128);
        initial.push(exterior.apply_box(&h.apply_box(&domain)));
        targets.push(g.apply_box(instance.target_box()));
        let alpha = AffineMap::from_similarity(&g)
            .compose(&ext_affine)
            .compose(&AffineMap::from_similarity(&h.inverse()));
        prescribed.push(alpha);
    }

    let rotation = instance_rotation(instance);
    let turns = factor_rotation(&rotation)?;

    // Minimum free gap over both layouts: pairwise gaps and boundary
    // margins, the scale everything else hangs off.
    let mut min_gap = f64::INFINITY;
    for boxes in [&initial, &targets] {
        for (k, b) in boxes.iter().enumerate() {
            min_gap = min_gap.min(ambient.margin_to_boundary(b));
            for other in boxes.iter().skip(k + 1) {
                min_gap = min_gap.min(b.distance(other));
            }
        }
    }
    // The traveling cube must also fit inside every hole and every target.
    let mut min_extent = f64::INFINITY;
    for boxes in [&initial, &targets] {
        for b in boxes.iter() {
            for a in 0..n {
                min_extent = min_extent.min(b.extent(a));
            }
        }
    }
    if !(min_gap > 0.0) {
        return Err(Error::PlanningFailure(format!(
            "layouts have no free gap (min gap {min_gap})"
        )));
    }

    let ctx = PlanContext {
        instance,
        ambient,
        initial,
        targets,
        turns,
        min_gap,
    };

    let mut eps = (0.1 * min_gap).min(0.4 * min_extent);
    let eps_floor = EPS_FLOOR_REL * min_gap;
    let mut last_err: Option<Error> = None;
    while eps >= eps_floor {
        match plan_attempt(&ctx, eps) {
            Ok(script) => {
                return Ok(GeneratingMap {
                    exterior,
                    script,
                    prescribed_hole_maps: prescribed,
                });
            }
            Err(e @ Error::PlanningFailure(_)) => {
                last_err = Some(e);
                eps *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or_else(|| {
        Error::PlanningFailure(format!(
            "no epsilon above {eps_floor} admits a corridor plan"
        ))
    }))
}

fn plan_attempt(ctx: &PlanContext, eps: f64) -> Result<Vec<Move>> {
    let n = ctx.ambient.dim();
    let count = ctx.initial.len();
    let strip_axis = n - 1;

    // Free strip below both layouts along the last axis.
    let mut strip_top = f64::INFINITY;
    for boxes in [&ctx.initial, &ctx.targets] {
        for b in boxes.iter() {
            strip_top = strip_top.min(b.lo[strip_axis]);
        }
    }
    let strip_h = strip_top - ctx.ambient.lo[strip_axis];
    if !(strip_h > 3.0 * eps) {
        return Err(Error::PlanningFailure(format!(
            "staging strip height {strip_h} too small for cube size {eps}"
        )));
    }
    let strip_mid = ctx.ambient.lo[strip_axis] + 0.5 * strip_h;

    // Holes whose resting box obstructs someone else's inflated target get
    // parked first.
    let grow_margin = 0.45 * ctx.min_gap + 2.0 * eps;
    let mut parked = vec![false; count];
    for j in 0..count {
        for k in 0..count {
            if k != j && ctx.initial[j].intersects(&ctx.targets[k].inflate(grow_margin)) {
                parked[j] = true;
                break;
            }
        }
    }
    let park_pos: Vec<Vec<f64>> = (0..count)
        .map(|k| {
            let mut p = ctx.targets[k].center();
            p[strip_axis] = strip_mid;
            p
        })
        .collect();
    // Parked cubes must be pairwise clear.
    for j in 0..count {
        for k in j + 1..count {
            if parked[j] && parked[k] {
                let d: f64 = (0..n)
                    .map(|a| (park_pos[j][a] - park_pos[k][a]).abs())
                    .fold(0.0, f64::max);
                if d < 3.0 * eps {
                    return Err(Error::PlanningFailure(format!(
                        "park positions for holes {j} and {k} collide"
                    )));
                }
            }
        }
    }

    let mut current: Vec<AxisBox> = ctx.initial.clone();
    let mut script: Vec<Move> = Vec::new();

    let shrink = |script: &mut Vec<Move>, current: &[AxisBox], k: usize| -> Result<AxisBox> {
        let c = clearance(&current[k], &ctx.ambient, current, k);
        if !(c > 0.0) {
            return Err(Error::PlanningFailure(format!(
                "hole {k} has no clearance to shrink"
            )));
        }
        let support = current[k].inflate(0.45 * c);
        let small = cube(&current[k].center(), eps);
        let mv = build_frame_remap(&support, &current[k], &small, MoveKind::FrameRemap, Some(k))?;
        script.push(mv);
        Ok(small)
    };

    let route = |script: &mut Vec<Move>,
                 current: &[AxisBox],
                 k: usize,
                 from: &[f64],
                 to: &[f64]|
     -> Result<()> {
        let obstacles: Vec<AxisBox> = current
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .map(|(_, b)| b.clone())
            .collect();
        let waypoints = find_path(&ctx.ambient, &obstacles, from, to, eps)?;
        let snap = 1e-12 * ctx.ambient.diameter();
        for leg in waypoints.windows(2) {
            let (p, q) = (&leg[0], &leg[1]);
            if p.iter().zip(q).all(|(a, b)| (a - b).abs() <= snap) {
                continue;
            }
            let a = cube(p, eps);
            let b = cube(q, eps);
            let support = a.hull(&b).inflate(0.5 * eps);
            let mv = build_frame_remap(&support, &a, &b, MoveKind::CorridorTranslate, Some(k))?;
            script.push(mv);
        }
        Ok(())
    };

    // Parking pass.
    for j in 0..count {
        if !parked[j] {
            continue;
        }
        let start = current[j].center();
        let small = shrink(&mut script, &current, j)?;
        current[j] = small;
        route(&mut script, &current, j, &start, &park_pos[j])?;
        current[j] = cube(&park_pos[j], eps);
    }

    // Placement pass, in bijection order.
    for k in 0..count {
        let start = if parked[k] {
            park_pos[k].clone()
        } else {
            let c = current[k].center();
            let small = shrink(&mut script, &current, k)?;
            current[k] = small;
            c
        };
        let goal = ctx.targets[k].center();
        route(&mut script, &current, k, &start, &goal)?;
        current[k] = cube(&goal, eps);

        // Twists about the goal center, inside the target box.
        let min_ext = (0..n)
            .map(|a| ctx.targets[k].extent(a))
            .fold(f64::INFINITY, f64::min);
        let t_half = 0.45 * min_ext;
        if t_half <= eps {
            return Err(Error::PlanningFailure(format!(
                "target {k} too small to host the twist (half {t_half} vs cube {eps})"
            )));
        }
        for turn in &ctx.turns {
            let support = cube(&goal, 2.0 * t_half);
            let rho = turn.to_signed_permutation(n);
            let mv = build_twist(&support, &current[k], &rho, 4, Some(k))?;
            script.push(mv);
        }

        // Grow to the target box.
        let c = clearance(&ctx.targets[k], &ctx.ambient, &current, k);
        if !(c > 0.0) {
            return Err(Error::PlanningFailure(format!(
                "target {k} obstructed at grow time"
            )));
        }
        let support = ctx.targets[k].inflate(0.45 * c);
        let mv = build_frame_remap(
            &support,
            &current[k],
            &ctx.targets[k],
            MoveKind::FrameRemap,
            Some(k),
        )?;
        script.push(mv);
        current[k] = ctx.targets[k].clone();
    }
    let _ = ctx.instance;
    Ok(script)
}

/// Axis-aligned shortest path from `from` to `to` through the free-space
/// arrangement grid: obstacles inflated by 1.25 eps (cube half-width plus
/// corridor support margin plus slack), ambient deflated likewise. Returns
/// waypoints (including endpoints); consecutive waypoints differ on one
/// axis.
fn find_path(
    ambient: &AxisBox,
    obstacles: &[AxisBox],
    from: &[f64],
    to: &[f64],
    eps: f64,
) -> Result<Vec<Vec<f64>>> {
    let n = ambient.dim();
    let snap = 1e-12 * ambient.diameter();
    if from.iter().zip(to).all(|(a, b)| (a - b).abs() <= snap) {
        return Ok(vec![from.to_vec(), to.to_vec()]);
    }
    let inflation = 1.25 * eps;
    let bounds = AxisBox {
        lo: ambient.lo.iter().map(|l| l + inflation).collect(),
        hi: ambient.hi.iter().map(|h| h - inflation).collect(),
    };
    for (name, p) in [("start", from), ("goal", to)] {
        if !bounds.contains_point(p, 0.0) {
            return Err(Error::PlanningFailure(format!(
                "{name} {p:?} outside deflated ambient bounds"
            )));
        }
    }
    let blocks: Vec<AxisBox> = obstacles.iter().map(|b| b.inflate(inflation)).collect();

    // Arrangement coordinates per axis.
    let mut coords: Vec<Vec<f64>> = Vec::with_capacity(n);
    for a in 0..n {
        let mut cs = vec![bounds.lo[a], bounds.hi[a], from[a], to[a]];
        for b in &blocks {
            if b.lo[a] > bounds.lo[a] && b.lo[a] < bounds.hi[a] {
                cs.push(b.lo[a]);
            }
            if b.hi[a] > bounds.lo[a] && b.hi[a] < bounds.hi[a] {
                cs.push(b.hi[a]);
            }
        }
        cs.sort_by(f64::total_cmp);
        cs.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * ambient.extent(a).max(1.0));
        coords.push(cs);
    }
    let dims: Vec<usize> = coords.iter().map(|c| c.len() - 1).collect();
    let total: usize = dims.iter().product();
    if total == 0 {
        return Err(Error::PlanningFailure("empty arrangement grid".into()));
    }
    if total > MAX_GRID_CELLS {
        return Err(Error::PlanningFailure(format!(
            "arrangement grid has {total} cells, above the {MAX_GRID_CELLS} cap"
        )));
    }

    let cell_center = |idx: &[usize]| -> Vec<f64> {
        (0..n)
            .map(|a| 0.5 * (coords[a][idx[a]] + coords[a][idx[a] + 1]))
            .collect()
    };
    let flat = |idx: &[usize]| -> usize {
        let mut f = 0;
        for a in 0..n {
            f = f * dims[a] + idx[a];
        }
        f
    };
    let unflat = |mut f: usize| -> Vec<usize> {
        let mut idx = vec![0usize; n];
        for a in (0..n).rev() {
            idx[a] = f % dims[a];
            f /= dims[a];
        }
        idx
    };
    let free = |idx: &[usize]| -> bool {
        let c = cell_center(idx);
        !blocks.iter().any(|b| b.contains_point_strict(&c, 0.0))
    };
    let locate = |p: &[f64]| -> Vec<usize> {
        (0..n)
            .map(|a| {
                let cs = &coords[a];
                let mut i = match cs.binary_search_by(|x| x.total_cmp(&p[a])) {
                    Ok(i) => i,
                    Err(i) => i.saturating_sub(1),
                };
                if i >= cs.len() - 1 {
                    i = cs.len() - 2;
                }
                i
            })
            .collect()
    };

    let start_idx = locate(from);
    let goal_idx = locate(to);
    for (name, idx) in [("start", &start_idx), ("goal", &goal_idx)] {
        if !free(idx) {
            return Err(Error::PlanningFailure(format!(
                "{name} cell is blocked at eps {eps}"
            )));
        }
    }
    let start = flat(&start_idx);
    let goal = flat(&goal_idx);

    // Dijkstra over free cells; cost = L1 distance between cell centers,
    // deterministic tie-break on (cost bits, node index).
    let mut dist = vec![f64::INFINITY; total];
    let mut prev = vec![usize::MAX; total];
    let mut heap = std::collections::BinaryHeap::new();
    dist[start] = 0.0;
    heap.push(std::cmp::Reverse((0u64, start)));
    while let Some(std::cmp::Reverse((dbits, node))) = heap.pop() {
        let d = f64::from_bits(dbits);
        if d > dist[node] {
            continue;
        }
        if node == goal {
            break;
        }
        let idx = unflat(node);
        let center = cell_center(&idx);
        for a in 0..n {
            for step in [-1isize, 1] {
                let ni = idx[a] as isize + step;
                if ni < 0 || ni as usize >= dims[a] {
                    continue;
                }
                let mut nidx = idx.clone();
                nidx[a] = ni as usize;
                if !free(&nidx) {
                    continue;
                }
                let ncenter = cell_center(&nidx);
                let nd = d + (ncenter[a] - center[a]).abs();
                let nnode = flat(&nidx);
                if nd < dist[nnode] {
                    dist[nnode] = nd;
                    prev[nnode] = node;
                    heap.push(std::cmp::Reverse((nd.to_bits(), nnode)));
                }
            }
        }
    }
    if !dist[goal].is_finite() {
        return Err(Error::PlanningFailure(format!(
            "no corridor between {from:?} and {to:?} at eps {eps}"
        )));
    }

    // Reconstruct the cell chain.
    let mut chain = vec![goal];
    let mut node = goal;
    while node != start {
        node = prev[node];
        chain.push(node);
    }
    chain.reverse();

    // Waypoints: staircase into the first cell center, cell centers, then a
    // staircase out to the goal point. Consecutive same-axis legs merge.
    let mut raw: Vec<Vec<f64>> = Vec::new();
    raw.push(from.to_vec());
    let first_center = cell_center(&unflat(start));
    push_staircase(&mut raw, &first_center);
    for &c in chain.iter().skip(1) {
        let cc = cell_center(&unflat(c));
        raw.push(cc);
    }
    push_staircase(&mut raw, to);
    Ok(merge_collinear(raw))
}

/// Append axis-by-axis staircase waypoints from the last waypoint to `to`.
fn push_staircase(raw: &mut Vec<Vec<f64>>, to: &[f64]) {
    let n = to.len();
    let mut cur = raw.last().unwrap().clone();
    for a in 0..n {
        if cur[a] != to[a] {
            cur[a] = to[a];
            raw.push(cur.clone());
        }
    }
}

/// Drop zero legs and merge consecutive legs along the same axis.
fn merge_collinear(raw: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(raw.len());
    let mut last_axis = usize::MAX;
    for p in raw {
        match out.last() {
            None => out.push(p),
            Some(q) => {
                let diffs: Vec<usize> = (0..p.len()).filter(|&a| p[a] != q[a]).collect();
                if diffs.is_empty() {
                    continue;
                }
                debug_assert_eq!(diffs.len(), 1, "waypoints must be axis-aligned");
                let axis = diffs[0];
                if axis == last_axis {
                    *out.last_mut().unwrap() = p;
                } else {
                    out.push(p);
                    last_axis = axis;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::check_direct_params;

    fn w1() -> ConstructionInstance {
        let check = check_direct_params(2, 2.1, 0.1, 3, 4, 0.27).unwrap();
        crate::ifs::build_instance_systems(&check.params).unwrap()
    }

    #[test]
    fn w1_rotation_is_single_quarter_turn() {
        let inst = w1();
        let rot = instance_rotation(&inst);
        let turns = factor_rotation(&rot).unwrap();
        assert_eq!(turns.len(), 1);
        assert_eq!(turns[0].quarters, 1);
    }

    #[test]
    fn w1_plan_builds_and_is_deterministic() {
        let inst = w1();
        let gm1 = plan_moves(&inst).unwrap();
        let gm2 = plan_moves(&inst).unwrap();
        assert_eq!(gm1.script.len(), gm2.script.len());
        assert!(!gm1.script.is_empty());
        let s1 = serde_json::to_string(&gm1).unwrap();
        let s2 = serde_json::to_string(&gm2).unwrap();
        assert_eq!(s1, s2);
        // 12 hole pipelines, each with one shrink, one grow, one twist and
        // a bounded number of corridor legs.
        let twists = gm1
            .script
            .iter()
            .filter(|m| matches!(m.kind, MoveKind::Twist))
            .count();
        assert_eq!(twists, 12);
        for k in 0..12 {
            let legs = gm1
                .script
                .iter()
                .filter(|m| m.hole == Some(k) && matches!(m.kind, MoveKind::CorridorTranslate))
                .count();
            assert!(legs <= 40, "hole {k} uses {legs} corridor legs");
        }
    }

    #[test]
    fn single_hole_plan_is_short() {
        let check = check_direct_params(2, 3.0, 0.1, 1, 1, 0.4).unwrap();
        let inst = crate::ifs::build_instance_systems(&check.params).unwrap();
        let gm = plan_moves(&inst).unwrap();
        // One shrink, a couple of corridor legs at most, one twist, one grow.
        let kinds: Vec<_> = gm.script.iter().map(|m| m.kind).collect();
        assert!(kinds.len() <= 6, "{kinds:?}");
        assert!(matches!(kinds[0], MoveKind::FrameRemap));
        assert!(matches!(kinds[kinds.len() - 1], MoveKind::FrameRemap));
        assert_eq!(
            gm.script
                .iter()
                .filter(|m| matches!(m.kind, MoveKind::Twist))
                .count(),
            1
        );
    }

    #[test]
    fn paper_magnitude_is_rejected_at_plan_time() {
        use crate::params::{derive_paper_params, TheoremInputs};
        let params = derive_paper_params(&TheoremInputs {
            n: 2,
            p: 3.0,
            alpha: 1.2,
            beta: 0.4,
        })
        .unwrap();
        let inst = crate::ifs::build_instance_systems(&params).unwrap();
        let err = plan_moves(&inst).unwrap_err();
        match err {
            Error::PlanningFailure(msg) => assert!(msg.contains("symbolic"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
