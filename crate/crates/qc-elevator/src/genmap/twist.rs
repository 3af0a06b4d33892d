//! Twist moves: PL realizations of a planar quarter or half turn of an
//! inner box relative to a fixed support boundary.
//!
//! The frame between the inner box and the support is split into nested
//! layers interpolating from one to the other. Each layer boundary carries
//! a rotation amplitude shrinking linearly from the full turn at the inner
//! box to zero at the support, realized as an arclength shift along the
//! layer's in-plane rectangle boundary. Layer surfaces are meshed with
//! vertices at the rectangle corners and at the walk preimages of corners,
//! matched across consecutive layers by normalized boundary parameter, so
//! vertex images always stay on their layer boundary path. Shells between
//! consecutive layers are prisms over the matched surface meshes. The layer
//! count doubles until validation passes (or 16 is reached and the move is
//! rejected, which happens for frames too thin to absorb the turn).
//!
//! Supported dimensions: the rotation plane plus at most one complementary
//! axis (n = 2 or 3). Complementary caps are meshed as fans about the
//! rotation-fixed center.

use crate::error::{Error, Result};
use crate::geometry::{simplex_orientation, AffinePiece, AxisBox, Orientation, SignedPermutation};

use super::{Move, MoveKind};
use crate::genmap::cells::frusta_cells;

/// A single planar rotation: `quarters` counterclockwise quarter turns in
/// the (axis_a, axis_b) coordinate plane (1, 2, or -1).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlanarTurn {
    pub axis_a: usize,
    pub axis_b: usize,
    pub quarters: i8,
}

impl PlanarTurn {
    pub fn to_signed_permutation(&self, n: usize) -> SignedPermutation {
        let mut perm: Vec<usize> = (0..n).collect();
        let mut signs = vec![1i8; n];
        let (a, b) = (self.axis_a, self.axis_b);
        match self.quarters {
            1 => {
                // (x_a, x_b) -> (-x_b, x_a)
                perm[a] = b;
                signs[a] = -1;
                perm[b] = a;
            }
            -1 => {
                // (x_a, x_b) -> (x_b, -x_a)
                perm[a] = b;
                perm[b] = a;
                signs[b] = -1;
            }
            2 => {
                signs[a] = -1;
                signs[b] = -1;
            }
            _ => unreachable!("quarters must be 1, -1 or 2"),
        }
        SignedPermutation { perm, signs }
    }
}

/// Decompose an orientation-preserving signed permutation into planar
/// turns; applying the turns in order (first entry first) composes to
/// `rho`.
pub fn factor_rotation(rho: &SignedPermutation) -> Result<Vec<PlanarTurn>> {
    if rho.determinant() != 1 {
        return Err(Error::Format(
            "rotation factorization requires determinant +1".into(),
        ));
    }
    let n = rho.dim();
    let mut turns = Vec::new();
    let mut cur = rho.clone();
    // Peel off quarter turns until the permutation part is the identity.
    loop {
        let Some(a) = (0..n).find(|&i| cur.perm[i] != i) else {
            break;
        };
        let b = cur.perm[a];
        let turn = PlanarTurn {
            axis_a: a,
            axis_b: b,
            quarters: 1,
        };
        let q = turn.to_signed_permutation(n);
        turns.push(turn);
        cur = cur.compose(&q.inverse());
    }
    // cur is now diagonal with +-1 entries and determinant +1: pair the
    // -1 signs into half turns.
    loop {
        let negs: Vec<usize> = (0..n).filter(|&i| cur.signs[i] == -1).collect();
        if negs.is_empty() {
            break;
        }
        debug_assert!(negs.len() >= 2);
        let h = PlanarTurn {
            axis_a: negs[0],
            axis_b: negs[1],
            quarters: 2,
        };
        turns.push(h);
        cur = cur.compose(&h.to_signed_permutation(n).inverse());
    }
    // The peeling maintains rho = cur o q_last o ... o q_0, so the emitted
    // order is already script order (first turn applies first).
    Ok(turns)
}

/// Identify the planar turn represented by `rho`, if it is one.
pub fn as_planar_turn(rho: &SignedPermutation) -> Option<PlanarTurn> {
    let n = rho.dim();
    let moved: Vec<usize> = (0..n)
        .filter(|&i| rho.perm[i] != i || rho.signs[i] != 1)
        .collect();
    if moved.len() != 2 {
        return None;
    }
    let (a, b) = (moved[0], moved[1]);
    for quarters in [1i8, -1, 2] {
        let t = PlanarTurn {
            axis_a: a,
            axis_b: b,
            quarters,
        };
        if &t.to_signed_permutation(n) == rho {
            return Some(t);
        }
    }
    None
}

/// In-plane rectangle of a layer box, parametrized by normalized arclength
/// counterclockwise from the corner (hi_a, lo_b).
#[derive(Clone, Copy, Debug)]
struct Ring {
    lo_a: f64,
    hi_a: f64,
    lo_b: f64,
    hi_b: f64,
}

impl Ring {
    fn of(bx: &AxisBox, axis_a: usize, axis_b: usize) -> Ring {
        Ring {
            lo_a: bx.lo[axis_a],
            hi_a: bx.hi[axis_a],
            lo_b: bx.lo[axis_b],
            hi_b: bx.hi[axis_b],
        }
    }

    fn extents(&self) -> (f64, f64) {
        (self.hi_a - self.lo_a, self.hi_b - self.lo_b)
    }

    fn perimeter(&self) -> f64 {
        let (ea, eb) = self.extents();
        2.0 * (ea + eb)
    }

    /// Normalized parameters of the four corners, counterclockwise:
    /// (hi,lo) = 0, (hi,hi), (lo,hi), (lo,lo).
    fn corner_fractions(&self) -> [f64; 4] {
        let (ea, eb) = self.extents();
        let p = self.perimeter();
        [0.0, eb / p, (eb + ea) / p, (2.0 * eb + ea) / p]
    }

    fn point_at(&self, frac: f64) -> (f64, f64) {
        let (ea, eb) = self.extents();
        let p = self.perimeter();
        let mut s = frac.rem_euclid(1.0) * p;
        if s < eb {
            return (self.hi_a, self.lo_b + s);
        }
        s -= eb;
        if s < ea {
            return (self.hi_a - s, self.hi_b);
        }
        s -= ea;
        if s < eb {
            return (self.lo_a, self.hi_b - s);
        }
        s -= eb;
        (self.lo_a + s, self.lo_b)
    }
}

/// Pairing anchor between two consecutive layer rings: the inner ring's
/// boundary fraction `u` corresponds to the outer ring's fraction `g`.
///
/// Anchors are placed so that corners pair with corners both before and
/// after the walk displacement: (c_in, c_out) aligns the domain corners,
/// (c_in - f_in, c_out - f_out) aligns the image corners. Between anchors
/// all four boundary paths (domain and image, both rings) stay on single
/// rectangle edges, so the prism cells are clean trapezoids.
#[derive(Clone, Copy, Debug)]
struct Anchor {
    u: f64,
    g: f64,
}

fn shell_anchors(inner: &Ring, outer: &Ring, f_in: f64, f_out: f64) -> Vec<Anchor> {
    let ci = inner.corner_fractions();
    let co = outer.corner_fractions();
    let snap = |x: f64| {
        let r = x.rem_euclid(1.0);
        if r > 1.0 - 1e-12 {
            r - 1.0
        } else {
            r
        }
    };
    // Breakpoint fractions on each ring: its corners and the walk preimages
    // of its corners. Duplicates are kept; a duplicated inner fraction
    // paired with two distinct outer fractions is a collapsed interval that
    // fans out from a single inner vertex.
    let mut us: Vec<f64> = Vec::with_capacity(8);
    let mut gs: Vec<f64> = Vec::with_capacity(8);
    for k in 0..4 {
        us.push(snap(ci[k]));
        us.push(snap(ci[k] - f_in));
        gs.push(snap(co[k]));
        gs.push(snap(co[k] - f_out));
    }
    us.sort_by(f64::total_cmp);
    gs.sort_by(f64::total_cmp);
    // Pair by rank. Any rotation gives a monotone pairing containing every
    // breakpoint; pick the one that aligns the most corner/preimage pins,
    // which minimizes the tangential lag of the cells.
    let m = us.len();
    // Corner pins first: they take insertion priority below.
    let mut pins: Vec<(f64, f64)> = Vec::with_capacity(8);
    for k in 0..4 {
        pins.push((snap(ci[k]), snap(co[k])));
    }
    for k in 0..4 {
        pins.push((snap(ci[k] - f_in), snap(co[k] - f_out)));
    }
    let cyc_eq = |a: f64, b: f64| {
        let d = (a - b).abs();
        d < 1e-9 || d > 1.0 - 1e-9
    };
    let mut best_r = 0;
    let mut best_score = -1i32;
    for r in 0..m {
        let mut score = 0;
        for i in 0..m {
            let g = gs[(i + r) % m];
            if pins.iter().any(|&(pu, pg)| cyc_eq(us[i], pu) && cyc_eq(g, pg)) {
                score += 1;
            }
        }
        if score > best_score {
            best_score = score;
            best_r = r;
        }
    }
    let mut anchors: Vec<Anchor> = (0..m)
        .map(|i| Anchor {
            u: us[i],
            g: gs[(i + best_r) % m] + if i + best_r >= m { 1.0 } else { 0.0 },
        })
        .collect();
    // Where a corner preimage crosses a corner between the rings, the rank
    // pairing walks past the two corners at different anchors and the
    // radial edges would wind around the corner in opposite senses. Insert
    // the missing pins (corners first) wherever a monotone slot exists;
    // the crossing then resolves into two fans at the corner.
    for &(pu, pg) in &pins {
        let present = anchors
            .iter()
            .any(|a| cyc_eq(a.u, pu) && cyc_eq(a.g.rem_euclid(1.0), pg));
        if present {
            continue;
        }
        let m = anchors.len();
        let mut slot = None;
        for i in 0..m {
            let a = anchors[i];
            let b = if i + 1 < m {
                anchors[i + 1]
            } else {
                Anchor {
                    u: anchors[0].u + 1.0,
                    g: anchors[0].g + 1.0,
                }
            };
            // Unwrap the pin into this interval's coordinates.
            let mut u = pu;
            while u < a.u - 1e-12 {
                u += 1.0;
            }
            let mut g = pg;
            while g < a.g - 1e-12 {
                g += 1.0;
            }
            if u <= b.u + 1e-12 && g <= b.g + 1e-12 {
                slot = Some((i + 1, Anchor { u, g }));
                break;
            }
        }
        if let Some((at, anchor)) = slot {
            anchors.insert(at, anchor);
        }
    }
    anchors
}

/// One layer's role in a shell: where a boundary fraction sits and where it
/// maps. `exact` layers apply the prescribed rotation outright; `frozen`
/// layers are pointwise fixed (the support boundary).
#[derive(Clone, Copy, Debug)]
struct LayerRole {
    walk: f64,
    exact: bool,
    frozen: bool,
}

fn layer_point(
    bx: &AxisBox,
    turn: &PlanarTurn,
    comp_axis: Option<usize>,
    frac: f64,
    cap: Option<(usize, bool)>,
) -> Vec<f64> {
    let ring = Ring::of(bx, turn.axis_a, turn.axis_b);
    let mut x = bx.center();
    match cap {
        Some((side, true)) => {
            // Cap center: in-plane coordinates stay at the box center.
            let c = comp_axis.expect("cap center needs a complementary axis");
            x[c] = if side == 0 { bx.lo[c] } else { bx.hi[c] };
        }
        Some((side, false)) => {
            let (pa, pb) = ring.point_at(frac);
            x[turn.axis_a] = pa;
            x[turn.axis_b] = pb;
            let c = comp_axis.expect("cap side needs a complementary axis");
            x[c] = if side == 0 { bx.lo[c] } else { bx.hi[c] };
        }
        None => {
            let (pa, pb) = ring.point_at(frac);
            x[turn.axis_a] = pa;
            x[turn.axis_b] = pb;
        }
    }
    x
}

fn layer_image(
    bx: &AxisBox,
    turn: &PlanarTurn,
    comp_axis: Option<usize>,
    role: LayerRole,
    rho: &SignedPermutation,
    frac: f64,
    cap: Option<(usize, bool)>,
) -> Vec<f64> {
    if role.frozen {
        return layer_point(bx, turn, comp_axis, frac, cap);
    }
    if role.exact {
        let p = layer_point(bx, turn, comp_axis, frac, cap);
        let c = bx.center();
        let rel: Vec<f64> = p.iter().zip(&c).map(|(x, c)| x - c).collect();
        let rot = rho.apply(&rel);
        return rot.iter().zip(&c).map(|(x, c)| x + c).collect();
    }
    if matches!(cap, Some((_, true))) {
        // Cap centers are rotation-fixed.
        return layer_point(bx, turn, comp_axis, frac, cap);
    }
    layer_point(bx, turn, comp_axis, frac + role.walk, cap)
}

/// Prism cells of one shell, built per anchor interval.
#[allow(clippy::too_many_arguments)]
fn shell_cells(
    anchors: &[Anchor],
    inner_box: &AxisBox,
    outer_box: &AxisBox,
    turn: &PlanarTurn,
    comp_axis: Option<usize>,
    inner_role: LayerRole,
    outer_role: LayerRole,
    rho: &SignedPermutation,
) -> Vec<AffinePiece> {
    let n = inner_box.dim();
    let m = anchors.len();
    let mut cells = Vec::new();
    // Surface simplices per anchor interval: for n = 2 a single boundary
    // segment; for n = 3 two band triangles and two cap-fan triangles.
    // Each entry lists (frac-anchor-index, cap) per vertex where cap is
    // (side, is_center).
    let patterns: Vec<Vec<(usize, Option<(usize, bool)>)>> = if comp_axis.is_none() {
        vec![vec![(0, None), (1, None)]]
    } else {
        vec![
            vec![(0, Some((0, false))), (1, Some((0, false))), (1, Some((1, false)))],
            vec![(0, Some((0, false))), (1, Some((1, false))), (0, Some((1, false)))],
            vec![(0, Some((0, true))), (0, Some((0, false))), (1, Some((0, false)))],
            vec![(0, Some((1, true))), (0, Some((1, false))), (1, Some((1, false)))],
        ]
    };
    for k in 0..m {
        let a0 = anchors[k];
        let a1 = anchors[(k + 1) % m];
        let a1 = if (k + 1) % m == 0 {
            Anchor {
                u: a1.u + 1.0,
                g: a1.g + 1.0,
            }
        } else {
            a1
        };
        let pair = [a0, a1];
        for pat in &patterns {
            let w_dom: Vec<Vec<f64>> = pat
                .iter()
                .map(|&(i, cap)| layer_point(inner_box, turn, comp_axis, pair[i].u, cap))
                .collect();
            let u_dom: Vec<Vec<f64>> = pat
                .iter()
                .map(|&(i, cap)| layer_point(outer_box, turn, comp_axis, pair[i].g, cap))
                .collect();
            let w_tar: Vec<Vec<f64>> = pat
                .iter()
                .map(|&(i, cap)| {
                    layer_image(inner_box, turn, comp_axis, inner_role, rho, pair[i].u, cap)
                })
                .collect();
            let u_tar: Vec<Vec<f64>> = pat
                .iter()
                .map(|&(i, cap)| {
                    layer_image(outer_box, turn, comp_axis, outer_role, rho, pair[i].g, cap)
                })
                .collect();
            // Path triangulation of the prism between the matched surface
            // simplices: {u_0..u_k, w_k..w_{n-1}}.
            for split in 0..n {
                let mut dom = Vec::with_capacity(n + 1);
                let mut tar = Vec::with_capacity(n + 1);
                for u in u_dom.iter().take(split + 1) {
                    dom.push(u.clone());
                }
                for w in w_dom.iter().skip(split) {
                    dom.push(w.clone());
                }
                for u in u_tar.iter().take(split + 1) {
                    tar.push(u.clone());
                }
                for w in w_tar.iter().skip(split) {
                    tar.push(w.clone());
                }
                match simplex_orientation(&dom) {
                    Orientation::Positive => {}
                    Orientation::Negative => {
                        let last = dom.len();
                        dom.swap(last - 1, last - 2);
                        tar.swap(last - 1, last - 2);
                    }
                    Orientation::Degenerate => {
                        // Collapsed anchor intervals (a corner preimage
                        // coinciding with a corner) produce zero-volume
                        // slivers; skip them, the tiling check guards
                        // against real gaps.
                        continue;
                    }
                }
                cells.push(AffinePiece::new(dom, tar));
            }
        }
    }
    cells
}

/// Build a twist move realizing `rho` (a single planar turn, or the
/// identity) on the inner boundary, identity on the support boundary. The
/// layer count starts at `layers` and doubles up to 16 until the move
/// validates.
pub fn build_twist(
    support: &AxisBox,
    inner: &AxisBox,
    rho: &SignedPermutation,
    layers: u32,
    hole: Option<usize>,
) -> Result<Move> {
    let n = support.dim();
    if !support.contains_box_strict(inner) {
        return Err(Error::MoveValidationFailure {
            move_kind: "twist".into(),
            detail: "inner box not strictly inside support".into(),
        });
    }
    if rho.is_identity() {
        let cells = frusta_cells(support, inner, &|v| v.to_vec(), &|v| v.to_vec())?;
        let mv = Move {
            kind: MoveKind::Twist,
            hole,
            support: support.clone(),
            inner_before: inner.clone(),
            inner_after: inner.clone(),
            inner_rotation: Some(rho.clone()),
            layers: Some(layers),
            cells,
        };
        mv.validate()?;
        return Ok(mv);
    }
    let turn = as_planar_turn(rho).ok_or_else(|| Error::MoveValidationFailure {
        move_kind: "twist".into(),
        detail: "rotation is not a single planar turn; decompose it first".into(),
    })?;
    if n > 3 {
        return Err(Error::MoveValidationFailure {
            move_kind: "twist".into(),
            detail: format!("twists are implemented for n = 2 and 3, not n = {n}"),
        });
    }
    let comp_axis = (0..n).find(|&a| a != turn.axis_a && a != turn.axis_b);
    // The inner box must be invariant under the turn: square in-plane for
    // quarter turns (any centered box is invariant under a half turn).
    let (ea, eb) = (inner.extent(turn.axis_a), inner.extent(turn.axis_b));
    if turn.quarters.abs() == 1 && (ea - eb).abs() > 1e-12 * ea.max(eb) {
        return Err(Error::MoveValidationFailure {
            move_kind: "twist".into(),
            detail: format!(
                "quarter turn needs a square in-plane inner box, got extents {ea} x {eb}"
            ),
        });
    }
    let total_abs = (turn.quarters as f64).abs() / 4.0;
    let dir = if turn.quarters < 0 { -1.0 } else { 1.0 };
    // Critical amplitudes: a shell whose walk interval crosses a corner
    // fraction difference cannot avoid fold-prone corner bridging, so the
    // amplitude schedule steps exactly onto those values.
    let mut criticals: Vec<f64> = Vec::new();
    for ring in [
        Ring::of(inner, turn.axis_a, turn.axis_b),
        Ring::of(support, turn.axis_a, turn.axis_b),
    ] {
        let cf = ring.corner_fractions();
        for j in 0..4 {
            for k in 0..4 {
                let d = (cf[j] - cf[k]).rem_euclid(1.0);
                if d > 1e-9 && d < total_abs - 1e-9 {
                    criticals.push(d);
                }
            }
        }
    }
    let mut l = layers.max(1);
    let mut last_err = None;
    while l <= 16 {
        // Amplitude schedule: uniform steps plus the critical values,
        // descending from the full turn to zero.
        let mut amps: Vec<f64> = (0..=l)
            .map(|i| total_abs * (1.0 - i as f64 / l as f64))
            .chain(criticals.iter().copied())
            .collect();
        amps.sort_by(|a, b| b.total_cmp(a));
        amps.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let mut cells = Vec::new();
        for pair in amps.windows(2) {
            let (amp_in, amp_out) = (pair[0], pair[1]);
            let frac_in = dir * amp_in;
            let frac_out = dir * amp_out;
            let inner_box = inner.lerp(support, 1.0 - amp_in / total_abs);
            let outer_box = inner.lerp(support, 1.0 - amp_out / total_abs);
            let inner_role = LayerRole {
                walk: frac_in,
                exact: amp_in == total_abs,
                frozen: false,
            };
            let outer_role = LayerRole {
                walk: frac_out,
                exact: false,
                frozen: amp_out == 0.0,
            };
            let anchors = shell_anchors(
                &Ring::of(&inner_box, turn.axis_a, turn.axis_b),
                &Ring::of(&outer_box, turn.axis_a, turn.axis_b),
                frac_in,
                frac_out,
            );
            cells.extend(shell_cells(
                &anchors, &inner_box, &outer_box, &turn, comp_axis, inner_role, outer_role, rho,
            ));
        }
        let mv = Move {
            kind: MoveKind::Twist,
            hole,
            support: support.clone(),
            inner_before: inner.clone(),
            inner_after: inner.clone(),
            inner_rotation: Some(rho.clone()),
            layers: Some(l),
            cells,
        };
        match mv.validate() {
            Ok(()) => return Ok(mv),
            Err(e) => last_err = Some(e),
        }
        l *= 2;
    }
    Err(last_err.unwrap_or_else(|| Error::MoveValidationFailure {
        move_kind: "twist".into(),
        detail: "no layer count up to 16 validated".into(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rot90(n: usize) -> SignedPermutation {
        PlanarTurn {
            axis_a: 0,
            axis_b: 1,
            quarters: 1,
        }
        .to_signed_permutation(n)
    }

    #[test]
    fn quarter_turn_twist_validates() {
        let w = AxisBox::new(vec![-3.0, -3.0], vec![3.0, 3.0]).unwrap();
        let a = AxisBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let mv = build_twist(&w, &a, &rot90(2), 4, None).unwrap();
        // The corner (1,1) of A maps to (-1,1).
        let boundary = mv.prescribed_inner().apply(&[1.0, 1.0]);
        assert!((boundary[0] + 1.0).abs() < 1e-14 && (boundary[1] - 1.0).abs() < 1e-14);
        let mut hint = 0;
        let (y, _) = mv.apply(&[1.0, 1.0], &mut hint).unwrap().unwrap();
        assert!((y[0] + 1.0).abs() < 1e-12 && (y[1] - 1.0).abs() < 1e-12, "{y:?}");
    }

    #[test]
    fn identity_rotation_gives_identity_move() {
        let w = AxisBox::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
        let a = AxisBox::new(vec![-0.5, -0.5], vec![0.5, 0.5]).unwrap();
        let mv = build_twist(&w, &a, &SignedPermutation::identity(2), 4, None).unwrap();
        let mut hint = 0;
        for p in [[1.5, 0.3], [-0.5, -0.5], [0.7, -1.9]] {
            let (y, _) = mv.apply(&p, &mut hint).unwrap().unwrap();
            assert!((y[0] - p[0]).abs() < 1e-13 && (y[1] - p[1]).abs() < 1e-13);
        }
    }

    #[test]
    fn thin_frame_twist_absorbs_quarter_turn() {
        // The corner-anchored layer mesh realizes a quarter turn in an
        // arbitrarily thin frame (the cells just get badly conditioned),
        // so this validates instead of failing.
        let w = AxisBox::new(vec![-1.05, -1.05], vec![1.05, 1.05]).unwrap();
        let a = AxisBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let mv = build_twist(&w, &a, &rot90(2), 4, None).unwrap();
        assert!(mv.validate().is_ok());
    }

    #[test]
    fn invalid_twist_requests_are_rejected() {
        let w = AxisBox::new(vec![-3.0, -3.0], vec![3.0, 3.0]).unwrap();
        // Quarter turns need a square in-plane inner box.
        let a = AxisBox::new(vec![-1.0, -0.5], vec![1.0, 0.5]).unwrap();
        let err = build_twist(&w, &a, &rot90(2), 4, None).unwrap_err();
        assert!(matches!(err, Error::MoveValidationFailure { .. }));
        // Dimensions above 3 are out of scope for twists.
        let w4 = AxisBox::new(vec![-3.0; 4], vec![3.0; 4]).unwrap();
        let a4 = AxisBox::new(vec![-1.0; 4], vec![1.0; 4]).unwrap();
        let err = build_twist(&w4, &a4, &rot90(4), 4, None).unwrap_err();
        assert!(matches!(err, Error::MoveValidationFailure { .. }));
    }

    #[test]
    fn half_turn_twist_validates() {
        // Half turns allow non-square inner boxes; the support shares the
        // inner aspect ratio (the planner always uses matched shapes).
        let w = AxisBox::new(vec![-2.0, -4.0], vec![2.0, 4.0]).unwrap();
        let a = AxisBox::new(vec![-0.5, -1.0], vec![0.5, 1.0]).unwrap();
        let rho = PlanarTurn {
            axis_a: 0,
            axis_b: 1,
            quarters: 2,
        }
        .to_signed_permutation(2);
        let mv = build_twist(&w, &a, &rho, 4, None).unwrap();
        let mut hint = 0;
        let (y, _) = mv.apply(&[0.5, 1.0], &mut hint).unwrap().unwrap();
        assert!((y[0] + 0.5).abs() < 1e-12 && (y[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn clockwise_quarter_twist_validates() {
        let w = AxisBox::new(vec![-3.0, -3.0], vec![3.0, 3.0]).unwrap();
        let a = AxisBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let rho = PlanarTurn {
            axis_a: 0,
            axis_b: 1,
            quarters: -1,
        }
        .to_signed_permutation(2);
        let mv = build_twist(&w, &a, &rho, 4, None).unwrap();
        let mut hint = 0;
        // Clockwise: (1,1) -> (1,-1).
        let (y, _) = mv.apply(&[1.0, 1.0], &mut hint).unwrap().unwrap();
        assert!((y[0] - 1.0).abs() < 1e-12 && (y[1] + 1.0).abs() < 1e-12, "{y:?}");
    }

    #[test]
    fn factorization_recomposes() {
        let checks: Vec<SignedPermutation> = vec![
            SignedPermutation::identity(2),
            rot90(2),
            SignedPermutation::new(vec![0, 1], vec![-1, -1]).unwrap(),
            SignedPermutation::new(vec![1, 0], vec![1, -1]).unwrap(),
            SignedPermutation::new(vec![2, 0, 1], vec![1, 1, 1]).unwrap(),
            SignedPermutation::new(vec![2, 0, 1], vec![-1, -1, 1]).unwrap(),
            SignedPermutation::new(vec![1, 0, 2], vec![-1, 1, 1]).unwrap(),
            SignedPermutation::new(vec![3, 2, 1, 0], vec![1, -1, -1, 1]).unwrap(),
        ];
        for rho in checks {
            if rho.determinant() != 1 {
                continue;
            }
            let n = rho.dim();
            let turns = factor_rotation(&rho).unwrap();
            let mut comp = SignedPermutation::identity(n);
            for t in &turns {
                comp = t.to_signed_permutation(n).compose(&comp);
            }
            assert_eq!(comp, rho, "factorization failed for {rho:?}");
        }
    }

    #[test]
    fn three_d_twist_validates() {
        let w = AxisBox::new(vec![-3.0; 3], vec![3.0; 3]).unwrap();
        let a = AxisBox::new(vec![-1.0; 3], vec![1.0; 3]).unwrap();
        let mv = build_twist(&w, &a, &rot90(3), 4, None);
        assert!(mv.is_ok(), "3d twist failed: {:?}", mv.err());
        let mv = mv.unwrap();
        let mut hint = 0;
        let (y, _) = mv.apply(&[1.0, 1.0, 0.5], &mut hint).unwrap().unwrap();
        assert!(
            (y[0] + 1.0).abs() < 1e-12 && (y[1] - 1.0).abs() < 1e-12 && (y[2] - 0.5).abs() < 1e-12,
            "{y:?}"
        );
    }

    #[test]
    fn three_d_twist_in_other_plane() {
        let w = AxisBox::new(vec![-2.5; 3], vec![2.5; 3]).unwrap();
        let a = AxisBox::new(vec![-0.8; 3], vec![0.8; 3]).unwrap();
        let rho = PlanarTurn {
            axis_a: 1,
            axis_b: 2,
            quarters: 1,
        }
        .to_signed_permutation(3);
        let mv = build_twist(&w, &a, &rho, 4, None);
        assert!(mv.is_ok(), "plane (1,2) twist failed: {:?}", mv.err());
    }
}
