//! The piecewise-linear generating map between the fundamental shells.
//!
//! The map is an exterior diagonal affine T carrying the domain box onto the
//! target box, followed by an ordered script of locally supported PL moves.
//! Each move is a homeomorphism of its support box, identity on the support
//! boundary, with a prescribed affine behavior on the boundary of an inner
//! box; composing the script rearranges the T-images of the domain holes
//! into the target holes with the prescribed boundary maps. Every move is
//! validated on construction (cell orientations, tiling volumes, sampled
//! boundary conditions), so the composite is a certified PL homeomorphism.

pub mod cells;
pub mod eval;
pub mod plan;
pub mod twist;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    simplex_orientation, simplex_volume, AffineMap, AffinePiece, AxisBox, DiagAffine, Orientation,
    SignedPermutation,
};
use crate::ifs::ConstructionInstance;
use crate::rng::CounterRng;

pub use eval::{validate_generating_map, GenMapReport, PhiEvaluator};
pub use plan::plan_moves;

/// Relative tolerance for cell-volume tiling checks.
pub const TILING_REL_TOL: f64 = 1e-9;
/// Per-move boundary-condition tolerance, relative to the support diameter.
pub const MOVE_BOUNDARY_TOL: f64 = 1e-12;
/// Global boundary-conjugacy tolerance, relative to the target diameter.
pub const CONJUGACY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum MoveKind {
    FrameRemap,
    CorridorTranslate,
    Twist,
}

impl std::fmt::Display for MoveKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MoveKind::FrameRemap => write!(f, "frameRemap"),
            MoveKind::CorridorTranslate => write!(f, "corridorTranslate"),
            MoveKind::Twist => write!(f, "twist"),
        }
    }
}

/// One locally supported PL move: a simplicial homeomorphism of
/// support\innerBefore onto support\innerAfter, identity on the support
/// boundary, affine on the inner boundary.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Move {
    pub kind: MoveKind,
    /// Flat hole index this move serves, for diagnostics.
    pub hole: Option<usize>,
    pub support: AxisBox,
    #[serde(rename = "innerBefore")]
    pub inner_before: AxisBox,
    #[serde(rename = "innerAfter")]
    pub inner_after: AxisBox,
    #[serde(rename = "innerRotation")]
    pub inner_rotation: Option<SignedPermutation>,
    pub layers: Option<u32>,
    pub cells: Vec<AffinePiece>,
}

impl Move {
    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    /// The prescribed affine map on the inner boundary: the canonical
    /// diagonal-positive box map for remaps and translations, the rotation
    /// about the inner center for twists.
    pub fn prescribed_inner(&self) -> AffineMap {
        match (&self.kind, &self.inner_rotation) {
            (MoveKind::Twist, Some(rho)) => {
                let c = self.inner_before.center();
                let rc = rho.apply(&c);
                let n = self.dim();
                let mut linear = vec![vec![0.0; n]; n];
                for i in 0..n {
                    linear[i][rho.perm[i]] = rho.signs[i] as f64;
                }
                let shift = (0..n).map(|i| c[i] - rc[i]).collect();
                AffineMap { linear, shift }
            }
            _ => AffineMap::from_diag(&DiagAffine::box_map(&self.inner_before, &self.inner_after)),
        }
    }

    /// Index of a cell whose closed domain simplex contains x, scanning
    /// from `hint` (last-hit cache). The tolerance absorbs the drift that
    /// boundary-riding points accumulate through long compositions.
    pub fn locate(&self, x: &[f64], hint: usize) -> Option<usize> {
        let m = self.cells.len();
        for tol in [1e-12, 1e-8] {
            for step in 0..m {
                let idx = (hint + step) % m;
                if self.cells[idx].contains(x, tol) {
                    return Some(idx);
                }
            }
        }
        None
    }

    /// Whether x lies within `band` of the boundary of `bx` (max norm).
    fn near_box_boundary(bx: &AxisBox, x: &[f64], band: f64) -> bool {
        bx.contains_point(x, band) && !bx.contains_point_strict(x, band)
    }

    /// Apply the move to a point inside the support (None = identity region
    /// outside the open support).
    ///
    /// Points riding the inner boundary map by the exact prescribed affine:
    /// locating them in a frame cell would interpolate toward the identity
    /// on the support boundary, and the resulting offset error compounds
    /// geometrically through a long script (each thin corridor frame
    /// multiplies it by leg length over frame thickness).
    pub fn apply(&self, x: &[f64], hint: &mut usize) -> Result<Option<(Vec<f64>, Option<usize>)>> {
        if !self.support.contains_point_strict(x, 0.0) {
            return Ok(None);
        }
        let band = 1e-11 * self.inner_before.diameter();
        if Self::near_box_boundary(&self.inner_before, x, band) {
            return Ok(Some((self.prescribed_inner().apply(x), None)));
        }
        match self.locate(x, *hint) {
            Some(idx) => {
                *hint = idx;
                Ok(Some((self.cells[idx].apply(x), Some(idx))))
            }
            None => {
                let pad = 1e-9 * self.inner_before.diameter();
                if self.inner_before.contains_point_strict(x, pad) {
                    Err(Error::PointInHole(self.hole.unwrap_or(usize::MAX)))
                } else {
                    Err(Error::LocationFailure {
                        move_index: usize::MAX,
                        point: x.to_vec(),
                    })
                }
            }
        }
    }

    /// Full validation: positive orientations on both sides, tiling volumes,
    /// and sampled boundary conditions (identity on the support boundary,
    /// the prescribed affine on the inner-before boundary).
    pub fn validate(&self) -> Result<()> {
        let fail = |detail: String| Error::MoveValidationFailure {
            move_kind: self.kind.to_string(),
            detail,
        };
        if self.cells.is_empty() {
            return Err(fail("no cells".into()));
        }
        let mut dom_vol = 0.0;
        let mut tar_vol = 0.0;
        for (idx, cell) in self.cells.iter().enumerate() {
            match simplex_orientation(&cell.dom) {
                Orientation::Positive => {}
                o => return Err(fail(format!("domain simplex {idx} is {o:?}"))),
            }
            match simplex_orientation(&cell.tar) {
                Orientation::Positive => {}
                o => return Err(fail(format!("target simplex {idx} is {o:?}"))),
            }
            dom_vol += simplex_volume(&cell.dom);
            tar_vol += simplex_volume(&cell.tar);
        }
        let dom_expect = self.support.volume() - self.inner_before.volume();
        let tar_expect = self.support.volume() - self.inner_after.volume();
        if ((dom_vol - dom_expect) / dom_expect).abs() > TILING_REL_TOL {
            return Err(fail(format!(
                "domain cells do not tile the frame: {dom_vol} vs {dom_expect}"
            )));
        }
        if ((tar_vol - tar_expect) / tar_expect).abs() > TILING_REL_TOL {
            return Err(fail(format!(
                "target cells do not tile the frame: {tar_vol} vs {tar_expect}"
            )));
        }
        // Boundary sampling.
        let tol = MOVE_BOUNDARY_TOL * self.support.diameter().max(1.0);
        let prescribed = self.prescribed_inner();
        let rng = CounterRng::new(crate::rng::SEED, 0x30BE);
        let mut hint = 0usize;
        for (which, bx) in [(0u64, &self.support), (1u64, &self.inner_before)] {
            let samples = boundary_samples(bx, 8, &rng, which);
            for (si, s) in samples.iter().enumerate() {
                let idx = self.locate(s, hint).ok_or_else(|| {
                    fail(format!("boundary sample {s:?} not located in any cell"))
                })?;
                hint = idx;
                let got = self.cells[idx].apply(s);
                let want = if which == 0 {
                    s.clone()
                } else {
                    prescribed.apply(s)
                };
                let err = got
                    .iter()
                    .zip(&want)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                if err > tol {
                    return Err(fail(format!(
                        "boundary condition off by {err} at sample {si} of {} boundary",
                        if which == 0 { "support" } else { "inner" }
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Deterministic samples on the boundary of a box: per face, a tensor grid
/// of `per_axis` points jittered by the counter RNG, plus the box corners.
pub fn boundary_samples(
    bx: &AxisBox,
    per_axis: usize,
    rng: &CounterRng,
    stream: u64,
) -> Vec<Vec<f64>> {
    let n = bx.dim();
    let mut out = Vec::new();
    let mut counter = stream.wrapping_mul(0x9E37);
    for axis in 0..n {
        for side in 0..2 {
            let coord = if side == 0 { bx.lo[axis] } else { bx.hi[axis] };
            let others: Vec<usize> = (0..n).filter(|a| *a != axis).collect();
            let steps = per_axis.max(2);
            let total: usize = steps.pow(others.len() as u32);
            for g in 0..total {
                let mut x = vec![0.0; n];
                x[axis] = coord;
                let mut rem = g;
                for &a in &others {
                    let i = rem % steps;
                    rem /= steps;
                    let jitter = rng.f64_at(counter) * 0.8 / steps as f64;
                    counter += 1;
                    let frac = (i as f64 + 0.1) / steps as f64 + jitter;
                    x[a] = bx.lo[a] + frac.min(1.0) * (bx.hi[a] - bx.lo[a]);
                }
                out.push(x);
            }
        }
    }
    for pattern in 0..(1usize << n) {
        out.push(bx.corner(pattern));
    }
    out
}

/// Build a frame remap: PL homeomorphism of support\A onto support\B,
/// identity on the support boundary, the canonical diagonal-positive box
/// map on the A boundary.
pub fn build_frame_remap(
    support: &AxisBox,
    a: &AxisBox,
    b: &AxisBox,
    kind: MoveKind,
    hole: Option<usize>,
) -> Result<Move> {
    for (name, inner) in [("innerBefore", a), ("innerAfter", b)] {
        if !support.contains_box_strict(inner) {
            return Err(Error::MoveValidationFailure {
                move_kind: kind.to_string(),
                detail: format!("{name} not strictly inside support"),
            });
        }
    }
    let ab = DiagAffine::box_map(a, b);
    let cells = cells::frusta_cells(support, a, &|v| v.to_vec(), &|v| ab.apply(v))?;
    let mv = Move {
        kind,
        hole,
        support: support.clone(),
        inner_before: a.clone(),
        inner_after: b.clone(),
        inner_rotation: None,
        layers: None,
        cells,
    };
    mv.validate()?;
    Ok(mv)
}

/// The fully assembled generating map.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeneratingMap {
    /// Exterior affine part: diagonal positive scaling carrying the closed
    /// domain box onto the closed target box, used verbatim outside Q.
    pub exterior: DiagAffine,
    /// Ordered move script, applied after the exterior map.
    pub script: Vec<Move>,
    /// Per-hole prescribed boundary affines g_k . T . h_k^{-1} in flat
    /// bijection order.
    #[serde(rename = "prescribedHoleMaps")]
    pub prescribed_hole_maps: Vec<AffineMap>,
}

impl GeneratingMap {
    pub fn dim(&self) -> usize {
        self.exterior.scales.len()
    }
}

/// Build the generating map for a desk-scale instance: plan the move script
/// and attach the exterior map and per-hole prescriptions.
pub fn build_generating_map(instance: &ConstructionInstance) -> Result<GeneratingMap> {
    plan::plan_moves(instance)
}
