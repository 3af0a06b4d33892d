//! Exact-enough geometric primitives: axis-aligned boxes, similarities whose
//! rotation parts are signed axis permutations, and simplices with derived
//! affine maps.
//!
//! Restricting rotations to signed permutations keeps composition and
//! inversion exact up to floating-point rounding of the translation parts,
//! which is all the construction needs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for the simplex degeneracy predicate.
pub const DEGENERACY_TOL: f64 = 1e-14;

/// An open axis-aligned box, the product of intervals (lo_i, hi_i).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Format("box lo/hi dimension mismatch".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l < h)) {
            return Err(Error::Format(format!(
                "box has empty side: lo={lo:?} hi={hi:?}"
            )));
        }
        Ok(AxisBox { lo, hi })
    }

    /// Unit box (0,1)^n.
    pub fn unit(n: usize) -> Self {
        AxisBox {
            lo: vec![0.0; n],
            hi: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn extents(&self) -> Vec<f64> {
        (0..self.dim()).map(|a| self.extent(a)).collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| 0.5 * (l + h))
            .collect()
    }

    pub fn diameter(&self) -> f64 {
        self.extents().iter().map(|e| e * e).sum::<f64>().sqrt()
    }

    pub fn volume(&self) -> f64 {
        self.extents().iter().product()
    }

    pub fn contains_point(&self, x: &[f64], tol: f64) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&xi, (&l, &h))| xi >= l - tol && xi <= h + tol)
    }

    pub fn contains_point_strict(&self, x: &[f64], tol: f64) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&xi, (&l, &h))| xi > l + tol && xi < h - tol)
    }

    /// Closure of `inner` contained in the open box, with positive margin.
    pub fn contains_box_strict(&self, inner: &AxisBox) -> bool {
        inner
            .lo
            .iter()
            .zip(&inner.hi)
            .zip(self.lo.iter().zip(&self.hi))
            .all(|((&il, &ih), (&ol, &oh))| il > ol && ih < oh)
    }

    /// Distance between two boxes (0 when closures intersect).
    pub fn distance(&self, other: &AxisBox) -> f64 {
        let mut s = 0.0;
        for a in 0..self.dim() {
            let gap = (other.lo[a] - self.hi[a]).max(self.lo[a] - other.hi[a]);
            if gap > 0.0 {
                s += gap * gap;
            }
        }
        s.sqrt()
    }

    /// Whether closed boxes intersect.
    pub fn intersects(&self, other: &AxisBox) -> bool {
        (0..self.dim()).all(|a| self.lo[a] <= other.hi[a] && other.lo[a] <= self.hi[a])
    }

    /// Minimal distance from `inner` to the complement of this open box.
    pub fn margin_to_boundary(&self, inner: &AxisBox) -> f64 {
        (0..self.dim())
            .map(|a| (inner.lo[a] - self.lo[a]).min(self.hi[a] - inner.hi[a]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn inflate(&self, by: f64) -> AxisBox {
        AxisBox {
            lo: self.lo.iter().map(|l| l - by).collect(),
            hi: self.hi.iter().map(|h| h + by).collect(),
        }
    }

    /// Smallest box containing both.
    pub fn hull(&self, other: &AxisBox) -> AxisBox {
        AxisBox {
            lo: self
                .lo
                .iter()
                .zip(&other.lo)
                .map(|(a, b)| a.min(*b))
                .collect(),
            hi: self
                .hi
                .iter()
                .zip(&other.hi)
                .map(|(a, b)| a.max(*b))
                .collect(),
        }
    }

    /// Cornerwise linear interpolation toward `other` (s = 0 gives self).
    pub fn lerp(&self, other: &AxisBox, s: f64) -> AxisBox {
        AxisBox {
            lo: self
                .lo
                .iter()
                .zip(&other.lo)
                .map(|(a, b)| a + s * (b - a))
                .collect(),
            hi: self
                .hi
                .iter()
                .zip(&other.hi)
                .map(|(a, b)| a + s * (b - a))
                .collect(),
        }
    }

    /// Corner selected by a bit pattern: bit a set means hi on axis a.
    pub fn corner(&self, pattern: usize) -> Vec<f64> {
        (0..self.dim())
            .map(|a| {
                if pattern >> a & 1 == 1 {
                    self.hi[a]
                } else {
                    self.lo[a]
                }
            })
            .collect()
    }
}

/// A signed axis permutation: output axis i takes sign[i] times input axis
/// perm[i]. Rotation parts of all similarities in the construction have this
/// form, so composition and inversion are exact.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedPermutation {
    pub perm: Vec<usize>,
    pub signs: Vec<i8>,
}

impl SignedPermutation {
    pub fn identity(n: usize) -> Self {
        SignedPermutation {
            perm: (0..n).collect(),
            signs: vec![1; n],
        }
    }

    pub fn new(perm: Vec<usize>, signs: Vec<i8>) -> Result<Self> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &p in &perm {
            if p >= n || seen[p] {
                return Err(Error::Format(format!("invalid permutation {perm:?}")));
            }
            seen[p] = true;
        }
        if signs.len() != n || signs.iter().any(|s| *s != 1 && *s != -1) {
            return Err(Error::Format(format!("invalid signs {signs:?}")));
        }
        Ok(SignedPermutation { perm, signs })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(i, &p)| i == p) && self.signs.iter().all(|&s| s == 1)
    }

    /// Sign of the permutation times the product of the axis signs.
    pub fn determinant(&self) -> i8 {
        let mut visited = vec![false; self.dim()];
        let mut sign = 1i8;
        for start in 0..self.dim() {
            if visited[start] {
                continue;
            }
            let mut len = 0;
            let mut i = start;
            while !visited[i] {
                visited[i] = true;
                i = self.perm[i];
                len += 1;
            }
            if len % 2 == 0 {
                sign = -sign;
            }
        }
        for &s in &self.signs {
            sign *= s;
        }
        sign
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| self.signs[i] as f64 * x[self.perm[i]])
            .collect()
    }

    /// self after other: (self ∘ other)(x) = self(other(x)).
    pub fn compose(&self, other: &SignedPermutation) -> SignedPermutation {
        let n = self.dim();
        let mut perm = vec![0usize; n];
        let mut signs = vec![1i8; n];
        for i in 0..n {
            let j = self.perm[i];
            perm[i] = other.perm[j];
            signs[i] = self.signs[i] * other.signs[j];
        }
        SignedPermutation { perm, signs }
    }

    pub fn inverse(&self) -> SignedPermutation {
        let n = self.dim();
        let mut perm = vec![0usize; n];
        let mut signs = vec![1i8; n];
        for i in 0..n {
            perm[self.perm[i]] = i;
            signs[self.perm[i]] = self.signs[i];
        }
        SignedPermutation { perm, signs }
    }

    /// Image of a box (as a box; signed permutations map axis boxes to
    /// axis boxes).
    pub fn apply_box(&self, b: &AxisBox) -> AxisBox {
        let n = self.dim();
        let mut lo = vec![0.0; n];
        let mut hi = vec![0.0; n];
        for i in 0..n {
            let (a, s) = (self.perm[i], self.signs[i]);
            if s == 1 {
                lo[i] = b.lo[a];
                hi[i] = b.hi[a];
            } else {
                lo[i] = -b.hi[a];
                hi[i] = -b.lo[a];
            }
        }
        AxisBox { lo, hi }
    }
}

/// A similarity x ↦ scale · rot(x) + shift with a signed-permutation
/// rotation part.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    pub scale: f64,
    pub rot: SignedPermutation,
    pub shift: Vec<f64>,
}

impl Similarity {
    pub fn identity(n: usize) -> Self {
        Similarity {
            scale: 1.0,
            rot: SignedPermutation::identity(n),
            shift: vec![0.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.rot.dim()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rot
            .apply(x)
            .iter()
            .zip(&self.shift)
            .map(|(r, t)| self.scale * r + t)
            .collect()
    }

    /// self after other.
    pub fn compose(&self, other: &Similarity) -> Similarity {
        let rotated = self.rot.apply(&other.shift);
        Similarity {
            scale: self.scale * other.scale,
            rot: self.rot.compose(&other.rot),
            shift: rotated
                .iter()
                .zip(&self.shift)
                .map(|(r, t)| self.scale * r + t)
                .collect(),
        }
    }

    pub fn inverse(&self) -> Similarity {
        let inv_rot = self.rot.inverse();
        let back = inv_rot.apply(&self.shift);
        Similarity {
            scale: 1.0 / self.scale,
            rot: inv_rot,
            shift: back.iter().map(|b| -b / self.scale).collect(),
        }
    }

    /// Image of a box under the similarity, again an axis box.
    pub fn apply_box(&self, b: &AxisBox) -> AxisBox {
        let rb = self.rot.apply_box(b);
        AxisBox {
            lo: rb
                .lo
                .iter()
                .zip(&self.shift)
                .map(|(l, t)| self.scale * l + t)
                .collect(),
            hi: rb
                .hi
                .iter()
                .zip(&self.shift)
                .map(|(h, t)| self.scale * h + t)
                .collect(),
        }
    }
}

/// Diagonal-positive affine map x ↦ diag(scales) · x + shift. This is the
/// exterior map T of a generating map and the canonical map between two
/// axis boxes with corresponding corners.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagAffine {
    pub scales: Vec<f64>,
    pub shift: Vec<f64>,
}

impl DiagAffine {
    /// The unique diagonal-positive affine map carrying `from` onto `to`.
    pub fn box_map(from: &AxisBox, to: &AxisBox) -> DiagAffine {
        let scales: Vec<f64> = (0..from.dim())
            .map(|a| to.extent(a) / from.extent(a))
            .collect();
        let shift = (0..from.dim())
            .map(|a| to.lo[a] - scales[a] * from.lo[a])
            .collect();
        DiagAffine { scales, shift }
    }

    pub fn identity(n: usize) -> DiagAffine {
        DiagAffine {
            scales: vec![1.0; n],
            shift: vec![0.0; n],
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.scales.iter().zip(&self.shift))
            .map(|(&xi, (&s, &t))| s * xi + t)
            .collect()
    }

    pub fn apply_box(&self, b: &AxisBox) -> AxisBox {
        AxisBox {
            lo: self.apply(&b.lo),
            hi: self.apply(&b.hi),
        }
    }

    pub fn inverse(&self) -> DiagAffine {
        let scales: Vec<f64> = self.scales.iter().map(|s| 1.0 / s).collect();
        let shift = self
            .shift
            .iter()
            .zip(&scales)
            .map(|(t, s)| -t * s)
            .collect();
        DiagAffine { scales, shift }
    }

    /// Jacobian as a dense row-major matrix.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        let n = self.scales.len();
        let mut m = vec![vec![0.0; n]; n];
        for a in 0..n {
            m[a][a] = self.scales[a];
        }
        m
    }
}

/// A general affine map with a dense linear part, used for the per-hole
/// boundary prescriptions and for the pieces of PL moves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    /// Row-major n×n linear part.
    pub linear: Vec<Vec<f64>>,
    pub shift: Vec<f64>,
}

impl AffineMap {
    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.linear
            .iter()
            .zip(&self.shift)
            .map(|(row, t)| row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + t)
            .collect()
    }

    pub fn from_similarity(s: &Similarity) -> AffineMap {
        let n = s.dim();
        let mut linear = vec![vec![0.0; n]; n];
        for i in 0..n {
            linear[i][s.rot.perm[i]] = s.scale * s.rot.signs[i] as f64;
        }
        AffineMap {
            linear,
            shift: s.shift.clone(),
        }
    }

    pub fn from_diag(d: &DiagAffine) -> AffineMap {
        AffineMap {
            linear: d.matrix(),
            shift: d.shift.clone(),
        }
    }

    /// self after other.
    pub fn compose(&self, other: &AffineMap) -> AffineMap {
        let n = self.dim();
        let mut linear = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                linear[i][j] = (0..n).map(|k| self.linear[i][k] * other.linear[k][j]).sum();
            }
        }
        let shift = self
            .apply(&other.shift)
            .iter()
            .copied()
            .collect();
        AffineMap { linear, shift }
    }

    pub fn det(&self) -> f64 {
        det(&self.linear)
    }
}

/// Determinant by Gaussian elimination with partial pivoting; n is tiny.
pub fn det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut d = 1.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[piv][col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            a.swap(piv, col);
            d = -d;
        }
        d *= a[col][col];
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    d
}

/// Solve A x = b by Gaussian elimination with partial pivoting.
pub fn solve(a_in: &[Vec<f64>], b_in: &[f64]) -> Option<Vec<f64>> {
    let n = a_in.len();
    let mut a = a_in.to_vec();
    let mut b = b_in.to_vec();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col] == 0.0 {
            return None;
        }
        a.swap(piv, col);
        b.swap(piv, col);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    Positive,
    Negative,
    Degenerate,
}

/// Orientation of the simplex spanned by `vertices` (n+1 points in R^n):
/// sign of the determinant of edge vectors from vertex 0, with a relative
/// degeneracy threshold scaled by the longest edge.
pub fn simplex_orientation(vertices: &[Vec<f64>]) -> Orientation {
    let n = vertices.len() - 1;
    let edges: Vec<Vec<f64>> = (1..=n)
        .map(|i| {
            (0..n)
                .map(|a| vertices[i][a] - vertices[0][a])
                .collect::<Vec<f64>>()
        })
        .collect();
    let d = det(&edges);
    let scale = edges
        .iter()
        .map(|e| e.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0f64, f64::max)
        .max(1e-300);
    if d.abs() <= DEGENERACY_TOL * scale.powi(n as i32) {
        Orientation::Degenerate
    } else if d > 0.0 {
        Orientation::Positive
    } else {
        Orientation::Negative
    }
}

/// Unsigned volume of a simplex.
pub fn simplex_volume(vertices: &[Vec<f64>]) -> f64 {
    let n = vertices.len() - 1;
    let edges: Vec<Vec<f64>> = (1..=n)
        .map(|i| {
            (0..n)
                .map(|a| vertices[i][a] - vertices[0][a])
                .collect::<Vec<f64>>()
        })
        .collect();
    let mut fact = 1.0;
    for k in 2..=n {
        fact *= k as f64;
    }
    det(&edges).abs() / fact
}

/// An affine piece defined by a correspondence of simplex vertices: the
/// domain simplex maps onto the target simplex vertexwise.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AffinePiece {
    pub dom: Vec<Vec<f64>>,
    pub tar: Vec<Vec<f64>>,
    #[serde(skip)]
    cached: std::sync::OnceLock<AffineMap>,
}

impl PartialEq for AffinePiece {
    fn eq(&self, other: &Self) -> bool {
        self.dom == other.dom && self.tar == other.tar
    }
}

impl AffinePiece {
    pub fn new(dom: Vec<Vec<f64>>, tar: Vec<Vec<f64>>) -> Self {
        AffinePiece {
            dom,
            tar,
            cached: std::sync::OnceLock::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dom[0].len()
    }

    /// The affine map determined by the vertex correspondence.
    pub fn affine(&self) -> &AffineMap {
        self.cached.get_or_init(|| {
            let n = self.dim();
            // Columns of the linear part solve E_dom^T · row_i = e_tar rows.
            let dom_edges: Vec<Vec<f64>> = (1..=n)
                .map(|i| (0..n).map(|a| self.dom[i][a] - self.dom[0][a]).collect())
                .collect();
            // We need A with A · dom_edge_k = tar_edge_k for all k. Solve per
            // output coordinate: dom_edges (as rows) · a_row = tar component.
            let mut linear = vec![vec![0.0; n]; n];
            for out in 0..n {
                let rhs: Vec<f64> = (1..=n)
                    .map(|i| self.tar[i][out] - self.tar[0][out])
                    .collect();
                let row = solve(&dom_edges, &rhs).unwrap_or_else(|| vec![f64::NAN; n]);
                linear[out] = row;
            }
            let shift: Vec<f64> = (0..n)
                .map(|out| {
                    self.tar[0][out]
                        - (0..n).map(|a| linear[out][a] * self.dom[0][a]).sum::<f64>()
                })
                .collect();
            AffineMap { linear, shift }
        })
    }

    /// Barycentric coordinates of x with respect to the domain simplex,
    /// with one step of iterative refinement (long compositions of badly
    /// conditioned cells otherwise accumulate visible drift).
    pub fn barycentric(&self, x: &[f64]) -> Option<Vec<f64>> {
        let n = self.dim();
        // Solve M λ = rhs where column c of M is the edge vector to vertex
        // c+1 (row r = coordinate r).
        let m: Vec<Vec<f64>> = (0..n)
            .map(|r| (0..n).map(|c| self.dom[c + 1][r] - self.dom[0][r]).collect())
            .collect();
        let rhs: Vec<f64> = (0..n).map(|a| x[a] - self.dom[0][a]).collect();
        let mut lam = solve(&m, &rhs)?;
        let residual: Vec<f64> = (0..n)
            .map(|r| rhs[r] - (0..n).map(|c| m[r][c] * lam[c]).sum::<f64>())
            .collect();
        if let Some(corr) = solve(&m, &residual) {
            for (l, c) in lam.iter_mut().zip(&corr) {
                *l += c;
            }
        }
        let lam0 = 1.0 - lam.iter().sum::<f64>();
        let mut out = Vec::with_capacity(n + 1);
        out.push(lam0);
        out.extend(lam);
        Some(out)
    }

    /// Whether x lies in the closed domain simplex, within tolerance.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self.barycentric(x) {
            Some(lam) => lam.iter().all(|&l| l >= -tol),
            None => false,
        }
    }

    /// Apply the piece by barycentric interpolation of the target vertices.
    /// Numerically preferable to the assembled affine map: the output error
    /// scales with the target simplex size, which matters when a cell maps
    /// a large region onto a tiny one deep in a composition.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let lam = match self.barycentric(x) {
            Some(l) => l,
            None => return self.affine().apply(x),
        };
        let n = self.dim();
        let mut y = vec![0.0; n];
        for (l, v) in lam.iter().zip(&self.tar) {
            for a in 0..n {
                y[a] += l * v[a];
            }
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_applies() {
        let s = Similarity::identity(2);
        assert_eq!(s.apply(&[0.3, 0.7]), vec![0.3, 0.7]);
    }

    #[test]
    fn quarter_turn_with_shift() {
        // scale 1/2, rot 90° (output axis 0 takes -x2, output axis 1 takes x1),
        // shift (1, 0): the point (1, 0) maps to (1, 0.5).
        let rot = SignedPermutation::new(vec![1, 0], vec![-1, 1]).unwrap();
        assert_eq!(rot.determinant(), 1);
        let s = Similarity {
            scale: 0.5,
            rot,
            shift: vec![1.0, 0.0],
        };
        let y = s.apply(&[1.0, 0.0]);
        assert!((y[0] - 1.0).abs() < 1e-15 && (y[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn orientation_examples() {
        let pos = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let neg = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let dgn = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]];
        assert_eq!(simplex_orientation(&pos), Orientation::Positive);
        assert_eq!(simplex_orientation(&neg), Orientation::Negative);
        assert_eq!(simplex_orientation(&dgn), Orientation::Degenerate);
    }

    #[test]
    fn affine_piece_reproduces_vertices() {
        let piece = AffinePiece::new(
            vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![0.0, 3.0]],
            vec![vec![1.0, 1.0], vec![1.0, 5.0], vec![-2.0, 1.0]],
        );
        for (d, t) in piece.dom.iter().zip(&piece.tar) {
            let y = piece.affine().apply(d);
            for (a, b) in y.iter().zip(t) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    fn arb_signed_perm(n: usize) -> impl Strategy<Value = SignedPermutation> {
        (Just(n), proptest::collection::vec(any::<bool>(), n), any::<u64>()).prop_map(
            |(n, flips, seed)| {
                // Fisher-Yates from the seed for a deterministic permutation.
                let mut perm: Vec<usize> = (0..n).collect();
                let mut state = seed | 1;
                for i in (1..n).rev() {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    let j = (state >> 33) as usize % (i + 1);
                    perm.swap(i, j);
                }
                let signs = flips.iter().map(|&f| if f { -1 } else { 1 }).collect();
                SignedPermutation { perm, signs }
            },
        )
    }

    fn arb_similarity(n: usize) -> impl Strategy<Value = Similarity> {
        (
            0.1f64..2.0,
            arb_signed_perm(n),
            proptest::collection::vec(-3.0f64..3.0, n),
        )
            .prop_map(|(scale, rot, shift)| Similarity { scale, rot, shift })
    }

    proptest! {
        #[test]
        fn compose_then_invert_is_identity(s in arb_similarity(3), x in proptest::collection::vec(-2.0f64..2.0, 3)) {
            let id = s.compose(&s.inverse());
            let y = id.apply(&x);
            for (a, b) in y.iter().zip(&x) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn composition_matches_pointwise(s1 in arb_similarity(3), s2 in arb_similarity(3), x in proptest::collection::vec(-2.0f64..2.0, 3)) {
            let both = s1.compose(&s2).apply(&x);
            let seq = s1.apply(&s2.apply(&x));
            for (a, b) in both.iter().zip(&seq) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn box_image_matches_extents(s in arb_similarity(3)) {
            // The image of a box is a box whose extents are the scaled,
            // permuted input extents.
            let b = AxisBox::new(vec![0.0, 0.0, 0.0], vec![1.0, 2.0, 3.0]).unwrap();
            let image = s.apply_box(&b);
            for i in 0..3 {
                let expect = s.scale * b.extent(s.rot.perm[i]);
                prop_assert!((image.extent(i) - expect).abs() < 1e-12);
            }
            // Spot-check corners land inside the image box.
            for pattern in 0..8 {
                let c = s.apply(&b.corner(pattern));
                prop_assert!(image.contains_point(&c, 1e-9));
            }
        }
    }
}
