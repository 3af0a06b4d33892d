//! Simplicial decomposition of the frame between two nested boxes.
//!
//! For each of the 2n face directions, the frustum between the outer face
//! and the corresponding inner face is triangulated as a prism over the
//! Kuhn triangulation of the face: corresponding vertices of the two faces
//! are joined, and each (n-1)-simplex of the face pattern yields n
//! path simplices. Applying the same combinatorial pattern to the image
//! vertex sets makes the map simplicial. Whether this decomposition tiles
//! the frame for every nested pair is not proven here; the move validator
//! checks tiling volumes and orientations at runtime.

use crate::error::{Error, Result};
use crate::geometry::{simplex_orientation, AffinePiece, AxisBox, Orientation};

/// All permutations of `items` in lexicographic order.
fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (i, &head) in items.iter().enumerate() {
        let rest: Vec<usize> = items
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, &v)| v)
            .collect();
        for tail in permutations(&rest) {
            let mut p = vec![head];
            p.extend(tail);
            out.push(p);
        }
    }
    out
}

/// Vertex of a face of `bx` normal to `axis` at `side`, with the other
/// axes set per the hi-pattern `mask` (bit i of mask = axis others[i] hi).
fn face_vertex(bx: &AxisBox, axis: usize, side: usize, others: &[usize], mask: usize) -> Vec<f64> {
    let n = bx.dim();
    let mut x = vec![0.0; n];
    x[axis] = if side == 0 { bx.lo[axis] } else { bx.hi[axis] };
    for (i, &a) in others.iter().enumerate() {
        x[a] = if mask >> i & 1 == 1 { bx.hi[a] } else { bx.lo[a] };
    }
    x
}

/// Triangulate the frame outer\inner into prism cells; domain vertices are
/// the geometric box corners, target vertices are their images under the
/// supplied corner maps.
pub fn frusta_cells(
    outer: &AxisBox,
    inner: &AxisBox,
    outer_img: &dyn Fn(&[f64]) -> Vec<f64>,
    inner_img: &dyn Fn(&[f64]) -> Vec<f64>,
) -> Result<Vec<AffinePiece>> {
    let n = outer.dim();
    if n < 2 {
        return Err(Error::Format("frusta decomposition needs n >= 2".into()));
    }
    let mut cells = Vec::new();
    for axis in 0..n {
        let others: Vec<usize> = (0..n).filter(|a| *a != axis).collect();
        for side in 0..2 {
            let idx: Vec<usize> = (0..others.len()).collect();
            for perm in permutations(&idx) {
                // Kuhn path: start at the all-lo pattern, flip axes in perm
                // order; n vertex patterns per simplex of the face.
                let mut masks = Vec::with_capacity(n);
                let mut mask = 0usize;
                masks.push(mask);
                for &flip in &perm {
                    mask |= 1 << flip;
                    masks.push(mask);
                }
                // Face vertices on outer and inner boxes (domain), and their
                // images (target).
                let u_dom: Vec<Vec<f64>> = masks
                    .iter()
                    .map(|&m| face_vertex(outer, axis, side, &others, m))
                    .collect();
                let w_dom: Vec<Vec<f64>> = masks
                    .iter()
                    .map(|&m| face_vertex(inner, axis, side, &others, m))
                    .collect();
                let u_tar: Vec<Vec<f64>> = u_dom.iter().map(|v| outer_img(v)).collect();
                let w_tar: Vec<Vec<f64>> = w_dom.iter().map(|v| inner_img(v)).collect();
                // Path triangulation of the prism between the two faces.
                for k in 0..n {
                    let mut dom = Vec::with_capacity(n + 1);
                    let mut tar = Vec::with_capacity(n + 1);
                    for u in u_dom.iter().take(k + 1) {
                        dom.push(u.clone());
                    }
                    for w in w_dom.iter().skip(k) {
                        dom.push(w.clone());
                    }
                    for u in u_tar.iter().take(k + 1) {
                        tar.push(u.clone());
                    }
                    for w in w_tar.iter().skip(k) {
                        tar.push(w.clone());
                    }
                    match simplex_orientation(&dom) {
                        Orientation::Positive => {}
                        Orientation::Negative => {
                            let m = dom.len();
                            dom.swap(m - 1, m - 2);
                            tar.swap(m - 1, m - 2);
                        }
                        Orientation::Degenerate => {
                            return Err(Error::MoveValidationFailure {
                                move_kind: "frusta".into(),
                                detail: format!(
                                    "degenerate prism simplex on face axis {axis} side {side}"
                                ),
                            });
                        }
                    }
                    cells.push(AffinePiece::new(dom, tar));
                }
            }
        }
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::simplex_volume;

    #[test]
    fn two_d_frame_has_eight_triangles_and_tiles() {
        let outer = AxisBox::unit(2);
        let inner = AxisBox::new(vec![0.3, 0.5], vec![0.5, 0.7]).unwrap();
        let cells = frusta_cells(&outer, &inner, &|v| v.to_vec(), &|v| v.to_vec()).unwrap();
        assert_eq!(cells.len(), 8);
        let total: f64 = cells.iter().map(|c| simplex_volume(&c.dom)).sum();
        assert!((total - (1.0 - 0.04)).abs() < 1e-12);
    }

    #[test]
    fn three_d_frame_tiles() {
        let outer = AxisBox::new(vec![-1.0; 3], vec![1.0; 3]).unwrap();
        let inner = AxisBox::new(vec![-0.2, -0.3, 0.1], vec![0.4, 0.2, 0.6]).unwrap();
        let cells = frusta_cells(&outer, &inner, &|v| v.to_vec(), &|v| v.to_vec()).unwrap();
        assert_eq!(cells.len(), 36);
        let total: f64 = cells.iter().map(|c| simplex_volume(&c.dom)).sum();
        let expect = 8.0 - inner.volume();
        assert!(((total - expect) / expect).abs() < 1e-12, "{total} vs {expect}");
    }

    #[test]
    fn four_d_frame_tiles() {
        let outer = AxisBox::new(vec![0.0; 4], vec![1.0; 4]).unwrap();
        let inner = AxisBox::new(vec![0.2; 4], vec![0.7; 4]).unwrap();
        let cells = frusta_cells(&outer, &inner, &|v| v.to_vec(), &|v| v.to_vec()).unwrap();
        let total: f64 = cells.iter().map(|c| simplex_volume(&c.dom)).sum();
        let expect = 1.0 - inner.volume();
        assert!(((total - expect) / expect).abs() < 1e-10, "{total} vs {expect}");
    }
}
