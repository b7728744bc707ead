//! Level-set description of the physical domain `Omega` inside the box `D`,
//! element classification and quadrature restricted to one side of the
//! interface.
//!
//! Cut elements are integrated on a recursive sub-triangulation: a
//! sub-triangle whose vertex and edge-midpoint samples of the level set all
//! agree in sign is kept whole; otherwise it is split into four until the
//! requested depth, where it is clipped along the zero line of the linear
//! interpolant of the level set. The boundary `phi = 0` belongs to `Omega`.

use thiserror::Error;

use crate::mesh::Mesh;
use crate::quadrature::TriangleRule;
use crate::scalar::{from_barycentric, midpoint, signed_area, Point, Real};

pub const MAX_CUT_DEPTH: usize = 12;
pub const DEFAULT_CUT_DEPTH: usize = 5;
pub const DEFAULT_BASE_ORDER: usize = 4;
pub const DEFAULT_SAMPLES: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("cut depth {0} exceeds the limit of {MAX_CUT_DEPTH}")]
    DepthTooLarge(usize),
    #[error("base quadrature order {0} unsupported (need 4..=6)")]
    UnsupportedOrder(usize),
}

/// Scalar field whose sublevel set `{phi <= 0}` is the physical domain.
pub trait LevelSet<T: Real>: Sync + Send {
    fn value(&self, p: Point<T>) -> T;
    fn gradient(&self, p: Point<T>) -> Point<T>;
}

/// `phi(x) = |x - c|^2 - r^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disk<T> {
    pub center: Point<T>,
    pub radius_sq: T,
}

impl<T: Real> Default for Disk<T> {
    /// The disk of radius `1/sqrt(2)` centred at the origin.
    fn default() -> Self {
        Self { center: [T::zero(); 2], radius_sq: T::lit(0.5) }
    }
}

impl<T: Real> LevelSet<T> for Disk<T> {
    #[inline]
    fn value(&self, p: Point<T>) -> T {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        dx * dx + dy * dy - self.radius_sq
    }

    #[inline]
    fn gradient(&self, p: Point<T>) -> Point<T> {
        let two = T::lit(2.0);
        [two * (p[0] - self.center[0]), two * (p[1] - self.center[1])]
    }
}

/// `x^2 + y^2 - 1/2`.
pub fn phi<T: Real>(p: Point<T>) -> T {
    Disk::default().value(p)
}

/// Indicator of the fictitious part `D1`: 0 where `phi <= 0`, 1 elsewhere.
pub fn xi<T: Real, L: LevelSet<T>>(levelset: &L, p: Point<T>) -> T {
    if in_omega(levelset.value(p)) {
        T::zero()
    } else {
        T::one()
    }
}

#[inline]
fn in_omega<T: Real>(phi: T) -> bool {
    phi <= T::zero()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementClass {
    /// Entirely inside `Omega`.
    Inside,
    /// Entirely inside `D1 = D \ Omega`.
    Outside,
    /// Intersects the interface.
    Cut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Omega,
    D1,
}

impl Side {
    fn contains<T: Real>(self, phi: T) -> bool {
        match self {
            Side::Omega => in_omega(phi),
            Side::D1 => !in_omega(phi),
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::Omega => Side::D1,
            Side::D1 => Side::Omega,
        }
    }
}

/// Samples `phi` on a barycentric lattice with `samples` subdivisions per
/// edge (rounded up to an even number so edge midpoints are included).
pub fn classify<T: Real, L: LevelSet<T>>(tri: &[Point<T>; 3], levelset: &L, samples: usize) -> ElementClass {
    let s = samples.max(2).div_ceil(2) * 2;
    let inv = T::one() / T::from_usize_lossy(s);
    // Inside and Outside need strict signs; an exact zero makes the element Cut.
    let (mut any_nonpos, mut any_nonneg) = (false, false);
    for i in 0..=s {
        for j in 0..=(s - i) {
            let l1 = T::from_usize_lossy(i) * inv;
            let l2 = T::from_usize_lossy(j) * inv;
            let value = levelset.value(from_barycentric(tri, [T::one() - l1 - l2, l1, l2]));
            any_nonpos |= value <= T::zero();
            any_nonneg |= value >= T::zero();
            if any_nonpos && any_nonneg {
                return ElementClass::Cut;
            }
        }
    }
    if any_nonneg {
        ElementClass::Outside
    } else {
        ElementClass::Inside
    }
}

/// Sub-triangles covering `tri ∩ side` (up to the linearised interface).
pub fn cut_pieces<T: Real, L: LevelSet<T>>(
    tri: &[Point<T>; 3],
    levelset: &L,
    side: Side,
    depth: usize,
) -> Result<Vec<[Point<T>; 3]>, GeometryError> {
    if depth > MAX_CUT_DEPTH {
        return Err(GeometryError::DepthTooLarge(depth));
    }
    match classify(tri, levelset, DEFAULT_SAMPLES) {
        ElementClass::Inside => Ok(if side == Side::Omega { vec![*tri] } else { vec![] }),
        ElementClass::Outside => Ok(if side == Side::D1 { vec![*tri] } else { vec![] }),
        ElementClass::Cut => {
            let mut out = Vec::new();
            let values = tri.map(|p| levelset.value(p));
            refine(tri, values, 0, depth, levelset, side, &mut out);
            Ok(out)
        }
    }
}

fn refine<T: Real, L: LevelSet<T>>(
    tri: &[Point<T>; 3],
    values: [T; 3],
    level: usize,
    depth: usize,
    levelset: &L,
    side: Side,
    out: &mut Vec<[Point<T>; 3]>,
) {
    let mids = [midpoint(tri[0], tri[1]), midpoint(tri[1], tri[2]), midpoint(tri[2], tri[0])];
    let mid_values = mids.map(|p| levelset.value(p));
    // Level 0 is already known to be cut by the lattice classification.
    if level > 0 {
        let first = in_omega(values[0]);
        if values.iter().chain(&mid_values).all(|&v| in_omega(v) == first) {
            if side.contains(values[0]) {
                out.push(*tri);
            }
            return;
        }
    }
    if level == depth {
        clip_linear(tri, values, side, out);
        return;
    }
    let [a, b, c] = *tri;
    let [mab, mbc, mca] = mids;
    let [fa, fb, fc] = values;
    let [fab, fbc, fca] = mid_values;
    refine(&[a, mab, mca], [fa, fab, fca], level + 1, depth, levelset, side, out);
    refine(&[mab, b, mbc], [fab, fb, fbc], level + 1, depth, levelset, side, out);
    refine(&[mca, mbc, c], [fca, fbc, fc], level + 1, depth, levelset, side, out);
    refine(&[mab, mbc, mca], [fab, fbc, fca], level + 1, depth, levelset, side, out);
}

/// Keeps the part of `tri` where the linear interpolant of `values` lies on
/// `side`, fan-triangulated. Intersection points are computed from the
/// lower-indexed end of each edge, so both sides produce the same cut line.
fn clip_linear<T: Real>(tri: &[Point<T>; 3], values: [T; 3], side: Side, out: &mut Vec<[Point<T>; 3]>) {
    let mut poly: Vec<Point<T>> = Vec::with_capacity(4);
    for k in 0..3 {
        let (pa, pb) = (tri[k], tri[(k + 1) % 3]);
        let (fa, fb) = (values[k], values[(k + 1) % 3]);
        let (ina, inb) = (side.contains(fa), side.contains(fb));
        if ina {
            poly.push(pa);
        }
        if ina != inb {
            let t = fa / (fa - fb);
            poly.push([pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]);
        }
    }
    for i in 1..poly.len().saturating_sub(1) {
        let piece = [poly[0], poly[i], poly[i + 1]];
        if signed_area(&piece) > T::zero() {
            out.push(piece);
        }
    }
}

/// Quadrature points and weights for one side of one triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct CutQuadrature<T> {
    pub points: Vec<Point<T>>,
    pub weights: Vec<T>,
    pub depth: usize,
}

impl<T: Real> CutQuadrature<T> {
    pub fn total_weight(&self) -> T {
        self.weights.iter().copied().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    fn from_pieces(pieces: &[[Point<T>; 3]], rule: &TriangleRule<T>, depth: usize) -> Self {
        let mut points = Vec::with_capacity(pieces.len() * rule.len());
        let mut weights = Vec::with_capacity(pieces.len() * rule.len());
        for piece in pieces {
            for (p, w) in rule.map_to(piece) {
                points.push(p);
                weights.push(w);
            }
        }
        Self { points, weights, depth }
    }
}

fn base_rule<T: Real>(base_order: usize) -> Result<TriangleRule<T>, GeometryError> {
    if base_order < 4 {
        return Err(GeometryError::UnsupportedOrder(base_order));
    }
    TriangleRule::with_degree(base_order).ok_or(GeometryError::UnsupportedOrder(base_order))
}

/// Quadrature for `tri ∩ side` with the base rule of exactness `base_order`
/// applied on each kept sub-triangle.
pub fn cut_rule<T: Real, L: LevelSet<T>>(
    tri: &[Point<T>; 3],
    levelset: &L,
    side: Side,
    depth: usize,
    base_order: usize,
) -> Result<CutQuadrature<T>, GeometryError> {
    let rule = base_rule(base_order)?;
    let pieces = cut_pieces(tri, levelset, side, depth)?;
    Ok(CutQuadrature::from_pieces(&pieces, &rule, depth))
}

/// Per-element classification and cached interface pieces for a whole mesh.
#[derive(Debug, Clone)]
pub struct MeshGeometry<T, L> {
    pub levelset: L,
    pub depth: usize,
    pub classes: Vec<ElementClass>,
    /// `[Omega pieces, D1 pieces]` for cut elements only.
    cut_pieces: Vec<Option<[Vec<[Point<T>; 3]>; 2]>>,
}

impl<T: Real, L: LevelSet<T>> MeshGeometry<T, L> {
    pub fn new(mesh: &Mesh<T>, levelset: L, depth: usize) -> Result<Self, GeometryError> {
        if depth > MAX_CUT_DEPTH {
            return Err(GeometryError::DepthTooLarge(depth));
        }
        let mut classes = Vec::with_capacity(mesh.n_triangles());
        let mut pieces = Vec::with_capacity(mesh.n_triangles());
        for t in 0..mesh.n_triangles() {
            let tri = mesh.triangle_coords(t);
            let class = classify(&tri, &levelset, DEFAULT_SAMPLES);
            classes.push(class);
            pieces.push(if class == ElementClass::Cut {
                Some([
                    cut_pieces(&tri, &levelset, Side::Omega, depth)?,
                    cut_pieces(&tri, &levelset, Side::D1, depth)?,
                ])
            } else {
                None
            });
        }
        Ok(Self { levelset, depth, classes, cut_pieces: pieces })
    }

    /// Sub-triangles of element `t` lying on `side`.
    pub fn pieces(&self, mesh: &Mesh<T>, t: usize, side: Side) -> Vec<[Point<T>; 3]> {
        match (self.classes[t], side) {
            (ElementClass::Inside, Side::Omega) | (ElementClass::Outside, Side::D1) => vec![mesh.triangle_coords(t)],
            (ElementClass::Inside, Side::D1) | (ElementClass::Outside, Side::Omega) => vec![],
            (ElementClass::Cut, _) => {
                let cached = self.cut_pieces[t].as_ref().expect("cut element without pieces");
                cached[side as usize].clone()
            }
        }
    }

    /// Calls `f(point, weight)` for every quadrature point of `t ∩ side`.
    pub fn for_each_point(&self, mesh: &Mesh<T>, t: usize, side: Side, rule: &TriangleRule<T>, mut f: impl FnMut(Point<T>, T)) {
        match (self.classes[t], side) {
            (ElementClass::Inside, Side::Omega) | (ElementClass::Outside, Side::D1) => {
                for (p, w) in rule.map_to(&mesh.triangle_coords(t)) {
                    f(p, w);
                }
            }
            (ElementClass::Inside, Side::D1) | (ElementClass::Outside, Side::Omega) => {}
            (ElementClass::Cut, _) => {
                let cached = self.cut_pieces[t].as_ref().expect("cut element without pieces");
                for piece in &cached[side as usize] {
                    for (p, w) in rule.map_to(piece) {
                        f(p, w);
                    }
                }
            }
        }
    }

    pub fn rule(&self, mesh: &Mesh<T>, t: usize, side: Side, base_order: usize) -> Result<CutQuadrature<T>, GeometryError> {
        let rule = base_rule(base_order)?;
        Ok(CutQuadrature::from_pieces(&self.pieces(mesh, t, side), &rule, self.depth))
    }

    /// Measure of `side` summed over all elements.
    pub fn side_area(&self, mesh: &Mesh<T>, side: Side) -> T {
        (0..mesh.n_triangles())
            .map(|t| self.pieces(mesh, t, side).iter().map(signed_area).sum::<T>())
            .sum()
    }

    pub fn count(&self, class: ElementClass) -> usize {
        self.classes.iter().filter(|&&c| c == class).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    #[test]
    fn phi_values() {
        assert_eq!(phi([0.0, 0.0]), -0.5);
        assert_eq!(phi([1.0, 0.0]), 0.5);
        assert!(phi([FRAC_1_SQRT_2, 0.0]).abs() < 1e-15);
        assert_eq!(Disk::default().gradient([0.5, -1.0]), [1.0, -2.0]);
    }

    #[test]
    fn xi_values() {
        let d = Disk::default();
        assert_eq!(xi(&d, [0.0, 0.0]), 0.0);
        assert_eq!(xi(&d, [0.9, 0.9]), 1.0);
        // Exact zero of phi is assigned to Omega.
        let on_s = Disk { center: [0.0, 0.0], radius_sq: 0.25 };
        assert_eq!(xi(&on_s, [0.5, 0.0]), 0.0);
    }

    #[test]
    fn classify_examples() {
        let d = Disk::default();
        let inside = [[0.0, 0.0], [0.1, 0.0], [0.0, 0.1]];
        let outside = [[0.9, 0.9], [1.0, 0.9], [0.9, 1.0]];
        let cut = [[0.6, 0.0], [0.8, 0.0], [0.6, 0.2]];
        assert_eq!(classify(&inside, &d, 16), ElementClass::Inside);
        assert_eq!(classify(&outside, &d, 16), ElementClass::Outside);
        assert_eq!(classify(&cut, &d, 16), ElementClass::Cut);
    }

    #[test]
    fn classify_sees_interior_dip() {
        // Vertices outside a small disk that sits in the middle of the triangle.
        let d = Disk { center: [0.3, 0.3], radius_sq: 0.01 };
        let tri = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(tri.iter().all(|&p| d.value(p) > 0.0));
        assert_eq!(classify(&tri, &d, 16), ElementClass::Cut);
        assert_eq!(classify(&tri, &d, 0), ElementClass::Outside);
    }

    #[test]
    fn inside_rule_is_standard() {
        let d = Disk::default();
        let tri = [[0.0, 0.0], [0.1, 0.0], [0.0, 0.1]];
        let q = cut_rule(&tri, &d, Side::Omega, 5, 4).unwrap();
        let std_rule = TriangleRule::<f64>::with_degree(4).unwrap();
        let expected: Vec<_> = std_rule.map_to(&tri).collect();
        assert_eq!(q.points.len(), expected.len());
        for (i, (p, w)) in expected.iter().enumerate() {
            assert_eq!(q.points[i], *p);
            assert_eq!(q.weights[i], *w);
        }
        assert!((q.total_weight() - 0.005).abs() < 1e-17);
        assert!(cut_rule(&tri, &d, Side::D1, 5, 4).unwrap().is_empty());
    }

    #[test]
    fn rejects_bad_depth_and_order() {
        let d = Disk::default();
        let tri = [[0.6, 0.0], [0.8, 0.0], [0.6, 0.2]];
        assert_eq!(cut_rule(&tri, &d, Side::D1, 13, 4), Err(GeometryError::DepthTooLarge(13)));
        assert_eq!(cut_rule(&tri, &d, Side::D1, 3, 2), Err(GeometryError::UnsupportedOrder(2)));
    }

    #[test]
    fn cut_points_inside_triangle_with_positive_weights() {
        let d = Disk::default();
        let tri = [[0.6, 0.0], [0.8, 0.0], [0.6, 0.2]];
        for side in [Side::Omega, Side::D1] {
            let q = cut_rule(&tri, &d, side, 4, 5).unwrap();
            assert!(!q.is_empty());
            for (p, &w) in q.points.iter().zip(&q.weights) {
                assert!(w >= 0.0);
                let l = [
                    crate::scalar::cross2(p.to_owned(), tri[1], tri[2]),
                    crate::scalar::cross2(tri[0], *p, tri[2]),
                    crate::scalar::cross2(tri[0], tri[1], *p),
                ];
                assert!(l.iter().all(|&x| x >= -1e-15));
            }
        }
    }

    #[test]
    fn partition_and_area_on_n20() {
        let mesh = Mesh::<f64>::build_uniform(20).unwrap().alfeld_split();
        let geo = MeshGeometry::new(&mesh, Disk::default(), 5).unwrap();
        for t in 0..mesh.n_triangles() {
            let om = geo.rule(&mesh, t, Side::Omega, 4).unwrap().total_weight();
            let d1 = geo.rule(&mesh, t, Side::D1, 4).unwrap().total_weight();
            let area = mesh.area(t);
            assert!(((om + d1 - area) / area).abs() < 1e-12, "element {t}");
            match geo.classes[t] {
                ElementClass::Inside => assert_eq!(d1, 0.0),
                ElementClass::Outside => assert_eq!(om, 0.0),
                ElementClass::Cut => {}
            }
        }
        let omega = geo.side_area(&mesh, Side::Omega);
        let d1 = geo.side_area(&mesh, Side::D1);
        assert!((omega - PI / 2.0).abs() < 1e-4, "omega area {omega}");
        assert!((d1 - (4.0 - PI / 2.0)).abs() < 1e-4, "d1 area {d1}");
    }

    #[test]
    fn area_error_decreases_with_depth() {
        let mesh = Mesh::<f64>::build_uniform(20).unwrap().alfeld_split();
        let errors: Vec<f64> = (2..=6)
            .map(|depth| {
                let geo = MeshGeometry::new(&mesh, Disk::default(), depth).unwrap();
                (geo.side_area(&mesh, Side::Omega) - PI / 2.0).abs()
            })
            .collect();
        for w in errors.windows(2) {
            assert!(w[1] <= w[0] + 1e-14, "{errors:?}");
        }
    }

    #[test]
    fn single_precision_geometry() {
        let mesh = Mesh::<f32>::build_uniform(10).unwrap().alfeld_split();
        let geo = MeshGeometry::new(&mesh, Disk::default(), 4).unwrap();
        let omega = geo.side_area(&mesh, Side::Omega);
        assert!((omega - std::f32::consts::FRAC_PI_2).abs() < 1e-3);
    }
}
