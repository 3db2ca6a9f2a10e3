//! Structured triangulation of a rectangular design domain with tagged
//! boundary edges.

use std::collections::BTreeSet;

use thiserror::Error;

/// Absolute tolerance for deciding whether a point lies on a segment.
pub const GEOMETRIC_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("grid resolution must be at least 1x1, got {nx}x{ny}")]
    EmptyGrid { nx: usize, ny: usize },
    #[error("domain extents must be positive, got {width}x{height}")]
    BadDomain { width: f64, height: f64 },
    #[error("segment {0:?} does not lie on the domain boundary")]
    OffBoundary(Segment),
    #[error("segments {0:?} and {1:?} overlap")]
    Overlap(Segment, Segment),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    DirichletZero,
    NeumannTraction,
    NeumannFree,
}

/// Straight piece of the boundary between two points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub from: [f64; 2],
    pub to: [f64; 2],
}

impl Segment {
    pub fn new(from: [f64; 2], to: [f64; 2]) -> Self {
        Self { from, to }
    }

    /// Horizontal segment `[x0, x1] × {y}`.
    pub fn horizontal(x0: f64, x1: f64, y: f64) -> Self {
        Self::new([x0, y], [x1, y])
    }

    /// Vertical segment `{x} × [y0, y1]`.
    pub fn vertical(x: f64, y0: f64, y1: f64) -> Self {
        Self::new([x, y0], [x, y1])
    }

    pub fn length(&self) -> f64 {
        let dx = self.to[0] - self.from[0];
        let dy = self.to[1] - self.from[1];
        (dx * dx + dy * dy).sqrt()
    }

    /// Whether `p` lies on the (axis-aligned) segment.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let tol = GEOMETRIC_TOLERANCE;
        let (lo_x, hi_x) = min_max(self.from[0], self.to[0]);
        let (lo_y, hi_y) = min_max(self.from[1], self.to[1]);
        p[0] >= lo_x - tol && p[0] <= hi_x + tol && p[1] >= lo_y - tol && p[1] <= hi_y + tol
    }

    fn is_axis_aligned(&self) -> bool {
        (self.from[0] - self.to[0]).abs() <= GEOMETRIC_TOLERANCE
            || (self.from[1] - self.to[1]).abs() <= GEOMETRIC_TOLERANCE
    }

    /// Positive-length overlap with another segment.
    fn overlaps(&self, other: &Segment) -> bool {
        let (a0, a1) = min_max(self.from[0], self.to[0]);
        let (b0, b1) = min_max(other.from[0], other.to[0]);
        let (c0, c1) = min_max(self.from[1], self.to[1]);
        let (d0, d1) = min_max(other.from[1], other.to[1]);
        let ox = a1.min(b1) - a0.max(b0);
        let oy = c1.min(d1) - c0.max(d0);
        ox >= -GEOMETRIC_TOLERANCE
            && oy >= -GEOMETRIC_TOLERANCE
            && (ox > GEOMETRIC_TOLERANCE || oy > GEOMETRIC_TOLERANCE)
    }
}

fn min_max(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Rectangle `[0, width] × [0, height]` with boundary conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub width: f64,
    pub height: f64,
    pub dirichlet_segments: Vec<Segment>,
    pub traction_segments: Vec<Segment>,
    /// Force per unit length applied on the traction segments.
    pub traction: [f64; 2],
}

impl DomainSpec {
    /// The 2.4 × 0.8 beam clamped near both bottom corners and loaded
    /// downward at the bottom center.
    pub fn bridge() -> Self {
        Self {
            width: 2.4,
            height: 0.8,
            dirichlet_segments: vec![
                Segment::horizontal(0.0, 0.12, 0.0),
                Segment::horizontal(2.28, 2.4, 0.0),
            ],
            traction_segments: vec![Segment::horizontal(1.08, 1.32, 0.0)],
            traction: [0.0, -1.0],
        }
    }

    /// Unit square with no boundary conditions.
    pub fn unit_square() -> Self {
        Self {
            width: 1.0,
            height: 1.0,
            dirichlet_segments: Vec::new(),
            traction_segments: Vec::new(),
            traction: [0.0, 0.0],
        }
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    fn on_boundary(&self, p: [f64; 2]) -> bool {
        let tol = GEOMETRIC_TOLERANCE;
        let inside = p[0] >= -tol
            && p[0] <= self.width + tol
            && p[1] >= -tol
            && p[1] <= self.height + tol;
        inside
            && (p[0].abs() <= tol
                || (p[0] - self.width).abs() <= tol
                || p[1].abs() <= tol
                || (p[1] - self.height).abs() <= tol)
    }

    fn segment_on_boundary(&self, s: &Segment) -> bool {
        if !s.is_axis_aligned() || !self.on_boundary(s.from) || !self.on_boundary(s.to) {
            return false;
        }
        let tol = GEOMETRIC_TOLERANCE;
        let same_side = |f: &dyn Fn([f64; 2]) -> bool| f(s.from) && f(s.to);
        same_side(&|p| p[0].abs() <= tol)
            || same_side(&|p| (p[0] - self.width).abs() <= tol)
            || same_side(&|p| p[1].abs() <= tol)
            || same_side(&|p| (p[1] - self.height).abs() <= tol)
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        if !(self.width > 0.0 && self.height > 0.0) {
            return Err(MeshError::BadDomain {
                width: self.width,
                height: self.height,
            });
        }
        for list in [&self.dirichlet_segments, &self.traction_segments] {
            for s in list {
                if !self.segment_on_boundary(s) {
                    return Err(MeshError::OffBoundary(*s));
                }
            }
            for (i, a) in list.iter().enumerate() {
                for b in &list[i + 1..] {
                    if a.overlaps(b) {
                        return Err(MeshError::Overlap(*a, *b));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn traction_length(&self) -> f64 {
        self.traction_segments.iter().map(Segment::length).sum()
    }
}

/// How each grid cell is split into two triangles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiagonalPattern {
    /// Every cell split from lower-left to upper-right.
    #[default]
    Forward,
    /// Left half as `Forward`, right half split lower-right to upper-left,
    /// so the mesh is mirror symmetric about `x = width / 2` for even `nx`.
    Mirrored,
    /// Diagonal direction alternates cell by cell in a checkerboard; mirror
    /// symmetric for even `nx`.
    Alternating,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 2]>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    nx: usize,
    ny: usize,
}

/// Uniform `nx × ny` grid on the domain, each cell split along one diagonal.
///
/// Vertex `(i, j)` (column `i`, row `j`) has index `i * (ny + 1) + j`.
pub fn build_structured_mesh(
    spec: &DomainSpec,
    nx: usize,
    ny: usize,
    pattern: DiagonalPattern,
) -> Result<TriMesh, MeshError> {
    if nx == 0 || ny == 0 {
        return Err(MeshError::EmptyGrid { nx, ny });
    }
    spec.validate()?;

    let vid = |i: usize, j: usize| i * (ny + 1) + j;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for i in 0..=nx {
        let x = spec.width * i as f64 / nx as f64;
        for j in 0..=ny {
            vertices.push([x, spec.height * j as f64 / ny as f64]);
        }
    }

    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for i in 0..nx {
        let forward = match pattern {
            DiagonalPattern::Forward => true,
            DiagonalPattern::Mirrored => 2 * i < nx,
            DiagonalPattern::Alternating => true,
        };
        for j in 0..ny {
            let forward = match pattern {
                DiagonalPattern::Alternating => (i + j) % 2 == 0,
                _ => forward,
            };
            let (v00, v10, v01, v11) = (vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1));
            if forward {
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            } else {
                triangles.push([v00, v10, v01]);
                triangles.push([v10, v11, v01]);
            }
        }
    }

    // Boundary traversed counter-clockwise: bottom, right, top, left.
    let mut loop_edges = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        loop_edges.push([vid(i, 0), vid(i + 1, 0)]);
    }
    for j in 0..ny {
        loop_edges.push([vid(nx, j), vid(nx, j + 1)]);
    }
    for i in (0..nx).rev() {
        loop_edges.push([vid(i + 1, ny), vid(i, ny)]);
    }
    for j in (0..ny).rev() {
        loop_edges.push([vid(0, j + 1), vid(0, j)]);
    }

    let covered_by = |segments: &[Segment], e: [usize; 2]| {
        segments
            .iter()
            .any(|s| s.contains(vertices[e[0]]) && s.contains(vertices[e[1]]))
    };
    let boundary_edges = loop_edges
        .into_iter()
        .map(|e| {
            let tag = if covered_by(&spec.dirichlet_segments, e) {
                BoundaryTag::DirichletZero
            } else if covered_by(&spec.traction_segments, e) {
                BoundaryTag::NeumannTraction
            } else {
                BoundaryTag::NeumannFree
            };
            BoundaryEdge { vertices: e, tag }
        })
        .collect();

    Ok(TriMesh {
        vertices,
        triangles,
        boundary_edges,
        nx,
        ny,
    })
}

impl TriMesh {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn grid_shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn signed_area(&self, tri: usize) -> f64 {
        let [a, b, c] = self.triangles[tri].map(|v| self.vertices[v]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn edge_length(&self, edge: &BoundaryEdge) -> f64 {
        let [a, b] = edge.vertices.map(|v| self.vertices[v]);
        ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
    }

    pub fn edges_with_tag(&self, tag: BoundaryTag) -> impl Iterator<Item = &BoundaryEdge> {
        self.boundary_edges.iter().filter(move |e| e.tag == tag)
    }

    /// Vertices incident to a Dirichlet edge.
    pub fn dirichlet_vertex_set(&self) -> BTreeSet<usize> {
        self.edges_with_tag(BoundaryTag::DirichletZero)
            .flat_map(|e| e.vertices)
            .collect()
    }

    /// Index of the vertex at the mirrored position `(width - x, y)`.
    pub fn mirror_vertex(&self, v: usize) -> usize {
        let (i, j) = (v / (self.ny + 1), v % (self.ny + 1));
        (self.nx - i) * (self.ny + 1) + j
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn bridge(nx: usize, ny: usize) -> TriMesh {
        build_structured_mesh(&DomainSpec::bridge(), nx, ny, DiagonalPattern::Forward).unwrap()
    }

    #[test]
    fn smallest_grid() {
        let m = build_structured_mesh(&DomainSpec::unit_square(), 1, 1, Default::default()).unwrap();
        assert_eq!(m.num_vertices(), 4);
        assert_eq!(m.num_triangles(), 2);
        assert_eq!(m.boundary_edges.len(), 4);
    }

    #[test]
    fn counts_match_enumeration() {
        let m = bridge(60, 20);
        let mut brute = 0;
        for i in 0..=60 {
            for j in 0..=20 {
                let _ = (i, j);
                brute += 1;
            }
        }
        assert_eq!(m.num_vertices(), brute);
        assert_eq!(m.num_vertices(), 1281);
        assert_eq!(m.num_triangles(), 2400);
    }

    #[test]
    fn traction_tag_covers_center_bottom() {
        for (nx, ny) in [(20, 3), (40, 5), (60, 20)] {
            let m = bridge(nx, ny);
            let h = 2.4 / nx as f64;
            for e in &m.boundary_edges {
                let [a, b] = e.vertices.map(|v| m.vertices[v]);
                let expected = a[1] == 0.0
                    && b[1] == 0.0
                    && a[0].min(b[0]) >= 1.08 - 1e-12
                    && a[0].max(b[0]) <= 1.32 + 1e-12;
                assert_eq!(e.tag == BoundaryTag::NeumannTraction, expected);
            }
            let len: f64 = m
                .edges_with_tag(BoundaryTag::NeumannTraction)
                .map(|e| m.edge_length(e))
                .sum();
            assert!((len - 0.24).abs() < 1e-12, "nx={nx} h={h} len={len}");
        }
    }

    #[test]
    fn dirichlet_vertices_on_coarse_bridge() {
        let m = bridge(20, 4);
        let set = m.dirichlet_vertex_set();
        let xs: Vec<f64> = set.iter().map(|&v| m.vertices[v][0]).collect();
        assert_eq!(set.len(), 4);
        for &v in &set {
            assert_eq!(m.vertices[v][1], 0.0);
        }
        for x in [0.0, 0.12, 2.28, 2.4] {
            assert!(xs.iter().any(|&y| (y - x).abs() < 1e-12), "missing x={x}");
        }
    }

    #[test]
    fn no_dirichlet_segments_gives_empty_set() {
        let m = build_structured_mesh(&DomainSpec::unit_square(), 3, 2, Default::default()).unwrap();
        assert!(m.dirichlet_vertex_set().is_empty());
    }

    #[test]
    fn full_bottom_dirichlet_on_unit_square() {
        let mut spec = DomainSpec::unit_square();
        spec.dirichlet_segments.push(Segment::horizontal(0.0, 1.0, 0.0));
        let m = build_structured_mesh(&spec, 2, 2, Default::default()).unwrap();
        assert_eq!(m.dirichlet_vertex_set().len(), 3);
    }

    #[test]
    fn off_boundary_segment_is_rejected() {
        let mut spec = DomainSpec::bridge();
        spec.traction_segments.push(Segment::horizontal(1.0, 1.2, 0.4));
        assert!(matches!(
            build_structured_mesh(&spec, 20, 4, Default::default()),
            Err(MeshError::OffBoundary(_))
        ));
        let mut spec = DomainSpec::bridge();
        spec.dirichlet_segments.push(Segment::new([0.0, 0.0], [2.4, 0.8]));
        assert!(build_structured_mesh(&spec, 20, 4, Default::default()).is_err());
    }

    #[test]
    fn overlapping_segments_are_rejected() {
        let mut spec = DomainSpec::bridge();
        spec.dirichlet_segments.push(Segment::horizontal(0.06, 0.3, 0.0));
        assert!(matches!(spec.validate(), Err(MeshError::Overlap(..))));
    }

    #[test]
    fn zero_resolution_is_rejected() {
        assert!(build_structured_mesh(&DomainSpec::bridge(), 0, 4, Default::default()).is_err());
    }

    fn check_invariants(m: &TriMesh, spec: &DomainSpec) {
        for k in 0..m.num_triangles() {
            assert!(m.signed_area(k) > 0.0);
        }
        let area: f64 = (0..m.num_triangles()).map(|k| m.signed_area(k)).sum();
        assert!((area - spec.area()).abs() <= 1e-12 * spec.area());

        // Each boundary edge borders exactly one triangle; interior edges two.
        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &m.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edge_count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let boundary: Vec<(usize, usize)> = edge_count
            .iter()
            .filter(|(_, &c)| c == 1)
            .map(|(&e, _)| e)
            .collect();
        assert_eq!(boundary.len(), m.boundary_edges.len());
        for e in &m.boundary_edges {
            let [a, b] = e.vertices;
            assert_eq!(edge_count[&(a.min(b), a.max(b))], 1);
        }
        let perimeter: f64 = m.boundary_edges.iter().map(|e| m.edge_length(e)).sum();
        assert!((perimeter - 2.0 * (spec.width + spec.height)).abs() < 1e-12);

        // Dirichlet membership agrees with the segment definition.
        let set = m.dirichlet_vertex_set();
        for (v, &p) in m.vertices.iter().enumerate() {
            let on_segment = spec.dirichlet_segments.iter().any(|s| s.contains(p));
            assert_eq!(set.contains(&v), on_segment, "vertex {v} at {p:?}");
        }
    }

    #[test]
    fn invariants_hold_for_both_patterns() {
        let spec = DomainSpec::bridge();
        for pattern in [DiagonalPattern::Forward, DiagonalPattern::Mirrored, DiagonalPattern::Alternating] {
            for (nx, ny) in [(20, 1), (20, 8), (40, 6), (60, 20)] {
                let m = build_structured_mesh(&spec, nx, ny, pattern).unwrap();
                check_invariants(&m, &spec);
            }
        }
    }

    #[test]
    fn vertex_set_is_mirror_symmetric() {
        let m = bridge(20, 4);
        for v in 0..m.num_vertices() {
            let w = m.mirror_vertex(v);
            assert!((m.vertices[w][0] - (2.4 - m.vertices[v][0])).abs() < 1e-12);
            assert_eq!(m.vertices[w][1], m.vertices[v][1]);
        }
    }

    #[test]
    fn symmetric_patterns_map_triangles_onto_triangles() {
        for pattern in [DiagonalPattern::Mirrored, DiagonalPattern::Alternating] {
            let m = build_structured_mesh(&DomainSpec::bridge(), 20, 4, pattern).unwrap();
            assert_symmetric_triangles(&m);
        }
    }

    fn assert_symmetric_triangles(m: &TriMesh) {
        let tris: BTreeSet<[usize; 3]> = m
            .triangles
            .iter()
            .map(|t| {
                let mut s = *t;
                s.sort();
                s
            })
            .collect();
        for t in &m.triangles {
            let mut image = t.map(|v| m.mirror_vertex(v));
            image.sort();
            assert!(tris.contains(&image));
        }
    }
}
