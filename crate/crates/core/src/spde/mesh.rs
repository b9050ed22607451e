use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use spade::{DelaunayTriangulation, Point2, Triangulation};

use crate::{Error, Result};

pub type Point = [f64; 2];

/// Planar triangular mesh with counter-clockwise triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    /// vertex index of every input location passed to [`build_mesh`]
    loc_index: Vec<usize>,
    /// boundary polygon as a counter-clockwise vertex loop
    boundary: Vec<usize>,
}

/// Bookkeeping from [`build_mesh_with_report`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeshReport {
    /// Input locations that coincided with an earlier one.
    pub duplicates_merged: usize,
    /// Length of every bisected edge, in bisection order.
    pub bisected_lengths: Vec<f64>,
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl TriMesh {
    /// Wraps vertices and triangles, reorienting clockwise triangles.
    pub fn new(vertices: Vec<Point>, mut triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("mesh has no triangles".into()));
        }
        let mut used = vec![false; vertices.len()];
        for t in &mut triangles {
            if t.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidMesh(format!("triangle {t:?} references a missing vertex")));
            }
            let area = signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if area == 0.0 || !area.is_finite() {
                return Err(Error::InvalidMesh(format!("triangle {t:?} is degenerate")));
            }
            if area < 0.0 {
                t.swap(1, 2);
            }
            t.iter().for_each(|&v| used[v] = true);
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::InvalidMesh(format!("vertex {v} belongs to no triangle")));
        }
        let boundary = boundary_loop(&triangles)?;
        Ok(Self {
            vertices,
            triangles,
            loc_index: Vec::new(),
            boundary,
        })
    }

    /// Regular grid on `[x0, x1] × [y0, y1]` with `nx × ny` vertices.
    ///
    /// Cell diagonals alternate in a checkerboard so the mesh is symmetric
    /// about its centre when `nx` and `ny` are odd.
    pub fn regular_grid(nx: usize, ny: usize, lower: Point, upper: Point) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidMesh("grid needs at least 2×2 vertices".into()));
        }
        let hx = (upper[0] - lower[0]) / (nx - 1) as f64;
        let hy = (upper[1] - lower[1]) / (ny - 1) as f64;
        let vertices = (0..ny)
            .flat_map(|j| (0..nx).map(move |i| [lower[0] + hx * i as f64, lower[1] + hy * j as f64]))
            .collect();
        let id = |i: usize, j: usize| j * nx + i;
        let mut triangles = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                if (i + j) % 2 == 0 {
                    triangles.push([a, b, c]);
                    triangles.push([a, c, d]);
                } else {
                    triangles.push([a, b, d]);
                    triangles.push([b, c, d]);
                }
            }
        }
        Self::new(vertices, triangles)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn loc_index(&self) -> &[usize] {
        &self.loc_index
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Unique undirected edges, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<_> = self
            .triangles
            .iter()
            .flat_map(|t| [edge_key(t[0], t[1]), edge_key(t[1], t[2]), edge_key(t[2], t[0])])
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    pub fn max_edge_length(&self) -> f64 {
        self.edges()
            .into_iter()
            .map(|(a, b)| dist(self.vertices[a], self.vertices[b]))
            .fold(0.0, f64::max)
    }

    /// Bounding box `(lower, upper)` of the vertices.
    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }

    fn coincidence_tolerance(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        1e-9 * (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-300)
    }

    /// Index of the vertex coinciding with `p`, if any.
    pub fn find_vertex(&self, p: Point) -> Option<usize> {
        let tol = self.coincidence_tolerance();
        self.vertices
            .iter()
            .position(|v| (v[0] - p[0]).abs() <= tol && (v[1] - p[1]).abs() <= tol)
    }

    /// Barycentric coordinates of `p` in triangle `t`.
    pub fn barycentric(&self, t: usize, p: Point) -> [f64; 3] {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        let area = signed_area(a, b, c);
        [
            signed_area(p, b, c) / area,
            signed_area(a, p, c) / area,
            signed_area(a, b, p) / area,
        ]
    }

    /// First triangle containing `p` with its barycentric coordinates.
    pub fn locate(&self, p: Point) -> Option<(usize, [f64; 3])> {
        const EPS: f64 = -1e-12;
        (0..self.triangles.len()).find_map(|t| {
            let w = self.barycentric(t, p);
            (w.iter().all(|&x| x >= EPS)).then_some((t, w))
        })
    }

    /// Linear interpolation of vertex values inside triangle `t`.
    pub fn interpolate_in(&self, t: usize, values: &[f64], p: Point) -> f64 {
        let w = self.barycentric(t, p);
        self.triangles[t].iter().zip(w).map(|(&v, w)| values[v] * w).sum()
    }
}

/// Counter-clockwise loop of boundary vertices (edges owned by one triangle).
fn boundary_loop(triangles: &[[usize; 3]]) -> Result<Vec<usize>> {
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for t in triangles {
        for k in 0..3 {
            *count.entry(edge_key(t[k], t[(k + 1) % 3])).or_insert(0) += 1;
        }
    }
    // directed boundary edges follow the triangle orientation
    let mut next: HashMap<usize, usize> = HashMap::new();
    let mut start = usize::MAX;
    for t in triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            if count[&edge_key(a, b)] == 1 {
                next.insert(a, b);
                start = start.min(a);
            }
        }
    }
    if next.is_empty() {
        return Err(Error::InvalidMesh("mesh has no boundary".into()));
    }
    let mut boundary = vec![start];
    let mut cur = next[&start];
    while cur != start {
        if boundary.len() > next.len() {
            return Err(Error::InvalidMesh("boundary is not a single loop".into()));
        }
        boundary.push(cur);
        cur = *next
            .get(&cur)
            .ok_or_else(|| Error::InvalidMesh("boundary is not closed".into()))?;
    }
    Ok(boundary)
}

/// Convex hull (counter-clockwise, collinear points dropped).
fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: Point, a: Point, b: Point| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let base = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= base + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Points of the hull pushed outward by `offset`.
fn offset_polygon(hull: &[Point], offset: f64) -> Vec<Point> {
    let n = hull.len();
    let normal = |a: Point, b: Point| {
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len = dx.hypot(dy);
        [dy / len, -dx / len]
    };
    let mut out = Vec::new();
    for i in 0..n {
        let prev = hull[(i + n - 1) % n];
        let cur = hull[i];
        let next = hull[(i + 1) % n];
        let n1 = normal(prev, cur);
        let n2 = normal(cur, next);
        let dot = n1[0] * n2[0] + n1[1] * n2[1];
        let push = |out: &mut Vec<Point>, n: Point| out.push([cur[0] + offset * n[0], cur[1] + offset * n[1]]);
        if dot > 30f64.to_radians().cos() {
            // nearly straight: one mitred point
            let s = 1.0 + dot;
            push(&mut out, [(n1[0] + n2[0]) / s, (n1[1] + n2[1]) / s]);
        } else {
            let mid = [n1[0] + n2[0], n1[1] + n2[1]];
            let len = mid[0].hypot(mid[1]);
            push(&mut out, n1);
            if len > 1e-12 {
                push(&mut out, [mid[0] / len, mid[1] / len]);
            }
            push(&mut out, n2);
        }
    }
    out
}

/// Mesh over `locations`: Delaunay triangulation of the points plus an
/// outer ring offset from their convex hull by `2·max_edge`, refined by
/// longest-edge bisection until no edge exceeds `max_edge`.
pub fn build_mesh(locations: &[Point], max_edge: f64) -> Result<TriMesh> {
    build_mesh_with_report(locations, max_edge).map(|(mesh, _)| mesh)
}

pub fn build_mesh_with_report(locations: &[Point], max_edge: f64) -> Result<(TriMesh, MeshReport)> {
    if !(max_edge > 0.0) || !max_edge.is_finite() {
        return Err(Error::InvalidSpec(format!("max_edge must be positive, got {max_edge}")));
    }
    if locations.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::InvalidSpec("mesh locations must be finite".into()));
    }
    let hull = convex_hull(locations);
    if hull.len() < 3 {
        return Err(Error::CollinearInput);
    }

    let mut report = MeshReport::default();
    let mut tri: DelaunayTriangulation<Point2<f64>> = DelaunayTriangulation::new();
    let mut handle_of_location = Vec::with_capacity(locations.len());
    let mut seen: HashMap<(u64, u64), usize> = HashMap::new();
    for p in locations {
        let key = (p[0].to_bits(), p[1].to_bits());
        if let Some(&h) = seen.get(&key) {
            report.duplicates_merged += 1;
            handle_of_location.push(h);
            continue;
        }
        let h = tri
            .insert(Point2::new(p[0], p[1]))
            .map_err(|e| Error::InvalidMesh(format!("{e:?}")))?
            .index();
        seen.insert(key, h);
        handle_of_location.push(h);
    }
    if report.duplicates_merged > 0 {
        log::warn!("{} coincident locations merged onto shared mesh vertices", report.duplicates_merged);
    }
    for p in offset_polygon(&hull, 2.0 * max_edge) {
        tri.insert(Point2::new(p[0], p[1]))
            .map_err(|e| Error::InvalidMesh(format!("{e:?}")))?;
    }

    let mut vertices = vec![[0.0; 2]; tri.num_vertices()];
    for v in tri.vertices() {
        let pos = v.position();
        vertices[v.fix().index()] = [pos.x, pos.y];
    }
    let mut triangles: Vec<[usize; 3]> = tri
        .inner_faces()
        .map(|f| f.vertices().map(|v| v.fix().index()))
        .collect();
    report.bisected_lengths = refine_longest_edge(&mut vertices, &mut triangles, max_edge);

    let mut mesh = TriMesh::new(vertices, triangles)?;
    mesh.loc_index = handle_of_location;
    Ok((mesh, report))
}

#[derive(PartialEq)]
struct QueuedEdge {
    len: f64,
    a: usize,
    b: usize,
}

impl Eq for QueuedEdge {}

impl PartialOrd for QueuedEdge {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QueuedEdge {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len
            .total_cmp(&other.len)
            .then_with(|| other.a.cmp(&self.a))
            .then_with(|| other.b.cmp(&self.b))
    }
}

/// Repeatedly bisects the globally longest edge until every edge is at most
/// `max_edge`. The longest edge is the longest edge of both adjacent
/// triangles, so each bisection splits them conformingly.
///
/// Returns the lengths of the bisected edges in order (non-increasing).
pub fn refine_longest_edge(vertices: &mut Vec<Point>, triangles: &mut Vec<[usize; 3]>, max_edge: f64) -> Vec<f64> {
    let mut owners: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (t, tri) in triangles.iter().enumerate() {
        for k in 0..3 {
            owners.entry(edge_key(tri[k], tri[(k + 1) % 3])).or_default().push(t);
        }
    }
    let mut heap = BinaryHeap::new();
    let push = |heap: &mut BinaryHeap<QueuedEdge>, verts: &[Point], a: usize, b: usize| {
        let len = dist(verts[a], verts[b]);
        if len > max_edge {
            let (a, b) = edge_key(a, b);
            heap.push(QueuedEdge { len, a, b });
        }
    };
    let mut initial: Vec<_> = owners.keys().copied().collect();
    initial.sort_unstable();
    for (a, b) in initial {
        push(&mut heap, vertices, a, b);
    }

    let mut lengths = Vec::new();
    while let Some(QueuedEdge { len, a, b }) = heap.pop() {
        let Some(adjacent) = owners.remove(&(a, b)) else {
            continue;
        };
        lengths.push(len);
        let (pa, pb) = (vertices[a], vertices[b]);
        let m = vertices.len();
        vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
        for t in adjacent {
            let tri = triangles[t];
            // rotate so the split edge is (x, y) in the triangle's own order
            let k = (0..3)
                .find(|&k| edge_key(tri[k], tri[(k + 1) % 3]) == (a, b))
                .expect("edge owner must contain the edge");
            let (x, y, c) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
            let nt = triangles.len();
            triangles[t] = [x, m, c];
            triangles.push([m, y, c]);
            let yc = owners.get_mut(&edge_key(y, c)).expect("edge (y, c) exists");
            for owner in yc.iter_mut() {
                if *owner == t {
                    *owner = nt;
                }
            }
            owners.entry(edge_key(x, m)).or_default().push(t);
            owners.entry(edge_key(m, y)).or_default().push(nt);
            owners.entry(edge_key(m, c)).or_default().extend([t, nt]);
            push(&mut heap, vertices, m, c);
        }
        push(&mut heap, vertices, a, m);
        push(&mut heap, vertices, m, b);
    }
    lengths
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_corners_are_vertices() {
        let locs = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let mesh = build_mesh(&locs, 2.0).unwrap();
        assert!(mesh.n_vertices() > 4);
        for (i, p) in locs.iter().enumerate() {
            assert_eq!(mesh.vertices()[mesh.loc_index()[i]], *p);
        }
        assert!(mesh.max_edge_length() <= 2.0);
    }

    #[test]
    fn collinear_input_rejected() {
        let locs = [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]];
        assert!(matches!(build_mesh(&locs, 0.5), Err(Error::CollinearInput)));
    }

    #[test]
    fn duplicates_share_a_vertex() {
        let locs = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 0.0]];
        let (mesh, report) = build_mesh_with_report(&locs, 0.5).unwrap();
        assert_eq!(report.duplicates_merged, 1);
        assert_eq!(mesh.loc_index()[1], mesh.loc_index()[3]);
    }

    #[test]
    fn triangles_are_counter_clockwise() {
        let locs = [[0.0, 0.0], [0.3, 0.1], [0.1, 0.4], [0.5, 0.5]];
        let mesh = build_mesh(&locs, 0.15).unwrap();
        for t in 0..mesh.triangles().len() {
            assert!(mesh.triangle_area(t) > 0.0);
        }
        assert!(mesh.max_edge_length() <= 0.15 + 1e-12);
    }

    #[test]
    fn bisection_lengths_non_increasing() {
        let mut verts = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let mut tris = vec![[0, 1, 2]];
        let lengths = refine_longest_edge(&mut verts, &mut tris, 0.2);
        assert!(!lengths.is_empty());
        assert!(lengths.windows(2).all(|w| w[1] <= w[0]));
        let mesh = TriMesh::new(verts, tris).unwrap();
        assert!(mesh.max_edge_length() <= 0.2);
        assert!((mesh.total_area() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn grid_mesh_and_locate() {
        let mesh = TriMesh::regular_grid(3, 3, [0.0, 0.0], [1.0, 1.0]).unwrap();
        assert_eq!(mesh.triangles().len(), 8);
        assert!((mesh.total_area() - 1.0).abs() < 1e-14);
        assert_eq!(mesh.boundary().len(), 8);
        let (t, w) = mesh.locate([0.25, 0.6]).unwrap();
        assert!(w.iter().all(|&x| x >= -1e-12));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(mesh.triangle_area(t) > 0.0);
        assert!(mesh.locate([2.0, 2.0]).is_none());
        assert_eq!(mesh.find_vertex([0.5, 0.5]), Some(4));
    }

    #[test]
    fn invalid_meshes_rejected() {
        let verts = vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        assert!(TriMesh::new(verts.clone(), vec![[0, 1, 2]]).is_err());
        assert!(TriMesh::new(verts, vec![[0, 1, 5]]).is_err());
    }
}
