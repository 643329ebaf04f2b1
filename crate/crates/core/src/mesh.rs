//! Triangulations of the cross-section and P1 finite-element matrices.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::linalg::CsrMatrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeshError {
    #[error("degenerate dimensions: {0}")]
    Degenerate(String),
    #[error("polygon is self-intersecting (edges {0} and {1})")]
    SelfIntersecting(usize, usize),
    #[error("polygon must be positively oriented")]
    Orientation,
    #[error("ear clipping failed; polygon is not simple")]
    NotSimple,
}

/// Conforming triangulation with counter-clockwise triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    parent: Option<Vec<usize>>,
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn edge_len(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl Mesh {
    /// Builds a mesh, orienting triangles counter-clockwise and flagging the
    /// vertices on edges that belong to a single triangle.
    pub fn new(vertices: Vec<[f64; 2]>, mut triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        for t in triangles.iter_mut() {
            let a = signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if a == 0.0 {
                return Err(MeshError::Degenerate(format!("zero-area triangle {t:?}")));
            }
            if a < 0.0 {
                t.swap(1, 2);
            }
        }
        let boundary = boundary_flags(vertices.len(), &triangles);
        Ok(Mesh { vertices, triangles, boundary, parent: None })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary(&self) -> &[bool] {
        &self.boundary
    }

    /// For refined meshes: index of the coarse triangle each triangle came from.
    pub fn parent(&self) -> Option<&[usize]> {
        self.parent.as_deref()
    }

    pub fn is_nested_refinement(&self) -> bool {
        self.parent.is_some()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Interior vertex → degree-of-freedom index.
    pub fn dof_map(&self) -> Vec<Option<usize>> {
        let mut next = 0;
        self.boundary
            .iter()
            .map(|&b| {
                if b {
                    None
                } else {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect()
    }

    pub fn n_interior(&self) -> usize {
        self.boundary.iter().filter(|&&b| !b).count()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    pub fn area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn max_edge(&self) -> f64 {
        let mut m = 0.0f64;
        for t in &self.triangles {
            for k in 0..3 {
                m = m.max(edge_len(self.vertices[t[k]], self.vertices[t[(k + 1) % 3]]));
            }
        }
        m
    }

    /// Smallest interior angle over all triangles, in radians.
    pub fn min_angle(&self) -> f64 {
        let mut m = f64::INFINITY;
        for t in &self.triangles {
            for k in 0..3 {
                let p = self.vertices[t[k]];
                let q = self.vertices[t[(k + 1) % 3]];
                let r = self.vertices[t[(k + 2) % 3]];
                let u = [q[0] - p[0], q[1] - p[1]];
                let v = [r[0] - p[0], r[1] - p[1]];
                let cos = (u[0] * v[0] + u[1] * v[1]) / (u[0].hypot(u[1]) * v[0].hypot(v[1]));
                m = m.min(cos.clamp(-1.0, 1.0).acos());
            }
        }
        m
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Mesh {
        let mut m = self.clone();
        for v in m.vertices.iter_mut() {
            v[0] += dx;
            v[1] += dy;
        }
        m
    }

    /// Plain-text dump: a header line, vertex and triangle counts, then
    /// coordinates (with boundary flag) and vertex index triples.
    pub fn to_off(&self) -> String {
        let mut s = String::from("OFF2D\n");
        let _ = writeln!(s, "{} {}", self.n_vertices(), self.n_triangles());
        for (v, b) in self.vertices.iter().zip(&self.boundary) {
            let _ = writeln!(s, "{:.17e} {:.17e} {}", v[0], v[1], u8::from(*b));
        }
        for t in &self.triangles {
            let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
        }
        s
    }
}

fn edge_counts(triangles: &[[usize; 3]]) -> HashMap<(usize, usize), usize> {
    let mut counts = HashMap::new();
    for t in triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    counts
}

fn boundary_flags(nv: usize, triangles: &[[usize; 3]]) -> Vec<bool> {
    let mut flags = vec![false; nv];
    for ((a, b), c) in edge_counts(triangles) {
        if c == 1 {
            flags[a] = true;
            flags[b] = true;
        }
    }
    flags
}

/// Structured mesh of `(0,a)×(0,b)`: the grid has `ceil(a/h)` by `ceil(b/h)`
/// cells, each cut by the diagonal that points towards the centre of the
/// rectangle. With even cell counts the mesh is invariant under both axis
/// reflections.
pub fn make_rectangle(a: f64, b: f64, h: f64) -> Result<Mesh, MeshError> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(MeshError::Degenerate(format!("rectangle sides {a} x {b}")));
    }
    if !(h > 0.0 && h < a.min(b)) {
        return Err(MeshError::Degenerate(format!("mesh size h={h} must satisfy 0 < h < min(a,b)")));
    }
    let nx = ((a / h) - 1e-9).ceil().max(1.0) as usize;
    let ny = ((b / h) - 1e-9).ceil().max(1.0) as usize;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([a * i as f64 / nx as f64, b * j as f64 / ny as f64]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let sx = (2 * i + 1) as isize - nx as isize;
            let sy = (2 * j + 1) as isize - ny as isize;
            if sx * sy >= 0 {
                triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            } else {
                triangles.push([id(i, j), id(i + 1, j), id(i, j + 1)]);
                triangles.push([id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
    }
    Mesh::new(vertices, triangles)
}

/// Disk of radius `r` centred at the origin: concentric rings `k = 1..n`
/// at radius `k r / n` carrying `6k` equally spaced vertices, `n = ceil(r/h)`.
pub fn make_disk(r: f64, h: f64) -> Result<Mesh, MeshError> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(MeshError::Degenerate(format!("disk radius {r}")));
    }
    if !(h > 0.0 && h < r) {
        return Err(MeshError::Degenerate(format!("mesh size h={h} must satisfy 0 < h < r")));
    }
    let rings = ((r / h) - 1e-9).ceil().max(1.0) as usize;
    let tau = std::f64::consts::TAU;
    let mut vertices = vec![[0.0, 0.0]];
    let mut ring_start = vec![0usize];
    for k in 1..=rings {
        ring_start.push(vertices.len());
        let rad = if k == rings { r } else { r * k as f64 / rings as f64 };
        let m = 6 * k;
        for j in 0..m {
            let th = tau * j as f64 / m as f64;
            vertices.push([rad * th.cos(), rad * th.sin()]);
        }
    }
    let mut triangles = Vec::new();
    for j in 0..6 {
        triangles.push([0, ring_start[1] + j, ring_start[1] + (j + 1) % 6]);
    }
    for k in 2..=rings {
        let (inner_n, outer_n) = (6 * (k - 1), 6 * k);
        let (is, os) = (ring_start[k - 1], ring_start[k]);
        let (mut i, mut o) = (0usize, 0usize);
        // Zip the two rings together by angle.
        while i < inner_n || o < outer_n {
            let next_inner = (i + 1) as f64 / inner_n as f64;
            let next_outer = (o + 1) as f64 / outer_n as f64;
            if o < outer_n && (i == inner_n || next_outer <= next_inner) {
                triangles.push([is + i % inner_n, os + o, os + (o + 1) % outer_n]);
                o += 1;
            } else {
                triangles.push([is + i, os + o % outer_n, is + (i + 1) % inner_n]);
                i += 1;
            }
        }
    }
    Mesh::new(vertices, triangles)
}

fn segments_cross(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = signed_area(q1, q2, p1);
    let d2 = signed_area(q1, q2, p2);
    let d3 = signed_area(p1, p2, q1);
    let d4 = signed_area(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |a: [f64; 2], b: [f64; 2], c: [f64; 2], d: f64| {
        d == 0.0 && c[0] >= a[0].min(b[0]) && c[0] <= a[0].max(b[0]) && c[1] >= a[1].min(b[1]) && c[1] <= a[1].max(b[1])
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

fn point_in_triangle(p: [f64; 2], a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> bool {
    signed_area(a, b, p) >= 0.0 && signed_area(b, c, p) >= 0.0 && signed_area(c, a, p) >= 0.0
}

fn triangle_min_angle(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    let ang = |p: [f64; 2], q: [f64; 2], r: [f64; 2]| {
        let u = [q[0] - p[0], q[1] - p[1]];
        let v = [r[0] - p[0], r[1] - p[1]];
        ((u[0] * v[0] + u[1] * v[1]) / (u[0].hypot(u[1]) * v[0].hypot(v[1]))).clamp(-1.0, 1.0).acos()
    };
    ang(a, b, c).min(ang(b, c, a)).min(ang(c, a, b))
}

/// Simple, counter-clockwise polygon: ear clipping (best minimum angle first),
/// then uniform refinement until the longest edge is at most `h`.
pub fn make_polygon(pts: &[[f64; 2]], h: f64) -> Result<Mesh, MeshError> {
    let n = pts.len();
    if n < 3 {
        return Err(MeshError::Degenerate(format!("polygon with {n} vertices")));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(MeshError::Degenerate(format!("mesh size h={h}")));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                if pts[i] == pts[j] {
                    return Err(MeshError::Degenerate(format!("repeated vertex {i}")));
                }
                continue;
            }
            if segments_cross(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]) {
                return Err(MeshError::SelfIntersecting(i, j));
            }
        }
    }
    let area: f64 = (0..n).map(|i| pts[i][0] * pts[(i + 1) % n][1] - pts[(i + 1) % n][0] * pts[i][1]).sum::<f64>() * 0.5;
    if area <= 0.0 {
        return Err(MeshError::Orientation);
    }
    let mut ring: Vec<usize> = (0..n).collect();
    let mut triangles = Vec::with_capacity(n - 2);
    while ring.len() > 3 {
        let m = ring.len();
        let mut best: Option<(usize, f64)> = None;
        for k in 0..m {
            let (a, b, c) = (ring[(k + m - 1) % m], ring[k], ring[(k + 1) % m]);
            if signed_area(pts[a], pts[b], pts[c]) <= 0.0 {
                continue;
            }
            let blocked = ring
                .iter()
                .any(|&q| q != a && q != b && q != c && point_in_triangle(pts[q], pts[a], pts[b], pts[c]));
            if blocked {
                continue;
            }
            let quality = triangle_min_angle(pts[a], pts[b], pts[c]);
            // Ties go to the later vertex.
            if best.is_none_or(|(_, q)| quality >= q - 1e-12) {
                best = Some((k, quality));
            }
        }
        let (k, _) = best.ok_or(MeshError::NotSimple)?;
        let m = ring.len();
        triangles.push([ring[(k + m - 1) % m], ring[k], ring[(k + 1) % m]]);
        ring.remove(k);
    }
    triangles.push([ring[0], ring[1], ring[2]]);
    let mut mesh = Mesh::new(pts.to_vec(), triangles)?;
    while mesh.max_edge() > h * (1.0 + 1e-12) {
        mesh = refine_uniform(&mesh);
    }
    let cx = (0..n).map(|i| (pts[i][0] + pts[(i + 1) % n][0]) * cross(pts[i], pts[(i + 1) % n])).sum::<f64>() / (6.0 * area);
    let cy = (0..n).map(|i| (pts[i][1] + pts[(i + 1) % n][1]) * cross(pts[i], pts[(i + 1) % n])).sum::<f64>() / (6.0 * area);
    resolve_cocircular(&mut mesh, [cx, cy]);
    mesh.parent = None;
    Ok(mesh)
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - b[0] * a[1]
}

/// Distance from `c` to the line through `a` and `b`.
fn line_distance(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (2.0 * signed_area(a, b, c)).abs() / edge_len(a, b)
}

/// Where two triangles form a cocircular quadrilateral (both diagonals are
/// equally Delaunay), picks the diagonal whose line passes closer to `centre`.
/// On rectangular grids this reproduces the pattern of [`make_rectangle`].
fn resolve_cocircular(mesh: &mut Mesh, centre: [f64; 2]) {
    let v = &mesh.vertices;
    let mut owner: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            owner.entry((a.min(b), a.max(b))).or_default().push(t);
        }
    }
    let mut edges: Vec<(usize, usize)> = owner.iter().filter(|(_, ts)| ts.len() == 2).map(|(e, _)| *e).collect();
    edges.sort_unstable();
    for (p, q) in edges {
        let Some(ts) = owner.get(&(p, q)) else { continue };
        if ts.len() != 2 {
            continue;
        }
        let (t1, t2) = (ts[0], ts[1]);
        let apex = |t: usize| mesh.triangles[t].iter().copied().find(|&x| x != p && x != q).unwrap();
        let (r, s) = (apex(t1), apex(t2));
        let scale = edge_len(v[p], v[q]).powi(2);
        if !cocircular(v[p], v[q], v[r], v[s], scale) {
            continue;
        }
        // The quadrilateral p-r-q-s must be strictly convex for a flip.
        let convex = signed_area(v[r], v[s], v[p]).signum() != signed_area(v[r], v[s], v[q]).signum()
            && signed_area(v[r], v[s], v[p]) != 0.0
            && signed_area(v[r], v[s], v[q]) != 0.0;
        if !convex || line_distance(v[r], v[s], centre) >= line_distance(v[p], v[q], centre) - 1e-12 * scale.sqrt() {
            continue;
        }
        let mut a = [r, s, p];
        let mut b = [s, r, q];
        if signed_area(v[a[0]], v[a[1]], v[a[2]]) < 0.0 {
            a.swap(1, 2);
        }
        if signed_area(v[b[0]], v[b[1]], v[b[2]]) < 0.0 {
            b.swap(1, 2);
        }
        mesh.triangles[t1] = a;
        mesh.triangles[t2] = b;
        owner.remove(&(p, q));
        owner.insert((r.min(s), r.max(s)), vec![t1, t2]);
        for (x, y, t_new) in [(p, r, t1), (p, s, t1), (q, r, t2), (q, s, t2)] {
            if let Some(list) = owner.get_mut(&(x.min(y), x.max(y))) {
                for t in list.iter_mut() {
                    if *t == t1 || *t == t2 {
                        *t = t_new;
                    }
                }
            }
        }
    }
}

fn cocircular(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2], scale: f64) -> bool {
    let m = |p: [f64; 2]| [p[0] - d[0], p[1] - d[1], (p[0] - d[0]).powi(2) + (p[1] - d[1]).powi(2)];
    let (x, y, z) = (m(a), m(b), m(c));
    let det = x[0] * (y[1] * z[2] - y[2] * z[1]) - x[1] * (y[0] * z[2] - y[2] * z[0]) + x[2] * (y[0] * z[1] - y[1] * z[0]);
    det.abs() <= 1e-10 * scale * scale
}

/// Splits every triangle into four congruent children through the edge
/// midpoints. The coarse P1 space is a subspace of the fine one.
pub fn refine_uniform(m: &Mesh) -> Mesh {
    let mut vertices = m.vertices.clone();
    let mut boundary = m.boundary.clone();
    let counts = edge_counts(&m.triangles);
    let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
    let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<[f64; 2]>, boundary: &mut Vec<bool>| -> usize {
        let key = (a.min(b), a.max(b));
        *mid.entry(key).or_insert_with(|| {
            let (p, q) = (vertices[a], vertices[b]);
            vertices.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
            boundary.push(counts[&key] == 1);
            vertices.len() - 1
        })
    };
    let mut triangles = Vec::with_capacity(4 * m.triangles.len());
    let mut parent = Vec::with_capacity(4 * m.triangles.len());
    for (ti, &[a, b, c]) in m.triangles.iter().enumerate() {
        let ab = midpoint(a, b, &mut vertices, &mut boundary);
        let bc = midpoint(b, c, &mut vertices, &mut boundary);
        let ca = midpoint(c, a, &mut vertices, &mut boundary);
        triangles.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        parent.extend([ti; 4]);
    }
    Mesh { vertices, triangles, boundary, parent: Some(parent) }
}

/// P1 matrices restricted to the interior degrees of freedom (or over all
/// vertices when assembled with [`FemMatrices::assemble_full`]).
#[derive(Debug, Clone)]
pub struct FemMatrices {
    /// `∫ φᵢ φⱼ`
    pub m: CsrMatrix<f64>,
    /// `∫ ∇φᵢ·∇φⱼ`
    pub s: CsrMatrix<f64>,
    /// `∫ ∂₁φᵢ ∂₁φⱼ`
    pub d11: CsrMatrix<f64>,
    /// `∫ ∂₂φᵢ ∂₂φⱼ`
    pub d22: CsrMatrix<f64>,
    /// `∫ ∂₁φᵢ ∂₂φⱼ`
    pub d12: CsrMatrix<f64>,
    /// `∫ φᵢ ∂₁φⱼ`
    pub c1: CsrMatrix<f64>,
    /// `∫ φᵢ ∂₂φⱼ`
    pub c2: CsrMatrix<f64>,
    /// `∫ y₁ φᵢ φⱼ`
    pub y1m: CsrMatrix<f64>,
    /// `∫ y₁ ∂₁φᵢ ∂₁φⱼ`
    pub y1d11: CsrMatrix<f64>,
    /// Mesh vertex of each degree of freedom.
    pub dof_vertex: Vec<usize>,
}

impl FemMatrices {
    /// Assembly with Dirichlet elimination of boundary vertices.
    pub fn assemble(mesh: &Mesh) -> Self {
        Self::assemble_with(mesh, mesh.dof_map())
    }

    /// Assembly over every vertex, before boundary elimination.
    pub fn assemble_full(mesh: &Mesh) -> Self {
        Self::assemble_with(mesh, (0..mesh.n_vertices()).map(Some).collect())
    }

    pub fn dim(&self) -> usize {
        self.dof_vertex.len()
    }

    fn assemble_with(mesh: &Mesh, map: Vec<Option<usize>>) -> Self {
        let n = map.iter().filter(|d| d.is_some()).count();
        let mut dof_vertex = vec![0; n];
        for (v, d) in map.iter().enumerate() {
            if let Some(d) = d {
                dof_vertex[*d] = v;
            }
        }
        let cap = 9 * mesh.n_triangles();
        let mut tm = Vec::with_capacity(cap);
        let mut t11 = Vec::with_capacity(cap);
        let mut t22 = Vec::with_capacity(cap);
        let mut t12 = Vec::with_capacity(cap);
        let mut tc1 = Vec::with_capacity(cap);
        let mut tc2 = Vec::with_capacity(cap);
        let mut ty1m = Vec::with_capacity(cap);
        let mut ty1d = Vec::with_capacity(cap);
        for (ti, tri) in mesh.triangles.iter().enumerate() {
            let p = tri.map(|v| mesh.vertices[v]);
            let area = mesh.triangle_area(ti);
            // ∇λ_k = (y_{k+1} − y_{k+2}, x_{k+2} − x_{k+1}) / (2|T|)
            let grad: [[f64; 2]; 3] = std::array::from_fn(|k| {
                let (q, r) = (p[(k + 1) % 3], p[(k + 2) % 3]);
                [(q[1] - r[1]) / (2.0 * area), (r[0] - q[0]) / (2.0 * area)]
            });
            let y1 = [p[0][0], p[1][0], p[2][0]];
            let y1bar = (y1[0] + y1[1] + y1[2]) / 3.0;
            for a in 0..3 {
                let Some(i) = map[tri[a]] else { continue };
                for b in 0..3 {
                    let Some(j) = map[tri[b]] else { continue };
                    let mass = if a == b { area / 6.0 } else { area / 12.0 };
                    tm.push((i, j, mass));
                    t11.push((i, j, area * grad[a][0] * grad[b][0]));
                    t22.push((i, j, area * grad[a][1] * grad[b][1]));
                    t12.push((i, j, area * grad[a][0] * grad[b][1]));
                    tc1.push((i, j, area / 3.0 * grad[b][0]));
                    tc2.push((i, j, area / 3.0 * grad[b][1]));
                    // ∫ λ_a λ_b λ_c = 2|T| α!β!γ!/(α+β+γ+2)!
                    let mut w = 0.0;
                    for c in 0..3 {
                        let coef = if a == b && b == c {
                            area / 10.0
                        } else if a == b || b == c || a == c {
                            area / 30.0
                        } else {
                            area / 60.0
                        };
                        w += coef * y1[c];
                    }
                    ty1m.push((i, j, w));
                    ty1d.push((i, j, area * y1bar * grad[a][0] * grad[b][0]));
                }
            }
        }
        let build = |t: &[(usize, usize, f64)]| CsrMatrix::from_triplets(n, t).finalize();
        let d11 = build(&t11);
        let d22 = build(&t22);
        // S = D11 + D22 entry by entry on the shared pattern.
        let mut ts = t11;
        ts.extend_from_slice(&t22);
        FemMatrices {
            m: build(&tm),
            s: build(&ts),
            d11,
            d22,
            d12: build(&t12),
            c1: build(&tc1),
            c2: build(&tc2),
            y1m: build(&ty1m),
            y1d11: build(&ty1d),
            dof_vertex,
        }
    }
}

/// Shorthand for [`FemMatrices::assemble`].
pub fn assemble_p1(mesh: &Mesh) -> FemMatrices {
    FemMatrices::assemble(mesh)
}
