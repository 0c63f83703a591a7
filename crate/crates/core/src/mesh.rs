//! Conforming triangular meshes with explicit face (skeleton) topology.
//!
//! Elements are counterclockwise vertex triples. Local face `i` of an element
//! is the edge from its vertex `i` to vertex `(i + 1) % 3`. Every face stores
//! its vertices in increasing index order, an owner element (the lower-indexed
//! adjacent element) and an optional neighbor; the stored unit normal points
//! out of the owner.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::error::{HdgError, Result};

pub type Point = [f64; 2];

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn unit() -> Self {
        Self::new(0.0, 0.0, 1.0, 1.0)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point {
        [0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1)]
    }
}

/// Boundary condition for the solid (velocity) problem on a boundary face.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SolidBc {
    /// Velocity prescribed; the velocity trace is strongly constrained.
    DirichletU,
    /// Traction prescribed.
    NeumannU,
}

/// Boundary condition for the flux/scalar problem on a boundary face.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FluxBc {
    /// Scalar (pressure/temperature) prescribed, imposed weakly.
    DirichletPsi,
    /// Flux prescribed; the flux trace is strongly constrained.
    NeumannP,
}

impl SolidBc {
    pub fn name(self) -> &'static str {
        match self {
            SolidBc::DirichletU => "dirichlet_u",
            SolidBc::NeumannU => "neumann_u",
        }
    }
}

impl FluxBc {
    pub fn name(self) -> &'static str {
        match self {
            FluxBc::DirichletPsi => "dirichlet_psi",
            FluxBc::NeumannP => "neumann_p",
        }
    }
}

/// The pair of tags carried by every boundary face.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BoundaryTags {
    pub solid: SolidBc,
    pub flux: FluxBc,
}

impl BoundaryTags {
    pub const fn new(solid: SolidBc, flux: FluxBc) -> Self {
        Self { solid, flux }
    }

    /// Clamped walls with a weakly imposed scalar.
    pub const fn all_dirichlet() -> Self {
        Self::new(SolidBc::DirichletU, FluxBc::DirichletPsi)
    }
}

/// Diagonal used to split each cell of a structured grid into two triangles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Diagonal {
    /// Every cell split from its lower-left to its upper-right corner.
    #[default]
    SouthWestNorthEast,
    /// Every cell split from its upper-left to its lower-right corner.
    NorthWestSouthEast,
    /// Checkerboard alternation of the two; mirror-symmetric about both
    /// center lines when `n` is even.
    Alternating,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    pub vertices: [usize; 2],
    pub owner: usize,
    pub neighbor: Option<usize>,
    pub tags: Option<BoundaryTags>,
    pub length: f64,
    /// Unit normal pointing out of `owner`.
    pub normal: [f64; 2],
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.neighbor.is_none()
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point>,
    elements: Vec<[usize; 3]>,
    faces: Vec<Face>,
    element_faces: Vec<[usize; 3]>,
    diameters: Vec<f64>,
    areas: Vec<f64>,
}

/// Face census and metric summary of a mesh skeleton.
#[derive(Clone, Debug, PartialEq)]
pub struct SkeletonReport {
    pub elements: usize,
    pub faces: usize,
    pub interior_faces: usize,
    pub boundary_faces: usize,
    pub dirichlet_u: usize,
    pub neumann_u: usize,
    pub dirichlet_psi: usize,
    pub neumann_p: usize,
    pub min_face_diameter: f64,
    pub max_face_diameter: f64,
    pub gamma: f64,
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: Point, b: Point) -> f64 {
    (b[0] - a[0]).hypot(b[1] - a[1])
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Mesh {
    /// Builds a mesh from vertices and counterclockwise triangles. `tag` is
    /// called for every boundary face with its midpoint and outward normal.
    pub fn new(
        vertices: Vec<Point>,
        elements: Vec<[usize; 3]>,
        tag: impl Fn(Point, [f64; 2]) -> BoundaryTags,
    ) -> Result<Self> {
        Self::build(vertices, elements, |_, mid, n| Ok(tag(mid, n)))
    }

    fn build(
        vertices: Vec<Point>,
        elements: Vec<[usize; 3]>,
        mut tag: impl FnMut((usize, usize), Point, [f64; 2]) -> Result<BoundaryTags>,
    ) -> Result<Self> {
        if elements.is_empty() {
            return Err(HdgError::InvalidMesh("no elements".into()));
        }
        let mut areas = Vec::with_capacity(elements.len());
        let mut diameters = Vec::with_capacity(elements.len());
        for (e, tri) in elements.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(HdgError::InvalidMesh(format!("element {e} references a missing vertex")));
            }
            let [a, b, c] = tri.map(|v| vertices[v]);
            let area = signed_area(a, b, c);
            if !(area > 0.0) {
                return Err(HdgError::InvalidMesh(format!(
                    "element {e} has non-positive area {area} (vertices must be counterclockwise)"
                )));
            }
            areas.push(area);
            diameters.push(dist(a, b).max(dist(b, c)).max(dist(c, a)));
        }

        let mut edges: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
        for (e, tri) in elements.iter().enumerate() {
            for i in 0..3 {
                edges
                    .entry(edge_key(tri[i], tri[(i + 1) % 3]))
                    .or_default()
                    .push((e, i));
            }
        }

        let mut faces = Vec::with_capacity(edges.len());
        let mut element_faces = vec![[usize::MAX; 3]; elements.len()];
        for (key, adj) in edges {
            if adj.len() > 2 {
                return Err(HdgError::InvalidMesh(format!(
                    "edge {key:?} shared by {} elements",
                    adj.len()
                )));
            }
            let (owner, local) = adj[0];
            let neighbor = adj.get(1).map(|&(e, _)| e);
            if adj.len() == 2 {
                let (e1, l1) = adj[1];
                let t0 = elements[owner];
                let t1 = elements[e1];
                // conforming neighbors traverse a shared edge in opposite directions
                if t0[local] != t1[(l1 + 1) % 3] {
                    return Err(HdgError::InvalidMesh(format!(
                        "elements {owner} and {e1} have inconsistent orientation"
                    )));
                }
            }
            let tri = elements[owner];
            let a = vertices[tri[local]];
            let b = vertices[tri[(local + 1) % 3]];
            let length = dist(a, b);
            let normal = [(b[1] - a[1]) / length, -(b[0] - a[0]) / length];
            let id = faces.len();
            for &(e, l) in &adj {
                element_faces[e][l] = id;
            }
            let tags = if neighbor.is_none() {
                let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                Some(tag(key, mid, normal)?)
            } else {
                None
            };
            faces.push(Face {
                vertices: [key.0, key.1],
                owner,
                neighbor,
                tags,
                length,
                normal,
            });
        }

        Ok(Self {
            vertices,
            elements,
            faces,
            element_faces,
            diameters,
            areas,
        })
    }

    /// Structured triangulation of `domain` with `n` cells per axis (2n^2
    /// triangles).
    pub fn structured(
        domain: Rect,
        n: usize,
        diagonal: Diagonal,
        tag: impl Fn(Point, [f64; 2]) -> BoundaryTags,
    ) -> Result<Self> {
        if n == 0 {
            return Err(HdgError::InvalidInput("structured mesh needs n >= 1".into()));
        }
        if !(domain.width() > 0.0 && domain.height() > 0.0) {
            return Err(HdgError::InvalidInput(format!("degenerate rectangle {domain:?}")));
        }
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            let y = domain.y0 + domain.height() * j as f64 / n as f64;
            for i in 0..=n {
                let x = domain.x0 + domain.width() * i as f64 / n as f64;
                vertices.push([x, y]);
            }
        }
        let id = |i: usize, j: usize| j * (n + 1) + i;
        let mut elements = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                let forward = match diagonal {
                    Diagonal::SouthWestNorthEast => true,
                    Diagonal::NorthWestSouthEast => false,
                    Diagonal::Alternating => (i + j) % 2 == 0,
                };
                if forward {
                    elements.push([a, b, c]);
                    elements.push([a, c, d]);
                } else {
                    elements.push([a, b, d]);
                    elements.push([b, c, d]);
                }
            }
        }
        Self::new(vertices, elements, tag)
    }

    /// Red refinement: every triangle split into four similar children through
    /// its edge midpoints. Child boundary faces inherit the tags of the parent
    /// face they lie on.
    pub fn refine_uniform(&self) -> Result<Self> {
        let nv = self.vertices.len();
        let mut vertices = self.vertices.clone();
        for f in &self.faces {
            let a = self.vertices[f.vertices[0]];
            let b = self.vertices[f.vertices[1]];
            vertices.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
        }
        let mut inherited: HashMap<(usize, usize), BoundaryTags> = HashMap::new();
        for (fid, f) in self.faces.iter().enumerate() {
            if let Some(tags) = f.tags {
                let m = nv + fid;
                inherited.insert(edge_key(f.vertices[0], m), tags);
                inherited.insert(edge_key(m, f.vertices[1]), tags);
            }
        }
        let mut elements = Vec::with_capacity(4 * self.elements.len());
        for (e, tri) in self.elements.iter().enumerate() {
            let [fa, fb, fc] = self.element_faces[e];
            // midpoints of edges (0,1), (1,2), (2,0)
            let (m01, m12, m20) = (nv + fa, nv + fb, nv + fc);
            elements.push([tri[0], m01, m20]);
            elements.push([m01, tri[1], m12]);
            elements.push([m20, m12, tri[2]]);
            elements.push([m01, m12, m20]);
        }
        Self::build(vertices, elements, |key, _, _| {
            inherited
                .get(&key)
                .copied()
                .ok_or_else(|| HdgError::InvalidMesh(format!("boundary edge {key:?} has no parent face")))
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    /// Global face ids of the three local faces of element `e`.
    pub fn element_faces(&self, e: usize) -> [usize; 3] {
        self.element_faces[e]
    }

    pub fn element_vertices(&self, e: usize) -> [Point; 3] {
        self.elements[e].map(|v| self.vertices[v])
    }

    pub fn area(&self, e: usize) -> f64 {
        self.areas[e]
    }

    /// Element diameter h_K (longest edge).
    pub fn diameter(&self, e: usize) -> f64 {
        self.diameters[e]
    }

    pub fn centroid(&self, e: usize) -> Point {
        let [a, b, c] = self.element_vertices(e);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Outward unit normal of local face `local` of element `e`.
    pub fn outward_normal(&self, e: usize, local: usize) -> [f64; 2] {
        let f = &self.faces[self.element_faces[e][local]];
        if f.owner == e {
            f.normal
        } else {
            [-f.normal[0], -f.normal[1]]
        }
    }

    /// Largest element diameter.
    pub fn mesh_size(&self) -> f64 {
        self.diameters.iter().copied().fold(0.0, f64::max)
    }

    /// Bounding box of the vertex set.
    pub fn bounding_box(&self) -> Rect {
        let mut r = Rect::new(f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            r.x0 = r.x0.min(v[0]);
            r.y0 = r.y0.min(v[1]);
            r.x1 = r.x1.max(v[0]);
            r.y1 = r.y1.max(v[1]);
        }
        r
    }

    /// Measured local quasi-uniformity constant: max over elements K and faces
    /// F of K of h_K / h_F.
    pub fn quasi_uniformity(&self) -> f64 {
        let mut gamma: f64 = 1.0;
        for e in 0..self.elements.len() {
            for f in self.element_faces[e] {
                gamma = gamma.max(self.diameters[e] / self.faces[f].length);
            }
        }
        gamma
    }

    pub fn skeleton_report(&self) -> SkeletonReport {
        let mut r = SkeletonReport {
            elements: self.elements.len(),
            faces: self.faces.len(),
            interior_faces: 0,
            boundary_faces: 0,
            dirichlet_u: 0,
            neumann_u: 0,
            dirichlet_psi: 0,
            neumann_p: 0,
            min_face_diameter: f64::INFINITY,
            max_face_diameter: 0.0,
            gamma: self.quasi_uniformity(),
        };
        for f in &self.faces {
            r.min_face_diameter = r.min_face_diameter.min(f.length);
            r.max_face_diameter = r.max_face_diameter.max(f.length);
            match f.tags {
                None => r.interior_faces += 1,
                Some(t) => {
                    r.boundary_faces += 1;
                    match t.solid {
                        SolidBc::DirichletU => r.dirichlet_u += 1,
                        SolidBc::NeumannU => r.neumann_u += 1,
                    }
                    match t.flux {
                        FluxBc::DirichletPsi => r.dirichlet_psi += 1,
                        FluxBc::NeumannP => r.neumann_p += 1,
                    }
                }
            }
        }
        r
    }

    /// Reference coordinates of `x` in element `e` (affine inverse map).
    pub fn reference_coords(&self, e: usize, x: Point) -> [f64; 2] {
        let [a, b, c] = self.element_vertices(e);
        let (j00, j01, j10, j11) = (b[0] - a[0], c[0] - a[0], b[1] - a[1], c[1] - a[1]);
        let det = j00 * j11 - j01 * j10;
        let (dx, dy) = (x[0] - a[0], x[1] - a[1]);
        [(j11 * dx - j01 * dy) / det, (-j10 * dx + j00 * dy) / det]
    }

    /// All elements whose closure contains `x` (barycentric tolerance `tol`),
    /// with the reference coordinates of `x` in each.
    pub fn locate(&self, x: Point, tol: f64) -> Vec<(usize, [f64; 2])> {
        let mut hits = Vec::new();
        for e in 0..self.elements.len() {
            let xi = self.reference_coords(e, x);
            if xi[0] >= -tol && xi[1] >= -tol && xi[0] + xi[1] <= 1.0 + tol {
                hits.push((e, xi));
            }
        }
        hits
    }

    /// Plain-text serialization (see [`Mesh::from_text`]).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "vertices {} / elements {} / faces {}",
            self.vertices.len(),
            self.elements.len(),
            self.faces.len()
        )
        .unwrap();
        for v in &self.vertices {
            writeln!(s, "{} {}", v[0], v[1]).unwrap();
        }
        for t in &self.elements {
            writeln!(s, "{} {} {}", t[0], t[1], t[2]).unwrap();
        }
        for f in &self.faces {
            let neighbor = f.neighbor.map_or(-1, |n| n as i64);
            let (ts, tf) = match f.tags {
                Some(t) => (t.solid.name(), t.flux.name()),
                None => ("none", "none"),
            };
            writeln!(
                s,
                "{} {} {} {} {} {}",
                f.vertices[0], f.vertices[1], f.owner, neighbor, ts, tf
            )
            .unwrap();
        }
        s
    }

    /// Parses the format written by [`Mesh::to_text`]. Face records must agree
    /// with the topology implied by the element list.
    pub fn from_text(text: &str) -> Result<Self> {
        let perr = |line: usize, msg: &str| HdgError::Parse(format!("mesh line {}: {msg}", line + 1));
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hl, header) = lines.next().ok_or_else(|| HdgError::Parse("empty mesh file".into()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 8 || h[0] != "vertices" || h[2] != "/" || h[3] != "elements" || h[5] != "/" || h[6] != "faces" {
            return Err(perr(hl, "expected header 'vertices N / elements M / faces K'"));
        }
        let count = |s: &str| s.parse::<usize>().map_err(|_| perr(hl, "bad count"));
        let (nv, ne, nf) = (count(h[1])?, count(h[4])?, count(h[7])?);

        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (ln, l) = lines.next().ok_or_else(|| HdgError::Parse("truncated vertex list".into()))?;
            let v: Vec<f64> = l
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| perr(ln, "bad coordinate")))
                .collect::<Result<_>>()?;
            if v.len() != 2 {
                return Err(perr(ln, "expected two coordinates"));
            }
            vertices.push([v[0], v[1]]);
        }
        let mut elements = Vec::with_capacity(ne);
        for _ in 0..ne {
            let (ln, l) = lines.next().ok_or_else(|| HdgError::Parse("truncated element list".into()))?;
            let v: Vec<usize> = l
                .split_whitespace()
                .map(|t| t.parse::<usize>().map_err(|_| perr(ln, "bad vertex index")))
                .collect::<Result<_>>()?;
            if v.len() != 3 {
                return Err(perr(ln, "expected three vertex indices"));
            }
            elements.push([v[0], v[1], v[2]]);
        }
        let mut records: HashMap<(usize, usize), (usize, i64, Option<BoundaryTags>)> = HashMap::new();
        for _ in 0..nf {
            let (ln, l) = lines.next().ok_or_else(|| HdgError::Parse("truncated face list".into()))?;
            let t: Vec<&str> = l.split_whitespace().collect();
            if t.len() != 6 {
                return Err(perr(ln, "expected 'v0 v1 owner neighbor tag_solid tag_flux'"));
            }
            let idx = |s: &str| s.parse::<usize>().map_err(|_| perr(ln, "bad index"));
            let (v0, v1, owner) = (idx(t[0])?, idx(t[1])?, idx(t[2])?);
            let neighbor: i64 = t[3].parse().map_err(|_| perr(ln, "bad neighbor"))?;
            let solid = match t[4] {
                "dirichlet_u" => Some(SolidBc::DirichletU),
                "neumann_u" => Some(SolidBc::NeumannU),
                "none" => None,
                _ => return Err(perr(ln, "unknown solid tag")),
            };
            let flux = match t[5] {
                "dirichlet_psi" => Some(FluxBc::DirichletPsi),
                "neumann_p" => Some(FluxBc::NeumannP),
                "none" => None,
                _ => return Err(perr(ln, "unknown flux tag")),
            };
            let tags = match (solid, flux) {
                (Some(s), Some(f)) => Some(BoundaryTags::new(s, f)),
                (None, None) => None,
                _ => return Err(perr(ln, "a boundary face needs both a solid and a flux tag")),
            };
            records.insert(edge_key(v0, v1), (owner, neighbor, tags));
        }
        if lines.next().is_some() {
            return Err(HdgError::Parse("trailing content after face list".into()));
        }
        let mesh = Self::build(vertices, elements, |key, _, _| match records.get(&key) {
            Some((_, -1, Some(t))) => Ok(*t),
            _ => Err(HdgError::InvalidMesh(format!("boundary edge {key:?} lacks a tagged boundary record"))),
        })?;
        if mesh.faces.len() != nf {
            return Err(HdgError::InvalidMesh(format!(
                "face count {} does not match topology ({})",
                nf,
                mesh.faces.len()
            )));
        }
        for f in &mesh.faces {
            let key = (f.vertices[0], f.vertices[1]);
            let (owner, neighbor, tags) = records
                .get(&key)
                .ok_or_else(|| HdgError::InvalidMesh(format!("missing face record {key:?}")))?;
            let expected = f.neighbor.map_or(-1, |n| n as i64);
            if *owner != f.owner || *neighbor != expected || *tags != f.tags {
                return Err(HdgError::InvalidMesh(format!("face record {key:?} disagrees with topology")));
            }
        }
        Ok(mesh)
    }

    /// Hex SHA-256 of the text serialization.
    pub fn content_hash(&self) -> String {
        hex_digest(self.to_text().as_bytes())
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        write!(s, "{b:02x}").unwrap();
    }
    s
}
