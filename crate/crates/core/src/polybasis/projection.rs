use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::Result;
use crate::mesh::{Mesh, Point};

use super::basis::{BasisTable, FaceBasis, VolumeBasis};
use super::quadrature::{QuadratureRule, Shape};

/// Reference-triangle vertices; local face `i` runs from `REF_VERTICES[i]` to
/// `REF_VERTICES[(i + 1) % 3]`.
pub const REF_VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

/// Affine map x = v0 + J xi from the reference triangle onto an element.
#[derive(Clone, Copy, Debug)]
pub struct AffineMap {
    pub origin: Point,
    pub jac: [[f64; 2]; 2],
    pub det: f64,
    pub inv: [[f64; 2]; 2],
}

impl AffineMap {
    pub fn new(v: [Point; 3]) -> Self {
        let jac = [[v[1][0] - v[0][0], v[2][0] - v[0][0]], [v[1][1] - v[0][1], v[2][1] - v[0][1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv = [[jac[1][1] / det, -jac[0][1] / det], [-jac[1][0] / det, jac[0][0] / det]];
        Self {
            origin: v[0],
            jac,
            det,
            inv,
        }
    }

    pub fn of_element(mesh: &Mesh, e: usize) -> Self {
        Self::new(mesh.element_vertices(e))
    }

    pub fn map(&self, xi: [f64; 2]) -> Point {
        [
            self.origin[0] + self.jac[0][0] * xi[0] + self.jac[0][1] * xi[1],
            self.origin[1] + self.jac[1][0] * xi[0] + self.jac[1][1] * xi[1],
        ]
    }

    /// Physical gradient from a reference gradient (J^-T g).
    pub fn grad(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv[0][0] * g[0] + self.inv[1][0] * g[1],
            self.inv[0][1] * g[0] + self.inv[1][1] * g[1],
        ]
    }
}

/// Reference point on local face `local` at edge parameter `r` (measured from
/// the face's first local vertex).
pub fn face_point(local: usize, r: f64) -> [f64; 2] {
    let a = REF_VERTICES[local];
    let b = REF_VERTICES[(local + 1) % 3];
    [a[0] + r * (b[0] - a[0]), a[1] + r * (b[1] - a[1])]
}

/// Whether local face `local` of element `e` runs along the stored global
/// face orientation (lower vertex index first).
pub fn face_aligned(mesh: &Mesh, e: usize, local: usize) -> bool {
    let tri = mesh.elements()[e];
    tri[local] < tri[(local + 1) % 3]
}

/// L2 projection onto P_m(K) of a C-component field, component-major.
///
/// The basis is orthonormal on the reference triangle, so the element Gram
/// matrix is |det J| times the identity and the projection is a weighted
/// moment computation.
pub fn project_volume<const C: usize>(
    map: &AffineMap,
    table: &BasisTable,
    rule: &QuadratureRule,
    f: impl Fn(Point) -> [f64; C],
) -> Vec<f64> {
    let n = table.size;
    let mut out = vec![0.0; C * n];
    for (q, (xi, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
        let v = f(map.map(*xi));
        let row = table.row(q);
        for c in 0..C {
            let wv = w * v[c];
            for i in 0..n {
                out[c * n + i] += wv * row[i];
            }
        }
    }
    out
}

/// L2 projection onto P_m of a C-component field on the segment from `a` to
/// `b`, component-major, in the orthonormal Legendre basis of [0, 1].
pub fn project_face<const C: usize>(
    a: Point,
    b: Point,
    table: &BasisTable,
    rule: &QuadratureRule,
    g: impl Fn(Point) -> [f64; C],
) -> Vec<f64> {
    let n = table.size;
    let mut out = vec![0.0; C * n];
    for (q, (s, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
        let s = s[0];
        let v = g([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
        let row = table.row(q);
        for c in 0..C {
            let wv = w * v[c];
            for i in 0..n {
                out[c * n + i] += wv * row[i];
            }
        }
    }
    out
}

/// Evaluates a component-major coefficient vector at a tabulated point.
pub fn evaluate<const C: usize>(coeffs: &[f64], row: &[f64]) -> [f64; C] {
    let n = row.len();
    let mut v = [0.0; C];
    for c in 0..C {
        v[c] = coeffs[c * n..(c + 1) * n].iter().zip(row).map(|(a, b)| a * b).sum();
    }
    v
}

/// Measured discrete trace constant: the largest value over elements K of
/// sup over xi in P_k(K) of ||h_F^(1/2) xi / (k+1)||_{dK} / ||xi||_K, from the
/// generalized eigenproblem of face mass against volume mass.
pub fn trace_constant_probe(mesh: &Mesh, k: usize) -> Result<f64> {
    let basis = VolumeBasis::new(k)?;
    let n = basis.size();
    let seg = QuadratureRule::new(Shape::Segment, 2 * k)?;
    let face_tables: Vec<Vec<Vec<f64>>> = (0..3)
        .map(|f| seg.points.iter().map(|s| basis.eval(face_point(f, s[0]))).collect())
        .collect();
    let weight = 1.0 / ((k + 1) * (k + 1)) as f64;
    let mut worst: f64 = 0.0;
    for e in 0..mesh.num_elements() {
        let det = AffineMap::of_element(mesh, e).det.abs();
        let mut m = DMatrix::<f64>::zeros(n, n);
        for (f, &gf) in mesh.element_faces(e).iter().enumerate() {
            let h = mesh.faces()[gf].length;
            // h_F weight times face measure h_F, over the volume mass |det J|
            let scale = weight * h * h / det;
            for (q, w) in seg.weights.iter().enumerate() {
                let v = &face_tables[f][q];
                for i in 0..n {
                    for j in 0..n {
                        m[(i, j)] += scale * w * v[i] * v[j];
                    }
                }
            }
        }
        let eig = SymmetricEigen::new(m).eigenvalues.max();
        worst = worst.max(eig.max(0.0).sqrt());
    }
    Ok(worst)
}

/// Tabulated reference data for a volume basis under one quadrature rule.
pub fn volume_table(degree: usize, exactness: usize) -> Result<(VolumeBasis, QuadratureRule, BasisTable)> {
    let basis = VolumeBasis::new(degree)?;
    let rule = QuadratureRule::new(Shape::Triangle, exactness)?;
    let table = basis.tabulate(&rule);
    Ok((basis, rule, table))
}

/// Tabulated reference data for a face basis under one quadrature rule.
pub fn face_table(degree: usize, exactness: usize) -> Result<(FaceBasis, QuadratureRule, BasisTable)> {
    let basis = FaceBasis::new(degree);
    let rule = QuadratureRule::new(Shape::Segment, exactness)?;
    let table = basis.tabulate(&rule);
    Ok((basis, rule, table))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::mesh::{BoundaryTags, Diagonal, Rect};

    fn unit_mesh(n: usize) -> Mesh {
        Mesh::structured(Rect::unit(), n, Diagonal::SouthWestNorthEast, |_, _| BoundaryTags::all_dirichlet()).unwrap()
    }

    /// L2 error of the projection over element e by an independent fine rule.
    fn l2_error(mesh: &Mesh, e: usize, m: usize, f: &dyn Fn(Point) -> f64) -> f64 {
        let (basis, rule, table) = volume_table(m, 2 * m + 8).unwrap();
        let map = AffineMap::of_element(mesh, e);
        let c = project_volume(&map, &table, &rule, |x| [f(x)]);
        let fine = QuadratureRule::new(Shape::Triangle, 2 * m + 20).unwrap();
        let mut err = 0.0;
        for (xi, w) in fine.points.iter().zip(&fine.weights) {
            let v: f64 = basis.eval(*xi).iter().zip(&c).map(|(a, b)| a * b).sum();
            err += w * map.det.abs() * (f(map.map(*xi)) - v).powi(2);
        }
        err
    }

    #[test]
    fn reproduces_polynomials() {
        let mesh = unit_mesh(2);
        for m in 0..=4 {
            for a in 0..=m {
                for b in 0..=(m - a) {
                    for e in 0..mesh.num_elements() {
                        let err = l2_error(&mesh, e, m, &|x| x[0].powi(a as i32) * x[1].powi(b as i32));
                        assert!(err.sqrt() < 1e-12, "m={m} a={a} b={b} err={err}");
                    }
                }
            }
        }
    }

    #[test]
    fn zero_field_projects_to_zero() {
        let mesh = unit_mesh(1);
        let (_, rule, table) = volume_table(3, 10).unwrap();
        let c = project_volume(&AffineMap::of_element(&mesh, 0), &table, &rule, |_| [0.0, 0.0, 0.0]);
        assert!(c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sine_error_decreases_with_degree() {
        let mesh = unit_mesh(1);
        let f = |x: Point| (PI * x[0]).sin();
        for m in 0..6 {
            assert!(l2_error(&mesh, 0, m + 1, &f) < l2_error(&mesh, 0, m, &f));
        }
    }

    #[test]
    fn residual_is_orthogonal_and_projection_idempotent() {
        let mesh = unit_mesh(2);
        let m = 3;
        let (basis, rule, table) = volume_table(m, 2 * m + 8).unwrap();
        let f = |x: Point| [(3.0 * x[0] + 0.2).exp() * (2.0 * x[1]).cos(), x[0] * x[1].sin()];
        for e in 0..mesh.num_elements() {
            let map = AffineMap::of_element(&mesh, e);
            let c = project_volume(&map, &table, &rule, f);
            // orthogonality of the residual
            for i in 0..basis.size() {
                for comp in 0..2 {
                    let mut r = 0.0;
                    for (q, (xi, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                        let ph: [f64; 2] = evaluate(&c, table.row(q));
                        r += w * (f(map.map(*xi))[comp] - ph[comp]) * table.row(q)[i];
                    }
                    assert!(r.abs() < 1e-12);
                }
            }
            // idempotence
            let c2 = project_volume(&map, &table, &rule, |x| {
                evaluate::<2>(&c, &basis.eval(mesh.reference_coords(e, x)))
            });
            for (a, b) in c.iter().zip(&c2) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn h_rate_of_projection_error() {
        let f = |x: Point| (PI * x[0]).sin() * (PI * x[1]).sin();
        for m in 0..=3 {
            let errs: Vec<f64> = [4, 8]
                .iter()
                .map(|&n| {
                    let mesh = unit_mesh(n);
                    (0..mesh.num_elements()).map(|e| l2_error(&mesh, e, m, &f)).sum::<f64>().sqrt()
                })
                .collect();
            let rate = (errs[0] / errs[1]).log2();
            assert!((rate - (m as f64 + 1.0)).abs() < 0.2, "m={m} rate={rate}");
        }
    }

    #[test]
    fn face_projection() {
        let (basis, rule, table) = face_table(3, 12).unwrap();
        let (a, b) = ([1.0, 0.0], [1.0, 1.0]);
        // linear data is exact
        let c = project_face(a, b, &table, &rule, |x| [2.0 * x[1] - 1.0, 3.0 + x[0]]);
        for s in [0.0, 0.3, 1.0] {
            let v: [f64; 2] = evaluate(&c, &basis.eval(s));
            assert!((v[0] - (2.0 * s - 1.0)).abs() < 1e-13);
            assert!((v[1] - 4.0).abs() < 1e-13);
        }
        // degree 0 gives the face average
        let (_, rule0, table0) = face_table(0, 12).unwrap();
        let c0 = project_face(a, b, &table0, &rule0, |x| [x[1] * x[1]]);
        assert!((c0[0] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn trace_constant_closed_form_for_constants() {
        let mesh = unit_mesh(1);
        let c = trace_constant_probe(&mesh, 0).unwrap();
        let sum_h2: f64 = mesh.element_faces(0).iter().map(|&f| mesh.faces()[f].length.powi(2)).sum();
        let expected = (sum_h2 / mesh.area(0)).sqrt();
        assert!((c - expected).abs() < 1e-12);
    }

    #[test]
    fn trace_constant_bounded() {
        let levels: Vec<f64> = [1, 2, 4, 8].iter().map(|&n| trace_constant_probe(&unit_mesh(n), 2).unwrap()).collect();
        for v in &levels {
            assert!((v - levels[0]).abs() < 1e-10 * levels[0]);
        }
        let ks: Vec<f64> = (0..=7).map(|k| trace_constant_probe(&unit_mesh(1), k).unwrap()).collect();
        assert!(ks.iter().all(|&c| c.is_finite() && c > 0.0 && c < 2.0 * ks[0]));
    }
}
