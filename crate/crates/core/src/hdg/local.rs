use nalgebra::DMatrix;

use crate::error::{HdgError, Result};
use crate::materials::{Material, Mat3, FRAME};
use crate::mesh::Mesh;
use crate::polybasis::{face_aligned, face_point, AffineMap, BasisTable, FaceBasis, QuadratureRule, Shape, VolumeBasis};

use super::layout::LocalLayout;

/// Basis tables shared by every element of a given degree.
#[derive(Clone, Debug)]
pub struct ReferenceElement {
    pub k: usize,
    pub exactness: usize,
    pub volume_basis: VolumeBasis,
    pub face_basis: FaceBasis,
    pub volume_rule: QuadratureRule,
    pub face_rule: QuadratureRule,
    /// P_{k+1} basis at the volume points.
    pub volume_table: BasisTable,
    /// P_{k+1} basis at the points of each local face.
    pub face_volume_tables: [BasisTable; 3],
    /// Face basis at the face points, for faces running along (index 0) or
    /// against (index 1) the global face orientation.
    pub face_tables: [BasisTable; 2],
}

impl ReferenceElement {
    /// Default scheme quadrature exactness 2(k+2)+2.
    pub fn default_exactness(k: usize) -> usize {
        2 * (k + 2) + 2
    }

    pub fn new(k: usize, exactness: usize) -> Result<Self> {
        if exactness < 2 * (k + 2) {
            return Err(HdgError::InvalidInput(format!(
                "scheme quadrature exactness {exactness} below 2(k+2) = {}",
                2 * (k + 2)
            )));
        }
        let volume_basis = VolumeBasis::new(k + 1)?;
        let face_basis = FaceBasis::new(k + 1);
        let volume_rule = QuadratureRule::new(Shape::Triangle, exactness)?;
        let face_rule = QuadratureRule::new(Shape::Segment, exactness)?;
        let volume_table = volume_basis.tabulate(&volume_rule);
        let face_volume_tables = [0, 1, 2].map(|f| {
            let mut rule = face_rule.clone();
            rule.points = face_rule.points.iter().map(|r| face_point(f, r[0])).collect();
            volume_basis.tabulate(&rule)
        });
        let mut flipped = face_rule.clone();
        flipped.points = face_rule.points.iter().map(|r| [1.0 - r[0], 0.0]).collect();
        let face_tables = [face_basis.tabulate(&face_rule), face_basis.tabulate(&flipped)];
        Ok(Self {
            k,
            exactness,
            volume_basis,
            face_basis,
            volume_rule,
            face_rule,
            volume_table,
            face_volume_tables,
            face_tables,
        })
    }
}

/// Geometric data of one element as seen by the local assembly.
#[derive(Clone, Copy, Debug)]
pub struct ElementGeometry {
    pub map: AffineMap,
    pub aligned: [bool; 3],
    pub face_lengths: [f64; 3],
    pub normals: [[f64; 2]; 3],
}

impl ElementGeometry {
    pub fn of(mesh: &Mesh, e: usize) -> Self {
        let faces = mesh.element_faces(e);
        Self {
            map: AffineMap::of_element(mesh, e),
            aligned: [0, 1, 2].map(|f| face_aligned(mesh, e, f)),
            face_lengths: faces.map(|f| mesh.faces()[f].length),
            normals: [0, 1, 2].map(|f| mesh.outward_normal(e, f)),
        }
    }
}

/// Element matrices of every bilinear form of the semi-discrete scheme.
///
/// Volume unknowns are split into w1 = (u, p) and w2 = (sigma_E, sigma_V, psi)
/// following [`LocalLayout`]; `lambda` denotes the local traces.
#[derive(Clone, Debug)]
pub struct LocalBlocks {
    pub layout: LocalLayout,
    /// Weighted masses: rho and chi on w1; A, omega^2 G and s on w2.
    pub mass: DMatrix<f64>,
    /// beta on p and omega G on sigma_V.
    pub dissipation: DMatrix<f64>,
    /// B_h volume-side coupling, rows w1 tests, columns w2 trials
    /// (element-boundary terms against the volume test functions included).
    pub coupling: DMatrix<f64>,
    /// B_h trace coupling, rows trace tests, columns w2 trials.
    pub trace_coupling: DMatrix<f64>,
    /// Stabilization (k+1)^2/h_F <w - w_hat, v - v_hat>, split by blocks.
    pub stab_vv: DMatrix<f64>,
    pub stab_vl: DMatrix<f64>,
    pub stab_ll: DMatrix<f64>,
    /// Gram matrix of eps(u) on the u block and of div(p) on the p block,
    /// used by seminorm probes.
    pub seminorm: DMatrix<f64>,
}

fn kron_frame(a: &Mat3, scale: f64, n0: usize, out: &mut DMatrix<f64>, row0: usize) {
    for c in 0..3 {
        for d in 0..3 {
            for j in 0..n0 {
                out[(row0 + c * n0 + j, row0 + d * n0 + j)] += scale * a[c][d];
            }
        }
    }
}

/// Assembles all local blocks of one element with constant coefficients.
pub fn assemble_local(reference: &ReferenceElement, geometry: &ElementGeometry, material: &Material) -> Result<LocalBlocks> {
    let k = reference.k;
    let layout = LocalLayout::new(k, material.viscous());
    let (n1, n0, nf) = (layout.n1, layout.n0, layout.nf);
    let det = geometry.map.det;
    if !(det > 0.0) || !det.is_finite() {
        return Err(HdgError::InvalidMesh(format!("degenerate element, Jacobian determinant {det}")));
    }
    let nv = layout.n_volume();
    let nw1 = layout.n_w1();
    let nw2 = layout.n_w2();
    let nl = layout.n_trace();
    let omega = material.omega;
    let alpha = material.alpha;

    let mut mass = DMatrix::zeros(nv, nv);
    let mut dissipation = DMatrix::zeros(nv, nv);
    for d in 0..2 {
        for i in 0..n1 {
            mass[(layout.u(d, i), layout.u(d, i))] = material.rho * det;
            mass[(layout.p(d, i), layout.p(d, i))] = material.chi * det;
            dissipation[(layout.p(d, i), layout.p(d, i))] = material.beta * det;
        }
    }
    kron_frame(&material.a_matrix(), det, n0, &mut mass, layout.sigma_e(0, 0));
    if layout.viscous {
        let g = material.g_matrix()?;
        kron_frame(&g, omega * omega * det, n0, &mut mass, layout.sigma_v(0, 0));
        kron_frame(&g, omega * det, n0, &mut dissipation, layout.sigma_v(0, 0));
    }
    for j in 0..n0 {
        mass[(layout.psi(j), layout.psi(j))] = material.s * det;
    }

    let mut coupling = DMatrix::zeros(nw1, nw2);
    let mut seminorm = DMatrix::zeros(nw1, nw1);
    let off2 = nw1;
    let vt = &reference.volume_table;
    let mut grads = vec![[0.0; 2]; n1];
    for (q, w) in reference.volume_rule.weights.iter().enumerate() {
        let w = w * det;
        let phi = vt.row(q);
        for (g, gr) in grads.iter_mut().zip(vt.grad_row(q)) {
            *g = geometry.map.grad(*gr);
        }
        for d in 0..2 {
            for i in 0..n1 {
                // frame coordinates of eps(phi_i e_d)
                let eps = [0, 1, 2].map(|c| FRAME[c][d][0] * grads[i][0] + FRAME[c][d][1] * grads[i][1]);
                let (ru, rp) = (layout.u(d, i), layout.p(d, i));
                for j in 0..n0 {
                    let wp = w * phi[j];
                    for c in 0..3 {
                        coupling[(ru, layout.sigma_e(c, j) - off2)] += wp * eps[c];
                        if layout.viscous {
                            coupling[(ru, layout.sigma_v(c, j) - off2)] += omega * wp * eps[c];
                        }
                    }
                    coupling[(ru, layout.psi(j) - off2)] -= alpha * wp * grads[i][d];
                    coupling[(rp, layout.psi(j) - off2)] -= wp * grads[i][d];
                }
                for d2 in 0..2 {
                    for i2 in 0..n1 {
                        let eps2 = [0, 1, 2].map(|c| FRAME[c][d2][0] * grads[i2][0] + FRAME[c][d2][1] * grads[i2][1]);
                        let e: f64 = (0..3).map(|c| eps[c] * eps2[c]).sum();
                        seminorm[(layout.u(d, i), layout.u(d2, i2))] += w * e;
                        seminorm[(layout.p(d, i), layout.p(d2, i2))] += w * grads[i][d] * grads[i2][d2];
                    }
                }
            }
        }
    }

    let mut trace_coupling = DMatrix::zeros(nl, nw2);
    let mut stab_vv = DMatrix::zeros(nw1, nw1);
    let mut stab_vl = DMatrix::zeros(nw1, nl);
    let mut stab_ll = DMatrix::zeros(nl, nl);
    let tau_scale = ((k + 1) * (k + 1)) as f64;
    for f in 0..3 {
        let h = geometry.face_lengths[f];
        let n = geometry.normals[f];
        let tau = tau_scale / h;
        let ft = &reference.face_tables[if geometry.aligned[f] { 0 } else { 1 }];
        let fvt = &reference.face_volume_tables[f];
        // (E_c n)_d
        let en = [0, 1, 2].map(|c| [0, 1].map(|d| FRAME[c][d][0] * n[0] + FRAME[c][d][1] * n[1]));
        for (q, w) in reference.face_rule.weights.iter().enumerate() {
            let w = w * h;
            let phi = fvt.row(q);
            let mu = ft.row(q);
            for d in 0..2 {
                for j in 0..n0 {
                    let wp = w * phi[j];
                    // volume test functions: -<tau_tot n, v> + <phi n, q>
                    for i in 0..n1 {
                        let (ru, rp) = (layout.u(d, i), layout.p(d, i));
                        for c in 0..3 {
                            coupling[(ru, layout.sigma_e(c, j) - off2)] -= wp * en[c][d] * phi[i];
                            if layout.viscous {
                                coupling[(ru, layout.sigma_v(c, j) - off2)] -= omega * wp * en[c][d] * phi[i];
                            }
                        }
                        coupling[(ru, layout.psi(j) - off2)] += alpha * wp * n[d] * phi[i];
                        coupling[(rp, layout.psi(j) - off2)] += wp * n[d] * phi[i];
                    }
                    // trace test functions: <tau_tot n, v_hat> - <phi n, q_hat>
                    for a in 0..nf {
                        let (ru, rp) = (layout.trace(f, d, a), layout.trace(f, 2 + d, a));
                        for c in 0..3 {
                            trace_coupling[(ru, layout.sigma_e(c, j) - off2)] += wp * en[c][d] * mu[a];
                            if layout.viscous {
                                trace_coupling[(ru, layout.sigma_v(c, j) - off2)] += omega * wp * en[c][d] * mu[a];
                            }
                        }
                        trace_coupling[(ru, layout.psi(j) - off2)] -= alpha * wp * n[d] * mu[a];
                        trace_coupling[(rp, layout.psi(j) - off2)] -= wp * n[d] * mu[a];
                    }
                }
                let tw = tau * w;
                for i in 0..n1 {
                    for j in 0..n1 {
                        let v = tw * phi[i] * phi[j];
                        stab_vv[(layout.u(d, i), layout.u(d, j))] += v;
                        stab_vv[(layout.p(d, i), layout.p(d, j))] += v;
                    }
                    for a in 0..nf {
                        let v = tw * phi[i] * mu[a];
                        stab_vl[(layout.u(d, i), layout.trace(f, d, a))] -= v;
                        stab_vl[(layout.p(d, i), layout.trace(f, 2 + d, a))] -= v;
                    }
                }
                for a in 0..nf {
                    for b in 0..nf {
                        let v = tw * mu[a] * mu[b];
                        stab_ll[(layout.trace(f, d, a), layout.trace(f, d, b))] += v;
                        stab_ll[(layout.trace(f, 2 + d, a), layout.trace(f, 2 + d, b))] += v;
                    }
                }
            }
        }
    }

    Ok(LocalBlocks {
        layout,
        mass,
        dissipation,
        coupling,
        trace_coupling,
        stab_vv,
        stab_vl,
        stab_ll,
        seminorm,
    })
}

impl LocalBlocks {
    /// Element operator without the mass term, on [w1, w2, lambda]:
    ///
    /// ```text
    /// [ D1 + Svv   B     Svl  ]
    /// [ -B^T       D2   -Bt^T ]
    /// [ Svl^T      Bt    Sll  ]
    /// ```
    pub fn operator(&self) -> DMatrix<f64> {
        let nw1 = self.layout.n_w1();
        let nv = self.layout.n_volume();
        let nl = self.layout.n_trace();
        let mut k = DMatrix::zeros(nv + nl, nv + nl);
        k.view_mut((0, 0), (nv, nv)).copy_from(&self.dissipation);
        let mut w1 = k.view_mut((0, 0), (nw1, nw1));
        w1 += &self.stab_vv;
        k.view_mut((0, nw1), (nw1, nv - nw1)).copy_from(&self.coupling);
        k.view_mut((nw1, 0), (nv - nw1, nw1)).copy_from(&(-self.coupling.transpose()));
        k.view_mut((0, nv), (nw1, nl)).copy_from(&self.stab_vl);
        k.view_mut((nv, 0), (nl, nw1)).copy_from(&self.stab_vl.transpose());
        k.view_mut((nw1, nv), (nv - nw1, nl)).copy_from(&(-self.trace_coupling.transpose()));
        k.view_mut((nv, nw1), (nl, nv - nw1)).copy_from(&self.trace_coupling);
        k.view_mut((nv, nv), (nl, nl)).copy_from(&self.stab_ll);
        k
    }

    /// Stabilization jump energies (u part, p part) of a local volume vector
    /// and its traces: (k+1)^2/h_F ||w - w_hat||^2 summed over faces.
    pub fn jump_energies(&self, volume: &[f64], traces: &[f64]) -> (f64, f64) {
        let l = &self.layout;
        let mut out = [0.0; 2];
        for (part, out) in out.iter_mut().enumerate() {
            let mut x = vec![0.0; l.n_w1() + l.n_trace()];
            for d in 0..2 {
                for i in 0..l.n1 {
                    let idx = if part == 0 { l.u(d, i) } else { l.p(d, i) };
                    x[idx] = volume[idx];
                }
                for f in 0..3 {
                    for a in 0..l.nf {
                        let idx = l.trace(f, 2 * part + d, a);
                        x[l.n_w1() + idx] = traces[idx];
                    }
                }
            }
            let (xv, xl) = x.split_at(l.n_w1());
            let xv = nalgebra::DVector::from_column_slice(xv);
            let xl = nalgebra::DVector::from_column_slice(xl);
            *out = xv.dot(&(&self.stab_vv * &xv)) + 2.0 * xv.dot(&(&self.stab_vl * &xl)) + xl.dot(&(&self.stab_ll * &xl));
        }
        (out[0], out[1])
    }
}

/// Volume coupling assembled independently in its integrated-by-parts form
/// -(div tau_tot, v) + (grad phi, q). Agrees with `LocalBlocks::coupling`
/// by the Green formula.
pub fn green_coupling(reference: &ReferenceElement, geo: &ElementGeometry, m: &Material) -> DMatrix<f64> {
    let l = LocalLayout::new(reference.k, m.viscous());
    let mut out = DMatrix::zeros(l.n_w1(), l.n_w2());
    let off2 = l.n_w1();
    let t = &reference.volume_table;
    for (q, w) in reference.volume_rule.weights.iter().enumerate() {
        let w = w * geo.map.det;
        let phi = t.row(q);
        let g: Vec<[f64; 2]> = t.grad_row(q).iter().map(|g| geo.map.grad(*g)).collect();
        for d in 0..2 {
            for i in 0..l.n1 {
                for j in 0..l.n0 {
                    for c in 0..3 {
                        // div(phi_j E_c)_d = sum_e E_c[d][e] d_e phi_j
                        let div = FRAME[c][d][0] * g[j][0] + FRAME[c][d][1] * g[j][1];
                        out[(l.u(d, i), l.sigma_e(c, j) - off2)] -= w * div * phi[i];
                        if l.viscous {
                            out[(l.u(d, i), l.sigma_v(c, j) - off2)] -= m.omega * w * div * phi[i];
                        }
                    }
                    out[(l.u(d, i), l.psi(j) - off2)] += m.alpha * w * g[j][d] * phi[i];
                    out[(l.p(d, i), l.psi(j) - off2)] += w * g[j][d] * phi[i];
                }
            }
        }
    }
    out
}

/// Largest entry of the difference between the assembled coupling and its
/// Green form, relative to max(|entries|, alpha, 1).
pub fn green_defect(reference: &ReferenceElement, geo: &ElementGeometry, m: &Material) -> Result<f64> {
    let b = assemble_local(reference, geo, m)?;
    let g = green_coupling(reference, geo, m);
    let scale = g.amax().max(m.alpha).max(1.0);
    Ok((&b.coupling - &g).amax() / scale)
}
