use std::collections::HashMap;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::Col;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{HdgError, Result};
use crate::materials::MaterialField;
use crate::mesh::Mesh;

use super::layout::DofLayout;
use super::local::{assemble_local, ElementGeometry, LocalBlocks, ReferenceElement};

/// Local blocks of one distinct element shape, with the assembled element
/// operator (everything except the mass).
#[derive(Clone, Debug)]
pub struct ElementOperator {
    pub blocks: LocalBlocks,
    pub operator: DMatrix<f64>,
}

/// Elements sharing Jacobian, face orientations and material share their
/// local matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct ShapeKey {
    jac: [i64; 4],
    aligned: [bool; 3],
    material: usize,
}

/// Mesh, coefficients, layout and cached local operators for one degree.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub mesh: Mesh,
    pub materials: MaterialField,
    pub layout: DofLayout,
    pub reference: ReferenceElement,
    shapes: Vec<ElementOperator>,
    element_shape: Vec<usize>,
    element_traces: Vec<Vec<usize>>,
}

impl Discretization {
    pub fn new(mesh: Mesh, materials: MaterialField, k: usize) -> Result<Self> {
        Self::with_exactness(mesh, materials, k, ReferenceElement::default_exactness(k))
    }

    pub fn with_exactness(mesh: Mesh, materials: MaterialField, k: usize, exactness: usize) -> Result<Self> {
        if materials.num_elements() != mesh.num_elements() {
            return Err(HdgError::InvalidInput(format!(
                "material field has {} elements, mesh has {}",
                materials.num_elements(),
                mesh.num_elements()
            )));
        }
        let reference = ReferenceElement::new(k, exactness)?;
        let layout = DofLayout::new(&mesh, &materials, k);
        let bb = mesh.bounding_box();
        let length = bb.width().max(bb.height());
        let mut index: HashMap<ShapeKey, usize> = HashMap::new();
        let mut shapes = Vec::new();
        let mut element_shape = Vec::with_capacity(mesh.num_elements());
        for e in 0..mesh.num_elements() {
            let geo = ElementGeometry::of(&mesh, e);
            let j = geo.map.jac;
            let key = ShapeKey {
                jac: [j[0][0], j[0][1], j[1][0], j[1][1]].map(|v| (v / length * 1e12).round() as i64),
                aligned: geo.aligned,
                material: materials.id(e),
            };
            let id = match index.get(&key) {
                Some(&id) => id,
                None => {
                    let blocks = assemble_local(&reference, &geo, materials.get(e))?;
                    let operator = blocks.operator();
                    shapes.push(ElementOperator { blocks, operator });
                    index.insert(key, shapes.len() - 1);
                    shapes.len() - 1
                }
            };
            element_shape.push(id);
        }
        let element_traces = (0..mesh.num_elements()).map(|e| layout.element_trace_indices(&mesh, e)).collect();
        Ok(Self {
            mesh,
            materials,
            layout,
            reference,
            shapes,
            element_shape,
            element_traces,
        })
    }

    pub fn k(&self) -> usize {
        self.reference.k
    }

    pub fn element(&self, e: usize) -> &ElementOperator {
        &self.shapes[self.element_shape[e]]
    }

    /// Number of distinct cached element operators.
    pub fn num_shapes(&self) -> usize {
        self.shapes.len()
    }

    /// Full trace indices of the local traces of element `e`.
    pub fn element_traces(&self, e: usize) -> &[usize] {
        &self.element_traces[e]
    }

    /// Local trace values of element `e` gathered from a full trace vector.
    pub fn gather_traces(&self, e: usize, full: &[f64]) -> Vec<f64> {
        self.element_traces[e].iter().map(|&i| full[i]).collect()
    }
}

/// Per-shape static condensation data for one time step size.
#[derive(Clone, Debug)]
struct CondensedShape {
    ainv: DMatrix<f64>,
    ainv_b: DMatrix<f64>,
    c_ainv: DMatrix<f64>,
    schur: DMatrix<f64>,
}

/// The Crank-Nicolson step operator condensed onto the free skeleton
/// unknowns and factorized once.
///
/// Each step solves (2M/dt + K) y_mid = r for the midpoint state, where K is
/// the full operator without mass and r collects loads and 2M/dt y^n.
pub struct CondensedSystem {
    pub dt: f64,
    shapes: Vec<CondensedShape>,
    lu: Option<Lu<usize, f64>>,
    factorizations: usize,
    n_free: usize,
}

impl CondensedSystem {
    pub fn new(disc: &Discretization, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(HdgError::InvalidInput(format!("time step must be positive, got {dt}")));
        }
        let shapes = disc
            .shapes
            .iter()
            .map(|op| condense_shape(op, dt))
            .collect::<Result<Vec<_>>>()?;
        let layout = &disc.layout;
        let n_free = layout.n_free();
        let mut sys = Self {
            dt,
            shapes,
            lu: None,
            factorizations: 0,
            n_free,
        };
        if n_free > 0 {
            let mut triplets = Vec::new();
            for e in 0..disc.mesh.num_elements() {
                let s = &sys.shapes[disc.element_shape[e]].schur;
                let idx = disc.element_traces(e);
                for (a, &ia) in idx.iter().enumerate() {
                    let Some(ra) = layout.free_index(ia) else { continue };
                    for (b, &ib) in idx.iter().enumerate() {
                        let Some(cb) = layout.free_index(ib) else { continue };
                        let v = s[(a, b)];
                        if v != 0.0 {
                            triplets.push(Triplet::new(ra, cb, v));
                        }
                    }
                }
            }
            sys.factorize(&triplets)?;
        }
        Ok(sys)
    }

    fn factorize(&mut self, triplets: &[Triplet<usize, usize, f64>]) -> Result<()> {
        let n = self.n_free;
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, triplets)
            .map_err(|e| HdgError::Solver(format!("skeleton matrix assembly: {e}")))?;
        let lu = mat
            .sp_lu()
            .map_err(|e| HdgError::Singular(format!("skeleton matrix factorization ({n} unknowns): {e}")))?;
        self.lu = Some(lu);
        self.factorizations += 1;
        Ok(())
    }

    /// Number of skeleton factorizations performed over the lifetime of this
    /// system.
    pub fn factorizations(&self) -> usize {
        self.factorizations
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    /// Solves one midpoint system.
    ///
    /// `rhs_volume` is the volume right-hand side r (loads plus 2M/dt y^n).
    /// `rhs_trace` has full trace length: free entries hold the trace-row
    /// right-hand side, constrained entries hold the prescribed trace values.
    /// Returns the midpoint volume vector and the full midpoint traces.
    pub fn solve(&self, disc: &Discretization, rhs_volume: &[f64], rhs_trace: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let layout = &disc.layout;
        let ne = disc.mesh.num_elements();
        let partial: Vec<(DVector<f64>, DVector<f64>)> = (0..ne)
            .into_par_iter()
            .map(|e| {
                let sh = &self.shapes[disc.element_shape[e]];
                let r = DVector::from_column_slice(&rhs_volume[layout.volume_range(e)]);
                let y = &sh.ainv * &r;
                let mut g = &sh.c_ainv * &r;
                let idx = disc.element_traces(e);
                if idx.iter().any(|&i| layout.is_constrained(i)) {
                    let lc = DVector::from_iterator(
                        idx.len(),
                        idx.iter().map(|&i| if layout.is_constrained(i) { rhs_trace[i] } else { 0.0 }),
                    );
                    g += &sh.schur * lc;
                }
                (y, g)
            })
            .collect();
        let mut b = Col::<f64>::zeros(self.n_free);
        for (i, &v) in rhs_trace.iter().enumerate() {
            if let Some(f) = layout.free_index(i) {
                b[f] = v;
            }
        }
        for (e, (_, g)) in partial.iter().enumerate() {
            for (a, &i) in disc.element_traces(e).iter().enumerate() {
                if let Some(f) = layout.free_index(i) {
                    b[f] -= g[a];
                }
            }
        }
        if let Some(lu) = &self.lu {
            lu.solve_in_place(b.as_mut());
        }
        let mut traces = rhs_trace.to_vec();
        for (i, t) in traces.iter_mut().enumerate() {
            if let Some(f) = layout.free_index(i) {
                *t = b[f];
            }
        }
        let mut volume = vec![0.0; rhs_volume.len()];
        let pieces: Vec<DVector<f64>> = partial
            .into_par_iter()
            .enumerate()
            .map(|(e, (y, _))| {
                let sh = &self.shapes[disc.element_shape[e]];
                let lam = DVector::from_vec(disc.gather_traces(e, &traces));
                y - &sh.ainv_b * lam
            })
            .collect();
        for (e, x) in pieces.iter().enumerate() {
            volume[layout.volume_range(e)].copy_from_slice(x.as_slice());
        }
        if volume.iter().chain(traces.iter()).any(|v| !v.is_finite()) {
            return Err(HdgError::Solver("non-finite value in skeleton solve".into()));
        }
        Ok((volume, traces))
    }
}

fn condense_shape(op: &ElementOperator, dt: f64) -> Result<CondensedShape> {
    let l = &op.blocks.layout;
    let (nv, nl) = (l.n_volume(), l.n_trace());
    let k = &op.operator;
    let a = k.view((0, 0), (nv, nv)) + &op.blocks.mass * (2.0 / dt);
    let ainv = a
        .lu()
        .try_inverse()
        .ok_or_else(|| HdgError::Singular("local volume block of the step operator".into()))?;
    let b = k.view((0, nv), (nv, nl));
    let c = k.view((nv, 0), (nl, nv));
    let ainv_b = &ainv * b;
    let c_ainv = c * &ainv;
    let schur = k.view((nv, nv), (nl, nl)) - c * &ainv_b;
    Ok(CondensedShape {
        ainv,
        ainv_b,
        c_ainv,
        schur,
    })
}

/// Traces consistent with a given volume state: the trace rows of the
/// operator solved face by face. The trace-trace block is diagonal per face
/// and component, so no global solve is needed.
pub fn consistent_traces(disc: &Discretization, volume: &[f64], rhs_trace: &[f64]) -> Vec<f64> {
    let layout = &disc.layout;
    let mut acc = vec![0.0; rhs_trace.len()];
    let mut diag = vec![0.0; rhs_trace.len()];
    for (i, &v) in rhs_trace.iter().enumerate() {
        if !layout.is_constrained(i) {
            acc[i] = v;
        }
    }
    for e in 0..disc.mesh.num_elements() {
        let op = disc.element(e);
        let l = &op.blocks.layout;
        let nv = l.n_volume();
        let x = DVector::from_column_slice(&volume[layout.volume_range(e)]);
        let r = op.operator.view((nv, 0), (l.n_trace(), nv)) * x;
        for (a, &i) in disc.element_traces(e).iter().enumerate() {
            if !layout.is_constrained(i) {
                acc[i] -= r[a];
                diag[i] += op.blocks.stab_ll[(a, a)];
            }
        }
    }
    let mut out = rhs_trace.to_vec();
    for i in 0..out.len() {
        if !layout.is_constrained(i) {
            out[i] = acc[i] / diag[i];
        }
    }
    out
}
