//! Uncondensed assembly of the step operator, used as a reference for the
//! condensed solver and by the structural probes.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Col;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{HdgError, Result};

use super::condensed::Discretization;

/// Global index of every local unknown of element `e` in the unknown vector
/// [volume; free traces]; `None` marks constrained traces.
fn global_indices(disc: &Discretization, e: usize) -> Vec<Option<usize>> {
    let layout = &disc.layout;
    let nvol = layout.n_volume();
    let mut idx: Vec<Option<usize>> = layout.volume_range(e).map(Some).collect();
    idx.extend(disc.element_traces(e).iter().map(|&i| layout.free_index(i).map(|f| nvol + f)));
    idx
}

/// Solves (2M/dt + K) [y; lambda] = rhs directly, without condensation.
/// Arguments and results follow [`super::CondensedSystem::solve`].
pub fn monolithic_solve(disc: &Discretization, dt: f64, rhs_volume: &[f64], rhs_trace: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let layout = &disc.layout;
    let nvol = layout.n_volume();
    let n = nvol + layout.n_free();
    let mut b = Col::<f64>::zeros(n);
    for (i, &v) in rhs_volume.iter().enumerate() {
        b[i] = v;
    }
    for (i, &v) in rhs_trace.iter().enumerate() {
        if let Some(f) = layout.free_index(i) {
            b[nvol + f] = v;
        }
    }
    let mut triplets = Vec::new();
    for e in 0..disc.mesh.num_elements() {
        let op = disc.element(e);
        let nv = op.blocks.layout.n_volume();
        let idx = global_indices(disc, e);
        let traces = disc.element_traces(e);
        for (a, ia) in idx.iter().enumerate() {
            let Some(ra) = ia else { continue };
            for (c, ic) in idx.iter().enumerate() {
                let mut v = op.operator[(a, c)];
                if a < nv && c < nv {
                    v += 2.0 / dt * op.blocks.mass[(a, c)];
                }
                match ic {
                    Some(col) => {
                        if v != 0.0 {
                            triplets.push(Triplet::new(*ra, *col, v));
                        }
                    }
                    None => b[*ra] -= v * rhs_trace[traces[c - nv]],
                }
            }
        }
    }
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| HdgError::Solver(format!("monolithic assembly: {e}")))?;
    let lu = mat.sp_lu().map_err(|e| HdgError::Singular(format!("monolithic factorization: {e}")))?;
    lu.solve_in_place(b.as_mut());
    let volume = (0..nvol).map(|i| b[i]).collect();
    let mut traces = rhs_trace.to_vec();
    for (i, t) in traces.iter_mut().enumerate() {
        if let Some(f) = layout.free_index(i) {
            *t = b[nvol + f];
        }
    }
    Ok((volume, traces))
}

/// Dense global operator without mass and the dense global mass, both on
/// [volume; free traces]. Only meant for small meshes.
pub fn dense_global_operator(disc: &Discretization) -> (DMatrix<f64>, DMatrix<f64>) {
    let layout = &disc.layout;
    let n = layout.n_volume() + layout.n_free();
    let mut k = DMatrix::zeros(n, n);
    let mut m = DMatrix::zeros(n, n);
    for e in 0..disc.mesh.num_elements() {
        let op = disc.element(e);
        let nv = op.blocks.layout.n_volume();
        let idx = global_indices(disc, e);
        for (a, ia) in idx.iter().enumerate() {
            let Some(ra) = ia else { continue };
            for (c, ic) in idx.iter().enumerate() {
                let Some(cc) = ic else { continue };
                k[(*ra, *cc)] += op.operator[(a, c)];
                if a < nv && c < nv {
                    m[(*ra, *cc)] += op.blocks.mass[(a, c)];
                }
            }
        }
    }
    (k, m)
}

/// Skew part of the global operator restricted to the B_h coupling: the
/// operator with dissipation and stabilization removed.
pub fn dense_coupling_operator(disc: &Discretization) -> DMatrix<f64> {
    let layout = &disc.layout;
    let n = layout.n_volume() + layout.n_free();
    let mut k = DMatrix::zeros(n, n);
    for e in 0..disc.mesh.num_elements() {
        let b = &disc.element(e).blocks;
        let l = &b.layout;
        let (nw1, nv) = (l.n_w1(), l.n_volume());
        let idx = global_indices(disc, e);
        for i in 0..nw1 {
            for j in 0..l.n_w2() {
                let (Some(r), Some(c)) = (idx[i], idx[nw1 + j]) else { continue };
                k[(r, c)] += b.coupling[(i, j)];
                k[(c, r)] -= b.coupling[(i, j)];
            }
        }
        for a in 0..l.n_trace() {
            for j in 0..l.n_w2() {
                let (Some(r), Some(c)) = (idx[nv + a], idx[nw1 + j]) else { continue };
                k[(r, c)] += b.trace_coupling[(a, j)];
                k[(c, r)] -= b.trace_coupling[(a, j)];
            }
        }
    }
    k
}

/// Sampled boundedness ratio |B_h((v, q), (tau_E, tau_V, phi))| /
/// (||(tau_E, tau_V, phi)||_H2 |(v, q)|_UxQ) over random discrete fields,
/// returning the largest ratio seen. Velocity traces vanish on boundary faces.
pub fn bh_bound_probe(disc: &Discretization, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = &disc.layout;
    let nf = layout.nf();
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let y1: Vec<f64> = (0..layout.n_volume()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y2: Vec<f64> = (0..layout.n_volume()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut traces: Vec<f64> = (0..layout.n_trace_full()).map(|_| rng.random_range(-1.0..1.0)).collect();
        for (f, face) in disc.mesh.faces().iter().enumerate() {
            if face.is_boundary() {
                for a in 0..2 * nf {
                    traces[layout.trace_index(f, 0, 0) + a] = 0.0;
                }
            }
        }
        let ratio = bh_ratio(disc, &y1, &traces, &y2);
        if let Some(r) = ratio {
            worst = worst.max(r);
        }
    }
    worst
}

/// B_h ratio for given fields; `None` when either norm vanishes.
pub fn bh_ratio(disc: &Discretization, y1: &[f64], traces: &[f64], y2: &[f64]) -> Option<f64> {
    let layout = &disc.layout;
    let (mut bh, mut n2, mut n1) = (0.0, 0.0, 0.0);
    for e in 0..disc.mesh.num_elements() {
        let b = &disc.element(e).blocks;
        let l = &b.layout;
        let r = layout.volume_range(e);
        let w1 = DVector::from_column_slice(&y1[r.start..r.start + l.n_w1()]);
        let w2 = DVector::from_column_slice(&y2[r.start + l.n_w1()..r.end]);
        let lam = DVector::from_vec(disc.gather_traces(e, traces));
        bh += w1.dot(&(&b.coupling * &w2)) + lam.dot(&(&b.trace_coupling * &w2));
        let m2 = b.mass.view((l.n_w1(), l.n_w1()), (l.n_w2(), l.n_w2()));
        n2 += w2.dot(&(m2 * &w2));
        n1 += w1.dot(&(&b.seminorm * &w1));
        let (ju, jp) = b.jump_energies(&y1[r.clone()], lam.as_slice());
        n1 += ju + jp;
    }
    let denom = n2.sqrt() * n1.sqrt();
    (denom > 0.0).then(|| bh.abs() / denom)
}
