//! Crank-Nicolson time stepping with an energy ledger and checkpoints.
//!
//! A step solves for the midpoint unknowns z = (y, lambda), y = (y^n + y^{n+1})/2:
//! (2M/dt + K) z = (2M/dt) y^n + f(t^n + dt/2),
//! with the trace rows and the strongly imposed trace data taken at the
//! midpoint time, then sets y^{n+1} = 2y - y^n. The matrix is condensed and
//! factorized once per dt. Traces at t^{n+1} are recovered from y^{n+1} for
//! output, so a step depends on y^n only.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{HdgError, Result};
use crate::hdg::{consistent_traces, CondensedSystem, Discretization};
use crate::materials::SymTensor;
use crate::mesh::{FluxBc, Point, SolidBc};
use crate::polybasis::{project_face, project_volume, volume_table, AffineMap, BasisTable, QuadratureRule};

/// Pointwise initial values of the five fields.
pub trait InitialFields: Sync {
    fn u(&self, x: Point) -> [f64; 2];
    fn p(&self, x: Point) -> [f64; 2];
    fn sigma_e(&self, x: Point) -> SymTensor;
    fn sigma_v(&self, x: Point) -> SymTensor;
    fn psi(&self, x: Point) -> f64;
}

/// Vanishing initial data.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroFields;

impl InitialFields for ZeroFields {
    fn u(&self, _: Point) -> [f64; 2] {
        [0.0; 2]
    }
    fn p(&self, _: Point) -> [f64; 2] {
        [0.0; 2]
    }
    fn sigma_e(&self, _: Point) -> SymTensor {
        SymTensor::default()
    }
    fn sigma_v(&self, _: Point) -> SymTensor {
        SymTensor::default()
    }
    fn psi(&self, _: Point) -> f64 {
        0.0
    }
}

/// Sources and boundary data. Every method defaults to zero.
pub trait ProblemData: Sync {
    /// Body force F.
    fn body_force(&self, _x: Point, _t: f64) -> [f64; 2] {
        [0.0; 2]
    }
    /// Scalar source g.
    fn source(&self, _x: Point, _t: f64) -> f64 {
        0.0
    }
    /// Velocity on `dirichlet_u` faces.
    fn velocity(&self, _x: Point, _t: f64) -> [f64; 2] {
        [0.0; 2]
    }
    /// Flux vector on `neumann_p` faces.
    fn flux(&self, _x: Point, _t: f64) -> [f64; 2] {
        [0.0; 2]
    }
    /// Traction (total stress times outward normal) on `neumann_u` faces.
    fn traction(&self, _x: Point, _n: [f64; 2], _t: f64) -> [f64; 2] {
        [0.0; 2]
    }
    /// Scalar on `dirichlet_psi` faces.
    fn scalar(&self, _x: Point, _t: f64) -> f64 {
        0.0
    }
    /// True when F and g vanish identically, which skips their quadrature.
    fn loads_vanish(&self) -> bool {
        false
    }
    /// `Some(exactness)` when F and g factor as S(t) (F0(x), g0(x)). The
    /// profile is then integrated once with the given quadrature exactness.
    fn separable_exactness(&self) -> Option<usize> {
        None
    }
    /// S(t) of a separable load.
    fn time_factor(&self, _t: f64) -> f64 {
        1.0
    }
    /// (F0(x), g0(x)) of a separable load.
    fn load_profile(&self, _x: Point) -> ([f64; 2], f64) {
        ([0.0; 2], 0.0)
    }
    /// True when all boundary data vanish identically.
    fn boundary_data_vanish(&self) -> bool {
        false
    }
}

/// No sources and homogeneous boundary data.
#[derive(Clone, Copy, Debug, Default)]
pub struct Unforced;

impl ProblemData for Unforced {
    fn loads_vanish(&self) -> bool {
        true
    }
    fn boundary_data_vanish(&self) -> bool {
        true
    }
}

/// Volume coefficients of all elements at one time, laid out by
/// [`crate::hdg::DofLayout`].
#[derive(Clone, Debug, PartialEq)]
pub struct SystemState {
    pub time: f64,
    pub volume: Vec<f64>,
}

/// Skeleton coefficients (full trace vector) with the strong-constraint mask.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceState {
    pub values: Vec<f64>,
    pub constrained: Vec<bool>,
}

/// Energy bookkeeping of one step. Dissipation, jumps and external power are
/// evaluated on the step average (z^n + z^{n+1})/2; `energy` at the step end.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LedgerRow {
    pub step: usize,
    pub time: f64,
    pub energy: f64,
    /// ||beta^(1/2) p||^2.
    pub dissipation_p: f64,
    /// omega (G sigma_V, sigma_V).
    pub dissipation_sigma_v: f64,
    /// (k+1)^2/h_F weighted jump norms of u and p.
    pub jump_u: f64,
    pub jump_p: f64,
    /// Power of loads and boundary data.
    pub external_power: f64,
    /// (E^{n+1} - E^n)/dt + dissipation - external power.
    pub residual: f64,
}

impl LedgerRow {
    pub fn dissipation(&self) -> f64 {
        self.dissipation_p + self.dissipation_sigma_v + self.jump_u + self.jump_p
    }

    /// Identity residual relative to the size of the balanced terms.
    pub fn relative_residual(&self, previous_energy: f64, dt: f64) -> f64 {
        let scale = (previous_energy.max(self.energy) / dt)
            .max(self.dissipation())
            .max(self.external_power.abs());
        if scale > 0.0 {
            self.residual.abs() / scale
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnergyLedger {
    pub rows: Vec<LedgerRow>,
}

impl EnergyLedger {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,time,energy,dissipation_p,dissipation_sigma_v,jump_u,jump_p,external_power,residual\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e}",
                r.step, r.time, r.energy, r.dissipation_p, r.dissipation_sigma_v, r.jump_u, r.jump_p, r.external_power, r.residual
            );
        }
        s
    }
}

fn par_elements<T: Send>(ne: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..ne).into_par_iter().map(f).collect()
}

/// Projects the initial fields: u, p onto P_{k+1}, the stresses and psi onto
/// P_k, and the traces of u and p onto P_{k+1} of every face. Constrained
/// trace blocks are then overwritten with the boundary data at `t0`.
pub fn initialize(
    disc: &Discretization,
    fields: &dyn InitialFields,
    data: &dyn ProblemData,
    t0: f64,
) -> Result<(SystemState, TraceState)> {
    let layout = &disc.layout;
    let r = &disc.reference;
    let pieces = par_elements(disc.mesh.num_elements(), |e| {
        let l = layout.local(e);
        let map = AffineMap::of_element(&disc.mesh, e);
        let (n1, n0) = (l.n1, l.n0);
        let mut out = vec![0.0; l.n_volume()];
        let up = project_volume(&map, &r.volume_table, &r.volume_rule, |x| {
            let (u, p) = (fields.u(x), fields.p(x));
            [u[0], u[1], p[0], p[1]]
        });
        out[..4 * n1].copy_from_slice(&up);
        let lower = |c: &[f64], comps: usize| -> Vec<f64> {
            (0..comps).flat_map(|i| c[i * n1..i * n1 + n0].to_vec()).collect()
        };
        let se = project_volume(&map, &r.volume_table, &r.volume_rule, |x| fields.sigma_e(x).to_frame());
        out[l.sigma_e(0, 0)..l.sigma_e(0, 0) + 3 * n0].copy_from_slice(&lower(&se, 3));
        if l.viscous {
            let sv = project_volume(&map, &r.volume_table, &r.volume_rule, |x| fields.sigma_v(x).to_frame());
            out[l.sigma_v(0, 0)..l.sigma_v(0, 0) + 3 * n0].copy_from_slice(&lower(&sv, 3));
        }
        let psi = project_volume(&map, &r.volume_table, &r.volume_rule, |x| [fields.psi(x)]);
        out[l.psi(0)..l.psi(0) + n0].copy_from_slice(&psi[..n0]);
        out
    });
    let mut volume = Vec::with_capacity(layout.n_volume());
    for p in pieces {
        volume.extend(p);
    }
    let face_table = r.face_basis.tabulate(&r.face_rule);
    let nf = layout.nf();
    let mut values = vec![0.0; layout.n_trace_full()];
    for (f, face) in disc.mesh.faces().iter().enumerate() {
        let (a, b) = (disc.mesh.vertices()[face.vertices[0]], disc.mesh.vertices()[face.vertices[1]]);
        let c = project_face(a, b, &face_table, &r.face_rule, |x| {
            let (u, p) = (fields.u(x), fields.p(x));
            [u[0], u[1], p[0], p[1]]
        });
        let start = layout.trace_index(f, 0, 0);
        values[start..start + 4 * nf].copy_from_slice(&c);
    }
    let boundary = trace_rhs(disc, data, &face_table, t0);
    let constrained: Vec<bool> = (0..values.len()).map(|i| layout.is_constrained(i)).collect();
    for i in 0..values.len() {
        if constrained[i] {
            values[i] = boundary[i];
        }
    }
    Ok((SystemState { time: t0, volume }, TraceState { values, constrained }))
}

/// Full trace right-hand side at time `t`: boundary data terms on free
/// blocks, prescribed values on constrained blocks.
fn trace_rhs(disc: &Discretization, data: &dyn ProblemData, face_table: &BasisTable, t: f64) -> Vec<f64> {
    let layout = &disc.layout;
    let rule = &disc.reference.face_rule;
    let nf = layout.nf();
    let mut out = vec![0.0; layout.n_trace_full()];
    if data.boundary_data_vanish() {
        return out;
    }
    for (f, face) in disc.mesh.faces().iter().enumerate() {
        let Some(tags) = face.tags else { continue };
        let (a, b) = (disc.mesh.vertices()[face.vertices[0]], disc.mesh.vertices()[face.vertices[1]]);
        let (h, n) = (face.length, face.normal);
        let solid = match tags.solid {
            SolidBc::DirichletU => project_face(a, b, face_table, rule, |x| data.velocity(x, t)),
            SolidBc::NeumannU => project_face(a, b, face_table, rule, |x| data.traction(x, n, t))
                .into_iter()
                .map(|v| h * v)
                .collect(),
        };
        let flux = match tags.flux {
            FluxBc::NeumannP => project_face(a, b, face_table, rule, |x| data.flux(x, t)),
            FluxBc::DirichletPsi => project_face(a, b, face_table, rule, |x| {
                let s = data.scalar(x, t);
                [s * n[0], s * n[1]]
            })
            .into_iter()
            .map(|v| -h * v)
            .collect(),
        };
        let start = layout.trace_index(f, 0, 0);
        out[start..start + 2 * nf].copy_from_slice(&solid);
        out[start + 2 * nf..start + 4 * nf].copy_from_slice(&flux);
    }
    out
}

/// Advances states with one condensed Crank-Nicolson operator.
pub struct Stepper<'a> {
    disc: &'a Discretization,
    data: &'a dyn ProblemData,
    system: CondensedSystem,
    face_table: BasisTable,
    profile_loads: Option<Vec<f64>>,
}

impl<'a> Stepper<'a> {
    pub fn new(disc: &'a Discretization, data: &'a dyn ProblemData, dt: f64) -> Result<Self> {
        let system = CondensedSystem::new(disc, dt)?;
        let face_table = disc.reference.face_basis.tabulate(&disc.reference.face_rule);
        let profile_loads = match data.separable_exactness() {
            Some(ex) if !data.loads_vanish() => {
                let (_, rule, table) = volume_table(disc.k() + 1, ex)?;
                Some(load_vector(disc, &table, &rule, |x| {
                    let (f, g) = data.load_profile(x);
                    [f[0], f[1], g]
                }))
            }
            _ => None,
        };
        Ok(Self {
            disc,
            data,
            system,
            face_table,
            profile_loads,
        })
    }

    pub fn dt(&self) -> f64 {
        self.system.dt
    }

    pub fn system(&self) -> &CondensedSystem {
        &self.system
    }

    pub fn discretization(&self) -> &Discretization {
        self.disc
    }

    /// Load vector (F, v) + (g, phi) at time `t`.
    fn loads(&self, t: f64) -> Vec<f64> {
        let disc = self.disc;
        if self.data.loads_vanish() {
            return vec![0.0; disc.layout.n_volume()];
        }
        if let Some(profile) = &self.profile_loads {
            let s = self.data.time_factor(t);
            return profile.iter().map(|v| s * v).collect();
        }
        let r = &disc.reference;
        load_vector(disc, &r.volume_table, &r.volume_rule, |x| {
            let f = self.data.body_force(x, t);
            [f[0], f[1], self.data.source(x, t)]
        })
    }

    /// One Crank-Nicolson step.
    pub fn step(&self, state: &SystemState, step_index: usize) -> Result<(SystemState, TraceState, LedgerRow)> {
        let disc = self.disc;
        let layout = &disc.layout;
        let ne = disc.mesh.num_elements();
        let dt = self.dt();
        let t_end = state.time + dt;
        let t_mid = state.time + 0.5 * dt;
        let loads = self.loads(t_mid);
        let trace_mid = trace_rhs(disc, self.data, &self.face_table, t_mid);
        // (2M/dt) y^n + f(t^n + dt/2)
        let pieces = par_elements(ne, |e| {
            let range = layout.volume_range(e);
            let my = &disc.element(e).blocks.mass * DVector::from_column_slice(&state.volume[range.clone()]);
            range.enumerate().map(|(i, g)| 2.0 / dt * my[i] + loads[g]).collect::<Vec<f64>>()
        });
        let mut rhs = vec![0.0; layout.n_volume()];
        for (e, p) in pieces.into_iter().enumerate() {
            rhs[layout.volume_range(e)].copy_from_slice(&p);
        }
        let (avg, lambda) = self.system.solve(disc, &rhs, &trace_mid)?;
        let volume: Vec<f64> = avg.iter().zip(&state.volume).map(|(m, y)| 2.0 * m - y).collect();
        if volume.iter().any(|v| !v.is_finite()) {
            return Err(HdgError::NonFinite { step: step_index });
        }
        let traces = consistent_traces(disc, &volume, &trace_rhs(disc, self.data, &self.face_table, t_end));

        let e0 = energy(disc, &state.volume);
        let e1 = energy(disc, &volume);
        let mut row = LedgerRow {
            step: step_index,
            time: t_end,
            energy: e1,
            ..Default::default()
        };
        // dissipation and power at the midpoint
        let mut power: f64 = loads.iter().zip(&avg).map(|(f, y)| f * y).sum();
        let mut reaction = vec![0.0; layout.n_trace_full()];
        for e in 0..ne {
            let op = disc.element(e);
            let l = &op.blocks.layout;
            let range = layout.volume_range(e);
            let x = DVector::from_column_slice(&avg[range.clone()]);
            let lam = disc.gather_traces(e, &lambda);
            let (ju, jp) = op.blocks.jump_energies(&avg[range], &lam);
            row.jump_u += ju;
            row.jump_p += jp;
            let dx = &op.blocks.dissipation * &x;
            for i in 0..l.n_volume() {
                if i >= l.n_w1() {
                    row.dissipation_sigma_v += x[i] * dx[i];
                } else {
                    row.dissipation_p += x[i] * dx[i];
                }
            }
            let idx = disc.element_traces(e);
            if idx.iter().any(|&i| layout.is_constrained(i)) {
                let nv = l.n_volume();
                let mut z = DVector::zeros(nv + l.n_trace());
                z.rows_mut(0, nv).copy_from(&x);
                z.rows_mut(nv, l.n_trace()).copy_from_slice(&lam);
                let kz = op.operator.rows(nv, l.n_trace()) * z;
                for (a, &i) in idx.iter().enumerate() {
                    if layout.is_constrained(i) {
                        reaction[i] += kz[a];
                    }
                }
            }
        }
        for i in 0..lambda.len() {
            power += lambda[i]
                * if layout.is_constrained(i) {
                    reaction[i]
                } else {
                    trace_mid[i]
                };
        }
        row.external_power = power;
        row.residual = (e1 - e0) / dt + row.dissipation() - power;
        let constrained = (0..layout.n_trace_full()).map(|i| layout.is_constrained(i)).collect();
        Ok((SystemState { time: t_end, volume }, TraceState { values: traces, constrained }, row))
    }
}

/// Volume load vector of a field (F_x, F_y, g) under the given rule.
fn load_vector(disc: &Discretization, table: &BasisTable, rule: &QuadratureRule, f: impl Fn(Point) -> [f64; 3] + Sync) -> Vec<f64> {
    let layout = &disc.layout;
    let pieces = par_elements(disc.mesh.num_elements(), |e| {
        let l = layout.local(e);
        let map = AffineMap::of_element(&disc.mesh, e);
        let fg = project_volume(&map, table, rule, &f);
        let n = table.size;
        let mut v = vec![0.0; l.n_volume()];
        for i in 0..l.n1 {
            v[l.u(0, i)] = map.det * fg[i];
            v[l.u(1, i)] = map.det * fg[n + i];
        }
        for j in 0..l.n0 {
            v[l.psi(j)] = map.det * fg[2 * n + j];
        }
        v
    });
    let mut out = vec![0.0; layout.n_volume()];
    for (e, p) in pieces.into_iter().enumerate() {
        out[layout.volume_range(e)].copy_from_slice(&p);
    }
    out
}

/// Total energy 1/2 (||(u, p)||_H1^2 + ||(sigma_E, sigma_V, psi)||_H2^2).
pub fn energy(disc: &Discretization, volume: &[f64]) -> f64 {
    let layout = &disc.layout;
    let mut e = 0.0;
    for el in 0..disc.mesh.num_elements() {
        let w = DVector::from_column_slice(&volume[layout.volume_range(el)]);
        e += w.dot(&(&disc.element(el).blocks.mass * &w));
    }
    0.5 * e
}

/// Result of [`run`].
#[derive(Clone, Debug)]
pub struct RunOutput<P> {
    pub state: SystemState,
    pub traces: TraceState,
    pub ledger: EnergyLedger,
    pub steps: usize,
    /// (requested time, step index, probe value).
    pub probes: Vec<(f64, usize, P)>,
}

/// Number of steps of size `dt` covering `duration`, which must be an
/// integer multiple of `dt` up to roundoff.
pub fn step_count(duration: f64, dt: f64) -> Result<usize> {
    if !(duration > 0.0) || !(dt > 0.0) {
        return Err(HdgError::InvalidInput(format!("need T > 0 and dt > 0, got T = {duration}, dt = {dt}")));
    }
    let n = (duration / dt).round();
    if (n * dt - duration).abs() > 1e-9 * duration || n < 1.0 {
        return Err(HdgError::InvalidInput(format!("T = {duration} is not a multiple of dt = {dt}")));
    }
    Ok(n as usize)
}

/// Runs from `state` over `duration`, sampling `probe` at the step nearest
/// each requested absolute time.
pub fn run<P>(
    stepper: &Stepper,
    state: SystemState,
    traces: TraceState,
    duration: f64,
    probe_times: &[f64],
    mut probe: impl FnMut(&SystemState, &TraceState) -> P,
) -> Result<RunOutput<P>> {
    let dt = stepper.dt();
    let steps = step_count(duration, dt)?;
    let t0 = state.time;
    let targets: Vec<(f64, usize)> = probe_times
        .iter()
        .map(|&t| (t, (((t - t0) / dt).round().max(0.0) as usize).min(steps)))
        .collect();
    let mut probes = Vec::new();
    let mut take = |n: usize, s: &SystemState, tr: &TraceState, probes: &mut Vec<(f64, usize, P)>| {
        for &(t, target) in &targets {
            if target == n {
                probes.push((t, n, probe(s, tr)));
            }
        }
    };
    let mut ledger = EnergyLedger {
        rows: vec![LedgerRow {
            step: 0,
            time: t0,
            energy: energy(stepper.discretization(), &state.volume),
            ..Default::default()
        }],
    };
    take(0, &state, &traces, &mut probes);
    let (mut state, mut traces) = (state, traces);
    for n in 1..=steps {
        let (mut s, tr, row) = stepper.step(&state, n)?;
        // keep time free of accumulated roundoff
        s.time = t0 + n as f64 * dt;
        ledger.rows.push(row);
        take(n, &s, &tr, &mut probes);
        state = s;
        traces = tr;
    }
    Ok(RunOutput {
        state,
        traces,
        ledger,
        steps,
        probes,
    })
}

const CHECKPOINT_MAGIC: &str = "hdgz-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

/// Writes a text checkpoint. Values use the shortest representation that
/// parses back to the same bits.
pub fn write_checkpoint(path: &Path, disc: &Discretization, state: &SystemState, traces: &TraceState) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}");
    let _ = writeln!(s, "mesh {}", disc.mesh.content_hash());
    let _ = writeln!(s, "k {}", disc.k());
    let _ = writeln!(s, "time {:?}", state.time);
    let _ = writeln!(s, "volume {}", state.volume.len());
    for v in &state.volume {
        let _ = writeln!(s, "{v:?}");
    }
    let _ = writeln!(s, "traces {}", traces.values.len());
    for v in &traces.values {
        let _ = writeln!(s, "{v:?}");
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Reads a checkpoint written by [`write_checkpoint`] for the same mesh and
/// degree.
pub fn read_checkpoint(path: &Path, disc: &Discretization) -> Result<(SystemState, TraceState)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let mut next = |what: &str| lines.next().ok_or_else(|| HdgError::Parse(format!("checkpoint truncated at {what}")));
    fn field<'t>(line: &'t str, name: &str) -> Result<&'t str> {
        line.strip_prefix(name)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| HdgError::Parse(format!("expected '{name}', found '{line}'")))
    }
    fn number<T: std::str::FromStr>(s: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        s.trim().parse::<T>().map_err(|e| HdgError::Parse(format!("'{s}': {e}")))
    }
    let version: u32 = number(field(next("header")?, CHECKPOINT_MAGIC)?)?;
    if version != CHECKPOINT_VERSION {
        return Err(HdgError::Parse(format!("unsupported checkpoint version {version}")));
    }
    if field(next("mesh")?, "mesh")? != disc.mesh.content_hash() {
        return Err(HdgError::Parse("checkpoint belongs to a different mesh".into()));
    }
    let k: usize = number(field(next("k")?, "k")?)?;
    if k != disc.k() {
        return Err(HdgError::Parse(format!("checkpoint degree {k} differs from {}", disc.k())));
    }
    let time: f64 = number(field(next("time")?, "time")?)?;
    let mut block = |name: &str, expected: usize| -> Result<Vec<f64>> {
        let n: usize = number(field(next(name)?, name)?)?;
        if n != expected {
            return Err(HdgError::Parse(format!("{name} has {n} values, expected {expected}")));
        }
        (0..n).map(|_| number(next(name)?)).collect()
    };
    let volume = block("volume", disc.layout.n_volume())?;
    let values = block("traces", disc.layout.n_trace_full())?;
    let constrained = (0..values.len()).map(|i| disc.layout.is_constrained(i)).collect();
    Ok((SystemState { time, volume }, TraceState { values, constrained }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::{preset, MaterialField};
    use crate::mesh::{BoundaryTags, Diagonal, Mesh, Rect};

    struct Smooth;

    impl InitialFields for Smooth {
        fn u(&self, x: Point) -> [f64; 2] {
            [(3.0 * x[0]).sin() * x[1], (2.0 * x[1]).cos() - x[0]]
        }
        fn p(&self, x: Point) -> [f64; 2] {
            [x[0] * x[1], (x[0] - x[1]).sin()]
        }
        fn sigma_e(&self, x: Point) -> SymTensor {
            SymTensor::new(x[0].exp(), x[1] * x[1], 0.5 * x[0])
        }
        fn sigma_v(&self, x: Point) -> SymTensor {
            SymTensor::new(x[1], -x[0], (x[0] * x[1]).cos())
        }
        fn psi(&self, x: Point) -> f64 {
            (x[0] + 2.0 * x[1]).sin()
        }
    }

    /// Nonzero data of every kind.
    struct Driven;

    impl ProblemData for Driven {
        fn body_force(&self, x: Point, t: f64) -> [f64; 2] {
            [x[1] * t.cos(), x[0] - t]
        }
        fn source(&self, x: Point, t: f64) -> f64 {
            (x[0] * t).sin()
        }
        fn velocity(&self, x: Point, t: f64) -> [f64; 2] {
            [t * x[1], 0.3 * t]
        }
        fn flux(&self, x: Point, t: f64) -> [f64; 2] {
            [x[0] * t, -t]
        }
        fn traction(&self, x: Point, n: [f64; 2], t: f64) -> [f64; 2] {
            [n[0] * t + x[1], n[1] * t]
        }
        fn scalar(&self, x: Point, t: f64) -> f64 {
            (x[0] + t).cos()
        }
    }

    fn disc(n: usize, k: usize, tags: impl Fn(Point, Point) -> BoundaryTags) -> Discretization {
        let mesh = Mesh::structured(Rect::unit(), n, Diagonal::Alternating, tags).unwrap();
        let mat = MaterialField::from_fn(&mesh, |x| {
            let m = preset("l1").unwrap();
            if x[0] < 0.5 {
                m
            } else {
                m.with_omega(0.0)
            }
        })
        .unwrap();
        Discretization::new(mesh, mat, k).unwrap()
    }

    fn mixed(_mid: Point, n: [f64; 2]) -> BoundaryTags {
        if n[0].abs() > 0.5 {
            BoundaryTags::all_dirichlet()
        } else if n[1] < 0.0 {
            BoundaryTags::new(SolidBc::NeumannU, FluxBc::NeumannP)
        } else {
            BoundaryTags::new(SolidBc::NeumannU, FluxBc::DirichletPsi)
        }
    }

    #[test]
    fn zero_state_stays_zero() {
        let d = disc(2, 1, |_, _| BoundaryTags::all_dirichlet());
        let (s, t) = initialize(&d, &ZeroFields, &Unforced, 0.0).unwrap();
        let stepper = Stepper::new(&d, &Unforced, 0.01).unwrap();
        let out = run(&stepper, s, t, 0.1, &[], |_, _| ()).unwrap();
        assert!(out.state.volume.iter().chain(&out.traces.values).all(|&v| v == 0.0));
        assert!(out.ledger.rows.iter().all(|r| r.energy == 0.0));
    }

    #[test]
    fn step_count_and_ledger_length() {
        let d = disc(1, 0, |_, _| BoundaryTags::all_dirichlet());
        let (s, t) = initialize(&d, &Smooth, &Unforced, 0.0).unwrap();
        let stepper = Stepper::new(&d, &Unforced, 0.1).unwrap();
        let out = run(&stepper, s, t, 0.3, &[], |_, _| ()).unwrap();
        assert_eq!(out.steps, 3);
        assert_eq!(out.ledger.len(), 4);
        assert!((out.state.time - 0.3).abs() < 1e-15);
        assert!(step_count(0.35, 0.1).is_err());
        assert!(step_count(0.0, 0.1).is_err());
    }

    #[test]
    fn unforced_energy_never_increases() {
        let d = disc(2, 1, |_, _| BoundaryTags::all_dirichlet());
        for dt in [1e-4, 1e-3, 1e-2, 1e-1, 1.0] {
            let (s, t) = initialize(&d, &Smooth, &Unforced, 0.0).unwrap();
            let stepper = Stepper::new(&d, &Unforced, dt).unwrap();
            let out = run(&stepper, s, t, 20.0 * dt, &[], |_, _| ()).unwrap();
            let rows = &out.ledger.rows;
            assert!(rows[0].energy > 0.0);
            for w in rows.windows(2) {
                assert!(w[1].energy <= w[0].energy * (1.0 + 1e-12), "dt={dt}");
                assert!(w[1].relative_residual(w[0].energy, dt) < 1e-9);
            }
        }
    }

    #[test]
    fn energy_identity_with_data_of_every_kind() {
        for k in [0, 2] {
            let d = disc(2, k, mixed);
            let (s, t) = initialize(&d, &Smooth, &Driven, 0.0).unwrap();
            let dt = 0.02;
            let stepper = Stepper::new(&d, &Driven, dt).unwrap();
            let out = run(&stepper, s, t, 10.0 * dt, &[], |_, _| ()).unwrap();
            for w in out.ledger.rows.windows(2) {
                let rel = w[1].relative_residual(w[0].energy, dt);
                assert!(rel < 1e-9, "k={k} step {} residual {rel:e}", w[1].step);
                assert!(w[1].external_power != 0.0);
            }
        }
    }

    #[test]
    fn constrained_traces_follow_the_data() {
        let d = disc(2, 1, mixed);
        let (s, t) = initialize(&d, &Smooth, &Driven, 0.0).unwrap();
        let stepper = Stepper::new(&d, &Driven, 0.05).unwrap();
        let out = run(&stepper, s, t, 0.1, &[], |_, _| ()).unwrap();
        let table = d.reference.face_basis.tabulate(&d.reference.face_rule);
        let expected = trace_rhs(&d, &Driven, &table, 0.1);
        let mut count = 0;
        for i in 0..expected.len() {
            if out.traces.constrained[i] {
                assert!((out.traces.values[i] - expected[i]).abs() < 1e-14);
                count += 1;
            }
        }
        assert!(count > 0);
    }

    #[test]
    fn separable_loads_match_direct_quadrature() {
        struct Direct;
        struct Separable;
        fn profile(x: Point) -> ([f64; 2], f64) {
            ([x[0] * x[1], 1.0 - x[0]], x[1] * x[1])
        }
        impl ProblemData for Direct {
            fn body_force(&self, x: Point, t: f64) -> [f64; 2] {
                profile(x).0.map(|v| v * t.sin())
            }
            fn source(&self, x: Point, t: f64) -> f64 {
                profile(x).1 * t.sin()
            }
        }
        impl ProblemData for Separable {
            fn separable_exactness(&self) -> Option<usize> {
                Some(20)
            }
            fn time_factor(&self, t: f64) -> f64 {
                t.sin()
            }
            fn load_profile(&self, x: Point) -> ([f64; 2], f64) {
                profile(x)
            }
        }
        let d = disc(2, 1, mixed);
        let a = Stepper::new(&d, &Direct, 0.1).unwrap().loads(0.7);
        let b = Stepper::new(&d, &Separable, 0.1).unwrap().loads(0.7);
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(scale > 0.0);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14 * scale);
        }
    }

    #[test]
    fn nan_data_is_reported_with_the_step() {
        struct Bad;
        impl ProblemData for Bad {
            fn source(&self, _: Point, t: f64) -> f64 {
                if t > 0.025 {
                    f64::NAN
                } else {
                    0.0
                }
            }
        }
        let d = disc(1, 0, |_, _| BoundaryTags::all_dirichlet());
        let (s, t) = initialize(&d, &ZeroFields, &Bad, 0.0).unwrap();
        let stepper = Stepper::new(&d, &Bad, 0.01).unwrap();
        match run(&stepper, s, t, 0.05, &[], |_, _| ()) {
            Err(HdgError::NonFinite { step }) => assert_eq!(step, 3),
            Err(HdgError::Solver(_)) => {}
            other => panic!("unexpected {:?}", other.map(|o| o.steps)),
        }
    }

    #[test]
    fn restart_from_checkpoint_matches_a_single_run() {
        let d = disc(2, 1, mixed);
        let dt = 0.01;
        let stepper = Stepper::new(&d, &Driven, dt).unwrap();
        let (s, t) = initialize(&d, &Smooth, &Driven, 0.0).unwrap();
        let full = run(&stepper, s.clone(), t.clone(), 0.2, &[], |_, _| ()).unwrap();
        let half = run(&stepper, s, t, 0.1, &[], |_, _| ()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.ckpt");
        write_checkpoint(&path, &d, &half.state, &half.traces).unwrap();
        let (s2, t2) = read_checkpoint(&path, &d).unwrap();
        assert_eq!(s2, half.state);
        assert_eq!(t2, half.traces);
        let rest = run(&stepper, s2, t2, 0.1, &[], |_, _| ()).unwrap();
        let scale = full.state.volume.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in rest.state.volume.iter().zip(&full.state.volume) {
            assert!((a - b).abs() <= 1e-12 * scale);
        }
        let other = disc(2, 2, mixed);
        assert!(read_checkpoint(&path, &other).is_err());
    }

    #[test]
    fn probes_sample_the_nearest_step() {
        let d = disc(1, 0, |_, _| BoundaryTags::all_dirichlet());
        let (s, t) = initialize(&d, &Smooth, &Unforced, 0.0).unwrap();
        let stepper = Stepper::new(&d, &Unforced, 0.1).unwrap();
        let out = run(&stepper, s, t, 0.5, &[0.0, 0.21, 0.5], |s, _| s.time).unwrap();
        let steps: Vec<usize> = out.probes.iter().map(|p| p.1).collect();
        assert_eq!(steps, vec![0, 2, 5]);
        assert!((out.probes[1].2 - 0.2).abs() < 1e-15);
    }
}
