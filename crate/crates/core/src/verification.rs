//! Manufactured solution, weighted error norms and convergence studies.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::Result;
use crate::hdg::Discretization;
use crate::materials::{Lame, Material, MaterialField, SymTensor};
use crate::mesh::{BoundaryTags, Diagonal, FluxBc, Mesh, Point, Rect, SolidBc};
use crate::polybasis::{volume_table, AffineMap};
use crate::timestepper::{initialize, run, step_count, InitialFields, ProblemData, Stepper, SystemState};

const TAU: f64 = 2.0 * PI;

/// Closed-form solution on the unit square with uniform coefficients.
///
/// With Psi = sin(pi x) sin(pi y) and
/// U = (2 pi y sin(pi x) cos(pi y), 2 pi x cos(pi x) sin(pi y)):
/// psi = Psi cos(2 pi t), u = U cos(2 pi t), sigma_E = C eps(U) sin(2 pi t)/(2 pi),
/// sigma_V = (D - C) eps(U) a(t), p = -grad Psi b(t), with a and b the
/// periodic solutions of the two relaxation laws.
#[derive(Clone, Copy, Debug)]
pub struct Mms {
    pub material: Material,
}

/// Spatial factors and their derivatives at one point.
#[derive(Clone, Copy, Debug)]
struct Spatial {
    psi: f64,
    grad_psi: [f64; 2],
    u: [f64; 2],
    /// `du[i][j] = d_j U_i`.
    du: [[f64; 2]; 2],
    lap_u: [f64; 2],
    grad_div_u: [f64; 2],
    div_u: f64,
}

fn spatial(x: Point) -> Spatial {
    let (sx, cx) = (PI * x[0]).sin_cos();
    let (sy, cy) = (PI * x[1]).sin_cos();
    let (px, py) = (x[0], x[1]);
    let pi2 = PI * PI;
    let pi3 = pi2 * PI;
    Spatial {
        psi: sx * sy,
        grad_psi: [PI * cx * sy, PI * sx * cy],
        u: [TAU * py * sx * cy, TAU * px * cx * sy],
        du: [
            [2.0 * pi2 * py * cx * cy, TAU * sx * cy - 2.0 * pi2 * py * sx * sy],
            [TAU * cx * sy - 2.0 * pi2 * px * sx * sy, 2.0 * pi2 * px * cx * cy],
        ],
        lap_u: [
            -4.0 * pi3 * py * sx * cy - 4.0 * pi2 * sx * sy,
            -4.0 * pi3 * px * cx * sy - 4.0 * pi2 * sx * sy,
        ],
        grad_div_u: [
            2.0 * pi2 * cx * cy - 2.0 * pi3 * (px + py) * sx * cy,
            2.0 * pi2 * cx * cy - 2.0 * pi3 * (px + py) * cx * sy,
        ],
        div_u: 2.0 * pi2 * (px + py) * cx * cy,
    }
}

fn div_stiffness(l: &Lame, s: &Spatial) -> [f64; 2] {
    [0, 1].map(|i| l.mu * s.lap_u[i] + (l.mu + l.lambda) * s.grad_div_u[i])
}

impl Mms {
    /// Builds the solution for a uniform coefficient field.
    pub fn new(materials: &MaterialField) -> Result<Self> {
        let material = *materials.uniform_material()?;
        material.validate()?;
        Ok(Self { material })
    }

    pub fn from_material(material: Material) -> Result<Self> {
        material.validate()?;
        Ok(Self { material })
    }

    /// Time factor of sigma_V and its derivative.
    pub fn viscous_factor(&self, t: f64) -> (f64, f64) {
        let w = self.material.omega;
        let (s, c) = (TAU * t).sin_cos();
        let den = 1.0 + (TAU * w).powi(2);
        ((c + TAU * w * s) / den, (-TAU * s + TAU * TAU * w * c) / den)
    }

    /// Time factor of p (without the minus sign) and its derivative.
    pub fn flux_factor(&self, t: f64) -> (f64, f64) {
        let (beta, chi) = (self.material.beta, self.material.chi);
        let (s, c) = (TAU * t).sin_cos();
        let den = beta * beta + (TAU * chi).powi(2);
        ((beta * c + TAU * chi * s) / den, (-TAU * beta * s + TAU * TAU * chi * c) / den)
    }

    pub fn psi(&self, x: Point, t: f64) -> f64 {
        spatial(x).psi * (TAU * t).cos()
    }

    pub fn psi_dot(&self, x: Point, t: f64) -> f64 {
        -TAU * spatial(x).psi * (TAU * t).sin()
    }

    pub fn u(&self, x: Point, t: f64) -> [f64; 2] {
        let c = (TAU * t).cos();
        spatial(x).u.map(|v| v * c)
    }

    pub fn u_dot(&self, x: Point, t: f64) -> [f64; 2] {
        let s = -TAU * (TAU * t).sin();
        spatial(x).u.map(|v| v * s)
    }

    /// eps(u) at (x, t).
    pub fn strain(&self, x: Point, t: f64) -> SymTensor {
        SymTensor::sym_grad(spatial(x).du).scale((TAU * t).cos())
    }

    pub fn div_u(&self, x: Point, t: f64) -> f64 {
        spatial(x).div_u * (TAU * t).cos()
    }

    pub fn sigma_e(&self, x: Point, t: f64) -> SymTensor {
        let e = SymTensor::sym_grad(spatial(x).du);
        self.material.apply_c(&e).scale((TAU * t).sin() / TAU)
    }

    pub fn sigma_e_dot(&self, x: Point, t: f64) -> SymTensor {
        let e = SymTensor::sym_grad(spatial(x).du);
        self.material.apply_c(&e).scale((TAU * t).cos())
    }

    /// sigma_V; zero on non-viscous materials, where it is not an unknown.
    pub fn sigma_v(&self, x: Point, t: f64) -> SymTensor {
        match self.material.viscous_pair() {
            Ok(dc) => dc.apply(&SymTensor::sym_grad(spatial(x).du)).scale(self.viscous_factor(t).0),
            Err(_) => SymTensor::default(),
        }
    }

    pub fn sigma_v_dot(&self, x: Point, t: f64) -> SymTensor {
        match self.material.viscous_pair() {
            Ok(dc) => dc.apply(&SymTensor::sym_grad(spatial(x).du)).scale(self.viscous_factor(t).1),
            Err(_) => SymTensor::default(),
        }
    }

    pub fn p(&self, x: Point, t: f64) -> [f64; 2] {
        let b = self.flux_factor(t).0;
        spatial(x).grad_psi.map(|g| -g * b)
    }

    pub fn p_dot(&self, x: Point, t: f64) -> [f64; 2] {
        let b = self.flux_factor(t).1;
        spatial(x).grad_psi.map(|g| -g * b)
    }

    pub fn grad_psi(&self, x: Point, t: f64) -> [f64; 2] {
        let c = (TAU * t).cos();
        spatial(x).grad_psi.map(|g| g * c)
    }

    /// F = rho u_t - div(sigma_E + omega sigma_V - alpha psi I).
    pub fn body_force(&self, x: Point, t: f64) -> [f64; 2] {
        let m = &self.material;
        let sp = spatial(x);
        let (s, c) = (TAU * t).sin_cos();
        let div_e = div_stiffness(&m.c, &sp).map(|v| v * s / TAU);
        let div_v = match m.viscous_pair() {
            Ok(dc) => {
                let a = self.viscous_factor(t).0;
                div_stiffness(&dc, &sp).map(|v| v * a)
            }
            Err(_) => [0.0; 2],
        };
        [0, 1].map(|i| -m.rho * TAU * s * sp.u[i] - div_e[i] - m.omega * div_v[i] + m.alpha * c * sp.grad_psi[i])
    }

    /// g = s psi_t + div p + alpha div u.
    pub fn source(&self, x: Point, t: f64) -> f64 {
        let m = &self.material;
        let sp = spatial(x);
        let (s, c) = (TAU * t).sin_cos();
        // div p = -lap(Psi) b = 2 pi^2 Psi b
        let div_p = 2.0 * PI * PI * sp.psi * self.flux_factor(t).0;
        -m.s * TAU * s * sp.psi + div_p + m.alpha * c * sp.div_u
    }

    /// Fields frozen at time `t`, usable as initial data.
    pub fn at(&self, t: f64) -> MmsAt<'_> {
        MmsAt { mms: self, t }
    }

    /// Boundary tags used by the convergence runs: strong u-hat and p-hat on
    /// every boundary face.
    pub fn boundary_tags() -> BoundaryTags {
        BoundaryTags::new(SolidBc::DirichletU, FluxBc::NeumannP)
    }
}

impl ProblemData for Mms {
    fn body_force(&self, x: Point, t: f64) -> [f64; 2] {
        Mms::body_force(self, x, t)
    }
    fn source(&self, x: Point, t: f64) -> f64 {
        Mms::source(self, x, t)
    }
    fn velocity(&self, x: Point, t: f64) -> [f64; 2] {
        self.u(x, t)
    }
    fn flux(&self, x: Point, t: f64) -> [f64; 2] {
        self.p(x, t)
    }
    fn traction(&self, x: Point, n: [f64; 2], t: f64) -> [f64; 2] {
        let m = &self.material;
        let s = self
            .sigma_e(x, t)
            .add(&self.sigma_v(x, t).scale(m.omega))
            .add(&SymTensor::identity().scale(-m.alpha * self.psi(x, t)));
        s.mul_vec(n)
    }
    fn scalar(&self, x: Point, t: f64) -> f64 {
        self.psi(x, t)
    }
}

/// The manufactured fields at a fixed time.
#[derive(Clone, Copy, Debug)]
pub struct MmsAt<'a> {
    mms: &'a Mms,
    t: f64,
}

impl InitialFields for MmsAt<'_> {
    fn u(&self, x: Point) -> [f64; 2] {
        self.mms.u(x, self.t)
    }
    fn p(&self, x: Point) -> [f64; 2] {
        self.mms.p(x, self.t)
    }
    fn sigma_e(&self, x: Point) -> SymTensor {
        self.mms.sigma_e(x, self.t)
    }
    fn sigma_v(&self, x: Point) -> SymTensor {
        self.mms.sigma_v(x, self.t)
    }
    fn psi(&self, x: Point) -> f64 {
        self.mms.psi(x, self.t)
    }
}

/// Final-time errors of one run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorReport {
    pub h: f64,
    pub k: usize,
    pub dt: f64,
    pub time: f64,
    /// ||(sigma_E, sigma_V, psi) error||_H2 with weights A, omega^2 G, s.
    pub err_sigma_psi: f64,
    /// ||(u, p) error||_H1 with weights rho, chi.
    pub err_u_p: f64,
}

/// Default exactness of the error quadrature.
pub fn default_error_exactness(k: usize) -> usize {
    2 * k + 8
}

/// Weighted L2 errors of a discrete state against fields given pointwise.
/// Returns (H2 error, H1 error).
pub fn weighted_errors(disc: &Discretization, volume: &[f64], exact: &dyn InitialFields, exactness: usize) -> Result<(f64, f64)> {
    let k = disc.k();
    let (_, rule, table) = volume_table(k + 1, exactness)?;
    let layout = &disc.layout;
    let parts: Vec<(f64, f64)> = (0..disc.mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let l = layout.local(e);
            let m = disc.materials.get(e);
            let a = m.a_matrix();
            let g = m.g_matrix().ok();
            let map = AffineMap::of_element(&disc.mesh, e);
            let c = &volume[layout.volume_range(e)];
            let (n1, n0) = (l.n1, l.n0);
            let (mut e2, mut e1) = (0.0, 0.0);
            for (q, (xi, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                let x = map.map(*xi);
                let row = table.row(q);
                let dot1 = |start: usize| -> f64 { (0..n1).map(|i| c[start + i] * row[i]).sum() };
                let dot0 = |start: usize| -> f64 { (0..n0).map(|i| c[start + i] * row[i]).sum() };
                let (u, p) = (exact.u(x), exact.p(x));
                let du = [u[0] - dot1(l.u(0, 0)), u[1] - dot1(l.u(1, 0))];
                let dp = [p[0] - dot1(l.p(0, 0)), p[1] - dot1(l.p(1, 0))];
                let mut pt1 = m.rho * (du[0] * du[0] + du[1] * du[1]) + m.chi * (dp[0] * dp[0] + dp[1] * dp[1]);
                let se = exact.sigma_e(x).to_frame();
                let dse: [f64; 3] = [0, 1, 2].map(|cc| se[cc] - dot0(l.sigma_e(cc, 0)));
                let mut pt2 = quad_form(&a, &dse);
                if let (true, Some(g)) = (l.viscous, g.as_ref()) {
                    let sv = exact.sigma_v(x).to_frame();
                    let dsv: [f64; 3] = [0, 1, 2].map(|cc| sv[cc] - dot0(l.sigma_v(cc, 0)));
                    pt2 += m.omega * m.omega * quad_form(g, &dsv);
                }
                let dpsi = exact.psi(x) - dot0(l.psi(0));
                pt2 += m.s * dpsi * dpsi;
                pt1 *= w * map.det;
                e1 += pt1;
                e2 += w * map.det * pt2;
            }
            (e2, e1)
        })
        .collect();
    let (e2, e1) = parts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    Ok((e2.max(0.0).sqrt(), e1.max(0.0).sqrt()))
}

fn quad_form(m: &[[f64; 3]; 3], v: &[f64; 3]) -> f64 {
    (0..3).map(|i| (0..3).map(|j| v[i] * m[i][j] * v[j]).sum::<f64>()).sum()
}

/// Errors of a state against the manufactured solution at the state time.
pub fn error_norms(disc: &Discretization, state: &SystemState, mms: &Mms, h: f64, dt: f64, exactness: Option<usize>) -> Result<ErrorReport> {
    let k = disc.k();
    let exactness = exactness.unwrap_or_else(|| default_error_exactness(k));
    let (err_sigma_psi, err_u_p) = weighted_errors(disc, &state.volume, &mms.at(state.time), exactness)?;
    Ok(ErrorReport {
        h,
        k,
        dt,
        time: state.time,
        err_sigma_psi,
        err_u_p,
    })
}

/// Time step of the h-sweep policy: the largest step not above
/// h^((k+2)/2) that divides T.
pub fn policy_dt(h: f64, k: usize, final_time: f64) -> f64 {
    let target = h.powf((k as f64 + 2.0) / 2.0);
    final_time / (final_time / target).ceil()
}

/// One (k, n, dt) cell of a study.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StudyCell {
    pub k: usize,
    pub n: usize,
    pub dt: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StudyKind {
    H,
    K,
    Dt,
}

impl StudyKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::H => "h-sweep",
            Self::K => "k-sweep",
            Self::Dt => "dt-sweep",
        }
    }
}

#[derive(Clone, Debug)]
pub struct StudyConfig {
    pub kind: StudyKind,
    pub preset: String,
    pub material: Material,
    pub final_time: f64,
    pub cells: Vec<StudyCell>,
    /// Exactness added to the default error quadrature of each cell.
    pub quad_boost: usize,
    pub diagonal: Diagonal,
}

impl StudyConfig {
    /// Meshes `ns` for every degree in `ks`, with the h^((k+2)/2) step policy.
    pub fn h_sweep(preset: &str, material: Material, ks: &[usize], ns: &[usize], final_time: f64) -> Self {
        let cells = ks
            .iter()
            .flat_map(|&k| ns.iter().map(move |&n| StudyCell { k, n, dt: policy_dt(1.0 / n as f64, k, final_time) }))
            .collect();
        Self::with_cells(StudyKind::H, preset, material, final_time, cells)
    }

    pub fn k_sweep(preset: &str, material: Material, n: usize, ks: &[usize], dt: f64, final_time: f64) -> Self {
        let cells = ks.iter().map(|&k| StudyCell { k, n, dt }).collect();
        Self::with_cells(StudyKind::K, preset, material, final_time, cells)
    }

    pub fn dt_sweep(preset: &str, material: Material, n: usize, k: usize, dts: &[f64], final_time: f64) -> Self {
        let cells = dts.iter().map(|&dt| StudyCell { k, n, dt }).collect();
        Self::with_cells(StudyKind::Dt, preset, material, final_time, cells)
    }

    fn with_cells(kind: StudyKind, preset: &str, material: Material, final_time: f64, cells: Vec<StudyCell>) -> Self {
        Self {
            kind,
            preset: preset.to_string(),
            material,
            final_time,
            cells,
            quad_boost: 0,
            diagonal: Diagonal::Alternating,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyRow {
    pub run_id: String,
    pub preset: String,
    pub report: ErrorReport,
    pub n: usize,
    /// Rates against the previous row of the same series.
    pub rate_sigma_psi: Option<f64>,
    pub rate_u_p: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyFailure {
    pub run_id: String,
    pub message: String,
}

/// Fitted summary of a study. For h- and dt-sweeps: the rates of each
/// series. For a k-sweep: slope and R^2 of log10(error) against k.
#[derive(Clone, Debug, PartialEq)]
pub struct StudyFit {
    pub k: Option<usize>,
    pub rate_sigma_psi: f64,
    pub rate_u_p: f64,
    pub r2_sigma_psi: Option<f64>,
    pub r2_u_p: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyResult {
    pub kind: StudyKind,
    pub rows: Vec<StudyRow>,
    pub failures: Vec<StudyFailure>,
    pub fits: Vec<StudyFit>,
}

/// Runs one manufactured-solution cell from t = 0 to `final_time`.
pub fn run_mms_cell(material: &Material, cell: StudyCell, final_time: f64, diagonal: Diagonal, exactness: Option<usize>) -> Result<ErrorReport> {
    let mesh = Mesh::structured(Rect::unit(), cell.n, diagonal, |_, _| Mms::boundary_tags())?;
    let field = MaterialField::uniform(*material, mesh.num_elements())?;
    let mms = Mms::new(&field)?;
    let disc = Discretization::new(mesh, field, cell.k)?;
    step_count(final_time, cell.dt)?;
    let (state, traces) = initialize(&disc, &mms.at(0.0), &mms, 0.0)?;
    let stepper = Stepper::new(&disc, &mms, cell.dt)?;
    let out = run(&stepper, state, traces, final_time, &[], |_, _| ())?;
    error_norms(&disc, &out.state, &mms, 1.0 / cell.n as f64, cell.dt, exactness)
}

fn rate(e0: f64, e1: f64, x0: f64, x1: f64) -> Option<f64> {
    (e0 > 1e-14 && e1 > 1e-14).then(|| (e0 / e1).ln() / (x0 / x1).ln())
}

/// Least-squares slope and R^2 of y against x.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, r2)
}

/// Runs every cell (in parallel), then computes rates. Failed cells are
/// recorded and skipped.
pub fn convergence_study(config: &StudyConfig) -> StudyResult {
    let outcomes: Vec<(usize, Result<ErrorReport>)> = config
        .cells
        .par_iter()
        .enumerate()
        .map(|(i, cell)| {
            let exactness = default_error_exactness(cell.k) + config.quad_boost;
            (i, run_mms_cell(&config.material, *cell, config.final_time, config.diagonal, Some(exactness)))
        })
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (i, outcome) in outcomes {
        let cell = config.cells[i];
        let run_id = format!("{}-{}-k{}-n{}-dt{:e}", config.kind.name(), config.preset, cell.k, cell.n, cell.dt);
        match outcome {
            Ok(report) => rows.push(StudyRow {
                run_id,
                preset: config.preset.clone(),
                report,
                n: cell.n,
                rate_sigma_psi: None,
                rate_u_p: None,
            }),
            Err(e) => failures.push(StudyFailure { run_id, message: e.to_string() }),
        }
    }
    let mut fits = Vec::new();
    match config.kind {
        StudyKind::H | StudyKind::Dt => {
            let mut ks: Vec<usize> = rows.iter().map(|r| r.report.k).collect();
            ks.dedup();
            for k in ks {
                let idx: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].report.k == k).collect();
                let x = |r: &StudyRow| if config.kind == StudyKind::H { r.report.h } else { r.report.dt };
                for w in idx.windows(2) {
                    let (a, b) = (rows[w[0]].report, rows[w[1]].report);
                    let (xa, xb) = (x(&rows[w[0]]), x(&rows[w[1]]));
                    rows[w[1]].rate_sigma_psi = rate(a.err_sigma_psi, b.err_sigma_psi, xa, xb);
                    rows[w[1]].rate_u_p = rate(a.err_u_p, b.err_u_p, xa, xb);
                }
                if idx.len() < 2 {
                    continue;
                }
                let fit = if config.kind == StudyKind::H {
                    let last = &rows[*idx.last().unwrap()];
                    StudyFit {
                        k: Some(k),
                        rate_sigma_psi: last.rate_sigma_psi.unwrap_or(f64::NAN),
                        rate_u_p: last.rate_u_p.unwrap_or(f64::NAN),
                        r2_sigma_psi: None,
                        r2_u_p: None,
                    }
                } else {
                    let lx: Vec<f64> = idx.iter().map(|&i| rows[i].report.dt.ln()).collect();
                    let ls: Vec<f64> = idx.iter().map(|&i| rows[i].report.err_sigma_psi.ln()).collect();
                    let lu: Vec<f64> = idx.iter().map(|&i| rows[i].report.err_u_p.ln()).collect();
                    let (rs, r2s) = linear_fit(&lx, &ls);
                    let (ru, r2u) = linear_fit(&lx, &lu);
                    StudyFit {
                        k: Some(k),
                        rate_sigma_psi: rs,
                        rate_u_p: ru,
                        r2_sigma_psi: Some(r2s),
                        r2_u_p: Some(r2u),
                    }
                };
                fits.push(fit);
            }
        }
        StudyKind::K => {
            if rows.len() >= 2 {
                let kx: Vec<f64> = rows.iter().map(|r| r.report.k as f64).collect();
                let ls: Vec<f64> = rows.iter().map(|r| r.report.err_sigma_psi.log10()).collect();
                let lu: Vec<f64> = rows.iter().map(|r| r.report.err_u_p.log10()).collect();
                let (rs, r2s) = linear_fit(&kx, &ls);
                let (ru, r2u) = linear_fit(&kx, &lu);
                fits.push(StudyFit {
                    k: None,
                    rate_sigma_psi: rs,
                    rate_u_p: ru,
                    r2_sigma_psi: Some(r2s),
                    r2_u_p: Some(r2u),
                });
            }
        }
    }
    StudyResult {
        kind: config.kind,
        rows,
        failures,
        fits,
    }
}

pub const CSV_HEADER: &str = "run_id,preset,k,n,h,dt,T,err_sigma_psi,err_u_p,rate_sigma_psi,rate_u_p";

/// CSV table of a study; missing rates are left empty.
pub fn study_csv(result: &StudyResult) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    let opt = |r: Option<f64>| r.map(|v| format!("{v:.11e}")).unwrap_or_default();
    for row in &result.rows {
        let r = &row.report;
        let _ = writeln!(
            s,
            "{},{},{},{},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{},{}",
            row.run_id,
            row.preset,
            r.k,
            row.n,
            r.h,
            r.dt,
            r.time,
            r.err_sigma_psi,
            r.err_u_p,
            opt(row.rate_sigma_psi),
            opt(row.rate_u_p)
        );
    }
    s
}

/// Central difference of `g` at `t`.
#[cfg(test)]
fn central<const N: usize>(g: impl Fn(f64) -> [f64; N], t: f64, h: f64) -> [f64; N] {
    let (a, b) = (g(t + h), g(t - h));
    std::array::from_fn(|i| (a[i] - b[i]) / (2.0 * h))
}
