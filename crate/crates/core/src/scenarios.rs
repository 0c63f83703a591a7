//! Wave-propagation benchmarks: a vertical Gaussian force in a homogeneous
//! thermoelastic square and a shear moment source in a poroelastic medium
//! with an optional viscoelastic half.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{HdgError, Result};
use crate::hdg::Discretization;
use crate::materials::{preset, Material, MaterialField};
use crate::mesh::{BoundaryTags, Diagonal, FluxBc, Mesh, Point, Rect, SolidBc};
use crate::polybasis::{evaluate, VolumeBasis};
use crate::timestepper::{initialize, run, step_count, EnergyLedger, ProblemData, Stepper, SystemState, ZeroFields};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SourceKind {
    /// exp(-9 |r|^2 / (2 h^2)) S(t) e_y.
    VerticalGaussian,
    /// M b(r) S(t) with b = (1 - |r|^2/(4 h^2)) r/|r| inside |r| < 2h.
    MomentShear,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SourceModel {
    pub kind: SourceKind,
    pub center: Point,
    pub amplitude: f64,
    /// Peak frequency f0 in Hz.
    pub frequency: f64,
    /// Delay t0 in seconds.
    pub delay: f64,
    /// Radius parameter, tied to the mesh size.
    pub radius: f64,
    pub moment: [[f64; 2]; 2],
}

impl SourceModel {
    pub fn vertical_gaussian(center: Point, radius: f64) -> Self {
        Self {
            kind: SourceKind::VerticalGaussian,
            center,
            amplitude: 1e4,
            frequency: 5.0,
            delay: 0.3,
            radius,
            moment: [[0.0; 2]; 2],
        }
    }

    pub fn moment_shear(center: Point, radius: f64) -> Self {
        Self {
            kind: SourceKind::MomentShear,
            center,
            amplitude: 1e4,
            frequency: 5.0,
            delay: 0.3,
            radius,
            moment: [[0.0, FRAC_1_SQRT_2], [FRAC_1_SQRT_2, 0.0]],
        }
    }

    /// S(t) = A0 cos(2 pi f0 (t - t0)) exp(-2 f0^2 (t - t0)^2).
    pub fn time_function(&self, t: f64) -> f64 {
        let s = t - self.delay;
        let f0 = self.frequency;
        self.amplitude * (2.0 * PI * f0 * s).cos() * (-2.0 * f0 * f0 * s * s).exp()
    }

    /// Spatial factor of the force.
    pub fn profile(&self, x: Point) -> [f64; 2] {
        let r = [x[0] - self.center[0], x[1] - self.center[1]];
        let r2 = r[0] * r[0] + r[1] * r[1];
        let h = self.radius;
        match self.kind {
            SourceKind::VerticalGaussian => [0.0, (-9.0 * r2 / (2.0 * h * h)).exp()],
            SourceKind::MomentShear => {
                if r2 >= 4.0 * h * h || r2 == 0.0 {
                    return [0.0; 2];
                }
                let norm = r2.sqrt();
                let a = (1.0 - r2 / (4.0 * h * h)) / norm;
                let b = [a * r[0], a * r[1]];
                let m = &self.moment;
                [m[0][0] * b[0] + m[0][1] * b[1], m[1][0] * b[0] + m[1][1] * b[1]]
            }
        }
    }

    /// Radius outside which the profile is negligible (zero for the shear
    /// source, below 1e-8 relative for the Gaussian).
    pub fn support_radius(&self) -> f64 {
        match self.kind {
            SourceKind::VerticalGaussian => self.radius * (2.0 * 8.0 * 10f64.ln() / 9.0).sqrt(),
            SourceKind::MomentShear => 2.0 * self.radius,
        }
    }
}

/// Body force of a source model.
pub fn evaluate_source(model: &SourceModel, x: Point, t: f64) -> [f64; 2] {
    let s = model.time_function(t);
    model.profile(x).map(|v| v * s)
}

/// Per-element coefficient layout.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Heterogeneity {
    Uniform,
    /// Elements with centroid x below `midline` get `left_omega` (and keep
    /// the preset's D); the others use omega = 0.
    SplitOmega { midline: f64, left_omega: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub domain: Rect,
    pub preset: String,
    pub material: Material,
    pub heterogeneity: Heterogeneity,
    pub source: SourceModel,
    /// Cells per axis of the structured mesh.
    pub n: usize,
    pub k: usize,
    pub dt: f64,
    pub final_time: f64,
    pub snapshot_times: Vec<f64>,
    /// Plotting lattice points per axis.
    pub lattice: usize,
    /// Points recorded every `probe_stride` steps.
    pub probe_points: Vec<Point>,
    pub probe_stride: usize,
    /// Quadrature exactness for the source profile.
    pub source_exactness: usize,
}

const THERMO_SIDE: f64 = 2310.0;

impl ScenarioConfig {
    fn thermoelastic(n: usize, k: usize, dt: f64) -> Self {
        let domain = Rect::new(0.0, 0.0, THERMO_SIDE, THERMO_SIDE);
        let h = THERMO_SIDE / n as f64;
        let center = domain.center();
        Self {
            name: "thermoelastic".into(),
            domain,
            preset: "l3".into(),
            material: preset("l3").expect("builtin preset"),
            heterogeneity: Heterogeneity::Uniform,
            source: SourceModel::vertical_gaussian(center, h),
            n,
            k,
            dt,
            final_time: 0.5,
            snapshot_times: vec![0.1, 0.3, 0.5],
            lattice: n * (k + 1) + 1,
            probe_points: vec![center, [center[0] + 500.0, center[1]], [center[0] - 500.0, center[1]]],
            probe_stride: 10,
            source_exactness: 40,
        }
    }

    fn shear(n: usize, k: usize, dt: f64, split: bool) -> Self {
        let half = THERMO_SIDE / 2.0;
        let domain = Rect::new(-half, 0.0, half, THERMO_SIDE);
        let h = THERMO_SIDE / n as f64;
        let center = [0.0, half];
        Self {
            name: if split { "shear-split" } else { "shear" }.into(),
            domain,
            preset: "l4".into(),
            material: preset("l4").expect("builtin preset"),
            heterogeneity: if split {
                Heterogeneity::SplitOmega { midline: 0.0, left_omega: 0.9 }
            } else {
                Heterogeneity::Uniform
            },
            source: SourceModel::moment_shear(center, h),
            n,
            k,
            dt,
            final_time: 0.6,
            snapshot_times: vec![0.2, 0.4, 0.6],
            lattice: n * (k + 1) + 1,
            probe_points: vec![center, [-500.0, half], [500.0, half]],
            probe_stride: 10,
            source_exactness: 40,
        }
    }

    /// Homogeneous thermoelastic square at desk resolution (h = 115.5, k = 3).
    pub fn thermoelastic_reduced() -> Self {
        Self::thermoelastic(20, 3, 1e-4)
    }

    /// Thermoelastic square at the published resolution (h ~ 50, k = 5).
    pub fn thermoelastic_full() -> Self {
        Self::thermoelastic(46, 5, 1e-5)
    }

    /// Shear source at desk resolution; `split` puts omega = 0.9 on x < 0.
    pub fn shear_reduced(split: bool) -> Self {
        Self::shear(20, 3, 1e-4, split)
    }

    pub fn shear_full(split: bool) -> Self {
        Self::shear(46, 5, 1e-5, split)
    }

    /// Named built-in scenario: thermoelastic, shear, shear-split, each with
    /// an optional "-full" suffix.
    pub fn named(name: &str) -> Result<Self> {
        Ok(match name {
            "thermoelastic" => Self::thermoelastic_reduced(),
            "thermoelastic-full" => Self::thermoelastic_full(),
            "shear" => Self::shear_reduced(false),
            "shear-full" => Self::shear_full(false),
            "shear-split" => Self::shear_reduced(true),
            "shear-split-full" => Self::shear_full(true),
            other => return Err(HdgError::InvalidInput(format!("unknown scenario '{other}'"))),
        })
    }

    pub fn mesh_size(&self) -> f64 {
        self.domain.width().max(self.domain.height()) / self.n as f64
    }

    pub fn validate(&self) -> Result<()> {
        let steps = step_count(self.final_time, self.dt)?;
        for &t in &self.snapshot_times {
            if !(t > 0.0 && t <= self.final_time * (1.0 + 1e-12)) {
                return Err(HdgError::InvalidInput(format!("snapshot time {t} outside (0, {}]", self.final_time)));
            }
        }
        if self.lattice < 2 || self.n == 0 || self.probe_stride == 0 || steps == 0 {
            return Err(HdgError::InvalidInput("lattice, n and probe stride must be positive".into()));
        }
        if let Heterogeneity::SplitOmega { left_omega, .. } = self.heterogeneity {
            self.material.with_omega(left_omega).validate()?;
        }
        self.material.validate()
    }

    pub fn materials(&self, mesh: &Mesh) -> Result<MaterialField> {
        match self.heterogeneity {
            Heterogeneity::Uniform => MaterialField::uniform(self.material, mesh.num_elements()),
            Heterogeneity::SplitOmega { midline, left_omega } => MaterialField::from_fn(mesh, |x| {
                if x[0] < midline {
                    self.material.with_omega(left_omega)
                } else {
                    self.material.with_omega(0.0)
                }
            }),
        }
    }

    /// Mesh with u-hat = 0 strongly and homogeneous psi data on all walls.
    pub fn mesh(&self) -> Result<Mesh> {
        Mesh::structured(self.domain, self.n, Diagonal::Alternating, |_, _| {
            BoundaryTags::new(SolidBc::DirichletU, FluxBc::DirichletPsi)
        })
    }
}

struct ScenarioData {
    source: SourceModel,
    exactness: usize,
}

impl ProblemData for ScenarioData {
    fn body_force(&self, x: Point, t: f64) -> [f64; 2] {
        evaluate_source(&self.source, x, t)
    }
    fn loads_vanish(&self) -> bool {
        self.source.amplitude == 0.0
    }
    fn boundary_data_vanish(&self) -> bool {
        true
    }
    fn separable_exactness(&self) -> Option<usize> {
        Some(self.exactness)
    }
    fn time_factor(&self, t: f64) -> f64 {
        self.source.time_function(t)
    }
    fn load_profile(&self, x: Point) -> ([f64; 2], f64) {
        (self.source.profile(x), 0.0)
    }
}

/// Scalar fields on a uniform lattice covering the domain, row by row from
/// the lower-left corner.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub nx: usize,
    pub ny: usize,
    pub origin: Point,
    pub spacing: [f64; 2],
    pub psi: Vec<f64>,
    pub u_norm: Vec<f64>,
}

impl Snapshot {
    pub fn point(&self, i: usize, j: usize) -> Point {
        [self.origin[0] + i as f64 * self.spacing[0], self.origin[1] + j as f64 * self.spacing[1]]
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
}

/// Evaluation data of one lattice point: the elements whose closure holds it
/// with the P_{k+1} basis values there.
#[derive(Clone, Debug)]
struct Sampler {
    hits: Vec<Vec<(usize, Vec<f64>)>>,
}

impl Sampler {
    fn new(disc: &Discretization, points: &[Point]) -> Result<Self> {
        let basis = VolumeBasis::new(disc.k() + 1)?;
        let tol = 1e-10;
        let hits = points
            .iter()
            .map(|&x| {
                disc.mesh
                    .locate(x, tol)
                    .into_iter()
                    .map(|(e, xi)| (e, basis.eval(xi)))
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>();
        if let Some(i) = hits.iter().position(|h| h.is_empty()) {
            return Err(HdgError::InvalidInput(format!("sample point {:?} outside the mesh", points[i])));
        }
        Ok(Self { hits })
    }

    /// (psi, |u|) at every point, averaged over the containing elements.
    fn sample(&self, disc: &Discretization, volume: &[f64]) -> Vec<(f64, f64)> {
        let layout = &disc.layout;
        self.hits
            .iter()
            .map(|hits| {
                let (mut psi, mut un) = (0.0, 0.0);
                for (e, vals) in hits {
                    let l = layout.local(*e);
                    let c = &volume[layout.volume_range(*e)];
                    let u: [f64; 2] = evaluate(&c[l.u(0, 0)..l.u(0, 0) + 2 * l.n1], vals);
                    let p: [f64; 1] = evaluate(&c[l.psi(0)..l.psi(0) + l.n0], &vals[..l.n0]);
                    psi += p[0];
                    un += (u[0] * u[0] + u[1] * u[1]).sqrt();
                }
                let m = hits.len() as f64;
                (psi / m, un / m)
            })
            .collect()
    }
}

/// Time series of (psi, |u|) at the probe points.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeSample {
    pub time: f64,
    pub values: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct ScenarioOutput {
    pub snapshots: Vec<Snapshot>,
    pub probes: Vec<ProbeSample>,
    pub ledger: EnergyLedger,
    pub final_state: SystemState,
    pub final_energy: f64,
    pub mesh_hash: String,
}

/// Runs a scenario from rest with homogeneous boundary data.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioOutput> {
    config.validate()?;
    let mesh = config.mesh()?;
    let materials = config.materials(&mesh)?;
    let mesh_hash = mesh.content_hash();
    let disc = Discretization::new(mesh, materials, config.k)?;
    let data = ScenarioData {
        source: config.source,
        exactness: config.source_exactness,
    };
    let (nx, ny) = (config.lattice, config.lattice);
    let d = config.domain;
    let spacing = [d.width() / (nx - 1) as f64, d.height() / (ny - 1) as f64];
    let origin = [d.x0, d.y0];
    let lattice_points: Vec<Point> = (0..ny)
        .flat_map(|j| (0..nx).map(move |i| [origin[0] + i as f64 * spacing[0], origin[1] + j as f64 * spacing[1]]))
        .collect();
    let lattice = Sampler::new(&disc, &lattice_points)?;
    let probes = Sampler::new(&disc, &config.probe_points)?;
    let steps = step_count(config.final_time, config.dt)?;
    let snapshot_steps: Vec<usize> = config
        .snapshot_times
        .iter()
        .map(|&t| ((t / config.dt).round() as usize).min(steps))
        .collect();
    let times: Vec<f64> = (0..=steps)
        .filter(|n| n % config.probe_stride == 0 || snapshot_steps.contains(n))
        .map(|n| n as f64 * config.dt)
        .collect();

    let (state, traces) = initialize(&disc, &ZeroFields, &data, 0.0)?;
    let stepper = Stepper::new(&disc, &data, config.dt)?;
    let out = run(&stepper, state, traces, config.final_time, &times, |s, _| {
        let n = (s.time / config.dt).round() as usize;
        let probe = (n % config.probe_stride == 0).then(|| ProbeSample {
            time: s.time,
            values: probes.sample(&disc, &s.volume),
        });
        let snap = snapshot_steps.contains(&n).then(|| {
            let v = lattice.sample(&disc, &s.volume);
            Snapshot {
                time: s.time,
                nx,
                ny,
                origin,
                spacing,
                psi: v.iter().map(|p| p.0).collect(),
                u_norm: v.iter().map(|p| p.1).collect(),
            }
        });
        (probe, snap)
    })?;
    let mut snapshots = Vec::new();
    let mut probe_series = Vec::new();
    for (_, _, (p, s)) in out.probes {
        if let Some(p) = p {
            probe_series.push(p);
        }
        if let Some(s) = s {
            snapshots.push(s);
        }
    }
    let final_energy = out.ledger.rows.last().map(|r| r.energy).unwrap_or(0.0);
    Ok(ScenarioOutput {
        snapshots,
        probes: probe_series,
        ledger: out.ledger,
        final_state: out.state,
        final_energy,
        mesh_hash,
    })
}

/// Legacy VTK structured-points ASCII text of one lattice field.
pub fn vtk_text(snapshot: &Snapshot, name: &str, values: &[f64]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "{name} at t = {:.6e}", snapshot.time);
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET STRUCTURED_POINTS");
    let _ = writeln!(s, "DIMENSIONS {} {} 1", snapshot.nx, snapshot.ny);
    let _ = writeln!(s, "ORIGIN {:.11e} {:.11e} 0", snapshot.origin[0], snapshot.origin[1]);
    let _ = writeln!(s, "SPACING {:.11e} {:.11e} 1", snapshot.spacing[0], snapshot.spacing[1]);
    let _ = writeln!(s, "POINT_DATA {}", values.len());
    let _ = writeln!(s, "SCALARS {name} double 1");
    let _ = writeln!(s, "LOOKUP_TABLE default");
    for v in values {
        let _ = writeln!(s, "{v:.11e}");
    }
    s
}

/// Writes `psi` and `u_norm` files for every snapshot into `dir`; returns
/// the written paths.
pub fn write_snapshots(dir: &Path, prefix: &str, snapshots: &[Snapshot]) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (i, snap) in snapshots.iter().enumerate() {
        for (name, values) in [("psi", &snap.psi), ("u_norm", &snap.u_norm)] {
            let path = dir.join(format!("{prefix}_{name}_{i:03}.vtk"));
            std::fs::write(&path, vtk_text(snap, name, values))?;
            written.push(path);
        }
    }
    Ok(written)
}

/// CSV of the probe series: time, then psi and |u| for each probe point.
pub fn probes_csv(points: &[Point], samples: &[ProbeSample]) -> String {
    let mut s = String::from("time");
    for i in 0..points.len() {
        let _ = write!(s, ",psi_{i},u_norm_{i}");
    }
    s.push('\n');
    for sample in samples {
        let _ = write!(s, "{:.11e}", sample.time);
        for (psi, u) in &sample.values {
            let _ = write!(s, ",{psi:.11e},{u:.11e}");
        }
        s.push('\n');
    }
    s
}

/// Result of [`wavefront_probe`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Front {
    /// The field vanishes identically.
    None,
    Radius(f64),
}

/// Largest distance from `center` of a lattice point where `values` exceeds
/// `threshold` times its maximum.
pub fn wavefront_probe(snapshot: &Snapshot, values: &[f64], center: Point, threshold: f64) -> Front {
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return Front::None;
    }
    let mut radius: f64 = 0.0;
    for j in 0..snapshot.ny {
        for i in 0..snapshot.nx {
            let v = values[snapshot.index(i, j)].abs();
            if v > threshold * max {
                let x = snapshot.point(i, j);
                radius = radius.max(((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)).sqrt());
            }
        }
    }
    Front::Radius(radius)
}

/// Largest mismatch between a lattice field and its reflection about the
/// vertical line through the lattice center, relative to the field maximum.
pub fn mirror_asymmetry(snapshot: &Snapshot, values: &[f64]) -> f64 {
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return 0.0;
    }
    let mut worst: f64 = 0.0;
    for j in 0..snapshot.ny {
        for i in 0..snapshot.nx {
            let a = values[snapshot.index(i, j)];
            let b = values[snapshot.index(snapshot.nx - 1 - i, j)];
            worst = worst.max((a - b).abs());
        }
    }
    worst / max
}

/// Sums of `values` over the four quadrants around `center` within
/// `radius`, ordered (+x,+y), (-x,+y), (-x,-y), (+x,-y). Points on the axes
/// are skipped.
pub fn quadrant_sums(snapshot: &Snapshot, values: &[f64], center: Point, radius: f64) -> [f64; 4] {
    let mut sums = [0.0; 4];
    let eps = 1e-9 * snapshot.spacing[0].max(snapshot.spacing[1]);
    for j in 0..snapshot.ny {
        for i in 0..snapshot.nx {
            let x = snapshot.point(i, j);
            let (dx, dy) = (x[0] - center[0], x[1] - center[1]);
            if dx.abs() < eps || dy.abs() < eps || dx * dx + dy * dy > radius * radius {
                continue;
            }
            let q = match (dx > 0.0, dy > 0.0) {
                (true, true) => 0,
                (false, true) => 1,
                (false, false) => 2,
                (true, false) => 3,
            };
            sums[q] += values[snapshot.index(i, j)];
        }
    }
    sums
}

/// Whether quadrant sums alternate in sign around the center, each at least
/// `min_fraction` of the largest in magnitude.
pub fn four_lobe_pattern(sums: &[f64; 4], min_fraction: f64) -> bool {
    let max = sums.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    max > 0.0
        && sums.iter().all(|s| s.abs() >= min_fraction * max)
        && sums[0].signum() == sums[2].signum()
        && sums[1].signum() == sums[3].signum()
        && sums[0].signum() != sums[1].signum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: SourceKind) -> ScenarioConfig {
        let mut c = match kind {
            SourceKind::VerticalGaussian => ScenarioConfig::thermoelastic(4, 1, 0.01),
            SourceKind::MomentShear => ScenarioConfig::shear(4, 1, 0.01, true),
        };
        c.final_time = 0.05;
        c.snapshot_times = vec![0.02, 0.05];
        c.lattice = 9;
        c.probe_stride = 1;
        c.source_exactness = 20;
        c
    }

    #[test]
    fn source_examples() {
        let g = SourceModel::vertical_gaussian([1155.0, 1155.0], 115.5);
        let f = evaluate_source(&g, [1155.0, 1155.0], 0.3);
        assert_eq!(f[0], 0.0);
        assert!((f[1] - 1e4).abs() < 1e-9);
        let s = SourceModel::moment_shear([0.0, 1155.0], 115.5);
        assert_eq!(s.profile([231.0, 1155.0]), [0.0, 0.0]);
        assert_eq!(s.profile([0.0, 1155.0 + 231.0]), [0.0, 0.0]);
        assert_eq!(s.profile([0.0, 1155.0]), [0.0, 0.0]);
        // inside the support: magnitude (1 - r^2/4h^2), rotated by M
        let v = s.profile([57.75, 1155.0]);
        let mag = 1.0 - 0.25 * 0.25;
        assert!(v[0].abs() < 1e-15 && (v[1] - mag * FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn pulse_decays_away_from_the_delay() {
        let g = SourceModel::vertical_gaussian([0.0, 0.0], 1.0);
        for dt in [0.7, 0.8, 1.0] {
            for t in [g.delay + dt, g.delay - dt] {
                assert!(g.time_function(t).abs() < 1e-8 * g.amplitude, "{t}");
            }
        }
    }

    #[test]
    fn presets_validate() {
        for name in ["thermoelastic", "shear", "shear-split", "thermoelastic-full", "shear-full", "shear-split-full"] {
            let c = ScenarioConfig::named(name).unwrap();
            c.validate().unwrap();
            assert!((c.mesh_size() - 115.5).abs() < 1e-9 || name.ends_with("full"));
        }
        assert!(ScenarioConfig::named("nope").is_err());
        let mut c = ScenarioConfig::thermoelastic_reduced();
        c.snapshot_times.push(0.7);
        assert!(c.validate().is_err());
    }

    #[test]
    fn split_medium_assigns_omega_by_side() {
        let c = ScenarioConfig::shear_reduced(true);
        let mesh = c.mesh().unwrap();
        let m = c.materials(&mesh).unwrap();
        for e in 0..mesh.num_elements() {
            let left = mesh.centroid(e)[0] < 0.0;
            assert_eq!(m.get(e).omega, if left { 0.9 } else { 0.0 });
        }
    }

    #[test]
    fn zero_amplitude_gives_zero_snapshots() {
        let mut c = small(SourceKind::VerticalGaussian);
        c.source.amplitude = 0.0;
        let out = run_scenario(&c).unwrap();
        assert_eq!(out.snapshots.len(), 2);
        for s in &out.snapshots {
            assert!(s.psi.iter().chain(&s.u_norm).all(|&v| v == 0.0));
            assert_eq!(wavefront_probe(s, &s.u_norm, c.source.center, 0.01), Front::None);
        }
    }

    #[test]
    fn small_runs_produce_outputs() {
        for kind in [SourceKind::VerticalGaussian, SourceKind::MomentShear] {
            let c = small(kind);
            let out = run_scenario(&c).unwrap();
            assert_eq!(out.snapshots.len(), 2);
            assert_eq!(out.probes.len(), 6);
            assert_eq!(out.ledger.len(), 6);
            assert!(out.final_energy > 0.0);
            let s = &out.snapshots[1];
            assert_eq!(s.psi.len(), 81);
            let vtk = vtk_text(s, "psi", &s.psi);
            assert!(vtk.contains("DIMENSIONS 9 9 1") && vtk.lines().count() == 10 + 81);
            let csv = probes_csv(&c.probe_points, &out.probes);
            assert_eq!(csv.lines().count(), 7);
        }
    }

    #[test]
    fn wavefront_threshold_one_gives_zero_radius() {
        let c = small(SourceKind::VerticalGaussian);
        let out = run_scenario(&c).unwrap();
        let s = &out.snapshots[1];
        assert_eq!(wavefront_probe(s, &s.u_norm, c.source.center, 1.0), Front::Radius(0.0));
        match wavefront_probe(s, &s.u_norm, c.source.center, 0.01) {
            Front::Radius(r) => assert!(r > 0.0),
            Front::None => panic!("expected a front"),
        }
    }

    #[test]
    fn lattice_helpers() {
        let s = Snapshot {
            time: 0.0,
            nx: 3,
            ny: 3,
            origin: [-1.0, -1.0],
            spacing: [1.0, 1.0],
            psi: vec![1.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0],
            u_norm: vec![1.0, 2.0, 1.0, 0.0, 0.0, 0.0, 3.0, 0.0, 3.0],
        };
        assert_eq!(mirror_asymmetry(&s, &s.u_norm), 0.0);
        assert!((mirror_asymmetry(&s, &s.psi) - 2.0).abs() < 1e-15);
        let q = quadrant_sums(&s, &s.psi, [0.0, 0.0], 2.0);
        assert_eq!(q, [1.0, -1.0, 1.0, -1.0]);
        assert!(four_lobe_pattern(&q, 0.1));
        assert!(!four_lobe_pattern(&[1.0, 1.0, 1.0, -1.0], 0.1));
    }
}
