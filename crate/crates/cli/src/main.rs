//! `hdgz` command-line driver.

mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use config::RunConfig;
use hdgz_core::hdg::{bh_bound_probe, Discretization};
use hdgz_core::materials::MaterialField;
use hdgz_core::mesh::{BoundaryTags, Diagonal, Mesh, Rect};
use hdgz_core::polybasis::trace_constant_probe;
use hdgz_core::scenarios::{probes_csv, run_scenario, write_snapshots, wavefront_probe, Front, ScenarioConfig};
use hdgz_core::timestepper::{energy, initialize, Stepper, SystemState, Unforced, ZeroFields};
use hdgz_core::verification::{convergence_study, study_csv, Mms, StudyConfig, StudyKind};

#[derive(Parser, Debug)]
#[command(name = "hdgz", version, about = "HDG solver for coupled poro/thermo-viscoelastic waves", arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Manufactured-solution convergence study (h, k or dt sweep).
    Convergence(Flags),
    /// Wave-propagation scenario with VTK snapshots and probe series.
    Scenario(Flags),
    /// Stability and boundedness probes on one mesh.
    Probe(Flags),
    /// Face census and metric summary of a structured unit-square mesh.
    MeshReport(Flags),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Convergence(_) => "convergence",
            Command::Scenario(_) => "scenario",
            Command::Probe(_) => "probe",
            Command::MeshReport(_) => "mesh-report",
        }
    }

    fn flags(&self) -> &Flags {
        match self {
            Command::Convergence(f) | Command::Scenario(f) | Command::Probe(f) | Command::MeshReport(f) => f,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct Flags {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Parameter preset: l1, l2, l3, l4.
    #[arg(long)]
    preset: Option<String>,
    /// Polynomial degree(s), comma separated.
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    /// Mesh subdivisions per axis for an h-sweep, comma separated.
    #[arg(long, value_delimiter = ',')]
    meshes: Option<Vec<usize>>,
    /// Mesh subdivisions per axis for single-mesh commands.
    #[arg(long)]
    n: Option<usize>,
    /// Time step; overrides the step policy.
    #[arg(long)]
    dt: Option<f64>,
    /// Time steps of a dt-sweep, comma separated.
    #[arg(long, value_delimiter = ',')]
    dts: Option<Vec<f64>>,
    /// Final time.
    #[arg(long = "T")]
    final_time: Option<f64>,
    /// Study kind for `convergence`: h, k or dt.
    #[arg(long)]
    study: Option<String>,
    /// Scenario name for `scenario`.
    #[arg(long)]
    scenario: Option<String>,
    /// Output directory (default `$HDGZ_OUT/<command>`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra exactness for the error quadrature.
    #[arg(long)]
    quad_boost: Option<usize>,
    /// Worker threads.
    #[arg(long)]
    threads: Option<usize>,
}

impl Flags {
    fn to_config(&self) -> RunConfig {
        RunConfig {
            command: None,
            preset: self.preset.clone(),
            parameters: None,
            study: self.study.clone(),
            k: self.k.clone(),
            meshes: self.meshes.clone(),
            n: self.n,
            dt: self.dt,
            dts: self.dts.clone(),
            final_time: self.final_time,
            scenario: self.scenario.clone(),
            out: self.out.clone(),
            quad_boost: self.quad_boost,
            threads: self.threads,
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    config_hash: String,
    config: &'a RunConfig,
    mesh_hashes: Vec<String>,
    artifacts: Vec<String>,
    status: &'a str,
    errors: Vec<String>,
}

/// Files written by a command, relative to the output directory.
#[derive(Default)]
struct Outputs {
    mesh_hashes: Vec<String>,
    artifacts: Vec<String>,
    errors: Vec<String>,
}

impl Outputs {
    fn write(&mut self, dir: &Path, name: &str, text: &str) -> Result<()> {
        std::fs::write(dir.join(name), text).with_context(|| format!("writing {name}"))?;
        self.artifacts.push(name.into());
        Ok(())
    }
}

fn write_manifest(dir: &Path, command: &str, config: &RunConfig, outputs: &Outputs) -> Result<()> {
    let manifest = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config_hash: config.hash(command),
        config,
        mesh_hashes: outputs.mesh_hashes.clone(),
        artifacts: outputs.artifacts.clone(),
        status: if outputs.errors.is_empty() { "complete" } else { "partial" },
        errors: outputs.errors.clone(),
    };
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    std::fs::write(dir.join("manifest.json"), text).context("writing manifest.json")
}

fn unit_mesh(n: usize, tags: BoundaryTags) -> Result<Mesh> {
    Ok(Mesh::structured(Rect::unit(), n, Diagonal::Alternating, |_, _| tags)?)
}

fn convergence(config: &RunConfig, out: &mut Outputs, dir: &Path) -> Result<()> {
    let material = config.material()?;
    let name = config.preset_name();
    let study = config.study.as_deref().unwrap_or("h");
    let mut sc = match study {
        "h" => {
            let ks = config.k.clone().unwrap_or_else(|| vec![1, 2]);
            let ns = config.meshes.clone().unwrap_or_else(|| vec![4, 8, 16, 32]);
            let mut sc = StudyConfig::h_sweep(&name, material, &ks, &ns, config.final_time.unwrap_or(0.5));
            if let Some(dt) = config.dt {
                sc.cells.iter_mut().for_each(|c| c.dt = dt);
            }
            sc
        }
        "k" => {
            let ks = config.k.clone().unwrap_or_else(|| (1..=5).collect());
            let n = config.n.unwrap_or(4);
            StudyConfig::k_sweep(&name, material, n, &ks, config.dt.unwrap_or(1e-4), config.final_time.unwrap_or(0.3))
        }
        _ => {
            let k = config.k.as_ref().map(|k| k[0]).unwrap_or(3);
            let n = config.n.unwrap_or(16);
            let dts = config.dts.clone().unwrap_or_else(|| vec![1.0 / 40.0, 1.0 / 80.0, 1.0 / 160.0, 1.0 / 320.0]);
            StudyConfig::dt_sweep(&name, material, n, k, &dts, config.final_time.unwrap_or(0.5))
        }
    };
    sc.quad_boost = config.quad_boost.unwrap_or(0);
    let mut ns: Vec<usize> = sc.cells.iter().map(|c| c.n).collect();
    ns.dedup();
    for n in ns {
        out.mesh_hashes.push(unit_mesh(n, Mms::boundary_tags())?.content_hash());
    }
    let result = convergence_study(&sc);
    out.write(dir, "convergence.csv", &study_csv(&result))?;
    println!("{:<34} {:>12} {:>12} {:>7} {:>7}", "run", "e(sigma,psi)", "e(u,p)", "rate1", "rate2");
    let fmt_rate = |r: Option<f64>| r.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into());
    for r in &result.rows {
        println!(
            "{:<34} {:>12.4e} {:>12.4e} {:>7} {:>7}",
            r.run_id,
            r.report.err_sigma_psi,
            r.report.err_u_p,
            fmt_rate(r.rate_sigma_psi),
            fmt_rate(r.rate_u_p)
        );
    }
    for f in &result.fits {
        let k = f.k.map(|k| format!("k={k} ")).unwrap_or_default();
        let what = if result.kind == StudyKind::K { "log10 slope" } else { "rate" };
        println!("{k}{what}: sigma,psi {:.3}  u,p {:.3}", f.rate_sigma_psi, f.rate_u_p);
    }
    for f in &result.failures {
        out.errors.push(format!("{}: {}", f.run_id, f.message));
    }
    Ok(())
}

fn scenario_config(config: &RunConfig) -> Result<ScenarioConfig> {
    let mut sc = ScenarioConfig::named(config.scenario.as_deref().unwrap_or("thermoelastic"))?;
    if config.preset.is_some() || config.parameters.is_some() {
        sc.material = config.material()?;
        sc.preset = config.preset_name();
    }
    if let Some(k) = &config.k {
        sc.k = k[0];
    }
    if let Some(n) = config.n {
        sc.n = n;
        sc.source.radius = sc.domain.width().max(sc.domain.height()) / n as f64;
    }
    if config.k.is_some() || config.n.is_some() {
        sc.lattice = sc.n * (sc.k + 1) + 1;
    }
    if let Some(dt) = config.dt {
        sc.dt = dt;
    }
    if let Some(t) = config.final_time {
        sc.final_time = t;
        sc.snapshot_times.retain(|&s| s <= t);
        if sc.snapshot_times.is_empty() {
            sc.snapshot_times.push(t);
        }
    }
    Ok(sc)
}

fn scenario(config: &RunConfig, out: &mut Outputs, dir: &Path) -> Result<()> {
    let sc = scenario_config(config)?;
    out.mesh_hashes.push(sc.mesh()?.content_hash());
    let result = run_scenario(&sc)?;
    let files = write_snapshots(dir, &sc.name, &result.snapshots)?;
    for f in files {
        out.artifacts.push(f.file_name().unwrap().to_string_lossy().into_owned());
    }
    out.write(dir, "probes.csv", &probes_csv(&sc.probe_points, &result.probes))?;
    out.write(dir, "energy.csv", &result.ledger.to_csv())?;
    let mut summary = String::from("time,front_radius_u_norm,max_psi,max_u_norm\n");
    for s in &result.snapshots {
        let front = match wavefront_probe(s, &s.u_norm, sc.source.center, 1e-3) {
            Front::Radius(r) => format!("{r:.6e}"),
            Front::None => "none".into(),
        };
        let max = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let _ = writeln!(summary, "{:.6e},{front},{:.11e},{:.11e}", s.time, max(&s.psi), max(&s.u_norm));
    }
    out.write(dir, "snapshots.csv", &summary)?;
    println!(
        "{}: {} snapshots, final energy {:.6e}, outputs in {}",
        sc.name,
        result.snapshots.len(),
        result.final_energy,
        dir.display()
    );
    Ok(())
}

fn probe(config: &RunConfig, out: &mut Outputs, dir: &Path) -> Result<()> {
    let n = config.n.unwrap_or(4);
    let k = config.k.as_ref().map(|k| k[0]).unwrap_or(1);
    let material = config.material()?;
    let mesh = unit_mesh(n, BoundaryTags::all_dirichlet())?;
    out.mesh_hashes.push(mesh.content_hash());
    let gamma = mesh.quasi_uniformity();
    let trace = trace_constant_probe(&mesh, k)?;
    let field = MaterialField::uniform(material, mesh.num_elements())?;
    let disc = Discretization::new(mesh, field, k)?;
    let bh = bh_bound_probe(&disc, 50, 1);
    let mut rows = vec![
        ("gamma".to_string(), gamma),
        ("trace_constant".to_string(), trace),
        ("bh_bound_ratio".to_string(), bh),
    ];
    // unforced energy from a random state over four decades of dt
    for dt in [1e-4, 1e-3, 1e-2, 1e-1, 1.0] {
        let (mut state, _) = initialize(&disc, &ZeroFields, &Unforced, 0.0)?;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        state.volume.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        let stepper = Stepper::new(&disc, &Unforced, dt)?;
        let (mut prev, mut growth, mut residual) = (energy(&disc, &state.volume), f64::NEG_INFINITY, 0.0f64);
        for i in 1..=20 {
            let (next, _, row) = stepper.step(&state, i)?;
            growth = growth.max(row.energy - prev);
            residual = residual.max(row.relative_residual(prev, dt));
            prev = row.energy;
            state = SystemState { time: next.time, volume: next.volume };
        }
        rows.push((format!("max_energy_change_dt_{dt:e}"), growth));
        rows.push((format!("max_relative_residual_dt_{dt:e}"), residual));
    }
    let mut csv = String::from("probe,value\n");
    for (key, v) in &rows {
        let _ = writeln!(csv, "{key},{v:.11e}");
        println!("{key:<36} {v:.6e}");
    }
    out.write(dir, "probe.csv", &csv)
}

fn mesh_report(config: &RunConfig, out: &mut Outputs, dir: &Path) -> Result<()> {
    let ns = match (&config.meshes, config.n) {
        (Some(m), _) => m.clone(),
        (None, n) => vec![n.unwrap_or(2)],
    };
    let mut text = String::from("n,vertices,elements,faces,interior_faces,boundary_faces,euler,h_min,h_max,gamma\n");
    for n in ns {
        let mesh = unit_mesh(n, BoundaryTags::all_dirichlet())?;
        let r = mesh.skeleton_report();
        let v = mesh.vertices().len();
        let euler = v as i64 - r.faces as i64 + r.elements as i64;
        let _ = writeln!(
            text,
            "{n},{v},{},{},{},{},{euler},{:.6e},{:.6e},{:.6e}",
            r.elements, r.faces, r.interior_faces, r.boundary_faces, r.min_face_diameter, r.max_face_diameter, r.gamma
        );
        println!(
            "n={n}: {v} vertices, {} elements, {} faces ({} interior, {} boundary), V-E+T={euler}, h_F in [{:.4}, {:.4}], gamma={:.4}",
            r.elements, r.faces, r.interior_faces, r.boundary_faces, r.min_face_diameter, r.max_face_diameter, r.gamma
        );
        out.mesh_hashes.push(mesh.content_hash());
    }
    out.write(dir, "mesh_report.csv", &text)
}

fn effective_config(cmd: &Command) -> Result<RunConfig> {
    let flags = cmd.flags();
    let file = match &flags.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let config = file.merged(flags.to_config());
    config.validate(cmd.name())?;
    Ok(config)
}

fn execute(cmd: &Command, config: &RunConfig) -> Result<()> {
    if let Some(t) = config.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().context("setting up worker threads")?;
    }
    let name = cmd.name();
    let dir = config.out_dir(name);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    let mut out = Outputs::default();
    let result = match cmd {
        Command::Convergence(_) => convergence(config, &mut out, &dir),
        Command::Scenario(_) => scenario(config, &mut out, &dir),
        Command::Probe(_) => probe(config, &mut out, &dir),
        Command::MeshReport(_) => mesh_report(config, &mut out, &dir),
    };
    if let Err(e) = &result {
        out.errors.push(format!("{e:#}"));
    }
    write_manifest(&dir, name, config, &out)?;
    result?;
    if !out.errors.is_empty() {
        bail!("{} run(s) failed: {}", out.errors.len(), out.errors.join("; "));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match effective_config(&cli.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    match execute(&cli.command, &config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
