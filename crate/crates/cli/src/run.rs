//! Subcommand execution and report writing.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use wgspec_core::certificates::{
    ode_family_residual, thm12_certificate, thm13_certificate, thm14_trial_count, xi_dictionary, Certificate,
    CertificateError, Thm13Options,
};
use wgspec_core::effective1d::{
    asymptotic_slope, build_effective, count_vs_epsilon, solve_bound_states, EffectiveError, EffectiveModel, Grid,
};
use wgspec_core::expr::{parse, ExprError};
use wgspec_core::fiber::{band_structure, default_p_grid, fmt_num, threshold_from_fem, GroundData};
use wgspec_core::full3d::{detect_discrete, SectionData, TubeError, TubeSolveOptions};
use wgspec_core::linalg::{EigOptions, LinalgError};
use wgspec_core::mesh::{FemMatrices, Mesh, MeshError};
use wgspec_core::profile::Profile;
use wgspec_core::scenarios::{run_all, Resolution};

use crate::config::{Config, Format, ShiftPolicy, VerifyLevel};

/// Failure with its exit status: 2 configuration, 3 hypothesis gate,
/// 4 solver, 1 I/O.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn config(m: impl Into<String>) -> Self {
        Failure { code: 2, message: m.into() }
    }

    pub fn hypothesis(m: impl Into<String>) -> Self {
        Failure { code: 3, message: format!("hypothesis failed: {}", m.into()) }
    }

    pub fn solver(m: impl Into<String>) -> Self {
        Failure { code: 4, message: m.into() }
    }

    fn io(m: impl Into<String>) -> Self {
        Failure { code: 1, message: m.into() }
    }
}

impl From<ExprError> for Failure {
    fn from(e: ExprError) -> Self {
        Failure::config(format!("expression: {e}"))
    }
}

impl From<MeshError> for Failure {
    fn from(e: MeshError) -> Self {
        Failure::config(format!("cross-section: {e}"))
    }
}

impl From<LinalgError> for Failure {
    fn from(e: LinalgError) -> Self {
        Failure::solver(format!("eigensolver: {e}"))
    }
}

impl From<EffectiveError> for Failure {
    fn from(e: EffectiveError) -> Self {
        match e {
            EffectiveError::GridTooShort { .. } => Failure::hypothesis(e.to_string()),
            _ => Failure::config(e.to_string()),
        }
    }
}

impl From<TubeError> for Failure {
    fn from(e: TubeError) -> Self {
        match e {
            TubeError::Linalg(_) | TubeError::NonMonotone { .. } => Failure::solver(e.to_string()),
            _ => Failure::config(e.to_string()),
        }
    }
}

impl From<CertificateError> for Failure {
    fn from(e: CertificateError) -> Self {
        match e {
            CertificateError::Hypothesis(m) => Failure::hypothesis(m),
            CertificateError::NoNegativeInterval { .. } | CertificateError::Singularity { .. } => {
                Failure::hypothesis(e.to_string())
            }
            CertificateError::NonFinite(_) => Failure::solver(e.to_string()),
            _ => Failure::config(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Section,
    Bands,
    Potential,
    Bound1d,
    Tube,
    Thm12,
    Thm13,
    Thm14,
    Ode,
    ThinSweep,
    Asympt,
    VerifyAll,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Section => "section",
            Command::Bands => "bands",
            Command::Potential => "potential",
            Command::Bound1d => "bound1d",
            Command::Tube => "tube",
            Command::Thm12 => "certify-thm12",
            Command::Thm13 => "certify-thm13",
            Command::Thm14 => "certify-thm14",
            Command::Ode => "certify-ode",
            Command::ThinSweep => "thin-sweep",
            Command::Asympt => "asympt",
            Command::VerifyAll => "verify-all",
        }
    }
}

/// Everything a command produces.
pub struct Output {
    pub json: Value,
    pub csv: Option<String>,
    /// Set when the command ran but its checks did not hold.
    pub failed: Option<String>,
}

#[derive(Serialize)]
struct Report<'a> {
    command: &'static str,
    config: &'a Config,
    profile_hash: String,
    result: Value,
}

/// SHA-256 of the canonical profile text.
pub fn profile_hash(cfg: &Config) -> String {
    let p = &cfg.profile;
    let canon = |s: &str| parse(s).map(|e| e.print()).unwrap_or_else(|_| s.to_string());
    let text = format!(
        "fprime={}\ngprime={}\nbeta1={:?}\nbeta2={:?}\n",
        canon(&p.fprime),
        canon(&p.gprime),
        p.beta1,
        p.beta2
    );
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs `cmd`, returns the rendered JSON report and writes the artifacts.
pub fn execute(cmd: Command, cfg: &Config) -> Result<String, Failure> {
    let out = dispatch(cmd, cfg)?;
    let report = Report { command: cmd.name(), config: cfg, profile_hash: profile_hash(cfg), result: out.json };
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| Failure::io(e.to_string()))?;
    text.push('\n');
    if let Some(dir) = &cfg.output.directory {
        let dir = Path::new(dir);
        fs::create_dir_all(dir).map_err(|e| Failure::io(format!("{}: {e}", dir.display())))?;
        for f in &cfg.output.formats {
            let (path, body) = match f {
                Format::Json => (dir.join(format!("{}.json", cmd.name())), Some(&text)),
                Format::Csv => (dir.join(format!("{}.csv", cmd.name())), out.csv.as_ref()),
            };
            if let Some(body) = body {
                fs::write(&path, body).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
            }
        }
    }
    if let Some(m) = out.failed {
        eprint!("{text}");
        return Err(Failure::solver(m));
    }
    Ok(text)
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn csv_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}

struct Section {
    mesh: Mesh,
    fem: FemMatrices,
    ground: GroundData,
}

#[derive(Serialize)]
struct MeshStats {
    vertices: usize,
    triangles: usize,
    interior_dofs: usize,
    h: f64,
    max_edge: f64,
    min_angle: f64,
    area: f64,
}

fn mesh_stats(cfg: &Config, m: &Mesh) -> MeshStats {
    MeshStats {
        vertices: m.n_vertices(),
        triangles: m.n_triangles(),
        interior_dofs: m.n_interior(),
        h: cfg.cross_section.effective_h(),
        max_edge: m.max_edge(),
        min_angle: m.min_angle(),
        area: m.area(),
    }
}

fn section(cfg: &Config) -> Result<Section, Failure> {
    let mesh = cfg.cross_section.mesh()?;
    let fem = FemMatrices::assemble(&mesh);
    if fem.dim() == 0 {
        return Err(Failure::config("cross-section mesh has no interior vertices"));
    }
    let ground = threshold_from_fem(cfg.profile.beta1, cfg.profile.beta2, &fem, &EigOptions::default())?;
    Ok(Section { mesh, fem, ground })
}

fn profile(cfg: &Config) -> Result<Profile, Failure> {
    let p = &cfg.profile;
    Ok(Profile::new(&p.fprime, &p.gprime, p.beta1, p.beta2)?)
}

/// The declared limits `f' → β₁`, `g' → β₂`.
fn tail_gate(cfg: &Config, p: &Profile) -> Result<(), Failure> {
    let t = p.check_tails(cfg.profile.tail_x, cfg.profile.tail_tol)?;
    match t.failure() {
        Some(name) => Err(Failure::hypothesis(format!("tail limit check failed for {name}"))),
        None => Ok(()),
    }
}

fn effective(cfg: &Config, p: &Profile, ground: &GroundData, x_max: f64) -> Result<EffectiveModel, Failure> {
    let e = &cfg.effective;
    // Keep the sampling step when the grid is widened.
    let step = 2.0 * e.x_max / (e.points - 1) as f64;
    let points = ((2.0 * x_max / step).round() as usize + 1).max(e.points);
    Ok(build_effective(p, ground.coefficients, Grid::new(x_max, points), cfg.epsilon, cfg.profile.tail_tol)?)
}

#[derive(Serialize)]
struct SectionResult {
    mesh: MeshStats,
    ground: GroundData,
    epsilon: f64,
    /// `E₁(0)/ε²`
    threshold: f64,
}

#[derive(Serialize)]
struct PotentialResult {
    coefficients: wgspec_core::fiber::Coefficients,
    epsilon: f64,
    grid: Grid,
    integral: f64,
    v_min: f64,
    argmin: f64,
    v_max_abs: f64,
}

#[derive(Serialize)]
struct Bound1dResult {
    epsilon: f64,
    continuum_edge: f64,
    spectrum: wgspec_core::effective1d::Schrodinger1D,
}

#[derive(Serialize)]
struct CriterionRow {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn dispatch(cmd: Command, cfg: &Config) -> Result<Output, Failure> {
    let plain = |json: Value, csv: Option<String>| Ok(Output { json, csv, failed: None });
    match cmd {
        Command::Section => {
            let s = section(cfg)?;
            let g = &s.ground;
            let c = &g.coefficients;
            let csv = csv_table(
                &["beta1", "beta2", "E1", "E2", "A", "B", "C", "A_tilde"],
                &[[g.beta[0], g.beta[1], g.e1, g.e2, c.a, c.b, c.c, c.a_tilde].iter().map(|v| fmt_num(*v)).collect()],
            );
            let r = SectionResult {
                mesh: mesh_stats(cfg, &s.mesh),
                threshold: g.e1 / (cfg.epsilon * cfg.epsilon),
                ground: s.ground,
                epsilon: cfg.epsilon,
            };
            plain(to_json(&r), Some(csv))
        }
        Command::Bands => {
            let s = section(cfg)?;
            let grid = cfg.bands.p_grid.clone().unwrap_or_else(default_p_grid);
            let t = band_structure(cfg.profile.beta1, cfg.profile.beta2, &s.fem, &grid, cfg.bands.nbands, &EigOptions::default());
            let bad: Vec<String> = t.rows.iter().filter_map(|r| r.error.clone().map(|e| format!("p={}: {e}", r.p))).collect();
            Ok(Output {
                json: to_json(&t),
                csv: Some(t.to_csv()),
                failed: (!bad.is_empty()).then(|| format!("band solve failed at {}", bad.join("; "))),
            })
        }
        Command::Potential => {
            let p = profile(cfg)?;
            tail_gate(cfg, &p)?;
            let s = section(cfg)?;
            let em = effective(cfg, &p, &s.ground, cfg.effective.x_max)?;
            let r = PotentialResult {
                coefficients: em.coefficients,
                epsilon: em.epsilon,
                grid: em.grid,
                integral: em.integral,
                v_min: em.v_min,
                argmin: em.argmin,
                v_max_abs: em.v_max_abs,
            };
            plain(to_json(&r), Some(em.to_csv()))
        }
        Command::Bound1d => {
            let p = profile(cfg)?;
            tail_gate(cfg, &p)?;
            let s = section(cfg)?;
            let em = effective(cfg, &p, &s.ground, cfg.effective.x_max.max(cfg.effective.box_x))?;
            let spec = solve_bound_states(&em, cfg.effective.box_x, cfg.effective.hx)?;
            let rows: Vec<Vec<String>> = spec
                .eigenvalues
                .iter()
                .enumerate()
                .map(|(i, l)| vec![(i + 1).to_string(), fmt_num(*l), "bound".into()])
                .chain(spec.marginal.iter().enumerate().map(|(i, l)| {
                    vec![(spec.eigenvalues.len() + i + 1).to_string(), fmt_num(*l), "marginal".into()]
                }))
                .collect();
            let csv = csv_table(&["index", "eigenvalue", "status"], &rows);
            let r = Bound1dResult { epsilon: cfg.epsilon, continuum_edge: 0.0, spectrum: spec };
            plain(to_json(&r), Some(csv))
        }
        Command::Tube => {
            let p = profile(cfg)?;
            tail_gate(cfg, &p)?;
            let mesh = cfg.cross_section.mesh()?;
            let fem = FemMatrices::assemble(&mesh);
            let l0 = cfg.tube.l_list.first().copied().ok_or_else(|| Failure::config("tube.L_list is empty"))?;
            let hx = cfg.tube.nx.map_or(cfg.cross_section.effective_h(), |n| 2.0 * l0 / n as f64);
            let opts = TubeSolveOptions {
                tol: cfg.solver.tol,
                max_iter: cfg.solver.max_iter,
                sparse_limit: match cfg.solver.shift_policy {
                    ShiftPolicy::Auto => TubeSolveOptions::default().sparse_limit,
                    ShiftPolicy::Sparse => usize::MAX,
                    ShiftPolicy::Block => 0,
                },
                ..Default::default()
            };
            let r = detect_discrete(&p, SectionData::new(fem), cfg.epsilon, &cfg.tube.l_list, hx, cfg.solver.k, cfg.profile.tail_tol, &opts)?;
            #[derive(Serialize)]
            struct TubeResult<'a> {
                mesh: MeshStats,
                report: &'a wgspec_core::full3d::DetectionReport,
            }
            plain(to_json(&TubeResult { mesh: mesh_stats(cfg, &mesh), report: &r }), Some(r.to_csv()))
        }
        Command::Thm12 => {
            let p = profile(cfg)?;
            tail_gate(cfg, &p)?;
            let s = section(cfg)?;
            let x_max = cfg.effective.x_max.max(2.0 * cfg.certify.n_max as f64);
            let em = effective(cfg, &p, &s.ground, x_max)?;
            certificate(thm12_certificate(&em, cfg.certify.n_max)?)
        }
        Command::Thm13 => {
            let p = profile(cfg)?;
            let s = section(cfg)?;
            let opts = Thm13Options {
                dictionary: xi_dictionary(),
                n_max: cfg.certify.n_max,
                tail_x: cfg.profile.tail_x,
                tail_tol: cfg.profile.tail_tol,
            };
            certificate(thm13_certificate(&p, &s.mesh, &s.fem, &s.ground, &opts)?)
        }
        Command::Thm14 => {
            let p = profile(cfg)?;
            tail_gate(cfg, &p)?;
            let s = section(cfg)?;
            let em = effective(cfg, &p, &s.ground, cfg.effective.x_max)?;
            certificate(thm14_trial_count(&em, cfg.epsilon, cfg.certify.n)?)
        }
        Command::Ode => {
            let c = &cfg.certify;
            let a_tilde = match c.a_tilde {
                Some(a) => a,
                None => section(cfg)?.ground.coefficients.a_tilde,
            };
            let [lo, hi] = c.x_range;
            let grid: Vec<f64> = (0..c.x_points).map(|i| lo + (hi - lo) * i as f64 / (c.x_points - 1) as f64).collect();
            certificate(ode_family_residual(c.c, cfg.profile.beta1, a_tilde, &grid)?)
        }
        Command::ThinSweep => {
            let p = profile(cfg)?;
            tail_gate(cfg, &p)?;
            let s = section(cfg)?;
            let em = effective(cfg, &p, &s.ground, cfg.effective.x_max.max(cfg.effective.box_x))?;
            let sweep = count_vs_epsilon(&em, &cfg.effective.epsilons, cfg.effective.box_x, cfg.effective.hx)?;
            plain(to_json(&sweep), Some(sweep.to_csv()))
        }
        Command::Asympt => {
            let w = parse(&cfg.asympt.w)?;
            let t = asymptotic_slope(&w, &cfg.asympt.mu_list, cfg.asympt.j, cfg.asympt.x_max)?;
            plain(to_json(&t), Some(t.to_csv()))
        }
        Command::VerifyAll => {
            let level = match cfg.verify.level {
                VerifyLevel::Quick => Resolution::Quick,
                VerifyLevel::Full => Resolution::Full,
            };
            let results = run_all(level);
            for c in &results {
                eprintln!("{}", c.line());
            }
            let rows: Vec<CriterionRow> =
                results.iter().map(|c| CriterionRow { id: c.id, name: c.name, pass: c.pass, detail: c.detail.clone() }).collect();
            let csv = csv_table(
                &["id", "name", "pass", "detail"],
                &rows.iter().map(|r| vec![r.id.to_string(), r.name.to_string(), r.pass.to_string(), r.detail.clone()]).collect::<Vec<_>>(),
            );
            let failed: Vec<String> = rows.iter().filter(|r| !r.pass).map(|r| r.id.to_string()).collect();
            Ok(Output {
                json: to_json(&rows),
                csv: Some(csv),
                failed: (!failed.is_empty()).then(|| format!("criteria failed: {}", failed.join(", "))),
            })
        }
    }
}

fn certificate(c: Certificate) -> Result<Output, Failure> {
    Ok(Output { json: to_json(&c), csv: None, failed: None })
}
