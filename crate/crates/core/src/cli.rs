//! Command-line driver: convergence studies, the Cook membrane benchmark and
//! field export.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{
    convergence_rates, lshape_solution, run_level, smooth2d_solution, smooth3d_solution, von_mises, ErrorReport,
    Manufactured, DEFAULT_ERROR_DEGREE,
};
use crate::assembly::{lame_from_young_poisson, ProblemSpec};
use crate::error::{Error, Result};
use crate::geometry::{Tensor, Vector, ZERO};
use crate::mesh::{cook_membrane, lshape, unit_cube, unit_square, Mesh, COOK_LOAD};
use crate::solver::{solve_problem, Solution, DEFAULT_TOLERANCE};
use crate::vtk::{write_vtk, Fields};
use crate::weakops::weak_stress;

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_SOLVER_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Probe point of the Cook benchmark.
pub const COOK_PROBE: [f64; 2] = [48.0, 52.0];
const COOK_TRACTION: f64 = 1.0 / 16.0;

#[derive(Debug, Parser)]
#[command(name = "eg-elasticity", version, about = "Enriched Galerkin linear elasticity solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convergence study against a manufactured solution; writes CSV.
    Converge(RunArgs),
    /// Cook's membrane: u2 at (48, 52) per level, plus VTK fields.
    Cook(RunArgs),
    /// Solve and write displacement and stress fields as VTK.
    Export(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Problem {
    Square2d,
    Cube3d,
    Lshape,
    Cook,
}

impl Problem {
    fn name(self) -> &'static str {
        match self {
            Problem::Square2d => "square2d",
            Problem::Cube3d => "cube3d",
            Problem::Lshape => "lshape",
            Problem::Cook => "cook",
        }
    }
}

#[derive(Debug, Clone, Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    problem: Option<Problem>,
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    young: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    poisson: Option<f64>,
    /// Inclusive level range `a..b`.
    #[arg(long, conflicts_with = "h_list")]
    levels: Option<String>,
    /// Comma-separated mesh sizes such as `1/8,1/16` (square and cube only).
    #[arg(long)]
    h_list: Option<String>,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tol: f64,
    /// Quadrature degree for loads, boundary data and error norms.
    #[arg(long, default_value_t = DEFAULT_ERROR_DEGREE)]
    quad_deg: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Single-threaded, with timing columns written as zero.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Converge,
    Cook,
    Export,
}

/// One mesh of a study: a refinement level or the subdivisions per unit length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshSize {
    Level(u32),
    Subdivisions(usize),
}

/// Validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: CommandKind,
    pub problem: Problem,
    pub mu: f64,
    pub lambda: f64,
    pub meshes: Vec<MeshSize>,
    pub tol: f64,
    pub quad_deg: usize,
    pub out: PathBuf,
    pub deterministic: bool,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

fn parse_levels(text: &str) -> Result<Vec<u32>> {
    let (a, b) = text
        .split_once("..")
        .ok_or_else(|| usage(format!("levels must look like a..b, got {text:?}")))?;
    let parse = |s: &str| s.trim().parse::<u32>().map_err(|_| usage(format!("bad level {s:?}")));
    let (a, b) = (parse(a)?, parse(b)?);
    if a > b {
        return Err(usage(format!("empty level range {text}")));
    }
    Ok((a..=b).collect())
}

fn parse_h_list(text: &str) -> Result<Vec<usize>> {
    let list: Vec<usize> = text
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            let s = s.trim();
            let n = match s.split_once('/') {
                Some(("1", n)) => n.trim().parse::<usize>().ok(),
                Some(_) => None,
                None => s.parse::<f64>().ok().filter(|h| *h > 0.0).map(|h| (1.0 / h).round() as usize),
            };
            n.filter(|&n| n > 0).ok_or_else(|| usage(format!("bad mesh size {s:?}")))
        })
        .collect::<Result<_>>()?;
    if list.is_empty() {
        return Err(usage("empty mesh size list"));
    }
    Ok(list)
}

fn material(args: &RunArgs, problem: Problem) -> Result<(f64, f64)> {
    let lame = args.lambda.is_some() || args.mu.is_some();
    let engineering = args.young.is_some() || args.poisson.is_some();
    match (lame, engineering) {
        (true, true) => Err(usage("give either --lambda/--mu or --young/--poisson, not both")),
        (false, true) => match (args.young, args.poisson) {
            (Some(e), Some(nu)) => lame_from_young_poisson(e, nu),
            _ => Err(usage("--young and --poisson must be given together")),
        },
        (true, false) => {
            let (mu, lambda) = (args.mu.unwrap_or(1.0), args.lambda.unwrap_or(1.0));
            if mu > 0.0 && lambda > 0.0 {
                Ok((mu, lambda))
            } else {
                Err(usage(format!("Lamé parameters must be positive, got μ = {mu}, λ = {lambda}")))
            }
        }
        (false, false) if problem == Problem::Cook => lame_from_young_poisson(1.0, 1.0 / 3.0),
        (false, false) => Ok((1.0, 1.0)),
    }
}

fn default_meshes(problem: Problem) -> Vec<MeshSize> {
    match problem {
        Problem::Square2d => (3..=6).map(MeshSize::Level).collect(),
        Problem::Cube3d => [4, 8, 12, 16].into_iter().map(MeshSize::Subdivisions).collect(),
        Problem::Lshape => (2..=5).map(MeshSize::Level).collect(),
        Problem::Cook => (0..=5).map(MeshSize::Level).collect(),
    }
}

impl RunConfig {
    fn from_args(command: CommandKind, args: &RunArgs) -> Result<Self> {
        let problem = match (command, args.problem) {
            (CommandKind::Cook, None | Some(Problem::Cook)) => Problem::Cook,
            (CommandKind::Cook, Some(p)) => return Err(usage(format!("cook does not take --problem {}", p.name()))),
            (CommandKind::Converge, Some(Problem::Cook)) => {
                return Err(usage("cook has no exact solution; use the cook command"))
            }
            (_, Some(p)) => p,
            (_, None) => return Err(usage("--problem is required")),
        };
        let (mu, lambda) = material(args, problem)?;
        let meshes = match (&args.levels, &args.h_list) {
            (Some(l), _) => parse_levels(l)?.into_iter().map(MeshSize::Level).collect(),
            (None, Some(h)) => {
                if !matches!(problem, Problem::Square2d | Problem::Cube3d) {
                    return Err(usage("--h-list applies to square2d and cube3d only"));
                }
                parse_h_list(h)?.into_iter().map(MeshSize::Subdivisions).collect()
            }
            (None, None) => default_meshes(problem),
        };
        if !(args.tol > 0.0 && args.tol <= 1e-6) {
            return Err(usage(format!("--tol {} outside (0, 1e-6]", args.tol)));
        }
        if args.quad_deg < DEFAULT_ERROR_DEGREE {
            return Err(usage(format!("--quad-deg must be at least {DEFAULT_ERROR_DEGREE}")));
        }
        Ok(RunConfig {
            command,
            problem,
            mu,
            lambda,
            meshes,
            tol: args.tol,
            quad_deg: args.quad_deg,
            out: args.out.clone(),
            deterministic: args.deterministic,
        })
    }
}

/// Mesh of `problem` at the given size. Square and cube levels mean `2^level`
/// subdivisions per side.
pub fn build_mesh(problem: Problem, size: MeshSize) -> Result<Mesh> {
    let subdivisions = |size| match size {
        MeshSize::Level(l) if l < 16 => Ok(1usize << l),
        MeshSize::Level(l) => Err(usage(format!("level {l} too large"))),
        MeshSize::Subdivisions(n) => Ok(n),
    };
    match (problem, size) {
        (Problem::Square2d, s) => unit_square(subdivisions(s)?),
        (Problem::Cube3d, s) => unit_cube(subdivisions(s)?),
        (Problem::Lshape, MeshSize::Level(l)) => lshape(l),
        (Problem::Cook, MeshSize::Level(l)) => cook_membrane(l),
        (p, MeshSize::Subdivisions(_)) => Err(usage(format!("{} meshes are selected by level", p.name()))),
    }
}

/// Manufactured solution of a problem with a closed-form answer.
pub fn manufactured(problem: Problem, mu: f64, lambda: f64) -> Option<Manufactured> {
    match problem {
        Problem::Square2d => Some(smooth2d_solution(mu, lambda)),
        Problem::Cube3d => Some(smooth3d_solution(mu, lambda)),
        Problem::Lshape => Some(lshape_solution(mu, lambda).1),
        Problem::Cook => None,
    }
}

/// Clamped left edge, shear traction `(0, 1/16)` on the right edge, free
/// top and bottom, no body force.
pub fn cook_spec(mu: f64, lambda: f64) -> Result<ProblemSpec> {
    Ok(ProblemSpec::new(mu, lambda)?
        .with_dirichlet(|_| ZERO)
        .with_neumann(|_, region| if region == COOK_LOAD { [0.0, COOK_TRACTION, 0.0] } else { ZERO }))
}

fn problem_spec(config: &RunConfig) -> Result<ProblemSpec> {
    let spec = match manufactured(config.problem, config.mu, config.lambda) {
        Some(m) => m.spec(config.mu, config.lambda)?,
        None => cook_spec(config.mu, config.lambda)?,
    };
    Ok(spec.with_degrees(config.quad_deg, config.quad_deg))
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_rate(rate: Option<f64>) -> String {
    rate.map(fmt_f64).unwrap_or_default()
}

pub const CONVERGE_HEADER: &str = "h,dofs,l2_err,l2_rate,h1_err,h1_rate,stress_err,stress_rate,solve_seconds";

/// CSV text of a convergence study; timings are written as zero when
/// `deterministic` is set.
pub fn converge_csv(rows: &[ErrorReport], deterministic: bool) -> Result<String> {
    let rates = |pick: fn(&ErrorReport) -> f64| -> Result<Vec<Option<f64>>> {
        if rows.len() < 2 {
            return Ok(vec![None; rows.len()]);
        }
        convergence_rates(&rows.iter().map(|r| (r.h, pick(r))).collect::<Vec<_>>())
    };
    let l2 = rates(|r| r.norms.l2)?;
    let h1 = rates(|r| r.norms.h1)?;
    let st = rates(|r| r.norms.stress)?;
    let mut text = String::from(CONVERGE_HEADER);
    text.push('\n');
    for (k, r) in rows.iter().enumerate() {
        let seconds = if deterministic { 0.0 } else { r.solve_seconds };
        writeln!(
            text,
            "{},{},{},{},{},{},{},{},{}",
            fmt_f64(r.h),
            r.dofs,
            fmt_f64(r.norms.l2),
            fmt_rate(l2[k]),
            fmt_f64(r.norms.h1),
            fmt_rate(h1[k]),
            fmt_f64(r.norms.stress),
            fmt_rate(st[k]),
            fmt_f64(seconds)
        )
        .expect("writing to a String");
    }
    Ok(text)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_out_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

fn lambda_tag(lambda: f64) -> String {
    format!("{lambda:e}").replace('.', "p")
}

/// Runs a convergence study and writes `converge_<problem>_lambda<λ>.csv`.
pub fn run_converge(config: &RunConfig) -> Result<(PathBuf, Vec<ErrorReport>)> {
    let spec = problem_spec(config)?;
    if spec.exact.is_none() {
        return Err(usage("convergence studies need a problem with an exact solution"));
    }
    let mut rows = Vec::with_capacity(config.meshes.len());
    for &size in &config.meshes {
        let mesh = build_mesh(config.problem, size)?;
        let row = run_level(&mesh, &spec, config.tol, config.quad_deg)?;
        eprintln!(
            "h = {:.5}  dofs = {:>8}  l2 = {:.4e}  h1 = {:.4e}  stress = {:.4e}",
            row.h, row.dofs, row.norms.l2, row.norms.h1, row.norms.stress
        );
        rows.push(row);
    }
    create_out_dir(&config.out)?;
    let path = config
        .out
        .join(format!("converge_{}_lambda{}.csv", config.problem.name(), lambda_tag(config.lambda)));
    write_file(&path, &converge_csv(&rows, config.deterministic)?)?;
    Ok((path, rows))
}

/// Index of the vertex at `(x, y)`.
pub fn find_vertex(mesh: &Mesh, x: f64, y: f64) -> Result<usize> {
    mesh.points()
        .iter()
        .position(|p| (p[0] - x).abs() < 1e-9 && (p[1] - y).abs() < 1e-9)
        .ok_or_else(|| Error::Configuration(format!("no mesh vertex at ({x}, {y})")))
}

/// Result of one Cook level.
#[derive(Debug, Clone, PartialEq)]
pub struct CookRow {
    pub level: u32,
    pub dofs: usize,
    pub u2: f64,
}

fn field_export(mesh: &Mesh, solution: &Solution, mu: f64, lambda: f64, path: &Path, title: &str) -> Result<()> {
    let displacement: Vec<Vector> = solution.u.nodal_values();
    let stress: Vec<Tensor> = (0..mesh.n_cells())
        .map(|c| weak_stress(mesh, &solution.u, c, mu, lambda))
        .collect();
    let vm = if mesh.dim() == 2 {
        Some(von_mises(mesh, &solution.u, mu, lambda)?)
    } else {
        None
    };
    let mut fields = Fields {
        point_vectors: vec![("displacement", &displacement)],
        cell_tensors: vec![("stress", &stress)],
        ..Fields::default()
    };
    if let Some(vm) = &vm {
        fields.cell_scalars.push(("von_mises", vm));
    }
    write_vtk(path, mesh, &fields, title)
}

/// Cook benchmark: per level, `u2(48, 52)` and a VTK file.
pub fn run_cook(config: &RunConfig) -> Result<(PathBuf, Vec<CookRow>)> {
    let spec = problem_spec(config)?;
    create_out_dir(&config.out)?;
    let mut rows = Vec::new();
    for &size in &config.meshes {
        let MeshSize::Level(level) = size else {
            return Err(usage("cook meshes are selected by level"));
        };
        let mesh = cook_membrane(level)?;
        let probe = find_vertex(&mesh, COOK_PROBE[0], COOK_PROBE[1])?;
        let solution = solve_problem(&mesh, &spec, config.tol)?;
        let u2 = solution.u.vertex_value(probe)[1];
        eprintln!("level {level}  dofs = {:>8}  u2(48,52) = {u2:.10e}", solution.dofs.total());
        let vtk = config.out.join(format!("cook_level{level}.vtk"));
        field_export(&mesh, &solution, config.mu, config.lambda, &vtk, "cook membrane")?;
        rows.push(CookRow {
            level,
            dofs: solution.dofs.total(),
            u2,
        });
    }
    let mut text = String::from("dofs,u2\n");
    for r in &rows {
        writeln!(text, "{},{}", r.dofs, fmt_f64(r.u2)).expect("writing to a String");
    }
    let path = config.out.join(format!("cook_lambda{}.csv", lambda_tag(config.lambda)));
    write_file(&path, &text)?;
    Ok((path, rows))
}

/// Solves each mesh and writes `<problem>_<size>.vtk`.
pub fn run_export(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let spec = problem_spec(config)?;
    create_out_dir(&config.out)?;
    let mut paths = Vec::new();
    for &size in &config.meshes {
        let mesh = build_mesh(config.problem, size)?;
        let solution = solve_problem(&mesh, &spec, config.tol)?;
        let tag = match size {
            MeshSize::Level(l) => format!("level{l}"),
            MeshSize::Subdivisions(n) => format!("n{n}"),
        };
        let path = config.out.join(format!("{}_{tag}.vtk", config.problem.name()));
        field_export(&mesh, &solution, config.mu, config.lambda, &path, config.problem.name())?;
        paths.push(path);
    }
    Ok(paths)
}

fn configure_threads(deterministic: bool) {
    let cap = std::env::var("EG_THREADS").ok().and_then(|v| v.parse::<usize>().ok());
    let threads = if deterministic { Some(1) } else { cap.filter(|&n| n > 0) };
    if let Some(n) = threads {
        // fails only if a pool was already installed, which leaves that pool in place
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        faer::set_global_parallelism(if n == 1 { faer::Par::Seq } else { faer::Par::rayon(n) });
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidParameter(_) | Error::Configuration(_) => EXIT_USAGE,
        _ => EXIT_SOLVER_FAILURE,
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_SUCCESS };
        }
    };
    let (kind, args) = match &cli.command {
        Command::Converge(a) => (CommandKind::Converge, a),
        Command::Cook(a) => (CommandKind::Cook, a),
        Command::Export(a) => (CommandKind::Export, a),
    };
    let config = match RunConfig::from_args(kind, args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    configure_threads(config.deterministic);
    let result = match kind {
        CommandKind::Converge => run_converge(&config).map(|(p, _)| vec![p]),
        CommandKind::Cook => run_cook(&config).map(|(p, _)| vec![p]),
        CommandKind::Export => run_export(&config),
    };
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            EXIT_SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
