//! `biotfv`: mesh generation, condition checks, static solves, time marching
//! and convergence sweeps for the cell-centered Biot discretization.
//!
//! Exit codes: 0 success, 2 invalid flags or input, 3 condition check failed,
//! 4 solver failure, 1 anything else (e.g. output not writable).

mod bcfile;
mod vtk;

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use biotfv_core::assembly::{join, midpoint_sources, read_materials, split, Discretization, MaterialField};
use biotfv_core::dfield::{read_field, write_field, CellField, Space};
use biotfv_core::localop::Variant;
use biotfv_core::mesh::{read_mesh, write_mesh, BoundaryData, GridType, MeshTriplet};
use biotfv_core::mms::{run_sweep, Manufactured, SweepConfig};
use biotfv_core::postproc::{balance, error_metrics, reconstruct, ErrorReport};
use clap::{Args, Parser, Subcommand, ValueEnum};

use bcfile::{read_bc, BcFile};

#[derive(Parser, Debug)]
#[command(name = "biotfv", version, about = "Cell-centered finite volumes for Biot poroelasticity")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also write legacy VTK files next to the CSV output.
    #[arg(long, global = true)]
    vtk: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a (perturbed) grid of type A, B or C on the unit square.
    Mesh(MeshArgs),
    /// Evaluate the local stability conditions at every vertex.
    Check(CheckArgs),
    /// Static solve.
    Solve(SolveArgs),
    /// Backward-Euler time march.
    March(MarchArgs),
    /// Manufactured-solution refinement study over grids and (rho, tau).
    Convergence(ConvergenceArgs),
}

#[derive(Args, Debug)]
struct MeshArgs {
    #[arg(long = "type", value_parser = parse_grid)]
    grid: GridType,
    /// Lattice cells per axis.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    /// Perturbation amplitude as a fraction of the shortest edge, in [0, 0.5].
    #[arg(long, default_value_t = 0.0, value_parser = parse_amplitude)]
    perturb: f64,
    /// Seed of the ChaCha8 perturbation stream.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VariantArg {
    /// Simplex-symmetric on triangulations, general otherwise.
    Auto,
    General,
    Simplex,
    OMethod,
}

impl VariantArg {
    fn resolve(self, mesh: &MeshTriplet) -> Variant {
        match self {
            VariantArg::Auto => Variant::auto(mesh),
            VariantArg::General => Variant::General,
            VariantArg::Simplex => Variant::SimplexSymmetric,
            VariantArg::OMethod => Variant::OMethod,
        }
    }
}

#[derive(Args, Debug)]
struct Problem {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    materials: PathBuf,
    #[arg(long, value_enum, default_value_t = VariantArg::Auto)]
    variant: VariantArg,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[command(flatten)]
    problem: Problem,
    /// Boundary-condition file (default: Dirichlet everywhere).
    #[arg(long)]
    bc: Option<PathBuf>,
    /// Also estimate the global inf-sup constant (dense; small meshes only).
    #[arg(long)]
    theta_b: bool,
    /// CSV destination (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    problem: Problem,
    #[arg(long)]
    bc: PathBuf,
    #[arg(long, allow_negative_numbers = true, value_parser = parse_non_negative)]
    tau: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Init {
    Zero,
    /// Steady state of the boundary data.
    Steady,
}

#[derive(Args, Debug)]
struct MarchArgs {
    #[command(flatten)]
    problem: Problem,
    #[arg(long)]
    bc: PathBuf,
    #[arg(long, allow_negative_numbers = true, value_parser = parse_positive)]
    tau: f64,
    #[arg(long, default_value_t = 20)]
    steps: usize,
    #[arg(long, value_enum, default_value_t = Init::Zero)]
    init: Init,
    /// Initial pressure field (`biotfv-field v1`, cell-scalar); overrides the pressure of `--init`.
    #[arg(long)]
    initial_p: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ConvergenceArgs {
    /// Grid types, e.g. `ABC`.
    #[arg(long, default_value = "ABC", value_parser = parse_grids)]
    grids: List<GridType>,
    #[arg(long, default_value_t = 6, value_parser = clap::value_parser!(u64).range(3..))]
    levels: u64,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    base: u64,
    #[arg(long, default_value = "1,1e-2,1e-4,1e-6", allow_negative_numbers = true, value_parser = parse_list)]
    rho_list: List<f64>,
    #[arg(long, default_value = "1,1e-1,1e-2,1e-4,1e-6", allow_negative_numbers = true, value_parser = parse_list)]
    tau_list: List<f64>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 0.5, value_parser = parse_amplitude)]
    amplitude: f64,
    #[arg(long)]
    out: PathBuf,
}

/// A flag value that is itself a list (kept as one clap value).
#[derive(Clone, Debug)]
struct List<T>(Vec<T>);

fn parse_grid(s: &str) -> Result<GridType, String> {
    s.parse()
}

/// Every character is one grid type.
fn parse_grids(s: &str) -> Result<List<GridType>, String> {
    if s.is_empty() {
        return Err("no grid type given (valid: A, B, C)".into());
    }
    s.chars().map(|c| c.to_string().parse()).collect::<Result<_, _>>().map(List)
}

fn parse_non_negative(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be finite and non-negative"))
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    match parse_non_negative(s)? {
        v if v > 0.0 => Ok(v),
        _ => Err("must be positive".into()),
    }
}

fn parse_amplitude(s: &str) -> Result<f64, String> {
    match parse_non_negative(s)? {
        v if v <= 0.5 => Ok(v),
        v => Err(format!("{v} outside [0, 0.5]")),
    }
}

fn parse_list(s: &str) -> Result<List<f64>, String> {
    s.split(',').map(|t| parse_non_negative(t.trim())).collect::<Result<_, _>>().map(List)
}

/// Problem with the user's input files (exit code 2).
#[derive(Debug)]
struct InvalidInput(String);

impl fmt::Display for InvalidInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InvalidInput {}

/// The condition check failed (exit code 3).
#[derive(Debug)]
struct ConditionsFailed;

impl fmt::Display for ConditionsFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("stability conditions are not satisfied")
    }
}

impl std::error::Error for ConditionsFailed {}

fn exit_code(e: &anyhow::Error) -> u8 {
    use biotfv_core::Error as E;
    if e.chain().any(|c| c.is::<ConditionsFailed>()) {
        return 3;
    }
    if e.chain().any(|c| c.is::<InvalidInput>()) {
        return 2;
    }
    match e.chain().find_map(|c| c.downcast_ref::<E>()) {
        Some(E::Solver(_) | E::Residual { .. } | E::LocalSolve { .. } | E::DegenerateSubcell { .. }) => 4,
        Some(E::Io(_)) | None => 1,
        Some(_) => 2,
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| InvalidInput(format!("cannot open {}: {e}", path.display())).into())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
}

fn out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn load_mesh(path: &Path) -> Result<MeshTriplet> {
    read_mesh(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn load_bc(path: Option<&Path>) -> Result<BcFile> {
    match path {
        None => Ok(BcFile::default()),
        Some(p) => read_bc(open(p)?).map_err(|e| InvalidInput(format!("{}: {e:#}", p.display())).into()),
    }
}

fn discretize(problem: &Problem, bc: &BcFile, tau: f64) -> Result<Discretization> {
    let mesh = load_mesh(&problem.mesh)?;
    let materials = read_materials(open(&problem.materials)?, mesh.num_cells(), tau)
        .with_context(|| format!("reading {}", problem.materials.display()))?;
    let variant = problem.variant.resolve(&mesh);
    log::info!("{} cells, variant {variant}", mesh.num_cells());
    Ok(Discretization::new(mesh, materials, bc.spec.clone(), variant)?)
}

/// Cell source integrals: manufactured forcing, or the constant densities of the bc file.
fn sources(d: &Discretization, bc: &BcFile, materials: &MaterialField, tau: f64) -> (Vec<f64>, Vec<f64>) {
    let g = &d.geometry;
    if bc.manufactured {
        let f_u = midpoint_sources(g, Manufactured::f_u).iter().flat_map(|v| [v.x, v.y]).collect();
        let f_p = (0..d.num_cells())
            .map(|k| g.cell_area[k] * Manufactured::f_p(g.cell_center[k], materials.cells[k].rho, tau))
            .collect();
        (f_u, f_p)
    } else {
        let f_u = g.cell_area.iter().flat_map(|&m| [m * bc.source_u.x, m * bc.source_u.y]).collect();
        (f_u, g.cell_area.iter().map(|&m| m * bc.source_p).collect())
    }
}

fn write_cell_fields(dir: &Path, u: &[f64], p: &[f64]) -> Result<()> {
    write_field(&CellField::vector(u.to_vec()), create(&dir.join("u.field"))?)?;
    write_field(&CellField::scalar(p.to_vec()), create(&dir.join("p.field"))?)?;
    Ok(())
}

fn cmd_mesh(a: &MeshArgs) -> Result<()> {
    let mesh = a.grid.build_perturbed(a.n as usize, a.perturb, a.seed)?;
    let mut w = create(&a.out)?;
    write_mesh(&mesh, &mut w)?;
    w.flush()?;
    println!(
        "grid {} n={} perturb={} seed={}: {} cells, {} faces, {} vertices -> {}",
        a.grid,
        a.n,
        a.perturb,
        a.seed,
        mesh.num_cells(),
        mesh.num_faces(),
        mesh.num_vertices(),
        a.out.display()
    );
    Ok(())
}

fn cmd_check(a: &CheckArgs) -> Result<()> {
    let bc = load_bc(a.bc.as_deref())?;
    let d = discretize(&a.problem, &bc, 0.0)?;
    let report = d.conditions(a.theta_b)?;
    match &a.out {
        Some(path) => {
            let mut w = create(path)?;
            report.write_csv(&mut w)?;
            w.flush()?;
        }
        None => report.write_csv(std::io::stdout().lock())?,
    }
    eprintln!(
        "min theta_a {:.4e}, theta_c {:.4e}, theta_delta {:.4e}; Theta_Lambda {:.4e}; Theta_B {}",
        report.theta_a,
        report.theta_c,
        report.theta_delta,
        report.big_theta_lambda,
        report.theta_b.map_or("not computed".to_string(), |t| format!("{:.4e}", t.value))
    );
    if report.passes() {
        Ok(())
    } else {
        Err(ConditionsFailed.into())
    }
}

fn cmd_solve(a: &SolveArgs, vtk: bool) -> Result<()> {
    let bc = load_bc(Some(&a.bc))?;
    let d = discretize(&a.problem, &bc, a.tau)?;
    let (f_u, f_p) = sources(&d, &bc, &d.materials, a.tau);
    let data = d.boundary_data();
    let rho = &d.system.rho;
    let sol = d.solve_with(rho, a.tau, &f_u, &f_p, &data)?;
    out_dir(&a.out)?;
    write_cell_fields(&a.out, &sol.u, &sol.p)?;
    let faces = reconstruct(&d, &sol, &data);
    write_faces(&a.out, &d, &faces.flux, &faces.traction)?;
    let cells = balance(&d, &sol, &faces, &data, &f_u, &f_p, rho, a.tau);
    let mut w = create(&a.out.join("balance.csv"))?;
    writeln!(w, "cell,mass,momentum_x,momentum_y")?;
    for (k, c) in cells.iter().enumerate() {
        writeln!(w, "{k},{:e},{:e},{:e}", c.mass, c.momentum.x, c.momentum.y)?;
    }
    w.flush()?;
    let worst = cells.iter().map(|c| c.max_abs()).fold(sol.residual, f64::max);
    if bc.manufactured {
        let rho_mean = rho.iter().sum::<f64>() / rho.len() as f64;
        let r = error_metrics(&d, &sol, &faces, &Manufactured::exact(), rho_mean, a.tau);
        let mut w = create(&a.out.join("errors.csv"))?;
        writeln!(w, "{}", ErrorReport::CSV_HEADER)?;
        r.write_csv_row(&mut w)?;
        w.flush()?;
        println!("eps_u {:.4e} eps_p {:.4e} eps_sigma {:.4e} eps_up {:.4e}", r.eps_u, r.eps_p, r.eps_sigma, r.eps_up);
    }
    if vtk {
        vtk::write_vtk(&d.mesh, &sol.u, &sol.p, create(&a.out.join("solution.vtk"))?)?;
    }
    println!("solved {} cells; largest relative cell residual {worst:.3e} -> {}", d.num_cells(), a.out.display());
    Ok(())
}

fn write_faces(dir: &Path, d: &Discretization, flux: &[f64], traction: &[biotfv_core::Point]) -> Result<()> {
    let mut w = create(&dir.join("fluxes.csv"))?;
    writeln!(w, "face,cell,n_x,n_y,q")?;
    for (f, q) in flux.iter().enumerate() {
        let n = d.geometry.face_normal[f];
        writeln!(w, "{f},{},{:e},{:e},{:e}", d.geometry.face_owner[f], n.x, n.y, q)?;
    }
    w.flush()?;
    let mut w = create(&dir.join("tractions.csv"))?;
    writeln!(w, "face,T_x,T_y")?;
    for (f, t) in traction.iter().enumerate() {
        writeln!(w, "{f},{:e},{:e}", t.x, t.y)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_march(a: &MarchArgs, vtk: bool) -> Result<()> {
    let bc = load_bc(Some(&a.bc))?;
    let d = discretize(&a.problem, &bc, a.tau)?;
    let n = d.num_cells();
    let mut x0 = match a.init {
        Init::Zero => vec![0.0; 3 * n],
        Init::Steady => d.steady_state()?,
    };
    if let Some(path) = &a.initial_p {
        let p = read_field(open(path)?).with_context(|| format!("reading {}", path.display()))?;
        if p.ncomp() != 1 || p.num_cells() != n {
            return Err(InvalidInput(format!("{}: expected a cell-scalar field with {n} cells", path.display())).into());
        }
        let (u, _) = split(&x0);
        x0 = join(&u, p.values());
    }
    // per-step source integrals, entering the step equation like the static right-hand side
    let (f_u, f_p) = sources(&d, &bc, &d.materials, a.tau);
    let s = d.system.rhs(&f_u, &f_p, &BoundaryData::zeros(d.geometry.boundary_subfaces.len()), 0.0);
    let forced = f_u.iter().chain(&f_p).any(|&v| v != 0.0);
    let states = d.march(&x0, a.tau, a.steps, |_| forced.then(|| s.clone()))?;
    out_dir(&a.out)?;
    let none = vec![false; d.mesh.num_faces()];
    let space = Space::new(&d.mesh, &d.geometry, &d.quadrature, &none);
    let mut w = create(&a.out.join("march.csv"))?;
    writeln!(w, "step,time,p_norm,u_norm")?;
    for (j, x) in states.iter().enumerate() {
        let (u, p) = split(x);
        let pn = space.norm_t0(&CellField::scalar(p));
        let un = space.norm_t0(&CellField::vector(u));
        writeln!(w, "{j},{:e},{pn:e},{un:e}", j as f64 * a.tau)?;
    }
    w.flush()?;
    let (u, p) = split(states.last().expect("initial state"));
    write_cell_fields(&a.out, &u, &p)?;
    if vtk {
        vtk::write_vtk(&d.mesh, &u, &p, create(&a.out.join("solution.vtk"))?)?;
    }
    println!("{} steps of tau={} on {n} cells -> {}", a.steps, a.tau, a.out.display());
    Ok(())
}

fn cmd_convergence(a: &ConvergenceArgs) -> Result<()> {
    let config = SweepConfig {
        grids: a.grids.0.clone(),
        levels: a.levels as usize,
        base: a.base as usize,
        amplitude: a.amplitude,
        seed: a.seed,
        rho: a.rho_list.0.clone(),
        tau: a.tau_list.0.clone(),
    };
    let sweep = run_sweep(&config)?;
    sweep.write_tables(&a.out)?;
    let failed = sweep.reports.iter().filter(|r| r.levels.is_empty()).count();
    if failed > 0 {
        log::error!("{failed} of {} (grid, rho, tau) combinations failed; reported as NaN", sweep.reports.len());
    }
    println!("{:>5} {:>10} {:>10} {:>10} {:>10}", "grid", "rho", "tau", "rate_up", "rate_sigma");
    for r in &sweep.reports {
        println!("{:>5} {:>10.1e} {:>10.1e} {:>10.3} {:>10.3}", r.grid, r.rho, r.tau, r.rate_up, r.rate_sigma);
    }
    println!("tables written to {}", a.out.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Mesh(a) => cmd_mesh(a),
        Command::Check(a) => cmd_check(a),
        Command::Solve(a) => cmd_solve(a, cli.vtk),
        Command::March(a) => cmd_march(a, cli.vtk),
        Command::Convergence(a) => cmd_convergence(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BIOTFV_LOG", "warn")).init();
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            log::warn!("thread pool already initialized: {e}");
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
