use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use refractor_core::manifest::{Problem, ResolvedTargets, RunManifest};
use refractor_core::newton::{
    multires_schedule, quasi_newton_solve, MultiresConfig, RefineConfig, StageTolerance,
};
use refractor_core::pipeline::{
    coefficients_csv, export_mesh, forward_render, loglog_slope, parse_coefficients_csv,
    scaling_csv, scaling_study, solve_refining_grid, MeshFormat,
};
use refractor_core::verify::{run_suite, Suite, SuiteConfig};
use refractor_core::{
    image_to_targets, CoefficientVector, Error, Result, SolveReport, SolverConfig, SourceLattice,
    TargetOptions,
};

#[derive(Parser)]
#[command(
    name = "refractor",
    version,
    about = "Far-field refractor design with supporting ellipsoids"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coordinate descent to an ε-certified coefficient vector.
    Solve(Common),
    /// Quasi-Newton refinement, multiresolution when an image and schedule are given.
    Refine(Common),
    /// Forward ray trace of a coefficient vector against its targets.
    Render(Common),
    /// Triangle mesh of the lens surface.
    Export(Common),
    /// Randomized property suites.
    Verify(Common),
    /// Adjustment counts and wall time over a range of lattice sizes.
    Scaling(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// Refractive index ratio, in (0, 1).
    #[arg(long, default_value_t = 0.5)]
    kappa: f64,
    /// Target lattice parameter; the lattice has (n+1)² directions.
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// Source lattice parameter; the grid has (2M+1)² rays.
    #[arg(long = "M", default_value_t = 100)]
    m: usize,
    /// Largest M reached when a coordinate window is skipped.
    #[arg(long = "max-m")]
    max_m: Option<usize>,
    /// Window width; defaults to eps/N, or eps with --skip-first.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 0.025)]
    eps: f64,
    /// Certify only directions 2..N.
    #[arg(long)]
    skip_first: bool,
    /// Equal intensities on the target lattice (the default problem).
    #[arg(long, conflicts_with_all = ["triad", "image"])]
    uniform: bool,
    /// The three-direction example instance.
    #[arg(long, conflicts_with = "image")]
    triad: bool,
    /// Grayscale PGM prescribing the target intensities.
    #[arg(long)]
    image: Option<PathBuf>,
    /// Comma-separated increasing lattice sizes for multiresolution refinement.
    #[arg(long, value_delimiter = ',')]
    schedule: Vec<usize>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Mesh format for export: obj or stl.
    #[arg(long, default_value = "obj")]
    format: String,
    /// Property suite name, or `all`.
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Coefficient CSV to render, export or refine from.
    #[arg(long)]
    coeffs: Option<PathBuf>,
    /// Smallest and largest n of a scaling study.
    #[arg(long, default_value_t = 1)]
    n_min: usize,
    #[arg(long, default_value_t = 4)]
    n_max: usize,
    /// Run from a saved manifest instead of the flags above (except --out).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

impl Common {
    fn manifest(&self, command: &str) -> Result<RunManifest> {
        if let Some(path) = &self.manifest {
            let mut m = RunManifest::read(path)?;
            m.command = command.into();
            m.out = self.out.clone();
            m.validate()?;
            return Ok(m);
        }
        let problem = if self.image.is_some() {
            Problem::Image
        } else if self.triad {
            Problem::Triad
        } else {
            Problem::Uniform
        };
        let mut m = RunManifest::new(command, problem);
        m.kappa = self.kappa;
        m.n = self.n;
        m.m = self.m;
        m.max_m = self.max_m.unwrap_or(8 * self.m);
        m.delta = self.delta;
        m.epsilon = self.eps;
        m.skip_first = self.skip_first;
        m.schedule = self.schedule.clone();
        m.seed = self.seed;
        m.workers = self.workers;
        m.image = self.image.clone();
        m.coefficients = self.coeffs.clone();
        m.out = self.out.clone();
        m.validate()?;
        Ok(m)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common) = match &cli.command {
        Command::Solve(c) => ("solve", c),
        Command::Refine(c) => ("refine", c),
        Command::Render(c) => ("render", c),
        Command::Export(c) => ("export", c),
        Command::Verify(c) => ("verify", c),
        Command::Scaling(c) => ("scaling", c),
    };
    let run = || -> Result<bool> {
        let manifest = common.manifest(name)?;
        if let Some(w) = manifest.workers {
            rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build_global()
                .map_err(|e| Error::InvalidConfig(format!("cannot start {w} workers: {e}")))?;
        }
        std::fs::create_dir_all(&manifest.out).map_err(|e| io_error(&manifest.out, e))?;
        let ok = match &cli.command {
            Command::Solve(_) => cmd_solve(&manifest)?,
            Command::Refine(_) => cmd_refine(&manifest)?,
            Command::Render(_) => cmd_render(&manifest)?,
            Command::Export(_) => cmd_export(&manifest, common)?,
            Command::Verify(_) => cmd_verify(&manifest, common)?,
            Command::Scaling(_) => cmd_scaling(&manifest, common)?,
        };
        manifest.write_into(&manifest.out)?;
        Ok(ok)
    };
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| io_error(&path, e))
}

fn source_lattice(m: &RunManifest, targets: &ResolvedTargets) -> Result<SourceLattice> {
    let grid = SourceLattice::new(m.m)?;
    let check = refractor_core::sphere::check_no_total_reflection(
        grid.grid().points(),
        targets.targets.directions(),
        m.kappa()?,
    );
    if !check.ok {
        return Err(Error::TotalReflectionRisk {
            min_dot: check.min_dot,
            kappa: m.kappa,
        });
    }
    Ok(grid)
}

fn write_report(
    m: &RunManifest,
    t: &ResolvedTargets,
    report: &SolveReport,
    grid_m: usize,
) -> Result<()> {
    write(
        &m.out,
        "coefficients.csv",
        &coefficients_csv(&report.final_b, &t.targets, t.lattice.as_ref()),
    )?;
    let summary = format!("M: {grid_m}\n{}", report.summary());
    write(&m.out, "summary.txt", &summary)?;
    write(&m.out, "trace.csv", &report.trace_csv())?;
    print!("{summary}");
    Ok(())
}

fn cmd_solve(m: &RunManifest) -> Result<bool> {
    let t = m.resolve_targets(m.n)?;
    let config = m.solver_config(&t.targets)?;
    let (report, grid) = solve_refining_grid(&t.targets, m.m, m.max_m, m.kappa()?, &config)?;
    write_report(m, &t, &report, grid.m())?;
    Ok(report.converged)
}

fn cmd_refine(m: &RunManifest) -> Result<bool> {
    let kappa = m.kappa()?;
    if m.problem == Problem::Image {
        let img = m.read_image()?;
        let schedule = if m.schedule.is_empty() {
            vec![m.n]
        } else {
            m.schedule.clone()
        };
        let last = *schedule.last().expect("nonempty");
        let (_, grid) = refractor_core::build_lattices(last, m.m, kappa)?;
        let provider =
            |l: &refractor_core::TargetLattice| image_to_targets(&img, l, TargetOptions::default());
        let config = MultiresConfig {
            tolerance: StageTolerance::FractionOfMinMasked(0.1),
            pivot_delta: m.delta,
            refine: RefineConfig::new(1.0),
        };
        let res = multires_schedule(&provider, &schedule, kappa, &grid, &config)?;
        let mut stages = String::from("stage,n,tolerance,start_err,err,evaluations\n");
        for (i, s) in res.stages.iter().enumerate() {
            stages.push_str(&format!(
                "{},{},{},{},{},{}\n",
                i + 1,
                s.n,
                s.tolerance,
                s.start_err,
                s.report.err,
                s.report.evaluations
            ));
        }
        write(&m.out, "stages.csv", &stages)?;
        let lattice = refractor_core::TargetLattice::new(last)?;
        let report = res.last();
        write(
            &m.out,
            "coefficients.csv",
            &coefficients_csv(&report.final_b, &res.targets.targets, Some(&lattice)),
        )?;
        write(&m.out, "residuals.csv", &report.residual_csv())?;
        let summary = format!("M: {}\n{}", m.m, report.summary());
        write(&m.out, "summary.txt", &summary)?;
        print!("{stages}{summary}");
        return Ok(report.converged);
    }
    let t = m.resolve_targets(m.n)?;
    let (start, grid) = match &m.coefficients {
        Some(path) => (
            read_coefficients(path, t.targets.len())?,
            source_lattice(m, &t)?,
        ),
        None => {
            let config = m.solver_config(&t.targets)?;
            let (r, g) = solve_refining_grid(&t.targets, m.m, m.max_m, kappa, &config)?;
            (r.final_b, g)
        }
    };
    let report = quasi_newton_solve(
        &start,
        &t.targets,
        grid.grid(),
        kappa,
        &RefineConfig::new(m.epsilon),
    )?;
    write_report(m, &t, &report, grid.m())?;
    write(&m.out, "residuals.csv", &report.residual_csv())?;
    Ok(report.converged)
}

fn read_coefficients(path: &Path, n: usize) -> Result<CoefficientVector> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let b = parse_coefficients_csv(&text)?;
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    Ok(b)
}

/// Coefficients from `--coeffs`, or a seeded random vector in `[0.9, 1.1]`.
fn coefficients_or_random(m: &RunManifest, n: usize) -> Result<CoefficientVector> {
    match &m.coefficients {
        Some(path) => read_coefficients(path, n),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(m.seed);
            CoefficientVector::new((0..n).map(|_| rng.gen_range(0.9..1.1)).collect())
        }
    }
}

fn cmd_render(m: &RunManifest) -> Result<bool> {
    let t = m.resolve_targets(m.n)?;
    let b = coefficients_or_random(m, t.targets.len())?;
    let grid = source_lattice(m, &t)?;
    let r = forward_render(&b, &t.targets, t.lattice.as_ref(), &grid, m.kappa()?)?;
    let f = t.targets.intensities();
    let err = r.errors.absolute.iter().cloned().fold(0.0, f64::max);
    let certified = err <= m.epsilon;
    let comments = vec![
        format!("n = {}", m.n),
        format!("kappa = {}", m.kappa),
        format!("M = {}", m.m),
        format!("err = {err}"),
    ];
    r.image.write_pgm(&m.out.join("render.pgm"), &comments)?;
    write(&m.out, "errors.csv", &r.errors.to_csv(f, &r.measure.values))?;
    println!(
        "err: {err}\nrelative error median: {}\nrelative error p90: {}\nrelative error max: {}\ncertified: {}",
        r.errors.median,
        r.errors.p90,
        r.errors.max,
        if certified { "yes" } else { "no" }
    );
    Ok(true)
}

fn cmd_export(m: &RunManifest, c: &Common) -> Result<bool> {
    let format: MeshFormat = c.format.parse()?;
    let t = m.resolve_targets(m.n)?;
    let b = match &m.coefficients {
        Some(path) => read_coefficients(path, t.targets.len())?,
        None => CoefficientVector::new(vec![1.0; t.targets.len()])?,
    };
    let grid = source_lattice(m, &t)?;
    let ext = match format {
        MeshFormat::Obj => "obj",
        MeshFormat::StlAscii => "stl",
    };
    let path = m.out.join(format!("lens.{ext}"));
    let mesh = export_mesh(&b, &t.targets, &grid, m.kappa()?, format, &path)?;
    println!(
        "vertices: {}\ntriangles: {}\nwritten: {}",
        mesh.vertices.len(),
        mesh.triangles.len(),
        path.display()
    );
    Ok(true)
}

fn cmd_verify(m: &RunManifest, c: &Common) -> Result<bool> {
    let suites: Vec<Suite> = if c.suite == "all" {
        Suite::ALL.to_vec()
    } else {
        vec![c.suite.parse()?]
    };
    let config = SuiteConfig {
        trials: c.trials,
        seed: m.seed,
        m: m.m,
        ..SuiteConfig::default()
    };
    let mut report = String::from("suite,trials,checks,failures\n");
    let mut ok = true;
    for s in suites {
        let o = run_suite(s, &config)?;
        report.push_str(&format!("{},{},{},{}\n", s, o.trials, o.checks, o.failures));
        if o.passed() {
            println!("{s}: pass ({} checks)", o.checks);
        } else {
            ok = false;
            println!(
                "{s}: FAIL ({} of {} checks): {}",
                o.failures,
                o.checks,
                o.first_failure.unwrap_or_default()
            );
        }
    }
    write(&m.out, "verify.csv", &report)?;
    Ok(ok)
}

fn cmd_scaling(m: &RunManifest, c: &Common) -> Result<bool> {
    if c.n_min == 0 || c.n_min > c.n_max {
        return Err(Error::InvalidConfig(format!(
            "bad n range {}..={}",
            c.n_min, c.n_max
        )));
    }
    let start = Instant::now();
    let rows = scaling_study(c.n_min..=c.n_max, m.m, m.max_m, m.kappa()?, |n| {
        let mut config = if m.skip_first {
            SolverConfig::skip_first(m.epsilon)
        } else {
            SolverConfig::full(m.epsilon, n)
        };
        if let Some(d) = m.delta {
            config.delta = d;
        }
        config
    })?;
    write(&m.out, "scaling.csv", &scaling_csv(&rows))?;
    print!("{}", scaling_csv(&rows));
    let mut within = true;
    for r in &rows {
        let fits = r.adjustments as f64 <= r.bound;
        within &= fits;
        println!(
            "n = {}: M = {}, bound {:.3e}{}",
            r.n,
            r.m,
            r.bound,
            if fits { "" } else { " EXCEEDED" }
        );
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.targets as f64, r.adjustments as f64))
        .collect();
    match loglog_slope(&pts) {
        Some(s) => println!("fitted exponent: {s:.3}"),
        None => println!("fitted exponent: undefined"),
    }
    println!("total seconds: {:.2}", start.elapsed().as_secs_f64());
    Ok(within)
}
