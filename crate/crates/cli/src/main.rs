//! Experiment runner for variable-step BDF and its composed flow.
//!
//! Exit codes: 0 on success, 2 on bad arguments, 3 on solver failure.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cbdf::adaptivity::{
    adaptive_drive, min_ratio, write_trace_csv, BoundMode, StepController, Trajectory,
};
use cbdf::bdf::ImplicitSolveConfig;
use cbdf::composition::{alpha1_candidates, g_coefficients, select_root, uniform_ratios};
use cbdf::experiments::{
    run_bench, run_convergence, slopes, write_bench_csv, write_convergence_csv, Scheme,
};
use cbdf::output::sci;
use cbdf::par::Exec;
use cbdf::problems::{builtin, OdeProblem, ProblemRecord};
use cbdf::stability::{
    region_raster, stability_angle, write_csv, write_pbm, Bounds, StabilityModel,
};
use cbdf::Error;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "cbdf", version, about = "Composed BDF experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List all α₁ candidates for base order P and mark the selected one.
    Roots {
        #[arg(long)]
        p: usize,
        /// Ratios r₂..r_P; r₁ = 0 is implied. Defaults to the uniform grid.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        ratios: Option<Vec<f64>>,
    },
    /// Global error per (order, τ) and fitted slopes.
    Converge {
        #[arg(long)]
        problem: String,
        #[arg(long, value_enum)]
        scheme: SchemeArg,
        /// Orders of accuracy.
        #[arg(long, value_delimiter = ',', required = true)]
        p: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        taus: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Error and CPU ratios of BDF against the composed flow at equal order.
    Bench {
        #[arg(long)]
        problem: String,
        #[arg(long, value_delimiter = ',', required = true)]
        p: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        taus: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stability raster or angle of the composed flow of order Q.
    Stability {
        #[arg(long)]
        order: usize,
        #[arg(long, allow_negative_numbers = true)]
        xmin: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        xmax: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        ymin: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        ymax: Option<f64>,
        #[arg(long)]
        nx: Option<usize>,
        #[arg(long)]
        ny: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the stability angle in degrees instead of a raster.
        #[arg(long, conflicts_with_all = ["xmin", "xmax", "ymin", "ymax", "nx", "ny", "out"])]
        angle: bool,
    },
    /// Smallest admissible step ratio.
    Bounds {
        #[arg(long)]
        p: usize,
        #[arg(long, value_enum)]
        mode: ModeArg,
    },
    /// Adaptive composed run with a step trace.
    Adaptive {
        #[arg(long)]
        problem: String,
        /// Base order.
        #[arg(long)]
        p: usize,
        #[arg(long)]
        tol: f64,
        #[arg(long)]
        tau0: f64,
        #[arg(long)]
        no_clamps: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemeArg {
    Bdf,
    Composed,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    First,
    Steady,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Solver(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Solver(_) => 3,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_solver_failure() {
            Failure::Solver(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    usage(format!("cannot write {}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(m) => eprintln!("error: {m}"),
                Failure::Solver(m) => eprintln!("solver failure: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Roots { p, ratios } => roots(p, ratios),
        Command::Converge {
            problem,
            scheme,
            p,
            taus,
            out,
        } => converge(&problem, scheme, &p, &taus, &out),
        Command::Bench {
            problem,
            p,
            taus,
            out,
        } => bench(&problem, &p, &taus, &out),
        Command::Stability {
            order,
            xmin,
            xmax,
            ymin,
            ymax,
            nx,
            ny,
            out,
            angle,
        } => {
            if angle {
                stability_angle_cmd(order)
            } else {
                let need =
                    |v: Option<f64>, k: &str| v.ok_or_else(|| usage(format!("--{k} is required")));
                let b = Bounds {
                    xmin: need(xmin, "xmin")?,
                    xmax: need(xmax, "xmax")?,
                    ymin: need(ymin, "ymin")?,
                    ymax: need(ymax, "ymax")?,
                };
                let nx = nx.ok_or_else(|| usage("--nx is required"))?;
                let ny = ny.ok_or_else(|| usage("--ny is required"))?;
                let out = out.ok_or_else(|| usage("--out is required"))?;
                stability_raster(order, b, nx, ny, &out)
            }
        }
        Command::Bounds { p, mode } => bounds(p, mode),
        Command::Adaptive {
            problem,
            p,
            tol,
            tau0,
            no_clamps,
            out,
        } => adaptive(&problem, p, tol, tau0, no_clamps, &out),
    }
}

/// A builtin name, or a path to a JSON problem record.
fn load_problem(name: &str) -> Result<OdeProblem, Failure> {
    match builtin(name) {
        Ok(p) => Ok(p),
        Err(Error::UnknownProblem(_)) if Path::new(name).is_file() => {
            let text = std::fs::read_to_string(name)
                .map_err(|e| usage(format!("cannot read {name}: {e}")))?;
            Ok(ProblemRecord::from_json(&text)?.into_problem()?)
        }
        Err(e) => Err(e.into()),
    }
}

fn check_positive(values: &[f64], flag: &str) -> Result<(), Failure> {
    match values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        Some(v) => Err(usage(format!(
            "--{flag} must be positive and finite, got {v}"
        ))),
        None => Ok(()),
    }
}

fn write_file<F>(path: &Path, f: F) -> Result<(), Failure>
where
    F: FnOnce(&mut BufWriter<File>) -> io::Result<()>,
{
    let file = File::create(path).map_err(|e| io_failure(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| io_failure(path, e))
}

fn roots(p: usize, ratios: Option<Vec<f64>>) -> Result<(), Failure> {
    if !(1..=8).contains(&p) {
        return Err(usage(format!("--p must be in 1..=8, got {p}")));
    }
    let r = match ratios {
        None => uniform_ratios(p),
        Some(tail) => {
            if tail.iter().any(|x| !x.is_finite()) {
                return Err(usage("--ratios must be finite"));
            }
            // r₁ = 0 may be given explicitly.
            if tail.len() == p && tail[0] == 0.0 {
                tail
            } else if tail.len() == p - 1 {
                std::iter::once(0.0).chain(tail).collect()
            } else {
                return Err(usage(format!(
                    "--ratios needs {} values, got {}",
                    p - 1,
                    tail.len()
                )));
            }
        }
    };
    let cands = alpha1_candidates(&r)?;
    let chosen = select_root(&cands, None);
    println!("re_alpha1,im_alpha1,abs_g_last,selected");
    for z in &cands {
        let resid = g_coefficients(*z, &r)
            .map(|g| sci(g[g.len() - 1].norm()))
            .unwrap_or_else(|_| "nan".to_string());
        let mark = if Some(*z) == chosen { "*" } else { "" };
        println!("{},{},{},{}", sci(z.re), sci(z.im), resid, mark);
    }
    if chosen.is_none() {
        eprintln!("no root with positive real part");
    }
    Ok(())
}

fn sweep_args(problem: &str, p: &[usize], taus: &[f64]) -> Result<OdeProblem, Failure> {
    check_positive(taus, "taus")?;
    let prob = load_problem(problem)?;
    if prob.exact.is_none() {
        return Err(usage(format!(
            "problem {} has no exact solution",
            prob.name
        )));
    }
    if p.is_empty() || taus.is_empty() {
        return Err(usage("--p and --taus must be non-empty"));
    }
    Ok(prob)
}

fn converge(
    problem: &str,
    scheme: SchemeArg,
    p: &[usize],
    taus: &[f64],
    out: &Path,
) -> Result<(), Failure> {
    let prob = sweep_args(problem, p, taus)?;
    let scheme = match scheme {
        SchemeArg::Bdf => Scheme::Bdf,
        SchemeArg::Composed => Scheme::Composed,
    };
    for &q in p {
        scheme.base_order(q)?;
    }
    let cfg = ImplicitSolveConfig::default();
    let rows = run_convergence(&prob, scheme, p, taus, &cfg, Exec::Parallel)?;
    write_file(out, |w| write_convergence_csv(&rows, w))?;
    if taus.len() >= 2 {
        for (q, s) in slopes(&rows) {
            println!("{} order {q}: slope {s:.4}", scheme.name());
        }
    }
    Ok(())
}

fn bench(problem: &str, p: &[usize], taus: &[f64], out: &Path) -> Result<(), Failure> {
    let prob = sweep_args(problem, p, taus)?;
    for &q in p {
        Scheme::Composed.base_order(q)?;
        Scheme::Bdf.base_order(q)?;
    }
    let rows = run_bench(&prob, p, taus, &ImplicitSolveConfig::default())?;
    write_file(out, |w| write_bench_csv(&rows, w))
}

fn stability_angle_cmd(order: usize) -> Result<(), Failure> {
    let model = StabilityModel::composed(order)?;
    let a = stability_angle(&model, Exec::Parallel)?;
    println!("{a:.3}");
    Ok(())
}

fn stability_raster(
    order: usize,
    b: Bounds,
    nx: usize,
    ny: usize,
    out: &Path,
) -> Result<(), Failure> {
    check_positive(&[b.xmax - b.xmin], "xmax above --xmin")?;
    check_positive(&[b.ymax - b.ymin], "ymax above --ymin")?;
    if nx < 2 || ny < 2 {
        return Err(usage("--nx and --ny must be at least 2"));
    }
    let pbm = match out.extension().and_then(|e| e.to_str()) {
        Some("csv") => false,
        Some("pbm") => true,
        _ => return Err(usage("--out must end in .csv or .pbm")),
    };
    let model = StabilityModel::composed(order)?;
    let region = region_raster(&model, b, nx, ny, Exec::Parallel)?;
    write_file(out, |w| {
        if pbm {
            write_pbm(&region, w)
        } else {
            write_csv(&region, w)
        }
    })
}

fn bounds(p: usize, mode: ModeArg) -> Result<(), Failure> {
    if !(2..=8).contains(&p) {
        return Err(usage(format!("--p must be in 2..=8, got {p}")));
    }
    let mode = match mode {
        ModeArg::First => BoundMode::FirstStep,
        ModeArg::Steady => BoundMode::Steady,
    };
    println!("{:.4}", min_ratio(p, mode));
    Ok(())
}

fn adaptive(
    problem: &str,
    p: usize,
    tol: f64,
    tau0: f64,
    no_clamps: bool,
    out: &Path,
) -> Result<(), Failure> {
    if !(1..=8).contains(&p) {
        return Err(usage(format!("--p must be in 1..=8, got {p}")));
    }
    check_positive(&[tol], "tol")?;
    check_positive(&[tau0], "tau0")?;
    let prob = load_problem(problem)?;
    let span = prob.t_end - prob.t0;
    if tau0 > span {
        return Err(usage(format!("--tau0 exceeds the interval length {span}")));
    }
    let mut ctl = StepController::new(p, tol, span);
    if no_clamps {
        ctl = ctl.without_clamps();
    }
    let cfg = ImplicitSolveConfig::default();
    match adaptive_drive(&prob, p, tau0, &ctl, prob.t_end, &cfg) {
        Ok(traj) => {
            write_file(out, |w| write_trace_csv(&traj, w))?;
            summary(&traj);
            Ok(())
        }
        Err(f) => {
            write_file(out, |w| write_trace_csv(&f.partial, w))?;
            summary(&f.partial);
            Err(Failure::from(f.source.clone()).with_context(&f.to_string()))
        }
    }
}

impl Failure {
    fn with_context(self, msg: &str) -> Failure {
        match self {
            Failure::Usage(_) => Failure::Usage(msg.to_string()),
            Failure::Solver(_) => Failure::Solver(msg.to_string()),
        }
    }
}

fn summary(traj: &Trajectory) {
    let last = traj.steps.last().map_or(f64::NAN, |s| s.t);
    let min_re = traj
        .steps
        .iter()
        .map(|s| s.alpha1.re)
        .fold(f64::INFINITY, f64::min);
    println!(
        "steps {}, last t {last:.6}, min Re alpha1 {min_re:.6}",
        traj.steps.len()
    );
}
