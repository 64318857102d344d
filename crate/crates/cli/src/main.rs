use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde_json::{json, Value};

use qdkit::heine::{
    asymptotic_compare, enumerate_solutions, hull_diameter, localization_check, solve_chain, solve_stieltjes,
    HSProblem,
};
use qdkit::pipeline::{run_pipeline, to_json_pinned, AnalysisReport, Artifacts, Input, PipelineConfig};
use qdkit::qd::{DifferentialDoc, PolySpec};
use qdkit::tracer::TraceBudget;
use qdkit::Poly;
use qdkit_cli::{apply_config_doc, emit_svg, seed_from_env};

#[derive(Parser)]
#[command(name = "qdkit", version, about = "Critical graphs, Reeb graphs and Levy measures of quadratic differentials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: inventory, trajectories, graphs, verdicts and measures.
    Analyze {
        #[command(flatten)]
        run: RunArgs,
        /// Also draw the critical graph.
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Trajectory samples as CSV.
        #[arg(long)]
        segments_csv: Option<PathBuf>,
        /// Measure atoms as CSV.
        #[arg(long)]
        atoms_csv: Option<PathBuf>,
    },
    /// Critical inventory, traced trajectories and the critical graph.
    Trace {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Verdict chain without measures.
    Classify {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Levy measure block.
    Measure {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Cauchy and logarithmic transforms, branch equation and Green masses.
    VerifyCauchy {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Heine-Stieltjes solutions of P S'' + Q S' + V S = 0.
    HsSolve {
        #[command(flatten)]
        hs: HsArgs,
        #[arg(long)]
        n: usize,
        /// Count distinct solutions against the Heine count.
        #[arg(long)]
        enumerate: bool,
        /// Root clouds as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Localization slack, relative to the diameter of the roots of P.
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
    },
    /// Root-counting measures of a chain of solutions against the limiting
    /// differential.
    HsCompare {
        #[command(flatten)]
        hs: HsArgs,
        #[arg(long)]
        n0: usize,
        #[arg(long)]
        n1: usize,
        /// Comparison point `re,im`.
        #[arg(long, default_value = "2,0")]
        z0: String,
        /// Largest relative change of the normalized V between the last two
        /// degrees.
        #[arg(long, default_value_t = 1e-3)]
        stable_tol: f64,
        #[command(flatten)]
        run: ConfigArgs,
    },
    /// Draws the critical graph with measure signs.
    EmitSvg {
        #[command(flatten)]
        run: RunArgs,
        /// Draw every traced trajectory underneath.
        #[arg(long)]
        trajectories: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Differential or combinatorial instance (JSON).
    input: PathBuf,
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Args)]
struct ConfigArgs {
    /// Configuration document; its fields override the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (standard output when absent).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Atoms per Levy measure.
    #[arg(long, default_value_t = qdkit::measures::DEFAULT_ATOMS)]
    atoms: usize,
    /// Cycle-sum tolerance for gradient orientations.
    #[arg(long, default_value_t = qdkit::pipeline::ANALYTIC_COCYCLE_TOL)]
    cocycle_tol: f64,
    /// Branch-equation residual tolerance.
    #[arg(long, default_value_t = qdkit::measures::BRANCH_TOL)]
    branch_tol: f64,
    /// Integrator tolerance.
    #[arg(long, default_value_t = 1e-10)]
    rtol: f64,
    /// Trajectory length budget.
    #[arg(long, default_value_t = 1e6)]
    max_psi_length: f64,
    /// Step budget per trajectory.
    #[arg(long, default_value_t = 200_000)]
    max_steps: usize,
    /// Capture radius around finite critical points (0: automatic).
    #[arg(long, default_value_t = 0.0)]
    hit_radius: f64,
    /// Depth of the Green contours inside each domain.
    #[arg(long, default_value_t = 0.3)]
    green_depth: f64,
    #[arg(long)]
    no_green: bool,
    /// Skip enumerating the real measures.
    #[arg(long)]
    no_enumerate: bool,
    /// Reeb orientation mask for the measure (bit i reverses edge i).
    #[arg(long)]
    orientation: Option<u64>,
    /// Probe points `re,im;re,im;...`.
    #[arg(long)]
    points: Option<String>,
}

#[derive(Args)]
struct HsArgs {
    /// P as an expression or a JSON coefficient list.
    #[arg(long = "P")]
    p: String,
    /// Q as an expression or a JSON coefficient list.
    #[arg(long = "Q")]
    q: String,
    /// Random starts per degree (default 200 (n + 1)).
    #[arg(long)]
    starts: Option<usize>,
}

impl ConfigArgs {
    fn build(&self) -> Result<PipelineConfig> {
        let defaults = PipelineConfig::default();
        let mut cfg = PipelineConfig {
            budget: TraceBudget {
                rtol: self.rtol,
                max_psi_length: self.max_psi_length,
                max_steps: self.max_steps,
                hit_radius: self.hit_radius,
                ..defaults.budget
            },
            atoms: self.atoms,
            cocycle_tol: self.cocycle_tol,
            branch_tol: self.branch_tol,
            green_depth: self.green_depth,
            green_check: !self.no_green,
            enumerate_measures: !self.no_enumerate,
            orientation_mask: self.orientation,
            ..defaults
        };
        if let Some(p) = &self.points {
            cfg.probe_points = p
                .split(';')
                .filter(|s| !s.trim().is_empty())
                .map(|s| parse_point(s).map(|z| [z.re, z.im]))
                .collect::<Result<_>>()?;
        }
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            apply_config_doc(&mut cfg, &text)?;
        }
        Ok(cfg)
    }
}

fn parse_point(s: &str) -> Result<Complex64> {
    let (re, im) = s.split_once(',').unwrap_or((s, "0"));
    Ok(Complex64::new(
        re.trim().parse().with_context(|| format!("bad point {s:?}"))?,
        im.trim().parse().with_context(|| format!("bad point {s:?}"))?,
    ))
}

fn parse_poly(s: &str) -> Result<Poly> {
    let spec = if s.trim_start().starts_with('[') {
        serde_json::from_str(s).context("bad coefficient list")?
    } else {
        PolySpec::Expr(s.to_string())
    };
    Ok(spec.to_poly()?)
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.write_all(b"\n")?;
            Ok(())
        }
    }
}

fn write_file(path: &Path, f: impl FnOnce(&mut fs::File) -> std::io::Result<()>) -> Result<()> {
    let mut file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f(&mut file).with_context(|| format!("writing {}", path.display()))
}

fn run(args: &RunArgs, measures: bool) -> Result<(AnalysisReport, Artifacts, PipelineConfig)> {
    let text = fs::read_to_string(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let input = Input::from_json(&text)?;
    let mut cfg = args.cfg.build()?;
    cfg.measures &= measures;
    let (report, art) = run_pipeline(&input, &cfg);
    Ok((report, art, cfg))
}

/// Writes `body` and returns the exit code of the report.
fn finish(report: &AnalysisReport, body: &Value, output: Option<&Path>) -> Result<u8> {
    write_out(output, &to_json_pinned(body)?)?;
    if let Some(e) = &report.error {
        eprintln!("error [{}]: {}", e.stage, e.message);
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(report.exit_code() as u8)
}

fn pick(report: &AnalysisReport, keys: &[&str]) -> Result<Value> {
    let full = serde_json::to_value(report)?;
    let mut out = serde_json::Map::new();
    for &k in keys.iter().chain(&["tolerances", "warnings", "notes", "error"]) {
        if let Some(v) = full.get(k) {
            out.insert(k.to_string(), v.clone());
        }
    }
    Ok(Value::Object(out))
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let stage = e.downcast_ref::<qdkit::Error>().map(|e| e.stage()).unwrap_or("cli");
            eprintln!("error [{stage}]: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Analyze {
            run: args,
            svg,
            segments_csv,
            atoms_csv,
        } => {
            let (report, art, _) = run(&args, true)?;
            if let Some(p) = svg {
                fs::write(&p, emit_svg(&report, &[])).with_context(|| format!("writing {}", p.display()))?;
            }
            if let Some(p) = segments_csv {
                write_file(&p, |f| qdkit::tracer::write_csv(f, &art.segments))?;
            }
            if let (Some(p), Some(m)) = (atoms_csv, &art.measure) {
                write_file(&p, |f| m.write_csv(f))?;
            }
            finish(&report, &serde_json::to_value(&report)?, args.cfg.output.as_deref())
        }
        Command::Trace { run: args, csv } => {
            let (report, art, _) = run(&args, false)?;
            if let Some(p) = csv {
                write_file(&p, |f| qdkit::tracer::write_csv(f, &art.segments))?;
            }
            let body = pick(&report, &["input", "inventory", "trace", "critical_graph"])?;
            finish(&report, &body, args.cfg.output.as_deref())
        }
        Command::Classify { run: args } => {
            let (report, _, _) = run(&args, false)?;
            let body = pick(&report, &["verdict", "simple_cycle", "reeb"])?;
            finish(&report, &body, args.cfg.output.as_deref())
        }
        Command::Measure { run: args, csv } => {
            let (report, art, _) = run(&args, true)?;
            if let (Some(p), Some(m)) = (csv, &art.measure) {
                write_file(&p, |f| m.write_csv(f))?;
            }
            let body = pick(&report, &["verdict", "measures"])?;
            finish(&report, &body, args.cfg.output.as_deref())
        }
        Command::VerifyCauchy { run: args } => {
            let (report, _, _) = run(&args, true)?;
            let mut body = pick(&report, &[])?;
            if let Some(m) = &report.measures {
                body["transforms"] = serde_json::to_value(&m.transforms)?;
                body["branch"] = serde_json::to_value(m.branch.as_ref())?;
                body["reconstruct"] = serde_json::to_value(m.reconstruct)?;
                body["green"] = serde_json::to_value(&m.green)?;
            }
            finish(&report, &body, args.cfg.output.as_deref())
        }
        Command::HsSolve {
            hs,
            n,
            enumerate,
            csv,
            eps,
        } => hs_solve(&hs, n, enumerate, csv.as_deref(), eps),
        Command::HsCompare {
            hs,
            n0,
            n1,
            z0,
            stable_tol,
            run: cfg,
        } => hs_compare(&hs, n0, n1, parse_point(&z0)?, stable_tol, &cfg),
        Command::EmitSvg {
            run: args,
            trajectories,
        } => {
            let (report, art, _) = run(&args, true)?;
            let extra: Vec<Vec<Complex64>> = if trajectories {
                art.segments.iter().map(|s| s.samples.iter().map(|p| p.z).collect()).collect()
            } else {
                Vec::new()
            };
            let svg = emit_svg(&report, &extra);
            match &args.cfg.output {
                Some(p) => fs::write(p, svg).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{svg}"),
            }
            Ok(report.exit_code() as u8)
        }
    }
}

fn hs_problem(hs: &HsArgs, n: usize) -> Result<HSProblem> {
    Ok(HSProblem::new(parse_poly(&hs.p)?, parse_poly(&hs.q)?, n)?)
}

fn hs_solve(hs: &HsArgs, n: usize, enumerate: bool, csv: Option<&Path>, eps: f64) -> Result<u8> {
    let prob = hs_problem(hs, n)?;
    let seed = seed_from_env()?;
    let starts = hs.starts.unwrap_or(200 * (n + 1));
    let diameter = hull_diameter(prob.p_roots());
    let (solutions, mut body) = if enumerate {
        let e = enumerate_solutions(&prob, starts, seed)?;
        (e.solutions.clone(), serde_json::to_value(&e)?)
    } else {
        let sols = solve_stieltjes(&prob, starts, seed)?;
        (sols.clone(), json!({ "n": n, "starts": starts, "solutions": sols }))
    };
    let localized = solutions
        .iter()
        .map(|s| localization_check(s, &prob, eps * diameter))
        .collect::<qdkit::Result<Vec<bool>>>()?;
    body["seed"] = json!(seed);
    body["localization"] = json!({ "eps": eps * diameter, "pass": localized });
    if let Some(p) = csv {
        write_file(p, |f| {
            writeln!(f, "solution,re,im")?;
            for (k, s) in solutions.iter().enumerate() {
                for r in &s.s_roots {
                    writeln!(f, "{k},{:.17e},{:.17e}", r.re, r.im)?;
                }
            }
            Ok(())
        })?;
    }
    write_out(None, &to_json_pinned(&body)?)?;
    if enumerate && body["complete"] == json!(false) {
        eprintln!("warning: fewer solutions than the Heine count");
        return Ok(2);
    }
    Ok(0)
}

fn hs_compare(hs: &HsArgs, n0: usize, n1: usize, z0: Complex64, stable_tol: f64, args: &ConfigArgs) -> Result<u8> {
    if n0 == 0 || n1 <= n0 {
        bail!("need 1 <= n0 < n1");
    }
    let prob = hs_problem(hs, n0)?;
    let seed = seed_from_env()?;
    let starts = hs.starts.unwrap_or(200 * (n1 + 1));
    let chain = solve_chain(&prob, n0, n1, starts, seed)?;
    let v = chain.last().unwrap().v_normalized(&prob);
    let doc = DifferentialDoc {
        numerator: PolySpec::from_poly(&v),
        denominator: PolySpec::from_poly(&prob.p),
        sign: -1,
    };
    let mut cfg = args.build()?;
    cfg.measures = false;
    let (mut report, _) = run_pipeline(&Input::Differential(doc), &cfg);
    let support = report.critical_graph.clone().filter(|cg| !cg.edges.is_empty()).map(|cg| {
        move |z: Complex64| {
            cg.edges
                .iter()
                .flat_map(|e| {
                    let pts: Vec<Complex64> = e.points().collect();
                    pts.windows(2).map(move |w| segment_distance(z, w[0], w[1])).collect::<Vec<_>>()
                })
                .fold(f64::INFINITY, f64::min)
        }
    });
    let cmp = asymptotic_compare(
        &prob,
        &chain,
        z0,
        stable_tol,
        support.as_ref().map(|f| f as &dyn Fn(Complex64) -> f64),
    )?;
    report.heine_stieltjes = Some(json!({ "seed": seed, "starts": starts, "comparison": cmp, "chain": chain }));
    finish(&report, &serde_json::to_value(&report)?, args.output.as_deref())
}

fn segment_distance(z: Complex64, a: Complex64, b: Complex64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    let t = if len2 > 0.0 {
        (((z - a) * d.conj()).re / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (z - (a + d * t)).norm()
}
