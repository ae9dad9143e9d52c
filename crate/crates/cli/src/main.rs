use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use bethe_core::bounds::parse_bounds_file;
use bethe_core::discrete::BRUTE_FORCE_CAP;
use bethe_core::exact::DEFAULT_WIDTH_CAP;
use bethe_core::generate::{generate, GeneratorConfig, GraphKind, SignPattern, ValueSpec};
use bethe_core::model::parse_model;
use bethe_core::pipeline::{
    mesh_stats, render_csv, render_text, run_pipeline, BoundsSource, MeshChoice, PipelineConfig, SolverPolicy,
};
use bethe_core::InputModel;
use clap::{Parser, Subcommand};

/// Additive-ε estimates of the log Bethe partition function of binary
/// pairwise MRFs.
#[derive(Parser)]
#[command(name = "bethe", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate log Z_B for a model file. Exit code 2 means the result is
    /// not certified.
    Solve(SolveArgs),
    /// Write a seeded synthetic model file.
    Generate(GenerateArgs),
    /// Print the mesh size of every method without solving.
    MeshStats(MeshStatsArgs),
}

#[derive(clap::Args)]
struct SolveArgs {
    /// Model file, or `-` for stdin.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    epsilon: f64,
    /// `sigmoid`, `bbp`, or a bounds file with lines `i A_i B_i`.
    #[arg(long, default_value = "bbp")]
    bounds: String,
    /// `auto` or one of simple, minsum, adaptive-simple, adaptive-minsum,
    /// second-derivative.
    #[arg(long, default_value = "auto")]
    mesh: String,
    /// auto, graphcut, bruteforce or localsearch.
    #[arg(long, default_value = "auto")]
    solver: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Compare against exact inference (enumeration or elimination).
    #[arg(long)]
    exact_compare: bool,
    /// Also write the per-variable CSV report to this path.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Omit timings so that repeated runs give identical text.
    #[arg(long)]
    no_timing: bool,
    /// Write the text report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write each component's discrete problem to this path.
    #[arg(long)]
    dump_problem: Option<PathBuf>,
    #[arg(long, default_value_t = BRUTE_FORCE_CAP)]
    brute_force_cap: f64,
    #[arg(long, default_value_t = DEFAULT_WIDTH_CAP)]
    width_cap: usize,
    /// Local-search restarts.
    #[arg(long, default_value_t = 10)]
    restarts: usize,
}

#[derive(clap::Args)]
struct GenerateArgs {
    /// pref-attach, tree, grid or random.
    #[arg(long, default_value = "pref-attach")]
    kind: String,
    #[arg(long)]
    n: usize,
    /// Mean degree (pref-attach and random).
    #[arg(long, default_value_t = 2.0)]
    degree: f64,
    /// Singleton potential: a value `x` or a range `lo:hi`.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    theta: String,
    /// Edge magnitude: a value `x` or a range `lo:hi`.
    #[arg(long, default_value = "1")]
    w: String,
    /// Give each edge a random sign.
    #[arg(long)]
    mixed: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct MeshStatsArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value = "bbp")]
    bounds: String,
}

fn read_input(path: &Path) -> Result<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).context("reading stdin")?;
        Ok(s)
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
    }
}

fn load_model(path: &Path) -> Result<InputModel> {
    let text = read_input(path)?;
    parse_model(&text).with_context(|| format!("parsing {}", path.display()))
}

fn bounds_source(arg: &str, n: usize) -> Result<BoundsSource> {
    match arg {
        "sigmoid" => Ok(BoundsSource::Sigmoid),
        "bbp" => Ok(BoundsSource::Bbp),
        path => {
            let text = fs::read_to_string(path).with_context(|| format!("reading bounds file {path}"))?;
            let (a, b) = parse_bounds_file(&text, n).with_context(|| format!("parsing bounds file {path}"))?;
            Ok(BoundsSource::External { a, b })
        }
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => io::stdout().write_all(text.as_bytes()).context("writing stdout"),
    }
}

fn solve(args: SolveArgs) -> Result<ExitCode> {
    let model = load_model(&args.model)?;
    let cfg = PipelineConfig {
        epsilon: args.epsilon,
        bounds: bounds_source(&args.bounds, model.n)?,
        mesh: args.mesh.parse::<MeshChoice>()?,
        solver: args.solver.parse::<SolverPolicy>()?,
        seed: args.seed,
        brute_force_cap: args.brute_force_cap,
        width_cap: args.width_cap,
        restarts: args.restarts,
        exact_compare: args.exact_compare,
        dump_problems: args.dump_problem.is_some(),
    };
    let report = run_pipeline(&cfg, &model)?;
    write_output(args.out.as_deref(), &render_text(&report, !args.no_timing))?;
    if let Some(p) = &args.csv {
        write_output(Some(p), &render_csv(&report))?;
    }
    if let Some(p) = &args.dump_problem {
        let mut text = String::new();
        for (vars, dump) in &report.problem_dumps {
            let names: Vec<String> = vars.iter().map(|v| v.to_string()).collect();
            text.push_str(&format!("# component {}\n", names.join(" ")));
            text.push_str(dump);
        }
        write_output(Some(p), &text)?;
    }
    Ok(if report.certified { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn generate_cmd(args: GenerateArgs) -> Result<ExitCode> {
    let cfg = GeneratorConfig {
        kind: args.kind.parse::<GraphKind>()?,
        n: args.n,
        mean_degree: args.degree,
        theta: args.theta.parse::<ValueSpec>()?,
        w: args.w.parse::<ValueSpec>()?,
        signs: if args.mixed { SignPattern::Mixed } else { SignPattern::Attractive },
        seed: args.seed,
    };
    let model = generate(&cfg)?;
    write_output(args.out.as_deref(), &model.to_file_string())?;
    Ok(ExitCode::SUCCESS)
}

fn mesh_stats_cmd(args: MeshStatsArgs) -> Result<ExitCode> {
    let model = load_model(&args.model)?;
    let bounds = bounds_source(&args.bounds, model.n)?;
    let stats = mesh_stats(&model, args.epsilon, &bounds)?;
    let mut out = format!("{:<18} {:>20} {:>14}\n", "method", "N", "log_pi");
    for s in stats {
        match (s.points, s.log_product) {
            (Some(p), Some(l)) => out.push_str(&format!("{:<18} {:>20} {:>14.6}\n", s.method.name(), p, l)),
            _ => out.push_str(&format!(
                "{:<18} unavailable: {}\n",
                s.method.name(),
                s.error.unwrap_or_default()
            )),
        }
    }
    write_output(None, &out)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    // clap uses exit code 2 for usage errors, which here means "uncertified"
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Generate(a) => generate_cmd(a),
        Command::MeshStats(a) => mesh_stats_cmd(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
