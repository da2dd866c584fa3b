use clap::{Args, Parser, Subcommand};
use hscone::catalog::catalog_listing;
use hscone::config::Analysis;
use hscone::pipeline::{run_from_path, EXIT_CONFIG, EXIT_OK};
use hscone::report::{Gated, Report};
use hscone::Flag;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hscone", version, about = "Hamiltonian-stationary cones over isotropic links in odd spheres")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the analyses listed in the config and write the report.
    Analyze(RunArgs),
    /// Locate Legendrian points and their indices.
    ScanLegendrian(RunArgs),
    /// Least-squares search over homogeneous tori.
    Search(RunArgs),
    /// Poincaré–Hopf count of Legendrian points against the genus.
    AuditIndex(RunArgs),
    /// List the built-in immersions and their parameters.
    Catalog,
}

#[derive(Args)]
struct RunArgs {
    /// Config file (TOML).
    #[arg(value_name = "CONFIG", required_unless_present = "config_flag")]
    config: Option<PathBuf>,
    /// Config file, as an alternative to the positional argument.
    #[arg(long = "config", value_name = "PATH", conflicts_with = "config")]
    config_flag: Option<PathBuf>,
    /// Output directory [default: config `output.dir`, then $HSCONE_OUT, then ./hscone-out].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for random draws (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Tolerance override `name=value`; repeatable.
    #[arg(long = "tol", value_name = "NAME=VALUE")]
    tol: Vec<String>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

impl RunArgs {
    fn path(&self) -> &Path {
        self.config.as_deref().or(self.config_flag.as_deref()).expect("clap enforces a config")
    }
}

fn run(args: &RunArgs, only: Option<&[Analysis]>) -> (Option<Report>, i32) {
    if let Some(k) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: cannot configure {k} threads: {e}");
            return (None, EXIT_CONFIG);
        }
    }
    let (report, dir, code, err) = run_from_path(args.path(), &args.tol, args.seed, args.out.as_deref(), only);
    if let Some(e) = err {
        eprintln!("error: {e}");
    }
    if report.as_ref().is_some_and(|r| !r.files.is_empty()) {
        eprintln!("wrote {}", dir.display());
    }
    (report, code)
}

fn print_audits(r: &Report) {
    for a in &r.audits {
        println!("{:<34} {}  {}", a.name, if a.pass { "PASS" } else { "FAIL" }, a.detail);
    }
}

fn analyze(args: &RunArgs) -> i32 {
    let (report, code) = run(args, None);
    if let Some(r) = &report {
        println!("{} ({} grid {:?})", r.immersion.name, r.immersion.domain, r.grid);
        for (name, flag) in &r.flags {
            println!(
                "{name:<34} {:<13} (residual {:e}, tol {:e})",
                match flag.value {
                    Flag::True => "true",
                    Flag::False => "false",
                    Flag::Indeterminate => "indeterminate",
                },
                flag.residual,
                flag.tol
            );
        }
        for s in &r.skipped {
            println!("skipped: {s}");
        }
        print_audits(r);
    }
    code
}

fn scan_legendrian(args: &RunArgs) -> i32 {
    let (report, code) = run(args, Some(&[Analysis::Hopf]));
    if let Some(hopf) = report.as_ref().and_then(|r| r.hopf.as_ref()) {
        match &hopf.legendrian_points {
            Gated::Gated(reason) => println!("{reason}"),
            Gated::Value(scan) => match scan {
                hscone::hopf::LegendrianScan::EverywhereLegendrian => println!("everywhere Legendrian"),
                hscone::hopf::LegendrianScan::Points(points) => {
                    println!("{} Legendrian point(s)", points.len());
                    println!("{:>22} {:>22} {:>4} {:>6} {:>12} refined", "t1", "t2", "k", "index", "residual");
                    for p in points {
                        println!(
                            "{:>22.15e} {:>22.15e} {:>4} {:>6} {:>12.3e} {}",
                            p.t[0], p.t[1], p.multiplicity, p.index_prju, p.residual_at_zero, p.refined
                        );
                    }
                }
            },
        }
    }
    code
}

fn search(args: &RunArgs) -> i32 {
    let (report, code) = run(args, Some(&[Analysis::Search]));
    if let Some(s) = report.as_ref().and_then(|r| r.search.as_ref()) {
        let best = &s.results[s.best_trial];
        println!("{} of {} trials converged", s.converged, s.trials);
        println!("best trial {}: residual {:e}, q = {:?}", s.best_trial, s.best_residual, best.q);
        let snap = &s.best_snapped;
        match (&snap.classification, &snap.error) {
            (Some(c), _) => println!(
                "snapped a = {:?}, b = {:?}: legendrian {}, minimal {}",
                snap.params.a, snap.params.b, c.legendrian, c.minimal
            ),
            (None, Some(e)) => println!("snapped a = {:?}, b = {:?}: {e}", snap.params.a, snap.params.b),
            (None, None) => {}
        }
    }
    code
}

fn audit_index(args: &RunArgs) -> i32 {
    let (report, code) = run(args, Some(&[Analysis::Hopf]));
    let Some(hopf) = report.as_ref().and_then(|r| r.hopf.as_ref()) else {
        return code;
    };
    match &hopf.audit {
        Gated::Value(a) => {
            println!("{}", a.summary());
            if a.pass {
                EXIT_OK
            } else {
                hscone::pipeline::EXIT_AUDIT_FAILED
            }
        }
        Gated::Gated(reason) => {
            println!("audit {reason}");
            hscone::pipeline::EXIT_AUDIT_FAILED
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Analyze(a) => analyze(a),
        Command::ScanLegendrian(a) => scan_legendrian(a),
        Command::Search(a) => search(a),
        Command::AuditIndex(a) => audit_index(a),
        Command::Catalog => {
            for (name, schema) in catalog_listing() {
                println!("{name:<18} {schema}");
            }
            EXIT_OK
        }
    };
    ExitCode::from(code as u8)
}
