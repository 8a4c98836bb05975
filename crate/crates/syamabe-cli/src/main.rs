use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use syamabe::expansion_engine::Problem;
use syamabe::report::ToleranceTier;
use syamabe_cli::{job_dir, run_job, run_suite, suite_files, CliError, JobConfig, JobOutcome, Stage, DEFAULT_OUT_ROOT};

/// Run syamabe pipelines on geometry files and write JSON reports and CSV tables.
///
/// Exit status: 0 when every criterion passes, 1 when one fails, 2 on
/// configuration, parse or stage-dependency errors.
#[derive(Debug, Parser)]
#[command(name = "syamabe", version)]
struct Cli {
    /// Geometry TOML file.
    #[arg(long, required_unless_present = "suite", conflicts_with = "suite")]
    geometry: Option<PathBuf>,

    /// 1 for the singular Yamabe problem, 2 for singular σ₂-Yamabe.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    k: u8,

    /// Comma-separated stages, run in pipeline order.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "jets,expand")]
    stages: Vec<Stage>,

    /// Tolerance tier: oracle (1e-6) or numeric (1e-4). Defaults by geometry.
    #[arg(long)]
    tol: Option<ToleranceTier>,

    /// Output directory for a single job, or the root for a suite.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Run every *.toml in this directory as its own job, concurrently.
    #[arg(long)]
    suite: Option<PathBuf>,

    /// Root for default output directories.
    #[arg(long, env = syamabe_cli::OUT_ROOT_ENV, default_value = DEFAULT_OUT_ROOT)]
    out_root: PathBuf,
}

fn print_outcome(o: &JobOutcome) {
    match &o.first_failure {
        None => println!("PASS {} -> {}", o.geometry.display(), o.out.display()),
        Some(f) => {
            let detail = match &f.error {
                Some(e) => e.clone(),
                None => format!("value {:e}, tolerance {:e}", f.value, f.tolerance),
            };
            println!(
                "FAIL {}: first failing criterion `{}/{}` ({detail}) -> {}",
                o.geometry.display(),
                f.stage.name(),
                f.criterion,
                o.out.display()
            )
        }
    }
}

fn config_error(e: &CliError) -> u8 {
    eprintln!("error: {e}");
    2
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let k = Problem::from_k(cli.k).expect("clap bounds k");
    let config = |geometry: PathBuf, out: PathBuf| JobConfig {
        geometry,
        k,
        stages: cli.stages.clone(),
        tol: cli.tol,
        out,
    };
    let code = if let Some(dir) = &cli.suite {
        let root = cli.out.clone().unwrap_or_else(|| cli.out_root.clone());
        match suite_files(dir) {
            Err(e) => config_error(&e),
            Ok(files) => {
                let jobs: Vec<JobConfig> = files.into_iter().map(|g| config(g.clone(), job_dir(&root, &g, k))).collect();
                let mut code = 0;
                for (job, res) in jobs.iter().zip(run_suite(&jobs)) {
                    code = code.max(match res {
                        Ok(o) => {
                            print_outcome(&o);
                            o.exit_code() as u8
                        }
                        Err(e) => {
                            eprintln!("{}:", job.geometry.display());
                            config_error(&e)
                        }
                    });
                }
                code
            }
        }
    } else {
        let geometry = cli.geometry.clone().expect("clap requires --geometry");
        let out = cli.out.clone().unwrap_or_else(|| job_dir(&cli.out_root, &geometry, k));
        match run_job(&config(geometry, out)) {
            Ok(o) => {
                print_outcome(&o);
                o.exit_code() as u8
            }
            Err(e) => config_error(&e),
        }
    };
    ExitCode::from(code)
}
