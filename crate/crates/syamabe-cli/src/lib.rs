//! Job runner behind the `syamabe` binary.
//!
//! A job is one geometry file, one problem (`k = 1` or `k = 2`) and an
//! ordered list of stages. Each stage writes `<out>/<stage>.json` and, where
//! it has tabular output, one or more CSV files next to it:
//!
//! | stage        | CSV files                                   |
//! |--------------|---------------------------------------------|
//! | `jets`       | `jets.csv`                                  |
//! | `expand`     | `expansion.csv`                             |
//! | `solve`      | `solution.csv`                              |
//! | `renorm`     | `volume_ladder.csv`, `volume_fit.csv`, `einstein_fit.csv` (`k = 1`) |
//! | `cgb`        | none                                        |
//! | `anomaly`    | none                                        |
//! | `invariance` | `invariance.csv`                            |
//!
//! Column lists are in the `*_HEADER` constants of the library types and in
//! [`JETS_HEADER`] and [`INVARIANCE_HEADER`].

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;
use thiserror::Error;

use syamabe::collar_geometry::{boundary_jet, build_geometry, BoundaryJet, CollarMetric, GeometryError, GeometrySpec};
use syamabe::expansion_engine::{cancellation_from_jet, energy_from_profile, ExpansionProfile, Problem};
use syamabe::radial_solver::{diagnostics, solve_radial, RadialSolution};
use syamabe::renormalizer::{default_epsilons, fp_einstein, volume_ladder};
use syamabe::report::{report_schema_version, Criterion, Report, ToleranceTier};
use syamabe::verifier::{
    anomaly_verify, cgb_budget, constant_shift, default_omegas, invariance_suite, SHIFT_TOL,
};

/// Environment variable naming the default output root.
pub const OUT_ROOT_ENV: &str = "SYAMABE_OUT";
pub const DEFAULT_OUT_ROOT: &str = "syamabe-out";

pub const JETS_HEADER: [&str; 10] = [
    "point", "weight", "H", "norm_L2", "norm_Lring2", "tr_L3", "tr_Lring3", "Rbar", "scal_h", "bianchi",
];
pub const INVARIANCE_HEADER: [&str; 3] = ["rescaling", "omega_sup", "value"];

/// Pipeline stages in execution order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Jets,
    Expand,
    Solve,
    Renorm,
    Cgb,
    Anomaly,
    Invariance,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Jets => "jets",
            Stage::Expand => "expand",
            Stage::Solve => "solve",
            Stage::Renorm => "renorm",
            Stage::Cgb => "cgb",
            Stage::Anomaly => "anomaly",
            Stage::Invariance => "invariance",
        }
    }

    /// Stages that must be listed alongside this one.
    pub fn requires(self) -> &'static [Stage] {
        match self {
            Stage::Jets | Stage::Solve => &[],
            Stage::Expand => &[Stage::Jets],
            Stage::Renorm => &[Stage::Solve],
            Stage::Cgb | Stage::Anomaly | Stage::Invariance => &[Stage::Solve, Stage::Renorm],
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("stage `{stage}` requires `{needs}` in the stage list")]
    MissingDependency { stage: &'static str, needs: &'static str },
    #[error("empty stage list")]
    NoStages,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Geometry {
        path: PathBuf,
        #[source]
        source: GeometryError,
    },
    #[error("stage `{0}` needs a radial geometry with a global solution")]
    NotRadial(&'static str),
    #[error("stage `cgb` needs euler_characteristic in the geometry file")]
    MissingChi,
    #[error("no *.toml geometry files in {0}")]
    EmptySuite(PathBuf),
    #[error("writing {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl CliError {
    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Sorted, deduplicated stage list with every dependency present.
pub fn validate_stages(stages: &[Stage]) -> Result<Vec<Stage>, CliError> {
    let mut out = stages.to_vec();
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err(CliError::NoStages);
    }
    for &s in &out {
        if let Some(&needs) = s.requires().iter().find(|d| !out.contains(d)) {
            return Err(CliError::MissingDependency {
                stage: s.name(),
                needs: needs.name(),
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct JobConfig {
    pub geometry: PathBuf,
    pub k: Problem,
    pub stages: Vec<Stage>,
    /// `None` picks the tier from the geometry.
    pub tol: Option<ToleranceTier>,
    pub out: PathBuf,
}

/// Default output directory `<root>/<geometry stem>-k<k>`.
pub fn job_dir(root: &Path, geometry: &Path, k: Problem) -> PathBuf {
    let stem = geometry.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "job".into());
    root.join(format!("{stem}-k{}", k.k()))
}

#[derive(Clone, Debug, Serialize)]
pub struct StageSummary {
    pub stage: Stage,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct FailedCriterion {
    pub stage: Stage,
    pub criterion: String,
    pub value: f64,
    pub tolerance: f64,
    /// Error text when the stage could not be computed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// What a job wrote and whether it passed. Saved as `<out>/summary.json`.
#[derive(Clone, Debug, Serialize)]
pub struct JobOutcome {
    pub schema_version: String,
    pub geometry: PathBuf,
    pub geometry_hash: String,
    pub tolerance_tier: ToleranceTier,
    pub k: u8,
    pub out: PathBuf,
    pub stages: Vec<StageSummary>,
    pub first_failure: Option<FailedCriterion>,
    pub passed: bool,
}

impl JobOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

struct Job<'a> {
    spec: GeometrySpec,
    metric: CollarMetric,
    k: Problem,
    tier: ToleranceTier,
    out: &'a Path,
    jet: Option<BoundaryJet>,
    sol: Option<RadialSolution>,
}

type StageResult = Result<Report, String>;

/// Parses and checks everything that can be checked before any numerics.
fn prepare(cfg: &JobConfig) -> Result<(GeometrySpec, CollarMetric, Vec<Stage>), CliError> {
    let stages = validate_stages(&cfg.stages)?;
    let text = fs::read_to_string(&cfg.geometry).map_err(CliError::io(&cfg.geometry))?;
    let geometry_err = |source| CliError::Geometry {
        path: cfg.geometry.clone(),
        source,
    };
    let spec = GeometrySpec::from_toml(&text).map_err(geometry_err)?;
    let metric = build_geometry(&spec).map_err(geometry_err)?;
    if let Some(s) = stages.iter().find(|s| **s >= Stage::Solve) {
        if metric.radial().is_none() {
            return Err(CliError::NotRadial(s.name()));
        }
    }
    if stages.contains(&Stage::Cgb) && metric.euler_characteristic().is_none() {
        return Err(CliError::MissingChi);
    }
    Ok((spec, metric, stages))
}

/// Runs one job. `Err` means a configuration problem (exit status 2); an
/// `Ok` outcome carries the pass/fail verdict.
pub fn run_job(cfg: &JobConfig) -> Result<JobOutcome, CliError> {
    let (spec, metric, stages) = prepare(cfg)?;
    fs::create_dir_all(&cfg.out).map_err(CliError::io(&cfg.out))?;
    let tier = cfg.tol.unwrap_or_else(|| ToleranceTier::for_geometry(&spec));
    let mut job = Job {
        spec,
        metric,
        k: cfg.k,
        tier,
        out: &cfg.out,
        jet: None,
        sol: None,
    };
    let mut outcome = JobOutcome {
        schema_version: report_schema_version().into(),
        geometry: cfg.geometry.clone(),
        geometry_hash: job.spec.hash(),
        tolerance_tier: tier,
        k: cfg.k.k(),
        out: cfg.out.clone(),
        stages: Vec::new(),
        first_failure: None,
        passed: true,
    };
    for stage in stages {
        let (report, fatal) = match job.run(stage)? {
            Ok(r) => (r, false),
            Err(msg) => {
                let mut r = job.report(stage);
                r.check(Criterion::flag(format!("{} computation", stage.name()), false));
                (r.with_data(&serde_json::json!({ "error": msg })), true)
            }
        };
        report.write(job.out).map_err(CliError::io(job.out))?;
        if let (None, Some(c)) = (&outcome.first_failure, report.first_failure()) {
            outcome.first_failure = Some(FailedCriterion {
                stage,
                criterion: c.name.clone(),
                value: c.value,
                tolerance: c.tolerance,
                error: report.data.get("error").and_then(|e| e.as_str()).map(String::from),
            });
        }
        outcome.passed &= report.passed;
        outcome.stages.push(StageSummary {
            stage,
            passed: report.passed,
        });
        if fatal {
            break;
        }
    }
    let summary = cfg.out.join("summary.json");
    let mut text = serde_json::to_string_pretty(&outcome).expect("summary serializes");
    text.push('\n');
    fs::write(&summary, text).map_err(CliError::io(&summary))?;
    Ok(outcome)
}

fn write_csv(dir: &Path, name: &str, f: impl FnOnce(BufWriter<File>) -> csv::Result<()>) -> Result<(), CliError> {
    let path = dir.join(name);
    let file = File::create(&path).map_err(CliError::io(&path))?;
    f(BufWriter::new(file)).map_err(|source| CliError::Csv { path, source })
}

impl Job<'_> {
    fn report(&self, stage: Stage) -> Report {
        Report::new(stage.name(), &self.spec, self.tier, Some(self.k))
    }

    /// Outer `Err` is an I/O failure; inner `Err` a failed computation.
    fn run(&mut self, stage: Stage) -> Result<StageResult, CliError> {
        match stage {
            Stage::Jets => self.jets(),
            Stage::Expand => self.expand(),
            Stage::Solve => self.solve(),
            Stage::Renorm => self.renorm(),
            Stage::Cgb => Ok(self.cgb()),
            Stage::Anomaly => Ok(self.anomaly()),
            Stage::Invariance => self.invariance(),
        }
    }

    fn jets(&mut self) -> Result<StageResult, CliError> {
        let jet = match boundary_jet(&self.metric) {
            Ok(j) => j,
            Err(e) => return Ok(Err(e.to_string())),
        };
        write_csv(self.out, "jets.csv", |out| {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(JETS_HEADER)?;
            for (i, (p, wt)) in jet.points.iter().zip(&jet.weights).enumerate() {
                let row = [
                    *wt,
                    p.mean,
                    p.norm_l2,
                    p.norm_lring2,
                    p.tr_l3,
                    p.tr_lring3,
                    p.rbar,
                    p.scal_h,
                    p.bianchi_residual(),
                ];
                let mut rec = vec![i.to_string()];
                rec.extend(row.iter().map(f64::to_string));
                w.write_record(&rec)?;
            }
            w.flush()?;
            Ok(())
        })?;
        let bianchi = jet.max_abs(|p| p.bianchi_residual());
        let data = serde_json::json!({
            "points": jet.points.len(),
            "boundary_volume": jet.boundary_volume(),
            "umbilic": jet.is_umbilic(),
            "max_norm_lring": jet.max_abs(|p| p.norm_lring2.sqrt()),
            "bianchi_residual": bianchi,
        });
        let mut r = self.report(Stage::Jets);
        r.check(Criterion::below("contracted Bianchi residual", bianchi, 1e-8));
        r.check(Criterion::flag("positive boundary volume", jet.boundary_volume() > 0.0));
        self.jet = Some(jet);
        Ok(Ok(r.with_data(&data)))
    }

    fn expand(&mut self) -> Result<StageResult, CliError> {
        let jet = self.jet.as_ref().expect("jets ran first");
        let profile = ExpansionProfile::new(jet, self.k);
        write_csv(self.out, "expansion.csv", |out| profile.write_csv(out))?;
        let energy = energy_from_profile(&profile);
        let cancel = cancellation_from_jet(jet, self.k);
        let div = profile.integrate(|p| p.div_terms);
        let mut r = self.report(Stage::Expand);
        r.check(Criterion::below(
            "divergence cancellation",
            cancel.max_abs() / cancel.scale.max(1.0),
            1e-6,
        ));
        r.check(Criterion::below("integrated divergence terms", div, 1e-8));
        if self.k == Problem::Sigma2 {
            r.check(Criterion::below("sigma2 log coefficient", energy.energy, 1e-8));
        }
        let data = serde_json::json!({
            "umbilic": profile.umbilic,
            "energy": energy,
            "cancellation": cancel,
            "boundary_term": profile.integrate(|p| p.bterm),
        });
        Ok(Ok(r.with_data(&data)))
    }

    fn solve(&mut self) -> Result<StageResult, CliError> {
        let sol = match solve_radial(&self.metric, self.k) {
            Ok(s) => s,
            Err(e) => return Ok(Err(e.to_string())),
        };
        write_csv(self.out, "solution.csv", |out| sol.write_csv(out))?;
        let diag = match diagnostics(&self.metric, &sol) {
            Ok(d) => d,
            Err(e) => return Ok(Err(e.to_string())),
        };
        let mut r = self.report(Stage::Solve);
        r.check(Criterion::below("collocation residual", sol.residual_norm, 1e-9));
        if self.k == Problem::Sigma2 {
            r.check(Criterion::flag(
                "negative 2-admissible",
                diag.min_cone[0] > 0.0 && diag.min_cone[1] > 0.0,
            ));
        }
        let data = serde_json::json!({
            "degree": sol.grid.len() - 1,
            "iterations": sol.iterations,
            "residual_norm": sol.residual_norm,
            "boundary_coefficients": sol.boundary_coefficients(),
            "diagnostics": diag,
        });
        self.sol = Some(sol);
        Ok(Ok(r.with_data(&data)))
    }

    fn sol(&self) -> &RadialSolution {
        self.sol.as_ref().expect("solve ran first")
    }

    fn renorm(&mut self) -> Result<StageResult, CliError> {
        let (m, sol) = (&self.metric, self.sol());
        let rv = match syamabe::renormalizer::renormalized_volume(m, sol) {
            Ok(v) => v,
            Err(e) => return Ok(Err(e.to_string())),
        };
        match volume_ladder(m, sol, &default_epsilons()) {
            Ok(l) => write_csv(self.out, "volume_ladder.csv", |out| l.write_csv(out))?,
            Err(e) => return Ok(Err(e.to_string())),
        }
        write_csv(self.out, "volume_fit.csv", |out| rv.fit.write_csv(out))?;
        let mut r = self.report(Stage::Renorm);
        r.check(Criterion::below("finite part stability", rv.fit.stability, 1e-6));
        r.check(Criterion::flag("fit residual accepted", rv.fit.residual_accepted()));
        if self.k == Problem::Sigma2 {
            r.check(Criterion::below("sigma2 log coefficient", rv.energy, 1e-8));
        }
        let mut data = serde_json::json!({ "volume": rv.volume, "c": rv.c, "energy": rv.energy, "analytic": rv.analytic });
        if self.k == Problem::Yamabe {
            let fp = match fp_einstein(m, sol) {
                Ok(f) => f,
                Err(e) => return Ok(Err(e.to_string())),
            };
            write_csv(self.out, "einstein_fit.csv", |out| fp.fit.write_csv(out))?;
            r.check(Criterion::below("Einstein finite part stability", fp.fit.stability, 1e-6));
            data["einstein"] = serde_json::json!({ "a": fp.a, "f": fp.f, "fp": fp.fp });
        }
        Ok(Ok(r.with_data(&data)))
    }

    fn cgb(&self) -> StageResult {
        let budget = cgb_budget(&self.metric, self.sol()).map_err(|e| e.to_string())?;
        let mut r = self.report(Stage::Cgb);
        for c in budget.criteria(self.tier.relative()) {
            r.check(c);
        }
        Ok(r.with_data(&budget))
    }

    fn anomaly(&self) -> StageResult {
        let (m, sol) = (&self.metric, self.sol());
        let omegas = default_omegas(m).map_err(|e| e.to_string())?;
        let rep = anomaly_verify(m, self.k, &omegas[1]).map_err(|e| e.to_string())?;
        let mut r = self.report(Stage::Anomaly);
        for c in rep.criteria() {
            r.check(c);
        }
        let mut shifts = Vec::new();
        for c in [0.3, -0.3] {
            let s = constant_shift(m, sol, c).map_err(|e| e.to_string())?;
            r.check(Criterion::below(format!("constant rescaling {c}"), s.gap, SHIFT_TOL));
            shifts.push(s);
        }
        Ok(r.with_data(&serde_json::json!({ "derivative": rep, "constant_shifts": shifts })))
    }

    fn invariance(&self) -> Result<StageResult, CliError> {
        let m = &self.metric;
        let rep = match default_omegas(m).and_then(|oms| invariance_suite(m, self.k, &oms)) {
            Ok(r) => r,
            Err(e) => return Ok(Err(e.to_string())),
        };
        write_csv(self.out, "invariance.csv", |out| {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(INVARIANCE_HEADER)?;
            for (i, (s, v)) in rep.omega_sup.iter().zip(&rep.values).enumerate() {
                w.write_record([i.to_string(), s.to_string(), v.to_string()])?;
            }
            w.flush()?;
            Ok(())
        })?;
        let mut r = self.report(Stage::Invariance);
        for c in rep.criteria() {
            r.check(c);
        }
        Ok(Ok(r.with_data(&rep)))
    }
}

/// `*.toml` files directly inside `dir`, sorted by name.
pub fn suite_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(CliError::io(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::EmptySuite(dir.to_path_buf()));
    }
    Ok(files)
}

/// Runs every job on its own thread. Results keep the input order.
pub fn run_suite(jobs: &[JobConfig]) -> Vec<Result<JobOutcome, CliError>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = jobs.iter().map(|j| s.spawn(move || run_job(j))).collect();
        handles.into_iter().map(|h| h.join().expect("job thread panicked")).collect()
    })
}
