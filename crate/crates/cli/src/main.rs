use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use bvdeg_cli::config::{parse_levels, parse_map, parse_shape, GalleryParams, MapSource, SuiteConfig};
use bvdeg_cli::output::{merge, outcome_rows, write_csv, Report};
use bvdeg_cli::suites::run_suite;
use clap::{Args, Parser, Subcommand};

/// Total variation, degree and distributional adjugate checks on sampled maps.
#[derive(Parser)]
#[command(name = "bvdeg", version)]
struct Cli {
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, global = true, env = "BVDEG_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Gallery maps.
    #[command(subcommand)]
    Gallery(GalleryCmd),
    /// Run a verification suite and write its JSON report and CSV rows.
    Verify(VerifyArgs),
    /// Report files.
    #[command(subcommand)]
    Report(ReportCmd),
}

#[derive(Subcommand)]
enum GalleryCmd {
    /// Sample a gallery map and write it as a field file.
    Emit {
        /// cantor1d, cantor_shear3d, identity3d, linear, zpow, radial_stretch or shear2d.
        #[arg(long)]
        name: String,
        #[command(flatten)]
        params: ParamArgs,
        /// Samples per axis, e.g. 129,65,65.
        #[arg(long)]
        shape: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum ReportCmd {
    /// Combine several JSON reports into one.
    Merge {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Default)]
struct ParamArgs {
    /// Cantor level [default: 6].
    #[arg(long)]
    level: Option<u32>,
    /// zpow exponent [default: 2].
    #[arg(long)]
    k: Option<i32>,
    /// radial_stretch power [default: 2].
    #[arg(long)]
    power: Option<f64>,
    /// shear2d amount [default: 0.2].
    #[arg(long)]
    amount: Option<f64>,
    /// Row-major matrix for `linear` [default: 1,0,0,0,2,0,0,0,3].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    matrix: Option<Vec<f64>>,
}

impl ParamArgs {
    fn params(&self) -> GalleryParams {
        GalleryParams {
            level: self.level,
            k: self.k,
            power: self.power,
            amount: self.amount,
            matrix: self.matrix.clone(),
        }
    }
}

#[derive(Args)]
struct VerifyArgs {
    /// degree-identity, coarea, bvl, lemma61, adjugate, regularity,
    /// stability, areas, axioms or boundary-convergence.
    suite: String,
    /// JSON config, or a previous report to replay. Flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `gallery:<name>` or a field file; repeatable [default: per suite].
    #[arg(long = "map")]
    maps: Vec<String>,
    #[command(flatten)]
    params: ParamArgs,
    /// Sample grid, `n` or `n0,n1[,n2]` [default: per suite].
    #[arg(long)]
    grid: Option<String>,
    /// Disk radius for degree-identity [default: 0.8].
    #[arg(long)]
    radius: Option<f64>,
    /// Raster points per axis for degree integrals [default: 512].
    #[arg(long)]
    raster: Option<usize>,
    /// Widest smoothed-indicator width [default: 0.2].
    #[arg(long)]
    delta: Option<f64>,
    /// Slices per axis for the adjugate [default: 33].
    #[arg(long)]
    slices: Option<usize>,
    /// Dyadic depth of the slice surveys [default: 3].
    #[arg(long)]
    depth: Option<u32>,
    /// Raster points per axis in dyadic surveys [default: 256].
    #[arg(long)]
    survey_raster: Option<usize>,
    /// Tolerance of the main comparisons [default: per suite].
    #[arg(long)]
    tol: Option<f64>,
    /// Random cases per map, or random fields for coarea and bvl [default: per suite].
    #[arg(long, alias = "random-fields")]
    cases: Option<usize>,
    /// Preimage search resolution for lemma61 [default: 256].
    #[arg(long)]
    search_resolution: Option<usize>,
    /// Cantor levels for stability, `a..b` or a list [default: 2..8].
    #[arg(long)]
    levels: Option<String>,
    /// Stability sequence: cantor or linear [default: cantor].
    #[arg(long)]
    sequence: Option<String>,
    /// Seed for random cases [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// JSON report path [default: <suite>.json].
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV path [default: the report path with a .csv extension].
    #[arg(long)]
    csv: Option<PathBuf>,
}

impl VerifyArgs {
    fn config(&self) -> Result<SuiteConfig> {
        let mut c = match &self.config {
            Some(p) => SuiteConfig::load(p)?,
            None => SuiteConfig::default(),
        };
        c.suite = self.suite.clone();
        let params = self.params.params();
        if !self.maps.is_empty() {
            c.maps = self
                .maps
                .iter()
                .map(|m| parse_map(m, &params))
                .collect::<Result<Vec<MapSource>>>()?;
        }
        if let Some(g) = &self.grid {
            c.grid = Some(parse_shape(g)?);
        }
        if let Some(l) = &self.levels {
            c.levels = parse_levels(l)?;
        }
        if let Some(s) = &self.sequence {
            c.sequence = s.clone();
        }
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { c.$f = v; })* };
        }
        set!(radius, raster, delta, slices, depth, survey_raster, search_resolution, seed);
        if self.tol.is_some() {
            c.tol = self.tol;
        }
        if self.cases.is_some() {
            c.cases = self.cases;
        }
        c.validate()?;
        Ok(c)
    }
}

/// Usage or configuration problems exit with 2.
struct UsageError(anyhow::Error);

fn verify(args: &VerifyArgs) -> Result<ExitCode, UsageError> {
    let config = args.config().map_err(UsageError)?;
    let outcome = run_suite(&config).map_err(UsageError)?;
    let report = Report::new(&config, &outcome);
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from(format!("{}.json", config.suite)));
    let csv = args.csv.clone().unwrap_or_else(|| out.with_extension("csv"));
    let written = report
        .save(&out)
        .and_then(|_| write_csv(&csv, &outcome_rows(&config.suite, &outcome)));
    if let Err(e) = written {
        return Err(UsageError(e));
    }
    for c in &report.checks {
        let verdict = match (c.asserted, c.pass) {
            (false, _) => "INFO",
            (true, true) => "PASS",
            (true, false) => "FAIL",
        };
        let note = c.note.as_deref().map(|n| format!("  ({n})")).unwrap_or_default();
        println!("{verdict} {} lhs={:.6} rhs={:.6} gap={:.3e} tol={:.1e}{note}", c.name, c.lhs, c.rhs, c.gap, c.tol);
    }
    println!(
        "{} {}: report {}, rows {}",
        if report.passed { "PASS" } else { "FAIL" },
        config.suite,
        out.display(),
        csv.display()
    );
    Ok(if report.has_errors() {
        ExitCode::from(3)
    } else if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn emit(name: &str, params: &ParamArgs, shape: &str, out: &PathBuf) -> Result<()> {
    let source = parse_map(&format!("gallery:{name}"), &params.params())?;
    let shape = parse_shape(shape)?;
    let f = source.load(&shape)?;
    bvdeg_core::io::save_map(out, &f).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {} ({shape:?})", out.display());
    Ok(())
}

fn merge_reports(files: &[PathBuf], out: &PathBuf) -> Result<bool> {
    let reports = files.iter().map(|p| Report::load(p)).collect::<Result<Vec<_>>>()?;
    let merged = merge(reports)?;
    let f = std::fs::File::create(out).with_context(|| format!("creating {}", out.display()))?;
    serde_json::to_writer_pretty(f, &merged)?;
    Ok(merged.passed)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BVDEG_LOG", "error")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot set up {n} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    match &cli.command {
        Command::Verify(args) => verify(args).unwrap_or_else(|UsageError(e)| {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }),
        Command::Gallery(GalleryCmd::Emit {
            name,
            params,
            shape,
            out,
        }) => match emit(name, params, shape, out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            }
        },
        Command::Report(ReportCmd::Merge { files, out }) => match merge_reports(files, out) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(1),
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            }
        },
    }
}
