//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime error, 2 usage error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::ampute::{ampute, AmputeConfig, Mechanism};
use crate::benchmark::{run_to_dir, BenchmarkPlan};
use crate::boosting::GbmParams;
use crate::error::Error;
use crate::imputer::{impute, LearnerSpec, DEFAULT_MAX_ITER};
use crate::io::{load_csv, save_csv, save_mask_csv, save_schema, DEFAULT_NA_TOKEN};
use crate::synthdata::{generate, Design, DesignSpec, DEFAULT_ROWS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "treeimpute", version, about = "Tree-ensemble imputation of mixed-type tables")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Token marking a missing cell.
    #[arg(long, global = true, default_value = DEFAULT_NA_TOKEN)]
    pub na_token: String,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fill the missing cells of a CSV file.
    Impute {
        input: PathBuf,
        schema: PathBuf,
        /// Preset name or a method file.
        #[arg(long, short, default_value = "missboopf")]
        method: String,
        #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
        max_iter: usize,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Blank cells of a complete CSV file.
    Ampute {
        input: PathBuf,
        schema: PathBuf,
        /// mcar, mcar-bernoulli, mar or mnar.
        #[arg(long, value_parser = parse_mechanism)]
        mechanism: Mechanism,
        #[arg(long)]
        rate: f64,
        #[arg(long, short)]
        output: PathBuf,
        /// 0/1 mask file (default: OUTPUT with a .mask.csv suffix).
        #[arg(long)]
        mask: Option<PathBuf>,
    },
    /// Draw a synthetic design.
    Generate {
        /// D1 to D7 or D3-rho07.
        #[arg(value_parser = parse_design)]
        design: Design,
        #[arg(long, short, default_value_t = DEFAULT_ROWS)]
        n: usize,
        /// Use the diagonal-9 covariance for D3.
        #[arg(long)]
        rho07: bool,
        #[arg(long, short)]
        output: PathBuf,
        /// Schema sidecar (default: OUTPUT with a .schema extension).
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Run a benchmark plan.
    Benchmark {
        plan: PathBuf,
        /// Directory for records.csv and summary.csv.
        #[arg(long, short, default_value = "benchmark-out")]
        out_dir: PathBuf,
        /// Suppress the per-run log.
        #[arg(long, short)]
        quiet: bool,
    },
}

fn parse_mechanism(s: &str) -> std::result::Result<Mechanism, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_design(s: &str) -> std::result::Result<Design, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

const DEFAULT_SEED: u64 = 1;

/// Resolves `--method`: a preset name, or a `key = value` file with keys
/// `preset`, `rf_trees`, `gbm_trees` and `gbm_step`.
pub fn resolve_method(method: &str) -> std::result::Result<LearnerSpec, String> {
    if let Some(spec) = LearnerSpec::preset(method) {
        return Ok(spec);
    }
    let path = Path::new(method);
    if !path.is_file() {
        return Err(format!(
            "unknown method {method:?}; expected one of {} or a method file",
            LearnerSpec::PRESETS.join(", ")
        ));
    }
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut spec = None;
    let (mut trees, mut iters, mut step) = (None, None, None);
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let (k, v) = line.split_once('=').ok_or_else(|| format!("method file line {line:?}: expected key = value"))?;
        let v = v.trim();
        let bad = |_| format!("method file: cannot parse {v:?}");
        match k.trim() {
            "preset" => spec = Some(LearnerSpec::preset(v).ok_or_else(|| format!("unknown preset {v:?}"))?),
            "rf_trees" => trees = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "gbm_trees" => iters = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "gbm_step" => step = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
            other => return Err(format!("method file: unknown key {other:?}")),
        }
    }
    let mut spec = spec.ok_or("method file needs a preset key")?;
    if let Some(t) = trees {
        spec = spec.with_forest_trees(t);
    }
    if iters.is_some() || step.is_some() {
        let d = GbmParams::default();
        spec = spec.with_boosting(iters.unwrap_or(d.n_iter), step.unwrap_or(d.step));
    }
    Ok(spec)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

/// Executes a parsed command. Usage problems found after parsing are
/// reported as `Err(Ok(message))`.
fn execute(cli: Cli) -> std::result::Result<(), std::result::Result<String, Error>> {
    let g = &cli.global;
    let seed = g.seed.unwrap_or(DEFAULT_SEED);
    match cli.command {
        Command::Impute {
            input,
            schema,
            method,
            max_iter,
            output,
        } => {
            let spec = resolve_method(&method).map_err(Ok)?;
            let d = load_csv(&input, &schema, &g.na_token).map_err(Err)?;
            if d.is_complete() {
                std::fs::copy(&input, &output).map_err(io_err(&output)).map_err(Err)?;
                return Ok(());
            }
            let r = impute(&d, &spec, max_iter, seed).map_err(Err)?;
            save_csv(&output, &r.data, &g.na_token).map_err(Err)
        }
        Command::Ampute {
            input,
            schema,
            mechanism,
            rate,
            output,
            mask,
        } => {
            let d = load_csv(&input, &schema, &g.na_token).map_err(Err)?;
            let a = ampute(&d, &AmputeConfig { mechanism, rate, seed }).map_err(Err)?;
            save_csv(&output, &a.data, &g.na_token).map_err(Err)?;
            let mask_path = mask.unwrap_or_else(|| sibling(&output, ".mask.csv"));
            save_mask_csv(&mask_path, d.schema(), &a.mask).map_err(Err)
        }
        Command::Generate {
            design,
            n,
            rho07,
            output,
            schema,
        } => {
            let design = match (design, rho07) {
                (Design::D3, true) => Design::D3Rho07,
                (d, true) if d != Design::D3Rho07 => return Err(Ok("--rho07 applies to D3 only".into())),
                (d, _) => d,
            };
            let d = generate(&DesignSpec { design, n, seed }).map_err(Err)?;
            save_csv(&output, &d, &g.na_token).map_err(Err)?;
            save_schema(schema.unwrap_or_else(|| output.with_extension("schema")), d.schema()).map_err(Err)
        }
        Command::Benchmark { plan, out_dir, quiet } => {
            let mut p = BenchmarkPlan::load(&plan).map_err(Err)?;
            if let Some(s) = g.seed {
                p.seed = s;
            }
            let log = |line: &str| eprintln!("{line}");
            let log: Option<&(dyn Fn(&str) + Sync)> = if quiet { None } else { Some(&log) };
            let (records, summary) = run_to_dir(&p, &out_dir, Some(&g.na_token), log).map_err(Err)?;
            if !quiet {
                eprintln!("wrote {} and {}", records.display(), summary.display());
            }
            Ok(())
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match cli.global.threads {
        Some(0) => Err(Ok("--threads must be at least 1".to_string())),
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(|| execute(cli)),
            Err(e) => Err(Err(Error::InvalidParameter(e.to_string()))),
        },
        None => execute(cli),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Ok(usage)) => {
            eprintln!("error: {usage}");
            EXIT_USAGE
        }
        Err(Err(e)) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}
