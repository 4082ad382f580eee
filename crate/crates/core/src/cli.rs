//! The `ustat` command-line tool.
//!
//! Exit codes: 0 success, 1 a checked identity failed, 2 configuration or
//! validation error, 3 exact evaluation infeasible.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::FileConfig;
use crate::diagnostics::{convergence_experiment, dj_identity_check, Mode};
use crate::engine::{check_exact_kernel, incomplete_u_statistic, u_from_v_decomposition, u_statistic, TruncationLevel};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, write_atomic, write_path_csv};
use crate::kernels::build_kernel;
use crate::limits::estimate_limit;
use crate::numeric::rel_close;
use crate::processes::{check_covariance_determinant, check_ergodicity_cesaro, simulate};

/// Environment variable capping the worker count (0 or unset = automatic).
pub const THREADS_ENV: &str = "UST_THREADS";

#[derive(Debug, Parser)]
#[command(name = "ustat", version, about = "U-statistics of stationary sequences and their random limits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment config (TOML with [process], [kernel], [experiment]).
    #[arg(short, long)]
    config: PathBuf,
    /// Overrides of config values, e.g. experiment.replicates=10.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one path and write it as CSV.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Compute the U-statistic of one path.
    Ustat {
        #[command(flatten)]
        common: Common,
        /// Path CSV to use instead of simulating.
        #[arg(short, long)]
        input: Option<PathBuf>,
        /// Append-free single-row CSV output.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Compute or estimate the limit I_m for one path.
    Limit {
        #[command(flatten)]
        common: Common,
        #[arg(short, long)]
        input: Option<PathBuf>,
    },
    /// Run a replicated convergence experiment and write the report CSV.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Report CSV; standard output when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check the determinant and Cesaro conditions for a Gaussian process.
    CheckGaussian {
        #[command(flatten)]
        common: Common,
    },
    /// Check the d_jR reconstruction (and, for symmetric kernels, the V-statistic decomposition).
    IdentityCheck {
        #[command(flatten)]
        common: Common,
        #[arg(short, long)]
        input: Option<PathBuf>,
    },
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::config(THREADS_ENV, format!("must be a non-negative integer, got {v:?}")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config(THREADS_ENV, e.to_string()))
}

fn load(common: &Common) -> Result<FileConfig> {
    FileConfig::load(&common.config, &common.overrides)
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn execute(command: Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Simulate { common, output } => {
            let cfg = load(&common)?;
            let path = simulate(cfg.process()?, cfg.path_length()?, cfg.experiment.seed)?;
            write_atomic(&output, |w| write_path_csv(&path, w))?;
            writeln!(out, "seed={}", path.seed).map_err(io_err)?;
            match path.latent_component {
                Some(k) => writeln!(out, "latent_component={k}"),
                None => writeln!(out, "latent_component=none"),
            }
            .map_err(io_err)?;
            writeln!(out, "rows={} written to {}", path.len(), output.display()).map_err(io_err)?;
            Ok(0)
        }
        Command::Ustat { common, input, output } => {
            let cfg = load(&common)?;
            let kernel = cfg.build_kernel()?;
            let path = cfg.load_path(input.as_deref())?;
            let (n, m) = (path.len(), kernel.order());
            if n < m {
                return Err(Error::domain(format!("kernel order {m} exceeds path length {n}")));
            }
            let mode = cfg.mode()?;
            let value = match mode {
                Mode::Exact => {
                    check_exact_kernel(n, &kernel)?;
                    u_statistic(&path, &kernel)?
                }
                Mode::Incomplete { b } => incomplete_u_statistic(&path, &kernel, b, cfg.experiment.seed)?,
            };
            writeln!(
                out,
                "u = {value:.12} (kernel={}, n={n}, m={m}, mode={})",
                kernel.name(),
                mode.describe()
            )
            .map_err(io_err)?;
            if let Some(file) = output {
                write_atomic(&file, |w| {
                    writeln!(w, "kernel,n,order,mode,u_value")?;
                    writeln!(w, "{},{n},{m},{},{}", kernel.name(), mode.describe(), fmt_f64(value))
                })?;
            }
            Ok(0)
        }
        Command::Limit { common, input } => {
            let cfg = load(&common)?;
            let kernel = cfg.build_kernel()?;
            let path = cfg.load_path(input.as_deref())?;
            let model = cfg.limit_model(&path)?;
            let est = estimate_limit(&model, &kernel, cfg.experiment.mc_samples, cfg.experiment.seed)?;
            writeln!(
                out,
                "limit = {:.12} std_error = {:.3e} method = {}",
                est.value,
                est.std_error,
                est.method.as_str()
            )
            .map_err(io_err)?;
            writeln!(out, "model = {}", model.description).map_err(io_err)?;
            if let Some(k) = model.component_index {
                writeln!(out, "component = {k}").map_err(io_err)?;
            }
            if model.heuristic {
                writeln!(out, "note: split-sample plug-in from the first half of the data (heuristic)").map_err(io_err)?;
            }
            Ok(0)
        }
        Command::Converge { common, output } => {
            let cfg = load(&common)?;
            let exp = cfg.experiment_config()?;
            let report = thread_pool()?.install(|| convergence_experiment(&exp))?;
            match output {
                Some(file) => {
                    write_atomic(&file, |w| report.write_csv(w))?;
                    write!(out, "{}", report.summary()).map_err(io_err)?;
                    writeln!(out, "report written to {}", file.display()).map_err(io_err)?;
                }
                None => report.write_csv(&mut *out).map_err(io_err)?,
            }
            Ok(0)
        }
        Command::CheckGaussian { common } => {
            let cfg = load(&common)?;
            let spec = cfg.process()?;
            let (m, max_lag) = (cfg.experiment.m, cfg.experiment.max_lag);
            let scan = check_covariance_determinant(spec, m, max_lag)?;
            writeln!(out, "process {}", spec.id()).map_err(io_err)?;
            writeln!(
                out,
                "min det Sigma (m={m}, span<={max_lag}) = {:.12e} at {:?} [{}]",
                scan.min_determinant,
                scan.argmin.indices(),
                scan.verdict()
            )
            .map_err(io_err)?;
            let mut cesaro = Vec::new();
            for n in [10usize, 100, 1000] {
                let v = check_ergodicity_cesaro(spec, n)?;
                writeln!(out, "cesaro N={n:<5} = {v:.12e}").map_err(io_err)?;
                cesaro.push(v);
            }
            let decaying = cesaro.windows(2).all(|w| w[1] <= w[0]);
            writeln!(out, "cesaro [{}]", if decaying { "PASS" } else { "NOT-DECAYING" }).map_err(io_err)?;
            Ok(0)
        }
        Command::IdentityCheck { common, input } => {
            let cfg = load(&common)?;
            let kernel = build_kernel(cfg.kernel()?)?;
            let r = cfg
                .experiment
                .truncation
                .ok_or_else(|| Error::config("experiment.truncation", "identity-check needs a truncation level R"))?;
            let r = TruncationLevel::new(r).map_err(|e| Error::config("experiment.truncation", e.to_string()))?;
            let path = cfg.load_path(input.as_deref())?;
            let dj = dj_identity_check(&path, &kernel, r)?;
            writeln!(out, "d_jR reconstruction identity (n={}, R={}): {dj}", path.len(), r.value()).map_err(io_err)?;
            let mut ok = dj;
            if kernel.is_symmetric() {
                let u = u_statistic(&path, &kernel)?;
                let via_v = u_from_v_decomposition(&path, &kernel)?;
                let same = rel_close(u, via_v, 1e-12, 0.0) || (u - via_v).abs() <= 1e-12;
                writeln!(out, "V-statistic decomposition identity: {same} (u={}, via V={})", fmt_f64(u), fmt_f64(via_v))
                    .map_err(io_err)?;
                ok &= same;
            }
            Ok(if ok { 0 } else { 1 })
        }
    }
}

/// Parses `args` (including the program name) and runs the subcommand,
/// writing results to `out` and errors to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render();
            let _ = if code == 0 { write!(out, "{rendered}") } else { write!(err, "{rendered}") };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if let Error::Infeasible(_) = e {
                let _ = writeln!(err, "hint: set experiment.mode=incomplete and experiment.b=<tuples>");
            }
            e.exit_code()
        }
    }
}
