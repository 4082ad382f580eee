//! Experiment configuration files.
//!
//! A config is a TOML document with up to three tables:
//!
//! ```toml
//! [process]
//! type = "ar1"
//! rho = 0.5
//!
//! [kernel]
//! name = "symmetry3"
//!
//! [experiment]
//! n = 1000
//! seed = 7
//! checkpoints = [250, 500, 1000]
//! replicates = 200
//! ```
//!
//! Overrides given as `section.key=value` replace file values before the
//! document is interpreted; values are parsed as TOML and fall back to strings.

use std::path::Path;

use serde::Deserialize;

use crate::diagnostics::{ExperimentConfig, Mode, DEFAULT_MC_SAMPLES};
use crate::error::{Error, Result};
use crate::engine::{truncate_kernel, TruncationLevel};
use crate::io::read_path_csv;
use crate::kernel::Kernel;
use crate::kernels::{build_kernel, KernelSpec};
use crate::limits::{mu_omega_for_path, split_sample_model, RandomMeasureModel};
use crate::point::SamplePath;
use crate::processes::{simulate, ProcessSpec};

fn default_replicates() -> usize {
    1
}

fn default_p() -> f64 {
    1.0
}

fn default_mc_samples() -> usize {
    DEFAULT_MC_SAMPLES
}

fn default_m() -> usize {
    2
}

fn default_max_lag() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    /// Path length for single-path subcommands.
    pub n: Option<usize>,
    /// Master seed; all randomness derives from it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub checkpoints: Vec<usize>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_p")]
    pub p: f64,
    /// `"exact"` (default) or `"incomplete"`.
    pub mode: Option<String>,
    /// Tuple budget for incomplete mode.
    pub b: Option<usize>,
    pub truncation: Option<f64>,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    /// Tuple length for the Gaussian determinant check.
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_max_lag")]
    pub max_lag: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        toml::from_str("").expect("all experiment fields have defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub process: Option<ProcessSpec>,
    pub kernel: Option<KernelSpec>,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Applies one `a.b.c=value` override to `doc`.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(assignment, "override must have the form key=value"))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(key, "override key has an empty segment"));
    }
    let mut table = doc;
    for part in &parts[..parts.len() - 1] {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(key, format!("{part} is not a table")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl FileConfig {
    pub fn parse(text: &str, source: &Path, overrides: &[String]) -> Result<Self> {
        let mut doc: toml::Table = toml::from_str(text).map_err(|e| Error::Parse {
            path: source.to_path_buf(),
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            message: e.message().to_string(),
        })?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: FileConfig = toml::Value::Table(doc).try_into().map_err(|e: toml::de::Error| {
            Error::config(source.display().to_string(), e.message().to_string())
        })?;
        if let Some(p) = &cfg.process {
            p.validate()?;
        }
        Ok(cfg)
    }

    pub fn load(file: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
        Self::parse(&text, file, overrides)
    }

    pub fn process(&self) -> Result<&ProcessSpec> {
        self.process
            .as_ref()
            .ok_or_else(|| Error::config("process", "missing [process] table"))
    }

    pub fn kernel(&self) -> Result<&KernelSpec> {
        self.kernel
            .as_ref()
            .ok_or_else(|| Error::config("kernel", "missing [kernel] table"))
    }

    pub fn path_length(&self) -> Result<usize> {
        match self.experiment.n {
            Some(n) if n >= 1 => Ok(n),
            Some(_) => Err(Error::config("experiment.n", "must be at least 1")),
            None => Err(Error::config("experiment.n", "missing path length")),
        }
    }

    pub fn mode(&self) -> Result<Mode> {
        match self.experiment.mode.as_deref() {
            None | Some("exact") => Ok(Mode::Exact),
            Some("incomplete") => match self.experiment.b {
                Some(b) if b >= 1 => Ok(Mode::Incomplete { b }),
                _ => Err(Error::config("experiment.b", "incomplete mode needs a tuple budget b >= 1")),
            },
            Some(other) => Err(Error::config(
                "experiment.mode",
                format!("expected \"exact\" or \"incomplete\", got {other:?}"),
            )),
        }
    }

    /// The `[kernel]` table as a kernel, truncated at `experiment.truncation` if set.
    pub fn build_kernel(&self) -> Result<Kernel> {
        let kernel = build_kernel(self.kernel()?)?;
        Ok(match self.experiment.truncation {
            Some(r) => truncate_kernel(
                &kernel,
                TruncationLevel::new(r).map_err(|e| Error::config("experiment.truncation", e.to_string()))?,
            ),
            None => kernel,
        })
    }

    /// The path, read from `input` when given, otherwise simulated from `[process]`.
    pub fn load_path(&self, input: Option<&Path>) -> Result<SamplePath> {
        match input {
            Some(file) => read_path_csv(file),
            None => simulate(self.process()?, self.path_length()?, self.experiment.seed),
        }
    }

    /// Limit model for a path: the ergodic component of `[process]`, or a
    /// split-sample plug-in when no process is configured.
    pub fn limit_model(&self, path: &SamplePath) -> Result<RandomMeasureModel> {
        match &self.process {
            Some(spec) => mu_omega_for_path(spec, path),
            None => Ok(split_sample_model(path)),
        }
    }

    pub fn experiment_config(&self) -> Result<ExperimentConfig> {
        let e = &self.experiment;
        if e.checkpoints.is_empty() {
            return Err(Error::config("experiment.checkpoints", "missing checkpoint list"));
        }
        Ok(ExperimentConfig {
            process: self.process()?.clone(),
            kernel: self.kernel()?.clone(),
            checkpoints: e.checkpoints.clone(),
            replicates: e.replicates,
            p: e.p,
            mode: self.mode()?,
            truncation: e.truncation,
            master_seed: e.seed,
            mc_samples: e.mc_samples,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const AR1: &str = r#"
[process]
type = "ar1"
rho = 0.5

[kernel]
name = "symmetry3"

[experiment]
n = 100
seed = 3
checkpoints = [10, 20]
replicates = 4
"#;

    #[test]
    fn parses_sections() {
        let cfg = FileConfig::parse(AR1, Path::new("c.toml"), &[]).unwrap();
        assert_eq!(cfg.process().unwrap(), &ProcessSpec::GaussianAr1 { mean: 0.0, rho: 0.5, sigma: 1.0 });
        assert_eq!(cfg.kernel().unwrap().name, "symmetry3");
        assert_eq!(cfg.experiment.n, Some(100));
        let exp = cfg.experiment_config().unwrap();
        assert_eq!((exp.replicates, exp.master_seed, exp.p), (4, 3, 1.0));
        assert_eq!(exp.mode, Mode::Exact);
    }

    #[test]
    fn overrides_beat_file_values() {
        let cfg = FileConfig::parse(
            AR1,
            Path::new("c.toml"),
            &["experiment.replicates=9".into(), "process.rho=0.25".into(), "experiment.mode=incomplete".into(), "experiment.b=50".into()],
        )
        .unwrap();
        assert_eq!(cfg.experiment.replicates, 9);
        assert_eq!(cfg.process().unwrap(), &ProcessSpec::GaussianAr1 { mean: 0.0, rho: 0.25, sigma: 1.0 });
        assert_eq!(cfg.mode().unwrap(), Mode::Incomplete { b: 50 });
    }

    #[test]
    fn invalid_values_name_the_field() {
        let err = FileConfig::parse(AR1, Path::new("c.toml"), &["process.rho=1.2".into()]).unwrap_err();
        assert!(err.to_string().contains("process.rho"), "{err}");
        assert_eq!(err.exit_code(), 2);
        let err = FileConfig::parse("[process\n", Path::new("bad.toml"), &[]).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err:?}");
        assert!(FileConfig::parse("[experiment]\nbogus = 1\n", Path::new("c.toml"), &[]).is_err());
        assert!(apply_override(&mut toml::Table::new(), "novalue").is_err());
    }
}
