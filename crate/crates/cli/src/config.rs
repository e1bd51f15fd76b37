//! Experiment configuration, read from TOML.
//!
//! ```toml
//! experiment = "rate_sweep"
//! master_seed = 7
//! output = "results"
//! runs = 20
//!
//! [matrix]
//! profile = "gaus"      # or: dataset = "data/a9a.libsvm"
//! rows = 1000
//! cols = 50
//!
//! [sketch]
//! families = ["gaussian", "less_uniform"]
//! k = [5, 10, 15, 20, 25]
//! s = [50, 196]
//! ```

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sketchrate::SketchFamily;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    RateSweep,
    ConvergenceCurves,
    SurrogateCompare,
    SparsitySweep,
    RandsvdErr,
    Eigendecay,
    NewtonDemo,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::RateSweep,
        Experiment::ConvergenceCurves,
        Experiment::SurrogateCompare,
        Experiment::SparsitySweep,
        Experiment::RandsvdErr,
        Experiment::Eigendecay,
        Experiment::NewtonDemo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::RateSweep => "rate_sweep",
            Experiment::ConvergenceCurves => "convergence_curves",
            Experiment::SurrogateCompare => "surrogate_compare",
            Experiment::SparsitySweep => "sparsity_sweep",
            Experiment::RandsvdErr => "randsvd_err",
            Experiment::Eigendecay => "eigendecay",
            Experiment::NewtonDemo => "newton_demo",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Experiment {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| CliError::UnknownExperiment(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatrixConfig {
    /// Named profile: `gaus`, `flat`, `identity`, `lin<slope>`, `poly<exp>`, `step<r>`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    /// LIBSVM file; its leading `rows × cols` block is used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    pub rows: usize,
    pub cols: usize,
    /// Write the generated matrix to `<output>/matrix_<name>.csv` and reuse it on later runs.
    pub cache: bool,
}

impl Default for MatrixConfig {
    fn default() -> Self {
        Self { profile: None, dataset: None, rows: 1000, cols: 50, cache: false }
    }
}

impl MatrixConfig {
    pub fn name(&self) -> String {
        match (&self.profile, &self.dataset) {
            (Some(p), _) => p.clone(),
            (None, Some(d)) => d.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "dataset".into()),
            (None, None) => "gaus".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SketchGrid {
    pub families: Vec<String>,
    pub k: Vec<usize>,
    /// Non-zeros per row for the sparse families; empty means `⌈n ln n⌉`.
    pub s: Vec<usize>,
    #[serde(rename = "leverage_C")]
    pub leverage_c: f64,
    /// Overrides `master_seed` for sketch draws.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for SketchGrid {
    fn default() -> Self {
        Self { families: vec!["gaussian".into()], k: vec![5, 10, 15, 20, 25], s: vec![], leverage_c: 1.0, seed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    pub master_seed: u64,
    pub output: PathBuf,
    pub runs: usize,
    /// Monte-Carlo draws of the expected projection.
    pub trials: usize,
    /// Draws behind each `Err(A, k)` estimate.
    pub err_trials: usize,
    pub tail: usize,
    pub max_iters: usize,
    /// Relative to `‖x*‖`.
    pub stop_tol: f64,
    /// Fixed iteration count of the sparsity sweep.
    pub iterations: usize,
    pub ridge: f64,
    pub matrix: MatrixConfig,
    pub sketch: SketchGrid,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            master_seed: 0,
            output: PathBuf::from("results"),
            runs: 20,
            trials: 1600,
            err_trials: 50,
            tail: 20,
            max_iters: 200,
            stop_tol: 1e-10,
            iterations: 30,
            ridge: 1e-2,
            matrix: MatrixConfig::default(),
            sketch: SketchGrid::default(),
        }
    }
}

fn config_error(field: impl Into<String>, msg: impl Into<String>) -> CliError {
    CliError::Config { field: field.into(), msg: msg.into() }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| {
            let span = e.span().map(|r| format!("bytes {}..{}", r.start, r.end)).unwrap_or_default();
            config_error(span, e.message().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| config_error("--config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML form, without the output directory.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.output = PathBuf::new();
        let digest = Sha256::digest(canon.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn experiment(&self) -> Result<Experiment, CliError> {
        self.experiment.ok_or_else(|| config_error("experiment", "missing"))
    }

    pub fn families(&self) -> Result<Vec<SketchFamily>, CliError> {
        self.sketch
            .families
            .iter()
            .enumerate()
            .map(|(i, f)| f.parse().map_err(|_| config_error(format!("sketch.families[{i}]"), format!("unknown family {f:?}"))))
            .collect()
    }

    /// Checks value ranges, the data source and that the output directory is writable.
    pub fn validate(&self) -> Result<(), CliError> {
        self.experiment()?;
        let positive = [
            ("runs", self.runs),
            ("trials", self.trials),
            ("err_trials", self.err_trials),
            ("tail", self.tail),
            ("max_iters", self.max_iters),
            ("iterations", self.iterations),
            ("matrix.rows", self.matrix.rows),
            ("matrix.cols", self.matrix.cols),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(config_error(field, "must be positive"));
            }
        }
        if self.err_trials < 2 {
            return Err(config_error("err_trials", "must be at least 2"));
        }
        if self.trials < 2 {
            return Err(config_error("trials", "must be at least 2"));
        }
        if !(self.stop_tol > 0.0 && self.stop_tol.is_finite()) {
            return Err(config_error("stop_tol", "must be positive"));
        }
        if !(self.ridge > 0.0 && self.ridge.is_finite()) {
            return Err(config_error("ridge", "must be positive"));
        }
        if !(self.sketch.leverage_c >= 1.0 && self.sketch.leverage_c.is_finite()) {
            return Err(config_error("sketch.leverage_C", "must be at least 1"));
        }
        if self.sketch.families.is_empty() {
            return Err(config_error("sketch.families", "must not be empty"));
        }
        self.families()?;
        if self.sketch.k.is_empty() {
            return Err(config_error("sketch.k", "must not be empty"));
        }
        for (i, &k) in self.sketch.k.iter().enumerate() {
            if k == 0 {
                return Err(config_error(format!("sketch.k[{i}]"), "must be positive"));
            }
        }
        for (i, &s) in self.sketch.s.iter().enumerate() {
            if s == 0 {
                return Err(config_error(format!("sketch.s[{i}]"), "must be positive"));
            }
        }
        if self.matrix.profile.is_some() && self.matrix.dataset.is_some() {
            return Err(config_error("matrix", "set either profile or dataset, not both"));
        }
        if let Some(d) = &self.matrix.dataset {
            if !d.is_file() {
                return Err(CliError::DatasetNotFound(d.clone()));
            }
        }
        self.check_output()
    }

    fn check_output(&self) -> Result<(), CliError> {
        let err = |e: std::io::Error| config_error("output", format!("{} is not writable: {e}", self.output.display()));
        fs::create_dir_all(&self.output).map_err(err)?;
        let probe = self.output.join(".sketchrate-probe");
        fs::write(&probe, b"").map_err(err)?;
        fs::remove_file(&probe).map_err(err)
    }
}
