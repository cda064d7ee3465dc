//! Experiment configuration: a JSON file, overridden by command-line flags.

use std::path::{Path, PathBuf};

use lattice_dp::sampler::{default_burn_in, default_ratio, DEFAULT_THIN};
use lattice_dp::{ChainConfig, ConstraintSet, MechanismSpec, NoiseKind};
use serde::{Deserialize, Serialize};

use crate::error::{file_error, CliError, Context};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    #[default]
    L1,
    L2,
    Gauss,
}

impl Norm {
    pub fn kind(self) -> NoiseKind {
        match self {
            Norm::L1 => NoiseKind::LaplaceL1,
            Norm::L2 => NoiseKind::LaplaceL2,
            Norm::Gauss => NoiseKind::Gaussian,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    /// One `count` column, one row per cell.
    #[default]
    Histogram,
    /// `state,county,population`; each state is released separately with its
    /// total held fixed.
    County,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: PathBuf,
    #[serde(default)]
    pub format: DataFormat,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismConfig {
    #[serde(default)]
    pub norm: Norm,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    /// Overrides the default Gaussian calibration constant.
    pub c_a: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub nsim: Option<u64>,
    pub burn_in: Option<u64>,
    pub thin: Option<u64>,
    pub seed: Option<u64>,
    /// Proposal ratio `a` in (0, 1).
    pub a: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub lags: Vec<u64>,
    pub replicates: usize,
    pub l_max: Option<u64>,
    pub l_step: Option<u64>,
    pub chains: usize,
    pub max_iterations: u64,
    /// Scale of the overdispersed starting points for PSRF chains, as the
    /// epsilon of a double geometric law; defaults to a tenth of the target's.
    pub overdispersed_epsilon: Option<f64>,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            lags: vec![1],
            replicates: 100,
            l_max: None,
            l_step: None,
            chains: 4,
            max_iterations: 10_000_000,
            overdispersed_epsilon: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `table:RxC`, `partition:a,b,...`, `total:d`, or a path to a
    /// constraint-set JSON file.
    pub constraints: Option<String>,
    pub data: Option<DataConfig>,
    #[serde(default)]
    pub mechanism: MechanismConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    pub out_dir: Option<PathBuf>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| file_error(path, e))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn constraint_set(&self) -> Result<ConstraintSet, CliError> {
        let spec = self
            .constraints
            .as_deref()
            .ok_or_else(|| CliError::Config("no constraints given".into()))?;
        parse_constraints(spec, |p| self.resolve(p))
    }

    pub fn data_path(&self) -> Result<PathBuf, CliError> {
        self.data
            .as_ref()
            .map(|d| self.resolve(&d.path))
            .ok_or_else(|| CliError::Config("no input data given".into()))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir
            .as_deref()
            .map_or_else(|| PathBuf::from("out"), |p| self.resolve(p))
    }

    pub fn seed(&self) -> u64 {
        self.sampler.seed.unwrap_or(0)
    }

    /// Mechanism and chain settings for `draws` retained draws, with family
    /// defaults for anything left unset.
    pub fn mechanism_spec(&self, draws: u64) -> Result<MechanismSpec, CliError> {
        let m = &self.mechanism;
        let kind = m.norm.kind();
        let epsilon = m
            .epsilon
            .ok_or_else(|| CliError::Config("mechanism.epsilon is required".into()))?;
        let delta = match kind {
            NoiseKind::Gaussian => m
                .delta
                .ok_or_else(|| CliError::Config("the Gaussian mechanism needs mechanism.delta".into()))?,
            _ => m.delta.unwrap_or(0.0),
        };
        let s = &self.sampler;
        let burn_in = s.burn_in.unwrap_or_else(|| default_burn_in(kind));
        let thin = s.thin.unwrap_or(DEFAULT_THIN);
        let mut chain = ChainConfig::for_draws(burn_in, thin, draws, self.seed());
        if let Some(nsim) = s.nsim {
            chain.nsim = nsim;
        }
        let spec = MechanismSpec {
            kind,
            epsilon,
            delta,
            chain,
            proposal_ratio: s.a.unwrap_or_else(default_ratio),
            c_a: m.c_a,
        };
        spec.validate().context("invalid mechanism settings")?;
        Ok(spec)
    }
}

/// Parses a constraint shorthand or loads a constraint-set JSON file.
pub fn parse_constraints(spec: &str, resolve: impl Fn(&Path) -> PathBuf) -> Result<ConstraintSet, CliError> {
    let bad = |msg: &str| CliError::Config(format!("constraints {spec:?}: {msg}"));
    let sizes = |list: &str| -> Result<Vec<usize>, CliError> {
        list.split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| bad("expected comma-separated sizes"))
            })
            .collect()
    };
    if let Some(shape) = spec.strip_prefix("table:") {
        let (r, c) = shape.split_once(['x', 'X']).ok_or_else(|| bad("expected table:RxC"))?;
        let r = r.trim().parse().map_err(|_| bad("bad row count"))?;
        let c = c.trim().parse().map_err(|_| bad("bad column count"))?;
        ConstraintSet::table_margins(r, c).context("building table margins")
    } else if let Some(list) = spec.strip_prefix("partition:") {
        ConstraintSet::partition(&sizes(list)?).context("building partition")
    } else if let Some(d) = spec.strip_prefix("total:") {
        let d = d.trim().parse().map_err(|_| bad("expected total:d"))?;
        ConstraintSet::total(d).context("building total constraint")
    } else {
        let path = resolve(Path::new(spec));
        let text = std::fs::read_to_string(&path).map_err(|e| file_error(&path, e))?;
        ConstraintSet::from_json(&text).map_err(|e| CliError::Parse {
            path,
            line: match &e {
                lattice_dp::Error::Json(j) => j.line(),
                _ => 0,
            },
            message: e.to_string(),
        })
    }
}
