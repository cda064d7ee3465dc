use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{DataConfig, DataFormat, ExperimentConfig, Norm};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "lattice-dp",
    version,
    about = "Invariant-preserving integer noise for histograms"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Smith normal form and lattice basis of an integer matrix (CSV, no header).
    Snf {
        matrix: PathBuf,
        /// Write the JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Release a noisy histogram with the invariants held fixed.
    Privatize(Overrides),
    /// Draw noise replicates and summarize them per coordinate.
    Replicates(Overrides),
    /// Coupled meeting times and total variation bounds.
    Couple(Overrides),
    /// Potential scale reduction factors across overdispersed chains.
    Psrf(Overrides),
}

/// Flags shared by the experiment commands; each overrides the config file.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// Experiment configuration JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `table:RxC`, `partition:a,b,...`, `total:d`, or a constraint-set JSON path.
    #[arg(long)]
    pub constraints: Option<String>,
    /// Histogram CSV (single `count` column).
    #[arg(long, conflicts_with = "counties")]
    pub data: Option<PathBuf>,
    /// County CSV (`state,county,population`).
    #[arg(long)]
    pub counties: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, value_enum)]
    pub norm: Option<Norm>,
    /// Proposal ratio in (0, 1).
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub nsim: Option<u64>,
    #[arg(long)]
    pub burn_in: Option<u64>,
    #[arg(long)]
    pub thin: Option<u64>,
    /// Coupling lag; repeat for several.
    #[arg(long)]
    pub lag: Vec<u64>,
    /// Draws for `replicates`, coupled pairs for `couple`.
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn absolute(p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        std::env::current_dir().map(|d| d.join(&p)).unwrap_or(p)
    }
}

impl Overrides {
    /// Loads the config file (if any) and applies the flags on top.
    pub fn into_config(self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(c) = self.constraints {
            let shorthand = ["table:", "partition:", "total:"].iter().any(|p| c.starts_with(p));
            cfg.constraints = Some(if shorthand {
                c
            } else {
                absolute(PathBuf::from(c)).to_string_lossy().into_owned()
            });
        }
        if let Some(p) = self.data {
            cfg.data = Some(DataConfig {
                path: absolute(p),
                format: DataFormat::Histogram,
            });
        }
        if let Some(p) = self.counties {
            cfg.data = Some(DataConfig {
                path: absolute(p),
                format: DataFormat::County,
            });
        }
        let m = &mut cfg.mechanism;
        if let Some(n) = self.norm {
            m.norm = n;
        }
        m.epsilon = self.epsilon.or(m.epsilon);
        m.delta = self.delta.or(m.delta);
        let s = &mut cfg.sampler;
        s.seed = self.seed.or(s.seed);
        s.a = self.a.or(s.a);
        s.nsim = self.nsim.or(s.nsim);
        s.burn_in = self.burn_in.or(s.burn_in);
        s.thin = self.thin.or(s.thin);
        let d = &mut cfg.diagnostics;
        if !self.lag.is_empty() {
            d.lags = self.lag;
        }
        d.replicates = self.replicates.unwrap_or(d.replicates);
        d.chains = self.chains.unwrap_or(d.chains);
        if let Some(out) = self.out {
            cfg.out_dir = Some(absolute(out));
        }
        Ok(cfg)
    }
}
