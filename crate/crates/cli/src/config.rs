//! Command-line arguments and the optional TOML configuration file.
//!
//! Every option is optional at parse time. A value given on the command line
//! wins over the same key in the file's section for that subcommand, which
//! wins over the built-in default.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use hblasso::{EtaMode, LambdaMode, SamplerKind};
use serde::Deserialize;

#[derive(Debug, Parser)]
#[command(name = "hblasso", version, about = "Bayesian Huberized lasso")]
pub struct Cli {
    /// TOML file with one table per subcommand, e.g. `[fit]`.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one model to a CSV file.
    Fit(FitArgs),
    /// Simulation study over the four synthetic scenarios.
    Simulate(SimulateArgs),
    /// Accuracy of the gamma approximation to the eta conditional.
    ValidateApprox(ValidateArgs),
    /// Leave-one-out prediction errors on a CSV file.
    Cv(CvArgs),
    /// Influence functions of the intercept and slope.
    Influence(InfluenceArgs),
    /// Posterior shape under the conditional and unconditional priors.
    DemoMultimodal(DemoArgs),
    /// Wall-clock comparison of the samplers.
    Timing(TimingArgs),
    /// Effect of the prior hyperparameters on the fitted curve.
    Sensitivity(SensitivityArgs),
}

/// `learn` or a positive number.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Setting {
    Value(f64),
    #[serde(deserialize_with = "learn_word")]
    Learn,
}

fn learn_word<'de, D: serde::Deserializer<'de>>(d: D) -> Result<(), D::Error> {
    let s = String::deserialize(d)?;
    if s.eq_ignore_ascii_case("learn") {
        Ok(())
    } else {
        Err(serde::de::Error::custom(format!(
            "expected 'learn' or a number, found '{s}'"
        )))
    }
}

impl FromStr for Setting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("learn") {
            return Ok(Setting::Learn);
        }
        s.parse()
            .map(Setting::Value)
            .map_err(|_| format!("expected 'learn' or a number, found '{s}'"))
    }
}

impl Setting {
    pub fn eta(self) -> EtaMode {
        match self {
            Setting::Learn => EtaMode::Learned,
            Setting::Value(v) => EtaMode::Fixed(v),
        }
    }

    pub fn lambda(self) -> LambdaMode {
        match self {
            Setting::Learn => LambdaMode::Learned,
            Setting::Value(v) => LambdaMode::Fixed(v),
        }
    }
}

/// Field-wise `flag.or(file)`.
macro_rules! merge_from {
    ($ty:ident { $($f:ident),* $(,)? }) => {
        impl $ty {
            pub fn merged(self, file: Option<$ty>) -> $ty {
                let file = file.unwrap_or_default();
                $ty { $($f: self.$f.or(file.$f)),* }
            }
        }
    };
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct FitArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Name of the response column [default: y].
    #[arg(long)]
    pub response: Option<String>,
    /// hbl, bl, mbl or tbl [default: hbl].
    #[arg(long)]
    pub method: Option<String>,
    /// Total sweeps, burn-in included [default: 15000].
    #[arg(long)]
    pub iters: Option<usize>,
    /// Leading sweeps discarded [default: 5000].
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `learn` or a fixed value (HBL only) [default: learn].
    #[arg(long)]
    pub eta: Option<Setting>,
    /// `learn` or a fixed value [default: learn].
    #[arg(long)]
    pub lambda: Option<Setting>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub d: Option<f64>,
    /// Center and scale y and every column first [default: true].
    #[arg(long)]
    pub standardize: Option<bool>,
    /// Also store the latent scales in samples.csv [default: false].
    #[arg(long)]
    pub full_state: Option<bool>,
    /// Output directory [default: out].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

merge_from!(FitArgs {
    data,
    response,
    method,
    iters,
    burn_in,
    thin,
    seed,
    eta,
    lambda,
    a,
    b,
    c,
    d,
    standardize,
    full_state,
    out
});

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SimulateArgs {
    /// Scenario ids, comma separated [default: 1,2,3,4].
    #[arg(long, value_delimiter = ',')]
    pub model: Option<Vec<u8>>,
    /// Sample sizes, comma separated [default: 100].
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// Replications per scenario [default: 50].
    #[arg(long)]
    pub reps: Option<usize>,
    /// Methods, comma separated [default: hbl,bl,mbl,tbl].
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Total sweeps, burn-in included [default: 2500].
    #[arg(long)]
    pub iters: Option<usize>,
    /// [default: 500]
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

merge_from!(SimulateArgs {
    model,
    n,
    reps,
    methods,
    iters,
    burn_in,
    seed,
    out
});

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ValidateArgs {
    /// Sample sizes [default: 10,20,50,100,200].
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    /// Values of a = b = c = d [default: 0.01,0.1,1].
    #[arg(long, value_delimiter = ',')]
    pub ab_grid: Option<Vec<f64>>,
    /// Data sets per cell [default: 100].
    #[arg(long)]
    pub datasets: Option<usize>,
    /// Importance-sampling draws per data set [default: 10000].
    #[arg(long)]
    pub mc_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

merge_from!(ValidateArgs {
    n_grid,
    ab_grid,
    datasets,
    mc_size,
    seed,
    out
});

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct CvArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub response: Option<String>,
    /// Methods, comma separated [default: hbl,bl,mbl,tbl].
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Multiplies the 15000 sweeps / 5000 burn-in of each fold [default: 1].
    #[arg(long)]
    pub length_factor: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub standardize: Option<bool>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

merge_from!(CvArgs {
    data,
    response,
    methods,
    length_factor,
    seed,
    standardize,
    out
});

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct InfluenceArgs {
    /// [default: 0.2,0.5,1]
    #[arg(long, value_delimiter = ',')]
    pub eta_list: Option<Vec<f64>>,
    /// Covariate values [default: -0.5,1].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x_list: Option<Vec<f64>>,
    /// Sample size of the reference data [default: 100].
    #[arg(long)]
    pub n: Option<usize>,
    /// Grid points on [-10, 10] [default: 81].
    #[arg(long)]
    pub z_points: Option<usize>,
    /// Posterior draws kept [default: 10000].
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Monte Carlo draws for the inner expectation [default: 2000].
    #[arg(long)]
    pub g_draws: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

merge_from!(InfluenceArgs {
    eta_list,
    x_list,
    n,
    z_points,
    draws,
    burn_in,
    g_draws,
    seed,
    out
});

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct DemoArgs {
    /// [default: 4]
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Density grid points per axis [default: 60].
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

merge_from!(DemoArgs {
    n,
    iters,
    burn_in,
    grid,
    seed,
    out
});

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct TimingArgs {
    /// [default: 200]
    #[arg(long)]
    pub n: Option<usize>,
    /// [default: 5,10,20,50,100]
    #[arg(long, value_delimiter = ',')]
    pub p_grid: Option<Vec<usize>>,
    /// [default: bl,mbl,tbl,hbl]
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// [default: 15000]
    #[arg(long)]
    pub iters: Option<usize>,
    /// [default: 5000]
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Repetitions averaged per cell [default: 10].
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

merge_from!(TimingArgs {
    n,
    p_grid,
    methods,
    iters,
    burn_in,
    runs,
    seed,
    out
});

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SensitivityArgs {
    /// Values tried for each of a, b, c, d [default: 0.1,1,10].
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<f64>>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

merge_from!(SensitivityArgs {
    values,
    iters,
    burn_in,
    seed,
    out
});

/// Sections of the configuration file.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub fit: Option<FitArgs>,
    pub simulate: Option<SimulateArgs>,
    pub validate_approx: Option<ValidateArgs>,
    pub cv: Option<CvArgs>,
    pub influence: Option<InfluenceArgs>,
    pub demo_multimodal: Option<DemoArgs>,
    pub timing: Option<TimingArgs>,
    pub sensitivity: Option<SensitivityArgs>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<FileConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config file {}", path.display()))
    }
}

pub fn parse_methods(list: &[String]) -> anyhow::Result<Vec<SamplerKind>> {
    if list.is_empty() {
        bail!("no methods given");
    }
    list.iter()
        .map(|m| m.trim().parse::<SamplerKind>().map_err(Into::into))
        .collect()
}
