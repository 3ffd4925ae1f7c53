use std::path::PathBuf;

use clap::{Args, Parser, Subcommand as ClapSubcommand};

use crate::config::{read_kv_file, ConfigError, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "qvlab", version, about = "Cumulants, rate fits and Monte Carlo for the quadratic variation of fractional Gaussian processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, ClapSubcommand)]
pub enum Command {
    /// Exact variance, third and fourth cumulants per n.
    Cumulants(Flags),
    /// Fit a cumulant or KS sequence against the regime table.
    Rates(Flags),
    /// Monte Carlo samples of V_n and their KS distance to N(0,1).
    Simulate(Flags),
    /// Logarithmic average of a test function along one path.
    Asclt(Flags),
    /// Covariance hypothesis checks (Ψ scan and γ bound).
    Hypothesis(Flags),
}

#[derive(Debug, Args)]
pub struct Flags {
    /// Flat key=value file; flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// fbm, subfbm, bifbm, gsfbm or tabulated.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub hurst: Option<String>,
    /// H' of the bi-fractional and generalized sub-fractional models.
    #[arg(long)]
    pub hp: Option<String>,
    #[arg(long)]
    pub k: Option<String>,
    /// Tabulated covariance CSV.
    #[arg(long)]
    pub grid: Option<String>,
    /// A single size; shorthand for --n-list.
    #[arg(long, conflicts_with = "n_list")]
    pub n: Option<String>,
    /// `a:b:x2`, a comma list, or one size.
    #[arg(long)]
    pub n_list: Option<String>,
    #[arg(long)]
    pub reps: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Sequence for `rates`: kappa3, kappa4, m_stat or ks.
    #[arg(long = "use")]
    pub use_: Option<String>,
    /// Test function for `asclt`: indicator_le_zero, one or cos.
    #[arg(long)]
    pub phi: Option<String>,
    /// Fixed C' for `hypothesis` instead of the fitted one.
    #[arg(long)]
    pub constant: Option<String>,
    /// csv or json.
    #[arg(long)]
    pub format: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<String>,
    /// Raw sample file for `simulate`.
    #[arg(long)]
    pub raw: Option<String>,
    #[arg(long)]
    pub threads: Option<String>,
}

impl Command {
    fn parts(&self) -> (&'static str, &Flags) {
        match self {
            Command::Cumulants(f) => ("cumulants", f),
            Command::Rates(f) => ("rates", f),
            Command::Simulate(f) => ("simulate", f),
            Command::Asclt(f) => ("asclt", f),
            Command::Hypothesis(f) => ("hypothesis", f),
        }
    }
}

impl Cli {
    /// Merges the config file (if any) with the flags into a [`RunConfig`].
    pub fn into_config(self) -> Result<RunConfig, ConfigError> {
        let (sub, flags) = self.command.parts();
        let mut map = match &flags.config {
            Some(path) => read_kv_file(path)?,
            None => Default::default(),
        };
        if let Some(file_sub) = map.get("subcommand") {
            if file_sub != sub {
                return Err(ConfigError::Conflict(format!("config file is for `{file_sub}`, not `{sub}`")));
            }
        }
        map.insert("subcommand".into(), sub.into());
        let overrides = [
            ("model", &flags.model),
            ("hurst", &flags.hurst),
            ("hp", &flags.hp),
            ("k", &flags.k),
            ("grid", &flags.grid),
            ("n-list", &flags.n),
            ("n-list", &flags.n_list),
            ("reps", &flags.reps),
            ("seed", &flags.seed),
            ("use", &flags.use_),
            ("phi", &flags.phi),
            ("constant", &flags.constant),
            ("format", &flags.format),
            ("out", &flags.out),
            ("raw", &flags.raw),
            ("threads", &flags.threads),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                map.insert(key.to_string(), v.clone());
            }
        }
        RunConfig::from_map(&map)
    }
}
