use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use clap::{Args, ValueEnum};
use serde_json::{json, Value};

use wavepipe::dnwr::{DnwrConfig, DnwrMode};
use wavepipe::nnwr::{NnwrConfig, NnwrMode};
use wavepipe::report::Method;
use wavepipe::transport::TransportOptions;
use wavepipe::{Decomposition, Error, FluxStencil, HeatProblem, InitialGuess, PivotPolicy, SpaceTimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Nnwr,
    Dnwr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Classical,
    Pipeline,
    Naive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GuessArg {
    /// `u0(x_i)` held constant in time
    Ic,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FluxArg {
    Balance,
    OneSided,
}

/// Parameters shared by every subcommand. Each may also come from a
/// `key=value` file given with `--config`; flags win.
#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// Flat key=value file, keys spelled like the flags (`Nx=200`)
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Domain length
    #[arg(long = "L")]
    pub length: Option<f64>,
    /// Time horizon
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    /// Interior grid nodes
    #[arg(long = "Nx")]
    pub nx: Option<usize>,
    /// Time steps
    #[arg(long = "Nt")]
    pub nt: Option<usize>,
    /// Subdomains
    #[arg(long = "N")]
    pub n: Option<usize>,
    /// Time blocks; a comma list for efficiency-table
    #[arg(long = "J")]
    pub j: Option<String>,
    /// Waveform iterates
    #[arg(long = "K")]
    pub k: Option<usize>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// DNWR pivot subdomain
    #[arg(long = "m")]
    pub pivot: Option<usize>,
    #[arg(long = "initial-guess", value_enum)]
    pub initial_guess: Option<GuessArg>,
    #[arg(long, value_enum)]
    pub flux: Option<FluxArg>,
    /// Seed for random send delays
    #[arg(long)]
    pub seed: Option<u64>,
    /// Largest random send delay in microseconds when a seed is given
    #[arg(long = "max-delay-us")]
    pub max_delay_us: Option<u64>,
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T, Error> {
    v.parse()
        .map_err(|_| Error::Config(format!("cannot parse {key} = {v:?}")))
}

fn parse_enum<T: ValueEnum>(key: &str, v: &str) -> Result<T, Error> {
    T::from_str(v, true).map_err(|_| Error::Config(format!("unknown value for {key}: {v:?}")))
}

fn fill<T>(slot: &mut Option<T>, value: T) {
    if slot.is_none() {
        *slot = Some(value);
    }
}

impl RunArgs {
    /// Fill unset fields from the config file, if any.
    pub fn merge_file(&mut self) -> Result<(), Error> {
        let Some(path) = self.config.clone() else {
            return Ok(());
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        self.merge_text(&text)
    }

    pub fn merge_text(&mut self, text: &str) -> Result<(), Error> {
        for (line_no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected key=value", line_no + 1)));
            };
            let (key, v) = (key.trim(), value.trim());
            match key {
                "method" => fill(&mut self.method, parse_enum(key, v)?),
                "mode" => fill(&mut self.mode, parse_enum(key, v)?),
                "L" => fill(&mut self.length, parse(key, v)?),
                "T" => fill(&mut self.horizon, parse(key, v)?),
                "Nx" => fill(&mut self.nx, parse(key, v)?),
                "Nt" => fill(&mut self.nt, parse(key, v)?),
                "N" => fill(&mut self.n, parse(key, v)?),
                "J" => fill(&mut self.j, v.to_string()),
                "K" => fill(&mut self.k, parse(key, v)?),
                "theta" => fill(&mut self.theta, parse(key, v)?),
                "tol" => fill(&mut self.tol, parse(key, v)?),
                "m" => fill(&mut self.pivot, parse(key, v)?),
                "initial-guess" | "initial_guess" => fill(&mut self.initial_guess, parse_enum(key, v)?),
                "flux" => fill(&mut self.flux, parse_enum(key, v)?),
                "seed" => fill(&mut self.seed, parse(key, v)?),
                "max-delay-us" | "max_delay_us" => fill(&mut self.max_delay_us, parse(key, v)?),
                _ => return Err(Error::Config(format!("line {}: unknown key {key:?}", line_no + 1))),
            }
        }
        Ok(())
    }

    pub fn resolve(mut self) -> Result<RunConfig, Error> {
        self.merge_file()?;
        let method = match self.method.unwrap_or(MethodArg::Nnwr) {
            MethodArg::Nnwr => Method::Nnwr,
            MethodArg::Dnwr => Method::Dnwr,
        };
        let blocks = match &self.j {
            None => vec![1],
            Some(s) => parse_list(s)?,
        };
        let cfg = RunConfig {
            method,
            mode: self.mode.unwrap_or(match method {
                Method::Nnwr => ModeArg::Classical,
                Method::Dnwr => ModeArg::Naive,
            }),
            length: self.length.unwrap_or(1.0),
            horizon: self.horizon.unwrap_or(0.1),
            nx: self.nx.unwrap_or(200),
            nt: self.nt.unwrap_or(128),
            subdomains: self.n.unwrap_or(2),
            blocks,
            iterates: self.k.unwrap_or(8),
            theta: self.theta.unwrap_or(match method {
                Method::Nnwr => 0.25,
                Method::Dnwr => 0.5,
            }),
            tol: self.tol.unwrap_or(1e-8),
            pivot: self.pivot,
            initial_guess: self.initial_guess.unwrap_or(GuessArg::Ic),
            flux: self.flux.unwrap_or(FluxArg::Balance),
            seed: self.seed,
            max_delay_us: self.max_delay_us.unwrap_or(50),
        };
        if cfg.method == Method::Nnwr && cfg.mode == ModeArg::Naive {
            return Err(Error::Config("mode naive exists only for DNWR".into()));
        }
        Ok(cfg)
    }
}

/// Comma-separated block counts; empty entries are rejected.
pub fn parse_list(s: &str) -> Result<Vec<usize>, Error> {
    let items: Vec<&str> = s.split(',').map(str::trim).filter(|x| !x.is_empty()).collect();
    if items.is_empty() {
        return Err(Error::Config("J list is empty".into()));
    }
    items.into_iter().map(|x| parse("J", x)).collect()
}

/// Fully resolved run parameters.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub method: Method,
    pub mode: ModeArg,
    pub length: f64,
    pub horizon: f64,
    pub nx: usize,
    pub nt: usize,
    pub subdomains: usize,
    pub blocks: Vec<usize>,
    pub iterates: usize,
    pub theta: f64,
    pub tol: f64,
    pub pivot: Option<usize>,
    pub initial_guess: GuessArg,
    pub flux: FluxArg,
    pub seed: Option<u64>,
    pub max_delay_us: u64,
}

impl RunConfig {
    pub fn single_block(&self) -> Result<usize, Error> {
        match self.blocks[..] {
            [j] => Ok(j),
            _ => Err(Error::Config(format!("expected one J, got {:?}", self.blocks))),
        }
    }

    pub fn grid(&self) -> Result<SpaceTimeGrid, Error> {
        SpaceTimeGrid::new(self.length, self.horizon, self.nx, self.nt)
    }

    /// Benchmark problem and an equal (or near-equal) split into `N`
    /// subdomains and `blocks` time blocks.
    pub fn build(&self, blocks: usize) -> Result<(HeatProblem, Decomposition), Error> {
        let grid = self.grid()?;
        let problem = HeatProblem::parabolic_bump(grid);
        let n = self.subdomains;
        let mut decomp = if n > 0 && (self.nx + 1) % n == 0 {
            wavepipe::decompose(&grid, n, blocks, PivotPolicy::Middle)?
        } else {
            Decomposition::near_uniform(&grid, n, blocks, PivotPolicy::Middle)?
        };
        if let Some(m) = self.pivot {
            decomp = decomp.with_pivot(m)?;
        }
        Ok((problem, decomp))
    }

    fn transport(&self) -> TransportOptions {
        TransportOptions {
            random_delay: self
                .seed
                .map(|s| (s, Duration::from_micros(self.max_delay_us))),
            ..TransportOptions::default()
        }
    }

    fn guess(&self) -> InitialGuess {
        match self.initial_guess {
            GuessArg::Ic => InitialGuess::InitialConditionTrace,
            GuessArg::Zero => InitialGuess::Zero,
        }
    }

    fn stencil(&self) -> FluxStencil {
        match self.flux {
            FluxArg::Balance => FluxStencil::Balance,
            FluxArg::OneSided => FluxStencil::OneSided,
        }
    }

    pub fn nnwr(&self, mode: ModeArg) -> NnwrConfig {
        NnwrConfig {
            theta: self.theta,
            iterates: self.iterates,
            tol: self.tol,
            mode: if mode == ModeArg::Pipeline { NnwrMode::Pipeline } else { NnwrMode::Classical },
            initial_guess: self.guess(),
            flux: self.stencil(),
            transport: self.transport(),
        }
    }

    pub fn dnwr(&self, mode: ModeArg) -> DnwrConfig {
        DnwrConfig {
            theta: self.theta,
            iterates: self.iterates,
            pivot: self.pivot,
            mode: match mode {
                ModeArg::Classical => DnwrMode::ClassicalPacked,
                ModeArg::Pipeline => DnwrMode::Pipeline,
                ModeArg::Naive => DnwrMode::Naive,
            },
            tol: self.tol,
            initial_guess: self.guess(),
            flux: self.stencil(),
            enforce_block_bound: true,
            transport: self.transport(),
        }
    }

    pub fn echo(&self) -> Value {
        json!({
            "method": match self.method { Method::Nnwr => "nnwr", Method::Dnwr => "dnwr" },
            "mode": format!("{:?}", self.mode).to_lowercase(),
            "L": self.length,
            "T": self.horizon,
            "Nx": self.nx,
            "Nt": self.nt,
            "N": self.subdomains,
            "J": self.blocks,
            "K": self.iterates,
            "theta": self.theta,
            "tol": self.tol,
            "m": self.pivot,
            "initial_guess": format!("{:?}", self.initial_guess).to_lowercase(),
            "flux": format!("{:?}", self.flux).to_lowercase(),
            "seed": self.seed,
        })
    }
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}
