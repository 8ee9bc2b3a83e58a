use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use robzero::domain::Topology;
use robzero::fields::{
    gen_gaussian, gen_hopf_with_norm, gen_quadratic_with_norm, gen_random_quadratic, load_field,
    save_field, Encoding, GaussianParams, Norm, ObjectiveField, SampledField, Spectrum,
};
use robzero::filtration::Mode;
use robzero::obstruction::{robustness_report, Depth, Options, Persistence, Start};
use robzero::par::{self, Parallelism};
use robzero::robopt::opt_curve;

mod experiment;
mod report;

#[derive(Parser)]
#[command(name = "robzero", version, about = "Robustness of zeros of sampled vector fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bound the robustness of the zero set of a field.
    Robustness {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Write the JSON report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a benchmark or random field as a ROBF file.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
        #[arg(long, global = true)]
        out: Option<PathBuf>,
        #[arg(long, global = true, value_enum, default_value_t = EncodingArg::Binary)]
        encoding: EncodingArg,
    },
    /// Lower bounds on the uncertainty-optimality curve as CSV.
    Optimize {
        #[arg(long)]
        input: PathBuf,
        /// Scalar objective on the same grid (codomain 1).
        #[arg(long)]
        objective: PathBuf,
        #[arg(long)]
        r_max: f64,
        /// Also emit the upper companion when the dimensions allow it.
        #[arg(long)]
        upper: bool,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the pipeline on a batch of Gaussian fields.
    Experiment(experiment::ExperimentArgs),
}

#[derive(Subcommand)]
enum GenKind {
    /// `f(x) = (x_1^2 - 1/4, x_2, ..., x_n)` on `[-1, 1]^n`.
    Quadratic {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        grid: u32,
        #[arg(long, value_parser = parse_norm, default_value = "inf")]
        norm: Norm,
    },
    /// Hopf-type map `[-1, 1]^{n+1} -> R^n`.
    Hopf {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        grid: u32,
        #[arg(long, value_parser = parse_norm, default_value = "inf")]
        norm: Norm,
    },
    /// Stationary Gaussian random field.
    Gaussian(GaussianArgs),
    /// Random homogeneous quadratic `[-1, 1]^4 -> R^3`.
    QuadraticRandom {
        #[arg(long)]
        grid: u32,
        #[arg(long)]
        seed: u64,
    },
}

#[derive(Args, Clone)]
pub struct GaussianArgs {
    /// Spectrum parameter.
    #[arg(long)]
    pub l: f64,
    #[arg(long)]
    pub grid: u32,
    #[arg(long, default_value_t = 4)]
    pub dims: usize,
    #[arg(long, default_value_t = 3)]
    pub codomain: usize,
    #[arg(long, value_enum, default_value_t = TopologyArg::Cube)]
    pub topology: TopologyArg,
    #[arg(long, value_enum, default_value_t = KernelArg::Power)]
    pub kernel: KernelArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Multiplier on the sampled edge increment used as alpha.
    #[arg(long, default_value_t = 1.0)]
    pub safety: f64,
}

impl GaussianArgs {
    pub fn params(&self, seed: u64) -> GaussianParams {
        let spectrum = match self.kernel {
            KernelArg::Power => Spectrum::Power(self.l),
            KernelArg::Gaussian => Spectrum::Gaussian(self.l),
        };
        let topology = match self.topology {
            TopologyArg::Cube => Topology::Cube,
            TopologyArg::Torus => Topology::Torus,
        };
        GaussianParams {
            safety: self.safety,
            ..GaussianParams::new(self.dims, self.grid, self.codomain, spectrum, topology, seed)
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum TopologyArg {
    Cube,
    Torus,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum KernelArg {
    /// Power `(1 + |p|^2)^{-l}`.
    Power,
    /// Covariance `exp(-|x-y|^2 / 2l^2)`.
    Gaussian,
}

#[derive(Clone, Copy, ValueEnum)]
enum EncodingArg {
    Text,
    Binary,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum StartArg {
    Lipschitz,
    MinSimplicial,
}

#[derive(Args, Clone, Default)]
pub struct PipelineArgs {
    /// Cubical filtration (default for domains of dimension 4 and more).
    #[arg(long, conflicts_with = "simplicial")]
    pub cubical: bool,
    #[arg(long)]
    pub simplicial: bool,
    /// Compute the secondary obstruction (default when n > 3, or n = 3 on a cube).
    #[arg(long, conflicts_with = "primary")]
    pub secondary: bool,
    #[arg(long)]
    pub primary: bool,
    /// Norm measuring |f|; a field stored in the max norm is rescaled.
    #[arg(long, value_parser = parse_norm)]
    pub norm: Option<Norm>,
    #[arg(long, value_enum)]
    pub start: Option<StartArg>,
}

impl PipelineArgs {
    pub fn options(&self) -> Options {
        Options {
            mode: if self.cubical {
                Some(Mode::Cubical)
            } else if self.simplicial {
                Some(Mode::Simplicial)
            } else {
                None
            },
            depth: if self.secondary {
                Some(Depth::Secondary)
            } else if self.primary {
                Some(Depth::Primary)
            } else {
                None
            },
            start: self.start.map(|s| match s {
                StartArg::Lipschitz => Start::Lipschitz,
                StartArg::MinSimplicial => Start::MinSimplicial,
            }),
            par: parallelism(),
        }
    }

    pub fn apply_norm(&self, field: SampledField) -> robzero::Result<SampledField> {
        let Some(norm) = self.norm else {
            return Ok(field);
        };
        if norm == field.norm {
            return Ok(field);
        }
        if field.norm != Norm::Inf {
            return Err(robzero::Error::Parameter(format!(
                "cannot convert a field stored in the {} norm to the {norm} norm",
                field.norm
            )));
        }
        let alpha = field.alpha * norm.dim_factor(field.n);
        Ok(SampledField {
            norm,
            alpha,
            ..field
        })
    }
}

fn parse_norm(s: &str) -> Result<Norm, String> {
    s.parse().map_err(|e: robzero::Error| e.to_string())
}

/// `ROBZERO_THREADS=1` runs everything on the calling thread.
pub fn parallelism() -> Parallelism {
    match std::env::var("ROBZERO_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        Some(1) => Parallelism::Sequential,
        _ => Parallelism::Parallel,
    }
}

pub fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p).map_err(|e| anyhow!("creating {}: {e}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Robustness {
            input,
            pipeline,
            out,
        } => {
            let field = pipeline.apply_norm(load_field(&input)?)?;
            let rep = robustness_report(&field, &pipeline.options())?;
            let doc = report::document(&input, &field, &rep);
            let mut w = output(out.as_deref())?;
            serde_json::to_writer_pretty(&mut w, &doc)?;
            writeln!(w)?;
            w.flush()?;
            let inconclusive = matches!(rep.r2, Some(Persistence::Inconclusive));
            Ok(ExitCode::from(if inconclusive { 3 } else { 0 }))
        }
        Command::Gen {
            kind,
            out,
            encoding,
        } => {
            let field = match kind {
                GenKind::Quadratic { n, grid, norm } => gen_quadratic_with_norm(n, grid, norm)?,
                GenKind::Hopf { n, grid, norm } => gen_hopf_with_norm(n, grid, norm)?,
                GenKind::Gaussian(args) => gen_gaussian(&args.params(args.seed))?,
                GenKind::QuadraticRandom { grid, seed } => gen_random_quadratic(grid, seed)?,
            };
            let Some(out) = out else {
                bail!(robzero::Error::Parameter("gen needs --out".into()));
            };
            let encoding = match encoding {
                EncodingArg::Text => Encoding::Text,
                EncodingArg::Binary => Encoding::Binary,
            };
            save_field(&field, &out, encoding)?;
            log::info!(
                "wrote {} ({} vertices, alpha {})",
                out.display(),
                field.domain.vertex_count(),
                field.alpha
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Optimize {
            input,
            objective,
            r_max,
            upper,
            pipeline,
            out,
        } => {
            let field = pipeline.apply_norm(load_field(&input)?)?;
            let objective = ObjectiveField::from_field(load_field(&objective)?)?;
            let curve = opt_curve(&field, &objective, r_max, &pipeline.options(), upper)?;
            let mut w = csv::Writer::from_writer(output(out.as_deref())?);
            let mut header = vec!["r", "opt_lower"];
            if upper {
                header.push("opt_upper");
            }
            w.write_record(&header)?;
            let cell = |x: Option<f64>| x.map_or("none".to_string(), |v| v.to_string());
            for p in &curve.points {
                let mut row = vec![p.r.to_string(), cell(p.lower)];
                if upper {
                    row.push(cell(p.upper));
                }
                w.write_record(&row)?;
            }
            w.flush()?;
            if let Some(r) = curve.terminated_at {
                log::info!("no robust zero from r = {r}: curve terminates");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Experiment(args) => {
            experiment::run(&args)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<robzero::Error>() {
        Some(robzero::Error::TooCoarse(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Some(t) = std::env::var("ROBZERO_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        par::init_threads(t);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
