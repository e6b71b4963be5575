use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gravkernel::calculus::{BoundDocument, Schedule};
use gravkernel::gravity::SampleParams;
use gravkernel::harness::{
    cmd_bounds, cmd_fit, cmd_gen_data, cmd_kernel_coeffs, cmd_sweep, default_out_dir, write_atomic,
    BoundRequest, BoundSpec, FitOptions, GenDataOptions, ModelSpec, SeriesSpec, SweepConfig,
    OUT_DIR_ENV,
};
use gravkernel::kernels::{Activation, KernelKind, McSpec, DEFAULT_PREFIX};
use gravkernel::regression::results_header;
use gravkernel::{Exec, Result};

#[derive(Parser)]
#[command(
    name = "gravkernel",
    version,
    about = "Kernel learnability bounds and the k-body force experiment"
)]
struct Cli {
    /// Run every loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a k-body dataset and write it with a metadata sidecar.
    GenData(GenDataArgs),
    /// Fit one model on a dataset, holding out the last 10% of rows.
    Fit(FitArgs),
    /// Run the RMSE-versus-k sweep.
    Sweep(SweepArgs),
    /// Evaluate a learnability bound.
    #[command(subcommand)]
    Bounds(BoundsCommand),
    /// Print the power-series coefficients of a kernel.
    KernelCoeffs(KernelCoeffsArgs),
}

#[derive(Args)]
struct Geometry {
    #[arg(long, default_value_t = 0.1)]
    min_dist: f64,
    #[arg(long, default_value_t = 10.0)]
    mass_max: f64,
}

impl Geometry {
    fn params(&self) -> SampleParams {
        SampleParams {
            min_dist: self.min_dist,
            mass_max: self.mass_max,
        }
    }
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(short = 'k', long)]
    bodies: usize,
    #[arg(long)]
    examples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    geometry: Geometry,
    /// Defaults to a file in $GRAVKERNEL_OUT_DIR.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelFamily {
    Kernel,
    Net,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelName {
    ModifiedRelu,
    Gaussian,
    ReluMc,
    SlowDecay,
}

#[derive(Clone, Copy, ValueEnum)]
enum ActivationName {
    Relu,
    Exp,
}

impl From<ActivationName> for Activation {
    fn from(a: ActivationName) -> Self {
        match a {
            ActivationName::Relu => Activation::Relu,
            ActivationName::Exp => Activation::Exponential,
        }
    }
}

#[derive(Args)]
struct KernelChoice {
    #[arg(long, value_enum, default_value_t = KernelName::ModifiedRelu)]
    kernel: KernelName,
    /// Sphere radius of the Gaussian kernel.
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Decay exponent of the slow-decay kernel.
    #[arg(long, default_value_t = 2.0)]
    exponent: f64,
}

impl KernelChoice {
    fn kind(&self, width: usize, seed: u64) -> KernelKind {
        match self.kernel {
            KernelName::ModifiedRelu => KernelKind::ModifiedRelu,
            KernelName::Gaussian => KernelKind::GaussianOnSphere {
                radius: self.radius,
            },
            KernelName::ReluMc => {
                KernelKind::MonteCarlo(McSpec::new(Activation::Relu, width, 1.0, seed))
            }
            KernelName::SlowDecay => KernelKind::SlowDecay {
                exponent: self.exponent,
            },
        }
    }
}

#[derive(Args)]
struct FitArgs {
    /// Dataset written by gen-data.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelFamily::Kernel)]
    model: ModelFamily,
    #[command(flatten)]
    kernel: KernelChoice,
    #[arg(long, value_enum, default_value_t = ActivationName::Relu)]
    activation: ActivationName,
    /// Give the hidden layer a random bias.
    #[arg(long)]
    bias: bool,
    #[arg(long, default_value_t = 1000)]
    width: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Project network inputs onto the unit sphere.
    #[arg(long)]
    normalize_inputs: bool,
    /// Results file to append to.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated body counts.
    #[arg(short = 'k', long, default_value = "5,10,20", value_delimiter = ',')]
    bodies: Vec<usize>,
    #[arg(long, default_value_t = 50_000)]
    n_train: usize,
    #[arg(long, default_value_t = 5_000)]
    n_test: usize,
    /// Comma-separated model names.
    #[arg(
        long,
        default_value = "relu-net,relu-bias-net,exp-net",
        value_delimiter = ','
    )]
    models: Vec<ModelSpec>,
    #[arg(long, default_value_t = 1000)]
    width: usize,
    #[arg(long, default_value = "0,1,2", value_delimiter = ',')]
    seeds: Vec<u64>,
    #[command(flatten)]
    geometry: Geometry,
    #[arg(long)]
    normalize_inputs: bool,
    /// Defaults to sweep.csv in $GRAVKERNEL_OUT_DIR.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundOutput {
    /// Confidence parameter δ.
    #[arg(long)]
    delta: Option<f64>,
    /// Target error ε for the sample-size estimate.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Also write the JSON document here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BoundsCommand {
    /// Bound for one force component of the k-body problem.
    Gravity {
        /// Distance ratio r_max / r_min.
        #[arg(long = "R")]
        ratio: f64,
        #[arg(short = 'k', long = "k", visible_alias = "bodies")]
        k: u32,
        #[arg(long)]
        eps: f64,
        #[arg(long, value_enum, default_value_t = KernelName::ModifiedRelu)]
        kernel: KernelName,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[command(flatten)]
        output: BoundOutput,
    },
    /// Bound for g(β·x) from the coefficients of g; a trailing `...`
    /// continues them geometrically.
    Univariate {
        #[arg(long, allow_hyphen_values = true)]
        coeffs: String,
        #[arg(long)]
        beta: f64,
        #[command(flatten)]
        output: BoundOutput,
    },
    /// Bound for a JSON rule description (inline or `@file`).
    Compose {
        spec: String,
        #[command(flatten)]
        output: BoundOutput,
    },
}

#[derive(Args)]
struct KernelCoeffsArgs {
    #[command(flatten)]
    kernel: KernelChoice,
    #[arg(long, default_value_t = DEFAULT_PREFIX)]
    k_max: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn bound_request(cmd: &BoundsCommand) -> Result<(BoundRequest, &BoundOutput)> {
    let with = |spec, output: &'_ BoundOutput| BoundRequest {
        spec,
        delta: output.delta,
        epsilon: output.epsilon,
    };
    Ok(match cmd {
        BoundsCommand::Gravity {
            ratio,
            k,
            eps,
            kernel,
            radius,
            output,
        } => {
            let kernel = match kernel {
                KernelName::ModifiedRelu => None,
                KernelName::Gaussian => Some(Schedule::Gaussian { radius: *radius }),
                other => {
                    return Err(gravkernel::Error::Unsupported(format!(
                        "gravity bounds support modified-relu and gaussian kernels, not {}",
                        other.to_possible_value().expect("named").get_name()
                    )))
                }
            };
            let spec = BoundSpec::Gravity {
                ratio: *ratio,
                k: *k,
                eps: *eps,
                kernel,
            };
            (with(spec, output), output)
        }
        BoundsCommand::Univariate {
            coeffs,
            beta,
            output,
        } => {
            let s = SeriesSpec::parse_list(coeffs, 1.0)?;
            let spec = BoundSpec::Univariate {
                coeffs: s.coeffs,
                beta: *beta,
                radius: s.radius,
            };
            (with(spec, output), output)
        }
        BoundsCommand::Compose { spec, output } => {
            let text = match spec.strip_prefix('@') {
                Some(path) => std::fs::read_to_string(path)
                    .map_err(|e| gravkernel::Error::io(Path::new(path), e))?,
                None => spec.clone(),
            };
            let mut request = BoundRequest::from_json(&text)?;
            request.delta = output.delta.or(request.delta);
            request.epsilon = output.epsilon.or(request.epsilon);
            (request, output)
        }
    })
}

fn run(cli: Cli) -> Result<()> {
    let exec = if cli.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    };
    match cli.command {
        Command::GenData(a) => {
            let out = cmd_gen_data(
                &GenDataOptions {
                    k: a.bodies,
                    examples: a.examples,
                    seed: a.seed,
                    params: a.geometry.params(),
                    out: a.out,
                },
                exec,
            )?;
            println!("wrote {} rows to {}", out.rows, out.data.display());
        }
        Command::Fit(a) => {
            let model = match a.model {
                ModelFamily::Kernel => ModelSpec::Kernel(a.kernel.kind(a.width, a.seed)),
                ModelFamily::Net => ModelSpec::Net {
                    activation: a.activation.into(),
                    bias: a.bias,
                },
            };
            let row = cmd_fit(
                &FitOptions {
                    data: a.data,
                    model,
                    width: a.width,
                    seed: a.seed,
                    normalize_inputs: a.normalize_inputs,
                    out: a.out,
                },
                exec,
            )?;
            println!("{}\n{}", results_header(), row.to_csv());
        }
        Command::Sweep(a) => {
            let config = SweepConfig {
                k_list: a.bodies,
                n_train: a.n_train,
                n_test: a.n_test,
                models: a.models,
                width: a.width,
                seeds: a.seeds,
                out: a.out.unwrap_or_else(|| default_out_dir().join("sweep.csv")),
                params: a.geometry.params(),
                normalize_inputs: a.normalize_inputs,
            };
            let rows = cmd_sweep(&config, exec)?;
            println!("{}", results_header());
            for r in rows.iter().filter(|r| r.seed.is_none()) {
                println!("{}", r.to_csv());
            }
            eprintln!("wrote {} rows to {}", rows.len(), config.out.display());
        }
        Command::Bounds(cmd) => {
            let (request, output) = bound_request(&cmd)?;
            let doc: BoundDocument = cmd_bounds(&request)?;
            let json = doc.to_json();
            if let Some(path) = &output.out {
                write_atomic(path, json.as_bytes())?;
            }
            println!("{json}");
        }
        Command::KernelCoeffs(a) => {
            let table = cmd_kernel_coeffs(&a.kernel.kind(1000, 0), a.k_max, a.out.as_deref())?;
            if a.out.is_none() {
                print!("{table}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    log::debug!(
        "default output directory from ${OUT_DIR_ENV}: {}",
        default_out_dir().display()
    );
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
