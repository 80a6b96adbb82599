//! `pcs`: sketch building, querying, noise calibration, and the
//! experiment harness. Every failure exits nonzero with one
//! machine-parsable line on stderr: `error: <kind>: <message>`.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pcs_cli::experiments::{ExperimentConfig, ExperimentId};
use pcs_core::datasets::Dataset;
use pcs_core::privacy::{self, NoiseSpec};
use pcs_core::seeds;
use pcs_core::sketch::Estimator;
use pcs_core::{HashFamily, Result, Sketch, SketchParams, Variant};

#[derive(Parser)]
#[command(name = "pcs", version, about = "CountSketch and Private CountSketch toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the Gaussian noise scale and zCDP cost for a k-row sketch.
    Calibrate {
        /// Privacy parameter epsilon, in (0, 1].
        #[arg(long)]
        eps: f64,
        /// Privacy parameter delta, in (0, 1).
        #[arg(long)]
        delta: f64,
        /// Number of repetitions (hash table rows).
        #[arg(long)]
        k: usize,
    },
    /// Build a sketch from a dataset file and serialize it.
    Sketch(SketchArgs),
    /// Load a serialized sketch and estimate coordinates.
    Query(QueryArgs),
    /// Run an error-distribution experiment and emit CSV.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    /// `city,population` CSV with a header row.
    Cities,
    /// One whitespace-separated basket of integer ids per line.
    Transactions,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Countsketch,
    Countmin,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Variant {
        match v {
            VariantArg::Countsketch => Variant::CountSketch,
            VariantArg::Countmin => Variant::CountMin,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Median,
    Mean,
    Min,
}

impl From<EstimatorArg> for Estimator {
    fn from(e: EstimatorArg) -> Estimator {
        match e {
            EstimatorArg::Median => Estimator::Median,
            EstimatorArg::Mean => Estimator::Mean,
            EstimatorArg::Min => Estimator::Min,
        }
    }
}

#[derive(Args)]
struct SketchArgs {
    /// Dataset file to sketch.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    format: InputFormat,
    /// Basket-size cap applied to transaction files.
    #[arg(long, default_value_t = 100)]
    max_basket: usize,
    /// Repetitions (odd).
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Buckets per row (even).
    #[arg(long, default_value_t = 1000)]
    b: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = VariantArg::Countsketch)]
    variant: VariantArg,
    /// Per-cell Gaussian noise scale; omit (or 0) for a plain sketch.
    #[arg(long)]
    sigma: Option<f64>,
    /// Output file for the serialized sketch.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct QueryArgs {
    /// Serialized sketch file.
    #[arg(long)]
    sketch: PathBuf,
    /// Comma-separated coordinates to estimate.
    #[arg(long, value_delimiter = ',', required = true)]
    indices: Vec<usize>,
    /// Estimator override; defaults to the variant's own (median for
    /// CountSketch, min for Count-Min).
    #[arg(long, value_enum)]
    estimator: Option<EstimatorArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum IdArg {
    #[value(name = "median_normals")]
    MedianNormals,
    #[value(name = "zero_variance")]
    ZeroVariance,
    #[value(name = "sparse")]
    Sparse,
    #[value(name = "cities")]
    Cities,
    #[value(name = "baskets")]
    Baskets,
}

impl From<IdArg> for ExperimentId {
    fn from(id: IdArg) -> ExperimentId {
        match id {
            IdArg::MedianNormals => ExperimentId::MedianNormals,
            IdArg::ZeroVariance => ExperimentId::ZeroVariance,
            IdArg::Sparse => ExperimentId::Sparse,
            IdArg::Cities => ExperimentId::Cities,
            IdArg::Baskets => ExperimentId::Baskets,
        }
    }
}

#[derive(Args)]
struct ExperimentArgs {
    /// Which experiment to run.
    #[arg(value_enum)]
    id: IdArg,
    /// Comma-separated repetition counts to sweep (odd).
    #[arg(long = "k", value_delimiter = ',')]
    k: Option<Vec<usize>>,
    /// Buckets per row.
    #[arg(long)]
    b: Option<usize>,
    /// Total sketch cell budget (b = kb/k).
    #[arg(long)]
    kb: Option<usize>,
    /// Direct per-cell noise scale.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Monte Carlo trials (synthetic experiments; datasets are a single
    /// pass).
    #[arg(long)]
    trials: Option<usize>,
    /// Master seed; fixes every byte of the output.
    #[arg(long)]
    seed: Option<u64>,
    /// Sparsity for the sparse experiment.
    #[arg(long)]
    t: Option<usize>,
    /// Entry value for the sparse experiment.
    #[arg(long)]
    value: Option<f64>,
    /// Ambient dimension for the sparse experiment (default 10*t).
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    dataset_path: Option<PathBuf>,
    /// Basket-size cap when loading transactions.
    #[arg(long)]
    max_basket: Option<usize>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}: {}", err.kind(), err);
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Calibrate { eps, delta, k } => {
            let sigma = privacy::calibrate_gaussian(eps, delta, k)?;
            println!("sigma={}", sigma);
            println!("rho={}", privacy::zcdp_of(sigma, k)?);
            Ok(())
        }
        Command::Sketch(args) => {
            let dataset = match args.format {
                InputFormat::Cities => Dataset::load_cities_csv(&args.input)?,
                InputFormat::Transactions => {
                    Dataset::load_transactions(&args.input, args.max_basket)?
                }
            };
            let params = SketchParams::new(dataset.vector().dim(), args.k, args.b, args.seed)?;
            let family = Arc::new(HashFamily::build(params)?);
            let mut sketch = Sketch::of_vector(dataset.vector(), family, args.variant.into())?;
            let sigma = args.sigma.unwrap_or(0.0);
            if sigma != 0.0 {
                privacy::privatize(
                    &mut sketch,
                    &NoiseSpec::gaussian(sigma)?,
                    seeds::derive(args.seed, 1),
                )?;
            }
            let mut writer = BufWriter::new(File::create(&args.out)?);
            sketch.write_to(&mut writer)?;
            writer.flush()?;
            println!("dataset={}", dataset.name());
            println!("distinct_ids={}", dataset.distinct_ids());
            println!("total_count={}", dataset.total_count());
            println!("d={} k={} b={} seed={}", dataset.vector().dim(), args.k, args.b, args.seed);
            println!("sigma={}", sigma);
            println!("out={}", args.out.display());
            Ok(())
        }
        Command::Query(args) => {
            let sketch = Sketch::read_from(BufReader::new(File::open(&args.sketch)?))?;
            let estimates = match args.estimator {
                Some(e) => sketch.estimate_all_with(&args.indices, e.into())?,
                None => sketch.estimate_all(&args.indices)?,
            };
            println!("index,estimate");
            for (index, estimate) in args.indices.iter().zip(estimates) {
                println!("{},{}", index, estimate);
            }
            Ok(())
        }
        Command::Experiment(args) => {
            let mut config = ExperimentConfig::new(args.id.into());
            if let Some(k) = args.k {
                config.k_set = k;
            }
            if let Some(trials) = args.trials {
                config.trials = trials;
            }
            if let Some(seed) = args.seed {
                config.seed = seed;
            }
            config.b = args.b;
            config.kb = args.kb;
            config.sigma = args.sigma;
            config.epsilon = args.eps;
            config.delta = args.delta;
            config.t = args.t;
            config.value = args.value;
            config.d = args.d;
            config.dataset_path = args.dataset_path;
            config.max_basket = args.max_basket;
            let csv = config.run()?.to_csv();
            match args.out {
                Some(path) => {
                    fs::write(&path, csv)?;
                    println!("wrote {}", path.display());
                }
                None => print!("{}", csv),
            }
            Ok(())
        }
    }
}
