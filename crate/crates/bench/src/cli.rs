use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use fastconv::Precision;

use crate::accuracy::{check_nonzero, run_accuracy, AccuracyOptions};
use crate::algo::parse_list;
use crate::gen::run_gen;
use crate::report::{emit, Format};
use crate::suite::{LayerSuite, VGG_ACCURACY_LAYERS};
use crate::tables::{complexity_rows, layer_costs, TableKind};
use crate::timing::{run_bench, BenchOptions};
use crate::BenchError;

#[derive(Debug, Parser)]
#[command(name = "fastconv", version, about = "Fast convolution accuracy, complexity and timing runs")]
pub struct Cli {
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Maximum element error against an fp64 direct oracle.
    Accuracy {
        /// `vgg-e` or a JSON suite file.
        #[arg(long, default_value = "vgg-e")]
        suite: String,
        /// Comma-separated subset of direct, f2x2, f4x4, fft.
        #[arg(long, default_value = "direct,f2x2,f4x4")]
        algos: String,
        #[arg(long, default_value = "fp32")]
        precision: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Spatial scale in (0, 1].
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Scale channel counts too.
        #[arg(long)]
        scale_channels: bool,
        /// Comma-separated layer labels (vgg-e defaults to the five accuracy layers).
        #[arg(long)]
        layers: Option<String>,
        /// Run with all-zero filters.
        #[arg(long)]
        zero_filters: bool,
    },
    /// Normalized arithmetic complexity tables.
    Complexity {
        #[arg(value_enum)]
        table: TableKind,
        #[arg(long, default_value = "vgg-e")]
        suite: String,
    },
    /// Best-of-N wall time and effective GFLOPS per layer.
    Bench {
        #[arg(long, default_value = "vgg-e")]
        suite: String,
        #[arg(long, default_value = "direct,f2x2,f4x4")]
        algos: String,
        #[arg(long, default_value_t = 1)]
        batch: usize,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long)]
        layers: Option<String>,
        /// Skip layers estimated to need more memory than this.
        #[arg(long, default_value_t = 2048)]
        mem_budget_mb: usize,
    },
    /// Generate, print and self-check a minimal filtering algorithm F(m, r).
    Gen {
        m: usize,
        r: usize,
        /// Comma-separated interpolation points, e.g. `0,1,-1,inf`.
        #[arg(long)]
        points: Option<String>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn split_labels(s: &str) -> Vec<String> {
    s.split(',').map(|l| l.trim().to_string()).filter(|l| !l.is_empty()).collect()
}

fn pick_layers(suite: LayerSuite, layers: Option<&str>, accuracy: bool) -> Result<LayerSuite, BenchError> {
    match layers {
        Some(l) => suite.select(&split_labels(l)),
        None if accuracy && suite.name == "vgg-e" => {
            suite.select(&VGG_ACCURACY_LAYERS.map(String::from))
        }
        None => Ok(suite),
    }
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), BenchError> {
    match cli.command {
        Command::Accuracy { suite, algos, precision, seed, scale, scale_channels, layers, zero_filters } => {
            let precision: Precision = precision.parse().map_err(|e: fastconv::ConvError| BenchError::Usage(e.to_string()))?;
            let suite = pick_layers(LayerSuite::load(&suite)?, layers.as_deref(), true)?;
            let opts = AccuracyOptions { algos: parse_list(&algos)?, precision, seed, scale, scale_channels, zero_filters };
            let rows = run_accuracy(&suite, &opts)?;
            emit(&rows, Some(seed), cli.format, out)?;
            if !zero_filters {
                check_nonzero(&rows)?;
            }
        }
        Command::Complexity { table, suite } => match table {
            TableKind::LayerCosts => emit(&layer_costs(&LayerSuite::load(&suite)?), None, cli.format, out)?,
            kind => emit(&complexity_rows(kind), None, cli.format, out)?,
        },
        Command::Bench { suite, algos, batch, repeats, seed, scale, layers, mem_budget_mb } => {
            let suite = pick_layers(LayerSuite::load(&suite)?, layers.as_deref(), false)?;
            let opts = BenchOptions {
                algos: parse_list(&algos)?,
                batch,
                repeats,
                seed,
                scale,
                mem_budget: mem_budget_mb << 20,
            };
            let mut notices = Vec::new();
            let rows = run_bench(&suite, &opts, &mut notices)?;
            for n in &notices {
                writeln!(err, "{n}")?;
            }
            emit(&rows, Some(seed), cli.format, out)?;
        }
        Command::Gen { m, r, points, trials, seed } => match run_gen(m, r, points.as_deref(), trials, seed) {
            Ok(text) => out.write_all(text.as_bytes())?,
            Err(e) => {
                if let BenchError::Verification(text) = &e {
                    out.write_all(text.as_bytes())?;
                }
                return Err(e);
            }
        },
    }
    Ok(())
}

/// Runs the command line `args` (program name first) and returns the exit
/// code: 0 on success, 1 on usage errors, 2 on failed self-checks.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { crate::EXIT_USAGE } else { 0 };
        }
    };
    let (mut obuf, mut ebuf) = (Vec::new(), Vec::new());
    let out_path = cli.out.clone();
    let result = match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| BenchError::Usage(e.to_string()))
            .and_then(|pool| pool.install(|| execute(cli, &mut obuf, &mut ebuf))),
        None => execute(cli, &mut obuf, &mut ebuf),
    };
    let _ = err.write_all(&ebuf);
    let written = match out_path {
        Some(path) => File::create(path).and_then(|mut f| f.write_all(&obuf)),
        None => out.write_all(&obuf),
    };
    let result = result.and(written.map_err(BenchError::from));
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn main_exit_code() -> i32 {
    let (stdout, stderr) = (io::stdout(), io::stderr());
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
