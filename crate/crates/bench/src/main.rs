use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use circuit_bench::methods::{method_with_init, parse_methods, Init, MethodContext};
use circuit_bench::sweep::{
    run_accuracy_sweep, run_realdata_eval, run_spectrum_report, run_timing_sweep, write_spectrum,
    write_timing, SweepAxis, SweepSpec,
};
use circuit_completion::io::{read_matrix, write_mask_to, write_matrix_to};
use circuit_completion::rankr::WeightingMode;
use circuit_completion::record::write_records;
use circuit_completion::simgen::{draw, NoiseKind, SimConfig};

#[derive(Parser)]
#[command(name = "circuit-bench", version, about = "Low-rank completion benchmarks")]
struct Cli {
    /// Base seed; every draw and sampler derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 20)]
    trials: usize,
    /// Input matrix CSVs start with a header line.
    #[arg(long, global = true)]
    header: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SimArgs {
    #[arg(long, default_value_t = 50)]
    rows: usize,
    #[arg(long, default_value_t = 50)]
    cols: usize,
    #[arg(long, default_value_t = 2)]
    rank: usize,
    /// Probability that an entry is observed.
    #[arg(long, default_value_t = 0.5)]
    observe_prob: f64,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value = "multiplicative")]
    noise_kind: NoiseKind,
}

impl SimArgs {
    fn config(&self, seed: u64) -> SimConfig {
        SimConfig {
            rows: self.rows,
            cols: self.cols,
            rank: self.rank,
            observe_prob: self.observe_prob,
            noise_level: self.noise,
            noise_kind: self.noise_kind,
            seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic matrix; writes the observed matrix, `<out>.mask.csv`
    /// and `<out>.truth.csv`.
    Simulate {
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Complete a matrix CSV with one method.
    Complete {
        #[arg(long)]
        input: PathBuf,
        /// faccro, vmclosure, smcb, mos, svt, optspace-like, meanfill-svd,
        /// zerofill-svd, riegel
        #[arg(long)]
        method: String,
        /// Init for smcb / mos: faccro, vmclosure, meanfill, smcb+<init>.
        #[arg(long)]
        init: Option<String>,
        /// Estimated from the singular values when absent.
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long, default_value_t = 50)]
        iterations: usize,
        #[arg(long)]
        weighting: Option<WeightingMode>,
        /// Column distances for riegel, comma separated.
        #[arg(long)]
        distances: Option<String>,
    },
    /// Accuracy over an axis of simulation settings.
    SweepAccuracy {
        /// observe-prob, missing-prob, noise-level or size.
        #[arg(long, default_value = "observe-prob")]
        axis: SweepAxis,
        #[arg(long, default_value = "0.3,0.5,0.7,0.9")]
        values: String,
        #[arg(long, default_value = "svt,optspace-like,smcb(faccro),vmclosure,mos(smcb+faccro)")]
        methods: String,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Wall-clock time per method and size (median of 3 after a warm-up).
    SweepTiming {
        #[arg(long, default_value = "20,50,100,150")]
        sizes: String,
        #[arg(long, default_value = "smcb(faccro),svt,optspace-like")]
        methods: String,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Hide observed entries of a matrix CSV and score their completion.
    EvalReal {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 100)]
        deletions: usize,
        #[arg(long, default_value = "optspace-like,smcb(faccro),mos(smcb+faccro)")]
        methods: String,
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long)]
        distances: Option<String>,
    },
    /// Singular-value gaps and second-vector alignment per init.
    Spectrum {
        #[arg(long, default_value = "faccro,meanfill")]
        inits: String,
        #[arg(long, default_value_t = 5)]
        gaps: usize,
        #[command(flatten)]
        sim: SimArgs,
    },
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse::<T>().map_err(|e| anyhow::anyhow!("bad {what} `{p}`: {e}")))
        .collect()
}

fn output(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn sidecar(out: &Path, tag: &str) -> PathBuf {
    let s = out.to_string_lossy();
    let stem = s.strip_suffix(".csv").unwrap_or(&s);
    PathBuf::from(format!("{stem}.{tag}.csv"))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Simulate { sim } => {
            let Some(out) = &cli.out else { bail!("simulate needs --out") };
            let d = draw(&sim.config(cli.seed))?;
            write_matrix_to(
                output(&cli.out)?,
                d.observed.zero_filled(),
                Some(d.observed.mask()),
            )?;
            write_mask_to(output(&Some(sidecar(out, "mask")))?, d.observed.mask())?;
            write_matrix_to(output(&Some(sidecar(out, "truth")))?, &d.truth, None)?;
        }
        Command::Complete { input, method, init, rank, iterations, weighting, distances } => {
            let method = method_with_init(method, init.as_deref())?;
            let a = read_matrix(input, cli.header)
                .with_context(|| format!("reading {}", input.display()))?;
            let ctx = MethodContext {
                rank: *rank,
                iterations: *iterations,
                weighting: *weighting,
                distances: distances.as_deref().map(|d| parse_list(d, "distance")).transpose()?,
                seed: cli.seed,
                ..MethodContext::default()
            };
            let done = method.complete(&a, &ctx)?;
            write_matrix_to(output(&cli.out)?, &done, None)?;
        }
        Command::SweepAccuracy { axis, values, methods, sim } => {
            let spec = SweepSpec {
                axis: *axis,
                values: parse_list(values, "axis value")?,
                trials: cli.trials,
                base: sim.config(cli.seed),
                methods: parse_methods(methods)?,
                seed: cli.seed,
            };
            let records = run_accuracy_sweep(&spec, &MethodContext::default())?;
            write_records(output(&cli.out)?, &records)?;
        }
        Command::SweepTiming { sizes, methods, sim } => {
            let sizes: Vec<usize> = parse_list(sizes, "size")?;
            let records = run_timing_sweep(
                &sizes,
                &sim.config(cli.seed),
                &parse_methods(methods)?,
                cli.seed,
                &MethodContext::default(),
            )?;
            write_timing(output(&cli.out)?, &records)?;
        }
        Command::EvalReal { input, deletions, methods, rank, distances } => {
            let methods = parse_methods(methods)?;
            let a = read_matrix(input, cli.header)
                .with_context(|| format!("reading {}", input.display()))?;
            let ctx = MethodContext {
                rank: *rank,
                distances: distances.as_deref().map(|d| parse_list(d, "distance")).transpose()?,
                ..MethodContext::default()
            };
            let records = run_realdata_eval(&a, *deletions, &methods, &ctx, cli.seed)?;
            write_records(output(&cli.out)?, &records)?;
        }
        Command::Spectrum { inits, gaps, sim } => {
            let inits: Vec<Init> = parse_list(inits, "init")?;
            let rows = run_spectrum_report(
                &sim.config(cli.seed),
                &inits,
                cli.trials,
                *gaps,
                cli.seed,
                &MethodContext::default(),
            )?;
            write_spectrum(output(&cli.out)?, &rows)?;
        }
    }
    Ok(())
}
