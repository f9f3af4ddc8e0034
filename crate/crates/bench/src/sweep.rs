//! Experiment protocols: accuracy sweeps, timing sweeps, held-out
//! evaluation on a given matrix, and the spectrum report.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use circuit_completion::metrics::{bootstrap_ci, column_means, grid_mse, squared_errors};
use circuit_completion::par;
use circuit_completion::record::ExperimentRecord;
use circuit_completion::seed::derive_seed;
use circuit_completion::simgen::{delete_entries, draw, SimConfig};
use circuit_completion::spectral::{singular_vector_alignment, spectral_gaps};
use circuit_completion::{CompletionError, MaskedMatrix, Result};

use crate::methods::{Init, Method, MethodContext};

pub const BOOTSTRAP_ITERATIONS: usize = 1000;

fn invalid(msg: impl Into<String>) -> CompletionError {
    CompletionError::InvalidInput(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    ObserveProb,
    /// Values are missing probabilities; the draw observes with `1 − value`.
    MissingProb,
    NoiseLevel,
    /// Square matrices of the given side.
    Size,
}

impl SweepAxis {
    fn apply(self, base: &SimConfig, value: f64) -> Result<SimConfig> {
        let mut cfg = *base;
        match self {
            SweepAxis::ObserveProb => cfg.observe_prob = value,
            SweepAxis::MissingProb => cfg.observe_prob = 1.0 - value,
            SweepAxis::NoiseLevel => cfg.noise_level = value,
            SweepAxis::Size => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(invalid(format!("size {value} is not a positive integer")));
                }
                cfg.rows = value as usize;
                cfg.cols = value as usize;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl FromStr for SweepAxis {
    type Err = CompletionError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().replace('-', "_").as_str() {
            "observe_prob" => Ok(SweepAxis::ObserveProb),
            "missing_prob" => Ok(SweepAxis::MissingProb),
            "noise_level" => Ok(SweepAxis::NoiseLevel),
            "size" => Ok(SweepAxis::Size),
            other => Err(invalid(format!("unknown sweep axis `{other}`"))),
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::ObserveProb => "observe_prob",
            SweepAxis::MissingProb => "missing_prob",
            SweepAxis::NoiseLevel => "noise_level",
            SweepAxis::Size => "size",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub trials: usize,
    pub base: SimConfig,
    pub methods: Vec<Method>,
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(invalid("trials must be >= 1"));
        }
        if self.values.is_empty() {
            return Err(invalid("sweep has no axis values"));
        }
        if self.methods.is_empty() {
            return Err(invalid("sweep has no methods"));
        }
        if self.methods.contains(&Method::Riegel) {
            return Err(invalid("riegel needs column distances and cannot run on synthetic draws"));
        }
        for &v in &self.values {
            self.axis.apply(&self.base, v)?;
        }
        Ok(())
    }
}

/// Seed of trial `t`. Shared across axis values and methods, so every
/// comparison is paired.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    derive_seed(seed, &[trial as u64])
}

/// Bootstrap interval widened, if needed, to contain the sample mean: the
/// mean of resample means drifts from it by O(σ/√iterations).
fn interval(values: &[f64], mean: f64, seed: u64) -> Result<(f64, f64)> {
    let (lo, hi) = bootstrap_ci(values, BOOTSTRAP_ITERATIONS, seed)?;
    Ok((lo.min(mean), hi.max(mean)))
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Runs every method on `trials` draws per axis value.
///
/// Emits per-trial rows ordered by (axis value, trial, method), each value
/// followed by one aggregate row per method with the bootstrap interval of
/// the trial MSEs. Smcb, mos, vmclosure and the SVD baselines get the
/// simulation rank.
pub fn run_accuracy_sweep(spec: &SweepSpec, ctx: &MethodContext) -> Result<Vec<ExperimentRecord>> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> = (0..spec.values.len())
        .flat_map(|v| (0..spec.trials).map(move |t| (v, t)))
        .collect();
    let outcomes = par::map_slice(&jobs, |&(v, t)| -> Result<Vec<(f64, f64)>> {
        let seed = trial_seed(spec.seed, t);
        let cfg = spec.axis.apply(&spec.base, spec.values[v])?.with_seed(seed);
        let sim = draw(&cfg)?;
        let holes = sim.missing();
        if holes.is_empty() {
            return Err(invalid(format!("draw at {} = {} has no missing entries", spec.axis, spec.values[v])));
        }
        let trial_ctx = MethodContext { rank: Some(cfg.rank), seed, ..ctx.clone() };
        spec.methods
            .iter()
            .map(|m| {
                let start = Instant::now();
                let est = m.complete(&sim.observed, &trial_ctx)?;
                let seconds = start.elapsed().as_secs_f64();
                Ok((grid_mse(&sim.truth, &est, &holes)?, seconds))
            })
            .collect()
    });
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

    let axis = spec.axis.to_string();
    let mut records = Vec::new();
    for (v, &value) in spec.values.iter().enumerate() {
        let block = &outcomes[v * spec.trials..(v + 1) * spec.trials];
        for (t, row) in block.iter().enumerate() {
            for (m, &(mse, seconds)) in spec.methods.iter().zip(row) {
                records.push(ExperimentRecord {
                    method: m.to_string(),
                    axis: axis.clone(),
                    axis_value: value,
                    trial: Some(t),
                    mse,
                    ci_low: None,
                    ci_high: None,
                    runtime_seconds: seconds,
                    seed: trial_seed(spec.seed, t),
                });
            }
        }
        for (k, m) in spec.methods.iter().enumerate() {
            let mses: Vec<f64> = block.iter().map(|row| row[k].0).collect();
            let secs: Vec<f64> = block.iter().map(|row| row[k].1).collect();
            let mse = mean(&mses);
            let (lo, hi) = interval(&mses, mse, derive_seed(spec.seed, &[0xA66, v as u64, k as u64]))?;
            records.push(ExperimentRecord {
                method: m.to_string(),
                axis: axis.clone(),
                axis_value: value,
                trial: None,
                mse,
                ci_low: Some(lo),
                ci_high: Some(hi),
                runtime_seconds: mean(&secs),
                seed: spec.seed,
            });
        }
    }
    Ok(records)
}

/// Wall-clock timing: per method and size, one untimed warm-up run, then
/// the median of three timed runs. Records carry axis `size`, the MSE of
/// the last run on the missing cells, and the median seconds.
pub fn run_timing_sweep(
    sizes: &[usize],
    template: &SimConfig,
    methods: &[Method],
    seed: u64,
    ctx: &MethodContext,
) -> Result<Vec<ExperimentRecord>> {
    if sizes.is_empty() || methods.is_empty() {
        return Err(invalid("timing sweep needs sizes and methods"));
    }
    let mut records = Vec::new();
    for &n in sizes {
        let cfg = SimConfig { rows: n, cols: n, ..*template }.with_seed(derive_seed(seed, &[n as u64]));
        let sim = draw(&cfg)?;
        let run_ctx = MethodContext { rank: Some(cfg.rank), seed: cfg.seed, ..ctx.clone() };
        for m in methods {
            m.complete(&sim.observed, &run_ctx)?;
            let mut times = Vec::with_capacity(3);
            let mut last = None;
            for _ in 0..3 {
                let start = Instant::now();
                let est = m.complete(&sim.observed, &run_ctx)?;
                times.push(start.elapsed().as_secs_f64());
                last = Some(est);
            }
            times.sort_by(f64::total_cmp);
            let holes = sim.missing();
            let mse = match (last, holes.is_empty()) {
                (Some(est), false) => grid_mse(&sim.truth, &est, &holes)?,
                _ => 0.0,
            };
            records.push(ExperimentRecord {
                method: m.to_string(),
                axis: "size".into(),
                axis_value: n as f64,
                trial: None,
                mse,
                ci_low: None,
                ci_high: None,
                runtime_seconds: times[1],
                seed: cfg.seed,
            });
        }
    }
    Ok(records)
}

/// Writes the `method,n,seconds` timing table.
pub fn write_timing<W: Write>(w: W, records: &[ExperimentRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["method", "n", "seconds"])?;
    for r in records {
        wtr.write_record([r.method.clone(), (r.axis_value as usize).to_string(), r.runtime_seconds.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Hides `deletions` observed cells, completes with every method, and
/// scores the hidden cells after dividing each column by its mean over the
/// entries still observed.
pub fn run_realdata_eval(
    matrix: &MaskedMatrix,
    deletions: usize,
    methods: &[Method],
    ctx: &MethodContext,
    seed: u64,
) -> Result<Vec<ExperimentRecord>> {
    if methods.is_empty() {
        return Err(invalid("no methods given"));
    }
    for m in methods {
        m.check(matrix, ctx)?;
    }
    let (reduced, deleted) = delete_entries(matrix, deletions, seed)?;
    if deleted.is_empty() {
        return Err(invalid("deletions must be >= 1"));
    }
    let scales = column_means(&reduced);
    let run_ctx = MethodContext { seed, ..ctx.clone() };
    let mut records = Vec::with_capacity(methods.len());
    for (k, m) in methods.iter().enumerate() {
        let start = Instant::now();
        let est = m.complete(&reduced, &run_ctx)?;
        let seconds = start.elapsed().as_secs_f64();
        let errors = squared_errors(matrix.zero_filled(), &est, &deleted, Some(&scales))?;
        let mse = mean(&errors);
        let (lo, hi) = interval(&errors, mse, derive_seed(seed, &[0xB5, k as u64]))?;
        records.push(ExperimentRecord {
            method: m.to_string(),
            axis: "deletions".into(),
            axis_value: deletions as f64,
            trial: None,
            mse,
            ci_low: Some(lo),
            ci_high: Some(hi),
            runtime_seconds: seconds,
            seed,
        });
    }
    Ok(records)
}

/// One row of the spectrum report.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    pub seed: u64,
    /// `truth` or an init name.
    pub source: String,
    pub alignment_k2: f64,
    pub gaps: Vec<f64>,
}

/// Per seed: the truth's spectrum, then the spectrum of each init's
/// completion of the observed draw.
pub fn run_spectrum_report(
    config: &SimConfig,
    inits: &[Init],
    trials: usize,
    gaps: usize,
    seed: u64,
    ctx: &MethodContext,
) -> Result<Vec<SpectrumRow>> {
    if inits.is_empty() || trials == 0 || gaps == 0 {
        return Err(invalid("spectrum report needs inits, trials >= 1 and gaps >= 1"));
    }
    let blocks = par::map_range(trials, |t| -> Result<Vec<SpectrumRow>> {
        let s = trial_seed(seed, t);
        let sim = draw(&config.with_seed(s))?;
        let run_ctx = MethodContext { rank: Some(config.rank), seed: s, ..ctx.clone() };
        let mut grids = vec![("truth".to_string(), sim.truth.clone())];
        for init in inits {
            grids.push((init.to_string(), init.complete(&sim.observed, &run_ctx)?));
        }
        grids
            .into_iter()
            .map(|(source, g)| {
                Ok(SpectrumRow {
                    seed: s,
                    source,
                    alignment_k2: singular_vector_alignment(&g, &sim.truth, 2)?,
                    gaps: spectral_gaps(&g, gaps)?,
                })
            })
            .collect()
    });
    Ok(blocks.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect())
}

/// Wide CSV: `seed,source,alignment_k2,gap1..gapK`.
pub fn write_spectrum<W: Write>(w: W, rows: &[SpectrumRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let k = rows.first().map_or(0, |r| r.gaps.len());
    let mut header = vec!["seed".to_string(), "source".into(), "alignment_k2".into()];
    header.extend((1..=k).map(|i| format!("gap{i}")));
    wtr.write_record(&header)?;
    for r in rows {
        let mut line = vec![r.seed.to_string(), r.source.clone(), r.alignment_k2.to_string()];
        line.extend(r.gaps.iter().map(f64::to_string));
        wtr.write_record(&line)?;
    }
    wtr.flush()?;
    Ok(())
}
