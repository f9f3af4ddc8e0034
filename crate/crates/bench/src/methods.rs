//! Registry of completion methods runnable by name.
//!
//! Keys: `faccro`, `vmclosure`, `smcb(<init>)`, `mos(<init>)`, `svt`,
//! `optspace-like`, `meanfill-svd`, `zerofill-svd`, `riegel`. An init is
//! `faccro`, `vmclosure`, `meanfill`, or `smcb+<init>`, so the composition
//! mOS(SMCB(fACCRO)) is written `mos(smcb+faccro)`.

use std::fmt;
use std::str::FromStr;

use circuit_completion::baselines::{riegel_complete, svt_complete, SvtConfig};
use circuit_completion::rank1::faccro_all;
use circuit_completion::rankr::{vmclosure_all, ClosureConfig, WeightingMode};
use circuit_completion::seed::derive_seed;
use circuit_completion::spectral::{
    default_max_rank, estimate_rank, meanfill_svd, optspace_like, refine, smcb, zerofill_svd,
    RefineConfig,
};
use circuit_completion::{CompletionError, Grid, MaskedMatrix, Result};

fn invalid(msg: impl Into<String>) -> CompletionError {
    CompletionError::InvalidInput(msg.into())
}

/// Initial completion fed to the spectral methods.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Init {
    Faccro,
    Vmclosure,
    Meanfill,
    Smcb(Box<Init>),
}

impl FromStr for Init {
    type Err = CompletionError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("smcb+") {
            return Ok(Init::Smcb(Box::new(rest.parse()?)));
        }
        match s {
            "faccro" => Ok(Init::Faccro),
            "vmclosure" => Ok(Init::Vmclosure),
            "meanfill" => Ok(Init::Meanfill),
            other => Err(invalid(format!(
                "unknown init `{other}` (expected faccro, vmclosure, meanfill or smcb+<init>)"
            ))),
        }
    }
}

impl fmt::Display for Init {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Init::Faccro => f.write_str("faccro"),
            Init::Vmclosure => f.write_str("vmclosure"),
            Init::Meanfill => f.write_str("meanfill"),
            Init::Smcb(inner) => write!(f, "smcb+{inner}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Method {
    Faccro,
    Vmclosure,
    Smcb(Init),
    Mos(Init),
    Svt,
    OptspaceLike,
    MeanfillSvd,
    ZerofillSvd,
    Riegel,
}

impl FromStr for Method {
    type Err = CompletionError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let wrapped = |prefix: &str| {
            s.strip_prefix(prefix)
                .and_then(|r| r.strip_prefix('('))
                .and_then(|r| r.strip_suffix(')'))
        };
        if let Some(init) = wrapped("smcb") {
            return Ok(Method::Smcb(init.parse()?));
        }
        if let Some(init) = wrapped("mos") {
            return Ok(Method::Mos(init.parse()?));
        }
        match s {
            "faccro" => Ok(Method::Faccro),
            "vmclosure" => Ok(Method::Vmclosure),
            "svt" => Ok(Method::Svt),
            "optspace-like" => Ok(Method::OptspaceLike),
            "meanfill-svd" => Ok(Method::MeanfillSvd),
            "zerofill-svd" => Ok(Method::ZerofillSvd),
            "riegel" => Ok(Method::Riegel),
            "smcb" | "mos" => Err(invalid(format!("method `{s}` needs an init, e.g. {s}(faccro)"))),
            other => Err(invalid(format!("unknown method `{other}`"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Faccro => f.write_str("faccro"),
            Method::Vmclosure => f.write_str("vmclosure"),
            Method::Smcb(init) => write!(f, "smcb({init})"),
            Method::Mos(init) => write!(f, "mos({init})"),
            Method::Svt => f.write_str("svt"),
            Method::OptspaceLike => f.write_str("optspace-like"),
            Method::MeanfillSvd => f.write_str("meanfill-svd"),
            Method::ZerofillSvd => f.write_str("zerofill-svd"),
            Method::Riegel => f.write_str("riegel"),
        }
    }
}

/// Comma-separated method keys. Commas never occur inside a key.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let methods = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<Method>>>()?;
    if methods.is_empty() {
        return Err(invalid("method list is empty"));
    }
    Ok(methods)
}

/// Builds a method from the CLI's `--method` and `--init` pair. A full
/// key such as `smcb(faccro)` is accepted without `--init`.
pub fn method_with_init(name: &str, init: Option<&str>) -> Result<Method> {
    match (name.trim(), init) {
        ("smcb", Some(i)) => Ok(Method::Smcb(i.parse()?)),
        ("mos", Some(i)) => Ok(Method::Mos(i.parse()?)),
        (other, Some(_)) => Err(invalid(format!("method `{other}` takes no --init"))),
        (other, None) => other.parse(),
    }
}

/// Settings shared by every method invocation.
#[derive(Debug, Clone)]
pub struct MethodContext {
    /// Rank for rank-parametrised methods; estimated from the spectrum of
    /// the relevant fill when absent.
    pub rank: Option<usize>,
    pub iterations: usize,
    /// Defaults to multiplicative on positive data, additive otherwise.
    pub weighting: Option<WeightingMode>,
    pub distances: Option<Vec<f64>>,
    pub svt: SvtConfig,
    pub refine: RefineConfig,
    pub seed: u64,
}

impl Default for MethodContext {
    fn default() -> Self {
        MethodContext {
            rank: None,
            iterations: 50,
            weighting: None,
            distances: None,
            svt: SvtConfig::default(),
            refine: RefineConfig::new(1),
            seed: 0,
        }
    }
}

impl MethodContext {
    fn rank_for(&self, a: &MaskedMatrix, fill: &Grid) -> Result<usize> {
        match self.rank {
            Some(r) => Ok(r),
            None => estimate_rank(fill, default_max_rank(a)),
        }
    }

    fn closure_config(&self, a: &MaskedMatrix) -> Result<ClosureConfig> {
        let rank = self.rank_for(a, &a.mean_filled()?)?;
        let weighting = self.weighting.unwrap_or_else(|| WeightingMode::default_for(a));
        let mut cfg = ClosureConfig::new(rank, weighting);
        cfg.iterations = self.iterations;
        cfg.seed = self.seed;
        Ok(cfg)
    }
}

impl Init {
    fn needs_positive(&self, ctx: &MethodContext) -> bool {
        match self {
            Init::Faccro => true,
            Init::Vmclosure => ctx.weighting == Some(WeightingMode::Multiplicative),
            Init::Meanfill => false,
            Init::Smcb(inner) => inner.needs_positive(ctx),
        }
    }

    pub fn complete(&self, a: &MaskedMatrix, ctx: &MethodContext) -> Result<Grid> {
        match self {
            Init::Faccro => Ok(faccro_all(a)?.values),
            Init::Vmclosure => Ok(vmclosure_all(a, &ctx.closure_config(a)?)?.values),
            Init::Meanfill => a.mean_filled(),
            Init::Smcb(inner) => {
                let base = inner.complete(a, ctx)?;
                let rank = ctx.rank_for(a, &base)?;
                Ok(smcb(a, &base, rank)?.values)
            }
        }
    }
}

impl Method {
    /// Whether the method rejects non-positive observed data.
    pub fn needs_positive(&self, ctx: &MethodContext) -> bool {
        match self {
            Method::Faccro => true,
            Method::Vmclosure => Init::Vmclosure.needs_positive(ctx),
            Method::Smcb(init) | Method::Mos(init) => init.needs_positive(ctx),
            _ => false,
        }
    }

    /// Checks preconditions that do not require running the method.
    pub fn check(&self, a: &MaskedMatrix, ctx: &MethodContext) -> Result<()> {
        if self.needs_positive(ctx) {
            a.require_positive()?;
        }
        if *self == Method::Riegel {
            match &ctx.distances {
                None => return Err(invalid("riegel needs column distances (--distances)")),
                Some(d) if d.len() != a.cols() => {
                    return Err(invalid(format!(
                        "{} distances given for {} columns",
                        d.len(),
                        a.cols()
                    )))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    pub fn complete(&self, a: &MaskedMatrix, ctx: &MethodContext) -> Result<Grid> {
        self.check(a, ctx)?;
        match self {
            Method::Faccro => Init::Faccro.complete(a, ctx),
            Method::Vmclosure => Init::Vmclosure.complete(a, ctx),
            Method::Smcb(init) => Init::Smcb(Box::new(init.clone())).complete(a, ctx),
            Method::Mos(init) => {
                let start = init.complete(a, ctx)?;
                let rank = ctx.rank_for(a, &start)?;
                Ok(refine(a, &start, &RefineConfig { rank, ..ctx.refine })?.values)
            }
            Method::Svt => svt_complete(a, &ctx.svt, derive_seed(ctx.seed, &[0x57])),
            Method::OptspaceLike => Ok(optspace_like(a, &ctx.refine)?.values),
            Method::MeanfillSvd => {
                let fill = a.mean_filled()?;
                meanfill_svd(a, ctx.rank_for(a, &fill)?)
            }
            Method::ZerofillSvd => {
                let fill = a.mean_filled()?;
                zerofill_svd(a, ctx.rank_for(a, &fill)?)
            }
            Method::Riegel => {
                let distances = ctx.distances.as_deref().expect("checked above");
                Ok(riegel_complete(a, distances)?.values)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_roundtrip() {
        for key in [
            "faccro",
            "vmclosure",
            "smcb(faccro)",
            "smcb(meanfill)",
            "mos(smcb+faccro)",
            "mos(smcb+smcb+vmclosure)",
            "svt",
            "optspace-like",
            "meanfill-svd",
            "zerofill-svd",
            "riegel",
        ] {
            let m: Method = key.parse().unwrap();
            assert_eq!(m.to_string(), key);
        }
    }

    #[test]
    fn unknown_names_rejected() {
        for bad in ["nuclear", "smcb", "mos()", "smcb(svt)", "smcb+faccro", "mos(smcb+)"] {
            assert!(bad.parse::<Method>().is_err(), "{bad}");
        }
        assert!(parse_methods("faccro,bogus").is_err());
        assert!(parse_methods(" , ").is_err());
    }

    #[test]
    fn cli_pair_builds_composites() {
        assert_eq!(
            method_with_init("mos", Some("smcb+faccro")).unwrap(),
            Method::Mos(Init::Smcb(Box::new(Init::Faccro)))
        );
        assert_eq!(method_with_init("smcb(faccro)", None).unwrap(), Method::Smcb(Init::Faccro));
        assert!(method_with_init("svt", Some("faccro")).is_err());
    }

    #[test]
    fn positivity_is_checked_up_front() {
        let a = MaskedMatrix::from_rows(&[vec![Some(1.0), Some(-2.0)], vec![Some(3.0), None]])
            .unwrap();
        let ctx = MethodContext::default();
        let err = Method::Smcb(Init::Faccro).check(&a, &ctx).unwrap_err();
        assert!(matches!(err, CompletionError::NonPositive { row: 0, col: 1, .. }));
        assert!(Method::Smcb(Init::Meanfill).check(&a, &ctx).is_ok());
        assert!(Method::Riegel.check(&a, &ctx).is_err());
    }
}
