//! Textual model specifications used by the command-line surface.
//!
//! Scale-bearing parameters accept literal numbers or data-relative forms:
//! `2s` means twice the data diameter, `2s2` twice the squared diameter.
//! Relative forms resolve against the preprocessed dataset.

use crate::model::{DistanceKind, KernelKind, ModelConfig, PenaltyVariant, Topology, WeightKind};
use crate::eval::Preprocess;

/// A parameter that may be expressed relative to the data diameter sigma.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamValue {
    Literal(f64),
    /// Coefficient times sigma.
    Sigma(f64),
    /// Coefficient times sigma squared.
    SigmaSq(f64),
}

impl ParamValue {
    pub fn parse(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if let Some(coeff) = s.strip_suffix("s2") {
            let k: f64 = coeff.parse().map_err(|_| format!("bad coefficient in {s:?}"))?;
            return Ok(ParamValue::SigmaSq(k));
        }
        if let Some(coeff) = s.strip_suffix('s') {
            let k: f64 = coeff.parse().map_err(|_| format!("bad coefficient in {s:?}"))?;
            return Ok(ParamValue::Sigma(k));
        }
        let v: f64 = s.parse().map_err(|_| format!("bad number {s:?}"))?;
        Ok(ParamValue::Literal(v))
    }

    pub fn needs_sigma(&self) -> bool {
        !matches!(self, ParamValue::Literal(_))
    }

    pub fn resolve(&self, sigma: f64) -> f64 {
        match *self {
            ParamValue::Literal(v) => v,
            ParamValue::Sigma(k) => k * sigma,
            ParamValue::SigmaSq(k) => k * sigma * sigma,
        }
    }
}

/// Weight function with unresolved scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightSpec {
    L2,
    L1L2,
    Huber(ParamValue),
    GemanMcClure,
    Welsch(ParamValue),
    Cauchy(ParamValue),
    Fair(ParamValue),
}

/// Default scale for weights that take one: the data diameter.
const DEFAULT_BETA: ParamValue = ParamValue::Sigma(1.0);

impl WeightSpec {
    /// Parses `kind[:beta]`, e.g. `l2`, `huber:1s`, `welsch:2.5`.
    pub fn parse(s: &str) -> Result<Self, String> {
        let (name, arg) = split_spec(s);
        let beta = || -> Result<ParamValue, String> {
            arg.map(ParamValue::parse).unwrap_or(Ok(DEFAULT_BETA))
        };
        match name {
            "l2" => Ok(WeightSpec::L2),
            "l1l2" => Ok(WeightSpec::L1L2),
            "huber" => Ok(WeightSpec::Huber(beta()?)),
            "gm" => Ok(WeightSpec::GemanMcClure),
            "welsch" => Ok(WeightSpec::Welsch(beta()?)),
            "cauchy" => Ok(WeightSpec::Cauchy(beta()?)),
            "fair" => Ok(WeightSpec::Fair(beta()?)),
            other => Err(format!(
                "unknown weight {other:?} (expected l2|l1l2|huber|gm|welsch|cauchy|fair)"
            )),
        }
    }

    pub fn needs_sigma(&self) -> bool {
        match self {
            WeightSpec::Huber(b) | WeightSpec::Welsch(b) | WeightSpec::Cauchy(b)
            | WeightSpec::Fair(b) => b.needs_sigma(),
            _ => false,
        }
    }

    pub fn resolve(&self, sigma: f64) -> WeightKind {
        match *self {
            WeightSpec::L2 => WeightKind::L2,
            WeightSpec::L1L2 => WeightKind::L1L2,
            WeightSpec::Huber(b) => WeightKind::Huber { beta: b.resolve(sigma) },
            WeightSpec::GemanMcClure => WeightKind::GemanMcClure,
            WeightSpec::Welsch(b) => WeightKind::Welsch { beta: b.resolve(sigma) },
            WeightSpec::Cauchy(b) => WeightKind::Cauchy { beta: b.resolve(sigma) },
            WeightSpec::Fair(b) => WeightKind::Fair { beta: b.resolve(sigma) },
        }
    }
}

/// Distance mode with unresolved kernel parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// Plain squared Euclidean distance.
    None,
    Linear,
    Poly { beta: ParamValue, theta: f64, degree: u32 },
    Rbf { beta: ParamValue },
    Tanh { beta: ParamValue, theta: f64 },
}

impl KernelSpec {
    /// Parses `none`, `linear`, `poly[:beta,theta,degree]`, `rbf[:beta]`,
    /// `tanh[:beta,theta]`.
    pub fn parse(s: &str) -> Result<Self, String> {
        let (name, arg) = split_spec(s);
        match name {
            "none" | "euclidean" => Ok(KernelSpec::None),
            "linear" => Ok(KernelSpec::Linear),
            "rbf" => {
                let beta = arg.map(ParamValue::parse).unwrap_or(Ok(ParamValue::SigmaSq(1.0)))?;
                Ok(KernelSpec::Rbf { beta })
            }
            "poly" => {
                let parts = split_args(arg, 3, "poly expects beta,theta,degree")?;
                let beta = parts
                    .first()
                    .map(|p| ParamValue::parse(p))
                    .unwrap_or(Ok(ParamValue::SigmaSq(1.0)))?;
                let theta = parts.get(1).map(|p| parse_f64(p)).unwrap_or(Ok(1.0))?;
                let degree = parts
                    .get(2)
                    .map(|p| p.parse::<u32>().map_err(|_| format!("bad degree {p:?}")))
                    .unwrap_or(Ok(2))?;
                Ok(KernelSpec::Poly { beta, theta, degree })
            }
            "tanh" => {
                let parts = split_args(arg, 2, "tanh expects beta,theta")?;
                let beta = parts
                    .first()
                    .map(|p| ParamValue::parse(p))
                    .unwrap_or(Ok(ParamValue::SigmaSq(1.0)))?;
                let theta = parts.get(1).map(|p| parse_f64(p)).unwrap_or(Ok(0.1))?;
                Ok(KernelSpec::Tanh { beta, theta })
            }
            other => Err(format!(
                "unknown kernel {other:?} (expected none|linear|poly|rbf|tanh)"
            )),
        }
    }

    pub fn needs_sigma(&self) -> bool {
        match self {
            KernelSpec::Poly { beta, .. } | KernelSpec::Rbf { beta }
            | KernelSpec::Tanh { beta, .. } => beta.needs_sigma(),
            _ => false,
        }
    }

    pub fn resolve(&self, sigma: f64) -> DistanceKind {
        match *self {
            KernelSpec::None => DistanceKind::Euclidean,
            KernelSpec::Linear => DistanceKind::Kernel(KernelKind::Linear),
            KernelSpec::Poly { beta, theta, degree } => DistanceKind::Kernel(KernelKind::Poly {
                beta: beta.resolve(sigma),
                theta,
                degree,
            }),
            KernelSpec::Rbf { beta } => {
                DistanceKind::Kernel(KernelKind::Rbf { beta: beta.resolve(sigma) })
            }
            KernelSpec::Tanh { beta, theta } => {
                DistanceKind::Kernel(KernelKind::Tanh { beta: beta.resolve(sigma), theta })
            }
        }
    }
}

fn split_spec(s: &str) -> (&str, Option<&str>) {
    match s.trim().split_once(':') {
        Some((name, arg)) => (name, Some(arg)),
        None => (s.trim(), None),
    }
}

fn split_args(arg: Option<&str>, max: usize, what: &str) -> Result<Vec<String>, String> {
    match arg {
        None => Ok(Vec::new()),
        Some(a) => {
            let parts: Vec<String> = a.split(',').map(|p| p.trim().to_string()).collect();
            if parts.len() > max {
                Err(format!("{what}, got {a:?}"))
            } else {
                Ok(parts)
            }
        }
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.parse::<f64>().map_err(|_| format!("bad number {s:?}"))
}

/// Parses the penalty flag (`none|si|sii`) together with the topology flag
/// (`auto|seq|nn1|nn2`). `auto` picks the 8-connected grid for images and
/// the sequence otherwise.
pub fn parse_penalty(
    penalty: &str,
    topology: &str,
    data_has_grid: bool,
) -> Result<PenaltyVariant, String> {
    let topo = match topology.trim() {
        "auto" => {
            if data_has_grid {
                Topology::Grid8
            } else {
                Topology::Sequence
            }
        }
        "seq" => Topology::Sequence,
        "nn1" => Topology::Grid4,
        "nn2" => Topology::Grid8,
        other => return Err(format!("unknown topology {other:?} (expected auto|seq|nn1|nn2)")),
    };
    match penalty.trim() {
        "none" => Ok(PenaltyVariant::None),
        "si" => Ok(PenaltyVariant::SI { topology: topo }),
        "sii" => Ok(PenaltyVariant::SII { topology: topo }),
        other => Err(format!("unknown penalty {other:?} (expected none|si|sii)")),
    }
}

/// Parses the preprocessing flag: `n01|nop|u01|scale:A`.
pub fn parse_pre(s: &str) -> Result<Preprocess, String> {
    let (name, arg) = split_spec(s);
    match name {
        "n01" => Ok(Preprocess::N01),
        "nop" => Ok(Preprocess::NoP),
        "u01" => Ok(Preprocess::U01),
        "scale" => {
            let a = arg.ok_or_else(|| "scale needs a target, e.g. scale:5".to_string())?;
            let a = parse_f64(a)?;
            if a <= 0.0 {
                return Err(format!("scale target must be positive, got {a}"));
            }
            Ok(Preprocess::Scale(a))
        }
        other => Err(format!("unknown preprocessing {other:?} (expected n01|nop|u01|scale:A)")),
    }
}

/// Canonical model family name for a configuration, for report rows.
pub fn model_label(config: &ModelConfig) -> String {
    let kernel_part = match &config.distance {
        DistanceKind::Euclidean => None,
        DistanceKind::Kernel(k) => Some(match k {
            KernelKind::Linear => "Linear",
            KernelKind::Poly { .. } => "Poly",
            KernelKind::Rbf { .. } => "RBF",
            KernelKind::Tanh { .. } => "Tanh",
        }),
    };
    let penalty_part = match &config.penalty {
        PenaltyVariant::None => None,
        PenaltyVariant::SI { .. } => Some("SI"),
        PenaltyVariant::SII { .. } => Some("SII"),
    };
    match (kernel_part, penalty_part) {
        (None, None) => "MFCM".to_string(),
        (None, Some(p)) => format!("pMFCM-{p}"),
        (Some(k), None) => format!("KMFCM-{k}"),
        (Some(k), Some(p)) => format!("pKMFCM-{p}-{k}"),
    }
}

/// Report name for a topology column.
pub fn topology_label(penalty: &PenaltyVariant) -> &'static str {
    match penalty.topology() {
        None => "-",
        Some(Topology::Sequence) => "seq",
        Some(Topology::Grid4) => "nn1",
        Some(Topology::Grid8) => "nn2",
    }
}
