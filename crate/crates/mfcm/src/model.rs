//! Shared data types and configuration for every clustering variant.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while building datasets or validating configurations.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dataset must have at least one sample and one feature")]
    EmptyDataset,
    #[error("dataset contains a non-finite value at sample {sample}, feature {feature}")]
    NonFinite { sample: usize, feature: usize },
    #[error("grid {height}x{width} does not cover {n} samples")]
    GridMismatch { height: usize, width: usize, n: usize },
    #[error("label vector has length {got}, expected {expected}")]
    LabelLength { got: usize, expected: usize },
    #[error("fuzziness must exceed 1, got {0}")]
    InvalidFuzziness(f64),
    #[error("penalty topology {0:?} is incompatible with the dataset grid")]
    TopologyMismatch(Topology),
    #[error("cluster count {clusters} exceeds sample count {samples}")]
    TooManyClusters { clusters: usize, samples: usize },
    #[error("{what} must be strictly positive, got {value}")]
    NonPositiveParam { what: &'static str, value: f64 },
    #[error("cluster count must be at least 2, got {0}")]
    TooFewClusters(usize),
    #[error("max_iter must be at least 1")]
    ZeroIterations,
    #[error("gamma must be nonnegative, got {0}")]
    NegativeGamma(f64),
    #[error("membership matrix violates the simplex constraint at column {column}")]
    InvalidMembership { column: usize },
}

/// A clustering problem: N samples of d features, optionally labelled,
/// optionally laid out as a raster image.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Array2<f64>,
    labels: Option<Vec<usize>>,
    grid: Option<(usize, usize)>,
}

impl Dataset {
    /// Wraps an N x d sample matrix. All entries must be finite.
    pub fn new(samples: Array2<f64>) -> Result<Self, ModelError> {
        if samples.nrows() == 0 || samples.ncols() == 0 {
            return Err(ModelError::EmptyDataset);
        }
        for ((i, j), v) in samples.indexed_iter() {
            if !v.is_finite() {
                return Err(ModelError::NonFinite { sample: i, feature: j });
            }
        }
        Ok(Self { samples, labels: None, grid: None })
    }

    /// Attaches ground-truth class ids (one per sample).
    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self, ModelError> {
        if labels.len() != self.samples.nrows() {
            return Err(ModelError::LabelLength { got: labels.len(), expected: self.samples.nrows() });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Marks the samples as raster-ordered pixels of a `height` x `width` image.
    pub fn with_grid(mut self, height: usize, width: usize) -> Result<Self, ModelError> {
        if height * width != self.samples.nrows() {
            return Err(ModelError::GridMismatch { height, width, n: self.samples.nrows() });
        }
        self.grid = Some((height, width));
        Ok(self)
    }

    pub fn n_samples(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.samples.ncols()
    }

    pub fn samples(&self) -> &Array2<f64> {
        &self.samples
    }

    pub fn sample(&self, n: usize) -> ArrayView1<'_, f64> {
        self.samples.row(n)
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn grid(&self) -> Option<(usize, usize)> {
        self.grid
    }
}

/// M-estimator weight function family. `beta` is a scale in the units of
/// the residual it is applied to; L2, L1-L2 and Geman-McClure take none.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WeightKind {
    L2,
    L1L2,
    Huber { beta: f64 },
    GemanMcClure,
    Welsch { beta: f64 },
    Cauchy { beta: f64 },
    Fair { beta: f64 },
}

impl WeightKind {
    pub fn beta(&self) -> Option<f64> {
        match *self {
            WeightKind::Huber { beta }
            | WeightKind::Welsch { beta }
            | WeightKind::Cauchy { beta }
            | WeightKind::Fair { beta } => Some(beta),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            WeightKind::L2 => "l2",
            WeightKind::L1L2 => "l1l2",
            WeightKind::Huber { .. } => "huber",
            WeightKind::GemanMcClure => "gm",
            WeightKind::Welsch { .. } => "welsch",
            WeightKind::Cauchy { .. } => "cauchy",
            WeightKind::Fair { .. } => "fair",
        }
    }
}

/// Kernel function family. All parameters are strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KernelKind {
    Linear,
    Poly { beta: f64, theta: f64, degree: u32 },
    Rbf { beta: f64 },
    Tanh { beta: f64, theta: f64 },
}

impl KernelKind {
    pub fn name(&self) -> &'static str {
        match self {
            KernelKind::Linear => "linear",
            KernelKind::Poly { .. } => "poly",
            KernelKind::Rbf { .. } => "rbf",
            KernelKind::Tanh { .. } => "tanh",
        }
    }
}

/// Distance that drives the objective: plain squared Euclidean, or the
/// kernel-induced squared distance k(x,x) + k(v,v) - 2 k(x,v).
///
/// A `Kernel(Linear)` model computes the same numbers as `Euclidean` through
/// the kernel expansion; both exist so the reduction can be checked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DistanceKind {
    Euclidean,
    Kernel(KernelKind),
}

impl DistanceKind {
    pub fn kernel(&self) -> Option<&KernelKind> {
        match self {
            DistanceKind::Euclidean => None,
            DistanceKind::Kernel(k) => Some(k),
        }
    }
}

/// Neighborhood shape used by the spatial penalties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Topology {
    /// Previous and next sample of a sequence.
    Sequence,
    /// 4-connected raster neighbors.
    Grid4,
    /// 8-connected raster neighbors.
    Grid8,
}

/// Spatial membership penalty added to the objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PenaltyVariant {
    None,
    /// Penalizes co-membership of neighbors in *other* clusters.
    SI { topology: Topology },
    /// Rewards locally coherent labels via (1 - u_neighbor)^m, normalized
    /// by the fixed neighbor count.
    SII { topology: Topology },
}

impl PenaltyVariant {
    pub fn topology(&self) -> Option<Topology> {
        match *self {
            PenaltyVariant::None => None,
            PenaltyVariant::SI { topology } | PenaltyVariant::SII { topology } => Some(topology),
        }
    }
}

/// Full model specification for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Number of clusters, at least 2.
    pub clusters: usize,
    /// Fuzziness exponent m, strictly greater than 1.
    pub fuzziness: f64,
    /// Penalty factor, nonnegative. Ignored when `penalty` is `None`.
    pub gamma: f64,
    pub weight: WeightKind,
    pub distance: DistanceKind,
    pub penalty: PenaltyVariant,
    /// Stop when the max absolute membership change falls below this.
    pub epsilon: f64,
    /// Maximum number of full update sweeps.
    pub max_iter: usize,
    pub seed: u64,
    /// Draw the initial IRLS weights uniformly from the unit interval
    /// instead of all ones.
    pub random_initial_weights: bool,
}

impl ModelConfig {
    /// Baseline configuration: fuzzy c-means with unit weights, Euclidean
    /// distance, no penalty, epsilon 1e-5, 20 sweeps.
    pub fn new(clusters: usize) -> Self {
        Self {
            clusters,
            fuzziness: 2.0,
            gamma: 0.0,
            weight: WeightKind::L2,
            distance: DistanceKind::Euclidean,
            penalty: PenaltyVariant::None,
            epsilon: 1e-5,
            max_iter: 20,
            seed: 0,
            random_initial_weights: false,
        }
    }
}

/// Rejects zero, negative, and NaN parameter values alike.
fn require_positive(what: &'static str, value: f64) -> Result<(), ModelError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ModelError::NonPositiveParam { what, value })
    }
}

/// Checks every cross-cutting invariant of a (config, dataset) pair.
pub fn validate_config(config: &ModelConfig, data: &Dataset) -> Result<(), ModelError> {
    if config.fuzziness <= 1.0 || !config.fuzziness.is_finite() {
        return Err(ModelError::InvalidFuzziness(config.fuzziness));
    }
    if config.clusters < 2 {
        return Err(ModelError::TooFewClusters(config.clusters));
    }
    if config.clusters > data.n_samples() {
        return Err(ModelError::TooManyClusters {
            clusters: config.clusters,
            samples: data.n_samples(),
        });
    }
    if config.gamma.is_nan() || config.gamma < 0.0 {
        return Err(ModelError::NegativeGamma(config.gamma));
    }
    require_positive("epsilon", config.epsilon)?;
    if config.max_iter == 0 {
        return Err(ModelError::ZeroIterations);
    }
    if let Some(beta) = config.weight.beta() {
        require_positive("weight beta", beta)?;
    }
    if let DistanceKind::Kernel(kernel) = &config.distance {
        match *kernel {
            KernelKind::Linear => {}
            KernelKind::Poly { beta, theta, degree } => {
                require_positive("poly beta", beta)?;
                require_positive("poly theta", theta)?;
                if degree < 1 {
                    return Err(ModelError::NonPositiveParam {
                        what: "poly degree",
                        value: degree as f64,
                    });
                }
            }
            KernelKind::Rbf { beta } => require_positive("rbf beta", beta)?,
            KernelKind::Tanh { beta, theta } => {
                require_positive("tanh beta", beta)?;
                require_positive("tanh theta", theta)?;
            }
        }
    }
    match config.penalty.topology() {
        Some(Topology::Sequence) => {
            if data.grid().is_some() {
                return Err(ModelError::TopologyMismatch(Topology::Sequence));
            }
        }
        Some(t @ (Topology::Grid4 | Topology::Grid8)) if data.grid().is_none() => {
            return Err(ModelError::TopologyMismatch(t));
        }
        Some(_) => {}
        None => {}
    }
    Ok(())
}

/// Column-stochastic fuzzy assignment matrix, clusters x samples.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipMatrix(Array2<f64>);

/// Tolerance on per-sample membership sums.
pub const MEMBERSHIP_SUM_TOL: f64 = 1e-9;

impl MembershipMatrix {
    /// Validates that every entry lies in the unit interval and every
    /// column sums to 1.
    pub fn new(u: Array2<f64>) -> Result<Self, ModelError> {
        for n in 0..u.ncols() {
            let mut sum = 0.0;
            for k in 0..u.nrows() {
                let v = u[[k, n]];
                if !(0.0..=1.0 + MEMBERSHIP_SUM_TOL).contains(&v) || !v.is_finite() {
                    return Err(ModelError::InvalidMembership { column: n });
                }
                sum += v;
            }
            if (sum - 1.0).abs() > MEMBERSHIP_SUM_TOL {
                return Err(ModelError::InvalidMembership { column: n });
            }
        }
        Ok(Self(u))
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn n_clusters(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.0.ncols()
    }

    /// Hard label per sample: argmax over clusters, ties to the lowest index.
    pub fn hard_labels(&self) -> Vec<usize> {
        (0..self.0.ncols())
            .map(|n| {
                let mut best = 0;
                for k in 1..self.0.nrows() {
                    if self.0[[k, n]] > self.0[[best, n]] {
                        best = k;
                    }
                }
                best
            })
            .collect()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

/// Mutable per-run state threaded through the engine loop.
#[derive(Debug, Clone)]
pub struct ClusterState {
    pub memberships: MembershipMatrix,
    /// clusters x features prototype matrix.
    pub centroids: Array2<f64>,
    /// clusters x samples IRLS weights from the last sweep.
    pub irls_weights: Array2<f64>,
    /// Completed full sweeps.
    pub iteration: usize,
    /// Objective value recorded after each sweep.
    pub objective_trace: Vec<f64>,
    /// Number of centroid updates skipped due to a vanishing denominator.
    pub degenerate_centroid_events: usize,
}
