//! The unified alternating IRLS update loop shared by every model variant:
//! Euclidean or kernel-induced distances, optional spatial penalty, any of
//! the seven robust weight functions.
//!
//! One sweep updates, in order: centroids (from the lagged weights and
//! memberships), the distance table, memberships (penalties read the
//! previous sweep's memberships), and finally the IRLS weights. Kernel
//! centroid formulas contain the centroid on both sides; they are applied
//! as a one-step fixed point using the previous iterate.

use crate::kernel::{self, KernelError};
use crate::model::{
    validate_config, ClusterState, Dataset, DistanceKind, KernelKind, MembershipMatrix,
    ModelConfig, ModelError, PenaltyVariant, WeightKind,
};
use crate::spatial::{NeighborTable, SpatialError};
use crate::weights::{rho, weight};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// A squared distance at or below this is treated as an exact hit for the
/// degenerate membership branch.
pub const ZERO_DISTANCE_TOL: f64 = 1e-12;

/// Centroid-update denominators below this magnitude leave the centroid
/// unchanged for the sweep.
pub const DEGENERATE_DENOMINATOR_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Spatial(#[from] SpatialError),
    #[error("all membership terms underflowed for sample {sample}")]
    NumericalUnderflow { sample: usize },
    #[error("initial {what} has shape {got:?}, expected {expected:?}")]
    BadInitShape { what: &'static str, got: (usize, usize), expected: (usize, usize) },
}

/// Squared distances between every (cluster, sample) pair plus the set of
/// exact hits per sample.
#[derive(Debug, Clone)]
pub struct DistanceTable {
    /// clusters x samples squared distances.
    pub d2: Array2<f64>,
    /// Per sample: clusters whose distance is numerically zero.
    pub zero_sets: Vec<Vec<usize>>,
    /// How many kernel expansions came out negative and were clamped.
    pub clamped_negative: usize,
}

/// Fills the distance table for the given prototypes. The Euclidean mode
/// computes ||x - v||^2 directly; kernel mode goes through the expansion
/// kappa(x,x) + kappa(v,v) - 2 kappa(x,v), clamped at zero.
pub fn compute_distances(
    data: &Dataset,
    centroids: &Array2<f64>,
    distance: &DistanceKind,
) -> Result<DistanceTable, EngineError> {
    let c = centroids.nrows();
    let n = data.n_samples();
    if centroids.ncols() != data.n_features() {
        return Err(KernelError::DimensionMismatch {
            left: centroids.ncols(),
            right: data.n_features(),
        }
        .into());
    }
    let mut d2 = Array2::zeros((c, n));
    let mut clamped = 0usize;
    for k in 0..c {
        let v = centroids.row(k);
        let v_slice = v.as_slice().expect("contiguous row");
        for nn in 0..n {
            let x = data.sample(nn);
            let x_slice = x.as_slice().expect("contiguous row");
            let val = match distance {
                DistanceKind::Euclidean => {
                    x_slice.iter().zip(v_slice).map(|(a, b)| (a - b) * (a - b)).sum()
                }
                DistanceKind::Kernel(kind) => {
                    let (val, negative) =
                        kernel::induced_distance_sq_detailed(kind, x_slice, v_slice)?;
                    if negative {
                        clamped += 1;
                    }
                    val
                }
            };
            d2[[k, nn]] = val;
        }
    }
    let zero_sets = (0..n)
        .map(|nn| (0..c).filter(|&k| d2[[k, nn]] <= ZERO_DISTANCE_TOL).collect())
        .collect();
    Ok(DistanceTable { d2, zero_sets, clamped_negative: clamped })
}

/// Penalty added to the squared distance of cluster `k`, sample `n` inside
/// the membership update. Written as the direct double loop; the batched
/// [`penalty_table`] must agree with it.
pub fn penalty_term(
    variant: &PenaltyVariant,
    u: &Array2<f64>,
    neighbors: Option<&NeighborTable>,
    m: f64,
    gamma: f64,
    k: usize,
    n: usize,
) -> f64 {
    match variant {
        PenaltyVariant::None => 0.0,
        PenaltyVariant::SI { .. } => {
            let table = neighbors.expect("penalty requires a neighbor table");
            let mut sum = 0.0;
            for &j in table.of(n) {
                for l in 0..u.nrows() {
                    if l != k {
                        sum += u[[l, j]].powf(m);
                    }
                }
            }
            gamma * sum
        }
        PenaltyVariant::SII { .. } => {
            let table = neighbors.expect("penalty requires a neighbor table");
            let mut sum = 0.0;
            for &j in table.of(n) {
                sum += (1.0 - u[[k, j]]).powf(m);
            }
            gamma / table.normalizer() as f64 * sum
        }
    }
}

/// Penalty terms for every (cluster, sample) pair at once.
pub fn penalty_table(
    variant: &PenaltyVariant,
    u: &Array2<f64>,
    neighbors: Option<&NeighborTable>,
    m: f64,
    gamma: f64,
) -> Array2<f64> {
    let (c, n) = (u.nrows(), u.ncols());
    let mut out = Array2::zeros((c, n));
    match variant {
        PenaltyVariant::None => out,
        PenaltyVariant::SI { .. } => {
            let table = neighbors.expect("penalty requires a neighbor table");
            let um = u.mapv(|v| v.powf(m));
            // Per-sample total over clusters, so the cross-cluster sum is
            // total minus the own-cluster term.
            let totals: Array1<f64> = um.sum_axis(ndarray::Axis(0));
            for nn in 0..n {
                for &j in table.of(nn) {
                    let t = totals[j];
                    for k in 0..c {
                        out[[k, nn]] += t - um[[k, j]];
                    }
                }
            }
            out *= gamma;
            out
        }
        PenaltyVariant::SII { .. } => {
            let table = neighbors.expect("penalty requires a neighbor table");
            let omu = u.mapv(|v| (1.0 - v).powf(m));
            for nn in 0..n {
                for &j in table.of(nn) {
                    for k in 0..c {
                        out[[k, nn]] += omu[[k, j]];
                    }
                }
            }
            out *= gamma / table.normalizer() as f64;
            out
        }
    }
}

/// Prototype update. `prev_centroids` supplies the lagged iterate the
/// kernel formulas evaluate against; on the very first sweep there is none
/// and every kind falls back to the plain weighted mean. Returns the new
/// centroids and the number of degenerate (skipped) rows.
pub fn update_centroids(
    data: &Dataset,
    u: &Array2<f64>,
    w: &Array2<f64>,
    prev_centroids: Option<&Array2<f64>>,
    distance: &DistanceKind,
    m: f64,
) -> Result<(Array2<f64>, usize), EngineError> {
    let (c, n, d) = (u.nrows(), u.ncols(), data.n_features());
    let mut out = Array2::zeros((c, d));
    let mut degenerate = 0usize;
    let kernel_kind = match (distance, prev_centroids) {
        (DistanceKind::Kernel(k), Some(_)) => match k {
            KernelKind::Linear => None,
            other => Some(other),
        },
        _ => None,
    };
    for k in 0..c {
        let mut num = vec![0.0; d];
        let mut den = 0.0;
        match kernel_kind {
            None => {
                for nn in 0..n {
                    let a = w[[k, nn]] * u[[k, nn]].powf(m);
                    den += a;
                    let x = data.sample(nn);
                    for j in 0..d {
                        num[j] += a * x[j];
                    }
                }
            }
            Some(kind) => {
                let prev = prev_centroids.expect("kernel update requires previous centroids");
                let v = prev.row(k);
                let v_slice = v.as_slice().expect("contiguous row");
                for nn in 0..n {
                    let a = w[[k, nn]] * u[[k, nn]].powf(m);
                    let x = data.sample(nn);
                    let x_slice = x.as_slice().expect("contiguous row");
                    let factor = kernel_factor(kind, x_slice, v_slice)?;
                    for j in 0..d {
                        num[j] += a * factor * x[j];
                    }
                    den += match kind {
                        // The RBF denominator carries the same per-sample
                        // kernel factor as the numerator.
                        KernelKind::Rbf { .. } => a * factor,
                        // Poly and Tanh denominators evaluate the factor at
                        // the previous centroid itself.
                        _ => a * kernel_factor(kind, v_slice, v_slice)?,
                    };
                }
            }
        }
        if den.abs() < DEGENERATE_DENOMINATOR_TOL || !den.is_finite() {
            degenerate += 1;
            log::warn!("degenerate centroid denominator for cluster {k}; keeping previous value");
            if let Some(prev) = prev_centroids {
                out.row_mut(k).assign(&prev.row(k));
            }
            continue;
        }
        for j in 0..d {
            out[[k, j]] = num[j] / den;
        }
    }
    Ok((out, degenerate))
}

/// Per-sample factor the kernel centroid updates attach to x_n.
///
/// Poly uses kappa(x,v)^((deg-1)/deg), evaluated as the integer power
/// (beta x.v + theta)^(deg-1) so odd degrees with a negative base stay
/// defined; the two forms agree wherever both exist.
fn kernel_factor(kind: &KernelKind, x: &[f64], v: &[f64]) -> Result<f64, KernelError> {
    Ok(match *kind {
        KernelKind::Linear => 1.0,
        KernelKind::Rbf { .. } => kernel::eval(kind, x, v)?,
        KernelKind::Poly { beta, theta, degree } => {
            let base = beta * x.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() + theta;
            base.powi(degree as i32 - 1)
        }
        KernelKind::Tanh { .. } => {
            let k = kernel::eval(kind, x, v)?;
            1.0 - k * k
        }
    })
}

/// Membership update. `penalties` holds the gamma-scaled penalty per
/// (cluster, sample) computed from the previous sweep's memberships;
/// `w` is the lagged IRLS weight matrix.
///
/// Samples with a nonempty zero set get all mass split uniformly over it;
/// everyone else follows the closed form
/// u ~ [w (d^2 + penalty)]^(-1/(m-1)), normalized per sample.
pub fn update_memberships(
    distances: &DistanceTable,
    w: &Array2<f64>,
    penalties: &Array2<f64>,
    m: f64,
) -> Result<MembershipMatrix, EngineError> {
    let (c, n) = distances.d2.dim();
    let mut u = Array2::zeros((c, n));
    let exponent = -1.0 / (m - 1.0);
    let mut terms = vec![0.0; c];
    for nn in 0..n {
        let zero_set = &distances.zero_sets[nn];
        if !zero_set.is_empty() {
            let share = 1.0 / zero_set.len() as f64;
            for &k in zero_set {
                u[[k, nn]] = share;
            }
            continue;
        }
        let mut any_infinite = false;
        let mut all_tiny = true;
        for k in 0..c {
            let bracket = w[[k, nn]] * (distances.d2[[k, nn]] + penalties[[k, nn]]);
            let t = bracket.powf(exponent);
            terms[k] = t;
            any_infinite |= t.is_infinite();
            all_tiny &= t < 1e-300;
        }
        if all_tiny {
            return Err(EngineError::NumericalUnderflow { sample: nn });
        }
        if any_infinite {
            // Limit of the normalization: the unbounded terms share the mass.
            let count = terms.iter().filter(|t| t.is_infinite()).count() as f64;
            for k in 0..c {
                u[[k, nn]] = if terms[k].is_infinite() { 1.0 / count } else { 0.0 };
            }
        } else {
            let total: f64 = terms.iter().sum();
            for k in 0..c {
                u[[k, nn]] = terms[k] / total;
            }
        }
    }
    Ok(MembershipMatrix::new(u)?)
}

/// IRLS weights from the current residuals R = u^(m/2) * d.
pub fn update_irls_weights(
    u: &Array2<f64>,
    distances: &DistanceTable,
    kind: WeightKind,
    m: f64,
) -> Array2<f64> {
    let (c, n) = u.dim();
    let mut w = Array2::zeros((c, n));
    for k in 0..c {
        for nn in 0..n {
            let residual = u[[k, nn]].powf(m / 2.0) * distances.d2[[k, nn]].sqrt();
            w[[k, nn]] = weight(kind, residual);
        }
    }
    w
}

/// Objective decomposition for one state.
#[derive(Debug, Clone, Copy)]
pub struct Objective {
    /// Weighted fidelity sum w u^m d^2 (the Q term).
    pub fidelity: f64,
    /// Penalty contribution per unit of gamma.
    pub penalty_mass: f64,
    pub gamma: f64,
    /// Robust-loss form: the sum of rho(u^(m/2) d).
    pub rho_sum: f64,
}

impl Objective {
    pub fn total(&self) -> f64 {
        self.fidelity + self.gamma * self.penalty_mass
    }
}

/// Evaluates the objective for explicit state pieces.
#[allow(clippy::too_many_arguments)]
pub fn objective(
    u: &Array2<f64>,
    w: &Array2<f64>,
    distances: &DistanceTable,
    weight_kind: WeightKind,
    m: f64,
    penalty: &PenaltyVariant,
    gamma: f64,
    neighbors: Option<&NeighborTable>,
) -> Objective {
    let (c, n) = u.dim();
    let mut fidelity = 0.0;
    let mut rho_sum = 0.0;
    for k in 0..c {
        for nn in 0..n {
            let um = u[[k, nn]].powf(m);
            fidelity += w[[k, nn]] * um * distances.d2[[k, nn]];
            rho_sum += rho(weight_kind, u[[k, nn]].powf(m / 2.0) * distances.d2[[k, nn]].sqrt());
        }
    }
    let mut penalty_mass = 0.0;
    match penalty {
        PenaltyVariant::None => {}
        PenaltyVariant::SI { .. } => {
            let table = neighbors.expect("penalty requires a neighbor table");
            let um = u.mapv(|v| v.powf(m));
            let totals: Array1<f64> = um.sum_axis(ndarray::Axis(0));
            for k in 0..c {
                for nn in 0..n {
                    let mut cross = 0.0;
                    for &j in table.of(nn) {
                        cross += totals[j] - um[[k, j]];
                    }
                    penalty_mass += 0.5 * w[[k, nn]] * um[[k, nn]] * cross;
                }
            }
        }
        PenaltyVariant::SII { .. } => {
            let table = neighbors.expect("penalty requires a neighbor table");
            let omu = u.mapv(|v| (1.0 - v).powf(m));
            for k in 0..c {
                for nn in 0..n {
                    let mut coherence = 0.0;
                    for &j in table.of(nn) {
                        coherence += omu[[k, j]];
                    }
                    penalty_mass += w[[k, nn]] * u[[k, nn]].powf(m) * coherence
                        / table.normalizer() as f64;
                }
            }
        }
    }
    Objective { fidelity, penalty_mass, gamma, rho_sum }
}

/// Objective of a finished state against its dataset and configuration.
pub fn objective_of_state(
    state: &ClusterState,
    data: &Dataset,
    config: &ModelConfig,
) -> Result<Objective, EngineError> {
    let distances = compute_distances(data, &state.centroids, &config.distance)?;
    let neighbors = neighbor_table(config, data)?;
    Ok(objective(
        state.memberships.matrix(),
        &state.irls_weights,
        &distances,
        config.weight,
        config.fuzziness,
        &config.penalty,
        config.gamma,
        neighbors.as_ref(),
    ))
}

fn neighbor_table(config: &ModelConfig, data: &Dataset) -> Result<Option<NeighborTable>, EngineError> {
    match config.penalty.topology() {
        Some(t) => Ok(Some(NeighborTable::build(t, data.n_samples(), data.grid())?)),
        None => Ok(None),
    }
}

/// How a run is seeded.
#[derive(Debug, Clone)]
pub enum Init {
    /// Column-normalized uniform memberships drawn from the config seed.
    Random,
    /// Start from given prototypes; the first sweep then updates
    /// memberships before touching the centroids.
    Centroids(Array2<f64>),
    /// Start from a given membership matrix.
    Memberships(Array2<f64>),
}

/// Outcome of one engine run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub final_state: ClusterState,
    pub converged: bool,
    pub iterations_used: usize,
    pub hard_labels: Vec<usize>,
    pub config_echo: ModelConfig,
    pub seed_echo: u64,
}

/// Runs the full alternating loop until the membership change drops below
/// epsilon or the sweep budget is exhausted.
pub fn run(data: &Dataset, config: &ModelConfig, init: Init) -> Result<RunResult, EngineError> {
    run_inner(data, config, init, None)
}

/// Like [`run`], but also returns the membership matrix after every sweep.
pub fn run_traced(
    data: &Dataset,
    config: &ModelConfig,
    init: Init,
) -> Result<(RunResult, Vec<Array2<f64>>), EngineError> {
    let mut snapshots = Vec::new();
    let result = run_inner(data, config, init, Some(&mut snapshots))?;
    Ok((result, snapshots))
}

fn random_memberships(c: usize, n: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut u = Array2::zeros((c, n));
    for nn in 0..n {
        let mut sum = 0.0;
        for k in 0..c {
            let v: f64 = rng.gen();
            u[[k, nn]] = v;
            sum += v;
        }
        if sum == 0.0 {
            for k in 0..c {
                u[[k, nn]] = 1.0 / c as f64;
            }
        } else {
            for k in 0..c {
                u[[k, nn]] /= sum;
            }
        }
    }
    u
}

fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()))
}

fn run_inner(
    data: &Dataset,
    config: &ModelConfig,
    init: Init,
    mut snapshots: Option<&mut Vec<Array2<f64>>>,
) -> Result<RunResult, EngineError> {
    validate_config(config, data)?;
    let (c, n) = (config.clusters, data.n_samples());
    let m = config.fuzziness;
    let neighbors = neighbor_table(config, data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut centroids_init = None;
    let mut u = match init {
        Init::Random => random_memberships(c, n, &mut rng),
        Init::Memberships(u0) => {
            if u0.dim() != (c, n) {
                return Err(EngineError::BadInitShape {
                    what: "memberships",
                    got: u0.dim(),
                    expected: (c, n),
                });
            }
            MembershipMatrix::new(u0)?.into_inner()
        }
        Init::Centroids(v0) => {
            if v0.dim() != (c, data.n_features()) {
                return Err(EngineError::BadInitShape {
                    what: "centroids",
                    got: v0.dim(),
                    expected: (c, data.n_features()),
                });
            }
            centroids_init = Some(v0);
            // Penalties in the first membership update still need a lagged
            // membership state; a seeded draw provides it.
            random_memberships(c, n, &mut rng)
        }
    };
    let mut w = if config.random_initial_weights {
        let mut w0 = Array2::zeros((c, n));
        for k in 0..c {
            for nn in 0..n {
                w0[[k, nn]] = rng.gen::<f64>();
            }
        }
        w0
    } else {
        Array2::ones((c, n))
    };

    let mut prev_centroids: Option<Array2<f64>> = None;
    let mut trace = Vec::new();
    let mut degenerate_events = 0usize;
    let mut iterations = 0usize;
    let mut converged = false;

    // Distances onward, shared by the prototype-seeded bootstrap and the
    // regular sweep: memberships (penalties lagged on the previous u),
    // then weights, then the objective sample.
    let finish_sweep = |centroids: &Array2<f64>,
                            u: &mut Array2<f64>,
                            w: &mut Array2<f64>,
                            trace: &mut Vec<f64>,
                            snapshots: &mut Option<&mut Vec<Array2<f64>>>|
     -> Result<f64, EngineError> {
        let distances = compute_distances(data, centroids, &config.distance)?;
        let penalties = penalty_table(&config.penalty, u, neighbors.as_ref(), m, config.gamma);
        let new_u = update_memberships(&distances, w, &penalties, m)?.into_inner();
        let delta = max_abs_diff(&new_u, u);
        *u = new_u;
        *w = update_irls_weights(u, &distances, config.weight, m);
        trace.push(
            objective(
                u,
                w,
                &distances,
                config.weight,
                m,
                &config.penalty,
                config.gamma,
                neighbors.as_ref(),
            )
            .total(),
        );
        if let Some(snaps) = snapshots.as_deref_mut() {
            snaps.push(u.clone());
        }
        Ok(delta)
    };

    // With given prototypes the first sweep starts at the membership update.
    if let Some(v0) = centroids_init {
        let delta = finish_sweep(&v0, &mut u, &mut w, &mut trace, &mut snapshots)?;
        prev_centroids = Some(v0);
        iterations = 1;
        converged = delta < config.epsilon;
    }

    while iterations < config.max_iter && !converged {
        let (centroids, events) =
            update_centroids(data, &u, &w, prev_centroids.as_ref(), &config.distance, m)?;
        degenerate_events += events;
        let delta = finish_sweep(&centroids, &mut u, &mut w, &mut trace, &mut snapshots)?;
        prev_centroids = Some(centroids);
        iterations += 1;
        if delta < config.epsilon {
            converged = true;
        }
    }

    let memberships = MembershipMatrix::new(u)?;
    let hard_labels = memberships.hard_labels();
    let centroids = match prev_centroids {
        Some(v) => v,
        // max_iter = 0 is rejected by validation, so at least one sweep ran,
        // but keep a sane fallback for the type system.
        None => Array2::zeros((c, data.n_features())),
    };
    let state = ClusterState {
        memberships,
        centroids,
        irls_weights: w,
        iteration: iterations,
        objective_trace: trace,
        degenerate_centroid_events: degenerate_events,
    };
    Ok(RunResult {
        final_state: state,
        converged,
        iterations_used: iterations,
        hard_labels,
        config_echo: config.clone(),
        seed_echo: config.seed,
    })
}
