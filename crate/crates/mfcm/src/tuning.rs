//! Penalty-factor selection by cross-validated distortion.
//!
//! The sweep trains the penalized model at a rising sequence of gamma
//! candidates and keeps the one with the lowest validation error. The
//! increment between candidates is 0.1 * Q / P where Q is the trained
//! fidelity term and P the penalty mass per unit gamma, so each step is
//! sized relative to how much the penalty currently matters.

use crate::engine::{self, EngineError};
use crate::model::{ClusterState, Dataset, ModelConfig, PenaltyVariant};
use crate::weights::weight;
use ndarray::Array2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TuningError {
    #[error("validation set is empty")]
    EmptyValidationSet,
    #[error("validation index {index} out of range for {n} samples")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("gamma tuning requires a penalty variant")]
    PenaltyRequired,
    #[error("penalty term vanished before any candidate could be scored")]
    DegeneratePenalty,
    #[error("t_gamma must be at least 1")]
    ZeroBudget,
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Guard threshold on the penalized-minus-fidelity gap.
pub const DEGENERATE_PENALTY_TOL: f64 = 1e-12;

/// Weighted fuzzy distortion of the validation samples against a trained
/// state: sum over clusters and validation samples of w u^m d^2.
///
/// Validation memberships come from one unpenalized membership update
/// against the trained prototypes; their weights are then re-evaluated from
/// the fresh residuals. When the state was trained on the same sample set,
/// the trained IRLS weights enter that update, otherwise unit weights do.
pub fn cross_validation_error(
    state: &ClusterState,
    data: &Dataset,
    config: &ModelConfig,
    validation: &[usize],
) -> Result<f64, TuningError> {
    if validation.is_empty() {
        return Err(TuningError::EmptyValidationSet);
    }
    for &idx in validation {
        if idx >= data.n_samples() {
            return Err(TuningError::IndexOutOfRange { index: idx, n: data.n_samples() });
        }
    }
    let subset = gather_rows(data, validation);
    let distances = engine::compute_distances(&subset, &state.centroids, &config.distance)?;
    let c = config.clusters;
    let trained_covers_data = state.irls_weights.ncols() == data.n_samples();
    let mut w_update = Array2::ones((c, validation.len()));
    if trained_covers_data {
        for (col, &idx) in validation.iter().enumerate() {
            for k in 0..c {
                w_update[[k, col]] = state.irls_weights[[k, idx]];
            }
        }
    }
    let penalties = Array2::zeros((c, validation.len()));
    let u = engine::update_memberships(&distances, &w_update, &penalties, config.fuzziness)?;
    let u = u.matrix();
    let m = config.fuzziness;
    let mut error = 0.0;
    for k in 0..c {
        for col in 0..validation.len() {
            let d2 = distances.d2[[k, col]];
            let residual = u[[k, col]].powf(m / 2.0) * d2.sqrt();
            error += weight(config.weight, residual) * u[[k, col]].powf(m) * d2;
        }
    }
    Ok(error)
}

fn gather_rows(data: &Dataset, indices: &[usize]) -> Dataset {
    let d = data.n_features();
    let mut rows = Array2::zeros((indices.len(), d));
    for (out, &idx) in indices.iter().enumerate() {
        rows.row_mut(out).assign(&data.sample(idx));
    }
    Dataset::new(rows).expect("gathered rows stay finite")
}

fn is_full_in_order(indices: &[usize], n: usize) -> bool {
    indices.len() == n && indices.iter().enumerate().all(|(i, &v)| i == v)
}

/// Result of a gamma sweep.
#[derive(Debug, Clone)]
pub struct GammaTuning {
    pub best_gamma: f64,
    /// Evaluated (gamma, validation error) pairs, in evaluation order.
    pub trace: Vec<(f64, f64)>,
    /// True when the penalty gap collapsed before the budget ran out.
    pub stopped_early: bool,
}

/// One step of the gamma schedule: 0.1 Q / P, or `None` when the penalty
/// mass has collapsed and the ratio is meaningless.
fn schedule_increment(fidelity: f64, penalty_mass: f64) -> Option<f64> {
    if penalty_mass < DEGENERATE_PENALTY_TOL {
        return None;
    }
    let increment = 0.1 * fidelity / penalty_mass;
    if !increment.is_finite() || increment <= DEGENERATE_PENALTY_TOL {
        return None;
    }
    Some(increment)
}

/// Sweeps gamma per the incremental schedule and returns the candidate with
/// the lowest validation error.
///
/// The unpenalized base model is trained first on the full sample set; the
/// first candidate is 0.1 Q / P from that state (floored at 1), and each
/// following candidate adds the same expression evaluated on the previous
/// trained state. Training happens on `split.0`, scoring on `split.1`.
pub fn tune_gamma(
    data: &Dataset,
    split: (&[usize], &[usize]),
    config: &ModelConfig,
    t_gamma: usize,
) -> Result<GammaTuning, TuningError> {
    if matches!(config.penalty, PenaltyVariant::None) {
        return Err(TuningError::PenaltyRequired);
    }
    if t_gamma == 0 {
        return Err(TuningError::ZeroBudget);
    }
    let (train, validation) = split;
    if validation.is_empty() {
        return Err(TuningError::EmptyValidationSet);
    }

    let mut base_config = config.clone();
    base_config.gamma = 0.0;
    let base = engine::run(data, &base_config, engine::Init::Random)?;
    let base_obj = engine::objective_of_state(&base.final_state, data, &base_config)?;
    // The schedule starts from gamma = 1, where the penalized/fidelity gap
    // equals the penalty mass itself.
    let first = schedule_increment(base_obj.fidelity, base_obj.penalty_mass)
        .ok_or(TuningError::DegeneratePenalty)?;
    let mut candidate = first.max(1.0);

    let full_train = is_full_in_order(train, data.n_samples());
    let train_data = if full_train { None } else { Some(gather_rows(data, train)) };

    let mut trace: Vec<(f64, f64)> = Vec::new();
    let mut stopped_early = false;
    for _ in 0..t_gamma {
        let mut cfg = config.clone();
        cfg.gamma = candidate;
        let fit_data = train_data.as_ref().unwrap_or(data);
        let state = engine::run(fit_data, &cfg, engine::Init::Random)?;
        let error = cross_validation_error(&state.final_state, data, &cfg, validation)?;
        trace.push((candidate, error));

        let obj = engine::objective_of_state(&state.final_state, fit_data, &cfg)?;
        if cfg.gamma * obj.penalty_mass < DEGENERATE_PENALTY_TOL {
            stopped_early = true;
            break;
        }
        match schedule_increment(obj.fidelity, obj.penalty_mass) {
            Some(increment) => candidate += increment,
            None => {
                stopped_early = true;
                break;
            }
        }
    }

    let (best_gamma, _) = trace
        .iter()
        .copied()
        .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite errors"))
        .expect("at least one candidate was scored");
    Ok(GammaTuning { best_gamma, trace, stopped_early })
}
