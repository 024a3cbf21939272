//! Kernel evaluation and the kernel-induced squared distance.

use crate::model::KernelKind;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KernelError {
    #[error("vector dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
}

fn dot(x: &[f64], z: &[f64]) -> f64 {
    x.iter().zip(z).map(|(a, b)| a * b).sum()
}

fn sq_norm_diff(x: &[f64], z: &[f64]) -> f64 {
    x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Evaluates kappa(x, z).
pub fn eval(kind: &KernelKind, x: &[f64], z: &[f64]) -> Result<f64, KernelError> {
    if x.len() != z.len() {
        return Err(KernelError::DimensionMismatch { left: x.len(), right: z.len() });
    }
    Ok(match *kind {
        KernelKind::Linear => dot(x, z),
        KernelKind::Poly { beta, theta, degree } => (beta * dot(x, z) + theta).powi(degree as i32),
        KernelKind::Rbf { beta } => (-beta * sq_norm_diff(x, z)).exp(),
        KernelKind::Tanh { beta, theta } => (beta * dot(x, z) + theta).tanh(),
    })
}

/// Squared distance in feature space, kappa(x,x) + kappa(z,z) - 2 kappa(x,z),
/// clamped at zero. `was_negative` reports whether the clamp fired; it never
/// does for the positive semi-definite kinds (Linear, Poly, RBF), only the
/// sigmoid kernel can push the raw value below zero.
pub fn induced_distance_sq_detailed(
    kind: &KernelKind,
    x: &[f64],
    z: &[f64],
) -> Result<(f64, bool), KernelError> {
    let raw = eval(kind, x, x)? + eval(kind, z, z)? - 2.0 * eval(kind, x, z)?;
    if raw < 0.0 {
        Ok((0.0, true))
    } else {
        Ok((raw, false))
    }
}

/// Clamped kernel-induced squared distance.
pub fn induced_distance_sq(kind: &KernelKind, x: &[f64], z: &[f64]) -> Result<f64, KernelError> {
    induced_distance_sq_detailed(kind, x, z).map(|(d2, _)| d2)
}
