//! Preprocessing, noise models, filters, accuracy scoring and centroid
//! seeding for experiments.

use crate::model::{Dataset, MembershipMatrix};
use ndarray::Array2;
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("operation requires raster-ordered image data (no grid present)")]
    MissingGrid,
    #[error("operation requires single-channel intensities, got {0} features")]
    NotScalarImage(usize),
    #[error("exhaustive label alignment supports at most 8 classes, got {0}")]
    TooManyClustersForAlignment(usize),
    #[error("truth labels cover {got} samples, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("noise percentage must lie in [0, 100], got {0}")]
    BadPercent(f64),
}

/// Feature scaling applied before clustering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preprocess {
    /// Per-feature standardization to zero mean, unit (population) stddev.
    N01,
    /// Leave the data as is.
    NoP,
    /// Per-feature min-max scaling to [0, 1].
    U01,
    /// Per-feature min-max scaling to [0, a].
    Scale(f64),
}

/// Applies the chosen scaling per feature. Constant features map to zero
/// under every non-identity mode.
pub fn preprocess(data: &Dataset, mode: Preprocess) -> Dataset {
    if matches!(mode, Preprocess::NoP) {
        return data.clone();
    }
    let n = data.n_samples();
    let d = data.n_features();
    let mut out = data.samples().clone();
    for j in 0..d {
        match mode {
            Preprocess::NoP => unreachable!(),
            Preprocess::N01 => {
                let mean = (0..n).map(|i| out[[i, j]]).sum::<f64>() / n as f64;
                let var = (0..n).map(|i| (out[[i, j]] - mean).powi(2)).sum::<f64>() / n as f64;
                let std = var.sqrt();
                for i in 0..n {
                    out[[i, j]] = if std > 0.0 { (out[[i, j]] - mean) / std } else { 0.0 };
                }
            }
            Preprocess::U01 | Preprocess::Scale(_) => {
                let top = if let Preprocess::Scale(a) = mode { a } else { 1.0 };
                let min = (0..n).map(|i| out[[i, j]]).fold(f64::INFINITY, f64::min);
                let max = (0..n).map(|i| out[[i, j]]).fold(f64::NEG_INFINITY, f64::max);
                let span = max - min;
                for i in 0..n {
                    out[[i, j]] = if span > 0.0 { (out[[i, j]] - min) / span * top } else { 0.0 };
                }
            }
        }
    }
    rebuild(data, out)
}

fn rebuild(template: &Dataset, samples: Array2<f64>) -> Dataset {
    let mut out = Dataset::new(samples).expect("rebuilt samples stay finite");
    if let Some(labels) = template.labels() {
        out = out.with_labels(labels.to_vec()).expect("label length preserved");
    }
    if let Some((h, w)) = template.grid() {
        out = out.with_grid(h, w).expect("grid preserved");
    }
    out
}

/// Exact maximum pairwise Euclidean distance (the data diameter).
pub fn data_diameter(data: &Dataset) -> f64 {
    let n = data.n_samples();
    let mut best = 0.0f64;
    for i in 0..n {
        let xi = data.sample(i);
        for j in (i + 1)..n {
            let xj = data.sample(j);
            let d2: f64 = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum();
            best = best.max(d2);
        }
    }
    best.sqrt()
}

/// Hard-assigns every sample, aligns cluster ids to truth classes by
/// exhaustive permutation search, and returns (aligned labels, accuracy %).
pub fn assign_and_align(
    u: &MembershipMatrix,
    truth: &[usize],
) -> Result<(Vec<usize>, f64), EvalError> {
    if truth.len() != u.n_samples() {
        return Err(EvalError::LengthMismatch { got: truth.len(), expected: u.n_samples() });
    }
    let pred = u.hard_labels();
    let classes = truth.iter().max().map_or(1, |&m| m + 1).max(u.n_clusters());
    if classes > 8 {
        return Err(EvalError::TooManyClustersForAlignment(classes));
    }
    // Count matrix: matches for (cluster, class) pairs.
    let mut counts = vec![vec![0usize; classes]; classes];
    for (&p, &t) in pred.iter().zip(truth) {
        counts[p][t] += 1;
    }
    let mut perm: Vec<usize> = (0..classes).collect();
    let mut best_perm = perm.clone();
    let mut best_matches = score(&counts, &perm);
    permute(&mut perm, 0, &mut |p| {
        let s = score(&counts, p);
        if s > best_matches {
            best_matches = s;
            best_perm = p.to_vec();
        }
    });
    let aligned: Vec<usize> = pred.iter().map(|&p| best_perm[p]).collect();
    let accuracy = 100.0 * best_matches as f64 / truth.len() as f64;
    Ok((aligned, accuracy))
}

fn score(counts: &[Vec<usize>], perm: &[usize]) -> usize {
    counts.iter().enumerate().map(|(cluster, row)| row[perm[cluster]]).sum()
}

fn permute(items: &mut Vec<usize>, at: usize, visit: &mut impl FnMut(&[usize])) {
    if at == items.len() {
        visit(items);
        return;
    }
    for i in at..items.len() {
        items.swap(at, i);
        permute(items, at + 1, visit);
        items.swap(at, i);
    }
}

/// Adds zero-mean Gaussian noise to every pixel and clamps to [0, 255].
///
/// "p percent" sets the noise variance to p% of the squared half-range,
/// i.e. stddev = sqrt(p/100) * 127.5.
pub fn add_gaussian_noise(data: &Dataset, percent: f64, seed: u64) -> Result<Dataset, EvalError> {
    if data.grid().is_none() {
        return Err(EvalError::MissingGrid);
    }
    if !(0.0..=100.0).contains(&percent) {
        return Err(EvalError::BadPercent(percent));
    }
    if percent == 0.0 {
        return Ok(data.clone());
    }
    let stddev = (percent / 100.0).sqrt() * 127.5;
    let normal = Normal::new(0.0, stddev).expect("positive stddev");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = data.samples().clone();
    for v in samples.iter_mut() {
        *v = (*v + normal.sample(&mut rng)).clamp(0.0, 255.0);
    }
    Ok(rebuild(data, samples))
}

/// Replaces exactly round(p/100 * N) distinct pixels with 0 or 255,
/// an even coin flip each.
pub fn add_salt_pepper(data: &Dataset, percent: f64, seed: u64) -> Result<Dataset, EvalError> {
    if data.grid().is_none() {
        return Err(EvalError::MissingGrid);
    }
    if !(0.0..=100.0).contains(&percent) {
        return Err(EvalError::BadPercent(percent));
    }
    let n = data.n_samples();
    let hits = (percent / 100.0 * n as f64).round() as usize;
    if hits == 0 {
        return Ok(data.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = sample_indices(&mut rng, n, hits);
    let mut samples = data.samples().clone();
    for idx in chosen.iter() {
        let value = if rng.gen_bool(0.5) { 0.0 } else { 255.0 };
        for j in 0..samples.ncols() {
            samples[[idx, j]] = value;
        }
    }
    Ok(rebuild(data, samples))
}

fn window_values(
    data: &Dataset,
    h: usize,
    w: usize,
    row: usize,
    col: usize,
    buf: &mut Vec<f64>,
) {
    buf.clear();
    for dr in -1i64..=1 {
        for dc in -1i64..=1 {
            let r = row as i64 + dr;
            let c = col as i64 + dc;
            if r >= 0 && c >= 0 && (r as usize) < h && (c as usize) < w {
                buf.push(data.samples()[[r as usize * w + c as usize, 0]]);
            }
        }
    }
}

fn filtered_3x3(
    data: &Dataset,
    reduce: impl Fn(&mut Vec<f64>) -> f64,
) -> Result<Dataset, EvalError> {
    let (h, w) = data.grid().ok_or(EvalError::MissingGrid)?;
    if data.n_features() != 1 {
        return Err(EvalError::NotScalarImage(data.n_features()));
    }
    let mut out = data.samples().clone();
    let mut buf = Vec::with_capacity(9);
    for row in 0..h {
        for col in 0..w {
            window_values(data, h, w, row, col, &mut buf);
            out[[row * w + col, 0]] = reduce(&mut buf);
        }
    }
    Ok(rebuild(data, out))
}

/// 3x3 mean filter; border windows truncate to the in-bounds pixels.
pub fn mean_filter_3x3(data: &Dataset) -> Result<Dataset, EvalError> {
    filtered_3x3(data, |buf| buf.iter().sum::<f64>() / buf.len() as f64)
}

/// 3x3 median filter; border windows truncate, and an even-sized window
/// takes the lower middle element so outputs stay in the input value set.
pub fn median_filter_3x3(data: &Dataset) -> Result<Dataset, EvalError> {
    filtered_3x3(data, |buf| {
        buf.sort_by(|a, b| a.partial_cmp(b).expect("finite pixels"));
        buf[(buf.len() - 1) / 2]
    })
}

/// Picks initial scalar centroids from the peaks of a Gaussian kernel
/// density estimate of the pixel intensities, evaluated on a 256-point
/// grid over [min, max]. The `c` highest-density peaks are returned sorted
/// ascending; missing slots are filled by even spacing over the range.
pub fn kde_peak_centroids(
    data: &Dataset,
    c: usize,
    bandwidth: f64,
) -> Result<Vec<f64>, EvalError> {
    if data.grid().is_none() {
        return Err(EvalError::MissingGrid);
    }
    if data.n_features() != 1 {
        return Err(EvalError::NotScalarImage(data.n_features()));
    }
    let values: Vec<f64> = data.samples().column(0).to_vec();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return Ok(vec![min; c]);
    }
    let grid_len = 256usize;
    let h = bandwidth.max(1e-9);
    let density: Vec<f64> = (0..grid_len)
        .map(|i| {
            let g = min + (max - min) * i as f64 / (grid_len - 1) as f64;
            values.iter().map(|&x| (-0.5 * ((g - x) / h).powi(2)).exp()).sum()
        })
        .collect();
    let mut peaks: Vec<(f64, f64)> = Vec::new(); // (density, location)
    for i in 0..grid_len {
        let left_ok = i == 0 || density[i] > density[i - 1];
        let right_ok = i + 1 == grid_len || density[i] >= density[i + 1];
        if left_ok && right_ok {
            peaks.push((density[i], min + (max - min) * i as f64 / (grid_len - 1) as f64));
        }
    }
    peaks.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite density"));
    let mut centroids: Vec<f64> = peaks.iter().take(c).map(|&(_, loc)| loc).collect();
    let missing = c - centroids.len();
    for i in 0..missing {
        centroids.push(min + (max - min) * (i + 1) as f64 / (missing + 1) as f64);
    }
    centroids.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    Ok(centroids)
}
