//! Neighborhood enumeration for the spatial penalties.

use crate::model::Topology;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpatialError {
    #[error("sample index {index} out of range for {n} samples")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("grid topology requires an image shape")]
    ShapeMissing,
    #[error("shape {height}x{width} does not cover {n} samples")]
    ShapeMismatch { height: usize, width: usize, n: usize },
}

/// Fixed normalizer N_R for a topology (2, 4 or 8). Border samples keep the
/// full-size constant even though their neighbor lists are truncated.
pub fn normalizer(topology: Topology) -> usize {
    match topology {
        Topology::Sequence => 2,
        Topology::Grid4 => 4,
        Topology::Grid8 => 8,
    }
}

/// In-bounds neighbors of sample `n`, excluding `n` itself. Grid topologies
/// need the raster shape; `n_samples` bounds the sequence case.
pub fn neighbors(
    topology: Topology,
    n: usize,
    n_samples: usize,
    shape: Option<(usize, usize)>,
) -> Result<Vec<usize>, SpatialError> {
    if n >= n_samples {
        return Err(SpatialError::IndexOutOfRange { index: n, n: n_samples });
    }
    match topology {
        Topology::Sequence => {
            let mut out = Vec::with_capacity(2);
            if n > 0 {
                out.push(n - 1);
            }
            if n + 1 < n_samples {
                out.push(n + 1);
            }
            Ok(out)
        }
        Topology::Grid4 | Topology::Grid8 => {
            let (h, w) = shape.ok_or(SpatialError::ShapeMissing)?;
            if h * w != n_samples {
                return Err(SpatialError::ShapeMismatch { height: h, width: w, n: n_samples });
            }
            let (row, col) = (n / w, n % w);
            let offsets: &[(isize, isize)] = match topology {
                Topology::Grid4 => &[(-1, 0), (0, -1), (0, 1), (1, 0)],
                _ => &[(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)],
            };
            let mut out = Vec::with_capacity(offsets.len());
            for &(dr, dc) in offsets {
                let r = row as isize + dr;
                let c = col as isize + dc;
                if r >= 0 && c >= 0 && (r as usize) < h && (c as usize) < w {
                    out.push(r as usize * w + c as usize);
                }
            }
            Ok(out)
        }
    }
}

/// Neighbor lists for every sample, built once per run and shared read-only.
#[derive(Debug, Clone)]
pub struct NeighborTable {
    lists: Vec<Vec<usize>>,
    normalizer: usize,
}

impl NeighborTable {
    pub fn build(
        topology: Topology,
        n_samples: usize,
        shape: Option<(usize, usize)>,
    ) -> Result<Self, SpatialError> {
        let lists = (0..n_samples)
            .map(|n| neighbors(topology, n, n_samples, shape))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { lists, normalizer: normalizer(topology) })
    }

    pub fn of(&self, n: usize) -> &[usize] {
        &self.lists[n]
    }

    pub fn normalizer(&self) -> usize {
        self.normalizer
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }
}
