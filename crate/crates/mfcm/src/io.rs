//! Dataset loading, grayscale image formats, the synthetic test image and
//! structured result files.

use crate::engine::RunResult;
use crate::model::{Dataset, ModelConfig, ModelError};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("row {row}, column {column}: cannot parse {token:?} as a number")]
    ParseError { row: usize, column: usize, token: String },
    #[error("row {row} has {got} columns, expected {expected}")]
    RaggedRows { row: usize, got: usize, expected: usize },
    #[error("row {row}, column {column}: non-finite feature value")]
    NonNumericFeature { row: usize, column: usize },
    #[error("csv has no data rows")]
    EmptyCsv,
    #[error("label column {column} out of range for {columns} columns")]
    BadLabelColumn { column: usize, columns: usize },
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("image data ends early: expected {expected} pixels, found {got}")]
    TruncatedFile { expected: usize, got: usize },
    #[error("pixel value {0} exceeds the 8-bit range")]
    PixelRange(u32),
    #[error("dataset is not a single-channel raster image")]
    NotImage,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("result file: {0}")]
    Json(#[from] serde_json::Error),
}

/// Loads a comma-separated numeric table. `label_column`, when given,
/// designates one column as class labels (integers or strings, mapped to
/// 0..C-1 by first appearance). Feature values must be finite.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_column: Option<usize>,
    has_header: bool,
) -> Result<Dataset, IoError> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut class_ids: HashMap<String, usize> = HashMap::new();
    let mut width: Option<usize> = None;
    for (line_no, line) in text.lines().enumerate() {
        if line_no == 0 && has_header {
            continue;
        }
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let expected = *width.get_or_insert(fields.len());
        if fields.len() != expected {
            return Err(IoError::RaggedRows { row: line_no + 1, got: fields.len(), expected });
        }
        if let Some(col) = label_column {
            if col >= fields.len() {
                return Err(IoError::BadLabelColumn { column: col, columns: fields.len() });
            }
        }
        let mut row = Vec::with_capacity(fields.len());
        for (col, token) in fields.iter().enumerate() {
            if label_column == Some(col) {
                let next = class_ids.len();
                labels.push(*class_ids.entry((*token).to_string()).or_insert(next));
                continue;
            }
            match token.parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                Ok(_) => {
                    return Err(IoError::NonNumericFeature { row: line_no + 1, column: col + 1 })
                }
                Err(_) => {
                    return Err(IoError::ParseError {
                        row: line_no + 1,
                        column: col + 1,
                        token: (*token).to_string(),
                    })
                }
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(IoError::EmptyCsv);
    }
    let d = rows[0].len();
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    let samples = Array2::from_shape_vec((rows.len(), d), flat).expect("rectangular rows");
    let mut data = Dataset::new(samples)?;
    if label_column.is_some() {
        data = data.with_labels(labels)?;
    }
    Ok(data)
}

/// Reads an 8-bit PGM image (ASCII `P2` or binary `P5`) into a dataset of
/// one intensity feature per pixel, raster order, with the grid attached.
pub fn load_pgm(path: impl AsRef<Path>) -> Result<Dataset, IoError> {
    let bytes = fs::read(path)?;
    let mut cursor = 0usize;
    let magic = next_token(&bytes, &mut cursor)
        .ok_or_else(|| IoError::UnsupportedFormat("empty file".into()))?;
    let binary = match magic.as_str() {
        "P2" => false,
        "P5" => true,
        other => return Err(IoError::UnsupportedFormat(format!("magic {other:?}"))),
    };
    let width = next_number(&bytes, &mut cursor)?;
    let height = next_number(&bytes, &mut cursor)?;
    let maxval = next_number(&bytes, &mut cursor)?;
    if maxval > 255 {
        return Err(IoError::UnsupportedFormat(format!("maxval {maxval} exceeds 8 bits")));
    }
    let expected = width as usize * height as usize;
    let mut pixels = Vec::with_capacity(expected);
    if binary {
        // A single whitespace byte separates the header from the raster.
        cursor += 1;
        let raster = bytes.get(cursor..).unwrap_or_default();
        if raster.len() < expected {
            return Err(IoError::TruncatedFile { expected, got: raster.len() });
        }
        pixels.extend(raster[..expected].iter().map(|&b| b as f64));
    } else {
        for _ in 0..expected {
            match next_number_opt(&bytes, &mut cursor) {
                Some(Ok(v)) if v <= maxval => pixels.push(v as f64),
                Some(Ok(v)) => return Err(IoError::PixelRange(v)),
                Some(Err(e)) => return Err(e),
                None => return Err(IoError::TruncatedFile { expected, got: pixels.len() }),
            }
        }
    }
    let samples = Array2::from_shape_vec((expected, 1), pixels).expect("counted pixels");
    Ok(Dataset::new(samples)?.with_grid(height as usize, width as usize)?)
}

fn skip_separators(bytes: &[u8], cursor: &mut usize) {
    loop {
        while *cursor < bytes.len() && bytes[*cursor].is_ascii_whitespace() {
            *cursor += 1;
        }
        if *cursor < bytes.len() && bytes[*cursor] == b'#' {
            while *cursor < bytes.len() && bytes[*cursor] != b'\n' {
                *cursor += 1;
            }
        } else {
            return;
        }
    }
}

fn next_token(bytes: &[u8], cursor: &mut usize) -> Option<String> {
    skip_separators(bytes, cursor);
    let start = *cursor;
    while *cursor < bytes.len() && !bytes[*cursor].is_ascii_whitespace() {
        *cursor += 1;
    }
    if start == *cursor {
        None
    } else {
        Some(String::from_utf8_lossy(&bytes[start..*cursor]).into_owned())
    }
}

fn next_number_opt(bytes: &[u8], cursor: &mut usize) -> Option<Result<u32, IoError>> {
    let token = next_token(bytes, cursor)?;
    Some(token.parse::<u32>().map_err(|_| IoError::ParseError {
        row: 0,
        column: 0,
        token,
    }))
}

fn next_number(bytes: &[u8], cursor: &mut usize) -> Result<u32, IoError> {
    next_number_opt(bytes, cursor)
        .unwrap_or_else(|| Err(IoError::UnsupportedFormat("truncated header".into())))
}

/// Writes a dataset of pixel intensities as a binary `P5` PGM. Values are
/// rounded and clamped to 0..=255.
pub fn save_pgm(path: impl AsRef<Path>, data: &Dataset) -> Result<(), IoError> {
    let (h, w) = data.grid().ok_or(IoError::NotImage)?;
    if data.n_features() != 1 {
        return Err(IoError::NotImage);
    }
    let mut out = fs::File::create(path)?;
    write!(out, "P5\n{w} {h}\n255\n")?;
    let pixels: Vec<u8> = data
        .samples()
        .column(0)
        .iter()
        .map(|&v| v.round().clamp(0.0, 255.0) as u8)
        .collect();
    out.write_all(&pixels)?;
    Ok(())
}

/// The 64x64 two-class test image: left half intensity 0, right half 128,
/// with ground-truth labels 0/1.
pub fn synth_two_class_image() -> Dataset {
    let (h, w) = (64usize, 64usize);
    let mut pixels = Vec::with_capacity(h * w);
    let mut labels = Vec::with_capacity(h * w);
    for _row in 0..h {
        for col in 0..w {
            let right = col >= w / 2;
            pixels.push(if right { 128.0 } else { 0.0 });
            labels.push(usize::from(right));
        }
    }
    let samples = Array2::from_shape_vec((h * w, 1), pixels).expect("counted pixels");
    Dataset::new(samples)
        .expect("finite image")
        .with_labels(labels)
        .expect("label per pixel")
        .with_grid(h, w)
        .expect("grid covers pixels")
}

/// Metrics block of a result file; absent entries serialize as null.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub accuracy_percent: Option<f64>,
    pub best_objective: Option<f64>,
    pub restarts: Option<usize>,
    pub best_seed: Option<u64>,
    pub gamma_selected: Option<f64>,
    pub seconds: Option<f64>,
}

/// Versioned on-disk record of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub schema_version: u32,
    pub timestamp_unix: u64,
    pub config: ModelConfig,
    pub seed: u64,
    pub iterations: usize,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
    pub metrics: RunMetrics,
    pub hard_labels: Vec<usize>,
}

pub const RESULT_SCHEMA_VERSION: u32 = 1;

/// Serializes a run and its metrics as pretty JSON with stable key order.
pub fn save_result(
    path: impl AsRef<Path>,
    result: &RunResult,
    metrics: &RunMetrics,
) -> Result<(), IoError> {
    let record = ResultFile {
        schema_version: RESULT_SCHEMA_VERSION,
        timestamp_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        config: result.config_echo.clone(),
        seed: result.seed_echo,
        iterations: result.iterations_used,
        converged: result.converged,
        objective_trace: result.final_state.objective_trace.clone(),
        metrics: metrics.clone(),
        hard_labels: result.hard_labels.clone(),
    };
    let json = serde_json::to_string_pretty(&record)?;
    fs::write(path, json)?;
    Ok(())
}

/// Reads a result file back.
pub fn load_result(path: impl AsRef<Path>) -> Result<ResultFile, IoError> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run, Init};

    fn write_temp(content: &[u8], ext: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(ext).tempfile().unwrap();
        f.write_all(content).unwrap();
        f
    }

    #[test]
    fn csv_string_labels_first_appearance() {
        let f = write_temp(b"1.0,2.0,a\n3.0,4.0,b\n5.0,6.0,a\n", ".csv");
        let data = load_csv(f.path(), Some(2), false).unwrap();
        assert_eq!(data.n_samples(), 3);
        assert_eq!(data.n_features(), 2);
        assert_eq!(data.labels().unwrap(), &[0, 1, 0]);
    }

    #[test]
    fn csv_rejects_nan_feature() {
        let f = write_temp(b"1.0,NaN\n2.0,3.0\n", ".csv");
        assert!(matches!(
            load_csv(f.path(), None, false),
            Err(IoError::NonNumericFeature { row: 1, column: 2 })
        ));
    }

    #[test]
    fn csv_rejects_ragged_rows() {
        let f = write_temp(b"1.0,2.0\n3.0\n", ".csv");
        assert!(matches!(load_csv(f.path(), None, false), Err(IoError::RaggedRows { row: 2, .. })));
    }

    #[test]
    fn csv_reports_parse_position() {
        let f = write_temp(b"1.0,2.0\n3.0,abc\n", ".csv");
        match load_csv(f.path(), None, false) {
            Err(IoError::ParseError { row: 2, column: 2, token }) => assert_eq!(token, "abc"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn iris_asset_loads() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/iris.csv");
        let data = load_csv(path, Some(4), true).unwrap();
        assert_eq!(data.n_samples(), 150);
        assert_eq!(data.n_features(), 4);
        let classes = data.labels().unwrap().iter().max().unwrap() + 1;
        assert_eq!(classes, 3);
    }

    #[test]
    fn pgm_ascii_parses() {
        let f = write_temp(b"P2\n# comment\n2 2\n255\n0 128\n128 0\n", ".pgm");
        let data = load_pgm(f.path()).unwrap();
        assert_eq!(data.grid(), Some((2, 2)));
        assert_eq!(data.samples().column(0).to_vec(), vec![0.0, 128.0, 128.0, 0.0]);
    }

    #[test]
    fn pgm_round_trip_exact() {
        let img = synth_two_class_image();
        let f = tempfile::Builder::new().suffix(".pgm").tempfile().unwrap();
        save_pgm(f.path(), &img).unwrap();
        let back = load_pgm(f.path()).unwrap();
        assert_eq!(back.samples(), img.samples());
        assert_eq!(back.grid(), img.grid());
    }

    #[test]
    fn pgm_rejects_color_format() {
        let f = write_temp(b"P6\n2 2\n255\n", ".ppm");
        assert!(matches!(load_pgm(f.path()), Err(IoError::UnsupportedFormat(_))));
    }

    #[test]
    fn pgm_rejects_truncated_raster() {
        let f = write_temp(b"P5\n4 4\n255\nab", ".pgm");
        assert!(matches!(load_pgm(f.path()), Err(IoError::TruncatedFile { expected: 16, .. })));
    }

    #[test]
    fn pgm_rejects_wide_maxval() {
        let f = write_temp(b"P2\n1 1\n65535\n1000\n", ".pgm");
        assert!(matches!(load_pgm(f.path()), Err(IoError::UnsupportedFormat(_))));
    }

    #[test]
    fn synthetic_image_contract() {
        let img = synth_two_class_image();
        assert_eq!(img.n_samples(), 4096);
        assert_eq!(img.grid(), Some((64, 64)));
        let values: std::collections::BTreeSet<i64> =
            img.samples().iter().map(|&v| v as i64).collect();
        assert_eq!(values.into_iter().collect::<Vec<_>>(), vec![0, 128]);
        let ones = img.labels().unwrap().iter().filter(|&&l| l == 1).count();
        assert_eq!(ones, 2048);
    }

    #[test]
    fn result_file_round_trip() {
        let img = Dataset::new(Array2::from_shape_fn((12, 1), |(i, _)| i as f64)).unwrap();
        let config = ModelConfig::new(2);
        let result = run(&img, &config, Init::Random).unwrap();
        let metrics = RunMetrics {
            accuracy_percent: Some(91.5),
            restarts: Some(3),
            ..RunMetrics::default()
        };
        let f = tempfile::Builder::new().suffix(".json").tempfile().unwrap();
        save_result(f.path(), &result, &metrics).unwrap();
        let back = load_result(f.path()).unwrap();
        assert_eq!(back.schema_version, RESULT_SCHEMA_VERSION);
        assert_eq!(back.config, config);
        assert_eq!(back.hard_labels, result.hard_labels);
        assert_eq!(back.metrics, metrics);
        assert_eq!(back.objective_trace, result.final_state.objective_trace);
    }

    #[test]
    fn save_result_missing_directory_errors() {
        let img = Dataset::new(Array2::from_shape_fn((6, 1), |(i, _)| i as f64)).unwrap();
        let result = run(&img, &ModelConfig::new(2), Init::Random).unwrap();
        let err = save_result("/nonexistent-dir-xyz/out.json", &result, &RunMetrics::default());
        assert!(matches!(err, Err(IoError::Io(_))));
    }
}
