//! Data loading: labeled point clouds, CSV ingestion, the KDD-99 intrusion
//! capture, and synthetic benchmark clouds.
//!
//! Everything funnels into [`LabeledDataset`]: an immutable named cloud of
//! uniform-width finite points with one boolean label per point (`true` =
//! anomaly/positive). Fitting ignores labels; evaluation consumes them.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

// =============================================================================
// Labeled point clouds
// =============================================================================

/// A named point cloud with per-point anomaly labels.
#[derive(Clone, Debug)]
pub struct LabeledDataset {
    name: String,
    points: Vec<Vec<f64>>,
    labels: Vec<bool>,
}

impl LabeledDataset {
    /// Validates and wraps a cloud: as many labels as points, uniform
    /// dimension, all coordinates finite.
    pub fn new(name: impl Into<String>, points: Vec<Vec<f64>>, labels: Vec<bool>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::LabelMismatch {
                scores: points.len(),
                labels: labels.len(),
            });
        }
        if let Some(first) = points.first() {
            let p = first.len();
            for x in &points {
                if x.len() != p {
                    return Err(Error::DimensionMismatch {
                        expected: p,
                        got: x.len(),
                    });
                }
                for (index, &value) in x.iter().enumerate() {
                    if !value.is_finite() {
                        return Err(Error::NonFinite { index, value });
                    }
                }
            }
        }
        Ok(LabeledDataset {
            name: name.into(),
            points,
            labels,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Dimension p (zero for an empty cloud).
    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    /// Number of positive (anomalous) labels.
    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    /// Fraction of positive labels.
    pub fn positive_fraction(&self) -> f64 {
        if self.labels.is_empty() {
            0.0
        } else {
            self.positives() as f64 / self.labels.len() as f64
        }
    }

    /// Writes the cloud as `x1,…,xp,label` CSV (label 0/1, floats in
    /// shortest round-trip form, so reading the file back is lossless).
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        let p = self.dim();
        let header: Vec<String> = (1..=p)
            .map(|j| format!("x{j}"))
            .chain(std::iter::once("label".to_string()))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for (x, &label) in self.points.iter().zip(&self.labels) {
            for value in x {
                write!(out, "{value},")?;
            }
            writeln!(out, "{}", if label { 1 } else { 0 })?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a `x1,…,xp,label` CSV written by [`write_csv`](Self::write_csv).
    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".to_string());
        let schema = CsvSchema {
            has_header: true,
            features: Vec::new(),
            label: Some(ColumnRef::Name("label".to_string())),
            positive_labels: vec!["1".to_string(), "true".to_string()],
        };
        let mut dataset = load_csv(path, &schema)?;
        dataset.name = name;
        Ok(dataset)
    }
}

// =============================================================================
// Generic CSV ingestion
// =============================================================================

/// A column picked by header name or by 0-based position.
#[derive(Clone, Debug)]
pub enum ColumnRef {
    Name(String),
    Index(usize),
}

impl std::fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ColumnRef::Name(name) => write!(f, "{name}"),
            ColumnRef::Index(i) => write!(f, "#{i}"),
        }
    }
}

/// How to read a delimited table into a [`LabeledDataset`].
#[derive(Clone, Debug)]
pub struct CsvSchema {
    /// First row is a header (required for by-name column refs).
    pub has_header: bool,
    /// Feature columns; empty means "every column except the label".
    pub features: Vec<ColumnRef>,
    /// Optional label column (excluded from default features).
    pub label: Option<ColumnRef>,
    /// Values that count as positive, compared case-insensitively after
    /// trimming; anything else is negative.
    pub positive_labels: Vec<String>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            has_header: false,
            features: Vec::new(),
            label: None,
            positive_labels: vec!["1".to_string(), "true".to_string()],
        }
    }
}

pub(crate) fn resolve_column(
    reference: &ColumnRef,
    header: Option<&csv::StringRecord>,
    width: usize,
) -> Result<usize> {
    match reference {
        ColumnRef::Index(i) => {
            if *i >= width {
                return Err(Error::Schema(format!(
                    "column #{i} is out of range for a {width}-column table"
                )));
            }
            Ok(*i)
        }
        ColumnRef::Name(name) => {
            let header = header.ok_or_else(|| {
                Error::Schema(format!(
                    "column {name:?} referenced by name but the table has no header"
                ))
            })?;
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Schema(format!("no column named {name:?} in the header")))
        }
    }
}

/// Loads a comma-separated table as points (+ optional labels).
///
/// Numeric cells that fail to parse produce [`Error::Parse`] with the
/// 1-based data-row number and the offending column; ragged rows are
/// rejected by the CSV reader itself.
pub fn load_csv<P: AsRef<Path>>(path: P, schema: &CsvSchema) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(schema.has_header)
        .from_path(path)?;

    let header = if schema.has_header {
        Some(reader.headers()?.clone())
    } else {
        None
    };

    let positive: Vec<String> = schema
        .positive_labels
        .iter()
        .map(|v| v.trim().to_ascii_lowercase())
        .collect();

    // Feature columns as (index, name) plus the optional label column,
    // resolved lazily once the first record reveals the width.
    type ResolvedColumns = (Vec<(usize, String)>, Option<usize>);
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut columns: Option<ResolvedColumns> = None;

    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let row = row_idx + 1;
        if columns.is_none() {
            let width = header.as_ref().map_or(record.len(), |h| h.len());
            let label_col = match &schema.label {
                Some(reference) => Some(resolve_column(reference, header.as_ref(), width)?),
                None => None,
            };
            let feature_cols: Vec<(usize, String)> = if schema.features.is_empty() {
                (0..width)
                    .filter(|i| Some(*i) != label_col)
                    .map(|i| {
                        let label = header
                            .as_ref()
                            .map(|h| h[i].to_string())
                            .unwrap_or_else(|| format!("#{i}"));
                        (i, label)
                    })
                    .collect()
            } else {
                schema
                    .features
                    .iter()
                    .map(|reference| {
                        resolve_column(reference, header.as_ref(), width)
                            .map(|i| (i, reference.to_string()))
                    })
                    .collect::<Result<_>>()?
            };
            if feature_cols.is_empty() {
                return Err(Error::Schema("no feature columns to read".into()));
            }
            columns = Some((feature_cols, label_col));
        }
        let (feature_cols, label_col) = columns.as_ref().unwrap();

        let mut x = Vec::with_capacity(feature_cols.len());
        for (i, col_name) in feature_cols {
            let cell = record.get(*i).ok_or_else(|| Error::Schema(format!(
                "row {row} is too short for column {col_name}"
            )))?;
            let value: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                row,
                column: col_name.clone(),
                value: cell.to_string(),
            })?;
            x.push(value);
        }
        points.push(x);
        labels.push(match label_col {
            Some(i) => {
                let cell = record.get(*i).unwrap_or("").trim().to_ascii_lowercase();
                positive.contains(&cell)
            }
            None => false,
        });
    }

    LabeledDataset::new(name, points, labels)
}

// =============================================================================
// KDD-99 network intrusion capture
// =============================================================================

/// Column layout of the raw capture (0-based).
const KDD_COLUMNS: usize = 42;
const KDD_DURATION: usize = 0;
const KDD_SERVICE: usize = 2;
const KDD_SRC_BYTES: usize = 4;
const KDD_DST_BYTES: usize = 5;
const KDD_LOGGED_IN: usize = 11;
const KDD_LABEL: usize = 41;

/// The five per-service datasets carved out of the raw capture, plus
/// bookkeeping about the run.
#[derive(Debug)]
pub struct KddDatasets {
    /// Four most frequent services (by name, frequency order) followed by
    /// the pooled `others` dataset.
    pub datasets: Vec<LabeledDataset>,
    /// Rows in the raw capture.
    pub total_rows: u64,
    /// Rows that survived the logged-in filter.
    pub filtered_rows: u64,
    /// SHA-256 of the raw input file (lowercase hex).
    pub sha256: String,
}

/// Compresses a byte count the way the features expect: `ln(x + 0.1)/10`.
#[inline]
pub fn kdd_transform(x: f64) -> f64 {
    (x + 0.1).ln() / 10.0
}

/// Prepares the KDD-99 capture for the intrusion experiments.
///
/// Keeps sessions with a successful login (`logged_in = 1`), maps each to
/// the three features `ln(·+0.1)/10` of duration / source bytes /
/// destination bytes, labels everything not marked `normal` as an attack,
/// and splits by service: one dataset per four most frequent services of
/// the filtered capture (ties broken by name), the rest pooled as `others`.
/// Service names use `-` in place of `_` (`ftp_data` → `ftp-data`).
///
/// The returned digest is the SHA-256 of the exact input bytes, so a
/// preparation run can be pinned to a specific capture file.
pub fn kdd_prepare<P: AsRef<Path>>(path: P) -> Result<KddDatasets> {
    let file = File::open(path.as_ref())?;
    let mut reader = BufReader::with_capacity(1 << 20, file);
    let mut hasher = Sha256::new();

    let mut total_rows: u64 = 0;
    let mut rows: Vec<(String, [f64; 3], bool)> = Vec::new();
    let mut buf: Vec<u8> = Vec::with_capacity(256);

    loop {
        buf.clear();
        let read = reader.read_until(b'\n', &mut buf)?;
        if read == 0 {
            break;
        }
        hasher.update(&buf);
        let line = std::str::from_utf8(&buf)
            .map_err(|_| Error::Schema(format!("non-UTF-8 bytes on line {}", total_rows + 1)))?
            .trim_end_matches(['\n', '\r'])
            .trim();
        if line.is_empty() {
            continue;
        }
        total_rows += 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != KDD_COLUMNS {
            return Err(Error::Schema(format!(
                "row {total_rows} has {} fields, expected {KDD_COLUMNS}",
                fields.len()
            )));
        }
        let logged_in: f64 = parse_kdd_number(fields[KDD_LOGGED_IN], total_rows, "logged_in")?;
        if logged_in <= 0.0 {
            continue;
        }
        let duration = parse_kdd_number(fields[KDD_DURATION], total_rows, "duration")?;
        let src_bytes = parse_kdd_number(fields[KDD_SRC_BYTES], total_rows, "src_bytes")?;
        let dst_bytes = parse_kdd_number(fields[KDD_DST_BYTES], total_rows, "dst_bytes")?;
        let service = fields[KDD_SERVICE].to_string();
        let label = fields[KDD_LABEL].trim_end_matches('.');
        let attack = label != "normal";
        rows.push((
            service,
            [
                kdd_transform(duration),
                kdd_transform(src_bytes),
                kdd_transform(dst_bytes),
            ],
            attack,
        ));
    }
    let sha256 = hex::encode(hasher.finalize());
    let filtered_rows = rows.len() as u64;

    // Rank services of the filtered capture.
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for (service, _, _) in &rows {
        *counts.entry(service.as_str()).or_insert(0) += 1;
    }
    let mut ranked: Vec<(&str, u64)> = counts.iter().map(|(s, c)| (*s, *c)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let top: Vec<String> = ranked
        .iter()
        .take(4)
        .map(|(s, _)| s.to_string())
        .collect();

    let mut buckets: Vec<(String, Vec<Vec<f64>>, Vec<bool>)> = top
        .iter()
        .map(|s| (s.replace('_', "-"), Vec::new(), Vec::new()))
        .collect();
    buckets.push(("others".to_string(), Vec::new(), Vec::new()));

    for (service, x, attack) in rows {
        let slot = top
            .iter()
            .position(|s| *s == service)
            .unwrap_or(buckets.len() - 1);
        buckets[slot].1.push(x.to_vec());
        buckets[slot].2.push(attack);
    }

    let datasets = buckets
        .into_iter()
        .map(|(name, points, labels)| LabeledDataset::new(name, points, labels))
        .collect::<Result<Vec<_>>>()?;

    Ok(KddDatasets {
        datasets,
        total_rows,
        filtered_rows,
        sha256,
    })
}

fn parse_kdd_number(cell: &str, row: u64, column: &str) -> Result<f64> {
    cell.trim().parse().map_err(|_| Error::Parse {
        row: row as usize,
        column: column.to_string(),
        value: cell.to_string(),
    })
}

/// SHA-256 of an arbitrary file, lowercase hex.
pub fn sha256_file<P: AsRef<Path>>(path: P) -> Result<String> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 20];
    loop {
        let read = file.read(&mut buf)?;
        if read == 0 {
            break;
        }
        hasher.update(&buf[..read]);
    }
    Ok(hex::encode(hasher.finalize()))
}

// =============================================================================
// Synthetic benchmark clouds
// =============================================================================

/// Reproducible synthetic clouds for demos and calibration.
#[derive(Clone, Debug)]
pub enum SynthSpec {
    /// A bimodal planar cloud: two anisotropic Gaussian blobs, no anomalies.
    TwoGaussians { n: usize },
    /// Points scattered around the unit circle (inliers, label 0) plus
    /// uniform background clutter over [−2.5, 2.5]² (anomalies, label 1).
    RingWithBackground { n_ring: usize, n_background: usize },
}

/// Draws the requested cloud from a seeded generator: the same spec and
/// seed reproduce the same dataset bit for bit.
pub fn synth_cloud(spec: &SynthSpec, seed: u64) -> Result<LabeledDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal is well-formed");
    match spec {
        SynthSpec::TwoGaussians { n } => {
            if *n == 0 {
                return Err(Error::InvalidSpec("two-gaussians needs n > 0".into()));
            }
            // Invented but fixed shape parameters: two tilted blobs.
            let blobs = [
                ([-1.6, -0.9], [[0.55, 0.0], [0.25, 0.35]]),
                ([1.4, 1.1], [[0.6, 0.0], [-0.2, 0.3]]),
            ];
            let first = n / 2;
            let mut points = Vec::with_capacity(*n);
            for i in 0..*n {
                let (mean, chol) = blobs[usize::from(i >= first)];
                let z0 = normal.sample(&mut rng);
                let z1 = normal.sample(&mut rng);
                points.push(vec![
                    mean[0] + chol[0][0] * z0 + chol[0][1] * z1,
                    mean[1] + chol[1][0] * z0 + chol[1][1] * z1,
                ]);
            }
            let labels = vec![false; *n];
            LabeledDataset::new("two-gaussians", points, labels)
        }
        SynthSpec::RingWithBackground { n_ring, n_background } => {
            if *n_ring == 0 {
                return Err(Error::InvalidSpec(
                    "ring-with-background needs n_ring > 0".into(),
                ));
            }
            let mut points = Vec::with_capacity(n_ring + n_background);
            let mut labels = Vec::with_capacity(n_ring + n_background);
            for _ in 0..*n_ring {
                let theta = rng.random_range(0.0..std::f64::consts::TAU);
                let radius = 1.0 + 0.05 * normal.sample(&mut rng);
                points.push(vec![radius * theta.cos(), radius * theta.sin()]);
                labels.push(false);
            }
            for _ in 0..*n_background {
                points.push(vec![
                    rng.random_range(-2.5..2.5),
                    rng.random_range(-2.5..2.5),
                ]);
                labels.push(true);
            }
            LabeledDataset::new("ring", points, labels)
        }
    }
}
