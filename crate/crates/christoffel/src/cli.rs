//! Command-line surface: fitting, scoring, level-set export, streaming,
//! synthetic data, and the canned network-intrusion experiments.
//!
//! Every flag can come from three places, in priority order: the command
//! line, a `CHRISTOFFEL_<FLAG>` environment variable, and a flat JSON
//! config file (`--config`, or `CHRISTOFFEL_CONFIG`). Exit codes: 0 on
//! success, 1 for I/O, parse, or usage problems, 2 for numerical failure
//! (a singular fit).

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::eval::{aupr, detection_curve, pr_curve, sweep_degree, write_sweep_csv, ScoredDataset};
use crate::ingest::{
    kdd_prepare, load_csv, resolve_column, synth_cloud, ColumnRef, CsvSchema, LabeledDataset,
    SynthSpec,
};
use crate::model::{ChristoffelModel, FitOptions};
use crate::online::OnlineInverse;

/// Parses `std::env::args`, runs the requested command, and returns the
/// process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "christoffel",
    version,
    about = "Fit inverse-moment SOS scores to point clouds and use them for outlier detection"
)]
struct Cli {
    /// Flat JSON object supplying defaults for any flag not given on the
    /// command line or through the environment.
    #[arg(long, global = true, env = "CHRISTOFFEL_CONFIG", value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a model to a CSV point cloud and write a model file.
    Fit(FitArgs),
    /// Score CSV rows with a fitted model, appending a `score` column.
    Score(ScoreArgs),
    /// Sample a planar model on a grid for contour plotting.
    Levelset(LevelsetArgs),
    /// Maintain a model online over a line protocol on stdin/stdout.
    Stream(StreamArgs),
    /// Generate a labeled synthetic benchmark cloud.
    Synth(SynthArgs),
    /// Split the raw KDD-99 capture into per-service labeled datasets.
    Kdd(KddArgs),
    /// Run a canned intrusion-detection experiment on prepared datasets.
    Experiment(ExperimentArgs),
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Input CSV of points (rows are points, columns are coordinates).
    #[arg(long, env = "CHRISTOFFEL_INPUT", value_name = "CSV")]
    input: Option<PathBuf>,
    /// Basis degree d.
    #[arg(long, env = "CHRISTOFFEL_DEGREE")]
    degree: Option<usize>,
    /// Ridge added to the moment-matrix diagonal (default 0).
    #[arg(long, env = "CHRISTOFFEL_RIDGE")]
    ridge: Option<f64>,
    /// Standardize coordinates before fitting (default true).
    #[arg(long, env = "CHRISTOFFEL_PRECONDITION", value_name = "BOOL")]
    precondition: Option<bool>,
    /// Treat the first input row as a header (default false).
    #[arg(long, env = "CHRISTOFFEL_HAS_HEADER", value_name = "BOOL")]
    has_header: Option<bool>,
    /// Column (name or 0-based index) to exclude from the features.
    #[arg(long, env = "CHRISTOFFEL_LABEL_COLUMN", value_name = "COL")]
    label_column: Option<String>,
    /// Output model file.
    #[arg(long, env = "CHRISTOFFEL_OUTPUT", value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    /// Model file written by `fit`.
    #[arg(long, env = "CHRISTOFFEL_MODEL", value_name = "FILE")]
    model: Option<PathBuf>,
    /// Input CSV of rows to score.
    #[arg(long, env = "CHRISTOFFEL_INPUT", value_name = "CSV")]
    input: Option<PathBuf>,
    /// Treat the first input row as a header (default false).
    #[arg(long, env = "CHRISTOFFEL_HAS_HEADER", value_name = "BOOL")]
    has_header: Option<bool>,
    /// Column (name or 0-based index) passed through, not scored.
    #[arg(long, env = "CHRISTOFFEL_LABEL_COLUMN", value_name = "COL")]
    label_column: Option<String>,
    /// Output CSV: the input columns plus a final `score` column.
    #[arg(long, env = "CHRISTOFFEL_OUTPUT", value_name = "CSV")]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LevelsetArgs {
    /// Model file written by `fit` (must be two-dimensional).
    #[arg(long, env = "CHRISTOFFEL_MODEL", value_name = "FILE")]
    model: Option<PathBuf>,
    /// Bounding box as x0,y0,x1,y1.
    #[arg(
        long,
        env = "CHRISTOFFEL_BBOX",
        value_name = "X0,Y0,X1,Y1",
        allow_hyphen_values = true
    )]
    bbox: Option<String>,
    /// Grid resolution as nx,ny.
    #[arg(long, env = "CHRISTOFFEL_RES", value_name = "NX,NY")]
    res: Option<String>,
    /// Output CSV of x,y,q samples.
    #[arg(long, env = "CHRISTOFFEL_OUTPUT", value_name = "CSV")]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StreamArgs {
    /// Basis degree d.
    #[arg(long, env = "CHRISTOFFEL_DEGREE")]
    degree: Option<usize>,
    /// Seed ridge for the streaming inverse (default 1e-6).
    #[arg(long, env = "CHRISTOFFEL_RIDGE0")]
    ridge0: Option<f64>,
    /// Inserts between exact refactorizations (default 512).
    #[arg(long, env = "CHRISTOFFEL_CADENCE")]
    cadence: Option<usize>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Cloud family: two-gaussians or ring.
    #[arg(long, env = "CHRISTOFFEL_KIND", value_name = "KIND")]
    kind: Option<String>,
    /// Points for two-gaussians (default 1000).
    #[arg(long, env = "CHRISTOFFEL_N")]
    n: Option<usize>,
    /// Ring points for ring (default 1000).
    #[arg(long, env = "CHRISTOFFEL_N_RING")]
    n_ring: Option<usize>,
    /// Background points for ring (default 40).
    #[arg(long, env = "CHRISTOFFEL_N_BACKGROUND")]
    n_background: Option<usize>,
    /// Generator seed (required: no hidden randomness).
    #[arg(long, env = "CHRISTOFFEL_SEED")]
    seed: Option<u64>,
    /// Output labeled CSV.
    #[arg(long, env = "CHRISTOFFEL_OUTPUT", value_name = "CSV")]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct KddArgs {
    /// Raw KDD-99 capture file (kddcup.data format).
    #[arg(long, env = "CHRISTOFFEL_RAW", value_name = "FILE")]
    raw: Option<PathBuf>,
    /// Directory for the per-service CSVs and manifest.
    #[arg(long, env = "CHRISTOFFEL_OUTDIR", value_name = "DIR")]
    outdir: Option<PathBuf>,
    /// Fail unless the raw file's SHA-256 equals this hex digest.
    #[arg(long, env = "CHRISTOFFEL_EXPECT_SHA256", value_name = "HEX")]
    expect_sha256: Option<String>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// Which experiment: fig2left (per-service detection curves at d=3)
    /// or fig2right (degree sweep on the others dataset).
    #[arg(long, env = "CHRISTOFFEL_WHICH", value_name = "NAME")]
    which: Option<String>,
    /// Directory produced by the kdd command (holds manifest.json).
    #[arg(long, env = "CHRISTOFFEL_DATA", value_name = "DIR")]
    data: Option<PathBuf>,
    /// Directory for the emitted curve and table CSVs.
    #[arg(long, env = "CHRISTOFFEL_OUTDIR", value_name = "DIR")]
    outdir: Option<PathBuf>,
    /// Degrees for fig2right as a comma list (default 1,2,3,4,5,6).
    #[arg(long, env = "CHRISTOFFEL_DEGREES", value_name = "D,D,...")]
    degrees: Option<String>,
    /// Ridge used for the experiment fits (default 0).
    #[arg(long, env = "CHRISTOFFEL_RIDGE")]
    ridge: Option<f64>,
}

fn dispatch(cli: Cli) -> Result<()> {
    let cfg = ConfigDefaults::load(cli.config.as_deref())?;
    match cli.command {
        Command::Fit(a) => cmd_fit(a, &cfg),
        Command::Score(a) => cmd_score(a, &cfg),
        Command::Levelset(a) => cmd_levelset(a, &cfg),
        Command::Stream(a) => cmd_stream(a, &cfg),
        Command::Synth(a) => cmd_synth(a, &cfg),
        Command::Kdd(a) => cmd_kdd(a, &cfg),
        Command::Experiment(a) => cmd_experiment(a, &cfg),
    }
}

// =============================================================================
// Config-file defaults
// =============================================================================

/// Every key a config file may define — the union of all long flag names.
/// A key the active subcommand does not use is legal (shared config files);
/// a key outside this list is a hard error.
const KNOWN_CONFIG_KEYS: &[&str] = &[
    "bbox",
    "cadence",
    "data",
    "degree",
    "degrees",
    "expect-sha256",
    "has-header",
    "input",
    "kind",
    "label-column",
    "model",
    "n",
    "n-background",
    "n-ring",
    "outdir",
    "output",
    "precondition",
    "raw",
    "res",
    "ridge",
    "ridge0",
    "seed",
    "which",
];

struct ConfigDefaults {
    map: serde_json::Map<String, Value>,
}

impl ConfigDefaults {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(ConfigDefaults {
                map: serde_json::Map::new(),
            });
        };
        let text = fs::read_to_string(path)?;
        let parsed: Value = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("config {}: {e}", path.display())))?;
        let Value::Object(map) = parsed else {
            return Err(Error::Config(format!(
                "config {} must be a flat JSON object",
                path.display()
            )));
        };
        for (key, value) in &map {
            if !KNOWN_CONFIG_KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!("unknown config key {key:?}")));
            }
            if value.is_object() || value.is_array() || value.is_null() {
                return Err(Error::Config(format!(
                    "config key {key:?} must be a scalar value"
                )));
            }
        }
        Ok(ConfigDefaults { map })
    }

    fn string(&self, key: &str) -> Option<String> {
        self.map.get(key).map(|v| match v {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        })
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.string(key).map(PathBuf::from)
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(Value::Number(n)) => Ok(n.as_f64()),
            Some(Value::String(s)) => s
                .trim()
                .parse()
                .map(Some)
                .map_err(|_| bad_config_type(key, "a number")),
            Some(_) => Err(bad_config_type(key, "a number")),
        }
    }

    fn usize(&self, key: &str) -> Result<Option<usize>> {
        Ok(self.u64(key)?.map(|v| v as usize))
    }

    fn u64(&self, key: &str) -> Result<Option<u64>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(Value::Number(n)) => n
                .as_u64()
                .map(Some)
                .ok_or_else(|| bad_config_type(key, "a nonnegative integer")),
            Some(Value::String(s)) => s
                .trim()
                .parse()
                .map(Some)
                .map_err(|_| bad_config_type(key, "a nonnegative integer")),
            Some(_) => Err(bad_config_type(key, "a nonnegative integer")),
        }
    }

    fn bool(&self, key: &str) -> Result<Option<bool>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(Value::Bool(b)) => Ok(Some(*b)),
            Some(Value::String(s)) => match s.trim() {
                "true" => Ok(Some(true)),
                "false" => Ok(Some(false)),
                _ => Err(bad_config_type(key, "true or false")),
            },
            Some(_) => Err(bad_config_type(key, "true or false")),
        }
    }
}

fn bad_config_type(key: &str, wanted: &str) -> Error {
    Error::Config(format!("config key {key:?} must be {wanted}"))
}

fn missing_flag(flag: &str) -> Error {
    Error::Config(format!(
        "missing --{flag}: give the flag, set CHRISTOFFEL_{}, or add {flag:?} to the config file",
        flag.to_uppercase().replace('-', "_")
    ))
}

/// All-digit references are positions, anything else is a header name.
fn parse_column_ref(text: &str) -> ColumnRef {
    if !text.is_empty() && text.bytes().all(|b| b.is_ascii_digit()) {
        ColumnRef::Index(text.parse().expect("all-digit string fits usize"))
    } else {
        ColumnRef::Name(text.to_string())
    }
}

fn parse_f64_list(text: &str, flag: &'static str, expected: usize) -> Result<Vec<f64>> {
    let values: Vec<f64> = text
        .split(',')
        .map(|c| c.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::InvalidParameter {
            name: flag,
            reason: format!("expected {expected} comma-separated numbers, got {text:?}"),
        })?;
    if values.len() != expected {
        return Err(Error::InvalidParameter {
            name: flag,
            reason: format!("expected {expected} comma-separated numbers, got {text:?}"),
        });
    }
    Ok(values)
}

fn parse_usize_list(text: &str, flag: &'static str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|c| {
            c.trim().parse::<usize>().map_err(|_| Error::InvalidParameter {
                name: flag,
                reason: format!("expected comma-separated integers, got {text:?}"),
            })
        })
        .collect()
}

// =============================================================================
// fit
// =============================================================================

fn cmd_fit(a: FitArgs, cfg: &ConfigDefaults) -> Result<()> {
    let input = a
        .input
        .or_else(|| cfg.path("input"))
        .ok_or_else(|| missing_flag("input"))?;
    let degree = a
        .degree
        .or(cfg.usize("degree")?)
        .ok_or_else(|| missing_flag("degree"))?;
    let ridge = a.ridge.or(cfg.f64("ridge")?).unwrap_or(0.0);
    let precondition = a.precondition.or(cfg.bool("precondition")?).unwrap_or(true);
    let has_header = a.has_header.or(cfg.bool("has-header")?).unwrap_or(false);
    let label_column = a.label_column.or_else(|| cfg.string("label-column"));
    let output = a
        .output
        .or_else(|| cfg.path("output"))
        .ok_or_else(|| missing_flag("output"))?;

    let schema = CsvSchema {
        has_header,
        label: label_column.as_deref().map(parse_column_ref),
        ..CsvSchema::default()
    };
    let data = load_csv(&input, &schema)?;
    let opts = FitOptions { ridge, precondition };
    let model = ChristoffelModel::fit_points(data.points(), degree, &opts)?;
    println!(
        "n={} p={} d={degree} s(d)={}",
        model.count(),
        model.nvars(),
        model.basis().len()
    );
    println!("smallest Cholesky pivot: {:e}", model.min_pivot());
    model.save(&output)?;
    println!("model written to {}", output.display());
    Ok(())
}

// =============================================================================
// score
// =============================================================================

fn cmd_score(a: ScoreArgs, cfg: &ConfigDefaults) -> Result<()> {
    let model_path = a
        .model
        .or_else(|| cfg.path("model"))
        .ok_or_else(|| missing_flag("model"))?;
    let input = a
        .input
        .or_else(|| cfg.path("input"))
        .ok_or_else(|| missing_flag("input"))?;
    let has_header = a.has_header.or(cfg.bool("has-header")?).unwrap_or(false);
    let label_column = a.label_column.or_else(|| cfg.string("label-column"));
    let output = a
        .output
        .or_else(|| cfg.path("output"))
        .ok_or_else(|| missing_flag("output"))?;

    let model = ChristoffelModel::load(&model_path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .from_path(&input)?;
    let header = if has_header {
        Some(reader.headers()?.clone())
    } else {
        None
    };
    let mut writer = csv::Writer::from_path(&output)?;

    let label_ref = label_column.as_deref().map(parse_column_ref);
    // Columns are resolved against the header now, or against the first
    // data row for headerless input.
    let mut columns: Option<(Vec<usize>, Option<usize>)> = None;
    let resolve = |width: usize| -> Result<(Vec<usize>, Option<usize>)> {
        let label_col = match &label_ref {
            Some(reference) => Some(resolve_column(reference, header.as_ref(), width)?),
            None => None,
        };
        let feature_cols: Vec<usize> = (0..width).filter(|i| Some(*i) != label_col).collect();
        if feature_cols.is_empty() {
            return Err(Error::Schema("no feature columns to score".into()));
        }
        Ok((feature_cols, label_col))
    };

    let mut wrote_header = false;
    if let Some(h) = &header {
        columns = Some(resolve(h.len())?);
        let mut cells: Vec<&str> = h.iter().collect();
        cells.push("score");
        writer.write_record(&cells)?;
        wrote_header = true;
    }

    let mut x: Vec<f64> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let row = row_idx + 1;
        if columns.is_none() {
            columns = Some(resolve(record.len())?);
        }
        let (feature_cols, _) = columns.as_ref().unwrap();
        if !wrote_header {
            let mut cells: Vec<String> = (1..=record.len()).map(|j| format!("x{j}")).collect();
            cells.push("score".to_string());
            writer.write_record(&cells)?;
            wrote_header = true;
        }
        x.clear();
        for &i in feature_cols {
            let cell = record.get(i).unwrap_or("");
            let value: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                row,
                column: format!("#{i}"),
                value: cell.to_string(),
            })?;
            x.push(value);
        }
        let score = model.score(&x)?;
        let mut cells: Vec<String> = record.iter().map(str::to_string).collect();
        cells.push(format!("{score}"));
        writer.write_record(&cells)?;
    }
    if !wrote_header {
        // Headerless and empty: emit the one column we know about.
        writer.write_record(["score"])?;
    }
    writer.flush()?;
    Ok(())
}

// =============================================================================
// levelset
// =============================================================================

fn cmd_levelset(a: LevelsetArgs, cfg: &ConfigDefaults) -> Result<()> {
    let model_path = a
        .model
        .or_else(|| cfg.path("model"))
        .ok_or_else(|| missing_flag("model"))?;
    let bbox = a
        .bbox
        .or_else(|| cfg.string("bbox"))
        .ok_or_else(|| missing_flag("bbox"))?;
    let res = a
        .res
        .or_else(|| cfg.string("res"))
        .ok_or_else(|| missing_flag("res"))?;
    let output = a
        .output
        .or_else(|| cfg.path("output"))
        .ok_or_else(|| missing_flag("output"))?;

    let corners = parse_f64_list(&bbox, "--bbox", 4)?;
    let resolution = parse_usize_list(&res, "--res")?;
    if resolution.len() != 2 {
        return Err(Error::InvalidParameter {
            name: "--res",
            reason: format!("expected nx,ny, got {res:?}"),
        });
    }
    let (x0, y0, x1, y1) = (corners[0], corners[1], corners[2], corners[3]);
    let (nx, ny) = (resolution[0], resolution[1]);

    let model = ChristoffelModel::load(&model_path)?;
    let grid = model.levelset_grid(x0, x1, y0, y1, nx, ny)?;
    grid.write_csv(&output)?;
    println!(
        "sampled {}x{} grid, threshold {} -> {}",
        nx,
        ny,
        grid.threshold,
        output.display()
    );
    Ok(())
}

// =============================================================================
// stream
// =============================================================================

fn cmd_stream(a: StreamArgs, cfg: &ConfigDefaults) -> Result<()> {
    let degree = a
        .degree
        .or(cfg.usize("degree")?)
        .ok_or_else(|| missing_flag("degree"))?;
    let ridge0 = a.ridge0.or(cfg.f64("ridge0")?).unwrap_or(1e-6);
    let cadence = a.cadence.or(cfg.usize("cadence")?);

    let stdin = io::stdin();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut online: Option<OnlineInverse> = None;

    for line in stdin.lock().lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (verb, rest) = match line.split_once(char::is_whitespace) {
            Some((v, r)) => (v, r.trim()),
            None => (line, ""),
        };
        let reply = stream_command(&mut online, verb, rest, degree, ridge0, cadence);
        match reply {
            Ok(Some(text)) => {
                writeln!(out, "{text}")?;
                out.flush()?;
            }
            Ok(None) => {}
            Err(e) => {
                writeln!(out, "error: {e}")?;
                out.flush()?;
            }
        }
    }
    Ok(())
}

/// One protocol line: `add x1,…,xp` inserts silently, `score x1,…,xp`
/// replies with the current score, `snapshot PATH` writes a model file and
/// replies `ok`. Any failure becomes an `error: …` line and the stream
/// keeps serving.
fn stream_command(
    online: &mut Option<OnlineInverse>,
    verb: &str,
    rest: &str,
    degree: usize,
    ridge0: f64,
    cadence: Option<usize>,
) -> Result<Option<String>> {
    match verb {
        "add" => {
            let x = parse_stream_coords(rest)?;
            if online.is_none() {
                let fresh = match cadence {
                    Some(c) => OnlineInverse::with_cadence(x.len(), degree, ridge0, c)?,
                    None => OnlineInverse::new(x.len(), degree, ridge0)?,
                };
                *online = Some(fresh);
            }
            online.as_mut().unwrap().insert(&x)?;
            Ok(None)
        }
        "score" => {
            let x = parse_stream_coords(rest)?;
            match online {
                None => Err(Error::EmptyMeasure),
                Some(o) => Ok(Some(format!("{}", o.score(&x)?))),
            }
        }
        "snapshot" => {
            if rest.is_empty() {
                return Err(Error::Config("snapshot needs a file path".into()));
            }
            match online {
                None => Err(Error::EmptyMeasure),
                Some(o) => {
                    o.snapshot()?.save(Path::new(rest))?;
                    Ok(Some("ok".to_string()))
                }
            }
        }
        other => Err(Error::Config(format!(
            "unknown command {other:?} (expected add, score, or snapshot)"
        ))),
    }
}

fn parse_stream_coords(rest: &str) -> Result<Vec<f64>> {
    if rest.is_empty() {
        return Err(Error::Config(
            "expected comma-separated coordinates after the command".into(),
        ));
    }
    rest.split(',')
        .map(|c| {
            c.trim().parse::<f64>().map_err(|_| {
                Error::Config(format!(
                    "cannot parse {:?} as a number (coordinates are comma-separated: x1,...,xp)",
                    c.trim()
                ))
            })
        })
        .collect()
}

// =============================================================================
// synth
// =============================================================================

fn cmd_synth(a: SynthArgs, cfg: &ConfigDefaults) -> Result<()> {
    let kind = a
        .kind
        .or_else(|| cfg.string("kind"))
        .ok_or_else(|| missing_flag("kind"))?;
    let seed = a
        .seed
        .or(cfg.u64("seed")?)
        .ok_or_else(|| missing_flag("seed"))?;
    let output = a
        .output
        .or_else(|| cfg.path("output"))
        .ok_or_else(|| missing_flag("output"))?;

    let spec = match kind.as_str() {
        "two-gaussians" => SynthSpec::TwoGaussians {
            n: a.n.or(cfg.usize("n")?).unwrap_or(1000),
        },
        "ring" => SynthSpec::RingWithBackground {
            n_ring: a.n_ring.or(cfg.usize("n-ring")?).unwrap_or(1000),
            n_background: a.n_background.or(cfg.usize("n-background")?).unwrap_or(40),
        },
        other => {
            return Err(Error::InvalidParameter {
                name: "--kind",
                reason: format!("unknown kind {other:?} (expected two-gaussians or ring)"),
            })
        }
    };
    let data = synth_cloud(&spec, seed)?;
    data.write_csv(&output)?;
    println!(
        "wrote {} points ({} outliers) to {}",
        data.len(),
        data.positives(),
        output.display()
    );
    Ok(())
}

// =============================================================================
// kdd
// =============================================================================

/// Manifest written next to the per-service CSVs; the experiment command
/// locates its inputs through it.
#[derive(Serialize, Deserialize)]
struct Manifest {
    source_sha256: String,
    total_rows: u64,
    filtered_rows: u64,
    datasets: Vec<ManifestEntry>,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    file: String,
    rows: u64,
    attacks: u64,
}

const FULL_CAPTURE_ROWS: u64 = 4_898_431;

/// Published per-service partition of the full 4,898,431-row capture:
/// name, row count, attack proportion as printed (with its decimal places).
const FULL_CAPTURE_TABLE: [(&str, usize, f64, i32); 5] = [
    ("http", 567_498, 0.004, 3),
    ("smtp", 95_156, 0.0003, 4),
    ("ftp-data", 30_464, 0.023, 3),
    ("ftp", 4_091, 0.077, 3),
    ("others", 5_858, 0.016, 3),
];

fn cmd_kdd(a: KddArgs, cfg: &ConfigDefaults) -> Result<()> {
    let raw = a
        .raw
        .or_else(|| cfg.path("raw"))
        .ok_or_else(|| missing_flag("raw"))?;
    let outdir = a
        .outdir
        .or_else(|| cfg.path("outdir"))
        .ok_or_else(|| missing_flag("outdir"))?;
    let expect = a.expect_sha256.or_else(|| cfg.string("expect-sha256"));

    let kdd = kdd_prepare(&raw)?;
    if let Some(expected) = expect {
        if !expected.eq_ignore_ascii_case(&kdd.sha256) {
            return Err(Error::Config(format!(
                "raw capture digest mismatch: expected {expected}, computed {}",
                kdd.sha256
            )));
        }
    }

    fs::create_dir_all(&outdir)?;
    let mut entries = Vec::new();
    for ds in &kdd.datasets {
        let file = format!("{}.csv", ds.name());
        ds.write_csv(outdir.join(&file))?;
        println!(
            "{}: {} rows, {} attacks (fraction {:.4})",
            ds.name(),
            ds.len(),
            ds.positives(),
            ds.positive_fraction()
        );
        entries.push(ManifestEntry {
            name: ds.name().to_string(),
            file,
            rows: ds.len() as u64,
            attacks: ds.positives() as u64,
        });
    }
    let manifest = Manifest {
        source_sha256: kdd.sha256.clone(),
        total_rows: kdd.total_rows,
        filtered_rows: kdd.filtered_rows,
        datasets: entries,
    };
    let mut manifest_json = serde_json::to_string_pretty(&manifest)?;
    manifest_json.push('\n');
    fs::write(outdir.join("manifest.json"), manifest_json)?;
    println!("source sha256: {}", kdd.sha256);
    println!(
        "total rows: {}; kept after login filter: {}",
        kdd.total_rows, kdd.filtered_rows
    );
    if kdd.total_rows == FULL_CAPTURE_ROWS {
        verify_full_capture(&kdd.datasets)?;
        println!("full-capture partition check passed");
    }
    Ok(())
}

/// When the input is the complete capture, the split must land exactly on
/// the published partition — a strong end-to-end check of the whole
/// pipeline (filtering, counting, ranking, labeling).
fn verify_full_capture(datasets: &[LabeledDataset]) -> Result<()> {
    for (ds, (name, rows, proportion, decimals)) in datasets.iter().zip(FULL_CAPTURE_TABLE) {
        if ds.name() != name || ds.len() != rows {
            return Err(Error::Schema(format!(
                "full-capture check failed: expected {name} with {rows} rows, got {} with {}",
                ds.name(),
                ds.len()
            )));
        }
        let scale = 10f64.powi(decimals);
        let got = (ds.positive_fraction() * scale).round();
        let want = (proportion * scale).round();
        if got != want {
            return Err(Error::Schema(format!(
                "full-capture check failed: {name} attack fraction {} rounds to {}, expected {}",
                ds.positive_fraction(),
                got / scale,
                proportion
            )));
        }
    }
    Ok(())
}

// =============================================================================
// experiment
// =============================================================================

fn cmd_experiment(a: ExperimentArgs, cfg: &ConfigDefaults) -> Result<()> {
    let which = a
        .which
        .or_else(|| cfg.string("which"))
        .ok_or_else(|| missing_flag("which"))?;
    let data = a
        .data
        .or_else(|| cfg.path("data"))
        .ok_or_else(|| missing_flag("data"))?;
    let outdir = a
        .outdir
        .or_else(|| cfg.path("outdir"))
        .ok_or_else(|| missing_flag("outdir"))?;
    let ridge = a.ridge.or(cfg.f64("ridge")?).unwrap_or(0.0);

    let manifest_path = data.join("manifest.json");
    let manifest_text = fs::read_to_string(&manifest_path).map_err(|e| {
        Error::Config(format!(
            "cannot read {}: {e} (run the kdd command first)",
            manifest_path.display()
        ))
    })?;
    let manifest: Manifest = serde_json::from_str(&manifest_text)
        .map_err(|e| Error::Config(format!("malformed manifest: {e}")))?;
    fs::create_dir_all(&outdir)?;
    let opts = FitOptions {
        ridge,
        precondition: true,
    };

    match which.as_str() {
        "fig2left" => {
            for entry in &manifest.datasets {
                let ds = LabeledDataset::read_csv(data.join(&entry.file))?;
                let model = ChristoffelModel::fit_points(ds.points(), 3, &opts)?;
                let sd = ScoredDataset::from_model(&model, &ds)?;
                let curve = detection_curve(&sd)?;
                let file = outdir.join(format!("{}-detection.csv", entry.name));
                curve.write_csv(&file)?;
                println!(
                    "{}: n={} aupr={:.4} -> {}",
                    entry.name,
                    ds.len(),
                    aupr(&sd)?,
                    file.display()
                );
            }
        }
        "fig2right" => {
            let degrees_text = a
                .degrees
                .or_else(|| cfg.string("degrees"))
                .unwrap_or_else(|| "1,2,3,4,5,6".to_string());
            let degrees = parse_usize_list(&degrees_text, "--degrees")?;
            let entry = manifest
                .datasets
                .iter()
                .find(|e| e.name == "others")
                .ok_or_else(|| Error::Config("no `others` dataset in the manifest".into()))?;
            let ds = LabeledDataset::read_csv(data.join(&entry.file))?;
            let rows = sweep_degree(&ds, &degrees, &opts)?;
            write_sweep_csv(outdir.join("aupr.csv"), &rows)?;
            for row in &rows {
                match &row.outcome {
                    Ok(value) => {
                        let model = ChristoffelModel::fit_points(ds.points(), row.degree, &opts)?;
                        let sd = ScoredDataset::from_model(&model, &ds)?;
                        let curve = pr_curve(&sd)?;
                        let file = outdir.join(format!("others-pr-d{}.csv", row.degree));
                        curve.write_csv(&file)?;
                        println!("d={}: aupr={:.4} -> {}", row.degree, value, file.display());
                    }
                    Err(message) => println!("d={}: failed: {message}", row.degree),
                }
            }
            println!("table -> {}", outdir.join("aupr.csv").display());
        }
        other => {
            return Err(Error::InvalidParameter {
                name: "--which",
                reason: format!("unknown experiment {other:?} (expected fig2left or fig2right)"),
            })
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_files_reject_unknown_keys_and_wrong_types() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");

        fs::write(&path, r#"{"degree": 3, "ridge": 1e-4}"#).unwrap();
        let cfg = ConfigDefaults::load(Some(&path)).unwrap();
        assert_eq!(cfg.usize("degree").unwrap(), Some(3));
        assert_eq!(cfg.f64("ridge").unwrap(), Some(1e-4));
        assert_eq!(cfg.usize("cadence").unwrap(), None);

        fs::write(&path, r#"{"degreee": 3}"#).unwrap();
        assert!(matches!(
            ConfigDefaults::load(Some(&path)),
            Err(Error::Config(_))
        ));

        fs::write(&path, r#"{"degree": {"a": 1}}"#).unwrap();
        assert!(matches!(
            ConfigDefaults::load(Some(&path)),
            Err(Error::Config(_))
        ));

        fs::write(&path, r#"[1, 2]"#).unwrap();
        assert!(matches!(
            ConfigDefaults::load(Some(&path)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn config_values_coerce_from_strings() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        fs::write(
            &path,
            r#"{"ridge": "1e-3", "degree": "4", "precondition": "false", "seed": 7}"#,
        )
        .unwrap();
        let cfg = ConfigDefaults::load(Some(&path)).unwrap();
        assert_eq!(cfg.f64("ridge").unwrap(), Some(1e-3));
        assert_eq!(cfg.usize("degree").unwrap(), Some(4));
        assert_eq!(cfg.bool("precondition").unwrap(), Some(false));
        assert_eq!(cfg.u64("seed").unwrap(), Some(7));

        fs::write(&path, r#"{"degree": 2.5}"#).unwrap();
        let cfg = ConfigDefaults::load(Some(&path)).unwrap();
        assert!(cfg.usize("degree").is_err(), "fractional degree is rejected");
    }

    #[test]
    fn column_refs_distinguish_indices_from_names() {
        assert!(matches!(parse_column_ref("7"), ColumnRef::Index(7)));
        assert!(matches!(parse_column_ref("label"), ColumnRef::Name(_)));
        assert!(matches!(parse_column_ref("x2"), ColumnRef::Name(_)));
    }

    #[test]
    fn list_flags_parse_and_reject_garbage() {
        assert_eq!(
            parse_f64_list("-2.5,0,2.5,1", "--bbox", 4).unwrap(),
            vec![-2.5, 0.0, 2.5, 1.0]
        );
        assert!(parse_f64_list("1,2,3", "--bbox", 4).is_err());
        assert!(parse_f64_list("a,b,c,d", "--bbox", 4).is_err());
        assert_eq!(parse_usize_list("1,2,3", "--degrees").unwrap(), vec![1, 2, 3]);
        assert!(parse_usize_list("1,-2", "--degrees").is_err());
    }

    #[test]
    fn stream_protocol_replies_in_order() {
        let mut online = None;
        // Scoring before any insert is an error, not a crash.
        let err = stream_command(&mut online, "score", "0", 1, 1e-9, None).unwrap_err();
        assert!(matches!(err, Error::EmptyMeasure));

        stream_command(&mut online, "add", "-1", 1, 1e-9, None).unwrap();
        stream_command(&mut online, "add", "1", 1, 1e-9, None).unwrap();
        let reply = stream_command(&mut online, "score", "0", 1, 1e-9, None)
            .unwrap()
            .expect("score replies with a value");
        let value: f64 = reply.parse().unwrap();
        // Symmetric pair, degree 1: the midpoint scores 1 up to the tiny
        // seed ridge.
        assert!((value - 1.0).abs() < 1e-6, "got {value}");

        let err = stream_command(&mut online, "add", "1,2", 1, 1e-9, None).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
        let err = stream_command(&mut online, "warble", "", 1, 1e-9, None).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let err = stream_command(&mut online, "add", "1,oops", 1, 1e-9, None).unwrap_err();
        assert!(matches!(err, Error::Config(_)));

        // The failures above must not have corrupted the stream state.
        let again: f64 = stream_command(&mut online, "score", "0", 1, 1e-9, None)
            .unwrap()
            .unwrap()
            .parse()
            .unwrap();
        assert_eq!(value.to_bits(), again.to_bits());
    }

    #[test]
    fn full_capture_reference_check_accepts_matching_partitions() {
        // Build five datasets whose sizes and attack counts land exactly on
        // the published table (scaled-down content, same bookkeeping).
        let specs = [
            ("http", 567_498usize, 0.004f64, 3i32),
            ("smtp", 95_156, 0.0003, 4),
            ("ftp-data", 30_464, 0.023, 3),
            ("ftp", 4_091, 0.077, 3),
            ("others", 5_858, 0.016, 3),
        ];
        let datasets: Vec<LabeledDataset> = specs
            .iter()
            .map(|(name, rows, proportion, _)| {
                let attacks = (proportion * *rows as f64).round() as usize;
                let mut labels = vec![false; *rows];
                labels[..attacks].fill(true);
                LabeledDataset::new(*name, vec![vec![0.0]; *rows], labels).unwrap()
            })
            .collect();
        verify_full_capture(&datasets).unwrap();

        // Perturbing one row count must fail the check.
        let mut wrong = datasets;
        wrong[3] = LabeledDataset::new("ftp", vec![vec![0.0]; 4_092], vec![false; 4_092]).unwrap();
        assert!(verify_full_capture(&wrong).is_err());
    }
}
