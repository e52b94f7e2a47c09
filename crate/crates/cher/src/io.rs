//! File formats: JSON for structured records, CSV for grids and time
//! series. Every format carries a version tag, loaders reject unknown
//! fields with the offending path, and floats survive round trips
//! exactly (shortest-representation printing on both sides).

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dephasing::{ChiSeries, DynamicalMapSeries, TimeUnit};
use crate::error::{Error, Result};
use crate::nonclassicality::{MeasureMethod, NonclassicalityResult};
use crate::oracle::{Mode, ModeConfig, OracleMethod};
use crate::retrieval::{Axis, DeltaFactor, Frame, QuasiDistribution};

/// Version tag carried by every file this library writes.
pub const FORMAT_TAG: &str = "cher-v1";
/// Generator-order tag for process-matrix files: identity at index 0,
/// then the symmetric/antisymmetric/diagonal ladder of slots.
pub const GENERATOR_ORDER: &str = "gellmann-v1";

const FRAME_CARTAN: &str = "lambda-space";
const FRAME_SIMPLE: &str = "simple-root-space";

fn frame_tag(frame: Frame) -> &'static str {
    match frame {
        Frame::Cartan => FRAME_CARTAN,
        Frame::SimpleRoot => FRAME_SIMPLE,
    }
}

fn frame_from_tag(tag: &str) -> Result<Frame> {
    match tag {
        FRAME_CARTAN => Ok(Frame::Cartan),
        FRAME_SIMPLE => Ok(Frame::SimpleRoot),
        other => Err(Error::Schema {
            location: "frame".into(),
            message: format!(
                "unknown frame {other:?}, expected {FRAME_CARTAN:?} or {FRAME_SIMPLE:?}"
            ),
        }),
    }
}

/// FNV-1a hash of the key=value configuration pairs, used to stamp
/// output files so artifacts can be traced back to the run that made
/// them.
pub fn config_hash(fields: &[(&str, String)]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x100_0000_01b3);
        }
    };
    for (k, v) in fields {
        eat(k.as_bytes());
        eat(b"=");
        eat(v.as_bytes());
        eat(b"\n");
    }
    format!("fnv1a:{h:016x}")
}

/// Writes through a temp file in the same directory plus a rename, so a
/// crash never leaves a half-written artifact under the final name.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidState(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp.{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::Io(e)
    })
}

fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
        location: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

fn render_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidState(format!("serialization failed: {e}")))?;
    text.push('\n');
    Ok(text)
}

// ---------------------------------------------------------------- chi

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChiFile {
    n: usize,
    generator_order: String,
    times: Vec<f64>,
    /// chi[t][l*d + m] = [re, im] with d = n^2 generators.
    chi: Vec<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    time_unit: Option<TimeUnit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config_hash: Option<String>,
}

pub fn chi_to_json(series: &ChiSeries, hash: Option<&str>) -> Result<String> {
    let d = series.dim() * series.dim();
    let chi = (0..series.times().len())
        .map(|t| {
            let m = series.chi_at(t);
            let mut flat = Vec::with_capacity(d * d);
            for r in 0..d {
                for c in 0..d {
                    flat.push([m[[r, c]].re, m[[r, c]].im]);
                }
            }
            flat
        })
        .collect();
    render_json(&ChiFile {
        n: series.dim(),
        generator_order: GENERATOR_ORDER.into(),
        times: series.times().to_vec(),
        chi,
        time_unit: Some(series.unit()),
        config_hash: hash.map(str::to_owned),
    })
}

pub fn chi_from_json(text: &str) -> Result<ChiSeries> {
    let file: ChiFile = parse_json(text)?;
    if file.generator_order != GENERATOR_ORDER {
        return Err(Error::FormatVersion {
            found: file.generator_order,
            expected: GENERATOR_ORDER.into(),
        });
    }
    let d = file.n * file.n;
    let mut mats = Vec::with_capacity(file.chi.len());
    for (t, flat) in file.chi.iter().enumerate() {
        if flat.len() != d * d {
            return Err(Error::Schema {
                location: format!("chi[{t}]"),
                message: format!("{} entries, expected {}", flat.len(), d * d),
            });
        }
        let mut m = Array2::from_elem((d, d), Complex64::new(0.0, 0.0));
        for r in 0..d {
            for c in 0..d {
                let [re, im] = flat[r * d + c];
                m[[r, c]] = Complex64::new(re, im);
            }
        }
        mats.push(m);
    }
    ChiSeries::new(
        file.n,
        file.times,
        mats,
        file.time_unit.unwrap_or(TimeUnit::InverseCutoff),
    )
}

// ------------------------------------------------- quasi-distribution

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AxisDto {
    label: String,
    min: f64,
    step: f64,
    n: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DeltaDto {
    label: String,
    location: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuasiFile {
    format: String,
    frame: String,
    axes: Vec<AxisDto>,
    /// Column j is the physical step vector of lattice axis j.
    basis: Vec<Vec<f64>>,
    density: Vec<f64>,
    deltas: Vec<DeltaDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config_hash: Option<String>,
}

fn axis_dtos(q: &QuasiDistribution) -> Vec<AxisDto> {
    q.axes()
        .iter()
        .map(|a| AxisDto {
            label: a.label.clone(),
            min: a.min,
            step: a.step,
            n: a.len,
        })
        .collect()
}

fn delta_dtos(q: &QuasiDistribution) -> Vec<DeltaDto> {
    q.delta_factors()
        .iter()
        .map(|d| DeltaDto {
            label: d.label.clone(),
            location: d.location,
        })
        .collect()
}

pub fn quasi_to_json(q: &QuasiDistribution, hash: Option<&str>) -> Result<String> {
    let d = q.axes().len();
    let basis = (0..d)
        .map(|r| (0..d).map(|c| q.basis()[[r, c]]).collect())
        .collect();
    render_json(&QuasiFile {
        format: FORMAT_TAG.into(),
        frame: frame_tag(q.frame()).into(),
        axes: axis_dtos(q),
        basis,
        density: q.density().to_vec(),
        deltas: delta_dtos(q),
        config_hash: hash.map(str::to_owned),
    })
}

pub fn quasi_from_json(text: &str) -> Result<QuasiDistribution> {
    let file: QuasiFile = parse_json(text)?;
    if file.format != FORMAT_TAG {
        return Err(Error::FormatVersion {
            found: file.format,
            expected: FORMAT_TAG.into(),
        });
    }
    let frame = frame_from_tag(&file.frame)?;
    let d = file.axes.len();
    if file.basis.len() != d || file.basis.iter().any(|row| row.len() != d) {
        return Err(Error::Schema {
            location: "basis".into(),
            message: format!("expected a {d}x{d} matrix"),
        });
    }
    let mut basis = Array2::zeros((d, d));
    for (r, row) in file.basis.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            basis[[r, c]] = v;
        }
    }
    let axes = file
        .axes
        .into_iter()
        .map(|a| Axis {
            label: a.label,
            min: a.min,
            step: a.step,
            len: a.n,
        })
        .collect();
    let deltas = file
        .deltas
        .into_iter()
        .map(|d| DeltaFactor {
            label: d.label,
            location: d.location,
        })
        .collect();
    QuasiDistribution::new(frame, axes, basis, file.density, deltas)
}

/// Grid as CSV: metadata header lines, one coordinate column per axis,
/// one value column, rows in row-major order (last axis fastest). Only
/// axis-aligned lattices fit the column form; oblique grids go to JSON.
pub fn quasi_to_csv(q: &QuasiDistribution, hash: Option<&str>) -> Result<String> {
    if !q.is_axis_aligned() {
        return Err(Error::InvalidState(
            "CSV holds axis-aligned grids only; use JSON for oblique lattices".into(),
        ));
    }
    let mut out = String::new();
    let _ = writeln!(out, "# format {FORMAT_TAG}");
    let _ = writeln!(out, "# frame {}", frame_tag(q.frame()));
    if let Some(h) = hash {
        let _ = writeln!(out, "# config {h}");
    }
    for a in q.axes() {
        let _ = writeln!(
            out,
            "# axis {} min={} step={} n={}",
            a.label, a.min, a.step, a.len
        );
    }
    for d in q.delta_factors() {
        let _ = writeln!(out, "# delta {} at {}", d.label, d.location);
    }
    for a in q.axes() {
        let _ = write!(out, "{},", a.label);
    }
    out.push_str("value\n");

    let dims: Vec<usize> = q.axes().iter().map(|a| a.len).collect();
    let mut index = vec![0usize; dims.len()];
    for &v in q.density() {
        for (k, &i) in index.iter().enumerate() {
            let _ = write!(out, "{},", q.axes()[k].value(i));
        }
        let _ = writeln!(out, "{v}");
        for k in (0..dims.len()).rev() {
            index[k] += 1;
            if index[k] < dims[k] {
                break;
            }
            index[k] = 0;
        }
    }
    Ok(out)
}

fn header_err(line_no: usize, message: String) -> Error {
    Error::Schema {
        location: format!("line {line_no}"),
        message,
    }
}

fn parse_kv(token: &str, key: &str, line_no: usize) -> Result<String> {
    token
        .strip_prefix(key)
        .and_then(|t| t.strip_prefix('='))
        .map(str::to_owned)
        .ok_or_else(|| header_err(line_no, format!("expected {key}=<value>, got {token:?}")))
}

pub fn quasi_from_csv(text: &str) -> Result<QuasiDistribution> {
    let mut frame = None;
    let mut axes: Vec<Axis> = Vec::new();
    let mut deltas: Vec<DeltaFactor> = Vec::new();
    let mut density: Vec<f64> = Vec::new();
    let mut saw_format = false;
    let mut saw_columns = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            let mut words = meta.split_whitespace();
            match words.next() {
                Some("format") => {
                    let tag = words.next().unwrap_or("");
                    if tag != FORMAT_TAG {
                        return Err(Error::FormatVersion {
                            found: tag.into(),
                            expected: FORMAT_TAG.into(),
                        });
                    }
                    saw_format = true;
                }
                Some("frame") => {
                    frame = Some(frame_from_tag(words.next().unwrap_or(""))?);
                }
                Some("config") => {}
                Some("axis") => {
                    let label = words
                        .next()
                        .ok_or_else(|| header_err(line_no, "axis line has no label".into()))?
                        .to_owned();
                    let min = parse_kv(
                        words.next().unwrap_or(""),
                        "min",
                        line_no,
                    )?
                    .parse::<f64>()
                    .map_err(|e| header_err(line_no, e.to_string()))?;
                    let step = parse_kv(words.next().unwrap_or(""), "step", line_no)?
                        .parse::<f64>()
                        .map_err(|e| header_err(line_no, e.to_string()))?;
                    let len = parse_kv(words.next().unwrap_or(""), "n", line_no)?
                        .parse::<usize>()
                        .map_err(|e| header_err(line_no, e.to_string()))?;
                    axes.push(Axis {
                        label,
                        min,
                        step,
                        len,
                    });
                }
                Some("delta") => {
                    let label = words
                        .next()
                        .ok_or_else(|| header_err(line_no, "delta line has no label".into()))?
                        .to_owned();
                    if words.next() != Some("at") {
                        return Err(header_err(line_no, "expected `delta <label> at <loc>`".into()));
                    }
                    let location = words
                        .next()
                        .unwrap_or("")
                        .parse::<f64>()
                        .map_err(|e| header_err(line_no, e.to_string()))?;
                    deltas.push(DeltaFactor { label, location });
                }
                Some(other) => {
                    return Err(header_err(line_no, format!("unknown header {other:?}")));
                }
                None => {}
            }
            continue;
        }
        if !saw_columns {
            // column header row
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let want: Vec<&str> = axes
                .iter()
                .map(|a| a.label.as_str())
                .chain(std::iter::once("value"))
                .collect();
            if cols != want {
                return Err(header_err(
                    line_no,
                    format!("column header {cols:?} does not match axes {want:?}"),
                ));
            }
            saw_columns = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != axes.len() + 1 {
            return Err(header_err(
                line_no,
                format!("{} fields for {} columns", fields.len(), axes.len() + 1),
            ));
        }
        let row = density.len();
        let mut rem = row;
        // row-major: last axis fastest
        for k in (0..axes.len()).rev() {
            let i = rem % axes[k].len;
            rem /= axes[k].len;
            let want = axes[k].value(i);
            let got = fields[k]
                .parse::<f64>()
                .map_err(|e| header_err(line_no, e.to_string()))?;
            let tol = 1e-6 * axes[k].step.max(1e-300);
            if (got - want).abs() > tol {
                return Err(header_err(
                    line_no,
                    format!("coordinate {got} off the {} lattice (expected {want})", axes[k].label),
                ));
            }
        }
        density.push(
            fields[axes.len()]
                .parse::<f64>()
                .map_err(|e| header_err(line_no, e.to_string()))?,
        );
    }

    if !saw_format {
        return Err(Error::Schema {
            location: "header".into(),
            message: "missing `# format` line".into(),
        });
    }
    let frame = frame.ok_or_else(|| Error::Schema {
        location: "header".into(),
        message: "missing `# frame` line".into(),
    })?;
    let d = axes.len();
    QuasiDistribution::new(frame, axes, Array2::eye(d), density, deltas)
}

// -------------------------------------------------------- mode config

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModeDto {
    omega: f64,
    g1: [f64; 2],
    g2: [f64; 2],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModeFile {
    format: String,
    method: String,
    temperature: f64,
    fock_cutoff: usize,
    modes: Vec<ModeDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config_hash: Option<String>,
}

const METHOD_ANALYTIC: &str = "analytic-displacement";
const METHOD_FOCK: &str = "truncated-fock";

pub fn method_name(method: OracleMethod) -> &'static str {
    match method {
        OracleMethod::AnalyticDisplacement => METHOD_ANALYTIC,
        OracleMethod::TruncatedFock => METHOD_FOCK,
    }
}

pub fn method_from_name(name: &str) -> Result<OracleMethod> {
    match name {
        METHOD_ANALYTIC => Ok(OracleMethod::AnalyticDisplacement),
        METHOD_FOCK => Ok(OracleMethod::TruncatedFock),
        other => Err(Error::Schema {
            location: "method".into(),
            message: format!(
                "unknown method {other:?}, expected {METHOD_ANALYTIC:?} or {METHOD_FOCK:?}"
            ),
        }),
    }
}

pub fn modes_to_json(cfg: &ModeConfig, hash: Option<&str>) -> Result<String> {
    render_json(&ModeFile {
        format: FORMAT_TAG.into(),
        method: method_name(cfg.method).into(),
        temperature: cfg.temperature,
        fock_cutoff: cfg.fock_cutoff,
        modes: cfg
            .modes
            .iter()
            .map(|m| ModeDto {
                omega: m.omega,
                g1: [m.g1.re, m.g1.im],
                g2: [m.g2.re, m.g2.im],
            })
            .collect(),
        config_hash: hash.map(str::to_owned),
    })
}

pub fn modes_from_json(text: &str) -> Result<ModeConfig> {
    let file: ModeFile = parse_json(text)?;
    if file.format != FORMAT_TAG {
        return Err(Error::FormatVersion {
            found: file.format,
            expected: FORMAT_TAG.into(),
        });
    }
    let cfg = ModeConfig {
        modes: file
            .modes
            .iter()
            .map(|m| Mode {
                omega: m.omega,
                g1: Complex64::new(m.g1[0], m.g1[1]),
                g2: Complex64::new(m.g2[0], m.g2[1]),
            })
            .collect(),
        fock_cutoff: file.fock_cutoff,
        temperature: file.temperature,
        method: method_from_name(&file.method)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

// ----------------------------------------------------- results + maps

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureRecord {
    pub format: String,
    pub value: f64,
    pub method: String,
    pub grid: Vec<AxisRecord>,
    pub deltas: Vec<DeltaRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refinement_delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisRecord {
    pub label: String,
    pub min: f64,
    pub step: f64,
    pub n: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaRecord {
    pub label: String,
    pub location: f64,
}

impl MeasureRecord {
    pub fn from_result(r: &NonclassicalityResult, hash: Option<String>) -> Self {
        MeasureRecord {
            format: FORMAT_TAG.into(),
            value: r.value,
            method: match r.method {
                MeasureMethod::Negativity => "negativity".into(),
                MeasureMethod::LpOracle => "lp-oracle".into(),
            },
            grid: r
                .grid
                .iter()
                .map(|a| AxisRecord {
                    label: a.label.clone(),
                    min: a.min,
                    step: a.step,
                    n: a.len,
                })
                .collect(),
            deltas: r
                .deltas
                .iter()
                .map(|d| DeltaRecord {
                    label: d.label.clone(),
                    location: d.location,
                })
                .collect(),
            refinement_delta: r.refinement_delta,
            config_hash: hash,
        }
    }
}

pub fn measure_to_json(record: &MeasureRecord) -> Result<String> {
    render_json(record)
}

pub fn measure_from_json(text: &str) -> Result<MeasureRecord> {
    let record: MeasureRecord = parse_json(text)?;
    if record.format != FORMAT_TAG {
        return Err(Error::FormatVersion {
            found: record.format,
            expected: FORMAT_TAG.into(),
        });
    }
    Ok(record)
}

/// Axis-identification and noise-study summary for the singlet-triplet
/// pipeline. Angles in radians, frequencies in rad/ns.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct St0Record {
    pub format: String,
    pub omega: f64,
    #[serde(rename = "Omega")]
    pub tilt: f64,
    #[serde(rename = "N_mean")]
    pub measure_mean: f64,
    #[serde(rename = "N_std")]
    pub measure_std: f64,
    pub failures: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

pub fn st0_to_json(record: &St0Record) -> Result<String> {
    render_json(record)
}

pub fn st0_from_json(text: &str) -> Result<St0Record> {
    let record: St0Record = parse_json(text)?;
    if record.format != FORMAT_TAG {
        return Err(Error::FormatVersion {
            found: record.format,
            expected: FORMAT_TAG.into(),
        });
    }
    Ok(record)
}

/// Map series as CSV: one row per time, the n^2 x n^2 generator-basis
/// matrix flattened row-major after the time column.
pub fn map_to_csv(map: &DynamicalMapSeries, hash: Option<&str>) -> String {
    let d = map.dim() * map.dim();
    let mut out = String::new();
    let _ = writeln!(out, "# format {FORMAT_TAG}");
    let _ = writeln!(out, "# n {}", map.dim());
    let _ = writeln!(
        out,
        "# time_unit {}",
        match map.unit() {
            TimeUnit::InverseCutoff => "inverse_cutoff",
            TimeUnit::Nanoseconds => "ns",
        }
    );
    if let Some(h) = hash {
        let _ = writeln!(out, "# config {h}");
    }
    out.push_str("time");
    for r in 0..d {
        for c in 0..d {
            let _ = write!(out, ",m_{r}_{c}");
        }
    }
    out.push('\n');
    for (s, &t) in map.times().iter().enumerate() {
        let _ = write!(out, "{t}");
        let m = map.map_at(s);
        for r in 0..d {
            for c in 0..d {
                let _ = write!(out, ",{}", m[[r, c]]);
            }
        }
        out.push('\n');
    }
    out
}

/// Factor series as CSV: a time column, then a real and imaginary
/// column per stored ladder index, in ascending index order.
pub fn factors_to_csv(f: &crate::dephasing::DephasingFactors, hash: Option<&str>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# format {FORMAT_TAG}");
    let _ = writeln!(out, "# n {}", f.dim());
    let _ = writeln!(
        out,
        "# time_unit {}",
        match f.unit() {
            TimeUnit::InverseCutoff => "inverse_cutoff",
            TimeUnit::Nanoseconds => "ns",
        }
    );
    if let Some(h) = hash {
        let _ = writeln!(out, "# config {h}");
    }
    let indices: Vec<usize> = f.indices().collect();
    out.push_str("time");
    for idx in &indices {
        let _ = write!(out, ",re_{idx},im_{idx}");
    }
    out.push('\n');
    for (s, &t) in f.times().iter().enumerate() {
        let _ = write!(out, "{t}");
        for idx in &indices {
            let v = f.factor(*idx).unwrap()[s];
            let _ = write!(out, ",{},{}", v.re, v.im);
        }
        out.push('\n');
    }
    out
}

pub fn factors_from_csv(text: &str) -> Result<crate::dephasing::DephasingFactors> {
    let mut dim: Option<usize> = None;
    let mut unit = TimeUnit::InverseCutoff;
    let mut saw_format = false;
    let mut indices: Vec<usize> = Vec::new();
    let mut times: Vec<f64> = Vec::new();
    let mut columns: Vec<Vec<Complex64>> = Vec::new();
    let mut saw_header = false;

    for (idx_line, raw) in text.lines().enumerate() {
        let line_no = idx_line + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            let mut words = meta.split_whitespace();
            match words.next() {
                Some("format") => {
                    let tag = words.next().unwrap_or("");
                    if tag != FORMAT_TAG {
                        return Err(Error::FormatVersion {
                            found: tag.into(),
                            expected: FORMAT_TAG.into(),
                        });
                    }
                    saw_format = true;
                }
                Some("n") => {
                    dim = Some(
                        words
                            .next()
                            .unwrap_or("")
                            .parse()
                            .map_err(|e: std::num::ParseIntError| {
                                header_err(line_no, e.to_string())
                            })?,
                    );
                }
                Some("time_unit") => {
                    unit = match words.next() {
                        Some("inverse_cutoff") => TimeUnit::InverseCutoff,
                        Some("ns") => TimeUnit::Nanoseconds,
                        other => {
                            return Err(header_err(
                                line_no,
                                format!("unknown time unit {other:?}"),
                            ))
                        }
                    };
                }
                Some("config") => {}
                Some(other) => {
                    return Err(header_err(line_no, format!("unknown header {other:?}")));
                }
                None => {}
            }
            continue;
        }
        if !saw_header {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.first() != Some(&"time") || cols.len() < 3 || (cols.len() - 1) % 2 != 0 {
                return Err(header_err(
                    line_no,
                    "expected `time` then re_<idx>,im_<idx> column pairs".into(),
                ));
            }
            for pair in cols[1..].chunks(2) {
                let re_idx: Option<usize> =
                    pair[0].strip_prefix("re_").and_then(|v| v.parse().ok());
                let im_idx: Option<usize> =
                    pair[1].strip_prefix("im_").and_then(|v| v.parse().ok());
                match (re_idx, im_idx) {
                    (Some(a), Some(b)) if a == b => indices.push(a),
                    _ => {
                        return Err(header_err(
                            line_no,
                            format!("mismatched column pair {pair:?}"),
                        ))
                    }
                }
            }
            columns = vec![Vec::new(); indices.len()];
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 1 + 2 * indices.len() {
            return Err(header_err(
                line_no,
                format!(
                    "{} fields for {} columns",
                    fields.len(),
                    1 + 2 * indices.len()
                ),
            ));
        }
        let parse = |k: usize| -> Result<f64> {
            fields[k]
                .parse()
                .map_err(|e: std::num::ParseFloatError| header_err(line_no, e.to_string()))
        };
        times.push(parse(0)?);
        for (j, col) in columns.iter_mut().enumerate() {
            col.push(Complex64::new(parse(1 + 2 * j)?, parse(2 + 2 * j)?));
        }
    }

    if !saw_format {
        return Err(Error::Schema {
            location: "header".into(),
            message: "missing `# format` line".into(),
        });
    }
    let dim = dim.ok_or_else(|| Error::Schema {
        location: "header".into(),
        message: "missing `# n` line".into(),
    })?;
    let mut map = std::collections::BTreeMap::new();
    for (j, idx) in indices.into_iter().enumerate() {
        map.insert(idx, std::mem::take(&mut columns[j]));
    }
    crate::dephasing::DephasingFactors::new(dim, times, map, unit)
}

/// Two-column spectral table, strictly increasing frequency.
pub fn spectral_table_to_csv(table: &[(f64, f64)], hash: Option<&str>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# format {FORMAT_TAG}");
    if let Some(h) = hash {
        let _ = writeln!(out, "# config {h}");
    }
    out.push_str("omega,j\n");
    for &(w, j) in table {
        let _ = writeln!(out, "{w},{j}");
    }
    out
}

pub fn spectral_table_from_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(header_err(
                line_no,
                format!("expected two columns, got {}", fields.len()),
            ));
        }
        if rows.is_empty() && fields[0].parse::<f64>().is_err() {
            // column header
            continue;
        }
        let w = fields[0]
            .parse::<f64>()
            .map_err(|e| header_err(line_no, e.to_string()))?;
        let j = fields[1]
            .parse::<f64>()
            .map_err(|e| header_err(line_no, e.to_string()))?;
        if let Some(&(prev, _)) = rows.last() {
            if w <= prev {
                return Err(header_err(
                    line_no,
                    format!("frequencies must increase strictly: {w} after {prev}"),
                ));
            }
        }
        rows.push((w, j));
    }
    if rows.is_empty() {
        return Err(Error::Schema {
            location: "table".into(),
            message: "no data rows".into(),
        });
    }
    Ok(rows)
}
