//! Weak-value series and their CSV / JSON file formats.
//!
//! CSV layout:
//!
//! ```text
//! # metadata: {"version":"0.1.0","mode":"closed_form",...}
//! coord,re_w,im_w,abs_w
//! 1.9950000000000000e2,...
//! ```
//!
//! Numbers are written with 17 significant digits so that every `f64`
//! survives a round trip exactly.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weakcore::Complex;

pub const CSV_HEADER: &str = "coord,re_w,im_w,abs_w";
const METADATA_PREFIX: &str = "# metadata: ";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordLabel {
    X,
    T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sample {
    pub coord: f64,
    pub re_w: f64,
    pub im_w: f64,
    pub abs_w: f64,
}

impl Sample {
    pub fn new(coord: f64, w: Complex) -> Self {
        Sample { coord, re_w: w.re, im_w: w.im, abs_w: w.norm() }
    }

    pub fn value(&self) -> Complex {
        Complex::new(self.re_w, self.im_w)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    /// Crate version that produced the data.
    pub version: String,
    /// How the values were computed (`closed_form`, `quadrature`, `pde`, ...).
    pub mode: String,
    /// Free-form name of the series within its scenario.
    #[serde(default)]
    pub name: String,
    /// Echo of every parameter that went into the computation.
    #[serde(default)]
    pub params: serde_json::Value,
}

impl Metadata {
    pub fn new(mode: &str, name: &str, params: serde_json::Value) -> Self {
        Metadata { version: env!("CARGO_PKG_VERSION").to_string(), mode: mode.to_string(), name: name.to_string(), params }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakValueSeries {
    pub coord_label: CoordLabel,
    pub samples: Vec<Sample>,
    pub metadata: Metadata,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Parse(format!("unknown format `{other}` (expected csv or json)"))),
        }
    }
}

impl WeakValueSeries {
    /// Build from parallel coordinate/value slices; coordinates must be sorted.
    pub fn from_values(coord_label: CoordLabel, coords: &[f64], values: &[Complex], metadata: Metadata) -> Result<Self> {
        if coords.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: coords.len(), found: values.len() });
        }
        let samples = coords.iter().zip(values).map(|(&c, &w)| Sample::new(c, w)).collect();
        let s = WeakValueSeries { coord_label, samples, metadata };
        s.validate()?;
        Ok(s)
    }

    /// Samples must be sorted by coordinate and every field must be finite.
    pub fn validate(&self) -> Result<()> {
        for (k, s) in self.samples.iter().enumerate() {
            if ![s.coord, s.re_w, s.im_w, s.abs_w].iter().all(|v| v.is_finite()) {
                return Err(Error::Parse(format!("sample {k} has a non-finite field")));
            }
        }
        if self.samples.windows(2).any(|w| w[1].coord < w[0].coord) {
            return Err(Error::Parse("samples are not sorted by coordinate".into()));
        }
        Ok(())
    }

    pub fn coords(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.coord).collect()
    }

    pub fn values(&self) -> Vec<Complex> {
        self.samples.iter().map(Sample::value).collect()
    }

    /// Sample of largest `|w|`.
    pub fn peak(&self) -> Option<Sample> {
        self.samples.iter().copied().max_by(|a, b| a.abs_w.total_cmp(&b.abs_w))
    }

    /// Trapezoidal integral of `w` over the coordinate.
    pub fn trapezoid(&self) -> Complex {
        self.samples.windows(2).map(|w| (w[0].value() + w[1].value()) * (0.5 * (w[1].coord - w[0].coord))).sum()
    }

    /// Wavelength of `Re w` from its sign changes within `center ± half_width`
    /// (linear interpolation between samples). `None` with fewer than two
    /// crossings.
    pub fn re_wavelength(&self, center: f64, half_width: f64) -> Option<f64> {
        let mut crossings = Vec::new();
        for w in self.samples.windows(2) {
            let (a, b) = (w[0], w[1]);
            if (a.coord - center).abs() > half_width || (b.coord - center).abs() > half_width {
                continue;
            }
            if a.re_w == 0.0 {
                crossings.push(a.coord);
            } else if a.re_w * b.re_w < 0.0 {
                crossings.push(a.coord + (b.coord - a.coord) * a.re_w / (a.re_w - b.re_w));
            }
        }
        if crossings.len() < 2 {
            return None;
        }
        // consecutive sign changes are half a wavelength apart
        Some(2.0 * (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("series serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: WeakValueSeries = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_csv(&self) -> String {
        let meta = serde_json::to_string(&CsvMeta { coord_label: self.coord_label, metadata: self.metadata.clone() })
            .expect("metadata serialization cannot fail");
        let mut out = String::with_capacity(80 * (self.samples.len() + 2));
        out.push_str(METADATA_PREFIX);
        out.push_str(&meta);
        out.push('\n');
        out.push_str(CSV_HEADER);
        out.push('\n');
        for s in &self.samples {
            let _ = writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e}", s.coord, s.re_w, s.im_w, s.abs_w);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let first = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))?;
        let meta_json = first
            .strip_prefix(METADATA_PREFIX)
            .ok_or_else(|| Error::Parse(format!("first line must start with `{METADATA_PREFIX}`")))?;
        let meta: CsvMeta = serde_json::from_str(meta_json).map_err(|e| Error::Parse(format!("metadata: {e}")))?;
        match lines.next() {
            Some(h) if h.trim_end() == CSV_HEADER => {}
            other => return Err(Error::Parse(format!("expected header `{CSV_HEADER}`, found {other:?}"))),
        }
        let mut samples = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::Parse(format!("row {}: expected 4 fields, found {}", k + 1, fields.len())));
            }
            let mut v = [0.0; 4];
            for (slot, field) in v.iter_mut().zip(&fields) {
                *slot = field.trim().parse().map_err(|e| Error::Parse(format!("row {}: `{field}`: {e}", k + 1)))?;
            }
            samples.push(Sample { coord: v[0], re_w: v[1], im_w: v[2], abs_w: v[3] });
        }
        let s = WeakValueSeries { coord_label: meta.coord_label, samples, metadata: meta.metadata };
        s.validate()?;
        Ok(s)
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    pub fn parse(text: &str, format: Format) -> Result<Self> {
        match format {
            Format::Csv => Self::from_csv(text),
            Format::Json => Self::from_json(text),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CsvMeta {
    coord_label: CoordLabel,
    metadata: Metadata,
}

/// Write `series` to `path` in `format`.
pub fn emit_series(series: &WeakValueSeries, format: Format, path: &Path) -> Result<()> {
    series.validate()?;
    std::fs::write(path, series.render(format))?;
    Ok(())
}
