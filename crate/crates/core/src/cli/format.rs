//! On-disk result files.
//!
//! CSV layout:
//!
//! ```text
//! # mollow-result,<version>
//! # x_axis,probe_freq_ghz,<points>
//! # y_axis,<name>,<points>
//! # <metadata key>,<value>
//! y,x,abs_r[,re_r,im_r]
//! <one line per grid point, y-major>
//! ```
//!
//! JSON holds the same content with explicit axis arrays and one nested list
//! per row. Floats are written in shortest round-trip form, so reading a file
//! back reproduces the values bit for bit. Failed points are `NaN` in CSV and
//! `null` in JSON.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sweep::Overlays;

const MAGIC: &str = "mollow-result";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// Guess from the file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Self::Json,
            _ => Self::Csv,
        }
    }

    pub fn extension(&self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("malformed result file: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisData {
    pub name: String,
    pub values: Vec<f64>,
}

/// A result matrix with its axes. Values are row-major, y then x.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub version: String,
    pub x: AxisData,
    pub y: AxisData,
    pub metadata: BTreeMap<String, String>,
    pub abs_r: Vec<f64>,
    pub complex: Option<Vec<C64>>,
}

impl ResultTable {
    pub fn write(&self, path: &Path, format: Format) -> Result<(), FormatError> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        match format {
            Format::Csv => self.write_csv(&mut file)?,
            Format::Json => self.write_json(&mut file)?,
        }
        file.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, FormatError> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        match Format::from_path(path) {
            Format::Csv => Self::read_csv(file),
            Format::Json => Self::read_json(file),
        }
    }

    /// Same-shape check, so bit-identical comparisons can treat NaN as equal.
    pub fn bits_eq(&self, other: &Self) -> bool {
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        let cbits = |v: &Option<Vec<C64>>| {
            v.as_ref().map(|v| v.iter().map(|c| (c.re.to_bits(), c.im.to_bits())).collect::<Vec<_>>())
        };
        self.version == other.version
            && self.metadata == other.metadata
            && self.x.name == other.x.name
            && self.y.name == other.y.name
            && bits(&self.x.values) == bits(&other.x.values)
            && bits(&self.y.values) == bits(&other.y.values)
            && bits(&self.abs_r) == bits(&other.abs_r)
            && cbits(&self.complex) == cbits(&other.complex)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), FormatError> {
        writeln!(w, "# {MAGIC},{}", self.version)?;
        writeln!(w, "# x_axis,{},{}", self.x.name, self.x.values.len())?;
        writeln!(w, "# y_axis,{},{}", self.y.name, self.y.values.len())?;
        for (k, v) in &self.metadata {
            writeln!(w, "# {k},{}", v.replace(['\n', '\r'], " "))?;
        }
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["y", "x", "abs_r"];
        if self.complex.is_some() {
            header.extend(["re_r", "im_r"]);
        }
        out.write_record(&header)?;
        let nx = self.x.values.len();
        for (iy, y) in self.y.values.iter().enumerate() {
            for (ix, x) in self.x.values.iter().enumerate() {
                let i = iy * nx + ix;
                let mut rec = vec![y.to_string(), x.to_string(), self.abs_r[i].to_string()];
                if let Some(c) = &self.complex {
                    rec.push(c[i].re.to_string());
                    rec.push(c[i].im.to_string());
                }
                out.write_record(&rec)?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, FormatError> {
        let bad = |m: &str| FormatError::Malformed(m.to_string());
        let mut lines = r.lines();
        let mut header = Vec::new();
        let mut body = String::new();
        for line in lines.by_ref() {
            let line = line?;
            if let Some(rest) = line.strip_prefix("# ") {
                header.push(rest.to_string());
            } else {
                body.push_str(&line);
                body.push('\n');
                break;
            }
        }
        for line in lines {
            body.push_str(&line?);
            body.push('\n');
        }

        let mut header = header.into_iter();
        let version = header
            .next()
            .and_then(|l| l.strip_prefix(&format!("{MAGIC},")).map(str::to_string))
            .ok_or_else(|| bad("missing format line"))?;
        let mut axis = |tag: &str| -> Result<(String, usize), FormatError> {
            let line = header.next().ok_or_else(|| bad("missing axis line"))?;
            let mut parts = line.splitn(3, ',');
            if parts.next() != Some(tag) {
                return Err(bad("unexpected axis line"));
            }
            let name = parts.next().ok_or_else(|| bad("axis name"))?.to_string();
            let n = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("axis length"))?;
            Ok((name, n))
        };
        let (x_name, nx) = axis("x_axis")?;
        let (y_name, ny) = axis("y_axis")?;
        let metadata = header
            .map(|l| {
                let (k, v) = l.split_once(',').ok_or_else(|| bad("metadata line"))?;
                Ok((k.to_string(), v.to_string()))
            })
            .collect::<Result<BTreeMap<_, _>, FormatError>>()?;

        let mut rdr = csv::Reader::from_reader(body.as_bytes());
        let has_complex = rdr.headers()?.len() == 5;
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad("number"));
        let (mut xs, mut ys, mut abs_r, mut complex) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let y = num(&rec[0])?;
            let x = num(&rec[1])?;
            if i < nx {
                xs.push(x);
            }
            if i % nx.max(1) == 0 {
                ys.push(y);
            }
            abs_r.push(num(&rec[2])?);
            if has_complex {
                complex.push(C64::new(num(&rec[3])?, num(&rec[4])?));
            }
        }
        if xs.len() != nx || ys.len() != ny || abs_r.len() != nx * ny {
            return Err(bad("row count does not match axes"));
        }
        Ok(Self {
            version,
            x: AxisData { name: x_name, values: xs },
            y: AxisData { name: y_name, values: ys },
            metadata,
            abs_r,
            complex: has_complex.then_some(complex),
        })
    }

    fn to_json(&self) -> JsonTable {
        let nx = self.x.values.len();
        let rows = |v: Vec<f64>| -> Vec<Vec<Option<f64>>> {
            v.chunks(nx.max(1)).map(|r| r.iter().map(|x| x.is_finite().then_some(*x)).collect()).collect()
        };
        JsonTable {
            format: MAGIC.to_string(),
            version: self.version.clone(),
            x_axis: self.x.clone(),
            y_axis: self.y.clone(),
            metadata: self.metadata.clone(),
            abs_r: rows(self.abs_r.clone()),
            re_r: self.complex.as_ref().map(|c| rows(c.iter().map(|z| z.re).collect())),
            im_r: self.complex.as_ref().map(|c| rows(c.iter().map(|z| z.im).collect())),
        }
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<(), FormatError> {
        serde_json::to_writer_pretty(&mut w, &self.to_json())?;
        writeln!(w)?;
        Ok(())
    }

    pub fn read_json<R: BufRead>(r: R) -> Result<Self, FormatError> {
        let t: JsonTable = serde_json::from_reader(r)?;
        if t.format != MAGIC {
            return Err(FormatError::Malformed(format!("unknown format {:?}", t.format)));
        }
        let flat = |rows: Vec<Vec<Option<f64>>>| -> Vec<f64> {
            rows.into_iter().flatten().map(|x| x.unwrap_or(f64::NAN)).collect()
        };
        let complex = match (t.re_r, t.im_r) {
            (Some(re), Some(im)) => Some(flat(re).into_iter().zip(flat(im)).map(|(a, b)| C64::new(a, b)).collect()),
            _ => None,
        };
        let abs_r = flat(t.abs_r);
        if abs_r.len() != t.x_axis.values.len() * t.y_axis.values.len() {
            return Err(FormatError::Malformed("row count does not match axes".into()));
        }
        Ok(Self { version: t.version, x: t.x_axis, y: t.y_axis, metadata: t.metadata, abs_r, complex })
    }
}

#[derive(Serialize, Deserialize)]
struct JsonTable {
    format: String,
    version: String,
    x_axis: AxisData,
    y_axis: AxisData,
    metadata: BTreeMap<String, String>,
    abs_r: Vec<Vec<Option<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    re_r: Option<Vec<Vec<Option<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    im_r: Option<Vec<Vec<Option<f64>>>>,
}

pub const OVERLAY_SERIES: [&str; 7] =
    ["triplet_lower", "triplet_center", "triplet_upper", "inner_lower", "inner_upper", "at_lower", "at_upper"];

fn overlay_values(o: &Overlays) -> [f64; 7] {
    let [il, iu] = o.inner_boundaries.unwrap_or([f64::NAN; 2]);
    [o.triplet[0], o.triplet[1], o.triplet[2], il, iu, o.autler_townes[0], o.autler_townes[1]]
}

/// Overlay polylines, one series per column and one row per y value.
pub fn write_overlays(path: &Path, format: Format, y_name: &str, rows: &[(f64, Overlays)]) -> Result<(), FormatError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut file);
            let mut header = vec![y_name];
            header.extend(OVERLAY_SERIES);
            w.write_record(&header)?;
            for (y, o) in rows {
                let mut rec = vec![y.to_string()];
                rec.extend(overlay_values(o).iter().map(|v| v.to_string()));
                w.write_record(&rec)?;
            }
            w.flush()?;
        }
        Format::Json => {
            let mut series = BTreeMap::new();
            for (k, name) in OVERLAY_SERIES.iter().enumerate() {
                let col: Vec<Option<f64>> =
                    rows.iter().map(|(_, o)| Some(overlay_values(o)[k]).filter(|v| v.is_finite())).collect();
                series.insert(*name, col);
            }
            let doc = serde_json::json!({
                "y_axis": { "name": y_name, "values": rows.iter().map(|r| r.0).collect::<Vec<_>>() },
                "series": series,
                "sideband": "omega_s = 2 * omega_pump - omega_p",
            });
            serde_json::to_writer_pretty(&mut file, &doc)?;
            writeln!(file)?;
        }
    }
    file.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(complex: bool) -> ResultTable {
        let x = vec![4.2, 4.2 + 1.0 / 3.0, 5.0];
        let y = vec![-130.0, -114.5];
        let abs_r: Vec<f64> = vec![0.1, 1.0 / 7.0, f64::NAN, 1.0726, 1e-17, 0.3];
        let c = abs_r.iter().map(|&a| C64::new(a * 0.6, -a * 0.8 + 1e-300)).collect();
        let mut metadata = BTreeMap::new();
        metadata.insert("device.gamma1".into(), "45".into());
        metadata.insert("note".into(), "a,b".into());
        ResultTable {
            version: "0.1.0".into(),
            x: AxisData { name: "probe_freq_ghz".into(), values: x },
            y: AxisData { name: "pump_power_dbm".into(), values: y },
            metadata,
            abs_r,
            complex: complex.then_some(c),
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        for complex in [false, true] {
            let t = table(complex);
            let mut buf = Vec::new();
            t.write_csv(&mut buf).unwrap();
            let back = ResultTable::read_csv(&buf[..]).unwrap();
            assert!(t.bits_eq(&back));
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        for complex in [false, true] {
            let t = table(complex);
            let mut buf = Vec::new();
            t.write_json(&mut buf).unwrap();
            let back = ResultTable::read_json(&buf[..]).unwrap();
            assert!(t.bits_eq(&back));
        }
    }

    proptest::proptest! {
        #[test]
        fn arbitrary_values_round_trip(vals in proptest::collection::vec(proptest::num::f64::ANY, 6)) {
            let mut t = table(true);
            t.abs_r = vals.clone();
            t.complex = Some(vals.iter().rev().map(|&v| C64::new(v, -v)).collect());
            for json in [false, true] {
                let mut buf = Vec::new();
                let back = if json {
                    t.write_json(&mut buf).unwrap();
                    ResultTable::read_json(&buf[..]).unwrap()
                } else {
                    t.write_csv(&mut buf).unwrap();
                    ResultTable::read_csv(&buf[..]).unwrap()
                };
                // JSON has no infinities or NaN payloads; both come back as NaN.
                let norm = |x: f64| if x.is_finite() || !json { x } else { f64::NAN };
                let canon = |x: f64| if x.is_nan() { f64::NAN.to_bits() } else { x.to_bits() };
                for (a, b) in t.abs_r.iter().zip(&back.abs_r) {
                    proptest::prop_assert_eq!(canon(norm(*a)), canon(*b));
                }
            }
        }
    }

    #[test]
    fn csv_layout_is_y_major() {
        let mut buf = Vec::new();
        table(false).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data[0], "y,x,abs_r");
        assert!(data[1].starts_with("-130,4.2,"));
        assert!(data[4].starts_with("-114.5,4.2,"));
    }

    #[test]
    fn truncated_file_is_rejected() {
        let mut buf = Vec::new();
        table(false).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(text.lines().count() - 1).collect::<Vec<_>>().join("\n");
        assert!(ResultTable::read_csv(cut.as_bytes()).is_err());
    }
}
