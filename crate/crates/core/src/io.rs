//! File formats: per-channel map CSVs, time-series CSVs, JSON sidecars,
//! boundary polylines and SVG heatmaps.
//!
//! Every CSV starts with one `#` line carrying provenance; floats are written
//! with 17 significant digits so a CSV round-trips exactly.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classical::Boundary;
use crate::error::{Error, Result};
use crate::grid::ParameterGrid;
use crate::map::{MapMetadata, ParameterMap, CODE_VERSION};
use crate::tdse::{SampleMode, TimeSeries};
use crate::units::PhysicalUnits;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub code_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    /// Seconds since the Unix epoch. Only written to sidecars so that CSVs
    /// stay reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_unix: Option<u64>,
}

impl Default for Provenance {
    fn default() -> Self {
        Self { code_version: CODE_VERSION.to_string(), config_hash: None, command: None, created_unix: None }
    }
}

impl Provenance {
    pub fn header_line(&self) -> String {
        let mut line = format!("# prethermal code_version={}", self.code_version);
        if let Some(c) = &self.command {
            let _ = write!(line, " command={c}");
        }
        if let Some(h) = &self.config_hash {
            let _ = write!(line, " config_hash={h}");
        }
        line
    }
}

/// 17 significant digits; non-finite values as `NaN`, `inf`, `-inf`.
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Pretty JSON document followed by a newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn csv_writer(path: &Path, provenance: &Provenance, extra: &str) -> Result<csv::Writer<BufWriter<File>>> {
    let mut w = create(path)?;
    writeln!(w, "{}{extra}", provenance.header_line())?;
    Ok(csv::Writer::from_writer(w))
}

/// Plain numeric table with a provenance line and a header row.
pub fn write_table(path: &Path, provenance: &Provenance, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv_writer(path, provenance, "")?;
    w.write_record(header)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::DimensionMismatch { expected: header.len(), actual: row.len() });
        }
        w.write_record(row.iter().map(|&x| fmt_float(x)))?;
    }
    w.flush()?;
    Ok(())
}

/// Long-format CSV of one channel: `alpha_index,omega_index,alpha,omega,value`.
pub fn write_map_channel(map: &ParameterMap, channel: &str, path: &Path, provenance: &Provenance) -> Result<()> {
    let c = map.channel(channel).ok_or_else(|| Error::invalid(format!("map has no channel '{channel}'")))?;
    let mut extra = format!(" channel={channel} v0={}", map.metadata.v0);
    if let Some(m) = map.metadata.m_max {
        let _ = write!(extra, " m_max={m}");
    }
    let mut w = csv_writer(path, provenance, &extra)?;
    w.write_record(["alpha_index", "omega_index", "alpha", "omega", "value"])?;
    for (i, j) in map.grid.cells() {
        w.write_record([
            i.to_string(),
            j.to_string(),
            fmt_float(map.grid.alpha[i]),
            fmt_float(map.grid.omega[j]),
            fmt_float(c.values[i][j]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct MapSidecar<'a> {
    provenance: &'a Provenance,
    grid: &'a ParameterGrid,
    channels: Vec<&'a str>,
    files: Vec<String>,
    metadata: &'a MapMetadata,
}

/// Writes `{stem}_{channel}.csv` for every channel plus `{stem}.json`.
/// Returns the paths written, sidecar last.
pub fn write_map(map: &ParameterMap, dir: &Path, stem: &str, provenance: &Provenance) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for c in &map.channels {
        let path = dir.join(format!("{stem}_{}.csv", c.name));
        write_map_channel(map, &c.name, &path, provenance)?;
        paths.push(path);
    }
    let sidecar = MapSidecar {
        provenance,
        grid: &map.grid,
        channels: map.channels.iter().map(|c| c.name.as_str()).collect(),
        files: paths.iter().filter_map(|p| p.file_name()).map(|f| f.to_string_lossy().into_owned()).collect(),
        metadata: &map.metadata,
    };
    let path = dir.join(format!("{stem}.json"));
    write_json(&path, &sidecar)?;
    paths.push(path);
    Ok(paths)
}

/// `polyline,point,alpha,omega,closed`.
pub fn write_boundary(boundary: &[Boundary], path: &Path, provenance: &Provenance) -> Result<()> {
    let mut w = csv_writer(path, provenance, "")?;
    w.write_record(["polyline", "point", "alpha", "omega", "closed"])?;
    for (k, line) in boundary.iter().enumerate() {
        for (p, &(a, o)) in line.points.iter().enumerate() {
            w.write_record([k.to_string(), p.to_string(), fmt_float(a), fmt_float(o), line.closed.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct SeriesSidecar {
    provenance: Provenance,
    mode: SampleMode,
    channels: Vec<String>,
    #[serde(default)]
    recoil_frequency_hz: Option<f64>,
    #[serde(default)]
    drive: Option<crate::units::DriveParams>,
    #[serde(default)]
    basis: Option<crate::lattice::PlaneWaveBasis>,
    #[serde(default)]
    extra: serde_json::Map<String, serde_json::Value>,
}

fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes `time` (ħ/E_R), `time_us`, an optional `bin_count` column and every
/// channel, plus a JSON sidecar next to the CSV.
pub fn write_series(
    series: &TimeSeries,
    path: &Path,
    units: &PhysicalUnits,
    provenance: &Provenance,
    extra: serde_json::Map<String, serde_json::Value>,
) -> Result<()> {
    let mut w = csv_writer(path, provenance, "")?;
    let mut header = vec!["time".to_string(), "time_us".to_string()];
    if series.bin_counts.is_some() {
        header.push("bin_count".into());
    }
    header.extend(series.channels.iter().map(|c| c.name.clone()));
    w.write_record(&header)?;
    let us = series.times_us(units);
    for (i, &t) in series.times.iter().enumerate() {
        let mut row = vec![fmt_float(t), fmt_float(us[i])];
        if let Some(counts) = &series.bin_counts {
            row.push(counts[i].to_string());
        }
        row.extend(series.channels.iter().map(|c| fmt_float(c.values[i])));
        w.write_record(&row)?;
    }
    w.flush()?;
    let sidecar = SeriesSidecar {
        provenance: provenance.clone(),
        mode: series.mode,
        channels: series.channels.iter().map(|c| c.name.clone()).collect(),
        recoil_frequency_hz: Some(units.recoil_frequency_hz),
        drive: series.drive,
        basis: series.basis,
        extra,
    };
    write_json(&sidecar_path(path), &sidecar)
}

/// Reads a series CSV. Files written by [`write_series`] keep their sampling
/// mode and drive from the sidecar. Other files must carry a `time_us`
/// column (converted with `units`) and are read as external data; the
/// documented external layout is the header `time_us,value`.
pub fn read_series(path: &Path, units: &PhysicalUnits) -> Result<TimeSeries> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let time_col = headers.iter().position(|h| h == "time");
    let us_col = headers.iter().position(|h| h == "time_us");
    if time_col.is_none() && us_col.is_none() {
        return Err(Error::invalid(format!("{}: no 'time' or 'time_us' column", path.display())));
    }
    let bin_col = headers.iter().position(|h| h == "bin_count");
    let channel_cols: Vec<usize> = (0..headers.len())
        .filter(|&k| Some(k) != time_col && Some(k) != us_col && Some(k) != bin_col)
        .collect();
    if channel_cols.is_empty() {
        return Err(Error::invalid(format!("{}: no value columns", path.display())));
    }

    let mut times = Vec::new();
    let mut counts = Vec::new();
    let mut columns = vec![Vec::new(); channel_cols.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let num = |k: usize| -> Result<f64> {
            record[k]
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("{} row {}: '{}' is not a number", path.display(), row + 1, &record[k])))
        };
        times.push(match time_col {
            Some(k) => num(k)?,
            None => units.from_microseconds(num(us_col.expect("checked above"))?),
        });
        if let Some(k) = bin_col {
            counts.push(num(k)? as usize);
        }
        for (col, &k) in columns.iter_mut().zip(&channel_cols) {
            col.push(num(k)?);
        }
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(format!("{}: times must be strictly increasing", path.display())));
    }

    let sidecar: Option<SeriesSidecar> = match fs::read_to_string(sidecar_path(path)) {
        Ok(text) if time_col.is_some() => Some(serde_json::from_str(&text)?),
        _ => None,
    };
    let mode = sidecar.as_ref().map_or(SampleMode::External, |s| s.mode);
    let mut series = TimeSeries::new(times, mode);
    for (values, &k) in columns.into_iter().zip(&channel_cols) {
        series.push_channel(headers[k].clone(), values)?;
    }
    if bin_col.is_some() {
        series.bin_counts = Some(counts);
    }
    if let Some(s) = sidecar {
        series.drive = s.drive;
        series.basis = s.basis;
    }
    Ok(series)
}

/// Layout of an SVG heatmap in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapStyle {
    pub cell: f64,
    pub min: f64,
    pub max: f64,
}

impl Default for HeatmapStyle {
    /// 24 px cells on a fixed `0..1` colour scale.
    fn default() -> Self {
        Self { cell: 24.0, min: 0.0, max: 1.0 }
    }
}

/// Pixel mapping for one grid axis: cell `k` spans `edges[k]..edges[k+1]`
/// in axis coordinates (log of the value on positive axes, index otherwise).
struct AxisScale {
    log: bool,
    edges: Vec<f64>,
    pixels: f64,
}

impl AxisScale {
    fn new(values: &[f64], pixels: f64) -> Self {
        let log = values.iter().all(|v| *v > 0.0);
        let coords: Vec<f64> = if log { values.iter().map(|v| v.log10()).collect() } else { (0..values.len()).map(|k| k as f64).collect() };
        let n = coords.len();
        let mut edges = Vec::with_capacity(n + 1);
        if n == 1 {
            edges.extend([coords[0] - 0.5, coords[0] + 0.5]);
        } else {
            edges.push(coords[0] - 0.5 * (coords[1] - coords[0]));
            edges.extend(coords.windows(2).map(|w| 0.5 * (w[0] + w[1])));
            edges.push(coords[n - 1] + 0.5 * (coords[n - 1] - coords[n - 2]));
        }
        Self { log, edges, pixels }
    }

    fn to_px(&self, coord: f64) -> f64 {
        let (lo, hi) = (self.edges[0], self.edges[self.edges.len() - 1]);
        (coord - lo) / (hi - lo) * self.pixels
    }

    /// Position of an axis value, when the axis is logarithmic.
    fn value_px(&self, v: f64) -> Option<f64> {
        (self.log && v > 0.0).then(|| self.to_px(v.log10()))
    }

    fn decade_ticks(&self) -> Vec<(f64, String)> {
        if !self.log {
            return Vec::new();
        }
        let (lo, hi) = (self.edges[0], self.edges[self.edges.len() - 1]);
        (lo.ceil() as i32..=hi.floor() as i32).map(|k| (self.to_px(k as f64), format!("{}", 10f64.powi(k)))).collect()
    }
}

fn colour(v: f64, style: &HeatmapStyle) -> String {
    if !v.is_finite() {
        return "#808080".into();
    }
    let t = ((v - style.min) / (style.max - style.min)).clamp(0.0, 1.0);
    format!("#{:x}", colorous::VIRIDIS.eval_continuous(t))
}

/// Heatmap of one channel with `Omega` across and `alpha` upwards, decade
/// ticks on log axes and optional boundary overlay.
pub fn heatmap_svg(map: &ParameterMap, channel: &str, title: &str, overlay: &[Boundary], style: &HeatmapStyle) -> Result<String> {
    let c = map.channel(channel).ok_or_else(|| Error::invalid(format!("map has no channel '{channel}'")))?;
    if !(style.max > style.min && style.cell > 0.0) {
        return Err(Error::invalid("heatmap scale must be increasing with positive cell size"));
    }
    let (na, nw) = map.grid.shape();
    let (left, top, right, bottom) = (60.0, 36.0, 90.0, 50.0);
    let (w, h) = (nw as f64 * style.cell, na as f64 * style.cell);
    let x_axis = AxisScale::new(&map.grid.omega, w);
    let y_axis = AxisScale::new(&map.grid.alpha, h);
    let px = |x: f64| left + x;
    let py = |y: f64| top + h - y;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" font-family="sans-serif" font-size="12">"#,
        left + w + right,
        top + h + bottom
    );
    let _ = writeln!(s, r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{}</text>"#, left + w / 2.0, escape(title));
    for i in 0..na {
        let (y0, y1) = (y_axis.to_px(y_axis.edges[i]), y_axis.to_px(y_axis.edges[i + 1]));
        for j in 0..nw {
            let (x0, x1) = (x_axis.to_px(x_axis.edges[j]), x_axis.to_px(x_axis.edges[j + 1]));
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}" shape-rendering="crispEdges"/>"#,
                px(x0),
                py(y1),
                x1 - x0,
                y1 - y0,
                colour(c.values[i][j], style)
            );
        }
    }
    for line in overlay {
        let pts: Vec<String> = line
            .points
            .iter()
            .filter_map(|&(a, o)| Some(format!("{:.2},{:.2}", px(x_axis.value_px(o)?), py(y_axis.value_px(a)?))))
            .collect();
        if pts.len() < 2 {
            continue;
        }
        let tag = if line.closed { "polygon" } else { "polyline" };
        let _ = writeln!(
            s,
            r#"<{tag} points="{}" fill="none" stroke="white" stroke-width="2" stroke-dasharray="6,4"/>"#,
            pts.join(" ")
        );
    }
    let _ = writeln!(s, r#"<rect x="{left}" y="{top}" width="{w:.2}" height="{h:.2}" fill="none" stroke="black"/>"#);
    for (x, label) in x_axis.decade_ticks() {
        let _ = writeln!(s, r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="black"/>"#, px(x), top + h, top + h + 5.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{label}</text>"#, px(x), top + h + 18.0);
    }
    for (y, label) in y_axis.decade_ticks() {
        let _ = writeln!(s, r#"<line x1="{0:.2}" y1="{1:.2}" x2="{2:.2}" y2="{1:.2}" stroke="black"/>"#, left - 5.0, py(y), left);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#, left - 8.0, py(y) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Ω</text>"#, left + w / 2.0, top + h + 40.0);
    let _ = writeln!(s, r#"<text x="16" y="{:.2}" text-anchor="middle">α</text>"#, top + h / 2.0);

    let bar_x = left + w + 20.0;
    let steps = 64;
    for k in 0..steps {
        let t = (k as f64 + 0.5) / steps as f64;
        let v = style.min + t * (style.max - style.min);
        let _ = writeln!(
            s,
            r#"<rect x="{bar_x:.2}" y="{:.2}" width="16" height="{:.2}" fill="{}" shape-rendering="crispEdges"/>"#,
            top + h * (1.0 - (k + 1) as f64 / steps as f64),
            h / steps as f64,
            colour(v, style)
        );
    }
    for t in [0.0, 0.5, 1.0] {
        let v = style.min + t * (style.max - style.min);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, bar_x + 22.0, top + h * (1.0 - t) + 4.0, v);
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn write_heatmap(map: &ParameterMap, channel: &str, title: &str, overlay: &[Boundary], path: &Path) -> Result<()> {
    let svg = heatmap_svg(map, channel, title, overlay, &HeatmapStyle::default())?;
    let mut w = create(path)?;
    w.write_all(svg.as_bytes())?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scratch(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("prethermal-io-{}-{name}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0] {
            assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_float(f64::NAN), "NaN");
        assert!(fmt_float(f64::NAN).parse::<f64>().unwrap().is_nan());
    }

    #[test]
    fn series_round_trip() {
        let dir = scratch("series");
        let units = PhysicalUnits::lithium7_1064nm();
        let mut s = TimeSeries::new(vec![0.0, 0.5, 1.0], SampleMode::Stroboscopic);
        s.push_channel("f0", vec![1.0, 0.75, 1.0 / 3.0]).unwrap();
        s.push_channel("peak_1", vec![0.0, 0.1, 0.2]).unwrap();
        let path = dir.join("s.csv");
        write_series(&s, &path, &units, &Provenance::default(), Default::default()).unwrap();
        let back = read_series(&path, &units).unwrap();
        assert_eq!(back, s);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# prethermal code_version="));
    }

    #[test]
    fn external_csv_in_microseconds() {
        let dir = scratch("external");
        let units = PhysicalUnits::lithium7_1064nm();
        let path = dir.join("e.csv");
        fs::write(&path, "time_us,value\n100,2\n200,3\n").unwrap();
        let s = read_series(&path, &units).unwrap();
        assert_eq!(s.mode, SampleMode::External);
        assert!((units.to_microseconds(s.times[1]) - 200.0).abs() < 1e-9);
        assert_eq!(s.channel("value").unwrap(), &[2.0, 3.0]);
        fs::write(&path, "t,value\n1,2\n").unwrap();
        assert!(read_series(&path, &units).is_err());
        fs::write(&path, "time_us,value\n2,1\n1,2\n").unwrap();
        assert!(read_series(&path, &units).is_err());
    }

    #[test]
    fn map_files_and_heatmap() {
        let dir = scratch("map");
        let grid: ParameterGrid = "0.1:10:3,0.1:10:5".parse().unwrap();
        let mut map = ParameterMap::new(grid, &["f0".to_string()], MapMetadata::new(10.0));
        map.channels[0].values[1][2] = 0.5;
        let paths = write_map(&map, &dir, "pge", &Provenance::default()).unwrap();
        assert_eq!(paths.len(), 2);
        let text = fs::read_to_string(&paths[0]).unwrap();
        assert_eq!(text.lines().count(), 2 + 15);
        assert!(text.lines().nth(1).unwrap() == "alpha_index,omega_index,alpha,omega,value");
        assert!(text.lines().any(|l| l.starts_with("1,2,") && l.ends_with(",5.0000000000000000e-1")));

        let overlay = [Boundary { points: vec![(0.1, 0.1), (10.0, 10.0)], closed: false }];
        let svg = heatmap_svg(&map, "f0", "f0 & co", &overlay, &HeatmapStyle::default()).unwrap();
        assert_eq!(svg.matches("<rect").count(), 15 + 1 + 64);
        assert!(svg.contains("polyline") && svg.contains("f0 &amp; co"));
        assert!(svg.contains(">10</text>") && svg.contains(">0.1</text>"));
        assert!(heatmap_svg(&map, "f2", "", &[], &HeatmapStyle::default()).is_err());
    }
}
