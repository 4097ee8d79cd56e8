//! Results CSV and standalone SVG figures.

use std::fmt::Write as _;
use std::path::Path;

use gravgrasp_core::annotation::{SCORE, VALIDNESS};
use gravgrasp_core::eval::MetricsRow;
use gravgrasp_core::geometry::VoxelVolume;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::{read, write_atomic};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "PascalCase")]
struct CsvRow {
    #[serde(rename = "weight_kg")]
    weight_kg: String,
    #[serde(rename = "trials")]
    trials: usize,
    #[serde(rename = "successes")]
    successes: usize,
    #[serde(rename = "objects")]
    objects: usize,
    #[serde(rename = "SR")]
    sr: String,
    #[serde(rename = "CR")]
    cr: String,
}

fn ratio(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_default()
}

pub fn metrics_csv(rows: &[MetricsRow]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(CsvRow {
            weight_kg: format!("{}", r.weight_kg),
            trials: r.trials,
            successes: r.successes,
            objects: r.objects,
            sr: ratio(r.sr),
            cr: ratio(r.cr),
        })
        .expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    write_atomic(path, &metrics_csv(rows))
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let bytes = read(path)?;
    let bad = |m: String| Error::Input(format!("{}: {m}", path.display()));
    let mut rdr = csv::Reader::from_reader(bytes.as_slice());
    rdr.deserialize::<CsvRow>()
        .map(|r| {
            let r = r.map_err(|e| bad(e.to_string()))?;
            let opt = |s: &str| -> Result<Option<f64>> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|_| bad(format!("bad ratio `{s}`")))
                }
            };
            Ok(MetricsRow {
                weight_kg: r.weight_kg.parse().map_err(|_| bad(format!("bad weight `{}`", r.weight_kg)))?,
                trials: r.trials,
                successes: r.successes,
                objects: r.objects,
                sr: opt(&r.sr)?,
                cr: opt(&r.cr)?,
            })
        })
        .collect()
}

const W: f64 = 520.0;
const H: f64 = 340.0;
const MARGIN: [f64; 4] = [50.0, 20.0, 30.0, 50.0]; // left, right, top, bottom

fn svg_open(out: &mut String, w: f64, h: f64) {
    writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#).unwrap();
    writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
}

/// SR and CR against object weight.
pub fn metrics_svg(rows: &[MetricsRow]) -> String {
    let mut out = String::new();
    svg_open(&mut out, W, H);
    let (x0, x1) = (MARGIN[0], W - MARGIN[1]);
    let (y0, y1) = (H - MARGIN[3], MARGIN[2]);
    let wmin = rows.iter().map(|r| r.weight_kg).fold(f64::INFINITY, f64::min);
    let wmax = rows.iter().map(|r| r.weight_kg).fold(f64::NEG_INFINITY, f64::max);
    let span = if wmax > wmin { wmax - wmin } else { 1.0 };
    let px = |w: f64| x0 + (w - wmin) / span * (x1 - x0);
    let py = |v: f64| y0 + v / 100.0 * (y1 - y0);
    writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#).unwrap();
    writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#).unwrap();
    for v in (0..=100).step_by(20) {
        let y = py(v as f64);
        writeln!(out, r##"<line x1="{x0}" y1="{y:.1}" x2="{x1}" y2="{y:.1}" stroke="#dddddd"/>"##).unwrap();
        writeln!(out, r#"<text x="{}" y="{:.1}" text-anchor="end">{v}</text>"#, x0 - 6.0, y + 4.0).unwrap();
    }
    for r in rows {
        let x = px(r.weight_kg);
        writeln!(out, r#"<text x="{x:.1}" y="{}" text-anchor="middle">{}</text>"#, y0 + 16.0, r.weight_kg).unwrap();
    }
    writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">object weight [kg]</text>"#, (x0 + x1) / 2.0, H - 8.0)
        .unwrap();
    writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">ratio [%]</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    )
    .unwrap();
    type Series = (&'static str, &'static str, fn(&MetricsRow) -> Option<f64>);
    let series: [Series; 2] = [("SR", "#1f77b4", |r| r.sr), ("CR", "#ff7f0e", |r| r.cr)];
    for (k, (name, color, get)) in series.iter().enumerate() {
        let pts: Vec<String> =
            rows.iter().filter_map(|r| get(r).map(|v| format!("{:.1},{:.1}", px(r.weight_kg), py(v)))).collect();
        writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, pts.join(" "))
            .unwrap();
        for p in &pts {
            let (x, y) = p.split_once(',').unwrap();
            writeln!(out, r#"<circle cx="{x}" cy="{y}" r="3" fill="{color}"/>"#).unwrap();
        }
        let ly = y1 + 14.0 + 16.0 * k as f64;
        writeln!(
            out,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            x1 - 60.0,
            x1 - 40.0
        )
        .unwrap();
        writeln!(out, r#"<text x="{}" y="{}">{name}</text>"#, x1 - 34.0, ly + 4.0).unwrap();
    }
    out.push_str("</svg>\n");
    out
}

/// Axis-aligned slice `axis = value` of a volume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub axis: usize,
    pub value: f64,
}

impl std::str::FromStr for Plane {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Input(format!("invalid plane `{s}`; expected x=<m>, y=<m> or z=<m>"));
        let (a, v) = s.split_once('=').ok_or_else(bad)?;
        let axis = match a.trim() {
            "x" => 0,
            "y" => 1,
            "z" => 2,
            _ => return Err(bad()),
        };
        let value: f64 = v.trim().parse().map_err(|_| bad())?;
        if !value.is_finite() {
            return Err(bad());
        }
        Ok(Self { axis, value })
    }
}

/// Blue to yellow ramp over `t` in [0, 1].
fn ramp(t: f64) -> String {
    let stops = [(68.0, 1.0, 84.0), (33.0, 145.0, 140.0), (253.0, 231.0, 37.0)];
    let t = t.clamp(0.0, 1.0) * 2.0;
    let i = (t.floor() as usize).min(1);
    let f = t - i as f64;
    let c = |k: usize| -> u8 {
        let (a, b) = (stops[i], stops[i + 1]);
        let (a, b) = match k {
            0 => (a.0, b.0),
            1 => (a.1, b.1),
            _ => (a.2, b.2),
        };
        (a + (b - a) * f).round() as u8
    };
    format!("#{:02x}{:02x}{:02x}", c(0), c(1), c(2))
}

/// Heatmap of `f_g` on one slice of a label volume. Valid voxels are
/// colored by score and outlined; invalid voxels are light gray.
pub fn label_slice_svg(labels: &VoxelVolume, plane: Plane) -> Result<String> {
    let g = &labels.grid;
    let (Some(valid), Some(score)) = (labels.channel(VALIDNESS), labels.channel(SCORE)) else {
        return Err(Error::Input("volume has no label channels".into()));
    };
    let k = ((plane.value - g.origin[plane.axis]) / g.voxel_size).floor();
    if !(k >= 0.0 && (k as usize) < g.dims[plane.axis]) {
        return Err(Error::Input(format!("plane {:?} lies outside the grid", plane)));
    }
    let k = k as usize;
    let (u, v) = match plane.axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let cell = 10.0;
    let (w, h) = (g.dims[u] as f64 * cell + 20.0, g.dims[v] as f64 * cell + 40.0);
    let index = |i: usize, j: usize| {
        let mut idx = [0; 3];
        idx[plane.axis] = k;
        idx[u] = i;
        idx[v] = j;
        g.linear(idx)
    };
    let max = (0..g.dims[u])
        .flat_map(|i| (0..g.dims[v]).map(move |j| (i, j)))
        .map(|(i, j)| index(i, j))
        .filter(|&l| valid[l] == 1.0)
        .map(|l| score[l] as f64)
        .fold(0.0, f64::max);
    let mut out = String::new();
    svg_open(&mut out, w, h);
    let names = ["x", "y", "z"];
    writeln!(out, r#"<text x="10" y="18">f_g on {} = {} m (max {:.1} N)</text>"#, names[plane.axis], plane.value, max)
        .unwrap();
    for i in 0..g.dims[u] {
        for j in 0..g.dims[v] {
            let l = index(i, j);
            let x = 10.0 + i as f64 * cell;
            // Rows run top to bottom with increasing height.
            let y = 30.0 + (g.dims[v] - 1 - j) as f64 * cell;
            if valid[l] == 1.0 {
                let t = if max > 0.0 { score[l] as f64 / max } else { 0.0 };
                writeln!(out, r#"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{}" stroke="black" stroke-width="0.5"/>"#, ramp(t)).unwrap();
            } else {
                writeln!(out, r##"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="#eeeeee"/>"##).unwrap();
            }
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}
