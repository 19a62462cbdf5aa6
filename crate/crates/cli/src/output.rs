//! File emission: RFC-4180 CSV time series, JSON summaries with stable key
//! order, minimal static SVG line plots, and the run manifest. CSV files are
//! the source of truth; the SVGs are best-effort renderings of the same data.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// Output directory precedence: explicit flag, then `QMPC_OUT_DIR`, then
/// `./qmpc-out`.
pub fn resolve_out_dir(flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Ok(env) = std::env::var("QMPC_OUT_DIR") {
        if !env.is_empty() {
            return PathBuf::from(env);
        }
    }
    PathBuf::from("qmpc-out")
}

fn csv_escape(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Shortest round-trip decimal form, kept locale-independent.
pub fn fmt_num(v: f64) -> String {
    let mut s = format!("{v}");
    if !s.contains('.') && !s.contains('e') && !s.contains("inf") && !s.contains("NaN") {
        s.push_str(".0");
    }
    s
}

#[derive(Debug, Clone, Default)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn write_csv(path: &Path, table: &CsvTable) -> Result<()> {
    let mut out = String::new();
    for row in std::iter::once(&table.header).chain(&table.rows) {
        let line: Vec<String> = row.iter().map(|f| csv_escape(f)).collect();
        out.push_str(&line.join(","));
        out.push_str("\r\n");
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Standard trajectory layout: `time_ns, u_1..u_m, x_1..x_n, infidelity,
/// flags`. The final row has no applied control; its control fields are
/// empty.
pub fn trajectory_table(
    times: &[f64],
    controls: &[Vec<f64>],
    states: &[Vec<f64>],
    infidelity: &[f64],
    flags: &[String],
) -> CsvTable {
    let m = controls.first().map_or(0, |u| u.len());
    let n = states.first().map_or(0, |x| x.len());
    let mut header = vec!["time_ns".to_string()];
    header.extend((1..=m).map(|j| format!("u_{j}")));
    header.extend((1..=n).map(|i| format!("x_{i}")));
    header.push("infidelity".to_string());
    header.push("flags".to_string());
    let mut rows = Vec::with_capacity(times.len());
    for t in 0..times.len() {
        let mut row = vec![fmt_num(times[t])];
        for j in 0..m {
            row.push(controls.get(t).map_or(String::new(), |u| fmt_num(u[j])));
        }
        for i in 0..n {
            row.push(fmt_num(states[t][i]));
        }
        row.push(fmt_num(infidelity[t]));
        row.push(flags.get(t).cloned().unwrap_or_default());
        rows.push(row);
    }
    CsvTable { header, rows }
}

pub type Summary = BTreeMap<String, serde_json::Value>;

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// First time after which the infidelity stays below `threshold` for the
/// remainder of the run.
pub fn settling_time(times: &[f64], infidelity: &[f64], threshold: f64) -> Option<f64> {
    let mut settled_from = None;
    for (i, &v) in infidelity.iter().enumerate() {
        if v < threshold {
            if settled_from.is_none() {
                settled_from = Some(i);
            }
        } else {
            settled_from = None;
        }
    }
    settled_from.map(|i| times[i])
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const SVG_COLORS: &[&str] = &[
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf",
];

/// Minimal line plot: axes box, min/max tick labels, one polyline per
/// series, legend in the top-right corner.
pub fn svg_line_plot(
    path: &Path,
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[Series],
) -> Result<()> {
    let (w, h) = (640.0, 400.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 40.0, 50.0);
    let pts: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
    let sy = |y: f64| h - mb - (y - y0) / (y1 - y0) * (h - mt - mb);
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\" font-family=\"monospace\" font-size=\"12\">\n"
    ));
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        w / 2.0,
        title
    ));
    svg.push_str(&format!(
        "<rect x=\"{ml}\" y=\"{mt}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        w - ml - mr,
        h - mt - mb
    ));
    for (v, anchor, x, y) in [
        (x0, "middle", sx(x0), h - mb + 18.0),
        (x1, "middle", sx(x1), h - mb + 18.0),
    ] {
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" text-anchor=\"{anchor}\">{}</text>\n",
            format_tick(v)
        ));
    }
    for v in [y0, y1] {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            ml - 6.0,
            sy(v) + 4.0,
            format_tick(v)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{xlabel}</text>\n",
        w / 2.0,
        h - 12.0
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{ylabel}</text>\n",
        h / 2.0,
        h / 2.0
    ));
    for (k, s) in series.iter().enumerate() {
        let color = SVG_COLORS[k % SVG_COLORS.len()];
        let path_pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            path_pts.join(" ")
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{}</text>\n",
            w - mr - 150.0,
            mt + 16.0 * (k as f64 + 1.0),
            s.label
        ));
    }
    svg.push_str("</svg>\n");
    fs::write(path, svg).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 0.01 && v.abs() < 10_000.0 {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

/// Everything needed to reproduce one scenario run, plus the list of files
/// it produced.
#[derive(Debug, serde::Serialize)]
pub struct RunManifest {
    pub scenario: String,
    pub version: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub files: Vec<String>,
    pub wall_clock_ms: u128,
}

/// Collects emitted files relative to one scenario's output directory.
pub struct Emitter {
    dir: PathBuf,
    files: Vec<String>,
}

impl Emitter {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        // Fail before any computation if the directory is not writable.
        let probe = dir.join(".write-probe");
        fs::File::create(&probe)
            .and_then(|mut f| f.write_all(b"ok"))
            .with_context(|| format!("output dir {} not writable", dir.display()))?;
        fs::remove_file(&probe).ok();
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn csv(&mut self, name: &str, table: &CsvTable) -> Result<PathBuf> {
        let path = self.dir.join(name);
        write_csv(&path, table)?;
        self.files.push(name.to_string());
        Ok(path)
    }

    pub fn json(&mut self, name: &str, value: &impl serde::Serialize) -> Result<PathBuf> {
        let path = self.dir.join(name);
        write_json(&path, value)?;
        self.files.push(name.to_string());
        Ok(path)
    }

    pub fn svg(
        &mut self,
        name: &str,
        title: &str,
        xlabel: &str,
        ylabel: &str,
        series: &[Series],
    ) -> Result<PathBuf> {
        let path = self.dir.join(name);
        svg_line_plot(&path, title, xlabel, ylabel, series)?;
        self.files.push(name.to_string());
        Ok(path)
    }

    pub fn finish(
        mut self,
        scenario: &str,
        seed: u64,
        config: serde_json::Value,
        started: std::time::Instant,
    ) -> Result<RunManifest> {
        let mut files = std::mem::take(&mut self.files);
        files.push("manifest.json".to_string());
        let manifest = RunManifest {
            scenario: scenario.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config,
            files,
            wall_clock_ms: started.elapsed().as_millis(),
        };
        write_json(&self.dir.join("manifest.json"), &manifest)?;
        Ok(manifest)
    }
}
