//! Result files: long-format CSV and a plain SVG line chart.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ambistop::experiments::{ResultRow, ResultTable};

use crate::error::CliError;

pub const RESULTS_HEADER: &str = "experiment,param_name,param_value,quantity,value";

fn number(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV text for a table: LF line endings and 17 significant digits, so
/// identical tables give identical bytes.
pub fn render_csv(table: &ResultTable) -> Result<String, CliError> {
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let header: Vec<&str> = RESULTS_HEADER.split(',').collect();
    let to_err = |e: csv::Error| CliError::Usage(format!("cannot encode results: {e}"));
    writer.write_record(&header).map_err(to_err)?;
    for r in &table.rows {
        writer
            .write_record([&r.experiment, &r.param_name, &number(r.param_value), &r.quantity, &number(r.value)])
            .map_err(to_err)?;
    }
    let bytes = writer.into_inner().map_err(|e| CliError::Usage(format!("cannot encode results: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is valid UTF-8"))
}

/// Line chart with one polyline per quantity that has at least two finite
/// points. Returns `None` when nothing qualifies.
pub fn render_svg(title: &str, table: &ResultTable) -> Option<String> {
    let mut series: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
    for r in &table.rows {
        if r.param_value.is_finite() && r.value.is_finite() {
            series.entry(r.quantity.as_str()).or_default().push((r.param_value, r.value));
        }
    }
    series.retain(|_, pts| {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.dedup_by(|a, b| a.0 == b.0);
        pts.len() >= 2
    });
    if series.is_empty() {
        return None;
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in series.values().flatten() {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let (w, h, m) = (640.0, 400.0, 50.0);
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    const COLOURS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" font-size="14" text-anchor="middle">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<polyline points="{m},{m} {m},{} {},{}" fill="none" stroke="black"/>"#,
        h - m,
        w - m,
        h - m
    );
    let _ = writeln!(s, r#"<text x="{m}" y="{}" font-size="10">{}</text>"#, h - m + 15.0, number_label(x0));
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{}</text>"#, w - m, h - m + 15.0, number_label(x1));
    let _ = writeln!(s, r#"<text x="5" y="{}" font-size="10">{}</text>"#, h - m, number_label(y0));
    let _ = writeln!(s, r#"<text x="5" y="{}" font-size="10">{}</text>"#, m, number_label(y1));
    for (i, (name, pts)) in series.iter().enumerate() {
        let colour = COLOURS[i % COLOURS.len()];
        let points: Vec<String> = pts.iter().map(|(x, y)| format!("{:.3},{:.3}", sx(*x), sy(*y))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#, points.join(" "));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="10" fill="{colour}" text-anchor="end">{}</text>"#,
            w - 5.0,
            40.0 + 12.0 * i as f64,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    Some(s)
}

fn number_label(x: f64) -> String {
    format!("{x:.4}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Writes `<name>.csv` holding every row of `table`, plus `<name>.svg` when
/// the table contains a sweep.
pub fn emit_experiment(name: &str, table: &ResultTable, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let stem = file_stem(name);
    let csv_path = dir.join(format!("{stem}.csv"));
    write(&csv_path, &render_csv(table)?)?;
    let mut written = vec![csv_path];
    if let Some(svg) = render_svg(name, table) {
        let svg_path = dir.join(format!("{stem}.svg"));
        write(&svg_path, &svg)?;
        written.push(svg_path);
    }
    Ok(written)
}

/// One CSV (and possibly one SVG) per experiment in the table.
pub fn emit_results(table: &ResultTable, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    for name in table.experiments() {
        written.extend(emit_experiment(&name, &table.subset(&name), dir)?);
    }
    Ok(written)
}

pub fn read_results(path: &Path) -> Result<ResultTable, CliError> {
    let schema = |line: usize, message: String| CliError::Schema { path: path.to_path_buf(), line, message };
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    let mut table = ResultTable::default();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| schema(idx + 1, e.to_string()))?;
        if idx == 0 {
            if record.iter().collect::<Vec<_>>().join(",") != RESULTS_HEADER {
                return Err(schema(1, format!("expected header `{RESULTS_HEADER}`")));
            }
            continue;
        }
        if record.len() != 5 {
            return Err(schema(idx + 1, format!("expected 5 fields, found {}", record.len())));
        }
        let parse = |i: usize| record[i].parse::<f64>().map_err(|_| schema(idx + 1, format!("bad number `{}`", &record[i])));
        table.rows.push(ResultRow {
            experiment: record[0].to_string(),
            param_name: record[1].to_string(),
            param_value: parse(2)?,
            quantity: record[3].to_string(),
            value: parse(4)?,
        });
    }
    Ok(table)
}
