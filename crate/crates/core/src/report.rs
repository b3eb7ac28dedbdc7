//! CSV and self-contained HTML export of an [`EvolutionTable`].
//!
//! The CSV is long-format: `metric,series,date,value`, one row per cell,
//! ordered by metric registration, series order, then date. The HTML report
//! embeds the whole table as JSON (`<script type="application/json"
//! id="report-payload">`) next to an inline chart script, so it opens without
//! any network access.

use std::borrow::Cow;
use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::engine::EvolutionTable;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("failed to write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("two reports would both be named '{0}'")]
    NameCollision(String),
}

pub const CSV_HEADER: [&str; 4] = ["metric", "series", "date", "value"];

/// Shortest decimal form without a trailing `.0`: `12`, `2.5`.
pub fn format_value(value: f64) -> String {
    if value == 0.0 {
        // also folds -0
        return "0".to_string();
    }
    format!("{value}")
}

pub fn to_csv(table: &EvolutionTable) -> Vec<u8> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    writer.write_record(CSV_HEADER).expect("writing to memory");
    for metric in &table.metrics {
        for series in &metric.series {
            for (date, value) in table.boundaries.iter().zip(&series.values) {
                writer
                    .write_record([
                        metric.name.as_str(),
                        series.label.as_str(),
                        &date.format("%Y-%m-%d").to_string(),
                        &format_value(*value),
                    ])
                    .expect("writing to memory");
            }
        }
    }
    writer.into_inner().expect("flushing to memory")
}

/// The chart-rendering script embedded into every HTML report.
#[derive(Debug, Clone)]
pub struct ChartAsset {
    pub name: Cow<'static, str>,
    pub version: Cow<'static, str>,
    pub script: Cow<'static, str>,
}

impl ChartAsset {
    /// The built-in stub renderer (plain SVG line charts).
    pub fn bundled() -> Self {
        ChartAsset {
            name: Cow::Borrowed("chart-stub"),
            version: Cow::Borrowed(env!("CARGO_PKG_VERSION")),
            script: Cow::Borrowed(include_str!("../assets/chart-stub.js")),
        }
    }
}

impl Default for ChartAsset {
    fn default() -> Self {
        ChartAsset::bundled()
    }
}

/// Pretty-printed JSON with sorted object keys.
pub fn payload_json(table: &EvolutionTable) -> String {
    // serde_json::Value maps are BTreeMaps, so going through Value sorts keys.
    let value = serde_json::to_value(table).expect("table serializes");
    serde_json::to_string_pretty(&value).expect("value serializes")
}

pub fn from_payload(json: &str) -> Result<EvolutionTable, serde_json::Error> {
    serde_json::from_str(json)
}

const PAYLOAD_OPEN: &str = r#"<script type="application/json" id="report-payload">"#;

/// The JSON payload embedded in a report produced by [`to_html`].
pub fn extract_payload(html: &str) -> Option<&str> {
    let start = html.find(PAYLOAD_OPEN)? + PAYLOAD_OPEN.len();
    let len = html[start..].find("</script>")?;
    Some(&html[start..start + len])
}

fn escape_html(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

const STYLE: &str = "body{font-family:system-ui,sans-serif;margin:2rem auto;max-width:960px;color:#222}\
h1{margin-bottom:.2rem}#metadata dl{display:grid;grid-template-columns:max-content auto;gap:.2rem 1rem;font-size:.9rem}\
#metadata dt{font-weight:600}.chart{border:1px solid #ddd;border-radius:6px;padding:.5rem 1rem;margin:1rem 0}\
.chart h2{font-size:1.1rem}.legend{display:flex;flex-wrap:wrap;gap:1rem;list-style:none;padding:0;font-size:.85rem}\
.error-banner{background:#fdd;border:1px solid #c00;padding:.5rem 1rem}";

fn metadata_block(table: &EvolutionTable) -> String {
    let meta = &table.metadata;
    let mut rows: Vec<(&str, String)> = vec![
        ("Repository", table.repo_name.clone()),
        ("Source", meta.source.clone()),
        ("Branch", meta.branch.clone()),
    ];
    if let Some(g) = &meta.grammar {
        rows.push(("Language", g.language.clone()));
        rows.push((
            "Grammar",
            format!("{} {} (tree-sitter {})", g.grammar, g.version, g.runtime),
        ));
    }
    rows.push(("Date unit", table.unit.to_string()));
    if let Some(w) = &meta.window {
        rows.push(("Window", format!("{}–{}", w.start_year(), w.end_year())));
    }
    rows.push(("Snapshots", table.boundaries.len().to_string()));
    rows.push(("Skipped files", meta.skip_count.to_string()));
    rows.push(("Metric errors", meta.metric_errors.len().to_string()));
    if !meta.always_zero_metrics.is_empty() {
        rows.push(("Always zero", meta.always_zero_metrics.join(", ")));
    }
    if let Some(ts) = &meta.generated_at {
        rows.push(("Generated", ts.clone()));
    }
    let mut out = String::from("<section id=\"metadata\">\n<dl>\n");
    for (key, value) in rows {
        out.push_str(&format!(
            "<dt>{}</dt><dd>{}</dd>\n",
            escape_html(key),
            escape_html(&value)
        ));
    }
    out.push_str("</dl>\n</section>\n");
    out
}

pub fn to_html(table: &EvolutionTable, asset: &ChartAsset) -> Vec<u8> {
    // '<' only occurs inside JSON strings, where < is equivalent.
    let payload = payload_json(table).replace('<', "\\u003c");
    let script = asset.script.replace("</script", "<\\/script");
    let repo = escape_html(&table.repo_name);

    let mut html = String::new();
    html.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n");
    html.push_str("<meta name=\"viewport\" content=\"width=device-width, initial-scale=1\">\n");
    html.push_str(&format!(
        "<title>{repo} – code evolution</title>\n<style>{STYLE}</style>\n</head>\n<body>\n"
    ));
    html.push_str(&format!("<header><h1>{repo}</h1></header>\n"));
    html.push_str(&metadata_block(table));
    html.push_str("<main id=\"charts\">\n");
    for (i, metric) in table.metrics.iter().enumerate() {
        html.push_str(&format!(
            "<div class=\"chart\" id=\"chart-{i}\" data-metric-index=\"{i}\"><h2>{}</h2></div>\n",
            escape_html(&metric.name)
        ));
    }
    html.push_str("</main>\n");
    html.push_str(PAYLOAD_OPEN);
    html.push_str(&payload);
    html.push_str("</script>\n");
    html.push_str(&format!(
        "<script data-asset=\"{}\" data-asset-version=\"{}\">\n{}\n</script>\n",
        escape_html(&asset.name),
        escape_html(&asset.version),
        script
    ));
    html.push_str("</body>\n</html>\n");
    html.into_bytes()
}

/// Which files [`write_reports`] produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReportFormats {
    pub csv: bool,
    pub html: bool,
}

impl Default for ReportFormats {
    fn default() -> Self {
        ReportFormats {
            csv: true,
            html: true,
        }
    }
}

/// File stem for a report: path separators and control characters replaced.
pub fn report_stem(repo_name: &str) -> String {
    let stem: String = repo_name
        .chars()
        .map(|c| {
            if matches!(c, '/' | '\\' | ':') || c.is_control() {
                '_'
            } else {
                c
            }
        })
        .collect();
    if stem.is_empty() || stem == "." || stem == ".." || stem == "index" {
        format!("repo-{stem}")
    } else {
        stem
    }
}

fn index_html(tables: &[EvolutionTable], formats: ReportFormats) -> String {
    let mut html = String::from("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>Code evolution reports</title>\n");
    html.push_str(&format!(
        "<style>{STYLE}</style>\n</head>\n<body>\n<h1>Code evolution reports</h1>\n<ul>\n"
    ));
    for table in tables {
        let stem = escape_html(&report_stem(&table.repo_name));
        let name = escape_html(&table.repo_name);
        let mut links = Vec::new();
        if formats.html {
            links.push(format!("<a href=\"{stem}.html\">{name}</a>"));
        }
        if formats.csv {
            links.push(format!(
                "<a href=\"{stem}.csv\">{}</a>",
                if formats.html {
                    "csv".to_string()
                } else {
                    name.clone()
                }
            ));
        }
        html.push_str(&format!("<li>{}</li>\n", links.join(" · ")));
    }
    html.push_str("</ul>\n</body>\n</html>\n");
    html
}

fn write(path: PathBuf, bytes: &[u8]) -> Result<PathBuf, ReportError> {
    fs::write(&path, bytes).map_err(|source| ReportError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Writes `<name>.csv` / `<name>.html` per table, plus `index.html` when more
/// than one table is given. Returns the written paths in order.
pub fn write_reports(
    tables: &[EvolutionTable],
    output_dir: &Path,
    formats: ReportFormats,
    asset: &ChartAsset,
) -> Result<Vec<PathBuf>, ReportError> {
    let mut stems = HashSet::new();
    for table in tables {
        if !stems.insert(report_stem(&table.repo_name)) {
            return Err(ReportError::NameCollision(table.repo_name.clone()));
        }
    }
    fs::create_dir_all(output_dir).map_err(|source| ReportError::Io {
        path: output_dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    for table in tables {
        let stem = report_stem(&table.repo_name);
        if formats.html {
            written.push(write(
                output_dir.join(format!("{stem}.html")),
                &to_html(table, asset),
            )?);
        }
        if formats.csv {
            written.push(write(
                output_dir.join(format!("{stem}.csv")),
                &to_csv(table),
            )?);
        }
    }
    if tables.len() > 1 {
        written.push(write(
            output_dir.join("index.html"),
            index_html(tables, formats).as_bytes(),
        )?);
    }
    Ok(written)
}
