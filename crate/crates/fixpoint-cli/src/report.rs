//! Report emission from a completed bundle: CSV trace tables, a JSON
//! mirror of the manifest, and a log-scale SVG error plot.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::bundle::{load_analysis, load_manifest, load_traces, AnalysisDocument, TraceRecord};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Svg,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(ReportFormat::Csv),
            "json" => Some(ReportFormat::Json),
            "svg" => Some(ReportFormat::Svg),
            _ => None,
        }
    }
}

/// Writes the requested format into the bundle directory and returns the
/// paths created. Derived deterministically from the bundle contents.
pub fn emit_report(bundle: &Path, format: ReportFormat) -> Result<Vec<PathBuf>, CliError> {
    match format {
        ReportFormat::Csv => emit_csv(bundle),
        ReportFormat::Json => emit_json(bundle),
        ReportFormat::Svg => emit_svg(bundle),
    }
}

fn write_file(path: &PathBuf, payload: &str) -> Result<(), CliError> {
    std::fs::write(path, payload)
        .map_err(|e| CliError::Other(format!("cannot write {}: {e}", path.display())))
}

/// `{}` formatting gives the shortest decimal that parses back to the
/// same double, so every numeric field round-trips exactly.
fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn emit_csv(bundle: &Path) -> Result<Vec<PathBuf>, CliError> {
    let traces = load_traces(bundle)?;
    let analysis = load_analysis(bundle)?;
    let mut written = Vec::new();
    for trace in &traces.traces {
        let path = bundle.join(format!("trace-{}.csv", trace.scheme));
        write_file(&path, &trace_csv(trace, &analysis))?;
        written.push(path);
    }
    Ok(written)
}

fn trace_csv(trace: &TraceRecord, analysis: &AnalysisDocument) -> String {
    let dim = trace.iterates.first().map_or(0, Vec::len);
    let mut header: Vec<String> = vec!["n".into()];
    header.extend((0..dim).map(|i| format!("x{i}")));
    if trace.errors.is_some() {
        header.push("error".into());
    }
    header.push("residual".into());
    let bounds = analysis.bounds.as_ref();
    if bounds.is_some() {
        header.extend(["exp_bound", "a_n", "b_n", "theta_n"].map(String::from));
    }
    let mut out = header.join(",");
    out.push('\n');

    for (n, x) in trace.iterates.iter().enumerate() {
        let mut row: Vec<String> = vec![n.to_string()];
        row.extend(x.iter().map(|&v| fmt_f64(v)));
        if let Some(errors) = &trace.errors {
            row.push(fmt_f64(errors[n]));
        }
        row.push(fmt_f64(trace.residuals[n]));
        if let Some(b) = bounds {
            // bound index k describes step k+1; row n is bounded by entry n-1
            if n == 0 {
                row.extend(std::iter::repeat_n("".to_string(), 4));
            } else {
                row.push(b.exp_bound.get(n - 1).map_or_else(String::new, |&v| fmt_f64(v)));
                row.push(b.a_n.get(n - 1).map_or_else(String::new, |&v| fmt_f64(v)));
                row.push(b.b_n.get(n - 1).map_or_else(String::new, |&v| fmt_f64(v)));
                row.push(b.theta_n.get(n - 1).map_or_else(String::new, |&v| fmt_f64(v)));
            }
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn emit_json(bundle: &Path) -> Result<Vec<PathBuf>, CliError> {
    let manifest = load_manifest(bundle)?;
    let path = bundle.join("report.json");
    let mut payload = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::Other(format!("serialization: {e}")))?;
    payload.push('\n');
    write_file(&path, &payload)?;
    Ok(vec![path])
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 50.0;
const FLOOR: f64 = 1e-16;

fn emit_svg(bundle: &Path) -> Result<Vec<PathBuf>, CliError> {
    let traces = load_traces(bundle)?;
    let path = bundle.join("plot.svg");
    write_file(&path, &render_svg(&traces.traces))?;
    Ok(vec![path])
}

/// Log-scale error curves, one polyline per scheme; falls back to the
/// residual when no fixed point was known. Fixed-precision coordinates
/// keep the byte output deterministic.
fn render_svg(traces: &[TraceRecord]) -> String {
    let series: Vec<(&str, &[f64])> = traces
        .iter()
        .map(|t| {
            let values = t.errors.as_deref().unwrap_or(&t.residuals);
            (t.scheme.as_str(), values)
        })
        .collect();

    let max_n = series.iter().map(|(_, v)| v.len()).max().unwrap_or(1).max(2) - 1;
    let mut log_min = f64::INFINITY;
    let mut log_max = f64::NEG_INFINITY;
    for (_, values) in &series {
        for &v in *values {
            let l = v.max(FLOOR).log10();
            log_min = log_min.min(l);
            log_max = log_max.max(l);
        }
    }
    if !log_min.is_finite() || !log_max.is_finite() {
        log_min = -1.0;
        log_max = 1.0;
    }
    let lo = log_min.floor();
    let hi = (log_max.ceil()).max(lo + 1.0);

    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let x_pos = |n: usize| MARGIN_L + plot_w * n as f64 / max_n as f64;
    let y_pos = |v: f64| {
        let l = v.max(FLOOR).log10();
        MARGIN_T + plot_h * (hi - l) / (hi - lo)
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(svg, "  <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");

    // axes
    let x0 = MARGIN_L;
    let x1 = WIDTH - MARGIN_R;
    let y0 = HEIGHT - MARGIN_B;
    let y1 = MARGIN_T;
    let _ = writeln!(
        svg,
        "  <line x1=\"{x0:.2}\" y1=\"{y0:.2}\" x2=\"{x1:.2}\" y2=\"{y0:.2}\" stroke=\"black\"/>"
    );
    let _ = writeln!(
        svg,
        "  <line x1=\"{x0:.2}\" y1=\"{y0:.2}\" x2=\"{x0:.2}\" y2=\"{y1:.2}\" stroke=\"black\"/>"
    );

    // y ticks at integer powers of ten
    let decades = (hi - lo) as i64;
    let step = (decades / 8).max(1);
    let mut d = lo as i64;
    while d <= hi as i64 {
        let y = y_pos(10f64.powi(d as i32));
        let _ = writeln!(
            svg,
            "  <line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{x0:.2}\" y2=\"{y:.2}\" stroke=\"black\"/>",
            x0 - 5.0
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"end\">1e{d}</text>",
            x0 - 8.0,
            y + 4.0
        );
        d += step;
    }
    // x ticks at quarters
    for q in 0..=4 {
        let n = max_n * q / 4;
        let x = x_pos(n);
        let _ = writeln!(
            svg,
            "  <line x1=\"{x:.2}\" y1=\"{y0:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
            y0 + 5.0
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{x:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{n}</text>",
            y0 + 20.0
        );
    }
    let _ = writeln!(
        svg,
        "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">n</text>",
        (x0 + x1) / 2.0,
        HEIGHT - 10.0
    );

    for (i, (tag, values)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = values
            .iter()
            .enumerate()
            .map(|(n, &v)| format!("{:.2},{:.2}", x_pos(n), y_pos(v)))
            .collect();
        let _ = writeln!(
            svg,
            "  <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            points.join(" ")
        );
        let ly = MARGIN_T + 16.0 * i as f64 + 10.0;
        let lx = WIDTH - MARGIN_R + 10.0;
        let _ = writeln!(
            svg,
            "  <line x1=\"{lx:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            lx + 20.0
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\">{tag}</text>",
            lx + 26.0,
            ly + 4.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}
