//! Censored competing-risks datasets, the plain-text dataset format, the two
//! bundled case-study datasets, and plot-series output (long CSV and SVG).
//!
//! Dataset file format, version 1:
//!
//! ```text
//! # name: AFST
//! # time_unit: 1000 cycles
//! # cause_labels: c1=failure mode 9; c2=other modes
//! # any further comment lines are kept as notes
//! time,status
//! 0.011,c2
//! ```
//!
//! The `name`, `time_unit` and `cause_labels` header keys are required before
//! the first row; an optional `format` key must read `bfm-dataset/1`. Rows
//! hold a positive time and a status code (`c1`, `c2`, `cu` for a failure of
//! unknown cause, `cen` for right-censored), separated by a comma or a tab.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{BfmError, Result};

pub const FORMAT_TAG: &str = "bfm-dataset/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    FailureCause1,
    FailureCause2,
    FailureCauseUnknown,
    Censored,
}

impl Status {
    pub fn code(&self) -> &'static str {
        match self {
            Status::FailureCause1 => "c1",
            Status::FailureCause2 => "c2",
            Status::FailureCauseUnknown => "cu",
            Status::Censored => "cen",
        }
    }

    pub fn from_code(s: &str) -> Option<Self> {
        match s {
            "c1" => Some(Status::FailureCause1),
            "c2" => Some(Status::FailureCause2),
            "cu" => Some(Status::FailureCauseUnknown),
            "cen" => Some(Status::Censored),
            _ => None,
        }
    }

    pub fn is_failure(&self) -> bool {
        !matches!(self, Status::Censored)
    }
}

/// One lifetime with its failure/censoring status.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CensoredObservation {
    pub time: f64,
    pub status: Status,
}

impl CensoredObservation {
    pub fn new(time: f64, status: Status) -> Result<Self> {
        if !(time > 0.0) || !time.is_finite() {
            return Err(BfmError::Validation(format!(
                "observation time must be finite and > 0, got {time}"
            )));
        }
        Ok(Self { time, status })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StatusCounts {
    pub cause1: usize,
    pub cause2: usize,
    pub unknown: usize,
    pub censored: usize,
}

impl StatusCounts {
    pub fn failures(&self) -> usize {
        self.cause1 + self.cause2 + self.unknown
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub time_unit: String,
    pub cause_labels: String,
    pub notes: Vec<String>,
    pub observations: Vec<CensoredObservation>,
}

impl Dataset {
    /// Builds a dataset with empty header text; at least one observation required.
    pub fn from_observations(name: &str, observations: Vec<CensoredObservation>) -> Result<Self> {
        if observations.is_empty() {
            return Err(BfmError::Validation("a dataset needs at least one observation".into()));
        }
        Ok(Self {
            name: name.to_string(),
            time_unit: String::new(),
            cause_labels: String::new(),
            notes: Vec::new(),
            observations,
        })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn counts(&self) -> StatusCounts {
        let mut c = StatusCounts::default();
        for o in &self.observations {
            match o.status {
                Status::FailureCause1 => c.cause1 += 1,
                Status::FailureCause2 => c.cause2 += 1,
                Status::FailureCauseUnknown => c.unknown += 1,
                Status::Censored => c.censored += 1,
            }
        }
        c
    }

    pub fn failure_times(&self) -> Vec<f64> {
        self.observations
            .iter()
            .filter(|o| o.status.is_failure())
            .map(|o| o.time)
            .collect()
    }

    pub fn times_with_status(&self, status: Status) -> Vec<f64> {
        self.observations
            .iter()
            .filter(|o| o.status == status)
            .map(|o| o.time)
            .collect()
    }

    pub fn max_time(&self) -> f64 {
        self.observations.iter().map(|o| o.time).fold(0.0, f64::max)
    }

    /// Median observed time, used to scale optimizer starting points.
    pub fn time_scale(&self) -> f64 {
        let mut t: Vec<f64> = self.observations.iter().map(|o| o.time).collect();
        t.sort_by(f64::total_cmp);
        t[t.len() / 2]
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# name: {}", self.name);
        let _ = writeln!(s, "# time_unit: {}", self.time_unit);
        let _ = writeln!(s, "# cause_labels: {}", self.cause_labels);
        let _ = writeln!(s, "# format: {FORMAT_TAG}");
        for n in &self.notes {
            let _ = writeln!(s, "# {n}");
        }
        s.push_str("time,status\n");
        for o in &self.observations {
            let _ = writeln!(s, "{},{}", o.time, o.status.code());
        }
        s
    }
}

fn perr(line: usize, column: usize, reason: impl Into<String>) -> BfmError {
    BfmError::Parse {
        line,
        column,
        reason: reason.into(),
    }
}

/// Parses dataset text. Errors carry 1-based line and column numbers.
pub fn parse_dataset_str(text: &str) -> Result<Dataset> {
    let mut name = None;
    let mut time_unit = None;
    let mut cause_labels = None;
    let mut notes = Vec::new();
    let mut observations = Vec::new();
    let mut seen_column_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            let comment = comment.trim();
            let keyed = comment.split_once(':').map(|(k, v)| (k.trim(), v.trim()));
            match keyed {
                Some(("name", v)) if observations.is_empty() => name = Some(v.to_string()),
                Some(("time_unit", v)) if observations.is_empty() => time_unit = Some(v.to_string()),
                Some(("cause_labels", v)) if observations.is_empty() => cause_labels = Some(v.to_string()),
                Some(("format", v)) if observations.is_empty() => {
                    if v != FORMAT_TAG {
                        let col = raw.find(v).map_or(1, |c| c + 1);
                        return Err(perr(
                            line_no,
                            col,
                            format!("unsupported format `{v}`, expected `{FORMAT_TAG}`"),
                        ));
                    }
                }
                Some((k @ ("name" | "time_unit" | "cause_labels" | "format"), _)) => {
                    let col = raw.find(k).map_or(1, |c| c + 1);
                    return Err(perr(line_no, col, format!("header key `{k}` after the first data row")));
                }
                _ => notes.push(comment.to_string()),
            }
            continue;
        }
        if name.is_none() || time_unit.is_none() || cause_labels.is_none() {
            let missing = [
                ("name", name.is_none()),
                ("time_unit", time_unit.is_none()),
                ("cause_labels", cause_labels.is_none()),
            ]
            .iter()
            .filter(|m| m.1)
            .map(|m| m.0)
            .collect::<Vec<_>>()
            .join(", ");
            return Err(perr(
                line_no,
                1,
                format!("header key(s) missing before first row: {missing}"),
            ));
        }
        let delim = if line.contains('\t') && !line.contains(',') {
            '\t'
        } else {
            ','
        };
        let fields: Vec<(usize, &str)> = {
            let mut out = Vec::new();
            let mut start = 0;
            for part in line.split(delim) {
                let lead = part.len() - part.trim_start().len();
                out.push((start + lead + 1, part.trim()));
                start += part.len() + 1;
            }
            out
        };
        if !seen_column_header && observations.is_empty() && fields.first().is_some_and(|f| f.1 == "time") {
            if fields.len() != 2 || fields[1].1 != "status" {
                return Err(perr(line_no, 1, "column header must be `time,status`"));
            }
            seen_column_header = true;
            continue;
        }
        if fields.len() != 2 {
            let col = fields.get(2).map_or(line.len() + 1, |f| f.0);
            return Err(perr(
                line_no,
                col,
                format!("expected 2 fields (time, status), found {}", fields.len()),
            ));
        }
        let (tcol, tstr) = fields[0];
        let time: f64 = tstr
            .parse()
            .map_err(|_| perr(line_no, tcol, format!("`{tstr}` is not a number")))?;
        if !time.is_finite() || time <= 0.0 {
            return Err(BfmError::Validation(format!(
                "line {line_no}, column {tcol}: time must be finite and > 0, got {tstr}"
            )));
        }
        let (scol, sstr) = fields[1];
        let status = Status::from_code(sstr).ok_or_else(|| {
            perr(
                line_no,
                scol,
                format!("unknown status `{sstr}` (expected c1, c2, cu or cen)"),
            )
        })?;
        observations.push(CensoredObservation { time, status });
    }
    if observations.is_empty() {
        return Err(perr(text.lines().count().max(1), 1, "no data rows"));
    }
    Ok(Dataset {
        name: name.unwrap_or_default(),
        time_unit: time_unit.unwrap_or_default(),
        cause_labels: cause_labels.unwrap_or_default(),
        notes,
        observations,
    })
}

pub fn parse_dataset(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|source| BfmError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_dataset_str(&text)
}

const AFST_TEXT: &str = include_str!("../data/afst.csv");
const EFST_TEXT: &str = include_str!("../data/efst.csv");

/// The bundled case-study datasets by name (`afst`, `efst`, case-insensitive).
pub fn bundled(name: &str) -> Result<Dataset> {
    match name.to_ascii_lowercase().as_str() {
        "afst" => parse_dataset_str(AFST_TEXT),
        "efst" => parse_dataset_str(EFST_TEXT),
        other => Err(BfmError::Config(format!(
            "no bundled dataset named `{other}` (have: afst, efst)"
        ))),
    }
}

/// Status counts each bundled dataset must reproduce.
pub fn expected_counts(name: &str) -> Option<StatusCounts> {
    match name.to_ascii_lowercase().as_str() {
        "afst" => Some(StatusCounts {
            cause1: 17,
            cause2: 16,
            unknown: 0,
            censored: 0,
        }),
        "efst" => Some(StatusCounts {
            cause1: 18,
            cause2: 27,
            unknown: 0,
            censored: 13,
        }),
        _ => None,
    }
}

/// Reference BFM estimates and the negative log-likelihood they must give on
/// the genuine data.
pub fn reference_fit(name: &str) -> Option<([f64; 4], f64)> {
    match name.to_ascii_lowercase().as_str() {
        "afst" => Some(([0.0054, 4.9472, 0.4701, 0.0419], 53.693)),
        "efst" => Some(([0.0127, 0.6124, 3.5770, 0.0026], 274.79)),
        _ => None,
    }
}

/// Result of the authenticity gate applied to a bundled dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Authenticity {
    pub counts_match: bool,
    pub reference_nll: Option<f64>,
    pub observed_nll: Option<f64>,
    pub verified: bool,
}

/// Checks status counts and the BFM negative log-likelihood at the reference
/// estimates (±0.05). A dataset failing either check is unverified.
pub fn authenticity(data: &Dataset) -> Authenticity {
    let counts_match = expected_counts(&data.name) == Some(data.counts());
    let (reference_nll, observed_nll) = match reference_fit(&data.name) {
        Some((p, nll)) => {
            let p = crate::distribution::BfmParams::from_slice(&p).expect("valid reference");
            (Some(nll), Some(crate::mle::bfm_nll(&p, data)))
        }
        None => (None, None),
    };
    let nll_ok = matches!((reference_nll, observed_nll), (Some(r), Some(o)) if (r - o).abs() <= 0.05);
    Authenticity {
        counts_match,
        reference_nll,
        observed_nll,
        verified: counts_match && nll_ok,
    }
}

/// Fractions of cause-1 and cause-2 failures among cause-labelled failures.
pub fn empirical_risks(data: &Dataset) -> Result<(f64, f64)> {
    let c = data.counts();
    let labelled = c.cause1 + c.cause2;
    if labelled == 0 {
        return Err(BfmError::Validation("no cause-labelled failures".into()));
    }
    Ok((c.cause1 as f64 / labelled as f64, c.cause2 as f64 / labelled as f64))
}

/// Kaplan–Meier reliability: `(t, Ŝ(t))` at each distinct failure time.
pub fn kaplan_meier(data: &Dataset) -> Vec<(f64, f64)> {
    let mut obs: Vec<(f64, bool)> = data
        .observations
        .iter()
        .map(|o| (o.time, o.status.is_failure()))
        .collect();
    obs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut at_risk = obs.len();
    let mut s = 1.0;
    let mut out = Vec::new();
    let mut i = 0;
    while i < obs.len() {
        let t = obs[i].0;
        let mut j = i;
        let mut deaths = 0;
        while j < obs.len() && obs[j].0 == t {
            deaths += obs[j].1 as usize;
            j += 1;
        }
        if deaths > 0 {
            s *= 1.0 - deaths as f64 / at_risk as f64;
            out.push((t, s));
        }
        at_risk -= j - i;
        i = j;
    }
    out
}

/// Restricted empirical mean residual life at `x` from a Kaplan–Meier curve:
/// `∫_x^{t_max} Ŝ(u) du / Ŝ(x)`, with `t_max` the last step. `None` where `Ŝ(x) = 0`.
pub fn empirical_mrl(km: &[(f64, f64)], x: f64) -> Option<f64> {
    let sf_at = |u: f64| km.iter().take_while(|(t, _)| *t <= u).last().map_or(1.0, |p| p.1);
    let sx = sf_at(x);
    let t_max = km.last()?.0;
    if !(sx > 0.0) || x >= t_max {
        return None;
    }
    let mut area = 0.0;
    let mut left = x;
    let mut level = sx;
    for &(t, s) in km.iter().filter(|(t, _)| *t > x) {
        area += level * (t - left);
        left = t;
        level = s;
    }
    Some(area / sx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    Frf,
    Mrl,
    Rf,
    Ttt,
    Ecdf,
}

impl SeriesKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SeriesKind::Frf => "frf",
            SeriesKind::Mrl => "mrl",
            SeriesKind::Rf => "rf",
            SeriesKind::Ttt => "ttt",
            SeriesKind::Ecdf => "ecdf",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "frf" => Some(SeriesKind::Frf),
            "mrl" => Some(SeriesKind::Mrl),
            "rf" => Some(SeriesKind::Rf),
            "ttt" => Some(SeriesKind::Ttt),
            "ecdf" => Some(SeriesKind::Ecdf),
            _ => None,
        }
    }
}

/// A named curve for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub name: String,
    pub kind: SeriesKind,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl PlotSeries {
    pub fn new(name: impl Into<String>, kind: SeriesKind, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let s = Self {
            name: name.into(),
            kind,
            x,
            y,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains([',', '\n', '\r', '"']) {
            return Err(BfmError::Validation(format!(
                "series name `{}` is empty or has , \" or newline",
                self.name
            )));
        }
        if self.x.len() != self.y.len() {
            return Err(BfmError::Validation(format!(
                "series `{}` has {} x and {} y values",
                self.name,
                self.x.len(),
                self.y.len()
            )));
        }
        if self.x.windows(2).any(|w| !(w[1] > w[0])) || self.x.iter().any(|v| !v.is_finite()) {
            return Err(BfmError::Validation(format!(
                "series `{}` x values must be finite and strictly increasing",
                self.name
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotFormat {
    Csv,
    Svg,
}

/// Long-format CSV: header `name,kind,x,y`, one row per point.
pub fn series_to_csv(series: &[PlotSeries]) -> Result<String> {
    let mut s = String::from("name,kind,x,y\n");
    for p in series {
        p.validate()?;
        for (x, y) in p.x.iter().zip(&p.y) {
            let _ = writeln!(s, "{},{},{},{}", p.name, p.kind.as_str(), x, y);
        }
    }
    Ok(s)
}

/// Parses long-format series CSV; rows of one series must be contiguous.
pub fn parse_series_csv(text: &str) -> Result<Vec<PlotSeries>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end_matches('\r') == "name,kind,x,y" => {}
        _ => return Err(perr(1, 1, "expected header `name,kind,x,y`")),
    }
    let mut out: Vec<PlotSeries> = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(perr(line_no, 1, format!("expected 4 fields, found {}", fields.len())));
        }
        let col = |k: usize| fields[..k].iter().map(|f| f.len() + 1).sum::<usize>() + 1;
        let kind = SeriesKind::parse(fields[1])
            .ok_or_else(|| perr(line_no, col(1), format!("unknown kind `{}`", fields[1])))?;
        let x: f64 = fields[2]
            .parse()
            .map_err(|_| perr(line_no, col(2), format!("`{}` is not a number", fields[2])))?;
        let y: f64 = fields[3]
            .parse()
            .map_err(|_| perr(line_no, col(3), format!("`{}` is not a number", fields[3])))?;
        if fields[0].is_empty() || fields[0].contains('"') {
            return Err(perr(line_no, 1, "invalid series name"));
        }
        match out.last_mut() {
            Some(last) if last.name == fields[0] && last.kind == kind => {
                last.x.push(x);
                last.y.push(y);
            }
            _ => {
                if out.iter().any(|s| s.name == fields[0] && s.kind == kind) {
                    return Err(perr(
                        line_no,
                        1,
                        format!("rows of series `{}` are not contiguous", fields[0]),
                    ));
                }
                out.push(PlotSeries {
                    name: fields[0].to_string(),
                    kind,
                    x: vec![x],
                    y: vec![y],
                });
            }
        }
    }
    for s in &out {
        s.validate()?;
    }
    Ok(out)
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Minimal multi-line SVG chart with a legend.
pub fn series_to_svg(series: &[PlotSeries]) -> Result<String> {
    for s in series {
        s.validate()?;
    }
    let (w, h, m) = (720.0, 440.0, 60.0);
    let pts = series
        .iter()
        .flat_map(|s| s.x.iter().zip(&s.y))
        .filter(|(_, y)| y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in pts {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let py = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{m} {t} L{m} {b} L{r} {b}" fill="none" stroke="black"/>"#,
        t = m,
        b = h - m,
        r = w - m
    );
    let _ = writeln!(s, r#"<text x="{m}" y="{}" font-size="11">{x0:.4}</text>"#, h - m + 16.0);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{x1:.4}</text>"#,
        w - m,
        h - m + 16.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{y0:.4}</text>"#,
        m - 4.0,
        h - m
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{y1:.4}</text>"#,
        m - 4.0,
        m + 4.0
    );
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut d = String::new();
        let mut pen_up = true;
        for (x, y) in ser.x.iter().zip(&ser.y) {
            if !y.is_finite() {
                pen_up = true;
                continue;
            }
            let _ = write!(d, "{}{:.2} {:.2} ", if pen_up { "M" } else { "L" }, px(*x), py(*y));
            pen_up = false;
        }
        let _ = writeln!(
            s,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            d.trim_end()
        );
        let ly = m + 14.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly:.1}" font-size="11" fill="{color}">{} ({})</text>"#,
            w - m - 150.0,
            xml_escape(&ser.name),
            ser.kind.as_str()
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes series to `path` as CSV or SVG (atomically).
pub fn emit_series(series: &[PlotSeries], path: &Path, format: PlotFormat) -> Result<()> {
    let body = match format {
        PlotFormat::Csv => series_to_csv(series)?,
        PlotFormat::Svg => series_to_svg(series)?,
    };
    write_atomic(path, body.as_bytes())
}

/// Writes `bytes` to a temporary sibling file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| BfmError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file_name = path
        .file_name()
        .ok_or_else(|| BfmError::Config(format!("`{}` has no file name", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = std::fs::File::create(&tmp).map_err(io)?;
        f.write_all(bytes).map_err(io)?;
        f.sync_all().map_err(io)?;
    }
    std::fs::rename(&tmp, path).map_err(io)
}
