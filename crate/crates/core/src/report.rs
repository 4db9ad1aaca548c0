//! Tabular output: score tables and report tables rendered as Markdown
//! (3 decimals), TSV or CSV (full precision), byte-stable for equal input.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::str::FromStr;

use crate::corpus::InstanceKey;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Md,
    Tsv,
    Csv,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Md => "md",
            ReportFormat::Tsv => "tsv",
            ReportFormat::Csv => "csv",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "md" | "markdown" => Ok(ReportFormat::Md),
            "tsv" => Ok(ReportFormat::Tsv),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::Config(format!("unknown report format `{other}` (md, tsv, csv)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(i64),
    Num(f64),
    Null,
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Null, Cell::Num)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

/// Three decimals, with negative zero printed as zero.
pub fn format_md_number(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".to_string()
    } else {
        s
    }
}

/// Shortest representation that parses back to the same value.
pub fn format_full_number(v: f64) -> String {
    format!("{v}")
}

impl Cell {
    fn render(&self, format: ReportFormat) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Num(v) => match format {
                ReportFormat::Md => format_md_number(*v),
                _ => format_full_number(*v),
            },
            Cell::Null => match format {
                ReportFormat::Md => "n/a".to_string(),
                _ => String::new(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    /// Markdown heading; not written to delimited formats.
    pub title: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(title: impl Into<String>, headers: &[&str]) -> Self {
        Table {
            title: title.into(),
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Md => self.render_md(),
            ReportFormat::Csv => self.render_delimited(b','),
            ReportFormat::Tsv => self.render_delimited(b'\t'),
        }
    }

    fn render_md(&self) -> String {
        let esc = |s: &str| s.replace('|', "\\|").replace(['\n', '\r'], " ");
        let mut out = String::new();
        if !self.title.is_empty() {
            let _ = writeln!(out, "### {}\n", self.title);
        }
        let _ = writeln!(out, "| {} |", self.headers.iter().map(|h| esc(h)).collect::<Vec<_>>().join(" | "));
        let _ = writeln!(out, "|{}", "---|".repeat(self.headers.len()));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| esc(&c.render(ReportFormat::Md))).collect();
            let _ = writeln!(out, "| {} |", cells.join(" | "));
        }
        out
    }

    fn render_delimited(&self, delimiter: u8) -> String {
        let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(Vec::new());
        let format = if delimiter == b',' { ReportFormat::Csv } else { ReportFormat::Tsv };
        w.write_record(&self.headers).expect("in-memory write");
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| {
                    let s = c.render(format);
                    if delimiter == b'\t' {
                        s.replace(['\t', '\n', '\r'], " ")
                    } else {
                        s
                    }
                })
                .collect();
            w.write_record(&cells).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
    }
}

/// Per-instance metric values; `None` values are explained in `flags`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub key: InstanceKey,
    pub values: Vec<Option<f64>>,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreTable {
    pub metrics: Vec<String>,
    pub rows: Vec<ScoreRow>,
}

const KEY_COLUMNS: [&str; 3] = ["task_id", "model_id", "sample_index"];
const FLAG_COLUMN: &str = "flags";
const FLAG_SEPARATOR: &str = "; ";

impl ScoreTable {
    pub fn column(&self, metric: &str) -> Option<usize> {
        self.metrics.iter().position(|m| m == metric)
    }

    /// Rows in canonical key order.
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| a.key.cmp(&b.key));
    }

    pub fn to_table(&self) -> Table {
        let mut headers: Vec<&str> = KEY_COLUMNS.to_vec();
        headers.extend(self.metrics.iter().map(String::as_str));
        headers.push(FLAG_COLUMN);
        let mut t = Table::new("Scores", &headers);
        for r in &self.rows {
            let mut row: Vec<Cell> = vec![
                r.key.task_id.as_str().into(),
                r.key.model_id.as_str().into(),
                Cell::Int(r.key.sample_index),
            ];
            row.extend(r.values.iter().map(|v| Cell::from(*v)));
            row.push(Cell::Text(r.flags.join(FLAG_SEPARATOR)));
            t.push(row);
        }
        t
    }

    /// Read a table written by [`emit_report`] in CSV format.
    pub fn read_csv(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
            .clone();
        let cols: Vec<&str> = headers.iter().collect();
        if cols.len() < 4 || cols[..3] != KEY_COLUMNS || cols[cols.len() - 1] != FLAG_COLUMN {
            return Err(Error::Parse {
                line: 1,
                message: "expected columns task_id,model_id,sample_index,<metrics...>,flags".into(),
            });
        }
        let metrics: Vec<String> = cols[3..cols.len() - 1].iter().map(|s| s.to_string()).collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::Parse { line, message: e.to_string() })?;
            let bad = |message: String| Error::Parse { line, message };
            let sample_index = rec[2]
                .parse()
                .map_err(|_| bad(format!("sample_index `{}` is not an integer", &rec[2])))?;
            let values = (0..metrics.len())
                .map(|m| {
                    let cell = &rec[3 + m];
                    if cell.is_empty() {
                        Ok(None)
                    } else {
                        cell.parse::<f64>()
                            .map(Some)
                            .map_err(|_| bad(format!("{}: `{cell}` is not a number", metrics[m])))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            let flags_cell = &rec[3 + metrics.len()];
            let flags = if flags_cell.is_empty() {
                Vec::new()
            } else {
                flags_cell.split(FLAG_SEPARATOR).map(str::to_string).collect()
            };
            rows.push(ScoreRow {
                key: InstanceKey {
                    task_id: rec[0].to_string(),
                    model_id: rec[1].to_string(),
                    sample_index,
                },
                values,
                flags,
            });
        }
        Ok(ScoreTable { metrics, rows })
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Flags are joined with `"; "` in one cell, so they must not contain `;`.
pub fn sanitize_flag(flag: &str) -> String {
    flag.replace(';', ",").replace(['\n', '\r', '\t'], " ")
}

pub fn emit_report(table: &ScoreTable, format: ReportFormat, mut out: impl Write) -> Result<()> {
    let mut sorted = table.clone();
    sorted.sort();
    out.write_all(sorted.to_table().render(format).as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ScoreTable {
        let key = |t: &str, m: &str| InstanceKey {
            task_id: t.into(),
            model_id: m.into(),
            sample_index: 0,
        };
        ScoreTable {
            metrics: vec!["em".into(), "bleu".into()],
            rows: vec![
                ScoreRow { key: key("t2", "a"), values: vec![Some(0.0), Some(0.6652)], flags: vec![] },
                ScoreRow {
                    key: key("t1", "a"),
                    values: vec![Some(1.0), None],
                    flags: vec!["bleu: degenerate input, x".into(), "note".into()],
                },
            ],
        }
    }

    fn render(t: &ScoreTable, f: ReportFormat) -> String {
        let mut buf = Vec::new();
        emit_report(t, f, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn markdown_rounds_to_three_decimals() {
        let md = render(&sample(), ReportFormat::Md);
        assert!(md.contains("| t2 | a | 0 | 0.000 | 0.665 |  |"), "{md}");
        assert!(md.contains("| t1 | a | 0 | 1.000 | n/a |"));
        assert!(md.find("t1").unwrap() < md.find("t2").unwrap());
        assert_eq!(format_md_number(-0.0001), "0.000");
    }

    #[test]
    fn csv_round_trips_full_precision() {
        let t = sample();
        let csv = render(&t, ReportFormat::Csv);
        assert!(csv.contains("0.6652"));
        let back = ScoreTable::read_csv(csv.as_bytes()).unwrap();
        let mut sorted = t.clone();
        sorted.sort();
        assert_eq!(back, sorted);
        let v = 0.1 + 0.2;
        assert_eq!(format_full_number(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn empty_table_is_header_only_and_stable() {
        let t = ScoreTable { metrics: vec!["em".into()], rows: vec![] };
        assert_eq!(render(&t, ReportFormat::Csv), "task_id,model_id,sample_index,em,flags\n");
        assert_eq!(render(&t, ReportFormat::Tsv), "task_id\tmodel_id\tsample_index\tem\tflags\n");
        assert_eq!(render(&sample(), ReportFormat::Md), render(&sample(), ReportFormat::Md));
    }

    #[test]
    fn unknown_format_is_usage_error() {
        assert!(matches!("xlsx".parse::<ReportFormat>(), Err(Error::Config(_))));
        assert_eq!("md".parse::<ReportFormat>().unwrap(), ReportFormat::Md);
    }

    #[test]
    fn malformed_csv_names_line() {
        let bad = "task_id,model_id,sample_index,em,flags\nt,m,zero,1,\n";
        assert!(matches!(ScoreTable::read_csv(bad.as_bytes()), Err(Error::Parse { line: 2, .. })));
        assert!(ScoreTable::read_csv("a,b\n".as_bytes()).is_err());
    }
}
