//! CSV documents with `# ` header comments, and output sinks.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use eseem_core::{EchoTrace, Projection};

use crate::error::CliError;

/// Prefix of the only header line that varies between identical runs.
pub const TIMESTAMP_PREFIX: &str = "# generated: ";

/// 17 significant digits, enough to round-trip any `f64`.
pub fn number(x: f64) -> String {
    format!("{x:.16e}")
}

/// Short human form for header values: up to 12 decimals, trailing zeros removed.
pub fn compact(x: f64) -> String {
    let s = format!("{x:.12}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

pub struct CsvDocument {
    pub command: String,
    pub header: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvDocument {
    pub fn new(command: &str, columns: &[&str]) -> Self {
        Self {
            command: command.into(),
            header: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn comment(&mut self, line: impl Into<String>) {
        self.header.push(line.into());
    }

    pub fn config_echo(&mut self, toml: &str) {
        for line in toml.lines().filter(|l| !l.trim().is_empty()) {
            self.comment(format!("config: {line}"));
        }
    }

    pub fn metadata(&mut self, meta: &BTreeMap<String, String>) {
        for (k, v) in meta {
            self.comment(format!("meta: {k}={v}"));
        }
    }

    pub fn render(&self) -> String {
        let stamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let mut out = format!(
            "# eseem {} {}\n{TIMESTAMP_PREFIX}unix_time={stamp}\n",
            self.command,
            env!("CARGO_PKG_VERSION")
        );
        for h in &self.header {
            out.push_str("# ");
            out.push_str(h);
            out.push('\n');
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|x| number(*x)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn trace_document(command: &str, trace: &EchoTrace, im_residual: bool) -> CsvDocument {
    let mut doc = if im_residual {
        CsvDocument::new(command, &["tau_s", "v", "v_im_residual"])
    } else {
        CsvDocument::new(command, &["tau_s", "v"])
    };
    for k in 0..trace.len() {
        let mut row = vec![trace.tau_s[k], trace.v[k]];
        if im_residual {
            row.push(trace.v_im_residual.get(k).copied().unwrap_or(0.0));
        }
        doc.rows.push(row);
    }
    doc
}

/// Parsed CSV: named columns and the `meta:` header entries.
pub struct CsvTable {
    pub columns: BTreeMap<String, Vec<f64>>,
    pub metadata: BTreeMap<String, String>,
}

pub fn parse_csv(text: &str, path: &Path) -> Result<CsvTable, CliError> {
    let mut metadata = BTreeMap::new();
    let mut names: Option<Vec<String>> = None;
    let mut data: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            if let Some((k, v)) = c.trim().strip_prefix("meta: ").and_then(|m| m.split_once('=')) {
                metadata.insert(k.to_string(), v.to_string());
            }
            continue;
        }
        match &names {
            None => {
                let n: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
                data = vec![Vec::new(); n.len()];
                names = Some(n);
            }
            Some(n) => {
                let cells: Vec<&str> = line.split(',').collect();
                if cells.len() != n.len() {
                    return Err(CliError::input(
                        path,
                        format!(
                            "line {}: expected {} columns, found {}",
                            lineno + 1,
                            n.len(),
                            cells.len()
                        ),
                    ));
                }
                for (col, cell) in data.iter_mut().zip(cells) {
                    let x: f64 = cell
                        .trim()
                        .parse()
                        .map_err(|_| CliError::input(path, format!("line {}: bad number `{cell}`", lineno + 1)))?;
                    col.push(x);
                }
            }
        }
    }
    let names = names.ok_or_else(|| CliError::input(path, "no column header"))?;
    Ok(CsvTable {
        columns: names.into_iter().zip(data).collect(),
        metadata,
    })
}

pub fn read_trace(path: &Path) -> Result<EchoTrace, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut table = parse_csv(&text, path)?;
    let mut take = |name: &str| {
        table
            .columns
            .remove(name)
            .ok_or_else(|| CliError::input(path, format!("missing column `{name}`")))
    };
    let tau = take("tau_s")?;
    let v = take("v")?;
    let mut trace = EchoTrace::new(tau, v);
    if let Some(im) = table.columns.remove("v_im_residual") {
        trace.v_im_residual = im;
    }
    trace.metadata = table.metadata;
    Ok(trace)
}

/// Writes to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}

/// `dir/name.csv` becomes `dir/name_mi-1.csv`.
pub fn with_projection_suffix(path: &Path, m: Projection) -> PathBuf {
    let label = m.to_string().replace('/', "_");
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_mi{label}.{}", ext.to_string_lossy()),
        None => format!("{stem}_mi{label}"),
    };
    path.with_file_name(name)
}
