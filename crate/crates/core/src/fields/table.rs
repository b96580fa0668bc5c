//! Numeric CSV with `#` comment lines.
//!
//! Values are written in shortest round-trip exponent notation, so reading a
//! table back reproduces every value exactly.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub(crate) struct Table {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    /// Value of a `# key=value` comment.
    pub fn meta(&self, key: &str) -> Option<String> {
        self.comments.iter().find_map(|c| {
            c.split_once('=')
                .filter(|(k, _)| k.trim() == key)
                .map(|(_, v)| v.trim().to_string())
        })
    }
}

pub(crate) fn write_table<W: Write>(
    out: W,
    comments: &[String],
    header: &[String],
    rows: impl Iterator<Item = Vec<f64>>,
) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(out);
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "{}", header.join(","))?;
    let mut line = String::new();
    for row in rows {
        line.clear();
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            use std::fmt::Write as _;
            write!(line, "{v:e}").unwrap();
        }
        writeln!(out, "{line}")?;
    }
    out.flush()
}

pub(crate) fn read_table<R: BufRead>(input: R, name: &str) -> Result<Table> {
    let mut comments = Vec::new();
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io(name, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            comments.push(c.trim().to_string());
            continue;
        }
        match &header {
            None => header = Some(line.split(',').map(|s| s.trim().to_string()).collect()),
            Some(h) => {
                let row = line
                    .split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::parse(name, i + 1, format!("cannot parse `{s}`")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if row.len() != h.len() {
                    return Err(Error::parse(
                        name,
                        i + 1,
                        format!("{} values for {} columns", row.len(), h.len()),
                    ));
                }
                rows.push(row);
            }
        }
    }
    let header = header.ok_or_else(|| Error::parse(name, 0, "missing header row"))?;
    Ok(Table {
        comments,
        header,
        rows,
    })
}
