//! Text format for modal bridge models.
//!
//! ```text
//! # comment
//! [section]
//! width = 31.0
//! depth = 4.3
//! mass_per_length = 23000
//! torsional_inertia_per_length = 2.5e6
//!
//! [geometry]
//! main_span = 1624
//! side_spans = 535 535
//!
//! [grid]
//! x = 0 13.375 26.75 ...          # or: linspace = 0 2694 201
//!
//! [mode]                          # repeated, one block per mode
//! index = 1
//! kind = vertical                 # vertical | lateral | torsional
//! frequency_hz = 0.100
//! damping_ratio = 0.005
//! modal_mass = 1.8676e7
//! shape = 0 0 ... 1 ... 0          # one value per grid node
//! ```
//!
//! Keys are `name = value`, values are whitespace separated numbers (or a
//! word for `kind`). Every key is required except that `[grid]` takes either
//! `x` or `linspace`. Mode indices must be unique.

use std::collections::HashMap;
use std::fmt::Write;

use super::{DeckSection, ModalBridge, Mode, ModeKind};
use crate::error::{Error, Result};

#[derive(Default)]
struct Block {
    header_line: usize,
    entries: HashMap<String, (usize, String)>,
}

impl Block {
    fn take(&mut self, file: &str, section: &str, key: &str) -> Result<(usize, String)> {
        self.entries.remove(key).ok_or_else(|| {
            Error::parse(
                file,
                self.header_line,
                format!("[{section}] is missing required key `{key}`"),
            )
        })
    }

    fn number(&mut self, file: &str, section: &str, key: &str) -> Result<f64> {
        let (line, v) = self.take(file, section, key)?;
        parse_number(file, line, key, v.trim())
    }

    fn numbers(&mut self, file: &str, section: &str, key: &str) -> Result<Vec<f64>> {
        let (line, v) = self.take(file, section, key)?;
        v.split_whitespace()
            .map(|tok| parse_number(file, line, key, tok))
            .collect()
    }

    fn finish(self, file: &str, section: &str) -> Result<()> {
        if let Some((key, (line, _))) = self.entries.into_iter().min_by_key(|(_, (l, _))| *l) {
            return Err(Error::parse(file, line, format!("unknown key `{key}` in [{section}]")));
        }
        Ok(())
    }
}

fn parse_number(file: &str, line: usize, key: &str, tok: &str) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| Error::parse(file, line, format!("`{key}`: cannot parse `{tok}` as a number")))
}

/// Parses a bridge model; `file` is only used in diagnostics.
pub fn parse_bridge(text: &str, file: &str) -> Result<ModalBridge> {
    let mut section: Option<Block> = None;
    let mut geometry: Option<Block> = None;
    let mut grid: Option<Block> = None;
    let mut modes: Vec<Block> = Vec::new();
    let mut current: Option<(&str, Block)> = None;

    let close = |cur: Option<(&str, Block)>,
                     section: &mut Option<Block>,
                     geometry: &mut Option<Block>,
                     grid: &mut Option<Block>,
                     modes: &mut Vec<Block>|
     -> Result<()> {
        if let Some((name, block)) = cur {
            let slot = match name {
                "section" => section,
                "geometry" => geometry,
                "grid" => grid,
                _ => {
                    modes.push(block);
                    return Ok(());
                }
            };
            if slot.is_some() {
                return Err(Error::parse(file, block.header_line, format!("duplicate [{name}] block")));
            }
            *slot = Some(block);
        }
        Ok(())
    };

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = match name.trim() {
                n @ ("section" | "geometry" | "grid" | "mode") => n,
                other => {
                    return Err(Error::parse(file, line_no, format!("unknown block [{other}]")))
                }
            };
            close(current.take(), &mut section, &mut geometry, &mut grid, &mut modes)?;
            current = Some((
                name,
                Block {
                    header_line: line_no,
                    ..Default::default()
                },
            ));
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::parse(file, line_no, "expected `key = value`"));
        };
        let Some((_, block)) = current.as_mut() else {
            return Err(Error::parse(file, line_no, "key outside of any block"));
        };
        let key = key.trim().to_string();
        if block
            .entries
            .insert(key.clone(), (line_no, value.trim().to_string()))
            .is_some()
        {
            return Err(Error::parse(file, line_no, format!("duplicate key `{key}`")));
        }
    }
    close(current.take(), &mut section, &mut geometry, &mut grid, &mut modes)?;

    let mut s = section.ok_or_else(|| Error::parse(file, 0, "missing [section] block"))?;
    let deck = DeckSection {
        width: s.number(file, "section", "width")?,
        depth: s.number(file, "section", "depth")?,
        mass_per_length: s.number(file, "section", "mass_per_length")?,
        torsional_inertia_per_length: s.number(file, "section", "torsional_inertia_per_length")?,
    };
    s.finish(file, "section")?;

    let mut g = geometry.ok_or_else(|| Error::parse(file, 0, "missing [geometry] block"))?;
    let main_span = g.number(file, "geometry", "main_span")?;
    let side_line = g.entries.get("side_spans").map(|e| e.0).unwrap_or(g.header_line);
    let sides = g.numbers(file, "geometry", "side_spans")?;
    if sides.len() != 2 {
        return Err(Error::parse(file, side_line, "`side_spans` needs exactly two values"));
    }
    g.finish(file, "geometry")?;

    let mut gr = grid.ok_or_else(|| Error::parse(file, 0, "missing [grid] block"))?;
    let nodes = if gr.entries.contains_key("x") {
        gr.numbers(file, "grid", "x")?
    } else {
        let line = gr.entries.get("linspace").map(|e| e.0).unwrap_or(gr.header_line);
        let v = gr.numbers(file, "grid", "linspace")?;
        if v.len() != 3 || v[2] < 2.0 || v[2].fract() != 0.0 {
            return Err(Error::parse(file, line, "`linspace` needs: start end count(>=2)"));
        }
        let n = v[2] as usize;
        (0..n)
            .map(|i| v[0] + (v[1] - v[0]) * i as f64 / (n - 1) as f64)
            .collect()
    };
    gr.finish(file, "grid")?;

    let mut parsed = Vec::with_capacity(modes.len());
    let mut seen: HashMap<usize, usize> = HashMap::new();
    for mut b in modes {
        let (line, idx) = b.take(file, "mode", "index")?;
        let index: usize = idx
            .parse()
            .map_err(|_| Error::parse(file, line, format!("`index`: `{idx}` is not a positive integer")))?;
        if let Some(prev) = seen.insert(index, line) {
            return Err(Error::parse(
                file,
                line,
                format!("duplicate mode index {index} (first defined on line {prev})"),
            ));
        }
        let (kline, kind) = b.take(file, "mode", "kind")?;
        let kind = match kind.as_str() {
            "vertical" => ModeKind::Vertical,
            "lateral" => ModeKind::Lateral,
            "torsional" => ModeKind::Torsional,
            other => {
                return Err(Error::parse(file, kline, format!("mode {index}: unknown kind `{other}`")))
            }
        };
        let freq_line = b.entries.get("frequency_hz").map(|e| e.0).unwrap_or(b.header_line);
        let frequency = b.number(file, "mode", "frequency_hz")?;
        if !(frequency > 0.0) {
            return Err(Error::parse(
                file,
                freq_line,
                format!("mode {index}: non-positive frequency {frequency}"),
            ));
        }
        let damping_ratio = b.number(file, "mode", "damping_ratio")?;
        let modal_mass = b.number(file, "mode", "modal_mass")?;
        let shape_line = b.entries.get("shape").map(|e| e.0).unwrap_or(b.header_line);
        let shape = b.numbers(file, "mode", "shape")?;
        if shape.len() != nodes.len() {
            return Err(Error::parse(
                file,
                shape_line,
                format!("mode {index}: {} shape values for {} grid nodes", shape.len(), nodes.len()),
            ));
        }
        b.finish(file, "mode")?;
        parsed.push(Mode {
            index,
            kind,
            frequency,
            damping_ratio,
            shape,
            modal_mass,
        });
    }
    parsed.sort_by_key(|m| m.index);

    ModalBridge::new(deck, nodes, main_span, [sides[0], sides[1]], parsed).map_err(|e| match e {
        Error::Invariant(msg) => Error::Invariant(format!("{file}: {msg}")),
        other => other,
    })
}

fn join(values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 12);
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{v:e}").unwrap();
    }
    s
}

/// Serialises a bridge in the text format; values use shortest round-trip
/// notation so `parse_bridge(write_bridge(b)) == b`.
pub fn write_bridge(b: &ModalBridge, comment: &str) -> String {
    let mut out = String::new();
    for line in comment.lines() {
        writeln!(out, "# {line}").unwrap();
    }
    let s = &b.section;
    writeln!(out, "\n[section]").unwrap();
    writeln!(out, "width = {:e}", s.width).unwrap();
    writeln!(out, "depth = {:e}", s.depth).unwrap();
    writeln!(out, "mass_per_length = {:e}", s.mass_per_length).unwrap();
    writeln!(out, "torsional_inertia_per_length = {:e}", s.torsional_inertia_per_length).unwrap();
    writeln!(out, "\n[geometry]").unwrap();
    writeln!(out, "main_span = {:e}", b.main_span).unwrap();
    writeln!(out, "side_spans = {}", join(&b.side_spans)).unwrap();
    writeln!(out, "\n[grid]").unwrap();
    writeln!(out, "x = {}", join(b.nodes())).unwrap();
    for m in b.modes() {
        writeln!(out, "\n[mode]").unwrap();
        writeln!(out, "index = {}", m.index).unwrap();
        writeln!(out, "kind = {}", m.kind.as_str()).unwrap();
        writeln!(out, "frequency_hz = {:e}", m.frequency).unwrap();
        writeln!(out, "damping_ratio = {:e}", m.damping_ratio).unwrap();
        writeln!(out, "modal_mass = {:e}", m.modal_mass).unwrap();
        writeln!(out, "shape = {}", join(&m.shape)).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_mode_text(freq: &str) -> String {
        let n = 201;
        let shape: Vec<String> = (0..n)
            .map(|i| format!("{}", (std::f64::consts::PI * i as f64 / (n - 1) as f64).sin()))
            .collect();
        format!(
            "[section]\nwidth = 31\ndepth = 4.3\nmass_per_length = 2e4\ntorsional_inertia_per_length = 2e6\n\
             [geometry]\nmain_span = 1000\nside_spans = 0 0\n[grid]\nlinspace = 0 1000 201\n\
             [mode]\nindex = 1\nkind = vertical\nfrequency_hz = {freq}\ndamping_ratio = 0.005\nmodal_mass = 1e7\nshape = {}\n\
             [mode]\nindex = 2\nkind = torsional\nfrequency_hz = 0.3\ndamping_ratio = 0.005\nmodal_mass = 1e9\nshape = {}\n",
            shape.join(" "),
            shape.join(" ")
        )
    }

    #[test]
    fn parses_minimal_model() {
        let b = parse_bridge(&single_mode_text("0.1"), "mini").unwrap();
        assert_eq!(b.mode_count(), 2);
        assert_eq!(b.nodes().len(), 201);
        assert!((b.total_length() - 1000.0).abs() < 1e-12);
    }

    #[test]
    fn zero_frequency_is_rejected_with_line() {
        let err = parse_bridge(&single_mode_text("0"), "bad").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("non-positive frequency"), "{msg}");
        assert!(msg.starts_with("bad:14:"), "{msg}");
    }

    #[test]
    fn duplicate_indices_are_rejected() {
        let text = single_mode_text("0.1").replace("index = 2", "index = 1");
        let err = parse_bridge(&text, "dup").unwrap_err();
        assert!(err.to_string().contains("duplicate mode index 1"), "{err}");
    }

    #[test]
    fn diagnostics_name_field_and_line() {
        let text = single_mode_text("0.1").replace("damping_ratio = 0.005\nmodal_mass = 1e7", "damping_ratio = abc\nmodal_mass = 1e7");
        let err = parse_bridge(&text, "f").unwrap_err().to_string();
        assert!(err.contains("f:15:") && err.contains("damping_ratio"), "{err}");

        let text = single_mode_text("0.1").replace("modal_mass = 1e7\n", "");
        let err = parse_bridge(&text, "f").unwrap_err().to_string();
        assert!(err.contains("missing required key `modal_mass`"), "{err}");

        let text = single_mode_text("0.1").replace("linspace = 0 1000 201", "linspace = 0 1000 200");
        let err = parse_bridge(&text, "f").unwrap_err().to_string();
        assert!(err.contains("200 grid nodes"), "{err}");
    }

    #[test]
    fn write_then_parse_is_identity() {
        let b = parse_bridge(&single_mode_text("0.1"), "mini").unwrap();
        let text = write_bridge(&b, "round trip");
        let back = parse_bridge(&text, "rt").unwrap();
        assert_eq!(b, back);
    }
}
