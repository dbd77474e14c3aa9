//! Extended-XYZ reading and writing.
//!
//! ```text
//! 3
//! Lattice="10 0 0 0 10 0 0 0 10" pbc="T T T" energy=-1.5
//! O 0.0 0.0 0.0
//! H 0.96 0.0 0.0
//! H -0.24 0.93 0.0
//! ```
//!
//! `Lattice` lists the three lattice vectors row by row. Keys other than
//! `Lattice`, `pbc` and `Properties` are kept verbatim in [`XyzFrame::info`].
//! Only the species and position columns of `Properties` are interpreted.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use crate::elements;
use crate::geometry::AtomicSystem;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct XyzFrame {
    pub system: AtomicSystem,
    pub info: BTreeMap<String, String>,
}

impl XyzFrame {
    pub fn new(system: AtomicSystem) -> Self {
        Self {
            system,
            info: BTreeMap::new(),
        }
    }

    /// Numeric value of an info key, e.g. a reference `energy`.
    pub fn info_f64(&self, key: &str) -> Option<f64> {
        self.info.get(key).and_then(|v| v.parse().ok())
    }
}

/// Split a comment line into `key=value` pairs. Values may be double-quoted;
/// a bare key is recorded with value `T`.
fn parse_comment(line: &str, lineno: usize) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut chars = line.trim().chars().peekable();
    loop {
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        if chars.peek().is_none() {
            break;
        }
        let mut key = String::new();
        while let Some(&c) = chars.peek() {
            if c == '=' || c.is_whitespace() {
                break;
            }
            key.push(c);
            chars.next();
        }
        if chars.peek() != Some(&'=') {
            out.push((key, "T".to_string()));
            continue;
        }
        chars.next();
        let mut value = String::new();
        if chars.peek() == Some(&'"') {
            chars.next();
            let mut closed = false;
            for c in chars.by_ref() {
                if c == '"' {
                    closed = true;
                    break;
                }
                value.push(c);
            }
            if !closed {
                return Err(Error::parse(lineno, format!("unterminated quote in value of '{key}'")));
            }
        } else {
            while let Some(&c) = chars.peek() {
                if c.is_whitespace() {
                    break;
                }
                value.push(c);
                chars.next();
            }
        }
        out.push((key, value));
    }
    Ok(out)
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "T" | "t" | "True" | "true" | "1" => Some(true),
        "F" | "f" | "False" | "false" | "0" => Some(false),
        _ => None,
    }
}

/// Column layout `(species column, first position column)` from `Properties`.
fn parse_properties(spec: &str, lineno: usize) -> Result<(usize, usize)> {
    let fields: Vec<&str> = spec.split(':').collect();
    if fields.len() % 3 != 0 {
        return Err(Error::parse(lineno, format!("malformed Properties '{spec}'")));
    }
    let mut col = 0;
    let (mut species, mut pos) = (None, None);
    for chunk in fields.chunks(3) {
        let width: usize = chunk[2]
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad column count in Properties '{spec}'")))?;
        match chunk[0] {
            "species" => species = Some(col),
            "pos" if width == 3 => pos = Some(col),
            _ => {}
        }
        col += width;
    }
    match (species, pos) {
        (Some(s), Some(p)) => Ok((s, p)),
        _ => Err(Error::parse(lineno, "Properties lacks species or pos columns")),
    }
}

/// Parse every frame in `text`.
pub fn parse_frames(text: &str) -> Result<Vec<XyzFrame>> {
    let lines: Vec<&str> = text.lines().collect();
    let mut frames = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        if lines[i].trim().is_empty() {
            i += 1;
            continue;
        }
        let count_line = i + 1;
        let n: usize = lines[i]
            .trim()
            .parse()
            .map_err(|_| Error::parse(count_line, format!("expected atom count, found '{}'", lines[i].trim())))?;
        if n == 0 {
            return Err(Error::parse(count_line, "atom count must be positive"));
        }
        let comment = lines
            .get(i + 1)
            .ok_or_else(|| Error::parse(count_line + 1, "missing comment line"))?;
        let mut info = BTreeMap::new();
        let mut cell = None;
        let mut pbc = None;
        let mut columns = (0, 1);
        for (key, value) in parse_comment(comment, count_line + 1)? {
            match key.as_str() {
                "Lattice" => {
                    let v: Vec<f64> = value
                        .split_whitespace()
                        .map(str::parse)
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| Error::parse(count_line + 1, "non-numeric Lattice entry"))?;
                    if v.len() != 9 {
                        return Err(Error::parse(count_line + 1, "Lattice needs 9 numbers"));
                    }
                    cell = Some(Matrix3::from_row_slice(&v));
                }
                "pbc" => {
                    let flags: Option<Vec<bool>> = value.split_whitespace().map(parse_bool).collect();
                    match flags.as_deref() {
                        Some([a, b, c]) => pbc = Some([*a, *b, *c]),
                        _ => return Err(Error::parse(count_line + 1, format!("bad pbc value '{value}'"))),
                    }
                }
                "Properties" => columns = parse_properties(&value, count_line + 1)?,
                _ => {
                    info.insert(key, value);
                }
            }
        }
        // Extended-XYZ convention: a Lattice without pbc means fully periodic.
        let pbc = pbc.unwrap_or(if cell.is_some() { [true; 3] } else { [false; 3] });

        let mut positions = Vec::with_capacity(n);
        let mut numbers = Vec::with_capacity(n);
        for k in 0..n {
            let lineno = i + 3 + k;
            let line = lines
                .get(i + 2 + k)
                .ok_or_else(|| Error::parse(lineno, format!("expected {n} atom lines")))?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            let need = columns.0.max(columns.1 + 2) + 1;
            if parts.len() < need {
                return Err(Error::parse(lineno, format!("expected at least {need} columns")));
            }
            let sym = parts[columns.0];
            let z = elements::atomic_number(sym)
                .or_else(|| sym.parse::<u32>().ok().filter(|z| (1..=118).contains(z)))
                .ok_or_else(|| Error::parse(lineno, format!("unknown element '{sym}'")))?;
            let mut xyz = [0.0; 3];
            for (c, slot) in xyz.iter_mut().enumerate() {
                *slot = parts[columns.1 + c]
                    .parse()
                    .map_err(|_| Error::parse(lineno, format!("bad coordinate '{}'", parts[columns.1 + c])))?;
            }
            positions.push(Vector3::from(xyz));
            numbers.push(z);
        }
        let system = AtomicSystem::with_cell(positions, numbers, cell, pbc)
            .map_err(|e| Error::parse(count_line, e.to_string()))?;
        frames.push(XyzFrame { system, info });
        i += 2 + n;
    }
    Ok(frames)
}

/// Parse exactly one frame.
pub fn parse_single(text: &str) -> Result<XyzFrame> {
    let mut frames = parse_frames(text)?;
    match frames.len() {
        1 => Ok(frames.remove(0)),
        0 => Err(Error::parse(1, "no frames found")),
        k => Err(Error::parse(1, format!("expected one frame, found {k}"))),
    }
}

pub fn read_frames(path: impl AsRef<Path>) -> Result<Vec<XyzFrame>> {
    parse_frames(&std::fs::read_to_string(path)?)
}

fn quote_if_needed(v: &str) -> String {
    if v.is_empty() || v.contains(char::is_whitespace) || v.contains('=') {
        format!("\"{v}\"")
    } else {
        v.to_string()
    }
}

/// Append one frame to `out`. Coordinates use 12 decimals.
pub fn write_frame(out: &mut String, system: &AtomicSystem, info: &BTreeMap<String, String>) {
    writeln!(out, "{}", system.len()).unwrap();
    let mut comment = String::new();
    if let Some(c) = system.cell() {
        let entries: Vec<String> = (0..3)
            .flat_map(|r| (0..3).map(move |k| (r, k)))
            .map(|(r, k)| format!("{:.12}", c[(r, k)]))
            .collect();
        write!(comment, "Lattice=\"{}\" ", entries.join(" ")).unwrap();
    }
    comment.push_str("Properties=species:S:1:pos:R:3");
    let flags: Vec<&str> = system.pbc().iter().map(|&p| if p { "T" } else { "F" }).collect();
    write!(comment, " pbc=\"{}\"", flags.join(" ")).unwrap();
    for (k, v) in info {
        write!(comment, " {}={}", k, quote_if_needed(v)).unwrap();
    }
    writeln!(out, "{comment}").unwrap();
    for (p, &z) in system.positions().iter().zip(system.atomic_numbers()) {
        let sym = elements::symbol(z).unwrap_or("X");
        writeln!(out, "{:<2} {:.12} {:.12} {:.12}", sym, p.x, p.y, p.z).unwrap();
    }
}

pub fn to_string(frames: &[XyzFrame]) -> String {
    let mut out = String::new();
    for f in frames {
        write_frame(&mut out, &f.system, &f.info);
    }
    out
}

pub fn write_frames(path: impl AsRef<Path>, frames: &[XyzFrame]) -> Result<()> {
    std::fs::write(path, to_string(frames))?;
    Ok(())
}
