//! XYZ format: an atom-count line, a comment line (used as the record ID),
//! then one `symbol x y z` row per atom.

use super::elements::{symbol_of_type, type_of_symbol};
use super::types::{Conformation, PocketStructure, Structure3d};
use crate::error::{Error, Result};

struct Frame {
    types: Vec<usize>,
    coords: Vec<[f64; 3]>,
    id: Option<String>,
}

/// Reads one frame starting at `lines[start]`; returns it and the index of
/// the line after it.
fn read_frame(lines: &[&str], start: usize) -> Result<(Frame, usize)> {
    let count_line = lines
        .get(start)
        .ok_or_else(|| Error::parse(start + 1, "missing atom count line"))?;
    let n: usize = count_line
        .trim()
        .parse()
        .map_err(|_| Error::parse(start + 1, format!("bad atom count {count_line:?}")))?;
    if n == 0 {
        return Err(Error::parse(start + 1, "frame declares zero atoms"));
    }
    let comment = lines
        .get(start + 1)
        .ok_or_else(|| Error::parse(start + 2, "missing comment line"))?
        .trim();
    let mut types = Vec::with_capacity(n);
    let mut coords = Vec::with_capacity(n);
    for k in 0..n {
        let lineno = start + 3 + k;
        let line = lines.get(start + 2 + k).ok_or_else(|| {
            Error::parse(lineno, format!("count line says {n} atoms but only {k} rows follow"))
        })?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 4 {
            return Err(Error::parse(lineno, format!("expected 'symbol x y z', got {line:?}")));
        }
        let mut xyz = [0.0; 3];
        for (slot, t) in xyz.iter_mut().zip(&toks[1..]) {
            *slot = match t.parse::<f64>() {
                Ok(v) if v.is_finite() => v,
                _ => return Err(Error::parse(lineno, format!("bad coordinate {t:?}"))),
            };
        }
        types.push(type_of_symbol(toks[0]));
        coords.push(xyz);
    }
    let id = (!comment.is_empty()).then(|| comment.to_string());
    Ok((Frame { types, coords, id }, start + 2 + n))
}

fn single_frame(text: &str) -> Result<Frame> {
    let lines: Vec<&str> = text.lines().collect();
    let (frame, next) = read_frame(&lines, 0)?;
    if let Some(k) = (next..lines.len()).find(|&k| !lines[k].trim().is_empty()) {
        return Err(Error::parse(k + 1, "unexpected content after the last atom row"));
    }
    Ok(frame)
}

fn frames(text: &str) -> Result<Vec<Frame>> {
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::new();
    let mut k = 0;
    while k < lines.len() {
        if lines[k].trim().is_empty() {
            k += 1;
            continue;
        }
        let (f, next) = read_frame(&lines, k)?;
        out.push(f);
        k = next;
    }
    Ok(out)
}

pub fn parse_xyz(text: &str) -> Result<Conformation> {
    let f = single_frame(text)?;
    Conformation::new(f.types, f.coords, f.id)
}

pub fn parse_xyz_pocket(text: &str) -> Result<PocketStructure> {
    let f = single_frame(text)?;
    PocketStructure::new(f.types, f.coords, f.id)
}

pub fn parse_xyz_bundle(text: &str) -> Result<Vec<Conformation>> {
    frames(text)?
        .into_iter()
        .map(|f| Conformation::new(f.types, f.coords, f.id))
        .collect()
}

pub fn parse_xyz_pocket_bundle(text: &str) -> Result<Vec<PocketStructure>> {
    frames(text)?
        .into_iter()
        .map(|f| PocketStructure::new(f.types, f.coords, f.id))
        .collect()
}

/// Writes one frame with six decimals per coordinate.
pub fn write_xyz(s: &dyn Structure3d) -> String {
    let mut out = format!("{}\n{}\n", s.num_atoms(), s.id().unwrap_or(""));
    for (t, c) in s.atom_types().iter().zip(s.coords()) {
        out.push_str(&format!(
            "{} {:.6} {:.6} {:.6}\n",
            symbol_of_type(*t),
            c[0],
            c[1],
            c[2]
        ));
    }
    out
}

pub fn write_xyz_bundle<'a, S: Structure3d + 'a>(items: impl IntoIterator<Item = &'a S>) -> String {
    items.into_iter().map(|s| write_xyz(s)).collect()
}
