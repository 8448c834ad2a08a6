//! V2000 molfile subset: header, counts line, atom block (element symbols),
//! bond block and the `M  END` terminator. Coordinates in the atom block are
//! validated but not kept, since a [`MoleculeGraph`] is purely topological.

use super::elements::{symbol_of_type, type_of_symbol};
use super::types::{Bond, BondOrder, MoleculeGraph};
use crate::error::{Error, Result};

const RECORD_SEPARATOR: &str = "$$$$";

fn fixed_field(line: &str, range: std::ops::Range<usize>, lineno: usize, what: &str) -> Result<usize> {
    line.get(range)
        .and_then(|s| s.trim().parse::<usize>().ok())
        .ok_or_else(|| Error::parse(lineno, format!("malformed {what} field in {line:?}")))
}

/// Parses one molfile record.
pub fn parse_sdf_subset(text: &str) -> Result<MoleculeGraph> {
    let lines: Vec<&str> = text.lines().collect();
    parse_record(&lines, 0)
}

fn parse_record(lines: &[&str], offset: usize) -> Result<MoleculeGraph> {
    // 1-based line number of lines[k]
    let lineno = |k: usize| offset + k + 1;
    if lines.len() < 4 {
        return Err(Error::parse(
            lineno(lines.len()),
            "truncated header: expected three header lines and a counts line",
        ));
    }
    let id = lines[0].trim();
    let counts = lines[3];
    if !counts.contains("V2000") {
        return Err(Error::parse(lineno(3), "counts line lacks the V2000 tag"));
    }
    let n_atoms = fixed_field(counts, 0..3, lineno(3), "atom count")?;
    let n_bonds = fixed_field(counts, 3..6, lineno(3), "bond count")?;
    if n_atoms == 0 {
        return Err(Error::parse(lineno(3), "molfile declares zero atoms"));
    }

    let atom_start = 4;
    let bond_start = atom_start + n_atoms;
    let end_line = bond_start + n_bonds;
    if lines.len() <= end_line {
        return Err(Error::parse(
            lineno(lines.len().min(end_line)),
            format!("truncated block: expected {n_atoms} atom and {n_bonds} bond lines then M  END"),
        ));
    }

    let mut types = Vec::with_capacity(n_atoms);
    for k in atom_start..bond_start {
        let toks: Vec<&str> = lines[k].split_whitespace().collect();
        if toks.len() < 4 {
            return Err(Error::parse(lineno(k), "atom line needs x y z and a symbol"));
        }
        for t in &toks[..3] {
            match t.parse::<f64>() {
                Ok(v) if v.is_finite() => {}
                _ => return Err(Error::parse(lineno(k), format!("bad coordinate {t:?}"))),
            }
        }
        types.push(type_of_symbol(toks[3]));
    }

    let mut bonds = Vec::with_capacity(n_bonds);
    for k in bond_start..end_line {
        let line = lines[k];
        let i = fixed_field(line, 0..3, lineno(k), "first atom")?;
        let j = fixed_field(line, 3..6, lineno(k), "second atom")?;
        let code = fixed_field(line, 6..9, lineno(k), "bond type")?;
        if i == 0 || j == 0 || i > n_atoms || j > n_atoms {
            return Err(Error::parse(
                lineno(k),
                format!("bond {i}-{j} outside atoms 1..={n_atoms}"),
            ));
        }
        let order = u8::try_from(code)
            .ok()
            .and_then(BondOrder::from_code)
            .ok_or_else(|| Error::parse(lineno(k), format!("unsupported bond type {code}")))?;
        bonds.push(Bond {
            i: i - 1,
            j: j - 1,
            order,
        });
    }

    if !lines[end_line].starts_with("M  END") {
        return Err(Error::parse(lineno(end_line), "expected M  END after the bond block"));
    }

    let id = (!id.is_empty()).then(|| id.to_string());
    MoleculeGraph::new(types, bonds, id).map_err(|e| Error::parse(lineno(bond_start), e.to_string()))
}

/// Serializes a graph as a V2000 record (all coordinates zero).
pub fn write_sdf(g: &MoleculeGraph) -> String {
    let mut s = String::new();
    s.push_str(g.molecule_id.as_deref().unwrap_or(""));
    s.push_str("\n  bindcore\n\n");
    s.push_str(&format!(
        "{:>3}{:>3}  0  0  0  0  0  0  0  0999 V2000\n",
        g.num_atoms(),
        g.bonds().len()
    ));
    for &t in g.atom_types() {
        s.push_str(&format!(
            "{:>10.4}{:>10.4}{:>10.4} {:<3} 0  0  0  0  0  0  0  0  0  0  0  0\n",
            0.0,
            0.0,
            0.0,
            symbol_of_type(t)
        ));
    }
    for b in g.bonds() {
        s.push_str(&format!(
            "{:>3}{:>3}{:>3}  0  0  0  0\n",
            b.i + 1,
            b.j + 1,
            b.order.code()
        ));
    }
    s.push_str("M  END\n");
    s
}

/// Parses a multi-record SD file (records separated by `$$$$`).
pub fn parse_sdf_bundle(text: &str) -> Result<Vec<MoleculeGraph>> {
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::new();
    let mut start = 0;
    for (k, line) in lines.iter().enumerate() {
        if line.trim_end() == RECORD_SEPARATOR {
            out.push(parse_record(&lines[start..k], start)?);
            start = k + 1;
        }
    }
    if lines[start..].iter().any(|l| !l.trim().is_empty()) {
        out.push(parse_record(&lines[start..], start)?);
    }
    Ok(out)
}

pub fn write_sdf_bundle<'a>(graphs: impl IntoIterator<Item = &'a MoleculeGraph>) -> String {
    let mut s = String::new();
    for g in graphs {
        s.push_str(&write_sdf(g));
        s.push_str(RECORD_SEPARATOR);
        s.push('\n');
    }
    s
}
