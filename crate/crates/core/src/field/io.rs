use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use super::{FieldError, FieldKind, Obstacle, ObstacleField};

const MAGIC: &str = "# depin obstacle field v1";

/// Write the field as a flat text table: `#`-prefixed `key = value` header
/// lines, then one obstacle per line as `x_1 … x_n y strength`.
pub fn write_field<W: Write>(field: &ObstacleField, mut out: W) -> io::Result<()> {
    let shape = field.shape();
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "# n = {}", shape.n())?;
    writeln!(out, "# r0 = {}", shape.r0())?;
    writeln!(out, "# r1 = {}", shape.r1())?;
    writeln!(out, "# sigma = {}", shape.sigma())?;
    writeln!(out, "# amplitude = {}", shape.amplitude())?;
    writeln!(out, "# seed = {}", field.seed())?;
    match field.kind() {
        FieldKind::Poisson { intensity } => writeln!(out, "# process = poisson {intensity}")?,
        FieldKind::Lattice { spacing } => writeln!(out, "# process = lattice {spacing}")?,
        FieldKind::Explicit => writeln!(out, "# process = explicit")?,
    }
    if let Some(d) = field.distribution() {
        writeln!(out, "# strength = {}", d.describe())?;
    }
    writeln!(out, "# periodic = {}", field.is_periodic())?;
    writeln!(out, "# window_lo = {}", join(&field.window().lo))?;
    writeln!(out, "# window_hi = {}", join(&field.window().hi))?;
    writeln!(out, "# count = {}", field.obstacles().len())?;
    for ob in field.obstacles() {
        let mut row = join(&ob.x);
        row.push(' ');
        row.push_str(&format!("{} {}", ob.y, ob.strength));
        writeln!(out, "{row}")?;
    }
    Ok(())
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

/// Parsed export: header map plus the obstacle rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTable {
    pub header: BTreeMap<String, String>,
    pub obstacles: Vec<Obstacle>,
}

pub fn read_field<R: BufRead>(input: R) -> Result<FieldTable, FieldError> {
    let mut header = BTreeMap::new();
    let mut rows = Vec::new();
    let mut n = None;
    for (lineno, line) in input.lines().enumerate() {
        let line = line.map_err(|e| FieldError::Parse(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if lineno == 0 && line != MAGIC {
            return Err(FieldError::Parse(format!("missing header line, got {line:?}")));
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once('=') {
                header.insert(k.trim().to_string(), v.trim().to_string());
                if k.trim() == "n" {
                    n = v.trim().parse::<usize>().ok();
                }
            }
            continue;
        }
        let n = n.ok_or_else(|| FieldError::Parse("row before `n` header".into()))?;
        let vals: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse::<f64>).collect();
        let vals = vals.map_err(|e| FieldError::Parse(format!("line {}: {e}", lineno + 1)))?;
        if vals.len() != n + 2 {
            return Err(FieldError::Parse(format!("line {}: expected {} columns", lineno + 1, n + 2)));
        }
        rows.push(Obstacle { x: vals[..n].to_vec(), y: vals[n], strength: vals[n + 1] });
    }
    Ok(FieldTable { header, obstacles: rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{ObstacleShape, StrengthDistribution, Window};

    #[test]
    fn export_reimports_exactly() {
        let shape = ObstacleShape::new(1, 0.25, 0.4, 0.2).unwrap();
        let f = ObstacleField::sample(
            Window::new(vec![0.0, 0.4], vec![7.0, 3.0]),
            1.5,
            StrengthDistribution::Uniform { lo: 1.0, hi: 4.0 },
            shape,
            99,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        let table = read_field(buf.as_slice()).unwrap();
        assert_eq!(table.obstacles, f.obstacles());
        assert_eq!(table.header["seed"], "99");
        assert_eq!(table.header["strength"], "uniform 1 4");
        assert_eq!(table.header["process"], "poisson 1.5");
    }

    #[test]
    fn rejects_wrong_column_count() {
        let text = format!("{MAGIC}\n# n = 2\n1 2 3\n");
        assert!(read_field(text.as_bytes()).is_err());
    }
}
