//! Field files: a short text header followed by little-endian `f64` samples.
//!
//! ```text
//! QMAFIELD 1
//! n 2
//! active 1 5
//! points 64
//! count 4096
//! end
//! ```
//!
//! Active coordinates are written 1-based. The CSV export has one column
//! per active coordinate (`x1`, `x5`, ...) followed by `value`.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::field::ScalarField;
use super::grid::SpectralGrid;
use super::TorusError;

const MAGIC: &str = "QMAFIELD 1";

pub fn write_field(w: &mut impl Write, field: &ScalarField) -> Result<(), TorusError> {
    let g = field.grid();
    let active: Vec<String> = g.active().iter().map(|k| (k + 1).to_string()).collect();
    write!(
        w,
        "{MAGIC}\nn {}\nactive {}\npoints {}\ncount {}\nend\n",
        g.n(),
        active.join(" "),
        g.points(),
        g.len()
    )?;
    let mut buf = Vec::with_capacity(8 * g.len());
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_field(r: impl Read) -> Result<ScalarField, TorusError> {
    let mut r = BufReader::new(r);
    let mut line = String::new();
    let mut next = |r: &mut BufReader<_>| -> Result<String, TorusError> {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(TorusError::Format("unexpected end of header".into()));
        }
        Ok(line.trim_end().to_string())
    };
    if next(&mut r)? != MAGIC {
        return Err(TorusError::Format("missing QMAFIELD 1 magic line".into()));
    }
    let mut n = None;
    let mut active = None;
    let mut points = None;
    let mut count = None;
    loop {
        let l = next(&mut r)?;
        if l == "end" {
            break;
        }
        let (key, rest) = l
            .split_once(' ')
            .ok_or_else(|| TorusError::Format(format!("bad header line {l:?}")))?;
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| TorusError::Format(format!("bad number {s:?} in {key}")))
        };
        match key {
            "n" => n = Some(parse(rest)?),
            "points" => points = Some(parse(rest)?),
            "count" => count = Some(parse(rest)?),
            "active" => {
                let v: Result<Vec<usize>, _> = rest.split_whitespace().map(parse).collect();
                let v = v?;
                if v.contains(&0) {
                    return Err(TorusError::Format("active coordinates are 1-based".into()));
                }
                active = Some(v.into_iter().map(|k| k - 1).collect::<Vec<_>>());
            }
            other => return Err(TorusError::Format(format!("unknown header key {other:?}"))),
        }
    }
    let missing = |k: &str| TorusError::Format(format!("header lacks {k}"));
    let grid = SpectralGrid::new(
        n.ok_or_else(|| missing("n"))?,
        &active.ok_or_else(|| missing("active"))?,
        points.ok_or_else(|| missing("points"))?,
    )?;
    let count = count.ok_or_else(|| missing("count"))?;
    if count != grid.len() {
        return Err(TorusError::LengthMismatch {
            expected: grid.len(),
            found: count,
        });
    }
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * count {
        return Err(TorusError::LengthMismatch {
            expected: count,
            found: bytes.len() / 8,
        });
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk")))
        .collect();
    ScalarField::new(grid, values)
}

pub fn save_field(path: &Path, field: &ScalarField) -> Result<(), TorusError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_field(&mut f, field)?;
    f.flush()?;
    Ok(())
}

pub fn load_field(path: &Path) -> Result<ScalarField, TorusError> {
    read_field(std::fs::File::open(path)?)
}

pub fn write_csv(w: &mut impl Write, field: &ScalarField) -> Result<(), TorusError> {
    let g = field.grid();
    let header: Vec<String> = g.active().iter().map(|k| format!("x{}", k + 1)).collect();
    writeln!(w, "{},value", header.join(","))?;
    for (i, v) in field.values().iter().enumerate() {
        let x = g.coordinates(i);
        let coords: Vec<String> = g.active().iter().map(|&k| format!("{}", x[k])).collect();
        writeln!(w, "{},{:e}", coords.join(","), v)?;
    }
    Ok(())
}
