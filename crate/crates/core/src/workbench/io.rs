//! Curves CSV: header `curve_id,t,z[,weight]`, one row per (curve, grid point).

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use indexmap::IndexMap;

use crate::error::{Result, TmvError};
use crate::fitting::SampledCurve;
use crate::model::SamplingGrid;

struct Pending {
    t: Vec<f64>,
    z: Vec<f64>,
    weight: Option<f64>,
    first_line: usize,
}

fn parse_number(field: &str, line: usize, column: &str) -> Result<f64> {
    let value: f64 = field.trim().parse().map_err(|_| TmvError::Parse {
        line,
        message: format!("{column} `{field}` is not a number"),
    })?;
    if !value.is_finite() {
        return Err(TmvError::Parse {
            line,
            message: format!("{column} must be finite"),
        });
    }
    Ok(value)
}

/// Parse curves from any CSV reader. Curves keep their order of first appearance.
pub fn read_curves<R: Read>(reader: R) -> Result<(SamplingGrid, Vec<SampledCurve>)> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = csv
        .headers()
        .map_err(|e| TmvError::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let missing = |name: &str| TmvError::Parse {
        line: 1,
        message: format!("missing `{name}` column"),
    };
    let id_col = column("curve_id").ok_or_else(|| missing("curve_id"))?;
    let t_col = column("t").ok_or_else(|| missing("t"))?;
    let z_col = column("z").ok_or_else(|| missing("z"))?;
    let weight_col = column("weight");

    let mut pending: IndexMap<String, Pending> = IndexMap::new();
    for record in csv.records() {
        let record = record.map_err(|e| TmvError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| record.get(i).unwrap_or("");
        let id = field(id_col).to_string();
        if id.is_empty() {
            return Err(TmvError::Parse {
                line,
                message: "empty curve_id".into(),
            });
        }
        let t = parse_number(field(t_col), line, "t")?;
        let z = parse_number(field(z_col), line, "z")?;
        let weight = match weight_col.map(field) {
            Some(w) if !w.is_empty() => {
                let w = parse_number(w, line, "weight")?;
                if w <= 0.0 {
                    return Err(TmvError::Parse {
                        line,
                        message: format!("weight must be positive, got {w}"),
                    });
                }
                Some(w)
            }
            _ => None,
        };
        let entry = pending.entry(id.clone()).or_insert_with(|| Pending {
            t: Vec::new(),
            z: Vec::new(),
            weight,
            first_line: line,
        });
        if let Some(&last) = entry.t.last() {
            if t <= last {
                return Err(TmvError::Parse {
                    line,
                    message: format!("t values of curve `{id}` must be strictly increasing ({last} then {t})"),
                });
            }
        }
        if entry.weight != weight {
            return Err(TmvError::Parse {
                line,
                message: format!("inconsistent weight for curve `{id}`"),
            });
        }
        entry.t.push(t);
        entry.z.push(z);
    }

    let mut entries = pending.into_iter();
    let (first_id, first) = entries.next().ok_or(TmvError::Parse {
        line: 1,
        message: "no data rows".into(),
    })?;
    let grid = SamplingGrid::new(first.t.clone()).map_err(|e| TmvError::GridMismatch(format!("curve `{first_id}`: {e}")))?;
    let mut curves = vec![SampledCurve::new(first_id, first.z, first.weight.unwrap_or(1.0))?];
    for (id, p) in entries {
        if p.t != grid.points() {
            return Err(TmvError::GridMismatch(format!(
                "curve `{id}` (from line {}) is sampled at {:?}, expected {:?}",
                p.first_line,
                p.t,
                grid.points()
            )));
        }
        curves.push(SampledCurve::new(id, p.z, p.weight.unwrap_or(1.0))?);
    }
    Ok((grid, curves))
}

pub fn load_curves(path: impl AsRef<Path>) -> Result<(SamplingGrid, Vec<SampledCurve>)> {
    read_curves(File::open(path)?)
}

/// Write curves with 17 significant digits, enough to round-trip every `f64`.
pub fn write_curves<W: Write>(writer: W, grid: &SamplingGrid, curves: &[SampledCurve]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| TmvError::Io(std::io::Error::other(e));
    csv.write_record(["curve_id", "t", "z", "weight"]).map_err(io)?;
    for c in curves {
        if c.z.len() != grid.len() {
            return Err(TmvError::GridMismatch(format!("curve `{}` does not match the grid", c.id)));
        }
        for (t, z) in grid.points().iter().zip(&c.z) {
            csv.write_record([c.id.clone(), format!("{t:.16e}"), format!("{z:.16e}"), format!("{:.16e}", c.weight)])
                .map_err(io)?;
        }
    }
    csv.flush()?;
    Ok(())
}

pub fn save_curves(path: impl AsRef<Path>, grid: &SamplingGrid, curves: &[SampledCurve]) -> Result<()> {
    write_curves(File::create(path)?, grid, curves)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fixture_without_weights() {
        let text = "curve_id,t,z\n\
                    a,0,1\na,1,2\na,2,3\na,3,4\na,4,5\na,5,6\n\
                    b,0,2\nb,1,3\nb,2,4\nb,3,5\nb,4,6\nb,5,7\n";
        let (grid, curves) = read_curves(text.as_bytes()).unwrap();
        assert_eq!(grid.len(), 6);
        assert_eq!(curves.len(), 2);
        assert_eq!(curves[1].z, vec![2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        assert!(curves.iter().all(|c| c.weight == 1.0));
    }

    #[test]
    fn reports_line_numbers() {
        let text = "curve_id,t,z\na,0,1\na,1,x\na,2,3\n";
        match read_curves(text.as_bytes()) {
            Err(TmvError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let text = "curve_id,t,z\na,0,1\na,2,1\na,1,3\n";
        assert!(matches!(read_curves(text.as_bytes()), Err(TmvError::Parse { line: 4, .. })));
    }

    #[test]
    fn detects_grid_mismatch() {
        let text = "curve_id,t,z\na,0,1\na,1,1\na,2,1\nb,0,1\nb,1.5,1\nb,2,1\n";
        assert!(matches!(read_curves(text.as_bytes()), Err(TmvError::GridMismatch(_))));
        let short = "curve_id,t,z\na,0,1\na,1,1\na,2,1\nb,0,1\nb,1,1\n";
        assert!(matches!(read_curves(short.as_bytes()), Err(TmvError::GridMismatch(_))));
    }

    #[test]
    fn round_trip_is_exact() {
        let grid = SamplingGrid::new(vec![-1.0 / 3.0, 0.1, 2.0f64.sqrt()]).unwrap();
        let curves = vec![
            SampledCurve::new("x", vec![std::f64::consts::PI, -1e-300, 123456.789e10], 2.5).unwrap(),
            SampledCurve::new("y", vec![0.1 + 0.2, f64::MIN_POSITIVE, -0.0], 1.0).unwrap(),
        ];
        let mut buf = Vec::new();
        write_curves(&mut buf, &grid, &curves).unwrap();
        let (g2, c2) = read_curves(buf.as_slice()).unwrap();
        assert_eq!(g2, grid);
        assert_eq!(c2, curves);
    }
}
