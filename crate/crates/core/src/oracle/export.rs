//! Writing grid functions as CSV or as a raw little-endian array with a
//! short text header.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::oracle::grid::GridFunction;

/// `x1,…,xd,value` per node; nodes without a value are skipped.
pub fn write_csv<W: Write>(f: &GridFunction, mut w: W) -> std::io::Result<()> {
    let d = f.grid.dim();
    let cols: Vec<String> = (1..=d).map(|k| format!("x{k}")).chain(["value".to_string()]).collect();
    writeln!(w, "{}", cols.join(","))?;
    let mut x = vec![0.0; d];
    for (i, v) in f.values.iter().enumerate() {
        if !v.is_finite() {
            continue;
        }
        f.grid.coord_into(i, &mut x);
        for xk in &x {
            write!(w, "{xk:e},")?;
        }
        writeln!(w, "{v:e}")?;
    }
    Ok(())
}

/// Header lines `dims=`, `delta=`, `bbox=` and a blank line, then the values
/// as f64 little-endian in row-major order (last axis fastest). Missing
/// values are stored as NaN.
pub fn write_binary<W: Write>(f: &GridFunction, mut w: W) -> std::io::Result<()> {
    let g = &f.grid;
    let d = g.dim();
    let dims: Vec<String> = g.shape().iter().map(|n| n.to_string()).collect();
    let upper = g.upper();
    let bbox: Vec<String> = (0..d).flat_map(|k| [format!("{:e}", g.lower()[k]), format!("{:e}", upper[k])]).collect();
    writeln!(w, "dims={}", dims.join(","))?;
    writeln!(w, "delta={:e}", g.delta())?;
    writeln!(w, "bbox={}", bbox.join(","))?;
    writeln!(w)?;
    let shape = g.shape();
    let total = g.num_nodes();
    let mut m = vec![0usize; d];
    for _ in 0..total {
        w.write_all(&f.values[g.index(&m)].to_le_bytes())?;
        for k in (0..d).rev() {
            m[k] += 1;
            if m[k] < shape[k] {
                break;
            }
            m[k] = 0;
        }
    }
    Ok(())
}

/// Contents of a binary export.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryArray {
    pub dims: Vec<usize>,
    pub delta: f64,
    /// lo1, hi1, lo2, hi2, …
    pub bbox: Vec<f64>,
    /// Row-major.
    pub values: Vec<f64>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub fn read_binary<R: BufRead>(mut r: R) -> Result<BinaryArray> {
    let mut dims = None;
    let mut delta = None;
    let mut bbox = None;
    loop {
        let mut line = String::new();
        let n = r.read_line(&mut line).map_err(Error::io("<binary grid>"))?;
        if n == 0 {
            return Err(bad("binary grid header ended without a blank line"));
        }
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        let (key, val) = line.split_once('=').ok_or_else(|| bad(format!("malformed header line `{line}`")))?;
        let floats = || -> Result<Vec<f64>> {
            val.split(',')
                .map(|s| s.parse::<f64>().map_err(|_| bad(format!("bad number in `{line}`"))))
                .collect()
        };
        match key {
            "dims" => {
                dims = Some(
                    val.split(',')
                        .map(|s| s.parse::<usize>().map_err(|_| bad(format!("bad dimension in `{line}`"))))
                        .collect::<Result<Vec<_>>>()?,
                )
            }
            "delta" => delta = Some(floats()?[0]),
            "bbox" => bbox = Some(floats()?),
            other => return Err(bad(format!("unknown header field `{other}`"))),
        }
    }
    let dims = dims.ok_or_else(|| bad("missing dims="))?;
    let delta = delta.ok_or_else(|| bad("missing delta="))?;
    let bbox = bbox.ok_or_else(|| bad("missing bbox="))?;
    if bbox.len() != 2 * dims.len() {
        return Err(bad("bbox does not match dims"));
    }
    let total: usize = dims.iter().product();
    let mut buf = vec![0u8; 8 * total];
    r.read_exact(&mut buf).map_err(Error::io("<binary grid>"))?;
    let values = buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(BinaryArray {
        dims,
        delta,
        bbox,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;
    use crate::oracle::grid::Grid;
    use std::sync::Arc;

    fn sample() -> GridFunction {
        let dom = Domain::hyperrectangle(vec![0.0, 0.0], vec![1.0, 0.5]).unwrap();
        let g = Arc::new(Grid::for_domain(&dom, 0.25).unwrap());
        let values = (0..g.num_nodes()).map(|i| g.coord(i)[0] + 10.0 * g.coord(i)[1]).collect();
        GridFunction { grid: g, values }
    }

    #[test]
    fn binary_round_trip() {
        let f = sample();
        let mut buf = Vec::new();
        write_binary(&f, &mut buf).unwrap();
        let text = String::from_utf8_lossy(&buf[..40]).to_string();
        assert!(text.starts_with("dims=5,3\ndelta=2.5e-1\nbbox="));
        let back = read_binary(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back.dims, vec![5, 3]);
        assert_eq!(back.bbox, vec![0.0, 1.0, 0.0, 0.5]);
        // row-major: second axis fastest
        assert_eq!(back.values[1], 10.0 * 0.25);
        assert_eq!(back.values[3], 0.25);
    }

    #[test]
    fn csv_has_all_nodes() {
        let f = sample();
        let mut buf = Vec::new();
        write_csv(&f, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "x1,x2,value");
        assert_eq!(lines.len(), 16);
        let last: Vec<f64> = lines[15].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(last, vec![1.0, 0.5, 6.0]);
    }
}
