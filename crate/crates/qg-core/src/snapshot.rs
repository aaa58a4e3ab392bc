//! QGF1 snapshot format: a one-line UTF-8 header
//! `QGF1 <n1> <n2> [<nz> <z_max>]` followed by row-major little-endian
//! 64-bit floats. Round trips are bit-exact.

use crate::field::{BoundaryField, SlabField};
use crate::grid::{SlabGrid3, TorusGrid2};
use crate::{QgError, Result};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

fn write_payload<W: Write>(w: &mut W, header: &str, values: &[f64]) -> Result<()> {
    w.write_all(header.as_bytes())?;
    w.write_all(b"\n")?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_values<R: Read>(r: &mut R, count: usize, path: &Path) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; count * 8];
    r.read_exact(&mut buf).map_err(|e| {
        QgError::Snapshot(format!("{}: truncated payload ({e})", path.display()))
    })?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(QgError::Snapshot(format!(
            "{}: trailing bytes after payload",
            path.display()
        )));
    }
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn read_header(path: &Path) -> Result<(Vec<String>, BufReader<std::fs::File>)> {
    let mut reader = BufReader::new(std::fs::File::open(path)?);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let tokens: Vec<String> = line.split_whitespace().map(str::to_owned).collect();
    if tokens.first().map(String::as_str) != Some("QGF1") {
        return Err(QgError::Snapshot(format!(
            "{}: missing QGF1 magic",
            path.display()
        )));
    }
    Ok((tokens, reader))
}

fn parse<Tn: std::str::FromStr>(tok: &str, what: &str, path: &Path) -> Result<Tn> {
    tok.parse().map_err(|_| {
        QgError::Snapshot(format!("{}: bad {what} field `{tok}`", path.display()))
    })
}

/// Writes a boundary field snapshot: `QGF1 <n1> <n2>` + values.
pub fn write_boundary(path: &Path, f: &BoundaryField<f64>) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    let header = format!("QGF1 {} {}", f.grid().n1, f.grid().n2);
    write_payload(&mut w, &header, f.values())?;
    w.flush()?;
    Ok(())
}

pub fn read_boundary(path: &Path) -> Result<BoundaryField<f64>> {
    let (tokens, mut reader) = read_header(path)?;
    if tokens.len() != 3 {
        return Err(QgError::Snapshot(format!(
            "{}: boundary header needs `QGF1 n1 n2`",
            path.display()
        )));
    }
    let n1: usize = parse(&tokens[1], "n1", path)?;
    let n2: usize = parse(&tokens[2], "n2", path)?;
    let grid = TorusGrid2::new(n1, n2)?;
    let values = read_values(&mut reader, n1 * n2, path)?;
    BoundaryField::from_values(&grid, values)
}

/// Writes a slab field snapshot: `QGF1 <n1> <n2> <nz> <z_max>` + values.
pub fn write_slab(path: &Path, f: &SlabField<f64>) -> Result<()> {
    let g = f.grid();
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    let header = format!("QGF1 {} {} {} {}", g.torus.n1, g.torus.n2, g.nz, g.z_max);
    write_payload(&mut w, &header, f.values())?;
    w.flush()?;
    Ok(())
}

pub fn read_slab(path: &Path) -> Result<SlabField<f64>> {
    let (tokens, mut reader) = read_header(path)?;
    if tokens.len() != 5 {
        return Err(QgError::Snapshot(format!(
            "{}: slab header needs `QGF1 n1 n2 nz z_max`",
            path.display()
        )));
    }
    let n1: usize = parse(&tokens[1], "n1", path)?;
    let n2: usize = parse(&tokens[2], "n2", path)?;
    let nz: usize = parse(&tokens[3], "nz", path)?;
    let z_max: f64 = parse(&tokens[4], "z_max", path)?;
    let grid = SlabGrid3::new(TorusGrid2::new(n1, n2)?, nz, z_max)?;
    let values = read_values(&mut reader, n1 * n2 * nz, path)?;
    SlabField::from_values(&grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_roundtrip_is_bit_exact() {
        let g: TorusGrid2<f64> = TorusGrid2::new(16, 8).unwrap();
        let f = BoundaryField::from_fn(&g, |x, y| (x * 1.7).cos() + (y - 0.3).sin() * 1e-17);
        let dir = std::env::temp_dir().join("qgf1_test_boundary");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("f.qgf");
        write_boundary(&path, &f).unwrap();
        let back = read_boundary(&path).unwrap();
        assert_eq!(back.grid().n1, 16);
        for (a, b) in f.values().iter().zip(back.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn slab_roundtrip_is_bit_exact() {
        let g: SlabGrid3<f64> = SlabGrid3::new(TorusGrid2::new(8, 8).unwrap(), 9, 2.5).unwrap();
        let f = SlabField::from_fn(&g, |z, x, y| (-z).exp() * (x + 2.0 * y).sin());
        let dir = std::env::temp_dir().join("qgf1_test_slab");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("u.qgf");
        write_slab(&path, &f).unwrap();
        let back = read_slab(&path).unwrap();
        assert_eq!(back.grid().nz, 9);
        assert_eq!(back.grid().z_max, 2.5);
        for (a, b) in f.values().iter().zip(back.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn rejects_malformed_headers() {
        let dir = std::env::temp_dir().join("qgf1_test_bad");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.qgf");
        std::fs::write(&path, b"QGX1 8 8\n").unwrap();
        assert!(read_boundary(&path).is_err());
        std::fs::write(&path, b"QGF1 8\n").unwrap();
        assert!(read_boundary(&path).is_err());
    }
}
