//! Matrix and mask CSV files.
//!
//! Matrix files hold one matrix row per line, comma separated; an empty
//! field or `NaN` marks a missing entry. Mask files hold `0`/`1` cells in
//! the same layout. Neither format has a header unless the caller asks to
//! skip one line.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use csv::{ReaderBuilder, Trim};

use crate::error::{CompletionError, Result};
use crate::matrix::{Grid, Mask, MaskedMatrix};

fn records<R: Read>(reader: R, header: bool) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut rdr = ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        out.push((line, rec));
    }
    Ok(out)
}

fn check_width(rows: &[(usize, csv::StringRecord)]) -> Result<usize> {
    let width = rows.first().map_or(0, |r| r.1.len());
    if let Some((line, rec)) = rows.iter().find(|r| r.1.len() != width) {
        return Err(CompletionError::Parse {
            line: *line,
            msg: format!("expected {width} fields, found {}", rec.len()),
        });
    }
    Ok(width)
}

pub fn parse_matrix<R: Read>(reader: R, header: bool) -> Result<MaskedMatrix> {
    let rows = records(reader, header)?;
    let width = check_width(&rows)?;
    let mut cells = Vec::with_capacity(rows.len());
    for (line, rec) in &rows {
        let row = rec
            .iter()
            .map(|field| {
                if field.is_empty() || field.eq_ignore_ascii_case("nan") {
                    return Ok(None);
                }
                match field.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(Some(v)),
                    _ => Err(CompletionError::Parse {
                        line: *line,
                        msg: format!("`{field}` is not a finite number"),
                    }),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        cells.push(row);
    }
    debug_assert!(cells.iter().all(|r| r.len() == width));
    MaskedMatrix::from_rows(&cells)
}

pub fn read_matrix(path: impl AsRef<Path>, header: bool) -> Result<MaskedMatrix> {
    parse_matrix(File::open(path)?, header)
}

pub fn parse_mask<R: Read>(reader: R, header: bool) -> Result<Mask> {
    let rows = records(reader, header)?;
    let width = check_width(&rows)?;
    let mut bits = Vec::with_capacity(rows.len() * width);
    for (line, rec) in &rows {
        for field in rec.iter() {
            bits.push(match field {
                "1" => true,
                "0" => false,
                other => {
                    return Err(CompletionError::Parse {
                        line: *line,
                        msg: format!("mask cell `{other}` is not 0 or 1"),
                    })
                }
            });
        }
    }
    Mask::from_row_major(rows.len(), width, bits)
}

pub fn read_mask(path: impl AsRef<Path>, header: bool) -> Result<Mask> {
    parse_mask(File::open(path)?, header)
}

/// Writes `values`, with `NaN` at cells where `observed` is false.
/// Numbers use the shortest representation that parses back exactly.
pub fn write_matrix_to<W: Write>(mut w: W, values: &Grid, observed: Option<&Mask>) -> Result<()> {
    for i in 0..values.nrows() {
        let line: Vec<String> = (0..values.ncols())
            .map(|j| match observed {
                Some(m) if !m.get(i, j) => "NaN".to_string(),
                _ => format!("{}", values[(i, j)]),
            })
            .collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_masked(path: impl AsRef<Path>, matrix: &MaskedMatrix) -> Result<()> {
    write_matrix_to(BufWriter::new(File::create(path)?), matrix.zero_filled(), Some(matrix.mask()))
}

pub fn write_grid(path: impl AsRef<Path>, values: &Grid) -> Result<()> {
    write_matrix_to(BufWriter::new(File::create(path)?), values, None)
}

pub fn write_mask_to<W: Write>(mut w: W, mask: &Mask) -> Result<()> {
    for i in 0..mask.rows() {
        let line: Vec<&str> = (0..mask.cols()).map(|j| if mask.get(i, j) { "1" } else { "0" }).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_mask(path: impl AsRef<Path>, mask: &Mask) -> Result<()> {
    write_mask_to(BufWriter::new(File::create(path)?), mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_missing_markers() {
        let text = "1.5,,3\nNaN,2,nan\n";
        let m = parse_matrix(text.as_bytes(), false).unwrap();
        assert_eq!(m.shape(), (2, 3));
        assert_eq!(m.get(0, 0), Some(1.5));
        assert_eq!(m.get(0, 1), None);
        assert_eq!(m.get(1, 0), None);
        assert_eq!(m.get(1, 1), Some(2.0));
        assert_eq!(m.get(1, 2), None);
    }

    #[test]
    fn header_is_skipped_on_request() {
        let text = "a,b\n1,2\n";
        assert!(parse_matrix(text.as_bytes(), false).is_err());
        let m = parse_matrix(text.as_bytes(), true).unwrap();
        assert_eq!(m.shape(), (1, 2));
    }

    #[test]
    fn ragged_and_garbage_rejected() {
        assert!(matches!(
            parse_matrix("1,2\n3\n".as_bytes(), false),
            Err(CompletionError::Parse { line: 2, .. })
        ));
        assert!(parse_matrix("1,x\n".as_bytes(), false).is_err());
        assert!(parse_matrix("1,inf\n".as_bytes(), false).is_err());
        assert!(parse_mask("1,2\n".as_bytes(), false).is_err());
    }

    #[test]
    fn mask_roundtrip() {
        let mask = Mask::from_fn(3, 4, |i, j| (i * j) % 3 == 1);
        let mut buf = Vec::new();
        write_mask_to(&mut buf, &mask).unwrap();
        assert_eq!(parse_mask(buf.as_slice(), false).unwrap(), mask);
    }

    proptest! {
        #[test]
        fn matrix_roundtrip(cells in prop::collection::vec(prop::option::of(-1e6..1e6f64), 12)) {
            let rows: Vec<Vec<Option<f64>>> = cells.chunks(4).map(|c| c.to_vec()).collect();
            let m = MaskedMatrix::from_rows(&rows).unwrap();
            let mut buf = Vec::new();
            write_matrix_to(&mut buf, m.zero_filled(), Some(m.mask())).unwrap();
            prop_assert_eq!(parse_matrix(buf.as_slice(), false).unwrap(), m);
        }
    }
}
