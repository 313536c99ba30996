//! Artifact writers (CSV, PGM) and the small CSV readers used by the
//! matrix-vector primitive.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! repeated run produces byte-identical artifacts.

use std::io::{self, BufRead, Write};

/// Map a value into 0..=255 with linear scaling between display bounds.
pub fn scale_to_byte(value: f64, lo: f64, hi: f64) -> u8 {
    if hi <= lo {
        return 0;
    }
    let t = (value - lo) / (hi - lo);
    (t.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// 8-bit binary PGM (P5) with linear scaling between `lo` and `hi`.
pub fn write_pgm<W: Write>(
    mut w: W,
    values: &[f64],
    width: usize,
    height: usize,
    lo: f64,
    hi: f64,
) -> io::Result<()> {
    assert_eq!(values.len(), width * height, "PGM needs width * height values");
    write!(w, "P5\n{width} {height}\n255\n")?;
    let bytes: Vec<u8> = values.iter().map(|&v| scale_to_byte(v, lo, hi)).collect();
    w.write_all(&bytes)
}

/// Flat conductance snapshot: `device_id,conductance_uS`.
pub fn write_conductance_csv<W: Write>(mut w: W, values: &[f64]) -> io::Result<()> {
    writeln!(w, "device_id,conductance_uS")?;
    for (id, v) in values.iter().enumerate() {
        writeln!(w, "{id},{v}")?;
    }
    Ok(())
}

/// Label export: `process_id,label` with 1 for correlated.
pub fn write_labels_csv<W: Write>(mut w: W, labels: &[bool]) -> io::Result<()> {
    writeln!(w, "process_id,label")?;
    for (id, &l) in labels.iter().enumerate() {
        writeln!(w, "{id},{}", l as u8)?;
    }
    Ok(())
}

/// Weight export: `process_id,weight`.
pub fn write_weights_csv<W: Write>(mut w: W, weights: &[f64]) -> io::Result<()> {
    writeln!(w, "process_id,weight")?;
    for (id, v) in weights.iter().enumerate() {
        writeln!(w, "{id},{v}")?;
    }
    Ok(())
}

/// Dense covariance matrix export, one row per line.
pub fn write_matrix_csv<W: Write>(mut w: W, rows: &[Vec<f64>]) -> io::Result<()> {
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// Accumulation curves: `pulse_index` then one mean-conductance column
/// per SET current.
pub fn write_accumulation_csv<W: Write>(
    mut w: W,
    currents_ua: &[f64],
    columns: &[Vec<f64>],
) -> io::Result<()> {
    assert_eq!(currents_ua.len(), columns.len());
    let header: Vec<String> = std::iter::once("pulse_index".to_string())
        .chain(currents_ua.iter().map(|c| format!("g_mean_uS_at_{c}uA")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    let n_rows = columns.first().map_or(0, |c| c.len());
    for row in 0..n_rows {
        let mut line = row.to_string();
        for col in columns {
            line.push(',');
            line.push_str(&col[row].to_string());
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

#[derive(Debug)]
pub enum CsvError {
    Io(io::Error),
    BadNumber { line: usize, field: usize },
    RaggedRow { line: usize },
    Empty,
}

impl std::fmt::Display for CsvError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CsvError::Io(e) => write!(f, "csv: {e}"),
            CsvError::BadNumber { line, field } => {
                write!(f, "csv: bad number at line {line}, field {field}")
            }
            CsvError::RaggedRow { line } => write!(f, "csv: inconsistent row width at line {line}"),
            CsvError::Empty => write!(f, "csv: no data rows"),
        }
    }
}

impl std::error::Error for CsvError {}

impl From<io::Error> for CsvError {
    fn from(e: io::Error) -> Self {
        CsvError::Io(e)
    }
}

/// Dense numeric matrix: comma-separated values, one row per line.
pub fn read_matrix_csv<R: BufRead>(reader: R) -> Result<Vec<Vec<f64>>, CsvError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut row = Vec::new();
        for (f, field) in trimmed.split(',').enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| CsvError::BadNumber {
                line: idx + 1,
                field: f + 1,
            })?;
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(CsvError::RaggedRow { line: idx + 1 });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CsvError::Empty);
    }
    Ok(rows)
}

/// Numeric vector: one value per line (or a single CSV row).
pub fn read_vector_csv<R: BufRead>(reader: R) -> Result<Vec<f64>, CsvError> {
    let rows = read_matrix_csv(reader)?;
    if rows.len() == 1 {
        return Ok(rows.into_iter().next().unwrap());
    }
    let mut out = Vec::with_capacity(rows.len());
    for (idx, row) in rows.iter().enumerate() {
        if row.len() != 1 {
            return Err(CsvError::RaggedRow { line: idx + 1 });
        }
        out.push(row[0]);
    }
    Ok(out)
}

pub fn write_vector_csv<W: Write>(mut w: W, values: &[f64]) -> io::Result<()> {
    for v in values {
        writeln!(w, "{v}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn pgm_scales_linearly_and_clamps() {
        assert_eq!(scale_to_byte(0.0, 0.0, 10.0), 0);
        assert_eq!(scale_to_byte(10.0, 0.0, 10.0), 255);
        assert_eq!(scale_to_byte(5.0, 0.0, 10.0), 128);
        assert_eq!(scale_to_byte(-4.0, 0.0, 10.0), 0);
        assert_eq!(scale_to_byte(40.0, 0.0, 10.0), 255);
    }

    #[test]
    fn pgm_layout_is_header_then_packed_bytes() {
        let mut out = Vec::new();
        write_pgm(&mut out, &[0.0, 5.0, 10.0, 2.5], 2, 2, 0.0, 10.0).unwrap();
        assert!(out.starts_with(b"P5\n2 2\n255\n"));
        assert_eq!(&out[out.len() - 4..], &[0, 128, 255, 64]);
    }

    #[test]
    fn matrix_round_trip() {
        let rows = vec![vec![1.0, 2.5], vec![0.125, 4.0]];
        let mut buf = Vec::new();
        write_matrix_csv(&mut buf, &rows).unwrap();
        let parsed = read_matrix_csv(Cursor::new(&buf)).unwrap();
        assert_eq!(parsed, rows);
    }

    #[test]
    fn vector_reads_both_orientations() {
        assert_eq!(
            read_vector_csv(Cursor::new(b"1.0\n2.0\n3.0\n")).unwrap(),
            vec![1.0, 2.0, 3.0]
        );
        assert_eq!(
            read_vector_csv(Cursor::new(b"1.0,2.0,3.0\n")).unwrap(),
            vec![1.0, 2.0, 3.0]
        );
    }

    #[test]
    fn ragged_matrix_is_rejected() {
        assert!(matches!(
            read_matrix_csv(Cursor::new(b"1,2\n3\n")),
            Err(CsvError::RaggedRow { line: 2 })
        ));
    }

    #[test]
    fn conductance_csv_shape() {
        let mut buf = Vec::new();
        write_conductance_csv(&mut buf, &[0.5, 1.25]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "device_id,conductance_uS\n0,0.5\n1,1.25\n");
    }
}
