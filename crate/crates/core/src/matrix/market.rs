use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{MatrixError, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    General,
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Pattern,
    Real,
    Integer,
}

fn parse_err(line: usize, msg: impl Into<String>) -> MatrixError {
    MatrixError::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_header(line_no: usize, line: &str) -> Result<(Field, Symmetry), MatrixError> {
    let tokens: Vec<String> = line.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(line_no, "expected '%%MatrixMarket matrix ...' header"));
    }
    if tokens[2] != "coordinate" {
        return Err(parse_err(
            line_no,
            format!("unsupported storage '{}', only coordinate", tokens[2]),
        ));
    }
    let field = match tokens[3].as_str() {
        "pattern" => Field::Pattern,
        "real" => Field::Real,
        "integer" => Field::Integer,
        other => return Err(parse_err(line_no, format!("unsupported field '{other}'"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(parse_err(line_no, format!("unsupported symmetry '{other}'"))),
    };
    Ok((field, symmetry))
}

/// Parses a Matrix Market coordinate stream into a pattern-only CSR matrix.
///
/// Symmetric inputs are expanded to the full pattern and stored values are
/// dropped. Duplicate coordinates (including ones produced by symmetric
/// expansion) are rejected with the offending line number.
pub fn parse_matrix_market<R: Read>(
    reader: R,
    name: impl Into<String>,
) -> Result<SparseMatrix, MatrixError> {
    let reader = BufReader::new(reader);
    let mut header: Option<(Field, Symmetry)> = None;
    let mut size: Option<(usize, usize, usize)> = None;
    let mut entries: Vec<(usize, usize, usize)> = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| MatrixError::Io(e.to_string()))?;
        if header.is_none() {
            header = Some(parse_header(line_no, &line)?);
            continue;
        }
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let parse_usize = |s: &str, what: &str| {
            s.parse::<usize>()
                .map_err(|_| parse_err(line_no, format!("invalid {what} '{s}'")))
        };
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(parse_err(line_no, "size line must be 'rows cols nnz'"));
                }
                let rows = parse_usize(fields[0], "row count")?;
                let cols = parse_usize(fields[1], "column count")?;
                let nnz = parse_usize(fields[2], "entry count")?;
                size = Some((rows, cols, nnz));
                entries.reserve(nnz);
            }
            Some((rows, cols, nnz)) => {
                let (field, symmetry) = header.expect("header parsed");
                let expected = if field == Field::Pattern { 2 } else { 3 };
                if fields.len() != expected {
                    return Err(parse_err(
                        line_no,
                        format!("expected {expected} fields, found {}", fields.len()),
                    ));
                }
                if entries.len() == nnz {
                    return Err(parse_err(line_no, "more entries than declared"));
                }
                let i = parse_usize(fields[0], "row index")?;
                let j = parse_usize(fields[1], "column index")?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(parse_err(
                        line_no,
                        format!("index ({i}, {j}) out of range for {rows}x{cols}"),
                    ));
                }
                match field {
                    Field::Real => {
                        fields[2]
                            .parse::<f64>()
                            .map_err(|_| parse_err(line_no, "invalid real value"))?;
                    }
                    Field::Integer => {
                        fields[2]
                            .parse::<i64>()
                            .map_err(|_| parse_err(line_no, "invalid integer value"))?;
                    }
                    Field::Pattern => {}
                }
                if symmetry == Symmetry::Symmetric && rows != cols {
                    return Err(parse_err(line_no, "symmetric matrix must be square"));
                }
                entries.push((i - 1, j - 1, line_no));
            }
        }
    }

    let (field_symmetry, (rows, cols, nnz)) = match (header, size) {
        (Some(h), Some(s)) => (h, s),
        (None, _) => return Err(parse_err(1, "empty stream")),
        (Some(_), None) => return Err(parse_err(1, "missing size line")),
    };
    if entries.len() != nnz {
        return Err(parse_err(
            entries.last().map_or(1, |e| e.2),
            format!("declared {nnz} entries, found {}", entries.len()),
        ));
    }

    let mut coords: Vec<(usize, usize, usize)> = Vec::with_capacity(entries.len() * 2);
    for &(i, j, line_no) in &entries {
        coords.push((i, j, line_no));
        if field_symmetry.1 == Symmetry::Symmetric && i != j {
            coords.push((j, i, line_no));
        }
    }
    coords.sort_unstable();
    if let Some(w) = coords.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
        let line = w[0].2.max(w[1].2);
        return Err(parse_err(
            line,
            format!("duplicate entry ({}, {})", w[0].0 + 1, w[0].1 + 1),
        ));
    }
    let pairs: Vec<(usize, usize)> = coords.into_iter().map(|(i, j, _)| (i, j)).collect();
    SparseMatrix::from_sorted_unique(name, rows, cols, &pairs)
}

pub fn read_matrix_market_file(path: &Path) -> Result<SparseMatrix, MatrixError> {
    let file = std::fs::File::open(path)
        .map_err(|e| MatrixError::Io(format!("{}: {e}", path.display())))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_matrix_market(file, name)
}

/// Writes the pattern as a general coordinate file with 1-based indices.
pub fn write_matrix_market<W: Write>(m: &SparseMatrix, mut w: W) -> std::io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate pattern general")?;
    writeln!(w, "% {}", m.name())?;
    writeln!(w, "{} {} {}", m.rows(), m.cols(), m.nnz())?;
    for (r, c) in m.coords() {
        writeln!(w, "{} {}", r + 1, c + 1)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<SparseMatrix, MatrixError> {
        parse_matrix_market(text.as_bytes(), "t")
    }

    #[test]
    fn identity_pattern() {
        let m = parse(
            "%%MatrixMarket matrix coordinate pattern general\n% comment\n3 3 3\n1 1\n2 2\n3 3\n",
        )
        .unwrap();
        assert_eq!((m.rows(), m.cols(), m.nnz()), (3, 3, 3));
        assert_eq!(m.col_idx(), &[0, 1, 2]);
    }

    #[test]
    fn symmetric_expansion() {
        let m = parse("%%MatrixMarket matrix coordinate real symmetric\n3 3 1\n2 1 4.5\n").unwrap();
        assert_eq!(m.nnz(), 2);
        let coords: Vec<_> = m.coords().collect();
        assert!(coords.contains(&(1, 0)) && coords.contains(&(0, 1)));
    }

    #[test]
    fn symmetric_diagonal_not_doubled() {
        let m = parse("%%MatrixMarket matrix coordinate integer symmetric\n2 2 2\n1 1 3\n2 1 7\n")
            .unwrap();
        assert_eq!(m.nnz(), 3);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad_header = parse("%%MatrixMarket matrix array real general\n2 2\n");
        assert!(matches!(bad_header, Err(MatrixError::Parse { line: 1, .. })));

        let out_of_range = parse("%%MatrixMarket matrix coordinate pattern general\n2 2 1\n3 1\n");
        assert!(matches!(out_of_range, Err(MatrixError::Parse { line: 3, .. })));

        let dup = parse("%%MatrixMarket matrix coordinate pattern general\n2 2 2\n1 1\n1 1\n");
        assert!(matches!(dup, Err(MatrixError::Parse { line: 4, .. })));

        let sym_dup =
            parse("%%MatrixMarket matrix coordinate pattern symmetric\n2 2 2\n2 1\n1 2\n");
        assert!(matches!(sym_dup, Err(MatrixError::Parse { line: 4, .. })));

        let short = parse("%%MatrixMarket matrix coordinate pattern general\n2 2 2\n1 1\n");
        assert!(matches!(short, Err(MatrixError::Parse { .. })));

        let bad_value = parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 x\n");
        assert!(matches!(bad_value, Err(MatrixError::Parse { line: 3, .. })));
    }

    #[test]
    fn write_then_parse() {
        let m = SparseMatrix::from_coords("w", 3, 4, &[(0, 3), (2, 0), (2, 1)]).unwrap();
        let mut buf = Vec::new();
        write_matrix_market(&m, &mut buf).unwrap();
        let back = parse_matrix_market(buf.as_slice(), "w").unwrap();
        assert_eq!(back, m);
    }
}
