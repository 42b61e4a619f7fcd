//! Matrix Market coordinate reader for symmetric sparsity patterns.
//!
//! Values are ignored; only the positions matter. The lower triangle is
//! kept as-is and upper-triangle entries are mirrored, with the count of
//! mirrored entries reported so callers can warn about them.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

#[derive(Debug)]
pub struct MmPattern {
    pub n: usize,
    pub entries: Vec<(usize, usize)>,
    pub mirrored: usize,
}

pub fn read_pattern(path: &Path) -> Result<MmPattern, String> {
    let file = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_pattern(BufReader::new(file)).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn parse_pattern(reader: impl BufRead) -> Result<MmPattern, String> {
    let mut lines = reader.lines().enumerate();

    let (lineno, header) = match lines.next() {
        Some((i, Ok(l))) => (i + 1, l),
        Some((i, Err(e))) => return Err(format!("line {}: {e}", i + 1)),
        None => return Err("empty file".to_string()),
    };
    parse_header(&header).map_err(|e| format!("line {lineno}: {e}"))?;

    let mut size: Option<(usize, usize)> = None;
    let mut entries = Vec::new();
    let mut mirrored = 0usize;
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line.map_err(|e| format!("line {lineno}: {e}"))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        match size {
            None => {
                let rows: usize = next_number(&mut fields, lineno, "row count")?;
                let cols: usize = next_number(&mut fields, lineno, "column count")?;
                let nnz: usize = next_number(&mut fields, lineno, "entry count")?;
                if rows != cols {
                    return Err(format!("line {lineno}: matrix is {rows}x{cols}, not square"));
                }
                size = Some((rows, nnz));
                entries.reserve(nnz);
            }
            Some((n, nnz)) => {
                if entries.len() == nnz {
                    return Err(format!("line {lineno}: more than the declared {nnz} entries"));
                }
                let i: usize = next_number(&mut fields, lineno, "row index")?;
                let j: usize = next_number(&mut fields, lineno, "column index")?;
                if i < 1 || i > n || j < 1 || j > n {
                    return Err(format!("line {lineno}: index ({i}, {j}) outside 1..={n}"));
                }
                let (r, c) = if i < j {
                    mirrored += 1;
                    (j - 1, i - 1)
                } else {
                    (i - 1, j - 1)
                };
                entries.push((r, c));
            }
        }
    }

    let Some((n, nnz)) = size else {
        return Err("missing size line".to_string());
    };
    if entries.len() != nnz {
        return Err(format!("declared {nnz} entries, found {}", entries.len()));
    }
    Ok(MmPattern { n, entries, mirrored })
}

fn parse_header(header: &str) -> Result<(), String> {
    let fields: Vec<String> = header.split_whitespace().map(str::to_lowercase).collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" {
        return Err("expected '%%MatrixMarket matrix coordinate <field> <symmetry>'".to_string());
    }
    if fields[1] != "matrix" {
        return Err(format!("unsupported object '{}'", fields[1]));
    }
    if fields[2] != "coordinate" {
        return Err(format!("unsupported format '{}', only coordinate is read", fields[2]));
    }
    if !matches!(fields[3].as_str(), "pattern" | "real" | "integer") {
        return Err(format!("unsupported field '{}'", fields[3]));
    }
    if fields[4] != "symmetric" {
        return Err(format!("symmetry is '{}', only symmetric matrices are read", fields[4]));
    }
    Ok(())
}

fn next_number<'a>(
    fields: &mut impl Iterator<Item = &'a str>,
    lineno: usize,
    what: &str,
) -> Result<usize, String> {
    let tok = fields
        .next()
        .ok_or_else(|| format!("line {lineno}: missing {what}"))?;
    tok.parse()
        .map_err(|_| format!("line {lineno}: bad {what} '{tok}'"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn parse(text: &str) -> Result<MmPattern, String> {
        parse_pattern(Cursor::new(text))
    }

    #[test]
    fn reads_a_pattern_file() {
        let text = "%%MatrixMarket matrix coordinate pattern symmetric\n\
                    % comment\n\
                    4 4 4\n\
                    1 1\n\
                    3 1\n\
                    4 3\n\
                    2 2\n";
        let p = parse(text).unwrap();
        assert_eq!(p.n, 4);
        assert_eq!(p.entries, vec![(0, 0), (2, 0), (3, 2), (1, 1)]);
        assert_eq!(p.mirrored, 0);
    }

    #[test]
    fn mirrors_upper_triangle_entries() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n\
                    3 3 2\n\
                    1 3 1.5\n\
                    2 1 0.5\n";
        let p = parse(text).unwrap();
        assert_eq!(p.entries, vec![(2, 0), (1, 0)]);
        assert_eq!(p.mirrored, 1);
    }

    #[test]
    fn rejects_general_symmetry() {
        let text = "%%MatrixMarket matrix coordinate real general\n3 3 1\n1 1 2.0\n";
        let err = parse(text).unwrap_err();
        assert!(err.contains("line 1"), "{err}");
        assert!(err.contains("symmetric"), "{err}");
    }

    #[test]
    fn reports_bad_entries_with_line_numbers() {
        let text = "%%MatrixMarket matrix coordinate pattern symmetric\n3 3 2\n1 1\n9 1\n";
        let err = parse(text).unwrap_err();
        assert!(err.contains("line 4"), "{err}");

        let text = "%%MatrixMarket matrix coordinate pattern symmetric\n3 3 2\n1 1\nfoo 1\n";
        let err = parse(text).unwrap_err();
        assert!(err.contains("line 4") && err.contains("row index"), "{err}");

        let text = "%%MatrixMarket matrix coordinate pattern symmetric\n3 4 1\n1 1\n";
        let err = parse(text).unwrap_err();
        assert!(err.contains("not square"), "{err}");
    }

    #[test]
    fn entry_count_must_match_declaration() {
        let text = "%%MatrixMarket matrix coordinate pattern symmetric\n3 3 2\n1 1\n";
        let err = parse(text).unwrap_err();
        assert!(err.contains("declared 2"), "{err}");

        let text = "%%MatrixMarket matrix coordinate pattern symmetric\n3 3 1\n1 1\n2 1\n";
        let err = parse(text).unwrap_err();
        assert!(err.contains("more than the declared"), "{err}");
    }
}
