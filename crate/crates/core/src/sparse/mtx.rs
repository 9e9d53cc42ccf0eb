//! Matrix Market coordinate format (ASCII, 1-based indices), plus the dense
//! `array` format for blocks of vectors.
//!
//! Writing always emits `coordinate real general` with every stored entry,
//! using the shortest representation that round-trips exactly. Reading accepts
//! `general` and `symmetric` real coordinate files.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sparse::{CsrMatrix, DenseMatrix, LowerFactor};

pub fn write_csr<T: Real, W: Write>(mut w: W, a: &CsrMatrix<T>) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.n(), a.n(), a.nnz())?;
    for i in 0..a.n() {
        let (cols, vals) = a.row(i);
        for (&j, v) in cols.iter().zip(vals) {
            writeln!(w, "{} {} {}", i + 1, j + 1, v)?;
        }
    }
    Ok(())
}

pub fn write_factor<T: Real, W: Write>(w: W, l: &LowerFactor<T>) -> Result<()> {
    write_csr(w, &l.to_csr())
}

pub fn read_csr<T: Real, R: BufRead>(r: R) -> Result<CsrMatrix<T>> {
    let mut lines = r.lines().enumerate();

    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty input".into(),
    })?;
    let header = header?.to_ascii_lowercase();
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(Error::Parse {
            line: 1,
            msg: "expected '%%MatrixMarket matrix coordinate real <symmetry>'".into(),
        });
    }
    if fields[2] != "coordinate" || fields[3] != "real" {
        return Err(Error::Parse {
            line: 1,
            msg: format!("unsupported format '{} {}'", fields[2], fields[3]),
        });
    }
    let symmetric = match fields[4] {
        "general" => false,
        "symmetric" => true,
        other => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("unsupported symmetry '{other}'"),
            })
        }
    };

    let mut size: Option<(usize, usize)> = None;
    let mut triplets = Vec::new();
    for (lineno, line) in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            line: lineno + 1,
            msg,
        };
        let tok: Vec<&str> = line.split_whitespace().collect();
        match size {
            None => {
                if tok.len() != 3 {
                    return Err(parse_err("size line needs 'rows cols nnz'".into()));
                }
                let nums: Vec<usize> = tok
                    .iter()
                    .map(|t| {
                        t.parse()
                            .map_err(|_| parse_err(format!("bad integer '{t}'")))
                    })
                    .collect::<Result<_>>()?;
                if nums[0] != nums[1] {
                    return Err(parse_err("only square matrices are supported".into()));
                }
                size = Some((nums[0], nums[2]));
                triplets.reserve(nums[2] * if symmetric { 2 } else { 1 });
            }
            Some((n, _)) => {
                if tok.len() != 3 {
                    return Err(parse_err("entry line needs 'row col value'".into()));
                }
                let idx = |t: &str| -> Result<usize> {
                    let k: usize = t
                        .parse()
                        .map_err(|_| parse_err(format!("bad index '{t}'")))?;
                    if k == 0 || k > n {
                        return Err(parse_err(format!("index {k} outside 1..={n}")));
                    }
                    Ok(k - 1)
                };
                let (i, j) = (idx(tok[0])?, idx(tok[1])?);
                let v: T = tok[2]
                    .parse()
                    .map_err(|_| parse_err(format!("bad value '{}'", tok[2])))?;
                triplets.push((i, j, v));
                if symmetric && i != j {
                    triplets.push((j, i, v));
                }
            }
        }
    }
    let (n, nnz) = size.ok_or(Error::Parse {
        line: 1,
        msg: "missing size line".into(),
    })?;
    let stored = if symmetric {
        triplets.iter().filter(|t| t.0 >= t.1).count()
    } else {
        triplets.len()
    };
    if stored != nnz {
        return Err(Error::Parse {
            line: 2,
            msg: format!("header announces {nnz} entries, found {stored}"),
        });
    }
    CsrMatrix::from_triplets(n, &triplets)
}

pub fn read_factor<T: Real, R: BufRead>(r: R) -> Result<LowerFactor<T>> {
    let a = read_csr(r)?;
    if (0..a.n()).any(|i| a.row(i).0.iter().any(|&j| j > i)) {
        return Err(Error::InvalidStructure(
            "factor file has entries above the diagonal".into(),
        ));
    }
    LowerFactor::new(
        a.n(),
        a.row_ptr().to_vec(),
        a.col_idx().to_vec(),
        a.values().to_vec(),
    )
}

/// `array real general`: a size line, then values in column-major order.
pub fn write_dense<T: Real, W: Write>(mut w: W, m: &DenseMatrix<T>) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} {}", m.rows(), m.cols())?;
    for j in 0..m.cols() {
        for i in 0..m.rows() {
            writeln!(w, "{}", m[(i, j)])?;
        }
    }
    Ok(())
}

pub fn read_dense<T: Real, R: BufRead>(r: R) -> Result<DenseMatrix<T>> {
    let mut lines = r.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty input".into(),
    })?;
    let header = header?.to_ascii_lowercase();
    if header.split_whitespace().collect::<Vec<_>>()
        != ["%%matrixmarket", "matrix", "array", "real", "general"]
    {
        return Err(Error::Parse {
            line: 1,
            msg: "expected '%%MatrixMarket matrix array real general'".into(),
        });
    }
    let mut size: Option<(usize, usize)> = None;
    let mut values = Vec::new();
    for (lineno, line) in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            line: lineno + 1,
            msg,
        };
        match size {
            None => {
                let nums: Vec<usize> = line
                    .split_whitespace()
                    .map(|t| {
                        t.parse()
                            .map_err(|_| parse_err(format!("bad integer '{t}'")))
                    })
                    .collect::<Result<_>>()?;
                if nums.len() != 2 {
                    return Err(parse_err("size line needs 'rows cols'".into()));
                }
                size = Some((nums[0], nums[1]));
                values.reserve(nums[0] * nums[1]);
            }
            Some(_) => values.push(
                line.parse::<T>()
                    .map_err(|_| parse_err(format!("bad value '{line}'")))?,
            ),
        }
    }
    let (rows, cols) = size.ok_or(Error::Parse {
        line: 1,
        msg: "missing size line".into(),
    })?;
    if values.len() != rows * cols {
        return Err(Error::Parse {
            line: 2,
            msg: format!("expected {} values, found {}", rows * cols, values.len()),
        });
    }
    Ok(DenseMatrix::from_fn(rows, cols, |i, j| {
        values[j * rows + i]
    }))
}
