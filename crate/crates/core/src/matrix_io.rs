//! Plain-text complex matrix format: a `rows cols` header followed by one
//! `row col re im` line per nonzero entry (1-based indices). Lines starting
//! with `%` are comments.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::c64;
use crate::error::{Error, Result};
use crate::linalg::CMat;

pub fn write_matrix<W: Write>(out: &mut W, m: &CMat) -> Result<()> {
    let mut buf = String::new();
    writeln!(buf, "% complex coordinate").unwrap();
    writeln!(buf, "{} {}", m.nrows(), m.ncols()).unwrap();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            if z != c64::ZERO {
                // `{:e}` on f64 is the shortest round-trip representation.
                writeln!(buf, "{} {} {:e} {:e}", i + 1, j + 1, z.re, z.im).unwrap();
            }
        }
    }
    out.write_all(buf.as_bytes())?;
    Ok(())
}

pub fn read_matrix<R: BufRead>(input: R) -> Result<CMat> {
    let mut lines = input
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty() && !l.starts_with('%')));

    let bad = |line: usize, what: &str| Error::Parse(format!("line {}: {what}", line + 1));

    let (lno, header) = lines
        .next()
        .ok_or_else(|| Error::Parse("missing size header".into()))?;
    let header = header?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad(lno, "bad size header")))
        .collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(bad(lno, "size header needs two integers"));
    };

    let mut m = CMat::zeros(rows, cols);
    for (lno, line) in lines {
        let line = line?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [i, j, re, im] = fields[..] else {
            return Err(bad(lno, "expected `row col re im`"));
        };
        let i: usize = i.parse().map_err(|_| bad(lno, "bad row index"))?;
        let j: usize = j.parse().map_err(|_| bad(lno, "bad column index"))?;
        if i == 0 || j == 0 || i > rows || j > cols {
            return Err(bad(lno, "index out of range"));
        }
        let re: f64 = re.parse().map_err(|_| bad(lno, "bad real part"))?;
        let im: f64 = im.parse().map_err(|_| bad(lno, "bad imaginary part"))?;
        m[(i - 1, j - 1)] = c64::new(re, im);
    }
    Ok(m)
}

pub fn save_matrix(path: &std::path::Path, m: &CMat) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_matrix(&mut f, m)?;
    f.flush()?;
    Ok(())
}

pub fn load_matrix(path: &std::path::Path) -> Result<CMat> {
    read_matrix(std::io::BufReader::new(std::fs::File::open(path)?))
}
