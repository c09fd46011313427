//! CSV and Matrix Market output.
//!
//! Numbers are written in scientific notation with 17 significant digits so
//! that every `f64` round-trips and repeated runs are byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use faer::Mat;
use num_complex::Complex64;

use crate::analysis::{Comparison, SweepResult};
use crate::geometry::Incidence;
use crate::mor::{GreedyTrace, Strategy};
use crate::{Error, Result};

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `contents` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Simple CSV table: header plus rows of floats.
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.header.len(), "row width must match header");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.render().as_bytes())
    }
}

/// `iteration, sampled_frequency_hz, basis_size_total, max_residual`.
pub fn trace_table(trace: &GreedyTrace) -> CsvTable {
    let mut t = CsvTable::new([
        "iteration",
        "sampled_frequency_hz",
        "basis_size_total",
        "max_residual",
    ]);
    for e in &trace.entries {
        t.push(vec![
            e.iteration as f64,
            e.sampled_frequency_hz,
            e.basis_size_total as f64,
            e.max_residual,
        ]);
    }
    t
}

/// `f_hz, abs_Z_<label>, re_Z_<label>, im_Z_<label>, residual` for one sweep.
pub fn sweep_table(sweep: &SweepResult, label: &str) -> CsvTable {
    let mut t = CsvTable::new([
        "f_hz".to_string(),
        format!("abs_Z_{label}"),
        format!("re_Z_{label}"),
        format!("im_Z_{label}"),
        "residual".to_string(),
    ]);
    for r in &sweep.per_frequency {
        t.push(vec![r.f, r.z.norm(), r.z.re, r.z.im, r.residual]);
    }
    t
}

fn column_or_nan(
    cmp: &Comparison,
    strategy: Strategy,
    f: impl Fn(&crate::analysis::RomRun, usize) -> f64,
) -> Vec<f64> {
    let n = cmp.grid.len();
    match cmp.rom(strategy) {
        Some(run) => (0..n).map(|i| f(run, i)).collect(),
        None => vec![f64::NAN; n],
    }
}

/// `f_hz, abs_Z_fom, abs_Z_mono, abs_Z_block`.
pub fn impedance_table(cmp: &Comparison) -> CsvTable {
    let mono = column_or_nan(cmp, Strategy::Monolithic, |r, i| {
        r.sweep.per_frequency[i].z.norm()
    });
    let block = column_or_nan(cmp, Strategy::Block, |r, i| {
        r.sweep.per_frequency[i].z.norm()
    });
    let mut t = CsvTable::new(["f_hz", "abs_Z_fom", "abs_Z_mono", "abs_Z_block"]);
    for (i, rec) in cmp.fom.per_frequency.iter().enumerate() {
        t.push(vec![rec.f, rec.z.norm(), mono[i], block[i]]);
    }
    t
}

/// `f_hz, err_mono, err_block` for err-Z.
pub fn err_z_table(cmp: &Comparison) -> CsvTable {
    let mono = column_or_nan(cmp, Strategy::Monolithic, |r, i| r.metrics.err_z[i]);
    let block = column_or_nan(cmp, Strategy::Block, |r, i| r.metrics.err_z[i]);
    let mut t = CsvTable::new(["f_hz", "err_mono", "err_block"]);
    for (i, &f) in cmp.grid.frequencies().iter().enumerate() {
        t.push(vec![f, mono[i], block[i]]);
    }
    t
}

/// `f_hz, err_mono, err_block` for err-d.
pub fn err_d_table(cmp: &Comparison) -> CsvTable {
    let mono = column_or_nan(cmp, Strategy::Monolithic, |r, i| r.metrics.err_d[i].value());
    let block = column_or_nan(cmp, Strategy::Block, |r, i| r.metrics.err_d[i].value());
    let mut t = CsvTable::new(["f_hz", "err_mono", "err_block"]);
    for (i, &f) in cmp.grid.frequencies().iter().enumerate() {
        t.push(vec![f, mono[i], block[i]]);
    }
    t
}

/// Matrix Market `array real general` (column-major values).
pub fn matrix_market_real(m: &Mat<f64>) -> String {
    let mut out = String::from("%%MatrixMarket matrix array real general\n");
    writeln!(out, "{} {}", m.nrows(), m.ncols()).unwrap();
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            writeln!(out, "{}", fmt_f64(m[(r, c)])).unwrap();
        }
    }
    out
}

/// Matrix Market `array complex general`.
pub fn matrix_market_complex(m: &Mat<Complex64>) -> String {
    let mut out = String::from("%%MatrixMarket matrix array complex general\n");
    writeln!(out, "{} {}", m.nrows(), m.ncols()).unwrap();
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            let z = m[(r, c)];
            writeln!(out, "{} {}", fmt_f64(z.re), fmt_f64(z.im)).unwrap();
        }
    }
    out
}

/// Matrix Market `coordinate real general` for a diagonal matrix.
pub fn matrix_market_diagonal(diag: &[f64]) -> String {
    let n = diag.len();
    let mut out = String::from("%%MatrixMarket matrix coordinate real general\n");
    writeln!(out, "{n} {n} {n}").unwrap();
    for (i, &v) in diag.iter().enumerate() {
        writeln!(out, "{} {} {}", i + 1, i + 1, fmt_f64(v)).unwrap();
    }
    out
}

/// Matrix Market `coordinate integer general` for the incidence matrix.
pub fn matrix_market_incidence(s: &Incidence) -> String {
    let mut out = String::from("%%MatrixMarket matrix coordinate integer general\n");
    writeln!(out, "{} {} {}", s.n_rows(), s.n_cols(), s.nnz()).unwrap();
    for c in 0..s.n_cols() {
        let (from, to) = s.edge(c);
        let mut entries = [(from, -1), (to, 1)];
        entries.sort_unstable();
        for (r, v) in entries {
            writeln!(out, "{} {} {}", r + 1, c + 1, v).unwrap();
        }
    }
    out
}

/// A matrix read back from Matrix Market text; complex entries keep their
/// imaginary part, real and integer ones have it zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub values: Vec<Complex64>,
}

impl MarketMatrix {
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.values[c * self.nrows + r]
    }
}

/// Parses the array and coordinate forms written by this module.
pub fn parse_matrix_market(text: &str) -> Result<MarketMatrix> {
    let bad = |line: usize, msg: &str| {
        Error::InvalidArgument(format!("matrix market line {line}: {msg}"))
    };
    let mut lines = text.lines().enumerate();
    let (_, banner) = lines.next().ok_or_else(|| bad(1, "empty input"))?;
    let tokens: Vec<String> = banner.split_whitespace().map(str::to_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(bad(1, "bad banner"));
    }
    let coordinate = match tokens[2].as_str() {
        "coordinate" => true,
        "array" => false,
        _ => return Err(bad(1, "unknown format")),
    };
    let complex = tokens[3] == "complex";
    if tokens[4] != "general" {
        return Err(bad(1, "only general symmetry is supported"));
    }

    let mut data = lines.filter(|(_, l)| !l.trim_start().starts_with('%') && !l.trim().is_empty());
    let (ln, size) = data.next().ok_or_else(|| bad(2, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad(ln + 1, "bad size")))
        .collect::<Result<_>>()?;
    let (nrows, ncols) = match dims.as_slice() {
        [r, c] | [r, c, _] => (*r, *c),
        _ => return Err(bad(ln + 1, "bad size line")),
    };
    let mut values = vec![Complex64::new(0.0, 0.0); nrows * ncols];
    let parse = |ln: usize, t: &str| t.parse::<f64>().map_err(|_| bad(ln + 1, "bad number"));

    if coordinate {
        let nnz = *dims.get(2).ok_or_else(|| bad(ln + 1, "missing nnz"))?;
        for _ in 0..nnz {
            let (ln, line) = data.next().ok_or_else(|| bad(0, "truncated entries"))?;
            let t: Vec<&str> = line.split_whitespace().collect();
            let need = if complex { 4 } else { 3 };
            if t.len() != need {
                return Err(bad(ln + 1, "wrong entry width"));
            }
            let r: usize = t[0].parse().map_err(|_| bad(ln + 1, "bad row"))?;
            let c: usize = t[1].parse().map_err(|_| bad(ln + 1, "bad column"))?;
            if r == 0 || c == 0 || r > nrows || c > ncols {
                return Err(bad(ln + 1, "index out of range"));
            }
            let im = if complex { parse(ln, t[3])? } else { 0.0 };
            values[(c - 1) * nrows + (r - 1)] = Complex64::new(parse(ln, t[2])?, im);
        }
    } else {
        for v in values.iter_mut() {
            let (ln, line) = data.next().ok_or_else(|| bad(0, "truncated entries"))?;
            let t: Vec<&str> = line.split_whitespace().collect();
            *v = match (complex, t.as_slice()) {
                (false, [re]) => Complex64::new(parse(ln, re)?, 0.0),
                (true, [re, im]) => Complex64::new(parse(ln, re)?, parse(ln, im)?),
                _ => return Err(bad(ln + 1, "wrong entry width")),
            };
        }
    }
    Ok(MarketMatrix {
        nrows,
        ncols,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::discretize_dipole;
    use proptest::prelude::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_f64(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(fmt_f64(-2.5e-300), "-2.5000000000000000e-300");
    }

    #[test]
    fn csv_render() {
        let mut t = CsvTable::new(["a", "b"]);
        t.push(vec![1.0, 2.0]);
        assert_eq!(
            t.render(),
            "a,b\n1.0000000000000000e0,2.0000000000000000e0\n"
        );
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = std::env::temp_dir().join(format!("aefie-io-{}", std::process::id()));
        let path = dir.join("x.csv");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "two");
        let leftovers = fs::read_dir(&dir).unwrap().count();
        assert_eq!(leftovers, 1);
        fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn incidence_export() {
        let m = discretize_dipole(1.0, 1e-3, 1.68e-8, 3).unwrap();
        let text = matrix_market_incidence(&m.incidence());
        let parsed = parse_matrix_market(&text).unwrap();
        assert_eq!((parsed.nrows, parsed.ncols), (4, 3));
        assert_eq!(parsed.get(0, 0).re, -1.0);
        assert_eq!(parsed.get(1, 0).re, 1.0);
        assert_eq!(parsed.get(3, 2).re, 1.0);
        assert_eq!(parsed.get(3, 0).re, 0.0);
    }

    #[test]
    fn rejects_malformed_banner() {
        assert!(parse_matrix_market("%%MatrixMarket vector array real general\n1 1\n1\n").is_err());
        assert!(parse_matrix_market("").is_err());
    }

    proptest! {
        #[test]
        fn complex_array_round_trip(
            rows in 1usize..5,
            cols in 1usize..5,
            seed in proptest::collection::vec(-1e6f64..1e6, 50),
        ) {
            let m = Mat::from_fn(rows, cols, |r, c| Complex64::new(seed[r * 5 + c], seed[25 + r * 5 + c] * 1e-9));
            let parsed = parse_matrix_market(&matrix_market_complex(&m)).unwrap();
            for r in 0..rows {
                for c in 0..cols {
                    prop_assert_eq!(parsed.get(r, c), m[(r, c)]);
                }
            }
        }

        #[test]
        fn real_array_and_diagonal_round_trip(diag in proptest::collection::vec(-1e3f64..1e3, 1..6)) {
            let n = diag.len();
            let dense = Mat::from_fn(n, n, |r, c| if r == c { diag[r] } else { 0.0 });
            let a = parse_matrix_market(&matrix_market_real(&dense)).unwrap();
            let d = parse_matrix_market(&matrix_market_diagonal(&diag)).unwrap();
            prop_assert_eq!(a, d);
        }
    }
}
