//! Text serialization for problem instances: MatrixMarket dense and
//! coordinate formats, an SDPA-like sparse single-block format for SDP
//! data, and completion instances with their ground-truth factors.
//!
//! Floats are written with the shortest representation that parses back to
//! the identical value, so write/read round-trips are exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2};

use crate::pfam::SdpProblem;
use crate::problems::completion::{McInstance, McTruth};
use crate::problems::nce::NceInstance;
use crate::problems::sdp::DenseConstraintSdp;
use crate::{Error, Result};

const MM_DENSE_HEADER: &str = "%%MatrixMarket matrix array real general";
const MM_COORD_HEADER: &str = "%%MatrixMarket matrix coordinate real general";

fn parse_tok<T: FromStr>(tok: &str, what: &str) -> Result<T> {
    tok.parse::<T>()
        .map_err(|_| Error::Parse(format!("bad {what}: {tok:?}")))
}

/// Lines with content, comments stripped, in order; the header line is
/// returned separately.
fn content_lines(path: &Path) -> Result<(String, Vec<String>)> {
    let reader = BufReader::new(File::open(path)?);
    let mut header = None;
    let mut body = Vec::new();
    let mut comments = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if header.is_none() {
            header = Some(trimmed.to_string());
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('%') {
            comments.push(rest.trim().to_string());
            continue;
        }
        body.push(trimmed.to_string());
    }
    let header = header.ok_or_else(|| Error::Parse("empty file".into()))?;
    // Keep comments accessible to metadata parsers by prefixing them back.
    let mut all = comments
        .into_iter()
        .map(|c| format!("%{c}"))
        .collect::<Vec<_>>();
    all.extend(body);
    Ok((header, all))
}

/// Write a dense matrix in MatrixMarket array format (column-major).
pub fn write_matrix_market_dense(path: &Path, a: &Array2<f64>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{MM_DENSE_HEADER}")?;
    writeln!(out, "{} {}", a.nrows(), a.ncols())?;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            writeln!(out, "{}", a[[i, j]])?;
        }
    }
    Ok(())
}

/// Read a dense matrix in MatrixMarket array format.
pub fn read_matrix_market_dense(path: &Path) -> Result<Array2<f64>> {
    let (header, lines) = content_lines(path)?;
    if header != MM_DENSE_HEADER {
        return Err(Error::Parse(format!("unexpected header {header:?}")));
    }
    let lines: Vec<&String> = lines.iter().filter(|l| !l.starts_with('%')).collect();
    let dims = lines
        .first()
        .ok_or_else(|| Error::Parse("missing size line".into()))?;
    let mut it = dims.split_whitespace();
    let m: usize = parse_tok(it.next().unwrap_or(""), "row count")?;
    let n: usize = parse_tok(it.next().unwrap_or(""), "column count")?;
    if it.next().is_some() {
        return Err(Error::Parse(format!("trailing tokens in size line {dims:?}")));
    }
    if lines.len() != 1 + m * n {
        return Err(Error::Parse(format!(
            "expected {} value lines, found {}",
            m * n,
            lines.len() - 1
        )));
    }
    let mut a = Array2::zeros((m, n));
    let mut idx = 1;
    for j in 0..n {
        for i in 0..m {
            a[[i, j]] = parse_tok(lines[idx], "matrix entry")?;
            idx += 1;
        }
    }
    Ok(a)
}

/// Write entries in MatrixMarket coordinate format; indices are 0-based in
/// memory, 1-based on disk. Extra metadata lines are written as comments.
pub fn write_matrix_market_coord(
    path: &Path,
    shape: (usize, usize),
    entries: &[(usize, usize, f64)],
    metadata: &[(&str, String)],
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{MM_COORD_HEADER}")?;
    for (key, value) in metadata {
        writeln!(out, "% {key} {value}")?;
    }
    writeln!(out, "{} {} {}", shape.0, shape.1, entries.len())?;
    for &(i, j, v) in entries {
        writeln!(out, "{} {} {}", i + 1, j + 1, v)?;
    }
    Ok(())
}

/// Read MatrixMarket coordinate format; returns shape, entries (0-based),
/// and any metadata comment pairs.
#[allow(clippy::type_complexity)]
pub fn read_matrix_market_coord(
    path: &Path,
) -> Result<((usize, usize), Vec<(usize, usize, f64)>, Vec<(String, String)>)> {
    let (header, lines) = content_lines(path)?;
    if header != MM_COORD_HEADER {
        return Err(Error::Parse(format!("unexpected header {header:?}")));
    }
    let mut metadata = Vec::new();
    let mut body = Vec::new();
    for line in &lines {
        if let Some(rest) = line.strip_prefix('%') {
            let mut it = rest.trim().splitn(2, char::is_whitespace);
            if let (Some(k), Some(v)) = (it.next(), it.next()) {
                metadata.push((k.to_string(), v.trim().to_string()));
            }
        } else {
            body.push(line);
        }
    }
    let dims = body
        .first()
        .ok_or_else(|| Error::Parse("missing size line".into()))?;
    let mut it = dims.split_whitespace();
    let m: usize = parse_tok(it.next().unwrap_or(""), "row count")?;
    let n: usize = parse_tok(it.next().unwrap_or(""), "column count")?;
    let nnz: usize = parse_tok(it.next().unwrap_or(""), "entry count")?;
    if body.len() != 1 + nnz {
        return Err(Error::Parse(format!(
            "expected {nnz} entry lines, found {}",
            body.len() - 1
        )));
    }
    let mut entries = Vec::with_capacity(nnz);
    for line in &body[1..] {
        let mut it = line.split_whitespace();
        let i: usize = parse_tok(it.next().unwrap_or(""), "row index")?;
        let j: usize = parse_tok(it.next().unwrap_or(""), "column index")?;
        let v: f64 = parse_tok(it.next().unwrap_or(""), "entry value")?;
        if i == 0 || j == 0 || i > m || j > n {
            return Err(Error::Parse(format!("index ({i}, {j}) outside 1..=({m}, {n})")));
        }
        entries.push((i - 1, j - 1, v));
    }
    Ok(((m, n), entries, metadata))
}

/// Write an NCE instance (dense symmetric input matrix).
pub fn write_nce_instance(path: &Path, inst: &NceInstance) -> Result<()> {
    write_matrix_market_dense(path, inst.matrix())
}

/// Read an NCE instance; validates symmetry on load.
pub fn read_nce_instance(path: &Path) -> Result<NceInstance> {
    NceInstance::new(read_matrix_market_dense(path)?)
}

/// Write a completion instance: observed entries in coordinate format with
/// the instance parameters as metadata comments.
pub fn write_mc_instance(path: &Path, inst: &McInstance) -> Result<()> {
    let entries: Vec<(usize, usize, f64)> = inst
        .omega
        .iter()
        .zip(inst.values.iter())
        .map(|(&(i, j), &v)| (i, j, v))
        .collect();
    let metadata = [
        ("rank", inst.r.to_string()),
        ("mu", inst.mu.to_string()),
        ("tau", inst.tau.to_string()),
    ];
    write_matrix_market_coord(path, (inst.m, inst.n), &entries, &metadata)
}

/// Read a completion instance written by [`write_mc_instance`].
pub fn read_mc_instance(path: &Path) -> Result<McInstance> {
    let ((m, n), entries, metadata) = read_matrix_market_coord(path)?;
    let lookup = |key: &str| -> Result<&str> {
        metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::Parse(format!("missing {key} metadata")))
    };
    let r: usize = parse_tok(lookup("rank")?, "rank")?;
    let mu: f64 = parse_tok(lookup("mu")?, "mu")?;
    let tau: f64 = parse_tok(lookup("tau")?, "tau")?;
    let mut entries = entries;
    entries.sort_by_key(|&(i, j, _)| (i, j));
    let omega: Vec<(usize, usize)> = entries.iter().map(|&(i, j, _)| (i, j)).collect();
    let values = Array1::from_iter(entries.iter().map(|&(_, _, v)| v));
    McInstance::new(m, n, r, omega, values, mu, tau)
}

/// Write ground-truth factors next to a completion instance.
pub fn write_mc_truth(left_path: &Path, right_path: &Path, truth: &McTruth) -> Result<()> {
    write_matrix_market_dense(left_path, &truth.left)?;
    write_matrix_market_dense(right_path, &truth.right)
}

/// Read ground-truth factors.
pub fn read_mc_truth(left_path: &Path, right_path: &Path) -> Result<McTruth> {
    Ok(McTruth {
        left: read_matrix_market_dense(left_path)?,
        right: read_matrix_market_dense(right_path)?,
    })
}

/// Write an SDP in an SDPA-like sparse single-block format: constraint
/// count, block count (always 1), block size, the right-hand side, then
/// `matno i j value` lines with `matno 0` for the cost and upper-triangle
/// 1-based indices.
pub fn write_sdpa_sparse(path: &Path, prob: &dyn SdpProblem) -> Result<()> {
    let n = prob.n();
    let m = prob.m();
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{m}")?;
    writeln!(out, "1")?;
    writeln!(out, "{n}")?;
    let rhs: Vec<String> = prob.rhs().iter().map(|v| v.to_string()).collect();
    writeln!(out, "{}", rhs.join(" "))?;

    let dump = |matno: usize, a: &Array2<f64>, out: &mut BufWriter<File>| -> Result<()> {
        for i in 0..n {
            for j in i..n {
                if a[[i, j]] != 0.0 {
                    writeln!(out, "{matno} {} {} {}", i + 1, j + 1, a[[i, j]])?;
                }
            }
        }
        Ok(())
    };
    dump(0, prob.cost(), &mut out)?;
    let mut unit = Array1::zeros(m);
    for k in 0..m {
        unit[k] = 1.0;
        let a = prob.apply_a_adjoint(&unit.view());
        dump(k + 1, &a, &mut out)?;
        unit[k] = 0.0;
    }
    Ok(())
}

/// Read an SDP written by [`write_sdpa_sparse`] into dense constraint
/// form. The splitting parameter is not part of the format; it defaults to
/// `1/sqrt(n)` unless given.
pub fn read_sdpa_sparse(path: &Path, t: Option<f64>) -> Result<DenseConstraintSdp> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('"') || trimmed.starts_with('*') {
            continue;
        }
        lines.push(trimmed.to_string());
    }
    if lines.len() < 4 {
        return Err(Error::Parse("truncated SDP file".into()));
    }
    let m: usize = parse_tok(&lines[0], "constraint count")?;
    let blocks: usize = parse_tok(&lines[1], "block count")?;
    if blocks != 1 {
        return Err(Error::Parse(format!("only single-block SDPs supported, got {blocks}")));
    }
    let n: usize = parse_tok(&lines[2], "block size")?;
    let rhs_toks: Vec<&str> = lines[3].split_whitespace().collect();
    if rhs_toks.len() != m {
        return Err(Error::Parse(format!(
            "right-hand side has {} entries, expected {m}",
            rhs_toks.len()
        )));
    }
    let mut b = Array1::zeros(m);
    for (k, tok) in rhs_toks.iter().enumerate() {
        b[k] = parse_tok(tok, "right-hand side entry")?;
    }

    let mut c = Array2::zeros((n, n));
    let mut constraints = vec![Array2::zeros((n, n)); m];
    for line in &lines[4..] {
        let mut it = line.split_whitespace();
        let matno: usize = parse_tok(it.next().unwrap_or(""), "matrix number")?;
        let i: usize = parse_tok(it.next().unwrap_or(""), "row index")?;
        let j: usize = parse_tok(it.next().unwrap_or(""), "column index")?;
        let v: f64 = parse_tok(it.next().unwrap_or(""), "entry value")?;
        if matno > m {
            return Err(Error::Parse(format!("matrix number {matno} outside 0..={m}")));
        }
        if i == 0 || j == 0 || i > n || j > n || j < i {
            return Err(Error::Parse(format!(
                "entry ({i}, {j}) is not an upper-triangle index in 1..={n}"
            )));
        }
        let target = if matno == 0 { &mut c } else { &mut constraints[matno - 1] };
        target[[i - 1, j - 1]] = v;
        target[[j - 1, i - 1]] = v;
    }
    let t = t.unwrap_or(1.0 / (n as f64).sqrt());
    DenseConstraintSdp::new(c, constraints, b, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::completion::gen_mc;
    use crate::problems::nce::gen_example;
    use crate::problems::sdp::{maxcut_sdp, planted_low_rank_sdp};
    use ndarray::array;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("polyfilter-io-tests");
        std::fs::create_dir_all(&dir).expect("create temp dir");
        dir.join(name)
    }

    #[test]
    fn dense_roundtrip_is_exact() {
        let a = array![
            [1.0, -0.25, 1e-17],
            [std::f64::consts::PI, 2.0f64.powi(-40), -3.5]
        ];
        let path = tmp("dense.mtx");
        write_matrix_market_dense(&path, &a).unwrap();
        let back = read_matrix_market_dense(&path).unwrap();
        assert_eq!(a, back);
    }

    #[test]
    fn coordinate_roundtrip_preserves_entries_and_metadata() {
        let entries = vec![(0, 0, 1.5), (2, 4, -2.25), (3, 1, 1e-300)];
        let path = tmp("coord.mtx");
        write_matrix_market_coord(&path, (5, 6), &entries, &[("note", "7".into())]).unwrap();
        let ((m, n), back, meta) = read_matrix_market_coord(&path).unwrap();
        assert_eq!((m, n), (5, 6));
        assert_eq!(back, entries);
        assert!(meta.iter().any(|(k, v)| k == "note" && v == "7"));
    }

    #[test]
    fn malformed_files_are_rejected() {
        let path = tmp("bad.mtx");
        std::fs::write(&path, "nonsense header\n1 1\n0\n").unwrap();
        assert!(read_matrix_market_dense(&path).is_err());

        std::fs::write(&path, format!("{MM_DENSE_HEADER}\n2 2\n1\n2\n3\n")).unwrap();
        assert!(read_matrix_market_dense(&path).is_err());

        std::fs::write(&path, format!("{MM_COORD_HEADER}\n2 2 1\n0 1 3.0\n")).unwrap();
        assert!(read_matrix_market_coord(&path).is_err());

        std::fs::write(&path, format!("{MM_COORD_HEADER}\n2 2 1\n3 1 3.0\n")).unwrap();
        assert!(read_matrix_market_coord(&path).is_err());

        std::fs::write(&path, format!("{MM_DENSE_HEADER}\n2 x\n1\n2\n3\n4\n")).unwrap();
        assert!(read_matrix_market_dense(&path).is_err());
    }

    #[test]
    fn nce_instance_roundtrip() {
        let inst = gen_example(2, 8, 5).unwrap();
        let path = tmp("nce.mtx");
        write_nce_instance(&path, &inst).unwrap();
        let back = read_nce_instance(&path).unwrap();
        assert_eq!(inst.matrix(), back.matrix());
    }

    #[test]
    fn completion_instance_roundtrip() {
        let (inst, truth) = gen_mc(9, 7, 2, 0.4, 12).unwrap();
        let path = tmp("mc.mtx");
        write_mc_instance(&path, &inst).unwrap();
        let back = read_mc_instance(&path).unwrap();
        assert_eq!(inst.omega, back.omega);
        assert_eq!(inst.values, back.values);
        assert_eq!(inst.r, back.r);
        assert_eq!(inst.mu, back.mu);
        assert_eq!(inst.tau, back.tau);
        assert_eq!(inst.sr, back.sr);

        let lp = tmp("mc-left.mtx");
        let rp = tmp("mc-right.mtx");
        write_mc_truth(&lp, &rp, &truth).unwrap();
        let tb = read_mc_truth(&lp, &rp).unwrap();
        assert_eq!(truth.left, tb.left);
        assert_eq!(truth.right, tb.right);
    }

    #[test]
    fn sdp_roundtrip_through_sparse_format() {
        let w = array![[0.0, 1.0, 0.5], [1.0, 0.0, 2.0], [0.5, 2.0, 0.0]];
        let prob = maxcut_sdp(&w.view(), Some(0.7)).unwrap();
        let path = tmp("sdp.dat-s");
        write_sdpa_sparse(&path, &prob).unwrap();
        let back = read_sdpa_sparse(&path, Some(0.7)).unwrap();
        assert_eq!(prob.cost(), back.cost());
        assert_eq!(prob.rhs(), back.rhs());
        assert_eq!(prob.t(), back.t());
        // Constraint actions agree.
        let x = array![[1.0, 0.2, 0.0], [0.2, 2.0, -1.0], [0.0, -1.0, 0.5]];
        let a1 = prob.apply_a(&x.view());
        let a2 = back.apply_a(&x.view());
        for i in 0..3 {
            assert!((a1[i] - a2[i]).abs() < 1e-15);
        }

        let (planted, _) = planted_low_rank_sdp(6, 3, 2, 9).unwrap();
        let path = tmp("planted.dat-s");
        write_sdpa_sparse(&path, &planted).unwrap();
        let back = read_sdpa_sparse(&path, None).unwrap();
        assert_eq!(planted.cost(), back.cost());
        let y = array![0.3, -1.2, 0.8];
        let d1 = planted.apply_a_adjoint(&y.view());
        let d2 = back.apply_a_adjoint(&y.view());
        let diff = (&d1 - &d2).iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(diff < 1e-12);
    }
}
