//! Plain-text codebook files.
//!
//! Gain codebook:
//!
//! ```text
//! B_g 2
//! 8.1e-1
//! ...            (2^B_g lines, ascending)
//! ```
//!
//! Shape codebook:
//!
//! ```text
//! M 2 B_s 3 seed 42
//! re0 im0 re1 im1      (2^B_s lines)
//! ```
//!
//! Values are written in shortest round-trip notation, so reading a file
//! back reproduces every bit.

use std::io::{BufRead, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use num_complex::Complex64;
use shapegain_core::gain::GainCodebook;
use shapegain_core::shape::ShapeCodebook;

pub fn write_gain_codebook<W: Write>(mut w: W, codebook: &GainCodebook) -> Result<()> {
    writeln!(w, "B_g {}", codebook.bits())?;
    for c in codebook.centroids() {
        writeln!(w, "{c:e}")?;
    }
    Ok(())
}

pub fn write_shape_codebook<W: Write>(mut w: W, codebook: &ShapeCodebook) -> Result<()> {
    writeln!(w, "M {} B_s {} seed {}", codebook.dimension(), codebook.bits(), codebook.seed())?;
    for c in codebook.codewords() {
        let line: Vec<String> = c.iter().flat_map(|z| [format!("{:e}", z.re), format!("{:e}", z.im)]).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

fn content_lines<R: BufRead>(r: R) -> impl Iterator<Item = (usize, std::io::Result<String>)> {
    r.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
}

fn parse_f64(token: &str, line: usize) -> Result<f64> {
    token.parse().with_context(|| format!("line {line}: bad number {token:?}"))
}

/// Reads `key value` pairs from a header line.
fn header_value<'a>(tokens: &[&'a str], key: &str, line: usize) -> Result<&'a str> {
    tokens
        .chunks(2)
        .find(|kv| kv[0] == key)
        .and_then(|kv| kv.get(1).copied())
        .ok_or_else(|| anyhow!("line {line}: header lacks {key}"))
}

pub fn read_gain_codebook<R: BufRead>(r: R) -> Result<GainCodebook> {
    let mut lines = content_lines(r);
    let (n, header) = lines.next().ok_or_else(|| anyhow!("empty gain codebook"))?;
    let header = header?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    let bits: u32 = header_value(&tokens, "B_g", n)?.parse().with_context(|| format!("line {n}: bad B_g"))?;
    let mut centroids = Vec::new();
    for (n, line) in lines {
        let line = line?;
        let mut tokens = line.split_whitespace();
        let value = parse_f64(tokens.next().unwrap_or_default(), n)?;
        if tokens.next().is_some() {
            bail!("line {n}: expected one centroid per line");
        }
        centroids.push(value);
    }
    GainCodebook::new(centroids, bits).map_err(|e| anyhow!("invalid gain codebook: {e}"))
}

pub fn read_shape_codebook<R: BufRead>(r: R) -> Result<ShapeCodebook> {
    let mut lines = content_lines(r);
    let (n, header) = lines.next().ok_or_else(|| anyhow!("empty shape codebook"))?;
    let header = header?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    let m: usize = header_value(&tokens, "M", n)?.parse().with_context(|| format!("line {n}: bad M"))?;
    let bits: u32 = header_value(&tokens, "B_s", n)?.parse().with_context(|| format!("line {n}: bad B_s"))?;
    let seed: u64 = header_value(&tokens, "seed", n)?.parse().with_context(|| format!("line {n}: bad seed"))?;
    let mut vectors = Vec::new();
    for (n, line) in lines {
        let line = line?;
        let values = line.split_whitespace().map(|t| parse_f64(t, n)).collect::<Result<Vec<f64>>>()?;
        if values.len() != 2 * m {
            bail!("line {n}: expected {} values, found {}", 2 * m, values.len());
        }
        vectors.extend(values.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])));
    }
    ShapeCodebook::from_vectors(m, bits, seed, vectors).map_err(|e| anyhow!("invalid shape codebook: {e}"))
}

fn create(path: &Path) -> Result<std::fs::File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    std::fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))
}

pub fn save_gain_codebook(path: &Path, codebook: &GainCodebook) -> Result<()> {
    let file = create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_gain_codebook(&mut w, codebook)?;
    w.flush()?;
    Ok(())
}

pub fn save_shape_codebook(path: &Path, codebook: &ShapeCodebook) -> Result<()> {
    let file = create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_shape_codebook(&mut w, codebook)?;
    w.flush()?;
    Ok(())
}

pub fn load_gain_codebook(path: &Path) -> Result<GainCodebook> {
    let file = std::fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    read_gain_codebook(std::io::BufReader::new(file)).with_context(|| format!("in {}", path.display()))
}

pub fn load_shape_codebook(path: &Path) -> Result<ShapeCodebook> {
    let file = std::fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    read_shape_codebook(std::io::BufReader::new(file)).with_context(|| format!("in {}", path.display()))
}
