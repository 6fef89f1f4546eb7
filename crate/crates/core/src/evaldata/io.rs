//! Matrix, label, and PGM image file I/O.
//!
//! Two matrix formats, chosen by extension:
//! - `.csv` — plain decimal text, comma-separated, one row per line;
//! - `.sscm` — binary: magic `SSCM`, `u64` rows, `u64` cols, then row-major
//!   little-endian `f64` values. Bit-exact round-trip.

use crate::linalg::Matrix;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

const SSCM_MAGIC: &[u8; 4] = b"SSCM";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("malformed file: {0}")]
    MalformedFile(String),
    #[error("no PGM files in directory {0}")]
    EmptyDirectory(PathBuf),
    #[error("unsupported matrix format {0:?}; use .csv or .sscm")]
    UnsupportedFormat(String),
    #[error("i/o failure: {0}")]
    IoFailure(#[from] io::Error),
}

enum Format {
    Csv,
    Sscm,
}

fn format_of(path: &Path) -> Result<Format, IoError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => Ok(Format::Csv),
        Some("sscm") => Ok(Format::Sscm),
        other => Err(IoError::UnsupportedFormat(
            other.unwrap_or("<none>").to_string(),
        )),
    }
}

pub fn save_matrix(path: &Path, m: &Matrix) -> Result<(), IoError> {
    match format_of(path)? {
        Format::Csv => {
            let mut out = io::BufWriter::new(fs::File::create(path)?);
            for i in 0..m.rows() {
                let line = m
                    .row(i)
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(",");
                writeln!(out, "{line}")?;
            }
            out.flush()?;
        }
        Format::Sscm => {
            let mut out = io::BufWriter::new(fs::File::create(path)?);
            out.write_all(SSCM_MAGIC)?;
            out.write_all(&(m.rows() as u64).to_le_bytes())?;
            out.write_all(&(m.cols() as u64).to_le_bytes())?;
            for v in m.data() {
                out.write_all(&v.to_le_bytes())?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

pub fn load_matrix(path: &Path) -> Result<Matrix, IoError> {
    match format_of(path)? {
        Format::Csv => {
            let text = fs::read_to_string(path)?;
            let mut rows: Vec<Vec<f64>> = Vec::new();
            for (lineno, line) in text.lines().enumerate() {
                if line.is_empty() {
                    continue;
                }
                let row = line
                    .split(',')
                    .map(|field| {
                        field.trim().parse::<f64>().map_err(|_| {
                            IoError::MalformedFile(format!(
                                "line {}: unparseable value {field:?}",
                                lineno + 1
                            ))
                        })
                    })
                    .collect::<Result<Vec<f64>, IoError>>()?;
                if let Some(first) = rows.first() {
                    if row.len() != first.len() {
                        return Err(IoError::MalformedFile(format!(
                            "line {}: {} values, expected {}",
                            lineno + 1,
                            row.len(),
                            first.len()
                        )));
                    }
                }
                rows.push(row);
            }
            if rows.is_empty() {
                return Err(IoError::MalformedFile("CSV contains no rows".into()));
            }
            let slices: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
            Ok(Matrix::from_rows(&slices))
        }
        Format::Sscm => {
            let mut file = io::BufReader::new(fs::File::open(path)?);
            let mut magic = [0u8; 4];
            file.read_exact(&mut magic)
                .map_err(|_| IoError::MalformedFile("file too short for header".into()))?;
            if &magic != SSCM_MAGIC {
                return Err(IoError::MalformedFile(format!(
                    "bad magic {magic:?}, expected {SSCM_MAGIC:?}"
                )));
            }
            let rows = read_u64(&mut file)? as usize;
            let cols = read_u64(&mut file)? as usize;
            if rows == 0 || cols == 0 || rows.checked_mul(cols).is_none() {
                return Err(IoError::MalformedFile(format!(
                    "implausible shape {rows}x{cols}"
                )));
            }
            let mut data = Vec::with_capacity(rows * cols);
            let mut buf = [0u8; 8];
            for _ in 0..rows * cols {
                file.read_exact(&mut buf).map_err(|_| {
                    IoError::MalformedFile(format!(
                        "value section shorter than {rows}x{cols} entries"
                    ))
                })?;
                data.push(f64::from_le_bytes(buf));
            }
            Ok(Matrix::from_parts(rows, cols, data))
        }
    }
}

fn read_u64(reader: &mut impl Read) -> Result<u64, IoError> {
    let mut buf = [0u8; 8];
    reader
        .read_exact(&mut buf)
        .map_err(|_| IoError::MalformedFile("file too short for header".into()))?;
    Ok(u64::from_le_bytes(buf))
}

/// One integer label per line.
pub fn save_labels(path: &Path, labels: &[usize]) -> Result<(), IoError> {
    let mut out = io::BufWriter::new(fs::File::create(path)?);
    for label in labels {
        writeln!(out, "{label}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_labels(path: &Path) -> Result<Vec<usize>, IoError> {
    let text = fs::read_to_string(path)?;
    let mut labels = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        labels.push(line.parse::<usize>().map_err(|_| {
            IoError::MalformedFile(format!("line {}: unparseable label {line:?}", lineno + 1))
        })?);
    }
    if labels.is_empty() {
        return Err(IoError::MalformedFile("label file contains no rows".into()));
    }
    Ok(labels)
}

/// Loads every `.pgm` file in a directory (lexicographic filename order),
/// bilinearly resizes each image to `target_h`×`target_w`, and stacks them
/// as rows scaled to [0,1].
pub fn load_pgm_dir(dir: &Path, target_h: usize, target_w: usize) -> Result<Matrix, IoError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .map(|entry| entry.path())
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .map(|e| e.eq_ignore_ascii_case("pgm"))
                    .unwrap_or(false)
        })
        .collect();
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    if paths.is_empty() {
        return Err(IoError::EmptyDirectory(dir.to_path_buf()));
    }
    let mut data = Vec::with_capacity(paths.len() * target_h * target_w);
    for path in &paths {
        let bytes = fs::read(path)?;
        let (w, h, pixels) = parse_pgm(&bytes)
            .map_err(|msg| IoError::MalformedFile(format!("{}: {msg}", path.display())))?;
        data.extend(bilinear_resize(&pixels, w, h, target_w, target_h));
    }
    Ok(Matrix::from_parts(paths.len(), target_h * target_w, data))
}

/// Parses a binary (P5) 8-bit PGM. Header tokens may be separated by any
/// whitespace and `#` comments.
fn parse_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>), String> {
    let mut pos = 0usize;
    let mut next_token = |bytes: &[u8]| -> Result<Vec<u8>, String> {
        // skip whitespace and comment lines
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        Ok(bytes[start..pos].to_vec())
    };

    let magic = next_token(bytes)?;
    if magic != b"P5" {
        return Err(format!(
            "not a binary PGM (magic {:?})",
            String::from_utf8_lossy(&magic)
        ));
    }
    let parse_dim = |token: Vec<u8>, what: &str| -> Result<usize, String> {
        String::from_utf8_lossy(&token)
            .parse::<usize>()
            .map_err(|_| format!("bad {what} field"))
    };
    let w = parse_dim(next_token(bytes)?, "width")?;
    let h = parse_dim(next_token(bytes)?, "height")?;
    let maxval = parse_dim(next_token(bytes)?, "maxval")?;
    if w == 0 || h == 0 {
        return Err(format!("degenerate dimensions {w}x{h}"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(format!("maxval {maxval} outside 8-bit range"));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err("missing raster separator".into());
    }
    pos += 1;
    let raster = &bytes[pos..];
    if raster.len() < w * h {
        return Err(format!(
            "raster holds {} bytes, needs {}",
            raster.len(),
            w * h
        ));
    }
    Ok((w, h, raster[..w * h].to_vec()))
}

/// Bilinear resampling on half-pixel-centered coordinates, output in [0,1].
fn bilinear_resize(src: &[u8], sw: usize, sh: usize, tw: usize, th: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(tw * th);
    for ty in 0..th {
        let fy = ((ty as f64 + 0.5) * sh as f64 / th as f64 - 0.5).clamp(0.0, (sh - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(sh - 1);
        let wy = fy - y0 as f64;
        for tx in 0..tw {
            let fx = ((tx as f64 + 0.5) * sw as f64 / tw as f64 - 0.5).clamp(0.0, (sw - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(sw - 1);
            let wx = fx - x0 as f64;
            let p = |y: usize, x: usize| src[y * sw + x] as f64;
            let top = p(y0, x0) * (1.0 - wx) + p(y0, x1) * wx;
            let bottom = p(y1, x0) * (1.0 - wx) + p(y1, x1) * wx;
            out.push((top * (1.0 - wy) + bottom * wy) / 255.0);
        }
    }
    out
}
