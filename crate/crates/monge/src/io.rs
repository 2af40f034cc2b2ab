//! File formats: point-cloud CSV, the embedding binary format, PGM images
//! and IDX archives.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::embedding::VectorizedEmbedding;
use crate::geometry::{Point2, SiteSet};
use crate::measure::{DiscreteMeasure, MeasureError};

/// Embedding file magic bytes.
pub const EMBEDDING_MAGIC: [u8; 4] = *b"MEMB";
/// Embedding file format version.
pub const EMBEDDING_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("line {line}: point ({x}, {y}) lies outside [0,1]²")]
    OutOfDomain { line: usize, x: f64, y: f64 },
    #[error("file contains no data rows")]
    EmptyFile,
    #[error("no pixel exceeds the intensity threshold")]
    AllBelowThreshold,
    #[error("bad magic number {found:#010x}")]
    BadMagic { found: u32 },
    #[error("file is truncated")]
    Truncated,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Writes a file atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".to_string(),
    });
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Loads a CSV point cloud: rows `x,y` or `x,y,weight`, optional header
/// line, `#` comments. Missing weights become uniform; present weights must
/// be positive and are normalized to sum 1. Atoms with exactly equal
/// coordinates are merged. All points must lie in `[0,1]²`.
pub fn load_point_cloud(path: &Path) -> Result<DiscreteMeasure, IoError> {
    let text = fs::read_to_string(path)?;
    parse_point_cloud(&text)
}

pub fn parse_point_cloud(text: &str) -> Result<DiscreteMeasure, IoError> {
    let mut atoms: Vec<(Point2, f64)> = Vec::new();
    let mut explicit_weights: Option<bool> = None;
    let mut saw_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if atoms.is_empty() && !saw_header => {
                saw_header = true;
                continue;
            }
            Err(e) => {
                return Err(IoError::ParseError {
                    line: line_no,
                    message: e.to_string(),
                })
            }
        };
        if values.len() != 2 && values.len() != 3 {
            return Err(IoError::ParseError {
                line: line_no,
                message: format!("expected 2 or 3 columns, found {}", values.len()),
            });
        }
        let has_weight = values.len() == 3;
        match explicit_weights {
            None => explicit_weights = Some(has_weight),
            Some(prev) if prev != has_weight => {
                return Err(IoError::ParseError {
                    line: line_no,
                    message: "mixed 2- and 3-column rows".into(),
                })
            }
            _ => {}
        }
        let (x, y) = (values[0], values[1]);
        if !x.is_finite() || !y.is_finite() {
            return Err(IoError::ParseError {
                line: line_no,
                message: "non-finite coordinate".into(),
            });
        }
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return Err(IoError::OutOfDomain { line: line_no, x, y });
        }
        let w = if has_weight {
            let w = values[2];
            if !w.is_finite() || w <= 0.0 {
                return Err(IoError::ParseError {
                    line: line_no,
                    message: format!("weight must be positive, found {w}"),
                });
            }
            w
        } else {
            1.0
        };
        atoms.push((Point2::new(x, y), w));
    }
    if atoms.is_empty() {
        return Err(IoError::EmptyFile);
    }
    Ok(measure_from_atoms(atoms)?)
}

/// Builds a normalized measure from raw atoms, merging exact duplicates.
pub fn measure_from_atoms(atoms: Vec<(Point2, f64)>) -> Result<DiscreteMeasure, MeasureError> {
    let mut merged: Vec<(Point2, f64)> = Vec::with_capacity(atoms.len());
    for (p, w) in atoms {
        match merged
            .iter_mut()
            .find(|(q, _)| q.x == p.x && q.y == p.y)
        {
            Some((_, acc)) => *acc += w,
            None => merged.push((p, w)),
        }
    }
    let sites = SiteSet::new(merged.iter().map(|&(p, _)| p).collect())?;
    DiscreteMeasure::new_normalized(sites, merged.into_iter().map(|(_, w)| w).collect())
}

/// Serializes a point cloud as `x,y,weight` CSV.
pub fn point_cloud_to_csv(measure: &DiscreteMeasure) -> String {
    let mut out = String::from("x,y,weight\n");
    for (p, w) in measure.points().iter().zip(measure.weights()) {
        out.push_str(&format!("{},{},{}\n", p.x, p.y, w));
    }
    out
}

pub fn save_point_cloud(path: &Path, measure: &DiscreteMeasure) -> Result<(), IoError> {
    write_atomic(path, point_cloud_to_csv(measure).as_bytes())
}

/// Binary layout: magic `MEMB`, then little-endian u32 version, m, d, then
/// `m·m·d` little-endian f64 values with the x-index outermost.
pub fn embedding_to_bytes(v: &VectorizedEmbedding) -> Vec<u8> {
    let m = v.m() as u32;
    let mut out = Vec::with_capacity(16 + 16 * (v.m() * v.m()));
    out.extend_from_slice(&EMBEDDING_MAGIC);
    out.extend_from_slice(&EMBEDDING_VERSION.to_le_bytes());
    out.extend_from_slice(&m.to_le_bytes());
    out.extend_from_slice(&2u32.to_le_bytes());
    for p in v.values() {
        out.extend_from_slice(&p.x.to_le_bytes());
        out.extend_from_slice(&p.y.to_le_bytes());
    }
    out
}

pub fn embedding_from_bytes(bytes: &[u8]) -> Result<VectorizedEmbedding, IoError> {
    if bytes.len() < 16 {
        return Err(IoError::Truncated);
    }
    if bytes[0..4] != EMBEDDING_MAGIC {
        return Err(IoError::BadMagic {
            found: u32::from_be_bytes(bytes[0..4].try_into().unwrap()),
        });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != EMBEDDING_VERSION {
        return Err(IoError::UnsupportedVersion(version));
    }
    let m = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
    if d != 2 {
        return Err(IoError::ParseError {
            line: 0,
            message: format!("unsupported dimension {d}"),
        });
    }
    let expected = 16 + 16 * m * m;
    if bytes.len() < expected {
        return Err(IoError::Truncated);
    }
    if bytes.len() > expected {
        return Err(IoError::ParseError {
            line: 0,
            message: "trailing bytes after payload".into(),
        });
    }
    let mut values = Vec::with_capacity(m * m);
    let mut off = 16;
    for _ in 0..m * m {
        let x = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        let y = f64::from_le_bytes(bytes[off + 8..off + 16].try_into().unwrap());
        values.push(Point2::new(x, y));
        off += 16;
    }
    Ok(VectorizedEmbedding::new(m, values))
}

pub fn save_embedding(path: &Path, v: &VectorizedEmbedding) -> Result<(), IoError> {
    write_atomic(path, &embedding_to_bytes(v))
}

pub fn load_embedding(path: &Path) -> Result<VectorizedEmbedding, IoError> {
    embedding_from_bytes(&fs::read(path)?)
}

/// A grayscale raster, row 0 at the top.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    pub rows: usize,
    pub cols: usize,
    pub max_value: u16,
    /// Row-major pixel intensities.
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn pixel(&self, r: usize, c: usize) -> u8 {
        self.pixels[r * self.cols + c]
    }
}

/// Converts an image to a point cloud: one uniform atom per pixel whose
/// intensity exceeds `threshold` (a fraction of the maximum intensity), at
/// pixel centers mapped affinely into `[0,1]²` with the image upright
/// (row 0 at the top becomes y near 1).
pub fn image_record_to_pointcloud(
    img: &GrayImage,
    threshold: f64,
) -> Result<DiscreteMeasure, IoError> {
    let cutoff = threshold * img.max_value as f64;
    let mut atoms = Vec::new();
    for r in 0..img.rows {
        for c in 0..img.cols {
            if img.pixel(r, c) as f64 > cutoff {
                let x = (c as f64 + 0.5) / img.cols as f64;
                let y = 1.0 - (r as f64 + 0.5) / img.rows as f64;
                atoms.push((Point2::new(x, y), 1.0));
            }
        }
    }
    if atoms.is_empty() {
        return Err(IoError::AllBelowThreshold);
    }
    Ok(measure_from_atoms(atoms)?)
}

/// Loads a PGM (`P5` binary or `P2` ASCII) image or the first record of an
/// IDX archive, and thresholds it into a point cloud.
pub fn image_to_pointcloud(path: &Path, threshold: f64) -> Result<DiscreteMeasure, IoError> {
    let bytes = fs::read(path)?;
    let img = if bytes.starts_with(b"P5") || bytes.starts_with(b"P2") {
        parse_pgm(&bytes)?
    } else {
        parse_idx_bytes(&bytes, 1)?
            .into_iter()
            .next()
            .ok_or(IoError::Truncated)?
    };
    image_record_to_pointcloud(&img, threshold)
}

/// Parses a PGM image (binary `P5` or ASCII `P2`, max value ≤ 255).
pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage, IoError> {
    let binary = match &bytes.get(0..2) {
        Some(b"P5") => true,
        Some(b"P2") => false,
        _ => {
            return Err(IoError::BadMagic {
                found: u32::from_be_bytes([
                    *bytes.first().unwrap_or(&0),
                    *bytes.get(1).unwrap_or(&0),
                    0,
                    0,
                ]),
            })
        }
    };
    let mut pos = 2;
    let mut header = [0usize; 3];
    for slot in header.iter_mut() {
        *slot = read_pgm_number(bytes, &mut pos)?;
    }
    let (cols, rows, max_value) = (header[0], header[1], header[2]);
    if max_value == 0 || max_value > 255 {
        return Err(IoError::ParseError {
            line: 0,
            message: format!("unsupported PGM max value {max_value}"),
        });
    }
    let count = rows * cols;
    let pixels = if binary {
        // Exactly one whitespace byte separates the header from the raster.
        pos += 1;
        if bytes.len() < pos + count {
            return Err(IoError::Truncated);
        }
        bytes[pos..pos + count].to_vec()
    } else {
        let mut pixels = Vec::with_capacity(count);
        for _ in 0..count {
            pixels.push(read_pgm_number(bytes, &mut pos)? as u8);
        }
        pixels
    };
    Ok(GrayImage {
        rows,
        cols,
        max_value: max_value as u16,
        pixels,
    })
}

fn read_pgm_number(bytes: &[u8], pos: &mut usize) -> Result<usize, IoError> {
    // Skip whitespace and # comments.
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if start == *pos {
        return Err(IoError::Truncated);
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or(IoError::Truncated)
}

/// IDX image-archive magic (unsigned bytes, 3 dimensions).
pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;

/// Reads up to `max_records` grayscale images from an IDX archive.
pub fn parse_idx(path: &Path, max_records: usize) -> Result<Vec<GrayImage>, IoError> {
    parse_idx_bytes(&fs::read(path)?, max_records)
}

pub fn parse_idx_bytes(bytes: &[u8], max_records: usize) -> Result<Vec<GrayImage>, IoError> {
    if bytes.len() < 4 {
        return Err(IoError::Truncated);
    }
    let magic = u32::from_be_bytes(bytes[0..4].try_into().unwrap());
    if magic != IDX_IMAGES_MAGIC {
        return Err(IoError::BadMagic { found: magic });
    }
    if bytes.len() < 16 {
        return Err(IoError::Truncated);
    }
    let count = u32::from_be_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let rows = u32::from_be_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_be_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let take = count.min(max_records);
    let need = 16 + take * rows * cols;
    if bytes.len() < need {
        return Err(IoError::Truncated);
    }
    let mut images = Vec::with_capacity(take);
    for k in 0..take {
        let start = 16 + k * rows * cols;
        images.push(GrayImage {
            rows,
            cols,
            max_value: 255,
            pixels: bytes[start..start + rows * cols].to_vec(),
        });
    }
    Ok(images)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_row_is_dirac() {
        let mu = parse_point_cloud("0.5,0.5").unwrap();
        assert_eq!(mu.len(), 1);
        assert_eq!(mu.weights(), &[1.0]);
        assert!(mu.points()[0].dist(Point2::new(0.5, 0.5)) == 0.0);
    }

    #[test]
    fn missing_weights_become_uniform() {
        let mu = parse_point_cloud("0.1,0.2\n0.3,0.4\n").unwrap();
        assert_eq!(mu.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn weights_are_normalized() {
        let mu = parse_point_cloud("0.1,0.2,1\n0.3,0.4,1\n0.5,0.6,2\n").unwrap();
        assert_eq!(mu.weights(), &[0.25, 0.25, 0.5]);
    }

    #[test]
    fn header_and_comments_are_skipped() {
        let mu = parse_point_cloud("x,y,weight\n# a comment\n0.5,0.5,1\n").unwrap();
        assert_eq!(mu.len(), 1);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match parse_point_cloud("0.1,0.2\nnope,0.4\n") {
            Err(IoError::ParseError { line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match parse_point_cloud("0.5,1.5\n") {
            Err(IoError::OutOfDomain { line: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_point_cloud("# nothing\n"),
            Err(IoError::EmptyFile)
        ));
    }

    #[test]
    fn duplicate_atoms_merge() {
        let mu = parse_point_cloud("0.5,0.5,1\n0.5,0.5,1\n0.25,0.25,2\n").unwrap();
        assert_eq!(mu.len(), 2);
        assert_eq!(mu.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn point_cloud_roundtrip() {
        let mu = parse_point_cloud("0.125,0.25,0.25\n0.5,0.625,0.75\n").unwrap();
        let again = parse_point_cloud(&point_cloud_to_csv(&mu)).unwrap();
        for i in 0..mu.len() {
            assert!(mu.points()[i].dist(again.points()[i]) <= 1e-12);
            assert!((mu.weights()[i] - again.weights()[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn embedding_roundtrip_is_bit_exact() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(5);
        let m = 5;
        let values: Vec<Point2> = (0..m * m)
            .map(|_| Point2::new(rng.gen::<f64>() * 3.0 - 1.5, rng.gen::<f64>()))
            .collect();
        let v = VectorizedEmbedding::new(m, values);
        let bytes = embedding_to_bytes(&v);
        let back = embedding_from_bytes(&bytes).unwrap();
        assert_eq!(back.m(), m);
        for (a, b) in v.values().iter().zip(back.values()) {
            assert_eq!(a.x.to_bits(), b.x.to_bits());
            assert_eq!(a.y.to_bits(), b.y.to_bits());
        }
    }

    #[test]
    fn embedding_rejects_bad_headers() {
        assert!(matches!(
            embedding_from_bytes(b"NOPE"),
            Err(IoError::Truncated)
        ));
        let mut bytes = embedding_to_bytes(&VectorizedEmbedding::constant(2, Point2::ZERO));
        bytes[0] = b'X';
        assert!(matches!(
            embedding_from_bytes(&bytes),
            Err(IoError::BadMagic { .. })
        ));
        let mut short = embedding_to_bytes(&VectorizedEmbedding::constant(2, Point2::ZERO));
        short.truncate(30);
        assert!(matches!(
            embedding_from_bytes(&short),
            Err(IoError::Truncated)
        ));
    }

    #[test]
    fn pgm_binary_and_ascii_agree() {
        let ascii = b"P2\n# demo\n2 2\n255\n0 255\n128 0\n".to_vec();
        let mut binary = b"P5\n2 2\n255\n".to_vec();
        binary.extend_from_slice(&[0, 255, 128, 0]);
        let a = parse_pgm(&ascii).unwrap();
        let b = parse_pgm(&binary).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.pixel(0, 1), 255);
    }

    #[test]
    fn pixel_center_mapping() {
        // Single bright pixel at (row 13, col 13) of a 28×28 image.
        let mut pixels = vec![0u8; 28 * 28];
        pixels[13 * 28 + 13] = 255;
        let img = GrayImage {
            rows: 28,
            cols: 28,
            max_value: 255,
            pixels,
        };
        let mu = image_record_to_pointcloud(&img, 0.5).unwrap();
        assert_eq!(mu.len(), 1);
        let p = mu.points()[0];
        assert!((p.x - 13.5 / 28.0).abs() <= 1e-12);
        assert!((p.y - (1.0 - 13.5 / 28.0)).abs() <= 1e-12);
    }

    #[test]
    fn threshold_edge_cases() {
        let black = GrayImage {
            rows: 4,
            cols: 4,
            max_value: 255,
            pixels: vec![0; 16],
        };
        assert!(matches!(
            image_record_to_pointcloud(&black, 0.5),
            Err(IoError::AllBelowThreshold)
        ));
        let bright = GrayImage {
            rows: 28,
            cols: 28,
            max_value: 255,
            pixels: vec![255; 784],
        };
        let mu = image_record_to_pointcloud(&bright, 0.5).unwrap();
        assert_eq!(mu.len(), 784);
        assert!((mu.weights()[0] - 1.0 / 784.0).abs() <= 1e-15);
    }

    #[test]
    fn idx_fixture_roundtrip() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
        bytes.extend_from_slice(&2u32.to_be_bytes());
        bytes.extend_from_slice(&2u32.to_be_bytes());
        bytes.extend_from_slice(&3u32.to_be_bytes());
        let img0 = [1u8, 2, 3, 4, 5, 6];
        let img1 = [10u8, 20, 30, 40, 50, 60];
        bytes.extend_from_slice(&img0);
        bytes.extend_from_slice(&img1);
        let images = parse_idx_bytes(&bytes, 10).unwrap();
        assert_eq!(images.len(), 2);
        assert_eq!(images[0].pixels, img0);
        assert_eq!(images[1].pixels, img1);
        assert_eq!(images[1].pixel(1, 2), 60);
        // Limiting records truncates the list, not the parse.
        assert_eq!(parse_idx_bytes(&bytes, 1).unwrap().len(), 1);
    }

    #[test]
    fn idx_error_paths() {
        assert!(matches!(
            parse_idx_bytes(&0x0000_0801u32.to_be_bytes(), 1),
            Err(IoError::BadMagic { .. })
        ));
        let mut header_only = Vec::new();
        header_only.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
        header_only.extend_from_slice(&1u32.to_be_bytes());
        header_only.extend_from_slice(&28u32.to_be_bytes());
        header_only.extend_from_slice(&28u32.to_be_bytes());
        assert!(matches!(
            parse_idx_bytes(&header_only, 1),
            Err(IoError::Truncated)
        ));
    }

    #[test]
    fn atomic_write_creates_file() {
        let dir = std::env::temp_dir().join("monge-io-test");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cloud.csv");
        let mu = parse_point_cloud("0.5,0.5\n").unwrap();
        save_point_cloud(&path, &mu).unwrap();
        let back = load_point_cloud(&path).unwrap();
        assert_eq!(back.len(), 1);
        fs::remove_dir_all(&dir).unwrap();
    }
}
