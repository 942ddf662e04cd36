use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance used for the coverage, association and candidate ranking.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Manhattan,
    Euclidean,
}

impl Metric {
    /// Unchecked distance between equal-width slices.
    #[inline]
    pub fn between(self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        match self {
            Metric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Manhattan => "manhattan",
            Metric::Euclidean => "euclidean",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "manhattan" | "l1" => Ok(Metric::Manhattan),
            "euclidean" | "l2" => Ok(Metric::Euclidean),
            other => Err(Error::InvalidConfig(format!("unknown metric {other:?}"))),
        }
    }
}

pub fn distance(a: &[f64], b: &[f64], metric: Metric) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::WidthMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(metric.between(a, b))
}

const MATRIX_MAGIC: &[u8; 6] = b"ONBDM1";

/// Symmetric distance matrix stored as its upper triangle (diagonal included).
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    upper: Vec<f64>,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * (2 * self.n - i + 1) / 2 + (j - i)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[self.index(i, j)]
    }

    /// Builds the matrix from a condensed upper triangle.
    pub fn from_upper(n: usize, upper: Vec<f64>) -> Result<Self> {
        if upper.len() != n * (n + 1) / 2 {
            return Err(Error::WidthMismatch {
                expected: n * (n + 1) / 2,
                actual: upper.len(),
            });
        }
        Ok(Self { n, upper })
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Writes the binary cache format: magic, u64 n, then the upper triangle
    /// as little-endian f64 values.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MATRIX_MAGIC)?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        for v in &self.upper {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let corrupt = |reason: &str| Error::CorruptFile {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        let mut bytes = Vec::new();
        BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
        if bytes.len() < 14 || &bytes[..6] != MATRIX_MAGIC {
            return Err(corrupt("bad magic"));
        }
        let n = u64::from_le_bytes(bytes[6..14].try_into().unwrap()) as usize;
        let expected = n
            .checked_mul(n + 1)
            .map(|m| m / 2)
            .and_then(|m| m.checked_mul(8))
            .ok_or_else(|| corrupt("size overflow"))?;
        let body = &bytes[14..];
        if body.len() != expected {
            return Err(corrupt("truncated body"));
        }
        let upper = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self { n, upper })
    }
}

/// All pairwise distances between `rows`.
pub fn pairwise_distances<R: AsRef<[f64]> + Sync>(rows: &[R], metric: Metric) -> Result<DistanceMatrix> {
    let n = rows.len();
    if let Some(first) = rows.first() {
        let w = first.as_ref().len();
        if let Some(bad) = rows.iter().find(|r| r.as_ref().len() != w) {
            return Err(Error::WidthMismatch {
                expected: w,
                actual: bad.as_ref().len(),
            });
        }
    }
    let segments: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = rows[i].as_ref();
            (i..n)
                .map(|j| if i == j { 0.0 } else { metric.between(a, rows[j].as_ref()) })
                .collect()
        })
        .collect();
    let upper = segments.concat();
    DistanceMatrix::from_upper(n, upper)
}
