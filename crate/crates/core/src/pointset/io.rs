use std::fs;
use std::io::Write;
use std::path::Path;

use super::PointCloud;
use crate::error::{Error, Result};

/// Metadata stored in a `# msgeo` header line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudHeader {
    pub n: usize,
    pub d: usize,
    pub resolution: f64,
}

fn parse_rows(text: &str, n: usize) -> Result<Vec<f64>> {
    let mut coords = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        if fields.len() != n {
            return Err(Error::Parse { line: no + 1, msg: format!("expected {n} fields, found {}", fields.len()) });
        }
        for f in fields {
            let v: f64 = f.parse().map_err(|_| Error::Parse { line: no + 1, msg: format!("not a number: {f:?}") })?;
            if !v.is_finite() {
                return Err(Error::Parse { line: no + 1, msg: format!("non-finite value {f:?}") });
            }
            coords.push(v);
        }
    }
    Ok(coords)
}

/// Reads one point per line; `#` lines and blank lines are skipped.
pub fn load_cloud(path: impl AsRef<Path>, n: usize, d: usize, resolution: f64) -> Result<PointCloud> {
    let text = fs::read_to_string(path.as_ref())?;
    let coords = parse_rows(&text, n)?;
    if coords.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let before = coords.len() / n;
    let cloud = PointCloud::from_flat(coords, n, d, resolution)?;
    log::info!("loaded {} points ({} duplicates removed)", cloud.len(), before - cloud.len());
    Ok(cloud)
}

/// Reads clouds written with a trailing weight column, such as exported
/// skeleton sets.
pub fn load_weighted_cloud(path: impl AsRef<Path>, n: usize, d: usize, resolution: f64) -> Result<PointCloud> {
    let text = fs::read_to_string(path.as_ref())?;
    let rows = parse_rows(&text, n + 1)?;
    if rows.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut coords = Vec::with_capacity(rows.len() / (n + 1) * n);
    let mut weights = Vec::with_capacity(rows.len() / (n + 1));
    for row in rows.chunks_exact(n + 1) {
        coords.extend_from_slice(&row[..n]);
        weights.push(row[n]);
    }
    PointCloud::weighted(coords, weights, n, d, resolution)
}

/// Parses the `# msgeo n=.. d=.. resolution=..` header if the file has one.
pub fn read_header(path: impl AsRef<Path>) -> Result<Option<CloudHeader>> {
    let text = fs::read_to_string(path.as_ref())?;
    for line in text.lines() {
        let Some(rest) = line.trim().strip_prefix("# msgeo") else { continue };
        let (mut n, mut d, mut res) = (None, None, None);
        for kv in rest.split_whitespace() {
            match kv.split_once('=') {
                Some(("n", v)) => n = v.parse().ok(),
                Some(("d", v)) => d = v.parse().ok(),
                Some(("resolution", v)) => res = v.parse().ok(),
                _ => {}
            }
        }
        if let (Some(n), Some(d), Some(resolution)) = (n, d, res) {
            return Ok(Some(CloudHeader { n, d, resolution }));
        }
    }
    Ok(None)
}

/// Writes the cloud with a header line; weighted clouds get a trailing
/// weight column.
pub fn save_cloud(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "# msgeo n={} d={} resolution={}", cloud.n(), cloud.d(), cloud.resolution())?;
    for (i, p) in cloud.points().enumerate() {
        let mut fields: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        if cloud.weights().is_some() {
            fields.push(cloud.weight(i).to_string());
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    fs::write(path, out)?;
    Ok(())
}
