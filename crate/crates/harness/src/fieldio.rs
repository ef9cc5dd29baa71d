//! Dataset persistence: binary covariate containers and point-pattern CSVs.
//!
//! Both formats round-trip bit-exactly. The binary container stores raw
//! little-endian f64 values; the CSV writes floats with Rust's shortest
//! round-trip formatting, so reading a file back yields the same bits that
//! were written and re-running a seeded pipeline reproduces files byte for
//! byte.

use crate::HarnessError;
use coxlab_core::covariates::CovariateField;
use coxlab_core::coxmodel::PointPattern;
use coxlab_core::grid::SpatialGrid;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

const COVARIATE_MAGIC: &[u8; 4] = b"CVF1";
const COVARIATE_VERSION: u32 = 1;

fn runtime(msg: impl Into<String>) -> HarnessError {
    HarnessError::Runtime(msg.into())
}

/// Covariate container layout, all integers little-endian:
///
/// ```text
/// magic "CVF1" | u32 version | u32 ambient_dim | u32 covariate_dim |
/// u64 cells_per_axis | f64 spacing | f64 lower | f64 volume |
/// u64 clamp_count | u64 latent_seed[covariate_dim] |
/// f64 values[covariate_dim * cells_per_axis^ambient_dim]  (channel-major)
/// ```
pub fn write_covariates(
    path: &Path,
    field: &CovariateField,
    grid: &SpatialGrid,
    latent_seeds: &[u64],
) -> Result<(), HarnessError> {
    if latent_seeds.len() != field.covariate_dim() {
        return Err(runtime("one latent seed per covariate channel required"));
    }
    if grid.dim() != field.dim() || grid.cells_per_axis() != field.cells_per_axis() {
        return Err(runtime("covariate field does not match the window grid"));
    }
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(COVARIATE_MAGIC)?;
    w.write_all(&COVARIATE_VERSION.to_le_bytes())?;
    w.write_all(&(field.dim() as u32).to_le_bytes())?;
    w.write_all(&(field.covariate_dim() as u32).to_le_bytes())?;
    w.write_all(&(field.cells_per_axis() as u64).to_le_bytes())?;
    w.write_all(&grid.spacing().to_le_bytes())?;
    w.write_all(&grid.lower().to_le_bytes())?;
    w.write_all(&grid.volume().to_le_bytes())?;
    w.write_all(&field.clamp_count().to_le_bytes())?;
    for seed in latent_seeds {
        w.write_all(&seed.to_le_bytes())?;
    }
    for value in field.raw_values() {
        w.write_all(&value.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub struct StoredCovariates {
    pub field: CovariateField,
    pub grid: SpatialGrid,
    pub latent_seeds: Vec<u64>,
}

pub fn read_covariates(path: &Path) -> Result<StoredCovariates, HarnessError> {
    let file = std::fs::File::open(path)?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != COVARIATE_MAGIC {
        return Err(runtime(format!(
            "{}: not a covariate container",
            path.display()
        )));
    }
    let version = read_u32(&mut r)?;
    if version != COVARIATE_VERSION {
        return Err(runtime(format!(
            "unsupported covariate container version {version}"
        )));
    }
    let dim = read_u32(&mut r)? as usize;
    let covariate_dim = read_u32(&mut r)? as usize;
    let cells_per_axis = read_u64(&mut r)? as usize;
    let spacing = read_f64(&mut r)?;
    let lower = read_f64(&mut r)?;
    let volume = read_f64(&mut r)?;
    let clamp_count = read_u64(&mut r)?;
    if dim == 0 || dim > 2 || covariate_dim == 0 || covariate_dim > 8 || cells_per_axis == 0 {
        return Err(runtime("covariate container header out of range"));
    }
    let mut latent_seeds = Vec::with_capacity(covariate_dim);
    for _ in 0..covariate_dim {
        latent_seeds.push(read_u64(&mut r)?);
    }
    let num_values = covariate_dim
        .checked_mul(
            cells_per_axis
                .checked_pow(dim as u32)
                .ok_or_else(|| runtime("grid too large"))?,
        )
        .ok_or_else(|| runtime("grid too large"))?;
    let mut values = vec![0.0f64; num_values];
    for value in values.iter_mut() {
        *value = read_f64(&mut r)?;
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(runtime("trailing bytes after covariate values"));
    }

    let grid = SpatialGrid::from_parts(dim, cells_per_axis, spacing, lower, volume)?;
    let field = CovariateField::from_raw(dim, covariate_dim, cells_per_axis, values, clamp_count)?;
    Ok(StoredCovariates {
        field,
        grid,
        latent_seeds,
    })
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, HarnessError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, HarnessError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64, HarnessError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

/// Point pattern CSV: `# key=value` header lines carrying the window
/// geometry and the sampling seed, a column header, then one row per point.
pub fn write_pattern(path: &Path, pattern: &PointPattern, seed: u64) -> Result<(), HarnessError> {
    let window = pattern.window();
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "# format=pattern-v1")?;
    writeln!(w, "# ambient_dim={}", window.dim())?;
    writeln!(w, "# cells_per_axis={}", window.cells_per_axis())?;
    writeln!(w, "# spacing={}", window.spacing())?;
    writeln!(w, "# lower={}", window.lower())?;
    writeln!(w, "# volume={}", window.volume())?;
    writeln!(w, "# count={}", pattern.count())?;
    writeln!(w, "# seed={seed}")?;
    let header: Vec<String> = (1..=window.dim()).map(|axis| format!("x{axis}")).collect();
    writeln!(w, "{}", header.join(","))?;
    for point in pattern.iter() {
        let row: Vec<String> = point.iter().map(|c| format!("{c}")).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_pattern(path: &Path) -> Result<(PointPattern, u64), HarnessError> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut header = std::collections::BTreeMap::new();
    let mut coords = Vec::new();
    let mut dim = 0usize;
    let mut saw_columns = false;
    for line in reader.lines() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("# ") {
            let (key, value) = rest
                .split_once('=')
                .ok_or_else(|| runtime(format!("bad header line {line:?}")))?;
            header.insert(key.to_string(), value.to_string());
            continue;
        }
        if !saw_columns {
            dim = line.split(',').count();
            saw_columns = true;
            continue;
        }
        for token in line.split(',') {
            let value: f64 = token
                .parse()
                .map_err(|_| runtime(format!("bad coordinate {token:?}")))?;
            coords.push(value);
        }
    }
    if !saw_columns {
        return Err(runtime("pattern file has no column header"));
    }

    let get = |key: &str| {
        header
            .get(key)
            .ok_or_else(|| runtime(format!("pattern header missing {key}")))
    };
    let stored_dim: usize = parse_header(get("ambient_dim")?)?;
    if stored_dim != dim {
        return Err(runtime("pattern column count disagrees with ambient_dim"));
    }
    let cells_per_axis: usize = parse_header(get("cells_per_axis")?)?;
    let spacing: f64 = parse_header(get("spacing")?)?;
    let lower: f64 = parse_header(get("lower")?)?;
    let volume: f64 = parse_header(get("volume")?)?;
    let count: usize = parse_header(get("count")?)?;
    let seed: u64 = parse_header(get("seed")?)?;
    let window = SpatialGrid::from_parts(stored_dim, cells_per_axis, spacing, lower, volume)?;
    let pattern = PointPattern::new(window, coords)?;
    if pattern.count() != count {
        return Err(runtime(format!(
            "pattern header claims {count} points, file has {}",
            pattern.count()
        )));
    }
    Ok((pattern, seed))
}

fn parse_header<T: std::str::FromStr>(value: &str) -> Result<T, HarnessError> {
    value
        .parse()
        .map_err(|_| runtime(format!("bad header value {value:?}")))
}
