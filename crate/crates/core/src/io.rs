//! Path and report files.
//!
//! Path CSV: `# key=value` metadata lines, then `index,coord_0,...,coord_{d-1}`
//! with one row per time index (1-based). Floats use 17 significant digits so
//! a written path reads back bit-for-bit.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::point::{Point, SamplePath};

/// Scientific notation with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_path_csv<W: Write>(path: &SamplePath, mut w: W) -> std::io::Result<()> {
    writeln!(w, "# process_id={}", path.process_id)?;
    writeln!(w, "# seed={}", path.seed)?;
    if let Some(k) = path.latent_component {
        writeln!(w, "# latent_component={k}")?;
    }
    if let Some(s) = path.split() {
        writeln!(w, "# pair_split={s}")?;
    }
    writeln!(w, "# n={}", path.len())?;
    let header: Vec<String> = std::iter::once("index".to_string())
        .chain((0..path.dim()).map(|i| format!("coord_{i}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for (i, p) in path.points().iter().enumerate() {
        write!(w, "{}", i + 1)?;
        for c in p.coords() {
            write!(w, ",{}", fmt_f64(*c))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

fn parse_err(source: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: source.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Parses a path CSV. `source` is used in error messages.
pub fn parse_path_csv(text: &str, source: &Path) -> Result<SamplePath> {
    let mut meta = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.trim().split_once('=') {
                if meta.insert(k.trim().to_string(), (v.trim().to_string(), i + 1)).is_some() {
                    return Err(parse_err(source, i + 1, format!("duplicate metadata key {}", k.trim())));
                }
            }
        }
    }
    let meta_num = |key: &str| -> Result<Option<u64>> {
        meta.get(key)
            .map(|(v, line)| {
                v.parse::<u64>()
                    .map_err(|_| parse_err(source, *line, format!("{key} must be a non-negative integer, got {v:?}")))
            })
            .transpose()
    };
    let seed = meta_num("seed")?.unwrap_or(0);
    let latent = meta_num("latent_component")?.map(|k| k as usize);
    let split = meta_num("pair_split")?.map(|s| s as usize);
    let process_id = meta.get("process_id").map_or("ingested".to_string(), |(v, _)| v.clone());

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| parse_err(source, 1, e.to_string()))?
        .clone();
    let header_line = text.lines().position(|l| !l.starts_with('#')).map_or(1, |i| i + 1);
    if headers.len() < 2 || &headers[0] != "index" {
        return Err(parse_err(source, header_line, "header must be index,coord_0,...,coord_{d-1}"));
    }
    for (i, h) in headers.iter().skip(1).enumerate() {
        if h != format!("coord_{i}") {
            return Err(parse_err(source, header_line, format!("expected column coord_{i}, found {h:?}")));
        }
    }

    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(source, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let index: usize = record[0]
            .parse()
            .map_err(|_| parse_err(source, line, format!("invalid index {:?}", &record[0])))?;
        if index != points.len() + 1 {
            return Err(parse_err(source, line, format!("expected index {}, found {index}", points.len() + 1)));
        }
        let coords = record
            .iter()
            .skip(1)
            .map(|c| c.parse::<f64>().map_err(|_| parse_err(source, line, format!("invalid number {c:?}"))))
            .collect::<Result<Vec<f64>>>()?;
        let point = match split {
            Some(s) => Point::with_split(coords, s),
            None => Point::new(coords),
        }
        .map_err(|e| parse_err(source, line, e.to_string()))?;
        points.push(point);
    }
    if points.is_empty() {
        return Err(parse_err(source, header_line, "no data rows"));
    }
    SamplePath::new(points, seed, latent, process_id)
}

pub fn read_path_csv(file: &Path) -> Result<SamplePath> {
    let text = std::fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
    parse_path_csv(&text, file)
}

/// Writes `target` through a temporary file in the same directory and renames it into place.
pub fn write_atomic<F>(target: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let dir = match target.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut buf).map_err(|e| Error::io(target, e))?;
        buf.flush().map_err(|e| Error::io(target, e))?;
    }
    tmp.persist(target).map_err(|e| Error::io(target, e.error))?;
    Ok(())
}
