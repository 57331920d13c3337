//! Field files: a JSON descriptor plus a raw little-endian `f64` payload.
//!
//! ```text
//! <name>.json  {"kind":"map","dim_in":2,"dim_out":2,"shape":[..],"spacing":[..],"origin":[..],"data":"<name>.f64"}
//! <name>.f64   row-major samples (last axis fastest), components interleaved
//! ```
//!
//! Measures use `"kind":"measure"` and `"m"` in place of `"dim_out"`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{CellMeasure, Grid, SampledMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Map,
    Measure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub kind: FieldKind,
    pub dim_in: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dim_out: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub m: Option<usize>,
    pub shape: Vec<usize>,
    pub spacing: Vec<f64>,
    pub origin: Vec<f64>,
    pub data: String,
}

/// Either kind of field file.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Map(SampledMap<f64>),
    Measure(CellMeasure<f64>),
}

/// `dir/name.json` and `dir/name.f64` for a path given with or without
/// the `.json` extension.
fn paths_for(path: &Path) -> (PathBuf, PathBuf, String) {
    let stem_path = if path.extension().is_some_and(|e| e == "json") {
        path.with_extension("")
    } else {
        path.to_path_buf()
    };
    let name = stem_path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "field".into());
    let json = stem_path.with_file_name(format!("{name}.json"));
    let data = stem_path.with_file_name(format!("{name}.f64"));
    (json, data, format!("{name}.f64"))
}

fn write_payload(path: &Path, values: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn save_map(path: impl AsRef<Path>, f: &SampledMap<f64>) -> Result<()> {
    if !f.all_finite() {
        return Err(Error::InvalidArgument("refusing to save non-finite samples".into()));
    }
    let (json, data, data_name) = paths_for(path.as_ref());
    let g = f.grid();
    let desc = Descriptor {
        kind: FieldKind::Map,
        dim_in: f.dim_in(),
        dim_out: Some(f.dim_out()),
        m: None,
        shape: g.shape.clone(),
        spacing: g.spacing.clone(),
        origin: g.origin.clone(),
        data: data_name,
    };
    write_payload(&data, f.values())?;
    fs::write(&json, serde_json::to_vec_pretty(&desc).expect("descriptor serializes"))?;
    Ok(())
}

pub fn save_measure(path: impl AsRef<Path>, mu: &CellMeasure<f64>) -> Result<()> {
    if !mu.all_finite() {
        return Err(Error::InvalidArgument("refusing to save non-finite weights".into()));
    }
    let (json, data, data_name) = paths_for(path.as_ref());
    let desc = Descriptor {
        kind: FieldKind::Measure,
        dim_in: mu.shape.len(),
        dim_out: None,
        m: Some(mu.m),
        shape: mu.shape.clone(),
        spacing: mu.spacing.clone(),
        origin: mu.origin.clone(),
        data: data_name,
    };
    write_payload(&data, mu.weights())?;
    fs::write(&json, serde_json::to_vec_pretty(&desc).expect("descriptor serializes"))?;
    Ok(())
}

pub fn save_field(path: impl AsRef<Path>, field: &Field) -> Result<()> {
    match field {
        Field::Map(f) => save_map(path, f),
        Field::Measure(mu) => save_measure(path, mu),
    }
}

/// Byte offset of a 1-based (line, column) position in `text`.
fn byte_offset(text: &str, line: usize, column: usize) -> u64 {
    let mut offset = 0usize;
    for (i, l) in text.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            return (offset + column.saturating_sub(1)) as u64;
        }
        offset += l.len();
    }
    offset as u64
}

fn parse_descriptor(text: &str) -> Result<Descriptor> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        offset: byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    })
}

fn read_payload(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Parse {
            offset: bytes.len() as u64,
            message: format!("payload length {} is not a multiple of 8", bytes.len()),
        });
    }
    let n = bytes.len() / 8;
    if n != expected {
        return Err(Error::Parse {
            offset: (expected.min(n) * 8) as u64,
            message: format!("descriptor expects {expected} values, payload has {n}"),
        });
    }
    let mut values = Vec::with_capacity(n);
    for (i, chunk) in bytes.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("chunk of 8"));
        if !v.is_finite() {
            return Err(Error::Parse {
                offset: (i * 8) as u64,
                message: format!("non-finite value {v} at index {i}"),
            });
        }
        values.push(v);
    }
    Ok(values)
}

pub fn load_field(path: impl AsRef<Path>) -> Result<Field> {
    let (json, _, _) = paths_for(path.as_ref());
    let text = fs::read_to_string(&json)?;
    let desc = parse_descriptor(&text)?;
    if desc.shape.len() != desc.dim_in {
        return Err(Error::Parse {
            offset: 0,
            message: format!(
                "shape has {} axes but dim_in is {}",
                desc.shape.len(),
                desc.dim_in
            ),
        });
    }
    let data_path = json.with_file_name(&desc.data);
    let cells: usize = desc.shape.iter().product();
    match desc.kind {
        FieldKind::Map => {
            let m = desc.dim_out.ok_or_else(|| Error::Parse {
                offset: 0,
                message: "map descriptor lacks dim_out".into(),
            })?;
            let values = read_payload(&data_path, cells * m)?;
            let grid = Grid::new(desc.shape, desc.spacing, desc.origin)?;
            Ok(Field::Map(SampledMap::new(grid, m, values)?))
        }
        FieldKind::Measure => {
            let m = desc.m.ok_or_else(|| Error::Parse {
                offset: 0,
                message: "measure descriptor lacks m".into(),
            })?;
            let values = read_payload(&data_path, cells * m)?;
            Ok(Field::Measure(CellMeasure::new(
                desc.shape,
                desc.spacing,
                desc.origin,
                m,
                values,
            )?))
        }
    }
}

pub fn load_map(path: impl AsRef<Path>) -> Result<SampledMap<f64>> {
    match load_field(path)? {
        Field::Map(f) => Ok(f),
        Field::Measure(_) => Err(Error::InvalidArgument("expected a map, found a measure".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity() -> SampledMap<f64> {
        let g = Grid::spanning(&[4, 3, 5], &[0.0; 3], &[1.0; 3]).unwrap();
        SampledMap::from_fn(g, 3, |x, o| o.copy_from_slice(x)).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let f = identity();
        save_map(dir.path().join("id"), &f).unwrap();
        let back = load_map(dir.path().join("id.json")).unwrap();
        assert_eq!(back, f);
        let desc: serde_json::Value =
            serde_json::from_slice(&fs::read(dir.path().join("id.json")).unwrap()).unwrap();
        assert_eq!(desc["kind"], "map");
        assert_eq!(desc["data"], "id.f64");

        let mu = CellMeasure::new(vec![2, 2], vec![0.5, 0.5], vec![0.0, 0.0], 1, vec![
            1.0, -2.0, 0.1, 3.0,
        ])
        .unwrap();
        save_measure(dir.path().join("mu"), &mu).unwrap();
        assert_eq!(load_field(dir.path().join("mu")).unwrap(), Field::Measure(mu));
    }

    #[test]
    fn length_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        save_map(dir.path().join("id"), &identity()).unwrap();
        let data = dir.path().join("id.f64");
        let mut bytes = fs::read(&data).unwrap();
        bytes.truncate(bytes.len() - 8);
        fs::write(&data, bytes).unwrap();
        match load_field(dir.path().join("id")) {
            Err(Error::Parse { message, .. }) => assert!(message.contains("expects 180")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nan_payload_names_index() {
        let dir = tempfile::tempdir().unwrap();
        save_map(dir.path().join("id"), &identity()).unwrap();
        let data = dir.path().join("id.f64");
        let mut bytes = fs::read(&data).unwrap();
        bytes[40..48].copy_from_slice(&f64::NAN.to_le_bytes());
        fs::write(&data, bytes).unwrap();
        match load_field(dir.path().join("id")) {
            Err(Error::Parse { offset, message }) => {
                assert_eq!(offset, 40);
                assert!(message.contains("index 5"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_descriptor_has_offset() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("bad.json"), "{\n  \"kind\": \"map\",\n  \"dim_in\": oops\n}")
            .unwrap();
        match load_field(dir.path().join("bad")) {
            Err(Error::Parse { offset, .. }) => assert!(offset >= 30 && offset < 40, "{offset}"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
