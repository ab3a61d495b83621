//! Directory format shared by scenes and checkpoints: a JSON manifest plus one
//! raw little-endian file per array, each with a SHA-256 checksum.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq)]
pub enum ArrayData {
    F32(Vec<f32>),
    I32(Vec<i32>),
    F64(Vec<f64>),
}

impl ArrayData {
    fn dtype(&self) -> &'static str {
        match self {
            ArrayData::F32(_) => "f32",
            ArrayData::I32(_) => "i32",
            ArrayData::F64(_) => "f64",
        }
    }

    fn len(&self) -> usize {
        match self {
            ArrayData::F32(v) => v.len(),
            ArrayData::I32(v) => v.len(),
            ArrayData::F64(v) => v.len(),
        }
    }

    fn to_bytes(&self) -> Vec<u8> {
        match self {
            ArrayData::F32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            ArrayData::I32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            ArrayData::F64(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
        }
    }

    fn from_bytes(dtype: &str, bytes: &[u8]) -> Result<Self> {
        Ok(match dtype {
            "f32" => ArrayData::F32(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect()),
            "i32" => ArrayData::I32(bytes.chunks_exact(4).map(|c| i32::from_le_bytes(c.try_into().unwrap())).collect()),
            "f64" => ArrayData::F64(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()),
            other => return Err(Error::Manifest(format!("unknown dtype `{other}`"))),
        })
    }
}

fn elem_size(dtype: &str) -> usize {
    if dtype == "f64" {
        8
    } else {
        4
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Array {
    pub shape: Vec<usize>,
    pub data: ArrayData,
}

impl Array {
    pub fn f32(shape: Vec<usize>, data: Vec<f32>) -> Self {
        Self { shape, data: ArrayData::F32(data) }
    }

    pub fn i32(shape: Vec<usize>, data: Vec<i32>) -> Self {
        Self { shape, data: ArrayData::I32(data) }
    }

    pub fn f64(shape: Vec<usize>, data: Vec<f64>) -> Self {
        Self { shape, data: ArrayData::F64(data) }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    file: String,
    dtype: String,
    shape: Vec<usize>,
    sha256: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    kind: String,
    meta: serde_json::Value,
    arrays: BTreeMap<String, Entry>,
}

/// Contents of one store directory.
#[derive(Clone, Debug, PartialEq)]
pub struct Bundle {
    pub meta: serde_json::Value,
    pub arrays: BTreeMap<String, Array>,
}

impl Bundle {
    pub fn new(meta: serde_json::Value) -> Self {
        Self { meta, arrays: BTreeMap::new() }
    }

    pub fn insert(&mut self, name: &str, array: Array) {
        self.arrays.insert(name.to_string(), array);
    }

    fn take(&mut self, name: &str) -> Result<Array> {
        self.arrays
            .remove(name)
            .ok_or_else(|| Error::Manifest(format!("missing array `{name}`")))
    }

    pub fn take_f32(&mut self, name: &str) -> Result<(Vec<usize>, Vec<f32>)> {
        match self.take(name)? {
            Array { shape, data: ArrayData::F32(v) } => Ok((shape, v)),
            _ => Err(Error::Manifest(format!("array `{name}` is not f32"))),
        }
    }

    pub fn take_i32(&mut self, name: &str) -> Result<(Vec<usize>, Vec<i32>)> {
        match self.take(name)? {
            Array { shape, data: ArrayData::I32(v) } => Ok((shape, v)),
            _ => Err(Error::Manifest(format!("array `{name}` is not i32"))),
        }
    }

    pub fn take_f64(&mut self, name: &str) -> Result<(Vec<usize>, Vec<f64>)> {
        match self.take(name)? {
            Array { shape, data: ArrayData::F64(v) } => Ok((shape, v)),
            _ => Err(Error::Manifest(format!("array `{name}` is not f64"))),
        }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn write_bundle(dir: &Path, kind: &str, bundle: &Bundle) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut arrays = BTreeMap::new();
    for (name, array) in &bundle.arrays {
        if array.shape.iter().product::<usize>() != array.data.len() {
            return Err(Error::shape("write_bundle", format!("array `{name}` shape {:?}", array.shape)));
        }
        let bytes = array.data.to_bytes();
        let file = format!("{name}.bin");
        let path = dir.join(&file);
        fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
        arrays.insert(
            name.clone(),
            Entry {
                file,
                dtype: array.data.dtype().to_string(),
                shape: array.shape.clone(),
                sha256: sha256_hex(&bytes),
            },
        );
    }
    let manifest = Manifest {
        version: FORMAT_VERSION,
        kind: kind.to_string(),
        meta: bundle.meta.clone(),
        arrays,
    };
    let path = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

pub fn read_bundle(dir: &Path, kind: &str) -> Result<Bundle> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let raw: serde_json::Value = serde_json::from_str(&text)?;
    // Check the version before the rest of the schema so old layouts get a clear error.
    let version = raw
        .get("version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Manifest("missing version".into()))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(Error::VersionMismatch {
            found: version.try_into().unwrap_or(u32::MAX),
            expected: FORMAT_VERSION,
        });
    }
    let manifest: Manifest = serde_json::from_value(raw)?;
    if manifest.kind != kind {
        return Err(Error::Manifest(format!("expected a {kind} directory, found {}", manifest.kind)));
    }
    let mut arrays = BTreeMap::new();
    for (name, entry) in manifest.arrays {
        let path = dir.join(&entry.file);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let expected = entry.shape.iter().product::<usize>() * elem_size(&entry.dtype);
        if bytes.len() != expected {
            return Err(Error::Truncated { name, expected, found: bytes.len() });
        }
        if sha256_hex(&bytes) != entry.sha256 {
            return Err(Error::Checksum(name));
        }
        let data = ArrayData::from_bytes(&entry.dtype, &bytes)?;
        arrays.insert(name, Array { shape: entry.shape, data });
    }
    Ok(Bundle { meta: manifest.meta, arrays })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Bundle {
        let mut b = Bundle::new(serde_json::json!({ "seed": 3 }));
        b.insert("a", Array::f32(vec![2, 2], vec![1.0, -2.5, f32::MIN_POSITIVE, 4.0]));
        b.insert("b", Array::i32(vec![3], vec![0, -7, 9]));
        b.insert("c", Array::f64(vec![1], vec![std::f64::consts::PI]));
        b
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        write_bundle(dir.path(), "test", &sample()).unwrap();
        assert_eq!(read_bundle(dir.path(), "test").unwrap(), sample());
    }

    #[test]
    fn unknown_version_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        write_bundle(dir.path(), "test", &sample()).unwrap();
        let p = dir.path().join(MANIFEST);
        let text = fs::read_to_string(&p).unwrap().replace("\"version\": 1", "\"version\": 99");
        fs::write(&p, text).unwrap();
        assert!(matches!(
            read_bundle(dir.path(), "test"),
            Err(Error::VersionMismatch { found: 99, .. })
        ));
    }

    #[test]
    fn truncation_and_corruption_are_detected() {
        let dir = tempfile::tempdir().unwrap();
        write_bundle(dir.path(), "test", &sample()).unwrap();
        let p = dir.path().join("a.bin");
        let mut bytes = fs::read(&p).unwrap();
        bytes[0] ^= 1;
        fs::write(&p, &bytes).unwrap();
        assert!(matches!(read_bundle(dir.path(), "test"), Err(Error::Checksum(_))));
        bytes.pop();
        fs::write(&p, &bytes).unwrap();
        assert!(matches!(read_bundle(dir.path(), "test"), Err(Error::Truncated { .. })));
        assert!(read_bundle(dir.path(), "other").is_err());
    }
}
