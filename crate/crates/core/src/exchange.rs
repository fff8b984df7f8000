//! Binary container for matrices, banks and layer parameters.
//!
//! Layout: the magic `UNH1`, a little-endian `u32` header length, a UTF-8
//! JSON header, then the tensors back to back as little-endian row-major
//! data. The header lists every tensor with its name, shape, dtype
//! (`f64` or `f32`) and byte offset/length relative to the payload start,
//! plus a free-form `meta` object.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::hippo::Scheme;
use crate::kalman::{BankKind, BankMeta, InitBank, TransitionPair};
use crate::matfun::Matrix;
use crate::ssm::{LsslLayer, SsmCore};

pub const MAGIC: &[u8; 4] = b"UNH1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum TensorData {
    F64(Vec<f64>),
    F32(Vec<f32>),
}

impl TensorData {
    pub fn dtype(&self) -> &'static str {
        match self {
            TensorData::F64(_) => "f64",
            TensorData::F32(_) => "f32",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorData::F64(v) => v.len(),
            TensorData::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn byte_len(&self) -> usize {
        match self {
            TensorData::F64(v) => v.len() * 8,
            TensorData::F32(v) => v.len() * 4,
        }
    }

    fn write_le(&self, out: &mut Vec<u8>) {
        match self {
            TensorData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
    }

    /// Bitwise equality, so NaN payloads compare equal to themselves.
    pub fn bits_eq(&self, other: &TensorData) -> bool {
        match (self, other) {
            (TensorData::F64(a), TensorData::F64(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            (TensorData::F32(a), TensorData::F32(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: TensorData,
}

impl Tensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: TensorData) -> Result<Self> {
        let name = name.into();
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::input(format!("tensor '{name}' needs a nonzero shape, got {shape:?}")));
        }
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::dim(format!(
                "tensor '{name}' has shape {shape:?} but {} elements",
                data.len()
            )));
        }
        Ok(Self { name, shape, data })
    }

    pub fn from_matrix(name: impl Into<String>, m: &Matrix) -> Result<Self> {
        Self::new(name, vec![m.rows(), m.cols()], TensorData::F64(m.as_slice().to_vec()))
    }

    pub fn from_vector(name: impl Into<String>, v: &[f64]) -> Result<Self> {
        Self::new(name, vec![v.len()], TensorData::F64(v.to_vec()))
    }

    pub fn to_matrix(&self) -> Result<Matrix> {
        match (&self.data, self.shape.as_slice()) {
            (TensorData::F64(v), &[r, c]) => Matrix::from_row_major(r, c, v.clone()),
            _ => Err(Error::format(
                format!("tensor {}", self.name),
                format!("expected a 2-d f64 tensor, got {} {:?}", self.data.dtype(), self.shape),
            )),
        }
    }

    pub fn to_vector(&self) -> Result<Vec<f64>> {
        match (&self.data, self.shape.as_slice()) {
            (TensorData::F64(v), &[_]) => Ok(v.clone()),
            _ => Err(Error::format(
                format!("tensor {}", self.name),
                format!("expected a 1-d f64 tensor, got {} {:?}", self.data.dtype(), self.shape),
            )),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
    dtype: String,
    offset: u64,
    length: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    tensors: Vec<Entry>,
    meta: Value,
}

/// Writes the container atomically: the bytes go to a temporary file in the
/// target directory, which is then renamed over `path`.
pub fn write_container(path: &Path, tensors: &[Tensor], meta: Map<String, Value>) -> Result<()> {
    let mut seen = HashSet::new();
    for t in tensors {
        if !seen.insert(t.name.as_str()) {
            return Err(Error::input(format!("duplicate tensor name '{}'", t.name)));
        }
    }
    let mut entries = Vec::with_capacity(tensors.len());
    let mut offset = 0u64;
    for t in tensors {
        let length = t.data.byte_len() as u64;
        entries.push(Entry {
            name: t.name.clone(),
            shape: t.shape.clone(),
            dtype: t.data.dtype().to_string(),
            offset,
            length,
        });
        offset += length;
    }
    let header = serde_json::to_vec(&Header {
        format_version: FORMAT_VERSION,
        tensors: entries,
        meta: Value::Object(meta),
    })
    .map_err(|e| Error::format("header", e.to_string()))?;
    let header_len = u32::try_from(header.len()).map_err(|_| Error::format("header_len", "header exceeds 4 GiB"))?;

    let mut bytes = Vec::with_capacity(8 + header.len() + offset as usize);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&header_len.to_le_bytes());
    bytes.extend_from_slice(&header);
    for t in tensors {
        t.data.write_le(&mut bytes);
    }

    let io = |e: std::io::Error| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(&bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn read_container(path: &Path) -> Result<(Vec<Tensor>, Map<String, Value>)> {
    let bytes = fs::read(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_container(&bytes)
}

pub fn parse_container(bytes: &[u8]) -> Result<(Vec<Tensor>, Map<String, Value>)> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::format("magic", "expected 'UNH1'"));
    }
    if bytes.len() < 8 {
        return Err(Error::format("header_len", "file ends before the header length"));
    }
    let header_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let payload_start = 8usize
        .checked_add(header_len)
        .filter(|&end| end <= bytes.len())
        .ok_or_else(|| Error::format("header_len", format!("{header_len} bytes declared, file too short")))?;
    let header_bytes = &bytes[8..payload_start];
    let raw: Value = serde_json::from_slice(header_bytes).map_err(|e| Error::format("header", e.to_string()))?;
    match raw.get("format_version").and_then(Value::as_u64) {
        Some(v) if v == FORMAT_VERSION as u64 => {}
        Some(v) => return Err(Error::format("format_version", format!("unsupported version {v}"))),
        None => return Err(Error::format("format_version", "missing")),
    }
    let header: Header = serde_json::from_value(raw).map_err(|e| Error::format("header", e.to_string()))?;
    let meta = match header.meta {
        Value::Object(m) => m,
        _ => return Err(Error::format("meta", "must be a JSON object")),
    };

    let payload = &bytes[payload_start..];
    let mut tensors = Vec::with_capacity(header.tensors.len());
    let mut seen = HashSet::new();
    let mut expected_offset = 0u64;
    for (i, e) in header.tensors.iter().enumerate() {
        let field = |f: &str| format!("tensors[{i}].{f}");
        if !seen.insert(e.name.clone()) {
            return Err(Error::format(field("name"), format!("duplicate name '{}'", e.name)));
        }
        let width = match e.dtype.as_str() {
            "f64" => 8u64,
            "f32" => 4u64,
            other => return Err(Error::format(field("dtype"), format!("unknown dtype '{other}'"))),
        };
        if e.shape.is_empty() || e.shape.contains(&0) {
            return Err(Error::format(field("shape"), format!("{:?} has a zero or missing dimension", e.shape)));
        }
        let count = e
            .shape
            .iter()
            .try_fold(1u64, |acc, &d| acc.checked_mul(d as u64))
            .ok_or_else(|| Error::format(field("shape"), "element count overflows"))?;
        if count.checked_mul(width) != Some(e.length) {
            return Err(Error::format(
                field("length"),
                format!("{} bytes does not match shape {:?} of {}", e.length, e.shape, e.dtype),
            ));
        }
        if e.offset != expected_offset {
            return Err(Error::format(
                field("offset"),
                format!("{} but the previous tensor ends at {expected_offset}", e.offset),
            ));
        }
        let end = e.offset + e.length;
        if end > payload.len() as u64 {
            return Err(Error::format(
                "payload",
                format!("tensor '{}' needs {end} bytes, payload has {}", e.name, payload.len()),
            ));
        }
        let chunk = &payload[e.offset as usize..end as usize];
        let data = if width == 8 {
            TensorData::F64(chunk.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
        } else {
            TensorData::F32(chunk.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
        };
        tensors.push(Tensor {
            name: e.name.clone(),
            shape: e.shape.clone(),
            data,
        });
        expected_offset = end;
    }
    if expected_offset != payload.len() as u64 {
        return Err(Error::format(
            "payload",
            format!("{} trailing bytes after the last tensor", payload.len() as u64 - expected_offset),
        ));
    }
    Ok((tensors, meta))
}

fn meta_str<'a>(meta: &'a Map<String, Value>, key: &str) -> Result<&'a str> {
    meta.get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| Error::format(format!("meta.{key}"), "missing or not a string"))
}

fn meta_usize(meta: &Map<String, Value>, key: &str) -> Result<usize> {
    meta.get(key)
        .and_then(Value::as_u64)
        .map(|v| v as usize)
        .ok_or_else(|| Error::format(format!("meta.{key}"), "missing or not an unsigned integer"))
}

fn meta_f64(meta: &Map<String, Value>, key: &str) -> Result<f64> {
    meta.get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| Error::format(format!("meta.{key}"), "missing or not a number"))
}

fn find<'a>(tensors: &'a [Tensor], name: &str) -> Result<&'a Tensor> {
    tensors
        .iter()
        .find(|t| t.name == name)
        .ok_or_else(|| Error::format(format!("tensor {name}"), "missing"))
}

fn into_map(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => Map::new(),
    }
}

/// Tensors `A_1..A_T` then `B_1..B_T`, and the bank's metadata.
pub fn bank_to_tensors(bank: &InitBank) -> Result<(Vec<Tensor>, Map<String, Value>)> {
    let mut tensors = Vec::with_capacity(2 * bank.t_max);
    for (k, p) in bank.pairs.iter().enumerate() {
        tensors.push(Tensor::from_matrix(format!("A_{}", k + 1), &p.a)?);
    }
    for (k, p) in bank.pairs.iter().enumerate() {
        tensors.push(Tensor::from_vector(format!("B_{}", k + 1), &p.b)?);
    }
    let meta = json!({
        "kind": bank.kind.name(),
        "n": bank.n,
        "t_max": bank.t_max,
        "sigma2": bank.meta.sigma2,
        "process_scale": bank.meta.process_scale,
        "scheme": bank.meta.scheme.name(),
        "created_by": bank.meta.created_by,
    });
    Ok((tensors, into_map(meta)))
}

pub fn write_bank(path: &Path, bank: &InitBank) -> Result<()> {
    let (tensors, meta) = bank_to_tensors(bank)?;
    write_container(path, &tensors, meta)
}

pub fn bank_from_tensors(tensors: &[Tensor], meta: &Map<String, Value>) -> Result<InitBank> {
    let kind: BankKind = meta_str(meta, "kind")?
        .parse()
        .map_err(|e: Error| Error::format("meta.kind", e.to_string()))?;
    let scheme: Scheme = meta_str(meta, "scheme")?
        .parse()
        .map_err(|e: Error| Error::format("meta.scheme", e.to_string()))?;
    let n = meta_usize(meta, "n")?;
    let t_max = meta_usize(meta, "t_max")?;
    let mut pairs = Vec::with_capacity(t_max);
    for k in 1..=t_max {
        let a = find(tensors, &format!("A_{k}"))?.to_matrix()?;
        let b = find(tensors, &format!("B_{k}"))?.to_vector()?;
        if a.shape() != (n, n) || b.len() != n {
            return Err(Error::format(format!("tensor A_{k}"), format!("shape does not match n = {n}")));
        }
        pairs.push(TransitionPair { a, b });
    }
    Ok(InitBank {
        n,
        t_max,
        kind,
        pairs,
        meta: BankMeta {
            sigma2: meta_f64(meta, "sigma2")?,
            process_scale: meta_f64(meta, "process_scale")?,
            scheme,
            created_by: meta_str(meta, "created_by")?.to_string(),
        },
    })
}

pub fn read_bank(path: &Path) -> Result<InitBank> {
    let (tensors, meta) = read_container(path)?;
    bank_from_tensors(&tensors, &meta)
}

/// Per core `i`: `core{i}.A`, `.B`, `.C`, `.D`; then `mix_weights` and
/// `mix_bias`.
pub fn layer_to_tensors(layer: &LsslLayer) -> Result<(Vec<Tensor>, Map<String, Value>)> {
    let mut tensors = Vec::with_capacity(4 * layer.h() + 2);
    for (i, core) in layer.cores.iter().enumerate() {
        tensors.push(Tensor::from_matrix(format!("core{i}.A"), &core.a)?);
        tensors.push(Tensor::from_vector(format!("core{i}.B"), &core.b)?);
        tensors.push(Tensor::from_matrix(format!("core{i}.C"), &core.c)?);
        tensors.push(Tensor::from_vector(format!("core{i}.D"), &core.d)?);
    }
    tensors.push(Tensor::from_matrix("mix_weights", &layer.mix_weights)?);
    tensors.push(Tensor::from_vector("mix_bias", &layer.mix_bias)?);
    let meta = json!({
        "kind": "lssl_layer",
        "h": layer.h(),
        "n": layer.n(),
        "m": layer.m(),
        "created_by": crate::kalman::tool_version(),
    });
    Ok((tensors, into_map(meta)))
}

pub fn write_layer(path: &Path, layer: &LsslLayer) -> Result<()> {
    let (tensors, meta) = layer_to_tensors(layer)?;
    write_container(path, &tensors, meta)
}

pub fn layer_from_tensors(tensors: &[Tensor], meta: &Map<String, Value>) -> Result<LsslLayer> {
    if meta_str(meta, "kind")? != "lssl_layer" {
        return Err(Error::format("meta.kind", "expected 'lssl_layer'"));
    }
    let h = meta_usize(meta, "h")?;
    let cores = (0..h)
        .map(|i| {
            let get = |p: &str| find(tensors, &format!("core{i}.{p}"));
            SsmCore::new(
                get("A")?.to_matrix()?,
                get("B")?.to_vector()?,
                get("C")?.to_matrix()?,
                get("D")?.to_vector()?,
            )
            .map_err(|e| Error::format(format!("core{i}"), e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    LsslLayer::new(
        cores,
        find(tensors, "mix_weights")?.to_matrix()?,
        find(tensors, "mix_bias")?.to_vector()?,
    )
    .map_err(|e| Error::format("mix_weights", e.to_string()))
}

pub fn read_layer(path: &Path) -> Result<LsslLayer> {
    let (tensors, meta) = read_container(path)?;
    layer_from_tensors(&tensors, &meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kalman::{build_init_bank, NoiseConfig};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_tensors() -> Vec<Tensor> {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut v: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        v[3] = f64::from_bits(0x7ff8_0000_dead_beef);
        v[4] = f64::NEG_INFINITY;
        v[5] = -0.0;
        vec![
            Tensor::new("x", vec![3, 4], TensorData::F64(v)).unwrap(),
            Tensor::new("y", vec![2], TensorData::F32(vec![1.5, f32::from_bits(0x7fc0_1234)])).unwrap(),
        ]
    }

    #[test]
    fn round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.unh");
        let tensors = sample_tensors();
        write_container(&path, &tensors, Map::new()).unwrap();
        let (back, meta) = read_container(&path).unwrap();
        assert!(meta.is_empty());
        assert_eq!(back.len(), 2);
        for (a, b) in tensors.iter().zip(&back) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.shape, b.shape);
            assert!(a.data.bits_eq(&b.data));
        }
        let raw = fs::read(&path).unwrap();
        let hl = u32::from_le_bytes(raw[4..8].try_into().unwrap()) as usize;
        let header: Value = serde_json::from_slice(&raw[8..8 + hl]).unwrap();
        assert_eq!(header["meta"], json!({}));
        assert_eq!(header["format_version"], json!(1));
        assert_eq!(header["tensors"][1]["offset"], json!(96));
    }

    #[test]
    fn rejects_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.unh");
        write_container(&path, &sample_tensors(), Map::new()).unwrap();
        let good = fs::read(&path).unwrap();
        let field_of = |bytes: &[u8]| match parse_container(bytes) {
            Err(Error::Format { field, .. }) => field,
            other => panic!("expected format error, got {other:?}"),
        };

        assert_eq!(field_of(&good[..good.len() - 1]), "payload");
        let mut bad = good.clone();
        bad[3] = b'2';
        assert_eq!(field_of(&bad), "magic");
        let mut long = good.clone();
        long.push(0);
        assert_eq!(field_of(&long), "payload");
        assert_eq!(field_of(&good[..6]), "header_len");

        let hl = u32::from_le_bytes(good[4..8].try_into().unwrap()) as usize;
        let edit = |f: &dyn Fn(&mut Value)| {
            let mut h: Value = serde_json::from_slice(&good[8..8 + hl]).unwrap();
            f(&mut h);
            let hb = serde_json::to_vec(&h).unwrap();
            let mut out = b"UNH1".to_vec();
            out.extend_from_slice(&(hb.len() as u32).to_le_bytes());
            out.extend_from_slice(&hb);
            out.extend_from_slice(&good[8 + hl..]);
            out
        };
        assert_eq!(field_of(&edit(&|h| h["tensors"][0]["shape"] = json!([4, 4]))), "tensors[0].length");
        assert_eq!(field_of(&edit(&|h| h["tensors"][1]["offset"] = json!(8))), "tensors[1].offset");
        assert_eq!(field_of(&edit(&|h| h["tensors"][1]["dtype"] = json!("i8"))), "tensors[1].dtype");
        assert_eq!(field_of(&edit(&|h| h["format_version"] = json!(2))), "format_version");
        assert_eq!(field_of(&edit(&|h| h["tensors"][0]["shape"] = json!([0, 4]))), "tensors[0].shape");
    }

    #[test]
    fn write_validation() {
        let dir = tempfile::tempdir().unwrap();
        let t = sample_tensors();
        let dup = vec![t[0].clone(), t[0].clone()];
        assert!(write_container(&dir.path().join("d.unh"), &dup, Map::new()).is_err());
        assert!(Tensor::new("z", vec![0], TensorData::F64(vec![])).is_err());
        assert!(Tensor::new("z", vec![2, 2], TensorData::F64(vec![1.0])).is_err());
        let missing = dir.path().join("no/such/dir/x.unh");
        assert!(matches!(write_container(&missing, &t, Map::new()), Err(Error::Io { .. })));
    }

    #[test]
    fn bank_layout() {
        let bank = build_init_bank(4, 3, BankKind::Unhippo, NoiseConfig::default(), Scheme::ClosedForm).unwrap();
        let (tensors, meta) = bank_to_tensors(&bank).unwrap();
        let names: Vec<_> = tensors.iter().map(|t| t.name.as_str()).collect();
        assert_eq!(names, ["A_1", "A_2", "A_3", "B_1", "B_2", "B_3"]);
        assert!(tensors[..3].iter().all(|t| t.shape == [4, 4]));
        assert!(tensors[3..].iter().all(|t| t.shape == [4]));
        assert_eq!(meta["kind"], json!("unhippo"));
        assert_eq!(meta["scheme"], json!("closed_form"));
        assert_eq!(meta["sigma2"], json!(1e10));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.unh");
        write_bank(&path, &bank).unwrap();
        let back = read_bank(&path).unwrap();
        assert_eq!(back.pairs, bank.pairs);
        assert_eq!(back.meta, bank.meta);
        assert_eq!((back.n, back.t_max, back.kind), (4, 3, BankKind::Unhippo));
    }

    #[test]
    fn layer_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut r = |rows, cols| Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
        let cores = (0..3)
            .map(|_| SsmCore::new(r(4, 4), r(1, 4).into_vec(), r(2, 4), r(1, 2).into_vec()).unwrap())
            .collect();
        let layer = LsslLayer::new(cores, r(6, 3), r(1, 3).into_vec()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.unh");
        write_layer(&path, &layer).unwrap();
        assert_eq!(read_layer(&path).unwrap(), layer);
        assert!(read_bank(&path).is_err());
    }
}
