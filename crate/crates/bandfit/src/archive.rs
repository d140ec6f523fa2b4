//! Tensor archive container.
//!
//! Layout: an 8-byte little-endian `u64` header length `N`, then `N` bytes of
//! UTF-8 JSON, then the raw payload. The header maps each tensor name to
//! `{"dtype": "F32", "shape": [...], "data_offsets": [begin, end]}` with
//! offsets relative to the payload start, plus an optional `"__metadata__"`
//! object that may carry `"layer_order"` (array of layer-name prefixes in
//! depth order) and `"model_id"`. Tensors are row-major little-endian `f32`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use thiserror::Error;

pub const METADATA_KEY: &str = "__metadata__";
const HEADER_PREFIX: usize = 8;

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed header at byte {offset}: {message}")]
    Parse { offset: u64, message: String },
    #[error("tensor `{tensor}` has unsupported dtype `{dtype}` (only F32 is supported)")]
    UnsupportedDtype { tensor: String, dtype: String },
    #[error("truncated archive: `{what}` needs {needed} bytes but only {available} are present")]
    Truncated { what: String, needed: u64, available: u64 },
    #[error("invalid tensor `{tensor}`: {reason}")]
    InvalidTensor { tensor: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
}

impl Dtype {
    pub fn width(self) -> usize {
        4
    }

    pub fn tag(self) -> &'static str {
        "F32"
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorEntry {
    pub dtype: Dtype,
    pub shape: Vec<usize>,
    /// Byte range within the payload.
    pub begin: usize,
    pub end: usize,
}

impl TensorEntry {
    pub fn element_count(&self) -> usize {
        self.shape.iter().product()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ArchiveMetadata {
    pub layer_order: Option<Vec<String>>,
    pub model_id: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorArchive {
    pub entries: BTreeMap<String, TensorEntry>,
    pub metadata: ArchiveMetadata,
    pub payload: Vec<u8>,
}

impl TensorArchive {
    /// Decoded values of a tensor, row-major.
    pub fn tensor_f32(&self, name: &str) -> Option<Vec<f32>> {
        let e = self.entries.get(name)?;
        Some(
            self.payload[e.begin..e.end]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect(),
        )
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ArchiveError> {
        if bytes.len() < HEADER_PREFIX {
            return Err(ArchiveError::Truncated {
                what: "header length".into(),
                needed: HEADER_PREFIX as u64,
                available: bytes.len() as u64,
            });
        }
        let header_len = u64::from_le_bytes(bytes[..HEADER_PREFIX].try_into().expect("8 bytes"));
        let available = (bytes.len() - HEADER_PREFIX) as u64;
        if header_len > available {
            return Err(ArchiveError::Truncated {
                what: "header".into(),
                needed: header_len,
                available,
            });
        }
        let header_end = HEADER_PREFIX + header_len as usize;
        let header_bytes = &bytes[HEADER_PREFIX..header_end];
        let text = std::str::from_utf8(header_bytes).map_err(|e| ArchiveError::Parse {
            offset: (HEADER_PREFIX + e.valid_up_to()) as u64,
            message: "header is not valid UTF-8".into(),
        })?;
        let root: Value = if text.trim().is_empty() {
            Value::Object(Map::new())
        } else {
            serde_json::from_str(text).map_err(|e| ArchiveError::Parse {
                offset: (HEADER_PREFIX + byte_offset(text, e.line(), e.column())) as u64,
                message: e.to_string(),
            })?
        };
        let Value::Object(map) = root else {
            return Err(parse_error(HEADER_PREFIX, "header must be a JSON object"));
        };
        let payload = &bytes[header_end..];

        let mut entries = BTreeMap::new();
        let mut metadata = ArchiveMetadata::default();
        for (name, value) in map {
            if name == METADATA_KEY {
                metadata = parse_metadata(&value)?;
                continue;
            }
            let entry = parse_entry(&name, &value)?;
            if entry.end > payload.len() {
                return Err(ArchiveError::Truncated {
                    what: name,
                    needed: entry.end as u64,
                    available: payload.len() as u64,
                });
            }
            entries.insert(name, entry);
        }

        let mut ranges: Vec<(&String, &TensorEntry)> = entries.iter().collect();
        ranges.sort_by_key(|(_, e)| (e.begin, e.end));
        for pair in ranges.windows(2) {
            let ((_, a), (name, b)) = (pair[0], pair[1]);
            if b.begin < a.end && b.begin < b.end && a.begin < a.end {
                return Err(ArchiveError::InvalidTensor {
                    tensor: name.to_string(),
                    reason: format!("byte range [{}, {}) overlaps [{}, {})", b.begin, b.end, a.begin, a.end),
                });
            }
        }

        Ok(Self {
            entries,
            metadata,
            payload: payload.to_vec(),
        })
    }

    /// Serializes with tensors laid out in name order and the header padded
    /// with spaces to a multiple of 8 bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut header = Map::new();
        let mut payload = Vec::with_capacity(self.payload.len());
        for (name, e) in &self.entries {
            let begin = payload.len();
            payload.extend_from_slice(&self.payload[e.begin..e.end]);
            header.insert(
                name.clone(),
                json!({
                    "dtype": e.dtype.tag(),
                    "shape": e.shape,
                    "data_offsets": [begin, payload.len()],
                }),
            );
        }
        let mut meta = Map::new();
        if let Some(order) = &self.metadata.layer_order {
            meta.insert("layer_order".into(), json!(order));
        }
        if let Some(id) = &self.metadata.model_id {
            meta.insert("model_id".into(), json!(id));
        }
        if !meta.is_empty() {
            header.insert(METADATA_KEY.into(), Value::Object(meta));
        }
        let mut text = serde_json::to_string(&Value::Object(header)).expect("JSON map serializes");
        while text.len() % 8 != 0 {
            text.push(' ');
        }
        let mut out = Vec::with_capacity(HEADER_PREFIX + text.len() + payload.len());
        out.extend_from_slice(&(text.len() as u64).to_le_bytes());
        out.extend_from_slice(text.as_bytes());
        out.extend_from_slice(&payload);
        out
    }
}

fn parse_error(offset: usize, message: &str) -> ArchiveError {
    ArchiveError::Parse {
        offset: offset as u64,
        message: message.into(),
    }
}

/// Byte offset of a 1-based (line, column) position reported by serde_json.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

fn invalid(tensor: &str, reason: impl Into<String>) -> ArchiveError {
    ArchiveError::InvalidTensor {
        tensor: tensor.into(),
        reason: reason.into(),
    }
}

fn parse_entry(name: &str, value: &Value) -> Result<TensorEntry, ArchiveError> {
    let obj = value
        .as_object()
        .ok_or_else(|| invalid(name, "entry is not an object"))?;
    let dtype = obj
        .get("dtype")
        .and_then(Value::as_str)
        .ok_or_else(|| invalid(name, "missing dtype"))?;
    if dtype != "F32" {
        return Err(ArchiveError::UnsupportedDtype {
            tensor: name.into(),
            dtype: dtype.into(),
        });
    }
    let shape = obj
        .get("shape")
        .and_then(Value::as_array)
        .ok_or_else(|| invalid(name, "missing shape"))?
        .iter()
        .map(|d| d.as_u64().map(|d| d as usize))
        .collect::<Option<Vec<usize>>>()
        .ok_or_else(|| invalid(name, "shape must hold non-negative integers"))?;
    let offsets = obj
        .get("data_offsets")
        .and_then(Value::as_array)
        .filter(|a| a.len() == 2)
        .and_then(|a| Some((a[0].as_u64()? as usize, a[1].as_u64()? as usize)))
        .ok_or_else(|| invalid(name, "data_offsets must be [begin, end]"))?;
    let (begin, end) = offsets;
    if begin > end {
        return Err(invalid(name, format!("data_offsets [{begin}, {end}] are reversed")));
    }
    let expected = shape
        .iter()
        .try_fold(Dtype::F32.width(), |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| invalid(name, "shape overflows"))?;
    if end - begin != expected {
        return Err(invalid(
            name,
            format!(
                "byte range holds {} bytes but shape {shape:?} needs {expected}",
                end - begin
            ),
        ));
    }
    Ok(TensorEntry {
        dtype: Dtype::F32,
        shape,
        begin,
        end,
    })
}

fn parse_metadata(value: &Value) -> Result<ArchiveMetadata, ArchiveError> {
    let obj = value
        .as_object()
        .ok_or_else(|| invalid(METADATA_KEY, "metadata is not an object"))?;
    let layer_order = match obj.get("layer_order") {
        None => None,
        Some(Value::Array(items)) => Some(
            items
                .iter()
                .map(|v| v.as_str().map(str::to_owned))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| invalid(METADATA_KEY, "layer_order must hold strings"))?,
        ),
        Some(_) => return Err(invalid(METADATA_KEY, "layer_order must be an array")),
    };
    let model_id = obj.get("model_id").and_then(Value::as_str).map(str::to_owned);
    Ok(ArchiveMetadata { layer_order, model_id })
}

pub fn load_archive(path: &Path) -> Result<TensorArchive, ArchiveError> {
    let bytes = fs::read(path).map_err(|source| ArchiveError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    TensorArchive::from_bytes(&bytes)
}

pub fn write_archive(archive: &TensorArchive, path: &Path) -> Result<(), ArchiveError> {
    fs::write(path, archive.to_bytes()).map_err(|source| ArchiveError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Incremental construction of an archive from `f32` tensors.
#[derive(Debug, Default)]
pub struct ArchiveBuilder {
    archive: TensorArchive,
}

impl ArchiveBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a tensor; panics if `data` does not match `shape` or the name is taken.
    pub fn tensor(mut self, name: &str, shape: &[usize], data: &[f32]) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "shape/data mismatch for {name}"
        );
        assert!(!self.archive.entries.contains_key(name), "duplicate tensor {name}");
        let begin = self.archive.payload.len();
        for v in data {
            self.archive.payload.extend_from_slice(&v.to_le_bytes());
        }
        self.archive.entries.insert(
            name.into(),
            TensorEntry {
                dtype: Dtype::F32,
                shape: shape.to_vec(),
                begin,
                end: self.archive.payload.len(),
            },
        );
        self
    }

    pub fn layer_order<S: AsRef<str>>(mut self, order: &[S]) -> Self {
        self.archive.metadata.layer_order = Some(order.iter().map(|s| s.as_ref().to_owned()).collect());
        self
    }

    pub fn model_id(mut self, id: &str) -> Self {
        self.archive.metadata.model_id = Some(id.into());
        self
    }

    pub fn build(self) -> TensorArchive {
        self.archive
    }
}
