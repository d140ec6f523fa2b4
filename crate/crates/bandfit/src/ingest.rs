//! Conversion of 4-axis convolution weights into per-channel 2-D kernels.

use std::collections::BTreeMap;

use bandfit_core::Field2;
use glob::Pattern;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::archive::TensorArchive;

pub const DEFAULT_MODEL_ID: &str = "model";

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("invalid selection pattern `{pattern}`: {source}")]
    Pattern {
        pattern: String,
        #[source]
        source: glob::PatternError,
    },
}

/// One `(filter, channel)` slice of a convolution weight tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSlice {
    pub model_id: String,
    pub layer_name: String,
    pub layer_index: usize,
    pub tensor_name: String,
    pub filter_index: usize,
    pub channel_index: usize,
    pub values: Field2,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestWarning {
    pub tensor: String,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct Extraction {
    pub slices: Vec<KernelSlice>,
    pub warnings: Vec<IngestWarning>,
    /// `(layer_index, layer_name)` of every layer with at least one selected tensor, in depth order.
    pub layers: Vec<(usize, String)>,
}

/// Layer a tensor belongs to: the longest listed prefix of its name.
fn resolve_layer<'a>(order: &'a [String], name: &str) -> Option<(usize, &'a str)> {
    order
        .iter()
        .enumerate()
        .filter(|(_, p)| name.starts_with(p.as_str()))
        .max_by_key(|(i, p)| (p.len(), std::cmp::Reverse(*i)))
        .map(|(i, p)| (i, p.as_str()))
}

fn layer_name_of(tensor: &str) -> &str {
    tensor.strip_suffix(".weight").unwrap_or(tensor)
}

/// Every square `[out, in, k, k]` tensor whose name matches `selection`,
/// sliced into `out * in` kernels in `(layer, tensor, filter, channel)` order.
///
/// With a `layer_order` manifest, layers follow the manifest and tensors it
/// does not cover are appended afterwards in name order, with a warning.
/// Without one, every tensor is its own layer, ordered by name.
pub fn extract_conv_slices(archive: &TensorArchive, selection: &str) -> Result<Extraction, SelectError> {
    let pattern = Pattern::new(selection).map_err(|source| SelectError::Pattern {
        pattern: selection.into(),
        source,
    })?;
    let model_id = archive
        .metadata
        .model_id
        .clone()
        .unwrap_or_else(|| DEFAULT_MODEL_ID.into());
    let order = archive.metadata.layer_order.as_deref();

    let mut out = Extraction::default();
    // (layer_index, tensor_name) -> layer_name
    let mut plan: BTreeMap<(usize, &str), String> = BTreeMap::new();
    let mut unlisted: Vec<&str> = Vec::new();

    for (name, entry) in &archive.entries {
        if !pattern.matches(name) {
            continue;
        }
        let shape = &entry.shape;
        if shape.len() != 4 {
            out.warnings.push(IngestWarning {
                tensor: name.clone(),
                message: format!("skipped: expected 4 axes [out, in, k, k], found shape {shape:?}"),
            });
            continue;
        }
        if shape[2] != shape[3] || shape[2] == 0 {
            out.warnings.push(IngestWarning {
                tensor: name.clone(),
                message: format!(
                    "skipped: spatial axes {}x{} are not a non-empty square",
                    shape[2], shape[3]
                ),
            });
            continue;
        }
        match order {
            None => unlisted.push(name),
            Some(order) => match resolve_layer(order, name) {
                Some((i, layer)) => {
                    plan.insert((i, name), layer.to_owned());
                }
                None => {
                    out.warnings.push(IngestWarning {
                        tensor: name.clone(),
                        message: "not covered by layer_order; appended after listed layers".into(),
                    });
                    unlisted.push(name);
                }
            },
        }
    }

    // Entries iterate in name order, so `unlisted` is already sorted.
    let base = order.map_or(0, <[String]>::len);
    for (i, name) in unlisted.into_iter().enumerate() {
        plan.insert((base + i, name), layer_name_of(name).to_owned());
    }

    for ((layer_index, name), layer_name) in plan {
        let shape = &archive.entries[name].shape;
        let (filters, channels, k) = (shape[0], shape[1], shape[2]);
        let data = archive.tensor_f32(name).expect("entry exists");
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            out.warnings.push(IngestWarning {
                tensor: name.to_owned(),
                message: format!("skipped: non-finite weight at element {pos}"),
            });
            continue;
        }
        if out.layers.last().is_none_or(|(i, _)| *i != layer_index) {
            out.layers.push((layer_index, layer_name.clone()));
        }
        for (slot, chunk) in data.chunks_exact(k * k).enumerate() {
            let values = Field2::from_fn(k, k, |r, c| f64::from(chunk[r * k + c]));
            out.slices.push(KernelSlice {
                model_id: model_id.clone(),
                layer_name: layer_name.clone(),
                layer_index,
                tensor_name: name.to_owned(),
                filter_index: slot / channels,
                channel_index: slot % channels,
                values,
            });
        }
        debug_assert_eq!(data.len(), filters * channels * k * k);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archive::ArchiveBuilder;

    #[test]
    fn longest_prefix_wins() {
        let order: Vec<String> = ["conv1", "conv1.b", "conv2"].iter().map(|s| s.to_string()).collect();
        assert_eq!(resolve_layer(&order, "conv1.a.weight"), Some((0, "conv1")));
        assert_eq!(resolve_layer(&order, "conv1.b.weight"), Some((1, "conv1.b")));
        assert_eq!(resolve_layer(&order, "fc.weight"), None);
    }

    #[test]
    fn bad_pattern() {
        let a = ArchiveBuilder::new().build();
        assert!(extract_conv_slices(&a, "[").is_err());
    }

    #[test]
    fn non_finite_tensor_is_skipped() {
        let a = ArchiveBuilder::new()
            .tensor("bad.weight", &[1, 1, 2, 2], &[0.0, f32::NAN, 1.0, 2.0])
            .tensor("good.weight", &[1, 1, 1, 1], &[1.0])
            .build();
        let e = extract_conv_slices(&a, "*").unwrap();
        assert_eq!(e.slices.len(), 1);
        assert_eq!(e.layers, vec![(1, "good".to_string())]);
        assert_eq!(e.warnings.len(), 1);
        assert_eq!(e.warnings[0].tensor, "bad.weight");
    }
}
