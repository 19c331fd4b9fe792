//! JSON file formats.
//!
//! Weight file:
//!
//! ```json
//! {"in_dim": 2,
//!  "layers": [{"weight": [[1.0, 0.0], [0.0, 1.0]], "bias": [0.0, 0.0],
//!              "activation": "leaky_relu", "slope": 0.2}]}
//! ```
//!
//! Weights are row-major (`out_dim` rows of `in_dim` entries). Numbers are
//! written in shortest round-trip form, so a save/load cycle is bit-exact.
//!
//! Vector sets (global bases, guide directions):
//!
//! ```json
//! {"dim": 2, "vectors": [[1.0, 0.0]], "method": "sampled_pca", "magnitudes": [3.1]}
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::network::{Activation, LayerSpec, MappingNetwork};
use crate::{Error, LocalFrame, Matrix, Result, Vector};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerFile {
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub activation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub in_dim: usize,
    pub layers: Vec<LayerFile>,
    /// Free-form provenance left by exporters (e.g. how input normalization
    /// was handled). Ignored by the loader.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl NetworkFile {
    pub fn from_network(net: &MappingNetwork) -> Self {
        let layers = net
            .layers()
            .iter()
            .map(|l| {
                let w = l.weight();
                let (activation, slope) = match l.activation() {
                    Activation::LeakyRelu { slope } => ("leaky_relu".to_string(), Some(slope)),
                    Activation::Identity => ("identity".to_string(), None),
                };
                LayerFile {
                    weight: (0..w.nrows())
                        .map(|r| w.row(r).iter().copied().collect())
                        .collect(),
                    bias: l.bias().iter().copied().collect(),
                    activation,
                    slope,
                }
            })
            .collect();
        NetworkFile {
            in_dim: net.in_dim(),
            layers,
            note: None,
        }
    }

    pub fn into_network(self) -> Result<MappingNetwork> {
        if self.layers.is_empty() {
            return Err(Error::InvalidNetwork("layers: at least one layer is required".into()));
        }
        let mut expected_in = self.in_dim;
        if expected_in == 0 {
            return Err(Error::InvalidNetwork("in_dim: must be positive".into()));
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        for (li, layer) in self.layers.into_iter().enumerate() {
            let rows = layer.weight.len();
            if rows == 0 {
                return Err(Error::InvalidNetwork(format!("layers[{li}].weight: no rows")));
            }
            for (r, row) in layer.weight.iter().enumerate() {
                if row.len() != expected_in {
                    return Err(Error::InvalidNetwork(format!(
                        "layers[{li}].weight[{r}]: has {} entries, expected {expected_in}",
                        row.len()
                    )));
                }
                if let Some(c) = row.iter().position(|x| !x.is_finite()) {
                    return Err(Error::InvalidNetwork(format!(
                        "layers[{li}].weight[{r}][{c}]: non-finite value"
                    )));
                }
            }
            if layer.bias.len() != rows {
                return Err(Error::InvalidNetwork(format!(
                    "layers[{li}].bias: has length {}, expected {rows}",
                    layer.bias.len()
                )));
            }
            if let Some(i) = layer.bias.iter().position(|x| !x.is_finite()) {
                return Err(Error::InvalidNetwork(format!("layers[{li}].bias[{i}]: non-finite value")));
            }
            let activation = match layer.activation.as_str() {
                "leaky_relu" => {
                    let slope = layer.slope.ok_or_else(|| {
                        Error::InvalidNetwork(format!("layers[{li}].slope: required for leaky_relu"))
                    })?;
                    if !(slope > 0.0 && slope <= 1.0) {
                        return Err(Error::InvalidNetwork(format!(
                            "layers[{li}].slope: must lie in (0, 1], got {slope}"
                        )));
                    }
                    Activation::LeakyRelu { slope }
                }
                "identity" => Activation::Identity,
                other => {
                    return Err(Error::InvalidNetwork(format!(
                        "layers[{li}].activation: unknown activation {other:?} \
                         (expected \"leaky_relu\" or \"identity\")"
                    )))
                }
            };
            let flat: Vec<f64> = layer.weight.into_iter().flatten().collect();
            let weight = Matrix::from_row_slice(rows, expected_in, &flat);
            layers.push(LayerSpec::new(weight, Vector::from_vec(layer.bias), activation)?);
            expected_in = rows;
        }
        MappingNetwork::new(layers)
    }
}

pub fn network_to_json(net: &MappingNetwork) -> String {
    serde_json::to_string_pretty(&NetworkFile::from_network(net)).expect("network serializes")
}

pub fn network_from_json(text: &str) -> Result<MappingNetwork> {
    let file: NetworkFile = serde_json::from_str(text)?;
    file.into_network()
}

pub fn load_network(path: impl AsRef<Path>) -> Result<MappingNetwork> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("cannot read network file {}: {e}", path.display()),
        ))
    })?;
    network_from_json(&text)
}

pub fn save_network(net: &MappingNetwork, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, network_to_json(net) + "\n")?;
    Ok(())
}

/// A list of equal-length vectors with optional provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorSet {
    pub dim: usize,
    pub vectors: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnitudes: Option<Vec<f64>>,
}

impl VectorSet {
    /// Columns of `m` as vectors.
    pub fn from_columns(m: &Matrix) -> Self {
        VectorSet {
            dim: m.nrows(),
            vectors: (0..m.ncols()).map(|c| m.column(c).iter().copied().collect()).collect(),
            method: None,
            magnitudes: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, v) in self.vectors.iter().enumerate() {
            if v.len() != self.dim {
                return Err(Error::InvalidArgument(format!(
                    "vectors[{i}]: has {} entries, expected dim = {}",
                    v.len(),
                    self.dim
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument(format!("vectors[{i}]: non-finite value")));
            }
        }
        Ok(())
    }

    pub fn vector(&self, index: usize) -> Result<Vector> {
        self.vectors
            .get(index)
            .map(|v| Vector::from_column_slice(v))
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "vector index {index} out of range ({} vectors)",
                    self.vectors.len()
                ))
            })
    }
}

pub fn load_vector_set(path: impl AsRef<Path>) -> Result<VectorSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("cannot read vector file {}: {e}", path.display()),
        ))
    })?;
    let set: VectorSet = serde_json::from_str(&text)?;
    set.validate()?;
    Ok(set)
}

/// Serialized form of a [`LocalFrame`]; singular vectors are optional.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameFile {
    pub z: Vec<f64>,
    pub w: Vec<f64>,
    pub singular_values: Vec<f64>,
    /// Right singular vectors (latent-side directions), one per entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent_directions: Option<Vec<Vec<f64>>>,
    /// Left singular vectors (the Local Basis), one per entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<Vec<Vec<f64>>>,
}

impl FrameFile {
    pub fn from_frame(frame: &LocalFrame, include_vectors: bool) -> Self {
        let cols = |m: &Matrix| -> Vec<Vec<f64>> {
            (0..m.ncols()).map(|c| m.column(c).iter().copied().collect()).collect()
        };
        FrameFile {
            z: frame.z().iter().copied().collect(),
            w: frame.w().iter().copied().collect(),
            singular_values: frame.singular_values().iter().copied().collect(),
            latent_directions: include_vectors.then(|| cols(frame.latent_directions())),
            basis: include_vectors.then(|| cols(frame.basis())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_field_is_named() {
        let text = r#"{"in_dim": 1, "layers": [{"weight": [[1.0]], "activation": "identity"}]}"#;
        let msg = network_from_json(text).unwrap_err().to_string();
        assert!(msg.contains("bias"), "{msg}");
    }

    #[test]
    fn bad_row_length_is_named() {
        let text = r#"{"in_dim": 2, "layers": [{"weight": [[1.0, 0.0], [1.0]], "bias": [0, 0],
                      "activation": "identity"}]}"#;
        let msg = network_from_json(text).unwrap_err().to_string();
        assert!(msg.contains("layers[0].weight[1]"), "{msg}");
    }

    #[test]
    fn chaining_and_slope_are_checked() {
        let text = r#"{"in_dim": 1, "layers": [
            {"weight": [[1.0]], "bias": [0], "activation": "leaky_relu", "slope": 0.2},
            {"weight": [[1.0, 2.0]], "bias": [0], "activation": "identity"}]}"#;
        let msg = network_from_json(text).unwrap_err().to_string();
        assert!(msg.contains("layers[1].weight[0]"), "{msg}");
        let text = r#"{"in_dim": 1, "layers": [
            {"weight": [[1.0]], "bias": [0], "activation": "leaky_relu"}]}"#;
        let msg = network_from_json(text).unwrap_err().to_string();
        assert!(msg.contains("layers[0].slope"), "{msg}");
        let text = r#"{"in_dim": 1, "layers": [
            {"weight": [[1.0]], "bias": [0], "activation": "tanh"}]}"#;
        let msg = network_from_json(text).unwrap_err().to_string();
        assert!(msg.contains("layers[0].activation"), "{msg}");
    }

    #[test]
    fn non_finite_rejected() {
        let text = r#"{"in_dim": 1, "layers": [{"weight": [[1e999]], "bias": [0], "activation": "identity"}]}"#;
        assert!(network_from_json(text).is_err());
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let w = Matrix::from_row_slice(2, 2, &[0.1, 1.0 / 3.0, -2.5e-17, std::f64::consts::PI]);
        let layer = LayerSpec::new(w, Vector::from_vec(vec![1e-300, -0.7]), Activation::LeakyRelu { slope: 0.2 })
            .unwrap();
        let net = MappingNetwork::new(vec![layer]).unwrap();
        let back = network_from_json(&network_to_json(&net)).unwrap();
        assert_eq!(net, back);
    }
}
