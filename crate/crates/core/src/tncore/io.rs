//! Tensor network file format: JSON for the structure, with tensor data in a
//! sidecar binary file of raw little-endian complex values in the serialized
//! bond order.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tncore::{Bond, BondId, Tensor, TensorId, TensorNetwork};

#[derive(Debug, Serialize, Deserialize)]
struct BondRecord {
    id: BondId,
    dim: usize,
    endpoints: Vec<TensorId>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorRecord {
    id: TensorId,
    bonds: Vec<BondId>,
    has_data: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct NetworkFile {
    tensors: Vec<TensorRecord>,
    bonds: Vec<BondRecord>,
    /// Sidecar data file name (relative to the JSON file), if any tensor
    /// carries data.
    data_file: Option<String>,
    /// Element type of the sidecar: "complex128" or "complex64".
    dtype: Option<String>,
}

/// Write a network as `<path>` (JSON) plus `<path stem>.bin` when any tensor
/// carries data. Data tensors are concatenated in JSON order, each entry as a
/// little-endian (re, im) pair.
pub fn save_network(network: &TensorNetwork, path: &Path) -> Result<()> {
    let has_data = network.tensors.values().any(|t| t.data.is_some());
    let data_file = has_data.then(|| {
        let stem = path.file_stem().unwrap_or_default().to_string_lossy();
        format!("{stem}.bin")
    });
    let file = NetworkFile {
        tensors: network
            .tensors
            .values()
            .map(|t| TensorRecord {
                id: t.id,
                bonds: t.bonds.clone(),
                has_data: t.data.is_some(),
            })
            .collect(),
        bonds: network
            .bonds
            .values()
            .map(|b| BondRecord {
                id: b.id,
                dim: b.dim,
                endpoints: b.endpoints.clone(),
            })
            .collect(),
        data_file: data_file.clone(),
        dtype: has_data.then(|| "complex128".to_string()),
    };
    let text = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::json(format!("serializing network {}", path.display()), e))?;
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    if let Some(name) = data_file {
        let mut bytes = Vec::new();
        for t in network.tensors.values() {
            if let Some(data) = &t.data {
                for z in data {
                    bytes.extend_from_slice(&z.re.to_le_bytes());
                    bytes.extend_from_slice(&z.im.to_le_bytes());
                }
            }
        }
        let bin_path = path.with_file_name(name);
        fs::write(&bin_path, bytes)
            .map_err(|e| Error::io(format!("writing {}", bin_path.display()), e))?;
    }
    Ok(())
}

pub fn load_network(path: &Path) -> Result<TensorNetwork> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let file: NetworkFile = serde_json::from_str(&text)
        .map_err(|e| Error::json(format!("parsing {}", path.display()), e))?;
    let mut network = TensorNetwork::new();
    let mut bonds: BTreeMap<BondId, Bond> = BTreeMap::new();
    for b in file.bonds {
        bonds.insert(
            b.id,
            Bond {
                id: b.id,
                dim: b.dim,
                endpoints: b.endpoints,
            },
        );
    }
    let raw = match &file.data_file {
        Some(name) => {
            let bin_path = path.with_file_name(name);
            Some(
                fs::read(&bin_path)
                    .map_err(|e| Error::io(format!("reading {}", bin_path.display()), e))?,
            )
        }
        None => None,
    };
    if matches!(file.dtype.as_deref(), Some(d) if d != "complex128" && d != "complex64") {
        return Err(Error::Structure(format!(
            "unsupported dtype {:?}",
            file.dtype
        )));
    }
    let width = if file.dtype.as_deref() == Some("complex64") {
        8
    } else {
        16
    };
    let mut offset = 0usize;
    for t in file.tensors {
        let data = if t.has_data {
            let raw = raw.as_ref().ok_or_else(|| {
                Error::Structure("tensor marked has_data but no data file given".into())
            })?;
            let len: usize = t
                .bonds
                .iter()
                .map(|b| {
                    bonds
                        .get(b)
                        .map(|bond| bond.dim)
                        .ok_or_else(|| Error::Structure(format!("unknown bond {b}")))
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .product();
            let bytes = len * width;
            if offset + bytes > raw.len() {
                return Err(Error::Structure(format!(
                    "data file too short for tensor {}",
                    t.id
                )));
            }
            let chunk = &raw[offset..offset + bytes];
            offset += bytes;
            let data: Vec<Complex64> = if width == 16 {
                chunk
                    .chunks_exact(16)
                    .map(|c| {
                        Complex64::new(
                            f64::from_le_bytes(c[0..8].try_into().unwrap()),
                            f64::from_le_bytes(c[8..16].try_into().unwrap()),
                        )
                    })
                    .collect()
            } else {
                chunk
                    .chunks_exact(8)
                    .map(|c| {
                        Complex64::new(
                            f32::from_le_bytes(c[0..4].try_into().unwrap()) as f64,
                            f32::from_le_bytes(c[4..8].try_into().unwrap()) as f64,
                        )
                    })
                    .collect()
            };
            Some(data)
        } else {
            None
        };
        network.add_tensor(Tensor {
            id: t.id,
            bonds: t.bonds,
            data,
        });
    }
    network.bonds = bonds;
    network.validate()?;
    Ok(network)
}
