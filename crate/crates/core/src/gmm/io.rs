//! Model file: 8-byte magic, `u32` little-endian header length, JSON header,
//! then weights, means and row-major covariances as little-endian `f64`.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::GmmModel;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"TWFRGMM\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelHeader {
    pub format_version: u32,
    pub n_components: usize,
    pub dim: usize,
    /// Always `"f64-le"`.
    pub dtype: String,
    /// Payload blocks in file order.
    pub layout: Vec<String>,
    /// Free-form echo of the configuration that produced the model.
    #[serde(default)]
    pub config: serde_json::Value,
}

impl ModelHeader {
    fn payload_len(&self) -> usize {
        let (k, m) = (self.n_components, self.dim);
        k + k * m + k * m * m
    }
}

pub fn write_model<W: Write>(mut w: W, model: &GmmModel, config: serde_json::Value) -> Result<()> {
    let header = ModelHeader {
        format_version: FORMAT_VERSION,
        n_components: model.n_components(),
        dim: model.dim(),
        dtype: "f64-le".into(),
        layout: vec!["weights".into(), "means".into(), "covariances".into()],
        config,
    };
    let json = serde_json::to_vec(&header)?;
    let len = u32::try_from(json.len()).map_err(|_| Error::Format("header too large".into()))?;
    w.write_all(MAGIC)?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(&json)?;

    let mut payload = Vec::with_capacity(header.payload_len() * 8);
    let mut put = |v: f64| payload.extend_from_slice(&v.to_le_bytes());
    model.components.iter().for_each(|c| put(c.weight));
    for c in &model.components {
        c.mean.iter().for_each(|&v| put(v));
    }
    for k in 0..model.n_components() {
        let cov = model.covariance_raw(k);
        for i in 0..model.dim() {
            for j in 0..model.dim() {
                put(cov[(i, j)]);
            }
        }
    }
    w.write_all(&payload)?;
    Ok(())
}

pub fn read_model<R: Read>(mut r: R) -> Result<(GmmModel, ModelHeader)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a model file (bad magic)".into()));
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut json)?;
    let header: ModelHeader = serde_json::from_slice(&json)?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {} (expected {FORMAT_VERSION})",
            header.format_version
        )));
    }
    if header.dtype != "f64-le" {
        return Err(Error::Format(format!("unsupported dtype {}", header.dtype)));
    }
    if header.n_components == 0 || header.dim == 0 {
        return Err(Error::Format("empty model".into()));
    }

    let mut bytes = vec![0u8; header.payload_len() * 8];
    r.read_exact(&mut bytes)?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format("trailing bytes after payload".into()));
    }
    let mut values = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")));

    let (k, m) = (header.n_components, header.dim);
    let weights: Vec<f64> = values.by_ref().take(k).collect();
    let means: Vec<DVector<f64>> = (0..k)
        .map(|_| DVector::from_iterator(m, values.by_ref().take(m)))
        .collect();
    let covs: Vec<DMatrix<f64>> = (0..k)
        .map(|_| DMatrix::from_row_iterator(m, m, values.by_ref().take(m * m)))
        .collect();
    let parts = weights
        .into_iter()
        .zip(means)
        .zip(covs)
        .map(|((w, mu), c)| (w, mu, c))
        .collect();
    Ok((GmmModel::from_parts(parts)?, header))
}
