//! Versioned, checksummed checkpoint container.
//!
//! A checkpoint captures everything needed to resume training bit-for-bit:
//! all parameter arrays (policy, critic and its target, dynamics model),
//! optimizer moments, normalizer statistics, the configuration snapshot,
//! the iteration index, and every RNG stream position.
//!
//! File layout: one ASCII header line `DADSCKPT <version> <payload-len>
//! <sha256-hex>`, then a JSON payload. Writes go to a temp file in the same
//! directory and are renamed into place.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::Normalizer;
use crate::error::{Error, Result};
use crate::nn::{Mlp, MlpGrads};
use crate::rng::RngState;
use crate::Real;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "DADSCKPT";

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MlpData {
    pub layer_sizes: Vec<usize>,
    /// Row-major weight entries per layer.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpData {
    pub fn from_mlp(net: &Mlp<Real>) -> Self {
        MlpData {
            layer_sizes: net.layer_sizes().to_vec(),
            weights: (0..net.num_layers())
                .map(|l| net.weight(l).iter().copied().collect())
                .collect(),
            biases: (0..net.num_layers())
                .map(|l| net.bias(l).to_vec())
                .collect(),
        }
    }

    pub fn to_mlp(&self) -> Result<Mlp<Real>> {
        let mut net = Mlp::zeros(&self.layer_sizes);
        if self.weights.len() != net.num_layers() || self.biases.len() != net.num_layers() {
            return Err(Error::Checkpoint("layer count mismatch".into()));
        }
        for l in 0..net.num_layers() {
            let w = net.weight_mut(l);
            if self.weights[l].len() != w.len() {
                return Err(Error::Checkpoint("weight size mismatch".into()));
            }
            for (dst, src) in w.iter_mut().zip(&self.weights[l]) {
                *dst = *src;
            }
            let b = net.bias_mut(l);
            if self.biases[l].len() != b.len() {
                return Err(Error::Checkpoint("bias size mismatch".into()));
            }
            for (dst, src) in b.iter_mut().zip(&self.biases[l]) {
                *dst = *src;
            }
        }
        Ok(net)
    }

    fn to_grads(&self) -> Result<MlpGrads<Real>> {
        let net = self.to_mlp()?;
        let mut g = net.zero_grads();
        for l in 0..self.layer_sizes.len() - 1 {
            for (dst, src) in g.weights[l].iter_mut().zip(&self.weights[l]) {
                *dst = *src;
            }
            for (dst, src) in g.biases[l].iter_mut().zip(&self.biases[l]) {
                *dst = *src;
            }
        }
        Ok(g)
    }

    fn from_grads(layer_sizes: &[usize], g: &MlpGrads<Real>) -> Self {
        MlpData {
            layer_sizes: layer_sizes.to_vec(),
            weights: g.weights.iter().map(|w| w.iter().copied().collect()).collect(),
            biases: g.biases.iter().map(|b| b.to_vec()).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NormalizerData {
    pub dim: usize,
    pub count: u64,
    pub mean: Vec<f64>,
    pub m2: Vec<f64>,
    pub frozen: bool,
}

impl NormalizerData {
    pub fn from_normalizer(n: &Normalizer<Real>) -> Self {
        NormalizerData {
            dim: n.dim(),
            count: n.count(),
            mean: n.mean().to_vec(),
            m2: n.m2().to_vec(),
            frozen: n.is_frozen(),
        }
    }

    pub fn to_normalizer(&self) -> Normalizer<Real> {
        Normalizer::restore(
            self.dim,
            self.count,
            Array1::from(self.mean.clone()),
            Array1::from(self.m2.clone()),
            self.frozen,
        )
    }
}

/// Optimizer state for one group of nets.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AdamData {
    pub step_count: u64,
    pub m: Vec<MlpData>,
    pub v: Vec<MlpData>,
}

impl AdamData {
    pub fn from_adam(adam: &crate::nn::AdamState<Real>, layer_sizes: &[Vec<usize>]) -> Self {
        let (m, v) = adam.moments();
        AdamData {
            step_count: adam.step_count(),
            m: m
                .iter()
                .zip(layer_sizes)
                .map(|(g, ls)| MlpData::from_grads(ls, g))
                .collect(),
            v: v
                .iter()
                .zip(layer_sizes)
                .map(|(g, ls)| MlpData::from_grads(ls, g))
                .collect(),
        }
    }

    pub fn restore_into(&self, adam: &mut crate::nn::AdamState<Real>) -> Result<()> {
        let m = self.m.iter().map(|d| d.to_grads()).collect::<Result<Vec<_>>>()?;
        let v = self.v.iter().map(|d| d.to_grads()).collect::<Result<Vec<_>>>()?;
        adam.restore(self.step_count, m, v);
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DynamicsData {
    pub state_dim: usize,
    pub cond_dim: usize,
    pub obs_idx: Vec<usize>,
    pub predicted_idx: Vec<usize>,
    pub trunk: MlpData,
    pub expert_heads: Vec<MlpData>,
    pub gating: MlpData,
    pub input_norm: NormalizerData,
    pub target_norm: NormalizerData,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PolicyData {
    pub obs_dim: usize,
    pub skill_dim: usize,
    pub action_dim: usize,
    pub trunk: MlpData,
    pub mean_head: MlpData,
    pub logstd_head: MlpData,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CriticData {
    pub online: MlpData,
    pub target: MlpData,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Checkpoint {
    pub version: u32,
    pub config_text: String,
    pub iteration: u64,
    pub policy: PolicyData,
    pub critic: CriticData,
    pub dynamics: DynamicsData,
    pub adam_policy: AdamData,
    pub adam_critic: AdamData,
    pub adam_dynamics: AdamData,
    pub rng_states: Vec<RngState>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        if self.version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "refusing to write version {} (writer is {})",
                self.version, FORMAT_VERSION
            )));
        }
        let payload = serde_json::to_vec(self)
            .map_err(|e| Error::Checkpoint(format!("serialization failed: {e}")))?;
        let digest = hex(&Sha256::digest(&payload));
        let header = format!("{MAGIC} {FORMAT_VERSION} {} {digest}\n", payload.len());
        let tmp = path.with_extension("ckpt.tmp");
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let mut bytes = header.into_bytes();
        bytes.extend_from_slice(&payload);
        std::fs::write(&tmp, &bytes)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let bytes = std::fs::read(path)?;
        let newline = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Checkpoint("missing header line".into()))?;
        let header = std::str::from_utf8(&bytes[..newline])
            .map_err(|_| Error::Checkpoint("header is not UTF-8".into()))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file".into()));
        }
        let version: u32 = parts[1]
            .parse()
            .map_err(|_| Error::Checkpoint("unreadable version".into()))?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "version mismatch: file is {version}, reader supports {FORMAT_VERSION}"
            )));
        }
        let expect_len: usize = parts[2]
            .parse()
            .map_err(|_| Error::Checkpoint("unreadable payload length".into()))?;
        let payload = &bytes[newline + 1..];
        if payload.len() != expect_len {
            return Err(Error::Checkpoint(format!(
                "checksum failure: payload is {} bytes, header claims {expect_len}",
                payload.len()
            )));
        }
        let digest = hex(&Sha256::digest(payload));
        if digest != parts[3] {
            return Err(Error::Checkpoint("checksum failure: content hash mismatch".into()));
        }
        serde_json::from_slice(payload)
            .map_err(|e| Error::Checkpoint(format!("payload decode failed: {e}")))
    }
}

/// All parameter arrays must be finite; a checkpoint of a diverged model is
/// not worth writing.
pub fn check_finite(ck: &Checkpoint) -> Result<()> {
    let all = |d: &MlpData| {
        d.weights.iter().flatten().all(|v| v.is_finite())
            && d.biases.iter().flatten().all(|v| v.is_finite())
    };
    let nets = [
        &ck.policy.trunk,
        &ck.policy.mean_head,
        &ck.policy.logstd_head,
        &ck.critic.online,
        &ck.critic.target,
        &ck.dynamics.trunk,
        &ck.dynamics.gating,
    ];
    for net in nets {
        if !all(net) {
            return Err(Error::NonFinite("checkpoint parameters".into()));
        }
    }
    if !ck.dynamics.expert_heads.iter().all(all) {
        return Err(Error::NonFinite("checkpoint parameters".into()));
    }
    Ok(())
}

/// Helper for tests and tools: matrix to nested vec.
pub fn array2_to_rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}
