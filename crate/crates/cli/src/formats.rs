//! On-disk formats: JSON schemas for distributions, M-type distributions,
//! channel matrices, kernels, and identification codes, plus the conversions
//! to and from the core types.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use permch_core::channel::QnccKernel;
use permch_core::idcode::{Decoder, IdCode};
use permch_core::lattice_dist::{LatticeDist, MTypeDist};

#[derive(Debug, Serialize, Deserialize)]
pub struct MassEntry {
    pub point: Vec<u32>,
    pub mass: f64,
}

/// `{"support": [{"point": [..], "mass": ..}, ..]}`
#[derive(Debug, Serialize, Deserialize)]
pub struct DistJson {
    pub support: Vec<MassEntry>,
}

impl DistJson {
    pub fn from_dist(dist: &LatticeDist) -> Self {
        DistJson {
            support: dist
                .iter()
                .map(|(p, m)| MassEntry {
                    point: p.clone(),
                    mass: m,
                })
                .collect(),
        }
    }

    pub fn to_dist(&self, q: usize) -> Result<LatticeDist> {
        LatticeDist::from_entries(q, self.support.iter().map(|e| (e.point.clone(), e.mass)))
            .map_err(|e| anyhow::anyhow!("invalid distribution: {e}"))
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NumeratorEntry {
    pub point: Vec<u32>,
    pub k: u64,
}

/// `{"M": .., "numerators": [{"point": [..], "k": ..}, ..]}`
#[derive(Debug, Serialize, Deserialize)]
pub struct MTypeJson {
    #[serde(rename = "M")]
    pub m: u64,
    pub numerators: Vec<NumeratorEntry>,
}

impl MTypeJson {
    pub fn from_mtype(dist: &MTypeDist) -> Self {
        MTypeJson {
            m: dist.denom(),
            numerators: dist
                .numerators()
                .map(|(p, k)| NumeratorEntry {
                    point: p.clone(),
                    k,
                })
                .collect(),
        }
    }

    pub fn to_mtype(&self, q: usize) -> Result<MTypeDist> {
        MTypeDist::from_numerators(
            q,
            self.m,
            self.numerators.iter().map(|e| (e.point.clone(), e.k)),
        )
        .map_err(|e| anyhow::anyhow!("invalid M-type distribution: {e}"))
    }
}

/// Kernel rows in composition rank order (colex on the first q-1 counts).
#[derive(Debug, Serialize, Deserialize)]
pub struct KernelJson {
    pub q: usize,
    pub n: u32,
    pub order: String,
    pub rows: Vec<Vec<f64>>,
}

impl KernelJson {
    pub fn from_kernel(kernel: &QnccKernel) -> Self {
        KernelJson {
            q: kernel.q(),
            n: kernel.n(),
            order: "colex".into(),
            rows: (0..kernel.num_rows())
                .map(|i| kernel.row(i).to_vec())
                .collect(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ProbEntry {
    pub point: Vec<u32>,
    pub p: f64,
}

/// One message of an identification code: an encoder (general or M-type)
/// and a decoder (an acceptance set or acceptance probabilities).
#[derive(Debug, Serialize, Deserialize)]
pub struct MessageJson {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub encoder: Option<DistJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub encoder_mtype: Option<MTypeJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accept: Option<Vec<Vec<u32>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accept_prob: Option<Vec<ProbEntry>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CodeJson {
    pub q: usize,
    pub n: u32,
    pub messages: Vec<MessageJson>,
}

impl CodeJson {
    pub fn from_code(code: &IdCode) -> Self {
        let messages = code
            .encoders()
            .iter()
            .zip(code.decoders())
            .map(|(enc, dec)| {
                let (accept, accept_prob) = match dec {
                    Decoder::AcceptSet(set) => {
                        (Some(set.iter().cloned().collect::<Vec<_>>()), None)
                    }
                    Decoder::AcceptProb(map) => (
                        None,
                        Some(
                            map.iter()
                                .map(|(p, &prob)| ProbEntry {
                                    point: p.clone(),
                                    p: prob,
                                })
                                .collect(),
                        ),
                    ),
                };
                MessageJson {
                    encoder: Some(DistJson::from_dist(enc)),
                    encoder_mtype: None,
                    accept,
                    accept_prob,
                }
            })
            .collect();
        CodeJson {
            q: code.q(),
            n: code.n(),
            messages,
        }
    }

    pub fn to_code(&self) -> Result<IdCode> {
        let mut encoders = Vec::with_capacity(self.messages.len());
        let mut decoders = Vec::with_capacity(self.messages.len());
        for (i, msg) in self.messages.iter().enumerate() {
            let enc = match (&msg.encoder, &msg.encoder_mtype) {
                (Some(d), None) => d.to_dist(self.q)?,
                (None, Some(m)) => m.to_mtype(self.q)?.to_dist(),
                _ => bail!("message {i}: need exactly one of encoder / encoder_mtype"),
            };
            encoders.push(enc);
            let dec = match (&msg.accept, &msg.accept_prob) {
                (Some(set), None) => {
                    Decoder::AcceptSet(set.iter().cloned().collect::<BTreeSet<_>>())
                }
                (None, Some(probs)) => Decoder::AcceptProb(
                    probs.iter().map(|e| (e.point.clone(), e.p)).collect(),
                ),
                _ => bail!("message {i}: need exactly one of accept / accept_prob"),
            };
            decoders.push(dec);
        }
        IdCode::new(self.q, self.n, encoders, decoders)
            .map_err(|e| anyhow::anyhow!("invalid code: {e}"))
    }
}

/// Error-matrix output of `idcode eval` and `idcode converse`.
#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorsJson {
    pub lambda1: f64,
    pub lambda2: f64,
    /// `matrix[i][j]` for `i != j` is the cross acceptance; the diagonal
    /// holds missed detections.
    pub matrix: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_lambda1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_lambda2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converse_raw: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converse_clamped: Option<f64>,
}

pub fn read_json<T: for<'a> Deserialize<'a>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))
}

/// Writes a JSON value with a `config` echo field wrapped around it.
pub fn write_json<T: Serialize>(path: &Path, config: &str, value: &T) -> Result<()> {
    #[derive(Serialize)]
    struct Envelope<'a, T> {
        config: &'a str,
        #[serde(flatten)]
        value: &'a T,
    }
    let text = serde_json::to_string_pretty(&Envelope { config, value })?;
    fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// Formats a float with twelve significant digits, switching to scientific
/// notation outside a comfortable fixed-point range.
pub fn fmt_g12(x: f64) -> String {
    if x == 0.0 || x.is_nan() || x.is_infinite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..12).contains(&exp) {
        return format!("{x:.11e}");
    }
    let decimals = (11 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}
