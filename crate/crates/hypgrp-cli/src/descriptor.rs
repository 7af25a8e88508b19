//! JSON forms of ray descriptors and witness certificates.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use hypgrp::distortion::{Derivation, InnerLength, TraceStep, WitnessCertificate};
use hypgrp::gog::{RayDescriptor, RayTail};
use hypgrp::word::{Alphabet, Word};
use hypgrp::Result;

#[derive(Serialize, Deserialize)]
pub struct RayDescriptorDto {
    pub prefix: String,
    pub tail: TailDto,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum TailDto {
    #[serde(rename = "stable+")]
    StablePlus,
    #[serde(rename = "stable-")]
    StableMinus,
    #[serde(rename = "base-endo")]
    BaseEndo { seed: String },
    #[serde(rename = "periodic")]
    Periodic { pattern: String },
}

impl RayDescriptorDto {
    pub fn to_ray(&self, full: &Arc<Alphabet>) -> Result<RayDescriptor> {
        let prefix = Word::parse(full, &self.prefix)?;
        let tail = match &self.tail {
            TailDto::StablePlus => RayTail::StablePlus,
            TailDto::StableMinus => RayTail::StableMinus,
            TailDto::BaseEndo { seed } => RayTail::BaseEndo { seed: Word::parse(full, seed)? },
            TailDto::Periodic { pattern } => {
                RayTail::Periodic { pattern: Word::parse(full, pattern)? }
            }
        };
        Ok(RayDescriptor { prefix, tail })
    }
}

#[derive(Serialize)]
pub struct CertificateDto {
    pub index: usize,
    pub outer: String,
    pub outer_len: usize,
    pub trace: Vec<&'static str>,
    pub inner: InnerDto,
    pub derivation: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replay: Option<String>,
}

#[derive(Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InnerDto {
    Exact(String),
    Log10(f64),
}

impl CertificateDto {
    pub fn from_cert(c: &WitnessCertificate) -> CertificateDto {
        CertificateDto {
            index: c.index,
            outer: c.outer.format(),
            outer_len: c.outer_len,
            trace: c
                .trace
                .iter()
                .map(|s| match s {
                    TraceStep::StripStable => "strip-stable",
                    TraceStep::Collapse => "collapse",
                })
                .collect(),
            inner: match &c.inner {
                InnerLength::Exact(v) => InnerDto::Exact(v.to_string()),
                InnerLength::Log10(x) => InnerDto::Log10(*x),
            },
            derivation: match c.derivation {
                Derivation::Matrix => "matrix",
                Derivation::Expansion => "expansion",
            },
            replay: None,
        }
    }
}
