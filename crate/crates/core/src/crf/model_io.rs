//! Model container: `LSRM` magic, a version word, a JSON header (tagset,
//! emission kind, config echo, parameter count), then raw f64
//! little-endian parameters.
//!
//! The header is length-prefixed so the parameter block can be located
//! without parsing JSON incrementally; trailing bytes are an error.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Inventory;
use crate::tagcodec::{parse_tag, TagSet};

use super::{CrfModel, EmissionKind, ParamLayout, TrainConfig};

const MAGIC: &[u8; 4] = b"LSRM";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported model version {0}")]
    BadVersion(u32),
    #[error("truncated model file")]
    Truncated,
    #[error("trailing bytes after the parameter block")]
    TrailingBytes,
    #[error("header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("header tag {0:?} does not parse: {1}")]
    BadTag(String, String),
    #[error("parameter count {got} does not match the declared layout {want}")]
    ParamCount { got: usize, want: usize },
}

#[derive(Serialize, Deserialize)]
struct Header {
    tags: Vec<String>,
    kind: EmissionKind,
    param_len: usize,
    trained_with: Option<TrainConfig>,
}

pub fn serialize_model(model: &CrfModel) -> Result<Vec<u8>, ModelIoError> {
    let header = Header {
        tags: model.tagset.strings(),
        kind: model.kind.clone(),
        param_len: model.params.len(),
        trained_with: model.trained_with.clone(),
    };
    let header_bytes = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(16 + header_bytes.len() + model.params.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header_bytes.len() as u64).to_le_bytes());
    out.extend_from_slice(&header_bytes);
    for p in &model.params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    Ok(out)
}

pub fn deserialize_model(bytes: &[u8]) -> Result<CrfModel, ModelIoError> {
    let rest = bytes.strip_prefix(MAGIC).ok_or(ModelIoError::BadMagic)?;
    let (ver, rest) = split_array::<4>(rest)?;
    let version = u32::from_le_bytes(ver);
    if version != VERSION {
        return Err(ModelIoError::BadVersion(version));
    }
    let (len, rest) = split_array::<8>(rest)?;
    let header_len = u64::from_le_bytes(len) as usize;
    if rest.len() < header_len {
        return Err(ModelIoError::Truncated);
    }
    let header: Header = serde_json::from_slice(&rest[..header_len])?;
    let rest = &rest[header_len..];

    let inv = Inventory::bundled();
    let mut tags = Vec::with_capacity(header.tags.len());
    for s in &header.tags {
        tags.push(parse_tag(s, inv).map_err(|e| ModelIoError::BadTag(s.clone(), e.to_string()))?);
    }
    let tagset = TagSet::from_tags(tags.iter());

    if rest.len() != header.param_len * 8 {
        return Err(if rest.len() < header.param_len * 8 {
            ModelIoError::Truncated
        } else {
            ModelIoError::TrailingBytes
        });
    }
    let params: Vec<f64> = rest
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunks_exact yields 8")))
        .collect();

    let mut model = CrfModel::new(tagset, header.kind);
    let want = ParamLayout::new(model.layout.k, model.kind.shape().param_len(model.layout.k))
        .total();
    if header.param_len != want {
        return Err(ModelIoError::ParamCount { got: header.param_len, want });
    }
    model.params = params;
    model.trained_with = header.trained_with;
    Ok(model)
}

pub fn save_model(model: &CrfModel, path: &Path) -> Result<(), ModelIoError> {
    let bytes = serialize_model(model)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<CrfModel, ModelIoError> {
    deserialize_model(&fs::read(path)?)
}

fn split_array<const N: usize>(bytes: &[u8]) -> Result<([u8; N], &[u8]), ModelIoError> {
    if bytes.len() < N {
        return Err(ModelIoError::Truncated);
    }
    let (head, rest) = bytes.split_at(N);
    Ok((head.try_into().expect("split_at guarantees length"), rest))
}

#[cfg(test)]
mod tests {
    use super::super::emissions::FeatureConfig;
    use super::*;
    use crate::corpus::{LexicalUnit, Lexcat, Sentence, Token};

    fn small_model() -> CrfModel {
        let mut s = Sentence::new("io-test", "hi", vec![Token::simple(1, "hi", "hi", "INTJ")]);
        s.units.push(LexicalUnit::new(vec![1], Lexcat::parse("INTJ").unwrap(), None));
        let tagset = crate::tagcodec::TagSet::from_sentences(&[s]).unwrap();
        let cfg = FeatureConfig { buckets_log2: 6, ..FeatureConfig::default() };
        let mut m = CrfModel::new(tagset, EmissionKind::Feature(cfg));
        for (i, p) in m.params.iter_mut().enumerate() {
            if *p == 0.0 {
                *p = i as f64 * 0.125 - 1.0;
            }
        }
        m.trained_with = Some(TrainConfig::default());
        m
    }

    #[test]
    fn round_trips_bitwise() {
        let m = small_model();
        let bytes = serialize_model(&m).unwrap();
        let back = deserialize_model(&bytes).unwrap();
        assert_eq!(back.params, m.params);
        assert_eq!(back.tagset.strings(), m.tagset.strings());
        assert_eq!(back.kind, m.kind);
        assert_eq!(back.trained_with, m.trained_with);
    }

    #[test]
    fn rejects_corruption() {
        let m = small_model();
        let bytes = serialize_model(&m).unwrap();
        assert!(matches!(deserialize_model(&bytes[..3]), Err(ModelIoError::BadMagic)));
        let mut wrong_magic = bytes.clone();
        wrong_magic[0] = b'X';
        assert!(matches!(deserialize_model(&wrong_magic), Err(ModelIoError::BadMagic)));
        let mut wrong_version = bytes.clone();
        wrong_version[4] = 9;
        assert!(matches!(deserialize_model(&wrong_version), Err(ModelIoError::BadVersion(9))));
        let truncated = &bytes[..bytes.len() - 4];
        assert!(matches!(deserialize_model(truncated), Err(ModelIoError::Truncated)));
        let mut trailing = bytes.clone();
        trailing.extend_from_slice(&[0u8; 8]);
        assert!(matches!(deserialize_model(&trailing), Err(ModelIoError::TrailingBytes)));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.lsrm");
        let m = small_model();
        save_model(&m, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back.params, m.params);
    }
}
