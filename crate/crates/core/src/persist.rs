//! Binary model files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "HSPEECH\0"
//! version    u32
//! header     u64 length + UTF-8 JSON (ModelHeader)
//! vocab      u64 length + UTF-8 vocabulary TSV
//! blocks     u32 count, then per block:
//!              u16 name length + name, u32 ndim, ndim x u64 dims,
//!              product(dims) x f64
//! checksum   32 bytes SHA-256 of everything above
//! ```

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::TrainedModel;
use crate::error::{Error, Result};
use crate::features::{FeatureCombination, TendencyProfile};
use crate::nn::{FeatureMode, Network, NetworkSpec, Tensor};
use crate::text::{TokenizerConfig, Vocabulary};

pub const MAGIC: &[u8; 8] = b"HSPEECH\0";
pub const FORMAT_VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub combination: FeatureCombination,
    pub spec: NetworkSpec,
    pub tokenizer: TokenizerConfig,
    pub vocab_max_size: usize,
    pub vocab_hash: String,
    pub priors: TendencyProfile,
    pub seed: u64,
    pub selected_epoch: usize,
    pub crate_version: String,
}

pub fn to_bytes(model: &TrainedModel) -> Vec<u8> {
    let header = ModelHeader {
        combination: model.combination,
        spec: model.network.spec,
        tokenizer: model.tokenizer,
        vocab_max_size: model.vocab.max_size(),
        vocab_hash: model.vocab_hash(),
        priors: model.priors,
        seed: model.seed,
        selected_epoch: model.selected_epoch,
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    let header = serde_json::to_vec(&header).expect("header serializes");
    let vocab = model.vocab.to_tsv();

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&(vocab.len() as u64).to_le_bytes());
    out.extend_from_slice(vocab.as_bytes());
    let blocks = model.network.blocks();
    out.extend_from_slice(&(blocks.len() as u32).to_le_bytes());
    for (name, t) in blocks {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::ModelFormat(format!(
                "truncated model file while reading {what}"
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn len_prefixed_str(&mut self, what: &str) -> Result<&'a str> {
        let n = self.u64(what)? as usize;
        std::str::from_utf8(self.take(n, what)?)
            .map_err(|_| Error::ModelFormat(format!("{what} is not UTF-8")))
    }
}

/// Decodes a model, checking magic, version, checksum and every block shape.
pub fn from_bytes(bytes: &[u8]) -> Result<TrainedModel> {
    if bytes.len() < MAGIC.len() + 4 + CHECKSUM_LEN {
        return Err(Error::ModelFormat("file too short to be a model".into()));
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::ModelFormat("bad magic bytes".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let (body, stored) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
    if Sha256::digest(body).as_slice() != stored {
        return Err(Error::ModelFormat("checksum mismatch".into()));
    }

    let mut r = Reader { buf: body, pos: 12 };
    let header: ModelHeader = serde_json::from_str(r.len_prefixed_str("header")?)
        .map_err(|e| Error::ModelFormat(format!("bad header: {e}")))?;
    let vocab = Vocabulary::from_tsv(
        r.len_prefixed_str("vocabulary")?,
        Some(header.vocab_max_size),
    )?;
    if vocab.content_hash() != header.vocab_hash {
        return Err(Error::ModelFormat(
            "vocabulary does not match its recorded hash".into(),
        ));
    }
    header.spec.validate()?;
    if header.spec.token_rows != vocab.index_space() {
        return Err(Error::ModelFormat(format!(
            "embedding has {} token rows but vocabulary spans {}",
            header.spec.token_rows,
            vocab.index_space()
        )));
    }
    if header.spec.n_features != header.combination.feature_count() {
        return Err(Error::ModelFormat(format!(
            "network takes {} features but combination {} has {}",
            header.spec.n_features,
            header.combination,
            header.combination.feature_count()
        )));
    }

    let mut network = Network::zeros(header.spec);
    let count = r.u32("block count")? as usize;
    let expected = network.blocks().len();
    if count != expected {
        return Err(Error::ModelFormat(format!(
            "expected {expected} parameter blocks, found {count}"
        )));
    }
    for (name, slot) in network.blocks_mut() {
        let len = r.u16("block name")? as usize;
        let found = std::str::from_utf8(r.take(len, "block name")?).unwrap_or("<invalid>");
        if found != name {
            return Err(Error::ModelFormat(format!(
                "expected block {name}, found {found}"
            )));
        }
        let ndim = r.u32("block rank")? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim.min(8) {
            shape.push(r.u64("block shape")? as usize);
        }
        if shape != slot.shape() {
            return Err(Error::ModelFormat(format!(
                "block {name} has shape {shape:?}, expected {:?}",
                slot.shape()
            )));
        }
        let raw = r.take(slot.len() * 8, name)?;
        let data: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        *slot = Tensor::from_vec(&shape, data)?;
    }
    if r.pos != body.len() {
        return Err(Error::ModelFormat(
            "trailing bytes after parameter blocks".into(),
        ));
    }

    Ok(TrainedModel {
        combination: header.combination,
        network,
        vocab,
        tokenizer: header.tokenizer,
        priors: header.priors,
        seed: header.seed,
        selected_epoch: header.selected_epoch,
    })
}

pub fn save(model: &TrainedModel, path: &Path) -> Result<()> {
    let bytes = to_bytes(model);
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<TrainedModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes).map_err(|e| match e {
        Error::ModelFormat(m) => Error::ModelFormat(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Loads a model and refuses it unless it uses `mode`.
pub fn load_expecting(path: &Path, mode: FeatureMode) -> Result<TrainedModel> {
    let model = load(path)?;
    model.ensure_feature_mode(mode)?;
    Ok(model)
}

/// Logs a warning when models disagree on their vocabulary. Returns whether
/// all hashes match.
pub fn check_vocab_hashes(models: &[TrainedModel]) -> bool {
    let Some(first) = models.first() else {
        return true;
    };
    let reference = first.vocab_hash();
    let mut same = true;
    for (i, m) in models.iter().enumerate().skip(1) {
        if m.vocab_hash() != reference {
            log::warn!(
                "model {i} ({}) was trained with a different vocabulary than model 0",
                m.combination
            );
            same = false;
        }
    }
    same
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::CellActivation;
    use rand::SeedableRng;

    fn model(mode: FeatureMode) -> TrainedModel {
        let vocab = Vocabulary::build(&[vec!["a", "b", "c"]], 10).unwrap();
        let spec = NetworkSpec {
            token_rows: vocab.index_space(),
            embedding_dim: 3,
            hidden: 4,
            seq_len: 5,
            n_features: 2,
            activation: CellActivation::Tanh,
            feature_mode: mode,
            masking: true,
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        TrainedModel {
            combination: FeatureCombination::NS,
            network: Network::init(spec, &mut rng).unwrap(),
            vocab,
            tokenizer: TokenizerConfig::default(),
            priors: TendencyProfile {
                neutral: 0.5,
                racism: 0.25,
                sexism: 0.25,
            },
            seed: 9,
            selected_epoch: 3,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for mode in [FeatureMode::Dense, FeatureMode::PseudoTokens] {
            let m = model(mode);
            let back = from_bytes(&to_bytes(&m)).unwrap();
            assert_eq!(back, m);
        }
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = to_bytes(&model(FeatureMode::Dense));
        let mut flipped = bytes.clone();
        let mid = bytes.len() / 2;
        flipped[mid] ^= 1;
        assert!(matches!(from_bytes(&flipped), Err(Error::ModelFormat(_))));
        assert!(matches!(
            from_bytes(&bytes[..bytes.len() - 40]),
            Err(Error::ModelFormat(_))
        ));
        let mut versioned = bytes.clone();
        versioned[8] = 7;
        assert!(from_bytes(&versioned)
            .unwrap_err()
            .to_string()
            .contains("version"));
    }

    #[test]
    fn mode_guard_refuses_other_mode() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        save(&model(FeatureMode::PseudoTokens), &path).unwrap();
        assert!(load_expecting(&path, FeatureMode::Dense).is_err());
        assert!(load_expecting(&path, FeatureMode::PseudoTokens).is_ok());
    }
}
