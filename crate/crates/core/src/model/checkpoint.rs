//! Binary checkpoints.
//!
//! Layout: `XSRLCKPT`, `u32` version, `u64` metadata length, UTF-8 JSON
//! metadata, then every tensor as little-endian `f64` in metadata order.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};
use crate::numeric::{ParamSet, Precision, Real, Tensor};
use crate::vocab::Vocabulary;

const MAGIC: &[u8; 8] = b"XSRLCKPT";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Meta {
    precision: Precision,
    config: ModelConfig,
    vocab: String,
    tensors: Vec<(String, Vec<usize>)>,
    #[serde(default)]
    extra: serde_json::Value,
}

/// Model plus optional named side tensors (optimizer moments) and free-form
/// state.
pub struct Checkpoint<T: Real> {
    pub model: Model<T>,
    pub side: Vec<(String, Tensor<T>)>,
    pub extra: serde_json::Value,
}

fn precision_of<T: Real>() -> Precision {
    if T::BITS == 32 {
        Precision::F32
    } else {
        Precision::F64
    }
}

pub fn save_checkpoint<T: Real>(path: impl AsRef<Path>, model: &Model<T>, side: &[(String, Tensor<T>)], extra: serde_json::Value) -> Result<()> {
    let path = path.as_ref();
    let mut tensors: Vec<(String, Vec<usize>)> = model.params.iter().map(|(n, t)| (n.to_string(), t.shape().to_vec())).collect();
    tensors.extend(side.iter().map(|(n, t)| (n.clone(), t.shape().to_vec())));
    let meta = Meta {
        precision: precision_of::<T>(),
        config: model.config.clone(),
        vocab: model.vocab.to_text(),
        tensors,
        extra,
    };
    let json = serde_json::to_vec(&meta).map_err(|e| Error::Format(e.to_string()))?;
    let mut buf = Vec::with_capacity(json.len() + 8 * (model.params.num_values() + 1));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    for t in model.params.iter().map(|(_, t)| t).chain(side.iter().map(|(_, t)| t)) {
        for v in t.data() {
            buf.extend_from_slice(&v.as_f64().to_le_bytes());
        }
    }
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(&buf).map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn take<'a>(bytes: &'a [u8], at: &mut usize, n: usize, path: &Path) -> Result<&'a [u8]> {
    if *at + n > bytes.len() {
        return Err(Error::Format(format!("{}: truncated checkpoint", path.display())));
    }
    let s = &bytes[*at..*at + n];
    *at += n;
    Ok(s)
}

/// Loads a checkpoint, rebuilding the model from its stored configuration
/// and checking every tensor's name and shape against it.
pub fn load_checkpoint<T: Real>(path: impl AsRef<Path>) -> Result<Checkpoint<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut at = 0;
    if take(&bytes, &mut at, 8, path)? != MAGIC {
        return Err(Error::Format(format!("{}: not a checkpoint", path.display())));
    }
    let version = u32::from_le_bytes(take(&bytes, &mut at, 4, path)?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Format(format!("{}: checkpoint version {version}, expected {VERSION}", path.display())));
    }
    let meta_len = u64::from_le_bytes(take(&bytes, &mut at, 8, path)?.try_into().expect("8 bytes")) as usize;
    let meta: Meta = serde_json::from_slice(take(&bytes, &mut at, meta_len, path)?)
        .map_err(|e| Error::Format(format!("{}: bad metadata: {e}", path.display())))?;
    let vocab = Vocabulary::from_text(&meta.vocab)?;
    let mut rng = rand::rngs::mock::StepRng::new(0, 0);
    let mut model: Model<T> = Model::new(meta.config, vocab, &mut rng)?;

    let mut loaded = ParamSet::<T>::new();
    for (name, shape) in &meta.tensors {
        let n: usize = shape.iter().product();
        let raw = take(&bytes, &mut at, 8 * n, path)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8 bytes"))))
            .collect();
        loaded.add(name.clone(), Tensor::new(shape.clone(), data)?);
    }
    if at != bytes.len() {
        return Err(Error::Format(format!("{}: {} trailing bytes", path.display(), bytes.len() - at)));
    }

    let expected: Vec<String> = model.params.iter().map(|(n, _)| n.to_string()).collect();
    let mut side = Vec::new();
    for (name, t) in loaded.iter() {
        if expected.iter().any(|e| e == name) {
            model.params.assign(name, t.clone())?;
        } else {
            side.push((name.to_string(), t.clone()));
        }
    }
    for name in &expected {
        if loaded.id(name).is_none() {
            return Err(Error::Format(format!("{}: missing tensor `{name}`", path.display())));
        }
    }
    Ok(Checkpoint {
        model,
        side,
        extra: meta.extra,
    })
}

/// Stored precision without loading tensors.
pub fn checkpoint_precision(path: impl AsRef<Path>) -> Result<Precision> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut at = 20;
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(Error::Format(format!("{}: not a checkpoint", path.display())));
    }
    let meta_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let meta: Meta = serde_json::from_slice(take(&bytes, &mut at, meta_len, path)?)
        .map_err(|e| Error::Format(format!("{}: bad metadata: {e}", path.display())))?;
    Ok(meta.precision)
}
