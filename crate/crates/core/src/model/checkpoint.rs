//! Checkpoint values, the little-endian binary container, and k-best
//! averaging.
//!
//! Layout: magic `EMNTCKPT`, u32 version, 32-byte config hash, u64 epoch,
//! u64 step, f64 dev loss, the config fields, u32 tensor count, then per
//! tensor a u32-length name, u64 rows, u64 cols and row-major f64 values.

use std::path::Path;

use ndarray::Array2;
use sha2::{Digest, Sha256};

use super::{ModelConfig, ModelError, ModelParams};

const MAGIC: &[u8; 8] = b"EMNTCKPT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    /// Epoch 0 is the initialization.
    pub epoch: usize,
    pub step: usize,
    pub dev_loss: f64,
    pub config_hash: [u8; 32],
}

impl Checkpoint {
    pub fn new(params: ModelParams, epoch: usize, step: usize, dev_loss: f64) -> Self {
        let config_hash = params.config.hash();
        Self {
            params,
            epoch,
            step,
            dev_loss,
            config_hash,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.params.num_params() * 8 + 1024);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.config_hash);
        out.extend_from_slice(&(self.epoch as u64).to_le_bytes());
        out.extend_from_slice(&(self.step as u64).to_le_bytes());
        out.extend_from_slice(&self.dev_loss.to_le_bytes());
        let c = &self.params.config;
        for v in [
            c.enc_layers,
            c.dec_layers,
            c.heads,
            c.model_dim,
            c.ff_dim,
            c.max_len,
            c.vocab_size,
        ] {
            out.extend_from_slice(&(v as u64).to_le_bytes());
        }
        out.extend_from_slice(&c.dropout.to_le_bytes());
        out.extend_from_slice(&c.seed.to_le_bytes());
        let names = self.params.names();
        out.extend_from_slice(&(names.len() as u32).to_le_bytes());
        self.params.for_each_tensor(|name, t| {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.nrows() as u64).to_le_bytes());
            out.extend_from_slice(&(t.ncols() as u64).to_le_bytes());
            for v in t.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        });
        out
    }

    /// Hex sha256 of the serialized form.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self, ModelError> {
        let fail = |message: String| ModelError::Format {
            path: path.to_path_buf(),
            message,
        };
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8).map_err(&fail)? != MAGIC {
            return Err(fail("bad magic".into()));
        }
        let version = r.u32().map_err(&fail)?;
        if version != VERSION {
            return Err(fail(format!("unsupported version {version}")));
        }
        let hash: [u8; 32] = r.take(32).map_err(&fail)?.try_into().expect("32 bytes");
        let epoch = r.u64().map_err(&fail)? as usize;
        let step = r.u64().map_err(&fail)? as usize;
        let dev_loss = r.f64().map_err(&fail)?;
        let mut dims = [0usize; 7];
        for d in &mut dims {
            *d = r.u64().map_err(&fail)? as usize;
        }
        let config = ModelConfig {
            enc_layers: dims[0],
            dec_layers: dims[1],
            heads: dims[2],
            model_dim: dims[3],
            ff_dim: dims[4],
            max_len: dims[5],
            vocab_size: dims[6],
            dropout: r.f64().map_err(&fail)?,
            seed: r.u64().map_err(&fail)?,
        };
        config.validate().map_err(|e| fail(e.to_string()))?;
        if config.hash() != hash {
            return Err(fail("config hash does not match stored config".into()));
        }
        let mut params = ModelParams::init(&config).map_err(|e| fail(e.to_string()))?;
        let count = r.u32().map_err(&fail)? as usize;
        let expected = params.names();
        if count != expected.len() {
            return Err(fail(format!(
                "expected {} tensors, found {count}",
                expected.len()
            )));
        }
        let mut tensors = Vec::with_capacity(count);
        for want in &expected {
            let len = r.u32().map_err(&fail)? as usize;
            let name = std::str::from_utf8(r.take(len).map_err(&fail)?)
                .map_err(|_| fail("non-UTF-8 name".into()))?;
            if name != want {
                return Err(fail(format!("expected tensor {want}, found {name}")));
            }
            let rows = r.u64().map_err(&fail)? as usize;
            let cols = r.u64().map_err(&fail)? as usize;
            let mut values = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                values.push(r.f64().map_err(&fail)?);
            }
            tensors.push(Array2::from_shape_vec((rows, cols), values).expect("length checked"));
        }
        if r.pos != bytes.len() {
            return Err(fail("trailing bytes".into()));
        }
        let mut shape_error = None;
        let mut it = tensors.into_iter();
        params.for_each_tensor_mut(|name, t| {
            let loaded = it.next().expect("count checked");
            if loaded.dim() != t.dim() {
                shape_error.get_or_insert_with(|| {
                    format!(
                        "tensor {name} has shape {:?}, expected {:?}",
                        loaded.dim(),
                        t.dim()
                    )
                });
            } else {
                *t = loaded;
            }
        });
        if let Some(message) = shape_error {
            return Err(fail(message));
        }
        Ok(Self {
            params,
            epoch,
            step,
            dev_loss,
            config_hash: hash,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|source| ModelError::Io {
                path: dir.to_path_buf(),
                source,
            })?;
        }
        std::fs::write(path, self.to_bytes()).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let bytes = std::fs::read(path).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(&bytes, path)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64, String> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn f64(&mut self) -> Result<f64, String> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

/// Indices of the `k` checkpoints with lowest dev loss; ties go to the
/// earlier position.
pub(crate) fn select_best(checkpoints: &[Checkpoint], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..checkpoints.len()).collect();
    order.sort_by(|&a, &b| {
        checkpoints[a]
            .dev_loss
            .total_cmp(&checkpoints[b].dev_loss)
            .then(a.cmp(&b))
    });
    order.truncate(k);
    order.sort_unstable();
    order
}

/// Elementwise mean of the `k` lowest-dev-loss checkpoints. A running mean
/// is used so that averaging equal tensors reproduces them exactly.
pub fn average_checkpoints(
    checkpoints: &[Checkpoint],
    k: usize,
) -> Result<ModelParams, ModelError> {
    if k == 0 || checkpoints.len() < k {
        return Err(ModelError::NotEnoughCheckpoints {
            needed: k.max(1),
            got: checkpoints.len(),
        });
    }
    let hash = checkpoints[0].config_hash;
    if checkpoints.iter().any(|c| c.config_hash != hash) {
        return Err(ModelError::ConfigMismatch);
    }
    let chosen = select_best(checkpoints, k);
    let mut mean = checkpoints[chosen[0]].params.clone();
    for (n, &i) in chosen.iter().enumerate().skip(1) {
        let w = 1.0 / (n + 1) as f64;
        mean.zip_mut(&checkpoints[i].params, |m, x| {
            m.zip_mut_with(x, |m, &x| *m += (x - *m) * w);
        });
    }
    Ok(mean)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ModelConfig {
        ModelConfig {
            enc_layers: 1,
            dec_layers: 1,
            heads: 2,
            model_dim: 4,
            ff_dim: 6,
            dropout: 0.1,
            max_len: 8,
            vocab_size: 9,
            seed: 5,
        }
    }

    fn filled(value: f64, dev_loss: f64) -> Checkpoint {
        let mut p = ModelParams::init(&cfg()).unwrap();
        p.for_each_tensor_mut(|_, t| t.fill(value));
        Checkpoint::new(p, 0, 0, dev_loss)
    }

    #[test]
    fn bytes_roundtrip() {
        let c = Checkpoint::new(ModelParams::init(&cfg()).unwrap(), 3, 42, 1.25);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/c.ckpt");
        c.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.digest(), c.digest());
    }

    #[test]
    fn corrupt_files_rejected() {
        let c = Checkpoint::new(ModelParams::init(&cfg()).unwrap(), 0, 0, 0.0);
        let bytes = c.to_bytes();
        let p = Path::new("x");
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1], p).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Checkpoint::from_bytes(&extra, p).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad, p).is_err());
        let mut hash = bytes;
        hash[12] ^= 1;
        assert!(Checkpoint::from_bytes(&hash, p).is_err());
    }

    #[test]
    fn identity_and_midpoint() {
        let same: Vec<_> = (0..5).map(|_| filled(0.3, 1.0)).collect();
        assert_eq!(average_checkpoints(&same, 5).unwrap(), same[0].params);
        let mid = average_checkpoints(&[filled(0.0, 1.0), filled(1.0, 2.0)], 2).unwrap();
        mid.for_each_tensor(|_, t| assert!(t.iter().all(|&v| v == 0.5)));
    }

    #[test]
    fn selection_drops_worst() {
        let losses = [3.0, 1.0, 9.0, 2.0, 8.5, 4.0, 0.5];
        let cps: Vec<_> = losses
            .iter()
            .enumerate()
            .map(|(i, &l)| filled(i as f64, l))
            .collect();
        assert_eq!(select_best(&cps, 5), [0, 1, 3, 5, 6]);
        let avg = average_checkpoints(&cps, 5).unwrap();
        let expected = (0.0 + 1.0 + 3.0 + 5.0 + 6.0) / 5.0;
        avg.for_each_tensor(|_, t| assert!(t.iter().all(|&v| (v - expected).abs() < 1e-12)));
    }

    #[test]
    fn errors() {
        let a = filled(0.0, 1.0);
        assert!(matches!(
            average_checkpoints(std::slice::from_ref(&a), 2),
            Err(ModelError::NotEnoughCheckpoints { needed: 2, got: 1 })
        ));
        let mut b = filled(0.0, 1.0);
        b.config_hash[0] ^= 1;
        assert!(matches!(
            average_checkpoints(&[a, b], 2),
            Err(ModelError::ConfigMismatch)
        ));
    }
}
