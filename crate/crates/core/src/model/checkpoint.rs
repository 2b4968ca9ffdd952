//! Binary parameter checkpoints.
//!
//! Layout, all integers and reals little-endian:
//!
//! ```text
//! magic      8 bytes  "SFNNCKPT"
//! version    u32      1
//! config     6 × u64  lookback, horizon, hidden_width, num_blocks,
//!                     n_series, num_mixing_blocks
//!            u8       flags: 1 centering, 2 mixing, 4 layer norm, 8 affine
//! tensors    u64      count
//!            per tensor: u64 length, then length × f64
//! ```
//!
//! Tensors follow [`SfnnParams::tensors`] order. A sidecar `<file>.meta.txt`
//! lists the config and each tensor's name and length in plain text.

use std::fs;
use std::path::{Path, PathBuf};

use super::{ModelError, SfnnConfig, SfnnParams};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SFNNCKPT";
const VERSION: u32 = 1;

fn err(msg: impl Into<String>) -> ModelError {
    ModelError::Checkpoint(msg.into())
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.txt");
    PathBuf::from(s)
}

pub fn save_checkpoint(
    path: &Path,
    config: &SfnnConfig,
    params: &SfnnParams,
) -> Result<(), ModelError> {
    params.check_shapes(config)?;
    let tensors = params.tensors();
    let mut buf = Vec::with_capacity(64 + 8 * params.num_parameters());
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    for v in [
        config.lookback,
        config.horizon,
        config.hidden_width,
        config.num_blocks,
        config.n_series,
        config.num_mixing_blocks,
    ] {
        buf.extend_from_slice(&(v as u64).to_le_bytes());
    }
    let flags = u8::from(config.use_mean_centering)
        | u8::from(config.use_series_mixing) << 1
        | u8::from(config.use_layer_norm) << 2
        | u8::from(config.layer_norm_affine) << 3;
    buf.push(flags);
    buf.extend_from_slice(&(tensors.len() as u64).to_le_bytes());
    let mut meta = format!(
        "format SFNNCKPT v{VERSION}\nconfig {}\n",
        serde_json::to_string(config).map_err(|e| err(e.to_string()))?
    );
    for (name, t) in &tensors {
        buf.extend_from_slice(&(t.len() as u64).to_le_bytes());
        for v in t.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        meta.push_str(&format!("tensor {name} {}\n", t.len()));
    }
    fs::write(path, buf).map_err(|e| err(format!("{}: {e}", path.display())))?;
    fs::write(sidecar(path), meta).map_err(|e| err(format!("{}: {e}", path.display())))?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| err(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn count(&mut self) -> Result<usize, ModelError> {
        usize::try_from(self.u64()?).map_err(|_| err("count overflows usize"))
    }
}

pub fn load_checkpoint(path: &Path) -> Result<(SfnnConfig, SfnnParams), ModelError> {
    let bytes = fs::read(path).map_err(|e| err(format!("{}: {e}", path.display())))?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
    };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err(err("bad magic"));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
    if version != VERSION {
        return Err(err(format!("unsupported version {version}")));
    }
    let dims: Vec<usize> = (0..6).map(|_| r.count()).collect::<Result<_, _>>()?;
    let flags = r.take(1)?[0];
    let config = SfnnConfig {
        lookback: dims[0],
        horizon: dims[1],
        hidden_width: dims[2],
        num_blocks: dims[3],
        n_series: dims[4],
        num_mixing_blocks: dims[5],
        use_mean_centering: flags & 1 != 0,
        use_series_mixing: flags & 2 != 0,
        use_layer_norm: flags & 4 != 0,
        layer_norm_affine: flags & 8 != 0,
    };
    config.validate()?;
    let mut params = SfnnParams::zeros(&config);
    let count = r.count()?;
    let mut slots = params.tensors_mut();
    if count != slots.len() {
        return Err(err(format!("{count} tensors, config implies {}", slots.len())));
    }
    for (i, slot) in slots.iter_mut().enumerate() {
        let len = r.count()?;
        if len != slot.len() {
            return Err(err(format!("tensor {i}: length {len}, expected {}", slot.len())));
        }
        for (v, chunk) in slot.iter_mut().zip(r.take(8 * len)?.chunks_exact(8)) {
            *v = f64::from_le_bytes(chunk.try_into().unwrap());
        }
    }
    if r.pos != bytes.len() {
        return Err(err("trailing bytes"));
    }
    Ok((config, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_params;
    use crate::numerics::SeededRng;

    #[test]
    fn roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let c = SfnnConfig {
            lookback: 5,
            horizon: 2,
            hidden_width: 4,
            num_blocks: 2,
            n_series: 3,
            use_mean_centering: true,
            use_series_mixing: true,
            num_mixing_blocks: 1,
            use_layer_norm: true,
            layer_norm_affine: true,
        };
        let p = init_params(&c, &mut SeededRng::new(2)).unwrap();
        save_checkpoint(&path, &c, &p).unwrap();
        let (c2, p2) = load_checkpoint(&path).unwrap();
        assert_eq!(c, c2);
        assert_eq!(p, p2);
        let meta = fs::read_to_string(dir.path().join("m.ckpt.meta.txt")).unwrap();
        assert!(meta.contains("tensor layer_norm.1.bias 4"));
        let size = fs::metadata(&path).unwrap().len() as usize;
        let n_tensors = p.tensors().len();
        assert_eq!(size, 8 + 4 + 48 + 1 + 8 + 8 * n_tensors + 8 * p.num_parameters());
    }

    #[test]
    fn rejects_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let c = SfnnConfig::linear(3, 1, 1, 2);
        save_checkpoint(&path, &c, &SfnnParams::zeros(&c)).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.pop();
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(ModelError::Checkpoint(_))));
        bytes[0] = b'X';
        fs::write(&path, &bytes).unwrap();
        assert!(load_checkpoint(&path).unwrap_err().to_string().contains("magic"));
    }
}
