//! `MEN1` checkpoint format.
//!
//! Layout: 4-byte magic `MEN1`, 4-byte little-endian header length, JSON
//! header text (architecture, channel widths, layer order, parameter shapes),
//! then raw little-endian f32 parameter data in declared order. Optimizer
//! moments are not persisted; they reset on load.

use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ioutil::{atomic_write, read_exact_chunk};

use super::network::{NetworkSpec, ParamStore};
use super::Real;

const MAGIC: &[u8; 4] = b"MEN1";

#[derive(Serialize, Deserialize)]
struct Header {
    arch: NetworkSpec,
    params: Vec<ParamMeta>,
}

#[derive(Serialize, Deserialize)]
struct ParamMeta {
    name: String,
    dims: Vec<usize>,
}

pub fn save_checkpoint(path: &Path, spec: &NetworkSpec, params: &ParamStore) -> Result<()> {
    let header = Header {
        arch: spec.clone(),
        params: params
            .entries()
            .iter()
            .map(|e| ParamMeta { name: e.name.clone(), dims: e.tensor.dims().to_vec() })
            .collect(),
    };
    let header_text = serde_json::to_string(&header)
        .map_err(|e| Error::InvalidConfig(format!("checkpoint header: {e}")))?;
    let mut bytes = Vec::with_capacity(8 + header_text.len() + params.n_params() * 4);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(header_text.len() as u32).to_le_bytes());
    bytes.extend_from_slice(header_text.as_bytes());
    for e in params.entries() {
        for v in e.tensor.data() {
            bytes.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    atomic_write(path, &bytes)
}

pub fn load_checkpoint(path: &Path) -> Result<(NetworkSpec, ParamStore)> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let bytes = fs::read(path)?;
    let magic = read_exact_chunk(&bytes, 0, 4)
        .ok_or_else(|| Error::TruncatedPayload { path: path.into(), expected: 8, got: bytes.len() })?;
    if magic != MAGIC {
        return Err(Error::BadMagic { path: path.into(), expected: "MEN1" });
    }
    let len_bytes = read_exact_chunk(&bytes, 4, 4)
        .ok_or_else(|| Error::TruncatedPayload { path: path.into(), expected: 8, got: bytes.len() })?;
    let header_len = u32::from_le_bytes(len_bytes.try_into().unwrap()) as usize;
    let header_text = read_exact_chunk(&bytes, 8, header_len).ok_or_else(|| Error::TruncatedPayload {
        path: path.into(),
        expected: 8 + header_len,
        got: bytes.len(),
    })?;
    let header: Header = serde_json::from_slice(header_text)
        .map_err(|e| Error::BadHeader { path: path.into(), detail: e.to_string() })?;
    header.arch.validate().map_err(|e| Error::BadHeader {
        path: path.into(),
        detail: format!("invalid architecture: {e}"),
    })?;

    let mut params = ParamStore::init(&header.arch, 0);
    if params.entries().len() != header.params.len() {
        return Err(Error::BadHeader {
            path: path.into(),
            detail: format!(
                "parameter count mismatch: header {} vs architecture {}",
                header.params.len(),
                params.entries().len()
            ),
        });
    }
    let n_values: usize = header.params.iter().map(|p| p.dims.iter().product::<usize>()).sum();
    let expected = 8 + header_len + 4 * n_values;
    if bytes.len() < expected {
        return Err(Error::TruncatedPayload { path: path.into(), expected, got: bytes.len() });
    }
    let mut at = 8 + header_len;
    for (entry, meta) in params.entries_mut().iter_mut().zip(&header.params) {
        if entry.name != meta.name || entry.tensor.dims() != meta.dims.as_slice() {
            return Err(Error::BadHeader {
                path: path.into(),
                detail: format!("parameter {} does not match architecture", meta.name),
            });
        }
        for v in entry.tensor.data_mut() {
            let chunk = read_exact_chunk(&bytes, at, 4).unwrap();
            *v = f32::from_le_bytes(chunk.try_into().unwrap()) as Real;
            at += 4;
        }
    }
    Ok((header.arch, params))
}

#[cfg(test)]
mod tests {
    use super::super::network::NetworkSpec;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn tmpdir() -> std::path::PathBuf {
        let d = std::env::temp_dir().join(format!("men1-test-{}", std::process::id()));
        fs::create_dir_all(&d).unwrap();
        d
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let spec = NetworkSpec::residual_unet(8, &[16, 32]);
        let mut params = ParamStore::init(&spec, 123);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for e in params.entries_mut() {
            for v in e.tensor.data_mut() {
                let n: f64 = StandardNormal.sample(&mut rng);
                *v = n as Real;
            }
        }
        let path = tmpdir().join("roundtrip.men1");
        save_checkpoint(&path, &spec, &params).unwrap();
        let (spec2, params2) = load_checkpoint(&path).unwrap();
        assert_eq!(spec, spec2);
        for (a, b) in params.entries().iter().zip(params2.entries()) {
            assert_eq!(a.name, b.name);
            #[cfg(not(feature = "real64"))]
            assert_eq!(a.tensor.data(), b.tensor.data());
        }
    }

    #[test]
    fn bad_magic_is_reported() {
        let path = tmpdir().join("badmagic.men1");
        fs::write(&path, b"NOPE....").unwrap();
        match load_checkpoint(&path) {
            Err(Error::BadMagic { .. }) => {}
            other => panic!("expected BadMagic, got {other:?}"),
        }
    }

    #[test]
    fn truncated_payload_is_reported() {
        let spec = NetworkSpec::residual_unet(2, &[4, 8]);
        let params = ParamStore::init(&spec, 1);
        let path = tmpdir().join("trunc.men1");
        save_checkpoint(&path, &spec, &params).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 10]).unwrap();
        match load_checkpoint(&path) {
            Err(Error::TruncatedPayload { .. }) => {}
            other => panic!("expected TruncatedPayload, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_reported() {
        match load_checkpoint(Path::new("/nonexistent/x.men1")) {
            Err(Error::MissingInput(_)) => {}
            other => panic!("expected MissingInput, got {other:?}"),
        }
    }
}
