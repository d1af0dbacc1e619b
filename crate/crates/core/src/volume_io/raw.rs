use std::fs;
use std::path::{Path, PathBuf};

use advseg_tensor::Tensor;
use serde::{Deserialize, Serialize};

use super::Volume;
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(super) struct Sidecar {
    pub dims: [usize; 3],
    #[serde(default = "unit_spacing")]
    pub spacing: [f64; 3],
    pub dtype: String,
    #[serde(default)]
    pub channel_names: Vec<String>,
}

fn unit_spacing() -> [f64; 3] {
    [1.0; 3]
}

/// `foo.f32` becomes `foo.<ext>`; anything else gets `.<ext>` appended.
pub(super) fn with_ext(path: &Path, ext: &str) -> PathBuf {
    match path.extension().and_then(|e| e.to_str()) {
        Some("f32" | "u8" | "json") => path.with_extension(ext),
        _ => {
            let mut s = path.as_os_str().to_owned();
            s.push(format!(".{ext}"));
            PathBuf::from(s)
        }
    }
}

fn read_sidecar(data_path: &Path) -> Result<Sidecar> {
    let path = data_path.with_extension("json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(&path, e))
}

fn write_sidecar(data_path: &Path, sidecar: &Sidecar) -> Result<()> {
    let path = data_path.with_extension("json");
    let text = serde_json::to_string_pretty(sidecar).expect("sidecar serializes");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn read_bytes(path: &Path, expected: usize) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != expected {
        return Err(Error::format(path, format!("expected {expected} bytes, found {}", bytes.len())));
    }
    Ok(bytes)
}

pub(super) fn read_volume(path: &Path) -> Result<Volume> {
    let sc = read_sidecar(path)?;
    if sc.dtype != "f32" {
        return Err(Error::format(path, format!("expected dtype f32, sidecar says {}", sc.dtype)));
    }
    let c = sc.channel_names.len().max(1);
    let n = c * sc.dims.iter().product::<usize>();
    let bytes = read_bytes(path, 4 * n)?;
    let data = bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
    let t = Tensor::new(vec![c, sc.dims[0], sc.dims[1], sc.dims[2]], data).map_err(|e| Error::format(path, e))?;
    Volume::new(t, sc.spacing, super::case_id_from_path(path))
}

pub(super) fn write_f32(path: &Path, data: &[f32], dims: [usize; 3], spacing: [f64; 3], names: Vec<String>) -> Result<()> {
    let bytes: Vec<u8> = data.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    write_sidecar(path, &Sidecar { dims, spacing, dtype: "f32".into(), channel_names: names })
}

pub(super) fn read_u8(path: &Path) -> Result<(Vec<u8>, [usize; 3])> {
    let sc = read_sidecar(path)?;
    if sc.dtype != "u8" {
        return Err(Error::format(path, format!("expected dtype u8, sidecar says {}", sc.dtype)));
    }
    let bytes = read_bytes(path, sc.dims.iter().product())?;
    Ok((bytes, sc.dims))
}

pub(super) fn write_u8(path: &Path, data: &[u8], dims: [usize; 3], spacing: [f64; 3]) -> Result<()> {
    fs::write(path, data).map_err(|e| Error::io(path, e))?;
    write_sidecar(path, &Sidecar { dims, spacing, dtype: "u8".into(), channel_names: vec!["seg".into()] })
}
