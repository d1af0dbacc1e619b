//! Binary checkpoints.
//!
//! Layout: the 8-byte magic `ADVSEGCK`, a little-endian `u32` format
//! version, a little-endian `u64` header length, a JSON header, then every
//! tensor as raw little-endian `f32` in header order. The header carries
//! the full run configuration, loop counters, critic running statistics and
//! a SHA-256 of the tensor payload.

use std::fs;
use std::io::Write;
use std::path::Path;

use advseg_tensor::{ParamStore, Tensor};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EpochRecord, TrainState};
use crate::config::RunConfig;
use crate::critic::RunningStats;
use crate::error::{Error, Result};
use crate::optim::{Adam, RmsProp};

const MAGIC: &[u8; 8] = b"ADVSEGCK";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Entry {
    group: String,
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: RunConfig,
    seed: u64,
    epoch: u64,
    global_step: u64,
    adam_t: u64,
    best_val_dice: Option<f64>,
    history: Vec<EpochRecord>,
    critic_stats: RunningStats,
    tensors: Vec<Entry>,
    payload_sha256: String,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 over parameter names, shapes and values; equal checksums mean
/// bitwise-equal stores.
pub fn param_checksum(p: &ParamStore<f32>) -> String {
    let mut h = Sha256::new();
    for (name, t) in p.iter() {
        h.update(name.as_bytes());
        h.update([0]);
        for &d in t.shape() {
            h.update((d as u64).to_le_bytes());
        }
        for v in t.data() {
            h.update(v.to_le_bytes());
        }
    }
    hex(&h.finalize())
}

pub fn save_checkpoint(path: &Path, cfg: &RunConfig, s: &TrainState) -> Result<()> {
    let groups: [(&str, &ParamStore<f32>); 5] = [
        ("seg", &s.seg),
        ("seg.adam.m", &s.seg_opt.m),
        ("seg.adam.v", &s.seg_opt.v),
        ("critic", &s.critic),
        ("critic.rmsprop.v", &s.critic_opt.v),
    ];
    let mut tensors = Vec::new();
    let mut payload = Vec::new();
    for (group, store) in groups {
        for (name, t) in store.iter() {
            tensors.push(Entry { group: group.into(), name: name.clone(), shape: t.shape().to_vec() });
            payload.extend(t.data().iter().flat_map(|v| v.to_le_bytes()));
        }
    }
    let header = Header {
        config: cfg.clone(),
        seed: s.seed,
        epoch: s.epoch,
        global_step: s.global_step,
        adam_t: s.seg_opt.t,
        best_val_dice: s.best_val_dice,
        history: s.history.clone(),
        critic_stats: s.critic_stats.clone(),
        tensors,
        payload_sha256: hex(&Sha256::digest(&payload)),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;

    let tmp = path.with_extension("ckpt.tmp");
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(MAGIC)?;
        f.write_all(&VERSION.to_le_bytes())?;
        f.write_all(&(json.len() as u64).to_le_bytes())?;
        f.write_all(&json)?;
        f.write_all(&payload)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| Error::io(path, e))
}

fn bad(path: &Path, msg: impl std::fmt::Display) -> Error {
    Error::Checkpoint(format!("{}: {msg}", path.display()))
}

/// Reads a checkpoint back into the configuration it was written with and
/// the full training state.
pub fn load_checkpoint(path: &Path) -> Result<(RunConfig, TrainState)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(bad(path, "not a checkpoint file"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(bad(path, format!("unsupported checkpoint version {version}")));
    }
    let hlen = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let body = &bytes[20..];
    if hlen > body.len() {
        return Err(bad(path, "truncated header"));
    }
    let header: Header = serde_json::from_slice(&body[..hlen]).map_err(|e| bad(path, e))?;
    let payload = &body[hlen..];
    if hex(&Sha256::digest(payload)) != header.payload_sha256 {
        return Err(bad(path, "payload checksum mismatch"));
    }

    let mut stores: [ParamStore<f32>; 5] = Default::default();
    let names = ["seg", "seg.adam.m", "seg.adam.v", "critic", "critic.rmsprop.v"];
    let mut off = 0;
    for e in header.tensors {
        let n: usize = e.shape.iter().product();
        let end = off + 4 * n;
        if end > payload.len() {
            return Err(bad(path, "truncated payload"));
        }
        let data = payload[off..end].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        off = end;
        let gi = names.iter().position(|g| *g == e.group).ok_or_else(|| bad(path, format!("unknown group {}", e.group)))?;
        stores[gi].insert(e.name, Tensor::new(e.shape, data)?);
    }
    if off != payload.len() {
        return Err(bad(path, "trailing bytes after payload"));
    }
    let [seg, m, v, critic, rv] = stores;
    let cfg = header.config;
    let t = &cfg.train;
    let mut seg_opt = Adam::new(&seg, t.seg_lr, t.adam_betas[0], t.adam_betas[1]);
    seg_opt.t = header.adam_t;
    seg_opt.m = m;
    seg_opt.v = v;
    let mut critic_opt = RmsProp::new(&critic, t.critic_lr, t.rmsprop_alpha);
    critic_opt.v = rv;
    let state = TrainState {
        seed: header.seed,
        epoch: header.epoch,
        global_step: header.global_step,
        seg,
        seg_opt,
        critic,
        critic_opt,
        critic_stats: header.critic_stats,
        best_val_dice: header.best_val_dice,
        history: header.history,
    };
    Ok((cfg, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critic::CriticConfig;
    use crate::segnet::SegNetConfig;
    use crate::trainer::Trainer;

    #[test]
    fn round_trip_and_corruption() {
        let mut cfg = RunConfig::default();
        cfg.model = SegNetConfig { base_features: 2, norm_groups: 2, levels: 2, ..Default::default() };
        cfg.critic = CriticConfig { widths: vec![2, 2, 2], ..Default::default() };
        let mut tr = Trainer::new(cfg.clone(), 5, None).unwrap();
        tr.state.global_step = 3;
        tr.state.seg_opt.t = 3;
        tr.state.best_val_dice = Some(0.25);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ckpt");
        save_checkpoint(&path, &cfg, &tr.state).unwrap();
        let (cfg2, s2) = load_checkpoint(&path).unwrap();
        assert_eq!(cfg2, cfg);
        assert_eq!(s2, tr.state);
        assert_eq!(param_checksum(&s2.seg), param_checksum(&tr.state.seg));

        let mut bytes = fs::read(&path).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 1;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Checkpoint(_))));
    }
}
