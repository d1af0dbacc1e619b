//! Volumes, label maps, file formats and the synthetic phantom generator.
//!
//! Two on-disk formats are understood:
//!
//! * NIfTI-1 (`.nii`, `.nii.gz`), one modality per file. Orientation is
//!   ignored and the array axes are read as depth, height, width.
//! * A raw format: `<name>.f32` (or `<name>.u8` for labels) holding
//!   little-endian samples in channel-major, C order, next to a
//!   `<name>.json` sidecar with `dims`, `spacing`, `dtype` and
//!   `channel_names`.
//!
//! A case directory `<case_id>/` holds either `<case_id>_image.f32` with all
//! four channels, or `<case_id>_{flair,t1,t1ce,t2}.nii[.gz]`, plus an
//! optional `<case_id>_seg` label file in either format.

mod labels;
mod nii;
mod phantom;
mod raw;

use std::fs;
use std::path::{Path, PathBuf};

use advseg_tensor::Tensor;

use crate::error::{Error, Result};

pub use labels::{channels_to_labels, labels_to_channels};
pub use phantom::{generate_phantom, PhantomConfig};

/// Channel order of model inputs.
pub const MODALITIES: [&str; 4] = ["flair", "t1", "t1ce", "t2"];
/// Channel order of region encodings and predictions.
pub const REGIONS: [&str; 3] = ["ET", "TC", "WT"];

/// Multi-channel intensity image, `data` shaped `(C, D, H, W)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume {
    pub data: Tensor<f32>,
    /// Voxel size in millimetres along depth, height, width.
    pub spacing: [f64; 3],
    pub case_id: String,
}

impl Volume {
    pub fn new(data: Tensor<f32>, spacing: [f64; 3], case_id: impl Into<String>) -> Result<Self> {
        if data.shape().len() != 4 || data.shape()[1..].contains(&0) {
            return Err(Error::Shape(format!("volume must be (C, D, H, W) with nonzero dims, got {:?}", data.shape())));
        }
        if !data.is_finite() {
            return Err(Error::Shape("volume contains non-finite values".into()));
        }
        Ok(Volume { data, spacing, case_id: case_id.into() })
    }

    pub fn channels(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn dims(&self) -> [usize; 3] {
        let s = self.data.shape();
        [s[1], s[2], s[3]]
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.voxels();
        &self.data.data()[c * n..(c + 1) * n]
    }

    pub fn voxels(&self) -> usize {
        self.dims().iter().product()
    }
}

/// Integer ground truth over the alphabet {0, 1, 2, 4}.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    pub data: Vec<u8>,
    pub dims: [usize; 3],
    pub case_id: String,
}

impl LabelMap {
    pub fn new(data: Vec<u8>, dims: [usize; 3], case_id: impl Into<String>) -> Result<Self> {
        if data.len() != dims.iter().product::<usize>() {
            return Err(Error::Shape(format!("label data length {} does not match dims {dims:?}", data.len())));
        }
        validate_alphabet(&data)?;
        Ok(LabelMap { data, dims, case_id: case_id.into() })
    }

    pub fn zeros(dims: [usize; 3], case_id: impl Into<String>) -> Self {
        LabelMap { data: vec![0; dims.iter().product()], dims, case_id: case_id.into() }
    }
}

pub(crate) fn validate_alphabet(data: &[u8]) -> Result<()> {
    match data.iter().find(|v| !matches!(v, 0 | 1 | 2 | 4)) {
        Some(&v) => Err(Error::InvalidLabel(v)),
        None => Ok(()),
    }
}

/// Binary nested-region encoding, `data` shaped `(3, D, H, W)` in
/// [`REGIONS`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionChannels {
    pub data: Tensor<f32>,
}

impl RegionChannels {
    pub fn dims(&self) -> [usize; 3] {
        let s = self.data.shape();
        [s[1], s[2], s[3]]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Case {
    pub image: Volume,
    pub labels: LabelMap,
}

impl Case {
    pub fn id(&self) -> &str {
        &self.image.case_id
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub cases: Vec<Case>,
}

impl Dataset {
    pub fn new(cases: Vec<Case>) -> Result<Self> {
        let mut ids: Vec<&str> = cases.iter().map(Case::id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("duplicate case id {}", w[0])));
        }
        Ok(Dataset { cases })
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.cases.iter().map(|c| c.id().to_string()).collect()
    }
}

/// Output format for writers that support both.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum FileFormat {
    #[default]
    Nifti,
    Raw,
}

fn is_nifti(path: &Path) -> bool {
    let s = path.to_string_lossy();
    s.ends_with(".nii") || s.ends_with(".nii.gz")
}

/// Loads a single image file or a case directory.
///
/// A directory yields the four stacked modalities; a NIfTI file yields a
/// one-channel volume; a raw `.f32` file yields whatever channels its
/// sidecar declares. Values are returned unmodified.
pub fn load_volume(path: &Path) -> Result<Volume> {
    if path.is_dir() {
        return load_case_image(path);
    }
    if !path.exists() {
        return Err(Error::io(path, std::io::ErrorKind::NotFound.into()));
    }
    if is_nifti(path) {
        let (data, dims, spacing) = nii::read_f32(path)?;
        let t = Tensor::new(vec![1, dims[0], dims[1], dims[2]], data).map_err(|e| Error::format(path, e))?;
        Volume::new(t, spacing, case_id_from_path(path))
    } else {
        raw::read_volume(path)
    }
}

/// Writes a volume. `.nii`/`.nii.gz` paths require a single channel; any
/// other path is written in the raw format (`.f32` plus sidecar).
pub fn save_volume(v: &Volume, path: &Path) -> Result<()> {
    if is_nifti(path) {
        if v.channels() != 1 {
            return Err(Error::Shape(format!("NIfTI output holds one channel, volume has {}", v.channels())));
        }
        nii::write_f32(path, v.channel(0), v.dims(), v.spacing)
    } else {
        let names = if v.channels() == MODALITIES.len() {
            MODALITIES.iter().map(|s| s.to_string()).collect()
        } else {
            (0..v.channels()).map(|c| format!("c{c}")).collect()
        };
        raw::write_f32(&raw::with_ext(path, "f32"), v.data.data(), v.dims(), v.spacing, names)
    }
}

/// Writes a raw multi-channel float field with explicit channel names.
pub fn save_raw_channels(data: &Tensor<f32>, spacing: [f64; 3], names: &[&str], path: &Path) -> Result<()> {
    let s = data.shape();
    if s.len() != 4 || s[0] != names.len() {
        return Err(Error::Shape(format!("expected ({}, D, H, W), got {s:?}", names.len())));
    }
    raw::write_f32(
        &raw::with_ext(path, "f32"),
        data.data(),
        [s[1], s[2], s[3]],
        spacing,
        names.iter().map(|n| n.to_string()).collect(),
    )
}

pub fn load_labelmap(path: &Path) -> Result<LabelMap> {
    let id = case_id_from_path(path);
    let (data, dims) = if is_nifti(path) {
        let (data, dims, _) = nii::read_u8(path)?;
        (data, dims)
    } else {
        raw::read_u8(path)?
    };
    LabelMap::new(data, dims, id)
}

/// Writes a label map as 8-bit NIfTI or raw `.u8`, chosen by extension.
/// The alphabet is checked before anything touches the disk.
pub fn save_labelmap(lm: &LabelMap, path: &Path) -> Result<()> {
    validate_alphabet(&lm.data)?;
    if is_nifti(path) {
        nii::write_u8(path, &lm.data, lm.dims, [1.0; 3])
    } else {
        raw::write_u8(&raw::with_ext(path, "u8"), &lm.data, lm.dims, [1.0; 3])
    }
}

/// Strips known suffixes: `x/BraTS_001_seg.nii.gz` becomes `BraTS_001`.
pub fn case_id_from_path(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let mut stem = name.as_str();
    for ext in [".nii.gz", ".nii", ".f32", ".u8", ".json"] {
        if let Some(s) = stem.strip_suffix(ext) {
            stem = s;
            break;
        }
    }
    for suffix in ["_seg", "_pred", "_prob", "_image", "_flair", "_t1ce", "_t1", "_t2"] {
        if let Some(s) = stem.strip_suffix(suffix) {
            return s.to_string();
        }
    }
    stem.to_string()
}

/// Finds `<dir>/<stem>` with any supported extension.
pub fn find_file(dir: &Path, stem: &str) -> Option<PathBuf> {
    ["nii.gz", "nii", "f32", "u8"].iter().map(|ext| dir.join(format!("{stem}.{ext}"))).find(|p| p.is_file())
}

fn dir_case_id(dir: &Path) -> Result<String> {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .ok_or_else(|| Error::format(dir, "case directory has no name"))
}

/// Loads the four-channel image of a case directory.
pub fn load_case_image(dir: &Path) -> Result<Volume> {
    let id = dir_case_id(dir)?;
    let combined = dir.join(format!("{id}_image.f32"));
    if combined.is_file() {
        let mut v = raw::read_volume(&combined)?;
        if v.channels() != MODALITIES.len() {
            return Err(Error::IncompleteCase { case: id, missing: format!("channels ({} of 4)", v.channels()) });
        }
        v.case_id = id;
        return Ok(v);
    }
    let mut channels = Vec::with_capacity(MODALITIES.len());
    let mut geometry: Option<([usize; 3], [f64; 3])> = None;
    for m in MODALITIES {
        let file = find_file(dir, &format!("{id}_{m}"))
            .ok_or_else(|| Error::IncompleteCase { case: id.clone(), missing: m.to_string() })?;
        let v = load_volume(&file)?;
        if v.channels() != 1 {
            return Err(Error::format(&file, "modality file must hold one channel"));
        }
        match geometry {
            None => geometry = Some((v.dims(), v.spacing)),
            Some((dims, _)) if dims != v.dims() => {
                return Err(Error::InconsistentGeometry(format!(
                    "{id}: {m} has dims {:?}, expected {dims:?}",
                    v.dims()
                )))
            }
            Some(_) => {}
        }
        channels.push(v.data.into_data());
    }
    let (dims, spacing) = geometry.expect("four modalities read");
    let data = Tensor::new(vec![4, dims[0], dims[1], dims[2]], channels.concat())?;
    Volume::new(data, spacing, id)
}

/// Loads image and labels from a case directory.
pub fn load_case(dir: &Path) -> Result<Case> {
    let image = load_case_image(dir)?;
    let id = image.case_id.clone();
    let seg = find_file(dir, &format!("{id}_seg"))
        .ok_or_else(|| Error::IncompleteCase { case: id.clone(), missing: "seg".into() })?;
    let mut labels = load_labelmap(&seg)?;
    if labels.dims != image.dims() {
        return Err(Error::InconsistentGeometry(format!(
            "{id}: labels {:?} vs image {:?}",
            labels.dims,
            image.dims()
        )));
    }
    labels.case_id = id;
    Ok(Case { image, labels })
}

/// Case subdirectories of `root`, sorted by name.
pub fn case_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    Ok(dirs)
}

pub fn load_dataset(root: &Path) -> Result<Dataset> {
    let cases = case_dirs(root)?.iter().map(|d| load_case(d)).collect::<Result<Vec<_>>>()?;
    Dataset::new(cases)
}

/// Writes a case directory under `root`, returning its path.
pub fn save_case(case: &Case, root: &Path, format: FileFormat) -> Result<PathBuf> {
    let id = case.id();
    let dir = root.join(id);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    match format {
        FileFormat::Nifti => {
            for (c, m) in MODALITIES.iter().enumerate() {
                let path = dir.join(format!("{id}_{m}.nii.gz"));
                nii::write_f32(&path, case.image.channel(c), case.image.dims(), case.image.spacing)?;
            }
            save_labelmap(&case.labels, &dir.join(format!("{id}_seg.nii.gz")))?;
        }
        FileFormat::Raw => {
            save_volume(&case.image, &dir.join(format!("{id}_image.f32")))?;
            save_labelmap(&case.labels, &dir.join(format!("{id}_seg.u8")))?;
        }
    }
    Ok(dir)
}
