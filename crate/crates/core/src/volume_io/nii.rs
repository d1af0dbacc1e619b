use std::path::Path;

use ndarray::Array3;
use nifti::writer::WriterOptions;
use nifti::{IntoNdArray, NiftiHeader, NiftiObject, ReaderOptions};

use crate::error::{Error, Result};

/// Reads a 3-D (or 4-D with a trailing singleton) NIfTI image as `f32`,
/// returning the samples in C order over (D, H, W), the dims and the spacing.
pub(super) fn read_f32(path: &Path) -> Result<(Vec<f32>, [usize; 3], [f64; 3])> {
    let obj = ReaderOptions::new().read_file(path).map_err(|e| Error::format(path, e))?;
    let px = obj.header().pixdim;
    let spacing = [px[1], px[2], px[3]].map(|v| if v > 0.0 { v as f64 } else { 1.0 });
    let arr = obj.into_volume().into_ndarray::<f32>().map_err(|e| Error::format(path, e))?;
    let shape = arr.shape().to_vec();
    let dims = match shape.as_slice() {
        [d, h, w] | [d, h, w, 1] => [*d, *h, *w],
        other => return Err(Error::format(path, format!("expected a 3-D image, got shape {other:?}"))),
    };
    // `iter` walks the logical index order whatever the memory layout is.
    Ok((arr.iter().copied().collect(), dims, spacing))
}

pub(super) fn read_u8(path: &Path) -> Result<(Vec<u8>, [usize; 3], [f64; 3])> {
    let (data, dims, spacing) = read_f32(path)?;
    let labels = data
        .into_iter()
        .map(|v| {
            if v.fract() == 0.0 && (0.0..=255.0).contains(&v) {
                Ok(v as u8)
            } else {
                Err(Error::format(path, format!("label value {v} is not an 8-bit integer")))
            }
        })
        .collect::<Result<Vec<u8>>>()?;
    Ok((labels, dims, spacing))
}

fn header(spacing: [f64; 3]) -> NiftiHeader {
    let mut h = NiftiHeader::default();
    for (i, s) in spacing.iter().enumerate() {
        h.pixdim[i + 1] = *s as f32;
    }
    h
}

pub(super) fn write_f32(path: &Path, data: &[f32], dims: [usize; 3], spacing: [f64; 3]) -> Result<()> {
    let arr = Array3::from_shape_vec((dims[0], dims[1], dims[2]), data.to_vec()).map_err(|e| Error::Shape(e.to_string()))?;
    let h = header(spacing);
    WriterOptions::new(path).reference_header(&h).write_nifti(&arr).map_err(|e| Error::format(path, e))
}

pub(super) fn write_u8(path: &Path, data: &[u8], dims: [usize; 3], spacing: [f64; 3]) -> Result<()> {
    let arr = Array3::from_shape_vec((dims[0], dims[1], dims[2]), data.to_vec()).map_err(|e| Error::Shape(e.to_string()))?;
    let h = header(spacing);
    WriterOptions::new(path).reference_header(&h).write_nifti(&arr).map_err(|e| Error::format(path, e))
}
