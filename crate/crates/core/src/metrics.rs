//! Per-region Dice, HD95, sensitivity and specificity, and report files.
//!
//! HD95 uses surface voxels: foreground voxels with at least one of their
//! six face neighbours in the background or outside the array. Distances
//! from one surface to the other come from an exact Euclidean distance
//! transform, so the result equals an all-pairs search.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::{percentile, sorted};
use crate::volume_io::{labels_to_channels, LabelMap, REGIONS};

/// Reported when exactly one of the two masks is empty.
pub const HD95_EMPTY_SENTINEL: f64 = 373.1287;

fn same_len(a: &[bool], b: &[bool]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("mask sizes differ: {} vs {}", a.len(), b.len())));
    }
    Ok(())
}

/// `2|A ∩ B| / (|A| + |B|)`, and 1 when both masks are empty.
pub fn dice_score(a: &[bool], b: &[bool]) -> Result<f64> {
    same_len(a, b)?;
    let (mut inter, mut total) = (0usize, 0usize);
    for (&x, &y) in a.iter().zip(b) {
        inter += (x && y) as usize;
        total += x as usize + y as usize;
    }
    Ok(if total == 0 { 1.0 } else { 2.0 * inter as f64 / total as f64 })
}

/// `(TP / (TP + FN), TN / (TN + FP))`; a zero denominator gives `None`.
pub fn sensitivity_specificity(pred: &[bool], truth: &[bool]) -> Result<(Option<f64>, Option<f64>)> {
    same_len(pred, truth)?;
    let (mut tp, mut fn_, mut tn, mut fp) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &t) in pred.iter().zip(truth) {
        match (p, t) {
            (true, true) => tp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
            (true, false) => fp += 1,
        }
    }
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    Ok((ratio(tp, tp + fn_), ratio(tn, tn + fp)))
}

/// Surface voxels of a mask under 6-connectivity; the array edge counts as
/// background.
pub fn boundary(mask: &[bool], dims: [usize; 3]) -> Vec<bool> {
    let [d, h, w] = dims;
    let at = |z: usize, y: usize, x: usize| mask[(z * h + y) * w + x];
    let mut out = vec![false; mask.len()];
    for z in 0..d {
        for y in 0..h {
            for x in 0..w {
                if !at(z, y, x) {
                    continue;
                }
                let edge = z == 0 || y == 0 || x == 0 || z + 1 == d || y + 1 == h || x + 1 == w;
                out[(z * h + y) * w + x] = edge
                    || !at(z - 1, y, x)
                    || !at(z + 1, y, x)
                    || !at(z, y - 1, x)
                    || !at(z, y + 1, x)
                    || !at(z, y, x - 1)
                    || !at(z, y, x + 1);
            }
        }
    }
    out
}

/// One-dimensional squared distance transform of sampled function `f`
/// with sample spacing `s` (lower envelope of parabolas).
fn edt_1d(f: &[f64], s: f64, out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let s2 = s * s;
    let mut k = 0usize;
    let first = match f.iter().position(|x| x.is_finite()) {
        Some(i) => i,
        None => {
            out.fill(f64::INFINITY);
            return;
        }
    };
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in first + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            let p = v[k];
            let sq = ((f[q] + s2 * (q * q) as f64) - (f[p] + s2 * (p * p) as f64)) / (2.0 * s2 * (q - p) as f64);
            // z[0] is -inf, so k never underflows
            if sq <= z[k] {
                k -= 1;
                continue;
            }
            k += 1;
            v[k] = q;
            z[k] = sq;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let d = q as f64 - p as f64;
        *o = f[p] + s2 * d * d;
    }
}

/// Squared Euclidean distance (in mm²) from every voxel to the nearest
/// `true` voxel of `features`; infinite when there are none.
pub fn squared_distance_transform(features: &[bool], dims: [usize; 3], spacing: [f64; 3]) -> Vec<f64> {
    let mut g: Vec<f64> = features.iter().map(|&b| if b { 0.0 } else { f64::INFINITY }).collect();
    let strides = [dims[1] * dims[2], dims[2], 1];
    for axis in 0..3 {
        let n = dims[axis];
        let (mut line, mut out) = (vec![0.0; n], vec![0.0; n]);
        let (mut v, mut z) = (vec![0usize; n], vec![0.0; n + 1]);
        let others: Vec<usize> = (0..3).filter(|&a| a != axis).collect();
        for i in 0..dims[others[0]] {
            for j in 0..dims[others[1]] {
                let base = i * strides[others[0]] + j * strides[others[1]];
                for (t, l) in line.iter_mut().enumerate() {
                    *l = g[base + t * strides[axis]];
                }
                edt_1d(&line, spacing[axis], &mut out, &mut v, &mut z);
                for (t, o) in out.iter().enumerate() {
                    g[base + t * strides[axis]] = *o;
                }
            }
        }
    }
    g
}

fn directed_p95(from: &[bool], to_dist2: &[f64]) -> f64 {
    let d = sorted(from.iter().zip(to_dist2).filter(|(&b, _)| b).map(|(_, &d2)| d2.sqrt()));
    percentile(&d, 95.0)
}

/// Symmetric 95th-percentile surface distance in mm.
pub fn hd95(a: &[bool], b: &[bool], dims: [usize; 3], spacing: [f64; 3]) -> Result<f64> {
    same_len(a, b)?;
    if a.len() != dims.iter().product::<usize>() {
        return Err(Error::Shape(format!("mask length {} does not match dims {dims:?}", a.len())));
    }
    match (a.iter().any(|&x| x), b.iter().any(|&x| x)) {
        (false, false) => return Ok(0.0),
        (true, false) | (false, true) => return Ok(HD95_EMPTY_SENTINEL),
        _ => {}
    }
    let (ba, bb) = (boundary(a, dims), boundary(b, dims));
    let da = squared_distance_transform(&ba, dims, spacing);
    let db = squared_distance_transform(&bb, dims, spacing);
    Ok(directed_p95(&ba, &db).max(directed_p95(&bb, &da)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionMetrics {
    pub region: String,
    pub dice: f64,
    pub hd95: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub case_id: String,
    /// In ET, TC, WT order.
    pub regions: Vec<RegionMetrics>,
}

impl MetricsRecord {
    pub fn mean_dice(&self) -> f64 {
        self.regions.iter().map(|r| r.dice).sum::<f64>() / self.regions.len() as f64
    }
}

/// Binary masks of the three regions of a label map.
pub fn region_masks(lm: &LabelMap) -> Result<Vec<Vec<bool>>> {
    let rc = labels_to_channels(lm)?;
    let n = lm.data.len();
    Ok(rc.data.data().chunks(n).map(|c| c.iter().map(|&v| v == 1.0).collect()).collect())
}

pub fn evaluate_case(pred: &LabelMap, truth: &LabelMap, spacing: [f64; 3]) -> Result<MetricsRecord> {
    if pred.dims != truth.dims {
        return Err(Error::Shape(format!("prediction {:?} vs truth {:?}", pred.dims, truth.dims)));
    }
    let (pm, tm) = (region_masks(pred)?, region_masks(truth)?);
    let regions = REGIONS
        .iter()
        .zip(pm.iter().zip(&tm))
        .map(|(name, (p, t))| {
            let (sensitivity, specificity) = sensitivity_specificity(p, t)?;
            Ok(RegionMetrics {
                region: name.to_string(),
                dice: dice_score(p, t)?,
                hd95: hd95(p, t, truth.dims, spacing)?,
                sensitivity,
                specificity,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsRecord { case_id: truth.case_id.clone(), regions })
}

/// Order statistics of one metric of one region over the defined values.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub region: String,
    pub metric: String,
    pub mean: Option<f64>,
    pub min: Option<f64>,
    pub q1: Option<f64>,
    pub median: Option<f64>,
    pub q3: Option<f64>,
    pub max: Option<f64>,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportSummary {
    pub rows: Vec<SummaryRow>,
}

impl ReportSummary {
    pub fn get(&self, region: &str, metric: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.region == region && r.metric == metric)
    }
}

pub const METRICS: [&str; 4] = ["dice", "hd95", "sensitivity", "specificity"];

fn metric_value(r: &RegionMetrics, metric: &str) -> Option<f64> {
    match metric {
        "dice" => Some(r.dice),
        "hd95" => Some(r.hd95),
        "sensitivity" => r.sensitivity,
        "specificity" => r.specificity,
        _ => None,
    }
}

pub fn summarize(records: &[MetricsRecord]) -> Result<ReportSummary> {
    if records.is_empty() {
        return Err(Error::Shape("no records to aggregate".into()));
    }
    let mut rows = Vec::new();
    for region in REGIONS {
        for metric in METRICS {
            let vals = sorted(
                records
                    .iter()
                    .flat_map(|rec| rec.regions.iter().filter(|r| r.region == region))
                    .filter_map(|r| metric_value(r, metric)),
            );
            let n = vals.len();
            let stat = |p: f64| (n > 0).then(|| percentile(&vals, p));
            rows.push(SummaryRow {
                region: region.to_string(),
                metric: metric.to_string(),
                mean: (n > 0).then(|| vals.iter().sum::<f64>() / n as f64),
                min: stat(0.0),
                q1: stat(25.0),
                median: stat(50.0),
                q3: stat(75.0),
                max: stat(100.0),
                n,
            });
        }
    }
    Ok(ReportSummary { rows })
}

/// `out.csv` gets its summary beside it as `out_summary.csv`.
pub fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
    out.with_file_name(format!("{stem}_summary.csv"))
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

/// Writes the per-case CSV to `out` and the summary CSV beside it.
pub fn aggregate_report(records: &[MetricsRecord], out: &Path) -> Result<ReportSummary> {
    let summary = summarize(records)?;
    let mut w = csv::Writer::from_path(out).map_err(|e| csv_err(out, e))?;
    w.write_record(["case_id", "region", "dice", "hd95", "sensitivity", "specificity"]).map_err(|e| csv_err(out, e))?;
    for rec in records {
        for r in &rec.regions {
            w.write_record([
                rec.case_id.clone(),
                r.region.clone(),
                r.dice.to_string(),
                r.hd95.to_string(),
                cell(r.sensitivity),
                cell(r.specificity),
            ])
            .map_err(|e| csv_err(out, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(out, e))?;

    let spath = summary_path(out);
    let mut w = csv::Writer::from_path(&spath).map_err(|e| csv_err(&spath, e))?;
    w.write_record(["region", "metric", "mean", "min", "q1", "median", "q3", "max", "n"]).map_err(|e| csv_err(&spath, e))?;
    for r in &summary.rows {
        w.write_record([
            r.region.clone(),
            r.metric.clone(),
            cell(r.mean),
            cell(r.min),
            cell(r.q1),
            cell(r.median),
            cell(r.q3),
            cell(r.max),
            r.n.to_string(),
        ])
        .map_err(|e| csv_err(&spath, e))?;
    }
    w.flush().map_err(|e| Error::io(&spath, e))?;
    Ok(summary)
}
