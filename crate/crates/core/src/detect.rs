//! Thresholding of similarity maps into anomalous-area ratios and defect
//! regions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hog::{compute_hog, HogConfig, HogError, HogField};
use crate::layer_image::{apply_mask, ImageError, LayerImage, RegionMask};
use crate::similarity::{similarity_map, Metric, SimilarityError, SimilarityMap};

pub const DEFAULT_THRESHOLD: f64 = 0.70;

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("similarity map has no valid entries")]
    EmptyRegion,
    #[error("threshold must lie in (0, 1), got {0}")]
    BadThreshold(f64),
    #[error("reports are not comparable: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Hog(#[from] HogError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
}

fn check_threshold(t: f64) -> Result<(), DetectError> {
    if t > 0.0 && t < 1.0 {
        Ok(())
    } else {
        Err(DetectError::BadThreshold(t))
    }
}

/// Percentage of valid blocks whose similarity is at or below `threshold`.
/// Invalid blocks count toward neither the numerator nor the printed area.
pub fn anomaly_ratio(map: &SimilarityMap, threshold: f64) -> Result<f64, DetectError> {
    check_threshold(threshold)?;
    let total = map.valid_count();
    if total == 0 {
        return Err(DetectError::EmptyRegion);
    }
    let below = map.valid_values().filter(|&v| v <= threshold).count();
    Ok(100.0 * below as f64 / total as f64)
}

/// An 8-connected group of below-threshold blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectRegion {
    /// `(row, col)` grid cells in row-major order.
    pub blocks: Vec<(usize, usize)>,
    /// `[x0, y0, x1, y1]` in world mm; absent when the map has no frame.
    pub bbox_mm: Option<[f64; 4]>,
    pub mean_similarity: f64,
}

impl DefectRegion {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn intersects(&self, rect: [f64; 4]) -> bool {
        self.bbox_mm
            .is_some_and(|b| b[0] <= rect[2] && rect[0] <= b[2] && b[1] <= rect[3] && rect[1] <= b[3])
    }
}

/// Connected components of valid below-threshold blocks, largest first.
pub fn segment_regions(map: &SimilarityMap, threshold: f64, min_blocks: usize) -> Vec<DefectRegion> {
    let (rows, cols) = (map.rows, map.cols);
    let hot: Vec<bool> = (0..rows * cols)
        .map(|i| map.valid[i] && map.values[i] <= threshold)
        .collect();
    let mut seen = vec![false; hot.len()];
    let mut regions = Vec::new();
    let mut stack = Vec::new();
    for start in 0..hot.len() {
        if !hot[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut members = Vec::new();
        while let Some(i) = stack.pop() {
            members.push(i);
            let (r, c) = ((i / cols) as isize, (i % cols) as isize);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (nr, nc) = (r + dr, c + dc);
                    if nr < 0 || nc < 0 || nr >= rows as isize || nc >= cols as isize {
                        continue;
                    }
                    let j = nr as usize * cols + nc as usize;
                    if hot[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        if members.len() < min_blocks.max(1) {
            continue;
        }
        members.sort_unstable();
        let mean = members.iter().map(|&i| map.values[i]).sum::<f64>() / members.len() as f64;
        let blocks: Vec<(usize, usize)> = members.iter().map(|&i| (i / cols, i % cols)).collect();
        let bbox_mm = map.geometry.map(|g| {
            blocks.iter().fold([f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY], |acc, &(r, c)| {
                let b = g.block_rect_mm(r, c);
                [acc[0].min(b[0]), acc[1].min(b[1]), acc[2].max(b[2]), acc[3].max(b[3])]
            })
        });
        regions.push(DefectRegion {
            blocks,
            bbox_mm,
            mean_similarity: mean,
        });
    }
    regions.sort_by(|a, b| b.len().cmp(&a.len()).then(a.blocks[0].cmp(&b.blocks[0])));
    regions
}

/// Result of comparing one layer against its reference with one metric.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyReport {
    pub layer_index: usize,
    pub metric: Metric,
    pub threshold: f64,
    pub anomaly_ratio_pct: f64,
    pub regions: Vec<DefectRegion>,
    pub map: SimilarityMap,
    /// Printed area measured in valid blocks.
    pub printed_area_blocks: usize,
}

/// On-disk form of an [`AnomalyReport`]; the similarity map itself is
/// referenced through `map_png`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub layer: usize,
    pub metric: Metric,
    pub threshold: f64,
    pub anomaly_ratio_pct: f64,
    pub printed_area_blocks: usize,
    pub regions: Vec<DefectRegion>,
    pub map_png: Option<String>,
}

impl AnomalyReport {
    pub fn from_map(map: SimilarityMap, layer_index: usize, threshold: f64, min_blocks: usize) -> Result<Self, DetectError> {
        let anomaly_ratio_pct = anomaly_ratio(&map, threshold)?;
        let regions = segment_regions(&map, threshold, min_blocks);
        Ok(Self {
            layer_index,
            metric: map.metric,
            threshold,
            anomaly_ratio_pct,
            regions,
            printed_area_blocks: map.valid_count(),
            map,
        })
    }

    pub fn to_json(&self, map_png: Option<String>) -> ReportJson {
        ReportJson {
            layer: self.layer_index,
            metric: self.metric,
            threshold: self.threshold,
            anomaly_ratio_pct: self.anomaly_ratio_pct,
            printed_area_blocks: self.printed_area_blocks,
            regions: self.regions.clone(),
            map_png,
        }
    }
}

/// Failed minus regular anomaly ratio, in percentage points. Negative values
/// are kept: they mean the metric flags the good print more than the bad one.
pub fn discriminative_power(regular: &AnomalyReport, failed: &AnomalyReport) -> Result<f64, DetectError> {
    if regular.metric != failed.metric {
        return Err(DetectError::Mismatch(format!("metric {} vs {}", regular.metric, failed.metric)));
    }
    if regular.threshold != failed.threshold {
        return Err(DetectError::Mismatch(format!(
            "threshold {} vs {}",
            regular.threshold, failed.threshold
        )));
    }
    Ok(failed.anomaly_ratio_pct - regular.anomaly_ratio_pct)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectParams {
    pub hog: HogConfig,
    pub threshold: f64,
    pub min_blocks: usize,
    pub layer_index: usize,
}

impl Default for DetectParams {
    fn default() -> Self {
        Self {
            hog: HogConfig::default(),
            threshold: DEFAULT_THRESHOLD,
            min_blocks: 1,
            layer_index: 0,
        }
    }
}

/// Masks both top views, describes them with HOG and scores them with `metric`.
pub fn analyze_layer(
    real: &LayerImage,
    reference: &LayerImage,
    mask: &RegionMask,
    metric: Metric,
    params: &DetectParams,
) -> Result<AnomalyReport, DetectError> {
    let mut reports = analyze_layer_metrics(real, reference, mask, &[metric], params)?;
    Ok(reports.remove(0))
}

/// Like [`analyze_layer`] for several metrics, sharing the descriptor pass.
pub fn analyze_layer_metrics(
    real: &LayerImage,
    reference: &LayerImage,
    mask: &RegionMask,
    metrics: &[Metric],
    params: &DetectParams,
) -> Result<Vec<AnomalyReport>, DetectError> {
    let pair = DescriptorPair::new(real, reference, mask, &params.hog)?;
    metrics
        .iter()
        .map(|&m| pair.report(m, params.threshold, params.min_blocks, params.layer_index))
        .collect()
}

/// HOG fields of a masked captured view and its reference, ready to be
/// scored with any number of metrics and thresholds.
#[derive(Debug, Clone)]
pub struct DescriptorPair {
    pub real: HogField,
    pub reference: HogField,
}

impl DescriptorPair {
    pub fn new(real: &LayerImage, reference: &LayerImage, mask: &RegionMask, hog: &HogConfig) -> Result<Self, DetectError> {
        if !real.frame.same_grid(&reference.frame) {
            return Err(ImageError::FrameMismatch("captured and reference views differ".into()).into());
        }
        Ok(Self {
            real: compute_hog(&apply_mask(real, mask)?, hog)?,
            reference: compute_hog(&apply_mask(reference, mask)?, hog)?,
        })
    }

    pub fn report(&self, metric: Metric, threshold: f64, min_blocks: usize, layer_index: usize) -> Result<AnomalyReport, DetectError> {
        check_threshold(threshold)?;
        let map = similarity_map(&self.real, &self.reference, metric)?;
        AnomalyReport::from_map(map, layer_index, threshold, min_blocks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(rows: usize, cols: usize, values: Vec<f64>) -> SimilarityMap {
        SimilarityMap::new(rows, cols, values, vec![true; rows * cols], Metric::Cosine)
    }

    #[test]
    fn ratio_extremes() {
        assert_eq!(anomaly_ratio(&map(2, 2, vec![1.0; 4]), 0.7).unwrap(), 0.0);
        assert_eq!(anomaly_ratio(&map(2, 2, vec![0.5; 4]), 0.7).unwrap(), 100.0);
    }

    #[test]
    fn twelve_block_count() {
        let mut v = vec![0.9; 12];
        v[1] = 0.6;
        v[5] = 0.6;
        v[10] = 0.6;
        assert_eq!(anomaly_ratio(&map(3, 4, v), 0.7).unwrap(), 25.0);
    }

    #[test]
    fn boundary_counts_as_anomalous() {
        assert_eq!(anomaly_ratio(&map(1, 2, vec![0.7, 0.9]), 0.7).unwrap(), 50.0);
    }

    #[test]
    fn invalid_entries_ignored() {
        let m = SimilarityMap::new(1, 4, vec![0.1, 0.1, 0.9, 0.9], vec![false, true, true, true], Metric::Dice);
        assert!((anomaly_ratio(&m, 0.7).unwrap() - 100.0 / 3.0).abs() < 1e-12);
        let none = SimilarityMap::new(1, 2, vec![0.0; 2], vec![false; 2], Metric::Dice);
        assert!(matches!(anomaly_ratio(&none, 0.7), Err(DetectError::EmptyRegion)));
        assert!(matches!(anomaly_ratio(&m, 1.0), Err(DetectError::BadThreshold(_))));
    }

    #[test]
    fn patch_is_one_region() {
        let mut v = vec![1.0; 36];
        for r in 2..5 {
            for c in 1..4 {
                v[r * 6 + c] = 0.2;
            }
        }
        let regions = segment_regions(&map(6, 6, v), 0.7, 1);
        assert_eq!(regions.len(), 1);
        assert_eq!(regions[0].len(), 9);
        assert_eq!(regions[0].blocks[0], (2, 1));
        assert!((regions[0].mean_similarity - 0.2).abs() < 1e-12);
    }

    #[test]
    fn diagonal_neighbours_merge() {
        let v = vec![0.1, 1.0, 1.0, 0.1];
        assert_eq!(segment_regions(&map(2, 2, v), 0.7, 1).len(), 1);
    }

    #[test]
    fn min_blocks_filters_and_sorting() {
        let v = vec![
            0.1, 1.0, 1.0, 1.0, 0.1, //
            1.0, 1.0, 1.0, 1.0, 0.1, //
            1.0, 1.0, 1.0, 1.0, 0.1,
        ];
        let all = segment_regions(&map(3, 5, v.clone()), 0.7, 1);
        assert_eq!(all.iter().map(|r| r.len()).collect::<Vec<_>>(), vec![3, 1]);
        assert_eq!(segment_regions(&map(3, 5, v), 0.7, 2).len(), 1);
        assert!(segment_regions(&map(1, 3, vec![1.0; 3]), 0.7, 1).is_empty());
    }

    fn report(metric: Metric, pct: f64) -> AnomalyReport {
        AnomalyReport {
            layer_index: 0,
            metric,
            threshold: 0.7,
            anomaly_ratio_pct: pct,
            regions: vec![],
            map: map(1, 2, vec![1.0; 2]),
            printed_area_blocks: 2,
        }
    }

    #[test]
    fn power_is_signed_difference() {
        let r = report(Metric::Cosine, 2.0);
        assert_eq!(discriminative_power(&r, &r).unwrap(), 0.0);
        assert_eq!(discriminative_power(&r, &report(Metric::Cosine, 40.0)).unwrap(), 38.0);
        assert_eq!(discriminative_power(&report(Metric::Cosine, 40.0), &r).unwrap(), -38.0);
        assert!(discriminative_power(&r, &report(Metric::Dice, 40.0)).is_err());
    }

    #[test]
    fn report_json_shape() {
        let j = serde_json::to_value(report(Metric::KendallTau, 5.0).to_json(Some("heat.png".into()))).unwrap();
        for key in ["layer", "metric", "threshold", "anomaly_ratio_pct", "printed_area_blocks", "regions", "map_png"] {
            assert!(j.get(key).is_some(), "{key}");
        }
        assert_eq!(j["metric"], "kendall_tau");
    }
}
