//! Twelve similarity and distance measures over block descriptors, all
//! reported on a common `[0, 1]` scale where 1 means identical.
//!
//! Distances are converted with `s = 1 - d / d_max`; correlations in
//! `[-1, 1]` are mapped with `s = (r + 1) / 2`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hog::{HogConfig, HogField};
use crate::layer_image::Frame;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimilarityError {
    #[error("vector length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("vectors need at least 2 entries, got {0}")]
    TooShort(usize),
    #[error("entry {index} is {value}; feature vectors must be finite and non-negative")]
    Domain { index: usize, value: f64 },
    #[error("descriptor grids differ: {0}")]
    GridMismatch(String),
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Cosine,
    SquaredL2,
    PearsonR,
    SpearmanRho,
    KendallTau,
    Jaccard,
    Dice,
    L1,
    Euclidean,
    Hellinger,
    Sorensen,
    Clark,
}

/// How a measure's raw output is brought onto the similarity scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricKind {
    Similarity,
    Correlation,
    Distance { d_max: f64 },
}

impl Metric {
    pub const ALL: [Metric; 12] = [
        Metric::Cosine,
        Metric::SquaredL2,
        Metric::PearsonR,
        Metric::SpearmanRho,
        Metric::KendallTau,
        Metric::Jaccard,
        Metric::Dice,
        Metric::L1,
        Metric::Euclidean,
        Metric::Hellinger,
        Metric::Sorensen,
        Metric::Clark,
    ];

    /// The seven measures carried forward to defect detection.
    pub const SELECTED: [Metric; 7] = [
        Metric::PearsonR,
        Metric::SpearmanRho,
        Metric::KendallTau,
        Metric::Cosine,
        Metric::Jaccard,
        Metric::Dice,
        Metric::Sorensen,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Cosine => "cosine",
            Metric::SquaredL2 => "squared_l2",
            Metric::PearsonR => "pearson_r",
            Metric::SpearmanRho => "spearman_rho",
            Metric::KendallTau => "kendall_tau",
            Metric::Jaccard => "jaccard",
            Metric::Dice => "dice",
            Metric::L1 => "l1",
            Metric::Euclidean => "euclidean",
            Metric::Hellinger => "hellinger",
            Metric::Sorensen => "sorensen",
            Metric::Clark => "clark",
        }
    }

    pub fn kind(self) -> MetricKind {
        match self {
            Metric::Cosine | Metric::Jaccard | Metric::Dice => MetricKind::Similarity,
            Metric::PearsonR | Metric::SpearmanRho | Metric::KendallTau => MetricKind::Correlation,
            Metric::SquaredL2 | Metric::L1 | Metric::Hellinger => MetricKind::Distance { d_max: 2.0 },
            Metric::Euclidean | Metric::Clark => MetricKind::Distance {
                d_max: std::f64::consts::SQRT_2,
            },
            Metric::Sorensen => MetricKind::Distance { d_max: 1.0 },
        }
    }

    /// Upper bound of the raw distance, for distance kinds.
    pub fn d_max(self) -> Option<f64> {
        match self.kind() {
            MetricKind::Distance { d_max } => Some(d_max),
            _ => None,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = SimilarityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| SimilarityError::UnknownMetric(s.to_owned()))
    }
}

fn validate(p: &[f64], q: &[f64]) -> Result<(), SimilarityError> {
    if p.len() != q.len() {
        return Err(SimilarityError::LengthMismatch(p.len(), q.len()));
    }
    if p.len() < 2 {
        return Err(SimilarityError::TooShort(p.len()));
    }
    for v in [p, q] {
        if let Some((index, &value)) = v.iter().enumerate().find(|(_, x)| !(**x >= 0.0) || !x.is_finite()) {
            return Err(SimilarityError::Domain { index, value });
        }
    }
    Ok(())
}

fn dot(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| a * b).sum()
}

fn sq_diff(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn abs_diff(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum()
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&x| x == v[0])
}

/// Raw distance `d(p, q)` for the six distance measures, `None` otherwise.
pub fn distance(p: &[f64], q: &[f64], m: Metric) -> Result<Option<f64>, SimilarityError> {
    validate(p, q)?;
    Ok(raw_distance(p, q, m))
}

fn raw_distance(p: &[f64], q: &[f64], m: Metric) -> Option<f64> {
    Some(match m {
        Metric::SquaredL2 => sq_diff(p, q),
        Metric::L1 => abs_diff(p, q),
        Metric::Euclidean => sq_diff(p, q).sqrt(),
        Metric::Hellinger => (2.0 * sq_diff(p, q)).sqrt(),
        Metric::Sorensen => {
            let denom: f64 = p.iter().zip(q).map(|(a, b)| a + b).sum();
            if denom == 0.0 {
                0.0
            } else {
                abs_diff(p, q) / denom
            }
        }
        Metric::Clark => p
            .iter()
            .zip(q)
            .map(|(a, b)| {
                let s = a + b;
                if s == 0.0 {
                    0.0
                } else {
                    let t = (a - b) / s;
                    t * t
                }
            })
            .sum::<f64>()
            .sqrt(),
        _ => return None,
    })
}

/// Raw correlation coefficient in `[-1, 1]` for the three rank/linear
/// correlation measures, `None` otherwise. Constant inputs yield `None` too.
pub fn correlation(p: &[f64], q: &[f64], m: Metric) -> Result<Option<f64>, SimilarityError> {
    validate(p, q)?;
    if is_constant(p) || is_constant(q) {
        return Ok(None);
    }
    Ok(match m {
        Metric::PearsonR => Some(pearson(p, q)),
        Metric::SpearmanRho => Some(pearson(&average_ranks(p), &average_ranks(q))),
        Metric::KendallTau => Some(kendall_tau_a(p, q)),
        _ => None,
    })
}

fn pearson(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len() as f64;
    let mp = p.iter().sum::<f64>() / n;
    let mq = q.iter().sum::<f64>() / n;
    let (mut num, mut vp, mut vq) = (0.0, 0.0, 0.0);
    for (a, b) in p.iter().zip(q) {
        let (da, db) = (a - mp, b - mq);
        num += da * db;
        vp += da * da;
        vq += db * db;
    }
    num / (vp.sqrt() * vq.sqrt())
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && v[idx[j]] == v[idx[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

fn tie_pairs<T: PartialEq>(sorted: &[T]) -> i64 {
    let mut total = 0i64;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as i64;
        total += t * (t - 1) / 2;
        i = j;
    }
    total
}

/// Counts strict inversions while merge-sorting `v` in place.
fn merge_count(v: &mut [f64], buf: &mut Vec<f64>) -> i64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid], buf) + merge_count(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            swaps += (mid - i) as i64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Kendall's tau-a, `(N_c - N_d) / (n (n - 1) / 2)`, in O(n log n).
/// Pairs tied in either vector count as neither concordant nor discordant.
pub fn kendall_tau_a(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(q[a].total_cmp(&q[b])));
    let ps: Vec<f64> = idx.iter().map(|&i| p[i]).collect();
    let pairs: Vec<(f64, f64)> = idx.iter().map(|&i| (p[i], q[i])).collect();
    let n1 = tie_pairs(&ps);
    let n3 = tie_pairs(&pairs);
    let mut qs: Vec<f64> = idx.iter().map(|&i| q[i]).collect();
    let swaps = merge_count(&mut qs, &mut Vec::with_capacity(n));
    let n2 = tie_pairs(&qs);
    let n0 = (n * (n - 1) / 2) as i64;
    let s = n0 - n1 - n2 + n3 - 2 * swaps;
    s as f64 / n0 as f64
}

/// Similarity of two feature vectors on the `[0, 1]` scale.
///
/// Identical vectors score 1, including two all-zero vectors; exactly one
/// all-zero vector is a complete mismatch (0). For the correlation measures
/// the same rule applies to constant vectors. Kendall's tau-a of a vector
/// with ties against itself is below 1, so identity is checked first.
pub fn similarity(p: &[f64], q: &[f64], m: Metric) -> Result<f64, SimilarityError> {
    validate(p, q)?;
    Ok(similarity_unchecked(p, q, m))
}

fn similarity_unchecked(p: &[f64], q: &[f64], m: Metric) -> f64 {
    let pz = p.iter().all(|&x| x == 0.0);
    let qz = q.iter().all(|&x| x == 0.0);
    if (pz && qz) || p == q {
        return 1.0;
    }
    if pz || qz {
        return 0.0;
    }
    let s = match m.kind() {
        MetricKind::Similarity => {
            let pq = dot(p, q);
            let (pp, qq) = (dot(p, p), dot(q, q));
            match m {
                Metric::Cosine => pq / (pp * qq).sqrt(),
                Metric::Jaccard => pq / (pp + qq - pq),
                Metric::Dice => 2.0 * pq / (pp + qq),
                _ => unreachable!(),
            }
        }
        MetricKind::Correlation => {
            let (pc, qc) = (is_constant(p), is_constant(q));
            if pc && qc {
                return 1.0;
            }
            if pc || qc {
                return 0.0;
            }
            let r = match m {
                Metric::PearsonR => pearson(p, q),
                Metric::SpearmanRho => pearson(&average_ranks(p), &average_ranks(q)),
                Metric::KendallTau => kendall_tau_a(p, q),
                _ => unreachable!(),
            };
            (r + 1.0) / 2.0
        }
        MetricKind::Distance { d_max } => {
            let d = raw_distance(p, q, m).expect("distance kind");
            1.0 - d / d_max
        }
    };
    // l1 and clark can exceed their nominal d_max on 36-bin blocks
    debug_assert!(
        matches!(m, Metric::L1 | Metric::Clark) || (-1e-9..=1.0 + 1e-9).contains(&s),
        "{m} out of range: {s}"
    );
    s.clamp(0.0, 1.0)
}

/// Grid placement needed to turn block indices into world rectangles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockGeometry {
    pub config: HogConfig,
    pub frame: Frame,
}

impl BlockGeometry {
    /// World rectangle `[x0, y0, x1, y1]` (mm, `x0 < x1`, `y0 < y1`) of a block.
    pub fn block_rect_mm(&self, row: usize, col: usize) -> [f64; 4] {
        let (x0, y0, x1, y1) = crate::hog::block_pixel_rect(&self.config, row, col);
        let a = self.frame.pixel_to_world([x0 as f64, y0 as f64]);
        let b = self.frame.pixel_to_world([x1 as f64, y1 as f64]);
        [a[0].min(b[0]), a[1].min(b[1]), a[0].max(b[0]), a[1].max(b[1])]
    }
}

/// Per-block similarity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMap {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
    pub metric: Metric,
    pub geometry: Option<BlockGeometry>,
}

impl SimilarityMap {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>, valid: Vec<bool>, metric: Metric) -> Self {
        assert_eq!(values.len(), rows * cols);
        assert_eq!(valid.len(), rows * cols);
        Self {
            rows,
            cols,
            values,
            valid,
            metric,
            geometry: None,
        }
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let i = row * self.cols + col;
        self.valid[i].then(|| self.values[i])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn valid_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values
            .iter()
            .zip(&self.valid)
            .filter(|(_, &ok)| ok)
            .map(|(&v, _)| v)
    }
}

/// Element-wise similarity of corresponding blocks.
///
/// An entry is valid when both blocks have full pixel support. Blocks without
/// gradient energy stay in play: two empty blocks match, one empty block
/// against a textured one is a mismatch.
pub fn similarity_map(real: &HogField, reference: &HogField, m: Metric) -> Result<SimilarityMap, SimilarityError> {
    if real.grid_dims() != reference.grid_dims() {
        return Err(SimilarityError::GridMismatch(format!(
            "{:?} vs {:?}",
            real.grid_dims(),
            reference.grid_dims()
        )));
    }
    if real.config != reference.config {
        return Err(SimilarityError::GridMismatch("HOG configs differ".into()));
    }
    let (rows, cols) = real.grid_dims();
    let mut values = vec![0.0; rows * cols];
    let mut valid = vec![false; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            if real.has_support(r, c) && reference.has_support(r, c) {
                let i = r * cols + c;
                values[i] = similarity_unchecked(real.block(r, c), reference.block(r, c), m);
                valid[i] = true;
            }
        }
    }
    let mut map = SimilarityMap::new(rows, cols, values, valid, m);
    map.geometry = reference.frame.or(real.frame).map(|frame| BlockGeometry {
        config: reference.config,
        frame,
    });
    Ok(map)
}

/// One qualitative comparison case for the metric response table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseCase {
    pub name: String,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

/// Similarities of every metric for every case.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseTable {
    pub metrics: Vec<Metric>,
    /// `(case name, one similarity per metric)`.
    pub rows: Vec<(String, Vec<f64>)>,
}

impl ResponseTable {
    pub fn value(&self, case: &str, metric: Metric) -> Option<f64> {
        let col = self.metrics.iter().position(|&m| m == metric)?;
        self.rows.iter().find(|(n, _)| n == case).map(|(_, v)| v[col])
    }

    /// One row per case, one column per metric, percentages with 2 decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("case");
        for m in &self.metrics {
            out.push(',');
            out.push_str(m.as_str());
        }
        out.push('\n');
        for (name, vals) in &self.rows {
            out.push_str(name);
            for v in vals {
                out.push_str(&format!(",{:.2}", v * 100.0));
            }
            out.push('\n');
        }
        out
    }
}

pub fn metric_response_profile(cases: &[ResponseCase]) -> Result<ResponseTable, SimilarityError> {
    let mut rows = Vec::with_capacity(cases.len());
    for case in cases {
        let vals = Metric::ALL
            .iter()
            .map(|&m| similarity(&case.p, &case.q, m))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push((case.name.clone(), vals));
    }
    Ok(ResponseTable {
        metrics: Metric::ALL.to_vec(),
        rows,
    })
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = dot(v, v).sqrt();
    v.iter().map(|x| x / n).collect()
}

/// The five 9-bin comparison cases: complete match, small deviations, level
/// differences, significant shifts and non-overlapping histograms.
pub fn standard_response_cases() -> Vec<ResponseCase> {
    let base = [1.0, 3.0, 7.0, 4.0, 2.0, 1.0, 0.5, 0.5, 1.0];
    let p = unit(&base);
    let jitter = [0.2, -0.3, 0.4, -0.2, 0.1, 0.3, -0.1, 0.2, -0.2];
    let small: Vec<f64> = base.iter().zip(jitter).map(|(b, j)| b + j).collect();
    let mut level = base;
    level[5] *= 4.0;
    let shifted: Vec<f64> = (0..9).map(|i| base[(i + 6) % 9]).collect();
    let left = [4.0, 6.0, 3.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let right = [0.0, 0.0, 0.0, 0.0, 0.0, 2.0, 5.0, 4.0, 1.0];
    let case = |name: &str, p: Vec<f64>, q: Vec<f64>| ResponseCase {
        name: name.to_owned(),
        p,
        q,
    };
    vec![
        case("complete_match", p.clone(), p.clone()),
        case("small_deviations", p.clone(), unit(&small)),
        case("level_differences", p.clone(), unit(&level)),
        case("significant_shifts", p.clone(), unit(&shifted)),
        case("non_overlapping", unit(&left), unit(&right)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(i: usize, k: usize) -> Vec<f64> {
        let mut v = vec![0.0; k];
        v[i] = 1.0;
        v
    }

    #[test]
    fn names_roundtrip() {
        for m in Metric::ALL {
            assert_eq!(m.as_str().parse::<Metric>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.as_str()));
        }
        assert!("cosinus".parse::<Metric>().is_err());
    }

    #[test]
    fn d_max_table() {
        let expect = [
            (Metric::SquaredL2, 2.0),
            (Metric::L1, 2.0),
            (Metric::Euclidean, 2f64.sqrt()),
            (Metric::Hellinger, 2.0),
            (Metric::Sorensen, 1.0),
            (Metric::Clark, 2f64.sqrt()),
        ];
        for (m, d) in expect {
            assert_eq!(m.d_max(), Some(d));
        }
        assert_eq!(Metric::ALL.iter().filter(|m| m.d_max().is_some()).count(), 6);
    }

    #[test]
    fn reflexive() {
        let p = unit(&[0.1, 0.5, 0.0, 0.3, 0.9, 0.0, 0.2, 0.4, 0.0]);
        for m in Metric::ALL {
            assert!((similarity(&p, &p, m).unwrap() - 1.0).abs() < 1e-12, "{m}");
        }
        assert!(kendall_tau_a(&p, &p) < 1.0);
    }

    #[test]
    fn disjoint_basis_vectors() {
        let (p, q) = (e(0, 9), e(1, 9));
        for m in [Metric::Cosine, Metric::Jaccard, Metric::Dice, Metric::SquaredL2, Metric::L1, Metric::Euclidean, Metric::Sorensen] {
            assert_eq!(similarity(&p, &q, m).unwrap(), 0.0, "{m}");
        }
        assert_eq!(distance(&p, &q, Metric::SquaredL2).unwrap(), Some(2.0));
        assert_eq!(distance(&p, &q, Metric::L1).unwrap(), Some(2.0));
        assert_eq!(distance(&p, &q, Metric::Euclidean).unwrap(), Some(2f64.sqrt()));
        assert_eq!(distance(&p, &q, Metric::Sorensen).unwrap(), Some(1.0));
    }

    /// O(n²) pair enumeration.
    fn kendall_pairs(p: &[f64], q: &[f64]) -> (i64, i64) {
        let (mut nc, mut nd) = (0, 0);
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                let s = (p[i] - p[j]) * (q[i] - q[j]);
                if s > 0.0 {
                    nc += 1;
                } else if s < 0.0 {
                    nd += 1;
                }
            }
        }
        (nc, nd)
    }

    #[test]
    fn kendall_reversed() {
        let p = [1.0, 2.0, 3.0];
        let q = [3.0, 2.0, 1.0];
        assert_eq!(kendall_pairs(&p, &q), (0, 3));
        assert_eq!(kendall_tau_a(&p, &q), -1.0);
        assert_eq!(similarity(&p, &q, Metric::KendallTau).unwrap(), 0.0);
    }

    #[test]
    fn kendall_with_ties() {
        let p = [0.0, 0.0, 1.0, 2.0, 2.0, 0.5];
        let q = [1.0, 0.0, 0.0, 3.0, 3.0, 0.5];
        let (nc, nd) = kendall_pairs(&p, &q);
        assert_eq!(kendall_tau_a(&p, &q), (nc - nd) as f64 / 15.0);
    }

    #[test]
    fn average_ranks_share_ties() {
        assert_eq!(average_ranks(&[0.0, 3.0, 0.0, 1.0]), vec![1.5, 4.0, 1.5, 3.0]);
    }

    #[test]
    fn sorensen_formula() {
        let p = [0.6, 0.8, 0.0];
        let q = [0.0, 0.6, 0.8];
        let d = (0.6 + 0.2 + 0.8) / (0.6 + 1.4 + 0.8);
        assert!((distance(&p, &q, Metric::Sorensen).unwrap().unwrap() - d).abs() < 1e-15);
    }

    #[test]
    fn clark_zero_terms_and_clamp() {
        let p = [0.0, 0.6, 0.8];
        assert_eq!(distance(&p, &p, Metric::Clark).unwrap(), Some(0.0));
        let (a, b) = (e(0, 9), e(1, 9));
        assert_eq!(distance(&a, &b, Metric::Clark).unwrap(), Some(2f64.sqrt()));
        let c = unit(&[1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let d = unit(&[0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
        assert!(distance(&c, &d, Metric::Clark).unwrap().unwrap() > 2f64.sqrt());
        assert_eq!(similarity(&c, &d, Metric::Clark).unwrap(), 0.0);
    }

    #[test]
    fn hellinger_is_scaled_euclidean() {
        let p = unit(&[1.0, 2.0, 0.0, 1.0]);
        let q = unit(&[0.0, 2.0, 1.0, 1.0]);
        let h = distance(&p, &q, Metric::Hellinger).unwrap().unwrap();
        let eu = distance(&p, &q, Metric::Euclidean).unwrap().unwrap();
        assert!((h - 2f64.sqrt() * eu).abs() < 1e-15);
    }

    #[test]
    fn degenerate_vectors() {
        let z = vec![0.0; 9];
        let p = unit(&[1.0, 2.0, 3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let c = vec![1.0 / 3.0; 9];
        for m in Metric::ALL {
            assert_eq!(similarity(&z, &z, m).unwrap(), 1.0);
            assert_eq!(similarity(&z, &p, m).unwrap(), 0.0);
            assert_eq!(similarity(&p, &z, m).unwrap(), 0.0);
        }
        for m in [Metric::PearsonR, Metric::SpearmanRho, Metric::KendallTau] {
            assert_eq!(similarity(&c, &c, m).unwrap(), 1.0);
            assert_eq!(similarity(&c, &p, m).unwrap(), 0.0);
        }
    }

    #[test]
    fn input_errors() {
        assert_eq!(
            similarity(&[1.0, 0.0], &[1.0, 0.0, 0.0], Metric::Cosine),
            Err(SimilarityError::LengthMismatch(2, 3))
        );
        assert!(matches!(
            similarity(&[1.0, -0.1], &[1.0, 0.0], Metric::Cosine),
            Err(SimilarityError::Domain { index: 1, .. })
        ));
        assert!(matches!(
            similarity(&[f64::NAN, 0.0], &[1.0, 0.0], Metric::Cosine),
            Err(SimilarityError::Domain { .. })
        ));
        assert_eq!(similarity(&[1.0], &[1.0], Metric::Cosine), Err(SimilarityError::TooShort(1)));
    }

    #[test]
    fn standard_profile_shape() {
        let table = metric_response_profile(&standard_response_cases()).unwrap();
        for m in Metric::ALL {
            assert_eq!(table.value("complete_match", m), Some(1.0), "{m}");
        }
        for m in [Metric::Cosine, Metric::Jaccard, Metric::Dice] {
            assert_eq!(table.value("non_overlapping", m), Some(0.0), "{m}");
        }
        let j = table.value("level_differences", Metric::Jaccard).unwrap();
        let direct_j = similarity(&standard_response_cases()[2].p, &standard_response_cases()[2].q, Metric::Jaccard).unwrap();
        assert_eq!(j, direct_j);
        assert!(table.value("level_differences", Metric::PearsonR).unwrap() > j);
        assert!(table.value("level_differences", Metric::SpearmanRho).unwrap() > j);
        let csv = table.to_csv();
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("case,cosine,squared_l2,pearson_r"));
        assert!(lines.next().unwrap().starts_with("complete_match,100.00,100.00"));
        assert_eq!(csv.lines().count(), 6);
    }
}
