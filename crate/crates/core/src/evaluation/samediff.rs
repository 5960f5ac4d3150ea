use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::LabeledWord;
use crate::alignment::{dtw_distance, Metric};
use crate::error::{Error, Result};
use crate::features::FeatureSet;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SameDiffOptions {
    pub metric: Metric,
    /// Only score pairs spoken by different speakers.
    pub cross_speaker_only: bool,
    /// Drop words shorter than this many frames.
    pub min_frames: usize,
}

/// Stepwise precision-recall curve from a full threshold sweep.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    /// `(recall, precision)`, starting at `(0, 1)` and then one point per distinct threshold.
    pub points: Vec<(f64, f64)>,
}

impl PrCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("recall,precision\n");
        for (r, p) in &self.points {
            out.push_str(&format!("{r},{p}\n"));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_csv().as_bytes()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SameDiffReport {
    pub ap: f64,
    pub n_words: usize,
    pub n_pairs: usize,
    pub n_positive: usize,
    /// Whether any two pairs had exactly equal distances.
    pub ties: bool,
    pub pr_curve: PrCurve,
}

/// AP from pair distances and same-type labels.
///
/// Pairs are ranked by ascending distance (ties kept in input order). Each group of equal
/// distances is one threshold: precision at that threshold times the recall it adds,
/// summed over thresholds. Without ties this is the mean precision at each positive.
pub fn average_precision(distances: &[f64], positive: &[bool]) -> Result<(f64, PrCurve, bool)> {
    assert_eq!(distances.len(), positive.len());
    let total_pos = positive.iter().filter(|&&p| p).count();
    if total_pos == 0 {
        return Err(Error::invalid("same-different task has no same-type pairs"));
    }
    if distances.iter().any(|d| !d.is_finite()) {
        return Err(Error::Numeric("non-finite word distance".into()));
    }
    let mut order: Vec<usize> = (0..distances.len()).collect();
    order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]).then(a.cmp(&b)));

    let mut points = vec![(0.0, 1.0)];
    let (mut ap, mut tp, mut seen, mut ties) = (0.0, 0usize, 0usize, false);
    let mut k = 0;
    while k < order.len() {
        let d = distances[order[k]];
        let mut group_pos = 0;
        let start = k;
        while k < order.len() && distances[order[k]] == d {
            group_pos += usize::from(positive[order[k]]);
            k += 1;
        }
        ties |= k - start > 1;
        tp += group_pos;
        seen += k - start;
        let precision = tp as f64 / seen as f64;
        let recall = tp as f64 / total_pos as f64;
        ap += precision * group_pos as f64 / total_pos as f64;
        points.push((recall, precision));
    }
    Ok((ap, PrCurve { points }, ties))
}

/// Same-different AP over all word pairs, ranked by DTW distance.
pub fn same_different_ap(words: &[LabeledWord], features: &FeatureSet, options: &SameDiffOptions) -> Result<SameDiffReport> {
    let words: Vec<&LabeledWord> = words.iter().filter(|w| w.segment.num_frames() >= options.min_frames).collect();
    if words.len() < 2 {
        return Err(Error::invalid("same-different task needs at least two words"));
    }
    let mut segments = Vec::with_capacity(words.len());
    for w in &words {
        w.segment.validate(features)?;
        let seq = features.require(&w.segment.utterance_id)?;
        segments.push(seq.segment(w.segment.start_frame, w.segment.end_frame));
    }
    let mut index_pairs = Vec::new();
    for i in 0..words.len() {
        for j in i + 1..words.len() {
            if !options.cross_speaker_only || words[i].segment.speaker_id != words[j].segment.speaker_id {
                index_pairs.push((i, j));
            }
        }
    }
    let distances: Vec<f64> = index_pairs
        .par_iter()
        .map(|&(i, j)| dtw_distance(segments[i], segments[j], options.metric))
        .collect::<Result<_>>()?;
    let positive: Vec<bool> = index_pairs
        .iter()
        .map(|&(i, j)| words[i].gold_type == words[j].gold_type)
        .collect();
    let (ap, pr_curve, ties) = average_precision(&distances, &positive)?;
    Ok(SameDiffReport {
        ap,
        n_words: words.len(),
        n_pairs: index_pairs.len(),
        n_positive: positive.iter().filter(|&&p| p).count(),
        ties,
        pr_curve,
    })
}
