use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AbxItem;
use crate::alignment::{dtw_distance, Metric};
use crate::error::{Error, Result};
use crate::features::FeatureSet;

/// One `(A label, B label, A/B speaker, X speaker)` configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbxCell {
    pub label_a: String,
    pub label_b: String,
    pub speaker_ab: String,
    pub speaker_x: String,
    pub accuracy: f64,
    pub n_triples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbxReport {
    /// One minus the macro-average of cell accuracies.
    pub error: f64,
    pub n_triples: usize,
    pub cells: Vec<AbxCell>,
}

/// Cross-speaker minimal-pair ABX error.
///
/// For every ordered pair of labels differing only in the middle phone, every speaker
/// providing exemplars of both, and every other speaker providing exemplars of the A label,
/// each `(A, B, X)` triple scores 1 when `d(A, X) < d(B, X)`, 0.5 on a tie and 0 otherwise.
pub fn abx_error(items: &[AbxItem], features: &FeatureSet, metric: Metric) -> Result<AbxReport> {
    let mut phones = Vec::with_capacity(items.len());
    for item in items {
        item.segment.validate(features)?;
        phones.push(item.phones().ok_or_else(|| {
            Error::invalid(format!("'{}' is not a left-middle-right triphone label", item.triphone_label))
        })?);
    }
    // label -> speaker -> item indices
    let mut by_label: BTreeMap<&str, BTreeMap<&str, Vec<usize>>> = BTreeMap::new();
    for (i, item) in items.iter().enumerate() {
        by_label
            .entry(item.triphone_label.as_str())
            .or_default()
            .entry(item.speaker_id.as_str())
            .or_default()
            .push(i);
    }
    let labels: Vec<&str> = by_label.keys().copied().collect();
    let label_phones: HashMap<&str, [&str; 3]> = items
        .iter()
        .zip(&phones)
        .map(|(it, p)| (it.triphone_label.as_str(), *p))
        .collect();

    struct CellSpec<'a> {
        label_a: &'a str,
        label_b: &'a str,
        speaker_ab: &'a str,
        speaker_x: &'a str,
    }
    let mut specs = Vec::new();
    for &la in &labels {
        for &lb in &labels {
            let (pa, pb) = (label_phones[la], label_phones[lb]);
            if la == lb || pa[0] != pb[0] || pa[2] != pb[2] || pa[1] == pb[1] {
                continue;
            }
            for &s in by_label[la].keys() {
                if !by_label[lb].contains_key(s) {
                    continue;
                }
                for &sx in by_label[la].keys() {
                    if sx != s {
                        specs.push(CellSpec {
                            label_a: la,
                            label_b: lb,
                            speaker_ab: s,
                            speaker_x: sx,
                        });
                    }
                }
            }
        }
    }
    if specs.is_empty() {
        return Err(Error::invalid(
            "no valid ABX cells: need minimal pairs from one speaker and an X from another speaker",
        ));
    }

    let mut needed: Vec<(usize, usize)> = Vec::new();
    for c in &specs {
        for &x in &by_label[c.label_a][c.speaker_x] {
            for &a in by_label[c.label_a][c.speaker_ab].iter().chain(&by_label[c.label_b][c.speaker_ab]) {
                needed.push((a.min(x), a.max(x)));
            }
        }
    }
    needed.sort_unstable();
    needed.dedup();
    let segment = |i: usize| -> Result<_> {
        let seg = &items[i].segment;
        Ok(features.require(&seg.utterance_id)?.segment(seg.start_frame, seg.end_frame))
    };
    let values: Vec<f64> = needed
        .par_iter()
        .map(|&(i, j)| dtw_distance(segment(i)?, segment(j)?, metric))
        .collect::<Result<_>>()?;
    let dist: HashMap<(usize, usize), f64> = needed.into_iter().zip(values).collect();
    let d = |i: usize, j: usize| dist[&(i.min(j), i.max(j))];

    let mut cells = Vec::with_capacity(specs.len());
    let mut total_triples = 0;
    for c in specs {
        let (a_items, b_items) = (&by_label[c.label_a][c.speaker_ab], &by_label[c.label_b][c.speaker_ab]);
        let x_items = &by_label[c.label_a][c.speaker_x];
        let mut score = 0.0;
        let mut n = 0;
        for &x in x_items {
            for &a in a_items {
                for &b in b_items {
                    let (dax, dbx) = (d(a, x), d(b, x));
                    score += if dax < dbx {
                        1.0
                    } else if dax == dbx {
                        0.5
                    } else {
                        0.0
                    };
                    n += 1;
                }
            }
        }
        total_triples += n;
        cells.push(AbxCell {
            label_a: c.label_a.to_string(),
            label_b: c.label_b.to_string(),
            speaker_ab: c.speaker_ab.to_string(),
            speaker_x: c.speaker_x.to_string(),
            accuracy: score / n as f64,
            n_triples: n,
        });
    }
    let mean_acc = cells.iter().map(|c| c.accuracy).sum::<f64>() / cells.len() as f64;
    Ok(AbxReport {
        error: 1.0 - mean_acc,
        n_triples: total_triples,
        cells,
    })
}
