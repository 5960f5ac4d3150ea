//! Intrinsic feature evaluation: same-different average precision and minimal-pair ABX.

mod abx;
mod lists;
mod samediff;

use serde::{Deserialize, Serialize};

use crate::pairing::WordSegment;

pub use abx::{abx_error, AbxCell, AbxReport};
pub use lists::{
    abx_list_to_text, parse_abx_list, parse_word_list, read_abx_list, read_word_list, word_list_to_text,
};
pub use samediff::{average_precision, same_different_ap, PrCurve, SameDiffOptions, SameDiffReport};

/// An isolated test word with its true type.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledWord {
    pub segment: WordSegment,
    pub gold_type: String,
}

/// A triphone exemplar; labels are `left-middle-right` phone triples.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbxItem {
    pub segment: WordSegment,
    pub triphone_label: String,
    pub speaker_id: String,
}

impl AbxItem {
    pub fn phones(&self) -> Option<[&str; 3]> {
        let mut parts = self.triphone_label.split('-');
        match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(l), Some(m), Some(r), None) if !l.is_empty() && !m.is_empty() && !r.is_empty() => Some([l, m, r]),
            _ => None,
        }
    }
}

/// Combined output of the evaluation tasks that were run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub same_different: Option<SameDiffReport>,
    pub abx: Option<AbxReport>,
}

impl EvalReport {
    /// `AP=` / `ABX=` lines followed by the JSON encoding.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(sd) = &self.same_different {
            out.push_str(&format!("AP={:.6}\n", sd.ap));
        }
        if let Some(abx) = &self.abx {
            out.push_str(&format!("ABX={:.6}\n", abx.error));
        }
        out.push_str(&serde_json::to_string_pretty(self).expect("report serializes"));
        out.push('\n');
        out
    }
}
