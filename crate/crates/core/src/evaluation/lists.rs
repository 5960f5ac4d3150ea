//! Word-list (`utt start end speaker gold`) and ABX-list (`... triphone`) text files.

use std::path::Path;

use super::{AbxItem, LabeledWord};
use crate::error::{Error, Result};
use crate::pairing::WordSegment;

fn parse_rows(text: &str, file: &str, columns: usize) -> Result<Vec<(usize, Vec<String>)>> {
    let mut rows = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<String> = line.split('\t').map(str::to_string).collect();
        if fields.len() != columns || fields.iter().any(|f| f.is_empty()) {
            return Err(Error::Parse {
                file: file.to_string(),
                line: n + 1,
                detail: format!("expected {columns} nonempty tab-separated fields"),
            });
        }
        rows.push((n + 1, fields));
    }
    Ok(rows)
}

fn segment(fields: &[String], file: &str, line: usize) -> Result<WordSegment> {
    let parse = |s: &str| {
        s.parse::<usize>().map_err(|_| Error::Parse {
            file: file.to_string(),
            line,
            detail: format!("invalid frame index '{s}'"),
        })
    };
    let (start, end) = (parse(&fields[1])?, parse(&fields[2])?);
    if end <= start {
        return Err(Error::Parse {
            file: file.to_string(),
            line,
            detail: format!("end {end} is not after start {start}"),
        });
    }
    Ok(WordSegment {
        utterance_id: fields[0].clone(),
        start_frame: start,
        end_frame: end,
        speaker_id: fields[3].clone(),
        cluster_id: 0,
    })
}

pub fn parse_word_list(text: &str, file: &str) -> Result<Vec<LabeledWord>> {
    parse_rows(text, file, 5)?
        .into_iter()
        .map(|(line, f)| {
            Ok(LabeledWord {
                segment: segment(&f, file, line)?,
                gold_type: f[4].clone(),
            })
        })
        .collect()
}

pub fn parse_abx_list(text: &str, file: &str) -> Result<Vec<AbxItem>> {
    parse_rows(text, file, 6)?
        .into_iter()
        .map(|(line, f)| {
            Ok(AbxItem {
                segment: segment(&f, file, line)?,
                triphone_label: f[5].clone(),
                speaker_id: f[3].clone(),
            })
        })
        .collect()
}

pub fn read_word_list(path: impl AsRef<Path>) -> Result<Vec<LabeledWord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_word_list(&text, &path.display().to_string())
}

pub fn read_abx_list(path: impl AsRef<Path>) -> Result<Vec<AbxItem>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_abx_list(&text, &path.display().to_string())
}

pub fn word_list_to_text(words: &[LabeledWord]) -> String {
    words
        .iter()
        .map(|w| {
            let s = &w.segment;
            format!("{}\t{}\t{}\t{}\t{}\n", s.utterance_id, s.start_frame, s.end_frame, s.speaker_id, w.gold_type)
        })
        .collect()
}

pub fn abx_list_to_text(items: &[AbxItem]) -> String {
    items
        .iter()
        .map(|it| {
            let s = &it.segment;
            format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                s.utterance_id, s.start_frame, s.end_frame, it.speaker_id, it.triphone_label, it.triphone_label
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_list_round_trip() {
        let text = "u1\t0\t12\ts1\tcat\nu2\t4\t9\ts2\tdog\n";
        let words = parse_word_list(text, "w").unwrap();
        assert_eq!(words.len(), 2);
        assert_eq!(word_list_to_text(&words), text);
    }

    #[test]
    fn abx_list_parses_sixth_column() {
        let items = parse_abx_list("u1\t0\t12\ts1\tbag\tb-a-g\n", "a").unwrap();
        assert_eq!(items[0].triphone_label, "b-a-g");
        assert_eq!(items[0].phones(), Some(["b", "a", "g"]));
    }

    #[test]
    fn malformed_rows() {
        assert!(parse_word_list("u1\t0\t12\ts1\n", "w").is_err());
        assert!(parse_word_list("u1\t5\t5\ts1\tcat\n", "w").is_err());
        let err = parse_word_list("u1\t0\tx\ts1\tcat\n", "w.txt").unwrap_err();
        assert!(err.to_string().starts_with("w.txt:1:"));
    }
}
