//! Histogram files, format version 1.
//!
//! Text: one non-negative integer count per line. Blank lines and lines starting with
//! `#` are ignored.
//!
//! JSON: `{"version": 1, "counts": [..], "model": {"k0": .., "k1": .., "k2": ..}}` where
//! `version` and `model` are optional and no other keys are accepted.

use serde::{Deserialize, Serialize};

use super::mixture::{CountHistogram, MixtureModel};
use crate::error::{Error, Result};

pub const HISTOGRAM_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<u32>,
    pub counts: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<MixtureModel>,
}

/// A parsed histogram and the detection model stored alongside it, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedHistogram {
    pub histogram: CountHistogram,
    pub model: Option<MixtureModel>,
}

pub fn parse_text_histogram(text: &str) -> Result<CountHistogram> {
    let mut counts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let c: u64 = line
            .parse()
            .map_err(|_| Error::Format(format!("line {}: `{line}` is not a non-negative integer", i + 1)))?;
        counts.push(c);
    }
    Ok(CountHistogram::from_counts(counts))
}

pub fn parse_json_histogram(text: &str) -> Result<LoadedHistogram> {
    let file: HistogramFile = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    if let Some(v) = file.version {
        if v != HISTOGRAM_FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported histogram format version {v}")));
        }
    }
    if let Some(m) = &file.model {
        m.validate().map_err(|e| Error::Format(e.to_string()))?;
    }
    Ok(LoadedHistogram {
        histogram: CountHistogram::from_counts(file.counts),
        model: file.model,
    })
}

/// JSON when the first non-blank character is `{`, text otherwise.
pub fn parse_histogram(text: &str) -> Result<LoadedHistogram> {
    if text.trim_start().starts_with('{') {
        parse_json_histogram(text)
    } else {
        Ok(LoadedHistogram {
            histogram: parse_text_histogram(text)?,
            model: None,
        })
    }
}

pub fn histogram_to_text(hist: &CountHistogram) -> String {
    let mut s = format!("# histogram format {HISTOGRAM_FORMAT_VERSION}\n");
    for c in hist.expand() {
        s.push_str(&c.to_string());
        s.push('\n');
    }
    s
}

pub fn histogram_to_json(hist: &CountHistogram, model: Option<MixtureModel>) -> String {
    let file = HistogramFile {
        version: Some(HISTOGRAM_FORMAT_VERSION),
        counts: hist.expand(),
        model,
    };
    serde_json::to_string(&file).expect("histogram file serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let h = CountHistogram::from_counts([4, 0, 12, 4]);
        assert_eq!(parse_text_histogram(&histogram_to_text(&h)).unwrap(), h);
        let loaded = parse_histogram("\n 3\n# note\n5\n").unwrap();
        assert_eq!(loaded.histogram.expand(), vec![3, 5]);
        assert!(loaded.model.is_none());
    }

    #[test]
    fn json_round_trip_with_model() {
        let h = CountHistogram::from_counts([1, 1, 60]);
        let text = histogram_to_json(&h, Some(MixtureModel::DEFAULT));
        let back = parse_histogram(&text).unwrap();
        assert_eq!(back.histogram, h);
        assert_eq!(back.model, Some(MixtureModel::DEFAULT));
        let bare = parse_histogram(r#"{"counts": [2, 3]}"#).unwrap();
        assert_eq!(bare.histogram.shots(), 2);
    }

    #[test]
    fn malformed_inputs_are_format_errors() {
        for bad in ["-1\n", "3.5\n", "abc", r#"{"counts": [1], "extra": 0}"#, r#"{"version": 2, "counts": []}"#,
            r#"{"counts": [1], "model": {"k0": 1, "k1": 2, "k2": 0}}"#]
        {
            assert!(matches!(parse_histogram(bad), Err(Error::Format(_))), "{bad}");
        }
    }
}
