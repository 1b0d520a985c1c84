//! Per-sample class predictions produced by an external classifier.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::OutlierLabel;

/// One JSONL line: predicted class and the five class probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prediction {
    pub id: String,
    pub predicted_label: OutlierLabel,
    pub probabilities: [f64; 5],
}

const PROB_TOLERANCE: f64 = 1e-6;

impl Prediction {
    pub fn validate(&self) -> Result<()> {
        if self.probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::DataFormat(format!("{}: probabilities must be finite and >= 0", self.id)));
        }
        let sum: f64 = self.probabilities.iter().sum();
        if (sum - 1.0).abs() > PROB_TOLERANCE {
            return Err(Error::DataFormat(format!("{}: probabilities sum to {sum}", self.id)));
        }
        Ok(())
    }
}

/// Parses predictions JSONL text, keyed by id. Duplicate ids are rejected.
pub fn parse_predictions(text: &str) -> Result<BTreeMap<String, Prediction>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let p: Prediction = serde_json::from_str(line)
            .map_err(|e| Error::DataFormat(format!("predictions line {}: {e}", n + 1)))?;
        p.validate()?;
        if out.contains_key(&p.id) {
            return Err(Error::DataFormat(format!("duplicate prediction for {}", p.id)));
        }
        out.insert(p.id.clone(), p);
    }
    Ok(out)
}

pub fn read_predictions(path: &Path) -> Result<BTreeMap<String, Prediction>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_predictions(&text)
}
