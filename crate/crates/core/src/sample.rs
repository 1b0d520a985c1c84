use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::PressureGrid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "L")]
    Left,
    #[serde(rename = "R")]
    Right,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Side::Left => "L",
            Side::Right => "R",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl std::str::FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "L" | "l" => Ok(Side::Left),
            "R" | "r" => Ok(Side::Right),
            other => Err(Error::DataFormat(format!("unknown side {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Static,
    Dynamic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Real,
    Synthetic,
    Phantom,
}

/// Outlier taxonomy. Label 0 is a valid recording.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum OutlierLabel {
    Valid = 0,
    AcquisitionError = 1,
    DoubleCapture = 2,
    InvertedOrientation = 3,
    IncorrectSide = 4,
}

impl OutlierLabel {
    pub const ALL: [OutlierLabel; 5] = [
        OutlierLabel::Valid,
        OutlierLabel::AcquisitionError,
        OutlierLabel::DoubleCapture,
        OutlierLabel::InvertedOrientation,
        OutlierLabel::IncorrectSide,
    ];

    pub const OUTLIERS: [OutlierLabel; 4] = [
        OutlierLabel::AcquisitionError,
        OutlierLabel::DoubleCapture,
        OutlierLabel::InvertedOrientation,
        OutlierLabel::IncorrectSide,
    ];

    pub fn value(self) -> u8 {
        self as u8
    }

    pub fn is_outlier(self) -> bool {
        self != OutlierLabel::Valid
    }

    pub fn name(self) -> &'static str {
        match self {
            OutlierLabel::Valid => "valid",
            OutlierLabel::AcquisitionError => "general acquisition error",
            OutlierLabel::DoubleCapture => "double foot capture",
            OutlierLabel::InvertedOrientation => "inverted orientation",
            OutlierLabel::IncorrectSide => "incorrect side annotation",
        }
    }
}

impl TryFrom<u8> for OutlierLabel {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        OutlierLabel::ALL
            .get(usize::from(v))
            .copied()
            .ok_or_else(|| Error::DataFormat(format!("label {v} outside 0..=4")))
    }
}

impl From<OutlierLabel> for u8 {
    fn from(l: OutlierLabel) -> u8 {
        l.value()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: String,
    pub subject_id: String,
    pub side: Side,
    pub condition: Condition,
    pub label: OutlierLabel,
    pub source: Source,
    pub grid: PressureGrid,
}

impl Sample {
    /// Checks the per-sample invariants (ids usable as file stems, valid grid).
    pub fn validate(&self) -> Result<()> {
        validate_id(&self.id)?;
        if self.subject_id.is_empty() {
            return Err(Error::Validation(format!("sample {} has empty subject_id", self.id)));
        }
        self.grid
            .validate()
            .map_err(|e| Error::Validation(format!("sample {}: {e}", self.id)))
    }
}

pub(crate) fn validate_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id != "."
        && id != ".."
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.' | '+'));
    if ok {
        Ok(())
    } else {
        Err(Error::Validation(format!("invalid sample id {id:?}")))
    }
}
