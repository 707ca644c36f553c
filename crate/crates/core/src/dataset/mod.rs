//! Participants, labels and the training-set pipeline: quadrant partition,
//! class and gender sub-sampling, cropping and segmentation.

mod balance;
mod manifest;
mod pipeline;
mod segment;

pub use balance::{partition_quadrants, subsample_class_balance, subsample_gender_balance, Quadrant, Quadrants};
pub use manifest::{load_manifest, parse_manifest, write_manifest, MANIFEST_HEADER};
pub use pipeline::{epoch_pipeline, evaluation_batch, BalanceMode, EpochSelection, FeatureSet};
pub use segment::{crop_to_shortest, segment, Cropped, Segment, SegmentBatch, SegmentSpec};

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::Error;

/// PHQ-8 ratings at or above this are labelled depressed.
pub const PHQ8_DEPRESSED_THRESHOLD: u8 = 10;
pub const PHQ8_MAX: u8 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Gender {
    #[serde(rename = "F")]
    Female,
    #[serde(rename = "M")]
    Male,
}

impl Gender {
    pub const ALL: [Gender; 2] = [Gender::Female, Gender::Male];

    pub fn code(self) -> &'static str {
        match self {
            Gender::Female => "F",
            Gender::Male => "M",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Gender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "F" => Ok(Gender::Female),
            "M" => Ok(Gender::Male),
            other => Err(Error::InvalidArgument(format!("gender must be F or M, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "ND")]
    NotDepressed,
    #[serde(rename = "D")]
    Depressed,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::NotDepressed, Label::Depressed];

    pub fn from_phq8(rating: u8) -> Label {
        if rating >= PHQ8_DEPRESSED_THRESHOLD {
            Label::Depressed
        } else {
            Label::NotDepressed
        }
    }

    /// 1.0 for depressed, 0.0 otherwise.
    pub fn target(self) -> f64 {
        match self {
            Label::Depressed => 1.0,
            Label::NotDepressed => 0.0,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Label::NotDepressed => "ND",
            Label::Depressed => "D",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
        }
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            other => Err(Error::InvalidArgument(format!("split must be train or validation, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParticipantRecord {
    pub id: u32,
    pub gender: Gender,
    pub phq8: u8,
    pub split: Split,
    pub audio_path: PathBuf,
}

impl ParticipantRecord {
    pub fn label(&self) -> Label {
        Label::from_phq8(self.phq8)
    }
}
