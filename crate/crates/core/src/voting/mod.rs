//! Majority voting over the three per-model decisions.
//!
//! Each model contributes a hard 0/1 decision. The ensemble label is 1
//! exactly when at least two of the three decisions are 1, i.e. when the
//! sum of the three indicator values is at least 2. With an odd number of
//! voters there are no ties, so this is the plain most-frequent label.

use serde::{Deserialize, Serialize};

use crate::corpus::{Label, Language, Source};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum VotingError {
    #[error("vote component {position} is {value}; votes must be 0 or 1")]
    BadComponent { position: &'static str, value: u8 },
}

/// One hard decision from each of the three models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteInput {
    pub i1: u8,
    pub i2: u8,
    pub i3: u8,
}

impl VoteInput {
    /// Validates that every component is 0 or 1.
    pub fn new(i1: u8, i2: u8, i3: u8) -> Result<Self, VotingError> {
        for (position, value) in [("i1", i1), ("i2", i2), ("i3", i3)] {
            if value > 1 {
                return Err(VotingError::BadComponent { position, value });
            }
        }
        Ok(VoteInput { i1, i2, i3 })
    }

    /// Infallible constructor from typed labels.
    pub fn from_labels(l1: Label, l2: Label, l3: Label) -> Self {
        VoteInput {
            i1: l1.as_u8(),
            i2: l2.as_u8(),
            i3: l3.as_u8(),
        }
    }

    pub fn sum(self) -> u8 {
        self.i1 + self.i2 + self.i3
    }
}

/// Returns 1 when at least two of the three components are 1, else 0.
pub fn majority_vote(votes: VoteInput) -> u8 {
    u8::from(votes.sum() >= 2)
}

/// Typed wrapper over [`majority_vote`].
pub fn majority_label(votes: VoteInput) -> Label {
    if majority_vote(votes) == 1 {
        Label::Sexist
    } else {
        Label::NonSexist
    }
}

/// Per-sample ensemble output: the three component decisions plus the
/// voted label, with enough sample context for breakdown reporting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsemblePrediction {
    pub id: String,
    pub source: Option<Source>,
    pub language: Language,
    pub gold: Option<Label>,
    pub votes: VoteInput,
    pub label: Label,
}

impl EnsemblePrediction {
    pub fn new(
        id: impl Into<String>,
        source: Option<Source>,
        language: Language,
        gold: Option<Label>,
        votes: VoteInput,
    ) -> Self {
        EnsemblePrediction {
            id: id.into(),
            source,
            language,
            gold,
            votes,
            label: majority_label(votes),
        }
    }
}
