//! Text-only soccer action spotting from timestamped commentary.
//!
//! Commentary for each half is cut into sliding windows; three judges
//! (outcome, excitement, tactical) answer YES/NO plus a class for each
//! window; a two-of-three majority vote turns windows into timestamped
//! detections, which are merged per class and scored with loose and tight
//! average-mAP. A commentary-anchored random baseline provides the floor.

pub mod aggregation;
pub mod baseline;
pub mod commentary;
pub mod evaluation;
pub mod judging;
pub mod predictions;
pub mod taxonomy;
pub mod windowing;

pub use aggregation::{
    majority_vote, merge_detections, spot_half, Detection, HalfSpotting, MergeKeep, MergePolicy,
    SpotConfig, TimestampPolicy, VoteOutcome, VoteRecord,
};
pub use baseline::{estimate_priors, random_baseline, ClassPriors};
pub use commentary::{
    parse_echoes_json, parse_echoes_json_with, validate_half, HalfCommentary, MatchCommentary,
};
pub use evaluation::{evaluate, EvalReport, GroundTruthEvent, ToleranceGrid};
pub use judging::{CompletionClient, JudgeKind, JudgePanel, JudgeVerdict, RetryPolicy};
pub use predictions::PredictionsFile;
pub use taxonomy::{ActionClass, LabelTable, VerdictClass};
pub use windowing::{generate_windows, CommentaryWindow, WindowConfig};
