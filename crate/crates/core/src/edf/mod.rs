//! EDF/EDF+ ingestion for the movement dataset.

mod header;
mod manifest;
mod recording;
mod tal;
mod trials;

pub use header::{EdfHeader, SignalSpec, ANNOTATION_LABEL, UNKNOWN_RECORDS};
pub use manifest::{
    movement_entries, sha256_file, verify_manifest, Corrupt, Manifest, ManifestEntry, VerifyReport,
};
pub use recording::{load_recording, parse_edf, subject_run_from_name, write_edf, Recording};
pub use tal::Annotation;
pub use trials::{drop_short, extract_trials, Event, Hand, Trial, DEFAULT_EXCLUDED, MOVEMENT_RUNS};
