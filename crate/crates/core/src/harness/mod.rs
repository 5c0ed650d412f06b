//! Scenario files, presets, sweep orchestration and the run directory layout.

pub mod presets;
pub mod run;
pub mod scenario;

pub use presets::{preset, preset_names, PRESETS};
pub use run::{
    audit_scenario, file_digest, read_manifest, run_label, run_scenario, verify_manifest, DiagnosticRecord, FileEntry,
    RunManifest, RunOptions, RunRecord, MANIFEST,
};
pub use scenario::*;
