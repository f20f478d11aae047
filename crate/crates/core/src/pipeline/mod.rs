//! Dataset-level plumbing: manifests, panorama stitching, batch runs and evaluation.

pub mod eval;
pub mod manifest;
pub mod results;
pub mod stitch;

pub use eval::{evaluate, EvalBlock, EvalReport};
pub use manifest::{Manifest, ManifestEntry, Split};
pub use results::{
    label_manifest, read_labels, read_results, run_adaptive, run_all, run_technique, write_labels, write_results,
    write_routing, LabelRecord, ResultRow, RoutingRow, RunOptions, ADAPTIVE_NAME, RESULTS_HEADER,
};
pub use stitch::{stitch_cube, CubeTiles, Face};
