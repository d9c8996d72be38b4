//! Rectilinear Steiner minimum tree (RSMT) wirelength estimation.
//!
//! Classical solvers ([`oracle`]) label nets with optimal or near-optimal
//! Steiner points; a graph transformer ([`model`]) learns to classify Hanan
//! grid nodes as Steiner points, and [`eval`] turns its predictions back into
//! a tree through a rectilinear MST.

pub mod data;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod hanan;
pub mod kv;
pub mod model;
pub mod oracle;
pub mod train;
pub mod tree;

pub use error::{Error, Result};
pub use geometry::{bbox_half_perimeter, dedupe_pins, l1_distance, Length, Net, Point, RectTree};
pub use hanan::{build_hanan_graph, featurize, HananGraph};
pub use oracle::{exact_rsmt, iterated_one_steiner, label_sample, ExactBudget, LabeledSample, Provenance, RsmtSolution};
pub use tree::{prune_steiner, rectilinear_mst, wirelength};
pub use data::{generate_dataset, parse_netlist, sample_synthetic_net, DatasetRecord, Netlist, SynthConfig, TrainingSample};
pub use eval::{estimate_wl, evaluate, predict_steiner, sweep, EvalOptions, InferenceOptions, Method, WlEstimate, WlReport};
pub use train::{fine_tune, train, TrainConfig, TrainOutcome};
