//! Graph-based dissipativity analysis for finite-abstracted control systems.
//!
//! The pipeline: a continuous-time model with a supply rate ([`model`]) is
//! abstracted onto a grid as a weighted transition graph ([`abstraction`]),
//! shortest-walk sweeps over that graph produce the four canonical storage
//! fields and a dissipativity verdict ([`storage`]), candidate storage
//! functions are audited against the fields and the differential inequality
//! ([`verify`]), and certificates of non-dissipativity are replayed in
//! continuous time ([`simulate`]).

pub mod abstraction;
pub mod error;
pub mod expr;
pub mod model;
pub mod report;
pub mod simulate;
pub mod storage;
pub mod verify;

pub use abstraction::{build_graph, default_step, Edge, Grid, NodeMask, TransitionGraph};
pub use error::{Error, Result};
pub use model::{
    load_model, registry, CandidateStorage, CapMicParams, InputSet, SupplyRate, SystemModel,
};
pub use report::{CheckReport, Witness};
pub use simulate::{replay_certificate, simulate, InputSchedule, ReplayOutcome, Trajectory};
pub use storage::extended::ExtendedReal;
pub use storage::{verdict, Certificate, StorageField, StorageKind, Verdict};
