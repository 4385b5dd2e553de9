//! Cell-list particle methods with two interchangeable interpreters.
//!
//! A particle method is a small algebraic package: a global variable, a
//! tuple of particles, an interaction that folds neighbor contributions
//! into a particle, an evolution that rewrites a particle (possibly into
//! none or several), and a stop condition. [`seq`] runs that package
//! directly. [`dist`] runs it over one simulated process per grid cell,
//! exchanging ghost particles along a checkerboard schedule, and reaches
//! bit-identical states for exact methods. [`verify`] checks the
//! equivalence and the scheduling laws it rests on; [`complexity`]
//! prices both interpreters and predicts speedups.

pub mod complexity;
pub mod dist;
pub mod error;
pub mod grid;
pub mod index;
pub mod methods;
pub mod model;
pub mod seq;
pub mod verify;

pub use dist::{
    audit_communications, parallel_run, AuditReport, CommEvent, CommKind, CommLog,
    DistributedState, ExecMode, ParallelOptions, ParallelOutcome, ProcessStorage,
};
pub use error::{Error, Result};
pub use grid::CellGrid;
pub use index::{GridDims, IndexVec};
pub use methods::{MethodInfo, MethodName, MethodParams};
pub use model::{Domain, GlobalVar, Instance, Particle, PropValue, State};
pub use seq::{run, RunOptions, RunOutcome};
