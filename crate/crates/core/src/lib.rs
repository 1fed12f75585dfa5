//! Level-set topology optimization with fictitious physical fields controlling
//! shielding and penetrating features of the optimized layout.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod elasticity;
pub mod error;
pub mod fem;
pub mod fictitious;
pub mod field;
pub mod geometry;
pub mod levelset;
pub mod mesh;
pub mod optimizer;
pub mod parallel;
pub mod sparse;
pub mod study;
pub mod topology;

pub use error::{Error, Result};
pub use field::{ScalarField, VectorField};
pub use geometry::{Point, Region};
pub use levelset::{CharacteristicField, LevelSetField, LevelSetParams};
pub use mesh::{generate_rect_mesh, Mesh};
pub use optimizer::{run, History, IterationRecord, ProblemSpec};
