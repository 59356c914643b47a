//! Compile influence diagrams into default trees (DTrees): small decision
//! procedures that ask for evidence items one at a time and can be stopped
//! at any point, falling back to a default decision.
//!
//! ```
//! use dtree_core::{compile, fixtures, CompilerConfig, Inference, Model};
//!
//! let model = Model::new(fixtures::net1()).unwrap();
//! let out = compile(&model, &CompilerConfig::default()).unwrap();
//! let inf = Inference::new(&model);
//! assert_eq!(out.tree.enode_count(), 1);
//! assert!((out.tree.eu_direct(&inf) - 0.73).abs() < 1e-12);
//! ```

pub mod compiler;
pub mod dtree;
pub mod error;
pub mod export;
pub mod fixtures;
pub mod inference;
pub mod model;
pub mod oracle;
pub mod par;
pub mod walk;

pub use compiler::{compile, Algorithm, CompilationStats, Compiled, Compiler, CompilerConfig, Enumeration};
pub use dtree::{DTree, Node, NodeId, Shape};
pub use error::{CompileError, ExportError, InferenceError, ModelError, OracleError, TreeError, WalkError};
pub use export::TreeDocument;
pub use inference::{DecisionSet, Inference};
pub use model::{EvidencePath, InfluenceDiagram, Model};
pub use walk::{walk, WalkTrace};
