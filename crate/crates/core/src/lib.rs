//! Exact computations with GKM hypergraphs, GKM sheaves and graded modules
//! over `S(t*)`.

pub mod algebra;
pub mod freemod;
pub mod graph;
pub mod linalg;
pub mod monomial;
pub mod pipeline;
pub mod poly;
pub mod rational;
pub mod roots;
pub mod series;
pub mod sheaf;
pub mod submodule;

pub use algebra::{AmbientSpec, GradedElement, LinearSubstitution, MonomialIndex};
pub use graph::{FiniteAction, GkmHypergraph, GraphMorphism, ProjectiveWeight};
pub use linalg::Matrix;
pub use rational::Rational;
pub use roots::{CentralElement, RootDatum, RootSystem};
pub use submodule::{FreenessCertificate, HilbertData, Submodule, Verdict};
pub use pipeline::{CSelector, CharSelection, PipelineRequest, TableRow};
