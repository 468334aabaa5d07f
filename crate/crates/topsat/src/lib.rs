//! Topological satisfiability for a hybrid modal language with global
//! modalities.
//!
//! The language has propositions, nominals (names that must denote a single
//! point), the usual Boolean connectives, the topological modalities `[]` and
//! `<>` (interior and closure), the jump operator `@'i`, and the global
//! modalities `E`/`A`. Formulas are interpreted over topological spaces;
//! finite spaces are handled through their specialization preorders.
//!
//! The crate decides satisfiability over T0 spaces and over T1 spaces (which
//! coincide with T2 for this logic) by a two-player challenge game on Hintikka
//! sets, and it builds explicit witness models: finite quasi-models, their
//! finite topological representations, and infinite symbolic models over the
//! naturals whose verification obligations are all finite. A brute-force
//! enumeration oracle provides an independent check of the game verdicts.

pub mod bisim;
pub mod construct;
pub mod error;
pub mod finrep;
pub mod formula;
pub mod game;
pub mod model;
pub mod oracle;
pub mod topo;

pub use construct::{
    fatten_clusters, kolmogorov_quotient, peel_off, rational_embed, symbolic_witness_t0,
    symbolic_witness_t1, unravel_to_full_tree, verify_symbolic, verify_tree_labeling,
    LabeledTree, SymbolicModel,
};
pub use error::{Error, Result};
pub use finrep::{check_finite_rep, check_quasi_model, QuasiModel, SpaceClass};
pub use formula::Formula;
pub use game::{decide, satisfiable, valid, GameEvent, Session, Verdict};
pub use model::TopoModel;
pub use topo::{FiniteSpace, Preorder};
