//! Solution sets of word equations, represented as finite automata over
//! letter-to-word morphisms.
//!
//! A word equation `U = V` over constants with a fixpoint-free involution
//! (think formal inverses) and a set of variables asks for substitutions
//! of constant words for the variables making both sides equal, either
//! literally (free monoid with involution) or after free reduction (free
//! group). This crate compiles such an equation into a finite directed
//! graph whose arcs are labelled with simple morphisms; reading the labels
//! along any path from an initial to a final vertex and applying them to a
//! fixed seed tuple yields a solution, every solution arises this way, and
//! the graph is effectively computable. The solution set is therefore an
//! EDT0L language, and emptiness, finiteness and bounded enumeration all
//! reduce to reachability questions on the graph.
//!
//! The construction repeatedly shrinks a solved form of the equation by
//! popping letters out of variables and compressing letter blocks and
//! letter pairs, keeping every intermediate equation below a fixed linear
//! size bound; the nondeterministic choices become the arcs of the graph.
//!
//! # Layout
//!
//! - [`alphabet`]: symbol universe, involution, the finite constraint
//!   monoid tracking first/last letters and reducedness.
//! - [`traces`]: words with partial commutation between a typed letter and
//!   its type; equality, factor and normal form tests.
//! - [`equation`]: extended equations (word, alphabet, variables, types,
//!   constraints), the initial solved form, validity checks, weights.
//! - [`transitions`]: arcs between extended equations, morphism labels,
//!   the per-arc soundness checks.
//! - [`search`]: the memoized exploration producing the automaton.
//! - [`edtol`]: the automaton itself, trimming, classification,
//!   enumeration, JSON and DOT export.
//! - [`groups`]: the free group pipeline (reduction, triangulation,
//!   encoding into a single monoid system).
//! - [`oracle`]: brute force solvers used as ground truth in tests.
//! - [`cli`]: equation file format and the subcommand implementations
//!   backing the `wordeq` binary.
//!
//! # Examples
//!
//! Every major capability has a runnable example under `examples/`:
//!
//! - `solve_monoid`: compile an equation and print the verdict.
//! - `enumerate_solutions`: list all solutions up to a length bound.
//! - `classify_solution_sets`: empty / finite / infinite classification.
//! - `witness_trace`: deterministic replay of one known solution through
//!   the compression phases, with per-step checks.
//! - `group_equations`: the free group front end.
//! - `export_automaton`: JSON and DOT serialization.
//! - `oracle_comparison`: cross-check against the brute force solver.
//!
//! ```
//! use wordeq::cli::EquationFile;
//!
//! let file: EquationFile = "mode monoid\nletters a b\nvars X\neq a X = a a a b\n"
//!     .parse()
//!     .unwrap();
//! let outcome = wordeq::solve(&file, &wordeq::SolveOptions::default()).unwrap();
//! assert!(outcome.sat());
//! ```

pub mod alphabet;
pub mod cli;
pub mod edtol;
pub mod equation;
pub mod groups;
pub mod oracle;
pub mod search;
pub mod traces;
pub mod transitions;

pub use cli::{solve, SolveOptions, SolveOutcome};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A symbol name was rejected (reserved characters, duplicates).
    #[error("bad symbol name `{0}`: {1}")]
    BadName(String, &'static str),
    /// The fresh letter or variable pool ran dry; the run cannot continue.
    #[error("symbol pool exhausted ({0})")]
    PoolExhausted(&'static str),
    /// Equation or assignment text failed to parse.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    /// A word that must avoid the separator contained it.
    #[error("the separator # cannot appear in {0}")]
    HashReserved(&'static str),
    /// Input/output failure while reading or writing files.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    /// JSON (de)serialization failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    /// An internal consistency check failed; indicates a bug.
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;
