//! Core library: verifier Turing machines, dynamic computation graphs, and
//! the feasible-graph decision engine with NP-witness extraction.

pub mod feasible;
pub mod graph;
pub mod machines;
pub mod oracle;
pub mod tm;
pub mod tok;

pub use feasible::{
    compute_cover_edges, compute_feasible_graph, is_ex_pendant, prune_walk,
    step_pendant_edges_with_reachable_graph, weak_ceiling_adjacent_edges, CoverIndexMap,
    FeasibleGraph,
};
pub use graph::{
    CellVec, DynamicGraph, EdgeFlags, EdgeRef, EdgeSelection, NodeKey, Resolution, Surface,
    SurfaceEntry, TransitionCaseKey,
};
pub use machines::{
    build_machine, certificate_alphabet, encode_instance, parse_instance, render_instance,
    tokenize_tape, CertificateSchema, EncodedTape, MachineError, MachineKind, ProblemInstance,
    SchemaKind,
};
pub use oracle::{
    brute_force_sat, default_budget, eval_cnf, exhaustive_tm_decide, subset_sum_solve,
    OracleError, OracleResult, OracleWitness,
};
pub use tm::{
    blank, resolve_transition, run_direct, step, Configuration, Decision, MachineSpec, Move,
    ResolverVariant, Rule, RunResult, TraceStep,
};
pub use tok::{t, Tok, TOK_CAP};
