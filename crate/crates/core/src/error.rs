use thiserror::Error;

use crate::model::ValidationReport;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("malformed model document: {0}")]
    Parse(String),
    #[error("invalid model: {} violation(s)", .0.violations.len())]
    Invalid(ValidationReport),
    #[error("unknown evidence item {0:?}")]
    UnknownItem(String),
    #[error("item {0:?} appears twice in a path")]
    RepeatedItem(String),
    #[error("value {value:?} is not legal for item {item:?}")]
    UnknownValue { item: String, value: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferenceError {
    #[error("evidence path has probability zero")]
    ZeroProbabilityPath,
    #[error("evidence item {0} is already on the path")]
    ItemAlreadyObserved(usize),
    #[error("no candidate items")]
    NoCandidates,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TreeError {
    #[error("no node with id {0}")]
    UnknownNode(u32),
    #[error("node {0} is not an open Dnode")]
    ClosedNode(u32),
    #[error("evidence item {0} is already on the path to this node")]
    ItemAlreadyObserved(usize),
    #[error("expansion subtree is empty")]
    EmptyShape,
    #[error("expansion subtree branch count does not match item {item} ({expected} values)")]
    ShapeArity { item: usize, expected: usize },
    #[error("tree and model disagree on evidence items or decisions")]
    LabelMismatch,
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WalkError {
    #[error("{value:?} is not a value of item {item:?}")]
    IllegalResponse { item: String, value: String },
    #[error("no branch for {item}={value}; tree does not cover this evidence")]
    MissingBranch { item: String, value: String },
    #[error("response source ran out of answers at item {0:?}")]
    NoResponse(String),
}

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("malformed tree document: {0}")]
    Parse(String),
    #[error("tree document: {0}")]
    Schema(String),
    #[error("tree was compiled from model {tree} but evaluated against {model}")]
    FingerprintMismatch { tree: String, model: String },
}

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("invalid compiler configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("instance too large for exhaustive search: {0}")]
    BudgetTooLarge(String),
    #[error("tree does not cover evidence state {0:?}")]
    Incomplete(Vec<usize>),
    #[error(transparent)]
    Tree(#[from] TreeError),
}
