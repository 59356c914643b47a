//! Executing a DTree: examine items until a Dnode is reached, or stop early
//! and take the current Enode's default.

use serde::{Deserialize, Serialize};

use crate::dtree::{DTree, Node, NodeId};
use crate::error::WalkError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Response {
    Value(String),
    Stop,
}

impl Response {
    /// `stop` (any case) means stop; anything else is a value label.
    pub fn parse(s: &str) -> Response {
        let s = s.trim();
        if s.eq_ignore_ascii_case("stop") {
            Response::Stop
        } else {
            Response::Value(s.to_string())
        }
    }
}

/// What the walker is asking at an Enode.
#[derive(Debug, Clone)]
pub struct Prompt<'a> {
    pub node: NodeId,
    pub item: &'a str,
    pub values: &'a [String],
    pub default: Vec<String>,
}

pub trait ResponseSource {
    fn respond(&mut self, prompt: &Prompt<'_>) -> Option<Response>;
}

/// Replays a fixed list of responses.
#[derive(Debug, Clone)]
pub struct Scripted {
    responses: std::vec::IntoIter<Response>,
}

impl Scripted {
    pub fn new(responses: Vec<Response>) -> Self {
        Scripted {
            responses: responses.into_iter(),
        }
    }

    pub fn values(values: &[&str]) -> Self {
        Scripted::new(values.iter().map(|v| Response::parse(v)).collect())
    }
}

impl ResponseSource for Scripted {
    fn respond(&mut self, _prompt: &Prompt<'_>) -> Option<Response> {
        self.responses.next()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WalkStatus {
    Decided,
    StoppedEarly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub node: u32,
    pub item: String,
    pub value: String,
}

/// Record of one walk. This is also the `walk --json` document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkTrace {
    pub visited: Vec<u32>,
    pub answers: Vec<Answer>,
    pub status: WalkStatus,
    pub final_node: u32,
    pub decisions: Vec<String>,
}

/// Walks `tree` from the root, asking `source` for each Enode's item.
pub fn walk(tree: &DTree, source: &mut dyn ResponseSource) -> Result<WalkTrace, WalkError> {
    let nodes = tree.nodes();
    let labels = tree.labels();
    let mut visited = Vec::new();
    let mut answers = Vec::new();
    let mut current = &nodes[0];
    loop {
        visited.push(current.id.0);
        match current.node {
            Node::Dnode(d) => {
                return Ok(WalkTrace {
                    visited,
                    answers,
                    status: WalkStatus::Decided,
                    final_node: current.id.0,
                    decisions: labels.decision_names(&d.decisions),
                })
            }
            Node::Enode(e) => {
                let item = &labels.items[e.item];
                let prompt = Prompt {
                    node: current.id,
                    item: &item.name,
                    values: &item.values,
                    default: labels.decision_names(&e.decisions),
                };
                let value = match source.respond(&prompt) {
                    None => return Err(WalkError::NoResponse(item.name.clone())),
                    Some(Response::Stop) => {
                        return Ok(WalkTrace {
                            visited,
                            answers,
                            status: WalkStatus::StoppedEarly,
                            final_node: current.id.0,
                            decisions: prompt.default,
                        })
                    }
                    Some(Response::Value(v)) => v,
                };
                let Some(v) = item.values.iter().position(|x| *x == value) else {
                    return Err(WalkError::IllegalResponse {
                        item: item.name.clone(),
                        value,
                    });
                };
                if e.children.get(v).and_then(Option::as_ref).is_none() {
                    return Err(WalkError::MissingBranch {
                        item: item.name.clone(),
                        value,
                    });
                }
                answers.push(Answer {
                    node: current.id.0,
                    item: item.name.clone(),
                    value,
                });
                // children of a node appear in `nodes` in value order, skipping gaps
                let child_rank = e.children[..v].iter().filter(|c| c.is_some()).count();
                current = nodes
                    .iter()
                    .filter(|n| n.parent == Some(current.id))
                    .nth(child_rank)
                    .expect("child present");
            }
        }
    }
}

/// Walks with the values of a total evidence state (by value index).
pub fn walk_state(tree: &DTree, state: &[usize]) -> Result<WalkTrace, WalkError> {
    struct StateSource<'a> {
        state: &'a [usize],
        tree: &'a DTree,
    }
    impl ResponseSource for StateSource<'_> {
        fn respond(&mut self, prompt: &Prompt<'_>) -> Option<Response> {
            let item = self.tree.labels().items.iter().position(|i| i.name == prompt.item)?;
            Some(Response::Value(prompt.values[*self.state.get(item)?].clone()))
        }
    }
    walk(tree, &mut StateSource { state, tree })
}
