//! Canonical string form of rooted unordered labeled trees.
//!
//! A label token pushes a node under the current one and `^` pops back to
//! its parent; the root is never popped. Child blocks are sorted ascending
//! as strings, so every unordered tree has exactly one encoding:
//! `Rain Accident Congestion ^ ^` is a chain, `Rain Accident ^ Congestion ^`
//! is Rain with two children.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const POP: &str = "^";

/// A small rooted tree with parent links, node 0 the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternTree {
    pub labels: Vec<String>,
    pub parent: Vec<Option<usize>>,
}

impl PatternTree {
    pub fn children(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.parent.iter().enumerate().filter(move |(_, p)| **p == Some(v)).map(|(i, _)| i)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn encode_from(&self, v: usize) -> String {
        let mut blocks: Vec<String> = self.children(v).map(|c| self.encode_from(c)).collect();
        blocks.sort();
        let mut s = self.labels[v].clone();
        for b in blocks {
            s.push(' ');
            s.push_str(&b);
            s.push(' ');
            s.push_str(POP);
        }
        s
    }

    /// Canonical encoding. Panics on an empty tree.
    pub fn encode(&self) -> String {
        self.encode_from(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TreePattern {
    encoding: String,
    node_count: usize,
}

impl TreePattern {
    pub fn from_tree(tree: &PatternTree) -> Result<Self> {
        if tree.is_empty() {
            return Err(Error::InvalidPattern("empty tree".into()));
        }
        Ok(TreePattern { encoding: tree.encode(), node_count: tree.len() })
    }

    pub fn encoding(&self) -> &str {
        &self.encoding
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn decode(&self) -> PatternTree {
        decode(&self.encoding).expect("stored encodings are valid")
    }

    /// Accepts any well-formed encoding and returns its canonical form.
    pub fn canonicalize(encoding: &str) -> Result<Self> {
        TreePattern::from_tree(&decode(encoding)?)
    }
}

impl fmt::Display for TreePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encoding)
    }
}

/// Parses and requires the input to be canonical already.
impl FromStr for TreePattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let p = TreePattern::canonicalize(s)?;
        if p.encoding != s {
            return Err(Error::InvalidPattern(format!("{s:?} is not canonical; expected {:?}", p.encoding)));
        }
        Ok(p)
    }
}

/// Builds the tree described by a (not necessarily canonical) encoding.
pub fn decode(encoding: &str) -> Result<PatternTree> {
    let bad = |why: &str| Error::InvalidPattern(format!("{encoding:?}: {why}"));
    let mut tree = PatternTree { labels: Vec::new(), parent: Vec::new() };
    let mut stack: Vec<usize> = Vec::new();
    for tok in encoding.split(' ') {
        if tok.is_empty() {
            return Err(bad("empty token"));
        }
        if tok == POP {
            if stack.len() <= 1 {
                return Err(bad("pop past the root"));
            }
            stack.pop();
            continue;
        }
        if !tree.is_empty() && stack.is_empty() {
            return Err(bad("more than one root"));
        }
        tree.parent.push(stack.last().copied());
        tree.labels.push(tok.to_string());
        stack.push(tree.len() - 1);
    }
    if tree.is_empty() {
        return Err(bad("no nodes"));
    }
    if stack.len() != 1 {
        return Err(bad("unbalanced"));
    }
    Ok(tree)
}
