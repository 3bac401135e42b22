//! Trees in pre-order with subtree extents, and embedded containment.

use crate::forest::RelationTree;

use super::pattern::PatternTree;

/// A rooted labeled tree stored in pre-order. `last[v]` is the pre-order
/// index of the last node in `v`'s subtree, so `u` is a proper ancestor of
/// `v` exactly when `u < v <= last[u]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledTree {
    pub labels: Vec<String>,
    pub parent: Vec<Option<usize>>,
    pub last: Vec<usize>,
}

impl LabeledTree {
    /// Builds from any parent-linked tree (node 0 the root); children are
    /// visited in index order.
    pub fn from_parents(labels: &[String], parent: &[Option<usize>]) -> Self {
        let n = labels.len();
        let mut kids = vec![Vec::new(); n];
        for (v, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                kids[*p].push(v);
            }
        }
        let mut order = Vec::with_capacity(n);
        let mut new_index = vec![0; n];
        let mut stack: Vec<usize> = if n > 0 { vec![0] } else { Vec::new() };
        while let Some(v) = stack.pop() {
            new_index[v] = order.len();
            order.push(v);
            stack.extend(kids[v].iter().rev());
        }
        let mut out = LabeledTree {
            labels: order.iter().map(|&v| labels[v].clone()).collect(),
            parent: order.iter().map(|&v| parent[v].map(|p| new_index[p])).collect(),
            last: (0..n).collect(),
        };
        for v in (1..n).rev() {
            let up = out.parent[v].expect("non-root");
            out.last[up] = out.last[up].max(out.last[v]);
        }
        out
    }

    pub fn from_pattern(p: &PatternTree) -> Self {
        LabeledTree::from_parents(&p.labels, &p.parent)
    }

    pub fn from_relation_tree(t: &RelationTree) -> Self {
        let mut labels = Vec::with_capacity(t.len());
        let mut parent = Vec::with_capacity(t.len());
        let mut stack = vec![(t.root.as_str(), None)];
        while let Some((id, up)) = stack.pop() {
            let me = labels.len();
            labels.push(t.nodes[id].as_str().to_string());
            parent.push(up);
            let cs: Vec<&String> = t.children_of(id).collect();
            stack.extend(cs.into_iter().rev().map(|c| (c.as_str(), Some(me))));
        }
        LabeledTree::from_parents(&labels, &parent)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn is_ancestor(&self, u: usize, v: usize) -> bool {
        u < v && v <= self.last[u]
    }
}

/// True iff some injective, label-preserving map of the pattern's nodes into
/// `t` sends every pattern edge to an ancestor-descendant pair.
pub fn contains_embedded(t: &LabeledTree, p: &PatternTree) -> bool {
    let p = LabeledTree::from_pattern(p);
    if p.is_empty() {
        return true;
    }
    let mut map = vec![usize::MAX; p.len()];
    let mut used = vec![false; t.len()];
    extend(t, &p, 0, &mut map, &mut used)
}

fn extend(t: &LabeledTree, p: &LabeledTree, i: usize, map: &mut [usize], used: &mut [bool]) -> bool {
    if i == p.len() {
        return true;
    }
    let range = match p.parent[i] {
        Some(up) => map[up] + 1..=t.last[map[up]],
        None => 0..=t.len() - 1,
    };
    for x in range {
        if used[x] || t.labels[x] != p.labels[i] {
            continue;
        }
        map[i] = x;
        used[x] = true;
        if extend(t, p, i + 1, map, used) {
            return true;
        }
        used[x] = false;
    }
    false
}
