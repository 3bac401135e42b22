//! Frequent embedded unordered subtree enumeration.
//!
//! Patterns grow by adding one node on the rightmost path, kept as pre-order
//! (depth, label) sequences. A sequence is canonical when, at every node,
//! the child subtree sequences are non-increasing; dropping the last node of
//! a canonical sequence leaves it canonical, so each unordered pattern is
//! reached exactly once from its parent. Every tree keeps the full list of
//! injective embeddings of the current pattern.

use std::collections::BTreeMap;

use super::pattern::{PatternTree, TreePattern};
use super::tree::LabeledTree;

type Seq = Vec<(u8, u32)>;

/// A pattern and the number of trees that contain it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mined {
    pub pattern: TreePattern,
    pub tree_count: usize,
}

struct Corpus {
    label_names: Vec<String>,
    /// Per tree: pre-order labels (as ids) and subtree extents.
    labels: Vec<Vec<u32>>,
    last: Vec<Vec<usize>>,
    /// Per tree and label id: nodes carrying that label, ascending.
    by_label: Vec<BTreeMap<u32, Vec<usize>>>,
}

/// Embeddings of one pattern in one tree, `k` entries each, flattened.
struct Occurrence {
    tree: usize,
    maps: Vec<usize>,
}

fn subtree_end(seq: &[(u8, u32)], i: usize) -> usize {
    let d = seq[i].0;
    let mut j = i + 1;
    while j < seq.len() && seq[j].0 > d {
        j += 1;
    }
    j
}

pub(crate) fn is_canonical(seq: &[(u8, u32)]) -> bool {
    for i in 0..seq.len() {
        let end = subtree_end(seq, i);
        let mut prev: Option<&[(u8, u32)]> = None;
        let mut c = i + 1;
        while c < end {
            let ce = subtree_end(seq, c);
            let block = &seq[c..ce];
            if prev.is_some_and(|p| p < block) {
                return false;
            }
            prev = Some(block);
            c = ce;
        }
    }
    true
}

fn to_pattern(seq: &[(u8, u32)], names: &[String]) -> TreePattern {
    let mut parent = Vec::with_capacity(seq.len());
    let mut path: Vec<usize> = Vec::new();
    for (i, &(d, _)) in seq.iter().enumerate() {
        path.truncate(d as usize);
        parent.push(path.last().copied());
        path.push(i);
    }
    let tree = PatternTree { labels: seq.iter().map(|&(_, l)| names[l as usize].clone()).collect(), parent };
    TreePattern::from_tree(&tree).expect("non-empty")
}

/// Every pattern with at most `max_nodes` nodes contained in at least
/// `min_count` trees, in no particular order.
pub fn mine_trees(trees: &[LabeledTree], min_count: usize, max_nodes: usize) -> Vec<Mined> {
    let min_count = min_count.max(1);
    let mut names: Vec<String> = trees.iter().flat_map(|t| t.labels.iter().cloned()).collect();
    names.sort();
    names.dedup();
    let id_of: BTreeMap<&str, u32> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i as u32)).collect();
    let mut corpus = Corpus {
        label_names: names.clone(),
        labels: Vec::with_capacity(trees.len()),
        last: Vec::with_capacity(trees.len()),
        by_label: Vec::with_capacity(trees.len()),
    };
    for t in trees {
        let ids: Vec<u32> = t.labels.iter().map(|l| id_of[l.as_str()]).collect();
        let mut by_label: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (v, &l) in ids.iter().enumerate() {
            by_label.entry(l).or_default().push(v);
        }
        corpus.labels.push(ids);
        corpus.last.push(t.last.clone());
        corpus.by_label.push(by_label);
    }

    let mut frequent_labels = Vec::new();
    let mut out = Vec::new();
    let mut roots = Vec::new();
    for l in 0..names.len() as u32 {
        let occ: Vec<Occurrence> = (0..trees.len())
            .filter_map(|t| corpus.by_label[t].get(&l).map(|vs| Occurrence { tree: t, maps: vs.clone() }))
            .collect();
        if occ.len() >= min_count {
            frequent_labels.push(l);
            let seq = vec![(0u8, l)];
            out.push(Mined { pattern: to_pattern(&seq, &names), tree_count: occ.len() });
            roots.push((seq, occ));
        }
    }
    if max_nodes >= 2 {
        for (seq, occ) in roots {
            grow(&corpus, &seq, &occ, &frequent_labels, min_count, max_nodes, &mut out);
        }
    }
    out
}

fn grow(
    corpus: &Corpus,
    seq: &Seq,
    occ: &[Occurrence],
    labels: &[u32],
    min_count: usize,
    max_nodes: usize,
    out: &mut Vec<Mined>,
) {
    let k = seq.len();
    let deepest = seq[k - 1].0;
    // pattern node at each depth along the rightmost path
    let mut path: Vec<usize> = Vec::with_capacity(deepest as usize + 1);
    for (i, &(d, _)) in seq.iter().enumerate() {
        path.truncate(d as usize);
        path.push(i);
    }
    for depth in 1..=deepest + 1 {
        let attach = path[depth as usize - 1];
        for &label in labels {
            let mut next = seq.clone();
            next.push((depth, label));
            if !is_canonical(&next) {
                continue;
            }
            let next_occ = extend_occurrences(corpus, occ, k, attach, label);
            if next_occ.len() < min_count {
                continue;
            }
            out.push(Mined { pattern: to_pattern(&next, &corpus.label_names), tree_count: next_occ.len() });
            if next.len() < max_nodes {
                grow(corpus, &next, &next_occ, labels, min_count, max_nodes, out);
            }
        }
    }
}

fn extend_occurrences(corpus: &Corpus, occ: &[Occurrence], k: usize, attach: usize, label: u32) -> Vec<Occurrence> {
    let mut result = Vec::new();
    for o in occ {
        let Some(cands) = corpus.by_label[o.tree].get(&label) else {
            continue;
        };
        let last = &corpus.last[o.tree];
        let mut maps = Vec::new();
        for emb in o.maps.chunks_exact(k) {
            let anchor = emb[attach];
            let lo = cands.partition_point(|&x| x <= anchor);
            for &x in &cands[lo..] {
                if x > last[anchor] {
                    break;
                }
                if !emb.contains(&x) {
                    maps.extend_from_slice(emb);
                    maps.push(x);
                }
            }
        }
        if !maps.is_empty() {
            result.push(Occurrence { tree: o.tree, maps });
        }
    }
    result
}
