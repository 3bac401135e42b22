//! Relation trees: one parent per child, connected components as rooted
//! labeled trees, grouped per (state, city).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ParentPick;
use crate::error::{Error, Result};
use crate::model::{EntityType, GeoEntity, Location, Timestamp};
use crate::relations::{sort_relations, ChildParentRelation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationTree {
    pub root: String,
    pub nodes: BTreeMap<String, EntityType>,
    pub children: BTreeMap<String, BTreeSet<String>>,
    /// Start of the root entity, for time-of-day statistics.
    pub root_start: Timestamp,
    /// Street names of the traffic nodes, for road-type annotation.
    pub streets: BTreeSet<String>,
}

impl RelationTree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn children_of(&self, id: &str) -> impl Iterator<Item = &String> {
        self.children.get(id).into_iter().flatten()
    }

    pub fn edges(&self) -> Vec<(String, String)> {
        self.children
            .iter()
            .flat_map(|(p, cs)| cs.iter().map(move |c| (p.clone(), c.clone())))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub state: String,
    pub city: String,
    pub trees: Vec<RelationTree>,
}

fn deterministic_order(a: &ChildParentRelation, b: &ChildParentRelation) -> std::cmp::Ordering {
    let da = a.distance.unwrap_or(f64::INFINITY);
    let db = b.distance.unwrap_or(f64::INFINITY);
    a.lag.cmp(&b.lag).then(da.total_cmp(&db)).then_with(|| a.parent_id.cmp(&b.parent_id))
}

/// Keeps one parent per child. Deterministic: smallest lag, then smallest
/// distance (absent distances last), then parent id. Random: uniform over a
/// child's candidates with a seeded generator, children visited in id order.
pub fn resolve_parents(relations: &[ChildParentRelation], pick: ParentPick) -> Vec<ChildParentRelation> {
    let mut by_child: BTreeMap<&str, Vec<&ChildParentRelation>> = BTreeMap::new();
    for r in relations {
        by_child.entry(r.child_id.as_str()).or_default().push(r);
    }
    let mut rng = match pick {
        ParentPick::Random(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        ParentPick::Deterministic => None,
    };
    let mut out = Vec::with_capacity(by_child.len());
    for (_, mut cands) in by_child {
        let chosen = match rng.as_mut() {
            Some(rng) => {
                cands.sort_by(|a, b| (a.lag, &a.parent_id).cmp(&(b.lag, &b.parent_id)));
                cands[rng.random_range(0..cands.len())]
            }
            None => cands.iter().copied().min_by(|a, b| deterministic_order(a, b)).expect("non-empty group"),
        };
        out.push(chosen.clone());
    }
    sort_relations(&mut out);
    out
}

/// Builds the trees of parent-resolved relations and groups them by the
/// root's (state, city). A weather root takes the city of its earliest child.
/// Forests are ordered by (state, city), trees by (root start, root id).
pub fn build_forest(
    relations: &[ChildParentRelation],
    entities: &[GeoEntity],
    node_cap: usize,
) -> Result<Vec<Forest>> {
    let by_id: HashMap<&str, &GeoEntity> = entities.iter().map(|e| (e.id.as_str(), e)).collect();
    let lookup = |id: &str| {
        by_id
            .get(id)
            .copied()
            .ok_or_else(|| Error::InvalidInput(format!("relation references unknown entity {id}")))
    };

    let mut parent: HashMap<&str, &str> = HashMap::new();
    let mut children: HashMap<&str, BTreeSet<&str>> = HashMap::new();
    let mut nodes: BTreeSet<&str> = BTreeSet::new();
    for r in relations {
        lookup(&r.parent_id)?;
        lookup(&r.child_id)?;
        if r.parent_id == r.child_id {
            return Err(Error::Cycle(vec![r.child_id.clone()]));
        }
        if parent.insert(&r.child_id, &r.parent_id).is_some_and(|p| p != r.parent_id) {
            return Err(Error::InvalidInput(format!("child {} has several parents; resolve first", r.child_id)));
        }
        children.entry(&r.parent_id).or_default().insert(&r.child_id);
        nodes.insert(&r.parent_id);
        nodes.insert(&r.child_id);
    }

    let mut reached: BTreeSet<&str> = BTreeSet::new();
    let mut grouped: BTreeMap<(String, String), Vec<RelationTree>> = BTreeMap::new();
    for &root in nodes.iter().filter(|n| !parent.contains_key(*n)) {
        let mut tree = RelationTree {
            root: root.to_string(),
            nodes: BTreeMap::new(),
            children: BTreeMap::new(),
            root_start: lookup(root)?.start,
            streets: BTreeSet::new(),
        };
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            reached.insert(id);
            let e = lookup(id)?;
            tree.nodes.insert(id.to_string(), e.etype);
            if let Some(t) = e.traffic_loc() {
                tree.streets.insert(t.street_name.clone());
            }
            if let Some(cs) = children.get(id) {
                tree.children.insert(id.to_string(), cs.iter().map(|c| c.to_string()).collect());
                stack.extend(cs.iter().copied());
            }
            if tree.nodes.len() > node_cap {
                return Err(Error::TreeTooLarge { root: root.to_string(), nodes: tree.nodes.len(), cap: node_cap });
            }
        }
        let key = partition_key(root, &children, &lookup)?;
        grouped.entry(key).or_default().push(tree);
    }
    if reached.len() != nodes.len() {
        let cyclic = nodes.iter().filter(|n| !reached.contains(*n)).map(|n| n.to_string()).collect();
        return Err(Error::Cycle(cyclic));
    }

    Ok(grouped
        .into_iter()
        .map(|((state, city), mut trees)| {
            trees.sort_by(|a, b| (a.root_start, &a.root).cmp(&(b.root_start, &b.root)));
            Forest { state, city, trees }
        })
        .collect())
}

fn partition_key<'a>(
    root: &str,
    children: &HashMap<&str, BTreeSet<&'a str>>,
    lookup: &impl Fn(&str) -> Result<&'a GeoEntity>,
) -> Result<(String, String)> {
    let e = lookup(root)?;
    if let Location::Traffic(t) = &e.loc {
        return Ok((t.state.clone(), t.city.clone()));
    }
    let mut earliest: Option<&GeoEntity> = None;
    for c in children.get(root).into_iter().flatten() {
        let c = lookup(c)?;
        if earliest.is_none_or(|b| (c.start, &c.id) < (b.start, &b.id)) {
            earliest = Some(c);
        }
    }
    match earliest.and_then(GeoEntity::traffic_loc) {
        Some(t) => Ok((t.state.clone(), t.city.clone())),
        None => Err(Error::Invariant(format!("weather root {root} has no traffic child"))),
    }
}

/// Maximum tree size over all forests.
pub fn max_tree_size(forests: &[Forest]) -> usize {
    forests.iter().flat_map(|f| &f.trees).map(RelationTree::len).max().unwrap_or(0)
}

#[derive(Serialize, Deserialize)]
struct TreeLine {
    state: String,
    city: String,
    root: String,
    edges: Vec<(String, String)>,
    labels: BTreeMap<String, EntityType>,
    root_start: Timestamp,
    #[serde(default)]
    streets: BTreeSet<String>,
}

/// One tree per line in forest order.
pub fn write_forests_jsonl<W: Write>(mut w: W, forests: &[Forest]) -> Result<()> {
    for f in forests {
        for t in &f.trees {
            let line = TreeLine {
                state: f.state.clone(),
                city: f.city.clone(),
                root: t.root.clone(),
                edges: t.edges(),
                labels: t.nodes.clone(),
                root_start: t.root_start,
                streets: t.streets.clone(),
            };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn read_forests_jsonl<R: Read>(r: R) -> Result<Vec<Forest>> {
    let mut grouped: BTreeMap<(String, String), Vec<RelationTree>> = BTreeMap::new();
    for line in BufReader::new(r).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let tl: TreeLine = serde_json::from_str(&line)?;
        let mut children: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (p, c) in tl.edges {
            if !tl.labels.contains_key(&p) || !tl.labels.contains_key(&c) {
                return Err(Error::InvalidInput(format!("edge {p}->{c} has an unlabeled endpoint")));
            }
            children.entry(p).or_default().insert(c);
        }
        grouped.entry((tl.state, tl.city)).or_default().push(RelationTree {
            root: tl.root,
            nodes: tl.labels,
            children,
            root_start: tl.root_start,
            streets: tl.streets,
        });
    }
    Ok(grouped.into_iter().map(|((state, city), trees)| Forest { state, city, trees }).collect())
}
