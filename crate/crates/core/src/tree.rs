//! Injection-pigeonhole decision trees and p-partition decision trees:
//! construction, branches, restriction, concatenation, representation, and
//! the list-driven builder.
//!
//! Children are ordered by edge label (holes resp. pigeons ascending, the
//! singleton edge last; blocks in lexicographic order). Branch lists inherit
//! this order, which keeps serialization and compiled certificates stable.

use crate::partial::{PartialInjection, PartialPartition, Universe};
use serde_json::{json, Value};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("query stranded: {0}")]
    Stranded(String),
    #[error("universe mismatch: {0}")]
    Universe(String),
    #[error("range exhausted: {0}")]
    HeightOverflow(String),
    #[error("graft key does not match any leaf: {0}")]
    BadGraft(String),
    #[error("invalid tree: {0}")]
    Invalid(String),
}

/// A decision tree querying pigeons ("where does i go") and holes ("which
/// pigeon, if any, fills j"). Branch labels of type `L` live at leaves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tree<L> {
    Leaf(L),
    Pigeon { pigeon: u32, edges: Vec<(u32, Tree<L>)> },
    Hole { hole: u32, pair_edges: Vec<(u32, Tree<L>)>, single: Box<Tree<L>> },
}

impl<L: Clone + Eq + std::fmt::Debug> Tree<L> {
    pub fn leaf(label: L) -> Tree<L> {
        Tree::Leaf(label)
    }

    /// Full pigeon query over `u` with every child a leaf labelled by `f`.
    pub fn pigeon_query(u: &Universe, pigeon: u32, f: impl Fn(u32) -> Tree<L>) -> Tree<L> {
        Tree::Pigeon {
            pigeon,
            edges: u.holes.iter().map(|&j| (j, f(j))).collect(),
        }
    }

    /// Full hole query over `u`.
    pub fn hole_query(
        u: &Universe,
        hole: u32,
        f: impl Fn(u32) -> Tree<L>,
        single: Tree<L>,
    ) -> Tree<L> {
        Tree::Hole {
            hole,
            pair_edges: u.pigeons.iter().map(|&i| (i, f(i))).collect(),
            single: Box::new(single),
        }
    }

    pub fn height(&self) -> usize {
        match self {
            Tree::Leaf(_) => 0,
            Tree::Pigeon { edges, .. } => {
                1 + edges.iter().map(|(_, t)| t.height()).max().unwrap_or(0)
            }
            Tree::Hole { pair_edges, single, .. } => {
                let a = pair_edges.iter().map(|(_, t)| t.height()).max().unwrap_or(0);
                1 + a.max(single.height())
            }
        }
    }

    /// Structural validity over a declared universe: full fanouts over the
    /// shrinking universe, with pigeon queries requiring at least one hole.
    pub fn validate(&self, u: &Universe) -> Result<(), TreeError> {
        match self {
            Tree::Leaf(_) => Ok(()),
            Tree::Pigeon { pigeon, edges } => {
                if !u.pigeons.contains(pigeon) {
                    return Err(TreeError::Invalid(format!("pigeon {pigeon} not in universe")));
                }
                let expect: Vec<u32> = u.holes.iter().copied().collect();
                let got: Vec<u32> = edges.iter().map(|(j, _)| *j).collect();
                if got != expect {
                    return Err(TreeError::Invalid(format!(
                        "pigeon {pigeon} edges {got:?} != holes {expect:?}"
                    )));
                }
                if edges.is_empty() {
                    return Err(TreeError::Invalid(format!("pigeon {pigeon} query with no holes")));
                }
                for (j, t) in edges {
                    let rho = PartialInjection::new([(*pigeon, *j)], []).unwrap();
                    t.validate(&u.minus(&rho))?;
                }
                Ok(())
            }
            Tree::Hole { hole, pair_edges, single } => {
                if !u.holes.contains(hole) {
                    return Err(TreeError::Invalid(format!("hole {hole} not in universe")));
                }
                let expect: Vec<u32> = u.pigeons.iter().copied().collect();
                let got: Vec<u32> = pair_edges.iter().map(|(i, _)| *i).collect();
                if got != expect {
                    return Err(TreeError::Invalid(format!(
                        "hole {hole} edges {got:?} != pigeons {expect:?}"
                    )));
                }
                for (i, t) in pair_edges {
                    let rho = PartialInjection::new([(*i, *hole)], []).unwrap();
                    t.validate(&u.minus(&rho))?;
                }
                let rho = PartialInjection::new([], [*hole]).unwrap();
                single.validate(&u.minus(&rho))
            }
        }
    }

    /// Branches in lexicographic edge order, one per leaf.
    pub fn branches(&self) -> Vec<(PartialInjection, L)> {
        let mut out = Vec::new();
        self.walk(&PartialInjection::empty(), &mut |b, l| out.push((b.clone(), l.clone())));
        out
    }

    pub fn branch_set(&self) -> BTreeSet<PartialInjection> {
        self.branches().into_iter().map(|(b, _)| b).collect()
    }

    fn walk(&self, path: &PartialInjection, f: &mut impl FnMut(&PartialInjection, &L)) {
        match self {
            Tree::Leaf(l) => f(path, l),
            Tree::Pigeon { pigeon, edges } => {
                for (j, t) in edges {
                    let step = PartialInjection::new([(*pigeon, *j)], []).unwrap();
                    t.walk(&path.union(&step).unwrap(), f);
                }
            }
            Tree::Hole { hole, pair_edges, single } => {
                for (i, t) in pair_edges {
                    let step = PartialInjection::new([(*i, *hole)], []).unwrap();
                    t.walk(&path.union(&step).unwrap(), f);
                }
                let step = PartialInjection::new([], [*hole]).unwrap();
                single.walk(&path.union(&step).unwrap(), f);
            }
        }
    }

    /// Map branch labels, with access to the branch injection.
    pub fn relabel<M: Clone + Eq + std::fmt::Debug>(
        &self,
        f: &impl Fn(&PartialInjection, &L) -> M,
    ) -> Tree<M> {
        fn go<L: Clone + Eq + std::fmt::Debug, M: Clone + Eq + std::fmt::Debug>(
            t: &Tree<L>,
            path: &PartialInjection,
            f: &impl Fn(&PartialInjection, &L) -> M,
        ) -> Tree<M> {
            match t {
                Tree::Leaf(l) => Tree::Leaf(f(path, l)),
                Tree::Pigeon { pigeon, edges } => Tree::Pigeon {
                    pigeon: *pigeon,
                    edges: edges
                        .iter()
                        .map(|(j, c)| {
                            let step = PartialInjection::new([(*pigeon, *j)], []).unwrap();
                            (*j, go(c, &path.union(&step).unwrap(), f))
                        })
                        .collect(),
                },
                Tree::Hole { hole, pair_edges, single } => Tree::Hole {
                    hole: *hole,
                    pair_edges: pair_edges
                        .iter()
                        .map(|(i, c)| {
                            let step = PartialInjection::new([(*i, *hole)], []).unwrap();
                            (*i, go(c, &path.union(&step).unwrap(), f))
                        })
                        .collect(),
                    single: {
                        let step = PartialInjection::new([], [*hole]).unwrap();
                        Box::new(go(single, &path.union(&step).unwrap(), f))
                    },
                },
            }
        }
        go(self, &PartialInjection::empty(), f)
    }

    pub fn strip(&self) -> Tree<()> {
        self.relabel(&|_, _| ())
    }

    /// Restriction by a compatible partial injection: edges conflicting with
    /// ρ are deleted, edges contained in ρ are contracted (keeping the child),
    /// and the component of the root is returned. Errors when a query node
    /// would lose every child, which is exactly when the height bound of the
    /// restriction precondition was violated.
    pub fn restrict(&self, rho: &PartialInjection) -> Result<Tree<L>, TreeError> {
        match self {
            Tree::Leaf(l) => Ok(Tree::Leaf(l.clone())),
            Tree::Pigeon { pigeon, edges } => {
                if let Some(j0) = rho.hole_of(*pigeon) {
                    // Contract the matching edge; all siblings conflict.
                    let step = PartialInjection::new([(*pigeon, j0)], []).unwrap();
                    let rest = rho.subtract(&step).map_err(|_| {
                        TreeError::Universe(format!("restriction not compatible at pigeon {pigeon}"))
                    })?;
                    match edges.iter().find(|(j, _)| *j == j0) {
                        Some((_, child)) => child.restrict(&rest),
                        None => Err(TreeError::Stranded(format!(
                            "pigeon {pigeon}: hole {j0} of the restriction is not available"
                        ))),
                    }
                } else {
                    let ran = rho.ran();
                    let mut kept = Vec::new();
                    for (j, child) in edges {
                        if ran.contains(j) {
                            continue;
                        }
                        kept.push((*j, child.restrict(rho)?));
                    }
                    if kept.is_empty() {
                        return Err(TreeError::Stranded(format!(
                            "pigeon {pigeon} query lost all edges"
                        )));
                    }
                    Ok(Tree::Pigeon { pigeon: *pigeon, edges: kept })
                }
            }
            Tree::Hole { hole, pair_edges, single } => {
                if rho.singles().contains(hole) {
                    let step = PartialInjection::new([], [*hole]).unwrap();
                    let rest = rho.subtract(&step).unwrap();
                    return single.restrict(&rest);
                }
                if let Some(i0) = rho.pigeon_of(*hole) {
                    let step = PartialInjection::new([(i0, *hole)], []).unwrap();
                    let rest = rho.subtract(&step).unwrap();
                    return match pair_edges.iter().find(|(i, _)| *i == i0) {
                        Some((_, child)) => child.restrict(&rest),
                        None => Err(TreeError::Stranded(format!(
                            "hole {hole}: pigeon {i0} of the restriction is not available"
                        ))),
                    };
                }
                let dom = rho.dom();
                let mut kept = Vec::new();
                for (i, child) in pair_edges {
                    if dom.contains(i) {
                        continue;
                    }
                    kept.push((*i, child.restrict(rho)?));
                }
                Ok(Tree::Hole {
                    hole: *hole,
                    pair_edges: kept,
                    single: Box::new(single.restrict(rho)?),
                })
            }
        }
    }

    /// Concatenate `grafts[b]` at the leaf of branch `b` for each key. Each
    /// key must match a leaf path; the grafted root's label wins.
    pub fn concat(
        &self,
        grafts: &BTreeMap<PartialInjection, Tree<L>>,
    ) -> Result<Tree<L>, TreeError> {
        fn go<L: Clone + Eq + std::fmt::Debug>(
            t: &Tree<L>,
            path: &PartialInjection,
            grafts: &BTreeMap<PartialInjection, Tree<L>>,
            used: &mut BTreeSet<PartialInjection>,
        ) -> Tree<L> {
            match t {
                Tree::Leaf(_) => {
                    if let Some(g) = grafts.get(path) {
                        used.insert(path.clone());
                        g.clone()
                    } else {
                        t.clone()
                    }
                }
                Tree::Pigeon { pigeon, edges } => Tree::Pigeon {
                    pigeon: *pigeon,
                    edges: edges
                        .iter()
                        .map(|(j, c)| {
                            let step = PartialInjection::new([(*pigeon, *j)], []).unwrap();
                            (*j, go(c, &path.union(&step).unwrap(), grafts, used))
                        })
                        .collect(),
                },
                Tree::Hole { hole, pair_edges, single } => Tree::Hole {
                    hole: *hole,
                    pair_edges: pair_edges
                        .iter()
                        .map(|(i, c)| {
                            let step = PartialInjection::new([(*i, *hole)], []).unwrap();
                            (*i, go(c, &path.union(&step).unwrap(), grafts, used))
                        })
                        .collect(),
                    single: {
                        let step = PartialInjection::new([], [*hole]).unwrap();
                        Box::new(go(single, &path.union(&step).unwrap(), grafts, used))
                    },
                },
            }
        }
        let mut used = BTreeSet::new();
        let out = go(self, &PartialInjection::empty(), grafts, &mut used);
        for key in grafts.keys() {
            if !used.contains(key) {
                return Err(TreeError::BadGraft(key.to_string()));
            }
        }
        Ok(out)
    }

    /// `T * U`: graft `U^b` under every branch `b` of `T`.
    pub fn concat_full(&self, other: &Tree<L>) -> Result<Tree<L>, TreeError> {
        let mut grafts = BTreeMap::new();
        for (b, _) in self.branches() {
            grafts.insert(b.clone(), other.restrict(&b)?);
        }
        self.concat(&grafts)
    }

    /// The subtree rooted where the path with edge set `prefix` ends.
    pub fn subtree_at(&self, prefix: &PartialInjection) -> Result<&Tree<L>, TreeError> {
        if prefix.is_empty() {
            return Ok(self);
        }
        match self {
            Tree::Leaf(_) => Err(TreeError::BadGraft(format!(
                "prefix {prefix} extends beyond a leaf"
            ))),
            Tree::Pigeon { pigeon, edges } => {
                let j0 = prefix.hole_of(*pigeon).ok_or_else(|| {
                    TreeError::BadGraft(format!("prefix {prefix} skips pigeon {pigeon}"))
                })?;
                let step = PartialInjection::new([(*pigeon, j0)], []).unwrap();
                let rest = prefix
                    .subtract(&step)
                    .map_err(|_| TreeError::BadGraft(format!("prefix {prefix} inconsistent")))?;
                match edges.iter().find(|(j, _)| *j == j0) {
                    Some((_, c)) => c.subtree_at(&rest),
                    None => Err(TreeError::BadGraft(format!("edge <{pigeon},{j0}> missing"))),
                }
            }
            Tree::Hole { hole, pair_edges, single } => {
                if prefix.singles().contains(hole) {
                    let step = PartialInjection::new([], [*hole]).unwrap();
                    return single.subtree_at(&prefix.subtract(&step).unwrap());
                }
                let i0 = prefix.pigeon_of(*hole).ok_or_else(|| {
                    TreeError::BadGraft(format!("prefix {prefix} skips hole {hole}"))
                })?;
                let step = PartialInjection::new([(i0, *hole)], []).unwrap();
                let rest = prefix.subtract(&step).unwrap();
                match pair_edges.iter().find(|(i, _)| *i == i0) {
                    Some((_, c)) => c.subtree_at(&rest),
                    None => Err(TreeError::BadGraft(format!("edge <{i0},{hole}> missing"))),
                }
            }
        }
    }
}

impl<L: Clone + Eq + std::fmt::Debug + std::fmt::Display> Tree<L> {
    /// Nested-record serialization with the query, the labelled edges, and
    /// leaf labels.
    pub fn to_json(&self) -> Value {
        match self {
            Tree::Leaf(l) => json!({ "leafLabel": l.to_string() }),
            Tree::Pigeon { pigeon, edges } => json!({
                "query": { "pigeon": pigeon },
                "edges": edges
                    .iter()
                    .map(|(j, c)| json!({ "label": [pigeon, j], "child": c.to_json() }))
                    .collect::<Vec<_>>(),
            }),
            Tree::Hole { hole, pair_edges, single } => {
                let mut edges: Vec<Value> = pair_edges
                    .iter()
                    .map(|(i, c)| json!({ "label": [i, hole], "child": c.to_json() }))
                    .collect();
                edges.push(json!({ "label": [hole], "child": single.to_json() }));
                json!({ "query": { "hole": hole }, "edges": edges })
            }
        }
    }
}

impl Tree<bool> {
    pub fn complement(&self) -> Tree<bool> {
        self.relabel(&|_, l| !*l)
    }

    pub fn branches_labeled(&self, label: bool) -> Vec<PartialInjection> {
        self.branches()
            .into_iter()
            .filter(|(_, l)| *l == label)
            .map(|(b, _)| b)
            .collect()
    }

    /// Condition for a labelled tree to represent a set of partial
    /// injections: every 1-branch extends some member and every 0-branch
    /// conflicts with every member.
    pub fn represents(&self, family: &BTreeSet<PartialInjection>) -> bool {
        for (b, l) in self.branches() {
            if l {
                if !family.iter().any(|s| b.extends(s)) {
                    return false;
                }
            } else if family.iter().any(|s| !b.conflicts(s)) {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sup {
    Pigeon(u32),
    Hole(u32),
}

/// The recursive list-driven builder: query the support of the first
/// remaining map, then recurse on the compatible residues below every branch.
/// The result represents the input list as a set.
pub fn tree_from_list(
    u: &Universe,
    list: &[PartialInjection],
) -> Result<Tree<bool>, TreeError> {
    if list.is_empty() {
        return Ok(Tree::Leaf(false));
    }
    if list.iter().any(|s| s.is_empty()) {
        return Ok(Tree::Leaf(true));
    }
    let sigma = &list[0];
    let mut support: Vec<Sup> = sigma.dom().into_iter().map(Sup::Pigeon).collect();
    support.extend(sigma.ran().into_iter().map(Sup::Hole));

    fn phase(
        u: &Universe,
        support: &[Sup],
        list: &[PartialInjection],
        path: &PartialInjection,
    ) -> Result<Tree<bool>, TreeError> {
        let mut idx = 0;
        while idx < support.len() {
            match support[idx] {
                Sup::Pigeon(p) if u.pigeons.contains(&p) => {
                    if u.holes.is_empty() {
                        return Err(TreeError::HeightOverflow(format!(
                            "no holes left to query pigeon {p}"
                        )));
                    }
                    let mut edges = Vec::new();
                    for &j in &u.holes {
                        let step = PartialInjection::new([(p, j)], []).unwrap();
                        let child = phase(
                            &u.minus(&step),
                            &support[idx + 1..],
                            list,
                            &path.union(&step).map_err(|_| {
                                TreeError::Universe("path incompatibility".into())
                            })?,
                        )?;
                        edges.push((j, child));
                    }
                    return Ok(Tree::Pigeon { pigeon: p, edges });
                }
                Sup::Hole(h) if u.holes.contains(&h) => {
                    let mut pair_edges = Vec::new();
                    for &i in &u.pigeons {
                        let step = PartialInjection::new([(i, h)], []).unwrap();
                        let child = phase(
                            &u.minus(&step),
                            &support[idx + 1..],
                            list,
                            &path.union(&step).unwrap(),
                        )?;
                        pair_edges.push((i, child));
                    }
                    let step = PartialInjection::new([], [h]).unwrap();
                    let single = phase(
                        &u.minus(&step),
                        &support[idx + 1..],
                        list,
                        &path.union(&step).unwrap(),
                    )?;
                    return Ok(Tree::Hole { hole: h, pair_edges, single: Box::new(single) });
                }
                _ => idx += 1,
            }
        }
        // Phase finished: recurse on the residues.
        let residues: Vec<PartialInjection> = list
            .iter()
            .filter(|s| s.compatible(path))
            .map(|s| s.subtract(path).unwrap())
            .collect();
        tree_from_list(u, &residues)
    }

    phase(u, &support, list, &PartialInjection::empty())
}

// ---------------------------------------------------------------------------
// p-trees
// ---------------------------------------------------------------------------

/// A p-tree over universe [M] with block size p: queries ask which block
/// contains a given element; edges carry disjoint p-subsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PTree<L> {
    Leaf(L),
    Query { element: u32, edges: Vec<(Vec<u32>, PTree<L>)> },
}

/// Ambient data for p-trees: the universe size and the block size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PContext {
    pub m: u32,
    pub p: u32,
}

impl PContext {
    pub fn all_blocks_with(&self, v: u32, used: &BTreeSet<u32>) -> Vec<Vec<u32>> {
        let free: Vec<u32> = (1..=self.m).filter(|x| !used.contains(x) && *x != v).collect();
        let mut out = Vec::new();
        let k = self.p as usize - 1;
        let mut idxs: Vec<usize> = (0..k).collect();
        if free.len() < k {
            return out;
        }
        loop {
            let mut b: Vec<u32> = idxs.iter().map(|&i| free[i]).collect();
            b.push(v);
            b.sort_unstable();
            out.push(b);
            // next combination
            let mut i = k;
            loop {
                if i == 0 {
                    out.sort();
                    return out;
                }
                i -= 1;
                if idxs[i] + 1 <= free.len() - (k - i) {
                    idxs[i] += 1;
                    for j in i + 1..k {
                        idxs[j] = idxs[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }
}

impl<L: Clone + Eq + std::fmt::Debug> PTree<L> {
    pub fn leaf(label: L) -> PTree<L> {
        PTree::Leaf(label)
    }

    pub fn height(&self) -> usize {
        match self {
            PTree::Leaf(_) => 0,
            PTree::Query { edges, .. } => {
                1 + edges.iter().map(|(_, t)| t.height()).max().unwrap_or(0)
            }
        }
    }

    pub fn validate(&self, ctx: &PContext, used: &BTreeSet<u32>) -> Result<(), TreeError> {
        match self {
            PTree::Leaf(_) => Ok(()),
            PTree::Query { element, edges } => {
                if *element < 1 || *element > ctx.m || used.contains(element) {
                    return Err(TreeError::Invalid(format!("element {element} unavailable")));
                }
                let expect = ctx.all_blocks_with(*element, used);
                let got: Vec<Vec<u32>> = edges.iter().map(|(b, _)| b.clone()).collect();
                if got != expect {
                    return Err(TreeError::Invalid(format!(
                        "query {element}: edges {got:?} != expected {expect:?}"
                    )));
                }
                if edges.is_empty() {
                    return Err(TreeError::Invalid(format!("query {element} has no blocks")));
                }
                for (b, t) in edges {
                    let mut used2 = used.clone();
                    used2.extend(b.iter().copied());
                    t.validate(ctx, &used2)?;
                }
                Ok(())
            }
        }
    }

    pub fn branches(&self) -> Vec<(PartialPartition, L)> {
        let mut out = Vec::new();
        self.walk(&PartialPartition::empty(), &mut |b, l| out.push((b.clone(), l.clone())));
        out
    }

    pub fn branch_set(&self) -> BTreeSet<PartialPartition> {
        self.branches().into_iter().map(|(b, _)| b).collect()
    }

    fn walk(&self, path: &PartialPartition, f: &mut impl FnMut(&PartialPartition, &L)) {
        match self {
            PTree::Leaf(l) => f(path, l),
            PTree::Query { edges, .. } => {
                for (b, t) in edges {
                    let step = PartialPartition::new([b.clone()]).unwrap();
                    t.walk(&path.union(&step).unwrap(), f);
                }
            }
        }
    }

    pub fn relabel<M: Clone + Eq + std::fmt::Debug>(
        &self,
        f: &impl Fn(&PartialPartition, &L) -> M,
    ) -> PTree<M> {
        fn go<L: Clone + Eq + std::fmt::Debug, M: Clone + Eq + std::fmt::Debug>(
            t: &PTree<L>,
            path: &PartialPartition,
            f: &impl Fn(&PartialPartition, &L) -> M,
        ) -> PTree<M> {
            match t {
                PTree::Leaf(l) => PTree::Leaf(f(path, l)),
                PTree::Query { element, edges } => PTree::Query {
                    element: *element,
                    edges: edges
                        .iter()
                        .map(|(b, c)| {
                            let step = PartialPartition::new([b.clone()]).unwrap();
                            (b.clone(), go(c, &path.union(&step).unwrap(), f))
                        })
                        .collect(),
                },
            }
        }
        go(self, &PartialPartition::empty(), f)
    }

    pub fn strip(&self) -> PTree<()> {
        self.relabel(&|_, _| ())
    }

    pub fn restrict(&self, sigma: &PartialPartition) -> Result<PTree<L>, TreeError> {
        match self {
            PTree::Leaf(l) => Ok(PTree::Leaf(l.clone())),
            PTree::Query { element, edges } => {
                if let Some(b0) = sigma.blocks().iter().find(|b| b.contains(element)) {
                    let step = PartialPartition::new([b0.clone()]).unwrap();
                    let rest = sigma.subtract(&step).unwrap();
                    return match edges.iter().find(|(b, _)| b == b0) {
                        Some((_, child)) => child.restrict(&rest),
                        None => Err(TreeError::Stranded(format!(
                            "query {element}: block of the restriction unavailable"
                        ))),
                    };
                }
                let supp = sigma.support();
                let mut kept = Vec::new();
                for (b, child) in edges {
                    if b.iter().any(|x| supp.contains(x)) {
                        continue;
                    }
                    kept.push((b.clone(), child.restrict(sigma)?));
                }
                if kept.is_empty() {
                    return Err(TreeError::Stranded(format!("query {element} lost all edges")));
                }
                Ok(PTree::Query { element: *element, edges: kept })
            }
        }
    }

    pub fn concat(
        &self,
        grafts: &BTreeMap<PartialPartition, PTree<L>>,
    ) -> Result<PTree<L>, TreeError> {
        fn go<L: Clone + Eq + std::fmt::Debug>(
            t: &PTree<L>,
            path: &PartialPartition,
            grafts: &BTreeMap<PartialPartition, PTree<L>>,
            used: &mut BTreeSet<PartialPartition>,
        ) -> PTree<L> {
            match t {
                PTree::Leaf(_) => {
                    if let Some(g) = grafts.get(path) {
                        used.insert(path.clone());
                        g.clone()
                    } else {
                        t.clone()
                    }
                }
                PTree::Query { element, edges } => PTree::Query {
                    element: *element,
                    edges: edges
                        .iter()
                        .map(|(b, c)| {
                            let step = PartialPartition::new([b.clone()]).unwrap();
                            (b.clone(), go(c, &path.union(&step).unwrap(), grafts, used))
                        })
                        .collect(),
                },
            }
        }
        let mut used = BTreeSet::new();
        let out = go(self, &PartialPartition::empty(), grafts, &mut used);
        for key in grafts.keys() {
            if !used.contains(key) {
                return Err(TreeError::BadGraft(format!("{key}")));
            }
        }
        Ok(out)
    }

    pub fn concat_full(&self, other: &PTree<L>) -> Result<PTree<L>, TreeError> {
        let mut grafts = BTreeMap::new();
        for (b, _) in self.branches() {
            grafts.insert(b.clone(), other.restrict(&b)?);
        }
        self.concat(&grafts)
    }

    pub fn subtree_at(&self, prefix: &PartialPartition) -> Result<&PTree<L>, TreeError> {
        if prefix.is_empty() {
            return Ok(self);
        }
        match self {
            PTree::Leaf(_) => Err(TreeError::BadGraft(format!("prefix {prefix} beyond leaf"))),
            PTree::Query { element, edges } => {
                let b0 = prefix
                    .blocks()
                    .iter()
                    .find(|b| b.contains(element))
                    .cloned()
                    .ok_or_else(|| {
                        TreeError::BadGraft(format!("prefix {prefix} skips query {element}"))
                    })?;
                let step = PartialPartition::new([b0.clone()]).unwrap();
                let rest = prefix.subtract(&step).unwrap();
                match edges.iter().find(|(b, _)| *b == b0) {
                    Some((_, c)) => c.subtree_at(&rest),
                    None => Err(TreeError::BadGraft(format!("edge {b0:?} missing"))),
                }
            }
        }
    }
}

impl PTree<bool> {
    pub fn complement(&self) -> PTree<bool> {
        self.relabel(&|_, l| !*l)
    }

    pub fn branches_labeled(&self, label: bool) -> Vec<PartialPartition> {
        self.branches()
            .into_iter()
            .filter(|(_, l)| *l == label)
            .map(|(b, _)| b)
            .collect()
    }

    pub fn represents(&self, family: &BTreeSet<PartialPartition>) -> bool {
        for (b, l) in self.branches() {
            if l {
                if !family.iter().any(|s| b.extends(s)) {
                    return false;
                }
            } else if family.iter().any(|s| !b.conflicts(s)) {
                return false;
            }
        }
        true
    }
}

/// p-tree analogue of the list-driven builder.
pub fn p_tree_from_list(
    ctx: &PContext,
    used: &BTreeSet<u32>,
    list: &[PartialPartition],
) -> Result<PTree<bool>, TreeError> {
    if list.is_empty() {
        return Ok(PTree::Leaf(false));
    }
    if list.iter().any(|s| s.is_empty()) {
        return Ok(PTree::Leaf(true));
    }
    let sigma = &list[0];
    let support: Vec<u32> = sigma.support().into_iter().collect();

    fn phase(
        ctx: &PContext,
        used: &BTreeSet<u32>,
        support: &[u32],
        list: &[PartialPartition],
        path: &PartialPartition,
    ) -> Result<PTree<bool>, TreeError> {
        let mut idx = 0;
        while idx < support.len() {
            let v = support[idx];
            if !used.contains(&v) {
                let blocks = ctx.all_blocks_with(v, used);
                if blocks.is_empty() {
                    return Err(TreeError::HeightOverflow(format!(
                        "universe exhausted querying element {v}"
                    )));
                }
                let mut edges = Vec::new();
                for b in blocks {
                    let step = PartialPartition::new([b.clone()]).unwrap();
                    let mut used2 = used.clone();
                    used2.extend(b.iter().copied());
                    let child = phase(
                        ctx,
                        &used2,
                        &support[idx + 1..],
                        list,
                        &path.union(&step).unwrap(),
                    )?;
                    edges.push((b, child));
                }
                return Ok(PTree::Query { element: v, edges });
            }
            idx += 1;
        }
        let residues: Vec<PartialPartition> = list
            .iter()
            .filter(|s| s.compatible(path))
            .map(|s| s.subtract(path).unwrap())
            .collect();
        p_tree_from_list(ctx, used, &residues)
    }

    phase(ctx, used, &support, list, &PartialPartition::empty())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pi(pairs: &[(u32, u32)], singles: &[u32]) -> PartialInjection {
        PartialInjection::new(pairs.iter().copied(), singles.iter().copied()).unwrap()
    }

    #[test]
    fn leaf_branches() {
        let t: Tree<bool> = Tree::Leaf(true);
        let br = t.branches();
        assert_eq!(br.len(), 1);
        assert!(br[0].0.is_empty());
    }

    #[test]
    fn pigeon_query_branches() {
        let u = Universe::new(1, 2);
        let t = Tree::pigeon_query(&u, 1, |_| Tree::Leaf(()));
        let br = t.branches();
        assert_eq!(br.len(), 2);
        assert_eq!(br[0].0, pi(&[(1, 1)], &[]));
        assert_eq!(br[1].0, pi(&[(1, 2)], &[]));
        t.validate(&u).unwrap();
    }

    #[test]
    fn hole_query_branches() {
        let u = Universe::new(2, 1);
        let t = Tree::hole_query(&u, 1, |_| Tree::Leaf(()), Tree::Leaf(()));
        let br = t.branches();
        assert_eq!(br.len(), 3);
        assert_eq!(br[0].0, pi(&[(1, 1)], &[]));
        assert_eq!(br[1].0, pi(&[(2, 1)], &[]));
        assert_eq!(br[2].0, pi(&[], &[1]));
        t.validate(&u).unwrap();
    }

    #[test]
    fn restrict_contracts_and_deletes() {
        let u = Universe::new(2, 2);
        let t = Tree::pigeon_query(&u, 1, Tree::Leaf);
        // Contracting the queried pigeon's own pair reaches the leaf.
        let r = t.restrict(&pi(&[(1, 1)], &[])).unwrap();
        assert_eq!(r, Tree::Leaf(1));
        // A restriction touching pigeon 2 deletes the shared-hole edge.
        let r2 = t.restrict(&pi(&[(2, 1)], &[])).unwrap();
        assert_eq!(r2.branches().len(), 1);
        assert_eq!(r2.branches()[0].0, pi(&[(1, 2)], &[]));
        // Leaves restrict to themselves.
        let leaf: Tree<u32> = Tree::Leaf(7);
        assert_eq!(leaf.restrict(&pi(&[(1, 1)], &[])).unwrap(), Tree::Leaf(7));
    }

    #[test]
    fn concat_identities() {
        let u = Universe::new(2, 2);
        let t = Tree::pigeon_query(&u, 1, |_| Tree::Leaf(0u32));
        assert_eq!(t.concat(&BTreeMap::new()).unwrap(), t);
        // T * leaf = T; leaf * U = U.
        let leaf = Tree::Leaf(0u32);
        assert_eq!(t.concat_full(&leaf).unwrap(), t);
        assert_eq!(leaf.concat_full(&t).unwrap(), t);
    }

    #[test]
    fn tree_from_list_base_cases() {
        let u = Universe::new(2, 2);
        assert_eq!(tree_from_list(&u, &[]).unwrap(), Tree::Leaf(false));
        assert_eq!(
            tree_from_list(&u, &[PartialInjection::empty()]).unwrap(),
            Tree::Leaf(true)
        );
    }

    #[test]
    fn tree_from_list_represents_input() {
        let u = Universe::new(2, 2);
        let f = vec![pi(&[(1, 1)], &[])];
        let t = tree_from_list(&u, &f).unwrap();
        t.validate(&u).unwrap();
        let fam: BTreeSet<_> = f.into_iter().collect();
        assert!(t.represents(&fam));
    }

    #[test]
    fn branch_pairwise_incompatibility() {
        let u = Universe::new(3, 2);
        let f = vec![pi(&[(1, 1)], &[]), pi(&[(2, 2)], &[]), pi(&[], &[1])];
        let t = tree_from_list(&u, &f).unwrap();
        let brs = t.branches();
        for (i, (a, _)) in brs.iter().enumerate() {
            for (b, _) in brs.iter().skip(i + 1) {
                assert!(a.conflicts(b), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn p_tree_basics() {
        let ctx = PContext { m: 3, p: 2 };
        let t = PTree::Query {
            element: 1,
            edges: ctx
                .all_blocks_with(1, &BTreeSet::new())
                .into_iter()
                .map(|b| (b, PTree::Leaf(())))
                .collect(),
        };
        t.validate(&ctx, &BTreeSet::new()).unwrap();
        let br = t.branches();
        assert_eq!(br.len(), 2);
        assert_eq!(br[0].0, PartialPartition::new([vec![1, 2]]).unwrap());
        assert_eq!(br[1].0, PartialPartition::new([vec![1, 3]]).unwrap());
    }

    #[test]
    fn p_tree_from_list_represents() {
        let ctx = PContext { m: 4, p: 2 };
        let f = vec![PartialPartition::new([vec![1, 2]]).unwrap()];
        let t = p_tree_from_list(&ctx, &BTreeSet::new(), &f).unwrap();
        let fam: BTreeSet<_> = f.into_iter().collect();
        assert!(t.represents(&fam));
    }

    #[test]
    fn subtree_navigation() {
        let u = Universe::new(2, 2);
        let inner = Tree::pigeon_query(&Universe::new(2, 2).minus(&pi(&[(1, 1)], &[])), 2, |_| {
            Tree::Leaf(9u32)
        });
        let t = Tree::Pigeon {
            pigeon: 1,
            edges: vec![(1, inner.clone()), (2, Tree::Leaf(0))],
        };
        t.validate(&u).unwrap_or(());
        let s = t.subtree_at(&pi(&[(1, 1)], &[])).unwrap();
        assert_eq!(*s, inner);
    }
}
