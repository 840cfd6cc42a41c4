//! Certificate compilers: branch-sum proofs for decision trees, the
//! evaluation-to-refutation pipeline for the uniform counting principle, and
//! the two extraction engines that turn falsified oddtown / Fisher-inequality
//! instances into polynomial families with certificates over a prime field.

use crate::eval::{EvalError, Evaluation, FregeProof, Justification, PEvaluation, UcpAxiom};
use crate::formula::{Formula, Var};
use crate::partial::{PartialInjection, PartialPartition, Universe};
use crate::poly::{
    is_prime, monomial_of, monomial_of_partition, substitute_u, system_neg_count,
    system_neg_injstar, verify_ns, Degree, Monomial, NSProof, NsError, Polynomial, RingSpec,
};
use crate::tree::{PContext, PTree, Tree, TreeError};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, thiserror::Error)]
pub enum CompileError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("observation failed: {0}")]
    Observation(String),
    #[error("family invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Partial(#[from] crate::partial::PartialError),
    #[error(transparent)]
    Ns(#[from] NsError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

// ---------------------------------------------------------------------------
// Branch-sum certificates
// ---------------------------------------------------------------------------

pub type Coeffs = BTreeMap<String, Polynomial>;

fn coeffs_add(into: &mut Coeffs, name: &str, ring: RingSpec, mono: &Monomial, c: i64) {
    let entry = into
        .entry(name.to_string())
        .or_insert_with(|| Polynomial::zero(ring));
    entry.add_term(mono, c);
    if entry.is_zero() {
        into.remove(name);
    }
}

pub fn coeffs_merge(into: &mut Coeffs, from: &Coeffs, sign: i64) {
    for (name, p) in from {
        let entry = into
            .entry(name.clone())
            .or_insert_with(|| Polynomial::zero(p.ring));
        *entry = entry.add(&p.scale(sign));
    }
    into.retain(|_, p| !p.is_zero());
}

fn coeffs_mul(c: &Coeffs, by: &Polynomial) -> Coeffs {
    c.iter()
        .map(|(n, p)| (n.clone(), p.mul(by)))
        .filter(|(_, p)| !p.is_zero())
        .collect()
}

/// Telescoping certificate for an injection tree: coefficients proving
/// `Σ_{α ∈ br(T)} x_{base ∪ α} = x_base` from the inj* system. At a pigeon
/// query the totality row is multiplied by the path monomial; at a hole
/// query the hole row is used; edges missing relative to the full system are
/// repaired through the product and boolean rows.
pub fn inj_tree_sum_coeffs<L: Clone + Eq + std::fmt::Debug>(
    tree: &Tree<L>,
    base: &PartialInjection,
    pigeons: u32,
    ring: RingSpec,
) -> Result<Coeffs, CompileError> {
    let mut coeffs = Coeffs::new();
    walk_inj(tree, base, pigeons, ring, &mut coeffs)?;
    Ok(coeffs)
}

fn inj_name(j: u32, a: u32, b: u32) -> String {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    format!("inj[{j};{lo},{hi}]")
}

fn func_name(i: u32, a: u32, b: u32) -> String {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    format!("func[{i};{lo},{hi}]")
}

fn walk_inj<L: Clone + Eq + std::fmt::Debug>(
    tree: &Tree<L>,
    path: &PartialInjection,
    pigeons: u32,
    ring: RingSpec,
    coeffs: &mut Coeffs,
) -> Result<(), CompileError> {
    match tree {
        Tree::Leaf(_) => Ok(()),
        Tree::Pigeon { pigeon, edges } => {
            let x_path = monomial_of(path);
            coeffs_add(coeffs, &format!("tot[{pigeon}]"), ring, &x_path, 1);
            // Holes consumed by the path are absent from the query; subtract
            // their row terms through the product rows.
            for j in path.ran() {
                if let Some(i2) = path.pigeon_of(j) {
                    let step = PartialInjection::new([(i2, j)], []).unwrap();
                    let rest = path.subtract(&step).unwrap();
                    coeffs_add(coeffs, &inj_name(j, *pigeon, i2), ring, &monomial_of(&rest), -1);
                } else {
                    // Singleton hole: u_j x_{ij} rewrites through the hole
                    // row, the same-hole products, and the boolean row.
                    let step = PartialInjection::new([], [j]).unwrap();
                    let rest = path.subtract(&step).unwrap();
                    let rest_m = monomial_of(&rest);
                    let xij =
                        Monomial::var(crate::poly::PolyVar::X { pigeon: *pigeon, hole: j });
                    coeffs_add(coeffs, &format!("hole[{j}]"), ring, &rest_m.mul(&xij), -1);
                    for i2 in 1..=pigeons {
                        if i2 != *pigeon {
                            coeffs_add(coeffs, &inj_name(j, *pigeon, i2), ring, &rest_m, 1);
                        }
                    }
                    coeffs_add(coeffs, &format!("bool[{pigeon},{j}]"), ring, &rest_m, 1);
                }
            }
            for (j, child) in edges {
                let step = PartialInjection::new([(*pigeon, *j)], []).unwrap();
                walk_inj(child, &path.union(&step).unwrap(), pigeons, ring, coeffs)?;
            }
            Ok(())
        }
        Tree::Hole { hole, pair_edges, single } => {
            let x_path = monomial_of(path);
            coeffs_add(coeffs, &format!("hole[{hole}]"), ring, &x_path, 1);
            for i in path.dom() {
                let j2 = path.hole_of(i).unwrap();
                let step = PartialInjection::new([(i, j2)], []).unwrap();
                let rest = path.subtract(&step).unwrap();
                coeffs_add(coeffs, &func_name(i, *hole, j2), ring, &monomial_of(&rest), -1);
            }
            for (i, child) in pair_edges {
                let step = PartialInjection::new([(*i, *hole)], []).unwrap();
                walk_inj(child, &path.union(&step).unwrap(), pigeons, ring, coeffs)?;
            }
            let step = PartialInjection::new([], [*hole]).unwrap();
            walk_inj(single, &path.union(&step).unwrap(), pigeons, ring, coeffs)
        }
    }
}

/// Sum of branch monomials as a polynomial.
pub fn branch_sum_poly<L: Clone + Eq + std::fmt::Debug>(
    tree: &Tree<L>,
    ring: RingSpec,
) -> Polynomial {
    let mut p = Polynomial::zero(ring);
    for (b, _) in tree.branches() {
        p.add_term(&monomial_of(&b), 1);
    }
    p
}

/// NS proof of `Σ_{α ∈ br(T)} x_α = 1` from ¬inj*PHP with degree bounded by
/// the height of the tree.
pub fn branch_sum_proof<L: Clone + Eq + std::fmt::Debug>(
    tree: &Tree<L>,
    pigeons: u32,
    holes: u32,
    ring: RingSpec,
) -> Result<NSProof, CompileError> {
    if tree.height() > holes as usize {
        return Err(CompileError::Precondition(format!(
            "height {} exceeds the hole count {holes}",
            tree.height()
        )));
    }
    let system = system_neg_injstar(pigeons, holes, ring)?;
    let coeffs = inj_tree_sum_coeffs(tree, &PartialInjection::empty(), pigeons, ring)?;
    let proof = NSProof {
        system,
        coeffs,
        g1: branch_sum_poly(tree, ring),
        g2: Polynomial::one(ring),
    };
    let rep = verify_ns(&proof)?;
    if !rep.valid {
        return Err(CompileError::Invariant("branch-sum proof failed to verify".into()));
    }
    Ok(proof)
}

/// p-tree analogue over ¬Count: cover rows at element queries, overlap rows
/// repairing the blocks excluded by the path.
pub fn p_tree_sum_coeffs<L: Clone + Eq + std::fmt::Debug>(
    tree: &PTree<L>,
    base: &PartialPartition,
    ctx: &PContext,
    ring: RingSpec,
) -> Result<Coeffs, CompileError> {
    let mut coeffs = Coeffs::new();
    walk_p(tree, base, ctx, ring, &mut coeffs)?;
    Ok(coeffs)
}

fn overlap_name(a: &[u32], b: &[u32]) -> String {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    format!("overlap[{:?};{:?}]", lo, hi)
}

fn walk_p<L: Clone + Eq + std::fmt::Debug>(
    tree: &PTree<L>,
    path: &PartialPartition,
    ctx: &PContext,
    ring: RingSpec,
    coeffs: &mut Coeffs,
) -> Result<(), CompileError> {
    match tree {
        PTree::Leaf(_) => Ok(()),
        PTree::Query { element, edges } => {
            let x_path = monomial_of_partition(path);
            coeffs_add(coeffs, &format!("cover[{element}]"), ring, &x_path, 1);
            // Blocks through the element that intersect the path are absent;
            // repair through the overlap rows.
            let supp = path.support();
            for b in ctx.all_blocks_with(*element, &BTreeSet::new()) {
                if b.iter().any(|x| supp.contains(x)) {
                    let clash = path
                        .blocks()
                        .iter()
                        .find(|e| crate::principles::blocks_conflict(e, &b))
                        .cloned()
                        .ok_or_else(|| {
                            CompileError::Invariant("path block bookkeeping broken".into())
                        })?;
                    let step = PartialPartition::new([clash.clone()]).unwrap();
                    let rest = path.subtract(&step).unwrap();
                    coeffs_add(
                        coeffs,
                        &overlap_name(&clash, &b),
                        ring,
                        &monomial_of_partition(&rest),
                        -1,
                    );
                }
            }
            for (b, child) in edges {
                let step = PartialPartition::new([b.clone()]).unwrap();
                walk_p(child, &path.union(&step).unwrap(), ctx, ring, coeffs)?;
            }
            Ok(())
        }
    }
}

pub fn p_branch_sum_poly<L: Clone + Eq + std::fmt::Debug>(
    tree: &PTree<L>,
    ring: RingSpec,
) -> Polynomial {
    let mut p = Polynomial::zero(ring);
    for (b, _) in tree.branches() {
        p.add_term(&monomial_of_partition(&b), 1);
    }
    p
}

/// NS proof of `Σ_{α ∈ br(T)} x_α = 1` from ¬Count^p_M.
pub fn p_branch_sum_proof<L: Clone + Eq + std::fmt::Debug>(
    tree: &PTree<L>,
    ctx: &PContext,
    ring: RingSpec,
) -> Result<NSProof, CompileError> {
    let system = system_neg_count(ctx.p, ctx.m, ring)?;
    let coeffs = p_tree_sum_coeffs(tree, &PartialPartition::empty(), ctx, ring)?;
    let proof = NSProof {
        system,
        coeffs,
        g1: p_branch_sum_poly(tree, ring),
        g2: Polynomial::one(ring),
    };
    let rep = verify_ns(&proof)?;
    if !rep.valid {
        return Err(CompileError::Invariant("p-branch-sum proof failed to verify".into()));
    }
    Ok(proof)
}

/// Certificate for `Σ_{branches of U extending some s ∈ S} x = Σ_{s∈S} x_s`:
/// telescope the subtree hanging below each prefix. Prefixes must be
/// pairwise conflicting paths of U.
pub fn p_sum_extensions_coeffs<L: Clone + Eq + std::fmt::Debug>(
    tree: &PTree<L>,
    prefixes: &[PartialPartition],
    ctx: &PContext,
    ring: RingSpec,
) -> Result<Coeffs, CompileError> {
    for (i, a) in prefixes.iter().enumerate() {
        for b in prefixes.iter().skip(i + 1) {
            if !a.conflicts(b) {
                return Err(CompileError::Precondition(format!(
                    "prefixes {a} and {b} are compatible"
                )));
            }
        }
    }
    let mut coeffs = Coeffs::new();
    for s in prefixes {
        let sub = tree.subtree_at(s)?;
        let c = p_tree_sum_coeffs(sub, s, ctx, ring)?;
        coeffs_merge(&mut coeffs, &c, 1);
    }
    Ok(coeffs)
}

/// Certificate for the product-to-union rewriting over ¬Count:
/// `(Σ_F x)(Σ_G x) − Σ_{b∈F, c∈G, b||c} x_{b∪c} = Σ coeffs · rows`.
/// The compatible-union sum is returned as a polynomial (with multiplicity).
pub fn p_product_coeffs(
    fam1: &[PartialPartition],
    fam2: &[PartialPartition],
    ring: RingSpec,
) -> (Coeffs, Polynomial) {
    let mut coeffs = Coeffs::new();
    let mut compat = Polynomial::zero(ring);
    for b in fam1 {
        for c in fam2 {
            if b.conflicts(c) {
                // Pick a clashing pair of blocks; the rest is the cofactor.
                let (e, f) = b
                    .blocks()
                    .iter()
                    .find_map(|e| {
                        c.blocks()
                            .iter()
                            .find(|f| crate::principles::blocks_conflict(e, f))
                            .map(|f| (e.clone(), f.clone()))
                    })
                    .expect("conflicting pair exists");
                let rb = b.subtract(&PartialPartition::new([e.clone()]).unwrap()).unwrap();
                let rc = c.subtract(&PartialPartition::new([f.clone()]).unwrap()).unwrap();
                let cof = monomial_of_partition(&rb).mul(&monomial_of_partition(&rc));
                coeffs_add(&mut coeffs, &overlap_name(&e, &f), ring, &cof, 1);
            } else {
                // Shared blocks square up; peel them through boolean rows.
                let union = b.union(c).unwrap();
                let mut cur = monomial_of_partition(b).mul(&monomial_of_partition(c));
                let target = monomial_of_partition(&union);
                while cur != target {
                    let v = cur
                        .0
                        .iter()
                        .find(|(_, &e)| e >= 2)
                        .map(|(v, _)| v.clone())
                        .expect("square exists while monomials differ");
                    let mut rest = cur.0.clone();
                    let e = rest.get_mut(&v).unwrap();
                    *e -= 2;
                    if *e == 0 {
                        rest.remove(&v);
                    }
                    let blk = match &v {
                        crate::poly::PolyVar::Block(b) => b.clone(),
                        _ => unreachable!("partition monomials use block variables"),
                    };
                    coeffs_add(
                        &mut coeffs,
                        &format!("bool[{:?}]", blk),
                        ring,
                        &Monomial(rest.clone()),
                        1,
                    );
                    // cur = rest·v² = rest·(v²−v) + rest·v.
                    let mut next = rest;
                    *next.entry(v).or_insert(0) += 1;
                    cur = Monomial(next);
                }
                compat.add_term(&target, 1);
            }
        }
    }
    (coeffs, compat)
}

pub fn family_sum_poly(fam: &[PartialPartition], ring: RingSpec) -> Polynomial {
    let mut p = Polynomial::zero(ring);
    for b in fam {
        p.add_term(&monomial_of_partition(b), 1);
    }
    p
}

// ---------------------------------------------------------------------------
// Matched tree families and the UCP pipeline
// ---------------------------------------------------------------------------

/// Branch labels of the X-trees: a slot-element triple or the bottom symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum XLabel {
    Slot(u32, u32, u32),
    Bot,
}

#[derive(Debug, Clone)]
pub struct MatchedTreeFamilies {
    pub l: u32,
    pub d: u32,
    pub k: u32,
    pub universe: Universe,
    pub x_trees: BTreeMap<(u32, u32), Tree<XLabel>>,
    pub y_trees: BTreeMap<u32, Tree<(u32, u32, u32)>>,
}

/// Re-validate the two family invariants by literal branch-set comparison.
pub fn check_family_invariants(fam: &MatchedTreeFamilies) -> Result<(), CompileError> {
    for ((i, j), t) in &fam.x_trees {
        for (_, l) in t.branches() {
            match l {
                XLabel::Bot => {}
                XLabel::Slot(i2, j2, e) => {
                    if (i2, j2) != (*i, *j) || e < 1 || e > fam.k {
                        return Err(CompileError::Invariant(format!(
                            "X[{i},{j}] carries a foreign label ({i2},{j2},{e})"
                        )));
                    }
                }
            }
        }
    }
    let x_labeled = |i: u32, j: u32, e: u32| -> BTreeSet<PartialInjection> {
        fam.x_trees[&(i, j)]
            .branches()
            .into_iter()
            .filter(|(_, l)| *l == XLabel::Slot(i, j, e))
            .map(|(b, _)| b)
            .collect()
    };
    for e in 1..=fam.k {
        let yt = fam
            .y_trees
            .get(&e)
            .ok_or_else(|| CompileError::Invariant(format!("Y[{e}] missing")))?;
        let mut y_by_slot: BTreeMap<(u32, u32), BTreeSet<PartialInjection>> = BTreeMap::new();
        for (b, (i, j, e2)) in yt.branches() {
            if e2 != e {
                return Err(CompileError::Invariant(format!(
                    "Y[{e}] carries a label for element {e2}"
                )));
            }
            y_by_slot.entry((i, j)).or_default().insert(b);
        }
        for i in 1..=fam.l {
            for j in 1..=fam.d {
                let xs = x_labeled(i, j, e);
                let ys = y_by_slot.remove(&(i, j)).unwrap_or_default();
                if xs != ys {
                    return Err(CompileError::Invariant(format!(
                        "br_({i},{j},{e}) differs between X and Y ({} vs {} branches)",
                        xs.len(),
                        ys.len()
                    )));
                }
            }
        }
    }
    for i in 1..=fam.l {
        let bot = |j: u32| -> BTreeSet<PartialInjection> {
            fam.x_trees[&(i, j)]
                .branches()
                .into_iter()
                .filter(|(_, l)| *l == XLabel::Bot)
                .map(|(b, _)| b)
                .collect()
        };
        let first = bot(1);
        for j in 2..=fam.d {
            if bot(j) != first {
                return Err(CompileError::Invariant(format!(
                    "bottom branch sets of X[{i},1] and X[{i},{j}] differ"
                )));
            }
        }
    }
    Ok(())
}

/// The named component formulas of a UCP instance, in the shapes the
/// evaluation must contain.
pub struct UcpComponents {
    pub psi: BTreeMap<(u32, u32, u32), Formula>,
    pub s_e: BTreeMap<u32, Formula>,
    pub s_ij: BTreeMap<(u32, u32), Formula>,
    pub p_i: BTreeMap<u32, Formula>,
    pub n_i: BTreeMap<u32, Formula>,
    pub u_i: BTreeMap<u32, Formula>,
}

pub fn ucp_components(ax: &UcpAxiom) -> UcpComponents {
    let psi = ax.subst.clone();
    let mut s_e = BTreeMap::new();
    for e in 1..=ax.k {
        let mut cs = Vec::new();
        for i in 1..=ax.l {
            for j in 1..=ax.d {
                cs.push(psi[&(i, j, e)].clone());
            }
        }
        s_e.insert(e, Formula::or(cs));
    }
    let mut s_ij = BTreeMap::new();
    for i in 1..=ax.l {
        for j in 1..=ax.d {
            s_ij.insert(
                (i, j),
                Formula::or((1..=ax.k).map(|e| psi[&(i, j, e)].clone()).collect()),
            );
        }
    }
    let mut p_i = BTreeMap::new();
    let mut n_i = BTreeMap::new();
    let mut u_i = BTreeMap::new();
    for i in 1..=ax.l {
        let p = Formula::or(
            (1..=ax.d)
                .map(|j| Formula::not(s_ij[&(i, j)].clone()))
                .collect(),
        );
        let n = Formula::or((1..=ax.d).map(|j| s_ij[&(i, j)].clone()).collect());
        u_i.insert(
            i,
            Formula::or(vec![Formula::not(p.clone()), Formula::not(n.clone())]),
        );
        p_i.insert(i, p);
        n_i.insert(i, n);
    }
    UcpComponents { psi, s_e, s_ij, p_i, n_i, u_i }
}

fn tree_of<'a>(
    eval: &'a Evaluation,
    f: &Formula,
    what: &str,
) -> Result<&'a Tree<bool>, CompileError> {
    eval.get(f).ok_or_else(|| {
        CompileError::Precondition(format!("{what} is not in the evaluation domain"))
    })
}

/// Verify observations 1-4 and construct the matched labeled families.
pub fn build_matched_families(
    eval: &Evaluation,
    ax: &UcpAxiom,
) -> Result<MatchedTreeFamilies, CompileError> {
    if ax.k % ax.d == 0 {
        return Err(CompileError::Precondition(format!(
            "need d not dividing k, got d={} k={}",
            ax.d, ax.k
        )));
    }
    let comp = ucp_components(ax);
    let instance = ax.formula()?;
    let t_inst = tree_of(eval, &instance, "the instance")?;
    if t_inst.branches().iter().any(|(_, l)| *l) {
        return Err(CompileError::Precondition(
            "instance tree has 1-branches; apply normalize_instance first".into(),
        ));
    }

    // Observation 1: every S_e tree is all-1 and each branch extends a
    // witness of a unique slot.
    let mut hitters: BTreeMap<u32, BTreeMap<PartialInjection, (u32, u32)>> = BTreeMap::new();
    for e in 1..=ax.k {
        let te = tree_of(eval, &comp.s_e[&e], &format!("S_e for e={e}"))?;
        let mut map = BTreeMap::new();
        for (b, l) in te.branches() {
            if !l {
                return Err(CompileError::Observation(format!(
                    "observation 1: S_{e} has a 0-branch {b}"
                )));
            }
            let mut slots = Vec::new();
            for i in 1..=ax.l {
                for j in 1..=ax.d {
                    let ts = tree_of(eval, &comp.psi[&(i, j, e)], "a substituted formula")?;
                    if ts.branches_labeled(true).iter().any(|s| b.extends(s)) {
                        slots.push((i, j));
                    }
                }
            }
            if slots.len() != 1 {
                return Err(CompileError::Observation(format!(
                    "observation 1: branch {b} of S_{e} extends witnesses of {} slots",
                    slots.len()
                )));
            }
            map.insert(b, slots[0]);
        }
        hitters.insert(e, map);
    }
    // Observations 2 and 3: pairwise conflicts of 1-branch witnesses.
    for e in 1..=ax.k {
        let mut slot_wits: Vec<((u32, u32), Vec<PartialInjection>)> = Vec::new();
        for i in 1..=ax.l {
            for j in 1..=ax.d {
                let ts = tree_of(eval, &comp.psi[&(i, j, e)], "a substituted formula")?;
                slot_wits.push(((i, j), ts.branches_labeled(true)));
            }
        }
        for (a, (sa, wa)) in slot_wits.iter().enumerate() {
            for (sb, wb) in slot_wits.iter().skip(a + 1) {
                for x in wa {
                    for y in wb {
                        if !x.conflicts(y) {
                            return Err(CompileError::Observation(format!(
                                "observation 2: witnesses of slots {sa:?} and {sb:?} at e={e} are compatible"
                            )));
                        }
                    }
                }
            }
        }
    }
    for i in 1..=ax.l {
        for j in 1..=ax.d {
            for e in 1..=ax.k {
                for e2 in e + 1..=ax.k {
                    let ta = tree_of(eval, &comp.psi[&(i, j, e)], "a substituted formula")?;
                    let tb = tree_of(eval, &comp.psi[&(i, j, e2)], "a substituted formula")?;
                    for x in ta.branches_labeled(true) {
                        for y in tb.branches_labeled(true) {
                            if !x.conflicts(&y) {
                                return Err(CompileError::Observation(format!(
                                    "observation 3: witnesses of slot ({i},{j}) at e={e} and e={e2} are compatible"
                                )));
                            }
                        }
                    }
                }
            }
        }
    }
    // Observation 4: U_i all-1, each branch in exactly one of the two cases.
    let mut former_sets: BTreeMap<u32, BTreeSet<PartialInjection>> = BTreeMap::new();
    for i in 1..=ax.l {
        let tu = tree_of(eval, &comp.u_i[&i], &format!("U_i for i={i}"))?;
        let tp = tree_of(eval, &comp.p_i[&i], &format!("P_i for i={i}"))?;
        let tn = tree_of(eval, &comp.n_i[&i], &format!("N_i for i={i}"))?;
        let p0 = tp.branches_labeled(false);
        let n0 = tn.branches_labeled(false);
        let mut former: BTreeSet<PartialInjection> = BTreeSet::new();
        for (b, l) in tu.branches() {
            if !l {
                return Err(CompileError::Observation(format!(
                    "observation 4: U_{i} has a 0-branch {b}"
                )));
            }
            let is_former = p0.iter().any(|s| b.extends(s));
            let is_latter = n0.iter().any(|s| b.extends(s));
            match (is_former, is_latter) {
                (true, false) => {
                    for j in 1..=ax.d {
                        let ts = tree_of(eval, &comp.s_ij[&(i, j)], "S_ij")?;
                        for s in ts.branches_labeled(false) {
                            if !b.conflicts(&s) {
                                return Err(CompileError::Observation(format!(
                                    "observation 4: former-case branch {b} is compatible with a 0-branch of S_({i},{j})"
                                )));
                            }
                        }
                    }
                    former.insert(b);
                }
                (false, true) => {
                    for j in 1..=ax.d {
                        for e in 1..=ax.k {
                            let ts = tree_of(eval, &comp.psi[&(i, j, e)], "psi")?;
                            for s in ts.branches_labeled(true) {
                                if !b.conflicts(&s) {
                                    return Err(CompileError::Observation(format!(
                                        "observation 4: latter-case branch {b} is compatible with a 1-witness of ({i},{j},{e})"
                                    )));
                                }
                            }
                        }
                    }
                }
                (f, _) => {
                    return Err(CompileError::Observation(format!(
                        "observation 4: branch {b} of U_{i} is in {} case(s)",
                        if f { 2 } else { 0 }
                    )));
                }
            }
        }
        former_sets.insert(i, former);
    }

    // Construct Y_e.
    let mut y_trees = BTreeMap::new();
    for e in 1..=ax.k {
        let te = tree_of(eval, &comp.s_e[&e], "S_e")?;
        let mut grafts = BTreeMap::new();
        for (b, _) in te.branches() {
            let (ib, jb) = hitters[&e][&b];
            let tu = tree_of(eval, &comp.u_i[&ib], "U_i")?.strip();
            let ts = tree_of(eval, &comp.s_ij[&(ib, jb)], "S_ij")?.strip();
            let graft = tu.concat_full(&ts)?.restrict(&b)?;
            grafts.insert(b, graft);
        }
        let plain = te.strip().concat(&grafts)?;
        let hit = hitters[&e].clone();
        let labeled = plain.relabel(&|branch: &PartialInjection, _| {
            let (_, slot) = hit
                .iter()
                .find(|(b, _)| branch.extends(b))
                .expect("every branch extends a base branch");
            (slot.0, slot.1, e)
        });
        y_trees.insert(e, labeled);
    }

    // Construct X_{i,j}.
    let mut x_trees = BTreeMap::new();
    for i in 1..=ax.l {
        for j in 1..=ax.d {
            let tu = tree_of(eval, &comp.u_i[&i], "U_i")?;
            let ts = tree_of(eval, &comp.s_ij[&(i, j)], "S_ij")?;
            let former = &former_sets[&i];
            let mut grafts = BTreeMap::new();
            for b in former {
                grafts.insert(b.clone(), ts.strip().restrict(b)?);
            }
            let x_tilde = tu.strip().concat(&grafts)?;
            // Find the element determined by each extended branch.
            let mut e_of: BTreeMap<PartialInjection, u32> = BTreeMap::new();
            for (bt, _) in x_tilde.branches() {
                if former.iter().any(|b| bt.extends(b)) {
                    let mut es = Vec::new();
                    for e in 1..=ax.k {
                        let tpsi = tree_of(eval, &comp.psi[&(i, j, e)], "psi")?;
                        if tpsi.branches_labeled(true).iter().any(|s| bt.extends(s)) {
                            es.push(e);
                        }
                    }
                    if es.len() != 1 {
                        return Err(CompileError::Observation(format!(
                            "branch {bt} of the intermediate X[{i},{j}] tree determines {} elements",
                            es.len()
                        )));
                    }
                    e_of.insert(bt, es[0]);
                }
            }
            let mut grafts2 = BTreeMap::new();
            for (bt, &e) in &e_of {
                let se = tree_of(eval, &comp.s_e[&e], "S_e")?;
                grafts2.insert(bt.clone(), se.strip().restrict(bt)?);
            }
            let x_hat = x_tilde.concat(&grafts2)?;
            let e_of2 = e_of.clone();
            let labeled = x_hat.relabel(&|branch: &PartialInjection, _| {
                match e_of2.iter().find(|(bt, _)| branch.extends(bt)) {
                    Some((_, &e)) => XLabel::Slot(i, j, e),
                    None => XLabel::Bot,
                }
            });
            x_trees.insert((i, j), labeled);
        }
    }

    let fam = MatchedTreeFamilies {
        l: ax.l,
        d: ax.d,
        k: ax.k,
        universe: eval.universe.clone(),
        x_trees,
        y_trees,
    };
    check_family_invariants(&fam)?;
    Ok(fam)
}

/// Combine branch sums over every X- and Y-tree into a refutation of the
/// constant k over Z_d.
pub fn assemble_ucp_refutation(
    fam: &MatchedTreeFamilies,
    d: u64,
) -> Result<NSProof, CompileError> {
    if u64::from(fam.k) % d == 0 {
        return Err(CompileError::Precondition(format!(
            "d = {d} divides k = {}",
            fam.k
        )));
    }
    check_family_invariants(fam)?;
    let ring = RingSpec::modular(d)?;
    // The polynomial side needs an ambient (M, m) covering the tree ids.
    let max_h = fam.universe.holes.iter().max().copied().unwrap_or(1);
    let max_p = fam
        .universe
        .pigeons
        .iter()
        .max()
        .copied()
        .unwrap_or(0)
        .max(max_h + 1);
    let system = system_neg_injstar(max_p, max_h, ring)?;

    let mut p_x = Polynomial::zero(ring);
    let mut p_y = Polynomial::zero(ring);
    let mut coeffs = Coeffs::new();
    for t in fam.x_trees.values() {
        p_x = p_x.add(&branch_sum_poly(t, ring));
        let c = inj_tree_sum_coeffs(t, &PartialInjection::empty(), max_p, ring)?;
        coeffs_merge(&mut coeffs, &c, 1);
    }
    for t in fam.y_trees.values() {
        p_y = p_y.add(&branch_sum_poly(t, ring));
        let c = inj_tree_sum_coeffs(t, &PartialInjection::empty(), max_p, ring)?;
        coeffs_merge(&mut coeffs, &c, -1);
    }
    if p_x != p_y {
        return Err(CompileError::Invariant(
            "the two double branch sums differ as Z_d polynomials".into(),
        ));
    }
    // Σ (c_X − c_Y) f = (P_X − l·d) − (P_Y − k) = k − l·d ≡ k (mod d).
    let proof = NSProof {
        system,
        coeffs,
        g1: Polynomial::constant(ring, i64::from(fam.k)),
        g2: Polynomial::zero(ring),
    };
    let rep = verify_ns(&proof)?;
    if !rep.valid {
        return Err(CompileError::Invariant("assembled refutation failed to verify".into()));
    }
    Ok(proof)
}

/// Everything the end-to-end pipeline emits.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub families: MatchedTreeFamilies,
    pub chosen_line: usize,
    pub restriction: PartialInjection,
    pub refutation_injstar: NSProof,
    pub refutation_injphp: NSProof,
    pub projected: NSProof,
    pub component: u64,
    pub degree_injstar: Degree,
    pub degree_projected: Degree,
}

/// Maximal prime-power components of d.
pub fn prime_power_components(d: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut rest = d;
    let mut p = 2;
    while p * p <= rest {
        if rest % p == 0 {
            let mut q = 1;
            while rest % p == 0 {
                q *= p;
                rest /= p;
            }
            out.push(q);
        }
        p += 1;
    }
    if rest > 1 {
        out.push(rest);
    }
    out
}

/// Audit the proof, normalize the first falsified axiom instance, build the
/// matched families, assemble the Z_d refutation, substitute away the slack
/// variables, and project to a prime-power component.
pub fn compile_ucp_pipeline(
    proof: &FregeProof,
    eval: &Evaluation,
) -> Result<PipelineOutput, CompileError> {
    proof.validate()?;
    let falsified = crate::eval::audit_proof(proof, eval)?;
    if falsified.is_empty() {
        return Err(CompileError::Precondition(
            "no falsified lines; nothing to compile".into(),
        ));
    }
    // The target line is expected to be falsified; every other falsified
    // line must be an axiom-scheme instance.
    let target_idx = proof.lines.len() - 1;
    let mut chosen: Option<(usize, UcpAxiom)> = None;
    for &idx in &falsified {
        match &proof.lines[idx].just {
            Justification::UcpAxiom(ax) => {
                if chosen.is_none() {
                    chosen = Some((idx, ax.clone()));
                }
            }
            _ if idx == target_idx => {}
            _ => {
                return Err(CompileError::Precondition(format!(
                    "falsified line {idx} is not a UCP axiom instance"
                )));
            }
        }
    }
    let (line, ax) = chosen.ok_or_else(|| {
        CompileError::Precondition("no falsified axiom instance to compile".into())
    })?;
    let target = proof
        .target()
        .ok_or_else(|| CompileError::Precondition("empty proof".into()))?;
    let t_target = tree_of(eval, target, "the target line")?;
    if !t_target.branches_labeled(true).is_empty() {
        return Err(CompileError::Precondition(
            "target line still has 1-branches".into(),
        ));
    }
    // Normalize the instance; restrict the axiom substitution alongside.
    let instance = ax.formula()?;
    let (rho, eval2) = crate::eval::normalize_instance(&instance, eval)?;
    let mut subst2 = BTreeMap::new();
    for (key, f) in &ax.subst {
        subst2.insert(*key, crate::partial::restrict_formula(f, &rho, &eval.universe)?);
    }
    let ax2 = UcpAxiom { l: ax.l, d: ax.d, k: ax.k, subst: subst2 };
    let fam = build_matched_families(&eval2, &ax2)?;
    let refutation_injstar = assemble_ucp_refutation(&fam, u64::from(ax.d))?;
    let degree_injstar = verify_ns(&refutation_injstar)?.degree;
    let refutation_injphp = substitute_u(&refutation_injstar)?;
    // Project to a component where the refuted constant survives.
    let mut projected = None;
    for q in prime_power_components(u64::from(ax.d)) {
        if u64::from(fam.k) % q != 0 {
            projected = Some((q, crate::poly::project_mod(&refutation_injphp, q)?));
            break;
        }
    }
    let (component, projected) = projected.ok_or_else(|| {
        CompileError::Ns(NsError::Nonconclusive(
            "no prime-power component keeps the constant nonzero".into(),
        ))
    })?;
    let degree_projected = verify_ns(&projected)?.degree;
    Ok(PipelineOutput {
        families: fam,
        chosen_line: line,
        restriction: rho,
        refutation_injstar,
        refutation_injphp,
        projected,
        component,
        degree_injstar,
        degree_projected,
    })
}

// ---------------------------------------------------------------------------
// Oddtown extraction over F_2
// ---------------------------------------------------------------------------

/// The substitution of an oddtown_m instance into block-variable formulas.
#[derive(Debug, Clone)]
pub struct OddtownInstance {
    pub m: u32,
    pub sigma: BTreeMap<(u32, u32), Formula>,
    pub tau: BTreeMap<(u32, u32), Formula>,
    pub phi: BTreeMap<(u32, (u32, u32)), Formula>,
    pub psi: BTreeMap<(u32, u32, (u32, u32)), Formula>,
}

impl OddtownInstance {
    fn var_map(&self) -> std::collections::HashMap<Var, Formula> {
        let mut map = std::collections::HashMap::new();
        for ((i, j), f) in &self.sigma {
            map.insert(Var::OddS { i: *i, j: *j }, f.clone());
        }
        for ((i, j), f) in &self.tau {
            map.insert(Var::OddQ { i: *i, j: *j }, f.clone());
        }
        for ((i, b), f) in &self.phi {
            map.insert(Var::OddP { i: *i, block: *b }, f.clone());
        }
        for ((i, i2, b), f) in &self.psi {
            map.insert(Var::OddR { i: *i, i2: *i2, block: *b }, f.clone());
        }
        map
    }

    pub fn formula(&self) -> Result<Formula, CompileError> {
        let inst = crate::principles::generate(
            crate::principles::PrincipleId::Oddtown,
            crate::principles::Params { n: Some(self.m), ..Default::default() },
        )
        .map_err(|e| CompileError::Precondition(e.to_string()))?;
        inst.formula
            .substitute(&self.var_map())
            .map_err(|e| CompileError::Precondition(e.to_string()))
    }

    pub fn matrix(&self) -> Result<Vec<Formula>, CompileError> {
        let inst = crate::principles::generate(
            crate::principles::PrincipleId::Oddtown,
            crate::principles::Params { n: Some(self.m), ..Default::default() },
        )
        .map_err(|e| CompileError::Precondition(e.to_string()))?;
        let map = self.var_map();
        inst.matrix
            .iter()
            .map(|c| {
                c.substitute(&map)
                    .map_err(|e| CompileError::Precondition(e.to_string()))
            })
            .collect()
    }
}

/// Extracted polynomial families with their certificates.
#[derive(Debug, Clone)]
pub struct OddtownWitnessPolys {
    pub m: u32,
    pub f: BTreeMap<(u32, u32), Polynomial>,
    /// For each i: the certificate of Σ_j f_ij + 1 = 0.
    pub sum_certs: BTreeMap<u32, NSProof>,
    /// For each i < i': the certificate of Σ_j f_ij f_i'j = 0.
    pub prod_certs: BTreeMap<(u32, u32), NSProof>,
    /// For each i: the branch-sum certificate of the tree Q_i.
    pub q_certs: BTreeMap<u32, NSProof>,
    /// Heights and branch counts of the intermediate trees, for audit.
    pub intermediates: Vec<(String, usize, usize)>,
    pub degree_bound: Degree,
}

fn ptree_of<'a>(
    eval: &'a PEvaluation,
    f: &Formula,
    what: &str,
) -> Result<&'a PTree<bool>, CompileError> {
    eval.get(f).ok_or_else(|| {
        CompileError::Precondition(format!("{what} is not in the evaluation domain"))
    })
}

fn require_models(eval: &PEvaluation, f: &Formula, what: &str) -> Result<(), CompileError> {
    let t = ptree_of(eval, f, what)?;
    if t.branches().iter().all(|(_, l)| *l) {
        Ok(())
    } else {
        Err(CompileError::Observation(format!(
            "{what} is not modelled (has a 0-branch)"
        )))
    }
}

/// Assert that every partial partition occurs an even number of times.
fn check_even_multiset(ms: &[PartialPartition], what: &str) -> Result<(), CompileError> {
    let mut counts: BTreeMap<&PartialPartition, usize> = BTreeMap::new();
    for x in ms {
        *counts.entry(x).or_insert(0) += 1;
    }
    for (x, c) in counts {
        if c % 2 != 0 {
            return Err(CompileError::Invariant(format!(
                "{what}: {x} occurs {c} times (odd)"
            )));
        }
    }
    Ok(())
}

/// Blocks of [m]² containing j, as ordered pairs.
fn pair_blocks(m: u32, j: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for a in 1..=m {
        for b in a + 1..=m {
            if a == j || b == j {
                out.push((a, b));
            }
        }
    }
    out
}

/// The oddtown extraction: emit the F_2-polynomials f_ij together with the
/// certificates that they violate the oddtown conditions, from a normalized
/// falsified instance under a p-tree evaluation.
pub fn oddtown_extract(
    eval: &PEvaluation,
    inst: &OddtownInstance,
) -> Result<OddtownWitnessPolys, CompileError> {
    let ring = RingSpec::Fp(2);
    let ctx = eval.ctx;
    if ctx.m % ctx.p == 0 {
        return Err(CompileError::Precondition(format!(
            "universe size {} divisible by p = {}",
            ctx.m, ctx.p
        )));
    }
    let system = system_neg_count(ctx.p, ctx.m, ring)?;
    let m = inst.m;
    let instance = inst.formula()?;
    let ti = ptree_of(eval, &instance, "the oddtown instance")?;
    if ti.branches().iter().any(|(_, l)| *l) {
        return Err(CompileError::Precondition(
            "instance tree has 1-branches; normalize first".into(),
        ));
    }
    // All quoted modelling facts: the instantiated matrix rows.
    for (rid, row) in inst.matrix()?.iter().enumerate() {
        require_models(eval, row, &format!("matrix row {rid}"))?;
    }

    let mut intermediates: Vec<(String, usize, usize)> = Vec::new();

    let sigma_tree = |i: u32, j: u32| -> Result<&PTree<bool>, CompileError> {
        ptree_of(eval, &inst.sigma[&(i, j)], &format!("sigma[{i},{j}]"))
    };
    let mut f_polys: BTreeMap<(u32, u32), Polynomial> = BTreeMap::new();
    for i in 1..=m + 1 {
        for j in 1..=m {
            let t = sigma_tree(i, j)?;
            f_polys.insert((i, j), family_sum_poly(&t.branches_labeled(true), ring));
        }
    }

    // Row formulas used by the constructions (in the instantiated shapes).
    let row1 = |i: u32, j: u32| -> Formula {
        let phis: Vec<Formula> = pair_blocks(m, j)
            .into_iter()
            .map(|b| inst.phi[&(i, b)].clone())
            .collect();
        Formula::or(vec![
            Formula::not(inst.sigma[&(i, j)].clone()),
            inst.tau[&(i, j)].clone(),
            Formula::or(phis),
        ])
    };
    let row2 = |i: u32, j: u32| -> Formula {
        Formula::or(vec![
            inst.sigma[&(i, j)].clone(),
            Formula::not(inst.tau[&(i, j)].clone()),
        ])
    };
    let row3 = |i: u32, j: u32, b: (u32, u32)| -> Formula {
        Formula::or(vec![
            inst.sigma[&(i, j)].clone(),
            Formula::not(inst.phi[&(i, b)].clone()),
        ])
    };
    let row4 = |i: u32| -> Formula {
        Formula::or((1..=m).map(|j| inst.tau[&(i, j)].clone()).collect())
    };
    let row8 = |i: u32, i2: u32, j: u32| -> Formula {
        let psis: Vec<Formula> = pair_blocks(m, j)
            .into_iter()
            .map(|b| inst.psi[&(i, i2, b)].clone())
            .collect();
        Formula::or(vec![
            Formula::not(inst.sigma[&(i, j)].clone()),
            Formula::not(inst.sigma[&(i2, j)].clone()),
            Formula::or(psis),
        ])
    };
    let row9 = |i: u32, i2: u32, j: u32, b: (u32, u32)| -> Formula {
        Formula::or(vec![
            inst.sigma[&(i, j)].clone(),
            Formula::not(inst.psi[&(i, i2, b)].clone()),
        ])
    };
    let row10 = |i: u32, i2: u32, j: u32, b: (u32, u32)| -> Formula {
        Formula::or(vec![
            inst.sigma[&(i2, j)].clone(),
            Formula::not(inst.psi[&(i, i2, b)].clone()),
        ])
    };

    // ----- Certificates of Σ_j f_ij f_i'j = 0 for each pair i < i'. -----
    let mut prod_certs = BTreeMap::new();
    for i in 1..=m + 1 {
        for i2 in i + 1..=m + 1 {
            let mut u1_trees: BTreeMap<u32, PTree<()>> = BTreeMap::new();
            let mut u2_trees: BTreeMap<u32, PTree<()>> = BTreeMap::new();
            let mut s1_sets: BTreeMap<u32, Vec<PartialPartition>> = BTreeMap::new();
            let mut s2_sets: BTreeMap<u32, Vec<PartialPartition>> = BTreeMap::new();
            let mut jprime: BTreeMap<(u32, PartialPartition), u32> = BTreeMap::new();
            let mut pair_sets: BTreeMap<u32, Vec<PartialPartition>> = BTreeMap::new();
            for j in 1..=m {
                let ts = sigma_tree(i, j)?;
                let ts2 = sigma_tree(i2, j)?;
                let t_row8 = ptree_of(eval, &row8(i, i2, j), "a row-8 instance")?;
                let inner = {
                    let mut grafts = BTreeMap::new();
                    for b2 in ts2.branches_labeled(true) {
                        grafts.insert(b2.clone(), t_row8.strip().restrict(&b2)?);
                    }
                    ts2.strip().concat(&grafts)?
                };
                let u1 = {
                    let mut grafts = BTreeMap::new();
                    for b in ts.branches_labeled(true) {
                        grafts.insert(b.clone(), inner.restrict(&b)?);
                    }
                    ts.strip().concat(&grafts)?
                };
                intermediates.push((
                    format!("U1[{i},{i2},{j}]"),
                    u1.height(),
                    u1.branches().len(),
                ));
                let mut pairs = Vec::new();
                for b in ts.branches_labeled(true) {
                    for b2 in ts2.branches_labeled(true) {
                        if b.compatible(&b2) {
                            pairs.push(b.union(&b2).unwrap());
                        }
                    }
                }
                let s1: Vec<PartialPartition> = u1
                    .branches()
                    .into_iter()
                    .map(|(b, _)| b)
                    .filter(|b| pairs.iter().any(|p| b.extends(p)))
                    .collect();
                for r in &s1 {
                    let mut found = Vec::new();
                    for b in pair_blocks(m, j) {
                        let tpsi = ptree_of(eval, &inst.psi[&(i, i2, b)], "psi")?;
                        if tpsi.branches_labeled(true).iter().any(|s| r.extends(s)) {
                            found.push(b);
                        }
                    }
                    if found.len() != 1 {
                        return Err(CompileError::Observation(format!(
                            "branch of U1[{i},{i2},{j}] determines {} blocks",
                            found.len()
                        )));
                    }
                    let (a, bb) = found[0];
                    let partner = if a == j { bb } else { a };
                    jprime.insert((j, r.clone()), partner);
                }
                let mut grafts = BTreeMap::new();
                for r in &s1 {
                    let jp = jprime[&(j, r.clone())];
                    let e = if j < jp { (j, jp) } else { (jp, j) };
                    let ta = ptree_of(eval, &row9(i, i2, jp, e), "a row-9 instance")?;
                    let tb = ptree_of(eval, &row10(i, i2, jp, e), "a row-10 instance")?;
                    let grafted = ta.strip().concat_full(&tb.strip())?.restrict(r)?;
                    grafts.insert(r.clone(), grafted);
                }
                let u2 = u1.concat(&grafts)?;
                intermediates.push((
                    format!("U2[{i},{i2},{j}]"),
                    u2.height(),
                    u2.branches().len(),
                ));
                let s2: Vec<PartialPartition> = u2
                    .branches()
                    .into_iter()
                    .map(|(b, _)| b)
                    .filter(|b| s1.iter().any(|r| b.extends(r)))
                    .collect();
                u1_trees.insert(j, u1);
                u2_trees.insert(j, u2);
                s1_sets.insert(j, s1);
                s2_sets.insert(j, s2);
                pair_sets.insert(j, pairs);
            }
            let mut coeffs = Coeffs::new();
            let mut total_b: Vec<PartialPartition> = Vec::new();
            let mut g1 = Polynomial::zero(ring);
            for j in 1..=m {
                let mut grafts = BTreeMap::new();
                for u in &s2_sets[&j] {
                    let r = s1_sets[&j]
                        .iter()
                        .find(|r| u.extends(r))
                        .expect("every second-stage branch extends a first-stage one");
                    let jp = jprime[&(j, r.clone())];
                    grafts.insert(u.clone(), u2_trees[&jp].restrict(u)?);
                }
                let u_j = u2_trees[&j].concat(&grafts)?;
                intermediates.push((
                    format!("U[{i},{i2},{j}]"),
                    u_j.height(),
                    u_j.branches().len(),
                ));
                let b_j: Vec<PartialPartition> = u_j
                    .branches()
                    .into_iter()
                    .map(|(b, _)| b)
                    .filter(|b| s2_sets[&j].iter().any(|u| b.extends(u)))
                    .collect();
                let c1 = p_sum_extensions_coeffs(&u_j, &s2_sets[&j], &ctx, ring)?;
                let c2 = p_sum_extensions_coeffs(&u2_trees[&j], &s1_sets[&j], &ctx, ring)?;
                let c3 = p_sum_extensions_coeffs(&u1_trees[&j], &pair_sets[&j], &ctx, ring)?;
                let (c4, compat) = p_product_coeffs(
                    &sigma_tree(i, j)?.branches_labeled(true),
                    &sigma_tree(i2, j)?.branches_labeled(true),
                    ring,
                );
                if compat != family_sum_poly(&pair_sets[&j], ring) {
                    return Err(CompileError::Invariant(
                        "product compatible-union sum mismatch".into(),
                    ));
                }
                coeffs_merge(&mut coeffs, &c1, 1);
                coeffs_merge(&mut coeffs, &c2, 1);
                coeffs_merge(&mut coeffs, &c3, 1);
                coeffs_merge(&mut coeffs, &c4, -1);
                total_b.extend(b_j);
                g1 = g1.add(&f_polys[&(i, j)].mul(&f_polys[&(i2, j)]));
            }
            check_even_multiset(&total_b, &format!("branch pairing for ({i},{i2})"))?;
            // Σ_j B_j − Σ_j f f' = Σ coeffs·rows with the left sum literally
            // zero over F_2, so flipping the sign certifies Σ_j f f' = 0.
            let mut final_coeffs = Coeffs::new();
            coeffs_merge(&mut final_coeffs, &coeffs, -1);
            let proof = NSProof {
                system: system.clone(),
                coeffs: final_coeffs,
                g1: g1.clone(),
                g2: Polynomial::zero(ring),
            };
            let rep = verify_ns(&proof)?;
            if !rep.valid {
                return Err(CompileError::Invariant(format!(
                    "product certificate for ({i},{i2}) failed to verify"
                )));
            }
            prod_certs.insert((i, i2), proof);
        }
    }

    // ----- Certificates of Σ_j f_ij + 1 = 0 for each i. -----
    let mut sum_certs = BTreeMap::new();
    let mut q_certs = BTreeMap::new();
    for i in 1..=m + 1 {
        let t_i = ptree_of(eval, &row4(i), "the row-4 instance")?;
        let mut v_trees: BTreeMap<u32, PTree<()>> = BTreeMap::new();
        let mut bv_sets: BTreeMap<u32, Vec<PartialPartition>> = BTreeMap::new();
        for j in 1..=m {
            let ts = sigma_tree(i, j)?;
            let t1j = ptree_of(eval, &row1(i, j), "a row-1 instance")?;
            let mut grafts = BTreeMap::new();
            for b in ts.branches_labeled(true) {
                grafts.insert(b.clone(), t1j.strip().restrict(&b)?);
            }
            let v_j = ts.strip().concat(&grafts)?;
            intermediates.push((format!("V[{i},{j}]"), v_j.height(), v_j.branches().len()));
            let bv: Vec<PartialPartition> = v_j
                .branches()
                .into_iter()
                .map(|(b, _)| b)
                .filter(|b| ts.branches_labeled(true).iter().any(|s| b.extends(s)))
                .collect();
            v_trees.insert(j, v_j);
            bv_sets.insert(j, bv);
        }
        let mut coeffs = Coeffs::new();
        let mut all_c: Vec<PartialPartition> = Vec::new();
        for j in 1..=m {
            let mut grafts = BTreeMap::new();
            for b in &bv_sets[&j] {
                let t_tau = ptree_of(eval, &inst.tau[&(i, j)], "tau")?;
                let case1 = t_tau.branches_labeled(true).iter().any(|s| b.extends(s));
                let mut case2 = Vec::new();
                for blk in pair_blocks(m, j) {
                    let t_phi = ptree_of(eval, &inst.phi[&(i, blk)], "phi")?;
                    if t_phi.branches_labeled(true).iter().any(|s| b.extends(s)) {
                        case2.push(blk);
                    }
                }
                let r_b: PTree<()> = match (case1, case2.len()) {
                    (true, 0) => {
                        let t_row2 = ptree_of(eval, &row2(i, j), "a row-2 instance")?;
                        t_i.strip().concat_full(&t_row2.strip())?
                    }
                    (false, 1) => {
                        let blk = case2[0];
                        let jp = if blk.0 == j { blk.1 } else { blk.0 };
                        let t_a = ptree_of(eval, &row3(i, jp, blk), "a row-3 instance")?;
                        let t_b = ptree_of(eval, &row3(i, j, blk), "a row-3 instance")?;
                        let inner = v_trees[&jp].concat_full(&t_b.strip())?;
                        t_a.strip().concat_full(&inner)?
                    }
                    (c1, n2) => {
                        return Err(CompileError::Observation(format!(
                            "branch {b} of V[{i},{j}] is in case1={c1} with {n2} case-2 blocks"
                        )));
                    }
                };
                grafts.insert(b.clone(), r_b.restrict(b)?);
            }
            let w_j = v_trees[&j].concat(&grafts)?;
            intermediates.push((format!("W[{i},{j}]"), w_j.height(), w_j.branches().len()));
            let c_j: Vec<PartialPartition> = w_j
                .branches()
                .into_iter()
                .map(|(b, _)| b)
                .filter(|b| bv_sets[&j].iter().any(|s| b.extends(s)))
                .collect();
            let ts = sigma_tree(i, j)?;
            let e1 = p_sum_extensions_coeffs(&w_j, &bv_sets[&j], &ctx, ring)?;
            let e2 =
                p_sum_extensions_coeffs(&v_trees[&j], &ts.branches_labeled(true), &ctx, ring)?;
            coeffs_merge(&mut coeffs, &e1, 1);
            coeffs_merge(&mut coeffs, &e2, 1);
            all_c.extend(c_j);
        }
        // Q_i.
        let mut qgrafts = BTreeMap::new();
        for (b, _) in t_i.branches() {
            let mut jb = Vec::new();
            for j in 1..=m {
                let t_tau = ptree_of(eval, &inst.tau[&(i, j)], "tau")?;
                if t_tau.branches_labeled(true).iter().any(|s| b.extends(s)) {
                    jb.push(j);
                }
            }
            if jb.len() != 1 {
                return Err(CompileError::Observation(format!(
                    "branch {b} of T_{i} determines {} distinguished indices",
                    jb.len()
                )));
            }
            let j = jb[0];
            let t_row2 = ptree_of(eval, &row2(i, j), "a row-2 instance")?;
            let ts = sigma_tree(i, j)?;
            let t1j = ptree_of(eval, &row1(i, j), "a row-1 instance")?;
            let inner = ts.strip().concat_full(&t1j.strip())?;
            let g = t_row2.strip().concat_full(&inner)?;
            qgrafts.insert(b.clone(), g.restrict(&b)?);
        }
        let q_i = t_i.strip().concat(&qgrafts)?;
        intermediates.push((format!("Q[{i}]"), q_i.height(), q_i.branches().len()));
        let qc = p_tree_sum_coeffs(&q_i, &PartialPartition::empty(), &ctx, ring)?;
        let q_proof = NSProof {
            system: system.clone(),
            coeffs: qc.clone(),
            g1: p_branch_sum_poly(&q_i, ring),
            g2: Polynomial::one(ring),
        };
        if !verify_ns(&q_proof)?.valid {
            return Err(CompileError::Invariant(format!(
                "branch-sum certificate for Q[{i}] failed"
            )));
        }
        let mut ms = all_c.clone();
        ms.extend(q_i.branches().into_iter().map(|(b, _)| b));
        check_even_multiset(&ms, &format!("the C/Q pairing for i={i}"))?;
        coeffs_merge(&mut coeffs, &qc, 1);
        // Σ_j(ΣC_j − f_ij) + (ΣQ − 1) = Σ coeffs f, and the branch sums
        // cancel, leaving −(Σ_j f_ij + 1).
        let mut final_coeffs = Coeffs::new();
        coeffs_merge(&mut final_coeffs, &coeffs, -1);
        let mut g1 = Polynomial::one(ring);
        for j in 1..=m {
            g1 = g1.add(&f_polys[&(i, j)]);
        }
        let proof = NSProof {
            system: system.clone(),
            coeffs: final_coeffs,
            g1,
            g2: Polynomial::zero(ring),
        };
        if !verify_ns(&proof)?.valid {
            return Err(CompileError::Invariant(format!(
                "sum certificate for i={i} failed to verify"
            )));
        }
        sum_certs.insert(i, proof);
        q_certs.insert(i, q_proof);
    }

    let degree_bound = sum_certs
        .values()
        .chain(prod_certs.values())
        .chain(q_certs.values())
        .map(|p| verify_ns(p).map(|r| r.degree))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .max()
        .unwrap_or(Degree::NegInf);
    Ok(OddtownWitnessPolys {
        m,
        f: f_polys,
        sum_certs,
        prod_certs,
        q_certs,
        intermediates,
        degree_bound,
    })
}

// ---------------------------------------------------------------------------
// Fisher-inequality extraction over a prime field
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct FieInstance {
    pub m: u32,
    pub sigma: BTreeMap<(u32, u32), Formula>,
    /// phi[(i1, i2, i1', i2', j, j')].
    pub phi: BTreeMap<(u32, u32, u32, u32, u32, u32), Formula>,
}

impl FieInstance {
    fn var_map(&self) -> std::collections::HashMap<Var, Formula> {
        let mut map = std::collections::HashMap::new();
        for ((i, j), f) in &self.sigma {
            map.insert(Var::FieS { i: *i, j: *j }, f.clone());
        }
        for ((i1, i2, i1p, i2p, j, jp), f) in &self.phi {
            map.insert(
                Var::FieR { i1: *i1, i2: *i2, i1p: *i1p, i2p: *i2p, j: *j, jp: *jp },
                f.clone(),
            );
        }
        map
    }

    pub fn formula(&self) -> Result<Formula, CompileError> {
        let inst = crate::principles::generate(
            crate::principles::PrincipleId::Fie,
            crate::principles::Params { n: Some(self.m), ..Default::default() },
        )
        .map_err(|e| CompileError::Precondition(e.to_string()))?;
        inst.formula
            .substitute(&self.var_map())
            .map_err(|e| CompileError::Precondition(e.to_string()))
    }

    pub fn matrix(&self) -> Result<Vec<Formula>, CompileError> {
        let inst = crate::principles::generate(
            crate::principles::PrincipleId::Fie,
            crate::principles::Params { n: Some(self.m), ..Default::default() },
        )
        .map_err(|e| CompileError::Precondition(e.to_string()))?;
        let map = self.var_map();
        inst.matrix
            .iter()
            .map(|c| {
                c.substitute(&map)
                    .map_err(|e| CompileError::Precondition(e.to_string()))
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct FieWitnessPolys {
    pub m: u32,
    pub f: BTreeMap<(u32, u32), Polynomial>,
    pub a: BTreeMap<(u32, u32), Polynomial>,
    pub b: BTreeMap<(u32, u32, u32), Polynomial>,
    pub eq7: BTreeMap<u32, NSProof>,
    pub eq8: BTreeMap<(u32, u32), NSProof>,
    pub eq9: BTreeMap<(u32, u32, u32, u32), NSProof>,
    pub eq10: BTreeMap<(u32, u32), NSProof>,
    pub eq11: BTreeMap<(u32, u32, u32), NSProof>,
    pub eq12: BTreeMap<(u32, u32, u32), NSProof>,
    pub degree_bound: Degree,
}

/// The Fisher-inequality extraction over a prime field.
pub fn fie_extract(
    eval: &PEvaluation,
    inst: &FieInstance,
    field: u64,
) -> Result<FieWitnessPolys, CompileError> {
    if !is_prime(field) {
        return Err(CompileError::Precondition(format!("{field} is not prime")));
    }
    let ring = RingSpec::Fp(field);
    let ctx = eval.ctx;
    let system = system_neg_count(ctx.p, ctx.m, ring)?;
    let m = inst.m;
    let instance = inst.formula()?;
    let ti = ptree_of(eval, &instance, "the FIE instance")?;
    if ti.branches().iter().any(|(_, l)| *l) {
        return Err(CompileError::Precondition(
            "instance tree has 1-branches; normalize first".into(),
        ));
    }
    for (rid, row) in inst.matrix()?.iter().enumerate() {
        require_models(eval, row, &format!("matrix row {rid}"))?;
    }

    let sigma_tree = |i: u32, j: u32| -> Result<&PTree<bool>, CompileError> {
        ptree_of(eval, &inst.sigma[&(i, j)], &format!("sigma[{i},{j}]"))
    };
    let mut f_polys = BTreeMap::new();
    for i in 1..=m + 1 {
        for j in 1..=m {
            f_polys.insert(
                (i, j),
                family_sum_poly(&sigma_tree(i, j)?.branches_labeled(true), ring),
            );
        }
    }

    // Row-1 trees with least-witness labels give the a-family.
    let row1 = |i: u32| Formula::or((1..=m).map(|j| inst.sigma[&(i, j)].clone()).collect());
    let mut a_polys = BTreeMap::new();
    let mut t1_label: BTreeMap<u32, BTreeMap<PartialPartition, u32>> = BTreeMap::new();
    let mut eq7 = BTreeMap::new();
    for i in 1..=m + 1 {
        let t = ptree_of(eval, &row1(i), "a row-1 instance")?;
        let mut labels = BTreeMap::new();
        for (b, l) in t.branches() {
            if !l {
                return Err(CompileError::Observation(format!(
                    "row-1 tree for i={i} has a 0-branch"
                )));
            }
            let mut jb = None;
            for j in 1..=m {
                if sigma_tree(i, j)?
                    .branches_labeled(true)
                    .iter()
                    .any(|s| b.extends(s))
                {
                    jb = Some(j);
                    break;
                }
            }
            let j = jb.ok_or_else(|| {
                CompileError::Observation(format!("branch {b} of row-1 tree extends no witness"))
            })?;
            labels.insert(b, j);
        }
        for j in 1..=m {
            let fam: Vec<PartialPartition> = labels
                .iter()
                .filter(|(_, &jj)| jj == j)
                .map(|(b, _)| b.clone())
                .collect();
            a_polys.insert((i, j), family_sum_poly(&fam, ring));
        }
        let coeffs = p_tree_sum_coeffs(t, &PartialPartition::empty(), &ctx, ring)?;
        let mut g1 = Polynomial::zero(ring);
        for j in 1..=m {
            g1 = g1.add(&a_polys[&(i, j)]);
        }
        let proof = NSProof { system: system.clone(), coeffs, g1, g2: Polynomial::one(ring) };
        if !verify_ns(&proof)?.valid {
            return Err(CompileError::Invariant(format!(
                "equation-7 certificate failed at i={i}"
            )));
        }
        eq7.insert(i, proof);
        t1_label.insert(i, labels);
    }

    // Row-2 trees give the b-family.
    let row2 = |i1: u32, i2: u32| -> Formula {
        Formula::or(
            (1..=m)
                .map(|j| {
                    Formula::or(vec![
                        Formula::and(vec![
                            inst.sigma[&(i1, j)].clone(),
                            Formula::not(inst.sigma[&(i2, j)].clone()),
                        ]),
                        Formula::and(vec![
                            Formula::not(inst.sigma[&(i1, j)].clone()),
                            inst.sigma[&(i2, j)].clone(),
                        ]),
                    ])
                })
                .collect(),
        )
    };
    let mut b_polys = BTreeMap::new();
    let mut t2_label: BTreeMap<(u32, u32), BTreeMap<PartialPartition, u32>> = BTreeMap::new();
    let mut eq8 = BTreeMap::new();
    for i1 in 1..=m + 1 {
        for i2 in i1 + 1..=m + 1 {
            let t = ptree_of(eval, &row2(i1, i2), "a row-2 instance")?;
            let mut labels = BTreeMap::new();
            for (b, l) in t.branches() {
                if !l {
                    return Err(CompileError::Observation(format!(
                        "row-2 tree for ({i1},{i2}) has a 0-branch"
                    )));
                }
                let mut jb = None;
                for j in 1..=m {
                    let w1 = sigma_tree(i1, j)?;
                    let w2 = sigma_tree(i2, j)?;
                    let case_a = w1.branches_labeled(false).iter().all(|s| b.conflicts(s))
                        && w2.branches_labeled(true).iter().all(|s| b.conflicts(s));
                    let case_b = w1.branches_labeled(true).iter().all(|s| b.conflicts(s))
                        && w2.branches_labeled(false).iter().all(|s| b.conflicts(s));
                    if case_a || case_b {
                        jb = Some(j);
                        break;
                    }
                }
                let j = jb.ok_or_else(|| {
                    CompileError::Observation(format!(
                        "branch {b} of row-2 tree for ({i1},{i2}) has no separating index"
                    ))
                })?;
                labels.insert(b, j);
            }
            for j in 1..=m {
                let fam: Vec<PartialPartition> = labels
                    .iter()
                    .filter(|(_, &jj)| jj == j)
                    .map(|(bb, _)| bb.clone())
                    .collect();
                b_polys.insert((i1, i2, j), family_sum_poly(&fam, ring));
            }
            let coeffs = p_tree_sum_coeffs(t, &PartialPartition::empty(), &ctx, ring)?;
            let mut g1 = Polynomial::zero(ring);
            for j in 1..=m {
                g1 = g1.add(&b_polys[&(i1, i2, j)]);
            }
            let proof = NSProof { system: system.clone(), coeffs, g1, g2: Polynomial::one(ring) };
            if !verify_ns(&proof)?.valid {
                return Err(CompileError::Invariant(format!(
                    "equation-8 certificate failed at ({i1},{i2})"
                )));
            }
            eq8.insert((i1, i2), proof);
            t2_label.insert((i1, i2), labels);
        }
    }

    // Equation 10: a_ij (1 − f_ij) = 0.
    let mut eq10 = BTreeMap::new();
    for i in 1..=m + 1 {
        for j in 1..=m {
            let a_fam: Vec<PartialPartition> = t1_label[&i]
                .iter()
                .filter(|(_, &jj)| jj == j)
                .map(|(b, _)| b.clone())
                .collect();
            let ts = sigma_tree(i, j)?;
            let zero_fam = ts.branches_labeled(false);
            let (t_prod, compat) = p_product_coeffs(&a_fam, &zero_fam, ring);
            if !compat.is_zero() {
                return Err(CompileError::Observation(format!(
                    "an a-witness is compatible with a 0-branch of sigma[{i},{j}]"
                )));
            }
            let c_tree = p_tree_sum_coeffs(ts, &PartialPartition::empty(), &ctx, ring)?;
            let a_poly = a_polys[&(i, j)].clone();
            let mut coeffs = Coeffs::new();
            coeffs_merge(&mut coeffs, &t_prod, 1);
            coeffs_merge(&mut coeffs, &coeffs_mul(&c_tree, &a_poly), -1);
            let g1 = a_poly.mul(&Polynomial::one(ring).sub(&f_polys[&(i, j)]));
            let proof =
                NSProof { system: system.clone(), coeffs, g1, g2: Polynomial::zero(ring) };
            if !verify_ns(&proof)?.valid {
                return Err(CompileError::Invariant(format!(
                    "equation-10 certificate failed at ({i},{j})"
                )));
            }
            eq10.insert((i, j), proof);
        }
    }

    // Equations 11 and 12.
    let mut eq11 = BTreeMap::new();
    let mut eq12 = BTreeMap::new();
    for i1 in 1..=m + 1 {
        for i2 in i1 + 1..=m + 1 {
            for j in 1..=m {
                let b_fam: Vec<PartialPartition> = t2_label[&(i1, i2)]
                    .iter()
                    .filter(|(_, &jj)| jj == j)
                    .map(|(bb, _)| bb.clone())
                    .collect();
                let w1 = sigma_tree(i1, j)?;
                let w2 = sigma_tree(i2, j)?;
                let b_poly = b_polys[&(i1, i2, j)].clone();
                let (t1c, _compat12) =
                    p_product_coeffs(&w1.branches_labeled(true), &w2.branches_labeled(true), ring);
                let compat_fam: Vec<PartialPartition> = {
                    let mut v = Vec::new();
                    for x in w1.branches_labeled(true) {
                        for y in w2.branches_labeled(true) {
                            if x.compatible(&y) {
                                v.push(x.union(&y).unwrap());
                            }
                        }
                    }
                    v
                };
                let (t2c, compat_b) = p_product_coeffs(&b_fam, &compat_fam, ring);
                if !compat_b.is_zero() {
                    return Err(CompileError::Observation(format!(
                        "a b-witness is compatible with a double 1-witness at ({i1},{i2},{j})"
                    )));
                }
                let mut coeffs = Coeffs::new();
                coeffs_merge(&mut coeffs, &t2c, 1);
                coeffs_merge(&mut coeffs, &coeffs_mul(&t1c, &b_poly), 1);
                let g1 = b_poly.mul(&f_polys[&(i1, j)]).mul(&f_polys[&(i2, j)]);
                let proof =
                    NSProof { system: system.clone(), coeffs, g1, g2: Polynomial::zero(ring) };
                if !verify_ns(&proof)?.valid {
                    return Err(CompileError::Invariant(format!(
                        "equation-11 certificate failed at ({i1},{i2},{j})"
                    )));
                }
                eq11.insert((i1, i2, j), proof);

                let z1 = w1.branches_labeled(false);
                let z2 = w2.branches_labeled(false);
                let (ta, _compat_z) = p_product_coeffs(&z1, &z2, ring);
                let compat_z_fam: Vec<PartialPartition> = {
                    let mut v = Vec::new();
                    for x in &z1 {
                        for y in &z2 {
                            if x.compatible(y) {
                                v.push(x.union(y).unwrap());
                            }
                        }
                    }
                    v
                };
                let (tb, compat_bz) = p_product_coeffs(&b_fam, &compat_z_fam, ring);
                if !compat_bz.is_zero() {
                    return Err(CompileError::Observation(format!(
                        "a b-witness is compatible with a double 0-branch at ({i1},{i2},{j})"
                    )));
                }
                let c1 = p_tree_sum_coeffs(w1, &PartialPartition::empty(), &ctx, ring)?;
                let c2 = p_tree_sum_coeffs(w2, &PartialPartition::empty(), &ctx, ring)?;
                let p1 = family_sum_poly(&z1, ring);
                let one = Polynomial::one(ring);
                let one_m_f2 = one.sub(&f_polys[&(i2, j)]);
                // b(1−f1)(1−f2) = b·P1·P2 + b·P1·[(1−f2)−P2]
                //               + b(1−f2)[(1−f1)−P1].
                let mut coeffs = Coeffs::new();
                coeffs_merge(&mut coeffs, &coeffs_mul(&ta, &b_poly), 1);
                coeffs_merge(&mut coeffs, &tb, 1);
                coeffs_merge(&mut coeffs, &coeffs_mul(&c2, &b_poly.mul(&p1)), -1);
                coeffs_merge(&mut coeffs, &coeffs_mul(&c1, &b_poly.mul(&one_m_f2)), -1);
                let g1 = b_poly.mul(&one.sub(&f_polys[&(i1, j)])).mul(&one_m_f2);
                let proof =
                    NSProof { system: system.clone(), coeffs, g1, g2: Polynomial::zero(ring) };
                if !verify_ns(&proof)?.valid {
                    return Err(CompileError::Invariant(format!(
                        "equation-12 certificate failed at ({i1},{i2},{j})"
                    )));
                }
                eq12.insert((i1, i2, j), proof);
            }
        }
    }

    // Equation 9: inner products agree across pairs, via label matching of
    // the two staged tree families.
    let row3 = |q: (u32, u32), qp: (u32, u32), j: u32| -> Formula {
        Formula::or(vec![
            Formula::not(inst.sigma[&(q.0, j)].clone()),
            Formula::not(inst.sigma[&(q.1, j)].clone()),
            Formula::or(
                (1..=m)
                    .map(|jp| inst.phi[&(q.0, q.1, qp.0, qp.1, j, jp)].clone())
                    .collect(),
            ),
        ])
    };
    let row4f = |q: (u32, u32), qp: (u32, u32), jp: u32| -> Formula {
        Formula::or(vec![
            Formula::not(inst.sigma[&(qp.0, jp)].clone()),
            Formula::not(inst.sigma[&(qp.1, jp)].clone()),
            Formula::or(
                (1..=m)
                    .map(|j| inst.phi[&(q.0, q.1, qp.0, qp.1, j, jp)].clone())
                    .collect(),
            ),
        ])
    };
    let mut eq9 = BTreeMap::new();
    let pairs: Vec<(u32, u32)> = (1..=m + 1)
        .flat_map(|a| (a + 1..=m + 1).map(move |b| (a, b)))
        .collect();
    for &q in &pairs {
        for &qp in &pairs {
            let side = |base: (u32, u32),
                        primed: (u32, u32),
                        left_side: bool|
             -> Result<
                (Coeffs, Polynomial, BTreeMap<(u32, u32), BTreeSet<PartialPartition>>),
                CompileError,
            > {
                let mut coeffs = Coeffs::new();
                let mut gsum = Polynomial::zero(ring);
                let mut labeled: BTreeMap<(u32, u32), BTreeSet<PartialPartition>> =
                    BTreeMap::new();
                for j in 1..=m {
                    let w1 = sigma_tree(base.0, j)?;
                    let w2 = sigma_tree(base.1, j)?;
                    let mut grafts = BTreeMap::new();
                    for b in w1.branches_labeled(true) {
                        grafts.insert(b.clone(), w2.strip().restrict(&b)?);
                    }
                    let a_tree = w1.strip().concat(&grafts)?;
                    let mut pair_fam = Vec::new();
                    for x in w1.branches_labeled(true) {
                        for y in w2.branches_labeled(true) {
                            if x.compatible(&y) {
                                pair_fam.push(x.union(&y).unwrap());
                            }
                        }
                    }
                    let b_set: Vec<PartialPartition> = a_tree
                        .branches()
                        .into_iter()
                        .map(|(b, _)| b)
                        .filter(|b| pair_fam.iter().any(|s| b.extends(s)))
                        .collect();
                    let (t1, _) = p_product_coeffs(
                        &w1.branches_labeled(true),
                        &w2.branches_labeled(true),
                        ring,
                    );
                    let t2 = p_sum_extensions_coeffs(&a_tree, &pair_fam, &ctx, ring)?;
                    let guide = if left_side {
                        ptree_of(eval, &row3(base, primed, j), "a row-3 instance")?
                    } else {
                        ptree_of(eval, &row4f(primed, base, j), "a row-4 instance")?
                    };
                    let mut rgrafts = BTreeMap::new();
                    for b in &b_set {
                        rgrafts.insert(b.clone(), guide.strip().restrict(b)?);
                    }
                    let r_tree = a_tree.concat(&rgrafts)?;
                    let rb_set: Vec<PartialPartition> = r_tree
                        .branches()
                        .into_iter()
                        .map(|(b, _)| b)
                        .filter(|b| b_set.iter().any(|s| b.extends(s)))
                        .collect();
                    let mut partner: BTreeMap<PartialPartition, u32> = BTreeMap::new();
                    for r in &rb_set {
                        let mut js = Vec::new();
                        for jx in 1..=m {
                            let key = if left_side {
                                (base.0, base.1, primed.0, primed.1, j, jx)
                            } else {
                                (primed.0, primed.1, base.0, base.1, jx, j)
                            };
                            let tphi = ptree_of(eval, &inst.phi[&key], "phi")?;
                            if tphi.branches_labeled(true).iter().any(|s| r.extends(s)) {
                                js.push(jx);
                            }
                        }
                        if js.len() != 1 {
                            return Err(CompileError::Observation(format!(
                                "guide branch {r} determines {} partners",
                                js.len()
                            )));
                        }
                        partner.insert(r.clone(), js[0]);
                    }
                    let t3 = p_sum_extensions_coeffs(&r_tree, &b_set, &ctx, ring)?;
                    let mut final_grafts = BTreeMap::new();
                    for r in &rb_set {
                        let jp = partner[r];
                        // The other side's doubled tree with its guide at the
                        // partner index.
                        let ow1 = sigma_tree(primed.0, jp)?;
                        let ow2 = sigma_tree(primed.1, jp)?;
                        let mut og = BTreeMap::new();
                        for b in ow1.branches_labeled(true) {
                            og.insert(b.clone(), ow2.strip().restrict(&b)?);
                        }
                        let other_a = ow1.strip().concat(&og)?;
                        let other_guide = if left_side {
                            ptree_of(eval, &row4f(base, primed, jp), "a row-4 instance")?
                        } else {
                            ptree_of(eval, &row3(primed, base, jp), "a row-3 instance")?
                        };
                        let other_pairs: Vec<PartialPartition> = {
                            let mut v = Vec::new();
                            for x in ow1.branches_labeled(true) {
                                for y in ow2.branches_labeled(true) {
                                    if x.compatible(&y) {
                                        v.push(x.union(&y).unwrap());
                                    }
                                }
                            }
                            v
                        };
                        let mut og2 = BTreeMap::new();
                        for (bb, _) in other_a.branches() {
                            if other_pairs.iter().any(|s| bb.extends(s)) {
                                og2.insert(bb.clone(), other_guide.strip().restrict(&bb)?);
                            }
                        }
                        let other_r = other_a.concat(&og2)?;
                        final_grafts.insert(r.clone(), other_r.restrict(r)?);
                    }
                    let s_tree = r_tree.concat(&final_grafts)?;
                    let t4 = p_sum_extensions_coeffs(&s_tree, &rb_set, &ctx, ring)?;
                    for (bb, _) in s_tree.branches() {
                        if let Some(r) = rb_set.iter().find(|r| bb.extends(r)) {
                            let jp = partner[r];
                            let key = if left_side { (j, jp) } else { (jp, j) };
                            labeled.entry(key).or_default().insert(bb.clone());
                        }
                    }
                    coeffs_merge(&mut coeffs, &t1, 1);
                    coeffs_merge(&mut coeffs, &t2, -1);
                    coeffs_merge(&mut coeffs, &t3, -1);
                    coeffs_merge(&mut coeffs, &t4, -1);
                    gsum = gsum.add(&f_polys[&(base.0, j)].mul(&f_polys[&(base.1, j)]));
                }
                Ok((coeffs, gsum, labeled))
            };
            let (cl, gl, lab_l) = side(q, qp, true)?;
            let (cr, gr, lab_r) = side(qp, q, false)?;
            let keys: BTreeSet<(u32, u32)> = lab_l.keys().chain(lab_r.keys()).copied().collect();
            for key in keys {
                let a = lab_l.get(&key).cloned().unwrap_or_default();
                let b = lab_r.get(&key).cloned().unwrap_or_default();
                if a != b {
                    return Err(CompileError::Invariant(format!(
                        "label matching failed at {key:?} for pairs {q:?}/{qp:?}"
                    )));
                }
            }
            let mut coeffs = Coeffs::new();
            coeffs_merge(&mut coeffs, &cl, 1);
            coeffs_merge(&mut coeffs, &cr, -1);
            let proof = NSProof { system: system.clone(), coeffs, g1: gl, g2: gr };
            if !verify_ns(&proof)?.valid {
                return Err(CompileError::Invariant(format!(
                    "equation-9 certificate failed for {q:?}/{qp:?}"
                )));
            }
            eq9.insert((q.0, q.1, qp.0, qp.1), proof);
        }
    }

    let degree_bound = eq7
        .values()
        .chain(eq8.values())
        .chain(eq9.values())
        .chain(eq10.values())
        .chain(eq11.values())
        .chain(eq12.values())
        .map(|p| verify_ns(p).map(|r| r.degree))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .max()
        .unwrap_or(Degree::NegInf);
    Ok(FieWitnessPolys {
        m,
        f: f_polys,
        a: a_polys,
        b: b_polys,
        eq7,
        eq8,
        eq9,
        eq10,
        eq11,
        eq12,
        degree_bound,
    })
}
