//! k-evaluations: subformula-closed maps from formulas to labelled decision
//! trees, the per-line soundness audit for proofs with axiom schemes, and the
//! normalization step that empties the 1-branches of a falsified instance.

use crate::formula::{Formula, Var};
use crate::partial::{restrict_formula, PartialError, PartialInjection, PartialPartition, Universe};
use crate::tree::{PContext, PTree, Tree, TreeError};
use serde_json::{json, Value};
use std::collections::{BTreeMap, BTreeSet, HashMap};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("formula not in evaluation domain: {0}")]
    NotInDomain(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Partial(#[from] PartialError),
}

/// A report from the condition checker: one message per violation.
#[derive(Debug, Clone, Default)]
pub struct ConditionReport {
    pub violations: Vec<String>,
}

impl ConditionReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// A k-evaluation using injection trees. Keys are kept in constant-propagated
/// form; lookups propagate before hashing.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub universe: Universe,
    pub k: u32,
    map: HashMap<Formula, Tree<bool>>,
}

impl Evaluation {
    pub fn new(universe: Universe, k: u32) -> Evaluation {
        Evaluation { universe, k, map: HashMap::new() }
    }

    pub fn insert(&mut self, f: &Formula, t: Tree<bool>) {
        self.map.insert(f.propagate(), t);
    }

    pub fn get(&self, f: &Formula) -> Option<&Tree<bool>> {
        self.map.get(&f.propagate())
    }

    pub fn contains(&self, f: &Formula) -> bool {
        self.get(f).is_some()
    }

    pub fn domain(&self) -> impl Iterator<Item = &Formula> {
        self.map.keys()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// `T ⊨ φ`: all branches labelled 1.
    pub fn models(&self, f: &Formula) -> Result<bool, EvalError> {
        let t = self
            .get(f)
            .ok_or_else(|| EvalError::NotInDomain(format!("{:?}", f)))?;
        Ok(t.branches().iter().all(|(_, l)| *l))
    }

    /// Verify conditions 1-6 of the k-evaluation definition, reporting every
    /// failure. Condition 6 is checked with the representation predicate on
    /// the immediate children of each or-node.
    pub fn check(&self) -> ConditionReport {
        let mut rep = ConditionReport::default();
        for (f, t) in &self.map {
            // Condition 1: a labelled tree over the universe with height <= k.
            if let Err(e) = t.validate(&self.universe) {
                rep.violations.push(format!("cond1: {:?}: {e}", f));
            }
            if t.height() > self.k as usize {
                rep.violations
                    .push(format!("cond1: {:?}: height {} > k={}", f, t.height(), self.k));
            }
            // Subformula closure.
            for c in f.children() {
                if !self.contains(c) {
                    rep.violations
                        .push(format!("closure: child {:?} of {:?} missing", c, f));
                }
            }
            match f {
                Formula::Const(false) => {
                    if *t != Tree::Leaf(false) {
                        rep.violations.push("cond2: T_0 must be the 0-leaf".into());
                    }
                }
                Formula::Const(true) => {
                    if *t != Tree::Leaf(true) {
                        rep.violations.push("cond3: T_1 must be the 1-leaf".into());
                    }
                }
                Formula::Var(Var::Inj { pigeon, hole }) => {
                    let expected = Tree::pigeon_query(&self.universe, *pigeon, |j| {
                        Tree::Leaf(j == *hole)
                    });
                    if *t != expected {
                        rep.violations.push(format!(
                            "cond4: tree for r[{pigeon},{hole}] is not the height-1 pigeon query"
                        ));
                    }
                }
                Formula::Var(v) => {
                    rep.violations
                        .push(format!("cond4: variable {v} is not an injection variable"));
                }
                Formula::Not(g) => match self.get(g) {
                    Some(tg) => {
                        if *t != tg.complement() {
                            rep.violations
                                .push(format!("cond5: tree for ¬{:?} is not the complement", g));
                        }
                    }
                    None => rep
                        .violations
                        .push(format!("cond5: negand {:?} missing from domain", g)),
                },
                Formula::Or(cs) => {
                    let mut family: BTreeSet<PartialInjection> = BTreeSet::new();
                    let mut complete = true;
                    for c in cs {
                        match self.get(c) {
                            Some(tc) => family.extend(tc.branches_labeled(true)),
                            None => complete = false,
                        }
                    }
                    if complete && !t.represents(&family) {
                        rep.violations.push(format!(
                            "cond6: or-tree does not represent the union of 1-branches ({:?})",
                            f
                        ));
                    }
                }
            }
        }
        rep
    }

    /// Restrict every tree and every formula of the evaluation by ρ.
    pub fn restrict(&self, rho: &PartialInjection) -> Result<Evaluation, EvalError> {
        let universe = self.universe.minus(rho);
        let mut out = Evaluation::new(universe, self.k);
        for (f, t) in &self.map {
            let f2 = restrict_formula(f, rho, &self.universe)?;
            let t2 = t.restrict(rho)?;
            if let Some(prev) = out.get(&f2) {
                if *prev != t2 {
                    return Err(EvalError::Precondition(format!(
                        "restriction collapses {:?} onto two distinct trees",
                        f2
                    )));
                }
            }
            out.insert(&f2, t2);
        }
        Ok(out)
    }
}

/// Pick the first 0-branch of the instance tree, restrict the whole
/// evaluation by it, and return the restriction with the chosen branch.
/// Afterwards every branch of the instance tree is labelled 0.
pub fn normalize_instance(
    instance: &Formula,
    eval: &Evaluation,
) -> Result<(PartialInjection, Evaluation), EvalError> {
    let t = eval
        .get(instance)
        .ok_or_else(|| EvalError::NotInDomain(format!("{:?}", instance)))?;
    if eval.models(instance)? {
        return Err(EvalError::Precondition(
            "normalize_instance requires a falsified instance".into(),
        ));
    }
    let rho = t
        .branches_labeled(false)
        .into_iter()
        .next()
        .ok_or_else(|| EvalError::Precondition("no 0-branch".into()))?;
    let restricted = eval.restrict(&rho)?;
    Ok((rho, restricted))
}

// ---------------------------------------------------------------------------
// Frege-style proof objects
// ---------------------------------------------------------------------------

/// A UCP axiom-scheme instance: parameters plus the substitution of formulas
/// for the scheme variables r[i,j,e].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UcpAxiom {
    pub l: u32,
    pub d: u32,
    pub k: u32,
    pub subst: BTreeMap<(u32, u32, u32), Formula>,
}

impl UcpAxiom {
    /// The instantiated axiom formula.
    pub fn formula(&self) -> Result<Formula, EvalError> {
        let inst = crate::principles::generate(
            crate::principles::PrincipleId::Ucp,
            crate::principles::Params {
                l: Some(self.l),
                d: Some(self.d),
                n: Some(self.k),
                ..Default::default()
            },
        )
        .map_err(|e| EvalError::Precondition(e.to_string()))?;
        let mut map = HashMap::new();
        for ((i, j, e), f) in &self.subst {
            map.insert(Var::Ucp { i: *i, j: *j, e: *e }, f.clone());
        }
        inst.formula
            .substitute(&map)
            .map_err(|e| EvalError::Precondition(e.to_string()))
    }

    /// The instantiated matrix conjuncts, in display order.
    pub fn matrix(&self) -> Result<Vec<Formula>, EvalError> {
        let inst = crate::principles::generate(
            crate::principles::PrincipleId::Ucp,
            crate::principles::Params {
                l: Some(self.l),
                d: Some(self.d),
                n: Some(self.k),
                ..Default::default()
            },
        )
        .map_err(|e| EvalError::Precondition(e.to_string()))?;
        let mut map = HashMap::new();
        for ((i, j, e), f) in &self.subst {
            map.insert(Var::Ucp { i: *i, j: *j, e: *e }, f.clone());
        }
        inst.matrix
            .iter()
            .map(|c| {
                c.substitute(&map)
                    .map_err(|e| EvalError::Precondition(e.to_string()))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Justification {
    UcpAxiom(UcpAxiom),
    Rule { name: String, premises: Vec<usize> },
    LogicalAxiom,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofLine {
    pub formula: Formula,
    pub just: Justification,
}

/// An ordered proof with per-line justifications; the final line is the
/// target formula.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FregeProof {
    pub lines: Vec<ProofLine>,
}

impl FregeProof {
    pub fn validate(&self) -> Result<(), EvalError> {
        for (idx, line) in self.lines.iter().enumerate() {
            if let Justification::Rule { premises, .. } = &line.just {
                for &p in premises {
                    if p >= idx {
                        return Err(EvalError::Precondition(format!(
                            "line {idx}: premise {p} does not precede it"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn target(&self) -> Option<&Formula> {
        self.lines.last().map(|l| &l.formula)
    }

    pub fn to_json(&self) -> Value {
        let lines: Vec<Value> = self
            .lines
            .iter()
            .map(|l| {
                let just = match &l.just {
                    Justification::UcpAxiom(a) => json!({
                        "axiom": {
                            "scheme": "ucp",
                            "params": { "l": a.l, "d": a.d, "k": a.k },
                            "subst": a.subst.iter().map(|((i,j,e), f)| {
                                (format!("r[{i},{j},{e}]"), f.to_json())
                            }).collect::<serde_json::Map<_,_>>(),
                        }
                    }),
                    Justification::Rule { name, premises } => json!({
                        "rule": { "name": name, "premises": premises }
                    }),
                    Justification::LogicalAxiom => json!({ "logical": true }),
                };
                json!({ "formula": l.formula.to_json(), "just": just })
            })
            .collect();
        json!({ "lines": lines })
    }

    pub fn from_json(v: &Value) -> Result<FregeProof, EvalError> {
        let arr = v
            .get("lines")
            .and_then(|x| x.as_array())
            .ok_or_else(|| EvalError::Precondition("proof file must have lines".into()))?;
        let mut lines = Vec::new();
        for item in arr {
            let formula = Formula::from_json(item.get("formula").ok_or_else(|| {
                EvalError::Precondition("line missing formula".into())
            })?)
            .map_err(|e| EvalError::Precondition(e.to_string()))?;
            let just_v = item
                .get("just")
                .ok_or_else(|| EvalError::Precondition("line missing just".into()))?;
            let just = if let Some(ax) = just_v.get("axiom") {
                let scheme = ax.get("scheme").and_then(|s| s.as_str()).unwrap_or("");
                if scheme != "ucp" {
                    return Err(EvalError::Precondition(format!("unknown scheme {scheme}")));
                }
                let params = ax.get("params").cloned().unwrap_or(json!({}));
                let geti = |k: &str| -> Result<u32, EvalError> {
                    params
                        .get(k)
                        .and_then(|x| x.as_u64())
                        .map(|x| x as u32)
                        .ok_or_else(|| EvalError::Precondition(format!("missing param {k}")))
                };
                let mut subst = BTreeMap::new();
                if let Some(obj) = ax.get("subst").and_then(|s| s.as_object()) {
                    for (name, fv) in obj {
                        let var = crate::formula::parse_var(name)
                            .map_err(|e| EvalError::Precondition(e.to_string()))?;
                        if let Var::Ucp { i, j, e } = var {
                            let f = Formula::from_json(fv)
                                .map_err(|e| EvalError::Precondition(e.to_string()))?;
                            subst.insert((i, j, e), f);
                        } else {
                            return Err(EvalError::Precondition(format!(
                                "subst key {name} is not a UCP variable"
                            )));
                        }
                    }
                }
                Justification::UcpAxiom(UcpAxiom {
                    l: geti("l")?,
                    d: geti("d")?,
                    k: geti("k")?,
                    subst,
                })
            } else if let Some(rule) = just_v.get("rule") {
                let name = rule
                    .get("name")
                    .and_then(|s| s.as_str())
                    .unwrap_or("")
                    .to_string();
                let premises = rule
                    .get("premises")
                    .and_then(|p| p.as_array())
                    .map(|a| a.iter().filter_map(|x| x.as_u64().map(|y| y as usize)).collect())
                    .unwrap_or_default();
                Justification::Rule { name, premises }
            } else {
                Justification::LogicalAxiom
            };
            lines.push(ProofLine { formula, just });
        }
        let proof = FregeProof { lines };
        proof.validate()?;
        Ok(proof)
    }
}

/// Return the indices of all lines whose formulas the evaluation falsifies.
pub fn audit_proof(proof: &FregeProof, eval: &Evaluation) -> Result<Vec<usize>, EvalError> {
    let mut out = Vec::new();
    for (idx, line) in proof.lines.iter().enumerate() {
        if !eval.models(&line.formula)? {
            out.push(idx);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// p-tree evaluations (for the counting-principle side)
// ---------------------------------------------------------------------------

/// A k-evaluation using p-trees over block variables.
#[derive(Debug, Clone)]
pub struct PEvaluation {
    pub ctx: PContext,
    pub k: u32,
    map: HashMap<Formula, PTree<bool>>,
}

impl PEvaluation {
    pub fn new(ctx: PContext, k: u32) -> PEvaluation {
        PEvaluation { ctx, k, map: HashMap::new() }
    }

    pub fn insert(&mut self, f: &Formula, t: PTree<bool>) {
        self.map.insert(f.propagate(), t);
    }

    pub fn get(&self, f: &Formula) -> Option<&PTree<bool>> {
        self.map.get(&f.propagate())
    }

    pub fn contains(&self, f: &Formula) -> bool {
        self.get(f).is_some()
    }

    pub fn models(&self, f: &Formula) -> Result<bool, EvalError> {
        let t = self
            .get(f)
            .ok_or_else(|| EvalError::NotInDomain(format!("{:?}", f)))?;
        Ok(t.branches().iter().all(|(_, l)| *l))
    }

    /// Conditions 1-6 with blocks replacing pairs. The atom tree for a block
    /// variable queries the least element of the block.
    pub fn check(&self) -> ConditionReport {
        let mut rep = ConditionReport::default();
        for (f, t) in &self.map {
            if let Err(e) = t.validate(&self.ctx, &BTreeSet::new()) {
                rep.violations.push(format!("cond1: {:?}: {e}", f));
            }
            if t.height() > self.k as usize {
                rep.violations
                    .push(format!("cond1: {:?}: height {} > k={}", f, t.height(), self.k));
            }
            for c in f.children() {
                if !self.contains(c) {
                    rep.violations
                        .push(format!("closure: child {:?} of {:?} missing", c, f));
                }
            }
            match f {
                Formula::Const(false) => {
                    if *t != PTree::Leaf(false) {
                        rep.violations.push("cond2: T_0 must be the 0-leaf".into());
                    }
                }
                Formula::Const(true) => {
                    if *t != PTree::Leaf(true) {
                        rep.violations.push("cond3: T_1 must be the 1-leaf".into());
                    }
                }
                Formula::Var(Var::Count { block }) => {
                    let v = *block.iter().min().unwrap_or(&1);
                    let expected = PTree::Query {
                        element: v,
                        edges: self
                            .ctx
                            .all_blocks_with(v, &BTreeSet::new())
                            .into_iter()
                            .map(|b| {
                                let lab = b == *block;
                                (b, PTree::Leaf(lab))
                            })
                            .collect(),
                    };
                    if *t != expected {
                        rep.violations.push(format!(
                            "cond4: tree for block variable {block:?} is not the height-1 query"
                        ));
                    }
                }
                Formula::Var(v) => {
                    rep.violations
                        .push(format!("cond4: variable {v} is not a block variable"));
                }
                Formula::Not(g) => match self.get(g) {
                    Some(tg) => {
                        if *t != tg.complement() {
                            rep.violations
                                .push(format!("cond5: tree for ¬{:?} is not the complement", g));
                        }
                    }
                    None => rep
                        .violations
                        .push(format!("cond5: negand {:?} missing from domain", g)),
                },
                Formula::Or(cs) => {
                    let mut family: BTreeSet<PartialPartition> = BTreeSet::new();
                    let mut complete = true;
                    for c in cs {
                        match self.get(c) {
                            Some(tc) => family.extend(tc.branches_labeled(true)),
                            None => complete = false,
                        }
                    }
                    if complete && !t.represents(&family) {
                        rep.violations.push(format!(
                            "cond6: or-tree does not represent the union of 1-branches ({:?})",
                            f
                        ));
                    }
                }
            }
        }
        rep
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(i: u32, j: u32) -> Formula {
        Formula::var(Var::Inj { pigeon: i, hole: j })
    }

    fn atom_tree(u: &Universe, i: u32, j: u32) -> Tree<bool> {
        Tree::pigeon_query(u, i, |h| Tree::Leaf(h == j))
    }

    /// Build a bottom-up evaluation for a subformula-closed set, using the
    /// list-driven builder for or-nodes and complements for negations.
    pub fn build_eval(u: &Universe, k: u32, formulas: &[Formula]) -> Evaluation {
        let mut ev = Evaluation::new(u.clone(), k);
        fn go(ev: &mut Evaluation, u: &Universe, f: &Formula) {
            if ev.contains(f) {
                return;
            }
            match &f.propagate() {
                Formula::Const(b) => ev.insert(f, Tree::Leaf(*b)),
                Formula::Var(Var::Inj { pigeon, hole }) => {
                    let t = Tree::pigeon_query(u, *pigeon, |h| Tree::Leaf(h == *hole));
                    ev.insert(f, t);
                }
                Formula::Var(_) => unreachable!("injection evaluations only"),
                Formula::Not(g) => {
                    go(ev, u, g);
                    let t = ev.get(g).unwrap().complement();
                    ev.insert(f, t);
                }
                Formula::Or(cs) => {
                    let mut family = Vec::new();
                    for c in cs {
                        go(ev, u, c);
                        family.extend(ev.get(c).unwrap().branches_labeled(true));
                    }
                    let t = tree_from_list_dedup(u, &family);
                    ev.insert(f, t);
                }
            }
        }
        fn tree_from_list_dedup(u: &Universe, fam: &[PartialInjection]) -> Tree<bool> {
            let mut seen = BTreeSet::new();
            let uniq: Vec<PartialInjection> = fam
                .iter()
                .filter(|s| seen.insert((*s).clone()))
                .cloned()
                .collect();
            crate::tree::tree_from_list(u, &uniq).expect("builder within height bounds")
        }
        for f in formulas {
            go(&mut ev, u, f);
        }
        ev
    }

    #[test]
    fn constants_pass() {
        let u = Universe::new(2, 1);
        let mut ev = Evaluation::new(u, 1);
        ev.insert(&Formula::Const(false), Tree::Leaf(false));
        ev.insert(&Formula::Const(true), Tree::Leaf(true));
        assert!(ev.check().ok());
        assert_eq!(ev.models(&Formula::Const(true)).unwrap(), true);
        assert_eq!(ev.models(&Formula::Const(false)).unwrap(), false);
    }

    #[test]
    fn atom_tree_passes_condition_4() {
        let u = Universe::new(2, 2);
        let mut ev = Evaluation::new(u.clone(), 1);
        ev.insert(&atom(1, 2), atom_tree(&u, 1, 2));
        assert!(ev.check().ok());
    }

    #[test]
    fn condition_5_failure_detected() {
        let u = Universe::new(2, 2);
        let mut ev = Evaluation::new(u.clone(), 1);
        ev.insert(&atom(1, 2), atom_tree(&u, 1, 2));
        // Wrong: not the complement.
        ev.insert(&Formula::not(atom(1, 2)), atom_tree(&u, 1, 2));
        let rep = ev.check();
        assert!(rep.violations.iter().any(|v| v.contains("cond5")));
    }

    #[test]
    fn build_eval_passes_all_conditions() {
        let u = Universe::new(3, 2);
        let f = Formula::or(vec![atom(1, 1), atom(2, 1), atom(3, 1)]);
        let ev = build_eval(&u, 2, &[f.clone()]);
        let rep = ev.check();
        assert!(rep.ok(), "{:?}", rep.violations);
    }

    #[test]
    fn models_or_built_from_tautological_cover() {
        // ⋁_j r[1,j] over (D_2, R_2): pigeon 1 goes somewhere.
        let u = Universe::new(2, 2);
        let f = Formula::or(vec![atom(1, 1), atom(1, 2)]);
        let ev = build_eval(&u, 2, &[f.clone()]);
        assert!(ev.models(&f).unwrap());
    }

    #[test]
    fn normalize_empties_one_branches() {
        let u = Universe::new(2, 2);
        // r[1,1] alone is falsified on the <1,2> branch.
        let f = atom(1, 1);
        let ev = build_eval(&u, 2, &[f.clone()]);
        assert!(!ev.models(&f).unwrap());
        let (rho, ev2) = normalize_instance(&f, &ev).unwrap();
        assert_eq!(rho, PartialInjection::new([(1, 2)], []).unwrap());
        let f2 = restrict_formula(&f, &rho, &u).unwrap();
        assert_eq!(f2, Formula::Const(false));
        let t2 = ev2.get(&f2).unwrap();
        assert!(t2.branches().iter().all(|(_, l)| !*l));
        assert!(ev2.check().ok());
    }

    #[test]
    fn audit_finds_falsified_lines() {
        let u = Universe::new(2, 2);
        let good = Formula::or(vec![atom(1, 1), atom(1, 2)]);
        let bad = atom(2, 2);
        let ev = build_eval(&u, 2, &[good.clone(), bad.clone()]);
        let proof = FregeProof {
            lines: vec![
                ProofLine { formula: good, just: Justification::LogicalAxiom },
                ProofLine {
                    formula: bad,
                    just: Justification::Rule { name: "weaken".into(), premises: vec![0] },
                },
            ],
        };
        proof.validate().unwrap();
        assert_eq!(audit_proof(&proof, &ev).unwrap(), vec![1]);
    }

    #[test]
    fn proof_json_roundtrip() {
        let mut subst = BTreeMap::new();
        subst.insert((1, 1, 1), atom(1, 1));
        subst.insert((1, 2, 1), atom(2, 1));
        let ax = UcpAxiom { l: 1, d: 2, k: 1, subst };
        let proof = FregeProof {
            lines: vec![ProofLine {
                formula: ax.formula().unwrap(),
                just: Justification::UcpAxiom(ax),
            }],
        };
        let j = proof.to_json();
        let back = FregeProof::from_json(&j).unwrap();
        assert_eq!(back, proof);
    }
}
