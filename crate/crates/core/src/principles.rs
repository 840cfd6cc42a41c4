//! Generators for the propositional counting-principle families, their
//! matrices (the conjunction under the outer negation, defined for all
//! parameter values), and a backtracking satisfiability test for matrices.

use crate::formula::{Assignment, Formula, Var};
use serde_json::{json, Value};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrincipleId {
    Count,
    InjPhp,
    OntoPhp,
    ModPhp,
    Ucp,
    Oddtown,
    Fie,
}

impl fmt::Display for PrincipleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PrincipleId::Count => "count",
            PrincipleId::InjPhp => "injphp",
            PrincipleId::OntoPhp => "ontophp",
            PrincipleId::ModPhp => "modphp",
            PrincipleId::Ucp => "ucp",
            PrincipleId::Oddtown => "oddtown",
            PrincipleId::Fie => "fie",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for PrincipleId {
    type Err = PrincipleError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "count" => Ok(PrincipleId::Count),
            "injphp" => Ok(PrincipleId::InjPhp),
            "ontophp" => Ok(PrincipleId::OntoPhp),
            "modphp" => Ok(PrincipleId::ModPhp),
            "ucp" => Ok(PrincipleId::Ucp),
            "oddtown" => Ok(PrincipleId::Oddtown),
            "fie" => Ok(PrincipleId::Fie),
            _ => Err(PrincipleError::UnknownId(s.to_string())),
        }
    }
}

/// Which reading of the fourth FIE conjunct family to emit. The displayed
/// form leaves an index unbound; `Intended` follows the bijection semantics
/// (membership of the primed pair tested at the target index), `LiteralClosure`
/// closes the stray index by an outer conjunction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FieVariant {
    #[default]
    Intended,
    LiteralClosure,
}

/// Parameter record; fields are read per principle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Params {
    pub p: Option<u32>,
    pub n: Option<u32>,
    pub m: Option<u32>,
    pub d: Option<u32>,
    pub l: Option<u32>,
    pub fie_variant: Option<FieVariant>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PrincipleError {
    #[error("unknown principle id {0}")]
    UnknownId(String),
    #[error("parameter error: {0}")]
    Param(String),
}

/// A generated principle instance: the formula (constant 1 outside the side
/// condition), the matrix conjuncts in display order, and the variable index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrincipleInstance {
    pub id: PrincipleId,
    pub params: Params,
    pub formula: Formula,
    pub matrix: Vec<Formula>,
    pub vars: Vec<Var>,
}

impl PrincipleInstance {
    pub fn to_json(&self) -> Value {
        json!({
            "id": self.id.to_string(),
            "params": {
                "p": self.params.p, "n": self.params.n, "m": self.params.m,
                "d": self.params.d, "l": self.params.l,
            },
            "vars": self.vars.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
            "formula": self.formula.to_json(),
            "matrix": self.matrix.iter().map(|c| c.to_json()).collect::<Vec<_>>(),
        })
    }
}

/// All p-subsets of [n] as sorted tuples, in lexicographic order.
pub fn p_subsets(n: u32, p: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur: Vec<u32> = Vec::new();
    fn rec(n: u32, p: u32, start: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == p as usize {
            out.push(cur.clone());
            return;
        }
        let need = p as usize - cur.len();
        for x in start..=n {
            if (n - x + 1) as usize >= need {
                cur.push(x);
                rec(n, p, x + 1, cur, out);
                cur.pop();
            }
        }
    }
    if p == 0 || p > n {
        if p == 0 {
            out.push(vec![]);
        }
        return out;
    }
    rec(n, p, 1, &mut cur, &mut out);
    out
}

/// `e ⊥ e'`: distinct and intersecting.
pub fn blocks_conflict(a: &[u32], b: &[u32]) -> bool {
    a != b && a.iter().any(|x| b.contains(x))
}

/// Optional integer display code of a p-subset of [n]: Σ e_i (n+1)^{p−i}.
pub fn block_code(e: &[u32], n: u32) -> u64 {
    let base = (n + 1) as u64;
    e.iter().fold(0u64, |acc, &x| acc * base + x as u64)
}

fn check_positive(name: &str, v: Option<u32>) -> Result<u32, PrincipleError> {
    match v {
        Some(x) if x >= 1 => Ok(x),
        Some(x) => Err(PrincipleError::Param(format!("{name} must be >= 1, got {x}"))),
        None => Err(PrincipleError::Param(format!("missing parameter {name}"))),
    }
}

fn check_present(name: &str, v: Option<u32>) -> Result<u32, PrincipleError> {
    v.ok_or_else(|| PrincipleError::Param(format!("missing parameter {name}")))
}

/// Generate a principle instance. The matrix is defined for every parameter
/// set; the formula is `¬(⋀ matrix)` when the side condition holds and the
/// constant 1 otherwise.
pub fn generate(id: PrincipleId, params: Params) -> Result<PrincipleInstance, PrincipleError> {
    let (vars, matrix, side) = match id {
        PrincipleId::Count => {
            let p = check_positive("p", params.p)?;
            let n = check_present("n", params.n)?;
            let blocks = p_subsets(n, p);
            let vars: Vec<Var> = blocks
                .iter()
                .map(|b| Var::Count { block: b.clone() })
                .collect();
            let mut matrix = Vec::new();
            for k in 1..=n {
                matrix.push(Formula::or(
                    blocks
                        .iter()
                        .filter(|b| b.contains(&k))
                        .map(|b| Formula::var(Var::Count { block: b.clone() }))
                        .collect(),
                ));
            }
            for (ai, a) in blocks.iter().enumerate() {
                for b in blocks.iter().skip(ai + 1) {
                    if blocks_conflict(a, b) {
                        matrix.push(Formula::or(vec![
                            Formula::not(Formula::var(Var::Count { block: a.clone() })),
                            Formula::not(Formula::var(Var::Count { block: b.clone() })),
                        ]));
                    }
                }
            }
            (vars, matrix, n % p != 0)
        }
        PrincipleId::InjPhp | PrincipleId::OntoPhp | PrincipleId::ModPhp => {
            let m = check_positive("m", params.m)?;
            let n = check_present("n", params.n)?;
            let side = match id {
                PrincipleId::ModPhp => {
                    let d = check_positive("d", params.d)?;
                    m % d != n % d
                }
                _ => m > n,
            };
            let mut vars = Vec::new();
            for i in 1..=m {
                for j in 1..=n {
                    vars.push(Var::Inj { pigeon: i, hole: j });
                }
            }
            let r = |i: u32, j: u32| Formula::var(Var::Inj { pigeon: i, hole: j });
            let mut matrix = Vec::new();
            // Every pigeon is mapped.
            for i in 1..=m {
                matrix.push(Formula::or((1..=n).map(|j| r(i, j)).collect()));
            }
            // No hole holds two pigeons.
            for i in 1..=m {
                for i2 in i + 1..=m {
                    for j in 1..=n {
                        matrix.push(Formula::or(vec![
                            Formula::not(r(i, j)),
                            Formula::not(r(i2, j)),
                        ]));
                    }
                }
            }
            // Onto variants: every hole is covered (before functionality, in
            // display order).
            if matches!(id, PrincipleId::OntoPhp | PrincipleId::ModPhp) {
                for j in 1..=n {
                    matrix.push(Formula::or((1..=m).map(|i| r(i, j)).collect()));
                }
            }
            // No pigeon sits in two holes.
            for j in 1..=n {
                for j2 in j + 1..=n {
                    for i in 1..=m {
                        matrix.push(Formula::or(vec![
                            Formula::not(r(i, j)),
                            Formula::not(r(i, j2)),
                        ]));
                    }
                }
            }
            (vars, matrix, side)
        }
        PrincipleId::Ucp => {
            let l = check_positive("l", params.l)?;
            let d = check_positive("d", params.d)?;
            let n = check_present("n", params.n)?;
            let mut vars = Vec::new();
            for i in 1..=l {
                for j in 1..=d {
                    for e in 1..=n {
                        vars.push(Var::Ucp { i, j, e });
                    }
                }
            }
            let r = |i: u32, j: u32, e: u32| Formula::var(Var::Ucp { i, j, e });
            let mut matrix = Vec::new();
            // Each S_i is a full d-tuple or entirely empty.
            for i in 1..=l {
                let full = Formula::and(
                    (1..=d)
                        .map(|j| Formula::or((1..=n).map(|e| r(i, j, e)).collect()))
                        .collect(),
                );
                let empty = Formula::and(
                    (1..=d)
                        .map(|j| Formula::not(Formula::or((1..=n).map(|e| r(i, j, e)).collect())))
                        .collect(),
                );
                matrix.push(Formula::or(vec![full, empty]));
            }
            // Each slot holds at most one element.
            for i in 1..=l {
                for j in 1..=d {
                    for e in 1..=n {
                        for e2 in e + 1..=n {
                            matrix.push(Formula::or(vec![
                                Formula::not(r(i, j, e)),
                                Formula::not(r(i, j, e2)),
                            ]));
                        }
                    }
                }
            }
            // Distinct slots hold distinct elements.
            let slots: Vec<(u32, u32)> = (1..=l)
                .flat_map(|i| (1..=d).map(move |j| (i, j)))
                .collect();
            for (si, &(i, j)) in slots.iter().enumerate() {
                for &(i2, j2) in slots.iter().skip(si + 1) {
                    for e in 1..=n {
                        matrix.push(Formula::or(vec![
                            Formula::not(r(i, j, e)),
                            Formula::not(r(i2, j2, e)),
                        ]));
                    }
                }
            }
            // Every element is covered.
            for e in 1..=n {
                matrix.push(Formula::or(
                    slots.iter().map(|&(i, j)| r(i, j, e)).collect(),
                ));
            }
            (vars, matrix, d >= 1 && n % d != 0)
        }
        PrincipleId::Oddtown => {
            let n = check_present("n", params.n)?;
            let blocks = p_subsets(n, 2);
            let pair = |b: &Vec<u32>| (b[0], b[1]);
            let mut vars = Vec::new();
            for i in 1..=n + 1 {
                for j in 1..=n {
                    vars.push(Var::OddS { i, j });
                }
            }
            for i in 1..=n + 1 {
                for j in 1..=n {
                    vars.push(Var::OddQ { i, j });
                }
            }
            for i in 1..=n + 1 {
                for b in &blocks {
                    vars.push(Var::OddP { i, block: pair(b) });
                }
            }
            for i in 1..=n + 1 {
                for i2 in i + 1..=n + 1 {
                    for b in &blocks {
                        vars.push(Var::OddR { i, i2, block: pair(b) });
                    }
                }
            }
            let s = |i: u32, j: u32| Formula::var(Var::OddS { i, j });
            let q = |i: u32, j: u32| Formula::var(Var::OddQ { i, j });
            let pv = |i: u32, b: &Vec<u32>| Formula::var(Var::OddP { i, block: (b[0], b[1]) });
            let rv = |i: u32, i2: u32, b: &Vec<u32>| {
                Formula::var(Var::OddR { i, i2, block: (b[0], b[1]) })
            };
            let mut matrix = Vec::new();
            // 1. s_ij -> q_ij or covered by a P-block.
            for i in 1..=n + 1 {
                for j in 1..=n {
                    let mut cs = vec![Formula::not(s(i, j)), q(i, j)];
                    cs.push(Formula::or(
                        blocks
                            .iter()
                            .filter(|b| b.contains(&j))
                            .map(|b| pv(i, b))
                            .collect(),
                    ));
                    matrix.push(Formula::or(cs));
                }
            }
            // 2. q_ij -> s_ij.
            for i in 1..=n + 1 {
                for j in 1..=n {
                    matrix.push(Formula::or(vec![s(i, j), Formula::not(q(i, j))]));
                }
            }
            // 3. P-blocks sit inside S_i.
            for i in 1..=n + 1 {
                for j in 1..=n {
                    for b in blocks.iter().filter(|b| b.contains(&j)) {
                        matrix.push(Formula::or(vec![s(i, j), Formula::not(pv(i, b))]));
                    }
                }
            }
            // 4. Some q element exists.
            for i in 1..=n + 1 {
                matrix.push(Formula::or((1..=n).map(|j| q(i, j)).collect()));
            }
            // 5. The q element is unique.
            for i in 1..=n + 1 {
                for j in 1..=n {
                    for j2 in j + 1..=n {
                        matrix.push(Formula::or(vec![
                            Formula::not(q(i, j)),
                            Formula::not(q(i, j2)),
                        ]));
                    }
                }
            }
            // 6. The q element is not covered by P.
            for i in 1..=n + 1 {
                for j in 1..=n {
                    for b in blocks.iter().filter(|b| b.contains(&j)) {
                        matrix.push(Formula::or(vec![
                            Formula::not(q(i, j)),
                            Formula::not(pv(i, b)),
                        ]));
                    }
                }
            }
            // 7. P-blocks are disjoint.
            for i in 1..=n + 1 {
                for (ai, a) in blocks.iter().enumerate() {
                    for b in blocks.iter().skip(ai + 1) {
                        if blocks_conflict(a, b) {
                            matrix.push(Formula::or(vec![
                                Formula::not(pv(i, a)),
                                Formula::not(pv(i, b)),
                            ]));
                        }
                    }
                }
            }
            // 8. Shared elements are covered by R-blocks.
            for i in 1..=n + 1 {
                for i2 in i + 1..=n + 1 {
                    for j in 1..=n {
                        let mut cs = vec![Formula::not(s(i, j)), Formula::not(s(i2, j))];
                        cs.push(Formula::or(
                            blocks
                                .iter()
                                .filter(|b| b.contains(&j))
                                .map(|b| rv(i, i2, b))
                                .collect(),
                        ));
                        matrix.push(Formula::or(cs));
                    }
                }
            }
            // 9, 10. R-blocks sit inside both sets.
            for i in 1..=n + 1 {
                for i2 in i + 1..=n + 1 {
                    for j in 1..=n {
                        for b in blocks.iter().filter(|b| b.contains(&j)) {
                            matrix.push(Formula::or(vec![s(i, j), Formula::not(rv(i, i2, b))]));
                        }
                    }
                }
            }
            for i in 1..=n + 1 {
                for i2 in i + 1..=n + 1 {
                    for j in 1..=n {
                        for b in blocks.iter().filter(|b| b.contains(&j)) {
                            matrix.push(Formula::or(vec![s(i2, j), Formula::not(rv(i, i2, b))]));
                        }
                    }
                }
            }
            // 11. R-blocks are disjoint.
            for i in 1..=n + 1 {
                for i2 in i + 1..=n + 1 {
                    for (ai, a) in blocks.iter().enumerate() {
                        for b in blocks.iter().skip(ai + 1) {
                            if blocks_conflict(a, b) {
                                matrix.push(Formula::or(vec![
                                    Formula::not(rv(i, i2, a)),
                                    Formula::not(rv(i, i2, b)),
                                ]));
                            }
                        }
                    }
                }
            }
            (vars, matrix, n >= 1)
        }
        PrincipleId::Fie => {
            let n = check_present("n", params.n)?;
            let variant = params.fie_variant.unwrap_or_default();
            let mut vars = Vec::new();
            for i in 1..=n + 1 {
                for j in 1..=n {
                    vars.push(Var::FieS { i, j });
                }
            }
            let pairs: Vec<(u32, u32)> = (1..=n + 1)
                .flat_map(|a| (a + 1..=n + 1).map(move |b| (a, b)))
                .collect();
            for &(i1, i2) in &pairs {
                for &(i1p, i2p) in &pairs {
                    for j in 1..=n {
                        for jp in 1..=n {
                            vars.push(Var::FieR { i1, i2, i1p, i2p, j, jp });
                        }
                    }
                }
            }
            let s = |i: u32, j: u32| Formula::var(Var::FieS { i, j });
            let rr = |q: (u32, u32), qp: (u32, u32), j: u32, jp: u32| {
                Formula::var(Var::FieR { i1: q.0, i2: q.1, i1p: qp.0, i2p: qp.1, j, jp })
            };
            let mut matrix = Vec::new();
            // 1. Every S_i is nonempty.
            for i in 1..=n + 1 {
                matrix.push(Formula::or((1..=n).map(|j| s(i, j)).collect()));
            }
            // 2. Distinctness via a symmetric-difference witness.
            for &(i1, i2) in &pairs {
                matrix.push(Formula::or(
                    (1..=n)
                        .map(|j| {
                            Formula::or(vec![
                                Formula::and(vec![s(i1, j), Formula::not(s(i2, j))]),
                                Formula::and(vec![Formula::not(s(i1, j)), s(i2, j)]),
                            ])
                        })
                        .collect(),
                ));
            }
            // 3. R is total on S_{i1} ∩ S_{i2}.
            for &q in &pairs {
                for &qp in &pairs {
                    for j in 1..=n {
                        matrix.push(Formula::or(vec![
                            Formula::not(s(q.0, j)),
                            Formula::not(s(q.1, j)),
                            Formula::or((1..=n).map(|jp| rr(q, qp, j, jp)).collect()),
                        ]));
                    }
                }
            }
            // 4. R is onto S_{i1'} ∩ S_{i2'}.
            match variant {
                FieVariant::Intended => {
                    for &q in &pairs {
                        for &qp in &pairs {
                            for jp in 1..=n {
                                matrix.push(Formula::or(vec![
                                    Formula::not(s(qp.0, jp)),
                                    Formula::not(s(qp.1, jp)),
                                    Formula::or((1..=n).map(|j| rr(q, qp, j, jp)).collect()),
                                ]));
                            }
                        }
                    }
                }
                FieVariant::LiteralClosure => {
                    for &q in &pairs {
                        for &qp in &pairs {
                            for j in 1..=n {
                                for jp in 1..=n {
                                    matrix.push(Formula::or(vec![
                                        Formula::not(s(qp.0, j)),
                                        Formula::not(s(qp.1, j)),
                                        Formula::or((1..=n).map(|jx| rr(q, qp, jx, jp)).collect()),
                                    ]));
                                }
                            }
                        }
                    }
                }
            }
            // 5-8. R pairs lie in the respective sets.
            for &q in &pairs {
                for &qp in &pairs {
                    for j in 1..=n {
                        for jp in 1..=n {
                            matrix.push(Formula::or(vec![
                                Formula::not(rr(q, qp, j, jp)),
                                s(q.0, j),
                            ]));
                        }
                    }
                }
            }
            for &q in &pairs {
                for &qp in &pairs {
                    for j in 1..=n {
                        for jp in 1..=n {
                            matrix.push(Formula::or(vec![
                                Formula::not(rr(q, qp, j, jp)),
                                s(q.1, j),
                            ]));
                        }
                    }
                }
            }
            for &q in &pairs {
                for &qp in &pairs {
                    for j in 1..=n {
                        for jp in 1..=n {
                            matrix.push(Formula::or(vec![
                                Formula::not(rr(q, qp, j, jp)),
                                s(qp.0, jp),
                            ]));
                        }
                    }
                }
            }
            for &q in &pairs {
                for &qp in &pairs {
                    for j in 1..=n {
                        for jp in 1..=n {
                            matrix.push(Formula::or(vec![
                                Formula::not(rr(q, qp, j, jp)),
                                s(qp.1, jp),
                            ]));
                        }
                    }
                }
            }
            // 9. Functionality in j.
            for &q in &pairs {
                for &qp in &pairs {
                    for j in 1..=n {
                        for jp in 1..=n {
                            for jpp in jp + 1..=n {
                                matrix.push(Formula::or(vec![
                                    Formula::not(rr(q, qp, j, jp)),
                                    Formula::not(rr(q, qp, j, jpp)),
                                ]));
                            }
                        }
                    }
                }
            }
            // 10. Injectivity in j'.
            for &q in &pairs {
                for &qp in &pairs {
                    for jp in 1..=n {
                        for j in 1..=n {
                            for j2 in j + 1..=n {
                                matrix.push(Formula::or(vec![
                                    Formula::not(rr(q, qp, j, jp)),
                                    Formula::not(rr(q, qp, j2, jp)),
                                ]));
                            }
                        }
                    }
                }
            }
            (vars, matrix, true)
        }
    };
    let formula = if side {
        Formula::not(Formula::and(matrix.clone()))
    } else {
        Formula::Const(true)
    };
    Ok(PrincipleInstance { id, params, formula, matrix, vars })
}

/// Result of the matrix satisfiability search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatResult {
    Sat(Assignment),
    Unsat,
    /// The node budget ran out before the search space was exhausted.
    Unknown,
}

/// Backtracking search for an assignment satisfying every matrix conjunct.
/// `budget` bounds the number of branching nodes explored; on exhaustion the
/// result is `Unknown`, never a silent `Unsat`.
pub fn sat_matrix(inst: &PrincipleInstance, budget: u64) -> SatResult {
    let vars = &inst.vars;
    let mut a = Assignment::new();
    let mut nodes: u64 = 0;
    fn rec(
        matrix: &[Formula],
        vars: &[Var],
        idx: usize,
        a: &mut Assignment,
        nodes: &mut u64,
        budget: u64,
    ) -> Option<SatResult> {
        *nodes += 1;
        if *nodes > budget {
            return Some(SatResult::Unknown);
        }
        let mut undecided = false;
        for c in matrix {
            match c.eval_partial(a) {
                Some(false) => return None,
                Some(true) => {}
                None => undecided = true,
            }
        }
        if !undecided && idx >= vars.len() {
            return Some(SatResult::Sat(a.clone()));
        }
        if idx >= vars.len() {
            // All variables assigned; undecided cannot remain.
            return Some(SatResult::Sat(a.clone()));
        }
        if !undecided {
            // Matrix already satisfied; extend arbitrarily with false.
            let mut b = a.clone();
            for v in &vars[idx..] {
                b.set(v.clone(), false);
            }
            return Some(SatResult::Sat(b));
        }
        let v = vars[idx].clone();
        for val in [false, true] {
            a.set(v.clone(), val);
            if let Some(r) = rec(matrix, vars, idx + 1, a, nodes, budget) {
                return Some(r);
            }
            a.unset(&v);
        }
        None
    }
    match rec(&inst.matrix, vars, 0, &mut a, &mut nodes, budget) {
        Some(r) => r,
        None => SatResult::Unsat,
    }
}

pub const DEFAULT_SAT_BUDGET: u64 = 50_000_000;

#[cfg(test)]
mod tests {
    use super::*;

    fn count(p: u32, n: u32) -> PrincipleInstance {
        generate(
            PrincipleId::Count,
            Params { p: Some(p), n: Some(n), ..Default::default() },
        )
        .unwrap()
    }

    #[test]
    fn count_degenerate_branch() {
        // p | n: formula is the constant 1.
        assert_eq!(count(2, 4).formula, Formula::Const(true));
    }

    #[test]
    fn count_2_3_vars() {
        let inst = count(2, 3);
        assert_eq!(inst.vars.len(), 3);
        assert_ne!(inst.formula, Formula::Const(true));
    }

    #[test]
    fn count_matrix_shapes() {
        // 3 cover clauses + 3 disjointness clauses: all pairs of 2-subsets of
        // [3] overlap.
        assert_eq!(count(2, 3).matrix.len(), 6);
        // 4 cover clauses over 6 variables, plus the overlapping pairs.
        let inst = count(2, 4);
        assert_eq!(inst.vars.len(), 6);
        let covers = &inst.matrix[..4];
        assert_eq!(covers.len(), 4);
    }

    #[test]
    fn injphp_matrix_nonempty_in_satisfiable_regime() {
        let inst = generate(
            PrincipleId::InjPhp,
            Params { m: Some(3), n: Some(3), ..Default::default() },
        )
        .unwrap();
        assert_eq!(inst.formula, Formula::Const(true));
        assert!(!inst.matrix.is_empty());
    }

    #[test]
    fn count_formula_under_all_zero() {
        // Cover clause fails, so the outer negation holds.
        let inst = count(2, 3);
        let a = Assignment::from_true_vars(vec![], &inst.vars);
        assert_eq!(inst.formula.eval(&a), Ok(true));
    }

    #[test]
    fn sat_matrix_count_2_4() {
        let inst = count(2, 4);
        match sat_matrix(&inst, DEFAULT_SAT_BUDGET) {
            SatResult::Sat(a) => {
                for c in &inst.matrix {
                    assert_eq!(c.eval(&a), Ok(true));
                }
            }
            r => panic!("expected Sat, got {r:?}"),
        }
    }

    #[test]
    fn sat_matrix_count_2_3_unsat() {
        assert_eq!(sat_matrix(&count(2, 3), DEFAULT_SAT_BUDGET), SatResult::Unsat);
    }

    #[test]
    fn sat_matrix_injphp_3_3_identity() {
        let inst = generate(
            PrincipleId::InjPhp,
            Params { m: Some(3), n: Some(3), ..Default::default() },
        )
        .unwrap();
        match sat_matrix(&inst, DEFAULT_SAT_BUDGET) {
            SatResult::Sat(a) => {
                for c in &inst.matrix {
                    assert_eq!(c.eval(&a), Ok(true));
                }
            }
            r => panic!("expected Sat, got {r:?}"),
        }
    }

    #[test]
    fn sat_budget_reports_unknown() {
        let inst = generate(
            PrincipleId::Oddtown,
            Params { n: Some(3), ..Default::default() },
        )
        .unwrap();
        assert_eq!(sat_matrix(&inst, 2), SatResult::Unknown);
    }

    #[test]
    fn ucp_tiny_matrix_unsat() {
        // l=1, d=2, n=1: matrix over r[1,1,1], r[1,2,1]; unsatisfiable.
        let inst = generate(
            PrincipleId::Ucp,
            Params { l: Some(1), d: Some(2), n: Some(1), ..Default::default() },
        )
        .unwrap();
        assert_eq!(inst.vars.len(), 2);
        assert_eq!(sat_matrix(&inst, DEFAULT_SAT_BUDGET), SatResult::Unsat);
    }

    #[test]
    fn oddtown_zero_is_constant_one() {
        let inst = generate(
            PrincipleId::Oddtown,
            Params { n: Some(0), ..Default::default() },
        )
        .unwrap();
        assert_eq!(inst.formula, Formula::Const(true));
    }

    #[test]
    fn generate_rejects_bad_params() {
        assert!(generate(PrincipleId::Count, Params::default()).is_err());
        assert!(generate(
            PrincipleId::Count,
            Params { p: Some(0), n: Some(3), ..Default::default() }
        )
        .is_err());
    }

    #[test]
    fn generate_is_deterministic() {
        let a = count(2, 4);
        let b = count(2, 4);
        assert_eq!(a, b);
    }

    #[test]
    fn fie_variants_differ() {
        let a = generate(
            PrincipleId::Fie,
            Params { n: Some(2), fie_variant: Some(FieVariant::Intended), ..Default::default() },
        )
        .unwrap();
        let b = generate(
            PrincipleId::Fie,
            Params {
                n: Some(2),
                fie_variant: Some(FieVariant::LiteralClosure),
                ..Default::default()
            },
        )
        .unwrap();
        assert_ne!(a.matrix.len(), b.matrix.len());
    }
}
