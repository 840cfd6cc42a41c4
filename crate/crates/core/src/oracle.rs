//! Independent brute-force oracles used as ground truth. The code here keeps
//! its own minimal polynomial and tree representations on purpose, so that
//! agreement with the main implementations is meaningful.

use crate::formula::{Assignment, Formula};
use crate::partial::PartialInjection;
use crate::principles::PrincipleInstance;
use crate::tree::Tree;
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("size overflow: {0}")]
    Overflow(String),
    #[error("bad query: {0}")]
    Query(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResult {
    pub query: String,
    pub value: String,
    pub method: String,
    pub millis: u128,
}

impl OracleResult {
    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.query, self.value, self.method, self.millis)
    }
}

/// Exhaustive tautology check by full assignment enumeration.
pub fn oracle_taut(inst: &PrincipleInstance) -> Result<bool, OracleError> {
    let vars = &inst.vars;
    if vars.len() > 24 {
        return Err(OracleError::Overflow(format!("{} variables", vars.len())));
    }
    let n = vars.len();
    for mask in 0u64..(1u64 << n) {
        let mut a = Assignment::new();
        for (idx, v) in vars.iter().enumerate() {
            a.set(v.clone(), mask >> idx & 1 == 1);
        }
        let val = inst
            .formula
            .eval(&a)
            .map_err(|e| OracleError::Query(e.to_string()))?;
        if !val {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Exhaustive satisfiability of an arbitrary formula (used for the
/// matrix-as-formula queries).
pub fn oracle_sat(formula: &Formula) -> Result<bool, OracleError> {
    let vars: Vec<_> = formula.variables().into_iter().collect();
    if vars.len() > 24 {
        return Err(OracleError::Overflow(format!("{} variables", vars.len())));
    }
    for mask in 0u64..(1u64 << vars.len()) {
        let mut a = Assignment::new();
        for (idx, v) in vars.iter().enumerate() {
            a.set(v.clone(), mask >> idx & 1 == 1);
        }
        if formula
            .eval(&a)
            .map_err(|e| OracleError::Query(e.to_string()))?
        {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Naive re-implementation of the representation predicate: quantify over
/// every branch/member pair directly, re-deriving compatibility from the raw
/// element lists.
pub fn oracle_represents(tree: &Tree<bool>, family: &[PartialInjection]) -> bool {
    let union_valid = |a: &PartialInjection, b: &PartialInjection| -> bool {
        let mut pairs: Vec<(u32, u32)> = a.pairs().iter().chain(b.pairs().iter()).copied().collect();
        pairs.sort_unstable();
        pairs.dedup();
        let mut singles: Vec<u32> = a.singles().iter().chain(b.singles().iter()).copied().collect();
        singles.sort_unstable();
        singles.dedup();
        let mut pigeons = std::collections::BTreeSet::new();
        let mut holes = std::collections::BTreeSet::new();
        for &(i, j) in &pairs {
            if !pigeons.insert(i) || !holes.insert(j) {
                return false;
            }
        }
        for &j in &singles {
            if !holes.insert(j) {
                return false;
            }
        }
        true
    };
    for (branch, label) in tree.branches() {
        if label {
            let extended = family.iter().any(|sigma| {
                sigma.pairs().iter().all(|p| branch.pairs().contains(p))
                    && sigma.singles().iter().all(|s| branch.singles().contains(s))
            });
            if !extended {
                return false;
            }
        } else if family.iter().any(|sigma| union_valid(&branch, sigma)) {
            return false;
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Minimum refutation degree by an independent linear-algebra route
// ---------------------------------------------------------------------------

/// Which system to build; mirrored here so the oracle depends only on the
/// parameters, not on the main polynomial module.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleSystem {
    NegCount { p: u32, m: u32 },
    NegInjPhp { pigeons: u32, holes: u32 },
}

type OMono = Vec<u32>; // sorted variable indices, multilinear

#[derive(Debug, Clone, Default)]
struct OPoly(BTreeMap<OMono, u64>);

impl OPoly {
    fn add(&mut self, m: OMono, c: i64, p: u64) {
        let cc = (((c % p as i64) + p as i64) % p as i64) as u64;
        if cc == 0 {
            return;
        }
        let e = self.0.entry(m).or_insert(0);
        *e = (*e + cc) % p;
        if *e == 0 {
            let key: Vec<OMono> = self
                .0
                .iter()
                .filter(|(_, &v)| v == 0)
                .map(|(k, _)| k.clone())
                .collect();
            for k in key {
                self.0.remove(&k);
            }
        }
    }
}

fn omono_mul_ml(a: &OMono, b: &OMono) -> OMono {
    let mut out: Vec<u32> = a.iter().chain(b.iter()).copied().collect();
    out.sort_unstable();
    out.dedup();
    out
}

fn subsets_upto(nvars: usize, dmax: usize) -> Vec<OMono> {
    let mut out: Vec<OMono> = vec![vec![]];
    let mut layer: Vec<OMono> = vec![vec![]];
    for _ in 0..dmax {
        let mut next = Vec::new();
        for m in &layer {
            let start = m.last().map(|&x| x + 1).unwrap_or(0);
            for v in start..nvars as u32 {
                let mut m2 = m.clone();
                m2.push(v);
                out.push(m2.clone());
                next.push(m2);
            }
        }
        layer = next;
        if layer.is_empty() {
            break;
        }
    }
    out
}

/// Build the multilinear row list of the chosen system: each row is given as
/// a list of (monomial, coefficient) pairs in the oracle's own encoding,
/// after reduction of the boolean axioms (which hold identically in the
/// multilinear quotient the oracle works in).
fn oracle_rows(sys: OracleSystem, p_mod: u64) -> (usize, Vec<Vec<(OMono, i64)>>) {
    match sys {
        OracleSystem::NegCount { p, m } => {
            // Variables: p-subsets of [m] in lexicographic order.
            let blocks = crate::principles::p_subsets(m, p);
            let index: BTreeMap<Vec<u32>, u32> = blocks
                .iter()
                .cloned()
                .enumerate()
                .map(|(i, b)| (b, i as u32))
                .collect();
            let mut rows = Vec::new();
            for j in 1..=m {
                let mut row: Vec<(OMono, i64)> = vec![(vec![], -1)];
                for b in blocks.iter().filter(|b| b.contains(&j)) {
                    row.push((vec![index[b]], 1));
                }
                rows.push(row);
            }
            for (ai, a) in blocks.iter().enumerate() {
                for b in blocks.iter().skip(ai + 1) {
                    if a.iter().any(|x| b.contains(x)) {
                        rows.push(vec![(vec![index[a], index[b]], 1)]);
                    }
                }
            }
            let _ = p_mod;
            (blocks.len(), rows)
        }
        OracleSystem::NegInjPhp { pigeons, holes } => {
            let index = |i: u32, j: u32| -> u32 { (i - 1) * holes + (j - 1) };
            let mut rows = Vec::new();
            for i in 1..=pigeons {
                for j in 1..=holes {
                    for j2 in j + 1..=holes {
                        rows.push(vec![(
                            {
                                let mut v = vec![index(i, j), index(i, j2)];
                                v.sort_unstable();
                                v
                            },
                            1,
                        )]);
                    }
                }
            }
            for j in 1..=holes {
                for i in 1..=pigeons {
                    for i2 in i + 1..=pigeons {
                        rows.push(vec![(
                            {
                                let mut v = vec![index(i, j), index(i2, j)];
                                v.sort_unstable();
                                v
                            },
                            1,
                        )]);
                    }
                }
            }
            for i in 1..=pigeons {
                let mut row: Vec<(OMono, i64)> = vec![(vec![], -1)];
                for j in 1..=holes {
                    row.push((vec![index(i, j)], 1));
                }
                rows.push(row);
            }
            ((pigeons * holes) as usize, rows)
        }
    }
}

/// Exact least refutation degree at most dcap, or None. Works in the
/// multilinear quotient (the boolean axioms are present in both systems), by
/// incremental elimination over the span of all shifted rows.
pub fn oracle_min_degree(
    sys: OracleSystem,
    field: u64,
    dcap: usize,
) -> Result<Option<usize>, OracleError> {
    if field < 2 || !crate::poly::is_prime(field) {
        return Err(OracleError::Query(format!("{field} is not prime")));
    }
    let p = field;
    let (nvars, rows) = oracle_rows(sys, p);
    for d in 0..=dcap {
        let shifts = subsets_upto(nvars, d);
        let eq_monos = subsets_upto(nvars, d + 2);
        let eq_index: BTreeMap<OMono, usize> = eq_monos
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, m)| (m, i))
            .collect();
        let dim = eq_monos.len();
        // Target: the constant 1.
        let mut b = vec![0u64; dim];
        b[eq_index[&vec![]]] = 1;
        let mut basis: Vec<(usize, Vec<u64>)> = Vec::new();
        let reduce = |v: &mut Vec<u64>, basis: &Vec<(usize, Vec<u64>)>| {
            for (piv, row) in basis {
                let c = v[*piv];
                if c != 0 {
                    for (x, y) in v.iter_mut().zip(row.iter()) {
                        *x = (*x + (p - c) * y) % p;
                    }
                }
            }
        };
        reduce(&mut b, &basis);
        let mut solved = b.iter().all(|&x| x == 0);
        'outer: for row in &rows {
            for mono in &shifts {
                if solved {
                    break 'outer;
                }
                let mut opoly = OPoly::default();
                for (m, c) in row {
                    // Multilinear product: any square collapses since the
                    // boolean axioms hold in the quotient.
                    opoly.add(omono_mul_ml(mono, m), *c, p);
                }
                let mut v = vec![0u64; dim];
                for (m, c) in opoly.0 {
                    if let Some(&idx) = eq_index.get(&m) {
                        v[idx] = c;
                    }
                }
                reduce(&mut v, &basis);
                if let Some(piv) = v.iter().position(|&x| x != 0) {
                    let inv = mod_inv(v[piv], p);
                    for x in v.iter_mut() {
                        *x = *x * inv % p;
                    }
                    let c = b[piv];
                    if c != 0 {
                        for (x, y) in b.iter_mut().zip(v.iter()) {
                            *x = (*x + (p - c) * y) % p;
                        }
                        solved = b.iter().all(|&z| z == 0);
                    }
                    basis.push((piv, v));
                    basis.sort_by_key(|(piv, _)| *piv);
                }
            }
        }
        if solved {
            return Ok(Some(d));
        }
    }
    Ok(None)
}

fn mod_inv(a: u64, p: u64) -> u64 {
    let mut result = 1u64;
    let mut base = a % p;
    let mut e = p - 2;
    while e > 0 {
        if e & 1 == 1 {
            result = result * base % p;
        }
        base = base * base % p;
        e >>= 1;
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::principles::{generate, Params, PrincipleId};

    #[test]
    fn taut_injphp_2_1() {
        let inst = generate(
            PrincipleId::InjPhp,
            Params { m: Some(2), n: Some(1), ..Default::default() },
        )
        .unwrap();
        assert_eq!(inst.vars.len(), 2);
        assert!(oracle_taut(&inst).unwrap());
    }

    #[test]
    fn taut_count_2_4_constant() {
        let inst = generate(
            PrincipleId::Count,
            Params { p: Some(2), n: Some(4), ..Default::default() },
        )
        .unwrap();
        assert!(oracle_taut(&inst).unwrap());
        // The matrix conjunction itself is satisfiable.
        let conj = Formula::and(inst.matrix.clone());
        assert!(oracle_sat(&conj).unwrap());
    }

    #[test]
    fn min_degree_count_2_3() {
        assert_eq!(
            oracle_min_degree(OracleSystem::NegCount { p: 2, m: 3 }, 2, 3).unwrap(),
            Some(0)
        );
    }

    #[test]
    fn min_degree_injphp_2_1() {
        assert_eq!(
            oracle_min_degree(OracleSystem::NegInjPhp { pigeons: 2, holes: 1 }, 2, 3).unwrap(),
            Some(1)
        );
        assert_eq!(
            oracle_min_degree(OracleSystem::NegInjPhp { pigeons: 2, holes: 1 }, 3, 3).unwrap(),
            Some(1)
        );
    }

    #[test]
    fn represents_cross_check() {
        use crate::partial::Universe;
        let u = Universe::new(2, 2);
        let t1: Tree<bool> = Tree::Leaf(true);
        assert!(oracle_represents(&t1, &[PartialInjection::empty()]));
        let t0: Tree<bool> = Tree::Leaf(false);
        assert!(oracle_represents(&t0, &[]));
        let atom = Tree::pigeon_query(&u, 1, |j| Tree::Leaf(j == 1));
        let fam = vec![PartialInjection::new([(1, 1)], []).unwrap()];
        assert!(oracle_represents(&atom, &fam));
        assert_eq!(
            oracle_represents(&atom, &fam),
            atom.represents(&fam.iter().cloned().collect())
        );
    }
}
