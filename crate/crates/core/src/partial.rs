//! The restriction algebra: partial injections between disjoint pigeon and
//! hole sets, partial p-partitions of a block universe, and formula
//! restriction for injection-pigeonhole variables.

use crate::formula::{Formula, Var};
use serde_json::{json, Value};
use std::collections::BTreeSet;
use std::fmt;

/// Pigeon domain and hole range. Pigeons and holes are small integers tagged
/// by side, so the two sets are disjoint by construction. Restriction shrinks
/// the sets without renumbering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Universe {
    pub pigeons: BTreeSet<u32>,
    pub holes: BTreeSet<u32>,
}

impl Universe {
    /// D_m = {1..m}, R_n = {1..n}.
    pub fn new(m: u32, n: u32) -> Universe {
        Universe {
            pigeons: (1..=m).collect(),
            holes: (1..=n).collect(),
        }
    }

    pub fn minus(&self, rho: &PartialInjection) -> Universe {
        Universe {
            pigeons: self.pigeons.difference(&rho.dom()).copied().collect(),
            holes: self.holes.difference(&rho.ran()).copied().collect(),
        }
    }

    pub fn contains(&self, rho: &PartialInjection) -> bool {
        rho.dom().is_subset(&self.pigeons) && rho.ran().is_subset(&self.holes)
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PartialError {
    #[error("elements violate the partial-injection invariant: {0}")]
    Invalid(String),
    #[error("incompatible inputs")]
    Incompatible,
    #[error("universe mismatch: {0}")]
    Universe(String),
}

/// A partial injection: pairwise disjoint pigeon-hole pairs plus hole
/// singletons (holes declared empty).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct PartialInjection {
    pairs: BTreeSet<(u32, u32)>,
    singles: BTreeSet<u32>,
}

impl PartialInjection {
    pub fn empty() -> PartialInjection {
        PartialInjection::default()
    }

    pub fn new<P, S>(pairs: P, singles: S) -> Result<PartialInjection, PartialError>
    where
        P: IntoIterator<Item = (u32, u32)>,
        S: IntoIterator<Item = u32>,
    {
        let rho = PartialInjection {
            pairs: pairs.into_iter().collect(),
            singles: singles.into_iter().collect(),
        };
        rho.check()?;
        Ok(rho)
    }

    fn check(&self) -> Result<(), PartialError> {
        let mut pigeons = BTreeSet::new();
        let mut holes = BTreeSet::new();
        for &(i, j) in &self.pairs {
            if !pigeons.insert(i) {
                return Err(PartialError::Invalid(format!("pigeon {i} reused")));
            }
            if !holes.insert(j) {
                return Err(PartialError::Invalid(format!("hole {j} reused")));
            }
        }
        for &j in &self.singles {
            if !holes.insert(j) {
                return Err(PartialError::Invalid(format!("hole {j} reused")));
            }
        }
        Ok(())
    }

    pub fn pairs(&self) -> &BTreeSet<(u32, u32)> {
        &self.pairs
    }

    pub fn singles(&self) -> &BTreeSet<u32> {
        &self.singles
    }

    /// Number of elements (pairs + singletons); equals #ran.
    pub fn len(&self) -> usize {
        self.pairs.len() + self.singles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty() && self.singles.is_empty()
    }

    pub fn dom(&self) -> BTreeSet<u32> {
        self.pairs.iter().map(|&(i, _)| i).collect()
    }

    pub fn ran(&self) -> BTreeSet<u32> {
        self.pairs
            .iter()
            .map(|&(_, j)| j)
            .chain(self.singles.iter().copied())
            .collect()
    }

    pub fn hole_of(&self, pigeon: u32) -> Option<u32> {
        self.pairs.iter().find(|&&(i, _)| i == pigeon).map(|&(_, j)| j)
    }

    pub fn pigeon_of(&self, hole: u32) -> Option<u32> {
        self.pairs.iter().find(|&&(_, j)| j == hole).map(|&(i, _)| i)
    }

    /// `ρ || τ`: the union is again a partial injection.
    pub fn compatible(&self, other: &PartialInjection) -> bool {
        let mut all = self.clone();
        for &(i, j) in &other.pairs {
            if all.pairs.contains(&(i, j)) {
                continue;
            }
            if all.dom().contains(&i) || all.ran().contains(&j) {
                return false;
            }
            all.pairs.insert((i, j));
        }
        for &j in &other.singles {
            if all.singles.contains(&j) {
                continue;
            }
            if all.ran().contains(&j) {
                return false;
            }
            all.singles.insert(j);
        }
        true
    }

    /// `ρ ⊥ τ`.
    pub fn conflicts(&self, other: &PartialInjection) -> bool {
        !self.compatible(other)
    }

    /// Set union; requires compatibility.
    pub fn union(&self, other: &PartialInjection) -> Result<PartialInjection, PartialError> {
        if !self.compatible(other) {
            return Err(PartialError::Incompatible);
        }
        PartialInjection::new(
            self.pairs.iter().chain(other.pairs.iter()).copied(),
            self.singles.iter().chain(other.singles.iter()).copied(),
        )
    }

    /// `τ \ ρ`; requires compatibility.
    pub fn subtract(&self, rho: &PartialInjection) -> Result<PartialInjection, PartialError> {
        if !self.compatible(rho) {
            return Err(PartialError::Incompatible);
        }
        PartialInjection::new(
            self.pairs.difference(&rho.pairs).copied(),
            self.singles.difference(&rho.singles).copied(),
        )
    }

    /// `σ ⊆ self` as element sets: the branch extends σ.
    pub fn extends(&self, sigma: &PartialInjection) -> bool {
        sigma.pairs.is_subset(&self.pairs) && sigma.singles.is_subset(&self.singles)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "pairs": self.pairs.iter().map(|&(i,j)| json!([i, j])).collect::<Vec<_>>(),
            "singles": self.singles.iter().copied().collect::<Vec<_>>(),
        })
    }
}

impl fmt::Display for PartialInjection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        let mut first = true;
        for &(i, j) in &self.pairs {
            if !first {
                write!(f, ",")?;
            }
            write!(f, "<{i},{j}>")?;
            first = false;
        }
        for &j in &self.singles {
            if !first {
                write!(f, ",")?;
            }
            write!(f, "<{j}>")?;
            first = false;
        }
        write!(f, "}}")
    }
}

/// Restrict an injection-variable formula by ρ: `r_{ij} ↦ 1` if the pair is
/// in ρ, `↦ 0` if the singleton pair conflicts with ρ, unchanged otherwise.
/// Constants are propagated eagerly.
pub fn restrict_formula(
    f: &Formula,
    rho: &PartialInjection,
    universe: &Universe,
) -> Result<Formula, PartialError> {
    fn go(
        f: &Formula,
        rho: &PartialInjection,
        universe: &Universe,
    ) -> Result<Formula, PartialError> {
        match f {
            Formula::Const(b) => Ok(Formula::Const(*b)),
            Formula::Var(Var::Inj { pigeon, hole }) => {
                if !universe.pigeons.contains(pigeon) || !universe.holes.contains(hole) {
                    return Err(PartialError::Universe(format!(
                        "variable r[{pigeon},{hole}] outside universe"
                    )));
                }
                let single = PartialInjection::new([(*pigeon, *hole)], []).unwrap();
                if rho.pairs().contains(&(*pigeon, *hole)) {
                    Ok(Formula::Const(true))
                } else if rho.conflicts(&single) {
                    Ok(Formula::Const(false))
                } else {
                    Ok(f.clone())
                }
            }
            Formula::Var(v) => Err(PartialError::Universe(format!(
                "variable {v} is not an injection variable"
            ))),
            Formula::Not(g) => Ok(Formula::not(go(g, rho, universe)?)),
            Formula::Or(cs) => Ok(Formula::or(
                cs.iter()
                    .map(|c| go(c, rho, universe))
                    .collect::<Result<_, _>>()?,
            )),
        }
    }
    Ok(go(f, rho, universe)?.propagate())
}

/// A partial p-partition: pairwise disjoint p-blocks of [M].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct PartialPartition {
    blocks: BTreeSet<Vec<u32>>,
}

impl PartialPartition {
    pub fn empty() -> PartialPartition {
        PartialPartition::default()
    }

    pub fn new<I: IntoIterator<Item = Vec<u32>>>(
        blocks: I,
    ) -> Result<PartialPartition, PartialError> {
        let mut seen: BTreeSet<u32> = BTreeSet::new();
        let mut out: BTreeSet<Vec<u32>> = BTreeSet::new();
        for mut b in blocks {
            b.sort_unstable();
            if out.contains(&b) {
                continue;
            }
            for &x in &b {
                if !seen.insert(x) {
                    return Err(PartialError::Invalid(format!("element {x} reused")));
                }
            }
            out.insert(b);
        }
        Ok(PartialPartition { blocks: out })
    }

    pub fn blocks(&self) -> &BTreeSet<Vec<u32>> {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn support(&self) -> BTreeSet<u32> {
        self.blocks.iter().flatten().copied().collect()
    }

    pub fn compatible(&self, other: &PartialPartition) -> bool {
        for a in &self.blocks {
            for b in &other.blocks {
                if a != b && a.iter().any(|x| b.contains(x)) {
                    return false;
                }
            }
        }
        true
    }

    pub fn conflicts(&self, other: &PartialPartition) -> bool {
        !self.compatible(other)
    }

    pub fn union(&self, other: &PartialPartition) -> Result<PartialPartition, PartialError> {
        if !self.compatible(other) {
            return Err(PartialError::Incompatible);
        }
        PartialPartition::new(self.blocks.iter().chain(other.blocks.iter()).cloned())
    }

    pub fn subtract(&self, rho: &PartialPartition) -> Result<PartialPartition, PartialError> {
        if !self.compatible(rho) {
            return Err(PartialError::Incompatible);
        }
        PartialPartition::new(self.blocks.difference(&rho.blocks).cloned())
    }

    pub fn extends(&self, sigma: &PartialPartition) -> bool {
        sigma.blocks.is_subset(&self.blocks)
    }

    pub fn to_json(&self) -> Value {
        json!({ "blocks": self.blocks.iter().cloned().collect::<Vec<_>>() })
    }
}

impl fmt::Display for PartialPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, b) in self.blocks.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{{")?;
            for (t, x) in b.iter().enumerate() {
                if t > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{x}")?;
            }
            write!(f, "}}")?;
        }
        write!(f, "}}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pi(pairs: &[(u32, u32)], singles: &[u32]) -> PartialInjection {
        PartialInjection::new(pairs.iter().copied(), singles.iter().copied()).unwrap()
    }

    #[test]
    fn compatibility_basics() {
        let a = pi(&[(1, 1)], &[]);
        assert!(!a.compatible(&pi(&[(1, 2)], &[]))); // pigeon reused
        assert!(a.compatible(&pi(&[], &[2])));
        assert!(!a.compatible(&pi(&[], &[1]))); // hole reused
        assert!(a.compatible(&a));
    }

    #[test]
    fn union_and_subtract() {
        let a = pi(&[(1, 1)], &[]);
        let b = pi(&[(2, 2)], &[]);
        let u = a.union(&b).unwrap();
        assert_eq!(u.len(), 2);
        assert_eq!(a.union(&PartialInjection::empty()).unwrap(), a);
        assert_eq!(u.subtract(&a).unwrap(), b);
        assert_eq!(a.subtract(&a).unwrap(), PartialInjection::empty());
        let s = pi(&[], &[2]);
        assert_eq!(s.subtract(&PartialInjection::empty()).unwrap(), s);
        assert_eq!(a.union(&s).unwrap(), pi(&[(1, 1)], &[2]));
    }

    #[test]
    fn restrict_formula_atoms() {
        let u = Universe::new(2, 2);
        let r11 = Formula::var(Var::Inj { pigeon: 1, hole: 1 });
        assert_eq!(
            restrict_formula(&r11, &pi(&[(1, 1)], &[]), &u).unwrap(),
            Formula::Const(true)
        );
        assert_eq!(
            restrict_formula(&r11, &pi(&[(1, 2)], &[]), &u).unwrap(),
            Formula::Const(false)
        );
        assert_eq!(restrict_formula(&r11, &pi(&[(2, 2)], &[]), &u).unwrap(), r11);
    }

    #[test]
    fn restrict_formula_rejects_foreign_vars() {
        let u = Universe::new(2, 2);
        let f = Formula::var(Var::Inj { pigeon: 9, hole: 1 });
        assert!(restrict_formula(&f, &PartialInjection::empty(), &u).is_err());
    }

    #[test]
    fn partition_basics() {
        let a = PartialPartition::new([vec![1, 2, 3]]).unwrap();
        let b = PartialPartition::new([vec![4, 5, 6]]).unwrap();
        assert!(a.compatible(&b));
        let c = PartialPartition::new([vec![3, 4, 5]]).unwrap();
        assert!(a.conflicts(&c));
        assert_eq!(a.union(&b).unwrap().len(), 2);
        // Shared block is fine: set union.
        assert!(a.compatible(&a));
        assert_eq!(a.union(&a).unwrap(), a);
    }
}
