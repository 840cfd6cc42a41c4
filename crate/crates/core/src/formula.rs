//! Propositional formulas over the structured variable families used by the
//! counting principles: big-or and negation are primitive, big-and and
//! implication are derived abbreviations.

use serde_json::{json, Value};
use std::collections::{BTreeSet, HashMap};
use std::fmt;

/// A structured propositional variable. Equality is tag + index equality.
///
/// Display forms follow the serialization schema:
/// `r[1,2]` (injection pigeonhole), `r[{1,3}]` (counting), `r[1,2,3]` (UCP),
/// `s[2,1]`/`q[2,1]`/`p[2,{1,3}]`/`rr[1,2,{1,3}]` (oddtown),
/// `s[i,j]`/`rr[i1,i2,i1p,i2p,j,jp]` (Fisher inequality).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    /// `r_e` for a p-subset `e` of the universe (kept as a sorted tuple).
    Count { block: Vec<u32> },
    /// `r_{ij}`: pigeon `i` maps to hole `j`.
    Inj { pigeon: u32, hole: u32 },
    /// `r_{i,j,e}`: the j-th element of the i-th set is `e`.
    Ucp { i: u32, j: u32, e: u32 },
    /// oddtown `s_{ij}`: element j belongs to S_i.
    OddS { i: u32, j: u32 },
    /// oddtown `q_{ij}`: j is the distinguished element of S_i.
    OddQ { i: u32, j: u32 },
    /// oddtown `p_{ie}`: 2-set `e` is a block of the partition of S_i.
    OddP { i: u32, block: (u32, u32) },
    /// oddtown `r_{i i' e}`: 2-set `e` is a block of the partition of S_i ∩ S_{i'}.
    OddR { i: u32, i2: u32, block: (u32, u32) },
    /// FIE `s_{ij}`.
    FieS { i: u32, j: u32 },
    /// FIE `r^{i1,i2,i1',i2'}_{j,j'}`.
    FieR { i1: u32, i2: u32, i1p: u32, i2p: u32, j: u32, jp: u32 },
}

fn fmt_block(f: &mut fmt::Formatter<'_>, b: &[u32]) -> fmt::Result {
    write!(f, "{{")?;
    for (k, x) in b.iter().enumerate() {
        if k > 0 {
            write!(f, ",")?;
        }
        write!(f, "{x}")?;
    }
    write!(f, "}}")
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Count { block } => {
                write!(f, "r[")?;
                fmt_block(f, block)?;
                write!(f, "]")
            }
            Var::Inj { pigeon, hole } => write!(f, "r[{pigeon},{hole}]"),
            Var::Ucp { i, j, e } => write!(f, "r[{i},{j},{e}]"),
            Var::OddS { i, j } => write!(f, "s[{i},{j}]"),
            Var::OddQ { i, j } => write!(f, "q[{i},{j}]"),
            Var::OddP { i, block } => {
                write!(f, "p[{i},")?;
                fmt_block(f, &[block.0, block.1])?;
                write!(f, "]")
            }
            Var::OddR { i, i2, block } => {
                write!(f, "rr[{i},{i2},")?;
                fmt_block(f, &[block.0, block.1])?;
                write!(f, "]")
            }
            Var::FieS { i, j } => write!(f, "s[{i},{j}]"),
            Var::FieR { i1, i2, i1p, i2p, j, jp } => {
                write!(f, "rr[{i1},{i2},{i1p},{i2p},{j},{jp}]")
            }
        }
    }
}

/// A propositional formula built from constants, variables, negation and
/// big-or of unbounded arity.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Const(bool),
    Var(Var),
    Not(Box<Formula>),
    Or(Vec<Formula>),
}

impl Formula {
    pub fn var(v: Var) -> Formula {
        Formula::Var(v)
    }

    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn or(children: Vec<Formula>) -> Formula {
        Formula::Or(children)
    }

    /// Derived big-and: `⋀ φ_i := ¬⋁ ¬φ_i`.
    pub fn and(children: Vec<Formula>) -> Formula {
        Formula::not(Formula::or(children.into_iter().map(Formula::not).collect()))
    }

    /// Derived implication: `φ → ψ := ¬φ ∨ ψ`.
    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::or(vec![Formula::not(a), b])
    }

    pub fn depth(&self) -> usize {
        match self {
            Formula::Const(_) | Formula::Var(_) => 0,
            Formula::Not(f) => 1 + f.depth(),
            Formula::Or(cs) => 1 + cs.iter().map(|c| c.depth()).max().unwrap_or(0),
        }
    }

    pub fn variables(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Formula::Const(_) => {}
            Formula::Var(v) => {
                out.insert(v.clone());
            }
            Formula::Not(f) => f.collect_vars(out),
            Formula::Or(cs) => {
                for c in cs {
                    c.collect_vars(out);
                }
            }
        }
    }

    /// Immediate subformulas.
    pub fn children(&self) -> Vec<&Formula> {
        match self {
            Formula::Const(_) | Formula::Var(_) => vec![],
            Formula::Not(f) => vec![f],
            Formula::Or(cs) => cs.iter().collect(),
        }
    }

    /// All subformulas including `self` (depth-first, parents before children).
    pub fn subformulas(&self) -> Vec<&Formula> {
        let mut out = vec![self];
        match self {
            Formula::Const(_) | Formula::Var(_) => {}
            Formula::Not(f) => out.extend(f.subformulas()),
            Formula::Or(cs) => {
                for c in cs {
                    out.extend(c.subformulas());
                }
            }
        }
        out
    }

    /// Standard boolean semantics; errors on a variable missing from `a`.
    pub fn eval(&self, a: &Assignment) -> Result<bool, FormulaError> {
        match self {
            Formula::Const(b) => Ok(*b),
            Formula::Var(v) => a
                .get(v)
                .ok_or_else(|| FormulaError::Unassigned(v.to_string())),
            Formula::Not(f) => Ok(!f.eval(a)?),
            Formula::Or(cs) => {
                for c in cs {
                    if c.eval(a)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
        }
    }

    /// Three-valued evaluation under a partial assignment; `None` = undecided.
    pub fn eval_partial(&self, a: &Assignment) -> Option<bool> {
        match self {
            Formula::Const(b) => Some(*b),
            Formula::Var(v) => a.get(v),
            Formula::Not(f) => f.eval_partial(a).map(|b| !b),
            Formula::Or(cs) => {
                let mut undecided = false;
                for c in cs {
                    match c.eval_partial(a) {
                        Some(true) => return Some(true),
                        Some(false) => {}
                        None => undecided = true,
                    }
                }
                if undecided {
                    None
                } else {
                    Some(false)
                }
            }
        }
    }

    /// Simultaneous substitution of formulas for variables. Every variable of
    /// `self` must be mapped.
    pub fn substitute(&self, map: &HashMap<Var, Formula>) -> Result<Formula, FormulaError> {
        match self {
            Formula::Const(b) => Ok(Formula::Const(*b)),
            Formula::Var(v) => map
                .get(v)
                .cloned()
                .ok_or_else(|| FormulaError::Unassigned(v.to_string())),
            Formula::Not(f) => Ok(Formula::not(f.substitute(map)?)),
            Formula::Or(cs) => Ok(Formula::or(
                cs.iter().map(|c| c.substitute(map)).collect::<Result<_, _>>()?,
            )),
        }
    }

    /// Eager constant propagation: 0/1 absorbed through `¬` and `⋁`, the
    /// empty or collapses to 0, a singleton or collapses to its child.
    pub fn propagate(&self) -> Formula {
        match self {
            Formula::Const(b) => Formula::Const(*b),
            Formula::Var(v) => Formula::Var(v.clone()),
            Formula::Not(f) => match f.propagate() {
                Formula::Const(b) => Formula::Const(!b),
                g => Formula::not(g),
            },
            Formula::Or(cs) => {
                let mut kept = Vec::new();
                for c in cs {
                    match c.propagate() {
                        Formula::Const(true) => return Formula::Const(true),
                        Formula::Const(false) => {}
                        g => kept.push(g),
                    }
                }
                match kept.len() {
                    0 => Formula::Const(false),
                    1 => kept.pop().unwrap(),
                    _ => Formula::or(kept),
                }
            }
        }
    }

    /// JSON encoding with node kinds `const`, `var`, `not`, `or`.
    pub fn to_json(&self) -> Value {
        match self {
            Formula::Const(b) => json!({ "const": if *b { 1 } else { 0 } }),
            Formula::Var(v) => json!({ "var": v.to_string() }),
            Formula::Not(f) => json!({ "not": f.to_json() }),
            Formula::Or(cs) => json!({ "or": cs.iter().map(|c| c.to_json()).collect::<Vec<_>>() }),
        }
    }

    pub fn from_json(v: &Value) -> Result<Formula, FormulaError> {
        let obj = v
            .as_object()
            .ok_or_else(|| FormulaError::Parse(format!("expected object, got {v}")))?;
        if let Some(c) = obj.get("const") {
            return match c.as_u64() {
                Some(0) => Ok(Formula::Const(false)),
                Some(1) => Ok(Formula::Const(true)),
                _ => Err(FormulaError::Parse(format!("bad const {c}"))),
            };
        }
        if let Some(name) = obj.get("var") {
            let s = name
                .as_str()
                .ok_or_else(|| FormulaError::Parse("var name must be a string".into()))?;
            return Ok(Formula::Var(parse_var(s)?));
        }
        if let Some(f) = obj.get("not") {
            return Ok(Formula::not(Formula::from_json(f)?));
        }
        if let Some(cs) = obj.get("or") {
            let arr = cs
                .as_array()
                .ok_or_else(|| FormulaError::Parse("or children must be an array".into()))?;
            return Ok(Formula::or(
                arr.iter().map(Formula::from_json).collect::<Result<_, _>>()?,
            ));
        }
        Err(FormulaError::Parse(format!("unknown node {v}")))
    }
}

/// A (possibly partial) assignment of truth values to variables.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    map: HashMap<Var, bool>,
}

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_true_vars<I: IntoIterator<Item = Var>>(
        true_vars: I,
        all_vars: &[Var],
    ) -> Assignment {
        let mut a = Assignment::new();
        for v in all_vars {
            a.set(v.clone(), false);
        }
        for v in true_vars {
            a.set(v, true);
        }
        a
    }

    pub fn set(&mut self, v: Var, b: bool) {
        self.map.insert(v, b);
    }

    pub fn unset(&mut self, v: &Var) {
        self.map.remove(v);
    }

    pub fn get(&self, v: &Var) -> Option<bool> {
        self.map.get(v).copied()
    }

    pub fn true_vars(&self) -> BTreeSet<Var> {
        self.map
            .iter()
            .filter(|(_, b)| **b)
            .map(|(v, _)| v.clone())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum FormulaError {
    #[error("unassigned variable {0}")]
    Unassigned(String),
    #[error("parse error: {0}")]
    Parse(String),
}

fn parse_block(s: &str) -> Result<Vec<u32>, FormulaError> {
    let inner = s
        .strip_prefix('{')
        .and_then(|t| t.strip_suffix('}'))
        .ok_or_else(|| FormulaError::Parse(format!("bad block {s}")))?;
    inner
        .split(',')
        .map(|x| {
            x.trim()
                .parse::<u32>()
                .map_err(|_| FormulaError::Parse(format!("bad block element {x}")))
        })
        .collect()
}

/// Split a bracketed index list like `1,2,{3,4}` at top-level commas.
fn split_indices(s: &str) -> Vec<String> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '{' => {
                depth += 1;
                cur.push(ch);
            }
            '}' => {
                depth = depth.saturating_sub(1);
                cur.push(ch);
            }
            ',' if depth == 0 => {
                parts.push(cur.trim().to_string());
                cur = String::new();
            }
            _ => cur.push(ch),
        }
    }
    if !cur.trim().is_empty() {
        parts.push(cur.trim().to_string());
    }
    parts
}

/// Parse the display form of a variable back into its structured index.
///
/// `s[..]` parses as oddtown when paired with 2 plain indices (shared with
/// FIE; the ambiguity is resolved by the caller's family when it matters —
/// here we default to the oddtown tag for `s`/`q`/`p` and 2-index `rr`,
/// and to FIE for 6-index `rr`).
pub fn parse_var(s: &str) -> Result<Var, FormulaError> {
    let open = s
        .find('[')
        .ok_or_else(|| FormulaError::Parse(format!("bad var {s}")))?;
    let name = &s[..open];
    let idx = s[open + 1..]
        .strip_suffix(']')
        .ok_or_else(|| FormulaError::Parse(format!("bad var {s}")))?;
    let parts = split_indices(idx);
    let num = |p: &str| -> Result<u32, FormulaError> {
        p.parse::<u32>()
            .map_err(|_| FormulaError::Parse(format!("bad index {p} in {s}")))
    };
    match (name, parts.len()) {
        ("r", 1) if parts[0].starts_with('{') => Ok(Var::Count {
            block: parse_block(&parts[0])?,
        }),
        ("r", 2) => Ok(Var::Inj {
            pigeon: num(&parts[0])?,
            hole: num(&parts[1])?,
        }),
        ("r", 3) => Ok(Var::Ucp {
            i: num(&parts[0])?,
            j: num(&parts[1])?,
            e: num(&parts[2])?,
        }),
        ("s", 2) => Ok(Var::OddS {
            i: num(&parts[0])?,
            j: num(&parts[1])?,
        }),
        ("q", 2) => Ok(Var::OddQ {
            i: num(&parts[0])?,
            j: num(&parts[1])?,
        }),
        ("p", 2) => {
            let b = parse_block(&parts[1])?;
            if b.len() != 2 {
                return Err(FormulaError::Parse(format!("p block must be a 2-set: {s}")));
            }
            Ok(Var::OddP {
                i: num(&parts[0])?,
                block: (b[0], b[1]),
            })
        }
        ("rr", 3) => {
            let b = parse_block(&parts[2])?;
            if b.len() != 2 {
                return Err(FormulaError::Parse(format!("rr block must be a 2-set: {s}")));
            }
            Ok(Var::OddR {
                i: num(&parts[0])?,
                i2: num(&parts[1])?,
                block: (b[0], b[1]),
            })
        }
        ("rr", 6) => Ok(Var::FieR {
            i1: num(&parts[0])?,
            i2: num(&parts[1])?,
            i1p: num(&parts[2])?,
            i2p: num(&parts[3])?,
            j: num(&parts[4])?,
            jp: num(&parts[5])?,
        }),
        _ => Err(FormulaError::Parse(format!("unknown variable form {s}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_and_negation() {
        let a = Assignment::new();
        assert_eq!(Formula::Const(true).eval(&a), Ok(true));
        let f = Formula::not(Formula::or(vec![Formula::Var(Var::Inj {
            pigeon: 1,
            hole: 1,
        })]));
        let mut a = Assignment::new();
        a.set(Var::Inj { pigeon: 1, hole: 1 }, false);
        assert_eq!(f.eval(&a), Ok(true));
    }

    #[test]
    fn unassigned_variable_errors() {
        let f = Formula::Var(Var::Inj { pigeon: 1, hole: 2 });
        assert!(f.eval(&Assignment::new()).is_err());
    }

    #[test]
    fn substitution_examples() {
        let x = Var::Inj { pigeon: 1, hole: 1 };
        let y = Var::Inj { pigeon: 1, hole: 2 };
        let mut map = HashMap::new();
        map.insert(x.clone(), Formula::Const(true));
        assert_eq!(
            Formula::Var(x.clone()).substitute(&map).unwrap(),
            Formula::Const(true)
        );
        let mut map2 = HashMap::new();
        map2.insert(x.clone(), Formula::Var(y.clone()));
        assert_eq!(
            Formula::not(Formula::Var(x)).substitute(&map2).unwrap(),
            Formula::not(Formula::Var(y))
        );
    }

    #[test]
    fn var_display_roundtrip() {
        let vars = vec![
            Var::Count { block: vec![1, 3] },
            Var::Inj { pigeon: 1, hole: 2 },
            Var::Ucp { i: 1, j: 2, e: 3 },
            Var::OddS { i: 2, j: 1 },
            Var::OddQ { i: 2, j: 1 },
            Var::OddP { i: 2, block: (1, 3) },
            Var::OddR { i: 1, i2: 2, block: (1, 3) },
            Var::FieR { i1: 1, i2: 2, i1p: 3, i2p: 4, j: 1, jp: 2 },
        ];
        for v in vars {
            assert_eq!(parse_var(&v.to_string()).unwrap(), v, "{v}");
        }
    }

    #[test]
    fn json_roundtrip() {
        let f = Formula::and(vec![
            Formula::Var(Var::Inj { pigeon: 1, hole: 1 }),
            Formula::or(vec![Formula::Const(false), Formula::Var(Var::Inj { pigeon: 2, hole: 1 })]),
        ]);
        let j = f.to_json();
        assert_eq!(Formula::from_json(&j).unwrap(), f);
    }

    #[test]
    fn propagate_rules() {
        let f = Formula::or(vec![Formula::Const(false), Formula::Var(Var::Inj { pigeon: 1, hole: 1 })]);
        assert_eq!(f.propagate(), Formula::Var(Var::Inj { pigeon: 1, hole: 1 }));
        let g = Formula::or(vec![Formula::Const(true), Formula::Var(Var::Inj { pigeon: 1, hole: 1 })]);
        assert_eq!(g.propagate(), Formula::Const(true));
        assert_eq!(Formula::or(vec![]).propagate(), Formula::Const(false));
        assert_eq!(Formula::not(Formula::Const(false)).propagate(), Formula::Const(true));
    }
}
