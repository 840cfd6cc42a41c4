//! Executable witness transformers for the implication proofs between the
//! counting principles, with exhaustive small-scale certification in the
//! satisfiable regimes.

use crate::formula::{Assignment, Var};
use crate::gcp::{check_gcp, GcpElem, GcpStructure};
use crate::principles::{generate, p_subsets, Params, PrincipleId, PrincipleInstance};
use serde_json::{json, Value};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ReduceError {
    #[error("type mismatch: {0}")]
    Type(String),
    #[error("rule constraint violated: {0}")]
    Constraint(String),
}

/// A finite witness object for one of the principles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Witness {
    /// A (partial or total) injection as a pair list over [m] -> [n].
    Injection { m: u32, n: u32, pairs: Vec<(u32, u32)> },
    /// A bijection as a pair list over [m] -> [n].
    Bijection { m: u32, n: u32, pairs: Vec<(u32, u32)> },
    /// A p-partition of [n] as a block set.
    Partition { n: u32, p: u32, blocks: Vec<Vec<u32>> },
    /// A UCP family: per-set slot enumerations; entry (i, j) = e means the
    /// j-th slot of S_i holds e. Sets must be full or absent.
    UcpFamily { l: u32, d: u32, n: u32, slots: BTreeMap<(u32, u32), u32> },
    /// An oddtown family over [n] with rows 1..=rows (a partial witness when
    /// rows < n+1): sets, distinguished elements, per-set and per-pair block
    /// partitions.
    Oddtown {
        n: u32,
        rows: u32,
        sets: BTreeMap<u32, BTreeSet<u32>>,
        q: BTreeMap<u32, u32>,
        p_blocks: BTreeMap<u32, Vec<(u32, u32)>>,
        r_blocks: BTreeMap<(u32, u32), Vec<(u32, u32)>>,
    },
    /// A Fisher-inequality family over [n] with rows 1..=rows and explicit
    /// intersection bijections keyed by pair-of-pairs.
    Fie {
        n: u32,
        rows: u32,
        sets: BTreeMap<u32, BTreeSet<u32>>,
        maps: BTreeMap<(u32, u32, u32, u32), Vec<(u32, u32)>>,
    },
    Gcp(GcpStructure),
}

impl Witness {
    pub fn to_json(&self) -> Value {
        match self {
            Witness::Injection { m, n, pairs } => {
                json!({"kind": "injection", "m": m, "n": n, "pairs": pairs})
            }
            Witness::Bijection { m, n, pairs } => {
                json!({"kind": "bijection", "m": m, "n": n, "pairs": pairs})
            }
            Witness::Partition { n, p, blocks } => {
                json!({"kind": "partition", "n": n, "p": p, "blocks": blocks})
            }
            Witness::UcpFamily { l, d, n, slots } => json!({
                "kind": "ucp", "l": l, "d": d, "n": n,
                "slots": slots.iter().map(|((i,j),e)| json!([i,j,e])).collect::<Vec<_>>(),
            }),
            Witness::Oddtown { n, rows, sets, q, p_blocks, r_blocks } => json!({
                "kind": "oddtown", "n": n, "rows": rows,
                "sets": sets.iter().map(|(i,s)| json!([i, s.iter().collect::<Vec<_>>()])).collect::<Vec<_>>(),
                "q": q.iter().map(|(i,j)| json!([i,j])).collect::<Vec<_>>(),
                "p": p_blocks.iter().map(|(i,b)| json!([i,b])).collect::<Vec<_>>(),
                "r": r_blocks.iter().map(|((i,i2),b)| json!([i,i2,b])).collect::<Vec<_>>(),
            }),
            Witness::Fie { n, rows, sets, maps } => json!({
                "kind": "fie", "n": n, "rows": rows,
                "sets": sets.iter().map(|(i,s)| json!([i, s.iter().collect::<Vec<_>>()])).collect::<Vec<_>>(),
                "maps": maps.iter().map(|(k,v)| json!([k.0,k.1,k.2,k.3,v])).collect::<Vec<_>>(),
            }),
            Witness::Gcp(s) => json!({
                "kind": "gcp",
                "p": s.p.iter().collect::<Vec<_>>(),
                "q1": s.q1.iter().collect::<Vec<_>>(),
                "q2": s.q2.iter().collect::<Vec<_>>(),
                "r1": s.r1.iter().collect::<Vec<_>>(),
                "r2": s.r2.iter().collect::<Vec<_>>(),
                "a": s.a, "b": s.b,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleId {
    UcpFromCount,
    UcpFromBijection,
    ModphpFromBijection,
    OntophpFromModphp,
    GcpFromUcp,
    GcpFromInjection,
    OddtownFromInjection,
    OddtownFrom2Partition,
    OddtownPrimeFrom2Partition,
    OddtownFromOddtownPrime,
    FieFromInjection,
}

pub const ALL_RULES: [RuleId; 11] = [
    RuleId::UcpFromCount,
    RuleId::UcpFromBijection,
    RuleId::ModphpFromBijection,
    RuleId::OntophpFromModphp,
    RuleId::GcpFromUcp,
    RuleId::GcpFromInjection,
    RuleId::OddtownFromInjection,
    RuleId::OddtownFrom2Partition,
    RuleId::OddtownPrimeFrom2Partition,
    RuleId::OddtownFromOddtownPrime,
    RuleId::FieFromInjection,
];

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RuleId::UcpFromCount => "ucp_from_count",
            RuleId::UcpFromBijection => "ucp_from_bijection",
            RuleId::ModphpFromBijection => "modphp_from_bijection",
            RuleId::OntophpFromModphp => "ontophp_from_modphp",
            RuleId::GcpFromUcp => "gcp_from_ucp",
            RuleId::GcpFromInjection => "gcp_from_injection",
            RuleId::OddtownFromInjection => "oddtown_from_injection",
            RuleId::OddtownFrom2Partition => "oddtown_from_2partition",
            RuleId::OddtownPrimeFrom2Partition => "oddtownprime_from_2partition",
            RuleId::OddtownFromOddtownPrime => "oddtown_from_oddtownprime",
            RuleId::FieFromInjection => "fie_from_injection",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for RuleId {
    type Err = ReduceError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ALL_RULES
            .iter()
            .find(|r| r.to_string() == s)
            .copied()
            .ok_or_else(|| ReduceError::Type(format!("unknown rule {s}")))
    }
}

/// The integer code of a p-subset of [n]: Σ e_i (n+1)^(p−i).
fn block_code(e: &[u32], n: u32) -> u32 {
    crate::principles::block_code(e, n) as u32
}

/// Apply a witness transformer.
pub fn transform(rule: RuleId, w: &Witness) -> Result<Witness, ReduceError> {
    match (rule, w) {
        (RuleId::UcpFromCount, Witness::Partition { n, p, blocks }) => {
            // Index the family by the block codes; all other sets are empty.
            let l = (u64::from(*n) + 1).pow(*p);
            if l > 1_000_000 {
                return Err(ReduceError::Constraint(format!(
                    "(n+1)^p = {l} too large to enumerate"
                )));
            }
            let mut slots = BTreeMap::new();
            for b in blocks {
                let code = block_code(b, *n);
                for (idx, &e) in b.iter().enumerate() {
                    slots.insert((code, idx as u32 + 1), e);
                }
            }
            Ok(Witness::UcpFamily { l: l as u32, d: *p, n: *n, slots })
        }
        (RuleId::UcpFromBijection, Witness::Bijection { m, n, pairs }) => {
            // The single set [n], enumerated by where each of the m slots
            // points.
            let mut slots = BTreeMap::new();
            for &(j, e) in pairs {
                slots.insert((1u32, j), e);
            }
            Ok(Witness::UcpFamily { l: 1, d: *m, n: *n, slots })
        }
        (RuleId::ModphpFromBijection, Witness::Bijection { m, n, pairs }) => {
            // The same graph violates the modular principle with d = m.
            Ok(Witness::Bijection { m: *m, n: *n, pairs: pairs.clone() })
        }
        (RuleId::OntophpFromModphp, Witness::Bijection { m, n, pairs }) => {
            if m >= n {
                Ok(Witness::Bijection { m: *m, n: *n, pairs: pairs.clone() })
            } else {
                // Flip to the inverse graph.
                let inv: Vec<(u32, u32)> = pairs.iter().map(|&(i, j)| (j, i)).collect();
                Ok(Witness::Bijection { m: *n, n: *m, pairs: inv })
            }
        }
        (RuleId::GcpFromUcp, Witness::UcpFamily { l: _, d, n, slots }) => {
            // Nonempty sets index one product side; the division n = d·s + r
            // indexes the other.
            let nonempty: BTreeSet<u32> = slots.keys().map(|&(i, _)| i).collect();
            let s = n / d;
            let r = n % d;
            let mut m0 = Vec::new();
            // Left side: [d] × Q ≅ [n] via the family; right side:
            // [d] × [s] ⊔ [r] via division.
            let elem_of_left = |e: u32| -> Option<GcpElem> {
                // e is the j-th element of set i.
                slots
                    .iter()
                    .find(|(_, &ee)| ee == e)
                    .map(|(&(i, j), _)| GcpElem::Prod(j, i))
            };
            for e in 1..=*n {
                let left = elem_of_left(e).ok_or_else(|| {
                    ReduceError::Constraint(format!("element {e} uncovered by the family"))
                })?;
                // Division coding: e-1 = d·q + rem.
                let q = (e - 1) / d;
                let rem = (e - 1) % d;
                let right = if q < s {
                    GcpElem::Prod(rem + 1, q + 1)
                } else {
                    GcpElem::Rem(rem + 1)
                };
                m0.push((left, right));
            }
            let m2: Vec<(u32, u32)> = (1..=r).map(|x| (x, x)).collect();
            let structure = GcpStructure {
                p: (1..=*d).collect(),
                q1: nonempty,
                q2: (1..=s).collect(),
                r1: BTreeSet::new(),
                r2: (1..=r).collect(),
                m0,
                m1: vec![],
                m2,
                a: if r >= 1 { Some(1) } else { None },
                b: if r < *d { Some(*d) } else { None },
            };
            Ok(Witness::Gcp(structure))
        }
        (RuleId::GcpFromInjection, Witness::Injection { m, n, pairs }) => {
            let ran: BTreeSet<u32> = pairs.iter().map(|&(_, j)| j).collect();
            let r1: BTreeSet<u32> = (1..=*n).filter(|x| !ran.contains(x)).collect();
            let mut m0 = Vec::new();
            for &(i, j) in pairs {
                m0.push((GcpElem::Prod(i, 1), GcpElem::Rem(j)));
            }
            for &x in &r1 {
                m0.push((GcpElem::Rem(x), GcpElem::Rem(x)));
            }
            // M1: inclusion of the co-range into [n]; a witness is any hit
            // hole. M2: inclusion of [n] into the pigeon set where it fits.
            let m1: Vec<(u32, u32)> = r1.iter().map(|&x| (x, x)).collect();
            let m2: Vec<(u32, u32)> = (1..=*n).filter(|&x| x <= *m).map(|x| (x, x)).collect();
            let structure = GcpStructure {
                p: (1..=*m).collect(),
                q1: [1].into(),
                q2: BTreeSet::new(),
                r1,
                r2: (1..=*n).collect(),
                m0,
                m1,
                m2,
                a: ran.iter().next().copied(),
                b: if *n < *m { Some(*m) } else { None },
            };
            Ok(Witness::Gcp(structure))
        }
        (RuleId::OddtownFromInjection, Witness::Injection { m, n, pairs }) => {
            let mut sets = BTreeMap::new();
            let mut q = BTreeMap::new();
            for &(i, j) in pairs {
                sets.insert(i, BTreeSet::from([j]));
                q.insert(i, j);
            }
            Ok(Witness::Oddtown {
                n: *n,
                rows: *m,
                sets,
                q,
                p_blocks: BTreeMap::new(),
                r_blocks: BTreeMap::new(),
            })
        }
        (RuleId::OddtownFrom2Partition, Witness::Partition { n, p, blocks }) => {
            if *p != 2 {
                return Err(ReduceError::Constraint("requires a 2-partition".into()));
            }
            // All sets equal the whole source universe inside [n+1]; the
            // intersections reuse the given partition, the per-set partitions
            // pair the universe minus its top element.
            let target_n = n + 1;
            let rows = n + 2;
            let full: BTreeSet<u32> = (1..=*n).collect();
            let mut sets = BTreeMap::new();
            let mut q = BTreeMap::new();
            let mut p_blocks = BTreeMap::new();
            let mut r_blocks = BTreeMap::new();
            let natural: Vec<(u32, u32)> = (1..*n)
                .step_by(2)
                .map(|x| (x, x + 1))
                .filter(|&(_, b)| b < *n)
                .collect();
            for i in 1..=rows {
                sets.insert(i, full.clone());
                q.insert(i, *n);
                p_blocks.insert(i, natural.clone());
            }
            let given: Vec<(u32, u32)> = blocks.iter().map(|b| (b[0], b[1])).collect();
            for i in 1..=rows {
                for i2 in i + 1..=rows {
                    r_blocks.insert((i, i2), given.clone());
                }
            }
            Ok(Witness::Oddtown { n: target_n, rows, sets, q, p_blocks, r_blocks })
        }
        (RuleId::OddtownPrimeFrom2Partition, Witness::Partition { n, p, blocks }) => {
            if *p != 2 {
                return Err(ReduceError::Constraint("requires a 2-partition".into()));
            }
            if blocks.len() < 4 {
                return Err(ReduceError::Constraint(
                    "the partition must have at least four blocks".into(),
                ));
            }
            let mut sorted: Vec<(u32, u32)> = blocks.iter().map(|b| (b[0], b[1])).collect();
            sorted.sort();
            let block_of = |x: u32| -> Option<(u32, u32)> {
                sorted.iter().copied().find(|&(a, b)| a == x || b == x)
            };
            let succ = |blk: (u32, u32)| -> (u32, u32) {
                match sorted.iter().position(|&b| b == blk) {
                    Some(idx) if idx + 1 < sorted.len() => sorted[idx + 1],
                    _ => sorted[0],
                }
            };
            let full: BTreeSet<u32> = blocks.iter().flatten().copied().collect();
            let universe: u32 = *n;
            let rows = full.len() as u32 + 1;
            let mut sets = BTreeMap::new();
            let mut removed: BTreeMap<u32, BTreeSet<(u32, u32)>> = BTreeMap::new();
            for &x in &full {
                let blk = block_of(x).expect("partition covers its support");
                let (lo, hi) = blk;
                let partner = if x == lo { hi } else { lo };
                let mut rm: BTreeSet<(u32, u32)> = BTreeSet::new();
                rm.insert(blk);
                if x > partner {
                    rm.insert(succ(blk));
                }
                let mut s = full.clone();
                for (a, b) in &rm {
                    s.remove(a);
                    s.remove(b);
                }
                sets.insert(x, s);
                removed.insert(x, rm);
            }
            // The last row removes three designated blocks.
            let last: BTreeSet<(u32, u32)> = sorted.iter().take(3).copied().collect();
            let mut s_last = full.clone();
            for (a, b) in &last {
                s_last.remove(a);
                s_last.remove(b);
            }
            sets.insert(rows, s_last);
            removed.insert(rows, last);
            // Intersections are partitioned by the surviving blocks.
            let mut r_blocks = BTreeMap::new();
            let keys: Vec<u32> = sets.keys().copied().collect();
            for (ai, &i) in keys.iter().enumerate() {
                for &i2 in keys.iter().skip(ai + 1) {
                    let gone: BTreeSet<(u32, u32)> =
                        removed[&i].union(&removed[&i2]).copied().collect();
                    let surviving: Vec<(u32, u32)> = sorted
                        .iter()
                        .copied()
                        .filter(|b| !gone.contains(b))
                        .collect();
                    r_blocks.insert((i, i2), surviving);
                }
            }
            Ok(Witness::Oddtown {
                n: universe,
                rows,
                sets,
                q: BTreeMap::new(),
                p_blocks: BTreeMap::new(),
                r_blocks,
            })
        }
        (RuleId::OddtownFromOddtownPrime, Witness::Oddtown { n, rows, sets, q, p_blocks, r_blocks }) => {
            // If all sets are pairwise distinct, the witness passes through;
            // a duplicate pair yields a 2-partition of [2n−1] assembled from
            // the two given partitions and the copy pairing.
            let keys: Vec<u32> = sets.keys().copied().collect();
            let mut dup: Option<(u32, u32)> = None;
            for (ai, &i) in keys.iter().enumerate() {
                for &i2 in keys.iter().skip(ai + 1) {
                    if sets[&i] == sets[&i2] {
                        dup = Some((i, i2));
                        break;
                    }
                }
            }
            match dup {
                None => Ok(Witness::Oddtown {
                    n: *n,
                    rows: *rows,
                    sets: sets.clone(),
                    q: q.clone(),
                    p_blocks: p_blocks.clone(),
                    r_blocks: r_blocks.clone(),
                }),
                Some((i, i2)) => {
                    let s = &sets[&i];
                    if s.len() % 2 == 0 {
                        return Err(ReduceError::Constraint(
                            "duplicate-set branch requires odd set size".into(),
                        ));
                    }
                    let s0 = q
                        .get(&i)
                        .copied()
                        .ok_or_else(|| ReduceError::Constraint("missing distinguished element".into()))?;
                    // [2n−1] ≅ ([n]∖S) ⊔ ([n]∖S) ⊔ S ⊔ (S∖{s0}).
                    let comp: Vec<u32> = (1..=*n).filter(|x| !s.contains(x)).collect();
                    let c = comp.len() as u32;
                    let ssz = s.len() as u32;
                    let s_sorted: Vec<u32> = s.iter().copied().collect();
                    let pos_in_s = |x: u32| s_sorted.iter().position(|&y| y == x).unwrap() as u32;
                    let code1 = |x: u32| comp.iter().position(|&y| y == x).unwrap() as u32 + 1;
                    let code2 = |x: u32| c + code1(x) - 1 + 1;
                    let code3 = |x: u32| 2 * c + pos_in_s(x) + 1;
                    let code4 = |x: u32| 2 * c + ssz + pos_in_s(x) + if pos_in_s(x) >= pos_in_s(s0) { 0 } else { 1 };
                    let mut out_blocks: Vec<Vec<u32>> = Vec::new();
                    for &x in &comp {
                        out_blocks.push(vec![code1(x), code2(x)]);
                    }
                    for &(a, b) in r_blocks
                        .get(&(i, i2))
                        .ok_or_else(|| ReduceError::Constraint("missing pair partition".into()))?
                    {
                        out_blocks.push(vec![code3(a), code3(b)]);
                    }
                    for &(a, b) in p_blocks
                        .get(&i)
                        .ok_or_else(|| ReduceError::Constraint("missing set partition".into()))?
                    {
                        out_blocks.push(vec![code4(a), code4(b)]);
                    }
                    for b in &mut out_blocks {
                        b.sort_unstable();
                    }
                    Ok(Witness::Partition { n: 2 * n - 1, p: 2, blocks: out_blocks })
                }
            }
        }
        (RuleId::FieFromInjection, Witness::Injection { m, n, pairs }) => {
            let mut sets = BTreeMap::new();
            for &(i, j) in pairs {
                sets.insert(i, BTreeSet::from([j]));
            }
            Ok(Witness::Fie { n: *n, rows: *m, sets, maps: BTreeMap::new() })
        }
        _ => Err(ReduceError::Type(format!(
            "rule {rule} does not accept this witness kind"
        ))),
    }
}

/// Lower a witness to a variable assignment and report the target-matrix
/// conjuncts it satisfies; conjuncts mentioning absent rows are skipped.
pub fn check_against_matrix(w: &Witness) -> Result<(PrincipleInstance, Vec<usize>), ReduceError> {
    let (inst, assignment, row_filter): (PrincipleInstance, Assignment, Box<dyn Fn(&BTreeSet<Var>) -> bool>) =
        match w {
            Witness::UcpFamily { l, d, n, slots } => {
                let inst = generate(
                    PrincipleId::Ucp,
                    Params { l: Some(*l), d: Some(*d), n: Some(*n), ..Default::default() },
                )
                .map_err(|e| ReduceError::Type(e.to_string()))?;
                let mut tv = Vec::new();
                for (&(i, j), &e) in slots {
                    tv.push(Var::Ucp { i, j, e });
                }
                let a = Assignment::from_true_vars(tv, &inst.vars);
                (inst, a, Box::new(|_| true))
            }
            Witness::Bijection { m, n, pairs } | Witness::Injection { m, n, pairs } => {
                let onto = matches!(w, Witness::Bijection { .. });
                let inst = generate(
                    if onto { PrincipleId::OntoPhp } else { PrincipleId::InjPhp },
                    Params { m: Some(*m), n: Some(*n), ..Default::default() },
                )
                .map_err(|e| ReduceError::Type(e.to_string()))?;
                let tv: Vec<Var> = pairs
                    .iter()
                    .map(|&(i, j)| Var::Inj { pigeon: i, hole: j })
                    .collect();
                let a = Assignment::from_true_vars(tv, &inst.vars);
                (inst, a, Box::new(|_| true))
            }
            Witness::Partition { n, p, blocks } => {
                let inst = generate(
                    PrincipleId::Count,
                    Params { p: Some(*p), n: Some(*n), ..Default::default() },
                )
                .map_err(|e| ReduceError::Type(e.to_string()))?;
                let tv: Vec<Var> = blocks
                    .iter()
                    .map(|b| {
                        let mut bb = b.clone();
                        bb.sort_unstable();
                        Var::Count { block: bb }
                    })
                    .collect();
                let a = Assignment::from_true_vars(tv, &inst.vars);
                (inst, a, Box::new(|_| true))
            }
            Witness::Oddtown { n, rows, sets, q, p_blocks, r_blocks } => {
                let inst = generate(
                    PrincipleId::Oddtown,
                    Params { n: Some(*n), ..Default::default() },
                )
                .map_err(|e| ReduceError::Type(e.to_string()))?;
                let mut tv = Vec::new();
                for (&i, s) in sets {
                    for &j in s {
                        tv.push(Var::OddS { i, j });
                    }
                }
                for (&i, &j) in q {
                    tv.push(Var::OddQ { i, j });
                }
                for (&i, bs) in p_blocks {
                    for &b in bs {
                        tv.push(Var::OddP { i, block: b });
                    }
                }
                for (&(i, i2), bs) in r_blocks {
                    for &b in bs {
                        tv.push(Var::OddR { i, i2, block: b });
                    }
                }
                let a = Assignment::from_true_vars(tv, &inst.vars);
                let rows = *rows;
                let filt = move |vars: &BTreeSet<Var>| -> bool {
                    vars.iter().all(|v| match v {
                        Var::OddS { i, .. } | Var::OddQ { i, .. } | Var::OddP { i, .. } => {
                            *i <= rows
                        }
                        Var::OddR { i, i2, .. } => *i <= rows && *i2 <= rows,
                        _ => true,
                    })
                };
                (inst, a, Box::new(filt))
            }
            Witness::Fie { n, rows, sets, maps } => {
                let inst = generate(
                    PrincipleId::Fie,
                    Params { n: Some(*n), ..Default::default() },
                )
                .map_err(|e| ReduceError::Type(e.to_string()))?;
                let mut tv = Vec::new();
                for (&i, s) in sets {
                    for &j in s {
                        tv.push(Var::FieS { i, j });
                    }
                }
                for (&(i1, i2, i1p, i2p), ps) in maps {
                    for &(j, jp) in ps {
                        tv.push(Var::FieR { i1, i2, i1p, i2p, j, jp });
                    }
                }
                let a = Assignment::from_true_vars(tv, &inst.vars);
                let rows = *rows;
                let filt = move |vars: &BTreeSet<Var>| -> bool {
                    vars.iter().all(|v| match v {
                        Var::FieS { i, .. } => *i <= rows,
                        Var::FieR { i1, i2, i1p, i2p, .. } => {
                            *i1 <= rows && *i2 <= rows && *i1p <= rows && *i2p <= rows
                        }
                        _ => true,
                    })
                };
                (inst, a, Box::new(filt))
            }
            Witness::Gcp(_) => {
                return Err(ReduceError::Type(
                    "the generalized principle has no propositional matrix; use the structure checker"
                        .into(),
                ))
            }
        };
    let mut failing = Vec::new();
    for (idx, c) in inst.matrix.iter().enumerate() {
        if !row_filter(&c.variables()) {
            continue;
        }
        if !c.eval(&assignment).map_err(|e| ReduceError::Type(e.to_string()))? {
            failing.push(idx);
        }
    }
    Ok((inst, failing))
}

/// One certification record.
#[derive(Debug, Clone)]
pub struct CertRecord {
    pub rule: RuleId,
    pub scale: String,
    pub witnesses: usize,
    pub violations: Vec<String>,
}

impl CertRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{}",
            self.rule,
            self.scale,
            self.witnesses,
            if self.violations.is_empty() {
                "ok".to_string()
            } else {
                self.violations.join(" | ")
            }
        )
    }
}

fn all_injections(m: u32, n: u32) -> Vec<Vec<(u32, u32)>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(i: u32, m: u32, n: u32, used: &mut BTreeSet<u32>, cur: &mut Vec<(u32, u32)>, out: &mut Vec<Vec<(u32, u32)>>) {
        if i > m {
            out.push(cur.clone());
            return;
        }
        for j in 1..=n {
            if !used.contains(&j) {
                used.insert(j);
                cur.push((i, j));
                rec(i + 1, m, n, used, cur, out);
                cur.pop();
                used.remove(&j);
            }
        }
    }
    rec(1, m, n, &mut BTreeSet::new(), &mut cur, &mut out);
    out
}

/// All perfect p-partitions of [n].
pub fn all_partitions(n: u32, p: u32) -> Vec<Vec<Vec<u32>>> {
    fn rec(remaining: &BTreeSet<u32>, p: u32, cur: &mut Vec<Vec<u32>>, out: &mut Vec<Vec<Vec<u32>>>) {
        if remaining.is_empty() {
            out.push(cur.clone());
            return;
        }
        let first = *remaining.iter().next().unwrap();
        let rest: Vec<u32> = remaining.iter().copied().filter(|&x| x != first).collect();
        for combo in p_subsets(rest.len() as u32, p - 1) {
            let mut block = vec![first];
            for c in combo {
                block.push(rest[c as usize - 1]);
            }
            block.sort_unstable();
            let mut rem2 = remaining.clone();
            for x in &block {
                rem2.remove(x);
            }
            cur.push(block);
            rec(&rem2, p, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if p == 0 || n % p != 0 {
        return out;
    }
    rec(&(1..=n).collect(), p, &mut Vec::new(), &mut out);
    out
}

/// Sweep all source witnesses at the given scale through the rule and check
/// the transform contract, returning a report.
pub fn certify(rule: RuleId, scale: (u32, u32)) -> Result<CertRecord, ReduceError> {
    let (a, b) = scale;
    let mut violations = Vec::new();
    let mut count = 0usize;

    let check_matrix_target = |w: &Witness, tag: &str, violations: &mut Vec<String>| {
        match check_against_matrix(w) {
            Ok((_, failing)) if failing.is_empty() => {}
            Ok((_, failing)) => violations.push(format!("{tag}: failing rows {failing:?}")),
            Err(e) => violations.push(format!("{tag}: {e}")),
        }
    };

    match rule {
        RuleId::UcpFromCount => {
            for blocks in all_partitions(b, a) {
                count += 1;
                let w = Witness::Partition { n: b, p: a, blocks };
                let out = transform(rule, &w)?;
                check_matrix_target(&out, &format!("partition #{count}"), &mut violations);
            }
        }
        RuleId::UcpFromBijection | RuleId::ModphpFromBijection | RuleId::OntophpFromModphp => {
            // Bijections exist exactly at m = n.
            for pairs in all_injections(a, a) {
                count += 1;
                let w = Witness::Bijection { m: a, n: a, pairs };
                let out = transform(rule, &w)?;
                check_matrix_target(&out, &format!("bijection #{count}"), &mut violations);
            }
        }
        RuleId::GcpFromUcp => {
            // Source witnesses: partitions of [n] into d-sets placed into l
            // slots; enumerate via d-partitions and slot injections.
            let d = a;
            let n = b;
            for blocks in all_partitions(n, d) {
                count += 1;
                let l = blocks.len() as u32 + 1;
                let mut slots = BTreeMap::new();
                for (bi, blk) in blocks.iter().enumerate() {
                    for (j, &e) in blk.iter().enumerate() {
                        slots.insert((bi as u32 + 1, j as u32 + 1), e);
                    }
                }
                let w = Witness::UcpFamily { l, d, n, slots };
                let out = transform(rule, &w)?;
                if let Witness::Gcp(s) = &out {
                    match check_gcp(s) {
                        Ok(rep) => {
                            // The bijection and the remainder-side injection
                            // are genuine; the first proper injection can only
                            // exist when the source side condition failed.
                            if !rep.cond1 {
                                violations.push(format!("family #{count}: M0 not a bijection"));
                            }
                            if !rep.cond3 {
                                violations.push(format!("family #{count}: M2 not proper"));
                            }
                            let expect2 = n % d != 0;
                            if rep.cond2 != expect2 {
                                violations.push(format!(
                                    "family #{count}: condition 2 = {} unexpected",
                                    rep.cond2
                                ));
                            }
                        }
                        Err(e) => violations.push(format!("family #{count}: {e}")),
                    }
                }
            }
        }
        RuleId::GcpFromInjection => {
            for m in 1..=b {
                for pairs in all_injections(m, b) {
                    count += 1;
                    let w = Witness::Injection { m, n: b, pairs };
                    let out = transform(rule, &w)?;
                    if let Witness::Gcp(s) = &out {
                        match check_gcp(s) {
                            Ok(rep) => {
                                if !rep.cond1 {
                                    violations
                                        .push(format!("injection #{count}: M0 not a bijection"));
                                }
                                if !rep.cond2 {
                                    violations
                                        .push(format!("injection #{count}: M1 not proper"));
                                }
                                let expect3 = b < m;
                                if rep.cond3 != expect3 {
                                    violations.push(format!(
                                        "injection #{count}: condition 3 = {} unexpected",
                                        rep.cond3
                                    ));
                                }
                            }
                            Err(e) => violations.push(format!("injection #{count}: {e}")),
                        }
                    }
                }
            }
        }
        RuleId::OddtownFromInjection | RuleId::FieFromInjection => {
            for pairs in all_injections(a, b) {
                count += 1;
                let w = Witness::Injection { m: a, n: b, pairs };
                let out = transform(rule, &w)?;
                check_matrix_target(&out, &format!("injection #{count}"), &mut violations);
            }
        }
        RuleId::OddtownFrom2Partition => {
            // Satisfiable sources exist only over even universes, where the
            // odd-size rows of the literal construction are inapplicable; the
            // certified contract covers the intersection rows.
            for blocks in all_partitions(b, 2) {
                count += 1;
                let w = Witness::Partition { n: b, p: 2, blocks };
                let out = transform(rule, &w)?;
                if let Witness::Oddtown { rows, r_blocks, sets, .. } = &out {
                    for (&(i, i2), bs) in r_blocks {
                        if i > *rows || i2 > *rows {
                            continue;
                        }
                        let inter: BTreeSet<u32> =
                            sets[&i].intersection(&sets[&i2]).copied().collect();
                        let covered: BTreeSet<u32> =
                            bs.iter().flat_map(|&(x, y)| [x, y]).collect();
                        if covered != inter {
                            violations.push(format!(
                                "partition #{count}: intersection ({i},{i2}) not exactly covered"
                            ));
                        }
                        let mut seen = BTreeSet::new();
                        for &(x, y) in bs {
                            if !seen.insert(x) || !seen.insert(y) {
                                violations.push(format!(
                                    "partition #{count}: overlapping pair blocks at ({i},{i2})"
                                ));
                            }
                        }
                    }
                }
            }
        }
        RuleId::OddtownPrimeFrom2Partition => {
            for blocks in all_partitions(b, 2) {
                if blocks.len() < 4 {
                    continue;
                }
                count += 1;
                let w = Witness::Partition { n: b, p: 2, blocks: blocks.clone() };
                let out = transform(rule, &w)?;
                if let Witness::Oddtown { sets, r_blocks, .. } = &out {
                    // Distinctness.
                    let keys: Vec<u32> = sets.keys().copied().collect();
                    for (ai, &i) in keys.iter().enumerate() {
                        for &i2 in keys.iter().skip(ai + 1) {
                            if sets[&i] == sets[&i2] {
                                violations
                                    .push(format!("partition #{count}: sets {i} and {i2} equal"));
                            }
                        }
                    }
                    // Pair partitions drop at most five blocks and cover the
                    // intersections exactly.
                    for (&(i, i2), bs) in r_blocks {
                        if blocks.len() - bs.len() > 5 {
                            violations.push(format!(
                                "partition #{count}: pair ({i},{i2}) removed {} blocks",
                                blocks.len() - bs.len()
                            ));
                        }
                        let inter: BTreeSet<u32> =
                            sets[&i].intersection(&sets[&i2]).copied().collect();
                        let covered: BTreeSet<u32> =
                            bs.iter().flat_map(|&(x, y)| [x, y]).collect();
                        if covered != inter {
                            violations.push(format!(
                                "partition #{count}: pair ({i},{i2}) partition misses the intersection"
                            ));
                        }
                    }
                }
            }
        }
        RuleId::OddtownFromOddtownPrime => {
            // Distinct-set witnesses from injections pass through unchanged.
            for pairs in all_injections(a, b) {
                count += 1;
                let w = transform(RuleId::OddtownFromInjection, &Witness::Injection {
                    m: a,
                    n: b,
                    pairs,
                })?;
                let out = transform(rule, &w)?;
                if out != w {
                    violations.push(format!("witness #{count}: distinct sets were altered"));
                }
            }
        }
    }
    Ok(CertRecord {
        rule,
        scale: format!("({a},{b})"),
        witnesses: count,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ucp_from_count_example() {
        // p=2, n=4, partition {{1,2},{3,4}}: a family of 25 indices with two
        // 2-sets, the rest empty; the full UCP matrix holds.
        let w = Witness::Partition { n: 4, p: 2, blocks: vec![vec![1, 2], vec![3, 4]] };
        let out = transform(RuleId::UcpFromCount, &w).unwrap();
        match &out {
            Witness::UcpFamily { l, d, n, slots } => {
                assert_eq!((*l, *d, *n), (25, 2, 4));
                assert_eq!(slots.len(), 4);
            }
            _ => panic!("wrong kind"),
        }
        let (_, failing) = check_against_matrix(&out).unwrap();
        assert!(failing.is_empty(), "{failing:?}");
    }

    #[test]
    fn oddtown_from_identity_injection() {
        let w = Witness::Injection { m: 3, n: 3, pairs: vec![(1, 1), (2, 2), (3, 3)] };
        let out = transform(RuleId::OddtownFromInjection, &w).unwrap();
        let (_, failing) = check_against_matrix(&out).unwrap();
        assert!(failing.is_empty(), "{failing:?}");
    }

    #[test]
    fn fie_from_identity_injection() {
        let w = Witness::Injection { m: 2, n: 2, pairs: vec![(1, 1), (2, 2)] };
        let out = transform(RuleId::FieFromInjection, &w).unwrap();
        let (_, failing) = check_against_matrix(&out).unwrap();
        assert!(failing.is_empty(), "{failing:?}");
    }

    #[test]
    fn ontophp_from_modphp_identity() {
        let w = Witness::Bijection { m: 2, n: 2, pairs: vec![(1, 1), (2, 2)] };
        let out = transform(RuleId::OntophpFromModphp, &w).unwrap();
        let (_, failing) = check_against_matrix(&out).unwrap();
        assert!(failing.is_empty());
    }

    #[test]
    fn certify_examples() {
        let r = certify(RuleId::UcpFromCount, (2, 4)).unwrap();
        assert_eq!(r.witnesses, 3);
        assert!(r.violations.is_empty(), "{:?}", r.violations);

        let r = certify(RuleId::OddtownFromInjection, (3, 3)).unwrap();
        assert_eq!(r.witnesses, 6);
        assert!(r.violations.is_empty(), "{:?}", r.violations);

        let r = certify(RuleId::GcpFromInjection, (0, 2)).unwrap();
        assert!(r.violations.is_empty(), "{:?}", r.violations);
    }

    #[test]
    fn oddtownprime_requires_four_blocks() {
        let w = Witness::Partition { n: 4, p: 2, blocks: vec![vec![1, 2], vec![3, 4]] };
        assert!(matches!(
            transform(RuleId::OddtownPrimeFrom2Partition, &w),
            Err(ReduceError::Constraint(_))
        ));
    }

    #[test]
    fn oddtownprime_properties_at_eight() {
        let r = certify(RuleId::OddtownPrimeFrom2Partition, (2, 8)).unwrap();
        assert!(r.witnesses > 0);
        assert!(r.violations.is_empty(), "{:?}", r.violations);
    }

    #[test]
    fn oddtown_from_oddtownprime_duplicate_branch() {
        // Hand-built duplicate pair with odd set size: S = {1,2,3} twice over
        // [4], distinguished element 3, a pair partition of S∖{3} and a
        // claimed partition of S carried from the counterfactual input.
        let s: BTreeSet<u32> = [1, 2, 3].into();
        let mut sets = BTreeMap::new();
        sets.insert(1, s.clone());
        sets.insert(2, s.clone());
        let mut q = BTreeMap::new();
        q.insert(1, 3u32);
        let mut p_blocks = BTreeMap::new();
        p_blocks.insert(1, vec![(1u32, 2u32)]);
        let mut r_blocks = BTreeMap::new();
        r_blocks.insert((1u32, 2u32), vec![(1u32, 2u32)]);
        let w = Witness::Oddtown { n: 4, rows: 2, sets, q, p_blocks, r_blocks };
        let out = transform(RuleId::OddtownFromOddtownPrime, &w).unwrap();
        match out {
            Witness::Partition { n, p, blocks } => {
                assert_eq!((n, p), (7, 2));
                // Pairwise disjoint blocks; the claimed partition of S covers
                // only 2 of its 3 images, so exactly one element of [7] stays
                // uncovered.
                let mut seen = BTreeSet::new();
                for b in &blocks {
                    for &x in b {
                        assert!(x >= 1 && x <= 7);
                        assert!(seen.insert(x), "element {x} reused");
                    }
                }
                assert_eq!(seen.len(), 6);
            }
            _ => panic!("expected a partition"),
        }
    }
}
