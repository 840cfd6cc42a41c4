//! Command-line front end: generation, satisfiability, polynomial systems,
//! proof verification and search, tree inspection, evaluation checking,
//! compilation, reductions, and the brute-force oracles.
//!
//! Exit codes: 0 success, 1 verification or contract failure, 2 usage error.
//! Output is machine-readable on stdout; runtime statistics go to stderr.

use clap::{Parser, Subcommand, ValueEnum};
use nsbench_core::compile::{self, compile_ucp_pipeline};
use nsbench_core::eval::FregeProof;
use nsbench_core::formula::Formula;
use nsbench_core::oracle;
use nsbench_core::partial::{PartialInjection, Universe};
use nsbench_core::poly::{
    min_degree, parse_poly, proof_to_json, search_ns, system_neg_count, system_neg_injphp,
    system_neg_injstar, verify_ns, MinDegree, NSProof, PolySystem, Polynomial, RingSpec,
    SystemKind,
};
use nsbench_core::principles::{generate, sat_matrix, Params, PrincipleId, SatResult};
use nsbench_core::reduce::{certify, transform, RuleId, Witness, ALL_RULES};
use nsbench_core::tree::{tree_from_list, Tree};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::io::Read;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Parser)]
#[command(name = "nsbench", about = "counting-principle and Nullstellensatz workbench")]
struct Cli {
    #[arg(long, value_enum, default_value = "json", global = true)]
    format: Format,
    /// Worker threads for internal sweeps (certify over multiple rules).
    #[arg(long, default_value = "1", global = true)]
    jobs: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a principle instance.
    Gen {
        id: String,
        #[arg(long)] p: Option<u32>,
        #[arg(long)] n: Option<u32>,
        #[arg(long)] m: Option<u32>,
        #[arg(long)] d: Option<u32>,
        #[arg(long)] l: Option<u32>,
    },
    /// Print only the matrix conjuncts of an instance.
    Matrix {
        id: String,
        #[arg(long)] p: Option<u32>,
        #[arg(long)] n: Option<u32>,
        #[arg(long)] m: Option<u32>,
        #[arg(long)] d: Option<u32>,
        #[arg(long)] l: Option<u32>,
    },
    /// Backtracking satisfiability of the matrix.
    Sat {
        id: String,
        #[arg(long)] p: Option<u32>,
        #[arg(long)] n: Option<u32>,
        #[arg(long)] m: Option<u32>,
        #[arg(long)] d: Option<u32>,
        #[arg(long)] l: Option<u32>,
        #[arg(long, default_value = "50000000")] budget: u64,
    },
    /// Emit a polynomial system in the text format.
    NsSystem {
        /// neg-count | neg-injphp | neg-injstar
        system: String,
        #[arg(long)] p: Option<u32>,
        #[arg(long)] n: Option<u32>,
        #[arg(long)] m: Option<u32>,
        /// Prime field modulus; mutually exclusive with --ring-z.
        #[arg(long)] field: Option<u64>,
        /// Modular ring Z_d.
        #[arg(long)] ring_z: Option<u64>,
    },
    /// Verify an NS proof file (JSON on stdin or --file).
    NsVerify {
        #[arg(long)] file: Option<String>,
    },
    /// Search for an NS proof of 1 = 0 with bounded coefficient degree.
    NsSearch {
        system: String,
        #[arg(long)] p: Option<u32>,
        #[arg(long)] n: Option<u32>,
        #[arg(long)] m: Option<u32>,
        #[arg(long)] field: u64,
        #[arg(long)] dmax: usize,
    },
    /// Least refutation degree up to a cap.
    NsMindegree {
        system: String,
        #[arg(long)] p: Option<u32>,
        #[arg(long)] n: Option<u32>,
        #[arg(long)] m: Option<u32>,
        #[arg(long)] field: u64,
        #[arg(long)] dcap: usize,
    },
    /// Build the list-driven tree for a family of partial injections and
    /// print its branches (family as JSON, e.g. '[{"pairs":[[1,1]],"singles":[]}]').
    Tree {
        #[arg(long)] pigeons: u32,
        #[arg(long)] holes: u32,
        family: String,
    },
    /// Check the six conditions of an evaluation built bottom-up for a
    /// formula file (one formula JSON per line).
    EvalCheck {
        #[arg(long)] pigeons: u32,
        #[arg(long)] holes: u32,
        #[arg(long)] k: u32,
        #[arg(long)] file: String,
    },
    /// Audit a proof file against a bottom-up evaluation of its lines.
    Audit {
        #[arg(long)] pigeons: u32,
        #[arg(long)] holes: u32,
        #[arg(long)] k: u32,
        #[arg(long)] file: String,
    },
    /// Run the UCP compilation pipeline on a proof file.
    CompileUcp {
        #[arg(long)] pigeons: u32,
        #[arg(long)] holes: u32,
        #[arg(long)] k: u32,
        #[arg(long)] file: String,
        /// Output directory for the certificate bundle (default: OUTPUT_DIR
        /// or ./nsbench-out).
        #[arg(long)] out: Option<String>,
    },
    /// Apply a witness transformer (witness JSON on stdin or --witness).
    Reduce {
        rule: String,
        #[arg(long)] witness: Option<String>,
    },
    /// Exhaustively certify a rule at a small scale.
    Certify {
        /// Rule name or "all".
        rule: String,
        #[arg(long, default_value = "2")] a: u32,
        #[arg(long, default_value = "4")] b: u32,
    },
    /// Brute-force oracle queries.
    Oracle {
        /// taut | mindegree
        query: String,
        #[arg(long)] id: Option<String>,
        #[arg(long)] system: Option<String>,
        #[arg(long)] p: Option<u32>,
        #[arg(long)] n: Option<u32>,
        #[arg(long)] m: Option<u32>,
        #[arg(long)] field: Option<u64>,
        #[arg(long, default_value = "4")] dcap: usize,
    },
}

fn params(p: Option<u32>, n: Option<u32>, m: Option<u32>, d: Option<u32>, l: Option<u32>) -> Params {
    Params { p, n, m, d, l, fie_variant: None }
}

fn ring_of(field: Option<u64>, ring_z: Option<u64>) -> Result<RingSpec, String> {
    match (field, ring_z) {
        (Some(f), None) => RingSpec::field(f).map_err(|e| e.to_string()),
        (None, Some(d)) => RingSpec::modular(d).map_err(|e| e.to_string()),
        (None, None) => Err("one of --field or --ring-z is required".into()),
        _ => Err("--field and --ring-z are mutually exclusive".into()),
    }
}

fn build_system(
    name: &str,
    p: Option<u32>,
    n: Option<u32>,
    m: Option<u32>,
    ring: RingSpec,
) -> Result<PolySystem, String> {
    match name {
        "neg-count" => {
            let pp = p.ok_or("--p required")?;
            let nn = n.ok_or("--n required")?;
            system_neg_count(pp, nn, ring).map_err(|e| e.to_string())
        }
        "neg-injphp" => {
            let mm = m.ok_or("--m required")?;
            let nn = n.ok_or("--n required")?;
            system_neg_injphp(mm, nn, ring).map_err(|e| e.to_string())
        }
        "neg-injstar" => {
            let mm = m.ok_or("--m required")?;
            let nn = n.ok_or("--n required")?;
            system_neg_injstar(mm, nn, ring).map_err(|e| e.to_string())
        }
        _ => Err(format!("unknown system {name}")),
    }
}

fn emit(fmt: Format, v: &Value) {
    match fmt {
        Format::Json => println!("{}", serde_json::to_string_pretty(v).unwrap()),
        Format::Text | Format::Csv => match v {
            Value::String(s) => println!("{s}"),
            Value::Array(a) => {
                for item in a {
                    match item {
                        Value::String(s) => println!("{s}"),
                        _ => println!("{item}"),
                    }
                }
            }
            _ => println!("{v}"),
        },
    }
}

/// Build a bottom-up evaluation for every formula in the list, including the
/// subformula closure, over injection trees.
fn build_eval(u: &Universe, k: u32, formulas: &[Formula]) -> nsbench_core::eval::Evaluation {
    use nsbench_core::formula::Var;
    let mut ev = nsbench_core::eval::Evaluation::new(u.clone(), k);
    fn go(ev: &mut nsbench_core::eval::Evaluation, u: &Universe, f: &Formula) {
        if ev.contains(f) {
            return;
        }
        match &f.propagate() {
            Formula::Const(b) => ev.insert(f, Tree::Leaf(*b)),
            Formula::Var(Var::Inj { pigeon, hole }) => {
                let t = Tree::pigeon_query(u, *pigeon, |h| Tree::Leaf(h == *hole));
                ev.insert(f, t);
            }
            Formula::Var(_) => {}
            Formula::Not(g) => {
                go(ev, u, g);
                if let Some(t) = ev.get(g) {
                    let c = t.complement();
                    ev.insert(f, c);
                }
            }
            Formula::Or(cs) => {
                let mut family = Vec::new();
                for c in cs {
                    go(ev, u, c);
                    if let Some(t) = ev.get(c) {
                        family.extend(t.branches_labeled(true));
                    }
                }
                let mut seen = std::collections::BTreeSet::new();
                let uniq: Vec<PartialInjection> =
                    family.into_iter().filter(|s| seen.insert(s.clone())).collect();
                if let Ok(t) = tree_from_list(u, &uniq) {
                    ev.insert(f, t);
                }
            }
        }
    }
    for f in formulas {
        go(&mut ev, u, f);
    }
    ev
}

fn parse_witness(s: &str) -> Result<Witness, String> {
    let v: Value = serde_json::from_str(s).map_err(|e| e.to_string())?;
    let kind = v.get("kind").and_then(|k| k.as_str()).ok_or("missing kind")?;
    let geti = |k: &str| -> Result<u32, String> {
        v.get(k)
            .and_then(|x| x.as_u64())
            .map(|x| x as u32)
            .ok_or(format!("missing {k}"))
    };
    match kind {
        "injection" | "bijection" => {
            let pairs: Vec<(u32, u32)> = v
                .get("pairs")
                .and_then(|x| x.as_array())
                .ok_or("missing pairs")?
                .iter()
                .filter_map(|p| {
                    let a = p.as_array()?;
                    Some((a[0].as_u64()? as u32, a[1].as_u64()? as u32))
                })
                .collect();
            if kind == "injection" {
                Ok(Witness::Injection { m: geti("m")?, n: geti("n")?, pairs })
            } else {
                Ok(Witness::Bijection { m: geti("m")?, n: geti("n")?, pairs })
            }
        }
        "partition" => {
            let blocks: Vec<Vec<u32>> = v
                .get("blocks")
                .and_then(|x| x.as_array())
                .ok_or("missing blocks")?
                .iter()
                .filter_map(|b| {
                    b.as_array()
                        .map(|a| a.iter().filter_map(|x| x.as_u64().map(|y| y as u32)).collect())
                })
                .collect();
            Ok(Witness::Partition { n: geti("n")?, p: geti("p")?, blocks })
        }
        "oddtown" => {
            let geti2 = |k: &str| -> Result<u32, String> {
                v.get(k)
                    .and_then(|x| x.as_u64())
                    .map(|x| x as u32)
                    .ok_or(format!("missing {k}"))
            };
            let mut sets = BTreeMap::new();
            for item in v.get("sets").and_then(|x| x.as_array()).ok_or("missing sets")? {
                let a = item.as_array().ok_or("bad set")?;
                let i = a[0].as_u64().ok_or("bad set index")? as u32;
                let elems: std::collections::BTreeSet<u32> = a[1]
                    .as_array()
                    .ok_or("bad set body")?
                    .iter()
                    .filter_map(|x| x.as_u64().map(|y| y as u32))
                    .collect();
                sets.insert(i, elems);
            }
            let mut q = BTreeMap::new();
            if let Some(arr) = v.get("q").and_then(|x| x.as_array()) {
                for item in arr {
                    let a = item.as_array().ok_or("bad q")?;
                    q.insert(a[0].as_u64().unwrap() as u32, a[1].as_u64().unwrap() as u32);
                }
            }
            let parse_pairs = |key: &str| -> Vec<(u32, Vec<(u32, u32)>)> {
                v.get(key)
                    .and_then(|x| x.as_array())
                    .map(|arr| {
                        arr.iter()
                            .filter_map(|item| {
                                let a = item.as_array()?;
                                let i = a[0].as_u64()? as u32;
                                let blocks: Vec<(u32, u32)> = a[1]
                                    .as_array()?
                                    .iter()
                                    .filter_map(|b| {
                                        let bb = b.as_array()?;
                                        Some((bb[0].as_u64()? as u32, bb[1].as_u64()? as u32))
                                    })
                                    .collect();
                                Some((i, blocks))
                            })
                            .collect()
                    })
                    .unwrap_or_default()
            };
            let p_blocks: BTreeMap<u32, Vec<(u32, u32)>> = parse_pairs("p").into_iter().collect();
            let mut r_blocks = BTreeMap::new();
            if let Some(arr) = v.get("r").and_then(|x| x.as_array()) {
                for item in arr {
                    let a = item.as_array().ok_or("bad r")?;
                    let i = a[0].as_u64().unwrap() as u32;
                    let i2 = a[1].as_u64().unwrap() as u32;
                    let blocks: Vec<(u32, u32)> = a[2]
                        .as_array()
                        .ok_or("bad r blocks")?
                        .iter()
                        .filter_map(|b| {
                            let bb = b.as_array()?;
                            Some((bb[0].as_u64()? as u32, bb[1].as_u64()? as u32))
                        })
                        .collect();
                    r_blocks.insert((i, i2), blocks);
                }
            }
            Ok(Witness::Oddtown {
                n: geti2("n")?,
                rows: geti2("rows")?,
                sets,
                q,
                p_blocks,
                r_blocks,
            })
        }
        "ucp" => {
            let mut slots = BTreeMap::new();
            for s in v.get("slots").and_then(|x| x.as_array()).ok_or("missing slots")? {
                let a = s.as_array().ok_or("bad slot")?;
                slots.insert(
                    (a[0].as_u64().unwrap() as u32, a[1].as_u64().unwrap() as u32),
                    a[2].as_u64().unwrap() as u32,
                );
            }
            Ok(Witness::UcpFamily { l: geti("l")?, d: geti("d")?, n: geti("n")?, slots })
        }
        _ => Err(format!("unsupported witness kind {kind}")),
    }
}

fn read_input(path: &Option<String>) -> Result<String, String> {
    match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| e.to_string()),
        None => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).map_err(|e| e.to_string())?;
            Ok(s)
        }
    }
}

fn parse_proof_json(v: &Value) -> Result<NSProof, String> {
    let ring_s = v.get("ring").and_then(|r| r.as_str()).ok_or("missing ring")?;
    let parts: Vec<&str> = ring_s.split_whitespace().collect();
    let ring = match parts.as_slice() {
        ["ring", "F", p] => {
            RingSpec::field(p.parse().map_err(|e| format!("{e}"))?).map_err(|e| e.to_string())?
        }
        ["ring", "Z", d] => {
            RingSpec::modular(d.parse().map_err(|e| format!("{e}"))?).map_err(|e| e.to_string())?
        }
        _ => return Err(format!("bad ring header {ring_s}")),
    };
    let mut rows = Vec::new();
    for row in v.get("system").and_then(|s| s.as_array()).ok_or("missing system")? {
        let name = row.get("name").and_then(|n| n.as_str()).ok_or("row name")?;
        let poly = row.get("poly").and_then(|p| p.as_str()).ok_or("row poly")?;
        rows.push((name.to_string(), parse_poly(ring, poly).map_err(|e| e.to_string())?));
    }
    let system = PolySystem { ring, kind: SystemKind::Other, rows };
    let mut coeffs = BTreeMap::new();
    if let Some(obj) = v.get("coeffs").and_then(|c| c.as_object()) {
        for (name, val) in obj {
            let s = val.as_str().ok_or("coeff must be a string")?;
            coeffs.insert(name.clone(), parse_poly(ring, s).map_err(|e| e.to_string())?);
        }
    }
    let g1 = parse_poly(ring, v.get("g1").and_then(|g| g.as_str()).unwrap_or("0"))
        .map_err(|e| e.to_string())?;
    let g2 = parse_poly(ring, v.get("g2").and_then(|g| g.as_str()).unwrap_or("0"))
        .map_err(|e| e.to_string())?;
    Ok(NSProof { system, coeffs, g1, g2 })
}

fn run() -> Result<i32, String> {
    let cli = Cli::parse();
    let fmt = cli.format;
    match cli.cmd {
        Cmd::Gen { id, p, n, m, d, l } => {
            let pid = PrincipleId::from_str(&id).map_err(|e| e.to_string())?;
            let inst = generate(pid, params(p, n, m, d, l)).map_err(|e| e.to_string())?;
            emit(fmt, &inst.to_json());
            Ok(0)
        }
        Cmd::Matrix { id, p, n, m, d, l } => {
            let pid = PrincipleId::from_str(&id).map_err(|e| e.to_string())?;
            let inst = generate(pid, params(p, n, m, d, l)).map_err(|e| e.to_string())?;
            emit(
                fmt,
                &json!({
                    "conjuncts": inst.matrix.iter().map(|c| c.to_json()).collect::<Vec<_>>()
                }),
            );
            Ok(0)
        }
        Cmd::Sat { id, p, n, m, d, l, budget } => {
            let pid = PrincipleId::from_str(&id).map_err(|e| e.to_string())?;
            let inst = generate(pid, params(p, n, m, d, l)).map_err(|e| e.to_string())?;
            let out = match sat_matrix(&inst, budget) {
                SatResult::Sat(a) => json!({
                    "status": "sat",
                    "true_vars": a.true_vars().iter().map(|v| v.to_string()).collect::<Vec<_>>(),
                }),
                SatResult::Unsat => json!({"status": "unsat"}),
                SatResult::Unknown => json!({"status": "unknown"}),
            };
            emit(fmt, &out);
            Ok(0)
        }
        Cmd::NsSystem { system, p, n, m, field, ring_z } => {
            let ring = ring_of(field, ring_z)?;
            let sys = build_system(&system, p, n, m, ring)?;
            match fmt {
                Format::Json => emit(
                    fmt,
                    &json!({
                        "ring": ring.to_string(),
                        "rows": sys.rows.iter().map(|(nm, pl)| json!({"name": nm, "poly": pl.to_string()})).collect::<Vec<_>>(),
                    }),
                ),
                _ => print!("{}", sys.to_text()),
            }
            Ok(0)
        }
        Cmd::NsVerify { file } => {
            let text = read_input(&file)?;
            let v: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
            let proof = parse_proof_json(&v)?;
            let rep = verify_ns(&proof).map_err(|e| e.to_string())?;
            emit(fmt, &json!({"valid": rep.valid, "degree": rep.degree.to_string()}));
            Ok(if rep.valid { 0 } else { 1 })
        }
        Cmd::NsSearch { system, p, n, m, field, dmax } => {
            let ring = RingSpec::field(field).map_err(|e| e.to_string())?;
            let sys = build_system(&system, p, n, m, ring)?;
            let found = search_ns(&sys, &Polynomial::one(ring), &Polynomial::zero(ring), dmax)
                .map_err(|e| e.to_string())?;
            match found {
                Some(proof) => {
                    emit(fmt, &proof_to_json(&proof));
                    Ok(0)
                }
                None => {
                    emit(fmt, &json!({"status": "none"}));
                    Ok(1)
                }
            }
        }
        Cmd::NsMindegree { system, p, n, m, field, dcap } => {
            let ring = RingSpec::field(field).map_err(|e| e.to_string())?;
            let sys = build_system(&system, p, n, m, ring)?;
            let result = if cli.jobs > 1 {
                // Speculative parallel sweep over the candidate degrees.
                let found: Vec<Option<usize>> = std::thread::scope(|scope| {
                    let handles: Vec<_> = (0..=dcap)
                        .map(|d| {
                            let sys = &sys;
                            scope.spawn(move || {
                                search_ns(sys, &Polynomial::one(ring), &Polynomial::zero(ring), d)
                                    .ok()
                                    .flatten()
                                    .map(|_| d)
                            })
                        })
                        .collect();
                    handles.into_iter().map(|h| h.join().expect("worker")).collect()
                });
                match found.into_iter().flatten().min() {
                    Some(d) => MinDegree::Found(d),
                    None => MinDegree::Unknown,
                }
            } else {
                min_degree(&sys, dcap).map_err(|e| e.to_string())?
            };
            match result {
                MinDegree::Found(deg) => {
                    emit(fmt, &json!(deg));
                    Ok(0)
                }
                MinDegree::Unknown => {
                    emit(fmt, &json!({"status": "unknown"}));
                    Ok(1)
                }
            }
        }
        Cmd::Tree { pigeons, holes, family } => {
            let v: Value = serde_json::from_str(&family).map_err(|e| e.to_string())?;
            let mut fam = Vec::new();
            for item in v.as_array().ok_or("family must be an array")? {
                let pairs: Vec<(u32, u32)> = item
                    .get("pairs")
                    .and_then(|x| x.as_array())
                    .map(|a| {
                        a.iter()
                            .filter_map(|pvals| {
                                let q = pvals.as_array()?;
                                Some((q[0].as_u64()? as u32, q[1].as_u64()? as u32))
                            })
                            .collect()
                    })
                    .unwrap_or_default();
                let singles: Vec<u32> = item
                    .get("singles")
                    .and_then(|x| x.as_array())
                    .map(|a| a.iter().filter_map(|x| x.as_u64().map(|y| y as u32)).collect())
                    .unwrap_or_default();
                fam.push(PartialInjection::new(pairs, singles).map_err(|e| e.to_string())?);
            }
            let u = Universe::new(pigeons, holes);
            let t = tree_from_list(&u, &fam).map_err(|e| e.to_string())?;
            let branches: Vec<Value> = t
                .branches()
                .iter()
                .map(|(b, l)| json!({"branch": b.to_json(), "label": if *l {1} else {0}}))
                .collect();
            let lab = t.relabel(&|_, l| if *l { 1u32 } else { 0 });
            emit(
                fmt,
                &json!({"height": t.height(), "tree": lab.to_json(), "branches": branches}),
            );
            Ok(0)
        }
        Cmd::EvalCheck { pigeons, holes, k, file } => {
            let text = std::fs::read_to_string(&file).map_err(|e| e.to_string())?;
            let mut formulas = Vec::new();
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                let v: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
                formulas.push(Formula::from_json(&v).map_err(|e| e.to_string())?);
            }
            let u = Universe::new(pigeons, holes);
            let ev = build_eval(&u, k, &formulas);
            let rep = ev.check();
            emit(fmt, &json!({"ok": rep.ok(), "violations": rep.violations}));
            Ok(if rep.ok() { 0 } else { 1 })
        }
        Cmd::Audit { pigeons, holes, k, file } => {
            let text = std::fs::read_to_string(&file).map_err(|e| e.to_string())?;
            let v: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
            let proof = FregeProof::from_json(&v).map_err(|e| e.to_string())?;
            let u = Universe::new(pigeons, holes);
            let formulas: Vec<Formula> = proof.lines.iter().map(|l| l.formula.clone()).collect();
            let ev = build_eval(&u, k, &formulas);
            let falsified =
                nsbench_core::eval::audit_proof(&proof, &ev).map_err(|e| e.to_string())?;
            emit(fmt, &json!({"falsified_lines": falsified}));
            Ok(0)
        }
        Cmd::CompileUcp { pigeons, holes, k, file, out } => {
            let text = std::fs::read_to_string(&file).map_err(|e| e.to_string())?;
            let v: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
            let proof = FregeProof::from_json(&v).map_err(|e| e.to_string())?;
            let u = Universe::new(pigeons, holes);
            // The evaluation must contain the component formulas of every
            // axiom instance as well as the lines themselves.
            let mut formulas: Vec<Formula> =
                proof.lines.iter().map(|l| l.formula.clone()).collect();
            for line in &proof.lines {
                if let nsbench_core::eval::Justification::UcpAxiom(ax) = &line.just {
                    let comp = compile::ucp_components(ax);
                    formulas.extend(comp.s_e.values().cloned());
                    formulas.extend(comp.s_ij.values().cloned());
                    formulas.extend(comp.p_i.values().cloned());
                    formulas.extend(comp.n_i.values().cloned());
                    formulas.extend(comp.u_i.values().cloned());
                }
            }
            let ev = build_eval(&u, k, &formulas);
            match compile_ucp_pipeline(&proof, &ev) {
                Ok(outp) => {
                    let dir = out
                        .or_else(|| std::env::var("OUTPUT_DIR").ok())
                        .unwrap_or_else(|| "nsbench-out".to_string());
                    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
                    let write = |name: &str, value: &Value| -> Result<(), String> {
                        std::fs::write(
                            format!("{dir}/{name}"),
                            serde_json::to_string_pretty(value).unwrap(),
                        )
                        .map_err(|e| e.to_string())
                    };
                    write("refutation_injstar.json", &proof_to_json(&outp.refutation_injstar))?;
                    write("refutation_injphp.json", &proof_to_json(&outp.refutation_injphp))?;
                    write("projected.json", &proof_to_json(&outp.projected))?;
                    let trees = json!({
                        "x": outp.families.x_trees.iter().map(|((i, j), t)| {
                            json!({"slot": [i, j], "branches": t.branches().iter().map(|(b, l)| {
                                json!({"branch": b.to_json(), "label": format!("{l:?}")})
                            }).collect::<Vec<_>>()})
                        }).collect::<Vec<_>>(),
                        "y": outp.families.y_trees.iter().map(|(e, t)| {
                            json!({"element": e, "branches": t.branches().iter().map(|(b, l)| {
                                json!({"branch": b.to_json(), "label": format!("{l:?}")})
                            }).collect::<Vec<_>>()})
                        }).collect::<Vec<_>>(),
                    });
                    write("trees.json", &trees)?;
                    let manifest = json!({
                        "chosen_line": outp.chosen_line,
                        "restriction": outp.restriction.to_json(),
                        "component": outp.component,
                        "degree_injstar": outp.degree_injstar.to_string(),
                        "degree_projected": outp.degree_projected.to_string(),
                        "files": ["refutation_injstar.json", "refutation_injphp.json", "projected.json", "trees.json"],
                    });
                    write("manifest.json", &manifest)?;
                    emit(fmt, &manifest);
                    Ok(0)
                }
                Err(e) => {
                    emit(fmt, &json!({"status": "error", "message": e.to_string()}));
                    Ok(1)
                }
            }
        }
        Cmd::Reduce { rule, witness } => {
            let rid = RuleId::from_str(&rule).map_err(|e| e.to_string())?;
            let text = read_input(&witness)?;
            let w = parse_witness(&text)?;
            let out = transform(rid, &w).map_err(|e| e.to_string())?;
            let contract = match &out {
                Witness::Gcp(s) => {
                    let rep = nsbench_core::gcp::check_gcp(s).map_err(|e| e.to_string())?;
                    json!({"gcp": rep.to_json()})
                }
                _ => {
                    let (_, failing) = nsbench_core::reduce::check_against_matrix(&out)
                        .map_err(|e| e.to_string())?;
                    json!({"failing_rows": failing})
                }
            };
            emit(fmt, &json!({"witness": out.to_json(), "contract": contract}));
            Ok(0)
        }
        Cmd::Certify { rule, a, b } => {
            let rules: Vec<RuleId> = if rule == "all" {
                ALL_RULES.to_vec()
            } else {
                vec![RuleId::from_str(&rule).map_err(|e| e.to_string())?]
            };
            let run_one = |r: RuleId| -> Result<nsbench_core::reduce::CertRecord, String> {
                certify(r, (a, b)).map_err(|e| e.to_string())
            };
            let records: Vec<nsbench_core::reduce::CertRecord> = if cli.jobs > 1 {
                std::thread::scope(|scope| {
                    let handles: Vec<_> =
                        rules.iter().map(|&r| scope.spawn(move || run_one(r))).collect();
                    handles
                        .into_iter()
                        .map(|h| h.join().expect("worker panicked"))
                        .collect::<Result<Vec<_>, _>>()
                })?
            } else {
                rules.iter().map(|&r| run_one(r)).collect::<Result<_, _>>()?
            };
            let clean = records.iter().all(|r| r.violations.is_empty());
            match fmt {
                Format::Csv => {
                    println!("rule,scale,witnesses,status");
                    for r in &records {
                        println!("{}", r.csv_row());
                    }
                }
                _ => emit(
                    fmt,
                    &json!(records
                        .iter()
                        .map(|r| json!({
                            "rule": r.rule.to_string(),
                            "scale": r.scale,
                            "witnesses": r.witnesses,
                            "violations": r.violations,
                        }))
                        .collect::<Vec<_>>()),
                ),
            }
            Ok(if clean { 0 } else { 1 })
        }
        Cmd::Oracle { query, id, system, p, n, m, field, dcap } => match query.as_str() {
            "taut" => {
                let pid = PrincipleId::from_str(&id.ok_or("--id required")?)
                    .map_err(|e| e.to_string())?;
                let inst =
                    generate(pid, params(p, n, m, None, None)).map_err(|e| e.to_string())?;
                let t0 = std::time::Instant::now();
                let val = oracle::oracle_taut(&inst).map_err(|e| e.to_string())?;
                eprintln!("oracle taut in {:?}", t0.elapsed());
                emit(fmt, &json!({"tautology": val}));
                Ok(0)
            }
            "mindegree" => {
                let sys = match system.as_deref() {
                    Some("neg-count") => oracle::OracleSystem::NegCount {
                        p: p.ok_or("--p required")?,
                        m: n.ok_or("--n required")?,
                    },
                    Some("neg-injphp") => oracle::OracleSystem::NegInjPhp {
                        pigeons: m.ok_or("--m required")?,
                        holes: n.ok_or("--n required")?,
                    },
                    _ => return Err("--system neg-count|neg-injphp required".into()),
                };
                let f = field.ok_or("--field required")?;
                let t0 = std::time::Instant::now();
                let val = oracle::oracle_min_degree(sys, f, dcap).map_err(|e| e.to_string())?;
                eprintln!("oracle mindegree in {:?}", t0.elapsed());
                match val {
                    Some(deg) => {
                        emit(fmt, &json!(deg));
                        Ok(0)
                    }
                    None => {
                        emit(fmt, &json!({"status": "unknown"}));
                        Ok(1)
                    }
                }
            }
            _ => Err(format!("unknown oracle query {query}")),
        },
    }
}

fn main() {
    match run() {
        Ok(code) => std::process::exit(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            std::process::exit(2);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn witness_json_roundtrip() {
        let w = Witness::Partition { n: 4, p: 2, blocks: vec![vec![1, 2], vec![3, 4]] };
        let j = serde_json::to_string(&w.to_json()).unwrap();
        let back = parse_witness(&j).unwrap();
        assert_eq!(back, w);
        let w2 = Witness::Injection { m: 2, n: 3, pairs: vec![(1, 1), (2, 3)] };
        let j2 = serde_json::to_string(&w2.to_json()).unwrap();
        assert_eq!(parse_witness(&j2).unwrap(), w2);
    }

    #[test]
    fn oddtown_witness_parses() {
        let w = nsbench_core::reduce::transform(
            nsbench_core::reduce::RuleId::OddtownFromInjection,
            &Witness::Injection { m: 2, n: 2, pairs: vec![(1, 1), (2, 2)] },
        )
        .unwrap();
        let j = serde_json::to_string(&w.to_json()).unwrap();
        assert_eq!(parse_witness(&j).unwrap(), w);
    }

    #[test]
    fn proof_json_parses_back() {
        let ring = RingSpec::Fp(2);
        let sys = system_neg_injphp(2, 1, ring).unwrap();
        let found = search_ns(&sys, &Polynomial::one(ring), &Polynomial::zero(ring), 1)
            .unwrap()
            .unwrap();
        let j = proof_to_json(&found);
        let back = parse_proof_json(&j).unwrap();
        let rep = verify_ns(&back).unwrap();
        assert!(rep.valid);
    }
}
