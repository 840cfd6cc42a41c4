//! Sparse multivariate polynomials over prime fields and modular rings,
//! the polynomial systems attached to the counting principles, proof
//! verification, and degree-bounded proof search by exact linear algebra.

use crate::partial::{PartialInjection, PartialPartition};
use serde_json::{json, Value};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum NsError {
    #[error("ring error: {0}")]
    Ring(String),
    #[error("variable-space mismatch: {0}")]
    VarSpace(String),
    #[error("search unsupported: {0}")]
    Unsupported(String),
    #[error("projection nonconclusive: {0}")]
    Nonconclusive(String),
    #[error("invalid proof: {0}")]
    InvalidProof(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Coefficient domain: a prime field F_p or the modular ring Z_d.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RingSpec {
    Fp(u64),
    Zd(u64),
}

impl RingSpec {
    pub fn field(p: u64) -> Result<RingSpec, NsError> {
        if is_prime(p) {
            Ok(RingSpec::Fp(p))
        } else {
            Err(NsError::Ring(format!("{p} is not prime")))
        }
    }

    pub fn modular(d: u64) -> Result<RingSpec, NsError> {
        if d >= 2 {
            Ok(RingSpec::Zd(d))
        } else {
            Err(NsError::Ring(format!("modulus {d} must be >= 2")))
        }
    }

    pub fn modulus(&self) -> u64 {
        match self {
            RingSpec::Fp(p) => *p,
            RingSpec::Zd(d) => *d,
        }
    }

    pub fn is_field(&self) -> bool {
        matches!(self, RingSpec::Fp(_))
    }
}

impl fmt::Display for RingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RingSpec::Fp(p) => write!(f, "ring F {p}"),
            RingSpec::Zd(d) => write!(f, "ring Z {d}"),
        }
    }
}

/// Polynomial indeterminates: `x[i,j]` and `u[j]` for the injection systems,
/// `x[{a,b,..}]` for block variables of the counting systems.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PolyVar {
    X { pigeon: u32, hole: u32 },
    U { hole: u32 },
    Block(Vec<u32>),
}

impl fmt::Display for PolyVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolyVar::X { pigeon, hole } => write!(f, "x[{pigeon},{hole}]"),
            PolyVar::U { hole } => write!(f, "u[{hole}]"),
            PolyVar::Block(b) => {
                write!(f, "x[{{")?;
                for (k, x) in b.iter().enumerate() {
                    if k > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, "}}]")
            }
        }
    }
}

/// A monomial: exponent map with no zero exponents.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Monomial(pub BTreeMap<PolyVar, u32>);

impl Monomial {
    pub fn one() -> Monomial {
        Monomial::default()
    }

    pub fn var(v: PolyVar) -> Monomial {
        let mut m = BTreeMap::new();
        m.insert(v, 1);
        Monomial(m)
    }

    pub fn degree(&self) -> usize {
        self.0.values().map(|&e| e as usize).sum()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut m = self.0.clone();
        for (v, e) in &other.0 {
            *m.entry(v.clone()).or_insert(0) += e;
        }
        Monomial(m)
    }

    pub fn is_multilinear(&self) -> bool {
        self.0.values().all(|&e| e == 1)
    }

    /// Divide by `v^k`; panics if not divisible (internal use).
    fn div_pow(&self, v: &PolyVar, k: u32) -> Monomial {
        let mut m = self.0.clone();
        let e = m.get_mut(v).expect("divisible");
        assert!(*e >= k);
        *e -= k;
        if *e == 0 {
            m.remove(v);
        }
        Monomial(m)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        let mut first = true;
        for (v, e) in &self.0 {
            if !first {
                write!(f, "*")?;
            }
            if *e == 1 {
                write!(f, "{v}")?;
            } else {
                write!(f, "{v}^{e}")?;
            }
            first = false;
        }
        Ok(())
    }
}

/// Degree with the convention deg 0 = -infinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Degree {
    NegInf,
    Fin(usize),
}

impl fmt::Display for Degree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Degree::NegInf => write!(f, "-inf"),
            Degree::Fin(d) => write!(f, "{d}"),
        }
    }
}

/// Sparse polynomial with exact modular coefficients in [1, modulus).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polynomial {
    pub ring: RingSpec,
    pub terms: BTreeMap<Monomial, u64>,
}

impl Polynomial {
    pub fn zero(ring: RingSpec) -> Polynomial {
        Polynomial { ring, terms: BTreeMap::new() }
    }

    pub fn constant(ring: RingSpec, c: i64) -> Polynomial {
        let mut p = Polynomial::zero(ring);
        p.add_term(&Monomial::one(), c);
        p
    }

    pub fn one(ring: RingSpec) -> Polynomial {
        Polynomial::constant(ring, 1)
    }

    pub fn var(ring: RingSpec, v: PolyVar) -> Polynomial {
        let mut p = Polynomial::zero(ring);
        p.add_term(&Monomial::var(v), 1);
        p
    }

    pub fn monomial(ring: RingSpec, m: Monomial) -> Polynomial {
        let mut p = Polynomial::zero(ring);
        p.add_term(&m, 1);
        p
    }

    fn norm(&self, c: i64) -> u64 {
        let m = self.ring.modulus() as i64;
        (((c % m) + m) % m) as u64
    }

    pub fn add_term(&mut self, mono: &Monomial, c: i64) {
        let c = self.norm(c);
        if c == 0 {
            return;
        }
        let m = self.ring.modulus();
        let entry = self.terms.entry(mono.clone()).or_insert(0);
        *entry = (*entry + c) % m;
        if *entry == 0 {
            self.terms.remove(mono);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> Degree {
        self.terms
            .keys()
            .map(|m| m.degree())
            .max()
            .map_or(Degree::NegInf, Degree::Fin)
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m, *c as i64);
        }
        out
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m, -(*c as i64));
        }
        out
    }

    pub fn neg(&self) -> Polynomial {
        Polynomial::zero(self.ring).sub(self)
    }

    pub fn scale(&self, c: i64) -> Polynomial {
        let mut out = Polynomial::zero(self.ring);
        for (m, a) in &self.terms {
            out.add_term(m, (*a as i64).wrapping_mul(self.norm(c) as i64));
        }
        out
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero(self.ring);
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                out.add_term(&m1.mul(m2), (*c1 as i64).wrapping_mul(*c2 as i64));
            }
        }
        out
    }

    pub fn mul_mono(&self, m: &Monomial) -> Polynomial {
        let mut out = Polynomial::zero(self.ring);
        for (m1, c1) in &self.terms {
            out.add_term(&m1.mul(m), *c1 as i64);
        }
        out
    }

    pub fn variables(&self) -> BTreeSet<PolyVar> {
        self.terms
            .keys()
            .flat_map(|m| m.0.keys().cloned())
            .collect()
    }

    /// Substitute a polynomial for one variable.
    pub fn subst_var(&self, v: &PolyVar, repl: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero(self.ring);
        for (m, c) in &self.terms {
            if let Some(&e) = m.0.get(v) {
                let rest = m.div_pow(v, e);
                let mut acc = Polynomial::monomial(self.ring, rest).scale(*c as i64);
                for _ in 0..e {
                    acc = acc.mul(repl);
                }
                out = out.add(&acc);
            } else {
                out.add_term(m, *c as i64);
            }
        }
        out
    }

    /// Evaluate at a 0/1-or-larger point.
    pub fn eval(&self, point: &BTreeMap<PolyVar, u64>) -> Result<u64, NsError> {
        let md = self.ring.modulus();
        let mut total: u64 = 0;
        for (m, c) in &self.terms {
            let mut val = *c % md;
            for (v, e) in &m.0 {
                let x = *point
                    .get(v)
                    .ok_or_else(|| NsError::VarSpace(format!("unvalued variable {v}")))?
                    % md;
                for _ in 0..*e {
                    val = (val * x) % md;
                }
            }
            total = (total + val) % md;
        }
        Ok(total)
    }

    /// Reinterpret the coefficients in a smaller modulus (ring projection).
    pub fn project(&self, ring: RingSpec) -> Polynomial {
        let mut out = Polynomial::zero(ring);
        for (m, c) in &self.terms {
            out.add_term(m, *c as i64);
        }
        out
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            if m.0.is_empty() {
                write!(f, "{c}")?;
            } else if *c == 1 {
                write!(f, "{m}")?;
            } else {
                write!(f, "{c}*{m}")?;
            }
            first = false;
        }
        Ok(())
    }
}

/// Parse the textual polynomial format, e.g. `2*x[1,2]*u[3] + 5*x[2,1] + 1`.
pub fn parse_poly(ring: RingSpec, s: &str) -> Result<Polynomial, NsError> {
    let mut out = Polynomial::zero(ring);
    // Split into signed terms at top level.
    let mut terms: Vec<(i64, String)> = Vec::new();
    let mut cur = String::new();
    let mut sign = 1i64;
    let mut depth = 0i32;
    for ch in s.chars() {
        match ch {
            '[' | '{' => {
                depth += 1;
                cur.push(ch);
            }
            ']' | '}' => {
                depth -= 1;
                cur.push(ch);
            }
            '+' | '-' if depth == 0 => {
                if !cur.trim().is_empty() {
                    terms.push((sign, cur.trim().to_string()));
                }
                sign = if ch == '+' { 1 } else { -1 };
                cur = String::new();
            }
            _ => cur.push(ch),
        }
    }
    if !cur.trim().is_empty() {
        terms.push((sign, cur.trim().to_string()));
    }
    for (sgn, t) in terms {
        if t == "0" {
            continue;
        }
        let mut coeff: i64 = sgn;
        let mut mono = Monomial::one();
        // Split factors at top-level '*'.
        let mut factors: Vec<String> = Vec::new();
        let mut cur = String::new();
        let mut depth = 0i32;
        for ch in t.chars() {
            match ch {
                '[' | '{' => {
                    depth += 1;
                    cur.push(ch);
                }
                ']' | '}' => {
                    depth -= 1;
                    cur.push(ch);
                }
                '*' if depth == 0 => {
                    factors.push(cur.trim().to_string());
                    cur = String::new();
                }
                _ => cur.push(ch),
            }
        }
        if !cur.trim().is_empty() {
            factors.push(cur.trim().to_string());
        }
        for fch in factors {
            if let Ok(n) = fch.parse::<i64>() {
                coeff *= n;
                continue;
            }
            let (base, exp) = match fch.split_once('^') {
                Some((b, e)) => (
                    b.to_string(),
                    e.parse::<u32>()
                        .map_err(|_| NsError::Parse(format!("bad exponent in {fch}")))?,
                ),
                None => (fch.clone(), 1),
            };
            let v = parse_poly_var(&base)?;
            for _ in 0..exp {
                mono = mono.mul(&Monomial::var(v.clone()));
            }
        }
        out.add_term(&mono, coeff);
    }
    Ok(out)
}

pub fn parse_poly_var(s: &str) -> Result<PolyVar, NsError> {
    let open = s.find('[').ok_or_else(|| NsError::Parse(format!("bad variable {s}")))?;
    let name = &s[..open];
    let idx = s[open + 1..]
        .strip_suffix(']')
        .ok_or_else(|| NsError::Parse(format!("bad variable {s}")))?;
    match name {
        "u" => Ok(PolyVar::U {
            hole: idx.parse().map_err(|_| NsError::Parse(format!("bad index {idx}")))?,
        }),
        "x" if idx.starts_with('{') => {
            let inner = idx
                .strip_prefix('{')
                .and_then(|t| t.strip_suffix('}'))
                .ok_or_else(|| NsError::Parse(format!("bad block {idx}")))?;
            let b: Result<Vec<u32>, _> = inner.split(',').map(|x| x.trim().parse::<u32>()).collect();
            Ok(PolyVar::Block(b.map_err(|_| NsError::Parse(format!("bad block {idx}")))?))
        }
        "x" => {
            let parts: Vec<&str> = idx.split(',').collect();
            if parts.len() != 2 {
                return Err(NsError::Parse(format!("bad x variable {s}")));
            }
            Ok(PolyVar::X {
                pigeon: parts[0].trim().parse().map_err(|_| NsError::Parse(s.into()))?,
                hole: parts[1].trim().parse().map_err(|_| NsError::Parse(s.into()))?,
            })
        }
        _ => Err(NsError::Parse(format!("unknown variable {s}"))),
    }
}

/// The declared shape of a polynomial system, used by the substitution and
/// projection operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    /// ¬inj*PHP^M_m with hole slack variables u_j.
    InjStar { pigeons: u32, holes: u32 },
    /// ¬injPHP^M_m.
    Inj { pigeons: u32, holes: u32 },
    /// ¬Count^p_M.
    Count { p: u32, m: u32 },
    Other,
}

/// A named list of polynomials over one ring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolySystem {
    pub ring: RingSpec,
    pub kind: SystemKind,
    pub rows: Vec<(String, Polynomial)>,
}

impl PolySystem {
    pub fn row(&self, name: &str) -> Option<&Polynomial> {
        self.rows.iter().find(|(n, _)| n == name).map(|(_, p)| p)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.ring);
        for (name, p) in &self.rows {
            out.push_str(&format!("{name}: {p}\n"));
        }
        out
    }

    pub fn variables(&self) -> BTreeSet<PolyVar> {
        self.rows.iter().flat_map(|(_, p)| p.variables()).collect()
    }
}

/// `¬inj*PHP^M_m`: boolean rows, same-pigeon products, same-hole products,
/// pigeon totality rows, and hole rows with the slack variables u_j.
pub fn system_neg_injstar(pigeons: u32, holes: u32, ring: RingSpec) -> Result<PolySystem, NsError> {
    if pigeons <= holes || holes < 1 {
        return Err(NsError::Ring(format!(
            "need pigeons > holes >= 1, got ({pigeons},{holes})"
        )));
    }
    let mut rows = base_inj_rows(pigeons, holes, ring);
    for j in 1..=holes {
        let mut p = Polynomial::constant(ring, -1);
        for i in 1..=pigeons {
            p.add_term(&Monomial::var(PolyVar::X { pigeon: i, hole: j }), 1);
        }
        p.add_term(&Monomial::var(PolyVar::U { hole: j }), 1);
        rows.push((format!("hole[{j}]"), p));
    }
    Ok(PolySystem { ring, kind: SystemKind::InjStar { pigeons, holes }, rows })
}

/// `¬injPHP^M_m`: as above without the hole rows and without u variables.
pub fn system_neg_injphp(pigeons: u32, holes: u32, ring: RingSpec) -> Result<PolySystem, NsError> {
    if pigeons <= holes || holes < 1 {
        return Err(NsError::Ring(format!(
            "need pigeons > holes >= 1, got ({pigeons},{holes})"
        )));
    }
    let rows = base_inj_rows(pigeons, holes, ring);
    Ok(PolySystem { ring, kind: SystemKind::Inj { pigeons, holes }, rows })
}

fn base_inj_rows(pigeons: u32, holes: u32, ring: RingSpec) -> Vec<(String, Polynomial)> {
    let x = |i: u32, j: u32| PolyVar::X { pigeon: i, hole: j };
    let mut rows = Vec::new();
    for i in 1..=pigeons {
        for j in 1..=holes {
            let mut p = Polynomial::zero(ring);
            p.add_term(&Monomial::var(x(i, j)).mul(&Monomial::var(x(i, j))), 1);
            p.add_term(&Monomial::var(x(i, j)), -1);
            rows.push((format!("bool[{i},{j}]"), p));
        }
    }
    // Same pigeon in two holes.
    for i in 1..=pigeons {
        for j in 1..=holes {
            for j2 in j + 1..=holes {
                let mut p = Polynomial::zero(ring);
                p.add_term(&Monomial::var(x(i, j)).mul(&Monomial::var(x(i, j2))), 1);
                rows.push((format!("func[{i};{j},{j2}]"), p));
            }
        }
    }
    // Two pigeons in one hole.
    for j in 1..=holes {
        for i in 1..=pigeons {
            for i2 in i + 1..=pigeons {
                let mut p = Polynomial::zero(ring);
                p.add_term(&Monomial::var(x(i, j)).mul(&Monomial::var(x(i2, j))), 1);
                rows.push((format!("inj[{j};{i},{i2}]"), p));
            }
        }
    }
    // Totality.
    for i in 1..=pigeons {
        let mut p = Polynomial::constant(ring, -1);
        for j in 1..=holes {
            p.add_term(&Monomial::var(x(i, j)), 1);
        }
        rows.push((format!("tot[{i}]"), p));
    }
    rows
}

/// `¬Count^p_M`: cover rows, overlap products, boolean rows over block
/// variables.
pub fn system_neg_count(p: u32, m: u32, ring: RingSpec) -> Result<PolySystem, NsError> {
    if p < 1 || m % p == 0 {
        return Err(NsError::Ring(format!("need p >= 1 and p not dividing M, got ({p},{m})")));
    }
    let blocks = crate::principles::p_subsets(m, p);
    let mut rows = Vec::new();
    for j in 1..=m {
        let mut poly = Polynomial::constant(ring, -1);
        for b in blocks.iter().filter(|b| b.contains(&j)) {
            poly.add_term(&Monomial::var(PolyVar::Block(b.clone())), 1);
        }
        rows.push((format!("cover[{j}]"), poly));
    }
    for (ai, a) in blocks.iter().enumerate() {
        for b in blocks.iter().skip(ai + 1) {
            if crate::principles::blocks_conflict(a, b) {
                let mut poly = Polynomial::zero(ring);
                poly.add_term(
                    &Monomial::var(PolyVar::Block(a.clone())).mul(&Monomial::var(PolyVar::Block(b.clone()))),
                    1,
                );
                rows.push((format!("overlap[{:?};{:?}]", a, b), poly));
            }
        }
    }
    for b in &blocks {
        let mut poly = Polynomial::zero(ring);
        let v = Monomial::var(PolyVar::Block(b.clone()));
        poly.add_term(&v.mul(&v), 1);
        poly.add_term(&v, -1);
        rows.push((format!("bool[{:?}]", b), poly));
    }
    Ok(PolySystem { ring, kind: SystemKind::Count { p, m }, rows })
}

/// The branch monomial x_ρ: product of x over pairs and u over singletons.
pub fn monomial_of(rho: &PartialInjection) -> Monomial {
    let mut m = Monomial::one();
    for &(i, j) in rho.pairs() {
        m = m.mul(&Monomial::var(PolyVar::X { pigeon: i, hole: j }));
    }
    for &j in rho.singles() {
        m = m.mul(&Monomial::var(PolyVar::U { hole: j }));
    }
    m
}

/// Block monomial of a partial partition.
pub fn monomial_of_partition(sigma: &PartialPartition) -> Monomial {
    let mut m = Monomial::one();
    for b in sigma.blocks() {
        m = m.mul(&Monomial::var(PolyVar::Block(b.clone())));
    }
    m
}

/// An NS proof object: coefficients h_f by row name, with the claimed
/// identity g1 - g2 = Σ h_f · f.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NSProof {
    pub system: PolySystem,
    pub coeffs: BTreeMap<String, Polynomial>,
    pub g1: Polynomial,
    pub g2: Polynomial,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyReport {
    pub valid: bool,
    pub degree: Degree,
}

/// Exact check of the defining identity; the degree is max over deg h_f.
pub fn verify_ns(proof: &NSProof) -> Result<VerifyReport, NsError> {
    let ring = proof.system.ring;
    if proof.g1.ring != ring || proof.g2.ring != ring {
        return Err(NsError::VarSpace("g1/g2 ring differs from the system ring".into()));
    }
    let mut sum = Polynomial::zero(ring);
    let mut degree = Degree::NegInf;
    for (name, h) in &proof.coeffs {
        let f = proof
            .system
            .row(name)
            .ok_or_else(|| NsError::InvalidProof(format!("unknown row {name}")))?;
        if h.ring != ring {
            return Err(NsError::VarSpace(format!("coefficient ring mismatch at {name}")));
        }
        sum = sum.add(&h.mul(f));
        degree = degree.max(h.degree());
    }
    let lhs = proof.g1.sub(&proof.g2);
    Ok(VerifyReport { valid: sum == lhs, degree })
}

/// Apply u_j := 1 - Σ_i x_{ij} to an inj*-system proof; the hole rows become
/// identically zero and the result is a proof from the u-free system.
pub fn substitute_u(proof: &NSProof) -> Result<NSProof, NsError> {
    let (pigeons, holes) = match proof.system.kind {
        SystemKind::InjStar { pigeons, holes } => (pigeons, holes),
        _ => {
            return Err(NsError::Unsupported(
                "substitute_u expects a proof over the inj* system".into(),
            ))
        }
    };
    let rep = verify_ns(proof)?;
    if !rep.valid {
        return Err(NsError::InvalidProof("input proof does not verify".into()));
    }
    let ring = proof.system.ring;
    let repl = |j: u32| -> Polynomial {
        let mut p = Polynomial::one(ring);
        for i in 1..=pigeons {
            p.add_term(&Monomial::var(PolyVar::X { pigeon: i, hole: j }), -1);
        }
        p
    };
    let subst = |poly: &Polynomial| -> Polynomial {
        let mut out = poly.clone();
        for j in 1..=holes {
            out = out.subst_var(&PolyVar::U { hole: j }, &repl(j));
        }
        out
    };
    let target = system_neg_injphp(pigeons, holes, ring)?;
    let mut coeffs = BTreeMap::new();
    for (name, h) in &proof.coeffs {
        if name.starts_with("hole[") {
            // The substituted row vanishes identically; drop its coefficient.
            continue;
        }
        let h2 = subst(h);
        if !h2.is_zero() {
            coeffs.insert(name.clone(), h2);
        }
    }
    let out = NSProof {
        system: target,
        coeffs,
        g1: subst(&proof.g1),
        g2: subst(&proof.g2),
    };
    let rep2 = verify_ns(&out)?;
    if !rep2.valid {
        return Err(NsError::InvalidProof("substituted proof fails to verify".into()));
    }
    Ok(out)
}

/// Project a Z_d proof to the maximal prime-power component q of d. The
/// refuted constant must stay nonzero mod q, otherwise the projection is
/// reported nonconclusive.
pub fn project_mod(proof: &NSProof, q: u64) -> Result<NSProof, NsError> {
    let d = proof.system.ring.modulus();
    if q < 2 || d % q != 0 {
        return Err(NsError::Ring(format!("{q} does not divide {d}")));
    }
    // q must be a maximal prime-power divisor.
    let mut base = 0u64;
    for p in 2..=q {
        if is_prime(p) && q % p == 0 {
            base = p;
            break;
        }
    }
    let mut pw = base;
    while pw < q {
        pw *= base;
    }
    if pw != q {
        return Err(NsError::Ring(format!("{q} is not a prime power")));
    }
    if (d / q) % base == 0 {
        return Err(NsError::Ring(format!("{q} is not a maximal prime-power divisor of {d}")));
    }
    let ring = if q == base {
        RingSpec::Fp(q)
    } else {
        RingSpec::Zd(q)
    };
    let constant = proof.g1.sub(&proof.g2);
    if constant.degree() == Degree::Fin(0) || constant.degree() == Degree::NegInf {
        let c = constant
            .terms
            .get(&Monomial::one())
            .copied()
            .unwrap_or(0);
        if c % q == 0 && !constant.is_zero() {
            return Err(NsError::Nonconclusive(format!(
                "refuted constant {c} vanishes mod {q}"
            )));
        }
    }
    let system = PolySystem {
        ring,
        kind: proof.system.kind,
        rows: proof
            .system
            .rows
            .iter()
            .map(|(n, p)| (n.clone(), p.project(ring)))
            .collect(),
    };
    let out = NSProof {
        system,
        coeffs: proof
            .coeffs
            .iter()
            .map(|(n, p)| (n.clone(), p.project(ring)))
            .filter(|(_, p)| !p.is_zero())
            .collect(),
        g1: proof.g1.project(ring),
        g2: proof.g2.project(ring),
    };
    let rep = verify_ns(&out)?;
    if !rep.valid {
        return Err(NsError::InvalidProof("projected proof fails to verify".into()));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Degree-bounded search by exact linear algebra over a prime field
// ---------------------------------------------------------------------------

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % m;
        }
        b = b * b % m;
        e >>= 1;
    }
    acc
}

fn inv_mod(a: u64, p: u64) -> u64 {
    pow_mod(a, p - 2, p)
}

/// Multilinear reduction of a monomial against the boolean rows:
/// returns the multilinear residue plus (boolean variable, cofactor) pairs
/// with `mono = residue + Σ cofactor · (v² − v)`.
fn reduce_multilinear(mono: &Monomial) -> (Monomial, Vec<(PolyVar, Monomial)>) {
    let mut m = mono.clone();
    let mut corrections = Vec::new();
    loop {
        let over: Option<PolyVar> = m
            .0
            .iter()
            .find(|(_, &e)| e >= 2)
            .map(|(v, _)| v.clone());
        match over {
            None => return (m, corrections),
            Some(v) => {
                corrections.push((v.clone(), m.div_pow(&v, 2)));
                m = m.div_pow(&v, 1);
            }
        }
    }
}

fn multilinear_monomials(vars: &[PolyVar], max_deg: usize) -> Vec<Monomial> {
    let mut out = vec![Monomial::one()];
    let mut layer: Vec<(usize, Monomial)> = vec![(0, Monomial::one())];
    for _ in 0..max_deg {
        let mut next = Vec::new();
        for (start, m) in &layer {
            for (vi, v) in vars.iter().enumerate().skip(*start) {
                let m2 = m.mul(&Monomial::var(v.clone()));
                out.push(m2.clone());
                next.push((vi + 1, m2));
            }
        }
        layer = next;
        if layer.is_empty() {
            break;
        }
    }
    out
}

fn all_monomials(vars: &[PolyVar], max_deg: usize) -> Vec<Monomial> {
    let mut out = vec![Monomial::one()];
    let mut layer: Vec<(usize, Monomial)> = vec![(0, Monomial::one())];
    for _ in 0..max_deg {
        let mut next = Vec::new();
        for (start, m) in &layer {
            for (vi, v) in vars.iter().enumerate().skip(*start) {
                let m2 = m.mul(&Monomial::var(v.clone()));
                out.push(m2.clone());
                next.push((vi, m2));
            }
        }
        layer = next;
    }
    out.sort();
    out.dedup();
    out
}

struct BasisRow {
    pivot: usize,
    vec: Vec<u64>,
    source: usize,
}

fn reduce_vec(v: &mut [u64], basis: &[BasisRow], p: u64) {
    for row in basis {
        let c = v[row.pivot];
        if c != 0 {
            for (a, b) in v.iter_mut().zip(row.vec.iter()) {
                *a = (*a + (p - c) * b) % p;
            }
        }
    }
}

/// Search for an NS proof of g1 = g2 from the system with coefficient degree
/// bounded by `dmax`. Over a prime field the reduction to linear algebra is
/// exact, so `None` means no proof of that degree exists.
pub fn search_ns(
    system: &PolySystem,
    g1: &Polynomial,
    g2: &Polynomial,
    dmax: usize,
) -> Result<Option<NSProof>, NsError> {
    let ring = system.ring;
    let p = match ring {
        RingSpec::Fp(p) => p,
        RingSpec::Zd(_) => {
            return Err(NsError::Unsupported(
                "search over Z_d is not supported; use verification and projection".into(),
            ))
        }
    };
    let vars: Vec<PolyVar> = {
        let mut s = system.variables();
        s.extend(g1.variables());
        s.extend(g2.variables());
        s.into_iter().collect()
    };
    // Boolean-row detection: a row of the shape v^2 - v.
    let mut bool_row_of: BTreeMap<PolyVar, String> = BTreeMap::new();
    for (name, poly) in &system.rows {
        if poly.terms.len() == 2 {
            let mut sq = None;
            let mut lin = None;
            for (m, c) in &poly.terms {
                if m.0.len() == 1 {
                    let (v, e) = m.0.iter().next().unwrap();
                    if *e == 2 && *c == 1 {
                        sq = Some(v.clone());
                    }
                    if *e == 1 && *c == p - 1 {
                        lin = Some(v.clone());
                    }
                }
            }
            if let (Some(a), Some(b)) = (sq, lin) {
                if a == b {
                    bool_row_of.insert(a, name.clone());
                }
            }
        }
    }
    let max_row_deg = system
        .rows
        .iter()
        .map(|(_, f)| match f.degree() {
            Degree::Fin(d) => d,
            Degree::NegInf => 0,
        })
        .max()
        .unwrap_or(0);
    let multilinear_mode =
        max_row_deg <= 2 && vars.iter().all(|v| bool_row_of.contains_key(v));

    let candidate_rows: Vec<(String, Polynomial)> = if multilinear_mode {
        system
            .rows
            .iter()
            .filter(|(n, _)| !bool_row_of.values().any(|bn| bn == n))
            .cloned()
            .collect()
    } else {
        system.rows.clone()
    };
    let monos: Vec<Monomial> = if multilinear_mode {
        multilinear_monomials(&vars, dmax)
    } else {
        all_monomials(&vars, dmax)
    };
    let eq_monos: Vec<Monomial> = if multilinear_mode {
        multilinear_monomials(&vars, dmax + max_row_deg.min(2))
    } else {
        all_monomials(&vars, dmax + max_row_deg)
    };
    if !multilinear_mode && candidate_rows.len() * monos.len() > 400_000 {
        return Err(NsError::Unsupported(format!(
            "full-monomial search too large: {} unknowns",
            candidate_rows.len() * monos.len()
        )));
    }
    let eq_index: BTreeMap<Monomial, usize> = eq_monos
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, m)| (m, i))
        .collect();
    let dim = eq_monos.len();

    // Reduced right-hand side with boolean corrections (subtracted later).
    let rhs_poly = g1.sub(g2);
    let mut b_vec = vec![0u64; dim];
    let mut rhs_corrections: Vec<(PolyVar, Monomial, u64)> = Vec::new();
    for (m, c) in &rhs_poly.terms {
        if multilinear_mode {
            let (ml, corr) = reduce_multilinear(m);
            b_vec[*eq_index.get(&ml).ok_or_else(|| {
                NsError::Unsupported("right-hand side degree exceeds the search space".into())
            })?] = (b_vec[eq_index[&ml]] + c) % p;
            for (v, cof) in corr {
                rhs_corrections.push((v, cof, *c));
            }
        } else {
            let idx = eq_index.get(m).ok_or_else(|| {
                NsError::Unsupported("right-hand side degree exceeds the search space".into())
            })?;
            b_vec[*idx] = (b_vec[*idx] + c) % p;
        }
    }

    // Column of one unknown (row, mono): the reduced vector of mono * row,
    // plus boolean corrections contributing to assembled boolean coefficients.
    let column = |f: &Polynomial, mono: &Monomial| -> (Vec<(usize, u64)>, Vec<(PolyVar, Monomial, u64)>) {
        let mut dense: BTreeMap<usize, u64> = BTreeMap::new();
        let mut corrections = Vec::new();
        for (mf, cf) in &f.terms {
            let prod = mono.mul(mf);
            if multilinear_mode {
                let (ml, corr) = reduce_multilinear(&prod);
                if let Some(&idx) = eq_index.get(&ml) {
                    let e = dense.entry(idx).or_insert(0);
                    *e = (*e + cf) % p;
                } else {
                    unreachable!("reduced monomial within bounds");
                }
                for (v, cof) in corr {
                    corrections.push((v, cof, *cf));
                }
            } else if let Some(&idx) = eq_index.get(&prod) {
                let e = dense.entry(idx).or_insert(0);
                *e = (*e + cf) % p;
            } else {
                unreachable!("product monomial within bounds");
            }
        }
        (
            dense.into_iter().filter(|(_, c)| *c != 0).collect(),
            corrections,
        )
    };

    // Incremental basis over the equation space; stop once b is in the span.
    let mut basis: Vec<BasisRow> = Vec::new();
    let mut b_red = b_vec.clone();
    reduce_vec(&mut b_red, &basis, p);
    let unknown_count = candidate_rows.len() * monos.len();
    let mut solved = b_red.iter().all(|&c| c == 0);
    let mut ucol = 0usize;
    while !solved && ucol < unknown_count {
        let (ri, mi) = (ucol / monos.len(), ucol % monos.len());
        let (sparse, _) = column(&candidate_rows[ri].1, &monos[mi]);
        if !sparse.is_empty() {
            let mut v = vec![0u64; dim];
            for (i, c) in sparse {
                v[i] = c;
            }
            reduce_vec(&mut v, &basis, p);
            if let Some(pivot) = v.iter().position(|&c| c != 0) {
                let inv = inv_mod(v[pivot], p);
                for c in v.iter_mut() {
                    *c = *c * inv % p;
                }
                // Reduce b by the new row.
                let c = b_red[pivot];
                if c != 0 {
                    for (a, bb) in b_red.iter_mut().zip(v.iter()) {
                        *a = (*a + (p - c) * bb) % p;
                    }
                    solved = b_red.iter().all(|&x| x == 0);
                }
                basis.push(BasisRow { pivot, vec: v, source: ucol });
                basis.sort_by_key(|r| r.pivot);
            }
        }
        ucol += 1;
    }
    if !solved {
        return Ok(None);
    }

    // Solve exactly on the pivot columns.
    let pivot_cols: Vec<usize> = basis.iter().map(|r| r.source).collect();
    let ncols = pivot_cols.len();
    let mut mat: Vec<Vec<u64>> = vec![vec![0u64; ncols + 1]; dim];
    let mut all_corrections: Vec<Vec<(PolyVar, Monomial, u64)>> = Vec::new();
    for (k, &src) in pivot_cols.iter().enumerate() {
        let (ri, mi) = (src / monos.len(), src % monos.len());
        let (sparse, corr) = column(&candidate_rows[ri].1, &monos[mi]);
        for (i, c) in sparse {
            mat[i][k] = c;
        }
        all_corrections.push(corr);
    }
    for i in 0..dim {
        mat[i][ncols] = b_vec[i];
    }
    // Gaussian elimination.
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut row = 0usize;
    for col in 0..ncols {
        if row >= dim {
            break;
        }
        let pr = (row..dim).find(|&r| mat[r][col] != 0);
        let Some(pr) = pr else { continue };
        mat.swap(row, pr);
        let inv = inv_mod(mat[row][col], p);
        for c in col..=ncols {
            mat[row][c] = mat[row][c] * inv % p;
        }
        for r in 0..dim {
            if r != row && mat[r][col] != 0 {
                let f = mat[r][col];
                for c in col..=ncols {
                    mat[r][c] = (mat[r][c] + (p - f) * mat[row][c]) % p;
                }
            }
        }
        pivots.push((row, col));
        row += 1;
    }
    for r in row..dim {
        if mat[r][ncols] != 0 {
            return Err(NsError::InvalidProof(
                "internal: pivot-column system inconsistent".into(),
            ));
        }
    }
    let mut z = vec![0u64; ncols];
    for &(r, c) in &pivots {
        z[c] = mat[r][ncols];
    }

    // Assemble coefficients.
    let mut coeffs: BTreeMap<String, Polynomial> = BTreeMap::new();
    for (k, &src) in pivot_cols.iter().enumerate() {
        if z[k] == 0 {
            continue;
        }
        let (ri, mi) = (src / monos.len(), src % monos.len());
        let name = candidate_rows[ri].0.clone();
        let entry = coeffs
            .entry(name)
            .or_insert_with(|| Polynomial::zero(ring));
        entry.add_term(&monos[mi], z[k] as i64);
        // Boolean-row corrections from the multilinear reduction.
        for (v, cof, cf) in &all_corrections[k] {
            let bname = bool_row_of
                .get(v)
                .expect("multilinear mode guarantees boolean rows")
                .clone();
            let bentry = coeffs
                .entry(bname)
                .or_insert_with(|| Polynomial::zero(ring));
            bentry.add_term(cof, (z[k] as i64).wrapping_mul(*cf as i64));
        }
    }
    // Right-hand-side corrections move to the other side of the identity.
    for (v, cof, c) in &rhs_corrections {
        let bname = bool_row_of
            .get(v)
            .ok_or_else(|| NsError::Unsupported("rhs needs boolean rows".into()))?
            .clone();
        let bentry = coeffs
            .entry(bname)
            .or_insert_with(|| Polynomial::zero(ring));
        bentry.add_term(cof, -(*c as i64));
    }
    coeffs.retain(|_, h| !h.is_zero());

    let proof = NSProof {
        system: system.clone(),
        coeffs,
        g1: g1.clone(),
        g2: g2.clone(),
    };
    let rep = verify_ns(&proof)?;
    if !rep.valid {
        return Err(NsError::InvalidProof("internal: assembled proof fails to verify".into()));
    }
    Ok(Some(proof))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinDegree {
    Found(usize),
    Unknown,
}

/// Least d <= dcap admitting a refutation (a proof of 1 = 0).
pub fn min_degree(system: &PolySystem, dcap: usize) -> Result<MinDegree, NsError> {
    let one = Polynomial::one(system.ring);
    let zero = Polynomial::zero(system.ring);
    for d in 0..=dcap {
        if search_ns(system, &one, &zero, d)?.is_some() {
            return Ok(MinDegree::Found(d));
        }
    }
    Ok(MinDegree::Unknown)
}

pub fn proof_to_json(proof: &NSProof) -> Value {
    json!({
        "ring": proof.system.ring.to_string(),
        "system": proof.system.rows.iter().map(|(n, p)| json!({"name": n, "poly": p.to_string()})).collect::<Vec<_>>(),
        "coeffs": proof.coeffs.iter().map(|(n, p)| (n.clone(), Value::String(p.to_string()))).collect::<serde_json::Map<_,_>>(),
        "g1": proof.g1.to_string(),
        "g2": proof.g2.to_string(),
    })
}
