//! Sparse polynomial arithmetic in a closed family of ring shapes over `Z/p`:
//!
//! * free polynomial rings `F_p[x_1, ..., x_n]`;
//! * radical extensions `B[t]/(t^p - c)` with `c` free of `t`;
//! * crossings `F_p[x, y, ...]/(xy)`;
//! * truncations modulo all monomials of base degree `>= N`;
//! * localizations at the powers of one element `s`.
//!
//! Elements are kept in a canonical normal form, so equality of elements is
//! structural equality. Truncation counts the degree of every variable except
//! the radical one; the radical variable's exponent is instead bounded by `p`.
//! Reducing `t^p -> c` can only move a monomial deeper into the truncation
//! ideal, which keeps the normal form well defined.
//!
//! When a truncated ring is localized, `s` must have a nonzero constant term
//! and is inverted outright by a geometric series, so denominators never
//! appear. Otherwise an element is a pair `(numerator, k)` meaning
//! `numerator / s^k`, with every common factor of `s` cancelled.

use crate::modp::{ModpError, PrimeChar};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;
use thiserror::Error;

/// Maximum number of ring variables.
pub const MAX_VARS: usize = 6;
/// Largest exponent the parser accepts on any single variable.
pub const MAX_EXPONENT: u64 = 1 << 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RingError {
    #[error(transparent)]
    Prime(#[from] ModpError),
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown variable `{name}` at position {pos}")]
    UnknownVariable { name: String, pos: usize },
    #[error("exponent overflow at position {pos}")]
    ExponentOverflow { pos: usize },
    #[error("element is not invertible: {0}")]
    NotInvertible(String),
    #[error("invalid ring specification: {0}")]
    InvalidSpec(String),
    #[error("degree bound {d} must be below the truncation order {n}")]
    DegreeBound { d: u32, n: u32 },
    #[error("operation unsupported in this ring: {0}")]
    Unsupported(String),
}

/// An exponent vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Monomial([u32; MAX_VARS]);

impl Monomial {
    pub const ONE: Monomial = Monomial([0; MAX_VARS]);

    pub fn var(i: usize) -> Self {
        Self::var_pow(i, 1)
    }

    pub fn var_pow(i: usize, e: u32) -> Self {
        let mut m = [0; MAX_VARS];
        m[i] = e;
        Monomial(m)
    }

    pub fn from_exponents(exps: &[u32]) -> Self {
        let mut m = [0; MAX_VARS];
        m[..exps.len()].copy_from_slice(exps);
        Monomial(m)
    }

    pub fn exp(&self, i: usize) -> u32 {
        self.0[i]
    }

    pub fn exponents(&self) -> &[u32; MAX_VARS] {
        &self.0
    }

    pub fn is_one(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut m = self.0;
        for (a, &b) in m.iter_mut().zip(&other.0) {
            *a = a
                .checked_add(b)
                .expect("exponent overflow in monomial product");
        }
        Monomial(m)
    }

    pub fn divides(&self, other: &Monomial) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// `other / self`, assuming divisibility.
    pub fn div_into(&self, other: &Monomial) -> Monomial {
        let mut m = other.0;
        for (a, &b) in m.iter_mut().zip(&self.0) {
            *a -= b;
        }
        Monomial(m)
    }

    pub fn with_exp(mut self, i: usize, e: u32) -> Monomial {
        self.0[i] = e;
        self
    }
}

pub type Terms = BTreeMap<Monomial, u32>;

#[derive(Debug, Clone, PartialEq, Eq)]
struct Radical {
    var: usize,
    /// The radicand is `num / s^denom`.
    num: Terms,
    denom: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Localization {
    s: Terms,
    /// Present for truncated rings, where `s` is a unit.
    s_inv: Option<Terms>,
    /// `Some(v)` when `s` is the bare variable `v`.
    single_var: Option<usize>,
}

#[derive(Debug, PartialEq, Eq)]
struct SpecData {
    pc: PrimeChar,
    vars: Vec<String>,
    radical: Option<Radical>,
    crossing: Option<(usize, usize)>,
    truncate: Option<u32>,
    localization: Option<Localization>,
}

/// A ring in the supported family. Cheap to clone; all clones share one
/// immutable description.
#[derive(Debug, Clone)]
pub struct RingSpec(Arc<SpecData>);

impl PartialEq for RingSpec {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

impl Eq for RingSpec {}

/// Collects the shape of a ring before validation.
#[derive(Debug, Clone)]
pub struct RingBuilder {
    p: u32,
    vars: Vec<String>,
    radical: Option<(String, String)>,
    crossing: Option<(String, String)>,
    truncate: Option<u32>,
    localize: Option<String>,
}

impl RingBuilder {
    pub fn radical(mut self, var: &str, radicand: &str) -> Self {
        self.radical = Some((var.to_string(), radicand.to_string()));
        self
    }

    pub fn crossing(mut self, a: &str, b: &str) -> Self {
        self.crossing = Some((a.to_string(), b.to_string()));
        self
    }

    pub fn truncate(mut self, n: u32) -> Self {
        self.truncate = Some(n);
        self
    }

    pub fn maybe_truncate(mut self, n: Option<u32>) -> Self {
        self.truncate = n;
        self
    }

    pub fn localize(mut self, s: &str) -> Self {
        self.localize = Some(s.to_string());
        self
    }

    pub fn build(self) -> Result<RingSpec, RingError> {
        let pc = PrimeChar::new(self.p)?;
        let p = pc.p();
        if self.vars.is_empty() || self.vars.len() > MAX_VARS {
            return Err(RingError::InvalidSpec(format!(
                "between 1 and {MAX_VARS} variables required, got {}",
                self.vars.len()
            )));
        }
        for (i, v) in self.vars.iter().enumerate() {
            let mut chars = v.chars();
            let ok = chars
                .next()
                .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                && chars.all(|c| c.is_ascii_alphanumeric() || c == '_');
            if !ok {
                return Err(RingError::InvalidSpec(format!(
                    "invalid variable name `{v}`"
                )));
            }
            if self.vars[..i].contains(v) {
                return Err(RingError::InvalidSpec(format!("duplicate variable `{v}`")));
            }
        }
        let index = |name: &str| {
            self.vars.iter().position(|v| v == name).ok_or_else(|| {
                RingError::InvalidSpec(format!("`{name}` is not a declared variable"))
            })
        };
        if let Some(n) = self.truncate {
            if n < p + 1 {
                return Err(RingError::InvalidSpec(format!(
                    "truncation order {n} must be at least p+1 = {}",
                    p + 1
                )));
            }
        }
        let crossing = match &self.crossing {
            Some((a, b)) => {
                let (i, j) = (index(a)?, index(b)?);
                if i == j {
                    return Err(RingError::InvalidSpec(
                        "crossing needs two distinct variables".into(),
                    ));
                }
                Some((i, j))
            }
            None => None,
        };
        if crossing.is_some() && self.radical.is_some() {
            return Err(RingError::Unsupported(
                "radical extension of a crossing".into(),
            ));
        }
        if crossing.is_some() && self.localize.is_some() {
            return Err(RingError::Unsupported("localization of a crossing".into()));
        }
        let radical_var = self.radical.as_ref().map(|(v, _)| index(v)).transpose()?;

        let mut data = SpecData {
            pc,
            vars: self.vars.clone(),
            radical: None,
            crossing,
            truncate: self.truncate,
            localization: None,
        };

        if let Some(src) = &self.localize {
            let base = RingSpec(Arc::new(SpecData {
                localization: None,
                ..data.clone_shape()
            }));
            let s = base.parse(src)?;
            if s.is_zero() {
                return Err(RingError::InvalidSpec("cannot localize at zero".into()));
            }
            if let Some(t) = radical_var {
                if s.terms.keys().any(|m| m.exp(t) > 0) {
                    return Err(RingError::InvalidSpec(
                        "localization denominator involves the radical variable".into(),
                    ));
                }
            }
            let s_inv = if self.truncate.is_some() {
                let inv = s.invert_unit().map_err(|_| {
                    RingError::InvalidSpec(
                        "in a truncated ring the denominator needs a nonzero constant term".into(),
                    )
                })?;
                Some(inv.terms)
            } else {
                None
            };
            let single_var = match s.terms.iter().next() {
                Some((m, &1)) if s.terms.len() == 1 && m.0.iter().sum::<u32>() == 1 => {
                    m.0.iter().position(|&e| e == 1)
                }
                _ => None,
            };
            data.localization = Some(Localization {
                s: s.terms,
                s_inv,
                single_var,
            });
        }

        if let (Some((_, src)), Some(t)) = (&self.radical, radical_var) {
            let base = RingSpec(Arc::new(data.clone_shape()));
            let c = base.parse(src)?;
            if c.terms.keys().any(|m| m.exp(t) > 0) {
                return Err(RingError::InvalidSpec(
                    "radicand must not involve the radical variable".into(),
                ));
            }
            data.radical = Some(Radical {
                var: t,
                num: c.terms,
                denom: c.denom,
            });
        }
        Ok(RingSpec(Arc::new(data)))
    }
}

impl SpecData {
    fn clone_shape(&self) -> SpecData {
        SpecData {
            pc: self.pc.clone(),
            vars: self.vars.clone(),
            radical: self.radical.clone(),
            crossing: self.crossing,
            truncate: self.truncate,
            localization: self.localization.clone(),
        }
    }

    fn nvars(&self) -> usize {
        self.vars.len()
    }

    fn base_degree(&self, m: &Monomial) -> u32 {
        let t = self.radical.as_ref().map(|r| r.var);
        (0..self.nvars())
            .filter(|&i| Some(i) != t)
            .map(|i| m.0[i])
            .sum()
    }

    fn survives(&self, m: &Monomial) -> bool {
        if let Some((a, b)) = self.crossing {
            if m.0[a] > 0 && m.0[b] > 0 {
                return false;
            }
        }
        if let Some(n) = self.truncate {
            if self.base_degree(m) >= n {
                return false;
            }
        }
        true
    }

    fn add_term(&self, terms: &mut Terms, m: Monomial, c: u32) {
        if c == 0 {
            return;
        }
        let pc = &self.pc;
        match terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let v = pc.add(*e.get(), c);
                if v == 0 {
                    e.remove();
                } else {
                    *e.get_mut() = v;
                }
            }
        }
    }

    /// Product of raw term maps, dropping monomials in the crossing and
    /// truncation ideals. No radical reduction.
    fn mul_raw(&self, a: &Terms, b: &Terms) -> Terms {
        let mut out = Terms::new();
        for (ma, &ca) in a {
            for (mb, &cb) in b {
                let m = ma.mul(mb);
                if self.survives(&m) {
                    self.add_term(&mut out, m, self.pc.mul(ca, cb));
                }
            }
        }
        out
    }

    fn add_raw(&self, a: &Terms, b: &Terms) -> Terms {
        let mut out = a.clone();
        for (m, &c) in b {
            self.add_term(&mut out, *m, c);
        }
        out
    }

    fn scale_raw(&self, a: &Terms, c: u32) -> Terms {
        if c == 0 {
            return Terms::new();
        }
        a.iter().map(|(m, &v)| (*m, self.pc.mul(v, c))).collect()
    }

    fn one_terms(&self) -> Terms {
        Terms::from([(Monomial::ONE, 1)])
    }

    fn pow_raw(&self, a: &Terms, e: u32) -> Terms {
        (0..e).fold(self.one_terms(), |acc, _| self.mul_raw(&acc, a))
    }

    /// `a * s^k` on raw numerators.
    fn shift_by_s(&self, a: &Terms, k: u32) -> Terms {
        if k == 0 {
            return a.clone();
        }
        let loc = self.localization.as_ref().expect("localized ring");
        match loc.single_var {
            Some(v) => a
                .iter()
                .map(|(m, &c)| (m.mul(&Monomial::var_pow(v, k)), c))
                .collect(),
            None => self.mul_raw(a, &self.pow_raw(&loc.s, k)),
        }
    }

    fn normalize(&self, mut terms: Terms, mut denom: u32) -> (Terms, u32) {
        terms.retain(|m, c| *c != 0 && self.survives(m));
        if let Some(rad) = &self.radical {
            let p = self.pc.p();
            if terms.keys().any(|m| m.0[rad.var] >= p) {
                let q_max = terms.keys().map(|m| m.0[rad.var] / p).max().unwrap_or(0);
                let mut powers = vec![self.one_terms()];
                for _ in 0..q_max {
                    let next = self.mul_raw(powers.last().expect("nonempty"), &rad.num);
                    powers.push(next);
                }
                let mut out = Terms::new();
                for (m, c) in terms {
                    let e = m.0[rad.var];
                    let (q, r) = (e / p, e % p);
                    let head = Terms::from([(m.with_exp(rad.var, r), c)]);
                    let mut piece = self.mul_raw(&head, &powers[q as usize]);
                    if rad.denom > 0 {
                        piece = self.shift_by_s(&piece, (q_max - q) * rad.denom);
                    }
                    for (m2, c2) in piece {
                        self.add_term(&mut out, m2, c2);
                    }
                }
                terms = out;
                denom += q_max * rad.denom;
            }
        }
        if let Some(loc) = &self.localization {
            if loc.s_inv.is_none() {
                if terms.is_empty() {
                    denom = 0;
                }
                match loc.single_var {
                    Some(v) => {
                        let shift = terms.keys().map(|m| m.0[v]).min().unwrap_or(0).min(denom);
                        if shift > 0 {
                            terms = terms
                                .into_iter()
                                .map(|(m, c)| (m.with_exp(v, m.0[v] - shift), c))
                                .collect();
                            denom -= shift;
                        }
                    }
                    None => {
                        while denom > 0 {
                            match div_exact_terms(&self.pc, &terms, &loc.s) {
                                Some(q) => {
                                    terms = q;
                                    denom -= 1;
                                }
                                None => break,
                            }
                        }
                    }
                }
            }
        }
        if terms.is_empty() {
            denom = 0;
        }
        (terms, denom)
    }
}

/// Exact division `a / d` in the free polynomial ring, by lex-leading-term
/// reduction. A single divisor is a Gröbner basis of its ideal, so a nonzero
/// remainder means `d` does not divide `a`.
fn div_exact_terms(pc: &PrimeChar, a: &Terms, d: &Terms) -> Option<Terms> {
    let (lead_m, &lead_c) = d.iter().next_back()?;
    let lead_inv = pc.inv(lead_c);
    let mut rem = a.clone();
    let mut quot = Terms::new();
    while let Some((&m, &c)) = rem.iter().next_back() {
        if !lead_m.divides(&m) {
            return None;
        }
        let qm = lead_m.div_into(&m);
        let qc = pc.mul(c, lead_inv);
        quot.insert(qm, qc);
        for (dm, &dc) in d {
            let key = dm.mul(&qm);
            let v = pc.sub(rem.get(&key).copied().unwrap_or(0), pc.mul(qc, dc));
            if v == 0 {
                rem.remove(&key);
            } else {
                rem.insert(key, v);
            }
        }
    }
    Some(quot)
}

impl RingSpec {
    pub fn builder(p: u32, vars: &[&str]) -> RingBuilder {
        RingBuilder {
            p,
            vars: vars.iter().map(|v| v.to_string()).collect(),
            radical: None,
            crossing: None,
            truncate: None,
            localize: None,
        }
    }

    /// `F_p[vars]`.
    pub fn free(p: u32, vars: &[&str]) -> Result<RingSpec, RingError> {
        Self::builder(p, vars).build()
    }

    pub fn pc(&self) -> &PrimeChar {
        &self.0.pc
    }

    pub fn p(&self) -> u32 {
        self.0.pc.p()
    }

    pub fn vars(&self) -> &[String] {
        &self.0.vars
    }

    pub fn nvars(&self) -> usize {
        self.0.vars.len()
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.0.vars.iter().position(|v| v == name)
    }

    pub fn radical_var(&self) -> Option<usize> {
        self.0.radical.as_ref().map(|r| r.var)
    }

    /// The radicand `c` of `t^p = c`.
    pub fn radicand(&self) -> Option<RingElem> {
        self.0.radical.as_ref().map(|r| RingElem {
            spec: self.clone(),
            terms: r.num.clone(),
            denom: r.denom,
        })
    }

    pub fn crossing(&self) -> Option<(usize, usize)> {
        self.0.crossing
    }

    pub fn truncation(&self) -> Option<u32> {
        self.0.truncate
    }

    pub fn is_localized(&self) -> bool {
        self.0.localization.is_some()
    }

    /// The localization denominator `s`.
    pub fn denominator(&self) -> Option<RingElem> {
        self.0.localization.as_ref().map(|l| RingElem {
            spec: self.clone(),
            terms: l.s.clone(),
            denom: 0,
        })
    }

    pub fn same(&self, other: &RingSpec) -> bool {
        self == other
    }

    pub fn base_degree(&self, m: &Monomial) -> u32 {
        self.0.base_degree(m)
    }

    pub fn zero(&self) -> RingElem {
        RingElem {
            spec: self.clone(),
            terms: Terms::new(),
            denom: 0,
        }
    }

    pub fn one(&self) -> RingElem {
        self.constant(1)
    }

    pub fn constant(&self, c: u32) -> RingElem {
        self.from_terms([(Monomial::ONE, c)], 0)
    }

    pub fn constant_i64(&self, c: i64) -> RingElem {
        self.constant(self.pc().reduce(c))
    }

    pub fn var(&self, i: usize) -> RingElem {
        assert!(i < self.nvars(), "variable index out of range");
        self.monomial(Monomial::var(i), 1)
    }

    pub fn var_named(&self, name: &str) -> Result<RingElem, RingError> {
        self.var_index(name)
            .map(|i| self.var(i))
            .ok_or_else(|| RingError::UnknownVariable {
                name: name.to_string(),
                pos: 0,
            })
    }

    pub fn monomial(&self, m: Monomial, c: u32) -> RingElem {
        self.from_terms([(m, c)], 0)
    }

    /// Builds `sum c * m / s^denom` and normalizes it.
    pub fn from_terms(
        &self,
        terms: impl IntoIterator<Item = (Monomial, u32)>,
        denom: u32,
    ) -> RingElem {
        let mut raw = Terms::new();
        for (m, c) in terms {
            self.0.add_term(&mut raw, m, c % self.p());
        }
        if denom > 0 && self.0.localization.is_none() {
            panic!("denominator in a ring without localization");
        }
        let (raw, denom) =
            if let Some(inv) = self.0.localization.as_ref().and_then(|l| l.s_inv.as_ref()) {
                let inv_pow = self.0.pow_raw(inv, denom);
                (self.0.mul_raw(&raw, &inv_pow), 0)
            } else {
                (raw, denom)
            };
        let (terms, denom) = self.0.normalize(raw, denom);
        RingElem {
            spec: self.clone(),
            terms,
            denom,
        }
    }

    /// Parses an expression in the ring grammar.
    pub fn parse(&self, src: &str) -> Result<RingElem, RingError> {
        Parser::new(src, self).parse()
    }

    /// All normal-form monomials of base degree `<= d`. Under a radical
    /// extension the radical exponent also runs over `0..p`. Ordered by base
    /// degree, then radical exponent, then descending lex.
    pub fn monomial_basis(&self, d: u32) -> Result<Vec<RingElem>, RingError> {
        Ok(self
            .basis_monomials(d)?
            .into_iter()
            .map(|m| self.monomial(m, 1))
            .collect())
    }

    pub fn basis_monomials(&self, d: u32) -> Result<Vec<Monomial>, RingError> {
        if let Some(n) = self.truncation() {
            if d >= n {
                return Err(RingError::DegreeBound { d, n });
            }
        }
        let t = self.radical_var();
        let base_vars: Vec<usize> = (0..self.nvars()).filter(|&i| Some(i) != t).collect();
        let mut out = Vec::new();
        let mut exps = vec![0u32; base_vars.len()];
        enumerate_exponents(&mut exps, 0, d, &mut |e| {
            let mut m = Monomial::ONE;
            for (&v, &x) in base_vars.iter().zip(e) {
                m.0[v] = x;
            }
            match t {
                Some(t) => {
                    for r in 0..self.p() {
                        out.push(m.with_exp(t, r));
                    }
                }
                None => out.push(m),
            }
        });
        out.retain(|m| self.0.survives(m));
        out.sort_by_key(|m| self.order_key(m));
        Ok(out)
    }

    /// Sort key for display and bases: base degree, radical exponent, then
    /// descending lex.
    pub fn order_key(&self, m: &Monomial) -> (u32, u32, std::cmp::Reverse<[u32; MAX_VARS]>) {
        let t = self.radical_var().map_or(0, |t| m.0[t]);
        (self.0.base_degree(m), t, std::cmp::Reverse(m.0))
    }

    /// A random element with monomials of base degree `<= d` and up to
    /// `max_terms` terms.
    pub fn random_element<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        d: u32,
        max_terms: usize,
    ) -> RingElem {
        let d = self.truncation().map_or(d, |n| d.min(n - 1));
        let basis = self.basis_monomials(d).expect("bounded degree");
        let n = rng.gen_range(0..=max_terms.min(basis.len()));
        let terms: Vec<_> = (0..n)
            .map(|_| {
                (
                    basis[rng.gen_range(0..basis.len())],
                    rng.gen_range(1..self.p()),
                )
            })
            .collect();
        self.from_terms(terms, 0)
    }

    pub fn random_nonzero<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        d: u32,
        max_terms: usize,
    ) -> RingElem {
        loop {
            let e = self.random_element(rng, d, max_terms.max(1));
            if !e.is_zero() {
                return e;
            }
        }
    }
}

fn enumerate_exponents(exps: &mut Vec<u32>, i: usize, budget: u32, f: &mut impl FnMut(&[u32])) {
    if i == exps.len() {
        f(exps);
        return;
    }
    for e in 0..=budget {
        exps[i] = e;
        enumerate_exponents(exps, i + 1, budget - e, f);
    }
    exps[i] = 0;
}

impl fmt::Display for RingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F_{}[{}]", self.p(), self.vars().join(","))?;
        if let Some(rad) = &self.0.radical {
            write!(
                f,
                "/({}^{}-({}))",
                self.0.vars[rad.var],
                self.p(),
                self.radicand().expect("radical")
            )?;
        }
        if let Some((a, b)) = self.0.crossing {
            write!(f, "/({}*{})", self.0.vars[a], self.0.vars[b])?;
        }
        if let Some(s) = self.denominator() {
            write!(f, "[1/({s})]")?;
        }
        if let Some(n) = self.0.truncate {
            write!(f, " mod deg>={n}")?;
        }
        Ok(())
    }
}

/// An element of a [`RingSpec`] in normal form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingElem {
    spec: RingSpec,
    terms: Terms,
    denom: u32,
}

impl RingElem {
    pub fn spec(&self) -> &RingSpec {
        &self.spec
    }

    pub fn terms(&self) -> &Terms {
        &self.terms
    }

    pub fn denom_power(&self) -> u32 {
        self.denom
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.denom == 0 && self.terms.len() == 1 && self.terms.get(&Monomial::ONE) == Some(&1)
    }

    /// `Some(c)` when the element is the constant `c`.
    pub fn as_constant(&self) -> Option<u32> {
        if self.is_zero() {
            return Some(0);
        }
        (self.denom == 0 && self.terms.len() == 1)
            .then(|| self.terms.get(&Monomial::ONE).copied())
            .flatten()
    }

    /// Coefficient of the monomial `1` in the numerator.
    pub fn constant_term(&self) -> u32 {
        self.terms.get(&Monomial::ONE).copied().unwrap_or(0)
    }

    pub fn coeff(&self, m: &Monomial) -> u32 {
        self.terms.get(m).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest base degree among the numerator terms.
    pub fn base_degree(&self) -> Option<u32> {
        self.terms.keys().map(|m| self.spec.0.base_degree(m)).max()
    }

    /// Smallest base degree among the numerator terms.
    pub fn low_degree(&self) -> Option<u32> {
        self.terms.keys().map(|m| self.spec.0.base_degree(m)).min()
    }

    pub fn mentions(&self, var: usize) -> bool {
        self.terms.keys().any(|m| m.0[var] > 0)
    }

    fn check_spec(&self, other: &RingElem) {
        assert!(
            self.spec.same(&other.spec),
            "elements from different rings: {} vs {}",
            self.spec,
            other.spec
        );
    }

    fn with(&self, terms: Terms, denom: u32) -> RingElem {
        let (terms, denom) = self.spec.0.normalize(terms, denom);
        RingElem {
            spec: self.spec.clone(),
            terms,
            denom,
        }
    }

    pub fn add(&self, other: &RingElem) -> RingElem {
        self.check_spec(other);
        let sp = &self.spec.0;
        let k = self.denom.max(other.denom);
        let a = sp.shift_by_s(&self.terms, k - self.denom);
        let b = sp.shift_by_s(&other.terms, k - other.denom);
        self.with(sp.add_raw(&a, &b), k)
    }

    pub fn neg(&self) -> RingElem {
        self.scale(self.spec.pc().neg(1))
    }

    pub fn sub(&self, other: &RingElem) -> RingElem {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: u32) -> RingElem {
        let terms = self.spec.0.scale_raw(&self.terms, c % self.spec.p());
        let denom = if terms.is_empty() { 0 } else { self.denom };
        RingElem {
            spec: self.spec.clone(),
            terms,
            denom,
        }
    }

    pub fn mul(&self, other: &RingElem) -> RingElem {
        self.check_spec(other);
        let raw = self.spec.0.mul_raw(&self.terms, &other.terms);
        self.with(raw, self.denom + other.denom)
    }

    pub fn pow(&self, e: u64) -> RingElem {
        let mut base = self.clone();
        let mut acc = self.spec.one();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Multiplicative inverse when it exists in the supported shapes:
    /// nonzero constants, elements of a truncated ring with nonzero constant
    /// term, and `c * s^m` in a localized ring.
    pub fn invert_unit(&self) -> Result<RingElem, RingError> {
        let pc = self.spec.pc();
        if self.is_zero() {
            return Err(RingError::NotInvertible("zero".into()));
        }
        if let Some(c) = self.as_constant() {
            return Ok(self.spec.constant(pc.inv(c)));
        }
        let sp = &self.spec.0;
        if let Some(n) = sp.truncate {
            let c0 = self.constant_term();
            if c0 == 0 {
                return Err(RingError::NotInvertible(format!(
                    "{self} has zero constant term"
                )));
            }
            // e = c0 (1 - r) with r nilpotent; 1/e = c0^{-1} sum r^i
            let c0_inv = pc.inv(c0);
            let r = self.spec.one().sub(&self.scale(c0_inv));
            let cap = (n as usize + 1) * sp.pc.p() as usize + 2;
            let mut acc = self.spec.one();
            let mut power = self.spec.one();
            for _ in 0..cap {
                power = power.mul(&r);
                if power.is_zero() {
                    let inv = acc.scale(c0_inv);
                    return Ok(inv);
                }
                acc = acc.add(&power);
            }
            return Err(RingError::NotInvertible(format!(
                "geometric series for {self} does not terminate"
            )));
        }
        if let Some(loc) = &sp.localization {
            let mut num = self.terms.clone();
            let mut j = 0u32;
            loop {
                if num.len() == 1 {
                    if let Some(&c) = num.get(&Monomial::ONE) {
                        let top =
                            sp.scale_raw(&sp.shift_by_s(&sp.one_terms(), self.denom), pc.inv(c));
                        return Ok(self.with(top, j));
                    }
                }
                match div_exact_terms(pc, &num, &loc.s) {
                    Some(q) => {
                        num = q;
                        j += 1;
                    }
                    None => break,
                }
            }
        }
        Err(RingError::NotInvertible(format!("{self}")))
    }

    /// Ring homomorphism from a polynomial-shaped source: substitutes the
    /// `i`-th variable by `images[i]`. Denominators are mapped through the
    /// image of `s`, which must be invertible in the target.
    pub fn substitute(&self, images: &[RingElem]) -> Result<RingElem, RingError> {
        assert_eq!(images.len(), self.spec.nvars(), "one image per variable");
        let target = images
            .first()
            .map(|e| e.spec.clone())
            .expect("at least one variable");
        let mut acc = target.zero();
        // cache powers per variable
        let mut cache: HashMap<(usize, u32), RingElem> = HashMap::new();
        for (m, &c) in &self.terms {
            let mut term = target.constant(c);
            for (i, &e) in m.0.iter().enumerate().take(self.spec.nvars()) {
                if e == 0 {
                    continue;
                }
                let pw = cache
                    .entry((i, e))
                    .or_insert_with(|| images[i].pow(e as u64))
                    .clone();
                term = term.mul(&pw);
            }
            acc = acc.add(&term);
        }
        if self.denom > 0 {
            let s = self.spec.denominator().expect("localized");
            let s_img = s.substitute(images)?;
            acc = acc.mul(&s_img.invert_unit()?.pow(self.denom as u64));
        }
        Ok(acc)
    }

    /// Exact quotient `self / d` for polynomial numerators. `None` when `d`
    /// does not divide.
    pub fn div_exact(&self, d: &RingElem) -> Option<RingElem> {
        self.check_spec(d);
        if self.denom != 0
            || d.denom != 0
            || self.spec.truncation().is_some()
            || self.spec.radical_var().is_some()
        {
            return None;
        }
        if self.spec.crossing().is_some() {
            return None;
        }
        div_exact_terms(self.spec.pc(), &self.terms, &d.terms).map(|q| self.with(q, 0))
    }

    /// Splits the element into `(monomial, coefficient)` pairs ordered for
    /// display.
    pub fn sorted_terms(&self) -> Vec<(Monomial, u32)> {
        let mut v: Vec<_> = self.terms.iter().map(|(m, &c)| (*m, c)).collect();
        v.sort_by_key(|(m, _)| self.spec.order_key(m));
        v
    }

    /// The same element viewed in another ring with identical variable list
    /// and no denominators.
    pub fn transfer(&self, target: &RingSpec) -> RingElem {
        assert_eq!(self.denom, 0, "cannot transfer a fraction");
        target.from_terms(self.terms.iter().map(|(m, &c)| (*m, c)), 0)
    }
}

fn write_monomial(f: &mut impl fmt::Write, vars: &[String], exps: &[i64]) -> fmt::Result {
    let mut first = true;
    for (v, &e) in vars.iter().zip(exps) {
        if e == 0 {
            continue;
        }
        if !first {
            f.write_char('*')?;
        }
        first = false;
        if e == 1 {
            f.write_str(v)?;
        } else {
            write!(f, "{v}^{e}")?;
        }
    }
    Ok(())
}

fn write_terms(f: &mut impl fmt::Write, vars: &[String], terms: &[(Vec<i64>, u32)]) -> fmt::Result {
    if terms.is_empty() {
        return f.write_char('0');
    }
    for (i, (exps, c)) in terms.iter().enumerate() {
        if i > 0 {
            f.write_char('+')?;
        }
        let is_one = exps.iter().all(|&e| e == 0);
        if is_one {
            write!(f, "{c}")?;
        } else {
            if *c != 1 {
                write!(f, "{c}*")?;
            }
            write_monomial(f, vars, exps)?;
        }
    }
    Ok(())
}

impl fmt::Display for RingElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let vars = self.spec.vars();
        let n = vars.len();
        let to_exps = |m: &Monomial| m.0[..n].iter().map(|&e| e as i64).collect::<Vec<_>>();
        let sorted: Vec<(Vec<i64>, u32)> = self
            .sorted_terms()
            .iter()
            .map(|(m, c)| (to_exps(m), *c))
            .collect();
        if self.denom == 0 {
            return write_terms(f, vars, &sorted);
        }
        let loc = self
            .spec
            .0
            .localization
            .as_ref()
            .expect("denominator implies localization");
        match loc.single_var {
            Some(v) => {
                let shifted: Vec<_> = sorted
                    .into_iter()
                    .map(|(mut e, c)| {
                        e[v] -= self.denom as i64;
                        (e, c)
                    })
                    .collect();
                write_terms(f, vars, &shifted)
            }
            None => {
                f.write_char('(')?;
                write_terms(f, vars, &sorted)?;
                let s = self.spec.denominator().expect("localized");
                write!(f, ")*({s})^-{}", self.denom)
            }
        }
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait<&RingElem> for &RingElem {
            type Output = RingElem;
            fn $method(self, rhs: &RingElem) -> RingElem {
                RingElem::$method(self, rhs)
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);

impl Neg for &RingElem {
    type Output = RingElem;
    fn neg(self) -> RingElem {
        RingElem::neg(self)
    }
}

/// Fixed monomial coordinates for linear algebra on degree-bounded spans.
#[derive(Debug, Clone)]
pub struct MonomialIndex {
    spec: RingSpec,
    monos: Vec<Monomial>,
    pos: HashMap<Monomial, usize>,
}

impl MonomialIndex {
    pub fn new(spec: &RingSpec, d: u32) -> Result<Self, RingError> {
        Ok(Self::from_monomials(spec, spec.basis_monomials(d)?))
    }

    pub fn from_monomials(spec: &RingSpec, monos: Vec<Monomial>) -> Self {
        let pos = monos.iter().enumerate().map(|(i, m)| (*m, i)).collect();
        MonomialIndex {
            spec: spec.clone(),
            monos,
            pos,
        }
    }

    pub fn len(&self) -> usize {
        self.monos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monos.is_empty()
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monos
    }

    pub fn position(&self, m: &Monomial) -> Option<usize> {
        self.pos.get(m).copied()
    }

    pub fn basis_element(&self, i: usize) -> RingElem {
        self.spec.monomial(self.monos[i], 1)
    }

    /// Coordinates of `e`, or `None` when it leaves the span.
    pub fn coords(&self, e: &RingElem) -> Option<Vec<u32>> {
        if e.denom != 0 {
            return None;
        }
        let mut v = vec![0; self.monos.len()];
        for (m, &c) in &e.terms {
            v[*self.pos.get(m)?] = c;
        }
        Some(v)
    }

    pub fn element(&self, coords: &[u32]) -> RingElem {
        self.spec
            .from_terms(self.monos.iter().zip(coords).map(|(m, &c)| (*m, c)), 0)
    }
}

struct Parser<'a> {
    chars: Vec<(usize, char)>,
    i: usize,
    end: usize,
    spec: &'a RingSpec,
}

impl<'a> Parser<'a> {
    fn new(src: &str, spec: &'a RingSpec) -> Self {
        Parser {
            chars: src.char_indices().collect(),
            i: 0,
            end: src.len(),
            spec,
        }
    }

    fn pos(&self) -> usize {
        self.chars.get(self.i).map_or(self.end, |&(p, _)| p)
    }

    fn skip_ws(&mut self) {
        while self
            .chars
            .get(self.i)
            .is_some_and(|(_, c)| c.is_whitespace())
        {
            self.i += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.i).map(|&(_, c)| c)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, RingError> {
        Err(RingError::Syntax {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn parse(mut self) -> Result<RingElem, RingError> {
        if self.peek().is_none() {
            return self.err("empty expression");
        }
        let e = self.expr()?;
        match self.peek() {
            None => Ok(e),
            Some(c) => self.err(format!("unexpected `{c}`")),
        }
    }

    fn expr(&mut self) -> Result<RingElem, RingError> {
        let mut acc = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek() {
            self.i += 1;
            let rhs = self.term()?;
            acc = if c == '+' {
                acc.add(&rhs)
            } else {
                acc.sub(&rhs)
            };
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<RingElem, RingError> {
        let mut acc = self.factor()?;
        while self.peek() == Some('*') {
            self.i += 1;
            let rhs = self.factor()?;
            acc = acc.mul(&rhs);
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<RingElem, RingError> {
        let base = self.atom()?;
        if self.peek() != Some('^') {
            return Ok(base);
        }
        self.i += 1;
        let negative = if self.peek() == Some('-') {
            self.i += 1;
            true
        } else {
            false
        };
        let pos = self.pos();
        let n = self.nat_u64()?;
        let base = if negative {
            base.invert_unit().map_err(|e| match e {
                RingError::NotInvertible(m) => RingError::Syntax {
                    pos,
                    msg: format!("negative power of a non-unit: {m}"),
                },
                other => other,
            })?
        } else {
            base
        };
        self.checked_pow(&base, n, pos)
    }

    fn checked_pow(&self, base: &RingElem, n: u64, pos: usize) -> Result<RingElem, RingError> {
        let sp = &self.spec.0;
        if let Some(trunc) = sp.truncate {
            if n >= trunc as u64 && base.low_degree().is_some_and(|d| d >= 1) {
                return Ok(self.spec.zero());
            }
        }
        let t = sp.radical.as_ref().map(|r| r.var);
        let max_exp = base
            .terms
            .keys()
            .flat_map(|m| {
                (0..sp.nvars())
                    .filter(move |&i| Some(i) != t)
                    .map(move |i| m.0[i])
            })
            .max()
            .unwrap_or(0)
            .max(base.denom) as u64;
        if max_exp.saturating_mul(n) > MAX_EXPONENT {
            return Err(RingError::ExponentOverflow { pos });
        }
        Ok(base.pow(n))
    }

    fn nat_u64(&mut self) -> Result<u64, RingError> {
        self.skip_ws();
        let pos = self.pos();
        let start = self.i;
        let mut v: u64 = 0;
        let mut overflow = false;
        while let Some(&(_, c)) = self.chars.get(self.i) {
            let Some(d) = c.to_digit(10) else { break };
            match v.checked_mul(10).and_then(|x| x.checked_add(d as u64)) {
                Some(x) => v = x,
                None => overflow = true,
            }
            self.i += 1;
        }
        if self.i == start {
            return self.err("expected a non-negative integer");
        }
        if overflow {
            return Err(RingError::ExponentOverflow { pos });
        }
        Ok(v)
    }

    fn atom(&mut self) -> Result<RingElem, RingError> {
        let Some(c) = self.peek() else {
            return self.err("unexpected end of input");
        };
        match c {
            '(' => {
                self.i += 1;
                let e = self.expr()?;
                if self.peek() != Some(')') {
                    return self.err("expected `)`");
                }
                self.i += 1;
                Ok(e)
            }
            '-' => {
                self.i += 1;
                Ok(self.atom()?.neg())
            }
            c if c.is_ascii_digit() => {
                let p = self.spec.p() as u64;
                let mut v = 0u64;
                while let Some(d) = self.chars.get(self.i).and_then(|(_, c)| c.to_digit(10)) {
                    v = (v * 10 + d as u64) % p;
                    self.i += 1;
                }
                Ok(self.spec.constant(v as u32))
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let pos = self.pos();
                let start = self.i;
                while self
                    .chars
                    .get(self.i)
                    .is_some_and(|(_, c)| c.is_ascii_alphanumeric() || *c == '_')
                {
                    self.i += 1;
                }
                let name: String = self.chars[start..self.i].iter().map(|(_, c)| c).collect();
                match self.spec.var_index(&name) {
                    Some(i) => Ok(self.spec.var(i)),
                    None => Err(RingError::UnknownVariable { name, pos }),
                }
            }
            other => self.err(format!("unexpected `{other}`")),
        }
    }
}

/// JSON ring descriptor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingDescriptor {
    pub p: u32,
    pub vars: Vec<String>,
    #[serde(default)]
    pub shape: ShapeDescriptor,
    #[serde(default)]
    pub truncate: Option<u32>,
    #[serde(default)]
    pub localized_at: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ShapeDescriptor {
    #[default]
    Free,
    RadicalExt {
        var: String,
        radicand: String,
    },
    Crossing {
        vars: (String, String),
    },
}

impl RingDescriptor {
    pub fn build(&self) -> Result<RingSpec, RingError> {
        let vars: Vec<&str> = self.vars.iter().map(String::as_str).collect();
        let mut b = RingSpec::builder(self.p, &vars).maybe_truncate(self.truncate);
        match &self.shape {
            ShapeDescriptor::Free => {}
            ShapeDescriptor::RadicalExt { var, radicand } => b = b.radical(var, radicand),
            ShapeDescriptor::Crossing { vars: (x, y) } => b = b.crossing(x, y),
        }
        if let Some(s) = &self.localized_at {
            b = b.localize(s);
        }
        b.build()
    }
}
