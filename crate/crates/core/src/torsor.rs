//! Torsor gluing data over a chart cover and the local models built from it.
//!
//! Every chart `i` carries `t_i` with `t_i^p = c_i`, and on an overlap the
//! coordinates are related by `t_j = gamma_ij + a_ij * t_i`. All overlaps
//! share one ring, `F_p[s, 1/s]`. The model ring of chart `i` is
//! `F_p[s, 1/s][t] / (t^p - c_i)`.
//!
//! The functional `g = d^{p-1}/dt^{p-1}` on `B[t]/(t^p - c)` is treated as a
//! module element with `(a * g)(x) = g(a * x)`.

use crate::deriv::{DerivError, DerivType, Derivation};
use crate::linalg::{EchelonBasis, Matrix};
use crate::modp::{binomial_mod, PrimeChar};
use crate::par;
use crate::quotient::{z_power_rank, QuotientError};
use crate::report::{IdentityRecord, Status};
use crate::ring::{MonomialIndex, RingDescriptor, RingElem, RingError, RingSpec, ShapeDescriptor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TorsorError {
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Deriv(#[from] DerivError),
    #[error(transparent)]
    Quotient(#[from] QuotientError),
    #[error("{0}")]
    Precondition(String),
    #[error("gluing data failed {} check(s); first: {}", .0.len(), .0.first().map(|f| f.to_string()).unwrap_or_default())]
    Validation(Vec<ValidationFailure>),
}

/// One failed gluing identity with the charts involved and the difference
/// `got - expected`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationFailure {
    pub check: String,
    pub charts: Vec<usize>,
    pub residual: String,
}

impl fmt::Display for ValidationFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let charts: Vec<String> = self.charts.iter().map(usize::to_string).collect();
        write!(
            f,
            "{} on ({}): residual {}",
            self.check,
            charts.join(","),
            self.residual
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub a: RingElem,
    pub gamma: RingElem,
}

#[derive(Debug, Clone)]
pub struct TorsorData {
    overlap: RingSpec,
    c: Vec<RingElem>,
    given: BTreeMap<(usize, usize), Transition>,
}

/// The record and, on failure, the structured failure for one comparison.
fn compare(
    name: &str,
    charts: &[usize],
    expected: &RingElem,
    got: &RingElem,
    records: &mut Vec<IdentityRecord>,
    failures: &mut Vec<ValidationFailure>,
) {
    let p = expected.spec().p();
    let label: Vec<String> = charts.iter().map(usize::to_string).collect();
    let rec = IdentityRecord::new(name, p)
        .param("charts", label.join(","))
        .check(expected, got);
    if !rec.passed() {
        failures.push(ValidationFailure {
            check: name.to_string(),
            charts: charts.to_vec(),
            residual: got.sub(expected).to_string(),
        });
    }
    records.push(rec);
}

/// Outcome of [`TorsorData::validate`].
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub records: Vec<IdentityRecord>,
    pub failures: Vec<ValidationFailure>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn into_result(self) -> Result<Vec<IdentityRecord>, TorsorError> {
        if self.failures.is_empty() {
            Ok(self.records)
        } else {
            Err(TorsorError::Validation(self.failures))
        }
    }
}

/// How derivations are placed on the charts.
#[derive(Debug, Clone)]
pub enum GluingMode {
    /// `D_i = t d/dt`, which needs every shift to vanish.
    Split,
    /// `D_i = d_i d/dt` with one overlap-ring function per chart.
    Section(Vec<RingElem>),
}

/// A single mutated coefficient and whether the mutant still validated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MutationOutcome {
    pub target: String,
    pub exponent: i32,
    pub valid: bool,
}

/// Derived line-bundle cocycles `a^p` and `a^{1-p}`.
#[derive(Debug, Clone)]
pub struct ExponentData {
    pub normal: BTreeMap<(usize, usize), RingElem>,
    pub dualizing: BTreeMap<(usize, usize), RingElem>,
    pub records: Vec<IdentityRecord>,
}

type TransitionMap = BTreeMap<(usize, usize), Transition>;

impl TorsorData {
    /// `transitions` lists `(i, j, a_ij, gamma_ij)`. Pairs not listed are
    /// filled in from their reverse when `a` is invertible, and `(i, i)`
    /// defaults to the identity.
    pub fn new(
        overlap: &RingSpec,
        c: Vec<RingElem>,
        transitions: Vec<(usize, usize, RingElem, RingElem)>,
    ) -> Result<Self, TorsorError> {
        if !overlap.is_localized()
            || overlap.radical_var().is_some()
            || overlap.crossing().is_some()
        {
            return Err(TorsorError::Precondition(
                "overlap ring must be a localized polynomial ring".into(),
            ));
        }
        if c.is_empty() {
            return Err(TorsorError::Precondition(
                "at least one chart is required".into(),
            ));
        }
        let n = c.len();
        let all_same = c.iter().all(|e| e.spec().same(overlap))
            && transitions
                .iter()
                .all(|(_, _, a, g)| a.spec().same(overlap) && g.spec().same(overlap));
        if !all_same {
            return Err(TorsorError::Precondition(
                "all gluing data must live in the overlap ring".into(),
            ));
        }
        let mut given = BTreeMap::new();
        for (i, j, a, gamma) in transitions {
            if i >= n || j >= n {
                return Err(TorsorError::Precondition(format!(
                    "transition ({i},{j}) names a missing chart"
                )));
            }
            if given.insert((i, j), Transition { a, gamma }).is_some() {
                return Err(TorsorError::Precondition(format!(
                    "transition ({i},{j}) given twice"
                )));
            }
        }
        Ok(TorsorData {
            overlap: overlap.clone(),
            c,
            given,
        })
    }

    pub fn overlap(&self) -> &RingSpec {
        &self.overlap
    }

    pub fn pc(&self) -> &PrimeChar {
        self.overlap.pc()
    }

    pub fn charts(&self) -> usize {
        self.c.len()
    }

    pub fn c(&self, i: usize) -> &RingElem {
        &self.c[i]
    }

    pub fn given(&self) -> &BTreeMap<(usize, usize), Transition> {
        &self.given
    }

    /// The model ring `B[t]/(t^p - c_i)` of chart `i`.
    pub fn chart_model(&self, i: usize) -> Result<RingSpec, TorsorError> {
        Ok(extend_with_radical(&self.overlap, "t", &self.c[i])?)
    }

    /// All ordered pairs that can be determined, plus the pairs that
    /// cannot.
    fn completed(&self) -> (TransitionMap, Vec<(usize, usize)>) {
        let n = self.charts();
        let mut out = self.given.clone();
        for i in 0..n {
            out.entry((i, i)).or_insert_with(|| Transition {
                a: self.overlap.one(),
                gamma: self.overlap.zero(),
            });
        }
        for ((i, j), t) in &self.given {
            if self.given.contains_key(&(*j, *i)) {
                continue;
            }
            if let Ok(inv) = t.a.invert_unit() {
                let gamma = t.gamma.mul(&inv).neg();
                out.insert((*j, *i), Transition { a: inv, gamma });
            }
        }
        let missing = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|k| !out.contains_key(k))
            .collect();
        (out, missing)
    }

    /// Checks the unit condition, the line cocycle `a_ij a_jk = a_ik`, the
    /// affine cocycle `gamma_ik = gamma_jk + a_jk gamma_ij`, and
    /// `c_j = gamma_ij^p + a_ij^p c_i`.
    pub fn validate(&self) -> ValidationReport {
        let p = self.pc().p();
        let mut records = Vec::new();
        let mut failures = Vec::new();
        for ((i, j), t) in &self.given {
            let unit = t.a.invert_unit().is_ok();
            records.push(
                IdentityRecord::new("torsor_unit", p)
                    .param("charts", format!("{i},{j}"))
                    .check("unit", if unit { "unit" } else { "non-unit" }),
            );
            if !unit {
                failures.push(ValidationFailure {
                    check: "torsor_unit".into(),
                    charts: vec![*i, *j],
                    residual: t.a.to_string(),
                });
            }
        }
        let (full, missing) = self.completed();
        for (i, j) in missing {
            records.push(
                IdentityRecord::new("torsor_cover", p)
                    .param("charts", format!("{i},{j}"))
                    .check("present", "missing"),
            );
            failures.push(ValidationFailure {
                check: "torsor_cover".into(),
                charts: vec![i, j],
                residual: "-".into(),
            });
        }
        let n = self.charts();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let (Some(ij), Some(jk), Some(ik)) =
                        (full.get(&(i, j)), full.get(&(j, k)), full.get(&(i, k)))
                    else {
                        continue;
                    };
                    let ch = [i, j, k];
                    compare(
                        "torsor_line_cocycle",
                        &ch,
                        &ik.a,
                        &ij.a.mul(&jk.a),
                        &mut records,
                        &mut failures,
                    );
                    let shift = jk.gamma.add(&jk.a.mul(&ij.gamma));
                    compare(
                        "torsor_matrix_cocycle",
                        &ch,
                        &ik.gamma,
                        &shift,
                        &mut records,
                        &mut failures,
                    );
                }
            }
        }
        for ((i, j), t) in &full {
            if i == j {
                continue;
            }
            let got = t
                .gamma
                .pow(p as u64)
                .add(&t.a.pow(p as u64).mul(&self.c[*i]));
            compare(
                "torsor_c_compat",
                &[*i, *j],
                &self.c[*j],
                &got,
                &mut records,
                &mut failures,
            );
        }
        ValidationReport { records, failures }
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_valid()
    }

    /// Adds `s^e` to one coefficient at a time for every `e` in `exponents`
    /// and every `c_i`, `gamma_ij` and `a_ij`, and validates each mutant.
    pub fn mutation_sweep(&self, exponents: std::ops::RangeInclusive<i32>) -> Vec<MutationOutcome> {
        let s = self
            .overlap
            .denominator()
            .expect("overlap ring is localized");
        let s_inv = s.invert_unit().expect("denominator is a unit");
        let bump = |e: i32| {
            if e >= 0 {
                s.pow(e as u64)
            } else {
                s_inv.pow((-e) as u64)
            }
        };
        let mut jobs: Vec<(String, i32)> = Vec::new();
        for e in exponents {
            for i in 0..self.charts() {
                jobs.push((format!("c_{i}"), e));
            }
            for (i, j) in self.given.keys() {
                jobs.push((format!("gamma_{i}{j}"), e));
                jobs.push((format!("a_{i}{j}"), e));
            }
        }
        par::map(&jobs, |(target, e)| {
            let mut m = self.clone();
            let delta = bump(*e);
            let (kind, rest) = target.split_once('_').expect("target label");
            if kind == "c" {
                let i: usize = rest.parse().expect("chart index");
                m.c[i] = m.c[i].add(&delta);
            } else {
                let key = self
                    .given
                    .keys()
                    .find(|(i, j)| format!("{i}{j}") == rest)
                    .copied()
                    .expect("known pair");
                let t = m.given.get_mut(&key).expect("known pair");
                if kind == "gamma" {
                    t.gamma = t.gamma.add(&delta);
                } else {
                    t.a = t.a.add(&delta);
                }
            }
            MutationOutcome {
                target: target.clone(),
                exponent: *e,
                valid: m.is_valid(),
            }
        })
    }

    /// Checks that the chart derivations commute with every transition map
    /// and have the expected type on each chart model.
    pub fn glued_derivation_check(
        &self,
        mode: &GluingMode,
    ) -> Result<Vec<IdentityRecord>, TorsorError> {
        let p = self.pc().p();
        let n = self.charts();
        let (expected_type, name) = match mode {
            GluingMode::Split => {
                if self.given.values().any(|t| !t.gamma.is_zero()) {
                    return Err(TorsorError::Precondition(
                        "split gluing needs every gamma_ij = 0".into(),
                    ));
                }
                (DerivType::Multiplicative, "glued_commute")
            }
            GluingMode::Section(d) => {
                if d.len() != n || d.iter().any(|e| !e.spec().same(&self.overlap)) {
                    return Err(TorsorError::Precondition(format!(
                        "need {n} chart functions in the overlap ring"
                    )));
                }
                (DerivType::Additive, "glued_section_rule")
            }
        };
        let models: Vec<RingSpec> = (0..n)
            .map(|i| self.chart_model(i))
            .collect::<Result<_, _>>()?;
        let mut derivs = Vec::with_capacity(n);
        let mut records = Vec::new();
        for (i, model) in models.iter().enumerate() {
            let t_image = match mode {
                GluingMode::Split => model.var(1),
                GluingMode::Section(d) => lift(&d[i], model),
            };
            let d = Derivation::new(model, vec![model.zero(), t_image])?;
            records.push(
                IdentityRecord::new("glued_type", p)
                    .param("chart", i)
                    .check(expected_type, d.dtype()),
            );
            derivs.push(d);
        }
        let (full, missing) = self.completed();
        if let Some((i, j)) = missing.first() {
            return Err(TorsorError::Precondition(format!(
                "transition ({i},{j}) is undetermined"
            )));
        }
        for ((i, j), tr) in &full {
            if i == j {
                continue;
            }
            // phi_ij : model_j -> model_i, t_j -> gamma_ij + a_ij t_i
            let (mi, mj) = (&models[*i], &models[*j]);
            let t_img = lift(&tr.gamma, mi).add(&lift(&tr.a, mi).mul(&mi.var(1)));
            let images = [mi.var(0), t_img.clone()];
            let phi = |x: &RingElem| x.substitute(&images);
            let lhs = phi(&derivs[*j].apply(&mj.var(1)))?;
            let rhs = derivs[*i].apply(&t_img);
            records.push(
                IdentityRecord::new(name, p)
                    .param("charts", format!("{i},{j}"))
                    .check(&rhs, &lhs),
            );
            let relation = phi(&lift(&self.c[*j], mj))?;
            records.push(
                IdentityRecord::new("glued_phi_relation", p)
                    .param("charts", format!("{i},{j}"))
                    .check(&relation, t_img.pow(p as u64)),
            );
        }
        Ok(records)
    }

    /// Normal-bundle and dualizing transition data, each re-checked as a
    /// line cocycle.
    pub fn transition_exponent_data(&self) -> Result<ExponentData, TorsorError> {
        self.validate().into_result()?;
        let p = self.pc().p();
        let (full, _) = self.completed();
        let mut normal = BTreeMap::new();
        let mut dualizing = BTreeMap::new();
        let mut records = Vec::new();
        for ((i, j), t) in &full {
            let ap = t.a.pow(p as u64);
            let dual = t.a.invert_unit()?.pow(p as u64 - 1);
            if let Some(m) = monomial_exponent(&t.a) {
                let pm = p as i64 * m;
                let qm = (1 - p as i64) * m;
                let charts = format!("{i},{j}");
                records.push(
                    IdentityRecord::new("exponent_normal", p)
                        .param("charts", &charts)
                        .check(pm, fmt_opt(monomial_exponent(&ap))),
                );
                records.push(
                    IdentityRecord::new("exponent_dualizing", p)
                        .param("charts", &charts)
                        .check(qm, fmt_opt(monomial_exponent(&dual))),
                );
            }
            normal.insert((*i, *j), ap);
            dualizing.insert((*i, *j), dual);
        }
        for (name, map) in [
            ("normal_cocycle", &normal),
            ("dualizing_cocycle", &dualizing),
        ] {
            let n = self.charts();
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        records.push(
                            IdentityRecord::new(name, p)
                                .param("charts", format!("{i},{j},{k}"))
                                .check(&map[&(i, k)], map[&(i, j)].mul(&map[&(j, k)])),
                        );
                    }
                }
            }
        }
        Ok(ExponentData {
            normal,
            dualizing,
            records,
        })
    }

    pub fn descriptor(&self) -> TorsorDescriptor {
        TorsorDescriptor {
            p: self.pc().p(),
            denominator: self.overlap.vars()[0].clone(),
            charts: self
                .c
                .iter()
                .map(|c| ChartDescriptor { c: c.to_string() })
                .collect(),
            transitions: self
                .given
                .iter()
                .map(|((i, j), t)| TransitionDescriptor {
                    i: *i,
                    j: *j,
                    a: t.a.to_string(),
                    gamma: t.gamma.to_string(),
                })
                .collect(),
        }
    }
}

fn fmt_opt(v: Option<i64>) -> String {
    v.map_or_else(|| "none".into(), |m| m.to_string())
}

/// `m` when `e = c * s^m` in a ring localized at the single variable `s`.
fn monomial_exponent(e: &RingElem) -> Option<i64> {
    let spec = e.spec();
    let s = spec.denominator()?;
    let v = (0..spec.nvars()).find(|&i| s == spec.var(i))?;
    if e.len() != 1 {
        return None;
    }
    let (m, _) = e.terms().iter().next()?;
    if (0..spec.nvars()).any(|i| i != v && m.exp(i) != 0) {
        return None;
    }
    Some(m.exp(v) as i64 - e.denom_power() as i64)
}

/// The same fraction in a ring whose variable list extends `e`'s.
fn lift(e: &RingElem, target: &RingSpec) -> RingElem {
    target.from_terms(e.terms().iter().map(|(m, &c)| (*m, c)), e.denom_power())
}

fn fresh_name(base: &RingSpec, hint: &str) -> String {
    let mut name = hint.to_string();
    while base.var_index(&name).is_some() {
        name.push('_');
    }
    name
}

/// `base[t]/(t^p - radicand)`, keeping truncation and localization.
fn extend_with_radical(
    base: &RingSpec,
    hint: &str,
    radicand: &RingElem,
) -> Result<RingSpec, RingError> {
    if base.radical_var().is_some() || base.crossing().is_some() {
        return Err(RingError::Unsupported(
            "radical extension of a non-polynomial base".into(),
        ));
    }
    descriptor_with_radical(base, hint, radicand).build()
}

fn descriptor_with_radical(base: &RingSpec, hint: &str, radicand: &RingElem) -> RingDescriptor {
    let name = fresh_name(base, hint);
    let mut vars = base.vars().to_vec();
    vars.push(name.clone());
    RingDescriptor {
        p: base.p(),
        vars,
        shape: ShapeDescriptor::RadicalExt {
            var: name,
            radicand: radicand.to_string(),
        },
        truncate: base.truncation(),
        localized_at: base.denominator().map(|s| s.to_string()),
    }
}

/// JSON form of [`TorsorData`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorsorDescriptor {
    pub p: u32,
    pub denominator: String,
    pub charts: Vec<ChartDescriptor>,
    pub transitions: Vec<TransitionDescriptor>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChartDescriptor {
    pub c: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionDescriptor {
    pub i: usize,
    pub j: usize,
    pub a: String,
    #[serde(default = "zero_string")]
    pub gamma: String,
}

fn zero_string() -> String {
    "0".into()
}

impl TorsorDescriptor {
    pub fn overlap_ring(&self) -> Result<RingSpec, TorsorError> {
        let s = self.denominator.as_str();
        Ok(RingSpec::builder(self.p, &[s]).localize(s).build()?)
    }

    pub fn build(&self) -> Result<TorsorData, TorsorError> {
        let overlap = self.overlap_ring()?;
        let c = self
            .charts
            .iter()
            .map(|ch| overlap.parse(&ch.c))
            .collect::<Result<Vec<_>, _>>()?;
        let transitions = self
            .transitions
            .iter()
            .map(|t| Ok((t.i, t.j, overlap.parse(&t.a)?, overlap.parse(&t.gamma)?)))
            .collect::<Result<Vec<_>, RingError>>()?;
        TorsorData::new(&overlap, c, transitions)
    }
}

/// `g = d^{p-1}/dt^{p-1}` on `A = B[t]/(t^p - c)`, as a `B`-linear map.
#[derive(Debug, Clone)]
pub struct DualizingGenerator {
    model: RingSpec,
    t: usize,
    /// `g(t^j)` for `j = 0..p`.
    values: Vec<u32>,
}

/// The matrix `(t^i g)(t^j)` and its determinant when all entries are
/// constants.
#[derive(Debug, Clone)]
pub struct GeneratorCertificate {
    pub matrix: Vec<Vec<RingElem>>,
    pub det: Option<u32>,
}

impl GeneratorCertificate {
    pub fn is_unit(&self) -> bool {
        self.det.is_some_and(|d| d != 0)
    }
}

/// Builds `g` on the model `B[t]/(t^p - c)`, where `B` is the ring of `c`.
pub fn local_dualizing_generator(c: &RingElem) -> Result<DualizingGenerator, TorsorError> {
    let model = extend_with_radical(c.spec(), "t", c)?;
    let t = model.radical_var().expect("radical model");
    let pc = model.pc().clone();
    let p = pc.p();
    let values = (0..p)
        .map(|j| if j == p - 1 { pc.factorial(p - 1) } else { 0 })
        .collect();
    Ok(DualizingGenerator { model, t, values })
}

impl DualizingGenerator {
    pub fn model(&self) -> &RingSpec {
        &self.model
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    /// `g(x)`, an element of `B` (no `t`).
    pub fn apply(&self, x: &RingElem) -> RingElem {
        let terms = x.terms().iter().filter_map(|(m, &c)| {
            let v = self.values[m.exp(self.t) as usize];
            (v != 0).then(|| (m.with_exp(self.t, 0), self.model.pc().mul(c, v)))
        });
        self.model
            .from_terms(terms.collect::<Vec<_>>(), x.denom_power())
    }

    /// `(a * g)(x) = g(a x)`.
    pub fn act(&self, a: &RingElem, x: &RingElem) -> RingElem {
        self.apply(&a.mul(x))
    }

    fn t_pow(&self, k: u32) -> RingElem {
        self.model.var(self.t).pow(k as u64)
    }

    pub fn certificate(&self) -> GeneratorCertificate {
        let p = self.model.p();
        let matrix: Vec<Vec<RingElem>> = (0..p)
            .map(|i| {
                (0..p)
                    .map(|j| self.act(&self.t_pow(i), &self.t_pow(j)))
                    .collect()
            })
            .collect();
        let consts: Option<Vec<Vec<u32>>> = matrix
            .iter()
            .map(|row| {
                row.iter()
                    .map(|e| e.as_constant().or(e.is_zero().then_some(0)))
                    .collect()
            })
            .collect();
        let det = consts.map(|rows| Matrix::from_rows(rows).det(self.model.pc()));
        GeneratorCertificate { matrix, det }
    }

    pub fn records(&self) -> Vec<IdentityRecord> {
        let pc = self.model.pc();
        let p = pc.p();
        let mut out: Vec<IdentityRecord> = (0..p)
            .map(|j| {
                let expected = if j == p - 1 { pc.factorial(p - 1) } else { 0 };
                IdentityRecord::new("dualizing_value", p)
                    .param("j", j)
                    .check(
                        pc.signed(expected),
                        self.apply(&self.t_pow(j)).as_constant().map_or_else(
                            || self.apply(&self.t_pow(j)).to_string(),
                            |v| pc.signed(v),
                        ),
                    )
            })
            .collect();
        let cert = self.certificate();
        let got = match cert.det {
            Some(0) => "singular".to_string(),
            Some(d) => format!("unit:{}", pc.signed(d)),
            None => "non-constant".to_string(),
        };
        let expected = cert
            .det
            .filter(|&d| d != 0)
            .map_or("unit".to_string(), |d| format!("unit:{}", pc.signed(d)));
        out.push(IdentityRecord::new("dualizing_certificate", p).check(expected, got));
        out
    }

    /// Finds `a` with `(a * g)(t^j) = values[j]` for every `j`, proving the
    /// functional with those values is a multiple of `g`.
    pub fn represent(&self, values: &[RingElem]) -> Result<RingElem, TorsorError> {
        let pc = self.model.pc();
        let p = pc.p() as usize;
        if values.len() != p {
            return Err(TorsorError::Precondition(format!("need {p} values")));
        }
        if values
            .iter()
            .any(|v| v.mentions(self.t) || !v.spec().same(&self.model))
        {
            return Err(TorsorError::Precondition(
                "values must lie in the base ring".into(),
            ));
        }
        let cert = self.certificate();
        let Some(rows) = cert
            .matrix
            .iter()
            .map(|row| {
                row.iter()
                    .map(|e| e.as_constant().or(e.is_zero().then_some(0)))
                    .collect::<Option<Vec<u32>>>()
            })
            .collect::<Option<Vec<_>>>()
        else {
            return Err(TorsorError::Precondition(
                "certificate matrix is not constant".into(),
            ));
        };
        // M[j][i] = g(t^{i+j}) is symmetric, so rows serve as the system.
        let m = Matrix::from_rows(rows);
        let k = values.iter().map(RingElem::denom_power).max().unwrap_or(0);
        let shift = match self.model.denominator() {
            Some(s) if k > 0 => Some(s.pow(k as u64)),
            _ => None,
        };
        let cleared: Vec<RingElem> = values
            .iter()
            .map(|v| shift.as_ref().map_or(v.clone(), |s| v.mul(s)))
            .collect();
        let mut monos: Vec<_> = cleared
            .iter()
            .flat_map(|v| v.terms().keys().copied())
            .collect();
        monos.sort();
        monos.dedup();
        let mut a = self.model.zero();
        for mono in monos {
            let rhs: Vec<u32> = cleared.iter().map(|v| v.coeff(&mono)).collect();
            let sol = m.solve(&rhs, pc).ok_or_else(|| {
                TorsorError::Precondition("functional is not a multiple of g".into())
            })?;
            for (i, c) in sol.into_iter().enumerate() {
                a = a.add(&self.model.monomial(mono.with_exp(self.t, i as u32), c));
            }
        }
        if let Some(s) = shift {
            a = a.mul(&s.invert_unit()?);
        }
        for (j, v) in values.iter().enumerate() {
            if self.act(&a, &self.t_pow(j as u32)) != *v {
                return Err(TorsorError::Precondition(format!(
                    "representation check failed at t^{j}"
                )));
            }
        }
        Ok(a)
    }
}

/// `B[t]/(t^p - c)` with `D = d/dt`, on which `D^{p-1}` is the generator
/// `g` itself.
#[derive(Debug, Clone)]
pub struct AdjunctionModel {
    spec: RingSpec,
    d: Derivation,
}

impl AdjunctionModel {
    pub fn new(c: &RingElem) -> Result<Self, TorsorError> {
        let p = c.spec().p();
        if p > 13 {
            return Err(TorsorError::Precondition(
                "subset expansion is limited to p <= 13".into(),
            ));
        }
        let spec = extend_with_radical(c.spec(), "t", c)?;
        let t = spec.radical_var().expect("radical model");
        let mut images = vec![spec.zero(); spec.nvars()];
        images[t] = spec.one();
        let d = Derivation::new(&spec, images)?;
        Ok(AdjunctionModel { spec, d })
    }

    pub fn spec(&self) -> &RingSpec {
        &self.spec
    }

    pub fn derivation(&self) -> &Derivation {
        &self.d
    }

    fn g(&self, x: &RingElem) -> RingElem {
        self.d.iterate(x, self.spec.p() - 1)
    }

    /// `D^{p-1}(a_1 ... a_p)`.
    pub fn direct(&self, a: &[RingElem]) -> RingElem {
        self.g(&a.iter().fold(self.spec.one(), |acc, x| acc.mul(x)))
    }

    /// The expansion of `D^{p-1}` of a product over all ways of
    /// distributing the derivatives, accumulated factor by factor with
    /// binomial weights.
    pub fn multinomial(&self, a: &[RingElem]) -> RingElem {
        let pc = self.spec.pc();
        let top = self.spec.p() as usize - 1;
        let mut acc = vec![self.spec.zero(); top + 1];
        acc[0] = self.spec.one();
        for x in a {
            let mut derivs = vec![x.clone()];
            for _ in 0..top {
                let next = self.d.apply(derivs.last().expect("nonempty"));
                derivs.push(next);
            }
            acc = (0..=top)
                .map(|m| {
                    (0..=m).fold(self.spec.zero(), |s, k| {
                        let w = binomial_mod(m as u64, k as u64, pc);
                        s.add(&acc[m - k].mul(&derivs[k]).scale(w))
                    })
                })
                .collect();
        }
        acc.swap_remove(top)
    }

    /// `-2 sum_i a_i prod_{j != i} D a_j + sum_S (-1)^|S| (2|S|-1) prod_S a
    /// * g(prod of the rest)` over nonempty position sets `S` of size at
    /// most `p - 1`.
    pub fn reorganized(&self, a: &[RingElem]) -> RingElem {
        let pc = self.spec.pc();
        let n = a.len();
        let da: Vec<RingElem> = a.iter().map(|x| self.d.apply(x)).collect();
        let mut first = self.spec.zero();
        for i in 0..n {
            let rest = (0..n)
                .filter(|&j| j != i)
                .fold(a[i].clone(), |acc, j| acc.mul(&da[j]));
            first = first.add(&rest);
        }
        let mut acc = first.scale(pc.reduce(-2));
        let full = (1usize << n) - 1;
        let mut prods = vec![self.spec.one(); full + 1];
        for mask in 1..=full {
            let low = mask.trailing_zeros() as usize;
            prods[mask] = prods[mask & (mask - 1)].mul(&a[low]);
        }
        for mask in 1..full {
            let s = mask.count_ones() as i64;
            let w = pc.reduce(if s % 2 == 0 { 2 * s - 1 } else { 1 - 2 * s });
            if w == 0 {
                continue;
            }
            acc = acc.add(&prods[mask].mul(&self.g(&prods[full ^ mask])).scale(w));
        }
        acc
    }

    /// Records for one tuple `(a_1, ..., a_p)`.
    pub fn check_tuple(&self, a: &[RingElem], sample: usize) -> Vec<IdentityRecord> {
        let p = self.spec.p();
        let direct = self.direct(a);
        vec![
            IdentityRecord::new("adjunction_reorganized", p)
                .param("sample", sample)
                .check(&direct, self.reorganized(a)),
            IdentityRecord::new("adjunction_multinomial", p)
                .param("sample", sample)
                .check(&direct, self.multinomial(a)),
        ]
    }

    /// `(D a)^{p-1} = -sum_{k<p} a^{p-1-k} g(a^k)`.
    pub fn check_power(&self, a: &RingElem, sample: usize) -> IdentityRecord {
        let p = self.spec.p();
        let lhs = self.d.apply(a).pow(p as u64 - 1);
        let rhs = (0..p)
            .fold(self.spec.zero(), |acc, k| {
                acc.add(&a.pow((p - 1 - k) as u64).mul(&self.g(&a.pow(k as u64))))
            })
            .neg();
        IdentityRecord::new("adjunction_power", p)
            .param("sample", sample)
            .check(lhs, rhs)
    }
}

/// Both adjunction identities and the multinomial cross-check on `samples`
/// random inputs. Sample `i` draws from a generator seeded with
/// `seed + i`, so the output does not depend on scheduling.
pub fn adjunction_identity_check(
    c: &RingElem,
    samples: usize,
    seed: u64,
) -> Result<Vec<IdentityRecord>, TorsorError> {
    let model = AdjunctionModel::new(c)?;
    let p = model.spec.p() as usize;
    let deg = model.spec.truncation().map_or(3, |n| n - 1);
    let per_sample = par::map_range(0..samples, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let tuple: Vec<RingElem> = (0..p)
            .map(|_| model.spec.random_element(&mut rng, deg, 4))
            .collect();
        let single = model.spec.random_element(&mut rng, deg, 4);
        let mut recs = model.check_tuple(&tuple, i);
        recs.push(model.check_power(&single, i));
        recs
    });
    Ok(per_sample.into_iter().flatten().collect())
}

/// Compares the fixed ideal power `(D x, D y)^{p-1}` with
/// `(xy, x^{p-1}, y^{p-1}) * (xy, f^{p-1} + g^{p-1})` for
/// `D = x f(x) d/dx + y g(y) d/dy` on `F_p[x,y]/(xy)` truncated at `order`.
/// Ideals are compared as spans inside the truncated ring.
pub fn crossing_fixed_ideal_check(
    p: u32,
    f: &str,
    g: &str,
    order: u32,
) -> Result<Vec<IdentityRecord>, TorsorError> {
    let spec = RingSpec::builder(p, &["x", "y"])
        .crossing("x", "y")
        .truncate(order)
        .build()?;
    let (f, g) = (spec.parse(f)?, spec.parse(g)?);
    if f.mentions(1) || g.mentions(0) {
        return Err(TorsorError::Precondition(
            "f must be a function of x and g of y".into(),
        ));
    }
    let (x, y) = (spec.var(0), spec.var(1));
    let d = Derivation::new(&spec, vec![x.mul(&f), y.mul(&g)])?;
    if d.is_zero() {
        return Err(DerivError::ZeroDerivation.into());
    }
    let e = p as u64 - 1;
    let (dx, dy) = (d.image(0).clone(), d.image(1).clone());
    let lhs: Vec<RingElem> = (0..=e).map(|i| dx.pow(i).mul(&dy.pow(e - i))).collect();
    let sum = f.pow(e).add(&g.pow(e));
    let xy = x.mul(&y);
    let j = [xy.clone(), x.pow(e), y.pow(e)];
    let rhs: Vec<RingElem> = j.iter().flat_map(|a| [a.mul(&xy), a.mul(&sum)]).collect();

    let index = MonomialIndex::new(&spec, order - 1)?;
    let span = |gens: &[RingElem]| {
        let mut basis = EchelonBasis::new(index.len());
        for gen in gens {
            for m in index.monomials() {
                let v = index
                    .coords(&gen.mul(&spec.monomial(*m, 1)))
                    .expect("inside the truncation");
                basis.insert(&v, spec.pc());
            }
        }
        basis
    };
    let (lhs_span, rhs_span) = (span(&lhs), span(&rhs));
    let mut records = Vec::new();
    if sum.is_zero() {
        records.push(IdentityRecord::new("fixed_ideal_degenerate", p).outcome(
            "nonzero",
            "f^(p-1)+g^(p-1)=0",
            Status::Info,
        ));
    }
    let mut membership = |name: &str, gens: &[RingElem], ideal: &EchelonBasis| {
        for gen in gens.iter().filter(|g| !g.is_zero()) {
            let v = index.coords(gen).expect("inside the truncation");
            let r = ideal.reduce(&v, spec.pc());
            let got = match r.iter().rposition(|&c| c != 0) {
                None => "member".to_string(),
                Some(pos) => format!("witness:{}", index.basis_element(pos)),
            };
            records.push(
                IdentityRecord::new(name, p)
                    .param("generator", gen)
                    .check("member", got),
            );
        }
    };
    membership("fixed_ideal_forward", &lhs, &rhs_span);
    membership("fixed_ideal_backward", &rhs, &lhs_span);
    records.push(
        IdentityRecord::new("fixed_ideal_dimension", p)
            .param("order", order)
            .check(lhs_span.len(), rhs_span.len()),
    );
    Ok(records)
}

/// `base[u]/(u^p - z^p)` with the evaluation map `u -> z`.
#[derive(Debug, Clone)]
pub struct LocalTorsorAlgebra {
    pub descriptor: RingDescriptor,
    pub spec: RingSpec,
    pub lambda: RingElem,
    pub z: RingElem,
    pub records: Vec<IdentityRecord>,
}

impl LocalTorsorAlgebra {
    /// `f(u) -> f(z)`.
    pub fn psi(&self, f: &RingElem) -> Result<RingElem, TorsorError> {
        let base = self.z.spec();
        let mut images: Vec<RingElem> = (0..base.nvars()).map(|i| base.var(i)).collect();
        images.push(self.z.clone());
        Ok(f.substitute(&images)?)
    }
}

/// Builds the local torsor algebra for `z` with `D z = 1` and checks that
/// `1, z, ..., z^{p-1}` are free over the invariants up to the truncation.
pub fn build_local_torsor_algebra(
    d: &Derivation,
    z: &RingElem,
) -> Result<LocalTorsorAlgebra, TorsorError> {
    let base = d.spec();
    let p = base.p();
    let dz = d.apply(z);
    if !dz.is_one() {
        return Err(TorsorError::Precondition(format!(
            "D(z) = {dz}, expected 1"
        )));
    }
    let lambda = z.pow(p as u64);
    let descriptor = descriptor_with_radical(base, "u", &lambda);
    let spec = extend_with_radical(base, "u", &lambda)?;
    let mut out = LocalTorsorAlgebra {
        descriptor,
        spec,
        lambda: lambda.clone(),
        z: z.clone(),
        records: Vec::new(),
    };
    let u = out.spec.var(out.spec.radical_var().expect("radical"));
    out.records.push(
        IdentityRecord::new("torsor_algebra_lambda_invariant", p).check("0", d.apply(&lambda)),
    );
    out.records.push(
        IdentityRecord::new("torsor_algebra_relation", p)
            .check(&lambda, out.psi(&u.pow(p as u64))?),
    );
    let (rank, dim) = z_power_rank(d, z)?;
    out.records
        .push(IdentityRecord::new("torsor_algebra_rank", p).check(dim, rank));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_chart() -> TorsorData {
        let json = r#"{"p":2,"denominator":"s","charts":[{"c":"s^3+s"},{"c":"s^-1+s^-3"}],"transitions":[{"i":0,"j":1,"a":"s^-2","gamma":"0"}]}"#;
        serde_json::from_str::<TorsorDescriptor>(json)
            .unwrap()
            .build()
            .unwrap()
    }

    #[test]
    fn two_chart_example_validates() {
        let t = two_chart();
        let rep = t.validate();
        assert!(rep.is_valid(), "{:?}", rep.failures);
        assert_eq!(t.c(1).to_string(), "s^-3+s^-1");
    }

    #[test]
    fn trivial_torsor_validates() {
        let o = RingSpec::builder(3, &["s"]).localize("s").build().unwrap();
        let t = TorsorData::new(
            &o,
            vec![o.zero(), o.zero()],
            vec![(0, 1, o.parse("2*s^5").unwrap(), o.zero())],
        )
        .unwrap();
        assert!(t.is_valid());
    }

    #[test]
    fn perturbed_shift_breaks_affine_cocycle() {
        let o = RingSpec::builder(3, &["s"]).localize("s").build().unwrap();
        let a = o.parse("s").unwrap();
        let g01 = o.parse("s^2").unwrap();
        let c0 = o.parse("s^-1").unwrap();
        // chart 1 and 2 from chart 0 by composition, then perturb gamma_02
        let g12 = o.parse("1").unwrap();
        let a02 = a.mul(&a);
        let g02 = g12.add(&a.mul(&g01));
        let c1 = g01.pow(3).add(&a.pow(3).mul(&c0));
        let c2 = g02.pow(3).add(&a02.pow(3).mul(&c0));
        let good = vec![
            (0, 1, a.clone(), g01.clone()),
            (1, 2, a.clone(), g12.clone()),
            (0, 2, a02.clone(), g02.clone()),
        ];
        let t = TorsorData::new(&o, vec![c0.clone(), c1.clone(), c2.clone()], good).unwrap();
        assert!(t.is_valid(), "{:?}", t.validate().failures);
        let bad = vec![
            (0, 1, a.clone(), g01),
            (1, 2, a, g12),
            (0, 2, a02, g02.add(&o.one())),
        ];
        let t = TorsorData::new(&o, vec![c0, c1, c2], bad).unwrap();
        let rep = t.validate();
        assert!(rep
            .failures
            .iter()
            .any(|f| f.check == "torsor_matrix_cocycle" && f.charts == [0, 1, 2]));
    }

    #[test]
    fn every_mutant_fails() {
        let outcomes = two_chart().mutation_sweep(-6..=6);
        assert_eq!(outcomes.len(), 52);
        assert!(outcomes.iter().all(|m| !m.valid));
    }

    #[test]
    fn glued_derivations() {
        let t = two_chart();
        let recs = t.glued_derivation_check(&GluingMode::Split).unwrap();
        assert!(recs.iter().all(IdentityRecord::passed));
        let o = t.overlap();
        let good = GluingMode::Section(vec![o.one(), o.parse("s^-2").unwrap()]);
        assert!(t
            .glued_derivation_check(&good)
            .unwrap()
            .iter()
            .all(IdentityRecord::passed));
        let bad = GluingMode::Section(vec![o.one(), o.parse("s^2").unwrap()]);
        assert!(t
            .glued_derivation_check(&bad)
            .unwrap()
            .iter()
            .any(|r| !r.passed()));
    }

    #[test]
    fn split_needs_zero_shift() {
        let o = RingSpec::builder(2, &["s"]).localize("s").build().unwrap();
        let t =
            TorsorData::new(&o, vec![o.zero(), o.one()], vec![(0, 1, o.one(), o.one())]).unwrap();
        assert!(t.is_valid());
        assert!(matches!(
            t.glued_derivation_check(&GluingMode::Split),
            Err(TorsorError::Precondition(_))
        ));
        let d = GluingMode::Section(vec![o.one(), o.one()]);
        assert!(t
            .glued_derivation_check(&d)
            .unwrap()
            .iter()
            .all(IdentityRecord::passed));
    }

    #[test]
    fn exponent_data() {
        let e = two_chart().transition_exponent_data().unwrap();
        assert_eq!(e.dualizing[&(0, 1)].to_string(), "s^2");
        assert_eq!(e.normal[&(0, 1)].to_string(), "s^-4");
        assert!(e.records.iter().all(IdentityRecord::passed));

        let o = RingSpec::builder(3, &["s"]).localize("s").build().unwrap();
        let s = o.parse("s").unwrap();
        let c1 = s.pow(3);
        let t = TorsorData::new(&o, vec![o.one(), c1], vec![(0, 1, s, o.zero())]).unwrap();
        let e = t.transition_exponent_data().unwrap();
        assert_eq!(e.normal[&(0, 1)].to_string(), "s^3");
        assert_eq!(e.dualizing[&(0, 1)].to_string(), "s^-2");
        assert!(e.records.iter().all(IdentityRecord::passed));
    }

    #[test]
    fn dualizing_generator() {
        let b = RingSpec::builder(3, &["x"]).truncate(5).build().unwrap();
        let g = local_dualizing_generator(&b.parse("1+x").unwrap()).unwrap();
        assert_eq!(g.values(), &[0, 0, 2]);
        assert!(g.records().iter().all(IdentityRecord::passed));
        let b2 = RingSpec::free(2, &["x"]).unwrap();
        assert_eq!(
            local_dualizing_generator(&b2.parse("x").unwrap())
                .unwrap()
                .values(),
            &[0, 1]
        );
        let b5 = RingSpec::free(5, &["x"]).unwrap();
        let g5 = local_dualizing_generator(&b5.parse("x^2").unwrap()).unwrap();
        assert!(g5.certificate().is_unit());
        // the functional t^j -> x^j is 'a * g' for some a
        let m = g5.model();
        let vals: Vec<RingElem> = (0..5).map(|j| m.parse("x").unwrap().pow(j)).collect();
        let a = g5.represent(&vals).unwrap();
        assert!(!a.is_zero());
    }

    #[test]
    fn represent_over_localized_base() {
        let o = RingSpec::builder(3, &["s"]).localize("s").build().unwrap();
        let g = local_dualizing_generator(&o.parse("s^-1").unwrap()).unwrap();
        let m = g.model();
        let vals = vec![
            m.parse("s^-2").unwrap(),
            m.one(),
            m.parse("s+s^-1").unwrap(),
        ];
        g.represent(&vals).unwrap();
    }

    #[test]
    fn power_identity_examples() {
        let b = RingSpec::builder(3, &["x"]).truncate(5).build().unwrap();
        let model = AdjunctionModel::new(&b.parse("x").unwrap()).unwrap();
        let t = model.spec().parse("t").unwrap();
        assert!(model.check_power(&t, 0).passed());
        let t2 = t.mul(&t);
        let rec = model.check_power(&t2, 0);
        assert!(rec.passed());
        assert_eq!(rec.got, "t^2");
    }

    #[test]
    fn reorganized_matches_direct_on_monomials() {
        let b = RingSpec::builder(3, &["x"]).truncate(5).build().unwrap();
        let model = AdjunctionModel::new(&b.parse("1+x").unwrap()).unwrap();
        let sp = model.spec();
        let a: Vec<RingElem> = ["t", "x*t^2", "t^2"]
            .iter()
            .map(|s| sp.parse(s).unwrap())
            .collect();
        assert!(model.check_tuple(&a, 0).iter().all(IdentityRecord::passed));
    }

    #[test]
    fn adjunction_random_small() {
        let b = RingSpec::builder(5, &["x"]).truncate(7).build().unwrap();
        let recs = adjunction_identity_check(&b.parse("x+x^2").unwrap(), 10, 3).unwrap();
        assert_eq!(recs.len(), 30);
        assert!(recs.iter().all(IdentityRecord::passed));
    }

    #[test]
    fn crossing_fixed_ideal_examples() {
        let recs = crossing_fixed_ideal_check(3, "x", "y", 10).unwrap();
        assert!(recs.iter().all(IdentityRecord::passed), "{recs:?}");
        // p = 2, f = 1, g = 1 + y: (x, y) on the left against (y^2) on the right
        let recs = crossing_fixed_ideal_check(2, "1", "1+y", 8).unwrap();
        assert!(recs
            .iter()
            .any(|r| r.name == "fixed_ideal_forward" && !r.passed()));
        let recs = crossing_fixed_ideal_check(2, "1", "1", 8).unwrap();
        assert!(recs.iter().any(|r| r.name == "fixed_ideal_degenerate"));
        assert!(matches!(
            crossing_fixed_ideal_check(3, "0", "0", 6),
            Err(TorsorError::Deriv(DerivError::ZeroDerivation))
        ));
    }

    #[test]
    fn local_torsor_algebra() {
        let b = RingSpec::builder(3, &["x"]).truncate(9).build().unwrap();
        let d = Derivation::from_exprs(&b, &[("x", "1")]).unwrap();
        let alg = build_local_torsor_algebra(&d, &b.parse("x").unwrap()).unwrap();
        assert_eq!(alg.lambda.to_string(), "x^3");
        assert!(
            alg.records.iter().all(IdentityRecord::passed),
            "{:?}",
            alg.records
        );
        let u = alg.spec.parse("u").unwrap();
        assert_eq!(alg.psi(&u).unwrap().to_string(), "x");

        let d = Derivation::from_exprs(&b, &[("x", "1+x^3")]).unwrap();
        let z = crate::quotient::z_construct(&d, &b.parse("x").unwrap())
            .unwrap()
            .z;
        let alg = build_local_torsor_algebra(&d, &z).unwrap();
        assert!(
            alg.records.iter().all(IdentityRecord::passed),
            "{:?}",
            alg.records
        );
    }
}
