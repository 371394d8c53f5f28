//! Derivations given by their values on the ring generators.
//!
//! A derivation is extended to the whole ring by the Leibniz rule,
//! `D(f) = sum_i (df/dx_i) D(x_i)`, and to fractions `f / s^k` by the
//! quotient rule. Construction checks that the generator images respect the
//! defining relations of the ring, so every `Derivation` value descends to
//! the quotient it lives on.
//!
//! In characteristic `p` the power `D^p` is again a derivation, so the
//! additive/multiplicative type is decided on generators alone. `classify`
//! also evaluates `D^p` on random elements as a guard.

use crate::modp::PrimeChar;
use crate::report::IdentityRecord;
use crate::ring::{Monomial, RingElem, RingError, RingSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DerivError {
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error("the zero derivation is not allowed here")]
    ZeroDerivation,
    #[error("derivation does not respect the relation {0}")]
    RelationViolated(String),
    #[error("derivation does not preserve the truncation ideal (variable `{0}`)")]
    TruncationUnstable(String),
    #[error("expected {expected} derivation, found {found}")]
    WrongType {
        expected: DerivType,
        found: DerivType,
    },
    #[error("{0}")]
    Precondition(String),
    #[error("spot check of D^p failed on {0}")]
    SpotCheck(String),
}

/// Type of a derivation according to its `p`-th power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DerivType {
    /// `D^p = 0`.
    Additive,
    /// `D^p = D`.
    Multiplicative,
    Neither,
    /// The zero derivation, which is both and is excluded everywhere.
    Unclassified,
}

impl fmt::Display for DerivType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DerivType::Additive => "additive",
            DerivType::Multiplicative => "multiplicative",
            DerivType::Neither => "neither",
            DerivType::Unclassified => "unclassified",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Derivation {
    spec: RingSpec,
    images: Vec<RingElem>,
    dtype: DerivType,
}

/// Number of random elements `classify` evaluates `D^p` on.
pub const SPOT_CHECKS: usize = 100;

fn partial_terms(a: &RingElem, i: usize) -> RingElem {
    let pc = a.spec().pc();
    let terms = a
        .terms()
        .iter()
        .filter(|(m, _)| m.exp(i) > 0)
        .map(|(m, &c)| {
            let e = m.exp(i);
            (m.with_exp(i, e - 1), pc.mul(c, pc.reduce(e as i64)))
        });
    a.spec().from_terms(terms.collect::<Vec<_>>(), 0)
}

impl Derivation {
    /// Builds `D` from its images on each variable, in variable order.
    pub fn new(spec: &RingSpec, images: Vec<RingElem>) -> Result<Self, DerivError> {
        if images.len() != spec.nvars() {
            return Err(DerivError::Precondition(format!(
                "expected {} images, got {}",
                spec.nvars(),
                images.len()
            )));
        }
        if images.iter().any(|e| !e.spec().same(spec)) {
            return Err(DerivError::Precondition(
                "image lives in a different ring".into(),
            ));
        }
        let mut d = Derivation {
            spec: spec.clone(),
            images,
            dtype: DerivType::Unclassified,
        };
        d.validate_relations()?;
        d.dtype = d.generator_type();
        Ok(d)
    }

    /// Builds `D` from `(variable, expression)` pairs; unlisted variables map
    /// to zero.
    pub fn from_exprs(spec: &RingSpec, images: &[(&str, &str)]) -> Result<Self, DerivError> {
        let mut v = vec![spec.zero(); spec.nvars()];
        for (name, src) in images {
            let i = spec
                .var_index(name)
                .ok_or_else(|| RingError::UnknownVariable {
                    name: name.to_string(),
                    pos: 0,
                })?;
            v[i] = spec.parse(src)?;
        }
        Self::new(spec, v)
    }

    /// The diagonal field `sum_i w_i x_i d/dx_i`.
    pub fn diagonal(spec: &RingSpec, weights: &[u32]) -> Result<Self, DerivError> {
        let images = (0..spec.nvars())
            .map(|i| spec.var(i).scale(weights.get(i).copied().unwrap_or(0)))
            .collect();
        Self::new(spec, images)
    }

    pub fn spec(&self) -> &RingSpec {
        &self.spec
    }

    pub fn pc(&self) -> &PrimeChar {
        self.spec.pc()
    }

    pub fn images(&self) -> &[RingElem] {
        &self.images
    }

    pub fn image(&self, i: usize) -> &RingElem {
        &self.images[i]
    }

    /// Cached generator-level classification.
    pub fn dtype(&self) -> DerivType {
        self.dtype
    }

    pub fn is_zero(&self) -> bool {
        self.images.iter().all(RingElem::is_zero)
    }

    fn validate_relations(&self) -> Result<(), DerivError> {
        let spec = &self.spec;
        if let Some(c) = spec.radicand() {
            let dc = self.apply(&c);
            if !dc.is_zero() {
                let t = &spec.vars()[spec.radical_var().expect("radical")];
                return Err(DerivError::RelationViolated(format!(
                    "{t}^{}-({c}): D(c) = {dc}",
                    spec.p()
                )));
            }
        }
        if let Some((a, b)) = spec.crossing() {
            let lhs = spec
                .var(a)
                .mul(&self.images[b])
                .add(&spec.var(b).mul(&self.images[a]));
            if !lhs.is_zero() {
                return Err(DerivError::RelationViolated(format!(
                    "{}*{}: D of the product is {lhs}",
                    spec.vars()[a],
                    spec.vars()[b]
                )));
            }
        }
        if let Some(n) = spec.truncation() {
            // A degree-N monomial m with e_i != 0 mod p maps to m/x_i * D(x_i),
            // which leaves the ideal exactly when D(x_i) has a base-degree-0
            // term. Such m exists unless x_i is the only surviving base variable
            // and p | N.
            let t = spec.radical_var();
            let base: Vec<usize> = (0..spec.nvars()).filter(|&i| Some(i) != t).collect();
            for &i in &base {
                if self.images[i].low_degree() != Some(0) {
                    continue;
                }
                let partner_exists = base.iter().any(|&j| {
                    j != i
                        && spec
                            .crossing()
                            .is_none_or(|(a, b)| !((a == i && b == j) || (a == j && b == i)))
                });
                if partner_exists || n % spec.p() != 0 {
                    return Err(DerivError::TruncationUnstable(spec.vars()[i].clone()));
                }
            }
        }
        Ok(())
    }

    fn apply_polynomial(&self, a: &RingElem) -> RingElem {
        let spec = &self.spec;
        let num = spec.from_terms(
            a.terms().iter().map(|(m, &c)| (*m, c)).collect::<Vec<_>>(),
            0,
        );
        (0..spec.nvars())
            .filter(|&i| !self.images[i].is_zero() && num.mentions(i))
            .fold(spec.zero(), |acc, i| {
                acc.add(&partial_terms(&num, i).mul(&self.images[i]))
            })
    }

    /// `D(a)`.
    pub fn apply(&self, a: &RingElem) -> RingElem {
        assert!(a.spec().same(&self.spec), "element from a different ring");
        let k = a.denom_power();
        if k == 0 {
            return self.apply_polynomial(a);
        }
        // D(f / s^k) = D(f) / s^k - k f D(s) / s^(k+1)
        let spec = &self.spec;
        let s = spec.denominator().expect("fraction in a localized ring");
        let inv = |j: u32| spec.from_terms([(Monomial::ONE, 1)], j);
        let num = spec.from_terms(
            a.terms().iter().map(|(m, &c)| (*m, c)).collect::<Vec<_>>(),
            0,
        );
        let first = self.apply_polynomial(&num).mul(&inv(k));
        let second = num
            .mul(&self.apply_polynomial(&s))
            .mul(&inv(k + 1))
            .scale(spec.pc().reduce(k as i64));
        first.sub(&second)
    }

    /// `D^k(a)`.
    pub fn iterate(&self, a: &RingElem, k: u32) -> RingElem {
        (0..k).fold(a.clone(), |acc, _| self.apply(&acc))
    }

    fn generator_type(&self) -> DerivType {
        if self.is_zero() {
            return DerivType::Unclassified;
        }
        let p = self.spec.p();
        let powers: Vec<RingElem> = (0..self.spec.nvars())
            .map(|i| self.iterate(&self.spec.var(i), p))
            .collect();
        if powers.iter().all(RingElem::is_zero) {
            DerivType::Additive
        } else if powers.iter().zip(&self.images).all(|(a, b)| a == b) {
            DerivType::Multiplicative
        } else {
            DerivType::Neither
        }
    }

    /// Classifies and spot-checks `D^p` on [`SPOT_CHECKS`] random elements.
    pub fn classify(&self) -> Result<DerivType, DerivError> {
        if self.dtype == DerivType::Unclassified {
            return Err(DerivError::ZeroDerivation);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let d = self.spec.truncation().map_or(4, |n| (n - 1).min(4));
        let p = self.spec.p();
        for _ in 0..SPOT_CHECKS {
            let a = self.spec.random_element(&mut rng, d, 4);
            let dp = self.iterate(&a, p);
            let expected = match self.dtype {
                DerivType::Additive => self.spec.zero(),
                DerivType::Multiplicative => self.apply(&a),
                _ => continue,
            };
            if dp != expected {
                return Err(DerivError::SpotCheck(a.to_string()));
            }
        }
        Ok(self.dtype)
    }

    pub fn require(&self, expected: DerivType) -> Result<(), DerivError> {
        if self.dtype == DerivType::Unclassified {
            return Err(DerivError::ZeroDerivation);
        }
        if self.dtype != expected {
            return Err(DerivError::WrongType {
                expected,
                found: self.dtype,
            });
        }
        Ok(())
    }

    /// `lambda * D`.
    pub fn scaled(&self, lambda: u32) -> Result<Derivation, DerivError> {
        Derivation::new(
            &self.spec,
            self.images.iter().map(|e| e.scale(lambda)).collect(),
        )
    }

    /// `w * D`.
    pub fn times(&self, w: &RingElem) -> Result<Derivation, DerivError> {
        Derivation::new(&self.spec, self.images.iter().map(|e| e.mul(w)).collect())
    }

    /// Largest amount by which `D` raises base degree on a generator. The
    /// radical variable counts as degree 0.
    pub fn degree_shift(&self) -> Option<i64> {
        let t = self.spec.radical_var();
        self.images
            .iter()
            .enumerate()
            .filter_map(|(i, img)| {
                let own = if Some(i) == t { 0 } else { 1 };
                img.base_degree().map(|d| d as i64 - own)
            })
            .max()
    }

    /// The ideal generated by `D(A)`.
    pub fn fixed_locus(&self) -> FixedLocus {
        let generators: Vec<RingElem> = self
            .images
            .iter()
            .filter(|e| !e.is_zero())
            .cloned()
            .collect();
        let is_free = generators.iter().any(|g| g.invert_unit().is_ok());
        let divisorial = divisorial_part(&self.spec, &generators);
        FixedLocus {
            generators,
            is_free,
            divisorial,
        }
    }

    /// `a -> sum_k D^k(a) tau^k / k!` into `target`, which must have the
    /// variables of this ring followed by `tau` with `tau^p = 0`.
    pub fn coaction(&self, a: &RingElem, target: &RingSpec) -> Result<RingElem, DerivError> {
        let n = self.spec.nvars();
        if target.nvars() != n + 1
            || target.vars()[..n] != *self.spec.vars()
            || target.radical_var() != Some(n)
        {
            return Err(DerivError::Precondition(
                "target must append a nilpotent variable".into(),
            ));
        }
        if target.radicand().is_some_and(|c| !c.is_zero()) {
            return Err(DerivError::Precondition(
                "appended variable must satisfy tau^p = 0".into(),
            ));
        }
        let pc = self.pc();
        let tau = target.var(n);
        let mut acc = target.zero();
        let mut dk = a.clone();
        for k in 0..self.spec.p() {
            let coeff = pc.inv(pc.factorial(k));
            acc = acc.add(&dk.transfer(target).mul(&tau.pow(k as u64)).scale(coeff));
            dk = self.apply(&dk);
        }
        Ok(acc)
    }
}

impl fmt::Display for Derivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .images
            .iter()
            .zip(self.spec.vars())
            .filter(|(e, _)| !e.is_zero())
            .map(|(e, v)| format!("({e})*d/d{v}"))
            .collect();
        if parts.is_empty() {
            f.write_str("0")
        } else {
            f.write_str(&parts.join("+"))
        }
    }
}

/// Generators of the fixed-locus ideal with simple structural data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedLocus {
    pub generators: Vec<RingElem>,
    /// Some generator is a unit, so the ideal is the whole ring.
    pub is_free: bool,
    /// Greatest common divisor of the generators when they are all monomials
    /// or all univariate polynomials in the same variable; `None` otherwise.
    pub divisorial: Option<RingElem>,
}

impl fmt::Display for FixedLocus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let gens: Vec<String> = self.generators.iter().map(ToString::to_string).collect();
        write!(f, "({})", gens.join(","))
    }
}

fn divisorial_part(spec: &RingSpec, gens: &[RingElem]) -> Option<RingElem> {
    if gens.is_empty() || gens.iter().any(|g| g.denom_power() != 0) {
        return None;
    }
    if gens.iter().all(|g| g.len() == 1) {
        let mut exps = [u32::MAX; crate::ring::MAX_VARS];
        for g in gens {
            let m = g.terms().keys().next().expect("one term");
            for (e, &x) in exps.iter_mut().zip(m.exponents()) {
                *e = (*e).min(x);
            }
        }
        return Some(spec.monomial(Monomial::from_exponents(&exps), 1));
    }
    if spec.truncation().is_some() || spec.crossing().is_some() || spec.radical_var().is_some() {
        return None;
    }
    let var = (0..spec.nvars()).find(|&i| gens.iter().any(|g| g.mentions(i)))?;
    if gens
        .iter()
        .any(|g| (0..spec.nvars()).any(|j| j != var && g.mentions(j)))
    {
        return None;
    }
    let pc = spec.pc();
    let to_poly = |g: &RingElem| {
        let deg = g.terms().keys().map(|m| m.exp(var)).max().unwrap_or(0) as usize;
        let mut c = vec![0; deg + 1];
        for (m, &v) in g.terms() {
            c[m.exp(var) as usize] = v;
        }
        crate::modp::ZpPoly::new(c)
    };
    let g = gens.iter().map(to_poly).reduce(|a, b| a.gcd(&b, pc))?;
    Some(
        spec.from_terms(
            g.coeffs()
                .iter()
                .enumerate()
                .map(|(e, &c)| (Monomial::var_pow(var, e as u32), c))
                .collect::<Vec<_>>(),
            0,
        ),
    )
}

/// Checks `(wD)^p = w^p D^p + (wD)^{p-1}(w) D` on each sample.
pub fn hochschild_check(
    w: &RingElem,
    d: &Derivation,
    samples: &[RingElem],
) -> Result<Vec<IdentityRecord>, DerivError> {
    let p = d.spec().p();
    let wd = d.times(w)?;
    let wp = w.pow(p as u64);
    let correction = wd.iterate(w, p - 1);
    Ok(samples
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let lhs = wd.iterate(a, p);
            let rhs = wp.mul(&d.iterate(a, p)).add(&correction.mul(&d.apply(a)));
            IdentityRecord::new("hochschild", p)
                .param("sample", i)
                .check(rhs, lhs)
        })
        .collect())
}

/// JSON derivation descriptor: `{"images": {"x": "x", "y": "2*y"}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivDescriptor {
    pub images: BTreeMap<String, String>,
}

impl DerivDescriptor {
    pub fn build(&self, spec: &RingSpec) -> Result<Derivation, DerivError> {
        let pairs: Vec<(&str, &str)> = self
            .images
            .iter()
            .map(|(k, v)| (k.as_str(), v.as_str()))
            .collect();
        Derivation::from_exprs(spec, &pairs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn radical3() -> RingSpec {
        RingSpec::builder(3, &["x", "y", "t"])
            .radical("t", "x")
            .build()
            .unwrap()
    }

    #[test]
    fn apply_examples() {
        let f = RingSpec::free(5, &["x", "y"]).unwrap();
        let d = Derivation::from_exprs(&f, &[("x", "x"), ("y", "2*y")]).unwrap();
        assert!(d.apply(&f.parse("x^3*y").unwrap()).is_zero());
        assert!(d.apply(&f.one()).is_zero());
        let r = radical3();
        let d = Derivation::from_exprs(&r, &[("t", "t^2")]).unwrap();
        assert_eq!(d.apply(&r.parse("t^2").unwrap()).to_string(), "2*x");
    }

    #[test]
    fn iterate_examples() {
        let f = RingSpec::free(3, &["x"]).unwrap();
        let dx = Derivation::from_exprs(&f, &[("x", "1")]).unwrap();
        assert_eq!(dx.iterate(&f.parse("x^2").unwrap(), 2).to_string(), "2");
        let r = radical3();
        let d = Derivation::from_exprs(&r, &[("t", "t^2")]).unwrap();
        assert!(d.iterate(&r.var(2), 3).is_zero());
        let xdx = Derivation::from_exprs(&f, &[("x", "x")]).unwrap();
        assert_eq!(xdx.iterate(&f.var(0), 3), f.var(0));
        assert_eq!(xdx.iterate(&f.var(0), 0), f.var(0));
    }

    #[test]
    fn classify_examples() {
        let f = RingSpec::free(5, &["x", "y"]).unwrap();
        let d = Derivation::from_exprs(&f, &[("x", "x"), ("y", "2*y")]).unwrap();
        assert_eq!(d.classify().unwrap(), DerivType::Multiplicative);
        let r = radical3();
        let d = Derivation::from_exprs(&r, &[("t", "t^2")]).unwrap();
        assert_eq!(d.classify().unwrap(), DerivType::Additive);
        let tr = RingSpec::builder(3, &["x"]).truncate(9).build().unwrap();
        let d = Derivation::from_exprs(&tr, &[("x", "1+x")]).unwrap();
        assert_eq!(d.classify().unwrap(), DerivType::Multiplicative);
        let z = Derivation::new(&f, vec![f.zero(), f.zero()]).unwrap();
        assert_eq!(z.classify(), Err(DerivError::ZeroDerivation));
        assert_eq!(
            Derivation::from_exprs(&f, &[("x", "x^2")]).unwrap().dtype(),
            DerivType::Additive
        );
        let n = Derivation::from_exprs(&f, &[("x", "x"), ("y", "1")]).unwrap();
        assert_eq!(n.dtype(), DerivType::Neither);
    }

    #[test]
    fn relation_checks() {
        let r = RingSpec::builder(3, &["x", "t"])
            .radical("t", "x")
            .build()
            .unwrap();
        assert!(matches!(
            Derivation::from_exprs(&r, &[("x", "1")]),
            Err(DerivError::RelationViolated(_))
        ));
        let c = RingSpec::builder(3, &["x", "y"])
            .crossing("x", "y")
            .build()
            .unwrap();
        assert!(Derivation::from_exprs(&c, &[("x", "x"), ("y", "y")]).is_ok());
        assert!(matches!(
            Derivation::from_exprs(&c, &[("x", "1")]),
            Err(DerivError::RelationViolated(_))
        ));
        let tr = RingSpec::builder(3, &["x"]).truncate(10).build().unwrap();
        assert!(matches!(
            Derivation::from_exprs(&tr, &[("x", "1")]),
            Err(DerivError::TruncationUnstable(_))
        ));
        let tr2 = RingSpec::builder(3, &["x", "y"])
            .truncate(9)
            .build()
            .unwrap();
        assert!(Derivation::from_exprs(&tr2, &[("x", "1")]).is_err());
        assert!(Derivation::from_exprs(&tr2, &[("x", "x"), ("y", "x+y")]).is_ok());
    }

    #[test]
    fn fixed_locus_examples() {
        let f = RingSpec::free(5, &["x", "y"]).unwrap();
        let d = Derivation::from_exprs(&f, &[("x", "x"), ("y", "2*y")]).unwrap();
        let fl = d.fixed_locus();
        assert_eq!(fl.to_string(), "(x,2*y)");
        assert!(!fl.is_free);
        assert!(fl.divisorial.unwrap().is_one());
        let g = RingSpec::free(5, &["x"]).unwrap();
        assert!(
            Derivation::from_exprs(&g, &[("x", "1")])
                .unwrap()
                .fixed_locus()
                .is_free
        );
        let r = radical3();
        let fl = Derivation::from_exprs(&r, &[("t", "t^2")])
            .unwrap()
            .fixed_locus();
        assert_eq!(fl.to_string(), "(t^2)");
        assert!(!fl.is_free);
        assert_eq!(fl.divisorial.unwrap().to_string(), "t^2");
        let u = Derivation::from_exprs(&g, &[("x", "x^2+x")])
            .unwrap()
            .fixed_locus();
        assert_eq!(u.divisorial.unwrap().to_string(), "x+x^2");
    }

    #[test]
    fn hochschild_examples() {
        let tr = RingSpec::builder(3, &["x"]).truncate(9).build().unwrap();
        let dx = Derivation::from_exprs(&tr, &[("x", "1")]).unwrap();
        let samples: Vec<_> = ["x", "x^2+1", "x^5+2*x^3"]
            .iter()
            .map(|s| tr.parse(s).unwrap())
            .collect();
        for w in ["1+x^3", "1+x", "1"] {
            let recs = hochschild_check(&tr.parse(w).unwrap(), &dx, &samples).unwrap();
            assert!(recs.iter().all(|r| r.passed()), "{w}: {recs:?}");
        }
        let wd = dx.times(&tr.parse("1+x^3").unwrap()).unwrap();
        assert!(wd.iterate(&samples[2], 3).is_zero());
        let wd = dx.times(&tr.parse("1+x").unwrap()).unwrap();
        assert_eq!(wd.iterate(&tr.var(0), 3).to_string(), "1+x");
    }

    #[test]
    fn localized_quotient_rule() {
        let l = RingSpec::builder(3, &["s"]).localize("s").build().unwrap();
        let d = Derivation::from_exprs(&l, &[("s", "s")]).unwrap();
        let e = l.parse("s^-2").unwrap();
        assert_eq!(d.apply(&e).to_string(), "s^-2"); // -2 = 1 mod 3
        let dd = Derivation::from_exprs(&l, &[("s", "1")]).unwrap();
        assert_eq!(dd.apply(&l.parse("s^-1").unwrap()).to_string(), "2*s^-2");
    }

    #[test]
    fn descriptor_builds() {
        let f = RingSpec::free(5, &["x", "y"]).unwrap();
        let d: DerivDescriptor =
            serde_json::from_str(r#"{"images": {"x": "x", "y": "2*y"}}"#).unwrap();
        assert_eq!(d.build(&f).unwrap().dtype(), DerivType::Multiplicative);
    }
}
