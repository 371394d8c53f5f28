//! Subspaces cut out by a derivation on degree-bounded spans.
//!
//! All computations reduce to exact linear algebra over `Z/p` on the span of
//! [`RingSpec::basis_monomials`]. The codomain of a map is indexed on the fly
//! by the monomials that actually occur, so degree-raising derivations need
//! no special treatment for kernels. Eigenspaces are the exception: they
//! require the span to be stable under `D` and refuse otherwise.
//!
//! The filtration uses `E_k = ker D^{k+1}`, so `E_0` is the invariant ring.

use crate::deriv::{DerivError, DerivType, Derivation};
use crate::linalg::{EchelonBasis, Matrix};
use crate::modp::{projector_polys, PrimeChar};
use crate::par;
use crate::report::IdentityRecord;
use crate::ring::{Monomial, MonomialIndex, RingElem, RingError, RingSpec};
use serde_json::json;
use std::collections::HashMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QuotientError {
    #[error(transparent)]
    Deriv(#[from] DerivError),
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error("degree span is not stable under D: {0}")]
    UnsupportedStability(String),
    #[error("{0}")]
    Precondition(String),
    #[error("verification failed: {0}")]
    Verification(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubspaceLabel {
    Invariants,
    Eigen(u32),
    /// `E_k = ker D^{k+1}`.
    Filtration(u32),
}

/// A subspace of the degree `<= degree_bound` span with a reduced echelon
/// basis: each basis vector has a distinct leading (highest) monomial with
/// coefficient 1, and the basis is sorted by leading monomial.
#[derive(Debug, Clone)]
pub struct GradedSubspace {
    pub label: SubspaceLabel,
    pub degree_bound: u32,
    pub basis: Vec<RingElem>,
    index: MonomialIndex,
    ambient: RingSpec,
}

impl GradedSubspace {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn spec(&self) -> &RingSpec {
        &self.ambient
    }

    pub fn index(&self) -> &MonomialIndex {
        &self.index
    }

    /// Dimension of the ambient degree-bounded span.
    pub fn ambient_dim(&self) -> usize {
        self.index.len()
    }

    pub fn echelon(&self) -> EchelonBasis {
        let pc = self.ambient.pc();
        let mut e = EchelonBasis::new(self.index.len());
        for b in &self.basis {
            e.insert(&self.index.coords(b).expect("basis inside span"), pc);
        }
        e
    }

    pub fn contains(&self, a: &RingElem) -> bool {
        match self.index.coords(a) {
            Some(v) => self.echelon().contains(&v, self.ambient.pc()),
            None => false,
        }
    }

    pub fn basis_strings(&self) -> Vec<String> {
        self.basis.iter().map(ToString::to_string).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let (label, k) = match self.label {
            SubspaceLabel::Invariants => ("invariants", None),
            SubspaceLabel::Eigen(k) => ("eigen", Some(k)),
            SubspaceLabel::Filtration(k) => ("filtration", Some(k)),
        };
        let mut v = json!({"label": label, "degree_bound": self.degree_bound, "basis": self.basis_strings()});
        if let Some(k) = k {
            v["k"] = json!(k);
        }
        v
    }
}

impl fmt::Display for GradedSubspace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.basis_strings().join(", "))
    }
}

/// Reduced echelon form with pivots at the highest coordinate, sorted by
/// pivot.
fn canonical_rows(rows: Vec<Vec<u32>>, n: usize, spec: &RingSpec) -> Vec<Vec<u32>> {
    if rows.is_empty() {
        return rows;
    }
    let reversed: Vec<Vec<u32>> = rows
        .into_iter()
        .map(|r| r.into_iter().rev().collect())
        .collect();
    let mut m = Matrix::from_rows(reversed);
    let rank = m.rref(spec.pc()).len();
    let mut out: Vec<Vec<u32>> = m.rows()[..rank]
        .iter()
        .map(|r| r.iter().rev().copied().collect())
        .collect();
    out.sort_by_key(|r| r.iter().rposition(|&x| x != 0).unwrap_or(n));
    out
}

fn subspace_from_rows(
    d: &Derivation,
    label: SubspaceLabel,
    degree_bound: u32,
    index: MonomialIndex,
    rows: Vec<Vec<u32>>,
) -> GradedSubspace {
    let rows = canonical_rows(rows, index.len(), d.spec());
    let basis = rows.iter().map(|r| index.element(r)).collect();
    GradedSubspace {
        label,
        degree_bound,
        basis,
        index,
        ambient: d.spec().clone(),
    }
}

/// Kernel of a linear map given by its values on the span basis.
fn kernel_of(index: &MonomialIndex, images: &[RingElem], spec: &RingSpec) -> Vec<Vec<u32>> {
    let mut rows: HashMap<Monomial, usize> = HashMap::new();
    let mut order = Vec::new();
    for img in images {
        assert_eq!(img.denom_power(), 0, "linear algebra on fractions");
        for m in img.terms().keys() {
            rows.entry(*m).or_insert_with(|| {
                order.push(*m);
                order.len() - 1
            });
        }
    }
    let mut mat = Matrix::zeros(order.len(), index.len());
    for (j, img) in images.iter().enumerate() {
        for (m, &c) in img.terms() {
            mat.set(rows[m], j, c);
        }
    }
    if order.is_empty() {
        return (0..index.len())
            .map(|j| {
                let mut v = vec![0; index.len()];
                v[j] = 1;
                v
            })
            .collect();
    }
    mat.kernel(spec.pc())
}

fn span_index(d: &Derivation, degree_bound: u32) -> Result<MonomialIndex, QuotientError> {
    Ok(MonomialIndex::new(d.spec(), degree_bound)?)
}

fn map_basis(
    index: &MonomialIndex,
    f: impl Fn(&RingElem) -> RingElem + Sync + Send,
) -> Vec<RingElem> {
    par::map_range(0..index.len(), |i| f(&index.basis_element(i)))
}

/// `ker D` on the degree `<= d` span.
pub fn invariants_basis(
    d: &Derivation,
    degree_bound: u32,
) -> Result<GradedSubspace, QuotientError> {
    if d.is_zero() {
        return Err(DerivError::ZeroDerivation.into());
    }
    let index = span_index(d, degree_bound)?;
    let images = map_basis(&index, |m| d.apply(m));
    let ker = kernel_of(&index, &images, d.spec());
    Ok(subspace_from_rows(
        d,
        SubspaceLabel::Invariants,
        degree_bound,
        index,
        ker,
    ))
}

/// `f_k(D)(a)`, the component of `a` in the `k`-eigenspace.
pub fn eigen_project(d: &Derivation, a: &RingElem, k: u32) -> Result<RingElem, QuotientError> {
    d.require(DerivType::Multiplicative)?;
    let pc = d.pc();
    let k = k % pc.p();
    let f = &projector_polys(pc)[k as usize];
    let mut iterate = a.clone();
    let mut acc = d.spec().zero();
    for j in 0..pc.p() as usize {
        acc = acc.add(&iterate.scale(f.coeff(j)));
        if j + 1 < pc.p() as usize {
            iterate = d.apply(&iterate);
        }
    }
    let check = d.apply(&acc);
    if check != acc.scale(k) {
        return Err(QuotientError::Verification(format!(
            "D(f_{k}(D)({a})) = {check} is not {k} times {acc}"
        )));
    }
    Ok(acc)
}

fn require_stable(d: &Derivation, index: &MonomialIndex) -> Result<Vec<Vec<u32>>, QuotientError> {
    let images = map_basis(index, |m| d.apply(m));
    images
        .iter()
        .enumerate()
        .map(|(i, img)| {
            index.coords(img).ok_or_else(|| {
                QuotientError::UnsupportedStability(format!(
                    "D({}) = {img} leaves the span",
                    index.basis_element(i)
                ))
            })
        })
        .collect()
}

/// Basis of `{a : deg a <= d, D a = k a}`.
pub fn eigen_basis(
    d: &Derivation,
    degree_bound: u32,
    k: u32,
) -> Result<GradedSubspace, QuotientError> {
    d.require(DerivType::Multiplicative)?;
    let pc = d.pc();
    let k = k % pc.p();
    let index = span_index(d, degree_bound)?;
    let cols = require_stable(d, &index)?;
    let n = index.len();
    let mut mat = Matrix::zeros(n, n);
    for (j, col) in cols.iter().enumerate() {
        for (i, &c) in col.iter().enumerate() {
            mat.set(i, j, c);
        }
        mat.set(j, j, pc.sub(mat.get(j, j), k));
    }
    let ker = mat.kernel(pc);
    Ok(subspace_from_rows(
        d,
        SubspaceLabel::Eigen(k),
        degree_bound,
        index,
        ker,
    ))
}

/// Dimensions of all `p` eigenspaces and of the ambient span.
pub fn eigen_dimensions(
    d: &Derivation,
    degree_bound: u32,
) -> Result<(Vec<usize>, usize), QuotientError> {
    let p = d.spec().p();
    let dims = (0..p)
        .map(|k| eigen_basis(d, degree_bound, k).map(|s| s.dim()))
        .collect::<Result<Vec<_>, _>>()?;
    let total = span_index(d, degree_bound)?.len();
    Ok((dims, total))
}

/// `E_k = ker D^{k+1}` on the degree `<= d` span.
pub fn filtration_basis(
    d: &Derivation,
    degree_bound: u32,
    k: u32,
) -> Result<GradedSubspace, QuotientError> {
    d.require(DerivType::Additive)?;
    if k >= d.spec().p() {
        return Err(QuotientError::Precondition(format!(
            "filtration index {k} must be below p"
        )));
    }
    let index = span_index(d, degree_bound)?;
    let images = map_basis(&index, |m| d.iterate(m, k + 1));
    let ker = kernel_of(&index, &images, d.spec());
    Ok(subspace_from_rows(
        d,
        SubspaceLabel::Filtration(k),
        degree_bound,
        index,
        ker,
    ))
}

/// The chain `E_0 ⊆ E_1 ⊆ ... ⊆ E_{p-1}` with inclusion and strictness data.
#[derive(Debug, Clone)]
pub struct FiltrationChain {
    pub steps: Vec<GradedSubspace>,
    pub nested: bool,
    pub strict: Vec<bool>,
}

pub fn filtration_chain(
    d: &Derivation,
    degree_bound: u32,
) -> Result<FiltrationChain, QuotientError> {
    let p = d.spec().p();
    let steps = (0..p)
        .map(|k| filtration_basis(d, degree_bound, k))
        .collect::<Result<Vec<_>, _>>()?;
    let nested = steps
        .windows(2)
        .all(|w| w[0].basis.iter().all(|b| w[1].contains(b)));
    let strict = steps.windows(2).map(|w| w[1].dim() > w[0].dim()).collect();
    Ok(FiltrationChain {
        steps,
        nested,
        strict,
    })
}

/// The product `base_elem * g` when it stays in the span.
fn product_coords(index: &MonomialIndex, a: &RingElem, b: &RingElem) -> Option<Vec<u32>> {
    index.coords(&a.mul(b))
}

/// Greedy generators of `space` as a module over `base`, modulo `modulo`.
/// Candidates are taken in basis order; each accepted generator adds all of
/// its base multiples that stay inside the span.
pub fn module_generators(
    space: &GradedSubspace,
    base: &GradedSubspace,
    modulo: Option<&EchelonBasis>,
) -> Vec<RingElem> {
    let pc = space.ambient.pc();
    let mut span = modulo
        .cloned()
        .unwrap_or_else(|| EchelonBasis::new(space.index.len()));
    let mut gens = Vec::new();
    for cand in &space.basis {
        let v = space.index.coords(cand).expect("inside span");
        if span.contains(&v, pc) {
            continue;
        }
        gens.push(cand.clone());
        for b in &base.basis {
            if let Some(w) = product_coords(&space.index, b, cand) {
                span.insert(&w, pc);
            }
        }
    }
    gens
}

/// Which product map to analyse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapFamily {
    /// `L_k^{⊗m} -> L_{km}` for a multiplicative derivation.
    Sigma(u32),
    /// `E_1^{⊗m} -> E_m / E_{m-1}` for an additive derivation.
    Tau,
}

#[derive(Debug, Clone)]
pub struct SupportCheck {
    pub representative: RingElem,
    /// An invariant element `g^e` or `g * m` built from a fixed-locus generator with
    /// `g^e * representative` in the image, if one was found.
    pub annihilator: Option<RingElem>,
    /// Some candidate product stayed inside the degree bound. Classes near
    /// the bound may have every product leave the span; those are neither
    /// confirmed nor refuted.
    pub decidable: bool,
}

#[derive(Debug, Clone)]
pub struct MultMapReport {
    pub family: MapFamily,
    pub m: u32,
    pub degree_bound: u32,
    pub source_dim: usize,
    /// Dimension of the target (of the quotient `E_m/E_{m-1}` for `Tau`).
    pub target_dim: usize,
    pub image_dim: usize,
    /// Basis of a complement of the image in the target.
    pub cokernel: Vec<RingElem>,
    /// Generators of the cokernel over the invariant ring.
    pub cokernel_generators: Vec<RingElem>,
    pub support: Vec<SupportCheck>,
    image_span: EchelonBasis,
    index: MonomialIndex,
    pc: PrimeChar,
}

impl MultMapReport {
    /// Whether `a` lies in the image (plus `E_{m-1}` for `Tau`).
    pub fn image_contains(&self, a: &RingElem) -> bool {
        self.index
            .coords(a)
            .is_some_and(|v| self.image_span.contains(&v, &self.pc))
    }

    pub fn surjective(&self) -> bool {
        self.cokernel.is_empty()
    }

    pub fn support_ok(&self) -> bool {
        self.support
            .iter()
            .all(|s| s.annihilator.is_some() || !s.decidable)
    }
}

pub fn mult_map_analysis(
    d: &Derivation,
    family: MapFamily,
    m: u32,
    degree_bound: u32,
) -> Result<MultMapReport, QuotientError> {
    if m == 0 {
        return Err(QuotientError::Precondition(
            "tensor power must be positive".into(),
        ));
    }
    let p = d.spec().p();
    let pc = d.pc().clone();
    let (source, target, floor) = match family {
        MapFamily::Sigma(k) => {
            d.require(DerivType::Multiplicative)?;
            let source = eigen_basis(d, degree_bound, k)?;
            let target = eigen_basis(d, degree_bound, (k as u64 * m as u64 % p as u64) as u32)?;
            (source, target, None)
        }
        MapFamily::Tau => {
            d.require(DerivType::Additive)?;
            if m >= p {
                return Err(QuotientError::Precondition(format!("tau_{m} needs m < p")));
            }
            let source = filtration_basis(d, degree_bound, 1)?;
            let target = filtration_basis(d, degree_bound, m)?;
            let floor = filtration_basis(d, degree_bound, m - 1)?;
            (source, target, Some(floor))
        }
    };
    let index = target.index.clone();
    let n = index.len();

    // Iterated products: image_j = span(source * image_{j-1}).
    let mut layer: Vec<RingElem> = match family {
        MapFamily::Tau if m == 1 => source.basis.clone(),
        _ => source.basis.clone(),
    };
    for _ in 1..m {
        let products: Vec<Option<Vec<u32>>> =
            par::map_range(0..source.basis.len() * layer.len(), |ij| {
                let (i, j) = (ij / layer.len(), ij % layer.len());
                product_coords(&index, &source.basis[i], &layer[j])
            });
        let mut span = EchelonBasis::new(n);
        let mut next = Vec::new();
        for v in products.into_iter().flatten() {
            if span.insert(&v, &pc) {
                next.push(index.element(&v));
            }
        }
        layer = next;
    }

    let mut image_span = match &floor {
        Some(f) => f.echelon(),
        None => EchelonBasis::new(n),
    };
    let floor_dim = image_span.len();
    for e in &layer {
        image_span.insert(&index.coords(e).expect("inside span"), &pc);
    }
    let image_dim = image_span.len() - floor_dim;
    let target_dim = target.dim() - floor_dim;

    let mut complement = image_span.clone();
    let mut cokernel = Vec::new();
    for b in &target.basis {
        let v = index.coords(b).expect("inside span");
        if complement.insert(&v, &pc) {
            cokernel.push(b.clone());
        }
    }

    let invariants = invariants_basis(d, degree_bound)?;
    let coker_space = GradedSubspace {
        label: target.label,
        degree_bound,
        basis: cokernel.clone(),
        index: index.clone(),
        ambient: d.spec().clone(),
    };
    let cokernel_generators = module_generators(&coker_space, &invariants, Some(&image_span));

    // Invariant elements of the fixed ideal: powers g^e (e <= p) and
    // multiples g * m by span monomials.
    let mut annihilators: Vec<RingElem> = Vec::new();
    for g in d.fixed_locus().generators {
        let candidates = (1..=p as u64)
            .map(|e| g.pow(e))
            .chain((0..index.len()).map(|i| g.mul(&index.basis_element(i))));
        for c in candidates {
            if !c.is_zero() && d.apply(&c).is_zero() && !annihilators.contains(&c) {
                annihilators.push(c);
            }
        }
    }
    annihilators.sort_by_key(|a| (a.base_degree(), a.len()));
    let support = cokernel
        .iter()
        .map(|r| {
            let mut decidable = false;
            let mut found = None;
            for g in &annihilators {
                if let Some(v) = product_coords(&index, g, r) {
                    decidable = true;
                    if image_span.contains(&v, &pc) {
                        found = Some(g.clone());
                        break;
                    }
                }
            }
            SupportCheck {
                representative: r.clone(),
                annihilator: found,
                decidable,
            }
        })
        .collect();

    Ok(MultMapReport {
        family,
        m,
        degree_bound,
        source_dim: source.dim(),
        target_dim,
        image_dim,
        cokernel,
        cokernel_generators,
        support,
        image_span,
        index,
        pc,
    })
}

/// The section `z = sum b_k a^k` with `D z = 1`.
#[derive(Debug, Clone)]
pub struct ZSection {
    pub z: RingElem,
    /// `b_0, ..., b_{p-1}`; `b_0` is always zero.
    pub coeffs_b: Vec<RingElem>,
    /// `c_1, ..., c_{p-1}`.
    pub cs: Vec<RingElem>,
}

impl ZSection {
    pub fn checks(&self, d: &Derivation) -> Vec<IdentityRecord> {
        let p = d.spec().p();
        let mut out = vec![IdentityRecord::new("z_derivative", p).check("1", d.apply(&self.z))];
        for (k, b) in self.coeffs_b.iter().enumerate() {
            out.push(
                IdentityRecord::new("z_coefficient_invariant", p)
                    .param("k", k)
                    .check("0", d.apply(b)),
            );
        }
        out
    }

    pub fn is_valid(&self, d: &Derivation) -> bool {
        self.checks(d).iter().all(IdentityRecord::passed)
    }
}

/// Solves the triangular system for `z` with `D z = 1`, given `a` with
/// `D a` a unit.
pub fn z_construct(d: &Derivation, a: &RingElem) -> Result<ZSection, QuotientError> {
    d.require(DerivType::Additive)?;
    let spec = d.spec();
    if spec.truncation().is_none() {
        return Err(QuotientError::Precondition(
            "z construction needs a truncated ring".into(),
        ));
    }
    let pc = d.pc();
    let p = pc.p();
    let da = d.apply(a);
    let inv_da = da
        .invert_unit()
        .map_err(|_| QuotientError::Precondition(format!("D(a) = {da} is not a unit")))?;
    let mut cs = vec![inv_da.clone()];
    for _ in 2..p {
        let next = inv_da.mul(&d.apply(cs.last().expect("nonempty")));
        cs.push(next);
    }
    let mut b = vec![spec.zero(); p as usize];
    let a_pows: Vec<RingElem> = (0..p).map(|e| a.pow(e as u64)).collect();
    for nu in (1..p).rev() {
        let mut rhs = cs[nu as usize - 1].clone();
        for k in nu + 1..p {
            let ff = pc.falling(k, nu);
            rhs = rhs.sub(&b[k as usize].mul(&a_pows[(k - nu) as usize]).scale(ff));
        }
        b[nu as usize] = rhs.scale(pc.inv(pc.factorial(nu)));
    }
    let z = (1..p).fold(spec.zero(), |acc, k| {
        acc.add(&b[k as usize].mul(&a_pows[k as usize]))
    });
    Ok(ZSection { z, coeffs_b: b, cs })
}

/// Rank of `{b z^k}` over a basis `b` of the invariants, against the full
/// span dimension. Both are returned; a free power basis makes them equal.
pub fn z_power_rank(d: &Derivation, z: &RingElem) -> Result<(usize, usize), QuotientError> {
    let n = d
        .spec()
        .truncation()
        .ok_or_else(|| QuotientError::Precondition("needs a truncated ring".into()))?;
    let inv = invariants_basis(d, n - 1)?;
    let index = inv.index.clone();
    let p = d.spec().p();
    let mut span = EchelonBasis::new(index.len());
    let mut zk = d.spec().one();
    for _ in 0..p {
        for b in &inv.basis {
            if let Some(v) = index.coords(&b.mul(&zk)) {
                span.insert(&v, d.pc());
            }
        }
        zk = zk.mul(z);
    }
    Ok((span.len(), index.len()))
}

/// `z_a = D a + D^2 a + ... + D^{p-1} a`.
#[derive(Debug, Clone)]
pub struct ZaElement {
    pub z_a: RingElem,
    /// `D z_a = z_a` held.
    pub eigen_ok: bool,
    pub vanishes: bool,
}

pub fn za_element(d: &Derivation, a: &RingElem) -> Result<ZaElement, QuotientError> {
    d.require(DerivType::Multiplicative)?;
    let p = d.spec().p();
    let mut acc = d.spec().zero();
    let mut cur = a.clone();
    for _ in 1..p {
        cur = d.apply(&cur);
        acc = acc.add(&cur);
    }
    let eigen_ok = d.apply(&acc) == acc;
    Ok(ZaElement {
        vanishes: acc.is_zero(),
        z_a: acc,
        eigen_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag5() -> Derivation {
        let f = RingSpec::free(5, &["x", "y"]).unwrap();
        Derivation::diagonal(&f, &[1, 2]).unwrap()
    }

    fn t2ddt() -> Derivation {
        let r = RingSpec::builder(3, &["x", "y", "t"])
            .radical("t", "x")
            .build()
            .unwrap();
        Derivation::from_exprs(&r, &[("t", "t^2")]).unwrap()
    }

    #[test]
    fn invariants_examples() {
        assert_eq!(
            invariants_basis(&diag5(), 5).unwrap().to_string(),
            "{1, x*y^2, x^3*y, x^5, y^5}"
        );
        let f = RingSpec::free(3, &["x"]).unwrap();
        let dx = Derivation::from_exprs(&f, &[("x", "1")]).unwrap();
        assert_eq!(
            invariants_basis(&dx, 6).unwrap().to_string(),
            "{1, x^3, x^6}"
        );
        let inv = invariants_basis(&t2ddt(), 1).unwrap();
        assert_eq!(inv.to_string(), "{1, x, y}");
    }

    #[test]
    fn eigen_projection_examples() {
        let f = RingSpec::free(3, &["x"]).unwrap();
        let d = Derivation::from_exprs(&f, &[("x", "x")]).unwrap();
        let a = f.parse("1+x+x^2").unwrap();
        let parts: Vec<String> = (0..3)
            .map(|k| eigen_project(&d, &a, k).unwrap().to_string())
            .collect();
        assert_eq!(parts, ["1", "x", "x^2"]);
        let g = diag5();
        let xy = g.spec().parse("x*y").unwrap();
        for k in 0..5 {
            let r = eigen_project(&g, &xy, k).unwrap();
            assert_eq!(r.is_zero(), k != 3);
        }
        assert!(matches!(
            eigen_project(&t2ddt(), &xy_in(&t2ddt()), 0),
            Err(QuotientError::Deriv(_))
        ));
    }

    fn xy_in(d: &Derivation) -> RingElem {
        d.spec().parse("x*y").unwrap()
    }

    #[test]
    fn eigen_basis_examples() {
        let f = RingSpec::free(3, &["x"]).unwrap();
        let d = Derivation::from_exprs(&f, &[("x", "x")]).unwrap();
        assert_eq!(eigen_basis(&d, 4, 1).unwrap().to_string(), "{x, x^4}");
        assert_eq!(
            eigen_basis(&diag5(), 3, 0).unwrap().to_string(),
            "{1, x*y^2}"
        );
        let (dims, total) = eigen_dimensions(&diag5(), 10).unwrap();
        assert_eq!(total, 66);
        assert_eq!(dims.iter().sum::<usize>(), 66);
        let raising = Derivation::from_exprs(&f, &[("x", "x+x^2")]).unwrap();
        assert_eq!(raising.dtype(), DerivType::Multiplicative);
        assert!(matches!(
            eigen_basis(&raising, 1, 1),
            Err(QuotientError::UnsupportedStability(_))
        ));
        assert!(eigen_project(&raising, &f.var(0), 1).is_ok());
    }

    #[test]
    fn filtration_examples() {
        let d = t2ddt();
        let e1 = filtration_basis(&d, 2, 1).unwrap();
        let e0 = invariants_basis(&d, 2).unwrap();
        let gens = module_generators(&e1, &e0, None);
        let g: Vec<String> = gens.iter().map(ToString::to_string).collect();
        assert_eq!(g, ["1", "t^2"]);
        let e2 = filtration_basis(&d, 2, 2).unwrap();
        assert_eq!(e2.dim(), e2.ambient_dim());
        let f = RingSpec::free(3, &["x"]).unwrap();
        let dx = Derivation::from_exprs(&f, &[("x", "1")]).unwrap();
        let chain = filtration_chain(&dx, 2).unwrap();
        let shown: Vec<String> = chain.steps.iter().map(ToString::to_string).collect();
        assert_eq!(shown, ["{1}", "{1, x}", "{1, x, x^2}"]);
        assert!(chain.nested);
        assert!(chain.strict.iter().all(|&s| s));
    }

    #[test]
    fn tau_two_is_not_surjective() {
        let d = t2ddt();
        let r = mult_map_analysis(&d, MapFamily::Tau, 2, 3).unwrap();
        let gens: Vec<String> = r
            .cokernel_generators
            .iter()
            .map(ToString::to_string)
            .collect();
        assert_eq!(gens, ["t"]);
        let spec = d.spec();
        assert!(r.image_contains(&spec.parse("x*t").unwrap()));
        assert!(r.image_contains(&spec.parse("x*y*t").unwrap()));
        assert!(!r.image_contains(&spec.parse("t").unwrap()));
        assert!(!r.image_contains(&spec.parse("y*t").unwrap()));
        assert!(r.support_ok());
        assert!(r
            .support
            .iter()
            .any(|s| s.annihilator.as_ref().is_some_and(|a| a.to_string() == "x")));
    }

    #[test]
    fn sigma_maps() {
        let f = RingSpec::free(3, &["x"]).unwrap();
        let d = Derivation::from_exprs(&f, &[("x", "x")]).unwrap();
        let r = mult_map_analysis(&d, MapFamily::Sigma(1), 2, 8).unwrap();
        assert!(r.surjective());
        let id = mult_map_analysis(&diag5(), MapFamily::Sigma(2), 1, 6).unwrap();
        assert!(id.surjective());
        assert_eq!(id.image_dim, id.source_dim);
    }

    #[test]
    fn z_examples() {
        let tr = RingSpec::builder(3, &["x"]).truncate(9).build().unwrap();
        let d = Derivation::from_exprs(&tr, &[("x", "1+x^3")]).unwrap();
        let x = tr.var(0);
        let zs = z_construct(&d, &x).unwrap();
        assert!(zs.is_valid(&d));
        let expected = x.mul(&tr.parse("1+x^3").unwrap().invert_unit().unwrap());
        assert_eq!(zs.z, expected);
        assert!(zs.coeffs_b[2].is_zero());
        assert_eq!(z_power_rank(&d, &zs.z).unwrap(), (9, 9));
        let tr7 = RingSpec::builder(7, &["x"]).truncate(21).build().unwrap();
        let dx = Derivation::from_exprs(&tr7, &[("x", "1")]).unwrap();
        let zs = z_construct(&dx, &tr7.var(0)).unwrap();
        assert_eq!(zs.z, tr7.var(0));
        assert!(zs.coeffs_b[1].is_one());
    }

    #[test]
    fn za_examples() {
        let f = RingSpec::free(3, &["x"]).unwrap();
        let d = Derivation::from_exprs(&f, &[("x", "x")]).unwrap();
        let za = za_element(&d, &f.var(0)).unwrap();
        assert_eq!(za.z_a.to_string(), "2*x");
        assert!(za.eigen_ok);
        assert!(za_element(&d, &f.one()).unwrap().vanishes);
        let g = diag5();
        let zy = za_element(&g, &g.spec().var(1)).unwrap();
        assert!(zy.vanishes && zy.eigen_ok);
    }
}
