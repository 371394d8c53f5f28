//! Plane vector fields `P d/dx + Q d/dy` over `F_p` and their lifts under the
//! blowup of the origin.
//!
//! Chart 1 uses `x = u, y = u v` and chart 2 uses `x = u v, y = v`. Lifted
//! fields live in `F_p[u, v]`.

use crate::deriv::{DerivError, DerivType, Derivation};
use crate::modp::PrimeChar;
use crate::ring::{Monomial, RingElem, RingError, RingSpec};
use serde_json::{json, Value};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BlowupError {
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Deriv(#[from] DerivError),
    #[error("{0}")]
    Precondition(String),
    #[error("internal error: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlaneField {
    p_coeff: RingElem,
    q_coeff: RingElem,
}

/// Canonical diagonal form `(a, b)` up to unit scaling and swapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tag(pub u32, pub u32);

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.0, self.1)
    }
}

impl PlaneField {
    /// `p d/dx + q d/dy` on a two-variable polynomial ring.
    pub fn new(p: RingElem, q: RingElem) -> Result<Self, BlowupError> {
        let spec = p.spec();
        if !q.spec().same(spec) {
            return Err(BlowupError::Precondition(
                "coefficients live in different rings".into(),
            ));
        }
        let plain = spec.nvars() == 2
            && spec.radical_var().is_none()
            && spec.crossing().is_none()
            && spec.truncation().is_none()
            && !spec.is_localized();
        if !plain {
            return Err(BlowupError::Precondition(
                "plane fields need a free ring in two variables".into(),
            ));
        }
        Ok(PlaneField {
            p_coeff: p,
            q_coeff: q,
        })
    }

    pub fn from_exprs(p: u32, px: &str, qy: &str) -> Result<Self, BlowupError> {
        let spec = RingSpec::free(p, &["x", "y"])?;
        Self::new(spec.parse(px)?, spec.parse(qy)?)
    }

    /// `a x d/dx + b y d/dy`.
    pub fn diagonal(p: u32, a: u32, b: u32) -> Result<Self, BlowupError> {
        let spec = RingSpec::free(p, &["x", "y"])?;
        Self::new(spec.var(0).scale(a), spec.var(1).scale(b))
    }

    pub fn spec(&self) -> &RingSpec {
        self.p_coeff.spec()
    }

    pub fn pc(&self) -> &PrimeChar {
        self.spec().pc()
    }

    pub fn p_coeff(&self) -> &RingElem {
        &self.p_coeff
    }

    pub fn q_coeff(&self) -> &RingElem {
        &self.q_coeff
    }

    pub fn is_zero(&self) -> bool {
        self.p_coeff.is_zero() && self.q_coeff.is_zero()
    }

    /// Rows are `P` and `Q`, columns the coefficients of the two variables.
    pub fn linear_part(&self) -> [[u32; 2]; 2] {
        let lin = |e: &RingElem| [e.coeff(&Monomial::var(0)), e.coeff(&Monomial::var(1))];
        [lin(&self.p_coeff), lin(&self.q_coeff)]
    }

    pub fn derivation(&self) -> Result<Derivation, BlowupError> {
        Ok(Derivation::new(
            self.spec(),
            vec![self.p_coeff.clone(), self.q_coeff.clone()],
        )?)
    }

    pub fn origin_fixed(&self) -> bool {
        self.p_coeff.constant_term() == 0 && self.q_coeff.constant_term() == 0
    }

    /// The field in coordinates centred at `(a, b)`.
    pub fn translate(&self, a: u32, b: u32) -> Result<PlaneField, BlowupError> {
        let spec = self.spec();
        let images = [
            spec.var(0).add(&spec.constant(a)),
            spec.var(1).add(&spec.constant(b)),
        ];
        Ok(PlaneField {
            p_coeff: self.p_coeff.substitute(&images)?,
            q_coeff: self.q_coeff.substitute(&images)?,
        })
    }

    /// `(a, b)` when the field is exactly `a x d/dx + b y d/dy`.
    pub fn diagonal_weights(&self) -> Option<(u32, u32)> {
        let weight = |e: &RingElem, i: usize| -> Option<u32> {
            match e.len() {
                0 => Some(0),
                1 => {
                    let c = e.coeff(&Monomial::var(i));
                    (c != 0).then_some(c)
                }
                _ => None,
            }
        };
        Some((weight(&self.p_coeff, 0)?, weight(&self.q_coeff, 1)?))
    }

    pub fn normal_form_tag(&self) -> Option<Tag> {
        let (a, b) = self.diagonal_weights()?;
        let pc = self.pc();
        [(a, b), (b, a)]
            .into_iter()
            .filter(|&(first, _)| first != 0)
            .map(|(first, second)| Tag(1, pc.mul(pc.inv(first), second)))
            .min()
    }

    /// Lifts to both charts of the blowup of the origin.
    pub fn lift_to_charts(&self) -> Result<(PlaneField, PlaneField), BlowupError> {
        if !self.origin_fixed() {
            return Err(BlowupError::Precondition(
                "the origin is not a fixed point".into(),
            ));
        }
        let target = RingSpec::free(self.spec().p(), &["u", "v"])?;
        let (u, v) = (target.var(0), target.var(1));
        let uv = u.mul(&v);
        let exact = |num: RingElem, den: &RingElem| {
            num.div_exact(den).ok_or_else(|| {
                BlowupError::Internal(format!("exceptional factor does not divide {num}"))
            })
        };

        let first = [u.clone(), uv.clone()];
        let (p1, q1) = (
            self.p_coeff.substitute(&first)?,
            self.q_coeff.substitute(&first)?,
        );
        let dv = exact(u.mul(&q1).sub(&uv.mul(&p1)), &u.mul(&u))?;
        let chart1 = PlaneField::new(p1, dv)?;

        let second = [uv.clone(), v.clone()];
        let (p2, q2) = (
            self.p_coeff.substitute(&second)?,
            self.q_coeff.substitute(&second)?,
        );
        let du = exact(v.mul(&p2).sub(&uv.mul(&q2)), &v.mul(&v))?;
        let chart2 = PlaneField::new(du, q2)?;
        Ok((chart1, chart2))
    }

    pub fn fixed_points(&self) -> FixedPoints {
        let (p, q) = (&self.p_coeff, &self.q_coeff);
        // residual_fixed: the origin is still a zero once the common factor
        // is divided out
        let (divisorial, residual_fixed) = match (p.is_zero(), q.is_zero()) {
            (true, true) => (None, false),
            (true, false) => (Some(q.clone()), false),
            (false, true) => (Some(p.clone()), false),
            (false, false) => {
                let m = monomial_content(p).gcd(&monomial_content(q));
                let fixed = p.coeff(&m) == 0 && q.coeff(&m) == 0;
                ((!m.is_one()).then(|| self.spec().monomial(m, 1)), fixed)
            }
        };
        let pc = self.pc();
        let spec = self.spec();
        let mut rational = Vec::new();
        for a in 0..pc.p() {
            for b in 0..pc.p() {
                let pt = [spec.constant(a), spec.constant(b)];
                let zero = |e: &RingElem| e.substitute(&pt).map(|v| v.is_zero()).unwrap_or(false);
                if zero(p) && zero(q) {
                    rational.push((a, b));
                }
            }
        }
        FixedPoints {
            ideal: (p.to_string(), q.to_string()),
            origin_fixed: self.origin_fixed(),
            divisorial: divisorial.map(|d| d.to_string()),
            isolated_at_origin: self.origin_fixed() && residual_fixed,
            rational_zeros: rational,
        }
    }
}

impl fmt::Display for PlaneField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let vars = self.spec().vars();
        write!(
            f,
            "({})*d/d{}+({})*d/d{}",
            self.p_coeff, vars[0], self.q_coeff, vars[1]
        )
    }
}

/// The largest monomial dividing every term.
fn monomial_content(e: &RingElem) -> Monomial {
    let mut it = e.terms().keys();
    let first = *it.next().expect("nonzero");
    it.fold(first, |acc, m| acc.gcd(m))
}

trait MonomialGcd {
    fn gcd(&self, other: &Monomial) -> Monomial;
}

impl MonomialGcd for Monomial {
    fn gcd(&self, other: &Monomial) -> Monomial {
        let exps: Vec<u32> = self
            .exponents()
            .iter()
            .zip(other.exponents())
            .map(|(a, b)| *a.min(b))
            .collect();
        Monomial::from_exponents(&exps)
    }
}

/// Zero set data of a plane field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedPoints {
    pub ideal: (String, String),
    pub origin_fixed: bool,
    /// Common factor of the coefficients: the whole nonzero coefficient when
    /// the other vanishes, otherwise their monomial content.
    pub divisorial: Option<String>,
    /// The origin remains a zero after removing the divisorial part.
    pub isolated_at_origin: bool,
    /// All zeros in `F_p^2`.
    pub rational_zeros: Vec<(u32, u32)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeStatus {
    FixedAtOrigin,
    NotFixed,
}

impl fmt::Display for NodeStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeStatus::FixedAtOrigin => "fixed",
            NodeStatus::NotFixed => "not_fixed",
        })
    }
}

#[derive(Debug, Clone)]
pub struct BlowupNode {
    pub field: PlaneField,
    pub chart_path: Vec<u8>,
    pub status: NodeStatus,
    pub tag: Option<Tag>,
    pub isolated: bool,
    /// The tag already occurred on the path from the root.
    pub cycle: bool,
    pub children: Vec<BlowupNode>,
}

impl BlowupNode {
    fn depth(&self) -> usize {
        self.chart_path.len()
    }

    fn walk<'a>(&'a self, out: &mut Vec<&'a BlowupNode>) {
        out.push(self);
        for c in &self.children {
            c.walk(out);
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "chart_path": self.chart_path,
            "field": {"P": self.field.p_coeff.to_string(), "Q": self.field.q_coeff.to_string()},
            "tag": self.tag.map(|t| t.to_string()),
            "status": self.status.to_string(),
            "isolated": self.isolated,
            "cycle": self.cycle,
            "children": self.children.iter().map(BlowupNode::to_json).collect::<Vec<_>>(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct BlowupTree {
    pub root: BlowupNode,
    pub max_depth: usize,
    pub dtype: DerivType,
}

impl BlowupTree {
    pub fn nodes(&self) -> Vec<&BlowupNode> {
        let mut out = Vec::new();
        self.root.walk(&mut out);
        out
    }

    /// Smallest depth of a node whose tag repeats an ancestor's.
    pub fn cycle_depth(&self) -> Option<usize> {
        self.nodes()
            .iter()
            .filter(|n| n.cycle)
            .map(|n| n.depth())
            .min()
    }

    /// No node still has an isolated fixed origin at the depth limit.
    pub fn terminated(&self) -> bool {
        !self
            .nodes()
            .iter()
            .any(|n| n.isolated && n.children.is_empty())
    }

    /// Depth of the deepest node.
    pub fn depth(&self) -> usize {
        self.nodes().iter().map(|n| n.depth()).max().unwrap_or(0)
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        for n in self.nodes() {
            let path: Vec<String> = n.chart_path.iter().map(u8::to_string).collect();
            s.push_str(&format!(
                "{}[{}] P={} Q={} tag={} {}{}{}\n",
                "  ".repeat(n.depth()),
                path.join(","),
                n.field.p_coeff,
                n.field.q_coeff,
                n.tag.map_or("-".to_string(), |t| t.to_string()),
                n.status,
                if n.isolated { " isolated" } else { "" },
                if n.cycle { " cycle" } else { "" },
            ));
        }
        s
    }
}

/// Blows up every isolated fixed origin up to `max_depth`, recording tag
/// repetitions along each branch.
pub fn blowup_tree(field: &PlaneField, max_depth: usize) -> Result<BlowupTree, BlowupError> {
    if field.is_zero() {
        return Err(DerivError::ZeroDerivation.into());
    }
    let dtype = field.derivation()?.dtype();
    if !matches!(dtype, DerivType::Additive | DerivType::Multiplicative) {
        return Err(BlowupError::Precondition(format!(
            "field is of type {dtype}"
        )));
    }
    let root = expand(field.clone(), Vec::new(), &[], max_depth)?;
    Ok(BlowupTree {
        root,
        max_depth,
        dtype,
    })
}

fn expand(
    field: PlaneField,
    path: Vec<u8>,
    ancestors: &[Tag],
    max_depth: usize,
) -> Result<BlowupNode, BlowupError> {
    let tag = field.normal_form_tag();
    let isolated = field.fixed_points().isolated_at_origin;
    let cycle = tag.is_some_and(|t| ancestors.contains(&t));
    let status = if field.origin_fixed() {
        NodeStatus::FixedAtOrigin
    } else {
        NodeStatus::NotFixed
    };
    let mut children = Vec::new();
    if isolated && path.len() < max_depth {
        let (c1, c2) = field.lift_to_charts()?;
        let mut seen = ancestors.to_vec();
        seen.extend(tag);
        for (chart, f) in [(1u8, c1), (2u8, c2)] {
            let mut p = path.clone();
            p.push(chart);
            children.push(expand(f, p, &seen, max_depth)?);
        }
    }
    Ok(BlowupNode {
        field,
        chart_path: path,
        status,
        tag,
        isolated,
        cycle,
        children,
    })
}
