//! Residue arithmetic mod a small prime, plus the combinatorial identities
//! that the quotient constructions rest on. The subset-counting oracle for
//! `d_k(nu)` lives here too.
//!
//! Identity sums are accumulated in [`BigInt`] and reduced mod `p` only at the
//! end, so "is zero" and "is zero mod p" stay distinguishable.

use crate::linalg::Matrix;
use crate::par;
use crate::report::{IdentityRecord, Status};
use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;
use thiserror::Error;

pub const MAX_PRIME: u32 = 31;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModpError {
    #[error("{0} is not a prime")]
    NotPrime(u32),
    #[error("prime {0} outside the supported range 2..={MAX_PRIME}")]
    OutOfRange(u32),
    #[error("matrix of size {size} is degenerate for p = {p}")]
    DegenerateSize { p: u32, size: usize },
    #[error("parameter {name} = {value} out of range for p = {p}")]
    BadParameter {
        name: &'static str,
        value: i64,
        p: u32,
    },
    #[error("internal inconsistency: {0}")]
    Inconsistent(String),
}

/// The ambient characteristic: a validated prime with cached factorials and
/// inverses.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PrimeChar {
    p: u32,
    factorials: Vec<u32>,
    inverses: Vec<u32>,
}

fn is_prime(n: u32) -> bool {
    n >= 2
        && (2..n)
            .take_while(|d| d * d <= n)
            .all(|d| !n.is_multiple_of(d))
}

impl PrimeChar {
    pub fn new(p: u32) -> Result<Self, ModpError> {
        if !(2..=MAX_PRIME).contains(&p) {
            return Err(ModpError::OutOfRange(p));
        }
        if !is_prime(p) {
            return Err(ModpError::NotPrime(p));
        }
        let mut factorials = vec![1u32; p as usize];
        for k in 1..p as usize {
            factorials[k] = (factorials[k - 1] as u64 * k as u64 % p as u64) as u32;
        }
        let mut inverses = vec![0u32; p as usize];
        for k in 1..p {
            inverses[k as usize] = pow_mod(k, p - 2, p);
        }
        Ok(PrimeChar {
            p,
            factorials,
            inverses,
        })
    }

    #[inline]
    pub fn p(&self) -> u32 {
        self.p
    }

    #[inline]
    pub fn add(&self, a: u32, b: u32) -> u32 {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u32, b: u32) -> u32 {
        if a >= b {
            a - b
        } else {
            a + self.p - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u32) -> u32 {
        if a == 0 {
            0
        } else {
            self.p - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        a * b % self.p
    }

    /// Multiplicative inverse. Panics on zero.
    #[inline]
    pub fn inv(&self, a: u32) -> u32 {
        assert!(!a.is_multiple_of(self.p), "inverse of zero mod {}", self.p);
        self.inverses[(a % self.p) as usize]
    }

    pub fn pow(&self, a: u32, e: u64) -> u32 {
        let mut base = a % self.p;
        let mut e = e;
        let mut acc = 1 % self.p;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    pub fn reduce(&self, x: i64) -> u32 {
        x.rem_euclid(self.p as i64) as u32
    }

    pub fn reduce_big(&self, x: &BigInt) -> u32 {
        let p = BigInt::from(self.p);
        let r = ((x % &p) + &p) % &p;
        r.to_u32().expect("residue fits")
    }

    /// `k! mod p` for `0 <= k < p`.
    pub fn factorial(&self, k: u32) -> u32 {
        self.factorials[k as usize]
    }

    /// Falling factorial `k (k-1) ... (k-nu+1) mod p`.
    pub fn falling(&self, k: u32, nu: u32) -> u32 {
        (0..nu).fold(1, |acc, i| self.mul(acc, self.reduce(k as i64 - i as i64)))
    }

    /// Canonical representative with a signed alias when it reads better,
    /// e.g. `4(≡-1)` for `p = 5`.
    pub fn signed(&self, v: u32) -> String {
        let v = v % self.p;
        if v > self.p / 2 && self.p > 2 {
            format!("{}(≡-{})", v, self.p - v)
        } else {
            v.to_string()
        }
    }
}

fn pow_mod(a: u32, e: u32, p: u32) -> u32 {
    let mut acc = 1u64;
    let mut base = a as u64 % p as u64;
    let mut e = e;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base % p as u64;
        }
        base = base * base % p as u64;
        e >>= 1;
    }
    acc as u32
}

/// Dense univariate polynomial over `Z/p`, lowest degree first, trailing
/// zeros trimmed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ZpPoly {
    coeffs: Vec<u32>,
}

impl ZpPoly {
    pub fn new(mut coeffs: Vec<u32>) -> Self {
        while coeffs.last() == Some(&0) {
            coeffs.pop();
        }
        ZpPoly { coeffs }
    }

    pub fn from_i64(coeffs: &[i64], pc: &PrimeChar) -> Self {
        ZpPoly::new(coeffs.iter().map(|&c| pc.reduce(c)).collect())
    }

    pub fn zero() -> Self {
        ZpPoly { coeffs: Vec::new() }
    }

    pub fn constant(c: u32) -> Self {
        ZpPoly::new(vec![c])
    }

    /// `x - a`.
    pub fn linear(a: u32, pc: &PrimeChar) -> Self {
        ZpPoly::new(vec![pc.neg(a), 1])
    }

    pub fn coeffs(&self) -> &[u32] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> u32 {
        self.coeffs.get(i).copied().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn add(&self, other: &ZpPoly, pc: &PrimeChar) -> ZpPoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        ZpPoly::new(
            (0..n)
                .map(|i| pc.add(self.coeff(i), other.coeff(i)))
                .collect(),
        )
    }

    pub fn sub(&self, other: &ZpPoly, pc: &PrimeChar) -> ZpPoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        ZpPoly::new(
            (0..n)
                .map(|i| pc.sub(self.coeff(i), other.coeff(i)))
                .collect(),
        )
    }

    pub fn scale(&self, c: u32, pc: &PrimeChar) -> ZpPoly {
        ZpPoly::new(self.coeffs.iter().map(|&a| pc.mul(a, c)).collect())
    }

    pub fn mul(&self, other: &ZpPoly, pc: &PrimeChar) -> ZpPoly {
        if self.is_zero() || other.is_zero() {
            return ZpPoly::zero();
        }
        let mut out = vec![0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] = pc.add(out[i + j], pc.mul(a, b));
            }
        }
        ZpPoly::new(out)
    }

    pub fn pow(&self, e: u32, pc: &PrimeChar) -> ZpPoly {
        (0..e).fold(ZpPoly::constant(1 % pc.p()), |acc, _| acc.mul(self, pc))
    }

    pub fn derivative(&self, pc: &PrimeChar) -> ZpPoly {
        ZpPoly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &c)| pc.mul(c, pc.reduce(i as i64)))
                .collect(),
        )
    }

    pub fn eval(&self, x: u32, pc: &PrimeChar) -> u32 {
        self.coeffs
            .iter()
            .rev()
            .fold(0, |acc, &c| pc.add(pc.mul(acc, x), c))
    }

    /// Euclidean division; returns `(quotient, remainder)`.
    pub fn div_rem(&self, divisor: &ZpPoly, pc: &PrimeChar) -> (ZpPoly, ZpPoly) {
        let dd = divisor.degree().expect("division by zero polynomial");
        let lead_inv = pc.inv(divisor.coeffs[dd]);
        let mut rem = self.coeffs.clone();
        let mut quot = vec![0; self.coeffs.len().saturating_sub(dd).max(1)];
        while rem.len() > dd && !rem.is_empty() {
            let top = rem.len() - 1;
            let c = pc.mul(rem[top], lead_inv);
            let shift = top - dd;
            quot[shift] = c;
            for (i, &d) in divisor.coeffs.iter().enumerate() {
                rem[shift + i] = pc.sub(rem[shift + i], pc.mul(c, d));
            }
            while rem.last() == Some(&0) {
                rem.pop();
            }
        }
        (ZpPoly::new(quot), ZpPoly::new(rem))
    }

    /// Monic gcd.
    pub fn gcd(&self, other: &ZpPoly, pc: &PrimeChar) -> ZpPoly {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let (_, r) = a.div_rem(&b, pc);
            a = b;
            b = r;
        }
        match a.degree() {
            None => a,
            Some(d) => {
                let inv = pc.inv(a.coeffs[d]);
                a.scale(inv, pc)
            }
        }
    }
}

impl fmt::Display for ZpPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        let mut first = true;
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c == 0 {
                continue;
            }
            if !first {
                f.write_str("+")?;
            }
            first = false;
            match (i, c) {
                (0, c) => write!(f, "{c}")?,
                (1, 1) => f.write_str("x")?,
                (1, c) => write!(f, "{c}*x")?,
                (i, 1) => write!(f, "x^{i}")?,
                (i, c) => write!(f, "{c}*x^{i}")?,
            }
        }
        Ok(())
    }
}

/// `C(n, k) mod p` by Lucas' theorem.
pub fn binomial_mod(n: u64, k: u64, pc: &PrimeChar) -> u32 {
    if k > n {
        return 0;
    }
    let p = pc.p() as u64;
    let (mut n, mut k) = (n, k);
    let mut acc = 1u32;
    while k > 0 || n > 0 {
        let (ni, ki) = ((n % p) as u32, (k % p) as u32);
        if ki > ni {
            return 0;
        }
        let den = pc.mul(pc.factorial(ki), pc.factorial(ni - ki));
        acc = pc.mul(acc, pc.mul(pc.factorial(ni), pc.inv(den)));
        n /= p;
        k /= p;
    }
    acc
}

/// Exact binomial coefficient.
pub fn binomial_exact(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// The projectors `f_k(x) = -prod_{i != k} (x - i)` for `k = 0..p-1`.
pub fn projector_polys(pc: &PrimeChar) -> Vec<ZpPoly> {
    (0..pc.p())
        .map(|k| {
            let prod = (0..pc.p())
                .filter(|&i| i != k)
                .fold(ZpPoly::constant(1), |acc, i| {
                    acc.mul(&ZpPoly::linear(i, pc), pc)
                });
            prod.scale(pc.neg(1), pc)
        })
        .collect()
}

/// Checks the polynomial identities behind the eigenspace decomposition
/// on the standard projectors.
pub fn projector_identity_suite(pc: &PrimeChar) -> Vec<IdentityRecord> {
    projector_identity_suite_with(pc, &projector_polys(pc))
}

/// Same checks on a caller-supplied projector table.
pub fn projector_identity_suite_with(pc: &PrimeChar, polys: &[ZpPoly]) -> Vec<IdentityRecord> {
    let p = pc.p();
    let mut out = Vec::new();

    let sum = polys.iter().fold(ZpPoly::zero(), |acc, f| acc.add(f, pc));
    out.push(IdentityRecord::new("projector_sum", p).check("1", &sum));

    let derivative_ok = polys.len() == p as usize
        && polys.iter().enumerate().all(|(k, f)| {
            let expected = if p == 2 {
                ZpPoly::constant(1)
            } else {
                ZpPoly::linear(k as u32, pc).pow(p - 2, pc)
            };
            f.derivative(pc) == expected
        });
    out.push(IdentityRecord::new("projector_derivative", p).outcome(
        "(x-k)^(p-2)",
        if derivative_ok {
            "(x-k)^(p-2)"
        } else {
            "mismatch"
        },
        Status::from_bool(derivative_ok),
    ));

    let g = (0..p).fold(ZpPoly::zero(), |acc, k| {
        let term = if p == 2 {
            ZpPoly::constant(1)
        } else {
            ZpPoly::linear(k, pc).pow(p - 2, pc)
        };
        acc.add(&term, pc)
    });
    out.push(IdentityRecord::new("projector_derivative_sum", p).check("0", &g));

    let frob = ZpPoly::new({
        let mut c = vec![0; p as usize + 1];
        c[p as usize] = 1;
        c[1] = pc.neg(1);
        c
    });
    let neg_frob = frob.scale(pc.neg(1), pc);
    let products: Vec<ZpPoly> = polys
        .iter()
        .enumerate()
        .map(|(k, f)| ZpPoly::linear(k as u32, pc).mul(f, pc))
        .collect();
    let annihilate_ok = polys.len() == p as usize && products.iter().all(|g| *g == neg_frob);
    out.push(IdentityRecord::new("projector_annihilator", p).outcome(
        "-(x^p-x)",
        if annihilate_ok {
            "-(x^p-x)"
        } else {
            "mismatch"
        },
        Status::from_bool(annihilate_ok),
    ));
    // The unsigned form (x-k) f_k = x^p - x only holds when -1 = 1.
    let unsigned = products.iter().all(|g| *g == frob);
    out.push(
        IdentityRecord::new("projector_annihilator_unsigned", p).outcome(
            "x^p-x",
            if unsigned { "x^p-x" } else { "-(x^p-x)" },
            Status::Info,
        ),
    );
    out
}

/// Both evaluations of the `(p-1) x (p-1)` power matrix `A[s][k] = k^s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VandermondeDet {
    pub row_reduction: u32,
    /// `prod_k k * prod_{i<j} (j - i)`: the Vandermonde product with the
    /// column scaling that row `s = 1` introduces.
    pub product_formula: u32,
    /// `prod_{i<j} (i - j)`, the bare alternant; equal to the determinant up
    /// to the unit `-(-1)^{C(p-1,2)}`.
    pub bare_alternant: u32,
}

pub fn vandermonde_det(pc: &PrimeChar) -> Result<VandermondeDet, ModpError> {
    let p = pc.p();
    if p == 2 {
        return Err(ModpError::DegenerateSize { p, size: 1 });
    }
    let n = (p - 1) as usize;
    let rows = (1..=n as u32)
        .map(|s| (1..=n as u32).map(|k| pc.pow(k, s as u64)).collect())
        .collect();
    let row_reduction = Matrix::from_rows(rows).det(pc);

    let mut alternant_up = 1;
    let mut alternant_down = 1;
    for i in 1..=n as u32 {
        for j in i + 1..=n as u32 {
            alternant_up = pc.mul(alternant_up, j - i);
            alternant_down = pc.mul(alternant_down, pc.sub(i, j));
        }
    }
    let product_formula = pc.mul(pc.factorial(p - 1), alternant_up);
    Ok(VandermondeDet {
        row_reduction,
        product_formula,
        bare_alternant: alternant_down,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedSum {
    /// `sum_{s=1}^k (-1)^s (2s-1) C(k,s)`.
    pub exact: BigInt,
    pub residue: u32,
    /// `sum_{s=1}^k (-1)^s C(k,s)`, always `-1`.
    pub alternating: BigInt,
    /// `sum_{s=1}^k (-1)^s s C(k,s)`, zero for `k >= 2`.
    pub first_moment: BigInt,
}

pub fn weighted_binom_sum(k: u64, pc: &PrimeChar) -> Result<WeightedSum, ModpError> {
    if k == 0 {
        return Err(ModpError::BadParameter {
            name: "k",
            value: 0,
            p: pc.p(),
        });
    }
    let mut exact = BigInt::zero();
    let mut alternating = BigInt::zero();
    let mut first_moment = BigInt::zero();
    for s in 1..=k {
        let sign = if s % 2 == 0 {
            BigInt::one()
        } else {
            -BigInt::one()
        };
        let b = binomial_exact(k, s) * &sign;
        exact += &b * BigInt::from(2 * s - 1);
        first_moment += &b * BigInt::from(s);
        alternating += b;
    }
    let residue = pc.reduce_big(&exact);
    Ok(WeightedSum {
        exact,
        residue,
        alternating,
        first_moment,
    })
}

/// Table `counts[nu][r]` = number of `nu`-subsets of `{1, ..., p-1}` whose sum
/// is `r mod p`, by exhaustive enumeration of all `2^(p-1)` subsets.
pub fn subset_count_table(pc: &PrimeChar) -> Vec<Vec<u64>> {
    let p = pc.p() as usize;
    let n = p - 1;
    let width = p;
    par::fold_chunks(
        1u64 << n,
        || vec![0u64; (n + 1) * width],
        |acc, mask| {
            let mut sum = 0usize;
            let mut m = mask;
            while m != 0 {
                let bit = m.trailing_zeros() as usize;
                sum += bit + 1;
                m &= m - 1;
            }
            acc[mask.count_ones() as usize * width + sum % p] += 1;
        },
        |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
            a
        },
    )
    .chunks(width)
    .map(<[u64]>::to_vec)
    .collect()
}

/// `d_k(nu)`: strictly increasing `nu`-tuples from `{1, ..., p-1}` with sum
/// `= -k mod p`, counted by exhaustive enumeration.
pub fn subset_count(pc: &PrimeChar, nu: u32, k: u32) -> Result<u64, ModpError> {
    if nu > pc.p() - 1 {
        return Err(ModpError::BadParameter {
            name: "nu",
            value: nu as i64,
            p: pc.p(),
        });
    }
    let table = subset_count_table(pc);
    let target = pc.neg(k % pc.p()) as usize;
    Ok(table[nu as usize][target])
}

/// Multiset variant: non-decreasing `nu`-tuples from `{1, ..., p-1}` with sum
/// `= -k mod p`. Rows run over `nu = 0..=p`.
pub fn multiset_count_table(pc: &PrimeChar) -> Vec<Vec<BigInt>> {
    let p = pc.p() as usize;
    let max_nu = p;
    // dp[n][r] over elements processed so far
    let mut dp = vec![vec![BigInt::zero(); p]; max_nu + 1];
    dp[0][0] = BigInt::one();
    for e in 1..p {
        let mut next = vec![vec![BigInt::zero(); p]; max_nu + 1];
        for n in 0..=max_nu {
            for r in 0..p {
                if dp[n][r].is_zero() {
                    continue;
                }
                for m in 0..=(max_nu - n) {
                    let r2 = (r + m * e) % p;
                    next[n + m][r2] += &dp[n][r];
                }
            }
        }
        dp = next;
    }
    dp
}

/// Closed form and recursion for `d_k(nu)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DkClosedForm {
    /// `(1/p) sum_{s=0}^{nu-1} (-1)^s C(p, nu-s)`; independent of `k`.
    pub closed: BigInt,
    /// `delta_k(nu) / nu!` from the recursion with base `delta_k(0) = [k = 0]`.
    pub recursion: BigInt,
}

pub fn dk_closed_form(pc: &PrimeChar, nu: u32, k: u32) -> Result<DkClosedForm, ModpError> {
    let p = pc.p() as u64;
    if nu == 0 || nu as u64 > p - 1 {
        return Err(ModpError::BadParameter {
            name: "nu",
            value: nu as i64,
            p: pc.p(),
        });
    }
    let pb = BigInt::from(p);
    let mut sum = BigInt::zero();
    for s in 0..nu as u64 {
        let term = binomial_exact(p, nu as u64 - s);
        if s % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    if !(&sum % &pb).is_zero() {
        return Err(ModpError::Inconsistent(format!(
            "closed form sum {sum} not divisible by {p}"
        )));
    }
    let closed = sum / &pb;

    let mut delta = if (k as u64).is_multiple_of(p) {
        BigInt::one()
    } else {
        BigInt::zero()
    };
    let mut nu_fact = BigInt::one();
    for n in 1..=nu as u64 {
        nu_fact *= BigInt::from(n);
        let lead = &nu_fact * binomial_exact(p, n);
        if !(&lead % &pb).is_zero() {
            return Err(ModpError::Inconsistent(format!(
                "{n}! C({p},{n}) not divisible by {p}"
            )));
        }
        delta = lead / &pb - BigInt::from(n) * delta;
    }
    if !(&delta % &nu_fact).is_zero() {
        return Err(ModpError::Inconsistent(format!(
            "delta {delta} not divisible by {nu}!"
        )));
    }
    Ok(DkClosedForm {
        closed,
        recursion: delta / nu_fact,
    })
}

/// Exact `d_k` and `d~_k` for one `k`, under both tuple readings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DkAuditRow {
    pub k: u32,
    pub d_strict: BigInt,
    pub d_tilde_strict: BigInt,
    pub d_multiset: BigInt,
    pub d_tilde_multiset: BigInt,
}

fn weighted_dk(
    counts: impl Fn(usize) -> BigInt,
    range: std::ops::RangeInclusive<usize>,
    sign_shift: usize,
) -> BigInt {
    let mut acc = BigInt::zero();
    for s in range {
        let term = counts(s) * BigInt::from(2 * s as i64 - 1);
        if (s + sign_shift).is_multiple_of(2) {
            acc += term;
        } else {
            acc -= term;
        }
    }
    acc
}

pub fn dk_audit_rows(pc: &PrimeChar) -> Vec<DkAuditRow> {
    let p = pc.p() as usize;
    let strict = subset_count_table(pc);
    let multi = multiset_count_table(pc);
    (0..p as u32)
        .map(|k| {
            let r = pc.neg(k) as usize;
            let strict_at = |s: usize| BigInt::from(strict.get(s).map_or(0, |row| row[r]));
            let multi_at = |s: usize| multi[s][r].clone();
            DkAuditRow {
                k,
                d_strict: weighted_dk(strict_at, 2..=p, 0),
                d_tilde_strict: weighted_dk(strict_at, 1..=p - 1, 1),
                d_multiset: weighted_dk(multi_at, 2..=p, 0),
                d_tilde_multiset: weighted_dk(multi_at, 1..=p - 1, 1),
            }
        })
        .collect()
}

fn big_with_residue(v: &BigInt, pc: &PrimeChar) -> String {
    format!("{}[{}]", v, pc.signed(pc.reduce_big(v)))
}

/// Reports `d_k` and `d~_k` for every `k`. `d~_k = -2` (k >= 1) under strict
/// enumeration is a hard check; every other row is informational.
pub fn dk_residue_audit(pc: &PrimeChar) -> Vec<IdentityRecord> {
    let p = pc.p();
    let mut out = Vec::new();
    for row in dk_audit_rows(pc) {
        let k = row.k;
        out.push(IdentityRecord::new("d_k_strict", p).param("k", k).outcome(
            0,
            big_with_residue(&row.d_strict, pc),
            Status::Info,
        ));
        let tilde_res = pc.reduce_big(&row.d_tilde_strict);
        let (claimed, status) = if k == 0 {
            (2 % p, Status::Info)
        } else {
            let c = pc.reduce(-2);
            (c, Status::from_bool(tilde_res == c))
        };
        out.push(
            IdentityRecord::new("d_tilde_k_strict", p)
                .param("k", k)
                .outcome(pc.signed(claimed), pc.signed(tilde_res), status),
        );
        out.push(
            IdentityRecord::new("d_k_multiset", p)
                .param("k", k)
                .outcome(0, big_with_residue(&row.d_multiset, pc), Status::Info),
        );
        out.push(
            IdentityRecord::new("d_tilde_k_multiset", p)
                .param("k", k)
                .outcome(
                    pc.signed(if k == 0 { 2 % p } else { pc.reduce(-2) }),
                    big_with_residue(&row.d_tilde_multiset, pc),
                    Status::Info,
                ),
        );
    }
    out
}

/// Compares the enumeration oracle with the closed form for all
/// `1 <= nu <= p-1` and all `k`. For `k != 0` equality is required; for
/// `k = 0` the deviation is reported and checked against `(-1)^nu`.
pub fn dk_oracle_comparison(pc: &PrimeChar) -> Result<Vec<IdentityRecord>, ModpError> {
    let p = pc.p();
    let table = subset_count_table(pc);
    let mut out = Vec::new();
    for nu in 1..p {
        for k in 0..p {
            let oracle = BigInt::from(table[nu as usize][pc.neg(k) as usize]);
            let form = dk_closed_form(pc, nu, k)?;
            let rec = IdentityRecord::new("d_k_closed_form", p)
                .param("nu", nu)
                .param("k", k);
            if k == 0 {
                let diff = &oracle - &form.closed;
                let sign = if nu % 2 == 0 { 1 } else { -1 };
                out.push(rec.outcome(
                    format!("offset{sign}"),
                    format!("offset{diff}"),
                    Status::from_bool(diff == BigInt::from(sign)),
                ));
            } else {
                out.push(rec.check(&form.closed, &oracle));
            }
            out.push(
                IdentityRecord::new("d_k_recursion", p)
                    .param("nu", nu)
                    .param("k", k)
                    .check(&oracle, &form.recursion),
            );
        }
    }
    Ok(out)
}

/// Wilson's theorem as a record.
pub fn wilson_record(pc: &PrimeChar) -> IdentityRecord {
    let p = pc.p();
    let direct = (1..p).fold(1u32, |acc, k| pc.mul(acc, k));
    IdentityRecord::new("wilson", p).check(pc.signed(pc.reduce(-1)), pc.signed(direct))
}

/// `sign(x) * |x|` rendering helper for exact integers in reports.
pub fn exact_and_residue(x: &BigInt, pc: &PrimeChar) -> String {
    let r = pc.reduce_big(x);
    if x.is_negative() {
        format!("{x}[{r}]")
    } else {
        format!("{x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pc(p: u32) -> PrimeChar {
        PrimeChar::new(p).unwrap()
    }

    #[test]
    fn rejects_bad_primes() {
        assert_eq!(PrimeChar::new(1), Err(ModpError::OutOfRange(1)));
        assert_eq!(PrimeChar::new(9), Err(ModpError::NotPrime(9)));
        assert_eq!(PrimeChar::new(37), Err(ModpError::OutOfRange(37)));
    }

    #[test]
    fn cached_tables_satisfy_invariants() {
        for p in [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31] {
            let pc = pc(p);
            assert_eq!(pc.factorial(p - 1), p - 1, "Wilson for {p}");
            for k in 1..p {
                assert_eq!(pc.mul(k, pc.inv(k)), 1);
            }
        }
    }

    #[test]
    fn binomial_examples() {
        assert_eq!(binomial_mod(5, 2, &pc(5)), 0);
        assert_eq!(binomial_mod(3, 3, &pc(5)), 1);
        assert_eq!(binomial_mod(4, 2, &pc(3)), 0);
        assert_eq!(binomial_mod(2, 5, &pc(3)), 0);
    }

    #[test]
    fn binomial_matches_exact() {
        for p in [2, 3, 5, 7] {
            let pc = pc(p);
            for n in 0..40u64 {
                for k in 0..=n {
                    assert_eq!(
                        binomial_mod(n, k, &pc),
                        pc.reduce_big(&binomial_exact(n, k))
                    );
                }
            }
        }
    }

    #[test]
    fn projector_examples() {
        let f3 = projector_polys(&pc(3));
        assert_eq!(f3[0], ZpPoly::from_i64(&[1, 0, -1], &pc(3)));
        assert_eq!(f3[1], ZpPoly::new(vec![0, 2, 2]));
        assert_eq!(f3[2], ZpPoly::new(vec![0, 1, 2]));
        let f2 = projector_polys(&pc(2));
        assert_eq!(f2[0], ZpPoly::new(vec![1, 1]));
        assert_eq!(f2[1], ZpPoly::new(vec![0, 1]));
    }

    #[test]
    fn projectors_are_a_partition_of_unity() {
        for p in [2, 3, 5, 7, 11, 13] {
            let pc = pc(p);
            let fs = projector_polys(&pc);
            for (k, f) in fs.iter().enumerate() {
                assert_eq!(f.degree(), Some(p as usize - 1));
                for j in 0..p {
                    assert_eq!(f.eval(j, &pc), u32::from(j as usize == k));
                }
            }
        }
    }

    #[test]
    fn projector_suite_passes() {
        for p in [2, 3, 13] {
            let recs = projector_identity_suite(&pc(p));
            assert_eq!(recs.len(), 5);
            assert!(recs.iter().all(IdentityRecord::passed), "{recs:?}");
        }
    }

    #[test]
    fn broken_projectors_fail() {
        let pc = pc(5);
        let mut fs = projector_polys(&pc);
        fs[2] = fs[2].add(&ZpPoly::constant(1), &pc);
        let recs = projector_identity_suite_with(&pc, &fs);
        assert!(recs.iter().any(|r| r.status == Status::Fail));
    }

    #[test]
    fn vandermonde_examples() {
        let v3 = vandermonde_det(&pc(3)).unwrap();
        assert_eq!(v3.row_reduction, 2);
        assert_eq!(v3.product_formula, 2);
        assert_eq!(v3.bare_alternant, 2);
        assert!(matches!(
            vandermonde_det(&pc(2)),
            Err(ModpError::DegenerateSize { .. })
        ));
        for p in [5, 7, 11, 13, 17] {
            let v = vandermonde_det(&pc(p)).unwrap();
            assert_ne!(v.row_reduction, 0);
            assert_eq!(v.row_reduction, v.product_formula);
            // bare alternant differs by the unit -(-1)^{C(p-1,2)}
            let pcp = pc(p);
            let c2 = ((p - 1) * (p - 2) / 2) as u64;
            let unit = if c2.is_multiple_of(2) { pcp.neg(1) } else { 1 };
            assert_eq!(pcp.mul(v.bare_alternant, unit), v.row_reduction);
        }
    }

    #[test]
    fn weighted_sum_examples() {
        let pc5 = pc(5);
        assert_eq!(weighted_binom_sum(2, &pc5).unwrap().exact, BigInt::from(1));
        assert_eq!(weighted_binom_sum(3, &pc5).unwrap().exact, BigInt::from(1));
        let k1 = weighted_binom_sum(1, &pc5).unwrap();
        assert_eq!(k1.exact, BigInt::from(-1));
        assert_eq!(k1.residue, 4);
        for k in 2..=62 {
            let w = weighted_binom_sum(k, &pc(31)).unwrap();
            assert_eq!(w.exact, BigInt::one());
            assert_eq!(w.alternating, BigInt::from(-1));
            assert!(w.first_moment.is_zero());
        }
    }

    #[test]
    fn subset_count_examples() {
        assert_eq!(subset_count(&pc(5), 2, 1).unwrap(), 1);
        assert_eq!(subset_count(&pc(5), 2, 0).unwrap(), 2);
        assert_eq!(subset_count(&pc(3), 1, 1).unwrap(), 1);
        assert!(subset_count(&pc(3), 3, 1).is_err());
    }

    /// Brute force over explicit tuples rather than bitmasks.
    fn tuples_oracle(p: u32, nu: u32, k: u32) -> u64 {
        fn rec(start: u32, left: u32, sum: u32, p: u32, target: u32) -> u64 {
            if left == 0 {
                return u64::from(sum % p == target);
            }
            (start..p)
                .map(|i| rec(i + 1, left - 1, sum + i, p, target))
                .sum()
        }
        rec(1, nu, 0, p, (p - k % p) % p)
    }

    #[test]
    fn subset_table_matches_tuple_recursion() {
        for p in [3, 5, 7, 11] {
            let pc = pc(p);
            for nu in 0..p {
                for k in 0..p {
                    assert_eq!(subset_count(&pc, nu, k).unwrap(), tuples_oracle(p, nu, k));
                }
            }
        }
    }

    #[test]
    fn closed_form_examples() {
        let pc5 = pc(5);
        assert_eq!(dk_closed_form(&pc5, 2, 1).unwrap().closed, BigInt::from(1));
        assert_eq!(dk_closed_form(&pc5, 3, 1).unwrap().closed, BigInt::from(1));
        let k0 = dk_closed_form(&pc5, 2, 0).unwrap();
        assert_eq!(k0.closed, BigInt::from(1));
        assert_eq!(k0.recursion, BigInt::from(2));
        assert_eq!(subset_count(&pc5, 2, 0).unwrap(), 2);
    }

    #[test]
    fn audit_examples() {
        let rows3 = dk_audit_rows(&pc(3));
        assert_eq!(pc(3).reduce_big(&rows3[1].d_tilde_strict), 1);
        let rows5 = dk_audit_rows(&pc(5));
        assert_eq!(rows5[1].d_tilde_strict, BigInt::from(3));
        assert_eq!(rows5[1].d_strict, BigInt::from(-2));
    }

    #[test]
    fn multiset_table_small() {
        // multisets of size 2 from {1,2} (p = 3): {1,1}=2, {1,2}=0, {2,2}=1 mod 3
        let t = multiset_count_table(&pc(3));
        assert_eq!(
            t[2],
            vec![BigInt::from(1), BigInt::from(1), BigInt::from(1)]
        );
        assert_eq!(t[0][0], BigInt::one());
    }

    #[test]
    fn zp_poly_gcd_and_division() {
        let pc = pc(5);
        let a = ZpPoly::linear(1, &pc).mul(&ZpPoly::linear(2, &pc), &pc);
        let b = ZpPoly::linear(1, &pc).mul(&ZpPoly::linear(3, &pc), &pc);
        assert_eq!(a.gcd(&b, &pc), ZpPoly::linear(1, &pc));
        let (q, r) = a.div_rem(&ZpPoly::linear(2, &pc), &pc);
        assert!(r.is_zero());
        assert_eq!(q, ZpPoly::linear(1, &pc));
    }
}
