//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Every criterion runs the library's own audit suite and, next to it, an
//! oracle written here from scratch by enumeration or direct evaluation.
//! Arithmetic is exact everywhere, so the only pinned
//! tolerances are the runtime bounds below.

use alphamu::audit::{self, Fault};
use alphamu::blowup::{blowup_tree, PlaneField, Tag};
use alphamu::modp::{
    projector_polys, subset_count, vandermonde_det, weighted_binom_sum, ModpError, PrimeChar,
};
use alphamu::quotient::{eigen_dimensions, eigen_project, invariants_basis, z_construct};
use alphamu::torsor::TorsorDescriptor;
use alphamu::{Derivation, IdentityRecord, RingElem, RingSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::process::ExitCode;
use std::time::{Duration, Instant};

const SEED: u64 = 0;
/// Exact arithmetic: every comparison is equality, never approximate.
const VALUE_TOLERANCE: u32 = 0;

/// Wall-clock ceilings in seconds, indexed by criterion. `None` means the
/// criterion has no runtime requirement.
const RUNTIME_BOUND_SECS: [Option<u64>; 10] = [
    Some(10),
    Some(60),
    None,
    None,
    None,
    None,
    None,
    Some(60),
    None,
    None,
];

type Checked = Result<Vec<String>, String>;
type Criterion = (&'static str, fn() -> Checked);

struct Tally {
    checks: usize,
    problems: Vec<String>,
}

impl Tally {
    fn new() -> Self {
        Tally {
            checks: 0,
            problems: Vec::new(),
        }
    }

    fn expect(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.problems.push(what());
        }
    }

    fn suite(&mut self, records: &[IdentityRecord]) {
        self.checks += records.len();
        self.problems.extend(
            records
                .iter()
                .filter(|r| !r.passed())
                .map(|r| format!("record failed: {r}")),
        );
    }

    fn finish(self, note: &str) -> Checked {
        if self.problems.is_empty() {
            Ok(vec![format!("{} checks{}", self.checks, note)])
        } else {
            Err(self.problems.join("; "))
        }
    }
}

fn binom(n: u64, k: u64) -> i128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1i128, |acc, i| acc * (n - i) as i128 / (i + 1) as i128)
}

fn det_mod(mut m: Vec<Vec<i64>>, p: i64) -> i64 {
    let n = m.len();
    let mut det = 1i64;
    for col in 0..n {
        let Some(piv) = (col..n).find(|&r| m[r][col].rem_euclid(p) != 0) else {
            return 0;
        };
        if piv != col {
            m.swap(piv, col);
            det = -det;
        }
        let pv = m[col][col].rem_euclid(p);
        det = det * pv % p;
        let inv = (1..p).find(|x| x * pv % p == 1).unwrap();
        for r in col + 1..n {
            let f = m[r][col].rem_euclid(p) * inv % p;
            for c in col..n {
                m[r][c] = (m[r][c] - f * m[col][c]).rem_euclid(p);
            }
        }
    }
    det.rem_euclid(p)
}

fn criterion_1() -> Checked {
    let mut t = Tally::new();
    let primes = [2u32, 3, 5, 7, 11, 13];
    t.suite(&audit::identity_suite(&primes, Fault::None));
    for p in primes {
        let pc = PrimeChar::new(p).unwrap();
        let fact = (1..p as u64).fold(1u64, |a, k| a * k % p as u64);
        t.expect(fact == p as u64 - 1, || format!("wilson p={p}"));

        let polys = projector_polys(&pc);
        for (k, f) in polys.iter().enumerate() {
            for j in 0..p {
                let want = u32::from(j as usize == k);
                t.expect(f.eval(j, &pc) == want, || {
                    format!("projector f_{k}({j}) p={p}")
                });
            }
        }

        match vandermonde_det(&pc) {
            Ok(v) => {
                let n = (p - 1) as i64;
                let rows = (1..=n)
                    .map(|s| (1..=n).map(|k| k.pow(s as u32) % p as i64).collect())
                    .collect();
                let oracle = det_mod(rows, p as i64);
                t.expect(oracle != 0 && oracle as u32 == v.row_reduction, || {
                    format!("vandermonde p={p}")
                });
                t.expect(v.product_formula == v.row_reduction, || {
                    format!("vandermonde methods p={p}")
                });
            }
            Err(e) => t.expect(
                p == 2 && matches!(e, ModpError::DegenerateSize { .. }),
                || format!("vandermonde p={p}: {e}"),
            ),
        }

        for k in 2..=2 * p as u64 {
            let oracle: i128 = (1..=k)
                .map(|s| if s % 2 == 0 { 1 } else { -1 } * (2 * s as i128 - 1) * binom(k, s))
                .sum();
            let lib = weighted_binom_sum(k, &pc).unwrap();
            t.expect(oracle == 1 && lib.exact == 1.into(), || {
                format!("weighted sum k={k} p={p}: {oracle}")
            });
        }
    }
    t.finish("")
}

/// Counts of `nu`-subsets of `{1..p-1}` by residue of their sum, built by
/// recursive choice rather than bitmasks.
fn subset_counts(p: u32) -> Vec<Vec<u64>> {
    fn walk(next: u32, p: u32, size: usize, sum: u32, table: &mut Vec<Vec<u64>>) {
        table[size][(sum % p) as usize] += 1;
        for e in next..p {
            walk(e + 1, p, size + 1, sum + e, table);
        }
    }
    let mut table = vec![vec![0u64; p as usize]; p as usize];
    walk(1, p, 0, 0, &mut table);
    table
}

fn criterion_2() -> Checked {
    let mut t = Tally::new();
    let primes = [3u32, 5, 7, 11, 13];
    t.suite(&audit::counting_suite(&primes));
    for p in primes {
        let pc = PrimeChar::new(p).unwrap();
        let table = subset_counts(p);
        let neg = |k: u32| ((p - k % p) % p) as usize;
        for nu in 1..p {
            let closed: i128 = (0..nu as u64)
                .map(|s| if s % 2 == 0 { 1 } else { -1 } * binom(p as u64, nu as u64 - s))
                .sum::<i128>()
                / p as i128;
            for k in 0..p {
                let count = table[nu as usize][neg(k)];
                t.expect(subset_count(&pc, nu, k).unwrap() == count, || {
                    format!("subset_count p={p} nu={nu} k={k}")
                });
                let diff = count as i128 - closed;
                let want = if k == 0 {
                    if nu % 2 == 0 {
                        1
                    } else {
                        -1
                    }
                } else {
                    0
                };
                t.expect(diff == want, || {
                    format!("closed form p={p} nu={nu} k={k}: off by {diff}")
                });
            }
        }
        for k in 1..p {
            let tilde: i128 = (1..p as usize)
                .map(|s| if s % 2 == 1 { 1 } else { -1 } * (2 * s as i128 - 1) * table[s][neg(k)] as i128)
                .sum();
            t.expect(tilde.rem_euclid(p as i128) == p as i128 - 2, || {
                format!("d~_k p={p} k={k}: {tilde}")
            });
        }
    }
    t.finish("")
}

fn criterion_3() -> Checked {
    let mut t = Tally::new();
    t.suite(&audit::radical_example_suite());
    let spec = RingSpec::builder(3, &["x", "y", "t"])
        .radical("t", "x")
        .build()
        .unwrap();
    let d = Derivation::from_exprs(&spec, &[("t", "t^2")]).unwrap();
    let el = |s: &str| spec.parse(s).unwrap();
    for v in ["x", "y", "t"] {
        t.expect(d.iterate(&el(v), 3).is_zero(), || format!("D^3({v}) != 0"));
    }
    t.expect(!d.apply(&el("t")).is_zero(), || {
        "D nilpotent of order 1".into()
    });
    t.expect(d.iterate(&el("t^2"), 2).is_zero(), || {
        "t^2 not in E_1".into()
    });
    t.expect(!d.iterate(&el("t"), 2).is_zero(), || "t in E_1".into());
    t.expect(d.iterate(&el("t"), 2) == el("2*x"), || {
        "D^2(t) != 2x".into()
    });
    t.finish("")
}

/// Normal form of a pair of weights: first entry 1, smallest second entry
/// over swapping and scaling.
fn canonical(p: u32, a: u32, b: u32) -> Option<(u32, u32)> {
    let inv = |v: u32| (1..p).find(|x| x * v % p == 1).unwrap();
    [(a, b), (b, a)]
        .into_iter()
        .filter(|&(f, _)| f % p != 0)
        .map(|(f, s)| (1, s * inv(f) % p))
        .min_by_key(|&(_, s)| s)
}

fn criterion_4() -> Checked {
    let mut t = Tally::new();
    t.suite(&audit::blowup_suite(10));
    for (p, a, b) in [(5u32, 1u32, 2u32), (2, 1, 1), (7, 2, 3), (5, 1, 4)] {
        let field = PlaneField::diagonal(p, a, b).unwrap();
        let (c1, c2) = field.lift_to_charts().unwrap();
        // x = u, y = uv scales the weights to (a, b - a); x = uv, y = v to (a - b, b).
        let w1 = canonical(p, a, (b + p - a) % p);
        let w2 = canonical(p, (a + p - b) % p, b);
        let tag = |f: &PlaneField| f.normal_form_tag().map(|Tag(x, y)| (x, y));
        t.expect(tag(&c1) == w1 && tag(&c2) == w2, || {
            format!("chart tags p={p} ({a},{b})")
        });
    }
    t.expect(canonical(5, 4, 2) == Some((1, 2)), || {
        "(4,2) not equivalent to (1,2)".into()
    });

    let tree = blowup_tree(&PlaneField::diagonal(5, 1, 2).unwrap(), 10).unwrap();
    t.expect(tree.cycle_depth() == Some(1), || {
        format!("cycle depth {:?}", tree.cycle_depth())
    });
    t.expect(!tree.terminated(), || "p=5 tree terminated".into());
    let tree = blowup_tree(&PlaneField::diagonal(2, 1, 1).unwrap(), 10).unwrap();
    t.expect(tree.terminated() && tree.depth() == 1, || {
        format!("p=2 depth {}", tree.depth())
    });
    t.finish("")
}

fn criterion_5() -> Checked {
    let mut t = Tally::new();
    t.suite(&audit::eigen_suite(SEED, 50));
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 0x5);
    for p in [3u32, 5, 7] {
        let spec = RingSpec::free(p, &["x", "y"]).unwrap();
        for _ in 0..10 {
            let (a, b) = (rng.gen_range(1..p), rng.gen_range(0..p));
            let d = Derivation::diagonal(&spec, &[a, b]).unwrap();
            let mut count = 0;
            for i in 0..=10u32 {
                for j in 0..=10 - i {
                    count += 1;
                    let m = spec.parse(&format!("x^{i}*y^{j}")).unwrap();
                    let weight = (a * i + b * j) % p;
                    for k in 0..p {
                        let proj = eigen_project(&d, &m, k).unwrap();
                        let ok = if k == weight {
                            proj == m
                        } else {
                            proj.is_zero()
                        };
                        t.expect(ok, || {
                            format!("projection p={p} ({a},{b}) x^{i}y^{j} k={k}")
                        });
                    }
                }
            }
            let (dims, total) = eigen_dimensions(&d, 10).unwrap();
            t.expect(
                count == 66 && total == 66 && dims.iter().sum::<usize>() == 66,
                || format!("dimension total {total} p={p}"),
            );
        }
    }
    t.finish("")
}

fn criterion_6() -> Checked {
    let mut t = Tally::new();
    t.suite(&audit::z_suite(SEED, 100));
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 0x6);
    for i in 0..30 {
        let p = [3u32, 5, 7][i % 3];
        let spec = RingSpec::builder(p, &["x"])
            .truncate(3 * p)
            .build()
            .unwrap();
        let u = spec
            .parse(&format!(
                "{}*x^{p} + {}*x^{}",
                rng.gen_range(0..p),
                rng.gen_range(0..p),
                2 * p
            ))
            .unwrap();
        let d = Derivation::new(&spec, vec![spec.one().add(&u)]).unwrap();
        let zs = z_construct(&d, &spec.var(0)).unwrap();
        t.expect(d.apply(&zs.z).is_one(), || format!("D(z) != 1 sample {i}"));
        for (k, b) in zs.coeffs_b.iter().enumerate() {
            t.expect(d.apply(b).is_zero(), || {
                format!("b_{k} not invariant sample {i}")
            });
        }
        // D^k(z^k) = k! and D^{k+1}(z^k) = 0 give a triangular pairing, so
        // the powers are independent over the invariants.
        let mut fact = 1u32;
        for k in 1..p {
            fact = fact * k % p;
            let zk = zs.z.pow(k as u64);
            t.expect(d.iterate(&zk, k) == spec.constant(fact), || {
                format!("D^{k}(z^{k}) sample {i}")
            });
            t.expect(d.iterate(&zk, k + 1).is_zero(), || {
                format!("D^{}(z^{k}) sample {i}", k + 1)
            });
        }
    }
    t.finish("")
}

fn criterion_7() -> Checked {
    let mut t = Tally::new();
    t.suite(&audit::torsor_suite());
    let load = |json: &str| {
        serde_json::from_str::<TorsorDescriptor>(json)
            .unwrap()
            .build()
            .unwrap()
    };
    let torsor = load(audit::TWO_CHART_TORSOR);
    let a = &torsor.given()[&(0, 1)].a;
    let s = torsor.overlap().parse("s").unwrap();
    t.expect(*a == s.pow(2).invert_unit().unwrap(), || "a != s^-2".into());
    t.expect(*torsor.c(1) == a.pow(2).mul(torsor.c(0)), || {
        "c_1 != a^2 c_0".into()
    });

    let hand_mutants = [
        ("s^3+s\"", "s^3+s+1\""),
        ("s^3+s\"", "s^3\""),
        ("s^-1+s^-3", "s^-1"),
        ("\"a\":\"s^-2\"", "\"a\":\"s^-1\""),
        ("\"a\":\"s^-2\"", "\"a\":\"s^2\""),
        ("\"gamma\":\"0\"", "\"gamma\":\"s\""),
    ];
    for (from, to) in hand_mutants {
        let json = audit::TWO_CHART_TORSOR.replacen(from, to, 1);
        t.expect(
            json != audit::TWO_CHART_TORSOR && !load(&json).is_valid(),
            || format!("mutant {to} accepted"),
        );
    }
    let sweep = torsor.mutation_sweep(-6..=6);
    t.expect(sweep.len() >= 50 && sweep.iter().all(|m| !m.valid), || {
        format!("sweep of {}", sweep.len())
    });

    let data = torsor.transition_exponent_data().unwrap();
    for (&(i, j), n) in &data.normal {
        // p = 2: the normal cocycle is a^2 and the dualizing cocycle a^{-1}.
        if let Some(tr) = torsor.given().get(&(i, j)) {
            t.expect(*n == tr.a.pow(2), || format!("normal transition {i}{j}"));
            t.expect(
                data.dualizing[&(i, j)] == tr.a.invert_unit().unwrap(),
                || format!("dualizing transition {i}{j}"),
            );
        }
        t.expect(n.mul(&data.normal[&(j, i)]).is_one(), || {
            format!("normal inverse {i}{j}")
        });
        t.expect(
            data.dualizing[&(i, j)]
                .mul(&data.dualizing[&(j, i)])
                .is_one(),
            || format!("dualizing inverse {i}{j}"),
        );
    }
    t.finish(&format!(", {} mutants", sweep.len() + hand_mutants.len()))
}

/// `-2 sum_i a_i prod_{j != i} D a_j + sum_S (-1)^|S| (2|S| - 1) prod_S a D^{p-1}(prod_{not S} a)`
/// over proper non-empty position sets `S`.
fn adjunction_rhs(d: &Derivation, a: &[RingElem]) -> RingElem {
    let spec = d.spec();
    let p = a.len();
    let da: Vec<RingElem> = a.iter().map(|x| d.apply(x)).collect();
    let mut acc = spec.zero();
    for i in 0..p {
        let term = (0..p)
            .filter(|&j| j != i)
            .fold(a[i].clone(), |t, j| t.mul(&da[j]));
        acc = acc.sub(&term.scale(2));
    }
    for mask in 1u32..(1 << p) - 1 {
        let size = mask.count_ones() as i64;
        let (inside, outside) = (0..p).fold((spec.one(), spec.one()), |(i, o), k| {
            if mask >> k & 1 == 1 {
                (i.mul(&a[k]), o)
            } else {
                (i, o.mul(&a[k]))
            }
        });
        let weight = if size % 2 == 0 {
            2 * size - 1
        } else {
            1 - 2 * size
        };
        acc = acc.add(
            &inside
                .mul(&d.iterate(&outside, p as u32 - 1))
                .mul(&spec.constant_i64(weight)),
        );
    }
    acc
}

fn criterion_8() -> Checked {
    let mut t = Tally::new();
    t.suite(&audit::adjunction_suite(SEED, 100));
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 0x8);
    for p in [2u32, 3, 5, 7] {
        let base = RingSpec::builder(p, &["x"])
            .truncate(p + 2)
            .build()
            .unwrap();
        let c = base.random_nonzero(&mut rng, p + 1, 4);
        let spec = RingSpec::builder(p, &["x", "t"])
            .truncate(p + 2)
            .radical("t", &c.to_string())
            .build()
            .unwrap();
        let d = Derivation::from_exprs(&spec, &[("x", "0"), ("t", "1")]).unwrap();
        for _ in 0..100 {
            let a: Vec<RingElem> = (0..p)
                .map(|_| spec.random_element(&mut rng, p + 1, 4))
                .collect();
            let product = a.iter().fold(spec.one(), |acc, x| acc.mul(x));
            let lhs = d.iterate(&product, p - 1);
            t.expect(lhs == adjunction_rhs(&d, &a), || {
                format!("product identity p={p} c={c}")
            });

            let x = &a[0];
            let power = d.apply(x).pow(p as u64 - 1);
            let sum = (0..p).fold(spec.zero(), |acc, k| {
                acc.add(
                    &x.pow((p - 1 - k) as u64)
                        .mul(&d.iterate(&x.pow(k as u64), p - 1)),
                )
            });
            t.expect(power == sum.neg(), || format!("power identity p={p} a={x}"));
        }
    }
    t.finish("")
}

fn criterion_9() -> Checked {
    let mut t = Tally::new();
    t.suite(&audit::hochschild_suite(SEED, 20, 100));
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 0x9);
    for p in [2u32, 3, 5] {
        let spec = RingSpec::free(p, &["x", "y"]).unwrap();
        for _ in 0..20 {
            let images = vec![
                spec.random_nonzero(&mut rng, 2, 3),
                spec.random_element(&mut rng, 2, 3),
            ];
            let d = Derivation::new(&spec, images).unwrap();
            let w = spec.random_nonzero(&mut rng, 2, 3);
            let wd = |f: &RingElem| w.mul(&d.apply(f));
            let wd_iter = |f: &RingElem, n: u32| (0..n).fold(f.clone(), |g, _| wd(&g));
            let correction = wd_iter(&w, p - 1);
            for _ in 0..100 {
                let f = spec.random_element(&mut rng, 3, 4);
                let lhs = wd_iter(&f, p);
                let rhs = w
                    .pow(p as u64)
                    .mul(&d.iterate(&f, p))
                    .add(&correction.mul(&d.apply(&f)));
                t.expect(lhs == rhs, || format!("hochschild p={p} w={w} f={f}"));
            }
        }
    }
    t.finish("")
}

fn criterion_10() -> Checked {
    let mut t = Tally::new();
    t.suite(&audit::truncation_suite(SEED, 20));
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 0xa);
    for p in [3u32, 5] {
        let n = 2 * p;
        let small = RingSpec::builder(p, &["x", "y"])
            .truncate(n)
            .build()
            .unwrap();
        let large = RingSpec::builder(p, &["x", "y"])
            .truncate(2 * n)
            .build()
            .unwrap();
        for _ in 0..20 {
            let w: Vec<u32> = (0..2).map(|_| rng.gen_range(1..p)).collect();
            let ds = Derivation::diagonal(&small, &w).unwrap();
            let dl = Derivation::diagonal(&large, &w).unwrap();
            let a = invariants_basis(&ds, n - 1).unwrap();
            let b = invariants_basis(&dl, n - 1).unwrap();
            t.expect(a.basis_strings() == b.basis_strings(), || {
                format!("bases differ p={p} {w:?}")
            });
            // A monomial x^i y^j is invariant under a diagonal field exactly
            // when its weight vanishes.
            let mut expected = 0;
            for i in 0..n {
                for j in 0..n - i {
                    if (w[0] * i + w[1] * j).is_multiple_of(p) {
                        expected += 1;
                    }
                }
            }
            t.expect(a.dim() == expected, || {
                format!("invariant count p={p} {w:?}: {} vs {expected}", a.dim())
            });
            for e in &b.basis {
                t.expect(dl.apply(e).is_zero(), || format!("non-invariant {e}"));
            }
        }
    }
    t.finish("")
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("identity suite", criterion_1),
        ("counting oracle", criterion_2),
        ("radical extension example", criterion_3),
        ("blowup trees", criterion_4),
        ("eigen decomposition", criterion_5),
        ("z construction", criterion_6),
        ("torsor validation", criterion_7),
        ("adjunction identities", criterion_8),
        ("hochschild formula", criterion_9),
        ("truncation stability", criterion_10),
    ];
    let mut failed = 0;
    for (i, (title, run)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let bound = RUNTIME_BOUND_SECS[i].map(Duration::from_secs);
        let in_time = bound.is_none_or(|b| elapsed <= b);
        let bound_text = bound.map_or("none".to_string(), |b| format!("{}s", b.as_secs()));
        let (ok, detail) = match result {
            Ok(notes) if in_time => (true, notes.join(", ")),
            Ok(_) => (false, "runtime bound exceeded".to_string()),
            Err(why) => (false, why),
        };
        failed += usize::from(!ok);
        println!(
            "criterion {:>2} {} {:<26} elapsed={:.2}s bound={} tolerance={} {}",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            title,
            elapsed.as_secs_f64(),
            bound_text,
            VALUE_TOLERANCE,
            detail
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
