//! The full verification suite, grouped into numbered criteria.
//!
//! Every sampled check derives its generator from the caller's seed, the
//! criterion number and the sample index, so reports are byte-identical for
//! a given seed regardless of thread count.

use crate::blowup::{blowup_tree, PlaneField};
use crate::deriv::{hochschild_check, Derivation};
use crate::modp::{
    dk_oracle_comparison, dk_residue_audit, projector_identity_suite_with, projector_polys,
    vandermonde_det, weighted_binom_sum, wilson_record, PrimeChar, ZpPoly,
};
use crate::par;
use crate::quotient::{
    eigen_dimensions, eigen_project, filtration_basis, invariants_basis, module_generators,
    mult_map_analysis, z_construct, z_power_rank, MapFamily,
};
use crate::report::{count_failures, IdentityRecord, Status};
use crate::ring::{MonomialIndex, RingElem, RingSpec};
use crate::torsor::{adjunction_identity_check, TorsorDescriptor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;

/// Deliberate corruption used to smoke-test the failure path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    /// Adds 1 to the first projector polynomial.
    BrokenProjector,
}

#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub id: u8,
    pub title: &'static str,
    pub records: Vec<IdentityRecord>,
}

impl CriterionReport {
    pub fn failures(&self) -> usize {
        count_failures(&self.records)
    }

    pub fn passed(&self) -> bool {
        self.failures() == 0
    }
}

/// The two-chart torsor over `F_2[s, 1/s]`.
pub const TWO_CHART_TORSOR: &str = r#"{"p":2,"denominator":"s","charts":[{"c":"s^3+s"},{"c":"s^-1+s^-3"}],"transitions":[{"i":0,"j":1,"a":"s^-2","gamma":"0"}]}"#;

fn rng_for(seed: u64, criterion: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (criterion << 56) ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

fn pc(p: u32) -> PrimeChar {
    PrimeChar::new(p).expect("prime")
}

fn error_record(name: &str, p: u32, err: impl std::fmt::Display) -> IdentityRecord {
    IdentityRecord::new(name, p).outcome("ok", format!("error:{err}"), Status::Fail)
}

/// The per-prime modular identities. `fault` lets callers corrupt the
/// projector table to confirm the suite notices.
pub fn identity_suite(primes: &[u32], fault: Fault) -> Vec<IdentityRecord> {
    let mut out = Vec::new();
    for &p in primes {
        let pc = pc(p);
        out.push(wilson_record(&pc));
        let mut polys = projector_polys(&pc);
        if fault == Fault::BrokenProjector {
            polys[0] = polys[0].add(&ZpPoly::constant(1), &pc);
        }
        out.extend(projector_identity_suite_with(&pc, &polys));
        match vandermonde_det(&pc) {
            Ok(v) => {
                out.push(IdentityRecord::new("vandermonde_nonzero", p).outcome(
                    "nonzero",
                    pc.signed(v.row_reduction),
                    Status::from_bool(v.row_reduction != 0),
                ));
                out.push(
                    IdentityRecord::new("vandermonde_methods", p)
                        .check(pc.signed(v.product_formula), pc.signed(v.row_reduction)),
                );
                out.push(
                    IdentityRecord::new("vandermonde_bare_alternant", p).outcome(
                        pc.signed(v.row_reduction),
                        pc.signed(v.bare_alternant),
                        Status::Info,
                    ),
                );
            }
            Err(e) => out.push(IdentityRecord::new("vandermonde_nonzero", p).outcome(
                "-",
                e,
                Status::Info,
            )),
        }
        for k in 2..=2 * p as u64 {
            match weighted_binom_sum(k, &pc) {
                Ok(w) => {
                    out.push(
                        IdentityRecord::new("weighted_binom_sum", p)
                            .param("k", k)
                            .check(1, &w.exact),
                    );
                    out.push(
                        IdentityRecord::new("alternating_binom_sum", p)
                            .param("k", k)
                            .check(-1, &w.alternating),
                    );
                    out.push(
                        IdentityRecord::new("binom_first_moment", p)
                            .param("k", k)
                            .check(0, &w.first_moment),
                    );
                }
                Err(e) => out.push(error_record("weighted_binom_sum", p, e)),
            }
        }
    }
    out
}

/// Subset counts against the closed form and the residue audit.
pub fn counting_suite(primes: &[u32]) -> Vec<IdentityRecord> {
    let mut out = Vec::new();
    for &p in primes {
        let pc = pc(p);
        match dk_oracle_comparison(&pc) {
            Ok(r) => out.extend(r),
            Err(e) => out.push(error_record("d_k_closed_form", p, e)),
        }
        out.extend(dk_residue_audit(&pc));
    }
    out
}

/// `t^2 d/dt` on `F_3[x,y][t]/(t^3 - x)`.
pub fn radical_example_suite() -> Vec<IdentityRecord> {
    let mut out = Vec::new();
    let run = || -> Result<Vec<IdentityRecord>, Box<dyn std::error::Error>> {
        let spec = RingSpec::builder(3, &["x", "y", "t"])
            .radical("t", "x")
            .build()?;
        let d = Derivation::from_exprs(&spec, &[("t", "t^2")])?;
        let mut out =
            vec![IdentityRecord::new("radical_example_type", 3).check("additive", d.classify()?)];
        let deg = 3;
        let e0 = invariants_basis(&d, deg)?;
        let e1 = filtration_basis(&d, deg, 1)?;
        let gens: Vec<String> = module_generators(&e1, &e0, None)
            .iter()
            .map(ToString::to_string)
            .collect();
        out.push(
            IdentityRecord::new("radical_example_e1_generators", 3).check("1,t^2", gens.join(",")),
        );
        let e2 = filtration_basis(&d, deg, 2)?;
        out.push(
            IdentityRecord::new("radical_example_e2_full", 3).check(e2.ambient_dim(), e2.dim()),
        );

        let tau = mult_map_analysis(&d, MapFamily::Tau, 2, deg)?;
        let coker: Vec<String> = tau
            .cokernel_generators
            .iter()
            .map(ToString::to_string)
            .collect();
        out.push(
            IdentityRecord::new("radical_example_tau2_cokernel", 3).check("t", coker.join(",")),
        );
        // x * E_2 modulo E_1, inside the degree bound
        let index = MonomialIndex::new(&spec, deg)?;
        let mut span = e1.echelon();
        let floor = span.len();
        let x = spec.var(0);
        let mut contained = true;
        for b in &e2.basis {
            if let Some(v) = index.coords(&x.mul(b)) {
                span.insert(&v, spec.pc());
                contained &= tau.image_contains(&x.mul(b));
            }
        }
        out.push(
            IdentityRecord::new("radical_example_tau2_image", 3).outcome(
                format!("x*E2:{}", span.len() - floor),
                format!("image:{}", tau.image_dim),
                Status::from_bool(contained && span.len() - floor == tau.image_dim),
            ),
        );
        Ok(out)
    };
    match run() {
        Ok(r) => out.extend(r),
        Err(e) => out.push(error_record("radical_example", 3, e)),
    }
    out
}

/// Blowup trees of the diagonal fields `(1,2)` at `p = 5` and `(1,1)` at
/// `p = 2`.
pub fn blowup_suite(max_depth: usize) -> Vec<IdentityRecord> {
    let mut out = Vec::new();
    let run = |p: u32, a: u32, b: u32| -> Result<Vec<IdentityRecord>, Box<dyn std::error::Error>> {
        let field = PlaneField::diagonal(p, a, b)?;
        let (c1, c2) = field.lift_to_charts()?;
        let tag = |f: &PlaneField| {
            f.normal_form_tag()
                .map_or("none".to_string(), |t| t.to_string())
        };
        let tree = blowup_tree(&field, max_depth)?;
        let params = format!("{a},{b}");
        let mut recs = vec![IdentityRecord::new("blowup_chart_tags", p)
            .param("field", &params)
            .outcome("-", format!("{}|{}", tag(&c1), tag(&c2)), Status::Info)];
        let cycle = tree
            .cycle_depth()
            .map_or("none".to_string(), |d| d.to_string());
        let done = if tree.terminated() {
            format!("terminated@{}", tree.depth())
        } else {
            "open".to_string()
        };
        if p == 5 {
            let root = tag(&field);
            let mut tags = [tag(&c1), tag(&c2)];
            tags.sort();
            recs.push(
                IdentityRecord::new("blowup_tag_set", p)
                    .param("field", &params)
                    .check(format!("(1,1)|{root}"), tags.join("|")),
            );
            recs.push(
                IdentityRecord::new("blowup_cycle_depth", p)
                    .param("field", &params)
                    .check("1", cycle),
            );
            recs.push(
                IdentityRecord::new("blowup_termination", p)
                    .param("field", &params)
                    .param("max_depth", max_depth)
                    .check("open", done),
            );
        } else {
            recs.push(
                IdentityRecord::new("blowup_termination", p)
                    .param("field", &params)
                    .param("max_depth", max_depth)
                    .check("terminated@1", done),
            );
        }
        Ok(recs)
    };
    for (p, a, b) in [(5, 1, 2), (2, 1, 1)] {
        match run(p, a, b) {
            Ok(r) => out.extend(r),
            Err(e) => out.push(error_record("blowup", p, e)),
        }
    }
    out
}

/// Random diagonal fields on `F_p[x,y]`: projector sums and eigenspace
/// dimensions on the degree `<= 10` span.
pub fn eigen_suite(seed: u64, fields_per_prime: usize) -> Vec<IdentityRecord> {
    let mut out = Vec::new();
    for p in [3u32, 5, 7] {
        let spec = RingSpec::free(p, &["x", "y"]).expect("ring");
        let monos = spec.monomial_basis(10).expect("basis");
        let recs = par::map_range(0..fields_per_prime, |i| {
            let mut rng = rng_for(seed, 5, (p as u64) << 32 | i as u64);
            let (a, b) = loop {
                let w = (rng.gen_range(0..p), rng.gen_range(0..p));
                if w != (0, 0) {
                    break w;
                }
            };
            let d = Derivation::diagonal(&spec, &[a, b]).expect("diagonal");
            let params = format!("{a},{b}");
            let mut ok = true;
            let mut detail = String::from("all");
            for m in &monos {
                let parts: Result<Vec<RingElem>, _> =
                    (0..p).map(|k| eigen_project(&d, m, k)).collect();
                match parts {
                    Ok(parts) => {
                        let sum = parts.iter().fold(spec.zero(), |acc, r| acc.add(r));
                        if sum != *m {
                            ok = false;
                            detail = format!("sum@{m}");
                        }
                    }
                    Err(e) => {
                        ok = false;
                        detail = format!("{e}@{m}");
                    }
                }
            }
            let total = eigen_dimensions(&d, 10)
                .map(|(_, t)| t.to_string())
                .unwrap_or_else(|e| e.to_string());
            vec![
                IdentityRecord::new("eigen_projections", p)
                    .param("field", &params)
                    .outcome("all", detail, Status::from_bool(ok)),
                IdentityRecord::new("eigen_total_dimension", p)
                    .param("field", &params)
                    .check(monos.len(), total),
            ]
        });
        out.extend(recs.into_iter().flatten());
    }
    out
}

/// `D = (1 + u(x^p)) d/dx` on `F_p[x]` truncated at `3p`.
pub fn z_suite(seed: u64, samples: usize) -> Vec<IdentityRecord> {
    let recs = par::map_range(0..samples, |i| {
        let p = [3u32, 5, 7][i % 3];
        let mut rng = rng_for(seed, 6, i as u64);
        let spec = RingSpec::builder(p, &["x"])
            .truncate(3 * p)
            .build()
            .expect("ring");
        let xp = spec.var(0).pow(p as u64);
        let u = xp
            .scale(rng.gen_range(0..p))
            .add(&xp.pow(2).scale(rng.gen_range(0..p)));
        let field = spec.one().add(&u);
        let run = || -> Result<Vec<IdentityRecord>, Box<dyn std::error::Error>> {
            let d = Derivation::new(&spec, vec![field.clone()])?;
            let zs = z_construct(&d, &spec.var(0))?;
            let mut recs: Vec<IdentityRecord> = zs
                .checks(&d)
                .into_iter()
                .map(|r| r.param("sample", i))
                .collect();
            let (rank, dim) = z_power_rank(&d, &zs.z)?;
            recs.push(
                IdentityRecord::new("z_power_independence", p)
                    .param("sample", i)
                    .check(dim, rank),
            );
            Ok(recs)
        };
        run().unwrap_or_else(|e| vec![error_record("z_construct", p, e).param("sample", i)])
    });
    recs.into_iter().flatten().collect()
}

/// Checks on the two-chart torsor, including its mutation sweep.
pub fn torsor_suite() -> Vec<IdentityRecord> {
    let run = || -> Result<Vec<IdentityRecord>, Box<dyn std::error::Error>> {
        let t = serde_json::from_str::<TorsorDescriptor>(TWO_CHART_TORSOR)?.build()?;
        let rep = t.validate();
        let mut out = vec![IdentityRecord::new("torsor_valid", 2)
            .check("valid", if rep.is_valid() { "valid" } else { "invalid" })];
        let mutants = t.mutation_sweep(-6..=6);
        let survivors: Vec<String> = mutants
            .iter()
            .filter(|m| m.valid)
            .map(|m| format!("{}+s^{}", m.target, m.exponent))
            .collect();
        out.push(
            IdentityRecord::new("torsor_mutants_rejected", 2)
                .param("mutants", mutants.len())
                .outcome(
                    "all",
                    if survivors.is_empty() {
                        "all".to_string()
                    } else {
                        survivors.join(",")
                    },
                    Status::from_bool(survivors.is_empty() && mutants.len() >= 50),
                ),
        );
        let data = t.transition_exponent_data()?;
        out.extend(data.records);
        Ok(out)
    };
    run().unwrap_or_else(|e| vec![error_record("torsor", 2, e)])
}

/// Both adjunction identities on `B[t]/(t^p - c)` with `B = F_p[x]`
/// truncated at `p + 2` and a seeded random `c`.
pub fn adjunction_suite(seed: u64, samples: usize) -> Vec<IdentityRecord> {
    let mut out = Vec::new();
    for p in [2u32, 3, 5, 7] {
        let spec = RingSpec::builder(p, &["x"])
            .truncate(p + 2)
            .build()
            .expect("ring");
        let mut rng = rng_for(seed, 8, p as u64);
        let c = spec.random_element(&mut rng, p + 1, 4);
        match adjunction_identity_check(&c, samples, seed ^ p as u64) {
            Ok(r) => out.extend(r.into_iter().map(|r| r.param("c", &c))),
            Err(e) => out.push(error_record("adjunction", p, e)),
        }
    }
    out
}

fn random_derivation(spec: &RingSpec, rng: &mut ChaCha8Rng, deg: u32, terms: usize) -> Derivation {
    loop {
        let images = (0..spec.nvars())
            .map(|_| spec.random_element(rng, deg, terms))
            .collect();
        if let Ok(d) = Derivation::new(spec, images) {
            if !d.is_zero() {
                return d;
            }
        }
    }
}

/// `(wD)^p = w^p D^p + (wD)^{p-1}(w) D` for random `w`, `D` on `F_p[x,y]`.
pub fn hochschild_suite(seed: u64, pairs: usize, samples: usize) -> Vec<IdentityRecord> {
    let mut out = Vec::new();
    for p in [2u32, 3, 5] {
        let spec = RingSpec::free(p, &["x", "y"]).expect("ring");
        let recs = par::map_range(0..pairs, |i| {
            let mut rng = rng_for(seed, 9, (p as u64) << 32 | i as u64);
            let d = random_derivation(&spec, &mut rng, 2, 3);
            let w = spec.random_nonzero(&mut rng, 2, 3);
            let xs: Vec<RingElem> = (0..samples)
                .map(|_| spec.random_element(&mut rng, 3, 4))
                .collect();
            match hochschild_check(&w, &d, &xs) {
                Ok(r) => r.into_iter().map(|r| r.param("pair", i)).collect(),
                Err(e) => vec![error_record("hochschild", p, e).param("pair", i)],
            }
        });
        out.extend(recs.into_iter().flatten());
    }
    out
}

/// Invariants of a random linear field agree below `N` whether computed
/// with truncation `N` or `2N`.
pub fn truncation_suite(seed: u64, fields: usize) -> Vec<IdentityRecord> {
    let mut out = Vec::new();
    for p in [3u32, 5] {
        let n = 2 * p;
        let small = RingSpec::builder(p, &["x", "y"])
            .truncate(n)
            .build()
            .expect("ring");
        let large = RingSpec::builder(p, &["x", "y"])
            .truncate(2 * n)
            .build()
            .expect("ring");
        let recs = par::map_range(0..fields, |i| {
            let mut rng = rng_for(seed, 10, (p as u64) << 32 | i as u64);
            let coeffs: Vec<u32> = loop {
                let c: Vec<u32> = (0..4).map(|_| rng.gen_range(0..p)).collect();
                if c.iter().any(|&v| v != 0) {
                    break c;
                }
            };
            let build = |spec: &RingSpec| {
                let (x, y) = (spec.var(0), spec.var(1));
                let img = |a: u32, b: u32| x.scale(a).add(&y.scale(b));
                Derivation::new(
                    spec,
                    vec![img(coeffs[0], coeffs[1]), img(coeffs[2], coeffs[3])],
                )
            };
            let field = format!("{:?}", coeffs).replace(' ', "");
            let res = (|| -> Result<IdentityRecord, Box<dyn std::error::Error>> {
                let a = invariants_basis(&build(&small)?, n - 1)?;
                let b = invariants_basis(&build(&large)?, n - 1)?;
                Ok(IdentityRecord::new("truncation_stability", p)
                    .param("field", &field)
                    .check(a.basis_strings().join(","), b.basis_strings().join(",")))
            })();
            res.unwrap_or_else(|e| {
                error_record("truncation_stability", p, e).param("field", &field)
            })
        });
        out.extend(recs);
    }
    out
}

/// Runs every criterion with the given seed.
pub fn run_all(seed: u64, fault: Fault) -> Vec<CriterionReport> {
    let c = |id, title, records| CriterionReport { id, title, records };
    vec![
        c(
            1,
            "identity suite",
            identity_suite(&[2, 3, 5, 7, 11, 13], fault),
        ),
        c(2, "counting oracle", counting_suite(&[3, 5, 7, 11, 13])),
        c(3, "radical extension example", radical_example_suite()),
        c(4, "blowup trees", blowup_suite(10)),
        c(5, "eigen decomposition", eigen_suite(seed, 50)),
        c(6, "z construction", z_suite(seed, 100)),
        c(7, "torsor validation", torsor_suite()),
        c(8, "adjunction identities", adjunction_suite(seed, 100)),
        c(9, "hochschild formula", hochschild_suite(seed, 20, 100)),
        c(10, "truncation stability", truncation_suite(seed, 20)),
    ]
}

/// One line per criterion: id, title, record count, failures, verdict.
pub fn summary_table(reports: &[CriterionReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>3}  {:<28} {:>8} {:>6}  status",
        "#", "criterion", "records", "fails"
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{:>3}  {:<28} {:>8} {:>6}  {}",
            r.id,
            r.title,
            r.records.len(),
            r.failures(),
            if r.passed() { "PASS" } else { "FAIL" }
        );
    }
    let total: usize = reports.iter().map(CriterionReport::failures).sum();
    let _ = writeln!(s, "total failures: {total}");
    s
}
