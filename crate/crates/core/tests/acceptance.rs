//! Acceptance run: prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use delocspec_core::approximation::{
    build_folner_compression, build_inverse_limit_stage, reduction_map, telescope_check, FiniteRealization, FolnerSet,
};
use delocspec_core::cyclotomic::Cyclotomic;
use delocspec_core::group::{ConjugacyClassInfo, Group, GroupElement};
use delocspec_core::linalg::eigvalsh;
use delocspec_core::oracle::oracle_lndet;
use delocspec_core::parse::parse_element;
use delocspec_core::ring::{Coefficient, RingMatrix};
use delocspec_core::sofic::{certify, det_star, sofic_kernel, LabeledGraph};
use delocspec_core::spectral::{
    density, determinant_report, kernel_coefficients_exact, kernel_fourier_coefficient, lndet_definite,
    sandwich_diagnostic, spectral_data, stage_eigenvalues,
};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const EXACT_TOL: f64 = 1e-12;
const EXACT_TOL_PRODUCT: f64 = 1e-10;
const FLOAT_TOL: f64 = 1e-6;
const LNDET_TOL: f64 = 1e-3;
const EIGEN_TOL: f64 = 1e-9;
const DOMINATION_TOL: f64 = 1e-9;
const BOUND_SLACK: f64 = 1e-9;
const BUDGET_LAPLACIAN: Duration = Duration::from_secs(10);
const BUDGET_PRODUCT: Duration = Duration::from_secs(60);

struct Outcome {
    pass: bool,
    detail: String,
}

fn elem(g: &Group, s: &str) -> RingMatrix {
    RingMatrix::from_element(parse_element(g, s).unwrap())
}

fn class_of(h: &FiniteRealization, name: &str) -> ConjugacyClassInfo {
    let g = if name == "e" { h.group.identity() } else { h.group.generator(name).unwrap() };
    h.group.conjugacy_class(&g, 1 << 20).unwrap()
}

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn rational(c: &Cyclotomic) -> BigRational {
    c.as_rational().expect("rational value").clone()
}

fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap()
}

/// ℤ Laplacian on ℤ/n, n = 2..4096. The kernel is trivial on ℤ, so every
/// coefficient has limit 0 and the stage delta must be 1/n at e and u.
fn laplacian_deltas() -> Outcome {
    let z = common::z();
    let a = elem(&z, "2 - u - u^-1");
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut mismatches = 0;
    for n in 2..=4096u32 {
        let h = build_inverse_limit_stage(&a, &reduction_map(&z, n).unwrap(), n as usize).unwrap();
        let cls = class_of(&h, "u");
        let (at_e, raw) = kernel_coefficients_exact(&h, &cls).unwrap();
        let at_u = rational(&raw);
        let at_e = rational(&at_e);
        let expected = q(1, n as i64);
        for got in [&at_e, &at_u] {
            if *got != expected {
                mismatches += 1;
            }
            worst = worst.max((to_f64(got) - 1.0 / n as f64).abs());
        }
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: mismatches == 0 && worst <= EXACT_TOL && elapsed < BUDGET_LAPLACIAN,
        detail: format!(
            "4095 stages, exact mismatches {mismatches}, max |delta − 1/n| {worst:.1e} (tol {EXACT_TOL:.0e}), {:.2}s (budget {}s)",
            elapsed.as_secs_f64(),
            BUDGET_LAPLACIAN.as_secs()
        ),
    }
}

/// `(1−t)(2−u−u⁻¹)` on ℤ/2×ℤ. Both kernel coefficients tend to 1/2; the
/// quotient ℤ/2×ℤ/n adds the constants of the t = −1 sector, giving
/// `1/2 + 1/(2n)` at e and `1/2 − 1/(2n)` at t.
fn product_deltas() -> Outcome {
    let g = common::z2z();
    let a = elem(&g, "(1 - t)(2 - u - u^-1)");
    let start = Instant::now();
    let half = q(1, 2);
    let mut exact_worst: f64 = 0.0;
    let mut exact_bad = 0;
    for n in 2..=1024u32 {
        let h = build_inverse_limit_stage(&a, &reduction_map(&g, n).unwrap(), n as usize).unwrap();
        let (at_e, raw) = kernel_coefficients_exact(&h, &class_of(&h, "t")).unwrap();
        let step = q(1, 2 * n as i64);
        let de = rational(&at_e) - &half;
        let dt = rational(&raw) - &half;
        if de != step || dt != -step.clone() {
            exact_bad += 1;
        }
        let s = 0.5 / n as f64;
        exact_worst = exact_worst.max((to_f64(&de) - s).abs()).max((to_f64(&dt) + s).abs());
    }

    let float_sizes: Vec<u32> = (2..=32).chain([48, 64, 128, 256, 512]).collect();
    let mut float_worst: f64 = 0.0;
    for &n in &float_sizes {
        let h = build_inverse_limit_stage(&a, &reduction_map(&g, n).unwrap(), n as usize).unwrap();
        let sd = spectral_data(&h, &[class_of(&h, "t")]).unwrap();
        let at_e = density(&sd, delocspec_core::spectral::DensityKind::Standard, 0.0).unwrap();
        let at_t = kernel_fourier_coefficient(&sd, 0).unwrap();
        let s = 0.5 / n as f64;
        float_worst = float_worst.max((at_e - 0.5 - s).abs()).max((at_t.re - 0.5 + s).abs()).max(at_t.im.abs());
    }

    // compressions: the t = −1 sector is a Dirichlet Laplacian with no kernel
    let mut comp_ratio: f64 = 0.0;
    let mut comp_bad = 0;
    let comp_exact: Vec<u32> = (1..=32).chain([64, 128, 256, 512, 1024]).collect();
    for &n in &comp_exact {
        let fs = FolnerSet::box_set(n as usize, 1, n as usize).unwrap();
        let h = build_folner_compression(&a, &fs).unwrap();
        let (at_e, raw) = kernel_coefficients_exact(&h, &class_of(&h, "t")).unwrap();
        for v in [rational(&at_e), rational(&raw)] {
            let delta = (v - &half).abs();
            if delta > q(5, n as i64) {
                comp_bad += 1;
            }
            comp_ratio = comp_ratio.max(to_f64(&delta) * n as f64);
        }
    }
    for &n in float_sizes.iter().filter(|&&n| n <= 512) {
        let fs = FolnerSet::box_set(n as usize, 1, n as usize).unwrap();
        let h = build_folner_compression(&a, &fs).unwrap();
        let sd = spectral_data(&h, &[class_of(&h, "t")]).unwrap();
        let at_e = density(&sd, delocspec_core::spectral::DensityKind::Standard, 0.0).unwrap();
        let at_t = kernel_fourier_coefficient(&sd, 0).unwrap().re;
        for v in [at_e, at_t] {
            let r = (v - 0.5).abs() * n as f64;
            if r > 5.0 + FLOAT_TOL * n as f64 {
                comp_bad += 1;
            }
            comp_ratio = comp_ratio.max(r);
        }
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: exact_bad == 0
            && exact_worst <= EXACT_TOL_PRODUCT
            && float_worst <= FLOAT_TOL
            && comp_bad == 0
            && elapsed < BUDGET_PRODUCT,
        detail: format!(
            "quotients n ≤ 1024 exact: mismatches {exact_bad}, max err {exact_worst:.1e} (tol {EXACT_TOL_PRODUCT:.0e}); \
             float n ≤ 512: max err {float_worst:.1e} (tol {FLOAT_TOL:.0e}); \
             compressions: max n·|delta| {comp_ratio:.3} (≤ 5), violations {comp_bad}; {:.2}s (budget {}s)",
            elapsed.as_secs_f64(),
            BUDGET_PRODUCT.as_secs()
        ),
    }
}

/// `lndet(3+u+u⁻¹)` at ℤ/4096 against the quadrature oracle and the closed
/// form, and cycle graph kernels against quotient stages.
fn determinant_agreement() -> Outcome {
    let z = common::z();
    let a = elem(&z, "3 + u + u^-1");
    let closed = ((3.0 + 5f64.sqrt()) / 2.0).ln();
    let h = build_inverse_limit_stage(&a, &reduction_map(&z, 4096).unwrap(), 4096).unwrap();
    let stage = lndet_definite(&h).unwrap();
    let oracle = oracle_lndet(&a, 1 << 16).unwrap().value;
    let lndet_err = (stage - oracle).abs().max((stage - closed).abs());

    let mut eig_err: f64 = 0.0;
    let mut sofic_ok = true;
    for n in [8u32, 16, 64, 256, 1024] {
        let r = ((n - 2) / 2) as usize;
        let cg = certify(&LabeledGraph::reduction(&z, n).unwrap(), &z, r, None).unwrap();
        let k = sofic_kernel(&a, &cg).unwrap();
        let mut from_graph = eigvalsh(&k.good_block()).unwrap();
        from_graph.sort_by(f64::total_cmp);
        let quotient = build_inverse_limit_stage(&a, &reduction_map(&z, n).unwrap(), n as usize).unwrap();
        let from_quotient = stage_eigenvalues(&quotient).unwrap();
        sofic_ok &= cg.delta == 0.0 && from_graph.len() == from_quotient.len();
        for (x, y) in from_graph.iter().zip(&from_quotient) {
            eig_err = eig_err.max((x - y).abs());
        }
    }
    // the 4096-cycle determinant against the quotient determinant
    let cg = certify(&LabeledGraph::reduction(&z, 4096).unwrap(), &z, 2047, None).unwrap();
    let sofic = det_star(&sofic_kernel(&a, &cg).unwrap()).unwrap().ln_value / 4096.0;
    let sofic_err = (sofic - stage).abs();
    Outcome {
        pass: lndet_err <= LNDET_TOL && eig_err <= EIGEN_TOL && sofic_err <= EIGEN_TOL && sofic_ok,
        detail: format!(
            "stage {stage:.6}, oracle {oracle:.6}, ln((3+√5)/2) {closed:.6}, max err {lndet_err:.1e} (tol {LNDET_TOL:.0e}); \
             cycle vs quotient eigenvalues max diff {eig_err:.1e}, 4096-cycle lndet diff {sofic_err:.1e} (tol {EIGEN_TOL:.0e})"
        ),
    }
}

/// Random integer `b*b` with support radius ≤ 3, on cycles (ℤ) and on
/// Cayley graphs of finite groups; every `det*` must be certified.
fn semi_integral() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e11);
    let z = common::z();
    let mut targets: Vec<(Group, Vec<LabeledGraph>)> =
        vec![(z.clone(), [8u32, 13, 32].iter().map(|&n| LabeledGraph::reduction(&z, n).unwrap()).collect())];
    for (_, g) in common::finite_backends() {
        targets.push((g.clone(), vec![LabeledGraph::cayley(&g).unwrap()]));
    }
    let (mut matrices, mut stages, mut certified, mut negative) = (0, 0, 0, 0);
    for (g, graphs) in &targets {
        let mut made = 0;
        while made < 15 {
            let d = 1 + made % 2;
            let a = common::random_positive(g, d, 3, 2, false, &mut rng);
            let radius = a.support_radius().unwrap() as usize;
            if radius > 3 {
                continue;
            }
            made += 1;
            matrices += 1;
            for graph in graphs {
                let r = if g.is_finite() { radius } else { radius.min((graph.vertex_count() - 2) / 2) };
                let cg = certify(graph, g, r.max(radius), None).unwrap();
                let det = det_star(&sofic_kernel(&a, &cg).unwrap()).unwrap();
                stages += 1;
                certified += det.certified as usize;
                negative += (det.ln_value < -1e-9) as usize;
            }
        }
    }
    Outcome {
        pass: matrices >= 50 && certified == stages && negative == 0,
        detail: format!("{matrices} matrices, {stages} stages, {certified} certified, {negative} with ln det* < 0"),
    }
}

fn all_classes(g: &Group) -> Vec<ConjugacyClassInfo> {
    let mut seen: Vec<ConjugacyClassInfo> = Vec::new();
    for x in g.elements().unwrap() {
        if !seen.iter().any(|c| c.contains(&x)) {
            seen.push(g.conjugacy_class(&x, 1 << 10).unwrap());
        }
    }
    seen
}

/// `|c|² ≤ c_e²` for every coefficient `c` of each diagonal entry, exactly.
fn coefficients_dominated(a: &RingMatrix) -> bool {
    let e = a.group().identity();
    (0..a.dim()).all(|k| {
        let entry = a.get(k, k);
        let ce = match entry.coefficient(&e) {
            Coefficient::Exact(c) => rational(&c),
            _ => unreachable!("integer matrices"),
        };
        entry.terms().values().all(|c| {
            let c = c.as_exact().unwrap();
            rational(&c.mul_ref(&c.conj())) <= &ce * &ce
        })
    })
}

/// Coefficient domination and per-eigenvalue weight domination on 500
/// random `b*b` per backend.
fn domination() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xd0d0);
    let mut backends: Vec<(String, Group, Option<u32>)> =
        common::finite_backends().into_iter().map(|(n, g)| (n.to_string(), g, None)).collect();
    backends.push(("Z via Z/8".into(), common::z(), Some(8)));
    backends.push(("Z/2xZ via Z/2xZ/6".into(), common::z2z(), Some(6)));
    let mut lines = Vec::new();
    let mut pass = true;
    for (name, g, quotient) in &backends {
        let (mut coeff_bad, mut float_bad, mut exact_bad) = (0, 0, 0);
        for i in 0..500 {
            let a = common::random_positive(g, 1 + i % 2, 3, 2, i % 3 == 0, &mut rng);
            coeff_bad += !coefficients_dominated(&a) as usize;
            let h = match quotient {
                None => delocspec_core::approximation::realize_over_finite(&a, 0, a.kappa().kappa).unwrap(),
                Some(n) => build_inverse_limit_stage(&a, &reduction_map(g, *n).unwrap(), *n as usize).unwrap(),
            };
            let classes = all_classes(&h.group);
            let sd = spectral_data(&h, &classes).unwrap();
            for (c, cls) in classes.iter().enumerate() {
                let size = cls.size().unwrap() as f64;
                for j in 0..sd.eigenvalues.len() {
                    if sd.weights_deloc[c][j].norm() > size * sd.weights_standard[j] + DOMINATION_TOL {
                        float_bad += 1;
                    }
                }
                // the kernel eigenspace, exactly
                if i % 5 == 0 {
                    let (std, raw) = kernel_coefficients_exact(&h, cls).unwrap();
                    let bound = std.scale(&BigRational::from_integer(BigInt::from(cls.size().unwrap())));
                    if rational(&raw.mul_ref(&raw.conj())) > rational(&bound.mul_ref(&bound)) {
                        exact_bad += 1;
                    }
                }
            }
        }
        pass &= coeff_bad == 0 && float_bad == 0 && exact_bad == 0;
        lines.push(format!("{name}: {coeff_bad}/{float_bad}/{exact_bad}"));
    }
    Outcome {
        pass,
        detail: format!(
            "violations (coefficients exact / eigenvalue weights tol {DOMINATION_TOL:.0e} / kernel weights exact, every 5th instance) {}",
            lines.join(", ")
        ),
    }
}

/// Telescope estimate for powers ≤ 6 on box compressions.
fn telescope() -> Outcome {
    let z = common::z();
    let z2z = common::z2z();
    let families: Vec<(RingMatrix, Vec<GroupElement>)> = vec![
        (elem(&z, "2 - u - u^-1"), vec![z.identity()]),
        (elem(&z, "3 + u + u^-1 + u^2 + u^-2"), vec![z.identity()]),
        (elem(&z2z, "(1 - t)(2 - u - u^-1)"), vec![z2z.identity(), z2z.generator("t").unwrap()]),
        (elem(&z2z, "4 + t + u + u^-1 + t u + t u^-1"), vec![z2z.identity(), z2z.generator("t").unwrap()]),
    ];
    let (mut total, mut passed) = (0, 0);
    let mut tightest: f64 = 0.0;
    for (a, gs) in &families {
        for size in [1usize, 2, 3, 5, 8, 16, 32, 64] {
            let fs = FolnerSet::box_set(size, 1, size).unwrap();
            for g in gs {
                for n in 1..=6 {
                    let c = telescope_check(a, &fs, g, n).unwrap();
                    total += 1;
                    passed += c.pass as usize;
                    if c.bound > 0.0 {
                        tightest = tightest.max((c.stage_value - c.limit_value).abs() / c.bound);
                    }
                }
            }
        }
    }
    Outcome {
        pass: passed == total,
        detail: format!("{passed}/{total} checks, largest |difference|/bound {tightest:.3}"),
    }
}

/// Sandwich chain on the Laplacian quotient stages.
fn sandwich() -> Outcome {
    let z = common::z();
    let a = elem(&z, "2 - u - u^-1");
    let sizes: Vec<u32> = (2..=64).chain((128..=4096).step_by(128)).collect();
    let stages: Vec<FiniteRealization> = sizes
        .iter()
        .map(|&n| build_inverse_limit_stage(&a, &reduction_map(&z, n).unwrap(), n as usize).unwrap())
        .collect();
    let (mut total, mut passed) = (0, 0);
    for lambda in [0.0, 0.5, 1.0] {
        for n in [4u32, 16, 64] {
            for s in sandwich_diagnostic(&stages, lambda, n).unwrap() {
                total += 1;
                passed += s.pass as usize;
            }
        }
    }
    Outcome {
        pass: passed == total,
        detail: format!("{passed}/{total} (λ, n, stage) triples; stages ℤ/n for n = 2..64 and 128..4096 step 128"),
    }
}

/// Determinant lower bounds for `b*b`, `b = 1 + i·u + t`, on ℤ/2×ℤ
/// quotients and box compressions.
fn lower_bounds() -> Outcome {
    let g = common::z2z();
    let b = elem(&g, "1 + z@4 u + t");
    let a = b.adjoint().mul(&b).unwrap();
    let bounds = a.determinant_lower_bound_rhs().unwrap();
    let (mut total, mut passed) = (0, 0);
    let mut min_lndet = f64::INFINITY;
    let mut min_dev = f64::INFINITY;
    let mut record = |h: &FiniteRealization, names: &[&str]| {
        let classes: Vec<ConjugacyClassInfo> = names.iter().map(|s| class_of(h, s)).collect();
        let sd = spectral_data(h, &classes).unwrap();
        let report = determinant_report(h, &sd, &a).unwrap();
        min_lndet = min_lndet.min(report.lndet);
        for v in report.lndet_dev_re.iter().chain(&report.lndet_dev_im) {
            min_dev = min_dev.min(*v);
        }
        total += 1;
        passed += report.respects_bounds(BOUND_SLACK).unwrap() as usize;
    };
    for n in (2..=64).chain([96, 128, 256]) {
        let h = build_inverse_limit_stage(&a, &reduction_map(&g, n).unwrap(), n as usize).unwrap();
        record(&h, &["t", "u"]);
    }
    for n in [1usize, 2, 4, 8, 16, 32, 64, 128] {
        let h = build_folner_compression(&a, &FolnerSet::box_set(n, 1, n).unwrap()).unwrap();
        record(&h, &["t"]);
    }
    Outcome {
        pass: passed == total && !bounds.conjugate_kappas.is_empty(),
        detail: format!(
            "{passed}/{total} stages; B₀ = {:.4}, B₁ = {:.4}; min lndet {min_lndet:.4}, min deviated {min_dev:.4}",
            bounds.b0, bounds.b1
        ),
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("Laplacian stage deltas", laplacian_deltas),
        ("delocalized coefficient on Z/2 x Z", product_deltas),
        ("determinant oracle agreement", determinant_agreement),
        ("semi-integral determinants", semi_integral),
        ("positivity and domination", domination),
        ("trace telescope estimate", telescope),
        ("polynomial sandwich", sandwich),
        ("determinant lower bounds", lower_bounds),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        failed += !out.pass as usize;
        println!(
            "{} {}. {name}: {} [{:.2}s]",
            if out.pass { "PASS" } else { "FAIL" },
            i + 1,
            out.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
