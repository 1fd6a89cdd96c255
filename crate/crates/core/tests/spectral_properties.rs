mod common;

use common::{finite_backends, random_matrix, random_positive};
use delocspec_core::approximation::{realize_over_finite, FiniteRealization};
use delocspec_core::group::{ConjugacyClassInfo, Group};
use delocspec_core::ring::{Coefficient, RingMatrix};
use delocspec_core::spectral::{
    density, fuglede_kadison, kernel_dim_exact, sandwich_polynomial, spectral_data, within_norm_bound, DensityKind,
};
use num_traits::ToPrimitive;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn all_classes(g: &Group) -> Vec<ConjugacyClassInfo> {
    let mut seen: Vec<ConjugacyClassInfo> = Vec::new();
    for x in g.elements().unwrap() {
        if !seen.iter().any(|c| c.contains(&x)) {
            seen.push(g.conjugacy_class(&x, 1 << 10).unwrap());
        }
    }
    seen
}

fn realize(a: &RingMatrix) -> FiniteRealization {
    realize_over_finite(a, 0, a.kappa().kappa).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn deviated_weights_positive_and_dominated(seed in any::<u64>(), d in 1usize..=2, gaussian in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (name, g) in finite_backends() {
            let a = random_positive(&g, d, 3, 2, gaussian, &mut rng);
            let h = realize(&a);
            let classes = all_classes(&g);
            let sd = spectral_data(&h, &classes).unwrap();
            for c in 0..classes.len() {
                let size = sd.class_size(c).unwrap() as f64;
                for j in 0..sd.eigenvalues.len() {
                    let std = sd.weights_standard[j];
                    let raw = sd.weights_deloc[c][j];
                    prop_assert!(raw.norm() <= size * std + 1e-9, "{}: |{}| > {}·{}", name, raw, size, std);
                    for kind in [DensityKind::DelocRe(c), DensityKind::DelocIm(c)] {
                        prop_assert!(sd.weight(kind, j).unwrap().re >= -1e-9, "{}", name);
                    }
                }
                let total = sd.total(DensityKind::DelocRaw(c)).unwrap();
                let expected = if classes[c].contains(&g.identity()) { d as f64 } else { 0.0 };
                prop_assert!((total.re - expected).abs() < 1e-9 && total.im.abs() < 1e-9, "{}", name);
            }
            prop_assert!((sd.total(DensityKind::Standard).unwrap().re - d as f64).abs() < 1e-9);
            prop_assert!(within_norm_bound(&sd, a.kappa().kappa));
            prop_assert!(h.matrix.hermitian_deviation() <= 1e-12);
        }
    }

    #[test]
    fn exact_and_float_kernels_agree(seed in any::<u64>(), d in 1usize..=2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (_, g) in finite_backends() {
            // products with a projection-like factor produce kernels often
            let b = random_matrix(&g, d, 2, 1, false, &mut rng);
            let a = b.adjoint().mul(&b).unwrap();
            let h = realize(&a);
            let sd = spectral_data(&h, &[]).unwrap();
            let exact = kernel_dim_exact(&h).unwrap().to_f64().unwrap();
            prop_assert!((exact - density(&sd, DensityKind::Standard, 0.0).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn stage_traces_equal_ring_traces_over_finite_groups(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (_, g) in finite_backends() {
            let a = random_matrix(&g, 2, 3, 2, true, &mut rng);
            let h = realize(&a);
            for cls in all_classes(&g) {
                for n in 1..=3u32 {
                    let (std, raw) = h.power_traces_exact(n, &cls).unwrap();
                    let p = a.pow(n).unwrap();
                    prop_assert_eq!(Coefficient::Exact(std), p.trace_standard());
                    prop_assert_eq!(Coefficient::Exact(raw), p.trace_delocalized(&cls).unwrap());
                }
            }
        }
    }

    #[test]
    fn lndet_is_monotone(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (_, g) in finite_backends() {
            let id = RingMatrix::identity(&g, 1);
            let a = random_positive(&g, 1, 3, 2, false, &mut rng).add(&id).unwrap();
            let b = a.add(&random_positive(&g, 1, 2, 2, false, &mut rng)).unwrap();
            let la = fuglede_kadison(&spectral_data(&realize(&a), &[]).unwrap(), DensityKind::Standard).unwrap();
            let lb = fuglede_kadison(&spectral_data(&realize(&b), &[]).unwrap(), DensityKind::Standard).unwrap();
            prop_assert!(la <= lb + 1e-9, "{} > {}", la, lb);
        }
    }

    #[test]
    fn sandwich_polynomial_brackets_the_step(lambda in 0.0f64..4.0, n in 1u32..40) {
        let p = sandwich_polynomial(4.0, lambda, n).unwrap();
        let step = 1.0 / n as f64;
        for i in 0..=2000 {
            let x = 4.0 * i as f64 / 2000.0;
            let v = p.eval(x);
            let lo = if x <= lambda { 1.0 } else { 0.0 };
            let hi = if x <= lambda + step { 1.0 } else { 0.0 } + step;
            prop_assert!(lo <= v && v <= hi, "x = {}, P = {}", x, v);
        }
    }
}

#[test]
fn integer_stages_have_nonnegative_lndet() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (_, g) in finite_backends() {
        for _ in 0..20 {
            let a = random_positive(&g, 2, 3, 2, false, &mut rng);
            let l = fuglede_kadison(&spectral_data(&realize(&a), &[]).unwrap(), DensityKind::Standard).unwrap();
            assert!(l == f64::NEG_INFINITY || l >= -1e-9, "{l}");
        }
    }
}
