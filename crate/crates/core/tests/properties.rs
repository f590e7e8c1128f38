use std::sync::LazyLock;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mtdrot::basis::{BasisSize, CoeffVector, DiscBasis};
use mtdrot::estimate::MomentAccumulator;
use mtdrot::invariants::{auto3_v, autocorr3_1d, autocorr3_2d, bin_map, lag_index_1d, AngularDesign, ForwardModel};
use mtdrot::model::{rotate1d, Micrograph, TargetSignal1D};
use mtdrot::recover::{align_error_1d, bispectrum_direct, invert_bispectrum, PhaseMethod};

static MODEL: LazyLock<ForwardModel> = LazyLock::new(|| {
    let basis = DiscBasis::build(3, BasisSize::Count(10)).unwrap();
    ForwardModel::new(basis.clone(), AngularDesign::nyquist(&basis))
});

fn signal() -> impl Strategy<Value = TargetSignal1D> {
    (1usize..=6).prop_flat_map(|n| {
        prop::collection::vec(-2.0f64..2.0, 2 * n).prop_map(move |v| TargetSignal1D::new(n, v).unwrap())
    })
}

fn coeffs() -> impl Strategy<Value = CoeffVector> {
    any::<u64>().prop_map(|s| MODEL.basis().random_coeffs(&mut ChaCha8Rng::seed_from_u64(s)))
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Smallest `|a_k|` relative to the largest.
fn spectral_floor(f: &TargetSignal1D) -> f64 {
    let len = f.values().len();
    let mags: Vec<f64> = (0..len)
        .map(|k| {
            f.values()
                .iter()
                .enumerate()
                .map(|(x, v)| Complex64::from_polar(*v, -2.0 * std::f64::consts::PI * (k * x) as f64 / len as f64))
                .sum::<Complex64>()
                .norm()
        })
        .collect();
    let max = mags.iter().cloned().fold(0.0, f64::max);
    mags.iter().cloned().fold(f64::INFINITY, f64::min) / max
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn triple_correlation_ignores_cyclic_shifts(f in signal(), t in any::<i64>()) {
        let n = f.n() as i64;
        let tau = t.rem_euclid(2 * n) - n;
        let a = auto3_v(&f);
        let b = auto3_v(&rotate1d(&f, tau).unwrap());
        prop_assert!(max_gap(&a, &b) <= 1e-12);
    }

    #[test]
    fn triple_correlation_is_symmetric(f in signal()) {
        let v = auto3_v(&f);
        let h = 2 * f.n() as i64;
        for x1 in -h..h {
            for x2 in -h..h {
                prop_assert_eq!(v[lag_index_1d(x1, x2, f.n())], v[lag_index_1d(x2, x1, f.n())]);
            }
        }
    }

    #[test]
    fn rotations_compose(f in signal(), a in any::<i64>(), b in any::<i64>()) {
        let n = f.n() as i64;
        let (a, b) = (a.rem_euclid(2 * n) - n, b.rem_euclid(2 * n) - n);
        let ab = (a + b + n).rem_euclid(2 * n) - n;
        let twice = rotate1d(&rotate1d(&f, a).unwrap(), b).unwrap();
        prop_assert_eq!(twice, rotate1d(&f, ab).unwrap());
    }

    #[test]
    fn bispectrum_is_shift_invariant(f in signal(), t in any::<i64>()) {
        let n = f.n() as i64;
        let g = rotate1d(&f, t.rem_euclid(2 * n) - n).unwrap();
        let a = bispectrum_direct(&f);
        prop_assert!(bispectrum_direct(&g).relative_distance(&a) <= 1e-12 || a.values.iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn bispectrum_inverts_up_to_shift(f in signal()) {
        prop_assume!(spectral_floor(&f) > 1e-2);
        for method in [PhaseMethod::Recursive, PhaseMethod::Averaged] {
            let g = invert_bispectrum(&bispectrum_direct(&f), method).unwrap();
            prop_assert!(align_error_1d(&g, &f).unwrap() <= 1e-8, "{:?}", method);
        }
    }

    #[test]
    fn cyclic_measurement_shift_leaves_autocorrelation(
        pixels in prop::collection::vec(-1.0f64..1.0, 48),
        s in 0usize..48,
    ) {
        let mut shifted = pixels.clone();
        shifted.rotate_left(s);
        let a = autocorr3_1d(&Micrograph { dim: 1, m: 48, pixels }, 3).unwrap();
        let b = autocorr3_1d(&Micrograph { dim: 1, m: 48, pixels: shifted }, 3).unwrap();
        prop_assert!(max_gap(&a, &b) <= 1e-12);
    }

    #[test]
    fn zero_padded_shift_inside_frame_leaves_autocorrelation(
        patch in prop::collection::vec(-1.0f64..1.0, 36),
        dr in 0usize..10,
        dc in 0usize..10,
    ) {
        let m = 24;
        let place = |r0: usize, c0: usize| {
            let mut pixels = vec![0.0; m * m];
            for i in 0..6 {
                for j in 0..6 {
                    pixels[(r0 + i) * m + c0 + j] = patch[i * 6 + j];
                }
            }
            Micrograph { dim: 2, m, pixels }
        };
        let a = autocorr3_2d(&place(4, 4), 2).unwrap();
        let b = autocorr3_2d(&place(4 + dr, 4 + dc), 2).unwrap();
        prop_assert!(max_gap(&a, &b) <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn invariant_ignores_rotation(v in coeffs(), phi in 0.0f64..std::f64::consts::TAU) {
        let a = MODEL.forward(&v).unwrap();
        let b = MODEL.forward(&v.steer(MODEL.basis(), phi)).unwrap();
        prop_assert!(b.relative_distance(&a) <= 1e-10);
    }

    #[test]
    fn invariant_is_cubic_and_symmetric(v in coeffs(), c in 0.1f64..3.0) {
        let a = MODEL.forward(&v).unwrap();
        let b = MODEL.forward(&v.scale(c)).unwrap();
        let mut cubed = a.clone();
        cubed.values.iter_mut().for_each(|z| *z *= c * c * c);
        prop_assert!(b.relative_distance(&cubed) <= 1e-12);
        let (swap, conj) = a.symmetry_residuals();
        prop_assert!(swap <= 1e-10 * a.norm() && conj <= 1e-10 * a.norm());
    }

    #[test]
    fn bins_conserve_the_total(v in coeffs(), b1 in 0.5f64..3.0, b2 in 0.5f64..3.0) {
        let s = MODEL.forward(&v).unwrap();
        let map = bin_map(3, b1, b2).unwrap();
        let binned = map.reduce(&s.values).unwrap();
        let total: Complex64 = s.values.iter().sum();
        let reduced: Complex64 = binned.iter().sum();
        prop_assert!((total - reduced).norm() <= 1e-9 * s.norm());
    }

    #[test]
    fn steering_is_a_group_action(v in coeffs(), a in -7.0f64..7.0, b in -7.0f64..7.0) {
        let basis = MODEL.basis();
        let twice = v.steer(basis, a).steer(basis, b);
        let once = v.steer(basis, a + b);
        let gap = twice.values.iter().zip(&once.values).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        prop_assert!(gap <= 1e-12 * v.norm());
        prop_assert!((twice.norm() - v.norm()).abs() <= 1e-12 * v.norm());
        prop_assert!(basis.real_constraint_residual(&twice) <= 1e-12 * v.norm());
    }

    #[test]
    fn real_parameters_round_trip(v in coeffs()) {
        let basis = MODEL.basis();
        let back = CoeffVector::from_real_params(basis, &v.to_real_params(basis));
        prop_assert_eq!(back, v);
    }

    #[test]
    fn accumulator_merge_laws(seeds in prop::array::uniform3(any::<u64>())) {
        let make = |seed: u64| {
            use rand::Rng;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut acc = MomentAccumulator::empty(1, 64, 2).unwrap();
            acc.sum_a.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
            acc.count = rng.random_range(0..5);
            acc.sum_pix = rng.random_range(-1.0..1.0);
            acc.sum_pix2 = rng.random_range(0.0..1.0);
            acc.pixel_count = 64 * acc.count;
            acc
        };
        let [a, b, c] = seeds.map(make);
        prop_assert_eq!(a.merge(&b).unwrap(), b.merge(&a).unwrap());
        let left = a.merge(&b).unwrap().merge(&c).unwrap();
        let right = a.merge(&b.merge(&c).unwrap()).unwrap();
        prop_assert!(max_gap(&left.sum_a, &right.sum_a) <= 1e-10);
        prop_assert_eq!(left.count, right.count);
        let empty = MomentAccumulator::empty(1, 64, 2).unwrap();
        prop_assert_eq!(a.merge(&empty).unwrap(), a);
    }
}
