use nalgebra::DVector;
use proptest::prelude::*;

use agebif::branches::Model;
use agebif::cli::fmt_f64;
use agebif::evolve::{coupled_step, evolve_linear, StepperConfig};
use agebif::grid::{AgeField, BirthProfile, BirthShape, Discretization};
use agebif::params::ModelParams;
use agebif::spectral::{assemble_h, normalize_birth, spectral_radius};

const N_X: usize = 6;
const N_A: usize = 8;

fn disc() -> Discretization {
    Discretization::new(N_X, N_A, 1.0).unwrap()
}

fn field(values: &[f64]) -> AgeField {
    AgeField::from_fn(N_A + 1, N_X, |k, i| values[k * N_X + i])
}

fn coefficient() -> impl Strategy<Value = Vec<f64>> {
    // da = 1/8, so h >= -7 keeps da * max(0, -min h) < 1.
    prop::collection::vec(-7.0..20.0f64, (N_A + 1) * N_X)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_floats_round_trip(x in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
        let s = fmt_f64(x);
        prop_assert_eq!(s.parse::<f64>().unwrap(), x);
    }

    #[test]
    fn propagator_preserves_the_cone(h in coefficient(), phi in prop::collection::vec(0.0..5.0f64, N_X)) {
        let d = disc();
        let z = evolve_linear(&d, &field(&h), &DVector::from_vec(phi)).unwrap();
        prop_assert!(z.is_nonnegative());
    }

    #[test]
    fn radius_decreases_with_the_coefficient(
        h in coefficient(),
        bump in prop::collection::vec(0.0..3.0f64, (N_A + 1) * N_X),
    ) {
        let d = disc();
        let b = BirthProfile::from_shape(&BirthShape::Constant, &d.ages).unwrap();
        let lo = field(&h);
        let hi = lo.zip_map(&field(&bump), |a, c| a + c);
        let r_lo = spectral_radius(&assemble_h(&d, &lo, &b).unwrap()).unwrap().radius;
        let r_hi = spectral_radius(&assemble_h(&d, &hi, &b).unwrap()).unwrap().radius;
        prop_assert!(r_hi <= r_lo * (1.0 + 1e-12));
    }

    #[test]
    fn normalization_is_scale_invariant(scale in 0.01..100.0f64, slope in 0.0..2.0f64) {
        let d = disc();
        let raw = BirthProfile::from_samples(d.ages.nodes().map(|a| 1.0 + slope * a).collect(), &d.ages).unwrap();
        let (b1, c1) = normalize_birth(&d, &raw).unwrap();
        let (b2, c2) = normalize_birth(&d, &raw.scaled(scale)).unwrap();
        prop_assert!((c1 / (c2 * scale) - 1.0).abs() < 1e-10);
        for (x, y) in b1.samples().iter().zip(b2.samples()) {
            prop_assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0));
        }
        let r = spectral_radius(&agebif::spectral::assemble_h0(&d, &b1).unwrap()).unwrap().radius;
        prop_assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coupled_step_stays_nonnegative(
        u in prop::collection::vec(0.0..3.0f64, N_X),
        v in prop::collection::vec(0.0..3.0f64, N_X),
        gamma in 0.0..1.0f64,
    ) {
        let d = disc();
        let p = ModelParams { gamma, ..ModelParams::default() };
        let (un, vn) = coupled_step(&d, &DVector::from_vec(u), &DVector::from_vec(v), &p, &StepperConfig::default(), 1).unwrap();
        prop_assert!(un.iter().all(|&x| x >= -1e-14));
        prop_assert!(vn.iter().all(|&x| x >= -1e-14));
    }

    #[test]
    fn prey_branch_is_pointwise_monotone(eta in 1.2..3.0f64, gap in 0.05..1.0f64) {
        let d = Discretization::new(N_X, 32, 1.0).unwrap();
        let raw = BirthProfile::from_shape(&BirthShape::Constant, &d.ages).unwrap();
        let m = Model::new(d, &raw, ModelParams::default()).unwrap();
        let lo = agebif::branches::solve_prey(&m, eta).unwrap();
        let hi = agebif::branches::solve_prey(&m, eta + gap).unwrap();
        prop_assert!(hi.field.zip_map(&lo.field, |a, b| a - b).min() >= -1e-10);
    }
}
