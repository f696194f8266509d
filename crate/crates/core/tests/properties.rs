use fieldlab::experiment::config::{random_density, random_form, random_symmetric};
use fieldlab::experiment::{analytic_average, closed_form_average};
use fieldlab::gaussian::draw_batch;
use fieldlab::quantum::{generalized_average, t2n_variable, t_state, t_state_extended, t_variable};
use fieldlab::{Functional, GaussianState, SymmetricOperator};
use num_complex::Complex64;
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quadratic_average_is_alpha_tr_da(n in 1usize..7, seed in any::<u64>(), alpha in 1e-4f64..1.0) {
        let d = random_density(n, n, seed);
        let a = random_symmetric(n, seed ^ 1, 1.0);
        let rho = GaussianState::new(d.scaled(alpha), None).unwrap();
        let f = Functional::quadratic(a.clone());
        let v = analytic_average(&f, &rho, 2).unwrap();
        prop_assert!(rel(v, alpha * d.trace_product(&a).unwrap()) < 1e-12);
        let c = closed_form_average(&f, &rho).unwrap().unwrap();
        prop_assert!(rel(v, c) < 1e-12);
    }

    #[test]
    fn generalized_model_is_exact_on_even_polynomials(
        n in 1usize..4,
        seed in any::<u64>(),
        alpha in 1e-3f64..0.5,
        model in 2usize..4,
    ) {
        let mut terms = vec![random_form(2, n, seed, 1.0).unwrap(), random_form(4, n, seed ^ 2, 1.0).unwrap()];
        if model == 3 {
            terms.push(random_form(6, n, seed ^ 3, 1.0).unwrap());
        }
        let f = Functional::even_polynomial(terms).unwrap();
        let rho = GaussianState::new(random_density(n, 1 + (seed as usize % n), seed ^ 4).scaled(alpha), None).unwrap();
        let lhs = alpha
            * generalized_average(&t_state(&rho, alpha).unwrap(), &t2n_variable(&f, model, alpha).unwrap())
                .unwrap();
        let rhs = closed_form_average(&f, &rho).unwrap().unwrap();
        prop_assert!(rel(lhs, rhs) < 1e-10, "{lhs} vs {rhs}");
    }

    #[test]
    fn trig_closed_forms_match_diagonal_oracle(
        a in prop::collection::vec(-3.0f64..3.0, 1..5),
        alpha in 1e-3f64..1.0,
        seed in any::<u64>(),
    ) {
        let n = a.len();
        let weights = random_density(n, n, seed);
        let b: Vec<f64> = (0..n).map(|i| alpha * weights.get(i, i)).collect();
        let rho = GaussianState::new(SymmetricOperator::diagonal(&b), None).unwrap();
        let op = SymmetricOperator::diagonal(&a);
        let phi = a
            .iter()
            .zip(&b)
            .map(|(ai, bi)| Complex64::new(1.0, -2.0 * ai * bi).powf(-0.5))
            .fold(Complex64::new(1.0, 0.0), |acc, z| acc * z);
        let s = closed_form_average(&Functional::sin_quad(op.clone()), &rho).unwrap().unwrap();
        let c = closed_form_average(&Functional::cos_quad_minus_one(op), &rho).unwrap().unwrap();
        prop_assert!((s - phi.im).abs() < 1e-13);
        prop_assert!((c - (phi.re - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn correspondence_images_are_density_operators(n in 1usize..9, rank in 1usize..9, seed in any::<u64>(), alpha in 1e-8f64..10.0) {
        let r = rank.min(n);
        let rho = GaussianState::new(random_density(n, r, seed).scaled(alpha), None).unwrap();
        for d in [t_state(&rho, rho.dispersion()).unwrap(), t_state_extended(&rho).unwrap()] {
            prop_assert!((d.matrix().trace() - 1.0).abs() <= 1e-9);
            prop_assert!(d.min_eigenvalue().unwrap() >= -1e-12);
        }
    }

    #[test]
    fn batches_do_not_depend_on_chunk_scheduling(seed in any::<u64>(), count in 2usize..600, chunk in 1usize..64) {
        let rho = GaussianState::new(random_density(3, 3, seed), None).unwrap();
        let a = draw_batch(&rho, seed, count, chunk).unwrap();
        let b = draw_batch(&rho, seed, count, chunk).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.chunk_count, count.div_ceil(chunk));
        // a prefix of a longer batch is the same draws
        let longer = draw_batch(&rho, seed, count + chunk, chunk).unwrap();
        prop_assert_eq!(longer.sample(count - 1), a.sample(count - 1));
    }

    #[test]
    fn t_of_trig_is_second_derivative(n in 1usize..5, seed in any::<u64>()) {
        let a = random_symmetric(n, seed, 2.0);
        let sin = t_variable(&Functional::sin_quad(a.clone())).unwrap();
        let cos = t_variable(&Functional::cos_quad_minus_one(a.clone())).unwrap();
        prop_assert_eq!(sin, a);
        prop_assert_eq!(cos, SymmetricOperator::zeros(n));
    }
}
