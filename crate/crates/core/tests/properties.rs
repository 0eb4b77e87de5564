//! Randomized invariants over small dimensions.

use proptest::prelude::*;
use qinstrument::channels::{adjoint, apply, compose, heisenberg, pullback_povm};
use qinstrument::harness::random::{self, rng_for};
use qinstrument::harness::{joint_distribution, Step};
use qinstrument::lemma::{decompose, reconstruction_residual, verify_premise};
use qinstrument::matkit::{
    self, cr, hermitian_eigen, max_abs, partial_trace, psd_sqrt, tensor_product, trace_product,
    Matrix, Subsystem,
};
use qinstrument::measure::{apply_instrument, fuse_sequential, induced_povm, probabilities, LABEL_SEPARATOR};
use qinstrument::states::{mix, purify, steering_povm, Ensemble};
use qinstrument::{KrausChannel, LinearMap, QuantumMap, Tolerance};

fn tol() -> Tolerance {
    Tolerance::default()
}

fn hermitian(seed: u64, dim: usize) -> Matrix {
    let g = random::gaussian_matrix(&mut rng_for(seed), dim, dim);
    matkit::hermitize(&(&g + g.adjoint()))
}

/// Tr_B by explicit index sums.
fn trace_out_b(m: &Matrix, da: usize, db: usize) -> Matrix {
    Matrix::from_fn(da, da, |i, j| (0..db).map(|k| m[(i * db + k, j * db + k)]).sum())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigen_reconstruction(seed in any::<u64>(), dim in 2usize..=6) {
        let a = hermitian(seed, dim);
        let eig = hermitian_eigen(&a, &tol()).unwrap();
        prop_assert!(max_abs(&(eig.reconstruct() - &a)) <= 1e-9 * dim as f64);
        prop_assert!(eig.eigenvalues.windows(2).all(|w| w[0] >= w[1] - 1e-12));
    }

    #[test]
    fn sqrt_of_square(seed in any::<u64>(), dim in 2usize..=6) {
        let g = random::gaussian_matrix(&mut rng_for(seed), dim, dim);
        let s = matkit::hermitize(&(&g * g.adjoint()));
        let sq = &s * &s;
        prop_assert!(max_abs(&(psd_sqrt(&sq, &tol()).unwrap() - &s)) <= 1e-8 * max_abs(&s).max(1.0));
    }

    #[test]
    fn partial_trace_is_linear(seed in any::<u64>(), da in 1usize..=3, db in 1usize..=3, alpha in -2.0f64..2.0, beta in -2.0f64..2.0) {
        let mut rng = rng_for(seed);
        let a = random::gaussian_matrix(&mut rng, da * db, da * db);
        let b = random::gaussian_matrix(&mut rng, da * db, da * db);
        let combo = &a * cr(alpha) + &b * cr(beta);
        for keep in [Subsystem::A, Subsystem::B] {
            let lhs = partial_trace(&combo, (da, db), keep).unwrap();
            let rhs = partial_trace(&a, (da, db), keep).unwrap() * cr(alpha)
                + partial_trace(&b, (da, db), keep).unwrap() * cr(beta);
            prop_assert!(max_abs(&(lhs - rhs)) <= 1e-12);
        }
        let oracle = trace_out_b(&a, da, db);
        prop_assert!(max_abs(&(partial_trace(&a, (da, db), Subsystem::A).unwrap() - oracle)) <= 1e-12);
    }

    #[test]
    fn tensor_product_bilinear_and_associative(seed in any::<u64>(), alpha in -2.0f64..2.0) {
        let mut rng = rng_for(seed);
        let a = random::gaussian_matrix(&mut rng, 2, 2);
        let a2 = random::gaussian_matrix(&mut rng, 2, 2);
        let b = random::gaussian_matrix(&mut rng, 3, 3);
        let c = random::gaussian_matrix(&mut rng, 2, 2);
        let lhs = tensor_product(&(&a * cr(alpha) + &a2), &b);
        let rhs = tensor_product(&a, &b) * cr(alpha) + tensor_product(&a2, &b);
        prop_assert!(max_abs(&(lhs - rhs)) <= 1e-12);
        let left = tensor_product(&tensor_product(&a, &b), &c);
        let right = tensor_product(&a, &tensor_product(&b, &c));
        prop_assert!(max_abs(&(left - right)) <= 1e-12);
    }

    #[test]
    fn trace_rule_duality(seed in any::<u64>(), d_in in 2usize..=4, d_out in 2usize..=4) {
        let mut rng = rng_for(seed);
        let map = random::cptp(&mut rng, d_in, d_out, 3);
        let povm = random::povm(&mut rng, d_out, 3, &tol());
        let rho = random::density(&mut rng, d_in);
        let pulled = pullback_povm(&map, &povm, &tol()).unwrap();
        let out = apply(&map, rho.matrix()).unwrap();
        for ((_, f), (_, g)) in povm.outcomes().iter().zip(pulled.outcomes()) {
            let lhs = trace_product(&out, f.matrix());
            let rhs = trace_product(rho.matrix(), g.matrix());
            prop_assert!((lhs - rhs).norm() <= 1e-10);
        }
    }

    #[test]
    fn kraus_maps_are_cp(seed in any::<u64>(), d_in in 1usize..=4, d_out in 1usize..=4, n in 1usize..=4) {
        let map = random::cptp(&mut rng_for(seed), d_in, d_out, n);
        prop_assert!(map.choi().is_cp(&tol()));
    }

    #[test]
    fn compose_is_associative(seed in any::<u64>(), dims in prop::array::uniform4(1usize..=3)) {
        let mut rng = rng_for(seed);
        let f: QuantumMap = random::cptp(&mut rng, dims[0], dims[1], 2).into();
        let g: QuantumMap = random::cptp(&mut rng, dims[1], dims[2], 2).to_superoperator().into();
        let h: QuantumMap = random::cptp(&mut rng, dims[2], dims[3], 2).into();
        let left = compose(&h, &compose(&g, &f).unwrap()).unwrap();
        let right = compose(&compose(&h, &g).unwrap(), &f).unwrap();
        prop_assert!(max_abs(&(left.to_superoperator().matrix() - right.to_superoperator().matrix())) <= 1e-9);
    }

    #[test]
    fn linearity_of_maps(seed in any::<u64>(), dim in 2usize..=4, p in 0.0f64..=1.0) {
        let mut rng = rng_for(seed);
        let map = random::cptp(&mut rng, dim, dim, dim);
        let (a, b) = (random::density(&mut rng, dim), random::density(&mut rng, dim));
        let sup = map.to_superoperator();
        let mixed = a.matrix() * cr(p) + b.matrix() * cr(1.0 - p);
        for m in [&map as &dyn LinearMap, &sup as &dyn LinearMap] {
            let lhs = m.apply(&mixed).unwrap();
            let rhs = m.apply(a.matrix()).unwrap() * cr(p) + m.apply(b.matrix()).unwrap() * cr(1.0 - p);
            prop_assert!(max_abs(&(lhs - rhs)) <= 1e-12);
        }
    }

    #[test]
    fn adjoint_is_the_trace_dual(seed in any::<u64>(), d_in in 1usize..=3, d_out in 1usize..=3) {
        let mut rng = rng_for(seed);
        let map: QuantumMap = random::cptp(&mut rng, d_in, d_out, 2).to_superoperator().into();
        let x = random::gaussian_matrix(&mut rng, d_in, d_in);
        let f = random::gaussian_matrix(&mut rng, d_out, d_out);
        let lhs = trace_product(&map.apply(&x).unwrap(), &f);
        let rhs = trace_product(&x, &adjoint(&map).apply(&f).unwrap());
        prop_assert!((lhs - rhs).norm() <= 1e-10);
        let h = heisenberg(&map, &f).unwrap();
        prop_assert!((trace_product(&x, &h) - lhs).norm() <= 1e-10);
    }

    #[test]
    fn instrument_probabilities_sum_to_one(seed in any::<u64>(), d_in in 1usize..=4, d_out in 1usize..=4, k in 1usize..=4) {
        let mut rng = rng_for(seed);
        let inst = random::instrument(&mut rng, d_in, d_out, k, 2, &tol());
        let rho = random::density(&mut rng, d_in);
        let branches = apply_instrument(&inst, &rho).unwrap();
        let total: f64 = branches.iter().map(|b| b.probability).sum();
        prop_assert!((total - 1.0).abs() <= 1e-9);
        for b in branches {
            if let Some(s) = b.state {
                prop_assert!((matkit::trace(s.matrix()).re - 1.0).abs() <= 1e-12);
                prop_assert!(matkit::min_eigenvalue(s.matrix(), &tol()).unwrap() >= -1e-9);
            }
        }
        // induced effects reproduce the branch probabilities
        let povm = induced_povm(&inst, &tol()).unwrap();
        let direct = probabilities(&rho, &povm).unwrap();
        for (b, (_, p)) in apply_instrument(&inst, &rho).unwrap().iter().zip(direct) {
            prop_assert!((b.probability - p).abs() <= 1e-12);
        }
    }

    #[test]
    fn fusion_is_associative(seed in any::<u64>(), d in 1usize..=3) {
        let mut rng = rng_for(seed);
        let a = random::instrument(&mut rng, d, d, 2, 1, &tol());
        let b = random::instrument(&mut rng, d, d, 2, 2, &tol());
        let c = random::instrument(&mut rng, d, d, 2, 1, &tol());
        let left = fuse_sequential(&fuse_sequential(&a, &b, &tol()).unwrap(), &c, &tol()).unwrap();
        let right = fuse_sequential(&a, &fuse_sequential(&b, &c, &tol()).unwrap(), &tol()).unwrap();
        let rho = random::density(&mut rng, d);
        for ((l1, m1), (l2, m2)) in left.outcomes().iter().zip(right.outcomes()) {
            prop_assert_eq!(l1, l2);
            prop_assert!(max_abs(&(m1.apply(rho.matrix()).unwrap() - m2.apply(rho.matrix()).unwrap())) <= 1e-9);
        }
    }

    #[test]
    fn fused_program_of_three_matches_steps(seed in any::<u64>(), d in 2usize..=3) {
        let mut rng = rng_for(seed);
        let insts: Vec<_> = (0..3).map(|_| random::instrument(&mut rng, d, d, 2, 2, &tol())).collect();
        let ensemble = Ensemble::new(vec![(1.0, random::density(&mut rng, d))], &tol()).unwrap();
        let steps: Vec<Step> = insts.iter().cloned().map(Step::Measure).collect();
        let stepwise = joint_distribution(&ensemble, &steps).unwrap();
        let fused = fuse_sequential(&fuse_sequential(&insts[0], &insts[1], &tol()).unwrap(), &insts[2], &tol()).unwrap();
        let one_shot = joint_distribution(&ensemble, &[Step::Measure(fused)]).unwrap();
        for (key, p) in &stepwise {
            let q = one_shot.get(&vec![key.join(LABEL_SEPARATOR)]).copied().unwrap_or(0.0);
            prop_assert!((p - q).abs() <= 1e-9);
        }
    }

    #[test]
    fn equal_mixtures_give_equal_outcomes(seed in any::<u64>(), d in 2usize..=4) {
        let mut rng = rng_for(seed);
        let (e1, e2) = random::steered_pair(&mut rng, d, &tol());
        let povm = random::povm(&mut rng, d, 3, &tol());
        let inst = random::instrument(&mut rng, d, d, 3, 2, &tol());
        let stats = |e: &Ensemble| -> Vec<f64> {
            let mut acc = vec![0.0; povm.len()];
            for (q, rho) in e.members() {
                for (a, (_, p)) in acc.iter_mut().zip(probabilities(rho, &povm).unwrap()) {
                    *a += q * p;
                }
            }
            acc
        };
        for (a, b) in stats(&e1).iter().zip(stats(&e2)) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
        // unnormalized B_μ(ρ) is the same whichever decomposition produced ρ
        for (_, b) in inst.outcomes() {
            let out = |e: &Ensemble| {
                e.members().iter().fold(Matrix::zeros(d, d), |acc, (q, rho)| acc + b.apply(rho.matrix()).unwrap() * cr(*q))
            };
            prop_assert!(max_abs(&(out(&e1) - out(&e2))) <= 1e-10);
        }
    }

    #[test]
    fn purification_round_trip(seed in any::<u64>(), d in 1usize..=5, rank in 1usize..=5) {
        let rho = random::density_with_rank(&mut rng_for(seed), d, rank.min(d));
        let psi = purify(&rho, &tol()).unwrap();
        prop_assert!(max_abs(&(psi.reduced(Subsystem::B).into_matrix() - rho.matrix())) <= 1e-10);
    }

    #[test]
    fn steering_reproduces_random_ensembles(seed in any::<u64>(), d in 2usize..=4) {
        let mut rng = rng_for(seed);
        let (target, _) = random::steered_pair(&mut rng, d, &tol());
        let psi = purify(&mix(&target), &tol()).unwrap();
        let povm = steering_povm(&psi, &target, &tol()).unwrap();
        prop_assert!(povm.completeness_residual() <= tol().eps * d as f64);
        for (_, e) in povm.outcomes() {
            prop_assert!(matkit::min_eigenvalue(e.matrix(), &tol()).unwrap() >= -tol().eps);
        }
    }

    #[test]
    fn every_instrument_outcome_decomposes(seed in any::<u64>(), d_in in 1usize..=4, d_out in 1usize..=4) {
        let mut rng = rng_for(seed);
        let inst = random::instrument(&mut rng, d_in, d_out, 3, 2, &tol());
        let povm = induced_povm(&inst, &tol()).unwrap();
        let probes: Vec<Matrix> = (0..4).map(|_| random::density(&mut rng, d_in).into_matrix()).collect();
        for ((_, b), (_, f)) in inst.outcomes().iter().zip(povm.outcomes()) {
            verify_premise(b, f, &tol()).unwrap();
            let e = decompose(b, f, &tol()).unwrap();
            prop_assert!(e.trace_preservation_residual() <= 1e-9);
            prop_assert!(reconstruction_residual(b, &e, f, &probes, &tol()).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn lemma_round_trip(seed in any::<u64>(), d in 2usize..=5, rank in 1usize..=5) {
        let mut rng = rng_for(seed);
        let e0 = random::cptp(&mut rng, d, d, 2);
        let (f, root) = random::effect_with_root(&mut rng, d, rank.min(d), &tol());
        let b = e0.after(&KrausChannel::conjugation(root)).unwrap();
        let e = decompose(&b, &f, &tol()).unwrap();
        let probes: Vec<Matrix> = (0..3).map(|_| random::density(&mut rng, d).into_matrix()).collect();
        prop_assert!(reconstruction_residual(&b, &e, &f, &probes, &tol()).unwrap() <= 1e-9);
        prop_assert!(e.trace_preservation_residual() <= 1e-9);
    }
}
