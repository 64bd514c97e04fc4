//! Property tests for the structural and spectral invariants.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tnvault_core::decomp::TTRepresentation;
use tnvault_core::linalg::{sample_perturbation, truncated_svd, TruncationRule};
use tnvault_core::ops::{tt_add, tt_hadamard, tt_inner};
use tnvault_core::tensor::{DenseTensor, Matrix};

fn small_shape() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..=5, 1..=4)
}

fn tensor_for(shape: Vec<usize>, seed: u64) -> DenseTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseTensor::from_fn(&shape, |_| rng.random_range(-1.0..1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn matricize_dematricize_roundtrip(shape in small_shape(), seed in 0u64..1000) {
        let t = tensor_for(shape, seed);
        for mode in 0..t.ndim() {
            let m = t.matricize(mode).unwrap();
            let back = DenseTensor::dematricize(&m, mode, t.shape()).unwrap();
            prop_assert_eq!(&back, &t);
        }
    }

    #[test]
    fn reshape_is_involutive(shape in small_shape(), seed in 0u64..1000) {
        let t = tensor_for(shape.clone(), seed);
        let total: usize = shape.iter().product();
        let flat = t.reshape(&[total]).unwrap();
        let back = flat.reshape(&shape).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn permute_inverse_restores(seed in 0u64..1000) {
        let t = tensor_for(vec![4, 5, 6], seed);
        let perm = [2usize, 0, 1];
        let mut inv = [0usize; 3];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let back = t.permute_axes(&perm).unwrap().permute_axes(&inv).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn mode_products_commute_across_modes(seed in 0u64..1000) {
        let t = tensor_for(vec![3, 4, 2], seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
        let a = Matrix::from_fn(2, 3, |_, _| rng.random_range(-1.0..1.0));
        let b = Matrix::from_fn(3, 4, |_, _| rng.random_range(-1.0..1.0));
        let lhs = t.mode_product(&a, 0).unwrap().mode_product(&b, 1).unwrap();
        let rhs = t.mode_product(&b, 1).unwrap().mode_product(&a, 0).unwrap();
        prop_assert!(lhs.relative_error(&rhs) < 1e-12);
    }

    #[test]
    fn structural_ops_match_bruteforce(seed in 0u64..500) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sa: Vec<usize> = (0..3).map(|_| rng.random_range(1..=4)).collect();
        let sb: Vec<usize> = (0..3).map(|_| rng.random_range(1..=4)).collect();
        let a = tensor_for(sa.clone(), seed.wrapping_add(1));
        let b = tensor_for(sb.clone(), seed.wrapping_add(2));

        let k = a.kronecker(&b).unwrap();
        let mut idx = vec![0usize; 3];
        for _ in 0..k.len() {
            let ai: Vec<usize> = idx.iter().zip(&sb).map(|(i, s)| i / s).collect();
            let bi: Vec<usize> = idx.iter().zip(&sb).map(|(i, s)| i % s).collect();
            prop_assert_eq!(k.get(&idx), a.get(&ai) * b.get(&bi));
            for (i, s) in idx.iter_mut().zip(k.shape()) {
                *i += 1;
                if *i < *s { break; }
                *i = 0;
            }
        }

        let d = a.direct_sum(&b).unwrap();
        let mut idx = vec![0usize; 3];
        for _ in 0..d.len() {
            let in_a = idx.iter().zip(&sa).all(|(i, s)| i < s);
            let in_b = idx.iter().zip(&sa).all(|(i, s)| i >= s);
            let want = if in_a {
                a.get(&idx)
            } else if in_b {
                let shifted: Vec<usize> = idx.iter().zip(&sa).map(|(i, s)| i - s).collect();
                b.get(&shifted)
            } else {
                0.0
            };
            prop_assert_eq!(d.get(&idx), want);
            for (i, s) in idx.iter_mut().zip(d.shape()) {
                *i += 1;
                if *i < *s { break; }
                *i = 0;
            }
        }

        let h = a.hadamard(&a).unwrap();
        for (x, y) in h.data().iter().zip(a.data()) {
            prop_assert_eq!(*x, y * y);
        }
    }

    #[test]
    fn rel_tol_truncation_bound(rows in 2usize..8, cols in 2usize..10, seed in 0u64..500, tol_i in 0usize..3) {
        let tol = [0.5, 0.2, 0.05][tol_i];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
        let svd = truncated_svd(&m, TruncationRule::RelTol(tol)).unwrap();
        let rec = svd.reconstruct();
        let mut err = 0.0;
        for (a, b) in m.data().iter().zip(rec.data()) {
            err += (a - b) * (a - b);
        }
        prop_assert!(err.sqrt() <= tol * m.frobenius_norm() + 1e-12);
    }

    #[test]
    fn perturbation_cancellation(rows in 3usize..8, cols in 3usize..8, seed in 0u64..500) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
        let svd = truncated_svd(&m, TruncationRule::FixedRank(rows.min(cols))).unwrap();
        let rec = sample_perturbation(svd.rank(), 0.05, 0, seed).unwrap();
        let u = svd.u.scale_columns(&rec.inverse_entries()).unwrap();
        let w = svd.weighted_sv_t(&rec.entries);
        let perturbed = u.multiply(&w).unwrap();
        let plain = svd.reconstruct();
        let mut err = 0.0;
        for (a, b) in plain.data().iter().zip(perturbed.data()) {
            err += (a - b) * (a - b);
        }
        prop_assert!(err.sqrt() <= 1e-12 * plain.frobenius_norm().max(1.0));
    }

    #[test]
    fn tt_ops_match_dense(seed in 0u64..300) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=4usize);
        let shape: Vec<usize> = (0..n).map(|_| rng.random_range(2..=5)).collect();
        let ranks_a: Vec<usize> = (0..n - 1).map(|_| rng.random_range(1..=4)).collect();
        let ranks_b: Vec<usize> = (0..n - 1).map(|_| rng.random_range(1..=4)).collect();
        let mk = |ranks: &[usize], salt: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt);
            let cores: Vec<DenseTensor> = (0..n)
                .map(|k| {
                    let r0 = if k == 0 { 1 } else { ranks[k - 1] };
                    let r1 = if k == n - 1 { 1 } else { ranks[k] };
                    DenseTensor::from_fn(&[r0, shape[k], r1], |_| rng.random_range(-1.0..1.0))
                })
                .collect();
            TTRepresentation::new(cores).unwrap()
        };
        let a = mk(&ranks_a, 0x11);
        let b = mk(&ranks_b, 0x22);
        let da = a.reconstruct().unwrap();
        let db = b.reconstruct().unwrap();

        let sum = tt_add(&a, &b).unwrap();
        prop_assert!(da.add(&db).unwrap().relative_error(&sum.reconstruct().unwrap()) < 1e-10);
        for (k, (ra, rb)) in ranks_a.iter().zip(&ranks_b).enumerate() {
            prop_assert_eq!(sum.ranks()[k + 1], ra + rb);
        }

        let prod = tt_hadamard(&a, &b).unwrap();
        prop_assert!(
            da.hadamard(&db).unwrap().relative_error(&prod.reconstruct().unwrap()) < 1e-10
        );
        for (k, (ra, rb)) in ranks_a.iter().zip(&ranks_b).enumerate() {
            prop_assert_eq!(prod.ranks()[k + 1], ra * rb);
        }

        let dot = tt_inner(&a, &b).unwrap();
        let want: f64 = da.data().iter().zip(db.data()).map(|(x, y)| x * y).sum();
        prop_assert!((dot - want).abs() <= 1e-10 * want.abs().max(1.0));
    }
}
