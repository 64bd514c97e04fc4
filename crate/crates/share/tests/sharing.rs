//! Round-trip, integrity, permutation, and additive-conversion tests for
//! share dispersal.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tnvault_share::{
    additive_to_tn, apply_mode_permutations, generate_shares, reconstruct_from_shares,
    representation_from_shares, tn_to_additive, tt_sum, ShareError, ShareManifest, ShareParams,
};
use tnvault_core::decomp::{tt_svd, Representation, Scheme};
use tnvault_core::metrics::pearson;
use tnvault_core::tensor::DenseTensor;

fn random_tensor(shape: &[usize], seed: u64) -> DenseTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseTensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

#[test]
fn round_trip_all_schemes() {
    let t = random_tensor(&[6, 5, 4], 1);
    let full_ranks = vec![6, 5, 4];
    let cases = vec![
        (Scheme::Tt, ShareParams::Epsilon(0.1), 0.1),
        (Scheme::Tr, ShareParams::Epsilon(0.1), 0.15),
        (Scheme::Tucker, ShareParams::Ranks(full_ranks), 1e-9),
        (Scheme::Ht, ShareParams::Ranks(vec![16]), 1e-9),
    ];
    for (scheme, params, tol) in cases {
        for permute in [false, true] {
            let (shares, manifest, _) =
                generate_shares(&t, scheme, &params, 0.05, 3, permute, 42).unwrap();
            let back = reconstruct_from_shares(&manifest, &shares).unwrap();
            let err = t.relative_error(&back);
            assert!(
                err <= tol,
                "{scheme} permute={permute}: err {err} > {tol}"
            );
        }
    }
}

#[test]
fn manifest_counts_and_assignment() {
    let t = random_tensor(&[5, 4, 6], 2);
    let (shares, manifest, _) =
        generate_shares(&t, Scheme::Tt, &ShareParams::Epsilon(0.1), 0.05, 3, false, 7).unwrap();
    assert_eq!(manifest.fragments.len(), 3);
    assert_eq!(shares.len(), 3);
    // round robin: one core per server, never two adjacent cores together
    for f in &manifest.fragments {
        assert_eq!(f.server_id, f.core_index % 3);
    }
    let ids: std::collections::BTreeSet<&str> = manifest
        .fragments
        .iter()
        .map(|f| f.fragment_id.as_str())
        .collect();
    assert_eq!(ids.len(), 3);
}

#[test]
fn missing_fragment_is_named() {
    let t = random_tensor(&[4, 4, 4], 3);
    let (mut shares, manifest, _) =
        generate_shares(&t, Scheme::Tt, &ShareParams::Epsilon(0.2), 0.05, 3, false, 1).unwrap();
    let victim = manifest.fragments[1].fragment_id.clone();
    shares.remove(&victim);
    match reconstruct_from_shares(&manifest, &shares) {
        Err(ShareError::MissingFragment(id)) => assert_eq!(id, victim),
        other => panic!("expected MissingFragment, got {other:?}"),
    }
}

#[test]
fn single_byte_corruption_detected() {
    let t = random_tensor(&[4, 5, 4], 4);
    let (shares, manifest, _) =
        generate_shares(&t, Scheme::Tt, &ShareParams::Epsilon(0.2), 0.05, 3, false, 2).unwrap();
    for entry in &manifest.fragments {
        let mut broken = shares.clone();
        let mut bytes = broken.get(&entry.fragment_id).unwrap().to_vec();
        let flip_at = bytes.len() / 2;
        bytes[flip_at] ^= 0x01;
        broken.insert(entry.fragment_id.clone(), bytes);
        match reconstruct_from_shares(&manifest, &broken) {
            Err(ShareError::HashMismatch(id)) => assert_eq!(id, entry.fragment_id),
            other => panic!("expected HashMismatch, got {other:?}"),
        }
    }
}

#[test]
fn different_seeds_different_bytes_same_value() {
    let t = random_tensor(&[5, 5, 5], 5);
    let (s1, m1, _) =
        generate_shares(&t, Scheme::Tt, &ShareParams::Epsilon(0.1), 0.05, 3, false, 10).unwrap();
    let (s2, m2, _) =
        generate_shares(&t, Scheme::Tt, &ShareParams::Epsilon(0.1), 0.05, 3, false, 11).unwrap();
    let b1 = s1.get(&m1.fragments[0].fragment_id).unwrap();
    let b2 = s2.get(&m2.fragments[0].fragment_id).unwrap();
    assert_ne!(b1, b2, "different seeds must randomize the shares");
    let r1 = reconstruct_from_shares(&m1, &s1).unwrap();
    let r2 = reconstruct_from_shares(&m2, &s2).unwrap();
    assert!(t.relative_error(&r1) <= 0.1);
    assert!(t.relative_error(&r2) <= 0.1);
    assert!(r1.relative_error(&r2) <= 0.2);
}

#[test]
fn permutation_roundtrip_is_bitwise() {
    let t = random_tensor(&[5, 4, 3], 6);
    let (tt, _) = tt_svd(&t, 0.2, true, 0.05, 3).unwrap();
    let rep = Representation::Tt(tt);
    let mut permuted = rep.clone();
    let seeds = vec![11, 22, 33];
    apply_mode_permutations(&mut permuted, &seeds, false).unwrap();
    assert_ne!(rep, permuted);
    apply_mode_permutations(&mut permuted, &seeds, true).unwrap();
    assert_eq!(rep, permuted);
}

#[test]
fn permuted_reconstruction_relabels_indices() {
    let t = random_tensor(&[4, 3, 5], 7);
    let (tt, _) = tt_svd(&t, 1e-10, false, 0.05, 0).unwrap();
    let original = tt.reconstruct().unwrap();
    let mut rep = Representation::Tt(tt);
    let seeds = vec![101, 202, 303];
    apply_mode_permutations(&mut rep, &seeds, false).unwrap();
    let permuted = rep.reconstruct().unwrap();
    let perms: Vec<Vec<usize>> = original
        .shape()
        .iter()
        .zip(&seeds)
        .map(|(&n, &s)| tnvault_share::permutation_from_seed(n, s))
        .collect();
    for i0 in 0..4 {
        for i1 in 0..3 {
            for i2 in 0..5 {
                let want = original.get(&[perms[0][i0], perms[1][i1], perms[2][i2]]);
                let got = permuted.get(&[i0, i1, i2]);
                assert!((want - got).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn identity_permutation_seeds_change_nothing_on_reconstruct() {
    let t = random_tensor(&[4, 4, 4], 8);
    let (s1, m1, _) =
        generate_shares(&t, Scheme::Tt, &ShareParams::Epsilon(0.1), 0.05, 3, true, 21).unwrap();
    // permutation is undone during reconstruction
    let back = reconstruct_from_shares(&m1, &s1).unwrap();
    assert!(t.relative_error(&back) <= 0.1);
    // representation rebuilt from shares equals the unpermuted one
    let rep = representation_from_shares(&m1, &s1).unwrap();
    assert_eq!(rep.mode_sizes(), vec![4, 4, 4]);
}

#[test]
fn manifest_json_is_canonical_and_parses_back() {
    let t = random_tensor(&[4, 4, 4], 9);
    let (_, manifest, _) =
        generate_shares(&t, Scheme::Tucker, &ShareParams::Ranks(vec![4, 4, 4]), 0.05, 4, false, 3)
            .unwrap();
    let json = manifest.to_canonical_json();
    // keys sorted: "created_at" precedes "fragments" precedes "scheme"
    let ca = json.find("\"created_at\"").unwrap();
    let fr = json.find("\"fragments\"").unwrap();
    let sc = json.find("\"scheme\"").unwrap();
    assert!(ca < fr && fr < sc);
    let back = ShareManifest::from_json(&json).unwrap();
    assert_eq!(back.fragments.len(), manifest.fragments.len());
    assert_eq!(back.structure.ranks, manifest.structure.ranks);
}

#[test]
fn additive_to_tn_sum_recovers_secret() {
    let secret = random_tensor(&[5, 4, 4], 10);
    let mask = random_tensor(&[5, 4, 4], 11);
    let shares = vec![secret.sub(&mask).unwrap(), mask];
    let eps = 0.05;
    let tts = additive_to_tn(&shares, eps, 0.05, &[1, 2]).unwrap();
    let summed = tt_sum(&tts).unwrap();
    let err = secret.relative_error(&summed.reconstruct().unwrap());
    // each share contributes at most eps of its own norm
    let bound = eps
        * shares
            .iter()
            .map(|s| s.frobenius_norm())
            .sum::<f64>()
        / secret.frobenius_norm();
    assert!(err <= 2.0 * bound.max(eps), "err {err} bound {bound}");
}

#[test]
fn additive_single_share_is_plain_decomposition() {
    let secret = random_tensor(&[4, 4, 4], 12);
    let tts = additive_to_tn(std::slice::from_ref(&secret), 0.05, 0.05, &[5]).unwrap();
    assert_eq!(tts.len(), 1);
    assert!(secret.relative_error(&tts[0].reconstruct().unwrap()) <= 0.05);
}

#[test]
fn tn_to_additive_sums_exactly() {
    let secret = random_tensor(&[4, 5, 4], 13);
    let (tt, _) = tt_svd(&secret, 1e-10, true, 0.05, 6).unwrap();
    let shares = tn_to_additive(&tt, 3, 99).unwrap();
    assert_eq!(shares.len(), 3);
    let mut sum = DenseTensor::zeros(&[4, 5, 4]);
    for s in &shares {
        sum = sum.add(s).unwrap();
    }
    let value = tt.reconstruct().unwrap();
    let diff = value.sub(&sum).unwrap().frobenius_norm();
    assert!(diff <= 1e-12, "absolute residual {diff}");
    // deterministic per seed
    let again = tn_to_additive(&tt, 3, 99).unwrap();
    assert_eq!(shares, again);
}

#[test]
fn tn_to_additive_blinding_shares_look_uniform() {
    // 10^4 draws: roughly uniform histogram and negligible correlation with
    // the secret.
    let secret = random_tensor(&[10, 10, 100], 14);
    let (tt, _) = tt_svd(&secret, 0.3, true, 0.05, 7).unwrap();
    let shares = tn_to_additive(&tt, 2, 123).unwrap();
    let blind = &shares[0];
    assert_eq!(blind.len(), 10_000);
    // sign balance within 5 sigma of a fair coin
    let positives = blind.data().iter().filter(|v| **v > 0.0).count() as f64;
    let sigma = (10_000.0f64 * 0.25).sqrt();
    assert!((positives - 5_000.0).abs() < 5.0 * sigma);
    // correlation with the secret is tiny
    let rho = pearson(blind.data(), secret.data()).unwrap();
    assert!(rho < 0.05, "blinding share correlates with secret: {rho}");
}

#[test]
fn seeded_random_assignment_is_balanced_and_deterministic() {
    let t = random_tensor(&[4, 4, 4, 4], 30);
    let (tt, _) = tt_svd(&t, 0.3, true, 0.05, 9).unwrap();
    let rep = Representation::Tt(tt);
    let (_, m1) = tnvault_share::shares_with_assignment(
        &rep,
        None,
        2,
        tnvault_share::Assignment::SeededRandom,
        5,
    )
    .unwrap();
    let (_, m2) = tnvault_share::shares_with_assignment(
        &rep,
        None,
        2,
        tnvault_share::Assignment::SeededRandom,
        5,
    )
    .unwrap();
    let servers = |m: &tnvault_share::ShareManifest| -> Vec<usize> {
        let mut f: Vec<_> = m.fragments.iter().collect();
        f.sort_by_key(|e| e.core_index);
        f.iter().map(|e| e.server_id).collect()
    };
    assert_eq!(servers(&m1), servers(&m2), "assignment must be seed-deterministic");
    // balanced: with 4 cores on 2 servers each holds exactly 2
    let mut counts = [0usize; 2];
    for s in servers(&m1) {
        counts[s] += 1;
    }
    assert_eq!(counts, [2, 2]);
    // a different seed gives a different placement eventually
    let mut differs = false;
    for alt in 6..30u64 {
        let (_, m3) = tnvault_share::shares_with_assignment(
            &rep,
            None,
            2,
            tnvault_share::Assignment::SeededRandom,
            alt,
        )
        .unwrap();
        if servers(&m3) != servers(&m1) {
            differs = true;
            break;
        }
    }
    assert!(differs);
}

#[test]
fn too_few_servers_rejected() {
    let t = random_tensor(&[4, 4, 4], 15);
    for n in [0, 1, 4] {
        let got = generate_shares(&t, Scheme::Tt, &ShareParams::Epsilon(0.2), 0.05, n, false, 0);
        assert!(
            matches!(got, Err(ShareError::TooFewServers { .. })),
            "n_servers = {n} must be rejected"
        );
    }
}
