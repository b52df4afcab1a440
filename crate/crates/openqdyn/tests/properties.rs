//! Cross-cutting invariants that hold for every input, checked on random
//! ensembles. These complement the scenario-specific assertions in the
//! acceptance suite.

use num_complex::Complex64;
use openqdyn::gates;
use openqdyn::genmodel::{
    self as genmodel, forward, lemma1_check, FeasibilityStatus, GenerationProblem, StateClass,
};
use openqdyn::linalg::{self, ComplexMatrix, Subsystem};
use openqdyn::magic::{
    classify, concurrence_pure, concurrence_spin_flip, kraus_cirac, ppt_separable, ClassLabel,
};
use openqdyn::states::{self, DensityMatrix};
use openqdyn::UnitaryGate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn classification_is_invariant_under_local_dressing() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let base = [
        gates::identity_gate(),
        gates::swap(),
        gates::cnot(),
        gates::dcnot(),
        gates::sqrt_swap(),
        gates::family_unitary(0.4, 1.1),
    ];
    for u in &base {
        let label = classify(u).unwrap().label;
        for _ in 0..20 {
            let a = states::random_unitary_matrix_with(&mut rng, 2);
            let b = states::random_unitary_matrix_with(&mut rng, 2);
            let cm = states::random_unitary_matrix_with(&mut rng, 2);
            let d = states::random_unitary_matrix_with(&mut rng, 2);
            let dressed = UnitaryGate::new(
                linalg::tensor(&a, &b)
                    .mul(u.matrix())
                    .mul(&linalg::tensor(&cm, &d)),
                (2, 2),
            )
            .unwrap();
            assert_eq!(classify(&dressed).unwrap().label, label);
        }
    }
}

#[test]
fn concurrence_agrees_with_spin_flip_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..1000 {
        let psi = states::random_pure_with(&mut rng, 4);
        let a = concurrence_pure(&psi).unwrap();
        let b = concurrence_spin_flip(&psi);
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
}

#[test]
fn ppt_separable_accepts_explicit_separable_mixtures() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..1000 {
        let terms = rng.gen_range(1..=4);
        let mut weights: Vec<f64> = (0..terms).map(|_| rng.gen_range(0.1..1.0)).collect();
        let norm: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= norm);
        let mut m = ComplexMatrix::zeros(4, 4);
        for w in &weights {
            let a = states::random_pure_with(&mut rng, 2);
            let b = states::random_pure_with(&mut rng, 2);
            let joint = linalg::kron_vec(&a, &b);
            m = m.add(&linalg::outer(&joint, &joint).scale(c(*w, 0.0)));
        }
        let rho = DensityMatrix::new(m, vec![2, 2]).unwrap();
        let v = ppt_separable(&rho).unwrap();
        assert!(v.separable, "separable mixture rejected: {:?}", v);
    }
    // and rejects a maximally entangled state
    let bell = DensityMatrix::pure(&gates::magic_state(2), vec![2, 2]).unwrap();
    assert!(!ppt_separable(&bell).unwrap().separable);
}

#[test]
fn lemma1_bound_never_violated_by_real_dynamics() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for k in 0..1000 {
        let rank = 1 + (k % 4);
        let rho_se = states::random_state_with(&mut rng, 4, rank)
            .unwrap()
            .with_dims(vec![2, 2])
            .unwrap();
        let u = states::random_two_qubit_gate_with(&mut rng);
        let (_, rsp) = forward(&u, &rho_se).unwrap();
        for rep in lemma1_check(&u, &rho_se, &rsp).unwrap() {
            assert!(
                rep.all_satisfied(),
                "eigenstate weight bound violated: {:?}",
                rep.per_k
            );
        }
    }
}

#[test]
fn forward_preserves_trace_and_positivity() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    for k in 0..200 {
        let rho_se = states::random_state_with(&mut rng, 4, 1 + (k % 4))
            .unwrap()
            .with_dims(vec![2, 2])
            .unwrap();
        let u = states::random_two_qubit_gate_with(&mut rng);
        let (rs, rsp) = forward(&u, &rho_se).unwrap();
        for r in [&rs, &rsp] {
            let spec = r.spectral();
            assert!(spec.weights.iter().all(|&w| w >= -1e-10));
            let tr: f64 = spec.weights.iter().sum();
            assert!((tr - 1.0).abs() < 1e-10);
        }
        // reduced input state is independent of the unitary
        let direct = DensityMatrix::new(
            linalg::partial_trace(rho_se.matrix(), (2, 2), Subsystem::Environment).unwrap(),
            vec![2],
        )
        .unwrap();
        assert!(rs.trace_distance(&direct) < 1e-12);
    }
}

#[test]
fn product_class_witnesses_are_also_qc_and_separable() {
    // class hierarchy on solver witnesses: PRODUCT ⊂ QC ⊂ SEPARABLE ⊂ ANY
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    for _ in 0..20 {
        let u = states::random_two_qubit_gate_with(&mut rng);
        let rho_s = DensityMatrix::maximally_mixed(2);
        let joint = DensityMatrix::new(
            linalg::tensor(
                rho_s.matrix(),
                DensityMatrix::pure(&linalg::ket(2, 0), vec![2]).unwrap().matrix(),
            ),
            vec![2, 2],
        )
        .unwrap();
        let (_, target) = forward(&u, &joint).unwrap();
        for class in [StateClass::Product, StateClass::Qc, StateClass::Separable] {
            let p = GenerationProblem::new(u.clone(), rho_s.clone(), target.clone(), class)
                .unwrap();
            let r = genmodel::solve(&p).unwrap();
            assert_eq!(
                r.status,
                FeasibilityStatus::Feasible,
                "{class:?} missed a transformation generated by a product state"
            );
            let w = r.witness.unwrap();
            assert!(ppt_separable(&w).unwrap().separable);
            let (ws, wsp) = forward(&u, &w).unwrap();
            assert!(ws.trace_distance(&rho_s) < 1e-5);
            assert!(wsp.trace_distance(&target) < 1e-5);
        }
    }
}

#[test]
fn swap_gate_classification_survives_tolerance_override() {
    // classification threshold is configurable; a slightly perturbed SWAP
    // flips between SWAP and GENERIC depending on the tolerance
    let wobble = openqdyn::magic::interaction_from_phases(&[1e-5, 2e-5, 3e-5, -6e-5]);
    let perturbed =
        UnitaryGate::new(gates::swap().matrix().mul(&wobble), (2, 2)).unwrap();
    let strict = openqdyn::magic::classify_with_tol(&perturbed, 1e-9).unwrap();
    let loose = openqdyn::magic::classify_with_tol(&perturbed, 1e-2).unwrap();
    assert_eq!(strict.label, ClassLabel::Generic);
    assert_eq!(loose.label, ClassLabel::Swap);
}

#[test]
fn kraus_cirac_factors_are_unitary_and_local() {
    let mut rng = ChaCha8Rng::seed_from_u64(27);
    for _ in 0..100 {
        let u = states::random_two_qubit_gate_with(&mut rng);
        let kc = kraus_cirac(&u).unwrap();
        for f in [&kc.left_s, &kc.left_e, &kc.right_s, &kc.right_e] {
            let g = f.dagger().mul(f);
            for i in 0..2 {
                for j in 0..2 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((g[(i, j)] - c(want, 0.0)).norm() < 1e-9);
                }
            }
        }
        // the interaction part is diagonal in the magic basis
        let ud = kc.interaction();
        for i in 0..4 {
            let phi = gates::magic_state(i);
            let img = ud.matvec(&phi);
            let overlap = linalg::inner(&phi, &img);
            assert!((overlap.norm() - 1.0).abs() < 1e-8);
        }
    }
}
