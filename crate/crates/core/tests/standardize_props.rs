//! Invariance of the standard position and the restore cocycle.

mod common;

use common::{axis_rotation, normal_tensor, rel_dist, rng, rotation, symmetric_tensor};
use eqreg_core::linalg::{qr3, sym_eig3};
use eqreg_core::standardize::{
    restore_prediction, standardize, standardize_even, standardize_odd, standardize_tuple,
    FrameSource, SignGroup,
};
use eqreg_core::{Rot, Tensor, Tuple};
use proptest::prelude::*;

/// Eigenvalues of a symmetric 3×3 matrix from its characteristic
/// polynomial, by the trigonometric solution of the depressed cubic.
fn eigenvalues_oracle(a: &[[f64; 3]; 3]) -> [f64; 3] {
    let p1 = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
    let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    let p2 = (a[0][0] - q).powi(2) + (a[1][1] - q).powi(2) + (a[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    if p == 0.0 {
        return [q; 3];
    }
    let b: [[f64; 3]; 3] = std::array::from_fn(|i| {
        std::array::from_fn(|j| (a[i][j] - if i == j { q } else { 0.0 }) / p)
    });
    let det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1])
        - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let phi = (det / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    [e1, 3.0 * q - e1 - e3, e3]
}

fn sym_matrix(seed: u64) -> [[f64; 3]; 3] {
    symmetric_tensor(2, &mut rng(seed)).as_matrix3().unwrap()
}

/// `r1ᵀ pᵀ r2` must lie in the stabilizer the frame reported.
fn cocycle_holds(r1: &Rot, p: &Rot, r2: &Rot, stab: SignGroup, tol: f64) -> bool {
    let defect = r1.transpose() * p.transpose() * *r2;
    stab.contains(&defect, tol)
}

#[test]
fn eigenvalues_match_characteristic_polynomial() {
    for seed in 0..200 {
        let a = sym_matrix(seed);
        let eig = sym_eig3(&a).unwrap();
        let oracle = eigenvalues_oracle(&a);
        for k in 0..3 {
            assert!((eig.eigenvalues[k] - oracle[k]).abs() < 1e-12, "seed {seed}");
        }
    }
}

#[test]
fn qr_reproduces_input() {
    let mut g = rng(3);
    for _ in 0..100 {
        let a = normal_tensor(2, &mut g).as_matrix3().unwrap();
        let qr = qr3(&a).unwrap();
        let q = qr.q.matrix();
        for i in 0..3 {
            for j in 0..3 {
                let prod: f64 = (0..3).map(|k| q[i][k] * qr.u[k][j]).sum();
                assert!((prod - a[i][j]).abs() < 1e-12);
                if i > j {
                    assert_eq!(qr.u[i][j], 0.0);
                }
            }
        }
        assert!((qr.q.det() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn isotropic_order_two_is_degenerate_but_usable() {
    let t = Tensor::matrix([[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 2.0]]);
    let s = standardize_even(&t).unwrap();
    assert!(s.frame.degenerate);
    assert!(s.xs.data().iter().all(|v| v.is_finite()));
    let back = restore_prediction(&s.xs, &s.frame).unwrap();
    assert!(back.distance(&t).unwrap() < 1e-14);
}

#[test]
fn rank_one_odd_is_degenerate_but_usable() {
    let v = [0.3, -1.2, 0.7];
    let t = Tensor::from_fn(3, 3, |ix| v[ix[0]] * v[ix[1]] * v[ix[2]]).unwrap();
    let s = standardize_odd(&t).unwrap();
    assert!(s.frame.degenerate);
    assert!(s.xs.is_finite());
    assert!(s.xs.rotate(&s.frame.restore).unwrap().distance(&t).unwrap() < 1e-12);
}

#[test]
fn zero_tensor_is_degenerate_not_an_error() {
    for order in 2..=5 {
        let s = standardize(&Tensor::zeros(order, 3).unwrap()).unwrap();
        assert!(s.frame.degenerate);
        assert!(s.xs.is_finite());
    }
}

#[test]
fn symmetric_odd_tensors_use_completed_frames() {
    let mut g = rng(9);
    for order in [3, 5] {
        let t = symmetric_tensor(order, &mut g);
        let s = standardize_odd(&t).unwrap();
        assert_eq!(s.frame.source, FrameSource::Completed);
        assert!(!s.frame.degenerate);
    }
}

#[test]
fn non_symmetric_even_input_rejected() {
    let t = Tensor::matrix([[1.0, 2.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    assert!(standardize_even(&t).is_err());
    assert!(standardize_even(&Tensor::zeros(3, 3).unwrap()).is_err());
    assert!(standardize_odd(&Tensor::zeros(2, 3).unwrap()).is_err());
}

#[test]
fn order_two_stabilizer_is_the_full_sign_group() {
    // A π-rotation about an eigenvector maps the matrix to itself while
    // flipping the other two eigenvectors; no sign rule can see it.
    let a = Tensor::matrix(sym_matrix(1));
    let s1 = standardize_even(&a).unwrap();
    assert_eq!(s1.frame.stabilizer, SignGroup::FULL);
    let axis = s1.frame.restore.apply([1.0, 0.0, 0.0]);
    let p = axis_rotation(axis, std::f64::consts::PI);
    let s2 = standardize_even(&a.rotate(&p).unwrap()).unwrap();
    assert!(rel_dist(&s2.xs, &s1.xs) < 1e-12);
    assert!(cocycle_holds(&s1.frame.restore, &p, &s2.frame.restore, s1.frame.stabilizer, 1e-8));
}

fn tuple_of(t: Tensor, extra: Tensor) -> Tuple {
    Tuple::new(vec![("c".into(), 0.5)], vec![("A".into(), t), ("B".into(), extra)], "A").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn restore_reconstructs_input(seed in any::<u64>(), order in 2usize..=5) {
        let t = symmetric_tensor(order, &mut rng(seed));
        let s = standardize(&t).unwrap();
        let back = s.xs.rotate(&s.frame.restore).unwrap();
        prop_assert!(rel_dist(&back, &t) < 1e-12);
    }

    #[test]
    fn standard_position_is_invariant(seed in any::<u64>(), order in 2usize..=5) {
        let mut g = rng(seed);
        let t = symmetric_tensor(order, &mut g);
        let p = rotation(&mut g);
        let s1 = standardize(&t).unwrap();
        prop_assume!(!s1.frame.degenerate && s1.frame.margin >= 1e-6);
        let s2 = standardize(&t.rotate(&p).unwrap()).unwrap();
        prop_assert!(s2.xs.distance(&s1.xs).unwrap() <= 1e-8 * t.norm());
        prop_assert!(cocycle_holds(&s1.frame.restore, &p, &s2.frame.restore, s1.frame.stabilizer, 1e-8));
        if order > 2 {
            prop_assert!(s1.frame.stabilizer.is_trivial());
        }
    }

    #[test]
    fn general_odd_tensors_are_invariant(seed in any::<u64>(), order in prop::sample::select(vec![3usize, 5])) {
        let mut g = rng(seed);
        let t = normal_tensor(order, &mut g);
        let p = rotation(&mut g);
        let s1 = standardize_odd(&t).unwrap();
        prop_assume!(s1.frame.source == FrameSource::Qr && s1.frame.margin >= 1e-6);
        let s2 = standardize_odd(&t.rotate(&p).unwrap()).unwrap();
        prop_assert!(s2.xs.distance(&s1.xs).unwrap() <= 1e-8 * t.norm());
        prop_assert!(s2.frame.restore.distance(&(p * s1.frame.restore)) <= 1e-8);
    }

    #[test]
    fn tuples_share_one_frame(seed in any::<u64>(), order in 2usize..=4) {
        let mut g = rng(seed);
        let t = symmetric_tensor(order, &mut g);
        let extra = normal_tensor(2, &mut g);
        let x = tuple_of(t, extra);
        let p = rotation(&mut g);
        let s1 = standardize_tuple(&x).unwrap();
        prop_assume!(!s1.degenerate() && s1.frame.margin >= 1e-6);
        let s2 = standardize_tuple(&x.rotate(&p).unwrap()).unwrap();
        for d in s2.xs.tensor_distances(&s1.xs).unwrap() {
            prop_assert!(d <= 1e-8 * x.anchor().norm().max(1.0));
        }
        prop_assert_eq!(s2.xs.scalar("c"), Some(0.5));
    }

    #[test]
    fn restored_prediction_is_equivariant(seed in any::<u64>(), order in 2usize..=4) {
        // Any function of the standard position, restored, is equivariant.
        let mut g = rng(seed);
        let t = symmetric_tensor(order, &mut g);
        let p = rotation(&mut g);
        let f = |x: &Tensor| Tensor::from_fn(2, 3, |ix| x.data()[ix[0] * 3 + ix[1]].sin() + 0.1 * ix[0] as f64).unwrap();
        let s1 = standardize(&t).unwrap();
        prop_assume!(!s1.frame.degenerate && s1.frame.margin >= 1e-6);
        let s2 = standardize(&t.rotate(&p).unwrap()).unwrap();
        let y1 = restore_prediction(&f(&s1.xs), &s1.frame).unwrap();
        let y2 = restore_prediction(&f(&s2.xs), &s2.frame).unwrap();
        prop_assert!(y2.distance(&y1.rotate(&p).unwrap()).unwrap() <= 1e-8 * y1.norm().max(1.0));
    }
}
