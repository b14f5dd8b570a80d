//! Generators: analytic labels, structure, determinism, equivariance.

mod common;

use common::{rng, rotation};
use eqreg_core::cases::{build_rotation_eval, Case, CaseKind};
use eqreg_core::dataset::Dataset;
use eqreg_core::{Rot, Tensor, Tuple};

const N: usize = 200;

fn d(i: usize, j: usize) -> f64 {
    (i == j) as u8 as f64
}

/// Independent straight-line evaluation of each law on a flat feature row.
fn law_oracle(kind: CaseKind, x: &[f64]) -> Vec<f64> {
    match kind {
        CaseKind::Newtonian => {
            let p = x[0];
            (0..9).map(|k| -p * d(k / 3, k % 3) + x[1 + k]).collect()
        }
        CaseKind::Les => {
            let g = |i: usize, j: usize| x[i * 3 + j];
            let s = |i: usize, j: usize| 0.5 * (g(i, j) + g(j, i));
            let w = |i: usize, j: usize| 0.5 * (g(i, j) - g(j, i));
            let mut smn = 0.0;
            for m in 0..3 {
                for n in 0..3 {
                    smn += s(m, n) * s(m, n);
                }
            }
            let mut out = Vec::new();
            for i in 0..3 {
                for j in 0..3 {
                    let mut sik_skj = 0.0;
                    let mut comm = 0.0;
                    for k in 0..3 {
                        sik_skj += s(i, k) * s(k, j);
                        comm += s(i, k) * w(k, j) - w(i, k) * s(k, j);
                    }
                    let brace = 2.0 * (2.0 * smn).sqrt() * s(i, j)
                        + 1.0 * (sik_skj - smn / 3.0 * d(i, j))
                        + 1.0 * comm;
                    out.push(-(0.4f64 * 0.4).powi(2) * brace);
                }
            }
            out
        }
        CaseKind::ThirdOrder => {
            let p = x[0];
            let a = |i: usize, j: usize, k: usize| x[1 + i * 9 + j * 3 + k];
            let v = |k: usize| a(0, 0, k) + a(1, 1, k) + a(2, 2, k);
            let mut out = Vec::new();
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        let iso = (d(i, j) * v(k) + d(j, k) * v(i) + d(i, k) * v(j)) / 3.0;
                        out.push(a(i, j, k) - p * iso);
                    }
                }
            }
            out
        }
        CaseKind::Electrostriction => {
            let v = |i: usize, j: usize, k: usize, l: usize| x[((i * 3 + j) * 3 + k) * 3 + l];
            let s = |k: usize, l: usize| x[81 + k * 3 + l];
            let mut out = Vec::new();
            for i in 0..3 {
                for j in 0..3 {
                    let mut t = 0.0;
                    for k in 0..3 {
                        for l in 0..3 {
                            t += v(i, j, k, l) * s(k, l);
                        }
                    }
                    out.push(t);
                }
            }
            out
        }
    }
}

fn dataset(kind: CaseKind) -> Dataset {
    Case::new(kind).generate(N, 17).unwrap()
}

#[test]
fn labels_match_independent_oracle() {
    for kind in CaseKind::ALL {
        let ds = dataset(kind);
        for i in 0..N {
            let oracle = law_oracle(kind, ds.feature_row(i));
            for (a, b) in oracle.iter().zip(ds.label_row(i)) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{kind} sample {i}");
            }
        }
    }
}

#[test]
fn labels_are_self_consistent_bit_exactly() {
    for kind in CaseKind::ALL {
        let ds = dataset(kind);
        let case = Case::new(kind);
        for i in 0..N {
            let y = case.label(&ds.input(i).unwrap()).unwrap();
            assert_eq!(y.data(), ds.label_row(i), "{kind} sample {i}");
        }
    }
}

#[test]
fn newtonian_straight_line_law_is_bit_exact() {
    let ds = dataset(CaseKind::Newtonian);
    for i in 0..N {
        assert_eq!(law_oracle(CaseKind::Newtonian, ds.feature_row(i)), ds.label_row(i));
    }
}

#[test]
fn split_is_85_15_partition() {
    for n in [1, 7, 100, 1000] {
        let ds = Case::new(CaseKind::Les).generate(n, 3).unwrap();
        let (tr, te) = (ds.train_indices(), ds.test_indices());
        assert_eq!(tr.len(), (0.85 * n as f64).round() as usize);
        let mut all: Vec<usize> = tr.iter().chain(te).copied().collect();
        all.sort();
        assert_eq!(all, (0..n).collect::<Vec<_>>());
    }
}

#[test]
fn newtonian_feature_layout() {
    let ds = dataset(CaseKind::Newtonian);
    assert_eq!((ds.input_dim(), ds.output_dim()), (10, 9));
    for i in 0..N {
        let s = ds.input(i).unwrap().tensor("S").unwrap().as_matrix3().unwrap();
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(s[a][b], s[b][a]);
            }
        }
    }
}

#[test]
fn les_gradient_traceless_and_stress_symmetric_traceless() {
    let ds = dataset(CaseKind::Les);
    for i in 0..N {
        let g = ds.feature_row(i);
        assert!((g[0] + g[4] + g[8]).abs() <= 1e-14);
        let t = ds.label_row(i);
        assert!((t[0] + t[4] + t[8]).abs() <= 1e-12);
        for (a, b) in [(1, 3), (2, 6), (5, 7)] {
            assert!((t[a] - t[b]).abs() <= 1e-12);
        }
    }
}

#[test]
fn third_order_tensors_fully_symmetric() {
    let ds = dataset(CaseKind::ThirdOrder);
    assert_eq!((ds.input_dim(), ds.output_dim()), (28, 27));
    for i in 0..N {
        let x = ds.input(i).unwrap();
        assert!(x.tensor("A").unwrap().is_symmetric(1e-14));
        assert!(ds.label(i).unwrap().is_symmetric(1e-12));
    }
}

#[test]
fn third_order_pressure_term_vanishes_without_trace() {
    let case = Case::new(CaseKind::ThirdOrder);
    let x = Tuple::new(vec![("p".into(), 1.0)], vec![("A".into(), Tensor::zeros(3, 3).unwrap())], "A").unwrap();
    assert!(case.label(&x).unwrap().data().iter().all(|&v| v == 0.0));
}

#[test]
fn electrostriction_response_symmetric() {
    let ds = dataset(CaseKind::Electrostriction);
    assert_eq!((ds.input_dim(), ds.output_dim()), (90, 9));
    for i in 0..100 {
        let t = ds.label(i).unwrap().as_matrix3().unwrap();
        for a in 0..3 {
            for b in 0..3 {
                assert!((t[a][b] - t[b][a]).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn generators_are_deterministic_per_seed() {
    for kind in CaseKind::ALL {
        let a = Case::new(kind).generate(50, 4).unwrap();
        let b = Case::new(kind).generate(50, 4).unwrap();
        assert_eq!(a.encode(), b.encode());
        let c = Case::new(kind).generate(50, 5).unwrap();
        assert_ne!(a.features(), c.features());
    }
}

#[test]
fn raw_draws_have_standard_normal_moments() {
    // LES features are G = G_raw − tr/3·I: off-diagonals are raw draws.
    let n = 4000;
    let ds = Case::new(CaseKind::Les).generate(n, 21).unwrap();
    let off: Vec<f64> = (0..n).flat_map(|i| [1, 2, 3, 5, 6, 7].map(|k| ds.feature_row(i)[k])).collect();
    let m = off.len() as f64;
    let mean = off.iter().sum::<f64>() / m;
    let var = off.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
    assert!(mean.abs() < 5.0 / m.sqrt(), "mean {mean}");
    assert!((var - 1.0).abs() < 5.0 * (2.0 / m).sqrt(), "variance {var}");
}

#[test]
fn laws_are_rotation_equivariant() {
    let mut g = rng(31);
    for kind in CaseKind::ALL {
        let case = Case::new(kind);
        for _ in 0..100 {
            let (x, y) = case.sample(&mut g).unwrap();
            let r = rotation(&mut g);
            let lhs = case.label(&x.rotate(&r).unwrap()).unwrap();
            let rhs = y.rotate(&r).unwrap();
            assert!(lhs.distance(&rhs).unwrap() <= 1e-10, "{kind}");
        }
    }
}

#[test]
fn rotation_eval_set_is_consistent() {
    for kind in CaseKind::ALL {
        let case = Case::new(kind);
        let set = build_rotation_eval(&case, 2, 50).unwrap();
        assert_eq!(set.len(), 50);
        for i in 0..set.len() {
            let r = &set.rotations[i];
            assert!((r.det() - 1.0).abs() < 1e-12 && r.orthogonality_residual() < 1e-12);
            let (x, y) = set.rotated(i).unwrap();
            assert!(case.label(&x).unwrap().distance(&y).unwrap() <= 1e-10, "{kind}");
            assert_eq!(x.scalars(), set.base_input.scalars());
        }
    }
}

#[test]
fn identity_rotation_reproduces_base() {
    let mut set = build_rotation_eval(&Case::new(CaseKind::Les), 0, 1).unwrap();
    set.rotations[0] = Rot::identity();
    let (x, y) = set.rotated(0).unwrap();
    assert_eq!(x, set.base_input);
    assert_eq!(y, set.base_label);
}

#[test]
fn default_rotation_count() {
    assert_eq!(eqreg_core::cases::DEFAULT_ROTATION_COUNT, 10_000);
}
