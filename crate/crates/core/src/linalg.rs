//! 3×3 kernels behind standardization: a symmetric eigendecomposition and a
//! QR factorization, both with fixed sign/ordering conventions so that they
//! are deterministic functions of their input, plus Haar-uniform rotations.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::scalar::Real;
use crate::tensor::{det3, matmul3, transpose3, Rotation};

pub type Mat3<T> = [[T; 3]; 3];

const MAX_SWEEPS: usize = 50;

/// Eigendecomposition `A = basis · diag(eigenvalues) · basisᵀ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenResult<T> {
    /// Sorted descending.
    pub eigenvalues: [T; 3],
    /// Columns are the unit eigenvectors, in eigenvalue order.
    pub basis: Rotation<T>,
    /// Smallest gap between consecutive eigenvalues, relative to `‖A‖_F`.
    pub relative_gap: T,
    pub degenerate: bool,
}

/// `A = q · u` with `q ∈ SO(3)` and `u` upper triangular.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QrResult<T> {
    pub q: Rotation<T>,
    pub u: Mat3<T>,
    /// `min |u_ii|` relative to `‖A‖_F`.
    pub relative_min_diag: T,
    pub degenerate: bool,
}

fn frobenius<T: Real>(a: &Mat3<T>) -> T {
    a.iter()
        .flatten()
        .fold(T::zero(), |acc, &x| acc + x * x)
        .sqrt()
}

fn check_finite<T: Real>(a: &Mat3<T>) -> Result<()> {
    if a.iter().flatten().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(invalid!("matrix has non-finite entries"))
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Convention: eigenvalues descending; each eigenvector is signed so that
/// its largest-magnitude component (first one on ties) is positive; if the
/// basis then has det −1 the third column is negated. The input is
/// symmetrized before factoring.
pub fn sym_eig3<T: Real>(a: &Mat3<T>) -> Result<EigenResult<T>> {
    check_finite(a)?;
    let half = T::lit(0.5);
    let mut s = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            s[i][j] = (a[i][j] + a[j][i]) * half;
        }
    }
    let norm = frobenius(&s);
    let mut v = *Rotation::<T>::identity().matrix();

    for _ in 0..MAX_SWEEPS {
        let off = s[0][1] * s[0][1] + s[0][2] * s[0][2] + s[1][2] * s[1][2];
        if off == T::zero() || off.sqrt() <= T::epsilon() * T::lit(1e-2) * norm {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = s[p][q];
            if apq == T::zero() {
                continue;
            }
            let theta = (s[q][q] - s[p][p]) / (T::lit(2.0) * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
            let c = T::one() / (t * t + T::one()).sqrt();
            let sn = t * c;
            // S ← Jᵀ S J with J the (p, q) plane rotation.
            for k in 0..3 {
                let skp = s[k][p];
                let skq = s[k][q];
                s[k][p] = c * skp - sn * skq;
                s[k][q] = sn * skp + c * skq;
            }
            for k in 0..3 {
                let spk = s[p][k];
                let sqk = s[q][k];
                s[p][k] = c * spk - sn * sqk;
                s[q][k] = sn * spk + c * sqk;
            }
            s[p][q] = T::zero();
            s[q][p] = T::zero();
            for row in v.iter_mut() {
                let vkp = row[p];
                let vkq = row[q];
                row[p] = c * vkp - sn * vkq;
                row[q] = sn * vkp + c * vkq;
            }
        }
    }

    let mut order = [0usize, 1, 2];
    // Stable sort keeps the Jacobi column order on exact ties.
    order.sort_by(|&i, &j| s[j][j].partial_cmp(&s[i][i]).expect("finite eigenvalues"));
    let eigenvalues = [s[order[0]][order[0]], s[order[1]][order[1]], s[order[2]][order[2]]];
    let mut basis = [[T::zero(); 3]; 3];
    for (col, &src) in order.iter().enumerate() {
        let mut vec = [v[0][src], v[1][src], v[2][src]];
        let lead = largest_component(&vec);
        if vec[lead] < T::zero() {
            vec.iter_mut().for_each(|x| *x = -*x);
        }
        for row in 0..3 {
            basis[row][col] = vec[row];
        }
    }
    if det3(&basis) < T::zero() {
        for row in basis.iter_mut() {
            row[2] = -row[2];
        }
    }
    let gap = (eigenvalues[0] - eigenvalues[1]).min(eigenvalues[1] - eigenvalues[2]);
    let relative_gap = if norm > T::zero() {
        gap / norm
    } else {
        T::zero()
    };
    Ok(EigenResult {
        eigenvalues,
        basis: Rotation::from_matrix_unchecked(basis),
        relative_gap,
        degenerate: relative_gap <= T::degeneracy_tol(),
    })
}

fn largest_component<T: Real>(v: &[T; 3]) -> usize {
    let mut best = 0;
    for i in 1..3 {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    best
}

/// Householder QR with sign normalization.
///
/// Each column with `|u_ii|` above the degeneracy threshold is signed so
/// that `u_ii > 0`. If `q` ends with det −1, the column of `q` (and row of
/// `u`) at the smallest `|u_ii|` is negated, keeping `q ∈ SO(3)`. For
/// full-rank input this makes the factorization unique.
pub fn qr3<T: Real>(a: &Mat3<T>) -> Result<QrResult<T>> {
    check_finite(a)?;
    let norm = frobenius(a);
    let mut r = *a;
    let mut q = *Rotation::<T>::identity().matrix();

    for k in 0..2 {
        let xnorm = (k..3).fold(T::zero(), |acc, i| acc + r[i][k] * r[i][k]).sqrt();
        if xnorm == T::zero() {
            continue;
        }
        let alpha = if r[k][k] >= T::zero() { -xnorm } else { xnorm };
        let mut v = [T::zero(); 3];
        for i in k..3 {
            v[i] = r[i][k];
        }
        v[k] -= alpha;
        let vnorm2 = (k..3).fold(T::zero(), |acc, i| acc + v[i] * v[i]);
        if vnorm2 == T::zero() {
            continue;
        }
        let two = T::lit(2.0);
        // r ← H r, q ← q H, with H = I − 2 v vᵀ / vᵀv
        for j in 0..3 {
            let dot = (k..3).fold(T::zero(), |acc, i| acc + v[i] * r[i][j]);
            let f = two * dot / vnorm2;
            for i in k..3 {
                r[i][j] -= f * v[i];
            }
        }
        for row in q.iter_mut() {
            let dot = (k..3).fold(T::zero(), |acc, i| acc + row[i] * v[i]);
            let f = two * dot / vnorm2;
            for i in k..3 {
                row[i] -= f * v[i];
            }
        }
        for i in k + 1..3 {
            r[i][k] = T::zero();
        }
    }

    let tol = T::degeneracy_tol() * norm;
    let mut degenerate = norm == T::zero();
    for i in 0..3 {
        if r[i][i].abs() <= tol {
            degenerate = true;
            continue;
        }
        if r[i][i] < T::zero() {
            negate_pair(&mut q, &mut r, i);
        }
    }
    if det3(&q) < T::zero() {
        let mut smallest = 0;
        for i in 1..3 {
            if r[i][i].abs() < r[smallest][smallest].abs() {
                smallest = i;
            }
        }
        negate_pair(&mut q, &mut r, smallest);
    }
    let min_diag = (0..3).map(|i| r[i][i].abs()).fold(T::infinity(), T::min);
    let relative_min_diag = if norm > T::zero() {
        min_diag / norm
    } else {
        T::zero()
    };
    Ok(QrResult {
        q: Rotation::from_matrix_unchecked(q),
        u: r,
        relative_min_diag,
        degenerate,
    })
}

fn negate_pair<T: Real>(q: &mut Mat3<T>, u: &mut Mat3<T>, i: usize) {
    for row in q.iter_mut() {
        row[i] = -row[i];
    }
    for x in u[i].iter_mut() {
        *x = -*x;
    }
}

/// Haar-uniform rotation from a unit quaternion built out of four standard
/// normal draws.
pub fn random_rotation<T: Real, R: Rng + ?Sized>(rng: &mut R) -> Rotation<T> {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            let [w, x, y, z] = q.map(|c| c / n);
            let m = [
                [
                    1.0 - 2.0 * (y * y + z * z),
                    2.0 * (x * y - z * w),
                    2.0 * (x * z + y * w),
                ],
                [
                    2.0 * (x * y + z * w),
                    1.0 - 2.0 * (x * x + z * z),
                    2.0 * (y * z - x * w),
                ],
                [
                    2.0 * (x * z - y * w),
                    2.0 * (y * z + x * w),
                    1.0 - 2.0 * (x * x + y * y),
                ],
            ];
            return Rotation::from_matrix_unchecked(m).cast();
        }
    }
}

/// `basis · diag(values) · basisᵀ`.
pub fn compose_spectral<T: Real>(basis: &Rotation<T>, values: [T; 3]) -> Mat3<T> {
    let b = basis.matrix();
    let mut d = [[T::zero(); 3]; 3];
    for i in 0..3 {
        d[i][i] = values[i];
    }
    matmul3(&matmul3(b, &d), &transpose3(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_sym(rng: &mut ChaCha8Rng) -> Mat3<f64> {
        let mut a = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in i..3 {
                let x: f64 = rng.sample(StandardNormal);
                a[i][j] = x;
                a[j][i] = x;
            }
        }
        a
    }

    fn dist(a: &Mat3<f64>, b: &Mat3<f64>) -> f64 {
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                acc += (a[i][j] - b[i][j]).powi(2);
            }
        }
        acc.sqrt()
    }

    #[test]
    fn identity_eigen_is_identity() {
        let id = *Rotation::<f64>::identity().matrix();
        let e = sym_eig3(&id).unwrap();
        assert_eq!(e.eigenvalues, [1.0, 1.0, 1.0]);
        assert_eq!(e.basis, Rotation::identity());
        assert!(e.degenerate);
    }

    #[test]
    fn diagonal_sorted_with_proper_basis() {
        let a = [[3.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]];
        let e = sym_eig3(&a).unwrap();
        assert_eq!(e.eigenvalues, [3.0, 2.0, 1.0]);
        // columns e1, e3, e2 with the last flipped to reach det +1
        let expect = [[1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]];
        assert_eq!(*e.basis.matrix(), expect);
        assert_eq!(e.basis.det(), 1.0);
        assert!(!e.degenerate);
    }

    #[test]
    fn eigen_reconstructs_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let a = random_sym(&mut rng);
            let e = sym_eig3(&a).unwrap();
            let back = compose_spectral(&e.basis, e.eigenvalues);
            assert!(dist(&back, &a) <= 1e-10 * dist(&a, &[[0.0; 3]; 3]));
            assert!(e.eigenvalues[0] >= e.eigenvalues[1] && e.eigenvalues[1] >= e.eigenvalues[2]);
            assert!((e.basis.det() - 1.0).abs() <= 1e-12);
            assert!(e.basis.orthogonality_residual() <= 1e-12);
        }
    }

    #[test]
    fn eigen_rejects_nan() {
        let mut a = [[0.0; 3]; 3];
        a[1][2] = f64::NAN;
        assert!(sym_eig3(&a).is_err());
        assert!(qr3(&a).is_err());
    }

    #[test]
    fn qr_identity() {
        let id = *Rotation::<f64>::identity().matrix();
        let f = qr3(&id).unwrap();
        assert_eq!(f.q, Rotation::identity());
        assert_eq!(f.u, id);
        assert!(!f.degenerate);
    }

    #[test]
    fn qr_recovers_constructed_factors() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let r0: Rotation<f64> = random_rotation(&mut rng);
            let mut u0 = [[0.0; 3]; 3];
            for i in 0..3 {
                u0[i][i] = rng.random_range(0.5..2.0);
                for j in i + 1..3 {
                    u0[i][j] = rng.sample(StandardNormal);
                }
            }
            let a = matmul3(r0.matrix(), &u0);
            let f = qr3(&a).unwrap();
            assert!(f.q.distance(&r0) <= 1e-10, "{:?}", f.q.distance(&r0));
            assert!(dist(&f.u, &u0) <= 1e-10);
            for i in 0..3 {
                for j in 0..i {
                    assert_eq!(f.u[i][j], 0.0);
                }
            }
        }
    }

    #[test]
    fn qr_negative_determinant_input_keeps_proper_q() {
        let a: Mat3<f64> = [[1.0, 0.2, 0.1], [0.0, 2.0, 0.3], [0.0, 0.0, -0.5]];
        let f = qr3(&a).unwrap();
        assert!((f.q.det() - 1.0).abs() < 1e-12);
        let back = matmul3(f.q.matrix(), &f.u);
        assert!(dist(&back, &a) <= 1e-12);
        assert!(f.u[0][0] > 0.0 && f.u[1][1] > 0.0 && f.u[2][2] < 0.0);
    }

    #[test]
    fn qr_rank_one_is_flagged() {
        let v = [1.0, -2.0, 0.5];
        let a: Mat3<f64> = [[v[0]; 3], [v[1]; 3], [v[2]; 3]];
        let f = qr3(&a).unwrap();
        assert!(f.degenerate);
        let back = matmul3(f.q.matrix(), &f.u);
        assert!(dist(&back, &a) <= 1e-10 * dist(&a, &[[0.0; 3]; 3]));
        assert!((f.q.det() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_rotation_is_proper() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let r: Rotation<f64> = random_rotation(&mut rng);
            assert!(r.orthogonality_residual() <= 1e-12);
            assert!((r.det() - 1.0).abs() <= 1e-12);
        }
    }
}
