//! Dense linear algebra used as ground truth for the matrix-free code.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{check_len, Error, Result};
use crate::numerics::{unit_vector, C64, ZERO};
use crate::system::StackedSystem;

/// Largest number of entries a materialized system may hold.
pub const DENSE_CAP: usize = 1 << 24;

pub fn to_dvector(v: &[C64]) -> DVector<C64> {
    DVector::from_column_slice(v)
}

pub fn from_dvector(v: &DVector<C64>) -> Vec<C64> {
    v.iter().copied().collect()
}

/// Dense `(A_w, S)` built column by column from the matrix-free operators.
pub fn materialize_system(sys: &StackedSystem<'_>) -> Result<(DMatrix<C64>, DMatrix<C64>)> {
    materialize_system_with_cap(sys, DENSE_CAP)
}

pub fn materialize_system_with_cap(sys: &StackedSystem<'_>, cap: usize) -> Result<(DMatrix<C64>, DMatrix<C64>)> {
    let (rows, dim) = (sys.s_rows(), sys.dim());
    let entries = (rows + 1).saturating_mul(dim);
    if entries > cap {
        return Err(Error::Resource(format!("dense system needs {entries} entries, cap is {cap}")));
    }
    let mut aw = DMatrix::from_element(rows + 1, dim, ZERO);
    for j in 0..dim {
        let col = sys.apply_aw(&unit_vector(dim, j))?;
        aw.column_mut(j).copy_from_slice(&col);
    }
    let s = aw.rows(0, rows).into_owned();
    Ok((aw, s))
}

/// Singular values in ascending order. Fat matrices are padded with zero rows
/// so the count is always `cols`.
pub fn singular_values(a: &DMatrix<C64>) -> Vec<f64> {
    let mut sv: Vec<f64> = pad_rows(a).singular_values().iter().copied().collect();
    sv.sort_by(f64::total_cmp);
    sv
}

fn pad_rows(a: &DMatrix<C64>) -> DMatrix<C64> {
    if a.nrows() >= a.ncols() {
        a.clone()
    } else {
        let mut padded = DMatrix::from_element(a.ncols(), a.ncols(), ZERO);
        padded.rows_mut(0, a.nrows()).copy_from(a);
        padded
    }
}

pub fn spectral_norm(a: &DMatrix<C64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.singular_values().iter().copied().fold(0.0, f64::max)
}

/// `σ_max / σ_min` over the `min(rows, cols)` singular values.
pub fn condition_number(a: &DMatrix<C64>) -> f64 {
    let sv = a.singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Second smallest singular value and the right singular vector of the
/// smallest, from a full SVD.
pub fn dense_sigma2_and_nullvector(s: &DMatrix<C64>) -> Result<(f64, Vec<C64>)> {
    if s.ncols() < 2 {
        return Err(Error::InvalidDimension("need at least two columns".into()));
    }
    if s.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let svd = pad_rows(s).svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let sigma2 = svd.singular_values[order[1]];
    let v_min = v_t.row(order[0]).iter().map(|z| z.conj()).collect();
    Ok((sigma2, v_min))
}

/// Singular values in ascending order through the eigenvalues of `S*S`.
/// Independent of the SVD path; loses accuracy for tiny singular values.
pub fn singular_values_via_gram(s: &DMatrix<C64>) -> Vec<f64> {
    let gram = s.adjoint() * s;
    let mut sv: Vec<f64> = SymmetricEigen::new(gram).eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
    sv.sort_by(f64::total_cmp);
    sv
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(a: &DMatrix<C64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Minimum-norm least-squares solution through the SVD pseudo-inverse.
pub fn min_norm_lstsq(a: &DMatrix<C64>, b: &[C64]) -> Result<Vec<C64>> {
    check_len(a.nrows(), b.len())?;
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let eps = smax * a.nrows().max(a.ncols()) as f64 * f64::EPSILON;
    let x = svd.solve(&to_dvector(b), eps).map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(from_dvector(&x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{RandomStream, ONE};
    use crate::sensing::{SensingKind, SensingSpec};
    use crate::system::{default_w, synthesize_problem, ModelKind, ProblemConfig, WeightHint};

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<C64> {
        let mut s = RandomStream::new(seed);
        DMatrix::from_fn(rows, cols, |_, _| s.complex_gaussian())
    }

    #[test]
    fn sigma2_of_simple_matrices() {
        let id = DMatrix::<C64>::identity(3, 3);
        assert!((dense_sigma2_and_nullvector(&id).unwrap().0 - 1.0).abs() < 1e-14);

        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![ZERO, C64::new(2.0, 0.0), C64::new(5.0, 0.0)]));
        let (s2, v) = dense_sigma2_and_nullvector(&d).unwrap();
        assert!((s2 - 2.0).abs() < 1e-14);
        assert!((v[0].norm() - 1.0).abs() < 1e-14);
        assert!(v[1].norm() < 1e-14 && v[2].norm() < 1e-14);
    }

    #[test]
    fn svd_and_gram_paths_agree() {
        for seed in 0..5 {
            let a = random_matrix(8, 6, seed);
            let a_sv = singular_values(&a);
            let b_sv = singular_values_via_gram(&a);
            for (x, y) in a_sv.iter().zip(&b_sv) {
                assert!((x - y).abs() < 1e-10, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn nullvector_of_fat_matrix() {
        // 2×3 matrix has a nontrivial kernel; padding must expose it
        let a = random_matrix(2, 3, 9);
        let (_, v) = dense_sigma2_and_nullvector(&a).unwrap();
        let av = &a * to_dvector(&v);
        assert!(av.norm() < 1e-12);
    }

    #[test]
    fn lstsq_solves_consistent_systems() {
        let a = random_matrix(10, 4, 1);
        let x = random_matrix(4, 1, 2);
        let b = &a * &x;
        let sol = min_norm_lstsq(&a, b.as_slice()).unwrap();
        for (u, v) in sol.iter().zip(x.iter()) {
            assert!((u - v).norm() < 1e-12);
        }
    }

    #[test]
    fn lstsq_is_minimum_norm() {
        // rank-deficient: duplicate column, the minimum-norm solution splits evenly
        let mut a = DMatrix::from_element(3, 2, ZERO);
        for i in 0..3 {
            a[(i, 0)] = ONE;
            a[(i, 1)] = ONE;
        }
        let sol = min_norm_lstsq(&a, &[ONE, ONE, ONE]).unwrap();
        assert!((sol[0] - C64::new(0.5, 0.0)).norm() < 1e-12);
        assert!((sol[1] - C64::new(0.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn materialized_system_matches_operator() {
        let cfg = ProblemConfig::new(ModelKind::DiverseInputs, SensingSpec::new(SensingKind::Gaussian, 6, 2), 3)
            .with_snr_db(20.0);
        let pr = synthesize_problem(&cfg, &mut RandomStream::new(4)).unwrap();
        let w = default_w(pr.model, pr.m, pr.n, pr.p, &WeightHint::Ones).unwrap();
        let sys = StackedSystem::new(&pr, w, ONE).unwrap();
        let (aw, s) = materialize_system(&sys).unwrap();
        assert_eq!((aw.nrows(), aw.ncols()), (sys.s_rows() + 1, sys.dim()));
        let z = random_matrix(sys.dim(), 1, 5);
        let dense = &s * &z;
        let mf = sys.apply_s(z.as_slice()).unwrap();
        for (a, b) in dense.iter().zip(&mf) {
            assert!((a - b).norm() < 1e-12);
        }
        let r = random_matrix(sys.s_rows() + 1, 1, 6);
        let dense_adj = aw.adjoint() * &r;
        let mf_adj = sys.apply_aw_adjoint(r.as_slice()).unwrap();
        for (a, b) in dense_adj.iter().zip(&mf_adj) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(materialize_system_with_cap(&sys, 10).is_err());
    }

    #[test]
    fn condition_and_norm() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![C64::new(4.0, 0.0), C64::new(0.5, 0.0)]));
        assert!((spectral_norm(&d) - 4.0).abs() < 1e-14);
        assert!((condition_number(&d) - 8.0).abs() < 1e-12);
    }
}
