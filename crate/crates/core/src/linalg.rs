//! Small dense complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::DVector;

use crate::{CMat, C64};

/// Relative singular-value threshold below which a matrix is treated as
/// rank deficient.
pub const RANK_TOL: f64 = 1e-10;

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn trace(a: &CMat) -> C64 {
    a.diagonal().iter().copied().sum()
}

/// `(A + A†) / 2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()) * c(0.5)
}

/// Singular values in descending order.
pub fn singular_values(a: &CMat) -> Vec<f64> {
    let mut sv: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Thin SVD `A = U diag(σ) V†` with σ sorted descending. Each column of `U`
/// is rotated so that its largest-magnitude entry is real and positive (the
/// matching column of `V` absorbs the same phase).
pub fn svd_sorted(a: &CMat) -> (CMat, Vec<f64>, CMat) {
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^H");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]).then(i.cmp(&j)));
    let k = order.len();
    let mut u_s = CMat::zeros(u.nrows(), k);
    let mut vt_s = CMat::zeros(k, v_t.ncols());
    let mut sigma = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = u.column(src).into_owned();
        let mut row = v_t.row(src).into_owned();
        let pivot = col
            .iter()
            .copied()
            .enumerate()
            .fold((0usize, -1.0f64), |best, (i, z)| if z.norm() > best.1 { (i, z.norm()) } else { best })
            .0;
        let p = col[pivot];
        if p.norm() > 0.0 {
            let phase = p / C64::from(p.norm());
            col *= phase.conj();
            row *= phase;
        }
        u_s.set_column(dst, &col);
        vt_s.set_row(dst, &row);
        sigma.push(svd.singular_values[src]);
    }
    (u_s, sigma, vt_s)
}

/// Inverse of a square matrix, `None` if singular.
pub fn inverse(a: &CMat) -> Option<CMat> {
    if a.nrows() != a.ncols() {
        return None;
    }
    a.clone().try_inverse()
}

/// Inverse of a Hermitian positive-definite matrix via Cholesky, falling back
/// to LU when the factorization fails numerically.
pub fn hpd_inverse(a: &CMat) -> Option<CMat> {
    match a.clone().cholesky() {
        Some(ch) => Some(ch.inverse()),
        None => inverse(a),
    }
}

/// Solves the Hermitian positive-definite system `A X = B`.
pub fn hpd_solve(a: &CMat, b: &CMat) -> Option<CMat> {
    match a.clone().cholesky() {
        Some(ch) => Some(ch.solve(b)),
        None => a.clone().lu().solve(b),
    }
}

/// Moore–Penrose right pseudoinverse `A† (A A†)^{-1}` of a fat (or square)
/// full-row-rank matrix. `None` when `A` is row-rank deficient.
pub fn right_pinv(a: &CMat) -> Option<CMat> {
    if a.nrows() > a.ncols() || a.nrows() == 0 {
        return None;
    }
    let sv = singular_values(a);
    let smax = sv.first().copied().unwrap_or(0.0);
    let smin = sv.last().copied().unwrap_or(0.0);
    if smax == 0.0 || smin <= RANK_TOL * smax {
        return None;
    }
    let gram = a * a.adjoint();
    let inv = hpd_inverse(&gram)?;
    Some(a.adjoint() * inv)
}

/// Eigenvalues of a Hermitian matrix (input is symmetrized first).
pub fn hermitian_eigenvalues(a: &CMat) -> DVector<f64> {
    hermitian_part(a).symmetric_eigenvalues()
}

/// `log2 det(A)` for Hermitian PSD `A` with eigenvalues floored at `floor`.
/// Returns `None` when an eigenvalue is clearly negative.
pub fn log2_det_floored(a: &CMat, floor: f64) -> Option<f64> {
    let eig = hermitian_eigenvalues(a);
    let scale = eig.iter().fold(1.0f64, |acc, &e| acc.max(e.abs()));
    let mut acc = 0.0;
    for &e in eig.iter() {
        if e < -1e-9 * scale {
            return None;
        }
        acc += e.max(floor).log2();
    }
    Some(acc)
}

/// Block-diagonal stacking of square or rectangular blocks.
pub fn block_diag(blocks: &[CMat]) -> CMat {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(rows, cols);
    let (mut r, mut cc) = (0, 0);
    for b in blocks {
        out.view_mut((r, cc), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        cc += b.ncols();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::complex_gaussian;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CMat::from_fn(rows, cols, |_, _| complex_gaussian(&mut rng))
    }

    #[test]
    fn sorted_svd_reconstructs() {
        let a = random(3, 5, 1);
        let (u, s, vt) = svd_sorted(&a);
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
        let sigma = CMat::from_diagonal(&DVector::from_iterator(s.len(), s.iter().map(|&x| c(x))));
        assert!((u * sigma * vt - &a).norm() < 1e-12);
    }

    #[test]
    fn svd_phase_convention() {
        let a = random(4, 6, 2);
        let (u, _, _) = svd_sorted(&a);
        for col in u.column_iter() {
            let best = col.iter().max_by(|x, y| x.norm().total_cmp(&y.norm())).unwrap();
            assert!(best.im.abs() < 1e-12 && best.re > 0.0);
        }
    }

    #[test]
    fn right_pinv_is_right_inverse() {
        let a = random(3, 7, 3);
        let p = right_pinv(&a).unwrap();
        assert!((&a * p - CMat::identity(3, 3)).norm() < 1e-12);
    }

    #[test]
    fn right_pinv_rejects_rank_deficiency() {
        let mut a = random(2, 4, 4);
        let row = a.row(0).into_owned();
        a.set_row(1, &(row * c(2.0)));
        assert!(right_pinv(&a).is_none());
    }

    #[test]
    fn log_det_of_identity_multiple() {
        let a = CMat::identity(3, 3) * c(2.0);
        assert!((log2_det_floored(&a, 1e-12).unwrap() - 3.0).abs() < 1e-12);
        assert!(log2_det_floored(&(CMat::identity(2, 2) * c(-1.0)), 1e-12).is_none());
    }
}
