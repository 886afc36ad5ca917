//! Small dense eigen helpers on top of nalgebra.

use nalgebra::{Complex, DMatrix, DVector, Matrix4, Vector4};

/// Eigenvalues of a real 4×4 matrix, computed from its real Schur form.
pub fn eigenvalues4(m: &Matrix4<f64>) -> [Complex<f64>; 4] {
    let ev = m.complex_eigenvalues();
    [ev[0], ev[1], ev[2], ev[3]]
}

/// Right singular vector belonging to the smallest singular value.
pub fn null_vector(m: DMatrix<f64>) -> DVector<f64> {
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    v_t.row(idx).transpose()
}

/// Real eigenvector of `m` for the real eigenvalue `value`.
pub fn real_eigenvector(m: &Matrix4<f64>, value: f64) -> Vector4<f64> {
    let shifted = m - Matrix4::identity() * value;
    let v = null_vector(DMatrix::from_column_slice(4, 4, shifted.as_slice()));
    Vector4::new(v[0], v[1], v[2], v[3])
}

/// Complex eigenvector `re + i·im` of `m` for the eigenvalue `value`.
///
/// Solved through the real 8×8 embedding `[[A − aI, bI], [−bI, A − aI]]`
/// acting on `[re; im]`.
pub fn complex_eigenvector(m: &Matrix4<f64>, value: Complex<f64>) -> [Complex<f64>; 4] {
    let shifted = m - Matrix4::identity() * value.re;
    let mut big = DMatrix::<f64>::zeros(8, 8);
    for r in 0..4 {
        for c in 0..4 {
            big[(r, c)] = shifted[(r, c)];
            big[(r + 4, c + 4)] = shifted[(r, c)];
        }
        big[(r, r + 4)] = value.im;
        big[(r + 4, r)] = -value.im;
    }
    let v = null_vector(big);
    [0, 1, 2, 3].map(|i| Complex::new(v[i], v[i + 4]))
}

/// Scales a real vector so its first component is 1 when that component is
/// numerically nonzero; otherwise unit norm with the first nonzero entry positive.
pub fn orient_real(v: Vector4<f64>) -> Vector4<f64> {
    let norm = v.norm();
    if v[0].abs() > 1e-8 * norm {
        return v / v[0];
    }
    let mut u = v / norm;
    if let Some(first) = u.iter().find(|c| c.abs() > 1e-12) {
        if *first < 0.0 {
            u = -u;
        }
    }
    u
}

/// Complex analogue of [`orient_real`]: first component 1 when possible,
/// otherwise unit norm with the phase fixed by the first nonzero entry.
pub fn orient_complex(v: [Complex<f64>; 4]) -> [Complex<f64>; 4] {
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if v[0].norm() > 1e-8 * norm {
        let s = v[0];
        return v.map(|c| c / s);
    }
    let first = v.iter().find(|c| c.norm() > 1e-12 * norm).copied().unwrap_or(Complex::new(1.0, 0.0));
    let phase = first / first.norm();
    v.map(|c| c / (phase * norm))
}
