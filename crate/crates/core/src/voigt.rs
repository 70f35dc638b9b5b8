//! Voigt notation: order 11, 22, 33, 23, 13, 12 with engineering shear strains.

use nalgebra::{Matrix3, Matrix6, Vector6};

/// Tensor index pairs (zero-based) of each Voigt slot.
pub const PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)];

pub fn voigt_index(i: usize, j: usize) -> usize {
    match (i.min(j), i.max(j)) {
        (a, b) if a == b => a,
        (1, 2) => 3,
        (0, 2) => 4,
        (0, 1) => 5,
        _ => panic!("tensor index out of range: ({i}, {j})"),
    }
}

/// Engineering Voigt vector of a symmetric strain tensor.
pub fn strain_to_voigt(e: &Matrix3<f64>) -> Vector6<f64> {
    Vector6::new(
        e[(0, 0)],
        e[(1, 1)],
        e[(2, 2)],
        e[(1, 2)] + e[(2, 1)],
        e[(0, 2)] + e[(2, 0)],
        e[(0, 1)] + e[(1, 0)],
    )
}

pub fn voigt_to_strain(v: &Vector6<f64>) -> Matrix3<f64> {
    Matrix3::new(
        v[0],
        0.5 * v[5],
        0.5 * v[4],
        0.5 * v[5],
        v[1],
        0.5 * v[3],
        0.5 * v[4],
        0.5 * v[3],
        v[2],
    )
}

/// Squared Frobenius norm of the tensor strain represented by an engineering Voigt vector.
pub fn strain_norm_sq(v: &Vector6<f64>) -> f64 {
    v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + 0.5 * (v[3] * v[3] + v[4] * v[4] + v[5] * v[5])
}

/// Number of independent entries of a symmetric 6x6 matrix.
pub const N_UPPER: usize = 21;

/// Row-major upper triangle `(i, j)`, `i <= j`.
pub fn upper_pairs() -> impl Iterator<Item = (usize, usize)> {
    (0..6).flat_map(|i| (i..6).map(move |j| (i, j)))
}

pub fn upper_triangle(m: &Matrix6<f64>) -> [f64; N_UPPER] {
    let mut out = [0.0; N_UPPER];
    for (k, (i, j)) in upper_pairs().enumerate() {
        out[k] = m[(i, j)];
    }
    out
}

pub fn from_upper_triangle(u: &[f64]) -> Matrix6<f64> {
    assert_eq!(u.len(), N_UPPER);
    let mut m = Matrix6::zeros();
    for (k, (i, j)) in upper_pairs().enumerate() {
        m[(i, j)] = u[k];
        m[(j, i)] = u[k];
    }
    m
}

/// Column labels `c11, c12, ..., c66` matching [`upper_triangle`].
pub fn upper_labels(prefix: &str) -> Vec<String> {
    upper_pairs()
        .map(|(i, j)| format!("{prefix}{}{}", i + 1, j + 1))
        .collect()
}
