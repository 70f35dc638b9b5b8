use nalgebra::{Matrix3, Matrix6};
use stochhom_core::fem::{homogenize, HexMesh, LayeredField, MaterialField, SolverOptions};
use stochhom_core::maxent::{MeanElasticity, OrthotropicConstants};
use stochhom_core::Result;

const N_IDX: [usize; 3] = [2, 3, 4];
const T_IDX: [usize; 3] = [0, 1, 5];

fn block(c: &Matrix6<f64>, rows: [usize; 3], cols: [usize; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| c[(rows[i], cols[j])])
}

/// Layers normal to x3: traction (33, 23, 13) and in-plane strain (11, 22, 12) are continuous.
fn laminate(layers: &[Matrix6<f64>]) -> Matrix6<f64> {
    let k = layers.len() as f64;
    let mut inv_nn = Matrix3::zeros();
    let mut inv_nt = Matrix3::zeros();
    let mut tn_inv = Matrix3::zeros();
    let mut schur = Matrix3::zeros();
    for c in layers {
        let nn = block(c, N_IDX, N_IDX);
        let nt = block(c, N_IDX, T_IDX);
        let tn = block(c, T_IDX, N_IDX);
        let tt = block(c, T_IDX, T_IDX);
        let nn_inv = nn.try_inverse().unwrap();
        inv_nn += nn_inv / k;
        inv_nt += nn_inv * nt / k;
        tn_inv += tn * nn_inv / k;
        schur += (tt - tn * nn_inv * nt) / k;
    }
    let a = inv_nn.try_inverse().unwrap();
    let e_nt = a * inv_nt;
    let e_tt = schur + tn_inv * a * inv_nt;
    let mut out = Matrix6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            out[(N_IDX[i], N_IDX[j])] = a[(i, j)];
            out[(N_IDX[i], T_IDX[j])] = e_nt[(i, j)];
            out[(T_IDX[j], N_IDX[i])] = e_nt[(i, j)];
            out[(T_IDX[i], T_IDX[j])] = e_tt[(i, j)];
        }
    }
    out
}

fn phases() -> (Matrix6<f64>, Matrix6<f64>) {
    let a = *MeanElasticity::orthotropic(&OrthotropicConstants::default()).unwrap().c_bar();
    let b = *MeanElasticity::orthotropic(&OrthotropicConstants {
        young: [0.7e10, 0.6e10, 0.15e10],
        nu23: 0.2,
        nu31: 0.1,
        nu12: 0.25,
        shear: None,
    })
    .unwrap()
    .c_bar();
    (a, b)
}

#[test]
fn laminate_of_identical_layers_is_the_layer() {
    let (a, _) = phases();
    assert!((laminate(&[a, a, a]) - a).norm() / a.norm() < 1e-12);
}

#[test]
fn layered_field_matches_laminate_formula() {
    let (a, b) = phases();
    let layers: Vec<_> = (0..10).map(|k| if k % 2 == 0 { a } else { b * 1.5 }).collect();
    let oracle = laminate(&layers);
    let mesh = HexMesh::new(20).unwrap();
    let (eff, _, _) = homogenize(&mesh, &LayeredField { layers }, &SolverOptions::default()).unwrap();
    let rel = (eff.c_eff - oracle).norm() / oracle.norm();
    assert!(rel < 0.02, "relative Frobenius error {rel}");
}

struct Smooth(Matrix6<f64>);

impl MaterialField for Smooth {
    fn eval(&self, x: [f64; 3]) -> Result<Matrix6<f64>> {
        let pi = std::f64::consts::PI;
        let s = 1.0 + 0.3 * (2.0 * pi * x[0]).sin() * (pi * x[1]).cos() + 0.2 * x[2];
        Ok(self.0 * s)
    }
}

#[test]
fn mesh_refinement_differences_shrink() {
    let (a, _) = phases();
    let f = Smooth(a);
    let c: Vec<_> = [5, 10, 20]
        .iter()
        .map(|&n| homogenize(&HexMesh::new(n).unwrap(), &f, &SolverOptions::default()).unwrap().0.c_eff)
        .collect();
    let d1 = (c[0] - c[1]).norm();
    let d2 = (c[1] - c[2]).norm();
    assert!(d2 < d1, "{d1} {d2}");
}
