//! Trilinear hexahedral finite elements for the six Dirichlet corrector problems on the unit cube.

use nalgebra::{Matrix6, SMatrix, SymmetricEigen, Vector6};

use crate::voigt::{strain_norm_sq, voigt_index};
use crate::{Error, Result};

/// A deterministic map `x -> C(x)` of 6x6 elasticity matrices (Pa, engineering Voigt).
pub trait MaterialField: Sync {
    fn eval(&self, x: [f64; 3]) -> Result<Matrix6<f64>>;

    /// Values on the tensor grid `axes[0] x axes[1] x axes[2]`, last axis fastest.
    fn eval_tensor_grid(&self, axes: [&[f64]; 3]) -> Result<Vec<Matrix6<f64>>> {
        let mut out = Vec::with_capacity(axes[0].len() * axes[1].len() * axes[2].len());
        for &x in axes[0] {
            for &y in axes[1] {
                for &z in axes[2] {
                    out.push(self.eval([x, y, z])?);
                }
            }
        }
        Ok(out)
    }
}

/// Constant field.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousField(pub Matrix6<f64>);

impl MaterialField for HomogeneousField {
    fn eval(&self, _x: [f64; 3]) -> Result<Matrix6<f64>> {
        Ok(self.0)
    }
}

/// Equal-thickness layers stacked along `x3`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredField {
    pub layers: Vec<Matrix6<f64>>,
}

impl MaterialField for LayeredField {
    fn eval(&self, x: [f64; 3]) -> Result<Matrix6<f64>> {
        let nl = self.layers.len();
        let k = ((x[2] * nl as f64).floor().max(0.0) as usize).min(nl - 1);
        Ok(self.layers[k])
    }
}

/// Structured mesh of `[0, 1]^3` with `n` trilinear hexahedra per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HexMesh {
    n: usize,
}

/// Local node offsets of the reference hexahedron.
pub const HEX_CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

impl HexMesh {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("mesh needs at least one element per axis".into()));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn volume(&self) -> f64 {
        1.0
    }

    pub fn n_nodes(&self) -> usize {
        (self.n + 1).pow(3)
    }

    pub fn n_dofs(&self) -> usize {
        3 * self.n_nodes()
    }

    pub fn n_elements(&self) -> usize {
        self.n.pow(3)
    }

    pub fn n_interior_nodes(&self) -> usize {
        (self.n - 1).pow(3)
    }

    pub fn n_boundary_nodes(&self) -> usize {
        self.n_nodes() - self.n_interior_nodes()
    }

    pub fn n_constrained_dofs(&self) -> usize {
        3 * self.n_boundary_nodes()
    }

    pub fn n_free_dofs(&self) -> usize {
        3 * self.n_interior_nodes()
    }

    pub fn n_gauss_points(&self) -> usize {
        8 * self.n_elements()
    }

    pub fn node(&self, i: usize, j: usize, k: usize) -> usize {
        let m = self.n + 1;
        (k * m + j) * m + i
    }

    pub fn node_ijk(&self, id: usize) -> [usize; 3] {
        let m = self.n + 1;
        [id % m, (id / m) % m, id / (m * m)]
    }

    pub fn node_coords(&self, id: usize) -> [f64; 3] {
        self.node_ijk(id).map(|i| i as f64 * self.h())
    }

    pub fn is_boundary(&self, id: usize) -> bool {
        self.node_ijk(id).iter().any(|&i| i == 0 || i == self.n)
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&id| self.is_boundary(id)).collect()
    }

    pub fn element(&self, e: usize) -> [usize; 3] {
        let n = self.n;
        [e % n, (e / n) % n, e / (n * n)]
    }

    pub fn element_nodes(&self, e: usize) -> [usize; 8] {
        let [i, j, k] = self.element(e);
        HEX_CORNERS.map(|c| self.node(i + c[0], j + c[1], k + c[2]))
    }

    /// Interior-node index, or `None` on the boundary.
    pub fn interior_index(&self, id: usize) -> Option<usize> {
        let [i, j, k] = self.node_ijk(id);
        let n = self.n;
        if i == 0 || j == 0 || k == 0 || i == n || j == n || k == n {
            return None;
        }
        let m = n - 1;
        Some(((k - 1) * m + (j - 1)) * m + (i - 1))
    }

    /// Sorted Gauss-point coordinates along one axis, two per element.
    pub fn gauss_axis(&self) -> Vec<f64> {
        let h = self.h();
        let g = 0.5 / 3f64.sqrt();
        (0..self.n)
            .flat_map(|e| [h * (e as f64 + 0.5 - g), h * (e as f64 + 0.5 + g)])
            .collect()
    }

    /// Index in the tensor grid of [`HexMesh::gauss_axis`] of local point `g` of element `e`.
    pub fn gauss_index(&self, e: usize, g: [usize; 3]) -> usize {
        let [i, j, k] = self.element(e);
        let m = 2 * self.n;
        ((2 * i + g[0]) * m + (2 * j + g[1])) * m + (2 * k + g[2])
    }
}

pub type StrainMatrix = SMatrix<f64, 6, 24>;
pub type ElementMatrix = SMatrix<f64, 24, 24>;

/// Local Gauss points in element order `(g1, g2, g3)`, `g3` fastest.
pub const LOCAL_GAUSS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [0, 0, 1],
    [0, 1, 0],
    [0, 1, 1],
    [1, 0, 0],
    [1, 0, 1],
    [1, 1, 0],
    [1, 1, 1],
];

/// Strain-displacement matrices at the eight Gauss points of a cube of side `h`.
#[derive(Debug, Clone)]
pub struct ElementKernel {
    pub b: [StrainMatrix; 8],
    pub det_j: f64,
}

impl ElementKernel {
    pub fn new(h: f64) -> Self {
        let gp = 1.0 / 3f64.sqrt();
        let b = LOCAL_GAUSS.map(|g| {
            let xi = g.map(|s| if s == 0 { -gp } else { gp });
            strain_matrix(xi, h)
        });
        Self {
            b,
            det_j: (h / 2.0).powi(3),
        }
    }
}

/// `B` at reference point `xi` for a cube of side `h`; dofs ordered node-major.
pub fn strain_matrix(xi: [f64; 3], h: f64) -> StrainMatrix {
    let mut b = StrainMatrix::zeros();
    for (a, c) in HEX_CORNERS.iter().enumerate() {
        let s = c.map(|v| if v == 0 { -1.0 } else { 1.0 });
        let f = [1.0 + s[0] * xi[0], 1.0 + s[1] * xi[1], 1.0 + s[2] * xi[2]];
        let d = [
            0.125 * s[0] * f[1] * f[2] * 2.0 / h,
            0.125 * f[0] * s[1] * f[2] * 2.0 / h,
            0.125 * f[0] * f[1] * s[2] * 2.0 / h,
        ];
        let col = 3 * a;
        b[(0, col)] = d[0];
        b[(1, col + 1)] = d[1];
        b[(2, col + 2)] = d[2];
        b[(3, col + 1)] = d[2];
        b[(3, col + 2)] = d[1];
        b[(4, col)] = d[2];
        b[(4, col + 2)] = d[0];
        b[(5, col)] = d[1];
        b[(5, col + 1)] = d[0];
    }
    b
}

/// Load-case index of the unit macro strain `(l, r)`, zero-based tensor indices.
pub fn load_case_index(l: usize, r: usize) -> usize {
    voigt_index(l, r)
}

const NEIGHBORS: usize = 27;

/// Stiffness restricted to interior dofs, stored as 27 neighbor blocks of 3x3 per node.
#[derive(Debug, Clone)]
pub struct BlockStiffness {
    m: usize,
    // neighbor interior index or usize::MAX
    cols: Vec<usize>,
    vals: Vec<[f64; 9]>,
}

fn offset_slot(d: [isize; 3]) -> usize {
    (((d[2] + 1) * 3 + (d[1] + 1)) * 3 + (d[0] + 1)) as usize
}

impl BlockStiffness {
    fn new(mesh: &HexMesh) -> Self {
        let n = mesh.n();
        let m = if n >= 2 { n - 1 } else { 0 };
        let nn = m * m * m;
        let mut cols = vec![usize::MAX; nn * NEIGHBORS];
        for k in 0..m {
            for j in 0..m {
                for i in 0..m {
                    let row = (k * m + j) * m + i;
                    for dk in -1isize..=1 {
                        for dj in -1isize..=1 {
                            for di in -1isize..=1 {
                                let (ii, jj, kk) = (i as isize + di, j as isize + dj, k as isize + dk);
                                let mm = m as isize;
                                if ii < 0 || jj < 0 || kk < 0 || ii >= mm || jj >= mm || kk >= mm {
                                    continue;
                                }
                                let col = ((kk * mm + jj) * mm + ii) as usize;
                                cols[row * NEIGHBORS + offset_slot([di, dj, dk])] = col;
                            }
                        }
                    }
                }
            }
        }
        Self {
            m,
            cols,
            vals: vec![[0.0; 9]; nn * NEIGHBORS],
        }
    }

    pub fn n_rows(&self) -> usize {
        3 * self.m.pow(3)
    }

    /// Dense copy, for small systems and tests.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let nd = self.n_rows();
        let mut d = nalgebra::DMatrix::zeros(nd, nd);
        for row in 0..self.m.pow(3) {
            for s in 0..NEIGHBORS {
                let col = self.cols[row * NEIGHBORS + s];
                if col == usize::MAX {
                    continue;
                }
                let v = &self.vals[row * NEIGHBORS + s];
                for a in 0..3 {
                    for b in 0..3 {
                        d[(3 * row + a, 3 * col + b)] = v[3 * a + b];
                    }
                }
            }
        }
        d
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let c = offset_slot([0, 0, 0]);
        (0..self.m.pow(3))
            .flat_map(|row| {
                let v = self.vals[row * NEIGHBORS + c];
                [v[0], v[4], v[8]]
            })
            .collect()
    }

    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        for row in 0..self.m.pow(3) {
            let mut acc = [0.0; 3];
            for s in 0..NEIGHBORS {
                let col = self.cols[row * NEIGHBORS + s];
                if col == usize::MAX {
                    continue;
                }
                let v = &self.vals[row * NEIGHBORS + s];
                let xc = &x[3 * col..3 * col + 3];
                for a in 0..3 {
                    acc[a] += v[3 * a] * xc[0] + v[3 * a + 1] * xc[1] + v[3 * a + 2] * xc[2];
                }
            }
            y[3 * row..3 * row + 3].copy_from_slice(&acc);
        }
    }

    /// `Y_c = K X_c` for six vectors stored interleaved, `x[6 * dof + c]`.
    fn mul6(&self, x: &[f64], y: &mut [f64], active: &[bool; 6]) {
        for row in 0..self.m.pow(3) {
            let mut acc = [[0.0; 6]; 3];
            for s in 0..NEIGHBORS {
                let col = self.cols[row * NEIGHBORS + s];
                if col == usize::MAX {
                    continue;
                }
                let v = &self.vals[row * NEIGHBORS + s];
                for b in 0..3 {
                    let xc = &x[6 * (3 * col + b)..6 * (3 * col + b) + 6];
                    for a in 0..3 {
                        let kab = v[3 * a + b];
                        for c in 0..6 {
                            acc[a][c] += kab * xc[c];
                        }
                    }
                }
            }
            for a in 0..3 {
                for c in 0..6 {
                    if active[c] {
                        y[6 * (3 * row + a) + c] = acc[a][c];
                    }
                }
            }
        }
    }

    fn add_block(&mut self, row: usize, d: [isize; 3], blk: &[f64; 9]) {
        let v = &mut self.vals[row * NEIGHBORS + offset_slot(d)];
        for (a, b) in v.iter_mut().zip(blk) {
            *a += b;
        }
    }
}

/// Assembled reduced system of one realization.
#[derive(Debug, Clone)]
pub struct DirichletSystem {
    pub mesh: HexMesh,
    pub kernel: ElementKernel,
    pub stiffness: BlockStiffness,
    /// Interior-dof loads, one per Voigt load case.
    pub loads: [Vec<f64>; 6],
    /// Euclidean norms of the loads before boundary elimination.
    pub full_load_norms: [f64; 6],
    /// Elasticity at every Gauss point, tensor-grid order.
    pub material: Vec<Matrix6<f64>>,
}

fn check_spd(c: &Matrix6<f64>, x: [f64; 3]) -> Result<()> {
    if c.cholesky().is_none() {
        return Err(Error::NotPositiveDefinite {
            x,
            lambda_min: SymmetricEigen::new(*c).eigenvalues.min(),
        });
    }
    Ok(())
}

/// Evaluates the field once per Gauss point and assembles stiffness and loads.
pub fn assemble(mesh: &HexMesh, field: &dyn MaterialField) -> Result<DirichletSystem> {
    let axis = mesh.gauss_axis();
    let material = field.eval_tensor_grid([&axis, &axis, &axis])?;
    if material.len() != mesh.n_gauss_points() {
        return Err(Error::InvalidArgument(format!(
            "field returned {} values for {} Gauss points",
            material.len(),
            mesh.n_gauss_points()
        )));
    }
    let m2 = axis.len();
    for (p, c) in material.iter().enumerate() {
        check_spd(c, [axis[p / (m2 * m2)], axis[(p / m2) % m2], axis[p % m2]])?;
    }
    assemble_with_material(mesh, material)
}

/// Assembles from precomputed Gauss-point values in tensor-grid order.
pub fn assemble_with_material(mesh: &HexMesh, material: Vec<Matrix6<f64>>) -> Result<DirichletSystem> {
    let kernel = ElementKernel::new(mesh.h());
    let mut stiffness = BlockStiffness::new(mesh);
    let nfree = mesh.n_free_dofs();
    let mut loads: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; nfree]);
    let mut full: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; mesh.n_dofs()]);

    for e in 0..mesh.n_elements() {
        let mut ke = ElementMatrix::zeros();
        let mut fe = SMatrix::<f64, 24, 6>::zeros();
        for (g, lg) in LOCAL_GAUSS.iter().enumerate() {
            let c = &material[mesh.gauss_index(e, *lg)];
            let b = &kernel.b[g];
            let cb = c * b;
            ke += b.transpose() * cb * kernel.det_j;
            fe -= b.transpose() * c * kernel.det_j;
        }
        let nodes = mesh.element_nodes(e);
        let ijk = nodes.map(|id| mesh.node_ijk(id));
        let interior = nodes.map(|id| mesh.interior_index(id));
        for a in 0..8 {
            for c in 0..6 {
                for r in 0..3 {
                    full[c][3 * nodes[a] + r] += fe[(3 * a + r, c)];
                }
            }
            let Some(ra) = interior[a] else { continue };
            for c in 0..6 {
                for r in 0..3 {
                    loads[c][3 * ra + r] += fe[(3 * a + r, c)];
                }
            }
            for b in 0..8 {
                if interior[b].is_none() {
                    continue;
                }
                let d = std::array::from_fn(|t| ijk[b][t] as isize - ijk[a][t] as isize);
                let blk = std::array::from_fn(|q| ke[(3 * a + q / 3, 3 * b + q % 3)]);
                stiffness.add_block(ra, d, &blk);
            }
        }
    }
    let full_load_norms = std::array::from_fn(|c| full[c].iter().map(|v| v * v).sum::<f64>().sqrt());
    Ok(DirichletSystem {
        mesh: *mesh,
        kernel,
        stiffness,
        loads,
        full_load_norms,
        material,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub rel_tol: f64,
    /// Iteration cap as a multiple of `sqrt(dofs)`.
    pub cap_factor: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            cap_factor: 20.0,
        }
    }
}

/// Residual floor relative to the unreduced load, below which a load is treated as solved.
pub const LOAD_NOISE_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct CorrectorSolution {
    /// Interior-dof solutions per load case.
    pub interior: [Vec<f64>; 6],
    pub iterations: [usize; 6],
    pub residuals: [f64; 6],
}

impl CorrectorSolution {
    /// Full nodal displacement of one case, zero on the boundary.
    pub fn nodal(&self, mesh: &HexMesh, case: usize) -> Vec<f64> {
        let mut u = vec![0.0; mesh.n_dofs()];
        for id in 0..mesh.n_nodes() {
            if let Some(r) = mesh.interior_index(id) {
                u[3 * id..3 * id + 3].copy_from_slice(&self.interior[case][3 * r..3 * r + 3]);
            }
        }
        u
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned conjugate gradients on the six load cases in lockstep.
pub fn solve_correctors(sys: &DirichletSystem, opts: &SolverOptions) -> Result<CorrectorSolution> {
    let nd = sys.stiffness.n_rows();
    let mut iterations = [0usize; 6];
    let mut residuals = [0.0f64; 6];
    if nd == 0 {
        return Ok(CorrectorSolution {
            interior: std::array::from_fn(|_| Vec::new()),
            iterations,
            residuals,
        });
    }
    let inv_diag: Vec<f64> = sys.stiffness.diagonal().iter().map(|d| 1.0 / d).collect();
    let cap = ((opts.cap_factor * (nd as f64).sqrt()).ceil() as usize).max(50);

    let mut x = vec![0.0; 6 * nd];
    let mut r = vec![0.0; 6 * nd];
    for c in 0..6 {
        for i in 0..nd {
            r[6 * i + c] = sys.loads[c][i];
        }
    }
    let mut target = [0.0; 6];
    let mut active = [false; 6];
    for c in 0..6 {
        let fnorm = dot(&sys.loads[c], &sys.loads[c]).sqrt();
        target[c] = (opts.rel_tol * fnorm).max(LOAD_NOISE_FLOOR * sys.full_load_norms[c]);
        residuals[c] = if fnorm > 0.0 { 1.0 } else { 0.0 };
        active[c] = fnorm > target[c];
    }
    let mut z: Vec<f64> = r.iter().enumerate().map(|(k, v)| v * inv_diag[k / 6]).collect();
    let mut p = z.clone();
    let mut q = vec![0.0; 6 * nd];
    let mut rz = [0.0; 6];
    for i in 0..nd {
        for c in 0..6 {
            rz[c] += r[6 * i + c] * z[6 * i + c];
        }
    }
    let fnorms: [f64; 6] = std::array::from_fn(|c| dot(&sys.loads[c], &sys.loads[c]).sqrt());

    let mut it = 0;
    while active.iter().any(|a| *a) {
        if it >= cap {
            let c = (0..6).find(|&c| active[c]).unwrap_or(0);
            return Err(Error::SolverNonConvergence {
                case: c,
                iterations: it,
                residual: residuals[c],
            });
        }
        it += 1;
        sys.stiffness.mul6(&p, &mut q, &active);
        let mut pq = [0.0; 6];
        for i in 0..nd {
            for c in 0..6 {
                pq[c] += p[6 * i + c] * q[6 * i + c];
            }
        }
        let alpha: [f64; 6] = std::array::from_fn(|c| if active[c] { rz[c] / pq[c] } else { 0.0 });
        let mut rr = [0.0; 6];
        for k in 0..6 * nd {
            let c = k % 6;
            if active[c] {
                x[k] += alpha[c] * p[k];
                r[k] -= alpha[c] * q[k];
                rr[c] += r[k] * r[k];
            }
        }
        for c in 0..6 {
            if active[c] {
                iterations[c] = it;
                residuals[c] = rr[c].sqrt() / fnorms[c];
                if rr[c].sqrt() <= target[c] {
                    active[c] = false;
                }
            }
        }
        let mut rz_new = [0.0; 6];
        for k in 0..6 * nd {
            let c = k % 6;
            if active[c] {
                z[k] = r[k] * inv_diag[k / 6];
                rz_new[c] += r[k] * z[k];
            }
        }
        for k in 0..6 * nd {
            let c = k % 6;
            if active[c] {
                p[k] = z[k] + rz_new[c] / rz[c] * p[k];
            }
        }
        rz = rz_new;
    }
    let interior = std::array::from_fn(|c| (0..nd).map(|i| x[6 * i + c]).collect());
    Ok(CorrectorSolution {
        interior,
        iterations,
        residuals,
    })
}

/// One realization's effective matrix and its spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveSample {
    pub kappa: u64,
    pub c_eff: Matrix6<f64>,
    /// Eigenvalues, largest first.
    pub lambda: [f64; 6],
    /// `||C - C^T||_F / ||C||_F` before symmetrization.
    pub raw_asymmetry: f64,
}

fn element_displacement(mesh: &HexMesh, u: &[f64], e: usize) -> SMatrix<f64, 24, 1> {
    let nodes = mesh.element_nodes(e);
    SMatrix::<f64, 24, 1>::from_fn(|k, _| u[3 * nodes[k / 3] + k % 3])
}

pub fn sorted_eigenvalues(m: &Matrix6<f64>) -> [f64; 6] {
    let mut l: Vec<f64> = SymmetricEigen::new(*m).eigenvalues.iter().copied().collect();
    l.sort_by(|a, b| b.total_cmp(a));
    std::array::from_fn(|i| l[i])
}

/// Volume average of the stress under each unit macro strain plus its corrector.
pub fn effective_matrix(sys: &DirichletSystem, sol: &CorrectorSolution) -> Result<EffectiveSample> {
    let mesh = &sys.mesh;
    let nodal: Vec<Vec<f64>> = (0..6).map(|c| sol.nodal(mesh, c)).collect();
    let mut c_eff = Matrix6::zeros();
    for e in 0..mesh.n_elements() {
        let ue: Vec<_> = nodal.iter().map(|u| element_displacement(mesh, u, e)).collect();
        for (g, lg) in LOCAL_GAUSS.iter().enumerate() {
            let c = &sys.material[mesh.gauss_index(e, *lg)];
            let b = &sys.kernel.b[g];
            for j in 0..6 {
                let mut strain: Vector6<f64> = b * ue[j];
                strain[j] += 1.0;
                let col = c * strain * sys.kernel.det_j;
                for i in 0..6 {
                    c_eff[(i, j)] += col[i];
                }
            }
        }
    }
    c_eff /= mesh.volume();
    let raw_asymmetry = (c_eff - c_eff.transpose()).norm() / c_eff.norm();
    let c_eff = 0.5 * (c_eff + c_eff.transpose());
    let lambda = sorted_eigenvalues(&c_eff);
    if !(lambda[5] > 0.0) {
        return Err(Error::EffectiveNotPositive(lambda[5]));
    }
    if raw_asymmetry > 1e-6 {
        log::warn!("effective matrix asymmetry {raw_asymmetry:e} before symmetrization");
    }
    Ok(EffectiveSample {
        kappa: 0,
        c_eff,
        lambda,
        raw_asymmetry,
    })
}

/// Energy-norm quantities of one corrector: `b(u, u)`, `L(u)` and `||u||_H`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectorEnergy {
    pub bilinear: f64,
    pub linear: f64,
    pub h_norm: f64,
}

pub fn corrector_energy(sys: &DirichletSystem, sol: &CorrectorSolution, case: usize) -> CorrectorEnergy {
    let u = &sol.interior[case];
    let mut ku = vec![0.0; u.len()];
    sys.stiffness.mul(u, &mut ku);
    let nodal = sol.nodal(&sys.mesh, case);
    let mut h2 = 0.0;
    for e in 0..sys.mesh.n_elements() {
        let ue = element_displacement(&sys.mesh, &nodal, e);
        for b in &sys.kernel.b {
            h2 += strain_norm_sq(&(b * ue)) * sys.kernel.det_j;
        }
    }
    CorrectorEnergy {
        bilinear: dot(u, &ku),
        linear: dot(&sys.loads[case], u),
        h_norm: h2.sqrt(),
    }
}

/// Assemble, solve and average.
pub fn homogenize(
    mesh: &HexMesh,
    field: &dyn MaterialField,
    opts: &SolverOptions,
) -> Result<(EffectiveSample, DirichletSystem, CorrectorSolution)> {
    let sys = assemble(mesh, field)?;
    let sol = solve_correctors(&sys, opts)?;
    let eff = effective_matrix(&sys, &sol)?;
    Ok((eff, sys, sol))
}
