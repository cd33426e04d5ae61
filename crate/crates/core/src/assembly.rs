//! Lowest-order hexahedral Nédélec elements and global assembly.
//!
//! The twelve local basis functions are dual to the *average* tangential
//! component on each edge. On the unit cube the basis function of the edge
//! along axis `d` with transverse offsets `(a, b)` is
//! `N = phi_a(x_p) phi_b(x_q) e_d`, where `(p, q)` are the cyclic successors of
//! `d`, `phi_0(t) = 1 - t` and `phi_1(t) = t`. On a cube of side `h` the mass
//! matrix scales like `h^3` and the curl-curl matrix like `h`.
//!
//! Local edge order: `4 d + a + 2 b`.

use std::fmt;

use num_traits::Num;
use serde::{Deserialize, Serialize};

use crate::error::{MgError, Result};
use crate::linalg::SparseSym;
use crate::mesh::{Axis, EntityKey, LatticeMesh};
use crate::scalar::Scalar;

pub const LOCAL_EDGES: usize = 12;

/// Direction and transverse offsets `(a, b)` of a local edge.
pub fn local_edge(i: usize) -> (Axis, usize, usize) {
    (Axis::from_index(i / 4), i % 2, (i / 2) % 2)
}

/// Global key of local edge `i` of `cell`.
pub fn cell_edge(cell: &EntityKey, i: usize) -> EntityKey {
    let (d, a, b) = local_edge(i);
    let (p, q) = d.transverse();
    let mut c = cell.coords;
    c[p.index()] += a as i64;
    c[q.index()] += b as i64;
    EntityKey::edge(d, c)
}

/// Linear polynomial `c0 + c1 t` on `[0, 1]`.
#[derive(Clone, Copy)]
struct Linear<T> {
    c0: T,
    c1: T,
}

impl<T: Num + Copy> Linear<T> {
    fn one() -> Self {
        Linear { c0: T::one(), c1: T::zero() }
    }

    /// `phi_0 = 1 - t`, `phi_1 = t`.
    fn hat(a: usize) -> Self {
        if a == 0 {
            Linear { c0: T::one(), c1: T::zero() - T::one() }
        } else {
            Linear { c0: T::zero(), c1: T::one() }
        }
    }

    fn hat_derivative(a: usize) -> Self {
        if a == 0 {
            Linear { c0: T::zero() - T::one(), c1: T::zero() }
        } else {
            Self::one()
        }
    }

    /// Exact `integral_0^1 self * other dt`.
    fn inner(self, other: Self) -> T {
        let two = T::one() + T::one();
        let three = two + T::one();
        self.c0 * other.c0 + (self.c0 * other.c1 + self.c1 * other.c0) / two + self.c1 * other.c1 / three
    }
}

/// `coef * f_x(x) f_y(y) f_z(z)`.
#[derive(Clone, Copy)]
struct Separable<T> {
    coef: T,
    factors: [Linear<T>; 3],
}

impl<T: Num + Copy> Separable<T> {
    fn inner(&self, other: &Self) -> T {
        let mut v = self.coef * other.coef;
        for a in 0..3 {
            v = v * self.factors[a].inner(other.factors[a]);
        }
        v
    }
}

/// Vector field whose components are each a single separable term (or zero).
type Field<T> = [Option<Separable<T>>; 3];

fn field_inner<T: Num + Copy>(u: &Field<T>, v: &Field<T>) -> T {
    let mut acc = T::zero();
    for c in 0..3 {
        if let (Some(a), Some(b)) = (&u[c], &v[c]) {
            acc = acc + a.inner(b);
        }
    }
    acc
}

fn basis<T: Num + Copy>(i: usize) -> Field<T> {
    let (d, a, b) = local_edge(i);
    let (p, q) = d.transverse();
    let mut factors = [Linear::one(); 3];
    factors[p.index()] = Linear::hat(a);
    factors[q.index()] = Linear::hat(b);
    let mut f: Field<T> = [None; 3];
    f[d.index()] = Some(Separable { coef: T::one(), factors });
    f
}

/// `curl (f e_d)` has `p`-component `d_q f` and `q`-component `-d_p f`.
fn basis_curl<T: Num + Copy>(i: usize) -> Field<T> {
    let (d, a, b) = local_edge(i);
    let (p, q) = d.transverse();
    let mut f: Field<T> = [None; 3];
    let mut fp = [Linear::one(); 3];
    fp[p.index()] = Linear::hat(a);
    fp[q.index()] = Linear::hat_derivative(b);
    f[p.index()] = Some(Separable { coef: T::one(), factors: fp });
    let mut fq = [Linear::one(); 3];
    fq[p.index()] = Linear::hat_derivative(a);
    fq[q.index()] = Linear::hat(b);
    f[q.index()] = Some(Separable { coef: T::zero() - T::one(), factors: fq });
    f
}

/// Curl-curl and mass matrices of one cube element of side `h`.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementMatrices<T> {
    pub h: T,
    pub stiffness: [[T; LOCAL_EDGES]; LOCAL_EDGES],
    pub mass: [[T; LOCAL_EDGES]; LOCAL_EDGES],
}

impl<T: Num + Copy> ElementMatrices<T> {
    /// Exact element integrals; works for any field-like `T`, including rationals.
    pub fn new(h: T) -> Self {
        let fields: Vec<Field<T>> = (0..LOCAL_EDGES).map(basis).collect();
        let curls: Vec<Field<T>> = (0..LOCAL_EDGES).map(basis_curl).collect();
        let h3 = h * h * h;
        let mut stiffness = [[T::zero(); LOCAL_EDGES]; LOCAL_EDGES];
        let mut mass = [[T::zero(); LOCAL_EDGES]; LOCAL_EDGES];
        for i in 0..LOCAL_EDGES {
            for j in 0..=i {
                let k = field_inner(&curls[i], &curls[j]) * h;
                let m = field_inner(&fields[i], &fields[j]) * h3;
                stiffness[i][j] = k;
                stiffness[j][i] = k;
                mass[i][j] = m;
                mass[j][i] = m;
            }
        }
        ElementMatrices { h, stiffness, mass }
    }
}

/// `local_matrices(h)` for floating point scalars.
pub fn local_matrices<T: Scalar>(h: T) -> ElementMatrices<T> {
    assert!(h > T::zero(), "element size must be positive");
    ElementMatrices::new(h)
}

/// Evaluates local basis function `i` on the unit reference cube.
pub fn reference_basis(i: usize, xi: [f64; 3]) -> [f64; 3] {
    let (d, a, b) = local_edge(i);
    let (p, q) = d.transverse();
    let hat = |s: usize, t: f64| if s == 0 { 1.0 - t } else { t };
    let mut v = [0.0; 3];
    v[d.index()] = hat(a, xi[p.index()]) * hat(b, xi[q.index()]);
    v
}

/// Color of an initial subdomain in the checkerboard.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Color {
    Black,
    White,
}

impl Color {
    /// Black iff the subdomain position has an even coordinate sum.
    pub fn of_subdomain(p: [usize; 3]) -> Color {
        if (p[0] + p[1] + p[2]).is_multiple_of(2) {
            Color::Black
        } else {
            Color::White
        }
    }
}

/// Piecewise constant `(alpha, beta)` in a checkerboard over the initial subdomains.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientField {
    pub alpha_black: f64,
    pub beta_black: f64,
    pub alpha_white: f64,
    pub beta_white: f64,
}

impl CoefficientField {
    pub fn new(alpha_black: f64, beta_black: f64, alpha_white: f64, beta_white: f64) -> Result<Self> {
        let c = CoefficientField { alpha_black, beta_black, alpha_white, beta_white };
        c.validate()?;
        Ok(c)
    }

    pub fn uniform(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(alpha, beta, alpha, beta)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha_black", self.alpha_black), ("alpha_white", self.alpha_white)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(MgError::InvalidCoefficient(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        for (name, v) in [("beta_black", self.beta_black), ("beta_white", self.beta_white)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(MgError::InvalidCoefficient(format!("{name} = {v} must be finite and > 0")));
            }
        }
        Ok(())
    }

    pub fn coefficients(&self, color: Color) -> (f64, f64) {
        match color {
            Color::Black => (self.alpha_black, self.beta_black),
            Color::White => (self.alpha_white, self.beta_white),
        }
    }

    /// `(alpha, beta)` on a cell, inherited from its initial subdomain.
    pub fn on_cell(&self, mesh: &LatticeMesh, cell: &EntityKey) -> (f64, f64) {
        self.coefficients(Color::of_subdomain(mesh.subdomain_of(cell)))
    }
}

impl fmt::Display for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "alpha_b = {}, beta_b = {}, alpha_w = {}, beta_w = {}",
            self.alpha_black, self.beta_black, self.alpha_white, self.beta_white
        )
    }
}

const NO_DOF: u32 = u32::MAX;

/// Numbering of the unknowns of one level: the interior edges in mesh order.
#[derive(Clone, Debug)]
pub struct DofMap {
    level: usize,
    side: usize,
    keys: Vec<EntityKey>,
    lookup: Vec<u32>,
}

impl DofMap {
    /// Unknowns for `H_0(curl)`: boundary edges are eliminated.
    pub fn interior(mesh: &LatticeMesh) -> DofMap {
        Self::from_keys(mesh, mesh.interior_edges().copied().collect())
    }

    /// Every edge of the mesh, boundary included.
    pub fn all_edges(mesh: &LatticeMesh) -> DofMap {
        Self::from_keys(mesh, mesh.edges().to_vec())
    }

    fn from_keys(mesh: &LatticeMesh, keys: Vec<EntityKey>) -> DofMap {
        let side = mesh.cells_per_side() + 1;
        let mut lookup = vec![NO_DOF; 3 * side * side * side];
        for (i, k) in keys.iter().enumerate() {
            let slot = Self::slot(side, k).expect("edge key within lattice");
            lookup[slot] = i as u32;
        }
        DofMap { level: mesh.level(), side, keys, lookup }
    }

    fn slot(side: usize, key: &EntityKey) -> Option<usize> {
        if !key.kind.is_edge() {
            return None;
        }
        let s = side as i64;
        let [x, y, z] = key.coords;
        if [x, y, z].iter().any(|&c| c < 0 || c >= s) {
            return None;
        }
        let d = key.kind.axis().expect("edge").index();
        Some(d * side * side * side + (x + s * (y + s * z)) as usize)
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[EntityKey] {
        &self.keys
    }

    pub fn key(&self, i: usize) -> EntityKey {
        self.keys[i]
    }

    pub fn index_of(&self, key: &EntityKey) -> Option<usize> {
        Self::slot(self.side, key)
            .map(|s| self.lookup[s])
            .filter(|&i| i != NO_DOF)
            .map(|i| i as usize)
    }
}

/// Assembles `A = sum_e (alpha_e K_e + beta_e M_e)` over the interior edges.
pub fn assemble<T: Scalar>(mesh: &LatticeMesh, coeffs: &CoefficientField) -> Result<(SparseSym<T>, DofMap)> {
    let dofs = DofMap::interior(mesh);
    let a = assemble_with(mesh, coeffs, &dofs)?;
    Ok((a, dofs))
}

/// Assembly onto an arbitrary edge numbering; edges absent from `dofs` are dropped.
pub fn assemble_with<T: Scalar>(mesh: &LatticeMesh, coeffs: &CoefficientField, dofs: &DofMap) -> Result<SparseSym<T>> {
    coeffs.validate()?;
    let element = local_matrices(T::lit(mesh.cell_size()));
    let mut triplets = Vec::with_capacity(mesh.cells().len() * LOCAL_EDGES * LOCAL_EDGES);
    for cell in mesh.cells() {
        let (alpha, beta) = coeffs.on_cell(mesh, cell);
        let (alpha, beta) = (T::lit(alpha), T::lit(beta));
        let global: Vec<Option<usize>> = (0..LOCAL_EDGES).map(|i| dofs.index_of(&cell_edge(cell, i))).collect();
        for i in 0..LOCAL_EDGES {
            let Some(gi) = global[i] else { continue };
            for j in 0..LOCAL_EDGES {
                let Some(gj) = global[j] else { continue };
                let v = alpha * element.stiffness[i][j] + beta * element.mass[i][j];
                triplets.push((gi as u32, gj as u32, v));
            }
        }
    }
    Ok(SparseSym::from_triplets(dofs.len(), dofs.len(), triplets))
}

/// 2-point Gauss-Legendre rule on `[0, 1]`.
fn gauss2() -> [(f64, f64); 2] {
    let s = 0.5 / 3f64.sqrt();
    [(0.5 - s, 0.5), (0.5 + s, 0.5)]
}

/// Load vector `<f_h, v> = (f, v)` by tensor 2-point Gauss quadrature per element.
pub fn assemble_rhs<T: Scalar>(mesh: &LatticeMesh, dofs: &DofMap, f: impl Fn([f64; 3]) -> [f64; 3]) -> Vec<T> {
    let h = mesh.cell_size();
    let rule = gauss2();
    let mut rhs = vec![T::zero(); dofs.len()];
    for cell in mesh.cells() {
        let global: Vec<Option<usize>> = (0..LOCAL_EDGES).map(|i| dofs.index_of(&cell_edge(cell, i))).collect();
        if global.iter().all(Option::is_none) {
            continue;
        }
        let mut local = [0.0f64; LOCAL_EDGES];
        for &(zx, wx) in &rule {
            for &(zy, wy) in &rule {
                for &(zz, wz) in &rule {
                    let xi = [zx, zy, zz];
                    let x = [0, 1, 2].map(|a| -1.0 + h * (cell.coords[a] as f64 + xi[a]));
                    let fx = f(x);
                    let w = wx * wy * wz * h * h * h;
                    for (i, li) in local.iter_mut().enumerate() {
                        let n = reference_basis(i, xi);
                        *li += w * (fx[0] * n[0] + fx[1] * n[1] + fx[2] * n[2]);
                    }
                }
            }
        }
        for (i, g) in global.iter().enumerate() {
            if let Some(g) = g {
                rhs[*g] += T::lit(local[i]);
            }
        }
    }
    rhs
}

/// Edge DOFs (average tangential components) of a constant field.
pub fn interpolate_constant<T: Scalar>(dofs: &DofMap, field: [f64; 3]) -> Vec<T> {
    dofs.keys()
        .iter()
        .map(|k| {
            let d = k.kind.axis().expect("edge");
            T::lit(field[d.index()])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{a_inner, DenseMatrix};
    use crate::mesh::{Domain, EntityKind};

    #[test]
    fn unit_element_reference_values() {
        let e = local_matrices(1.0f64);
        // local edge 0: N = ((1-y)(1-z), 0, 0)
        assert!((e.mass[0][0] - 1.0 / 9.0).abs() < 1e-15);
        assert!((e.stiffness[0][0] - 2.0 / 3.0).abs() < 1e-15);
        // different directions never couple in the mass matrix
        assert_eq!(e.mass[0][4], 0.0);
    }

    #[test]
    fn half_size_scaling() {
        let one = local_matrices(1.0f64);
        let half = local_matrices(0.5f64);
        for i in 0..LOCAL_EDGES {
            for j in 0..LOCAL_EDGES {
                assert_eq!(half.mass[i][j], one.mass[i][j] / 8.0);
                assert_eq!(half.stiffness[i][j], one.stiffness[i][j] / 2.0);
            }
        }
    }

    #[test]
    fn cell_edges_are_distinct_and_oriented() {
        let cell = EntityKey::cell([3, 4, 5]);
        let mut edges: Vec<_> = (0..LOCAL_EDGES).map(|i| cell_edge(&cell, i)).collect();
        edges.sort();
        edges.dedup();
        assert_eq!(edges.len(), 12);
        let mesh = LatticeMesh::build_initial(Domain::Cube);
        for c in mesh.cells() {
            for i in 0..LOCAL_EDGES {
                assert!(mesh.contains(&cell_edge(c, i)));
            }
        }
    }

    #[test]
    fn free_dof_count_cube_level_one() {
        let mesh = LatticeMesh::build_initial(Domain::Cube).refine();
        let (a, dofs) = assemble::<f64>(&mesh, &CoefficientField::uniform(1.0, 1.0).unwrap()).unwrap();
        assert_eq!(dofs.len(), 3 * 4 * 9);
        assert_eq!(a.nrows(), 108);
        assert_eq!(a.asymmetry(), 0.0);
    }

    #[test]
    fn single_element_has_no_unknowns() {
        let mesh = LatticeMesh::from_cells(Domain::Cube, 0, 1, &[[0, 0, 0]]);
        let (a, dofs) = assemble::<f64>(&mesh, &CoefficientField::uniform(1.0, 1.0).unwrap()).unwrap();
        assert!(dofs.is_empty());
        assert_eq!(a.nrows(), 0);
    }

    #[test]
    fn invalid_beta_rejected() {
        assert!(CoefficientField::uniform(1.0, 0.0).is_err());
        assert!(CoefficientField::new(-1.0, 1.0, 1.0, 1.0).is_err());
        let mesh = LatticeMesh::build_initial(Domain::Cube);
        let bad = CoefficientField { alpha_black: 1.0, beta_black: -2.0, alpha_white: 1.0, beta_white: 1.0 };
        assert!(matches!(assemble::<f64>(&mesh, &bad), Err(MgError::InvalidCoefficient(_))));
    }

    #[test]
    fn zero_alpha_gives_mass_matrix() {
        let mesh = LatticeMesh::build_initial(Domain::Cube).refine();
        let (a, dofs) = assemble::<f64>(&mesh, &CoefficientField::uniform(0.0, 1.0).unwrap()).unwrap();
        let (a2, _) = assemble::<f64>(&mesh, &CoefficientField::uniform(0.0, 2.0).unwrap()).unwrap();
        for (i, j, v) in a.triplets() {
            assert_eq!(a2.get(i, j), 2.0 * v);
        }
        let x: Vec<f64> = (0..dofs.len()).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        assert!(a_inner(&a, &x, &x) > 0.0);
    }

    #[test]
    fn constant_field_is_curl_free_on_single_element() {
        let mesh = LatticeMesh::from_cells(Domain::Cube, 0, 1, &[[0, 0, 0]]);
        let dofs = DofMap::all_edges(&mesh);
        let ones = interpolate_constant::<f64>(&dofs, [1.0, 0.0, 0.0]);
        let with_curl = assemble_with::<f64>(&mesh, &CoefficientField::uniform(37.0, 2.0).unwrap(), &dofs).unwrap();
        let mass_only = assemble_with::<f64>(&mesh, &CoefficientField::uniform(0.0, 2.0).unwrap(), &dofs).unwrap();
        let lhs = with_curl.matvec(&ones);
        let rhs = mass_only.matvec(&ones);
        for (a, b) in lhs.iter().zip(&rhs) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn rhs_of_zero_and_directional_load() {
        let mesh = LatticeMesh::build_initial(Domain::Cube).refine();
        let dofs = DofMap::interior(&mesh);
        let zero = assemble_rhs::<f64>(&mesh, &dofs, |_| [0.0; 3]);
        assert!(zero.iter().all(|&v| v == 0.0));
        let fx = assemble_rhs::<f64>(&mesh, &dofs, |_| [1.0, 0.0, 0.0]);
        for (k, v) in dofs.keys().iter().zip(&fx) {
            if k.kind == EntityKind::EdgeX {
                // interior x-edge: four cells, each contributing h^3 / 4
                assert!((v - 4.0 * 0.125 / 4.0).abs() < 1e-15);
            } else {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn rhs_is_linear() {
        let mesh = LatticeMesh::build_initial(Domain::Fichera).refine();
        let dofs = DofMap::interior(&mesh);
        let f1 = |x: [f64; 3]| [x[1] * x[2], x[0].sin(), 1.0 + x[2]];
        let f2 = |x: [f64; 3]| [x[0] * x[0], -x[1], x[0] * x[1] * x[2]];
        let a = assemble_rhs::<f64>(&mesh, &dofs, f1);
        let b = assemble_rhs::<f64>(&mesh, &dofs, f2);
        let c = assemble_rhs::<f64>(&mesh, &dofs, |x| {
            let (u, v) = (f1(x), f2(x));
            [u[0] + v[0], u[1] + v[1], u[2] + v[2]]
        });
        for i in 0..dofs.len() {
            assert!((a[i] + b[i] - c[i]).abs() < 1e-12);
        }
    }

    fn rank(m: &DenseMatrix<f64>, tol: f64) -> usize {
        let mut a = m.clone();
        let (r, c) = (a.nrows(), a.ncols());
        let mut rank = 0;
        for col in 0..c {
            let pivot = (rank..r).max_by(|&i, &j| a[(i, col)].abs().total_cmp(&a[(j, col)].abs()));
            let Some(p) = pivot else { break };
            if a[(p, col)].abs() < tol {
                continue;
            }
            for j in 0..c {
                let t = a[(p, j)];
                a[(p, j)] = a[(rank, j)];
                a[(rank, j)] = t;
            }
            for i in 0..r {
                if i != rank {
                    let f = a[(i, col)] / a[(rank, col)];
                    for j in 0..c {
                        let v = a[(rank, j)];
                        a[(i, j)] -= f * v;
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    #[test]
    fn stiffness_kernel_is_gradients() {
        let e = local_matrices(1.0f64);
        let k = DenseMatrix::from_fn(12, 12, |i, j| e.stiffness[i][j]);
        assert_eq!(12 - rank(&k, 1e-12), 7);
        // gradient of the trilinear hat at each corner: DOF on edge = difference of endpoint values
        for corner in 0..8usize {
            let c = [corner & 1, (corner >> 1) & 1, (corner >> 2) & 1];
            let g: Vec<f64> = (0..12)
                .map(|i| {
                    let (d, a, b) = local_edge(i);
                    let (p, q) = d.transverse();
                    let mut start = [0usize; 3];
                    start[p.index()] = a;
                    start[q.index()] = b;
                    let mut end = start;
                    end[d.index()] = 1;
                    (end == c) as i32 as f64 - (start == c) as i32 as f64
                })
                .collect();
            let kg = k.matvec(&g);
            assert!(kg.iter().all(|v| v.abs() < 1e-14));
        }
        let m = DenseMatrix::from_fn(12, 12, |i, j| e.mass[i][j]);
        assert!(crate::linalg::CholeskyFactor::factor(&m).is_ok());
    }
}
