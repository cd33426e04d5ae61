//! Nonoverlapping subspaces built from the substructures of the coarse mesh.
//!
//! * interior patches: the fine edges strictly inside one coarse cell,
//! * edge patches: the fine skeleton edges on a coarse edge and its four faces,
//!   extended discretely a-harmonically into the four adjacent cells,
//! * vertex patches: the same around a coarse vertex (six edges, twelve faces,
//!   eight cells).
//!
//! For the skeleton patches the local operator is the Schur complement
//! `S = A_GG - A_GI A_II^{-1} A_IG`, which is the Galerkin matrix of the basis
//! `[I; H]` with `H = -A_II^{-1} A_IG`.

use rayon::prelude::*;

use crate::assembly::DofMap;
use crate::error::{MgError, Result};
use crate::linalg::{CholeskyFactor, DenseMatrix, SparseSym};
use crate::mesh::{EntityKey, LatticeMesh};
use crate::scalar::Scalar;

pub const INTERIOR_DOFS: usize = 6;
pub const EDGE_SKELETON_DOFS: usize = 18;
pub const EDGE_INTERIOR_DOFS: usize = 24;
pub const VERTEX_SKELETON_DOFS: usize = 60;
pub const VERTEX_INTERIOR_DOFS: usize = 48;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PatchKind {
    Interior,
    Edge,
    Vertex,
}

/// A subspace correction `J A_loc^{-1} J^T` acting on a gathered residual.
pub trait SubspaceCorrection<T: Scalar>: Send + Sync {
    /// Global DOFs touched by the correction, in local order.
    fn support(&self) -> &[u32];

    /// Replaces the gathered residual `local` by the local correction.
    fn solve_local(&self, local: &mut [T]);

    /// Full-length correction vector for residual `r`.
    fn patch_correct(&self, r: &[T]) -> Vec<T> {
        let mut local: Vec<T> = self.support().iter().map(|&i| r[i as usize]).collect();
        self.solve_local(&mut local);
        let mut out = vec![T::zero(); r.len()];
        for (&i, v) in self.support().iter().zip(local) {
            out[i as usize] += v;
        }
        out
    }
}

/// `W_k^T` for one coarse cell.
#[derive(Clone, Debug)]
pub struct InteriorPatch<T> {
    pub cell: EntityKey,
    dofs: Vec<u32>,
    factor: CholeskyFactor<T>,
}

impl<T: Scalar> InteriorPatch<T> {
    pub fn dofs(&self) -> &[u32] {
        &self.dofs
    }

    pub fn factor(&self) -> &CholeskyFactor<T> {
        &self.factor
    }
}

impl<T: Scalar> SubspaceCorrection<T> for InteriorPatch<T> {
    fn support(&self) -> &[u32] {
        &self.dofs
    }

    fn solve_local(&self, local: &mut [T]) {
        self.factor.solve_in_place(local);
    }
}

/// Edge or vertex space: skeleton DOFs with their a-harmonic extension.
#[derive(Clone, Debug)]
pub struct HarmonicPatch<T> {
    pub kind: PatchKind,
    pub entity: EntityKey,
    /// Skeleton DOFs followed by interior DOFs.
    support: Vec<u32>,
    n_skeleton: usize,
    /// `H = -A_II^{-1} A_IG`, shape `|I| x |G|`.
    extension: DenseMatrix<T>,
    schur: CholeskyFactor<T>,
}

pub type EdgePatch<T> = HarmonicPatch<T>;
pub type VertexPatch<T> = HarmonicPatch<T>;

impl<T: Scalar> HarmonicPatch<T> {
    pub fn skeleton(&self) -> &[u32] {
        &self.support[..self.n_skeleton]
    }

    pub fn interior(&self) -> &[u32] {
        &self.support[self.n_skeleton..]
    }

    pub fn extension(&self) -> &DenseMatrix<T> {
        &self.extension
    }

    pub fn schur_factor(&self) -> &CholeskyFactor<T> {
        &self.schur
    }

    /// Basis function `i` of the patch as a full-length vector: a unit value on
    /// skeleton DOF `i` plus its harmonic extension.
    pub fn basis_vector(&self, i: usize, n: usize) -> Vec<T> {
        let mut v = vec![T::zero(); n];
        v[self.skeleton()[i] as usize] = T::one();
        for (r, &g) in self.interior().iter().enumerate() {
            v[g as usize] = self.extension[(r, i)];
        }
        v
    }
}

impl<T: Scalar> SubspaceCorrection<T> for HarmonicPatch<T> {
    fn support(&self) -> &[u32] {
        &self.support
    }

    fn solve_local(&self, local: &mut [T]) {
        let (gamma, interior) = local.split_at_mut(self.n_skeleton);
        // rho = r_G + H^T r_I
        self.extension.transpose_matvec_add(interior, gamma);
        self.schur.solve_in_place(gamma);
        self.extension.matvec_into(gamma, interior);
    }
}

/// Harmonic extension and Schur complement of `a` for a skeleton/interior split.
pub fn harmonic_extension<T: Scalar>(
    a: &SparseSym<T>,
    skeleton: &[u32],
    interior: &[u32],
) -> Result<(DenseMatrix<T>, DenseMatrix<T>)> {
    let a_ii = a.dense_block(interior, interior);
    let a_ig = a.dense_block(interior, skeleton);
    let a_gg = a.dense_block(skeleton, skeleton);
    let f_ii = CholeskyFactor::factor(&a_ii)?;
    let mut h = DenseMatrix::zeros(interior.len(), skeleton.len());
    for j in 0..skeleton.len() {
        let mut col = a_ig.column(j);
        f_ii.solve_in_place(&mut col);
        col.iter_mut().for_each(|v| *v = -*v);
        h.set_column(j, &col);
    }
    let mut s = a_gg;
    s.add_scaled(T::one(), &a_ig.transpose().matmul(&h));
    Ok((h, s))
}

fn map_dofs(
    dofs: &DofMap,
    fine: &LatticeMesh,
    coarse: &LatticeMesh,
    entities: &[EntityKey],
    out: &mut Vec<u32>,
) -> Result<()> {
    for e in entities {
        for f in LatticeMesh::coarse_entity_members(fine, coarse, e)? {
            if let Some(i) = dofs.index_of(&f) {
                out.push(i as u32);
            }
        }
    }
    Ok(())
}

fn check_size(what: &str, entity: &EntityKey, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(MgError::MeshConsistency(format!(
            "{what} of {entity:?} has {got} DOFs, expected {expected}"
        )));
    }
    Ok(())
}

/// One patch per coarse cell.
pub fn build_interior_patches<T: Scalar>(
    coarse: &LatticeMesh,
    fine: &LatticeMesh,
    a: &SparseSym<T>,
    dofs: &DofMap,
) -> Result<Vec<InteriorPatch<T>>> {
    coarse
        .cells()
        .par_iter()
        .map(|cell| {
            let mut ids = Vec::with_capacity(INTERIOR_DOFS);
            map_dofs(dofs, fine, coarse, std::slice::from_ref(cell), &mut ids)?;
            check_size("interior patch", cell, ids.len(), INTERIOR_DOFS)?;
            let factor = CholeskyFactor::factor(&a.dense_block(&ids, &ids))?;
            Ok(InteriorPatch { cell: *cell, dofs: ids, factor })
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn build_harmonic<T: Scalar>(
    kind: PatchKind,
    entity: EntityKey,
    skeleton_entities: &[EntityKey],
    cells: &[EntityKey],
    coarse: &LatticeMesh,
    fine: &LatticeMesh,
    a: &SparseSym<T>,
    dofs: &DofMap,
) -> Result<HarmonicPatch<T>> {
    let (n_gamma, n_int) = match kind {
        PatchKind::Edge => (EDGE_SKELETON_DOFS, EDGE_INTERIOR_DOFS),
        PatchKind::Vertex => (VERTEX_SKELETON_DOFS, VERTEX_INTERIOR_DOFS),
        PatchKind::Interior => unreachable!("interior patches have no skeleton"),
    };
    let mut skeleton = Vec::with_capacity(n_gamma);
    map_dofs(dofs, fine, coarse, skeleton_entities, &mut skeleton)?;
    let mut interior = Vec::with_capacity(n_int);
    map_dofs(dofs, fine, coarse, cells, &mut interior)?;
    check_size("skeleton", &entity, skeleton.len(), n_gamma)?;
    check_size("interior", &entity, interior.len(), n_int)?;
    let (extension, s) = harmonic_extension(a, &skeleton, &interior)?;
    let schur = CholeskyFactor::factor(&s)?;
    let n_skeleton = skeleton.len();
    skeleton.extend(interior);
    Ok(HarmonicPatch { kind, entity, support: skeleton, n_skeleton, extension, schur })
}

fn star_cells(coarse: &LatticeMesh, entity: &EntityKey, expected: usize) -> Result<Vec<EntityKey>> {
    let cells: Vec<EntityKey> = coarse.adjacent_cells(entity).map(EntityKey::cell).collect();
    if cells.len() != expected {
        return Err(MgError::MeshConsistency(format!(
            "{entity:?} has {} adjacent cells, expected {expected}",
            cells.len()
        )));
    }
    Ok(cells)
}

/// One patch per interior coarse edge.
pub fn build_edge_patches<T: Scalar>(
    coarse: &LatticeMesh,
    fine: &LatticeMesh,
    a: &SparseSym<T>,
    dofs: &DofMap,
) -> Result<Vec<EdgePatch<T>>> {
    let edges: Vec<EntityKey> = coarse.interior_edges().copied().collect();
    edges
        .par_iter()
        .map(|edge| {
            let cells = star_cells(coarse, edge, 4)?;
            let mut skeleton = vec![*edge];
            skeleton.extend(LatticeMesh::faces_around_edge(edge));
            build_harmonic(PatchKind::Edge, *edge, &skeleton, &cells, coarse, fine, a, dofs)
        })
        .collect()
}

/// One patch per interior coarse vertex.
pub fn build_vertex_patches<T: Scalar>(
    coarse: &LatticeMesh,
    fine: &LatticeMesh,
    a: &SparseSym<T>,
    dofs: &DofMap,
) -> Result<Vec<VertexPatch<T>>> {
    let vertices: Vec<EntityKey> = coarse.interior_vertices().copied().collect();
    vertices
        .par_iter()
        .map(|vertex| {
            let cells = star_cells(coarse, vertex, 8)?;
            let mut skeleton = LatticeMesh::edges_at_vertex(vertex);
            skeleton.extend(LatticeMesh::faces_at_vertex(vertex));
            build_harmonic(PatchKind::Vertex, *vertex, &skeleton, &cells, coarse, fine, a, dofs)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble, CoefficientField};
    use crate::linalg::{dot, CsrMatrix};
    use crate::mesh::Domain;

    struct Setup {
        coarse: LatticeMesh,
        fine: LatticeMesh,
        a: CsrMatrix<f64>,
        dofs: DofMap,
    }

    fn setup(domain: Domain, level: usize) -> Setup {
        let meshes = LatticeMesh::hierarchy(domain, level);
        let coarse = meshes[level - 1].clone();
        let fine = meshes[level].clone();
        let coeffs = CoefficientField::new(100.0, 1.0, 1.0, 1.0).unwrap();
        let (a, dofs) = assemble(&fine, &coeffs).unwrap();
        Setup { coarse, fine, a, dofs }
    }

    #[test]
    fn counts_cube_level_one() {
        let s = setup(Domain::Cube, 1);
        let interior = build_interior_patches(&s.coarse, &s.fine, &s.a, &s.dofs).unwrap();
        assert_eq!(interior.len(), 8);
        let covered: usize = interior.iter().map(|p| p.dofs().len()).sum();
        assert_eq!(covered, 48);
        assert_eq!(s.dofs.len() - covered, 60);
        assert_eq!(build_edge_patches(&s.coarse, &s.fine, &s.a, &s.dofs).unwrap().len(), 6);
        let vertex = build_vertex_patches(&s.coarse, &s.fine, &s.a, &s.dofs).unwrap();
        assert_eq!(vertex.len(), 1);
        // the single vertex patch owns the whole coarse skeleton
        let mut all: Vec<u32> = vertex[0].skeleton().to_vec();
        all.extend(interior.iter().flat_map(|p| p.dofs().iter().copied()));
        all.sort();
        all.dedup();
        assert_eq!(all.len(), s.dofs.len());
    }

    #[test]
    fn counts_fichera_level_one() {
        let s = setup(Domain::Fichera, 1);
        assert_eq!(build_interior_patches(&s.coarse, &s.fine, &s.a, &s.dofs).unwrap().len(), 7);
        assert_eq!(build_edge_patches(&s.coarse, &s.fine, &s.a, &s.dofs).unwrap().len(), 3);
        assert!(build_vertex_patches(&s.coarse, &s.fine, &s.a, &s.dofs).unwrap().is_empty());
    }

    #[test]
    fn interior_block_is_principal_submatrix() {
        let s = setup(Domain::Cube, 1);
        let patches = build_interior_patches(&s.coarse, &s.fine, &s.a, &s.dofs).unwrap();
        for p in &patches {
            let block = s.a.dense_block(p.dofs(), p.dofs());
            assert_eq!(p.factor().reconstruct().max_abs_diff(&block) <= 1e-14 * block.max_abs(), true);
            for &d in p.dofs() {
                let key = s.dofs.key(d as usize);
                assert!(!s.fine.is_boundary(&key));
                // strictly inside the coarse cell: odd coordinates across the edge
                let axis = key.kind.axis().unwrap().index();
                assert!((0..3).filter(|&c| c != axis).all(|c| key.coords[c] % 2 == 1));
            }
        }
    }

    #[test]
    fn schur_matches_galerkin_matrix_of_basis() {
        let s = setup(Domain::Cube, 2);
        let n = s.dofs.len();
        for p in build_edge_patches(&s.coarse, &s.fine, &s.a, &s.dofs).unwrap().iter().take(5) {
            let (_, schur) = harmonic_extension(&s.a, p.skeleton(), p.interior()).unwrap();
            assert!(schur.asymmetry() <= 1e-12 * schur.max_abs());
            let basis: Vec<Vec<f64>> = (0..p.skeleton().len()).map(|i| p.basis_vector(i, n)).collect();
            let ab: Vec<Vec<f64>> = basis.iter().map(|b| s.a.matvec(b)).collect();
            for i in 0..basis.len() {
                for j in 0..basis.len() {
                    let g = dot(&basis[i], &ab[j]);
                    assert!((g - schur[(i, j)]).abs() <= 1e-10 * schur.max_abs());
                }
            }
        }
    }

    #[test]
    fn corrections_invert_on_own_subspace() {
        let s = setup(Domain::Cube, 2);
        let n = s.dofs.len();
        let vertex = build_vertex_patches(&s.coarse, &s.fine, &s.a, &s.dofs).unwrap();
        let edge = build_edge_patches(&s.coarse, &s.fine, &s.a, &s.dofs).unwrap();
        for p in vertex.iter().take(2).chain(edge.iter().take(2)) {
            for i in [0, 7, p.skeleton().len() - 1] {
                let phi = p.basis_vector(i, n);
                let c = p.patch_correct(&s.a.matvec(&phi));
                let scale = phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                for (x, y) in c.iter().zip(&phi) {
                    assert!((x - y).abs() <= 1e-10 * scale);
                }
            }
        }
    }

    #[test]
    fn correction_of_unrelated_residual_is_zero() {
        let s = setup(Domain::Cube, 2);
        let n = s.dofs.len();
        let edge = build_edge_patches(&s.coarse, &s.fine, &s.a, &s.dofs).unwrap();
        let p = &edge[0];
        let mut r = vec![1.0; n];
        for &i in p.support() {
            r[i as usize] = 0.0;
        }
        assert!(p.patch_correct(&r).iter().all(|&v| v == 0.0));
        assert!(p.patch_correct(&vec![0.0; n]).iter().all(|&v| v == 0.0));
    }
}
