//! Coarse-to-fine injection between nested Nédélec spaces.
//!
//! A coarse basis function along axis `d` is `psi(s_p) psi(s_q) e_d` around
//! its edge, with `psi` the 1D hat in coarse units. Its average tangential
//! component on a parallel fine edge at transverse offsets `(t_p, t_q)`
//! (fine units, `|t| <= 1`) is `(1 - |t_p|/2)(1 - |t_q|/2)`, so the weights
//! are exactly 1, 1/2 or 1/4. Fine edges of other directions see no
//! tangential component.

use crate::assembly::DofMap;
use crate::error::{MgError, Result};
use crate::linalg::CsrMatrix;
use crate::mesh::EntityKey;
use crate::scalar::Scalar;

/// Prolongation `P: W_{k-1} -> W_k` with restriction `P^T`.
#[derive(Clone, Debug)]
pub struct TransferOperator<T> {
    coarse_level: usize,
    prolongation: CsrMatrix<T>,
    restriction: CsrMatrix<T>,
}

impl<T: Scalar> TransferOperator<T> {
    pub fn build(coarse: &DofMap, fine: &DofMap) -> Result<Self> {
        if fine.level() != coarse.level() + 1 {
            return Err(MgError::NotNested { fine: fine.level(), coarse: coarse.level() });
        }
        let half = T::lit(0.5);
        let weight = |t: i64| if t == 0 { T::one() } else { half };
        let mut triplets = Vec::with_capacity(coarse.len() * 18);
        for (j, key) in coarse.keys().iter().enumerate() {
            let d = key.kind.axis().expect("coarse DOF is an edge");
            let (p, q) = d.transverse();
            let base = key.coords.map(|c| 2 * c);
            for along in 0..2 {
                for tp in -1..=1 {
                    for tq in -1..=1 {
                        let mut c = base;
                        c[d.index()] += along;
                        c[p.index()] += tp;
                        c[q.index()] += tq;
                        if let Some(i) = fine.index_of(&EntityKey::edge(d, c)) {
                            triplets.push((i as u32, j as u32, weight(tp) * weight(tq)));
                        }
                    }
                }
            }
        }
        let prolongation = CsrMatrix::from_triplets(fine.len(), coarse.len(), triplets);
        let restriction = prolongation.transpose();
        Ok(TransferOperator { coarse_level: coarse.level(), prolongation, restriction })
    }

    pub fn coarse_level(&self) -> usize {
        self.coarse_level
    }

    pub fn fine_dim(&self) -> usize {
        self.prolongation.nrows()
    }

    pub fn coarse_dim(&self) -> usize {
        self.prolongation.ncols()
    }

    pub fn matrix(&self) -> &CsrMatrix<T> {
        &self.prolongation
    }

    /// `P x`.
    pub fn prolongate(&self, x_coarse: &[T]) -> Vec<T> {
        self.prolongation.matvec(x_coarse)
    }

    /// `P^T r`.
    pub fn restrict(&self, r_fine: &[T]) -> Vec<T> {
        self.restriction.matvec(r_fine)
    }

    /// `P^T A P`.
    pub fn galerkin_product(&self, a_fine: &CsrMatrix<T>) -> CsrMatrix<T> {
        self.restriction.matmul(&a_fine.matmul(&self.prolongation))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble, interpolate_constant, CoefficientField};
    use crate::linalg::dot;
    use crate::mesh::{Axis, Domain, LatticeMesh};

    fn pair(domain: Domain) -> (LatticeMesh, LatticeMesh) {
        let c = LatticeMesh::build_initial(domain).refine();
        let f = c.refine();
        (c, f)
    }

    #[test]
    fn shape_function_weights() {
        let (c, f) = pair(Domain::Cube);
        let (cd, fd) = (DofMap::interior(&c), DofMap::interior(&f));
        let t = TransferOperator::<f64>::build(&cd, &fd).unwrap();
        // coarse x-edge at lattice (1, 1, 1), i.e. from (1,1,1) to (2,1,1)
        let j = cd.index_of(&EntityKey::edge(Axis::X, [1, 1, 1])).unwrap();
        let col = |c: [i64; 3]| t.matrix().get(fd.index_of(&EntityKey::edge(Axis::X, c)).unwrap(), j);
        assert_eq!(col([2, 2, 2]), 1.0);
        assert_eq!(col([3, 2, 2]), 1.0);
        assert_eq!(col([2, 3, 2]), 0.5);
        assert_eq!(col([2, 2, 1]), 0.5);
        assert_eq!(col([3, 3, 3]), 0.25);
        assert_eq!(col([2, 1, 1]), 0.25);
        assert_eq!(col([2, 4, 2]), 0.0);
        let nnz = (0..fd.len()).filter(|&i| t.matrix().get(i, j) != 0.0).count();
        assert_eq!(nnz, 18);
    }

    #[test]
    fn columns_only_touch_parallel_edges() {
        let (c, f) = pair(Domain::Fichera);
        let (cd, fd) = (DofMap::interior(&c), DofMap::interior(&f));
        let t = TransferOperator::<f64>::build(&cd, &fd).unwrap();
        for (i, j, w) in t.matrix().triplets() {
            assert_eq!(fd.key(i).kind, cd.key(j).kind);
            assert!(w == 1.0 || w == 0.5 || w == 0.25);
        }
    }

    #[test]
    fn rejects_non_nested_levels() {
        let c = LatticeMesh::build_initial(Domain::Cube);
        let d = DofMap::interior(&c);
        assert!(TransferOperator::<f64>::build(&d, &d).is_err());
    }

    #[test]
    fn restriction_is_transpose() {
        let (c, f) = pair(Domain::Cube);
        let t = TransferOperator::<f64>::build(&DofMap::interior(&c), &DofMap::interior(&f)).unwrap();
        let r: Vec<f64> = (0..t.fine_dim()).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let v: Vec<f64> = (0..t.coarse_dim()).map(|i| ((i * 13) % 7) as f64 - 3.0).collect();
        assert_eq!(dot(&t.restrict(&r), &v), dot(&r, &t.prolongate(&v)));
    }

    #[test]
    fn galerkin_identity_small() {
        let coeffs = CoefficientField::new(0.01, 1.0, 1.0, 1.0).unwrap();
        for domain in [Domain::Cube, Domain::Fichera] {
            let (c, f) = pair(domain);
            let (ac, cd) = assemble::<f64>(&c, &coeffs).unwrap();
            let (af, fd) = assemble::<f64>(&f, &coeffs).unwrap();
            let t = TransferOperator::build(&cd, &fd).unwrap();
            let g = t.galerkin_product(&af);
            assert!(g.max_abs_diff(&ac) <= 1e-10 * ac.max_abs());
        }
    }

    #[test]
    fn constant_field_reproduced_away_from_boundary() {
        let (c, f) = pair(Domain::Cube);
        let (cd, fd) = (DofMap::interior(&c), DofMap::interior(&f));
        let t = TransferOperator::<f64>::build(&cd, &fd).unwrap();
        let coarse = interpolate_constant::<f64>(&cd, [1.0, 0.0, 0.0]);
        let fine = t.prolongate(&coarse);
        let exact = interpolate_constant::<f64>(&fd, [1.0, 0.0, 0.0]);
        // the coarse interpolant drops boundary DOFs, so compare where the
        // whole coarse stencil is interior: fine edges at least 2 fine cells from the boundary
        let n = f.cells_per_side() as i64;
        for (i, k) in fd.keys().iter().enumerate() {
            let far = k.coords.iter().enumerate().all(|(a, &v)| {
                if k.kind.axis().map(|d| d.index()) == Some(a) {
                    true
                } else {
                    (2..=n - 2).contains(&v)
                }
            });
            if far {
                assert_eq!(fine[i], exact[i], "edge {k:?}");
            }
        }
    }
}
