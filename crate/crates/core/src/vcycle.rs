//! Symmetric V-cycle over a nested hierarchy.

use std::sync::Arc;

use log::debug;

use crate::assembly::{assemble, CoefficientField, DofMap};
use crate::error::{MgError, Result};
use crate::linalg::{a_norm, axpy, norm2, CholeskyFactor, SparseSym};
use crate::mesh::{Domain, LatticeMesh};
use crate::scalar::Scalar;
use crate::smoother::{SchwarzSmoother, SmootherConfig};
use crate::transfer::TransferOperator;

/// Relative tolerance of the Galerkin check run while building a hierarchy.
pub const GALERKIN_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VCycleConfig {
    pub smoother: SmootherConfig,
    /// Pre- and post-smoothing steps `m`.
    pub steps: usize,
    /// Finest level `L`.
    pub levels: usize,
}

/// One level of the hierarchy.
#[derive(Debug)]
pub struct Level<T> {
    pub mesh: Arc<LatticeMesh>,
    pub dofs: DofMap,
    pub operator: SparseSym<T>,
    /// Absent on level 0, which is solved directly.
    pub smoother: Option<SchwarzSmoother<T>>,
}

#[derive(Debug)]
pub struct Hierarchy<T> {
    levels: Vec<Level<T>>,
    /// `transfers[k - 1]` maps level `k - 1` to level `k`.
    transfers: Vec<TransferOperator<T>>,
    coarse_factor: CholeskyFactor<T>,
    coefficients: CoefficientField,
    smoother: SmootherConfig,
}

impl<T: Scalar> Hierarchy<T> {
    pub fn build(domain: Domain, coefficients: &CoefficientField, config: &VCycleConfig) -> Result<Self> {
        let meshes: Vec<Arc<LatticeMesh>> =
            LatticeMesh::hierarchy(domain, config.levels).into_iter().map(Arc::new).collect();
        Self::from_meshes(&meshes, coefficients, config.smoother)
    }

    /// Builds operators, transfers and smoothers on already refined meshes `T_0..T_L`.
    pub fn from_meshes(
        meshes: &[Arc<LatticeMesh>],
        coefficients: &CoefficientField,
        smoother: SmootherConfig,
    ) -> Result<Self> {
        if meshes.is_empty() {
            return Err(MgError::Config("hierarchy needs at least one level".into()));
        }
        for (k, m) in meshes.iter().enumerate() {
            if m.level() != k {
                return Err(MgError::NotNested { fine: m.level(), coarse: k });
            }
        }
        let mut levels: Vec<Level<T>> = Vec::with_capacity(meshes.len());
        let mut transfers = Vec::with_capacity(meshes.len().saturating_sub(1));
        for (k, mesh) in meshes.iter().enumerate() {
            let (operator, dofs) = assemble::<T>(mesh, coefficients)?;
            let smoother_k = if k == 0 {
                None
            } else {
                Some(SchwarzSmoother::build(smoother, &meshes[k - 1], mesh, &operator, &dofs)?)
            };
            if k > 0 {
                let coarse = &levels[k - 1];
                let t = TransferOperator::build(&coarse.dofs, &dofs)?;
                let deviation = t.galerkin_product(&operator).max_abs_diff(&coarse.operator);
                let scale = coarse.operator.max_abs();
                if deviation > T::lit(GALERKIN_TOLERANCE).max(T::epsilon() * T::lit(64.0)) * scale {
                    return Err(MgError::MeshConsistency(format!(
                        "Galerkin identity violated between levels {} and {k}: {:e}",
                        k - 1,
                        deviation.as_f64()
                    )));
                }
                transfers.push(t);
            }
            debug!("level {k}: {} unknowns, {} nonzeros", dofs.len(), operator.nnz());
            levels.push(Level { mesh: Arc::clone(mesh), dofs, operator, smoother: smoother_k });
        }
        let coarse_factor = CholeskyFactor::factor(&levels[0].operator.to_dense())?;
        Ok(Hierarchy { levels, transfers, coarse_factor, coefficients: *coefficients, smoother })
    }

    pub fn finest(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, k: usize) -> &Level<T> {
        &self.levels[k]
    }

    pub fn levels(&self) -> &[Level<T>] {
        &self.levels
    }

    pub fn transfer(&self, coarse_level: usize) -> &TransferOperator<T> {
        &self.transfers[coarse_level]
    }

    pub fn operator(&self, k: usize) -> &SparseSym<T> {
        &self.levels[k].operator
    }

    pub fn dim(&self, k: usize) -> usize {
        self.levels[k].dofs.len()
    }

    pub fn coefficients(&self) -> &CoefficientField {
        &self.coefficients
    }

    pub fn smoother_config(&self) -> &SmootherConfig {
        &self.smoother
    }

    fn check_level(&self, k: usize) -> Result<()> {
        if k > self.finest() {
            return Err(MgError::LevelOutOfRange { requested: k, finest: self.finest() });
        }
        Ok(())
    }

    fn check_dim(&self, k: usize, v: &[T]) -> Result<()> {
        if v.len() != self.dim(k) {
            return Err(MgError::DimensionMismatch { expected: self.dim(k), got: v.len() });
        }
        Ok(())
    }

    /// `MGV(k, g, z0, m)`.
    pub fn mgv(&self, k: usize, g: &[T], z0: &[T], m: usize) -> Result<Vec<T>> {
        self.check_level(k)?;
        self.check_dim(k, g)?;
        self.check_dim(k, z0)?;
        if k > 0 && m == 0 {
            return Err(MgError::Config("at least one smoothing step is required".into()));
        }
        let mut z = z0.to_vec();
        self.cycle(k, g, &mut z, m);
        Ok(z)
    }

    /// One cycle on level `k`, updating `z` in place.
    fn cycle(&self, k: usize, g: &[T], z: &mut [T], m: usize) {
        if k == 0 {
            z.copy_from_slice(g);
            self.coarse_factor.solve_in_place(z);
            return;
        }
        let level = &self.levels[k];
        let mut r = vec![T::zero(); g.len()];
        for _ in 0..m {
            self.smooth(level, g, z, &mut r);
        }
        self.residual(level, g, z, &mut r);
        let t = &self.transfers[k - 1];
        let g_coarse = t.restrict(&r);
        let mut c = vec![T::zero(); g_coarse.len()];
        self.cycle(k - 1, &g_coarse, &mut c, m);
        axpy(T::one(), &t.prolongate(&c), z);
        for _ in 0..m {
            self.smooth(level, g, z, &mut r);
        }
    }

    fn residual(&self, level: &Level<T>, g: &[T], z: &[T], r: &mut [T]) {
        level.operator.matvec_into(z, r);
        for (ri, gi) in r.iter_mut().zip(g) {
            *ri = *gi - *ri;
        }
    }

    /// `z <- z + M^{-1}(g - A z)`.
    fn smooth(&self, level: &Level<T>, g: &[T], z: &mut [T], r: &mut [T]) {
        self.residual(level, g, z, r);
        level.smoother.as_ref().expect("smoother on levels >= 1").apply_add(T::one(), r, z);
    }

    /// Applies V-cycles with `m` smoothing steps until `|f - A z| <= tol |f|`.
    pub fn solve(&self, f: &[T], m: usize, tol: f64, max_cycles: usize) -> Result<SolveOutcome<T>> {
        let k = self.finest();
        self.check_dim(k, f)?;
        let f_norm = norm2(f);
        let mut z = vec![T::zero(); f.len()];
        let mut history = vec![f_norm.as_f64()];
        if f_norm == T::zero() {
            return Ok(SolveOutcome { solution: z, cycles: 0, converged: true, residual_history: history });
        }
        let mut r = vec![T::zero(); f.len()];
        for cycle in 1..=max_cycles {
            self.cycle(k, f, &mut z, m);
            self.residual(&self.levels[k], f, &z, &mut r);
            let rn = norm2(&r);
            history.push(rn.as_f64());
            if rn <= T::lit(tol) * f_norm {
                return Ok(SolveOutcome { solution: z, cycles: cycle, converged: true, residual_history: history });
            }
        }
        debug!("no convergence after {max_cycles} cycles, |r| = {:e}", history.last().copied().unwrap_or(0.0));
        Ok(SolveOutcome { solution: z, cycles: max_cycles, converged: false, residual_history: history })
    }

    /// Energy norm on level `k`.
    pub fn energy_norm(&self, k: usize, x: &[T]) -> T {
        a_norm(self.operator(k), x)
    }
}

#[derive(Clone, Debug)]
pub struct SolveOutcome<T> {
    pub solution: Vec<T>,
    pub cycles: usize,
    pub converged: bool,
    /// Euclidean residual norms, starting with `|f|`.
    pub residual_history: Vec<f64>,
}
