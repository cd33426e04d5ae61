//! Damped additive Schwarz smoothers over the nonoverlapping subspaces.

use std::fmt;
use std::str::FromStr;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::DofMap;
use crate::error::{MgError, Result};
use crate::linalg::SparseSym;
use crate::mesh::LatticeMesh;
use crate::patches::{
    build_edge_patches, build_interior_patches, build_vertex_patches, HarmonicPatch, InteriorPatch, PatchKind,
    SubspaceCorrection,
};
use crate::scalar::Scalar;
use crate::spectral::{power_iteration, PowerOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmootherKind {
    /// Interior spaces plus coarse-edge spaces.
    Edge,
    /// Interior spaces plus coarse-vertex spaces.
    Vertex,
}

impl SmootherKind {
    /// Largest damping for which `rho(M^{-1} A) <= 1` is guaranteed.
    pub fn admissible_damping(self) -> f64 {
        match self {
            SmootherKind::Edge => 1.0 / 12.0,
            SmootherKind::Vertex => 1.0 / 8.0,
        }
    }

    /// Damping used when none is given, calibrated on the level-one cube.
    /// The edge value lies above the admissible bound; the cycle still
    /// contracts because `rho(M^{-1} A) < 2`.
    pub fn default_damping(self) -> f64 {
        match self {
            SmootherKind::Edge => 1.0 / 7.0,
            SmootherKind::Vertex => 1.0 / 9.0,
        }
    }

    fn skeleton_kind(self) -> PatchKind {
        match self {
            SmootherKind::Edge => PatchKind::Edge,
            SmootherKind::Vertex => PatchKind::Vertex,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SmootherKind::Edge => "edge",
            SmootherKind::Vertex => "vertex",
        }
    }
}

impl fmt::Display for SmootherKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SmootherKind {
    type Err = MgError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "edge" => Ok(SmootherKind::Edge),
            "vertex" => Ok(SmootherKind::Vertex),
            other => Err(MgError::Config(format!("unknown smoother '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmootherConfig {
    pub variant: SmootherKind,
    pub eta: f64,
}

impl SmootherConfig {
    pub fn new(variant: SmootherKind, eta: f64) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(MgError::Config(format!("damping factor must be positive, got {eta}")));
        }
        if eta > variant.admissible_damping() {
            warn!(
                "damping {eta} exceeds the admissible bound {} of the {variant} smoother",
                variant.admissible_damping()
            );
        }
        Ok(SmootherConfig { variant, eta })
    }

    pub fn with_default_damping(variant: SmootherKind) -> Self {
        SmootherConfig { variant, eta: variant.default_damping() }
    }

    /// Damping at the admissible bound.
    pub fn at_admissible_bound(variant: SmootherKind) -> Self {
        SmootherConfig { variant, eta: variant.admissible_damping() }
    }
}

/// `M^{-1} = eta (sum_T J_T A_T^{-1} J_T^t + sum_S J_S A_S^{-1} J_S^t)`.
#[derive(Clone, Debug)]
pub struct SchwarzSmoother<T> {
    config: SmootherConfig,
    dim: usize,
    interior: Vec<InteriorPatch<T>>,
    skeleton: Vec<HarmonicPatch<T>>,
    /// Start of each patch's block in the flat correction buffer.
    offsets: Vec<usize>,
}

impl<T: Scalar> SchwarzSmoother<T> {
    pub fn new(
        config: SmootherConfig,
        dim: usize,
        interior: Vec<InteriorPatch<T>>,
        skeleton: Vec<HarmonicPatch<T>>,
    ) -> Result<Self> {
        let expected = config.variant.skeleton_kind();
        if let Some(p) = skeleton.iter().find(|p| p.kind != expected) {
            return Err(MgError::Config(format!(
                "{:?} patch at {:?} given to the {} smoother",
                p.kind, p.entity, config.variant
            )));
        }
        let mut offsets = Vec::with_capacity(interior.len() + skeleton.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for len in interior.iter().map(|p| p.support().len()).chain(skeleton.iter().map(|p| p.support().len())) {
            acc += len;
            offsets.push(acc);
        }
        Ok(SchwarzSmoother { config, dim, interior, skeleton, offsets })
    }

    /// Builds all patches of the variant for fine level `k` over coarse level `k - 1`.
    pub fn build(
        config: SmootherConfig,
        coarse: &LatticeMesh,
        fine: &LatticeMesh,
        a: &SparseSym<T>,
        dofs: &DofMap,
    ) -> Result<Self> {
        let interior = build_interior_patches(coarse, fine, a, dofs)?;
        let skeleton = match config.variant {
            SmootherKind::Edge => build_edge_patches(coarse, fine, a, dofs)?,
            SmootherKind::Vertex => build_vertex_patches(coarse, fine, a, dofs)?,
        };
        Self::new(config, dofs.len(), interior, skeleton)
    }

    pub fn config(&self) -> &SmootherConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn interior_patches(&self) -> &[InteriorPatch<T>] {
        &self.interior
    }

    pub fn skeleton_patches(&self) -> &[HarmonicPatch<T>] {
        &self.skeleton
    }

    fn patch(&self, i: usize) -> &dyn SubspaceCorrection<T> {
        if i < self.interior.len() {
            &self.interior[i]
        } else {
            &self.skeleton[i - self.interior.len()]
        }
    }

    /// `M^{-1} r`.
    pub fn apply(&self, r: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        self.apply_add(T::one(), r, &mut out);
        out
    }

    /// `out += scale * M^{-1} r`. Local solves run in parallel; the scatter is
    /// sequential in patch order so results do not depend on scheduling.
    pub fn apply_add(&self, scale: T, r: &[T], out: &mut [T]) {
        assert_eq!(r.len(), self.dim, "smoother: residual dimension mismatch");
        assert_eq!(out.len(), self.dim, "smoother: output dimension mismatch");
        let npatch = self.offsets.len() - 1;
        let mut buffer = vec![T::zero(); *self.offsets.last().unwrap_or(&0)];
        let mut blocks: Vec<&mut [T]> = Vec::with_capacity(npatch);
        let mut rest = buffer.as_mut_slice();
        for w in self.offsets.windows(2) {
            let (head, tail) = rest.split_at_mut(w[1] - w[0]);
            blocks.push(head);
            rest = tail;
        }
        blocks.par_iter_mut().with_min_len(64).enumerate().for_each(|(i, block)| {
            let patch = self.patch(i);
            for (v, &g) in block.iter_mut().zip(patch.support()) {
                *v = r[g as usize];
            }
            patch.solve_local(block);
        });
        let s = scale * T::lit(self.config.eta);
        for (i, block) in blocks.iter().enumerate() {
            for (&g, &v) in self.patch(i).support().iter().zip(block.iter()) {
                out[g as usize] += s * v;
            }
        }
    }

    /// Power-iteration estimate of `rho(M^{-1} A)` in the energy inner product.
    pub fn check_spectral_condition(&self, a: &SparseSym<T>, options: &PowerOptions) -> f64 {
        power_iteration(a, |_, ax| self.apply(ax), options).rho
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble, CoefficientField};
    use crate::linalg::{a_inner, dot};
    use crate::mesh::Domain;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn build(domain: Domain, level: usize, variant: SmootherKind, eta: f64) -> (SparseSym<f64>, SchwarzSmoother<f64>) {
        let meshes = LatticeMesh::hierarchy(domain, level);
        let coeffs = CoefficientField::new(0.1, 1.0, 1.0, 1.0).unwrap();
        let (a, dofs) = assemble(&meshes[level], &coeffs).unwrap();
        let cfg = SmootherConfig::new(variant, eta).unwrap();
        let s = SchwarzSmoother::build(cfg, &meshes[level - 1], &meshes[level], &a, &dofs).unwrap();
        (a, s)
    }

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn zero_and_linearity() {
        let (a, s) = build(Domain::Cube, 2, SmootherKind::Edge, 1.0 / 12.0);
        let n = a.nrows();
        assert!(s.apply(&vec![0.0; n]).iter().all(|&v| v == 0.0));
        let (r1, r2) = (random(n, 1), random(n, 2));
        let sum: Vec<f64> = r1.iter().zip(&r2).map(|(a, b)| a + b).collect();
        let (m1, m2, m12) = (s.apply(&r1), s.apply(&r2), s.apply(&sum));
        for i in 0..n {
            assert!((m1[i] + m2[i] - m12[i]).abs() <= 1e-12 * (1.0 + m12[i].abs()));
        }
    }

    #[test]
    fn smoother_is_symmetric() {
        for variant in [SmootherKind::Edge, SmootherKind::Vertex] {
            let (a, s) = build(Domain::Fichera, 2, variant, 0.1);
            let n = a.nrows();
            let (r, t) = (random(n, 3), random(n, 4));
            let lhs = dot(&s.apply(&r), &t);
            let rhs = dot(&s.apply(&t), &r);
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn preconditioned_operator_is_energy_self_adjoint_and_psd() {
        let (a, s) = build(Domain::Cube, 2, SmootherKind::Vertex, 1.0 / 8.0);
        let n = a.nrows();
        let op = |x: &[f64]| s.apply(&a.matvec(x));
        let (x, y) = (random(n, 5), random(n, 6));
        let lhs = a_inner(&a, &op(&x), &y);
        let rhs = a_inner(&a, &x, &op(&y));
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
        assert!(a_inner(&a, &op(&x), &x) >= -1e-12);
    }

    #[test]
    fn spectral_radius_scales_with_damping() {
        let opts = PowerOptions { tol: 1e-12, max_iterations: 2000, ..PowerOptions::default() };
        let (a, s1) = build(Domain::Cube, 1, SmootherKind::Edge, 1.0 / 12.0);
        let (_, s2) = build(Domain::Cube, 1, SmootherKind::Edge, 1.0 / 24.0);
        let r1 = s1.check_spectral_condition(&a, &opts);
        let r2 = s2.check_spectral_condition(&a, &opts);
        assert!(r1 <= 1.0 + 1e-8);
        assert!((r1 - 2.0 * r2).abs() <= 1e-8);
    }

    #[test]
    fn vertex_smoother_on_cube_level_one_is_scaled_identity() {
        // one vertex space plus the eight interiors span the whole space orthogonally
        let opts = PowerOptions { tol: 1e-12, ..PowerOptions::default() };
        let (a, s) = build(Domain::Cube, 1, SmootherKind::Vertex, 1.0 / 8.0);
        let x = random(a.nrows(), 9);
        let y = s.apply(&a.matvec(&x));
        for (u, v) in x.iter().zip(&y) {
            assert!((u / 8.0 - v).abs() < 1e-12);
        }
        assert!((s.check_spectral_condition(&a, &opts) - 0.125).abs() < 1e-12);
    }

    #[test]
    fn rejects_mismatched_patches() {
        let meshes = LatticeMesh::hierarchy(Domain::Cube, 1);
        let coeffs = CoefficientField::uniform(1.0, 1.0).unwrap();
        let (a, dofs) = assemble::<f64>(&meshes[1], &coeffs).unwrap();
        let edges = build_edge_patches(&meshes[0], &meshes[1], &a, &dofs).unwrap();
        let cfg = SmootherConfig::new(SmootherKind::Vertex, 0.125).unwrap();
        assert!(matches!(SchwarzSmoother::new(cfg, dofs.len(), vec![], edges), Err(MgError::Config(_))));
        assert!(SmootherConfig::new(SmootherKind::Edge, 0.0).is_err());
    }
}
