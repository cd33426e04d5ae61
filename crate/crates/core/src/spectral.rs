//! Contraction numbers of the V-cycle.
//!
//! The error propagation operator `E z = z - MGV(k, A z, 0, m)` is
//! self-adjoint and positive semidefinite in the energy inner product, so its
//! spectral radius is the limit of the energy Rayleigh quotient under power
//! iteration. A dense route (explicit `E`, similarity transform with the
//! Cholesky factor of `A`, symmetric eigensolve) serves as the oracle on
//! small levels.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MgError, Result};
use crate::linalg::{dot, DenseMatrix, SparseSym};
use crate::scalar::Scalar;
use crate::vcycle::Hierarchy;

/// Largest level size for which dense operators are formed.
pub const DENSE_LIMIT: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerOptions {
    /// Relative change of the Rayleigh quotient regarded as converged.
    pub tol: f64,
    pub max_iterations: usize,
    pub seed: u64,
    /// Number of consecutive iterations that must meet `tol`.
    pub window: usize,
    #[serde(skip)]
    pub deadline: Option<Instant>,
}

impl Default for PowerOptions {
    fn default() -> Self {
        PowerOptions { tol: 1e-6, max_iterations: 1000, seed: 0, window: 5, deadline: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerResult {
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
    pub timed_out: bool,
    /// Rayleigh quotient after every iteration.
    pub history: Vec<f64>,
}

/// Power iteration for an operator that is self-adjoint in the `a` inner product.
///
/// `op(z, a z)` must return the operator applied to `z`; the second argument
/// lets callers reuse the product with `a`.
pub fn power_iteration<T, F>(a: &SparseSym<T>, mut op: F, options: &PowerOptions) -> PowerResult
where
    T: Scalar,
    F: FnMut(&[T], &[T]) -> Vec<T>,
{
    let n = a.nrows();
    let mut result = PowerResult { rho: 0.0, iterations: 0, converged: true, timed_out: false, history: Vec::new() };
    if n == 0 {
        return result;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut z: Vec<T> = (0..n).map(|_| T::lit(rng.random_range(-1.0..1.0))).collect();
    let mut az = a.matvec(&z);
    let norm = dot(&z, &az).sqrt();
    z.iter_mut().for_each(|v| *v /= norm);
    az.iter_mut().for_each(|v| *v /= norm);

    result.converged = false;
    let mut streak = 0;
    let mut previous: Option<f64> = None;
    for it in 1..=options.max_iterations {
        if options.deadline.is_some_and(|d| Instant::now() >= d) {
            result.timed_out = true;
            break;
        }
        let y = op(&z, &az);
        let lambda = dot(&y, &az).as_f64();
        result.history.push(lambda);
        result.rho = lambda;
        result.iterations = it;
        let ay = a.matvec(&y);
        let ny = dot(&y, &ay).max(T::zero()).sqrt();
        if ny == T::zero() {
            result.converged = true;
            break;
        }
        if let Some(prev) = previous {
            let change = (lambda - prev).abs() / lambda.abs().max(f64::MIN_POSITIVE);
            streak = if change < options.tol { streak + 1 } else { 0 };
            if streak >= options.window {
                result.converged = true;
                break;
            }
        }
        previous = Some(lambda);
        z = y;
        az = ay;
        z.iter_mut().for_each(|v| *v /= ny);
        az.iter_mut().for_each(|v| *v /= ny);
    }
    result
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralResult {
    pub level: usize,
    pub steps: usize,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
    pub timed_out: bool,
    pub history: Vec<f64>,
}

/// `E z = z - MGV(k, A z, 0, m)`.
pub fn apply_error_op<T: Scalar>(h: &Hierarchy<T>, k: usize, m: usize, z: &[T]) -> Result<Vec<T>> {
    let g = h.operator(k).matvec(z);
    error_op_with_rhs(h, k, m, z, &g)
}

fn error_op_with_rhs<T: Scalar>(h: &Hierarchy<T>, k: usize, m: usize, z: &[T], az: &[T]) -> Result<Vec<T>> {
    let zero = vec![T::zero(); z.len()];
    let out = h.mgv(k, az, &zero, m)?;
    Ok(z.iter().zip(&out).map(|(a, b)| *a - *b).collect())
}

/// Largest eigenvalue of `E_k^m` by energy-norm power iteration.
pub fn contraction_number<T: Scalar>(
    h: &Hierarchy<T>,
    k: usize,
    m: usize,
    options: &PowerOptions,
) -> Result<SpectralResult> {
    if !(options.tol > 0.0) {
        return Err(MgError::Config(format!("power iteration tolerance must be positive, got {}", options.tol)));
    }
    // validates k and m once; the closure below cannot fail afterwards
    h.mgv(k, &vec![T::zero(); h.dim(k)], &vec![T::zero(); h.dim(k)], m)?;
    let a = h.operator(k);
    let r = power_iteration(a, |z, az| error_op_with_rhs(h, k, m, z, az).expect("validated level"), options);
    Ok(SpectralResult {
        level: k,
        steps: m,
        rho: r.rho,
        iterations: r.iterations,
        converged: r.converged,
        timed_out: r.timed_out,
        history: r.history,
    })
}

/// `E_k^m` as a dense matrix, one column per unit vector.
pub fn dense_error_matrix<T: Scalar>(h: &Hierarchy<T>, k: usize, m: usize) -> Result<DenseMatrix<T>> {
    let n = h.dim(k);
    if n > DENSE_LIMIT {
        return Err(MgError::TooLarge { dofs: n, limit: DENSE_LIMIT });
    }
    let mut e = DenseMatrix::zeros(n, n);
    let mut unit = vec![T::zero(); n];
    for j in 0..n {
        unit[j] = T::one();
        e.set_column(j, &apply_error_op(h, k, m, &unit)?);
        unit[j] = T::zero();
    }
    Ok(e)
}

/// Eigenvalues, in descending order, of an operator that is self-adjoint in
/// the `a` inner product: those of `L^T B L^{-T}` with `a = L L^T`.
pub fn energy_spectrum<T: Scalar>(a: &SparseSym<T>, op: &DenseMatrix<T>) -> Result<Vec<f64>> {
    let n = a.nrows();
    if n > DENSE_LIMIT {
        return Err(MgError::TooLarge { dofs: n, limit: DENSE_LIMIT });
    }
    if op.nrows() != n || op.ncols() != n {
        return Err(MgError::DimensionMismatch { expected: n, got: op.nrows() });
    }
    let a_dense = DMatrix::from_fn(n, n, |i, j| a.get(i, j).as_f64());
    let b = DMatrix::from_fn(n, n, |i, j| op[(i, j)].as_f64());
    let chol = a_dense
        .cholesky()
        .ok_or(MgError::NotSpd { index: 0, pivot: f64::NAN })?;
    let l = chol.l();
    let lt_inv = l
        .transpose()
        .try_inverse()
        .ok_or(MgError::NotSpd { index: 0, pivot: f64::NAN })?;
    let c = l.transpose() * b * lt_inv;
    let sym = (&c + c.transpose()) * 0.5;
    let mut eig: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(|x, y| y.total_cmp(x));
    Ok(eig)
}

/// Dense oracle for the contraction number: `max |lambda(E_k^m)|`.
pub fn dense_contraction_number<T: Scalar>(h: &Hierarchy<T>, k: usize, m: usize) -> Result<f64> {
    let e = dense_error_matrix(h, k, m)?;
    let eig = energy_spectrum(h.operator(k), &e)?;
    Ok(eig.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
}
