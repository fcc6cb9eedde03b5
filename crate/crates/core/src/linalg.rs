//! Power-constrained shifted solves `(A + mu I)^{-1} c` for Hermitian
//! positive semidefinite `A`, with the multiplier found by bisection.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

/// Eigenvalues below this fraction of the largest one are treated as zero.
pub const NULL_EIGENVALUE_REL: f64 = 1e-13;

/// Bisection stops once the budget is met to this relative accuracy.
pub const BISECTION_REL_TOL: f64 = 1e-12;

pub const MAX_HALVINGS: usize = 200;

/// `A = Q diag(lambda) Q^H` together with the projected right-hand sides
/// `Q^H c_k`, so that `|(A + mu I)^{-1} c_k|^2` is a scalar sum.
///
/// Right-hand sides are expected to lie in the range of `A`. Their
/// components along numerically null eigendirections are rounding noise
/// and are dropped, so `mu = 0` gives the pseudo-inverse solution.
#[derive(Debug, Clone)]
pub struct HermitianSystem {
    eigvals: Vec<f64>,
    eigvecs: DMatrix<Complex64>,
    projections: Vec<DVector<Complex64>>,
    /// `sum_k |z_{k,i}|^2` per eigendirection.
    weights: Vec<f64>,
}

impl HermitianSystem {
    pub fn new(a: DMatrix<Complex64>, rhs: &[DVector<Complex64>]) -> Self {
        let eig = SymmetricEigen::new(a);
        let top = eig.eigenvalues.iter().fold(0.0f64, |m, &l| m.max(l));
        let floor = NULL_EIGENVALUE_REL * top;
        let eigvals: Vec<f64> = eig
            .eigenvalues
            .iter()
            .map(|&l| if l > floor { l } else { 0.0 })
            .collect();
        let eigvecs = eig.eigenvectors;
        let adjoint = eigvecs.adjoint();
        let projections: Vec<DVector<Complex64>> = rhs
            .iter()
            .map(|c| {
                let mut z = &adjoint * c;
                for (zi, &l) in z.iter_mut().zip(&eigvals) {
                    if l == 0.0 {
                        *zi = Complex64::new(0.0, 0.0);
                    }
                }
                z
            })
            .collect();
        let mut weights = vec![0.0; eigvals.len()];
        for z in &projections {
            for (w, zi) in weights.iter_mut().zip(z.iter()) {
                *w += zi.norm_sqr();
            }
        }
        HermitianSystem {
            eigvals,
            eigvecs,
            projections,
            weights,
        }
    }

    /// `sum_k |(A + mu I)^{-1} c_k|^2`.
    pub fn power(&self, mu: f64) -> f64 {
        self.eigvals
            .iter()
            .zip(&self.weights)
            .map(|(&l, &w)| if w == 0.0 { 0.0 } else { w / (l + mu).powi(2) })
            .sum()
    }

    /// `(A + mu I)^{-1} c_k` for every right-hand side.
    pub fn solve(&self, mu: f64) -> Vec<DVector<Complex64>> {
        self.projections
            .iter()
            .map(|z| {
                let scaled = DVector::from_iterator(
                    z.len(),
                    z.iter().zip(&self.eigvals).map(|(zi, &l)| {
                        let denom = l + mu;
                        if denom > 0.0 {
                            zi / denom
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    }),
                );
                &self.eigvecs * scaled
            })
            .collect()
    }
}

/// Smallest `mu >= 0` such that the systems' combined power meets `budget`:
/// zero when the unconstrained solution is feasible, otherwise found by
/// bisection with the upper bracket doubled from 1.
pub fn bisect_multiplier(systems: &[&HermitianSystem], budget: f64) -> f64 {
    let power = |mu: f64| systems.iter().map(|s| s.power(mu)).sum::<f64>();
    if power(0.0) <= budget {
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while power(hi) > budget {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return f64::MAX;
        }
    }
    for _ in 0..MAX_HALVINGS {
        if budget - power(hi) <= BISECTION_REL_TOL * budget {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if power(mid) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}
