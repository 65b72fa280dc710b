//! Parametric discrete-time algebraic Riccati equation
//!
//! `AᵀPA − P − AᵀPB(I + BᵀPB)⁻¹BᵀPA = −γP`.
//!
//! Dividing by `1 − γ` turns it into the standard Riccati equation (with zero
//! state weight) of the scaled pair `(A/√(1−γ), B)`. The solver iterates the
//! Riccati map of that scaled pair from `P₀ = I`, symmetrising every iterate,
//! and finishes with Newton (Hewer) steps once the iteration is close.

use crate::error::{Error, Result};
use crate::matcore::{kron, Matrix};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DareOptions {
    /// Bound on the Frobenius norm of the equation residual.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DareOptions {
    fn default() -> Self {
        DareOptions {
            tol: 1e-12,
            max_iter: 100_000,
        }
    }
}

/// `‖AᵀPA − P − AᵀPB R⁻¹BᵀPA + γP‖_F` with `R = I + BᵀPB`.
pub fn dare_residual(a: &Matrix, b: &Matrix, gamma: f64, p: &Matrix) -> Result<f64> {
    let at = a.transpose();
    let bt = b.transpose();
    let r = &Matrix::identity(b.cols()) + &(&(&bt * p) * b);
    let pa = p * a;
    let correction = &(&at * &(p * b)) * &r.solve(&(&bt * &pa))?;
    let res = &(&(&(&at * &pa) - p) - &correction) + &p.scale(gamma);
    Ok(res.frobenius_norm())
}

pub fn solve_parametric_dare(a: &Matrix, b: &Matrix, gamma: f64, opts: DareOptions) -> Result<Matrix> {
    if !a.is_square() || b.rows() != a.rows() {
        return Err(Error::dim(
            "parametric DARE",
            format!("square A and B with {} rows", a.rows()),
            format!("A {:?}, B {:?}", a.shape(), b.shape()),
        ));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::numerical("parametric DARE", format!("gamma must lie in (0, 1), got {gamma}")));
    }
    let n = a.rows();
    let scaled = a.scale(1.0 / (1.0 - gamma).sqrt());
    let map = RiccatiMap::new(&scaled, b);

    let mut p = Matrix::identity(n);
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let next = map.apply(&p)?;
        if !next.all_finite() {
            return Err(Error::numerical("parametric DARE", "iterate became non-finite"));
        }
        // residual(P_k) = (1 − γ)(Φ(P_k) − P_k)
        residual = (&next - &p).frobenius_norm() * (1.0 - gamma);
        if residual <= NEWTON_SWITCH.max(opts.tol) {
            if let Some(polished) = newton_polish(&map, &p, gamma, opts.tol)? {
                check_positive_definite(&polished)?;
                return Ok(polished);
            }
        }
        if residual <= opts.tol {
            check_positive_definite(&p)?;
            return Ok(p);
        }
        p = next;
    }
    Err(Error::numerical(
        "parametric DARE",
        format!("no convergence in {} iterations (last residual {residual:.3e})", opts.max_iter),
    ))
}

/// Fixed-point residual below which Newton refinement is attempted.
const NEWTON_SWITCH: f64 = 1e-6;
const NEWTON_STEPS: usize = 30;

/// Riccati map `Φ(P) = ÃᵀPÃ − ÃᵀPB(I + BᵀPB)⁻¹BᵀPÃ` of the scaled pair.
struct RiccatiMap<'a> {
    a: &'a Matrix,
    at: Matrix,
    b: &'a Matrix,
    bt: Matrix,
    eye_m: Matrix,
}

impl<'a> RiccatiMap<'a> {
    fn new(a: &'a Matrix, b: &'a Matrix) -> Self {
        RiccatiMap {
            a,
            at: a.transpose(),
            b,
            bt: b.transpose(),
            eye_m: Matrix::identity(b.cols()),
        }
    }

    /// Feedback `K = (I + BᵀPB)⁻¹BᵀPÃ`.
    fn gain(&self, p: &Matrix) -> Result<Matrix> {
        let r = &self.eye_m + &(&(&self.bt * p) * self.b);
        r.solve(&(&(&self.bt * p) * self.a))
    }

    fn apply(&self, p: &Matrix) -> Result<Matrix> {
        let ps = p * self.a;
        let gain = self.gain(p)?;
        Ok((&(&self.at * &ps) - &(&(&self.at * &(p * self.b)) * &gain)).symmetrized())
    }
}

/// Hewer iterations `P = A_kᵀ P A_k + K_kᵀK_k`, `A_k = Ã − BK_k`, started
/// from `p0`. Returns the best iterate if it meets `tol`.
fn newton_polish(map: &RiccatiMap<'_>, p0: &Matrix, gamma: f64, tol: f64) -> Result<Option<Matrix>> {
    let n = p0.rows();
    let fp_residual = |p: &Matrix| -> Result<f64> { Ok((&map.apply(p)? - p).frobenius_norm() * (1.0 - gamma)) };
    let mut best = p0.clone();
    let mut best_res = fp_residual(p0)?;
    let mut p = p0.clone();
    for _ in 0..NEWTON_STEPS {
        let k = map.gain(&p)?;
        let closed = map.a - &(map.b * &k);
        let ct = closed.transpose();
        // vec(P) = (I − A_kᵀ ⊗ A_kᵀ)⁻¹ vec(K_kᵀK_k)
        let lhs = &Matrix::identity(n * n) - &kron(&ct, &ct);
        let rhs = Matrix::column(&(&k.transpose() * &k).vec())?;
        let sol = match lhs.solve(&rhs) {
            Ok(sol) => sol,
            Err(_) => break,
        };
        let next = Matrix::from_dmatrix(nalgebra::DMatrix::from_column_slice(n, n, sol.as_dmatrix().as_slice()))
            .map(|m| m.symmetrized());
        let Ok(next) = next else { break };
        let res = fp_residual(&next)?;
        if res >= best_res {
            break;
        }
        best = next.clone();
        best_res = res;
        p = next;
    }
    Ok((best_res <= tol).then_some(best))
}

/// Rejects `P` whose smallest eigenvalue is not clearly positive relative to
/// its largest.
fn check_positive_definite(p: &Matrix) -> Result<()> {
    const RELATIVE_FLOOR: f64 = 1e-13;
    let eig = nalgebra::SymmetricEigen::new(p.as_dmatrix().clone()).eigenvalues;
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if max > 0.0 && min > RELATIVE_FLOOR * max {
        Ok(())
    } else {
        Err(Error::numerical(
            "parametric DARE",
            format!(
                "solution is not positive definite (eigenvalues in [{min:.3e}, {max:.3e}]; is some eigenvalue of A strictly inside the unit circle?)"
            ),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Matrix {
        Matrix::from_rows(&[vec![v]]).unwrap()
    }

    #[test]
    fn scalar_closed_form() {
        for gamma in [0.5, 0.08, 0.3] {
            let p = solve_parametric_dare(&scalar(1.0), &scalar(1.0), gamma, DareOptions::default()).unwrap();
            assert!((p.get(0, 0) - gamma / (1.0 - gamma)).abs() < 1e-12, "gamma {gamma}");
        }
    }

    #[test]
    fn rejects_gamma_out_of_range() {
        for gamma in [0.0, 1.0, -0.1, 1.5] {
            assert!(solve_parametric_dare(&scalar(1.0), &scalar(1.0), gamma, DareOptions::default()).is_err());
        }
    }

    #[test]
    fn stable_mode_loses_definiteness() {
        let a = Matrix::diag(&[1.0, 0.2]).unwrap();
        let b = Matrix::column(&[1.0, 1.0]).unwrap();
        let err = solve_parametric_dare(&a, &b, 0.1, DareOptions::default()).unwrap_err();
        assert!(err.to_string().contains("positive definite"), "{err}");
    }

    #[test]
    fn iteration_budget_is_reported() {
        let a = Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let b = Matrix::column(&[0.0, 1.0]).unwrap();
        let opts = DareOptions { tol: 1e-14, max_iter: 3 };
        let err = solve_parametric_dare(&a, &b, 0.05, opts).unwrap_err();
        assert!(err.to_string().contains("last residual"), "{err}");
    }

    #[test]
    fn residual_matches_solver_tolerance() {
        let a = Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let b = Matrix::column(&[1.0, 1.0]).unwrap();
        let p = solve_parametric_dare(&a, &b, 0.2, DareOptions::default()).unwrap();
        assert!(dare_residual(&a, &b, 0.2, &p).unwrap() < 1e-11);
        assert!((&p - &p.transpose()).max_abs() == 0.0);
    }
}
