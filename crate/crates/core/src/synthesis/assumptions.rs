use std::fmt;

use crate::error::Result;
use crate::graph::Digraph;
use crate::imodel::Exosystem;
use crate::matcore::{complex_rank, eigenvalues, Matrix, RANK_TOL};

use super::NominalPlant;

/// Modulus tolerance for "on the unit circle" and "not outside it".
pub const UNIT_CIRCLE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionCheck {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionReport {
    pub checks: [AssumptionCheck; 6],
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn get(&self, id: u8) -> &AssumptionCheck {
        &self.checks[usize::from(id) - 1]
    }
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "Assumption {} ({}): {} - {}",
                c.id,
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.detail
            )?;
        }
        Ok(())
    }
}

/// `(re, im)` parts of `M - λI` for complex `λ`.
fn shifted(m: &Matrix, lambda: (f64, f64)) -> (Matrix, Matrix) {
    let n = m.rows();
    let re = m - &Matrix::identity(n).scale(lambda.0);
    let im = Matrix::identity(n).scale(-lambda.1);
    (re, im)
}

fn fmt_lambda(l: (f64, f64)) -> String {
    if l.1 == 0.0 {
        format!("{:.6}", l.0)
    } else {
        format!("{:.6}{:+.6}i", l.0, l.1)
    }
}

/// Eigenvalues of `a` with modulus at least `1 - UNIT_CIRCLE_TOL`.
fn marginal_and_unstable(a: &Matrix) -> Result<Vec<(f64, f64)>> {
    Ok(eigenvalues(a)?
        .values
        .into_iter()
        .filter(|l| l.0.hypot(l.1) >= 1.0 - UNIT_CIRCLE_TOL)
        .collect())
}

/// First eigenvalue of `a` (|λ| ≥ 1) at which `[A − λI, B]` loses rank, if any.
fn pbh_stabilizability_failure(a: &Matrix, b: &Matrix) -> Result<Option<(f64, f64)>> {
    let n = a.rows();
    for lambda in marginal_and_unstable(a)? {
        let (re, im) = shifted(a, lambda);
        let zeros = Matrix::zeros(n, b.cols());
        let re = Matrix::hstack(&[&re, b])?;
        let im = Matrix::hstack(&[&im, &zeros])?;
        if complex_rank(&re, &im, RANK_TOL) < n {
            return Ok(Some(lambda));
        }
    }
    Ok(None)
}

/// PBH test: `rank [A − λI, B] = n` at every eigenvalue with `|λ| ≥ 1`.
pub fn is_stabilizable(a: &Matrix, b: &Matrix) -> Result<bool> {
    Ok(pbh_stabilizability_failure(a, b)?.is_none())
}

/// Dual PBH test on `(C, A)`.
pub fn is_detectable(c: &Matrix, a: &Matrix) -> Result<bool> {
    is_stabilizable(&a.transpose(), &c.transpose())
}

pub(crate) fn stabilizability_failure(a: &Matrix, b: &Matrix) -> Result<Option<(f64, f64)>> {
    pbh_stabilizability_failure(a, b)
}

/// First `λ ∈ σ(S)` where `rank [A − λI, B; C, 0] < n + p`, if any.
pub(crate) fn transmission_zero_failure(
    plant: &NominalPlant,
    spectrum: &[(f64, f64)],
) -> Result<Option<((f64, f64), usize)>> {
    let (n, m, p) = (plant.n(), plant.m(), plant.p());
    for &lambda in spectrum {
        let (are, aim) = shifted(&plant.a, lambda);
        let re = Matrix::block(&[
            vec![Some(&are), Some(&plant.b)],
            vec![Some(&plant.c), Some(&Matrix::zeros(p, m))],
        ])?;
        let im = Matrix::block(&[
            vec![Some(&aim), Some(&Matrix::zeros(n, m))],
            vec![Some(&Matrix::zeros(p, n)), Some(&Matrix::zeros(p, m))],
        ])?;
        let rank = complex_rank(&re, &im, RANK_TOL);
        if rank < n + p {
            return Ok(Some((lambda, rank)));
        }
    }
    Ok(None)
}

pub fn check_assumptions(plant: &NominalPlant, exo: &Exosystem, g: &Digraph) -> Result<AssumptionReport> {
    let (n, p) = (plant.n(), plant.p());

    let a1 = match pbh_stabilizability_failure(&plant.a, &plant.b)? {
        None => check(1, "(A, B) stabilizable", true, "PBH rank n at every |λ| >= 1".into()),
        Some(l) => check(1, "(A, B) stabilizable", false, format!("rank [A - λI, B] < {n} at λ = {}", fmt_lambda(l))),
    };

    let a2 = match pbh_stabilizability_failure(&plant.a.transpose(), &plant.c.transpose())? {
        None => check(2, "(C, A) detectable", true, "PBH rank n at every |λ| >= 1".into()),
        Some(l) => check(2, "(C, A) detectable", false, format!("rank [A - λI; C] < {n} at λ = {}", fmt_lambda(l))),
    };

    let s_spec = eigenvalues(&exo.s)?;
    let a3 = match transmission_zero_failure(plant, &s_spec.values)? {
        None => check(
            3,
            "transmission-zero rank at σ(S)",
            true,
            format!("rank [A - λI, B; C, 0] = {} at all {} eigenvalues of S", n + p, s_spec.len()),
        ),
        Some((l, rank)) => check(
            3,
            "transmission-zero rank at σ(S)",
            false,
            format!("rank {rank} < {} at λ = {}", n + p, fmt_lambda(l)),
        ),
    };

    let a4 = if g.has_leader_spanning_tree() {
        check(4, "leader-rooted spanning tree", true, "every follower reachable from node 0".into())
    } else {
        check(4, "leader-rooted spanning tree", false, "some follower is unreachable from node 0".into())
    };

    let off_circle: Vec<_> = s_spec
        .values
        .iter()
        .copied()
        .filter(|l| (l.0.hypot(l.1) - 1.0).abs() > UNIT_CIRCLE_TOL)
        .collect();
    let a5 = if off_circle.is_empty() {
        check(5, "σ(S) on the unit circle", true, format!("all {} eigenvalues have modulus 1", s_spec.len()))
    } else {
        let l = off_circle[0];
        check(
            5,
            "σ(S) on the unit circle",
            false,
            format!("λ = {} has modulus {:.9}", fmt_lambda(l), l.0.hypot(l.1)),
        )
    };

    let rho = eigenvalues(&plant.a)?.spectral_radius();
    let a6 = if rho <= 1.0 + UNIT_CIRCLE_TOL {
        check(6, "no eigenvalue of A outside the unit circle", true, format!("spectral radius {rho:.9}"))
    } else {
        check(6, "no eigenvalue of A outside the unit circle", false, format!("spectral radius {rho:.9} > 1"))
    };

    Ok(AssumptionReport {
        checks: [a1, a2, a3, a4, a5, a6],
    })
}

fn check(id: u8, name: &'static str, passed: bool, detail: String) -> AssumptionCheck {
    AssumptionCheck { id, name, passed, detail }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn example() -> (NominalPlant, Exosystem, Digraph) {
        let (c, s) = (1f64.cos(), 1f64.sin());
        let plant = NominalPlant::new(
            m(&[&[1.0, 1.0], &[0.0, 1.0]]),
            m(&[&[1.0], &[1.0]]),
            m(&[&[1.0, 0.0]]),
            Matrix::zeros(2, 2),
        )
        .unwrap();
        let exo = Exosystem::new(m(&[&[c, s], &[-s, c]]), m(&[&[-1.0, 0.0]]), vec![1.0, 0.0]).unwrap();
        let g = Digraph::from_pairs(4, &[(0, 1), (0, 2), (1, 3), (1, 4)]).unwrap();
        (plant, exo, g)
    }

    #[test]
    fn example_passes_all_six() {
        let (plant, exo, g) = example();
        let report = check_assumptions(&plant, &exo, &g).unwrap();
        assert!(report.all_passed(), "{report}");
        assert_eq!(report.to_string().lines().count(), 6);
    }

    #[test]
    fn unstable_a_fails_assumption_6() {
        let (_, exo, g) = example();
        let plant = NominalPlant::new(
            Matrix::diag(&[2.0, 0.5]).unwrap(),
            m(&[&[1.0], &[1.0]]),
            m(&[&[1.0, 1.0]]),
            Matrix::zeros(2, 2),
        )
        .unwrap();
        let report = check_assumptions(&plant, &exo, &g).unwrap();
        assert!(!report.get(6).passed);
        assert!(report.get(1).passed);
    }

    #[test]
    fn zero_output_fails_detectability() {
        let (mut plant, exo, g) = example();
        plant.c = Matrix::zeros(1, 2);
        let report = check_assumptions(&plant, &exo, &g).unwrap();
        assert!(!report.get(2).passed);
        assert!(!report.get(3).passed);
    }

    #[test]
    fn disconnected_graph_fails_assumption_4() {
        let (plant, exo, _) = example();
        let g = Digraph::from_pairs(3, &[(0, 1), (1, 2)]).unwrap();
        let report = check_assumptions(&plant, &exo, &g).unwrap();
        assert!(!report.get(4).passed);
        assert_eq!(report.failures().count(), 1);
    }

    #[test]
    fn stable_exosystem_fails_assumption_5() {
        let (plant, _, g) = example();
        let exo = Exosystem::new(Matrix::diag(&[0.5]).unwrap(), m(&[&[1.0]]), vec![1.0]).unwrap();
        let report = check_assumptions(&plant, &exo, &g).unwrap();
        assert!(!report.get(5).passed);
    }

    #[test]
    fn uncontrollable_unstable_mode() {
        let a = Matrix::diag(&[1.0, 0.5]).unwrap();
        let b = m(&[&[0.0], &[1.0]]);
        assert!(!is_stabilizable(&a, &b).unwrap());
        let a = Matrix::diag(&[0.3, 1.0]).unwrap();
        assert!(is_stabilizable(&a, &b).unwrap());
        assert!(is_detectable(&m(&[&[0.0, 1.0]]), &a).unwrap());
    }
}
