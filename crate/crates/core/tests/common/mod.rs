#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use delayreg::graph::{Digraph, Edge};
use delayreg::imodel::{build_internal_model, Exosystem};
use delayreg::matcore::{spectral_radius, Matrix};
use delayreg::simulator::{FollowerUncertainty, InitPolicy, Scenario};
use delayreg::synthesis::{DelaySpec, GainSet, NominalPlant};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bound: f64) -> Matrix {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-bound..=bound)).collect();
    Matrix::from_row_slice(rows, cols, &data).unwrap()
}

pub fn rotation(theta: f64) -> Matrix {
    let (c, s) = (theta.cos(), theta.sin());
    Matrix::from_rows(&[vec![c, s], vec![-s, c]]).unwrap()
}

pub fn block_diag(blocks: &[Matrix]) -> Matrix {
    let n: usize = blocks.iter().map(Matrix::rows).sum();
    let mut out = Matrix::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        for i in 0..b.rows() {
            for j in 0..b.cols() {
                out.set(off + i, off + j, b.get(i, j));
            }
        }
        off += b.rows();
    }
    out
}

/// A well-conditioned change of basis `I + 0.3·R`.
pub fn basis(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    &Matrix::identity(n) + &uniform(rng, n, n, 0.3 / n as f64)
}

/// Real blocks with unit-modulus spectrum and the eigenvalues they carry.
pub struct UnitCircleBlocks {
    pub blocks: Vec<Matrix>,
    /// Distinct eigenvalues `(re, im)`.
    pub distinct: Vec<(f64, f64)>,
}

/// Blocks of total size `q`, built from rotations by angles in `(0.2, π − 0.2)`
/// and `±1`; with probability ½ a block repeats an earlier one.
pub fn unit_circle_blocks(rng: &mut ChaCha8Rng, q: usize) -> UnitCircleBlocks {
    let mut blocks = Vec::new();
    let mut distinct: Vec<(f64, f64)> = Vec::new();
    let mut used = 0;
    while used < q {
        let remaining = q - used;
        let repeat = !blocks.is_empty() && rng.random_bool(0.5);
        let block: Matrix = if repeat {
            let candidates: Vec<&Matrix> = blocks.iter().filter(|b: &&Matrix| b.rows() <= remaining).collect();
            if candidates.is_empty() {
                Matrix::from_rows(&[vec![1.0]]).unwrap()
            } else {
                candidates[rng.random_range(0..candidates.len())].clone()
            }
        } else if remaining >= 2 && rng.random_bool(0.6) {
            rotation(rng.random_range(0.2..std::f64::consts::PI - 0.2))
        } else if rng.random_bool(0.5) {
            Matrix::from_rows(&[vec![1.0]]).unwrap()
        } else {
            Matrix::from_rows(&[vec![-1.0]]).unwrap()
        };
        let eigs: Vec<(f64, f64)> = if block.rows() == 2 {
            let (c, s) = (block.get(0, 0), block.get(0, 1));
            vec![(c, s), (c, -s)]
        } else {
            vec![(block.get(0, 0), 0.0)]
        };
        for e in eigs {
            if !distinct.iter().any(|d| (d.0 - e.0).abs() < 1e-12 && (d.1 - e.1).abs() < 1e-12) {
                distinct.push(e);
            }
        }
        used += block.rows();
        blocks.push(block);
    }
    UnitCircleBlocks { blocks, distinct }
}

/// Monic polynomial coefficients `[c_0, …, c_{d-1}]` (leading 1 omitted) with
/// the given roots, conjugate pairs included.
pub fn poly_from_roots(roots: &[(f64, f64)]) -> Vec<f64> {
    // Complex coefficient arithmetic, highest degree first.
    let mut coeffs: Vec<(f64, f64)> = vec![(1.0, 0.0)];
    for &(re, im) in roots {
        let mut next = vec![(0.0, 0.0); coeffs.len() + 1];
        for (k, &(a, b)) in coeffs.iter().enumerate() {
            next[k].0 += a;
            next[k].1 += b;
            next[k + 1].0 -= a * re - b * im;
            next[k + 1].1 -= a * im + b * re;
        }
        coeffs = next;
    }
    coeffs[1..].iter().rev().map(|c| c.0).collect()
}

/// Independent Riccati oracle: for `X = P⁻¹` the Riccati equation of the pair
/// `(Ã, B)` with zero state weight becomes the Stein equation
/// `X = Ã⁻¹ X Ã⁻ᵀ + Ã⁻¹ B Bᵀ Ã⁻ᵀ`, solved here through its Kronecker form.
pub fn riccati_oracle(a_scaled: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a_scaled.nrows();
    let ai = a_scaled.clone().try_inverse().expect("invertible");
    let rhs = &ai * b * b.transpose() * ai.transpose();
    let kron = ai.kronecker(&ai);
    let lhs = DMatrix::<f64>::identity(n * n, n * n) - kron;
    let vec_rhs = DMatrix::from_column_slice(n * n, 1, rhs.as_slice());
    let sol = lhs.lu().solve(&vec_rhs).expect("Stein equation solvable");
    let x = DMatrix::from_column_slice(n, n, sol.as_slice());
    x.try_inverse().expect("X invertible")
}

/// Random follower graph: a random tree rooted at the leader plus extra
/// follower-to-follower edges. When `rooted` is false some followers may be
/// left unreachable.
pub fn random_graph(rng: &mut ChaCha8Rng, n_followers: usize, extra_prob: f64, rooted: bool) -> Digraph {
    let mut edges = Vec::new();
    let has = |from: usize, to: usize, edges: &Vec<Edge>| edges.iter().any(|e: &Edge| e.from == from && e.to == to);
    for i in 1..=n_followers {
        if rooted || rng.random_bool(0.7) {
            let parent = rng.random_range(0..i);
            edges.push(Edge {
                from: parent,
                to: i,
                weight: rng.random_range(0.5..1.5),
            });
        }
    }
    for from in 1..=n_followers {
        for to in 1..=n_followers {
            if from != to && !has(from, to, &edges) && rng.random_bool(extra_prob) {
                edges.push(Edge {
                    from,
                    to,
                    weight: rng.random_range(0.5..1.5),
                });
            }
        }
    }
    Digraph::new(n_followers, edges).unwrap()
}

pub struct ScenarioShape {
    pub max_agents: usize,
    pub max_n: usize,
    pub max_r: usize,
    pub horizon: usize,
}

pub const SMALL: ScenarioShape = ScenarioShape {
    max_agents: 4,
    max_n: 3,
    max_r: 3,
    horizon: 200,
};

/// Random scenario with bounded growth. Gains are unrelated random matrices,
/// so the loop need not converge; the plant is scaled to spectral radius at
/// most 1 and the gains kept small.
pub fn random_scenario(rng: &mut ChaCha8Rng, shape: &ScenarioShape) -> Scenario {
    let n = rng.random_range(1..=shape.max_n);
    let m = rng.random_range(1..=2);
    let p = rng.random_range(1..=2);
    let q = rng.random_range(1..=3);
    let n_agents = rng.random_range(1..=shape.max_agents);

    let mut a = uniform(rng, n, n, 1.0);
    let rho = spectral_radius(&a).unwrap();
    if rho > 1e-9 {
        a = a.scale(rng.random_range(0.6..1.0) / rho);
    }
    let plant = NominalPlant::new(a, uniform(rng, n, m, 1.0), uniform(rng, p, n, 1.0), uniform(rng, n, q, 1.0)).unwrap();

    let blocks = unit_circle_blocks(rng, q);
    let t = basis(rng, q);
    let s = &(&t * &block_diag(&blocks.blocks)) * &t.inverse().unwrap();
    let v0: Vec<f64> = (0..q).map(|_| rng.random_range(-1.0..1.0)).collect();
    let exo = Exosystem::new(s, uniform(rng, p, q, 1.0), v0).unwrap();
    let im = build_internal_model(&exo.s, p, None).unwrap();

    let graph = random_graph(rng, n_agents, 0.3, true);
    let r = rng.random_range(0..=shape.max_r);
    let r_con = rng.random_range(0..=r);
    let delays = DelaySpec::new(r_con, r - r_con);

    let nz = im.nz();
    let mut gains = GainSet::from_joint(&uniform(rng, m, n + nz, 0.2), n, 0.1, 1.0, r);
    gains.k_1 = uniform(rng, m, nz, 0.2);
    gains.k_2 = uniform(rng, m, n, 0.2);
    gains.l_obs = Some(uniform(rng, n, p, 0.2));

    let uncertainties = (0..n_agents)
        .map(|_| FollowerUncertainty {
            da: uniform(rng, n, n, 0.05),
            db: uniform(rng, n, m, 0.05),
            de: uniform(rng, n, q, 0.05),
            dc: uniform(rng, p, n, 0.05),
        })
        .collect();
    let per_agent_e = rng
        .random_bool(0.5)
        .then(|| (0..n_agents).map(|_| uniform(rng, n, q, 1.0)).collect());

    Scenario {
        plant,
        per_agent_e,
        uncertainties,
        exo,
        graph,
        delays,
        im,
        gains,
        horizon: shape.horizon,
        init: InitPolicy::Random {
            seed: rng.random(),
            bound: 1.0,
        },
    }
}

/// `|a − b| ≤ tol · max(1, |a|, |b|)`.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1.0_f64.max(a.abs()).max(b.abs())
}

fn scale_gains(g: &mut GainSet, s: f64) {
    g.k_x = g.k_x.scale(s);
    g.k_z = g.k_z.scale(s);
    g.k_1 = g.k_1.scale(s);
    g.k_2 = g.k_2.scale(s);
    g.l_obs = g.l_obs.as_ref().map(|l| l.scale(s));
}

/// [`random_scenario`] with the gains halved until neither control law
/// trips the divergence guard.
pub fn bounded_scenario(rng: &mut ChaCha8Rng, shape: &ScenarioShape) -> Scenario {
    use delayreg::simulator::{simulate, LawForm};
    use delayreg::synthesis::Mode;
    let mut s = random_scenario(rng, shape);
    for _ in 0..20 {
        let ok = [Mode::State, Mode::Output]
            .iter()
            .all(|&mode| simulate(&s, mode, LawForm::Transformed).is_ok());
        if ok {
            return s;
        }
        scale_gains(&mut s.gains, 0.5);
    }
    panic!("could not bound the random scenario");
}
