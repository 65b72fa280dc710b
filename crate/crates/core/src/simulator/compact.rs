//! Stacked Kronecker-form recurrence
//! `x_c(t+1) = A₀ x_c(t) + A₁ x_c(t − r) + B v(t)`, used as an oracle for the
//! agent-by-agent simulator.

use crate::error::{Error, Result};
use crate::matcore::{kron, Matrix};
use crate::synthesis::Mode;

use super::agentwise::check_state;
use super::delay::DelayLine;
use super::trace::{SimulationTrace, TraceDims, TraceStep};
use super::{mode_requires_observer, Scenario};

/// Block matrices of the uncertain closed loop with exosystem input.
#[derive(Clone, Debug)]
pub struct CompactSystem {
    pub mode: Mode,
    pub a0: Matrix,
    pub a1: Matrix,
    pub b: Matrix,
    /// Stacked input `u(t) = K x_c(t − r_com)`.
    pub k: Matrix,
    /// `y = C_y x_c`.
    pub c_y: Matrix,
    /// `e_v = C_ev x_c + D_ev v`.
    pub c_ev: Matrix,
    pub d_ev: Matrix,
    /// `e = C_y x_c + D_e v`.
    pub d_e: Matrix,
}

impl CompactSystem {
    pub fn build(s: &Scenario, mode: Mode) -> Result<Self> {
        s.validate()?;
        mode_requires_observer(mode, &s.gains)?;
        let n_agents = s.n_agents();
        let eye = Matrix::identity(n_agents);
        let plants = s.agent_plants();
        let (n, p, nz) = (s.plant.n(), s.plant.p(), s.im.nz());
        let (h, _) = s.graph.h_matrix();

        let a_bar = block_diag(plants.iter().map(|pl| &pl.a))?;
        let b_bar = block_diag(plants.iter().map(|pl| &pl.b))?;
        let c_diag = block_diag(plants.iter().map(|pl| &pl.c))?;
        let e_bar = Matrix::vstack(&plants.iter().map(|pl| &pl.e).collect::<Vec<_>>())?;
        let c_bar = &kron(&h, &Matrix::identity(p)) * &c_diag;

        let weights = s.graph.leader_weights();
        let row_sums: Vec<f64> = (0..n_agents).map(|i| (0..n_agents).map(|j| h.get(i, j)).sum()).collect();
        if weights.iter().zip(&row_sums).any(|(w, r)| (w - r).abs() > 1e-12 * (1.0 + w.abs())) {
            return Err(Error::numerical("compact oracle", "leader weights differ from H·1"));
        }
        let f_bar = kron(&Matrix::column(&weights)?, &s.exo.f);
        let g1_bar = kron(&eye, &s.im.g1);
        let g2_bar = kron(&eye, &s.im.g2);
        let g2c = &g2_bar * &c_bar;
        let g2f = &g2_bar * &f_bar;

        let (a0, a1, b, k) = match mode {
            Mode::State => {
                let k = Matrix::hstack(&[&kron(&h, &s.gains.k_x), &kron(&eye, &s.gains.k_z)])?;
                let a0 = Matrix::block(&[vec![Some(&a_bar), None], vec![Some(&g2c), Some(&g1_bar)]])?;
                let bk = &b_bar * &k;
                let a1 = Matrix::vstack(&[&bk, &Matrix::zeros(n_agents * nz, k.cols())])?;
                let b = Matrix::vstack(&[&e_bar, &g2f])?;
                (a0, a1, b, k)
            }
            Mode::Output => {
                let l = s.gains.observer()?;
                let xn = Matrix::zeros(s.plant.m() * n_agents, n_agents * n);
                let k = Matrix::hstack(&[&xn, &kron(&eye, &s.gains.k_1), &kron(&h, &s.gains.k_2)])?;
                let l_bar = kron(&eye, l);
                let s1 = &kron(&eye, &s.plant.a) - &kron(&h, &(l * &s.plant.c));
                let s2c = &l_bar * &c_bar;
                let a0 = Matrix::block(&[
                    vec![Some(&a_bar), None, None],
                    vec![Some(&g2c), Some(&g1_bar), None],
                    vec![Some(&s2c), None, Some(&s1)],
                ])?;
                let bk = &b_bar * &k;
                let nominal_bk = &kron(&eye, &s.plant.b) * &k;
                let a1 = Matrix::vstack(&[&bk, &Matrix::zeros(n_agents * nz, k.cols()), &nominal_bk])?;
                let b = Matrix::vstack(&[&e_bar, &g2f, &(&l_bar * &f_bar)])?;
                (a0, a1, b, k)
            }
        };
        let pad = Matrix::zeros(c_diag.rows(), a0.cols() - c_diag.cols());
        Ok(CompactSystem {
            mode,
            c_y: Matrix::hstack(&[&c_diag, &pad])?,
            c_ev: Matrix::hstack(&[&c_bar, &pad])?,
            d_ev: f_bar,
            d_e: kron(&Matrix::column(&vec![1.0; n_agents])?, &s.exo.f),
            a0,
            a1,
            b,
            k,
        })
    }
}

fn block_diag<'a>(blocks: impl Iterator<Item = &'a Matrix>) -> Result<Matrix> {
    let blocks: Vec<&Matrix> = blocks.collect();
    let rows: Vec<Vec<Option<&Matrix>>> = (0..blocks.len())
        .map(|i| (0..blocks.len()).map(|j| (i == j).then_some(blocks[i])).collect())
        .collect();
    Matrix::block(&rows)
}

pub fn simulate_compact_oracle(s: &Scenario, mode: Mode) -> Result<SimulationTrace> {
    let sys = CompactSystem::build(s, mode)?;
    let n_agents = s.n_agents();
    let (n, m, p, nz) = (s.plant.n(), s.plant.m(), s.plant.p(), s.im.nz());
    let output = mode == Mode::Output;
    let mut trace = SimulationTrace::new(TraceDims {
        n_agents,
        n,
        m,
        p,
        q: s.plant.q(),
        nz,
        has_xi: output,
    });
    if s.horizon == 0 {
        return Ok(trace);
    }
    let init = s.initial_state();
    let mut xc: Vec<f64> = init.x.iter().chain(&init.z).flatten().copied().collect();
    if output {
        xc.extend(init.xi.iter().flatten());
    }
    let mut v = s.exo.v0.clone();
    let mut loop_line = DelayLine::new(s.delays.r());
    let mut com_line = DelayLine::new(s.delays.r_com);

    let split = |flat: &[f64], offset: usize, len: usize| -> Vec<Vec<f64>> {
        (0..n_agents)
            .map(|i| flat[offset + i * len..offset + (i + 1) * len].to_vec())
            .collect()
    };
    let nx = n_agents * n;
    let nzz = n_agents * nz;

    for t in 0..s.horizon {
        loop_line.push(xc.clone());
        com_line.push(xc.clone());
        let u = sys.k.mul_vec(com_line.delayed());
        let y = sys.c_y.mul_vec(&xc);
        let e: Vec<f64> = y.iter().zip(sys.d_e.mul_vec(&v)).map(|(a, b)| a + b).collect();
        let ev: Vec<f64> = sys
            .c_ev
            .mul_vec(&xc)
            .iter()
            .zip(sys.d_ev.mul_vec(&v))
            .map(|(a, b)| a + b)
            .collect();
        let x_blocks = split(&xc, 0, n);
        let z_blocks = split(&xc, nx, nz);
        let xi_blocks = if output { split(&xc, nx + nzz, n) } else { Vec::new() };
        trace.steps.push(TraceStep {
            t,
            v: v.clone(),
            x: x_blocks,
            z: z_blocks,
            xi: xi_blocks,
            u: split(&u, 0, m),
            y: split(&y, 0, p),
            e: split(&e, 0, p),
            ev: split(&ev, 0, p),
        });
        if t + 1 == s.horizon {
            break;
        }
        let next: Vec<f64> = sys
            .a0
            .mul_vec(&xc)
            .iter()
            .zip(sys.a1.mul_vec(loop_line.delayed()))
            .zip(sys.b.mul_vec(&v))
            .map(|((a, b), c)| a + b + c)
            .collect();
        xc = next;
        v = s.exo.step(&v);
        let x_blocks = split(&xc, 0, n);
        let z_blocks = split(&xc, nx, nz);
        let xi_blocks = if output { split(&xc, nx + nzz, n) } else { Vec::new() };
        check_state(t + 1, &[&x_blocks, &z_blocks, &xi_blocks])?;
    }
    Ok(trace)
}
